//! IDX reader for MNIST image and label files, plain or gzip-compressed.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;

use crate::error::{Error, Result};
use crate::geometry::MNIST_SIDE;

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

pub type Raster = Vec<u8>;

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path).map_err(|e| Error::io(path, e))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::format(0, format!("gzip stream: {e}")))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn be_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::format(offset as u64, "truncated header"))
}

/// Parses an in-memory IDX3 image file into 28x28 rasters.
pub fn parse_idx_images(bytes: &[u8]) -> Result<Vec<Raster>> {
    let magic = be_u32(bytes, 0)?;
    if magic != IMAGE_MAGIC {
        return Err(Error::format(
            0,
            format!("bad image magic {magic:#010x}, expected {IMAGE_MAGIC:#010x}"),
        ));
    }
    let count = be_u32(bytes, 4)? as usize;
    let rows = be_u32(bytes, 8)? as usize;
    let cols = be_u32(bytes, 12)? as usize;
    if rows != MNIST_SIDE || cols != MNIST_SIDE {
        return Err(Error::format(
            8,
            format!("expected 28x28 images, header says {rows}x{cols}"),
        ));
    }
    let body = &bytes[16..];
    let size = rows * cols;
    if body.len() < count * size {
        let complete = body.len() / size;
        return Err(Error::format(
            (16 + complete * size) as u64,
            format!("truncated: header promises {count} images, found {complete}"),
        ));
    }
    Ok(body[..count * size].chunks_exact(size).map(<[u8]>::to_vec).collect())
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = be_u32(bytes, 0)?;
    if magic != LABEL_MAGIC {
        return Err(Error::format(
            0,
            format!("bad label magic {magic:#010x}, expected {LABEL_MAGIC:#010x}"),
        ));
    }
    let count = be_u32(bytes, 4)? as usize;
    let body = &bytes[8..];
    if body.len() < count {
        return Err(Error::format(
            (8 + body.len()) as u64,
            format!("truncated: header promises {count} labels, found {}", body.len()),
        ));
    }
    Ok(body[..count].to_vec())
}

pub fn read_mnist_idx(path: impl AsRef<Path>) -> Result<Vec<Raster>> {
    let path = path.as_ref();
    parse_idx_images(&read_bytes(path)?).map_err(|e| with_path(e, path))
}

pub fn read_mnist_labels(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    let path = path.as_ref();
    parse_idx_labels(&read_bytes(path)?).map_err(|e| with_path(e, path))
}

fn with_path(e: Error, path: &Path) -> Error {
    match e {
        Error::Format { offset, msg } => Error::Format {
            offset,
            msg: format!("{}: {msg}", path.display()),
        },
        other => other,
    }
}

fn locate(dir: &Path, stem: &str) -> Option<PathBuf> {
    [stem.to_string(), format!("{stem}.gz")]
        .into_iter()
        .map(|name| dir.join(name))
        .find(|p| p.is_file())
}

/// Images and labels of one MNIST directory, train and t10k pooled in that
/// order. Either file pair may be missing, but not both.
#[derive(Debug, Clone)]
pub struct MnistPool {
    pub images: Vec<Raster>,
    pub labels: Vec<u8>,
}

pub fn load_mnist_dir(dir: impl AsRef<Path>) -> Result<MnistPool> {
    let dir = dir.as_ref();
    let mut pool = MnistPool {
        images: Vec::new(),
        labels: Vec::new(),
    };
    let mut found = false;
    for prefix in ["train", "t10k"] {
        let Some(img) = locate(dir, &format!("{prefix}-images-idx3-ubyte")) else {
            continue;
        };
        found = true;
        let images = read_mnist_idx(&img)?;
        let labels = match locate(dir, &format!("{prefix}-labels-idx1-ubyte")) {
            Some(lbl) => read_mnist_labels(&lbl)?,
            None => vec![0; images.len()],
        };
        if labels.len() != images.len() {
            return Err(Error::format(
                4,
                format!(
                    "{prefix}: {} images but {} labels",
                    images.len(),
                    labels.len()
                ),
            ));
        }
        pool.images.extend(images);
        pool.labels.extend(labels);
    }
    if !found {
        return Err(Error::io(
            dir.join("train-images-idx3-ubyte[.gz]"),
            std::io::Error::new(std::io::ErrorKind::NotFound, "no MNIST image file"),
        ));
    }
    Ok(pool)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn image_file(count: u32, rows: u32, cols: u32, payload: usize) -> Vec<u8> {
        let mut v = Vec::new();
        for w in [IMAGE_MAGIC, count, rows, cols] {
            v.extend_from_slice(&w.to_be_bytes());
        }
        v.extend((0..payload).map(|i| (i % 251) as u8));
        v
    }

    #[test]
    fn parses_images() {
        let bytes = image_file(3, 28, 28, 3 * 784);
        let imgs = parse_idx_images(&bytes).unwrap();
        assert_eq!(imgs.len(), 3);
        assert!(imgs.iter().all(|r| r.len() == 784));
        assert_eq!(imgs[1][0], (784 % 251) as u8);
    }

    #[test]
    fn empty_file_is_ok() {
        assert!(parse_idx_images(&image_file(0, 28, 28, 0)).unwrap().is_empty());
    }

    #[test]
    fn rejects_wrong_magic() {
        let mut bytes = image_file(1, 28, 28, 784);
        bytes[3] = 0x02;
        match parse_idx_images(&bytes) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 0),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_truncation_and_dims() {
        match parse_idx_images(&image_file(2, 28, 28, 784 + 10)) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 16 + 784),
            other => panic!("expected format error, got {other:?}"),
        }
        assert!(matches!(
            parse_idx_images(&image_file(1, 27, 28, 784)),
            Err(Error::Format { offset: 8, .. })
        ));
        assert!(matches!(
            parse_idx_images(&[0, 0, 8]),
            Err(Error::Format { offset: 0, .. })
        ));
    }

    #[test]
    fn labels() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
        bytes.extend_from_slice(&3u32.to_be_bytes());
        bytes.extend_from_slice(&[7, 2, 1]);
        assert_eq!(parse_idx_labels(&bytes).unwrap(), vec![7, 2, 1]);
        bytes.pop();
        assert!(parse_idx_labels(&bytes).is_err());
    }

    #[test]
    fn reads_gzip_files() {
        use flate2::write::GzEncoder;
        use std::io::Write;

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("train-images-idx3-ubyte.gz");
        let mut enc = GzEncoder::new(Vec::new(), flate2::Compression::default());
        enc.write_all(&image_file(2, 28, 28, 2 * 784)).unwrap();
        fs::write(&path, enc.finish().unwrap()).unwrap();

        let pool = load_mnist_dir(dir.path()).unwrap();
        assert_eq!(pool.images.len(), 2);
        assert_eq!(pool.labels, vec![0, 0]);
    }

    #[test]
    fn missing_dir_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_mnist_dir(dir.path()), Err(Error::Io { .. })));
    }
}
