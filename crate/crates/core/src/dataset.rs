//! RCS-map/echo datasets and their on-disk containers.
//!
//! Both containers are a text header closed by an `end` line followed by
//! little-endian binary64 payload. Echo payloads interleave `re, im` per
//! sample, echoes back to back; map payloads store cells row-major.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::{Array2, ArrayView2};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::forward::{add_awgn, synthesize_echo, Echo, SensingMatrix};
use crate::geometry::{mnist_to_rcs, split_dataset, RcsMap};
use crate::mnist::load_mnist_dir;

/// Ground-truth maps with their echoes, index-aligned.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub maps: Vec<RcsMap>,
    pub echoes: Vec<Echo>,
}

impl Dataset {
    /// Noise-free echoes of every map.
    pub fn synthesize(a: &SensingMatrix, maps: Vec<RcsMap>) -> Result<Self> {
        let echoes = maps
            .iter()
            .map(|m| synthesize_echo(a, m))
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset { maps, echoes })
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    pub fn echo_refs(&self) -> Vec<&Echo> {
        self.echoes.iter().collect()
    }

    pub fn head(&self, n: usize) -> Dataset {
        let n = n.min(self.len());
        Dataset {
            maps: self.maps[..n].to_vec(),
            echoes: self.echoes[..n].to_vec(),
        }
    }

    /// Copy with every echo corrupted at `snr_db`. Per-sample noise seeds are
    /// drawn from one stream seeded by `seed`, so sample `i` always gets the
    /// same draw for a given seed.
    pub fn with_noise(&self, snr_db: f64, seed: u64) -> Result<Dataset> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let echoes = self
            .echoes
            .iter()
            .map(|e| add_awgn(e, snr_db, rng.random()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset {
            maps: self.maps.clone(),
            echoes,
        })
    }
}

#[derive(Debug, Clone)]
pub struct Splits {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
}

/// Loads the MNIST pool named by `cfg`, draws the seeded split and
/// synthesizes noise-free echoes for every part.
pub fn build_splits(cfg: &ExperimentConfig, a: &SensingMatrix) -> Result<Splits> {
    let pool = load_mnist_dir(&cfg.mnist_dir)?;
    let split = split_dataset(pool.images.len(), (cfg.n_train, cfg.n_val, cfg.n_test), cfg.seed)?;
    let part = |idx: &[usize]| -> Result<Dataset> {
        let maps = idx
            .iter()
            .map(|&i| mnist_to_rcs(&pool.images[i]))
            .collect::<Result<Vec<_>>>()?;
        Dataset::synthesize(a, maps)
    };
    Ok(Splits {
        train: part(&split.train)?,
        val: part(&split.val)?,
        test: part(&split.test)?,
    })
}

pub const ECHO_MAGIC: &str = "radar-lfista echoes";
pub const MAP_MAGIC: &str = "radar-lfista maps";

/// Acquisition parameters recorded alongside stored echoes.
#[derive(Debug, Clone, PartialEq)]
pub struct EchoHeader {
    pub count: usize,
    pub length: usize,
    pub f0: f64,
    pub bandwidth: f64,
    pub n_freqs: usize,
    pub n_antennas: usize,
    pub snr_db: Option<f64>,
    pub seed: u64,
}

impl EchoHeader {
    pub fn for_config(cfg: &ExperimentConfig, echoes: &[Echo], snr_db: Option<f64>, seed: u64) -> Self {
        EchoHeader {
            count: echoes.len(),
            length: echoes.first().map_or(cfg.n_freqs * cfg.antennas, Echo::len),
            f0: cfg.f0_ghz * 1e9,
            bandwidth: cfg.bandwidth_ghz * 1e9,
            n_freqs: cfg.n_freqs,
            n_antennas: cfg.antennas,
            snr_db,
            seed,
        }
    }
}

fn split_header(bytes: &[u8]) -> Result<(&str, &[u8])> {
    let marker = b"\nend\n";
    let at = bytes
        .windows(marker.len())
        .position(|w| w == marker)
        .ok_or_else(|| Error::format(0, "header has no end line"))?;
    let head = std::str::from_utf8(&bytes[..at])
        .map_err(|e| Error::format(e.valid_up_to() as u64, "header is not UTF-8"))?;
    Ok((head, &bytes[at + marker.len()..]))
}

fn header_fields<'a>(head: &'a str, magic: &str) -> Result<Vec<(&'a str, &'a str)>> {
    let mut lines = head.lines();
    if lines.next() != Some(magic) {
        return Err(Error::format(0, format!("expected '{magic}' header")));
    }
    lines
        .map(|l| {
            l.split_once(' ')
                .ok_or_else(|| Error::format(0, format!("malformed header line '{l}'")))
        })
        .collect()
}

fn field<T: std::str::FromStr>(fields: &[(&str, &str)], key: &str) -> Result<T> {
    let raw = fields
        .iter()
        .find(|(k, _)| *k == key)
        .map(|(_, v)| *v)
        .ok_or_else(|| Error::format(0, format!("header lacks '{key}'")))?;
    raw.parse()
        .map_err(|_| Error::format(0, format!("bad value '{raw}' for '{key}'")))
}

fn read_f64s(payload: &[u8], header_len: usize, count: usize) -> Result<Vec<f64>> {
    let need = 8 * count;
    if payload.len() != need {
        return Err(Error::format(
            (header_len + payload.len().min(need)) as u64,
            format!("payload has {} bytes, header implies {need}", payload.len()),
        ));
    }
    Ok(payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

pub fn encode_echoes(header: &EchoHeader, echoes: &[Echo]) -> Result<Vec<u8>> {
    if echoes.len() != header.count || echoes.iter().any(|e| e.len() != header.length) {
        return Err(Error::invalid("echoes disagree with header count/length"));
    }
    let mut out = String::new();
    writeln!(out, "{ECHO_MAGIC}").unwrap();
    writeln!(out, "count {}", header.count).unwrap();
    writeln!(out, "length {}", header.length).unwrap();
    writeln!(out, "f0 {}", header.f0).unwrap();
    writeln!(out, "bandwidth {}", header.bandwidth).unwrap();
    writeln!(out, "n_freqs {}", header.n_freqs).unwrap();
    writeln!(out, "n_antennas {}", header.n_antennas).unwrap();
    match header.snr_db {
        Some(v) => writeln!(out, "snr_db {v}").unwrap(),
        None => writeln!(out, "snr_db none").unwrap(),
    }
    writeln!(out, "seed {}", header.seed).unwrap();
    writeln!(out, "end").unwrap();
    let mut bytes = out.into_bytes();
    for z in echoes.iter().flat_map(|e| &e.samples) {
        bytes.extend_from_slice(&z.re.to_le_bytes());
        bytes.extend_from_slice(&z.im.to_le_bytes());
    }
    Ok(bytes)
}

pub fn decode_echoes(bytes: &[u8]) -> Result<(EchoHeader, Vec<Echo>)> {
    let (head, payload) = split_header(bytes)?;
    let f = header_fields(head, ECHO_MAGIC)?;
    let snr_raw: String = field(&f, "snr_db")?;
    let snr_db = if snr_raw == "none" {
        None
    } else {
        Some(
            snr_raw
                .parse()
                .map_err(|_| Error::format(0, format!("bad snr_db '{snr_raw}'")))?,
        )
    };
    let header = EchoHeader {
        count: field(&f, "count")?,
        length: field(&f, "length")?,
        f0: field(&f, "f0")?,
        bandwidth: field(&f, "bandwidth")?,
        n_freqs: field(&f, "n_freqs")?,
        n_antennas: field(&f, "n_antennas")?,
        snr_db,
        seed: field(&f, "seed")?,
    };
    let values = read_f64s(payload, bytes.len() - payload.len(), 2 * header.count * header.length)?;
    let echoes = values
        .chunks_exact(2 * header.length.max(1))
        .take(header.count)
        .map(|c| Echo {
            samples: c.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect(),
            snr_db,
        })
        .collect();
    Ok((header, echoes))
}

pub fn encode_maps(maps: &[RcsMap]) -> Result<Vec<u8>> {
    let len = maps.first().map_or(0, RcsMap::len);
    if maps.iter().any(|m| m.len() != len) {
        return Err(Error::invalid("maps differ in size"));
    }
    let mut bytes = format!("{MAP_MAGIC}\ncount {}\ncells {len}\nend\n", maps.len()).into_bytes();
    for v in maps.iter().flat_map(|m| m.values()) {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    Ok(bytes)
}

pub fn decode_maps(bytes: &[u8]) -> Result<Vec<RcsMap>> {
    let (head, payload) = split_header(bytes)?;
    let f = header_fields(head, MAP_MAGIC)?;
    let count: usize = field(&f, "count")?;
    let cells: usize = field(&f, "cells")?;
    let values = read_f64s(payload, bytes.len() - payload.len(), count * cells)?;
    values
        .chunks_exact(cells.max(1))
        .take(count)
        .map(|c| RcsMap::new(c.to_vec()))
        .collect()
}

pub const IMAGE_MAGIC: &str = "radar-lfista images";

/// Unconstrained reconstructions, one per row.
pub fn encode_images(images: ArrayView2<f64>) -> Vec<u8> {
    let mut bytes = format!("{IMAGE_MAGIC}\ncount {}\ncells {}\nend\n", images.nrows(), images.ncols()).into_bytes();
    for v in images.iter() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    bytes
}

pub fn decode_images(bytes: &[u8]) -> Result<Array2<f64>> {
    let (head, payload) = split_header(bytes)?;
    let f = header_fields(head, IMAGE_MAGIC)?;
    let count: usize = field(&f, "count")?;
    let cells: usize = field(&f, "cells")?;
    let values = read_f64s(payload, bytes.len() - payload.len(), count * cells)?;
    Ok(Array2::from_shape_vec((count, cells), values).expect("length checked"))
}

pub fn write_images(path: impl AsRef<Path>, images: ArrayView2<f64>) -> Result<()> {
    write(path.as_ref(), &encode_images(images))
}

pub fn read_images(path: impl AsRef<Path>) -> Result<Array2<f64>> {
    let path = path.as_ref();
    with_path(path, decode_images(&read(path)?))
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn with_path<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Format { offset, msg } => Error::Format {
            offset,
            msg: format!("{}: {msg}", path.display()),
        },
        other => other,
    })
}

pub fn write_echoes(path: impl AsRef<Path>, header: &EchoHeader, echoes: &[Echo]) -> Result<()> {
    write(path.as_ref(), &encode_echoes(header, echoes)?)
}

pub fn read_echoes(path: impl AsRef<Path>) -> Result<(EchoHeader, Vec<Echo>)> {
    let path = path.as_ref();
    with_path(path, decode_echoes(&read(path)?))
}

pub fn write_maps(path: impl AsRef<Path>, maps: &[RcsMap]) -> Result<()> {
    write(path.as_ref(), &encode_maps(maps)?)
}

pub fn read_maps(path: impl AsRef<Path>) -> Result<Vec<RcsMap>> {
    let path = path.as_ref();
    with_path(path, decode_maps(&read(path)?))
}

/// Writes `<stem>.maps` and `<stem>.echoes` into `dir`.
pub fn save_dataset(dir: impl AsRef<Path>, stem: &str, cfg: &ExperimentConfig, data: &Dataset, seed: u64) -> Result<()> {
    let dir = dir.as_ref();
    let snr = data.echoes.first().and_then(|e| e.snr_db);
    write_maps(dir.join(format!("{stem}.maps")), &data.maps)?;
    write_echoes(
        dir.join(format!("{stem}.echoes")),
        &EchoHeader::for_config(cfg, &data.echoes, snr, seed),
        &data.echoes,
    )
}

pub fn load_dataset(dir: impl AsRef<Path>, stem: &str) -> Result<Dataset> {
    let dir = dir.as_ref();
    let maps = read_maps(dir.join(format!("{stem}.maps")))?;
    let (_, echoes) = read_echoes(dir.join(format!("{stem}.echoes")))?;
    if maps.len() != echoes.len() {
        return Err(Error::format(
            0,
            format!("{stem}: {} maps but {} echoes", maps.len(), echoes.len()),
        ));
    }
    Ok(Dataset { maps, echoes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::SensingMatrix;

    fn data() -> Dataset {
        let a = SensingMatrix::from_real(Array2::from_shape_fn((5, 9), |(i, j)| (i as f64 - j as f64) * 0.3)).unwrap();
        let maps = (0..3)
            .map(|k| RcsMap::new((0..9).map(|j| ((j * k + 1) % 4) as f64 / 4.0).collect()).unwrap())
            .collect();
        Dataset::synthesize(&a, maps).unwrap()
    }

    #[test]
    fn echo_container_round_trip() {
        let d = data().with_noise(10.0, 4).unwrap();
        let cfg = ExperimentConfig::default();
        let h = EchoHeader::for_config(&cfg, &d.echoes, Some(10.0), 4);
        let bytes = encode_echoes(&h, &d.echoes).unwrap();
        let (h2, e2) = decode_echoes(&bytes).unwrap();
        assert_eq!(h2, h);
        assert_eq!(e2, d.echoes);
        assert!(matches!(decode_echoes(&bytes[..bytes.len() - 3]), Err(Error::Format { .. })));
    }

    #[test]
    fn map_container_round_trip() {
        let d = data();
        let bytes = encode_maps(&d.maps).unwrap();
        assert_eq!(decode_maps(&bytes).unwrap(), d.maps);
        assert!(decode_maps(&bytes[..bytes.len() - 8]).is_err());
    }

    #[test]
    fn image_container_round_trip() {
        let m = Array2::from_shape_fn((3, 4), |(i, j)| i as f64 - 1.5 * j as f64);
        assert_eq!(decode_images(&encode_images(m.view())).unwrap(), m);
    }

    #[test]
    fn noise_is_seeded_per_sample() {
        let d = data();
        let a = d.with_noise(5.0, 11).unwrap();
        let b = d.with_noise(5.0, 11).unwrap();
        let c = d.with_noise(5.0, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.echoes, c.echoes);
        assert_eq!(a.head(2).echoes, a.echoes[..2].to_vec());
    }
}
