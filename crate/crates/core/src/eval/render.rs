//! 8-bit grayscale PGM output: single maps, comparison grids and a basic
//! line-plot raster for sweep curves.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Byte value of a map cell: clamp to [0, 1], scale to 255, round half up.
pub fn to_byte(v: f64) -> u8 {
    let v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
    (v * 255.0 + 0.5).floor() as u8
}

/// Binary PGM (P5, maxval 255) bytes of a `width x height` row-major map.
pub fn encode_pgm(values: &[f64], width: usize, height: usize) -> Result<Vec<u8>> {
    if values.len() != width * height {
        return Err(Error::invalid(format!(
            "{} values for a {width}x{height} image",
            values.len()
        )));
    }
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend(values.iter().map(|&v| to_byte(v)));
    Ok(out)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Writes a square map as a PGM file.
pub fn render_image(map: &[f64], side: usize, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &encode_pgm(map, side, side)?)
}

/// Mosaic of square tiles; `rows[r][c]` is one tile. Tiles are separated
/// by a 2-pixel white border.
pub fn tile_grid(rows: &[Vec<Vec<f64>>], side: usize) -> Result<(Vec<f64>, usize, usize)> {
    const GAP: usize = 2;
    let n_rows = rows.len();
    let n_cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let width = n_cols * side + (n_cols + 1) * GAP;
    let height = n_rows * side + (n_rows + 1) * GAP;
    let mut img = vec![1.0; width * height];
    for (r, row) in rows.iter().enumerate() {
        for (c, tile) in row.iter().enumerate() {
            if tile.len() != side * side {
                return Err(Error::invalid("tile size does not match side"));
            }
            let (y0, x0) = (GAP + r * (side + GAP), GAP + c * (side + GAP));
            for y in 0..side {
                let dst = (y0 + y) * width + x0;
                img[dst..dst + side].copy_from_slice(&tile[y * side..(y + 1) * side]);
            }
        }
    }
    Ok((img, width, height))
}

pub fn render_grid(rows: &[Vec<Vec<f64>>], side: usize, path: impl AsRef<Path>) -> Result<()> {
    let (img, w, h) = tile_grid(rows, side)?;
    write_file(path.as_ref(), &encode_pgm(&img, w, h)?)
}

/// Pixelwise `|truth - recon|` with the reconstruction clamped to [0, 1].
pub fn error_map(truth: &[f64], recon: &[f64]) -> Vec<f64> {
    truth
        .iter()
        .zip(recon)
        .map(|(t, r)| (t - r.clamp(0.0, 1.0)).abs())
        .collect()
}

/// Line plot of several series over shared x values, drawn black on white
/// with a distinct gray per series. Axes span the data range.
pub fn plot_curves(xs: &[f64], series: &[Vec<f64>], width: usize, height: usize) -> Vec<f64> {
    let mut img = vec![1.0; width * height];
    let margin = 12usize;
    if xs.len() < 2 || width <= 2 * margin || height <= 2 * margin {
        return img;
    }
    let finite = |v: &&f64| v.is_finite();
    let (x_lo, x_hi) = xs.iter().filter(finite).fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
    let (mut y_lo, mut y_hi) = series
        .iter()
        .flatten()
        .filter(finite)
        .fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
    if !(y_hi > y_lo) {
        y_lo -= 0.5;
        y_hi += 0.5;
    }
    let x_span = (x_hi - x_lo).max(f64::MIN_POSITIVE);
    let (pw, ph) = ((width - 2 * margin) as f64, (height - 2 * margin) as f64);
    let px = |x: f64| margin as f64 + (x - x_lo) / x_span * pw;
    let py = |y: f64| (height - margin) as f64 - (y - y_lo) / (y_hi - y_lo) * ph;
    let mut put = |x: isize, y: isize, v: f64| {
        if x >= 0 && y >= 0 && (x as usize) < width && (y as usize) < height {
            img[y as usize * width + x as usize] = v;
        }
    };
    for x in margin..width - margin {
        put(x as isize, (height - margin) as isize, 0.0);
    }
    for y in margin..=height - margin {
        put(margin as isize, y as isize, 0.0);
    }
    for (k, ys) in series.iter().enumerate() {
        let shade = 0.6 * k as f64 / series.len().max(1) as f64;
        let pts: Vec<(f64, f64)> = xs
            .iter()
            .zip(ys)
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|(&x, &y)| (px(x), py(y)))
            .collect();
        for w in pts.windows(2) {
            let ((x0, y0), (x1, y1)) = (w[0], w[1]);
            let steps = (x1 - x0).abs().max((y1 - y0).abs()).ceil().max(1.0) as usize;
            for s in 0..=steps {
                let t = s as f64 / steps as f64;
                put((x0 + t * (x1 - x0)).round() as isize, (y0 + t * (y1 - y0)).round() as isize, shade);
            }
        }
        for &(x, y) in &pts {
            for d in -2..=2 {
                put(x.round() as isize + d, y.round() as isize, shade);
                put(x.round() as isize, y.round() as isize + d, shade);
            }
        }
    }
    img
}

pub fn render_plot(xs: &[f64], series: &[Vec<f64>], path: impl AsRef<Path>) -> Result<()> {
    let (w, h) = (320, 240);
    write_file(path.as_ref(), &encode_pgm(&plot_curves(xs, series, w, h), w, h)?)
}

/// Parses a binary PGM (P5, maxval <= 255) into values in [0, 1].
/// Returns `(values, width, height)`.
pub fn decode_pgm(bytes: &[u8]) -> Result<(Vec<f64>, usize, usize)> {
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::format(pos as u64, "PGM header ends early"));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    pos += 1;
    if fields[0] != "P5" {
        return Err(Error::format(0, format!("expected P5 PGM, found '{}'", fields[0])));
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| Error::format(0, format!("bad PGM field '{s}'")));
    let (w, h, maxval) = (num(&fields[1])?, num(&fields[2])?, num(&fields[3])?);
    if maxval == 0 || maxval > 255 {
        return Err(Error::format(0, format!("unsupported PGM maxval {maxval}")));
    }
    let data = bytes.get(pos..pos + w * h).ok_or_else(|| {
        Error::format(bytes.len() as u64, format!("PGM payload needs {} bytes", w * h))
    })?;
    Ok((data.iter().map(|&b| b as f64 / maxval as f64).collect(), w, h))
}
