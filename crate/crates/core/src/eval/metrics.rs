//! Image quality metrics.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_RADIUS: usize = 5;

fn same_shape(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::invalid(format!(
            "image shapes differ: {:?} vs {:?}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(())
}

/// Mean squared difference.
pub fn mse(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Result<f64> {
    same_shape(a, b)?;
    if a.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(sum / a.len() as f64)
}

fn gaussian_taps() -> Vec<f64> {
    let r = SSIM_RADIUS as isize;
    let raw: Vec<f64> = (-r..=r)
        .map(|k| (-(k * k) as f64 / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// Mirror index into `0..n`, repeating the edge sample (`d c b a | a b c d`).
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let mut k = i.rem_euclid(period);
    if k >= n {
        k = period - 1 - k;
    }
    k as usize
}

fn blur(img: &Array2<f64>, taps: &[f64]) -> Array2<f64> {
    let (h, w) = img.dim();
    let r = SSIM_RADIUS as isize;
    let mut rows = Array2::zeros((h, w));
    for y in 0..h {
        for x in 0..w {
            rows[[y, x]] = taps
                .iter()
                .enumerate()
                .map(|(k, t)| t * img[[y, reflect(x as isize + k as isize - r, w)]])
                .sum::<f64>();
        }
    }
    let mut out = Array2::zeros((h, w));
    for y in 0..h {
        for x in 0..w {
            out[[y, x]] = taps
                .iter()
                .enumerate()
                .map(|(k, t)| t * rows[[reflect(y as isize + k as isize - r, h), x]])
                .sum::<f64>();
        }
    }
    out
}

/// Mean structural similarity with an 11x11 Gaussian window (sigma 1.5),
/// dynamic range 1 and reflective borders. Inputs are expected in [0, 1].
pub fn ssim(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Result<f64> {
    same_shape(a, b)?;
    if a.is_empty() {
        return Err(Error::invalid("SSIM of an empty image"));
    }
    let taps = gaussian_taps();
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let (a, b) = (a.to_owned(), b.to_owned());
    let mu_a = blur(&a, &taps);
    let mu_b = blur(&b, &taps);
    let aa = blur(&(&a * &a), &taps);
    let bb = blur(&(&b * &b), &taps);
    let ab = blur(&(&a * &b), &taps);
    let mut sum = 0.0;
    for i in 0..a.len() {
        let (y, x) = (i / a.ncols(), i % a.ncols());
        let (ma, mb) = (mu_a[[y, x]], mu_b[[y, x]]);
        let va = aa[[y, x]] - ma * ma;
        let vb = bb[[y, x]] - mb * mb;
        let cov = ab[[y, x]] - ma * mb;
        sum += (2.0 * ma * mb + c1) * (2.0 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
    Ok(sum / a.len() as f64)
}

/// Square image view of a flat map.
pub fn as_image(v: &[f64], side: usize) -> Result<ArrayView2<'_, f64>> {
    ArrayView2::from_shape((side, side), v)
        .map_err(|_| Error::invalid(format!("{} values do not form a {side}x{side} image", v.len())))
}

pub fn clamp01(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| x.clamp(0.0, 1.0)).collect()
}

/// MSE and SSIM of a reconstruction (clamped to [0, 1]) against the truth.
pub fn score(truth: &[f64], recon: &[f64], side: usize) -> Result<(f64, f64)> {
    let r = clamp01(recon);
    let t = as_image(truth, side)?;
    let r = as_image(&r, side)?;
    Ok((mse(t, r)?, ssim(t, r)?))
}
