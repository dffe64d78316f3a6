//! Stepped-frequency echo model: sensing matrix construction, noise-free
//! synthesis and complex AWGN.

use std::f64::consts::PI;
use std::sync::OnceLock;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::geometry::{distances, ArrayGeometry, DoiGrid, FrequencySweep, RcsMap, SPEED_OF_LIGHT};

/// Complex sensing matrix with antenna-major block structure:
/// row `k * Nf + n` holds `exp(-j 4 pi f_n R_{k,p} / c)` for every cell `p`.
#[derive(Debug)]
pub struct SensingMatrix {
    entries: Array2<Complex64>,
    re: Array2<f64>,
    im: Array2<f64>,
    n_freqs: usize,
    n_antennas: usize,
    gram: OnceLock<Array2<f64>>,
}

impl Clone for SensingMatrix {
    fn clone(&self) -> Self {
        SensingMatrix::from_entries(self.entries.clone(), self.n_freqs, self.n_antennas)
            .expect("dimensions already validated")
    }
}

impl SensingMatrix {
    /// Wraps an arbitrary complex matrix. `rows` must equal `n_freqs * n_antennas`.
    pub fn from_entries(
        entries: Array2<Complex64>,
        n_freqs: usize,
        n_antennas: usize,
    ) -> Result<Self> {
        if entries.nrows() != n_freqs * n_antennas || entries.ncols() == 0 {
            return Err(Error::invalid(format!(
                "sensing matrix is {}x{}, expected {} rows",
                entries.nrows(),
                entries.ncols(),
                n_freqs * n_antennas
            )));
        }
        let re = entries.mapv(|z| z.re);
        let im = entries.mapv(|z| z.im);
        Ok(SensingMatrix {
            entries,
            re,
            im,
            n_freqs,
            n_antennas,
            gram: OnceLock::new(),
        })
    }

    /// Real-valued matrix, convenient for toy problems.
    pub fn from_real(a: Array2<f64>) -> Result<Self> {
        let rows = a.nrows();
        Self::from_entries(a.mapv(|v| Complex64::new(v, 0.0)), rows, 1)
    }

    pub fn entries(&self) -> &Array2<Complex64> {
        &self.entries
    }

    pub fn real_part(&self) -> &Array2<f64> {
        &self.re
    }

    pub fn imag_part(&self) -> &Array2<f64> {
        &self.im
    }

    pub fn rows(&self) -> usize {
        self.entries.nrows()
    }

    /// Number of grid cells `P`.
    pub fn cols(&self) -> usize {
        self.entries.ncols()
    }

    pub fn n_freqs(&self) -> usize {
        self.n_freqs
    }

    pub fn n_antennas(&self) -> usize {
        self.n_antennas
    }

    /// `Re(A^H A)`, the normal matrix for a real unknown. Computed once.
    pub fn gram(&self) -> &Array2<f64> {
        self.gram
            .get_or_init(|| self.re.t().dot(&self.re) + self.im.t().dot(&self.im))
    }

    /// `A x` for real `x`.
    pub fn apply(&self, x: ArrayView1<f64>) -> Array1<Complex64> {
        let re = self.re.dot(&x);
        let im = self.im.dot(&x);
        re.iter()
            .zip(im.iter())
            .map(|(&r, &i)| Complex64::new(r, i))
            .collect()
    }

    /// `Re(A^H s)`.
    pub fn backproject(&self, s: &[Complex64]) -> Array1<f64> {
        let sr: Array1<f64> = s.iter().map(|z| z.re).collect();
        let si: Array1<f64> = s.iter().map(|z| z.im).collect();
        self.re.t().dot(&sr) + self.im.t().dot(&si)
    }

    /// `A^H v` for complex `v`.
    pub fn adjoint(&self, v: &[Complex64]) -> Array1<Complex64> {
        let mut out = Array1::from_elem(self.cols(), Complex64::new(0.0, 0.0));
        for (row, vi) in self.entries.axis_iter(Axis(0)).zip(v) {
            out.zip_mut_with(&row, |o, a| *o += a.conj() * vi);
        }
        out
    }

    /// `A x` for complex `x`.
    pub fn apply_complex(&self, x: &[Complex64]) -> Array1<Complex64> {
        self.entries
            .axis_iter(Axis(0))
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Copy restricted to the given columns, keeping the row structure.
    pub fn select_columns(&self, cols: &[usize]) -> SensingMatrix {
        let sub = self.entries.select(Axis(1), cols);
        SensingMatrix::from_entries(sub, self.n_freqs, self.n_antennas)
            .expect("row structure unchanged")
    }
}

pub fn build_sensing_matrix(
    sweep: &FrequencySweep,
    array: &ArrayGeometry,
    grid: &DoiGrid,
) -> SensingMatrix {
    let ranges = distances(array, grid);
    let nf = sweep.n_freqs();
    let mut a = Array2::from_elem((nf * array.len(), grid.len()), Complex64::new(0.0, 0.0));
    for (k, r_k) in ranges.iter().enumerate() {
        for (n, &f) in sweep.freqs().iter().enumerate() {
            let mut row = a.row_mut(k * nf + n);
            for (entry, &r) in row.iter_mut().zip(r_k) {
                *entry = Complex64::from_polar(1.0, -4.0 * PI * f * r / SPEED_OF_LIGHT);
            }
        }
    }
    SensingMatrix::from_entries(a, nf, array.len()).expect("consistent by construction")
}

/// Frequency-domain samples of all antennas, stacked antenna-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Echo {
    pub samples: Vec<Complex64>,
    /// `None` for a noise-free echo.
    pub snr_db: Option<f64>,
}

impl Echo {
    pub fn noise_free(samples: Vec<Complex64>) -> Self {
        Echo {
            samples,
            snr_db: None,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn mean_power(&self) -> f64 {
        self.samples.iter().map(|z| z.norm_sqr()).sum::<f64>() / self.samples.len() as f64
    }

    /// Real parts followed by imaginary parts.
    pub fn to_real_features(&self) -> Vec<f64> {
        self.samples
            .iter()
            .map(|z| z.re)
            .chain(self.samples.iter().map(|z| z.im))
            .collect()
    }
}

/// Noise-free echo `s = A eps`.
pub fn synthesize_echo(a: &SensingMatrix, eps: &RcsMap) -> Result<Echo> {
    if eps.len() != a.cols() {
        return Err(Error::invalid(format!(
            "RCS map has {} cells, sensing matrix has {} columns",
            eps.len(),
            a.cols()
        )));
    }
    let x = ArrayView1::from(eps.values());
    Ok(Echo::noise_free(a.apply(x).to_vec()))
}

/// Adds circularly-symmetric complex Gaussian noise so that the clean echo's
/// mean per-sample power over the noise variance equals `snr_db`. An infinite
/// SNR returns the echo unchanged.
pub fn add_awgn(echo: &Echo, snr_db: f64, seed: u64) -> Result<Echo> {
    if snr_db == f64::INFINITY {
        return Ok(echo.clone());
    }
    if snr_db.is_nan() {
        return Err(Error::invalid("SNR is NaN"));
    }
    let power = echo.mean_power();
    if !(power > 0.0) {
        return Err(Error::invalid("cannot set a finite SNR on a zero echo"));
    }
    let variance = power / 10f64.powf(snr_db / 10.0);
    let normal = Normal::new(0.0, (variance / 2.0).sqrt()).expect("finite std dev");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = echo
        .samples
        .iter()
        .map(|s| {
            let re = normal.sample(&mut rng);
            let im = normal.sample(&mut rng);
            s + Complex64::new(re, im)
        })
        .collect();
    Ok(Echo {
        samples,
        snr_db: Some(snr_db),
    })
}
