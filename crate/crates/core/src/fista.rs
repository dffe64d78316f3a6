//! Fixed-step FISTA for `min_x 1/2 ||s - A x||^2 + lambda ||x||_1` over a real
//! unknown with complex data.
//!
//! For real `x` the smooth term's gradient is `Re(A^H A) x - Re(A^H s)`, so the
//! iteration runs entirely in the reals on the precomputed normal matrix.

use ndarray::{Array1, Array2, ArrayView1};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::forward::{Echo, SensingMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct FistaConfig {
    pub lambda: f64,
    pub max_iter: usize,
    /// Step size; `None` means `1 / lambda_max(A^H A)` from power iteration.
    pub mu: Option<f64>,
    pub record_objective: bool,
    /// Stop once `||x_k+1 - x_k|| <= tol * ||x_k||`. Off by default.
    pub stop_rel_change: Option<f64>,
}

impl Default for FistaConfig {
    fn default() -> Self {
        FistaConfig {
            lambda: 0.001,
            max_iter: 2000,
            mu: None,
            record_objective: false,
            stop_rel_change: None,
        }
    }
}

impl FistaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter must be at least 1"));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid(format!(
                "lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        if let Some(mu) = self.mu {
            if !(mu > 0.0 && mu.is_finite()) {
                return Err(Error::invalid(format!("step mu must be > 0, got {mu}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SolverResult {
    pub estimate: Array1<f64>,
    /// `E(x)` at the zero start and after every iteration.
    pub objective_trace: Option<Vec<f64>>,
    pub iterations_run: usize,
}

/// Result of [`power_iteration_lmax`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerEstimate {
    pub lmax: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl PowerEstimate {
    pub fn step(&self) -> f64 {
        1.0 / self.lmax
    }
}

pub const POWER_TOL: f64 = 1e-8;
pub const POWER_MAX_IT: usize = 500;

/// Largest eigenvalue of `A^H A` by power iteration from the normalized
/// all-ones vector. Stops when the Rayleigh quotient changes by less than
/// `tol` relative; otherwise reports the last estimate with `converged = false`.
pub fn power_iteration_lmax(a: &SensingMatrix, tol: f64, max_it: usize) -> Result<PowerEstimate> {
    let p = a.cols();
    let mut v = vec![Complex64::new(1.0 / (p as f64).sqrt(), 0.0); p];
    let mut lmax = 0.0;
    for it in 1..=max_it.max(1) {
        let w = a.adjoint(a.apply_complex(&v).as_slice().expect("contiguous"));
        let rayleigh: f64 = v.iter().zip(w.iter()).map(|(x, y)| (x.conj() * y).re).sum();
        let norm = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return Err(Error::invalid("power iteration on a zero matrix"));
        }
        v = w.iter().map(|z| z / norm).collect();
        if it > 1 && (rayleigh - lmax).abs() <= tol * rayleigh.abs() {
            return Ok(PowerEstimate {
                lmax: rayleigh,
                iterations: it,
                converged: true,
            });
        }
        lmax = rayleigh;
    }
    Ok(PowerEstimate {
        lmax,
        iterations: max_it,
        converged: false,
    })
}

/// Default FISTA step `1 / lambda_max(A^H A)`, warning if power iteration
/// did not converge.
pub fn default_step(a: &SensingMatrix) -> Result<f64> {
    let est = power_iteration_lmax(a, POWER_TOL, POWER_MAX_IT)?;
    if !est.converged {
        log::debug!(
            "power iteration stopped after {} iterations at lambda_max = {}",
            est.iterations,
            est.lmax
        );
    }
    Ok(est.step())
}

/// Soft threshold `sign(x) max(|x| - theta, 0)`.
#[inline]
pub fn shrink(x: f64, theta: f64) -> f64 {
    if x > theta {
        x - theta
    } else if x < -theta {
        x + theta
    } else {
        0.0
    }
}

pub fn soft_threshold(x: &[f64], theta: f64) -> Vec<f64> {
    debug_assert!(theta >= 0.0);
    x.iter().map(|&v| shrink(v, theta)).collect()
}

/// Momentum recurrence `t_{k+1} = (1 + sqrt(1 + 4 t_k^2)) / 2`.
#[inline]
pub fn next_t(t: f64) -> f64 {
    (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0
}

/// Extrapolation weights `(t_k - 1) / t_{k+1}` for the first `n` iterations,
/// starting from `t_0 = 1`.
pub fn momentum_weights(n: usize) -> Vec<f64> {
    let mut t = 1.0;
    (0..n)
        .map(|_| {
            let t1 = next_t(t);
            let w = (t - 1.0) / t1;
            t = t1;
            w
        })
        .collect()
}

/// `1/2 ||s - A eps||^2 + lambda ||eps||_1`.
pub fn energy(a: &SensingMatrix, s: &Echo, eps: &[f64], lambda: f64) -> f64 {
    let r = a.apply(ArrayView1::from(eps));
    let fit: f64 = r
        .iter()
        .zip(&s.samples)
        .map(|(ax, si)| (si - ax).norm_sqr())
        .sum();
    0.5 * fit + lambda * eps.iter().map(|v| v.abs()).sum::<f64>()
}

pub fn fista_solve(a: &SensingMatrix, s: &Echo, cfg: &FistaConfig) -> Result<SolverResult> {
    cfg.validate()?;
    if s.len() != a.rows() {
        return Err(Error::invalid(format!(
            "echo has {} samples, sensing matrix has {} rows",
            s.len(),
            a.rows()
        )));
    }
    let mu = match cfg.mu {
        Some(mu) => mu,
        None => default_step(a)?,
    };
    let gram = a.gram();
    let b = a.backproject(&s.samples);
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::Diverged {
            stage: "back-projection",
            index: 0,
        });
    }
    let theta = cfg.lambda * mu;
    let p = a.cols();

    let mut x_prev = Array1::<f64>::zeros(p);
    let mut x = Array1::<f64>::zeros(p);
    let mut t = 1.0;
    let mut trace = cfg
        .record_objective
        .then(|| vec![energy(a, s, x.as_slice().unwrap(), cfg.lambda)]);
    let mut iterations_run = 0;

    for it in 0..cfg.max_iter {
        let t1 = next_t(t);
        let w = (t - 1.0) / t1;
        t = t1;
        let y = &x + &((&x - &x_prev) * w);
        let grad = gram.dot(&y) - &b;
        let mut next = y;
        next.zip_mut_with(&grad, |yi, gi| *yi = shrink(*yi - mu * gi, theta));
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged {
                stage: "FISTA iteration",
                index: it,
            });
        }
        let change = cfg.stop_rel_change.map(|_| {
            let d: f64 = next.iter().zip(x.iter()).map(|(a, b)| (a - b).powi(2)).sum();
            let n: f64 = x.iter().map(|v| v * v).sum();
            (d.sqrt(), n.sqrt())
        });
        x_prev = std::mem::replace(&mut x, next);
        iterations_run = it + 1;
        if let Some(tr) = trace.as_mut() {
            tr.push(energy(a, s, x.as_slice().unwrap(), cfg.lambda));
        }
        if let (Some(tol), Some((d, n))) = (cfg.stop_rel_change, change) {
            if n > 0.0 && d <= tol * n {
                break;
            }
        }
    }
    Ok(SolverResult {
        estimate: x,
        objective_trace: trace,
        iterations_run,
    })
}

/// FISTA on many echoes at once for a fixed `cfg.max_iter` iterations, one
/// estimate per row. Early stopping and objective traces are ignored.
pub fn fista_solve_batch(a: &SensingMatrix, echoes: &[&Echo], cfg: &FistaConfig) -> Result<Array2<f64>> {
    cfg.validate()?;
    let mu = match cfg.mu {
        Some(mu) => mu,
        None => default_step(a)?,
    };
    let gram = a.gram();
    let b = crate::model::lfista::backproject_batch(a, echoes)?;
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::Diverged {
            stage: "back-projection",
            index: 0,
        });
    }
    let theta = cfg.lambda * mu;
    let mut x_prev = Array2::<f64>::zeros(b.raw_dim());
    let mut x = Array2::<f64>::zeros(b.raw_dim());
    let mut t = 1.0;
    for it in 0..cfg.max_iter {
        let t1 = next_t(t);
        let w = (t - 1.0) / t1;
        t = t1;
        let y = &x + &((&x - &x_prev) * w);
        let grad = y.dot(gram) - &b;
        let mut next = y;
        next.zip_mut_with(&grad, |yi, gi| *yi = shrink(*yi - mu * gi, theta));
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged {
                stage: "FISTA iteration",
                index: it,
            });
        }
        x_prev = std::mem::replace(&mut x, next);
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::Array2;
    use proptest::prelude::*;

    #[test]
    fn soft_threshold_examples() {
        assert_abs_diff_eq!(shrink(1.2, 0.5), 0.7, epsilon = 1e-15);
        assert_abs_diff_eq!(shrink(-1.2, 0.5), -0.7, epsilon = 1e-15);
        assert_eq!(shrink(0.3, 0.5), 0.0);
        let x = [0.3, -2.0, 0.0, 7.5];
        assert_eq!(soft_threshold(&x, 0.0), x.to_vec());
    }

    #[test]
    fn t_sequence() {
        let t1 = next_t(1.0);
        let t2 = next_t(t1);
        assert_abs_diff_eq!(t1, 1.618034, epsilon = 1e-6);
        assert_abs_diff_eq!(t2, 2.193527, epsilon = 1e-6);
        let w = momentum_weights(3);
        assert_eq!(w[0], 0.0);
        assert_abs_diff_eq!(w[1], (t1 - 1.0) / t2, epsilon = 1e-15);
    }

    #[test]
    fn power_iteration_toys() {
        let id = SensingMatrix::from_real(Array2::eye(4)).unwrap();
        let est = power_iteration_lmax(&id, 1e-12, 100).unwrap();
        assert!(est.converged);
        assert_abs_diff_eq!(est.lmax, 1.0, epsilon = 1e-12);

        let two = SensingMatrix::from_real(Array2::from_elem((1, 1), 2.0)).unwrap();
        let est = power_iteration_lmax(&two, 1e-12, 100).unwrap();
        assert_abs_diff_eq!(est.lmax, 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(est.step(), 0.25, epsilon = 1e-12);

        let zero = SensingMatrix::from_real(Array2::zeros((2, 2))).unwrap();
        assert!(power_iteration_lmax(&zero, 1e-8, 10).is_err());
    }

    #[test]
    fn power_iteration_reports_non_convergence() {
        let a = SensingMatrix::from_real(Array2::from_diag(&ndarray::arr1(&[1.0, 0.999, 0.5])))
            .unwrap();
        let est = power_iteration_lmax(&a, 1e-15, 3).unwrap();
        assert!(!est.converged);
        assert_eq!(est.iterations, 3);
        assert!(est.lmax > 0.25 && est.lmax <= 1.0);
    }

    #[test]
    fn identity_closed_form() {
        let a = SensingMatrix::from_real(Array2::eye(4)).unwrap();
        let s = Echo::noise_free(
            [1.0, 0.2, -0.8, 0.0]
                .iter()
                .map(|&v| Complex64::new(v, 0.0))
                .collect(),
        );
        let cfg = FistaConfig {
            lambda: 0.5,
            max_iter: 500,
            mu: Some(1.0),
            ..Default::default()
        };
        let r = fista_solve(&a, &s, &cfg).unwrap();
        for (x, e) in r.estimate.iter().zip([0.5, 0.0, -0.3, 0.0]) {
            assert_abs_diff_eq!(*x, e, epsilon = 1e-4);
        }
        assert_eq!(r.iterations_run, 500);
    }

    #[test]
    fn batch_matches_single_echo_solver() {
        let a = SensingMatrix::from_real(Array2::from_shape_fn((6, 9), |(i, j)| {
            ((i * 9 + j) as f64 * 0.7).cos()
        }))
        .unwrap();
        let echoes: Vec<Echo> = (0..3)
            .map(|k| {
                Echo::noise_free(
                    (0..6)
                        .map(|i| Complex64::new((i + k) as f64 * 0.2, -(k as f64) * 0.1))
                        .collect(),
                )
            })
            .collect();
        let cfg = FistaConfig {
            lambda: 0.05,
            max_iter: 300,
            ..Default::default()
        };
        let refs: Vec<&Echo> = echoes.iter().collect();
        let batch = fista_solve_batch(&a, &refs, &cfg).unwrap();
        for (row, e) in batch.rows().into_iter().zip(&echoes) {
            let single = fista_solve(&a, e, &cfg).unwrap().estimate;
            for (x, y) in row.iter().zip(single.iter()) {
                assert_abs_diff_eq!(*x, *y, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn zero_echo_is_fixed_point() {
        let a = SensingMatrix::from_real(Array2::from_shape_fn((3, 5), |(i, j)| {
            ((i * 5 + j) as f64).sin()
        }))
        .unwrap();
        let s = Echo::noise_free(vec![Complex64::new(0.0, 0.0); 3]);
        let cfg = FistaConfig {
            lambda: 0.1,
            max_iter: 50,
            record_objective: true,
            ..Default::default()
        };
        let r = fista_solve(&a, &s, &cfg).unwrap();
        assert!(r.estimate.iter().all(|&v| v == 0.0));
        assert_eq!(r.objective_trace.unwrap().len(), 51);
    }

    #[test]
    fn energy_terms() {
        let a = SensingMatrix::from_real(Array2::from_shape_fn((3, 4), |(i, j)| {
            (i as f64 + 1.0) * (j as f64 - 1.5)
        }))
        .unwrap();
        let eps = [0.2, 0.0, 0.7, 0.1];
        let s = crate::forward::synthesize_echo(
            &a,
            &crate::geometry::RcsMap::new(eps.to_vec()).unwrap(),
        )
        .unwrap();
        assert_abs_diff_eq!(energy(&a, &s, &eps, 0.3), 0.3 * 1.0, epsilon = 1e-12);
        let half_norm: f64 = 0.5 * s.samples.iter().map(|z| z.norm_sqr()).sum::<f64>();
        assert_abs_diff_eq!(energy(&a, &s, &[0.0; 4], 0.3), half_norm, epsilon = 1e-12);
    }

    #[test]
    fn divergence_is_reported() {
        let a = SensingMatrix::from_real(Array2::eye(2) * 10.0).unwrap();
        let s = Echo::noise_free(vec![Complex64::new(1.0, 0.0); 2]);
        let cfg = FistaConfig {
            lambda: 0.0,
            max_iter: 2000,
            mu: Some(1.0),
            ..Default::default()
        };
        assert!(matches!(
            fista_solve(&a, &s, &cfg),
            Err(Error::Diverged { .. })
        ));
    }

    #[test]
    fn early_stop_flag() {
        let a = SensingMatrix::from_real(Array2::eye(3)).unwrap();
        let s = Echo::noise_free(vec![Complex64::new(1.0, 0.0); 3]);
        let cfg = FistaConfig {
            lambda: 0.1,
            max_iter: 10_000,
            mu: Some(1.0),
            stop_rel_change: Some(1e-8),
            ..Default::default()
        };
        let r = fista_solve(&a, &s, &cfg).unwrap();
        assert!(r.iterations_run < 10_000);
        assert_abs_diff_eq!(r.estimate[0], 0.9, epsilon = 1e-6);
    }

    #[test]
    fn config_validation() {
        let bad = [
            FistaConfig {
                max_iter: 0,
                ..Default::default()
            },
            FistaConfig {
                lambda: -1.0,
                ..Default::default()
            },
            FistaConfig {
                mu: Some(0.0),
                ..Default::default()
            },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err());
        }
    }

    proptest! {
        #[test]
        fn soft_threshold_non_expansive(
            pair in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..40),
            theta in 0.0f64..3.0,
        ) {
            let (a, b): (Vec<f64>, Vec<f64>) = pair.into_iter().unzip();
            let sa = soft_threshold(&a, theta);
            let sb = soft_threshold(&b, theta);
            let d_out: f64 = sa.iter().zip(&sb).map(|(x, y)| (x - y).powi(2)).sum();
            let d_in: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum();
            prop_assert!(d_out.sqrt() <= d_in.sqrt() + 1e-12);
        }
    }
}
