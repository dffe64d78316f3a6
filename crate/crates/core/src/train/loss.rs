//! Hybrid reconstruction loss: squared error, absolute error and a data
//! consistency term `||s - A eps_hat||^2`.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::forward::{Echo, SensingMatrix};

/// `lambda1` weighs the absolute error, `lambda2` the data-consistency
/// residual. `physics_scale` multiplies the residual before weighting; 1 is
/// the plain sum of squares, `1 / lambda_max(A^H A)` measures it as if `A`
/// had unit spectral norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub lambda1: f64,
    pub lambda2: f64,
    pub physics_scale: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda1: 0.1,
            lambda2: 0.05,
            physics_scale: 1.0,
        }
    }
}

impl LossWeights {
    pub fn new(lambda1: f64, lambda2: f64) -> Result<Self> {
        if !(lambda1 >= 0.0 && lambda2 >= 0.0) {
            return Err(Error::invalid("loss weights must be >= 0"));
        }
        Ok(LossWeights {
            lambda1,
            lambda2,
            physics_scale: 1.0,
        })
    }

    pub fn with_physics_scale(mut self, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::invalid(format!("physics scale must be > 0, got {scale}")));
        }
        self.physics_scale = scale;
        Ok(self)
    }

    /// Plain squared error.
    pub fn mse_only() -> Self {
        LossWeights {
            lambda1: 0.0,
            lambda2: 0.0,
            physics_scale: 1.0,
        }
    }

    fn physics_weight(&self) -> f64 {
        self.lambda2 * self.physics_scale
    }
}

/// Unweighted terms of the loss for one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossTerms {
    pub squared: f64,
    pub absolute: f64,
    pub physics: f64,
}

impl LossTerms {
    pub fn total(&self, w: LossWeights) -> f64 {
        self.squared + w.lambda1 * self.absolute + w.physics_weight() * self.physics
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Echo batch as separate real and imaginary `(batch, M)` matrices.
pub(crate) fn echo_matrices(echoes: &[&Echo], m: usize) -> Result<(Array2<f64>, Array2<f64>)> {
    let mut re = Array2::zeros((echoes.len(), m));
    let mut im = Array2::zeros((echoes.len(), m));
    for (i, e) in echoes.iter().enumerate() {
        if e.len() != m {
            return Err(Error::invalid(format!(
                "echo has {} samples, sensing matrix has {m} rows",
                e.len()
            )));
        }
        for (j, z) in e.samples.iter().enumerate() {
            re[[i, j]] = z.re;
            im[[i, j]] = z.im;
        }
    }
    Ok((re, im))
}

/// Mean loss over a batch and its gradient with respect to `pred`.
/// Rows of `truth`, `pred` and `echoes` correspond.
pub fn hybrid_loss_batch(
    truth: ArrayView2<f64>,
    pred: ArrayView2<f64>,
    echoes: &[&Echo],
    a: &SensingMatrix,
    w: LossWeights,
) -> Result<(f64, Array2<f64>, Vec<LossTerms>)> {
    if truth.dim() != pred.dim() || pred.ncols() != a.cols() || pred.nrows() != echoes.len() {
        return Err(Error::invalid(format!(
            "loss shapes disagree: truth {:?}, prediction {:?}, {} echoes, {} cells",
            truth.dim(),
            pred.dim(),
            echoes.len(),
            a.cols()
        )));
    }
    let n = pred.nrows().max(1) as f64;
    let diff = &pred - &truth;
    let (sr, si) = echo_matrices(echoes, a.rows())?;
    // residual s - A eps_hat, split into real and imaginary parts
    let rr = sr - pred.dot(&a.real_part().t());
    let ri = si - pred.dot(&a.imag_part().t());

    let terms: Vec<LossTerms> = (0..pred.nrows())
        .map(|i| {
            let d = diff.row(i);
            LossTerms {
                squared: d.dot(&d),
                absolute: d.iter().map(|v| v.abs()).sum(),
                physics: rr.row(i).dot(&rr.row(i)) + ri.row(i).dot(&ri.row(i)),
            }
        })
        .collect();
    let loss = terms.iter().map(|t| t.total(w)).sum::<f64>() / n;

    let mut grad = diff.mapv(|v| 2.0 * v + w.lambda1 * sign(v));
    if w.physics_weight() != 0.0 {
        let back = rr.dot(a.real_part()) + ri.dot(a.imag_part());
        grad.scaled_add(-2.0 * w.physics_weight(), &back);
    }
    grad.mapv_inplace(|v| v / n);
    Ok((loss, grad, terms))
}

/// Loss of a single reconstruction and its gradient.
pub fn hybrid_loss(
    eps_true: &[f64],
    eps_hat: ArrayView1<f64>,
    s: &Echo,
    a: &SensingMatrix,
    w: LossWeights,
) -> Result<(f64, Array1<f64>)> {
    let truth = ArrayView1::from(eps_true).insert_axis(Axis(0));
    let pred = eps_hat.insert_axis(Axis(0));
    let (loss, grad, _) = hybrid_loss_batch(truth, pred, &[s], a, w)?;
    Ok((loss, grad.row(0).to_owned()))
}
