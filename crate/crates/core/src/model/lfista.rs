//! Unrolled FISTA with a learnable step and ReLU threshold per block.
//!
//! Block `i` maps `(x_prev, x)` to
//! `relu(y - mu_i (G y - b) - theta_i)` with `y = x + w_i (x - x_prev)`,
//! `G = Re(A^H A)`, `b = Re(A^H s)` and fixed momentum weights `w_i`.
//! Batches are `(batch, P)` matrices, one sample per row.

use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::fista::momentum_weights;
use crate::forward::{Echo, SensingMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LFistaBlockParams {
    pub mu: f64,
    pub theta: f64,
}

struct BlockCache {
    residual: Array2<f64>,
    active: Array2<f64>,
}

pub struct LFistaCache {
    blocks: Vec<BlockCache>,
}

/// `Re(A^H s)` for each echo, one row per echo.
pub fn backproject_batch(a: &SensingMatrix, echoes: &[&Echo]) -> Result<Array2<f64>> {
    let m = a.rows();
    let mut sr = Array2::zeros((echoes.len(), m));
    let mut si = Array2::zeros((echoes.len(), m));
    for (i, e) in echoes.iter().enumerate() {
        if e.len() != m {
            return Err(Error::invalid(format!(
                "echo has {} samples, sensing matrix has {m} rows",
                e.len()
            )));
        }
        for (j, z) in e.samples.iter().enumerate() {
            sr[[i, j]] = z.re;
            si[[i, j]] = z.im;
        }
    }
    Ok(sr.dot(a.real_part()) + si.dot(a.imag_part()))
}

/// `y G` for symmetric `G`. Tiny batches go through matrix-vector products,
/// which skip the packing a general product does.
fn gram_product(gram: &Array2<f64>, y: &Array2<f64>) -> Array2<f64> {
    if y.nrows() > 4 {
        return y.dot(gram);
    }
    let mut out = Array2::zeros(y.raw_dim());
    for (mut o, row) in out.rows_mut().into_iter().zip(y.rows()) {
        o.assign(&gram.dot(&row));
    }
    out
}

pub fn forward_batch(
    gram: &Array2<f64>,
    b: ArrayView2<f64>,
    blocks: &[LFistaBlockParams],
    keep_cache: bool,
) -> Result<(Array2<f64>, Option<LFistaCache>)> {
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::Diverged {
            stage: "back-projection",
            index: 0,
        });
    }
    let weights = momentum_weights(blocks.len());
    let mut x_prev = Array2::<f64>::zeros(b.raw_dim());
    let mut x = Array2::<f64>::zeros(b.raw_dim());
    let mut cache = Vec::with_capacity(if keep_cache { blocks.len() } else { 0 });

    for (i, (blk, &w)) in blocks.iter().zip(&weights).enumerate() {
        let y = &x + &((&x - &x_prev) * w);
        let residual = gram_product(gram, &y) - b;
        let mut next = &y - &(&residual * blk.mu);
        let mut active = Array2::<f64>::zeros(b.raw_dim());
        ndarray::Zip::from(&mut next).and(&mut active).for_each(|v, m| {
            let z = *v - blk.theta;
            if z > 0.0 {
                *v = z;
                *m = 1.0;
            } else {
                *v = 0.0;
            }
        });
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged {
                stage: "L-FISTA block",
                index: i,
            });
        }
        if keep_cache {
            cache.push(BlockCache {
                residual,
                active,
            });
        }
        x_prev = std::mem::replace(&mut x, next);
    }
    Ok((x, keep_cache.then_some(LFistaCache { blocks: cache })))
}

/// Gradients of the loss with respect to every block's effective `mu` and
/// `theta`, given the gradient at the output.
pub fn backward(
    gram: &Array2<f64>,
    cache: &LFistaCache,
    blocks: &[LFistaBlockParams],
    d_out: ArrayView2<f64>,
) -> (Vec<f64>, Vec<f64>) {
    let n = blocks.len();
    let weights = momentum_weights(n);
    let mut d_mu = vec![0.0; n];
    let mut d_theta = vec![0.0; n];
    // grads[j] accumulates dL/dx_j for iterates x_0 .. x_{n+1}
    let mut grads: Vec<Array2<f64>> = (0..n + 2)
        .map(|_| Array2::zeros(d_out.raw_dim()))
        .collect();
    grads[n + 1].assign(&d_out);

    for i in (0..n).rev() {
        let c = &cache.blocks[i];
        let dz = &grads[i + 2] * &c.active;
        d_theta[i] = -dz.sum();
        d_mu[i] = -(&dz * &c.residual).sum();
        let dy = &dz - &(dz.dot(gram) * blocks[i].mu);
        let w = weights[i];
        grads[i + 1].scaled_add(1.0 + w, &dy);
        grads[i].scaled_add(-w, &dy);
    }
    (d_mu, d_theta)
}

/// L-FISTA reconstruction of one echo.
pub fn lfista_forward(
    s: &Echo,
    a: &SensingMatrix,
    blocks: &[LFistaBlockParams],
) -> Result<Array1<f64>> {
    let b = backproject_batch(a, &[s])?;
    let (x, _) = forward_batch(a.gram(), b.view(), blocks, false)?;
    Ok(x.row(0).to_owned())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fista::{default_step, next_t};
    use crate::forward::{build_sensing_matrix, synthesize_echo};
    use crate::geometry::{build_doi_grid, build_ula, FrequencySweep, RcsMap};
    use num_complex::Complex64;

    fn echo(v: &[f64]) -> Echo {
        Echo::noise_free(v.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    #[test]
    fn zero_echo_gives_zero() {
        let a = SensingMatrix::from_real(Array2::from_shape_fn((3, 4), |(i, j)| {
            (i + 2 * j) as f64 - 2.0
        }))
        .unwrap();
        let blocks = vec![
            LFistaBlockParams {
                mu: 0.3,
                theta: 0.01
            };
            5
        ];
        let x = lfista_forward(&echo(&[0.0; 3]), &a, &blocks).unwrap();
        assert!(x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_identity_block_passes_echo() {
        let a = SensingMatrix::from_real(Array2::eye(4)).unwrap();
        let s = [0.5, 0.0, 1.5, 0.25];
        let blocks = [LFistaBlockParams { mu: 1.0, theta: 0.0 }];
        let x = lfista_forward(&echo(&s), &a, &blocks).unwrap();
        assert_eq!(x.to_vec(), s.to_vec());
    }

    /// Plain FISTA loop with ReLU shrinkage, written independently of the
    /// batched block code.
    fn relu_fista(a: &SensingMatrix, s: &Echo, mu: f64, theta: f64, iters: usize) -> Vec<f64> {
        let p = a.cols();
        let ent = a.entries();
        let mut x_prev = vec![0.0; p];
        let mut x = vec![0.0; p];
        let mut t = 1.0;
        for _ in 0..iters {
            let t1 = next_t(t);
            let y: Vec<f64> = (0..p)
                .map(|j| x[j] + (t - 1.0) / t1 * (x[j] - x_prev[j]))
                .collect();
            t = t1;
            let mut r = vec![Complex64::new(0.0, 0.0); a.rows()];
            for (i, ri) in r.iter_mut().enumerate() {
                for j in 0..p {
                    *ri += ent[[i, j]] * y[j];
                }
                *ri -= s.samples[i];
            }
            let next: Vec<f64> = (0..p)
                .map(|j| {
                    let g: Complex64 = (0..a.rows()).map(|i| ent[[i, j]].conj() * r[i]).sum();
                    (y[j] - mu * g.re - theta).max(0.0)
                })
                .collect();
            x_prev = std::mem::replace(&mut x, next);
        }
        x
    }

    #[test]
    fn matches_relu_fista_oracle() {
        let sweep = FrequencySweep::new(30e9, 5e9, 10).unwrap();
        let arr = build_ula(4, 30e9, 2.0).unwrap();
        let grid = build_doi_grid(6, 0.02).unwrap();
        let a = build_sensing_matrix(&sweep, &arr, &grid);
        let mut v = vec![0.0; 36];
        v[7] = 1.0;
        v[20] = 0.6;
        v[21] = 0.3;
        let s = synthesize_echo(&a, &RcsMap::new(v).unwrap()).unwrap();
        let mu = default_step(&a).unwrap();
        let theta = 0.01 * mu;
        let blocks = vec![LFistaBlockParams { mu, theta }; 20];
        let got = lfista_forward(&s, &a, &blocks).unwrap();
        let want = relu_fista(&a, &s, mu, theta, 20);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-10, "{g} vs {w}");
        }
    }
}
