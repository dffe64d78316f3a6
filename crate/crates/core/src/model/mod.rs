//! Trainable reconstructors: L-FISTA-ResNet, its frozen-step FISTA-ResNet
//! variant, and the fully connected DNN baseline.

pub mod conv;
pub mod dnn;
pub mod lfista;
pub mod params;
pub mod resnet;

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayD, ArrayView2, IxDyn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fista::default_step;
use crate::forward::{Echo, SensingMatrix};

pub use lfista::{lfista_forward, LFistaBlockParams};
pub use params::{Grads, Param, ParamSet};

/// Number of unrolled blocks.
pub const N_BLOCKS: usize = 20;

/// Sparsity weight the block thresholds start from (`theta = lambda * mu`).
pub const INIT_LAMBDA: f64 = 0.01;

const MU_RAW: usize = 0;
const THETA_RAW: usize = 1;
const RES_FIRST: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    LFistaResNet,
    FistaResNet,
    Dnn,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::LFistaResNet, ModelKind::FistaResNet, ModelKind::Dnn];

    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::LFistaResNet => "lfista-resnet",
            ModelKind::FistaResNet => "fista-resnet",
            ModelKind::Dnn => "dnn",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown model '{s}'")))
    }
}

/// Activations kept by a caching forward pass.
pub enum ForwardCache {
    Unrolled {
        lfista: lfista::LFistaCache,
        res: resnet::ResCache,
    },
    Dnn(dnn::DnnCache),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    kind: ModelKind,
    side: usize,
    params: ParamSet,
}

impl Model {
    /// Untrained model for images of `side x side` cells seen through `a`.
    /// Unrolled variants start from `mu = 1 / lambda_max(A^H A)`.
    pub fn new(kind: ModelKind, a: &SensingMatrix, side: usize, seed: u64) -> Result<Self> {
        if side * side != a.cols() {
            return Err(Error::invalid(format!(
                "{side}x{side} image does not match {} sensing columns",
                a.cols()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        match kind {
            ModelKind::LFistaResNet | ModelKind::FistaResNet => {
                let mu = default_step(a)?;
                let trainable = kind == ModelKind::LFistaResNet;
                let mu_raw = params::softplus_inv(mu);
                let theta_raw = params::softplus_inv(INIT_LAMBDA * mu);
                params.push(
                    "lfista.mu_raw",
                    ArrayD::from_elem(IxDyn(&[N_BLOCKS]), mu_raw),
                    trainable,
                );
                params.push(
                    "lfista.theta_raw",
                    ArrayD::from_elem(IxDyn(&[N_BLOCKS]), theta_raw),
                    trainable,
                );
                resnet::init_params(&mut params, "res", &mut rng);
            }
            ModelKind::Dnn => dnn::init_params(&mut params, 2 * a.rows(), a.cols(), &mut rng),
        }
        Ok(Model { kind, side, params })
    }

    /// Model with externally supplied parameters (e.g. from a checkpoint).
    pub fn from_params(kind: ModelKind, side: usize, params: ParamSet) -> Result<Self> {
        let expected = match kind {
            ModelKind::Dnn => 4,
            _ => RES_FIRST + resnet::RES_PARAM_ARRAYS,
        };
        if params.len() != expected {
            return Err(Error::format(
                0,
                format!("{kind} needs {expected} parameter arrays, got {}", params.len()),
            ));
        }
        Ok(Model { kind, side, params })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    pub fn is_unrolled(&self) -> bool {
        self.kind != ModelKind::Dnn
    }

    /// Effective `(mu_i, theta_i)` of every block; empty for the DNN.
    pub fn block_params(&self) -> Vec<LFistaBlockParams> {
        if !self.is_unrolled() {
            return Vec::new();
        }
        self.params
            .get(MU_RAW)
            .iter()
            .zip(self.params.get(THETA_RAW).iter())
            .map(|(&m, &t)| LFistaBlockParams {
                mu: params::softplus(m),
                theta: params::softplus(t),
            })
            .collect()
    }

    /// Copy whose blocks all use step `mu` and threshold `INIT_LAMBDA * mu`,
    /// i.e. plain FISTA settings for a different sensing matrix.
    pub fn with_fista_step(&self, mu: f64) -> Result<Model> {
        if !self.is_unrolled() {
            return Err(Error::invalid("the DNN has no unrolled stage"));
        }
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::invalid(format!("step must be > 0, got {mu}")));
        }
        let mut m = self.clone();
        m.params.get_mut(MU_RAW).fill(params::softplus_inv(mu));
        m.params.get_mut(THETA_RAW).fill(params::softplus_inv(INIT_LAMBDA * mu));
        Ok(m)
    }

    fn res_params(&self) -> Vec<&ArrayD<f64>> {
        (RES_FIRST..RES_FIRST + resnet::RES_PARAM_ARRAYS)
            .map(|i| self.params.get(i))
            .collect()
    }

    /// Output of the unrolled stage alone, `(batch, P)`.
    pub fn coarse_batch(&self, a: &SensingMatrix, echoes: &[&Echo]) -> Result<Array2<f64>> {
        if !self.is_unrolled() {
            return Err(Error::invalid("the DNN has no unrolled stage"));
        }
        let b = lfista::backproject_batch(a, echoes)?;
        Ok(lfista::forward_batch(a.gram(), b.view(), &self.block_params(), false)?.0)
    }

    pub fn forward_batch(
        &self,
        a: &SensingMatrix,
        echoes: &[&Echo],
        keep_cache: bool,
    ) -> Result<(Array2<f64>, Option<ForwardCache>)> {
        match self.kind {
            ModelKind::Dnn => {
                let x = dnn::features(echoes, 2 * a.rows())?;
                let (out, cache) = dnn::forward_batch(&self.params, x, keep_cache);
                Ok((out, cache.map(ForwardCache::Dnn)))
            }
            _ => {
                let b = lfista::backproject_batch(a, echoes)?;
                let (coarse, lf_cache) =
                    lfista::forward_batch(a.gram(), b.view(), &self.block_params(), keep_cache)?;
                let (out, res_cache) =
                    resnet::forward_batch(&self.res_params(), coarse.view(), self.side, keep_cache);
                if out.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Diverged {
                        stage: "residual head",
                        index: 0,
                    });
                }
                let cache = match (lf_cache, res_cache) {
                    (Some(lfista), Some(res)) => Some(ForwardCache::Unrolled { lfista, res }),
                    _ => None,
                };
                Ok((out, cache))
            }
        }
    }

    /// Exact gradients of a scalar loss with respect to every parameter array,
    /// given `d_out = dL/d(output)`. Frozen arrays get zero gradients.
    pub fn backward(
        &self,
        a: &SensingMatrix,
        cache: &ForwardCache,
        d_out: ArrayView2<f64>,
    ) -> Grads {
        let mut grads = self.params.zeros_like();
        match cache {
            ForwardCache::Dnn(c) => {
                for (g, d) in grads.0.iter_mut().zip(dnn::backward(&self.params, c, d_out)) {
                    *g = d;
                }
            }
            ForwardCache::Unrolled { lfista: lc, res } => {
                let (res_grads, d_coarse) = resnet::backward(&self.res_params(), res, d_out);
                for (i, g) in res_grads.into_iter().enumerate() {
                    grads.0[RES_FIRST + i] = g;
                }
                if self.params.param(MU_RAW).trainable {
                    let blocks = self.block_params();
                    let (d_mu, d_theta) = lfista::backward(a.gram(), lc, &blocks, d_coarse.view());
                    let raw_mu = self.params.get(MU_RAW);
                    let raw_theta = self.params.get(THETA_RAW);
                    for i in 0..blocks.len() {
                        grads.0[MU_RAW][i] = d_mu[i] * params::sigmoid(raw_mu[i]);
                        grads.0[THETA_RAW][i] = d_theta[i] * params::sigmoid(raw_theta[i]);
                    }
                }
            }
        }
        for (g, p) in grads.0.iter_mut().zip(self.params.iter()) {
            if !p.trainable {
                g.fill(0.0);
            }
        }
        grads
    }

    /// Reconstruction of one echo (unclamped).
    pub fn predict(&self, a: &SensingMatrix, echo: &Echo) -> Result<Array1<f64>> {
        let (out, _) = self.forward_batch(a, &[echo], false)?;
        Ok(out.row(0).to_owned())
    }

    pub fn predict_batch(&self, a: &SensingMatrix, echoes: &[&Echo]) -> Result<Array2<f64>> {
        Ok(self.forward_batch(a, echoes, false)?.0)
    }
}

/// Full pipeline on one echo: unrolled stage, reshape, residual head.
pub fn model_forward(s: &Echo, a: &SensingMatrix, model: &Model) -> Result<Array1<f64>> {
    model.predict(a, s)
}

/// Fully connected baseline on one echo.
pub fn dnn_forward(s: &Echo, model: &Model) -> Result<Array1<f64>> {
    if model.kind() != ModelKind::Dnn {
        return Err(Error::invalid("dnn_forward needs a DNN model"));
    }
    let n_in = model.params().get(0).shape()[0];
    let x = dnn::features(&[s], n_in)?;
    Ok(dnn::forward_batch(model.params(), x, false).0.row(0).to_owned())
}
