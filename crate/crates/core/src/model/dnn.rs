//! Fully connected baseline: echo (real parts, then imaginary parts) ->
//! dense -> relu -> dense -> image.

use ndarray::{Array2, ArrayD, ArrayView1, ArrayView2, Axis, IxDyn};
use rand::Rng;

use super::params::{he_normal, ParamSet};
use crate::error::{Error, Result};
use crate::forward::Echo;

pub const DNN_HIDDEN: usize = 10;

pub fn init_params<R: Rng>(set: &mut ParamSet, n_inputs: usize, n_outputs: usize, rng: &mut R) {
    set.push("dnn.dense1.w", he_normal(&[n_inputs, DNN_HIDDEN], n_inputs, rng), true);
    set.push("dnn.dense1.b", ArrayD::zeros(IxDyn(&[DNN_HIDDEN])), true);
    set.push("dnn.dense2.w", he_normal(&[DNN_HIDDEN, n_outputs], DNN_HIDDEN, rng), true);
    set.push("dnn.dense2.b", ArrayD::zeros(IxDyn(&[n_outputs])), true);
}

pub fn features(echoes: &[&Echo], n_inputs: usize) -> Result<Array2<f64>> {
    let mut x = Array2::zeros((echoes.len(), n_inputs));
    for (mut row, e) in x.axis_iter_mut(Axis(0)).zip(echoes) {
        let f = e.to_real_features();
        if f.len() != n_inputs {
            return Err(Error::invalid(format!(
                "DNN expects {n_inputs} real inputs, echo gives {}",
                f.len()
            )));
        }
        row.assign(&ArrayView1::from(&f));
    }
    Ok(x)
}

fn mat(a: &ArrayD<f64>) -> ArrayView2<'_, f64> {
    a.view().into_dimensionality().expect("rank-2 weight")
}

fn vec1(a: &ArrayD<f64>) -> ArrayView1<'_, f64> {
    a.view().into_dimensionality().expect("rank-1 bias")
}

pub struct DnnCache {
    input: Array2<f64>,
    hidden: Array2<f64>,
}

pub fn forward_batch(
    params: &ParamSet,
    x: Array2<f64>,
    keep_cache: bool,
) -> (Array2<f64>, Option<DnnCache>) {
    let mut hidden = x.dot(&mat(params.get(0))) + vec1(params.get(1));
    hidden.mapv_inplace(|v| v.max(0.0));
    let out = hidden.dot(&mat(params.get(2))) + vec1(params.get(3));
    let cache = keep_cache.then_some(DnnCache { input: x, hidden });
    (out, cache)
}

pub fn backward(params: &ParamSet, cache: &DnnCache, d_out: ArrayView2<f64>) -> Vec<ArrayD<f64>> {
    let d_w2 = cache.hidden.t().dot(&d_out);
    let d_b2 = d_out.sum_axis(Axis(0));
    let mut d_hidden = d_out.dot(&mat(params.get(2)).t());
    ndarray::Zip::from(&mut d_hidden)
        .and(&cache.hidden)
        .for_each(|d, &h| {
            if h <= 0.0 {
                *d = 0.0;
            }
        });
    let d_w1 = cache.input.t().dot(&d_hidden);
    let d_b1 = d_hidden.sum_axis(Axis(0));
    vec![d_w1.into_dyn(), d_b1.into_dyn(), d_w2.into_dyn(), d_b2.into_dyn()]
}
