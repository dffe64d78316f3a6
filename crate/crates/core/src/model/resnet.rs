//! Residual refinement head: `conv -> relu -> [conv -> relu -> conv, +skip,
//! relu] x 2 -> conv`, all 3x3 with zero padding.

use ndarray::{Array2, ArrayD, ArrayView1, ArrayView2, IxDyn};
use rand::Rng;

use super::conv::{conv_backward, conv_forward, ImageShape};
use super::params::{he_normal, ParamSet};

pub const RES_CHANNELS: usize = 14;
pub const RES_BLOCKS: usize = 2;
/// head + two convs per block + tail, each a kernel and a bias.
pub const RES_PARAM_ARRAYS: usize = 2 * (2 + 2 * RES_BLOCKS);

/// Appends freshly initialized head parameters to `set`, returning the
/// index of the first one.
pub fn init_params<R: Rng>(set: &mut ParamSet, prefix: &str, rng: &mut R) -> usize {
    let c = RES_CHANNELS;
    let first = set.len();
    let mut conv = |set: &mut ParamSet, name: &str, cin: usize, cout: usize, scale: f64| {
        let w = he_normal(&[3, 3, cin, cout], 9 * cin, rng).mapv(|v| v * scale);
        set.push(format!("{prefix}.{name}.w"), w, true);
        set.push(
            format!("{prefix}.{name}.b"),
            ArrayD::zeros(IxDyn(&[cout])),
            true,
        );
    };
    conv(set, "head", 1, c, 1.0);
    for b in 0..RES_BLOCKS {
        conv(set, &format!("block{b}.conv0"), c, c, 1.0);
        // small second conv so each block starts close to relu(identity)
        conv(set, &format!("block{b}.conv1"), c, c, 0.1);
    }
    conv(set, "tail", c, 1, 0.1);
    first
}

fn as_matrix(a: &ArrayD<f64>) -> ArrayView2<'_, f64> {
    let cout = *a.shape().last().expect("kernel rank 4");
    a.view()
        .into_shape_with_order((a.len() / cout, cout))
        .expect("standard layout kernel")
}

fn as_vector(a: &ArrayD<f64>) -> ArrayView1<'_, f64> {
    a.view().into_shape_with_order(a.len()).expect("bias vector")
}

fn relu_masked(x: &mut Array2<f64>) -> Array2<f64> {
    let mut mask = Array2::zeros(x.raw_dim());
    ndarray::Zip::from(x).and(&mut mask).for_each(|v, m| {
        if *v > 0.0 {
            *m = 1.0;
        } else {
            *v = 0.0;
        }
    });
    mask
}

pub struct ResCache {
    shape: ImageShape,
    patches: Vec<Array2<f64>>,
    masks: Vec<Array2<f64>>,
}

/// Forward pass over a batch `(batch, side * side)`. `params` are the
/// [`RES_PARAM_ARRAYS`] head arrays in definition order.
pub fn forward_batch(
    params: &[&ArrayD<f64>],
    x: ArrayView2<f64>,
    side: usize,
    keep_cache: bool,
) -> (Array2<f64>, Option<ResCache>) {
    let shape = ImageShape {
        batch: x.nrows(),
        height: side,
        width: side,
    };
    let input = x
        .as_standard_layout()
        .into_owned()
        .into_shape_with_order((shape.pixels(), 1))
        .expect("contiguous");
    let mut patches = Vec::new();
    let mut masks = Vec::new();
    let conv = |h: ArrayView2<f64>, layer: usize, patches: &mut Vec<Array2<f64>>| {
        let (out, p) = conv_forward(
            h,
            shape,
            as_matrix(params[2 * layer]),
            as_vector(params[2 * layer + 1]),
        );
        if keep_cache {
            patches.push(p);
        }
        out
    };

    let mut h = conv(input.view(), 0, &mut patches);
    masks.push(relu_masked(&mut h));
    for blk in 0..RES_BLOCKS {
        let mut a = conv(h.view(), 1 + 2 * blk, &mut patches);
        masks.push(relu_masked(&mut a));
        let mut c = conv(a.view(), 2 + 2 * blk, &mut patches);
        c += &h;
        masks.push(relu_masked(&mut c));
        h = c;
    }
    let out = conv(h.view(), 1 + 2 * RES_BLOCKS, &mut patches);
    let out = out
        .into_shape_with_order((shape.batch, side * side))
        .expect("size preserved");
    let cache = keep_cache.then_some(ResCache {
        shape,
        patches,
        masks,
    });
    (out, cache)
}

/// Returns parameter gradients (definition order) and the input gradient.
pub fn backward(
    params: &[&ArrayD<f64>],
    cache: &ResCache,
    d_out: ArrayView2<f64>,
) -> (Vec<ArrayD<f64>>, Array2<f64>) {
    let shape = cache.shape;
    let n_conv = 2 + 2 * RES_BLOCKS;
    let mut grads: Vec<ArrayD<f64>> = params.iter().map(|p| ArrayD::zeros(p.raw_dim())).collect();
    let store = |grads: &mut Vec<ArrayD<f64>>, layer: usize, k: Array2<f64>, b: ndarray::Array1<f64>| {
        let kshape = params[2 * layer].raw_dim();
        grads[2 * layer] = k.into_shape_with_order(kshape).expect("kernel size");
        grads[2 * layer + 1] = b.into_dyn();
    };
    let back = |layer: usize, d: ArrayView2<f64>| {
        conv_backward(
            &cache.patches[layer],
            as_matrix(params[2 * layer]),
            d,
            shape,
            true,
        )
    };

    let d = d_out
        .as_standard_layout()
        .into_owned()
        .into_shape_with_order((shape.pixels(), 1))
        .expect("contiguous");
    let g = back(n_conv - 1, d.view());
    store(&mut grads, n_conv - 1, g.kernel, g.bias);
    let mut d_h = g.input.expect("input grad");

    for blk in (0..RES_BLOCKS).rev() {
        let d_sum = &d_h * &cache.masks[2 + 2 * blk];
        let g1 = back(2 + 2 * blk, d_sum.view());
        store(&mut grads, 2 + 2 * blk, g1.kernel, g1.bias);
        let d_a = g1.input.expect("input grad") * &cache.masks[1 + 2 * blk];
        let g0 = back(1 + 2 * blk, d_a.view());
        store(&mut grads, 1 + 2 * blk, g0.kernel, g0.bias);
        d_h = d_sum + g0.input.expect("input grad");
    }
    let d_h0 = d_h * &cache.masks[0];
    let g = back(0, d_h0.view());
    store(&mut grads, 0, g.kernel, g.bias);
    let d_x = g
        .input
        .expect("input grad")
        .into_shape_with_order((shape.batch, shape.height * shape.width))
        .expect("size preserved");
    (grads, d_x)
}
