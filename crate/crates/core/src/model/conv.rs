//! 3x3 same-padded cross-correlation on channel-last images, lowered to a
//! matrix product through im2col.
//!
//! Batched activations are `(n * h * w, channels)` matrices, rows ordered
//! image-major then row-major within each image. Kernels are `3x3xCinxCout`
//! and viewed as `(9 * Cin, Cout)` with row index `(ky * 3 + kx) * Cin + c`.

use ndarray::{s, Array1, Array2, Array3, Array4, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ImageShape {
    pub batch: usize,
    pub height: usize,
    pub width: usize,
}

impl ImageShape {
    pub fn pixels(&self) -> usize {
        self.batch * self.height * self.width
    }
}

pub fn im2col(x: ArrayView2<f64>, shape: ImageShape) -> Array2<f64> {
    let cin = x.ncols();
    let (h, w) = (shape.height as isize, shape.width as isize);
    let mut cols = Array2::zeros((shape.pixels(), 9 * cin));
    let mut row = 0;
    for n in 0..shape.batch {
        let base = n * shape.height * shape.width;
        for y in 0..h {
            for xx in 0..w {
                let mut out = cols.row_mut(row);
                let out = out.as_slice_mut().expect("standard layout");
                for ky in 0..3isize {
                    let sy = y + ky - 1;
                    if sy < 0 || sy >= h {
                        continue;
                    }
                    for kx in 0..3isize {
                        let sx = xx + kx - 1;
                        if sx < 0 || sx >= w {
                            continue;
                        }
                        let src = base + (sy * w + sx) as usize;
                        let off = ((ky * 3 + kx) as usize) * cin;
                        for (o, v) in out[off..off + cin].iter_mut().zip(x.row(src)) {
                            *o = *v;
                        }
                    }
                }
                row += 1;
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: scatters patch gradients back onto pixels.
pub fn col2im(cols: ArrayView2<f64>, shape: ImageShape, cin: usize) -> Array2<f64> {
    let (h, w) = (shape.height as isize, shape.width as isize);
    let mut x = Array2::zeros((shape.pixels(), cin));
    let mut row = 0;
    for n in 0..shape.batch {
        let base = n * shape.height * shape.width;
        for y in 0..h {
            for xx in 0..w {
                let patch = cols.row(row);
                for ky in 0..3isize {
                    let sy = y + ky - 1;
                    if sy < 0 || sy >= h {
                        continue;
                    }
                    for kx in 0..3isize {
                        let sx = xx + kx - 1;
                        if sx < 0 || sx >= w {
                            continue;
                        }
                        let dst = base + (sy * w + sx) as usize;
                        let off = ((ky * 3 + kx) as usize) * cin;
                        let mut target = x.row_mut(dst);
                        target += &patch.slice(s![off..off + cin]);
                    }
                }
                row += 1;
            }
        }
    }
    x
}

/// Batched forward pass. Returns the output and the im2col patches needed
/// by [`conv_backward`].
pub fn conv_forward(
    x: ArrayView2<f64>,
    shape: ImageShape,
    kernel: ArrayView2<f64>,
    bias: ArrayView1<f64>,
) -> (Array2<f64>, Array2<f64>) {
    debug_assert_eq!(kernel.nrows(), 9 * x.ncols());
    let patches = im2col(x, shape);
    let mut out = patches.dot(&kernel);
    out += &bias;
    (out, patches)
}

pub struct ConvGrads {
    pub input: Option<Array2<f64>>,
    pub kernel: Array2<f64>,
    pub bias: Array1<f64>,
}

pub fn conv_backward(
    patches: &Array2<f64>,
    kernel: ArrayView2<f64>,
    d_out: ArrayView2<f64>,
    shape: ImageShape,
    need_input: bool,
) -> ConvGrads {
    let cin = kernel.nrows() / 9;
    let d_kernel = patches.t().dot(&d_out);
    let d_bias = d_out.sum_axis(Axis(0));
    let input = need_input.then(|| col2im(d_out.dot(&kernel.t()).view(), shape, cin));
    ConvGrads {
        input,
        kernel: d_kernel,
        bias: d_bias,
    }
}

/// Single image `H x W x Cin` convolved with a `3 x 3 x Cin x Cout` kernel.
pub fn conv2d_3x3(x: &Array3<f64>, kernel: &Array4<f64>, bias: &Array1<f64>) -> Result<Array3<f64>> {
    let (h, w, cin) = x.dim();
    let (kh, kw, kin, cout) = kernel.dim();
    if kh != 3 || kw != 3 || kin != cin || bias.len() != cout {
        return Err(Error::invalid(format!(
            "kernel {:?} / bias {} incompatible with input channels {cin}",
            kernel.shape(),
            bias.len()
        )));
    }
    let shape = ImageShape {
        batch: 1,
        height: h,
        width: w,
    };
    let flat_x = x
        .as_standard_layout()
        .into_owned()
        .into_shape_with_order((h * w, cin))
        .expect("contiguous");
    let flat_k = kernel
        .as_standard_layout()
        .into_owned()
        .into_shape_with_order((9 * cin, cout))
        .expect("contiguous");
    let (out, _) = conv_forward(flat_x.view(), shape, flat_k.view(), bias.view());
    Ok(out.into_shape_with_order((h, w, cout)).expect("size preserved"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{Array, Array4};

    #[test]
    fn identity_kernel() {
        let x = Array::from_shape_fn((5, 4, 2), |(i, j, c)| (i * 7 + j * 3 + c) as f64 * 0.1);
        let mut k = Array4::zeros((3, 3, 2, 2));
        k[[1, 1, 0, 0]] = 1.0;
        k[[1, 1, 1, 1]] = 1.0;
        let b = Array1::from(vec![0.5, -1.0]);
        let y = conv2d_3x3(&x, &k, &b).unwrap();
        for ((i, j, c), v) in y.indexed_iter() {
            assert!((v - (x[[i, j, c]] + b[c])).abs() < 1e-15);
        }
    }

    #[test]
    fn box_kernel_interior_and_corner() {
        let c = 0.7;
        let x = Array3::from_elem((6, 6, 1), c);
        let k = Array4::ones((3, 3, 1, 1));
        let y = conv2d_3x3(&x, &k, &Array1::zeros(1)).unwrap();
        assert!((y[[3, 3, 0]] - 9.0 * c).abs() < 1e-12);
        assert!((y[[0, 0, 0]] - 4.0 * c).abs() < 1e-12);
        assert!((y[[0, 3, 0]] - 6.0 * c).abs() < 1e-12);
    }

    #[test]
    fn shape_mismatch() {
        let x = Array3::zeros((4, 4, 2));
        let k = Array4::zeros((3, 3, 1, 1));
        assert!(conv2d_3x3(&x, &k, &Array1::zeros(1)).is_err());
        let k = Array4::zeros((3, 3, 2, 3));
        assert!(conv2d_3x3(&x, &k, &Array1::zeros(2)).is_err());
    }

    #[test]
    fn col2im_is_adjoint_of_im2col() {
        let shape = ImageShape {
            batch: 2,
            height: 4,
            width: 3,
        };
        let x = Array2::from_shape_fn((24, 2), |(i, c)| ((i * 5 + c * 11) % 7) as f64 - 3.0);
        let cols = Array2::from_shape_fn((24, 18), |(i, j)| ((i * 3 + j * 13) % 5) as f64 - 2.0);
        let lhs = (&im2col(x.view(), shape) * &cols).sum();
        let rhs = (&x * &col2im(cols.view(), shape, 2)).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }
}
