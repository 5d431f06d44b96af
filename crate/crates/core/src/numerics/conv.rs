//! 2-D convolution and transposed convolution over single `[C, H, W]` samples.
//!
//! Everything lowers to one GEMM kernel whose inner loop runs along a
//! contiguous output row; each output element is accumulated over the
//! reduction index in ascending order, so results are bit-reproducible.

use super::tensor::{Real, Tensor};
use crate::error::{Error, Result};

/// `c[m×n] (+)= A[m×k] · b[k×n]`, with `A[i, kk] = a[i*a_rs + kk*a_cs]`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm<T: Real>(
    m: usize,
    n: usize,
    k: usize,
    a: &[T],
    a_rs: usize,
    a_cs: usize,
    b: &[T],
    c: &mut [T],
    accumulate: bool,
) {
    debug_assert!(b.len() >= k * n && c.len() >= m * n);
    if !accumulate {
        c[..m * n].iter_mut().for_each(|v| *v = T::zero());
    }
    for i in 0..m {
        let c_row = &mut c[i * n..(i + 1) * n];
        for kk in 0..k {
            let alpha = a[i * a_rs + kk * a_cs];
            let b_row = &b[kk * n..(kk + 1) * n];
            for (cv, &bv) in c_row.iter_mut().zip(b_row) {
                *cv = *cv + alpha * bv;
            }
        }
    }
}

fn transpose<T: Real>(src: &[T], rows: usize, cols: usize) -> Vec<T> {
    let mut out = vec![T::zero(); rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = src[r * cols + c];
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeometry {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

impl ConvGeometry {
    pub fn out_height(&self) -> usize {
        (self.height + 2 * self.padding - self.kernel) / self.stride + 1
    }

    pub fn out_width(&self) -> usize {
        (self.width + 2 * self.padding - self.kernel) / self.stride + 1
    }

    fn validate(&self) -> Result<()> {
        if self.stride == 0 || self.kernel == 0 {
            return Err(Error::invalid("stride and kernel size must be positive"));
        }
        if self.kernel > self.height + 2 * self.padding || self.kernel > self.width + 2 * self.padding
        {
            return Err(Error::invalid(format!(
                "kernel {} exceeds padded input {}x{}",
                self.kernel,
                self.height + 2 * self.padding,
                self.width + 2 * self.padding
            )));
        }
        Ok(())
    }
}

/// Unfold `[C, H, W]` into `[C*K*K, Ho*Wo]` patches.
fn im2col<T: Real>(input: &[T], g: &ConvGeometry) -> Vec<T> {
    let (ho, wo) = (g.out_height(), g.out_width());
    let p = ho * wo;
    let k = g.kernel;
    let mut cols = vec![T::zero(); g.channels * k * k * p];
    for c in 0..g.channels {
        for ky in 0..k {
            for kx in 0..k {
                let row = ((c * k + ky) * k + kx) * p;
                for oy in 0..ho {
                    let iy = (oy * g.stride + ky) as isize - g.padding as isize;
                    if iy < 0 || iy >= g.height as isize {
                        continue;
                    }
                    let src = (c * g.height + iy as usize) * g.width;
                    for ox in 0..wo {
                        let ix = (ox * g.stride + kx) as isize - g.padding as isize;
                        if ix >= 0 && ix < g.width as isize {
                            cols[row + oy * wo + ox] = input[src + ix as usize];
                        }
                    }
                }
            }
        }
    }
    cols
}

/// Fold `[C*K*K, Ho*Wo]` back onto `[C, H, W]`, summing overlaps.
fn col2im<T: Real>(cols: &[T], g: &ConvGeometry) -> Vec<T> {
    let (ho, wo) = (g.out_height(), g.out_width());
    let p = ho * wo;
    let k = g.kernel;
    let mut out = vec![T::zero(); g.channels * g.height * g.width];
    for c in 0..g.channels {
        for ky in 0..k {
            for kx in 0..k {
                let row = ((c * k + ky) * k + kx) * p;
                for oy in 0..ho {
                    let iy = (oy * g.stride + ky) as isize - g.padding as isize;
                    if iy < 0 || iy >= g.height as isize {
                        continue;
                    }
                    let dst = (c * g.height + iy as usize) * g.width;
                    for ox in 0..wo {
                        let ix = (ox * g.stride + kx) as isize - g.padding as isize;
                        if ix >= 0 && ix < g.width as isize {
                            let o = &mut out[dst + ix as usize];
                            *o = *o + cols[row + oy * wo + ox];
                        }
                    }
                }
            }
        }
    }
    out
}

fn conv_geometry<T: Real>(
    input: &Tensor<T>,
    kernels: &Tensor<T>,
    stride: usize,
    padding: usize,
) -> Result<(ConvGeometry, usize)> {
    let (c, h, w) = input.dims3()?;
    let (o, kc, kh, kw) = match kernels.shape()[..] {
        [o, kc, kh, kw] => (o, kc, kh, kw),
        _ => {
            return Err(Error::invalid(format!(
                "kernels must be [out, in, k, k], got {:?}",
                kernels.shape()
            )))
        }
    };
    if kc != c {
        return Err(Error::ShapeMismatch {
            op: "conv2d channels",
            left: input.shape().to_vec(),
            right: kernels.shape().to_vec(),
        });
    }
    if kh != kw {
        return Err(Error::invalid("only square kernels are supported"));
    }
    let g = ConvGeometry {
        channels: c,
        height: h,
        width: w,
        kernel: kh,
        stride,
        padding,
    };
    g.validate()?;
    Ok((g, o))
}

/// Cross-correlation of `[C, H, W]` with `[O, C, K, K]` kernels.
pub fn conv2d_forward<T: Real>(
    input: &Tensor<T>,
    kernels: &Tensor<T>,
    stride: usize,
    padding: usize,
) -> Result<Tensor<T>> {
    let (g, o) = conv_geometry(input, kernels, stride, padding)?;
    let (ho, wo) = (g.out_height(), g.out_width());
    let ckk = g.channels * g.kernel * g.kernel;
    let cols = im2col(input.data(), &g);
    let mut out = vec![T::zero(); o * ho * wo];
    gemm(o, ho * wo, ckk, kernels.data(), ckk, 1, &cols, &mut out, false);
    Tensor::from_vec(vec![o, ho, wo], out)
}

/// Gradients of a scalar loss w.r.t. the input and kernels of
/// [`conv2d_forward`], given the gradient w.r.t. its output.
pub fn conv2d_backward<T: Real>(
    input: &Tensor<T>,
    kernels: &Tensor<T>,
    grad_out: &Tensor<T>,
    stride: usize,
    padding: usize,
) -> Result<(Tensor<T>, Tensor<T>)> {
    let (g, o) = conv_geometry(input, kernels, stride, padding)?;
    let (ho, wo) = (g.out_height(), g.out_width());
    if grad_out.shape() != [o, ho, wo] {
        return Err(Error::ShapeMismatch {
            op: "conv2d_backward grad_out",
            left: vec![o, ho, wo],
            right: grad_out.shape().to_vec(),
        });
    }
    let p = ho * wo;
    let ckk = g.channels * g.kernel * g.kernel;
    let cols = im2col(input.data(), &g);

    // dW^T[ckk, o] = cols[ckk, p] · gout^T[p, o]
    let gout_t = transpose(grad_out.data(), o, p);
    let mut gw_t = vec![T::zero(); ckk * o];
    gemm(ckk, o, p, &cols, p, 1, &gout_t, &mut gw_t, false);
    let gw = transpose(&gw_t, ckk, o);

    // dcols[ckk, p] = W^T[ckk, o] · gout[o, p]
    let mut gcols = vec![T::zero(); ckk * p];
    gemm(ckk, p, o, kernels.data(), 1, ckk, grad_out.data(), &mut gcols, false);
    let gin = col2im(&gcols, &g);

    Ok((
        Tensor::from_vec(input.shape().to_vec(), gin)?,
        Tensor::from_vec(kernels.shape().to_vec(), gw)?,
    ))
}

fn transpose_geometry<T: Real>(
    input: &Tensor<T>,
    kernels: &Tensor<T>,
    stride: usize,
) -> Result<(usize, ConvGeometry)> {
    let (ci, h, w) = input.dims3()?;
    let (kci, co, kh, kw) = match kernels.shape()[..] {
        [a, b, c, d] => (a, b, c, d),
        _ => {
            return Err(Error::invalid(format!(
                "transposed kernels must be [in, out, k, k], got {:?}",
                kernels.shape()
            )))
        }
    };
    if kci != ci {
        return Err(Error::ShapeMismatch {
            op: "conv_transpose2d channels",
            left: input.shape().to_vec(),
            right: kernels.shape().to_vec(),
        });
    }
    if kh != kw || stride == 0 {
        return Err(Error::invalid("transposed conv needs square kernels and stride > 0"));
    }
    // Geometry of the equivalent forward convolution mapping the output back to the input.
    let g = ConvGeometry {
        channels: co,
        height: (h - 1) * stride + kh,
        width: (w - 1) * stride + kw,
        kernel: kh,
        stride,
        padding: 0,
    };
    Ok((ci, g))
}

/// Transposed convolution (no padding): `[Ci, H, W]` with `[Ci, Co, K, K]`
/// kernels gives `[Co, (H-1)s+K, (W-1)s+K]`.
pub fn conv_transpose2d_forward<T: Real>(
    input: &Tensor<T>,
    kernels: &Tensor<T>,
    stride: usize,
) -> Result<Tensor<T>> {
    let (ci, g) = transpose_geometry(input, kernels, stride)?;
    let hw = input.shape()[1] * input.shape()[2];
    let cokk = g.channels * g.kernel * g.kernel;
    // cols[cokk, hw] = W^T[cokk, ci] · in[ci, hw]
    let mut cols = vec![T::zero(); cokk * hw];
    gemm(cokk, hw, ci, kernels.data(), 1, cokk, input.data(), &mut cols, false);
    let out = col2im(&cols, &g);
    Tensor::from_vec(vec![g.channels, g.height, g.width], out)
}

pub fn conv_transpose2d_backward<T: Real>(
    input: &Tensor<T>,
    kernels: &Tensor<T>,
    grad_out: &Tensor<T>,
    stride: usize,
) -> Result<(Tensor<T>, Tensor<T>)> {
    let (ci, g) = transpose_geometry(input, kernels, stride)?;
    if grad_out.shape() != [g.channels, g.height, g.width] {
        return Err(Error::ShapeMismatch {
            op: "conv_transpose2d_backward grad_out",
            left: vec![g.channels, g.height, g.width],
            right: grad_out.shape().to_vec(),
        });
    }
    let hw = input.shape()[1] * input.shape()[2];
    let cokk = g.channels * g.kernel * g.kernel;
    let gcols = im2col(grad_out.data(), &g);

    // d_in[ci, hw] = W[ci, cokk] · gcols[cokk, hw]
    let mut gin = vec![T::zero(); ci * hw];
    gemm(ci, hw, cokk, kernels.data(), cokk, 1, &gcols, &mut gin, false);

    // dW^T[cokk, ci] = gcols[cokk, hw] · in^T[hw, ci]
    let in_t = transpose(input.data(), ci, hw);
    let mut gw_t = vec![T::zero(); cokk * ci];
    gemm(cokk, ci, hw, &gcols, hw, 1, &in_t, &mut gw_t, false);
    let gw = transpose(&gw_t, cokk, ci);

    Ok((
        Tensor::from_vec(input.shape().to_vec(), gin)?,
        Tensor::from_vec(kernels.shape().to_vec(), gw)?,
    ))
}

/// Adds `bias[c]` to every element of channel `c`.
pub fn add_channel_bias<T: Real>(x: &mut Tensor<T>, bias: &[T]) -> Result<()> {
    let (c, h, w) = x.dims3()?;
    if bias.len() != c {
        return Err(Error::ShapeMismatch {
            op: "add_channel_bias",
            left: x.shape().to_vec(),
            right: vec![bias.len()],
        });
    }
    for (plane, &b) in x.data_mut().chunks_mut(h * w).zip(bias) {
        plane.iter_mut().for_each(|v| *v = *v + b);
    }
    Ok(())
}

/// Per-channel sums of a `[C, H, W]` gradient (the bias gradient).
pub fn channel_sums<T: Real>(x: &Tensor<T>) -> Result<Vec<T>> {
    let (_, h, w) = x.dims3()?;
    Ok(x
        .data()
        .chunks(h * w)
        .map(|plane| plane.iter().fold(T::zero(), |a, &v| a + v))
        .collect())
}
