//! Patch unfolding so a convolution becomes one matrix product.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Output spatial dims of a convolution over `(h, w)` input.
pub fn conv2d_output_dims(
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
) -> Result<(usize, usize)> {
    if stride == 0 {
        return Err(Error::arg("stride must be >= 1"));
    }
    if kh == 0 || kw == 0 {
        return Err(Error::arg("kernel dims must be >= 1"));
    }
    if kh > h + 2 * pad || kw > w + 2 * pad {
        return Err(Error::arg(format!(
            "kernel {kh}x{kw} larger than padded input {}x{}",
            h + 2 * pad,
            w + 2 * pad
        )));
    }
    Ok(((h + 2 * pad - kh) / stride + 1, (w + 2 * pad - kw) / stride + 1))
}

/// Unfold a `c x h x w` input into a `(c*kh*kw) x (h_out*w_out)` matrix.
///
/// Column `j` is the flattened receptive field of output position `j`
/// (row-major over output positions); within a column the order is channel,
/// then kernel row, then kernel column. Padding cells are zero.
pub fn im2col(input: &Tensor, kh: usize, kw: usize, stride: usize, pad: usize) -> Result<Tensor> {
    if input.rank() != 3 {
        return Err(Error::shape(format!(
            "im2col expects c x h x w input, got {:?}",
            input.shape()
        )));
    }
    let (c, h, w) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let (h_out, w_out) = conv2d_output_dims(h, w, kh, kw, stride, pad)?;
    let cols = h_out * w_out;
    let rows = c * kh * kw;
    let mut out = Tensor::zeros([rows, cols]);
    let data = input.data();
    for ic in 0..c {
        for ky in 0..kh {
            for kx in 0..kw {
                let row = ic * kh * kw + ky * kw + kx;
                let base = row * cols;
                for oy in 0..h_out {
                    // Input row for this kernel row, in padded coordinates.
                    let iy = (oy * stride + ky) as isize - pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for ox in 0..w_out {
                        let ix = (ox * stride + kx) as isize - pad as isize;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        out.data_mut()[base + oy * w_out + ox] =
                            data[ic * h * w + iy as usize * w + ix as usize];
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Adjoint of [`im2col`]: scatter-add a `(c*kh*kw) x (h_out*w_out)` matrix
/// back onto a `c x h x w` tensor. Used by the convolution backward pass.
#[allow(clippy::too_many_arguments)]
pub fn col2im(
    cols_mat: &Tensor,
    c: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
) -> Result<Tensor> {
    let (h_out, w_out) = conv2d_output_dims(h, w, kh, kw, stride, pad)?;
    let cols = h_out * w_out;
    if cols_mat.shape() != [c * kh * kw, cols] {
        return Err(Error::shape(format!(
            "col2im expects {:?}, got {:?}",
            [c * kh * kw, cols],
            cols_mat.shape()
        )));
    }
    let mut out = Tensor::zeros([c, h, w]);
    let src = cols_mat.data();
    for ic in 0..c {
        for ky in 0..kh {
            for kx in 0..kw {
                let row = ic * kh * kw + ky * kw + kx;
                let base = row * cols;
                for oy in 0..h_out {
                    let iy = (oy * stride + ky) as isize - pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for ox in 0..w_out {
                        let ix = (ox * stride + kx) as isize - pad as isize;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        out.data_mut()[ic * h * w + iy as usize * w + ix as usize] +=
                            src[base + oy * w_out + ox];
                    }
                }
            }
        }
    }
    Ok(out)
}
