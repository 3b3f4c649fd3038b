//! Raw forward/backward kernels. Shape validation happens here; the graph
//! layer only wires values and gradients together.

use crate::error::{Error, Result};
use crate::nn::Tensor;

/// `c = a · b + beta · c` with explicit row/column strides.
#[allow(clippy::too_many_arguments)]
#[inline]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    rsa: isize,
    csa: isize,
    b: &[f64],
    rsb: isize,
    csb: isize,
    beta: f64,
    c: &mut [f64],
    rsc: isize,
) {
    // SAFETY: callers pass slices whose extents cover every (row, col)
    // addressed by the given strides; checked by the debug asserts below.
    debug_assert!(
        m == 0 || k == 0 || a.len() >= (m - 1) * rsa as usize + (k - 1) * csa as usize + 1
    );
    debug_assert!(
        k == 0 || n == 0 || b.len() >= (k - 1) * rsb as usize + (n - 1) * csb as usize + 1
    );
    debug_assert!(c.len() >= m * n);
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            rsc,
            1,
        );
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conv3dGeometry {
    pub c_in: usize,
    pub c_out: usize,
    pub input: [usize; 3],
    pub kernel: [usize; 3],
    pub stride: [usize; 3],
    pub pad: [usize; 3],
    pub output: [usize; 3],
}

impl Conv3dGeometry {
    pub fn new(
        input: &[usize],
        kernel: &[usize],
        stride: [usize; 3],
        pad: [usize; 3],
    ) -> Result<Self> {
        if input.len() != 4 || kernel.len() != 5 {
            return Err(Error::shape(
                "conv3d",
                format!("input {input:?} must be C×T×H×W and kernel {kernel:?} Co×Ci×kt×kh×kw"),
            ));
        }
        if input[0] != kernel[1] {
            return Err(Error::shape(
                "conv3d",
                format!(
                    "input channels {} != kernel input channels {}",
                    input[0], kernel[1]
                ),
            ));
        }
        if stride.contains(&0) {
            return Err(Error::shape("conv3d", "zero stride"));
        }
        let mut output = [0; 3];
        for d in 0..3 {
            let padded = input[d + 1] + 2 * pad[d];
            let k = kernel[d + 2];
            if k == 0 || k > padded {
                return Err(Error::shape(
                    "conv3d",
                    format!("kernel dim {d} = {k} exceeds padded input {padded}"),
                ));
            }
            output[d] = (padded - k) / stride[d] + 1;
        }
        Ok(Conv3dGeometry {
            c_in: input[0],
            c_out: kernel[0],
            input: [input[1], input[2], input[3]],
            kernel: [kernel[2], kernel[3], kernel[4]],
            stride,
            pad,
            output,
        })
    }

    fn patch_len(&self) -> usize {
        self.c_in * self.kernel.iter().product::<usize>()
    }

    fn plane_len(&self) -> usize {
        self.output[1] * self.output[2]
    }

    pub fn output_shape(&self) -> [usize; 4] {
        [self.c_out, self.output[0], self.output[1], self.output[2]]
    }

    /// Column matrix (patch_len × H'W') for output time step `ot`.
    fn im2col(&self, input: &[f64], ot: usize, cols: &mut [f64]) {
        let [t_in, h_in, w_in] = self.input;
        let [kt, kh, kw] = self.kernel;
        let [_, oh, ow] = self.output;
        let plane = self.plane_len();
        let mut row = 0;
        for ci in 0..self.c_in {
            for dt in 0..kt {
                let it = (ot * self.stride[0] + dt) as isize - self.pad[0] as isize;
                for dh in 0..kh {
                    for dw in 0..kw {
                        let dst = &mut cols[row * plane..(row + 1) * plane];
                        row += 1;
                        if it < 0 || it >= t_in as isize {
                            dst.fill(0.0);
                            continue;
                        }
                        let base = (ci * t_in + it as usize) * h_in * w_in;
                        for y in 0..oh {
                            let ih = (y * self.stride[1] + dh) as isize - self.pad[1] as isize;
                            let out_row = &mut dst[y * ow..(y + 1) * ow];
                            if ih < 0 || ih >= h_in as isize {
                                out_row.fill(0.0);
                                continue;
                            }
                            let src =
                                &input[base + ih as usize * w_in..base + (ih as usize + 1) * w_in];
                            for (x, o) in out_row.iter_mut().enumerate() {
                                let iw = (x * self.stride[2] + dw) as isize - self.pad[2] as isize;
                                *o = if iw < 0 || iw >= w_in as isize {
                                    0.0
                                } else {
                                    src[iw as usize]
                                };
                            }
                        }
                    }
                }
            }
        }
    }

    /// Scatter-add of a column matrix back into the input gradient.
    fn col2im(&self, cols: &[f64], ot: usize, grad_input: &mut [f64]) {
        let [t_in, h_in, w_in] = self.input;
        let [kt, kh, kw] = self.kernel;
        let [_, oh, ow] = self.output;
        let plane = self.plane_len();
        let mut row = 0;
        for ci in 0..self.c_in {
            for dt in 0..kt {
                let it = (ot * self.stride[0] + dt) as isize - self.pad[0] as isize;
                for dh in 0..kh {
                    for dw in 0..kw {
                        let src = &cols[row * plane..(row + 1) * plane];
                        row += 1;
                        if it < 0 || it >= t_in as isize {
                            continue;
                        }
                        let base = (ci * t_in + it as usize) * h_in * w_in;
                        for y in 0..oh {
                            let ih = (y * self.stride[1] + dh) as isize - self.pad[1] as isize;
                            if ih < 0 || ih >= h_in as isize {
                                continue;
                            }
                            let dst = &mut grad_input
                                [base + ih as usize * w_in..base + (ih as usize + 1) * w_in];
                            for (x, g) in src[y * ow..(y + 1) * ow].iter().enumerate() {
                                let iw = (x * self.stride[2] + dw) as isize - self.pad[2] as isize;
                                if iw >= 0 && iw < w_in as isize {
                                    dst[iw as usize] += g;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

/// 3D cross-correlation. `input` is C×T×H×W, `kernel` Co×Ci×kt×kh×kw.
pub fn conv3d(
    input: &Tensor,
    kernel: &Tensor,
    bias: &Tensor,
    stride: [usize; 3],
    pad: [usize; 3],
) -> Result<Tensor> {
    let geo = Conv3dGeometry::new(input.shape(), kernel.shape(), stride, pad)?;
    if bias.len() != geo.c_out {
        return Err(Error::shape(
            "conv3d",
            format!(
                "bias length {} != output channels {}",
                bias.len(),
                geo.c_out
            ),
        ));
    }
    let [ot_n, oh, ow] = geo.output;
    let plane = oh * ow;
    let k = geo.patch_len();
    let mut out = vec![0.0; geo.c_out * ot_n * plane];
    let mut cols = vec![0.0; k * plane];
    let mut block = vec![0.0; geo.c_out * plane];
    for ot in 0..ot_n {
        geo.im2col(input.data(), ot, &mut cols);
        gemm(
            geo.c_out,
            k,
            plane,
            kernel.data(),
            k as isize,
            1,
            &cols,
            plane as isize,
            1,
            0.0,
            &mut block,
            plane as isize,
        );
        for co in 0..geo.c_out {
            let b = bias.data()[co];
            let dst = &mut out[(co * ot_n + ot) * plane..(co * ot_n + ot + 1) * plane];
            for (d, s) in dst.iter_mut().zip(&block[co * plane..(co + 1) * plane]) {
                *d = s + b;
            }
        }
    }
    Tensor::from_vec(&geo.output_shape(), out)
}

pub struct Conv3dGrads {
    pub input: Tensor,
    pub kernel: Tensor,
    pub bias: Tensor,
}

pub fn conv3d_backward(
    input: &Tensor,
    kernel: &Tensor,
    grad_out: &Tensor,
    stride: [usize; 3],
    pad: [usize; 3],
) -> Result<Conv3dGrads> {
    let geo = Conv3dGeometry::new(input.shape(), kernel.shape(), stride, pad)?;
    if grad_out.shape() != geo.output_shape() {
        return Err(Error::shape(
            "conv3d_backward",
            format!(
                "grad {:?} vs output {:?}",
                grad_out.shape(),
                geo.output_shape()
            ),
        ));
    }
    let [ot_n, oh, ow] = geo.output;
    let plane = oh * ow;
    let k = geo.patch_len();
    let mut g_input = vec![0.0; input.len()];
    let mut g_kernel = vec![0.0; kernel.len()];
    let mut g_bias = vec![0.0; geo.c_out];
    let mut cols = vec![0.0; k * plane];
    let mut g_cols = vec![0.0; k * plane];
    let mut g_block = vec![0.0; geo.c_out * plane];
    for ot in 0..ot_n {
        for co in 0..geo.c_out {
            let src = &grad_out.data()[(co * ot_n + ot) * plane..(co * ot_n + ot + 1) * plane];
            g_block[co * plane..(co + 1) * plane].copy_from_slice(src);
            g_bias[co] += src.iter().sum::<f64>();
        }
        geo.im2col(input.data(), ot, &mut cols);
        // dK += G · colsᵀ
        gemm(
            geo.c_out,
            plane,
            k,
            &g_block,
            plane as isize,
            1,
            &cols,
            1,
            plane as isize,
            1.0,
            &mut g_kernel,
            k as isize,
        );
        // dcols = Kᵀ · G
        gemm(
            k,
            geo.c_out,
            plane,
            kernel.data(),
            1,
            k as isize,
            &g_block,
            plane as isize,
            1,
            0.0,
            &mut g_cols,
            plane as isize,
        );
        geo.col2im(&g_cols, ot, &mut g_input);
    }
    Ok(Conv3dGrads {
        input: Tensor::from_vec(input.shape(), g_input)?,
        kernel: Tensor::from_vec(kernel.shape(), g_kernel)?,
        bias: Tensor::from_vec(&[geo.c_out], g_bias)?,
    })
}

fn linear_dims(input: &Tensor, weight: &Tensor, bias: &Tensor) -> Result<(usize, usize, usize)> {
    if input.rank() != 2 || weight.rank() != 2 {
        return Err(Error::shape(
            "linear",
            format!(
                "input {:?} and weight {:?} must be matrices",
                input.shape(),
                weight.shape()
            ),
        ));
    }
    let (n, f_in) = (input.shape()[0], input.shape()[1]);
    let (f_out, w_in) = (weight.shape()[0], weight.shape()[1]);
    if f_in != w_in {
        return Err(Error::shape(
            "linear",
            format!("inner dimension {f_in} != weight input width {w_in}"),
        ));
    }
    if bias.len() != f_out {
        return Err(Error::shape(
            "linear",
            format!("bias length {} != output width {f_out}", bias.len()),
        ));
    }
    Ok((n, f_in, f_out))
}

/// `input (n×f_in) · weightᵀ + bias`, weight stored f_out×f_in.
pub fn linear(input: &Tensor, weight: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (n, f_in, f_out) = linear_dims(input, weight, bias)?;
    let mut out = Vec::with_capacity(n * f_out);
    for _ in 0..n {
        out.extend_from_slice(bias.data());
    }
    gemm(
        n,
        f_in,
        f_out,
        input.data(),
        f_in as isize,
        1,
        weight.data(),
        1,
        f_in as isize,
        1.0,
        &mut out,
        f_out as isize,
    );
    Tensor::from_vec(&[n, f_out], out)
}

pub struct LinearGrads {
    pub input: Tensor,
    pub weight: Tensor,
    pub bias: Tensor,
}

pub fn linear_backward(
    input: &Tensor,
    weight: &Tensor,
    bias: &Tensor,
    grad_out: &Tensor,
) -> Result<LinearGrads> {
    let (n, f_in, f_out) = linear_dims(input, weight, bias)?;
    if grad_out.shape() != [n, f_out] {
        return Err(Error::shape(
            "linear_backward",
            format!("grad {:?} vs output [{n}, {f_out}]", grad_out.shape()),
        ));
    }
    let mut g_input = vec![0.0; n * f_in];
    gemm(
        n,
        f_out,
        f_in,
        grad_out.data(),
        f_out as isize,
        1,
        weight.data(),
        f_in as isize,
        1,
        0.0,
        &mut g_input,
        f_in as isize,
    );
    let mut g_weight = vec![0.0; f_out * f_in];
    gemm(
        f_out,
        n,
        f_in,
        grad_out.data(),
        1,
        f_out as isize,
        input.data(),
        f_in as isize,
        1,
        0.0,
        &mut g_weight,
        f_in as isize,
    );
    let mut g_bias = vec![0.0; f_out];
    for row in grad_out.data().chunks_exact(f_out) {
        for (b, g) in g_bias.iter_mut().zip(row) {
            *b += g;
        }
    }
    Ok(LinearGrads {
        input: Tensor::from_vec(&[n, f_in], g_input)?,
        weight: Tensor::from_vec(&[f_out, f_in], g_weight)?,
        bias: Tensor::from_vec(&[f_out], g_bias)?,
    })
}

#[inline]
pub fn sigmoid_scalar(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn reduced_shape(shape: &[usize], axes: &[usize]) -> Result<Vec<usize>> {
    let mut out = shape.to_vec();
    for &a in axes {
        if a >= shape.len() {
            return Err(Error::Axis {
                axis: a,
                rank: shape.len(),
            });
        }
        out[a] = 1;
    }
    Ok(out)
}

/// Arithmetic mean over `axes`; reduced axes are kept with size 1.
pub fn mean_pool(input: &Tensor, axes: &[usize]) -> Result<Tensor> {
    let out_shape = reduced_shape(input.shape(), axes)?;
    let count: usize = axes
        .iter()
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .map(|&a| input.shape()[a])
        .product();
    let mut out = Tensor::zeros(&out_shape);
    let out_strides = out.strides();
    let shape = input.shape().to_vec();
    let mut idx = vec![0usize; shape.len()];
    for &v in input.data() {
        let off: usize = idx
            .iter()
            .zip(&out_shape)
            .zip(&out_strides)
            .map(|((&i, &d), &s)| if d == 1 { 0 } else { i * s })
            .sum();
        out.data_mut()[off] += v;
        increment(&mut idx, &shape);
    }
    out.scale(1.0 / count as f64);
    Ok(out)
}

pub fn mean_pool_backward(
    input_shape: &[usize],
    axes: &[usize],
    grad_out: &Tensor,
) -> Result<Tensor> {
    let out_shape = reduced_shape(input_shape, axes)?;
    let count: usize = axes
        .iter()
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .map(|&a| input_shape[a])
        .product();
    let out_strides = super::tensor::strides_of(&out_shape);
    let mut g = Tensor::zeros(input_shape);
    let mut idx = vec![0usize; input_shape.len()];
    let inv = 1.0 / count as f64;
    for v in g.data_mut() {
        let off: usize = idx
            .iter()
            .zip(&out_shape)
            .zip(&out_strides)
            .map(|((&i, &d), &s)| if d == 1 { 0 } else { i * s })
            .sum();
        *v = grad_out.data()[off] * inv;
        increment(&mut idx, input_shape);
    }
    Ok(g)
}

fn increment(idx: &mut [usize], shape: &[usize]) {
    for d in (0..shape.len()).rev() {
        idx[d] += 1;
        if idx[d] < shape[d] {
            return;
        }
        idx[d] = 0;
    }
}

/// Concatenate along `axis`; all other dimensions must agree.
pub fn concat(inputs: &[&Tensor], axis: usize) -> Result<Tensor> {
    let first = inputs
        .first()
        .ok_or_else(|| Error::shape("concat", "no inputs"))?;
    let rank = first.rank();
    if axis >= rank {
        return Err(Error::Axis { axis, rank });
    }
    let mut shape = first.shape().to_vec();
    shape[axis] = 0;
    for t in inputs {
        if t.rank() != rank
            || t.shape()
                .iter()
                .enumerate()
                .any(|(d, &n)| d != axis && n != first.shape()[d])
        {
            return Err(Error::shape(
                "concat",
                format!(
                    "{:?} incompatible with {:?} along axis {axis}",
                    t.shape(),
                    first.shape()
                ),
            ));
        }
        shape[axis] += t.shape()[axis];
    }
    let outer: usize = shape[..axis].iter().product();
    let mut data = Vec::with_capacity(shape.iter().product());
    for o in 0..outer {
        for t in inputs {
            let chunk: usize = t.shape()[axis..].iter().product();
            data.extend_from_slice(&t.data()[o * chunk..(o + 1) * chunk]);
        }
    }
    Tensor::from_vec(&shape, data)
}

pub fn concat_backward(shapes: &[Vec<usize>], axis: usize, grad_out: &Tensor) -> Vec<Tensor> {
    let outer: usize = grad_out.shape()[..axis].iter().product();
    let mut grads: Vec<Vec<f64>> = shapes
        .iter()
        .map(|s| Vec::with_capacity(s.iter().product()))
        .collect();
    let mut pos = 0;
    for _ in 0..outer {
        for (s, g) in shapes.iter().zip(grads.iter_mut()) {
            let chunk: usize = s[axis..].iter().product();
            g.extend_from_slice(&grad_out.data()[pos..pos + chunk]);
            pos += chunk;
        }
    }
    shapes
        .iter()
        .zip(grads)
        .map(|(s, g)| Tensor::from_vec(s, g).expect("concat grad shape"))
        .collect()
}

/// Mean per-entry binary cross-entropy on logits. Returns the loss and
/// d loss / d logits.
pub fn bce_multilabel(logits: &Tensor, targets: &Tensor) -> Result<(f64, Tensor)> {
    if logits.shape() != targets.shape() {
        return Err(Error::shape(
            "bce_multilabel",
            format!(
                "logits {:?} vs targets {:?}",
                logits.shape(),
                targets.shape()
            ),
        ));
    }
    for (index, &value) in targets.data().iter().enumerate() {
        if value != 0.0 && value != 1.0 {
            return Err(Error::NonBinaryTarget { index, value });
        }
    }
    let n = logits.len() as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(logits.len());
    for (&z, &y) in logits.data().iter().zip(targets.data()) {
        // -[y log σ(z) + (1-y) log(1-σ(z))] = softplus(z) - y z
        loss += if y == 1.0 { softplus(-z) } else { softplus(z) };
        grad.push((sigmoid_scalar(z) - y) / n);
    }
    let loss = loss / n;
    if !loss.is_finite() {
        return Err(Error::NonFinite {
            op: "bce_multilabel",
        });
    }
    Ok((loss, Tensor::from_vec(logits.shape(), grad)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Direct 7-loop summation, no im2col.
    fn conv3d_direct(
        input: &Tensor,
        kernel: &Tensor,
        bias: &Tensor,
        s: [usize; 3],
        p: [usize; 3],
    ) -> Tensor {
        let geo = Conv3dGeometry::new(input.shape(), kernel.shape(), s, p).unwrap();
        let mut out = Tensor::zeros(&geo.output_shape());
        let [ti, hi, wi] = geo.input;
        for co in 0..geo.c_out {
            for ot in 0..geo.output[0] {
                for oh in 0..geo.output[1] {
                    for ow in 0..geo.output[2] {
                        let mut acc = bias.data()[co];
                        for ci in 0..geo.c_in {
                            for dt in 0..geo.kernel[0] {
                                for dh in 0..geo.kernel[1] {
                                    for dw in 0..geo.kernel[2] {
                                        let t = (ot * s[0] + dt) as isize - p[0] as isize;
                                        let h = (oh * s[1] + dh) as isize - p[1] as isize;
                                        let w = (ow * s[2] + dw) as isize - p[2] as isize;
                                        if t < 0
                                            || h < 0
                                            || w < 0
                                            || t >= ti as isize
                                            || h >= hi as isize
                                            || w >= wi as isize
                                        {
                                            continue;
                                        }
                                        acc += kernel.at(&[co, ci, dt, dh, dw])
                                            * input.at(&[ci, t as usize, h as usize, w as usize]);
                                    }
                                }
                            }
                        }
                        out.set(&[co, ot, oh, ow], acc);
                    }
                }
            }
        }
        out
    }

    fn pseudo(shape: &[usize], seed: u64) -> Tensor {
        let mut state = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
        Tensor::from_fn(shape, |_| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state % 2000) as f64 / 1000.0 - 1.0
        })
    }

    #[test]
    fn identity_kernel_reproduces_input() {
        let input = pseudo(&[1, 3, 4, 5], 1);
        let kernel = Tensor::full(&[1, 1, 1, 1, 1], 1.0);
        let out = conv3d(&input, &kernel, &Tensor::zeros(&[1]), [1; 3], [0; 3]).unwrap();
        assert_eq!(out, input);
    }

    #[test]
    fn constant_input_all_ones_kernel() {
        for c_in in [1, 2, 3] {
            let input = Tensor::full(&[c_in, 5, 5, 5], 1.0);
            let kernel = Tensor::full(&[1, c_in, 3, 3, 3], 1.0);
            let out = conv3d(&input, &kernel, &Tensor::zeros(&[1]), [1; 3], [0; 3]).unwrap();
            assert_eq!(out.shape(), &[1, 3, 3, 3]);
            assert!(out.data().iter().all(|&v| v == 27.0 * c_in as f64));
        }
    }

    #[test]
    fn same_padding_shape() {
        let input = Tensor::zeros(&[2, 8, 16, 16]);
        let kernel = Tensor::zeros(&[4, 2, 3, 3, 3]);
        let out = conv3d(&input, &kernel, &Tensor::zeros(&[4]), [1; 3], [1; 3]).unwrap();
        assert_eq!(out.shape(), &[4, 8, 16, 16]);
    }

    #[test]
    fn matches_direct_summation_with_stride_and_padding() {
        let input = pseudo(&[2, 5, 7, 6], 3);
        let kernel = pseudo(&[3, 2, 3, 3, 2], 4);
        let bias = pseudo(&[3], 5);
        for (s, p) in [
            ([1, 1, 1], [1, 1, 1]),
            ([1, 2, 2], [1, 1, 0]),
            ([2, 1, 3], [0, 2, 1]),
        ] {
            let fast = conv3d(&input, &kernel, &bias, s, p).unwrap();
            let slow = conv3d_direct(&input, &kernel, &bias, s, p);
            assert_eq!(fast.shape(), slow.shape());
            for (a, b) in fast.data().iter().zip(slow.data()) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn conv3d_shape_errors() {
        let input = Tensor::zeros(&[2, 4, 4, 4]);
        let wrong_channels = Tensor::zeros(&[1, 3, 3, 3, 3]);
        let err = conv3d(
            &input,
            &wrong_channels,
            &Tensor::zeros(&[1]),
            [1; 3],
            [0; 3],
        )
        .unwrap_err();
        assert!(err.to_string().contains("input channels 2"));
        let too_big = Tensor::zeros(&[1, 2, 5, 3, 3]);
        assert!(conv3d(&input, &too_big, &Tensor::zeros(&[1]), [1; 3], [0; 3]).is_err());
    }

    #[test]
    fn linear_examples() {
        let input = Tensor::from_vec(&[1, 3], vec![1.0, 2.0, 3.0]).unwrap();
        let weight = Tensor::full(&[2, 3], 1.0);
        let bias = Tensor::from_vec(&[2], vec![0.5, -1.0]).unwrap();
        let out = linear(&input, &weight, &bias).unwrap();
        assert_eq!(out.data(), &[6.5, 5.0]);

        let eye = Tensor::from_fn(&[3, 3], |i| if i % 4 == 0 { 1.0 } else { 0.0 });
        let out = linear(&input, &eye, &Tensor::zeros(&[3])).unwrap();
        assert_eq!(out, input);

        let out = linear(
            &Tensor::zeros(&[5, 8]),
            &Tensor::zeros(&[3, 8]),
            &Tensor::zeros(&[3]),
        )
        .unwrap();
        assert_eq!(out.shape(), &[5, 3]);
        assert!(linear(
            &Tensor::zeros(&[5, 7]),
            &Tensor::zeros(&[3, 8]),
            &Tensor::zeros(&[3])
        )
        .is_err());
    }

    #[test]
    fn bce_examples() {
        let (loss, _) = bce_multilabel(&Tensor::zeros(&[3, 4]), &Tensor::zeros(&[3, 4])).unwrap();
        assert_abs_diff_eq!(loss, std::f64::consts::LN_2, epsilon = 1e-15);
        let (loss, _) = bce_multilabel(&Tensor::scalar(30.0), &Tensor::scalar(1.0)).unwrap();
        assert!(loss < 1e-12);
        // softplus(-0.5) = ln(1 + e^-0.5)
        let (loss, _) = bce_multilabel(&Tensor::scalar(0.5), &Tensor::scalar(1.0)).unwrap();
        assert_abs_diff_eq!(loss, (1.0 + (-0.5f64).exp()).ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(loss, 0.474_076_9, epsilon = 1e-7);
        assert!(matches!(
            bce_multilabel(&Tensor::scalar(0.0), &Tensor::scalar(0.5)),
            Err(Error::NonBinaryTarget { .. })
        ));
    }

    #[test]
    fn mean_pool_keeps_axes() {
        let t = Tensor::from_fn(&[2, 3, 2], |i| i as f64);
        let m = mean_pool(&t, &[1]).unwrap();
        assert_eq!(m.shape(), &[2, 1, 2]);
        assert_eq!(m.data(), &[2.0, 3.0, 8.0, 9.0]);
        assert!(mean_pool(&t, &[3]).is_err());
        // time-constant map: mean over time is the frame itself
        let c = Tensor::from_fn(&[2, 4, 3, 3], |i| (i % 9) as f64);
        let m = mean_pool(&c, &[1]).unwrap();
        assert_eq!(m.shape(), &[2, 1, 3, 3]);
        let expected: Vec<f64> = (0..18).map(|i| (i % 9) as f64).collect();
        assert_eq!(m.data(), expected.as_slice());
    }

    #[test]
    fn concat_middle_axis() {
        let a = Tensor::from_fn(&[2, 1, 2], |i| i as f64);
        let b = Tensor::from_fn(&[2, 2, 2], |i| 10.0 + i as f64);
        let c = concat(&[&a, &b], 1).unwrap();
        assert_eq!(c.shape(), &[2, 3, 2]);
        assert_eq!(
            c.data(),
            &[0.0, 1.0, 10.0, 11.0, 12.0, 13.0, 2.0, 3.0, 14.0, 15.0, 16.0, 17.0]
        );
        let back = concat_backward(&[a.shape().to_vec(), b.shape().to_vec()], 1, &c);
        assert_eq!(back[0], a);
        assert_eq!(back[1], b);
    }
}
