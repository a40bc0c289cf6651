//! Neural layer primitives with manual backpropagation: 2-D convolution
//! (cross-correlation, stride 1), 2x2 max pooling, ReLU, fully connected,
//! and fused softmax cross-entropy.
//!
//! Convolutions lower to per-sample im2col plus a gemm call; the backward
//! passes are expressed as gemms against the cached column matrices.

use super::precision::Scalar;
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Spatial padding policy for convolutions (stride is always 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    /// No padding; output spatial dims shrink by K-1.
    Valid,
    /// Zero padding of K/2; output spatial dims equal input dims.
    Same,
}

impl Padding {
    fn pad(self, k: usize) -> usize {
        match self {
            Padding::Valid => 0,
            Padding::Same => k / 2,
        }
    }

    fn out_dim(self, input: usize, k: usize) -> usize {
        match self {
            Padding::Valid => input + 1 - k,
            Padding::Same => input,
        }
    }
}

// gemm wrappers over contiguous row-major slices

fn mm_nn<T: Scalar>(m: usize, k: usize, n: usize, a: &[T], b: &[T], beta: T, c: &mut [T]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    unsafe {
        T::gemm(
            m, k, n, T::ONE,
            a.as_ptr(), k as isize, 1,
            b.as_ptr(), n as isize, 1,
            beta,
            c.as_mut_ptr(), n as isize, 1,
        );
    }
}

/// a(k x m, used transposed) * b(k x n)
fn mm_tn<T: Scalar>(m: usize, k: usize, n: usize, a: &[T], b: &[T], beta: T, c: &mut [T]) {
    debug_assert_eq!(a.len(), k * m);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    unsafe {
        T::gemm(
            m, k, n, T::ONE,
            a.as_ptr(), 1, m as isize,
            b.as_ptr(), n as isize, 1,
            beta,
            c.as_mut_ptr(), n as isize, 1,
        );
    }
}

/// a(m x k) * b(n x k, used transposed)
fn mm_nt<T: Scalar>(m: usize, k: usize, n: usize, a: &[T], b: &[T], beta: T, c: &mut [T]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    debug_assert_eq!(c.len(), m * n);
    unsafe {
        T::gemm(
            m, k, n, T::ONE,
            a.as_ptr(), k as isize, 1,
            b.as_ptr(), 1, k as isize,
            beta,
            c.as_mut_ptr(), n as isize, 1,
        );
    }
}

fn im2col<T: Scalar>(
    sample: &[T],
    cin: usize,
    h: usize,
    w: usize,
    k: usize,
    pad: usize,
    oh: usize,
    ow: usize,
    col: &mut [T],
) {
    debug_assert_eq!(col.len(), cin * k * k * oh * ow);
    for c in 0..cin {
        let plane = &sample[c * h * w..(c + 1) * h * w];
        for ki in 0..k {
            for kj in 0..k {
                let row = ((c * k + ki) * k + kj) * oh * ow;
                for out_i in 0..oh {
                    let in_i = (out_i + ki) as isize - pad as isize;
                    let dst = &mut col[row + out_i * ow..row + (out_i + 1) * ow];
                    if in_i < 0 || in_i >= h as isize {
                        dst.fill(T::ZERO);
                        continue;
                    }
                    let src_row = &plane[in_i as usize * w..(in_i as usize + 1) * w];
                    for (out_j, d) in dst.iter_mut().enumerate() {
                        let in_j = (out_j + kj) as isize - pad as isize;
                        *d = if in_j < 0 || in_j >= w as isize {
                            T::ZERO
                        } else {
                            src_row[in_j as usize]
                        };
                    }
                }
            }
        }
    }
}

fn col2im<T: Scalar>(
    col: &[T],
    cin: usize,
    h: usize,
    w: usize,
    k: usize,
    pad: usize,
    oh: usize,
    ow: usize,
    sample: &mut [T],
) {
    for c in 0..cin {
        let plane = &mut sample[c * h * w..(c + 1) * h * w];
        for ki in 0..k {
            for kj in 0..k {
                let row = ((c * k + ki) * k + kj) * oh * ow;
                for out_i in 0..oh {
                    let in_i = (out_i + ki) as isize - pad as isize;
                    if in_i < 0 || in_i >= h as isize {
                        continue;
                    }
                    let src = &col[row + out_i * ow..row + (out_i + 1) * ow];
                    let dst_row = &mut plane[in_i as usize * w..(in_i as usize + 1) * w];
                    for (out_j, &s) in src.iter().enumerate() {
                        let in_j = (out_j + kj) as isize - pad as isize;
                        if in_j >= 0 && (in_j as usize) < w {
                            dst_row[in_j as usize] += s;
                        }
                    }
                }
            }
        }
    }
}

fn conv_shapes<T: Scalar>(
    input: &Tensor<T>,
    kernels: &Tensor<T>,
    bias: &Tensor<T>,
    padding: Padding,
) -> Result<(usize, usize, usize, usize, usize, usize, usize, usize)> {
    if input.rank() != 4 || kernels.rank() != 4 {
        return Err(Error::Argument(format!(
            "conv2d: expected NCHW input and OIKK kernels, got {:?} and {:?}",
            input.shape(),
            kernels.shape()
        )));
    }
    let (n, cin, h, w) = (input.dim(0), input.dim(1), input.dim(2), input.dim(3));
    let (cout, kin, k, k2) = (
        kernels.dim(0),
        kernels.dim(1),
        kernels.dim(2),
        kernels.dim(3),
    );
    if k != k2 || k % 2 == 0 {
        return Err(Error::Argument(format!(
            "conv2d: kernel must be square with odd size, got {k}x{k2}"
        )));
    }
    if kin != cin {
        return Err(Error::dimension("conv2d", input.shape(), kernels.shape()));
    }
    if bias.shape() != [cout] {
        return Err(Error::dimension("conv2d bias", bias.shape(), &[cout]));
    }
    if padding == Padding::Valid && (h < k || w < k) {
        return Err(Error::Argument(format!(
            "conv2d: {h}x{w} input too small for {k}x{k} valid convolution"
        )));
    }
    let oh = padding.out_dim(h, k);
    let ow = padding.out_dim(w, k);
    Ok((n, cin, h, w, cout, k, oh, ow))
}

/// Cross-correlation of an NCHW batch with OIKK kernels, stride 1.
pub fn conv2d_forward<T: Scalar>(
    input: &Tensor<T>,
    kernels: &Tensor<T>,
    bias: &Tensor<T>,
    padding: Padding,
) -> Result<Tensor<T>> {
    Ok(conv2d_forward_cached(input, kernels, bias, padding)?.0)
}

/// Forward pass that also returns the per-sample column matrices
/// (shape  N x (C*K*K) x (OH*OW)) for reuse in the backward pass.
pub fn conv2d_forward_cached<T: Scalar>(
    input: &Tensor<T>,
    kernels: &Tensor<T>,
    bias: &Tensor<T>,
    padding: Padding,
) -> Result<(Tensor<T>, Tensor<T>)> {
    let (n, cin, h, w, cout, k, oh, ow) = conv_shapes(input, kernels, bias, padding)?;
    let pad = padding.pad(k);
    let ckk = cin * k * k;
    let spatial = oh * ow;

    let mut out = Tensor::zeros(vec![n, cout, oh, ow]);
    let mut col = Tensor::zeros(vec![n, ckk, spatial]);
    let kern = kernels.as_slice();
    for s in 0..n {
        let col_s = &mut col.as_mut_slice()[s * ckk * spatial..(s + 1) * ckk * spatial];
        im2col(
            &input.as_slice()[s * cin * h * w..(s + 1) * cin * h * w],
            cin, h, w, k, pad, oh, ow, col_s,
        );
        let out_s = &mut out.as_mut_slice()[s * cout * spatial..(s + 1) * cout * spatial];
        mm_nn(cout, ckk, spatial, kern, col_s, T::ZERO, out_s);
        for o in 0..cout {
            let b = bias.as_slice()[o];
            for v in &mut out_s[o * spatial..(o + 1) * spatial] {
                *v += b;
            }
        }
    }
    Ok((out, col))
}

/// Gradients of a cached convolution: (d_input, d_kernels, d_bias).
pub fn conv2d_backward<T: Scalar>(
    input_shape: &[usize],
    kernels: &Tensor<T>,
    col: &Tensor<T>,
    d_out: &Tensor<T>,
    padding: Padding,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let (n, cin, h, w) = (
        input_shape[0],
        input_shape[1],
        input_shape[2],
        input_shape[3],
    );
    let (cout, k) = (kernels.dim(0), kernels.dim(2));
    let pad = padding.pad(k);
    let (oh, ow) = (padding.out_dim(h, k), padding.out_dim(w, k));
    let ckk = cin * k * k;
    let spatial = oh * ow;
    if d_out.shape() != [n, cout, oh, ow] {
        return Err(Error::dimension(
            "conv2d_backward",
            d_out.shape(),
            &[n, cout, oh, ow],
        ));
    }

    let mut d_input = Tensor::zeros(input_shape.to_vec());
    let mut d_kernels = Tensor::zeros(kernels.shape().to_vec());
    let mut d_bias = Tensor::zeros(vec![cout]);
    let mut d_col = vec![T::ZERO; ckk * spatial];

    for s in 0..n {
        let d_out_s = &d_out.as_slice()[s * cout * spatial..(s + 1) * cout * spatial];
        let col_s = &col.as_slice()[s * ckk * spatial..(s + 1) * ckk * spatial];

        // d_kernels[o, r] += sum_hw d_out[o, hw] * col[r, hw]
        mm_nt(
            cout, spatial, ckk,
            d_out_s, col_s,
            if s == 0 { T::ZERO } else { T::ONE },
            d_kernels.as_mut_slice(),
        );
        // d_col[r, hw] = sum_o kernels[o, r] * d_out[o, hw]
        mm_tn(ckk, cout, spatial, kernels.as_slice(), d_out_s, T::ZERO, &mut d_col);
        col2im(
            &d_col,
            cin, h, w, k, pad, oh, ow,
            &mut d_input.as_mut_slice()[s * cin * h * w..(s + 1) * cin * h * w],
        );
        for o in 0..cout {
            let mut acc = T::ZERO;
            for &v in &d_out_s[o * spatial..(o + 1) * spatial] {
                acc += v;
            }
            d_bias.as_mut_slice()[o] += acc;
        }
    }
    Ok((d_input, d_kernels, d_bias))
}

/// 2x2 non-overlapping max pooling. Returns the pooled tensor and the flat
/// input offset of every selected maximum so gradients route exactly.
pub fn maxpool2_forward<T: Scalar>(input: &Tensor<T>) -> Result<(Tensor<T>, Vec<u32>)> {
    if input.rank() != 4 {
        return Err(Error::Argument(format!(
            "maxpool2: expected NCHW input, got {:?}",
            input.shape()
        )));
    }
    let (n, c, h, w) = (input.dim(0), input.dim(1), input.dim(2), input.dim(3));
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::dimension("maxpool2", input.shape(), &[n, c, h / 2 * 2, w / 2 * 2]));
    }
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Tensor::zeros(vec![n, c, oh, ow]);
    let mut indices = vec![0u32; n * c * oh * ow];
    let data = input.as_slice();
    let out_data = out.as_mut_slice();
    for plane in 0..n * c {
        let base = plane * h * w;
        for i in 0..oh {
            for j in 0..ow {
                let p = base + (2 * i) * w + 2 * j;
                let candidates = [p, p + 1, p + w, p + w + 1];
                let mut best = candidates[0];
                for &q in &candidates[1..] {
                    if data[q] > data[best] {
                        best = q;
                    }
                }
                let out_idx = plane * oh * ow + i * ow + j;
                out_data[out_idx] = data[best];
                indices[out_idx] = best as u32;
            }
        }
    }
    Ok((out, indices))
}

/// Routes pooled gradients back to the stored argmax positions.
pub fn maxpool2_backward<T: Scalar>(
    input_shape: &[usize],
    indices: &[u32],
    d_out: &Tensor<T>,
) -> Tensor<T> {
    let mut d_input = Tensor::zeros(input_shape.to_vec());
    let d = d_input.as_mut_slice();
    for (&idx, &g) in indices.iter().zip(d_out.as_slice()) {
        d[idx as usize] += g;
    }
    d_input
}

pub fn relu_forward<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| if v > T::ZERO { v } else { T::ZERO })
}

/// Subgradient at 0 is 0: gradient flows only where the pre-activation is
/// strictly positive.
pub fn relu_backward<T: Scalar>(pre: &Tensor<T>, d_out: &Tensor<T>) -> Tensor<T> {
    debug_assert_eq!(pre.shape(), d_out.shape());
    let mut d = d_out.clone();
    for (g, &p) in d.as_mut_slice().iter_mut().zip(pre.as_slice()) {
        if p <= T::ZERO {
            *g = T::ZERO;
        }
    }
    d
}

/// x(B x I) * w(I x O) + b(O)
pub fn linear_forward<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    b: &Tensor<T>,
) -> Result<Tensor<T>> {
    if x.rank() != 2 || x.dim(1) != w.dim(0) {
        return Err(Error::dimension("linear", x.shape(), w.shape()));
    }
    let (batch, i, o) = (x.dim(0), w.dim(0), w.dim(1));
    let mut out = Tensor::zeros(vec![batch, o]);
    mm_nn(batch, i, o, x.as_slice(), w.as_slice(), T::ZERO, out.as_mut_slice());
    for r in 0..batch {
        let row = &mut out.as_mut_slice()[r * o..(r + 1) * o];
        for (v, &bv) in row.iter_mut().zip(b.as_slice()) {
            *v += bv;
        }
    }
    Ok(out)
}

/// Gradients of `linear_forward`: (d_x, d_w, d_b).
pub fn linear_backward<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    d_out: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let (batch, i, o) = (x.dim(0), w.dim(0), w.dim(1));
    if d_out.shape() != [batch, o] {
        return Err(Error::dimension("linear_backward", d_out.shape(), &[batch, o]));
    }
    let mut d_x = Tensor::zeros(vec![batch, i]);
    let mut d_w = Tensor::zeros(vec![i, o]);
    let mut d_b = Tensor::zeros(vec![o]);
    mm_nt(batch, o, i, d_out.as_slice(), w.as_slice(), T::ZERO, d_x.as_mut_slice());
    mm_tn(i, batch, o, x.as_slice(), d_out.as_slice(), T::ZERO, d_w.as_mut_slice());
    for r in 0..batch {
        for (db, &g) in d_b
            .as_mut_slice()
            .iter_mut()
            .zip(&d_out.as_slice()[r * o..(r + 1) * o])
        {
            *db += g;
        }
    }
    Ok((d_x, d_w, d_b))
}

/// Numerically stable row softmax.
pub fn row_softmax<T: Scalar>(logits: &Tensor<T>) -> Tensor<T> {
    debug_assert_eq!(logits.rank(), 2);
    let (rows, cols) = (logits.dim(0), logits.dim(1));
    let mut out = logits.clone();
    for r in 0..rows {
        let row = &mut out.as_mut_slice()[r * cols..(r + 1) * cols];
        let mut max = row[0];
        for &v in row.iter() {
            if v > max {
                max = v;
            }
        }
        let mut sum = T::ZERO;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// Mean cross-entropy over the batch and its gradient w.r.t. the logits:
/// `d = (softmax - onehot) / B`.
pub fn softmax_cross_entropy<T: Scalar>(
    logits: &Tensor<T>,
    labels: &[usize],
) -> Result<(f64, Tensor<T>)> {
    if logits.rank() != 2 || logits.dim(0) != labels.len() {
        return Err(Error::dimension(
            "softmax_cross_entropy",
            logits.shape(),
            &[labels.len(), logits.rank().max(1)],
        ));
    }
    let (batch, classes) = (logits.dim(0), logits.dim(1));
    for (r, &l) in labels.iter().enumerate() {
        if l >= classes {
            return Err(Error::Index(format!(
                "label {l} at row {r} outside [0, {classes})"
            )));
        }
    }
    let mut d = row_softmax(logits);
    let inv_b = T::from_f64(1.0 / batch as f64);
    let mut loss = 0.0;
    for (r, &label) in labels.iter().enumerate() {
        let row = &mut d.as_mut_slice()[r * classes..(r + 1) * classes];
        let p = row[label].to_f64();
        loss -= p.max(f64::MIN_POSITIVE).ln();
        row[label] -= T::ONE;
        for v in row.iter_mut() {
            *v *= inv_b;
        }
    }
    Ok((loss / batch as f64, d))
}

/// Index of the row maximum; ties break toward the lowest index.
pub fn argmax_row<T: Scalar>(row: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::seeded_rng;

    fn naive_conv(
        input: &Tensor<f64>,
        kernels: &Tensor<f64>,
        bias: &Tensor<f64>,
        padding: Padding,
    ) -> Tensor<f64> {
        let (n, cin, h, w) = (input.dim(0), input.dim(1), input.dim(2), input.dim(3));
        let (cout, k) = (kernels.dim(0), kernels.dim(2));
        let pad = padding.pad(k) as isize;
        let (oh, ow) = (padding.out_dim(h, k), padding.out_dim(w, k));
        let mut out = Tensor::zeros(vec![n, cout, oh, ow]);
        for s in 0..n {
            for o in 0..cout {
                for i in 0..oh {
                    for j in 0..ow {
                        let mut acc = bias.as_slice()[o];
                        for c in 0..cin {
                            for ki in 0..k {
                                for kj in 0..k {
                                    let ii = i as isize + ki as isize - pad;
                                    let jj = j as isize + kj as isize - pad;
                                    if ii < 0 || jj < 0 || ii >= h as isize || jj >= w as isize {
                                        continue;
                                    }
                                    let x = input.as_slice()
                                        [((s * cin + c) * h + ii as usize) * w + jj as usize];
                                    let kv = kernels.as_slice()
                                        [((o * cin + c) * k + ki) * k + kj];
                                    acc += x * kv;
                                }
                            }
                        }
                        out.as_mut_slice()[((s * cout + o) * oh + i) * ow + j] = acc;
                    }
                }
            }
        }
        out
    }

    #[test]
    fn unit_kernel_is_identity() {
        let mut rng = seeded_rng(11);
        let input = Tensor::<f64>::random_uniform(vec![2, 1, 6, 6], -1.0, 1.0, &mut rng);
        let kernels = Tensor::new(vec![1, 1, 1, 1], vec![1.0]).unwrap();
        let bias = Tensor::zeros(vec![1]);
        let out = conv2d_forward(&input, &kernels, &bias, Padding::Same).unwrap();
        assert_eq!(out.as_slice(), input.as_slice());
    }

    #[test]
    fn constant_field_all_ones_kernel() {
        let c = 0.37;
        let input = Tensor::<f64>::filled(vec![1, 1, 5, 5], c);
        let kernels = Tensor::<f64>::filled(vec![1, 1, 3, 3], 1.0);
        let bias = Tensor::zeros(vec![1]);
        let out = conv2d_forward(&input, &kernels, &bias, Padding::Valid).unwrap();
        assert_eq!(out.shape(), &[1, 1, 3, 3]);
        for &v in out.as_slice() {
            assert!((v - 9.0 * c).abs() < 1e-12);
        }
    }

    #[test]
    fn conv_matches_direct_loop_oracle() {
        let mut rng = seeded_rng(12);
        let input = Tensor::<f64>::random_uniform(vec![1, 1, 8, 8], -1.0, 1.0, &mut rng);
        let kernels = Tensor::<f64>::random_uniform(vec![2, 1, 3, 3], -1.0, 1.0, &mut rng);
        let bias = Tensor::<f64>::random_uniform(vec![2], -0.5, 0.5, &mut rng);
        for padding in [Padding::Valid, Padding::Same] {
            let fast = conv2d_forward(&input, &kernels, &bias, padding).unwrap();
            let slow = naive_conv(&input, &kernels, &bias, padding);
            assert!(fast.max_abs_diff(&slow) < 1e-12, "{padding:?}");
        }
    }

    #[test]
    fn conv_channel_mismatch_errors() {
        let input = Tensor::<f64>::zeros(vec![1, 2, 4, 4]);
        let kernels = Tensor::<f64>::zeros(vec![3, 1, 3, 3]);
        let bias = Tensor::<f64>::zeros(vec![3]);
        assert!(conv2d_forward(&input, &kernels, &bias, Padding::Same).is_err());
    }

    #[test]
    fn maxpool_constant_and_ordered() {
        let c = Tensor::<f64>::filled(vec![1, 1, 4, 4], 2.5);
        let (out, _) = maxpool2_forward(&c).unwrap();
        assert!(out.as_slice().iter().all(|&v| v == 2.5));

        let raster = Tensor::<f64>::from_fn(vec![1, 1, 4, 4], |i| i as f64);
        let (out, idx) = maxpool2_forward(&raster).unwrap();
        // strictly increasing raster: max sits bottom-right of each window
        assert_eq!(out.as_slice(), &[5.0, 7.0, 13.0, 15.0]);
        assert_eq!(idx, vec![5, 7, 13, 15]);
    }

    #[test]
    fn maxpool_matches_windowed_max_oracle_and_odd_dims_error() {
        let mut rng = seeded_rng(13);
        let input = Tensor::<f64>::random_uniform(vec![2, 3, 6, 4], -1.0, 1.0, &mut rng);
        let (out, _) = maxpool2_forward(&input).unwrap();
        for s in 0..2 {
            for ch in 0..3 {
                for i in 0..3 {
                    for j in 0..2 {
                        let mut m = f64::NEG_INFINITY;
                        for di in 0..2 {
                            for dj in 0..2 {
                                m = m.max(
                                    input.as_slice()
                                        [((s * 3 + ch) * 6 + 2 * i + di) * 4 + 2 * j + dj],
                                );
                            }
                        }
                        assert_eq!(out.as_slice()[((s * 3 + ch) * 3 + i) * 2 + j], m);
                    }
                }
            }
        }
        assert!(maxpool2_forward(&Tensor::<f64>::zeros(vec![1, 1, 5, 4])).is_err());
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut rng = seeded_rng(14);
        let logits = Tensor::<f64>::random_uniform(vec![6, 9], -30.0, 30.0, &mut rng);
        let p = row_softmax(&logits);
        for r in 0..6 {
            let s: f64 = p.row(r).iter().sum();
            assert!((s - 1.0).abs() < 1e-9);
            assert!(p.row(r).iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn uniform_logits_loss_is_ln_c() {
        let logits = Tensor::<f64>::filled(vec![3, 10], 0.4);
        let (loss, _) = softmax_cross_entropy(&logits, &[0, 5, 9]).unwrap();
        assert!((loss - (10.0f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn saturated_logits_loss_vanishes() {
        let mut logits = Tensor::<f64>::zeros(vec![1, 10]);
        logits.as_mut_slice()[3] = 30.0;
        let (loss, _) = softmax_cross_entropy(&logits, &[3]).unwrap();
        assert!(loss < 1e-9);
    }

    #[test]
    fn cross_entropy_label_out_of_range() {
        let logits = Tensor::<f64>::zeros(vec![2, 4]);
        assert!(matches!(
            softmax_cross_entropy(&logits, &[1, 4]),
            Err(crate::Error::Index(_))
        ));
    }

    #[test]
    fn argmax_ties_break_low() {
        assert_eq!(argmax_row(&[1.0, 1.0, 1.0]), 0);
        assert_eq!(argmax_row(&[0.0, 2.0, 2.0]), 1);
    }
}
