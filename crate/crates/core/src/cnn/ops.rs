//! Forward and backward kernels for the layer types used by the classifier.
//!
//! Activations are `[N, C, H, W]`; convolution weights are `[K, C, kh, kw]`.
//! Every backward function takes the upstream gradient and returns gradients
//! with the shapes of the corresponding forward inputs.

use super::tensor::Tensor;
use super::CnnError;

/// Output positions `o` with `0 <= o * stride + offset < in_len`, clipped to
/// `[0, out_len)`.
#[inline]
fn valid_range(out_len: usize, in_len: usize, offset: isize, stride: usize) -> (usize, usize) {
    let s = stride as isize;
    let lo = if offset >= 0 { 0 } else { ((-offset) + s - 1) / s };
    let hi = (in_len as isize - offset + s - 1) / s;
    let hi = hi.clamp(0, out_len as isize);
    (lo.min(hi) as usize, hi as usize)
}

pub fn conv_output_size(input: usize, kernel: usize, stride: usize, padding: usize) -> Result<usize, CnnError> {
    let padded = input + 2 * padding;
    if stride == 0 || padded < kernel {
        return Err(CnnError::ShapeMismatch(format!(
            "kernel {kernel} (stride {stride}, padding {padding}) does not fit input {input}"
        )));
    }
    Ok((padded - kernel) / stride + 1)
}

pub fn conv2d_forward(x: &Tensor, w: &Tensor, b: &Tensor, stride: usize, padding: usize) -> Result<Tensor, CnnError> {
    let [n, c, h, wd] = x.dims4("conv input")?;
    let [k, wc, kh, kw] = w.dims4("conv weight")?;
    if wc != c {
        return Err(CnnError::ShapeMismatch(format!(
            "conv weight expects {wc} channels, input has {c}"
        )));
    }
    b.expect_shape(&[k], "conv bias")?;
    let oh = conv_output_size(h, kh, stride, padding)?;
    let ow = conv_output_size(wd, kw, stride, padding)?;
    let (xd, wdat) = (x.data(), w.data());
    let mut out = vec![0.0; n * k * oh * ow];
    for ni in 0..n {
        for ki in 0..k {
            let plane = &mut out[(ni * k + ki) * oh * ow..][..oh * ow];
            plane.fill(b.data()[ki]);
            for ci in 0..c {
                let xin = &xd[(ni * c + ci) * h * wd..][..h * wd];
                for i in 0..kh {
                    let (y0, y1) = valid_range(oh, h, i as isize - padding as isize, stride);
                    for j in 0..kw {
                        let wv = wdat[((ki * c + ci) * kh + i) * kw + j];
                        let off = j as isize - padding as isize;
                        let (x0, x1) = valid_range(ow, wd, off, stride);
                        for oy in y0..y1 {
                            let iy = oy * stride + i - padding;
                            let row = &xin[iy * wd..][..wd];
                            let orow = &mut plane[oy * ow..][..ow];
                            for (ox, o) in orow.iter_mut().enumerate().take(x1).skip(x0) {
                                let ix = (ox * stride) as isize + off;
                                *o += wv * row[ix as usize];
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(Tensor::from_parts(vec![n, k, oh, ow], out))
}

/// Returns `(dx, dw, db)`.
pub fn conv2d_backward(
    x: &Tensor,
    w: &Tensor,
    grad_out: &Tensor,
    stride: usize,
    padding: usize,
) -> Result<(Tensor, Tensor, Tensor), CnnError> {
    let [n, c, h, wd] = x.dims4("conv input")?;
    let [k, _, kh, kw] = w.dims4("conv weight")?;
    let [gn, gk, oh, ow] = grad_out.dims4("conv grad")?;
    if gn != n || gk != k {
        return Err(CnnError::ShapeMismatch(
            "conv grad does not match forward shapes".into(),
        ));
    }
    let (xd, wdat, g) = (x.data(), w.data(), grad_out.data());
    let mut dx = vec![0.0; x.len()];
    let mut dw = vec![0.0; w.len()];
    let mut db = vec![0.0; k];
    for ni in 0..n {
        for ki in 0..k {
            let gplane = &g[(ni * k + ki) * oh * ow..][..oh * ow];
            db[ki] += gplane.iter().sum::<f64>();
            for ci in 0..c {
                let base = (ni * c + ci) * h * wd;
                for i in 0..kh {
                    let (y0, y1) = valid_range(oh, h, i as isize - padding as isize, stride);
                    for j in 0..kw {
                        let widx = ((ki * c + ci) * kh + i) * kw + j;
                        let wv = wdat[widx];
                        let off = j as isize - padding as isize;
                        let (x0, x1) = valid_range(ow, wd, off, stride);
                        let mut acc = 0.0;
                        for oy in y0..y1 {
                            let iy = oy * stride + i - padding;
                            let grow = &gplane[oy * ow..][..ow];
                            let rbase = base + iy * wd;
                            for (ox, &g) in grow.iter().enumerate().take(x1).skip(x0) {
                                let ix = ((ox * stride) as isize + off) as usize;
                                acc += g * xd[rbase + ix];
                                dx[rbase + ix] += wv * g;
                            }
                        }
                        dw[widx] += acc;
                    }
                }
            }
        }
    }
    Ok((
        Tensor::from_parts(x.shape().to_vec(), dx),
        Tensor::from_parts(w.shape().to_vec(), dw),
        Tensor::from_parts(vec![k], db),
    ))
}

/// Values saved by a training-mode batch-norm pass.
#[derive(Debug, Clone)]
pub struct BatchNormCache {
    pub normalized: Tensor,
    pub inv_std: Vec<f64>,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

fn channel_check(x: &Tensor, gamma: &Tensor, beta: &Tensor) -> Result<[usize; 4], CnnError> {
    let dims = x.dims4("batch-norm input")?;
    gamma.expect_shape(&[dims[1]], "batch-norm gamma")?;
    beta.expect_shape(&[dims[1]], "batch-norm beta")?;
    Ok(dims)
}

/// Training-mode batch normalisation over `(N, H, W)` per channel, using the
/// biased batch variance.
pub fn batchnorm_forward(
    x: &Tensor,
    gamma: &Tensor,
    beta: &Tensor,
    eps: f64,
) -> Result<(Tensor, BatchNormCache), CnnError> {
    let [n, c, h, w] = channel_check(x, gamma, beta)?;
    let hw = h * w;
    let m = (n * hw) as f64;
    if n * hw < 2 {
        return Err(CnnError::ShapeMismatch(
            "batch-norm needs at least 2 values per channel".into(),
        ));
    }
    let xd = x.data();
    let mut mean = vec![0.0; c];
    let mut var = vec![0.0; c];
    for ci in 0..c {
        let mut s = 0.0;
        for ni in 0..n {
            s += xd[(ni * c + ci) * hw..][..hw].iter().sum::<f64>();
        }
        let mu = s / m;
        let mut v = 0.0;
        for ni in 0..n {
            v += xd[(ni * c + ci) * hw..][..hw]
                .iter()
                .map(|a| (a - mu) * (a - mu))
                .sum::<f64>();
        }
        mean[ci] = mu;
        var[ci] = v / m;
    }
    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
    let mut norm = vec![0.0; xd.len()];
    let mut out = vec![0.0; xd.len()];
    for ni in 0..n {
        for ci in 0..c {
            let (g, bt) = (gamma.data()[ci], beta.data()[ci]);
            let o = (ni * c + ci) * hw;
            for p in o..o + hw {
                let z = (xd[p] - mean[ci]) * inv_std[ci];
                norm[p] = z;
                out[p] = g * z + bt;
            }
        }
    }
    let shape = x.shape().to_vec();
    Ok((
        Tensor::from_parts(shape.clone(), out),
        BatchNormCache {
            normalized: Tensor::from_parts(shape, norm),
            inv_std,
            mean,
            var,
        },
    ))
}

/// Inference-mode batch normalisation with fixed statistics.
pub fn batchnorm_inference(
    x: &Tensor,
    gamma: &Tensor,
    beta: &Tensor,
    mean: &Tensor,
    var: &Tensor,
    eps: f64,
) -> Result<Tensor, CnnError> {
    let [n, c, h, w] = channel_check(x, gamma, beta)?;
    mean.expect_shape(&[c], "running mean")?;
    var.expect_shape(&[c], "running var")?;
    let hw = h * w;
    let mut out = x.data().to_vec();
    for ni in 0..n {
        for ci in 0..c {
            let scale = gamma.data()[ci] / (var.data()[ci] + eps).sqrt();
            let shift = beta.data()[ci] - mean.data()[ci] * scale;
            for v in &mut out[(ni * c + ci) * hw..][..hw] {
                *v = *v * scale + shift;
            }
        }
    }
    Ok(Tensor::from_parts(x.shape().to_vec(), out))
}

/// Returns `(dx, dgamma, dbeta)`.
pub fn batchnorm_backward(
    cache: &BatchNormCache,
    gamma: &Tensor,
    grad_out: &Tensor,
) -> Result<(Tensor, Tensor, Tensor), CnnError> {
    let [n, c, h, w] = cache.normalized.dims4("batch-norm cache")?;
    grad_out.expect_shape(cache.normalized.shape(), "batch-norm grad")?;
    let hw = h * w;
    let m = (n * hw) as f64;
    let (z, g) = (cache.normalized.data(), grad_out.data());
    let mut dgamma = vec![0.0; c];
    let mut dbeta = vec![0.0; c];
    for ni in 0..n {
        for ci in 0..c {
            let o = (ni * c + ci) * hw;
            for p in o..o + hw {
                dgamma[ci] += g[p] * z[p];
                dbeta[ci] += g[p];
            }
        }
    }
    let mut dx = vec![0.0; g.len()];
    for ni in 0..n {
        for ci in 0..c {
            // dxhat = g·γ; Σdxhat = γ·dβ; Σ dxhat·xhat = γ·dγ
            let gm = gamma.data()[ci];
            let k = gm * cache.inv_std[ci] / m;
            let o = (ni * c + ci) * hw;
            for p in o..o + hw {
                dx[p] = k * (m * g[p] - dbeta[ci] - z[p] * dgamma[ci]);
            }
        }
    }
    Ok((
        Tensor::from_parts(grad_out.shape().to_vec(), dx),
        Tensor::from_parts(vec![c], dgamma),
        Tensor::from_parts(vec![c], dbeta),
    ))
}

pub fn relu(x: &Tensor) -> Tensor {
    Tensor::from_parts(x.shape().to_vec(), x.data().iter().map(|&v| v.max(0.0)).collect())
}

pub fn relu_backward(x: &Tensor, grad_out: &Tensor) -> Result<Tensor, CnnError> {
    grad_out.expect_shape(x.shape(), "relu grad")?;
    let dx = x
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&v, &g)| if v > 0.0 { g } else { 0.0 })
        .collect();
    Ok(Tensor::from_parts(x.shape().to_vec(), dx))
}

/// Windowed maximum. Also returns, per output element, the flat input index
/// that supplied the maximum (first occurrence on ties).
pub fn maxpool2d(x: &Tensor, window: usize, stride: usize) -> Result<(Tensor, Vec<usize>), CnnError> {
    let [n, c, h, w] = x.dims4("max-pool input")?;
    if window == 0 || stride == 0 || h < window || w < window {
        return Err(CnnError::ShapeMismatch(format!(
            "pool window {window} (stride {stride}) does not fit {h}x{w}"
        )));
    }
    let oh = (h - window) / stride + 1;
    let ow = (w - window) / stride + 1;
    let xd = x.data();
    let mut out = Vec::with_capacity(n * c * oh * ow);
    let mut arg = Vec::with_capacity(n * c * oh * ow);
    for plane in 0..n * c {
        let base = plane * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = (f64::NEG_INFINITY, 0);
                for dy in 0..window {
                    for dx in 0..window {
                        let idx = base + (oy * stride + dy) * w + ox * stride + dx;
                        if xd[idx] > best.0 {
                            best = (xd[idx], idx);
                        }
                    }
                }
                out.push(best.0);
                arg.push(best.1);
            }
        }
    }
    Ok((Tensor::from_parts(vec![n, c, oh, ow], out), arg))
}

pub fn maxpool2d_backward(input_shape: &[usize], argmax: &[usize], grad_out: &Tensor) -> Result<Tensor, CnnError> {
    if argmax.len() != grad_out.len() {
        return Err(CnnError::ShapeMismatch(
            "max-pool grad does not match cached indices".into(),
        ));
    }
    let mut dx = vec![0.0; input_shape.iter().product()];
    for (&i, &g) in argmax.iter().zip(grad_out.data()) {
        dx[i] += g;
    }
    Ok(Tensor::from_parts(input_shape.to_vec(), dx))
}

/// `x · wᵀ + b` for `x: [N, D]`, `w: [O, D]`, `b: [O]`.
pub fn dense_forward(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor, CnnError> {
    let [n, d] = x.dims2("dense input")?;
    let [o, wd] = w.dims2("dense weight")?;
    if wd != d {
        return Err(CnnError::ShapeMismatch(format!(
            "dense weight expects {wd} inputs, got {d}"
        )));
    }
    b.expect_shape(&[o], "dense bias")?;
    let mut out = Vec::with_capacity(n * o);
    for row in x.data().chunks(d) {
        for (oi, wrow) in w.data().chunks(d).enumerate() {
            out.push(b.data()[oi] + row.iter().zip(wrow).map(|(a, b)| a * b).sum::<f64>());
        }
    }
    Ok(Tensor::from_parts(vec![n, o], out))
}

/// Returns `(dx, dw, db)`.
pub fn dense_backward(x: &Tensor, w: &Tensor, grad_out: &Tensor) -> Result<(Tensor, Tensor, Tensor), CnnError> {
    let [n, d] = x.dims2("dense input")?;
    let [o, _] = w.dims2("dense weight")?;
    grad_out.expect_shape(&[n, o], "dense grad")?;
    let mut dx = vec![0.0; n * d];
    let mut dw = vec![0.0; o * d];
    let mut db = vec![0.0; o];
    for ni in 0..n {
        let xrow = &x.data()[ni * d..][..d];
        for oi in 0..o {
            let g = grad_out.data()[ni * o + oi];
            db[oi] += g;
            let wrow = &w.data()[oi * d..][..d];
            for di in 0..d {
                dw[oi * d + di] += g * xrow[di];
                dx[ni * d + di] += g * wrow[di];
            }
        }
    }
    Ok((
        Tensor::from_parts(vec![n, d], dx),
        Tensor::from_parts(vec![o, d], dw),
        Tensor::from_parts(vec![o], db),
    ))
}

/// Row-wise softmax with max subtraction.
pub fn softmax(logits: &Tensor) -> Result<Tensor, CnnError> {
    let [_, k] = logits.dims2("logits")?;
    let mut out = Vec::with_capacity(logits.len());
    for row in logits.data().chunks(k) {
        let mx = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = row.iter().map(|v| (v - mx).exp()).collect();
        let s: f64 = exps.iter().sum();
        out.extend(exps.iter().map(|e| e / s));
    }
    Ok(Tensor::from_parts(logits.shape().to_vec(), out))
}

/// Class probabilities from a dense layer followed by softmax.
pub fn dense_softmax(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor, CnnError> {
    softmax(&dense_forward(x, w, b)?)
}

/// Mean cross-entropy of `softmax(logits)` against integer targets. Returns
/// the loss, the probabilities and the gradient with respect to the logits.
pub fn softmax_cross_entropy(logits: &Tensor, targets: &[usize]) -> Result<(f64, Tensor, Tensor), CnnError> {
    let [n, k] = logits.dims2("logits")?;
    if targets.len() != n || targets.iter().any(|&t| t >= k) {
        return Err(CnnError::ShapeMismatch("targets do not match logits".into()));
    }
    let probs = softmax(logits)?;
    let mut loss = 0.0;
    let mut grad = probs.data().to_vec();
    for (ni, &t) in targets.iter().enumerate() {
        loss -= probs.data()[ni * k + t].max(f64::MIN_POSITIVE).ln();
        grad[ni * k + t] -= 1.0;
    }
    let inv = 1.0 / n as f64;
    grad.iter_mut().for_each(|g| *g *= inv);
    Ok((loss * inv, probs, Tensor::from_parts(vec![n, k], grad)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
        Tensor::from_fn(shape, |_| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn valid_range_cases() {
        assert_eq!(valid_range(4, 4, 0, 1), (0, 4));
        assert_eq!(valid_range(4, 4, -1, 1), (1, 4));
        assert_eq!(valid_range(4, 4, 1, 1), (0, 3));
        assert_eq!(valid_range(3, 5, -1, 2), (1, 3));
    }

    #[test]
    fn conv_identity_and_bias() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random(&[2, 1, 5, 4], &mut rng);
        let w = Tensor::filled(&[1, 1, 1, 1], 1.0);
        let y = conv2d_forward(&x, &w, &Tensor::zeros(&[1]), 1, 0).unwrap();
        assert_eq!(y, x);

        let w = random(&[3, 2, 3, 3], &mut rng);
        let b = Tensor::new(vec![3], vec![0.5, -1.0, 2.0]).unwrap();
        let y = conv2d_forward(&Tensor::zeros(&[1, 2, 6, 6]), &w, &b, 1, 1).unwrap();
        assert_eq!(y.shape(), &[1, 3, 6, 6]);
        for (i, v) in y.data().iter().enumerate() {
            assert_eq!(*v, b.data()[i / 36]);
        }
    }

    #[test]
    fn conv_window_sums_match_direct_loops() {
        let x = Tensor::from_fn(&[1, 1, 4, 4], |i| i as f64);
        let y = conv2d_forward(&x, &Tensor::filled(&[1, 1, 3, 3], 1.0), &Tensor::zeros(&[1]), 1, 0).unwrap();
        assert_eq!(y.shape(), &[1, 1, 2, 2]);
        assert_eq!(y.data(), &[45.0, 54.0, 81.0, 90.0]);

        // general case against a direct loop with explicit zero padding
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (n, c, h, w, k, kh, kw, s, p) = (2, 3, 7, 6, 4, 3, 2, 2, 1);
        let x = random(&[n, c, h, w], &mut rng);
        let wt = random(&[k, c, kh, kw], &mut rng);
        let b = random(&[k], &mut rng);
        let y = conv2d_forward(&x, &wt, &b, s, p).unwrap();
        let (oh, ow) = ((h + 2 * p - kh) / s + 1, (w + 2 * p - kw) / s + 1);
        assert_eq!(y.shape(), &[n, k, oh, ow]);
        for ni in 0..n {
            for ki in 0..k {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut acc = b.data()[ki];
                        for ci in 0..c {
                            for i in 0..kh {
                                for j in 0..kw {
                                    let iy = (oy * s + i) as isize - p as isize;
                                    let ix = (ox * s + j) as isize - p as isize;
                                    if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < w {
                                        acc += wt.data()[((ki * c + ci) * kh + i) * kw + j]
                                            * x.data()[((ni * c + ci) * h + iy as usize) * w + ix as usize];
                                    }
                                }
                            }
                        }
                        let got = y.data()[((ni * k + ki) * oh + oy) * ow + ox];
                        assert!((got - acc).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn conv_shape_errors() {
        let x = Tensor::zeros(&[1, 2, 4, 4]);
        let w = Tensor::zeros(&[1, 3, 3, 3]);
        assert!(matches!(
            conv2d_forward(&x, &w, &Tensor::zeros(&[1]), 1, 0),
            Err(CnnError::ShapeMismatch(_))
        ));
        let w = Tensor::zeros(&[1, 2, 5, 5]);
        assert!(conv2d_forward(&x, &w, &Tensor::zeros(&[1]), 1, 0).is_err());
    }

    #[test]
    fn batchnorm_standardizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = Tensor::from_fn(&[4, 3, 5, 5], |_| rng.random_range(-3.0..7.0));
        let eps = 1e-5;
        let (y, cache) = batchnorm_forward(&x, &Tensor::filled(&[3], 1.0), &Tensor::zeros(&[3]), eps).unwrap();
        for ci in 0..3 {
            let vals: Vec<f64> = (0..4)
                .flat_map(|n| y.data()[(n * 3 + ci) * 25..][..25].to_vec())
                .collect();
            let m = vals.iter().sum::<f64>() / vals.len() as f64;
            let v = vals.iter().map(|a| (a - m).powi(2)).sum::<f64>() / vals.len() as f64;
            assert!(m.abs() <= 1e-9);
            let expected = cache.var[ci] / (cache.var[ci] + eps);
            assert!((v - expected).abs() <= 1e-6);
        }

        let (y, _) = batchnorm_forward(
            &x,
            &Tensor::zeros(&[3]),
            &Tensor::new(vec![3], vec![1.0, 2.0, 3.0]).unwrap(),
            eps,
        )
        .unwrap();
        for (i, v) in y.data().iter().enumerate() {
            assert_eq!(*v, [1.0, 2.0, 3.0][(i / 25) % 3]);
        }
    }

    #[test]
    fn batchnorm_affine_matches_direct_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random(&[3, 2, 4, 4], &mut rng);
        let eps = 1e-5;
        let (y, _) = batchnorm_forward(&x, &Tensor::filled(&[2], 2.0), &Tensor::filled(&[2], 1.0), eps).unwrap();
        for ci in 0..2 {
            let idx: Vec<usize> = (0..3)
                .flat_map(|n| ((n * 2 + ci) * 16)..((n * 2 + ci) * 16 + 16))
                .collect();
            let m = idx.iter().map(|&i| x.data()[i]).sum::<f64>() / 48.0;
            let v = idx.iter().map(|&i| (x.data()[i] - m).powi(2)).sum::<f64>() / 48.0;
            for &i in &idx {
                let want = 2.0 * (x.data()[i] - m) / (v + eps).sqrt() + 1.0;
                assert!((y.data()[i] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn relu_cases() {
        let x = Tensor::new(vec![3], vec![-1.0, 0.0, 2.0]).unwrap();
        assert_eq!(relu(&x).data(), &[0.0, 0.0, 2.0]);
        assert!(relu(&Tensor::filled(&[4], -2.0)).data().iter().all(|&v| v == 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random(&[2, 3, 4], &mut rng);
        assert_eq!(relu(&relu(&x)), relu(&x));
    }

    #[test]
    fn maxpool_cases() {
        let x = Tensor::new(vec![1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(maxpool2d(&x, 2, 2).unwrap().0.data(), &[4.0]);
        let (y, _) = maxpool2d(&Tensor::filled(&[1, 2, 4, 4], 0.3), 2, 2).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.3));

        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = random(&[1, 1, 8, 8], &mut rng);
        let (y, _) = maxpool2d(&x, 2, 2).unwrap();
        for oy in 0..4 {
            for ox in 0..4 {
                let mut m = f64::NEG_INFINITY;
                for dy in 0..2 {
                    for dx in 0..2 {
                        m = m.max(x.data()[(2 * oy + dy) * 8 + 2 * ox + dx]);
                    }
                }
                assert_eq!(y.data()[oy * 4 + ox], m);
            }
        }
        assert!(maxpool2d(&Tensor::zeros(&[1, 1, 1, 3]), 2, 2).is_err());
    }

    #[test]
    fn softmax_properties() {
        let z = Tensor::zeros(&[1, 2]);
        assert_eq!(softmax(&z).unwrap().data(), &[0.5, 0.5]);

        let p = softmax(&Tensor::new(vec![1, 2], vec![2.0, -1.0]).unwrap()).unwrap();
        let e3 = 3f64.exp();
        assert!((p.data()[0] - e3 / (e3 + 1.0)).abs() < 1e-15);
        assert!((p.data()[1] - 1.0 / (e3 + 1.0)).abs() < 1e-15);

        let base = softmax(&Tensor::new(vec![1, 2], vec![1.5, 0.0]).unwrap()).unwrap();
        for t in [-300.0, -1.0, 0.0, 7.0, 500.0] {
            let s = softmax(&Tensor::new(vec![1, 2], vec![1.5 + t, t]).unwrap()).unwrap();
            for (a, b) in s.data().iter().zip(base.data()) {
                assert!((a - b).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn dense_softmax_shapes() {
        let x = Tensor::zeros(&[3, 4]);
        let p = dense_softmax(&x, &Tensor::zeros(&[2, 4]), &Tensor::zeros(&[2])).unwrap();
        assert_eq!(p.shape(), &[3, 2]);
        assert!(dense_softmax(&x, &Tensor::zeros(&[2, 5]), &Tensor::zeros(&[2])).is_err());
    }

    #[test]
    fn perfect_prediction_has_no_gradient() {
        let logits = Tensor::new(vec![1, 2], vec![0.0, 800.0]).unwrap();
        let (loss, _, g) = softmax_cross_entropy(&logits, &[1]).unwrap();
        assert_eq!(loss, 0.0);
        assert!(g.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dense_gradient_closed_form() {
        // single sample: dW = (p - y) xᵀ, db = p - y
        let x = Tensor::new(vec![1, 3], vec![0.5, -1.0, 2.0]).unwrap();
        let w = Tensor::new(vec![2, 3], vec![0.1, 0.2, -0.3, 0.0, 0.4, 0.1]).unwrap();
        let b = Tensor::new(vec![2], vec![0.05, -0.05]).unwrap();
        let logits = dense_forward(&x, &w, &b).unwrap();
        let (_, p, g) = softmax_cross_entropy(&logits, &[0]).unwrap();
        let (_, dw, db) = dense_backward(&x, &w, &g).unwrap();
        let err = [p.data()[0] - 1.0, p.data()[1]];
        for (o, e) in err.iter().enumerate() {
            assert!((db.data()[o] - e).abs() < 1e-15);
            for d in 0..3 {
                assert!((dw.data()[o * 3 + d] - e * x.data()[d]).abs() < 1e-15);
            }
        }
    }
}
