//! Analytic gradients against central finite differences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use roadcrack_core::cnn::{ops, ArchConfig, Network};
use roadcrack_core::Tensor;

const H: f64 = 1e-5;
const TOL: f64 = 1e-4;

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::from_fn(shape, |_| rng.sample(StandardNormal))
}

fn dot(a: &Tensor, b: &Tensor) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

/// Compares `analytic` with the central difference of `loss` in every
/// coordinate of `x`.
fn check(name: &str, x: &Tensor, analytic: &Tensor, loss: impl Fn(&Tensor) -> f64) {
    assert_eq!(x.shape(), analytic.shape(), "{name}");
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        let mut plus = x.clone();
        plus.data_mut()[i] += H;
        let mut minus = x.clone();
        minus.data_mut()[i] -= H;
        let numeric = (loss(&plus) - loss(&minus)) / (2.0 * H);
        worst = worst.max(rel_err(analytic.data()[i], numeric));
    }
    assert!(worst <= TOL, "{name}: worst relative error {worst:e}");
}

#[test]
fn conv() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for (stride, padding) in [(1, 1), (2, 0), (1, 0)] {
        let x = random(&[2, 3, 6, 5], &mut rng);
        let w = random(&[4, 3, 3, 3], &mut rng);
        let b = random(&[4], &mut rng);
        let y = ops::conv2d_forward(&x, &w, &b, stride, padding).unwrap();
        let r = random(y.shape(), &mut rng);
        let (dx, dw, db) = ops::conv2d_backward(&x, &w, &r, stride, padding).unwrap();
        let f = |x: &Tensor, w: &Tensor, b: &Tensor| dot(&r, &ops::conv2d_forward(x, w, b, stride, padding).unwrap());
        check("conv dx", &x, &dx, |t| f(t, &w, &b));
        check("conv dw", &w, &dw, |t| f(&x, t, &b));
        check("conv db", &b, &db, |t| f(&x, &w, t));
    }
}

#[test]
fn batchnorm() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = random(&[3, 2, 4, 3], &mut rng);
    let gamma = random(&[2], &mut rng);
    let beta = random(&[2], &mut rng);
    let (y, cache) = ops::batchnorm_forward(&x, &gamma, &beta, 1e-5).unwrap();
    let r = random(y.shape(), &mut rng);
    let (dx, dg, db) = ops::batchnorm_backward(&cache, &gamma, &r).unwrap();
    let f = |x: &Tensor, g: &Tensor, b: &Tensor| dot(&r, &ops::batchnorm_forward(x, g, b, 1e-5).unwrap().0);
    check("bn dx", &x, &dx, |t| f(t, &gamma, &beta));
    check("bn dgamma", &gamma, &dg, |t| f(&x, t, &beta));
    check("bn dbeta", &beta, &db, |t| f(&x, &gamma, t));
}

#[test]
fn relu() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = random(&[2, 3, 4, 4], &mut rng);
    let r = random(x.shape(), &mut rng);
    let dx = ops::relu_backward(&x, &r).unwrap();
    check("relu", &x, &dx, |t| dot(&r, &ops::relu(t)));
}

#[test]
fn maxpool() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for (window, stride) in [(2, 2), (3, 2)] {
        let x = random(&[2, 2, 7, 6], &mut rng);
        let (y, argmax) = ops::maxpool2d(&x, window, stride).unwrap();
        let r = random(y.shape(), &mut rng);
        let dx = ops::maxpool2d_backward(x.shape(), &argmax, &r).unwrap();
        check("maxpool", &x, &dx, |t| {
            dot(&r, &ops::maxpool2d(t, window, stride).unwrap().0)
        });
    }
}

#[test]
fn dense() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = random(&[3, 7], &mut rng);
    let w = random(&[2, 7], &mut rng);
    let b = random(&[2], &mut rng);
    let r = random(&[3, 2], &mut rng);
    let (dx, dw, db) = ops::dense_backward(&x, &w, &r).unwrap();
    let f = |x: &Tensor, w: &Tensor, b: &Tensor| dot(&r, &ops::dense_forward(x, w, b).unwrap());
    check("dense dx", &x, &dx, |t| f(t, &w, &b));
    check("dense dw", &w, &dw, |t| f(&x, t, &b));
    check("dense db", &b, &db, |t| f(&x, &w, t));
}

#[test]
fn softmax_cross_entropy() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let logits = random(&[4, 2], &mut rng);
    let targets = [0, 1, 1, 0];
    let (_, _, grad) = ops::softmax_cross_entropy(&logits, &targets).unwrap();
    check("softmax-ce", &logits, &grad, |t| {
        ops::softmax_cross_entropy(t, &targets).unwrap().0
    });
}

#[test]
fn two_block_network() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let arch = ArchConfig::with_channels(8, 8, &[3, 4]);
    let mut net = Network::new(&arch, 11).unwrap();
    let x = Tensor::from_fn(&arch.input_shape(3), |_| rng.random::<f64>());
    let targets = [1, 0, 1];

    let logits = net.forward_train(&x).unwrap();
    let (_, _, grad) = ops::softmax_cross_entropy(&logits, &targets).unwrap();
    let grads = net.backward(&grad).unwrap();
    assert_eq!(grads.len(), net.params().len());

    let loss_at = |net: &mut Network| {
        let logits = net.forward_train(&x).unwrap();
        ops::softmax_cross_entropy(&logits, &targets).unwrap().0
    };
    for (p, g) in grads.iter().enumerate() {
        for i in 0..g.len() {
            let orig = net.params()[p].data()[i];
            net.params_mut()[p].data_mut()[i] = orig + H;
            let up = loss_at(&mut net);
            net.params_mut()[p].data_mut()[i] = orig - H;
            let down = loss_at(&mut net);
            net.params_mut()[p].data_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * H);
            let e = rel_err(g.data()[i], numeric);
            assert!(
                e <= TOL,
                "param {p}[{i}]: analytic {} numeric {numeric} (rel {e:e})",
                g.data()[i]
            );
        }
    }
}
