//! Finite-difference checks of the hand-written backward pass, and the
//! estimator-specific gradient behavior at clipped weights.

use octav_qat::{
    forward_backward, softmax_cross_entropy, Activation, LayerScalars, QuantMode, ToyNet,
};
use octav_core::{EstimatorKind, Granularity, GroupView, ScalarSet, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_batch(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> (Tensor, Vec<usize>) {
    let data: Vec<f64> = (0..rows * cols).map(|_| rng.gen_range(-1.5..1.5)).collect();
    let labels: Vec<usize> = (0..rows).map(|i| i % 3).collect();
    (Tensor::from_vec(data, &[rows, cols]).unwrap(), labels)
}

// Loss plus the sign pattern of every pre-activation, used to reject
// finite-difference probes that step across a ReLU kink.
fn loss_and_signs(net: &ToyNet, batch: &Tensor, labels: &[usize]) -> (f64, Vec<bool>) {
    let cache = net.forward(batch).unwrap();
    let signs = (0..net.layer_count())
        .flat_map(|l| cache.pre_activation(l).data().iter().map(|&z| z > 0.0))
        .collect();
    let (loss, _) = softmax_cross_entropy(cache.output(), labels).unwrap();
    (loss, signs)
}

fn nudged(net: &ToyNet, layer: usize, idx: usize, h: f64) -> ToyNet {
    let mut n = net.clone();
    let len = n.layer(layer).weights().len();
    let shape = n.layer(layer).weights().shape().to_vec();
    let mut g = vec![0.0f64; len];
    g[idx] = -h;
    n.apply_update(layer, &Tensor::from_vec(g, &shape).unwrap(), 1.0).unwrap();
    n
}

#[test]
fn unquantized_backprop_matches_central_differences_over_ten_seeds() {
    let h = 1e-5;
    let mut checked = 0usize;
    let mut skipped = 0usize;
    for seed in 0..10u64 {
        for act in [Activation::Identity, Activation::Relu] {
            let net = ToyNet::new(&[6, 5, 3], act, seed).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let (batch, labels) = random_batch(8, 6, &mut rng);
            let (_, grads) = forward_backward(&net, &batch, &labels).unwrap();

            for l in 0..net.layer_count() {
                for idx in 0..net.layer(l).weights().len() {
                    let (lp, sp) = loss_and_signs(&nudged(&net, l, idx, h), &batch, &labels);
                    let (lm, sm) = loss_and_signs(&nudged(&net, l, idx, -h), &batch, &labels);
                    if act == Activation::Relu && sp != sm {
                        // The probe crossed a kink; the central difference is
                        // not a derivative estimate there.
                        skipped += 1;
                        continue;
                    }
                    checked += 1;
                    let fd = (lp - lm) / (2.0 * h);
                    let analytic = grads.weights[l].data()[idx];
                    let denom = analytic.abs().max(fd.abs());
                    if denom < 1e-7 {
                        assert!(
                            (analytic - fd).abs() < 1e-7,
                            "seed {seed} {act:?} layer {l} idx {idx}: {analytic} vs {fd}"
                        );
                    } else {
                        assert!(
                            (analytic - fd).abs() <= 1e-4 * denom,
                            "seed {seed} {act:?} layer {l} idx {idx}: {analytic} vs {fd}"
                        );
                    }
                }
            }
        }
    }
    assert!(checked > 800, "only {checked} parameters checked");
    assert!(
        (skipped as f64) < 0.05 * (checked + skipped) as f64,
        "{skipped} of {} probes crossed kinks",
        checked + skipped
    );
}

#[test]
fn ste_keeps_clipped_weight_gradients_nonzero_and_unattenuated() {
    let net = ToyNet::new(&[8, 12, 12, 12, 4], Activation::Identity, 3)
        .unwrap()
        .with_quant_mode(QuantMode::OctavDynamic)
        .unwrap()
        .with_estimators(EstimatorKind::Ste, EstimatorKind::Ste);

    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let data: Vec<f64> = (0..32 * 8).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let batch = Tensor::from_vec(data, &[32, 8]).unwrap();
    let labels: Vec<usize> = (0..32).map(|i| i % 4).collect();

    let cache = net.forward(&batch).unwrap();
    let (_, g0) = softmax_cross_entropy(cache.output(), &labels).unwrap();
    let ste = net.backward_with(&cache, &g0, Some((EstimatorKind::Ste, EstimatorKind::Ste))).unwrap();
    let pwl = net.backward_with(&cache, &g0, Some((EstimatorKind::Pwl, EstimatorKind::Pwl))).unwrap();

    let mut clipped_total = 0usize;
    for l in 1..3 {
        let s = cache.weight_scalars(l).expect("interior weights quantize").scalars()[0];
        for (i, w) in net.layer(l).weights().data().iter().enumerate() {
            if w.abs() > s {
                clipped_total += 1;
                // PWL zeroes the same entry STE leaves untouched; the STE
                // value is the raw chain-rule product.
                assert_ne!(ste.weights[l].data()[i], 0.0);
                assert_eq!(pwl.weights[l].data()[i], 0.0);
            }
        }
    }
    assert!(clipped_total > 0, "OCTAV at B=4 must clip some weights");
}

#[test]
fn static_pwl_weight_gradients_vanish_exactly_beyond_the_scalar() {
    let net = ToyNet::new(&[8, 10, 4], Activation::Relu, 9).unwrap();
    let w0 = net.layer(0).weights().clone();
    let s = 0.7 * w0.data().iter().cloned().fold(0.0f64, |a, v| a.max(v.abs()));
    let view = GroupView::for_shape(w0.shape(), Granularity::PerTensor).unwrap();
    let sets = vec![
        LayerScalars { weight: Some(ScalarSet::uniform(s, view).unwrap()), activation: None },
        LayerScalars::default(),
    ];
    let net = net
        .with_quant_mode(QuantMode::OctavStatic(sets))
        .unwrap()
        .with_estimators(EstimatorKind::Pwl, EstimatorKind::Pwl);

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let data: Vec<f64> = (0..16 * 8).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let batch = Tensor::from_vec(data, &[16, 8]).unwrap();
    let labels: Vec<usize> = (0..16).map(|i| i % 4).collect();
    let (_, grads) = forward_backward(&net, &batch, &labels).unwrap();

    let mut clipped = 0usize;
    for (i, w) in w0.data().iter().enumerate() {
        if w.abs() > s {
            clipped += 1;
            assert_eq!(grads.weights[0].data()[i], 0.0);
        } else {
            assert!(grads.weights[0].data()[i].is_finite());
        }
    }
    assert!(clipped > 0);
}
