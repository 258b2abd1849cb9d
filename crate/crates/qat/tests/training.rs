//! End-to-end training behavior: determinism, the full-precision baseline,
//! and a quantized-training smoke test.

use octav_qat::{
    train_toy, Activation, BlobConfig, Dataset, EstimatorChoice, QuantMode, ToyNet, TrainConfig,
};

#[test]
fn identical_seeds_reproduce_the_curve_bit_for_bit() {
    let data = Dataset::gaussian_blobs(&BlobConfig {
        train: 2000,
        test: 500,
        noise: 2.5,
        ..BlobConfig::default()
    })
    .unwrap();
    let cfg = TrainConfig { epochs: 4, batch_size: 128, learning_rate: 0.05, shuffle_seed: 9 };

    let run = || {
        let mut net = ToyNet::new(&[16, 24, 8], Activation::Relu, 21)
            .unwrap()
            .with_quant_mode(QuantMode::OctavDynamic)
            .unwrap()
            .with_choice(EstimatorChoice::Mph);
        let curve = train_toy(&mut net, &data, &cfg).unwrap();
        (curve, net.weight_snapshot())
    };
    let (curve_a, weights_a) = run();
    let (curve_b, weights_b) = run();
    assert_eq!(curve_a.per_epoch(), curve_b.per_epoch());
    for (wa, wb) in weights_a.iter().zip(&weights_b) {
        let bits_a: Vec<u64> = wa.data().iter().map(|v| v.to_bits()).collect();
        let bits_b: Vec<u64> = wb.data().iter().map(|v| v.to_bits()).collect();
        assert_eq!(bits_a, bits_b);
    }

    // A different shuffle order must actually change the optimization path.
    let mut net = ToyNet::new(&[16, 24, 8], Activation::Relu, 21)
        .unwrap()
        .with_quant_mode(QuantMode::OctavDynamic)
        .unwrap()
        .with_choice(EstimatorChoice::Mph);
    let other = TrainConfig { shuffle_seed: 10, ..cfg };
    train_toy(&mut net, &data, &other).unwrap();
    let weights_c = net.weight_snapshot();
    let differs = weights_a
        .iter()
        .zip(&weights_c)
        .any(|(wa, wc)| wa.data().iter().zip(wc.data()).any(|(a, c)| a != c));
    assert!(differs);
}

#[test]
fn full_precision_baseline_reaches_95_percent() {
    let data = Dataset::gaussian_blobs(&BlobConfig::default()).unwrap();
    let mut net = ToyNet::new(&[16, 32, 8], Activation::Relu, 5).unwrap();
    let cfg = TrainConfig { epochs: 12, batch_size: 128, learning_rate: 0.1, shuffle_seed: 1 };
    let curve = train_toy(&mut net, &data, &cfg).unwrap();
    assert_eq!(curve.len(), 12);
    assert!(
        curve.final_accuracy() >= 0.95,
        "baseline stalled at {}",
        curve.final_accuracy()
    );
}

#[test]
fn four_bit_octav_training_still_learns_the_task() {
    let data = Dataset::gaussian_blobs(&BlobConfig::default()).unwrap();
    let mut net = ToyNet::new(&[16, 32, 8], Activation::Relu, 5)
        .unwrap()
        .with_bits(4)
        .unwrap()
        .with_quant_mode(QuantMode::OctavDynamic)
        .unwrap()
        .with_choice(EstimatorChoice::Mph);
    let cfg = TrainConfig { epochs: 12, batch_size: 128, learning_rate: 0.1, shuffle_seed: 1 };
    let curve = train_toy(&mut net, &data, &cfg).unwrap();
    assert!(
        curve.final_accuracy() >= 0.90,
        "quantized training stalled at {}",
        curve.final_accuracy()
    );
}
