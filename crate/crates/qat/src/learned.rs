//! Cumulative-update tracking for statically clipped training.
//!
//! "Learned" is operationalized literally: a weight counts as learned at
//! iteration `i` when its cumulative update since initialization is nonzero.
//! Under plain SGD that bookkeeping is exact, which is what lets the PWL
//! freeze-out claim be tested with integer counts and no tolerance.

use crate::data::Dataset;
use crate::net::{forward_backward, QuantMode, ToyNet};
use octav_core::{Error, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Per-iteration learned-parameter counts for every weight tensor.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LearnedParamCount {
    per_iteration: Vec<Vec<usize>>,
    totals: Vec<usize>,
    vacuous: bool,
}

impl LearnedParamCount {
    /// `per_iteration[i][l]` is the learned count of layer `l`'s weights
    /// after iteration `i + 1`.
    pub fn per_iteration(&self) -> &[Vec<usize>] {
        &self.per_iteration
    }

    /// Element count of each weight tensor.
    pub fn totals(&self) -> &[usize] {
        &self.totals
    }

    /// True when no initial weight exceeded its static clipping scalar, so
    /// the freeze-out claim had nothing to bite on.
    pub fn is_vacuous(&self) -> bool {
        self.vacuous
    }

    /// The learned-count series of one layer across iterations.
    pub fn layer_series(&self, layer: usize) -> Vec<usize> {
        self.per_iteration.iter().map(|counts| counts[layer]).collect()
    }

    /// True when the layer's series never increases.
    pub fn non_increasing(&self, layer: usize) -> bool {
        self.layer_series(layer).windows(2).all(|w| w[0] >= w[1])
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("counts serialize")
    }
}

/// Trains `net` for `steps` SGD iterations and counts, after every update,
/// how many weights per layer have moved from their initial values.
///
/// Requires a static quantization mode; whether any weight starts beyond its
/// clipping scalar is reported via [`LearnedParamCount::is_vacuous`] rather
/// than an error.
pub fn track_learned_params(
    net: &mut ToyNet,
    data: &Dataset,
    steps: usize,
    batch_size: usize,
    learning_rate: f64,
    seed: u64,
) -> Result<LearnedParamCount> {
    if steps == 0 || batch_size == 0 {
        return Err(Error::InvalidParameter {
            reason: "steps and batch size must be positive".to_string(),
        });
    }
    if !(learning_rate.is_finite() && learning_rate > 0.0) {
        return Err(Error::InvalidParameter {
            reason: format!("learning rate must be positive, got {learning_rate}"),
        });
    }
    let static_sets = match net.quant_mode() {
        QuantMode::OctavStatic(sets) => sets.clone(),
        other => {
            return Err(Error::InvalidParameter {
                reason: format!("learned-parameter tracking needs static scalars, mode is {other:?}"),
            });
        }
    };

    // Vacuous unless some layer has an initially clipped weight.
    let mut vacuous = true;
    for (l, set) in static_sets.iter().enumerate() {
        if let Some(ws) = &set.weight {
            let view = *ws.view();
            let scalars = ws.scalars();
            let w = net.layer(l).weights().data();
            for (i, v) in w.iter().enumerate() {
                let g = view.group_of(i);
                if !ws.is_degenerate(g) && v.abs() > scalars[g] {
                    vacuous = false;
                    break;
                }
            }
        }
        if !vacuous {
            break;
        }
    }

    let initial = net.weight_snapshot();
    let totals: Vec<usize> = initial.iter().map(|w| w.len()).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices: Vec<usize> = (0..data.train_len()).collect();
    indices.shuffle(&mut rng);
    let mut cursor = 0usize;

    let mut per_iteration = Vec::with_capacity(steps);
    for _ in 0..steps {
        if cursor + batch_size > indices.len() {
            indices.shuffle(&mut rng);
            cursor = 0;
        }
        let take = batch_size.min(indices.len());
        let chunk = &indices[cursor..cursor + take];
        cursor += take;

        let (bx, by) = data.train_batch(chunk);
        let (_, grads) = forward_backward(net, &bx, &by)?;
        for l in 0..net.layer_count() {
            net.apply_update(l, &grads.weights[l], learning_rate)?;
        }

        let counts: Vec<usize> = (0..net.layer_count())
            .map(|l| {
                net.layer(l)
                    .weights()
                    .data()
                    .iter()
                    .zip(initial[l].data())
                    .filter(|(now, was)| now != was)
                    .count()
            })
            .collect();
        per_iteration.push(counts);
    }

    Ok(LearnedParamCount { per_iteration, totals, vacuous })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::BlobConfig;
    use crate::net::{Activation, EstimatorChoice, LayerScalars};
    use octav_core::{percentile_magnitude, EstimatorKind, Granularity, GroupView, ScalarSet};

    fn fixture() -> (ToyNet, Dataset) {
        let data = Dataset::gaussian_blobs(&BlobConfig {
            classes: 4,
            dim: 6,
            train: 256,
            test: 32,
            ..BlobConfig::default()
        })
        .unwrap();
        let net = ToyNet::new(&[6, 10, 4], Activation::Identity, 17).unwrap();
        (net, data)
    }

    // Static weight scalars at the given magnitude percentile, activations
    // untouched.
    fn percentile_sets(net: &ToyNet, p: f64) -> Vec<LayerScalars> {
        (0..net.layer_count())
            .map(|l| {
                let w = net.layer(l).weights();
                let view = GroupView::for_shape(w.shape(), Granularity::PerTensor).unwrap();
                let set = percentile_magnitude(w, view, p).unwrap();
                LayerScalars { weight: Some(set), activation: None }
            })
            .collect()
    }

    #[test]
    fn needs_a_static_mode() {
        let (mut net, data) = fixture();
        let err = track_learned_params(&mut net, &data, 3, 32, 0.05, 1).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter { .. }));
    }

    #[test]
    fn scalars_above_every_weight_are_flagged_vacuous() {
        let (net, data) = fixture();
        let sets = (0..net.layer_count())
            .map(|l| {
                let w = net.layer(l).weights();
                let view = GroupView::for_shape(w.shape(), Granularity::PerTensor).unwrap();
                LayerScalars {
                    weight: Some(ScalarSet::uniform(1e9, view).unwrap()),
                    activation: None,
                }
            })
            .collect();
        let mut net = net.with_quant_mode(QuantMode::OctavStatic(sets)).unwrap();
        let counts = track_learned_params(&mut net, &data, 2, 32, 0.05, 1).unwrap();
        assert!(counts.is_vacuous());
    }

    #[test]
    fn pwl_freezes_clipped_weights_from_the_first_step() {
        let (net, data) = fixture();
        let sets = percentile_sets(&net, 90.0);
        let clipped: usize = (0..net.layer_count())
            .map(|l| {
                let s = sets[l].weight.as_ref().unwrap().scalars()[0];
                net.layer(l).weights().data().iter().filter(|w| w.abs() > s).count()
            })
            .sum();
        assert!(clipped > 0);

        let mut net = net
            .with_quant_mode(QuantMode::OctavStatic(sets))
            .unwrap()
            .with_choice(EstimatorChoice::Pwl);
        let counts = track_learned_params(&mut net, &data, 20, 32, 0.05, 1).unwrap();
        assert!(!counts.is_vacuous());

        let total: usize = counts.totals().iter().sum();
        let first: usize = counts.per_iteration()[0].iter().sum();
        // Every in-range weight moves immediately; every clipped one never does.
        assert_eq!(first, total - clipped);
        for l in 0..counts.totals().len() {
            assert!(counts.non_increasing(l));
        }
        let last: usize = counts.per_iteration().last().unwrap().iter().sum();
        assert_eq!(first, last);
    }

    #[test]
    fn mad_and_ste_move_every_weight_every_iteration() {
        for kind in [EstimatorKind::Mad, EstimatorKind::Ste] {
            let (net, data) = fixture();
            let sets = percentile_sets(&net, 90.0);
            let mut net = net
                .with_quant_mode(QuantMode::OctavStatic(sets))
                .unwrap()
                .with_estimators(kind, kind);
            let counts = track_learned_params(&mut net, &data, 10, 32, 0.05, 1).unwrap();
            for (i, per_layer) in counts.per_iteration().iter().enumerate() {
                for (l, &c) in per_layer.iter().enumerate() {
                    assert_eq!(c, counts.totals()[l], "iteration {i}, layer {l}, {kind:?}");
                }
            }
        }
    }

    #[test]
    fn series_helpers_read_one_layer() {
        let counts = LearnedParamCount {
            per_iteration: vec![vec![5, 9], vec![5, 8], vec![4, 8]],
            totals: vec![6, 10],
            vacuous: false,
        };
        assert_eq!(counts.layer_series(1), vec![9, 8, 8]);
        assert!(counts.non_increasing(0));
        let v: serde_json::Value = serde_json::from_str(&counts.to_json()).unwrap();
        assert_eq!(v["totals"][1], 10);
    }
}
