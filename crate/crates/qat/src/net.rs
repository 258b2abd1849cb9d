//! A bias-free multi-layer perceptron with hand-written reverse-mode
//! differentiation and fake-quant sites on weights and layer inputs.
//!
//! Each layer computes `x_out = act(FQ_a(x_in) · FQ_w(W)ᵀ)`, where the two
//! fake-quant sites apply the real clipped quantizer in the forward pass and
//! an estimator mask (STE, PWL, or MAD) in the backward pass. The forward
//! cache keeps the pre-quantization values and the clipping scalars of every
//! site, so one forward pass can serve backward passes under different
//! estimators; that is what the gradient-variance probes rely on.

use octav_core::{
    backward as estimator_mask, max_scalar, octav, quantize_clipped, reduce_sum, EstimatorKind,
    Error, Granularity, GroupView, MphPolicy, OctavConfig, QuantSpec, Result, ScalarSet,
    Signedness, Tensor,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Elementwise nonlinearity applied after a layer's matrix product.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative at `z`; the ReLU kink at zero takes the left value 0.
    fn slope(self, z: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Named estimator assignment for the weight and activation sites.
///
/// `Mph` is the mixed policy: MAD on weight gradients, PWL on activation
/// gradients.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorChoice {
    Ste,
    Pwl,
    Mad,
    Mph,
}

impl EstimatorChoice {
    /// The (weight, activation) backward rules this choice denotes.
    pub fn rules(self) -> (EstimatorKind, EstimatorKind) {
        match self {
            EstimatorChoice::Ste => (EstimatorKind::Ste, EstimatorKind::Ste),
            EstimatorChoice::Pwl => (EstimatorKind::Pwl, EstimatorKind::Pwl),
            EstimatorChoice::Mad => (EstimatorKind::Mad, EstimatorKind::Mad),
            EstimatorChoice::Mph => {
                let policy = MphPolicy::default();
                (policy.weight_rule, policy.activation_rule)
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            EstimatorChoice::Ste => "STE",
            EstimatorChoice::Pwl => "PWL",
            EstimatorChoice::Mad => "MAD",
            EstimatorChoice::Mph => "MPH",
        }
    }
}

/// Where clipping scalars come from during training.
#[derive(Debug, Clone, PartialEq)]
pub enum QuantMode {
    /// Full precision: no fake-quant sites anywhere.
    None,
    /// Scalars recomputed every forward pass as each tensor's max magnitude,
    /// so nothing clips and all noise is discretization.
    MaxScaled,
    /// Scalars recomputed every forward pass by the OCTAV recursion.
    OctavDynamic,
    /// Frozen per-layer scalars fixed before training, one entry per layer.
    OctavStatic(Vec<LayerScalars>),
}

/// Static clipping configuration for one layer.
///
/// `None` leaves a site unquantized. Weight scalars carry their own group
/// view (validated against the layer's weight tensor); activation sites hold
/// a single per-tensor scalar because the batch shape is unknown until
/// forward time.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LayerScalars {
    pub weight: Option<ScalarSet>,
    pub activation: Option<f64>,
}

/// One linear layer: a dense `[out, in]` weight matrix and its nonlinearity.
#[derive(Debug, Clone)]
pub struct Layer {
    weights: Tensor,
    activation: Activation,
}

impl Layer {
    pub fn weights(&self) -> &Tensor {
        &self.weights
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn fan_in(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn fan_out(&self) -> usize {
        self.weights.shape()[0]
    }
}

// Per-layer forward state kept for the backward pass.
#[derive(Debug, Clone)]
struct LayerCache {
    x_in: Tensor,
    x_q: Tensor,
    a_scalars: Option<ScalarSet>,
    w_q: Tensor,
    w_scalars: Option<ScalarSet>,
    z: Tensor,
}

/// Everything the backward pass needs from one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    layers: Vec<LayerCache>,
    output: Tensor,
}

impl ForwardCache {
    /// Network output (logits for a classifier net).
    pub fn output(&self) -> &Tensor {
        &self.output
    }

    pub fn batch_size(&self) -> usize {
        self.output.shape()[0]
    }

    /// Pre-quantization input of layer `l`.
    pub fn activation_input(&self, l: usize) -> &Tensor {
        &self.layers[l].x_in
    }

    /// Quantized input of layer `l` (equal to the input when the site is off).
    pub fn quantized_input(&self, l: usize) -> &Tensor {
        &self.layers[l].x_q
    }

    /// Pre-activation values of layer `l`.
    pub fn pre_activation(&self, l: usize) -> &Tensor {
        &self.layers[l].z
    }

    /// Clipping scalars used at layer `l`'s activation site, if any.
    pub fn activation_scalars(&self, l: usize) -> Option<&ScalarSet> {
        self.layers[l].a_scalars.as_ref()
    }

    /// Clipping scalars used at layer `l`'s weight site, if any.
    pub fn weight_scalars(&self, l: usize) -> Option<&ScalarSet> {
        self.layers[l].w_scalars.as_ref()
    }
}

/// Loss gradients with respect to every weight tensor and every layer input.
///
/// `activations[l]` is the gradient with respect to layer `l`'s
/// pre-quantization input, estimator mask already applied.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub weights: Vec<Tensor>,
    pub activations: Vec<Tensor>,
}

/// Bias-free MLP with fake-quant sites on layer inputs and weights.
///
/// Under the recomputing modes (`MaxScaled`, `OctavDynamic`) the first and
/// last layers stay unquantized unless `with_quantize_edges(true)`. An
/// explicit `OctavStatic` configuration is authoritative: its `Some`/`None`
/// entries decide every site directly.
#[derive(Debug, Clone)]
pub struct ToyNet {
    layers: Vec<Layer>,
    quant_mode: QuantMode,
    weight_estimator: EstimatorKind,
    activation_estimator: EstimatorKind,
    spec: QuantSpec,
    quantize_edges: bool,
}

impl ToyNet {
    /// Builds a net with layer widths `dims` (input, hidden..., output) and
    /// seeded Gaussian initialization with standard deviation 1/sqrt(fan_in).
    /// Hidden layers use `hidden`; the output layer is always linear. At
    /// least two layers (three widths) are required.
    pub fn new(dims: &[usize], hidden: Activation, seed: u64) -> Result<Self> {
        if dims.len() < 3 {
            return Err(Error::InvalidParameter {
                reason: format!("a net needs at least 2 layers, got widths {dims:?}"),
            });
        }
        if dims.contains(&0) {
            return Err(Error::InvalidParameter {
                reason: format!("layer widths must be positive, got {dims:?}"),
            });
        }

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for l in 0..dims.len() - 1 {
            let (fan_in, fan_out) = (dims[l], dims[l + 1]);
            let init = Normal::new(0.0, (fan_in as f64).powf(-0.5)).expect("finite std");
            let data: Vec<f64> = (0..fan_in * fan_out).map(|_| init.sample(&mut rng)).collect();
            let weights = Tensor::from_vec(data, &[fan_out, fan_in])?;
            let activation = if l + 2 == dims.len() { Activation::Identity } else { hidden };
            layers.push(Layer { weights, activation });
        }

        let policy = MphPolicy::default();
        Ok(Self {
            layers,
            quant_mode: QuantMode::None,
            weight_estimator: policy.weight_rule,
            activation_estimator: policy.activation_rule,
            spec: QuantSpec::new(4, Signedness::Signed)?,
            quantize_edges: false,
        })
    }

    /// Builds a net from explicit weight matrices (each `[out, in]`, chained
    /// so one layer's output width feeds the next layer's input width).
    /// Hidden layers use `hidden`; the output layer is linear.
    pub fn from_weights(weights: Vec<Tensor>, hidden: Activation) -> Result<Self> {
        if weights.len() < 2 {
            return Err(Error::InvalidParameter {
                reason: format!("a net needs at least 2 layers, got {}", weights.len()),
            });
        }
        let count = weights.len();
        let mut layers = Vec::with_capacity(count);
        for (l, w) in weights.into_iter().enumerate() {
            if w.rank() != 2 {
                return Err(Error::InvalidParameter {
                    reason: format!("layer {l} weights must be a matrix, got shape {:?}", w.shape()),
                });
            }
            if let Some(prev) = layers.last() {
                let prev: &Layer = prev;
                if w.shape()[1] != prev.fan_out() {
                    return Err(Error::InvalidParameter {
                        reason: format!(
                            "layer {l} expects fan-in {}, previous layer emits {}",
                            w.shape()[1],
                            prev.fan_out()
                        ),
                    });
                }
            }
            let activation = if l + 1 == count { Activation::Identity } else { hidden };
            layers.push(Layer { weights: w, activation });
        }
        let policy = MphPolicy::default();
        Ok(Self {
            layers,
            quant_mode: QuantMode::None,
            weight_estimator: policy.weight_rule,
            activation_estimator: policy.activation_rule,
            spec: QuantSpec::new(4, Signedness::Signed)?,
            quantize_edges: false,
        })
    }

    /// Sets the quantization mode, validating a static configuration against
    /// the net's layer count and weight shapes.
    pub fn with_quant_mode(mut self, mode: QuantMode) -> Result<Self> {
        if let QuantMode::OctavStatic(sets) = &mode {
            if sets.len() != self.layers.len() {
                return Err(Error::InvalidParameter {
                    reason: format!(
                        "static scalars cover {} layers, net has {}",
                        sets.len(),
                        self.layers.len()
                    ),
                });
            }
            for (l, set) in sets.iter().enumerate() {
                if let Some(ws) = &set.weight {
                    ws.view().check_matches(&self.layers[l].weights)?;
                }
                if let Some(s) = set.activation {
                    if !(s.is_finite() && s > 0.0) {
                        return Err(Error::InvalidParameter {
                            reason: format!("activation scalar for layer {l} must be positive, got {s}"),
                        });
                    }
                }
            }
        }
        self.quant_mode = mode;
        Ok(self)
    }

    /// Sets the bit width used by every fake-quant site.
    pub fn with_bits(mut self, bits: u32) -> Result<Self> {
        self.spec = QuantSpec::new(bits, Signedness::Signed)?;
        Ok(self)
    }

    /// Sets the backward rules for weight and activation sites separately.
    pub fn with_estimators(mut self, weight: EstimatorKind, activation: EstimatorKind) -> Self {
        self.weight_estimator = weight;
        self.activation_estimator = activation;
        self
    }

    /// Sets both backward rules from a named choice.
    pub fn with_choice(self, choice: EstimatorChoice) -> Self {
        let (w, a) = choice.rules();
        self.with_estimators(w, a)
    }

    /// Quantizes the first and last layers too under the recomputing modes.
    pub fn with_quantize_edges(mut self, yes: bool) -> Self {
        self.quantize_edges = yes;
        self
    }

    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    pub fn layer(&self, l: usize) -> &Layer {
        &self.layers[l]
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].fan_out()
    }

    pub fn spec(&self) -> QuantSpec {
        self.spec
    }

    pub fn quant_mode(&self) -> &QuantMode {
        &self.quant_mode
    }

    pub fn estimators(&self) -> (EstimatorKind, EstimatorKind) {
        (self.weight_estimator, self.activation_estimator)
    }

    /// Clones of every weight tensor, in layer order.
    pub fn weight_snapshot(&self) -> Vec<Tensor> {
        self.layers.iter().map(|l| l.weights.clone()).collect()
    }

    /// SGD step on one layer: `w -= lr * grad`.
    pub fn apply_update(&mut self, layer: usize, grad: &Tensor, lr: f64) -> Result<()> {
        if layer >= self.layers.len() {
            return Err(Error::InvalidParameter {
                reason: format!("layer {layer} out of range for {} layers", self.layers.len()),
            });
        }
        let weights = &mut self.layers[layer].weights;
        if grad.shape() != weights.shape() {
            return Err(Error::InvalidParameter {
                reason: format!(
                    "gradient shape {:?} does not match weight shape {:?}",
                    grad.shape(),
                    weights.shape()
                ),
            });
        }
        for (w, g) in weights.data_mut().iter_mut().zip(grad.data()) {
            *w -= lr * g;
        }
        Ok(())
    }

    // Sites at the edges stay off under the recomputing modes by default.
    fn recomputed_site_active(&self, l: usize) -> bool {
        self.quantize_edges || (l != 0 && l + 1 != self.layers.len())
    }

    fn weight_scalars_for(&self, l: usize) -> Result<Option<ScalarSet>> {
        match &self.quant_mode {
            QuantMode::None => Ok(None),
            QuantMode::OctavStatic(sets) => Ok(sets[l].weight.clone()),
            QuantMode::MaxScaled if self.recomputed_site_active(l) => {
                let view = GroupView::for_shape(self.layers[l].weights.shape(), Granularity::PerTensor)?;
                max_scalar(&self.layers[l].weights, view).map(Some)
            }
            QuantMode::OctavDynamic if self.recomputed_site_active(l) => {
                let view = GroupView::for_shape(self.layers[l].weights.shape(), Granularity::PerTensor)?;
                let (set, _) = octav(&self.layers[l].weights, view, self.spec, &OctavConfig::default())?;
                Ok(Some(set))
            }
            _ => Ok(None),
        }
    }

    fn activation_scalars_for(&self, l: usize, x: &Tensor) -> Result<Option<ScalarSet>> {
        match &self.quant_mode {
            QuantMode::None => Ok(None),
            QuantMode::OctavStatic(sets) => match sets[l].activation {
                Some(s) => {
                    let view = GroupView::for_shape(x.shape(), Granularity::PerTensor)?;
                    ScalarSet::uniform(s, view).map(Some)
                }
                None => Ok(None),
            },
            QuantMode::MaxScaled if self.recomputed_site_active(l) => {
                let view = GroupView::for_shape(x.shape(), Granularity::PerTensor)?;
                max_scalar(x, view).map(Some)
            }
            QuantMode::OctavDynamic if self.recomputed_site_active(l) => {
                let view = GroupView::for_shape(x.shape(), Granularity::PerTensor)?;
                let (set, _) = octav(x, view, self.spec, &OctavConfig::default())?;
                Ok(Some(set))
            }
            _ => Ok(None),
        }
    }

    /// Runs the quantized forward pass, keeping per-site state for backward.
    pub fn forward(&self, batch: &Tensor) -> Result<ForwardCache> {
        if batch.rank() != 2 || batch.shape()[1] != self.input_dim() {
            return Err(Error::InvalidParameter {
                reason: format!(
                    "batch shape {:?} does not feed a net with input width {}",
                    batch.shape(),
                    self.input_dim()
                ),
            });
        }

        let mut x = batch.clone();
        let mut caches = Vec::with_capacity(self.layers.len());
        for (l, layer) in self.layers.iter().enumerate() {
            let a_scalars = self.activation_scalars_for(l, &x)?;
            let x_q = match &a_scalars {
                Some(s) => quantize_clipped(&x, s, self.spec)?,
                None => x.clone(),
            };
            let w_scalars = self.weight_scalars_for(l)?;
            let w_q = match &w_scalars {
                Some(s) => quantize_clipped(&layer.weights, s, self.spec)?,
                None => layer.weights.clone(),
            };
            let z = matmul_nt(&x_q, &w_q)?;
            let mut a = z.clone();
            for v in a.data_mut() {
                *v = layer.activation.apply(*v);
            }
            caches.push(LayerCache { x_in: x, x_q, a_scalars, w_q, w_scalars, z });
            x = a;
        }
        Ok(ForwardCache { layers: caches, output: x })
    }

    /// Backward pass with the net's configured estimators.
    pub fn backward(&self, cache: &ForwardCache, upstream: &Tensor) -> Result<Gradients> {
        self.backward_with(cache, upstream, None)
    }

    /// Backward pass from `upstream` (gradient at the network output),
    /// optionally overriding the (weight, activation) estimator rules. The
    /// cache is reusable: several estimator choices can replay one forward.
    pub fn backward_with(
        &self,
        cache: &ForwardCache,
        upstream: &Tensor,
        rules: Option<(EstimatorKind, EstimatorKind)>,
    ) -> Result<Gradients> {
        let (w_kind, a_kind) = rules.unwrap_or((self.weight_estimator, self.activation_estimator));
        if cache.layers.len() != self.layers.len() {
            return Err(Error::InvalidParameter {
                reason: "forward cache does not belong to this net".to_string(),
            });
        }
        if upstream.shape() != cache.output.shape() {
            return Err(Error::InvalidParameter {
                reason: format!(
                    "upstream gradient shape {:?} does not match output shape {:?}",
                    upstream.shape(),
                    cache.output.shape()
                ),
            });
        }

        let count = self.layers.len();
        let mut weights_rev = Vec::with_capacity(count);
        let mut activations_rev = Vec::with_capacity(count);
        let mut g = upstream.clone();
        for l in (0..count).rev() {
            let lc = &cache.layers[l];
            let layer = &self.layers[l];

            let mut gz = g;
            {
                let zd = lc.z.data();
                let gd = gz.data_mut();
                for i in 0..gd.len() {
                    gd[i] *= layer.activation.slope(zd[i]);
                }
            }

            let mut wg = matmul_tn(&gz, &lc.x_q)?;
            if let Some(ss) = &lc.w_scalars {
                apply_estimator_mask(&mut wg, &layer.weights, ss, w_kind);
            }

            let mut gx = matmul_nn(&gz, &lc.w_q)?;
            if let Some(ss) = &lc.a_scalars {
                apply_estimator_mask(&mut gx, &lc.x_in, ss, a_kind);
            }

            weights_rev.push(wg);
            activations_rev.push(gx.clone());
            g = gx;
        }
        weights_rev.reverse();
        activations_rev.reverse();
        Ok(Gradients { weights: weights_rev, activations: activations_rev })
    }

    /// Held-out classification accuracy under the current quantization mode.
    pub fn accuracy(&self, x: &Tensor, labels: &[usize]) -> Result<f64> {
        let out = self.forward(x)?.output;
        let n = out.shape()[0];
        let c = out.shape()[1];
        if labels.len() != n {
            return Err(Error::InvalidParameter {
                reason: format!("{} labels for {} rows", labels.len(), n),
            });
        }
        let mut hits = 0usize;
        for (i, &y) in labels.iter().enumerate() {
            if y >= c {
                return Err(Error::InvalidParameter {
                    reason: format!("label {y} out of range for {c} classes"),
                });
            }
            let row = &out.data()[i * c..(i + 1) * c];
            let mut best = 0usize;
            for j in 1..c {
                if row[j] > row[best] {
                    best = j;
                }
            }
            if best == y {
                hits += 1;
            }
        }
        Ok(hits as f64 / n as f64)
    }
}

/// Mean softmax cross-entropy over the batch, and its gradient with respect
/// to the logits (already divided by the batch size).
pub fn softmax_cross_entropy(logits: &Tensor, labels: &[usize]) -> Result<(f64, Tensor)> {
    if logits.rank() != 2 {
        return Err(Error::InvalidParameter {
            reason: format!("logits must be a matrix, got shape {:?}", logits.shape()),
        });
    }
    let n = logits.shape()[0];
    let c = logits.shape()[1];
    if labels.len() != n {
        return Err(Error::InvalidParameter {
            reason: format!("{} labels for {} logit rows", labels.len(), n),
        });
    }

    let d = logits.data();
    let mut grad = vec![0.0f64; n * c];
    let mut losses = vec![0.0f64; n];
    let scale = 1.0 / n as f64;
    for (i, &y) in labels.iter().enumerate() {
        if y >= c {
            return Err(Error::InvalidParameter {
                reason: format!("label {y} out of range for {c} classes"),
            });
        }
        let row = &d[i * c..(i + 1) * c];
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for j in 0..c {
            let e = (row[j] - m).exp();
            grad[i * c + j] = e;
            sum += e;
        }
        losses[i] = m + sum.ln() - row[y];
        for j in 0..c {
            let p = grad[i * c + j] / sum;
            grad[i * c + j] = (p - if j == y { 1.0 } else { 0.0 }) * scale;
        }
    }
    let loss = reduce_sum(&losses) * scale;
    Ok((loss, Tensor::from_vec(grad, &[n, c])?))
}

/// One forward/backward round under the net's configured estimators:
/// returns the batch loss and all gradients.
pub fn forward_backward(net: &ToyNet, batch: &Tensor, labels: &[usize]) -> Result<(f64, Gradients)> {
    let cache = net.forward(batch)?;
    let (loss, g0) = softmax_cross_entropy(cache.output(), labels)?;
    let grads = net.backward(&cache, &g0)?;
    Ok((loss, grads))
}

// Multiplies `grad` elementwise by the estimator mask evaluated at `values`.
// Degenerate groups pass gradients through unchanged, matching the forward
// pass-through of all-zero groups.
fn apply_estimator_mask(grad: &mut Tensor, values: &Tensor, scalars: &ScalarSet, kind: EstimatorKind) {
    debug_assert_eq!(grad.len(), values.len());
    let view = *scalars.view();
    let s = scalars.scalars();
    let v = values.data();
    let g = grad.data_mut();
    for i in 0..g.len() {
        let group = view.group_of(i);
        if scalars.is_degenerate(group) {
            continue;
        }
        g[i] *= estimator_mask(v[i], s[group], kind, Signedness::Signed);
    }
}

// a: [n, k], b: [m, k] -> a · bᵀ: [n, m]
fn matmul_nt(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    check_matrix(a)?;
    check_matrix(b)?;
    let (n, k) = (a.shape()[0], a.shape()[1]);
    let m = b.shape()[0];
    if b.shape()[1] != k {
        return Err(dim_error("a · bᵀ", a, b));
    }
    let ad = a.data();
    let bd = b.data();
    let mut out = vec![0.0f64; n * m];
    for i in 0..n {
        let arow = &ad[i * k..(i + 1) * k];
        for j in 0..m {
            let brow = &bd[j * k..(j + 1) * k];
            let mut acc = 0.0;
            for t in 0..k {
                acc += arow[t] * brow[t];
            }
            out[i * m + j] = acc;
        }
    }
    Tensor::from_vec(out, &[n, m])
}

// a: [n, m], b: [n, k] -> aᵀ · b: [m, k]
fn matmul_tn(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    check_matrix(a)?;
    check_matrix(b)?;
    let (n, m) = (a.shape()[0], a.shape()[1]);
    let k = b.shape()[1];
    if b.shape()[0] != n {
        return Err(dim_error("aᵀ · b", a, b));
    }
    let ad = a.data();
    let bd = b.data();
    let mut out = vec![0.0f64; m * k];
    for i in 0..n {
        let brow = &bd[i * k..(i + 1) * k];
        for j in 0..m {
            let coeff = ad[i * m + j];
            let orow = &mut out[j * k..(j + 1) * k];
            for t in 0..k {
                orow[t] += coeff * brow[t];
            }
        }
    }
    Tensor::from_vec(out, &[m, k])
}

// a: [n, m], b: [m, k] -> a · b: [n, k]
fn matmul_nn(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    check_matrix(a)?;
    check_matrix(b)?;
    let (n, m) = (a.shape()[0], a.shape()[1]);
    let k = b.shape()[1];
    if b.shape()[0] != m {
        return Err(dim_error("a · b", a, b));
    }
    let ad = a.data();
    let bd = b.data();
    let mut out = vec![0.0f64; n * k];
    for i in 0..n {
        let orow = &mut out[i * k..(i + 1) * k];
        for j in 0..m {
            let coeff = ad[i * m + j];
            let brow = &bd[j * k..(j + 1) * k];
            for t in 0..k {
                orow[t] += coeff * brow[t];
            }
        }
    }
    Tensor::from_vec(out, &[n, k])
}

fn check_matrix(t: &Tensor) -> Result<()> {
    if t.rank() != 2 {
        return Err(Error::InvalidParameter {
            reason: format!("expected a matrix, got shape {:?}", t.shape()),
        });
    }
    Ok(())
}

fn dim_error(op: &str, a: &Tensor, b: &Tensor) -> Error {
    Error::InvalidParameter {
        reason: format!("dimension mismatch in {op}: {:?} vs {:?}", a.shape(), b.shape()),
    }
}
