//! Feed-forward binary classifier with exact reverse-mode gradients.
//!
//! The network maps `n` input features through dense hidden layers to a
//! single sigmoid output, so every prediction is a soft label in `(0, 1)`.
//! Gradients are available with respect to the inputs (for attacks) and the
//! parameters (for training); both come from the same cached [`ForwardTrace`].
//!
//! Weight matrices are stored row-major with shape `(out_dim, in_dim)`.

use std::fmt::Write as _;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Largest f64 strictly below one. Soft labels are clamped to
/// `[f64::MIN_POSITIVE, SOFT_LABEL_MAX]` so the open-interval contract holds
/// even when the sigmoid saturates.
const SOFT_LABEL_MAX: f64 = 1.0 - f64::EPSILON / 2.0;

/// Clamp applied to soft labels before taking logs in the cross-entropy.
pub const CE_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            other => Err(Error::Config(format!("unknown activation `{other}`"))),
        }
    }
}

/// Numerically stable logistic function, clamped to the open unit interval.
pub fn sigmoid(z: f64) -> f64 {
    let s = if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    };
    s.clamp(f64::MIN_POSITIVE, SOFT_LABEL_MAX)
}

/// Per-sample binary cross-entropy with the soft label clamped to
/// `[CE_CLAMP, 1 - CE_CLAMP]`.
pub fn cross_entropy(soft_label: f64, label: f64) -> f64 {
    let f = soft_label.clamp(CE_CLAMP, 1.0 - CE_CLAMP);
    -(label * f.ln() + (1.0 - label) * (1.0 - f).ln())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    dims: Vec<usize>,
    weights: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
    hidden_activation: Activation,
}

/// Per-layer weight and bias gradients.
pub type ParamGrads = (Vec<Array2<f64>>, Vec<Array1<f64>>);

/// Cached activations of one batch.
///
/// `activations[0]` is the input batch and `activations[l + 1]` the output
/// of layer `l`; `pre_activations[l]` is the affine output of layer `l`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub pre_activations: Vec<Array2<f64>>,
    pub activations: Vec<Array2<f64>>,
}

impl ForwardTrace {
    pub fn soft_labels(&self) -> ArrayView1<'_, f64> {
        self.activations
            .last()
            .expect("trace holds at least the input")
            .column(0)
    }

    pub fn batch_size(&self) -> usize {
        self.activations[0].nrows()
    }

    pub fn layer_count(&self) -> usize {
        self.pre_activations.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientPair {
    /// `d loss / d x`, one row per sample.
    pub input_grad: Array2<f64>,
    pub weight_grads: Vec<Array2<f64>>,
    pub bias_grads: Vec<Array1<f64>>,
}

impl GradientPair {
    pub fn is_finite(&self) -> bool {
        self.input_grad.iter().all(|v| v.is_finite())
            && self.weight_grads.iter().flatten().all(|v| v.is_finite())
            && self.bias_grads.iter().flatten().all(|v| v.is_finite())
    }
}

/// Scalar loss whose gradient [`MlpModel::backward_loss`] computes.
/// Both are summed over the batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    /// `sum_i CE(f(x_i), y_i)` with labels in {0, 1}.
    CrossEntropy,
    /// `sum_i s_i * f(x_i)` with signs in {-1, +1}.
    SignedSoftLabel,
}

impl MlpModel {
    /// Glorot-uniform weights and zero biases drawn from a seeded ChaCha stream.
    pub fn new_seeded(dims: &[usize], hidden_activation: Activation, seed: u64) -> Result<Self> {
        validate_dims(dims)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::with_capacity(dims.len() - 1);
        let mut biases = Vec::with_capacity(dims.len() - 1);
        for pair in dims.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let w = Array2::from_shape_simple_fn((fan_out, fan_in), || rng.gen_range(-limit..=limit));
            weights.push(w);
            biases.push(Array1::zeros(fan_out));
        }
        Ok(Self {
            dims: dims.to_vec(),
            weights,
            biases,
            hidden_activation,
        })
    }

    pub fn zeros(dims: &[usize], hidden_activation: Activation) -> Result<Self> {
        validate_dims(dims)?;
        let weights = dims
            .windows(2)
            .map(|p| Array2::zeros((p[1], p[0])))
            .collect();
        let biases = dims.windows(2).map(|p| Array1::zeros(p[1])).collect();
        Ok(Self {
            dims: dims.to_vec(),
            weights,
            biases,
            hidden_activation,
        })
    }

    pub fn from_parts(
        hidden_activation: Activation,
        weights: Vec<Array2<f64>>,
        biases: Vec<Array1<f64>>,
    ) -> Result<Self> {
        if weights.is_empty() || weights.len() != biases.len() {
            return Err(Error::Shape(format!(
                "{} weight matrices but {} bias vectors",
                weights.len(),
                biases.len()
            )));
        }
        let mut dims = vec![weights[0].ncols()];
        for (l, (w, b)) in weights.iter().zip(&biases).enumerate() {
            if w.ncols() != *dims.last().unwrap() {
                return Err(Error::Shape(format!(
                    "layer {l} expects {} inputs, previous layer produces {}",
                    w.ncols(),
                    dims.last().unwrap()
                )));
            }
            if b.len() != w.nrows() {
                return Err(Error::Shape(format!(
                    "layer {l} bias has {} entries for {} outputs",
                    b.len(),
                    w.nrows()
                )));
            }
            dims.push(w.nrows());
        }
        validate_dims(&dims)?;
        if weights.iter().flatten().chain(biases.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite model parameter".into()));
        }
        Ok(Self {
            dims,
            weights,
            biases,
            hidden_activation,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn layer_count(&self) -> usize {
        self.weights.len()
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden_activation
    }

    pub fn weights(&self) -> &[Array2<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Array1<f64>] {
        &self.biases
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    fn check_features(&self, features: &ArrayView2<'_, f64>) -> Result<()> {
        if features.ncols() != self.input_dim() {
            return Err(Error::Shape(format!(
                "model expects {} features, batch has {}",
                self.input_dim(),
                features.ncols()
            )));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite feature value".into()));
        }
        Ok(())
    }

    pub fn forward(&self, features: ArrayView2<'_, f64>) -> Result<ForwardTrace> {
        self.check_features(&features)?;
        let last = self.layer_count() - 1;
        let mut pre_activations = Vec::with_capacity(self.layer_count());
        let mut activations = Vec::with_capacity(self.layer_count() + 1);
        activations.push(features.to_owned());
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = activations[l].dot(&w.t());
            z += b;
            let act = self.hidden_activation;
            let a = if l == last {
                z.mapv(sigmoid)
            } else {
                z.mapv(|v| act.apply(v))
            };
            pre_activations.push(z);
            activations.push(a);
        }
        Ok(ForwardTrace {
            pre_activations,
            activations,
        })
    }

    /// Soft labels without keeping the intermediate activations.
    pub fn predict(&self, features: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        self.check_features(&features)?;
        let last = self.layer_count() - 1;
        let mut a = features.to_owned();
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = a.dot(&w.t());
            z += b;
            let act = self.hidden_activation;
            if l == last {
                z.mapv_inplace(sigmoid);
            } else {
                z.mapv_inplace(|v| act.apply(v));
            }
            a = z;
        }
        Ok(a.column(0).to_owned())
    }

    fn check_trace(&self, trace: &ForwardTrace) -> Result<()> {
        let ok = trace.layer_count() == self.layer_count()
            && trace.activations.len() == self.layer_count() + 1
            && trace
                .activations
                .iter()
                .zip(&self.dims)
                .all(|(a, &d)| a.ncols() == d && a.nrows() == trace.batch_size());
        if ok {
            Ok(())
        } else {
            Err(Error::Shape("trace was not produced by this model".into()))
        }
    }

    pub fn backward_loss(
        &self,
        trace: &ForwardTrace,
        loss_kind: LossKind,
        targets: ArrayView1<'_, f64>,
    ) -> Result<GradientPair> {
        self.check_trace(trace)?;
        if targets.len() != trace.batch_size() {
            return Err(Error::Shape(format!(
                "{} targets for a batch of {}",
                targets.len(),
                trace.batch_size()
            )));
        }
        let soft = trace.soft_labels();
        let logit_grad = match loss_kind {
            LossKind::CrossEntropy => {
                if targets.iter().any(|&y| y != 0.0 && y != 1.0) {
                    return Err(Error::Domain("cross-entropy labels must be 0 or 1".into()));
                }
                ce_logit_grad(soft, targets)
            }
            LossKind::SignedSoftLabel => {
                if targets.iter().any(|&s| s != 1.0 && s != -1.0) {
                    return Err(Error::Domain("soft-label signs must be -1 or +1".into()));
                }
                signed_logit_grad(soft, targets)
            }
        };
        self.backward_logits(trace, logit_grad.view())
    }

    /// Backpropagates `d loss / d logit` (one entry per sample) to both the
    /// inputs and the parameters.
    pub fn backward_logits(
        &self,
        trace: &ForwardTrace,
        logit_grad: ArrayView1<'_, f64>,
    ) -> Result<GradientPair> {
        self.check_trace(trace)?;
        let (input_grad, params) = self.backward_impl(trace, logit_grad, true, true)?;
        let (weight_grads, bias_grads) = params.expect("parameter gradients requested");
        Ok(GradientPair {
            input_grad: input_grad.expect("input gradient requested"),
            weight_grads,
            bias_grads,
        })
    }

    /// Only `d loss / d x`; skips the parameter gradients.
    pub fn input_gradient(
        &self,
        trace: &ForwardTrace,
        logit_grad: ArrayView1<'_, f64>,
    ) -> Result<Array2<f64>> {
        self.check_trace(trace)?;
        let (input_grad, _) = self.backward_impl(trace, logit_grad, true, false)?;
        Ok(input_grad.expect("input gradient requested"))
    }

    /// Only the parameter gradients; skips `d loss / d x`.
    pub fn parameter_gradient(
        &self,
        trace: &ForwardTrace,
        logit_grad: ArrayView1<'_, f64>,
    ) -> Result<ParamGrads> {
        self.check_trace(trace)?;
        let (_, params) = self.backward_impl(trace, logit_grad, false, true)?;
        Ok(params.expect("parameter gradients requested"))
    }

    #[allow(clippy::type_complexity)]
    fn backward_impl(
        &self,
        trace: &ForwardTrace,
        logit_grad: ArrayView1<'_, f64>,
        want_input: bool,
        want_params: bool,
    ) -> Result<(Option<Array2<f64>>, Option<(Vec<Array2<f64>>, Vec<Array1<f64>>)>)> {
        if logit_grad.len() != trace.batch_size() {
            return Err(Error::Shape(format!(
                "{} logit gradients for a batch of {}",
                logit_grad.len(),
                trace.batch_size()
            )));
        }
        let layers = self.layer_count();
        let mut weight_grads = Vec::with_capacity(if want_params { layers } else { 0 });
        let mut bias_grads = Vec::with_capacity(if want_params { layers } else { 0 });
        let mut delta = logit_grad.to_owned().insert_axis(Axis(1));
        let mut input_grad = None;
        for l in (0..layers).rev() {
            if want_params {
                weight_grads.push(delta.t().dot(&trace.activations[l]));
                bias_grads.push(delta.sum_axis(Axis(0)));
            }
            if l == 0 {
                if want_input {
                    input_grad = Some(delta.dot(&self.weights[0]));
                }
                break;
            }
            let mut upstream = delta.dot(&self.weights[l]);
            let act = self.hidden_activation;
            Zip::from(&mut upstream)
                .and(&trace.pre_activations[l - 1])
                .and(&trace.activations[l])
                .for_each(|g, &z, &a| *g *= act.derivative(z, a));
            delta = upstream;
        }
        weight_grads.reverse();
        bias_grads.reverse();
        Ok((input_grad, want_params.then_some((weight_grads, bias_grads))))
    }

    /// Plain gradient step `theta <- theta - lr * grad`.
    pub fn sgd_step(&self, grads: &GradientPair, lr: f64) -> Result<MlpModel> {
        let mut next = self.clone();
        next.apply_update(&grads.weight_grads, &grads.bias_grads, lr)?;
        Ok(next)
    }

    pub(crate) fn apply_update(
        &mut self,
        weight_grads: &[Array2<f64>],
        bias_grads: &[Array1<f64>],
        lr: f64,
    ) -> Result<()> {
        if !(lr >= 0.0 && lr.is_finite()) {
            return Err(Error::Config(format!("learning rate must be finite and >= 0, got {lr}")));
        }
        if weight_grads.len() != self.weights.len() || bias_grads.len() != self.biases.len() {
            return Err(Error::Shape("gradient layer count does not match model".into()));
        }
        for (l, (gw, gb)) in weight_grads.iter().zip(bias_grads).enumerate() {
            if gw.dim() != self.weights[l].dim() || gb.len() != self.biases[l].len() {
                return Err(Error::Shape(format!("gradient shape mismatch at layer {l}")));
            }
            if gw.iter().chain(gb.iter()).any(|v| !v.is_finite()) {
                return Err(Error::Numeric(format!("non-finite gradient at layer {l}")));
            }
        }
        if lr == 0.0 {
            return Ok(());
        }
        for (l, (gw, gb)) in weight_grads.iter().zip(bias_grads).enumerate() {
            self.weights[l].scaled_add(-lr, gw);
            self.biases[l].scaled_add(-lr, gb);
        }
        Ok(())
    }

    /// Text form: a `mlp v1 <dims...> <activation>` header, then one line per
    /// tensor (W0, b0, W1, b1, ...) with 17 significant digits per value.
    pub fn to_text(&self) -> String {
        let mut out = String::from("mlp v1");
        for d in &self.dims {
            write!(out, " {d}").unwrap();
        }
        writeln!(out, " {}", self.hidden_activation.name()).unwrap();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            write_values(&mut out, w.iter());
            write_values(&mut out, b.iter());
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |m: String| Error::parse("<model>", m);
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("empty model file".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() < 5 || fields[0] != "mlp" || fields[1] != "v1" {
            return Err(bad(format!("bad header `{header}`")));
        }
        let activation: Activation = fields[fields.len() - 1]
            .parse()
            .map_err(|_| bad(format!("bad activation in `{header}`")))?;
        let dims = fields[2..fields.len() - 1]
            .iter()
            .map(|s| s.parse::<usize>().map_err(|_| bad(format!("bad dimension `{s}`"))))
            .collect::<Result<Vec<_>>>()?;
        validate_dims(&dims).map_err(|e| bad(e.to_string()))?;
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for pair in dims.windows(2) {
            let w = parse_values(lines.next(), pair[1] * pair[0])?;
            let b = parse_values(lines.next(), pair[1])?;
            weights.push(
                Array2::from_shape_vec((pair[1], pair[0]), w).map_err(|e| bad(e.to_string()))?,
            );
            biases.push(Array1::from(b));
        }
        if let Some(extra) = lines.find(|l| !l.trim().is_empty()) {
            return Err(bad(format!("unexpected trailing line `{extra}`")));
        }
        Self::from_parts(activation, weights, biases)
    }
}

fn validate_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 {
        return Err(Error::Shape("a model needs at least an input and an output layer".into()));
    }
    if dims.contains(&0) {
        return Err(Error::Shape("layer widths must be positive".into()));
    }
    if *dims.last().unwrap() != 1 {
        return Err(Error::Shape("binary classifier must end in a single output".into()));
    }
    Ok(())
}

fn write_values<'a>(out: &mut String, values: impl Iterator<Item = &'a f64>) {
    let mut first = true;
    for v in values {
        if !first {
            out.push(' ');
        }
        first = false;
        write!(out, "{v:.16e}").unwrap();
    }
    out.push('\n');
}

fn parse_values(line: Option<&str>, expected: usize) -> Result<Vec<f64>> {
    let line = line.ok_or_else(|| Error::parse("<model>", "truncated parameter list"))?;
    let values = line
        .split_whitespace()
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| Error::parse("<model>", format!("bad value `{s}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    if values.len() != expected {
        return Err(Error::parse(
            "<model>",
            format!("expected {expected} values, found {}", values.len()),
        ));
    }
    Ok(values)
}

/// `d CE / d logit = f - y`, exact at every interior soft label.
pub fn ce_logit_grad(soft: ArrayView1<'_, f64>, labels: ArrayView1<'_, f64>) -> Array1<f64> {
    Zip::from(soft).and(labels).map_collect(|&f, &y| f - y)
}

/// `d (s f) / d logit = s f (1 - f)`.
pub fn signed_logit_grad(soft: ArrayView1<'_, f64>, signs: ArrayView1<'_, f64>) -> Array1<f64> {
    Zip::from(soft)
        .and(signs)
        .map_collect(|&f, &s| s * f * (1.0 - f))
}
