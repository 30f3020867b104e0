use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{MonitoringSample, FEATURE_COUNT};
use crate::error::{Error, Result};

const BLOB_MAGIC: &[u8; 4] = b"AICM";
const INIT_RANGE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub embed_dim: usize,
    /// Hinge margin between mean negative and mean positive similarity.
    pub margin: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Anchors per gradient step; `None` means full batch.
    pub anchors_per_batch: Option<usize>,
    pub negatives_per_anchor: usize,
    pub positives_per_anchor: usize,
    /// Rescales a step whose gradient l2 norm exceeds this value.
    pub grad_clip: Option<f64>,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            input_dim: FEATURE_COUNT,
            hidden_dims: vec![16, 16],
            embed_dim: 8,
            margin: 0.1,
            learning_rate: 0.01,
            epochs: 50,
            anchors_per_batch: None,
            negatives_per_anchor: 5,
            positives_per_anchor: 3,
            grad_clip: Some(1.0),
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("model: {m}")));
        if self.input_dim == 0 || self.embed_dim == 0 {
            return bad("input_dim and embed_dim must be >= 1");
        }
        if self.hidden_dims.len() != 2 || self.hidden_dims.contains(&0) {
            return bad("exactly two non-empty hidden layers are required");
        }
        if !(self.margin.is_finite() && self.margin >= 0.0) {
            return bad("margin must be >= 0");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate must be > 0");
        }
        if self.negatives_per_anchor == 0 || self.positives_per_anchor == 0 {
            return bad("negatives_per_anchor and positives_per_anchor must be >= 1");
        }
        if self.anchors_per_batch == Some(0) {
            return bad("anchors_per_batch must be >= 1");
        }
        if self.grad_clip.is_some_and(|c| !(c.is_finite() && c > 0.0)) {
            return bad("grad_clip must be > 0");
        }
        Ok(())
    }

    /// Layer widths from input to embedding.
    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.input_dim];
        d.extend(&self.hidden_dims);
        d.push(self.embed_dim);
        d
    }
}

/// Min-max scaling constants fitted on a training trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl FeatureScaler {
    pub fn identity(dim: usize) -> Self {
        FeatureScaler {
            min: vec![-1.0; dim],
            max: vec![1.0; dim],
        }
    }

    pub fn fit<'a>(samples: impl IntoIterator<Item = &'a MonitoringSample>) -> Result<Self> {
        let mut min = vec![f64::INFINITY; FEATURE_COUNT];
        let mut max = vec![f64::NEG_INFINITY; FEATURE_COUNT];
        let mut any = false;
        for s in samples {
            any = true;
            for (j, v) in s.features().into_iter().enumerate() {
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        if !any {
            return Err(Error::Empty("scaler training samples"));
        }
        Ok(FeatureScaler { min, max })
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    pub fn apply(&self, raw: &[f64], out: &mut [f64]) {
        for (j, (o, &x)) in out.iter_mut().zip(raw).enumerate() {
            let span = self.max[j] - self.min[j];
            *o = if span > 0.0 {
                2.0 * (x - self.min[j]) / span - 1.0
            } else {
                0.0
            };
        }
    }
}

/// Fully connected layer, weights stored row-major as `outputs x inputs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        DenseLayer {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    fn affine(&self, x: &[f64], out: &mut [f64]) {
        for (o, (row, b)) in out
            .iter_mut()
            .zip(self.weights.chunks_exact(self.inputs).zip(&self.bias))
        {
            *o = b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding(pub Vec<f64>);

impl Embedding {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Unweighted mean of a non-empty set of embeddings.
    pub fn mean(items: &[Embedding]) -> Result<Embedding> {
        let first = items.first().ok_or(Error::Empty("embeddings"))?;
        let mut acc = vec![0.0; first.dim()];
        for e in items {
            if e.dim() != acc.len() {
                return Err(Error::DimensionMismatch {
                    expected: acc.len(),
                    actual: e.dim(),
                });
            }
            for (a, v) in acc.iter_mut().zip(&e.0) {
                *a += v;
            }
        }
        let n = items.len() as f64;
        Ok(Embedding(acc.into_iter().map(|v| v / n).collect()))
    }
}

/// Weights of the four-layer embedding network plus its input scaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub layers: Vec<DenseLayer>,
    pub scaler: FeatureScaler,
}

/// Activations kept from a forward pass for backpropagation.
#[derive(Debug, Clone)]
pub(crate) struct ForwardTrace {
    /// `acts[0]` is the scaled input, `acts[k]` the output of layer `k-1`.
    pub acts: Vec<Vec<f64>>,
}

impl ForwardTrace {
    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("non-empty trace")
    }
}

impl ModelParams {
    /// Uniform init in `[-0.1, 0.1]`.
    pub fn init<R: Rng + ?Sized>(
        cfg: &ModelConfig,
        scaler: FeatureScaler,
        rng: &mut R,
    ) -> Result<Self> {
        cfg.validate()?;
        let mut p = Self::zeros(cfg, scaler)?;
        for layer in &mut p.layers {
            for w in &mut layer.weights {
                *w = rng.random_range(-INIT_RANGE..=INIT_RANGE);
            }
        }
        Ok(p)
    }

    pub fn zeros(cfg: &ModelConfig, scaler: FeatureScaler) -> Result<Self> {
        cfg.validate()?;
        if scaler.dim() != cfg.input_dim {
            return Err(Error::DimensionMismatch {
                expected: cfg.input_dim,
                actual: scaler.dim(),
            });
        }
        let dims = cfg.dims();
        let layers = dims
            .windows(2)
            .map(|w| DenseLayer::zeros(w[0], w[1]))
            .collect();
        Ok(ModelParams { layers, scaler })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn embed_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.outputs)
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.input_dim()];
        d.extend(self.layers.iter().map(|l| l.outputs));
        d
    }

    pub fn same_shape(&self, other: &ModelParams) -> bool {
        self.dims() == other.dims()
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias))
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    /// Checks shape consistency, the four-layer layout and finiteness.
    pub fn validate(&self) -> Result<()> {
        if self.layers.len() != 3 {
            return Err(Error::ShapeMismatch(format!(
                "{} weight layers, expected 3",
                self.layers.len()
            )));
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.weights.len() != l.inputs * l.outputs || l.bias.len() != l.outputs {
                return Err(Error::ShapeMismatch(format!(
                    "layer {i} buffers do not match its shape"
                )));
            }
            if i > 0 && self.layers[i - 1].outputs != l.inputs {
                return Err(Error::ShapeMismatch(format!(
                    "layer {i} input width differs from layer {} output",
                    i - 1
                )));
            }
        }
        if self.scaler.dim() != self.input_dim() || self.scaler.max.len() != self.input_dim() {
            return Err(Error::ShapeMismatch(
                "scaler width differs from input width".into(),
            ));
        }
        if !self.values().all(|v| v.is_finite()) {
            return Err(Error::ShapeMismatch("non-finite parameter".into()));
        }
        Ok(())
    }

    pub(crate) fn forward_trace(&self, raw: &[f64]) -> Result<ForwardTrace> {
        if raw.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                actual: raw.len(),
            });
        }
        let mut x = vec![0.0; raw.len()];
        self.scaler.apply(raw, &mut x);
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x);
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut out = vec![0.0; layer.outputs];
            layer.affine(acts.last().expect("input pushed"), &mut out);
            if i < last {
                out.iter_mut().for_each(|v| *v = v.tanh());
            }
            acts.push(out);
        }
        Ok(ForwardTrace { acts })
    }

    /// Embeds a raw feature vector (unscaled).
    pub fn embed_features(&self, raw: &[f64]) -> Result<Embedding> {
        Ok(Embedding(
            self.forward_trace(raw)?.acts.pop().expect("output"),
        ))
    }

    pub fn embed(&self, sample: &MonitoringSample) -> Result<Embedding> {
        self.embed_features(&sample.features())
    }

    /// Accumulates parameter gradients for one input given `dL/dz`.
    pub(crate) fn backward(&self, trace: &ForwardTrace, grad_out: &[f64], grads: &mut ModelParams) {
        let mut delta = grad_out.to_vec();
        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            let input = &trace.acts[k];
            let g = &mut grads.layers[k];
            for (o, d) in delta.iter().enumerate() {
                g.bias[o] += d;
                let row = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (w, x) in row.iter_mut().zip(input) {
                    *w += d * x;
                }
            }
            if k == 0 {
                break;
            }
            // Input of layer k is a tanh output.
            let mut next = vec![0.0; layer.inputs];
            for (o, d) in delta.iter().enumerate() {
                let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (n, w) in next.iter_mut().zip(row) {
                    *n += w * d;
                }
            }
            for (n, a) in next.iter_mut().zip(input) {
                *n *= 1.0 - a * a;
            }
            delta = next;
        }
    }

    /// Same-shape parameter set with every weight and bias zeroed.
    pub fn zeroed_like(&self) -> ModelParams {
        let mut z = self.clone();
        z.values_mut().for_each(|v| *v = 0.0);
        z
    }

    /// Flat little-endian float64 stream prefixed by a shape header:
    /// `"AICM"`, u32 dimension count, u32 per dimension, then scaler minima,
    /// scaler maxima, and each layer's weights followed by its bias.
    pub fn to_blob(&self) -> Vec<u8> {
        let dims = self.dims();
        let mut out = Vec::with_capacity(
            8 + 4 * dims.len() + 8 * (self.param_count() + 2 * self.input_dim()),
        );
        out.extend_from_slice(BLOB_MAGIC);
        out.extend_from_slice(&(dims.len() as u32).to_le_bytes());
        for d in &dims {
            out.extend_from_slice(&(*d as u32).to_le_bytes());
        }
        for v in self
            .scaler
            .min
            .iter()
            .chain(&self.scaler.max)
            .chain(self.values())
        {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_blob(bytes: &[u8]) -> Result<Self> {
        let err = |m: &str| Error::Blob(m.to_string());
        if bytes.len() < 8 || &bytes[..4] != BLOB_MAGIC {
            return Err(err("missing header"));
        }
        let count = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
        if count != 4 {
            return Err(err("expected 4 layer widths"));
        }
        let header_end = 8 + 4 * count;
        if bytes.len() < header_end {
            return Err(err("truncated header"));
        }
        let dims: Vec<usize> = bytes[8..header_end]
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().expect("4 bytes")) as usize)
            .collect();
        if dims.contains(&0) {
            return Err(err("zero layer width"));
        }
        let body = &bytes[header_end..];
        if !body.len().is_multiple_of(8) {
            return Err(err("body is not a whole number of f64 values"));
        }
        let mut floats = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
        let params_len: usize = dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        if body.len() / 8 != 2 * dims[0] + params_len {
            return Err(err("body length does not match header"));
        }
        let min: Vec<f64> = floats.by_ref().take(dims[0]).collect();
        let max: Vec<f64> = floats.by_ref().take(dims[0]).collect();
        let mut layers = Vec::new();
        for w in dims.windows(2) {
            let weights: Vec<f64> = floats.by_ref().take(w[0] * w[1]).collect();
            let bias: Vec<f64> = floats.by_ref().take(w[1]).collect();
            layers.push(DenseLayer {
                inputs: w[0],
                outputs: w[1],
                weights,
                bias,
            });
        }
        let p = ModelParams {
            layers,
            scaler: FeatureScaler { min, max },
        };
        p.validate()?;
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn small() -> ModelParams {
        let cfg = ModelConfig::default();
        ModelParams::init(&cfg, FeatureScaler::identity(5), &mut seeded(1)).unwrap()
    }

    #[test]
    fn zero_weights_give_bias_embedding() {
        let cfg = ModelConfig::default();
        let mut p = ModelParams::zeros(&cfg, FeatureScaler::identity(5)).unwrap();
        p.layers[2].bias = (0..8).map(f64::from).collect();
        let a = p.embed_features(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let b = p.embed_features(&[-7.0, 0.0, 0.5, 9.0, 1.0]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.0, p.layers[2].bias);
    }

    #[test]
    fn embedding_is_deterministic_and_sized() {
        let p = small();
        let x = [0.3, 0.1, 0.9, 0.5, 0.2];
        assert_eq!(p.embed_features(&x).unwrap(), p.embed_features(&x).unwrap());
        assert_eq!(p.embed_features(&x).unwrap().dim(), 8);
        assert!(matches!(
            p.embed_features(&[1.0, 2.0]),
            Err(Error::DimensionMismatch {
                expected: 5,
                actual: 2
            })
        ));
    }

    #[test]
    fn blob_round_trip_and_rejects_garbage() {
        let p = small();
        let blob = p.to_blob();
        assert_eq!(ModelParams::from_blob(&blob).unwrap(), p);
        assert!(ModelParams::from_blob(&blob[..blob.len() - 3]).is_err());
        assert!(ModelParams::from_blob(b"nope").is_err());
    }

    #[test]
    fn config_validation() {
        let mut c = ModelConfig::default();
        c.validate().unwrap();
        c.hidden_dims = vec![16];
        assert!(c.validate().is_err());
        let c = ModelConfig {
            learning_rate: 0.0,
            ..ModelConfig::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn four_layer_layout() {
        let p = small();
        assert_eq!(p.dims(), vec![5, 16, 16, 8]);
        p.validate().unwrap();
        let mut bad = p.clone();
        bad.layers.pop();
        assert!(bad.validate().is_err());
    }
}
