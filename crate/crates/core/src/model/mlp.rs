use rand::Rng;

use super::ModelError;

/// Fully connected layer, weights row-major `rows x cols` (output x input).
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(rows: usize, cols: usize) -> Dense {
        Dense {
            rows,
            cols,
            weights: vec![0.0; rows * cols],
            bias: vec![0.0; rows],
        }
    }

    /// Uniform in `[-1/sqrt(cols), 1/sqrt(cols)]` for weights and bias.
    pub fn init_uniform<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Dense {
        let bound = 1.0 / (cols as f64).sqrt();
        let mut layer = Dense::zeros(rows, cols);
        for w in layer.weights.iter_mut().chain(layer.bias.iter_mut()) {
            *w = rng.random_range(-bound..=bound);
        }
        layer
    }

    #[inline]
    pub fn weight(&self, r: usize, c: usize) -> f64 {
        self.weights[r * self.cols + c]
    }

    fn apply(&self, input: &[f64], out: &mut Vec<f64>) {
        debug_assert_eq!(input.len(), self.cols);
        out.clear();
        out.extend(
            self.weights
                .chunks_exact(self.cols)
                .zip(&self.bias)
                .map(|(row, b)| row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>() + b),
        );
    }

    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.weights.iter().chain(self.bias.iter())
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights.iter_mut().chain(self.bias.iter_mut())
    }

    pub fn zeroed(&self) -> Dense {
        Dense::zeros(self.rows, self.cols)
    }
}

/// Hidden layers 1..3 and the two-unit output head.
pub type Layers = [Dense; 4];

pub const LAYER_NAMES: [&str; 4] = ["hidden1", "hidden2", "hidden3", "output"];

pub fn zeros_like(layers: &Layers) -> Layers {
    [
        layers[0].zeroed(),
        layers[1].zeroed(),
        layers[2].zeroed(),
        layers[3].zeroed(),
    ]
}

/// Input width rounded up to a multiple of 4.
pub fn padded_width(input_dim: usize) -> usize {
    input_dim.div_ceil(4) * 4
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParameters {
    /// Width of the embedding fed in; zero-padded up to `hidden_width()`.
    pub input_dim: usize,
    pub layers: Layers,
    pub threshold: f64,
    pub embedder_id: String,
    /// Free-form provenance (tool version, config hash).
    pub metadata: String,
}

impl MlpParameters {
    pub fn layer_shapes(input_dim: usize) -> [(usize, usize); 4] {
        let h = padded_width(input_dim);
        [(h, h), (h / 2, h), (h / 4, h / 2), (2, h / 4)]
    }

    pub fn zeros(input_dim: usize, embedder_id: &str) -> MlpParameters {
        let shapes = Self::layer_shapes(input_dim);
        MlpParameters {
            input_dim,
            layers: shapes.map(|(r, c)| Dense::zeros(r, c)),
            threshold: 0.5,
            embedder_id: embedder_id.to_string(),
            metadata: String::new(),
        }
    }

    pub fn init<R: Rng>(input_dim: usize, embedder_id: &str, rng: &mut R) -> MlpParameters {
        let shapes = Self::layer_shapes(input_dim);
        let layers = [
            Dense::init_uniform(shapes[0].0, shapes[0].1, rng),
            Dense::init_uniform(shapes[1].0, shapes[1].1, rng),
            Dense::init_uniform(shapes[2].0, shapes[2].1, rng),
            Dense::init_uniform(shapes[3].0, shapes[3].1, rng),
        ];
        MlpParameters {
            input_dim,
            layers,
            threshold: 0.5,
            embedder_id: embedder_id.to_string(),
            metadata: String::new(),
        }
    }

    pub fn hidden_width(&self) -> usize {
        padded_width(self.input_dim)
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.values().all(|v| v.is_finite())) && self.threshold.is_finite()
    }

    /// Class probabilities `(p0, p1)` in inference mode.
    pub fn predict(&self, x: &[f64]) -> Result<(f64, f64), ModelError> {
        forward(self, x, None)
    }

    pub fn predict_p1(&self, x: &[f64]) -> Result<f64, ModelError> {
        self.predict(x).map(|(_, p1)| p1)
    }
}

/// Inverted-dropout masks for the three hidden layers: each entry is either
/// 0 or `1 / (1 - rate)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMasks {
    pub layers: [Vec<f64>; 3],
}

impl DropoutMasks {
    pub fn sample<R: Rng>(params: &MlpParameters, rate: f64, rng: &mut R) -> DropoutMasks {
        let keep = 1.0 - rate;
        let scale = 1.0 / keep;
        let mut draw = |n: usize| -> Vec<f64> {
            (0..n)
                .map(|_| if rng.random::<f64>() < keep { scale } else { 0.0 })
                .collect()
        };
        DropoutMasks {
            layers: [
                draw(params.layers[0].rows),
                draw(params.layers[1].rows),
                draw(params.layers[2].rows),
            ],
        }
    }

    pub fn ones(params: &MlpParameters) -> DropoutMasks {
        DropoutMasks {
            layers: [
                vec![1.0; params.layers[0].rows],
                vec![1.0; params.layers[1].rows],
                vec![1.0; params.layers[2].rows],
            ],
        }
    }
}

/// Activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub input: Vec<f64>,
    /// tanh outputs before masking.
    pub tanh: [Vec<f64>; 3],
    /// Layer outputs after masking (what the next layer sees).
    pub hidden: [Vec<f64>; 3],
    pub logits: [f64; 2],
    pub probs: (f64, f64),
}

pub fn softmax2(logits: [f64; 2]) -> (f64, f64) {
    let m = logits[0].max(logits[1]);
    let e0 = (logits[0] - m).exp();
    let e1 = (logits[1] - m).exp();
    let s = e0 + e1;
    (e0 / s, e1 / s)
}

fn pad_input(params: &MlpParameters, x: &[f64]) -> Result<Vec<f64>, ModelError> {
    if x.len() != params.input_dim {
        return Err(ModelError::DimensionMismatch {
            expected: params.input_dim,
            found: x.len(),
        });
    }
    let mut input = x.to_vec();
    input.resize(params.hidden_width(), 0.0);
    Ok(input)
}

pub fn forward_cached(
    params: &MlpParameters,
    x: &[f64],
    masks: Option<&DropoutMasks>,
) -> Result<ForwardCache, ModelError> {
    let input = pad_input(params, x)?;
    let mut tanh: [Vec<f64>; 3] = Default::default();
    let mut hidden: [Vec<f64>; 3] = Default::default();
    for k in 0..3 {
        let prev = if k == 0 { &input } else { &hidden[k - 1] };
        let mut z = Vec::with_capacity(params.layers[k].rows);
        params.layers[k].apply(prev, &mut z);
        z.iter_mut().for_each(|v| *v = v.tanh());
        let h = match masks {
            Some(m) => z.iter().zip(&m.layers[k]).map(|(a, s)| a * s).collect(),
            None => z.clone(),
        };
        tanh[k] = z;
        hidden[k] = h;
    }
    let mut out = Vec::with_capacity(2);
    params.layers[3].apply(&hidden[2], &mut out);
    let logits = [out[0], out[1]];
    Ok(ForwardCache {
        input,
        tanh,
        hidden,
        logits,
        probs: softmax2(logits),
    })
}

/// `(p0, p1)`; pass masks only in training mode.
pub fn forward(params: &MlpParameters, x: &[f64], masks: Option<&DropoutMasks>) -> Result<(f64, f64), ModelError> {
    forward_cached(params, x, masks).map(|c| c.probs)
}

pub const PROB_CLAMP: f64 = 1e-12;

/// Binary cross-entropy on `p1`, clamped to `[1e-12, 1 - 1e-12]`.
pub fn bce_loss(p1: f64, label: u8) -> f64 {
    let p = p1.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    if label == 1 {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// Gradient of the mean batch loss w.r.t. every parameter, plus that loss.
/// `masks[i]` belongs to `batch[i]`; `None` means inference mode throughout.
pub fn backward(
    params: &MlpParameters,
    batch: &[(&[f64], u8)],
    masks: Option<&[DropoutMasks]>,
) -> Result<(Layers, f64), ModelError> {
    let mut grads = zeros_like(&params.layers);
    let mut total_loss = 0.0;
    for (i, &(x, y)) in batch.iter().enumerate() {
        let mask = masks.map(|m| &m[i]);
        let cache = forward_cached(params, x, mask)?;
        total_loss += bce_loss(cache.probs.1, y);

        // d loss / d logits for softmax + cross-entropy
        let err = cache.probs.1 - f64::from(y);
        let mut delta = vec![-err, err];
        let mut k = 3;
        loop {
            let layer = &params.layers[k];
            let input = if k == 0 { &cache.input } else { &cache.hidden[k - 1] };
            let g = &mut grads[k];
            for (r, d) in delta.iter().enumerate() {
                if *d == 0.0 {
                    continue;
                }
                g.bias[r] += d;
                let row = &mut g.weights[r * layer.cols..(r + 1) * layer.cols];
                for (gw, xin) in row.iter_mut().zip(input) {
                    *gw += d * xin;
                }
            }
            if k == 0 {
                break;
            }
            // back through layer k's weights, then mask and tanh of layer k-1
            let prev = k - 1;
            let mut next = vec![0.0; layer.cols];
            for (r, d) in delta.iter().enumerate() {
                if *d == 0.0 {
                    continue;
                }
                let row = &layer.weights[r * layer.cols..(r + 1) * layer.cols];
                for (n, w) in next.iter_mut().zip(row) {
                    *n += d * w;
                }
            }
            for (j, n) in next.iter_mut().enumerate() {
                let t = cache.tanh[prev][j];
                let m = mask.map_or(1.0, |m| m.layers[prev][j]);
                *n *= m * (1.0 - t * t);
            }
            delta = next;
            k = prev;
        }
    }
    let n = batch.len().max(1) as f64;
    for layer in grads.iter_mut() {
        layer.values_mut().for_each(|v| *v /= n);
    }
    Ok((grads, total_loss / n))
}

/// Mean inference-mode loss over a data set.
pub fn mean_loss(params: &MlpParameters, data: &[(&[f64], u8)]) -> Result<f64, ModelError> {
    let mut total = 0.0;
    for &(x, y) in data {
        total += bce_loss(params.predict_p1(x)?, y);
    }
    Ok(total / data.len().max(1) as f64)
}
