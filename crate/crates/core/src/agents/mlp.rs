use std::collections::HashMap;

use rand::Rng;

use crate::env::{Action, EnvConfig, Transition};

use super::{AgentError, QValues};

/// Input, two hidden ReLU layers, one linear output per action.
pub const DEFAULT_LAYERS: [usize; 4] = [2, 64, 64, Action::COUNT];

/// Dense layer; `w` is row-major `n_out x n_in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub n_in: usize,
    pub n_out: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Layer {
    pub fn zeros(n_in: usize, n_out: usize) -> Self {
        Layer {
            n_in,
            n_out,
            w: vec![0.0; n_in * n_out],
            b: vec![0.0; n_out],
        }
    }

    fn row(&self, j: usize) -> &[f64] {
        &self.w[j * self.n_in..(j + 1) * self.n_in]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub layers: Vec<Layer>,
}

/// Gradient with the same shapes as the parameters.
pub type Gradient = MlpParams;

impl MlpParams {
    pub fn zeros(sizes: &[usize]) -> Self {
        assert!(
            sizes.len() >= 2,
            "need at least an input and an output size"
        );
        MlpParams {
            layers: sizes.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect(),
        }
    }

    /// Weights uniform in `±sqrt(6 / fan_in)`, biases zero.
    pub fn init<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Self {
        let mut p = Self::zeros(sizes);
        for layer in &mut p.layers {
            let bound = (6.0 / layer.n_in as f64).sqrt();
            for w in &mut layer.w {
                *w = rng.gen_range(-bound..bound);
            }
        }
        p
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.layers[0].n_in];
        s.extend(self.layers.iter().map(|l| l.n_out));
        s
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.w.iter().chain(&l.b).all(|v| v.is_finite()))
    }

    /// Flat view over all parameters, layer by layer, weights before biases.
    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.layers
            .iter()
            .flat_map(|l| l.w.iter().chain(l.b.iter()))
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.w.iter_mut().chain(l.b.iter_mut()))
    }

    /// Accumulates `d(output) -> d(params)` into `grad` given the stored
    /// activations and the output-layer delta.
    fn backward(
        &self,
        acts: &[Vec<f64>],
        out_delta: &[f64],
        grad: &mut Gradient,
        scratch: &mut [Vec<f64>; 2],
    ) {
        let [delta, prev_delta] = scratch;
        delta.clear();
        delta.extend_from_slice(out_delta);
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let g = &mut grad.layers[l];
            let x = &acts[l];
            for (j, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                g.b[j] += d;
                axpy(&mut g.w[j * layer.n_in..(j + 1) * layer.n_in], d, x);
            }
            if l == 0 {
                break;
            }
            prev_delta.clear();
            prev_delta.resize(layer.n_in, 0.0);
            for (j, &d) in delta.iter().enumerate() {
                if d != 0.0 {
                    axpy(prev_delta, d, layer.row(j));
                }
            }
            for (pd, &a) in prev_delta.iter_mut().zip(x) {
                if a <= 0.0 {
                    *pd = 0.0;
                }
            }
            std::mem::swap(delta, prev_delta);
        }
    }
}

#[inline]
fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Column-major copy of the weights: the forward pass then becomes a run
/// of contiguous axpys that skip inactive (zero) inputs.
struct Transposed {
    wt: Vec<Vec<f64>>,
}

impl Transposed {
    fn new(p: &MlpParams) -> Self {
        let wt = p
            .layers
            .iter()
            .map(|l| {
                let mut t = vec![0.0; l.w.len()];
                for j in 0..l.n_out {
                    for k in 0..l.n_in {
                        t[k * l.n_out + j] = l.w[j * l.n_in + k];
                    }
                }
                t
            })
            .collect();
        Transposed { wt }
    }

    fn forward(&self, p: &MlpParams, input: &[f64], acts: &mut Vec<Vec<f64>>) {
        acts.resize(p.layers.len() + 1, Vec::new());
        acts[0].clear();
        acts[0].extend_from_slice(input);
        let last = p.layers.len() - 1;
        for (l, layer) in p.layers.iter().enumerate() {
            let (prev, rest) = acts.split_at_mut(l + 1);
            let x = &prev[l];
            let out = &mut rest[0];
            out.clear();
            out.extend_from_slice(&layer.b);
            for (k, &xk) in x.iter().enumerate() {
                if xk != 0.0 {
                    axpy(out, xk, &self.wt[l][k * layer.n_out..(k + 1) * layer.n_out]);
                }
            }
            if l < last {
                for z in out.iter_mut() {
                    *z = z.max(0.0);
                }
            }
        }
    }

    fn q_values(&self, p: &MlpParams, input: &[f64], acts: &mut Vec<Vec<f64>>) -> QValues {
        self.forward(p, input, acts);
        let mut q = [0.0; Action::COUNT];
        q.copy_from_slice(&acts[p.layers.len()][..Action::COUNT]);
        q
    }
}

/// Action values for a normalised state.
pub fn mlp_forward(p: &MlpParams, state: [f64; 2]) -> QValues {
    Transposed::new(p).q_values(p, &state, &mut Vec::new())
}

/// One regression sample with its target held fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DqnSample {
    pub input: [f64; 2],
    pub action: Action,
    pub target: f64,
}

fn key(input: [f64; 2]) -> [u64; 2] {
    [input[0].to_bits(), input[1].to_bits()]
}

/// Builds regression samples for a batch: `r + gamma * max_a Q(s', a)`,
/// with the bootstrap dropped on terminal transitions.
pub fn dqn_samples(
    p: &MlpParams,
    env: &EnvConfig,
    batch: &[Transition],
    gamma: f64,
) -> Vec<DqnSample> {
    // the lattice is small, so batches repeat states a lot
    let tp = Transposed::new(p);
    let mut acts = Vec::new();
    let mut cache: HashMap<[u64; 2], f64> = HashMap::new();
    batch
        .iter()
        .map(|t| {
            let bootstrap = if t.done {
                0.0
            } else {
                let x = env.normalize(t.s_next);
                *cache.entry(key(x)).or_insert_with(|| {
                    tp.q_values(p, &x, &mut acts)
                        .into_iter()
                        .fold(f64::NEG_INFINITY, f64::max)
                })
            };
            DqnSample {
                input: env.normalize(t.s),
                action: t.a,
                target: t.r + gamma * bootstrap,
            }
        })
        .collect()
}

/// Mean of `0.5 * (Q(s, a) - target)^2` over the samples and its gradient.
///
/// Samples sharing an input are backpropagated together with their output
/// deltas summed.
pub fn sample_loss_gradient(
    p: &MlpParams,
    samples: &[DqnSample],
) -> Result<(f64, Gradient), AgentError> {
    if samples.is_empty() {
        return Err(AgentError::EmptyBatch);
    }
    let n = samples.len() as f64;
    let tp = Transposed::new(p);
    let mut index: HashMap<[u64; 2], usize> = HashMap::new();
    // (activations, summed output delta) per distinct input, first-seen order
    let mut groups: Vec<(Vec<Vec<f64>>, Vec<f64>)> = Vec::new();
    let mut loss = 0.0;
    for s in samples {
        let g = *index.entry(key(s.input)).or_insert_with(|| {
            let mut acts = Vec::new();
            tp.forward(p, &s.input, &mut acts);
            groups.push((acts, vec![0.0; Action::COUNT]));
            groups.len() - 1
        });
        let (acts, delta) = &mut groups[g];
        let td_error = acts[p.layers.len()][s.action.index()] - s.target;
        loss += 0.5 * td_error * td_error;
        delta[s.action.index()] += td_error / n;
    }
    let mut grad = MlpParams::zeros(&p.sizes());
    let mut scratch = [Vec::new(), Vec::new()];
    for (acts, delta) in &groups {
        p.backward(acts, delta, &mut grad, &mut scratch);
    }
    Ok((loss / n, grad))
}

/// Loss and gradient of a transition batch with targets from the current
/// parameters.
pub fn dqn_gradient(
    p: &MlpParams,
    env: &EnvConfig,
    batch: &[Transition],
    gamma: f64,
) -> Result<(f64, Gradient), AgentError> {
    if batch.is_empty() {
        return Err(AgentError::EmptyBatch);
    }
    sample_loss_gradient(p, &dqn_samples(p, env, batch, gamma))
}

/// One plain gradient-descent step on the batch; returns the loss before
/// the step.
pub fn dqn_update(
    p: &mut MlpParams,
    env: &EnvConfig,
    batch: &[Transition],
    eta: f64,
    gamma: f64,
) -> Result<f64, AgentError> {
    let (loss, grad) = dqn_gradient(p, env, batch, gamma)?;
    for (w, g) in p.values_mut().zip(grad.values()) {
        *w -= eta * g;
    }
    Ok(loss)
}
