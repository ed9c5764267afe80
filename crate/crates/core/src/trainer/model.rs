use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Stream};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum ModelKind {
    Linear,
    Mlp { hidden: Vec<usize> },
}

impl Default for ModelKind {
    fn default() -> Self {
        ModelKind::Mlp { hidden: vec![64] }
    }
}

/// Fully connected network with ReLU between layers. All weights live in one
/// flat vector; layer `l` stores its `out × in` matrix row-major, then its
/// bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub kind: ModelKind,
    sizes: Vec<usize>,
    params: Vec<f64>,
}

impl Model {
    /// Weights and biases uniform in `±1/sqrt(fan_in)`.
    pub fn new(kind: ModelKind, dim: usize, classes: usize, seed: u64) -> Result<Self> {
        if dim == 0 || classes < 2 {
            return Err(Error::InvalidArgument(format!("bad model shape d={dim}, C={classes}")));
        }
        let mut sizes = vec![dim];
        if let ModelKind::Mlp { hidden } = &kind {
            if hidden.contains(&0) {
                return Err(Error::InvalidArgument("hidden layer of width 0".into()));
            }
            sizes.extend(hidden);
        }
        sizes.push(classes);
        let mut rng = rng::child(seed, Stream::Init, &[]);
        let mut params = Vec::new();
        for w in sizes.windows(2) {
            let bound = 1.0 / (w[0] as f64).sqrt();
            params.extend((0..(w[0] + 1) * w[1]).map(|_| rng.random_range(-bound..bound)));
        }
        Ok(Self { kind, sizes, params })
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn classes(&self) -> usize {
        *self.sizes.last().expect("at least two layers")
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub(crate) fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn layers(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        self.sizes.windows(2).scan(0, |offset, w| {
            let start = *offset;
            *offset += (w[0] + 1) * w[1];
            Some((start, w[0], w[1]))
        })
    }

    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        let mut acts = Vec::new();
        self.forward(x, &mut acts);
        acts.pop().expect("output layer")
    }

    /// Fills `acts` with the input and every layer's output (post-ReLU for
    /// hidden layers, raw scores last).
    pub(crate) fn forward(&self, x: &[f64], acts: &mut Vec<Vec<f64>>) {
        acts.clear();
        acts.push(x.to_vec());
        let n_layers = self.sizes.len() - 1;
        for (l, (start, inp, out)) in self.layers().enumerate() {
            let w = &self.params[start..start + inp * out];
            let b = &self.params[start + inp * out..start + (inp + 1) * out];
            let prev = &acts[l];
            let mut next: Vec<f64> = w
                .chunks_exact(inp)
                .zip(b)
                .map(|(row, bias)| bias + row.iter().zip(prev).map(|(a, v)| a * v).sum::<f64>())
                .collect();
            if l + 1 < n_layers {
                next.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            acts.push(next);
        }
    }

    /// Adds `d loss / d params` into `grad` given the forward cache and the
    /// gradient with respect to the output scores.
    pub(crate) fn backward(&self, acts: &[Vec<f64>], grad_out: &[f64], grad: &mut [f64]) {
        let layers: Vec<_> = self.layers().collect();
        let mut delta = grad_out.to_vec();
        for (l, &(start, inp, out)) in layers.iter().enumerate().rev() {
            let prev = &acts[l];
            let (gw, gb) = grad[start..start + (inp + 1) * out].split_at_mut(inp * out);
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                gb[o] += d;
                for (g, v) in gw[o * inp..(o + 1) * inp].iter_mut().zip(prev) {
                    *g += d * v;
                }
            }
            if l == 0 {
                break;
            }
            let w = &self.params[start..start + inp * out];
            let mut back = vec![0.0; inp];
            for (row, &d) in w.chunks_exact(inp).zip(&delta) {
                if d != 0.0 {
                    back.iter_mut().zip(row).for_each(|(b, a)| *b += d * a);
                }
            }
            // ReLU mask from the stored post-activation
            for (b, a) in back.iter_mut().zip(prev) {
                if *a <= 0.0 {
                    *b = 0.0;
                }
            }
            delta = back;
        }
    }
}
