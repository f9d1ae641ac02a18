//! Two-layer reference networks with hand-derived backward passes.
//!
//! Both nets compute `out_act(W2 · tanh(W1 · x + b1) + b2)`. The mapper uses
//! `tanh` on the output so patches stay in `[-1, 1]`; the critic's scalar
//! output is linear. Parameters live in one flat vector laid out as
//! `W1 (hidden x input, row-major) | b1 | W2 (output x hidden) | b2`.

use super::ObjectiveError;
use crate::rng::Stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputActivation {
    Tanh,
    Identity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoLayerNet {
    pub n_in: usize,
    pub n_hidden: usize,
    pub n_out: usize,
    /// Activation between the layers; `false` gives an identity (used to check
    /// a single affine layer against its closed-form gradient).
    pub hidden_tanh: bool,
    pub output: OutputActivation,
    pub params: Vec<f64>,
}

/// Activations recorded by [`TwoLayerNet::forward`], consumed by `backward`.
#[derive(Debug, Clone)]
pub struct Tape {
    batch: usize,
    input: Vec<f64>,
    hidden: Vec<f64>,
    output: Vec<f64>,
}

impl Tape {
    pub fn output(&self) -> &[f64] {
        &self.output
    }

    pub fn batch(&self) -> usize {
        self.batch
    }
}

/// Result of a backward pass.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub params: Vec<f64>,
    pub input: Vec<f64>,
}

impl TwoLayerNet {
    pub fn num_params(n_in: usize, n_hidden: usize, n_out: usize) -> usize {
        n_hidden * n_in + n_hidden + n_out * n_hidden + n_out
    }

    /// Weights uniform in `±1/sqrt(fan_in)`, biases zero.
    pub fn init(n_in: usize, n_hidden: usize, n_out: usize, output: OutputActivation, rng: &mut Stream) -> Self {
        let mut params = vec![0.0; Self::num_params(n_in, n_hidden, n_out)];
        let a1 = 1.0 / (n_in as f64).sqrt();
        let a2 = 1.0 / (n_hidden as f64).sqrt();
        let (w1, rest) = params.split_at_mut(n_hidden * n_in);
        for w in w1.iter_mut() {
            *w = rng.uniform(-a1, a1);
        }
        let w2 = &mut rest[n_hidden..n_hidden + n_out * n_hidden];
        for w in w2.iter_mut() {
            *w = rng.uniform(-a2, a2);
        }
        Self {
            n_in,
            n_hidden,
            n_out,
            hidden_tanh: true,
            output,
            params,
        }
    }

    fn split(&self) -> (&[f64], &[f64], &[f64], &[f64]) {
        let (w1, rest) = self.params.split_at(self.n_hidden * self.n_in);
        let (b1, rest) = rest.split_at(self.n_hidden);
        let (w2, b2) = rest.split_at(self.n_out * self.n_hidden);
        (w1, b1, w2, b2)
    }

    /// Forward pass over a batch of row-major samples.
    pub fn forward(&self, input: &[f64]) -> Result<Tape, ObjectiveError> {
        if input.is_empty() || !input.len().is_multiple_of(self.n_in) {
            return Err(ObjectiveError::ShapeMismatch {
                expected: self.n_in,
                got: input.len(),
            });
        }
        let batch = input.len() / self.n_in;
        let (w1, b1, w2, b2) = self.split();
        let mut hidden = vec![0.0; batch * self.n_hidden];
        let mut output = vec![0.0; batch * self.n_out];
        for s in 0..batch {
            let x = &input[s * self.n_in..(s + 1) * self.n_in];
            let h = &mut hidden[s * self.n_hidden..(s + 1) * self.n_hidden];
            for (j, hj) in h.iter_mut().enumerate() {
                let row = &w1[j * self.n_in..(j + 1) * self.n_in];
                let z = b1[j] + dot(row, x);
                *hj = if self.hidden_tanh { z.tanh() } else { z };
            }
            let y = &mut output[s * self.n_out..(s + 1) * self.n_out];
            for (k, yk) in y.iter_mut().enumerate() {
                let row = &w2[k * self.n_hidden..(k + 1) * self.n_hidden];
                let z = b2[k] + dot(row, h);
                *yk = match self.output {
                    OutputActivation::Tanh => z.tanh(),
                    OutputActivation::Identity => z,
                };
            }
        }
        Ok(Tape {
            batch,
            input: input.to_vec(),
            hidden,
            output,
        })
    }

    /// Gradients of `sum(upstream * output)` with respect to the parameters
    /// and the input of the recorded forward pass.
    pub fn backward(&self, tape: &Tape, upstream: &[f64]) -> Result<Gradients, ObjectiveError> {
        if upstream.len() != tape.output.len() || tape.input.len() != tape.batch * self.n_in {
            return Err(ObjectiveError::ShapeMismatch {
                expected: tape.output.len(),
                got: upstream.len(),
            });
        }
        let (w1, _, w2, _) = self.split();
        let (nh, ni, no) = (self.n_hidden, self.n_in, self.n_out);
        let mut grad = vec![0.0; self.params.len()];
        let mut grad_input = vec![0.0; tape.input.len()];
        let (gw1, rest) = grad.split_at_mut(nh * ni);
        let (gb1, rest) = rest.split_at_mut(nh);
        let (gw2, gb2) = rest.split_at_mut(no * nh);
        let mut dz2 = vec![0.0; no];
        let mut dh = vec![0.0; nh];

        for s in 0..tape.batch {
            let x = &tape.input[s * ni..(s + 1) * ni];
            let h = &tape.hidden[s * nh..(s + 1) * nh];
            let y = &tape.output[s * no..(s + 1) * no];
            let dy = &upstream[s * no..(s + 1) * no];
            for k in 0..no {
                dz2[k] = match self.output {
                    OutputActivation::Tanh => dy[k] * (1.0 - y[k] * y[k]),
                    OutputActivation::Identity => dy[k],
                };
            }
            dh.iter_mut().for_each(|v| *v = 0.0);
            for k in 0..no {
                let g = dz2[k];
                if g == 0.0 {
                    continue;
                }
                gb2[k] += g;
                let row = &w2[k * nh..(k + 1) * nh];
                let grow = &mut gw2[k * nh..(k + 1) * nh];
                for j in 0..nh {
                    grow[j] += g * h[j];
                    dh[j] += g * row[j];
                }
            }
            let dx = &mut grad_input[s * ni..(s + 1) * ni];
            for j in 0..nh {
                let dz1 = if self.hidden_tanh {
                    dh[j] * (1.0 - h[j] * h[j])
                } else {
                    dh[j]
                };
                if dz1 == 0.0 {
                    continue;
                }
                gb1[j] += dz1;
                let row = &w1[j * ni..(j + 1) * ni];
                let grow = &mut gw1[j * ni..(j + 1) * ni];
                for i in 0..ni {
                    grow[i] += dz1 * x[i];
                    dx[i] += dz1 * row[i];
                }
            }
        }
        Ok(Gradients {
            params: grad,
            input: grad_input,
        })
    }

    pub fn all_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Patch-to-patch map with outputs in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MapperNet(pub TwoLayerNet);

impl MapperNet {
    pub fn init(patch_len: usize, hidden: usize, rng: &mut Stream) -> Self {
        Self(TwoLayerNet::init(
            patch_len,
            hidden,
            patch_len,
            OutputActivation::Tanh,
            rng,
        ))
    }
}

/// Patch-to-scalar critic.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticNet(pub TwoLayerNet);

impl CriticNet {
    pub fn init(patch_len: usize, hidden: usize, rng: &mut Stream) -> Self {
        Self(TwoLayerNet::init(patch_len, hidden, 1, OutputActivation::Identity, rng))
    }
}
