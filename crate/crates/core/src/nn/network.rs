use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Layer, Shape};
use crate::error::{ensure, shape, Error, Result};
use crate::math::{exp, ln, sqrt};
use crate::rng;

/// Output transform applied after the last layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Head {
    /// Softmax probabilities; trained with cross-entropy on class labels.
    Softmax,
    /// Raw outputs; trained with mean squared error on value targets.
    Linear,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    Class(usize),
    Values(Vec<f64>),
}

/// Numerically stable softmax.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|&v| exp(v - m)).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub input: Shape,
    pub layers: Vec<Layer>,
    pub head: Head,
}

/// Activations recorded by [`Network::forward`]: `acts[0]` is the input,
/// `acts[i + 1]` the output of layer `i`.
#[derive(Debug, Clone)]
pub struct Forward {
    pub acts: Vec<Vec<f64>>,
    pub argmax: Vec<Vec<u32>>,
    /// Head output (probabilities or raw values).
    pub output: Vec<f64>,
}

impl Forward {
    /// Per-layer ReLU on/off patterns and pooling winners, used to detect
    /// kinks crossed by a finite-difference step.
    pub fn branch_signature(&self, net: &Network) -> Vec<u8> {
        let mut sig = Vec::new();
        for (i, l) in net.layers.iter().enumerate() {
            if l.has_relu() {
                sig.extend(self.acts[i + 1].iter().map(|&v| u8::from(v > 0.0)));
            }
            if let Layer::MaxPool { .. } = l {
                sig.extend(self.argmax[i].iter().flat_map(|v| v.to_le_bytes()));
            }
        }
        sig
    }
}

/// Parameter gradients, one vector per layer (empty for parameter-free
/// layers).
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(pub Vec<Vec<f64>>);

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Gradients(net.layers.iter().map(|l| vec![0.0; l.param_count()]).collect())
    }

    pub fn clear(&mut self) {
        self.0.iter_mut().for_each(|g| g.iter_mut().for_each(|v| *v = 0.0));
    }

    pub fn scale(&mut self, s: f64) {
        self.0.iter_mut().for_each(|g| g.iter_mut().for_each(|v| *v *= s));
    }
}

/// Reusable buffers for allocation-free inference.
#[derive(Debug, Clone, Default)]
pub struct Scratch {
    a: Vec<f64>,
    b: Vec<f64>,
}

impl Network {
    /// Validates that the layer shapes chain from `input`.
    pub fn new(input: Shape, layers: Vec<Layer>, head: Head) -> Result<Self> {
        let net = Network {
            input,
            layers,
            head,
        };
        net.shapes()?;
        Ok(net)
    }

    /// `shapes[0]` is the input, `shapes[i + 1]` the output of layer `i`.
    pub fn shapes(&self) -> Result<Vec<Shape>> {
        let mut out = vec![self.input];
        for (i, l) in self.layers.iter().enumerate() {
            let next = l
                .output_shape(*out.last().expect("non-empty"))
                .map_err(|m| shape(alloc::format!("layer {i}: {m}")))?;
            out.push(next);
        }
        Ok(out)
    }

    pub fn output_len(&self) -> usize {
        self.shapes()
            .map(|s| s.last().expect("non-empty").len())
            .unwrap_or(0)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    /// Uniform weights in `+-sqrt(6 / (fan_in + fan_out))`, zero biases,
    /// drawn layer by layer from `seed`.
    pub fn init_uniform(&mut self, seed: u64) {
        let mut r = rng::seeded(seed);
        for l in &mut self.layers {
            let (fi, fo) = l.fans();
            let nw = l.weight_count();
            if let Some(p) = l.params_vec_mut() {
                let limit = sqrt(6.0 / (fi + fo) as f64);
                for (i, v) in p.iter_mut().enumerate() {
                    *v = if i < nw {
                        r.random_range(-limit..limit)
                    } else {
                        0.0
                    };
                }
            }
        }
    }

    pub fn flat_params(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|l| l.params().iter().copied()).collect()
    }

    /// Loads parameters in layer order; resizes vectors left empty by
    /// deserialization.
    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        ensure!(
            flat.len() == self.param_count(),
            shape(alloc::format!(
                "parameter vector has {} values, network needs {}",
                flat.len(),
                self.param_count()
            ))
        );
        let mut off = 0;
        for l in &mut self.layers {
            let n = l.param_count();
            if let Some(p) = l.params_vec_mut() {
                p.clear();
                p.extend_from_slice(&flat[off..off + n]);
            }
            off += n;
        }
        Ok(())
    }

    /// Rounds every parameter through `f32`, matching what a saved model
    /// reloads to.
    pub fn round_to_f32(&mut self) {
        for l in &mut self.layers {
            l.params_mut().iter_mut().for_each(|v| *v = *v as f32 as f64);
        }
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        ensure!(
            x.len() == self.input.len(),
            shape(alloc::format!(
                "input has {} values, network expects {}x{}x{}",
                x.len(),
                self.input.h,
                self.input.w,
                self.input.c
            ))
        );
        Ok(())
    }

    fn apply_head(&self, z: &[f64]) -> Vec<f64> {
        match self.head {
            Head::Softmax => softmax(z),
            Head::Linear => z.to_vec(),
        }
    }

    /// Head output for one input.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut s = Scratch::default();
        self.predict_with(x, &mut s)
    }

    pub fn predict_with(&self, x: &[f64], scratch: &mut Scratch) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let shapes = self.shapes()?;
        scratch.a.clear();
        scratch.a.extend_from_slice(x);
        for (l, s) in self.layers.iter().zip(&shapes) {
            l.forward(*s, &scratch.a, &mut scratch.b, None);
            core::mem::swap(&mut scratch.a, &mut scratch.b);
        }
        Ok(self.apply_head(&scratch.a))
    }

    /// Forward pass keeping every activation for backpropagation.
    pub fn forward(&self, x: &[f64]) -> Result<Forward> {
        self.check_input(x)?;
        let shapes = self.shapes()?;
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        let mut argmax = Vec::with_capacity(self.layers.len());
        acts.push(x.to_vec());
        for (l, s) in self.layers.iter().zip(&shapes) {
            let mut out = Vec::new();
            let mut am = Vec::new();
            l.forward(*s, acts.last().expect("non-empty"), &mut out, Some(&mut am));
            acts.push(out);
            argmax.push(am);
        }
        let output = self.apply_head(acts.last().expect("non-empty"));
        Ok(Forward {
            acts,
            argmax,
            output,
        })
    }

    /// Loss of a recorded forward pass and its gradient with respect to the
    /// last layer's raw output.
    fn loss_grad(&self, fwd: &Forward, target: &Target) -> Result<(f64, Vec<f64>)> {
        match (self.head, target) {
            (Head::Softmax, Target::Class(c)) => {
                let p = &fwd.output;
                ensure!(
                    *c < p.len(),
                    Error::InvalidParameter(alloc::format!("class {c} out of range"))
                );
                let loss = -ln(p[*c].max(1e-300));
                let mut g = p.clone();
                g[*c] -= 1.0;
                Ok((loss, g))
            }
            (Head::Linear, Target::Values(t)) => {
                let y = &fwd.output;
                ensure!(
                    t.len() == y.len(),
                    shape(alloc::format!("target has {} values, output {}", t.len(), y.len()))
                );
                let n = y.len() as f64;
                let loss = y.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n;
                let g = y.iter().zip(t).map(|(a, b)| 2.0 * (a - b) / n).collect();
                Ok((loss, g))
            }
            _ => Err(Error::InvalidParameter(String::from(
                "target kind does not match the network head",
            ))),
        }
    }

    pub fn loss(&self, x: &[f64], target: &Target) -> Result<f64> {
        let fwd = self.forward(x)?;
        Ok(self.loss_grad(&fwd, target)?.0)
    }

    /// Adds the parameter gradient of the loss at `x` into `grads` and
    /// returns the loss and the forward record.
    pub fn accumulate_gradients(&self, x: &[f64], target: &Target, grads: &mut Gradients) -> Result<(f64, Forward)> {
        let fwd = self.forward(x)?;
        let (loss, mut g) = self.loss_grad(&fwd, target)?;
        let shapes = self.shapes()?;
        let mut gx = Vec::new();
        for i in (0..self.layers.len()).rev() {
            let l = &self.layers[i];
            if l.has_relu() {
                for (gv, &a) in g.iter_mut().zip(&fwd.acts[i + 1]) {
                    if a <= 0.0 {
                        *gv = 0.0;
                    }
                }
            }
            l.backward(shapes[i], &fwd.acts[i], &g, &fwd.argmax[i], &mut gx, &mut grads.0[i]);
            core::mem::swap(&mut g, &mut gx);
        }
        Ok((loss, fwd))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Network {
        Network::new(
            Shape::new(4, 4, 1),
            vec![
                Layer::conv(3, 3, 1, 2, true),
                Layer::MaxPool { ph: 2, pw: 2 },
                Layer::dense(8, Shape::new(1, 1, 2), false),
            ],
            Head::Softmax,
        )
        .unwrap()
    }

    #[test]
    fn softmax_sums_to_one_and_is_shift_invariant() {
        let p = softmax(&[1.0, -2.0, 0.5]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        let q = softmax(&[1001.0, 998.0, 1000.5]);
        for (a, b) in p.iter().zip(&q) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn shape_errors() {
        assert!(Network::new(
            Shape::new(5, 5, 1),
            vec![Layer::MaxPool { ph: 2, pw: 2 }],
            Head::Linear
        )
        .is_err());
        assert!(tiny().predict(&[0.0; 15]).is_err());
    }

    #[test]
    fn flat_params_round_trip() {
        let mut n = tiny();
        n.init_uniform(4);
        let p = n.flat_params();
        assert_eq!(p.len(), n.param_count());
        let mut m = tiny();
        m.set_flat_params(&p).unwrap();
        assert_eq!(m, n);
        assert!(m.set_flat_params(&p[1..]).is_err());
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let mut a = tiny();
        let mut b = tiny();
        a.init_uniform(11);
        b.init_uniform(11);
        assert_eq!(a, b);
        let limit = sqrt(6.0 / 27.0);
        let w = &a.layers[0].params()[..18];
        assert!(w.iter().all(|v| v.abs() <= limit) && w.iter().any(|&v| v != 0.0));
        assert!(a.layers[0].params()[18..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn predict_matches_forward() {
        let mut n = tiny();
        n.init_uniform(2);
        let x: Vec<f64> = (0..16).map(|i| (i as f64 * 0.37).sin()).collect();
        assert_eq!(n.predict(&x).unwrap(), n.forward(&x).unwrap().output);
    }
}
