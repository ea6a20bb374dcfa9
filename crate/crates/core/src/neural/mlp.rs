use std::io::{Read, Write};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Leading bytes of a serialized [`Mlp`].
pub const MLP_MAGIC: &[u8; 8] = b"UAVMLP01";

#[derive(Debug, Clone, Copy, PartialEq)]
struct LayerSlot {
    fan_in: usize,
    fan_out: usize,
    weights: usize,
    biases: usize,
}

/// Fully connected network: rectifier on hidden layers, identity on the output.
///
/// All parameters live in one flat vector. Layer `k` stores its weight matrix
/// row-major as `(fan_out, fan_in)` followed by its `fan_out` biases.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    widths: Vec<usize>,
    slots: Vec<LayerSlot>,
    params: Vec<f64>,
}

/// Per-layer activations kept from a forward pass for backpropagation.
#[derive(Debug, Clone, Default)]
pub struct Trace {
    acts: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.acts.last().map_or(&[], Vec::as_slice)
    }
}

fn layout(widths: &[usize]) -> (Vec<LayerSlot>, usize) {
    let mut slots = Vec::with_capacity(widths.len().saturating_sub(1));
    let mut offset = 0;
    for pair in widths.windows(2) {
        let (fan_in, fan_out) = (pair[0], pair[1]);
        slots.push(LayerSlot {
            fan_in,
            fan_out,
            weights: offset,
            biases: offset + fan_in * fan_out,
        });
        offset += fan_in * fan_out + fan_out;
    }
    (slots, offset)
}

impl Mlp {
    /// All-zero network.
    pub fn zeros(widths: &[usize]) -> Self {
        assert!(widths.len() >= 2, "an MLP needs input and output widths");
        assert!(widths.iter().all(|&w| w > 0), "layer widths must be positive");
        let (slots, total) = layout(widths);
        Mlp {
            widths: widths.to_vec(),
            slots,
            params: vec![0.0; total],
        }
    }

    /// He initialisation: weights `N(0, 2 / fan_in)`, zero biases.
    pub fn new<R: Rng + ?Sized>(widths: &[usize], rng: &mut R) -> Self {
        let mut net = Mlp::zeros(widths);
        for slot in net.slots.clone() {
            let std = (2.0 / slot.fan_in as f64).sqrt();
            for w in &mut net.params[slot.weights..slot.biases] {
                let z: f64 = StandardNormal.sample(rng);
                *w = std * z;
            }
        }
        net
    }

    /// Scales the weights and biases of the output layer, e.g. to start a
    /// value head near zero.
    pub fn scale_output_layer(&mut self, factor: f64) {
        let last = *self.slots.last().expect("at least one layer");
        for p in &mut self.params[last.weights..last.biases + last.fan_out] {
            *p *= factor;
        }
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().expect("widths is never empty")
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Weights of layer `k` as a `(fan_out, fan_in)` row-major slice.
    pub fn layer_weights_mut(&mut self, k: usize) -> &mut [f64] {
        let s = self.slots[k];
        &mut self.params[s.weights..s.biases]
    }

    pub fn layer_biases_mut(&mut self, k: usize) -> &mut [f64] {
        let s = self.slots[k];
        &mut self.params[s.biases..s.biases + s.fan_out]
    }

    pub fn copy_from(&mut self, other: &Mlp) {
        assert_eq!(self.widths, other.widths);
        self.params.copy_from_slice(&other.params);
    }

    /// Polyak averaging: `self <- (1 - tau) * self + tau * other`.
    pub fn soft_update(&mut self, other: &Mlp, tau: f64) {
        assert_eq!(self.widths, other.widths);
        for (p, q) in self.params.iter_mut().zip(&other.params) {
            *p += tau * (q - *p);
        }
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::ShapeMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut trace = Trace::default();
        self.forward_trace(x, &mut trace)?;
        Ok(trace.acts.pop().unwrap_or_default())
    }

    /// Forward pass that records every layer's activation in `trace`.
    pub fn forward_trace(&self, x: &[f64], trace: &mut Trace) -> Result<()> {
        self.check_input(x)?;
        trace.acts.resize(self.widths.len(), Vec::new());
        trace.acts[0].clear();
        trace.acts[0].extend_from_slice(x);
        let last = self.slots.len() - 1;
        for (k, slot) in self.slots.iter().enumerate() {
            let (done, rest) = trace.acts.split_at_mut(k + 1);
            let input = &done[k];
            let out = &mut rest[0];
            out.clear();
            let w = &self.params[slot.weights..slot.biases];
            let b = &self.params[slot.biases..slot.biases + slot.fan_out];
            for (row, bias) in w.chunks_exact(slot.fan_in).zip(b) {
                let z = bias + dot(row, input);
                out.push(if k < last { z.max(0.0) } else { z });
            }
        }
        Ok(())
    }

    /// Reverse pass for a recorded forward pass.
    ///
    /// `d_out` is the gradient of the loss with respect to the network output.
    /// Parameter gradients are added into `grads` (same layout as
    /// [`Mlp::params`]) and the gradient with respect to the input is returned.
    pub fn backward(&self, trace: &Trace, d_out: &[f64], grads: &mut [f64]) -> Vec<f64> {
        assert_eq!(d_out.len(), self.output_dim());
        assert_eq!(grads.len(), self.params.len());
        let mut delta = d_out.to_vec();
        for (k, slot) in self.slots.iter().enumerate().rev() {
            let input = &trace.acts[k];
            let w = &self.params[slot.weights..slot.biases];
            let mut d_input = vec![0.0; slot.fan_in];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let row = o * slot.fan_in;
                let g_row = &mut grads[slot.weights + row..slot.weights + row + slot.fan_in];
                axpy(d, input, g_row);
                grads[slot.biases + o] += d;
                axpy(d, &w[row..row + slot.fan_in], &mut d_input);
            }
            if k > 0 {
                // rectifier derivative, read off the stored post-activation
                for (g, &a) in d_input.iter_mut().zip(&trace.acts[k]) {
                    if a <= 0.0 {
                        *g = 0.0;
                    }
                }
            }
            delta = d_input;
        }
        delta
    }

    /// Writes the network in the flat checkpoint format: magic, `u32` layer
    /// count, `u32` widths, then every parameter as little-endian `f64`.
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(MLP_MAGIC)?;
        w.write_all(&(self.widths.len() as u32).to_le_bytes())?;
        for &width in &self.widths {
            w.write_all(&(width as u32).to_le_bytes())?;
        }
        for p in &self.params {
            w.write_all(&p.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MLP_MAGIC {
            return Err(Error::Checkpoint("bad MLP magic".into()));
        }
        let count = read_u32(r)? as usize;
        if !(2..=64).contains(&count) {
            return Err(Error::Checkpoint(format!("implausible layer count {count}")));
        }
        let widths = (0..count)
            .map(|_| read_u32(r).map(|v| v as usize))
            .collect::<Result<Vec<_>>>()?;
        if widths.contains(&0) {
            return Err(Error::Checkpoint("zero layer width".into()));
        }
        let mut net = Mlp::zeros(&widths);
        let mut buf = [0u8; 8];
        for p in &mut net.params {
            r.read_exact(&mut buf)?;
            *p = f64::from_le_bytes(buf);
        }
        Ok(net)
    }
}

pub(crate) fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
