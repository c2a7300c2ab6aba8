//! Dense feed-forward networks with exact input derivatives (orders 0-4),
//! parameter gradients by reverse accumulation, and an Adam optimizer.
//!
//! A [`NetworkState`] is a self-contained value: the spec, a flat parameter
//! vector and the seed it was initialized from. It is cheap to clone and safe
//! to move between worker threads; training mutates a private copy only.

mod adam;
mod engine;
mod jet;
pub mod validate;

pub use adam::{adam_step, AdamState};
pub use engine::{
    forward, input_derivative, jet_forward, jet_reverse, mse_loss, DerivativeRequest, PassRecord,
};
pub use jet::{ComposeScratch, JetShape, MAX_TOTAL_ORDER};

use crate::error::{Error, Result};
use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;

/// Scalar activation applied to every hidden unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Sin,
    Tanh,
    Relu,
}

impl Activation {
    /// Highest input-derivative order this activation supports. ReLU is
    /// piecewise linear, so anything beyond first order is rejected.
    pub fn max_input_derivative_order(self) -> usize {
        match self {
            Activation::Sin | Activation::Tanh => MAX_TOTAL_ORDER,
            Activation::Relu => 1,
        }
    }

    /// Fill `out[k]` with the k-th derivative at `x` for `k < out.len()`.
    /// Supports up to the 5th derivative (one past the order-4 jets, for the
    /// reverse pass).
    #[inline]
    fn derivatives(self, x: f64, out: &mut [f64]) {
        debug_assert!(out.len() <= 6);
        match self {
            Activation::Sin => {
                let (s, c) = x.sin_cos();
                let cycle = [s, c, -s, -c];
                for (k, o) in out.iter_mut().enumerate() {
                    *o = cycle[k % 4];
                }
            }
            Activation::Tanh => {
                let t = x.tanh();
                let u = 1.0 - t * t;
                let t2 = t * t;
                for (k, o) in out.iter_mut().enumerate() {
                    *o = match k {
                        0 => t,
                        1 => u,
                        2 => -2.0 * t * u,
                        3 => (6.0 * t2 - 2.0) * u,
                        4 => (16.0 * t - 24.0 * t2 * t) * u,
                        5 => (16.0 - 120.0 * t2 + 120.0 * t2 * t2) * u,
                        _ => unreachable!(),
                    };
                }
            }
            Activation::Relu => {
                out.fill(0.0);
                out[0] = x.max(0.0);
                if out.len() > 1 && x > 0.0 {
                    out[1] = 1.0;
                }
            }
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Activation::Sin => "sin",
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sin" => Ok(Activation::Sin),
            "tanh" => Ok(Activation::Tanh),
            "relu" => Ok(Activation::Relu),
            other => Err(Error::InvalidSpec(format!("unknown activation `{other}`"))),
        }
    }
}

/// Architecture of a dense feed-forward network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input_dim: usize,
    pub output_dim: usize,
    pub hidden_layers: usize,
    pub hidden_width: usize,
    pub activation: Activation,
}

impl NetworkSpec {
    pub fn new(
        input_dim: usize,
        output_dim: usize,
        hidden_layers: usize,
        hidden_width: usize,
        activation: Activation,
    ) -> Result<Self> {
        let spec = Self {
            input_dim,
            output_dim,
            hidden_layers,
            hidden_width,
            activation,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim < 1 || self.output_dim < 1 || self.hidden_layers < 1 || self.hidden_width < 1
        {
            return Err(Error::InvalidSpec(format!(
                "all dimensions must be >= 1, got {self:?}"
            )));
        }
        Ok(())
    }

    /// Layer widths from input to output.
    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.hidden_layers + 2);
        dims.push(self.input_dim);
        dims.extend(std::iter::repeat(self.hidden_width).take(self.hidden_layers));
        dims.push(self.output_dim);
        dims
    }

    /// Total number of parameters: per linear layer a row-major weight block
    /// followed by a bias block.
    pub fn param_count(&self) -> usize {
        self.layer_dims()
            .windows(2)
            .map(|w| w[1] * w[0] + w[1])
            .sum()
    }

    /// `(weight_offset, bias_offset, d_in, d_out)` per linear layer.
    pub(crate) fn layer_offsets(&self) -> Vec<(usize, usize, usize, usize)> {
        let dims = self.layer_dims();
        let mut off = 0;
        let mut out = Vec::with_capacity(dims.len() - 1);
        for w in dims.windows(2) {
            let (d_in, d_out) = (w[0], w[1]);
            out.push((off, off + d_out * d_in, d_in, d_out));
            off += d_out * d_in + d_out;
        }
        out
    }
}

/// A network together with its flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    spec: NetworkSpec,
    params: Vec<f64>,
    rng_seed: u64,
}

impl NetworkState {
    /// Glorot-uniform weights (`+-sqrt(6 / (fan_in + fan_out))`), zero biases,
    /// drawn from a ChaCha stream so the same seed gives bit-identical
    /// parameters on every platform.
    pub fn init(spec: NetworkSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut params = vec![0.0; spec.param_count()];
        for (w_off, b_off, d_in, d_out) in spec.layer_offsets() {
            let limit = (6.0 / (d_in + d_out) as f64).sqrt();
            let dist = Uniform::new_inclusive(-limit, limit);
            for w in &mut params[w_off..w_off + d_out * d_in] {
                *w = dist.sample(&mut rng);
            }
            debug_assert!(params[b_off..b_off + d_out].iter().all(|&b| b == 0.0));
        }
        Ok(Self {
            spec,
            params,
            rng_seed: seed,
        })
    }

    /// Wrap an explicit parameter vector (must match the spec's count).
    pub fn from_params(spec: NetworkSpec, params: Vec<f64>, rng_seed: u64) -> Result<Self> {
        spec.validate()?;
        if params.len() != spec.param_count() {
            return Err(Error::DimensionMismatch {
                expected: spec.param_count(),
                got: params.len(),
            });
        }
        Ok(Self {
            spec,
            params,
            rng_seed,
        })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }

    pub(crate) fn weight(&self, layer: &(usize, usize, usize, usize)) -> ndarray::ArrayView2<'_, f64> {
        let &(w_off, _, d_in, d_out) = layer;
        ndarray::ArrayView2::from_shape((d_out, d_in), &self.params[w_off..w_off + d_out * d_in])
            .expect("weight block shape")
    }

    pub(crate) fn bias(&self, layer: &(usize, usize, usize, usize)) -> &[f64] {
        let &(_, b_off, _, d_out) = layer;
        &self.params[b_off..b_off + d_out]
    }

    /// Write a checkpoint: spec fields plus every parameter printed with 17
    /// significant digits so standard parsing restores the exact bits.
    pub fn save_checkpoint(&self, path: &Path, adam: Option<&AdamState>) -> Result<()> {
        let mut doc = String::new();
        doc.push_str("format = \"rulegauge-checkpoint-v1\"\n");
        doc.push_str(&format!("input_dim = {}\n", self.spec.input_dim));
        doc.push_str(&format!("output_dim = {}\n", self.spec.output_dim));
        doc.push_str(&format!("hidden_layers = {}\n", self.spec.hidden_layers));
        doc.push_str(&format!("hidden_width = {}\n", self.spec.hidden_width));
        doc.push_str(&format!("activation = \"{}\"\n", self.spec.activation));
        doc.push_str(&format!("rng_seed = {}\n", self.rng_seed));
        write_f64_array(&mut doc, "parameters", &self.params);
        if let Some(adam) = adam {
            doc.push_str("\n[adam]\n");
            doc.push_str(&format!("step = {}\n", adam.step));
            doc.push_str(&format!("lr = {}\n", fmt_f64(adam.lr)));
            doc.push_str(&format!("beta1 = {}\n", fmt_f64(adam.beta1)));
            doc.push_str(&format!("beta2 = {}\n", fmt_f64(adam.beta2)));
            doc.push_str(&format!("eps_hat = {}\n", fmt_f64(adam.eps_hat)));
            write_f64_array(&mut doc, "first_moment", &adam.first_moment);
            write_f64_array(&mut doc, "second_moment", &adam.second_moment);
        }
        crate::report::write_atomic(path, doc.as_bytes())
    }

    pub fn load_checkpoint(path: &Path) -> Result<(Self, Option<AdamState>)> {
        let text = std::fs::read_to_string(path)?;
        let doc: CheckpointDoc =
            toml::from_str(&text).map_err(|e| Error::Checkpoint(e.to_string()))?;
        if doc.format != "rulegauge-checkpoint-v1" {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint format `{}`",
                doc.format
            )));
        }
        let spec = NetworkSpec::new(
            doc.input_dim,
            doc.output_dim,
            doc.hidden_layers,
            doc.hidden_width,
            doc.activation.parse()?,
        )?;
        let net = NetworkState::from_params(spec, doc.parameters, doc.rng_seed)?;
        let adam = match doc.adam {
            None => None,
            Some(a) => {
                if a.first_moment.len() != net.params.len()
                    || a.second_moment.len() != net.params.len()
                {
                    return Err(Error::Checkpoint(
                        "optimizer moment length does not match parameter count".into(),
                    ));
                }
                Some(AdamState {
                    step: a.step,
                    lr: a.lr,
                    beta1: a.beta1,
                    beta2: a.beta2,
                    eps_hat: a.eps_hat,
                    first_moment: a.first_moment,
                    second_moment: a.second_moment,
                })
            }
        };
        Ok((net, adam))
    }
}

/// 17 significant digits: enough for any finite f64 to round-trip exactly.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_f64_array(doc: &mut String, key: &str, values: &[f64]) {
    doc.push_str(key);
    doc.push_str(" = [\n");
    for v in values {
        doc.push_str("  ");
        doc.push_str(&fmt_f64(*v));
        doc.push_str(",\n");
    }
    doc.push_str("]\n");
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointDoc {
    format: String,
    input_dim: usize,
    output_dim: usize,
    hidden_layers: usize,
    hidden_width: usize,
    activation: String,
    rng_seed: u64,
    parameters: Vec<f64>,
    adam: Option<CheckpointAdam>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointAdam {
    step: u64,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps_hat: f64,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn param_count_matches_layout() {
        let spec = NetworkSpec::new(2, 1, 2, 16, Activation::Tanh).unwrap();
        // 2->16->16->1: (16*2+16) + (16*16+16) + (1*16+1)
        assert_eq!(spec.param_count(), 48 + 272 + 17);
        let net = NetworkState::init(spec, 42).unwrap();
        assert_eq!(net.params().len(), spec.param_count());
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let spec = NetworkSpec::new(3, 2, 2, 8, Activation::Sin).unwrap();
        let a = NetworkState::init(spec, 7).unwrap();
        let b = NetworkState::init(spec, 7).unwrap();
        assert_eq!(a.params(), b.params());
        let c = NetworkState::init(spec, 8).unwrap();
        assert_ne!(a.params(), c.params());
    }

    #[test]
    fn init_respects_glorot_bound_and_zero_biases() {
        let spec = NetworkSpec::new(2, 1, 1, 4, Activation::Relu).unwrap();
        let net = NetworkState::init(spec, 1).unwrap();
        let offsets = spec.layer_offsets();
        for (w_off, b_off, d_in, d_out) in offsets {
            let limit = (6.0 / (d_in + d_out) as f64).sqrt();
            for &w in &net.params()[w_off..w_off + d_out * d_in] {
                assert!(w.abs() <= limit);
            }
            for &b in &net.params()[b_off..b_off + d_out] {
                assert_eq!(b, 0.0);
            }
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(NetworkSpec::new(0, 1, 1, 4, Activation::Tanh).is_err());
        assert!(NetworkSpec::new(2, 1, 0, 4, Activation::Tanh).is_err());
    }

    #[test]
    fn tanh_derivatives_match_finite_differences() {
        let x = 0.4_f64;
        let h = 1e-4;
        let mut d = [0.0; 6];
        Activation::Tanh.derivatives(x, &mut d);
        for k in 1..=5 {
            let mut lo = [0.0; 6];
            let mut hi = [0.0; 6];
            Activation::Tanh.derivatives(x - h, &mut lo);
            Activation::Tanh.derivatives(x + h, &mut hi);
            let fd = (hi[k - 1] - lo[k - 1]) / (2.0 * h);
            assert!(
                (fd - d[k]).abs() < 1e-6 * d[k].abs().max(1.0),
                "order {k}: fd {fd} vs analytic {}",
                d[k]
            );
        }
    }

    #[test]
    fn checkpoint_roundtrip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let spec = NetworkSpec::new(2, 2, 2, 5, Activation::Tanh).unwrap();
        let net = NetworkState::init(spec, 99).unwrap();
        let adam = AdamState::new(net.params().len());
        let path = dir.path().join("ck.toml");
        net.save_checkpoint(&path, Some(&adam)).unwrap();
        let (loaded, loaded_adam) = NetworkState::load_checkpoint(&path).unwrap();
        assert_eq!(net.params(), loaded.params());
        assert_eq!(net.spec(), loaded.spec());
        assert_eq!(loaded_adam.unwrap().step, 0);
    }
}
