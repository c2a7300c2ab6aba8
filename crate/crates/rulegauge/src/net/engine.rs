//! Batched jet propagation through a network and reverse accumulation of
//! parameter gradients.
//!
//! Layout: a batch of P points with jet length L is a `[width, P*L]` matrix
//! per layer, jets contiguous per (neuron, point). Linear layers are GEMMs;
//! activations compose per neuron-point slice. The reverse pass uses
//! `d sigma(p)[g] / d p[b] = sigma'(p)[g-b]`, so the adjoint of a composition
//! is a truncated correlation with the jet of the derivative.

use super::jet::{ComposeScratch, JetShape, MAX_TOTAL_ORDER};
use super::{NetworkState, NetworkSpec};
use crate::error::{Error, Result};
use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayView2, ArrayViewMut2};

/// One derivative of one output with respect to the inputs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DerivativeRequest {
    /// Per-input-dimension derivative orders; the total must be <= 4.
    pub multi_index: Vec<usize>,
    pub output_index: usize,
}

impl DerivativeRequest {
    pub fn new(multi_index: Vec<usize>, output_index: usize) -> Result<Self> {
        let total: usize = multi_index.iter().sum();
        if total > MAX_TOTAL_ORDER {
            return Err(Error::OrderTooHigh {
                order: total,
                max: MAX_TOTAL_ORDER,
            });
        }
        Ok(Self {
            multi_index,
            output_index,
        })
    }

    pub fn total_order(&self) -> usize {
        self.multi_index.iter().sum()
    }
}

/// Cached intermediates of one hidden layer.
#[derive(Debug, Clone)]
pub struct LayerTrace {
    /// Pre-activation jets.
    pre: Array2<f64>,
    /// Post-activation jets (input to the next layer).
    post: Array2<f64>,
}

/// The full forward trace of one jet pass: everything the reverse pass needs.
#[derive(Debug, Clone)]
pub struct PassRecord {
    shape: JetShape,
    points: usize,
    inputs: Array2<f64>,
    traces: Vec<LayerTrace>,
    outputs: Array2<f64>,
}

impl PassRecord {
    pub fn shape(&self) -> &JetShape {
        &self.shape
    }

    pub fn n_points(&self) -> usize {
        self.points
    }

    /// Derivative values `d^alpha out_k` for every point (Taylor coefficient
    /// times `alpha!`). `multi` may be any multi-index inside this pass's box.
    pub fn extract(&self, output_index: usize, multi: &[usize]) -> Result<Vec<f64>> {
        let slot = self.shape.slot_for(multi).ok_or(Error::OrderTooHigh {
            order: multi.iter().sum(),
            max: self.shape.total_order(),
        })?;
        let fact = self.shape.factorial_at(slot);
        let l = self.shape.len();
        let row = self.outputs.row(output_index);
        let buf = row.as_slice().expect("contiguous output row");
        Ok((0..self.points).map(|p| buf[p * l + slot] * fact).collect())
    }

    /// Allocate a zero adjoint for this pass's outputs.
    pub fn zero_adjoint(&self) -> Array2<f64> {
        Array2::zeros(self.outputs.raw_dim())
    }

    /// Per-point sign pattern of every hidden preactivation, in a fixed
    /// layer-major order. Two patterns differing means a kink lies between
    /// the two evaluation points of a piecewise-linear activation.
    pub(crate) fn hidden_preactivation_signs(&self) -> Vec<Vec<bool>> {
        let l = self.shape.len();
        let mut per_point = vec![Vec::new(); self.points];
        for trace in &self.traces {
            let buf = trace.pre.as_slice().expect("standard layout");
            let rows = trace.pre.nrows();
            for n in 0..rows {
                for (pi, signs) in per_point.iter_mut().enumerate() {
                    signs.push(buf[n * self.points * l + pi * l] > 0.0);
                }
            }
        }
        per_point
    }

    /// Accumulate per-point adjoints of the derivative value selected by
    /// `multi` into the output adjoint (inverse of [`PassRecord::extract`]).
    pub fn seed_adjoint(
        &self,
        adjoint: &mut Array2<f64>,
        output_index: usize,
        multi: &[usize],
        values: &[f64],
    ) -> Result<()> {
        let slot = self.shape.slot_for(multi).ok_or(Error::OrderTooHigh {
            order: multi.iter().sum(),
            max: self.shape.total_order(),
        })?;
        let fact = self.shape.factorial_at(slot);
        let l = self.shape.len();
        let mut row = adjoint.row_mut(output_index);
        let buf = row.as_slice_mut().expect("contiguous adjoint row");
        for (p, v) in values.iter().enumerate() {
            buf[p * l + slot] += v * fact;
        }
        Ok(())
    }
}

fn check_points(spec: &NetworkSpec, points: ArrayView2<'_, f64>) -> Result<()> {
    if points.ncols() != spec.input_dim {
        return Err(Error::DimensionMismatch {
            expected: spec.input_dim,
            got: points.ncols(),
        });
    }
    if points.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("input points".into()));
    }
    Ok(())
}

/// Propagate jets of `shape` through the network for a `[P, input_dim]` batch.
pub fn jet_forward(
    net: &NetworkState,
    points: ArrayView2<'_, f64>,
    shape: &JetShape,
) -> Result<PassRecord> {
    let spec = net.spec();
    check_points(spec, points)?;
    if shape.total_order() > spec.activation.max_input_derivative_order() {
        return Err(Error::UnsupportedDerivative {
            activation: spec.activation.to_string(),
            order: shape.total_order(),
        });
    }
    let p = points.nrows();
    let l = shape.len();
    let k = shape.total_order();

    let mut inputs = Array2::zeros((spec.input_dim, p * l));
    {
        let buf = inputs.as_slice_mut().expect("standard layout");
        let mut seed = vec![0.0; l];
        for j in 0..spec.input_dim {
            for pi in 0..p {
                shape.seed_input(j, points[[pi, j]], &mut seed);
                buf[j * p * l + pi * l..j * p * l + (pi + 1) * l].copy_from_slice(&seed);
            }
        }
    }

    let offsets = spec.layer_offsets();
    let n_linear = offsets.len();
    let mut traces = Vec::with_capacity(n_linear - 1);
    let mut scratch = ComposeScratch::default();
    let mut derivs = [0.0; 6];
    let mut current = inputs.view();
    let mut outputs = None;

    for (li, layer) in offsets.iter().enumerate() {
        let w = net.weight(layer);
        let b = net.bias(layer);
        let mut z = w.dot(&current);
        {
            // Bias contributes to the constant coefficient only.
            let buf = z.as_slice_mut().expect("standard layout");
            for (i, &bi) in b.iter().enumerate() {
                if bi != 0.0 {
                    for pi in 0..p {
                        buf[i * p * l + pi * l] += bi;
                    }
                }
            }
        }
        if li + 1 == n_linear {
            outputs = Some(z);
            break;
        }
        let mut post = Array2::zeros(z.raw_dim());
        {
            let zin = z.as_slice().expect("standard layout");
            let zout = post.as_slice_mut().expect("standard layout");
            let rows = z.nrows();
            let mut out_slice = vec![0.0; l];
            for n in 0..rows {
                for pi in 0..p {
                    let off = n * p * l + pi * l;
                    let pre = &zin[off..off + l];
                    spec.activation.derivatives(pre[0], &mut derivs[..=k]);
                    shape.compose(pre, &derivs[..=k], &mut out_slice, &mut scratch);
                    zout[off..off + l].copy_from_slice(&out_slice);
                }
            }
        }
        traces.push(LayerTrace { pre: z, post });
        current = traces.last().expect("just pushed").post.view();
    }

    let outputs = outputs.expect("loop always sets outputs");
    if outputs.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("network outputs".into()));
    }
    Ok(PassRecord {
        shape: shape.clone(),
        points: p,
        inputs,
        traces,
        outputs,
    })
}

/// Reverse accumulation: given the adjoint of the pass outputs, add the
/// parameter gradient into `grad` (flat, same layout as the parameters).
pub fn jet_reverse(
    net: &NetworkState,
    rec: &PassRecord,
    output_adjoint: Array2<f64>,
    grad: &mut [f64],
) -> Result<()> {
    let spec = net.spec();
    if grad.len() != spec.param_count() {
        return Err(Error::DimensionMismatch {
            expected: spec.param_count(),
            got: grad.len(),
        });
    }
    let offsets = spec.layer_offsets();
    let p = rec.points;
    let l = rec.shape.len();
    let k = rec.shape.total_order();
    let mut scratch = ComposeScratch::default();
    let mut derivs = [0.0; 6];
    let mut s = vec![0.0; l];

    let mut d_z = output_adjoint;
    for (li, layer) in offsets.iter().enumerate().rev() {
        let &(w_off, b_off, d_in, d_out) = layer;
        let a_prev = if li == 0 {
            rec.inputs.view()
        } else {
            rec.traces[li - 1].post.view()
        };
        {
            let mut gw = ArrayViewMut2::from_shape(
                (d_out, d_in),
                &mut grad[w_off..w_off + d_out * d_in],
            )
            .expect("weight block shape");
            general_mat_mul(1.0, &d_z, &a_prev.t(), 1.0, &mut gw);
        }
        {
            let buf = d_z.as_slice().expect("standard layout");
            for i in 0..d_out {
                let mut acc = 0.0;
                for pi in 0..p {
                    acc += buf[i * p * l + pi * l];
                }
                grad[b_off + i] += acc;
            }
        }
        if li == 0 {
            break;
        }
        let w = net.weight(layer);
        let d_a = w.t().dot(&d_z);
        let pre = &rec.traces[li - 1].pre;
        let mut d_pre = Array2::zeros(pre.raw_dim());
        {
            let pre_buf = pre.as_slice().expect("standard layout");
            let da_buf = d_a.as_slice().expect("standard layout");
            let dp_buf = d_pre.as_slice_mut().expect("standard layout");
            let rows = pre.nrows();
            for n in 0..rows {
                for pi in 0..p {
                    let off = n * p * l + pi * l;
                    let pslice = &pre_buf[off..off + l];
                    spec.activation.derivatives(pslice[0], &mut derivs[..=k + 1]);
                    rec.shape.compose(pslice, &derivs[1..=k + 1], &mut s, &mut scratch);
                    rec.shape.accumulate_compose_adjoint(
                        &da_buf[off..off + l],
                        &s,
                        &mut dp_buf[off..off + l],
                    );
                }
            }
        }
        d_z = d_pre;
    }
    Ok(())
}

/// Batch evaluation: `[P, input_dim]` points to `[P, output_dim]` outputs.
pub fn forward(net: &NetworkState, points: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let rec = jet_forward(net, points, &JetShape::scalar())?;
    let out_dim = net.spec().output_dim;
    let mut out = Array2::zeros((rec.points, out_dim));
    for k in 0..out_dim {
        let vals = rec.extract(k, &vec![0; net.spec().input_dim])?;
        for (pi, v) in vals.into_iter().enumerate() {
            out[[pi, k]] = v;
        }
    }
    Ok(out)
}

/// Exact derivative of one output with respect to the inputs at every point.
pub fn input_derivative(
    net: &NetworkState,
    points: ArrayView2<'_, f64>,
    req: &DerivativeRequest,
) -> Result<Vec<f64>> {
    let spec = net.spec();
    if req.multi_index.len() != spec.input_dim {
        return Err(Error::DimensionMismatch {
            expected: spec.input_dim,
            got: req.multi_index.len(),
        });
    }
    if req.output_index >= spec.output_dim {
        return Err(Error::OutputIndexOutOfRange {
            index: req.output_index,
            outputs: spec.output_dim,
        });
    }
    let shape = JetShape::for_multi_index(&req.multi_index)?;
    let rec = jet_forward(net, points, &shape)?;
    rec.extract(req.output_index, &req.multi_index)
}

/// Mean squared error between `forward(points)` and `targets` (mean over
/// points and channels), optionally accumulating `weight * d/d theta` into
/// `grad`. Returns the unweighted MSE.
pub fn mse_loss(
    net: &NetworkState,
    points: ArrayView2<'_, f64>,
    targets: ArrayView2<'_, f64>,
    weight: f64,
    grad: Option<&mut [f64]>,
) -> Result<f64> {
    let spec = net.spec();
    if targets.nrows() != points.nrows() || targets.ncols() != spec.output_dim {
        return Err(Error::DimensionMismatch {
            expected: points.nrows() * spec.output_dim,
            got: targets.nrows() * targets.ncols(),
        });
    }
    if points.nrows() == 0 {
        return Ok(0.0);
    }
    let rec = jet_forward(net, points, &JetShape::scalar())?;
    let p = rec.points;
    let c = spec.output_dim;
    let denom = (p * c) as f64;
    let mut loss = 0.0;
    let mut adj = grad.is_some().then(|| rec.zero_adjoint());
    {
        let out_buf = rec.outputs.as_slice().expect("standard layout");
        for k in 0..c {
            for pi in 0..p {
                let diff = out_buf[k * p + pi] - targets[[pi, k]];
                loss += diff * diff;
                if let Some(a) = adj.as_mut() {
                    a[[k, pi]] = weight * 2.0 * diff / denom;
                }
            }
        }
    }
    loss /= denom;
    if let (Some(adj), Some(grad)) = (adj, grad) {
        jet_reverse(net, &rec, adj, grad)?;
    }
    Ok(loss)
}
