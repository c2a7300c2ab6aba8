//! Finite-difference validation of the autodiff engine.
//!
//! Central-difference stencils (tensor products for mixed multi-indices)
//! provide an independent route to every input derivative; parameter
//! gradients are checked coordinate by coordinate. For ReLU networks the
//! checks skip evaluations whose stencil straddles a kink (a hidden
//! preactivation changing sign across the stencil), where central
//! differences do not estimate the one-sided derivative.

use super::engine::{forward, input_derivative, DerivativeRequest};
use super::NetworkState;
use crate::error::{Error, Result};
use ndarray::{Array2, ArrayView2};

/// Central stencil (offsets in units of h, weights) for one pure derivative.
fn stencil(order: usize) -> (&'static [f64], &'static [f64]) {
    match order {
        0 => (&[0.0], &[1.0]),
        1 => (&[-1.0, 1.0], &[-0.5, 0.5]),
        2 => (&[-1.0, 0.0, 1.0], &[1.0, -2.0, 1.0]),
        3 => (&[-2.0, -1.0, 1.0, 2.0], &[-0.5, 1.0, -1.0, 0.5]),
        4 => (&[-2.0, -1.0, 0.0, 1.0, 2.0], &[1.0, -4.0, 6.0, -4.0, 1.0]),
        _ => unreachable!("orders above 4 are rejected upstream"),
    }
}

/// All stencil evaluation points and weights for a multi-index (tensor
/// product over the variables with nonzero order).
fn stencil_points(point: &[f64], multi: &[usize], h: f64) -> (Array2<f64>, Vec<f64>) {
    let mut pts: Vec<Vec<f64>> = vec![point.to_vec()];
    let mut weights: Vec<f64> = vec![1.0];
    let mut scale = 1.0;
    for (j, &order) in multi.iter().enumerate() {
        if order == 0 {
            continue;
        }
        let (offs, ws) = stencil(order);
        scale *= h.powi(order as i32);
        let mut next_pts = Vec::with_capacity(pts.len() * offs.len());
        let mut next_w = Vec::with_capacity(weights.len() * ws.len());
        for (p, w) in pts.iter().zip(&weights) {
            for (o, sw) in offs.iter().zip(ws) {
                let mut q = p.clone();
                q[j] += o * h;
                next_pts.push(q);
                next_w.push(w * sw);
            }
        }
        pts = next_pts;
        weights = next_w;
    }
    let n = pts.len();
    let d = point.len();
    let mut arr = Array2::zeros((n, d));
    for (i, p) in pts.iter().enumerate() {
        for (j, &v) in p.iter().enumerate() {
            arr[[i, j]] = v;
        }
    }
    for w in &mut weights {
        *w /= scale;
    }
    (arr, weights)
}

/// Finite-difference estimate of one derivative at one point.
pub fn input_derivative_fd(
    net: &NetworkState,
    point: &[f64],
    multi: &[usize],
    output_index: usize,
    h: f64,
) -> Result<f64> {
    let (pts, weights) = stencil_points(point, multi, h);
    let out = forward(net, pts.view())?;
    Ok(out
        .column(output_index)
        .iter()
        .zip(&weights)
        .map(|(v, w)| v * w)
        .sum())
}

/// Signs of every hidden preactivation at each point, used to detect kink
/// crossings in piecewise-linear networks.
fn preactivation_signs(net: &NetworkState, points: ArrayView2<'_, f64>) -> Result<Vec<Vec<bool>>> {
    let rec = super::engine::jet_forward(net, points, &super::jet::JetShape::scalar())?;
    Ok(rec.hidden_preactivation_signs())
}

/// Outcome of comparing the engine against finite differences for one
/// derivative request over a batch of points.
#[derive(Debug, Clone)]
pub struct FdComparison {
    pub multi_index: Vec<usize>,
    pub max_rel_error: f64,
    pub checked_points: usize,
    pub skipped_points: usize,
}

/// Compare [`input_derivative`] against central differences at every point.
/// Points whose stencil straddles a ReLU kink are skipped (and counted).
///
/// The error at a point is `|exact - fd|` divided by the larger of the two
/// magnitudes there or the batch-wide derivative scale, whichever is
/// largest: near-zero derivatives are judged against the scale of the
/// quantity, not against themselves, since there the finite difference is
/// all truncation noise.
pub fn compare_input_derivatives(
    net: &NetworkState,
    points: ArrayView2<'_, f64>,
    multi: &[usize],
    output_index: usize,
    h: f64,
) -> Result<FdComparison> {
    let req = DerivativeRequest::new(multi.to_vec(), output_index)?;
    let exact = input_derivative(net, points, &req)?;
    let piecewise = net.spec().activation == super::Activation::Relu;
    let mut pairs = Vec::with_capacity(points.nrows());
    let mut skipped = 0;
    for (i, row) in points.outer_iter().enumerate() {
        let point: Vec<f64> = row.to_vec();
        let (pts, weights) = stencil_points(&point, multi, h);
        if piecewise {
            let signs = preactivation_signs(net, pts.view())?;
            if signs.windows(2).any(|w| w[0] != w[1]) {
                skipped += 1;
                continue;
            }
        }
        let out = forward(net, pts.view())?;
        let fd: f64 = out
            .column(output_index)
            .iter()
            .zip(&weights)
            .map(|(v, w)| v * w)
            .sum();
        pairs.push((exact[i], fd));
    }
    let scale = pairs
        .iter()
        .map(|(a, b)| a.abs().max(b.abs()))
        .fold(0.0_f64, f64::max)
        .max(1e-8);
    let max_rel = pairs
        .iter()
        .map(|(a, b)| (a - b).abs() / a.abs().max(b.abs()).max(scale))
        .fold(0.0_f64, f64::max);
    Ok(FdComparison {
        multi_index: multi.to_vec(),
        max_rel_error: max_rel,
        checked_points: pairs.len(),
        skipped_points: skipped,
    })
}

/// Compare an analytic parameter gradient against parameter-space central
/// differences. `eval` returns the loss and, when given a buffer, must also
/// accumulate the gradient into it. The error is relative to the largest
/// finite-difference coordinate. For piecewise-linear networks, coordinates
/// whose perturbation flips a preactivation sign on `probe_points` are
/// skipped.
pub fn compare_param_gradient<F>(
    net: &NetworkState,
    eval: F,
    h: f64,
    probe_points: Option<ArrayView2<'_, f64>>,
) -> Result<FdComparison>
where
    F: Fn(&NetworkState) -> Result<(f64, Option<Vec<f64>>)>,
{
    let (_, grad) = eval_with_grad(net, &eval)?;
    let grad = grad.ok_or_else(|| Error::NonFinite("missing analytic gradient".into()))?;
    let n = net.params().len();
    let piecewise = net.spec().activation == super::Activation::Relu;
    let base_signs = match (&probe_points, piecewise) {
        (Some(p), true) => Some(preactivation_signs(net, p.view())?),
        _ => None,
    };
    let mut fd = vec![0.0; n];
    let mut usable = vec![true; n];
    let mut plus = net.clone();
    let mut minus = net.clone();
    for i in 0..n {
        let orig = net.params()[i];
        plus.params_mut()[i] = orig + h;
        minus.params_mut()[i] = orig - h;
        if let (Some(signs), Some(p)) = (&base_signs, &probe_points) {
            let sp = preactivation_signs(&plus, p.view())?;
            let sm = preactivation_signs(&minus, p.view())?;
            if &sp != signs || &sm != signs {
                usable[i] = false;
            }
        }
        if usable[i] {
            let (lp, _) = eval(&plus)?;
            let (lm, _) = eval(&minus)?;
            fd[i] = (lp - lm) / (2.0 * h);
        }
        plus.params_mut()[i] = orig;
        minus.params_mut()[i] = orig;
    }
    let denom = fd
        .iter()
        .zip(&usable)
        .filter(|(_, u)| **u)
        .map(|(v, _)| v.abs())
        .fold(0.0_f64, f64::max)
        .max(1e-10);
    let mut max_rel = 0.0_f64;
    let mut checked = 0;
    let mut skipped = 0;
    for i in 0..n {
        if usable[i] {
            max_rel = max_rel.max((grad[i] - fd[i]).abs() / denom);
            checked += 1;
        } else {
            skipped += 1;
        }
    }
    Ok(FdComparison {
        multi_index: Vec::new(),
        max_rel_error: max_rel,
        checked_points: checked,
        skipped_points: skipped,
    })
}

fn eval_with_grad<F>(net: &NetworkState, eval: &F) -> Result<(f64, Option<Vec<f64>>)>
where
    F: Fn(&NetworkState) -> Result<(f64, Option<Vec<f64>>)>,
{
    eval(net)
}
