//! Rule losses and the composite coalition loss with its parameter gradient.
//!
//! The composite loss of a coalition is `data MSE + sum over active rules of
//! lambda_i * rule_loss_i`. Rules sharing a collocation set also share the
//! jet passes through the network, so e.g. a problem whose rules are all
//! algebraic relations over the same grid costs one forward/backward per
//! epoch, not one per rule.

use super::coalition::Coalition;
use super::expr::FieldRef;
use super::region::CollocationSet;
use super::{RuleForm, RuleKind, RuleSet, RuleSpec};
use crate::error::{Error, Result};
use crate::net::{jet_forward, jet_reverse, mse_loss, JetShape, NetworkState, PassRecord};
use ndarray::{Array2, ArrayView2};

/// Anything that can supply network-quantity values at a batch of points:
/// the network itself, or a closed-form stand-in used as a test oracle.
pub trait FieldEval {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    /// Values of `d^multi output_channel` at each point.
    fn field_values(&self, points: ArrayView2<'_, f64>, fref: &FieldRef) -> Result<Vec<f64>>;
}

impl FieldEval for NetworkState {
    fn input_dim(&self) -> usize {
        self.spec().input_dim
    }

    fn output_dim(&self) -> usize {
        self.spec().output_dim
    }

    fn field_values(&self, points: ArrayView2<'_, f64>, fref: &FieldRef) -> Result<Vec<f64>> {
        let req = crate::net::DerivativeRequest::new(fref.multi.clone(), fref.channel)?;
        crate::net::input_derivative(self, points, &req)
    }
}

/// Residual magnitude and its derivative with respect to the raw value
/// `v = lhs - target`: equality rules penalize `v`, inequality rules the
/// hinge violation `max(0, -v)`.
#[inline]
fn penalized(kind: RuleKind, v: f64) -> (f64, f64) {
    if kind == RuleKind::InequalityConstraint {
        if v < 0.0 {
            (-v, -1.0)
        } else {
            (0.0, 0.0)
        }
    } else {
        (v, 1.0)
    }
}

/// Mean of squared (hinge-)residuals of one rule over a collocation set.
pub fn rule_loss(rule: &RuleSpec, eval: &dyn FieldEval, colloc: &CollocationSet) -> Result<f64> {
    if colloc.is_empty() {
        return Err(Error::EmptyCollocation { rule: rule.index });
    }
    let p = colloc.len();
    match &rule.form {
        RuleForm::Pointwise { components } => {
            let slots = rule.field_refs();
            let mut values = Vec::with_capacity(slots.len());
            for s in &slots {
                values.push(eval.field_values(colloc.points.view(), s)?);
            }
            let mut acc = 0.0;
            let mut fields = vec![0.0; slots.len()];
            for pi in 0..p {
                let coords = colloc.points.row(pi);
                let coords = coords.as_slice().expect("contiguous row");
                for (k, v) in values.iter().enumerate() {
                    fields[k] = v[pi];
                }
                for c in components {
                    let v = c.lhs.eval(coords, &slots, &fields)
                        - c.target.eval(coords, &slots, &fields);
                    let (r, _) = penalized(rule.kind, v);
                    acc += r * r;
                }
            }
            Ok(acc / (p * components.len()) as f64)
        }
        RuleForm::PeriodicPair {
            channel,
            axis,
            low,
            high,
        } => {
            let fref = FieldRef {
                channel: *channel,
                multi: vec![0; eval.input_dim()],
            };
            let mut low_pts = colloc.points.clone();
            let mut high_pts = colloc.points.clone();
            for mut row in low_pts.outer_iter_mut() {
                row[*axis] = *low;
            }
            for mut row in high_pts.outer_iter_mut() {
                row[*axis] = *high;
            }
            let a = eval.field_values(low_pts.view(), &fref)?;
            let b = eval.field_values(high_pts.view(), &fref)?;
            let acc: f64 = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum();
            Ok(acc / p as f64)
        }
    }
}

/// Convenience wrapper over [`CompositeLoss::value`].
pub fn composite_loss<'a>(
    rules: &'a RuleSet,
    coalition: Coalition,
    net: &NetworkState,
    colloc_table: &'a [CollocationSet],
    train: Option<(ArrayView2<'a, f64>, ArrayView2<'a, f64>)>,
) -> Result<f64> {
    CompositeLoss::new(rules, coalition, colloc_table, train)?.value(net)
}

/// One group of pointwise rules sharing a collocation set, or one periodic
/// rule with its mirrored evaluation points.
enum Unit {
    Pointwise {
        colloc_idx: usize,
        rule_indices: Vec<usize>,
        passes: Vec<JetShape>,
        /// For each distinct multi-index used by the group: which pass serves it.
        multi_to_pass: Vec<(Vec<usize>, usize)>,
    },
    Periodic {
        rule_index: usize,
        low_pts: Array2<f64>,
        high_pts: Array2<f64>,
    },
}

/// The composite loss of one coalition, planned once and evaluated many
/// times during training.
pub struct CompositeLoss<'a> {
    rules: &'a RuleSet,
    colloc: &'a [CollocationSet],
    train: Option<(ArrayView2<'a, f64>, ArrayView2<'a, f64>)>,
    units: Vec<Unit>,
}

impl<'a> CompositeLoss<'a> {
    pub fn new(
        rules: &'a RuleSet,
        coalition: Coalition,
        colloc: &'a [CollocationSet],
        train: Option<(ArrayView2<'a, f64>, ArrayView2<'a, f64>)>,
    ) -> Result<Self> {
        if coalition.n_rules() != rules.len() {
            return Err(Error::DimensionMismatch {
                expected: rules.len(),
                got: coalition.n_rules(),
            });
        }
        if colloc.len() != rules.len() {
            return Err(Error::DimensionMismatch {
                expected: rules.len(),
                got: colloc.len(),
            });
        }
        let input_dim = rules.input_dim();
        let mut units: Vec<Unit> = Vec::new();
        for rule in rules.iter().filter(|r| coalition.contains(r.index)) {
            let set = &colloc[rule.index - 1];
            if set.is_empty() {
                return Err(Error::EmptyCollocation { rule: rule.index });
            }
            match &rule.form {
                RuleForm::PeriodicPair {
                    axis, low, high, ..
                } => {
                    let mut low_pts = set.points.clone();
                    let mut high_pts = set.points.clone();
                    for mut row in low_pts.outer_iter_mut() {
                        row[*axis] = *low;
                    }
                    for mut row in high_pts.outer_iter_mut() {
                        row[*axis] = *high;
                    }
                    units.push(Unit::Periodic {
                        rule_index: rule.index,
                        low_pts,
                        high_pts,
                    });
                }
                RuleForm::Pointwise { .. } => {
                    let existing = units.iter_mut().find_map(|u| match u {
                        Unit::Pointwise {
                            colloc_idx,
                            rule_indices,
                            ..
                        } if colloc[*colloc_idx].points == set.points => Some(rule_indices),
                        _ => None,
                    });
                    match existing {
                        Some(rule_indices) => rule_indices.push(rule.index),
                        None => units.push(Unit::Pointwise {
                            colloc_idx: rule.index - 1,
                            rule_indices: vec![rule.index],
                            passes: Vec::new(),
                            multi_to_pass: Vec::new(),
                        }),
                    }
                }
            }
        }
        // Plan jet passes per pointwise unit: one univariate pass per input
        // variable appearing alone in a multi-index, one box pass per mixed
        // multi-index, and the constant coefficient comes along for free.
        for unit in &mut units {
            let Unit::Pointwise {
                rule_indices,
                passes,
                multi_to_pass,
                ..
            } = unit
            else {
                continue;
            };
            let mut multis: Vec<Vec<usize>> = Vec::new();
            for &ri in rule_indices.iter() {
                for f in rules.get(ri)?.field_refs() {
                    let multi = if f.multi.is_empty() {
                        vec![0; input_dim]
                    } else {
                        f.multi.clone()
                    };
                    if !multis.contains(&multi) {
                        multis.push(multi);
                    }
                }
            }
            let mut uni_order = vec![0usize; input_dim];
            let mut mixed: Vec<Vec<usize>> = Vec::new();
            for m in &multis {
                let active: Vec<usize> = (0..input_dim).filter(|&j| m[j] > 0).collect();
                match active.len() {
                    0 => {}
                    1 => uni_order[active[0]] = uni_order[active[0]].max(m[active[0]]),
                    _ => {
                        if !mixed.contains(m) {
                            mixed.push(m.clone());
                        }
                    }
                }
            }
            for (j, &o) in uni_order.iter().enumerate() {
                if o > 0 {
                    passes.push(JetShape::univariate(j, o)?);
                }
            }
            for m in &mixed {
                passes.push(JetShape::for_multi_index(m)?);
            }
            if passes.is_empty() {
                passes.push(JetShape::scalar());
            }
            for m in multis {
                let pass = passes
                    .iter()
                    .position(|s| s.slot_for(&m).is_some())
                    .expect("pass plan covers every multi-index");
                multi_to_pass.push((m, pass));
            }
        }
        Ok(Self {
            rules,
            colloc,
            train,
            units,
        })
    }

    pub fn value(&self, net: &NetworkState) -> Result<f64> {
        self.eval(net, None)
    }

    /// Loss value plus `d loss / d theta` written into `grad` (overwritten).
    pub fn value_and_grad(&self, net: &NetworkState, grad: &mut [f64]) -> Result<f64> {
        grad.fill(0.0);
        self.eval(net, Some(grad))
    }

    fn eval(&self, net: &NetworkState, mut grad: Option<&mut [f64]>) -> Result<f64> {
        let mut total = 0.0;
        if let Some((inputs, targets)) = &self.train {
            if inputs.nrows() > 0 {
                total += mse_loss(
                    net,
                    inputs.view(),
                    targets.view(),
                    1.0,
                    grad.as_deref_mut(),
                )?;
            }
        }
        for unit in &self.units {
            total += match unit {
                Unit::Pointwise {
                    colloc_idx,
                    rule_indices,
                    passes,
                    multi_to_pass,
                } => self.eval_pointwise_unit(
                    net,
                    &self.colloc[*colloc_idx],
                    rule_indices,
                    passes,
                    multi_to_pass,
                    grad.as_deref_mut(),
                )?,
                Unit::Periodic {
                    rule_index,
                    low_pts,
                    high_pts,
                } => self.eval_periodic_unit(
                    net,
                    *rule_index,
                    low_pts,
                    high_pts,
                    grad.as_deref_mut(),
                )?,
            };
        }
        Ok(total)
    }

    fn eval_pointwise_unit(
        &self,
        net: &NetworkState,
        colloc: &CollocationSet,
        rule_indices: &[usize],
        passes: &[JetShape],
        multi_to_pass: &[(Vec<usize>, usize)],
        mut grad: Option<&mut [f64]>,
    ) -> Result<f64> {
        let input_dim = self.rules.input_dim();
        let p = colloc.len();
        let recs: Vec<PassRecord> = passes
            .iter()
            .map(|s| jet_forward(net, colloc.points.view(), s))
            .collect::<Result<_>>()?;
        let mut adjoints: Vec<Option<Array2<f64>>> = recs
            .iter()
            .map(|r| grad.is_some().then(|| r.zero_adjoint()))
            .collect();

        let pass_of = |multi: &[usize]| -> usize {
            multi_to_pass
                .iter()
                .find(|(m, _)| m == multi)
                .expect("planned multi-index")
                .1
        };

        let mut total = 0.0;
        for &ri in rule_indices {
            let rule = self.rules.get(ri)?;
            let RuleForm::Pointwise { components } = &rule.form else {
                unreachable!("pointwise unit holds pointwise rules");
            };
            let slots = rule.field_refs();
            let canon: Vec<Vec<usize>> = slots
                .iter()
                .map(|f| {
                    if f.multi.is_empty() {
                        vec![0; input_dim]
                    } else {
                        f.multi.clone()
                    }
                })
                .collect();
            let mut values = Vec::with_capacity(slots.len());
            for (f, m) in slots.iter().zip(&canon) {
                values.push(recs[pass_of(m)].extract(f.channel, m)?);
            }
            let denom = (p * components.len()) as f64;
            let lambda = rule.weight;
            let mut slot_adj = vec![vec![0.0; p]; slots.len()];
            let mut fields = vec![0.0; slots.len()];
            let mut partials = vec![0.0; slots.len()];
            let mut acc = 0.0;
            for pi in 0..p {
                let coords = colloc.points.row(pi);
                let coords = coords.as_slice().expect("contiguous row");
                for (k, v) in values.iter().enumerate() {
                    fields[k] = v[pi];
                }
                for c in components {
                    let v = c.lhs.eval(coords, &slots, &fields)
                        - c.target.eval(coords, &slots, &fields);
                    let (r, dr_dv) = penalized(rule.kind, v);
                    acc += r * r;
                    if grad.is_some() && r != 0.0 {
                        let seed = lambda * 2.0 * r * dr_dv / denom;
                        partials.fill(0.0);
                        c.lhs
                            .eval_with_partials(coords, &slots, &fields, seed, &mut partials);
                        c.target
                            .eval_with_partials(coords, &slots, &fields, -seed, &mut partials);
                        for (k, dv) in partials.iter().enumerate() {
                            slot_adj[k][pi] += dv;
                        }
                    }
                }
            }
            if !acc.is_finite() {
                return Err(Error::NonFinite(format!("rule {} loss", rule.index)));
            }
            total += lambda * (acc / denom);
            if grad.is_some() {
                for (k, (f, m)) in slots.iter().zip(&canon).enumerate() {
                    let pass = pass_of(m);
                    let adj = adjoints[pass].as_mut().expect("adjoint allocated");
                    recs[pass].seed_adjoint(adj, f.channel, m, &slot_adj[k])?;
                }
            }
        }
        if let Some(grad) = grad.as_deref_mut() {
            for (rec, adj) in recs.iter().zip(adjoints.into_iter()) {
                jet_reverse(net, rec, adj.expect("adjoint allocated"), grad)?;
            }
        }
        Ok(total)
    }

    fn eval_periodic_unit(
        &self,
        net: &NetworkState,
        rule_index: usize,
        low_pts: &Array2<f64>,
        high_pts: &Array2<f64>,
        grad: Option<&mut [f64]>,
    ) -> Result<f64> {
        let rule = self.rules.get(rule_index)?;
        let RuleForm::PeriodicPair { channel, .. } = rule.form else {
            unreachable!("periodic unit holds a periodic rule");
        };
        let input_dim = self.rules.input_dim();
        let zero = vec![0usize; input_dim];
        let shape = JetShape::scalar();
        let rec_a = jet_forward(net, low_pts.view(), &shape)?;
        let rec_b = jet_forward(net, high_pts.view(), &shape)?;
        let a = rec_a.extract(channel, &zero)?;
        let b = rec_b.extract(channel, &zero)?;
        let p = a.len();
        let mut acc = 0.0;
        let mut seeds = grad.is_some().then(|| vec![0.0; p]);
        for pi in 0..p {
            let r = a[pi] - b[pi];
            acc += r * r;
            if let Some(s) = seeds.as_mut() {
                s[pi] = rule.weight * 2.0 * r / p as f64;
            }
        }
        if !acc.is_finite() {
            return Err(Error::NonFinite(format!("rule {rule_index} loss")));
        }
        if let Some(grad) = grad {
            let seeds = seeds.expect("seeds allocated");
            let mut adj_a = rec_a.zero_adjoint();
            rec_a.seed_adjoint(&mut adj_a, channel, &zero, &seeds)?;
            jet_reverse(net, &rec_a, adj_a, grad)?;
            let neg: Vec<f64> = seeds.iter().map(|s| -s).collect();
            let mut adj_b = rec_b.zero_adjoint();
            rec_b.seed_adjoint(&mut adj_b, channel, &zero, &neg)?;
            jet_reverse(net, &rec_b, adj_b, grad)?;
        }
        Ok(rule.weight * acc / p as f64)
    }
}
