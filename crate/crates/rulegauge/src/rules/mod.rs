//! Formalized prior knowledge: weighted residual losses over collocation
//! sets, and the coalition algebra over rule subsets.

pub mod coalition;
pub mod expr;
mod loss;
mod region;

pub use coalition::{
    binomial, coalitions_containing, enumerate_coalitions, relying_groups, Coalition, MAX_RULES,
};
pub use expr::{Expr, FieldRef};
pub use loss::{composite_loss, rule_loss, CompositeLoss, FieldEval};
pub use region::{CollocationSet, Layout, Region};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleKind {
    PdeResidual,
    InitialCondition,
    BoundaryCondition,
    AlgebraicRelation,
    InequalityConstraint,
}

/// Global rules constrain the whole definition domain, local rules only an
/// observable face of it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    Global,
    Local,
}

/// One scalar residual: `lhs - target` must vanish on the true solution
/// (equality rules) or `lhs - target` must be positive (inequality rules).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualComponent {
    pub lhs: Expr,
    pub target: Expr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RuleForm {
    /// Residual components evaluated pointwise on the collocation set.
    Pointwise { components: Vec<ResidualComponent> },
    /// A periodic match `u(.., low, ..) == u(.., high, ..)` along one axis;
    /// collocation points sit on the `low` face.
    PeriodicPair {
        channel: usize,
        axis: usize,
        low: f64,
        high: f64,
    },
}

/// One formalized rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleSpec {
    /// 1-based index within its rule set.
    pub index: usize,
    pub name: String,
    pub kind: RuleKind,
    pub scope: Scope,
    pub form: RuleForm,
    pub region: Region,
    /// Loss weight lambda, >= 0.
    pub weight: f64,
}

impl RuleSpec {
    /// Every network quantity the residual references.
    pub fn field_refs(&self) -> Vec<FieldRef> {
        match &self.form {
            RuleForm::Pointwise { components } => {
                let mut out = Vec::new();
                for c in components {
                    for f in c.lhs.field_refs().into_iter().chain(c.target.field_refs()) {
                        if !out.contains(&f) {
                            out.push(f);
                        }
                    }
                }
                out
            }
            RuleForm::PeriodicPair { channel, .. } => vec![FieldRef {
                channel: *channel,
                multi: Vec::new(), // resolved against input_dim by the loss builder
            }],
        }
    }

    /// Highest total derivative order the residual needs.
    pub fn max_derivative_order(&self) -> usize {
        self.field_refs()
            .iter()
            .map(|f| f.multi.iter().sum())
            .max()
            .unwrap_or(0)
    }

    fn validate(&self, input_dim: usize, output_dim: usize) -> Result<()> {
        if self.weight < 0.0 || !self.weight.is_finite() {
            return Err(Error::InvalidSpec(format!(
                "rule {} weight must be finite and >= 0",
                self.index
            )));
        }
        match (self.kind, self.scope) {
            (RuleKind::PdeResidual, Scope::Local) => {
                return Err(Error::InvalidSpec(format!(
                    "rule {}: a PDE residual is a global rule",
                    self.index
                )))
            }
            (RuleKind::InitialCondition | RuleKind::BoundaryCondition, Scope::Global) => {
                return Err(Error::InvalidSpec(format!(
                    "rule {}: an initial/boundary condition is a local rule",
                    self.index
                )))
            }
            _ => {}
        }
        match &self.form {
            RuleForm::Pointwise { components } => {
                if components.is_empty() {
                    return Err(Error::InvalidSpec(format!(
                        "rule {} has no residual components",
                        self.index
                    )));
                }
                for c in components {
                    c.lhs.validate(input_dim, output_dim)?;
                    c.target.validate(input_dim, output_dim)?;
                }
            }
            RuleForm::PeriodicPair { channel, axis, .. } => {
                if *channel >= output_dim || *axis >= input_dim {
                    return Err(Error::InvalidSpec(format!(
                        "rule {}: periodic pair indices out of range",
                        self.index
                    )));
                }
            }
        }
        Ok(())
    }
}

/// A structured rewrite of one rule, used by wrong-rule scans and config
/// overrides. Targets are rewritten; the governing operator side is kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Perturbation {
    /// No change; scans use it as the control scenario.
    Identity,
    /// Replace the target with a constant.
    SetTarget { value: f64 },
    /// Multiply the target by a factor.
    ScaleTarget { factor: f64 },
    /// Add a constant to the target.
    ShiftTarget { delta: f64 },
    /// Multiply the argument of every trig term in the target by a factor.
    ScaleFrequency { factor: f64 },
}

impl Perturbation {
    pub fn is_identity(&self) -> bool {
        matches!(self, Perturbation::Identity)
    }

    pub fn apply(&self, rule: &RuleSpec) -> Result<RuleSpec> {
        if self.is_identity() {
            return Ok(rule.clone());
        }
        let mut out = rule.clone();
        match &mut out.form {
            RuleForm::Pointwise { components } => {
                for c in components.iter_mut() {
                    c.target = match self {
                        Perturbation::Identity => unreachable!(),
                        Perturbation::SetTarget { value } => Expr::constant(*value),
                        Perturbation::ScaleTarget { factor } => {
                            Expr::constant(*factor) * c.target.clone()
                        }
                        Perturbation::ShiftTarget { delta } => {
                            c.target.clone() + Expr::constant(*delta)
                        }
                        Perturbation::ScaleFrequency { factor } => {
                            c.target.scale_trig_frequency(*factor)
                        }
                    };
                }
            }
            RuleForm::PeriodicPair { .. } => {
                return Err(Error::InvalidPerturbation(format!(
                    "rule {} is a periodic pair; only identity applies",
                    rule.index
                )))
            }
        }
        Ok(out)
    }
}

/// The indexed collection of all rules of one problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleSet {
    rules: Vec<RuleSpec>,
    input_dim: usize,
    output_dim: usize,
}

impl RuleSet {
    pub fn new(rules: Vec<RuleSpec>, input_dim: usize, output_dim: usize) -> Result<Self> {
        if rules.len() > MAX_RULES {
            return Err(Error::TooManyRules {
                n: rules.len(),
                max: MAX_RULES,
            });
        }
        for (k, rule) in rules.iter().enumerate() {
            if rule.index != k + 1 {
                return Err(Error::InvalidSpec(format!(
                    "rule indices must be contiguous from 1; rule {} at position {}",
                    rule.index,
                    k + 1
                )));
            }
            rule.validate(input_dim, output_dim)?;
        }
        Ok(Self {
            rules,
            input_dim,
            output_dim,
        })
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    /// 1-based lookup.
    pub fn get(&self, index: usize) -> Result<&RuleSpec> {
        self.rules.get(index.wrapping_sub(1)).ok_or(Error::RuleIndexOutOfRange {
            index,
            n_rules: self.rules.len(),
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = &RuleSpec> {
        self.rules.iter()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.rules.iter().map(|r| r.weight).collect()
    }

    #[must_use = "returns a modified copy"]
    pub fn with_weights(&self, weights: &[f64]) -> Result<Self> {
        if weights.len() != self.rules.len() {
            return Err(Error::DimensionMismatch {
                expected: self.rules.len(),
                got: weights.len(),
            });
        }
        let mut out = self.clone();
        for (rule, &w) in out.rules.iter_mut().zip(weights) {
            if w < 0.0 || !w.is_finite() {
                return Err(Error::InvalidSpec(format!(
                    "rule {} weight must be finite and >= 0",
                    rule.index
                )));
            }
            rule.weight = w;
        }
        Ok(out)
    }

    /// Remove one rule; the remaining rules are re-indexed contiguously but
    /// keep their names.
    #[must_use = "returns a modified copy"]
    pub fn drop_rule(&self, index: usize) -> Result<Self> {
        self.get(index)?;
        let mut rules = self.rules.clone();
        rules.remove(index - 1);
        for (k, rule) in rules.iter_mut().enumerate() {
            rule.index = k + 1;
        }
        Self::new(rules, self.input_dim, self.output_dim)
    }

    #[must_use = "returns a modified copy"]
    pub fn perturb(&self, index: usize, perturbation: &Perturbation) -> Result<Self> {
        let rule = self.get(index)?;
        let mut out = self.clone();
        out.rules[index - 1] = perturbation.apply(rule)?;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn face_rule(index: usize, target: Expr) -> RuleSpec {
        RuleSpec {
            index,
            name: format!("rule{index}"),
            kind: RuleKind::BoundaryCondition,
            scope: Scope::Local,
            form: RuleForm::Pointwise {
                components: vec![ResidualComponent {
                    lhs: Expr::field(0, vec![0, 0]),
                    target,
                }],
            },
            region: Region::Face { axis: 0, value: 0.0 },
            weight: 1.0,
        }
    }

    #[test]
    fn kind_scope_invariants_enforced() {
        let mut bad = face_rule(1, Expr::constant(0.0));
        bad.kind = RuleKind::PdeResidual;
        bad.scope = Scope::Local;
        assert!(RuleSet::new(vec![bad], 2, 1).is_err());

        let mut bad2 = face_rule(1, Expr::constant(0.0));
        bad2.scope = Scope::Global;
        assert!(RuleSet::new(vec![bad2], 2, 1).is_err());
    }

    #[test]
    fn indices_must_be_contiguous() {
        let r = face_rule(2, Expr::constant(0.0));
        assert!(RuleSet::new(vec![r], 2, 1).is_err());
    }

    #[test]
    fn drop_rule_reindexes() {
        let set = RuleSet::new(
            vec![
                face_rule(1, Expr::constant(0.0)),
                face_rule(2, Expr::constant(1.0)),
                face_rule(3, Expr::constant(2.0)),
            ],
            2,
            1,
        )
        .unwrap();
        let dropped = set.drop_rule(2).unwrap();
        assert_eq!(dropped.len(), 2);
        assert_eq!(dropped.get(2).unwrap().name, "rule3");
    }

    #[test]
    fn perturbations_rewrite_targets() {
        let set = RuleSet::new(vec![face_rule(1, Expr::constant(0.0))], 2, 1).unwrap();
        let p = set.perturb(1, &Perturbation::SetTarget { value: 0.1 }).unwrap();
        match &p.get(1).unwrap().form {
            RuleForm::Pointwise { components } => {
                assert_eq!(components[0].target, Expr::constant(0.1));
            }
            _ => panic!("expected pointwise"),
        }
        let id = set.perturb(1, &Perturbation::Identity).unwrap();
        assert_eq!(&id, &set);
    }

    #[test]
    fn negative_weight_rejected() {
        let set = RuleSet::new(vec![face_rule(1, Expr::constant(0.0))], 2, 1).unwrap();
        assert!(set.with_weights(&[-1.0]).is_err());
        assert!(set.with_weights(&[2.5]).is_ok());
    }
}
