//! The benchmark problems: definitions, rule sets, reference data, splits.
//!
//! Each problem fixes its input/output variables, definition domain, default
//! network, data source, and rule set. Three problems carry in-repo
//! reference generators (the algebraic multi-variable system, the 2-D plate
//! equation with an exact solution, and the convection-diffusion equation
//! solved by Crank-Nicolson); the shock/dispersive/relativistic equations
//! ingest externally simulated data from CSV files.

mod dataset;
mod generate;
mod split;

pub use dataset::{ingest_dataset, read_dataset_csv, write_dataset_csv, Dataset, IngestReport, Source};
pub use generate::{
    generate_multivar, generate_pde2d, multivar_outputs, pde2d_solution, solve_convdiff_fd,
};
pub use split::{add_noise, split, SplitData, SplitManifest, SplitMode, SplitSpec};

use crate::error::{Error, Result};
use crate::net::{Activation, NetworkSpec};
use crate::rules::{
    CollocationSet, Expr, Region, ResidualComponent, RuleForm, RuleKind, RuleSet, RuleSpec, Scope,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemId {
    Burgers,
    Kdv,
    KleinGordon,
    ConvDiff,
    MultiVar,
    Pde2d,
}

impl ProblemId {
    pub fn all() -> [ProblemId; 6] {
        [
            ProblemId::Burgers,
            ProblemId::Kdv,
            ProblemId::KleinGordon,
            ProblemId::ConvDiff,
            ProblemId::MultiVar,
            ProblemId::Pde2d,
        ]
    }
}

impl std::fmt::Display for ProblemId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ProblemId::Burgers => "burgers",
            ProblemId::Kdv => "kdv",
            ProblemId::KleinGordon => "klein-gordon",
            ProblemId::ConvDiff => "convdiff",
            ProblemId::MultiVar => "multivar",
            ProblemId::Pde2d => "pde2d",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for ProblemId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "burgers" => Ok(ProblemId::Burgers),
            "kdv" => Ok(ProblemId::Kdv),
            "klein-gordon" | "kg" => Ok(ProblemId::KleinGordon),
            "convdiff" | "convection-diffusion" => Ok(ProblemId::ConvDiff),
            "multivar" => Ok(ProblemId::MultiVar),
            "pde2d" => Ok(ProblemId::Pde2d),
            other => Err(Error::Config(format!("unknown problem `{other}`"))),
        }
    }
}

/// How the test region relates to the training region under extrapolation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ExtrapolationSplit {
    /// Train where `x[axis] < cut`, test where `x[axis] >= cut`.
    AxisCut { axis: usize, cut: f64 },
    /// Test inside the box, train on the rest of the domain.
    InnerBox { intervals: Vec<[f64; 2]> },
    /// Test region lies outside the reference dataset entirely; test rows
    /// are generated from the closed form on this box.
    OuterBox { intervals: Vec<[f64; 2]> },
}

/// Everything fixed about one benchmark problem.
#[derive(Debug, Clone)]
pub struct ProblemDef {
    pub id: ProblemId,
    pub input_names: Vec<&'static str>,
    pub output_names: Vec<&'static str>,
    pub domain: Vec<[f64; 2]>,
    pub default_net: NetworkSpec,
    pub source: Source,
    /// Reference grid shape of the full dataset (per input axis).
    pub full_grid: Vec<usize>,
    pub extrapolation: ExtrapolationSplit,
}

impl ProblemDef {
    pub fn get(id: ProblemId) -> ProblemDef {
        let spec = |out: usize, layers: usize, act: Activation| {
            NetworkSpec::new(2, out, layers, 50, act).expect("static spec")
        };
        match id {
            ProblemId::Burgers => ProblemDef {
                id,
                input_names: vec!["x", "t"],
                output_names: vec!["u"],
                domain: vec![[-1.0, 1.0], [0.0, 1.0]],
                default_net: spec(1, 5, Activation::Sin),
                source: Source::Ingested,
                full_grid: vec![256, 100],
                extrapolation: ExtrapolationSplit::AxisCut { axis: 1, cut: 0.5 },
            },
            ProblemId::Kdv => ProblemDef {
                id,
                input_names: vec!["x", "t"],
                output_names: vec!["u"],
                domain: vec![[-1.0, 1.0], [0.0, 1.0]],
                default_net: spec(1, 5, Activation::Sin),
                source: Source::Ingested,
                full_grid: vec![512, 201],
                extrapolation: ExtrapolationSplit::AxisCut { axis: 1, cut: 0.5 },
            },
            ProblemId::KleinGordon => ProblemDef {
                id,
                input_names: vec!["x", "t"],
                output_names: vec!["u"],
                domain: vec![[-1.0, 1.0], [0.0, 3.0]],
                default_net: spec(1, 5, Activation::Sin),
                source: Source::Ingested,
                full_grid: vec![201, 201],
                extrapolation: ExtrapolationSplit::AxisCut { axis: 1, cut: 1.5 },
            },
            ProblemId::ConvDiff => ProblemDef {
                id,
                input_names: vec!["x", "t"],
                output_names: vec!["u"],
                domain: vec![[0.0, 2.0], [0.0, 1.0]],
                default_net: spec(1, 5, Activation::Tanh),
                source: Source::FiniteDifference,
                full_grid: vec![256, 100],
                extrapolation: ExtrapolationSplit::AxisCut { axis: 1, cut: 0.5 },
            },
            ProblemId::MultiVar => ProblemDef {
                id,
                input_names: vec!["a", "b"],
                output_names: vec!["c", "d", "e", "f"],
                domain: vec![[0.0, std::f64::consts::PI], [-std::f64::consts::PI, 0.0]],
                default_net: spec(4, 3, Activation::Relu),
                source: Source::Analytic,
                full_grid: vec![160, 160],
                extrapolation: ExtrapolationSplit::OuterBox {
                    intervals: vec![
                        [std::f64::consts::PI, 2.0 * std::f64::consts::PI],
                        [std::f64::consts::PI, 2.0 * std::f64::consts::PI],
                    ],
                },
            },
            ProblemId::Pde2d => ProblemDef {
                id,
                input_names: vec!["x", "y"],
                output_names: vec!["u"],
                domain: vec![[0.0, 1.0], [0.0, 1.0]],
                default_net: spec(1, 3, Activation::Relu),
                source: Source::Analytic,
                full_grid: vec![201, 201],
                extrapolation: ExtrapolationSplit::InnerBox {
                    intervals: vec![[0.25, 0.75], [0.25, 0.75]],
                },
            },
        }
    }

    /// The problem's rule set with default weights (all 1).
    pub fn rule_set(&self) -> RuleSet {
        let rules = match self.id {
            ProblemId::Burgers => burgers_rules(),
            ProblemId::Kdv => kdv_rules(),
            ProblemId::KleinGordon => klein_gordon_rules(),
            ProblemId::ConvDiff => convdiff_rules(),
            ProblemId::MultiVar => multivar_rules(),
            ProblemId::Pde2d => pde2d_rules(),
        };
        RuleSet::new(rules, 2, self.output_names.len()).expect("static rule sets are valid")
    }

    /// Domain over which global-rule collocation grids are laid out. The
    /// multi-variable system uses an enlarged "outer" box by default so the
    /// rules constrain the extrapolation region too.
    pub fn collocation_domain(&self, outer: bool) -> Vec<[f64; 2]> {
        if self.id == ProblemId::MultiVar && outer {
            vec![
                [0.0, 2.0 * std::f64::consts::PI],
                [-std::f64::consts::PI, 2.0 * std::f64::consts::PI],
            ]
        } else {
            self.domain.clone()
        }
    }

    /// Default interior collocation grid shape.
    pub fn default_interior_shape(&self) -> Vec<usize> {
        match self.id {
            ProblemId::Burgers => vec![200, 200],
            ProblemId::MultiVar => vec![64, 64],
            _ => vec![100, 100],
        }
    }

    /// Default number of collocation points on each face rule.
    pub fn default_face_points(&self) -> usize {
        256
    }
}

/// Collocation sizing, overridable from the experiment config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollocationConfig {
    /// Interior grid shape for full-domain rules.
    pub interior: Vec<usize>,
    /// Points per face rule.
    pub face: usize,
    /// Multi-variable system only: lay interior grids over the enlarged
    /// outer domain (default) or restrict them to the training domain.
    pub outer: bool,
}

impl CollocationConfig {
    pub fn defaults_for(problem: &ProblemDef) -> Self {
        Self {
            interior: problem.default_interior_shape(),
            face: problem.default_face_points(),
            outer: true,
        }
    }
}

/// One collocation set per rule, laid out over the rule's region.
pub fn build_collocation(
    problem: &ProblemDef,
    rules: &RuleSet,
    cfg: &CollocationConfig,
) -> Result<Vec<CollocationSet>> {
    let interior_domain = problem.collocation_domain(cfg.outer);
    let mut out = Vec::with_capacity(rules.len());
    for rule in rules.iter() {
        let set = match &rule.region {
            Region::FullDomain => CollocationSet::full_grid(&interior_domain, &cfg.interior)?,
            Region::Domain { intervals } => CollocationSet::full_grid(intervals, &cfg.interior)?,
            Region::Face { axis, value } => {
                CollocationSet::face_grid(&problem.domain, *axis, *value, &[cfg.face])?
            }
        };
        debug_assert!(set.check_region(&rule.region, &interior_domain));
        out.push(set);
    }
    Ok(out)
}

// ---- rule definitions ----

fn u() -> Expr {
    Expr::field(0, vec![0, 0])
}

fn eq(lhs: Expr, target: Expr) -> Vec<ResidualComponent> {
    vec![ResidualComponent { lhs, target }]
}

fn pde_rule(index: usize, components: Vec<ResidualComponent>) -> RuleSpec {
    RuleSpec {
        index,
        name: "PDE".into(),
        kind: RuleKind::PdeResidual,
        scope: Scope::Global,
        form: RuleForm::Pointwise { components },
        region: Region::FullDomain,
        weight: 1.0,
    }
}

fn face_rule(
    index: usize,
    name: &str,
    kind: RuleKind,
    axis: usize,
    value: f64,
    components: Vec<ResidualComponent>,
) -> RuleSpec {
    RuleSpec {
        index,
        name: name.into(),
        kind,
        scope: Scope::Local,
        form: RuleForm::Pointwise { components },
        region: Region::Face { axis, value },
        weight: 1.0,
    }
}

fn burgers_rules() -> Vec<RuleSpec> {
    let pi = std::f64::consts::PI;
    let ut = Expr::field(0, vec![0, 1]);
    let ux = Expr::field(0, vec![1, 0]);
    let uxx = Expr::field(0, vec![2, 0]);
    vec![
        pde_rule(
            1,
            eq(
                ut + u() * ux - Expr::constant(0.01 / pi) * uxx,
                Expr::constant(0.0),
            ),
        ),
        face_rule(
            2,
            "IC",
            RuleKind::InitialCondition,
            1,
            0.0,
            eq(u(), -(Expr::constant(pi) * Expr::coord(0)).sin()),
        ),
        face_rule(
            3,
            "LBC",
            RuleKind::BoundaryCondition,
            0,
            -1.0,
            eq(u(), Expr::constant(0.0)),
        ),
        face_rule(
            4,
            "RBC",
            RuleKind::BoundaryCondition,
            0,
            1.0,
            eq(u(), Expr::constant(0.0)),
        ),
    ]
}

fn kdv_rules() -> Vec<RuleSpec> {
    let pi = std::f64::consts::PI;
    let ut = Expr::field(0, vec![0, 1]);
    let ux = Expr::field(0, vec![1, 0]);
    let uxxx = Expr::field(0, vec![3, 0]);
    vec![
        pde_rule(
            1,
            eq(
                ut + u() * ux + Expr::constant(0.0025) * uxxx,
                Expr::constant(0.0),
            ),
        ),
        face_rule(
            2,
            "IC",
            RuleKind::InitialCondition,
            1,
            0.0,
            eq(u(), (Expr::constant(pi) * Expr::coord(0)).cos()),
        ),
        // The periodic boundary couples both faces and counts as one rule.
        RuleSpec {
            index: 3,
            name: "LBC+RBC".into(),
            kind: RuleKind::BoundaryCondition,
            scope: Scope::Local,
            form: RuleForm::PeriodicPair {
                channel: 0,
                axis: 0,
                low: -1.0,
                high: 1.0,
            },
            region: Region::Face { axis: 0, value: -1.0 },
            weight: 1.0,
        },
    ]
}

fn klein_gordon_rules() -> Vec<RuleSpec> {
    let pi = std::f64::consts::PI;
    let utt = Expr::field(0, vec![0, 2]);
    let uxx = Expr::field(0, vec![2, 0]);
    let x = Expr::coord(0);
    let ic_target = (-(Expr::constant(20.0) * x.clone() * x.clone())).exp()
        * ((Expr::constant(pi) * x.clone()).sin() + (Expr::constant(2.0 * pi) * x).sin());
    vec![
        pde_rule(
            1,
            eq(
                utt + Expr::constant(5.0) * u() - Expr::constant(0.5) * uxx,
                Expr::constant(0.0),
            ),
        ),
        face_rule(2, "IC", RuleKind::InitialCondition, 1, 0.0, eq(u(), ic_target)),
        face_rule(
            3,
            "LBC",
            RuleKind::BoundaryCondition,
            0,
            -1.0,
            eq(u(), Expr::constant(0.0)),
        ),
        face_rule(
            4,
            "RBC",
            RuleKind::BoundaryCondition,
            0,
            1.0,
            eq(u(), Expr::constant(0.0)),
        ),
    ]
}

fn convdiff_rules() -> Vec<RuleSpec> {
    let pi = std::f64::consts::PI;
    let ut = Expr::field(0, vec![0, 1]);
    let ux = Expr::field(0, vec![1, 0]);
    let uxx = Expr::field(0, vec![2, 0]);
    let x = Expr::coord(0);
    vec![
        pde_rule(
            1,
            eq(ut + ux - Expr::constant(0.25) * uxx, Expr::constant(0.0)),
        ),
        face_rule(
            2,
            "IC",
            RuleKind::InitialCondition,
            1,
            0.0,
            eq(u(), (Expr::constant(pi) * x.clone()).sin() * (-x).exp()),
        ),
        face_rule(
            3,
            "LBC",
            RuleKind::BoundaryCondition,
            0,
            0.0,
            eq(u(), Expr::constant(0.0)),
        ),
        face_rule(
            4,
            "RBC",
            RuleKind::BoundaryCondition,
            0,
            2.0,
            eq(u(), Expr::constant(0.0)),
        ),
    ]
}

fn multivar_rules() -> Vec<RuleSpec> {
    let a = Expr::coord(0);
    let b = Expr::coord(1);
    let zero2 = vec![0, 0];
    let c = Expr::field(0, zero2.clone());
    let d = Expr::field(1, zero2.clone());
    let e = Expr::field(2, zero2.clone());
    let f = Expr::field(3, zero2);
    let algebraic = |index: usize, name: &str, lhs: Expr, target: Expr| RuleSpec {
        index,
        name: name.into(),
        kind: RuleKind::AlgebraicRelation,
        scope: Scope::Global,
        form: RuleForm::Pointwise {
            components: eq(lhs, target),
        },
        region: Region::FullDomain,
        weight: 1.0,
    };
    vec![
        algebraic(1, "c-relation", c.clone(), (a.clone().sin() - b.clone().cos()).abs()),
        algebraic(
            2,
            "d-relation",
            d,
            ((a - b).powi(2) + Expr::constant(1.0)).ln(),
        ),
        algebraic(
            3,
            "e-relation",
            e.clone(),
            Expr::constant(0.5) * (Expr::constant(1.0) + c.powi(2)),
        ),
        algebraic(4, "f-relation", f.clone(), (-e.clone()).exp()),
        RuleSpec {
            index: 5,
            name: "positivity".into(),
            kind: RuleKind::InequalityConstraint,
            scope: Scope::Global,
            form: RuleForm::Pointwise {
                components: vec![
                    ResidualComponent {
                        lhs: e,
                        target: Expr::constant(0.0),
                    },
                    ResidualComponent {
                        lhs: f,
                        target: Expr::constant(0.0),
                    },
                ],
            },
            region: Region::FullDomain,
            weight: 1.0,
        },
    ]
}

fn pde2d_rules() -> Vec<RuleSpec> {
    let x = Expr::coord(0);
    let y = Expr::coord(1);
    let uxx = Expr::field(0, vec![2, 0]);
    let uyyyy = Expr::field(0, vec![0, 4]);
    let uyy = Expr::field(0, vec![0, 2]);
    let inv_e = Expr::constant((-1.0_f64).exp());
    let x_sq = || Expr::coord(0).powi(2);
    vec![
        pde_rule(
            1,
            eq(
                uxx - uyyyy,
                (Expr::constant(2.0) - x.powi(2)) * (-y.clone()).exp(),
            ),
        ),
        face_rule(
            2,
            "curvature-y0",
            RuleKind::BoundaryCondition,
            1,
            0.0,
            eq(uyy.clone(), x_sq()),
        ),
        face_rule(
            3,
            "curvature-y1",
            RuleKind::BoundaryCondition,
            1,
            1.0,
            eq(uyy, inv_e.clone() * x_sq()),
        ),
        face_rule(4, "value-y0", RuleKind::BoundaryCondition, 1, 0.0, eq(u(), x_sq())),
        face_rule(
            5,
            "value-y1",
            RuleKind::BoundaryCondition,
            1,
            1.0,
            eq(u(), inv_e * x_sq()),
        ),
        face_rule(
            6,
            "value-x0",
            RuleKind::BoundaryCondition,
            0,
            0.0,
            eq(u(), Expr::constant(0.0)),
        ),
        face_rule(
            7,
            "value-x1",
            RuleKind::BoundaryCondition,
            0,
            1.0,
            eq(u(), (-y).exp()),
        ),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_problem_has_a_valid_rule_set() {
        for id in ProblemId::all() {
            let p = ProblemDef::get(id);
            let rules = p.rule_set();
            assert!(!rules.is_empty());
            assert_eq!(rules.output_dim(), p.output_names.len());
        }
    }

    #[test]
    fn rule_counts_match_the_problem_statements() {
        assert_eq!(ProblemDef::get(ProblemId::Burgers).rule_set().len(), 4);
        assert_eq!(ProblemDef::get(ProblemId::Kdv).rule_set().len(), 3);
        assert_eq!(ProblemDef::get(ProblemId::KleinGordon).rule_set().len(), 4);
        assert_eq!(ProblemDef::get(ProblemId::ConvDiff).rule_set().len(), 4);
        assert_eq!(ProblemDef::get(ProblemId::MultiVar).rule_set().len(), 5);
        assert_eq!(ProblemDef::get(ProblemId::Pde2d).rule_set().len(), 7);
    }

    #[test]
    fn default_nets_match_the_experimental_settings() {
        let burgers = ProblemDef::get(ProblemId::Burgers);
        assert_eq!(burgers.default_net.hidden_layers, 5);
        assert_eq!(burgers.default_net.hidden_width, 50);
        assert_eq!(burgers.default_net.activation, Activation::Sin);
        let convdiff = ProblemDef::get(ProblemId::ConvDiff);
        assert_eq!(convdiff.default_net.activation, Activation::Tanh);
        let multivar = ProblemDef::get(ProblemId::MultiVar);
        assert_eq!(multivar.default_net.hidden_layers, 3);
        assert_eq!(multivar.default_net.activation, Activation::Relu);
        assert_eq!(multivar.default_net.output_dim, 4);
        let pde2d = ProblemDef::get(ProblemId::Pde2d);
        assert_eq!(pde2d.default_net.activation, Activation::Relu);
    }

    #[test]
    fn collocation_table_covers_every_rule() {
        for id in ProblemId::all() {
            let p = ProblemDef::get(id);
            let rules = p.rule_set();
            let mut cfg = CollocationConfig::defaults_for(&p);
            cfg.interior = vec![6, 6];
            cfg.face = 8;
            let table = build_collocation(&p, &rules, &cfg).unwrap();
            assert_eq!(table.len(), rules.len());
            for set in &table {
                assert!(!set.is_empty());
            }
        }
    }

    #[test]
    fn multivar_outer_collocation_covers_the_extrapolation_box() {
        let p = ProblemDef::get(ProblemId::MultiVar);
        let rules = p.rule_set();
        let cfg = CollocationConfig {
            interior: vec![9, 9],
            face: 8,
            outer: true,
        };
        let table = build_collocation(&p, &rules, &cfg).unwrap();
        let pi = std::f64::consts::PI;
        let has_outer = table[0]
            .points
            .outer_iter()
            .any(|r| r[0] > pi && r[1] > pi);
        assert!(has_outer);

        let inner_cfg = CollocationConfig {
            outer: false,
            ..cfg
        };
        let inner = build_collocation(&p, &rules, &inner_cfg).unwrap();
        assert!(inner[0]
            .points
            .outer_iter()
            .all(|r| r[0] <= pi + 1e-12 && r[1] <= 1e-12));
    }
}
