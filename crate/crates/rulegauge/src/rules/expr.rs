//! Residual expressions: small closed ASTs over the collocation point's
//! coordinates and the network's outputs/derivatives at that point.
//!
//! Rules are data, not closures, so they can be hashed into a config digest,
//! rewritten by wrong-rule perturbations, and differentiated with respect to
//! the network quantities they reference.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// One network quantity: output `channel` differentiated by `multi` (a
/// per-input-dimension multi-index; all zeros for the plain output).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FieldRef {
    pub channel: usize,
    pub multi: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Expr {
    Const(f64),
    /// Input coordinate of the collocation point.
    Coord(usize),
    /// Network output or input-derivative at the point.
    Field(FieldRef),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Abs(Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Exp(Box<Expr>),
    Ln(Box<Expr>),
    Powi(Box<Expr>, i32),
    /// max(0, x); used for inequality penalties.
    Relu(Box<Expr>),
}

impl Expr {
    pub fn field(channel: usize, multi: Vec<usize>) -> Self {
        Expr::Field(FieldRef { channel, multi })
    }

    pub fn coord(j: usize) -> Self {
        Expr::Coord(j)
    }

    pub fn constant(v: f64) -> Self {
        Expr::Const(v)
    }

    pub fn sin(self) -> Self {
        Expr::Sin(Box::new(self))
    }

    pub fn cos(self) -> Self {
        Expr::Cos(Box::new(self))
    }

    pub fn exp(self) -> Self {
        Expr::Exp(Box::new(self))
    }

    pub fn ln(self) -> Self {
        Expr::Ln(Box::new(self))
    }

    pub fn abs(self) -> Self {
        Expr::Abs(Box::new(self))
    }

    pub fn powi(self, k: i32) -> Self {
        Expr::Powi(Box::new(self), k)
    }

    pub fn relu(self) -> Self {
        Expr::Relu(Box::new(self))
    }

    /// Distinct field references in first-use order.
    pub fn field_refs(&self) -> Vec<FieldRef> {
        let mut out = Vec::new();
        self.collect_fields(&mut out);
        out
    }

    fn collect_fields(&self, out: &mut Vec<FieldRef>) {
        match self {
            Expr::Field(f) => {
                if !out.contains(f) {
                    out.push(f.clone());
                }
            }
            Expr::Const(_) | Expr::Coord(_) => {}
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => {
                a.collect_fields(out);
                b.collect_fields(out);
            }
            Expr::Neg(a)
            | Expr::Abs(a)
            | Expr::Sin(a)
            | Expr::Cos(a)
            | Expr::Exp(a)
            | Expr::Ln(a)
            | Expr::Powi(a, _)
            | Expr::Relu(a) => a.collect_fields(out),
        }
    }

    /// Evaluate at one point. `fields[k]` is the value of `slots[k]`, where
    /// `slots` is the rule's resolved [`Expr::field_refs`] list.
    pub fn eval(&self, coords: &[f64], slots: &[FieldRef], fields: &[f64]) -> f64 {
        match self {
            Expr::Const(v) => *v,
            Expr::Coord(j) => coords[*j],
            Expr::Field(f) => {
                let k = slots.iter().position(|s| s == f).expect("resolved slot");
                fields[k]
            }
            Expr::Add(a, b) => a.eval(coords, slots, fields) + b.eval(coords, slots, fields),
            Expr::Sub(a, b) => a.eval(coords, slots, fields) - b.eval(coords, slots, fields),
            Expr::Mul(a, b) => a.eval(coords, slots, fields) * b.eval(coords, slots, fields),
            Expr::Neg(a) => -a.eval(coords, slots, fields),
            Expr::Abs(a) => a.eval(coords, slots, fields).abs(),
            Expr::Sin(a) => a.eval(coords, slots, fields).sin(),
            Expr::Cos(a) => a.eval(coords, slots, fields).cos(),
            Expr::Exp(a) => a.eval(coords, slots, fields).exp(),
            Expr::Ln(a) => a.eval(coords, slots, fields).ln(),
            Expr::Powi(a, k) => a.eval(coords, slots, fields).powi(*k),
            Expr::Relu(a) => a.eval(coords, slots, fields).max(0.0),
        }
    }

    /// Evaluate and accumulate `seed * d self / d fields[k]` into
    /// `partials[k]`. Nondifferentiable points (|x| at 0, kinks of max) use
    /// the usual subgradient conventions.
    pub fn eval_with_partials(
        &self,
        coords: &[f64],
        slots: &[FieldRef],
        fields: &[f64],
        seed: f64,
        partials: &mut [f64],
    ) -> f64 {
        match self {
            Expr::Const(v) => *v,
            Expr::Coord(j) => coords[*j],
            Expr::Field(f) => {
                let k = slots.iter().position(|s| s == f).expect("resolved slot");
                partials[k] += seed;
                fields[k]
            }
            Expr::Add(a, b) => {
                a.eval_with_partials(coords, slots, fields, seed, partials)
                    + b.eval_with_partials(coords, slots, fields, seed, partials)
            }
            Expr::Sub(a, b) => {
                a.eval_with_partials(coords, slots, fields, seed, partials)
                    - b.eval_with_partials(coords, slots, fields, -seed, partials)
            }
            Expr::Mul(a, b) => {
                let va = a.eval(coords, slots, fields);
                let vb = b.eval(coords, slots, fields);
                a.eval_with_partials(coords, slots, fields, seed * vb, partials);
                b.eval_with_partials(coords, slots, fields, seed * va, partials);
                va * vb
            }
            Expr::Neg(a) => -a.eval_with_partials(coords, slots, fields, -seed, partials),
            Expr::Abs(a) => {
                let v = a.eval(coords, slots, fields);
                let sign = if v > 0.0 {
                    1.0
                } else if v < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                a.eval_with_partials(coords, slots, fields, seed * sign, partials);
                v.abs()
            }
            Expr::Sin(a) => {
                let v = a.eval(coords, slots, fields);
                a.eval_with_partials(coords, slots, fields, seed * v.cos(), partials);
                v.sin()
            }
            Expr::Cos(a) => {
                let v = a.eval(coords, slots, fields);
                a.eval_with_partials(coords, slots, fields, -seed * v.sin(), partials);
                v.cos()
            }
            Expr::Exp(a) => {
                let v = a.eval(coords, slots, fields).exp();
                a.eval_with_partials(coords, slots, fields, seed * v, partials);
                v
            }
            Expr::Ln(a) => {
                let v = a.eval(coords, slots, fields);
                a.eval_with_partials(coords, slots, fields, seed / v, partials);
                v.ln()
            }
            Expr::Powi(a, k) => {
                let v = a.eval(coords, slots, fields);
                a.eval_with_partials(
                    coords,
                    slots,
                    fields,
                    seed * (*k as f64) * v.powi(k - 1),
                    partials,
                );
                v.powi(*k)
            }
            Expr::Relu(a) => {
                let v = a.eval(coords, slots, fields);
                let g = if v > 0.0 { 1.0 } else { 0.0 };
                a.eval_with_partials(coords, slots, fields, seed * g, partials);
                v.max(0.0)
            }
        }
    }

    /// Multiply the argument of every trig node by `factor` (used by the
    /// frequency perturbation, e.g. sin(pi x) -> sin(1.1 pi x)).
    pub fn scale_trig_frequency(&self, factor: f64) -> Expr {
        let rec = |e: &Expr| Box::new(e.scale_trig_frequency(factor));
        match self {
            Expr::Sin(a) => Expr::Sin(Box::new(Expr::Mul(
                Box::new(Expr::Const(factor)),
                rec(a),
            ))),
            Expr::Cos(a) => Expr::Cos(Box::new(Expr::Mul(
                Box::new(Expr::Const(factor)),
                rec(a),
            ))),
            Expr::Const(v) => Expr::Const(*v),
            Expr::Coord(j) => Expr::Coord(*j),
            Expr::Field(f) => Expr::Field(f.clone()),
            Expr::Add(a, b) => Expr::Add(rec(a), rec(b)),
            Expr::Sub(a, b) => Expr::Sub(rec(a), rec(b)),
            Expr::Mul(a, b) => Expr::Mul(rec(a), rec(b)),
            Expr::Neg(a) => Expr::Neg(rec(a)),
            Expr::Abs(a) => Expr::Abs(rec(a)),
            Expr::Exp(a) => Expr::Exp(rec(a)),
            Expr::Ln(a) => Expr::Ln(rec(a)),
            Expr::Powi(a, k) => Expr::Powi(rec(a), *k),
            Expr::Relu(a) => Expr::Relu(rec(a)),
        }
    }

    /// Guard: every referenced derivative must have total order <= 4 and a
    /// channel within range.
    pub fn validate(&self, input_dim: usize, output_dim: usize) -> Result<()> {
        for f in self.field_refs() {
            if f.channel >= output_dim {
                return Err(Error::OutputIndexOutOfRange {
                    index: f.channel,
                    outputs: output_dim,
                });
            }
            if f.multi.len() != input_dim {
                return Err(Error::DimensionMismatch {
                    expected: input_dim,
                    got: f.multi.len(),
                });
            }
            let total: usize = f.multi.iter().sum();
            if total > crate::net::MAX_TOTAL_ORDER {
                return Err(Error::OrderTooHigh {
                    order: total,
                    max: crate::net::MAX_TOTAL_ORDER,
                });
            }
        }
        Ok(())
    }
}

impl std::ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::Add(Box::new(self), Box::new(rhs))
    }
}

impl std::ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        Expr::Sub(Box::new(self), Box::new(rhs))
    }
}

impl std::ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::Mul(Box::new(self), Box::new(rhs))
    }
}

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::Neg(Box::new(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_and_partials_of_product() {
        // r = u * u_x  (the Burgers advection term)
        let u = FieldRef {
            channel: 0,
            multi: vec![0, 0],
        };
        let ux = FieldRef {
            channel: 0,
            multi: vec![1, 0],
        };
        let e = Expr::Field(u.clone()) * Expr::Field(ux.clone());
        let slots = e.field_refs();
        assert_eq!(slots, vec![u, ux]);
        let fields = [3.0, -2.0];
        let mut partials = [0.0, 0.0];
        let v = e.eval_with_partials(&[0.0, 0.0], &slots, &fields, 1.0, &mut partials);
        assert_eq!(v, -6.0);
        assert_eq!(partials, [-2.0, 3.0]); // d(u*ux)/du = ux, d/dux = u
    }

    #[test]
    fn partials_through_nonlinearities() {
        // f = exp(-e_field): d/de = -exp(-e)
        let e_ref = FieldRef {
            channel: 2,
            multi: vec![0, 0],
        };
        let expr = Expr::Neg(Box::new(Expr::Field(e_ref.clone()))).exp();
        let slots = expr.field_refs();
        let mut p = [0.0];
        let v = expr.eval_with_partials(&[0.0, 0.0], &slots, &[0.7], 2.0, &mut p);
        assert!((v - (-0.7_f64).exp()).abs() < 1e-15);
        assert!((p[0] + 2.0 * (-0.7_f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn coords_and_targets() {
        // residual of u(x, t) - (-sin(pi x)) at a point
        let u = Expr::field(0, vec![0, 0]);
        let target = -(Expr::constant(std::f64::consts::PI) * Expr::coord(0)).sin();
        let r = u - target;
        let slots = r.field_refs();
        let v = r.eval(&[0.5, 0.0], &slots, &[0.2]);
        assert!((v - (0.2 + 1.0)).abs() < 1e-15); // -sin(pi/2) = -1
    }

    #[test]
    fn frequency_rewrite_hits_all_trig_nodes() {
        let e = (Expr::coord(0)).sin() + (Expr::coord(1)).cos();
        let scaled = e.scale_trig_frequency(1.1);
        let v = scaled.eval(&[0.3, 0.4], &[], &[]);
        let expect = (1.1_f64 * 0.3).sin() + (1.1_f64 * 0.4).cos();
        assert!((v - expect).abs() < 1e-15);
    }

    #[test]
    fn validate_rejects_high_orders_and_bad_channels() {
        let bad_order = Expr::field(0, vec![5, 0]);
        assert!(bad_order.validate(2, 1).is_err());
        let bad_channel = Expr::field(3, vec![0, 0]);
        assert!(bad_channel.validate(2, 2).is_err());
        let ok = Expr::field(0, vec![2, 2]);
        assert!(ok.validate(2, 1).is_ok());
    }

    #[test]
    fn abs_subgradient() {
        let f = FieldRef {
            channel: 0,
            multi: vec![0],
        };
        let e = Expr::Field(f).abs();
        let slots = e.field_refs();
        let mut p = [0.0];
        e.eval_with_partials(&[0.0], &slots, &[-3.0], 1.0, &mut p);
        assert_eq!(p[0], -1.0);
        p = [0.0];
        e.eval_with_partials(&[0.0], &slots, &[0.0], 1.0, &mut p);
        assert_eq!(p[0], 0.0);
    }
}
