//! Truncated Taylor-coefficient ("jet") arithmetic.
//!
//! A jet holds the Taylor coefficients of a quantity with respect to a small
//! set of active input variables, truncated to a per-variable order bound.
//! Propagating jets through every layer of a network yields exact input
//! derivatives in one forward pass; the derivative of order `alpha` is the
//! coefficient at `alpha` times `alpha!`.
//!
//! Shapes are boxes: the coefficient set is `{ beta : beta <= orders }`
//! componentwise. Multiplication truncated to the box is closed, so the
//! coefficients inside the box stay exact through sums, products and
//! composition with smooth scalar functions.

use crate::error::{Error, Result};

/// Maximum total derivative order supported by the engine.
pub const MAX_TOTAL_ORDER: usize = 4;

/// Coefficient layout for one family of jets: which input variables are
/// active and up to which order each is tracked.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JetShape {
    /// Active input variable indices, strictly ascending.
    vars: Vec<usize>,
    /// Order bound per active variable.
    orders: Vec<usize>,
    /// Exponent tuple (over `vars`) for each coefficient slot.
    exps: Vec<Vec<usize>>,
    /// For each output slot `g`, the ordered pairs `(i, j)` with
    /// `exps[i] + exps[j] == exps[g]`.
    mul_pairs: Vec<Vec<(u32, u32)>>,
    total_order: usize,
}

impl JetShape {
    /// Shape with no active variables: a plain value.
    pub fn scalar() -> Self {
        Self::new(&[], &[]).expect("scalar shape is always valid")
    }

    /// Shape tracking a single variable up to `order`.
    pub fn univariate(var: usize, order: usize) -> Result<Self> {
        Self::new(&[var], &[order])
    }

    /// Shape covering one derivative multi-index over the full input space;
    /// variables with zero order are left inactive.
    pub fn for_multi_index(multi: &[usize]) -> Result<Self> {
        let mut vars = Vec::new();
        let mut orders = Vec::new();
        for (j, &o) in multi.iter().enumerate() {
            if o > 0 {
                vars.push(j);
                orders.push(o);
            }
        }
        Self::new(&vars, &orders)
    }

    pub fn new(vars: &[usize], orders: &[usize]) -> Result<Self> {
        assert_eq!(vars.len(), orders.len());
        if vars.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSpec("jet variables must be ascending".into()));
        }
        let total_order: usize = orders.iter().sum();
        if total_order > MAX_TOTAL_ORDER {
            return Err(Error::OrderTooHigh {
                order: total_order,
                max: MAX_TOTAL_ORDER,
            });
        }
        // Enumerate exponent tuples in mixed-radix order (first var fastest).
        let len: usize = orders.iter().map(|&o| o + 1).product();
        let mut exps = Vec::with_capacity(len);
        for idx in 0..len {
            let mut rem = idx;
            let mut e = Vec::with_capacity(orders.len());
            for &o in orders {
                e.push(rem % (o + 1));
                rem /= o + 1;
            }
            exps.push(e);
        }
        let index_of = |e: &[usize]| -> usize {
            let mut idx = 0;
            let mut stride = 1;
            for (k, &o) in orders.iter().enumerate() {
                idx += e[k] * stride;
                stride *= o + 1;
            }
            idx
        };
        let mut mul_pairs = vec![Vec::new(); len];
        for (g, eg) in exps.iter().enumerate() {
            for (i, ei) in exps.iter().enumerate() {
                if ei.iter().zip(eg).all(|(a, b)| a <= b) {
                    let diff: Vec<usize> = eg.iter().zip(ei).map(|(b, a)| b - a).collect();
                    mul_pairs[g].push((i as u32, index_of(&diff) as u32));
                }
            }
        }
        Ok(Self {
            vars: vars.to_vec(),
            orders: orders.to_vec(),
            exps,
            mul_pairs,
            total_order,
        })
    }

    /// Number of coefficient slots per jet.
    pub fn len(&self) -> usize {
        self.exps.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Highest total derivative order representable in this shape.
    pub fn total_order(&self) -> usize {
        self.total_order
    }

    pub fn vars(&self) -> &[usize] {
        &self.vars
    }

    /// Coefficient slot for a derivative multi-index over the full input
    /// space, if it lies inside this shape's box.
    pub fn slot_for(&self, multi: &[usize]) -> Option<usize> {
        let mut e = vec![0usize; self.vars.len()];
        for (j, &o) in multi.iter().enumerate() {
            if o == 0 {
                continue;
            }
            let k = self.vars.iter().position(|&v| v == j)?;
            if o > self.orders[k] {
                return None;
            }
            e[k] = o;
        }
        Some(
            self.exps
                .iter()
                .position(|x| x == &e)
                .expect("exponent tuple inside the box"),
        )
    }

    /// `alpha!` for the multi-index stored at `slot`; converts a Taylor
    /// coefficient into a derivative value.
    pub fn factorial_at(&self, slot: usize) -> f64 {
        self.exps[slot]
            .iter()
            .map(|&e| (1..=e).product::<usize>() as f64)
            .product()
    }

    /// Seed the jet of input coordinate `var` whose value is `value`:
    /// constant term plus, when the variable is active, a unit linear term.
    pub fn seed_input(&self, var: usize, value: f64, out: &mut [f64]) {
        out.fill(0.0);
        out[0] = value;
        if let Some(k) = self.vars.iter().position(|&v| v == var) {
            let mut e = vec![0usize; self.vars.len()];
            e[k] = 1;
            if self.orders[k] >= 1 {
                let slot = self.exps.iter().position(|x| x == &e).expect("linear slot");
                out[slot] = 1.0;
            }
        }
    }

    /// `out = a * b`, truncated to the box.
    pub fn mul(&self, a: &[f64], b: &[f64], out: &mut [f64]) {
        for (g, pairs) in self.mul_pairs.iter().enumerate() {
            let mut acc = 0.0;
            for &(i, j) in pairs {
                acc += a[i as usize] * b[j as usize];
            }
            out[g] = acc;
        }
    }

    /// Compose a scalar function with the jet `p`: `out = f(p)` where
    /// `derivs[k] = f^(k)(p[0])` for `k = 0..=total_order`.
    ///
    /// Uses the Taylor series of `f` around the constant term; powers of the
    /// zero-constant part vanish beyond the total order, so the truncated sum
    /// is exact for the box coefficients.
    pub fn compose(&self, p: &[f64], derivs: &[f64], out: &mut [f64], scratch: &mut ComposeScratch) {
        debug_assert!(derivs.len() > self.total_order);
        let n = self.len();
        out.fill(0.0);
        out[0] = derivs[0];
        if self.total_order == 0 {
            return;
        }
        let q = &mut scratch.q;
        q.clear();
        q.extend_from_slice(p);
        q[0] = 0.0;
        let term = &mut scratch.term;
        term.clear();
        term.extend_from_slice(q);
        let mut kfact = 1.0;
        for k in 1..=self.total_order {
            kfact *= k as f64;
            let c = derivs[k] / kfact;
            for i in 0..n {
                out[i] += c * term[i];
            }
            if k < self.total_order {
                scratch.next.resize(n, 0.0);
                self.mul(term, q, &mut scratch.next);
                std::mem::swap(term, &mut scratch.next);
            }
        }
    }

    /// Adjoint of coefficient selection through a composition: given the
    /// adjoint `dy` of `y = f(p)` and the jet `s = f'(p)`, accumulate the
    /// adjoint of `p`. Uses `d y[g] / d p[b] = s[g - b]`.
    pub fn accumulate_compose_adjoint(&self, dy: &[f64], s: &[f64], dp: &mut [f64]) {
        for (g, pairs) in self.mul_pairs.iter().enumerate() {
            let dyg = dy[g];
            if dyg == 0.0 {
                continue;
            }
            for &(i, j) in pairs {
                dp[i as usize] += dyg * s[j as usize];
            }
        }
    }
}

/// Reusable buffers for [`JetShape::compose`].
#[derive(Debug, Default, Clone)]
pub struct ComposeScratch {
    q: Vec<f64>,
    term: Vec<f64>,
    next: Vec<f64>,
}
