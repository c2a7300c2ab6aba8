//! Reference-data generators for the self-contained problems.

use super::dataset::{Dataset, Source};
use crate::error::{Error, Result};
use ndarray::Array2;

/// Closed form of the multi-variable system at one point:
/// `c = |sin a - cos b|`, `d = ln((a-b)^2 + 1)`, `e = (1 + c^2)/2`,
/// `f = exp(-e)`. The logarithm is natural, consistent with the exponential
/// in the fourth relation.
pub fn multivar_outputs(a: f64, b: f64) -> [f64; 4] {
    let c = (a.sin() - b.cos()).abs();
    let d = ((a - b) * (a - b) + 1.0).ln();
    let e = 0.5 * (1.0 + c * c);
    let f = (-e).exp();
    [c, d, e, f]
}

/// Exact outputs of the multi-variable system on a uniform grid over
/// `a in [0, pi]`, `b in [-pi, 0]`.
pub fn generate_multivar(grid: &[usize; 2]) -> Result<Dataset> {
    let pi = std::f64::consts::PI;
    generate_multivar_over(grid, &[[0.0, pi], [-pi, 0.0]])
}

/// Same closed form over an explicit box (used for extrapolation test data).
pub fn generate_multivar_over(grid: &[usize; 2], domain: &[[f64; 2]; 2]) -> Result<Dataset> {
    let [na, nb] = *grid;
    if na < 2 || nb < 2 {
        return Err(Error::Data("multivar grid needs >= 2 nodes per axis".into()));
    }
    let n = na * nb;
    let mut inputs = Array2::zeros((n, 2));
    let mut outputs = Array2::zeros((n, 4));
    for ib in 0..nb {
        for ia in 0..na {
            let row = ib * na + ia;
            let a = domain[0][0] + (domain[0][1] - domain[0][0]) * ia as f64 / (na - 1) as f64;
            let b = domain[1][0] + (domain[1][1] - domain[1][0]) * ib as f64 / (nb - 1) as f64;
            inputs[[row, 0]] = a;
            inputs[[row, 1]] = b;
            let out = multivar_outputs(a, b);
            for (k, v) in out.iter().enumerate() {
                outputs[[row, k]] = *v;
            }
        }
    }
    Dataset::new(inputs, outputs, Source::Analytic)
}

/// The exact solution `u(x, y) = x^2 exp(-y)` of the fourth-order plate
/// equation `u_xx - u_yyyy = (2 - x^2) exp(-y)` with its six side
/// conditions.
pub fn pde2d_solution(x: f64, y: f64) -> f64 {
    x * x * (-y).exp()
}

/// Exact outputs of the 2-D problem on a uniform grid over the unit square.
pub fn generate_pde2d(grid: &[usize; 2]) -> Result<Dataset> {
    let [nx, ny] = *grid;
    if nx < 2 || ny < 2 {
        return Err(Error::Data("pde2d grid needs >= 2 nodes per axis".into()));
    }
    let n = nx * ny;
    let mut inputs = Array2::zeros((n, 2));
    let mut outputs = Array2::zeros((n, 1));
    for iy in 0..ny {
        for ix in 0..nx {
            let row = iy * nx + ix;
            let x = ix as f64 / (nx - 1) as f64;
            let y = iy as f64 / (ny - 1) as f64;
            inputs[[row, 0]] = x;
            inputs[[row, 1]] = y;
            outputs[[row, 0]] = pde2d_solution(x, y);
        }
    }
    Dataset::new(inputs, outputs, Source::Analytic)
}

/// Crank-Nicolson solve of `u_t = -u_x + 0.25 u_xx` on `x in [0, 2]`,
/// `t in [0, 1]` with `u(x, 0) = sin(pi x) exp(-x)` and zero Dirichlet
/// boundaries. Returns the solution on the `space_points x time_points`
/// grid, one row per (x, t) pair, x fastest.
///
/// Second-order accurate in both steps; central differencing of the
/// advection term is clean as long as the cell Peclet number `dx / 0.25`
/// stays at or below 2.
pub fn solve_convdiff_fd(space_points: usize, time_points: usize) -> Result<Dataset> {
    let (nx, nt) = (space_points, time_points);
    if nx < 3 || nt < 2 {
        return Err(Error::GridTooCoarse(
            "need at least 3 space and 2 time points".into(),
        ));
    }
    let dx = 2.0 / (nx - 1) as f64;
    let dt = 1.0 / (nt - 1) as f64;
    let nu = 0.25;
    if dx / nu > 2.0 {
        return Err(Error::GridTooCoarse(format!(
            "cell Peclet number {} exceeds 2; refine the spatial grid",
            dx / nu
        )));
    }

    // Spatial operator L u = -u_x + nu u_xx on interior nodes:
    //   (L u)_i = lo * u_{i-1} + di * u_i + up * u_{i+1}
    let lo = 1.0 / (2.0 * dx) + nu / (dx * dx);
    let di = -2.0 * nu / (dx * dx);
    let up = -1.0 / (2.0 * dx) + nu / (dx * dx);

    let m = nx - 2; // interior unknowns
    let a_lo = -0.5 * dt * lo;
    let a_di = 1.0 - 0.5 * dt * di;
    let a_up = -0.5 * dt * up;

    let pi = std::f64::consts::PI;
    let x_at = |i: usize| 2.0 * i as f64 / (nx - 1) as f64;
    let mut u: Vec<f64> = (0..nx)
        .map(|i| {
            let x = x_at(i);
            (pi * x).sin() * (-x).exp()
        })
        .collect();
    u[0] = 0.0;
    u[nx - 1] = 0.0;

    let mut frames = Vec::with_capacity(nt);
    frames.push(u.clone());

    let mut rhs = vec![0.0; m];
    let mut c_prime = vec![0.0; m];
    let mut d_prime = vec![0.0; m];
    for _ in 1..nt {
        for i in 0..m {
            let j = i + 1;
            rhs[i] = u[j]
                + 0.5 * dt * (lo * u[j - 1] + di * u[j] + up * u[j + 1]);
        }
        // Thomas algorithm; boundaries are zero so no RHS correction terms.
        c_prime[0] = a_up / a_di;
        d_prime[0] = rhs[0] / a_di;
        for i in 1..m {
            let denom = a_di - a_lo * c_prime[i - 1];
            c_prime[i] = a_up / denom;
            d_prime[i] = (rhs[i] - a_lo * d_prime[i - 1]) / denom;
        }
        u[m] = d_prime[m - 1];
        for i in (0..m - 1).rev() {
            u[i + 1] = d_prime[i] - c_prime[i] * u[i + 2];
        }
        u[0] = 0.0;
        u[nx - 1] = 0.0;
        frames.push(u.clone());
    }

    let mut inputs = Array2::zeros((nx * nt, 2));
    let mut outputs = Array2::zeros((nx * nt, 1));
    for (it, frame) in frames.iter().enumerate() {
        let t = it as f64 / (nt - 1) as f64;
        for (ix, &v) in frame.iter().enumerate() {
            let row = it * nx + ix;
            inputs[[row, 0]] = x_at(ix);
            inputs[[row, 1]] = t;
            outputs[[row, 0]] = v;
        }
    }
    Dataset::new(inputs, outputs, Source::FiniteDifference)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multivar_matches_hand_evaluations() {
        // (a, b) = (0, 0): c = |0 - 1| = 1, d = ln 1 = 0, e = 1, f = e^-1.
        let [c, d, e, f] = multivar_outputs(0.0, 0.0);
        assert_eq!(c, 1.0);
        assert_eq!(d, 0.0);
        assert_eq!(e, 1.0);
        assert!((f - (-1.0_f64).exp()).abs() < 1e-16);

        // (a, b) = (pi/2, -pi/2): c = |1 - 0| = 1, d = ln(pi^2 + 1).
        let pi = std::f64::consts::PI;
        let [c, d, e, f] = multivar_outputs(pi / 2.0, -pi / 2.0);
        assert!((c - 1.0).abs() < 1e-15);
        assert!((d - (pi * pi + 1.0).ln()).abs() < 1e-15);
        assert!((e - 1.0).abs() < 1e-15);
        assert!((f - (-1.0_f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn multivar_outputs_satisfy_the_positivity_rule() {
        let ds = generate_multivar(&[40, 40]).unwrap();
        for row in ds.outputs.outer_iter() {
            assert!(row[2] > 0.0 && row[3] > 0.0);
        }
    }

    #[test]
    fn pde2d_closed_form_satisfies_equation_and_conditions() {
        // Hand-derived derivatives of u = x^2 e^{-y}: u_xx = 2 e^{-y},
        // u_yyyy = x^2 e^{-y}; the residual of the equation vanishes
        // identically.
        let residual = |x: f64, y: f64| {
            let u_xx = 2.0 * (-y).exp();
            let u_yyyy = x * x * (-y).exp();
            u_xx - u_yyyy - (2.0 - x * x) * (-y).exp()
        };
        let ds = generate_pde2d(&[20, 20]).unwrap();
        for row in ds.inputs.outer_iter() {
            assert!(residual(row[0], row[1]).abs() < 1e-12);
        }
        // Guard the hand derivation itself with finite differences of u.
        let (x, y, h) = (0.63, 0.37, 1e-2);
        let u = pde2d_solution;
        let fd_xx = (u(x + h, y) - 2.0 * u(x, y) + u(x - h, y)) / (h * h);
        assert!((fd_xx - 2.0 * (-y).exp()).abs() < 1e-3);
        let fd_yyyy = (u(x, y + 2.0 * h) - 4.0 * u(x, y + h) + 6.0 * u(x, y)
            - 4.0 * u(x, y - h)
            + u(x, y - 2.0 * h))
            / h.powi(4);
        assert!((fd_yyyy - x * x * (-y).exp()).abs() < 1e-3);

        // Side conditions.
        for k in 0..=10 {
            let s = k as f64 / 10.0;
            assert!((u(0.0, s) - 0.0).abs() < 1e-15);
            assert!((u(1.0, s) - (-s).exp()).abs() < 1e-15);
            assert!((u(s, 0.0) - s * s).abs() < 1e-15);
            assert!((u(s, 1.0) - s * s * (-1.0_f64).exp()).abs() < 1e-15);
        }
        assert!((u(1.0, 0.0) - 1.0).abs() < 1e-15);
        assert!((u(1.0, 1.0) - (-1.0_f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn convdiff_initial_row_is_exact_and_boundaries_zero() {
        let ds = solve_convdiff_fd(64, 40).unwrap();
        let pi = std::f64::consts::PI;
        for row in 0..64 {
            let x = ds.inputs[[row, 0]];
            assert_eq!(ds.inputs[[row, 1]], 0.0);
            assert!((ds.outputs[[row, 0]] - (pi * x).sin() * (-x).exp()).abs() < 1e-15);
        }
        for it in 0..40 {
            assert_eq!(ds.outputs[[it * 64, 0]], 0.0);
            assert_eq!(ds.outputs[[it * 64 + 63, 0]], 0.0);
        }
    }

    #[test]
    fn convdiff_rejects_too_coarse_grids() {
        assert!(matches!(
            solve_convdiff_fd(4, 10),
            Err(Error::GridTooCoarse(_))
        ));
    }

    /// Eigenfunction-expansion oracle: substituting `u = e^{2x - t} w` turns
    /// the problem into the pure heat equation `w_t = 0.25 w_xx` with
    /// `w(x, 0) = sin(pi x) e^{-3x}`, solved by a sine series whose
    /// coefficients are integrated numerically.
    struct EigenOracle {
        coeffs: Vec<f64>,
    }

    impl EigenOracle {
        fn new(modes: usize) -> Self {
            let pi = std::f64::consts::PI;
            let w0 = |x: f64| (pi * x).sin() * (-3.0 * x).exp();
            // Composite Simpson over [0, 2].
            let n = 8192;
            let h = 2.0 / n as f64;
            let mut coeffs = Vec::with_capacity(modes);
            for m in 1..=modes {
                let phi = |x: f64| (m as f64 * pi * x / 2.0).sin();
                let mut s = w0(0.0) * phi(0.0) + w0(2.0) * phi(2.0);
                for k in 1..n {
                    let x = k as f64 * h;
                    let w = if k % 2 == 1 { 4.0 } else { 2.0 };
                    s += w * w0(x) * phi(x);
                }
                coeffs.push(s * h / 3.0); // ∫ w0 φ_m dx; ∫ φ_m² dx = 1 on [0,2]
            }
            Self { coeffs }
        }

        fn eval(&self, x: f64, t: f64) -> f64 {
            let pi = std::f64::consts::PI;
            let mut w = 0.0;
            for (k, &b) in self.coeffs.iter().enumerate() {
                let m = (k + 1) as f64;
                let lam = 0.25 * (m * pi / 2.0) * (m * pi / 2.0);
                w += b * (m * pi * x / 2.0).sin() * (-lam * t).exp();
            }
            (2.0 * x - t).exp() * w
        }
    }

    #[test]
    fn convdiff_converges_at_second_order_against_the_eigen_oracle() {
        let oracle = EigenOracle::new(60);
        let max_err = |nx: usize, nt: usize| {
            let ds = solve_convdiff_fd(nx, nt).unwrap();
            let mut worst = 0.0_f64;
            for (xin, xout) in ds.inputs.outer_iter().zip(ds.outputs.outer_iter()) {
                let (x, t) = (xin[0], xin[1]);
                if t < 0.05 {
                    continue; // the truncated series is least accurate near t = 0
                }
                worst = worst.max((xout[0] - oracle.eval(x, t)).abs());
            }
            worst
        };
        let coarse = max_err(65, 41);
        let fine = max_err(129, 81);
        let ratio = coarse / fine;
        assert!(
            (3.0..5.0).contains(&ratio),
            "expected ~4x error reduction, got {ratio} (coarse {coarse:.3e}, fine {fine:.3e})"
        );
    }
}
