//! Fourth-order compact approximation of the second derivative on a
//! three-point stencil with unequal steps.
//!
//! The approximation couples second-derivative values at the three nodes to
//! function values at the same nodes,
//!
//! ```text
//! d f''_{n-1} + f''_n + e f''_{n+1} = a f_{n-1} + b f_n + c f_{n+1} + E_n,
//! ```
//!
//! with the five coefficients chosen so that the Taylor moments of f, f',
//! f'', f''' and f'''' all cancel. On meshes generated by a C^2 grading the
//! leading error E_n is fourth order in the computational step.

use crate::error::{Error, Result};
use crate::mesh::GradingFunction;

/// Coefficients of the compact approximation on one stencil.
///
/// `a`, `b`, `c` carry units 1/length^2; `d` and `e` are dimensionless and
/// may be negative on strongly graded stencils.
#[derive(Debug, Clone, Copy)]
pub struct CompactStencil {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    pub h_left: f64,
    pub h_right: f64,
}

impl CompactStencil {
    /// The denominator D = h_left^2 + 3 h_left h_right + h_right^2.
    pub fn moment_denominator(&self) -> f64 {
        let (u, v) = (self.h_left, self.h_right);
        u * u + 3.0 * u * v + v * v
    }

    /// Raw residuals of the five moment equations.
    pub fn moment_residuals(&self) -> [f64; 5] {
        let (a, b, c, d, e) = (self.a, self.b, self.c, self.d, self.e);
        let (u, v) = (self.h_left, self.h_right);
        [
            a + b + c,
            c * v - a * u,
            (a * u * u + c * v * v) / 2.0 - d - e - 1.0,
            (c * v.powi(3) - a * u.powi(3)) / 6.0 + d * u - e * v,
            (a * u.powi(4) + c * v.powi(4)) / 24.0 - (d * u * u + e * v * v) / 2.0,
        ]
    }

    /// Moment residuals scaled by the largest term of each equation.
    pub fn moment_residuals_relative(&self) -> [f64; 5] {
        let (a, b, c, d, e) = (self.a, self.b, self.c, self.d, self.e);
        let (u, v) = (self.h_left, self.h_right);
        let raw = self.moment_residuals();
        let scales = [
            a.abs().max(b.abs()).max(c.abs()),
            (c * v).abs().max((a * u).abs()),
            (a * u * u / 2.0)
                .abs()
                .max((c * v * v / 2.0).abs())
                .max(d.abs())
                .max(e.abs())
                .max(1.0),
            (c * v.powi(3) / 6.0)
                .abs()
                .max((a * u.powi(3) / 6.0).abs())
                .max((d * u).abs())
                .max((e * v).abs()),
            (a * u.powi(4) / 24.0)
                .abs()
                .max((c * v.powi(4) / 24.0).abs())
                .max((d * u * u / 2.0).abs())
                .max((e * v * v / 2.0).abs()),
        ];
        let mut out = [0.0; 5];
        for i in 0..5 {
            out[i] = raw[i] / scales[i].max(f64::MIN_POSITIVE);
        }
        out
    }
}

fn check_steps(h_left: f64, h_right: f64) -> Result<()> {
    if !(h_left > 0.0 && h_right > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "stencil steps must be positive, got ({h_left}, {h_right})"
        )));
    }
    Ok(())
}

/// Closed-form stencil coefficients.
///
/// `e` is the mirror of `d`: the moment system is symmetric under
/// h_left <-> h_right with (a, d) <-> (c, e).
pub fn stencil_coefficients(h_left: f64, h_right: f64) -> Result<CompactStencil> {
    check_steps(h_left, h_right)?;
    let (u, v) = (h_left, h_right);
    let dd = u * u + 3.0 * u * v + v * v;
    let p = (u + v) * dd;
    Ok(CompactStencil {
        a: 12.0 * v / p,
        b: -12.0 / dd,
        c: 12.0 * u / p,
        d: v * (u * u + u * v - v * v) / p,
        e: u * (v * v + u * v - u * u) / p,
        h_left,
        h_right,
    })
}

/// Stencil coefficients obtained by solving the 5x5 moment system directly.
///
/// This is the oracle route; `stencil_coefficients` is the production path.
pub fn stencil_from_moment_system(h_left: f64, h_right: f64) -> Result<CompactStencil> {
    check_steps(h_left, h_right)?;
    let (u, v) = (h_left, h_right);
    // unknowns ordered (a, b, c, d, e)
    let mat = [
        [1.0, 1.0, 1.0, 0.0, 0.0],
        [-u, 0.0, v, 0.0, 0.0],
        [u * u / 2.0, 0.0, v * v / 2.0, -1.0, -1.0],
        [-u.powi(3) / 6.0, 0.0, v.powi(3) / 6.0, u, -v],
        [u.powi(4) / 24.0, 0.0, v.powi(4) / 24.0, -u * u / 2.0, -v * v / 2.0],
    ];
    let rhs = [0.0, 0.0, 1.0, 0.0, 0.0];
    let x = solve5(mat, rhs)?;
    Ok(CompactStencil {
        a: x[0],
        b: x[1],
        c: x[2],
        d: x[3],
        e: x[4],
        h_left,
        h_right,
    })
}

/// Gaussian elimination with partial pivoting, fixed 5x5.
fn solve5(mut a: [[f64; 5]; 5], mut b: [f64; 5]) -> Result<[f64; 5]> {
    for col in 0..5 {
        let piv = (col..5)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        if a[piv][col].abs() < 1e-300 {
            return Err(Error::SingularSystem {
                row: col,
                pivot: a[piv][col],
            });
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..5 {
            let f = a[row][col] / a[col][col];
            for k in col..5 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 5];
    for row in (0..5).rev() {
        let mut s = b[row];
        for k in row + 1..5 {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    Ok(x)
}

/// Standard three-point second-derivative weights (no implicit coupling).
///
/// Used for the boundary-adjacent rows of the scheme when the compact
/// coupling cannot reach a degenerate node.
pub fn noncompact_weights(h_left: f64, h_right: f64) -> (f64, f64, f64) {
    (
        2.0 / (h_left * (h_left + h_right)),
        -2.0 / (h_left * h_right),
        2.0 / (h_right * (h_left + h_right)),
    )
}

/// Per-node truncation bound h_left h_right |h_left - h_right| f5 / 15.
///
/// Dominates the exact leading error term
/// (1/6)(d h_left^3 - e h_right^3) + (1/120)(c h_right^5 - a h_left^5)
/// times the fifth-derivative bound.
pub fn truncation_bound_node(stencil: &CompactStencil, f5_bound: f64) -> f64 {
    let (u, v) = (stencil.h_left, stencil.h_right);
    u * v * (u - v).abs() * f5_bound / 15.0
}

/// Global truncation bound (1/15) (max phi')^2 (max |phi''|) f5 / N^4,
/// with the derivative maxima taken over a fixed probe of [0, 1].
pub fn truncation_bound_global(phi: &GradingFunction, f5_bound: f64, n: usize) -> Result<f64> {
    let d1 = phi.max_deriv1().ok_or(Error::MissingDerivatives)?;
    let d2 = phi.max_abs_deriv2().ok_or(Error::MissingDerivatives)?;
    let h = 1.0 / n as f64;
    Ok(d1 * d1 * d2 * f5_bound * h.powi(4) / 15.0)
}

/// Residual of the compact identity for sampled f and f'' values:
/// d f''_l + f''_m + e f''_r - (a f_l + b f_m + c f_r).
pub fn compact_residual(f: [f64; 3], f2: [f64; 3], stencil: &CompactStencil) -> f64 {
    stencil.d * f2[0] + f2[1] + stencil.e * f2[2]
        - (stencil.a * f[0] + stencil.b * f[1] + stencil.c * f[2])
}
