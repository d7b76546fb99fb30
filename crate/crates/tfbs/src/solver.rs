//! Assembly and time march of the compact implicit scheme.
//!
//! At every time level the scheme solves one tridiagonal system
//! Q U^m = R^m. The matrix is time independent; the right-hand side carries
//! the forcing and the full L1 history of every interior node. Dividing the
//! diffusion equation by s^2 puts the second derivative in the form the
//! compact stencil couples, at the price of a degeneracy when the mesh
//! starts at s = 0; `BoundaryStrategy` selects how the two rows adjacent to
//! the ends are closed in that case.

use crate::caputo::{self, gamma_fn, L1Weights};
use crate::compact;
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::problems::DiffusionProblem;

/// How the boundary-adjacent rows are discretized on a mesh with s_0 = 0.
///
/// `NoncompactEdge` closes rows 1 and N-1 with the plain three-point second
/// derivative (no implicit coupling), so nothing is ever evaluated at the
/// degenerate node. `CompactLimit` keeps the full compact rows and uses the
/// problem's analytic limit of F/s^2 at s = 0 together with the identically
/// zero history of the Dirichlet node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundaryStrategy {
    #[default]
    NoncompactEdge,
    CompactLimit,
}

impl BoundaryStrategy {
    pub fn label(&self) -> &'static str {
        match self {
            BoundaryStrategy::NoncompactEdge => "noncompact_edge",
            BoundaryStrategy::CompactLimit => "compact_limit",
        }
    }
}

/// Combination weights of one interior row of the scheme.
#[derive(Debug, Clone, Copy)]
pub struct RowCoeffs {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
}

/// Per-row coefficients for a whole mesh, plus how the edges were closed.
pub struct SchemeRows {
    rows: Vec<RowCoeffs>,
    strategy: BoundaryStrategy,
    degenerate_left: bool,
}

impl SchemeRows {
    pub fn rows(&self) -> &[RowCoeffs] {
        &self.rows
    }

    pub fn strategy(&self) -> BoundaryStrategy {
        self.strategy
    }

    /// True when the mesh starts exactly at s = 0.
    pub fn degenerate_left(&self) -> bool {
        self.degenerate_left
    }
}

/// Build the row coefficients for every interior node n = 1 .. N-1.
pub fn scheme_rows(mesh: &Mesh, strategy: BoundaryStrategy) -> Result<SchemeRows> {
    let n = mesh.interval_count();
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "scheme needs at least 2 intervals, got {n}"
        )));
    }
    let steps = mesh.steps();
    let degenerate_left = mesh.nodes()[0] == 0.0;
    let mut rows = Vec::with_capacity(n - 1);
    for i in 0..n - 1 {
        let node = i + 1;
        let (hl, hr) = (steps[i], steps[i + 1]);
        let edge = node == 1 || node == n - 1;
        let row = if degenerate_left && strategy == BoundaryStrategy::NoncompactEdge && edge {
            let (a, b, c) = compact::noncompact_weights(hl, hr);
            RowCoeffs {
                a,
                b,
                c,
                d: 0.0,
                e: 0.0,
            }
        } else {
            let st = compact::stencil_coefficients(hl, hr)?;
            RowCoeffs {
                a: st.a,
                b: st.b,
                c: st.c,
                d: st.d,
                e: st.e,
            }
        };
        rows.push(row);
    }
    Ok(SchemeRows {
        rows,
        strategy,
        degenerate_left,
    })
}

/// Tridiagonal scheme matrix. `sub[0]` and `sup[N-2]` pair with Dirichlet
/// boundary values and never enter the solve.
pub struct SchemeMatrix {
    sub: Vec<f64>,
    diag: Vec<f64>,
    sup: Vec<f64>,
    strategy: BoundaryStrategy,
}

impl SchemeMatrix {
    pub fn sub(&self) -> &[f64] {
        &self.sub
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn sup(&self) -> &[f64] {
        &self.sup
    }

    pub fn strategy(&self) -> BoundaryStrategy {
        self.strategy
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Multiply by a vector (used by the per-step residual check).
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut v = self.diag[i] * x[i];
            if i > 0 {
                v += self.sub[i] * x[i - 1];
            }
            if i + 1 < n {
                v += self.sup[i] * x[i + 1];
            }
            y[i] = v;
        }
        y
    }
}

/// 1/s^2 with the degenerate-node convention: a zero node contributes
/// nothing because every quantity it multiplies is identically zero.
fn inv_sq_or_zero(s: f64) -> f64 {
    if s > 0.0 {
        1.0 / (s * s)
    } else {
        0.0
    }
}

fn check_interior_nodes(mesh: &Mesh) -> Result<()> {
    let nodes = mesh.nodes();
    for (j, &s) in nodes.iter().enumerate().skip(1) {
        if !(s > 0.0) {
            return Err(Error::DegenerateNode(format!(
                "node {j} at s = {s}; only the left end may sit at s = 0"
            )));
        }
    }
    Ok(())
}

/// Assemble the time-independent matrix. `weight_scale` is
/// Gamma(2 - alpha) tau^alpha.
pub fn assemble_matrix(
    problem: &DiffusionProblem,
    mesh: &Mesh,
    rows: &SchemeRows,
    weight_scale: f64,
) -> Result<SchemeMatrix> {
    check_interior_nodes(mesh)?;
    let n = mesh.interval_count();
    if rows.rows().len() != n - 1 {
        return Err(Error::InvalidParameter(format!(
            "{} rows for a mesh with {} interior nodes",
            rows.rows().len(),
            n - 1
        )));
    }
    let nodes = mesh.nodes();
    let (a, b) = (problem.a, problem.b);
    let mut sub = vec![0.0; n - 1];
    let mut diag = vec![0.0; n - 1];
    let mut sup = vec![0.0; n - 1];
    for (i, row) in rows.rows().iter().enumerate() {
        let node = i + 1;
        let inv_l = inv_sq_or_zero(nodes[node - 1]);
        let inv_c = inv_sq_or_zero(nodes[node]);
        let inv_r = inv_sq_or_zero(nodes[node + 1]);
        sub[i] = row.d * inv_l - weight_scale * (a * row.a + b * row.d * inv_l);
        diag[i] = inv_c - weight_scale * (a * row.b + b * inv_c);
        sup[i] = row.e * inv_r - weight_scale * (a * row.c + b * row.e * inv_r);
        for v in [sub[i], diag[i], sup[i]] {
            if !v.is_finite() {
                return Err(Error::DegenerateNode(format!(
                    "non-finite matrix entry in row {node}"
                )));
            }
        }
    }
    Ok(SchemeMatrix {
        sub,
        diag,
        sup,
        strategy: rows.strategy(),
    })
}

/// Assemble the right-hand side for time level m = weights.step_count().
///
/// `history` holds the solution rows 0 .. m-1 over all nodes; the sums over
/// the L1 weights sigma_1 .. sigma_m run backward through it.
pub fn assemble_rhs(
    problem: &DiffusionProblem,
    mesh: &Mesh,
    rows: &SchemeRows,
    weights: &L1Weights,
    history: &[Vec<f64>],
    t: f64,
) -> Result<Vec<f64>> {
    check_interior_nodes(mesh)?;
    let n = mesh.interval_count();
    let m = weights.step_count();
    if history.len() != m {
        return Err(Error::HistoryLengthMismatch {
            got: history.len(),
            expected: m,
        });
    }
    for row in history {
        if row.len() != n + 1 {
            return Err(Error::HistoryLengthMismatch {
                got: row.len(),
                expected: n + 1,
            });
        }
    }
    let nodes = mesh.nodes();
    let weight_scale = weights.scale().recip();
    let sigma = weights.sigma();

    // history sums S_j = sum_{k=1}^{m} sigma_k U_j^{m-k}
    let mut sums = vec![0.0; n + 1];
    for k in 1..=m {
        let sig = sigma[k];
        let row = &history[m - k];
        for (sum, &u) in sums.iter_mut().zip(row.iter()) {
            *sum += sig * u;
        }
    }

    // H = F / s^2 at every node the compact rows reach
    let mut h = vec![0.0; n + 1];
    for j in 1..=n {
        h[j] = problem.forcing(nodes[j], t) / (nodes[j] * nodes[j]);
    }
    h[0] = if nodes[0] > 0.0 {
        problem.forcing(nodes[0], t) / (nodes[0] * nodes[0])
    } else if rows.rows()[0].d != 0.0 {
        problem
            .forcing_over_s2_limit(t)
            .ok_or_else(|| Error::DegenerateNode(
                "compact row at the degenerate node needs a forcing limit".into(),
            ))?
    } else {
        0.0
    };

    let mut rhs = vec![0.0; n - 1];
    for (i, row) in rows.rows().iter().enumerate() {
        let node = i + 1;
        let inv_l = inv_sq_or_zero(nodes[node - 1]);
        let inv_c = inv_sq_or_zero(nodes[node]);
        let inv_r = inv_sq_or_zero(nodes[node + 1]);
        rhs[i] = weight_scale * (row.d * h[node - 1] + h[node] + row.e * h[node + 1])
            - row.d * inv_l * sums[node - 1]
            - inv_c * sums[node]
            - row.e * inv_r * sums[node + 1];
    }
    Ok(rhs)
}

/// Thomas elimination without pivoting.
///
/// A pivot whose magnitude falls below 1e-14 of its row scale aborts the
/// solve; the system is never regularized silently.
pub fn thomas_solve(matrix: &SchemeMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = matrix.len();
    if rhs.len() != n {
        return Err(Error::InvalidParameter(format!(
            "rhs length {} does not match system size {n}",
            rhs.len()
        )));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let (sub, diag, sup) = (matrix.sub(), matrix.diag(), matrix.sup());
    let row_scale = |i: usize| -> f64 {
        let mut s = diag[i].abs();
        if i > 0 {
            s = s.max(sub[i].abs());
        }
        if i + 1 < n {
            s = s.max(sup[i].abs());
        }
        s
    };

    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut pivot = diag[0];
    if pivot.abs() <= 1e-14 * row_scale(0) {
        return Err(Error::SingularSystem { row: 0, pivot });
    }
    c[0] = if n > 1 { sup[0] / pivot } else { 0.0 };
    d[0] = rhs[0] / pivot;
    for i in 1..n {
        pivot = diag[i] - sub[i] * c[i - 1];
        if pivot.abs() <= 1e-14 * row_scale(i) {
            return Err(Error::SingularSystem { row: i, pivot });
        }
        if i + 1 < n {
            c[i] = sup[i] / pivot;
        }
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / pivot;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        let next = x[i + 1];
        x[i] -= c[i] * next;
    }
    Ok(x)
}

/// Solution values on the full space-time grid.
#[derive(Debug, Clone)]
pub struct SolutionGrid {
    values: Vec<Vec<f64>>,
    mesh: Mesh,
    tau: f64,
}

impl SolutionGrid {
    pub fn from_values(values: Vec<Vec<f64>>, mesh: Mesh, tau: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter("empty solution grid".into()));
        }
        if !(tau > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "time step must be positive, got {tau}"
            )));
        }
        let width = mesh.nodes().len();
        if values.iter().any(|row| row.len() != width) {
            return Err(Error::InvalidParameter(
                "solution rows do not match the mesh".into(),
            ));
        }
        Ok(Self { values, mesh, tau })
    }

    /// Rows indexed by time level, columns by node.
    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn row(&self, m: usize) -> &[f64] {
        &self.values[m]
    }

    pub fn final_row(&self) -> &[f64] {
        self.values.last().unwrap()
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Number of time steps M.
    pub fn step_count(&self) -> usize {
        self.values.len() - 1
    }

    pub fn time(&self, m: usize) -> f64 {
        m as f64 * self.tau
    }
}

/// March the scheme from the initial profile to the horizon in `m_steps`
/// L1 steps. Cost is O(M^2 N) from the history sums.
pub fn time_march(
    problem: &DiffusionProblem,
    mesh: &Mesh,
    m_steps: usize,
    strategy: BoundaryStrategy,
) -> Result<SolutionGrid> {
    if m_steps < 1 {
        return Err(Error::InvalidParameter(
            "march needs at least one time step".into(),
        ));
    }
    let n = mesh.interval_count();
    let rows = scheme_rows(mesh, strategy)?;
    if rows.degenerate_left()
        && strategy == BoundaryStrategy::CompactLimit
        && !problem.has_forcing_limit()
    {
        return Err(Error::DegenerateNode(
            "compact-limit strategy needs the problem's forcing limit at s = 0".into(),
        ));
    }
    let tau = problem.horizon / m_steps as f64;
    let weight_scale = gamma_fn(2.0 - problem.alpha)? * tau.powf(problem.alpha);
    let matrix = assemble_matrix(problem, mesh, &rows, weight_scale)?;

    let mut first = vec![0.0; n + 1];
    for (j, &s) in mesh.nodes().iter().enumerate() {
        first[j] = problem.initial(s);
    }
    // Dirichlet columns are exact zeros at every level
    first[0] = 0.0;
    first[n] = 0.0;

    let mut values = Vec::with_capacity(m_steps + 1);
    values.push(first);
    for m in 1..=m_steps {
        let t = m as f64 * tau;
        let weights = caputo::l1_weights(problem.alpha, tau, m)?;
        let rhs = assemble_rhs(problem, mesh, &rows, &weights, &values, t)?;
        let x = thomas_solve(&matrix, &rhs)?;

        let product = matrix.apply(&x);
        let mut residual = 0.0f64;
        let mut rhs_norm = 0.0f64;
        for (p, r) in product.iter().zip(rhs.iter()) {
            residual = residual.max((p - r).abs());
            rhs_norm = rhs_norm.max(r.abs());
        }
        let allowed = if rhs_norm > 0.0 {
            1e-10 * rhs_norm
        } else {
            1e-12
        };
        if residual > allowed {
            return Err(Error::ResidualCheck {
                step: m,
                residual,
                allowed,
            });
        }

        let mut row = vec![0.0; n + 1];
        row[1..n].copy_from_slice(&x);
        values.push(row);
    }
    SolutionGrid::from_values(values, mesh.clone(), tau)
}
