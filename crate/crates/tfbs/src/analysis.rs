//! Error norms, observed orders, and the two one-axis refinement studies.
//!
//! Both studies march the standard manufactured case and report the discrete
//! maximum-norm error at the final time against the exact solution. The
//! time study doubles M at fixed N with the analytic forcing, so the
//! measured error is dominated by the L1 truncation. The space study
//! doubles N at fixed M and samples the Caputo part of the forcing through
//! the march's own L1 quadrature; the march then reproduces the separable
//! time factor exactly and the measured error isolates the spatial
//! discretization. Which forcing was used is stamped into every report.

use crate::error::{Error, Result};
use crate::mesh::{self, GradingKind, Mesh, TavellaRandallParams};
use crate::problems::ManufacturedCase;
use crate::solver::{time_march, BoundaryStrategy, SolutionGrid};

pub const DEFAULT_FIXED_STEPS: usize = 50;
pub const DEFAULT_SPACE_LEVELS: [usize; 5] = [50, 100, 200, 400, 800];
pub const DEFAULT_TIME_LEVELS: [usize; 6] = [50, 100, 200, 400, 800, 1600];

/// Which of N and M a study refines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StudyAxis {
    Space,
    Time,
}

impl StudyAxis {
    pub fn label(&self) -> &'static str {
        match self {
            StudyAxis::Space => "space",
            StudyAxis::Time => "time",
        }
    }
}

/// Spatial grid family used by a study.
#[derive(Debug, Clone, Copy)]
pub struct StudyGrid {
    pub kind: GradingKind,
    pub lambda: Option<f64>,
    pub s_star: Option<f64>,
}

impl StudyGrid {
    pub fn uniform() -> Self {
        Self {
            kind: GradingKind::Uniform,
            lambda: None,
            s_star: None,
        }
    }

    pub fn quadratic() -> Self {
        Self {
            kind: GradingKind::Quadratic,
            lambda: None,
            s_star: None,
        }
    }

    pub fn tavella_randall(lambda: f64) -> Self {
        Self {
            kind: GradingKind::TavellaRandall,
            lambda: Some(lambda),
            s_star: None,
        }
    }

    pub fn label(&self) -> String {
        match self.kind {
            GradingKind::Uniform => "uniform".into(),
            GradingKind::Quadratic => "quadratic".into(),
            GradingKind::TavellaRandall => {
                format!("tr(lambda={})", self.lambda.unwrap_or(f64::NAN))
            }
            GradingKind::Custom => "custom".into(),
        }
    }

    /// Build the mesh on [s-, s+]. The Tavella-Randall concentration point
    /// defaults to the interval midpoint when none is given.
    pub fn build_mesh(&self, s_minus: f64, s_plus: f64, n: usize) -> Result<Mesh> {
        match self.kind {
            GradingKind::Uniform => mesh::build_uniform(s_minus, s_plus, n),
            GradingKind::Quadratic => mesh::build_quadratic(s_minus, s_plus, n),
            GradingKind::TavellaRandall => {
                let lambda = self.lambda.ok_or_else(|| {
                    Error::InvalidParameter("tavella-randall grid needs lambda".into())
                })?;
                let s_star = self.s_star.unwrap_or(0.5 * (s_minus + s_plus));
                let params = TavellaRandallParams::new(lambda, s_star, s_minus, s_plus)?;
                mesh::build_tavella_randall(&params, n)
            }
            GradingKind::Custom => Err(Error::InvalidParameter(
                "studies need a named grid family".into(),
            )),
        }
    }
}

/// One refinement level of a study.
#[derive(Debug, Clone, Copy)]
pub struct StudyLevel {
    pub n: usize,
    pub m: usize,
    pub error: f64,
    pub order: Option<f64>,
}

/// Result of a one-axis refinement study.
#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub axis: StudyAxis,
    pub grid: String,
    pub alpha: f64,
    pub norm: String,
    pub forcing: String,
    pub strategy: String,
    pub levels: Vec<StudyLevel>,
}

impl ConvergenceReport {
    /// CSV rows `axis,grid,alpha,N,M,error,order`; the order column is empty
    /// on the first level.
    pub fn csv(&self) -> String {
        let mut out = String::from("axis,grid,alpha,N,M,error,order\n");
        for level in &self.levels {
            let order = level
                .order
                .map(|o| format!("{o:.16e}"))
                .unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{:.16e},{}\n",
                self.axis.label(),
                self.grid,
                self.alpha,
                level.n,
                level.m,
                level.error,
                order
            ));
        }
        out
    }

    /// Human-readable table in the familiar two-column layout.
    pub fn table(&self) -> String {
        let mut out = format!(
            "axis={} grid={} alpha={} norm={} forcing={} strategy={}\n",
            self.axis.label(),
            self.grid,
            self.alpha,
            self.norm,
            self.forcing,
            self.strategy
        );
        let moving = match self.axis {
            StudyAxis::Space => "N",
            StudyAxis::Time => "M",
        };
        let fixed = match self.axis {
            StudyAxis::Space => format!("M={}", self.levels[0].m),
            StudyAxis::Time => format!("N={}", self.levels[0].n),
        };
        out.push_str(&format!(
            "{:>6} ({})  {:>14}  {:>9}\n",
            moving, fixed, "error", "order"
        ));
        for level in &self.levels {
            let value = match self.axis {
                StudyAxis::Space => level.n,
                StudyAxis::Time => level.m,
            };
            let order = level
                .order
                .map(|o| format!("{o:9.5}"))
                .unwrap_or_else(|| format!("{:>9}", "-"));
            out.push_str(&format!("{value:>6}  {:>14.6e}  {order}\n", level.error));
        }
        out
    }
}

/// Discrete maximum-norm error at the final time level.
pub fn max_norm_error(solution: &SolutionGrid, exact: &dyn Fn(f64, f64) -> f64) -> f64 {
    let t = solution.time(solution.step_count());
    solution
        .final_row()
        .iter()
        .zip(solution.mesh().nodes())
        .map(|(&u, &s)| (u - exact(s, t)).abs())
        .fold(0.0f64, f64::max)
}

/// Observed order log2(e_coarse / e_fine); undefined when either error is
/// not positive (an exact hit).
pub fn observed_order(e_coarse: f64, e_fine: f64) -> Option<f64> {
    if e_coarse > 0.0 && e_fine > 0.0 {
        Some((e_coarse / e_fine).log2())
    } else {
        None
    }
}

fn check_levels(levels: &[usize]) -> Result<()> {
    if levels.len() < 2 {
        return Err(Error::InvalidParameter(
            "a study needs at least two refinement levels".into(),
        ));
    }
    if levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter(
            "refinement levels must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Space-order study: fixed M, N doubled through the levels.
pub fn space_order_study(
    case: &ManufacturedCase,
    grid: &StudyGrid,
    m_fixed: usize,
    n_levels: &[usize],
) -> Result<ConvergenceReport> {
    check_levels(n_levels)?;
    let strategy = BoundaryStrategy::NoncompactEdge;
    let problem = case.problem_with_l1_forcing(m_fixed)?;
    let mut levels: Vec<StudyLevel> = Vec::with_capacity(n_levels.len());
    for &n in n_levels {
        let mesh = grid.build_mesh(case.s_minus, case.s_plus, n)?;
        let solution = time_march(&problem, &mesh, m_fixed, strategy)?;
        let error = max_norm_error(&solution, &|s, t| case.exact(s, t));
        let order = levels
            .last()
            .and_then(|prev| observed_order(prev.error, error));
        levels.push(StudyLevel {
            n,
            m: m_fixed,
            error,
            order,
        });
    }
    Ok(ConvergenceReport {
        axis: StudyAxis::Space,
        grid: grid.label(),
        alpha: case.alpha,
        norm: "max|U - exact| at t = T".into(),
        forcing: "l1-consistent".into(),
        strategy: strategy.label().into(),
        levels,
    })
}

/// Time-order study: fixed N, M doubled through the levels.
pub fn time_order_study(
    case: &ManufacturedCase,
    grid: &StudyGrid,
    n_fixed: usize,
    m_levels: &[usize],
) -> Result<ConvergenceReport> {
    check_levels(m_levels)?;
    let strategy = BoundaryStrategy::NoncompactEdge;
    let problem = case.problem()?;
    let mesh = grid.build_mesh(case.s_minus, case.s_plus, n_fixed)?;
    let mut levels: Vec<StudyLevel> = Vec::with_capacity(m_levels.len());
    for &m in m_levels {
        let solution = time_march(&problem, &mesh, m, strategy)?;
        let error = max_norm_error(&solution, &|s, t| case.exact(s, t));
        let order = levels
            .last()
            .and_then(|prev| observed_order(prev.error, error));
        levels.push(StudyLevel {
            n: n_fixed,
            m,
            error,
            order,
        });
    }
    Ok(ConvergenceReport {
        axis: StudyAxis::Time,
        grid: grid.label(),
        alpha: case.alpha,
        norm: "max|U - exact| at t = T".into(),
        forcing: "analytic".into(),
        strategy: strategy.label().into(),
        levels,
    })
}
