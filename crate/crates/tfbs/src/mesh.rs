//! Non-uniform spatial meshes built from grading functions.
//!
//! A grading function maps the uniform computational grid on [0, 1] onto the
//! physical price interval. The two finance grids implemented here are the
//! Tavella-Randall sinh grid, which concentrates nodes around a chosen price
//! s* (usually the strike), and the quadratic grid, which concentrates nodes
//! near s = 0.

use crate::error::{Error, Result};

/// Probe resolution used to validate gradings and to bound derivatives.
const PROBE_POINTS: usize = 1000;

type ScalarFn = dyn Fn(f64) -> f64 + Send + Sync;

/// Inverse hyperbolic sine via the logarithm identity ln(x + sqrt(x^2 + 1)),
/// reflected for x < 0 so large negative arguments do not cancel.
pub fn asinh(x: f64) -> f64 {
    if x < 0.0 {
        -asinh(-x)
    } else {
        (x + (x * x + 1.0).sqrt()).ln()
    }
}

/// Which family a grading function belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradingKind {
    Uniform,
    Quadratic,
    TavellaRandall,
    Custom,
}

/// Monotone map from the computational interval [0, 1] onto [s-, s+].
///
/// First and second derivatives are optional; they are only needed by the
/// truncation bound of the compact module.
pub struct GradingFunction {
    eval: Box<ScalarFn>,
    deriv1: Option<Box<ScalarFn>>,
    deriv2: Option<Box<ScalarFn>>,
    kind: GradingKind,
    s_minus: f64,
    s_plus: f64,
}

impl GradingFunction {
    fn check_interval(s_minus: f64, s_plus: f64) -> Result<()> {
        if !(s_minus < s_plus) {
            return Err(Error::InvalidParameter(format!(
                "degenerate interval [{s_minus}, {s_plus}]"
            )));
        }
        Ok(())
    }

    /// Affine grading, producing the uniform mesh.
    pub fn uniform(s_minus: f64, s_plus: f64) -> Result<Self> {
        Self::check_interval(s_minus, s_plus)?;
        let len = s_plus - s_minus;
        Ok(Self {
            eval: Box::new(move |x| s_minus + x * len),
            deriv1: Some(Box::new(move |_| len)),
            deriv2: Some(Box::new(|_| 0.0)),
            kind: GradingKind::Uniform,
            s_minus,
            s_plus,
        })
    }

    /// Quadratic grading s- + x^2 (s+ - s-).
    pub fn quadratic(s_minus: f64, s_plus: f64) -> Result<Self> {
        Self::check_interval(s_minus, s_plus)?;
        let len = s_plus - s_minus;
        Ok(Self {
            eval: Box::new(move |x| s_minus + x * x * len),
            deriv1: Some(Box::new(move |x| 2.0 * x * len)),
            deriv2: Some(Box::new(move |_| 2.0 * len)),
            kind: GradingKind::Quadratic,
            s_minus,
            s_plus,
        })
    }

    /// Sinh grading s* + lambda sinh(c1 (1 - x) + c2 x).
    pub fn tavella_randall(params: &TavellaRandallParams) -> Self {
        let (lambda, s_star) = (params.lambda, params.s_star);
        let (c1, c) = (params.c1(), params.c());
        Self {
            eval: Box::new(move |x| s_star + lambda * (c1 + c * x).sinh()),
            deriv1: Some(Box::new(move |x| lambda * c * (c1 + c * x).cosh())),
            deriv2: Some(Box::new(move |x| lambda * c * c * (c1 + c * x).sinh())),
            kind: GradingKind::TavellaRandall,
            s_minus: params.s_minus,
            s_plus: params.s_plus,
        }
    }

    /// User-supplied grading with optional derivatives.
    pub fn custom(
        eval: Box<ScalarFn>,
        deriv1: Option<Box<ScalarFn>>,
        deriv2: Option<Box<ScalarFn>>,
        s_minus: f64,
        s_plus: f64,
    ) -> Result<Self> {
        Self::check_interval(s_minus, s_plus)?;
        Ok(Self {
            eval,
            deriv1,
            deriv2,
            kind: GradingKind::Custom,
            s_minus,
            s_plus,
        })
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.eval)(x)
    }

    pub fn deriv1(&self, x: f64) -> Option<f64> {
        self.deriv1.as_ref().map(|f| f(x))
    }

    pub fn deriv2(&self, x: f64) -> Option<f64> {
        self.deriv2.as_ref().map(|f| f(x))
    }

    pub fn has_derivatives(&self) -> bool {
        self.deriv1.is_some() && self.deriv2.is_some()
    }

    pub fn kind(&self) -> GradingKind {
        self.kind
    }

    pub fn s_minus(&self) -> f64 {
        self.s_minus
    }

    pub fn s_plus(&self) -> f64 {
        self.s_plus
    }

    /// Maximum of the first derivative over a uniform probe of [0, 1].
    pub fn max_deriv1(&self) -> Option<f64> {
        let d1 = self.deriv1.as_ref()?;
        Some(probe_max(|x| d1(x)))
    }

    /// Maximum of |second derivative| over a uniform probe of [0, 1].
    pub fn max_abs_deriv2(&self) -> Option<f64> {
        let d2 = self.deriv2.as_ref()?;
        Some(probe_max(|x| d2(x).abs()))
    }

    /// Check strict monotonicity on a fine probe grid and that the images of
    /// 0 and 1 hit the interval ends to within ulp-scale tolerance.
    pub fn validate(&self) -> Result<()> {
        let mut prev = self.eval(0.0);
        for i in 1..PROBE_POINTS {
            let x = i as f64 / (PROBE_POINTS - 1) as f64;
            let v = self.eval(x);
            if v <= prev {
                return Err(Error::NonMonotoneGrading { index: i });
            }
            prev = v;
        }
        let tol = 1e-13 * self.s_plus.abs().max(self.s_minus.abs()).max(1.0);
        let at0 = self.eval(0.0);
        let at1 = self.eval(1.0);
        if (at0 - self.s_minus).abs() > tol {
            return Err(Error::EndpointMismatch(format!(
                "phi(0) = {at0}, expected {}",
                self.s_minus
            )));
        }
        if (at1 - self.s_plus).abs() > tol {
            return Err(Error::EndpointMismatch(format!(
                "phi(1) = {at1}, expected {}",
                self.s_plus
            )));
        }
        Ok(())
    }
}

fn probe_max(f: impl Fn(f64) -> f64) -> f64 {
    (0..PROBE_POINTS)
        .map(|i| f(i as f64 / (PROBE_POINTS - 1) as f64))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Parameters of the Tavella-Randall grid on [s-, s+].
///
/// lambda controls uniformity: large lambda gives a nearly uniform grid,
/// small lambda concentrates nodes tightly around s*.
#[derive(Debug, Clone, Copy)]
pub struct TavellaRandallParams {
    pub lambda: f64,
    pub s_star: f64,
    pub s_minus: f64,
    pub s_plus: f64,
}

impl TavellaRandallParams {
    pub fn new(lambda: f64, s_star: f64, s_minus: f64, s_plus: f64) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tavella-randall lambda must be positive, got {lambda}"
            )));
        }
        if !(s_minus < s_star && s_star < s_plus) {
            return Err(Error::InvalidParameter(format!(
                "concentration point {s_star} outside ({s_minus}, {s_plus})"
            )));
        }
        Ok(Self {
            lambda,
            s_star,
            s_minus,
            s_plus,
        })
    }

    pub fn c1(&self) -> f64 {
        asinh((self.s_minus - self.s_star) / self.lambda)
    }

    pub fn c2(&self) -> f64 {
        asinh((self.s_plus - self.s_star) / self.lambda)
    }

    pub fn c(&self) -> f64 {
        self.c2() - self.c1()
    }
}

/// Strictly increasing node array with its steps.
#[derive(Debug, Clone)]
pub struct Mesh {
    nodes: Vec<f64>,
    steps: Vec<f64>,
}

impl Mesh {
    /// Build from raw nodes; the ends are snapped onto [s-, s+] exactly to
    /// remove 1-ulp drift from transcendental evaluation.
    fn from_nodes(mut nodes: Vec<f64>, s_minus: f64, s_plus: f64) -> Result<Self> {
        let n = nodes.len() - 1;
        nodes[0] = s_minus;
        nodes[n] = s_plus;
        let steps: Vec<f64> = nodes.windows(2).map(|w| w[1] - w[0]).collect();
        if let Some(i) = steps.iter().position(|&h| !(h > 0.0)) {
            return Err(Error::NonMonotoneGrading { index: i });
        }
        Ok(Self { nodes, steps })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn steps(&self) -> &[f64] {
        &self.steps
    }

    /// Number of intervals N (one less than the node count).
    pub fn interval_count(&self) -> usize {
        self.steps.len()
    }

    pub fn s_minus(&self) -> f64 {
        self.nodes[0]
    }

    pub fn s_plus(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    pub fn min_step(&self) -> f64 {
        self.steps.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_step(&self) -> f64 {
        self.steps.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

fn check_build_args(s_minus: f64, s_plus: f64, n: usize) -> Result<()> {
    if !(s_minus < s_plus) {
        return Err(Error::InvalidParameter(format!(
            "degenerate interval [{s_minus}, {s_plus}]"
        )));
    }
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "mesh needs at least 2 intervals, got {n}"
        )));
    }
    Ok(())
}

/// Uniform mesh with N equal steps.
pub fn build_uniform(s_minus: f64, s_plus: f64, n: usize) -> Result<Mesh> {
    check_build_args(s_minus, s_plus, n)?;
    let len = s_plus - s_minus;
    let nodes = (0..=n)
        .map(|i| s_minus + i as f64 * len / n as f64)
        .collect();
    Mesh::from_nodes(nodes, s_minus, s_plus)
}

/// Quadratic mesh s_n = s- + (n/N)^2 (s+ - s-).
pub fn build_quadratic(s_minus: f64, s_plus: f64, n: usize) -> Result<Mesh> {
    check_build_args(s_minus, s_plus, n)?;
    let len = s_plus - s_minus;
    let nodes = (0..=n)
        .map(|i| {
            let x = i as f64 / n as f64;
            s_minus + x * x * len
        })
        .collect();
    Mesh::from_nodes(nodes, s_minus, s_plus)
}

/// Tavella-Randall mesh s_n = s* + lambda sinh(c1 (1 - n/N) + c2 n/N).
pub fn build_tavella_randall(params: &TavellaRandallParams, n: usize) -> Result<Mesh> {
    check_build_args(params.s_minus, params.s_plus, n)?;
    let (c1, c2) = (params.c1(), params.c2());
    let nodes = (0..=n)
        .map(|i| {
            let x = i as f64 / n as f64;
            params.s_star + params.lambda * (c1 * (1.0 - x) + c2 * x).sinh()
        })
        .collect();
    Mesh::from_nodes(nodes, params.s_minus, params.s_plus)
}

/// Mesh from an arbitrary grading, s_n = phi(n/N).
pub fn build_from_grading(phi: &GradingFunction, n: usize) -> Result<Mesh> {
    check_build_args(phi.s_minus(), phi.s_plus(), n)?;
    phi.validate()?;
    let nodes = (0..=n).map(|i| phi.eval(i as f64 / n as f64)).collect();
    Mesh::from_nodes(nodes, phi.s_minus(), phi.s_plus())
}

/// Estimate of the smallest Tavella-Randall step, lambda c / N.
///
/// The estimate is the exact step density at the concentration point; it is
/// meaningful when s* sits inside (s-, s+) with some margin.
pub fn tr_min_step_estimate(params: &TavellaRandallParams, n: usize) -> f64 {
    params.lambda * params.c() / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn asinh_matches_std() {
        for &x in &[-1e8, -50.0, -1.0, -1e-8, 0.0, 1e-8, 1.0, 50.0, 1e8] {
            assert!((asinh(x) - f64::asinh(x)).abs() <= 1e-15 * f64::asinh(x).abs().max(1.0));
        }
    }

    #[test]
    fn uniform_equal_subdivision() {
        let mesh = build_uniform(0.0, 1.0, 4).unwrap();
        assert_eq!(mesh.nodes(), &[0.0, 0.25, 0.5, 0.75, 1.0]);

        let mesh = build_uniform(0.0, 100.0, 50).unwrap();
        for &h in mesh.steps() {
            assert!((h - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_rejects_bad_args() {
        assert!(matches!(
            build_uniform(0.0, 40.0, 1),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            build_uniform(1.0, 1.0, 10),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn quadratic_nodes_and_steps() {
        let mesh = build_quadratic(0.0, 1.0, 4).unwrap();
        let expect = [0.0, 1.0 / 16.0, 0.25, 9.0 / 16.0, 1.0];
        for (a, b) in mesh.nodes().iter().zip(expect.iter()) {
            assert!((a - b).abs() < 1e-15);
        }

        for n in [10usize, 37, 256] {
            let mesh = build_quadratic(0.0, 1.0, n).unwrap();
            let nn = n as f64;
            assert!((mesh.steps()[0] - 1.0 / (nn * nn)).abs() < 1e-15);
            assert!((mesh.steps()[n - 1] - (2.0 * nn - 1.0) / (nn * nn)).abs() < 1e-13);
        }

        let mesh = build_quadratic(0.0, 73.5, 12).unwrap();
        assert_eq!(mesh.s_minus(), 0.0);
        assert_eq!(mesh.s_plus(), 73.5);
    }

    #[test]
    fn tavella_randall_endpoints_and_concentration() {
        // the lambda = 4, K = 20 grid on [0, 40] with 15 intervals
        let params = TavellaRandallParams::new(4.0, 20.0, 0.0, 40.0).unwrap();
        let mesh = build_tavella_randall(&params, 15).unwrap();
        assert_eq!(mesh.nodes().len(), 16);
        assert_eq!(mesh.s_minus(), 0.0);
        assert_eq!(mesh.s_plus(), 40.0);

        // the smallest interval straddles the concentration point
        let steps = mesh.steps();
        let (imin, _) = steps
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap();
        assert!(mesh.nodes()[imin] <= 20.0 + 1e-12 && 20.0 <= mesh.nodes()[imin + 1] + steps[imin]);

        // symmetric case: oddness of sinh pairs the nodes
        for n in 0..=15 {
            let sum = mesh.nodes()[n] + mesh.nodes()[15 - n];
            assert!((sum - 40.0).abs() < 1e-12);
        }
    }

    #[test]
    fn tavella_randall_pricing_grid_monotone_steps() {
        // lambda = 6 grid on [0, 100] concentrated at K = 50
        let params = TavellaRandallParams::new(6.0, 50.0, 0.0, 100.0).unwrap();
        let mesh = build_tavella_randall(&params, 50).unwrap();
        let steps = mesh.steps();
        let (imin, _) = steps
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap();
        for i in 1..=imin {
            assert!(steps[i] <= steps[i - 1] + 1e-14, "steps grow toward s* from the left");
        }
        for i in imin + 1..steps.len() {
            assert!(steps[i] >= steps[i - 1] - 1e-14, "steps grow away from s* to the right");
        }
    }

    #[test]
    fn tavella_randall_rejects_bad_params() {
        assert!(TavellaRandallParams::new(0.0, 20.0, 0.0, 40.0).is_err());
        assert!(TavellaRandallParams::new(-1.0, 20.0, 0.0, 40.0).is_err());
        assert!(TavellaRandallParams::new(4.0, 40.0, 0.0, 40.0).is_err());
        assert!(TavellaRandallParams::new(4.0, -3.0, 0.0, 40.0).is_err());
    }

    #[test]
    fn grading_reproduces_builders() {
        // phi_Q(x) = S x^2
        let phi = GradingFunction::quadratic(0.0, 87.0).unwrap();
        let a = build_from_grading(&phi, 33).unwrap();
        let b = build_quadratic(0.0, 87.0, 33).unwrap();
        for (x, y) in a.nodes().iter().zip(b.nodes()) {
            assert!((x - y).abs() < 1e-10);
        }

        // phi_{lambda,K}(x) = K + lambda sinh(c x + c1)
        let params = TavellaRandallParams::new(6.0, 50.0, 0.0, 100.0).unwrap();
        let phi = GradingFunction::tavella_randall(&params);
        let a = build_from_grading(&phi, 50).unwrap();
        let b = build_tavella_randall(&params, 50).unwrap();
        for (x, y) in a.nodes().iter().zip(b.nodes()) {
            assert!((x - y).abs() < 1e-10);
        }

        // identity grading gives the uniform mesh on [0, 1]
        let phi = GradingFunction::uniform(0.0, 1.0).unwrap();
        let mesh = build_from_grading(&phi, 10).unwrap();
        for (i, &s) in mesh.nodes().iter().enumerate() {
            assert!((s - i as f64 / 10.0).abs() < 1e-15);
        }
    }

    #[test]
    fn grading_rejects_non_monotone() {
        let phi = GradingFunction::custom(
            Box::new(|x| (2.0 * std::f64::consts::PI * x).sin() + x),
            None,
            None,
            0.0,
            1.0,
        )
        .unwrap();
        assert!(matches!(
            build_from_grading(&phi, 10),
            Err(Error::NonMonotoneGrading { .. })
        ));
    }

    #[test]
    fn grading_rejects_endpoint_mismatch() {
        let phi = GradingFunction::custom(Box::new(|x| 0.1 + x), None, None, 0.0, 1.0).unwrap();
        assert!(matches!(phi.validate(), Err(Error::EndpointMismatch(_))));
    }

    #[test]
    fn mesh_invariants_on_generated_meshes() {
        let params = TavellaRandallParams::new(4.0, 20.0, 0.0, 40.0).unwrap();
        let meshes = [
            build_uniform(0.0, 1.0, 31).unwrap(),
            build_quadratic(0.0, 100.0, 50).unwrap(),
            build_tavella_randall(&params, 25).unwrap(),
        ];
        for mesh in &meshes {
            assert!(mesh.steps().iter().all(|&h| h > 0.0));
            let sum: f64 = mesh.steps().iter().sum();
            let len = mesh.s_plus() - mesh.s_minus();
            assert!((sum - len).abs() <= 1e-10 * len);
        }
    }

    #[test]
    fn grading_bound_on_max_step() {
        // mean value theorem: h_n <= max phi' / N
        for n in [10usize, 50, 200] {
            let params = TavellaRandallParams::new(2.0, 50.0, 0.0, 100.0).unwrap();
            let phi = GradingFunction::tavella_randall(&params);
            let mesh = build_from_grading(&phi, n).unwrap();
            let bound = phi.max_deriv1().unwrap() / n as f64 + 1e-12;
            assert!(mesh.max_step() <= bound);

            let phi = GradingFunction::quadratic(0.0, 40.0).unwrap();
            let mesh = build_from_grading(&phi, n).unwrap();
            assert!(mesh.max_step() <= phi.max_deriv1().unwrap() / n as f64 + 1e-12);
        }
    }

    #[test]
    fn tr_large_lambda_is_almost_uniform() {
        let s = 100.0;
        let params = TavellaRandallParams::new(1e4 * s, 50.0, 0.0, s).unwrap();
        let mesh = build_tavella_randall(&params, 50).unwrap();
        assert!(mesh.max_step() / mesh.min_step() <= 1.01);
    }

    #[test]
    fn min_step_estimate_brackets_actual() {
        for &lambda in &[1.0, 4.0, 6.0] {
            let params = TavellaRandallParams::new(lambda, 50.0, 0.0, 100.0).unwrap();
            let mesh = build_tavella_randall(&params, 50).unwrap();
            let est = tr_min_step_estimate(&params, 50);
            let actual = mesh.min_step();
            assert!(
                actual >= 0.5 * est && actual <= 2.0 * est,
                "lambda={lambda}: actual {actual} vs estimate {est}"
            );
        }
    }

    #[test]
    fn min_step_estimate_limits() {
        // large lambda: estimate approaches S/N
        let s = 100.0;
        let params = TavellaRandallParams::new(1e6, 50.0, 0.0, s).unwrap();
        let est = tr_min_step_estimate(&params, 50);
        let uniform = s / 50.0;
        assert!((est - uniform).abs() <= 0.01 * uniform);

        // symmetric lambda = S - K = K: c = 2 asinh(1) = 2 ln(1 + sqrt(2))
        let params = TavellaRandallParams::new(50.0, 50.0, 0.0, 100.0).unwrap();
        let c = params.c();
        assert!((c - 2.0 * (1.0 + 2.0_f64.sqrt()).ln()).abs() < 1e-14);
        assert!((c - 1.762_747_174_039_086).abs() < 1e-14);
    }
}
