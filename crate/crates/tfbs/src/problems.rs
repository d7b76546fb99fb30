//! Pricing problem definition and the exact transform chain to diffusion
//! form.
//!
//! The backward pricing equation is flipped in time (t := T - t), shifted by
//! W = V + (K/S)(s - S) to make the Dirichlet data homogeneous, and the
//! convection term is eliminated by U = s^q W with q = (r - d) / sigma^2.
//! The result is the convection-free problem
//!
//! ```text
//! d^a U / dt^a = A s^2 U_ss + B U + F(s, t)
//! ```
//!
//! on [0, S] x [0, T] with U = 0 on the boundary, which is the form the
//! compact scheme marches. `recover_option_prices` inverts the chain.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use crate::caputo::{self, gamma_fn};
use crate::error::{Error, Result};
use crate::solver::SolutionGrid;

type SpaceTimeFn = dyn Fn(f64, f64) -> f64 + Send + Sync;
type ScalarFn = dyn Fn(f64) -> f64 + Send + Sync;

/// Market data for a European put under the fractional model.
#[derive(Debug, Clone, Copy)]
pub struct MarketParams {
    /// Annual volatility.
    pub sigma: f64,
    /// Risk-free rate.
    pub r: f64,
    /// Dividend yield.
    pub d: f64,
    /// Strike price K.
    pub strike: f64,
    /// Right end S of the truncated price domain [0, S].
    pub s_max: f64,
    /// Expiry T.
    pub expiry: f64,
    /// Fractional order of the time derivative.
    pub alpha: f64,
}

impl MarketParams {
    pub fn new(
        sigma: f64,
        r: f64,
        d: f64,
        strike: f64,
        s_max: f64,
        expiry: f64,
        alpha: f64,
    ) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sigma must be positive, got {sigma}"
            )));
        }
        if !(strike > 0.0 && strike < s_max) {
            return Err(Error::InvalidParameter(format!(
                "strike must satisfy 0 < K < S, got K={strike}, S={s_max}"
            )));
        }
        if !(expiry > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "expiry must be positive, got {expiry}"
            )));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "fractional order must lie in (0, 1), got {alpha}"
            )));
        }
        Ok(Self {
            sigma,
            r,
            d,
            strike,
            s_max,
            expiry,
            alpha,
        })
    }

    /// Convection-elimination exponent q = (r - d) / sigma^2.
    pub fn q(&self) -> f64 {
        (self.r - self.d) / (self.sigma * self.sigma)
    }
}

/// European put payoff max(K - s, 0).
pub fn payoff(s: f64, strike: f64) -> f64 {
    (strike - s).max(0.0)
}

/// The diffusion-form problem marched by the solver.
pub struct DiffusionProblem {
    /// Diffusion scale A multiplying s^2 U_ss.
    pub a: f64,
    /// Reaction coefficient B.
    pub b: f64,
    pub s_minus: f64,
    pub s_plus: f64,
    /// Length of the forward time interval.
    pub horizon: f64,
    pub alpha: f64,
    forcing: Arc<SpaceTimeFn>,
    initial: Arc<ScalarFn>,
    forcing_over_s2_limit: Option<Arc<ScalarFn>>,
}

impl DiffusionProblem {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        a: f64,
        b: f64,
        s_minus: f64,
        s_plus: f64,
        horizon: f64,
        alpha: f64,
        forcing: Arc<SpaceTimeFn>,
        initial: Arc<ScalarFn>,
    ) -> Result<Self> {
        if !(s_minus < s_plus) {
            return Err(Error::InvalidParameter(format!(
                "degenerate domain [{s_minus}, {s_plus}]"
            )));
        }
        if !(horizon > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "fractional order must lie in (0, 1), got {alpha}"
            )));
        }
        // homogeneous Dirichlet compatibility of the initial profile
        for s in [s_minus, s_plus] {
            let v = initial(s);
            if v.abs() > 1e-10 {
                return Err(Error::InvalidParameter(format!(
                    "initial profile is {v} at boundary s = {s}, expected 0"
                )));
            }
        }
        Ok(Self {
            a,
            b,
            s_minus,
            s_plus,
            horizon,
            alpha,
            forcing,
            initial,
            forcing_over_s2_limit: None,
        })
    }

    /// Attach the analytic limit of F(s, t) / s^2 as s approaches the left
    /// end, enabling the compact-limit boundary strategy.
    pub fn with_forcing_limit(mut self, limit: Arc<ScalarFn>) -> Self {
        self.forcing_over_s2_limit = Some(limit);
        self
    }

    pub fn forcing(&self, s: f64, t: f64) -> f64 {
        (self.forcing)(s, t)
    }

    pub fn initial(&self, s: f64) -> f64 {
        (self.initial)(s)
    }

    pub fn has_forcing_limit(&self) -> bool {
        self.forcing_over_s2_limit.is_some()
    }

    pub fn forcing_over_s2_limit(&self, t: f64) -> Option<f64> {
        self.forcing_over_s2_limit.as_ref().map(|f| f(t))
    }
}

/// Record of the substitutions performed by `to_diffusion`, needed to map
/// the diffusion solution back to option prices.
#[derive(Debug, Clone, Copy)]
pub struct TransformRecord {
    pub q: f64,
}

/// Transform the pricing problem to diffusion form.
///
/// Coefficients: A = sigma^2 / 2, B = -(r + d + q^2 sigma^2) / 2 and
/// F(s, t) = -s^q (d K s / S - r K). The initial profile is the shifted,
/// weighted payoff s^q (max(K - s, 0) + (K/S)(s - S)); it vanishes at both
/// ends. Forward time runs from 0 (expiry) to T (today).
pub fn to_diffusion(mp: &MarketParams) -> Result<(DiffusionProblem, TransformRecord)> {
    let q = mp.q();
    let a = mp.sigma * mp.sigma / 2.0;
    let b = -0.5 * (mp.r + mp.d + q * q * mp.sigma * mp.sigma);
    let (strike, s_max) = (mp.strike, mp.s_max);
    let (r, d) = (mp.r, mp.d);

    // s^q extended by continuity: the shifted payoff vanishes at s = 0, so
    // the product is 0 there for every q.
    let forcing: Arc<SpaceTimeFn> = Arc::new(move |s: f64, _t: f64| {
        if s <= 0.0 {
            0.0
        } else {
            -s.powf(q) * (d * strike * s / s_max - r * strike)
        }
    });
    let initial: Arc<ScalarFn> = Arc::new(move |s: f64| {
        if s <= 0.0 {
            0.0
        } else {
            s.powf(q) * (payoff(s, strike) + strike / s_max * (s - s_max))
        }
    });

    let mut problem = DiffusionProblem::new(
        a,
        b,
        0.0,
        s_max,
        mp.expiry,
        mp.alpha,
        forcing,
        initial,
    )?;
    // F / s^2 = -s^(q-2) (d K s / S - r K) has a finite limit at s = 0 when
    // q >= 2: zero for q > 2, r K at q = 2.
    if q > 2.0 {
        problem = problem.with_forcing_limit(Arc::new(|_t| 0.0));
    } else if q == 2.0 {
        let lim = r * strike;
        problem = problem.with_forcing_limit(Arc::new(move |_t| lim));
    }
    Ok((problem, TransformRecord { q }))
}

/// Map the diffusion solution back to option prices.
///
/// Interior nodes use V = s^{-q} U - (K/S)(s - S); the boundary columns are
/// set from the Dirichlet data V(0, .) = K and V(S, .) = 0. Row m of the
/// result holds prices at market time T - t_m.
pub fn recover_option_prices(
    solution: &SolutionGrid,
    mp: &MarketParams,
    q: f64,
) -> Result<Vec<Vec<f64>>> {
    let nodes = solution.mesh().nodes();
    let n = nodes.len() - 1;
    let tol = 1e-10 * mp.s_max;
    if (nodes[0] - 0.0).abs() > tol || (nodes[n] - mp.s_max).abs() > tol {
        return Err(Error::InvalidParameter(format!(
            "solution mesh spans [{}, {}], expected [0, {}]",
            nodes[0], nodes[n], mp.s_max
        )));
    }
    let shift = |s: f64| mp.strike / mp.s_max * (s - mp.s_max);
    let mut out = Vec::with_capacity(solution.values().len());
    for row in solution.values() {
        let mut v = vec![0.0; n + 1];
        v[0] = mp.strike;
        v[n] = 0.0;
        for j in 1..n {
            v[j] = nodes[j].powf(-q) * row[j] - shift(nodes[j]);
        }
        out.push(v);
    }
    Ok(out)
}

/// A separable manufactured solution U(s, t) = tf(t) shape(s) together with
/// the forcing that makes it solve the diffusion problem exactly.
pub struct ManufacturedCase {
    pub a: f64,
    pub b: f64,
    pub alpha: f64,
    pub horizon: f64,
    pub s_minus: f64,
    pub s_plus: f64,
    time_factor: Arc<ScalarFn>,
    caputo_time_factor: Arc<ScalarFn>,
    shape: Arc<ScalarFn>,
    shape_dd: Arc<ScalarFn>,
}

impl ManufacturedCase {
    /// Build a separable case from its pieces. `caputo_time_factor` must be
    /// the exact Caputo derivative of `time_factor` for the given order.
    #[allow(clippy::too_many_arguments)]
    pub fn separable(
        a: f64,
        b: f64,
        alpha: f64,
        horizon: f64,
        s_minus: f64,
        s_plus: f64,
        time_factor: Arc<ScalarFn>,
        caputo_time_factor: Arc<ScalarFn>,
        shape: Arc<ScalarFn>,
        shape_dd: Arc<ScalarFn>,
    ) -> Self {
        Self {
            a,
            b,
            alpha,
            horizon,
            s_minus,
            s_plus,
            time_factor,
            caputo_time_factor,
            shape,
            shape_dd,
        }
    }

    pub fn exact(&self, s: f64, t: f64) -> f64 {
        (self.time_factor)(t) * (self.shape)(s)
    }

    /// Analytic forcing F = caputo_tf(t) shape(s) - tf(t)(A s^2 shape'' + B shape).
    pub fn forcing(&self, s: f64, t: f64) -> f64 {
        (self.caputo_time_factor)(t) * (self.shape)(s)
            - (self.time_factor)(t) * (self.a * s * s * (self.shape_dd)(s) + self.b * (self.shape)(s))
    }

    /// Exact Caputo derivative of the solution at (s, t).
    pub fn caputo_exact(&self, s: f64, t: f64) -> f64 {
        (self.caputo_time_factor)(t) * (self.shape)(s)
    }

    /// The diffusion problem with the analytic forcing.
    pub fn problem(&self) -> Result<DiffusionProblem> {
        let tf = Arc::clone(&self.time_factor);
        let ctf = Arc::clone(&self.caputo_time_factor);
        let shape = Arc::clone(&self.shape);
        let shape_dd = Arc::clone(&self.shape_dd);
        let (a, b) = (self.a, self.b);
        let forcing: Arc<SpaceTimeFn> = Arc::new(move |s, t| {
            ctf(t) * shape(s) - tf(t) * (a * s * s * shape_dd(s) + b * shape(s))
        });
        let shape0 = Arc::clone(&self.shape);
        let tf0 = (self.time_factor)(0.0);
        let initial: Arc<ScalarFn> = Arc::new(move |s| tf0 * shape0(s));
        DiffusionProblem::new(
            a,
            b,
            self.s_minus,
            self.s_plus,
            self.horizon,
            self.alpha,
            forcing,
            initial,
        )
    }

    /// The same problem with the Caputo part of the forcing sampled through
    /// the L1 quadrature on the march's own time grid.
    ///
    /// With this forcing the time march reproduces the separable time factor
    /// exactly, so errors against the exact solution isolate the spatial
    /// discretization. Used by the fixed-M space-order studies.
    pub fn problem_with_l1_forcing(&self, m_steps: usize) -> Result<DiffusionProblem> {
        if m_steps < 1 {
            return Err(Error::InvalidParameter(
                "march needs at least one time step".into(),
            ));
        }
        let tau = self.horizon / m_steps as f64;
        let alpha = self.alpha;
        let tf = Arc::clone(&self.time_factor);
        let ctf = Arc::clone(&self.caputo_time_factor);
        let shape = Arc::clone(&self.shape);
        let shape_dd = Arc::clone(&self.shape_dd);
        let (a, b) = (self.a, self.b);
        let cache: Arc<Mutex<HashMap<usize, f64>>> = Arc::new(Mutex::new(HashMap::new()));
        let forcing: Arc<SpaceTimeFn> = Arc::new(move |s, t| {
            let m = (t / tau).round() as usize;
            let dcap = if m == 0 {
                ctf(t)
            } else {
                let mut cache = cache.lock().unwrap();
                *cache.entry(m).or_insert_with(|| {
                    let weights = caputo::l1_weights(alpha, tau, m).expect("valid weights");
                    let history: Vec<f64> = (0..=m).map(|k| tf(k as f64 * tau)).collect();
                    caputo::l1_apply(&weights, &history).expect("matching history")
                })
            };
            dcap * shape(s) - tf(t) * (a * s * s * shape_dd(s) + b * shape(s))
        });
        let shape0 = Arc::clone(&self.shape);
        let tf0 = (self.time_factor)(0.0);
        let initial: Arc<ScalarFn> = Arc::new(move |s| tf0 * shape0(s));
        DiffusionProblem::new(
            a,
            b,
            self.s_minus,
            self.s_plus,
            self.horizon,
            self.alpha,
            forcing,
            initial,
        )
    }
}

/// The standard manufactured case U = (1 + 2t + 3t^2) sin(pi s) on
/// [0, 1] x [0, 1].
///
/// Its exact Caputo derivative in time is
/// 2 t^(1-a) / Gamma(2-a) + 6 t^(2-a) / Gamma(3-a) times sin(pi s).
pub fn manufactured_case(a: f64, b: f64, alpha: f64) -> Result<ManufacturedCase> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "fractional order must lie in (0, 1), got {alpha}"
        )));
    }
    let g2 = gamma_fn(2.0 - alpha)?;
    let g3 = gamma_fn(3.0 - alpha)?;
    let pi = std::f64::consts::PI;
    Ok(ManufacturedCase::separable(
        a,
        b,
        alpha,
        1.0,
        0.0,
        1.0,
        Arc::new(|t| 1.0 + 2.0 * t + 3.0 * t * t),
        Arc::new(move |t: f64| {
            2.0 * t.powf(1.0 - alpha) / g2 + 6.0 * t.powf(2.0 - alpha) / g3
        }),
        Arc::new(move |s: f64| (pi * s).sin()),
        Arc::new(move |s: f64| -pi * pi * (pi * s).sin()),
    ))
}
