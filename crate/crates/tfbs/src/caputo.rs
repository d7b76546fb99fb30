//! L1 discretization of the Caputo time derivative of order alpha in (0, 1).
//!
//! On the uniform time grid t_k = k tau the derivative at t_m is
//! approximated by
//!
//! ```text
//! (1 / (Gamma(2 - alpha) tau^alpha)) sum_{k=0}^{m} sigma_k u^{m-k},
//! ```
//!
//! which is the exact Caputo derivative of the piecewise-linear interpolant
//! of the samples. The weights telescope to zero, so constants differentiate
//! to zero, and the rule is exact on linear data.

use crate::error::{Error, Result};

/// Gamma function for positive arguments.
pub fn gamma_fn(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "gamma argument must be positive, got {x}"
        )));
    }
    Ok(statrs::function::gamma::gamma(x))
}

/// Interior weight sigma_k = (k-1)^(1-a) - 2 k^(1-a) + (k+1)^(1-a), k >= 1.
pub fn sigma_interior(alpha: f64, k: usize) -> f64 {
    let b = 1.0 - alpha;
    let k = k as f64;
    (k - 1.0).powf(b) - 2.0 * k.powf(b) + (k + 1.0).powf(b)
}

/// Last weight sigma_m = (m-1)^(1-a) - m^(1-a).
pub fn sigma_last(alpha: f64, m: usize) -> f64 {
    let b = 1.0 - alpha;
    let m = m as f64;
    (m - 1.0).powf(b) - m.powf(b)
}

/// L1 weights for one time level m.
#[derive(Debug, Clone)]
pub struct L1Weights {
    alpha: f64,
    tau: f64,
    sigma: Vec<f64>,
}

impl L1Weights {
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// sigma_0 ... sigma_m.
    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    /// The time level m the weights belong to.
    pub fn step_count(&self) -> usize {
        self.sigma.len() - 1
    }

    /// Prefactor 1 / (Gamma(2 - alpha) tau^alpha).
    pub fn scale(&self) -> f64 {
        1.0 / (gamma_fn(2.0 - self.alpha).expect("2 - alpha > 0") * self.tau.powf(self.alpha))
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "fractional order must lie in (0, 1), got {alpha}"
        )));
    }
    Ok(())
}

/// Weights for the L1 rule at time level m >= 1.
///
/// The last weight uses its own form; for m = 1 the array is {1, -1}.
pub fn l1_weights(alpha: f64, tau: f64, m: usize) -> Result<L1Weights> {
    check_alpha(alpha)?;
    if !(tau > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "time step must be positive, got {tau}"
        )));
    }
    if m < 1 {
        return Err(Error::InvalidParameter(
            "L1 weights need at least one time step".into(),
        ));
    }
    let mut sigma = Vec::with_capacity(m + 1);
    sigma.push(1.0);
    for k in 1..m {
        sigma.push(sigma_interior(alpha, k));
    }
    sigma.push(sigma_last(alpha, m));
    Ok(L1Weights { alpha, tau, sigma })
}

/// Apply the rule to a history u^0 ... u^m: scale * sum_k sigma_k u^{m-k}.
pub fn l1_apply(weights: &L1Weights, history: &[f64]) -> Result<f64> {
    let m = weights.step_count();
    if history.len() != m + 1 {
        return Err(Error::HistoryLengthMismatch {
            got: history.len(),
            expected: m + 1,
        });
    }
    let mut acc = 0.0;
    for (k, sig) in weights.sigma.iter().enumerate() {
        acc += sig * history[m - k];
    }
    Ok(acc * weights.scale())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Gamma(x) evaluated from the defining integral, independent of the
    /// production path: a series for the [0, 1] part and Romberg on the tail.
    fn gamma_oracle(x: f64) -> f64 {
        // int_0^1 t^{x-1} e^{-t} dt = sum_j (-1)^j / (j! (x + j))
        let mut low = 0.0;
        let mut fact = 1.0;
        for j in 0..40 {
            let jf = j as f64;
            if j > 0 {
                fact *= jf;
            }
            let term = if j % 2 == 0 { 1.0 } else { -1.0 } / (fact * (x + jf));
            low += term;
        }
        // int_1^60 t^{x-1} e^{-t} dt by Romberg
        let f = |t: f64| t.powf(x - 1.0) * (-t).exp();
        let (a, b) = (1.0, 60.0);
        let levels = 18;
        let mut r = vec![vec![0.0f64; levels]; levels];
        r[0][0] = (b - a) / 2.0 * (f(a) + f(b));
        for i in 1..levels {
            let n = 1usize << i;
            let h = (b - a) / n as f64;
            let mut s = 0.0;
            for k in (1..n).step_by(2) {
                s += f(a + k as f64 * h);
            }
            r[i][0] = r[i - 1][0] / 2.0 + h * s;
            for j in 1..=i {
                let pow = 4f64.powi(j as i32);
                r[i][j] = (pow * r[i][j - 1] - r[i - 1][j - 1]) / (pow - 1.0);
            }
        }
        low + r[levels - 1][levels - 1]
    }

    #[test]
    fn gamma_identities() {
        assert!((gamma_fn(1.0).unwrap() - 1.0).abs() < 1e-14);
        assert!((gamma_fn(2.0).unwrap() - 1.0).abs() < 1e-14);
        let sqrt_pi = std::f64::consts::PI.sqrt();
        assert!((gamma_fn(0.5).unwrap() - sqrt_pi).abs() < 1e-13 * sqrt_pi);
        assert!(gamma_fn(0.0).is_err());
        assert!(gamma_fn(-1.5).is_err());
    }

    #[test]
    fn gamma_against_integral_oracle() {
        // the solver only exercises (0.25, 3.5)
        for &x in &[0.25, 0.5, 0.75, 1.1, 1.25, 1.5, 2.25, 2.75, 3.25, 3.5] {
            let got = gamma_fn(x).unwrap();
            let want = gamma_oracle(x);
            assert!(
                (got - want).abs() <= 1e-12 * want.abs(),
                "Gamma({x}): {got} vs oracle {want}"
            );
        }
        // frozen reference value
        assert!((gamma_fn(1.25).unwrap() - 0.906_402_477_055_477_1).abs() < 1e-13);
    }

    #[test]
    fn weight_values() {
        // interior weight at alpha = 1/2: sigma_1 = sqrt(2) - 2
        let w = l1_weights(0.5, 0.1, 3).unwrap();
        assert!((w.sigma()[1] - (2f64.sqrt() - 2.0)).abs() < 1e-15);
        assert!((w.sigma()[1] + 0.585_786_437_626_904_9).abs() < 1e-14);

        // m = 1 gives {1, -1} for any order
        for alpha in [0.1, 0.5, 0.9] {
            let w = l1_weights(alpha, 0.3, 1).unwrap();
            assert_eq!(w.sigma().len(), 2);
            assert!((w.sigma()[0] - 1.0).abs() < 1e-15);
            assert!((w.sigma()[1] + 1.0).abs() < 1e-15);
        }

        let w = l1_weights(0.75, 0.25, 4).unwrap();
        let sum: f64 = w.sigma().iter().sum();
        assert!(sum.abs() < 1e-14);
    }

    #[test]
    fn weights_reject_bad_arguments() {
        assert!(l1_weights(0.0, 0.1, 3).is_err());
        assert!(l1_weights(1.0, 0.1, 3).is_err());
        assert!(l1_weights(1.5, 0.1, 3).is_err());
        assert!(l1_weights(0.5, 0.0, 3).is_err());
        assert!(l1_weights(0.5, 0.1, 0).is_err());
    }

    #[test]
    fn weights_telescope_and_stay_negative() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let alpha = rng.gen_range(0.02..0.98);
            let m = rng.gen_range(1..400usize);
            let w = l1_weights(alpha, 0.01, m).unwrap();
            let sum: f64 = w.sigma().iter().sum();
            assert!(sum.abs() <= 1e-12, "alpha={alpha} m={m}: sum {sum}");
            assert_eq!(w.sigma()[0], 1.0);
            for k in 1..=m {
                assert!(w.sigma()[k] < 0.0, "sigma_{k} not negative");
            }
            // interior weights increase toward zero
            for k in 2..m {
                assert!(w.sigma()[k] > w.sigma()[k - 1]);
            }
        }
    }

    #[test]
    fn derivative_of_constant_vanishes() {
        let w = l1_weights(0.6, 0.05, 20).unwrap();
        let hist = vec![4.2; 21];
        let got = l1_apply(&w, &hist).unwrap();
        assert!(got.abs() <= 1e-12 * 4.2 * w.scale());
    }

    #[test]
    fn exact_on_linear_data() {
        // d^a/dt^a of t is t^{1-a} / Gamma(2 - a); L1 reproduces it exactly
        for &(alpha, tau, m) in &[(0.3, 0.05, 10usize), (0.5, 0.01, 100), (0.9, 1e-3, 10_000)] {
            let w = l1_weights(alpha, tau, m).unwrap();
            let hist: Vec<f64> = (0..=m).map(|k| k as f64 * tau).collect();
            let got = l1_apply(&w, &hist).unwrap();
            let t = m as f64 * tau;
            let want = t.powf(1.0 - alpha) / gamma_fn(2.0 - alpha).unwrap();
            assert!(
                (got - want).abs() <= 1e-10 * want,
                "alpha={alpha} m={m}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let w = l1_weights(0.5, 0.1, 5).unwrap();
        assert!(matches!(
            l1_apply(&w, &[0.0; 5]),
            Err(Error::HistoryLengthMismatch { .. })
        ));
    }

    #[test]
    fn quadratic_history_converges_at_two_minus_alpha() {
        // u = 1 + 2t + 3t^2 at t = 1, alpha = 3/4: the derivative is
        // 2 / Gamma(1.25) + 6 / Gamma(2.25)
        let alpha = 0.75;
        let want = 2.0 / 0.906_402_477_055_477_1 + 6.0 / 1.133_003_096_319_346_3;
        assert!((want - 7.502_186_028_981_693).abs() < 1e-12);

        let mut errs = Vec::new();
        for m in [64usize, 128, 256, 512] {
            let tau = 1.0 / m as f64;
            let w = l1_weights(alpha, tau, m).unwrap();
            let hist: Vec<f64> = (0..=m)
                .map(|k| {
                    let t = k as f64 * tau;
                    1.0 + 2.0 * t + 3.0 * t * t
                })
                .collect();
            errs.push((l1_apply(&w, &hist).unwrap() - want).abs());
        }
        for pair in errs.windows(2) {
            let order = (pair[0] / pair[1]).log2();
            assert!(
                (order - (2.0 - alpha)).abs() <= 0.1,
                "observed order {order}"
            );
        }
    }
}
