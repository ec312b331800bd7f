//! The peakon-antipeakon datum
//!
//!   u0(x) = p0 ( e^{-|x + q0|} - e^{-|x - q0|} ),
//!
//! its exact piecewise derivative, the norm bounds it satisfies, and the
//! Sobolev-norm bracket
//!
//!   C^{-1} p0 q0^{3/2 - s}  <=  ||u0||_{H^s}  <=  C p0 q0^{3/2 - s}
//!
//! valid for s in (1/2, 3/2).  The bracket constant is calibrated once per
//! exponent from the exact Fourier transform of u0,
//!
//!   \hat{u0}(xi) = 4 i p0 sin(q0 xi) / (1 + xi^2),
//!
//! by direct quadrature, so norm measurements on the grid can be tested
//! against an independent route.

use crate::error::{CoreError, Result};
use serde::{Deserialize, Serialize};

/// Which one-sided derivative to take at the kinks x = +-q0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Besov regime triple (s, p, r); p or r may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regime {
    pub s: f64,
    pub p: f64,
    pub r: f64,
}

impl Regime {
    pub fn new(s: f64, p: f64, r: f64) -> Self {
        Self { s, p, r }
    }
}

/// Admissibility of (s, p, r):
///   1 < s < 1 + 1/p  with p in [2, inf), r in [1, inf],   or
///   s = 1            with p in [2, inf), r in [1, 2].
pub fn validate_regime(s: f64, p: f64, r: f64) -> bool {
    if !(p.is_finite() && p >= 2.0) {
        return false;
    }
    if r.is_nan() || r < 1.0 {
        return false;
    }
    let s_is_one = (s - 1.0).abs() < 1e-12;
    if s_is_one {
        r <= 2.0
    } else {
        s > 1.0 && s < 1.0 + 1.0 / p
    }
}

/// Parameters of the construction: amplitude p0 >> 1, half-separation
/// q0 << 1, the Besov regime the experiment runs in, and the smallness /
/// inflation target delta.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakonPairParams {
    pub p0: f64,
    pub q0: f64,
    pub regime: Regime,
    pub delta: f64,
}

impl PeakonPairParams {
    pub fn new(p0: f64, q0: f64, regime: Regime, delta: f64) -> Result<Self> {
        if !(p0 > 0.0 && p0.is_finite()) {
            return Err(CoreError::Param(format!("p0 must be positive, got {p0}")));
        }
        if !(q0 > 0.0 && q0 < 1.0) {
            return Err(CoreError::Param(format!("q0 must lie in (0,1), got {q0}")));
        }
        if !(delta > 0.0) {
            return Err(CoreError::Param(format!("delta must be positive, got {delta}")));
        }
        if !validate_regime(regime.s, regime.p, regime.r) {
            return Err(CoreError::Param(format!(
                "regime (s, p, r) = ({}, {}, {}) is not admissible: need 1 < s < 1 + 1/p, \
                 p in [2, inf), r in [1, inf], or s = 1 with r in [1, 2]",
                regime.s, regime.p, regime.r
            )));
        }
        Ok(Self { p0, q0, regime, delta })
    }

    /// u0(x) = p0 (e^{-|x+q0|} - e^{-|x-q0|}); odd, peaks at x = -+q0.
    pub fn u0(&self, x: f64) -> f64 {
        self.p0 * ((-(x + self.q0).abs()).exp() - (-(x - self.q0).abs()).exp())
    }

    /// Exact piecewise derivative of u0.  At the kinks the two one-sided
    /// values differ, so a side flag is mandatory there.
    pub fn u0_prime(&self, x: f64, side: Option<Side>) -> Result<f64> {
        let (p0, q0) = (self.p0, self.q0);
        let outer = p0 * (q0.exp() - (-q0).exp()); // 2 p0 sinh(q0)
        let inner = |x: f64| -p0 * (-q0).exp() * (x.exp() + (-x).exp());
        if x == q0 {
            return match side {
                Some(Side::Left) => Ok(inner(q0)), // -p0 (e^{-2 q0} + 1)
                Some(Side::Right) => Ok(outer * (-q0).exp()), // p0 (1 - e^{-2 q0})
                None => Err(CoreError::KinkSide(x)),
            };
        }
        if x == -q0 {
            return match side {
                Some(Side::Left) => Ok(outer * (-q0).exp()),
                Some(Side::Right) => Ok(inner(-q0)),
                None => Err(CoreError::KinkSide(x)),
            };
        }
        Ok(if x < -q0 {
            outer * x.exp()
        } else if x < q0 {
            inner(x)
        } else {
            outer * (-x).exp()
        })
    }

    /// Slope at the inner side of the right kink, u0'(q0^-) = -p0 (e^{-2q0} + 1);
    /// the steepest initial slope and the seed of the lifespan bounds.
    pub fn u0_prime_kink_inner(&self) -> f64 {
        -self.p0 * ((-2.0 * self.q0).exp() + 1.0)
    }

    /// Slope at the center, u0'(0) = -2 p0 e^{-q0}.
    pub fn u0_prime_center(&self) -> f64 {
        -2.0 * self.p0 * (-self.q0).exp()
    }

    /// The a-priori sup bounds (||u0||_inf <= 2 p0 q0, ||u0||_2 <= 4 p0 q0).
    pub fn u0_sup_bounds(&self) -> (f64, f64) {
        (2.0 * self.p0 * self.q0, 4.0 * self.p0 * self.q0)
    }

    /// Exact L2 norm: ||u0||_2 = p0 sqrt(2 - 2 e^{-2 q0} (1 + 2 q0)).
    pub fn u0_l2_exact(&self) -> f64 {
        let q = self.q0;
        self.p0 * (2.0 - 2.0 * (-2.0 * q).exp() * (1.0 + 2.0 * q)).sqrt()
    }

    /// Exact slope energy over the inner window (-q0, q0):
    /// int (u0')^2 = p0^2 e^{-2 q0} (2 sinh(2 q0) + 4 q0); this is A(0).
    pub fn slope_energy_inner(&self) -> f64 {
        let q = self.q0;
        self.p0.powi(2) * (-2.0 * q).exp() * (2.0 * (2.0 * q).sinh() + 4.0 * q)
    }

    /// Exact total slope energy: inner part plus
    /// int_{|x|>q0} (u0')^2 = p0^2 (1 - e^{-2 q0})^2.
    pub fn slope_energy_total(&self) -> f64 {
        let t = 1.0 - (-2.0 * self.q0).exp();
        self.slope_energy_inner() + self.p0.powi(2) * t * t
    }

    /// H^sigma norm of u0 from the exact Fourier transform,
    ///   ||u0||^2 = (16 p0^2 / pi) int_0^inf sin^2(q0 xi) (1+xi^2)^{sigma-2} dxi,
    /// by composite Simpson with an analytic tail estimate.  Valid for
    /// sigma < 3/2; used as the calibration route for the norm bracket.
    pub fn hs_norm_exact_ft(&self, sigma: f64) -> Result<f64> {
        if sigma >= 1.5 {
            return Err(CoreError::Param(format!(
                "exact-FT Sobolev norm requires sigma < 3/2, got {sigma}"
            )));
        }
        let cutoff: f64 = 1e7_f64.min(10.0 / self.q0 * 1e3).max(1e5);
        let total = self.hs_ft_integral(sigma, cutoff)
            // tail: sin^2 averages to 1/2, (1+xi^2)^{sigma-2} ~ xi^{2 sigma - 4}
            + 0.5 * cutoff.powf(2.0 * sigma - 3.0) / (3.0 - 2.0 * sigma);
        Ok((16.0 * self.p0 * self.p0 / std::f64::consts::PI * total).sqrt())
    }

    /// Same norm restricted to frequencies |xi| <= xi_max; the right oracle
    /// for grid measurements, which cannot see past their Nyquist frequency
    /// (the kinks put a slowly decaying tail there for sigma near 3/2).
    pub fn hs_norm_exact_ft_banded(&self, sigma: f64, xi_max: f64) -> Result<f64> {
        if sigma >= 1.5 {
            return Err(CoreError::Param(format!(
                "exact-FT Sobolev norm requires sigma < 3/2, got {sigma}"
            )));
        }
        let total = self.hs_ft_integral(sigma, xi_max);
        Ok((16.0 * self.p0 * self.p0 / std::f64::consts::PI * total).sqrt())
    }

    fn hs_ft_integral(&self, sigma: f64, cutoff: f64) -> f64 {
        let q0 = self.q0;
        let integrand = |xi: f64| {
            let s = (q0 * xi).sin();
            s * s * (1.0 + xi * xi).powf(sigma - 2.0)
        };
        // geometric panels keep the point count manageable over 7 decades
        // while resolving the sin^2(q0 xi) oscillation
        let mut total = 0.0;
        let mut a = 0.0;
        let mut b: f64 = 1.0;
        while a < cutoff {
            let b_eff = b.min(cutoff);
            total += simpson(integrand, a, b_eff, 1 << 11);
            a = b_eff;
            b *= 4.0;
        }
        total
    }

    /// Bracket (C^{-1} p0 q0^{3/2-s}, C p0 q0^{3/2-s}) for the H^s norm,
    /// with C calibrated once per exponent at the reference point
    /// (p0, q0) = (1, 0.1) and doubled so the bracket tolerates the drift
    /// of the true ratio across a q0 sweep.
    pub fn hs_norm_bracket(&self, sigma: f64) -> Result<(f64, f64)> {
        if !(sigma > 0.5 && sigma < 1.5) {
            return Err(CoreError::Param(format!(
                "Sobolev bracket is stated for sigma in (1/2, 3/2), got {sigma}"
            )));
        }
        let reference = PeakonPairParams {
            p0: 1.0,
            q0: 0.1,
            regime: self.regime,
            delta: self.delta,
        };
        let measured = reference.hs_norm_exact_ft(sigma)?;
        let ratio = measured / (reference.p0 * reference.q0.powf(1.5 - sigma));
        let c = 2.0 * ratio.max(1.0 / ratio);
        let scale = self.p0 * self.q0.powf(1.5 - sigma);
        Ok((scale / c, scale * c))
    }
}

/// Composite Simpson rule with `panels` subintervals (panels even).
pub(crate) fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let n = panels.max(2) & !1;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(p0: f64, q0: f64) -> PeakonPairParams {
        PeakonPairParams::new(p0, q0, Regime::new(1.2, 2.0, 2.0), 0.5).unwrap()
    }

    #[test]
    fn regime_truth_table() {
        assert!(validate_regime(1.2, 2.0, f64::INFINITY));
        assert!(validate_regime(1.0, 3.0, 2.0));
        assert!(!validate_regime(1.0, 2.0, 3.0)); // r must be <= 2 when s = 1
        assert!(validate_regime(1.0, 2.0, 1.0));
        assert!(validate_regime(1.49, 2.0, 1.0)); // 1.49 < 1 + 1/2
        assert!(!validate_regime(1.5, 2.0, 1.0)); // s = 1 + 1/p excluded
        assert!(!validate_regime(1.2, 1.9, 2.0)); // p < 2
        assert!(!validate_regime(1.2, f64::INFINITY, 2.0)); // p must be finite
        assert!(!validate_regime(0.9, 2.0, 2.0));
        assert!(validate_regime(1.1, 4.0, f64::INFINITY)); // 1.1 < 1.25
        assert!(!validate_regime(1.3, 4.0, 2.0)); // 1.3 > 1.25
    }

    #[test]
    fn params_validation() {
        assert!(PeakonPairParams::new(0.0, 0.01, Regime::new(1.2, 2.0, 2.0), 0.5).is_err());
        assert!(PeakonPairParams::new(10.0, 1.0, Regime::new(1.2, 2.0, 2.0), 0.5).is_err());
        assert!(PeakonPairParams::new(10.0, 0.01, Regime::new(1.0, 2.0, 3.0), 0.5).is_err());
        assert!(PeakonPairParams::new(10.0, 0.01, Regime::new(1.2, 2.0, 2.0), 0.0).is_err());
    }

    #[test]
    fn u0_is_odd_and_matches_closed_values() {
        let p = params(10.0, 0.01);
        assert_eq!(p.u0(0.0), 0.0);
        for &x in &[0.003, 0.01, 0.17, 1.0, 5.0] {
            assert_eq!(p.u0(-x), -p.u0(x), "odd symmetry must be exact");
        }
        // u0(q0) = p0 (e^{-2 q0} - 1)
        let want = 10.0 * ((-0.02f64).exp() - 1.0);
        assert!((p.u0(0.01) - want).abs() < 1e-15);
        assert!((want + 0.198013).abs() < 1e-6, "u0(q0) = {want}");
    }

    #[test]
    fn u0_prime_closed_values_and_kink_sides() {
        let p = params(10.0, 0.01);
        // center: -2 p0 e^{-q0}
        let c = p.u0_prime(0.0, None).unwrap();
        assert!((c - (-2.0 * 10.0 * (-0.01f64).exp())).abs() < 1e-14);
        assert!((c - p.u0_prime_center()).abs() < 1e-14);

        // kink values
        let left = p.u0_prime(0.01, Some(Side::Left)).unwrap();
        assert!((left - (-10.0 * ((-0.02f64).exp() + 1.0))).abs() < 1e-14);
        assert!((left - p.u0_prime_kink_inner()).abs() < 1e-14);

        let right = p.u0_prime(0.01, Some(Side::Right)).unwrap();
        assert!((right - 10.0 * (1.0 - (-0.02f64).exp())).abs() < 1e-13);
        assert!(right > 0.0);

        assert!(matches!(p.u0_prime(0.01, None), Err(CoreError::KinkSide(_))));
        assert!(matches!(p.u0_prime(-0.01, None), Err(CoreError::KinkSide(_))));
    }

    #[test]
    fn slope_signs_inside_and_outside() {
        let p = params(10.0, 0.01);
        // interior: strictly below -p0
        for i in 1..200 {
            let x = -0.01 + 0.02 * i as f64 / 200.0;
            let s = p.u0_prime(x, None).unwrap();
            assert!(s < -p.p0, "interior slope {s} at {x}");
        }
        // exterior left: in (0, 2 p0 q0)
        for &x in &[-5.0, -1.0, -0.5, -0.011] {
            let s = p.u0_prime(x, None).unwrap();
            assert!(s > 0.0 && s < 2.0 * p.p0 * p.q0, "exterior slope {s} at {x}");
        }
    }

    #[test]
    fn sup_bounds_hold_for_sampled_norms() {
        use crate::grid::{Field, Grid};
        let p = params(10.0, 0.01);
        let (linf_bound, l2_bound) = p.u0_sup_bounds();
        assert_eq!((linf_bound, l2_bound), (0.2, 0.4));

        let g = Grid::new(40.0, 1 << 15).unwrap();
        let f = Field::sample(g, |x| p.u0(x)).unwrap();
        let linf = f.lp_norm(f64::INFINITY).unwrap();
        let l2 = f.lp_norm(2.0).unwrap();
        assert!(linf <= linf_bound * (1.0 + 1e-6), "{linf}");
        assert!(l2 <= l2_bound * (1.0 + 1e-6), "{l2}");

        // measured values against the closed forms; the sampled sup misses
        // the off-grid peak by up to |u0'(q0^+)| * h
        let linf_exact = p.p0 * (1.0 - (-2.0 * p.q0).exp());
        assert!(linf <= linf_exact);
        assert!((linf - linf_exact).abs() < 5e-3 * linf_exact, "{linf} vs {linf_exact}");
        let l2_exact = p.u0_l2_exact();
        assert!(
            (l2 - l2_exact).abs() < 1e-4 * l2_exact,
            "sampled {l2} vs exact {l2_exact}"
        );
    }

    #[test]
    fn l2_closed_form_against_quadrature_oracle() {
        // independent oracle: Simpson quadrature of u0^2, split at the
        // kinks so each panel sees a smooth integrand
        let p = params(10.0, 0.01);
        let f = |x: f64| p.u0(x) * p.u0(x);
        let q = p.q0;
        let val = (simpson(f, -60.0, -q, 1 << 18)
            + simpson(f, -q, q, 1 << 12)
            + simpson(f, q, 60.0, 1 << 18))
        .sqrt();
        let exact = p.u0_l2_exact();
        assert!(
            (val - exact).abs() < 1e-9 * exact,
            "oracle {val} vs closed form {exact}"
        );
        // and the headline number at (10, 0.01)
        assert!((exact - 0.19867224).abs() < 1e-7, "{exact}");
    }

    #[test]
    fn slope_energy_closed_forms_against_quadrature() {
        let p = params(10.0, 0.01);
        let inner = simpson(
            |x| {
                let s = p.u0_prime(x, None).unwrap();
                s * s
            },
            -0.01 + 1e-13,
            0.01 - 1e-13,
            1 << 14,
        );
        let exact = p.slope_energy_inner();
        assert!(
            (inner - exact).abs() < 1e-8 * exact,
            "oracle {inner} vs closed {exact}"
        );
        // A0 at the reference point: ~ 7.8419, i.e. about 8 p0^2 q0
        assert!((exact - 7.84185).abs() < 1e-4, "{exact}");
        let ratio = exact / (p.p0 * p.p0 * p.q0);
        assert!(ratio > 4.0 && ratio < 16.0, "A0 / (p0^2 q0) = {ratio}");

        let tail = simpson(
            |x| {
                let s = p.u0_prime(x, None).unwrap();
                s * s
            },
            0.01 + 1e-13,
            60.0,
            1 << 18,
        );
        let total = p.slope_energy_total();
        assert!(
            (exact + 2.0 * tail - total).abs() < 1e-7 * total,
            "total {} vs closed {total}",
            exact + 2.0 * tail
        );
    }

    #[test]
    fn exact_ft_norm_reduces_to_l2_at_sigma_zero() {
        // Parseval: sigma = 0 must reproduce the closed-form L2 norm
        let p = params(10.0, 0.01);
        let via_ft = p.hs_norm_exact_ft(0.0).unwrap();
        let exact = p.u0_l2_exact();
        assert!(
            (via_ft - exact).abs() < 1e-5 * exact,
            "ft route {via_ft} vs closed {exact}"
        );
    }

    #[test]
    fn exact_ft_norm_reduces_to_h1_closed_form() {
        // ||u0||_{H^1}^2 = ||u0||_2^2 + ||u0'||_2^2, both in closed form
        let p = params(10.0, 0.01);
        let via_ft = p.hs_norm_exact_ft(1.0).unwrap();
        let exact = (p.u0_l2_exact().powi(2) + p.slope_energy_total()).sqrt();
        assert!(
            (via_ft - exact).abs() < 1e-5 * exact,
            "ft route {via_ft} vs closed {exact}"
        );
    }

    #[test]
    fn bracket_scaling_in_q0() {
        let sigma = 1.0;
        let a = params(1.0, 0.08);
        let b = params(1.0, 0.04);
        let (la, ua) = a.hs_norm_bracket(sigma).unwrap();
        let (lb, ub) = b.hs_norm_bracket(sigma).unwrap();
        // halving q0 scales the bracket by 2^{-(3/2 - sigma)} = 2^{-1/2}
        let want = 0.5f64.powf(1.5 - sigma);
        assert!((lb / la - want).abs() < 1e-12);
        assert!((ub / ua - want).abs() < 1e-12);

        assert!(params(1.0, 0.1).hs_norm_bracket(1.6).is_err());
        assert!(params(1.0, 0.1).hs_norm_bracket(0.4).is_err());
    }

    #[test]
    fn exact_ft_ratio_is_stable_across_q0() {
        // the bracket's reason to exist: the ratio ||u0||_{H^s} / (p0 q0^{3/2-s})
        // must stay within the calibrated factor-2 window across a sweep
        let sigma = 1.2;
        for &q0 in &[0.02, 0.04, 0.08, 0.16] {
            let p = params(1.0, q0);
            let norm = p.hs_norm_exact_ft(sigma).unwrap();
            let (lo, hi) = p.hs_norm_bracket(sigma).unwrap();
            assert!(
                norm > lo && norm < hi,
                "q0 = {q0}: {norm} outside [{lo}, {hi}]"
            );
        }
    }
}
