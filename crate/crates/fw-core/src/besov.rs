//! FFT-based Littlewood-Paley decomposition and the Besov / Sobolev /
//! W^{1,p} norms measured from it.
//!
//! The dyadic family is the telescoping one: a quintic smoothstep profile
//! theta(xi) with theta = 1 for |xi| <= 3/4 and theta = 0 for |xi| >= 4/3
//! defines the low block chi = theta and the annular bumps
//! phi_j(xi) = theta(2^{-j-1} xi) - theta(2^{-j} xi), supported in the
//! annulus (3/4 * 2^j, 8/3 * 2^j) with plateau [4/3 * 2^j, 3/2 * 2^j].
//! The wide octave-scale overlap keeps sum_j 2^{2js} phi_j(xi)^2 close to a
//! constant multiple of (1+xi^2)^s, which is what lets the block route and
//! the symbol route of the Sobolev norm track each other across inputs.
//! By construction chi + sum_j phi_j = 1 exactly on every resolved
//! frequency, so block sums reconstruct the input to roundoff.
//!
//! The norm is ||2^{js} ||block_j||_{L^p}||_{l^r} over j >= -1 (the low
//! block carries index -1 with weight 2^{-s}).

use crate::error::{CoreError, Result};
use crate::grid::{Field, Grid};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// Smoothstep cutoff: 1 for |t| <= lo, 0 for |t| >= hi, quintic in between.
fn smooth_cutoff(t: f64, lo: f64, hi: f64) -> f64 {
    let a = t.abs();
    if a <= lo {
        1.0
    } else if a >= hi {
        0.0
    } else {
        let u = (a - lo) / (hi - lo);
        1.0 - u * u * u * (10.0 - 15.0 * u + 6.0 * u * u)
    }
}

const THETA_LO: f64 = 3.0 / 4.0;
const THETA_HI: f64 = 4.0 / 3.0;

fn theta(xi: f64) -> f64 {
    smooth_cutoff(xi, THETA_LO, THETA_HI)
}

/// Dyadic partition of the discrete frequency axis for one grid.
pub struct DyadicPartition {
    grid: Grid,
    /// multiplier tables; index 0 is the low block (j = -1), then annuli j = 0..
    multipliers: Vec<Vec<f64>>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    xi: Vec<f64>,
    /// per-exponent Sobolev route calibration, computed on first use
    kappa_cache: std::sync::Mutex<Vec<(f64, f64)>>,
}

impl DyadicPartition {
    /// Build the standard nonhomogeneous family up to the Nyquist frequency.
    /// Errors if the grid resolves fewer than 3 annuli.
    pub fn new(grid: Grid) -> Result<Self> {
        let n = grid.len();
        let dxi = std::f64::consts::PI / grid.half_width();
        let xi: Vec<f64> = (0..n)
            .map(|k| {
                let kk = if k <= n / 2 { k as isize } else { k as isize - n as isize };
                kk as f64 * dxi
            })
            .collect();
        let xi_max = dxi * (n / 2) as f64;

        // annuli j = 0..=j_max; phi_j lives in (3/4 * 2^j, 8/3 * 2^j), so the
        // partition is exact on |xi| <= xi_max once 3/4 * 2^{j_max+1} >= xi_max.
        let j_max = (xi_max / THETA_LO).log2().ceil() as i32 - 1;
        if j_max < 2 {
            return Err(CoreError::Grid(format!(
                "grid resolves only {} dyadic annuli; need at least 3",
                (j_max + 1).max(0)
            )));
        }

        let mut multipliers = Vec::with_capacity(j_max as usize + 2);
        multipliers.push(xi.iter().map(|&x| theta(x)).collect());
        for j in 0..=j_max {
            let scale = (2.0f64).powi(j);
            multipliers.push(
                xi.iter()
                    .map(|&x| theta(x / (2.0 * scale)) - theta(x / scale))
                    .collect(),
            );
        }

        let mut planner = FftPlanner::new();
        Ok(Self {
            grid,
            multipliers,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
            xi,
            kappa_cache: std::sync::Mutex::new(Vec::new()),
        })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    /// Number of blocks including the low one.
    pub fn block_count(&self) -> usize {
        self.multipliers.len()
    }

    /// Dyadic index of block `i` (the low block is -1).
    pub fn block_index(&self, i: usize) -> i32 {
        i as i32 - 1
    }

    /// Worst deviation of chi + sum phi_j from 1 over the frequency axis.
    pub fn partition_residual(&self) -> f64 {
        let n = self.grid.len();
        (0..n).fold(0.0f64, |worst, k| {
            let s: f64 = self.multipliers.iter().map(|m| m[k]).sum();
            worst.max((s - 1.0).abs())
        })
    }

    fn spectrum(&self, f: &Field) -> Result<Vec<Complex<f64>>> {
        if f.grid() != self.grid {
            return Err(CoreError::GridMismatch);
        }
        let mut buf: Vec<Complex<f64>> =
            f.values().iter().map(|&v| Complex::new(v, 0.0)).collect();
        self.fwd.process(&mut buf);
        Ok(buf)
    }

    fn block_from_spectrum(&self, hat: &[Complex<f64>], block: usize) -> Field {
        let n = self.grid.len();
        let m = &self.multipliers[block];
        let mut buf: Vec<Complex<f64>> = hat.iter().zip(m).map(|(&c, &w)| c * w).collect();
        self.inv.process(&mut buf);
        let scale = 1.0 / n as f64;
        Field::new(self.grid, buf.iter().map(|c| c.re * scale).collect())
            .expect("block of a finite field is finite")
    }

    /// Littlewood-Paley block i of f (i = 0 is the low block).
    pub fn block(&self, f: &Field, i: usize) -> Result<Field> {
        let hat = self.spectrum(f)?;
        Ok(self.block_from_spectrum(&hat, i))
    }

    /// All blocks of f; summing them reconstructs f to roundoff.
    pub fn blocks(&self, f: &Field) -> Result<Vec<Field>> {
        let hat = self.spectrum(f)?;
        Ok((0..self.block_count())
            .map(|i| self.block_from_spectrum(&hat, i))
            .collect())
    }

    /// Besov norm ||2^{js} || block_j ||_{L^p} ||_{l^r (j >= -1)}.
    pub fn besov_norm(&self, f: &Field, s: f64, p: f64, r: f64) -> Result<f64> {
        if p.is_nan() || p < 1.0 || r.is_nan() || r < 1.0 {
            return Err(CoreError::Param(format!(
                "Besov norm needs p, r >= 1, got p = {p}, r = {r}"
            )));
        }
        let hat = self.spectrum(f)?;
        let terms: Vec<f64> = (0..self.block_count())
            .map(|i| {
                let j = self.block_index(i);
                let lp = self
                    .block_from_spectrum(&hat, i)
                    .lp_norm(p)
                    .expect("p validated");
                (2.0f64).powi(j).powf(s) * lp
            })
            .collect();
        Ok(if r.is_infinite() {
            terms.iter().fold(0.0, |m, &t| m.max(t))
        } else {
            terms
                .iter()
                .map(|t| t.powf(r))
                .sum::<f64>()
                .powf(1.0 / r)
        })
    }

    /// H^s norm via the direct Fourier symbol,
    /// (1/2pi) int (1 + xi^2)^s |u_hat|^2 dxi on the discrete spectrum.
    pub fn sobolev_norm_symbol(&self, f: &Field, s: f64) -> Result<f64> {
        let hat = self.spectrum(f)?;
        let h = self.grid.spacing();
        let dxi = std::f64::consts::PI / self.grid.half_width();
        let sum: f64 = hat
            .iter()
            .zip(&self.xi)
            .map(|(c, &xi)| (1.0 + xi * xi).powf(s) * (c.norm_sqr() * h * h))
            .sum();
        Ok((sum * dxi / (2.0 * std::f64::consts::PI)).sqrt())
    }

    /// H^s norm through the Besov route (p = r = 2), rescaled by a constant
    /// calibrated once per exponent against the symbol route on the
    /// reference datum (p0, q0) = (1, 0.1).  The calibration absorbs the
    /// annulus-placement factor the raw 2^{js} weights carry relative to
    /// (1 + xi^2)^{s/2}; it is stable across the whole peaked-data family
    /// (a few percent over q0 in [0.01, 0.16]) but drifts for functions
    /// whose spectrum sits entirely below the first annulus.
    pub fn sobolev_norm(&self, f: &Field, s: f64) -> Result<f64> {
        let raw = self.besov_norm(f, s, 2.0, 2.0)?;
        Ok(raw * self.sobolev_calibration(s)?)
    }

    fn sobolev_calibration(&self, s: f64) -> Result<f64> {
        {
            let cache = self.kappa_cache.lock().unwrap();
            if let Some(&(_, k)) = cache.iter().find(|(ss, _)| *ss == s) {
                return Ok(k);
            }
        }
        let reference = Field::sample(self.grid, |x: f64| {
            (-(x + 0.1).abs()).exp() - (-(x - 0.1).abs()).exp()
        })?;
        let via_symbol = self.sobolev_norm_symbol(&reference, s)?;
        let via_blocks = self.besov_norm(&reference, s, 2.0, 2.0)?;
        let k = via_symbol / via_blocks;
        self.kappa_cache.lock().unwrap().push((s, k));
        Ok(k)
    }
}

/// W^{1,p} norm from a field and its discrete derivative snapshot:
/// ||f||_{L^p} + ||f_x||_{L^p}.
pub fn w1p_norm(f: &Field, f_x: &Field, p: f64) -> Result<f64> {
    if f.grid() != f_x.grid() {
        return Err(CoreError::GridMismatch);
    }
    Ok(f.lp_norm(p)? + f_x.lp_norm(p)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::initial_data::{PeakonPairParams, Regime};

    fn grid() -> Grid {
        Grid::new(40.0, 1 << 14).unwrap()
    }

    #[test]
    fn partition_of_unity_is_exact() {
        let part = DyadicPartition::new(grid()).unwrap();
        assert!(part.block_count() >= 4);
        let res = part.partition_residual();
        assert!(res <= 1e-12, "partition residual {res}");
    }

    #[test]
    fn too_coarse_grid_is_rejected() {
        // L = 40, N = 16: Nyquist at 0.628, no annuli fit
        assert!(DyadicPartition::new(Grid::new(40.0, 16).unwrap()).is_err());
    }

    #[test]
    fn blocks_reconstruct_the_input() {
        let part = DyadicPartition::new(grid()).unwrap();
        let f = Field::sample(grid(), |x| {
            (0.8 * x).sin() * (-x * x / 50.0).exp() + 0.3 * (7.3 * x).cos()
        })
        .unwrap();
        let blocks = part.blocks(&f).unwrap();
        let mut sum = Field::zeros(grid());
        for b in &blocks {
            sum = sum.zip_with(b, |a, c| a + c).unwrap();
        }
        let err = sum
            .zip_with(&f, |a, b| a - b)
            .unwrap()
            .lp_norm(f64::INFINITY)
            .unwrap();
        let scale = f.lp_norm(f64::INFINITY).unwrap();
        assert!(err <= 1e-10 * scale, "reconstruction error {err:.3e}");
    }

    #[test]
    fn pure_mode_lands_in_its_block() {
        let g = grid();
        let part = DyadicPartition::new(g).unwrap();
        // place the mode on the plateau of annulus j = 3: |xi| in [4/3, 3/2] * 2^j
        let j = 3usize;
        let target = 1.4 * (2.0f64).powi(j as i32);
        let dxi = std::f64::consts::PI / g.half_width();
        let k = (target / dxi).round();
        let xi = k * dxi;
        let f = Field::sample(g, |x| (xi * x).cos()).unwrap();

        let blocks = part.blocks(&f).unwrap();
        let own = blocks[j + 1]
            .zip_with(&f, |a, b| a - b)
            .unwrap()
            .lp_norm(f64::INFINITY)
            .unwrap();
        assert!(own < 1e-10, "block j = {j} must hold the whole mode, err {own}");

        // Besov value within 20 percent of 2^{js} * ||mode||_{L^p}
        for &(s, p, r) in &[(1.0, 2.0, 2.0), (0.5, 4.0, 1.0)] {
            let norm = part.besov_norm(&f, s, p, r).unwrap();
            let want = (2.0f64).powi(j as i32).powf(s) * f.lp_norm(p).unwrap();
            assert!(
                (norm / want - 1.0).abs() < 0.2,
                "(s,p,r)=({s},{p},{r}): {norm} vs {want}"
            );
        }
    }

    #[test]
    fn besov_norm_is_homogeneous_and_monotone_in_s() {
        let part = DyadicPartition::new(grid()).unwrap();
        let f = Field::sample(grid(), |x| (1.3 * x).sin() * (-x * x / 30.0).exp()).unwrap();
        let base = part.besov_norm(&f, 1.0, 2.0, 2.0).unwrap();
        for &c in &[-2.0, 0.25, 10.0] {
            let scaled = part
                .besov_norm(&f.map(|v| c * v).unwrap(), 1.0, 2.0, 2.0)
                .unwrap();
            assert!((scaled - c.abs() * base).abs() <= 1e-12 * scaled.abs());
        }

        // monotonicity in s holds for content in the j >= 0 annuli (the
        // low block carries weight 2^{-s}, so purely low-frequency inputs
        // are legitimately non-monotone)
        let annular =
            Field::sample(grid(), |x| (2.8 * x).cos() + 0.5 * (11.2 * x).cos()).unwrap();
        let mut prev = 0.0;
        for i in 0..=10 {
            let s = 0.25 * i as f64;
            let n = part.besov_norm(&annular, s, 2.0, 2.0).unwrap();
            assert!(n >= prev * (1.0 - 1e-12), "s = {s}: {n} < {prev}");
            prev = n;
        }

        assert!(part.besov_norm(&f, 1.0, 0.5, 2.0).is_err());
    }

    #[test]
    fn sobolev_routes_agree_within_15_percent() {
        // the two routes must track each other across the data the
        // instrument actually measures: the peaked family over a decade of
        // q0 (the calibration point is q0 = 0.1), plus a narrow bump with
        // comparable bandwidth; functions with purely low-frequency content
        // drift further because the low block pays 2^{-s} instead of ~1
        let part = DyadicPartition::new(grid()).unwrap();
        let narrow =
            Field::sample(grid(), |x| 0.7 * (-(x - 1.0) * (x - 1.0) * 8.0).exp()).unwrap();
        for &s in &[0.8, 1.0, 1.2] {
            for &q0 in &[0.01, 0.02, 0.04, 0.08, 0.16] {
                let p = PeakonPairParams::new(1.0, q0, Regime::new(1.2, 2.0, 2.0), 0.5)
                    .unwrap();
                let u0 = Field::sample(grid(), |x| p.u0(x)).unwrap();
                let a = part.sobolev_norm(&u0, s).unwrap();
                let b = part.sobolev_norm_symbol(&u0, s).unwrap();
                assert!(
                    (a / b - 1.0).abs() < 0.15,
                    "u0 q0 = {q0}, s = {s}: block route {a} vs symbol route {b}"
                );
            }
            let a = part.sobolev_norm(&narrow, s).unwrap();
            let b = part.sobolev_norm_symbol(&narrow, s).unwrap();
            assert!(
                (a / b - 1.0).abs() < 0.15,
                "narrow bump, s = {s}: block route {a} vs symbol route {b}"
            );
        }
    }

    #[test]
    fn sobolev_symbol_route_matches_exact_ft_for_u0() {
        // grid measurement vs the closed-form Fourier-transform quadrature,
        // both restricted to the grid's frequency band; the full-band norm
        // exceeds the banded one by the Nyquist tail the grid cannot see
        let p = PeakonPairParams::new(1.0, 0.1, Regime::new(1.2, 2.0, 2.0), 0.5).unwrap();
        let g = grid();
        let part = DyadicPartition::new(g).unwrap();
        let u0 = Field::sample(g, |x| p.u0(x)).unwrap();
        let xi_max = std::f64::consts::PI / g.spacing();
        for &s in &[0.8, 1.0, 1.2] {
            let on_grid = part.sobolev_norm_symbol(&u0, s).unwrap();
            let banded = p.hs_norm_exact_ft_banded(s, xi_max).unwrap();
            assert!(
                (on_grid / banded - 1.0).abs() < 0.01,
                "s = {s}: grid {on_grid} vs banded exact {banded}"
            );
            let full = p.hs_norm_exact_ft(s).unwrap();
            assert!(full >= banded, "tail must only add norm");
            assert!(
                (full / banded - 1.0).abs() < 0.05,
                "s = {s}: unexpectedly large Nyquist tail {} vs {}",
                full,
                banded
            );
        }
    }

    #[test]
    fn u0_norm_falls_in_calibrated_bracket() {
        let part = DyadicPartition::new(grid()).unwrap();
        let p = PeakonPairParams::new(1.0, 0.1, Regime::new(1.2, 2.0, 2.0), 0.5).unwrap();
        let u0 = Field::sample(grid(), |x| p.u0(x)).unwrap();
        let norm = part.sobolev_norm(&u0, 1.0).unwrap();
        let (lo, hi) = p.hs_norm_bracket(1.0).unwrap();
        assert!(norm > lo && norm < hi, "{norm} outside [{lo}, {hi}]");
    }

    #[test]
    fn lemma_scaling_exponent_recovery() {
        // slope of log ||u0||_{H^sigma} vs log q0 must be 3/2 - sigma within
        // 5 percent, measured through the symbol route (the clean discrete
        // H^sigma).  The scaling law carries O(q0^{2 sigma - 1}) finite-q0
        // corrections, so the fit runs over small q0 where those are <= 4%
        // (at q0 up to 0.16 the true slope is off by 10% at sigma = 0.8).
        let g = Grid::new(40.0, 1 << 18).unwrap();
        let part = DyadicPartition::new(g).unwrap();
        for &sigma in &[0.8, 1.0, 1.2] {
            let mut pts = Vec::new();
            for &q0 in &[0.005f64, 0.01, 0.02, 0.04] {
                let p =
                    PeakonPairParams::new(1.0, q0, Regime::new(1.2, 2.0, 2.0), 0.5).unwrap();
                let u0 = Field::sample(g, |x| p.u0(x)).unwrap();
                let n = part.sobolev_norm_symbol(&u0, sigma).unwrap();
                pts.push((q0.ln(), n.ln()));
            }
            let slope = least_squares_slope(&pts);
            let want = 1.5 - sigma;
            assert!(
                (slope / want - 1.0).abs() < 0.05,
                "sigma = {sigma}: slope {slope} vs {want}"
            );
        }
    }

    fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        (n * sxy - sx * sy) / (n * sxx - sx * sx)
    }

    #[test]
    fn w1p_of_u0_matches_closed_form_at_coupled_resolution() {
        // the kink cells carry a visible share of the derivative mass, so
        // this check runs at the resolution that puts ~64 cells across the
        // inner window
        let p = PeakonPairParams::new(10.0, 0.01, Regime::new(1.2, 2.0, 2.0), 0.5).unwrap();
        let g = Grid::new(40.0, 1 << 18).unwrap();
        let u0 = Field::sample(g, |x| p.u0(x)).unwrap();
        let w = u0.central_derivative();
        let got = w1p_norm(&u0, &w, 2.0).unwrap();
        let want = p.u0_l2_exact() + p.slope_energy_total().sqrt();
        assert!(
            (got / want - 1.0).abs() < 0.05,
            "measured {got} vs closed form {want}"
        );

        assert_eq!(
            w1p_norm(&Field::zeros(g), &Field::zeros(g), 2.0).unwrap(),
            0.0
        );
    }
}
