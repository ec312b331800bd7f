//! Characteristic flow tracking alongside the solver.
//!
//! The flow map obeys d/dt psi(t, x0) = (3/2) u(t, psi(t, x0)), advanced in
//! lockstep with the solver's SSP-RK3 stages.  Along each characteristic the
//! bundle records two independent slope channels:
//!
//! * `slope_interp`: the discrete derivative field interpolated at psi,
//! * `slope_ode`: direct integration of
//!       d/dt (u_x o psi) = -(3/2) (u_x o psi)^2 + W o psi,
//!   W = u - (1-dxx)^{-1} u, which does not saturate when the grid can no
//!   longer represent the steepening slope (the interpolated channel caps
//!   near jump/(2h)).
//!
//! Breakdown detection therefore watches the ODE channel as well as the
//! grid minimum; the Riccati blowup is what the lifespan bracket is about.

use crate::error::{CoreError, Result};
use crate::grid::Field;
use crate::initial_data::PeakonPairParams;
use crate::nonlocal::NonlocalEngine;
use crate::solver::{Stages, StepObserver};
use std::io::Write;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedKind {
    Interior,
    /// Interior seed standing in for the one-sided limit at +-q0; the pair
    /// of these spans the moving window (psi(t,-q0), psi(t,q0)).
    KinkProxy,
    Exterior,
}

#[derive(Debug, Clone)]
pub struct Seed {
    pub label: String,
    pub x0: f64,
    pub kind: SeedKind,
}

/// Seed layout for the peakon-antipeakon runs: 64 interior seeds
/// cell-centered in (-q0, q0), the two kink proxies at -+q0 (1 - 1e-3),
/// and 16 exterior seeds per side cell-centered in (q0, 8 q0).
pub fn peakon_pair_seeds(q0: f64) -> Vec<Seed> {
    let mut seeds = Vec::new();
    seeds.push(Seed {
        label: "kink-".into(),
        x0: -q0 * (1.0 - 1e-3),
        kind: SeedKind::KinkProxy,
    });
    for i in 0..64 {
        let x0 = -q0 + (i as f64 + 0.5) * 2.0 * q0 / 64.0;
        seeds.push(Seed {
            label: format!("int{i:02}"),
            x0,
            kind: SeedKind::Interior,
        });
    }
    seeds.push(Seed {
        label: "kink+".into(),
        x0: q0 * (1.0 - 1e-3),
        kind: SeedKind::KinkProxy,
    });
    for i in 0..16 {
        let off = (i as f64 + 0.5) * 7.0 * q0 / 16.0;
        seeds.push(Seed {
            label: format!("extL{i:02}"),
            x0: -q0 - off,
            kind: SeedKind::Exterior,
        });
        seeds.push(Seed {
            label: format!("extR{i:02}"),
            x0: q0 + off,
            kind: SeedKind::Exterior,
        });
    }
    seeds.sort_by(|a, b| a.x0.partial_cmp(&b.x0).unwrap());
    seeds
}

/// How the t = 0 slope of each seed is obtained.
pub enum SlopeInit<'a> {
    /// Closed-form derivative of the peakon-antipeakon datum; kink
    /// artifacts from interpolating across the corners never enter.
    ClosedForm(&'a PeakonPairParams),
    /// Interpolate the discrete derivative of the initial field.
    FromField,
}

/// Time-indexed samples along every characteristic.
#[derive(Debug, Clone)]
pub struct CharacteristicBundle {
    pub seeds: Vec<Seed>,
    pub times: Vec<f64>,
    /// positions[i][s] = psi(times[i], x0_s)
    pub positions: Vec<Vec<f64>>,
    pub slopes_ode: Vec<Vec<f64>>,
    pub slopes_interp: Vec<Vec<f64>>,
    /// samples of the slope forcing W = u - (1-dxx)^{-1} u along psi
    pub v_values: Vec<Vec<f64>>,
    pub u_values: Vec<Vec<f64>>,
    /// residual of u(t, psi) = u0(x0) + int_0^t source(tau, psi) dtau,
    /// with source the evolution's nonlocal term
    pub integral_residuals: Vec<Vec<f64>>,
}

impl CharacteristicBundle {
    pub fn seed_index(&self, label: &str) -> Option<usize> {
        self.seeds.iter().position(|s| s.label == label)
    }

    /// Row index of the stored time nearest to t.
    pub fn time_index(&self, t: f64) -> usize {
        self.times
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| (**a - t).abs().partial_cmp(&(**b - t).abs()).unwrap())
            .map(|(i, _)| i)
            .unwrap_or(0)
    }

    /// Window endpoints (psi(t, -q0), psi(t, q0)) from the kink proxies.
    pub fn window_at(&self, i: usize) -> Result<(f64, f64)> {
        let l = self
            .seed_index("kink-")
            .ok_or_else(|| CoreError::Param("bundle has no kink- seed".into()))?;
        let r = self
            .seed_index("kink+")
            .ok_or_else(|| CoreError::Param("bundle has no kink+ seed".into()))?;
        Ok((self.positions[i][l], self.positions[i][r]))
    }

    /// Monotone inverse of the seed map at stored time index i: given a
    /// position z between two seed positions, linearly interpolate x0.
    pub fn inverse_position(&self, i: usize, z: f64) -> Option<f64> {
        let pos = &self.positions[i];
        if pos.is_empty() || z < pos[0] || z > *pos.last().unwrap() {
            return None;
        }
        let k = pos.partition_point(|&p| p <= z).min(pos.len() - 1).max(1);
        let (pa, pb) = (pos[k - 1], pos[k]);
        let (xa, xb) = (self.seeds[k - 1].x0, self.seeds[k].x0);
        if pb == pa {
            return Some(xa);
        }
        Some(xa + (z - pa) / (pb - pa) * (xb - xa))
    }

    /// characteristics.csv: (t, seed_label, psi, slope_interp, slope_ode, v_value)
    pub fn write_csv(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "t,seed_label,psi,slope_interp,slope_ode,v_value")?;
        for (i, t) in self.times.iter().enumerate() {
            for (s, seed) in self.seeds.iter().enumerate() {
                writeln!(
                    w,
                    "{t},{},{},{},{},{}",
                    seed.label,
                    self.positions[i][s],
                    self.slopes_interp[i][s],
                    self.slopes_ode[i][s],
                    self.v_values[i][s]
                )?;
            }
        }
        Ok(())
    }
}

/// Lockstep tracker; implements [`StepObserver`] so `evolve_observed` can
/// drive it.
pub struct Tracker<'a> {
    engine: &'a NonlocalEngine,
    threshold: f64,
    bundle: CharacteristicBundle,
    // working state
    psi: Vec<f64>,
    slope: Vec<f64>,
    src_accum: Vec<f64>,
    prev_src: Vec<f64>,
    u0_at_seed: Vec<f64>,
    crossed: Option<(f64, f64)>,
}

impl<'a> Tracker<'a> {
    pub fn new(
        engine: &'a NonlocalEngine,
        seeds: Vec<Seed>,
        u0: &Field,
        slope_init: SlopeInit,
        threshold: f64,
    ) -> Result<Self> {
        let psi: Vec<f64> = seeds.iter().map(|s| s.x0).collect();
        let ux0 = u0.central_derivative();
        let slope: Vec<f64> = match slope_init {
            SlopeInit::ClosedForm(p) => seeds
                .iter()
                .map(|s| p.u0_prime(s.x0, None))
                .collect::<Result<_>>()?,
            SlopeInit::FromField => psi
                .iter()
                .map(|&x| ux0.interpolate(x))
                .collect::<Result<_>>()?,
        };
        let slopes_interp: Vec<f64> = psi
            .iter()
            .map(|&x| ux0.interpolate(x))
            .collect::<Result<_>>()?;
        let v0 = crate::solver::slope_forcing(engine, u0)?;
        let v_values: Vec<f64> = psi
            .iter()
            .map(|&x| v0.interpolate(x))
            .collect::<Result<_>>()?;
        let src0 = crate::solver::evolution_source(engine, u0)?;
        let prev_src: Vec<f64> = psi
            .iter()
            .map(|&x| src0.interpolate(x))
            .collect::<Result<_>>()?;
        let u0_at_seed: Vec<f64> = psi
            .iter()
            .map(|&x| u0.interpolate(x))
            .collect::<Result<_>>()?;

        let n = seeds.len();
        let bundle = CharacteristicBundle {
            seeds,
            times: vec![0.0],
            positions: vec![psi.clone()],
            slopes_ode: vec![slope.clone()],
            slopes_interp: vec![slopes_interp],
            v_values: vec![v_values],
            u_values: vec![u0_at_seed.clone()],
            integral_residuals: vec![vec![0.0; n]],
        };

        Ok(Self {
            engine,
            threshold,
            bundle,
            psi,
            slope,
            src_accum: vec![0.0; n],
            prev_src,
            u0_at_seed,
            crossed: None,
        })
    }

    pub fn into_bundle(self) -> CharacteristicBundle {
        self.bundle
    }

    pub fn bundle(&self) -> &CharacteristicBundle {
        &self.bundle
    }

    fn guard(&self, x: f64) -> Result<f64> {
        let g = self.engine.grid();
        let (lo, hi) = (
            -g.half_width() + 2.0 * g.spacing(),
            g.half_width() - 2.0 * g.spacing(),
        );
        if x < lo || x > hi {
            return Err(CoreError::OutOfRange { x, lo, hi });
        }
        Ok(x)
    }

    /// Riccati-dominated slope ODE over one solver step with the forcing V
    /// frozen per seed; substeps keep the relative change per RK4 stage
    /// small, and threshold crossings are located by interpolating 1/S,
    /// which the dominant term makes linear in time.
    fn advance_slope(&mut self, s0: f64, v: f64, dt: f64, t0: f64) -> (f64, Option<f64>) {
        let rhs = |s: f64| -1.5 * s * s + v;
        let mut s = s0;
        let mut tau = 0.0;
        let mut crossing = None;
        while tau < dt {
            let scale = (1.5 * s.abs()).max((v.abs() * 1.5).sqrt()).max(1e-9);
            let mut h = (0.05 / scale).min(dt - tau);
            if h <= 0.0 {
                break;
            }
            // avoid a microscopic last substep
            if dt - tau - h < 1e-3 * h {
                h = dt - tau;
            }
            let k1 = rhs(s);
            let k2 = rhs(s + 0.5 * h * k1);
            let k3 = rhs(s + 0.5 * h * k2);
            let k4 = rhs(s + h * k3);
            let s_next = s + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            if crossing.is_none() && s > -self.threshold && s_next <= -self.threshold {
                // 1/S is nearly affine in t under the Riccati term
                let (inv0, inv1) = (1.0 / s, 1.0 / s_next);
                let target = -1.0 / self.threshold;
                let lambda = (inv1 - inv0) / h;
                let frac = if lambda.abs() > 0.0 {
                    ((target - inv0) / lambda / h).clamp(0.0, 1.0)
                } else {
                    1.0
                };
                crossing = Some(t0 + tau + frac * h);
            }
            s = if s_next.is_finite() { s_next } else { -1e300 };
            tau += h;
            if s <= -1e12 {
                // deep past any threshold; the run is stopping this step
                break;
            }
        }
        (s, crossing)
    }
}

impl<'a> StepObserver for Tracker<'a> {
    fn on_step(
        &mut self,
        t: f64,
        dt: f64,
        u: &Field,
        stages: &Stages,
        u_x_next: &Field,
    ) -> Result<Option<(f64, f64)>> {
        let n = self.psi.len();

        // slope forcing at the pre-step state drives this step's ODE
        let v_field = crate::solver::slope_forcing(self.engine, u)?;
        let v_at: Vec<f64> = self
            .psi
            .iter()
            .map(|&x| v_field.interpolate(x))
            .collect::<Result<_>>()?;

        // flow map: SSP-RK3 through the same stage fields as the solver
        let mut psi1 = Vec::with_capacity(n);
        for &x in &self.psi {
            psi1.push(self.guard(x + dt * 1.5 * u.interpolate(x)?)?);
        }
        let mut psi2 = Vec::with_capacity(n);
        for (j, &x1) in psi1.iter().enumerate() {
            let k = 1.5 * stages.u1.interpolate(x1)?;
            psi2.push(self.guard(0.75 * self.psi[j] + 0.25 * (x1 + dt * k))?);
        }
        let mut psi_next = Vec::with_capacity(n);
        for (j, &x2) in psi2.iter().enumerate() {
            let k = 1.5 * stages.u2.interpolate(x2)?;
            psi_next.push(self.guard(self.psi[j] / 3.0 + 2.0 / 3.0 * (x2 + dt * k))?);
        }

        // slope ODE channel
        let mut first_crossing: Option<f64> = None;
        let mut crossing_slope = 0.0;
        for j in 0..n {
            let (s_next, crossing) = self.advance_slope(self.slope[j], v_at[j], dt, t);
            self.slope[j] = s_next;
            if let Some(tc) = crossing {
                if first_crossing.map_or(true, |best| tc < best) {
                    first_crossing = Some(tc);
                    crossing_slope = s_next;
                }
            }
        }

        // accumulated source integral along psi (trapezoid in time)
        let src_next_field = crate::solver::evolution_source(self.engine, &stages.next)?;
        for j in 0..n {
            let src_next = src_next_field.interpolate(psi_next[j])?;
            self.src_accum[j] += 0.5 * dt * (self.prev_src[j] + src_next);
            self.prev_src[j] = src_next;
        }

        // record the new row
        let t_next = t + dt;
        let v_next_field = crate::solver::slope_forcing(self.engine, &stages.next)?;
        let mut row_pos = Vec::with_capacity(n);
        let mut row_si = Vec::with_capacity(n);
        let mut row_so = Vec::with_capacity(n);
        let mut row_v = Vec::with_capacity(n);
        let mut row_u = Vec::with_capacity(n);
        let mut row_res = Vec::with_capacity(n);
        for j in 0..n {
            let x = psi_next[j];
            let uval = stages.next.interpolate(x)?;
            row_pos.push(x);
            row_si.push(u_x_next.interpolate(x)?);
            row_so.push(self.slope[j]);
            row_v.push(v_next_field.interpolate(x)?);
            row_u.push(uval);
            row_res.push(uval - self.u0_at_seed[j] - self.src_accum[j]);
        }
        self.psi = psi_next;
        self.bundle.times.push(t_next);
        self.bundle.positions.push(row_pos);
        self.bundle.slopes_interp.push(row_si);
        self.bundle.slopes_ode.push(row_so);
        self.bundle.v_values.push(row_v);
        self.bundle.u_values.push(row_u);
        self.bundle.integral_residuals.push(row_res);

        if let Some(tc) = first_crossing {
            if self.crossed.is_none() {
                self.crossed = Some((tc, crossing_slope));
            }
        }
        Ok(self.crossed)
    }
}
