//! Measurement probe for the acceptance-scale quantities; prints the raw
//! numbers the frozen test tolerances are based on.

use fw_core::characteristics::{peakon_pair_seeds, SlopeInit, Tracker};
use fw_core::envelope;
use fw_core::grid::{Field, Grid};
use fw_core::initial_data::{PeakonPairParams, Regime};
use fw_core::nonlocal::{NonlocalEngine, Strategy};
use fw_core::solver::{self, evolve_observed, SolverConfig};
use std::time::Instant;

fn peakon_probe(n: usize, horizon: f64) {
    let start = Instant::now();
    let g = Grid::new(40.0, n).unwrap();
    let e = NonlocalEngine::new(g, Strategy::FourierSymbol);
    let u0 = Field::sample(g, |x| solver::peakon(0.0, x)).unwrap();
    let mut cfg = SolverConfig::new(horizon, 40.0).unwrap();
    cfg.snapshot_stride = 0;
    let mut tracker = Tracker::new(
        &e,
        vec![fw_core::characteristics::Seed {
            label: "crest".into(),
            x0: 0.0,
            kind: fw_core::characteristics::SeedKind::Interior,
        }],
        &u0,
        SlopeInit::FromField,
        40.0,
    )
    .unwrap();
    let traj = evolve_observed(&e, &u0, &cfg, &mut tracker).unwrap();
    let b = tracker.into_bundle();
    let t = *traj.times.last().unwrap();
    let u = traj.snapshots.last().unwrap();
    let exact = Field::sample(g, |x| solver::peakon(t, x)).unwrap();
    let err = u
        .zip_with(&exact, |a, b| a - b)
        .unwrap()
        .lp_norm(2.0)
        .unwrap()
        / exact.lp_norm(2.0).unwrap();

    // crest position by parabolic fit around the argmax
    let crest = |f: &Field| -> f64 {
        let v = f.values();
        let (j, _) = v
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap();
        let (a, b_, c) = (v[j - 1], v[j], v[j + 1]);
        let dx = 0.5 * (a - c) / (a - 2.0 * b_ + c);
        f.grid().point(j) + dx * f.grid().spacing()
    };
    let crest_speed = crest(u) / t;
    let char_speed = b.positions.last().unwrap()[0] / t;
    println!(
        "peakon N=2^{} t={t:.2}: shape_err={err:.5} crest_speed={crest_speed:.6} (err {:.4}%) char_speed={char_speed:.6} (err {:.4}%) wall={:?}",
        n.trailing_zeros(),
        (crest_speed / (4.0 / 3.0) - 1.0) * 100.0,
        (char_speed / (4.0 / 3.0) - 1.0) * 100.0,
        start.elapsed()
    );
}

fn pair_probe(n: usize, thr_mult: f64, stride: usize) {
    let start = Instant::now();
    let p = PeakonPairParams::new(10.0, 0.01, Regime::new(1.2, 2.0, 2.0), 0.5).unwrap();
    let (t_min, t_max) = envelope::lifespan_bracket(&p);
    let g = Grid::new(40.0, n).unwrap();
    let e = NonlocalEngine::new(g, Strategy::FourierSymbol);
    let u0 = Field::sample(g, |x| p.u0(x)).unwrap();
    let threshold = thr_mult * p.p0;
    let mut cfg = SolverConfig::new(1.1 * t_max, threshold).unwrap();
    cfg.snapshot_stride = stride;
    cfg.event_times = vec![0.9 * t_min];
    let mut tracker = Tracker::new(
        &e,
        peakon_pair_seeds(p.q0),
        &u0,
        SlopeInit::ClosedForm(&p),
        threshold,
    )
    .unwrap();
    let traj = evolve_observed(&e, &u0, &cfg, &mut tracker).unwrap();
    let b = tracker.into_bundle();

    let bt = traj.breakdown_time;
    let e1_0 = traj.diagnostics[0].e1;
    let e2_0 = traj.diagnostics[0].e2;
    let mut max_e2 = 0.0f64;
    let mut max_e1 = 0.0f64;
    for d in &traj.diagnostics {
        max_e2 = max_e2.max((d.e2 / e2_0 - 1.0).abs());
        max_e1 = max_e1.max((d.e1 - e1_0).abs());
    }
    let min_grid_slope = traj
        .diagnostics
        .iter()
        .map(|d| d.min_ux)
        .fold(f64::INFINITY, f64::min);
    println!(
        "pair N=2^{} thr={threshold}: breakdown={bt:?} bracket=[{:.6},{:.6}] in={:?} E2drift={max_e2:.3e} E1drift={max_e1:.3e} grid_min_ux={min_grid_slope:.1} steps={} wall={:?}",
        n.trailing_zeros(),
        0.9 * t_min,
        1.1 * t_max,
        bt.map(|t| t >= 0.9 * t_min && t <= 1.1 * t_max),
        traj.diagnostics.len() - 1,
        start.elapsed()
    );

    // envelope checks
    let sand = envelope::check_sandwich(&b, &p, 0.9 * t_min, 0.05);
    let ext = envelope::check_exterior(&b, &p, 0.95 * t_min, 0.10);
    println!(
        "  sandwich {}/{} = {:.4}  exterior {}/{} = {:.4}",
        sand.summary.pass,
        sand.summary.total,
        sand.summary.rate(),
        ext.pass,
        ext.total,
        ext.rate()
    );

    // A(t) vs lower bound at snapshot times <= 0.9 T_min
    let mut worst_margin = f64::INFINITY;
    let mut worst_t = 0.0;
    for &t in &traj.times {
        if t > 0.9 * t_min {
            break;
        }
        let a = envelope::energy_a(&traj, &b, t).unwrap();
        let lb = envelope::energy_lower_bound(&p, t);
        if lb > 0.0 {
            let m = a / lb;
            if m < worst_margin {
                worst_margin = m;
                worst_t = t;
            }
        }
    }
    println!("  A/LB worst margin {worst_margin:.4} at t={worst_t:.5} (need >= 0.9)");
    println!(
        "  M ratio {:.2} vs 1/q0 = {:.0}",
        envelope::m_ratio_at_t_min(&p),
        1.0 / p.q0
    );

    // certificate at T0 = 0.9 T_min
    let cert = envelope::inflation_certificate(&traj, &b, &p, 0.9 * t_min, 2.0).unwrap();
    println!(
        "  window L2 slope at T0: {:.4}  w1p: {:.4}  (sqrt(A(T0)) ref {:.4})",
        cert.window_slope_norm,
        cert.w1p_norm,
        envelope::energy_a(&traj, &b, 0.9 * t_min).unwrap().sqrt()
    );

    // channel agreement at the centermost seed up to 0.9 T_min
    let (jc, _) = b
        .seeds
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, s)| a.x0.abs().partial_cmp(&s.x0.abs()).unwrap())
        .unwrap();
    let mut worst_agree = 0.0f64;
    for (i, &t) in b.times.iter().enumerate() {
        if t > 0.9 * t_min {
            break;
        }
        let rel = (b.slopes_interp[i][jc] / b.slopes_ode[i][jc] - 1.0).abs();
        worst_agree = worst_agree.max(rel);
    }
    println!("  center-seed channel agreement worst {worst_agree:.4}");
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let what = args.get(1).map(|s| s.as_str()).unwrap_or("all");
    if what == "peakon" || what == "all" {
        peakon_probe(1 << 14, 3.0);
    }
    if what == "pair15" || what == "all" {
        pair_probe(1 << 15, 50.0, 1);
    }
    if what == "pair18" || what == "all" {
        pair_probe(1 << 18, 100.0, 4);
    }
}
