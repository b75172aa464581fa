//! Acceptance suite: one PASS/FAIL line per criterion. Tolerances are pinned
//! below and never loosened to make a run pass.
//!
//! The report lines are the result. A FAIL line turns into a nonzero exit
//! only with `ACCEPTANCE_STRICT=1`, so a known open criterion does not mask
//! the unit and integration tests under `cargo test`.

use std::f64::consts::FRAC_PI_2;
use std::fs;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use bivlasov::cli::{cmd_run, snapshot_file_name, RunArgs, FRAMES_FILE};
use bivlasov::config::{bump_profile, parse_config, SimConfig};
use bivlasov::coupling::picard_solve;
use bivlasov::horizon::{compute_t1, compute_t2, solve_envelope, Horizon, InitialDataSummary};
use bivlasov::interp::Interpolation;
use bivlasov::kinetic::{
    push_characteristic, semi_lagrangian_step, CharacteristicState, DistributionGrid, FieldInterval,
    PhaseSpaceGrid, RawFields,
};
use bivlasov::run::{prepare, run};
use bivlasov::transform::{eigenvalues_raw, eigenvalues_theta, from_theta, to_theta, RawFieldPoint};

// criterion 1
const ROUND_TRIP_REL: f64 = 1e-12;
const EIGEN_TOL: f64 = 1e-12;
const TRANSFORM_SAMPLES: usize = 10_000;
// criterion 2
const WAVE_ERR: f64 = 5e-3;
const WAVE_RATIO: f64 = 3.5;
// criterion 3
const KINETIC_STEPS: usize = 200;
const L1_REL: f64 = 1e-4;
const MAX_OVERSHOOT: f64 = 1e-3;
const SPEED_ORDER: f64 = 3.5;
// criterion 4
const T1_REL: f64 = 1e-8;
const P_REL: f64 = 1e-8;
const T2_TOL: f64 = 1e-6;
// criterion 5
const ENVELOPE_SLACK: f64 = 1e-3;
// criterion 6
const CONTINUITY_ORDER: f64 = 1.8;
// criterion 7
const PICARD_T: f64 = 0.2;
const PICARD_RATIO: f64 = 0.7;
const PICARD_RUN: usize = 4;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn config(text: &str) -> SimConfig {
    parse_config(text).expect("acceptance configuration parses")
}

fn c1_transform() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_rt: f64 = 0.0;
    let mut worst_eig: f64 = 0.0;
    let mut hyperbolic = true;
    for _ in 0..TRANSFORM_SAMPLES {
        // magnitudes log-uniform over [1e-3, 1e3], either sign
        let mut draw = || {
            let m = 10f64.powf(rng.gen_range(-3.0..3.0));
            if rng.gen_bool(0.5) { m } else { -m }
        };
        let p = RawFieldPoint::new(draw(), draw(), draw());
        let t = to_theta(p).unwrap();
        let (d2, b) = from_theta(t.theta2, t.theta_b, p.d1).unwrap();
        worst_rt = worst_rt.max((d2 - p.d2).abs() / p.d2.abs()).max((b - p.b).abs() / p.b.abs());
        let (l1, l2) = eigenvalues_raw(p).unwrap();
        let (m1, m2) = eigenvalues_theta(t.theta2, t.theta_b);
        worst_eig = worst_eig.max((l1 - m1).abs()).max((l2 - m2).abs());
        let gap = 2.0 * t.theta2.cos() * t.theta_b.cos();
        hyperbolic &= l2 - l1 > 0.0 && gap > 0.0;
    }
    outcome(
        worst_rt <= ROUND_TRIP_REL && worst_eig <= EIGEN_TOL && hyperbolic,
        format!("round trip {worst_rt:.2e}, eigenvalues {worst_eig:.2e}, strictly hyperbolic {hyperbolic}"),
    )
}

/// L∞ error of the travelling invariant at the end of the run.
fn simple_wave_error(preset: &str, nx: usize) -> (f64, f64) {
    let c = config(&format!(r#"{{"preset": "{preset}", "grid": {{"nx": {nx}}}}}"#));
    let out = run(&c).unwrap();
    assert!(out.abort.is_none());
    let s = &out.last;
    let (moving, still) = if preset == "simple_wave" { (&s.inv.beta, &s.inv.alpha) } else { (&s.inv.alpha, &s.inv.beta) };
    let dir = if preset == "simple_wave" { 1.0 } else { -1.0 };
    let mut err: f64 = 0.0;
    for (i, x) in s.inv.axis.nodes().into_iter().enumerate() {
        let exact = 0.3 * bump_profile(x - dir * s.t, 3);
        err = err.max((moving[i] - exact).abs()).max(still[i].abs());
    }
    (err, s.t)
}

fn c2_simple_wave() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for preset in ["simple_wave", "simple_wave_mirror"] {
        let (e1, t1) = simple_wave_error(preset, 256);
        let (e2, t2) = simple_wave_error(preset, 511);
        let ok = e1 <= WAVE_ERR && e1 / e2 >= WAVE_RATIO && (t1 - 1.0).abs() < 1e-12 && (t2 - 1.0).abs() < 1e-12;
        pass &= ok;
        parts.push(format!("{preset}: err {e1:.2e} at nx=256, ratio {:.2}", e1 / e2));
    }
    outcome(pass, parts.join("; "))
}

struct KineticSetup {
    x_max: f64,
    nx: usize,
    nv: usize,
    v_max: f64,
    x_width: f64,
    v_center: f64,
    v_radius: f64,
    b: f64,
}

// free streaming is resolved in x only; the magnetic run needs the v resolution
const FREE_STREAMING: KineticSetup = KineticSetup { x_max: 4.0, nx: 385, nv: 16, v_max: 2.4, x_width: 0.8, v_center: 0.2, v_radius: 1.0, b: 0.0 };
const MAGNETIC: KineticSetup = KineticSetup { x_max: 4.0, nx: 97, nv: 48, v_max: 1.0, x_width: 2.0, v_center: 0.3, v_radius: 0.6, b: 0.5 };

fn kinetic_run(s: &KineticSetup) -> (f64, f64) {
    let g = PhaseSpaceGrid::new(-s.x_max, s.x_max, s.nx, s.v_max, s.nv, s.nv).unwrap();
    let f0 = DistributionGrid::from_fn(g, |x, v1, v2| {
        bump_profile(x / s.x_width, 6) * bump_profile((v1 - s.v_center).hypot(v2) / s.v_radius, 6)
    });
    let fields = RawFields { d1: vec![0.0; g.nx], d2: vec![0.0; g.nx], b: vec![s.b; g.nx] };
    let interval = FieldInterval::constant(g.x_axis(), Interpolation::Cubic, &fields);
    let (l1_0, sup0) = (f0.l1(), f0.sup());
    let mut f = f0;
    let (mut l1_dev, mut max_ratio): (f64, f64) = (0.0, 0.0);
    for _ in 0..KINETIC_STEPS {
        // edge guard only; anything at the edge is still counted in the norm
        f = semi_lagrangian_step(&f, &interval, 0.01, Interpolation::Cubic, 1e-4).unwrap();
        l1_dev = l1_dev.max((f.l1() - l1_0).abs() / l1_0);
        max_ratio = max_ratio.max(f.max() / sup0);
    }
    (l1_dev, max_ratio)
}

fn speed_error(dt: f64) -> f64 {
    let axis = bivlasov::interp::Axis::new(-10.0, 0.5, 41);
    let fields = RawFields { d1: vec![0.0; 41], d2: vec![0.0; 41], b: vec![2.0; 41] };
    let interval = FieldInterval::constant(axis, Interpolation::Cubic, &fields);
    let mut z = CharacteristicState { x: 0.0, v1: 1.5, v2: -0.7 };
    let v0 = z.v1.hypot(z.v2);
    let steps = (2.0 / dt).round() as usize;
    for _ in 0..steps {
        z = push_characteristic(z, dt, &interval);
    }
    (z.v1.hypot(z.v2) - v0).abs()
}

fn c3_kinetic() -> Outcome {
    let (fl, fm) = kinetic_run(&FREE_STREAMING);
    let (ml, mm) = kinetic_run(&MAGNETIC);
    let errs: Vec<f64> = [0.2, 0.1, 0.05].iter().map(|&dt| speed_error(dt)).collect();
    let orders: Vec<f64> = errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let conserve = fl <= L1_REL && ml <= L1_REL && fm <= 1.0 + MAX_OVERSHOOT && mm <= 1.0 + MAX_OVERSHOOT;
    let order_ok = orders.iter().all(|&o| o >= SPEED_ORDER);
    outcome(
        conserve && order_ok,
        format!(
            "free streaming L1 {fl:.2e} max {fm:.6}; magnetic L1 {ml:.2e} max {mm:.6}; |V| errors {:.2e} {:.2e} {:.2e} orders {:.2} {:.2}",
            errs[0], errs[1], errs[2], orders[0], orders[1]
        ),
    )
}

fn summary(theta0: f64, f_sup: f64, n_sup: f64, p0: f64) -> InitialDataSummary {
    InitialDataSummary { theta2_sup: theta0, theta_b_sup: 0.0, f_sup, f_l1: 0.0, n_sup, n_l1: 0.0, p0 }
}

fn c4_horizons() -> Outcome {
    let env = solve_envelope(&summary(0.5, 0.0, 0.1, 0.0), 1e3, 1e-3).unwrap();
    let t1 = compute_t1(&env).value().unwrap_or(f64::NAN);
    let t1_exact = (FRAC_PI_2 - 0.5) / 0.1;
    let t1_rel = (t1 - t1_exact).abs() / t1_exact;

    let env = solve_envelope(&summary(0.5, 0.0, 0.0, 1.0), 5.0, 1e-3).unwrap();
    let p_exact = 1.0 + 2.0 / 0.5f64.cos();
    let p_rel = (env.p_at(1.0) - p_exact).abs() / p_exact;

    let t2_exact = (1.0 / 0.5f64.tan() - 1.0) / (2.0 / 0.5f64.cos());
    let t2 = match compute_t2(&env) {
        Ok(Horizon::Finite(t)) => t,
        _ => f64::NAN,
    };
    let t2_err = (t2 - t2_exact).abs();
    outcome(
        t1_rel <= T1_REL && p_rel <= P_REL && t2_err <= T2_TOL,
        format!("T1 rel {t1_rel:.2e}; P(1) rel {p_rel:.2e}; T2 err {t2_err:.2e} (T2 = {t2:.9})"),
    )
}

fn c5_bounds() -> Outcome {
    let c = config(r#"{"preset": "small_coupled"}"#);
    let out = run(&c).unwrap();
    let failed: Vec<String> = out
        .frames
        .iter()
        .filter(|f| !f.ok_all)
        .map(|f| format!("step {}", f.step))
        .collect();
    let contained = out.frames.iter().all(|f| f.p_measured <= f.p_envelope + ENVELOPE_SLACK);
    let worst = out.frames.iter().map(|f| f.p_measured - f.p_envelope).fold(f64::NEG_INFINITY, f64::max);
    let reached = out.abort.is_none() && (out.last.t - out.plan.t_stop).abs() < 1e-12;
    outcome(
        failed.is_empty() && contained && reached,
        format!(
            "{} frames to t = {:.4} (certified end {:?}), failing frames {:?}, max P - P_env {worst:.3e}",
            out.frames.len(),
            out.last.t,
            out.plan.horizon.certified_end.value(),
            failed
        ),
    )
}

fn c6_continuity() -> Outcome {
    let gaps: Vec<f64> = [(64, 24), (128, 48), (256, 96)]
        .iter()
        .map(|(nx, nv)| {
            let c = config(&format!(r#"{{"preset": "small_coupled", "grid": {{"nx": {nx}, "nv1": {nv}, "nv2": {nv}}}}}"#));
            let out = run(&c).unwrap();
            assert!(out.abort.is_none());
            out.frames.iter().map(|f| f.d1_gap).fold(0.0, f64::max)
        })
        .collect();
    let orders: Vec<f64> = gaps.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    outcome(
        orders.iter().all(|&o| o >= CONTINUITY_ORDER),
        format!("D1 gaps {:.3e} {:.3e} {:.3e}, orders {:.2} {:.2}", gaps[0], gaps[1], gaps[2], orders[0], orders[1]),
    )
}

fn c7_picard() -> Outcome {
    let c = config(&format!(r#"{{"preset": "small_coupled", "time": {{"t_end": {PICARD_T}}}}}"#));
    let plan = prepare(&c).unwrap();
    let tol = c.solver.picard.tol;
    let steps = plan.steps;
    let pic = picard_solve(&plan.initial, &plan.params, PICARD_T, steps, tol, c.solver.picard.max_iter).unwrap();
    let direct = run(&c).unwrap();
    assert!(direct.abort.is_none());

    let it = &pic.trace.iterations;
    let series = |get: fn(&bivlasov::coupling::PicardIterate) -> f64| -> (usize, bool) {
        // consecutive ratios from iteration 2 on
        let v: Vec<f64> = it.iter().map(get).collect();
        let ratios: Vec<f64> = v.windows(2).skip(1).map(|w| w[1] / w[0]).collect();
        let good = ratios.iter().take_while(|&&r| r <= PICARD_RATIO).count();
        (good, ratios.iter().all(|&r| r < 1.0))
    };
    let (nf, mono_f) = series(|i| i.delta_f);
    let (nd, mono_d) = series(|i| i.delta_field);

    let (a, b) = (&pic.state.inv, &direct.last.inv);
    let gap = |x: &[f64], y: &[f64]| x.iter().zip(y).fold(0.0, |m: f64, (p, q)| m.max((p - q).abs()));
    let th_gap = gap(&a.theta2(), &b.theta2()).max(gap(&a.theta_b(), &b.theta_b()));
    let allowed = (5.0 * pic.dt * pic.dt).max(10.0 * tol);
    outcome(
        pic.trace.converged && mono_f && mono_d && nf >= PICARD_RUN && nd >= PICARD_RUN && th_gap <= allowed,
        format!(
            "{} iterations, ratios <= {PICARD_RATIO} for {nf} (f) and {nd} (field) consecutive steps, last deltas {:.1e} (f) {:.1e} (field), |theta| gap {th_gap:.2e} <= {allowed:.2e}",
            it.len(),
            it.last().map_or(f64::NAN, |i| i.delta_f),
            it.last().map_or(f64::NAN, |i| i.delta_field)
        ),
    )
}

fn has_nan(dir: &Path) -> bool {
    fs::read_dir(dir)
        .unwrap()
        .filter_map(|e| e.ok())
        .any(|e| fs::read_to_string(e.path()).map(|s| s.to_lowercase().contains("nan")).unwrap_or(false))
}

fn cli_run(config_text: &str, dir: &Path) -> i32 {
    let cfg_path = dir.with_extension("json");
    fs::write(&cfg_path, config_text).unwrap();
    cmd_run(&RunArgs { config: cfg_path, output_dir: Some(dir.to_path_buf()), override_certified: false, mode: None })
}

fn c8_guard(tmp: &Path) -> Outcome {
    let guard = config(r#"{"preset": "blowup_guard"}"#);
    let theta0 = guard.initial.theta_b[0].amplitude;
    let g_dir = tmp.join("guard");
    let g_code = cli_run(r#"{"preset": "blowup_guard", "output": {"snapshots": [0.0, 0.01, 0.02, 0.05, 0.1]}}"#, &g_dir);
    let g_nan = has_nan(&g_dir);
    let a_dir = tmp.join("a3");
    let a_code = cli_run(r#"{"preset": "a3_violation"}"#, &a_dir);
    let a_frames = a_dir.join(FRAMES_FILE).exists();
    outcome(
        (theta0 - (FRAC_PI_2 - 1e-2)).abs() < 1e-15 && g_code == 4 && !g_nan && a_code == 3 && !a_frames,
        format!(
            "guard exit {g_code} (Theta0 = pi/2 - {:.1e}), NaN in output {g_nan}; A3 violation exit {a_code}, frames written {a_frames}",
            FRAC_PI_2 - theta0
        ),
    )
}

fn c9_determinism(tmp: &Path) -> Outcome {
    let text = r#"{"preset": "small_coupled", "output": {"snapshots": [0.0, 0.25, 0.5]}}"#;
    let (d1, d2) = (tmp.join("det1"), tmp.join("det2"));
    let codes = (cli_run(text, &d1), cli_run(text, &d2));
    let mut files = vec![FRAMES_FILE.to_string()];
    files.extend([0.0, 0.25, 0.5].map(snapshot_file_name));
    let snapshot_times: Vec<String> = fs::read_dir(&d1)
        .unwrap()
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.starts_with("fields_t"))
        .collect();
    let mut identical = true;
    let mut compared = 0;
    for name in files.iter().cloned().chain(snapshot_times.clone()) {
        match (fs::read(d1.join(&name)), fs::read(d2.join(&name))) {
            (Ok(a), Ok(b)) => {
                identical &= a == b;
                compared += 1;
            }
            _ => {
                // the nearest-step file name may differ from the requested time
                if name == FRAMES_FILE {
                    identical = false;
                }
            }
        }
    }
    outcome(
        codes == (0, 0) && identical && snapshot_times.len() == 3,
        format!("exit codes {codes:?}, {compared} files compared, byte-identical {identical}"),
    )
}

fn main() {
    let tmp = tempfile::tempdir().unwrap();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("1 transform exactness", Box::new(c1_transform)),
        ("2 simple-wave exactness", Box::new(c2_simple_wave)),
        ("3 kinetic conservation", Box::new(c3_kinetic)),
        ("4 closed-form horizons", Box::new(c4_horizons)),
        ("5 a priori bound suite", Box::new(c5_bounds)),
        ("6 continuity consistency", Box::new(c6_continuity)),
        ("7 Picard convergence", Box::new(c7_picard)),
        ("8 guard behaviour", Box::new(|| c8_guard(tmp.path()))),
        ("9 determinism", Box::new(|| c9_determinism(tmp.path()))),
    ];
    // optional criterion numbers on the command line select a subset
    let only: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let selected: Vec<_> = criteria
        .iter()
        .filter(|(name, _)| only.is_empty() || only.iter().any(|o| name.split(' ').next() == Some(o.as_str())))
        .collect();
    let mut failures = 0;
    for (name, check) in &selected {
        let start = Instant::now();
        let o = check();
        let secs = start.elapsed().as_secs_f64();
        println!("{} criterion {name}: {} [{secs:.1}s]", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failures += 1;
        }
    }
    println!("acceptance: {} of {} criteria passed", selected.len() - failures, selected.len());
    if failures > 0 && std::env::var_os("ACCEPTANCE_STRICT").is_some_and(|v| v == "1") {
        std::process::exit(1);
    }
}
