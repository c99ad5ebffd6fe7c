//! Acceptance suite. Runs without the libtest harness so every criterion prints one line.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config as PtConfig, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use screwbench::analysis::{
    estimate_nu, fit_envelope, mann_whitney_u, regrasp_frequency, AnalysisConfig, Channel,
    FtSeries, UTestMethod,
};
use screwbench::controller::{self, calibrate_force, ControllerConfig, ControllerState, Phase};
use screwbench::run::StepRecord;
use screwbench::sim::{Direction, FtSample, HeadType, Orientation, SubstrateKind};
use screwbench::{run_scenario, Outcome, Scenario};

// Pinned tolerances and budgets.
const SPEED_TORQUE_REL_TOL: f64 = 0.01;
const RUNNING_TORQUE: (f64, f64) = (0.16, 0.22);
const NU_REL_TOL: f64 = 0.05;
const NU_MIN_R: f64 = 0.7;
const FREQ_TOL_HZ: f64 = 0.05;
const MWU_P_TOL: f64 = 1e-12;
const RAMP_RATE_RATIO: f64 = 0.2;
const RAMP_SEATED_RUNS: usize = 95;
const ENVELOPE_SLACK: f64 = 1e-12;
const SAFETY_STREAMS: u32 = 10_000;
const CALIBRATION_REL_TOL: f64 = 1e-10;

struct Verdict {
    ok: bool,
    detail: String,
}

fn verdict(ok: bool, detail: impl Into<String>) -> Verdict {
    Verdict { ok, detail: detail.into() }
}

fn series_of(samples: Vec<FtSample>) -> FtSeries {
    FtSeries::new(samples, None).expect("well-formed series")
}

fn sample_at(i: usize, fz: f64, mz: f64) -> FtSample {
    FtSample { t: screwbench::sim::step_time(i as u64, 0.01), fz, mz }
}

/// Depth at the start of each step, paired with the torque the thread demanded there.
fn depth_torque(records: &[StepRecord], start_depth: f64) -> Vec<(f64, f64)> {
    let mut depth = start_depth;
    let mut out = Vec::with_capacity(records.len());
    for r in records {
        if r.spindle_speed != 0.0 && !r.seated {
            out.push((depth, r.required_torque));
        }
        depth = r.engaged_depth;
    }
    out
}

fn interpolate(curve: &[(f64, f64)], x: f64) -> Option<f64> {
    let mut pts: Vec<(f64, f64)> = curve.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let i = pts.partition_point(|p| p.0 < x);
    if i == 0 || i >= pts.len() {
        return None;
    }
    let (a, b) = (pts[i - 1], pts[i]);
    if b.0 == a.0 {
        return Some(a.1);
    }
    Some(a.1 + (b.1 - a.1) * (x - a.0) / (b.0 - a.0))
}

fn speed_invariance() -> Verdict {
    let speeds_deg = [22.5, 90.0, 180.0, 360.0];
    let mut curves = Vec::new();
    for deg in speeds_deg {
        let mut sc = Scenario::robot(Direction::Unscrewing);
        sc.controller.spindle_speed = f64::to_radians(deg);
        sc.duration = 400.0;
        let run = run_scenario(&sc).expect("run");
        if run.report.outcome != Outcome::Done || run.world.engaged_depth != 0.0 {
            return verdict(false, format!("{deg} deg/s run ended {:?}", run.report.outcome));
        }
        curves.push(depth_torque(&run.records, sc.screw.shank_length));
    }
    let shank = Scenario::robot(Direction::Unscrewing).screw.shank_length;
    let mut worst: f64 = 0.0;
    for k in 1..40 {
        let depth = shank * k as f64 / 40.0;
        let values: Vec<f64> = curves.iter().filter_map(|c| interpolate(c, depth)).collect();
        if values.len() != curves.len() {
            return verdict(false, format!("depth {depth} not covered by every run"));
        }
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        worst = worst.max((hi - lo) / hi);
    }
    let start_torque: Vec<f64> = curves.iter().map(|c| c[0].1).collect();
    let in_band = start_torque.iter().all(|t| (RUNNING_TORQUE.0..=RUNNING_TORQUE.1).contains(t));
    verdict(
        worst <= SPEED_TORQUE_REL_TOL && in_band,
        format!("max per-depth spread {:.2e} (tol {SPEED_TORQUE_REL_TOL}), breakaway torque {start_torque:.3?}", worst),
    )
}

fn force_ramp() -> Verdict {
    let runs = 100;
    let mut underforced_slips = 0u64;
    let (mut first_slips, mut first_time, mut last_slips, mut last_time) = (0u64, 0.0, 0u64, 0.0);
    let mut last_quarter_forced = true;
    let mut seated_ok = 0usize;
    for seed in 0..runs {
        let mut sc = Scenario::force_ramp();
        sc.seed = seed;
        let run = run_scenario(&sc).expect("run");
        let nu = sc.screw.nu_char;
        let rec = &run.records;
        underforced_slips += rec
            .iter()
            .filter(|r| r.slip_started && r.truth.fz < nu * r.required_torque)
            .count() as u64;

        let drive: Vec<&StepRecord> = rec.iter().filter(|r| r.spindle_speed != 0.0).collect();
        if drive.len() >= 4 {
            let q = drive.len() / 4;
            let dt = sc.sim.dt;
            first_slips += drive[..q].iter().filter(|r| r.slip_started).count() as u64;
            first_time += q as f64 * dt;
            let last = &drive[drive.len() - q..];
            last_slips += last.iter().filter(|r| r.slip_started).count() as u64;
            last_time += q as f64 * dt;
            let at_end = last[0];
            last_quarter_forced &= at_end.truth.fz >= 2.0 * nu * at_end.required_torque;
        }

        let truth_peak = rec.iter().map(|r| r.truth.mz).fold(0.0, f64::max);
        let reached_seat = rec.iter().any(|r| r.phase == Some(Phase::Seated));
        let stopped = rec.last().is_some_and(|r| r.spindle_speed == 0.0);
        if run.report.outcome == Outcome::Done
            && reached_seat
            && stopped
            && run.world.seated
            && truth_peak < sc.controller.overload_torque
        {
            seated_ok += 1;
        }
    }
    let first_rate = first_slips as f64 / first_time;
    let last_rate = last_slips as f64 / last_time;
    let ok = underforced_slips >= 1
        && last_quarter_forced
        && last_rate < RAMP_RATE_RATIO * first_rate
        && seated_ok >= RAMP_SEATED_RUNS;
    verdict(
        ok,
        format!(
            "slips below nu*tau {underforced_slips}; slip rate first/last quarter {first_rate:.4}/{last_rate:.4} per s \
             (ratio tol {RAMP_RATE_RATIO}), last quarter force >= 2*nu*tau: {last_quarter_forced}; \
             seated safely {seated_ok}/{runs} (need {RAMP_SEATED_RUNS})"
        ),
    )
}

fn nu_recovery() -> Verdict {
    let mut details = Vec::new();
    let mut ok = true;
    for (truth, seed) in [(106.0, 7u64), (57.0, 8)] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fz_noise = Normal::new(0.0, 0.1).unwrap();
        let mz_noise = Normal::new(0.0, 0.003).unwrap();
        let samples = (0..1000)
            .map(|i| {
                let t = i as f64 * 0.01;
                let tau = 0.1 + 0.08 * (2.0 * std::f64::consts::PI * 1.3 * t).sin();
                let fz = (truth * tau + fz_noise.sample(&mut rng)).abs();
                let mz = (tau + mz_noise.sample(&mut rng)).abs();
                sample_at(i, fz, mz)
            })
            .collect();
        let est = estimate_nu(&series_of(samples)).expect("fit");
        let rel = (est.nu - truth).abs() / truth;
        ok &= rel <= NU_REL_TOL && est.r > NU_MIN_R;
        details.push(format!("true {truth}: nu {:.2} (rel err {:.4}), r {:.3}", est.nu, rel, est.r));
    }
    verdict(ok, details.join("; "))
}

fn regrasp() -> Verdict {
    let mut details = Vec::new();
    let mut ok = true;
    for (hz, seed) in [(1.3, 11u64), (2.0, 12)] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 0.1).unwrap();
        let samples = (0..2000)
            .map(|i| {
                let t = i as f64 * 0.01;
                let fz = (20.0 * (std::f64::consts::PI * hz * t).sin() + noise.sample(&mut rng)).abs();
                sample_at(i, fz, 0.0)
            })
            .collect();
        let est = regrasp_frequency(&series_of(samples), Channel::Fz, &AnalysisConfig::default()).expect("peaks");
        ok &= (est - hz).abs() <= FREQ_TOL_HZ;
        details.push(format!("{hz} Hz -> {est:.4} Hz"));
    }
    verdict(ok, format!("{} (tol {FREQ_TOL_HZ} Hz)", details.join(", ")))
}

/// Two-sided p from the distribution of U over every assignment of ranks to the first group.
fn brute_force_p(n: usize, m: usize, u_obs: f64) -> f64 {
    fn walk(next: usize, total: usize, left: usize, rank_sum: usize, sums: &mut Vec<usize>) {
        if left == 0 {
            sums.push(rank_sum);
            return;
        }
        for r in next..=total - left + 1 {
            walk(r + 1, total, left - 1, rank_sum + r, sums);
        }
    }
    let mut sums = Vec::new();
    walk(1, n + m, n, 0, &mut sums);
    let offset = n * (n + 1) / 2;
    let total = sums.len() as f64;
    let below = sums.iter().filter(|&&s| ((s - offset) as f64) <= u_obs).count() as f64;
    let above = sums.iter().filter(|&&s| ((s - offset) as f64) >= u_obs).count() as f64;
    (2.0 * (below / total).min(above / total)).min(1.0)
}

fn mann_whitney_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    let mut bad_sum = 0;
    let mut not_exact = 0;
    for _ in 0..200 {
        let small = rng.random_range(1..=8usize);
        let large = rng.random_range(small..=12usize);
        let (n, m) = if rng.random_bool(0.5) { (small, large) } else { (large, small) };
        // distinct values: a shuffled grid with jitter
        let mut pool: Vec<f64> = (0..n + m).map(|i| i as f64 + rng.random_range(0.0..0.5)).collect();
        for i in (1..pool.len()).rev() {
            pool.swap(i, rng.random_range(0..=i));
        }
        let (a, b) = pool.split_at(n);
        let ab = mann_whitney_u(a, b).expect("test");
        let ba = mann_whitney_u(b, a).expect("test");
        if ab.u + ba.u != (n * m) as f64 {
            bad_sum += 1;
        }
        if ab.method != UTestMethod::Exact {
            not_exact += 1;
            continue;
        }
        worst = worst.max((ab.p - brute_force_p(n, m, ab.u)).abs());
    }
    verdict(
        worst <= MWU_P_TOL && bad_sum == 0 && not_exact == 0,
        format!("max |p - enumeration| {worst:.2e} (tol {MWU_P_TOL:e}); U sum violations {bad_sum}; non-exact {not_exact}"),
    )
}

/// Runs whose torque envelope rises somewhere, for human-like plastic unscrewing runs.
fn rising_envelopes(noise_free: bool) -> (Vec<u64>, usize) {
    let cfg = AnalysisConfig::default();
    let mut rising = Vec::new();
    let mut points = 0usize;
    for seed in 0..50u64 {
        let mut sc = Scenario::human(
            HeadType::Phillips,
            SubstrateKind::PlasticHole,
            Orientation::Vertical,
            Direction::Unscrewing,
        );
        sc.seed = seed;
        if noise_free {
            sc.sim.force_noise_std = 0.0;
            sc.sim.torque_noise_std = 0.0;
        }
        let run = run_scenario(&sc).expect("run");
        let series = series_of(run.log());
        let peaks = cfg.peaks(&series, Channel::Mz).expect("peaks");
        let Ok(env) = fit_envelope(&peaks) else {
            rising.push(seed);
            continue;
        };
        let values = env.sample(500);
        points += values.len();
        if values.windows(2).any(|w| w[1].1 > w[0].1 + ENVELOPE_SLACK) {
            rising.push(seed);
        }
    }
    (rising, points)
}

fn envelope_monotone() -> Verdict {
    let (rising, points) = rising_envelopes(true);
    let (noisy_rising, _) = rising_envelopes(false);
    verdict(
        rising.is_empty(),
        format!(
            "noise-free torque: {points} evaluation points over 50 runs, rising in {rising:?}; \
             with sensor noise (not gated): rising in {}/50",
            noisy_rising.len()
        ),
    )
}

fn controller_safety() -> Verdict {
    let cfg = ControllerConfig::default();
    let mut runner = TestRunner::new(PtConfig {
        cases: SAFETY_STREAMS,
        failure_persistence: None,
        ..PtConfig::default()
    });
    let stream = proptest::collection::vec((0.0f64..80.0, 0.0f64..0.42, 0u8..4), 20..200);
    let result = runner.run(&(stream, any::<bool>()), |(stream, screwing)| {
        let direction = if screwing { Direction::Screwing } else { Direction::Unscrewing };
        let dt = 0.01;
        let mut state = ControllerState::new(direction, -0.001, &cfg);
        let mut engaged = false;
        for (fz, mz, mode) in stream {
            // mode 0 forces sharp torque drops, mode 1 near-zero torque
            let mz = match mode {
                0 => mz * 0.1,
                1 => mz * 0.02,
                _ => mz,
            };
            let before = state.clone();
            let (next, cmd) = controller::update(&before, &FtSample { t: 0.0, fz, mz }, dt, &cfg);
            prop_assert!(
                before.phase == next.phase || before.phase.can_transition(next.phase),
                "{:?} -> {:?}",
                before.phase,
                next.phase
            );
            prop_assert!(cmd.z_cmd.is_finite() && cmd.spindle_speed.abs() <= cfg.spindle_speed);
            engaged |= next.phase != Phase::Approach;
            if engaged {
                prop_assert!(next.force_target >= cfg.f_min && next.force_target <= cfg.f_max);
            }
            let driving = matches!(before.phase, Phase::Engage | Phase::Drive);
            if driving && next.camout_active() {
                prop_assert!(
                    next.force_target > before.force_target || next.force_target == cfg.f_max,
                    "{} -> {}",
                    before.force_target,
                    next.force_target
                );
            }
            state = next;
        }
        Ok(())
    });
    match result {
        Ok(()) => verdict(true, format!("{SAFETY_STREAMS} random streams")),
        Err(e) => verdict(false, e.to_string()),
    }
}

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().expect("tempdir");
    let scenario = dir.path().join("screw.toml");
    std::fs::write(&scenario, Scenario::robot(Direction::Screwing).to_toml()).unwrap();
    let invoke = |tag: &str| -> Option<(Vec<u8>, Vec<u8>)> {
        let log = dir.path().join(format!("{tag}.csv"));
        let report = dir.path().join(format!("{tag}.toml"));
        let status = Command::new(env!("CARGO_BIN_EXE_screwbench"))
            .arg("simulate")
            .arg(&scenario)
            .args(["--seed", "42"])
            .arg("--out")
            .arg(&log)
            .arg("--report")
            .arg(&report)
            .status()
            .ok()?;
        status.success().then(|| (read(&log), read(&report)))
    };
    fn read(p: &Path) -> Vec<u8> {
        std::fs::read(p).unwrap_or_default()
    }
    match (invoke("a"), invoke("b")) {
        (Some(a), Some(b)) => verdict(
            a == b && !a.0.is_empty() && !a.1.is_empty(),
            format!("log {} bytes, report {} bytes, identical: {}", a.0.len(), a.1.len(), a == b),
        ),
        _ => verdict(false, "simulate exited nonzero"),
    }
}

/// Closed-form normal equations solved by Cramer's rule on raw sums.
fn normal_equations(pairs: &[(f64, f64)]) -> (f64, f64) {
    let n = pairs.len() as f64;
    let sx: f64 = pairs.iter().map(|p| p.0).sum();
    let sy: f64 = pairs.iter().map(|p| p.1).sum();
    let sxx: f64 = pairs.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pairs.iter().map(|p| p.0 * p.1).sum();
    let det = n * sxx - sx * sx;
    ((n * sxy - sx * sy) / det, (sxx * sy - sx * sxy) / det)
}

fn calibration() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(10..200);
        let gain = rng.random_range(0.5..20.0);
        let offset = rng.random_range(0.1..5.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let noise = Normal::new(0.0, rng.random_range(0.01..0.5)).unwrap();
        let pairs: Vec<(f64, f64)> = (0..n)
            .map(|_| {
                let x = rng.random_range(0.0..1.0);
                (x, gain * x + offset + noise.sample(&mut rng))
            })
            .collect();
        let fit = calibrate_force(&pairs).expect("fit");
        let (g, o) = normal_equations(&pairs);
        worst = worst.max((fit.gain - g).abs() / g.abs()).max((fit.offset - o).abs() / o.abs());
    }
    verdict(
        worst <= CALIBRATION_REL_TOL,
        format!("max relative error {worst:.2e} (tol {CALIBRATION_REL_TOL:e})"),
    )
}

type Criterion = (&'static str, Duration, fn() -> Verdict);

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("1 speed invariance", Duration::from_secs(5), speed_invariance),
        ("2 force ramp cam-out reproduction", Duration::from_secs(60), force_ramp),
        ("3 force/torque ratio recovery", Duration::from_secs(1), nu_recovery),
        ("4 regrasp frequency", Duration::from_secs(1), regrasp),
        ("5 rank test against enumeration", Duration::from_secs(30), mann_whitney_oracle),
        ("6 unscrewing envelope monotone", Duration::from_secs(30), envelope_monotone),
        ("7 controller safety properties", Duration::from_secs(60), controller_safety),
        ("8 simulate determinism", Duration::from_secs(60), determinism),
        ("9 calibration vs normal equations", Duration::from_secs(5), calibration),
    ];
    let mut failed = 0;
    for (name, budget, check) in criteria {
        let start = Instant::now();
        let v = check();
        let elapsed = start.elapsed();
        let ok = v.ok && elapsed <= budget;
        failed += usize::from(!ok);
        println!(
            "criterion {name}: {} [{:.2}s of {}s] {}",
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs(),
            v.detail
        );
    }
    println!("acceptance: {} of 9 criteria passed", 9 - failed);
    if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
