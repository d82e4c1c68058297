//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process fails if any criterion fails.

use std::panic::{self, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use switchrep_core::agent::{run_ensemble, InitMode, SimSpec};
use switchrep_core::game::{coefficient_im, coefficient_pc};
use switchrep_core::ode::{integrate_reduced, StepConfig};
use switchrep_core::pair_approx::{field_im, integrate_switched_pair, slow_manifold};
use switchrep_core::switched::critical_instant_two_rules;
use switchrep_core::{GameParams, PairState, StablePoint, SwitchSchedule, UpdateRule};

use UpdateRule::{Imitation as IM, PairwiseComparison as PC};

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn base() -> GameParams {
    GameParams::new(0.01, 4, 2.0, 0.2).unwrap()
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_switchrep"))
}

fn recipe(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../recipes")
        .join(format!("{name}.conf"))
}

/// Schedule with `m` random coefficients in `[-0.05, 0.05]`, `T` in `[1, 10]`
/// and sorted interior instants at least `T/1000` apart.
fn random_schedule(rng: &mut ChaCha8Rng) -> SwitchSchedule {
    loop {
        let m = rng.gen_range(1..=4);
        let period = rng.gen_range(1.0..=10.0);
        let alphas: Vec<f64> = (0..m).map(|_| rng.gen_range(-0.05..=0.05)).collect();
        let mut instants: Vec<f64> = (1..m).map(|_| rng.gen_range(0.0..period)).collect();
        instants.sort_by(f64::total_cmp);
        let mut bounds = vec![0.0];
        bounds.extend(&instants);
        bounds.push(period);
        if bounds.windows(2).all(|w| w[1] - w[0] > period * 1e-3) {
            return SwitchSchedule::from_alphas(&alphas, &instants, period).unwrap();
        }
    }
}

fn oracle_drift(s: &SwitchSchedule) -> f64 {
    s.alphas()
        .iter()
        .zip(s.bounds().windows(2))
        .map(|(a, w)| a * (w[1] - w[0]))
        .sum()
}

fn oracle_logistic(x0: f64, lambda: f64) -> f64 {
    x0 / (x0 + (1.0 - x0) * (-lambda).exp())
}

fn criterion_1() -> Outcome {
    let p = base();
    let pc = coefficient_pc(&p).unwrap();
    let im = coefficient_im(&p).unwrap();
    // 0.01 * 4 * 2 * 0.2 / 6 and 0.01 * 16 * 2 * 0.8 / 75
    let (e_pc, e_im) = (-1.0 / 375.0, 32.0 / 9375.0);
    let (d_pc, d_im) = ((pc - e_pc).abs(), (im - e_im).abs());
    Outcome::new(
        d_pc < 1e-14 && d_im < 1e-14,
        format!("alpha_pc = {pc:e} (err {d_pc:.1e}), alpha_im = {im:e} (err {d_im:.1e})"),
    )
}

fn criterion_2() -> Outcome {
    let p = base();
    let (k, b, c, t) = (4.0, 2.0, 0.2, 5.0);
    let den = 2.0 * k * b - (k * k + 2.0 * k - 1.0) * c;
    let p1_formula = 2.0 * k * (b - (k + 2.0) * c) * t / den;
    let p2_formula = (k + 1.0) * (k + 1.0) * c * t / den;
    let (a_pc, a_im) = (coefficient_pc(&p).unwrap(), coefficient_im(&p).unwrap());
    let p1 = critical_instant_two_rules(a_pc, a_im, t).unwrap();
    let p2 = critical_instant_two_rules(a_im, a_pc, t).unwrap();
    let mut ok = true;
    let mut notes = Vec::new();
    for (name, got, formula, exact) in [
        ("p1", p1, p1_formula, 32.0 / 11.4),
        ("p2", p2, p2_formula, 25.0 / 11.4),
    ] {
        let err = (got - exact).abs().max((formula - exact).abs());
        ok &= err < 1e-12;
        notes.push(format!("{name} = {got:.12} (err {err:.1e})"));
    }

    let cases = [
        (vec![PC, IM], 2.0, StablePoint::FullCooperation),
        (vec![PC, IM], 3.0, StablePoint::FullDefection),
        (vec![IM, PC], 3.0, StablePoint::FullCooperation),
        (vec![IM, PC], 2.0, StablePoint::FullDefection),
    ];
    for (rules, t1, expected) in cases {
        let s = SwitchSchedule::new(rules.clone(), &[t1], t, &p).unwrap();
        let got = s.classify().stable_point;
        ok &= got == expected;

        let out = bin()
            .args(["thresholds", "--format", "json", "--instants", &t1.to_string(), "--rules"])
            .arg(if rules[0] == PC { "pc,im" } else { "im,pc" })
            .output()
            .unwrap();
        let v: Value = serde_json::from_slice(&out.stdout).unwrap();
        ok &= out.status.success() && v["stable_point"] == expected.to_string();
        ok &= (v["p1"].as_f64().unwrap() - 32.0 / 11.4).abs() < 1e-12;
        ok &= (v["p2"].as_f64().unwrap() - 25.0 / 11.4).abs() < 1e-12;
        let order = if rules[0] == PC { "PC,IM" } else { "IM,PC" };
        notes.push(format!("{order} t1={t1}: {got}"));
    }
    Outcome::new(ok, notes.join("; "))
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let s = random_schedule(&mut rng);
        let x0 = rng.gen_range(0.05..0.95);
        let t_end = 20.0 * s.period();
        let dt = s.period() / 20.0;
        let ode = integrate_reduced(&s, x0, StepConfig::new(t_end, 1e-3, dt)).unwrap();
        for (t, x) in ode {
            worst = worst.max((s.trajectory_at(x0, t) - x).abs());
        }
    }
    Outcome::new(worst < 1e-6, format!("max |closed form - RK4| = {worst:.3e} over 200 schedules"))
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut violations = 0usize;
    let mut checked = 0usize;
    let mut schedules: Vec<SwitchSchedule> = (0..500).map(|_| random_schedule(&mut rng)).collect();
    // Exactly neutral: equal and opposite coefficients on dyadic windows.
    schedules.push(SwitchSchedule::from_alphas(&[0.03, -0.03], &[2.0], 4.0).unwrap());
    schedules.push(SwitchSchedule::from_alphas(&[0.02, -0.01, -0.01], &[1.0, 2.0], 3.0).unwrap());
    for s in &schedules {
        let sign = oracle_drift(s).signum();
        let neutral = oracle_drift(s) == 0.0;
        let x0 = rng.gen_range(0.05..0.95);
        for &tv in &s.bounds()[..s.len()] {
            for theta in 0..=20u32 {
                let a = s.trajectory_at(x0, theta as f64 * s.period() + tv);
                let b = s.trajectory_at(x0, (theta + 1) as f64 * s.period() + tv);
                let d = b - a;
                checked += 1;
                let ok = if neutral {
                    d.abs() <= 1e-15
                } else {
                    d != 0.0 && d.signum() == sign
                };
                if !ok {
                    violations += 1;
                }
            }
        }
    }
    Outcome::new(
        violations == 0,
        format!("{violations} sign violations in {checked} boundary comparisons over {} schedules", schedules.len()),
    )
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let tol = 1e-3;
    let mut tested = 0usize;
    let mut failures = Vec::new();
    while tested < 200 {
        let s = random_schedule(&mut rng);
        let drift = oracle_drift(&s);
        if drift.abs() <= 1e-4 {
            continue;
        }
        tested += 1;
        let class = s.classify();
        let expected_limit = if drift > 0.0 { 1.0 } else { 0.0 };
        if class.stable_point.limit() != Some(expected_limit) {
            failures.push(format!("classify gave {} for S = {drift:e}", class.stable_point));
            continue;
        }
        for x0 in [0.1, 0.5, 0.9] {
            let Some(theta) = s.convergence_cycle(x0, tol) else {
                failures.push(format!("no cycle for S = {drift:e}"));
                continue;
            };
            let at = |th: u64| (oracle_logistic(x0, th as f64 * drift) - expected_limit).abs();
            let direct = (s.trajectory_at(x0, theta as f64 * s.period()) - expected_limit).abs();
            let minimal = theta == 0 || at(theta - 1) >= tol;
            if !(at(theta) < tol && direct < tol && minimal) {
                failures.push(format!("S = {drift:e}, x0 = {x0}, theta = {theta}"));
            }
        }
    }

    let recipes = [
        ("fig2a", 1.0),
        ("fig2b", 0.0),
        ("fig3a", 1.0),
        ("fig3b", 0.0),
    ];
    let mut shapes = Vec::new();
    for (name, limit) in recipes {
        match check_recipe(name, limit) {
            Ok(msg) => shapes.push(msg),
            Err(msg) => failures.push(format!("{name}: {msg}")),
        }
    }
    Outcome::new(
        failures.is_empty(),
        if failures.is_empty() {
            format!("{tested} schedules x 3 initial states confirmed; recipes: {}", shapes.join(", "))
        } else {
            failures.join("; ")
        },
    )
}

fn check_recipe(name: &str, limit: f64) -> Result<String, String> {
    let out = bin()
        .args(["trajectory", "--config"])
        .arg(recipe(name))
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(String::from_utf8_lossy(&out.stderr).into_owned());
    }
    let text = String::from_utf8(out.stdout).map_err(|e| e.to_string())?;
    let mut lines = text.lines();
    let echo = lines.next().ok_or("empty output")?;
    if !echo.starts_with("# ") {
        return Err("missing config echo".into());
    }
    let header: Vec<&str> = lines.next().ok_or("missing header")?.split(',').collect();
    if header != ["t", "x@0.1", "x@0.5", "x@0.9"] {
        return Err(format!("unexpected header {header:?}"));
    }
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect();

    let class = {
        let out = bin()
            .args(["classify", "--format", "json", "--config"])
            .arg(recipe(name))
            .output()
            .map_err(|e| e.to_string())?;
        let v: Value = serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())?;
        v["stable_point"].as_str().unwrap_or_default().to_string()
    };
    let expected = if limit == 1.0 { "FullCooperation" } else { "FullDefection" };
    if class != expected {
        return Err(format!("classify says {class}, expected {expected}"));
    }

    // Rules and instants as in the recipe file.
    let conf = std::fs::read_to_string(recipe(name)).unwrap();
    let value = |key: &str| {
        conf.lines()
            .find_map(|l| l.split_once('=').filter(|(k, _)| k.trim() == key).map(|(_, v)| v.trim().to_string()))
            .unwrap()
    };
    let t1: f64 = value("instants").parse().unwrap();
    let first_pc = value("rules").starts_with("pc");
    let p = base();
    let (a_pc, a_im) = (coefficient_pc(&p).unwrap(), coefficient_im(&p).unwrap());
    let (a1, a2) = if first_pc { (a_pc, a_im) } else { (a_im, a_pc) };

    for col in 1..=3 {
        for w in rows.windows(2) {
            let (t0, t1_) = (w[0][0], w[1][0]);
            let phase = t0 % 5.0;
            let alpha = if phase + 1e-9 < t1 { a1 } else { a2 };
            let d = w[1][col] - w[0][col];
            if d != 0.0 && d.signum() != alpha.signum() {
                return Err(format!("column {col} not monotone on [{t0}, {t1_}]"));
            }
        }
        let boundaries: Vec<f64> = rows.iter().filter(|r| r[0] % 5.0 == 0.0).map(|r| r[col]).collect();
        let converging = boundaries
            .windows(2)
            .all(|w| (w[1] - limit).abs() <= (w[0] - limit).abs());
        let last = rows.last().unwrap()[col];
        if !converging || (last - limit).abs() >= 1e-3 {
            return Err(format!("column {col} ends at {last}, envelope converging: {converging}"));
        }
    }
    Ok(format!("{name} -> {expected}"))
}

fn criterion_6() -> Outcome {
    let p = base();
    let cfg = StepConfig::new(1000.0, 0.01, 0.5);
    let mut ok = true;
    let mut notes = Vec::new();
    for (rule, name) in [(PC, "PC"), (IM, "IM")] {
        let alpha = rule.alpha(&p).unwrap();
        let schedule = SwitchSchedule::new(vec![rule], &[], 1.0, &p).unwrap();
        let mut worst = 0.0f64;
        for x0 in [0.1, 0.5, 0.9] {
            let traj = integrate_switched_pair(PairState::on_manifold(x0, 4), &schedule, &p, cfg).unwrap();
            let dev = traj
                .samples
                .iter()
                .map(|(t, s)| (s.x_c - oracle_logistic(x0, alpha * t)).abs())
                .fold(0.0, f64::max);
            worst = worst.max(dev);
        }
        ok &= worst < 1e-3;
        notes.push(format!("{name} on-manifold sup dev {worst:.2e}"));

        let mut slowest = 0.0f64;
        for (x0, y0) in [(0.1, 0.1), (0.5, 0.5), (0.9, 0.9), (0.3, 0.05), (0.5, 0.95), (0.2, 0.8)] {
            let traj = integrate_switched_pair(PairState::new(x0, y0), &schedule, &p, StepConfig::new(100.0, 0.01, 0.5))
                .unwrap();
            let gap = |s: &PairState| (s.x_c_given_c - slow_manifold(s.x_c, 4)).abs();
            let entered = traj.samples.iter().find(|(_, s)| gap(s) < 1e-3).map(|(t, _)| *t);
            let stays = traj.samples.iter().filter(|(t, _)| *t >= 50.0).all(|(_, s)| gap(s) < 1e-3);
            match entered {
                Some(t) if t <= 50.0 && stays => slowest = slowest.max(t),
                _ => {
                    ok = false;
                    slowest = f64::INFINITY;
                }
            }
        }
        notes.push(format!("{name} off-manifold within 1e-3 by t = {slowest}"));

        // Same slow time at a tenth of the selection strength.
        let weak = GameParams { omega: 0.001, ..p };
        let weak_alpha = rule.alpha(&weak).unwrap();
        let weak_schedule = SwitchSchedule::new(vec![rule], &[], 1.0, &weak).unwrap();
        let traj = integrate_switched_pair(
            PairState::on_manifold(0.5, 4),
            &weak_schedule,
            &weak,
            StepConfig::new(10000.0, 0.05, 5.0),
        )
        .unwrap();
        let dev = traj
            .samples
            .iter()
            .map(|(t, s)| (s.x_c - oracle_logistic(0.5, weak_alpha * t)).abs())
            .fold(0.0, f64::max);
        notes.push(format!("{name} x0=0.5 at omega=0.001 over t<=10000: {dev:.2e}"));
    }
    Outcome::new(ok, notes.join("; "))
}

fn criterion_7() -> Outcome {
    let p = base();
    let (w, k, b, c) = (0.01, 4.0, 2.0, 0.2);
    let alpha = w * k * k * (k - 2.0) * (b - (k + 2.0) * c) / ((k + 1.0) * (k + 1.0) * (k - 1.0));
    let mut worst = 0.0f64;
    for i in 0..100 {
        let x = (i as f64 + 0.5) / 100.0;
        let y = 1.0 / (k - 1.0) + (k - 2.0) / (k - 1.0) * x;
        let got = field_im(&PairState::new(x, y), &p).unwrap()[0];
        let expected = alpha * x * (1.0 - x);
        worst = worst.max(((got - expected) / expected).abs());
    }
    Outcome::new(worst < 1e-12, format!("max relative error {worst:.2e} on 100 manifold points"))
}

fn criterion_8() -> Outcome {
    let runs = 50;
    let horizon = 25.0;
    let spec = |params: GameParams, rules: Vec<UpdateRule>, t1: f64| SimSpec {
        pop_size: 2000,
        params,
        schedule: SwitchSchedule::new(rules, &[t1], 5.0, &params).unwrap(),
        x0: 0.5,
        init: InitMode::Exact,
        t_end: horizon,
        sample_dt: horizon,
    };
    let mut ok = true;
    let mut notes = Vec::new();
    for (name, rules, t1) in [
        ("2a", vec![PC, IM], 2.0),
        ("2b", vec![PC, IM], 3.0),
        ("3a", vec![IM, PC], 3.0),
        ("3b", vec![IM, PC], 2.0),
    ] {
        let sp = spec(base(), rules, t1);
        let expected = sp.schedule.classify().drift_sum.signum();
        let stats = run_ensemble(&sp, runs, 0, None).unwrap();
        let last = stats.times.len() - 1;
        let delta = stats.mean_x_c[last] - stats.mean_x_c[0];
        let z = delta / stats.stderr_x_c(last);
        let gap = |i: usize| (stats.mean_x_c_given_c[i] - slow_manifold(stats.mean_x_c[i], 4)).abs();
        let sign_ok = delta.signum() == expected;
        let attracted = gap(last) < gap(0);
        ok &= sign_ok && attracted;
        let big = run_ensemble(&sp, 1000, 1_000_000, None).unwrap();
        let big_delta = big.mean_x_c[last] - big.mean_x_c[0];
        let big_z = big_delta / big.stderr_x_c(last);
        notes.push(format!(
            "{name}: dx {delta:+.4} (z {z:+.2}, want {}) {} manifold gap {:.3}->{:.3} \
             [1000 runs: dx {big_delta:+.4}, z {big_z:+.2}]",
            if expected > 0.0 { "+" } else { "-" },
            if sign_ok { "ok" } else { "WRONG SIGN" },
            gap(0),
            gap(last)
        ));
    }
    let null = spec(GameParams { omega: 0.0, ..base() }, vec![PC, IM], 2.0);
    let stats = run_ensemble(&null, runs, 0, None).unwrap();
    let last = stats.times.len() - 1;
    let z = (stats.mean_x_c[last] - 0.5) / stats.stderr_x_c(last);
    ok &= z.abs() <= 3.0;
    notes.push(format!("null: mean {:.4} (z {z:+.2})", stats.mean_x_c[last]));
    Outcome::new(ok, notes.join("; "))
}

fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &PathBuf| {
        vec![
            "simulate".to_string(),
            "--pop-size=400".into(),
            "--runs=6".into(),
            "--t-end=25".into(),
            "--dt=2.5".into(),
            "--x0=0.3,0.7".into(),
            "--seed=17".into(),
            format!("--out={}", out.display()),
        ]
    };
    let mut files = Vec::new();
    for (i, threads) in ["1", "1", "3"].iter().enumerate() {
        let path = dir.path().join(format!("run{i}.csv"));
        let status = bin().args(args(&path)).env("SWITCHREP_THREADS", threads).status().unwrap();
        if !status.success() {
            return Outcome::new(false, format!("run {i} exited with {status}"));
        }
        files.push(std::fs::read(&path).unwrap());
    }
    let path = dir.path().join("inproc.csv");
    let code = switchrep::run(
        std::iter::once("switchrep".to_string()).chain(args(&path)),
        Some("2"),
        &mut Vec::new(),
        &mut Vec::new(),
    );
    files.push(std::fs::read(&path).unwrap());
    let identical = code == 0 && files.windows(2).all(|w| w[0] == w[1]);
    let rows = files[0].iter().filter(|&&b| b == b'\n').count();
    Outcome::new(
        identical && rows == 13,
        format!("{} runs ({} bytes, {rows} lines) byte-identical: {identical}", files.len(), files[0].len()),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        ("coefficient reproduction", criterion_1),
        ("threshold reproduction", criterion_2),
        ("closed form vs ODE", criterion_3),
        ("period-boundary monotonicity", criterion_4),
        ("convergence cycles and recipes", criterion_5),
        ("slow-manifold reduction", criterion_6),
        ("pair field on the manifold", criterion_7),
        ("agent drift direction", criterion_8),
        ("determinism", criterion_9),
    ];
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        for i in 1..=criteria.len() {
            println!("criterion_{i}: test");
        }
        return;
    }
    let filter: Vec<String> = args.into_iter().filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let label = format!("criterion {} ({name})", i + 1);
        if !filter.is_empty() && !filter.iter().any(|p| label.contains(p.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(f))
            .unwrap_or_else(|_| Outcome::new(false, "panicked"));
        let verdict = if outcome.pass { "PASS" } else { "FAIL" };
        println!("{verdict} {label} [{:.1}s]: {}", start.elapsed().as_secs_f64(), outcome.detail);
        if !outcome.pass {
            failed += 1;
        }
    }
    println!("acceptance: {failed} criteria failed");
    if failed > 0 {
        std::process::exit(1);
    }
}
