use std::io::Write;

use serde::Serialize;
use switchrep_core::agent::{run_ensemble, SimSpec};
use switchrep_core::game::{coefficient_im, coefficient_pc};
use switchrep_core::ode::{integrate_reduced, StepConfig};
use switchrep_core::pair_approx::integrate_switched_pair;
use switchrep_core::switched::critical_instant_two_rules;
use switchrep_core::{
    Error as CoreError, PairState, StablePoint, SwitchSchedule, UpdateRule,
};

use crate::config::{Engine, Format, PairStart, RunConfig};
use crate::output::{Field, Report, Table};
use crate::CliError;

/// Distance to the limit that counts as converged in `classify`.
pub const CONVERGENCE_TOL: f64 = 1e-3;
/// Tolerance of the closed-form vs reduced-ODE check in `validate`.
pub const CLOSED_FORM_TOL: f64 = 1e-6;
/// Tolerance of the pair-ODE vs reduced check in `validate`.
pub const PAIR_TOL: f64 = 1e-3;
/// Periods over which `validate` measures the agent drift.
pub const DRIFT_PERIODS: f64 = 5.0;

pub fn coeff(cfg: &RunConfig, warn: &mut dyn FnMut(String)) -> Result<Report, CliError> {
    let p = &cfg.params;
    let a_pc = coefficient_pc(p)?;
    let mut a_im = coefficient_im(p)?;
    let margin = p.benefit - (p.degree as f64 + 2.0) * p.cost;
    let boundary = margin.abs() <= 1e-12 * p.benefit.abs().max(1.0);
    if boundary {
        a_im = 0.0;
    }
    let mut r = Report::default();
    r.push("alpha_pc", Field::Num(a_pc, 6))
        .push("alpha_im", Field::Num(a_im, 6))
        .push("im_margin", Field::Num(if boundary { 0.0 } else { margin }, 6));
    if boundary {
        warn("b = (k+2)c: imitation is neutral to first order in omega".into());
        r.note("boundary b = (k+2)c, alpha_im vanishes");
    } else if margin > 0.0 {
        r.note("b > (k+2)c: imitation favors cooperation");
    } else {
        r.note("b < (k+2)c: imitation favors defection");
    }
    r.note("pairwise comparison never favors cooperation");
    Ok(r)
}

pub fn thresholds(cfg: &RunConfig) -> Result<Report, CliError> {
    let schedule = cfg.schedule()?;
    if schedule.len() != 2 {
        return Err(CliError::Config(format!(
            "thresholds needs exactly two rules, got {}",
            schedule.len()
        )));
    }
    let t = cfg.period;
    let t1 = cfg.t1.unwrap_or(schedule.instants()[0]);
    if !(t1 > 0.0 && t1 < t) {
        return Err(CliError::Config(format!("t1 must lie in (0, {t}), got {t1}")));
    }
    let (a1, a2) = (schedule.alphas()[0], schedule.alphas()[1]);
    let critical = critical_instant_two_rules(a1, a2, t)
        .map_err(|_| CliError::Numerical("degenerate: both rules have the same coefficient".into()))?;

    let a_pc = coefficient_pc(&cfg.params)?;
    let a_im = coefficient_im(&cfg.params)?;
    let p1 = critical_instant_two_rules(a_pc, a_im, t).ok();
    let p2 = critical_instant_two_rules(a_im, a_pc, t).ok();
    let s = a1 * t1 + a2 * (t - t1);
    let at_t1 = SwitchSchedule::from_alphas(&[a1, a2], &[t1], t)?.classify();

    let mut r = Report::default();
    r.push("alpha_1", Field::Num(a1, 6))
        .push("alpha_2", Field::Num(a2, 6))
        .push("p1", p1.map_or(Field::Null, |v| Field::Num(v, 7)))
        .push("p2", p2.map_or(Field::Null, |v| Field::Num(v, 7)))
        .push("critical_t1", Field::Num(critical, 7))
        .push("t1", Field::Num(t1, 7))
        .push("drift_sum", Field::Num(s, 6))
        .push("stable_point", Field::Str(at_t1.stable_point.to_string()));
    let (below, above) = if a1 < a2 {
        ("FullCooperation", "FullDefection")
    } else {
        ("FullDefection", "FullCooperation")
    };
    if (0.0..=t).contains(&critical) {
        r.note(format!(
            "{below} for t1 < {}, {above} for t1 > {}",
            crate::output::sig(critical, 7),
            crate::output::sig(critical, 7)
        ));
    } else {
        r.note(format!(
            "critical instant outside (0, T): {} for every t1",
            if a2 > 0.0 { "FullCooperation" } else { "FullDefection" }
        ));
    }
    Ok(r)
}

pub fn classify(cfg: &RunConfig) -> Result<Report, CliError> {
    let schedule = cfg.schedule()?;
    let class = schedule.classify();
    let mut r = Report::default();
    let rules: Vec<String> = schedule.rules().iter().map(ToString::to_string).collect();
    r.push("rules", Field::Str(rules.join(",")));
    for (i, a) in schedule.alphas().iter().enumerate() {
        r.push(format!("alpha_{}", i + 1), Field::Num(*a, 6));
    }
    r.push("drift_sum", Field::Num(class.drift_sum, 6))
        .push("stable_point", Field::Str(class.stable_point.to_string()));
    for &x0 in &cfg.x0 {
        let cycle = schedule.convergence_cycle(x0, CONVERGENCE_TOL);
        r.push(
            format!("convergence_cycle@{x0}"),
            cycle.map_or(Field::Null, |c| Field::Int(c as i64)),
        );
    }
    if class.stable_point == StablePoint::Neutral {
        r.note(neutral_note());
    }
    Ok(r)
}

fn neutral_note() -> String {
    "Neutral: zero drift sum, the trajectory is periodic and the convergence results do not apply"
        .into()
}

/// Trajectories of the configured engine for every initial condition.
pub fn trajectory(cfg: &RunConfig, threads: Option<usize>) -> Result<Table, CliError> {
    let schedule = cfg.schedule()?;
    let multi = cfg.x0.len() > 1;
    let name = |base: &str, x0: f64| {
        if multi {
            format!("{base}@{x0}")
        } else {
            base.to_string()
        }
    };
    let mut columns = vec!["t".to_string()];
    let mut series: Vec<Vec<(f64, Vec<f64>)>> = Vec::new();
    for &x0 in &cfg.x0 {
        let rows: Vec<(f64, Vec<f64>)> = match cfg.engine {
            Engine::ClosedForm => {
                columns.push(name("x", x0));
                schedule
                    .sample(x0, cfg.t_end, cfg.dt)
                    .into_iter()
                    .map(|(t, x)| (t, vec![x]))
                    .collect()
            }
            Engine::ReducedOde => {
                columns.push(name("x", x0));
                integrate_reduced(&schedule, x0, step_config(cfg))?
                    .into_iter()
                    .map(|(t, x)| (t, vec![x]))
                    .collect()
            }
            Engine::PairOde => {
                columns.push(name("x", x0));
                columns.push(name("x_cc", x0));
                pair_samples(cfg, &schedule, x0)?
                    .into_iter()
                    .map(|(t, s)| (t, vec![s.x_c, s.x_c_given_c]))
                    .collect()
            }
            Engine::Agent => {
                for base in ["x_mean", "x_std", "x_cc_mean", "x_cc_std"] {
                    columns.push(name(base, x0));
                }
                let stats = run_ensemble(&sim_spec(cfg, &schedule, x0, cfg.t_end), cfg.runs, cfg.seed, threads)?;
                (0..stats.times.len())
                    .map(|i| {
                        (
                            stats.times[i],
                            vec![
                                stats.mean_x_c[i],
                                stats.std_x_c[i],
                                stats.mean_x_c_given_c[i],
                                stats.std_x_c_given_c[i],
                            ],
                        )
                    })
                    .collect()
            }
        };
        series.push(rows);
    }

    let mut table = Table::new(columns);
    let len = series[0].len();
    for i in 0..len {
        let mut row = vec![series[0][i].0];
        for s in &series {
            debug_assert_eq!(s.len(), len);
            row.extend_from_slice(&s[i].1);
        }
        table.rows.push(row);
    }
    Ok(table)
}

fn step_config(cfg: &RunConfig) -> StepConfig {
    StepConfig::new(cfg.t_end, cfg.step, cfg.dt)
}

fn pair_start(cfg: &RunConfig, x0: f64) -> PairState {
    match cfg.x_cc0 {
        PairStart::Manifold => PairState::on_manifold(x0, cfg.params.degree),
        PairStart::Uncorrelated => PairState::new(x0, x0),
        PairStart::Value(v) => PairState::new(x0, v),
    }
}

fn pair_samples(
    cfg: &RunConfig,
    schedule: &SwitchSchedule,
    x0: f64,
) -> Result<Vec<(f64, PairState)>, CliError> {
    Ok(integrate_switched_pair(pair_start(cfg, x0), schedule, &cfg.params, step_config(cfg))?.samples)
}

fn sim_spec(cfg: &RunConfig, schedule: &SwitchSchedule, x0: f64, t_end: f64) -> SimSpec {
    SimSpec {
        pop_size: cfg.pop_size,
        params: cfg.params,
        schedule: schedule.clone(),
        x0,
        init: cfg.init.into(),
        t_end,
        sample_dt: cfg.dt.min(t_end),
    }
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub status: CheckStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    pub detail: String,
}

#[derive(Clone, Copy, Debug, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct ValidationReport {
    pub config: String,
    pub drift_sum: f64,
    pub stable_point: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub thresholds: String,
    pub checks: Vec<Check>,
    pub pass: bool,
}

/// Cross-check the engines against each other for the first `x0`.
pub fn validate(cfg: &RunConfig, threads: Option<usize>) -> Result<ValidationReport, CliError> {
    let schedule = cfg.schedule()?;
    let class = schedule.classify();
    let x0 = cfg.x0[0];
    let mut checks = Vec::new();

    let exact = schedule.sample(x0, cfg.t_end, cfg.dt);
    let ode = integrate_reduced(&schedule, x0, step_config(cfg))?;
    let dev = max_deviation(exact.iter().map(|s| s.1), ode.iter().map(|s| s.1));
    checks.push(Check {
        name: "closed_form_vs_reduced_ode",
        status: status(dev < CLOSED_FORM_TOL),
        value: Some(dev),
        tolerance: Some(CLOSED_FORM_TOL),
        detail: format!("max |closed form - RK4(step {})| over [0, {}]", cfg.step, cfg.t_end),
    });

    let microscopic = schedule.rules().iter().all(UpdateRule::has_microscopic_model);
    if microscopic {
        let burn_in = cfg.period.min(cfg.t_end);
        let pair = pair_samples(cfg, &schedule, x0)?;
        let start = pair
            .iter()
            .position(|(t, _)| *t >= burn_in)
            .unwrap_or(pair.len() - 1);
        let (t_b, s_b) = pair[start];
        let dev = max_deviation(
            pair[start..].iter().map(|(_, s)| s.x_c),
            pair[start..].iter().map(|(t, _)| {
                let lam = schedule.lambda(*t) - schedule.lambda(t_b);
                switchrep_core::switched::logistic(s_b.x_c, lam)
            }),
        );
        checks.push(Check {
            name: "pair_ode_vs_reduced",
            status: status(dev < PAIR_TOL),
            value: Some(dev),
            tolerance: Some(PAIR_TOL),
            detail: format!(
                "max |x_pair - x_reduced| over [{t_b}, {}], reduced model restarted at t = {t_b}",
                cfg.t_end
            ),
        });

        let horizon = DRIFT_PERIODS * cfg.period;
        let spec = sim_spec(cfg, &schedule, x0, horizon);
        let stats = run_ensemble(&spec, cfg.runs, cfg.seed, threads)?;
        let last = stats.times.len() - 1;
        let delta = stats.mean_x_c[last] - stats.mean_x_c[0];
        let se = stats.stderr_x_c(last);
        let expected = class.drift_sum.signum();
        let ok = match class.stable_point {
            StablePoint::Neutral => delta.abs() <= 3.0 * se,
            _ => delta.signum() == expected,
        };
        checks.push(Check {
            name: "agent_drift_sign",
            status: status(ok),
            value: Some(delta),
            tolerance: None,
            detail: format!(
                "mean change of x over {horizon} time units = {delta:.6}, standard error {se:.6}, z = {:.3}, expected sign {}",
                if se > 0.0 { delta / se } else { f64::NAN },
                expected
            ),
        });
    } else {
        for name in ["pair_ode_vs_reduced", "agent_drift_sign"] {
            checks.push(Check {
                name,
                status: CheckStatus::Skipped,
                value: None,
                tolerance: None,
                detail: "schedule contains custom coefficients without a microscopic model".into(),
            });
        }
    }

    let thresholds = match schedule.len() {
        2 => match critical_instant_two_rules(schedule.alphas()[0], schedule.alphas()[1], cfg.period) {
            Ok(p) => format!("critical t1 = {p}"),
            Err(_) => "degenerate: both rules have the same coefficient".into(),
        },
        m => format!("not applicable to {m} rules"),
    };
    let pass = checks.iter().all(|c| c.status != CheckStatus::Fail);
    Ok(ValidationReport {
        config: cfg.echo(),
        drift_sum: class.drift_sum,
        stable_point: class.stable_point.to_string(),
        note: (class.stable_point == StablePoint::Neutral).then(neutral_note),
        thresholds,
        checks,
        pass,
    })
}

fn status(ok: bool) -> CheckStatus {
    if ok {
        CheckStatus::Pass
    } else {
        CheckStatus::Fail
    }
}

fn max_deviation(a: impl Iterator<Item = f64>, b: impl Iterator<Item = f64>) -> f64 {
    a.zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn write_validation(
    w: &mut dyn Write,
    report: &ValidationReport,
    format: Format,
) -> std::io::Result<()> {
    match format {
        Format::Json => {
            writeln!(w, "{}", serde_json::to_string_pretty(report).expect("serializable"))
        }
        Format::Text => {
            writeln!(w, "drift_sum = {}", report.drift_sum)?;
            writeln!(w, "stable_point = {}", report.stable_point)?;
            writeln!(w, "thresholds: {}", report.thresholds)?;
            if let Some(n) = &report.note {
                writeln!(w, "note: {n}")?;
            }
            for c in &report.checks {
                writeln!(w, "{:?} {}: {}", c.status, c.name, c.detail)?;
            }
            writeln!(w, "{}", if report.pass { "PASS" } else { "FAIL" })
        }
        Format::Csv => Err(std::io::Error::new(
            std::io::ErrorKind::InvalidInput,
            "validate writes text or json",
        )),
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::InvalidParams(_)
            | CoreError::InvalidSchedule(_)
            | CoreError::InvalidDegreeSequence { .. }
            | CoreError::UnsupportedRule(_) => CliError::Config(e.to_string()),
            other => CliError::Numerical(other.to_string()),
        }
    }
}
