//! WebAssembly bindings behind `www/index.html`.
//!
//! Curves are returned as flat `Float64Array`s of `(t, value...)` records.

use switchrep_core::game::{coefficient_im, coefficient_pc};
use switchrep_core::ode::StepConfig;
use switchrep_core::pair_approx::integrate_switched_pair;
use switchrep_core::switched::critical_instant_two_rules;
use switchrep_core::{GameParams, PairState, SwitchSchedule, UpdateRule};
use wasm_bindgen::prelude::*;

const PAIR_STEP: f64 = 0.01;

fn params(omega: f64, degree: u32, benefit: f64, cost: f64) -> Result<GameParams, String> {
    GameParams::new(omega, degree as usize, benefit, cost).map_err(|e| e.to_string())
}

fn parse_rules(rules: &str) -> Result<Vec<UpdateRule>, String> {
    rules
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| match s.to_ascii_lowercase().as_str() {
            "pc" => Ok(UpdateRule::PairwiseComparison),
            "im" => Ok(UpdateRule::Imitation),
            other => other
                .parse()
                .map(UpdateRule::Custom)
                .map_err(|_| format!("unknown rule '{s}'")),
        })
        .collect()
}

fn parse_instants(instants: &str) -> Result<Vec<f64>, String> {
    instants
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| format!("invalid instant '{s}'")))
        .collect()
}

/// Everything needed to build a schedule, as typed into the page.
#[derive(Clone, Debug)]
pub struct Setup {
    pub params: GameParams,
    pub schedule: SwitchSchedule,
}

pub fn setup(
    omega: f64,
    degree: u32,
    benefit: f64,
    cost: f64,
    rules: &str,
    instants: &str,
    period: f64,
) -> Result<Setup, String> {
    let params = params(omega, degree, benefit, cost)?;
    let schedule = SwitchSchedule::new(parse_rules(rules)?, &parse_instants(instants)?, period, &params)
        .map_err(|e| e.to_string())?;
    Ok(Setup { params, schedule })
}

/// `[alpha_pc, alpha_im, p1, p2]`; a threshold is NaN when the coefficients coincide.
pub fn summary(omega: f64, degree: u32, benefit: f64, cost: f64, period: f64) -> Result<Vec<f64>, String> {
    let p = params(omega, degree, benefit, cost)?;
    let a_pc = coefficient_pc(&p).map_err(|e| e.to_string())?;
    let a_im = coefficient_im(&p).map_err(|e| e.to_string())?;
    let p1 = critical_instant_two_rules(a_pc, a_im, period).unwrap_or(f64::NAN);
    let p2 = critical_instant_two_rules(a_im, a_pc, period).unwrap_or(f64::NAN);
    Ok(vec![a_pc, a_im, p1, p2])
}

pub fn closed_form(s: &Setup, x0: f64, t_end: f64, dt: f64) -> Vec<f64> {
    s.schedule
        .sample(x0, t_end, dt)
        .into_iter()
        .flat_map(|(t, x)| [t, x])
        .collect()
}

pub fn pair_curve(s: &Setup, x0: f64, x_cc0: f64, t_end: f64, dt: f64) -> Result<Vec<f64>, String> {
    let start = if x_cc0.is_nan() {
        PairState::on_manifold(x0, s.params.degree)
    } else {
        PairState::new(x0, x_cc0)
    };
    let traj = integrate_switched_pair(start, &s.schedule, &s.params, StepConfig::new(t_end, PAIR_STEP, dt))
        .map_err(|e| e.to_string())?;
    Ok(traj
        .samples
        .into_iter()
        .flat_map(|(t, st)| [t, st.x_c, st.x_c_given_c])
        .collect())
}

fn js(e: String) -> JsValue {
    JsValue::from_str(&e)
}

/// Replicator coefficients and critical switching instants.
#[wasm_bindgen(js_name = coefficients)]
pub fn js_coefficients(omega: f64, degree: u32, benefit: f64, cost: f64, period: f64) -> Result<Vec<f64>, JsValue> {
    summary(omega, degree, benefit, cost, period).map_err(js)
}

/// Closed-form trajectory, `[t0, x0, t1, x1, ...]`.
#[wasm_bindgen(js_name = closedFormCurve)]
#[allow(clippy::too_many_arguments)]
pub fn js_closed_form(
    omega: f64,
    degree: u32,
    benefit: f64,
    cost: f64,
    rules: &str,
    instants: &str,
    period: f64,
    x0: f64,
    t_end: f64,
    dt: f64,
) -> Result<Vec<f64>, JsValue> {
    let s = setup(omega, degree, benefit, cost, rules, instants, period).map_err(js)?;
    Ok(closed_form(&s, x0, t_end, dt))
}

/// Pair-approximation trajectory, `[t, x, x_cc, ...]`. Pass `NaN` for
/// `x_cc0` to start on the slow manifold.
#[wasm_bindgen(js_name = pairCurve)]
#[allow(clippy::too_many_arguments)]
pub fn js_pair_curve(
    omega: f64,
    degree: u32,
    benefit: f64,
    cost: f64,
    rules: &str,
    instants: &str,
    period: f64,
    x0: f64,
    x_cc0: f64,
    t_end: f64,
    dt: f64,
) -> Result<Vec<f64>, JsValue> {
    let s = setup(omega, degree, benefit, cost, rules, instants, period).map_err(js)?;
    pair_curve(&s, x0, x_cc0, t_end, dt).map_err(js)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_of_default_parameters() {
        let v = summary(0.01, 4, 2.0, 0.2, 5.0).unwrap();
        assert!((v[0] + 1.0 / 375.0).abs() < 1e-15);
        assert!((v[1] - 32.0 / 9375.0).abs() < 1e-15);
        assert!((v[2] - 32.0 / 11.4).abs() < 1e-12);
        assert!((v[3] - 25.0 / 11.4).abs() < 1e-12);
    }

    #[test]
    fn curves_have_expected_layout() {
        let s = setup(0.01, 4, 2.0, 0.2, "pc, im", "2", 5.0).unwrap();
        let c = closed_form(&s, 0.5, 10.0, 0.5);
        assert_eq!(c.len(), 2 * 21);
        assert_eq!(c[0], 0.0);
        assert_eq!(c[1], 0.5);
        let p = pair_curve(&s, 0.5, f64::NAN, 10.0, 0.5).unwrap();
        assert_eq!(p.len(), 3 * 21);
        assert_eq!(p[1], 0.5);
        assert!((p[2] - 2.0 / 3.0).abs() < 1e-15);
        assert!((p[p.len() - 2] - c[c.len() - 1]).abs() < 1e-3);
    }

    #[test]
    fn bad_input_is_reported() {
        assert!(setup(0.01, 2, 2.0, 0.2, "pc,im", "2", 5.0).is_err());
        assert!(setup(0.01, 4, 2.0, 0.2, "pc,xx", "2", 5.0).is_err());
        assert!(setup(0.01, 4, 2.0, 0.2, "pc,im", "7", 5.0).is_err());
        let s = setup(0.01, 4, 2.0, 0.2, "pc,0.001", "2", 5.0).unwrap();
        assert!(pair_curve(&s, 0.5, f64::NAN, 1.0, 0.5).is_err());
    }
}
