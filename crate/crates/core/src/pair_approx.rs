//! Pair approximation of PC and IM updating on a k-regular graph.
//!
//! The state is the cooperator fraction `x_c` together with the conditional
//! probability `x_{C|C}` that a neighbor of a cooperator cooperates. Both
//! systems have the form
//!
//! ```text
//! dx_c/dt      = ω Ψ(x_c, x_{C|C})      (slow)
//! dx_{C|C}/dt  = Φ(x_c, x_{C|C})        (fast)
//! ```
//!
//! with leading-order (in ω) right-hand sides. `Φ` vanishes on the line
//! `x_{C|C} = 1/(k-1) + (k-2)/(k-1) x_c` for both rules; on that line `Ψ`
//! collapses to the logistic drift of [`crate::game::coefficient_pc`] and
//! [`crate::game::coefficient_im`].
//!
//! Derivation note for the IM drift: its bracket reads
//!
//! ```text
//! -2(kc + b) + (k-1) q [ b (2 + (k-1) w) - k (k-1) c w ]
//! q = (x_{C|C} - x_c) / (1 - x_c),   w = (1 - 2 x_c + x_{C|C}) / (1 - x_c)
//! ```
//!
//! The cost term sits outside the benefit factor. This is the only grouping
//! under which every term carries payoff units and the drift restricted to
//! the slow manifold (`q = 1/(k-1)`, `w = k/(k-1)`) reduces to
//! `k [b - (k+2) c]`, the imitation coefficient.

use crate::error::{Error, Result};
use crate::game::{GameParams, UpdateRule};
use crate::ode::{integrate_switched, StepConfig};
use crate::switched::SwitchSchedule;

/// Below this distance from `x_c = 1` the fields use their boundary limit.
const SINGULAR_EPS: f64 = 1e-12;

/// A point of the pair-approximation phase plane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairState {
    pub x_c: f64,
    /// Conditional probability `x_{C|C}`.
    pub x_c_given_c: f64,
}

/// Every singlet, pair and conditional frequency implied by a [`PairState`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairFrequencies {
    pub x_d: f64,
    pub x_d_given_c: f64,
    pub x_c_given_d: f64,
    pub x_d_given_d: f64,
    pub x_cc: f64,
    /// `x_{CD} = x_{DC}`.
    pub x_cd: f64,
    pub x_dd: f64,
}

impl PairState {
    pub fn new(x_c: f64, x_c_given_c: f64) -> Self {
        Self { x_c, x_c_given_c }
    }

    /// State on the slow manifold above `x_c`.
    pub fn on_manifold(x_c: f64, degree: usize) -> Self {
        Self::new(x_c, slow_manifold(x_c, degree))
    }

    /// Whether the state and every derived frequency lie in `[0, 1]`.
    pub fn is_admissible(&self) -> bool {
        let (x, y) = (self.x_c, self.x_c_given_c);
        (0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y) && x * (1.0 - y) <= 1.0 - x
    }

    pub fn closure(&self) -> Result<PairFrequencies> {
        let (x, y) = (self.x_c, self.x_c_given_c);
        if 1.0 - x <= 0.0 {
            return Err(Error::SingularState { x_c: x, x_cc: y });
        }
        let x_d = 1.0 - x;
        let x_cd = x * (1.0 - y);
        let x_c_given_d = x_cd / x_d;
        Ok(PairFrequencies {
            x_d,
            x_d_given_c: 1.0 - y,
            x_c_given_d,
            x_d_given_d: 1.0 - x_c_given_d,
            x_cc: x * y,
            x_cd,
            x_dd: 1.0 - 2.0 * x + x * y,
        })
    }
}

/// `x_{C|C} = 1/(k-1) + (k-2)/(k-1) x_c`.
pub fn slow_manifold(x_c: f64, degree: usize) -> f64 {
    let k = degree as f64;
    1.0 / (k - 1.0) + (k - 2.0) / (k - 1.0) * x_c
}

/// Microscopic update rule driving a pair-approximation field.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairRule {
    Pc,
    Im,
}

impl TryFrom<UpdateRule> for PairRule {
    type Error = Error;

    fn try_from(rule: UpdateRule) -> Result<Self> {
        match rule {
            UpdateRule::PairwiseComparison => Ok(PairRule::Pc),
            UpdateRule::Imitation => Ok(PairRule::Im),
            other => Err(Error::UnsupportedRule(other.to_string())),
        }
    }
}

/// The two-dimensional pair-approximation vector field of one rule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VectorField {
    pub rule: PairRule,
    pub params: GameParams,
}

impl VectorField {
    pub fn new(rule: PairRule, params: GameParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { rule, params })
    }

    /// `(dx_c/dt, dx_{C|C}/dt)`.
    pub fn eval(&self, s: &PairState) -> Result<[f64; 2]> {
        match self.rule {
            PairRule::Pc => field_pc(s, &self.params),
            PairRule::Im => field_im(s, &self.params),
        }
    }
}

/// `q = (x_{C|C} - x_c)/(1 - x_c)`, or `None` at the cooperative corner where
/// both fields vanish.
fn neighbor_excess(s: &PairState) -> Result<Option<f64>> {
    let (x, y) = (s.x_c, s.x_c_given_c);
    if 1.0 - x < SINGULAR_EPS {
        if y >= x {
            return Ok(None);
        }
        return Err(Error::SingularState { x_c: x, x_cc: y });
    }
    Ok(Some((y - x) / (1.0 - x)))
}

pub fn field_pc(s: &PairState, p: &GameParams) -> Result<[f64; 2]> {
    let Some(q) = neighbor_excess(s)? else {
        return Ok([0.0, 0.0]);
    };
    let (x, y) = (s.x_c, s.x_c_given_c);
    let k = p.k();
    let (b, c) = (p.benefit, p.cost);
    let psi = 0.5 * x * (1.0 - y) * ((k - 1.0) * b * q - k * c - b);
    let phi = (1.0 - y) / k * (1.0 - (k - 1.0) * q);
    Ok([p.omega * psi, phi])
}

pub fn field_im(s: &PairState, p: &GameParams) -> Result<[f64; 2]> {
    let Some(q) = neighbor_excess(s)? else {
        return Ok([0.0, 0.0]);
    };
    let (x, y) = (s.x_c, s.x_c_given_c);
    let k = p.k();
    let (b, c) = (p.benefit, p.cost);
    let w = (1.0 - 2.0 * x + y) / (1.0 - x);
    let inner = b * (2.0 + (k - 1.0) * w) - k * (k - 1.0) * c * w;
    let bracket = -2.0 * (k * c + b) + (k - 1.0) * q * inner;
    let psi = k * x * (1.0 - y) / ((k + 1.0) * (k + 1.0)) * bracket;
    let phi = 2.0 * (1.0 - y) / (k + 1.0) * (1.0 - (k - 1.0) * q);
    Ok([p.omega * psi, phi])
}

/// Sampled output of [`integrate_switched_pair`].
#[derive(Clone, Debug, PartialEq)]
pub struct PairTrajectory {
    pub samples: Vec<(f64, PairState)>,
    /// Largest correction applied when projecting a step back into the
    /// admissible box.
    pub max_clamp: f64,
}

/// Largest per-step change of either component before the step is rejected.
pub const MAX_STEP_CHANGE: f64 = 0.1;

/// Integrate the pair-approximation system under a PC/IM switching schedule.
pub fn integrate_switched_pair(
    initial: PairState,
    schedule: &SwitchSchedule,
    params: &GameParams,
    cfg: StepConfig,
) -> Result<PairTrajectory> {
    if !initial.is_admissible() {
        return Err(Error::InvalidParams(format!(
            "initial pair state {initial:?} is outside the admissible region"
        )));
    }
    let fields = schedule
        .rules()
        .iter()
        .map(|&r| VectorField::new(PairRule::try_from(r)?, *params))
        .collect::<Result<Vec<_>>>()?;

    let mut max_clamp = 0.0f64;
    let samples = integrate_switched(
        schedule,
        [initial.x_c, initial.x_c_given_c],
        cfg,
        |i, y| fields[i].eval(&PairState::new(y[0], y[1])),
        |t, prev, next| {
            let delta = (next[0] - prev[0]).abs().max((next[1] - prev[1]).abs());
            if delta.is_nan() || delta > MAX_STEP_CHANGE {
                return Err(Error::StepTooLarge { t, delta });
            }
            max_clamp = max_clamp.max(project_admissible(next));
            Ok(())
        },
    )?;
    Ok(PairTrajectory {
        samples: samples
            .into_iter()
            .map(|(t, y)| (t, PairState::new(y[0], y[1])))
            .collect(),
        max_clamp,
    })
}

/// Clamp `[x_c, x_{C|C}]` into the admissible region and return the size of
/// the correction.
fn project_admissible(y: &mut [f64; 2]) -> f64 {
    let before = *y;
    y[0] = y[0].clamp(0.0, 1.0);
    y[1] = y[1].clamp(0.0, 1.0);
    // x_{C|D} <= 1  <=>  x_{C|C} >= 1 - (1 - x_c)/x_c
    if y[0] > 0.5 {
        let lower = 1.0 - (1.0 - y[0]) / y[0];
        if y[1] < lower {
            y[1] = lower;
        }
    }
    (y[0] - before[0]).abs().max((y[1] - before[1]).abs())
}
