//! Periodically switched replicator system.
//!
//! Within one period `[θT, (θ+1)T)` the rules are activated in a fixed
//! order, rule `i` on `[θT + t_{i-1}, θT + t_i)`. Every subsystem is a
//! logistic equation `dx/dt = α_i x (1 - x)`, so the switched trajectory is
//!
//! ```text
//! x(t) = 1 / (1 + (1 - x0) / x0 * exp(-Λ(t)))
//! ```
//!
//! where `Λ(t)` integrates the active coefficient over `[0, t]`. Each full
//! period adds the drift sum `S = Σ α_i Δt_i` to `Λ`, which is what decides
//! the asymptotics.

use std::fmt;

use itertools::Itertools;

use crate::error::{Error, Result};
use crate::game::{GameParams, UpdateRule};

/// Activation sequence, switching instants and period of a switching signal.
#[derive(Clone, Debug, PartialEq)]
pub struct SwitchSchedule {
    rules: Vec<UpdateRule>,
    alphas: Vec<f64>,
    /// `t_0 = 0, t_1, ..., t_m = T`.
    bounds: Vec<f64>,
    /// `Λ` accumulated at the start of each window within one period.
    window_offsets: Vec<f64>,
    drift: f64,
}

/// The window of the switching signal containing a given time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ActiveWindow {
    /// Zero-based position in the activation sequence.
    pub index: usize,
    /// Period counter θ.
    pub cycle: u64,
    /// Absolute window start `θT + t_{i-1}`.
    pub start: f64,
    /// Absolute window end `θT + t_i` (exclusive).
    pub end: f64,
}

impl SwitchSchedule {
    /// Resolve each rule's coefficient from `params`.
    ///
    /// `instants` holds the interior switching instants `t_1 < ... < t_{m-1}`;
    /// its length must be one less than the number of rules.
    pub fn new(
        rules: Vec<UpdateRule>,
        instants: &[f64],
        period: f64,
        params: &GameParams,
    ) -> Result<Self> {
        let alphas = rules
            .iter()
            .map(|r| r.alpha(params))
            .collect::<Result<Vec<_>>>()?;
        Self::build(rules, alphas, instants, period)
    }

    /// Schedule over rules known only through their coefficients.
    pub fn from_alphas(alphas: &[f64], instants: &[f64], period: f64) -> Result<Self> {
        let rules = alphas.iter().map(|&a| UpdateRule::Custom(a)).collect();
        Self::build(rules, alphas.to_vec(), instants, period)
    }

    fn build(
        rules: Vec<UpdateRule>,
        alphas: Vec<f64>,
        instants: &[f64],
        period: f64,
    ) -> Result<Self> {
        let m = alphas.len();
        if m == 0 {
            return Err(Error::InvalidSchedule("at least one rule is required".into()));
        }
        if instants.len() + 1 != m {
            return Err(Error::InvalidSchedule(format!(
                "{m} rules need {} switching instants, got {}",
                m - 1,
                instants.len()
            )));
        }
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::InvalidSchedule(format!(
                "period must be positive and finite, got {period}"
            )));
        }
        if let Some(a) = alphas.iter().find(|a| !a.is_finite()) {
            return Err(Error::InvalidSchedule(format!("coefficient {a} is not finite")));
        }
        let mut bounds = Vec::with_capacity(m + 1);
        bounds.push(0.0);
        bounds.extend_from_slice(instants);
        bounds.push(period);
        for (i, w) in bounds.windows(2).enumerate() {
            if !w[1].is_finite() || w[1] <= w[0] {
                return Err(Error::InvalidSchedule(format!(
                    "switching instants must satisfy 0 < t_1 < ... < t_{{m-1}} < T; \
                     window {} is [{}, {})",
                    i + 1,
                    w[0],
                    w[1]
                )));
            }
        }

        let mut window_offsets = Vec::with_capacity(m);
        let mut acc = 0.0;
        for (a, w) in alphas.iter().zip(bounds.windows(2)) {
            window_offsets.push(acc);
            acc += a * (w[1] - w[0]);
        }

        Ok(Self {
            rules,
            alphas,
            bounds,
            window_offsets,
            drift: acc,
        })
    }

    pub fn rules(&self) -> &[UpdateRule] {
        &self.rules
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    /// Interior switching instants `t_1, ..., t_{m-1}`.
    pub fn instants(&self) -> &[f64] {
        &self.bounds[1..self.bounds.len() - 1]
    }

    /// Window boundaries `t_0 = 0, ..., t_m = T` within the first period.
    pub fn bounds(&self) -> &[f64] {
        &self.bounds
    }

    pub fn period(&self) -> f64 {
        *self.bounds.last().expect("bounds hold at least two entries")
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    /// Activation durations `Δt_i`.
    pub fn durations(&self) -> Vec<f64> {
        self.bounds.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Periodic drift sum `S = Σ α_i Δt_i`.
    pub fn drift_sum(&self) -> f64 {
        self.drift
    }

    /// Same schedule with the activation sequence rotated left by `shift`
    /// positions and the durations carried along.
    pub fn rotated(&self, shift: usize) -> Self {
        let m = self.len();
        let shift = shift % m;
        let durations = self.durations();
        let order: Vec<usize> = (0..m).map(|i| (i + shift) % m).collect();
        let rules = order.iter().map(|&i| self.rules[i]).collect();
        let alphas = order.iter().map(|&i| self.alphas[i]).collect();
        let mut instants = Vec::with_capacity(m - 1);
        let mut acc = 0.0;
        for &i in &order[..m - 1] {
            acc += durations[i];
            instants.push(acc);
        }
        Self::build(rules, alphas, &instants, self.period())
            .expect("rotation of a valid schedule is valid")
    }

    /// Right-continuous switching signal: the window `[θT + t_{i-1}, θT + t_i)`
    /// containing `t`.
    pub fn signal_at(&self, t: f64) -> ActiveWindow {
        let period = self.period();
        let mut cycle = (t / period).floor().max(0.0);
        let mut local = t - cycle * period;
        if local >= period {
            cycle += 1.0;
            local -= period;
        }
        let local = local.max(0.0);
        let m = self.len();
        let index = self.bounds[1..m].partition_point(|&b| b <= local);
        let base = cycle * period;
        ActiveWindow {
            index,
            cycle: cycle as u64,
            start: base + self.bounds[index],
            end: base + self.bounds[index + 1],
        }
    }

    /// Window following `w`, wrapping into the next period after the last rule.
    pub fn next_window(&self, w: &ActiveWindow) -> ActiveWindow {
        let (index, cycle) = if w.index + 1 == self.len() {
            (0, w.cycle + 1)
        } else {
            (w.index + 1, w.cycle)
        };
        let base = cycle as f64 * self.period();
        ActiveWindow {
            index,
            cycle,
            start: base + self.bounds[index],
            end: base + self.bounds[index + 1],
        }
    }

    /// `Λ(t) = ∫_0^t α_{σ(s)} ds`, so that `x(t)` is the logistic of `Λ(t)`.
    pub fn lambda(&self, t: f64) -> f64 {
        let w = self.signal_at(t);
        let period_start = w.cycle as f64 * self.period();
        let local = t - period_start;
        w.cycle as f64 * self.drift
            + self.window_offsets[w.index]
            + self.alphas[w.index] * (local - self.bounds[w.index])
    }

    /// Exact cooperator fraction at time `t` from the initial fraction `x0`.
    pub fn trajectory_at(&self, x0: f64, t: f64) -> f64 {
        logistic(x0, self.lambda(t))
    }

    /// `(t, x(t))` on the grid `0, dt, 2 dt, ...` up to and including `t_end`.
    pub fn sample(&self, x0: f64, t_end: f64, dt: f64) -> Vec<(f64, f64)> {
        time_grid(t_end, dt)
            .map(|t| (t, self.trajectory_at(x0, t)))
            .collect()
    }

    pub fn classify(&self) -> Classification {
        let scale: f64 = self
            .alphas
            .iter()
            .zip(self.durations())
            .map(|(a, d)| (a * d).abs())
            .sum();
        let s = self.drift;
        let stable_point = if s.abs() <= 8.0 * f64::EPSILON * scale {
            StablePoint::Neutral
        } else if s > 0.0 {
            StablePoint::FullCooperation
        } else {
            StablePoint::FullDefection
        };
        Classification {
            drift_sum: s,
            stable_point,
        }
    }

    /// `x(θT + t_v)` for `θ = 0..=theta_max`.
    pub fn boundary_sequence(&self, x0: f64, v: usize, theta_max: u64) -> Vec<f64> {
        assert!(v < self.len(), "window index {v} out of range");
        let t_v = self.bounds[v];
        (0..=theta_max)
            .map(|theta| {
                let lam = theta as f64 * self.drift + self.window_offsets[v];
                debug_assert!((t_v >= 0.0) && (t_v < self.period()));
                logistic(x0, lam)
            })
            .collect()
    }

    /// Minimum and maximum of `x` over the closed period `[θT, (θ+1)T]`.
    ///
    /// Every subsystem is monotone, so the extremes sit on window boundaries.
    pub fn period_extrema(&self, x0: f64, theta: u64) -> (f64, f64) {
        let base = theta as f64 * self.drift;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for lam in self.window_offsets.iter().chain(std::iter::once(&self.drift)) {
            let x = logistic(x0, base + lam);
            lo = lo.min(x);
            hi = hi.max(x);
        }
        (lo, hi)
    }

    /// Smallest period count θ with `|x(θT) - limit| < tol`, inverted
    /// analytically from the logistic. `None` when the drift sum is neutral.
    pub fn convergence_cycle(&self, x0: f64, tol: f64) -> Option<u64> {
        let class = self.classify();
        let limit = class.stable_point.limit()?;
        let reached = |theta: u64| (logistic(x0, theta as f64 * self.drift) - limit).abs() < tol;
        if reached(0) {
            return Some(0);
        }
        if x0 <= 0.0 || x0 >= 1.0 {
            // Stuck on the other boundary equilibrium.
            return None;
        }
        let r = (1.0 - x0) / x0;
        // Λ needed: x > 1 - tol  <=>  Λ > ln(r (1 - tol) / tol)
        //           x < tol      <=>  Λ < -ln((1 - tol) / (tol r))
        let needed = match class.stable_point {
            StablePoint::FullCooperation => (r * (1.0 - tol) / tol).ln(),
            _ => -((1.0 - tol) / (tol * r)).ln(),
        };
        let guess = (needed / self.drift).floor().max(0.0) as u64;
        let mut theta = guess.saturating_sub(1);
        while !reached(theta) {
            theta += 1;
        }
        while theta > 0 && reached(theta - 1) {
            theta -= 1;
        }
        Some(theta)
    }
}

/// `1 / (1 + (1 - x0)/x0 * e^{-Λ})`, evaluated without overflow. The boundary
/// equilibria are returned unchanged.
pub fn logistic(x0: f64, lambda: f64) -> f64 {
    if x0 <= 0.0 {
        return 0.0;
    }
    if x0 >= 1.0 {
        return 1.0;
    }
    let r = (1.0 - x0) / x0;
    if lambda >= 0.0 {
        1.0 / (1.0 + r * (-lambda).exp())
    } else {
        let e = lambda.exp();
        e / (e + r)
    }
}

pub(crate) fn time_grid(t_end: f64, dt: f64) -> impl Iterator<Item = f64> {
    let steps = (t_end / dt + 1e-9).floor() as u64;
    (0..=steps).map(move |j| j as f64 * dt)
}

/// Switching instant `t_1` at which a two-rule schedule changes the sign of
/// its drift sum: `α_2 T / (α_2 - α_1)`.
///
/// The result is a usable instant only when it lies in `(0, T)`.
pub fn critical_instant_two_rules(alpha1: f64, alpha2: f64, period: f64) -> Result<f64> {
    if alpha1 == alpha2 {
        return Err(Error::Degenerate(alpha1));
    }
    Ok(alpha2 * period / (alpha2 - alpha1))
}

/// All `m!` orderings of the given rules.
pub fn activation_sequences<T: Clone>(rules: &[T]) -> Vec<Vec<T>> {
    rules.iter().cloned().permutations(rules.len()).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StablePoint {
    FullCooperation,
    FullDefection,
    /// Zero drift sum: every trajectory is periodic and neither boundary
    /// equilibrium attracts.
    Neutral,
}

impl StablePoint {
    pub fn limit(self) -> Option<f64> {
        match self {
            StablePoint::FullCooperation => Some(1.0),
            StablePoint::FullDefection => Some(0.0),
            StablePoint::Neutral => None,
        }
    }
}

impl fmt::Display for StablePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StablePoint::FullCooperation => "FullCooperation",
            StablePoint::FullDefection => "FullDefection",
            StablePoint::Neutral => "Neutral",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Classification {
    pub drift_sum: f64,
    pub stable_point: StablePoint,
}

impl Classification {
    /// Both boundary points are always equilibria.
    pub const EQUILIBRIA: [f64; 2] = [0.0, 1.0];
}
