//! Fixed-step classical RK4 for autonomous systems driven by a switching
//! signal.
//!
//! Steps never straddle a switching instant or a sample time: the step is
//! shortened to land on them exactly, so the active rule is constant over
//! every step and output is reproducible bit for bit.

use crate::error::Result;
use crate::switched::SwitchSchedule;

/// One RK4 step of `dy/dt = f(y)`.
pub fn rk4_step<const N: usize, F>(f: F, y: &[f64; N], h: f64) -> Result<[f64; N]>
where
    F: Fn(&[f64; N]) -> Result<[f64; N]>,
{
    let shifted = |base: &[f64; N], k: &[f64; N], scale: f64| {
        let mut out = *base;
        for (o, ki) in out.iter_mut().zip(k) {
            *o += scale * ki;
        }
        out
    };
    let k1 = f(y)?;
    let k2 = f(&shifted(y, &k1, 0.5 * h))?;
    let k3 = f(&shifted(y, &k2, 0.5 * h))?;
    let k4 = f(&shifted(y, &k3, h))?;
    let mut next = *y;
    for i in 0..N {
        next[i] += h * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) / 6.0;
    }
    Ok(next)
}

/// Integration settings shared by the ODE engines.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepConfig {
    pub t_end: f64,
    /// Maximal RK4 step.
    pub step: f64,
    /// Output grid spacing.
    pub sample_dt: f64,
}

impl StepConfig {
    pub fn new(t_end: f64, step: f64, sample_dt: f64) -> Self {
        Self {
            t_end,
            step,
            sample_dt,
        }
    }
}

/// Integrate `dy/dt = field(rule_index, y)` under the switching signal of
/// `schedule` and return `y` on the sample grid `0, dt, 2 dt, ... <= t_end`.
///
/// `after_step(t, previous, next)` runs after every accepted step and may
/// modify the new state (for example to project it back into its domain).
pub fn integrate_switched<const N: usize, F, G>(
    schedule: &SwitchSchedule,
    y0: [f64; N],
    cfg: StepConfig,
    field: F,
    mut after_step: G,
) -> Result<Vec<(f64, [f64; N])>>
where
    F: Fn(usize, &[f64; N]) -> Result<[f64; N]>,
    G: FnMut(f64, &[f64; N], &mut [f64; N]) -> Result<()>,
{
    assert!(cfg.step > 0.0 && cfg.sample_dt > 0.0, "step sizes must be positive");
    let n_samples = (cfg.t_end / cfg.sample_dt + 1e-9).floor() as u64;
    let mut out = Vec::with_capacity(n_samples as usize + 1);
    out.push((0.0, y0));

    let mut y = y0;
    let mut t = 0.0;
    let mut window = schedule.signal_at(0.0);
    for j in 1..=n_samples {
        let sample_t = j as f64 * cfg.sample_dt;
        while t < sample_t {
            if t >= window.end {
                window = schedule.next_window(&window);
                continue;
            }
            let target = sample_t.min(window.end);
            let remaining = target - t;
            let (h, landing) = if remaining <= cfg.step * (1.0 + 1e-9) {
                (remaining, true)
            } else {
                (cfg.step, false)
            };
            let rule = window.index;
            let mut next = rk4_step(|s| field(rule, s), &y, h)?;
            t = if landing { target } else { t + h };
            after_step(t, &y, &mut next)?;
            y = next;
        }
        out.push((sample_t, y));
    }
    Ok(out)
}

/// Numerical solution of the switched replicator equation
/// `dx/dt = α_{σ(t)} x (1 - x)`.
pub fn integrate_reduced(
    schedule: &SwitchSchedule,
    x0: f64,
    cfg: StepConfig,
) -> Result<Vec<(f64, f64)>> {
    let alphas = schedule.alphas();
    let samples = integrate_switched(
        schedule,
        [x0],
        cfg,
        |i, y| Ok([alphas[i] * y[0] * (1.0 - y[0])]),
        |_, _, _| Ok(()),
    )?;
    Ok(samples.into_iter().map(|(t, y)| (t, y[0])).collect())
}
