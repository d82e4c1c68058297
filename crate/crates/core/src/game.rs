//! Donation-form prisoner's dilemma on a k-regular graph.

use std::fmt;

use crate::error::{Error, Result};

/// Pure strategy of a single player.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Strategy {
    Cooperate,
    Defect,
}

impl Strategy {
    pub fn is_cooperator(self) -> bool {
        matches!(self, Strategy::Cooperate)
    }

    pub fn flipped(self) -> Self {
        match self {
            Strategy::Cooperate => Strategy::Defect,
            Strategy::Defect => Strategy::Cooperate,
        }
    }
}

/// Game and network parameters shared by every engine.
///
/// `omega` is the selection strength. The replicator coefficients returned by
/// [`UpdateRule::alpha`] are first order in `omega`, so they describe the
/// microscopic models only for `omega << 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GameParams {
    pub omega: f64,
    pub degree: usize,
    pub benefit: f64,
    pub cost: f64,
}

impl GameParams {
    pub fn new(omega: f64, degree: usize, benefit: f64, cost: f64) -> Result<Self> {
        let p = Self {
            omega,
            degree,
            benefit,
            cost,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.degree <= 2 {
            return Err(Error::InvalidParams(format!(
                "degree must exceed 2, got {}",
                self.degree
            )));
        }
        if !(self.cost > 0.0 && self.cost < self.benefit) || !self.benefit.is_finite() {
            return Err(Error::InvalidParams(format!(
                "need 0 < cost < benefit, got cost = {}, benefit = {}",
                self.cost, self.benefit
            )));
        }
        if !(0.0..=1.0).contains(&self.omega) {
            return Err(Error::InvalidParams(format!(
                "selection strength must lie in [0, 1], got {}",
                self.omega
            )));
        }
        Ok(())
    }

    pub fn payoff_matrix(&self) -> PayoffMatrix {
        PayoffMatrix::new(self.benefit, self.cost)
    }

    pub(crate) fn k(&self) -> f64 {
        self.degree as f64
    }
}

/// Row player's payoff for each pairing.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PayoffMatrix {
    pub cc: f64,
    pub cd: f64,
    pub dc: f64,
    pub dd: f64,
}

impl PayoffMatrix {
    pub fn new(benefit: f64, cost: f64) -> Self {
        Self {
            cc: benefit - cost,
            cd: -cost,
            dc: benefit,
            dd: 0.0,
        }
    }

    pub fn payoff(&self, me: Strategy, other: Strategy) -> f64 {
        use Strategy::*;
        match (me, other) {
            (Cooperate, Cooperate) => self.cc,
            (Cooperate, Defect) => self.cd,
            (Defect, Cooperate) => self.dc,
            (Defect, Defect) => self.dd,
        }
    }

    /// Sum of pairwise payoffs of `me` against every neighbor.
    pub fn accumulated_payoff<I>(&self, me: Strategy, neighbors: I) -> f64
    where
        I: IntoIterator<Item = Strategy>,
    {
        neighbors.into_iter().map(|s| self.payoff(me, s)).sum()
    }
}

/// `g = 1 - omega + omega * payoff`.
pub fn fitness(payoff: f64, omega: f64) -> f64 {
    1.0 - omega + omega * payoff
}

/// PC replicator coefficient, `-omega k (k-2) c / (2 (k-1))`.
pub fn coefficient_pc(p: &GameParams) -> Result<f64> {
    p.validate()?;
    let k = p.k();
    Ok(-p.omega * k * (k - 2.0) * p.cost / (2.0 * (k - 1.0)))
}

/// IM replicator coefficient, `omega k^2 (k-2) [b - (k+2) c] / ((k+1)^2 (k-1))`.
///
/// Positive exactly when `b > (k+2) c`.
pub fn coefficient_im(p: &GameParams) -> Result<f64> {
    p.validate()?;
    let k = p.k();
    let margin = p.benefit - (k + 2.0) * p.cost;
    Ok(p.omega * k * k * (k - 2.0) * margin / ((k + 1.0) * (k + 1.0) * (k - 1.0)))
}

/// A strategy update rule together with the way its replicator coefficient
/// is obtained.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum UpdateRule {
    /// Pairwise comparison with the Fermi adoption probability.
    PairwiseComparison,
    /// Imitation proportional to fitness, including the focal player.
    Imitation,
    /// A rule known only through its coefficient.
    Custom(f64),
}

impl UpdateRule {
    pub fn alpha(&self, p: &GameParams) -> Result<f64> {
        match *self {
            UpdateRule::PairwiseComparison => coefficient_pc(p),
            UpdateRule::Imitation => coefficient_im(p),
            UpdateRule::Custom(a) if a.is_finite() => Ok(a),
            UpdateRule::Custom(a) => Err(Error::InvalidParams(format!(
                "custom coefficient must be finite, got {a}"
            ))),
        }
    }

    pub fn has_microscopic_model(&self) -> bool {
        !matches!(self, UpdateRule::Custom(_))
    }
}

impl fmt::Display for UpdateRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UpdateRule::PairwiseComparison => f.write_str("pc"),
            UpdateRule::Imitation => f.write_str("im"),
            UpdateRule::Custom(a) => write!(f, "{a}"),
        }
    }
}
