use serde::{Deserialize, Serialize};

use crate::dataset::Marginals;
use crate::error::{Error, Result};

/// Exponential rate schedule `β(t) = α γ^t ln γ` on `[0, horizon]`, walked
/// in `steps` equal increments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSchedule {
    pub alpha: f64,
    pub gamma: f64,
    pub horizon: f64,
    pub steps: usize,
}

impl Default for NoiseSchedule {
    fn default() -> Self {
        Self {
            alpha: 0.8,
            gamma: 2.0,
            horizon: 1.0,
            steps: 100,
        }
    }
}

impl NoiseSchedule {
    pub fn new(alpha: f64, gamma: f64, horizon: f64, steps: usize) -> Result<Self> {
        let s = Self {
            alpha,
            gamma,
            horizon,
            steps,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) {
            return Err(Error::invalid("schedule alpha must be positive"));
        }
        if !(self.gamma > 1.0) {
            return Err(Error::invalid("schedule gamma must exceed 1"));
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(Error::invalid("schedule horizon must be positive"));
        }
        if self.steps == 0 {
            return Err(Error::invalid("schedule needs at least one step"));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    /// Time of grid point `step` (`0..=steps`).
    pub fn time(&self, step: usize) -> f64 {
        if step == self.steps {
            self.horizon
        } else {
            step as f64 * self.dt()
        }
    }

    pub fn beta(&self, t: f64) -> f64 {
        self.alpha * self.gamma.powf(t) * self.gamma.ln()
    }

    /// `∫_s^t β(u) du = α (γ^t − γ^s)`.
    pub fn cum_rate(&self, s: f64, t: f64) -> Result<f64> {
        if s > t {
            return Err(Error::invalid(format!("cum_rate needs s ≤ t, got {s} > {t}")));
        }
        Ok(self.cum_rate_unchecked(s, t))
    }

    pub(crate) fn cum_rate_unchecked(&self, s: f64, t: f64) -> f64 {
        self.alpha * (self.gamma.powf(t) - self.gamma.powf(s))
    }
}

/// Discrete-time cosine schedule pulling toward the data marginals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DigressSchedule {
    pub steps: usize,
    pub offset: f64,
    pub marginals: Marginals,
}

impl DigressSchedule {
    pub fn new(steps: usize, marginals: Marginals) -> Result<Self> {
        if steps == 0 {
            return Err(Error::invalid("schedule needs at least one step"));
        }
        Ok(Self {
            steps,
            offset: 0.008,
            marginals,
        })
    }

    fn cosine(&self, t: usize) -> f64 {
        let x = 0.5 * std::f64::consts::PI * (t as f64 / self.steps as f64 + self.offset)
            / (1.0 + self.offset);
        x.cos().powi(2)
    }

    /// Cumulative retention `ᾱ_t`, normalized so `ᾱ_0 = 1`.
    pub fn alpha_bar(&self, t: usize) -> f64 {
        (self.cosine(t) / self.cosine(0)).clamp(0.0, 1.0)
    }

    /// One-step retention `α_t = ᾱ_t / ᾱ_{t−1}` for `t ≥ 1`.
    pub fn alpha(&self, t: usize) -> f64 {
        let prev = self.alpha_bar(t - 1);
        if prev <= 0.0 {
            0.0
        } else {
            self.alpha_bar(t) / prev
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cum_rate_examples() {
        let s = NoiseSchedule::default();
        assert!((s.cum_rate(0.0, 1.0).unwrap() - 0.8).abs() < 1e-15);
        assert_eq!(s.cum_rate(0.4, 0.4).unwrap(), 0.0);
        assert!(s.cum_rate(0.5, 0.4).is_err());
        assert!((s.beta(0.0) - 0.8 * 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn cum_rate_matches_quadrature() {
        // composite Simpson on β
        let s = NoiseSchedule::default();
        let (a, b, n) = (0.1, 0.9, 1000);
        let h = (b - a) / n as f64;
        let mut acc = s.beta(a) + s.beta(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * s.beta(a + i as f64 * h);
        }
        let simpson = acc * h / 3.0;
        assert!((simpson - s.cum_rate(a, b).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn invalid_schedules() {
        assert!(NoiseSchedule::new(0.0, 2.0, 1.0, 10).is_err());
        assert!(NoiseSchedule::new(0.8, 1.0, 1.0, 10).is_err());
        assert!(NoiseSchedule::new(0.8, 2.0, 1.0, 0).is_err());
    }
}
