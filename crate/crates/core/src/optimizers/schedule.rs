use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    /// `c / (16 L² log²(k+2))`
    AnytimeLog2,
    /// `c / (L² log²(k+2))`
    ExpectationLog2,
    /// `c / (16 L² log^{1+ε}(k+2))`
    EpsilonLog,
    /// `c / √max(k, 1)`
    SqrtK,
    Constant,
    Custom,
}

impl ScheduleKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScheduleKind::AnytimeLog2 => "anytime_log2",
            ScheduleKind::ExpectationLog2 => "expectation_log2",
            ScheduleKind::EpsilonLog => "epsilon_log",
            ScheduleKind::SqrtK => "sqrt_k",
            ScheduleKind::Constant => "constant",
            ScheduleKind::Custom => "custom",
        }
    }
}

type CustomFn = Arc<dyn Fn(u64) -> f64 + Send + Sync>;

/// Step-size rule `k ↦ η_k`, natural logarithms throughout.
#[derive(Clone)]
pub struct StepSchedule {
    kind: ScheduleKind,
    scale: f64,
    epsilon: f64,
    lipschitz: f64,
    custom: Option<CustomFn>,
    custom_monotone: bool,
}

impl fmt::Debug for StepSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StepSchedule")
            .field("kind", &self.kind)
            .field("scale", &self.scale)
            .field("epsilon", &self.epsilon)
            .field("lipschitz", &self.lipschitz)
            .finish()
    }
}

impl StepSchedule {
    /// Built-in schedule. `epsilon` is only read by [`ScheduleKind::EpsilonLog`];
    /// `lipschitz` only by the logarithmic kinds.
    pub fn new(kind: ScheduleKind, scale: f64, epsilon: f64, lipschitz: f64) -> Result<Self> {
        if kind == ScheduleKind::Custom {
            return Err(Error::InvalidArgument(
                "custom schedules are built with StepSchedule::custom".into(),
            ));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "schedule scale {scale} must be positive"
            )));
        }
        let logarithmic = matches!(
            kind,
            ScheduleKind::AnytimeLog2 | ScheduleKind::ExpectationLog2 | ScheduleKind::EpsilonLog
        );
        if logarithmic && !(lipschitz > 0.0 && lipschitz.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "{} needs a positive Lipschitz constant, got {lipschitz}",
                kind.as_str()
            )));
        }
        if kind == ScheduleKind::EpsilonLog && !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(Error::InvalidArgument(format!("epsilon {epsilon} must lie in (0, 1]")));
        }
        Ok(StepSchedule {
            kind,
            scale,
            epsilon,
            lipschitz,
            custom: None,
            custom_monotone: false,
        })
    }

    pub fn anytime(lipschitz: f64) -> Result<Self> {
        Self::new(ScheduleKind::AnytimeLog2, 1.0, 0.0, lipschitz)
    }

    /// User-supplied rule. `monotone` declares `η_{k+1} ≤ η_k`; it is not verified.
    pub fn custom<F>(f: F, monotone: bool) -> Self
    where
        F: Fn(u64) -> f64 + Send + Sync + 'static,
    {
        StepSchedule {
            kind: ScheduleKind::Custom,
            scale: 1.0,
            epsilon: 0.0,
            lipschitz: 0.0,
            custom: Some(Arc::new(f)),
            custom_monotone: monotone,
        }
    }

    pub fn kind(&self) -> ScheduleKind {
        self.kind
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// For the logarithmic kinds, `(coef, q)` with `η_k = coef / log^q(k+2)`.
    pub fn log_form(&self) -> Option<(f64, f64)> {
        let l2 = self.lipschitz * self.lipschitz;
        match self.kind {
            ScheduleKind::AnytimeLog2 => Some((self.scale / (16.0 * l2), 2.0)),
            ScheduleKind::ExpectationLog2 => Some((self.scale / l2, 2.0)),
            ScheduleKind::EpsilonLog => Some((self.scale / (16.0 * l2), 1.0 + self.epsilon)),
            _ => None,
        }
    }

    pub fn eval(&self, k: u64) -> f64 {
        if let Some((coef, q)) = self.log_form() {
            let lg = ((k + 2) as f64).ln();
            return if q == 2.0 { coef / (lg * lg) } else { coef / lg.powf(q) };
        }
        match self.kind {
            ScheduleKind::SqrtK => self.scale / (k.max(1) as f64).sqrt(),
            ScheduleKind::Constant => self.scale,
            ScheduleKind::Custom => (self.custom.as_ref().expect("custom schedule without rule"))(k),
            _ => unreachable!("logarithmic kinds handled above"),
        }
    }

    /// Whether `η_{k+1} ≤ η_k` holds for every `k`. Built-in kinds are all
    /// non-increasing; custom rules report their declared flag.
    pub fn is_monotone(&self) -> bool {
        match self.kind {
            ScheduleKind::Custom => self.custom_monotone,
            _ => true,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn anytime_at_zero() {
        let s = StepSchedule::anytime(1.0).unwrap();
        let expect = 1.0 / (16.0 * 2f64.ln().powi(2));
        assert!((s.eval(0) - expect).abs() < 1e-15);
        assert!((s.eval(0) - 0.13007).abs() < 5e-5);
    }

    #[test]
    fn sqrt_k_examples() {
        let s = StepSchedule::new(ScheduleKind::SqrtK, 1.0, 0.0, 0.0).unwrap();
        assert_eq!(s.eval(4), 0.5);
        assert_eq!(s.eval(0), 1.0);
    }

    #[test]
    fn expectation_is_sixteen_times_anytime() {
        let a = StepSchedule::new(ScheduleKind::AnytimeLog2, 1.0, 0.0, 2.5).unwrap();
        let e = StepSchedule::new(ScheduleKind::ExpectationLog2, 1.0, 0.0, 2.5).unwrap();
        for k in [0u64, 1, 7, 1000, 123_456_789] {
            assert!((e.eval(k) / a.eval(k) - 16.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(StepSchedule::new(ScheduleKind::Constant, 0.0, 0.0, 1.0).is_err());
        assert!(StepSchedule::new(ScheduleKind::AnytimeLog2, 1.0, 0.0, 0.0).is_err());
        assert!(StepSchedule::new(ScheduleKind::EpsilonLog, 1.0, 1.5, 1.0).is_err());
    }

    #[test]
    fn custom_rule() {
        let s = StepSchedule::custom(|k| 1.0 / (k as f64 + 1.0), true);
        assert_eq!(s.eval(3), 0.25);
        assert!(s.is_monotone());
    }
}
