//! Choice of the next validation step.

use alloc::format;
use alloc::string::{String, ToString};
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::{Error, Result};

pub const DEFAULT_LAMBDA: f64 = 100.0;

/// Absorbs rounding in `lambda * (thr_v - s_max)` so that e.g.
/// `100 * (0.3 - 0.25)` yields 5 and not 4.
const MARGIN_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimingStrategy {
    /// Validate at every step.
    Step1,
    /// Validate every `n` steps.
    StepN(usize),
    /// Validate at steps 1, 2, 4, 8, ...
    Expo2,
    /// Wait longer the further the surviving candidates are from the threshold.
    ContextWise { lambda: f64 },
}

impl Default for TimingStrategy {
    fn default() -> Self {
        Self::ContextWise { lambda: DEFAULT_LAMBDA }
    }
}

impl TimingStrategy {
    pub fn check(&self) -> Result<()> {
        match *self {
            Self::StepN(0) => Err(Error::Config("stepN requires n >= 1".into())),
            Self::ContextWise { lambda } if !(lambda > 0.0 && lambda.is_finite()) => {
                Err(Error::Config(format!("lambda must be positive, got {lambda}")))
            }
            _ => Ok(()),
        }
    }

    /// The first step at which validation happens.
    pub fn first_step(&self) -> usize {
        match self {
            Self::Expo2 => 1,
            _ => 0,
        }
    }

    /// The step of the next validation after one at `cur_ts`.
    ///
    /// `s_max_valid` is the largest similarity among the candidates that
    /// survived the validation at `cur_ts`. A result `>= max_tokens` means no
    /// further in-loop validation; the decoder's final check covers the tail.
    pub fn next_step(&self, cur_ts: usize, s_max_valid: f64, max_tokens: usize, thr_v: f64) -> usize {
        match *self {
            Self::Step1 => cur_ts + 1,
            Self::StepN(n) => cur_ts + n.max(1),
            Self::Expo2 => (cur_ts + 1).next_power_of_two(),
            Self::ContextWise { lambda } => {
                let remaining = max_tokens.saturating_sub(1).saturating_sub(cur_ts);
                if remaining == 0 {
                    return cur_ts + 1;
                }
                let raw = libm::floor(lambda * (thr_v - s_max_valid) + MARGIN_EPSILON);
                let interval = if raw >= remaining as f64 {
                    remaining
                } else if raw < 1.0 {
                    1
                } else {
                    raw as usize
                };
                cur_ts + interval
            }
        }
    }

    pub fn label(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for TimingStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Step1 => f.write_str("step1"),
            Self::StepN(n) => write!(f, "stepN:{n}"),
            Self::Expo2 => f.write_str("expo2"),
            Self::ContextWise { lambda } if *lambda == DEFAULT_LAMBDA => f.write_str("contextwise"),
            Self::ContextWise { lambda } => write!(f, "contextwise:{lambda}"),
        }
    }
}

impl FromStr for TimingStrategy {
    type Err = Error;

    /// Accepts `step1`, `stepN:<n>` (or `step<n>`), `expo2`, `contextwise`
    /// and `contextwise:<lambda>`.
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let (name, arg) = match lower.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (lower.as_str(), None),
        };
        let bad = || Error::Config(format!("unknown timing strategy `{s}`"));
        let strategy = match (name, arg) {
            ("step1", None) => Self::Step1,
            ("stepn", Some(n)) => Self::StepN(n.parse().map_err(|_| bad())?),
            (step, None) if step.starts_with("step") => Self::StepN(step[4..].parse().map_err(|_| bad())?),
            ("expo2", None) => Self::Expo2,
            ("contextwise", None) => Self::default(),
            ("contextwise", Some(l)) => Self::ContextWise {
                lambda: l.parse().map_err(|_| bad())?,
            },
            _ => return Err(bad()),
        };
        strategy.check()?;
        Ok(strategy)
    }
}

impl Serialize for TimingStrategy {
    fn serialize<S: Serializer>(&self, serializer: S) -> core::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TimingStrategy {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> core::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;
    use proptest::prelude::*;

    fn schedule(strategy: TimingStrategy, max_tokens: usize, s_max: f64) -> Vec<usize> {
        let mut steps = Vec::new();
        let mut next = strategy.first_step();
        while next < max_tokens {
            steps.push(next);
            next = strategy.next_step(next, s_max, max_tokens, 0.3);
        }
        steps
    }

    #[test]
    fn fixed_schedules() {
        assert_eq!(TimingStrategy::Step1.next_step(7, 0.0, 50, 0.3), 8);
        assert_eq!(schedule(TimingStrategy::Step1, 50, 0.0).len(), 50);
        assert_eq!(
            schedule(TimingStrategy::StepN(5), 50, 0.0),
            [0, 5, 10, 15, 20, 25, 30, 35, 40, 45]
        );
        assert_eq!(schedule(TimingStrategy::Expo2, 50, 0.0), [1, 2, 4, 8, 16, 32]);
        assert_eq!(schedule(TimingStrategy::Step1, 200, 0.0).len(), 200);
    }

    #[test]
    fn expo2_resumes_from_rolled_back_step() {
        assert_eq!(TimingStrategy::Expo2.next_step(5, 0.0, 50, 0.3), 8);
        assert_eq!(TimingStrategy::Expo2.next_step(8, 0.0, 50, 0.3), 16);
    }

    #[test]
    fn contextwise_intervals() {
        let cw = TimingStrategy::ContextWise { lambda: 100.0 };
        assert_eq!(cw.next_step(10, 0.25, 50, 0.3), 15);
        assert_eq!(cw.next_step(10, 0.299, 50, 0.3), 11);
        assert_eq!(cw.next_step(10, 0.0, 50, 0.3), 40);
        // clamped to the remaining budget
        assert_eq!(cw.next_step(40, 0.0, 50, 0.3), 49);
        assert_eq!(cw.next_step(49, 0.0, 50, 0.3), 50);
        assert_eq!(schedule(cw, 50, 0.0), [0, 30, 49]);
    }

    #[test]
    fn parse_and_display() {
        for s in ["step1", "stepN:5", "expo2", "contextwise", "contextwise:40"] {
            let parsed: TimingStrategy = s.parse().unwrap();
            assert_eq!(parsed.to_string(), s);
        }
        assert_eq!("Step5".parse::<TimingStrategy>().unwrap(), TimingStrategy::StepN(5));
        assert!("stepN:0".parse::<TimingStrategy>().is_err());
        assert!("contextwise:-1".parse::<TimingStrategy>().is_err());
        assert!("bogus".parse::<TimingStrategy>().is_err());
    }

    proptest! {
        #[test]
        fn always_progresses(cur in 0usize..200, s in 0.0f64..0.3, mt in 1usize..256, lambda in 0.1f64..1000.0, n in 1usize..20) {
            for strategy in [TimingStrategy::Step1, TimingStrategy::StepN(n), TimingStrategy::Expo2, TimingStrategy::ContextWise { lambda }] {
                prop_assert!(strategy.next_step(cur, s, mt, 0.3) > cur);
            }
        }

        #[test]
        fn contextwise_monotone_in_margin(cur in 0usize..100, a in 0.0f64..0.3, b in 0.0f64..0.3, lambda in 0.1f64..1000.0) {
            let cw = TimingStrategy::ContextWise { lambda };
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(cw.next_step(cur, lo, 128, 0.3) >= cw.next_step(cur, hi, 128, 0.3));
        }
    }
}
