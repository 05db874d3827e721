use std::fmt;
use std::str::FromStr;

use super::EngineError;

/// Rule `k -> t(k)` giving the consensus rounds before gradient step `k` (1-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConsensusSchedule {
    Fixed(u64),
    /// `t(k) = k`
    Linear,
    /// `t(k) = initial * 2^floor((k-1)/period)`
    Doubling { initial: u64, period: u64 },
    /// `t(k) = max(1, ceil(log2(k+1)))`
    Logarithmic,
}

impl ConsensusSchedule {
    pub fn rounds(&self, k: u64) -> u64 {
        debug_assert!(k >= 1, "iterations are 1-based");
        match *self {
            ConsensusSchedule::Fixed(t) => t,
            ConsensusSchedule::Linear => k,
            ConsensusSchedule::Doubling { initial, period } => {
                let doublings = (k - 1) / period;
                if doublings >= 64 {
                    u64::MAX
                } else {
                    initial.saturating_mul(1u64 << doublings)
                }
            }
            ConsensusSchedule::Logarithmic => {
                // ceil(log2(k+1)) = bit length of k
                (64 - k.leading_zeros() as u64).max(1)
            }
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        match *self {
            ConsensusSchedule::Fixed(0) => {
                Err(EngineError::InvalidConfig("fixed schedule needs t >= 1".into()))
            }
            ConsensusSchedule::Doubling { initial, period } if initial == 0 || period == 0 => Err(
                EngineError::InvalidConfig("doubling schedule needs initial, period >= 1".into()),
            ),
            _ => Ok(()),
        }
    }

    /// Sum of `t(1) + ... + t(k)`, saturating.
    pub fn cumulative_rounds(&self, k: u64) -> u64 {
        match *self {
            ConsensusSchedule::Fixed(t) => t.saturating_mul(k),
            ConsensusSchedule::Linear => (k.saturating_mul(k + 1)) / 2,
            _ => (1..=k).fold(0u64, |acc, j| acc.saturating_add(self.rounds(j))),
        }
    }
}

impl fmt::Display for ConsensusSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConsensusSchedule::Fixed(t) => write!(f, "fixed:{t}"),
            ConsensusSchedule::Linear => f.write_str("linear"),
            ConsensusSchedule::Doubling { initial, period } => {
                write!(f, "doubling:{period}:{initial}")
            }
            ConsensusSchedule::Logarithmic => f.write_str("log"),
        }
    }
}

/// Accepts `fixed:<t>`, `linear`, `doubling:<period>[:<initial>]`, `log`.
impl FromStr for ConsensusSchedule {
    type Err = EngineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || EngineError::InvalidConfig(format!("unknown schedule {s:?}"));
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |v: &str| v.trim().parse::<u64>().map_err(|_| bad());
        let sched = match parts.as_slice() {
            ["fixed", t] => ConsensusSchedule::Fixed(num(t)?),
            ["linear"] | ["k"] => ConsensusSchedule::Linear,
            ["log"] | ["logarithmic"] => ConsensusSchedule::Logarithmic,
            ["doubling", m] => ConsensusSchedule::Doubling {
                initial: 1,
                period: num(m)?,
            },
            ["doubling", m, b] => ConsensusSchedule::Doubling {
                initial: num(b)?,
                period: num(m)?,
            },
            _ => return Err(bad()),
        };
        sched.validate()?;
        Ok(sched)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounds_follow_definitions() {
        let lin = ConsensusSchedule::Linear;
        assert_eq!((1..=5).map(|k| lin.rounds(k)).collect::<Vec<_>>(), [1, 2, 3, 4, 5]);
        let dbl = ConsensusSchedule::Doubling {
            initial: 1,
            period: 500,
        };
        assert_eq!(dbl.rounds(1), 1);
        assert_eq!(dbl.rounds(500), 1);
        assert_eq!(dbl.rounds(501), 2);
        assert_eq!(dbl.rounds(1001), 4);
        let log = ConsensusSchedule::Logarithmic;
        assert_eq!(
            (1..=8).map(|k| log.rounds(k)).collect::<Vec<_>>(),
            [1, 2, 2, 3, 3, 3, 3, 4]
        );
    }

    #[test]
    fn cumulative_linear_is_triangular() {
        for k in [1u64, 10, 100] {
            assert_eq!(ConsensusSchedule::Linear.cumulative_rounds(k), k * (k + 1) / 2);
        }
    }

    #[test]
    fn doubling_saturates() {
        let dbl = ConsensusSchedule::Doubling {
            initial: 1,
            period: 1,
        };
        assert_eq!(dbl.rounds(64), 1 << 63);
        assert_eq!(dbl.rounds(65), u64::MAX);
    }

    #[test]
    fn parse_round_trip() {
        for s in ["fixed:3", "linear", "doubling:500:1", "log"] {
            let sched: ConsensusSchedule = s.parse().unwrap();
            assert_eq!(sched.to_string(), s);
        }
        assert!("fixed:0".parse::<ConsensusSchedule>().is_err());
        assert!("weekly".parse::<ConsensusSchedule>().is_err());
    }
}
