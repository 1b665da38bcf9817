use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Target population of the causal effect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Estimand {
    /// Average effect on the treated: controls are reweighted to the treated.
    #[default]
    Att,
    /// Average effect over the whole population: both groups are reweighted.
    Ate,
}

impl fmt::Display for Estimand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Estimand::Att => "att",
            Estimand::Ate => "ate",
        })
    }
}

impl FromStr for Estimand {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "att" => Ok(Estimand::Att),
            "ate" => Ok(Estimand::Ate),
            other => Err(Error::Config(format!("unknown estimand `{other}`"))),
        }
    }
}

/// Highest power of each covariate entering the balancing conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum MomentOrder {
    First = 1,
    Second = 2,
    Third = 3,
}

impl MomentOrder {
    pub const ALL: [MomentOrder; 3] = [MomentOrder::First, MomentOrder::Second, MomentOrder::Third];

    pub fn get(self) -> u8 {
        self as u8
    }
}

impl TryFrom<u8> for MomentOrder {
    type Error = Error;

    fn try_from(m: u8) -> Result<Self, Self::Error> {
        match m {
            1 => Ok(MomentOrder::First),
            2 => Ok(MomentOrder::Second),
            3 => Ok(MomentOrder::Third),
            other => Err(Error::Config(format!("moment order must be 1, 2 or 3, got {other}"))),
        }
    }
}

impl From<MomentOrder> for u8 {
    fn from(m: MomentOrder) -> u8 {
        m as u8
    }
}

impl fmt::Display for MomentOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.get())
    }
}

/// Counts treated and control units, failing if either group is empty.
pub fn group_sizes(t: &[bool]) -> crate::Result<(usize, usize)> {
    let n_t = t.iter().filter(|&&ti| ti).count();
    let n_c = t.len() - n_t;
    if n_t == 0 || n_c == 0 {
        return Err(Error::SingleClass);
    }
    Ok((n_t, n_c))
}
