use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which standard deviation divides the centered rewards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StdMode {
    /// Divide by G. Keeps a two-sample group at exactly ±1.
    #[default]
    Population,
    /// Divide by G − 1.
    Sample,
}

impl StdMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            StdMode::Population => "population",
            StdMode::Sample => "sample",
        }
    }
}

impl std::str::FromStr for StdMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "population" => Ok(Self::Population),
            "sample" => Ok(Self::Sample),
            other => Err(format!("unknown std mode `{other}` (expected population or sample)")),
        }
    }
}

/// `(r_i − mean) / std` within one group; all zeros for a constant group.
pub fn group_normalize(rewards: &[f64]) -> Result<Vec<f64>> {
    group_normalize_with(rewards, StdMode::Population)
}

pub fn group_normalize_with(rewards: &[f64], mode: StdMode) -> Result<Vec<f64>> {
    let g = rewards.len();
    if g < 2 {
        return Err(Error::GroupTooSmall(g));
    }
    if rewards.iter().any(|r| !r.is_finite()) {
        return Err(Error::NonFinite("group rewards".into()));
    }
    // Compare exactly: the mean of identical values is not always bit-equal
    // to them, and dividing that rounding residue would produce ±1 noise.
    if rewards.iter().all(|r| *r == rewards[0]) {
        return Ok(vec![0.0; g]);
    }
    let mean = rewards.iter().sum::<f64>() / g as f64;
    let ss: f64 = rewards.iter().map(|r| (r - mean).powi(2)).sum();
    let denom = match mode {
        StdMode::Population => g as f64,
        StdMode::Sample => (g - 1) as f64,
    };
    let std = (ss / denom).sqrt();
    if std == 0.0 {
        return Ok(vec![0.0; g]);
    }
    Ok(rewards.iter().map(|r| (r - mean) / std).collect())
}
