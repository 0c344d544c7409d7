//! Parameter grids: an explicit list or `start:stop:step`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Half-open range `start, start + step, ...` strictly below `stop`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Range {
    pub fn values(&self) -> Vec<f64> {
        // Tolerance keeps `stop` out when (stop - start) / step is integral up
        // to rounding.
        let count = ((self.stop - self.start) / self.step - 1e-9).ceil().max(0.0) as usize;
        (0..count).map(|k| self.start + k as f64 * self.step).collect()
    }
}

impl FromStr for Range {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [start, stop, step] = parts[..] else {
            return Err(format!("`{s}` is not of the form start:stop:step"));
        };
        let num = |t: &str| {
            t.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| format!("`{t}` is not a finite number"))
        };
        let range = Range {
            start: num(start)?,
            stop: num(stop)?,
            step: num(step)?,
        };
        if range.step <= 0.0 {
            return Err(format!("step must be positive in `{s}`"));
        }
        if range.stop < range.start {
            return Err(format!("stop lies below start in `{s}`"));
        }
        Ok(range)
    }
}

impl fmt::Display for Range {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.start, self.stop, self.step)
    }
}

/// Grid as written in a config document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    Range(String),
    List(Vec<f64>),
}

impl GridSpec {
    pub fn values(&self) -> Result<Vec<f64>, String> {
        match self {
            GridSpec::Range(s) => Ok(s.parse::<Range>()?.values()),
            GridSpec::List(v) => Ok(v.clone()),
        }
    }
}
