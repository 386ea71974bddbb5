use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distortion lower bound `t ↦ f(t)` of a measure-contraction condition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MCPProfile {
    #[serde(rename = "K", default)]
    pub k: f64,
    #[serde(rename = "N")]
    pub n: f64,
    /// Piecewise-linear `(t, f(t))` table replacing `(1−t)^N` when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<(f64, f64)>>,
}

impl MCPProfile {
    /// `f(t) = (1−t)^N`.
    pub fn power(n: f64) -> Result<Self> {
        let p = MCPProfile { k: 0.0, n, table: None };
        p.validate()?;
        Ok(p)
    }

    pub fn from_table(n: f64, table: Vec<(f64, f64)>) -> Result<Self> {
        let p = MCPProfile { k: 0.0, n, table: Some(table) };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k != 0.0 {
            return Err(Error::Unsupported { op: "distortion profile with K ≠ 0", space: format!("K = {}", self.k) });
        }
        if !(self.n > 1.0 && self.n.is_finite()) {
            return Err(Error::OutOfRange(format!("N = {} must exceed 1", self.n)));
        }
        let Some(table) = &self.table else { return Ok(()) };
        if table.len() < 2 {
            return Err(Error::Invalid("profile table needs at least two nodes".into()));
        }
        if table.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::Invalid("profile table times must increase strictly".into()));
        }
        let (first, last) = (table[0], table[table.len() - 1]);
        if first != (0.0, 1.0) || last != (1.0, 0.0) {
            return Err(Error::Invalid("profile table must start at (0, 1) and end at (1, 0)".into()));
        }
        if table[..table.len() - 1].iter().any(|&(_, f)| !(f > 0.0 && f.is_finite())) {
            return Err(Error::Invalid("profile values must be positive on [0, 1)".into()));
        }
        Ok(())
    }

    pub fn eval(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, 1.0);
        match &self.table {
            None => (1.0 - t).powf(self.n),
            Some(table) => {
                let k = table.partition_point(|&(s, _)| s <= t).clamp(1, table.len() - 1);
                let ((t0, f0), (t1, f1)) = (table[k - 1], table[k]);
                f0 + (f1 - f0) * (t - t0) / (t1 - t0)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_profile() {
        let p = MCPProfile::power(5.0).unwrap();
        assert_eq!(p.eval(0.0), 1.0);
        assert_eq!(p.eval(1.0), 0.0);
        assert!((p.eval(0.5) - 1.0 / 32.0).abs() < 1e-16);
        assert!(MCPProfile::power(1.0).is_err());
        assert!(MCPProfile { k: 1.0, n: 3.0, table: None }.validate().is_err());
    }

    #[test]
    fn table_profile() {
        let p = MCPProfile::from_table(2.0, vec![(0.0, 1.0), (0.5, 0.5), (1.0, 0.0)]).unwrap();
        assert!((p.eval(0.25) - 0.75).abs() < 1e-15);
        assert!((p.eval(0.75) - 0.25).abs() < 1e-15);
        assert_eq!(p.eval(1.0), 0.0);
        assert!(MCPProfile::from_table(2.0, vec![(0.0, 1.0), (0.5, 0.0), (1.0, 0.0)]).is_err());
        assert!(MCPProfile::from_table(2.0, vec![(0.0, 0.9), (1.0, 0.0)]).is_err());
    }
}
