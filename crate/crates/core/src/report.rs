//! Outcome record for a single bound, inequality, or limit verification.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

/// Result of one empirical check: the sampled dimensionless ratios, any
/// constants fitted during the check, and the worst-case margin.
///
/// `pass` is true iff every sampled inequality held with nonnegative margin
/// and all fitted constants stayed within their declared caps. Fitted
/// constants are stored in an ordered map so serialized reports are
/// byte-stable across runs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub samples: usize,
    pub ratio_min: f64,
    pub ratio_max: f64,
    pub fitted_constants: BTreeMap<String, f64>,
    pub pass: bool,
    /// Worst slack over all samples; negative means a violated inequality.
    pub margin: f64,
    pub notes: String,
}

impl CheckReport {
    pub fn new(name: impl Into<String>) -> Self {
        CheckReport {
            name: name.into(),
            samples: 0,
            ratio_min: f64::INFINITY,
            ratio_max: f64::NEG_INFINITY,
            fitted_constants: BTreeMap::new(),
            pass: false,
            margin: f64::INFINITY,
            notes: String::new(),
        }
    }

    /// Record one sampled ratio, widening the observed range.
    pub fn observe(&mut self, ratio: f64) {
        self.samples += 1;
        self.ratio_min = self.ratio_min.min(ratio);
        self.ratio_max = self.ratio_max.max(ratio);
    }

    /// Record one sample's slack; the report keeps the worst.
    pub fn observe_margin(&mut self, margin: f64) {
        self.margin = self.margin.min(margin);
    }

    pub fn set_constant(&mut self, name: impl Into<String>, value: f64) {
        self.fitted_constants.insert(name.into(), value);
    }

    pub fn constant(&self, name: &str) -> Option<f64> {
        self.fitted_constants.get(name).copied()
    }

    pub fn note(&mut self, text: impl AsRef<str>) {
        if !self.notes.is_empty() {
            self.notes.push_str("; ");
        }
        self.notes.push_str(text.as_ref());
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {} (samples={}, ratio in [{:.6e}, {:.6e}], margin={:.3e}",
            self.name,
            if self.pass { "pass" } else { "FAIL" },
            self.samples,
            self.ratio_min,
            self.ratio_max,
            self.margin,
        )?;
        for (k, v) in &self.fitted_constants {
            write!(f, ", {k}={v:.6e}")?;
        }
        write!(f, ")")?;
        if !self.notes.is_empty() {
            write!(f, " [{}]", self.notes)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn observe_tracks_extremes_and_worst_margin() {
        let mut r = CheckReport::new("demo");
        r.observe(2.0);
        r.observe(0.5);
        r.observe(1.0);
        r.observe_margin(0.3);
        r.observe_margin(-0.1);
        assert_eq!(r.samples, 3);
        assert_eq!(r.ratio_min, 0.5);
        assert_eq!(r.ratio_max, 2.0);
        assert_eq!(r.margin, -0.1);
    }

    #[test]
    fn constants_serialize_in_sorted_order() {
        let mut r = CheckReport::new("demo");
        r.set_constant("zeta", 1.0);
        r.set_constant("alpha", 2.0);
        let json = serde_json::to_string(&r).unwrap();
        let zi = json.find("zeta").unwrap();
        let ai = json.find("alpha").unwrap();
        assert!(ai < zi, "keys must serialize alphabetically: {json}");
    }
}
