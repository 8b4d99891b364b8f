use std::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Open real interval `(lo, hi)`; either end may be infinite.
///
/// Serializes as `[lo, hi]` with `null` standing for an infinite end, since
/// JSON has no infinity literal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const REAL_LINE: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };

    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, v: f64) -> bool {
        v > self.lo && v < self.hi
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    /// Evenly spaced points of the interval clipped to `[-extent, extent]`.
    /// Includes 0 when it lies inside.
    pub fn grid(&self, count: usize, extent: f64) -> Vec<f64> {
        let lo = self.lo.max(-extent);
        let hi = self.hi.min(extent);
        if !(hi > lo) || count == 0 {
            return Vec::new();
        }
        let mut out: Vec<f64> = if count == 1 {
            vec![0.5 * (lo + hi)]
        } else {
            let steps = (count - 1) as f64;
            (0..count)
                .map(|k| lo + (hi - lo) * k as f64 / steps)
                .filter(|v| self.contains(*v))
                .collect()
        };
        if self.contains(0.0) && !out.contains(&0.0) && lo <= 0.0 && hi >= 0.0 {
            out.push(0.0);
            out.sort_by(f64::total_cmp);
        }
        out
    }
}

impl Default for Interval {
    fn default() -> Self {
        Self::REAL_LINE
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.lo, self.hi)
    }
}

impl Serialize for Interval {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let end = |v: f64| v.is_finite().then_some(v);
        [end(self.lo), end(self.hi)].serialize(s)
    }
}

impl<'de> Deserialize<'de> for Interval {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let [lo, hi] = <[Option<f64>; 2]>::deserialize(d)?;
        let iv = Interval::new(lo.unwrap_or(f64::NEG_INFINITY), hi.unwrap_or(f64::INFINITY));
        if iv.lo.is_nan() || iv.hi.is_nan() || !(iv.lo < iv.hi) {
            return Err(D::Error::custom(format!("empty or invalid interval {iv}")));
        }
        Ok(iv)
    }
}

/// Finite union of open intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IntervalSet(pub Vec<Interval>);

impl IntervalSet {
    pub fn real_line() -> Self {
        Self(vec![Interval::REAL_LINE])
    }

    pub fn contains(&self, v: f64) -> bool {
        self.0.iter().any(|i| i.contains(v))
    }

    pub fn grid(&self, count_per_interval: usize, extent: f64) -> Vec<f64> {
        let mut out: Vec<f64> = self
            .0
            .iter()
            .flat_map(|i| i.grid(count_per_interval, extent))
            .collect();
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }
}

impl Default for IntervalSet {
    fn default() -> Self {
        Self::real_line()
    }
}
