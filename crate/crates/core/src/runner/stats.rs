//! Summary statistics over replications.

use serde::Serialize;

/// Linear-interpolation quantile of sorted data (`q` in `[0, 1]`).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

pub fn median(values: &[f64]) -> f64 {
    quantile_sorted(&sorted(values), 0.5)
}

/// Mean after dropping `floor(0.1 len)` values from each end.
pub fn trimmed_mean(values: &[f64]) -> f64 {
    let v = sorted(values);
    let k = v.len() / 10;
    let kept = &v[k..v.len() - k];
    if kept.is_empty() {
        return f64::NAN;
    }
    kept.iter().sum::<f64>() / kept.len() as f64
}

/// Location and spread of a sample.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Spread {
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    pub iqr: f64,
    pub mean: f64,
    pub trimmed_mean: f64,
}

impl Spread {
    pub fn of(values: &[f64]) -> Self {
        let v = sorted(values);
        let q25 = quantile_sorted(&v, 0.25);
        let q75 = quantile_sorted(&v, 0.75);
        Self {
            median: quantile_sorted(&v, 0.5),
            q25,
            q75,
            iqr: q75 - q25,
            mean: if v.is_empty() { f64::NAN } else { v.iter().sum::<f64>() / v.len() as f64 },
            trimmed_mean: trimmed_mean(values),
        }
    }
}
