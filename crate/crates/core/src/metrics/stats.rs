//! Summation and correlation helpers.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::format::ser_f64;

/// Pairwise (cascade) summation with a fixed split, so the result depends
/// only on the order of `values`.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 8 {
        values.iter().sum()
    } else {
        let mid = values.len() / 2;
        pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
    }
}

/// Mean via [`pairwise_sum`]; zero for an empty slice.
pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        pairwise_sum(values) / values.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Correlation {
    Defined {
        #[serde(serialize_with = "ser_f64")]
        pearson: f64,
        #[serde(serialize_with = "ser_f64")]
        spearman: f64,
    },
    /// One of the inputs has zero variance.
    Undefined,
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let ma = mean(a);
    let mb = mean(b);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// 1-based ranks; tied values share the mean of their positions.
pub fn fractional_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start+1 ..= end
        let avg = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

/// Pearson and Spearman correlation across paired per-model values.
pub fn correlate(a: &[f64], b: &[f64]) -> Result<Correlation> {
    if a.len() != b.len() {
        return Err(Error::Metric(format!(
            "correlation inputs differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 3 {
        return Err(Error::Metric(format!(
            "correlation needs at least 3 models, got {}",
            a.len()
        )));
    }
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(Error::Metric("correlation inputs must be finite".into()));
    }
    let Some(p) = pearson(a, b) else {
        return Ok(Correlation::Undefined);
    };
    let s = pearson(&fractional_ranks(a), &fractional_ranks(b)).unwrap_or(f64::NAN);
    Ok(Correlation::Defined {
        pearson: p,
        spearman: s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_and_negated() {
        let a = [0.1, 0.5, 0.3, 0.9, 0.7];
        let b: Vec<f64> = a.iter().map(|x| 2.0 * x + 1.0).collect();
        let Correlation::Defined { pearson, spearman } = correlate(&a, &b).unwrap() else {
            panic!("undefined")
        };
        assert!((pearson - 1.0).abs() < 1e-12 && (spearman - 1.0).abs() < 1e-12);
        let neg: Vec<f64> = a.iter().map(|x| -x).collect();
        let Correlation::Defined { pearson, spearman } = correlate(&a, &neg).unwrap() else {
            panic!("undefined")
        };
        assert!((pearson + 1.0).abs() < 1e-12 && (spearman + 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_variance_is_undefined() {
        assert_eq!(
            correlate(&[1.0, 1.0, 1.0], &[0.0, 1.0, 2.0]).unwrap(),
            Correlation::Undefined
        );
        assert!(correlate(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(correlate(&[1.0, 2.0, 3.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(fractional_ranks(&[10.0, 20.0, 10.0, 5.0]), [2.5, 4.0, 2.5, 1.0]);
    }

    #[test]
    fn pairwise_sum_matches_naive_on_exact_values() {
        let v: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&v), 499_500.0);
        assert_eq!(mean(&[]), 0.0);
    }
}
