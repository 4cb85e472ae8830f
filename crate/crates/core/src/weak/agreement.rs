//! Inter-annotator agreement statistics.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Cohen's kappa with marginal-product chance agreement. When chance
/// agreement is 1 (both raters constant on the same label) the result is 1.0.
pub fn cohen_kappa<T: Ord>(labels_a: &[T], labels_b: &[T]) -> Result<f64> {
    if labels_a.len() != labels_b.len() {
        return Err(Error::InvalidArgument(format!(
            "kappa needs equal-length label lists, got {} and {}",
            labels_a.len(),
            labels_b.len()
        )));
    }
    if labels_a.is_empty() {
        return Err(Error::InvalidArgument("kappa over zero items".into()));
    }
    let n = labels_a.len() as f64;
    let mut marginals: BTreeMap<&T, (usize, usize)> = BTreeMap::new();
    let mut agree = 0usize;
    for (a, b) in labels_a.iter().zip(labels_b) {
        marginals.entry(a).or_default().0 += 1;
        marginals.entry(b).or_default().1 += 1;
        agree += usize::from(a == b);
    }
    let p_o = agree as f64 / n;
    let p_e: f64 = marginals
        .values()
        .map(|&(ca, cb)| (ca as f64 / n) * (cb as f64 / n))
        .sum();
    if 1.0 - p_e == 0.0 {
        if p_o == 1.0 {
            return Ok(1.0);
        }
        log::warn!("cohen kappa: chance agreement is 1, returning 0.0");
        return Ok(0.0);
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}

/// Fleiss' kappa over an items x categories matrix of rater counts. Every
/// row must sum to the same rater count n >= 2. A degenerate chance
/// agreement (one category used everywhere) yields 0.0 with a warning.
pub fn fleiss_kappa(ratings: &[Vec<u32>]) -> Result<f64> {
    let first = ratings
        .first()
        .ok_or_else(|| Error::InvalidArgument("fleiss kappa over zero items".into()))?;
    let k = first.len();
    let n: u32 = first.iter().sum();
    if n < 2 {
        return Err(Error::InvalidArgument(format!("fleiss kappa needs at least 2 raters, got {n}")));
    }
    for (row_idx, row) in ratings.iter().enumerate() {
        if row.len() != k {
            return Err(Error::Dimension(format!("row {row_idx} has {} categories, expected {k}", row.len())));
        }
        let s: u32 = row.iter().sum();
        if s != n {
            return Err(Error::InvalidArgument(format!(
                "row {row_idx} sums to {s} raters, expected {n}"
            )));
        }
    }
    let items = ratings.len() as f64;
    let nf = n as f64;
    let p_bar = ratings
        .iter()
        .map(|row| {
            let sq: f64 = row.iter().map(|&c| (c as f64) * (c as f64)).sum();
            (sq - nf) / (nf * (nf - 1.0))
        })
        .sum::<f64>()
        / items;
    let p_e: f64 = (0..k)
        .map(|j| {
            let pj = ratings.iter().map(|row| row[j] as f64).sum::<f64>() / (items * nf);
            pj * pj
        })
        .sum();
    if 1.0 - p_e == 0.0 {
        log::warn!("fleiss kappa: chance agreement is 1 (single category), returning 0.0");
        return Ok(0.0);
    }
    Ok((p_bar - p_e) / (1.0 - p_e))
}
