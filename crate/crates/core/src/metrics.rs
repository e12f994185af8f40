//! Top-R ranking quality of an approximate score vector.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, Result};

pub const DEFAULT_CUTOFF: usize = 100;

/// Node ids in descending score order, ties broken by ascending id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub ids: Vec<u32>,
    pub scores: Vec<f64>,
    /// Fewer than `R` ids were eligible.
    pub truncated: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relevance {
    /// Gain of node `v` is its true score.
    #[default]
    Graded,
    /// Gain is 1 for members of the true top-R set, 0 otherwise.
    Binary,
}

fn by_score_then_id(scores: &[f64]) -> impl Fn(&u32, &u32) -> Ordering + '_ {
    move |&a, &b| scores[b as usize].total_cmp(&scores[a as usize]).then(a.cmp(&b))
}

/// The `r` highest-scoring ids outside `exclude`.
pub fn top_r(scores: &[f64], r: usize, exclude: &[u32]) -> Result<Ranking> {
    if r == 0 {
        return Err(invalid("cutoff R must be at least 1"));
    }
    if let Some(i) = scores.iter().position(|v| v.is_nan()) {
        return Err(invalid(format!("score of node {i} is NaN")));
    }
    let mut eligible: Vec<u32> = (0..scores.len() as u32).filter(|i| !exclude.contains(i)).collect();
    let truncated = eligible.len() < r;
    let cmp = by_score_then_id(scores);
    if !truncated && r < eligible.len() {
        eligible.select_nth_unstable_by(r - 1, &cmp);
        eligible.truncate(r);
    }
    eligible.sort_unstable_by(&cmp);
    let ranked_scores = eligible.iter().map(|&i| scores[i as usize]).collect();
    Ok(Ranking { ids: eligible, scores: ranked_scores, truncated })
}

fn dcg(ids: &[u32], gain: impl Fn(u32) -> f64) -> f64 {
    ids.iter().enumerate().map(|(i, &v)| gain(v) / ((i + 2) as f64).log2()).sum()
}

fn check_pair(approx: &[f64], truth: &[f64]) -> Result<()> {
    check_len(truth.len(), approx.len())?;
    if let Some(i) = truth.iter().position(|v| !(*v >= 0.0)) {
        return Err(invalid(format!("true score of node {i} is negative or NaN")));
    }
    Ok(())
}

/// NDCG@R with graded relevance: gains are the true scores.
pub fn ndcg_at_r(approx: &[f64], truth: &[f64], r: usize, exclude: &[u32]) -> Result<f64> {
    ndcg_at_r_with(approx, truth, r, exclude, Relevance::Graded)
}

pub fn ndcg_at_r_with(approx: &[f64], truth: &[f64], r: usize, exclude: &[u32], relevance: Relevance) -> Result<f64> {
    check_pair(approx, truth)?;
    let ideal = top_r(truth, r, exclude)?;
    let ranked = top_r(approx, r, exclude)?;
    let (dcg_value, idcg) = match relevance {
        Relevance::Graded => {
            let gain = |v: u32| truth[v as usize];
            (dcg(&ranked.ids, gain), dcg(&ideal.ids, gain))
        }
        Relevance::Binary => {
            let gain = |v: u32| if ideal.ids.contains(&v) { 1.0 } else { 0.0 };
            (dcg(&ranked.ids, gain), dcg(&ideal.ids, gain))
        }
    };
    if idcg == 0.0 {
        return Ok(1.0);
    }
    Ok((dcg_value / idcg).clamp(0.0, 1.0))
}

/// Overlap of the approximate and true top-R sets, divided by R (or by the
/// eligible count when smaller).
pub fn recall_at_r(approx: &[f64], truth: &[f64], r: usize, exclude: &[u32]) -> Result<f64> {
    check_pair(approx, truth)?;
    let ideal = top_r(truth, r, exclude)?;
    let ranked = top_r(approx, r, exclude)?;
    if ideal.ids.is_empty() {
        return Ok(1.0);
    }
    let mut truth_set = ideal.ids.clone();
    truth_set.sort_unstable();
    let hits = ranked.ids.iter().filter(|v| truth_set.binary_search(v).is_ok()).count();
    Ok(hits as f64 / ideal.ids.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn top_r_examples() {
        assert_eq!(top_r(&[0.5, 0.2, 0.3], 2, &[]).unwrap().ids, vec![0, 2]);
        assert_eq!(top_r(&[0.5, 0.5], 1, &[]).unwrap().ids, vec![0]);
        assert_eq!(top_r(&[0.9, 0.1, 0.2], 2, &[0]).unwrap().ids, vec![2, 1]);
        let all = top_r(&[0.1, 0.3], 5, &[]).unwrap();
        assert!(all.truncated);
        assert_eq!(all.ids, vec![1, 0]);
        assert!(top_r(&[0.1], 0, &[]).is_err());
        assert!(top_r(&[f64::NAN], 1, &[]).is_err());
    }

    #[test]
    fn ndcg_examples() {
        let truth = [0.5, 0.3, 0.2];
        assert_eq!(ndcg_at_r(&truth, &truth, 3, &[]).unwrap(), 1.0);
        let approx = [0.3, 0.5, 0.2];
        let v = ndcg_at_r(&approx, &truth, 3, &[]).unwrap();
        let dcg = 0.3 + 0.5 / 3f64.log2() + 0.2 / 2.0;
        let idcg = 0.5 + 0.3 / 3f64.log2() + 0.2 / 2.0;
        assert!((dcg - 0.71546).abs() < 1e-5 && (idcg - 0.78928).abs() < 1e-5);
        assert!((v - dcg / idcg).abs() < 1e-14);
        assert!((v - 0.90648).abs() < 1e-5);

        let reversed = [0.1, 0.2, 0.3];
        assert!(ndcg_at_r(&reversed, &truth, 3, &[]).unwrap() < 1.0);
        assert_eq!(ndcg_at_r(&[0.3, 0.1], &[0.0, 0.0], 2, &[]).unwrap(), 1.0);
        assert!(ndcg_at_r(&[0.1], &truth, 1, &[]).is_err());
        assert!(ndcg_at_r(&[0.1], &[-0.1], 1, &[]).is_err());
    }

    #[test]
    fn recall_examples() {
        let truth = [0.4, 0.3, 0.2, 0.1];
        assert_eq!(recall_at_r(&truth, &truth, 2, &[]).unwrap(), 1.0);
        assert_eq!(recall_at_r(&[0.0, 0.0, 0.5, 0.6], &truth, 2, &[]).unwrap(), 0.0);
        assert_eq!(recall_at_r(&[0.1, 0.5, 0.4, 0.0], &truth, 2, &[]).unwrap(), 0.5);
        assert_eq!(recall_at_r(&[0.1, 0.5, 0.4, 0.0], &truth, 10, &[0]).unwrap(), 1.0);
    }

    #[test]
    fn binary_ndcg_tracks_recall() {
        let truth = [0.9, 0.8, 0.7, 0.6, 0.5, 0.4];
        let approx = [0.1, 0.8, 0.2, 0.6, 0.9, 0.0];
        let b = ndcg_at_r_with(&approx, &truth, 3, &[], Relevance::Binary).unwrap();
        let r = recall_at_r(&approx, &truth, 3, &[]).unwrap();
        assert!(b > 0.0 && b < 1.0);
        assert!((r - 1.0 / 3.0).abs() < 1e-15);
    }
}
