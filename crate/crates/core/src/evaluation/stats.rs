//! Nonparametric significance tests on paired metric vectors.

use crate::error::{Error, Result};

use super::special::{chi_square_sf, normal_sf};

/// Largest number of nonzero differences handled by the exact null distribution.
pub const WILCOXON_EXACT_MAX: usize = 20;
pub const WILCOXON_MIN_PAIRS: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct WilcoxonResult {
    /// `min(W+, W-)`; absent when every difference is zero.
    pub statistic: Option<f64>,
    pub w_plus: f64,
    pub w_minus: f64,
    /// Pairs left after discarding zero differences.
    pub n_nonzero: usize,
    /// Two-sided p-value.
    pub p_value: f64,
    pub exact: bool,
}

/// 1-based ranks with ties sharing their average rank.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&i, &j| xs[i].total_cmp(&xs[j]));
    let mut ranks = vec![0.0; xs.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && xs[order[end]] == xs[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let avg = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

/// Sizes of the groups of equal values, singletons included.
fn tie_groups(xs: &[f64]) -> Vec<usize> {
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut groups = Vec::new();
    let mut start = 0;
    while start < sorted.len() {
        let mut end = start + 1;
        while end < sorted.len() && sorted[end] == sorted[start] {
            end += 1;
        }
        groups.push(end - start);
        start = end;
    }
    groups
}

/// Two-sided Wilcoxon signed-rank test of `a - b`.
///
/// Zero differences are discarded and tied magnitudes share their average
/// rank. Up to [`WILCOXON_EXACT_MAX`] nonzero pairs the p-value comes from
/// the exact permutation distribution of `W+`; beyond that a normal
/// approximation with continuity and tie corrections is used.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<WilcoxonResult> {
    if a.len() != b.len() {
        return Err(Error::param(format!("paired samples differ in length ({} vs {})", a.len(), b.len())));
    }
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(Error::data("paired samples must be finite"));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|&d| d != 0.0).collect();
    let n = diffs.len();
    if n == 0 {
        return Ok(WilcoxonResult {
            statistic: None,
            w_plus: 0.0,
            w_minus: 0.0,
            n_nonzero: 0,
            p_value: 1.0,
            exact: true,
        });
    }
    if n < WILCOXON_MIN_PAIRS {
        return Err(Error::data(format!(
            "Wilcoxon test needs at least {WILCOXON_MIN_PAIRS} nonzero differences, got {n}"
        )));
    }
    let magnitudes: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = average_ranks(&magnitudes);
    let w_plus: f64 = ranks.iter().zip(&diffs).filter(|(_, &d)| d > 0.0).map(|(r, _)| r).sum();
    let w_minus = n as f64 * (n as f64 + 1.0) / 2.0 - w_plus;

    let (p_value, exact) = if n <= WILCOXON_EXACT_MAX {
        (exact_p(&ranks, &diffs), true)
    } else {
        let mean = n as f64 * (n as f64 + 1.0) / 4.0;
        let ties: f64 = tie_groups(&magnitudes).iter().map(|&t| (t * t * t - t) as f64).sum();
        let var = n as f64 * (n as f64 + 1.0) * (2.0 * n as f64 + 1.0) / 24.0 - ties / 48.0;
        let z = ((w_plus - mean).abs() - 0.5).max(0.0) / var.sqrt();
        ((2.0 * normal_sf(z)).min(1.0), false)
    };
    Ok(WilcoxonResult {
        statistic: Some(w_plus.min(w_minus)),
        w_plus,
        w_minus,
        n_nonzero: n,
        p_value,
        exact,
    })
}

/// `min(1, 2 min(P(T <= W+), P(T >= W+)))` under the sign-flip null.
fn exact_p(ranks: &[f64], diffs: &[f64]) -> f64 {
    // doubled ranks are integers even with averaged ties
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let total: usize = doubled.iter().sum();
    let mut counts = vec![0u64; total + 1];
    counts[0] = 1;
    let mut reach = 0;
    for &r in &doubled {
        for s in (0..=reach).rev() {
            if counts[s] > 0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let observed: usize = doubled.iter().zip(diffs).filter(|(_, &d)| d > 0.0).map(|(r, _)| r).sum();
    let lower: u64 = counts[..=observed].iter().sum();
    let upper: u64 = counts[observed..].iter().sum();
    let outcomes = 1u64 << ranks.len();
    ((2 * lower.min(upper)) as f64 / outcomes as f64).min(1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FriedmanResult {
    /// Tie-corrected chi-square statistic.
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
    /// Mean within-block rank of each treatment.
    pub mean_ranks: Vec<f64>,
}

/// Friedman test over `matrix[treatment][block]`.
pub fn friedman_test(matrix: &[Vec<f64>]) -> Result<FriedmanResult> {
    let k = matrix.len();
    if k < 3 {
        return Err(Error::param(format!("Friedman test needs at least 3 treatments, got {k}")));
    }
    let n = matrix[0].len();
    if n < 2 {
        return Err(Error::param(format!("Friedman test needs at least 2 blocks, got {n}")));
    }
    if matrix.iter().any(|row| row.len() != n) {
        return Err(Error::param("every treatment needs a value for every block"));
    }
    if matrix.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::data("Friedman test values must be finite"));
    }

    let mut rank_sums = vec![0.0; k];
    let mut ties = 0.0;
    let mut block = vec![0.0; k];
    for b in 0..n {
        for (t, row) in matrix.iter().enumerate() {
            block[t] = row[b];
        }
        for (sum, r) in rank_sums.iter_mut().zip(average_ranks(&block)) {
            *sum += r;
        }
        ties += tie_groups(&block).iter().map(|&t| (t * t * t - t) as f64).sum::<f64>();
    }
    let (nf, kf) = (n as f64, k as f64);
    let mean_ranks = rank_sums.iter().map(|s| s / nf).collect();
    let correction = 1.0 - ties / (nf * (kf * kf * kf - kf));
    if correction <= 0.0 {
        return Ok(FriedmanResult {
            statistic: 0.0,
            df: k - 1,
            p_value: 1.0,
            mean_ranks,
        });
    }
    let sum_sq: f64 = rank_sums.iter().map(|r| r * r).sum();
    let raw = 12.0 / (nf * kf * (kf + 1.0)) * sum_sq - 3.0 * nf * (kf + 1.0);
    let statistic = (raw / correction).max(0.0);
    Ok(FriedmanResult {
        statistic,
        df: k - 1,
        p_value: chi_square_sf(statistic, (k - 1) as f64),
        mean_ranks,
    })
}
