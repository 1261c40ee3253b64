use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::{Complexity, Corpus, Criterion, EvalError, EvaluationRecord};
use crate::kb::KnowledgeBase;

/// Largest effective sample size tested with the exact null distribution.
pub const EXACT_MAX_N: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WilcoxonMethod {
    Exact,
    NormalApprox,
}

/// Zero differences are dropped before ranking (`Wilcox`) or ranked and
/// then dropped (`Pratt`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroMethod {
    #[default]
    Wilcox,
    Pratt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    pub n_input: usize,
    pub n_effective: usize,
    pub w_statistic: f64,
    pub w_plus: f64,
    pub w_minus: f64,
    pub p_value: f64,
    pub method: WilcoxonMethod,
    pub zero_method: ZeroMethod,
}

struct Ranked {
    n_input: usize,
    /// Doubled ranks of the non-zero differences, with their signs.
    doubled: Vec<u64>,
    positive: Vec<bool>,
}

impl Ranked {
    fn w_plus(&self) -> f64 {
        self.sum_doubled(true) as f64 / 2.0
    }

    fn w_minus(&self) -> f64 {
        self.sum_doubled(false) as f64 / 2.0
    }

    fn sum_doubled(&self, sign: bool) -> u64 {
        self.doubled
            .iter()
            .zip(&self.positive)
            .filter(|(_, &p)| p == sign)
            .map(|(r, _)| *r)
            .sum()
    }

    /// Null distribution of the doubled positive rank sum: `counts[s]` sign
    /// patterns give sum `s`.
    fn null_counts(&self) -> Vec<f64> {
        let total: u64 = self.doubled.iter().sum();
        let mut counts = vec![0.0f64; total as usize + 1];
        counts[0] = 1.0;
        let mut reach = 0usize;
        for &r in &self.doubled {
            let r = r as usize;
            for s in (0..=reach).rev() {
                if counts[s] != 0.0 {
                    counts[s + r] += counts[s];
                }
            }
            reach += r;
        }
        counts
    }

    fn exact_cdf_le(&self, doubled_w: u64) -> f64 {
        let counts = self.null_counts();
        let patterns = 2f64.powi(self.doubled.len() as i32);
        counts.iter().take(doubled_w as usize + 1).sum::<f64>() / patterns
    }

    fn exact_sf_ge(&self, doubled_w: u64) -> f64 {
        let counts = self.null_counts();
        let patterns = 2f64.powi(self.doubled.len() as i32);
        counts.iter().skip(doubled_w as usize).sum::<f64>() / patterns
    }

    fn normal_moments(&self) -> (f64, f64) {
        let ranks = self.doubled.iter().map(|&r| r as f64 / 2.0);
        let mean = ranks.clone().sum::<f64>() / 2.0;
        let var = ranks.map(|r| r * r).sum::<f64>() / 4.0;
        (mean, var.sqrt())
    }
}

fn rank(x: &[f64], y: &[f64], zeros: ZeroMethod) -> Result<Ranked, EvalError> {
    if x.len() != y.len() {
        return Err(EvalError::LengthMismatch(x.len(), y.len()));
    }
    let diffs: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    if diffs.iter().any(|d| !d.is_finite()) {
        return Err(EvalError::Validation("differences must be finite".into()));
    }
    let pool: Vec<f64> = match zeros {
        ZeroMethod::Wilcox => diffs.iter().copied().filter(|d| *d != 0.0).collect(),
        ZeroMethod::Pratt => diffs.clone(),
    };
    if !pool.iter().any(|d| *d != 0.0) {
        return Err(EvalError::AllZeroDifferences);
    }
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.sort_by(|&a, &b| pool[a].abs().total_cmp(&pool[b].abs()));
    let mut doubled = vec![0u64; pool.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && pool[order[j + 1]].abs() == pool[order[i]].abs() {
            j += 1;
        }
        // positions i..=j share the mid-rank (i+1 + j+1)/2
        let mid2 = (i + 1 + j + 1) as u64;
        for &k in &order[i..=j] {
            doubled[k] = mid2;
        }
        i = j + 1;
    }
    let (doubled, positive) = pool
        .iter()
        .zip(doubled)
        .filter(|(d, _)| **d != 0.0)
        .map(|(d, r)| (r, *d > 0.0))
        .unzip();
    Ok(Ranked {
        n_input: x.len(),
        doubled,
        positive,
    })
}

/// Two-sided signed-rank test with zero differences dropped.
pub fn wilcoxon_signed_rank(x: &[f64], y: &[f64]) -> Result<WilcoxonResult, EvalError> {
    wilcoxon_with(x, y, ZeroMethod::Wilcox)
}

/// Two-sided signed-rank test: `p = min(1, 2 P(T <= W))`, `W = min(W+, W-)`.
pub fn wilcoxon_with(x: &[f64], y: &[f64], zeros: ZeroMethod) -> Result<WilcoxonResult, EvalError> {
    let r = rank(x, y, zeros)?;
    let n = r.doubled.len();
    let (w_plus, w_minus) = (r.w_plus(), r.w_minus());
    let w = w_plus.min(w_minus);
    let (p, method) = if n <= EXACT_MAX_N {
        let doubled_w = r.sum_doubled(true).min(r.sum_doubled(false));
        ((2.0 * r.exact_cdf_le(doubled_w)).min(1.0), WilcoxonMethod::Exact)
    } else {
        let (mean, sd) = r.normal_moments();
        let z = ((w_plus - mean).abs() - 0.5).max(0.0) / sd;
        let upper = 1.0 - Normal::standard().cdf(z);
        ((2.0 * upper).min(1.0), WilcoxonMethod::NormalApprox)
    };
    Ok(WilcoxonResult {
        n_input: r.n_input,
        n_effective: n,
        w_statistic: w,
        w_plus,
        w_minus,
        p_value: p,
        method,
        zero_method: zeros,
    })
}

/// One-sided p-value for the alternative that `x` tends to exceed `y`.
pub fn p_greater(x: &[f64], y: &[f64]) -> Result<f64, EvalError> {
    let r = rank(x, y, ZeroMethod::Wilcox)?;
    if r.doubled.len() <= EXACT_MAX_N {
        Ok(r.exact_sf_ge(r.sum_doubled(true)))
    } else {
        let (mean, sd) = r.normal_moments();
        let z = (r.w_plus() - mean - 0.5) / sd;
        Ok(1.0 - Normal::standard().cdf(z))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StiComparison {
    pub criterion: Criterion,
    pub pairing: String,
    pub sti_scores: Vec<f64>,
    pub non_sti_scores: Vec<f64>,
    pub sti_mean: f64,
    pub non_sti_mean: f64,
    pub result: WilcoxonResult,
}

const PAIRING: &str = "Per-prompt score is the mean of that prompt's evaluations. Within each condition, \
prompts are ordered by (complexity: straightforward then complex, corpus position). The non-STI \
conditions are averaged position-wise into one reference series, and every STI condition's series \
is paired with that reference position by position.";

/// Signed-rank comparison of STI against non-STI prompt scores on one
/// criterion, using the pairing described in `StiComparison::pairing`.
pub fn compare_sti_nonsti(
    records: &[EvaluationRecord],
    corpus: &Corpus,
    kb: &KnowledgeBase,
    criterion: Criterion,
) -> Result<StiComparison, EvalError> {
    let mut per_prompt: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for r in records {
        let v = *r
            .scores
            .get(&criterion)
            .ok_or_else(|| EvalError::Validation(format!("missing score for {}", criterion.as_str())))?;
        per_prompt.entry(&r.prompt_id).or_default().push(v as f64);
    }

    let series = |condition_id: &str| -> Vec<f64> {
        let mut prompts: Vec<(Complexity, usize, &str)> = corpus
            .prompts
            .iter()
            .filter(|p| p.condition_id == condition_id)
            .enumerate()
            .map(|(i, p)| (p.complexity, i, p.id.as_str()))
            .collect();
        prompts.sort();
        prompts
            .iter()
            .filter_map(|(_, _, id)| per_prompt.get(id))
            .map(|v| v.iter().sum::<f64>() / v.len() as f64)
            .collect()
    };

    let sti: Vec<Vec<f64>> = kb.conditions().iter().filter(|c| c.is_sti).map(|c| series(&c.id)).collect();
    let non: Vec<Vec<f64>> = kb.conditions().iter().filter(|c| !c.is_sti).map(|c| series(&c.id)).collect();
    let len = sti.iter().chain(&non).map(Vec::len).min().unwrap_or(0);
    if len == 0 {
        return Err(EvalError::Validation("records must cover every STI and non-STI condition".into()));
    }
    let reference: Vec<f64> = (0..len)
        .map(|i| non.iter().map(|s| s[i]).sum::<f64>() / non.len() as f64)
        .collect();

    let mut x = Vec::new();
    let mut y = Vec::new();
    for s in &sti {
        for i in 0..len {
            x.push(s[i]);
            y.push(reference[i]);
        }
    }
    let result = wilcoxon_signed_rank(&x, &y)?;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(StiComparison {
        criterion,
        pairing: PAIRING.to_owned(),
        sti_mean: mean(&x),
        non_sti_mean: mean(&y),
        sti_scores: x,
        non_sti_scores: y,
        result,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Plain mid-ranks by counting, written without sorting.
    fn naive_ranks(a: &[f64]) -> Vec<f64> {
        a.iter()
            .map(|&v| {
                let below = a.iter().filter(|&&w| w < v).count() as f64;
                let equal = a.iter().filter(|&&w| w == v).count() as f64;
                below + (equal + 1.0) / 2.0
            })
            .collect()
    }

    /// Two-sided p by listing all 2^n sign assignments.
    fn brute_p(x: &[f64], y: &[f64]) -> f64 {
        let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).filter(|d| *d != 0.0).collect();
        let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
        let ranks = naive_ranks(&abs);
        let wp: f64 = ranks.iter().zip(&d).filter(|(_, v)| **v > 0.0).map(|(r, _)| r).sum();
        let wm: f64 = ranks.iter().zip(&d).filter(|(_, v)| **v < 0.0).map(|(r, _)| r).sum();
        let w = wp.min(wm);
        let n = d.len();
        let mut hits = 0u64;
        for mask in 0u64..(1 << n) {
            let s: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
            if s <= w + 1e-9 {
                hits += 1;
            }
        }
        (2.0 * hits as f64 / (1u64 << n) as f64).min(1.0)
    }

    #[test]
    fn all_positive_five() {
        let r = wilcoxon_signed_rank(&[2.0, 3.0, 4.0, 5.0, 6.0], &[1.0; 5]).unwrap();
        assert_eq!(r.w_statistic, 0.0);
        assert_eq!(r.method, WilcoxonMethod::Exact);
        assert!((r.p_value - 0.0625).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        assert_eq!(wilcoxon_signed_rank(&[1.0, 2.0], &[1.0, 2.0]), Err(EvalError::AllZeroDifferences));
        assert_eq!(wilcoxon_signed_rank(&[1.0], &[1.0, 2.0]), Err(EvalError::LengthMismatch(1, 2)));
    }

    #[test]
    fn pratt_keeps_zero_ranks() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [1.0, 1.0, 1.0, 1.0];
        let w = wilcoxon_with(&x, &y, ZeroMethod::Wilcox).unwrap();
        let p = wilcoxon_with(&x, &y, ZeroMethod::Pratt).unwrap();
        assert_eq!(w.w_plus, 6.0);
        assert_eq!(p.w_plus, 9.0);
        assert_eq!(p.n_effective, 3);
    }

    #[test]
    fn large_sample_uses_normal() {
        let x: Vec<f64> = (0..20).map(|i| i as f64 + 2.0).collect();
        let y: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let r = wilcoxon_signed_rank(&x, &y).unwrap();
        assert_eq!(r.method, WilcoxonMethod::NormalApprox);
        assert!(r.p_value < 0.05);
    }

    proptest! {
        #[test]
        fn exact_matches_enumeration(pairs in prop::collection::vec((0i32..6, 0i32..6), 1..=10)) {
            let x: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
            let y: Vec<f64> = pairs.iter().map(|p| p.1 as f64).collect();
            match wilcoxon_signed_rank(&x, &y) {
                Ok(r) => prop_assert!((r.p_value - brute_p(&x, &y)).abs() < 1e-12),
                Err(e) => prop_assert_eq!(e, EvalError::AllZeroDifferences),
            }
        }

        #[test]
        fn shift_never_raises_one_sided_p(
            mags in prop::sample::subsequence((0..24).collect::<Vec<i32>>(), 3..=10),
            signs in prop::collection::vec(any::<bool>(), 10),
            c in 1i32..4,
        ) {
            let d0: Vec<f64> = mags
                .iter()
                .zip(&signs)
                .map(|(&m, &s)| if s { m as f64 + 0.5 } else { -(m as f64 + 0.5) })
                .collect();
            let d1: Vec<f64> = d0.iter().map(|d| d + c as f64).collect();
            let distinct = |ds: &[f64]| {
                let mut a: Vec<i64> = ds.iter().map(|v| (v.abs() * 2.0) as i64).collect();
                a.sort();
                a.dedup();
                a.len() == ds.len()
            };
            prop_assume!(distinct(&d1));
            let y = vec![0.0; d0.len()];
            prop_assert!(p_greater(&d1, &y).unwrap() <= p_greater(&d0, &y).unwrap() + 1e-12);
        }
    }
}
