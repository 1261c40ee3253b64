use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Corpus, Criterion, EvalError, EvaluationRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryCell {
    pub condition_id: String,
    pub criterion: Criterion,
    pub mean: f64,
    pub sd: f64,
    pub median: f64,
    pub n: usize,
}

fn describe(values: &mut [i64]) -> (f64, f64, f64) {
    values.sort_unstable();
    let n = values.len();
    let mean = values.iter().sum::<i64>() as f64 / n as f64;
    let sd = if n < 2 {
        0.0
    } else {
        let ss: f64 = values.iter().map(|&v| (v as f64 - mean).powi(2)).sum();
        (ss / (n - 1) as f64).sqrt()
    };
    let median = if n % 2 == 1 {
        values[n / 2] as f64
    } else {
        (values[n / 2 - 1] + values[n / 2]) as f64 / 2.0
    };
    (mean, sd, median)
}

/// Mean, sample standard deviation and median per condition and criterion.
/// Cells follow the corpus' condition order, then criterion order.
pub fn summarize(records: &[EvaluationRecord], corpus: &Corpus) -> Result<Vec<SummaryCell>, EvalError> {
    if records.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let lookup = corpus.conditions();
    let mut buckets: BTreeMap<(&str, Criterion), Vec<i64>> = BTreeMap::new();
    for r in records {
        let condition = lookup
            .get(r.prompt_id.as_str())
            .ok_or_else(|| EvalError::Validation(format!("unknown prompt {}", r.prompt_id)))?;
        for c in Criterion::ALL {
            let v = *r
                .scores
                .get(&c)
                .ok_or_else(|| EvalError::Validation(format!("missing score for {}", c.as_str())))?;
            buckets.entry((condition, c)).or_default().push(v);
        }
    }
    let mut order: Vec<&str> = Vec::new();
    for p in &corpus.prompts {
        if !order.contains(&p.condition_id.as_str()) {
            order.push(&p.condition_id);
        }
    }
    let mut cells = Vec::new();
    for condition in order {
        for c in Criterion::ALL {
            if let Some(values) = buckets.get_mut(&(condition, c)) {
                let (mean, sd, median) = describe(values);
                cells.push(SummaryCell {
                    condition_id: condition.to_owned(),
                    criterion: c,
                    mean,
                    sd,
                    median,
                    n: values.len(),
                });
            }
        }
    }
    Ok(cells)
}

/// `mean ± sd (median)`, one decimal each; a whole-number median drops its
/// decimal.
pub fn render_cell(cell: &SummaryCell) -> String {
    let median = if cell.median.fract() == 0.0 {
        format!("{}", cell.median as i64)
    } else {
        format!("{:.1}", cell.median)
    };
    format!("{:.1} ± {:.1} ({median})", cell.mean, cell.sd)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub threshold: i64,
    pub excluded: Vec<Criterion>,
    pub total_pairs: usize,
    pub discordant: usize,
    pub rate: f64,
    pub rate_display: String,
    pub discordant_by_condition: BTreeMap<String, usize>,
}

/// Pairs the two evaluations of each prompt per criterion; a pair is
/// discordant when the scores differ by more than `threshold`.
pub fn agreement(
    records: &[EvaluationRecord],
    corpus: &Corpus,
    threshold: i64,
    exclude: &[Criterion],
) -> Result<AgreementReport, EvalError> {
    let mut by_prompt: BTreeMap<&str, Vec<&EvaluationRecord>> = BTreeMap::new();
    for r in records {
        by_prompt.entry(&r.prompt_id).or_default().push(r);
    }
    let lookup = corpus.conditions();
    let criteria: Vec<Criterion> = Criterion::ALL.into_iter().filter(|c| !exclude.contains(c)).collect();
    let mut total = 0;
    let mut discordant = 0;
    let mut by_condition: BTreeMap<String, usize> = BTreeMap::new();
    for (prompt, evals) in &by_prompt {
        let [a, b] = evals.as_slice() else {
            return Err(EvalError::UnpairedPrompt((*prompt).to_owned()));
        };
        let condition = lookup.get(prompt).copied().unwrap_or(prompt).to_owned();
        for &c in &criteria {
            total += 1;
            if (a.score(c) - b.score(c)).abs() > threshold {
                discordant += 1;
                *by_condition.entry(condition.clone()).or_default() += 1;
            }
        }
    }
    let rate = if total == 0 { 0.0 } else { discordant as f64 / total as f64 };
    Ok(AgreementReport {
        threshold,
        excluded: exclude.to_vec(),
        total_pairs: total,
        discordant,
        rate,
        rate_display: format!("{rate:.3}"),
        discordant_by_condition: by_condition,
    })
}
