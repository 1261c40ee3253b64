use serde::{Deserialize, Serialize};

use super::{
    agreement, compare_sti_nonsti, render_cell, summarize, tally_themes, AgreementReport, Codebook, Corpus,
    Criterion, EvalError, EvaluationRecord, StiComparison, SummaryCell, ThemeTally,
};
use crate::kb::KnowledgeBase;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub condition_id: String,
    pub condition: String,
    pub cells: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub records: usize,
    pub summary: Vec<SummaryCell>,
    pub summary_table: Vec<TableRow>,
    pub agreement: Option<AgreementReport>,
    pub agreement_error: Option<String>,
    pub wilcoxon: Option<StiComparison>,
    pub wilcoxon_error: Option<String>,
    pub themes: ThemeTally,
}

/// Full report over a record set. Agreement and the signed-rank test are
/// reported as errors rather than failing the whole report when the data
/// cannot support them.
pub fn stats_report(
    records: &[EvaluationRecord],
    corpus: &Corpus,
    kb: &KnowledgeBase,
    codebook: &Codebook,
    exclude: &[Criterion],
) -> Result<StatsReport, EvalError> {
    let summary = summarize(records, corpus)?;
    let mut summary_table: Vec<TableRow> = Vec::new();
    for cell in &summary {
        if summary_table.last().is_none_or(|r| r.condition_id != cell.condition_id) {
            summary_table.push(TableRow {
                condition_id: cell.condition_id.clone(),
                condition: kb
                    .condition(&cell.condition_id)
                    .map_or_else(|| cell.condition_id.clone(), |c| c.name.clone()),
                cells: Vec::new(),
            });
        }
        summary_table.last_mut().expect("row pushed").cells.push(render_cell(cell));
    }
    let (agreement, agreement_error) = match agreement(records, corpus, 1, exclude) {
        Ok(a) => (Some(a), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let (wilcoxon, wilcoxon_error) = match compare_sti_nonsti(records, corpus, kb, Criterion::DiagnosticAccuracy) {
        Ok(w) => (Some(w), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Ok(StatsReport {
        records: records.len(),
        summary,
        summary_table,
        agreement,
        agreement_error,
        wilcoxon,
        wilcoxon_error,
        themes: tally_themes(records, codebook),
    })
}

impl StatsReport {
    /// Human-readable table: one row per condition, one column per criterion.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let mut header = vec!["Disease Class".to_owned()];
        header.extend(Criterion::ALL.iter().map(|c| c.title().to_owned()));
        let mut rows = vec![header];
        rows.extend(self.summary_table.iter().map(|r| {
            let mut v = vec![r.condition.clone()];
            v.extend(r.cells.iter().cloned());
            v
        }));
        let widths: Vec<usize> = (0..rows[0].len())
            .map(|i| rows.iter().map(|r| r.get(i).map_or(0, |c| c.chars().count())).max().unwrap_or(0))
            .collect();
        for row in &rows {
            let line: Vec<String> = row
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c}{}", " ".repeat(w - c.chars().count())))
                .collect();
            out.push_str(line.join("  ").trim_end());
            out.push('\n');
        }
        out.push('\n');
        match (&self.agreement, &self.agreement_error) {
            (Some(a), _) => out.push_str(&format!(
                "Agreement: {} of {} pairs differ by more than {} point ({}%)\n",
                a.discordant,
                a.total_pairs,
                a.threshold,
                format_args!("{:.1}", a.rate * 100.0)
            )),
            (None, Some(e)) => out.push_str(&format!("Agreement: unavailable ({e})\n")),
            _ => {}
        }
        match (&self.wilcoxon, &self.wilcoxon_error) {
            (Some(w), _) => out.push_str(&format!(
                "STI vs non-STI ({}): STI mean {:.2}, non-STI mean {:.2}, W = {}, n = {}, p = {:.4} ({})\n",
                w.criterion.as_str(),
                w.sti_mean,
                w.non_sti_mean,
                w.result.w_statistic,
                w.result.n_effective,
                w.result.p_value,
                match w.result.method {
                    super::WilcoxonMethod::Exact => "exact",
                    super::WilcoxonMethod::NormalApprox => "normal approximation",
                }
            )),
            (None, Some(e)) => out.push_str(&format!("STI vs non-STI: unavailable ({e})\n")),
            _ => {}
        }
        out.push_str(&format!("\nFeedback themes ({} evaluators):\n", self.themes.evaluators));
        for t in &self.themes.counts {
            out.push_str(&format!("  {} (n={}, {:.2}%)\n", t.label, t.count, t.percentage));
        }
        out
    }
}
