use otiz_core::eval::{
    agreement, compare_sti_nonsti, parse_records, render_cell, summarize, tally_themes, Codebook, Corpus, Criterion,
};
use otiz_core::KnowledgeBase;

fn records() -> Vec<otiz_core::eval::EvaluationRecord> {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/study_records.jsonl")).unwrap();
    parse_records(&text).unwrap()
}

#[test]
fn shape_matches_study() {
    let r = records();
    assert_eq!(r.len(), 60);
    let evaluators: std::collections::BTreeSet<_> = r.iter().map(|r| &r.evaluator_id).collect();
    assert_eq!(evaluators.len(), 23);
}

#[test]
fn correctness_cells_are_perfect() {
    let cells = summarize(&records(), &Corpus::bundled()).unwrap();
    let correctness: Vec<_> = cells.iter().filter(|c| c.criterion == Criterion::Correctness).collect();
    assert_eq!(correctness.len(), 6);
    for c in correctness {
        assert_eq!(render_cell(c), "5.0 ± 0.0 (5)");
    }
}

#[test]
fn agreement_nineteen_of_150() {
    let corpus = Corpus::bundled();
    let a = agreement(&records(), &corpus, 1, &[Criterion::Correctness]).unwrap();
    assert_eq!((a.discordant, a.total_pairs), (19, 150));
    assert_eq!(a.rate_display, "0.127");
    assert_eq!(a.discordant_by_condition["anogenital_warts"], 7);
    assert_eq!(a.discordant_by_condition["urethritis_cervicitis"], 6);

    let all = agreement(&records(), &corpus, 1, &[]).unwrap();
    assert_eq!((all.discordant, all.total_pairs), (19, 180));
}

#[test]
fn theme_counts() {
    let t = tally_themes(&records(), &Codebook::bundled());
    let got: Vec<usize> = t.counts.iter().map(|c| c.count).collect();
    assert_eq!(got, vec![13, 7, 5, 3, 13, 10, 8, 7, 2]);
    let redundancy = t.counts.iter().find(|c| c.theme_id == "redundancy").unwrap();
    assert_eq!(format!("{:.2}", redundancy.percentage), "56.52");
}

#[test]
fn sti_scores_higher_on_diagnosis() {
    let cmp = compare_sti_nonsti(&records(), &Corpus::bundled(), &KnowledgeBase::bundled(), Criterion::DiagnosticAccuracy)
        .unwrap();
    assert_eq!(cmp.sti_scores.len(), 20);
    assert!(cmp.sti_mean > cmp.non_sti_mean);
    assert!(cmp.pairing.contains("position"));
}
