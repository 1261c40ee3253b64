use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EvalError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub evaluator_id: String,
    pub prompt_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignmentPlan {
    pub per_prompt: usize,
    pub cap: usize,
    pub seed: u64,
    pub assignments: Vec<Assignment>,
}

fn distinct(ids: &[String], what: &str) -> Result<(), EvalError> {
    let mut seen = BTreeSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(EvalError::Validation(format!("duplicate {what} id {id}")));
        }
    }
    Ok(())
}

/// Greedy fill: prompts are visited in a seed-shuffled order and each goes
/// to the `per_prompt` least-loaded evaluators (ties by id).
pub fn build_assignment(
    prompt_ids: &[String],
    evaluator_ids: &[String],
    per_prompt: usize,
    cap: usize,
    seed: u64,
) -> Result<AssignmentPlan, EvalError> {
    distinct(prompt_ids, "prompt")?;
    distinct(evaluator_ids, "evaluator")?;
    if per_prompt == 0 {
        return Err(EvalError::Infeasible("per_prompt must be at least 1".into()));
    }
    if evaluator_ids.len() < per_prompt {
        return Err(EvalError::Infeasible(format!(
            "each prompt needs {per_prompt} distinct evaluators but only {} exist",
            evaluator_ids.len()
        )));
    }
    let slots = prompt_ids.len() * per_prompt;
    let capacity = evaluator_ids.len() * cap;
    if slots > capacity {
        return Err(EvalError::Infeasible(format!(
            "{slots} evaluation slots exceed capacity of {capacity} ({} evaluators x cap {cap})",
            evaluator_ids.len()
        )));
    }

    let mut order: Vec<&String> = prompt_ids.iter().collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut evaluators: Vec<&String> = evaluator_ids.iter().collect();
    evaluators.sort();
    let mut load: BTreeMap<&String, usize> = evaluators.iter().map(|e| (*e, 0)).collect();

    let mut assignments = Vec::with_capacity(slots);
    for prompt in order {
        let mut pool: Vec<&String> = evaluators.iter().copied().filter(|e| load[e] < cap).collect();
        pool.sort_by_key(|e| (load[e], *e));
        if pool.len() < per_prompt {
            return Err(EvalError::Infeasible(format!("no room left for prompt {prompt}")));
        }
        for e in pool.into_iter().take(per_prompt) {
            *load.get_mut(e).expect("known evaluator") += 1;
            assignments.push(Assignment {
                evaluator_id: e.clone(),
                prompt_id: prompt.clone(),
            });
        }
    }
    Ok(AssignmentPlan {
        per_prompt,
        cap,
        seed,
        assignments,
    })
}

/// Independent re-check of a plan: every prompt covered exactly
/// `per_prompt` times by distinct known evaluators, nobody above `cap`.
pub fn verify_assignment(
    plan: &AssignmentPlan,
    prompt_ids: &[String],
    evaluator_ids: &[String],
    per_prompt: usize,
    cap: usize,
) -> Result<(), Vec<String>> {
    let prompts: BTreeSet<&str> = prompt_ids.iter().map(String::as_str).collect();
    let evaluators: BTreeSet<&str> = evaluator_ids.iter().map(String::as_str).collect();
    let mut problems = Vec::new();
    let mut per: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    let mut load: BTreeMap<&str, usize> = BTreeMap::new();
    for a in &plan.assignments {
        if !prompts.contains(a.prompt_id.as_str()) {
            problems.push(format!("unknown prompt {}", a.prompt_id));
        }
        if !evaluators.contains(a.evaluator_id.as_str()) {
            problems.push(format!("unknown evaluator {}", a.evaluator_id));
        }
        per.entry(&a.prompt_id).or_default().push(&a.evaluator_id);
        *load.entry(&a.evaluator_id).or_default() += 1;
    }
    for p in &prompts {
        let got = per.get(p).map(Vec::as_slice).unwrap_or(&[]);
        if got.len() != per_prompt {
            problems.push(format!("prompt {p} has {} evaluations, expected {per_prompt}", got.len()));
        }
        let unique: BTreeSet<_> = got.iter().collect();
        if unique.len() != got.len() {
            problems.push(format!("prompt {p} has a repeated evaluator"));
        }
    }
    for (e, n) in load {
        if n > cap {
            problems.push(format!("evaluator {e} has {n} prompts, cap is {cap}"));
        }
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(problems)
    }
}
