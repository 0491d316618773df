//! Pairwise evaluation against baselines with order-swapped judging,
//! outcome aggregation and rating fits.

mod rating;

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use rating::{
    elo_expected, estimator_registry, fit_elo, leaderboard, BtMle, EstimatorParams, EstimatorRegistry, Game, OnlineElo,
    Rating, RatingEstimator, DEFAULT_ANCHOR, RATING_CLAMP,
};

use crate::error::{Error, Result};
use crate::judge::{pairwise_judge, Judge, Verdict};

/// Arena prompt line: `{id, prompt}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArenaPrompt {
    pub id: String,
    pub prompt: String,
}

/// Model output line: `{prompt_id, model, text}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelOutput {
    pub prompt_id: String,
    pub model: String,
    pub text: String,
}

/// One judged comparison. `model_a` is the candidate and `model_b` the
/// baseline; `order` names the model shown first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRecord {
    pub prompt_id: String,
    pub model_a: String,
    pub model_b: String,
    pub order: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ComparisonRecord {
    pub fn is_error(&self) -> bool {
        self.verdict.is_none()
    }

    /// Candidate's score in this single judgment.
    pub fn candidate_score(&self) -> Option<f64> {
        let v = self.verdict?;
        Some(if self.order == self.model_a {
            v.score_a()
        } else {
            1.0 - v.score_a()
        })
    }
}

/// Output text per (prompt id, model).
pub type OutputTable = HashMap<(String, String), String>;

pub fn output_table(outputs: &[ModelOutput]) -> Result<OutputTable> {
    let mut t = OutputTable::new();
    for o in outputs {
        if t.insert((o.prompt_id.clone(), o.model.clone()), o.text.clone())
            .is_some()
        {
            return Err(Error::invariant(
                "outputs",
                format!("duplicate output for prompt `{}` and model `{}`", o.prompt_id, o.model),
            ));
        }
    }
    Ok(t)
}

/// Judges the candidate against every baseline on every prompt, twice with
/// the response order swapped. A judge failure in either order marks both
/// records of that pair as errored.
pub fn run_arena(
    prompts: &[ArenaPrompt],
    candidate: &str,
    baselines: &[String],
    outputs: &OutputTable,
    judge: &dyn Judge,
) -> Result<Vec<ComparisonRecord>> {
    if baselines.iter().any(|b| b == candidate) {
        return Err(Error::invariant(
            "baselines",
            format!("candidate `{candidate}` is also a baseline"),
        ));
    }
    let text = |p: &str, m: &str| -> Result<&str> {
        outputs
            .get(&(p.to_string(), m.to_string()))
            .map(String::as_str)
            .ok_or_else(|| Error::invariant("outputs", format!("model `{m}` has no output for prompt `{p}`")))
    };
    let mut jobs = Vec::new();
    for p in prompts {
        let c = text(&p.id, candidate)?;
        for b in baselines {
            jobs.push((p, b, c, text(&p.id, b)?));
        }
    }
    let records: Vec<[ComparisonRecord; 2]> = jobs
        .into_par_iter()
        .map(|(p, b, c_text, b_text)| {
            let fwd = pairwise_judge(&p.prompt, c_text, b_text, judge);
            let swp = pairwise_judge(&p.prompt, b_text, c_text, judge);
            let record = |order: &str, verdict, error| ComparisonRecord {
                prompt_id: p.id.clone(),
                model_a: candidate.to_string(),
                model_b: b.clone(),
                order: order.to_string(),
                verdict,
                error,
            };
            match (fwd, swp) {
                (Ok(f), Ok(s)) => [record(candidate, Some(f), None), record(b, Some(s), None)],
                (f, s) => {
                    let msg = [f.err(), s.err()]
                        .into_iter()
                        .flatten()
                        .map(|e| e.to_string())
                        .collect::<Vec<_>>()
                        .join("; ");
                    log::warn!("prompt `{}` vs `{b}`: judge failed: {msg}", p.id);
                    [record(candidate, None, Some(msg.clone())), record(b, None, Some(msg))]
                }
            }
        })
        .collect();
    Ok(records.into_iter().flatten().collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Win,
    Tie,
    Loss,
}

impl Outcome {
    pub fn score(&self) -> f64 {
        match self {
            Outcome::Win => 1.0,
            Outcome::Tie => 0.5,
            Outcome::Loss => 0.0,
        }
    }
}

/// Candidate outcome from the forward (candidate shown as A) and swapped
/// (candidate shown as B) verdicts.
pub fn aggregate_pair(forward: Verdict, swapped: Verdict) -> Outcome {
    let s = (forward.score_a() + (1.0 - swapped.score_a())) / 2.0;
    if s > 0.5 {
        Outcome::Win
    } else if s < 0.5 {
        Outcome::Loss
    } else {
        Outcome::Tie
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairOutcome {
    pub prompt_id: String,
    pub candidate: String,
    pub baseline: String,
    pub outcome: Outcome,
}

/// Pairs up forward/swapped records; pairs with an error are skipped.
pub fn pair_outcomes(records: &[ComparisonRecord]) -> Vec<PairOutcome> {
    let mut halves: BTreeMap<(&str, &str, &str), [Option<Verdict>; 2]> = BTreeMap::new();
    let mut errored = std::collections::BTreeSet::new();
    for r in records {
        let key = (r.prompt_id.as_str(), r.model_a.as_str(), r.model_b.as_str());
        match r.verdict {
            None => {
                errored.insert(key);
            }
            Some(v) => {
                let slot = usize::from(r.order != r.model_a);
                halves.entry(key).or_default()[slot] = Some(v);
            }
        }
    }
    halves
        .into_iter()
        .filter(|(k, _)| !errored.contains(k))
        .filter_map(|((p, a, b), [f, s])| {
            Some(PairOutcome {
                prompt_id: p.to_string(),
                candidate: a.to_string(),
                baseline: b.to_string(),
                outcome: aggregate_pair(f?, s?),
            })
        })
        .collect()
}

pub fn outcome_games(outcomes: &[PairOutcome]) -> Vec<Game> {
    outcomes
        .iter()
        .map(|o| Game {
            a: o.candidate.clone(),
            b: o.baseline.clone(),
            score_a: o.outcome.score(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WinRateRow {
    pub baseline: String,
    pub wins: u64,
    pub ties: u64,
    pub losses: u64,
    pub win_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WinRateReport {
    pub rows: Vec<WinRateRow>,
    pub overall: Option<WinRateRow>,
}

fn row(baseline: &str, outcomes: &[Outcome]) -> WinRateRow {
    let count = |o: Outcome| outcomes.iter().filter(|x| **x == o).count() as u64;
    let (wins, ties, losses) = (count(Outcome::Win), count(Outcome::Tie), count(Outcome::Loss));
    WinRateRow {
        baseline: baseline.to_string(),
        wins,
        ties,
        losses,
        win_rate: (wins as f64 + 0.5 * ties as f64) / outcomes.len() as f64,
    }
}

/// Per-baseline win rates with ties as half wins, plus an overall row.
pub fn win_rate_report(outcomes: &[PairOutcome]) -> WinRateReport {
    let mut by: BTreeMap<&str, Vec<Outcome>> = BTreeMap::new();
    for o in outcomes {
        by.entry(&o.baseline).or_default().push(o.outcome);
    }
    let rows = by.iter().map(|(b, os)| row(b, os)).collect();
    let all: Vec<Outcome> = outcomes.iter().map(|o| o.outcome).collect();
    WinRateReport {
        rows,
        overall: (!all.is_empty()).then(|| row("overall", &all)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aggregation_table() {
        use Verdict::*;
        assert_eq!(aggregate_pair(AMuchBetter, BBetter), Outcome::Win);
        assert_eq!(aggregate_pair(ABetter, ABetter), Outcome::Tie);
        assert_eq!(aggregate_pair(ABetter, Tie), Outcome::Win);
        assert_eq!(aggregate_pair(Tie, Tie), Outcome::Tie);
        assert_eq!(aggregate_pair(BMuchBetter, Tie), Outcome::Loss);
    }

    #[test]
    fn swap_symmetry() {
        let mirror = |v: Verdict| match v {
            Verdict::AMuchBetter => Verdict::BMuchBetter,
            Verdict::ABetter => Verdict::BBetter,
            Verdict::Tie => Verdict::Tie,
            Verdict::BBetter => Verdict::ABetter,
            Verdict::BMuchBetter => Verdict::AMuchBetter,
        };
        for f in Verdict::ALL {
            for s in Verdict::ALL {
                assert_eq!(aggregate_pair(f, s), aggregate_pair(mirror(s), mirror(f)));
            }
        }
    }

    #[test]
    fn report_rows() {
        let mk = |o| PairOutcome {
            prompt_id: "p".into(),
            candidate: "c".into(),
            baseline: "b".into(),
            outcome: o,
        };
        let mut os = vec![mk(Outcome::Win); 98];
        os.push(mk(Outcome::Tie));
        os.push(mk(Outcome::Loss));
        let r = win_rate_report(&os);
        assert_eq!(r.rows.len(), 1);
        assert!((r.rows[0].win_rate - 0.985).abs() < 1e-12);
        assert!((r.overall.unwrap().win_rate - 0.985).abs() < 1e-12);
        let r = win_rate_report(&[mk(Outcome::Tie), mk(Outcome::Tie)]);
        assert_eq!(r.rows[0].win_rate, 0.5);
        let r = win_rate_report(&[]);
        assert!(r.rows.is_empty() && r.overall.is_none());
    }

    #[test]
    fn candidate_score_accounts_for_order() {
        let rec = |order: &str, v| ComparisonRecord {
            prompt_id: "p".into(),
            model_a: "c".into(),
            model_b: "b".into(),
            order: order.into(),
            verdict: Some(v),
            error: None,
        };
        assert_eq!(rec("c", Verdict::ABetter).candidate_score(), Some(1.0));
        assert_eq!(rec("b", Verdict::ABetter).candidate_score(), Some(0.0));
        let outs = pair_outcomes(&[rec("c", Verdict::ABetter), rec("b", Verdict::BBetter)]);
        assert_eq!(outs.len(), 1);
        assert_eq!(outs[0].outcome, Outcome::Win);
    }
}
