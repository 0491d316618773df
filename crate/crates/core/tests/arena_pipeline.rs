use longform_core::arena::{
    estimator_registry, leaderboard, outcome_games, output_table, pair_outcomes, run_arena, win_rate_report,
    ArenaPrompt, EstimatorParams, ModelOutput, Outcome,
};
use longform_core::judge::{ChatRequest, Judge, JudgeError};

/// Prefers whichever response mentions "strong"; fails when either
/// response mentions "broken".
struct KeywordJudge;

impl Judge for KeywordJudge {
    fn name(&self) -> &str {
        "keyword"
    }

    fn complete(&self, request: &ChatRequest) -> Result<String, JudgeError> {
        let user = &request.messages.last().unwrap().content;
        let a_start = user.find("<|The Start of Assistant A's Answer|>").unwrap();
        let b_start = user.find("<|The Start of Assistant B's Answer|>").unwrap();
        let (a, b) = (&user[a_start..b_start], &user[b_start..]);
        if a.contains("broken") || b.contains("broken") {
            return Err(JudgeError::Scripted("judge unavailable".into()));
        }
        Ok(match (a.contains("strong"), b.contains("strong")) {
            (true, false) => "My final verdict is: [[A>>B]]",
            (false, true) => "My final verdict is: [[B>A]]",
            _ => "My final verdict is tie: [[A=B]]",
        }
        .into())
    }
}

fn setup(n: usize) -> (Vec<ArenaPrompt>, Vec<ModelOutput>) {
    let prompts: Vec<_> = (0..n)
        .map(|i| ArenaPrompt {
            id: format!("p{i}"),
            prompt: format!("Write piece {i}"),
        })
        .collect();
    let mut outputs = Vec::new();
    for p in &prompts {
        for (model, text) in [
            ("cand", "a strong answer"),
            ("weak", "a plain answer"),
            ("flaky", "a broken answer"),
        ] {
            outputs.push(ModelOutput {
                prompt_id: p.id.clone(),
                model: model.into(),
                text: format!("{text} to {}", p.id),
            });
        }
    }
    (prompts, outputs)
}

#[test]
fn candidate_that_always_wins_tops_the_board() {
    let (prompts, outputs) = setup(5);
    let table = output_table(&outputs).unwrap();
    let records = run_arena(&prompts, "cand", &["weak".into()], &table, &KeywordJudge).unwrap();
    assert_eq!(records.len(), 10);
    let orders: Vec<_> = records.iter().map(|r| r.order.as_str()).collect();
    assert_eq!(&orders[..2], ["cand", "weak"]);
    let outcomes = pair_outcomes(&records);
    assert!(outcomes.iter().all(|o| o.outcome == Outcome::Win));
    let report = win_rate_report(&outcomes);
    assert_eq!(report.overall.unwrap().win_rate, 1.0);
    for name in ["bt-mle", "online-elo"] {
        let est = estimator_registry().create(name, &EstimatorParams::default()).unwrap();
        let board = leaderboard(est.fit(&outcome_games(&outcomes), &["weak".into()], 1000.0).unwrap());
        assert_eq!(board[0].model, "cand", "{name}");
    }
}

#[test]
fn failures_mark_both_orders_and_are_excluded() {
    let (prompts, outputs) = setup(3);
    let table = output_table(&outputs).unwrap();
    let records = run_arena(
        &prompts,
        "cand",
        &["weak".into(), "flaky".into()],
        &table,
        &KeywordJudge,
    )
    .unwrap();
    assert_eq!(records.len(), 12);
    let errored: Vec<_> = records.iter().filter(|r| r.is_error()).collect();
    assert_eq!(errored.len(), 6);
    assert!(errored.iter().all(|r| r.model_b == "flaky" && r.error.is_some()));
    let outcomes = pair_outcomes(&records);
    assert_eq!(outcomes.len(), 3);
    assert!(outcomes.iter().all(|o| o.baseline == "weak"));
}

#[test]
fn missing_outputs_and_bad_baselines_are_rejected() {
    let (prompts, mut outputs) = setup(2);
    outputs.retain(|o| !(o.model == "weak" && o.prompt_id == "p1"));
    let table = output_table(&outputs).unwrap();
    let err = run_arena(&prompts, "cand", &["weak".into()], &table, &KeywordJudge).unwrap_err();
    assert!(err.to_string().contains("weak"));
    assert!(run_arena(&prompts, "cand", &["cand".into()], &table, &KeywordJudge).is_err());
    let dup = vec![outputs[0].clone(), outputs[0].clone()];
    assert!(output_table(&dup).is_err());
}

#[test]
fn records_round_trip_through_jsonl() {
    let (prompts, outputs) = setup(2);
    let table = output_table(&outputs).unwrap();
    let records = run_arena(
        &prompts,
        "cand",
        &["weak".into(), "flaky".into()],
        &table,
        &KeywordJudge,
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("records.jsonl");
    longform_core::io::write_jsonl(&path, &records).unwrap();
    let back: Vec<longform_core::arena::ComparisonRecord> = longform_core::io::read_jsonl(&path).unwrap();
    assert_eq!(back, records);
}
