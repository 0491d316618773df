use longform_core::grpo::{select_batch, train_step};
use longform_core::policy::{policy_init_registry, PolicyInitParams, ToyPolicy};
use longform_core::rewards::{RewardParams, RewardStack};
use longform_core::{PromptSpec, TrainConfig, WordRange};

fn setup() -> (TrainConfig, Vec<PromptSpec>, RewardStack, ToyPolicy) {
    let cfg = TrainConfig {
        group_size: 8,
        batch_prompts: 2,
        max_tokens: 64,
        learning_rate: 0.5,
        inner_updates: 2,
        length_max: 80,
        default_range: WordRange::new(10, 20),
        ..TrainConfig::default()
    };
    let spec = cfg.default_range.with_cap(cfg.length_max).unwrap();
    let prompts = (0..3)
        .map(|i| {
            PromptSpec::new(format!("p{i}"), "Describe a river")
                .unwrap()
                .with_length_spec(spec)
        })
        .collect();
    let rewards = RewardStack::standard(&RewardParams::default()).unwrap();
    let policy = policy_init_registry()
        .create("grammar-prior", &PolicyInitParams::default())
        .unwrap();
    (cfg, prompts, rewards, policy)
}

fn run(cfg: &TrainConfig, steps: u64) -> (ToyPolicy, Vec<String>) {
    let (_, prompts, rewards, mut policy) = setup();
    let reference = policy.clone();
    let mut log = Vec::new();
    for step in 0..steps {
        let batch = select_batch(&prompts, step, cfg.batch_prompts);
        let m = train_step(&mut policy, &reference, &batch, &rewards, cfg, step).unwrap();
        log.push(serde_json::to_string(&m).unwrap());
    }
    (policy, log)
}

#[test]
fn seeded_runs_are_reproducible() {
    let (cfg, ..) = setup();
    let (p1, l1) = run(&cfg, 5);
    let (p2, l2) = run(&cfg, 5);
    assert_eq!(l1, l2);
    assert_eq!(p1, p2);
    let other = TrainConfig { seed: 1, ..cfg };
    assert_ne!(run(&other, 5).1, l1);
}

#[test]
fn zero_learning_rate_leaves_policy_unchanged() {
    let (cfg, prompts, rewards, policy) = setup();
    let cfg = TrainConfig {
        learning_rate: 0.0,
        ..cfg
    };
    let mut p = policy.clone();
    let m = train_step(&mut p, &policy, &prompts[..2], &rewards, &cfg, 0).unwrap();
    assert_eq!(p, policy);
    assert!(m.objective.abs() < 1e-9);
    assert_eq!(m.clip_fraction, 0.0);
}

#[test]
fn metrics_are_in_range() {
    let (cfg, ..) = setup();
    let cfg = TrainConfig { beta: 0.04, ..cfg };
    let (_, log) = run(&cfg, 4);
    for line in log {
        let m: longform_core::grpo::StepMetrics = serde_json::from_str(&line).unwrap();
        for v in [
            m.length_rm_mean,
            m.format_rm_mean,
            m.format_compliance_rate,
            m.clip_fraction,
        ] {
            assert!((0.0..=1.0).contains(&v), "{line}");
        }
        if let Some(len) = m.mean_nonoverlong_len {
            assert!(len >= 0.0);
        }
    }
}

#[test]
fn prompts_without_length_spec_are_rejected() {
    let (cfg, _, rewards, mut policy) = setup();
    let reference = policy.clone();
    let bare = vec![PromptSpec::new("x", "Describe a river").unwrap()];
    assert!(train_step(&mut policy, &reference, &bare, &rewards, &cfg, 0).is_err());
    assert!(train_step(&mut policy, &reference, &[], &rewards, &cfg, 0).is_err());
}
