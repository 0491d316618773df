use longform_core::rewards::{bt_pair_loss, pairwise_accuracy, train_writing_rm, RmTrainConfig};
use longform_core::synthetic::synthetic_pairs;

#[test]
fn recovers_hidden_scorer_on_held_out_pairs() {
    let train = synthetic_pairs(1000, 11);
    let held_out = synthetic_pairs(200, 12);
    let report = train_writing_rm(&train, &RmTrainConfig::default()).unwrap();
    let train_acc = pairwise_accuracy(&report.model, &train);
    let test_acc = pairwise_accuracy(&report.model, &held_out);
    println!("train {train_acc:.3} held-out {test_acc:.3}");
    assert!(test_acc >= 0.95, "held-out accuracy {test_acc}");
    assert!(report.losses.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn pair_loss_spot_values() {
    assert!((bt_pair_loss(0.0, 0.0) - 2f64.ln()).abs() < 1e-12);
    assert!((bt_pair_loss(3f64.ln(), 0.0) - (4.0f64 / 3.0).ln()).abs() < 1e-12);
}
