//! Cross-module checks of the full transmission/training pipeline.

use qisac::eval::{self, Variant};
use qisac::protocol::{ChannelModel, ChannelVariant, ProtocolConfig};
use qisac::training::{init_state, run_training, TrainConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn fast_proto(d: usize, d_prime: usize, k: usize) -> ProtocolConfig {
    let channel = ChannelModel::uniform_grid(d, k, ChannelVariant::LiteralUnitary).unwrap();
    ProtocolConfig::new(d, d_prime, channel, 2).unwrap()
}

#[test]
fn untrained_estimator_sits_at_the_chance_floor() {
    // Exact accuracy of a freshly initialized estimator stays within five
    // percentage points of 1/K, across ten seeds.
    let proto = fast_proto(8, 8, 4);
    let cfg = TrainConfig {
        hidden_width: 128,
        ..TrainConfig::default()
    };
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let state = init_state(&proto, &cfg, &mut rng).unwrap();
        let p_acc =
            eval::exact_accuracy_probability(&state.mu, &state.estimator, &proto).unwrap();
        assert!(
            (p_acc - 0.25).abs() <= 0.05,
            "seed {seed}: untrained accuracy {p_acc} strays from 1/K"
        );
    }
}

#[test]
fn full_alphabet_pins_accuracy_to_chance_exactly() {
    // With d' = d the uniform message average erases the channel parameter
    // from the outcome law, so no estimator beats 1/K.
    let proto = fast_proto(4, 4, 4);
    let cfg = TrainConfig {
        outer_iters: 1,
        decoder_steps: 10,
        estimator_steps: 50,
        ansatz_steps: 5,
        batch_size: 32,
        hidden_width: 32,
        ..TrainConfig::default()
    };
    let state = run_training(&proto, &cfg).unwrap();
    let p_acc = eval::exact_accuracy_probability(&state.mu, &state.estimator, &proto).unwrap();
    assert!((p_acc - 0.25).abs() < 1e-9, "p_acc = {p_acc}");
}

#[test]
fn tiny_sweep_round_trips_through_csv() {
    let proto = fast_proto(3, 3, 2);
    let cfg = TrainConfig {
        outer_iters: 1,
        decoder_steps: 5,
        estimator_steps: 5,
        ansatz_steps: 2,
        batch_size: 8,
        hidden_width: 8,
        ..TrainConfig::default()
    };
    let out = eval::sweep_backoff(
        &proto,
        &cfg,
        &[1, 3],
        &[7],
        &[Variant::Trained, Variant::Identity],
        1,
    )
    .unwrap();
    assert_eq!(out.records.len(), 4);

    let mut buf = Vec::new();
    eval::write_csv(&out.records, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], eval::CSV_HEADER);
    assert_eq!(lines.len(), 5);
    for line in &lines[1..] {
        assert_eq!(line.split(',').count(), 10, "row arity: {line}");
    }
    // Identical sweep again: identical rows apart from the wall-time column.
    let again = eval::sweep_backoff(
        &proto,
        &cfg,
        &[1, 3],
        &[7],
        &[Variant::Trained, Variant::Identity],
        1,
    )
    .unwrap();
    let mut buf2 = Vec::new();
    eval::write_csv(&again.records, &mut buf2).unwrap();
    let text2 = String::from_utf8(buf2).unwrap();
    for (a, b) in text.lines().zip(text2.lines()).skip(1) {
        let strip = |s: &str| s.rsplit_once(',').map(|(head, _)| head.to_string()).unwrap();
        assert_eq!(strip(a), strip(b));
    }
}

#[test]
fn histories_land_in_metrics_output() {
    let proto = fast_proto(3, 2, 2);
    let cfg = TrainConfig {
        outer_iters: 2,
        decoder_steps: 5,
        estimator_steps: 5,
        ansatz_steps: 2,
        batch_size: 8,
        hidden_width: 8,
        ..TrainConfig::default()
    };
    let out = eval::sweep_backoff(&proto, &cfg, &[2], &[0], &[Variant::Trained], 1).unwrap();
    assert_eq!(out.histories.len(), 1);
    let h = &out.histories[0];
    assert_eq!(h.iterations.len(), 2);
    assert_eq!(h.variant, Variant::Trained);
    for (i, it) in h.iterations.iter().enumerate() {
        assert_eq!(it.iter, i + 1);
        assert!(it.p_succ >= 0.0 && it.p_succ <= 1.0);
        assert!(it.p_acc >= 0.0 && it.p_acc <= 1.0);
        assert!((it.objective - (it.p_succ + it.p_acc)).abs() < 1e-12);
    }
}
