//! Prints per-iteration metrics for a single training run.
//!
//! Usage: trace_training [d] [d_prime] [outer_iters] [seed] [depth] [bypass]

use qisac::protocol::{ChannelModel, ChannelVariant, ProtocolConfig};
use qisac::training::{run_training, TrainConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let d: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(4);
    let d_prime: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(2);
    let outer: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(3);
    let seed: u64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(0);
    let depth: usize = args.get(5).and_then(|s| s.parse().ok()).unwrap_or(2);
    let bypass: bool = args.get(6).map(|s| s == "bypass").unwrap_or(false);

    let channel = ChannelModel::uniform_grid(d, 4, ChannelVariant::LiteralUnitary)
        .expect("channel grid");
    let mut proto = ProtocolConfig::new(d, d_prime, channel, depth).expect("protocol config");
    proto.bypass_ansatz = bypass;
    let cfg = TrainConfig {
        outer_iters: outer,
        batch_size: 128,
        hidden_width: 128,
        seed,
        ..TrainConfig::default()
    };
    let start = std::time::Instant::now();
    let state = run_training(&proto, &cfg).expect("training run");
    for it in &state.history {
        println!(
            "iter {:>2}  objective {:.4}  p_succ {:.4}  p_acc {:.4}",
            it.iter, it.objective, it.p_succ, it.p_acc
        );
    }
    println!("elapsed {:.2?}", start.elapsed());
}
