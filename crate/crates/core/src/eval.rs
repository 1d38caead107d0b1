//! Exact performance metrics and the rate back-off sweep.
//!
//! Success and accuracy probabilities are full enumerations over messages,
//! grid points, and outcomes — no sampling. The sweep runs a trained job and
//! an identity-measurement baseline per (alphabet size, seed) point and emits
//! one record per job, sorted by back-off.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;

use crate::error::Result;
use crate::nn::{decide, EncodedOutcome, Mlp};
use crate::protocol::{outcome_distribution, rate_plan, AnsatzParams, Message, ProtocolConfig};
use crate::training::{run_training, IterationMetrics, TrainConfig};

/// Which measurement a job used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Variant {
    Trained,
    Identity,
}

impl Variant {
    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::Trained => "trained",
            Variant::Identity => "identity",
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One row of the results table.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub d: usize,
    pub d_prime: usize,
    pub delta_b: f64,
    pub bits: f64,
    pub p_succ: f64,
    pub p_acc: f64,
    /// Always exactly bits · p_succ.
    pub throughput: f64,
    pub variant: Variant,
    pub seed: u64,
    pub wall_time_s: f64,
}

/// Exact header of the results CSV.
pub const CSV_HEADER: &str = "d,d_prime,delta_b,bits,p_succ,p_acc,throughput,variant,seed,wall_time_s";

/// Per-outcome class decisions of a network over all d² outcomes, indexed
/// s1·d + s2.
pub fn decision_table(mlp: &Mlp, d: usize) -> Result<Vec<usize>> {
    let mut table = Vec::with_capacity(d * d);
    for s1 in 0..d {
        for s2 in 0..d {
            let probs = mlp.forward(&EncodedOutcome::new(d, s1, s2)?.features())?;
            table.push(decide(&probs)?);
        }
    }
    Ok(table)
}

// Uniform average over (message, grid point) of the probability mass on
// outcomes whose decision matches the target label.
fn enumerate_hit_probability(
    mu: &AnsatzParams,
    proto: &ProtocolConfig,
    decisions: &[usize],
    target: impl Fn(usize, usize) -> usize,
) -> Result<f64> {
    let message_count = proto.d_prime * proto.d_prime;
    let k = proto.k();
    let mut total = 0.0;
    for m in Message::all(proto.d_prime) {
        let m_label = m.index(proto.d_prime);
        for (xi, &x) in proto.channel.grid.iter().enumerate() {
            let dist = outcome_distribution(m, x, mu, proto)?;
            let want = target(m_label, xi);
            total += dist
                .probs()
                .iter()
                .zip(decisions)
                .filter(|&(_, &dec)| dec == want)
                .map(|(&p, _)| p)
                .sum::<f64>();
        }
    }
    Ok(total / (message_count * k) as f64)
}

/// Probability that a fixed outcome→message decision table recovers the
/// transmitted message, averaged uniformly over messages and grid points.
pub fn success_with_decisions(
    mu: &AnsatzParams,
    proto: &ProtocolConfig,
    decisions: &[usize],
) -> Result<f64> {
    enumerate_hit_probability(mu, proto, decisions, |m_label, _| m_label)
}

/// Probability that a fixed outcome→grid decision table recovers the channel
/// parameter, averaged the same way.
pub fn accuracy_with_decisions(
    mu: &AnsatzParams,
    proto: &ProtocolConfig,
    decisions: &[usize],
) -> Result<f64> {
    enumerate_hit_probability(mu, proto, decisions, |_, x_label| x_label)
}

/// Exact decoding success probability of a trained decoder network.
pub fn exact_success_probability(
    mu: &AnsatzParams,
    decoder: &Mlp,
    proto: &ProtocolConfig,
) -> Result<f64> {
    let decisions = decision_table(decoder, proto.d)?;
    success_with_decisions(mu, proto, &decisions)
}

/// Exact parameter-classification accuracy of a trained estimator network.
pub fn exact_accuracy_probability(
    mu: &AnsatzParams,
    estimator: &Mlp,
    proto: &ProtocolConfig,
) -> Result<f64> {
    let decisions = decision_table(estimator, proto.d)?;
    accuracy_with_decisions(mu, proto, &decisions)
}

/// Training trace of one sweep job.
#[derive(Debug, Clone)]
pub struct JobHistory {
    pub d: usize,
    pub d_prime: usize,
    pub variant: Variant,
    pub seed: u64,
    pub iterations: Vec<IterationMetrics>,
}

/// Records plus per-iteration traces for every job of a sweep.
#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub records: Vec<MetricsRecord>,
    pub histories: Vec<JobHistory>,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent per-job generator seed mixed from the user seed and the job
/// identity, so sweep points stay reproducible under any scheduling.
pub fn job_seed(user_seed: u64, d_prime: usize, variant: Variant) -> u64 {
    let v = match variant {
        Variant::Trained => 1u64,
        Variant::Identity => 2u64,
    };
    splitmix64(user_seed ^ splitmix64(d_prime as u64) ^ splitmix64(v.wrapping_mul(0x517C_C1B7_2722_0A95)))
}

/// Runs one sweep point: train with the given measurement variant, then
/// evaluate exact metrics and the rate plan.
pub fn run_point(
    proto_base: &ProtocolConfig,
    train_base: &TrainConfig,
    d_prime: usize,
    variant: Variant,
    user_seed: u64,
) -> Result<(MetricsRecord, JobHistory)> {
    let mut proto = proto_base.clone();
    proto.d_prime = d_prime;
    proto.bypass_ansatz = variant == Variant::Identity;
    proto.validate()?;
    let mut cfg = train_base.clone();
    cfg.seed = job_seed(user_seed, d_prime, variant);

    let start = Instant::now();
    let state = run_training(&proto, &cfg)?;
    let wall_time_s = start.elapsed().as_secs_f64();

    let p_succ = exact_success_probability(&state.mu, &state.decoder, &proto)?;
    let p_acc = exact_accuracy_probability(&state.mu, &state.estimator, &proto)?;
    let plan = rate_plan(proto.d, d_prime)?;
    let record = MetricsRecord {
        d: proto.d,
        d_prime,
        delta_b: plan.backoff,
        bits: plan.bits,
        p_succ,
        p_acc,
        throughput: plan.bits * p_succ,
        variant,
        seed: user_seed,
        wall_time_s,
    };
    let history = JobHistory {
        d: proto.d,
        d_prime,
        variant,
        seed: user_seed,
        iterations: state.history,
    };
    Ok((record, history))
}

/// The conventional measurement reference point: the trainable tail is
/// bypassed and only the networks train, with the same budgets.
pub fn identity_baseline(
    proto: &ProtocolConfig,
    train: &TrainConfig,
    user_seed: u64,
) -> Result<(MetricsRecord, JobHistory)> {
    run_point(proto, train, proto.d_prime, Variant::Identity, user_seed)
}

/// Runs every (alphabet size, variant, seed) combination and returns rows
/// sorted by back-off, then variant, then seed. `jobs` > 1 runs points on a
/// local thread pool; each job owns its generator, so the output is identical
/// either way.
pub fn sweep_backoff(
    proto: &ProtocolConfig,
    train: &TrainConfig,
    d_primes: &[usize],
    seeds: &[u64],
    variants: &[Variant],
    jobs: usize,
) -> Result<SweepOutput> {
    let mut points = Vec::new();
    for &d_prime in d_primes {
        for &variant in variants {
            for &seed in seeds {
                points.push((d_prime, variant, seed));
            }
        }
    }

    let run_all = || -> Result<Vec<(MetricsRecord, JobHistory)>> {
        points
            .par_iter()
            .map(|&(d_prime, variant, seed)| run_point(proto, train, d_prime, variant, seed))
            .collect()
    };
    let mut results = if jobs <= 1 {
        points
            .iter()
            .map(|&(d_prime, variant, seed)| run_point(proto, train, d_prime, variant, seed))
            .collect::<Result<Vec<_>>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| crate::Error::InvalidConfig(format!("jobs: {e}")))?;
        pool.install(run_all)?
    };

    results.sort_by(|(a, _), (b, _)| {
        a.delta_b
            .total_cmp(&b.delta_b)
            .then(a.variant.cmp(&b.variant))
            .then(a.seed.cmp(&b.seed))
    });
    let (records, histories) = results.into_iter().unzip();
    Ok(SweepOutput { records, histories })
}

/// Formats a float with six significant digits, positional where reasonable
/// and scientific otherwise.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let mag = x.abs().log10().floor() as i32;
    if (-4..6).contains(&mag) {
        let decimals = (5 - mag).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.5e}")
    }
}

/// Writes the results table; one row per record, floats with six significant
/// digits.
pub fn write_csv<W: Write>(records: &[MetricsRecord], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            r.d,
            r.d_prime,
            fmt_sig(r.delta_b),
            fmt_sig(r.bits),
            fmt_sig(r.p_succ),
            fmt_sig(r.p_acc),
            fmt_sig(r.throughput),
            r.variant,
            r.seed,
            fmt_sig(r.wall_time_s),
        )?;
    }
    Ok(())
}
