//! Alternating hybrid optimization: decoder and estimator networks trained on
//! simulated transmissions, circuit angles climbed by the two-term shift rule.
//!
//! Each outer iteration draws a fresh batch under the current angles, runs the
//! configured number of Adam steps on the decoder, then on the estimator, and
//! finally the configured number of plain gradient-ascent steps on the
//! angles. Every expectation defaults to exact enumeration over the d²
//! outcomes; a shot-sampled mode exists for realism studies.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::eval;
use crate::nn::{AdamState, EncodedOutcome, Gradients, Mlp, LOG_FLOOR};
use crate::protocol::{outcome_distribution, AnsatzParams, Message, ProtocolConfig};
use crate::qudit::sample_outcome;

/// How batches expand a transmission into training rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleMode {
    /// Enumerate every outcome with its Born probability as the row weight.
    Exact,
    /// Draw a fixed number of outcome samples per transmission, weight 1 each.
    Shots,
}

/// Hyperparameters of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Outer iterations T.
    pub outer_iters: usize,
    pub decoder_steps: usize,
    pub estimator_steps: usize,
    pub ansatz_steps: usize,
    pub lr_decoder: f64,
    pub lr_estimator: f64,
    pub lr_ansatz: f64,
    /// Weight on the sensing term of the surrogate objective.
    pub w_x: f64,
    /// Weight on the communication term of the surrogate objective.
    pub w_m: f64,
    /// Weight on accuracy in the reported scalar objective.
    pub w_acc: f64,
    /// Weight on success in the reported scalar objective.
    pub w_succ: f64,
    /// Transmissions per batch.
    pub batch_size: usize,
    pub sample_mode: SampleMode,
    /// Outcome draws per transmission in [`SampleMode::Shots`].
    pub shots: usize,
    /// Width of both hidden layers of decoder and estimator.
    pub hidden_width: usize,
    /// Circuit angles start uniform in [−mu_init_scale, mu_init_scale]. The
    /// small default keeps the plain-measurement structure nearly intact;
    /// larger values explore symmetry-breaking bases from the start.
    pub mu_init_scale: f64,
    /// Above this many (message, parameter) pairs the surrogate objective
    /// switches from full enumeration to a seeded Monte Carlo subsample.
    pub objective_pair_cap: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            outer_iters: 10,
            decoder_steps: 100,
            estimator_steps: 100,
            ansatz_steps: 100,
            lr_decoder: 1e-3,
            lr_estimator: 1e-3,
            lr_ansatz: 1e-2,
            w_x: 1.0,
            w_m: 1.0,
            w_acc: 1.0,
            w_succ: 1.0,
            batch_size: 512,
            sample_mode: SampleMode::Exact,
            shots: 1,
            hidden_width: 1024,
            mu_init_scale: 0.1,
            objective_pair_cap: 4096,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lr_decoder <= 0.0 || self.lr_estimator <= 0.0 || self.lr_ansatz <= 0.0 {
            return Err(crate::Error::InvalidConfig(
                "learning rates must be positive".into(),
            ));
        }
        if self.w_x < 0.0 || self.w_m < 0.0 || self.w_acc < 0.0 || self.w_succ < 0.0 {
            return Err(crate::Error::InvalidConfig("weights must be non-negative".into()));
        }
        if self.hidden_width == 0 {
            return Err(crate::Error::InvalidConfig("hidden: width must be positive".into()));
        }
        if self.mu_init_scale.is_nan() || self.mu_init_scale < 0.0 {
            return Err(crate::Error::InvalidConfig(
                "mu_init_scale: must be non-negative".into(),
            ));
        }
        if self.sample_mode == SampleMode::Shots && self.shots == 0 {
            return Err(crate::Error::InvalidConfig("shots: must be positive".into()));
        }
        Ok(())
    }
}

/// One weighted training row: an outcome with its message and grid labels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchEntry {
    pub s1: usize,
    pub s2: usize,
    pub m_label: usize,
    pub x_label: usize,
    pub weight: f64,
}

/// Metrics recorded after each outer iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationMetrics {
    pub iter: usize,
    /// Reported scalar w_succ·P_succ + w_acc·P_acc.
    pub objective: f64,
    pub p_succ: f64,
    pub p_acc: f64,
}

/// Everything a run owns and mutates.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub mu: AnsatzParams,
    pub decoder: Mlp,
    pub estimator: Mlp,
    pub decoder_opt: AdamState,
    pub estimator_opt: AdamState,
    pub history: Vec<IterationMetrics>,
}

/// Fresh parameters for a run: angles uniform in ±mu_init_scale, networks
/// with scaled-uniform weights. Draw order is fixed: angles, decoder,
/// estimator.
pub fn init_state(
    proto: &ProtocolConfig,
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<TrainState> {
    proto.validate()?;
    cfg.validate()?;
    let mu = if proto.bypass_ansatz {
        AnsatzParams::zeroed(proto.d, 0)
    } else {
        AnsatzParams::random(proto.d, proto.ansatz_depth, cfg.mu_init_scale, rng)
    };
    let input = EncodedOutcome::feature_dim(proto.d);
    let h = cfg.hidden_width;
    let decoder = Mlp::init(&[input, h, h, proto.d_prime * proto.d_prime], rng)?;
    let estimator = Mlp::init(&[input, h, h, proto.k()], rng)?;
    let decoder_opt = AdamState::new(&decoder, cfg.lr_decoder);
    let estimator_opt = AdamState::new(&estimator, cfg.lr_estimator);
    Ok(TrainState {
        mu,
        decoder,
        estimator,
        decoder_opt,
        estimator_opt,
        history: Vec::new(),
    })
}

/// Draws `batch_size` transmissions with uniform random message and grid
/// point, expanding each into weighted rows per [`SampleMode`].
pub fn sample_batch(
    mu: &AnsatzParams,
    proto: &ProtocolConfig,
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<BatchEntry>> {
    let d = proto.d;
    let message_count = proto.d_prime * proto.d_prime;
    let mut batch = Vec::new();
    for _ in 0..cfg.batch_size {
        let m_label = rng.gen_range(0..message_count);
        let x_label = rng.gen_range(0..proto.k());
        let m = Message::from_index(m_label, proto.d_prime);
        let x = proto.channel.grid[x_label];
        let dist = outcome_distribution(m, x, mu, proto)?;
        match cfg.sample_mode {
            SampleMode::Exact => {
                for s1 in 0..d {
                    for s2 in 0..d {
                        let weight = dist.prob(s1, s2);
                        if weight > 0.0 {
                            batch.push(BatchEntry {
                                s1,
                                s2,
                                m_label,
                                x_label,
                                weight,
                            });
                        }
                    }
                }
            }
            SampleMode::Shots => {
                for _ in 0..cfg.shots {
                    let s = sample_outcome(&dist, rng);
                    batch.push(BatchEntry {
                        s1: s / d,
                        s2: s % d,
                        m_label,
                        x_label,
                        weight: 1.0,
                    });
                }
            }
        }
    }
    Ok(batch)
}

// Rows grouped by outcome so each Adam step needs one forward/backward pass
// per distinct outcome; the gradient of the weighted mean loss is unchanged.
type Grouped = Vec<((usize, usize), Vec<(usize, f64)>)>;

fn group_by_outcome(batch: &[BatchEntry], label_of: impl Fn(&BatchEntry) -> usize) -> Grouped {
    let mut map: BTreeMap<(usize, usize), BTreeMap<usize, f64>> = BTreeMap::new();
    for entry in batch {
        *map.entry((entry.s1, entry.s2))
            .or_default()
            .entry(label_of(entry))
            .or_insert(0.0) += entry.weight;
    }
    map.into_iter()
        .map(|(s, labels)| (s, labels.into_iter().collect()))
        .collect()
}

fn mean_loss_and_grad(mlp: &Mlp, groups: &Grouped, d: usize) -> Result<(f64, Gradients)> {
    let total_weight: f64 = groups
        .iter()
        .map(|(_, t)| t.iter().map(|&(_, w)| w).sum::<f64>())
        .sum();
    let mut loss = 0.0;
    let mut total: Option<Gradients> = None;
    for &((s1, s2), ref targets) in groups {
        let features = EncodedOutcome::new(d, s1, s2)?.features();
        let (l, g) = mlp.backward_weighted(&features, targets)?;
        loss += l;
        match total.as_mut() {
            Some(acc) => acc.add_assign(&g),
            None => total = Some(g),
        }
    }
    let mut grads = total.expect("non-empty groups");
    grads.scale(1.0 / total_weight);
    Ok((loss / total_weight, grads))
}

fn network_epoch(
    mlp: &mut Mlp,
    opt: &mut AdamState,
    groups: &Grouped,
    d: usize,
    steps: usize,
) -> Result<()> {
    if groups.is_empty() {
        return Ok(());
    }
    for _ in 0..steps {
        let (_, grads) = mean_loss_and_grad(mlp, groups, d)?;
        opt.step(mlp, &grads)?;
    }
    Ok(())
}

/// Runs the configured number of Adam steps on the mean cross-entropy of the
/// batch's message labels.
pub fn decoder_epoch(
    state: &mut TrainState,
    batch: &[BatchEntry],
    proto: &ProtocolConfig,
    cfg: &TrainConfig,
) -> Result<()> {
    let groups = group_by_outcome(batch, |e| e.m_label);
    network_epoch(
        &mut state.decoder,
        &mut state.decoder_opt,
        &groups,
        proto.d,
        cfg.decoder_steps,
    )
}

/// Same as [`decoder_epoch`] with the grid-point labels.
pub fn estimator_epoch(
    state: &mut TrainState,
    batch: &[BatchEntry],
    proto: &ProtocolConfig,
    cfg: &TrainConfig,
) -> Result<()> {
    let groups = group_by_outcome(batch, |e| e.x_label);
    network_epoch(
        &mut state.estimator,
        &mut state.estimator_opt,
        &groups,
        proto.d,
        cfg.estimator_steps,
    )
}

/// Mean weighted cross-entropy of the decoder on a batch.
pub fn decoder_batch_loss(decoder: &Mlp, batch: &[BatchEntry], d: usize) -> Result<f64> {
    let groups = group_by_outcome(batch, |e| e.m_label);
    Ok(mean_loss_and_grad(decoder, &groups, d)?.0)
}

/// Mean weighted cross-entropy of the estimator on a batch.
pub fn estimator_batch_loss(estimator: &Mlp, batch: &[BatchEntry], d: usize) -> Result<f64> {
    let groups = group_by_outcome(batch, |e| e.x_label);
    Ok(mean_loss_and_grad(estimator, &groups, d)?.0)
}

/// Fixed-network data reused across the many objective evaluations of one
/// gradient: per (message, grid point) pair, the per-outcome payoff
/// w_x·log p(x̂=x|s) + w_m·log p(m̂=m|s).
pub struct ObjectiveContext {
    pairs: Vec<(Message, f64)>,
    payoffs: Vec<Vec<f64>>,
}

impl ObjectiveContext {
    pub fn new(
        decoder: &Mlp,
        estimator: &Mlp,
        proto: &ProtocolConfig,
        cfg: &TrainConfig,
    ) -> Result<Self> {
        let d = proto.d;
        // Log posteriors per outcome, clamped into [ln floor, 0].
        let mut log_dec: Vec<Vec<f64>> = Vec::with_capacity(d * d);
        let mut log_est: Vec<Vec<f64>> = Vec::with_capacity(d * d);
        for s1 in 0..d {
            for s2 in 0..d {
                let features = EncodedOutcome::new(d, s1, s2)?.features();
                let clamp_ln = |p: f64| p.clamp(LOG_FLOOR, 1.0).ln();
                log_dec.push(decoder.forward(&features)?.iter().map(|&p| clamp_ln(p)).collect());
                log_est.push(estimator.forward(&features)?.iter().map(|&p| clamp_ln(p)).collect());
            }
        }

        let message_count = proto.d_prime * proto.d_prime;
        let all_pairs = message_count * proto.k();
        let pairs: Vec<(Message, usize)> = if all_pairs <= cfg.objective_pair_cap {
            Message::all(proto.d_prime)
                .flat_map(|m| (0..proto.k()).map(move |xi| (m, xi)))
                .collect()
        } else {
            // Seeded Monte Carlo subsample, fixed for the life of the context
            // so all evaluations of one gradient share it.
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15));
            (0..cfg.objective_pair_cap)
                .map(|_| {
                    (
                        Message::from_index(rng.gen_range(0..message_count), proto.d_prime),
                        rng.gen_range(0..proto.k()),
                    )
                })
                .collect()
        };

        let mut out_pairs = Vec::with_capacity(pairs.len());
        let mut payoffs = Vec::with_capacity(pairs.len());
        for (m, xi) in pairs {
            let m_label = m.index(proto.d_prime);
            let payoff: Vec<f64> = (0..d * d)
                .map(|s| cfg.w_x * log_est[s][xi] + cfg.w_m * log_dec[s][m_label])
                .collect();
            out_pairs.push((m, proto.channel.grid[xi]));
            payoffs.push(payoff);
        }
        Ok(Self {
            pairs: out_pairs,
            payoffs,
        })
    }

    /// Objective value at the given angles.
    pub fn evaluate(&self, angles: &[f64], proto: &ProtocolConfig) -> Result<f64> {
        let params = AnsatzParams {
            d: proto.d,
            depth: proto.ansatz_depth,
            angles: angles.to_vec(),
        };
        let mut total = 0.0;
        for ((m, x), payoff) in self.pairs.iter().zip(&self.payoffs) {
            let dist = outcome_distribution(*m, *x, &params, proto)?;
            total += dist
                .probs()
                .iter()
                .zip(payoff)
                .map(|(p, c)| p * c)
                .sum::<f64>();
        }
        Ok(total / self.pairs.len() as f64)
    }
}

/// Expected weighted log-posterior payoff under the current angles; never
/// positive, and zero exactly when both posteriors are perfect.
pub fn surrogate_objective(
    mu: &AnsatzParams,
    decoder: &Mlp,
    estimator: &Mlp,
    proto: &ProtocolConfig,
    cfg: &TrainConfig,
) -> Result<f64> {
    let ctx = ObjectiveContext::new(decoder, estimator, proto, cfg)?;
    ctx.evaluate(&mu.angles, proto)
}

/// Two-term shift rule: grad_j = ½·[f(θ_j+π/2) − f(θ_j−π/2)]. Exact for the
/// diagonal phase gates used here, whose generators are level projectors;
/// costs exactly 2·len(angles) evaluations of `f`.
pub fn shift_rule_gradient<F>(mut f: F, angles: &[f64]) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut work = angles.to_vec();
    let mut grad = vec![0.0; angles.len()];
    for j in 0..angles.len() {
        let orig = work[j];
        work[j] = orig + FRAC_PI_2;
        let plus = f(&work);
        work[j] = orig - FRAC_PI_2;
        let minus = f(&work);
        work[j] = orig;
        grad[j] = 0.5 * (plus - minus);
    }
    grad
}

/// Shift-rule gradient of the surrogate objective with respect to every
/// circuit angle, at fixed networks.
pub fn parameter_shift_grad(
    mu: &AnsatzParams,
    decoder: &Mlp,
    estimator: &Mlp,
    proto: &ProtocolConfig,
    cfg: &TrainConfig,
) -> Result<Vec<f64>> {
    mu.validate()?;
    let ctx = ObjectiveContext::new(decoder, estimator, proto, cfg)?;
    let mut failure = None;
    let grad = shift_rule_gradient(
        |angles| match ctx.evaluate(angles, proto) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        },
        &mu.angles,
    );
    match failure {
        Some(e) => Err(e),
        None => Ok(grad),
    }
}

/// Plain gradient-ascent steps on the angles, networks held fixed.
pub fn ansatz_epoch(
    state: &mut TrainState,
    proto: &ProtocolConfig,
    cfg: &TrainConfig,
) -> Result<()> {
    if proto.bypass_ansatz || state.mu.angles.is_empty() || cfg.ansatz_steps == 0 {
        return Ok(());
    }
    let ctx = ObjectiveContext::new(&state.decoder, &state.estimator, proto, cfg)?;
    for _ in 0..cfg.ansatz_steps {
        let mut failure = None;
        let grad = shift_rule_gradient(
            |angles| match ctx.evaluate(angles, proto) {
                Ok(v) => v,
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::NAN
                }
            },
            &state.mu.angles,
        );
        if let Some(e) = failure {
            return Err(e);
        }
        for (angle, g) in state.mu.angles.iter_mut().zip(&grad) {
            *angle += cfg.lr_ansatz * g;
        }
    }
    Ok(())
}

/// The full alternating loop: T outer iterations of batch → decoder epoch →
/// estimator epoch → ansatz epoch, recording exact metrics after each.
/// Deterministic given (config, seed).
pub fn run_training(proto: &ProtocolConfig, cfg: &TrainConfig) -> Result<TrainState> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = init_state(proto, cfg, &mut rng)?;
    for iter in 1..=cfg.outer_iters {
        let batch = sample_batch(&state.mu, proto, cfg, &mut rng)?;
        decoder_epoch(&mut state, &batch, proto, cfg)?;
        estimator_epoch(&mut state, &batch, proto, cfg)?;
        ansatz_epoch(&mut state, proto, cfg)?;
        let p_succ = eval::exact_success_probability(&state.mu, &state.decoder, proto)?;
        let p_acc = eval::exact_accuracy_probability(&state.mu, &state.estimator, proto)?;
        state.history.push(IterationMetrics {
            iter,
            objective: cfg.w_succ * p_succ + cfg.w_acc * p_acc,
            p_succ,
            p_acc,
        });
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{superdense_outcome, ChannelModel, ChannelVariant};

    fn proto(d: usize, d_prime: usize, k: usize, depth: usize) -> ProtocolConfig {
        let channel = ChannelModel::uniform_grid(d, k, ChannelVariant::LiteralUnitary).unwrap();
        ProtocolConfig::new(d, d_prime, channel, depth).unwrap()
    }

    fn small_cfg() -> TrainConfig {
        TrainConfig {
            outer_iters: 1,
            decoder_steps: 100,
            estimator_steps: 100,
            ansatz_steps: 20,
            batch_size: 64,
            hidden_width: 32,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn empty_batch_for_zero_size() {
        let p = proto(3, 3, 4, 1);
        let cfg = TrainConfig {
            batch_size: 0,
            ..small_cfg()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mu = AnsatzParams::zeroed(3, 1);
        let batch = sample_batch(&mu, &p, &cfg, &mut rng).unwrap();
        assert!(batch.is_empty());
    }

    #[test]
    fn superdense_batch_hits_deterministic_outcomes() {
        let mut p = proto(4, 4, 1, 0);
        p.bypass_ansatz = true;
        let mu = AnsatzParams::zeroed(4, 0);

        // Shots mode: every sampled outcome is the deterministic one.
        let cfg = TrainConfig {
            sample_mode: SampleMode::Shots,
            shots: 4,
            ..small_cfg()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let batch = sample_batch(&mu, &p, &cfg, &mut rng).unwrap();
        assert!(!batch.is_empty());
        for entry in &batch {
            let m = Message::from_index(entry.m_label, 4);
            let (s1, s2) = superdense_outcome(m, 4);
            assert_eq!((entry.s1, entry.s2), (s1, s2));
            assert_eq!(entry.weight, 1.0);
        }

        // Exact mode: the deterministic outcome carries all the weight of
        // each transmission (anything else is float dust).
        let cfg = small_cfg();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let batch = sample_batch(&mu, &p, &cfg, &mut rng).unwrap();
        for entry in &batch {
            let m = Message::from_index(entry.m_label, 4);
            let (s1, s2) = superdense_outcome(m, 4);
            if (entry.s1, entry.s2) == (s1, s2) {
                assert!((entry.weight - 1.0).abs() < 1e-10);
            } else {
                assert!(entry.weight < 1e-20, "stray weight {}", entry.weight);
            }
        }
    }

    #[test]
    fn exact_batch_weights_sum_to_one_per_transmission() {
        let p = proto(3, 2, 4, 1);
        let cfg = TrainConfig {
            batch_size: 5,
            ..small_cfg()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mu = AnsatzParams::random(3, 1, 0.5, &mut rng);
        let batch = sample_batch(&mu, &p, &cfg, &mut rng).unwrap();
        let total: f64 = batch.iter().map(|e| e.weight).sum();
        assert!((total - 5.0).abs() < 1e-9, "weights should sum to batch size, got {total}");
    }

    #[test]
    fn shots_mode_is_deterministic_given_seed() {
        let p = proto(3, 3, 4, 1);
        let cfg = TrainConfig {
            sample_mode: SampleMode::Shots,
            shots: 3,
            batch_size: 16,
            ..small_cfg()
        };
        let draw = || {
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            let mu = AnsatzParams::random(3, 1, 0.5, &mut rng);
            sample_batch(&mu, &p, &cfg, &mut rng).unwrap()
        };
        assert_eq!(draw(), draw());
    }

    #[test]
    fn decoder_learns_the_superdense_map() {
        // Deterministic batch (x-grid {0}, full alphabet, bypass): the loss
        // collapses and decisions become exact within one epoch.
        let mut p = proto(4, 4, 1, 0);
        p.bypass_ansatz = true;
        // The example does not pin the decoder rate; 1e-2 reaches the loss
        // target within the 100-step budget.
        let cfg = TrainConfig {
            batch_size: 256,
            hidden_width: 64,
            lr_decoder: 1e-2,
            ..small_cfg()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut state = init_state(&p, &cfg, &mut rng).unwrap();
        let batch = sample_batch(&state.mu, &p, &cfg, &mut rng).unwrap();
        let before = decoder_batch_loss(&state.decoder, &batch, 4).unwrap();
        decoder_epoch(&mut state, &batch, &p, &cfg).unwrap();
        let after = decoder_batch_loss(&state.decoder, &batch, 4).unwrap();
        assert!(after < before, "loss should fall: {before} -> {after}");
        assert!(after < 1e-2, "final loss {after} not below 1e-2");
        for m in Message::all(4) {
            let (s1, s2) = superdense_outcome(m, 4);
            let probs = state
                .decoder
                .forward(&EncodedOutcome::new(4, s1, s2).unwrap().features())
                .unwrap();
            assert_eq!(crate::nn::decide(&probs).unwrap(), m.index(4));
        }
    }

    #[test]
    fn zero_steps_change_nothing() {
        let p = proto(3, 3, 4, 1);
        let cfg = TrainConfig {
            decoder_steps: 0,
            estimator_steps: 0,
            ansatz_steps: 0,
            ..small_cfg()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut state = init_state(&p, &cfg, &mut rng).unwrap();
        let decoder_before = state.decoder.clone();
        let estimator_before = state.estimator.clone();
        let mu_before = state.mu.clone();
        let batch = sample_batch(&state.mu, &p, &cfg, &mut rng).unwrap();
        decoder_epoch(&mut state, &batch, &p, &cfg).unwrap();
        estimator_epoch(&mut state, &batch, &p, &cfg).unwrap();
        ansatz_epoch(&mut state, &p, &cfg).unwrap();
        assert_eq!(state.decoder, decoder_before);
        assert_eq!(state.estimator, estimator_before);
        assert_eq!(state.mu, mu_before);
    }

    #[test]
    fn single_grid_point_estimator_is_trivially_perfect() {
        let p = proto(3, 3, 1, 1);
        let cfg = small_cfg();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let state = init_state(&p, &cfg, &mut rng).unwrap();
        // One class: softmax over one logit is exactly 1.
        let probs = state
            .estimator
            .forward(&EncodedOutcome::new(3, 0, 0).unwrap().features())
            .unwrap();
        assert_eq!(probs.len(), 1);
        assert!((probs[0] - 1.0).abs() < 1e-15);
        let batch = vec![BatchEntry {
            s1: 0,
            s2: 0,
            m_label: 0,
            x_label: 0,
            weight: 1.0,
        }];
        let loss = estimator_batch_loss(&state.estimator, &batch, 3).unwrap();
        assert!(loss.abs() < 1e-9);
    }

    #[test]
    fn constant_channel_keeps_estimator_at_chance() {
        // All-equal level phases: outcomes carry nothing about x, so exact
        // accuracy stays at 1/K no matter how long the estimator trains.
        let channel = ChannelModel::uniform_grid(3, 4, ChannelVariant::Constant).unwrap();
        let p = ProtocolConfig::new(3, 3, channel, 1).unwrap();
        let cfg = small_cfg();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut state = init_state(&p, &cfg, &mut rng).unwrap();
        let batch = sample_batch(&state.mu, &p, &cfg, &mut rng).unwrap();
        estimator_epoch(&mut state, &batch, &p, &cfg).unwrap();
        let acc = eval::exact_accuracy_probability(&state.mu, &state.estimator, &p).unwrap();
        assert!((acc - 0.25).abs() < 1e-9, "accuracy {acc} should pin to 1/K");
    }

    #[test]
    fn objective_is_zero_for_zero_weights() {
        let p = proto(3, 2, 4, 1);
        let cfg = TrainConfig {
            w_x: 0.0,
            w_m: 0.0,
            ..small_cfg()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let state = init_state(&p, &cfg, &mut rng).unwrap();
        let v = surrogate_objective(&state.mu, &state.decoder, &state.estimator, &p, &cfg).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn objective_is_zero_for_perfect_posteriors() {
        // Single message and single grid point: both softmax heads have one
        // class and are exactly right.
        let p = proto(3, 1, 1, 1);
        let cfg = small_cfg();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let state = init_state(&p, &cfg, &mut rng).unwrap();
        let v = surrogate_objective(&state.mu, &state.decoder, &state.estimator, &p, &cfg).unwrap();
        assert!(v.abs() < 1e-12);
    }

    #[test]
    fn objective_never_positive() {
        let p = proto(3, 2, 4, 2);
        let cfg = small_cfg();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..100 {
            let state = init_state(&p, &cfg, &mut rng).unwrap();
            let v =
                surrogate_objective(&state.mu, &state.decoder, &state.estimator, &p, &cfg).unwrap();
            assert!(v <= 0.0, "objective {v} must not be positive");
        }
    }

    #[test]
    fn objective_invariant_under_two_pi_angle_shift() {
        let p = proto(3, 2, 4, 1);
        let cfg = small_cfg();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let state = init_state(&p, &cfg, &mut rng).unwrap();
        let base =
            surrogate_objective(&state.mu, &state.decoder, &state.estimator, &p, &cfg).unwrap();
        for j in 0..state.mu.angles.len() {
            let mut shifted = state.mu.clone();
            shifted.angles[j] += std::f64::consts::TAU;
            let v = surrogate_objective(&shifted, &state.decoder, &state.estimator, &p, &cfg)
                .unwrap();
            assert!((v - base).abs() < 1e-12);
        }
    }

    #[test]
    fn shift_rule_matches_finite_differences() {
        let p = proto(3, 3, 4, 1);
        let cfg = small_cfg();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..5 {
            let state = init_state(&p, &cfg, &mut rng).unwrap();
            let mut mu = state.mu.clone();
            for a in mu.angles.iter_mut() {
                *a = rng.gen_range(-1.5..1.5);
            }
            let grad =
                parameter_shift_grad(&mu, &state.decoder, &state.estimator, &p, &cfg).unwrap();
            let ctx = ObjectiveContext::new(&state.decoder, &state.estimator, &p, &cfg).unwrap();
            let h = 1e-4;
            let mut fd = vec![0.0; mu.angles.len()];
            for j in 0..mu.angles.len() {
                let mut plus = mu.angles.clone();
                plus[j] += h;
                let mut minus = mu.angles.clone();
                minus[j] -= h;
                fd[j] = (ctx.evaluate(&plus, &p).unwrap() - ctx.evaluate(&minus, &p).unwrap())
                    / (2.0 * h);
            }
            let diff: f64 = grad
                .iter()
                .zip(&fd)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            let scale: f64 = fd.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-8);
            assert!(diff / scale <= 1e-5, "relative gradient error {}", diff / scale);
        }
    }

    #[test]
    fn shift_rule_costs_two_evaluations_per_angle() {
        let angles = vec![0.3, -0.2, 0.9];
        let mut count = 0usize;
        let _ = shift_rule_gradient(
            |a| {
                count += 1;
                a.iter().map(|v| v.cos()).sum()
            },
            &angles,
        );
        assert_eq!(count, 2 * angles.len());
    }

    #[test]
    fn gradient_vanishes_at_a_one_dimensional_maximizer() {
        // Scan one angle, refine the maximizer by ternary search, then check
        // the shift-rule component there.
        let p = proto(3, 2, 4, 1);
        let cfg = small_cfg();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let state = init_state(&p, &cfg, &mut rng).unwrap();
        let ctx = ObjectiveContext::new(&state.decoder, &state.estimator, &p, &cfg).unwrap();
        let base = state.mu.angles.clone();
        let idx = 1;
        let eval_at = |theta: f64| {
            let mut angles = base.clone();
            angles[idx] = theta;
            ctx.evaluate(&angles, &p).unwrap()
        };
        // Coarse scan over one period.
        let mut best = 0.0;
        let mut best_val = f64::NEG_INFINITY;
        for i in 0..64 {
            let theta = -std::f64::consts::PI + std::f64::consts::TAU * i as f64 / 64.0;
            let v = eval_at(theta);
            if v > best_val {
                best_val = v;
                best = theta;
            }
        }
        let (mut lo, mut hi) = (best - 0.2, best + 0.2);
        for _ in 0..80 {
            let m1 = lo + (hi - lo) / 3.0;
            let m2 = hi - (hi - lo) / 3.0;
            if eval_at(m1) < eval_at(m2) {
                lo = m1;
            } else {
                hi = m2;
            }
        }
        let maximizer = 0.5 * (lo + hi);
        let mut angles = base.clone();
        angles[idx] = maximizer;
        let grad = shift_rule_gradient(|a| ctx.evaluate(a, &p).unwrap(), &angles);
        assert!(
            grad[idx].abs() <= 1e-6,
            "gradient {} at the maximizer should vanish",
            grad[idx]
        );
    }

    #[test]
    fn ascent_improves_the_objective_at_small_rate() {
        let p = proto(3, 2, 4, 1);
        let cfg = TrainConfig {
            lr_ansatz: 1e-3,
            ansatz_steps: 50,
            ..small_cfg()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let mut state = init_state(&p, &cfg, &mut rng).unwrap();
        let before =
            surrogate_objective(&state.mu, &state.decoder, &state.estimator, &p, &cfg).unwrap();
        ansatz_epoch(&mut state, &p, &cfg).unwrap();
        let after =
            surrogate_objective(&state.mu, &state.decoder, &state.estimator, &p, &cfg).unwrap();
        assert!(after >= before, "ascent should not decrease: {before} -> {after}");
    }

    #[test]
    fn zero_weights_freeze_the_angles() {
        let p = proto(3, 2, 4, 1);
        let cfg = TrainConfig {
            w_x: 0.0,
            w_m: 0.0,
            ansatz_steps: 10,
            ..small_cfg()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let mut state = init_state(&p, &cfg, &mut rng).unwrap();
        let before = state.mu.clone();
        ansatz_epoch(&mut state, &p, &cfg).unwrap();
        assert_eq!(state.mu, before);
    }

    #[test]
    fn run_training_with_zero_iterations_returns_initial_state() {
        let p = proto(3, 2, 4, 1);
        let cfg = TrainConfig {
            outer_iters: 0,
            ..small_cfg()
        };
        let state = run_training(&p, &cfg).unwrap();
        assert!(state.history.is_empty());
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let fresh = init_state(&p, &cfg, &mut rng).unwrap();
        assert_eq!(state.mu, fresh.mu);
        assert_eq!(state.decoder, fresh.decoder);
    }

    #[test]
    fn identical_seeds_give_identical_histories() {
        let p = proto(3, 2, 4, 1);
        let cfg = TrainConfig {
            outer_iters: 2,
            decoder_steps: 10,
            estimator_steps: 10,
            ansatz_steps: 5,
            batch_size: 16,
            hidden_width: 16,
            seed: 42,
            ..TrainConfig::default()
        };
        let a = run_training(&p, &cfg).unwrap();
        let b = run_training(&p, &cfg).unwrap();
        assert_eq!(a.history.len(), b.history.len());
        for (x, y) in a.history.iter().zip(&b.history) {
            assert_eq!(x.objective.to_bits(), y.objective.to_bits());
            assert_eq!(x.p_succ.to_bits(), y.p_succ.to_bits());
            assert_eq!(x.p_acc.to_bits(), y.p_acc.to_bits());
        }
    }

    #[test]
    fn zero_init_scale_gives_zero_angles() {
        let p = proto(3, 2, 4, 2);
        let cfg = TrainConfig {
            mu_init_scale: 0.0,
            ..small_cfg()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let state = init_state(&p, &cfg, &mut rng).unwrap();
        assert!(state.mu.angles.iter().all(|&a| a == 0.0));
    }

    #[test]
    fn wide_init_unlocks_endpoint_sensing_gain() {
        // Pure-sensing point (single message): a full-range start lets the
        // trained measurement clearly beat the plain-measurement ceiling,
        // which sits at 0.31 for this channel.
        let p = proto(4, 1, 4, 2);
        let cfg = TrainConfig {
            outer_iters: 3,
            batch_size: 128,
            hidden_width: 128,
            mu_init_scale: std::f64::consts::PI,
            seed: 0,
            ..TrainConfig::default()
        };
        let state = run_training(&p, &cfg).unwrap();
        let p_acc = state.history.last().unwrap().p_acc;
        assert!(p_acc > 0.36, "trained endpoint accuracy {p_acc} should beat 0.31");
    }

    #[test]
    fn reference_fast_run_reaches_high_success() {
        // Logged reference run, d=4, d'=2, K=4, hidden 128, seed 0: the
        // decoder converges to the Bayes optimum of the converged measurement
        // (0.918 on this channel; perfect decoding is impossible once the
        // channel mixes the alphabet across grid points) and sensing beats
        // chance.
        let p = proto(4, 2, 4, 2);
        let cfg = TrainConfig {
            outer_iters: 3,
            batch_size: 128,
            hidden_width: 128,
            seed: 0,
            ..TrainConfig::default()
        };
        let state = run_training(&p, &cfg).unwrap();
        let last = state.history.last().unwrap();
        assert!(last.p_succ >= 0.9, "p_succ = {}", last.p_succ);
        assert!(last.p_acc > 0.25, "p_acc = {}", last.p_acc);
    }
}
