//! The transmission pipeline: message encoding on the shared entangled pair,
//! the parameter-dependent phase channel, and the receiver's decoding circuit
//! with its trainable tail.
//!
//! Conventions. The sender encodes (m1, m2) as shift^{m1} · clock^{m2} on wire
//! A. The receiver applies the controlled cyclic gate with A as control
//! (target label decremented), then the inverse Fourier gate on A; with the
//! trainable tail bypassed and the channel at x = 0 this maps message (m1,m2)
//! deterministically to outcome (m2, (−m1) mod d). Both the Fourier direction
//! and the controlled-gate sign are switchable in [`ProtocolConfig`].

use rand::Rng;

use crate::error::{Error, Result};
use crate::qudit::{
    apply_clock_power, apply_cx, apply_cx_inverse, apply_diag_phase, apply_fourier,
    apply_shift_power, born_distribution, make_bell_state, OutcomeDistribution, TwoQuditState,
    Wire,
};

/// Classical payload: a pair of exponents below the active alphabet size d′.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Message {
    pub m1: usize,
    pub m2: usize,
}

impl Message {
    pub fn new(m1: usize, m2: usize) -> Self {
        Self { m1, m2 }
    }

    /// Flat class label m1·d′ + m2.
    pub fn index(&self, d_prime: usize) -> usize {
        self.m1 * d_prime + self.m2
    }

    /// Inverse of [`Message::index`].
    pub fn from_index(index: usize, d_prime: usize) -> Self {
        Self {
            m1: index / d_prime,
            m2: index % d_prime,
        }
    }

    /// All (d′)² messages in label order.
    pub fn all(d_prime: usize) -> impl Iterator<Item = Message> {
        (0..d_prime * d_prime).map(move |i| Message::from_index(i, d_prime))
    }
}

/// Rate bookkeeping for an alphabet restriction d′ ≤ d.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePlan {
    pub d: usize,
    pub d_prime: usize,
    /// Transmitted bits per use, 2·log2(d′).
    pub bits: f64,
    /// Back-off from the unrestricted rate, 2·log2(d/d′).
    pub backoff: f64,
    /// Unrestricted rate 2·log2(d).
    pub bits_max: f64,
}

/// Rate plan for dimension d with alphabet size d′.
pub fn rate_plan(d: usize, d_prime: usize) -> Result<RatePlan> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    if d_prime < 1 || d_prime > d {
        return Err(Error::InvalidConfig(format!(
            "d_prime: must satisfy 1 <= d_prime <= d, got {d_prime} with d = {d}"
        )));
    }
    let bits = 2.0 * (d_prime as f64).log2();
    let bits_max = 2.0 * (d as f64).log2();
    Ok(RatePlan {
        d,
        d_prime,
        bits,
        backoff: bits_max - bits,
        bits_max,
    })
}

/// Shape of the level-phase profile the channel imprints on wire A.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelVariant {
    /// Phase (x/d)·cos(2πk/d) on level k; reduces to the usual qubit Z
    /// rotation at d = 2.
    LiteralUnitary,
    /// Phase x·k/d on level k; separates every level.
    Linear,
    /// Phase x on every level: a pure global phase, so outcomes carry no
    /// information about x. Used as a null channel in calibration checks.
    Constant,
}

impl ChannelVariant {
    pub fn as_str(&self) -> &'static str {
        match self {
            ChannelVariant::LiteralUnitary => "literal-unitary",
            ChannelVariant::Linear => "linear",
            ChannelVariant::Constant => "constant",
        }
    }
}

impl std::str::FromStr for ChannelVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "literal-unitary" => Ok(ChannelVariant::LiteralUnitary),
            "linear" => Ok(ChannelVariant::Linear),
            "constant" => Ok(ChannelVariant::Constant),
            other => Err(Error::UnknownChannelVariant(other.to_string())),
        }
    }
}

impl std::fmt::Display for ChannelVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The discrete channel-parameter grid and phase profile.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelModel {
    pub d: usize,
    pub grid: Vec<f64>,
    pub variant: ChannelVariant,
}

impl ChannelModel {
    /// K grid points uniformly spaced over [−π, π] inclusive; a single point
    /// degenerates to {0}.
    pub fn uniform_grid(d: usize, k: usize, variant: ChannelVariant) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidConfig("k: grid needs at least one point".into()));
        }
        let grid = if k == 1 {
            vec![0.0]
        } else {
            (0..k)
                .map(|j| -std::f64::consts::PI + std::f64::consts::TAU * j as f64 / (k - 1) as f64)
                .collect()
        };
        let model = Self { d, grid, variant };
        model.validate()?;
        Ok(model)
    }

    pub fn with_grid(d: usize, grid: Vec<f64>, variant: ChannelVariant) -> Result<Self> {
        let model = Self { d, grid, variant };
        model.validate()?;
        Ok(model)
    }

    pub fn k(&self) -> usize {
        self.grid.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(Error::InvalidDimension(self.d));
        }
        if self.grid.is_empty() {
            return Err(Error::InvalidConfig("k: grid needs at least one point".into()));
        }
        let bound = std::f64::consts::PI + 1e-12;
        for pair in self.grid.windows(2) {
            if pair[1] <= pair[0] {
                return Err(Error::InvalidConfig(
                    "grid: values must be strictly increasing".into(),
                ));
            }
        }
        if self.grid.iter().any(|x| x.abs() > bound) {
            return Err(Error::InvalidConfig("grid: values must lie in [-pi, pi]".into()));
        }
        Ok(())
    }
}

/// Per-level channel phases for parameter value x.
pub fn channel_phases(d: usize, x: f64, variant: ChannelVariant) -> Vec<f64> {
    (0..d)
        .map(|k| match variant {
            ChannelVariant::LiteralUnitary => {
                x / d as f64 * (std::f64::consts::TAU * k as f64 / d as f64).cos()
            }
            ChannelVariant::Linear => x * k as f64 / d as f64,
            ChannelVariant::Constant => x,
        })
        .collect()
}

/// Angles of the trainable decoding tail.
///
/// Layout: `depth` layers, each holding d−1 angles for wire A followed by d−1
/// for wire B (level 0 of each diagonal gate is pinned to phase 0).
#[derive(Debug, Clone, PartialEq)]
pub struct AnsatzParams {
    pub d: usize,
    pub depth: usize,
    pub angles: Vec<f64>,
}

impl AnsatzParams {
    pub fn angle_count(d: usize, depth: usize) -> usize {
        depth * 2 * (d - 1)
    }

    pub fn zeroed(d: usize, depth: usize) -> Self {
        Self {
            d,
            depth,
            angles: vec![0.0; Self::angle_count(d, depth)],
        }
    }

    /// Uniform random angles in [−scale, scale].
    pub fn random<R: Rng + ?Sized>(d: usize, depth: usize, scale: f64, rng: &mut R) -> Self {
        let angles = (0..Self::angle_count(d, depth))
            .map(|_| rng.gen_range(-scale..=scale))
            .collect();
        Self { d, depth, angles }
    }

    pub fn validate(&self) -> Result<()> {
        let expected = Self::angle_count(self.d, self.depth);
        if self.angles.len() != expected {
            return Err(Error::BadAngleCount {
                expected,
                got: self.angles.len(),
            });
        }
        Ok(())
    }

    fn layer_angles(&self, layer: usize, wire: Wire) -> &[f64] {
        let per_wire = self.d - 1;
        let base = layer * 2 * per_wire
            + match wire {
                Wire::A => 0,
                Wire::B => per_wire,
            };
        &self.angles[base..base + per_wire]
    }
}

/// Static description of one experiment point.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolConfig {
    pub d: usize,
    pub d_prime: usize,
    pub channel: ChannelModel,
    pub ansatz_depth: usize,
    /// Skip the trainable tail entirely (the plain Bell-basis measurement).
    pub bypass_ansatz: bool,
    /// Use the inverse Fourier gate in the fixed decoding step (default). The
    /// forward direction is the alternate convention; both decode
    /// deterministically at x = 0.
    pub inverse_fourier_decode: bool,
    /// Flip the controlled gate's sign convention in the fixed decoding step.
    /// Breaks deterministic decoding for d > 2; exists so the self-test can
    /// prove its determinism check has teeth.
    pub flip_cx: bool,
}

impl ProtocolConfig {
    pub fn new(d: usize, d_prime: usize, channel: ChannelModel, ansatz_depth: usize) -> Result<Self> {
        let cfg = Self {
            d,
            d_prime,
            channel,
            ansatz_depth,
            bypass_ansatz: false,
            inverse_fourier_decode: true,
            flip_cx: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(Error::InvalidDimension(self.d));
        }
        if self.d_prime < 1 || self.d_prime > self.d {
            return Err(Error::InvalidConfig(format!(
                "d_prime: must satisfy 1 <= d_prime <= d, got {} with d = {}",
                self.d_prime, self.d
            )));
        }
        if self.channel.d != self.d {
            return Err(Error::InvalidConfig(format!(
                "channel: built for d = {}, protocol has d = {}",
                self.channel.d, self.d
            )));
        }
        self.channel.validate()
    }

    pub fn k(&self) -> usize {
        self.channel.k()
    }

    /// Number of trainable angles (zero when bypassed).
    pub fn angle_count(&self) -> usize {
        if self.bypass_ansatz {
            0
        } else {
            AnsatzParams::angle_count(self.d, self.ansatz_depth)
        }
    }
}

/// Encodes a message on wire A of the shared entangled state:
/// clock^{m2} followed by shift^{m1}.
pub fn encode(bell: &TwoQuditState, m: Message, d_prime: usize) -> Result<TwoQuditState> {
    if m.m1 >= d_prime || m.m2 >= d_prime {
        return Err(Error::InvalidMessage {
            m1: m.m1,
            m2: m.m2,
            d_prime,
        });
    }
    let phased = apply_clock_power(bell, Wire::A, m.m2 as i64);
    Ok(apply_shift_power(&phased, Wire::A, m.m1 as i64))
}

/// Sends wire A through the parameter-dependent channel: a diagonal phase
/// profile selected by the variant.
pub fn apply_channel(
    state: &TwoQuditState,
    x: f64,
    variant: ChannelVariant,
) -> Result<TwoQuditState> {
    if x.abs() > std::f64::consts::PI + 1e-12 {
        return Err(Error::InvalidConfig(format!(
            "x: channel parameter must lie in [-pi, pi], got {x}"
        )));
    }
    let phases = channel_phases(state.d(), x, variant);
    apply_diag_phase(state, Wire::A, &phases)
}

/// The trainable tail: per layer, diagonal phase gates on both wires followed
/// by the fixed mixing step (Fourier on each wire, then the controlled gate).
pub fn ansatz_unitary(state: &TwoQuditState, params: &AnsatzParams) -> Result<TwoQuditState> {
    params.validate()?;
    if params.d != state.d() {
        return Err(Error::InvalidConfig(format!(
            "ansatz: built for d = {}, state has d = {}",
            params.d,
            state.d()
        )));
    }
    let d = state.d();
    let mut cur = state.clone();
    let mut phases = vec![0.0; d];
    for layer in 0..params.depth {
        for wire in [Wire::A, Wire::B] {
            phases[0] = 0.0;
            phases[1..].copy_from_slice(params.layer_angles(layer, wire));
            cur = apply_diag_phase(&cur, wire, &phases)?;
        }
        cur = apply_fourier(&cur, Wire::A, false);
        cur = apply_fourier(&cur, Wire::B, false);
        cur = apply_cx(&cur, Wire::A);
    }
    Ok(cur)
}

/// The receiver's full pre-measurement circuit: controlled gate (A control),
/// Fourier on A, then the trainable tail unless bypassed.
pub fn decode_circuit(
    state: &TwoQuditState,
    params: &AnsatzParams,
    cfg: &ProtocolConfig,
) -> Result<TwoQuditState> {
    let crossed = if cfg.flip_cx {
        apply_cx_inverse(state, Wire::A)
    } else {
        apply_cx(state, Wire::A)
    };
    let mixed = apply_fourier(&crossed, Wire::A, cfg.inverse_fourier_decode);
    if cfg.bypass_ansatz || params.depth == 0 {
        Ok(mixed)
    } else {
        ansatz_unitary(&mixed, params)
    }
}

/// Exact outcome probabilities for one transmission: entangled pair →
/// encoding → channel → decoding circuit → Born rule. No sampling.
pub fn outcome_distribution(
    m: Message,
    x: f64,
    params: &AnsatzParams,
    cfg: &ProtocolConfig,
) -> Result<OutcomeDistribution> {
    let bell = make_bell_state(cfg.d)?;
    let encoded = encode(&bell, m, cfg.d_prime)?;
    let through = apply_channel(&encoded, x, cfg.channel.variant)?;
    let decoded = decode_circuit(&through, params, cfg)?;
    Ok(born_distribution(&decoded))
}

/// Outcome index the plain Bell-basis measurement assigns to a message at
/// x = 0 under the default conventions: s = (m2, (−m1) mod d).
pub fn superdense_outcome(m: Message, d: usize) -> (usize, usize) {
    (m.m2, (d - m.m1 % d) % d)
}

/// Inverse of [`superdense_outcome`]: the analytic decoding map s ↦ m.
pub fn superdense_decode(s1: usize, s2: usize, d: usize) -> Message {
    Message::new((d - s2 % d) % d, s1)
}
