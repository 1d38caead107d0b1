//! Dense two-qudit state-vector engine.
//!
//! A state lives on a pair of d-level systems and is stored as a flat complex
//! vector with index `a*d + b` for the basis state |a,b⟩, where `a` labels the
//! first (A) qudit and `b` the second (B). Gate routines are pure: they take a
//! state by reference and return a new one, preserving the unit norm. All
//! randomness goes through an explicit caller-owned generator.

pub mod dense;

use num_complex::Complex64;
use rand::Rng;
use std::f64::consts::TAU;

use crate::error::{Error, Result};

/// Tolerance on norms and probability sums.
pub const NORM_TOL: f64 = 1e-10;
/// Negative probabilities above this magnitude are treated as round-off and
/// clamped to zero; anything more negative is an error.
pub const PROB_CLAMP: f64 = 1e-12;

/// Which qudit of the pair a single-qudit gate acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Wire {
    A,
    B,
}

/// Joint state of the two qudits.
///
/// Invariants: `amplitudes.len() == d*d` and the squared norm is 1 within
/// [`NORM_TOL`].
#[derive(Debug, Clone, PartialEq)]
pub struct TwoQuditState {
    d: usize,
    amplitudes: Vec<Complex64>,
}

impl TwoQuditState {
    /// Builds a state from raw amplitudes, checking dimension and norm.
    pub fn new(d: usize, amplitudes: Vec<Complex64>) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidDimension(d));
        }
        if amplitudes.len() != d * d {
            return Err(Error::BadAmplitudeCount {
                expected: d * d,
                got: amplitudes.len(),
            });
        }
        let norm_sq: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm_sq - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(norm_sq));
        }
        Ok(Self { d, amplitudes })
    }

    /// Computational basis state |a,b⟩.
    pub fn basis(d: usize, a: usize, b: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidDimension(d));
        }
        if a >= d || b >= d {
            return Err(Error::BadAmplitudeCount {
                expected: d * d,
                got: a * d + b,
            });
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); d * d];
        amplitudes[a * d + b] = Complex64::new(1.0, 0.0);
        Ok(Self { d, amplitudes })
    }

    // Internal constructor for gate outputs that are norm-preserving by
    // construction.
    fn from_parts(d: usize, amplitudes: Vec<Complex64>) -> Self {
        debug_assert_eq!(amplitudes.len(), d * d);
        Self { d, amplitudes }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sq(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Modulus of the inner product ⟨self|other⟩; global-phase-insensitive
    /// state comparison.
    pub fn overlap(&self, other: &Self) -> f64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex64>()
            .norm()
    }
}

/// Measurement probabilities over the d² joint outcomes, index `s1*d + s2`.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeDistribution {
    d: usize,
    probs: Vec<f64>,
}

impl OutcomeDistribution {
    /// Validates and clamps a probability vector: entries in [-PROB_CLAMP, 0)
    /// become 0, more negative entries are rejected, and the sum must be 1
    /// within [`NORM_TOL`].
    pub fn new(d: usize, mut probs: Vec<f64>) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidDimension(d));
        }
        if probs.len() != d * d {
            return Err(Error::BadAmplitudeCount {
                expected: d * d,
                got: probs.len(),
            });
        }
        for (index, p) in probs.iter_mut().enumerate() {
            if *p < 0.0 {
                if *p < -PROB_CLAMP {
                    return Err(Error::NegativeProbability { index, value: *p });
                }
                *p = 0.0;
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > NORM_TOL {
            return Err(Error::UnnormalizedDistribution(sum));
        }
        Ok(Self { d, probs })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Probability of the joint outcome (s1, s2).
    pub fn prob(&self, s1: usize, s2: usize) -> f64 {
        self.probs[s1 * self.d + s2]
    }

    /// Total-variation distance to another distribution over the same space.
    pub fn tv_distance(&self, other: &Self) -> f64 {
        0.5 * self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(p, q)| (p - q).abs())
            .sum::<f64>()
    }
}

/// Root of unity ω^e with ω = e^{2πi/d}.
fn omega_power(d: usize, exponent: i64) -> Complex64 {
    let e = exponent.rem_euclid(d as i64) as f64;
    Complex64::from_polar(1.0, TAU * e / d as f64)
}

/// Maximally entangled state (1/√d) Σ_k |k,k⟩.
pub fn make_bell_state(d: usize) -> Result<TwoQuditState> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    let amp = Complex64::new(1.0 / (d as f64).sqrt(), 0.0);
    let mut amplitudes = vec![Complex64::new(0.0, 0.0); d * d];
    for k in 0..d {
        amplitudes[k * d + k] = amp;
    }
    Ok(TwoQuditState::from_parts(d, amplitudes))
}

/// Cyclic shift on one qudit: the basis label is incremented by `power` mod d.
pub fn apply_shift_power(state: &TwoQuditState, wire: Wire, power: i64) -> TwoQuditState {
    let d = state.d;
    let shift = power.rem_euclid(d as i64) as usize;
    let mut out = vec![Complex64::new(0.0, 0.0); d * d];
    for a in 0..d {
        for b in 0..d {
            let (na, nb) = match wire {
                Wire::A => ((a + shift) % d, b),
                Wire::B => (a, (b + shift) % d),
            };
            out[na * d + nb] = state.amplitudes[a * d + b];
        }
    }
    TwoQuditState::from_parts(d, out)
}

/// Clock phase on one qudit: the level-k component picks up ω^{k·power}.
pub fn apply_clock_power(state: &TwoQuditState, wire: Wire, power: i64) -> TwoQuditState {
    let d = state.d;
    let p = power.rem_euclid(d as i64);
    let mut out = state.amplitudes.clone();
    for a in 0..d {
        for b in 0..d {
            let k = match wire {
                Wire::A => a,
                Wire::B => b,
            };
            out[a * d + b] *= omega_power(d, k as i64 * p);
        }
    }
    TwoQuditState::from_parts(d, out)
}

/// d-dimensional Fourier gate F\[j,k\] = ω^{jk}/√d on one qudit, or its
/// conjugate transpose when `inverse` is set.
pub fn apply_fourier(state: &TwoQuditState, wire: Wire, inverse: bool) -> TwoQuditState {
    let d = state.d;
    let scale = 1.0 / (d as f64).sqrt();
    let sign: i64 = if inverse { -1 } else { 1 };
    let mut out = vec![Complex64::new(0.0, 0.0); d * d];
    for other in 0..d {
        for j in 0..d {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..d {
                let src = match wire {
                    Wire::A => k * d + other,
                    Wire::B => other * d + k,
                };
                acc += omega_power(d, sign * (j * k) as i64) * state.amplitudes[src];
            }
            let dst = match wire {
                Wire::A => j * d + other,
                Wire::B => other * d + j,
            };
            out[dst] = acc * scale;
        }
    }
    TwoQuditState::from_parts(d, out)
}

/// Controlled cyclic gate: with control on A, maps |a,b⟩ → |a,(b−a) mod d⟩
/// (the target label is decremented by the control label); control on B acts
/// symmetrically on the first label.
pub fn apply_cx(state: &TwoQuditState, control: Wire) -> TwoQuditState {
    let d = state.d;
    let mut out = vec![Complex64::new(0.0, 0.0); d * d];
    for a in 0..d {
        for b in 0..d {
            let (na, nb) = match control {
                Wire::A => (a, (b + d - a) % d),
                Wire::B => ((a + d - b) % d, b),
            };
            out[na * d + nb] = state.amplitudes[a * d + b];
        }
    }
    TwoQuditState::from_parts(d, out)
}

/// Inverse of [`apply_cx`]: the target label is incremented by the control
/// label. Also serves the opposite sign convention in mutation checks.
pub fn apply_cx_inverse(state: &TwoQuditState, control: Wire) -> TwoQuditState {
    let d = state.d;
    let mut out = vec![Complex64::new(0.0, 0.0); d * d];
    for a in 0..d {
        for b in 0..d {
            let (na, nb) = match control {
                Wire::A => (a, (b + a) % d),
                Wire::B => ((a + b) % d, b),
            };
            out[na * d + nb] = state.amplitudes[a * d + b];
        }
    }
    TwoQuditState::from_parts(d, out)
}

/// Diagonal phase gate: the level-k component of the chosen qudit is
/// multiplied by e^{−i·phases\[k\]}.
pub fn apply_diag_phase(
    state: &TwoQuditState,
    wire: Wire,
    phases: &[f64],
) -> Result<TwoQuditState> {
    let d = state.d;
    if phases.len() != d {
        return Err(Error::BadPhaseCount {
            expected: d,
            got: phases.len(),
        });
    }
    let factors: Vec<Complex64> = phases
        .iter()
        .map(|&p| Complex64::from_polar(1.0, -p))
        .collect();
    let mut out = state.amplitudes.clone();
    for a in 0..d {
        for b in 0..d {
            let k = match wire {
                Wire::A => a,
                Wire::B => b,
            };
            out[a * d + b] *= factors[k];
        }
    }
    Ok(TwoQuditState::from_parts(d, out))
}

/// Born-rule outcome probabilities |amplitude|² of the joint measurement.
pub fn born_distribution(state: &TwoQuditState) -> OutcomeDistribution {
    let probs: Vec<f64> = state.amplitudes.iter().map(|a| a.norm_sqr()).collect();
    OutcomeDistribution::new(state.d, probs).expect("squared amplitudes of a valid state")
}

/// Draws one outcome index from the distribution using the caller's generator.
pub fn sample_outcome<R: Rng + ?Sized>(dist: &OutcomeDistribution, rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &p) in dist.probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // Round-off can leave acc marginally below 1; return the last outcome
    // with nonzero probability.
    dist.probs
        .iter()
        .rposition(|&p| p > 0.0)
        .unwrap_or(dist.probs.len() - 1)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn assert_close(a: f64, b: f64, tol: f64, what: &str) {
        assert!((a - b).abs() <= tol, "{what}: {a} vs {b}");
    }

    pub(crate) fn random_state(d: usize, rng: &mut ChaCha8Rng) -> TwoQuditState {
        let mut amps: Vec<Complex64> = (0..d * d)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        for a in amps.iter_mut() {
            *a /= norm;
        }
        TwoQuditState::new(d, amps).unwrap()
    }

    #[test]
    fn bell_state_d2_amplitudes() {
        let s = make_bell_state(2).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let expect = [r, 0.0, 0.0, r];
        for (amp, e) in s.amplitudes().iter().zip(expect) {
            assert_close(amp.re, e, 1e-15, "real part");
            assert_close(amp.im, 0.0, 1e-15, "imag part");
        }
    }

    #[test]
    fn bell_state_d3_support() {
        let s = make_bell_state(3).unwrap();
        let r = 1.0 / 3f64.sqrt();
        for (i, amp) in s.amplitudes().iter().enumerate() {
            if i == 0 || i == 4 || i == 8 {
                assert_close(amp.re, r, 1e-15, "diagonal amplitude");
            } else {
                assert_eq!(amp.norm_sqr(), 0.0, "off-diagonal amplitude at {i}");
            }
        }
    }

    #[test]
    fn bell_state_reduced_density_is_maximally_mixed() {
        // Trace out either qudit of the d=2 pair; both reduced matrices are I/2.
        let s = make_bell_state(2).unwrap();
        let d = 2;
        let mut rho_a = [[Complex64::new(0.0, 0.0); 2]; 2];
        let mut rho_b = [[Complex64::new(0.0, 0.0); 2]; 2];
        for a1 in 0..d {
            for a2 in 0..d {
                for b in 0..d {
                    rho_a[a1][a2] +=
                        s.amplitudes()[a1 * d + b] * s.amplitudes()[a2 * d + b].conj();
                    rho_b[a1][a2] +=
                        s.amplitudes()[b * d + a1] * s.amplitudes()[b * d + a2].conj();
                }
            }
        }
        for i in 0..d {
            for j in 0..d {
                let expect = if i == j { 0.5 } else { 0.0 };
                assert_close(rho_a[i][j].re, expect, 1e-12, "rho_A");
                assert_close(rho_b[i][j].re, expect, 1e-12, "rho_B");
                assert_close(rho_a[i][j].im, 0.0, 1e-12, "rho_A imag");
            }
        }
    }

    #[test]
    fn bell_state_rejects_small_dimension() {
        assert!(matches!(make_bell_state(1), Err(Error::InvalidDimension(1))));
        assert!(matches!(make_bell_state(0), Err(Error::InvalidDimension(0))));
    }

    #[test]
    fn shift_wraps_around() {
        let s = TwoQuditState::basis(3, 2, 0).unwrap();
        let out = apply_shift_power(&s, Wire::A, 1);
        assert_close(out.amplitudes()[0].re, 1.0, 1e-15, "|0,0> amplitude");
    }

    #[test]
    fn shift_power_zero_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s = random_state(4, &mut rng);
        let out = apply_shift_power(&s, Wire::A, 0);
        assert_eq!(s, out);
    }

    #[test]
    fn shift_power_mod_d() {
        let s = TwoQuditState::basis(4, 1, 1).unwrap();
        let out = apply_shift_power(&s, Wire::A, 3);
        assert_close(out.amplitudes()[1].re, 1.0, 1e-15, "|0,1> amplitude");
        // Negative powers wrap the other way.
        let back = apply_shift_power(&out, Wire::A, -3);
        assert!(back.overlap(&s) > 1.0 - 1e-12);
    }

    #[test]
    fn clock_phases_levels() {
        // d=4: level 1 on wire A picks up omega = i.
        let s = TwoQuditState::basis(4, 1, 0).unwrap();
        let out = apply_clock_power(&s, Wire::A, 1);
        let amp = out.amplitudes()[4];
        assert_close(amp.re, 0.0, 1e-15, "re");
        assert_close(amp.im, 1.0, 1e-15, "im");
        // Level 0 is untouched for any power.
        let s0 = TwoQuditState::basis(3, 0, 2).unwrap();
        for p in [1, 2, 5, -3] {
            let o = apply_clock_power(&s0, Wire::A, p);
            assert_eq!(o.amplitudes(), s0.amplitudes());
        }
    }

    #[test]
    fn clock_d2_is_pauli_z() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = random_state(2, &mut rng);
        let out = apply_clock_power(&s, Wire::A, 1);
        for (i, (a, b)) in s.amplitudes().iter().zip(out.amplitudes()).enumerate() {
            let sign = if i / 2 == 1 { -1.0 } else { 1.0 };
            assert_close((a * sign - b).norm(), 0.0, 1e-15, "Z action");
        }
    }

    #[test]
    fn fourier_of_zero_is_uniform() {
        for d in [2, 3, 5, 8] {
            let s = TwoQuditState::basis(d, 0, 0).unwrap();
            let out = apply_fourier(&s, Wire::A, false);
            let r = 1.0 / (d as f64).sqrt();
            for j in 0..d {
                assert_close(out.amplitudes()[j * d].re, r, 1e-12, "uniform amplitude");
            }
        }
    }

    #[test]
    fn fourier_inverse_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for d in [2, 3, 4, 8] {
            let s = random_state(d, &mut rng);
            let out = apply_fourier(&apply_fourier(&s, Wire::B, false), Wire::B, true);
            for (a, b) in s.amplitudes().iter().zip(out.amplitudes()) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn fourier_d2_is_hadamard() {
        let s = TwoQuditState::basis(2, 0, 0).unwrap();
        let plus = apply_fourier(&s, Wire::A, false);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert_close(plus.amplitudes()[0].re, r, 1e-15, "H|0> component 0");
        assert_close(plus.amplitudes()[2].re, r, 1e-15, "H|0> component 1");
        let s1 = TwoQuditState::basis(2, 1, 0).unwrap();
        let minus = apply_fourier(&s1, Wire::A, false);
        assert_close(minus.amplitudes()[0].re, r, 1e-15, "H|1> component 0");
        assert_close(minus.amplitudes()[2].re, -r, 1e-15, "H|1> component 1");
    }

    #[test]
    fn cx_subtracts_control() {
        let s = TwoQuditState::basis(3, 2, 1).unwrap();
        let out = apply_cx(&s, Wire::A);
        // (1 - 2) mod 3 = 2.
        assert_close(out.amplitudes()[2 * 3 + 2].re, 1.0, 1e-15, "|2,2>");
    }

    #[test]
    fn cx_zero_control_is_identity() {
        let s = TwoQuditState::basis(5, 0, 3).unwrap();
        let out = apply_cx(&s, Wire::A);
        assert_eq!(s.amplitudes(), out.amplitudes());
    }

    #[test]
    fn cx_has_order_d() {
        let d = 4;
        let s = TwoQuditState::basis(d, 3, 1).unwrap();
        let mut cur = s.clone();
        for _ in 0..d {
            cur = apply_cx(&cur, Wire::A);
        }
        assert_eq!(s.amplitudes(), cur.amplitudes());
    }

    #[test]
    fn cx_inverse_undoes_cx() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for control in [Wire::A, Wire::B] {
            let s = random_state(3, &mut rng);
            let out = apply_cx_inverse(&apply_cx(&s, control), control);
            assert!(s.overlap(&out) > 1.0 - 1e-12);
        }
    }

    #[test]
    fn diag_phase_identity_and_clock_equivalence() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let d = 5;
        let s = random_state(d, &mut rng);
        let out = apply_diag_phase(&s, Wire::B, &vec![0.0; d]).unwrap();
        assert_eq!(s.amplitudes(), out.amplitudes());

        // phases[k] = -2πk/d reproduces one clock power.
        let phases: Vec<f64> = (0..d).map(|k| -TAU * k as f64 / d as f64).collect();
        let via_phase = apply_diag_phase(&s, Wire::A, &phases).unwrap();
        let via_clock = apply_clock_power(&s, Wire::A, 1);
        for (a, b) in via_phase.amplitudes().iter().zip(via_clock.amplitudes()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn diag_phase_preserves_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = random_state(4, &mut rng);
        let phases: Vec<f64> = (0..4).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let out = apply_diag_phase(&s, Wire::A, &phases).unwrap();
        assert_close(out.norm_sq(), 1.0, 1e-12, "norm");
    }

    #[test]
    fn diag_phase_rejects_wrong_length() {
        let s = make_bell_state(3).unwrap();
        let err = apply_diag_phase(&s, Wire::A, &[0.0, 0.0]).unwrap_err();
        assert!(matches!(err, Error::BadPhaseCount { expected: 3, got: 2 }));
    }

    #[test]
    fn born_of_bell_and_basis_states() {
        let bell = make_bell_state(2).unwrap();
        let dist = born_distribution(&bell);
        let expect = [0.5, 0.0, 0.0, 0.5];
        for (p, e) in dist.probs().iter().zip(expect) {
            assert_close(*p, e, 1e-15, "bell probability");
        }

        let basis = TwoQuditState::basis(3, 1, 2).unwrap();
        let dist = born_distribution(&basis);
        for (i, &p) in dist.probs().iter().enumerate() {
            assert_eq!(p, if i == 5 { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn born_after_fourier_is_uniform_on_alice() {
        let s = TwoQuditState::basis(3, 0, 0).unwrap();
        let out = apply_fourier(&s, Wire::A, false);
        let dist = born_distribution(&out);
        for i in 0..9 {
            let expect = if i % 3 == 0 { 1.0 / 3.0 } else { 0.0 };
            assert_close(dist.probs()[i], expect, 1e-12, "uniform prob");
        }
    }

    #[test]
    fn sample_one_hot_is_certain() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut probs = vec![0.0; 9];
        probs[7] = 1.0;
        let dist = OutcomeDistribution::new(3, probs).unwrap();
        for _ in 0..50 {
            assert_eq!(sample_outcome(&dist, &mut rng), 7);
        }
    }

    #[test]
    fn sample_uniform_frequencies_within_three_sigma() {
        // Chi-square style check: uniform over 4 outcomes, 1e5 draws, each
        // empirical frequency within 3σ of 1/4.
        let dist = OutcomeDistribution::new(2, vec![0.25; 4]).unwrap();
        let n = 100_000usize;
        let mut rng = ChaCha8Rng::seed_from_u64(12345);
        let mut counts = [0usize; 4];
        for _ in 0..n {
            counts[sample_outcome(&dist, &mut rng)] += 1;
        }
        let sigma = (0.25 * 0.75 / n as f64).sqrt();
        for c in counts {
            let f = c as f64 / n as f64;
            assert!(
                (f - 0.25).abs() <= 3.0 * sigma,
                "frequency {f} outside 3 sigma of 0.25"
            );
        }
    }

    #[test]
    fn sampling_is_deterministic_given_seed() {
        let dist = born_distribution(&make_bell_state(4).unwrap());
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..32).map(|_| sample_outcome(&dist, &mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(42), draw(42));
    }

    #[test]
    fn distribution_clamps_round_off_but_rejects_real_negatives() {
        let mut probs = vec![0.5, 0.5, 0.0, -1e-13];
        probs[2] = 1e-13;
        let dist = OutcomeDistribution::new(2, probs).unwrap();
        assert_eq!(dist.probs()[3], 0.0);

        let bad = OutcomeDistribution::new(2, vec![0.5, 0.5, 1e-6, -1e-6]);
        assert!(matches!(bad, Err(Error::NegativeProbability { index: 3, .. })));
    }

    #[test]
    fn weyl_relation_on_every_basis_state() {
        // Clock-then-shift equals omega times shift-then-clock.
        for d in [2, 3, 4, 8] {
            let omega = omega_power(d, 1);
            for k in 0..d {
                let s = TwoQuditState::basis(d, k, 0).unwrap();
                let zx = apply_clock_power(&apply_shift_power(&s, Wire::A, 1), Wire::A, 1);
                let xz = apply_shift_power(&apply_clock_power(&s, Wire::A, 1), Wire::A, 1);
                for (a, b) in zx.amplitudes().iter().zip(xz.amplitudes()) {
                    assert!((a - omega * b).norm() < 1e-12, "Weyl relation d={d} k={k}");
                }
            }
        }
    }

    #[test]
    fn fourier_conjugated_shift_is_diagonal() {
        // F† X F applied to |k⟩ returns |k⟩ up to a phase.
        for d in [2, 3, 5] {
            for k in 0..d {
                let s = TwoQuditState::basis(d, k, 0).unwrap();
                let f = apply_fourier(&s, Wire::A, false);
                let xf = apply_shift_power(&f, Wire::A, 1);
                let out = apply_fourier(&xf, Wire::A, true);
                assert!(
                    out.overlap(&s) > 1.0 - 1e-10,
                    "F†XF not diagonal at d={d}, k={k}"
                );
            }
        }
    }

    #[test]
    fn gates_preserve_norm_on_random_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for d in [2, 3, 4, 8] {
            for _ in 0..100 {
                let s = random_state(d, &mut rng);
                let phases: Vec<f64> = (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect();
                let outs = [
                    apply_shift_power(&s, Wire::A, 2),
                    apply_clock_power(&s, Wire::B, 3),
                    apply_fourier(&s, Wire::A, false),
                    apply_fourier(&s, Wire::B, true),
                    apply_cx(&s, Wire::A),
                    apply_cx_inverse(&s, Wire::B),
                    apply_diag_phase(&s, Wire::A, &phases).unwrap(),
                ];
                for out in outs {
                    assert_close(out.norm_sq(), 1.0, NORM_TOL, "norm after gate");
                }
            }
        }
    }
}
