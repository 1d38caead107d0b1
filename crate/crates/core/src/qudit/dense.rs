//! Explicit dense matrices on the two-qudit space.
//!
//! Every constructor here writes matrix entries directly from the defining
//! formula rather than reusing the specialized gate kernels, so a full
//! matrix-vector product through [`dense_oracle_apply`] is an independent
//! cross-check route for those kernels.

use num_complex::Complex64;
use std::f64::consts::TAU;

use super::{TwoQuditState, Wire, NORM_TOL};
use crate::error::{Error, Result};

/// Square complex matrix in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![Complex64::new(0.0, 0.0); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.dim + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: Complex64) {
        self.data[row * self.dim + col] = value;
    }

    /// Matrix product self · rhs.
    pub fn matmul(&self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.dim, rhs.dim, "matmul dimension mismatch");
        let n = self.dim;
        let mut out = CMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * rhs.data[k * n + j];
                }
            }
        }
        out
    }

    /// Kronecker product self ⊗ rhs. With the A-major index layout, a gate U
    /// on wire A embeds as kron(U, I) and on wire B as kron(I, U).
    pub fn kron(&self, rhs: &CMatrix) -> CMatrix {
        let n = self.dim;
        let m = rhs.dim;
        let mut out = CMatrix::zeros(n * m);
        for i in 0..n {
            for j in 0..n {
                let a = self.data[i * n + j];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for k in 0..m {
                    for l in 0..m {
                        out.data[(i * m + k) * (n * m) + (j * m + l)] = a * rhs.data[k * m + l];
                    }
                }
            }
        }
        out
    }

    pub fn dagger(&self) -> CMatrix {
        let n = self.dim;
        let mut out = CMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.data[j * n + i] = self.data[i * n + j].conj();
            }
        }
        out
    }

    /// Largest elementwise deviation of M†M from the identity.
    pub fn unitarity_deviation(&self) -> f64 {
        let prod = self.dagger().matmul(self);
        let n = self.dim;
        let mut max_dev: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let expect = if i == j {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                };
                max_dev = max_dev.max((prod.data[i * n + j] - expect).norm());
            }
        }
        max_dev
    }
}

fn omega(d: usize, exponent: i64) -> Complex64 {
    let e = exponent.rem_euclid(d as i64) as f64;
    Complex64::from_polar(1.0, TAU * e / d as f64)
}

/// Single-qudit cyclic shift: M\[j,k\] = 1 iff j = (k+1) mod d.
pub fn shift_matrix(d: usize) -> CMatrix {
    let mut m = CMatrix::zeros(d);
    for k in 0..d {
        m.set((k + 1) % d, k, Complex64::new(1.0, 0.0));
    }
    m
}

/// Single-qudit clock: diag(ω^0, ω^1, ..., ω^{d−1}).
pub fn clock_matrix(d: usize) -> CMatrix {
    let mut m = CMatrix::zeros(d);
    for k in 0..d {
        m.set(k, k, omega(d, k as i64));
    }
    m
}

/// Single-qudit Fourier matrix F\[j,k\] = ω^{jk}/√d, conjugated when `inverse`.
pub fn fourier_matrix(d: usize, inverse: bool) -> CMatrix {
    let scale = 1.0 / (d as f64).sqrt();
    let sign: i64 = if inverse { -1 } else { 1 };
    let mut m = CMatrix::zeros(d);
    for j in 0..d {
        for k in 0..d {
            m.set(j, k, omega(d, sign * (j * k) as i64) * scale);
        }
    }
    m
}

/// Single-qudit diagonal phase matrix diag(e^{−i·phases\[k\]}).
pub fn diag_phase_matrix(phases: &[f64]) -> CMatrix {
    let d = phases.len();
    let mut m = CMatrix::zeros(d);
    for (k, &p) in phases.iter().enumerate() {
        m.set(k, k, Complex64::from_polar(1.0, -p));
    }
    m
}

/// Two-qudit controlled cyclic gate as a permutation matrix; with control on
/// A the column |a,b⟩ maps to the row |a,(b−a) mod d⟩.
pub fn cx_matrix(d: usize, control: Wire) -> CMatrix {
    let mut m = CMatrix::zeros(d * d);
    for a in 0..d {
        for b in 0..d {
            let (na, nb) = match control {
                Wire::A => (a, (b + d - a) % d),
                Wire::B => ((a + d - b) % d, b),
            };
            m.set(na * d + nb, a * d + b, Complex64::new(1.0, 0.0));
        }
    }
    m
}

/// Embeds a single-qudit matrix on the chosen wire of the two-qudit space.
pub fn on_wire(gate: &CMatrix, wire: Wire) -> CMatrix {
    let id = CMatrix::identity(gate.dim());
    match wire {
        Wire::A => gate.kron(&id),
        Wire::B => id.kron(gate),
    }
}

/// Full matrix-vector product of a unitary on the joint state. Rejects
/// matrices that are not unitary within [`NORM_TOL`].
pub fn dense_oracle_apply(state: &TwoQuditState, matrix: &CMatrix) -> Result<TwoQuditState> {
    let n = state.d() * state.d();
    if matrix.dim() != n {
        return Err(Error::BadAmplitudeCount {
            expected: n,
            got: matrix.dim(),
        });
    }
    let dev = matrix.unitarity_deviation();
    if dev > NORM_TOL {
        return Err(Error::NonUnitaryOracle(dev));
    }
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for (i, slot) in out.iter_mut().enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, amp) in state.amplitudes().iter().enumerate() {
            acc += matrix.get(i, j) * amp;
        }
        *slot = acc;
    }
    TwoQuditState::new(state.d(), out)
}
