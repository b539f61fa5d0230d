//! Exact gate, state and measurement algebra for the witness circuit.
//!
//! The circuit is `|0> -> S -> S_beta | S_phi -> S -> readout(0)`. The first
//! half defines the prepared state `P_beta`, the second half the measured
//! effect `M_phi`, and the outcome probability is `Tr(M_phi P_beta)`.
//!
//! Matrices carry their dimension explicitly so the same kernel also serves
//! the three-level leakage models in [`crate::noise`].

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::ops::{Add, Mul};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

const UNITARY_TOL: f64 = 1e-12;
const HERMITIAN_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-12;
const SPECTRUM_TOL: f64 = 1e-10;
const PROB_TOL: f64 = 1e-12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Dense square complex matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "matrix dimension must be positive");
        Self {
            dim,
            data: vec![ZERO; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = ONE;
        }
        m
    }

    /// Builds a matrix from rows; every row must have `rows.len()` entries
    /// and every entry must be finite.
    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 {
            return Err(Error::InvalidMatrix("empty matrix".into()));
        }
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidMatrix("non-finite entry".into()));
        }
        Ok(Self { dim, data })
    }

    pub fn diagonal(diag: &[Complex64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Outer product `|v><v|`.
    pub fn projector(v: &[Complex64]) -> Self {
        let dim = v.len();
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m[(i, j)] = v[i] * v[j].conj();
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn adjoint(&self) -> Self {
        let mut m = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                m[(i, j)] = self[(j, i)].conj();
            }
        }
        m
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|&z| z * factor).collect(),
        }
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.max_abs_diff(&self.adjoint()) <= tol
    }

    /// Matrix-vector product.
    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(v.len(), self.dim, "dimension mismatch");
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self[(i, j)] * v[j]).sum())
            .collect()
    }

    /// Places `self` in the top-left block of a `dim`-dimensional matrix,
    /// filling the remaining diagonal with `fill`.
    pub fn embed(&self, dim: usize, fill: Complex64) -> Self {
        assert!(dim >= self.dim, "cannot embed into a smaller space");
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m[(i, j)] = if i < self.dim && j < self.dim {
                    self[(i, j)]
                } else if i == j {
                    fill
                } else {
                    ZERO
                };
            }
        }
        m
    }

    /// `Tr(self * other)` without forming the product.
    pub fn trace_product(&self, other: &Self) -> Complex64 {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        let d = self.dim;
        let mut acc = ZERO;
        for i in 0..d {
            for j in 0..d {
                acc += self.data[i * d + j] * other.data[j * d + i];
            }
        }
        acc
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        let d = self.dim;
        let h = DMatrix::from_fn(d, d, |i, j| (self[(i, j)] + self[(j, i)].conj()) * 0.5);
        let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }
}

impl std::ops::Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.dim + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.dim + j]
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        let d = self.dim;
        let mut out = ComplexMatrix::zeros(d);
        for i in 0..d {
            for k in 0..d {
                let a = self.data[i * d + k];
                if a == ZERO {
                    continue;
                }
                for j in 0..d {
                    out.data[i * d + j] += a * rhs.data[k * d + j];
                }
            }
        }
        out
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        ComplexMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix({}x{}) [", self.dim, self.dim)?;
        for i in 0..self.dim {
            write!(f, "  ")?;
            for j in 0..self.dim {
                let z = self[(i, j)];
                write!(f, "{:+.6}{:+.6}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// A unitary gate, `U U^dagger = 1` to within `1e-12` in max-entry norm.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitaryGate {
    matrix: ComplexMatrix,
}

impl UnitaryGate {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        if !matrix.is_finite() {
            return Err(Error::InvalidMatrix("non-finite gate entry".into()));
        }
        let err = (&matrix * &matrix.adjoint()).max_abs_diff(&ComplexMatrix::identity(matrix.dim));
        if err > UNITARY_TOL {
            return Err(Error::InvalidMatrix(format!(
                "gate is not unitary (deviation {err:.3e})"
            )));
        }
        Ok(Self { matrix })
    }

    pub(crate) fn new_unchecked(matrix: ComplexMatrix) -> Self {
        Self { matrix }
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim
    }

    pub fn adjoint(&self) -> Self {
        Self::new_unchecked(self.matrix.adjoint())
    }

    /// Gate product `self * rhs` (apply `rhs` first).
    pub fn then_after(&self, rhs: &Self) -> Self {
        Self::new_unchecked(&self.matrix * &rhs.matrix)
    }

    /// Block-diagonal embedding `U ⊕ 1` into a larger space.
    pub fn embed(&self, dim: usize) -> Self {
        Self::new_unchecked(self.matrix.embed(dim, ONE))
    }

    /// Conjugation `U rho U^dagger`.
    pub fn conjugate(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        &(&self.matrix * rho) * &self.matrix.adjoint()
    }

    pub fn unitarity_error(&self) -> f64 {
        (&self.matrix * &self.matrix.adjoint()).max_abs_diff(&ComplexMatrix::identity(self.dim()))
    }
}

/// Density operator: Hermitian, unit trace, positive semidefinite.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityState {
    matrix: ComplexMatrix,
}

impl DensityState {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        if !matrix.is_finite() {
            return Err(Error::InvalidMatrix("non-finite state entry".into()));
        }
        if !matrix.is_hermitian(HERMITIAN_TOL) {
            return Err(Error::InvalidMatrix("state is not Hermitian".into()));
        }
        let tr = matrix.trace();
        if (tr - ONE).norm() > TRACE_TOL {
            return Err(Error::InvalidMatrix(format!("state trace {} != 1", tr.re)));
        }
        let min_ev = matrix.hermitian_eigenvalues()[0];
        if min_ev < -SPECTRUM_TOL {
            return Err(Error::InvalidMatrix(format!(
                "state has negative eigenvalue {min_ev:.3e}"
            )));
        }
        Ok(Self { matrix })
    }

    pub(crate) fn new_unchecked(matrix: ComplexMatrix) -> Self {
        Self { matrix }
    }

    /// Computational basis state `|level><level|`.
    pub fn basis(dim: usize, level: usize) -> Self {
        let mut m = ComplexMatrix::zeros(dim);
        m[(level, level)] = ONE;
        Self::new_unchecked(m)
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self::new_unchecked(ComplexMatrix::identity(dim).scale(ONE / dim as f64))
    }

    /// Qubit state `(1 + v.sigma)/2`; `|v| <= 1` is required.
    pub fn from_bloch(v: BlochVector) -> Result<Self> {
        if v.norm() > 1.0 + 1e-12 {
            return Err(Error::InvalidParameter {
                name: "bloch norm",
                value: v.norm(),
                reason: "must not exceed 1",
            });
        }
        let m = ComplexMatrix::from_rows(&[
            vec![
                Complex64::new((1.0 + v.z) / 2.0, 0.0),
                Complex64::new(v.x / 2.0, -v.y / 2.0),
            ],
            vec![
                Complex64::new(v.x / 2.0, v.y / 2.0),
                Complex64::new((1.0 - v.z) / 2.0, 0.0),
            ],
        ])?;
        Ok(Self::new_unchecked(m))
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    /// Zero-padded embedding into a larger space.
    pub fn embed(&self, dim: usize) -> Self {
        Self::new_unchecked(self.matrix.embed(dim, ZERO))
    }

    /// Population of a computational basis level.
    pub fn population(&self, level: usize) -> f64 {
        self.matrix[(level, level)].re
    }
}

/// Measurement effect `0 <= M <= 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasEffect {
    matrix: ComplexMatrix,
}

impl MeasEffect {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        if !matrix.is_finite() {
            return Err(Error::InvalidMatrix("non-finite effect entry".into()));
        }
        if !matrix.is_hermitian(HERMITIAN_TOL) {
            return Err(Error::InvalidMatrix("effect is not Hermitian".into()));
        }
        let ev = matrix.hermitian_eigenvalues();
        let (lo, hi) = (ev[0], ev[ev.len() - 1]);
        if lo < -SPECTRUM_TOL || hi > 1.0 + SPECTRUM_TOL {
            return Err(Error::InvalidMatrix(format!(
                "effect spectrum [{lo:.3e}, {hi:.3e}] outside [0, 1]"
            )));
        }
        Ok(Self { matrix })
    }

    pub(crate) fn new_unchecked(matrix: ComplexMatrix) -> Self {
        Self { matrix }
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim
    }

    /// Zero-padded embedding: extra levels never produce this outcome.
    pub fn embed(&self, dim: usize) -> Self {
        Self::new_unchecked(self.matrix.embed(dim, ZERO))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BlochVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochVector {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }
}

/// Which of the two opposite Viviani curves a point belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    Preparation,
    Measurement,
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// The native pi/2 rotation about x, `(1/sqrt 2) [[1, -i], [-i, 1]]`.
pub fn make_s() -> UnitaryGate {
    let h = FRAC_1_SQRT_2;
    UnitaryGate::new_unchecked(ComplexMatrix {
        dim: 2,
        data: vec![c(h, 0.0), c(0.0, -h), c(0.0, -h), c(h, 0.0)],
    })
}

/// Phase shift `diag(e^{-i theta/2}, e^{i theta/2})`.
pub fn make_z(theta: f64) -> UnitaryGate {
    let half = theta / 2.0;
    UnitaryGate::new_unchecked(ComplexMatrix::diagonal(&[
        Complex64::from_polar(1.0, -half),
        Complex64::from_polar(1.0, half),
    ]))
}

/// The S gate with its rotation axis turned by `theta`: `Z_theta^dagger S Z_theta`.
pub fn make_s_theta(theta: f64) -> UnitaryGate {
    let z = make_z(theta);
    z.adjoint().then_after(&make_s().then_after(&z))
}

/// `P_beta = S_beta S |0><0| S^dagger S_beta^dagger`.
pub fn prepare(beta: f64) -> DensityState {
    let u = make_s_theta(beta).then_after(&make_s());
    DensityState::new_unchecked(u.conjugate(DensityState::basis(2, 0).matrix()))
}

/// `M_phi = S_phi^dagger S^dagger |0><0| S S_phi`, the effect for outcome 0.
pub fn measurement_effect(phi: f64) -> MeasEffect {
    let u = make_s().then_after(&make_s_theta(phi));
    let ket0 = DensityState::basis(2, 0);
    MeasEffect::new_unchecked(u.adjoint().conjugate(ket0.matrix()))
}

/// Born rule `Tr(M P)`, clamped to `[0, 1]`.
pub fn born_probability(m: &MeasEffect, p: &DensityState) -> Result<f64> {
    if m.dim() != p.dim() {
        return Err(Error::DimensionMismatch {
            expected: m.dim(),
            found: p.dim(),
        });
    }
    let value = m.matrix.trace_product(&p.matrix).re;
    debug_assert!(
        (-PROB_TOL..=1.0 + PROB_TOL).contains(&value),
        "probability {value} out of range"
    );
    Ok(value.clamp(0.0, 1.0))
}

/// Bloch vector `v_i = Tr(rho sigma_i)` of a qubit state.
pub fn bloch_vector(p: &DensityState) -> Result<BlochVector> {
    if p.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: p.dim(),
        });
    }
    let m = &p.matrix;
    // rho = (1 + v.sigma)/2, so rho10 = (x + iy)/2
    Ok(BlochVector {
        x: (m[(0, 1)] + m[(1, 0)]).re,
        y: (m[(1, 0)] - m[(0, 1)]).im,
        z: (m[(0, 0)] - m[(1, 1)]).re,
    })
}

/// Point on the printed Viviani curves: `-(sin a cos a, sin^2 a, cos a)` for
/// preparations and `+(...)` for measurements.
///
/// These follow the published curve formulas, which differ in sign from the
/// Bloch vectors of [`prepare`] and [`measurement_effect`]; use them for
/// plotting only.
pub fn viviani_point(angle: f64, branch: Branch) -> BlochVector {
    let (s, co) = angle.sin_cos();
    let sign = match branch {
        Branch::Preparation => -1.0,
        Branch::Measurement => 1.0,
    };
    BlochVector::new(sign * s * co, sign * s * s, sign * co)
}
