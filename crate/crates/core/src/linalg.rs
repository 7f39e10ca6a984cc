//! Finite-dimensional complex Hilbert-space primitives.
//!
//! The inner product is conjugate-linear in its first argument. Defect
//! checks use the max-absolute-entry norm throughout, see [`max_abs`].

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Dense square complex matrix. Hamiltonians carry energy units, everything
/// else in this crate is dimensionless.
pub type ComplexOperator = DMatrix<C64>;

pub const I: C64 = C64::new(0.0, 1.0);

/// Iteration cap for the Hermitian eigensolver; non-finite input would
/// otherwise never converge.
const EIGEN_MAX_ITER: usize = 10_000;

/// Tolerances used by the checking layers, all quoted against the
/// max-entry norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToleranceConfig {
    pub hermiticity_tol: f64,
    pub unitarity_tol: f64,
    pub equality_tol: f64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        Self {
            hermiticity_tol: 1e-10,
            unitarity_tol: 1e-10,
            equality_tol: 1e-9,
        }
    }
}

impl ToleranceConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("hermiticity_tol", self.hermiticity_tol),
            ("unitarity_tol", self.unitarity_tol),
            ("equality_tol", self.equality_tol),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// A point of the typical fibre: `n` complex probability amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector(DVector<C64>);

impl StateVector {
    pub fn new(amplitudes: Vec<C64>) -> Self {
        Self(DVector::from_vec(amplitudes))
    }

    pub fn from_dvector(v: DVector<C64>) -> Self {
        Self(v)
    }

    pub fn zeros(dim: usize) -> Self {
        Self(DVector::zeros(dim))
    }

    /// Unit vector along the `k`-th basis direction.
    pub fn basis(dim: usize, k: usize) -> Self {
        let mut v = DVector::zeros(dim);
        v[k] = C64::new(1.0, 0.0);
        Self(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.0
    }

    pub fn into_inner(self) -> DVector<C64> {
        self.0
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn scaled(&self, c: C64) -> Self {
        Self(&self.0 * c)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|a| a.re.is_finite() && a.im.is_finite())
    }
}

impl std::ops::Index<usize> for StateVector {
    type Output = C64;
    fn index(&self, i: usize) -> &C64 {
        &self.0[i]
    }
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Dimension { expected, found })
    }
}

/// `⟨u|v⟩ = Σ conj(uᵢ)·vᵢ`.
pub fn inner(u: &StateVector, v: &StateVector) -> Result<C64> {
    check_dim(u.dim(), v.dim())?;
    Ok(u.0.dotc(&v.0))
}

pub fn dagger(a: &ComplexOperator) -> ComplexOperator {
    a.adjoint()
}

pub fn identity(n: usize) -> ComplexOperator {
    DMatrix::identity(n, n)
}

/// Max absolute entry.
pub fn max_abs(a: &ComplexOperator) -> f64 {
    a.iter().fold(0.0_f64, |m, z| m.max(z.norm()))
}

pub fn max_abs_vec(v: &DVector<C64>) -> f64 {
    v.iter().fold(0.0_f64, |m, z| m.max(z.norm()))
}

/// `‖A − B‖` in the max-entry norm; infinite on shape mismatch.
pub fn distance(a: &ComplexOperator, b: &ComplexOperator) -> f64 {
    if a.shape() != b.shape() {
        return f64::INFINITY;
    }
    a.iter()
        .zip(b.iter())
        .fold(0.0_f64, |m, (x, y)| m.max((x - y).norm()))
}

pub fn hermiticity_defect(a: &ComplexOperator) -> f64 {
    if !a.is_square() {
        return f64::INFINITY;
    }
    distance(a, &a.adjoint())
}

pub fn unitarity_defect(a: &ComplexOperator) -> f64 {
    if !a.is_square() {
        return f64::INFINITY;
    }
    distance(&(a.adjoint() * a), &identity(a.nrows()))
}

pub fn is_hermitian(a: &ComplexOperator, tol: f64) -> bool {
    hermiticity_defect(a) <= tol
}

pub fn is_unitary(a: &ComplexOperator, tol: f64) -> bool {
    unitarity_defect(a) <= tol
}

pub fn apply(a: &ComplexOperator, psi: &StateVector) -> Result<StateVector> {
    check_dim(a.ncols(), psi.dim())?;
    Ok(StateVector(a * &psi.0))
}

pub(crate) fn check_hbar(hbar: f64) -> Result<()> {
    if hbar > 0.0 && hbar.is_finite() {
        Ok(())
    } else {
        Err(Error::Units { hbar })
    }
}

/// `exp(−i·θ·H/ħ)` for Hermitian `H`, via `H = V·diag(λ)·V†`.
///
/// Rejects `H` whose hermiticity defect exceeds the default tolerance.
pub fn expm_hermitian_generator(h: &ComplexOperator, theta: f64, hbar: f64) -> Result<ComplexOperator> {
    expm_hermitian_generator_tol(h, theta, hbar, ToleranceConfig::default().hermiticity_tol)
}

pub fn expm_hermitian_generator_tol(
    h: &ComplexOperator,
    theta: f64,
    hbar: f64,
    hermiticity_tol: f64,
) -> Result<ComplexOperator> {
    check_hbar(hbar)?;
    if !h.is_square() {
        return Err(Error::Dimension {
            expected: h.nrows(),
            found: h.ncols(),
        });
    }
    let defect = hermiticity_defect(h);
    if !(defect <= hermiticity_tol) {
        return Err(Error::Hermiticity { defect });
    }
    if !theta.is_finite() {
        return Err(Error::Numerical(format!("non-finite evolution parameter {theta}")));
    }
    // exact Hermitian part; the eigensolver only reads one triangle
    let sym = (h + h.adjoint()) * C64::new(0.5, 0.0);
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, EIGEN_MAX_ITER)
        .ok_or_else(|| Error::Numerical("Hermitian eigensolver did not converge".into()))?;
    let v = &eig.eigenvectors;
    let phases = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues
            .iter()
            .map(|&lambda| C64::from_polar(1.0, -theta * lambda / hbar)),
    );
    let mut scaled = v.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= phases[j];
    }
    Ok(scaled * v.adjoint())
}

/// `exp(−i·θ·G/ħ)` for an arbitrary square generator (Padé with scaling
/// and squaring). Used only for deliberately non-Hermitian generators.
pub fn expm_general_generator(g: &ComplexOperator, theta: f64, hbar: f64) -> Result<ComplexOperator> {
    check_hbar(hbar)?;
    if !g.iter().all(|z| z.re.is_finite() && z.im.is_finite()) || !theta.is_finite() {
        return Err(Error::Numerical("non-finite generator".into()));
    }
    let a = g * C64::new(0.0, -theta / hbar);
    Ok(a.exp())
}

/// `⟨ψ|A|ψ⟩ / ⟨ψ|ψ⟩`.
pub fn expectation(a: &ComplexOperator, psi: &StateVector) -> Result<C64> {
    expectation_tol(a, psi, ToleranceConfig::default().equality_tol)
}

pub fn expectation_tol(a: &ComplexOperator, psi: &StateVector, zero_tol: f64) -> Result<C64> {
    check_dim(a.ncols(), psi.dim())?;
    let norm_sq = psi.norm_sq();
    if !(norm_sq > zero_tol) {
        return Err(Error::ZeroNorm);
    }
    Ok(psi.0.dotc(&(a * &psi.0)) / norm_sq)
}

/// Ratio of extreme singular values; infinite for singular input.
pub fn condition_number(a: &ComplexOperator) -> f64 {
    if !a.is_square() || a.nrows() == 0 {
        return f64::INFINITY;
    }
    if !a.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return f64::INFINITY;
    }
    let sv = a.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

/// Frames with a condition number above this are treated as singular.
pub const SINGULAR_CONDITION: f64 = 1e12;

/// LU inverse, refusing numerically singular matrices.
pub fn inverse(a: &ComplexOperator) -> Result<ComplexOperator> {
    let condition = condition_number(a);
    if !(condition <= SINGULAR_CONDITION) {
        return Err(Error::SingularFrame {
            parameter: None,
            condition,
        });
    }
    a.clone().lu().try_inverse().ok_or(Error::SingularFrame {
        parameter: None,
        condition,
    })
}

pub fn sigma_x() -> ComplexOperator {
    DMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)])
}

pub fn sigma_y() -> ComplexOperator {
    DMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)])
}

pub fn sigma_z() -> ComplexOperator {
    DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)])
}

/// Spin-`j` angular momentum matrices `(Jx, Jy, Jz)` with `2j + 1 = dim`.
/// For `dim = 2` these are `σ/2`.
pub fn spin_matrices(dim: usize) -> [ComplexOperator; 3] {
    let j = (dim as f64 - 1.0) / 2.0;
    let mut jz = DMatrix::zeros(dim, dim);
    let mut jp = DMatrix::<C64>::zeros(dim, dim);
    for k in 0..dim {
        let m = j - k as f64;
        jz[(k, k)] = c(m, 0.0);
        if k > 0 {
            // ⟨m+1|J+|m⟩
            jp[(k - 1, k)] = c((j * (j + 1.0) - m * (m + 1.0)).sqrt(), 0.0);
        }
    }
    let jm = jp.adjoint();
    let jx = (&jp + &jm) * c(0.5, 0.0);
    let jy = (&jp - &jm) * c(0.0, -0.5);
    [jx, jy, jz]
}

#[inline]
pub(crate) fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}
