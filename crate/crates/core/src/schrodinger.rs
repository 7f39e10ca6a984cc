//! Time-dependent Hamiltonians and the evolution operator `U(t, s)`.
//!
//! A [`Propagator`] caches the cumulative step products
//! `P_k = U(t_k, t_start)` and their exact inverses `Q_k = U(t_start, t_k)`,
//! built from per-step factors. Every query is routed through the start of
//! the interval, `U(t, s) = U(t, t_start)·U(t_start, s)`, so composition holds
//! to roundoff for any three times. Off-grid times take one fractional step
//! of the same scheme from the nearest node below.

use std::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{
    self, c, check_hbar, distance, expm_general_generator, expm_hermitian_generator_tol,
    hermiticity_defect, identity, sigma_x, sigma_y, sigma_z, ComplexOperator, StateVector, I,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HamiltonianFamily {
    Constant,
    PiecewiseConstant,
    TwoLevelDrive,
    Tabulated,
}

impl HamiltonianFamily {
    pub fn name(self) -> &'static str {
        match self {
            Self::Constant => "constant",
            Self::PiecewiseConstant => "piecewise_constant",
            Self::TwoLevelDrive => "two_level_drive",
            Self::Tabulated => "tabulated",
        }
    }
}

impl fmt::Display for HamiltonianFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One constant piece `[start, end)` of a piecewise-constant Hamiltonian.
/// The last segment is closed on the right.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub matrix: ComplexOperator,
}

#[derive(Debug, Clone, PartialEq)]
enum Profile {
    Constant(ComplexOperator),
    Piecewise(Vec<Segment>),
    /// `(Δ/2)σ_z + (Ω/2)(cos ωt σ_x + sin ωt σ_y)`
    TwoLevelDrive {
        detuning: f64,
        rabi: f64,
        frequency: f64,
    },
    /// Linear interpolation between `(time, matrix)` nodes.
    Tabulated(Vec<(f64, ComplexOperator)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeDependentHamiltonian {
    profile: Profile,
    dim: usize,
    hbar: f64,
    hermiticity_tol: f64,
    /// `i·ε` added to the first diagonal entry; negative controls only.
    non_hermitian_shift: Option<f64>,
}

fn finite_matrix(m: &ComplexOperator) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

fn check_square(m: &ComplexOperator, dim: usize) -> Result<()> {
    if !m.is_square() {
        return Err(Error::Dimension {
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    linalg::check_dim(dim, m.nrows())?;
    if !finite_matrix(m) {
        return Err(Error::InvalidArgument("matrix has non-finite entries".into()));
    }
    Ok(())
}

impl TimeDependentHamiltonian {
    fn from_profile(profile: Profile, dim: usize, hbar: f64) -> Result<Self> {
        check_hbar(hbar)?;
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        Ok(Self {
            profile,
            dim,
            hbar,
            hermiticity_tol: linalg::ToleranceConfig::default().hermiticity_tol,
            non_hermitian_shift: None,
        })
    }

    pub fn constant(matrix: ComplexOperator, hbar: f64) -> Result<Self> {
        let dim = matrix.nrows();
        check_square(&matrix, dim)?;
        Self::from_profile(Profile::Constant(matrix), dim, hbar)
    }

    pub fn zero(dim: usize, hbar: f64) -> Result<Self> {
        Self::constant(DMatrix::zeros(dim, dim), hbar)
    }

    pub fn piecewise_constant(segments: Vec<Segment>, hbar: f64) -> Result<Self> {
        let first = segments
            .first()
            .ok_or_else(|| Error::InvalidArgument("piecewise Hamiltonian needs a segment".into()))?;
        let dim = first.matrix.nrows();
        for (i, seg) in segments.iter().enumerate() {
            check_square(&seg.matrix, dim)?;
            if !(seg.start < seg.end) || !seg.start.is_finite() || !seg.end.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "segment {i} has empty or invalid interval [{}, {}]",
                    seg.start, seg.end
                )));
            }
            if i > 0 && segments[i - 1].end != seg.start {
                return Err(Error::InvalidArgument(format!(
                    "segment {i} starts at {} but the previous one ends at {}",
                    seg.start,
                    segments[i - 1].end
                )));
            }
        }
        Self::from_profile(Profile::Piecewise(segments), dim, hbar)
    }

    pub fn two_level_drive(detuning: f64, rabi: f64, frequency: f64, hbar: f64) -> Result<Self> {
        if ![detuning, rabi, frequency].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument("drive parameters must be finite".into()));
        }
        Self::from_profile(
            Profile::TwoLevelDrive {
                detuning,
                rabi,
                frequency,
            },
            2,
            hbar,
        )
    }

    /// Node matrices are not checked here; a non-Hermitian node is reported
    /// by [`eval`](Self::eval) when it is reached.
    pub fn tabulated(samples: Vec<(f64, ComplexOperator)>, hbar: f64) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InvalidArgument("tabulated Hamiltonian needs at least two nodes".into()));
        }
        let dim = samples[0].1.nrows();
        for (i, (t, m)) in samples.iter().enumerate() {
            check_square(m, dim)?;
            if !t.is_finite() || (i > 0 && !(samples[i - 1].0 < *t)) {
                return Err(Error::InvalidArgument("tabulation times must be strictly increasing".into()));
            }
        }
        Self::from_profile(Profile::Tabulated(samples), dim, hbar)
    }

    /// Adds `i·ε` to the first diagonal entry at every time and disables
    /// the hermiticity check. Exists to build negative controls.
    pub fn with_non_hermitian_shift(mut self, epsilon: f64) -> Self {
        self.non_hermitian_shift = Some(epsilon);
        self
    }

    pub fn with_hermiticity_tol(mut self, tol: f64) -> Self {
        self.hermiticity_tol = tol;
        self
    }

    pub fn family(&self) -> HamiltonianFamily {
        match self.profile {
            Profile::Constant(_) => HamiltonianFamily::Constant,
            Profile::Piecewise(_) => HamiltonianFamily::PiecewiseConstant,
            Profile::TwoLevelDrive { .. } => HamiltonianFamily::TwoLevelDrive,
            Profile::Tabulated(_) => HamiltonianFamily::Tabulated,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn is_corrupted(&self) -> bool {
        self.non_hermitian_shift.is_some()
    }

    /// Drive parameters `(Δ, Ω, ω)` for the two-level family.
    pub fn drive_parameters(&self) -> Option<(f64, f64, f64)> {
        match self.profile {
            Profile::TwoLevelDrive {
                detuning,
                rabi,
                frequency,
            } => Some((detuning, rabi, frequency)),
            _ => None,
        }
    }

    /// The constant matrix, for the constant family only.
    pub fn constant_matrix(&self) -> Option<&ComplexOperator> {
        match &self.profile {
            Profile::Constant(m) => Some(m),
            _ => None,
        }
    }

    pub fn domain(&self) -> (f64, f64) {
        match &self.profile {
            Profile::Constant(_) | Profile::TwoLevelDrive { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            Profile::Piecewise(segs) => (segs[0].start, segs[segs.len() - 1].end),
            Profile::Tabulated(nodes) => (nodes[0].0, nodes[nodes.len() - 1].0),
        }
    }

    pub fn check_domain(&self, t: f64) -> Result<()> {
        let (lo, hi) = self.domain();
        if t >= lo && t <= hi {
            Ok(())
        } else {
            Err(Error::Domain { value: t, lo, hi })
        }
    }

    fn segment_index(segs: &[Segment], t: f64) -> usize {
        // first segment whose end exceeds t; the last one is closed
        segs.partition_point(|s| s.end <= t).min(segs.len() - 1)
    }

    fn raw(&self, t: f64) -> ComplexOperator {
        match &self.profile {
            Profile::Constant(m) => m.clone(),
            Profile::Piecewise(segs) => segs[Self::segment_index(segs, t)].matrix.clone(),
            Profile::TwoLevelDrive {
                detuning,
                rabi,
                frequency,
            } => {
                let (s, co) = (frequency * t).sin_cos();
                sigma_z() * c(detuning / 2.0, 0.0)
                    + (sigma_x() * c(co, 0.0) + sigma_y() * c(s, 0.0)) * c(rabi / 2.0, 0.0)
            }
            Profile::Tabulated(nodes) => {
                let k = nodes.partition_point(|(tk, _)| *tk <= t).clamp(1, nodes.len() - 1);
                let (ta, a) = &nodes[k - 1];
                let (tb, b) = &nodes[k];
                let w = (t - ta) / (tb - ta);
                a * c(1.0 - w, 0.0) + b * c(w, 0.0)
            }
        }
    }

    /// `H(t)`, validated Hermitian unless the Hamiltonian is a deliberate
    /// negative control.
    pub fn eval(&self, t: f64) -> Result<ComplexOperator> {
        self.check_domain(t)?;
        let mut h = self.raw(t);
        match self.non_hermitian_shift {
            Some(eps) => h[(0, 0)] += c(0.0, eps),
            None => {
                let defect = hermiticity_defect(&h);
                if !(defect <= self.hermiticity_tol) {
                    return Err(Error::Hermiticity { defect });
                }
            }
        }
        Ok(h)
    }

    /// Breakpoints strictly inside `(a, b)`, for exact piecewise stepping.
    fn breakpoints_within(&self, a: f64, b: f64) -> Vec<f64> {
        match &self.profile {
            Profile::Piecewise(segs) => segs
                .iter()
                .map(|s| s.end)
                .filter(|&e| e > a.min(b) && e < a.max(b))
                .collect(),
            _ => Vec::new(),
        }
    }
}

/// `eval_hamiltonian` as a free function.
pub fn eval_hamiltonian(h: &TimeDependentHamiltonian, t: f64) -> Result<ComplexOperator> {
    h.eval(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// Exact exponentials of each constant piece.
    ExactConstant,
    /// `exp(−iΔt·H(t + Δt/2)/ħ)` per step.
    MagnusMidpoint,
    /// `(I + iΔtH/2ħ)⁻¹(I − iΔtH/2ħ)` with `H` at the step midpoint.
    CrankNicolson,
    /// `I − iΔtH(t)/ħ`. Not unitary; kept as a negative control.
    EulerUnstable,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Self::ExactConstant => "exact_constant",
            Self::MagnusMidpoint => "magnus_midpoint",
            Self::CrankNicolson => "crank_nicolson",
            Self::EulerUnstable => "euler_unstable",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "exact_constant" => Self::ExactConstant,
            "magnus_midpoint" => Self::MagnusMidpoint,
            "crank_nicolson" => Self::CrankNicolson,
            "euler_unstable" => Self::EulerUnstable,
            _ => return None,
        })
    }

    pub fn is_unitary(self) -> bool {
        !matches!(self, Self::EulerUnstable)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PropagatorMethod {
    pub scheme: Scheme,
    pub steps: usize,
}

impl PropagatorMethod {
    pub fn new(scheme: Scheme, steps: usize) -> Self {
        Self { scheme, steps }
    }
}

/// Cached evolution operator over `[t_start, t_end]`.
#[derive(Debug, Clone)]
pub struct Propagator {
    hamiltonian: TimeDependentHamiltonian,
    method: PropagatorMethod,
    t_start: f64,
    t_end: f64,
    step: f64,
    /// `U(t_k, t_start)`
    forward: Vec<ComplexOperator>,
    /// `U(t_start, t_k)`
    backward: Vec<ComplexOperator>,
}

/// Node snapping tolerance, in units of the step length.
const SNAP: f64 = 1e-10;

pub fn build_propagator(
    h: &TimeDependentHamiltonian,
    t0: f64,
    t1: f64,
    method: PropagatorMethod,
) -> Result<Propagator> {
    if method.steps == 0 {
        return Err(Error::InvalidArgument("steps must be at least 1".into()));
    }
    if !(t0 < t1) || !t0.is_finite() || !t1.is_finite() {
        return Err(Error::InvalidArgument(format!("empty interval [{t0}, {t1}]")));
    }
    h.check_domain(t0)?;
    h.check_domain(t1)?;
    if method.scheme == Scheme::ExactConstant
        && !matches!(
            h.family(),
            HamiltonianFamily::Constant | HamiltonianFamily::PiecewiseConstant
        )
    {
        return Err(Error::MethodMismatch {
            method: method.scheme.name(),
            family: h.family().name(),
        });
    }

    let n = method.steps;
    let step = (t1 - t0) / n as f64;
    let mut prop = Propagator {
        hamiltonian: h.clone(),
        method,
        t_start: t0,
        t_end: t1,
        step,
        forward: Vec::with_capacity(n + 1),
        backward: Vec::with_capacity(n + 1),
    };
    let dim = h.dim();
    prop.forward.push(identity(dim));
    prop.backward.push(identity(dim));
    for k in 0..n {
        let (a, b) = (prop.node(k), prop.node(k + 1));
        let (f, finv) = prop.step_pair(a, b)?;
        let next_fwd = &f * &prop.forward[k];
        let next_bwd = &prop.backward[k] * &finv;
        prop.forward.push(next_fwd);
        prop.backward.push(next_bwd);
    }
    Ok(prop)
}

impl Propagator {
    pub fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }

    pub fn hamiltonian(&self) -> &TimeDependentHamiltonian {
        &self.hamiltonian
    }

    pub fn method(&self) -> PropagatorMethod {
        self.method
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.t_start, self.t_end)
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn node(&self, k: usize) -> f64 {
        if k == self.method.steps {
            self.t_end
        } else {
            self.t_start + k as f64 * self.step
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.method.steps).map(|k| self.node(k))
    }

    fn check_domain(&self, t: f64) -> Result<()> {
        if t >= self.t_start && t <= self.t_end {
            Ok(())
        } else {
            Err(Error::Domain {
                value: t,
                lo: self.t_start,
                hi: self.t_end,
            })
        }
    }

    fn flow(&self, h: &ComplexOperator, tau: f64) -> Result<ComplexOperator> {
        if self.hamiltonian.is_corrupted() {
            expm_general_generator(h, tau, self.hamiltonian.hbar())
        } else {
            expm_hermitian_generator_tol(h, tau, self.hamiltonian.hbar(), self.hamiltonian.hermiticity_tol)
        }
    }

    /// Step factor over `[a, b]` and its exact inverse.
    fn step_pair(&self, a: f64, b: f64) -> Result<(ComplexOperator, ComplexOperator)> {
        let tau = b - a;
        let hbar = self.hamiltonian.hbar();
        let dim = self.dim();
        match self.method.scheme {
            Scheme::MagnusMidpoint => {
                let h = self.hamiltonian.eval(a + tau / 2.0)?;
                Ok((self.flow(&h, tau)?, self.flow(&h, -tau)?))
            }
            Scheme::CrankNicolson => {
                let h = self.hamiltonian.eval(a + tau / 2.0)?;
                let half = &h * c(0.0, tau / (2.0 * hbar));
                let plus = identity(dim) + &half;
                let minus = identity(dim) - &half;
                let solve = |lhs: &ComplexOperator, rhs: &ComplexOperator| {
                    lhs.clone()
                        .lu()
                        .solve(rhs)
                        .ok_or_else(|| Error::Numerical("singular Crank-Nicolson system".into()))
                };
                Ok((solve(&plus, &minus)?, solve(&minus, &plus)?))
            }
            Scheme::EulerUnstable => {
                let h = self.hamiltonian.eval(a)?;
                let f = identity(dim) - &h * c(0.0, tau / hbar);
                let finv = f
                    .clone()
                    .lu()
                    .try_inverse()
                    .ok_or_else(|| Error::Numerical("singular Euler step".into()))?;
                Ok((f, finv))
            }
            Scheme::ExactConstant => {
                let mut cuts = vec![a];
                cuts.extend(self.hamiltonian.breakpoints_within(a, b));
                cuts.push(b);
                let mut f = identity(dim);
                let mut finv = identity(dim);
                for w in cuts.windows(2) {
                    let h = self.hamiltonian.eval(w[0] + (w[1] - w[0]) / 2.0)?;
                    let dt = w[1] - w[0];
                    // later pieces act on the left
                    f = self.flow(&h, dt)? * f;
                    finv *= self.flow(&h, -dt)?;
                }
                Ok((f, finv))
            }
        }
    }

    /// Index of the node at or below `t`, and whether `t` sits on it.
    fn locate(&self, t: f64) -> (usize, bool) {
        let x = (t - self.t_start) / self.step;
        let k = x.round();
        if (x - k).abs() <= SNAP {
            return (k as usize, true);
        }
        ((x.floor() as usize).min(self.method.steps), false)
    }

    /// `U(t, t_start)` and `U(t_start, t)`.
    fn anchor(&self, t: f64) -> Result<(ComplexOperator, ComplexOperator)> {
        self.check_domain(t)?;
        let (k, on_node) = self.locate(t);
        if on_node {
            return Ok((self.forward[k].clone(), self.backward[k].clone()));
        }
        let (g, ginv) = self.step_pair(self.node(k), t)?;
        Ok((g * &self.forward[k], &self.backward[k] * ginv))
    }

    /// `U(t, s)`; the identity exactly when `t == s`.
    pub fn at(&self, t: f64, s: f64) -> Result<ComplexOperator> {
        self.check_domain(t)?;
        self.check_domain(s)?;
        if t == s {
            return Ok(identity(self.dim()));
        }
        let (ut, _) = self.anchor(t)?;
        let (_, us_inv) = self.anchor(s)?;
        Ok(ut * us_inv)
    }

    pub fn unitarity_defect_at(&self, t: f64, s: f64) -> Result<f64> {
        Ok(linalg::unitarity_defect(&self.at(t, s)?))
    }
}

pub fn evolve_state(u: &Propagator, psi0: &StateVector, t0: f64, t: f64) -> Result<StateVector> {
    linalg::check_dim(u.dim(), psi0.dim())?;
    linalg::apply(&u.at(t, t0)?, psi0)
}

/// `‖U(t3, t1) − U(t3, t2)·U(t2, t1)‖`.
pub fn composition_defect(u: &Propagator, t1: f64, t2: f64, t3: f64) -> Result<f64> {
    let direct = u.at(t3, t1)?;
    let composed = u.at(t3, t2)? * u.at(t2, t1)?;
    Ok(distance(&direct, &composed))
}

/// `iħ·(U(t+δ, t₀) − U(t−δ, t₀))/(2δ)·U(t₀, t)` with `t₀` the start of the
/// propagator's interval.
pub fn recover_hamiltonian(u: &Propagator, t: f64, delta: f64) -> Result<ComplexOperator> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::Domain {
            value: delta,
            lo: 0.0,
            hi: f64::INFINITY,
        });
    }
    let t0 = u.t_start;
    let ahead = u.at(t + delta, t0)?;
    let behind = u.at(t - delta, t0)?;
    let back = u.at(t0, t)?;
    let derivative = (ahead - behind) * c(1.0 / (2.0 * delta), 0.0);
    Ok(derivative * back * (I * u.hamiltonian.hbar()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseDefects {
    /// `‖U(s, t)·U(t, s) − I‖`
    pub inverse_defect: f64,
    /// `‖U(s, t)† − U(t, s)‖`
    pub adjoint_defect: f64,
}

pub fn inverse_identity_defect(u: &Propagator, s: f64, t: f64) -> Result<InverseDefects> {
    let ust = u.at(s, t)?;
    let uts = u.at(t, s)?;
    Ok(InverseDefects {
        inverse_defect: distance(&(&ust * &uts), &identity(u.dim())),
        adjoint_defect: distance(&ust.adjoint(), &uts),
    })
}
