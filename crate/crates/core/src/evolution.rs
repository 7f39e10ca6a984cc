//! The evolution transport `𝔘_γ(t, s) = l_{γ(t)}⁻¹ ∘ U(t, s) ∘ l_{γ(s)}` and
//! state liftings along observer paths.
//!
//! `𝔘_γ(t, s)` maps the fibre over `γ(s)` to the fibre over `γ(t)`, so as a
//! transport law it is `L^γ_{s→t} = 𝔘_γ(t, s)`. That re-indexing happens in
//! exactly one place, the [`TransportLaw`] impl below.

use std::sync::Arc;

use crate::bundle::{fibre_inner, same_point, to_fibre, BasePath, FibreVector, Point, Trivialization};
use crate::error::{Error, Result};
use crate::linalg::{self, distance, identity, inverse, ComplexOperator, StateVector, C64};
use crate::report::DefectRecord;
use crate::schrodinger::{build_propagator, Propagator, PropagatorMethod, TimeDependentHamiltonian};
use crate::transport::{transport_dagger, LawKind, Sampler, TransportLaw};

#[derive(Debug, Clone)]
pub struct EvolutionTransport {
    propagator: Arc<Propagator>,
    trivialization: Trivialization,
}

/// Builds the propagator over the path's parameter interval and wraps it.
pub fn evolution_transport(
    h: &TimeDependentHamiltonian,
    path: &BasePath,
    triv: &Trivialization,
    method: PropagatorMethod,
) -> Result<EvolutionTransport> {
    linalg::check_dim(h.dim(), triv.dim())?;
    linalg::check_dim(path.base_dim(), triv.base_dim())?;
    let (a, b) = path.domain();
    let propagator = build_propagator(h, a, b, method)?;
    Ok(EvolutionTransport {
        propagator: Arc::new(propagator),
        trivialization: triv.clone(),
    })
}

impl EvolutionTransport {
    pub fn from_parts(propagator: Arc<Propagator>, trivialization: Trivialization) -> Result<Self> {
        linalg::check_dim(propagator.dim(), trivialization.dim())?;
        Ok(Self {
            propagator,
            trivialization,
        })
    }

    pub fn propagator(&self) -> &Propagator {
        &self.propagator
    }

    pub fn trivialization(&self) -> &Trivialization {
        &self.trivialization
    }

    /// `𝔘_γ(t, s)`.
    pub fn bundle_operator(&self, path: &BasePath, t: f64, s: f64) -> Result<ComplexOperator> {
        let u = self.propagator.at(t, s)?;
        if t == s {
            return Ok(identity(self.dim()));
        }
        let l_target_inv = self.trivialization.inverse_at(&path.at(t)?)?;
        let l_source = self.trivialization.at(&path.at(s)?)?;
        Ok(l_target_inv * u * l_source)
    }

    /// `l_{γ(t)} ∘ 𝔘_γ(t, s) ∘ l_{γ(s)}⁻¹`, which should reproduce `U(t, s)`.
    pub fn back_to_hilbert_space(&self, path: &BasePath, t: f64, s: f64) -> Result<ComplexOperator> {
        let bundle = self.bundle_operator(path, t, s)?;
        let l_target = self.trivialization.at(&path.at(t)?)?;
        let l_source_inv = self.trivialization.inverse_at(&path.at(s)?)?;
        Ok(l_target * bundle * l_source_inv)
    }
}

impl TransportLaw for EvolutionTransport {
    fn dim(&self) -> usize {
        self.propagator.dim()
    }

    fn kind(&self) -> LawKind {
        LawKind::Evolution
    }

    fn label(&self) -> String {
        let h = self.propagator.hamiltonian();
        format!(
            "evolution[{}{},{},{}]",
            h.family(),
            if h.is_corrupted() { "+non_hermitian" } else { "" },
            self.trivialization,
            self.propagator.method().scheme.name()
        )
    }

    fn transport(&self, path: &BasePath, s: f64, t: f64) -> Result<ComplexOperator> {
        self.bundle_operator(path, t, s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LiftOptions {
    /// Also compute every sample by transporting the initial fibre vector
    /// and record the worst disagreement with the direct route.
    pub verify_routes: bool,
}

impl Default for LiftOptions {
    fn default() -> Self {
        Self {
            verify_routes: cfg!(debug_assertions),
        }
    }
}

/// The fibre-valued trajectory `Ψ_γ(t) = l_{γ(t)}⁻¹ ψ(t)`.
#[derive(Debug, Clone)]
pub struct PathLifting {
    path: BasePath,
    transport: EvolutionTransport,
    t0: f64,
    initial: StateVector,
    samples: Vec<(f64, FibreVector)>,
    route_defect: Option<f64>,
}

impl PathLifting {
    pub fn path(&self) -> &BasePath {
        &self.path
    }

    pub fn transport(&self) -> &EvolutionTransport {
        &self.transport
    }

    pub fn initial_time(&self) -> f64 {
        self.t0
    }

    /// Values on the path grid.
    pub fn samples(&self) -> &[(f64, FibreVector)] {
        &self.samples
    }

    /// Worst two-route disagreement, when verification was requested.
    pub fn route_defect(&self) -> Option<f64> {
        self.route_defect
    }

    /// `ψ(t) = U(t, t₀) ψ₀` in the typical fibre.
    pub fn state_at(&self, t: f64) -> Result<StateVector> {
        linalg::apply(&self.transport.propagator.at(t, self.t0)?, &self.initial)
    }

    /// `Ψ_γ(t)`, evolving in the typical fibre and then pulling back.
    pub fn at(&self, t: f64) -> Result<FibreVector> {
        to_fibre(&self.transport.trivialization, &self.path.at(t)?, &self.state_at(t)?)
    }

    /// `Ψ_γ(t)` by transporting `Ψ_γ(t₀)` along the path.
    pub fn transported_at(&self, t: f64) -> Result<FibreVector> {
        let start = to_fibre(&self.transport.trivialization, &self.path.at(self.t0)?, &self.initial)?;
        let u = self.transport.bundle_operator(&self.path, t, self.t0)?;
        Ok(FibreVector {
            base_point: self.path.at(t)?,
            components: u * start.components,
        })
    }
}

pub fn lift_state(
    psi0: &StateVector,
    t0: f64,
    h: &TimeDependentHamiltonian,
    path: &BasePath,
    triv: &Trivialization,
    method: PropagatorMethod,
    options: LiftOptions,
) -> Result<PathLifting> {
    let transport = evolution_transport(h, path, triv, method)?;
    lift_with(&transport, psi0, t0, path, options)
}

/// Lifts `ψ₀` given at `t₀` along `path` with an existing transport.
pub fn lift_with(
    transport: &EvolutionTransport,
    psi0: &StateVector,
    t0: f64,
    path: &BasePath,
    options: LiftOptions,
) -> Result<PathLifting> {
    linalg::check_dim(transport.dim(), psi0.dim())?;
    if !path.contains(t0) {
        let (lo, hi) = path.domain();
        return Err(Error::Domain { value: t0, lo, hi });
    }
    let mut lifting = PathLifting {
        path: path.clone(),
        transport: transport.clone(),
        t0,
        initial: psi0.clone(),
        samples: Vec::with_capacity(path.grid().len()),
        route_defect: None,
    };
    let mut worst = 0.0_f64;
    for &t in path.grid() {
        let value = lifting.at(t)?;
        if options.verify_routes {
            let other = lifting.transported_at(t)?;
            let d = linalg::max_abs_vec(&(&value.components - &other.components));
            worst = worst.max(if d.is_nan() { f64::INFINITY } else { d });
        }
        lifting.samples.push((t, value));
    }
    if options.verify_routes {
        lifting.route_defect = Some(worst);
    }
    Ok(lifting)
}

/// All lifting values sitting over `x`.
///
/// Grid times with `|γ(t) − x| ≤ tol` are grouped into runs of consecutive
/// grid indices, and each run contributes the time closest to `x`. An
/// empty result means `x` is off the path; two or more mean the path passes
/// through `x` more than once. Resolution is limited by the grid.
pub fn section_values_at(lifting: &PathLifting, x: &Point, tol: f64) -> Result<Vec<(f64, FibreVector)>> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    linalg::check_dim(lifting.path.base_dim(), x.len())?;
    let mut out = Vec::new();
    let mut best: Option<(f64, usize)> = None;
    for (i, (_, value)) in lifting.samples.iter().enumerate() {
        let dist = (&value.base_point - x).norm();
        if dist <= tol {
            if best.is_none_or(|(d, _)| dist < d) {
                best = Some((dist, i));
            }
        } else if let Some((_, j)) = best.take() {
            out.push(lifting.samples[j].clone());
        }
    }
    if let Some((_, j)) = best {
        out.push(lifting.samples[j].clone());
    }
    Ok(out)
}

/// `x ↦ l_x⁻¹ φ`.
#[derive(Debug, Clone)]
pub struct GlobalSection {
    generator: StateVector,
    trivialization: Trivialization,
}

pub fn global_section(phi: &StateVector, triv: &Trivialization) -> Result<GlobalSection> {
    linalg::check_dim(triv.dim(), phi.dim())?;
    if !phi.is_finite() {
        return Err(Error::InvalidArgument("section generator must be finite".into()));
    }
    Ok(GlobalSection {
        generator: phi.clone(),
        trivialization: triv.clone(),
    })
}

impl GlobalSection {
    pub fn generator(&self) -> &StateVector {
        &self.generator
    }

    pub fn at(&self, x: &Point) -> Result<FibreVector> {
        to_fibre(&self.trivialization, x, &self.generator)
    }
}

pub mod property {
    pub const COMPOSITION: &str = "composition";
    pub const IDENTITY: &str = "identity";
    pub const INVERSE: &str = "inverse";
    pub const CONJUGATE_FORMULA: &str = "conjugate_formula";
    pub const HERMITIAN_UNITARY_IDENTITY: &str = "hermitian_unitary_identity";
    pub const PICTURE_ROUND_TRIP: &str = "picture_round_trip";
}

fn defect_or_inf(r: Result<f64>) -> f64 {
    match r {
        Ok(d) if !d.is_nan() => d,
        _ => f64::INFINITY,
    }
}

/// Sampled defects of the evolution-transport identities:
///
/// * composition `𝔘(t₃, t₁) = 𝔘(t₃, t₂) ∘ 𝔘(t₂, t₁)`,
/// * identity `𝔘(t, t) = id`,
/// * inverse `𝔘(t, s)⁻¹ = 𝔘(s, t)`,
/// * the conjugate computed through the trivialization equals
///   `l_{γ(t)}⁻¹ ∘ U(s, t)† ∘ l_{γ(s)}`,
/// * `𝔘‡(t, s) = 𝔘(t, s) = 𝔘(s, t)⁻¹`,
/// * `l_{γ(t)} ∘ 𝔘(t, s) ∘ l_{γ(s)}⁻¹ = U(t, s)`.
pub fn transport_property_report(
    transport: &EvolutionTransport,
    path: &BasePath,
    triv: &Trivialization,
    samples: usize,
    seed: u64,
    tolerance: f64,
) -> Vec<DefectRecord> {
    let mut rng = Sampler::new(seed);
    let id = identity(transport.dim());
    let mut worst = [0.0_f64; 6];
    for _ in 0..samples {
        let (t1, t2, t3) = (rng.grid_time(path), rng.grid_time(path), rng.grid_time(path));
        let (s, t) = (t1, t3);
        worst[0] = worst[0].max(defect_or_inf((|| {
            let composed = transport.bundle_operator(path, t3, t2)? * transport.bundle_operator(path, t2, t1)?;
            Ok(distance(&composed, &transport.bundle_operator(path, t3, t1)?))
        })()));
        worst[1] = worst[1].max(defect_or_inf(
            transport.bundle_operator(path, t2, t2).map(|m| distance(&m, &id)),
        ));
        worst[2] = worst[2].max(defect_or_inf((|| {
            let inv = inverse(&transport.bundle_operator(path, t, s)?)?;
            Ok(distance(&inv, &transport.bundle_operator(path, s, t)?))
        })()));
        let conj = transport_dagger(transport, path, triv, s, t);
        worst[3] = worst[3].max(defect_or_inf((|| {
            let conj = conj.as_ref().map_err(|e| Error::Numerical(e.to_string()))?;
            let u_rev = transport.propagator.at(s, t)?;
            let formula = triv.inverse_at(&path.at(t)?)? * u_rev.adjoint() * triv.at(&path.at(s)?)?;
            Ok(distance(conj, &formula))
        })()));
        worst[4] = worst[4].max(defect_or_inf((|| {
            let conj = conj.as_ref().map_err(|e| Error::Numerical(e.to_string()))?;
            let forward = transport.bundle_operator(path, t, s)?;
            let reverse_inv = inverse(&transport.bundle_operator(path, s, t)?)?;
            Ok(distance(conj, &forward).max(distance(&forward, &reverse_inv)))
        })()));
        worst[5] = worst[5].max(defect_or_inf((|| {
            let back = transport.back_to_hilbert_space(path, t, s)?;
            Ok(distance(&back, &transport.propagator.at(t, s)?))
        })()));
    }
    let label = transport.label();
    [
        property::COMPOSITION,
        property::IDENTITY,
        property::INVERSE,
        property::CONJUGATE_FORMULA,
        property::HERMITIAN_UNITARY_IDENTITY,
        property::PICTURE_ROUND_TRIP,
    ]
    .iter()
    .zip(worst)
    .map(|(name, d)| DefectRecord::new(&label, *name, d, tolerance))
    .collect()
}

/// Expectation of the fibre morphism `l_x⁻¹ ∘ A ∘ l_x` at `x = γ(t)`,
/// evaluated with the fibre inner product.
pub fn bundle_expectation(
    a: &ComplexOperator,
    lifting: &PathLifting,
    t: f64,
    triv: &Trivialization,
) -> Result<C64> {
    linalg::check_dim(triv.dim(), a.nrows())?;
    let phi = lifting.at(t)?;
    let x = phi.base_point.clone();
    let morphism = triv.inverse_at(&x)? * a * triv.at(&x)?;
    let a_phi = FibreVector {
        base_point: x.clone(),
        components: morphism * &phi.components,
    };
    let norm_sq = fibre_inner(triv, &x, &phi, &phi)?;
    if !(norm_sq.re > linalg::ToleranceConfig::default().equality_tol) {
        return Err(Error::ZeroNorm);
    }
    Ok(fibre_inner(triv, &x, &phi, &a_phi)? / norm_sq)
}

/// Base point of each lifting sample against `γ(t)`; zero when the lifting
/// condition holds exactly.
pub fn lifting_condition_defect(lifting: &PathLifting) -> Result<f64> {
    let mut worst = 0.0_f64;
    for (t, v) in &lifting.samples {
        let p = lifting.path.at(*t)?;
        if !same_point(&p, &v.base_point) {
            worst = worst.max((&p - &v.base_point).amax());
        }
    }
    Ok(worst)
}
