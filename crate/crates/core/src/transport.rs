//! Linear transports along paths.
//!
//! A law is represented extensionally: it evaluates the matrix of
//! `L^γ_{s→t}: ℋ_{γ(s)} → ℋ_{γ(t)}` in the fibre frames. The axioms
//!
//! * composition `L_{s→t} ∘ L_{r→s} = L_{r→t}`,
//! * identity `L_{s→s} = id`,
//! * linearity,
//!
//! are checked by seeded sampling on the path grid, as is the consequence
//! `L_{t→s} ∘ L_{s→t} = id`.

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::bundle::{conjugate_between, fibre_inner, flat_transport, BasePath, FibreVector, Trivialization};
use crate::error::{Error, Result};
use crate::linalg::{self, c, condition_number, distance, identity, max_abs_vec, ComplexOperator, C64};
use crate::report::DefectRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LawKind {
    FrameFactored,
    Flat,
    Evolution,
    Custom,
}

impl fmt::Display for LawKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::FrameFactored => "frame_factored",
            Self::Flat => "flat",
            Self::Evolution => "evolution",
            Self::Custom => "custom",
        })
    }
}

pub trait TransportLaw: Send + Sync {
    fn dim(&self) -> usize;

    fn kind(&self) -> LawKind;

    /// Identifier used in reports.
    fn label(&self) -> String;

    /// Matrix of `L^γ_{s→t}`.
    fn transport(&self, path: &BasePath, s: f64, t: f64) -> Result<ComplexOperator>;
}

type FrameFn = dyn Fn(&BasePath, f64) -> Result<ComplexOperator> + Send + Sync;

/// Invertible maps `F(s; γ): ℋ_{γ(s)} → V`.
#[derive(Clone)]
pub struct FrameFamily {
    dim: usize,
    eval: Arc<FrameFn>,
}

impl fmt::Debug for FrameFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FrameFamily").field("dim", &self.dim).finish_non_exhaustive()
    }
}

impl FrameFamily {
    pub fn new<F>(dim: usize, eval: F) -> Self
    where
        F: Fn(&BasePath, f64) -> Result<ComplexOperator> + Send + Sync + 'static,
    {
        Self {
            dim,
            eval: Arc::new(eval),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn at(&self, path: &BasePath, s: f64) -> Result<ComplexOperator> {
        let f = (self.eval)(path, s)?;
        linalg::check_dim(self.dim, f.nrows())?;
        linalg::check_dim(self.dim, f.ncols())?;
        Ok(f)
    }

    fn inverse_at(&self, path: &BasePath, s: f64) -> Result<ComplexOperator> {
        linalg::inverse(&self.at(path, s)?).map_err(|e| match e {
            Error::SingularFrame { condition, .. } => Error::SingularFrame {
                parameter: Some(s),
                condition,
            },
            e => e,
        })
    }
}

/// `L_{s→t} = F(t)⁻¹ ∘ F(s)`.
#[derive(Debug, Clone)]
pub struct FrameTransport {
    frames: FrameFamily,
    label: String,
}

impl FrameTransport {
    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn frames(&self) -> &FrameFamily {
        &self.frames
    }
}

impl TransportLaw for FrameTransport {
    fn dim(&self) -> usize {
        self.frames.dim
    }

    fn kind(&self) -> LawKind {
        LawKind::FrameFactored
    }

    fn label(&self) -> String {
        self.label.clone()
    }

    fn transport(&self, path: &BasePath, s: f64, t: f64) -> Result<ComplexOperator> {
        Ok(self.frames.inverse_at(path, t)? * self.frames.at(path, s)?)
    }
}

/// Builds the frame-factored law, first checking that every frame on the
/// path grid is invertible.
pub fn transport_from_frames(frames: FrameFamily, path: &BasePath) -> Result<FrameTransport> {
    for &s in path.grid() {
        let condition = condition_number(&frames.at(path, s)?);
        if !(condition <= linalg::SINGULAR_CONDITION) {
            return Err(Error::SingularFrame {
                parameter: Some(s),
                condition,
            });
        }
    }
    Ok(FrameTransport {
        frames,
        label: "frames".into(),
    })
}

/// `F(s) = L_{s→s₀}`, anchoring the frames in the fibre over `γ(s₀)`.
pub fn frames_from_transport(law: Arc<dyn TransportLaw>, path: &BasePath, s0: f64) -> Result<FrameFamily> {
    if !path.contains(s0) {
        let (lo, hi) = path.domain();
        return Err(Error::Domain { value: s0, lo, hi });
    }
    let dim = law.dim();
    Ok(FrameFamily::new(dim, move |p, s| law.transport(p, s, s0)))
}

/// `F⋆(s) = D ∘ F(s)` for a fixed invertible `D`.
pub fn gauge_transform(frames: &FrameFamily, d: &ComplexOperator) -> Result<FrameFamily> {
    linalg::check_dim(frames.dim, d.nrows())?;
    let condition = condition_number(d);
    if !(condition <= linalg::SINGULAR_CONDITION) {
        return Err(Error::SingularFrame {
            parameter: None,
            condition,
        });
    }
    let inner = frames.clone();
    let d = d.clone();
    Ok(FrameFamily::new(frames.dim, move |p, s| Ok(&d * inner.at(p, s)?)))
}

/// `l_{γ(s)→γ(t)}` for a trivialization.
#[derive(Debug, Clone)]
pub struct FlatLaw {
    trivialization: Trivialization,
}

impl FlatLaw {
    pub fn new(trivialization: Trivialization) -> Self {
        Self { trivialization }
    }
}

impl TransportLaw for FlatLaw {
    fn dim(&self) -> usize {
        self.trivialization.dim()
    }

    fn kind(&self) -> LawKind {
        LawKind::Flat
    }

    fn label(&self) -> String {
        format!("flat[{}]", self.trivialization)
    }

    fn transport(&self, path: &BasePath, s: f64, t: f64) -> Result<ComplexOperator> {
        Ok(flat_transport(&self.trivialization, &path.at(s)?, &path.at(t)?)?.matrix)
    }
}

type LawFn = dyn Fn(&BasePath, f64, f64) -> Result<ComplexOperator> + Send + Sync;

/// Arbitrary evaluator, mostly for negative controls.
#[derive(Clone)]
pub struct CustomLaw {
    dim: usize,
    label: String,
    eval: Arc<LawFn>,
}

impl CustomLaw {
    pub fn new<F>(dim: usize, label: impl Into<String>, eval: F) -> Self
    where
        F: Fn(&BasePath, f64, f64) -> Result<ComplexOperator> + Send + Sync + 'static,
    {
        Self {
            dim,
            label: label.into(),
            eval: Arc::new(eval),
        }
    }
}

impl TransportLaw for CustomLaw {
    fn dim(&self) -> usize {
        self.dim
    }

    fn kind(&self) -> LawKind {
        LawKind::Custom
    }

    fn label(&self) -> String {
        self.label.clone()
    }

    fn transport(&self, path: &BasePath, s: f64, t: f64) -> Result<ComplexOperator> {
        (self.eval)(path, s, t)
    }
}

pub mod property {
    pub const IDENTITY: &str = "identity";
    pub const COMPOSITION: &str = "composition";
    pub const LINEARITY: &str = "linearity";
    pub const INVERSION: &str = "inversion";
    pub const HERMITIAN: &str = "hermitian";
    pub const UNITARY: &str = "unitary";
    pub const ISOMETRY: &str = "isometry";
}

/// Deterministic sampler for parameters and test vectors.
pub(crate) struct Sampler {
    rng: ChaCha8Rng,
}

impl Sampler {
    pub(crate) fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub(crate) fn grid_time(&mut self, path: &BasePath) -> f64 {
        let g = path.grid();
        g[self.rng.random_range(0..g.len())]
    }

    pub(crate) fn complex(&mut self) -> C64 {
        let re: f64 = StandardNormal.sample(&mut self.rng);
        let im: f64 = StandardNormal.sample(&mut self.rng);
        c(re, im)
    }

    pub(crate) fn vector(&mut self, dim: usize) -> DVector<C64> {
        DVector::from_fn(dim, |_, _| self.complex())
    }
}

fn defect_or_inf(r: Result<f64>) -> f64 {
    match r {
        Ok(d) if !d.is_nan() => d,
        _ => f64::INFINITY,
    }
}

/// Max sampled defects of the transport axioms and of inversion.
pub fn check_axioms(
    law: &dyn TransportLaw,
    path: &BasePath,
    samples: usize,
    seed: u64,
    tolerance: f64,
) -> Vec<DefectRecord> {
    let mut rng = Sampler::new(seed);
    let n = law.dim();
    let id = identity(n);
    let (mut ident, mut comp, mut lin, mut inv) = (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
    for _ in 0..samples {
        let (r, s, t) = (rng.grid_time(path), rng.grid_time(path), rng.grid_time(path));
        ident = ident.max(defect_or_inf(
            law.transport(path, s, s).map(|m| distance(&m, &id)),
        ));
        comp = comp.max(defect_or_inf((|| {
            let composed = law.transport(path, s, t)? * law.transport(path, r, s)?;
            Ok(distance(&composed, &law.transport(path, r, t)?))
        })()));
        inv = inv.max(defect_or_inf((|| {
            let round = law.transport(path, t, s)? * law.transport(path, s, t)?;
            Ok(distance(&round, &id))
        })()));
        let (lambda, mu) = (rng.complex(), rng.complex());
        let (u, v) = (rng.vector(n), rng.vector(n));
        lin = lin.max(defect_or_inf(law.transport(path, s, t).map(|m| {
            let lhs = &m * (&u * lambda + &v * mu);
            let rhs = (&m * &u) * lambda + (&m * &v) * mu;
            max_abs_vec(&(lhs - rhs))
        })));
    }
    let label = law.label();
    vec![
        DefectRecord::new(&label, property::IDENTITY, ident, tolerance),
        DefectRecord::new(&label, property::COMPOSITION, comp, tolerance),
        DefectRecord::new(&label, property::LINEARITY, lin, tolerance),
        DefectRecord::new(&label, property::INVERSION, inv, tolerance),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredicateOutcome {
    pub holds: bool,
    pub defect: f64,
    /// `|⟨LΦ|LΨ⟩_t − ⟨Φ|Ψ⟩_s|` over random pairs, for the unitarity check.
    pub isometry_defect: Option<f64>,
}

/// `(L_{s→t})‡`, built from `L_{t→s}` through the trivialization.
pub fn transport_dagger(
    law: &dyn TransportLaw,
    path: &BasePath,
    triv: &Trivialization,
    s: f64,
    t: f64,
) -> Result<ComplexOperator> {
    let (x, y) = (path.at(s)?, path.at(t)?);
    let reverse = law.transport(path, t, s)?;
    conjugate_between(triv, &y, &x, &reverse)
}

/// Max over sampled grid pairs of `‖(L_{s→t})‡ − L_{s→t}‖`.
pub fn is_hermitian_transport(
    law: &dyn TransportLaw,
    path: &BasePath,
    triv: &Trivialization,
    samples: usize,
    seed: u64,
    tolerance: f64,
) -> PredicateOutcome {
    let mut rng = Sampler::new(seed);
    let mut worst = 0.0_f64;
    for _ in 0..samples {
        let (s, t) = (rng.grid_time(path), rng.grid_time(path));
        worst = worst.max(defect_or_inf((|| {
            let conj = transport_dagger(law, path, triv, s, t)?;
            Ok(distance(&conj, &law.transport(path, s, t)?))
        })()));
    }
    PredicateOutcome {
        holds: worst <= tolerance,
        defect: worst,
        isometry_defect: None,
    }
}

/// Max over sampled grid pairs of `‖(L_{s→t})‡ ∘ L_{t→s} − id‖`, i.e. whether
/// the conjugate is the inverse of the reverse transport. Also measures how
/// far the law is from preserving fibre inner products.
pub fn is_unitary_transport(
    law: &dyn TransportLaw,
    path: &BasePath,
    triv: &Trivialization,
    samples: usize,
    seed: u64,
    tolerance: f64,
) -> PredicateOutcome {
    let mut rng = Sampler::new(seed);
    let n = law.dim();
    let id = identity(n);
    let mut worst = 0.0_f64;
    let mut isometry = 0.0_f64;
    for _ in 0..samples {
        let (s, t) = (rng.grid_time(path), rng.grid_time(path));
        worst = worst.max(defect_or_inf((|| {
            let conj = transport_dagger(law, path, triv, s, t)?;
            Ok(distance(&(conj * law.transport(path, t, s)?), &id))
        })()));
        let (u, v) = (rng.vector(n), rng.vector(n));
        isometry = isometry.max(defect_or_inf((|| {
            let (x, y) = (path.at(s)?, path.at(t)?);
            let m = law.transport(path, s, t)?;
            let at_s = |w: &DVector<C64>| FibreVector {
                base_point: x.clone(),
                components: w.clone(),
            };
            let at_t = |w: DVector<C64>| FibreVector {
                base_point: y.clone(),
                components: w,
            };
            let before = fibre_inner(triv, &x, &at_s(&u), &at_s(&v))?;
            let after = fibre_inner(triv, &y, &at_t(&m * &u), &at_t(&m * &v))?;
            Ok((after - before).norm())
        })()));
    }
    PredicateOutcome {
        holds: worst <= tolerance,
        defect: worst,
        isometry_defect: Some(isometry),
    }
}

/// Hermitian, unitary and isometry records for one law.
pub fn metric_compatibility_records(
    law: &dyn TransportLaw,
    path: &BasePath,
    triv: &Trivialization,
    samples: usize,
    seed: u64,
    tolerance: f64,
) -> Vec<DefectRecord> {
    let herm = is_hermitian_transport(law, path, triv, samples, seed, tolerance);
    let unit = is_unitary_transport(law, path, triv, samples, seed, tolerance);
    let label = law.label();
    vec![
        DefectRecord::new(&label, property::HERMITIAN, herm.defect, tolerance),
        DefectRecord::new(&label, property::UNITARY, unit.defect, tolerance),
        DefectRecord::new(&label, property::ISOMETRY, unit.isometry_defect.unwrap_or(0.0), tolerance),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::FIGURE_EIGHT_DOMAIN;
    use crate::linalg::{expm_hermitian_generator, sigma_z};
    use crate::report;
    use nalgebra::DMatrix;

    fn line() -> BasePath {
        BasePath::line(vec![0.0, 0.0, 0.0], vec![1.0, 0.5, -0.2], (0.0, 2.0), 41).unwrap()
    }

    fn phase_frames() -> FrameFamily {
        FrameFamily::new(2, |_, s| expm_hermitian_generator(&sigma_z(), -s, 1.0))
    }

    fn stretch_frames() -> FrameFamily {
        FrameFamily::new(2, |_, s| {
            Ok(DMatrix::from_row_slice(2, 2, &[c(s.exp(), 0.), c(0., 0.), c(0., 0.), c((-s).exp(), 0.)]))
        })
    }

    #[test]
    fn identity_frames_give_identity_transport() {
        let law = transport_from_frames(FrameFamily::new(3, |_, _| Ok(identity(3))), &line()).unwrap();
        assert_eq!(law.transport(&line(), 0.2, 1.7).unwrap(), identity(3));
    }

    #[test]
    fn scalar_frames() {
        let frames = FrameFamily::new(2, |_, s: f64| Ok(identity(2) * c(s.exp(), 0.0)));
        let law = transport_from_frames(frames, &line()).unwrap();
        let (s, t): (f64, f64) = (0.3, 1.6);
        let want = identity(2) * c((s - t).exp(), 0.0);
        assert!(distance(&law.transport(&line(), s, t).unwrap(), &want) < 1e-14);
    }

    #[test]
    fn commuting_exponential_frames() {
        // F(s) = exp(i s σ_z) ⇒ L_{s→t} = exp(i (s − t) σ_z)
        let law = transport_from_frames(phase_frames(), &line()).unwrap();
        let (s, t) = (0.25, 1.9);
        let want = expm_hermitian_generator(&sigma_z(), t - s, 1.0).unwrap();
        assert!(distance(&law.transport(&line(), s, t).unwrap(), &want) < 1e-14);
    }

    #[test]
    fn singular_frame_is_reported_with_parameter() {
        let frames = FrameFamily::new(2, |_, s| {
            Ok(DMatrix::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(s - 1.0, 0.)]))
        });
        let err = transport_from_frames(frames, &line()).unwrap_err();
        match err {
            Error::SingularFrame { parameter: Some(s), .. } => assert!((s - 1.0).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn frame_round_trip_and_anchor_independence() {
        let path = line();
        let law: Arc<dyn TransportLaw> = Arc::new(transport_from_frames(phase_frames(), &path).unwrap());
        let from_a = transport_from_frames(frames_from_transport(law.clone(), &path, 0.0).unwrap(), &path).unwrap();
        let from_b = transport_from_frames(frames_from_transport(law.clone(), &path, 1.3).unwrap(), &path).unwrap();
        for &(s, t) in &[(0.0, 2.0), (0.7, 0.1), (1.5, 1.5)] {
            let orig = law.transport(&path, s, t).unwrap();
            assert!(distance(&orig, &from_a.transport(&path, s, t).unwrap()) < 1e-10);
            assert!(distance(&orig, &from_b.transport(&path, s, t).unwrap()) < 1e-10);
        }
        assert!(frames_from_transport(law, &path, 5.0).is_err());
    }

    #[test]
    fn frames_from_identity_law_are_identity() {
        let path = line();
        let law: Arc<dyn TransportLaw> = Arc::new(CustomLaw::new(2, "id", |_, _, _| Ok(identity(2))));
        let f = frames_from_transport(law, &path, 0.5).unwrap();
        assert_eq!(f.at(&path, 1.1).unwrap(), identity(2));
    }

    #[test]
    fn gauge_transform_examples() {
        let path = line();
        let f = FrameFamily::new(2, |_, _| Ok(identity(2)));
        let same = gauge_transform(&f, &identity(2)).unwrap();
        assert_eq!(same.at(&path, 0.4).unwrap(), identity(2));
        let doubled = gauge_transform(&f, &(identity(2) * c(2.0, 0.0))).unwrap();
        assert_eq!(doubled.at(&path, 0.4).unwrap(), identity(2) * c(2.0, 0.0));
        let law = transport_from_frames(doubled, &path).unwrap();
        assert!(distance(&law.transport(&path, 0.1, 1.2).unwrap(), &identity(2)) < 1e-15);

        let singular = DMatrix::from_row_slice(2, 2, &[c(1., 0.), c(2., 0.), c(2., 0.), c(4., 0.)]);
        assert!(matches!(gauge_transform(&f, &singular), Err(Error::SingularFrame { .. })));
    }

    #[test]
    fn flat_law_passes_everything() {
        let path = BasePath::figure_eight(1.0, FIGURE_EIGHT_DOMAIN, 3, 65).unwrap();
        let triv = Trivialization::seeded_random_unitary(2, 3, 3, 0.8).unwrap();
        let law = FlatLaw::new(triv.clone());
        let records = check_axioms(&law, &path, 100, 1, 1e-10);
        assert!(report::all_pass(&records), "{records:?}");
        assert!(is_hermitian_transport(&law, &path, &triv, 100, 2, 1e-10).holds);
        let u = is_unitary_transport(&law, &path, &triv, 100, 2, 1e-10);
        assert!(u.holds && u.isometry_defect.unwrap() < 1e-10);
    }

    #[test]
    fn broken_law_fails_composition_only() {
        let path = line();
        let law = CustomLaw::new(2, "broken", |_, s, t| Ok(identity(2) * c(1.0 + t - s, 0.0)));
        let records = check_axioms(&law, &path, 50, 3, 1e-9);
        assert!(report::find(&records, property::IDENTITY).unwrap().passed());
        assert!(report::find(&records, property::LINEARITY).unwrap().passed());
        assert!(!report::find(&records, property::COMPOSITION).unwrap().passed());
    }

    #[test]
    fn stretched_frames_are_neither_hermitian_nor_unitary() {
        let path = line();
        let triv = Trivialization::identity(2, 3);
        let law = transport_from_frames(stretch_frames(), &path).unwrap();
        let h = is_hermitian_transport(&law, &path, &triv, 50, 4, 1e-9);
        let u = is_unitary_transport(&law, &path, &triv, 50, 4, 1e-9);
        assert!(!h.holds && !u.holds);
        assert!(u.isometry_defect.unwrap() > 1e-2);
    }

    #[test]
    fn isometry_defect_grows_with_separation() {
        let short = BasePath::line(vec![0.0; 3], vec![1.0, 0.0, 0.0], (0.0, 0.2), 3).unwrap();
        let long = BasePath::line(vec![0.0; 3], vec![1.0, 0.0, 0.0], (0.0, 2.0), 3).unwrap();
        let triv = Trivialization::identity(2, 3);
        let measure = |p: &BasePath| {
            let law = transport_from_frames(stretch_frames(), p).unwrap();
            is_unitary_transport(&law, p, &triv, 200, 9, 1e-9).isometry_defect.unwrap()
        };
        assert!(measure(&long) > 5.0 * measure(&short));
    }
}
