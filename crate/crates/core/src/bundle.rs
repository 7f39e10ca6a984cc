//! Base space, observer paths, trivializations and fibre conjugation.
//!
//! Every fibre `ℋ_x` is stored in its own orthonormal frame, so the geometric
//! content sits entirely in the unitary matrices `l_x: ℋ_x → ℋ` supplied by a
//! [`Trivialization`]. The fibre Hermitian conjugate of a map is computed
//! through those matrices, never by a bare conjugate transpose.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{
    self, c, distance, expm_hermitian_generator_tol, identity, inverse, spin_matrices,
    unitarity_defect, ComplexOperator, StateVector, C64,
};

/// Coordinates of a base point in `ℝ^d`.
pub type Point = DVector<f64>;

/// Default base dimension: ordinary three-dimensional coordinate space.
pub const DEFAULT_BASE_DIM: usize = 3;

const POINT_TOL: f64 = 1e-12;

pub fn same_point(x: &Point, y: &Point) -> bool {
    x.len() == y.len()
        && x.iter()
            .zip(y.iter())
            .all(|(a, b)| (a - b).abs() <= POINT_TOL * (1.0 + a.abs().max(b.abs())))
}

#[derive(Debug, Clone, PartialEq)]
pub enum PathShape {
    /// `origin + t·velocity`
    Line { origin: Vec<f64>, velocity: Vec<f64> },
    /// `center + radius·(cos ωt, sin ωt, 0, …)`
    Circle {
        center: Vec<f64>,
        radius: f64,
        angular_frequency: f64,
    },
    /// `amplitude·(sin t, sin 2t, 0, …)`; crosses the origin at `t = 0, π`.
    FigureEight { amplitude: f64 },
}

impl PathShape {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Line { .. } => "line",
            Self::Circle { .. } => "circle",
            Self::FigureEight { .. } => "figure_eight",
        }
    }
}

/// A path `γ: [a, b] → ℝ^d` with a sampling grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BasePath {
    shape: PathShape,
    start: f64,
    end: f64,
    base_dim: usize,
    grid: Vec<f64>,
}

impl BasePath {
    /// Uniform grid of `grid_points ≥ 2` samples with exact endpoints.
    pub fn new(shape: PathShape, domain: (f64, f64), base_dim: usize, grid_points: usize) -> Result<Self> {
        let (a, b) = domain;
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidArgument(format!("path domain [{a}, {b}] is empty")));
        }
        if grid_points < 2 {
            return Err(Error::InvalidArgument("path grid needs at least two points".into()));
        }
        if base_dim == 0 {
            return Err(Error::InvalidArgument("base dimension must be positive".into()));
        }
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match &shape {
            PathShape::Line { origin, velocity } => {
                if origin.len() != base_dim || velocity.len() != base_dim {
                    return Err(Error::Dimension {
                        expected: base_dim,
                        found: if origin.len() != base_dim { origin.len() } else { velocity.len() },
                    });
                }
                if !finite(origin) || !finite(velocity) {
                    return Err(Error::InvalidArgument("line parameters must be finite".into()));
                }
            }
            PathShape::Circle {
                center,
                radius,
                angular_frequency,
            } => {
                if base_dim < 2 {
                    return Err(Error::InvalidArgument("a circle needs a base of dimension >= 2".into()));
                }
                linalg::check_dim(base_dim, center.len())?;
                if !finite(center) || !radius.is_finite() || !angular_frequency.is_finite() {
                    return Err(Error::InvalidArgument("circle parameters must be finite".into()));
                }
            }
            PathShape::FigureEight { amplitude } => {
                if base_dim < 2 {
                    return Err(Error::InvalidArgument("a figure-eight needs a base of dimension >= 2".into()));
                }
                if !amplitude.is_finite() {
                    return Err(Error::InvalidArgument("amplitude must be finite".into()));
                }
            }
        }
        let n = grid_points - 1;
        let h = (b - a) / n as f64;
        let grid = (0..=n).map(|i| if i == n { b } else { a + i as f64 * h }).collect();
        Ok(Self {
            shape,
            start: a,
            end: b,
            base_dim,
            grid,
        })
    }

    pub fn line(origin: Vec<f64>, velocity: Vec<f64>, domain: (f64, f64), grid_points: usize) -> Result<Self> {
        let d = origin.len();
        Self::new(PathShape::Line { origin, velocity }, domain, d, grid_points)
    }

    pub fn figure_eight(amplitude: f64, domain: (f64, f64), base_dim: usize, grid_points: usize) -> Result<Self> {
        Self::new(PathShape::FigureEight { amplitude }, domain, base_dim, grid_points)
    }

    pub fn shape(&self) -> &PathShape {
        &self.shape
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.start, self.end)
    }

    pub fn base_dim(&self) -> usize {
        self.base_dim
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.start && t <= self.end
    }

    pub fn at(&self, t: f64) -> Result<Point> {
        if !self.contains(t) {
            return Err(Error::Domain {
                value: t,
                lo: self.start,
                hi: self.end,
            });
        }
        let d = self.base_dim;
        let mut p = DVector::zeros(d);
        match &self.shape {
            PathShape::Line { origin, velocity } => {
                for i in 0..d {
                    p[i] = origin[i] + t * velocity[i];
                }
            }
            PathShape::Circle {
                center,
                radius,
                angular_frequency,
            } => {
                let (s, co) = (angular_frequency * t).sin_cos();
                for i in 0..d {
                    p[i] = center[i];
                }
                p[0] += radius * co;
                p[1] += radius * s;
            }
            PathShape::FigureEight { amplitude } => {
                p[0] = amplitude * t.sin();
                p[1] = amplitude * (2.0 * t).sin();
            }
        }
        Ok(p)
    }
}

pub fn eval_path(path: &BasePath, t: f64) -> Result<Point> {
    path.at(t)
}

#[derive(Debug, Clone, PartialEq)]
enum Gauge {
    Identity,
    /// `l_x = exp(−i (k·x) n·J)` with `J` the spin-`(dim−1)/2` matrices.
    RotationField { generator: ComplexOperator, wavevector: Vec<f64> },
    /// `l_x` = unitary factor of the phase-fixed QR of `A₀ + Σ xᵢ·Aᵢ`.
    SeededRandom { seed: u64, coefficients: Vec<ComplexOperator> },
}

/// A family of unitary isomorphisms `l_x: ℋ_x → ℋ`, one per base point.
#[derive(Debug, Clone, PartialEq)]
pub struct Trivialization {
    gauge: Gauge,
    dim: usize,
    base_dim: usize,
    unitarity_tol: f64,
}

impl fmt::Display for Trivialization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.gauge {
            Gauge::Identity => write!(f, "identity"),
            Gauge::RotationField { .. } => write!(f, "rotation_field"),
            Gauge::SeededRandom { seed, .. } => write!(f, "seeded_random_unitary(seed={seed})"),
        }
    }
}

impl Trivialization {
    pub fn identity(dim: usize, base_dim: usize) -> Self {
        Self {
            gauge: Gauge::Identity,
            dim,
            base_dim,
            unitarity_tol: linalg::ToleranceConfig::default().unitarity_tol,
        }
    }

    /// Rotation about `axis` by the angle `wavevector · x`.
    pub fn rotation_field(dim: usize, axis: [f64; 3], wavevector: Vec<f64>) -> Result<Self> {
        let norm = axis.iter().map(|a| a * a).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::Unitarity { defect: f64::INFINITY });
        }
        if !wavevector.iter().all(|k| k.is_finite()) {
            return Err(Error::Unitarity { defect: f64::INFINITY });
        }
        let [jx, jy, jz] = spin_matrices(dim);
        let generator = jx * c(axis[0] / norm, 0.0) + jy * c(axis[1] / norm, 0.0) + jz * c(axis[2] / norm, 0.0);
        let base_dim = wavevector.len();
        let t = Self {
            gauge: Gauge::RotationField { generator, wavevector },
            dim,
            base_dim,
            unitarity_tol: linalg::ToleranceConfig::default().unitarity_tol,
        };
        t.validate()?;
        Ok(t)
    }

    /// A reproducible "generic" gauge: the matrices `Aᵢ` are drawn from a
    /// ChaCha stream seeded by `seed`, with the position-dependent parts
    /// scaled by `spread`.
    pub fn seeded_random_unitary(dim: usize, base_dim: usize, seed: u64, spread: f64) -> Result<Self> {
        if !spread.is_finite() {
            return Err(Error::Unitarity { defect: f64::INFINITY });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |scale: f64| {
            DMatrix::from_fn(dim, dim, |_, _| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                c(re * scale, im * scale)
            })
        };
        let mut coefficients = vec![draw(1.0)];
        for _ in 0..base_dim {
            coefficients.push(draw(spread));
        }
        let t = Self {
            gauge: Gauge::SeededRandom { seed, coefficients },
            dim,
            base_dim,
            unitarity_tol: linalg::ToleranceConfig::default().unitarity_tol,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn with_unitarity_tol(mut self, tol: f64) -> Self {
        self.unitarity_tol = tol;
        self
    }

    fn validate(&self) -> Result<()> {
        let origin = DVector::zeros(self.base_dim);
        let l = self.raw(&origin)?;
        let defect = unitarity_defect(&l);
        if defect <= self.unitarity_tol {
            Ok(())
        } else {
            Err(Error::Unitarity { defect })
        }
    }

    pub fn family(&self) -> &'static str {
        match self.gauge {
            Gauge::Identity => "identity",
            Gauge::RotationField { .. } => "rotation_field",
            Gauge::SeededRandom { .. } => "seeded_random_unitary",
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn base_dim(&self) -> usize {
        self.base_dim
    }

    fn raw(&self, x: &Point) -> Result<ComplexOperator> {
        linalg::check_dim(self.base_dim, x.len())?;
        match &self.gauge {
            Gauge::Identity => Ok(identity(self.dim)),
            Gauge::RotationField { generator, wavevector } => {
                let angle: f64 = wavevector.iter().zip(x.iter()).map(|(k, xi)| k * xi).sum();
                expm_hermitian_generator_tol(generator, angle, 1.0, f64::INFINITY)
            }
            Gauge::SeededRandom { coefficients, .. } => {
                let mut m = coefficients[0].clone();
                for (a, xi) in coefficients[1..].iter().zip(x.iter()) {
                    m += a * c(*xi, 0.0);
                }
                if !m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
                    return Err(Error::Numerical("non-finite base point".into()));
                }
                let qr = m.qr();
                let (mut q, r) = (qr.q(), qr.r());
                for k in 0..self.dim {
                    let d = r[(k, k)];
                    let phase = if d.norm() > 0.0 { d / d.norm() } else { c(1.0, 0.0) };
                    let mut col = q.column_mut(k);
                    col *= phase;
                }
                Ok(q)
            }
        }
    }

    /// `l_x`. Deterministic: equal `x` gives a bit-identical matrix.
    pub fn at(&self, x: &Point) -> Result<ComplexOperator> {
        self.raw(x)
    }

    /// `l_x⁻¹` by LU inversion of `l_x`.
    pub fn inverse_at(&self, x: &Point) -> Result<ComplexOperator> {
        inverse(&self.raw(x)?)
    }
}

pub fn trivialization_at(t: &Trivialization, x: &Point) -> Result<ComplexOperator> {
    t.at(x)
}

/// A vector of the fibre over `base_point`, in that fibre's own frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FibreVector {
    pub base_point: Point,
    pub components: DVector<C64>,
}

impl FibreVector {
    pub fn norm_sq(&self) -> f64 {
        self.components.iter().map(|z| z.norm_sqr()).sum()
    }
}

/// `l_x⁻¹ ψ` as a vector of `ℋ_x`.
pub fn to_fibre(t: &Trivialization, x: &Point, psi: &StateVector) -> Result<FibreVector> {
    linalg::check_dim(t.dim(), psi.dim())?;
    Ok(FibreVector {
        base_point: x.clone(),
        components: t.inverse_at(x)? * psi.amplitudes(),
    })
}

/// `l_x Φ` back in the typical fibre.
pub fn from_fibre(t: &Trivialization, phi: &FibreVector) -> Result<StateVector> {
    linalg::check_dim(t.dim(), phi.components.len())?;
    Ok(StateVector::from_dvector(t.at(&phi.base_point)? * &phi.components))
}

/// `⟨Φ|Ψ⟩_x = ⟨l_x Φ | l_x Ψ⟩`.
pub fn fibre_inner(t: &Trivialization, x: &Point, phi: &FibreVector, psi: &FibreVector) -> Result<C64> {
    if !same_point(x, &phi.base_point) || !same_point(x, &psi.base_point) {
        return Err(Error::BasePoint);
    }
    linalg::check_dim(phi.components.len(), psi.components.len())?;
    linalg::check_dim(t.dim(), phi.components.len())?;
    let l = t.at(x)?;
    Ok((&l * &phi.components).dotc(&(&l * &psi.components)))
}

/// Matrix of a linear map `ℋ_source → ℋ_target` in the fibre frames.
#[derive(Debug, Clone, PartialEq)]
pub struct FibreMap {
    pub source: Point,
    pub target: Point,
    pub matrix: ComplexOperator,
}

impl FibreMap {
    pub fn new(source: Point, target: Point, matrix: ComplexOperator) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::Dimension {
                expected: matrix.nrows(),
                found: matrix.ncols(),
            });
        }
        Ok(Self { source, target, matrix })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn apply(&self, v: &FibreVector) -> Result<FibreVector> {
        if !same_point(&v.base_point, &self.source) {
            return Err(Error::BasePoint);
        }
        linalg::check_dim(self.dim(), v.components.len())?;
        Ok(FibreVector {
            base_point: self.target.clone(),
            components: &self.matrix * &v.components,
        })
    }

    /// `self ∘ first`; `first` must end where `self` begins.
    pub fn after(&self, first: &FibreMap) -> Result<FibreMap> {
        if !same_point(&first.target, &self.source) {
            return Err(Error::BasePoint);
        }
        linalg::check_dim(self.dim(), first.dim())?;
        Ok(FibreMap {
            source: first.source.clone(),
            target: self.target.clone(),
            matrix: &self.matrix * &first.matrix,
        })
    }

    pub fn distance(&self, other: &FibreMap) -> f64 {
        if !same_point(&self.source, &other.source) || !same_point(&self.target, &other.target) {
            return f64::INFINITY;
        }
        distance(&self.matrix, &other.matrix)
    }
}

/// `l_p⁻¹ ∘ (l_q ∘ M ∘ l_p⁻¹)† ∘ l_q` for a matrix `M: ℋ_p → ℋ_q`.
pub(crate) fn conjugate_between(
    t: &Trivialization,
    p: &Point,
    q: &Point,
    m: &ComplexOperator,
) -> Result<ComplexOperator> {
    let lp_inv = t.inverse_at(p)?;
    let lq = t.at(q)?;
    let inner = &lq * m * &lp_inv;
    Ok(lp_inv * inner.adjoint() * lq)
}

/// Fibre Hermitian conjugate.
///
/// Takes the map `A_{y→x}` and returns `A‡_{x→y}`, the unique map with
/// `⟨A‡Φ|Ψ⟩_y = ⟨Φ|A_{y→x}Ψ⟩_x`. Applying it twice returns the input.
pub fn fibre_map_dagger(a: &FibreMap, t: &Trivialization) -> Result<FibreMap> {
    linalg::check_dim(t.dim(), a.dim())?;
    let (y, x) = (&a.source, &a.target);
    Ok(FibreMap {
        source: x.clone(),
        target: y.clone(),
        matrix: conjugate_between(t, y, x, &a.matrix)?,
    })
}

/// `l_{x→y} = l_y⁻¹ ∘ l_x`.
pub fn flat_transport(t: &Trivialization, x: &Point, y: &Point) -> Result<FibreMap> {
    let m = t.inverse_at(y)? * t.at(x)?;
    FibreMap::new(x.clone(), y.clone(), m)
}

fn check_morphism(family: &[FibreMap]) -> Result<()> {
    if family.iter().all(|a| same_point(&a.source, &a.target)) {
        Ok(())
    } else {
        Err(Error::Morphism)
    }
}

/// Pointwise conjugate `A_x‡ = l_x⁻¹ ∘ (l_x ∘ A_x ∘ l_x⁻¹)† ∘ l_x` of a bundle
/// morphism sampled at a set of points.
pub fn morphism_dagger(family: &[FibreMap], t: &Trivialization) -> Result<Vec<FibreMap>> {
    check_morphism(family)?;
    family
        .iter()
        .map(|a| {
            linalg::check_dim(t.dim(), a.dim())?;
            Ok(FibreMap {
                source: a.source.clone(),
                target: a.target.clone(),
                matrix: conjugate_between(t, &a.source, &a.source, &a.matrix)?,
            })
        })
        .collect()
}

/// Max over the family of `‖A‡ − A‖`.
pub fn morphism_hermiticity_defect(family: &[FibreMap], t: &Trivialization) -> Result<f64> {
    let conj = morphism_dagger(family, t)?;
    Ok(family
        .iter()
        .zip(&conj)
        .map(|(a, b)| distance(&a.matrix, &b.matrix))
        .fold(0.0, f64::max))
}

/// Max over the family of `‖A‡ − A⁻¹‖`; infinite when some `A_x` is singular.
pub fn morphism_unitarity_defect(family: &[FibreMap], t: &Trivialization) -> Result<f64> {
    let conj = morphism_dagger(family, t)?;
    let mut worst = 0.0_f64;
    for (a, b) in family.iter().zip(&conj) {
        match inverse(&a.matrix) {
            Ok(inv) => worst = worst.max(distance(&inv, &b.matrix)),
            Err(_) => return Ok(f64::INFINITY),
        }
    }
    Ok(worst)
}

/// Max of `|⟨AΦ|AΨ⟩_x − ⟨Φ|Ψ⟩_x|` over the given vector pairs at each point.
pub fn morphism_isometry_defect(
    family: &[FibreMap],
    t: &Trivialization,
    pairs: &[(DVector<C64>, DVector<C64>)],
) -> Result<f64> {
    check_morphism(family)?;
    let mut worst = 0.0_f64;
    for a in family {
        let x = &a.source;
        for (u, v) in pairs {
            let phi = FibreVector { base_point: x.clone(), components: u.clone() };
            let psi = FibreVector { base_point: x.clone(), components: v.clone() };
            let before = fibre_inner(t, x, &phi, &psi)?;
            let after = fibre_inner(t, x, &a.apply(&phi)?, &a.apply(&psi)?)?;
            worst = worst.max((after - before).norm());
        }
    }
    Ok(worst)
}

/// Default figure-eight parameter interval: one full loop, crossing the
/// origin at `t = 0` and `t = π` only.
pub const FIGURE_EIGHT_DOMAIN: (f64, f64) = (-PI / 2.0, 3.0 * PI / 2.0);

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{sigma_y, sigma_z};

    fn pt(v: &[f64]) -> Point {
        DVector::from_column_slice(v)
    }

    fn rotation_z() -> Trivialization {
        Trivialization::rotation_field(2, [0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0]).unwrap()
    }

    #[test]
    fn eval_path_examples() {
        let line = BasePath::line(vec![0.0; 3], vec![1.0, 0.0, 0.0], (0.0, 3.0), 31).unwrap();
        assert_eq!(line.at(2.0).unwrap(), pt(&[2.0, 0.0, 0.0]));
        assert!(matches!(line.at(3.5), Err(Error::Domain { .. })));

        let circle = BasePath::new(
            PathShape::Circle { center: vec![0.0; 3], radius: 1.0, angular_frequency: 1.0 },
            (0.0, 2.0 * PI),
            3,
            9,
        )
        .unwrap();
        let p = circle.at(PI).unwrap();
        assert!((p - pt(&[-1.0, 0.0, 0.0])).amax() < 1e-15);

        let eight = BasePath::figure_eight(1.0, FIGURE_EIGHT_DOMAIN, 3, 9).unwrap();
        assert_eq!(eight.at(0.0).unwrap(), pt(&[0.0, 0.0, 0.0]));
        assert!(eight.at(PI).unwrap().amax() < 1e-15);
    }

    #[test]
    fn grid_has_exact_endpoints() {
        let p = BasePath::figure_eight(1.0, FIGURE_EIGHT_DOMAIN, 3, 97).unwrap();
        assert_eq!(p.grid().first(), Some(&FIGURE_EIGHT_DOMAIN.0));
        assert_eq!(p.grid().last(), Some(&FIGURE_EIGHT_DOMAIN.1));
        assert!(p.grid().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn trivialization_examples() {
        let id = Trivialization::identity(2, 3);
        assert_eq!(id.at(&pt(&[4.0, -1.0, 2.0])).unwrap(), identity(2));

        let rot = rotation_z();
        assert!(distance(&rot.at(&pt(&[0.0, 5.0, 7.0])).unwrap(), &identity(2)) < 1e-15);
        let want = DMatrix::from_row_slice(
            2,
            2,
            &[C64::from_polar(1.0, -PI / 2.0), c(0., 0.), c(0., 0.), C64::from_polar(1.0, PI / 2.0)],
        );
        assert!(distance(&rot.at(&pt(&[PI, 0.0, 0.0])).unwrap(), &want) < 1e-15);
    }

    #[test]
    fn degenerate_rotation_axis_is_rejected() {
        let err = Trivialization::rotation_field(2, [0.0; 3], vec![1.0; 3]).unwrap_err();
        assert!(matches!(err, Error::Unitarity { .. }));
    }

    #[test]
    fn seeded_random_is_deterministic_and_unitary() {
        let a = Trivialization::seeded_random_unitary(4, 3, 11, 0.5).unwrap();
        let b = Trivialization::seeded_random_unitary(4, 3, 11, 0.5).unwrap();
        let x = pt(&[0.3, -1.2, 2.5]);
        let la = a.at(&x).unwrap();
        assert_eq!(la, b.at(&x).unwrap());
        assert!(unitarity_defect(&la) < 1e-13);
        let other = Trivialization::seeded_random_unitary(4, 3, 12, 0.5).unwrap();
        assert!(distance(&la, &other.at(&x).unwrap()) > 1e-3);
        // varies with the base point
        assert!(distance(&la, &a.at(&pt(&[0.0, 0.0, 0.0])).unwrap()) > 1e-3);
    }

    #[test]
    fn fibre_round_trip_examples() {
        let psi = StateVector::new(vec![c(1.0, 0.0), c(0.0, 0.0)]);
        let x = pt(&[PI, 0.0, 0.0]);
        let id = Trivialization::identity(2, 3);
        assert_eq!(to_fibre(&id, &x, &psi).unwrap().components, psi.amplitudes().clone());

        let phi = to_fibre(&rotation_z(), &x, &psi).unwrap();
        assert!((phi.components[0] - c(0.0, 1.0)).norm() < 1e-15);
        assert!(phi.components[1].norm() < 1e-15);

        let rnd = Trivialization::seeded_random_unitary(2, 3, 5, 1.0).unwrap();
        let psi = StateVector::new(vec![c(0.3, -0.7), c(1.1, 0.2)]);
        let back = from_fibre(&rnd, &to_fibre(&rnd, &x, &psi).unwrap()).unwrap();
        assert!(linalg::max_abs_vec(&(back.amplitudes() - psi.amplitudes())) < 1e-12);

        let zero = from_fibre(&rnd, &to_fibre(&rnd, &x, &StateVector::zeros(2)).unwrap()).unwrap();
        assert_eq!(zero, StateVector::zeros(2));
    }

    #[test]
    fn fibre_inner_examples() {
        let t = Trivialization::seeded_random_unitary(2, 3, 9, 1.0).unwrap();
        let x = pt(&[0.1, 0.2, 0.3]);
        let e0 = FibreVector { base_point: x.clone(), components: DVector::from_vec(vec![c(1., 0.), c(0., 0.)]) };
        assert!((fibre_inner(&t, &x, &e0, &e0).unwrap() - c(1., 0.)).norm() < 1e-14);

        let u = StateVector::new(vec![c(0.2, 0.9), c(-1.0, 0.4)]);
        let v = StateVector::new(vec![c(0.5, 0.0), c(0.3, -0.3)]);
        let got = fibre_inner(&t, &x, &to_fibre(&t, &x, &u).unwrap(), &to_fibre(&t, &x, &v).unwrap()).unwrap();
        assert!((got - linalg::inner(&u, &v).unwrap()).norm() < 1e-12);

        let w = StateVector::new(vec![c(1.0, 0.4), c(0.2, 0.0)]);
        let w_perp = StateVector::new(vec![c(-0.2, 0.0), c(1.0, -0.4)]);
        assert!(linalg::inner(&w, &w_perp).unwrap().norm() < 1e-15);
        let got = fibre_inner(&t, &x, &to_fibre(&t, &x, &w).unwrap(), &to_fibre(&t, &x, &w_perp).unwrap()).unwrap();
        assert!(got.norm() < 1e-14);

        let elsewhere = FibreVector { base_point: pt(&[1.0, 0.0, 0.0]), ..e0.clone() };
        assert!(matches!(fibre_inner(&t, &x, &e0, &elsewhere), Err(Error::BasePoint)));
    }

    #[test]
    fn dagger_with_identity_trivialization_is_conjugate_transpose() {
        let id = Trivialization::identity(2, 3);
        let m = DMatrix::from_row_slice(2, 2, &[c(1., 2.), c(0., -1.), c(3., 0.), c(0.5, 0.5)]);
        let a = FibreMap::new(pt(&[1., 0., 0.]), pt(&[0., 1., 0.]), m.clone()).unwrap();
        let d = fibre_map_dagger(&a, &id).unwrap();
        assert_eq!(d.matrix, m.adjoint());
        assert_eq!(d.source, a.target);
        assert_eq!(d.target, a.source);
    }

    #[test]
    fn flat_transport_examples() {
        let t = Trivialization::seeded_random_unitary(3, 3, 2, 0.7).unwrap();
        let (x, y, z) = (pt(&[0.1, 0.0, 1.0]), pt(&[-0.4, 2.0, 0.3]), pt(&[1.5, 1.5, -1.0]));
        assert!(distance(&flat_transport(&t, &x, &x).unwrap().matrix, &identity(3)) < 1e-13);
        let id = Trivialization::identity(3, 3);
        assert_eq!(flat_transport(&id, &x, &y).unwrap().matrix, identity(3));

        let via_y = flat_transport(&t, &y, &z).unwrap().after(&flat_transport(&t, &x, &y).unwrap()).unwrap();
        assert!(via_y.distance(&flat_transport(&t, &x, &z).unwrap()) < 1e-12);

        // l_{x→y}‡ built from l_{y→x}
        let conj = fibre_map_dagger(&flat_transport(&t, &y, &x).unwrap(), &t).unwrap();
        assert!(conj.distance(&flat_transport(&t, &x, &y).unwrap()) < 1e-12);
    }

    #[test]
    fn morphism_examples() {
        let t = Trivialization::seeded_random_unitary(2, 3, 4, 1.0).unwrap();
        let points = [pt(&[0.0, 0.0, 0.0]), pt(&[0.5, -1.0, 2.0]), pt(&[3.0, 0.1, 0.2])];
        let conj_by = |m: &ComplexOperator| -> Vec<FibreMap> {
            points
                .iter()
                .map(|x| {
                    let mat = t.inverse_at(x).unwrap() * m * t.at(x).unwrap();
                    FibreMap::new(x.clone(), x.clone(), mat).unwrap()
                })
                .collect()
        };
        let herm = conj_by(&sigma_z());
        assert!(morphism_hermiticity_defect(&herm, &t).unwrap() < 1e-12);

        let unit = conj_by(&expm_hermitian_generator_tol(&sigma_y(), 1.0, 1.0, 1e-12).unwrap());
        assert!(morphism_unitarity_defect(&unit, &t).unwrap() < 1e-12);
        let pairs = vec![(
            DVector::from_vec(vec![c(0.3, 0.1), c(-0.2, 0.9)]),
            DVector::from_vec(vec![c(1.0, 0.0), c(0.4, -0.4)]),
        )];
        assert!(morphism_isometry_defect(&unit, &t, &pairs).unwrap() < 1e-12);

        let zero = conj_by(&DMatrix::zeros(2, 2));
        let zd = morphism_dagger(&zero, &t).unwrap();
        assert!(zd.iter().all(|m| linalg::max_abs(&m.matrix) == 0.0));

        let moving = vec![FibreMap::new(points[0].clone(), points[1].clone(), identity(2)).unwrap()];
        assert!(matches!(morphism_dagger(&moving, &t), Err(Error::Morphism)));
    }
}
