//! Generators and independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use hilbert_bundle::bundle::{BasePath, Trivialization, FIGURE_EIGHT_DOMAIN};
use hilbert_bundle::linalg::{ComplexOperator, C64};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn max_abs(a: &ComplexOperator) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn diff(a: &ComplexOperator, b: &ComplexOperator) -> f64 {
    max_abs(&(a - b))
}

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_complex(rng: &mut ChaCha8Rng) -> C64 {
    c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

pub fn random_vector(rng: &mut ChaCha8Rng, dim: usize) -> DVector<C64> {
    DVector::from_fn(dim, |_, _| random_complex(rng))
}

pub fn random_matrix(rng: &mut ChaCha8Rng, dim: usize) -> ComplexOperator {
    DMatrix::from_fn(dim, dim, |_, _| random_complex(rng))
}

pub fn random_hermitian(rng: &mut ChaCha8Rng, dim: usize) -> ComplexOperator {
    let a = random_matrix(rng, dim);
    (&a + a.adjoint()) * c(0.5, 0.0)
}

/// Unitary by Gram-Schmidt on the columns of a random matrix.
pub fn random_unitary(rng: &mut ChaCha8Rng, dim: usize) -> ComplexOperator {
    let a = random_matrix(rng, dim);
    let mut q = ComplexOperator::zeros(dim, dim);
    for j in 0..dim {
        let mut v = a.column(j).into_owned();
        for k in 0..j {
            let qk = q.column(k).into_owned();
            let proj = qk.dotc(&v);
            v -= qk * proj;
        }
        let n = v.norm();
        q.set_column(j, &(v / c(n, 0.0)));
    }
    q
}

/// A well-conditioned invertible matrix: identity plus a small random part.
pub fn random_invertible(rng: &mut ChaCha8Rng, dim: usize) -> ComplexOperator {
    hilbert_bundle::linalg::identity(dim) + random_matrix(rng, dim) * c(0.3, 0.0)
}

pub fn complex_strategy() -> impl Strategy<Value = C64> {
    (-2.0..2.0f64, -2.0..2.0f64).prop_map(|(re, im)| c(re, im))
}

pub fn matrix_strategy(dim: usize) -> impl Strategy<Value = ComplexOperator> {
    proptest::collection::vec(complex_strategy(), dim * dim)
        .prop_map(move |v| DMatrix::from_row_slice(dim, dim, &v))
}

pub fn hermitian_strategy(dim: usize) -> impl Strategy<Value = ComplexOperator> {
    matrix_strategy(dim).prop_map(|a| (&a + a.adjoint()) * c(0.5, 0.0))
}

pub fn vector_strategy(dim: usize) -> impl Strategy<Value = DVector<C64>> {
    proptest::collection::vec(complex_strategy(), dim).prop_map(DVector::from_vec)
}

/// Identity, rotation-field and seeded random gauges on a `base_dim` base.
pub fn trivialization_families(dim: usize, base_dim: usize) -> Vec<Trivialization> {
    let mut k = vec![0.0; base_dim];
    k[0] = 1.0;
    if base_dim > 1 {
        k[1] = -0.4;
    }
    vec![
        Trivialization::identity(dim, base_dim),
        Trivialization::rotation_field(dim, [0.3, 0.0, 1.0], k).unwrap(),
        Trivialization::seeded_random_unitary(dim, base_dim, 42, 0.6).unwrap(),
    ]
}

pub fn line_path(domain: (f64, f64), grid_points: usize) -> BasePath {
    BasePath::line(vec![0.0, 0.0, 0.0], vec![1.0, 0.5, -0.25], domain, grid_points).unwrap()
}

pub fn figure_eight_path(grid_points: usize) -> BasePath {
    BasePath::figure_eight(1.0, FIGURE_EIGHT_DOMAIN, 3, grid_points).unwrap()
}

/// `U(t, s)` of `H = (Δ/2)σ_z + (Ω/2)(cos ωt σ_x + sin ωt σ_y)`, written out
/// with `exp(−iθ n·σ) = cos θ − i sin θ n·σ` in the frame rotating at `ω`.
pub fn drive_propagator_oracle(detuning: f64, rabi: f64, omega: f64, hbar: f64, t: f64, s: f64) -> ComplexOperator {
    let delta = detuning - hbar * omega;
    let omega_eff = (delta * delta + rabi * rabi).sqrt();
    let theta = omega_eff * (t - s) / (2.0 * hbar);
    let (sn, cs) = theta.sin_cos();
    let (nz, nx) = if omega_eff > 0.0 {
        (delta / omega_eff, rabi / omega_eff)
    } else {
        (0.0, 0.0)
    };
    let inner = DMatrix::from_row_slice(
        2,
        2,
        &[c(cs, -sn * nz), c(0.0, -sn * nx), c(0.0, -sn * nx), c(cs, sn * nz)],
    );
    let frame = |time: f64| {
        let phase = omega * time / 2.0;
        DMatrix::from_row_slice(
            2,
            2,
            &[C64::from_polar(1.0, -phase), c(0.0, 0.0), c(0.0, 0.0), C64::from_polar(1.0, phase)],
        )
    };
    frame(t) * inner * frame(s).adjoint()
}

/// Transition probability `|⟨1|U(t,0)|0⟩|²` on resonance.
pub fn rabi_probability(rabi: f64, t: f64) -> f64 {
    (rabi * t / 2.0).sin().powi(2)
}
