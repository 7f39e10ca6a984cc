mod common;

use common::*;
use hilbert_bundle::bundle::{
    fibre_inner, fibre_map_dagger, flat_transport, from_fibre, morphism_isometry_defect, morphism_unitarity_defect,
    to_fibre, FibreMap, FibreVector, Point,
};
use hilbert_bundle::linalg::{inner, inverse, StateVector};
use nalgebra::DVector;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn random_point(r: &mut ChaCha8Rng) -> Point {
    DVector::from_fn(3, |_, _| r.random_range(-3.0..3.0))
}

#[test]
fn metric_transfer_identities_are_mutually_inverse() {
    for dim in [2, 3] {
        for triv in trivialization_families(dim, 3) {
            let mut r = rng(4_808);
            let mut worst = 0.0_f64;
            for _ in 0..500 {
                let x = random_point(&mut r);
                let (u, v) = (random_vector(&mut r, dim), random_vector(&mut r, dim));
                // ℋ → ℋ_x → ℋ
                let (pu, pv) = (StateVector::from_dvector(u.clone()), StateVector::from_dvector(v.clone()));
                let (fu, fv) = (to_fibre(&triv, &x, &pu).unwrap(), to_fibre(&triv, &x, &pv).unwrap());
                worst = worst.max((fibre_inner(&triv, &x, &fu, &fv).unwrap() - inner(&pu, &pv).unwrap()).norm());
                // ℋ_x → ℋ → ℋ_x
                let phi = FibreVector { base_point: x.clone(), components: u };
                let psi = FibreVector { base_point: x.clone(), components: v };
                let back = inner(&from_fibre(&triv, &phi).unwrap(), &from_fibre(&triv, &psi).unwrap()).unwrap();
                worst = worst.max((back - fibre_inner(&triv, &x, &phi, &psi).unwrap()).norm());
            }
            assert!(worst <= 1e-12, "{triv}: defect {worst:e}");
        }
    }
}

fn random_map(r: &mut ChaCha8Rng, dim: usize, source: Point, target: Point) -> FibreMap {
    FibreMap::new(source, target, random_matrix(r, dim)).unwrap()
}

#[test]
fn conjugation_is_an_involution() {
    for triv in trivialization_families(3, 3) {
        let mut r = rng(12);
        for _ in 0..100 {
            let (x, y) = (random_point(&mut r), random_point(&mut r));
            let a = random_map(&mut r, 3, y, x);
            let twice = fibre_map_dagger(&fibre_map_dagger(&a, &triv).unwrap(), &triv).unwrap();
            assert!(twice.distance(&a) <= 1e-12, "{triv}: {:e}", twice.distance(&a));
        }
    }
}

#[test]
fn conjugation_reverses_composition() {
    for triv in trivialization_families(2, 3) {
        let mut r = rng(13);
        for _ in 0..100 {
            let (x, y, z) = (random_point(&mut r), random_point(&mut r), random_point(&mut r));
            let a = random_map(&mut r, 2, x.clone(), y.clone());
            let b = random_map(&mut r, 2, y, z);
            let lhs = fibre_map_dagger(&b.after(&a).unwrap(), &triv).unwrap();
            let da = fibre_map_dagger(&a, &triv).unwrap();
            let db = fibre_map_dagger(&b, &triv).unwrap();
            let rhs = da.after(&db).unwrap();
            assert!(lhs.distance(&rhs) <= 1e-12, "{triv}: {:e}", lhs.distance(&rhs));
        }
    }
}

#[test]
fn flat_transport_is_hermitian_and_unitary() {
    for dim in [2, 4] {
        for triv in trivialization_families(dim, 3) {
            let mut r = rng(14);
            for _ in 0..100 {
                let (x, y) = (random_point(&mut r), random_point(&mut r));
                let forward = flat_transport(&triv, &x, &y).unwrap();
                let backward = flat_transport(&triv, &y, &x).unwrap();
                // the conjugate of l_{x→y} is built from the reverse map
                let conj = fibre_map_dagger(&backward, &triv).unwrap();
                let inv = FibreMap::new(x.clone(), y.clone(), inverse(&backward.matrix).unwrap()).unwrap();
                assert!(conj.distance(&forward) <= 1e-10);
                assert!(forward.distance(&inv) <= 1e-10);
                assert!(conj.distance(&inv) <= 1e-10);
            }
        }
    }
}

#[test]
fn morphism_is_unitary_exactly_when_isometric() {
    let tol = 1e-10;
    for triv in trivialization_families(3, 3) {
        let mut r = rng(15);
        let mut negatives = 0;
        for k in 0..100 {
            let points: Vec<Point> = (0..4).map(|_| random_point(&mut r)).collect();
            let negative = k % 3 == 0;
            let family: Vec<FibreMap> = points
                .iter()
                .map(|x| {
                    // a fibre-unitary map is l_x⁻¹ V l_x for a unitary V
                    let l = triv.at(x).unwrap();
                    let l_inv = triv.inverse_at(x).unwrap();
                    let mut v = random_unitary(&mut r, 3);
                    if negative {
                        v[(0, 0)] *= c(1.0 + 1e-3, 0.0);
                    }
                    FibreMap::new(x.clone(), x.clone(), l_inv * v * l).unwrap()
                })
                .collect();
            let pairs: Vec<_> = (0..5).map(|_| (random_vector(&mut r, 3), random_vector(&mut r, 3))).collect();
            let unitary = morphism_unitarity_defect(&family, &triv).unwrap() <= tol;
            let isometric = morphism_isometry_defect(&family, &triv, &pairs).unwrap() <= tol;
            assert_eq!(unitary, isometric, "{triv}, sample {k}");
            assert_eq!(unitary, !negative, "{triv}, sample {k}");
            negatives += usize::from(negative);
        }
        assert!(negatives >= 30);
    }
}
