//! Property suite for the operator algebra: the normal-ordering identities
//! hold against the matrix oracle for arbitrary inputs, not just the
//! hand-picked cases.

use num_complex::Complex64;
use proptest::prelude::*;

use qduffing::NoPoly;

const DIM: usize = 48;

/// Largest ladder amplitude a monomial reaches at the test truncation; the
/// random coefficients are scaled by its inverse so compared matrix entries
/// stay O(1) and absolute tolerances are meaningful.
fn amp_max(j: u32, k: u32) -> f64 {
    let mut best = 1.0f64;
    for col in (k as usize)..DIM {
        let row = col - k as usize + j as usize;
        if row >= DIM {
            continue;
        }
        let mut amp = 1.0;
        let mut n = col;
        for _ in 0..k {
            amp *= (n as f64).sqrt();
            n -= 1;
        }
        for _ in 0..j {
            amp *= (n as f64 + 1.0).sqrt();
            n += 1;
        }
        best = best.max(amp);
    }
    best
}

fn monomial() -> impl Strategy<Value = ((u32, u32), Complex64)> {
    (0u32..=4, 0u32..=4, -1.0f64..1.0, -1.0f64..1.0)
        .prop_filter("degree <= 4", |(j, k, _, _)| j + k <= 4)
        .prop_map(|(j, k, re, im)| ((j, k), Complex64::new(re, im) / amp_max(j, k)))
}

fn poly() -> impl Strategy<Value = NoPoly> {
    proptest::collection::vec(monomial(), 1..=4).prop_map(NoPoly::from_terms)
}

fn coeff_distance(a: &NoPoly, b: &NoPoly) -> f64 {
    a.sub(b).max_coeff()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn product_matches_matrix_oracle(p in poly(), q in poly()) {
        let guard = (p.degree() + q.degree()) as usize;
        let sym = p.no_product(&q).to_matrix(DIM).unwrap();
        let num = p.to_matrix(DIM).unwrap().product(&q.to_matrix(DIM).unwrap()).unwrap();
        prop_assert!(sym.sub(&num).unwrap().interior_max_abs(guard) < 1e-10);
    }

    #[test]
    fn product_degree_bound(p in poly(), q in poly()) {
        prop_assert!(p.no_product(&q).degree() <= p.degree() + q.degree());
    }

    #[test]
    fn product_bilinear(p in poly(), q in poly(), r in poly(),
                        a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let ca = Complex64::new(a, -b);
        let cb = Complex64::new(b, a);
        let lhs = p.scale(ca).add(&q.scale(cb)).no_product(&r);
        let rhs = p.no_product(&r).scale(ca).add(&q.no_product(&r).scale(cb));
        prop_assert!(coeff_distance(&lhs, &rhs) < 1e-12);
    }

    #[test]
    fn product_associative(p in poly(), q in poly(), r in poly()) {
        let lhs = p.no_product(&q).no_product(&r);
        let rhs = p.no_product(&q.no_product(&r));
        prop_assert!(coeff_distance(&lhs, &rhs) < 1e-11);
    }

    #[test]
    fn adjoint_involution(p in poly()) {
        prop_assert_eq!(p.adjoint().adjoint(), p);
    }

    #[test]
    fn adjoint_antihomomorphism(p in poly(), q in poly()) {
        let lhs = p.no_product(&q).adjoint();
        let rhs = q.adjoint().no_product(&p.adjoint());
        prop_assert!(coeff_distance(&lhs, &rhs) < 1e-12);
    }

    #[test]
    fn adjoint_matrix_is_conjugate_transpose(p in poly()) {
        let guard = p.degree() as usize;
        let lhs = p.adjoint().to_matrix(DIM).unwrap();
        let rhs = p.to_matrix(DIM).unwrap().adjoint();
        prop_assert!(lhs.sub(&rhs).unwrap().interior_max_abs(guard) < 1e-12);
    }

    #[test]
    fn commutator_antisymmetric(p in poly(), q in poly()) {
        let sum = p.commutator(&q).add(&q.commutator(&p));
        prop_assert!(sum.max_coeff() < 1e-12);
    }

    #[test]
    fn jacobi_identity(p in poly(), q in poly(), r in poly()) {
        let total = p.commutator(&q).commutator(&r)
            .add(&q.commutator(&r).commutator(&p))
            .add(&r.commutator(&p).commutator(&q));
        prop_assert!(total.max_coeff() < 1e-11);
    }

    #[test]
    fn wronskian_normalized_for_any_coupling(lambda in 0.0f64..2.0, t in 0.0f64..20.0) {
        let sol = qduffing::meanfield::solve_omega(
            qduffing::PhysParams::standard(lambda).unwrap()
        ).unwrap();
        let w = sol.mode_at(t).wronskian();
        prop_assert!((w - Complex64::new(0.0, 1.0)).norm() < 1e-12);
    }
}
