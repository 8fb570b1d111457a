use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use specprop::algebra::{random_pure_state, FiniteAlgebra};
use specprop::covariant::{kato_check, ProperMonoidGrid};
use specprop::fixtures;
use specprop::io;
use specprop::kantorovich::{dnorm, dual_dnorm, mk_distance, SolveOptions};
use specprop::matrix::{c, op_norm, random_hermitian, random_unit_vector, CMatrix, HermMatrix};
use specprop::qtorus::{gammas, weyl, window_lip_of, Coefficients, FuzzyTorusSpec};
use specprop::triple::{lip, FiniteSpectralTriple};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn weyl_operators_commute_up_to_phase(m in 3usize..8, k in 0usize..8, z in prop::array::uniform2(-3i64..=3), w in prop::array::uniform2(-3i64..=3)) {
        let spec = FuzzyTorusSpec::planar(m, k as f64 / m as f64).unwrap();
        let (z, w) = (z.map(|v| v.rem_euclid(m as i64)), w.map(|v| v.rem_euclid(m as i64)));
        let (a, b) = (weyl(&spec, &z), weyl(&spec, &w));
        let defect = &a * &b - (&b * &a) * spec.commutation_phase(&z, &w);
        prop_assert!(max_abs(&defect) <= 1e-10);
        let n = a.nrows();
        prop_assert!(max_abs(&(a.adjoint() * &a - CMatrix::identity(n, n))) <= 1e-10);
    }

    #[test]
    fn clifford_relations_hold(d in 1usize..6) {
        prop_assert!(gammas(d).residual() <= 1e-12);
    }

    #[test]
    fn mk_distance_is_a_metric(seed in any::<u64>()) {
        let mut r = rng(seed);
        let t = fixtures::random_small_triple(&mut r);
        let sn = t.seminorm();
        let n = t.hilbert_dim();
        let s: Vec<_> = (0..3).map(|_| random_pure_state(n, &mut r)).collect();
        let o = SolveOptions::default();
        let d = |i: usize, j: usize| mk_distance(&sn, &s[i], &s[j], &o).unwrap().value;
        let (d01, d10, d12, d02) = (d(0, 1), d(1, 0), d(1, 2), d(0, 2));
        prop_assert!((d01 - d10).abs() <= 1e-6 * (1.0 + d01));
        prop_assert!(d02 <= d01 + d12 + 1e-6 * (1.0 + d02));
        prop_assert!(d01 >= -1e-9);
    }

    #[test]
    fn lip_vanishes_on_scalars(seed in any::<u64>(), lambda in -5.0f64..5.0) {
        let mut r = rng(seed);
        let t = fixtures::random_small_triple(&mut r);
        let n = t.hilbert_dim();
        let a = t.alg.sa_basis()[0].as_matrix().clone();
        let shifted = &a + CMatrix::identity(n, n) * c(lambda, 0.0);
        let (la, ls) = (lip(&t, &a).unwrap(), lip(&t, &shifted).unwrap());
        prop_assert!((la - ls).abs() <= 1e-9 * (1.0 + la));
        prop_assert!(lip(&t, &CMatrix::identity(n, n)).unwrap() <= 1e-12);
    }

    #[test]
    fn dual_dnorm_bounds_pairings(seed in any::<u64>(), n in 2usize..6) {
        let mut r = rng(seed);
        let d = random_hermitian(n, &mut r);
        let v = random_unit_vector(n, &mut r);
        let dual = dual_dnorm(&v, &d);
        prop_assert!((dnorm(d.as_matrix(), &dual.maximizer) - 1.0).abs() <= 1e-8);
        for _ in 0..20 {
            let xi = random_unit_vector(n, &mut r);
            prop_assert!(v.dotc(&xi).norm() <= dual.value * dnorm(d.as_matrix(), &xi) * (1.0 + 1e-9) + 1e-12);
        }
    }

    #[test]
    fn triples_survive_a_json_round_trip(seed in any::<u64>(), n in 1usize..5, full in any::<bool>()) {
        let mut r = rng(seed);
        let alg = if full { FiniteAlgebra::full(n) } else { FiniteAlgebra::diagonal(n) };
        let t = FiniteSpectralTriple::new(alg, random_hermitian(n, &mut r)).unwrap();
        let back = io::triple_from_json(&io::triple_to_json(&t, Some("p"))).unwrap();
        prop_assert_eq!(back.triple.dirac.as_matrix(), t.dirac.as_matrix());
        prop_assert_eq!(back.triple.alg.dim(), t.alg.dim());
        prop_assert_eq!(back.name.as_deref(), Some("p"));
    }

    #[test]
    fn kato_bound_holds(seed in any::<u64>(), scale in 0.001f64..0.2) {
        let mut r = rng(seed);
        let t = fixtures::random_small_triple(&mut r);
        let p = random_hermitian(t.hilbert_dim(), &mut r);
        let p = HermMatrix::from_part(&p.as_matrix().scale(scale / op_norm(p.as_matrix())));
        let times: Vec<f64> = (0..21).map(|k| -5.0 + 0.5 * k as f64).collect();
        let rep = kato_check(&t.dirac, &p, &times, 10, seed).unwrap();
        prop_assert!(rep.worst_slack >= -1e-9);
    }

    #[test]
    fn monoid_metrics_are_left_invariant(step in 0.05f64..1.0, order in 2i64..12) {
        prop_assert!(ProperMonoidGrid::reals(step, 20.0 * step).left_invariance_defect(5.0 * step) <= 1e-12);
        prop_assert!(ProperMonoidGrid::cyclic(order, 1.0).left_invariance_defect(1.0) <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn window_seminorm_grows_with_the_window(k in 0usize..7, a in -1.0f64..1.0, b in -1.0f64..1.0) {
        let spec = FuzzyTorusSpec::planar(7, k as f64 / 7.0).unwrap();
        let p: Coefficients = vec![(vec![1, 0], c(a, 0.0)), (vec![6, 0], c(a, 0.0)), (vec![1, 1], c(b, 0.5)), (vec![6, 6], c(b, -0.5))];
        let mut prev = 0.0;
        for radius in 0..3 {
            let l = window_lip_of(&spec, &p, radius).unwrap();
            prop_assert!(l >= prev - 1e-10);
            prev = l;
        }
    }
}
