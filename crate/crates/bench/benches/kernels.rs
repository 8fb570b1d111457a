use criterion::{black_box, criterion_group, criterion_main, Criterion};

use specprop::algebra::basis_state;
use specprop::fixtures;
use specprop::kantorovich::{dual_dnorm, mk_distance, SolveOptions};
use specprop::matrix::{c, CVector, HermMatrix};
use specprop::qtorus::{test_elements, window_lip_of, FuzzyTorusSpec};
use specprop::tunnel::{extent_estimate, perturbation_tunnel, ExtentOptions};

fn kernels(cr: &mut Criterion) {
    let opts = SolveOptions::default();

    let path = fixtures::path4();
    let sn = path.seminorm();
    let (a, b) = (basis_state(4, 0), basis_state(4, 3));
    cr.bench_function("mk_distance/path4", |bn| bn.iter(|| mk_distance(black_box(&sn), &a, &b, &opts).unwrap()));

    let spin = fixtures::spin4();
    let v = CVector::from_fn(4, |i, _| c(1.0 + i as f64, 0.5 * i as f64));
    cr.bench_function("dual_dnorm/spin4", |bn| bn.iter(|| dual_dnorm(black_box(&v), &spin.dirac)));

    let spec = FuzzyTorusSpec::planar(48, 0.25).unwrap();
    let elements = test_elements(2);
    let harper = &elements.iter().find(|(n, _)| n == "harper").unwrap().1;
    cr.bench_function("window_lip_of/m48", |bn| bn.iter(|| window_lip_of(black_box(&spec), harper, 1).unwrap()));

    let two = fixtures::two_point(1.0);
    let pert = HermMatrix::from_part(&two.dirac.as_matrix().scale(0.02));
    let (tunnel, _) = perturbation_tunnel(&two, &pert, &opts).unwrap();
    let eo = ExtentOptions {
        n_outer: 8,
        n_restarts: 1,
        ascent_steps: 2,
        ..Default::default()
    };
    let mut g = cr.benchmark_group("extent");
    g.sample_size(10);
    g.bench_function("extent_estimate/two_point", |bn| bn.iter(|| extent_estimate(black_box(&tunnel), &eo, &opts).unwrap()));
    g.finish();
}

criterion_group!(benches, kernels);
criterion_main!(benches);
