//! Named example triples.

use rand::Rng;

use crate::algebra::{close_algebra, FiniteAlgebra};
use crate::matrix::{c, direct_sum, kron, pauli_x, pauli_y, pauli_z, random_hermitian, CMatrix, HermMatrix};
use crate::triple::FiniteSpectralTriple;

/// `C^2` as diagonal matrices, `D = sigma_x / d`; the two points are at distance `d`.
pub fn two_point(d: f64) -> FiniteSpectralTriple {
    FiniteSpectralTriple::new(
        FiniteAlgebra::diagonal(2),
        HermMatrix::from_part(&pauli_x().unscale(d)),
    )
    .expect("matching dimensions")
}

/// `C^4` as diagonal matrices with a weighted path graph as Dirac operator.
pub fn path4() -> FiniteSpectralTriple {
    let w = [1.0, 0.5, 0.8];
    let mut d = CMatrix::zeros(4, 4);
    for (k, &wk) in w.iter().enumerate() {
        d[(k, k + 1)] = c(wk, 0.0);
        d[(k + 1, k)] = c(wk, 0.0);
    }
    FiniteSpectralTriple::new(FiniteAlgebra::diagonal(4), HermMatrix::from_part(&d)).expect("matching dimensions")
}

/// `M_2 (x) 1` on `C^2 (x) C^2` with `D = sx(x)sx + sy(x)sy + sz(x)sz / 2`.
pub fn spin4() -> FiniteSpectralTriple {
    let i2 = CMatrix::identity(2, 2);
    let alg = close_algebra(&[kron(&pauli_x(), &i2), kron(&pauli_z(), &i2)], 4).expect("closure");
    let d = kron(&pauli_x(), &pauli_x()) + kron(&pauli_y(), &pauli_y()) + kron(&pauli_z(), &pauli_z()).scale(0.5);
    FiniteSpectralTriple::new(alg, HermMatrix::from_part(&d)).expect("matching dimensions")
}

/// All named fixtures, with their file stems.
pub fn named() -> Vec<(&'static str, FiniteSpectralTriple)> {
    vec![
        ("two_point", two_point(1.0)),
        ("path4", path4()),
        ("spin4", spin4()),
    ]
}

/// A random triple on `C^2` or `C^3`: diagonal `C^2`, diagonal `C^3`, or
/// `M_2 + C` inside `M_3`, with a GUE Dirac operator. Generic draws are metric.
pub fn random_small_triple<R: Rng + ?Sized>(rng: &mut R) -> FiniteSpectralTriple {
    let kind = rng.gen_range(0..3);
    let (alg, n) = match kind {
        0 => (FiniteAlgebra::diagonal(2), 2),
        1 => (FiniteAlgebra::diagonal(3), 3),
        _ => {
            let mut p = CMatrix::zeros(1, 1);
            p[(0, 0)] = c(1.0, 0.0);
            let gx = direct_sum(&pauli_x(), &CMatrix::zeros(1, 1));
            let gz = direct_sum(&pauli_z(), &CMatrix::zeros(1, 1));
            let e = direct_sum(&CMatrix::zeros(2, 2), &p);
            (close_algebra(&[gx, gz, e], 3).expect("closure"), 3)
        }
    };
    let d = random_hermitian(n, rng);
    FiniteSpectralTriple::new(alg, d).expect("matching dimensions")
}

/// Random triple on `C^n` with `n <= max_dim`: diagonal algebra or a block
/// algebra `M_2 (x) 1_k + C^r`, GUE Dirac operator.
pub fn random_triple<R: Rng + ?Sized>(rng: &mut R, max_dim: usize) -> FiniteSpectralTriple {
    let n = rng.gen_range(2..=max_dim.max(2));
    let alg = if n >= 3 && rng.gen_bool(0.5) {
        let mut gens = vec![];
        let rest = n - 2;
        gens.push(direct_sum(&pauli_x(), &CMatrix::zeros(rest, rest)));
        gens.push(direct_sum(&pauli_z(), &CMatrix::zeros(rest, rest)));
        for k in 0..rest {
            let mut e = CMatrix::zeros(n, n);
            e[(2 + k, 2 + k)] = c(1.0, 0.0);
            gens.push(e);
        }
        close_algebra(&gens, n).expect("closure")
    } else {
        FiniteAlgebra::diagonal(n)
    };
    FiniteSpectralTriple::new(alg, random_hermitian(n, rng)).expect("matching dimensions")
}
