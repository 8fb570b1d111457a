//! Finite-dimensional C*-subalgebras of `M_N` and their states.
//!
//! An algebra is stored through a basis of Hermitian matrices which is
//! orthonormal for `<a, b> = tr(a* b)`. Because the algebra is closed
//! under adjoints such a basis is simultaneously a real basis of the
//! self-adjoint part and a complex basis of the whole algebra. The first
//! basis element is always `I / sqrt(N)`.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::{
    c, eig_of, gaussian_vector, hs_inner, identity, trace, vnorm, CMatrix, CVector, HermMatrix,
    C64, I,
};

/// Relative residual above which a matrix is declared outside the algebra.
pub const MEMBERSHIP_TOL: f64 = 1e-8;
const INDEPENDENCE_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct FiniteAlgebra {
    ambient_dim: usize,
    basis: Vec<CMatrix>,
}

/// Adds the Hermitian matrix `h` to `basis` by Gram-Schmidt. Returns whether it was new.
fn push_orthonormal(basis: &mut Vec<CMatrix>, h: &CMatrix) -> bool {
    let scale = h.norm().max(1.0);
    let mut r = h.clone();
    // Two passes keep the basis orthonormal to machine precision.
    for _ in 0..2 {
        for b in basis.iter() {
            let p = hs_inner(b, &r).re;
            r -= b.scale(p);
        }
    }
    let nr = r.norm();
    if nr > INDEPENDENCE_TOL * scale {
        basis.push(crate::matrix::hermitian_part(&r).unscale(nr));
        true
    } else {
        false
    }
}

fn hermitian_pieces(m: &CMatrix) -> [CMatrix; 2] {
    let re = (m + m.adjoint()).scale(0.5);
    let im = (m - m.adjoint()) * c(0.0, -0.5);
    [re, im]
}

/// Smallest unital *-subalgebra of `M_n` containing `generators`.
pub fn close_algebra(generators: &[CMatrix], n: usize) -> Result<FiniteAlgebra> {
    let mut basis = vec![identity(n).unscale((n as f64).sqrt())];
    for g in generators {
        if g.shape() != (n, n) {
            return Err(Error::Dimension(format!(
                "generator has shape {:?}, expected {n}x{n}",
                g.shape()
            )));
        }
        for h in hermitian_pieces(g) {
            push_orthonormal(&mut basis, &h);
        }
    }
    let mut start = 0;
    loop {
        let len = basis.len();
        for i in 0..len {
            for j in start.max(i)..len {
                let p = &basis[i] * &basis[j];
                for h in hermitian_pieces(&p) {
                    push_orthonormal(&mut basis, &h);
                }
            }
        }
        if basis.len() == len {
            break;
        }
        start = len;
        if basis.len() > n * n {
            return Err(Error::Contract("algebra closure exceeded N^2".into()));
        }
    }
    Ok(FiniteAlgebra {
        ambient_dim: n,
        basis,
    })
}

impl FiniteAlgebra {
    /// Full matrix algebra `M_n`.
    pub fn full(n: usize) -> Self {
        let mut gens = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let mut e = CMatrix::zeros(n, n);
                e[(i, j)] = c(1.0, 0.0);
                gens.push(e);
            }
        }
        let mut basis = vec![identity(n).unscale((n as f64).sqrt())];
        for g in &gens {
            for h in hermitian_pieces(g) {
                push_orthonormal(&mut basis, &h);
            }
        }
        FiniteAlgebra {
            ambient_dim: n,
            basis,
        }
    }

    /// Diagonal matrices in `M_n`, a copy of `C^n`.
    pub fn diagonal(n: usize) -> Self {
        let mut basis = vec![identity(n).unscale((n as f64).sqrt())];
        for i in 0..n {
            let mut e = CMatrix::zeros(n, n);
            e[(i, i)] = c(1.0, 0.0);
            push_orthonormal(&mut basis, &e);
        }
        FiniteAlgebra {
            ambient_dim: n,
            basis,
        }
    }

    /// Orthonormalizes a spanning set without closing it. The caller
    /// guarantees that the span is a unital *-algebra; [`Self::check_closed`]
    /// verifies it.
    pub fn from_spanning_set(span: &[CMatrix], n: usize) -> Result<Self> {
        let mut basis = vec![identity(n).unscale((n as f64).sqrt())];
        for g in span {
            if g.shape() != (n, n) {
                return Err(Error::Dimension(format!(
                    "spanning element has shape {:?}, expected {n}x{n}",
                    g.shape()
                )));
            }
            for h in hermitian_pieces(g) {
                push_orthonormal(&mut basis, &h);
            }
        }
        Ok(FiniteAlgebra {
            ambient_dim: n,
            basis,
        })
    }

    /// Wraps an already orthonormal Hermitian basis, validating it.
    pub fn from_orthonormal_basis(basis: Vec<CMatrix>, n: usize) -> Result<Self> {
        if basis.is_empty() {
            return Err(Error::Validation("empty basis".into()));
        }
        for (k, b) in basis.iter().enumerate() {
            if b.shape() != (n, n) {
                return Err(Error::Parse {
                    pointer: format!("/basis/{k}"),
                    message: format!("shape {:?}, expected {n}x{n}", b.shape()),
                });
            }
            if crate::matrix::hermitian_defect(b) > 1e-10 {
                return Err(Error::Parse {
                    pointer: format!("/basis/{k}"),
                    message: "basis element is not Hermitian".into(),
                });
            }
        }
        for i in 0..basis.len() {
            for j in 0..=i {
                let g = hs_inner(&basis[i], &basis[j]);
                let want = if i == j { 1.0 } else { 0.0 };
                if (g - c(want, 0.0)).norm() > 1e-9 {
                    return Err(Error::Parse {
                        pointer: format!("/basis/{i}"),
                        message: format!("basis is not orthonormal against element {j}"),
                    });
                }
            }
        }
        let alg = FiniteAlgebra {
            ambient_dim: n,
            basis,
        };
        if alg.residual(&identity(n)) > MEMBERSHIP_TOL {
            return Err(Error::Validation("algebra does not contain the identity".into()));
        }
        Ok(alg)
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Hermitian, Hilbert-Schmidt orthonormal basis.
    pub fn basis(&self) -> &[CMatrix] {
        &self.basis
    }

    /// Real basis of the self-adjoint part; its size equals [`Self::dim`].
    pub fn sa_basis(&self) -> Vec<HermMatrix> {
        self.basis.iter().map(HermMatrix::from_part).collect()
    }

    /// Orthogonal projection onto the algebra.
    pub fn project(&self, a: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(self.ambient_dim, self.ambient_dim);
        for b in &self.basis {
            out += b * hs_inner(b, a);
        }
        out
    }

    /// `|a - P a|_F / max(1, |a|_F)`.
    pub fn residual(&self, a: &CMatrix) -> f64 {
        (a - self.project(a)).norm() / a.norm().max(1.0)
    }

    pub fn contains(&self, a: &CMatrix) -> bool {
        a.shape() == (self.ambient_dim, self.ambient_dim) && self.residual(a) <= MEMBERSHIP_TOL
    }

    /// Real coordinates of a self-adjoint element.
    pub fn sa_coords(&self, a: &CMatrix) -> DVector<f64> {
        DVector::from_iterator(self.dim(), self.basis.iter().map(|b| hs_inner(b, a).re))
    }

    /// Element with the given real coordinates.
    pub fn from_sa_coords(&self, x: &[f64]) -> CMatrix {
        let mut out = CMatrix::zeros(self.ambient_dim, self.ambient_dim);
        for (b, &xi) in self.basis.iter().zip(x) {
            if xi != 0.0 {
                out += b.scale(xi);
            }
        }
        out
    }

    /// Largest closure defect `|P(b_i b_j) - b_i b_j|` over basis pairs.
    pub fn closure_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.dim() {
            for j in i..self.dim() {
                let p = &self.basis[i] * &self.basis[j];
                worst = worst.max((&p - self.project(&p)).norm());
            }
        }
        worst
    }

    pub fn check_closed(&self) -> Result<()> {
        let d = self.closure_defect();
        if d > 1e-8 {
            return Err(Error::Validation(format!(
                "span is not closed under products (defect {d:.3e})"
            )));
        }
        Ok(())
    }

    /// Random self-adjoint element with Gaussian coordinates.
    pub fn random_sa<R: Rng + ?Sized>(&self, rng: &mut R) -> CMatrix {
        let x: Vec<f64> = (0..self.dim())
            .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
            .collect();
        self.from_sa_coords(&x)
    }

    /// Random element `a + i b` with `a, b` from [`Self::random_sa`].
    pub fn random_element<R: Rng + ?Sized>(&self, rng: &mut R) -> CMatrix {
        self.random_sa(rng) + self.random_sa(rng) * I
    }
}

/// A state, stored as a density matrix on the ambient space.
#[derive(Clone, Debug, PartialEq)]
pub struct AlgState {
    rho: CMatrix,
}

impl AlgState {
    pub fn new(rho: CMatrix) -> Result<Self> {
        let h = HermMatrix::new(rho)?;
        let tr = trace(&h).re;
        if (tr - 1.0).abs() > 1e-10 {
            return Err(Error::Validation(format!("density matrix has trace {tr}")));
        }
        let lmin = eig_of(&h).min();
        if lmin < -1e-10 {
            return Err(Error::Validation(format!(
                "density matrix has eigenvalue {lmin:.3e}"
            )));
        }
        Ok(AlgState {
            rho: h.into_matrix(),
        })
    }

    pub fn density(&self) -> &CMatrix {
        &self.rho
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    /// `tr(rho a)`.
    pub fn eval(&self, a: &CMatrix) -> C64 {
        // tr(rho a) = sum_ij rho_ij a_ji
        let n = self.rho.nrows();
        let mut s = C64::new(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                s += self.rho[(i, j)] * a[(j, i)];
            }
        }
        s
    }

    /// `t * self + (1 - t) * other`.
    pub fn mix(&self, other: &AlgState, t: f64) -> AlgState {
        AlgState {
            rho: self.rho.scale(t) + other.rho.scale(1.0 - t),
        }
    }

    /// Embeds a state on `C^k` into `C^n` at the given offset.
    pub fn embed(&self, n: usize, offset: usize) -> AlgState {
        let mut rho = CMatrix::zeros(n, n);
        rho.view_mut((offset, offset), self.rho.shape())
            .copy_from(&self.rho);
        AlgState { rho }
    }
}

/// Vector state `a -> <xi, a xi> / |xi|^2`.
pub fn pure_state(xi: &CVector) -> Result<AlgState> {
    let nx = vnorm(xi);
    if nx <= 1e-300 || !nx.is_finite() {
        return Err(Error::Domain("pure state of the zero vector".into()));
    }
    let u = xi.unscale(nx);
    Ok(AlgState {
        rho: &u * u.adjoint(),
    })
}

/// Hilbert-Schmidt random density matrix, deterministic in `seed`.
pub fn random_state(alg: &FiniteAlgebra, seed: u64) -> AlgState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_state_rng(alg.ambient_dim(), &mut rng)
}

pub fn random_state_rng<R: Rng + ?Sized>(n: usize, rng: &mut R) -> AlgState {
    let g = CMatrix::from_fn(n, n, |_, _| {
        let v = gaussian_vector(1, rng);
        v[0]
    });
    let rho = &g * g.adjoint();
    let tr = trace(&rho).re;
    AlgState {
        rho: crate::matrix::hermitian_part(&rho.unscale(tr)),
    }
}

/// Haar-random pure state.
pub fn random_pure_state<R: Rng + ?Sized>(n: usize, rng: &mut R) -> AlgState {
    pure_state(&crate::matrix::random_unit_vector(n, rng)).expect("unit vector")
}

/// Pure state on the `k`-th standard basis vector.
pub fn basis_state(n: usize, k: usize) -> AlgState {
    let mut e = CVector::zeros(n);
    e[k] = c(1.0, 0.0);
    pure_state(&e).expect("basis vector")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{pauli_x, pauli_z};

    #[test]
    fn closure_dimensions() {
        assert_eq!(close_algebra(&[], 2).unwrap().dim(), 1);
        let mut p = CMatrix::zeros(2, 2);
        p[(0, 0)] = c(1.0, 0.0);
        assert_eq!(close_algebra(&[p], 2).unwrap().dim(), 2);
        let m2 = close_algebra(&[pauli_x(), pauli_z()], 2).unwrap();
        assert_eq!(m2.dim(), 4);
        assert!(m2.closure_defect() < 1e-12);
        assert_eq!(m2.sa_basis().len(), 4);
    }

    #[test]
    fn membership() {
        let d = FiniteAlgebra::diagonal(3);
        assert!(d.contains(&CMatrix::from_diagonal(&CVector::from_vec(vec![
            c(1., 0.),
            c(2., 1.),
            c(0., 0.)
        ]))));
        let mut off = CMatrix::zeros(3, 3);
        off[(0, 1)] = c(1.0, 0.0);
        assert!(!d.contains(&off));
    }

    #[test]
    fn basis_is_orthonormal() {
        let a = FiniteAlgebra::full(3);
        assert_eq!(a.dim(), 9);
        let again = FiniteAlgebra::from_orthonormal_basis(a.basis().to_vec(), 3).unwrap();
        assert_eq!(again, a);
    }

    #[test]
    fn pure_state_rejects_zero() {
        assert!(pure_state(&CVector::zeros(2)).is_err());
    }

    #[test]
    fn random_state_is_valid_and_seeded() {
        let a = FiniteAlgebra::full(4);
        let s = random_state(&a, 7);
        assert!(AlgState::new(s.density().clone()).is_ok());
        assert_eq!(s, random_state(&a, 7));
    }
}
