//! Monge-Kantorovich distances and related convex programs.
//!
//! Seminorms are described declaratively by a [`SeminormSpec`]: a list of
//! Hermitian coordinate matrices and a list of weighted spectral-norm
//! terms, each linear in the coordinates. Every program is handed to the
//! interior-point solver in [`cone`].

pub mod cone;
mod module;
pub mod oracle;

pub use module::{realify, AffineVec, BallAux, Coupling, DBlock, MaxDNorm};
pub(crate) use module::{from_real, to_real};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::algebra::{AlgState, FiniteAlgebra};
use crate::error::{Error, Result};
use crate::matrix::{
    commutator, herm_eig, hs_inner, op_norm, vinner, vnorm, CMatrix, CVector, HermMatrix,
};
use cone::{norm_ball_lmi, ConeProgram, ConeSettings, ConeStats, Lmi};

/// Relative threshold on Gram eigenvalues below which a direction is
/// treated as lying in the kernel of a seminorm.
const KERNEL_REL_TOL: f64 = 1e-12;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub restarts: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-10,
            max_iter: 2000,
            seed: 0x5eed,
            restarts: 4,
        }
    }
}

impl SolveOptions {
    pub fn settings(&self) -> ConeSettings {
        ConeSettings {
            gap_tol: self.tol,
            rel_gap_tol: self.tol,
            max_newton: self.max_iter,
            ..ConeSettings::default()
        }
    }
}

/// Per-solve record, serialized into run manifests.
#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct Diagnostics {
    pub iterations: usize,
    pub outer_iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub duality_gap: f64,
    pub converged: bool,
}

impl Diagnostics {
    pub fn from_cone(s: &ConeStats) -> Self {
        Diagnostics {
            iterations: s.newton_steps,
            outer_iterations: s.outer_steps,
            primal_residual: (-s.min_slack).max(0.0),
            dual_residual: s.newton_decrement,
            duality_gap: s.duality_gap,
            converged: s.converged,
        }
    }
}

/// `weight * | sum_i x_i images[i] |`.
#[derive(Clone, Debug)]
pub struct NormTerm {
    pub label: String,
    pub weight: f64,
    pub rows: usize,
    pub cols: usize,
    pub images: Vec<(usize, CMatrix)>,
}

impl NormTerm {
    /// `| [D, a] |` for `a` expanded in `basis`, coordinates starting at `offset`.
    pub fn commutator(label: &str, d: &CMatrix, basis: &[CMatrix], offset: usize) -> Self {
        let images = basis
            .iter()
            .enumerate()
            .map(|(i, b)| (offset + i, commutator(d, b)))
            .collect();
        NormTerm {
            label: label.into(),
            weight: 1.0,
            rows: d.nrows(),
            cols: d.ncols(),
            images,
        }
    }

    pub fn linear(label: &str, weight: f64, rows: usize, cols: usize, images: Vec<(usize, CMatrix)>) -> Self {
        NormTerm {
            label: label.into(),
            weight,
            rows,
            cols,
            images,
        }
    }

    pub fn matrix_at(&self, x: &[f64]) -> CMatrix {
        let mut m = CMatrix::zeros(self.rows, self.cols);
        for (i, img) in &self.images {
            if x[*i] != 0.0 {
                m += img.scale(x[*i]);
            }
        }
        m
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.weight * op_norm(&self.matrix_at(x))
    }
}

/// A seminorm `L(x) = max_k terms[k](x)` on real coordinates `x`, whose
/// coordinate `i` stands for the Hermitian matrix `basis[i]`.
#[derive(Clone, Debug)]
pub struct SeminormSpec {
    pub basis: Vec<CMatrix>,
    pub terms: Vec<NormTerm>,
}

/// Splitting of coordinate space into the kernel of a seminorm and its
/// orthogonal complement.
#[derive(Clone, Debug)]
pub struct Reduction {
    pub range: DMatrix<f64>,
    pub kernel: DMatrix<f64>,
    pub singular_values: Vec<f64>,
}

impl SeminormSpec {
    /// `a -> |[D, a]|` on the self-adjoint part of `alg`.
    pub fn commutator(alg: &FiniteAlgebra, d: &HermMatrix) -> Self {
        SeminormSpec {
            basis: alg.basis().to_vec(),
            terms: vec![NormTerm::commutator("commutator", d, alg.basis(), 0)],
        }
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.first().map_or(0, |b| b.nrows())
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|t| t.value(x)).fold(0.0, f64::max)
    }

    /// Coordinates of a self-adjoint matrix, assuming an orthonormal basis.
    pub fn coords(&self, a: &CMatrix) -> Vec<f64> {
        self.basis.iter().map(|b| hs_inner(b, a).re).collect()
    }

    pub fn element(&self, x: &[f64]) -> CMatrix {
        let n = self.ambient_dim();
        let mut m = CMatrix::zeros(n, n);
        for (b, &xi) in self.basis.iter().zip(x) {
            if xi != 0.0 {
                m += b.scale(xi);
            }
        }
        m
    }

    pub fn value_of(&self, a: &CMatrix) -> f64 {
        self.value(&self.coords(a))
    }

    /// Linear functional `x -> Re phi(sum x_i b_i)`.
    pub fn functional(&self, phi: &AlgState) -> DVector<f64> {
        DVector::from_iterator(self.dim(), self.basis.iter().map(|b| phi.eval(b).re))
    }

    /// Real Gram matrix of the stacked term maps.
    pub fn gram(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut g = DMatrix::zeros(n, n);
        for t in &self.terms {
            let w2 = t.weight * t.weight;
            for (a, (i, mi)) in t.images.iter().enumerate() {
                for (j, mj) in t.images.iter().skip(a) {
                    let v = w2 * hs_inner(mi, mj).re;
                    g[(*i, *j)] += v;
                    if i != j {
                        g[(*j, *i)] += v;
                    }
                }
            }
        }
        g
    }

    pub fn reduction(&self) -> Reduction {
        let n = self.dim();
        let se = SymmetricEigen::new(self.gram());
        let lmax = se.eigenvalues.iter().fold(0.0f64, |a, &v| a.max(v));
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));
        let mut kern = vec![];
        let mut rng = vec![];
        for &k in &order {
            if se.eigenvalues[k] <= KERNEL_REL_TOL * lmax || lmax == 0.0 {
                kern.push(se.eigenvectors.column(k).into_owned());
            } else {
                rng.push(se.eigenvectors.column(k).into_owned());
            }
        }
        let to_mat = |cols: &[DVector<f64>]| {
            if cols.is_empty() {
                DMatrix::zeros(n, 0)
            } else {
                DMatrix::from_columns(cols)
            }
        };
        Reduction {
            range: to_mat(&rng),
            kernel: to_mat(&kern),
            singular_values: order
                .iter()
                .map(|&k| se.eigenvalues[k].max(0.0).sqrt())
                .collect(),
        }
    }

    /// Norm-ball LMIs `term_k(Q y) <= 1` in the reduced variables `y`,
    /// placed at variable indices `offset..offset + Q.ncols()`.
    pub fn reduced_lmis(&self, q: &DMatrix<f64>, offset: usize) -> Vec<Lmi> {
        let mut out = vec![];
        for t in &self.terms {
            let mut images = vec![];
            for j in 0..q.ncols() {
                let mut m = CMatrix::zeros(t.rows, t.cols);
                let mut any = false;
                for (i, mi) in &t.images {
                    let coef = q[(*i, j)];
                    if coef.abs() > 1e-15 {
                        m += mi.scale(coef * t.weight);
                        any = true;
                    }
                }
                if any {
                    images.push((offset + j, m));
                }
            }
            out.push(norm_ball_lmi(None, &images, t.rows, t.cols, 1.0, &[]));
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct MkResult {
    /// Value attained by an exactly feasible witness.
    pub value: f64,
    /// Value plus the solver's duality gap.
    pub upper_bound: f64,
    pub witness: CMatrix,
    pub coords: Vec<f64>,
    pub diagnostics: Diagnostics,
}

/// Maximizes `c . x` over `{x : L(x) <= 1}`. The witness is rescaled to be
/// exactly feasible, so `value` is a certified lower bound.
pub fn maximize_linear(sn: &SeminormSpec, c: &DVector<f64>, opts: &SolveOptions) -> Result<MkResult> {
    let red = sn.reduction();
    let ck = red.kernel.transpose() * c;
    if ck.norm() > 1e-9 * c.norm().max(1.0) {
        return Err(Error::Unbounded(format!(
            "objective has a component of size {:.3e} along the kernel of the seminorm",
            ck.norm()
        )));
    }
    let q = &red.range;
    let r = q.ncols();
    let mut prog = ConeProgram::new(r, q.transpose() * c);
    prog.lmis = sn.reduced_lmis(q, 0);
    let sol = prog.solve(&DVector::zeros(r), &opts.settings())?;
    let mut x = q * &sol.x;
    let l = sn.value(x.as_slice());
    if l > 0.0 {
        x.unscale_mut(l);
    }
    let value = c.dot(&x);
    let xs: Vec<f64> = x.iter().copied().collect();
    Ok(MkResult {
        value,
        upper_bound: value.max(sol.objective) + sol.stats.duality_gap,
        witness: sn.element(&xs),
        coords: xs,
        diagnostics: Diagnostics::from_cone(&sol.stats),
    })
}

/// `sup { |phi(a) - psi(a)| : L(a) <= 1 }`.
pub fn mk_distance(sn: &SeminormSpec, phi: &AlgState, psi: &AlgState, opts: &SolveOptions) -> Result<MkResult> {
    let c = sn.functional(phi) - sn.functional(psi);
    maximize_linear(sn, &c, opts)
}

#[derive(Clone, Debug)]
pub struct QuotientResult {
    pub value: f64,
    /// Full coordinate vector of the best lift found.
    pub lift: Vec<f64>,
    pub diagnostics: Diagnostics,
}

/// `inf { L(x) : x_i = fixed[i] wherever fixed[i] is Some }`.
pub fn quotient_seminorm(sn: &SeminormSpec, fixed: &[Option<f64>], opts: &SolveOptions) -> Result<QuotientResult> {
    let n = sn.dim();
    if fixed.len() != n {
        return Err(Error::Dimension(format!("expected {n} coordinates, got {}", fixed.len())));
    }
    let free: Vec<usize> = (0..n).filter(|&i| fixed[i].is_none()).collect();
    let base: Vec<f64> = fixed.iter().map(|v| v.unwrap_or(0.0)).collect();
    let nf = free.len();
    let u = nf;
    let mut obj = DVector::zeros(nf + 1);
    obj[u] = -1.0;
    let mut prog = ConeProgram::new(nf + 1, obj);
    for t in &sn.terms {
        let m0 = t.matrix_at(&base).scale(t.weight);
        let images: Vec<(usize, CMatrix)> = t
            .images
            .iter()
            .filter_map(|(i, m)| free.iter().position(|f| f == i).map(|p| (p, m.scale(t.weight))))
            .collect();
        prog.lmis
            .push(norm_ball_lmi(Some(&m0), &images, t.rows, t.cols, 0.0, &[(u, 1.0)]));
    }
    let start = sn.value(&base);
    let mut x0 = DVector::zeros(nf + 1);
    x0[u] = 1.0 + 1.5 * start;
    let sol = prog.solve(&x0, &opts.settings())?;
    let mut lift = base.clone();
    for (p, &i) in free.iter().enumerate() {
        lift[i] = sol.x[p];
    }
    Ok(QuotientResult {
        value: sn.value(&lift),
        lift,
        diagnostics: Diagnostics::from_cone(&sol.stats),
    })
}

/// `|xi| + |D xi|`.
pub fn dnorm(d: &CMatrix, xi: &CVector) -> f64 {
    vnorm(xi) + vnorm(&(d * xi))
}

#[derive(Clone, Debug)]
pub struct DualNorm {
    pub value: f64,
    /// Unit vector for the D-norm attaining the supremum.
    pub maximizer: CVector,
}

/// Dual of the D-norm: `sup { |<v, zeta>| : |zeta| + |D zeta| <= 1 }`.
///
/// In the eigenbasis of `D` the squared dual norm equals
/// `max_{m in [0,1]} sum_k |v_k|^2 m (1 - m) / (1 - m + m lambda_k^2)`,
/// a concave one-dimensional problem.
pub fn dual_dnorm(v: &CVector, d: &HermMatrix) -> DualNorm {
    let e = herm_eig(d);
    let w = e.vectors.adjoint() * v;
    let weights: Vec<f64> = w.iter().map(|z| z.norm_sqr()).collect();
    let lam2: Vec<f64> = e.values.iter().map(|l| l * l).collect();
    let g = |m: f64| -> f64 {
        weights
            .iter()
            .zip(&lam2)
            .map(|(&wk, &l2)| {
                let den = 1.0 - m + m * l2;
                if den <= 0.0 {
                    wk * m
                } else {
                    wk * m * (1.0 - m) / den
                }
            })
            .sum()
    };
    let m = golden_max(g, 0.0, 1.0, 1e-14);
    let value = g(m).max(0.0).sqrt();
    let z = CVector::from_iterator(
        w.len(),
        w.iter().zip(&lam2).map(|(wk, &l2)| *wk / (1.0 - m + m * l2).max(1e-150)),
    );
    let mut zeta = &e.vectors * z;
    let dz = dnorm(d, &zeta);
    if dz > 0.0 {
        zeta.unscale_mut(dz);
    }
    // The candidate is exact at the optimum; fall back to the attained value
    // when the dual optimum sits on a degenerate endpoint.
    let attained = vinner(&zeta, v).norm();
    DualNorm {
        value: value.max(attained),
        maximizer: zeta,
    }
}

/// Maximizer of a concave function on `[a, b]` by golden-section search.
pub fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while b - a > tol {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = f(x1);
        }
    }
    let mid = 0.5 * (a + b);
    // Endpoints can win for monotone functions.
    [mid, 0.0f64.max(a), b]
        .into_iter()
        .max_by(|p, q| f(*p).total_cmp(&f(*q)))
        .unwrap_or(mid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::basis_state;
    use crate::matrix::{c, pauli_x};

    fn two_point(d: f64) -> SeminormSpec {
        let alg = FiniteAlgebra::diagonal(2);
        let dir = HermMatrix::new(pauli_x().unscale(d)).unwrap();
        SeminormSpec::commutator(&alg, &dir)
    }

    #[test]
    fn two_point_distance() {
        for d in [0.5, 1.0, 2.0] {
            let r = mk_distance(&two_point(d), &basis_state(2, 0), &basis_state(2, 1), &SolveOptions::default())
                .unwrap();
            assert!((r.value - d).abs() < 1e-7, "d={d} got {}", r.value);
        }
    }

    #[test]
    fn kernel_of_commutator_is_identity() {
        let red = two_point(1.0).reduction();
        assert_eq!(red.kernel.ncols(), 1);
    }

    #[test]
    fn unbounded_when_not_metric() {
        let alg = FiniteAlgebra::diagonal(2);
        let sn = SeminormSpec::commutator(&alg, &HermMatrix::zeros(2));
        let r = mk_distance(&sn, &basis_state(2, 0), &basis_state(2, 1), &SolveOptions::default());
        assert!(matches!(r, Err(Error::Unbounded(_))));
    }

    #[test]
    fn dual_dnorm_examples() {
        let v = CVector::from_vec(vec![c(0.6, 0.0), c(0.0, 0.8)]);
        assert!((dual_dnorm(&v, &HermMatrix::zeros(2)).value - 1.0).abs() < 1e-12);
        let d = HermMatrix::from_real_diagonal(&[3.0]);
        let e1 = CVector::from_vec(vec![c(1.0, 0.0)]);
        assert!((dual_dnorm(&e1, &d).value - 0.25).abs() < 1e-12);
    }

    #[test]
    fn cone_dual_matches_eigen_reduction() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let d = crate::matrix::random_hermitian(3, &mut rng);
        let v = crate::matrix::gaussian_vector(3, &mut rng);
        let exact = dual_dnorm(&v, &d).value;
        let mut mf = MaxDNorm::single(&d);
        mf.blocks[0].offset = 0;
        // Force the cone route by adding an inactive coupling.
        mf.couplings.push(Coupling {
            weight: 1e-3,
            x: CMatrix::identity(3, 3),
            left: 0,
            right: 0,
        });
        let (val, _, _) = mf.dual(&v, &SolveOptions::default()).unwrap();
        assert!((val - exact).abs() < 1e-7, "{val} vs {exact}");
    }

    #[test]
    fn quotient_of_direct_sum() {
        // L(a, b) = max(|a1 - a2|, |b1 - b2|, 10 |a - b|) on C^2 + C^2.
        let mut basis = vec![];
        for k in 0..4 {
            let mut e = CMatrix::zeros(4, 4);
            e[(k, k)] = c(1.0, 0.0);
            basis.push(e);
        }
        let diff = |s: f64, off: usize| -> Vec<(usize, CMatrix)> {
            let mut m0 = CMatrix::zeros(1, 1);
            m0[(0, 0)] = c(s, 0.0);
            vec![(off, m0.clone()), (off + 1, -m0)]
        };
        let mut terms = vec![
            NormTerm::linear("left", 1.0, 1, 1, diff(1.0, 0)),
            NormTerm::linear("right", 1.0, 1, 1, diff(1.0, 2)),
        ];
        let mut img = vec![];
        for k in 0..2 {
            let mut e = CMatrix::zeros(2, 2);
            e[(k, k)] = c(1.0, 0.0);
            img.push((k, e.clone()));
            img.push((k + 2, -e));
        }
        terms.push(NormTerm::linear("bridge", 10.0, 2, 2, img));
        let sn = SeminormSpec { basis, terms };
        let q = quotient_seminorm(&sn, &[Some(1.0), Some(0.0), None, None], &SolveOptions::default()).unwrap();
        assert!((q.value - 1.0).abs() < 1e-7);
    }
}
