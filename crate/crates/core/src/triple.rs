//! Finite spectral triples `(A, C^N, D)` and their Lipschitz seminorms.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::{basis_state, pure_state, random_pure_state, AlgState, FiniteAlgebra};
use crate::error::{Error, Result};
use crate::kantorovich::{maximize_linear, SeminormSpec, SolveOptions};
use crate::matrix::{commutator, herm_eig, op_norm, random_unit_vector, CMatrix, CVector, HermMatrix};

#[derive(Clone, Debug, PartialEq)]
pub struct FiniteSpectralTriple {
    pub alg: FiniteAlgebra,
    pub dirac: HermMatrix,
}

impl FiniteSpectralTriple {
    pub fn new(alg: FiniteAlgebra, dirac: HermMatrix) -> Result<Self> {
        if alg.ambient_dim() != dirac.dim() {
            return Err(Error::Dimension(format!(
                "algebra acts on C^{} but the Dirac operator is {}x{}",
                alg.ambient_dim(),
                dirac.dim(),
                dirac.dim()
            )));
        }
        Ok(FiniteSpectralTriple { alg, dirac })
    }

    pub fn hilbert_dim(&self) -> usize {
        self.dirac.dim()
    }

    pub fn seminorm(&self) -> SeminormSpec {
        SeminormSpec::commutator(&self.alg, &self.dirac)
    }

    /// Same algebra, Dirac operator `D + T`.
    pub fn perturbed(&self, t: &HermMatrix) -> Result<Self> {
        if t.dim() != self.dirac.dim() {
            return Err(Error::Dimension("perturbation has the wrong size".into()));
        }
        Ok(FiniteSpectralTriple {
            alg: self.alg.clone(),
            dirac: HermMatrix::from_part(&(self.dirac.as_matrix() + t.as_matrix())),
        })
    }
}

/// `|[D, a]|`, for `a` in the algebra.
pub fn lip(t: &FiniteSpectralTriple, a: &CMatrix) -> Result<f64> {
    if a.shape() != (t.hilbert_dim(), t.hilbert_dim()) {
        return Err(Error::Dimension(format!("element has shape {:?}", a.shape())));
    }
    let res = t.alg.residual(a);
    if res > crate::algebra::MEMBERSHIP_TOL {
        return Err(Error::Domain(format!(
            "element is not in the algebra (residual {res:.3e})"
        )));
    }
    Ok(op_norm(&commutator(t.dirac.as_matrix(), a)))
}

/// `|xi| + |D xi|`.
pub fn dnorm(t: &FiniteSpectralTriple, xi: &CVector) -> f64 {
    crate::kantorovich::dnorm(t.dirac.as_matrix(), xi)
}

/// Worst sampled slack of a Leibniz-type inequality (`rhs - lhs`).
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SlackReport {
    pub samples: usize,
    pub worst_slack: f64,
    pub worst_sample: usize,
    pub seed: u64,
}

impl SlackReport {
    pub(crate) fn new(seed: u64) -> Self {
        SlackReport {
            samples: 0,
            worst_slack: f64::INFINITY,
            worst_sample: 0,
            seed,
        }
    }

    pub(crate) fn record(&mut self, slack: f64) {
        if slack < self.worst_slack {
            self.worst_slack = slack;
            self.worst_sample = self.samples;
        }
        self.samples += 1;
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.worst_slack >= -tol
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct MetricReport {
    pub kernel_dim: usize,
    /// Singular values of `a -> [D, a]` on the self-adjoint part, ascending.
    pub singular_values: Vec<f64>,
    pub is_metric: bool,
    pub leibniz: SlackReport,
    pub module_leibniz: SlackReport,
}

/// Ratio below which a singular value of the commutator map counts as zero.
pub const KERNEL_GAP: f64 = 1e-6;

/// Checks that `{a : [D, a] = 0}` is one-dimensional and samples the
/// Leibniz inequalities
/// `L(a o b), L({a, b}) <= |a| L(b) + |b| L(a)` and
/// `D(a xi) <= (|a| + L(a)) D(xi)`.
pub fn check_metric(t: &FiniteSpectralTriple, samples: usize, seed: u64) -> MetricReport {
    let sn = t.seminorm();
    let red = sn.reduction();
    let sv = red.singular_values.clone();
    let smax = sv.last().copied().unwrap_or(0.0);
    let kernel_dim = sv.iter().filter(|&&s| s <= KERNEL_GAP * smax || smax == 0.0).count();
    let is_metric = kernel_dim == 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = t.dirac.as_matrix();
    let l = |m: &CMatrix| op_norm(&commutator(d, m));
    let mut leib = SlackReport::new(seed);
    let mut modl = SlackReport::new(seed);
    for _ in 0..samples {
        let a = t.alg.random_sa(&mut rng);
        let b = t.alg.random_sa(&mut rng);
        let ab = &a * &b;
        let ba = &b * &a;
        let jordan = (&ab + &ba).scale(0.5);
        let lie = (&ab - &ba) * crate::matrix::c(0.0, -0.5);
        let rhs = op_norm(&a) * l(&b) + op_norm(&b) * l(&a);
        let scale = 1.0 + rhs;
        leib.record((rhs - l(&jordan)) / scale);
        leib.record((rhs - l(&lie)) / scale);

        let x = t.alg.random_element(&mut rng);
        let xi = crate::matrix::gaussian_vector(t.hilbert_dim(), &mut rng);
        let lhs = dnorm(t, &(&x * &xi));
        let rhs = (op_norm(&x) + l(&x)) * dnorm(t, &xi);
        modl.record((rhs - lhs) / (1.0 + rhs));
    }
    MetricReport {
        kernel_dim,
        singular_values: sv,
        is_metric,
        leibniz: leib,
        module_leibniz: modl,
    }
}

#[derive(Clone, Debug)]
pub struct DiameterResult {
    pub value: f64,
    pub witness: CMatrix,
    pub top: AlgState,
    pub bottom: AlgState,
}

fn spread(a: &CMatrix) -> (f64, CVector, CVector) {
    let e = herm_eig(&HermMatrix::from_part(a));
    let k = e.values.len() - 1;
    (e.max() - e.min(), e.vector(k), e.vector(0))
}

/// `sup { lambda_max(a) - lambda_min(a) : L(a) <= 1 }`, by alternating
/// between the optimal element for a fixed pair of states and the extremal
/// eigenvector states of that element. Returns a certified lower bound.
pub fn diameter(t: &FiniteSpectralTriple, opts: &SolveOptions) -> Result<DiameterResult> {
    let sn = t.seminorm();
    let n = t.hilbert_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut starts: Vec<(AlgState, AlgState)> = vec![];
    for i in 0..n.min(4) {
        for j in (i + 1)..n.min(4) {
            starts.push((basis_state(n, i), basis_state(n, j)));
        }
    }
    let dv = herm_eig(&t.dirac);
    if n > 1 {
        starts.push((pure_state(&dv.vector(0))?, pure_state(&dv.vector(n - 1))?));
    }
    for _ in 0..opts.restarts {
        starts.push((random_pure_state(n, &mut rng), random_pure_state(n, &mut rng)));
    }
    let mut best: Option<DiameterResult> = None;
    for (mut phi, mut psi) in starts {
        let mut last = -1.0;
        for _ in 0..50 {
            let c = sn.functional(&phi) - sn.functional(&psi);
            if c.norm() < 1e-14 {
                phi = pure_state(&random_unit_vector(n, &mut rng))?;
                continue;
            }
            let r = maximize_linear(&sn, &c, opts)?;
            let (s, top, bottom) = spread(&r.witness);
            let better = best.as_ref().map_or(true, |b| s > b.value);
            phi = pure_state(&top)?;
            psi = pure_state(&bottom)?;
            if better {
                best = Some(DiameterResult {
                    value: s,
                    witness: r.witness.clone(),
                    top: phi.clone(),
                    bottom: psi.clone(),
                });
            }
            if s <= last + 1e-12 * (1.0 + s) {
                break;
            }
            last = s;
        }
    }
    best.ok_or_else(|| Error::Domain("diameter of a zero-dimensional triple".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn two_point_diameter() {
        for d in [0.5, 1.0, 2.0] {
            let r = diameter(&fixtures::two_point(d), &SolveOptions::default()).unwrap();
            assert!((r.value - d).abs() < 1e-7);
        }
    }

    #[test]
    fn lip_rejects_outside() {
        let t = fixtures::two_point(1.0);
        assert!(matches!(lip(&t, &crate::matrix::pauli_x()), Err(Error::Domain(_))));
        let a = CMatrix::from_diagonal(&CVector::from_vec(vec![
            crate::matrix::c(1.0, 0.0),
            crate::matrix::c(0.0, 0.0),
        ]));
        assert!((lip(&t, &a).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fixtures_are_metric() {
        for t in [fixtures::two_point(1.0), fixtures::path4(), fixtures::spin4()] {
            let r = check_metric(&t, 100, 1);
            assert!(r.is_metric);
            assert!(r.leibniz.passes(1e-9));
            assert!(r.module_leibniz.passes(1e-9));
        }
    }

    #[test]
    fn zero_dirac_is_not_metric() {
        let t = FiniteSpectralTriple::new(FiniteAlgebra::diagonal(2), HermMatrix::zeros(2)).unwrap();
        assert!(!check_metric(&t, 10, 1).is_metric);
    }
}
