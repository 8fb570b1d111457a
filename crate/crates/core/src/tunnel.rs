//! Tunnels between finite spectral triples and estimates of their extent.
//!
//! A tunnel is described by an ambient algebra of block-diagonal matrices on
//! `C^N`, a coupling seminorm on its self-adjoint part, and two legs. Each
//! leg is a diagonal block of `C^N`; its map is compression to that block and
//! its coordinates are a contiguous range of the ambient coordinates.
//!
//! The extent is `max_j sup_mu inf_nu mk(mu, nu o pi_j)`. For a fixed ambient
//! state `mu` the infimum over states `nu` of leg `j` equals, by minimax,
//! `sup { mu(d) - lambda_max(pi_j(d)) : L(d) <= 1 }`, which is one conic
//! program. The outer supremum is sampled and polished by ascent.

use std::ops::Range;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{pure_state, random_pure_state, random_state_rng, AlgState, FiniteAlgebra};
use crate::error::{Error, Result};
use crate::kantorovich::cone::{ConeProgram, Lmi};
use crate::kantorovich::{quotient_seminorm, Diagnostics, NormTerm, SeminormSpec, SolveOptions};
use crate::matrix::{direct_sum, herm_eig, op_norm, CMatrix, HermMatrix};
use crate::triple::{diameter, FiniteSpectralTriple};

#[derive(Clone, Debug)]
pub struct Leg {
    /// Offset of the leg's block inside `C^N`.
    pub offset: usize,
    pub triple: FiniteSpectralTriple,
    /// Ambient coordinates that carry the leg's basis, in order.
    pub coords: Range<usize>,
}

impl Leg {
    pub fn size(&self) -> usize {
        self.triple.hilbert_dim()
    }

    /// Compression of an ambient matrix to the leg's block.
    pub fn compress(&self, d: &CMatrix) -> CMatrix {
        let n = self.size();
        d.view((self.offset, self.offset), (n, n)).into_owned()
    }
}

#[derive(Clone, Debug)]
pub struct Tunnel {
    pub label: String,
    pub ambient_dim: usize,
    pub coupling: SeminormSpec,
    pub legs: [Leg; 2],
    /// Extent bound proved for this construction, when one is known.
    pub analytic_extent_bound: Option<f64>,
}

fn embed_basis(basis: &[CMatrix], n: usize, offset: usize) -> Vec<CMatrix> {
    basis
        .iter()
        .map(|b| {
            let mut m = CMatrix::zeros(n, n);
            m.view_mut((offset, offset), b.shape()).copy_from(b);
            m
        })
        .collect()
}

/// Coupling skeleton on `A_1 + A_2` with the two leg seminorms as terms.
fn direct_sum_skeleton(t1: &FiniteSpectralTriple, t2: &FiniteSpectralTriple) -> (SeminormSpec, [Leg; 2]) {
    let n1 = t1.hilbert_dim();
    let n = n1 + t2.hilbert_dim();
    let k1 = t1.alg.dim();
    let mut basis = embed_basis(t1.alg.basis(), n, 0);
    basis.extend(embed_basis(t2.alg.basis(), n, n1));
    let terms = vec![
        NormTerm::commutator("left", t1.dirac.as_matrix(), t1.alg.basis(), 0),
        NormTerm::commutator("right", t2.dirac.as_matrix(), t2.alg.basis(), k1),
    ];
    let legs = [
        Leg {
            offset: 0,
            triple: t1.clone(),
            coords: 0..k1,
        },
        Leg {
            offset: n1,
            triple: t2.clone(),
            coords: k1..k1 + t2.alg.dim(),
        },
    ];
    (SeminormSpec { basis, terms }, legs)
}

impl Tunnel {
    pub fn ambient_algebra_dim(&self) -> usize {
        self.coupling.dim()
    }

    /// The same tunnel with its legs exchanged.
    pub fn swapped(&self) -> Tunnel {
        let mut t = self.clone();
        t.legs.swap(0, 1);
        t
    }

    /// Leg seminorm of leg `j` at ambient coordinates `x`.
    pub fn leg_value(&self, j: usize, x: &[f64]) -> f64 {
        let leg = &self.legs[j];
        let sn = leg.triple.seminorm();
        sn.value(&x[leg.coords.clone()])
    }
}

/// Tunnel with `D = A`, both legs the identity and coupling `L`.
pub fn identity_tunnel(t: &FiniteSpectralTriple) -> Tunnel {
    let k = t.alg.dim();
    let leg = Leg {
        offset: 0,
        triple: t.clone(),
        coords: 0..k,
    };
    Tunnel {
        label: "identity".into(),
        ambient_dim: t.hilbert_dim(),
        coupling: t.seminorm(),
        legs: [leg.clone(), leg],
        analytic_extent_bound: Some(0.0),
    }
}

/// Data of the perturbation tunnel between `(A, D)` and `(A, D + T)`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct PerturbationData {
    pub diameter: f64,
    pub t_norm: f64,
    /// `r / (1 - 2 r |T|)`.
    pub r_t: f64,
    /// Weight of the `|a - b|` term, `(1 - 2 r_T |T|) / (2 r_T |T|)`.
    pub bridge_weight: f64,
    /// `2 r_T |T| / (1 - 2 r_T |T|)`, the extent bound of this construction.
    pub extent_bound: f64,
    /// `2 r |T| / (1 - 2 r |T|)`.
    pub headline_bound: f64,
}

pub fn perturbation_data(r: f64, t_norm: f64) -> Result<PerturbationData> {
    if t_norm >= 1.0 / (2.0 * r) {
        return Err(Error::Domain(format!(
            "|T| = {t_norm} must be below 1/(2 diam) = {}",
            1.0 / (2.0 * r)
        )));
    }
    let r_t = r / (1.0 - 2.0 * r * t_norm);
    let q = 2.0 * r_t * t_norm;
    if q >= 1.0 {
        return Err(Error::Domain(format!(
            "|T| = {t_norm} gives 2 r_T |T| = {q} >= 1; the coupling weight would be negative (needs |T| < 1/(4 diam))"
        )));
    }
    Ok(PerturbationData {
        diameter: r,
        t_norm,
        r_t,
        bridge_weight: if q > 0.0 { (1.0 - q) / q } else { f64::INFINITY },
        extent_bound: q / (1.0 - q),
        headline_bound: 2.0 * r * t_norm / (1.0 - 2.0 * r * t_norm),
    })
}

/// Tunnel between `(A, D)` and `(A, D + T)` with coupling
/// `S(a, b) = max(L(a), L_T(b), w |a - b|)`. `T = 0` gives the identity tunnel.
pub fn perturbation_tunnel(t: &FiniteSpectralTriple, pert: &HermMatrix, opts: &SolveOptions) -> Result<(Tunnel, PerturbationData)> {
    let r = diameter(t, opts)?.value;
    perturbation_tunnel_with_diameter(t, pert, r)
}

pub fn perturbation_tunnel_with_diameter(t: &FiniteSpectralTriple, pert: &HermMatrix, r: f64) -> Result<(Tunnel, PerturbationData)> {
    let t_norm = op_norm(pert);
    let data = perturbation_data(r, t_norm)?;
    if t_norm == 0.0 {
        return Ok((identity_tunnel(t), data));
    }
    let t2 = t.perturbed(pert)?;
    let (mut sn, legs) = direct_sum_skeleton(t, &t2);
    let k = t.alg.dim();
    let mut images = vec![];
    for (i, b) in t.alg.basis().iter().enumerate() {
        images.push((i, b.clone()));
        images.push((k + i, -b));
    }
    let n = t.hilbert_dim();
    sn.terms.push(NormTerm::linear("bridge", data.bridge_weight, n, n, images));
    Ok((
        Tunnel {
            label: "perturbation".into(),
            ambient_dim: 2 * n,
            coupling: sn,
            legs,
            analytic_extent_bound: Some(data.extent_bound),
        },
        data,
    ))
}

/// Unchecked bridge tunnel: coupling `max(L_1(a), L_2(b), |a x - x b| / eps)`.
pub fn bridge_tunnel_unchecked(t1: &FiniteSpectralTriple, t2: &FiniteSpectralTriple, x: &CMatrix, eps: f64) -> Result<Tunnel> {
    let n = t1.hilbert_dim();
    if t2.hilbert_dim() != n || x.shape() != (n, n) {
        return Err(Error::Dimension("bridge needs both triples and x on the same space".into()));
    }
    if !(eps > 0.0) {
        return Err(Error::Domain("bridge parameter must be positive".into()));
    }
    let (mut sn, legs) = direct_sum_skeleton(t1, t2);
    let k1 = t1.alg.dim();
    let mut images = vec![];
    for (i, b) in t1.alg.basis().iter().enumerate() {
        images.push((i, b * x));
    }
    for (j, b) in t2.alg.basis().iter().enumerate() {
        images.push((k1 + j, -(x * b)));
    }
    sn.terms.push(NormTerm::linear("bridge", 1.0 / eps, n, n, images));
    Ok(Tunnel {
        label: "bridge".into(),
        ambient_dim: 2 * n,
        coupling: sn,
        legs,
        analytic_extent_bound: None,
    })
}

/// Tunnel `(C + C, Q)` from `C` to `C` with `Q(z, w) = weight |z - w|`.
/// Its extent is `1 / weight`.
pub fn scalar_bridge_tunnel(weight: f64) -> Result<Tunnel> {
    if !(weight > 0.0) {
        return Err(Error::Domain("scalar bridge weight must be positive".into()));
    }
    let point = FiniteSpectralTriple::new(FiniteAlgebra::full(1), HermMatrix::zeros(1))?;
    let (mut sn, legs) = direct_sum_skeleton(&point, &point);
    let one = CMatrix::identity(1, 1);
    sn.terms
        .push(NormTerm::linear("bridge", weight, 1, 1, vec![(0, one.clone()), (1, -one)]));
    Ok(Tunnel {
        label: "scalar-bridge".into(),
        ambient_dim: 2,
        coupling: sn,
        legs,
        analytic_extent_bound: Some(1.0 / weight),
    })
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct QuotientReport {
    pub samples: usize,
    /// `max (inf_lift L'(lift) - L_j(a)) / L_j(a)` over samples.
    pub worst_excess: f64,
    pub worst_leg: usize,
    /// Coordinates of the worst element in its leg's basis.
    pub worst_element: Vec<f64>,
}

/// Samples the quantum-isometry property `inf { L'(d) : pi_j(d) = a } = L_j(a)`.
pub fn verify_quotient(tunnel: &Tunnel, samples: usize, seed: u64, opts: &SolveOptions) -> Result<QuotientReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = tunnel.coupling.dim();
    let mut report = QuotientReport {
        samples: 0,
        worst_excess: f64::NEG_INFINITY,
        worst_leg: 0,
        worst_element: vec![],
    };
    for s in 0..samples {
        let j = s % 2;
        let leg = &tunnel.legs[j];
        let k = leg.coords.len();
        let a: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal)).collect();
        let l = leg.triple.seminorm().value(&a);
        if l < 1e-9 {
            continue;
        }
        let a: Vec<f64> = a.iter().map(|v| v / l).collect();
        let mut fixed = vec![None; n];
        for (p, i) in leg.coords.clone().enumerate() {
            fixed[i] = Some(a[p]);
        }
        let q = quotient_seminorm(&tunnel.coupling, &fixed, opts)?;
        let excess = q.value - 1.0;
        report.samples += 1;
        if excess > report.worst_excess {
            report.worst_excess = excess;
            report.worst_leg = j;
            report.worst_element = a;
        }
    }
    Ok(report)
}

/// Bridge tunnel that is returned only when the sampled quotient property
/// holds to `tol` (relative).
pub fn bridge_tunnel(
    t1: &FiniteSpectralTriple,
    t2: &FiniteSpectralTriple,
    x: &CMatrix,
    eps: f64,
    samples: usize,
    seed: u64,
    opts: &SolveOptions,
) -> Result<Tunnel> {
    let tun = bridge_tunnel_unchecked(t1, t2, x, eps)?;
    let rep = verify_quotient(&tun, samples, seed, opts)?;
    if rep.worst_excess > 1e-6 {
        return Err(Error::Validation(format!(
            "bridge with eps = {eps} is not a quantum isometry on leg {}: an element with L = 1 needs lifts of coupling {:.6} (witness coordinates {:?})",
            rep.worst_leg,
            1.0 + rep.worst_excess,
            rep.worst_element
        )));
    }
    Ok(tun)
}

/// Composite tunnel from `A` to `C` through a shared middle `B`: the
/// ambient algebra is the direct sum of both ambient algebras and the
/// coupling adds `|pi_right(d_1) - pi_left(d_2)| / eps`.
pub fn compose_tunnels(t1: &Tunnel, t2: &Tunnel, eps: f64) -> Result<Tunnel> {
    let mid1 = &t1.legs[1];
    let mid2 = &t2.legs[0];
    if mid1.size() != mid2.size() || mid1.triple.alg != mid2.triple.alg {
        return Err(Error::Dimension("tunnels do not share their middle algebra".into()));
    }
    let n1 = t1.ambient_dim;
    let n = n1 + t2.ambient_dim;
    let k1 = t1.coupling.dim();
    let mut basis = embed_basis(&t1.coupling.basis, n, 0);
    basis.extend(embed_basis(&t2.coupling.basis, n, n1));
    let mut terms = t1.coupling.terms.clone();
    for t in &t2.coupling.terms {
        let mut t = t.clone();
        for (i, _) in t.images.iter_mut() {
            *i += k1;
        }
        terms.push(t);
    }
    let mut images = vec![];
    for (i, b) in t1.coupling.basis.iter().enumerate() {
        let m = mid1.compress(b);
        if m.norm() > 0.0 {
            images.push((i, m));
        }
    }
    for (i, b) in t2.coupling.basis.iter().enumerate() {
        let m = mid2.compress(b);
        if m.norm() > 0.0 {
            images.push((k1 + i, -m));
        }
    }
    let s = mid1.size();
    terms.push(NormTerm::linear("composition", 1.0 / eps, s, s, images));
    let left = t1.legs[0].clone();
    let mut right = t2.legs[1].clone();
    right.offset += n1;
    right.coords = right.coords.start + k1..right.coords.end + k1;
    Ok(Tunnel {
        label: format!("{}+{}", t1.label, t2.label),
        ambient_dim: n,
        coupling: SeminormSpec { basis, terms },
        legs: [left, right],
        analytic_extent_bound: None,
    })
}

/// Inner value for one ambient state: `inf_nu mk(mu, nu o pi_j)`.
#[derive(Clone, Debug)]
pub struct InnerValue {
    pub value: f64,
    pub witness: CMatrix,
    pub witness_coords: Vec<f64>,
    pub diagnostics: Diagnostics,
}

/// Precomputed reduction of the coupling, shared by all inner solves.
pub struct ExtentProblem<'a> {
    tunnel: &'a Tunnel,
    q: nalgebra::DMatrix<f64>,
    lmis: Vec<Lmi>,
    reduced_basis: Vec<CMatrix>,
}

impl<'a> ExtentProblem<'a> {
    pub fn new(tunnel: &'a Tunnel) -> Result<Self> {
        let red = tunnel.coupling.reduction();
        if red.kernel.ncols() != 1 {
            return Err(Error::Domain(format!(
                "coupling seminorm has a {}-dimensional kernel; a Lipschitz seminorm needs exactly the scalars",
                red.kernel.ncols()
            )));
        }
        let q = red.range;
        let lmis = tunnel.coupling.reduced_lmis(&q, 0);
        let reduced_basis = (0..q.ncols())
            .map(|j| {
                let col: Vec<f64> = q.column(j).iter().copied().collect();
                tunnel.coupling.element(&col)
            })
            .collect();
        Ok(ExtentProblem {
            tunnel,
            q,
            lmis,
            reduced_basis,
        })
    }

    /// `sup { mu(d) - lambda_max(pi_j d) : L(d) <= 1 }`.
    pub fn inner(&self, mu: &AlgState, j: usize, opts: &SolveOptions) -> Result<InnerValue> {
        let r = self.q.ncols();
        let s = r;
        let leg = &self.tunnel.legs[j];
        let mut obj = DVector::zeros(r + 1);
        for (k, b) in self.reduced_basis.iter().enumerate() {
            obj[k] = mu.eval(b).re;
        }
        obj[s] = -1.0;
        let mut prog = ConeProgram::new(r + 1, obj);
        prog.lmis = self.lmis.clone();
        let m = leg.size();
        let mut terms = vec![(s, CMatrix::identity(m, m))];
        for (k, b) in self.reduced_basis.iter().enumerate() {
            let c = leg.compress(b);
            if c.norm() > 0.0 {
                terms.push((k, -c));
            }
        }
        prog.lmis.push(Lmi {
            f0: CMatrix::zeros(m, m),
            terms,
        });
        let mut x0 = DVector::zeros(r + 1);
        x0[s] = 1.0;
        let sol = prog.solve(&x0, &opts.settings())?;
        let y = sol.x.rows(0, r).into_owned();
        let mut coords = &self.q * y;
        let l = self.tunnel.coupling.value(coords.as_slice());
        if l > 1.0 {
            coords.unscale_mut(l);
        }
        let xs: Vec<f64> = coords.iter().copied().collect();
        let d = self.tunnel.coupling.element(&xs);
        let lmax = herm_eig(&HermMatrix::from_part(&leg.compress(&d))).max();
        Ok(InnerValue {
            value: mu.eval(&d).re - lmax,
            witness: d,
            witness_coords: xs,
            diagnostics: crate::kantorovich::Diagnostics::from_cone(&sol.stats),
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ExtentSample {
    pub sample: usize,
    /// 0: distance to the left leg's states, 1: to the right leg's states.
    pub direction: usize,
    pub kind: String,
    pub distance: f64,
    pub witness_norm: f64,
    pub newton_steps: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ExtentEstimate {
    pub value: f64,
    /// `sup_mu inf_nu mk(mu, nu o pi_left)`.
    pub to_left: f64,
    /// `sup_mu inf_nu mk(mu, nu o pi_right)`.
    pub to_right: f64,
    pub analytic_bound: Option<f64>,
    pub rows: Vec<ExtentSample>,
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ExtentOptions {
    pub n_outer: usize,
    pub n_restarts: usize,
    pub ascent_steps: usize,
    pub seed: u64,
}

impl Default for ExtentOptions {
    fn default() -> Self {
        ExtentOptions {
            n_outer: 64,
            n_restarts: 8,
            ascent_steps: 12,
            seed: 0xE7E7,
        }
    }
}

fn leg_state(leg: &Leg, ambient: usize, rng: &mut ChaCha8Rng) -> AlgState {
    random_pure_state(leg.size(), rng).embed(ambient, leg.offset)
}

/// Sampled lower estimate of the extent. The inner infimum is exact up to
/// solver tolerance; the outer supremum is a lower estimate.
pub fn extent_estimate(tunnel: &Tunnel, eo: &ExtentOptions, opts: &SolveOptions) -> Result<ExtentEstimate> {
    let prob = ExtentProblem::new(tunnel)?;
    let n = tunnel.ambient_dim;
    let mut rng = ChaCha8Rng::seed_from_u64(eo.seed);
    let mut states: Vec<(String, AlgState)> = vec![];
    // Legs in block order, so that swapping the sides samples the same states.
    let (first, second) = if tunnel.legs[0].offset <= tunnel.legs[1].offset {
        (&tunnel.legs[0], &tunnel.legs[1])
    } else {
        (&tunnel.legs[1], &tunnel.legs[0])
    };
    let grid = [0.0, 0.25, 0.5, 0.75, 1.0];
    for k in 0..eo.n_outer {
        let st = match k % 4 {
            0 | 1 => {
                let t = grid[(k / 4) % grid.len()];
                let a = leg_state(first, n, &mut rng);
                let b = leg_state(second, n, &mut rng);
                (format!("mix{t}"), a.mix(&b, t))
            }
            2 => ("vector".into(), random_pure_state(n, &mut rng)),
            _ => ("mixed".into(), random_state_rng(n, &mut rng)),
        };
        states.push(st);
    }
    let mut rows = vec![];
    let mut best = [0.0f64; 2];
    for j in 0..2 {
        let evals: Vec<Result<InnerValue>> = states.par_iter().map(|(_, mu)| prob.inner(mu, j, opts)).collect();
        let mut scored = vec![];
        for (k, ev) in evals.into_iter().enumerate() {
            let ev = ev?;
            rows.push(ExtentSample {
                sample: k,
                direction: j,
                kind: states[k].0.clone(),
                distance: ev.value,
                witness_norm: op_norm(&ev.witness),
                newton_steps: ev.diagnostics.iterations,
            });
            best[j] = best[j].max(ev.value);
            scored.push((ev.value, ev.witness));
        }
        scored.sort_by(|a, b| b.0.total_cmp(&a.0));
        let polished: Vec<Result<(f64, Vec<ExtentSample>)>> = scored
            .into_par_iter()
            .take(eo.n_restarts)
            .enumerate()
            .map(|(p, (_, w))| {
                let mut witness = w;
                let mut best_v = f64::NEG_INFINITY;
                let mut out = vec![];
                for step in 0..eo.ascent_steps {
                    let e = herm_eig(&HermMatrix::from_part(&witness));
                    let mu = pure_state(&e.vector(e.values.len() - 1))?;
                    let ev = prob.inner(&mu, j, opts)?;
                    out.push(ExtentSample {
                        sample: eo.n_outer + p * eo.ascent_steps + step,
                        direction: j,
                        kind: "ascent".into(),
                        distance: ev.value,
                        witness_norm: op_norm(&ev.witness),
                        newton_steps: ev.diagnostics.iterations,
                    });
                    let done = ev.value <= best_v + 1e-10;
                    best_v = best_v.max(ev.value);
                    witness = ev.witness;
                    if done {
                        break;
                    }
                }
                Ok((best_v, out))
            })
            .collect();
        for p in polished {
            let (v, out) = p?;
            best[j] = best[j].max(v);
            rows.extend(out);
        }
    }
    Ok(ExtentEstimate {
        value: best[0].max(best[1]),
        to_left: best[0],
        to_right: best[1],
        analytic_bound: tunnel.analytic_extent_bound,
        rows,
        seed: eo.seed,
    })
}

/// Direct sum of two algebras as a block-diagonal algebra.
pub fn direct_sum_algebra(a: &FiniteAlgebra, b: &FiniteAlgebra) -> FiniteAlgebra {
    let n = a.ambient_dim() + b.ambient_dim();
    let mut span = embed_basis(a.basis(), n, 0);
    span.extend(embed_basis(b.basis(), n, a.ambient_dim()));
    FiniteAlgebra::from_spanning_set(&span, n).expect("block shapes match")
}

/// `D_1 + D_2` on `C^{N_1} + C^{N_2}`.
pub fn direct_sum_dirac(d1: &HermMatrix, d2: &HermMatrix) -> HermMatrix {
    HermMatrix::from_part(&direct_sum(d1.as_matrix(), d2.as_matrix()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::matrix::pauli_x;

    fn quick() -> ExtentOptions {
        ExtentOptions {
            n_outer: 16,
            n_restarts: 3,
            ascent_steps: 6,
            seed: 5,
        }
    }

    #[test]
    fn identity_tunnel_has_zero_extent() {
        let t = fixtures::spin4();
        let e = extent_estimate(&identity_tunnel(&t), &quick(), &SolveOptions::default()).unwrap();
        assert!(e.value.abs() < 1e-6, "{}", e.value);
    }

    #[test]
    fn zero_perturbation_is_identity() {
        let t = fixtures::two_point(1.0);
        let (tun, data) = perturbation_tunnel(&t, &HermMatrix::zeros(2), &SolveOptions::default()).unwrap();
        assert_eq!(tun.label, "identity");
        assert_eq!(data.extent_bound, 0.0);
    }

    #[test]
    fn perturbation_precondition() {
        let t = fixtures::two_point(1.0);
        let big = HermMatrix::from_part(&pauli_x().scale(0.6));
        assert!(matches!(
            perturbation_tunnel(&t, &big, &SolveOptions::default()),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn perturbation_bound_example() {
        let d = perturbation_data(1.0, 0.1).unwrap();
        assert!((d.headline_bound - 0.25).abs() < 1e-15);
    }

    #[test]
    fn perturbation_tunnel_is_quantum_isometry() {
        let t = fixtures::two_point(1.0);
        let p = HermMatrix::from_part(&crate::matrix::pauli_z().scale(0.05));
        let (tun, _) = perturbation_tunnel(&t, &p, &SolveOptions::default()).unwrap();
        let rep = verify_quotient(&tun, 20, 3, &SolveOptions::default()).unwrap();
        assert!(rep.worst_excess < 1e-6, "{rep:?}");
    }

    #[test]
    fn swap_exchanges_directions() {
        let t = fixtures::two_point(1.0);
        let p = HermMatrix::from_part(&pauli_x().scale(0.05));
        let (tun, _) = perturbation_tunnel(&t, &p, &SolveOptions::default()).unwrap();
        let e1 = extent_estimate(&tun, &quick(), &SolveOptions::default()).unwrap();
        let e2 = extent_estimate(&tun.swapped(), &quick(), &SolveOptions::default()).unwrap();
        assert!((e1.value - e2.value).abs() < 1e-6);
        assert!((e1.to_left - e2.to_right).abs() < 1e-6);
    }

    #[test]
    fn bridge_rejects_small_eps_between_different_triples() {
        let t1 = fixtures::two_point(1.0);
        let t2 = fixtures::two_point(2.0);
        let x = CMatrix::identity(2, 2);
        let r = bridge_tunnel(&t1, &t2, &x, 1e-3, 8, 1, &SolveOptions::default());
        assert!(matches!(r, Err(Error::Validation(_))));
    }
}
