//! Metrized quantum vector bundles over finite spectral triples, modular
//! tunnels, and the modular reach.
//!
//! A bundle here is `C^N` with a max-form D-norm, a base algebra that is
//! either the scalars or `C + C` (for tunnels), and an acting algebra of
//! block-diagonal matrices. Modular states are `phi (.) omega` with `phi` a
//! state of the base and `D(omega) <= 1`.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::FiniteAlgebra;
use crate::error::{Error, Result};
use crate::kantorovich::cone::{ConeProgram, HalfSpace};
use crate::kantorovich::{dual_dnorm, AffineVec, Coupling, DBlock, Diagnostics, MaxDNorm, SeminormSpec, SolveOptions};
use crate::matrix::{
    commutator, gaussian_vector, herm_eig, hermitian_defect, op_norm, vinner, vnorm, CMatrix, CVector, HermMatrix, C64,
};
use crate::triple::{check_metric, diameter, FiniteSpectralTriple, SlackReport};
use crate::tunnel::{
    bridge_tunnel, identity_tunnel, perturbation_tunnel_with_diameter, scalar_bridge_tunnel, QuotientReport, Tunnel,
};

/// Quantum metric on the base algebra of a bundle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum BaseMetric {
    /// `C` with the zero seminorm.
    Scalars,
    /// `C + C` with `Q(z, w) = weight |z - w|`.
    Pair { weight: f64 },
}

impl BaseMetric {
    /// Seminorm of a self-adjoint base element given by its real entries.
    pub fn lip(&self, v: &[f64]) -> f64 {
        match self {
            BaseMetric::Scalars => 0.0,
            BaseMetric::Pair { weight } => weight * (v[0] - v[1]).abs(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            BaseMetric::Scalars => 1,
            BaseMetric::Pair { .. } => 2,
        }
    }
}

/// Base-valued inner product on the module.
#[derive(Clone, Debug)]
pub enum InnerProduct {
    /// `<omega, eta> = sum conj(eta_k) omega_k`.
    Standard,
    /// On `C^n + C^n`: `((x xi, xi'), (x eta, eta'))`, valued in `C + C`.
    Split { n: usize, x: CMatrix },
}

/// How the acting algebra and its seminorm are evaluated.
#[derive(Clone, Debug)]
pub enum Acting {
    /// `(A, L_D)` of a spectral triple; `L_D` extends to all of `A`.
    Triple(FiniteSpectralTriple),
    /// A coupling seminorm on the self-adjoint part of a block algebra.
    Seminorm(SeminormSpec),
}

#[derive(Clone, Debug)]
pub struct MetrizedBundle {
    pub dnorm: MaxDNorm,
    pub inner: InnerProduct,
    pub base: BaseMetric,
    pub acting: Acting,
    /// Constant `K` in the module inequality `D(a w) <= (|a| + K L(a)) D(w)`.
    pub leibniz_k: f64,
}

impl MetrizedBundle {
    pub fn dim(&self) -> usize {
        self.dnorm.dim
    }

    pub fn norm(&self, omega: &CVector) -> f64 {
        self.dnorm.value(omega)
    }

    /// `<omega, eta>`, linear in `omega`.
    pub fn inner(&self, omega: &CVector, eta: &CVector) -> Vec<C64> {
        match &self.inner {
            InnerProduct::Standard => vec![vinner(eta, omega)],
            InnerProduct::Split { n, x } => {
                let (o1, o2) = (omega.rows(0, *n).into_owned(), omega.rows(*n, *n).into_owned());
                let (e1, e2) = (eta.rows(0, *n).into_owned(), eta.rows(*n, *n).into_owned());
                vec![vinner(&e1, &(x * o1)), vinner(&e2, &(x * o2))]
            }
        }
    }

    /// Vector `v` with `phi(<zeta, omega>) = <v, zeta>` for all `zeta`, where
    /// `phi` is the base state with the given weights.
    pub fn functional(&self, phi: &[f64], omega: &CVector) -> Result<CVector> {
        if phi.len() != self.base.dim() {
            return Err(Error::Dimension(format!(
                "base state has {} weights, base algebra has dimension {}",
                phi.len(),
                self.base.dim()
            )));
        }
        if phi.iter().any(|&p| p < -1e-12) || (phi.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Validation("base state weights must be a probability vector".into()));
        }
        Ok(match &self.inner {
            InnerProduct::Standard => omega.clone(),
            InnerProduct::Split { n, x } => {
                let mut v = CVector::zeros(2 * n);
                v.rows_mut(0, *n).copy_from(&(x * omega.rows(0, *n)).scale(phi[0]));
                v.rows_mut(*n, *n).copy_from(&(x * omega.rows(*n, *n)).scale(phi[1]));
                v
            }
        })
    }

    fn sample_action(&self, rng: &mut ChaCha8Rng) -> (CMatrix, f64) {
        match &self.acting {
            Acting::Triple(t) => {
                let a = t.alg.random_element(rng);
                let l = op_norm(&commutator(t.dirac.as_matrix(), &a));
                (a, l)
            }
            Acting::Seminorm(sn) => {
                let x: Vec<f64> = (0..sn.dim()).map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal)).collect();
                (sn.element(&x), sn.value(&x))
            }
        }
    }
}

/// Worst sampled slacks of the three bundle conditions.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct BundleReport {
    /// `D(w) - |w|`.
    pub norm_bound: SlackReport,
    /// `2 D(w) D(e) - max(L(Re <w, e>), L(Im <w, e>))`.
    pub inner_leibniz: SlackReport,
    /// `(|a| + K L(a)) D(w) - D(a w)`.
    pub module_leibniz: SlackReport,
}

impl BundleReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.norm_bound.passes(tol) && self.inner_leibniz.passes(tol) && self.module_leibniz.passes(tol)
    }
}

fn random_module_vector(n: usize, rng: &mut ChaCha8Rng) -> CVector {
    let scale = 0.1 + 1.9 * rng.gen::<f64>();
    gaussian_vector(n, rng).scale(scale)
}

/// Samples the bundle conditions: `|w| <= D(w)`, the inner-product
/// inequality with `H(x, y) = 2xy`, and the module inequality with
/// `G(x, y, z) = (x + K y) z`. Slacks are relative to `1 + rhs`.
pub fn check_bundle(b: &MetrizedBundle, samples: usize, seed: u64) -> BundleReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = b.dim();
    let mut rep = BundleReport {
        norm_bound: SlackReport::new(seed),
        inner_leibniz: SlackReport::new(seed),
        module_leibniz: SlackReport::new(seed),
    };
    for _ in 0..samples {
        let w = random_module_vector(n, &mut rng);
        let e = random_module_vector(n, &mut rng);
        let dw = b.norm(&w);
        let de = b.norm(&e);
        rep.norm_bound.record((dw - vnorm(&w)) / (1.0 + dw));

        let ip = b.inner(&w, &e);
        let re: Vec<f64> = ip.iter().map(|z| z.re).collect();
        let im: Vec<f64> = ip.iter().map(|z| z.im).collect();
        let lhs = b.base.lip(&re).max(b.base.lip(&im));
        let rhs = 2.0 * dw * de;
        rep.inner_leibniz.record((rhs - lhs) / (1.0 + rhs));

        let (a, l) = b.sample_action(&mut rng);
        let lhs = b.norm(&(&a * &w));
        let rhs = (op_norm(&a) + b.leibniz_k * l) * dw;
        rep.module_leibniz.record((rhs - lhs) / (1.0 + rhs));
    }
    rep
}

/// Tolerance for the sampled bundle conditions.
pub const BUNDLE_TOL: f64 = 1e-9;

/// Bundle `(C^N, D, C, 0, A, L_D)` with `D(xi) = |xi| + |D xi|`, checked on
/// 200 samples before it is returned.
pub fn mvb(t: &FiniteSpectralTriple) -> Result<MetrizedBundle> {
    let m = check_metric(t, 0, 0);
    if !m.is_metric {
        return Err(Error::Domain(format!(
            "triple is not metric: the commutator kernel has dimension {}",
            m.kernel_dim
        )));
    }
    let b = MetrizedBundle {
        dnorm: MaxDNorm::single(&t.dirac),
        inner: InnerProduct::Standard,
        base: BaseMetric::Scalars,
        acting: Acting::Triple(t.clone()),
        leibniz_k: 1.0,
    };
    let rep = check_bundle(&b, 200, 0xB0B);
    if !rep.passes(BUNDLE_TOL) {
        return Err(Error::Validation(format!("bundle conditions fail: {rep:?}")));
    }
    Ok(b)
}

/// Leg of a modular tunnel: a block of the module carrying a D-norm.
#[derive(Clone, Debug)]
pub struct ModLeg {
    pub offset: usize,
    pub dirac: HermMatrix,
}

impl ModLeg {
    pub fn size(&self) -> usize {
        self.dirac.dim()
    }

    pub fn dnorm(&self, xi: &CVector) -> f64 {
        crate::kantorovich::dnorm(self.dirac.as_matrix(), xi)
    }
}

#[derive(Clone, Debug)]
pub struct ModularTunnel {
    pub label: String,
    /// The bundle `P` sitting over both legs.
    pub bundle: MetrizedBundle,
    /// Tunnel between the acting algebras.
    pub tunnel: Tunnel,
    pub legs: [ModLeg; 2],
    /// Largest `D'(lift) - 1` over the sampled explicit lifts.
    pub lift_excess: f64,
    pub bundle_report: BundleReport,
}

impl ModularTunnel {
    pub fn swapped(&self) -> ModularTunnel {
        let mut t = self.clone();
        t.legs.swap(0, 1);
        t.tunnel = self.tunnel.swapped();
        t
    }

    /// Tunnel between the base algebras; its extent is the extent of the
    /// modular tunnel.
    pub fn base_tunnel(&self) -> Result<Tunnel> {
        match self.bundle.base {
            BaseMetric::Scalars => {
                let point = FiniteSpectralTriple::new(FiniteAlgebra::full(1), HermMatrix::zeros(1))?;
                Ok(identity_tunnel(&point))
            }
            BaseMetric::Pair { weight } => scalar_bridge_tunnel(weight),
        }
    }

    /// Closed-form extent of [`Self::base_tunnel`].
    pub fn base_extent(&self) -> f64 {
        match self.bundle.base {
            BaseMetric::Scalars => 0.0,
            BaseMetric::Pair { weight } => 1.0 / weight,
        }
    }
}

fn pair_norm(d1: &HermMatrix, d2: &HermMatrix, weight: f64, x: &CMatrix) -> MaxDNorm {
    let n = d1.dim();
    MaxDNorm {
        dim: n + d2.dim(),
        blocks: vec![
            DBlock {
                offset: 0,
                dirac: d1.clone(),
            },
            DBlock {
                offset: n,
                dirac: d2.clone(),
            },
        ],
        couplings: vec![Coupling {
            weight,
            x: x.clone(),
            left: 0,
            right: n,
        }],
    }
}

/// Modular tunnel with `P = H` and both legs the identity.
pub fn identity_modular_tunnel(t: &FiniteSpectralTriple) -> Result<ModularTunnel> {
    let bundle = mvb(t)?;
    let leg = ModLeg {
        offset: 0,
        dirac: t.dirac.clone(),
    };
    let rep = check_bundle(&bundle, 200, 0xB0B);
    Ok(ModularTunnel {
        label: "identity".into(),
        bundle,
        tunnel: identity_tunnel(t),
        legs: [leg.clone(), leg],
        lift_excess: 0.0,
        bundle_report: rep,
    })
}

fn normalized(v: CVector, leg: &ModLeg) -> CVector {
    let d = leg.dnorm(&v);
    if d > 0.0 {
        v.unscale(d)
    } else {
        v
    }
}

/// Worst `D'(lift) - 1` over sampled unit vectors of each leg, for explicit
/// lifts `xi -> (xi, c xi)` and `eta -> (c eta, eta)`.
fn explicit_lift_excess(nd: &MaxDNorm, legs: &[ModLeg; 2], c: f64, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = legs[0].size();
    let mut worst = f64::NEG_INFINITY;
    for s in 0..samples {
        let j = s % 2;
        let xi = normalized(gaussian_vector(n, &mut rng), &legs[j]);
        let mut p = CVector::zeros(2 * n);
        p.rows_mut(legs[j].offset, n).copy_from(&xi);
        p.rows_mut(legs[1 - j].offset, n).copy_from(&xi.scale(c));
        worst = worst.max(nd.value(&p) - 1.0);
    }
    worst
}

/// Modular tunnel between `mvb(A, H, D)` and `mvb(A, H, D + T)`:
/// `D'(xi, eta) = max(D(xi), D_T(eta), (1 + 1/|T|) |xi - eta|)` over the
/// base `(C + C, Q)` with `Q(z, w) = (1 + |T|)/|T| |z - w|`.
pub fn modular_tunnel_perturbation(t: &FiniteSpectralTriple, pert: &HermMatrix, opts: &SolveOptions) -> Result<ModularTunnel> {
    let r = diameter(t, opts)?.value;
    modular_tunnel_perturbation_with_diameter(t, pert, r)
}

pub fn modular_tunnel_perturbation_with_diameter(t: &FiniteSpectralTriple, pert: &HermMatrix, r: f64) -> Result<ModularTunnel> {
    let (tun, data) = perturbation_tunnel_with_diameter(t, pert, r)?;
    if data.t_norm == 0.0 {
        return identity_modular_tunnel(t);
    }
    let tn = data.t_norm;
    let n = t.hilbert_dim();
    let dt = t.perturbed(pert)?.dirac;
    let weight = 1.0 + 1.0 / tn;
    let nd = pair_norm(&t.dirac, &dt, weight, &CMatrix::identity(n, n));
    let legs = [
        ModLeg {
            offset: 0,
            dirac: t.dirac.clone(),
        },
        ModLeg { offset: n, dirac: dt },
    ];
    let lift_excess = explicit_lift_excess(&nd, &legs, 1.0 / (1.0 + tn), 200, 0x11F7);
    if lift_excess > 1e-12 {
        return Err(Error::Validation(format!(
            "explicit lift xi -> (xi, xi/(1+|T|)) has D' = {:.12}",
            1.0 + lift_excess
        )));
    }
    let bundle = MetrizedBundle {
        dnorm: nd,
        inner: InnerProduct::Split {
            n,
            x: CMatrix::identity(n, n),
        },
        base: BaseMetric::Pair { weight },
        acting: Acting::Seminorm(tun.coupling.clone()),
        // ((1+|T|)/|T|) |a - b| |eta| <= K S(a, b) D'(xi, eta) needs
        // K = (1+|T|)/(|T| w_S), with w_S the weight of |a - b| in S.
        leibniz_k: ((1.0 + tn) / (tn * data.bridge_weight)).max(1.0),
    };
    let rep = check_bundle(&bundle, 200, 0xB0B);
    if !rep.passes(BUNDLE_TOL) {
        return Err(Error::Validation(format!("tunnel bundle conditions fail: {rep:?}")));
    }
    Ok(ModularTunnel {
        label: "perturbation".into(),
        bundle,
        tunnel: tun,
        legs,
        lift_excess,
        bundle_report: rep,
    })
}

/// Modular tunnel over the bridge tunnel:
/// `D'(xi, eta) = max(D_1(xi), D_2(eta), |x (xi - eta)| / (2 eps))`, inner
/// product `((x xi, xi'), (x eta, eta'))` and `Q(z, w) = |z - w| / (2 eps)`.
pub fn modular_tunnel_bridge(
    t1: &FiniteSpectralTriple,
    t2: &FiniteSpectralTriple,
    x: &CMatrix,
    eps: f64,
    samples: usize,
    seed: u64,
    opts: &SolveOptions,
) -> Result<ModularTunnel> {
    let n = t1.hilbert_dim();
    if x.shape() != (n, n) {
        return Err(Error::Dimension("bridge element has the wrong size".into()));
    }
    if hermitian_defect(x) > 1e-10 {
        return Err(Error::Domain("bridge element must be self-adjoint".into()));
    }
    let e = herm_eig(&HermMatrix::from_part(x));
    if e.min() < -1e-10 {
        return Err(Error::Domain(format!("bridge element is not positive (eigenvalue {:.3e})", e.min())));
    }
    if (e.max() - 1.0).abs() > 1e-9 {
        return Err(Error::Domain(format!("bridge element must have norm 1, has {}", e.max())));
    }
    let tun = bridge_tunnel(t1, t2, x, eps, samples, seed, opts)?;
    let weight = 1.0 / (2.0 * eps);
    let nd = pair_norm(&t1.dirac, &t2.dirac, weight, x);
    let legs = [
        ModLeg {
            offset: 0,
            dirac: t1.dirac.clone(),
        },
        ModLeg {
            offset: n,
            dirac: t2.dirac.clone(),
        },
    ];
    let bundle = MetrizedBundle {
        dnorm: nd,
        inner: InnerProduct::Split { n, x: x.clone() },
        base: BaseMetric::Pair { weight },
        acting: Acting::Seminorm(tun.coupling.clone()),
        leibniz_k: 1.0,
    };
    let rep = check_bundle(&bundle, 200, seed);
    if !rep.norm_bound.passes(BUNDLE_TOL) || !rep.inner_leibniz.passes(BUNDLE_TOL) {
        return Err(Error::Validation(format!("bridge bundle conditions fail: {rep:?}")));
    }
    Ok(ModularTunnel {
        label: "bridge".into(),
        bundle,
        tunnel: tun,
        legs,
        lift_excess: 0.0,
        bundle_report: rep,
    })
}

/// Samples `inf { D'(p) : Pi_j(p) = xi } = D_j(xi)` on unit vectors of each
/// leg. `worst_excess` is relative.
pub fn verify_modular_quotient(mt: &ModularTunnel, samples: usize, seed: u64, opts: &SolveOptions) -> Result<QuotientReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = QuotientReport {
        samples: 0,
        worst_excess: f64::NEG_INFINITY,
        worst_leg: 0,
        worst_element: vec![],
    };
    for s in 0..samples {
        let j = s % 2;
        let leg = &mt.legs[j];
        let xi = normalized(gaussian_vector(leg.size(), &mut rng), leg);
        let fixed: Vec<(usize, C64)> = xi.iter().enumerate().map(|(k, z)| (leg.offset + k, *z)).collect();
        let (v, _, _) = mt.bundle.dnorm.quotient(&fixed, opts)?;
        rep.samples += 1;
        let excess = (v - 1.0).abs();
        if excess > rep.worst_excess {
            rep.worst_excess = excess;
            rep.worst_leg = j;
            rep.worst_element = xi.iter().flat_map(|z| [z.re, z.im]).collect();
        }
    }
    Ok(rep)
}

/// `k_D(phi (.) omega, psi (.) eta) = sup { |phi(<z, omega>) - psi(<z, eta>)| : D(z) <= 1 }`.
/// Base states are given by their weights (`[1.0]` for the scalars).
pub fn modular_mk(
    bundle: &MetrizedBundle,
    first: (&[f64], &CVector),
    second: (&[f64], &CVector),
    opts: &SolveOptions,
) -> Result<f64> {
    for (_, w) in [first, second] {
        let d = bundle.norm(w);
        if d > 1.0 + 1e-9 {
            return Err(Error::Domain(format!("module vector has D = {d} > 1")));
        }
    }
    let v = bundle.functional(first.0, first.1)? - bundle.functional(second.0, second.1)?;
    if v.norm() == 0.0 {
        return Ok(0.0);
    }
    Ok(bundle.dnorm.dual(&v, opts)?.0)
}

/// `k^D(omega, eta) = sup { |<omega - eta, z>| : D(z) <= 1 }` for a bundle
/// over the scalars.
pub fn module_distance(bundle: &MetrizedBundle, omega: &CVector, eta: &CVector, opts: &SolveOptions) -> Result<f64> {
    if bundle.base != BaseMetric::Scalars {
        return Err(Error::Domain("module distance is implemented for scalar bases".into()));
    }
    let v = omega - eta;
    if v.norm() == 0.0 {
        return Ok(0.0);
    }
    Ok(bundle.dnorm.dual(&v, opts)?.0)
}

/// Vectors `z` with `D(z) = 1`, defining modular states `1 (.) z` of a
/// bundle over the scalars.
pub fn sample_modular_states(bundle: &MetrizedBundle, count: usize, seed: u64) -> Vec<CVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let z = gaussian_vector(bundle.dim(), &mut rng);
            let d = bundle.norm(&z);
            z.unscale(d)
        })
        .collect()
}

/// `max |mu(v)|` over the modular states `mu = 1 (.) z` in `states`.
pub fn sampled_state_sup(states: &[CVector], v: &CVector) -> f64 {
    states.iter().map(|z| vinner(z, v).norm()).fold(0.0, f64::max)
}

/// Inner value of the (covariant) modular reach for one modular state
/// `omega` on leg `j`.
#[derive(Clone, Debug)]
pub struct ReachInner {
    /// Attained by a strictly feasible point, so a lower bound of the infimum.
    pub value: f64,
    /// Target vector on the other leg recovered from the optimum.
    pub target: CVector,
    /// `sup_z` maximizers, one per group element.
    pub witnesses: Vec<CVector>,
    /// `max_t k(...)` evaluated at `target`, an upper bound of the infimum.
    pub upper: Option<f64>,
    pub diagnostics: Diagnostics,
}

/// `inf_{D_k(eta) <= 1} max_t sup_{D'(z) <= 1} |<z_j, U_t* omega> - <z_k, V_t* eta>|`
/// for unitaries `(U_t, V_t)` on legs `j` and `k = 1 - j`. Exchanging the
/// infimum and the supremum (both sets are convex and compact) turns this
/// into one conic program:
/// `sup sum_t Re <z_t,j, U_t* omega> - D_k*(sum_t V_t z_t,k)` over
/// `D'(z_t) <= lambda_t`, `sum lambda_t <= 1`, where
/// `D_k*(y) <= s` iff `|y - D_k w| <= s` and `|w| <= s` for some `w`.
pub fn reach_inner(
    mt: &ModularTunnel,
    omega: &CVector,
    j: usize,
    pairs: &[(CMatrix, CMatrix)],
    certify: bool,
    opts: &SolveOptions,
) -> Result<ReachInner> {
    if pairs.is_empty() {
        return Err(Error::Domain("reach needs at least one group element".into()));
    }
    let nd = &mt.bundle.dnorm;
    let (lj, lk) = (&mt.legs[j], &mt.legs[1 - j]);
    let (nj, nk) = (lj.size(), lk.size());
    let dp = nd.dim;
    let per = 2 * dp + nd.aux_vars() + 1;
    let nt = pairs.len();
    let w0 = nt * per;
    let sv = w0 + 2 * nk;
    let n = sv + 1;

    let mut obj = DVector::zeros(n);
    obj[sv] = -1.0;
    let mut prog = ConeProgram::new(n, obj);
    let mut es = DVector::zeros(n);
    es[sv] = 1.0;
    let mut lam_sum = DVector::zeros(n);
    let mut y = AffineVec::constant(&CVector::zeros(nk), n);
    let mut x0 = DVector::zeros(n);
    let mut auxes = vec![];
    for (t, (u, v)) in pairs.iter().enumerate() {
        let base = t * per;
        let lam = base + 2 * dp + nd.aux_vars();
        let a = u.adjoint() * omega;
        for (r, val) in a.iter().enumerate() {
            prog.objective[base + 2 * (lj.offset + r)] += val.re;
            prog.objective[base + 2 * (lj.offset + r) + 1] += val.im;
        }
        let z = AffineVec::vars(n, base, dp);
        let mut g = DVector::zeros(n);
        g[lam] = 1.0;
        let aux = nd.add_ball(&mut prog, &z, &g, 0.0, base + 2 * dp);
        lam_sum[lam] = 1.0;
        y = y.add(&z.block(lk.offset, nk).apply(v));
        x0[lam] = 1.0 / (nt as f64 + 1.0);
        nd.init_aux(&aux, &CVector::zeros(dp), x0[lam], &mut x0);
        auxes.push(aux);
    }
    prog.halfspaces.push(HalfSpace { a: lam_sum, b: 1.0 });
    let w = AffineVec::vars(n, w0, nk);
    prog.socs.push(y.sub(&w.apply(lk.dirac.as_matrix())).norm_cone(es.clone(), 0.0));
    prog.socs.push(w.norm_cone(es, 0.0));
    x0[sv] = 1.0;

    let sol = prog.solve(&x0, &opts.settings())?;
    let witnesses: Vec<CVector> = (0..nt).map(|t| AffineVec::vars(n, t * per, dp).eval(&sol.x)).collect();
    let yv = y.eval(&sol.x);
    let target = if yv.norm() > 0.0 {
        dual_dnorm(&yv, &lk.dirac).maximizer
    } else {
        CVector::zeros(nk)
    };
    let upper = if certify {
        let mut best: f64 = 0.0;
        for (u, v) in pairs {
            let mut f = CVector::zeros(dp);
            let a = u.adjoint() * omega;
            let b = v.adjoint() * &target;
            for r in 0..nj {
                f[lj.offset + r] += a[r];
            }
            for r in 0..nk {
                f[lk.offset + r] -= b[r];
            }
            if f.norm() > 0.0 {
                best = best.max(nd.dual(&f, opts)?.0);
            }
        }
        Some(best)
    } else {
        None
    };
    Ok(ReachInner {
        value: sol.objective.max(0.0),
        target,
        witnesses,
        upper,
        diagnostics: Diagnostics::from_cone(&sol.stats),
    })
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ReachOptions {
    pub n_samples: usize,
    pub n_restarts: usize,
    pub ascent_steps: usize,
    pub seed: u64,
    pub certify: bool,
}

impl Default for ReachOptions {
    fn default() -> Self {
        ReachOptions {
            n_samples: 64,
            n_restarts: 4,
            ascent_steps: 8,
            seed: 0x4EAC,
            certify: false,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ReachSample {
    pub sample: usize,
    /// Leg the modular state is drawn from.
    pub direction: usize,
    pub kind: String,
    pub value: f64,
    pub upper: Option<f64>,
    pub newton_steps: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ReachEstimate {
    pub value: f64,
    /// Supremum over modular states of each leg.
    pub from_leg: [f64; 2],
    pub rows: Vec<ReachSample>,
    pub seed: u64,
}

/// Sampled supremum over modular states of leg `j` of [`reach_inner`], for
/// both directions, with per-direction group data `pairs[j]`. Sampling is
/// seeded per leg block, so swapping the legs permutes the result exactly.
pub fn reach_core(
    mt: &ModularTunnel,
    pairs: [&[(CMatrix, CMatrix)]; 2],
    ro: &ReachOptions,
    opts: &SolveOptions,
) -> Result<ReachEstimate> {
    let mut from = [0.0f64; 2];
    let mut rows = vec![];
    for j in 0..2 {
        let leg = &mt.legs[j];
        let rank = usize::from(leg.offset > mt.legs[1 - j].offset);
        let mut rng = ChaCha8Rng::seed_from_u64(ro.seed.wrapping_add(0x9E37 * rank as u64));
        let n = leg.size();
        let eig = herm_eig(&leg.dirac);
        let mut starts: Vec<(String, CVector)> = (0..n.min(ro.n_samples))
            .map(|k| ("eigen".to_string(), normalized(eig.vector(k), leg)))
            .collect();
        while starts.len() < ro.n_samples {
            starts.push(("random".into(), normalized(gaussian_vector(n, &mut rng), leg)));
        }
        let evals: Vec<Result<ReachInner>> = starts
            .par_iter()
            .map(|(_, w)| reach_inner(mt, w, j, pairs[j], ro.certify, opts))
            .collect();
        let mut scored = vec![];
        for (k, ev) in evals.into_iter().enumerate() {
            let ev = ev?;
            rows.push(ReachSample {
                sample: k,
                direction: j,
                kind: starts[k].0.clone(),
                value: ev.value,
                upper: ev.upper,
                newton_steps: ev.diagnostics.iterations,
            });
            from[j] = from[j].max(ev.value);
            scored.push((ev.value, ev));
        }
        scored.sort_by(|a, b| b.0.total_cmp(&a.0));
        let polished: Vec<Result<(f64, Vec<ReachSample>)>> = scored
            .into_par_iter()
            .take(ro.n_restarts)
            .enumerate()
            .map(|(p, (v0, ev))| {
                let mut best = v0;
                let mut cur = ev;
                let mut out = vec![];
                for step in 0..ro.ascent_steps {
                    // The objective is linear in omega for fixed witnesses:
                    // move omega to the maximizer of that linear functional.
                    let mut g = CVector::zeros(n);
                    for (z, (u, _)) in cur.witnesses.iter().zip(pairs[j]) {
                        g += u * z.rows(leg.offset, n);
                    }
                    if g.norm() == 0.0 {
                        break;
                    }
                    let w = dual_dnorm(&g, &leg.dirac).maximizer;
                    let ev = reach_inner(mt, &w, j, pairs[j], ro.certify, opts)?;
                    out.push(ReachSample {
                        sample: ro.n_samples + p * ro.ascent_steps + step,
                        direction: j,
                        kind: "ascent".into(),
                        value: ev.value,
                        upper: ev.upper,
                        newton_steps: ev.diagnostics.iterations,
                    });
                    let done = ev.value <= best + 1e-10;
                    best = best.max(ev.value);
                    cur = ev;
                    if done {
                        break;
                    }
                }
                Ok((best, out))
            })
            .collect();
        for p in polished {
            let (v, out) = p?;
            from[j] = from[j].max(v);
            rows.extend(out);
        }
    }
    Ok(ReachEstimate {
        value: from[0].max(from[1]),
        from_leg: from,
        rows,
        seed: ro.seed,
    })
}

/// Hausdorff distance, for `k_D` on the module of `P`, between the pulled
/// back modular state spaces of the two legs (no group action).
pub fn modular_reach(mt: &ModularTunnel, ro: &ReachOptions, opts: &SolveOptions) -> Result<ReachEstimate> {
    let id = |leg: &ModLeg| CMatrix::identity(leg.size(), leg.size());
    let p0 = vec![(id(&mt.legs[0]), id(&mt.legs[1]))];
    let p1 = vec![(id(&mt.legs[1]), id(&mt.legs[0]))];
    reach_core(mt, [&p0, &p1], ro, opts)
}

/// `max(extent, reach, modular reach)`.
pub fn magnitude(extent: f64, reach: f64, modular_reach: f64) -> f64 {
    extent.max(reach).max(modular_reach)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::matrix::pauli_z;

    #[test]
    fn mvb_of_fixtures() {
        for t in [fixtures::two_point(1.0), fixtures::path4(), fixtures::spin4()] {
            let b = mvb(&t).unwrap();
            assert!(check_bundle(&b, 50, 3).passes(BUNDLE_TOL));
        }
    }

    #[test]
    fn identity_action_is_tight() {
        let b = mvb(&fixtures::path4()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let xi = gaussian_vector(4, &mut rng);
        let i = CMatrix::identity(4, 4);
        assert!((b.norm(&(&i * &xi)) - b.norm(&xi)).abs() < 1e-14);
    }

    #[test]
    fn perturbation_lifts_and_quotient() {
        let t = fixtures::two_point(1.0);
        let pert = HermMatrix::new(pauli_z().scale(0.05)).unwrap();
        let mt = modular_tunnel_perturbation_with_diameter(&t, &pert, 1.0).unwrap();
        assert!(mt.lift_excess <= 1e-12);
        let q = verify_modular_quotient(&mt, 10, 1, &SolveOptions::default()).unwrap();
        assert!(q.worst_excess < 1e-6, "{q:?}");
        assert!((mt.base_extent() - 0.05 / 1.05).abs() < 1e-15);
    }

    #[test]
    fn zero_perturbation_is_identity() {
        let t = fixtures::two_point(1.0);
        let mt = modular_tunnel_perturbation_with_diameter(&t, &HermMatrix::zeros(2), 1.0).unwrap();
        assert_eq!(mt.label, "identity");
        let r = modular_reach(&mt, &ReachOptions { n_samples: 6, ..Default::default() }, &SolveOptions::default())
            .unwrap();
        assert!(r.value < 1e-6, "{}", r.value);
    }

    #[test]
    fn reach_inner_is_bracketed() {
        let t = fixtures::two_point(1.0);
        let pert = HermMatrix::new(pauli_z().scale(0.1)).unwrap();
        let mt = modular_tunnel_perturbation_with_diameter(&t, &pert, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let w = normalized(gaussian_vector(2, &mut rng), &mt.legs[0]);
        let i = CMatrix::identity(2, 2);
        let r = reach_inner(&mt, &w, 0, &[(i.clone(), i)], true, &SolveOptions::default()).unwrap();
        let up = r.upper.unwrap();
        assert!(r.value <= up + 1e-8 && up - r.value < 1e-5, "{} vs {}", r.value, up);
    }

    #[test]
    fn modular_mk_scalar_reduction() {
        let t = fixtures::path4();
        let b = mvb(&t).unwrap();
        let st = sample_modular_states(&b, 2, 4);
        let v = modular_mk(&b, (&[1.0], &st[0]), (&[1.0], &st[1]), &SolveOptions::default()).unwrap();
        let d = dual_dnorm(&(&st[0] - &st[1]), &t.dirac).value;
        assert!((v - d).abs() < 1e-12);
        assert_eq!(modular_mk(&b, (&[1.0], &st[0]), (&[1.0], &st[0]), &SolveOptions::default()).unwrap(), 0.0);
    }

    #[test]
    fn magnitude_is_max() {
        assert_eq!(magnitude(0.1, 0.2, 0.15), 0.2);
        assert_eq!(magnitude(0.0, 0.0, 0.0), 0.0);
    }

    #[test]
    fn reach_within_twice_base_extent() {
        let t = fixtures::path4();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let pert = HermMatrix::new(crate::matrix::random_hermitian(4, &mut rng).into_matrix().scale(0.03)).unwrap();
        let mt = modular_tunnel_perturbation_with_diameter(&t, &pert, 3.0).unwrap();
        let ro = ReachOptions { n_samples: 8, n_restarts: 2, ascent_steps: 3, ..Default::default() };
        let r = modular_reach(&mt, &ro, &SolveOptions::default()).unwrap();
        assert!(r.value > 0.0);
        assert!(r.value <= 2.0 * mt.base_extent() + 5e-3, "{} vs {}", r.value, mt.base_extent());
        let s = modular_reach(&mt.swapped(), &ro, &SolveOptions::default()).unwrap();
        assert!((r.value - s.value).abs() < 1e-9);
        assert!((r.from_leg[0] - s.from_leg[1]).abs() < 1e-9);
    }

    #[test]
    fn modular_mk_matches_oracle_on_tunnel_bundle() {
        let t = fixtures::two_point(1.0);
        let pert = HermMatrix::new(pauli_z().scale(0.1)).unwrap();
        let mt = modular_tunnel_perturbation_with_diameter(&t, &pert, 1.0).unwrap();
        let b = &mt.bundle;
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let w = gaussian_vector(4, &mut rng);
        let w = w.unscale(b.norm(&w));
        let e = gaussian_vector(4, &mut rng);
        let e = e.unscale(b.norm(&e));
        let (p, q) = ([0.3, 0.7], [1.0, 0.0]);
        let v = modular_mk(b, (&p, &w), (&q, &e), &SolveOptions::default()).unwrap();
        let f = b.functional(&p, &w).unwrap() - b.functional(&q, &e).unwrap();
        let o = crate::kantorovich::oracle::max_dnorm_dual_oracle(&b.dnorm, &f, 400_000, 2);
        // The random walk stalls near kinks of the max-form ball.
        assert!(o.value <= v + 1e-8 && (v - o.value) / v < 3e-3, "{v} vs {}", o.value);
    }
}
