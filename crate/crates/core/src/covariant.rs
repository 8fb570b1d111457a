//! Proper monoids on grids, local almost isometries, the unitary group of a
//! Dirac operator, covariant reaches and the spectral propinquity bound.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{pure_state, random_pure_state};
use crate::error::{Error, Result};
use crate::kantorovich::SolveOptions;
use crate::matrix::{herm_eig, op_norm, random_unit_vector, unitary_exp, vnorm, CMatrix, HermMatrix};
use crate::modular::{
    identity_modular_tunnel, magnitude, modular_tunnel_bridge, modular_tunnel_perturbation, reach_core, ModularTunnel,
    ReachEstimate, ReachOptions,
};
use crate::triple::{FiniteSpectralTriple, SlackReport};
use crate::tunnel::{extent_estimate, ExtentEstimate, ExtentOptions, ExtentProblem, Tunnel};

/// `sqrt(2)/2`, the cap in the covariant distances.
pub const EPS_CAP: f64 = std::f64::consts::FRAC_1_SQRT_2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum MonoidKind {
    /// `h Z` with `|s - t|`; balls are clipped at radius `cap`.
    RealsGrid { step: f64, cap: f64 },
    /// `Z_n` with arc length on a circle of the given circumference.
    Cyclic { order: i64, circumference: f64 },
    Trivial,
}

/// A proper monoid with a left-invariant metric. Elements are integer labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProperMonoidGrid {
    pub kind: MonoidKind,
}

impl ProperMonoidGrid {
    pub fn reals(step: f64, cap: f64) -> Self {
        ProperMonoidGrid {
            kind: MonoidKind::RealsGrid { step, cap },
        }
    }

    pub fn cyclic(order: i64, circumference: f64) -> Self {
        ProperMonoidGrid {
            kind: MonoidKind::Cyclic { order, circumference },
        }
    }

    pub fn trivial() -> Self {
        ProperMonoidGrid { kind: MonoidKind::Trivial }
    }

    pub fn identity(&self) -> i64 {
        0
    }

    pub fn op(&self, a: i64, b: i64) -> i64 {
        match self.kind {
            MonoidKind::RealsGrid { .. } => a + b,
            MonoidKind::Cyclic { order, .. } => (a + b).rem_euclid(order),
            MonoidKind::Trivial => 0,
        }
    }

    pub fn dist(&self, a: i64, b: i64) -> f64 {
        match self.kind {
            MonoidKind::RealsGrid { step, .. } => (a - b).abs() as f64 * step,
            MonoidKind::Cyclic { order, circumference } => {
                let k = (a - b).rem_euclid(order);
                k.min(order - k) as f64 * circumference / order as f64
            }
            MonoidKind::Trivial => 0.0,
        }
    }

    /// Grid ball of radius `r` around the identity, and whether the cap
    /// clipped it.
    pub fn ball(&self, r: f64) -> (Vec<i64>, bool) {
        match self.kind {
            MonoidKind::RealsGrid { step, cap } => {
                let k = (r.min(cap) / step + 1e-9).floor() as i64;
                ((-k..=k).collect(), r > cap)
            }
            MonoidKind::Cyclic { order, .. } => ((0..order).filter(|&g| self.dist(0, g) <= r + 1e-12).collect(), false),
            MonoidKind::Trivial => (vec![0], false),
        }
    }

    /// Largest `|d(gx, gy) - d(x, y)|` over the ball of radius `r`.
    pub fn left_invariance_defect(&self, r: f64) -> f64 {
        let (b, _) = self.ball(r);
        let mut worst: f64 = 0.0;
        for &g in &b {
            for &x in &b {
                for &y in &b {
                    worst = worst.max((self.dist(self.op(g, x), self.op(g, y)) - self.dist(x, y)).abs());
                }
            }
        }
        worst
    }
}

/// Maps `forward: G -> H` and `backward: H -> G` tabulated on balls, with
/// the declared locality radius `r` and error `eps`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlmostIsometryPair {
    pub forward: BTreeMap<i64, i64>,
    pub backward: BTreeMap<i64, i64>,
    pub r: f64,
    pub eps: f64,
}

impl AlmostIsometryPair {
    /// The identity on both sides, tabulated on the given labels.
    pub fn identity(labels: &[i64], r: f64, eps: f64) -> Self {
        let m: BTreeMap<i64, i64> = labels.iter().map(|&g| (g, g)).collect();
        AlmostIsometryPair {
            forward: m.clone(),
            backward: m,
            r,
            eps,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsometryReport {
    pub passes: bool,
    pub identity_preserved: bool,
    pub worst_violation: f64,
    /// `(direction, g, g', h)` attaining the worst violation.
    pub worst_triple: Option<(usize, i64, i64, i64)>,
    pub triples: usize,
    pub ball_clipped: bool,
}

fn lookup(m: &BTreeMap<i64, i64>, g: i64, side: &str) -> Result<i64> {
    m.get(&g)
        .copied()
        .ok_or_else(|| Error::Domain(format!("{side} map is not tabulated at {g}")))
}

/// Exhaustive check of `|d_k(s_j(g) s_j(g'), h) - d_j(g g', s_k(h))| <= eps`
/// over all `g, g'` in the `r`-ball of one side and `h` in the `r`-ball of
/// the other, in both directions, together with `s_j(e_j) = e_k`.
pub fn verify_almost_isometry(p: &AlmostIsometryPair, g: &ProperMonoidGrid, h: &ProperMonoidGrid) -> Result<IsometryReport> {
    let (bg, cg) = g.ball(p.r);
    let (bh, ch) = h.ball(p.r);
    let identity_preserved = p.forward.get(&g.identity()) == Some(&h.identity())
        && p.backward.get(&h.identity()) == Some(&g.identity());
    let mut worst = 0.0f64;
    let mut at = None;
    let mut triples = 0;
    let sides = [(g, h, &bg, &bh, &p.forward, &p.backward), (h, g, &bh, &bg, &p.backward, &p.forward)];
    for (dir, (gj, gk, bj, bk, sj, sk)) in sides.into_iter().enumerate() {
        let sj_vals: Vec<i64> = bj.iter().map(|&x| lookup(sj, x, "forward")).collect::<Result<_>>()?;
        let sk_vals: Vec<i64> = bk.iter().map(|&x| lookup(sk, x, "backward")).collect::<Result<_>>()?;
        for (a, &x) in bj.iter().enumerate() {
            for (b, &y) in bj.iter().enumerate() {
                let img = gk.op(sj_vals[a], sj_vals[b]);
                let prod = gj.op(x, y);
                for (c, &z) in bk.iter().enumerate() {
                    let v = (gk.dist(img, z) - gj.dist(prod, sk_vals[c])).abs();
                    triples += 1;
                    if v > worst {
                        worst = v;
                        at = Some((dir, x, y, z));
                    }
                }
            }
        }
    }
    Ok(IsometryReport {
        passes: identity_preserved && worst <= p.eps + 1e-12,
        identity_preserved,
        worst_violation: worst,
        worst_triple: at,
        triples,
        ball_clipped: cg || ch,
    })
}

/// Composition `(q_1 o p_1, p_2 o q_2)` of a pair `G_1 <-> G_2` with a pair
/// `G_2 <-> G_3`, declared at `(1/(eps_1 + eps_2), eps_1 + eps_2)` and
/// verified before it is returned.
pub fn compose_almost_isometries(
    p: &AlmostIsometryPair,
    q: &AlmostIsometryPair,
    g1: &ProperMonoidGrid,
    g2: &ProperMonoidGrid,
    g3: &ProperMonoidGrid,
) -> Result<(AlmostIsometryPair, IsometryReport)> {
    for e in [p.eps, q.eps] {
        if !(e > 0.0 && e < EPS_CAP) {
            return Err(Error::Domain(format!("composition needs errors in (0, sqrt(2)/2), got {e}")));
        }
    }
    let _ = g2;
    let eps = p.eps + q.eps;
    let r = 1.0 / eps;
    let mut forward = BTreeMap::new();
    for g in g1.ball(r).0 {
        forward.insert(g, lookup(&q.forward, lookup(&p.forward, g, "forward")?, "forward")?);
    }
    let mut backward = BTreeMap::new();
    for h in g3.ball(r).0 {
        backward.insert(h, lookup(&p.backward, lookup(&q.backward, h, "backward")?, "backward")?);
    }
    let out = AlmostIsometryPair { forward, backward, r, eps };
    let rep = verify_almost_isometry(&out, g1, g3)?;
    if !rep.passes {
        return Err(Error::Contract(format!(
            "composed pair violates the almost-isometry inequality: {rep:?}"
        )));
    }
    Ok((out, rep))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UpsilonReport {
    pub value: f64,
    pub capped: bool,
    pub empty_candidates: bool,
    pub best_candidate: Option<usize>,
}

/// `min` over candidates of the smallest `eps` in `eps_grid` with the
/// candidate in `UIso(eps, 1/eps)`, capped at `sqrt(2)/2`. A candidate not
/// tabulated on a required ball fails at that `eps`.
pub fn upsilon_upper_bound(
    g: &ProperMonoidGrid,
    h: &ProperMonoidGrid,
    candidates: &[AlmostIsometryPair],
    eps_grid: &[f64],
) -> UpsilonReport {
    let mut grid: Vec<f64> = eps_grid.iter().copied().filter(|&e| e > 0.0 && e < EPS_CAP).collect();
    grid.sort_by(f64::total_cmp);
    let mut best = (EPS_CAP, None);
    for (c, cand) in candidates.iter().enumerate() {
        for &e in &grid {
            if e >= best.0 {
                break;
            }
            let p = AlmostIsometryPair {
                r: 1.0 / e,
                eps: e,
                ..cand.clone()
            };
            if matches!(verify_almost_isometry(&p, g, h), Ok(rep) if rep.passes) {
                best = (e, Some(c));
                break;
            }
        }
    }
    UpsilonReport {
        value: best.0,
        capped: best.1.is_none(),
        empty_candidates: candidates.is_empty(),
        best_candidate: best.1,
    }
}

/// Symmetric grid of `points` times on `[-1/eps, 1/eps]`; `points` is made
/// odd so that `0` is on the grid.
pub fn time_grid(eps: f64, points: usize) -> Vec<f64> {
    let n = points.max(1) | 1;
    if n == 1 {
        return vec![0.0];
    }
    let half = (n / 2) as f64;
    (0..n).map(|k| (k as f64 - half) / half / eps).collect()
}

/// `exp(itD)` on a time grid; `t = 0` gives the identity exactly.
#[derive(Clone, Debug)]
pub struct UnitaryFamily {
    pub times: Vec<f64>,
    pub unitaries: Vec<CMatrix>,
}

pub fn unitary_family(d: &HermMatrix, times: &[f64]) -> UnitaryFamily {
    let n = d.dim();
    UnitaryFamily {
        times: times.to_vec(),
        unitaries: times
            .iter()
            .map(|&t| if t == 0.0 { CMatrix::identity(n, n) } else { unitary_exp(d, t) })
            .collect(),
    }
}

/// Slack of `|(exp(itD) - exp(it(D+T))) xi| <= |t| |T|` over the time grid
/// and random `xi` with `D(xi) = 1`.
pub fn kato_check(d: &HermMatrix, pert: &HermMatrix, times: &[f64], samples: usize, seed: u64) -> Result<SlackReport> {
    let dt = HermMatrix::new(d.as_matrix() + pert.as_matrix())?;
    let tn = op_norm(pert.as_matrix());
    let u = unitary_family(d, times);
    let v = unitary_family(&dt, times);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = SlackReport::new(seed);
    for _ in 0..samples {
        let xi = random_unit_vector(d.dim(), &mut rng);
        let xi = xi.unscale(crate::kantorovich::dnorm(d.as_matrix(), &xi));
        for (k, &t) in times.iter().enumerate() {
            let lhs = vnorm(&((&u.unitaries[k] - &v.unitaries[k]) * &xi));
            rep.record(t.abs() * tn - lhs);
        }
    }
    Ok(rep)
}

/// Covariant modular reach: [`reach_core`] with the inner supremum over the
/// time grid and the group acting by `exp(itD_j)` on leg `j`.
pub fn covariant_reach(mt: &ModularTunnel, times: &[f64], ro: &ReachOptions, opts: &SolveOptions) -> Result<ReachEstimate> {
    if times.is_empty() {
        return Err(Error::Domain("time grid is empty".into()));
    }
    let fam: Vec<UnitaryFamily> = mt.legs.iter().map(|l| unitary_family(&l.dirac, times)).collect();
    let pairs = |j: usize| -> Vec<(CMatrix, CMatrix)> {
        fam[j]
            .unitaries
            .iter()
            .cloned()
            .zip(fam[1 - j].unitaries.iter().cloned())
            .collect()
    };
    let (p0, p1) = (pairs(0), pairs(1));
    reach_core(mt, [&p0, &p1], ro, opts)
}

/// Whether the grid reaches `-1/eps` and `1/eps`.
pub fn covers(times: &[f64], eps: f64) -> bool {
    let lo = times.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = times.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    lo <= -1.0 / eps * (1.0 - 1e-12) && hi >= 1.0 / eps * (1.0 - 1e-12)
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct StateReach {
    pub value: f64,
    pub from_leg: [f64; 2],
    pub samples: usize,
    pub seed: u64,
}

/// Hausdorff distance, for the tunnel's Monge-Kantorovich metric, between
/// the state spaces of the two legs pulled back to the tunnel: the
/// covariant reach for the trivial group. Sampled over pure leg states with
/// eigenvector ascent; each inner infimum is exact up to solver tolerance.
pub fn state_reach(tunnel: &Tunnel, samples: usize, ascent_steps: usize, seed: u64, opts: &SolveOptions) -> Result<StateReach> {
    let prob = ExtentProblem::new(tunnel)?;
    let n = tunnel.ambient_dim;
    let mut from = [0.0f64; 2];
    for j in 0..2 {
        let leg = &tunnel.legs[j];
        let rank = u64::from(leg.offset > tunnel.legs[1 - j].offset);
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x51 * rank));
        let states: Vec<_> = (0..samples)
            .map(|_| random_pure_state(leg.size(), &mut rng).embed(n, leg.offset))
            .collect();
        let vals: Vec<Result<f64>> = states
            .par_iter()
            .map(|mu| {
                let mut ev = prob.inner(mu, 1 - j, opts)?;
                let mut best = ev.value;
                for _ in 0..ascent_steps {
                    let e = herm_eig(&HermMatrix::from_part(&leg.compress(&ev.witness)));
                    let mu = pure_state(&e.vector(e.values.len() - 1))?.embed(n, leg.offset);
                    ev = prob.inner(&mu, 1 - j, opts)?;
                    if ev.value <= best + 1e-10 {
                        best = best.max(ev.value);
                        break;
                    }
                    best = ev.value;
                }
                Ok(best)
            })
            .collect();
        for v in vals {
            from[j] = from[j].max(v?);
        }
    }
    Ok(StateReach {
        value: from[0].max(from[1]),
        from_leg: from,
        samples,
        seed,
    })
}

/// How to build the modular tunnel between two triples.
#[derive(Clone, Debug)]
pub enum TunnelRecipe {
    Identity,
    /// `D_2 = D_1 + T` on the same algebra.
    Perturbation,
    Bridge { x: CMatrix, eps: f64 },
}

pub fn build_modular_tunnel(
    t1: &FiniteSpectralTriple,
    t2: &FiniteSpectralTriple,
    recipe: &TunnelRecipe,
    opts: &SolveOptions,
) -> Result<ModularTunnel> {
    let same_algebra = t1.hilbert_dim() == t2.hilbert_dim()
        && t1.alg.dim() == t2.alg.dim()
        && t2.alg.basis().iter().all(|b| t1.alg.contains(b));
    match recipe {
        TunnelRecipe::Identity => {
            if !same_algebra || (t1.dirac.as_matrix() - t2.dirac.as_matrix()).norm() > 0.0 {
                return Err(Error::Domain("identity tunnel needs equal triples".into()));
            }
            identity_modular_tunnel(t1)
        }
        TunnelRecipe::Perturbation => {
            if !same_algebra {
                return Err(Error::Domain("perturbation tunnel needs the same algebra on both sides".into()));
            }
            let pert = HermMatrix::new(t2.dirac.as_matrix() - t1.dirac.as_matrix())?;
            modular_tunnel_perturbation(t1, &pert, opts)
        }
        TunnelRecipe::Bridge { x, eps } => modular_tunnel_bridge(t1, t2, x, *eps, 64, 0xB41D, opts),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct PropinquityOptions {
    /// Candidate values of `eps`; sorted internally.
    pub eps_grid: Vec<f64>,
    /// Points of the time grid on `[-1/eps, 1/eps]`.
    pub n_times: usize,
    pub extent: ExtentOptions,
    pub reach: ReachOptions,
    pub state_samples: usize,
}

impl Default for PropinquityOptions {
    fn default() -> Self {
        PropinquityOptions {
            eps_grid: (1..=70).map(|k| k as f64 * 0.01).collect(),
            n_times: 9,
            extent: ExtentOptions {
                n_outer: 24,
                n_restarts: 3,
                ascent_steps: 6,
                ..Default::default()
            },
            reach: ReachOptions {
                n_samples: 12,
                n_restarts: 2,
                ascent_steps: 4,
                ..Default::default()
            },
            state_samples: 12,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct MagnitudeReport {
    pub eps: f64,
    /// `max(extent of the algebra tunnel, extent of the base tunnel)`.
    pub extent: f64,
    pub reach: f64,
    pub modular_reach: f64,
    pub magnitude: f64,
    pub n_times: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct PropinquityBound {
    pub value: f64,
    pub capped: bool,
    pub tunnel: String,
    pub algebra_extent: f64,
    pub base_extent: f64,
    pub reach: f64,
    pub evaluations: Vec<MagnitudeReport>,
}

/// The three magnitude components of a modular tunnel that do not depend
/// on `eps`.
pub struct FixedComponents {
    pub algebra_extent: ExtentEstimate,
    pub base_extent: ExtentEstimate,
    pub reach: StateReach,
}

pub fn fixed_components(mt: &ModularTunnel, po: &PropinquityOptions, opts: &SolveOptions) -> Result<FixedComponents> {
    Ok(FixedComponents {
        algebra_extent: extent_estimate(&mt.tunnel, &po.extent, opts)?,
        base_extent: extent_estimate(&mt.base_tunnel()?, &po.extent, opts)?,
        reach: state_reach(&mt.tunnel, po.state_samples, 4, po.extent.seed, opts)?,
    })
}

/// `eps`-magnitude of a modular tunnel with the unitary groups of its legs.
pub fn magnitude_at(
    mt: &ModularTunnel,
    fixed: &FixedComponents,
    eps: f64,
    po: &PropinquityOptions,
    opts: &SolveOptions,
) -> Result<MagnitudeReport> {
    let times = time_grid(eps, po.n_times);
    let extent = fixed.algebra_extent.value.max(fixed.base_extent.value);
    let modular_reach = covariant_reach(mt, &times, &po.reach, opts)?.value;
    Ok(MagnitudeReport {
        eps,
        extent,
        reach: fixed.reach.value,
        modular_reach,
        magnitude: magnitude(extent, fixed.reach.value, modular_reach),
        n_times: times.len(),
    })
}

/// Smallest `eps` on the grid with `magnitude(tau, eps) <= eps`, found by
/// bisection (the magnitude does not increase with `eps`), or `sqrt(2)/2`
/// when no grid point qualifies.
pub fn spectral_propinquity_upper_bound(
    t1: &FiniteSpectralTriple,
    t2: &FiniteSpectralTriple,
    recipe: &TunnelRecipe,
    po: &PropinquityOptions,
    opts: &SolveOptions,
) -> Result<PropinquityBound> {
    let mt = build_modular_tunnel(t1, t2, recipe, opts)?;
    propinquity_bound_for(&mt, po, opts)
}

pub fn propinquity_bound_for(mt: &ModularTunnel, po: &PropinquityOptions, opts: &SolveOptions) -> Result<PropinquityBound> {
    let fixed = fixed_components(mt, po, opts)?;
    let mut grid: Vec<f64> = po.eps_grid.iter().copied().filter(|&e| e > 0.0 && e < EPS_CAP).collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let floor = fixed
        .algebra_extent
        .value
        .max(fixed.base_extent.value)
        .max(fixed.reach.value);
    let mut evaluations = vec![];
    let ok = |e: f64, evaluations: &mut Vec<MagnitudeReport>| -> Result<bool> {
        if floor > e {
            return Ok(false);
        }
        let m = magnitude_at(mt, &fixed, e, po, opts)?;
        let pass = m.magnitude <= e;
        evaluations.push(m);
        Ok(pass)
    };
    let (mut lo, mut hi) = (0usize, grid.len());
    while lo < hi {
        let mid = (lo + hi) / 2;
        if ok(grid[mid], &mut evaluations)? {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let capped = lo == grid.len();
    Ok(PropinquityBound {
        value: if capped { EPS_CAP } else { grid[lo] },
        capped,
        tunnel: mt.label.clone(),
        algebra_extent: fixed.algebra_extent.value,
        base_extent: fixed.base_extent.value,
        reach: fixed.reach.value,
        evaluations,
    })
}
