//! Fuzzy quantum tori: twisted group algebras of `(Z_m)^d` acting on
//! `l^2((Z_m)^d) (x) C^s`, `s = 2^floor(d/2)` (2 for `d = 1`), with truncated derivations,
//! Clifford matrices, perturbed Dirac operators and the dual action.
//!
//! Frequencies are represented in the window `[-floor(m/2), ceil(m/2))`.
//! Basis vectors of `l^2` are ordered with the first coordinate fastest.

use serde::{Deserialize, Serialize};

use crate::algebra::FiniteAlgebra;
use crate::error::{Error, Result};
use crate::matrix::{c, commutator, kron, op_norm, pauli_x, pauli_y, CMatrix, HermMatrix, C64};
use crate::triple::{check_metric, FiniteSpectralTriple};

/// Finitely supported function on `(Z_m)^d`.
pub type Coefficients = Vec<(Vec<i64>, C64)>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FuzzyTorusSpec {
    pub d: usize,
    pub m: usize,
    /// Skew-symmetric `d x d`, entries in `Z / m`.
    pub theta: Vec<Vec<f64>>,
    /// `(t_0, ..., t_d)`; empty means no perturbation.
    pub t: Vec<Coefficients>,
}

impl FuzzyTorusSpec {
    pub fn new(d: usize, m: usize, theta: Vec<Vec<f64>>, t: Vec<Coefficients>) -> Result<Self> {
        let s = FuzzyTorusSpec { d, m, theta, t };
        s.validate()?;
        Ok(s)
    }

    /// `d = 2` with `theta_12 = -theta_21 = theta`.
    pub fn planar(m: usize, theta: f64) -> Result<Self> {
        Self::new(2, m, vec![vec![0.0, theta], vec![-theta, 0.0]], vec![])
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 1 || self.m < 2 {
            return Err(Error::Domain(format!("need d >= 1 and m >= 2, got d = {}, m = {}", self.d, self.m)));
        }
        if self.theta.len() != self.d || self.theta.iter().any(|r| r.len() != self.d) {
            return Err(Error::Dimension(format!("theta must be {0} x {0}", self.d)));
        }
        for i in 0..self.d {
            for j in 0..self.d {
                if self.theta[i][j] != -self.theta[j][i] {
                    return Err(Error::Domain(format!("theta is not skew-symmetric at ({i}, {j})")));
                }
                let q = self.theta[i][j] * self.m as f64;
                if (q - q.round()).abs() > 1e-9 {
                    return Err(Error::Domain(format!(
                        "theta[{i}][{j}] = {} is not a multiple of 1/{}",
                        self.theta[i][j], self.m
                    )));
                }
            }
        }
        if !self.t.is_empty() && self.t.len() != self.d + 1 {
            return Err(Error::Dimension(format!("T needs d + 1 = {} coefficient functions", self.d + 1)));
        }
        for tj in &self.t {
            for (z, _) in tj {
                if z.len() != self.d {
                    return Err(Error::Dimension("coefficient index has the wrong length".into()));
                }
            }
        }
        Ok(())
    }

    /// `sum_j |t_j|_1`.
    pub fn t_l1(&self) -> f64 {
        self.t.iter().flat_map(|tj| tj.iter().map(|(_, a)| a.norm())).sum()
    }

    pub fn lattice_size(&self) -> usize {
        self.m.pow(self.d as u32)
    }

    pub fn spinor_dim(&self) -> usize {
        gammas(self.d).size()
    }

    pub fn hilbert_dim(&self) -> usize {
        self.lattice_size() * self.spinor_dim()
    }

    /// Representative of `k` in `[-floor(m/2), ceil(m/2))`.
    pub fn rep(&self, k: i64) -> i64 {
        let m = self.m as i64;
        let r = k.rem_euclid(m);
        if r < (m + 1) / 2 {
            r
        } else {
            r - m
        }
    }

    pub fn in_window(&self, z: &[i64]) -> bool {
        z.iter().all(|&k| self.rep(k) == k)
    }

    pub fn index(&self, w: &[i64]) -> usize {
        let m = self.m as i64;
        w.iter().rev().fold(0i64, |acc, &k| acc * m + k.rem_euclid(m)) as usize
    }

    pub fn point(&self, mut idx: usize) -> Vec<i64> {
        (0..self.d)
            .map(|_| {
                let k = (idx % self.m) as i64;
                idx /= self.m;
                k
            })
            .collect()
    }

    /// All of `(Z_m)^d` in window representatives.
    pub fn frequencies(&self) -> Vec<Vec<i64>> {
        (0..self.lattice_size())
            .map(|i| self.point(i).into_iter().map(|k| self.rep(k)).collect())
            .collect()
    }

    /// `sigma(xi, eta) = exp(2 i pi (Theta xi) . eta)`.
    pub fn sigma(&self, xi: &[i64], eta: &[i64]) -> C64 {
        let mut s = 0.0;
        for i in 0..self.d {
            for j in 0..self.d {
                s += self.theta[i][j] * xi[j] as f64 * eta[i] as f64;
            }
        }
        C64::from_polar(1.0, 2.0 * std::f64::consts::PI * s)
    }

    /// Phase `p` with `W_z W_w = p W_w W_z`:
    /// `exp(2 i pi ((Theta w) . z - (Theta z) . w))`.
    pub fn commutation_phase(&self, z: &[i64], w: &[i64]) -> C64 {
        self.sigma(w, z) / self.sigma(z, w)
    }
}

/// `(W_z xi)(w) = sigma(w, z) xi(w - z)` on `l^2((Z_m)^d)`.
pub fn weyl(spec: &FuzzyTorusSpec, z: &[i64]) -> CMatrix {
    let n = spec.lattice_size();
    let mut out = CMatrix::zeros(n, n);
    for col in 0..n {
        let v = spec.point(col);
        let w: Vec<i64> = v.iter().zip(z).map(|(a, b)| a + b).collect();
        out[(spec.index(&w), col)] = spec.sigma(&w, z);
    }
    out
}

/// `pi(p) = sum_z p(z) W_z` on `l^2`.
pub fn represent(spec: &FuzzyTorusSpec, p: &Coefficients) -> CMatrix {
    let n = spec.lattice_size();
    let mut out = CMatrix::zeros(n, n);
    for (z, a) in p {
        out += weyl(spec, z) * *a;
    }
    out
}

/// `pi(p) (x) 1` on the full Hilbert space.
pub fn represent_full(spec: &FuzzyTorusSpec, p: &Coefficients) -> CMatrix {
    let s = spec.spinor_dim();
    kron(&represent(spec, p), &CMatrix::identity(s, s))
}

/// Diagonal `d_j` with eigenvalue the window representative of `w_j`.
pub fn derivation(spec: &FuzzyTorusSpec, j: usize) -> Result<HermMatrix> {
    if j >= spec.d {
        return Err(Error::Domain(format!("derivation index {j} out of range for d = {}", spec.d)));
    }
    let diag: Vec<f64> = (0..spec.lattice_size())
        .map(|i| spec.rep(spec.point(i)[j]) as f64)
        .collect();
    Ok(HermMatrix::from_real_diagonal(&diag))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivationDefect {
    pub z: Vec<i64>,
    pub j: usize,
    pub in_window: bool,
    /// Largest entry of `[d_j, W_z] - z_j W_z` over columns `v` with
    /// `v + z` inside the window (no wrap-around).
    pub interior: f64,
    /// `| [d_j, W_z] - z_j W_z |` on the whole space.
    pub truncation: f64,
}

/// Compares `[d_j, W_z]` with `z_j W_z`, `z` taken as given (not reduced).
pub fn derivation_defect(spec: &FuzzyTorusSpec, j: usize, z: &[i64]) -> Result<DerivationDefect> {
    let dj = derivation(spec, j)?;
    let w = weyl(spec, z);
    let diff = commutator(dj.as_matrix(), &w) - w.scale(z[j] as f64);
    let mut interior: f64 = 0.0;
    for col in 0..spec.lattice_size() {
        let v: Vec<i64> = spec.point(col).into_iter().map(|k| spec.rep(k)).collect();
        let target: Vec<i64> = v.iter().zip(z).map(|(a, b)| a + b).collect();
        if spec.in_window(&target) {
            let row = spec.index(&target);
            interior = interior.max(diff[(row, col)].norm());
        }
    }
    Ok(DerivationDefect {
        z: z.to_vec(),
        j,
        in_window: spec.in_window(z),
        interior,
        truncation: op_norm(&diff),
    })
}

#[derive(Clone, Debug)]
pub struct GammaSet {
    pub gammas: Vec<CMatrix>,
}

impl GammaSet {
    pub fn size(&self) -> usize {
        self.gammas.first().map_or(1, |g| g.nrows())
    }

    /// Largest entry of `g_j g_k + g_k g_j - 2 delta_jk`, and the largest
    /// Hermitian and unitarity defects.
    pub fn residual(&self) -> f64 {
        let s = self.size();
        let id = CMatrix::identity(s, s);
        let mut worst: f64 = 0.0;
        for (j, a) in self.gammas.iter().enumerate() {
            worst = worst.max((a - a.adjoint()).map(|z| z.norm()).max());
            worst = worst.max((a * a.adjoint() - &id).map(|z| z.norm()).max());
            for (k, b) in self.gammas.iter().enumerate() {
                let target = if j == k { id.scale(2.0) } else { CMatrix::zeros(s, s) };
                worst = worst.max((a * b + b * a - target).map(|z| z.norm()).max());
            }
        }
        worst
    }
}

/// Clifford generators of size `2^floor(d/2)` (2 for `d = 1`): `d = 1` gives `{s_x}`, even
/// `d` extends `d - 2` by `g (x) s_z`, `1 (x) s_x`, `1 (x) s_y`, odd `d`
/// appends `(-i)^k g_1 ... g_{2k}`.
pub fn gammas(d: usize) -> GammaSet {
    if d == 0 {
        return GammaSet { gammas: vec![] };
    }
    if d == 1 {
        return GammaSet { gammas: vec![pauli_x()] };
    }
    if d % 2 == 0 {
        let prev = gammas(d - 2);
        let s = prev.size();
        let sz = crate::matrix::pauli_z();
        let mut out: Vec<CMatrix> = prev.gammas.iter().map(|g| kron(g, &sz)).collect();
        let id = CMatrix::identity(s, s);
        out.push(kron(&id, &pauli_x()));
        out.push(kron(&id, &pauli_y()));
        GammaSet { gammas: out }
    } else {
        let mut even = gammas(d - 1);
        let k = (d - 1) / 2;
        let s = even.size();
        let prod = even.gammas.iter().fold(CMatrix::identity(s, s), |acc, g| acc * g);
        let phase = C64::from_polar(1.0, -std::f64::consts::FRAC_PI_2 * k as f64);
        even.gammas.push(prod * phase);
        even
    }
}

/// `D_0 = sum_j d_j (x) g_j`.
pub fn dirac_unperturbed(spec: &FuzzyTorusSpec) -> Result<HermMatrix> {
    let g = gammas(spec.d);
    let n = spec.hilbert_dim();
    let mut d = CMatrix::zeros(n, n);
    for j in 0..spec.d {
        d += kron(derivation(spec, j)?.as_matrix(), &g.gammas[j]);
    }
    HermMatrix::new(d)
}

/// `sum_{j=0}^d pi(t_j) (x) g_j` with `g_0 = 1`.
pub fn perturbation(spec: &FuzzyTorusSpec) -> Result<HermMatrix> {
    let n = spec.hilbert_dim();
    let s = spec.spinor_dim();
    let g = gammas(spec.d);
    let mut out = CMatrix::zeros(n, n);
    for (j, tj) in spec.t.iter().enumerate() {
        let gj = if j == 0 { CMatrix::identity(s, s) } else { g.gammas[j - 1].clone() };
        out += kron(&represent(spec, tj), &gj);
    }
    HermMatrix::new(out).map_err(|e| match e {
        Error::NotHermitian(x) => Error::Domain(format!(
            "the perturbation is not self-adjoint (defect {x:.3e}); each t_j must satisfy t_j(-z) = conj(sigma-twisted t_j(z))"
        )),
        e => e,
    })
}

/// Span of all `W_z (x) 1`.
pub fn torus_algebra(spec: &FuzzyTorusSpec) -> Result<FiniteAlgebra> {
    let s = spec.spinor_dim();
    let id = CMatrix::identity(s, s);
    let span: Vec<CMatrix> = spec.frequencies().iter().map(|z| kron(&weyl(spec, z), &id)).collect();
    FiniteAlgebra::from_spanning_set(&span, spec.hilbert_dim())
}

/// `D_{Theta,T} = D_0 + sum_j pi(t_j) (x) g_j`.
pub fn dirac_operator(spec: &FuzzyTorusSpec) -> Result<HermMatrix> {
    let d0 = dirac_unperturbed(spec)?;
    if spec.t.is_empty() {
        return Ok(d0);
    }
    if spec.t_l1() >= 0.25 {
        return Err(Error::Domain(format!("sum of |t_j|_1 = {} must be below 1/4", spec.t_l1())));
    }
    HermMatrix::new(d0.as_matrix() + perturbation(spec)?.as_matrix())
}

/// The fuzzy torus triple, rejected when it is not metric.
pub fn dirac(spec: &FuzzyTorusSpec) -> Result<FiniteSpectralTriple> {
    spec.validate()?;
    let t = FiniteSpectralTriple::new(torus_algebra(spec)?, dirac_operator(spec)?)?;
    let m = check_metric(&t, 0, 0);
    if !m.is_metric {
        return Err(Error::Domain(format!(
            "fuzzy torus triple is not metric (commutator kernel of dimension {})",
            m.kernel_dim
        )));
    }
    Ok(t)
}

/// `L_{T,Theta}(pi(p)) = |[D_{Theta,T}, pi(p) (x) 1]|`, without building the
/// algebra.
pub fn lip_of(spec: &FuzzyTorusSpec, p: &Coefficients) -> Result<f64> {
    let d = dirac_operator(spec)?;
    Ok(op_norm(&commutator(d.as_matrix(), &represent_full(spec, p))))
}

/// `|sum_j pi(d_j p) (x) g_j + [sum_j pi(t_j) (x) g_j, pi(p) (x) 1]|` with the
/// derivations acting on coefficients, `d_j p (z) = z_j p(z)` for `z` in
/// window representatives. This is `L_{T,Theta}(pi(p))` without the
/// wrap-around terms of the truncated `d_j`.
pub fn coefficient_lip_of(spec: &FuzzyTorusSpec, p: &Coefficients) -> Result<f64> {
    let g = gammas(spec.d);
    let n = spec.hilbert_dim();
    let mut out = CMatrix::zeros(n, n);
    for j in 0..spec.d {
        let dp: Coefficients = p
            .iter()
            .map(|(z, a)| (z.clone(), a * spec.rep(z[j]) as f64))
            .collect();
        out += kron(&represent(spec, &dp), &g.gammas[j]);
    }
    if !spec.t.is_empty() {
        out += commutator(perturbation(spec)?.as_matrix(), &represent_full(spec, p));
    }
    Ok(op_norm(&out))
}

/// `L` of `pi(p)` compressed to the basis vectors `w` with all
/// `|w_j| <= radius`, where `[d_j, W_z] = z_j W_z` holds for the low
/// frequencies in `p`.
pub fn window_lip_of(spec: &FuzzyTorusSpec, p: &Coefficients, radius: i64) -> Result<f64> {
    if radius < 0 {
        return Err(Error::Domain(format!("window radius {radius} must be non-negative")));
    }
    if !spec.t.is_empty() && spec.t_l1() >= 0.25 {
        return Err(Error::Domain(format!("sum of |t_j|_1 = {} must be below 1/4", spec.t_l1())));
    }
    // Every basis vector reachable from the box in one step of D or pi(p).
    let reach = p
        .iter()
        .chain(spec.t.iter().flatten())
        .flat_map(|(z, _)| z.iter().map(|&k| spec.rep(k).abs()))
        .max()
        .unwrap_or(0);
    let outer = box_indices(spec, radius + reach);
    let inner: Vec<usize> = outer
        .iter()
        .enumerate()
        .filter(|(_, &i)| spec.point(i).iter().all(|&k| spec.rep(k).abs() <= radius))
        .map(|(a, _)| a)
        .collect();
    let g = gammas(spec.d);
    let s = g.size();
    let id = CMatrix::identity(s, s);
    let n = outer.len();
    let mut d = CMatrix::zeros(n * s, n * s);
    for j in 0..spec.d {
        let diag = CMatrix::from_fn(n, n, |a, b| {
            if a == b { C64::new(spec.rep(spec.point(outer[a])[j]) as f64, 0.0) } else { C64::new(0.0, 0.0) }
        });
        d += kron(&diag, &g.gammas[j]);
    }
    for (j, tj) in spec.t.iter().enumerate() {
        let gj = if j == 0 { &id } else { &g.gammas[j - 1] };
        d += kron(&local_represent(spec, tj, &outer), gj);
    }
    let a = kron(&local_represent(spec, p, &outer), &id);
    let cm = commutator(&d, &a);
    let keep: Vec<usize> = inner.iter().flat_map(|&i| (0..s).map(move |c| i * s + c)).collect();
    let sub = CMatrix::from_fn(keep.len(), keep.len(), |x, y| cm[(keep[x], keep[y])]);
    Ok(op_norm(&sub))
}

fn box_indices(spec: &FuzzyTorusSpec, radius: i64) -> Vec<usize> {
    (0..spec.lattice_size())
        .filter(|&i| spec.point(i).iter().all(|&k| spec.rep(k).abs() <= radius))
        .collect()
}

/// Matrix of `pi(q)` between the listed basis vectors.
fn local_represent(spec: &FuzzyTorusSpec, q: &Coefficients, idx: &[usize]) -> CMatrix {
    let pos: std::collections::HashMap<usize, usize> = idx.iter().enumerate().map(|(a, &i)| (i, a)).collect();
    let mut out = CMatrix::zeros(idx.len(), idx.len());
    for (col, &i) in idx.iter().enumerate() {
        let v = spec.point(i);
        for (z, c) in q {
            let w: Vec<i64> = v.iter().zip(z).map(|(a, b)| a + b).collect();
            if let Some(&row) = pos.get(&spec.index(&w)) {
                out[(row, col)] += spec.sigma(&w, z) * *c;
            }
        }
    }
    out
}

/// Coefficients of `a = sum_z a_z (W_z (x) 1)`: `a_z = tr(W_z^* a) / N`.
pub fn coefficients_of(spec: &FuzzyTorusSpec, a: &CMatrix) -> Coefficients {
    let s = spec.spinor_dim();
    let n = spec.hilbert_dim() as f64;
    let id = CMatrix::identity(s, s);
    spec.frequencies()
        .into_iter()
        .map(|z| {
            let w = kron(&weyl(spec, &z), &id);
            let coef = (w.adjoint() * a).trace() / n;
            (z, coef)
        })
        .filter(|(_, a)| a.norm() > 1e-14)
        .collect()
}

/// Grid point `g = k / m` of the dual torus.
pub fn dual_grid(spec: &FuzzyTorusSpec) -> Vec<Vec<f64>> {
    spec.frequencies()
        .into_iter()
        .map(|k| k.into_iter().map(|v| v.rem_euclid(spec.m as i64) as f64 / spec.m as f64).collect())
        .collect()
}

/// `alpha^g(W_z) = exp(2 i pi g . z) W_z`, `z` in window representatives.
pub fn dual_action(spec: &FuzzyTorusSpec, g: &[f64], p: &Coefficients) -> Coefficients {
    p.iter()
        .map(|(z, a)| {
            let zr: Vec<i64> = z.iter().map(|&k| spec.rep(k)).collect();
            let ph: f64 = g.iter().zip(&zr).map(|(x, &k)| x * k as f64).sum();
            (z.clone(), a * C64::from_polar(1.0, 2.0 * std::f64::consts::PI * ph))
        })
        .collect()
}

/// Euclidean length on the fundamental domain of `R^d / Z^d`.
pub fn torus_length(g: &[f64]) -> f64 {
    g.iter()
        .map(|x| {
            let f = x.rem_euclid(1.0);
            let v = f.min(1.0 - f);
            v * v
        })
        .sum::<f64>()
        .sqrt()
}

/// `S_Theta(a) = max_{g != 0} |a - alpha^g(a)| / l(g)` over the dual grid.
pub fn s_theta(spec: &FuzzyTorusSpec, p: &Coefficients) -> f64 {
    let a = represent(spec, p);
    dual_grid(spec)
        .iter()
        .filter(|g| torus_length(g) > 0.0)
        .map(|g| op_norm(&(&a - represent(spec, &dual_action(spec, g, p)))) / torus_length(g))
        .fold(0.0, f64::max)
}

/// `x = P (x) 1` for the projection `P` onto `{ w : max_j |w_j| <= radius }`,
/// tapered linearly to 0 over `taper` further steps when `taper > 0`.
pub fn bridge_x(spec: &FuzzyTorusSpec, radius: i64, taper: usize) -> Result<CMatrix> {
    if radius < 0 {
        return Err(Error::Domain("bridge projection is empty for a negative radius".into()));
    }
    let s = spec.spinor_dim();
    let diag: Vec<f64> = (0..spec.lattice_size())
        .map(|i| {
            let r = spec.point(i).iter().map(|&k| spec.rep(k).abs()).max().unwrap_or(0);
            if r <= radius {
                1.0
            } else if taper > 0 {
                (1.0 - (r - radius) as f64 / (taper as f64 + 1.0)).max(0.0)
            } else {
                0.0
            }
        })
        .collect();
    let p = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(diag.len(), diag.iter().map(|&v| c(v, 0.0))));
    Ok(kron(&p, &CMatrix::identity(s, s)))
}

/// Largest `|[x, pi(p)]| / L(pi(p))` over the given elements.
pub fn bridge_commutator_ratio(spec: &FuzzyTorusSpec, x: &CMatrix, elements: &[Coefficients]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for p in elements {
        let a = represent_full(spec, p);
        let l = lip_of(spec, p)?;
        if l > 0.0 {
            worst = worst.max(op_norm(&commutator(x, &a)) / l);
        }
    }
    Ok(worst)
}

/// Smallest radius whose projection has `|[x, pi(p)]| <= eps L(pi(p))` on
/// the given elements, with the attained ratio.
pub fn choose_bridge_x(spec: &FuzzyTorusSpec, eps: f64, elements: &[Coefficients]) -> Result<(CMatrix, i64, f64)> {
    let max_r = (spec.m / 2) as i64;
    for r in 0..=max_r {
        let x = bridge_x(spec, r, 0)?;
        let ratio = bridge_commutator_ratio(spec, &x, elements)?;
        if ratio <= eps {
            return Ok((x, r, ratio));
        }
    }
    Err(Error::Domain("no window radius meets the commutator bound".into()))
}

/// Test elements `W_{e_j} + W_{-e_j}`, their sum, and `W_{e_1 + e_2} + W_{-e_1 - e_2}` when `d >= 2`.
pub fn test_elements(d: usize) -> Vec<(String, Coefficients)> {
    let one = c(1.0, 0.0);
    let e = |j: usize, s: i64| -> Vec<i64> { (0..d).map(|k| if k == j { s } else { 0 }).collect() };
    let mut out = vec![];
    for j in 0..d {
        out.push((format!("cos{}", j + 1), vec![(e(j, 1), one), (e(j, -1), one)]));
    }
    let mut sum = vec![];
    for j in 0..d {
        sum.push((e(j, 1), one));
        sum.push((e(j, -1), one));
    }
    out.push(("harper".into(), sum));
    if d >= 2 {
        let mut z: Vec<i64> = vec![0; d];
        z[0] = 1;
        z[1] = 1;
        let mz: Vec<i64> = z.iter().map(|v| -v).collect();
        out.push(("diag".into(), vec![(z, one), (mz, one)]));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weyl_identity_and_shift() {
        let s = FuzzyTorusSpec::planar(3, 0.0).unwrap();
        assert_eq!(weyl(&s, &[0, 0]), CMatrix::identity(9, 9));
        let w = weyl(&s, &[1, 0]);
        for col in 0..9 {
            let nz: Vec<_> = (0..9).filter(|&r| w[(r, col)].norm() > 0.0).collect();
            assert_eq!(nz.len(), 1);
            assert_eq!(w[(nz[0], col)], c(1.0, 0.0));
        }
    }

    #[test]
    fn commutation_phase_matches() {
        let s = FuzzyTorusSpec::planar(5, 2.0 / 5.0).unwrap();
        for z in [[1, 0], [2, 3], [-1, 2]] {
            for w in [[0, 1], [1, 1], [3, -2]] {
                let lhs = weyl(&s, &z) * weyl(&s, &w);
                let rhs = weyl(&s, &w) * weyl(&s, &z) * s.commutation_phase(&z, &w);
                assert!((lhs - rhs).map(|z| z.norm()).max() < 1e-12);
            }
        }
    }

    #[test]
    fn adjoint_is_negative_frequency() {
        let s = FuzzyTorusSpec::planar(5, 1.0 / 5.0).unwrap();
        let w = weyl(&s, &[2, 1]);
        assert!((w.adjoint() - weyl(&s, &[-2, -1])).map(|z| z.norm()).max() < 1e-13);
    }

    #[test]
    fn derivation_window() {
        let s = FuzzyTorusSpec::planar(5, 0.0).unwrap();
        let d = derivation_defect(&s, 0, &[1, 0]).unwrap();
        assert_eq!(d.interior, 0.0);
        assert!(d.truncation > 0.0);
        let b = derivation_defect(&s, 0, &[3, 0]).unwrap();
        assert!(!b.in_window && b.truncation > 0.0);
        let i = derivation_defect(&s, 1, &[0, 0]).unwrap();
        assert_eq!(i.truncation, 0.0);
    }

    #[test]
    fn clifford_relations() {
        for d in 1..=5 {
            let g = gammas(d);
            assert_eq!(g.gammas.len(), d);
            assert_eq!(g.size(), if d == 1 { 2 } else { 1 << (d / 2) });
            assert!(g.residual() < 1e-12, "d = {d}");
        }
        let g3 = gammas(3);
        assert!((&g3.gammas[2] - crate::matrix::pauli_z()).map(|z| z.norm()).max() < 1e-15);
    }

    #[test]
    fn fuzzy_triple_is_metric() {
        let s = FuzzyTorusSpec::planar(3, 0.0).unwrap();
        let t = dirac(&s).unwrap();
        assert_eq!(t.alg.dim(), 9);
        assert_eq!(t.hilbert_dim(), 18);
    }

    #[test]
    fn commutator_is_coefficientwise() {
        let s = FuzzyTorusSpec::planar(5, 1.0 / 5.0).unwrap();
        let p: Coefficients = vec![(vec![1, 0], c(0.5, 0.2)), (vec![0, -1], c(-0.3, 0.0))];
        let a = represent(&s, &p);
        let d1 = derivation(&s, 0).unwrap();
        let dp: Coefficients = p.iter().map(|(z, v)| (z.clone(), v * z[0] as f64)).collect();
        let diff = commutator(d1.as_matrix(), &a) - represent(&s, &dp);
        for col in 0..25 {
            let v: Vec<i64> = s.point(col).into_iter().map(|k| s.rep(k)).collect();
            if v.iter().all(|k| k.abs() <= 1) {
                for row in 0..25 {
                    let w: Vec<i64> = s.point(row).into_iter().map(|k| s.rep(k)).collect();
                    if w.iter().all(|k| k.abs() <= 2) && (w[0] - v[0]).abs() <= 1 {
                        assert!(diff[(row, col)].norm() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn perturbation_norm_bound() {
        let t0: Coefficients = vec![(vec![0, 0], c(0.05, 0.0))];
        let t1: Coefficients = vec![(vec![1, 0], c(0.02, 0.0)), (vec![-1, 0], c(0.02, 0.0))];
        let t2: Coefficients = vec![(vec![0, 1], c(0.0, 0.03)), (vec![0, -1], c(0.0, -0.03))];
        let s = FuzzyTorusSpec::new(2, 3, vec![vec![0.0, 0.0], vec![0.0, 0.0]], vec![t0, t1, t2]).unwrap();
        let p = perturbation(&s).unwrap();
        assert!(op_norm(p.as_matrix()) <= s.t_l1() + 1e-12);
        assert!(dirac(&s).is_ok());
    }

    #[test]
    fn window_lip_matches_full_compression() {
        let t0: Coefficients = vec![(vec![0, 0], c(0.05, 0.0))];
        let t1: Coefficients = vec![(vec![1, 0], c(0.02, 0.0)), (vec![-1, 0], c(0.02, 0.0))];
        let t2: Coefficients = vec![(vec![0, 1], c(0.0, 0.03)), (vec![0, -1], c(0.0, -0.03))];
        let th = vec![vec![0.0, 2.0 / 7.0], vec![-2.0 / 7.0, 0.0]];
        let s = FuzzyTorusSpec::new(2, 7, th, vec![t0, t1, t2]).unwrap();
        let d = dirac_operator(&s).unwrap();
        let sp = s.spinor_dim();
        for (_, p) in test_elements(2) {
            let cm = commutator(d.as_matrix(), &represent_full(&s, &p));
            for r in [0, 1, 2, 3] {
                let keep: Vec<usize> = box_indices(&s, r).into_iter().flat_map(|i| (0..sp).map(move |a| i * sp + a)).collect();
                let sub = CMatrix::from_fn(keep.len(), keep.len(), |a, b| cm[(keep[a], keep[b])]);
                assert!((window_lip_of(&s, &p, r).unwrap() - op_norm(&sub)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn dual_action_closed_form() {
        let s = FuzzyTorusSpec::planar(5, 1.0 / 5.0).unwrap();
        let one = c(1.0, 0.0);
        let p: Coefficients = vec![(vec![1, 2], one), (vec![-1, -2], one)];
        let a = represent(&s, &p);
        for g in dual_grid(&s) {
            let phi = 2.0 * std::f64::consts::PI * (g[0] + 2.0 * g[1]);
            let lhs = op_norm(&(&a - represent(&s, &dual_action(&s, &g, &p))));
            let w = weyl(&s, &[1, 2]);
            let rhs = (one - C64::from_polar(1.0, phi)).norm()
                * op_norm(&(&w - w.adjoint() * C64::from_polar(1.0, -phi)));
            assert!((lhs - rhs).abs() < 1e-10);
        }
        assert_eq!(s_theta(&s, &vec![(vec![0, 0], one)]), 0.0);
    }

    #[test]
    fn dual_action_is_conjugation_on_grid() {
        let s = FuzzyTorusSpec::planar(3, 1.0 / 3.0).unwrap();
        let one = c(1.0, 0.0);
        let p: Coefficients = vec![(vec![1, 0], one), (vec![0, 1], c(0.0, 1.0))];
        let q: Coefficients = vec![(vec![1, 1], one)];
        let g = vec![1.0 / 3.0, 2.0 / 3.0];
        let prod = represent(&s, &p) * represent(&s, &q);
        let lhs = represent(&s, &dual_action(&s, &g, &p)) * represent(&s, &dual_action(&s, &g, &q));
        let rhs = represent(&s, &dual_action(&s, &g, &coefficients_of_lattice(&s, &prod)));
        assert!((lhs - rhs).map(|z| z.norm()).max() < 1e-12);
    }

    fn coefficients_of_lattice(s: &FuzzyTorusSpec, a: &CMatrix) -> Coefficients {
        let n = s.lattice_size() as f64;
        s.frequencies()
            .into_iter()
            .map(|z| {
                let coef = (weyl(s, &z).adjoint() * a).trace() / n;
                (z, coef)
            })
            .collect()
    }

    #[test]
    fn bridge_x_cases() {
        let s = FuzzyTorusSpec::planar(5, 0.0).unwrap();
        let x = bridge_x(&s, 2, 0).unwrap();
        assert_eq!(x, CMatrix::identity(50, 50));
        let x = bridge_x(&s, 1, 0).unwrap();
        assert_eq!(commutator(&x, &CMatrix::identity(50, 50)), CMatrix::zeros(50, 50));
        assert!((op_norm(&x) - 1.0).abs() < 1e-12);
        assert!(bridge_x(&s, -1, 0).is_err());
    }
}
