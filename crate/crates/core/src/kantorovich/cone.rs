//! Log-barrier interior-point solver for small conic programs.
//!
//! maximize `c . x` over `x in R^n` subject to
//!
//! * linear matrix inequalities `F0 + sum_i x_i F_i >= 0` (complex Hermitian),
//! * second-order cones `|A x + b| <= g . x + h`,
//! * half-spaces `a . x <= b`.
//!
//! The caller supplies a strictly feasible starting point.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::matrix::{cholesky_hpd, solve_lower};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{CMatrix, C64};

#[derive(Clone, Debug)]
pub struct Lmi {
    pub f0: CMatrix,
    pub terms: Vec<(usize, CMatrix)>,
}

#[derive(Clone, Debug)]
pub struct Soc {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub g: DVector<f64>,
    pub h: f64,
}

#[derive(Clone, Debug)]
pub struct HalfSpace {
    pub a: DVector<f64>,
    pub b: f64,
}

#[derive(Clone, Debug)]
pub struct ConeProgram {
    pub n: usize,
    pub objective: DVector<f64>,
    pub lmis: Vec<Lmi>,
    pub socs: Vec<Soc>,
    pub halfspaces: Vec<HalfSpace>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ConeSettings {
    /// Absolute duality-gap target.
    pub gap_tol: f64,
    /// Relative duality-gap target, scaled by `1 + |objective|`.
    pub rel_gap_tol: f64,
    pub max_newton: usize,
    pub mu: f64,
}

impl Default for ConeSettings {
    fn default() -> Self {
        ConeSettings {
            gap_tol: 1e-10,
            rel_gap_tol: 1e-10,
            max_newton: 2000,
            mu: 12.0,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct ConeStats {
    pub newton_steps: usize,
    pub outer_steps: usize,
    pub barrier_parameter: f64,
    pub duality_gap: f64,
    pub newton_decrement: f64,
    pub min_slack: f64,
    pub converged: bool,
}

pub struct ConeSolution {
    pub x: DVector<f64>,
    pub objective: f64,
    pub stats: ConeStats,
}

impl Lmi {
    pub fn size(&self) -> usize {
        self.f0.nrows()
    }

    fn eval(&self, x: &DVector<f64>) -> CMatrix {
        let mut f = self.f0.clone();
        for (i, fi) in &self.terms {
            if x[*i] != 0.0 {
                f += fi.scale(x[*i]);
            }
        }
        f
    }
}

impl Soc {
    fn parts(&self, x: &DVector<f64>) -> (DVector<f64>, f64) {
        (&self.a * x + &self.b, self.g.dot(x) + self.h)
    }
}

impl ConeProgram {
    pub fn new(n: usize, objective: DVector<f64>) -> Self {
        ConeProgram {
            n,
            objective,
            lmis: vec![],
            socs: vec![],
            halfspaces: vec![],
        }
    }

    fn nu(&self) -> f64 {
        (self.lmis.iter().map(Lmi::size).sum::<usize>() + 2 * self.socs.len() + self.halfspaces.len())
            as f64
    }

    /// Barrier value, or `None` outside the interior.
    fn barrier(&self, x: &DVector<f64>) -> Option<f64> {
        let mut phi = 0.0;
        for l in &self.lmis {
            let lo = cholesky_hpd(&l.eval(x))?;
            let ld: f64 = lo.diagonal().iter().map(|z| z.re.ln()).sum();
            if !ld.is_finite() {
                return None;
            }
            phi -= 2.0 * ld;
        }
        for s in &self.socs {
            let (y, t) = s.parts(x);
            let f = t * t - y.norm_squared();
            if t <= 0.0 || f <= 0.0 {
                return None;
            }
            phi -= f.ln();
        }
        for hs in &self.halfspaces {
            let sl = hs.b - hs.a.dot(x);
            if sl <= 0.0 {
                return None;
            }
            phi -= sl.ln();
        }
        Some(phi)
    }

    /// Smallest normalized slack over all constraints (negative when infeasible).
    pub fn min_slack(&self, x: &DVector<f64>) -> f64 {
        let mut m = f64::INFINITY;
        for l in &self.lmis {
            m = m.min(crate::matrix::eig_of(&l.eval(x)).min());
        }
        for s in &self.socs {
            let (y, t) = s.parts(x);
            m = m.min(t - y.norm());
        }
        for hs in &self.halfspaces {
            m = m.min(hs.b - hs.a.dot(x));
        }
        m
    }

    fn grad_hess(&self, x: &DVector<f64>, soc_gram: &[DMatrix<f64>]) -> Option<(DVector<f64>, DMatrix<f64>)> {
        let n = self.n;
        let mut g = DVector::zeros(n);
        let mut h = DMatrix::zeros(n, n);
        for l in &self.lmis {
            if l.terms.is_empty() {
                continue;
            }
            let lo = cholesky_hpd(&l.eval(x))?;
            let m = l.size();
            let k = l.terms.len();
            // Y_i = L^{-1} F_i L^{-*}, stacked as real columns.
            let mut v = DMatrix::<f64>::zeros(2 * m * m, k);
            for (col, (i, fi)) in l.terms.iter().enumerate() {
                let z = solve_lower(&lo, fi);
                let y = solve_lower(&lo, &z.adjoint()).adjoint();
                let tr: f64 = (0..m).map(|a| y[(a, a)].re).sum();
                g[*i] -= tr;
                for (r, val) in y.iter().enumerate() {
                    v[(2 * r, col)] = val.re;
                    v[(2 * r + 1, col)] = val.im;
                }
            }
            let vtv = v.transpose() * &v;
            for (a, (i, _)) in l.terms.iter().enumerate() {
                for (b, (j, _)) in l.terms.iter().enumerate() {
                    h[(*i, *j)] += vtv[(a, b)];
                }
            }
        }
        for (s, ata) in self.socs.iter().zip(soc_gram) {
            let (y, t) = s.parts(x);
            let f = t * t - y.norm_squared();
            if t <= 0.0 || f <= 0.0 {
                return None;
            }
            let aty = s.a.tr_mul(&y);
            let df = s.g.scale(2.0 * t) - aty.scale(2.0);
            g -= df.unscale(f);
            // Hessian of -log f: df df^T / f^2 - (2 g g^T - 2 A^T A) / f.
            h.ger(1.0 / (f * f), &df, &df, 1.0);
            h.ger(-2.0 / f, &s.g, &s.g, 1.0);
            h += ata * (2.0 / f);
        }
        for hs in &self.halfspaces {
            let sl = hs.b - hs.a.dot(x);
            if sl <= 0.0 {
                return None;
            }
            g += hs.a.unscale(sl);
            h += (&hs.a * hs.a.transpose()).unscale(sl * sl);
        }
        Some((g, h))
    }

    fn newton_direction(h: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
        let scale = h.diagonal().iter().fold(0.0f64, |a, &d| a.max(d.abs())).max(1e-300);
        let mut reg = 1e-14 * scale;
        for _ in 0..8 {
            let mut hr = h.clone();
            for i in 0..hr.nrows() {
                hr[(i, i)] += reg;
            }
            if let Some(ch) = Cholesky::new(hr) {
                let d = ch.solve(rhs);
                if d.iter().all(|z| z.is_finite()) {
                    return Some(d);
                }
            }
            reg *= 100.0;
        }
        None
    }

    pub fn solve(&self, x0: &DVector<f64>, settings: &ConeSettings) -> Result<ConeSolution> {
        let mut stats = ConeStats {
            barrier_parameter: self.nu(),
            ..Default::default()
        };
        let fail = |msg: &str, stats: &ConeStats| Error::Solver {
            message: msg.to_string(),
            diagnostics: Box::new(super::Diagnostics::from_cone(stats)),
        };
        if self.barrier(x0).is_none() {
            return Err(fail("starting point is not strictly feasible", &stats));
        }
        let nu = self.nu().max(1.0);
        let c = &self.objective;
        if c.norm() == 0.0 || self.n == 0 {
            stats.converged = true;
            stats.min_slack = self.min_slack(x0);
            return Ok(ConeSolution {
                x: x0.clone(),
                objective: 0.0,
                stats,
            });
        }
        let soc_gram: Vec<DMatrix<f64>> = self.socs.iter().map(|s| s.a.tr_mul(&s.a)).collect();
        let mut x = x0.clone();
        let mut t = 1.0;
        loop {
            // Centering.
            let mut inner = 0usize;
            loop {
                if stats.newton_steps >= settings.max_newton {
                    stats.duality_gap = nu / t;
                    return Err(fail("Newton iteration limit reached", &stats));
                }
                stats.newton_steps += 1;
                let (gb, hb) = self
                    .grad_hess(&x, &soc_gram)
                    .ok_or_else(|| fail("lost strict feasibility", &stats))?;
                let grad = gb - c.scale(t);
                let dx = Self::newton_direction(&hb, &(-&grad))
                    .ok_or_else(|| fail("singular Newton system", &stats))?;
                let lam2 = -grad.dot(&dx);
                stats.newton_decrement = lam2.max(0.0).sqrt();
                if lam2 <= 2e-10 {
                    break;
                }
                inner += 1;
                // Roundoff can keep the decrement above the threshold at
                // large t; a nearly centered point is good enough there and
                // the gap estimate below accounts for the decrement.
                if inner > 60 && stats.newton_decrement < 0.5 {
                    break;
                }
                let f0 = -t * c.dot(&x) + self.barrier(&x).unwrap_or(f64::INFINITY);
                // Inside the quadratic-convergence region a full step is safe
                // for self-concordant barriers; outside use damped backtracking.
                let quadratic = stats.newton_decrement < 0.2;
                let mut alpha = 1.0;
                let mut moved = false;
                for _ in 0..60 {
                    let xn = &x + dx.scale(alpha);
                    if let Some(b) = self.barrier(&xn) {
                        let fnew = -t * c.dot(&xn) + b;
                        if quadratic || fnew <= f0 - 0.25 * alpha * lam2 {
                            x = xn;
                            moved = true;
                            break;
                        }
                    }
                    alpha *= 0.5;
                }
                if !moved {
                    break;
                }
                if x.iter().any(|v| v.abs() > 1e12) {
                    return Err(Error::Unbounded(
                        "iterates diverged; the objective is unbounded on the feasible set".into(),
                    ));
                }
            }
            stats.outer_steps += 1;
            let obj = c.dot(&x);
            let lam = stats.newton_decrement;
            let gap = if lam < 0.5 { (nu + lam * nu.sqrt() / (1.0 - lam)) / t } else { f64::INFINITY };
            stats.duality_gap = gap;
            if gap <= settings.gap_tol + settings.rel_gap_tol * obj.abs() {
                stats.converged = true;
                stats.min_slack = self.min_slack(&x);
                return Ok(ConeSolution {
                    x,
                    objective: obj,
                    stats,
                });
            }
            t *= settings.mu;
        }
    }
}

/// Block LMI `[[beta I, M], [M*, beta I]] >= 0`, i.e. `|M| <= beta`, where
/// `M = m0 + sum_i x_i m_i` and `beta = beta0 + sum_j x_j beta_j`.
pub fn norm_ball_lmi(
    m0: Option<&CMatrix>,
    images: &[(usize, CMatrix)],
    rows: usize,
    cols: usize,
    beta0: f64,
    beta_vars: &[(usize, f64)],
) -> Lmi {
    let size = rows + cols;
    let embed = |m: Option<&CMatrix>, beta: f64| {
        let mut f = CMatrix::zeros(size, size);
        for k in 0..size {
            f[(k, k)] = C64::new(beta, 0.0);
        }
        if let Some(m) = m {
            f.view_mut((0, rows), (rows, cols)).copy_from(m);
            f.view_mut((rows, 0), (cols, rows)).copy_from(&m.adjoint());
        }
        f
    };
    let f0 = embed(m0, beta0);
    let mut terms: Vec<(usize, CMatrix)> = Vec::new();
    for (i, m) in images {
        terms.push((*i, embed(Some(m), 0.0)));
    }
    for (j, b) in beta_vars {
        if let Some(pos) = terms.iter().position(|(i, _)| i == j) {
            let extra = embed(None, *b);
            terms[pos].1 += extra;
        } else {
            terms.push((*j, embed(None, *b)));
        }
    }
    Lmi { f0, terms }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::c;

    #[test]
    fn box_linear_program() {
        // max x + 2y, |x| <= 1, |y| <= 1 as half-spaces.
        let mut p = ConeProgram::new(2, DVector::from_vec(vec![1.0, 2.0]));
        for (a, b) in [([1.0, 0.0], 1.0), ([-1.0, 0.0], 1.0), ([0.0, 1.0], 1.0), ([0.0, -1.0], 1.0)] {
            p.halfspaces.push(HalfSpace {
                a: DVector::from_vec(a.to_vec()),
                b,
            });
        }
        let s = p.solve(&DVector::zeros(2), &ConeSettings::default()).unwrap();
        assert!((s.objective - 3.0).abs() < 1e-8);
    }

    #[test]
    fn disc_by_cone() {
        // max x + y over the unit disc.
        let mut p = ConeProgram::new(2, DVector::from_vec(vec![1.0, 1.0]));
        p.socs.push(Soc {
            a: DMatrix::identity(2, 2),
            b: DVector::zeros(2),
            g: DVector::zeros(2),
            h: 1.0,
        });
        let s = p.solve(&DVector::zeros(2), &ConeSettings::default()).unwrap();
        assert!((s.objective - 2f64.sqrt()).abs() < 1e-8);
    }

    #[test]
    fn spectral_ball() {
        // max x over |x sigma_x + y sigma_z| <= 1 gives 1.
        let sx = crate::matrix::pauli_x();
        let sz = crate::matrix::pauli_z();
        let mut p = ConeProgram::new(2, DVector::from_vec(vec![1.0, 0.0]));
        p.lmis.push(norm_ball_lmi(None, &[(0, sx), (1, sz)], 2, 2, 1.0, &[]));
        let s = p.solve(&DVector::zeros(2), &ConeSettings::default()).unwrap();
        assert!((s.objective - 1.0).abs() < 1e-8);
        let _ = c(0.0, 0.0);
    }
}
