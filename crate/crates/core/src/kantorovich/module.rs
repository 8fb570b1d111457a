//! Max-form D-norms on direct sums of Hilbert spaces and the conic
//! constraints describing their unit balls.

use nalgebra::{DMatrix, DVector};

use super::cone::{ConeProgram, HalfSpace, Soc};
use super::{dual_dnorm, dnorm, Diagnostics, SolveOptions};
use crate::error::Result;
use crate::matrix::{vinner, vnorm, CMatrix, CVector, HermMatrix, C64};

/// Norm on `C^dim` of the form
/// `N(zeta) = max( max_b D_b(zeta_b), max_c w_c |x_c (zeta_l - zeta_r)| )`.
#[derive(Clone, Debug)]
pub struct MaxDNorm {
    pub dim: usize,
    pub blocks: Vec<DBlock>,
    pub couplings: Vec<Coupling>,
}

/// `D`-norm on coordinates `offset..offset + dirac.dim()`.
#[derive(Clone, Debug)]
pub struct DBlock {
    pub offset: usize,
    pub dirac: HermMatrix,
}

/// `weight * | x (zeta[left..] - zeta[right..]) |`.
#[derive(Clone, Debug)]
pub struct Coupling {
    pub weight: f64,
    pub x: CMatrix,
    pub left: usize,
    pub right: usize,
}

pub(crate) fn to_real(v: &CVector) -> DVector<f64> {
    DVector::from_iterator(2 * v.len(), v.iter().flat_map(|z| [z.re, z.im]))
}

pub(crate) fn from_real(x: &[f64]) -> CVector {
    CVector::from_iterator(x.len() / 2, x.chunks(2).map(|p| C64::new(p[0], p[1])))
}

/// Real `2p x 2q` matrix of a complex `p x q` matrix acting on interleaved
/// `(re, im)` coordinates.
pub fn realify(m: &CMatrix) -> DMatrix<f64> {
    let (p, q) = m.shape();
    let mut out = DMatrix::zeros(2 * p, 2 * q);
    for a in 0..p {
        for b in 0..q {
            let z = m[(a, b)];
            out[(2 * a, 2 * b)] = z.re;
            out[(2 * a, 2 * b + 1)] = -z.im;
            out[(2 * a + 1, 2 * b)] = z.im;
            out[(2 * a + 1, 2 * b + 1)] = z.re;
        }
    }
    out
}

/// A complex vector depending affinely on the real program variables:
/// `zeta(x) = base + map x`, in interleaved real coordinates.
#[derive(Clone, Debug)]
pub struct AffineVec {
    pub base: DVector<f64>,
    pub map: DMatrix<f64>,
}

impl AffineVec {
    /// `zeta = x[offset .. offset + 2 dim]`.
    pub fn vars(n_vars: usize, offset: usize, dim: usize) -> Self {
        let mut map = DMatrix::zeros(2 * dim, n_vars);
        for k in 0..2 * dim {
            map[(k, offset + k)] = 1.0;
        }
        AffineVec {
            base: DVector::zeros(2 * dim),
            map,
        }
    }

    pub fn constant(v: &CVector, n_vars: usize) -> Self {
        AffineVec {
            base: to_real(v),
            map: DMatrix::zeros(2 * v.len(), n_vars),
        }
    }

    pub fn dim(&self) -> usize {
        self.base.len() / 2
    }

    /// Complex coordinates `start..start + len`.
    pub fn block(&self, start: usize, len: usize) -> Self {
        AffineVec {
            base: self.base.rows(2 * start, 2 * len).into_owned(),
            map: self.map.rows(2 * start, 2 * len).into_owned(),
        }
    }

    pub fn apply(&self, m: &CMatrix) -> Self {
        let r = realify(m);
        AffineVec {
            base: &r * &self.base,
            map: &r * &self.map,
        }
    }

    pub fn sub(&self, o: &AffineVec) -> Self {
        AffineVec {
            base: &self.base - &o.base,
            map: &self.map - &o.map,
        }
    }

    pub fn add(&self, o: &AffineVec) -> Self {
        AffineVec {
            base: &self.base + &o.base,
            map: &self.map + &o.map,
        }
    }

    /// Stacks two vectors into one on `C^{p + q}`.
    pub fn concat(&self, o: &AffineVec) -> Self {
        let (p, q) = (self.base.len(), o.base.len());
        let n = self.map.ncols();
        let mut base = DVector::zeros(p + q);
        base.rows_mut(0, p).copy_from(&self.base);
        base.rows_mut(p, q).copy_from(&o.base);
        let mut map = DMatrix::zeros(p + q, n);
        map.rows_mut(0, p).copy_from(&self.map);
        map.rows_mut(p, q).copy_from(&o.map);
        AffineVec { base, map }
    }

    pub fn eval(&self, x: &DVector<f64>) -> CVector {
        let r = &self.base + &self.map * x;
        from_real(r.as_slice())
    }

    /// Second-order cone `|zeta(x)| <= g . x + h`.
    pub fn norm_cone(&self, g: DVector<f64>, h: f64) -> Soc {
        Soc {
            a: self.map.clone(),
            b: self.base.clone(),
            g,
            h,
        }
    }
}

/// Auxiliary variables `(s, t)` introduced for each block by
/// [`MaxDNorm::add_ball`].
#[derive(Clone, Debug)]
pub struct BallAux {
    pub split: Vec<(usize, usize)>,
}

impl MaxDNorm {
    /// Plain D-norm on `C^N`.
    pub fn single(d: &HermMatrix) -> Self {
        MaxDNorm {
            dim: d.dim(),
            blocks: vec![DBlock {
                offset: 0,
                dirac: d.clone(),
            }],
            couplings: vec![],
        }
    }

    pub fn value(&self, zeta: &CVector) -> f64 {
        let mut v: f64 = 0.0;
        for b in &self.blocks {
            let n = b.dirac.dim();
            let z = zeta.rows(b.offset, n).into_owned();
            v = v.max(dnorm(&b.dirac, &z));
        }
        for c in &self.couplings {
            let n = c.x.ncols();
            let diff = zeta.rows(c.left, n) - zeta.rows(c.right, n);
            v = v.max(c.weight * vnorm(&(&c.x * diff)));
        }
        v
    }

    /// Number of auxiliary real variables used by [`Self::add_ball`].
    pub fn aux_vars(&self) -> usize {
        2 * self.blocks.len()
    }

    /// Appends `N(zeta(x)) <= g . x + h`, with split variables for the
    /// blocks placed at `next..next + aux_vars()`.
    pub fn add_ball(&self, prog: &mut ConeProgram, zeta: &AffineVec, g: &DVector<f64>, h: f64, next: usize) -> BallAux {
        let nr = prog.n;
        let mut split = vec![];
        let mut k = next;
        for b in &self.blocks {
            let n = b.dirac.dim();
            let (s, t) = (k, k + 1);
            k += 2;
            let z = zeta.block(b.offset, n);
            let mut gs = DVector::zeros(nr);
            gs[s] = 1.0;
            prog.socs.push(z.norm_cone(gs, 0.0));
            let mut gt = DVector::zeros(nr);
            gt[t] = 1.0;
            prog.socs.push(z.apply(b.dirac.as_matrix()).norm_cone(gt, 0.0));
            let mut a = -g.clone();
            a[s] += 1.0;
            a[t] += 1.0;
            prog.halfspaces.push(HalfSpace { a, b: h });
            split.push((s, t));
        }
        for c in &self.couplings {
            let n = c.x.ncols();
            let diff = zeta.block(c.left, n).sub(&zeta.block(c.right, n));
            let w = diff.apply(&c.x.scale(c.weight));
            prog.socs.push(w.norm_cone(g.clone(), h));
        }
        BallAux { split }
    }

    /// Strictly feasible values of the split variables for a point with
    /// `N(zeta) < bound`.
    pub fn init_aux(&self, aux: &BallAux, zeta: &CVector, bound: f64, x: &mut DVector<f64>) {
        for (b, &(s, t)) in self.blocks.iter().zip(&aux.split) {
            let z = zeta.rows(b.offset, b.dirac.dim()).into_owned();
            let (p, q) = (vnorm(&z), vnorm(&(b.dirac.as_matrix() * &z)));
            let slack = ((bound - p - q) / 3.0).max(0.0);
            x[s] = p + slack;
            x[t] = q + slack;
        }
    }

    /// `sup { Re <zeta, v> : N(zeta) <= 1 }` together with a maximizer.
    pub fn dual(&self, v: &CVector, opts: &SolveOptions) -> Result<(f64, CVector, Diagnostics)> {
        if self.blocks.len() == 1 && self.couplings.is_empty() && self.blocks[0].offset == 0 {
            let d = dual_dnorm(v, &self.blocks[0].dirac);
            return Ok((d.value, d.maximizer, Diagnostics { converged: true, ..Default::default() }));
        }
        let nz = 2 * self.dim;
        let n = nz + self.aux_vars();
        let mut obj = DVector::zeros(n);
        obj.rows_mut(0, nz).copy_from(&to_real(v));
        let mut prog = ConeProgram::new(n, obj);
        let zeta = AffineVec::vars(n, 0, self.dim);
        let aux = self.add_ball(&mut prog, &zeta, &DVector::zeros(n), 1.0, nz);
        let mut x0 = DVector::zeros(n);
        self.init_aux(&aux, &CVector::zeros(self.dim), 1.0, &mut x0);
        let sol = prog.solve(&x0, &opts.settings())?;
        let mut zeta = zeta.eval(&sol.x);
        let nv = self.value(&zeta);
        if nv > 1.0 {
            zeta.unscale_mut(nv);
        }
        let attained = vinner(&zeta, v).re;
        Ok((attained, zeta, Diagnostics::from_cone(&sol.stats)))
    }

    /// `inf { N(zeta) : zeta = fixed on the given coordinates }`, the free
    /// coordinates being those not listed. Returns the value and the best
    /// completion.
    pub fn quotient(&self, fixed: &[(usize, C64)], opts: &SolveOptions) -> Result<(f64, CVector, Diagnostics)> {
        let free: Vec<usize> = (0..self.dim).filter(|i| !fixed.iter().any(|(j, _)| j == i)).collect();
        let nf = 2 * free.len();
        let sv = nf;
        let n = nf + 1 + self.aux_vars();
        let mut base = CVector::zeros(self.dim);
        for &(i, z) in fixed {
            base[i] = z;
        }
        let mut zeta = AffineVec::constant(&base, n);
        for (p, &i) in free.iter().enumerate() {
            zeta.map[(2 * i, 2 * p)] = 1.0;
            zeta.map[(2 * i + 1, 2 * p + 1)] = 1.0;
        }
        let mut obj = DVector::zeros(n);
        obj[sv] = -1.0;
        let mut prog = ConeProgram::new(n, obj);
        let mut g = DVector::zeros(n);
        g[sv] = 1.0;
        let aux = self.add_ball(&mut prog, &zeta, &g, 0.0, nf + 1);
        let start = self.value(&base);
        let mut x0 = DVector::zeros(n);
        x0[sv] = 1.0 + 1.5 * start;
        self.init_aux(&aux, &base, x0[sv], &mut x0);
        let sol = prog.solve(&x0, &opts.settings())?;
        let best = zeta.eval(&sol.x);
        Ok((self.value(&best), best, Diagnostics::from_cone(&sol.stats)))
    }
}
