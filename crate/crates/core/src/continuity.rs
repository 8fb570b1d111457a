//! Continuity of the fuzzy torus triples in `(Theta, T)`: propinquity
//! bounds between grid neighbours and the behaviour of `L_{T,Theta}` under
//! refinement of the `Theta` grid.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariant::{build_modular_tunnel, propinquity_bound_for, PropinquityBound, PropinquityOptions, TunnelRecipe, EPS_CAP};
use crate::error::{Error, Result};
use crate::kantorovich::SolveOptions;
use crate::modular::ModularTunnel;
use crate::qtorus::{choose_bridge_x, dirac, lip_of, s_theta, window_lip_of, Coefficients, FuzzyTorusSpec};
use crate::tunnel::verify_quotient;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ContinuityOptions {
    /// Bridge parameters tried in increasing order for `Theta` neighbours.
    pub bridge_eps: Vec<f64>,
    /// Box radius of the window-compressed seminorm.
    pub window_radius: i64,
    /// Skip the propinquity bounds and only tabulate seminorms.
    pub seminorms_only: bool,
    pub quotient_samples: usize,
    pub propinquity: PropinquityOptions,
    pub seed: u64,
}

impl Default for ContinuityOptions {
    fn default() -> Self {
        let mut po = PropinquityOptions {
            n_times: 3,
            eps_grid: (1..=14).map(|k| k as f64 * 0.05).collect(),
            ..Default::default()
        };
        po.extent.n_outer = 8;
        po.extent.n_restarts = 1;
        po.extent.ascent_steps = 3;
        po.reach.n_samples = 4;
        po.reach.n_restarts = 1;
        po.reach.ascent_steps = 2;
        po.state_samples = 4;
        ContinuityOptions {
            bridge_eps: vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7],
            window_radius: 1,
            seminorms_only: false,
            quotient_samples: 16,
            propinquity: po,
            seed: 0xC0A7,
        }
    }
}

/// One CSV row: either a grid cell (`neighbor = "cell"`) with its
/// seminorms, or a neighbour pair with its bound.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ContinuityRow {
    pub theta_id: usize,
    pub t_id: usize,
    /// `cell`, `theta` (next `Theta`, same `T`) or `t` (next `T`, same `Theta`).
    pub neighbor: String,
    pub param_distance: f64,
    pub tunnel: String,
    pub bridge_eps: Option<f64>,
    pub bound: Option<f64>,
    pub capped: Option<bool>,
    pub extent_estimate: Option<f64>,
    pub reach: Option<f64>,
    pub magnitude: Option<f64>,
    /// Extent bound of the perturbation construction, `T` neighbours only.
    pub analytic_bound: Option<f64>,
    pub quotient_excess: Option<f64>,
    pub l_full: Vec<f64>,
    pub l_window: Vec<f64>,
    pub s_theta: Vec<f64>,
    pub seed: u64,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct RefinementRow {
    pub element: String,
    pub m: usize,
    pub theta0: f64,
    pub h: f64,
    pub l_base: f64,
    pub l_step: f64,
    pub difference: f64,
    /// Previous difference over this one.
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ContinuityReport {
    pub elements: Vec<String>,
    pub rows: Vec<ContinuityRow>,
    /// `max S_Theta(p) / L_{T,Theta}(p)` over cells and elements.
    pub k_prime: f64,
    /// The same ratio against the window-compressed seminorm.
    pub k_prime_window: f64,
}

/// Planar `Theta = [[0, theta], [-theta, 0]]`.
pub fn planar_theta(theta: f64) -> Vec<Vec<f64>> {
    vec![vec![0.0, theta], vec![-theta, 0.0]]
}

fn theta_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter().flatten().zip(b.iter().flatten()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn t_distance(a: &[Coefficients], b: &[Coefficients]) -> f64 {
    let mut total = 0.0;
    for j in 0..a.len().max(b.len()) {
        let mut diff: Vec<(Vec<i64>, crate::matrix::C64)> = a.get(j).cloned().unwrap_or_default();
        for (z, v) in b.get(j).cloned().unwrap_or_default() {
            match diff.iter_mut().find(|(w, _)| *w == z) {
                Some(e) => e.1 -= v,
                None => diff.push((z, -v)),
            }
        }
        total += diff.iter().map(|(_, v)| v.norm()).sum::<f64>();
    }
    total
}

fn cell_seed(seed: u64, i: usize, j: usize, kind: u64) -> u64 {
    seed ^ ((i as u64) << 32) ^ ((j as u64) << 8) ^ kind
}

fn empty_row(i: usize, j: usize, neighbor: &str, seed: u64) -> ContinuityRow {
    ContinuityRow {
        theta_id: i,
        t_id: j,
        neighbor: neighbor.into(),
        param_distance: 0.0,
        tunnel: String::new(),
        bridge_eps: None,
        bound: None,
        capped: None,
        extent_estimate: None,
        reach: None,
        magnitude: None,
        analytic_bound: None,
        quotient_excess: None,
        l_full: vec![],
        l_window: vec![],
        s_theta: vec![],
        seed,
        error: None,
    }
}

fn fill_bound(row: &mut ContinuityRow, mt: &ModularTunnel, b: &PropinquityBound, samples: usize, opts: &SolveOptions) -> Result<()> {
    row.tunnel = mt.label.clone();
    row.bound = Some(b.value);
    row.capped = Some(b.capped);
    row.extent_estimate = Some(b.algebra_extent.max(b.base_extent));
    row.reach = Some(b.reach);
    row.magnitude = b
        .evaluations
        .iter()
        .find(|e| e.eps == b.value)
        .or(b.evaluations.last())
        .map(|e| e.magnitude);
    row.quotient_excess = Some(verify_quotient(&mt.tunnel, samples, row.seed, opts)?.worst_excess);
    Ok(())
}

fn seeded(po: &PropinquityOptions, seed: u64) -> PropinquityOptions {
    let mut po = po.clone();
    po.extent.seed = seed;
    po.reach.seed = seed ^ 0x5EED;
    po
}

fn cell_row(spec: &FuzzyTorusSpec, i: usize, j: usize, elements: &[(String, Coefficients)], co: &ContinuityOptions) -> ContinuityRow {
    let mut row = empty_row(i, j, "cell", cell_seed(co.seed, i, j, 0));
    let res: Result<()> = (|| {
        spec.validate()?;
        for (_, p) in elements {
            row.l_full.push(lip_of(spec, p)?);
            row.l_window.push(window_lip_of(spec, p, co.window_radius)?);
            row.s_theta.push(s_theta(spec, p));
        }
        Ok(())
    })();
    row.error = res.err().map(|e| e.to_string());
    row
}

fn t_row(a: &FuzzyTorusSpec, b: &FuzzyTorusSpec, i: usize, j: usize, co: &ContinuityOptions, opts: &SolveOptions) -> ContinuityRow {
    let mut row = empty_row(i, j, "t", cell_seed(co.seed, i, j, 1));
    row.param_distance = t_distance(&a.t, &b.t);
    let res: Result<()> = (|| {
        let (t1, t2) = (dirac(a)?, dirac(b)?);
        let mt = build_modular_tunnel(&t1, &t2, &TunnelRecipe::Perturbation, opts)?;
        row.analytic_bound = mt.tunnel.analytic_extent_bound;
        if co.seminorms_only {
            return Ok(());
        }
        let bound = propinquity_bound_for(&mt, &seeded(&co.propinquity, row.seed), opts)?;
        fill_bound(&mut row, &mt, &bound, co.quotient_samples, opts)
    })();
    row.error = res.err().map(|e| e.to_string());
    row
}

fn theta_row(
    a: &FuzzyTorusSpec,
    b: &FuzzyTorusSpec,
    i: usize,
    j: usize,
    elements: &[(String, Coefficients)],
    co: &ContinuityOptions,
    opts: &SolveOptions,
) -> ContinuityRow {
    let mut row = empty_row(i, j, "theta", cell_seed(co.seed, i, j, 2));
    row.param_distance = theta_distance(&a.theta, &b.theta);
    if co.seminorms_only {
        return row;
    }
    let res: Result<()> = (|| {
        let (t1, t2) = (dirac(a)?, dirac(b)?);
        let ps: Vec<Coefficients> = elements.iter().map(|(_, p)| p.clone()).collect();
        let mut eps_list = co.bridge_eps.clone();
        eps_list.sort_by(f64::total_cmp);
        let mut last = None;
        for eps in eps_list.into_iter().filter(|&e| e > 0.0 && e < EPS_CAP) {
            let x = match choose_bridge_x(a, eps, &ps) {
                Ok((x, _, _)) => x,
                Err(e) => {
                    last = Some(e);
                    continue;
                }
            };
            match build_modular_tunnel(&t1, &t2, &TunnelRecipe::Bridge { x, eps }, opts) {
                Ok(mt) => {
                    row.bridge_eps = Some(eps);
                    let bound = propinquity_bound_for(&mt, &seeded(&co.propinquity, row.seed), opts)?;
                    return fill_bound(&mut row, &mt, &bound, co.quotient_samples, opts);
                }
                Err(e) => last = Some(e),
            }
        }
        Err(last.unwrap_or_else(|| Error::Domain("no bridge parameter below sqrt(2)/2 was given".into())))
    })();
    row.error = res.err().map(|e| e.to_string());
    row
}

/// Seminorms on every cell of `thetas x ts`, and bounds between each
/// cell and its next neighbour along either axis. Failures are recorded
/// in the row and the run continues.
pub fn continuity_experiment(
    base: &FuzzyTorusSpec,
    thetas: &[Vec<Vec<f64>>],
    ts: &[Vec<Coefficients>],
    elements: &[(String, Coefficients)],
    co: &ContinuityOptions,
    opts: &SolveOptions,
) -> ContinuityReport {
    let specs: Vec<Vec<FuzzyTorusSpec>> = thetas
        .iter()
        .map(|th| {
            ts.iter()
                .map(|t| FuzzyTorusSpec {
                    d: base.d,
                    m: base.m,
                    theta: th.clone(),
                    t: t.clone(),
                })
                .collect()
        })
        .collect();
    let mut jobs: Vec<(usize, usize, u8)> = vec![];
    for i in 0..thetas.len() {
        for j in 0..ts.len() {
            jobs.push((i, j, 0));
            if j + 1 < ts.len() {
                jobs.push((i, j, 1));
            }
            if i + 1 < thetas.len() {
                jobs.push((i, j, 2));
            }
        }
    }
    let rows: Vec<ContinuityRow> = jobs
        .par_iter()
        .map(|&(i, j, kind)| match kind {
            0 => cell_row(&specs[i][j], i, j, elements, co),
            1 => t_row(&specs[i][j], &specs[i][j + 1], i, j, co, opts),
            _ => theta_row(&specs[i][j], &specs[i + 1][j], i, j, elements, co, opts),
        })
        .collect();
    let ratio = |num: &[f64], den: &[f64]| -> f64 {
        num.iter().zip(den).filter(|(_, &l)| l > 1e-12).map(|(s, l)| s / l).fold(0.0, f64::max)
    };
    let cells = rows.iter().filter(|r| r.neighbor == "cell" && r.error.is_none());
    let (mut k_prime, mut k_prime_window) = (0.0f64, 0.0f64);
    for r in cells {
        k_prime = k_prime.max(ratio(&r.s_theta, &r.l_full));
        k_prime_window = k_prime_window.max(ratio(&r.s_theta, &r.l_window));
    }
    ContinuityReport {
        elements: elements.iter().map(|(n, _)| n.clone()).collect(),
        rows,
        k_prime,
        k_prime_window,
    }
}

/// Differences `|L(theta0 + 1/m) - L(theta0)|` of the window-compressed
/// seminorm for planar tori of the given orders, `T = 0`. Each `theta0`
/// must be a multiple of `1/m` for every order.
pub fn refinement_study(orders: &[usize], theta0: f64, radius: i64, elements: &[(String, Coefficients)]) -> Result<Vec<RefinementRow>> {
    let mut out = vec![];
    for (name, p) in elements {
        let mut prev: Option<f64> = None;
        for &m in orders {
            let h = 1.0 / m as f64;
            let l_base = window_lip_of(&FuzzyTorusSpec::planar(m, theta0)?, p, radius)?;
            let l_step = window_lip_of(&FuzzyTorusSpec::planar(m, theta0 + h)?, p, radius)?;
            let difference = (l_step - l_base).abs();
            out.push(RefinementRow {
                element: name.clone(),
                m,
                theta0,
                h,
                l_base,
                l_step,
                difference,
                ratio: prev.map(|p| p / difference),
            });
            prev = Some(difference);
        }
    }
    Ok(out)
}

/// Worst ratio of consecutive differences per element, ignoring elements
/// whose seminorm does not move above `floor`.
pub fn worst_refinement_ratio(rows: &[RefinementRow], floor: f64) -> Option<f64> {
    let mut worst: Option<f64> = None;
    let mut names: Vec<&str> = rows.iter().map(|r| r.element.as_str()).collect();
    names.dedup();
    for name in names {
        let mine: Vec<&RefinementRow> = rows.iter().filter(|r| r.element == name).collect();
        if mine.iter().all(|r| r.difference <= floor) {
            continue;
        }
        for r in mine.iter().filter_map(|r| r.ratio) {
            worst = Some(worst.map_or(r, |w: f64| w.min(r)));
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::c;
    use crate::qtorus::test_elements;

    #[test]
    fn single_cell_has_no_pairs() {
        let base = FuzzyTorusSpec::planar(3, 0.0).unwrap();
        let rep = continuity_experiment(
            &base,
            &[planar_theta(0.0)],
            &[vec![]],
            &test_elements(2),
            &ContinuityOptions::default(),
            &SolveOptions::default(),
        );
        assert_eq!(rep.rows.len(), 1);
        assert!(rep.rows[0].error.is_none());
        assert_eq!(rep.rows[0].l_full.len(), 4);
    }

    #[test]
    fn window_seminorm_refines_quadratically() {
        let rows = refinement_study(&[12, 24, 48], 0.25, 1, &test_elements(2)).unwrap();
        let worst = worst_refinement_ratio(&rows, 1e-12).unwrap();
        assert!(worst > 3.0, "{rows:?}");
    }

    #[test]
    fn distances_between_parameters() {
        assert_eq!(theta_distance(&planar_theta(0.0), &planar_theta(1.0 / 3.0)), 1.0 / 3.0);
        let a = vec![vec![(vec![0, 0], c(0.1, 0.0))]];
        let b = vec![vec![(vec![0, 0], c(0.05, 0.0)), (vec![1, 0], c(0.02, 0.0))]];
        assert!((t_distance(&a, &b) - 0.07).abs() < 1e-15);
    }
}
