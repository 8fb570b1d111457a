//! `specprop` command-line driver. Every subcommand writes
//! `<command>.manifest.json` and its CSV tables to the output directory
//! (`--out`, else `$SPECPROP_OUT`, else `./specprop-out`) and prints a JSON
//! summary on stdout.
//!
//! Exit codes: 0 success, 1 invalid input or failed check, 2 solver failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use specprop::algebra::{basis_state, pure_state, random_pure_state, AlgState};
use specprop::continuity::{
    continuity_experiment, planar_theta, refinement_study, worst_refinement_ratio, ContinuityOptions,
};
use specprop::covariant::{
    build_modular_tunnel, fixed_components, magnitude_at, propinquity_bound_for, PropinquityOptions, TunnelRecipe,
};
use specprop::io::{self, num, opt_num, ExperimentManifest, Table};
use specprop::kantorovich::oracle::{dual_dnorm_oracle, mk_oracle};
use specprop::kantorovich::{dual_dnorm, mk_distance, SolveOptions};
use specprop::matrix::{c, herm_eig, op_norm, random_hermitian, random_unit_vector, CMatrix, HermMatrix};
use specprop::qtorus::{test_elements, Coefficients, FuzzyTorusSpec};
use specprop::triple::{check_metric, diameter, FiniteSpectralTriple};
use specprop::tunnel::{
    bridge_tunnel, extent_estimate, identity_tunnel, perturbation_data, perturbation_tunnel_with_diameter,
    ExtentOptions,
};
use specprop::Error;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(name = "specprop", version, about = "Distances between finite spectral triples")]
struct Cli {
    /// Output directory (default: $SPECPROP_OUT or ./specprop-out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0x5eed)]
    seed: u64,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Metric check and sampled Leibniz inequalities.
    CheckTriple {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 200)]
        samples: usize,
    },
    /// Monge-Kantorovich distance between two states.
    Distance {
        #[arg(long = "in")]
        input: PathBuf,
        /// Two states: `pure:k`, `eig:k` (eigenvector of D), `mixed`, `random:seed`.
        #[arg(long, num_args = 2)]
        states: Vec<String>,
    },
    /// Diameter of the state space.
    Diameter {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Sampled extent of a tunnel from the input triple.
    TunnelExtent {
        #[arg(long = "in")]
        input: PathBuf,
        #[command(flatten)]
        target: Target,
        #[command(flatten)]
        extent: ExtentArgs,
    },
    /// Extent bounds of perturbation tunnels for |T| from 0 to tmax.
    PerturbSweep {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        tmax: f64,
        #[arg(long, default_value_t = 10)]
        steps: usize,
        /// Also estimate the extent of each tunnel (slow).
        #[arg(long)]
        estimate: bool,
        #[command(flatten)]
        extent: ExtentArgs,
    },
    /// Magnitude of a modular tunnel on an eps grid, and the resulting bound.
    CovariantMagnitude {
        #[arg(long = "in")]
        input: PathBuf,
        #[command(flatten)]
        target: Target,
        /// Comma-separated eps values (default 0.05, 0.10, ..., 0.70).
        #[arg(long, value_delimiter = ',')]
        eps_grid: Vec<f64>,
        #[arg(long, default_value_t = 5)]
        n_times: usize,
    },
    /// Fuzzy torus sweep over Theta and T grids.
    TorusSweep(TorusArgs),
    /// Cone solver against the sampling oracle.
    OracleCompare {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 6)]
        pairs: usize,
        #[arg(long, default_value_t = 20000)]
        samples: usize,
    },
}

#[derive(Args)]
struct Target {
    /// Second triple, joined by a bridge tunnel.
    #[arg(long)]
    to: Option<PathBuf>,
    /// Bridge parameter.
    #[arg(long, default_value_t = 0.5)]
    bridge_eps: f64,
    /// Norm of a random Hermitian perturbation `T` (perturbation tunnel).
    #[arg(long)]
    pert: Option<f64>,
}

#[derive(Args)]
struct ExtentArgs {
    #[arg(long, default_value_t = 16)]
    outer: usize,
    #[arg(long, default_value_t = 2)]
    restarts: usize,
    #[arg(long, default_value_t = 4)]
    ascent: usize,
}

#[derive(Args)]
struct TorusArgs {
    /// Base specification (d, m, T pattern); default planar, m = 3.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    m: usize,
    /// Theta grid `j/m (e_1 e_2^T - e_2 e_1^T)`, `j = 0..theta_steps`.
    #[arg(long, default_value_t = 1)]
    theta_steps: usize,
    /// T grid: the base T pattern (or `t_1 = s (W_e1 + W_-e1)/2`) scaled
    /// to total l1 norm `k tmax / t_steps`, `k = 0..t_steps`.
    #[arg(long, default_value_t = 0.04)]
    tmax: f64,
    #[arg(long, default_value_t = 1)]
    t_steps: usize,
    /// Orders of the refinement study.
    #[arg(long, value_delimiter = ',', default_value = "12,24,48,96")]
    refine: Vec<usize>,
    #[arg(long, default_value_t = 0.25)]
    theta0: f64,
    #[arg(long, default_value_t = 1)]
    window: i64,
    /// Tabulate seminorms and the refinement study only.
    #[arg(long)]
    seminorms_only: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<Error>().map_or(1, Error::exit_code);
            ExitCode::from(code as u8)
        }
    }
}

struct Run {
    dir: PathBuf,
    manifest: ExperimentManifest,
}

impl Run {
    fn new(cli: &Cli, command: &str) -> anyhow::Result<Self> {
        let dir = match &cli.out {
            Some(d) => d.clone(),
            None => io::output_dir(Path::new("specprop-out")),
        };
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut manifest = ExperimentManifest::new(command, std::env::args().skip(1).collect());
        manifest.seeds.push(cli.seed);
        Ok(Run { dir, manifest })
    }

    fn load(&mut self, path: &Path) -> anyhow::Result<FiniteSpectralTriple> {
        let t = io::load_triple(path).map_err(|e| anyhow!(e).context(format!("reading {}", path.display())))?;
        self.manifest.add_input(path)?;
        Ok(t.triple)
    }

    fn csv(&mut self, name: &str, table: &Table) -> anyhow::Result<()> {
        let p = self.dir.join(name);
        io::write_csv(&p, table)?;
        self.manifest.outputs.push(p.display().to_string());
        Ok(())
    }

    fn finish(mut self, results: Value, code: u8) -> anyhow::Result<u8> {
        self.manifest.results = results.clone();
        let p = self.dir.join(format!("{}.manifest.json", self.manifest.command));
        self.manifest.outputs.push(p.display().to_string());
        io::save_manifest(&p, &self.manifest)?;
        println!("{}", serde_json::to_string_pretty(&results)?);
        Ok(code)
    }
}

fn solve_opts(seed: u64) -> SolveOptions {
    SolveOptions {
        seed,
        ..Default::default()
    }
}

fn parse_state(s: &str, t: &FiniteSpectralTriple) -> anyhow::Result<AlgState> {
    let n = t.hilbert_dim();
    let (kind, arg) = s.split_once(':').unwrap_or((s, ""));
    let index = |arg: &str| -> anyhow::Result<usize> {
        let k: usize = arg.parse().with_context(|| format!("state `{s}`: expected an index"))?;
        if k >= n {
            return Err(anyhow!(Error::Parse {
                pointer: format!("--states/{s}"),
                message: format!("index {k} out of range for dimension {n}"),
            }));
        }
        Ok(k)
    };
    Ok(match kind {
        "pure" => basis_state(n, index(arg)?),
        "eig" => pure_state(&herm_eig(&t.dirac).vector(index(arg)?))?,
        "mixed" => AlgState::new(CMatrix::identity(n, n).unscale(n as f64))?,
        "random" => {
            let seed: u64 = arg.parse().with_context(|| format!("state `{s}`: expected a seed"))?;
            random_pure_state(n, &mut ChaCha8Rng::seed_from_u64(seed))
        }
        _ => {
            return Err(anyhow!(Error::Parse {
                pointer: format!("--states/{s}"),
                message: "expected pure:k, eig:k, mixed or random:seed".into(),
            }))
        }
    })
}

fn random_pert(n: usize, norm: f64, seed: u64) -> HermMatrix {
    let h = random_hermitian(n, &mut ChaCha8Rng::seed_from_u64(seed));
    let s = op_norm(h.as_matrix());
    HermMatrix::from_part(&h.as_matrix().scale(if s > 0.0 { norm / s } else { 0.0 }))
}

fn extent_opts(a: &ExtentArgs, seed: u64) -> ExtentOptions {
    ExtentOptions {
        n_outer: a.outer,
        n_restarts: a.restarts,
        ascent_steps: a.ascent,
        seed,
    }
}

fn target_recipe(run: &mut Run, t: &FiniteSpectralTriple, target: &Target, seed: u64) -> anyhow::Result<(FiniteSpectralTriple, TunnelRecipe, Value)> {
    match (&target.to, target.pert) {
        (Some(_), Some(_)) => bail!(Error::Parse {
            pointer: "--to".into(),
            message: "give either --to or --pert".into()
        }),
        (Some(p), None) => {
            let t2 = run.load(p)?;
            let x = CMatrix::identity(t.hilbert_dim(), t.hilbert_dim());
            Ok((t2, TunnelRecipe::Bridge { x, eps: target.bridge_eps }, json!({"kind": "bridge", "eps": target.bridge_eps})))
        }
        (None, Some(s)) => {
            let pert = random_pert(t.hilbert_dim(), s, seed);
            Ok((t.perturbed(&pert)?, TunnelRecipe::Perturbation, json!({"kind": "perturbation", "t_norm": s})))
        }
        (None, None) => Ok((t.clone(), TunnelRecipe::Identity, json!({"kind": "identity"}))),
    }
}

fn run(cli: &Cli) -> anyhow::Result<u8> {
    let seed = cli.seed;
    let opts = solve_opts(seed);
    match &cli.cmd {
        Cmd::CheckTriple { input, samples } => {
            let mut run = Run::new(cli, "check-triple")?;
            let t = run.load(input)?;
            let rep = run.manifest.time("check_metric", || check_metric(&t, *samples, seed));
            let pass = rep.is_metric && rep.leibniz.passes(1e-9) && rep.module_leibniz.passes(1e-9);
            run.manifest.options = json!({"samples": samples});
            let res = json!({
                "pass": pass,
                "is_metric": rep.is_metric,
                "kernel_dim": rep.kernel_dim,
                "algebra_dim": t.alg.dim(),
                "hilbert_dim": t.hilbert_dim(),
                "leibniz_worst_slack": rep.leibniz.worst_slack,
                "module_leibniz_worst_slack": rep.module_leibniz.worst_slack,
            });
            run.manifest.diagnostics = serde_json::to_value(&rep)?;
            run.finish(res, if pass { 0 } else { 1 })
        }
        Cmd::Distance { input, states } => {
            let mut run = Run::new(cli, "distance")?;
            let t = run.load(input)?;
            let phi = parse_state(&states[0], &t)?;
            let psi = parse_state(&states[1], &t)?;
            let r = run.manifest.time("mk_distance", || mk_distance(&t.seminorm(), &phi, &psi, &opts))?;
            run.manifest.options = serde_json::to_value(&opts)?;
            run.manifest.diagnostics = serde_json::to_value(&r.diagnostics)?;
            run.finish(
                json!({"states": states, "distance": r.value, "upper_bound": r.upper_bound}),
                0,
            )
        }
        Cmd::Diameter { input } => {
            let mut run = Run::new(cli, "diameter")?;
            let t = run.load(input)?;
            let d = run.manifest.time("diameter", || diameter(&t, &opts))?;
            run.manifest.options = serde_json::to_value(&opts)?;
            run.finish(json!({"diameter": d.value}), 0)
        }
        Cmd::TunnelExtent { input, target, extent } => {
            let mut run = Run::new(cli, "tunnel-extent")?;
            let t = run.load(input)?;
            let eo = extent_opts(extent, seed);
            let (t2, recipe, desc) = target_recipe(&mut run, &t, target, seed)?;
            let tunnel = match &recipe {
                TunnelRecipe::Identity => identity_tunnel(&t),
                TunnelRecipe::Perturbation => {
                    let r = diameter(&t, &opts)?.value;
                    let pert = HermMatrix::new(t2.dirac.as_matrix() - t.dirac.as_matrix())?;
                    perturbation_tunnel_with_diameter(&t, &pert, r)?.0
                }
                TunnelRecipe::Bridge { x, eps } => bridge_tunnel(&t, &t2, x, *eps, 64, seed, &opts)?,
            };
            let est = run.manifest.time("extent_estimate", || extent_estimate(&tunnel, &eo, &opts))?;
            run.manifest.options = json!({"tunnel": desc, "extent": eo});
            run.manifest.diagnostics = serde_json::to_value(&est.rows)?;
            run.finish(
                json!({"tunnel": tunnel.label, "extent_estimate": est.value, "to_left": est.to_left, "to_right": est.to_right, "analytic_bound": est.analytic_bound}),
                0,
            )
        }
        Cmd::PerturbSweep { input, tmax, steps, estimate, extent } => {
            let mut run = Run::new(cli, "perturb-sweep")?;
            let t = run.load(input)?;
            if *steps == 0 || !(tmax.is_finite() && *tmax >= 0.0) {
                bail!(Error::Parse {
                    pointer: "--tmax/--steps".into(),
                    message: "need tmax >= 0 and steps >= 1".into()
                });
            }
            let r = run.manifest.time("diameter", || diameter(&t, &opts))?.value;
            let dir = random_pert(t.hilbert_dim(), 1.0, seed);
            let eo = extent_opts(extent, seed);
            let mut table = Table::new(io::PERTURB_HEADER);
            for k in 0..=*steps {
                let tn = tmax * k as f64 / *steps as f64;
                let bound = if 2.0 * r * tn < 1.0 { Some(2.0 * r * tn / (1.0 - 2.0 * r * tn)) } else { None };
                let pert = HermMatrix::from_part(&dir.as_matrix().scale(tn));
                let (cb, est) = match perturbation_data(r, tn) {
                    Ok(data) => {
                        let est = if *estimate {
                            let (tun, _) = perturbation_tunnel_with_diameter(&t, &pert, r)?;
                            Some(extent_estimate(&tun, &eo, &opts)?.value)
                        } else {
                            None
                        };
                        (Some(data.extent_bound), est)
                    }
                    Err(_) => (None, None),
                };
                table.push(vec![k.to_string(), num(tn), num(r), opt_num(bound), opt_num(cb), opt_num(est)])?;
            }
            run.csv("perturb_sweep.csv", &table)?;
            run.manifest.options = json!({"tmax": tmax, "steps": steps, "estimate": estimate, "extent": eo});
            run.finish(json!({"diameter": r, "rows": table.rows.len(), "csv": "perturb_sweep.csv"}), 0)
        }
        Cmd::CovariantMagnitude { input, target, eps_grid, n_times } => {
            let mut run = Run::new(cli, "covariant-magnitude")?;
            let t = run.load(input)?;
            let (t2, recipe, desc) = target_recipe(&mut run, &t, target, seed)?;
            let mut po = PropinquityOptions {
                n_times: *n_times,
                ..Default::default()
            };
            if !eps_grid.is_empty() {
                po.eps_grid = eps_grid.clone();
            } else {
                po.eps_grid = (1..=14).map(|k| k as f64 * 0.05).collect();
            }
            po.extent.seed = seed;
            po.reach.seed = seed;
            let mt = build_modular_tunnel(&t, &t2, &recipe, &opts)?;
            let fixed = run.manifest.time("fixed_components", || fixed_components(&mt, &po, &opts))?;
            let mut table = Table::new(io::MAGNITUDE_HEADER);
            for &e in &po.eps_grid {
                let m = magnitude_at(&mt, &fixed, e, &po, &opts)?;
                table.push(vec![num(m.eps), num(m.extent), num(m.reach), num(m.modular_reach), num(m.magnitude), m.n_times.to_string()])?;
            }
            let bound = run.manifest.time("propinquity_bound", || propinquity_bound_for(&mt, &po, &opts))?;
            run.csv("magnitude.csv", &table)?;
            run.manifest.options = json!({"tunnel": desc, "propinquity": po});
            run.manifest.diagnostics = serde_json::to_value(&bound.evaluations)?;
            run.finish(
                json!({"tunnel": mt.label, "bound": bound.value, "capped": bound.capped, "algebra_extent": bound.algebra_extent, "base_extent": bound.base_extent, "reach": bound.reach}),
                0,
            )
        }
        Cmd::TorusSweep(a) => torus_sweep(cli, a, &opts),
        Cmd::OracleCompare { input, pairs, samples } => {
            let mut run = Run::new(cli, "oracle-compare")?;
            let t = run.load(input)?;
            let sn = t.seminorm();
            let n = t.hilbert_dim();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut table = Table::new(io::ORACLE_HEADER);
            let mut worst: f64 = 0.0;
            for i in 0..*pairs {
                let phi = random_pure_state(n, &mut rng);
                let psi = random_pure_state(n, &mut rng);
                let r = mk_distance(&sn, &phi, &psi, &opts)?;
                let o = mk_oracle(&sn, &(sn.functional(&phi) - sn.functional(&psi)), *samples, seed ^ i as u64);
                let gap = r.value - o.value;
                worst = worst.max(-gap / r.value.max(1e-12));
                table.push(vec!["mk".into(), i.to_string(), "0".into(), num(r.value), num(o.value), num(gap), o.samples.to_string()])?;
                let v = random_unit_vector(n, &mut rng);
                let dn = dual_dnorm(&v, &t.dirac);
                let od = dual_dnorm_oracle(&v, t.dirac.as_matrix(), *samples, seed ^ (i as u64 + 1000));
                table.push(vec!["dual_dnorm".into(), i.to_string(), "1".into(), num(dn.value), num(od.value), num(dn.value - od.value), od.samples.to_string()])?;
            }
            run.csv("oracle_compare.csv", &table)?;
            run.manifest.options = json!({"pairs": pairs, "samples": samples, "solve": opts});
            // The oracle is a lower estimate; the solver must not fall below it.
            let pass = worst <= 1e-6;
            run.finish(json!({"pass": pass, "worst_solver_deficit": worst, "csv": "oracle_compare.csv"}), if pass { 0 } else { 1 })
        }
    }
}

fn torus_sweep(cli: &Cli, a: &TorusArgs, opts: &SolveOptions) -> anyhow::Result<u8> {
    let mut run = Run::new(cli, "torus-sweep")?;
    let base = match &a.spec {
        Some(p) => {
            let s = io::load_torus_spec(p).map_err(|e| anyhow!(e).context(format!("reading {}", p.display())))?;
            run.manifest.add_input(p)?;
            s
        }
        None => FuzzyTorusSpec::planar(a.m, 0.0)?,
    };
    if base.d < 2 {
        bail!(Error::Parse {
            pointer: "/spec/d".into(),
            message: "the Theta grid needs d >= 2".into()
        });
    }
    let pattern: Vec<Coefficients> = if base.t.is_empty() {
        let mut t = vec![vec![]; base.d + 1];
        let mut e = vec![0i64; base.d];
        e[0] = 1;
        let me: Vec<i64> = e.iter().map(|v| -v).collect();
        t[1] = vec![(e, c(0.5, 0.0)), (me, c(0.5, 0.0))];
        t
    } else {
        base.t.clone()
    };
    let l1 = pattern.iter().flatten().map(|(_, v)| v.norm()).sum::<f64>();
    let mf = base.m as f64;
    let thetas: Vec<Vec<Vec<f64>>> = (0..=a.theta_steps)
        .map(|j| {
            let mut th = base.theta.clone();
            th[0][1] += j as f64 / mf;
            th[1][0] -= j as f64 / mf;
            th
        })
        .collect();
    let ts: Vec<Vec<Coefficients>> = (0..=a.t_steps)
        .map(|k| {
            let s = if l1 > 0.0 { a.tmax * k as f64 / (a.t_steps.max(1) as f64 * l1) } else { 0.0 };
            if k == 0 {
                return vec![];
            }
            pattern
                .iter()
                .map(|tj| tj.iter().map(|(z, v)| (z.clone(), v * s)).collect())
                .collect()
        })
        .collect();
    let co = ContinuityOptions {
        window_radius: a.window,
        seminorms_only: a.seminorms_only,
        seed: cli.seed,
        ..Default::default()
    };
    let elements = test_elements(base.d);
    let rep = run
        .manifest
        .time("continuity_experiment", || continuity_experiment(&base, &thetas, &ts, &elements, &co, opts));
    let refine = if base.d == 2 {
        let rows = run.manifest.time("refinement_study", || refinement_study(&a.refine, a.theta0, a.window, &elements))?;
        run.csv("refinement.csv", &io::refinement_table(&rows))?;
        Some(rows)
    } else {
        None
    };
    run.csv("torus_sweep.csv", &io::continuity_table(&rep))?;
    let errors = rep.rows.iter().filter(|r| r.error.is_some()).count();
    let worst_ratio = refine.as_deref().and_then(|r| worst_refinement_ratio(r, 1e-12));
    run.manifest.options = json!({
        "base": io::torus_spec_to_json(&base),
        "thetas": thetas,
        "t_grid": ts,
        "continuity": co,
        "refine": a.refine,
        "theta0": a.theta0,
        "elements": elements,
        "planar_theta_generator": planar_theta(1.0),
    });
    run.manifest.seeds.extend(rep.rows.iter().map(|r| r.seed));
    run.finish(
        json!({
            "cells": rep.rows.len(),
            "errors": errors,
            "k_prime": rep.k_prime,
            "k_prime_window": rep.k_prime_window,
            "worst_refinement_ratio": worst_ratio,
            "csv": ["torus_sweep.csv", "refinement.csv"],
        }),
        0,
    )
}
