//! Command-line experiment runner.
//!
//! Data goes to files in the output directory (and, for `basis` and
//! `simulate`, to stdout); diagnostics go to stderr.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use rand::Rng;
use serde::Serialize;
use serde_json::json;

use crate::config::{ExperimentConfig, Model};
use crate::error::{Error, Result};
use crate::levy::{build_tree, empirical_bracket, simulate_levy_path, ScenarioTree, TreeOptions};
use crate::reflection::{penalization_sweep, picard_outer_loop, skorokhod_residual, snell_oracle};
use crate::regulated::{make_barrier, Barrier};
use crate::rng::{self, Domain};
use crate::solver::{extract_k, solve_penalized, DriverPair, SolutionTriple};
use crate::verify::{
    beta_norms, comparison_check, energy_identity_residual, representation_residual,
    ComparisonInstance, COMPARISON_TOL,
};

#[derive(Debug, Parser)]
#[command(name = "rbdsde", version, about = "Penalization lab for reflected doubly stochastic BSDEs with jumps")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Experiment config (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Overrides `grid.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Orthonormalized Teugels basis of the configured measure.
    Basis,
    /// Solve the penalized equation at one level.
    Solve {
        /// Penalty level; defaults to the last level of the schedule.
        #[arg(long)]
        n: Option<u64>,
    },
    /// Run the penalty sweep.
    Converge,
    /// Exact Snell-envelope solution and its distance to the sweep.
    Oracle,
    /// Run the invariant suite; exit code 1 if a check fails.
    Verify,
    /// Simulate continuous-time Lévy paths.
    Simulate {
        #[arg(long)]
        paths: Option<usize>,
    },
}

/// Whether the checks of a run passed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    ChecksFailed,
}

pub fn exit_code(result: &Result<Outcome>) -> i32 {
    match result {
        Ok(Outcome::Pass) => 0,
        Ok(Outcome::ChecksFailed) => 1,
        Err(Error::Config { .. }) => 2,
        Err(_) => 3,
    }
}

struct Ctx {
    cfg: ExperimentConfig,
    model: Model,
    seed: u64,
    out: PathBuf,
}

impl Ctx {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        if !self.cfg.output.wants("json") {
            return Ok(());
        }
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(self.path(name), text)?;
        log::info!("wrote {}", self.path(name).display());
        Ok(())
    }

    fn csv_writer(&self, name: &str) -> Result<Option<BufWriter<File>>> {
        if !self.cfg.output.wants("csv") {
            return Ok(None);
        }
        log::info!("writing {}", self.path(name).display());
        Ok(Some(BufWriter::new(File::create(self.path(name))?)))
    }
}

pub fn run(cli: Cli) -> Result<Outcome> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Error::config("--jobs", "must be at least 1"));
        }
        if rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global().is_err() {
            log::warn!("thread pool already initialized; --jobs ignored");
        }
    }
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| Error::config("--config", "a config file is required"))?;
    let cfg = ExperimentConfig::load(path)?;
    let model = cfg.build(cli.seed)?;
    let out = cli.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    fs::create_dir_all(&out)?;
    let seed = cli.seed.unwrap_or(cfg.grid.seed);
    let ctx = Ctx { cfg, model, seed, out };
    match cli.command {
        Command::Basis => cmd_basis(&ctx),
        Command::Solve { n } => cmd_solve(&ctx, n),
        Command::Converge => cmd_converge(&ctx),
        Command::Oracle => cmd_oracle(&ctx),
        Command::Verify => cmd_verify(&ctx),
        Command::Simulate { paths } => cmd_simulate(&ctx, paths),
    }
}

fn cmd_basis(ctx: &Ctx) -> Result<Outcome> {
    let b = &ctx.model.basis;
    let payload = json!({
        "dim": b.dim(),
        "alpha": b.alpha(),
        "moments": b.moments(),
        "gram": b.gram_matrix(),
    });
    ctx.write_json("basis.json", &payload)?;
    println!("{}", serde_json::to_string_pretty(&payload)?);
    Ok(Outcome::Pass)
}

#[derive(Serialize)]
struct SolveSummary {
    n: u64,
    y0_mean: f64,
    k_terminal_mean: f64,
    violation: f64,
    skorokhod: f64,
    energy_residual: f64,
    active_jump_nodes: usize,
    norms: crate::verify::BetaNorms,
}

/// Per-time means: `k, t, Y, Y+, K, ξ, |Z|²`.
fn write_profile<W: Write>(out: W, sol: &SolutionTriple, tree: &ScenarioTree, barrier: &Barrier) -> Result<()> {
    let n = tree.steps();
    let y = sol.expected(tree, n + 1, |s, k, i| s.y[k][i]);
    let yp = sol.expected(tree, n + 1, |s, k, i| s.y_plus[k][i]);
    let kk = sol.expected_k(tree);
    let z2 = sol.expected(tree, n, |s, k, i| s.z_at(k, i).iter().map(|v| v * v).sum());
    let xi: Vec<f64> = (0..=n)
        .map(|k| (0..tree.nodes_at(k)).map(|i| tree.reach_prob(k, i) * barrier.value(k, i)).sum())
        .collect();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["k", "t", "mean_y", "mean_y_plus", "mean_k", "mean_barrier", "mean_z_sq"])?;
    for k in 0..=n {
        w.write_record([
            k.to_string(),
            format!("{:e}", tree.time(k)),
            format!("{:e}", y[k]),
            format!("{:e}", yp[k]),
            format!("{:e}", kk[k]),
            format!("{:e}", xi[k]),
            z2.get(k).map(|v| format!("{v:e}")).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_solve(ctx: &Ctx, n: Option<u64>) -> Result<Outcome> {
    let m = &ctx.model;
    let n = n.unwrap_or(*m.schedule.last().unwrap());
    if n == 0 {
        return Err(Error::config("--n", "must be at least 1"));
    }
    let sol = solve_penalized(&m.tree, &m.drivers, &m.barrier, n)?;
    let summary = SolveSummary {
        n,
        y0_mean: sol.y0_mean(),
        k_terminal_mean: *sol.expected_k(&m.tree).last().unwrap(),
        violation: sol.barrier_violation(&m.barrier),
        skorokhod: skorokhod_residual(&sol, &m.barrier, &m.tree),
        energy_residual: energy_identity_residual(&sol, &m.drivers, &m.tree),
        active_jump_nodes: sol.active_jump_nodes,
        norms: beta_norms(&sol, &m.barrier, &m.drivers, &m.tree, m.beta)?,
    };
    ctx.write_json("solve.json", &summary)?;
    if let Some(w) = ctx.csv_writer("solve.csv")? {
        write_profile(w, &sol, &m.tree, &m.barrier)?;
    }
    eprintln!("Y0 = {:.6}, E[K_T] = {:.6}", summary.y0_mean, summary.k_terminal_mean);
    Ok(Outcome::Pass)
}

/// Oracle when the drivers allow it.
fn try_oracle(m: &Model) -> Result<Option<SolutionTriple>> {
    if !m.drivers.oracle_compatible() {
        return Ok(None);
    }
    match snell_oracle(&m.tree, &m.drivers, &m.barrier) {
        Ok(v) => Ok(Some(v)),
        Err(Error::StepSize(msg)) => {
            log::warn!("oracle skipped: {msg}");
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

fn cmd_converge(ctx: &Ctx) -> Result<Outcome> {
    let m = &ctx.model;
    let oracle = try_oracle(m)?;
    let rep = penalization_sweep(&m.tree, &m.drivers, &m.barrier, &m.schedule, oracle.as_ref(), m.beta)?;
    ctx.write_json("converge.json", &rep)?;
    if let Some(w) = ctx.csv_writer("converge.csv")? {
        rep.write_csv(w)?;
    }
    let last = rep.rows.last().unwrap();
    eprintln!(
        "n = {}: Y0 = {:.6}, violation = {:.3e}, skorokhod = {:.3e}",
        last.n, last.y0, last.violation, last.skorokhod
    );
    Ok(Outcome::Pass)
}

fn cmd_oracle(ctx: &Ctx) -> Result<Outcome> {
    let m = &ctx.model;
    if !m.drivers.oracle_compatible() {
        return Err(Error::config("drivers", "the oracle needs f = f(t, y) and g = g(t)"));
    }
    let v = snell_oracle(&m.tree, &m.drivers, &m.barrier)?;
    let k = extract_k(&v, &m.drivers, &m.tree, &m.barrier);
    let summary = json!({
        "y0_mean": v.y0_mean(),
        "k_terminal_mean": v.expected_k(&m.tree).last(),
        "skorokhod": skorokhod_residual(&v, &m.barrier, &m.tree),
        "active_jump_nodes": v.active_jump_nodes,
        "k_consistent": k.as_ref().map(|r| r.consistent).unwrap_or(false),
    });
    ctx.write_json("oracle.json", &summary)?;
    if let Some(w) = ctx.csv_writer("oracle.csv")? {
        write_profile(w, &v, &m.tree, &m.barrier)?;
    }
    let rep = penalization_sweep(&m.tree, &m.drivers, &m.barrier, &m.schedule, Some(&v), m.beta)?;
    if let Some(w) = ctx.csv_writer("oracle_comparison.csv")? {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(["n", "oracle_err", "y0", "y0_oracle"])?;
        for r in &rep.rows {
            w.write_record([
                r.n.to_string(),
                format!("{:e}", r.oracle_err.unwrap_or(f64::NAN)),
                format!("{:e}", r.y0),
                format!("{:e}", v.y0_mean()),
            ])?;
        }
        w.flush()?;
    }
    eprintln!("oracle Y0 = {:.6}", v.y0_mean());
    Ok(Outcome::Pass)
}

#[derive(Debug, Serialize)]
struct Check {
    name: String,
    passed: bool,
    value: f64,
    tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    waived: Option<String>,
    detail: serde_json::Value,
}

impl Check {
    /// Keep the measured value but do not count a miss as a failure.
    fn waive(&mut self, reason: String) {
        if !self.passed {
            log::warn!("{}: not enforced, {reason}", self.name);
            self.passed = true;
            self.waived = Some(reason);
        }
    }
}

fn check(name: &str, value: f64, tolerance: f64, detail: serde_json::Value) -> Check {
    Check {
        name: name.into(),
        passed: value <= tolerance,
        waived: None,
        value,
        tolerance,
        detail,
    }
}

fn cmd_verify(ctx: &Ctx) -> Result<Outcome> {
    let m = &ctx.model;
    let n = *m.schedule.last().unwrap();
    let mut checks = Vec::new();

    // representation on a small full tree of the same measure
    let depth = m.tree.steps().min(match m.tree.n_outcomes() {
        0..=3 => 6,
        4 => 5,
        _ => 4,
    });
    let full = build_tree(
        &m.measure,
        &m.basis,
        TreeOptions::new(m.tree.horizon() * depth as f64 / m.tree.steps() as f64, depth, 1, 0).full_tree(),
    )?;
    let mut r = rng::stream(ctx.seed, Domain::Verify, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let leaves: Vec<f64> = (0..full.nodes_at(depth)).map(|_| r.random_range(-1.0..1.0)).collect();
        worst = worst.max(representation_residual(&leaves, &full)?);
    }
    checks.push(check("representation_residual", worst, 1e-12, json!({"depth": depth, "terminals": 20})));

    // predictable brackets
    let paths: Vec<_> = (0..20_000)
        .map(|i| simulate_levy_path(&m.measure, m.tree.horizon(), ctx.seed, i))
        .collect();
    let dim = m.basis.dim();
    let mut worst_se: f64 = 0.0;
    let mut brackets = Vec::new();
    for i in 1..=dim {
        for j in 1..=dim {
            let (mean, se) = empirical_bracket(&paths, &m.basis, i, j)?;
            let target = if i == j { m.tree.horizon() } else { 0.0 };
            let z = if se > 0.0 { (mean - target).abs() / se } else { (mean - target).abs() * 1e12 };
            worst_se = worst_se.max(z);
            brackets.push(json!({"i": i, "j": j, "mean": mean, "std_err": se}));
        }
    }
    checks.push(check("bracket_standard_errors", worst_se, 3.0, json!(brackets)));

    // solution at the last level
    let sol = solve_penalized(&m.tree, &m.drivers, &m.barrier, n)?;
    checks.push(check(
        "energy_identity",
        energy_identity_residual(&sol, &m.drivers, &m.tree),
        1e-10,
        json!({"n": n}),
    ));
    let k = extract_k(&sol, &m.drivers, &m.tree, &m.barrier)?;
    checks.push(check("k_recomputation", k.max_mismatch, 1e-10, json!({"min_increment": k.min_increment})));
    checks.push(check("k_nondecreasing", -k.min_increment, 1e-10, json!(null)));

    // comparison with lowered driver and lowered barrier
    let lower_f = DriverPair::new(
        m.drivers.f_spec().clone().with_shift(m.drivers.f_spec().shift - 0.5),
        m.drivers.g_spec().clone(),
    )?;
    let lower_bar = make_barrier(&m.barrier_spec.shifted(-0.5), &m.tree)?;
    let mut positivity = true;
    for (name, d1, b1) in [
        ("comparison_identical", &m.drivers, &m.barrier),
        ("comparison_lower_driver", &lower_f, &m.barrier),
        ("comparison_lower_barrier", &m.drivers, &lower_bar),
    ] {
        let inst = ComparisonInstance::solve(&m.tree, (d1, b1), (&m.drivers, &m.barrier), n)?;
        let rep = comparison_check(&inst);
        positivity &= rep.gamma_positive;
        let mut c = check(name, rep.max_gap.max(0.0), COMPARISON_TOL, serde_json::to_value(&rep)?);
        // an ordering failure is only a defect when the positivity condition held
        if !rep.gamma_positive {
            c.waive(format!("positivity condition fails at {} nodes", rep.positivity_failures));
        }
        c.passed &= rep.preconditions_ok;
        checks.push(c);
        if name == "comparison_lower_driver" {
            let path = vec![0; m.tree.steps()];
            let detail = match inst.gamma_along(&m.tree, 0, &path) {
                Ok(g) => json!({"recursion": g.recursion, "closed_form": g.closed_form}),
                Err(e) => json!({"error": e.to_string()}),
            };
            let ok = detail.get("error").is_none();
            let mut c = check("doleans_gamma_positive", if ok { 0.0 } else { 1.0 }, 0.0, detail);
            if !rep.gamma_positive {
                c.waive("positivity condition fails".into());
            }
            checks.push(c);
        }
    }

    // monotonicity in the penalty level rests on the same comparison
    let rep = penalization_sweep(&m.tree, &m.drivers, &m.barrier, &m.schedule, None, m.beta)?;
    let excess = rep.rows.iter().filter_map(|r| r.monotone_excess).fold(f64::NEG_INFINITY, f64::max);
    let mut c = check("penalty_monotone", excess.max(0.0), 1e-12, json!({"levels": m.schedule}));
    if !positivity {
        c.waive("positivity condition fails".into());
    }
    checks.push(c);

    // oracle and its Skorokhod condition
    if let Some(v) = try_oracle(m)? {
        checks.push(check(
            "oracle_skorokhod",
            skorokhod_residual(&v, &m.barrier, &m.tree),
            1e-12,
            json!({"y0": v.y0_mean()}),
        ));
    }

    // outer loop for coupled g
    if !(m.drivers.g_spec().independent_of_y() && m.drivers.g_spec().independent_of_z()) {
        let p = &ctx.cfg.picard;
        let pn = p.n.unwrap_or(n);
        let (diff, ratio, iters) =
            match picard_outer_loop(&m.tree, &m.drivers, &m.barrier, pn, p.max_iters, p.tol, m.beta) {
                Ok(r) => (r.final_diff(), r.max_ratio(), r.iterations()),
                Err(Error::Divergence { iterations, last_diff }) => (last_diff, None, iterations),
                Err(e) => return Err(e),
            };
        checks.push(check(
            "picard_contraction",
            diff,
            p.tol,
            json!({"iterations": iters, "max_ratio": ratio}),
        ));
    }

    let passed = checks.iter().all(|c| c.passed);
    for c in &checks {
        let status = match (c.passed, &c.waived) {
            (_, Some(_)) => "SKIP",
            (true, None) => "PASS",
            (false, None) => "FAIL",
        };
        eprintln!("{status} {} ({:.3e} vs {:.1e})", c.name, c.value, c.tolerance);
    }
    let mut text = serde_json::to_string_pretty(&json!({"passed": passed, "checks": checks}))?;
    text.push('\n');
    fs::write(ctx.path("verify.json"), text)?;
    Ok(if passed { Outcome::Pass } else { Outcome::ChecksFailed })
}

fn cmd_simulate(ctx: &Ctx, paths: Option<usize>) -> Result<Outcome> {
    let m = &ctx.model;
    let count = paths.unwrap_or(m.tree.scenarios());
    if count == 0 {
        return Err(Error::config("--paths", "must be at least 1"));
    }
    let seed = ctx.seed;
    let sims: Vec<_> = (0..count as u64)
        .map(|i| simulate_levy_path(&m.measure, m.tree.horizon(), seed, i))
        .collect();
    if let Some(w) = ctx.csv_writer("simulate.csv")? {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(["path", "time", "size"])?;
        for (p, events) in sims.iter().enumerate() {
            for e in events {
                w.write_record([p.to_string(), format!("{:e}", e.time), format!("{:e}", e.size)])?;
            }
        }
        w.flush()?;
    }
    let mut brackets = Vec::new();
    for i in 1..=m.basis.dim() {
        for j in 1..=m.basis.dim() {
            let (mean, se) = empirical_bracket(&sims, &m.basis, i, j)?;
            brackets.push(json!({"i": i, "j": j, "mean": mean, "std_err": se}));
        }
    }
    let mean_events = sims.iter().map(|p| p.len()).sum::<usize>() as f64 / count as f64;
    let payload = json!({"paths": count, "mean_events": mean_events, "brackets": brackets});
    ctx.write_json("simulate.json", &payload)?;
    println!("{}", serde_json::to_string_pretty(&payload)?);
    Ok(Outcome::Pass)
}
