//! `holelab`: experiment driver. Exit status 0 = pass, 1 = a quantitative
//! check failed, 2 = usage or configuration error, 3 = runtime error.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use holelab::corrector::{build_mu_eps, c0_constant, CorrectorField};
use holelab::covering::{build_random_covering_with, regime_parameters, verify_random_covering};
use holelab::export::{write_atomic, write_configuration, write_covering, write_measure, write_partition};
use holelab::mecke::{mecke_check, MeckeFunctional};
use holelab::partition::{bad_capacity_sum, partition, verify_partition};
use holelab::pde::{
    homogenization_error, homogenized_solve, mu_hminus, solve_perforated, write_field, write_slice, Grid,
};
use holelab::process::{sample_configuration, thin_phi_delta, MarkDistribution, ProcessSpec};
use holelab::rates::{
    bad_capacity_exponent, ensemble_run, fit_rate, theoretical_exponents, Quantity, QuantityParams, SlopeCheck,
};
use serde::Serialize;
use serde_json::json;

use config::ExperimentConfig;

#[derive(Parser, Debug)]
#[command(
    name = "holelab",
    version,
    about = "Randomly perforated domains: sampling, partitions, coverings and rates"
)]
struct Cli {
    /// JSON experiment config; unknown keys are rejected.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Worker threads for replicate ensembles.
    #[arg(long, global = true, env = "HOLELAB_WORKERS")]
    workers: Option<usize>,
    /// Overrides `spec.master_seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Validate the config and print the planned work without sampling.
    #[arg(long, global = true)]
    dry_run: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample configurations and write them as CSV.
    Sample,
    /// Good/bad decomposition with its invariant checks.
    Partition,
    /// Corrector capacity measure over the thinned points.
    Corrector,
    /// Random covering with its volume and dichotomy checks.
    Covering,
    /// Ensemble run and log-log rate fit of one quantity.
    Rates {
        #[arg(long)]
        quantity: Option<String>,
    },
    /// H^-1 distance of the capacity measure to its mean.
    Hminus,
    /// Perforated and homogenized solves on the grid.
    Solve,
    /// Monte Carlo check of the Poisson exchange formula.
    Mecke {
        #[arg(long)]
        trials: Option<usize>,
        /// Functional name; repeatable. Defaults to all built-ins.
        #[arg(long = "functional")]
        functionals: Vec<String>,
    },
    /// Predicted exponents for dimension and moment gap.
    Exponents {
        #[arg(long, default_value_t = 3)]
        d: usize,
        #[arg(long)]
        beta: f64,
    },
}

/// Failure classes mapped to exit codes.
enum Failure {
    Check(String),
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        let usage = e.chain().any(|c| {
            c.downcast_ref::<serde_json::Error>().is_some()
                || matches!(
                    c.downcast_ref::<holelab::Error>(),
                    Some(
                        holelab::Error::InvalidSpec(_)
                            | holelab::Error::TooManyPoints { .. }
                            | holelab::Error::EpsilonTooLarge { .. }
                            | holelab::Error::WrongProcess(_)
                            | holelab::Error::Domain(_)
                            | holelab::Error::DivergentMoment { .. }
                            | holelab::Error::CellTooLarge { .. }
                            | holelab::Error::RegimeUndefined(_)
                            | holelab::Error::FitRefused(_)
                            | holelab::Error::Unresolved { .. }
                            | holelab::Error::Json(_)
                    )
                )
        });
        if usage {
            Failure::Usage(e)
        } else {
            Failure::Runtime(e)
        }
    }
}

impl From<holelab::Error> for Failure {
    fn from(e: holelab::Error) -> Self {
        anyhow::Error::from(e).into()
    }
}

type Outcome = Result<(), Failure>;

struct Ctx {
    cfg: ExperimentConfig,
    out: PathBuf,
    seed: Option<u64>,
    dry_run: bool,
}

impl Ctx {
    fn spec(&self) -> Result<ProcessSpec, Failure> {
        self.cfg.process(self.seed).map_err(Failure::Usage)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn delta(&self, spec: &ProcessSpec) -> f64 {
        QuantityParams {
            delta: self.cfg.delta,
            ..Default::default()
        }
        .delta_for(spec)
    }

    fn replicates(&self) -> usize {
        self.cfg.replicates.unwrap_or(1)
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let bytes = serde_json::to_vec_pretty(value)?;
    write_atomic(path, &bytes)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(msg)) => {
            eprintln!("check failed: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("runtime error: {e:#}");
            ExitCode::from(3)
        }
    }
}

fn run(cli: Cli) -> Outcome {
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(Failure::Usage(anyhow!("--workers must be positive")));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| Failure::Runtime(e.into()))?;
    }
    let cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p).map_err(Failure::Usage)?,
        None => ExperimentConfig::default(),
    };
    let ctx = Ctx {
        cfg,
        out: cli.out_dir.clone(),
        seed: cli.seed,
        dry_run: cli.dry_run,
    };
    match cli.command {
        Command::Sample => sample(&ctx),
        Command::Partition => run_partition(&ctx),
        Command::Corrector => corrector(&ctx),
        Command::Covering => covering(&ctx),
        Command::Rates { quantity } => rates(&ctx, quantity),
        Command::Hminus => hminus(&ctx),
        Command::Solve => solve(&ctx),
        Command::Mecke { trials, functionals } => mecke(&ctx, trials, functionals),
        Command::Exponents { d, beta } => exponents(&ctx, d, beta),
    }
}

fn plan(ctx: &Ctx, command: &str, spec: &ProcessSpec, extra: String) -> bool {
    if ctx.dry_run {
        println!(
            "{command}: dry run, d = {}, epsilon = {}, {} process, ~{:.0} points per replicate, {} replicate(s){extra}; outputs in {}",
            spec.d,
            spec.epsilon,
            if spec.is_lattice() { "lattice" } else { "poisson" },
            spec.expected_points(),
            ctx.replicates(),
            ctx.out.display()
        );
    }
    ctx.dry_run
}

fn sample(ctx: &Ctx) -> Outcome {
    let spec = ctx.spec()?;
    if plan(ctx, "sample", &spec, String::new()) {
        return Ok(());
    }
    let mut total = 0;
    for r in 0..ctx.replicates() as u64 {
        let c = sample_configuration(&spec, r)?;
        total += c.len();
        write_configuration(&c, &ctx.path(&format!("configuration_r{r}.csv")))?;
    }
    println!("sample: points {total} pass");
    Ok(())
}

fn run_partition(ctx: &Ctx) -> Outcome {
    let spec = ctx.spec()?;
    let delta = ctx.delta(&spec);
    if plan(ctx, "partition", &spec, format!(", delta = {delta}")) {
        return Ok(());
    }
    let mut failed = Vec::new();
    let mut summary = Vec::new();
    for r in 0..ctx.replicates() as u64 {
        let c = sample_configuration(&spec, r)?;
        let p = partition(&c, delta)?;
        let report = verify_partition(&c, &p);
        write_partition(&c, &p, &ctx.path(&format!("partition_r{r}.csv")))?;
        if !report.all_passed() {
            failed.push(r);
        }
        summary.push(json!({
            "replicate": r,
            "points": c.len(),
            "good": p.good.len(),
            "bad_j": p.bad_j.len(),
            "bad_k": p.bad_k.len(),
            "bad_c": p.bad_c.len(),
            "bad_i": p.bad_i.len(),
            "bad_capacity_sum": bad_capacity_sum(&c, &p),
            "checks": report.checks,
        }));
    }
    write_json(
        &ctx.path("partition_report.json"),
        &json!({ "delta": delta, "replicates": summary }),
    )?;
    let bad: usize = summary
        .iter()
        .map(|s| s["points"].as_u64().unwrap() as usize - s["good"].as_u64().unwrap() as usize)
        .sum();
    println!(
        "partition: bad points {bad} {}",
        if failed.is_empty() { "pass" } else { "fail" }
    );
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Check(format!("invariants violated in replicates {failed:?}")))
    }
}

fn corrector(ctx: &Ctx) -> Outcome {
    let spec = ctx.spec()?;
    let delta = ctx.delta(&spec);
    if plan(ctx, "corrector", &spec, format!(", delta = {delta}")) {
        return Ok(());
    }
    let c = sample_configuration(&spec, 0)?;
    let pts = thin_phi_delta(&c, delta);
    let r = c.min_distances();
    let outer: Vec<f64> = pts.iter().map(|&i| r[i]).collect();
    let field = CorrectorField::from_points(&c, &pts, &outer)?;
    let mu = build_mu_eps(&field);
    write_measure(&mu, &ctx.path("measure.csv"))?;
    let density = mu.total_weight() / spec.domain.volume(spec.d);
    let c0 = c0_constant(&spec)?;
    write_json(
        &ctx.path("corrector.json"),
        &json!({ "atoms": mu.atoms.len(), "total_weight": mu.total_weight(), "density": density, "c0": c0 }),
    )?;
    println!("corrector: density {density:.6} (C0 {c0:.6}) pass");
    Ok(())
}

fn covering(ctx: &Ctx) -> Outcome {
    let spec = ctx.spec()?;
    let (k0, kappa0) = regime_parameters(spec.d, spec.epsilon)?;
    let k = ctx.cfg.k.unwrap_or(k0);
    let kappa = ctx.cfg.kappa.unwrap_or(kappa0);
    if plan(ctx, "covering", &spec, format!(", k = {k}, kappa = {kappa}")) {
        return Ok(());
    }
    let mut violations = 0;
    let mut reports = Vec::new();
    for r in 0..ctx.replicates() as u64 {
        let c = sample_configuration(&spec, r)?;
        match build_random_covering_with(&c, k, kappa) {
            Ok(cov) => {
                let report = verify_random_covering(&c, &cov);
                violations += report.violations();
                write_covering(&cov, &ctx.path(&format!("covering_r{r}.csv")))?;
                reports.push(serde_json::to_value(&report).map_err(anyhow::Error::from)?);
            }
            Err(holelab::Error::Covering(msg)) => {
                violations += 1;
                reports.push(json!({ "replicate": r, "error": msg }));
            }
            Err(e) => return Err(e.into()),
        }
    }
    write_json(
        &ctx.path("covering_report.json"),
        &json!({ "k": k, "kappa": kappa, "replicates": reports }),
    )?;
    println!(
        "covering: violations {violations} {}",
        if violations == 0 { "pass" } else { "fail" }
    );
    if violations == 0 {
        Ok(())
    } else {
        Err(Failure::Check(format!("{violations} covering violations")))
    }
}

/// Predicted slope and check for a quantity.
fn expectation(q: Quantity, spec: &ProcessSpec, delta: f64) -> (f64, SlopeCheck) {
    let beta = spec.marks.beta_eff;
    let t = theoretical_exponents(spec.d, beta);
    let d = spec.d as f64;
    match q {
        Quantity::BadCapacitySum => (bad_capacity_exponent(spec.d, beta, delta), SlopeCheck::AtLeast(0.15)),
        Quantity::OverlapPairs => (t.overlap_exponent, SlopeCheck::Within(0.2)),
        Quantity::SVariance => (2.0 * d / (d + 2.0), SlopeCheck::Within(0.25)),
        Quantity::DetEstimateRhs => (t.rate, SlopeCheck::AtLeast(0.15)),
        Quantity::MuHminus => (1.0, SlopeCheck::Within(0.25)),
    }
}

fn rates(ctx: &Ctx, quantity: Option<String>) -> Outcome {
    let spec = ctx.spec()?;
    let name = quantity
        .or_else(|| ctx.cfg.quantity.clone())
        .ok_or_else(|| Failure::Usage(anyhow!("rates needs --quantity or a \"quantity\" config key")))?;
    let q = Quantity::parse(&name)?;
    let grid = ctx
        .cfg
        .epsilon_grid
        .clone()
        .ok_or_else(|| Failure::Usage(anyhow!("rates needs \"epsilon_grid\" in the config")))?;
    let reps = ctx.cfg.replicates.unwrap_or(30);
    let params = QuantityParams {
        delta: ctx.cfg.delta,
        k: ctx.cfg.k,
        grid_n: ctx.cfg.grid_n,
    };
    let delta = params.delta_for(&spec);
    let (mut theoretical, mut check) = expectation(q, &spec, delta);
    if let Some(t) = ctx.cfg.theoretical {
        theoretical = t;
    }
    if let Some(tol) = ctx.cfg.tolerance {
        check = match check {
            SlopeCheck::Within(_) => SlopeCheck::Within(tol),
            SlopeCheck::AtLeast(_) => SlopeCheck::AtLeast(tol),
        };
    }
    if ctx.dry_run {
        let smallest = grid.iter().cloned().fold(f64::INFINITY, f64::min);
        println!(
            "rates: dry run, quantity {}, epsilon grid {grid:?}, {reps} replicates, delta {delta}, predicted slope {theoretical:.4} ({check:?}), ~{:.0} points per replicate at epsilon {smallest}",
            q.name(),
            spec.clone().with_epsilon(smallest).expected_points()
        );
        return Ok(());
    }
    let stat = ensemble_run(&spec, q, &grid, reps, &params)?;
    stat.write_csv(&ctx.path(&format!("{}_samples.csv", q.name())))?;
    let fit = fit_rate(&stat, theoretical, check)?;
    fit.write_json(&ctx.path(&format!("{}_fit.json", q.name())))?;
    println!(
        "rates: {} slope {:.4} (predicted {theoretical:.4}) {}",
        q.name(),
        fit.slope,
        if fit.pass { "pass" } else { "fail" }
    );
    if fit.pass {
        Ok(())
    } else {
        Err(Failure::Check(format!(
            "slope {:.4} fails {:?} around {theoretical:.4}",
            fit.slope, fit.check
        )))
    }
}

fn hminus(ctx: &Ctx) -> Outcome {
    let spec = ctx.spec()?;
    let delta = ctx.delta(&spec);
    let n = ctx.cfg.grid_n.unwrap_or(97);
    if plan(ctx, "hminus", &spec, format!(", delta = {delta}, grid {n}^3")) {
        return Ok(());
    }
    let mut values = Vec::new();
    for r in 0..ctx.replicates() as u64 {
        let c = sample_configuration(&spec, r)?;
        values.push(mu_hminus(&c, delta, n)?);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    write_json(
        &ctx.path("hminus.json"),
        &json!({ "grid_n": n, "delta": delta, "values": values, "mean": mean }),
    )?;
    println!("hminus: mu_hminus {mean:.6e} pass");
    Ok(())
}

fn solve(ctx: &Ctx) -> Outcome {
    let spec = ctx.spec()?;
    let delta = ctx.delta(&spec);
    let n = ctx.cfg.grid_n.unwrap_or(97);
    if plan(ctx, "solve", &spec, format!(", delta = {delta}, grid {n}^3, f = 1")) {
        return Ok(());
    }
    let c = sample_configuration(&spec, 0)?;
    let p = partition(&c, delta)?;
    let grid = Grid::for_domain(&spec.domain, n)?;
    let one = |_: &[f64; 3]| 1.0;
    let u_eps = solve_perforated(&c, &p, &one, &grid)?;
    let r = c.min_distances();
    let outer: Vec<f64> = p.good.iter().map(|&i| r[i]).collect();
    let w = CorrectorField::from_points(&c, &p.good, &outer)?;
    let c0 = c0_constant(&spec)?;
    let u = homogenized_solve(c0, &one, &grid)?;
    let err = homogenization_error(&u_eps.u, &w, &u.u, &grid);
    write_field(&grid, &u_eps.u, &ctx.path("u_eps.bin"))?;
    write_field(&grid, &u.u, &ctx.path("u_hom.bin"))?;
    write_slice(&grid, &u_eps.u, n / 2, &ctx.path("u_eps_mid.csv"))?;
    write_json(
        &ctx.path("solve.json"),
        &json!({
            "grid_n": n,
            "h": grid.h,
            "c0": c0,
            "error": err,
            "hole_nodes": u_eps.hole_nodes,
            "omitted_holes": u_eps.omitted_holes,
            "iterations": [u_eps.iterations, u.iterations],
            "residuals": [u_eps.residual, u.residual],
        }),
    )?;
    if u_eps.omitted_holes > 0 {
        eprintln!("warning: {} holes contain no grid node", u_eps.omitted_holes);
    }
    println!("solve: homogenization_error {err:.6e} pass");
    Ok(())
}

fn mecke(ctx: &Ctx, trials: Option<usize>, names: Vec<String>) -> Outcome {
    let spec = match &ctx.cfg.spec {
        Some(_) => ctx.spec()?,
        None => {
            let s = ProcessSpec::poisson(3, 0.1, 2.0, MarkDistribution::pareto_normalized(3, 2.0, 0.05));
            match ctx.seed {
                Some(seed) => s.with_seed(seed),
                None => s,
            }
        }
    };
    let trials = trials.or(ctx.cfg.trials).unwrap_or(10_000);
    let delta = ctx.delta(&spec);
    let t = ctx.cfg.spacing.unwrap_or(spec.epsilon * spec.epsilon);
    let names = if !names.is_empty() {
        names
    } else if let Some(f) = &ctx.cfg.functionals {
        f.clone()
    } else {
        ["one", "mark", "capped_capacity", "spaced_capacity"]
            .map(String::from)
            .to_vec()
    };
    let functionals = names
        .iter()
        .map(|n| MeckeFunctional::parse(n, delta, t))
        .collect::<holelab::Result<Vec<_>>>()?;
    if ctx.dry_run {
        println!(
            "mecke: dry run, {trials} trials, functionals {names:?}, lambda {}",
            spec.intensity()
        );
        return Ok(());
    }
    let mut reports = Vec::new();
    let mut worst: f64 = 0.0;
    for f in &functionals {
        let r = mecke_check(&spec, f, trials)?;
        worst = worst.max(r.z.abs());
        reports.push(r);
    }
    write_json(&ctx.path("mecke.json"), &reports)?;
    let pass = worst < 4.0;
    println!("mecke: max |z| {worst:.3} {}", if pass { "pass" } else { "fail" });
    if pass {
        Ok(())
    } else {
        Err(Failure::Check(format!("|z| = {worst:.3} >= 4")))
    }
}

fn exponents(ctx: &Ctx, d: usize, beta: f64) -> Outcome {
    if d < 3 || !(beta > 0.0) {
        return Err(Failure::Usage(anyhow!("need d >= 3 and beta > 0")));
    }
    let t = theoretical_exponents(d, beta);
    let out = json!({
        "d": d,
        "beta": beta,
        "delta": round12(t.delta),
        "rate": round12(t.rate),
        "k_exp": round12(t.k_exponent),
        "kappa": round12(t.kappa),
    });
    if !ctx.dry_run {
        write_json(&ctx.path("exponents.json"), &out).context("writing exponents.json")?;
    }
    println!("{out}");
    Ok(())
}

/// Drops representation noise such as 0.30000000000000004.
fn round12(x: f64) -> f64 {
    (x * 1e12).round() / 1e12
}
