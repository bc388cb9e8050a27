//! `parisi`: evaluate, minimize and check the Parisi functional from the
//! command line.
//!
//! Exit codes: 0 success, 1 invalid input, 2 a minimization did not
//! converge (results are still printed, flagged).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod output;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use parisi_core::calculus::{dp_dbeta_analytic, dp_dbeta_fd, overlap_moment_limit, subdifferential_probe};
use parisi_core::finite_model::disorder_average;
use parisi_core::functional::{evaluate, QuadratureConfig};
use parisi_core::optimizer::{minimize_ladder, LadderReport, OptimizerOptions};
use parisi_core::phase::{boundary_scan, classify, fixed_point_oracle, RS_TOL};
use parisi_core::{DiscreteMeasure, MixtureSpec, Parallelism};

use output::{Format, Table};

/// Environment variable holding the default worker count.
const JOBS_ENV: &str = "PARISI_JOBS";

#[derive(Parser, Debug)]
#[command(name = "parisi", version, about = "Parisi functional for mixed p-spin models")]
struct Cli {
    /// Output format on stdout [default: human].
    #[arg(long, value_enum, global = true)]
    format: Option<Format>,
    /// Worker threads for scans and disorder averages (default: PARISI_JOBS,
    /// else all cores). Output does not depend on this value.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// JSON run configuration with optional `quadrature`, `optimizer`,
    /// `seed` and `format` keys; unknown keys are rejected. Command-line
    /// flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct QuadArgs {
    /// Gauss–Hermite nodes per layer (Hermite layer rule) [default: 40].
    #[arg(long)]
    quad_nodes: Option<usize>,
    /// Points of the partial-sum grid, odd and at least 257 [default: 513].
    #[arg(long)]
    grid_points: Option<usize>,
}

#[derive(Args, Debug, Clone)]
struct OptArgs {
    /// Starts per minimization [default: 8].
    #[arg(long)]
    restarts: Option<usize>,
    /// Seed for random starts and disorder [default: 1].
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate P(m, β) for one measure.
    Eval {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        measure: PathBuf,
        /// Also report P + log 2, comparable with finite-N free energies.
        #[arg(long)]
        with_entropy: bool,
        #[command(flatten)]
        quad: QuadArgs,
    },
    /// Minimize over measures with k = 1..k_max atoms.
    Minimize {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value_t = 4)]
        k_max: usize,
        /// Shorthand for `--format csv`.
        #[arg(long)]
        csv: bool,
        /// Write the top-level measure as JSON, readable by `eval --measure`.
        #[arg(long)]
        save_measure: Option<PathBuf>,
        #[command(flatten)]
        quad: QuadArgs,
        #[command(flatten)]
        opt: OptArgs,
    },
    /// Compare ∂P/∂β_p with β_p(1 − ∫q^p dm) and the envelope difference
    /// quotients.
    GradCheck {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        p: u32,
        #[arg(long, default_value_t = 4)]
        k_max: usize,
        #[command(flatten)]
        quad: QuadArgs,
        #[command(flatten)]
        opt: OptArgs,
    },
    /// Predicted limiting overlap moments ∫q^p dm.
    Moments {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, num_args = 1.., required = true)]
        p: Vec<u32>,
        #[arg(long, default_value_t = 4)]
        k_max: usize,
        #[command(flatten)]
        quad: QuadArgs,
        #[command(flatten)]
        opt: OptArgs,
    },
    /// Replica-symmetric or not, with measure-level diagnostics.
    Classify {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value_t = 3)]
        k_max: usize,
        #[arg(long, default_value_t = RS_TOL)]
        tol: f64,
        #[command(flatten)]
        quad: QuadArgs,
        #[command(flatten)]
        opt: OptArgs,
    },
    /// Sweep one β_p and locate the first change of phase.
    PhaseScan {
        #[arg(long)]
        spec: PathBuf,
        /// `p=P:START:STOP:STEP`.
        #[arg(long)]
        sweep: String,
        /// Also write the table as CSV to this file.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long, default_value_t = 2)]
        k_max: usize,
        #[arg(long, default_value_t = RS_TOL)]
        tol: f64,
        /// Width of the final bisection bracket.
        #[arg(long, default_value_t = 1e-3)]
        resolution: f64,
        #[command(flatten)]
        quad: QuadArgs,
        #[command(flatten)]
        opt: OptArgs,
    },
    /// Exact enumeration averaged over disorder.
    SkExact {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, num_args = 1.., default_values_t = [2u32])]
        moments: Vec<u32>,
    },
    /// Finite-N averages next to the minimized functional.
    SkCompare {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long, default_value_t = 3)]
        k_max: usize,
        #[command(flatten)]
        quad: QuadArgs,
        #[command(flatten)]
        opt: OptArgs,
    },
}

#[derive(Debug, Default, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
struct RunConfig {
    quadrature: Option<QuadratureConfig>,
    optimizer: Option<OptimizerOptions>,
    seed: Option<u64>,
    format: Option<Format>,
}

/// Failure kinds mapped to exit codes.
enum Failure {
    Invalid(String),
    NotConverged,
}

fn invalid(e: impl std::fmt::Display) -> Failure {
    Failure::Invalid(e.to_string())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<T, Failure> {
    let text = fs::read_to_string(path).map_err(|e| invalid(format!("cannot read {what} {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| invalid(format!("invalid {what} {}: {e}", path.display())))
}

struct Context {
    quad: QuadratureConfig,
    opts: OptimizerOptions,
    seed: Option<u64>,
    format: Format,
}

impl Context {
    fn quad(&self, a: &QuadArgs) -> Result<QuadratureConfig, Failure> {
        let mut q = self.quad.clone();
        if let Some(n) = a.quad_nodes {
            q.hermite_nodes = n;
        }
        if let Some(g) = a.grid_points {
            q.grid_points = g;
        }
        q.validate().map_err(invalid)?;
        Ok(q)
    }

    fn opts(&self, a: &OptArgs) -> Result<OptimizerOptions, Failure> {
        let mut o = self.opts.clone();
        if let Some(s) = a.seed.or(self.seed) {
            o.seed = s;
        }
        if let Some(r) = a.restarts {
            o.restarts = r;
        }
        o.validate().map_err(invalid)?;
        Ok(o)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::NotConverged) => {
            eprintln!("warning: minimization did not converge within the iteration budget");
            ExitCode::from(2)
        }
    }
}

fn configure_jobs(jobs: Option<usize>) -> Result<(), Failure> {
    let jobs = match jobs {
        Some(j) => Some(j),
        None => match std::env::var(JOBS_ENV) {
            Ok(v) => Some(
                v.parse::<usize>()
                    .map_err(|_| invalid(format!("{JOBS_ENV} must be a positive integer")))?,
            ),
            Err(_) => None,
        },
    };
    if jobs == Some(0) {
        return Err(invalid("--jobs must be at least 1"));
    }
    #[cfg(feature = "parallel")]
    if let Some(j) = jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .map_err(invalid)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    configure_jobs(cli.jobs)?;
    let config: RunConfig = match &cli.config {
        Some(p) => read_json(p, "config")?,
        None => RunConfig::default(),
    };
    let ctx = Context {
        quad: config.quadrature.unwrap_or_default(),
        opts: config.optimizer.unwrap_or_default(),
        seed: config.seed,
        format: cli.format.or(config.format).unwrap_or(Format::Human),
    };
    ctx.quad.validate().map_err(invalid)?;
    ctx.opts.validate().map_err(invalid)?;
    match cli.command {
        Command::Eval {
            spec,
            measure,
            with_entropy,
            quad,
        } => cmd_eval(&ctx, &spec, &measure, with_entropy, &quad),
        Command::Minimize {
            spec,
            k_max,
            csv,
            save_measure,
            quad,
            opt,
        } => {
            let format = if csv { Format::Csv } else { ctx.format };
            cmd_minimize(&ctx, format, &spec, k_max, save_measure.as_deref(), &quad, &opt)
        }
        Command::GradCheck {
            spec,
            p,
            k_max,
            quad,
            opt,
        } => cmd_grad_check(&ctx, &spec, p, k_max, &quad, &opt),
        Command::Moments {
            spec,
            p,
            k_max,
            quad,
            opt,
        } => cmd_moments(&ctx, &spec, &p, k_max, &quad, &opt),
        Command::Classify {
            spec,
            k_max,
            tol,
            quad,
            opt,
        } => cmd_classify(&ctx, &spec, k_max, tol, &quad, &opt),
        Command::PhaseScan {
            spec,
            sweep,
            csv,
            k_max,
            tol,
            resolution,
            quad,
            opt,
        } => cmd_phase_scan(&ctx, &spec, &sweep, csv.as_deref(), k_max, tol, resolution, &quad, &opt),
        Command::SkExact {
            spec,
            n,
            samples,
            seed,
            moments,
        } => cmd_sk_exact(&ctx, &spec, n, samples, seed, &moments),
        Command::SkCompare {
            spec,
            n,
            samples,
            k_max,
            quad,
            opt,
        } => cmd_sk_compare(&ctx, &spec, n, samples, k_max, &quad, &opt),
    }
}

fn load_spec(path: &Path) -> Result<MixtureSpec, Failure> {
    read_json(path, "spec")
}

fn converged(ok: bool) -> Result<(), Failure> {
    if ok {
        Ok(())
    } else {
        Err(Failure::NotConverged)
    }
}

fn cmd_eval(ctx: &Context, spec: &Path, measure: &Path, with_entropy: bool, qa: &QuadArgs) -> Result<(), Failure> {
    let spec = load_spec(spec)?;
    let m: DiscreteMeasure = read_json(measure, "measure")?;
    let quad = ctx.quad(qa)?;
    let v = evaluate(&spec, &m, &quad).map_err(invalid)?;
    let mut t = Table::new(&["value", "e_x0", "correction", "quad_error_estimate"]);
    let mut row = vec![
        v.value.into(),
        v.e_x0.into(),
        v.correction.into(),
        v.quad_error_estimate.into(),
    ];
    if with_entropy {
        t.push_column("value_with_entropy");
        row.push(v.with_entropy().into());
    }
    t.push(row);
    #[derive(Serialize)]
    struct Out {
        value: f64,
        e_x0: f64,
        correction: f64,
        quad_error_estimate: f64,
        #[serde(skip_serializing_if = "Option::is_none")]
        value_with_entropy: Option<f64>,
    }
    let out = Out {
        value: v.value,
        e_x0: v.e_x0,
        correction: v.correction,
        quad_error_estimate: v.quad_error_estimate,
        value_with_entropy: with_entropy.then(|| v.with_entropy()),
    };
    output::emit(ctx.format, &out, &t);
    Ok(())
}

fn ladder_table(l: &LadderReport) -> Table {
    let mut t = Table::new(&["k", "value", "q", "m", "eps", "residual"]);
    for (level, eps) in l.levels.iter().zip(&l.eps) {
        t.push(vec![
            (level.k as u64).into(),
            level.value.into(),
            output::Cell::List(level.measure.atoms().to_vec()),
            output::Cell::List(level.measure.cumulative().to_vec()),
            (*eps).into(),
            level.stationarity_max_residual.into(),
        ]);
    }
    t
}

fn cmd_minimize(
    ctx: &Context,
    format: Format,
    spec: &Path,
    k_max: usize,
    save_measure: Option<&Path>,
    qa: &QuadArgs,
    oa: &OptArgs,
) -> Result<(), Failure> {
    let spec = load_spec(spec)?;
    let (quad, opts) = (ctx.quad(qa)?, ctx.opts(oa)?);
    let ladder = minimize_ladder(&spec, k_max, &opts, &quad).map_err(invalid)?;
    if let Some(path) = save_measure {
        let text = output::to_json(&ladder.top().measure) + "\n";
        fs::write(path, text).map_err(|e| invalid(format!("cannot write {}: {e}", path.display())))?;
    }
    output::emit(format, &ladder, &ladder_table(&ladder));
    converged(ladder.converged)
}

fn cmd_grad_check(
    ctx: &Context,
    spec: &Path,
    p: u32,
    k_max: usize,
    qa: &QuadArgs,
    oa: &OptArgs,
) -> Result<(), Failure> {
    let spec = load_spec(spec)?;
    let (quad, opts) = (ctx.quad(qa)?, ctx.opts(oa)?);
    let ladder = minimize_ladder(&spec, k_max, &opts, &quad).map_err(invalid)?;
    let probe = subdifferential_probe(&spec, p, &ladder, &opts, &quad).map_err(invalid)?;
    let top = &ladder.top().measure;
    let fd = dp_dbeta_fd(&spec, top, p, 1e-3, &quad).map_err(invalid)?;
    let analytic = dp_dbeta_analytic(&spec, top, p);
    if !analytic.term_present {
        eprintln!("note: p = {p} is not a term of the model; β_p = 0");
    }
    #[derive(Serialize)]
    struct Out<'a> {
        probe: &'a parisi_core::calculus::SubdifferentialProbe,
        fixed_measure_fd: f64,
        fixed_measure_analytic: f64,
        term_present: bool,
        ladder: &'a LadderReport,
    }
    let out = Out {
        probe: &probe,
        fixed_measure_fd: fd,
        fixed_measure_analytic: analytic.value,
        term_present: analytic.term_present,
        ladder: &ladder,
    };
    let mut t = Table::new(&[
        "p",
        "beta",
        "k",
        "analytic",
        "fd",
        "lower",
        "upper",
        "y",
        "eps_k",
        "c_estimate",
        "slack",
        "contained",
    ]);
    t.push(vec![
        (p as u64).into(),
        probe.beta_value.into(),
        (probe.k as u64).into(),
        probe.analytic.into(),
        fd.into(),
        probe.lower.into(),
        probe.upper.into(),
        probe.y.into(),
        probe.eps_k.into(),
        probe.c_estimate.into(),
        probe.slack.into(),
        probe.contained.into(),
    ]);
    output::emit(ctx.format, &out, &t);
    converged(ladder.converged)
}

fn cmd_moments(
    ctx: &Context,
    spec: &Path,
    ps: &[u32],
    k_max: usize,
    qa: &QuadArgs,
    oa: &OptArgs,
) -> Result<(), Failure> {
    let spec = load_spec(spec)?;
    let (quad, opts) = (ctx.quad(qa)?, ctx.opts(oa)?);
    let ladder = minimize_ladder(&spec, k_max, &opts, &quad).map_err(invalid)?;
    let preds: Vec<_> = ps.iter().map(|&p| overlap_moment_limit(&spec, &ladder, p)).collect();
    let mut t = Table::new(&["p", "moment", "within_guarantee"]);
    for m in &preds {
        if !m.within_guarantee {
            eprintln!(
                "note: β_{} = 0, the prediction for this moment is outside the guarantee",
                m.p
            );
        }
        t.push(vec![(m.p as u64).into(), m.value.into(), m.within_guarantee.into()]);
    }
    #[derive(Serialize)]
    struct Out<'a> {
        moments: &'a [parisi_core::calculus::MomentPrediction],
        measure: &'a DiscreteMeasure,
    }
    output::emit(
        ctx.format,
        &Out {
            moments: &preds,
            measure: &ladder.top().measure,
        },
        &t,
    );
    converged(ladder.converged)
}

fn cmd_classify(
    ctx: &Context,
    spec: &Path,
    k_max: usize,
    tol: f64,
    qa: &QuadArgs,
    oa: &OptArgs,
) -> Result<(), Failure> {
    let spec = load_spec(spec)?;
    let (quad, opts) = (ctx.quad(qa)?, ctx.opts(oa)?);
    let d = classify(&spec, k_max, tol, &quad, &opts).map_err(invalid)?;
    if d.conjectural {
        eprintln!("note: non-concentration of the overlap is conjectural for the 2-spin model with a field");
    }
    let mut cols: Vec<String> = [
        "is_rs",
        "band",
        "rs_margin",
        "best_dirac_q",
        "best_dirac_value",
        "reference_value",
        "ladder_value",
        "l1_spread",
        "variance_proxy",
    ]
    .map(String::from)
    .to_vec();
    cols.extend(d.moments.iter().map(|(p, _)| format!("moment_{p}")));
    let col_refs: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut t = Table::new(&col_refs);
    let mut row: Vec<output::Cell> = vec![
        d.is_rs.into(),
        output::Cell::Text(format!("{:?}", d.band).to_lowercase()),
        d.rs_margin.into(),
        d.best_dirac_q.into(),
        d.best_dirac_value.into(),
        d.reference_value.into(),
        d.ladder_value.into(),
        d.l1_spread.into(),
        d.variance_proxy.into(),
    ];
    row.extend(d.moments.iter().map(|(_, m)| output::Cell::from(*m)));
    t.push(row);
    output::emit(ctx.format, &d, &t);
    converged(d.converged)
}

fn parse_sweep(s: &str) -> Result<(u32, Vec<f64>), Failure> {
    let bad = || invalid(format!("sweep {s:?} must look like p=2:0.1:1.5:0.05"));
    let rest = s.strip_prefix("p=").ok_or_else(bad)?;
    let parts: Vec<&str> = rest.split(':').collect();
    if parts.len() != 4 {
        return Err(bad());
    }
    let p: u32 = parts[0].parse().map_err(|_| bad())?;
    let nums: Vec<f64> = parts[1..]
        .iter()
        .map(|v| v.parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_, _>>()?;
    let (start, stop, step) = (nums[0], nums[1], nums[2]);
    if !(step > 0.0) || !(stop >= start) || !start.is_finite() || !stop.is_finite() {
        return Err(bad());
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((p, (0..count).map(|i| start + i as f64 * step).collect()))
}

#[allow(clippy::too_many_arguments)]
fn cmd_phase_scan(
    ctx: &Context,
    spec: &Path,
    sweep: &str,
    csv: Option<&Path>,
    k_max: usize,
    tol: f64,
    resolution: f64,
    qa: &QuadArgs,
    oa: &OptArgs,
) -> Result<(), Failure> {
    let spec = load_spec(spec)?;
    let (p, grid) = parse_sweep(sweep)?;
    let (quad, opts) = (ctx.quad(qa)?, ctx.opts(oa)?);
    let opts = OptimizerOptions {
        parallelism: Parallelism::Parallel,
        ..opts
    };
    let report = boundary_scan(&spec, p, &grid, k_max, tol, resolution, &quad, &opts).map_err(invalid)?;
    // moment_2 first, then the remaining orders of the model
    let mut ps: Vec<u32> = spec.orders().chain([2, p]).collect();
    ps.sort_unstable_by_key(|&q| (q != 2, q));
    ps.dedup();
    let mut cols = vec![
        "beta",
        "rs_margin",
        "is_rs",
        "best_dirac_q",
        "l1_spread",
        "variance_proxy",
    ]
    .into_iter()
    .map(String::from)
    .collect::<Vec<_>>();
    cols.extend(ps.iter().map(|q| format!("moment_{q}")));
    cols.extend(["band", "reference_value", "ladder_value", "refinement"].map(String::from));
    let col_refs: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut t = Table::new(&col_refs);
    let mut rows: Vec<(&parisi_core::phase::ScanRow, bool)> = report
        .table
        .iter()
        .map(|r| (r, false))
        .chain(report.refinements.iter().map(|r| (r, true)))
        .collect();
    rows.sort_by(|a, b| a.0.beta.total_cmp(&b.0.beta));
    for (r, refinement) in rows {
        let d = &r.diagnostics;
        let mut row: Vec<output::Cell> = vec![
            r.beta.into(),
            d.rs_margin.into(),
            d.is_rs.into(),
            d.best_dirac_q.into(),
            d.l1_spread.into(),
            d.variance_proxy.into(),
        ];
        row.extend(ps.iter().map(|&q| d.measure.moment(q).into()));
        row.push(output::Cell::Text(format!("{:?}", d.band).to_lowercase()));
        row.push(d.reference_value.into());
        row.push(d.ladder_value.into());
        row.push(refinement.into());
        t.push(row);
    }
    if let Some(path) = csv {
        fs::write(path, t.to_csv()).map_err(|e| invalid(format!("cannot write {}: {e}", path.display())))?;
    }
    match report.beta_c {
        Some(b) => eprintln!(
            "transition at beta = {b:.4} (fixed-point prediction {})",
            report
                .fixed_point_beta_c
                .map_or("n/a".to_string(), |v| format!("{v:.4}"))
        ),
        None => eprintln!("no transition in range"),
    }
    output::emit(ctx.format, &report, &t);
    converged(report.converged)
}

fn warn_odd_orders(spec: &MixtureSpec) {
    if !spec.has_only_even_or_linear_terms() {
        eprintln!(
            "warning: odd orders p ≥ 3 are present; the Parisi formula is only established for even orders plus p = 1"
        );
    }
}

fn cmd_sk_exact(
    ctx: &Context,
    spec: &Path,
    n: usize,
    samples: usize,
    seed: Option<u64>,
    moments: &[u32],
) -> Result<(), Failure> {
    let spec = load_spec(spec)?;
    warn_odd_orders(&spec);
    let seed = seed.or(ctx.seed).unwrap_or(1);
    let avg = disorder_average(&spec, n, moments, samples, seed, Parallelism::Parallel).map_err(invalid)?;
    #[derive(Serialize)]
    struct Out<'a> {
        spec: &'a MixtureSpec,
        n: usize,
        samples: usize,
        seed: u64,
        free_energy: parisi_core::finite_model::Estimate,
        moments: &'a [(u32, parisi_core::finite_model::Estimate)],
        overlap_mean: parisi_core::finite_model::Estimate,
        overlap_mean_variance: parisi_core::finite_model::Estimate,
    }
    let out = Out {
        spec: &spec,
        n: avg.n,
        samples: avg.samples,
        seed: avg.seed,
        free_energy: avg.free_energy,
        moments: &avg.moments,
        overlap_mean: avg.overlap_mean,
        overlap_mean_variance: avg.overlap_mean_variance,
    };
    let mut t = Table::new(&["quantity", "mean", "stderr"]);
    let mut add = |name: String, e: parisi_core::finite_model::Estimate| {
        t.push(vec![output::Cell::Text(name), e.mean.into(), e.stderr.into()]);
    };
    add("free_energy".into(), avg.free_energy);
    for (p, e) in &avg.moments {
        add(format!("moment_{p}"), *e);
    }
    add("overlap_mean".into(), avg.overlap_mean);
    add("overlap_mean_variance".into(), avg.overlap_mean_variance);
    output::emit(ctx.format, &out, &t);
    Ok(())
}

fn cmd_sk_compare(
    ctx: &Context,
    spec: &Path,
    n: usize,
    samples: usize,
    k_max: usize,
    qa: &QuadArgs,
    oa: &OptArgs,
) -> Result<(), Failure> {
    let spec = load_spec(spec)?;
    warn_odd_orders(&spec);
    let (quad, opts) = (ctx.quad(qa)?, ctx.opts(oa)?);
    let ladder = minimize_ladder(&spec, k_max, &opts, &quad).map_err(invalid)?;
    let ps: Vec<u32> = spec.orders().collect();
    let avg = disorder_average(&spec, n, &ps, samples, opts.seed, Parallelism::Parallel).map_err(invalid)?;
    let top = ladder.top();
    let parisi_f = top.value + std::f64::consts::LN_2;
    let mut t = Table::new(&["quantity", "finite_n", "stderr", "parisi"]);
    t.push(vec![
        output::Cell::Text("free_energy".into()),
        avg.free_energy.mean.into(),
        avg.free_energy.stderr.into(),
        parisi_f.into(),
    ]);
    for (p, e) in &avg.moments {
        t.push(vec![
            output::Cell::Text(format!("moment_{p}")),
            e.mean.into(),
            e.stderr.into(),
            top.measure.moment(*p).into(),
        ]);
    }
    #[derive(Serialize)]
    struct Row {
        quantity: String,
        finite_n: f64,
        stderr: f64,
        parisi: f64,
    }
    let mut rows = vec![Row {
        quantity: "free_energy".into(),
        finite_n: avg.free_energy.mean,
        stderr: avg.free_energy.stderr,
        parisi: parisi_f,
    }];
    rows.extend(avg.moments.iter().map(|(p, e)| Row {
        quantity: format!("moment_{p}"),
        finite_n: e.mean,
        stderr: e.stderr,
        parisi: top.measure.moment(*p),
    }));
    #[derive(Serialize)]
    struct Out<'a> {
        spec: &'a MixtureSpec,
        n: usize,
        samples: usize,
        rows: Vec<Row>,
        measure: &'a DiscreteMeasure,
        fixed_point_roots: Vec<f64>,
    }
    let out = Out {
        spec: &spec,
        n,
        samples,
        rows,
        measure: &top.measure,
        fixed_point_roots: fixed_point_oracle(&spec),
    };
    output::emit(ctx.format, &out, &t);
    converged(ladder.converged)
}
