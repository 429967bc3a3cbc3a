use std::fs::{self, File};
use std::path::{Path, PathBuf};

use clap::{Args, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use trigreg::bayes::{gamma_hat_gibbs, gibbs_run, GibbsConfig};
use trigreg::bounds::{
    effective_dimension, wz_bound, wz_constants, BoundContext, BoundReport, WzEpsMode,
};
use trigreg::estimator::{fit_kernel_oracle, fit_ridge, fit_unregularized, Dataset};
use trigreg::experiments::{run_experiment, ExperimentConfig, ExperimentName, RecordTable};
use trigreg::{HypothesisSpace, SpectralFunction};

use crate::error::{CliError, CliResult};
use crate::output::{emit, read_json, read_text, write_atomic, write_json};
use crate::plot;

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the regularized estimator to a CSV dataset.
    Fit(FitArgs),
    /// Evaluate one bound (or all of them) from a context file.
    Bound(BoundArgs),
    /// Closed-form regularization selectors.
    SelectGamma(SelectArgs),
    /// Gibbs sampling of the regularization parameter.
    Gibbs(GibbsArgs),
    /// Run a Monte Carlo study and write records plus a summary.
    Experiment(ExperimentArgs),
    /// Render an SVG plot from a records CSV.
    Plot(PlotArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FitMethod {
    Ridge,
    Kernel,
    Unregularized,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    space: PathBuf,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, value_enum, default_value = "ridge")]
    method: FitMethod,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BoundKind {
    Theorem1,
    ApproxA,
    ApproxB,
    CombinedA,
    CombinedB,
    SzMinGamma,
    Sz,
    Crossover,
    Lgz,
    Wz,
    EffectiveDimension,
    Report,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum EpsMode {
    Direct,
    Halved,
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    #[arg(value_enum)]
    kind: BoundKind,
    #[arg(long)]
    ctx: PathBuf,
    #[arg(long)]
    gamma: Option<f64>,
    /// Output bound for the Smale-Zhou bound.
    #[arg(long = "m")]
    m: Option<f64>,
    /// True approximation error for the Lin-Guo-Zhou bound.
    #[arg(long)]
    approx_error: Option<f64>,
    /// Noise variance for the Lin-Guo-Zhou bound.
    #[arg(long)]
    sigma_norm: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    /// Sup norm of the regression function for the Wang-Zhou bound.
    #[arg(long)]
    b_inf: Option<f64>,
    #[arg(long, value_enum, default_value = "direct")]
    eps_mode: EpsMode,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[arg(long)]
    ctx: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GibbsArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    space: PathBuf,
    /// Noise variance used in the evidence.
    #[arg(long)]
    sigma2: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1500)]
    samples: usize,
    #[arg(long, default_value_t = 1000)]
    keep: usize,
    #[arg(long, default_value_t = 1.0)]
    init_gamma: f64,
    /// Write the full chain here as CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    with_alpha: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// sz_compare, lgz_compare, tradeoff, wz_compare or reg_benefit.
    name: String,
    /// JSON configuration; the built-in preset is used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
    /// Overrides the configured master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configured number of runs.
    #[arg(long)]
    runs: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PlotKind {
    Boxplot,
    Line,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[arg(long)]
    records: PathBuf,
    #[arg(long, value_enum)]
    kind: PlotKind,
    /// Comma-separated column names.
    #[arg(long, value_delimiter = ',', required = true)]
    columns: Vec<String>,
    /// Grouping column for line plots.
    #[arg(long)]
    group: Option<String>,
    #[arg(long)]
    log: bool,
    #[arg(long)]
    title: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

fn need<T>(v: Option<T>, flag: &str, what: &str) -> CliResult<T> {
    v.ok_or_else(|| CliError::Usage(format!("{what} requires --{flag}")))
}

fn load_space(path: &Path) -> CliResult<HypothesisSpace> {
    read_json(path)
}

fn load_data(path: &Path) -> CliResult<Dataset> {
    let f = File::open(path).map_err(|e| CliError::File {
        path: path.to_path_buf(),
        source: e.into(),
    })?;
    Dataset::read_csv(f).map_err(CliError::file(path))
}

fn load_ctx(path: &Path) -> CliResult<BoundContext> {
    let ctx: BoundContext = read_json(path)?;
    ctx.validate().map_err(CliError::file(path))?;
    Ok(ctx)
}

fn print_real(v: f64) {
    println!("{}", trigreg::experiments::table::format_real(v));
}

pub fn run(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Fit(a) => fit(a),
        Command::Bound(a) => bound(a),
        Command::SelectGamma(a) => select_gamma(a),
        Command::Gibbs(a) => gibbs(a),
        Command::Experiment(a) => experiment(a),
        Command::Plot(a) => plot_cmd(a),
    }
}

#[derive(Serialize)]
struct FitOutput<'a> {
    method: &'static str,
    gamma: f64,
    alpha_hat: &'a [f64],
    f_z: &'a SpectralFunction,
}

fn fit(a: FitArgs) -> CliResult<()> {
    let hs = load_space(&a.space)?;
    let d = load_data(&a.data)?;
    let (method, res) = match a.method {
        FitMethod::Ridge => (
            "ridge",
            fit_ridge(&hs, &d, need(a.gamma, "gamma", "ridge fit")?)?,
        ),
        FitMethod::Kernel => (
            "kernel",
            fit_kernel_oracle(&hs, &d, need(a.gamma, "gamma", "kernel fit")?)?,
        ),
        FitMethod::Unregularized => {
            if a.gamma.is_some_and(|g| g != 0.0) {
                return Err(CliError::Usage(
                    "unregularized fit takes no --gamma (or --gamma 0)".into(),
                ));
            }
            ("unregularized", fit_unregularized(&hs, &d)?)
        }
    };
    let out = FitOutput {
        method,
        gamma: res.gamma,
        alpha_hat: &res.alpha_hat,
        f_z: &res.f_z,
    };
    emit(a.out.as_deref(), |w| write_json(w, &out))
}

fn bound(a: BoundArgs) -> CliResult<()> {
    let ctx = load_ctx(&a.ctx)?;
    let gamma = || need(a.gamma, "gamma", "this bound");
    match a.kind {
        BoundKind::Theorem1 => print_real(ctx.sample_bound_theorem1(gamma()?)),
        BoundKind::ApproxA => print_real(ctx.approx_bound_a(gamma()?)),
        BoundKind::ApproxB => print_real(ctx.approx_bound_b(gamma()?)),
        BoundKind::CombinedA => {
            print_real(ctx.combined_bound(gamma()?, trigreg::bounds::Variant::A))
        }
        BoundKind::CombinedB => {
            print_real(ctx.combined_bound(gamma()?, trigreg::bounds::Variant::B))
        }
        BoundKind::SzMinGamma => print_real(ctx.sz_min_gamma()),
        BoundKind::Sz => print_real(ctx.sz_bound(need(a.m, "m", "sz")?, gamma()?)?),
        BoundKind::Crossover => print_real(ctx.sz_crossover_m(gamma()?)),
        BoundKind::Lgz => {
            let b = ctx.lgz_bound(
                gamma()?,
                need(a.approx_error, "approx-error", "lgz")?,
                need(a.sigma_norm, "sigma-norm", "lgz")?,
            );
            emit(None, |w| {
                write_json(
                    w,
                    &json!({"expectation": b.expectation, "probability_bound": b.probability_bound}),
                )
            })?;
        }
        BoundKind::Wz => {
            let mode = match a.eps_mode {
                EpsMode::Direct => WzEpsMode::Direct,
                EpsMode::Halved => WzEpsMode::Halved,
            };
            let wc = wz_constants(
                &ctx,
                need(a.b_inf, "b-inf", "wz")?,
                need(a.eps, "eps", "wz")?,
                mode,
            )?;
            print_real(wz_bound(&wc, ctx.n, ctx.delta));
        }
        BoundKind::EffectiveDimension => print_real(effective_dimension(&ctx.lambdas, gamma()?)),
        BoundKind::Report => {
            let report = BoundReport::at_gamma(&ctx, gamma()?);
            emit(None, |w| write_json(w, &report))?;
        }
    }
    Ok(())
}

fn select_gamma(a: SelectArgs) -> CliResult<()> {
    let ctx = load_ctx(&a.ctx)?;
    let ga = ctx.gamma_hat_a();
    let gb = ctx.gamma_hat_b()?;
    let out = json!({
        "gamma_hat_a": ga.gamma,
        "condition_a_met": ga.condition_met,
        "gamma_hat_b": gb,
        "A": ctx.a_coeff(),
        "B": ctx.alpha_pi_l2(),
        "D": ctx.d_coeff(),
    });
    emit(a.out.as_deref(), |w| write_json(w, &out))
}

fn gibbs(a: GibbsArgs) -> CliResult<()> {
    let hs = load_space(&a.space)?;
    let d = load_data(&a.data)?;
    let cfg = GibbsConfig {
        total_samples: a.samples,
        keep_last: a.keep,
        init_gamma: a.init_gamma,
        seed: a.seed,
        sigma2: a.sigma2,
    };
    cfg.validate()?;
    let trace = gibbs_run(&hs, &d, &cfg)?;
    let gamma_hat = gamma_hat_gibbs(&trace, &cfg)?;
    if let Some(p) = &a.trace {
        write_atomic(p, |w| trace.write_csv(w, a.with_alpha))?;
    }
    let out = json!({
        "gamma_hat": gamma_hat,
        "seed": a.seed,
        "total_samples": a.samples,
        "keep_last": a.keep,
    });
    emit(a.out.as_deref(), |w| write_json(w, &out))
}

fn experiment(a: ExperimentArgs) -> CliResult<()> {
    let name = ExperimentName::parse(&a.name).ok_or_else(|| {
        let known: Vec<&str> = ExperimentName::ALL.iter().map(|n| n.as_str()).collect();
        CliError::Usage(format!(
            "unknown experiment `{}` (expected one of {})",
            a.name,
            known.join(", ")
        ))
    })?;
    let mut cfg = match &a.config {
        Some(p) => ExperimentConfig::from_json(&read_text(p)?).map_err(CliError::file(p))?,
        None => ExperimentConfig::preset(name),
    };
    if cfg.name != name {
        let path = a.config.clone().unwrap_or_default();
        return Err(CliError::File {
            path,
            source: trigreg::Error::Parse(format!(
                "key `name` is `{}` but the command asked for `{}`",
                cfg.name.as_str(),
                name.as_str()
            )),
        });
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(r) = a.runs {
        cfg.runs = r;
    }
    cfg.validate()?;
    let out = run_experiment(&cfg)?;
    fs::create_dir_all(&a.out_dir).map_err(|e| CliError::File {
        path: a.out_dir.clone(),
        source: e.into(),
    })?;
    let records = a.out_dir.join(format!("{}_records.csv", name.as_str()));
    let summary = a.out_dir.join(format!("{}_summary.json", name.as_str()));
    write_atomic(&records, |w| out.table.write_csv(w, name.as_str()))?;
    write_atomic(&summary, |w| write_json(w, &out.summary.to_json(&cfg)))?;
    eprintln!(
        "{}: {} runs, {} records -> {}",
        name.as_str(),
        cfg.runs,
        out.table.rows.len(),
        a.out_dir.display()
    );
    Ok(())
}

fn plot_cmd(a: PlotArgs) -> CliResult<()> {
    let f = File::open(&a.records).map_err(|e| CliError::File {
        path: a.records.clone(),
        source: e.into(),
    })?;
    let table = RecordTable::read_csv(f).map_err(CliError::file(&a.records))?;
    let title = a.title.clone().unwrap_or_else(|| a.columns.join(", "));
    let svg = match a.kind {
        PlotKind::Boxplot => plot::boxplot_svg(&table, &a.columns, a.log, &title)?,
        PlotKind::Line => {
            let group = need(a.group.as_deref(), "group", "a line plot")?;
            plot::line_svg(&table, group, &a.columns, a.log, &title)?
        }
    };
    write_atomic(&a.out, |w| {
        w.write_all(svg.as_bytes())?;
        Ok(())
    })
}
