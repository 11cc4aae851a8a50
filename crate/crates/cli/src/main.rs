//! `bosample` command-line front end.
//!
//! Exit codes: 0 success, 1 numerical failure, 2 usage or configuration
//! error, 3 degraded simulation, 4 I/O error.

mod table;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bosample::acquisition::{
    estimate_objective_records, fit_objective_surrogate, records_dataset, score_population, DEFAULT_ILCB_LAMBDA,
    DEFAULT_OBJECTIVE_ROUNDS,
};
use bosample::design::{minmax_design, SampleDraw, SamplingDesign, DEFAULT_EPSILON};
use bosample::estimators::{de_variance_estimate, difference_total, ht_total};
use bosample::harness::population::write_population_csv;
use bosample::harness::report::write_outputs;
use bosample::harness::{generate_synthetic_population, run_simulation, DesignKind, DesignSpec, SimulationConfig};
use bosample::harness::{GenerationMode, SyntheticSpec};
use bosample::stats::{mann_whitney_u_with, Alternative, MwuMethod};
use bosample::{
    AcquisitionKind, Dataset, Error, FeatureMatrix, GpPosterior, KernelSettings, PopulationFrame,
    SamplingScheme, SrsPiConvention,
};
use clap::{Args, Parser, Subcommand};

use table::{read_values, Table};

pub struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    fn io(message: impl Into<String>) -> Self {
        Self { code: 4, message: message.into() }
    }

    fn from_csv(path: &Path, e: csv::Error) -> Self {
        let message = format!("{}: {e}", path.display());
        if e.is_io_error() {
            Self::io(message)
        } else {
            Self::usage(message)
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Io(_) => 4,
            Error::Csv(c) if c.is_io_error() => 4,
            Error::SingularKernel { .. }
            | Error::DegenerateVariance
            | Error::InfiniteDivergence(_)
            | Error::ZeroInclusion(_)
            | Error::ZeroJointInclusion(..) => 1,
            _ => 2,
        };
        Self { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::io(e.to_string())
    }
}

#[derive(Parser)]
#[command(name = "bosample", version, about = "Surrogate-guided probability sampling")]
struct Cli {
    /// Master seed for every random choice.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads; defaults to available parallelism.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the repeated design comparison and write records, summary and provenance.
    Simulate(SimulateArgs),
    /// Score a population with an acquisition function and emit inclusion probabilities.
    Design(DesignArgs),
    /// Fit a GP on training rows and predict query rows.
    Fit(FitArgs),
    /// Horvitz-Thompson and difference estimates from a frame with a drawn sample.
    Estimate(EstimateArgs),
    /// One-sided Mann-Whitney U test between two single-column files.
    Mwu(MwuArgs),
    /// Generate a synthetic GP population as CSV.
    Synth(SynthArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "bosample-out")]
    out: PathBuf,
    #[arg(long)]
    repeats: Option<usize>,
    /// Comma-separated, e.g. `srs,bo-pu` or `control:srs,bo-ei`.
    #[arg(long)]
    designs: Option<String>,
    #[arg(long)]
    prior_size: Option<usize>,
    #[arg(long)]
    sample_size: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long)]
    srs_pi: Option<String>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    length_scale: Option<f64>,
    #[arg(long)]
    noise_variance: Option<f64>,
}

#[derive(Args)]
struct KernelArgs {
    /// Defaults to the median pairwise distance of standardized training inputs.
    #[arg(long)]
    length_scale: Option<f64>,
    /// Defaults to a tenth of the response variance.
    #[arg(long)]
    noise_variance: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    jitter: f64,
}

impl KernelArgs {
    fn settings(&self) -> KernelSettings {
        KernelSettings {
            length_scale: self.length_scale,
            noise_variance: self.noise_variance,
            jitter: self.jitter,
        }
    }
}

#[derive(Args)]
struct DesignArgs {
    /// Population features; a response column, if present, is ignored.
    #[arg(long)]
    population: PathBuf,
    /// Prior sample with features and response.
    #[arg(long)]
    prior: PathBuf,
    #[arg(long, default_value = "y")]
    response_column: String,
    /// pu, ilcb, ei or sei.
    #[arg(long, default_value = "pu")]
    acquisition: String,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
    #[arg(long, default_value_t = DEFAULT_ILCB_LAMBDA)]
    lambda: f64,
    #[arg(long, default_value_t = DEFAULT_OBJECTIVE_ROUNDS)]
    rounds: usize,
    #[command(flatten)]
    kernel: KernelArgs,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    query: PathBuf,
    #[arg(long, default_value = "y")]
    response_column: String,
    #[command(flatten)]
    kernel: KernelArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EstimateArgs {
    /// One row per population unit.
    #[arg(long)]
    frame: PathBuf,
    #[arg(long, default_value = "y")]
    y_column: String,
    #[arg(long, default_value = "yhat")]
    yhat_column: String,
    #[arg(long, default_value = "pi")]
    pi_column: String,
    /// 1 for sampled units, 0 otherwise. `y` may be empty where 0.
    #[arg(long, default_value = "selected")]
    selected_column: String,
    /// Scheme the sample was drawn under, for the variance estimate.
    #[arg(long, default_value = "poisson")]
    scheme: String,
}

#[derive(Args)]
struct MwuArgs {
    file_a: PathBuf,
    file_b: PathBuf,
    /// `less` tests whether the first sample tends to be smaller.
    #[arg(long, default_value = "less")]
    alternative: String,
    /// auto, exact or normal.
    #[arg(long, default_value = "auto")]
    method: String,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 1920)]
    size: usize,
    #[arg(long, default_value_t = 16)]
    dim: usize,
    #[arg(long, default_value_t = SyntheticSpec::default().length_scale)]
    length_scale: f64,
    #[arg(long, default_value_t = SyntheticSpec::default().signal_variance)]
    signal_variance: f64,
    #[arg(long, default_value_t = SyntheticSpec::default().noise_variance)]
    noise_variance: f64,
    /// auto, dense or chunked.
    #[arg(long, default_value = "auto")]
    mode: String,
    #[arg(long, default_value = "y")]
    response_column: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Result<u8, Failure> {
    if cli.threads == Some(0) {
        return Err(Failure::usage("--threads must be at least 1"));
    }
    let seed = cli.seed;
    match cli.command {
        Command::Simulate(a) => simulate(a, seed, cli.threads),
        Command::Design(a) => design(a, seed.unwrap_or(0)),
        Command::Fit(a) => fit(a),
        Command::Estimate(a) => estimate(a),
        Command::Mwu(a) => mwu(a),
        Command::Synth(a) => synth(a, seed.unwrap_or(0)),
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(std::io::BufWriter::new(
            std::fs::File::create(p).map_err(|e| Failure::io(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn simulate(a: SimulateArgs, seed: Option<u64>, threads: Option<usize>) -> Result<u8, Failure> {
    let mut cfg = match SimulationConfig::from_file(&a.config) {
        Err(Error::Io(e)) => return Err(Failure::io(format!("{}: {e}", a.config.display()))),
        other => other?,
    };
    if let Some(d) = &a.designs {
        let lambda = cfg
            .designs
            .iter()
            .find_map(|d| match d.kind {
                DesignKind::Bo(AcquisitionKind::Ilcb { lambda }) => Some(lambda),
                _ => None,
            })
            .unwrap_or(DEFAULT_ILCB_LAMBDA);
        cfg.designs = DesignSpec::parse_list(d, lambda)?;
    }
    if let Some(l) = a.lambda {
        cfg.set_ilcb_lambda(l);
    }
    if let Some(v) = a.repeats {
        cfg.repeats = v;
    }
    if let Some(v) = a.prior_size {
        cfg.prior_size = v;
    }
    if let Some(v) = a.sample_size {
        cfg.sample_size = v;
    }
    if let Some(v) = a.epsilon {
        cfg.epsilon = v;
    }
    if let Some(s) = &a.scheme {
        cfg.scheme = SamplingScheme::parse(s)?;
    }
    if let Some(s) = &a.srs_pi {
        cfg.srs_pi = SrsPiConvention::parse(s)?;
    }
    if let Some(v) = a.rounds {
        cfg.objective_rounds = v;
    }
    if a.length_scale.is_some() {
        cfg.kernel.length_scale = a.length_scale;
    }
    if a.noise_variance.is_some() {
        cfg.kernel.noise_variance = a.noise_variance;
    }
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    if threads.is_some() {
        cfg.threads = threads;
    }
    cfg.validate()?;

    let report = run_simulation(&cfg)?;
    let paths = write_outputs(&a.out, &report, &cfg)?;

    let mut out = std::io::stdout().lock();
    writeln!(out, "status {}", if report.degraded { "degraded" } else { "ok" })?;
    writeln!(out, "repeats {} failed {}", report.repeats, report.failed_repeats)?;
    for e in &report.mwu {
        writeln!(
            out,
            "p {} vs {} {} {:.6e}",
            e.design,
            e.baseline,
            e.metric.name(),
            e.p_value
        )?;
    }
    for p in &paths {
        writeln!(out, "wrote {}", p.display())?;
    }
    Ok(if report.degraded { 3 } else { 0 })
}

/// Feature names, feature rows and the response column if present.
type Split = (Vec<String>, Vec<Vec<f64>>, Option<Vec<f64>>);

fn split_table(path: &Path, response: &str, response_required: bool) -> Result<Split, Failure> {
    let t = Table::read(path)?;
    let idx = if response_required {
        Some(t.require(response, path)?)
    } else {
        t.column_index(response)
    };
    let (names, rows) = t.features_without(idx);
    if names.is_empty() {
        return Err(Failure::usage(format!("{}: no feature columns", path.display())));
    }
    Ok((names, rows, idx.map(|j| t.column(j))))
}

fn check_schema(a: (&Path, &[String]), b: (&Path, &[String])) -> Result<(), Failure> {
    if a.1 != b.1 {
        return Err(Failure::usage(format!(
            "schema mismatch: {} has feature columns [{}] but {} has [{}]",
            a.0.display(),
            a.1.join(", "),
            b.0.display(),
            b.1.join(", ")
        )));
    }
    Ok(())
}

fn design(a: DesignArgs, seed: u64) -> Result<u8, Failure> {
    let (pop_names, pop_rows, _) = split_table(&a.population, &a.response_column, false)?;
    let (prior_names, prior_rows, prior_y) = split_table(&a.prior, &a.response_column, true)?;
    check_schema((&a.population, &pop_names), (&a.prior, &prior_names))?;

    let kind = AcquisitionKind::parse(&a.acquisition, a.lambda)?;
    let population = FeatureMatrix::from_rows(&pop_rows)?;
    let prior = Dataset::new(FeatureMatrix::from_rows(&prior_rows)?, prior_y.unwrap_or_default())?;
    let kernel = a.kernel.settings().resolve(&prior)?;

    let scores = if kind.needs_objective() {
        let records = estimate_objective_records(&prior, &kernel, a.rounds, seed)?;
        let objective_cfg = KernelSettings::default().resolve(&records_dataset(&records)?)?;
        let objective = fit_objective_surrogate(&records, &objective_cfg)?;
        score_population(kind, &population, None, Some(&objective))?
    } else {
        let gp = GpPosterior::fit(&prior, &kernel)?;
        score_population(kind, &population, Some(&gp), None)?
    };
    let design = minmax_design(&scores, a.epsilon, SamplingScheme::Poisson, None)?;
    bosample::design::write_design_table(output(a.out.as_deref())?, &scores, &design)?;
    Ok(0)
}

fn fit(a: FitArgs) -> Result<u8, Failure> {
    let (train_names, train_rows, train_y) = split_table(&a.train, &a.response_column, true)?;
    let (query_names, query_rows, _) = split_table(&a.query, &a.response_column, false)?;
    check_schema((&a.train, &train_names), (&a.query, &query_names))?;

    let train = Dataset::new(FeatureMatrix::from_rows(&train_rows)?, train_y.unwrap_or_default())?;
    let kernel = a.kernel.settings().resolve(&train)?;
    let gp = GpPosterior::fit(&train, &kernel)?;
    let preds = gp.predict_many(&FeatureMatrix::from_rows(&query_rows)?)?;

    let mut w = csv::Writer::from_writer(output(a.out.as_deref())?);
    let io = |e: csv::Error| Failure::io(e.to_string());
    w.write_record(["mean", "std_dev"]).map_err(io)?;
    for p in preds {
        w.write_record([p.mean.to_string(), p.std_dev.to_string()]).map_err(io)?;
    }
    w.flush()?;
    Ok(0)
}

fn estimate(a: EstimateArgs) -> Result<u8, Failure> {
    let t = Table::read_with_blanks(&a.frame, &a.y_column)?;
    let y = t.column(t.require(&a.y_column, &a.frame)?);
    let y_hat = t.column(t.require(&a.yhat_column, &a.frame)?);
    let pi = t.column(t.require(&a.pi_column, &a.frame)?);
    let selected = t.column(t.require(&a.selected_column, &a.frame)?);

    let mut indices = Vec::new();
    for (k, s) in selected.iter().enumerate() {
        if *s == 1.0 {
            indices.push(k);
        } else if *s != 0.0 {
            return Err(Failure::usage(format!(
                "`{}` must be 0 or 1, found {s} at row {}",
                a.selected_column,
                k + 1
            )));
        }
    }
    if indices.is_empty() {
        return Err(Failure::usage("no selected units"));
    }
    if let Some(&k) = indices.iter().find(|&&k| y[k].is_nan()) {
        return Err(Failure::usage(format!("selected unit at row {} has no `{}`", k + 1, a.y_column)));
    }
    // Unobserved responses enter only through residuals outside the sample.
    let y_filled: Vec<f64> = y.iter().zip(&y_hat).map(|(v, h)| if v.is_nan() { *h } else { *v }).collect();

    let scheme = SamplingScheme::parse(&a.scheme)?;
    let n = match scheme {
        SamplingScheme::Poisson => None,
        _ => Some(indices.len()),
    };
    let design = SamplingDesign::from_pi(pi.clone(), scheme, n)?;
    let sample = SampleDraw::new(indices.clone(), pi)?;
    let frame = PopulationFrame::from_values(y_filled.clone(), y_hat)?;
    let ys: Vec<f64> = indices.iter().map(|&k| y_filled[k]).collect();

    let ht = ht_total(&sample, &ys)?;
    let de = difference_total(&sample, &frame, false)?;
    let de_norm = difference_total(&sample, &frame, true)?;
    let var = de_variance_estimate(&sample, &frame, &design)?;

    let mut out = std::io::stdout().lock();
    writeln!(out, "quantity,value")?;
    writeln!(out, "population_size,{}", frame.len())?;
    writeln!(out, "sample_size,{}", indices.len())?;
    writeln!(out, "ht_total,{}", ht.value)?;
    writeln!(out, "difference_total,{}", de.value)?;
    writeln!(out, "difference_total_normalized_pi,{}", de_norm.value)?;
    writeln!(out, "difference_variance_estimate,{}", var.value)?;
    writeln!(out, "variance_approximate,{}", var.approximate)?;
    writeln!(out, "variance_negative,{}", var.negative)?;
    Ok(0)
}

fn mwu(a: MwuArgs) -> Result<u8, Failure> {
    let alternative = Alternative::parse(&a.alternative)?;
    let method = match a.method.to_ascii_lowercase().as_str() {
        "auto" => MwuMethod::Auto,
        "exact" => MwuMethod::Exact,
        "normal" => MwuMethod::Normal,
        other => return Err(Failure::usage(format!("unknown method `{other}`"))),
    };
    let x = read_values(&a.file_a)?;
    let y = read_values(&a.file_b)?;
    let r = mann_whitney_u_with(&x, &y, alternative, method)?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "U {:.15e}", r.u_statistic)?;
    writeln!(out, "p {:.15e}", r.p_value)?;
    writeln!(out, "method {}", if r.exact { "exact" } else { "normal" })?;
    Ok(0)
}

fn synth(a: SynthArgs, seed: u64) -> Result<u8, Failure> {
    let spec = SyntheticSpec {
        population_size: a.size,
        feature_dim: a.dim,
        length_scale: a.length_scale,
        signal_variance: a.signal_variance,
        noise_variance: a.noise_variance,
        seed,
        mode: GenerationMode::parse(&a.mode)?,
    };
    let frame = generate_synthetic_population(&spec)?;
    write_population_csv(output(a.out.as_deref())?, &frame, &a.response_column)?;
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn error_codes() {
        assert_eq!(Failure::from(Error::Config("x".into())).code, 2);
        assert_eq!(Failure::from(Error::Io(std::io::Error::other("x"))).code, 4);
        assert_eq!(Failure::from(Error::DegenerateVariance).code, 1);
    }
}
