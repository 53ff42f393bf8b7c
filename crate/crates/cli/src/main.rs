use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use snsm::analysis::{estimate_noise, rate_exponents, thm2_bound, thm3_bound, BoundInputs};
use snsm::harness::{
    compare_rows, format_f64, run, sweep_beta, verify_thm2, write_records_csv, write_records_json,
    Comparison, ExperimentConfig, ShapeManifest, SweepConfig, SweepMethod, SweepRow, Thm2Config,
};
use snsm::linalg::FrameKind;
use snsm::noise_models::NoiseDistribution;
use snsm::optim::{state_size_for, Overrides, Preset};

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Numeric(String),
    #[error("{0}")]
    Check(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Numeric(_) => 2,
            CliError::Check(_) => 3,
        }
    }
}

impl From<snsm::Error> for CliError {
    fn from(e: snsm::Error) -> Self {
        match e {
            snsm::Error::Numeric(_)
            | snsm::Error::NonFiniteGradient { .. }
            | snsm::Error::SvdNotConverged { .. } => CliError::Numeric(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Distribution {
    Gaussian,
    Bounded,
}

impl From<Distribution> for NoiseDistribution {
    fn from(d: Distribution) -> Self {
        match d {
            Distribution::Gaussian => NoiseDistribution::Gaussian,
            Distribution::Bounded => NoiseDistribution::Bounded,
        }
    }
}

/// Subset-Norm and Subspace-Momentum experiment harness.
#[derive(Debug, Parser)]
#[command(name = "snsm", version)]
struct Cli {
    /// Output encoding.
    #[arg(long, value_enum, default_value_t = Format::Csv, global = true)]
    format: Format,
    /// Offset added to every seed.
    #[arg(long, default_value_t = 0, global = true)]
    seed_base: u64,
    /// Write output here instead of stdout.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an experiment described by a JSON config and stream its records.
    Train(TrainArgs),
    /// Compare coordinate, norm and subset-norm step sizes across noise densities.
    Sweep(SweepArgs),
    /// Dimension exponents of the convergence rates for given density rates.
    Rates(RatesArgs),
    /// Estimate per-coordinate noise variance from a file of gradient samples.
    Noise(NoiseArgs),
    /// Optimizer state size for a parameter shape manifest.
    Mem(MemArgs),
    /// Evaluate a convergence bound.
    Bound(BoundArgs),
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Experiment config (JSON).
    config: PathBuf,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long, default_value_t = 1024)]
    dim: usize,
    /// Density rates to sweep.
    #[arg(long, value_delimiter = ',', default_value = "0,0.5,1")]
    betas: Vec<f64>,
    /// Extra fixed subset sizes.
    #[arg(long, value_delimiter = ',')]
    sizes: Vec<usize>,
    /// Split the noisy coordinates into this many subsets; skipped at rates where it does not divide.
    #[arg(long, value_delimiter = ',')]
    noisy_subsets: Vec<usize>,
    #[arg(long, default_value_t = 5000)]
    steps: u64,
    #[arg(long, default_value_t = 10)]
    seeds: u64,
    #[arg(long, default_value_t = 0.5)]
    lr: f64,
    #[arg(long, default_value_t = 1e-6)]
    b0: f64,
    #[arg(long, default_value_t = 1.0)]
    magnitude: f64,
    #[arg(long, value_enum, default_value_t = Distribution::Gaussian)]
    distribution: Distribution,
    /// Exit with status 3 if the expected orderings at β = 0 and β = 1 are reversed.
    #[arg(long)]
    check: bool,
}

#[derive(Debug, Args)]
struct RatesArgs {
    #[arg(long, required = true, num_args = 1.., value_delimiter = ',')]
    beta: Vec<f64>,
}

#[derive(Debug, Args)]
struct NoiseArgs {
    /// One sample per line, values separated by commas or whitespace.
    #[arg(long)]
    samples: PathBuf,
    /// Coordinates with sample variance above this count as noisy.
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
}

#[derive(Debug, Args)]
struct MemArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    preset: Preset,
    /// Subspace rank for presets that use one.
    #[arg(long)]
    rank: Option<usize>,
}

#[derive(Debug, Args)]
struct BoundArgs {
    #[arg(long, value_parser = ["2", "3"])]
    thm: String,
    #[arg(long, default_value_t = 1.0)]
    delta1: f64,
    /// Smoothness constant.
    #[arg(long, default_value_t = 1.0)]
    l: f64,
    #[arg(long, default_value_t = 10_000.0)]
    steps: f64,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    /// Noise norm for the subspace-momentum bound.
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0.9)]
    beta1: f64,
    /// Per-subset noise norms for the subset-norm bound.
    #[arg(long, value_delimiter = ',')]
    subset_sigma: Vec<f64>,
    /// Largest per-coordinate noise level; defaults to the largest subset norm.
    #[arg(long)]
    sigma_max: Option<f64>,
    /// Initial accumulator, one value for all subsets or one per subset.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    b0: Vec<f64>,
    #[arg(long, default_value_t = 0.01)]
    eta: f64,
    /// Also check the subspace-momentum bound by simulation on a quadratic; exits 3 on failure.
    #[arg(long)]
    verify: bool,
    #[arg(long, default_value_t = 100)]
    dim: usize,
    #[arg(long, default_value_t = 20)]
    seeds: u64,
    #[arg(long, default_value = "svd")]
    frame: FrameKind,
    #[arg(long, default_value_t = 10)]
    rank: usize,
    #[arg(long, default_value_t = 200)]
    refresh_gap: u64,
}

/// A rectangular result with a typed JSON counterpart.
struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

fn open_output(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn emit<S: Serialize>(cli: &Cli, table: &Table, json: &S) -> CliResult<()> {
    let mut out = open_output(cli.output.as_deref())?;
    match cli.format {
        Format::Csv => {
            let mut w = csv::WriterBuilder::new()
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(&mut out);
            w.write_record(&table.header)?;
            for row in &table.rows {
                w.write_record(row)?;
            }
            w.flush()?;
        }
        Format::Json => write_records_json(&mut out, json)?,
    }
    out.flush()?;
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map(format_f64).unwrap_or_default()
}

fn train(cli: &Cli, args: &TrainArgs) -> CliResult<()> {
    let text = std::fs::read_to_string(&args.config)?;
    let mut config: ExperimentConfig = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("{}: {e}", args.config.display())))?;
    for s in &mut config.seeds {
        *s = s.wrapping_add(cli.seed_base);
    }
    let out = run(&config)?;
    let target = cli.output.clone().or(config.output.clone());
    let mut w = open_output(target.as_deref())?;
    match cli.format {
        Format::Csv => write_records_csv(&mut w, &out.records)?,
        Format::Json => write_records_json(&mut w, &out)?,
    }
    w.flush()?;
    eprintln!(
        "mean grad_norm_sq over {} seeds: {} ± {}",
        out.stats.n,
        format_f64(out.stats.mean),
        format_f64(out.stats.stderr)
    );
    if out.diverged {
        let seeds: Vec<u64> = out
            .summaries
            .iter()
            .filter(|s| s.diverged)
            .map(|s| s.seed)
            .collect();
        return Err(CliError::Numeric(format!("diverged for seeds {seeds:?}")));
    }
    Ok(())
}

fn sweep(cli: &Cli, args: &SweepArgs) -> CliResult<()> {
    let seeds: Vec<u64> = (0..args.seeds)
        .map(|i| cli.seed_base.wrapping_add(i))
        .collect();
    let mut rows: Vec<SweepRow> = Vec::new();
    for &beta in &args.betas {
        let mut methods = vec![SweepMethod::Coordinate, SweepMethod::Norm];
        methods.extend(
            args.sizes
                .iter()
                .map(|&size| SweepMethod::SubsetSize { size }),
        );
        for &k in &args.noisy_subsets {
            let m = SweepMethod::NoisySubsets { k };
            match m.subset_size(args.dim, beta) {
                Ok(_) => methods.push(m),
                Err(e) => eprintln!("skipping {} at beta {beta}: {e}", m.label()),
            }
        }
        let mut cfg =
            SweepConfig::standard(args.dim, vec![beta], methods, args.steps, seeds.clone());
        cfg.lr = args.lr;
        cfg.b0 = args.b0;
        cfg.magnitude = args.magnitude;
        cfg.distribution = args.distribution.into();
        rows.extend(sweep_beta(&cfg)?);
    }
    let table = Table {
        header: vec![
            "beta",
            "method",
            "subset_size",
            "subsets",
            "mean",
            "stderr",
            "n_seeds",
            "diverged",
        ],
        rows: rows
            .iter()
            .map(|r| {
                vec![
                    format_f64(r.beta),
                    r.method.clone(),
                    r.subset_size.to_string(),
                    r.subsets.to_string(),
                    format_f64(r.stats.mean),
                    format_f64(r.stats.stderr),
                    r.stats.n.to_string(),
                    r.diverged.to_string(),
                ]
            })
            .collect(),
    };
    emit(cli, &table, &rows)?;
    if rows.iter().any(|r| r.diverged > 0) {
        return Err(CliError::Numeric("some sweep trajectories diverged".into()));
    }
    if args.check {
        check_sweep(&rows)?;
    }
    Ok(())
}

fn check_sweep(rows: &[SweepRow]) -> CliResult<()> {
    let mut failures = Vec::new();
    let column = |beta: f64| rows.iter().filter(move |r| r.beta == beta);
    if let Some(coord) = column(0.0).find(|r| r.method == "coordinate") {
        if let Some(norm) = column(0.0).find(|r| r.method == "norm") {
            let c = compare_rows(norm, coord);
            eprintln!("beta 0: norm vs coordinate: {c:?}");
            if c == Comparison::Fail {
                failures.push("beta 0: norm worse than coordinate");
            }
        }
    }
    if let Some(coord) = column(1.0).find(|r| r.method == "coordinate") {
        let best = column(1.0)
            .filter(|r| r.method != "coordinate" && r.method != "norm")
            .min_by(|a, b| a.stats.mean.total_cmp(&b.stats.mean));
        if let Some(best) = best {
            let c = compare_rows(best, coord);
            eprintln!("beta 1: {} vs coordinate: {c:?}", best.method);
            if c == Comparison::Fail {
                failures.push("beta 1: best subset-norm worse than coordinate");
            }
        }
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Check(failures.join("; ")))
    }
}

fn rates(cli: &Cli, args: &RatesArgs) -> CliResult<()> {
    let reports = args
        .beta
        .iter()
        .map(|&b| rate_exponents(b))
        .collect::<Result<Vec<_>, _>>()?;
    let table = Table {
        header: vec![
            "beta",
            "coordinate_slow",
            "coordinate_fast",
            "norm_slow",
            "norm_fast",
            "subset_norm_slow",
            "subset_norm_fast",
            "optimal_k_exponent",
        ],
        rows: reports
            .iter()
            .map(|r| {
                [
                    r.beta,
                    r.coordinate.slow,
                    r.coordinate.fast,
                    r.norm.slow,
                    r.norm.fast,
                    r.subset_norm.slow,
                    r.subset_norm.fast,
                    r.optimal_k_exponent,
                ]
                .into_iter()
                .map(format_f64)
                .collect()
            })
            .collect(),
    };
    emit(cli, &table, &reports)
}

fn read_samples(path: &Path) -> CliResult<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path)?;
    let mut samples = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<f64>().map_err(|_| {
                    CliError::Usage(format!(
                        "{}:{}: `{s}` is not a number",
                        path.display(),
                        idx + 1
                    ))
                })
            })
            .collect::<CliResult<Vec<f64>>>()?;
        samples.push(row);
    }
    Ok(samples)
}

fn noise(cli: &Cli, args: &NoiseArgs) -> CliResult<()> {
    let samples = read_samples(&args.samples)?;
    let report = estimate_noise(&samples)?.density_report(args.threshold);
    let table = Table {
        header: vec![
            "dimension",
            "samples",
            "threshold",
            "noisy_count",
            "noisy_fraction",
            "beta_estimate",
            "mean_noisy_variance",
            "max_variance",
        ],
        rows: vec![vec![
            report.dimension.to_string(),
            report.samples.to_string(),
            format_f64(report.threshold),
            report.noisy_count.to_string(),
            format_f64(report.noisy_fraction),
            opt(report.beta_estimate),
            opt(report.mean_noisy_variance),
            format_f64(report.max_variance),
        ]],
    };
    emit(cli, &table, &report)
}

fn mem(cli: &Cli, args: &MemArgs) -> CliResult<()> {
    let manifest = ShapeManifest::read(&args.manifest)?;
    let mut spec = args.preset.spec();
    spec.apply_overrides(&Overrides {
        rank: args.rank,
        ..Default::default()
    })?;
    let size = state_size_for(&spec, &manifest.params)?;
    let mut rows: Vec<Vec<String>> = manifest
        .params
        .iter()
        .zip(&size.params)
        .map(|(p, s)| {
            vec![
                p.name.clone(),
                p.class.to_string(),
                p.rows.to_string(),
                p.cols.to_string(),
                s.momentum.to_string(),
                s.second_moment.to_string(),
                s.frame.to_string(),
                s.total().to_string(),
            ]
        })
        .collect();
    rows.push(vec![
        "TOTAL".into(),
        String::new(),
        String::new(),
        String::new(),
        size.momentum.to_string(),
        size.second_moment.to_string(),
        size.frame.to_string(),
        size.total.to_string(),
    ]);
    let table = Table {
        header: vec![
            "name",
            "class",
            "rows",
            "cols",
            "momentum",
            "second_moment",
            "frame",
            "total",
        ],
        rows,
    };
    emit(cli, &table, &size)
}

fn bound(cli: &Cli, args: &BoundArgs) -> CliResult<()> {
    if args.thm == "3" {
        if args.subset_sigma.is_empty() {
            return Err(CliError::Usage(
                "--subset-sigma is required for --thm 3".into(),
            ));
        }
        let c = args.subset_sigma.len();
        let b0 = match args.b0.len() {
            1 => vec![args.b0[0]; c],
            n if n == c => args.b0.clone(),
            n => {
                return Err(CliError::Usage(format!(
                    "--b0 has {n} values for {c} subsets"
                )))
            }
        };
        let inputs = BoundInputs {
            delta1: args.delta1,
            l: args.l,
            sigma_max: args
                .sigma_max
                .unwrap_or_else(|| args.subset_sigma.iter().copied().fold(0.0, f64::max)),
            subset_sigma: args.subset_sigma.clone(),
            b0,
            eta: args.eta,
            t: args.steps,
            delta: args.delta,
        };
        let b = thm3_bound(&inputs)?;
        let table = Table {
            header: vec![
                "alpha",
                "g",
                "i",
                "h",
                "noise_term",
                "deterministic_term",
                "rhs",
            ],
            rows: vec![[
                b.alpha,
                b.g,
                b.i,
                b.h,
                b.noise_term,
                b.deterministic_term,
                b.rhs,
            ]
            .into_iter()
            .map(format_f64)
            .collect()],
        };
        return emit(cli, &table, &b);
    }

    let b = thm2_bound(
        args.delta1,
        args.sigma,
        args.l,
        args.beta1,
        args.steps,
        args.delta,
    )?;
    let mut header = vec![
        "alpha",
        "eta_star",
        "deterministic_term",
        "noise_term",
        "tail_term",
        "bound",
    ];
    let mut row: Vec<String> = [
        b.alpha,
        b.eta_star,
        b.deterministic_term,
        b.noise_term,
        b.tail_term,
        b.bound,
    ]
    .into_iter()
    .map(format_f64)
    .collect();
    if !args.verify {
        return emit(
            cli,
            &Table {
                header,
                rows: vec![row],
            },
            &b,
        );
    }
    if args.steps.fract() != 0.0 || args.steps < 1.0 {
        return Err(CliError::Usage(
            "--steps must be a positive integer with --verify".into(),
        ));
    }
    let mut cfg = Thm2Config::quadratic(
        args.dim,
        args.sigma,
        args.steps as u64,
        (0..args.seeds)
            .map(|i| cli.seed_base.wrapping_add(i))
            .collect(),
    );
    cfg.objective = snsm::harness::ObjectiveSpec::Quadratic {
        dim: args.dim,
        curvature: args.l,
        lambda: None,
    };
    cfg.delta1 = args.delta1;
    cfg.beta1 = args.beta1;
    cfg.delta = args.delta;
    cfg.frame_kind = args.frame;
    cfg.rank = args.rank;
    cfg.refresh_gap = args.refresh_gap;
    let report = verify_thm2(&cfg)?;
    header.extend(["violations", "n", "fraction", "threshold", "passed"]);
    row.extend([
        report.violations.to_string(),
        report.n.to_string(),
        format_f64(report.fraction),
        format_f64(report.threshold),
        report.passed.to_string(),
    ]);
    emit(
        cli,
        &Table {
            header,
            rows: vec![row],
        },
        &report,
    )?;
    if report.passed {
        Ok(())
    } else {
        Err(CliError::Check(format!(
            "violation fraction {} exceeds {}",
            report.fraction, report.threshold
        )))
    }
}

fn dispatch(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Train(a) => train(cli, a),
        Command::Sweep(a) => sweep(cli, a),
        Command::Rates(a) => rates(cli, a),
        Command::Noise(a) => noise(cli, a),
        Command::Mem(a) => mem(cli, a),
        Command::Bound(a) => bound(cli, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
