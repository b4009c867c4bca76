//! `larvest` command-line front end.

mod failure;

use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use larvest::data::{
    parse_experimental_csv, parse_lengths_csv, parse_temperature_csv, write_experimental_csv, CaseObservation, Stage,
    TemperatureProfile,
};
use larvest::field::{Bandwidths, FieldConfig, GrowthField, DEFAULT_DEV_THRESHOLD_C};
use larvest::inference::{estimate_case, EstimateOptions, EstimateReport, PriorSpec};
use larvest::kernel::Kernel;
use larvest::sim::{diurnal_profile, run_study, Study, StudyConfig};
use larvest::smoother::SmootherConfig;
use larvest::synth::{synth_dataset, SynthFamily, DESIGN_REPLICATES, DESIGN_TEMPS_C, DESIGN_TIMES_PER_TEMP};

use failure::{Failure, EXIT_OTHER};

#[derive(Parser)]
#[command(name = "larvest", version, about = "Larval growth curves and hatching-time estimation")]
struct Cli {
    /// Worker threads for parallel stages (results do not depend on it).
    #[arg(long, global = true, env = "LARVEST_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a growth field from constant-temperature rearing data.
    Fit(FitArgs),
    /// Estimate the hatching time of larvae collected at a scene.
    Estimate(EstimateArgs),
    /// Run a simulation study.
    Simulate(SimulateArgs),
    /// Write a synthetic rearing dataset.
    Synth(SynthArgs),
}

#[derive(Args)]
struct FitArgs {
    /// Rearing data CSV (`temperature_c,time_h,length_mm`).
    #[arg(long)]
    data: PathBuf,
    /// Output field JSON.
    #[arg(long)]
    out: PathBuf,
    /// Temperature bandwidth (°C) shared by all four temperature smoothers.
    #[arg(long)]
    h_temp: Option<f64>,
    /// Time bandwidth (hours) of the per-temperature smoother.
    #[arg(long)]
    h_time: Option<f64>,
    #[arg(long, default_value = "epanechnikov")]
    time_kernel: Kernel,
    #[arg(long, default_value = "gaussian")]
    temp_kernel: Kernel,
    /// Standardized time of maximum length shared by all shapes.
    #[arg(long)]
    alpha: Option<f64>,
    /// Lower developmental threshold (°C).
    #[arg(long, default_value_t = DEFAULT_DEV_THRESHOLD_C)]
    dev_threshold: f64,
    /// Drop batches whose curve peaks at an end of the time range.
    #[arg(long)]
    skip_monotone: bool,
}

#[derive(Args)]
struct EstimateArgs {
    /// Field JSON written by `fit`.
    #[arg(long)]
    field: PathBuf,
    /// Scene temperature CSV (`time_h,temp_c`).
    #[arg(long)]
    temps: PathBuf,
    /// Scene lengths CSV (`length_mm`).
    #[arg(long, conflicts_with = "inline_lengths", required_unless_present = "inline_lengths")]
    lengths: Option<PathBuf>,
    /// Scene lengths as a comma-separated list.
    #[arg(long, value_delimiter = ',')]
    inline_lengths: Option<Vec<f64>>,
    /// Earliest admissible hatching time (hours).
    #[arg(long, allow_hyphen_values = true)]
    t_a: f64,
    /// Collection time (hours); defaults to the end of the temperature record.
    #[arg(long, allow_hyphen_values = true)]
    t_star: Option<f64>,
    #[arg(long, default_value = "unknown")]
    stage: Stage,
    /// `uniform:LO:HI`, `gaussian:MEAN:SD` or `exponential:OFFSET:MEAN`.
    #[arg(long, allow_hyphen_values = true)]
    prior: Option<PriorSpec>,
    /// Confidence level of the likelihood interval (default 0.95).
    #[arg(long)]
    alpha_level: Option<f64>,
    /// Euler step (hours).
    #[arg(long, default_value_t = 1.0)]
    dt: f64,
    /// Candidate spacing (hours).
    #[arg(long, default_value_t = 1.0)]
    step: f64,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    /// `const-temp-noise`, `station-correlation` (or `station`), `varying-temp-noise`.
    #[arg(long)]
    study: Study,
    /// Temperature error sds (°C).
    #[arg(long, value_delimiter = ',')]
    sigma: Option<Vec<f64>>,
    /// Scene/station correlations.
    #[arg(long, value_delimiter = ',')]
    rho: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    #[arg(long, default_value_t = 20)]
    n_lengths: usize,
    /// Sd of simulated lengths around the planted trajectory (mm).
    #[arg(long, default_value_t = 0.0)]
    length_sd: f64,
    #[arg(long, default_value_t = -100.0, allow_hyphen_values = true)]
    t_h: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    dt: f64,
    /// Field JSON; defaults to a field fitted on the built-in synthetic design.
    #[arg(long)]
    field: Option<PathBuf>,
    /// Temperature CSV for the varying-temperature study; defaults to the bundled series.
    #[arg(long)]
    profile: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Histogram bin width (hours).
    #[arg(long, default_value_t = 1.0)]
    bin_width: f64,
}

#[derive(Args)]
struct SynthArgs {
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Rearing temperatures (°C).
    #[arg(long, value_delimiter = ',', default_values_t = DESIGN_TEMPS_C)]
    temps: Vec<f64>,
    #[arg(long, default_value_t = DESIGN_TIMES_PER_TEMP)]
    times: usize,
    #[arg(long, default_value_t = DESIGN_REPLICATES)]
    reps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Growth per degree-hour during the linear phase (mm).
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long)]
    base_temp: Option<f64>,
    #[arg(long)]
    max_len: Option<f64>,
    #[arg(long)]
    hatch_len: Option<f64>,
    #[arg(long)]
    shrink: Option<f64>,
    #[arg(long)]
    noise: Option<f64>,
}

fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Failure::new(EXIT_OTHER, format!("cannot open {}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::new(EXIT_OTHER, format!("cannot create {}: {e}", path.display())))
}

fn load_field(path: &Path) -> Result<GrowthField<f64>, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::new(EXIT_OTHER, format!("cannot read {}: {e}", path.display())))?;
    GrowthField::from_json(&text).map_err(|e| Failure::from(e).context(path.display()))
}

fn load_profile(path: &Path) -> Result<TemperatureProfile<f64>, Failure> {
    parse_temperature_csv(open(path)?).map_err(|e| Failure::from(e).context(path.display()))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut out = create(path)?;
    larvest::json::to_writer_pretty(&mut out, value).map_err(|e| Failure::new(EXIT_OTHER, e.to_string()))?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn cmd_fit(args: &FitArgs) -> Result<(), Failure> {
    let data = parse_experimental_csv(open(&args.data)?).map_err(|e| Failure::from(e).context(args.data.display()))?;
    let config = FieldConfig {
        smoother: SmootherConfig { bandwidth_h: args.h_time, kernel: args.time_kernel, ..SmootherConfig::default() },
        alpha: args.alpha,
        kernel: args.temp_kernel,
        bandwidths: args.h_temp.map(Bandwidths::shared),
        dev_threshold_c: args.dev_threshold,
        skip_monotone: args.skip_monotone,
        ..FieldConfig::default()
    };
    let field = GrowthField::fit(&data, &config)?;
    fs::write(&args.out, field.to_json())?;

    let mut out = io::stdout().lock();
    writeln!(out, "temperature_c,t_max_h,t_pup_h,warp_a,warp_b")?;
    for e in field.entries() {
        let w = &e.warp;
        writeln!(out, "{},{},{},{},{}", e.temperature_c, w.t_max, w.t_pup, w.a, w.b)?;
    }
    let h = field.bandwidths();
    writeln!(out, "alpha = {}", field.alpha())?;
    writeln!(out, "h_temp = {} (shape), {} (warp), {} (shape deriv), {} (warp deriv)", h.shape, h.warp, h.shape_deriv, h.warp_deriv)?;
    writeln!(out, "kernel = {}", field.kernel())?;
    Ok(())
}

fn cmd_estimate(args: &EstimateArgs) -> Result<(), Failure> {
    let field = load_field(&args.field)?;
    let profile = load_profile(&args.temps)?;
    let lengths = match (&args.lengths, &args.inline_lengths) {
        (Some(path), _) => parse_lengths_csv(open(path)?).map_err(|e| Failure::from(e).context(path.display()))?,
        (None, Some(values)) => values.clone(),
        (None, None) => return Err(Failure::parse("no lengths given (use --lengths or --inline-lengths)")),
    };
    if let Some(level) = args.alpha_level {
        if !(level > 0.0 && level < 1.0) {
            return Err(Failure::parse(format!("--alpha-level must lie in (0, 1), got {level}")));
        }
    }
    let t_star = args.t_star.unwrap_or(profile.span().1);
    let obs = CaseObservation::new(lengths, args.t_a, t_star, args.stage);
    obs.validate()?;
    let options = EstimateOptions { dt: args.dt, step: args.step, ..EstimateOptions::default() };
    let est = estimate_case(&field, &profile, &obs, &options)?;

    // The interval is reported by default whenever the variance allows it.
    let ci_level = match args.alpha_level {
        Some(level) => Some(level),
        None if est.has_likelihood() => Some(0.95),
        None => None,
    };
    let report = EstimateReport::build(&est, &obs, ci_level, args.prior.as_ref())?;

    fs::create_dir_all(&args.out_dir)?;
    write_json(&args.out_dir.join("report.json"), &report)?;
    let mut csv = create(&args.out_dir.join("criterion.csv"))?;
    report.write_criterion_csv(&mut csv)?;
    csv.flush()?;
    if report.posterior.is_some() {
        let mut csv = create(&args.out_dir.join("posterior.csv"))?;
        report.write_posterior_csv(&mut csv)?;
        csv.flush()?;
    }

    let mut out = io::stdout().lock();
    writeln!(out, "t_hat_h = {}", report.t_hat_h)?;
    writeln!(out, "pmi_h = {}", report.pmi_h)?;
    if let Some(ci) = &report.ci {
        writeln!(out, "ci_{} = [{}, {}]", ci.level, ci.lo, ci.hi)?;
    }
    if let Some(post) = &report.posterior {
        writeln!(out, "map_h = {}", post.map)?;
    }
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), Failure> {
    let mut config = StudyConfig::new(args.study);
    config.replicates = args.reps;
    config.n_lengths = args.n_lengths;
    config.length_sd_mm = args.length_sd;
    config.t_h = args.t_h;
    config.seed = args.seed;
    config.dt = args.dt;
    if let Some(sigma) = &args.sigma {
        config.sigma_t = sigma.clone();
    }
    if let Some(rho) = &args.rho {
        config.rho_t = rho.clone();
    }
    if !(args.bin_width.is_finite() && args.bin_width > 0.0) {
        return Err(Failure::parse(format!("--bin-width must be positive, got {}", args.bin_width)));
    }
    config.validate()?;

    let field = match &args.field {
        Some(path) => load_field(path)?,
        None => {
            let data = synth_dataset(
                &SynthFamily::default(),
                &DESIGN_TEMPS_C,
                DESIGN_TIMES_PER_TEMP,
                DESIGN_REPLICATES,
                args.seed,
            )?;
            GrowthField::fit(&data, &FieldConfig::default())?
        }
    };
    let profile = match (&args.profile, args.study) {
        (Some(path), _) => Some(load_profile(path)?),
        (None, Study::VaryingTempNoise) => Some(diurnal_profile()),
        (None, _) => None,
    };
    let result = run_study(&config, &field, profile.as_ref())?;

    fs::create_dir_all(&args.out_dir)?;
    let mut samples = create(&args.out_dir.join("samples.csv"))?;
    result.write_samples_csv(&mut samples)?;
    samples.flush()?;
    let mut hist = create(&args.out_dir.join("histogram.csv"))?;
    result.write_histogram_csv(&mut hist, args.bin_width)?;
    hist.flush()?;
    let summary = result.summary();
    write_json(&args.out_dir.join("summary.json"), &summary)?;

    let mut out = io::stdout().lock();
    writeln!(out, "{},mean,sd,successes,failures", summary.param_name)?;
    for c in &summary.cells {
        writeln!(out, "{},{},{},{},{}", c.param, c.mean, c.sd, c.successes, c.failures)?;
    }
    Ok(())
}

fn cmd_synth(args: &SynthArgs) -> Result<(), Failure> {
    let d = SynthFamily::<f64>::default();
    let family = SynthFamily {
        rate_coeff: args.rate.unwrap_or(d.rate_coeff),
        base_temp_c: args.base_temp.unwrap_or(d.base_temp_c),
        max_len_mm: args.max_len.unwrap_or(d.max_len_mm),
        hatch_len_mm: args.hatch_len.unwrap_or(d.hatch_len_mm),
        shrink_frac: args.shrink.unwrap_or(d.shrink_frac),
        noise_sd_mm: args.noise.unwrap_or(d.noise_sd_mm),
    };
    let data = synth_dataset(&family, &args.temps, args.times, args.reps, args.seed)?;
    match &args.out {
        Some(path) => {
            let mut out = create(path)?;
            write_experimental_csv(&data, &mut out)?;
            out.flush()?;
        }
        None => write_experimental_csv(&data, io::stdout().lock())?,
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::parse("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::new(EXIT_OTHER, e.to_string()))?;
    }
    match &cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Estimate(a) => cmd_estimate(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Synth(a) => cmd_synth(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}
