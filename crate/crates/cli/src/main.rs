//! `snn-nlm`: denoise images, synthesize noise, evaluate the toy model and
//! run parameter sweeps.
//!
//! Exit codes: 0 success, 1 internal error, 2 usage or input error.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use snn_nlm::bench::{self, BenchConfig, Preset};
use snn_nlm::io::{load_image, save_image};
use snn_nlm::noise::{add_white_noise, colored_noise_pipeline, CfaPattern, NoiseDomain, NoiseSpec, RgbSigma};
use snn_nlm::toymodel::{self, PredictionError, ToyScenario};
use snn_nlm::{denoise_image, Error, QualityReport, Strategy};

#[derive(Parser, Debug)]
#[command(name = "snn-nlm", version, about = "Non-Local Means with NN and SNN neighbour selection")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "SNN_NLM_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Denoise a PNG / PGM / PPM image.
    Denoise(DenoiseArgs),
    /// Add white or Bayer-domain (colored) Gaussian noise to an image.
    AddNoise(AddNoiseArgs),
    /// Bias / variance of the 1x1-patch toy model.
    Toy(ToyArgs),
    /// Sweep offsets, neighbour counts and noise levels over a directory of images.
    Bench(BenchArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum PresetArg {
    /// Patch, window and h from the standard NLM table for the noise level.
    Table,
    /// 3x3 patches, 21x21 window, h = 0.75 sigma.
    Default,
}

impl From<PresetArg> for Preset {
    fn from(p: PresetArg) -> Self {
        match p {
            PresetArg::Table => Preset::ReferenceTable,
            PresetArg::Default => Preset::Default,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum StrategyArg {
    Nn,
    Snn,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum DomainArg {
    White,
    Bayer,
}

impl From<DomainArg> for NoiseDomain {
    fn from(d: DomainArg) -> Self {
        match d {
            DomainArg::White => NoiseDomain::White,
            DomainArg::Bayer => NoiseDomain::Bayer,
        }
    }
}

fn parse_pattern(s: &str) -> std::result::Result<CfaPattern, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Args, Debug)]
struct DenoiseArgs {
    #[arg(long = "in", value_name = "PATH")]
    input: PathBuf,
    #[arg(long = "out", value_name = "PATH")]
    output: PathBuf,
    /// Noise level on the 0-255 scale.
    #[arg(long, required_unless_present = "sigma_sidecar", conflicts_with = "sigma_sidecar")]
    sigma: Option<f64>,
    /// Sidecar written by `add-noise --domain bayer`; its channel mean is used.
    #[arg(long, value_name = "PATH")]
    sigma_sidecar: Option<PathBuf>,
    #[arg(long, default_value_t = 16)]
    neighbors: usize,
    #[arg(long, default_value_t = 0.8)]
    offset: f64,
    /// Selection rule; defaults to nn for offset 0, snn otherwise.
    #[arg(long, value_enum)]
    strategy: Option<StrategyArg>,
    #[arg(long, value_enum, default_value_t = PresetArg::Table)]
    preset: PresetArg,
    /// Patch side, overriding the preset.
    #[arg(long)]
    patch: Option<usize>,
    /// Search window side, overriding the preset.
    #[arg(long)]
    search: Option<usize>,
    /// Filtering parameter on the 0-255 scale, overriding the preset.
    #[arg(long)]
    h: Option<f64>,
    /// Clean image; prints a psnr/ssim record against it.
    #[arg(long, value_name = "PATH")]
    reference: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AddNoiseArgs {
    #[arg(long = "in", value_name = "PATH")]
    input: PathBuf,
    #[arg(long = "out", value_name = "PATH")]
    output: PathBuf,
    /// Noise level on the 0-255 scale.
    #[arg(long)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = DomainArg::White)]
    domain: DomainArg,
    #[arg(long, value_parser = parse_pattern, default_value = "rggb")]
    pattern: CfaPattern,
    /// Clamp the noisy mosaic to [0, 1] before demosaicing.
    #[arg(long)]
    clip_cfa: bool,
    /// Where to write the per-channel noise levels (bayer domain);
    /// defaults to the output path with `.sigma` appended.
    #[arg(long, value_name = "PATH")]
    sidecar: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ToyArgs {
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    #[arg(long, default_value_t = 0.2)]
    sigma: f64,
    /// Replicas available, N.
    #[arg(long, default_value_t = 100)]
    n_total: usize,
    /// Replicas averaged, N_n.
    #[arg(long, default_value_t = 16)]
    neighbors: usize,
    /// SNN offset in units of sigma.
    #[arg(long, default_value_t = 1.0)]
    offset: f64,
    /// Write per-reference moments (mu_r, E_nn, Std_nn, E_snn, Std_snn) as CSV.
    #[arg(long, value_name = "PATH")]
    curve: Option<PathBuf>,
    #[arg(long, default_value_t = 201)]
    curve_points: usize,
    /// Curve covers mu +- span*sigma.
    #[arg(long, default_value_t = 5.0)]
    curve_span: f64,
    /// Also run the Monte-Carlo oracle with this many trials.
    #[arg(long, value_name = "TRIALS")]
    oracle: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Directory of clean PNG / PGM / PPM images.
    #[arg(long)]
    dir: PathBuf,
    /// CSV destination (default: stdout).
    #[arg(long = "out", value_name = "PATH")]
    output: Option<PathBuf>,
    /// Noise levels on the 0-255 scale.
    #[arg(long, value_delimiter = ',', default_value = "5,10,20,30,40")]
    sigmas: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0,0.8,1")]
    offsets: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "4,8,16,32")]
    neighbors: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = DomainArg::White)]
    domain: DomainArg,
    #[arg(long, value_parser = parse_pattern, default_value = "rggb")]
    pattern: CfaPattern,
    #[arg(long, value_enum, default_value_t = PresetArg::Table)]
    preset: PresetArg,
}

/// An error carrying its exit code.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

/// Errors from the library are about the inputs (exit 2), except failures
/// to write CSV; anything else is internal (exit 1).
impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        let input = error
            .chain()
            .any(|e| e.downcast_ref::<Error>().is_some_and(|e| !matches!(e, Error::Csv(_))));
        Failure {
            code: if input { 2 } else { 1 },
            error,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        // Downstream closed stdout (e.g. `| head`): not our failure.
        Err(f) if is_broken_pipe(&f.error) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn is_broken_pipe(e: &anyhow::Error) -> bool {
    e.chain()
        .filter_map(|c| c.downcast_ref::<std::io::Error>())
        .any(|io| io.kind() == std::io::ErrorKind::BrokenPipe)
}

fn run(cli: Cli) -> std::result::Result<(), Failure> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure {
                code: 2,
                error: anyhow::anyhow!("--threads must be >= 1"),
            });
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure {
                code: 1,
                error: e.into(),
            })?;
    }
    let out = match cli.command {
        Command::Denoise(a) => cmd_denoise(&a),
        Command::AddNoise(a) => cmd_add_noise(&a),
        Command::Toy(a) => cmd_toy(&a),
        Command::Bench(a) => cmd_bench(&a),
    };
    out.map_err(Failure::from)
}

fn cmd_denoise(a: &DenoiseArgs) -> Result<()> {
    let sigma = match (a.sigma, &a.sigma_sidecar) {
        (Some(s), _) => s,
        (None, Some(p)) => read_sidecar(p)?.effective(),
        (None, None) => unreachable!("clap requires one of --sigma / --sigma-sidecar"),
    };
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::InvalidParams(format!("sigma {sigma} must be >= 0")).into());
    }
    let img = load_image(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let reference = match &a.reference {
        Some(p) => Some(load_image(p).with_context(|| format!("reading {}", p.display()))?),
        None => None,
    };
    let mut params = bench::params_for(a.preset.into(), sigma, img.channels(), a.neighbors, a.offset);
    if let Some(p) = a.patch {
        params.patch_side = p;
    }
    if let Some(s) = a.search {
        params.search_side = s;
    }
    if let Some(h) = a.h {
        params.h = h / 255.0;
    }
    params.validate()?;
    let strategy = match a.strategy {
        Some(StrategyArg::Nn) => Strategy::Nn,
        Some(StrategyArg::Snn) => Strategy::Snn,
        None => bench::strategy_for(a.offset),
    };
    let out = denoise_image(&img, &params, strategy)?;
    if let Some(r) = &reference {
        let report = QualityReport::compare(&out, r)?;
        println!("{report}");
    }
    save_image(&out, &a.output).with_context(|| format!("writing {}", a.output.display()))?;
    Ok(())
}

fn read_sidecar(path: &Path) -> Result<RgbSigma> {
    let text = std::fs::read_to_string(path)
        .map_err(Error::from)
        .with_context(|| format!("reading {}", path.display()))?;
    Ok(text
        .parse::<RgbSigma>()
        .with_context(|| format!("parsing {}", path.display()))?)
}

fn cmd_add_noise(a: &AddNoiseArgs) -> Result<()> {
    let img = load_image(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let spec = NoiseSpec {
        sigma: a.sigma,
        seed: a.seed,
        domain: a.domain.into(),
        clip_cfa: a.clip_cfa,
    };
    match spec.domain {
        NoiseDomain::White => {
            let noisy = add_white_noise(&img, &spec)?;
            save_image(&noisy, &a.output).with_context(|| format!("writing {}", a.output.display()))?;
        }
        NoiseDomain::Bayer => {
            let (noisy, sigma) = colored_noise_pipeline(&img, &spec, a.pattern)?;
            let sidecar = a.sidecar.clone().unwrap_or_else(|| {
                let mut p = a.output.clone().into_os_string();
                p.push(".sigma");
                PathBuf::from(p)
            });
            save_image(&noisy, &a.output).with_context(|| format!("writing {}", a.output.display()))?;
            std::fs::write(&sidecar, sigma.to_string()).with_context(|| format!("writing {}", sidecar.display()))?;
            println!(
                "sigma_r={} sigma_g={} sigma_b={} sigma_eff={} sidecar={}",
                sigma.r,
                sigma.g,
                sigma.b,
                sigma.effective(),
                sidecar.display()
            );
        }
    }
    Ok(())
}

fn error_line(out: &mut impl Write, label: &str, e: &PredictionError) -> io::Result<()> {
    writeln!(
        out,
        "{label} bias_sq={:.6} variance={:.6} mse={:.6}",
        e.bias_sq, e.variance, e.mse
    )
}

fn cmd_toy(a: &ToyArgs) -> Result<()> {
    let scn = ToyScenario {
        mu: a.mu,
        sigma: a.sigma,
        n_total: a.n_total,
        n_neighbors: a.neighbors,
        offset: a.offset,
    };
    scn.validate()?;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    writeln!(
        out,
        "# mu={} sigma={} n_total={} n_neighbors={} offset={}",
        a.mu, a.sigma, a.n_total, a.neighbors, a.offset
    )?;
    writeln!(out, "# normalized = raw / (n_neighbors / n_total)")?;
    for strategy in [Strategy::Nn, Strategy::Snn] {
        let raw = toymodel::prediction_error(&scn, strategy)?;
        error_line(&mut out, &format!("{strategy} analytic normalized"), &raw.per_selected_fraction(&scn))?;
        error_line(&mut out, &format!("{strategy} analytic raw"), &raw)?;
        if let Some(trials) = a.oracle {
            let mc = toymodel::mc_oracle(&scn, strategy, trials, a.seed)?;
            error_line(&mut out, &format!("{strategy} oracle normalized"), &mc.per_selected_fraction(&scn))?;
            error_line(&mut out, &format!("{strategy} oracle raw"), &mc)?;
        }
    }
    if let Some(path) = &a.curve {
        let rows = toymodel::curve(&scn, a.curve_span, a.curve_points)?;
        let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
        w.write_record(["mu_r", "E_nn", "Std_nn", "E_snn", "Std_snn"])?;
        for r in rows {
            w.write_record([r.mu_r, r.nn.expectation, r.nn.std_dev(), r.snn.expectation, r.snn.std_dev()].map(|v| v.to_string()))?;
        }
        w.flush()?;
    }
    Ok(())
}

fn cmd_bench(a: &BenchArgs) -> Result<()> {
    let images = bench::load_dir(&a.dir).with_context(|| format!("reading {}", a.dir.display()))?;
    if images.is_empty() {
        return Err(Error::InvalidParams(format!("no png/pgm/ppm images in {}", a.dir.display())).into());
    }
    let cfg = BenchConfig {
        sigmas: a.sigmas.clone(),
        offsets: a.offsets.clone(),
        n_neighbors: a.neighbors.clone(),
        seed: a.seed,
        domain: a.domain.into(),
        pattern: a.pattern,
        preset: a.preset.into(),
    };
    let rows = bench::run(&images, &cfg)?;
    match &a.output {
        Some(p) => {
            let f = File::create(p).with_context(|| format!("writing {}", p.display()))?;
            bench::write_csv(&rows, BufWriter::new(f))?;
        }
        None => bench::write_csv(&rows, io::stdout().lock())?,
    }
    Ok(())
}
