use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use wavefront::estimation::Strategy;
use wavefront::scenario::ArraySpec;
use wavefront::wavemodels::WaveModel;

#[derive(Debug, Parser)]
#[command(
    name = "wavefront",
    version,
    about = "Wavefront model validity sweeps and channel-estimation benchmarks"
)]
pub struct Cli {
    /// Worker threads (default: one per core). Results do not depend on it.
    #[arg(long, global = true, env = "WAVEFRONT_THREADS", value_parser = clap::value_parser!(usize))]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// rMAE of the plane and parabolic models against a spherical-wave probe, over distance.
    ValiditySweep(SweepArgs),
    /// Monte-Carlo comparison of the greedy estimation strategies.
    Bench(BenchArgs),
    /// Run one estimation on one random scenario and print the result as JSON.
    Estimate(EstimateArgs),
    /// Aperture radius and the Fraunhofer and Fresnel distances of an array.
    Boundaries(BoundaryArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ArrayKind {
    Ula,
    Upa,
    File,
}

#[derive(Debug, Args)]
pub struct ArrayArgs {
    #[arg(long, value_enum)]
    pub array: ArrayKind,
    /// Antennas of a linear array.
    #[arg(long, required_if_eq("array", "ula"))]
    pub n: Option<usize>,
    /// Columns of a planar array.
    #[arg(long, required_if_eq("array", "upa"))]
    pub nx: Option<usize>,
    /// Rows of a planar array.
    #[arg(long, required_if_eq("array", "upa"))]
    pub ny: Option<usize>,
    /// CSV file with an `x,y,z` header (meters).
    #[arg(long, required_if_eq("array", "file"))]
    pub positions: Option<PathBuf>,
    /// Antenna spacing in meters (default: half a wavelength).
    #[arg(long, value_parser = positive_f64, allow_negative_numbers = true)]
    pub spacing: Option<f64>,
    /// Wavelength in meters.
    #[arg(long, value_parser = positive_f64, allow_negative_numbers = true)]
    pub lambda: f64,
}

impl ArrayArgs {
    pub fn spec(&self) -> ArraySpec {
        match self.array {
            ArrayKind::Ula => ArraySpec::Ula {
                antennas: self.n.expect("required by clap"),
                spacing: self.spacing,
            },
            ArrayKind::Upa => ArraySpec::Upa {
                nx: self.nx.expect("required by clap"),
                ny: self.ny.expect("required by clap"),
                spacing: self.spacing,
            },
            ArrayKind::File => ArraySpec::File {
                path: self.positions.clone().expect("required by clap"),
            },
        }
    }
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub array: ArrayArgs,
    /// Approximate models to project onto.
    #[arg(long, value_delimiter = ',', default_value = "pwm,parwm", value_parser = parse_model)]
    pub models: Vec<WaveModel>,
    /// Number of log-spaced distances.
    #[arg(long, default_value_t = wavefront::validity::DEFAULT_SWEEP_POINTS)]
    pub points: usize,
    /// Smallest distance in wavelengths.
    #[arg(long, default_value_t = 1.0, value_parser = positive_f64)]
    pub min_wavelengths: f64,
    /// Largest distance in wavelengths.
    #[arg(long, default_value_t = 1e5, value_parser = positive_f64)]
    pub max_wavelengths: f64,
    /// Probe direction `x,y,z` (default: broadside).
    #[arg(long, value_delimiter = ',', num_args = 3)]
    pub probe: Option<Vec<f64>>,
    #[arg(long, short, default_value = "validity_sweep.csv")]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// ULA-256 at 30 GHz, LoS at 20 m, 300 × 20 dictionaries, 10 dB.
    #[value(name = "icassp-fig2", alias = "ula256-near-field")]
    IcasspFig2,
}

#[derive(Debug, Args)]
#[group(skip)]
pub struct ScenarioArgs {
    #[arg(
        long,
        value_enum,
        conflicts_with = "config",
        required_unless_present = "config"
    )]
    pub preset: Option<Preset>,
    /// TOML scenario file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: u64,
    /// Override the configured SNR.
    #[arg(long, allow_negative_numbers = true)]
    pub snr_db: Option<f64>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    /// Path counts to report, e.g. `1-10` or `1,3,5`.
    #[arg(long, default_value = "1-10", value_parser = parse_p_values)]
    pub p: PValues,
    #[arg(long, short, default_value = "bench.csv")]
    pub output: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PValues(pub Vec<usize>);

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long, value_parser = parse_model)]
    pub model: WaveModel,
    #[arg(long, value_parser = parse_strategy)]
    pub strategy: Strategy,
    #[arg(long = "paths")]
    pub paths: usize,
    /// Which realisation of the seeded scenario to use.
    #[arg(long, default_value_t = 0)]
    pub trial: u64,
}

#[derive(Debug, Args)]
pub struct BoundaryArgs {
    #[command(flatten)]
    pub array: ArrayArgs,
}

fn positive_f64(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        Ok(v) => Err(format!("must be positive, got {v}")),
        Err(e) => Err(e.to_string()),
    }
}

fn parse_model(s: &str) -> Result<WaveModel, String> {
    s.parse()
        .map_err(|e: wavefront::error::Error| e.to_string())
}

fn parse_strategy(s: &str) -> Result<Strategy, String> {
    s.parse()
        .map_err(|e: wavefront::error::Error| e.to_string())
}

fn parse_p_values(s: &str) -> Result<PValues, String> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim) {
        let bad = || format!("invalid path count list `{s}`");
        if let Some((lo, hi)) = part.split_once('-') {
            let (lo, hi): (usize, usize) = (
                lo.parse().map_err(|_| bad())?,
                hi.parse().map_err(|_| bad())?,
            );
            if lo > hi {
                return Err(bad());
            }
            out.extend(lo..=hi);
        } else {
            out.push(part.parse().map_err(|_| bad())?);
        }
    }
    if out.contains(&0) {
        return Err("path counts must be >= 1".into());
    }
    Ok(PValues(out))
}
