use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use anyhow::Context;
use serde::Serialize;
use serde_json::json;
use wavefront::estimation::{
    relative_error, Dictionary, GreedyEstimator, ObservationModel, Strategy,
};
use wavefront::geometry::{AntennaArray, Vec3};
use wavefront::grids::log_space;
use wavefront::scenario::{realise, run_benchmark, ArraySpec, BenchmarkRow, Case, ScenarioConfig};
use wavefront::validity::{
    broadside_direction, fraunhofer_distance, fresnel_distance, rmae_curve, SearchSettings,
    SweepConfig, SweepRow,
};
use wavefront::wavemodels::WaveModel;

use crate::args::{
    ArrayArgs, BenchArgs, BoundaryArgs, EstimateArgs, Preset, ScenarioArgs, SweepArgs,
};
use crate::manifest::RunManifest;
use crate::Failure;

type CmdResult = Result<(), Failure>;

fn usage(msg: impl std::fmt::Display) -> Failure {
    Failure::Usage(msg.to_string())
}

fn build_array(args: &ArrayArgs) -> Result<AntennaArray, Failure> {
    args.spec().build(args.lambda).map_err(usage)
}

#[derive(Serialize)]
struct SweepRecord<'a> {
    array: ArraySpec,
    wavelength: f64,
    models: &'a [WaveModel],
    points: usize,
    min_wavelengths: f64,
    max_wavelengths: f64,
    probe: Vec3,
    search: SearchSettings,
}

pub fn validity_sweep(args: &SweepArgs, argv: &[String]) -> CmdResult {
    let start = Instant::now();
    let array = build_array(&args.array)?;
    let lambda = args.array.lambda;
    if args.max_wavelengths <= args.min_wavelengths {
        return Err(usage("--max-wavelengths must exceed --min-wavelengths"));
    }
    let probe = match &args.probe {
        Some(v) => Vec3::new(v[0], v[1], v[2])
            .normalized()
            .ok_or_else(|| usage("--probe must be a non-zero vector"))?,
        None => broadside_direction(&array),
    };
    let distances = log_space(
        args.min_wavelengths * lambda,
        args.max_wavelengths * lambda,
        args.points,
    )
    .map_err(usage)?;
    let cfg = SweepConfig {
        array,
        models: args.models.clone(),
        wavelength: lambda,
        distances,
        probe_direction: probe,
        search: SearchSettings::default(),
    };
    cfg.validate().map_err(usage)?;
    let rows = rmae_curve(&cfg).context("sweep failed")?;
    write_sweep_csv(&args.output, &rows, lambda)?;

    let record = SweepRecord {
        array: args.array.spec(),
        wavelength: lambda,
        models: &args.models,
        points: args.points,
        min_wavelengths: args.min_wavelengths,
        max_wavelengths: args.max_wavelengths,
        probe,
        search: cfg.search,
    };
    let manifest = RunManifest::new(argv, &record, None, &[&args.output], start.elapsed())?;
    manifest.write_for(&args.output)?;
    eprintln!("wrote {} ({} rows)", args.output.display(), rows.len());
    Ok(())
}

fn write_sweep_csv(path: &Path, rows: &[SweepRow], lambda: f64) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path)
        .with_context(|| format!("cannot create {}", path.display()))?;
    w.write_record(["distance_m", "distance_over_lambda", "model", "rmae"])?;
    for r in rows {
        w.write_record([
            format!("{:.16e}", r.distance),
            format!("{:.16e}", r.distance / lambda),
            r.model.to_string(),
            format!("{:.16e}", r.rmae),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn load_scenario(args: &ScenarioArgs) -> Result<ScenarioConfig, Failure> {
    let mut cfg = match (&args.preset, &args.config) {
        (Some(Preset::IcasspFig2), _) => ScenarioConfig::default(),
        (None, Some(path)) => {
            let text = fs::read_to_string(path)
                .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
            toml::from_str(&text)
                .map_err(|e| usage(format!("invalid config {}: {e}", path.display())))?
        }
        (None, None) => return Err(usage("one of --preset or --config is required")),
    };
    cfg.seed = args.seed;
    if let Some(snr) = args.snr_db {
        cfg.snr_db = snr;
    }
    cfg.validate().map_err(usage)?;
    Ok(cfg)
}

#[derive(Serialize)]
struct BenchRecord<'a> {
    scenario: &'a ScenarioConfig,
    trials: usize,
    p: &'a [usize],
    cases: &'a [Case],
}

pub fn bench(args: &BenchArgs, argv: &[String]) -> CmdResult {
    let start = Instant::now();
    let cfg = load_scenario(&args.scenario)?;
    if args.trials == 0 {
        return Err(usage("--trials must be >= 1"));
    }
    let cases = Case::all();
    let rows = run_benchmark(&cfg, &args.p.0, &cases, args.trials).context("benchmark failed")?;
    write_bench_csv(&args.output, &rows)?;
    let record = BenchRecord {
        scenario: &cfg,
        trials: args.trials,
        p: &args.p.0,
        cases: &cases,
    };
    let manifest = RunManifest::new(
        argv,
        &record,
        Some(cfg.seed),
        &[&args.output],
        start.elapsed(),
    )?;
    manifest.write_for(&args.output)?;
    eprintln!("wrote {} ({} rows)", args.output.display(), rows.len());
    Ok(())
}

fn write_bench_csv(path: &Path, rows: &[BenchmarkRow]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path)
        .with_context(|| format!("cannot create {}", path.display()))?;
    w.write_record([
        "strategy",
        "model",
        "p",
        "trials",
        "mean_rel_err",
        "mean_correlations",
        "seed",
    ])?;
    for r in rows {
        w.write_record([
            r.strategy.to_string(),
            r.model.to_string(),
            r.p.to_string(),
            r.trials.to_string(),
            r.mean_relative_error.to_string(),
            r.mean_correlations.to_string(),
            r.seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn estimate(args: &EstimateArgs) -> CmdResult {
    let cfg = load_scenario(&args.scenario)?;
    let case = Case::new(args.strategy, args.model).map_err(usage)?;
    let array = cfg.build_array().map_err(usage)?;
    if args.paths == 0 || args.paths > array.len() {
        return Err(usage(format!(
            "--paths must be between 1 and {}",
            array.len()
        )));
    }
    let realisation = realise(&cfg, &array, args.trial).context("scenario generation failed")?;
    let pwm = match case.strategy {
        Strategy::Pwm | Strategy::Sequential => Some(cfg.dictionary(&array, WaveModel::Pwm)?),
        Strategy::Joint => None,
    };
    let curved: Option<Dictionary> = if case.model.is_curved() {
        Some(cfg.dictionary(&array, case.model)?)
    } else {
        None
    };
    let obs = ObservationModel::identity(array.len(), realisation.noise_variance)?;
    let result = GreedyEstimator::new(case.strategy, &obs, pwm.as_ref(), curved.as_ref())?
        .estimate(&realisation.observation, args.paths)?;
    let err = relative_error(&realisation.channel.entries, &result.h_hat.entries)?;
    let out = json!({
        "strategy": result.strategy,
        "model": result.model,
        "seed": cfg.seed,
        "trial": args.trial,
        "true_paths": realisation.paths,
        "selected": result.selected,
        "alpha": result.alpha,
        "relative_error": err,
        "residual_norms": result.residual_norms,
        "correlation_count": result.correlation_count,
        "skipped": result.skipped,
    });
    let mut stdout = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut stdout, &out).map_err(anyhow::Error::from)?;
    writeln!(stdout)?;
    Ok(())
}

fn trim(x: f64) -> String {
    let s = format!("{x:.6}");
    let s = s.trim_end_matches('0');
    s.trim_end_matches('.').to_owned()
}

pub fn boundaries(args: &BoundaryArgs) -> CmdResult {
    let array = build_array(&args.array)?;
    let lambda = args.array.lambda;
    let r = array.aperture_radius();
    let far = fraunhofer_distance(r, lambda).map_err(usage)?;
    let near = fresnel_distance(r, lambda).map_err(usage)?;
    let mut out = std::io::stdout().lock();
    writeln!(
        out,
        "array       {} ({} antennas, wavelength {} m)",
        array.label(),
        array.len(),
        trim(lambda)
    )?;
    writeln!(
        out,
        "{:<11} {:>16} {:>16}",
        "quantity", "meters", "wavelengths"
    )?;
    for (name, v) in [("radius", r), ("fraunhofer", far), ("fresnel", near)] {
        writeln!(out, "{:<11} {:>16} {:>16}", name, trim(v), trim(v / lambda))?;
    }
    Ok(())
}
