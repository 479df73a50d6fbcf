//! Random multipath scenarios and the Monte-Carlo estimation benchmark.
//!
//! A scenario is one line-of-sight path plus a random number of reflected
//! paths, all leaving the array in the x–y plane at an angle `β` from
//! broadside (the y axis for the default linear array). The truth channel is
//! always synthesised with the spherical model.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::estimation::{relative_error, Dictionary, GreedyEstimator, ObservationModel, Strategy};
use crate::geometry::{load_array_csv, make_ula, make_upa, AntennaArray, Vec3};
use crate::grids::log_space;
use crate::linalg::norm_sqr;
use crate::wavemodels::{synth_miso, ChannelVector, Path, WaveModel};

/// Transmit array of a scenario. Spacing defaults to half a wavelength.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ArraySpec {
    Ula {
        antennas: usize,
        #[serde(default)]
        spacing: Option<f64>,
    },
    Upa {
        nx: usize,
        ny: usize,
        #[serde(default)]
        spacing: Option<f64>,
    },
    /// CSV file with an `x,y,z` header, positions in meters.
    File { path: std::path::PathBuf },
}

impl ArraySpec {
    pub fn build(&self, lambda: f64) -> Result<AntennaArray> {
        match self {
            ArraySpec::Ula { antennas, spacing } => {
                make_ula(*antennas, spacing.unwrap_or(lambda / 2.0))
            }
            ArraySpec::Upa { nx, ny, spacing } => {
                make_upa(*nx, *ny, spacing.unwrap_or(lambda / 2.0))
            }
            ArraySpec::File { path } => Ok(load_array_csv(path)?.array),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub array: ArraySpec,
    /// Meters.
    pub wavelength: f64,
    /// Line-of-sight distance in meters.
    pub d_los: f64,
    /// Departure angles from broadside in radians, `[lo, hi]`.
    pub beta_range: [f64; 2],
    /// Inclusive bounds on the number of reflected paths.
    pub nlos_count: [usize; 2],
    /// Reflected path lengths are uniform in `[d_los, factor·d_los]`.
    pub max_path_length_factor: f64,
    pub rayleigh_sigma: f64,
    /// Scale each reflected gain by `d_los / length` on top of the Rayleigh draw.
    pub nlos_spreading_loss: bool,
    pub snr_db: f64,
    pub seed: u64,
    /// Dictionary directions, uniform in azimuth over `[0, π]`.
    pub directions: usize,
    /// Dictionary distances, log-spaced over `distance_range`.
    pub distances: usize,
    pub distance_range: [f64; 2],
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            array: ArraySpec::Ula {
                antennas: 256,
                spacing: None,
            },
            wavelength: 0.01,
            d_los: 20.0,
            beta_range: [-PI / 3.0, PI / 3.0],
            nlos_count: [0, 5],
            max_path_length_factor: 2.0,
            rayleigh_sigma: 0.3,
            nlos_spreading_loss: true,
            snr_db: 10.0,
            seed: 0,
            directions: 300,
            distances: 20,
            distance_range: [1.0, 1000.0],
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |x: f64| x > 0.0 && x.is_finite();
        if !positive(self.wavelength) {
            return invalid("wavelength must be positive");
        }
        if !positive(self.d_los) {
            return invalid("d_los must be positive");
        }
        let [blo, bhi] = self.beta_range;
        if !(blo.is_finite()
            && bhi.is_finite()
            && blo <= bhi
            && blo >= -PI / 2.0
            && bhi <= PI / 2.0)
        {
            return invalid("beta_range must satisfy -π/2 <= lo <= hi <= π/2");
        }
        if self.nlos_count[0] > self.nlos_count[1] {
            return invalid("nlos_count must satisfy lo <= hi");
        }
        if !(self.max_path_length_factor >= 1.0 && self.max_path_length_factor.is_finite()) {
            return invalid("max_path_length_factor must be >= 1");
        }
        if !positive(self.rayleigh_sigma) {
            return invalid("rayleigh_sigma must be positive");
        }
        if self.snr_db.is_nan() {
            return invalid("snr_db must be a number");
        }
        if self.directions < 2 || self.distances < 2 {
            return invalid("dictionaries need at least two directions and two distances");
        }
        let [dlo, dhi] = self.distance_range;
        if !(positive(dlo) && dhi > dlo && dhi.is_finite()) {
            return invalid("distance_range must satisfy 0 < lo < hi");
        }
        Ok(())
    }

    pub fn build_array(&self) -> Result<AntennaArray> {
        self.array.build(self.wavelength)
    }

    pub fn direction_grid(&self) -> Vec<Vec3> {
        Dictionary::azimuth_grid(self.directions)
    }

    pub fn distance_grid(&self) -> Result<Vec<f64>> {
        log_space(
            self.distance_range[0],
            self.distance_range[1],
            self.distances,
        )
    }

    pub fn dictionary(&self, array: &AntennaArray, model: WaveModel) -> Result<Dictionary> {
        let distances = if model.is_curved() {
            self.distance_grid()?
        } else {
            Vec::new()
        };
        Dictionary::new(
            model,
            array,
            self.direction_grid(),
            distances,
            self.wavelength,
        )
    }
}

/// Departure direction at angle `beta` from broadside (+y) towards +x.
pub fn departure_direction(beta: f64) -> Vec3 {
    Vec3::new(beta.sin(), beta.cos(), 0.0)
}

/// Independent generator for trial `trial` of a run seeded with `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

fn rayleigh<R: Rng + ?Sized>(sigma: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    sigma * (-2.0 * (-u).ln_1p()).sqrt()
}

/// LoS path first (`ρ = 1`, `φ = 0`, distance `d_los`), then the reflected paths.
pub fn generate_scenario<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> Result<Vec<Path>> {
    cfg.validate()?;
    let [blo, bhi] = cfg.beta_range;
    let beta = |rng: &mut R| {
        if blo < bhi {
            rng.random_range(blo..=bhi)
        } else {
            blo
        }
    };
    let mut paths = vec![Path::miso(
        1.0,
        0.0,
        departure_direction(beta(rng)),
        cfg.d_los,
    )?];
    let count = rng.random_range(cfg.nlos_count[0]..=cfg.nlos_count[1]);
    let far = cfg.d_los * cfg.max_path_length_factor;
    for _ in 0..count {
        let u = departure_direction(beta(rng));
        let length = if far > cfg.d_los {
            rng.random_range(cfg.d_los..=far)
        } else {
            cfg.d_los
        };
        let phi = rng.random_range(0.0..2.0 * PI);
        let mut rho = rayleigh(cfg.rayleigh_sigma, rng);
        if cfg.nlos_spreading_loss {
            rho *= cfg.d_los / length;
        }
        paths.push(Path::miso(rho, phi, u, length)?);
    }
    Ok(paths)
}

/// Per-sample noise variance giving `snr_db` for the signal `y`.
pub fn noise_variance(y: &[Complex64], snr_db: f64) -> Result<f64> {
    let energy = norm_sqr(y);
    if !(energy > 0.0) {
        return invalid("cannot set an SNR for a zero signal");
    }
    Ok(energy / (y.len() as f64 * 10f64.powf(snr_db / 10.0)))
}

/// Adds circular complex Gaussian noise at `snr_db` relative to `‖y_clean‖²`.
pub fn add_noise<R: Rng + ?Sized>(
    y_clean: &[Complex64],
    snr_db: f64,
    rng: &mut R,
) -> Result<Vec<Complex64>> {
    let sigma = (noise_variance(y_clean, snr_db)? / 2.0).sqrt();
    Ok(y_clean
        .iter()
        .map(|y| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            y + Complex64::new(re, im) * sigma
        })
        .collect())
}

/// One random draw: paths, truth channel and noisy observation (`X = I`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Realisation {
    pub trial: u64,
    pub paths: Vec<Path>,
    pub channel: ChannelVector,
    pub observation: Vec<Complex64>,
    pub noise_variance: f64,
}

pub fn realise(cfg: &ScenarioConfig, array: &AntennaArray, trial: u64) -> Result<Realisation> {
    let mut rng = trial_rng(cfg.seed, trial);
    let paths = generate_scenario(cfg, &mut rng)?;
    let channel = synth_miso(array, &paths, WaveModel::Swm, cfg.wavelength)?;
    let noise_variance = noise_variance(&channel.entries, cfg.snr_db)?;
    let observation = add_noise(&channel.entries, cfg.snr_db, &mut rng)?;
    Ok(Realisation {
        trial,
        paths,
        channel,
        observation,
        noise_variance,
    })
}

/// A strategy paired with the model of the atoms it places in `E`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Case {
    pub strategy: Strategy,
    pub model: WaveModel,
}

impl Case {
    pub fn new(strategy: Strategy, model: WaveModel) -> Result<Self> {
        match (strategy, model.is_curved()) {
            (Strategy::Pwm, false) | (Strategy::Joint | Strategy::Sequential, true) => {
                Ok(Self { strategy, model })
            }
            _ => invalid(format!("strategy {strategy} cannot use {model} atoms")),
        }
    }

    /// The plane-wave baseline and both curved strategies with both curved models.
    pub fn all() -> Vec<Case> {
        let mut cases = vec![Case {
            strategy: Strategy::Pwm,
            model: WaveModel::Pwm,
        }];
        for strategy in [Strategy::Joint, Strategy::Sequential] {
            for model in [WaveModel::ParWm, WaveModel::Swm] {
                cases.push(Case { strategy, model });
            }
        }
        cases
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub strategy: Strategy,
    pub model: WaveModel,
    pub p: usize,
    pub trials: usize,
    pub mean_relative_error: f64,
    /// Mean cumulative correlation count after `p` iterations.
    pub mean_correlations: f64,
    pub seed: u64,
}

/// Error and cumulative correlation count after each iteration.
type Trace = Vec<(f64, usize)>;

/// Averages over `trials` realisations; rows are ordered by case, then by `p`
/// as given. Output does not depend on the number of worker threads.
pub fn run_benchmark(
    cfg: &ScenarioConfig,
    p_values: &[usize],
    cases: &[Case],
    trials: usize,
) -> Result<Vec<BenchmarkRow>> {
    cfg.validate()?;
    if trials == 0 {
        return invalid("trials must be >= 1");
    }
    if p_values.is_empty() || cases.is_empty() {
        return invalid("need at least one p value and one case");
    }
    if p_values.contains(&0) {
        return invalid("p values must be >= 1");
    }
    let p_max = *p_values.iter().max().expect("non-empty");
    let array = cfg.build_array()?;
    let obs = ObservationModel::identity(array.len(), 0.0)?;

    let mut dictionaries: Vec<(WaveModel, Dictionary)> = Vec::new();
    for case in cases {
        Case::new(case.strategy, case.model)?;
        let mut needed = vec![case.model];
        if case.strategy == Strategy::Sequential {
            needed.push(WaveModel::Pwm);
        }
        for model in needed {
            if !dictionaries.iter().any(|(m, _)| *m == model) {
                dictionaries.push((model, cfg.dictionary(&array, model)?));
            }
        }
    }
    let find = |model: WaveModel| {
        dictionaries
            .iter()
            .find(|(m, _)| *m == model)
            .map(|(_, d)| d)
    };
    let estimators = cases
        .iter()
        .map(|c| {
            let (pwm, curved) = if c.model.is_curved() {
                (find(WaveModel::Pwm), find(c.model))
            } else {
                (find(WaveModel::Pwm), None)
            };
            GreedyEstimator::new(c.strategy, &obs, pwm, curved)
        })
        .collect::<Result<Vec<_>>>()?;

    let traces: Vec<Vec<Trace>> = (0..trials as u64)
        .into_par_iter()
        .map(|trial| {
            let r = realise(cfg, &array, trial)?;
            estimators
                .iter()
                .map(|est| {
                    let mut trace = Vec::with_capacity(p_max);
                    let mut failure = None;
                    est.run(&r.observation, p_max, |it| {
                        match relative_error(&r.channel.entries, &it.estimate()) {
                            Ok(e) => trace.push((e, it.correlations)),
                            Err(e) => failure = Some(e),
                        }
                    })?;
                    match failure {
                        Some(e) => Err(e),
                        None => Ok(trace),
                    }
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(cases.len() * p_values.len());
    for (ci, case) in cases.iter().enumerate() {
        for &p in p_values {
            let (mut err, mut corr) = (0.0, 0.0);
            for trial in &traces {
                let (e, c) = trial[ci][p - 1];
                err += e;
                corr += c as f64;
            }
            rows.push(BenchmarkRow {
                strategy: case.strategy,
                model: case.model,
                p,
                trials,
                mean_relative_error: err / trials as f64,
                mean_correlations: corr / trials as f64,
                seed: cfg.seed,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ScenarioConfig {
        ScenarioConfig {
            array: ArraySpec::Ula {
                antennas: 16,
                spacing: None,
            },
            directions: 40,
            distances: 6,
            seed: 7,
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn default_config_is_valid() {
        ScenarioConfig::default().validate().unwrap();
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bad = [
            ScenarioConfig {
                d_los: 0.0,
                ..small()
            },
            ScenarioConfig {
                nlos_count: [3, 1],
                ..small()
            },
            ScenarioConfig {
                rayleigh_sigma: 0.0,
                ..small()
            },
            ScenarioConfig {
                max_path_length_factor: 0.5,
                ..small()
            },
            ScenarioConfig {
                distance_range: [10.0, 1.0],
                ..small()
            },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn los_only_scenario() {
        let cfg = ScenarioConfig {
            nlos_count: [0, 0],
            ..small()
        };
        let paths = generate_scenario(&cfg, &mut trial_rng(1, 0)).unwrap();
        assert_eq!(paths.len(), 1);
        assert_eq!(
            (paths[0].rho, paths[0].phi, paths[0].distance),
            (1.0, 0.0, cfg.d_los)
        );
    }

    #[test]
    fn reflected_paths_respect_bounds() {
        let cfg = small();
        let mut rng = trial_rng(3, 0);
        for _ in 0..200 {
            let paths = generate_scenario(&cfg, &mut rng).unwrap();
            assert!((1..=6).contains(&paths.len()));
            for p in &paths {
                assert!(p.distance >= cfg.d_los && p.distance <= 2.0 * cfg.d_los);
                let beta = p.u_t.x.atan2(p.u_t.y);
                assert!(beta.abs() <= PI / 3.0 + 1e-12);
                assert!((0.0..2.0 * PI).contains(&p.phi));
            }
        }
    }

    #[test]
    fn same_seed_same_paths() {
        let cfg = small();
        let a = generate_scenario(&cfg, &mut trial_rng(11, 4)).unwrap();
        let b = generate_scenario(&cfg, &mut trial_rng(11, 4)).unwrap();
        let c = generate_scenario(&cfg, &mut trial_rng(11, 5)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn very_high_snr_leaves_signal_intact() {
        let y: Vec<_> = (0..32)
            .map(|i| Complex64::from_polar(1.0, i as f64))
            .collect();
        let noisy = add_noise(&y, 300.0, &mut trial_rng(0, 0)).unwrap();
        let diff: f64 = y.iter().zip(&noisy).map(|(a, b)| (a - b).norm_sqr()).sum();
        assert!((diff / norm_sqr(&y)).sqrt() < 1e-10);
        assert!(add_noise(&[Complex64::new(0.0, 0.0)], 10.0, &mut trial_rng(0, 0)).is_err());
    }

    #[test]
    fn case_pairs_are_checked() {
        assert!(Case::new(Strategy::Pwm, WaveModel::Swm).is_err());
        assert!(Case::new(Strategy::Joint, WaveModel::Pwm).is_err());
        assert_eq!(Case::all().len(), 5);
    }

    #[test]
    fn benchmark_rows_are_ordered_and_counted() {
        let cfg = small();
        let rows = run_benchmark(&cfg, &[1, 3], &Case::all(), 3).unwrap();
        assert_eq!(rows.len(), 10);
        assert_eq!((rows[0].strategy, rows[0].p), (Strategy::Pwm, 1));
        assert_eq!(rows[1].p, 3);
        assert_eq!(rows[0].mean_correlations, 40.0);
        assert_eq!(rows[1].mean_correlations, 120.0);
        assert_eq!(rows[3].mean_correlations, 3.0 * 240.0);
        assert_eq!(rows[7].mean_correlations, 3.0 * 46.0);
        assert!(rows.iter().all(|r| r.trials == 3 && r.seed == 7));
    }
}
