use num_complex::Complex64;
use wavefront::estimation::Strategy;
use wavefront::scenario::{
    add_noise, generate_scenario, noise_variance, realise, run_benchmark, trial_rng, ArraySpec,
    Case, ScenarioConfig,
};
use wavefront::wavemodels::WaveModel;

fn signal() -> Vec<Complex64> {
    (0..64)
        .map(|i| Complex64::from_polar(1.0 + 0.01 * i as f64, 0.3 * i as f64))
        .collect()
}

#[test]
fn empirical_snr_matches_target() {
    let y = signal();
    let energy: f64 = y.iter().map(|z| z.norm_sqr()).sum();
    let mut rng = trial_rng(8, 0);
    let mut noise = 0.0;
    let draws = 10_000;
    for _ in 0..draws {
        let noisy = add_noise(&y, 10.0, &mut rng).unwrap();
        noise += noisy
            .iter()
            .zip(&y)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>();
    }
    let snr = 10.0 * (energy / (noise / draws as f64)).log10();
    assert!((snr - 10.0).abs() < 0.2, "{snr}");
}

#[test]
fn noise_components_are_gaussian() {
    let y = vec![Complex64::new(1.0, 0.0); 1000];
    let sigma2 = noise_variance(&y, 10.0).unwrap();
    let mut rng = trial_rng(21, 3);
    let (mut re, mut im) = (Vec::new(), Vec::new());
    for _ in 0..100 {
        for (n, c) in add_noise(&y, 10.0, &mut rng).unwrap().iter().zip(&y) {
            re.push((n - c).re);
            im.push((n - c).im);
        }
    }
    for part in [re, im] {
        let n = part.len() as f64;
        let mean = part.iter().sum::<f64>() / n;
        let m2 = part.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let m4 = part.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
        assert!((m2 / (sigma2 / 2.0) - 1.0).abs() < 0.02);
        assert!(
            (m4 / (m2 * m2) - 3.0).abs() < 0.1,
            "kurtosis {}",
            m4 / (m2 * m2)
        );
    }
}

#[test]
fn rayleigh_gains_have_the_right_scale() {
    let cfg = ScenarioConfig {
        nlos_count: [5, 5],
        nlos_spreading_loss: false,
        ..ScenarioConfig::default()
    };
    let mut rng = trial_rng(4, 0);
    let mut sum_sq = 0.0;
    let mut count = 0;
    for _ in 0..4000 {
        for p in generate_scenario(&cfg, &mut rng).unwrap().iter().skip(1) {
            sum_sq += p.rho * p.rho;
            count += 1;
        }
    }
    // E[ρ²] = 2σ² for a Rayleigh variable.
    let ratio = sum_sq / count as f64 / (2.0 * 0.09);
    assert!((ratio - 1.0).abs() < 0.03, "{ratio}");
}

#[test]
fn realisations_are_reproducible() {
    let cfg = ScenarioConfig {
        array: ArraySpec::Ula {
            antennas: 16,
            spacing: None,
        },
        seed: 99,
        ..ScenarioConfig::default()
    };
    let array = cfg.build_array().unwrap();
    assert_eq!(
        realise(&cfg, &array, 3).unwrap(),
        realise(&cfg, &array, 3).unwrap()
    );
    assert_ne!(
        realise(&cfg, &array, 3).unwrap(),
        realise(&cfg, &array, 4).unwrap()
    );
}

#[test]
fn noiseless_single_on_grid_path_is_recovered() {
    let cfg = ScenarioConfig {
        array: ArraySpec::Ula {
            antennas: 64,
            spacing: None,
        },
        beta_range: [0.0, 0.0],
        nlos_count: [0, 0],
        snr_db: 300.0,
        directions: 301,
        distances: 3,
        distance_range: [1.0, 400.0],
        seed: 1,
        ..ScenarioConfig::default()
    };
    let case = Case::new(Strategy::Joint, WaveModel::Swm).unwrap();
    let rows = run_benchmark(&cfg, &[1], &[case], 1).unwrap();
    assert!(rows[0].mean_relative_error < 1e-6, "{:?}", rows[0]);
}

#[test]
fn benchmark_is_independent_of_thread_count() {
    let cfg = ScenarioConfig {
        array: ArraySpec::Ula {
            antennas: 32,
            spacing: None,
        },
        directions: 80,
        distances: 8,
        seed: 42,
        ..ScenarioConfig::default()
    };
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_benchmark(&cfg, &[1, 2, 5], &Case::all(), 12).unwrap())
    };
    let one = run(1);
    let four = run(4);
    assert_eq!(one.len(), 15);
    for (a, b) in one.iter().zip(&four) {
        assert_eq!(
            a.mean_relative_error.to_bits(),
            b.mean_relative_error.to_bits()
        );
        assert_eq!(a.mean_correlations.to_bits(), b.mean_correlations.to_bits());
    }
}
