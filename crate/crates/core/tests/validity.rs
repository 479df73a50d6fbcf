use std::f64::consts::PI;

use num_complex::Complex64;
use wavefront::geometry::{make_ula, make_upa, AntennaArray, Vec3};
use wavefront::grids::lin_space;
use wavefront::linalg::{inner, norm_sqr};
use wavefront::validity::{
    first_distance_below, fraunhofer_distance, fresnel_distance, max_phase_error,
    project_single_path, project_single_path_seeded, rmae_curve, SearchSettings, SweepConfig,
};
use wavefront::wavemodels::{characteristic_vector, synth_miso, ChannelVector, Path, WaveModel};

const LAMBDA: f64 = 0.01;

fn probe(array: &AntennaArray, u: Vec3, d: f64) -> ChannelVector {
    synth_miso(
        array,
        &[Path::miso(1.0, 0.0, u, d).unwrap()],
        WaveModel::Swm,
        LAMBDA,
    )
    .unwrap()
}

fn score(model: WaveModel, array: &AntennaArray, h: &ChannelVector, u: Vec3, d: f64) -> f64 {
    let e = characteristic_vector(model, array, u, d, LAMBDA).unwrap();
    inner(&e.entries, &h.entries).norm_sqr() / norm_sqr(&h.entries)
}

fn best_on_grid(
    model: WaveModel,
    array: &AntennaArray,
    h: &ChannelVector,
    azimuths: &[f64],
    log_distances: &[f64],
) -> (f64, f64, f64) {
    let mut best = (0.0, 0.0, 0.0);
    for &az in azimuths {
        for &ld in log_distances {
            let s = score(model, array, h, Vec3::from_azimuth(az), 10f64.powf(ld));
            if s > best.0 {
                best = (s, az, ld);
            }
        }
    }
    best
}

/// Exhaustive rMAE oracle. The plane model is scanned on 10⁵ azimuths. The
/// curved models are scanned on a 10⁵-point azimuth × log-distance grid and
/// then on a second 10⁵-point grid spanning two cells around the best point.
fn brute_force(model: WaveModel, array: &AntennaArray, h: &ChannelVector) -> f64 {
    if !model.is_curved() {
        let az = lin_space(0.0, PI, 100_000);
        return 1.0 - best_on_grid(model, array, h, &az, &[0.0]).0;
    }
    let (lo, hi) = (LAMBDA.log10(), (1e5 * LAMBDA).log10());
    let az = lin_space(0.0, PI, 400);
    let ld = lin_space(lo, hi, 250);
    let (_, a0, l0) = best_on_grid(model, array, h, &az, &ld);
    let (da, dl) = (2.0 * PI / 399.0, 2.0 * (hi - lo) / 249.0);
    let az = lin_space((a0 - da).max(0.0), (a0 + da).min(PI), 400);
    let ld = lin_space(l0 - dl, l0 + dl, 250);
    1.0 - best_on_grid(model, array, h, &az, &ld).0
}

#[test]
fn projection_matches_dense_grid_oracle() {
    let search = SearchSettings::default();
    let small = [
        make_ula(4, LAMBDA / 2.0).unwrap(),
        make_ula(8, LAMBDA / 2.0).unwrap(),
    ];
    for array in &small {
        for (az, d) in [
            (PI / 2.0, 10.0 * LAMBDA),
            (1.0, 4.0 * LAMBDA),
            (2.5, 30.0 * LAMBDA),
        ] {
            let h = probe(array, Vec3::from_azimuth(az), d);
            for model in [WaveModel::Pwm, WaveModel::ParWm] {
                let got = project_single_path(&h, model, array, &search).unwrap().rmae;
                let oracle = brute_force(model, array, &h);
                assert!(
                    (got - oracle).abs() < 1e-4,
                    "{} {model} az={az} d={d}: {got} vs {oracle}",
                    array.label()
                );
            }
        }
    }
}

#[test]
fn projecting_a_model_point_onto_its_own_family() {
    let array = make_ula(16, LAMBDA / 2.0).unwrap();
    let (u, d) = (Vec3::from_azimuth(1.3), 0.2);
    let h = probe(&array, u, d);
    let p = project_single_path(&h, WaveModel::Swm, &array, &SearchSettings::default()).unwrap();
    assert!(p.rmae < 1e-6, "{}", p.rmae);
    assert!((p.best_u_t - u).norm() < 1e-3);
    assert!((p.best_distance.unwrap() / d - 1.0).abs() < 1e-2);

    let u = Vec3::from_azimuth(PI * 17.0 / 63.0);
    let plane = synth_miso(
        &array,
        &[Path::miso(0.5, 1.0, u, 1.0).unwrap()],
        WaveModel::Pwm,
        LAMBDA,
    )
    .unwrap();
    let p =
        project_single_path(&plane, WaveModel::Pwm, &array, &SearchSettings::default()).unwrap();
    assert!(p.rmae < 1e-9, "{}", p.rmae);
    assert!(p.best_distance.is_none());
}

#[test]
fn rmae_ignores_global_gain() {
    let array = make_ula(32, LAMBDA / 2.0).unwrap();
    let h = probe(&array, Vec3::from_azimuth(1.1), 0.3);
    let c = Complex64::from_polar(3.7, -2.2);
    let scaled = ChannelVector {
        entries: h.entries.iter().map(|z| z * c).collect(),
        wavelength: LAMBDA,
    };
    for model in [WaveModel::Pwm, WaveModel::ParWm] {
        let a = project_single_path(&h, model, &array, &SearchSettings::default()).unwrap();
        let b = project_single_path(&scaled, model, &array, &SearchSettings::default()).unwrap();
        assert!((a.rmae - b.rmae).abs() < 1e-12);
        assert!(a.rmae <= a.coarse_rmae && b.rmae <= b.coarse_rmae);
    }
}

#[test]
fn upa_projection_and_three_dimensional_probe() {
    let array = make_upa(4, 4, LAMBDA / 2.0).unwrap();
    let u = Vec3::new(0.3, -0.2, (1.0f64 - 0.13).sqrt());
    let h = probe(&array, u, 0.5);
    let p = project_single_path(&h, WaveModel::Swm, &array, &SearchSettings::default()).unwrap();
    assert!(p.rmae < 1e-6, "{}", p.rmae);
    let pwm = project_single_path(&h, WaveModel::Pwm, &array, &SearchSettings::default()).unwrap();
    let par =
        project_single_path(&h, WaveModel::ParWm, &array, &SearchSettings::default()).unwrap();
    assert!(par.rmae <= pwm.rmae + 1e-9);
}

#[test]
fn phase_error_at_the_boundaries() {
    let array = make_ula(256, LAMBDA / 2.0).unwrap();
    let r = array.aperture_radius();
    let far = fraunhofer_distance(r, LAMBDA).unwrap();
    let near = fresnel_distance(r, LAMBDA).unwrap();
    let bound = PI / 8.0 * (1.0 + 1e-6);
    for u in [Vec3::Y, Vec3::X, Vec3::from_azimuth(0.7)] {
        assert!(max_phase_error(WaveModel::Pwm, &array, u, far, LAMBDA).unwrap() <= bound);
        assert!(max_phase_error(WaveModel::ParWm, &array, u, near, LAMBDA).unwrap() <= bound);
        assert_eq!(
            max_phase_error(WaveModel::Swm, &array, u, 3.0, LAMBDA).unwrap(),
            0.0
        );
    }
    let broadside = max_phase_error(WaveModel::Pwm, &array, Vec3::Y, far, LAMBDA).unwrap();
    assert!((broadside - PI / 8.0).abs() < 1e-3);
}

#[test]
fn parabolic_rmae_is_negligible_at_the_fresnel_distance() {
    let array = make_ula(256, LAMBDA / 2.0).unwrap();
    let d = fresnel_distance(array.aperture_radius(), LAMBDA).unwrap();
    let h = probe(&array, Vec3::Y, d);
    let p = project_single_path_seeded(
        &h,
        WaveModel::ParWm,
        &array,
        &SearchSettings::default(),
        &[(Vec3::Y, d)],
    )
    .unwrap();
    assert!(p.rmae < 0.01, "{}", p.rmae);
}

/// A quadratic phase error `φ(x) = φ_max x²` over a uniform aperture leaves
/// an rMAE close to its variance, `φ_max²·4/45`, which is 0.0137 at
/// `φ_max = π/8`. The plane model therefore sits just above 1% at exactly
/// the Fraunhofer distance for a linear array.
#[test]
#[ignore = "plane-model rMAE at the Fraunhofer distance is about 0.0138, above 0.01"]
fn plane_rmae_is_negligible_at_the_fraunhofer_distance() {
    let array = make_ula(256, LAMBDA / 2.0).unwrap();
    let d = fraunhofer_distance(array.aperture_radius(), LAMBDA).unwrap();
    let h = probe(&array, Vec3::Y, d);
    let p = project_single_path(&h, WaveModel::Pwm, &array, &SearchSettings::default()).unwrap();
    assert!(p.rmae < 0.01, "{}", p.rmae);
}

#[test]
fn plane_rmae_at_the_fraunhofer_distance_matches_the_quadratic_phase_variance() {
    let array = make_ula(256, LAMBDA / 2.0).unwrap();
    let d = fraunhofer_distance(array.aperture_radius(), LAMBDA).unwrap();
    let h = probe(&array, Vec3::Y, d);
    let p = project_single_path(&h, WaveModel::Pwm, &array, &SearchSettings::default()).unwrap();
    let variance = (PI / 8.0f64).powi(2) * 4.0 / 45.0;
    assert!((p.rmae / variance - 1.0).abs() < 0.03, "{}", p.rmae);
}

#[test]
fn plane_rmae_near_the_published_threshold() {
    let array = make_ula(256, LAMBDA / 2.0).unwrap();
    let h = probe(&array, Vec3::Y, 170.0);
    let p = project_single_path(&h, WaveModel::Pwm, &array, &SearchSettings::default()).unwrap();
    assert!((p.rmae - 0.05).abs() < 0.02, "{}", p.rmae);
}

/// The parabolic curve crosses 5% near 1.6 m, so at 2.5 m it is already
/// well below the band.
#[test]
#[ignore = "parabolic rMAE at 2.5 m is about 0.004; the 5% crossing is near 1.6 m"]
fn parabolic_rmae_near_the_published_threshold() {
    let array = make_ula(256, LAMBDA / 2.0).unwrap();
    let h = probe(&array, Vec3::Y, 2.5);
    let seed = [(Vec3::Y, 2.5)];
    let p = project_single_path_seeded(
        &h,
        WaveModel::ParWm,
        &array,
        &SearchSettings::default(),
        &seed,
    )
    .unwrap();
    assert!((p.rmae - 0.05).abs() < 0.02, "{}", p.rmae);
}

/// At 10⁵λ the plane model still carries a quadratic phase of peak
/// `πR²/(λD) ≈ 0.128` rad across ULA-256, giving an rMAE near
/// `0.128²·4/45 ≈ 1.45e-3`.
#[test]
#[ignore = "plane-model rMAE for ULA-256 at 1e5 wavelengths is about 1.45e-3"]
fn far_rows_converge_to_zero() {
    let array = make_ula(256, LAMBDA / 2.0).unwrap();
    let mut cfg = SweepConfig::new(array, LAMBDA).unwrap();
    cfg.distances = vec![1e5 * LAMBDA];
    for row in rmae_curve(&cfg).unwrap() {
        assert!(row.rmae < 1e-3, "{row:?}");
    }
}

#[test]
fn far_rows_follow_the_quadratic_phase_law() {
    let array = make_ula(256, LAMBDA / 2.0).unwrap();
    let radius = array.aperture_radius();
    let mut cfg = SweepConfig::new(array, LAMBDA).unwrap();
    let d = 1e5 * LAMBDA;
    cfg.distances = vec![d];
    let rows = rmae_curve(&cfg).unwrap();
    let peak = PI * radius * radius / (LAMBDA * d);
    assert!(
        (rows[0].rmae / (peak * peak * 4.0 / 45.0) - 1.0).abs() < 0.03,
        "{:?}",
        rows[0]
    );
    assert!(rows[1].rmae < 1e-3, "{:?}", rows[1]);
}

#[test]
fn parabolic_never_worse_than_plane_along_a_sweep() {
    let cfg = SweepConfig::new(make_ula(64, LAMBDA / 2.0).unwrap(), LAMBDA).unwrap();
    let rows = rmae_curve(&cfg).unwrap();
    assert_eq!(rows.len(), 400);
    for pair in rows.chunks(2) {
        assert_eq!(pair[0].distance, pair[1].distance);
        assert!(pair[1].rmae <= pair[0].rmae + 1e-9, "{pair:?}");
        assert!(pair.iter().all(|r| (0.0..=1.0 + 1e-12).contains(&r.rmae)));
    }
    let far = first_distance_below(&rows, WaveModel::Pwm, 0.05).unwrap();
    let near = first_distance_below(&rows, WaveModel::ParWm, 0.05).unwrap();
    assert!(near < far);
}
