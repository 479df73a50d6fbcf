//! How well the plane and parabolic models describe a spherical-wave channel.
//!
//! Two measures live here. The classical one bounds the per-antenna phase
//! error, which gives the Fraunhofer distance `8R²/λ` for the plane model and
//! the Fresnel distance `√(8R³/λ)` for the parabolic one. The other is the
//! relative model approximation error (rMAE), the energy fraction of a
//! channel `h` that the best single-path approximation `α·e_M(u, D)` cannot
//! capture:
//!
//! ```text
//! rMAE = ‖h − proj_M(h)‖² / ‖h‖² = 1 − max_{u,D} |e_M(u,D)ᴴ h|² / ‖h‖²
//! ```
//!
//! The maximisation is a coarse grid over direction and `log D`, then nested
//! local grids that shrink the cell eightfold per level.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::{AntennaArray, ArrayLayout, Vec3};
use crate::grids::log_space;
use crate::linalg;
use crate::wavemodels::{excess_length, synth_miso, wavenumber, ChannelVector, Path, WaveModel};

/// Knobs of the projection search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchSettings {
    /// Minimum number of coarse points along every search axis.
    pub coarse_points: usize,
    /// Smallest candidate distance, in wavelengths.
    pub min_distance_wavelengths: f64,
    /// Largest candidate distance, in wavelengths.
    pub max_distance_wavelengths: f64,
    /// Points per axis of each local grid. Odd, so the current best point is
    /// always re-evaluated; the grid spans ± one previous cell, so the cell
    /// shrinks by `(refine_points − 1) / 2`.
    pub refine_points: usize,
    pub min_levels: usize,
    pub max_levels: usize,
    /// Refinement stops once a level improves the rMAE by less than this.
    pub tolerance: f64,
    /// Number of best coarse points refined independently.
    pub starts: usize,
}

impl Default for SearchSettings {
    fn default() -> Self {
        Self {
            coarse_points: 64,
            min_distance_wavelengths: 1.0,
            max_distance_wavelengths: 1e9,
            refine_points: 17,
            min_levels: 3,
            max_levels: 30,
            tolerance: 1e-6,
            starts: 4,
        }
    }
}

impl SearchSettings {
    fn validate(&self) -> Result<()> {
        if self.coarse_points < 2 {
            return invalid("coarse grid needs at least 2 points per axis");
        }
        if self.refine_points < 3 || self.refine_points.is_multiple_of(2) {
            return invalid("refine_points must be odd and >= 3");
        }
        if !(self.min_distance_wavelengths > 0.0
            && self.max_distance_wavelengths > self.min_distance_wavelengths)
        {
            return invalid("distance search range must satisfy 0 < min < max");
        }
        if self.starts == 0 || self.max_levels < self.min_levels {
            return invalid("need at least one start and max_levels >= min_levels");
        }
        Ok(())
    }
}

/// Best single-path approximation of a channel within one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionResult {
    pub model: WaveModel,
    pub best_u_t: Vec3,
    /// `None` for the plane model, which has no distance parameter, and `+∞`
    /// when a curved model is best matched by its plane-wave limit.
    pub best_distance: Option<f64>,
    /// Optimal complex amplitude `e_Mᴴ h` for the unit-norm atom.
    pub best_gain: Complex64,
    pub rmae: f64,
    /// rMAE of the best coarse grid point, before refinement.
    pub coarse_rmae: f64,
    /// Refinement levels run from the winning start.
    pub iterations: usize,
}

/// How directions are parametrised for a given array.
///
/// The models see `u` only through `a·u` (and `‖a‖`), so linear arrays need
/// one angle and planar arrays two direction cosines.
#[derive(Debug, Clone, Copy)]
enum DirectionSpace {
    Fixed(Vec3),
    /// `u = cos θ · axis + sin θ · broadside`, `θ ∈ [0, π]`.
    Azimuth {
        axis: Vec3,
        broadside: Vec3,
    },
    /// `u = p·e1 + q·e2 + √(1 − p² − q²)·normal`, `(p, q)` in the unit disc.
    Disc {
        e1: Vec3,
        e2: Vec3,
        normal: Vec3,
    },
    /// Polar angle in `[0, π]`, azimuth periodic in `[0, 2π)`.
    Sphere,
}

#[derive(Debug, Clone, Copy)]
struct Axis {
    lo: f64,
    hi: f64,
    periodic: bool,
    points: usize,
}

impl Axis {
    fn spacing(&self) -> f64 {
        if self.periodic {
            (self.hi - self.lo) / self.points as f64
        } else {
            (self.hi - self.lo) / (self.points - 1) as f64
        }
    }

    fn value(&self, i: usize) -> f64 {
        if !self.periodic && i == self.points - 1 {
            self.hi
        } else {
            self.lo + self.spacing() * i as f64
        }
    }

    /// Wraps or clamps a coordinate into the axis range.
    fn fold(&self, v: f64) -> f64 {
        if self.periodic {
            self.lo + (v - self.lo).rem_euclid(self.hi - self.lo)
        } else {
            v.clamp(self.lo, self.hi)
        }
    }
}

struct SearchSpace {
    directions: DirectionSpace,
    /// Direction axes followed by the `log10 D` axis for curved models.
    axes: Vec<Axis>,
    curved: bool,
}

impl SearchSpace {
    fn new(
        model: WaveModel,
        array: &AntennaArray,
        lambda: f64,
        settings: &SearchSettings,
    ) -> Result<Self> {
        let min_points = settings.coarse_points;
        // Coarse direction spacing of at most λ/(2L) keeps a grid point inside
        // the main lobe of an aperture of extent L.
        let resolving = |range: f64, extent: f64| -> usize {
            let needed = (range * extent / (lambda / 2.0)).ceil() as usize + 1;
            needed.max(min_points)
        };
        let (directions, mut axes) = match array.layout() {
            ArrayLayout::Point => (DirectionSpace::Fixed(Vec3::Y), Vec::new()),
            ArrayLayout::Linear { axis, broadside } => {
                let extent = array.extent_along(axis);
                (
                    DirectionSpace::Azimuth { axis, broadside },
                    vec![Axis {
                        lo: 0.0,
                        hi: std::f64::consts::PI,
                        periodic: false,
                        points: resolving(std::f64::consts::PI, extent),
                    }],
                )
            }
            ArrayLayout::Planar { e1, e2, normal } => (
                DirectionSpace::Disc { e1, e2, normal },
                [e1, e2]
                    .iter()
                    .map(|e| Axis {
                        lo: -1.0,
                        hi: 1.0,
                        periodic: false,
                        points: resolving(2.0, array.extent_along(*e)),
                    })
                    .collect(),
            ),
            ArrayLayout::Volumetric => {
                let extent = 2.0 * array.aperture_radius();
                let polar = resolving(std::f64::consts::PI, extent);
                (
                    DirectionSpace::Sphere,
                    vec![
                        Axis {
                            lo: 0.0,
                            hi: std::f64::consts::PI,
                            periodic: false,
                            points: polar,
                        },
                        Axis {
                            lo: 0.0,
                            hi: 2.0 * std::f64::consts::PI,
                            periodic: true,
                            points: 2 * polar,
                        },
                    ],
                )
            }
        };
        let curved = model.is_curved();
        if curved {
            axes.push(Axis {
                lo: (settings.min_distance_wavelengths * lambda).log10(),
                hi: (settings.max_distance_wavelengths * lambda).log10(),
                periodic: false,
                points: settings.coarse_points,
            });
        }
        Ok(Self {
            directions,
            axes,
            curved,
        })
    }

    fn direction_axes(&self) -> usize {
        self.axes.len() - usize::from(self.curved)
    }

    fn direction(&self, params: &[f64]) -> Option<Vec3> {
        match self.directions {
            DirectionSpace::Fixed(u) => Some(u),
            DirectionSpace::Azimuth { axis, broadside } => {
                let (s, c) = params[0].sin_cos();
                Some(axis * c + broadside * s)
            }
            DirectionSpace::Disc { e1, e2, normal } => {
                let (p, q) = (params[0], params[1]);
                let r2 = p * p + q * q;
                (r2 <= 1.0).then(|| e1 * p + e2 * q + normal * (1.0 - r2).sqrt())
            }
            DirectionSpace::Sphere => {
                let (st, ct) = params[0].sin_cos();
                let (sp, cp) = params[1].sin_cos();
                Some(Vec3::new(st * cp, st * sp, ct))
            }
        }
    }

    /// Parameters of the point closest to `(u, D)`. Directions behind a
    /// planar array or off a linear array's reference half-plane map to the
    /// mirror direction, which has the same response.
    fn params_of(&self, u: Vec3, distance: f64) -> Vec<f64> {
        let mut params = match self.directions {
            DirectionSpace::Fixed(_) => Vec::new(),
            DirectionSpace::Azimuth { axis, .. } => vec![u.dot(axis).clamp(-1.0, 1.0).acos()],
            DirectionSpace::Disc { e1, e2, .. } => vec![u.dot(e1), u.dot(e2)],
            DirectionSpace::Sphere => vec![u.z.clamp(-1.0, 1.0).acos(), u.y.atan2(u.x)],
        };
        if self.curved {
            params.push(distance.log10());
        }
        for (p, axis) in params.iter_mut().zip(&self.axes) {
            *p = axis.fold(*p);
        }
        params
    }

    fn distance(&self, params: &[f64]) -> f64 {
        if self.curved {
            10f64.powf(params[self.axes.len() - 1])
        } else {
            // Ignored by the plane model.
            1.0
        }
    }
}

/// Normalised correlation `|e_M(u, D)ᴴ h|² / ‖h‖²` of a fixed channel.
struct Objective<'a> {
    model: WaveModel,
    positions: &'a [Vec3],
    norms_sqr: Vec<f64>,
    channel: &'a [Complex64],
    energy: f64,
    wavenumber: f64,
}

impl<'a> Objective<'a> {
    fn new(model: WaveModel, array: &'a AntennaArray, h: &'a ChannelVector) -> Self {
        Self {
            model,
            positions: array.positions(),
            norms_sqr: array.positions().iter().map(|a| a.norm_sqr()).collect(),
            channel: &h.entries,
            energy: linalg::norm_sqr(&h.entries),
            wavenumber: wavenumber(h.wavelength),
        }
    }

    fn dots(&self, u: Vec3, out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.positions.iter().map(|a| a.dot(u)));
    }

    /// `e_Mᴴ h` given the precomputed `a_j·u`.
    fn correlation(&self, dots: &[f64], distance: f64) -> Complex64 {
        let (mut re, mut im) = (0.0, 0.0);
        for ((h, d), n2) in self.channel.iter().zip(dots).zip(&self.norms_sqr) {
            // conj(e_j) = exp(+j k Δ_j) / √N
            let (s, c) = (self.wavenumber * excess_length(self.model, *d, *n2, distance)).sin_cos();
            re += c * h.re - s * h.im;
            im += c * h.im + s * h.re;
        }
        Complex64::new(re, im) / (self.positions.len() as f64).sqrt()
    }

    fn score(&self, dots: &[f64], distance: f64) -> f64 {
        self.correlation(dots, distance).norm_sqr() / self.energy
    }
}

#[derive(Debug, Clone)]
struct Candidate {
    score: f64,
    params: Vec<f64>,
}

/// Finds the best single-path approximation of `h` within `model` and its rMAE.
pub fn project_single_path(
    h: &ChannelVector,
    model: WaveModel,
    array: &AntennaArray,
    search: &SearchSettings,
) -> Result<ProjectionResult> {
    project_single_path_seeded(h, model, array, search, &[])
}

/// [`project_single_path`] with extra starting points `(u, D)` refined next
/// to the best coarse grid points.
///
/// Curved models also consider their `D → ∞` limit, the plane model. When
/// that limit wins, `best_distance` is `+∞`, so a curved rMAE never exceeds
/// the plane-wave one.
///
/// For large arrays at short range the objective oscillates in `D` much
/// faster than the coarse log grid resolves, so a caller that knows where the
/// channel came from (a sweep synthesising its own probe, say) should pass
/// that point. Seeds only add candidates: the result is never worse than the
/// unseeded search.
pub fn project_single_path_seeded(
    h: &ChannelVector,
    model: WaveModel,
    array: &AntennaArray,
    search: &SearchSettings,
    seeds: &[(Vec3, f64)],
) -> Result<ProjectionResult> {
    search.validate()?;
    if h.len() != array.len() {
        return invalid(format!(
            "channel has {} entries but the array has {} antennas",
            h.len(),
            array.len()
        ));
    }
    let lambda = h.wavelength;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return invalid("channel wavelength must be positive");
    }
    let objective = Objective::new(model, array, h);
    if !(objective.energy > 0.0) || !objective.energy.is_finite() {
        return invalid("cannot project a zero (or non-finite) channel");
    }
    let space = SearchSpace::new(model, array, lambda, search)?;

    let coarse = coarse_candidates(&space, &objective, search.starts);
    let coarse_best = coarse[0].score;

    let mut starts = coarse;
    let mut dots = Vec::new();
    for &(u, distance) in seeds {
        if !u.is_unit() || !(distance > 0.0 && distance.is_finite()) {
            return invalid("seed must be a unit direction and a positive distance");
        }
        let params = space.params_of(u, distance);
        let (u, d) = (space.direction(&params), space.distance(&params));
        if let Some(u) = u {
            objective.dots(u, &mut dots);
            starts.push(Candidate {
                score: objective.score(&dots, d),
                params,
            });
        }
    }

    let mut best: Option<(Candidate, usize)> = None;
    for start in starts {
        let (refined, levels) = refine(&space, &objective, start, search);
        if best.as_ref().is_none_or(|(b, _)| refined.score > b.score) {
            best = Some((refined, levels));
        }
    }
    let (best, iterations) = best.expect("coarse grid is never empty");
    let u = space
        .direction(&best.params)
        .expect("candidates are valid points");
    let distance = space.distance(&best.params);
    if model.is_curved() {
        let plane = project_single_path_seeded(h, WaveModel::Pwm, array, search, &[])?;
        if plane.rmae < 1.0 - best.score {
            return Ok(ProjectionResult {
                model,
                best_distance: Some(f64::INFINITY),
                coarse_rmae: (1.0 - coarse_best).clamp(0.0, 1.0),
                ..plane
            });
        }
    }
    objective.dots(u, &mut dots);
    let gain = objective.correlation(&dots, distance);
    Ok(ProjectionResult {
        model,
        best_u_t: u,
        best_distance: model.is_curved().then_some(distance),
        best_gain: gain,
        rmae: (1.0 - best.score).clamp(0.0, 1.0),
        coarse_rmae: (1.0 - coarse_best).clamp(0.0, 1.0),
        iterations,
    })
}

/// Evaluates the full coarse grid and returns the `keep` best points, best first.
fn coarse_candidates(
    space: &SearchSpace,
    objective: &Objective<'_>,
    keep: usize,
) -> Vec<Candidate> {
    let dir_axes = &space.axes[..space.direction_axes()];
    let distances: Vec<f64> = if space.curved {
        let axis = space.axes[space.axes.len() - 1];
        (0..axis.points).map(|i| axis.value(i)).collect()
    } else {
        vec![0.0]
    };
    let mut all = Vec::new();
    let mut dots = Vec::with_capacity(objective.positions.len());
    let mut index = vec![0usize; dir_axes.len()];
    let mut params = vec![0.0; space.axes.len()];
    loop {
        for (k, axis) in dir_axes.iter().enumerate() {
            params[k] = axis.value(index[k]);
        }
        if let Some(u) = space.direction(&params) {
            objective.dots(u, &mut dots);
            for &log_d in &distances {
                if space.curved {
                    params[dir_axes.len()] = log_d;
                }
                let score = objective.score(&dots, space.distance(&params));
                all.push(Candidate {
                    score,
                    params: params.clone(),
                });
            }
        }
        if !advance(&mut index, dir_axes.iter().map(|a| a.points)) {
            break;
        }
    }
    // Stable sort keeps grid order among equal scores.
    all.sort_by(|a, b| b.score.total_cmp(&a.score));
    all.truncate(keep.max(1));
    all
}

/// Odometer increment; returns false after the last combination.
fn advance(index: &mut [usize], sizes: impl Iterator<Item = usize>) -> bool {
    for (i, n) in index.iter_mut().zip(sizes) {
        *i += 1;
        if *i < n {
            return true;
        }
        *i = 0;
    }
    false
}

fn refine(
    space: &SearchSpace,
    objective: &Objective<'_>,
    start: Candidate,
    search: &SearchSettings,
) -> (Candidate, usize) {
    let dims = space.axes.len();
    if dims == 0 {
        return (start, 0);
    }
    let n = search.refine_points;
    let shrink = ((n - 1) / 2) as f64;
    let half = (n / 2) as f64;
    let n_dir = space.direction_axes();
    let offsets: Vec<f64> = (0..n).map(|i| i as f64 - half).collect();
    let mut step: Vec<f64> = space.axes.iter().map(Axis::spacing).collect();
    let mut best = start;
    let mut dots = Vec::with_capacity(objective.positions.len());
    let mut params = vec![0.0; dims];
    let mut levels = 0;
    while levels < search.max_levels {
        for s in &mut step {
            *s /= shrink;
        }
        let center = best.params.clone();
        let mut level_best = best.clone();
        let mut index = vec![0usize; n_dir];
        loop {
            for k in 0..n_dir {
                params[k] = space.axes[k].fold(center[k] + offsets[index[k]] * step[k]);
            }
            if let Some(u) = space.direction(&params) {
                objective.dots(u, &mut dots);
                let distance_offsets: &[f64] = if space.curved { &offsets } else { &[0.0] };
                for off in distance_offsets {
                    if space.curved {
                        params[n_dir] = space.axes[n_dir].fold(center[n_dir] + off * step[n_dir]);
                    }
                    let score = objective.score(&dots, space.distance(&params));
                    if score > level_best.score {
                        level_best = Candidate {
                            score,
                            params: params.clone(),
                        };
                    }
                }
            }
            if !advance(&mut index, std::iter::repeat(n)) {
                break;
            }
        }
        levels += 1;
        let improvement = level_best.score - best.score;
        best = level_best;
        if levels >= search.min_levels && improvement < search.tolerance {
            break;
        }
    }
    (best, levels)
}

/// Classical far-field boundary `8R²/λ`, beyond which the plane model's
/// phase error stays below π/8.
pub fn fraunhofer_distance(aperture_radius: f64, lambda: f64) -> Result<f64> {
    check_boundary_args(aperture_radius, lambda)?;
    Ok(8.0 * aperture_radius * aperture_radius / lambda)
}

/// `√(8R³/λ)`, beyond which the parabolic model's phase error stays below π/8.
pub fn fresnel_distance(aperture_radius: f64, lambda: f64) -> Result<f64> {
    check_boundary_args(aperture_radius, lambda)?;
    Ok((8.0 * aperture_radius.powi(3) / lambda).sqrt())
}

fn check_boundary_args(radius: f64, lambda: f64) -> Result<()> {
    if !(radius >= 0.0 && radius.is_finite()) {
        return invalid(format!("aperture radius must be >= 0, got {radius}"));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return invalid(format!("wavelength must be positive, got {lambda}"));
    }
    Ok(())
}

/// Largest per-antenna phase difference (radians) between `model` and the
/// spherical model for one path.
pub fn max_phase_error(
    model: WaveModel,
    array: &AntennaArray,
    u_t: Vec3,
    distance: f64,
    lambda: f64,
) -> Result<f64> {
    if !(distance > 0.0 && distance.is_finite()) {
        return invalid(format!("distance must be positive, got {distance}"));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return invalid(format!("wavelength must be positive, got {lambda}"));
    }
    if !u_t.is_unit() {
        return invalid("direction must be a unit vector");
    }
    let k = wavenumber(lambda);
    Ok(array
        .positions()
        .iter()
        .map(|a| {
            let (d, n2) = (a.dot(u_t), a.norm_sqr());
            let exact = excess_length(WaveModel::Swm, d, n2, distance);
            k * (exact - excess_length(model, d, n2, distance)).abs()
        })
        .fold(0.0, f64::max))
}

/// Direction a probe receiver "in front of" the array sits in: broadside for
/// linear arrays, the plane normal for planar ones.
pub fn broadside_direction(array: &AntennaArray) -> Vec3 {
    match array.layout() {
        ArrayLayout::Linear { broadside, .. } => broadside,
        ArrayLayout::Planar { normal, .. } => normal,
        ArrayLayout::Point | ArrayLayout::Volumetric => Vec3::Y,
    }
}

/// Distance sweep of the rMAE of approximate models against a spherical-wave probe channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub array: AntennaArray,
    pub models: Vec<WaveModel>,
    pub wavelength: f64,
    /// Strictly increasing, meters.
    pub distances: Vec<f64>,
    /// Direction of the probe receiver.
    pub probe_direction: Vec3,
    pub search: SearchSettings,
}

/// Default sweep resolution: points from λ to 10⁵λ.
pub const DEFAULT_SWEEP_POINTS: usize = 200;

impl SweepConfig {
    /// Broadside probe, plane and parabolic models, 200 log-spaced distances
    /// from λ to 10⁵λ.
    pub fn new(array: AntennaArray, wavelength: f64) -> Result<Self> {
        if !(wavelength > 0.0 && wavelength.is_finite()) {
            return invalid(format!("wavelength must be positive, got {wavelength}"));
        }
        let distances = log_space(wavelength, 1e5 * wavelength, DEFAULT_SWEEP_POINTS)?;
        Ok(Self {
            probe_direction: broadside_direction(&array),
            array,
            models: vec![WaveModel::Pwm, WaveModel::ParWm],
            wavelength,
            distances,
            search: SearchSettings::default(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.models.is_empty() {
            return invalid("sweep needs at least one model");
        }
        if self.distances.is_empty() || self.distances[0] <= 0.0 {
            return invalid("sweep distances must be non-empty and positive");
        }
        if self.distances.windows(2).any(|w| !(w[1] > w[0])) {
            return invalid("sweep distances must be strictly increasing");
        }
        if !self.probe_direction.is_unit() {
            return invalid("probe direction must be a unit vector");
        }
        self.search.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub distance: f64,
    pub model: WaveModel,
    pub rmae: f64,
}

/// rMAE of each configured model against a unit-gain spherical-wave probe
/// channel at every sweep distance.
///
/// Rows are ordered by distance, then by model as listed in the config. The
/// distances are evaluated in parallel on the current rayon pool; the output
/// does not depend on the number of threads.
pub fn rmae_curve(cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let per_distance: Vec<Result<Vec<SweepRow>>> = cfg
        .distances
        .par_iter()
        .map(|&distance| {
            let path = Path::miso(1.0, 0.0, cfg.probe_direction, distance)?;
            let h = synth_miso(&cfg.array, &[path], WaveModel::Swm, cfg.wavelength)?;
            let seed = [(cfg.probe_direction, distance)];
            cfg.models
                .iter()
                .map(|&model| {
                    let p = project_single_path_seeded(&h, model, &cfg.array, &cfg.search, &seed)?;
                    Ok(SweepRow {
                        distance,
                        model,
                        rmae: p.rmae,
                    })
                })
                .collect()
        })
        .collect();
    let mut rows = Vec::with_capacity(cfg.distances.len() * cfg.models.len());
    for chunk in per_distance {
        rows.extend(chunk?);
    }
    Ok(rows)
}

/// Smallest sweep distance at which `model`'s rMAE drops below `threshold`.
pub fn first_distance_below(rows: &[SweepRow], model: WaveModel, threshold: f64) -> Option<f64> {
    rows.iter()
        .filter(|r| r.model == model && r.rmae < threshold)
        .map(|r| r.distance)
        .fold(None, |acc: Option<f64>, d| {
            Some(acc.map_or(d, |a| a.min(d)))
        })
}
