//! Greedy (orthogonal matching pursuit) channel estimation from noisy linear
//! observations `y = X h + n`.
//!
//! The channel is modelled as `h = E α` where the columns of `E` are
//! characteristic vectors. Each iteration picks the atom whose projection
//! `X e` is best aligned with the residual, appends it to `E`, refits every
//! gain by least squares and recomputes the residual. The selection rule is
//! the [`Strategy`]:
//!
//! * [`Strategy::Pwm`] scans the plane-wave dictionary (`N_u` correlations),
//! * [`Strategy::Joint`] scans every (direction, distance) atom of a curved
//!   dictionary (`N_u·N_D` correlations),
//! * [`Strategy::Sequential`] picks the direction with plane-wave atoms and
//!   then the distance along that direction (`N_u + N_D` correlations).

use std::borrow::Cow;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{AntennaArray, Vec3};
use crate::grids::lin_space;
use crate::linalg::{inner, norm, norm_sqr, solve_least_squares, CMatrix};
use crate::wavemodels::{fill_characteristic, norms_sqr, wavenumber, ChannelVector, WaveModel};

/// Pilot matrix `X` (`N_s × N_t`) and the per-sample noise variance.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationModel {
    pilots: Pilots,
    noise_variance: f64,
}

#[derive(Debug, Clone, PartialEq)]
enum Pilots {
    Identity(usize),
    Dense(CMatrix),
}

impl ObservationModel {
    /// `X = I_n`.
    pub fn identity(n: usize, noise_variance: f64) -> Result<Self> {
        if n == 0 {
            return invalid("observation needs at least one sample");
        }
        Self::check_variance(noise_variance)?;
        Ok(Self {
            pilots: Pilots::Identity(n),
            noise_variance,
        })
    }

    pub fn new(x: CMatrix, noise_variance: f64) -> Result<Self> {
        if x.rows() == 0 || x.cols() == 0 {
            return invalid("pilot matrix must be non-empty");
        }
        if (0..x.rows()).any(|i| x.row(i).iter().all(|z| z.norm_sqr() == 0.0)) {
            return invalid("pilot matrix has an all-zero row");
        }
        if x.as_slice()
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return invalid("pilot matrix must be finite");
        }
        Self::check_variance(noise_variance)?;
        Ok(Self {
            pilots: Pilots::Dense(x),
            noise_variance,
        })
    }

    fn check_variance(v: f64) -> Result<()> {
        if v >= 0.0 && v.is_finite() {
            Ok(())
        } else {
            invalid(format!("noise variance must be >= 0, got {v}"))
        }
    }

    pub fn samples(&self) -> usize {
        match &self.pilots {
            Pilots::Identity(n) => *n,
            Pilots::Dense(x) => x.rows(),
        }
    }

    pub fn antennas(&self) -> usize {
        match &self.pilots {
            Pilots::Identity(n) => *n,
            Pilots::Dense(x) => x.cols(),
        }
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    pub fn is_identity(&self) -> bool {
        matches!(self.pilots, Pilots::Identity(_))
    }

    /// `X v`.
    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(
            v.len(),
            self.antennas(),
            "vector length must match the antenna count"
        );
        match &self.pilots {
            Pilots::Identity(_) => v.to_vec(),
            Pilots::Dense(x) => x.mul_vec(v),
        }
    }

    pub fn matrix(&self) -> CMatrix {
        match &self.pilots {
            Pilots::Identity(n) => CMatrix::identity(*n),
            Pilots::Dense(x) => x.clone(),
        }
    }
}

/// Grid of unit-norm characteristic vectors over directions × distances.
///
/// Atom `(i, j)` is stored at flat index `i·N_D + j`. Plane-wave dictionaries
/// have no distance axis and one atom per direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dictionary {
    model: WaveModel,
    directions: Vec<Vec3>,
    distances: Vec<f64>,
    antennas: usize,
    wavelength: f64,
    atoms: Vec<Complex64>,
}

impl Dictionary {
    /// Builds every atom. `distances` must be empty for the plane model and
    /// non-empty (all positive) for the curved ones.
    pub fn new(
        model: WaveModel,
        array: &AntennaArray,
        directions: Vec<Vec3>,
        distances: Vec<f64>,
        lambda: f64,
    ) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return invalid("wavelength must be positive");
        }
        if array.is_empty() || directions.is_empty() {
            return invalid("dictionary needs a non-empty array and direction grid");
        }
        if directions.iter().any(|u| !u.is_unit()) {
            return invalid("dictionary directions must be unit vectors");
        }
        match (model.is_curved(), distances.is_empty()) {
            (false, false) => return invalid("plane-wave dictionaries take no distances"),
            (true, true) => return invalid("curved dictionaries need at least one distance"),
            _ => {}
        }
        if distances.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
            return invalid("dictionary distances must be positive");
        }
        let n = array.len();
        let per_direction = distances.len().max(1);
        let norms = norms_sqr(array);
        let k = wavenumber(lambda);
        let mut atoms = vec![Complex64::new(0.0, 0.0); directions.len() * per_direction * n];
        atoms
            .par_chunks_mut(per_direction * n)
            .zip(directions.par_iter())
            .for_each(|(block, &u)| {
                if distances.is_empty() {
                    fill_characteristic(model, array.positions(), &norms, u, 1.0, k, block);
                } else {
                    for (slot, &d) in block.chunks_mut(n).zip(&distances) {
                        fill_characteristic(model, array.positions(), &norms, u, d, k, slot);
                    }
                }
            });
        Ok(Self {
            model,
            directions,
            distances,
            antennas: n,
            wavelength: lambda,
            atoms,
        })
    }

    /// `n` directions in the x–y plane with azimuths uniformly covering `[0, π]`.
    pub fn azimuth_grid(n: usize) -> Vec<Vec3> {
        lin_space(0.0, std::f64::consts::PI, n)
            .into_iter()
            .map(Vec3::from_azimuth)
            .collect()
    }

    pub fn model(&self) -> WaveModel {
        self.model
    }

    pub fn directions(&self) -> &[Vec3] {
        &self.directions
    }

    pub fn distances(&self) -> &[f64] {
        &self.distances
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    /// Distances per direction (1 for plane-wave dictionaries).
    pub fn distances_per_direction(&self) -> usize {
        self.distances.len().max(1)
    }

    pub fn len(&self) -> usize {
        self.directions.len() * self.distances_per_direction()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn flat_index(&self, direction: usize, distance: usize) -> usize {
        direction * self.distances_per_direction() + distance
    }

    pub fn atom(&self, direction: usize, distance: usize) -> &[Complex64] {
        self.atom_flat(self.flat_index(direction, distance))
    }

    fn atom_flat(&self, index: usize) -> &[Complex64] {
        &self.atoms[index * self.antennas..(index + 1) * self.antennas]
    }

    /// Atoms as seen through the pilots, `X e`, with their inverse norms.
    pub fn project<'a>(&'a self, obs: &ObservationModel) -> Result<ProjectedDictionary<'a>> {
        if obs.antennas() != self.antennas {
            return invalid(format!(
                "pilot matrix has {} columns but the dictionary has {} antennas",
                obs.antennas(),
                self.antennas
            ));
        }
        let samples = obs.samples();
        let projected: Cow<'a, [Complex64]> = match &obs.pilots {
            Pilots::Identity(_) => Cow::Borrowed(&self.atoms),
            Pilots::Dense(x) => {
                let mut out = vec![Complex64::new(0.0, 0.0); self.len() * samples];
                out.par_chunks_mut(samples)
                    .enumerate()
                    .for_each(|(i, slot)| slot.copy_from_slice(&x.mul_vec(self.atom_flat(i))));
                Cow::Owned(out)
            }
        };
        let inv_norms = projected
            .chunks(samples)
            .map(|c| {
                let n = norm(c);
                if n > 0.0 {
                    1.0 / n
                } else {
                    0.0
                }
            })
            .collect();
        Ok(ProjectedDictionary {
            dictionary: self,
            samples,
            projected,
            inv_norms,
        })
    }
}

/// A dictionary paired with a pilot matrix: holds `X e` for every atom.
#[derive(Debug, Clone)]
pub struct ProjectedDictionary<'a> {
    dictionary: &'a Dictionary,
    samples: usize,
    projected: Cow<'a, [Complex64]>,
    inv_norms: Vec<f64>,
}

impl<'a> ProjectedDictionary<'a> {
    pub fn dictionary(&self) -> &'a Dictionary {
        self.dictionary
    }

    fn projected_atom(&self, index: usize) -> &[Complex64] {
        &self.projected[index * self.samples..(index + 1) * self.samples]
    }

    /// `|rᴴ X e| / ‖X e‖` for one atom; zero when `X e = 0`.
    fn score(&self, residual: &[Complex64], index: usize) -> f64 {
        inner(residual, self.projected_atom(index)).norm() * self.inv_norms[index]
    }

    /// Argmax of the score over `indices`, lowest index on ties.
    fn best_of(
        &self,
        residual: &[Complex64],
        indices: impl Iterator<Item = usize>,
    ) -> (usize, f64, usize) {
        let mut best = (0, f64::NEG_INFINITY);
        let mut count = 0;
        for i in indices {
            count += 1;
            let s = self.score(residual, i);
            if s > best.1 {
                best = (i, s);
            }
        }
        (best.0, best.1.max(0.0), count)
    }

    fn check_residual(&self, residual: &[Complex64]) -> Result<()> {
        if residual.len() == self.samples {
            Ok(())
        } else {
            invalid(format!(
                "residual has {} samples, expected {}",
                residual.len(),
                self.samples
            ))
        }
    }
}

/// Outcome of one atom selection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub direction: usize,
    /// Always 0 for plane-wave selections.
    pub distance: usize,
    /// Normalised correlation of the chosen atom.
    pub score: f64,
    /// Number of atom correlations evaluated.
    pub correlations: usize,
}

/// Best plane-wave direction for `residual`.
pub fn select_pwm(residual: &[Complex64], pwm: &ProjectedDictionary<'_>) -> Result<Selection> {
    if pwm.dictionary.model != WaveModel::Pwm {
        return invalid("select_pwm needs a plane-wave dictionary");
    }
    pwm.check_residual(residual)?;
    let (direction, score, correlations) = pwm.best_of(residual, 0..pwm.dictionary.len());
    Ok(Selection {
        direction,
        distance: 0,
        score,
        correlations,
    })
}

/// Best (direction, distance) atom over the whole curved dictionary.
pub fn select_joint(residual: &[Complex64], curved: &ProjectedDictionary<'_>) -> Result<Selection> {
    if !curved.dictionary.model.is_curved() {
        return invalid("select_joint needs a parabolic or spherical dictionary");
    }
    curved.check_residual(residual)?;
    let (index, score, correlations) = curved.best_of(residual, 0..curved.dictionary.len());
    let per = curved.dictionary.distances_per_direction();
    Ok(Selection {
        direction: index / per,
        distance: index % per,
        score,
        correlations,
    })
}

/// Direction from the plane-wave atoms, then the best distance along it.
pub fn select_sequential(
    residual: &[Complex64],
    pwm: &ProjectedDictionary<'_>,
    curved: &ProjectedDictionary<'_>,
) -> Result<Selection> {
    if !curved.dictionary.model.is_curved() {
        return invalid("select_sequential needs a parabolic or spherical dictionary");
    }
    if pwm.dictionary.directions != curved.dictionary.directions {
        return invalid("plane-wave and curved dictionaries must share the direction grid");
    }
    let direction = select_pwm(residual, pwm)?;
    let per = curved.dictionary.distances_per_direction();
    let start = direction.direction * per;
    let (index, score, count) = curved.best_of(residual, start..start + per);
    Ok(Selection {
        direction: direction.direction,
        distance: index - start,
        score,
        correlations: direction.correlations + count,
    })
}

/// Minimiser of `‖y − X E α‖₂` for fixed columns `E` (`N_t × k`).
pub fn least_squares_gains(
    e: &CMatrix,
    obs: &ObservationModel,
    y: &[Complex64],
) -> Result<Vec<Complex64>> {
    if e.rows() != obs.antennas() {
        return invalid("E must have one row per antenna");
    }
    if y.len() != obs.samples() {
        return invalid("observation length must equal the number of samples");
    }
    let columns: Vec<Vec<Complex64>> = (0..e.cols()).map(|j| obs.apply(&e.column(j))).collect();
    solve_least_squares(&CMatrix::from_columns(&columns), y)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Plane-wave atoms only.
    Pwm,
    /// Exhaustive scan over directions × distances.
    Joint,
    /// Direction first (plane-wave atoms), then distance.
    #[serde(rename = "seq")]
    Sequential,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Pwm, Strategy::Joint, Strategy::Sequential];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Pwm => "pwm",
            Strategy::Joint => "joint",
            Strategy::Sequential => "seq",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pwm" | "s_pwm" => Ok(Strategy::Pwm),
            "joint" | "s_joint" => Ok(Strategy::Joint),
            "seq" | "sequential" | "s_seq" => Ok(Strategy::Sequential),
            other => invalid(format!("unknown strategy `{other}`")),
        }
    }
}

/// One atom chosen by the estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedAtom {
    pub iteration: usize,
    pub direction_index: usize,
    pub distance_index: usize,
    pub u_t: Vec3,
    /// `None` for plane-wave atoms.
    pub distance: Option<f64>,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub strategy: Strategy,
    pub model: WaveModel,
    pub selected: Vec<SelectedAtom>,
    /// Least-squares gains of the selected atoms (`√N_t·ρ e^{jφ}` per path).
    pub alpha: Vec<Complex64>,
    pub h_hat: ChannelVector,
    /// `‖r‖` before the first iteration, then after every iteration.
    pub residual_norms: Vec<f64>,
    pub correlation_count: usize,
    /// Iterations whose selected atom was already in the support and was skipped.
    pub skipped: Vec<usize>,
}

/// State handed to the per-iteration observer of [`GreedyEstimator::run`].
pub struct Iteration<'r> {
    pub iteration: usize,
    /// Columns of `E` so far, as characteristic vectors.
    pub atoms: &'r [&'r [Complex64]],
    pub alpha: &'r [Complex64],
    pub residual_norm: f64,
    pub correlations: usize,
}

impl Iteration<'_> {
    /// `ĥ = E α` at this iteration.
    pub fn estimate(&self) -> Vec<Complex64> {
        let n = self.atoms.first().map_or(0, |a| a.len());
        let mut h = vec![Complex64::new(0.0, 0.0); n];
        for (atom, a) in self.atoms.iter().zip(self.alpha) {
            for (hj, ej) in h.iter_mut().zip(atom.iter()) {
                *hj += a * ej;
            }
        }
        h
    }
}

/// Orthogonal matching pursuit with a fixed strategy and pilot matrix.
///
/// Projected dictionaries are computed once, so one estimator can process
/// many observations.
#[derive(Debug, Clone)]
pub struct GreedyEstimator<'a> {
    strategy: Strategy,
    obs: &'a ObservationModel,
    pwm: Option<ProjectedDictionary<'a>>,
    curved: Option<ProjectedDictionary<'a>>,
}

impl<'a> GreedyEstimator<'a> {
    /// `pwm` is required by [`Strategy::Pwm`] and [`Strategy::Sequential`];
    /// `curved` by [`Strategy::Joint`] and [`Strategy::Sequential`].
    pub fn new(
        strategy: Strategy,
        obs: &'a ObservationModel,
        pwm: Option<&'a Dictionary>,
        curved: Option<&'a Dictionary>,
    ) -> Result<Self> {
        let need_pwm = matches!(strategy, Strategy::Pwm | Strategy::Sequential);
        let need_curved = matches!(strategy, Strategy::Joint | Strategy::Sequential);
        if need_pwm && pwm.is_none() {
            return invalid(format!("strategy {strategy} needs a plane-wave dictionary"));
        }
        if need_curved && curved.is_none() {
            return invalid(format!("strategy {strategy} needs a curved dictionary"));
        }
        if let Some(d) = pwm.filter(|_| need_pwm) {
            if d.model != WaveModel::Pwm {
                return invalid("the plane-wave dictionary must use the plane model");
            }
        }
        if let Some(d) = curved.filter(|_| need_curved) {
            if !d.model.is_curved() {
                return invalid("the curved dictionary must use the parabolic or spherical model");
            }
        }
        Ok(Self {
            strategy,
            obs,
            pwm: pwm
                .filter(|_| need_pwm)
                .map(|d| d.project(obs))
                .transpose()?,
            curved: curved
                .filter(|_| need_curved)
                .map(|d| d.project(obs))
                .transpose()?,
        })
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    /// Model of the atoms this estimator places in `E`.
    pub fn model(&self) -> WaveModel {
        self.atom_source().dictionary.model
    }

    fn atom_source(&self) -> &ProjectedDictionary<'a> {
        match self.strategy {
            Strategy::Pwm => self.pwm.as_ref(),
            Strategy::Joint | Strategy::Sequential => self.curved.as_ref(),
        }
        .expect("checked in new")
    }

    fn select(&self, residual: &[Complex64]) -> Result<Selection> {
        match self.strategy {
            Strategy::Pwm => select_pwm(residual, self.pwm.as_ref().expect("checked in new")),
            Strategy::Joint => {
                select_joint(residual, self.curved.as_ref().expect("checked in new"))
            }
            Strategy::Sequential => select_sequential(
                residual,
                self.pwm.as_ref().expect("checked in new"),
                self.curved.as_ref().expect("checked in new"),
            ),
        }
    }

    pub fn estimate(&self, y: &[Complex64], paths: usize) -> Result<EstimationResult> {
        self.run(y, paths, |_| {})
    }

    /// Runs `paths` iterations and calls `observe` after each one, skipped
    /// iterations included.
    pub fn run(
        &self,
        y: &[Complex64],
        paths: usize,
        mut observe: impl FnMut(&Iteration<'_>),
    ) -> Result<EstimationResult> {
        if paths == 0 {
            return invalid("number of paths must be >= 1");
        }
        if paths > self.obs.samples() {
            return invalid(format!(
                "cannot fit {paths} paths from {} samples",
                self.obs.samples()
            ));
        }
        if y.len() != self.obs.samples() {
            return invalid("observation length must equal the number of samples");
        }
        let source = self.atom_source();
        let dictionary = source.dictionary;
        let samples = self.obs.samples();

        let mut residual = y.to_vec();
        let mut residual_norms = vec![norm(y)];
        let mut support: Vec<usize> = Vec::with_capacity(paths);
        let mut selected = Vec::with_capacity(paths);
        let mut skipped = Vec::new();
        let mut alpha: Vec<Complex64> = Vec::new();
        let mut correlation_count = 0;

        for iteration in 0..paths {
            let sel = self.select(&residual)?;
            correlation_count += sel.correlations;
            let index = dictionary.flat_index(sel.direction, sel.distance);
            if support.contains(&index) {
                log::warn!(
                    "iteration {iteration}: atom ({}, {}) already selected, skipping (score {:.3e})",
                    sel.direction,
                    sel.distance,
                    sel.score
                );
                skipped.push(iteration);
                let residual_norm = *residual_norms.last().expect("non-empty");
                residual_norms.push(residual_norm);
                let atoms: Vec<&[Complex64]> =
                    support.iter().map(|&i| dictionary.atom_flat(i)).collect();
                observe(&Iteration {
                    iteration,
                    atoms: &atoms,
                    alpha: &alpha,
                    residual_norm,
                    correlations: correlation_count,
                });
                continue;
            }
            support.push(index);
            selected.push(SelectedAtom {
                iteration,
                direction_index: sel.direction,
                distance_index: sel.distance,
                u_t: dictionary.directions[sel.direction],
                distance: dictionary
                    .model
                    .is_curved()
                    .then(|| dictionary.distances[sel.distance]),
                score: sel.score,
            });

            let design = CMatrix::from_fn(samples, support.len(), |i, j| {
                source.projected_atom(support[j])[i]
            });
            alpha = solve_least_squares(&design, y)?;
            let fit = design.mul_vec(&alpha);
            for ((r, yi), f) in residual.iter_mut().zip(y).zip(&fit) {
                *r = yi - f;
            }
            let residual_norm = norm(&residual);
            residual_norms.push(residual_norm);

            let atoms: Vec<&[Complex64]> =
                support.iter().map(|&i| dictionary.atom_flat(i)).collect();
            observe(&Iteration {
                iteration,
                atoms: &atoms,
                alpha: &alpha,
                residual_norm,
                correlations: correlation_count,
            });
        }

        let mut h_hat = vec![Complex64::new(0.0, 0.0); dictionary.antennas];
        for (&i, a) in support.iter().zip(&alpha) {
            for (h, e) in h_hat.iter_mut().zip(dictionary.atom_flat(i)) {
                *h += a * e;
            }
        }
        Ok(EstimationResult {
            strategy: self.strategy,
            model: dictionary.model,
            selected,
            alpha,
            h_hat: ChannelVector {
                entries: h_hat,
                wavelength: dictionary.wavelength,
            },
            residual_norms,
            correlation_count,
            skipped,
        })
    }
}

/// One-shot wrapper around [`GreedyEstimator`].
pub fn greedy_estimate(
    y: &[Complex64],
    obs: &ObservationModel,
    pwm: Option<&Dictionary>,
    curved: Option<&Dictionary>,
    strategy: Strategy,
    paths: usize,
) -> Result<EstimationResult> {
    GreedyEstimator::new(strategy, obs, pwm, curved)?.estimate(y, paths)
}

/// `‖h − ĥ‖² / ‖h‖²`.
pub fn relative_error(h: &[Complex64], h_hat: &[Complex64]) -> Result<f64> {
    if h.len() != h_hat.len() {
        return invalid("channel and estimate lengths differ");
    }
    let energy = norm_sqr(h);
    if !(energy > 0.0) {
        return invalid("relative error is undefined for a zero channel");
    }
    let err: f64 = h.iter().zip(h_hat).map(|(a, b)| (a - b).norm_sqr()).sum();
    Ok(err / energy)
}
