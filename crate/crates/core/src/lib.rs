//! Plane, parabolic and spherical wavefront models for large antenna arrays.
//!
//! - [`geometry`]: array layouts, directions and rotations.
//! - [`wavemodels`]: excess path lengths, characteristic vectors and channel
//!   synthesis.
//! - [`validity`]: best single-path approximation error of each model and the
//!   Fraunhofer and Fresnel distances.
//! - [`estimation`]: dictionaries and orthogonal matching pursuit estimators.
//! - [`scenario`]: random multipath scenarios and the Monte-Carlo benchmark.
//!
//! ```
//! use wavefront::geometry::{make_ula, Vec3};
//! use wavefront::validity::{project_single_path, SearchSettings};
//! use wavefront::wavemodels::{synth_miso, Path, WaveModel};
//!
//! let lambda = 0.01;
//! let array = make_ula(16, lambda / 2.0)?;
//! let h = synth_miso(&array, &[Path::miso(1.0, 0.0, Vec3::Y, 2.0)?], WaveModel::Swm, lambda)?;
//! let p = project_single_path(&h, WaveModel::Pwm, &array, &SearchSettings::default())?;
//! assert!(p.rmae < 0.05);
//! # Ok::<(), wavefront::error::Error>(())
//! ```

pub mod error;
pub mod estimation;
pub mod geometry;
pub mod grids;
pub mod linalg;
pub mod scenario;
pub mod validity;
pub mod wavemodels;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/introduction.md")]
mod book_introduction {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/models.md")]
mod book_models {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/validity.md")]
mod book_validity {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/estimation.md")]
mod book_estimation {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/benchmark.md")]
mod book_benchmark {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
mod book_cli {}
