//! Antenna array construction and the small amount of 3D geometry the channel
//! models need.
//!
//! Positions are always stored relative to the array centroid. The uniform
//! constructors put a linear array on the x axis and a planar array in the
//! x–y plane, so a linear array's broadside is +y and a planar array's is +z.

use std::io::Read;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Tolerance used when checking that a direction has unit length.
pub const UNIT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);
    pub const X: Vec3 = Vec3::new(1.0, 0.0, 0.0);
    pub const Y: Vec3 = Vec3::new(0.0, 1.0, 0.0);
    pub const Z: Vec3 = Vec3::new(0.0, 0.0, 1.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(self, other: Vec3) -> Vec3 {
        Vec3::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    pub fn norm_sqr(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Returns `None` for the zero vector.
    pub fn normalized(self) -> Option<Vec3> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| self * (1.0 / n))
    }

    pub fn is_unit(self) -> bool {
        (self.norm() - 1.0).abs() <= UNIT_TOLERANCE
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Unit vector in the x–y plane at `azimuth` radians from +x.
    pub fn from_azimuth(azimuth: f64) -> Vec3 {
        let (s, c) = azimuth.sin_cos();
        Vec3::new(c, s, 0.0)
    }

    fn component(self, i: usize) -> f64 {
        match i {
            0 => self.x,
            1 => self.y,
            _ => self.z,
        }
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

/// Shape of the affine span of an array's antenna positions.
///
/// The channel models only see a direction `u` through `a·u` and `‖a‖`, so
/// the span determines how many direction parameters are identifiable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ArrayLayout {
    /// Single antenna.
    Point,
    /// Collinear positions along `axis`; `broadside` is the fixed unit
    /// vector perpendicular to it used as the reference direction.
    Linear {
        axis: Vec3,
        broadside: Vec3,
    },
    /// Coplanar positions; `(e1, e2)` spans the plane and `normal` points to
    /// the front half-space.
    Planar {
        e1: Vec3,
        e2: Vec3,
        normal: Vec3,
    },
    Volumetric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AntennaArray {
    positions: Vec<Vec3>,
    label: String,
}

impl AntennaArray {
    /// Builds an array from arbitrary positions, shifting them so that the
    /// centroid sits at the origin. The applied shift (the original centroid)
    /// is returned next to the array.
    pub fn from_positions(positions: Vec<Vec3>, label: impl Into<String>) -> Result<(Self, Vec3)> {
        if positions.is_empty() {
            return invalid("an array needs at least one antenna");
        }
        if positions.iter().any(|p| !p.is_finite()) {
            return invalid("antenna positions must be finite");
        }
        let centroid = mean(&positions);
        let positions = positions.into_iter().map(|p| p - centroid).collect();
        Ok((
            Self {
                positions,
                label: label.into(),
            },
            centroid,
        ))
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn centroid(&self) -> Vec3 {
        mean(&self.positions)
    }

    /// Largest antenna distance from the centroid.
    pub fn aperture_radius(&self) -> f64 {
        self.positions.iter().map(|p| p.norm()).fold(0.0, f64::max)
    }

    /// Extent of the positions projected on `direction`: max(a·d) − min(a·d).
    pub fn extent_along(&self, direction: Vec3) -> f64 {
        let (lo, hi) = self
            .positions
            .iter()
            .map(|p| p.dot(direction))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            });
        hi - lo
    }

    /// Classifies the span of the positions and picks a deterministic frame for it.
    pub fn layout(&self) -> ArrayLayout {
        let radius = self.aperture_radius();
        let tol = 1e-9 * radius.max(f64::MIN_POSITIVE);
        if radius == 0.0 {
            return ArrayLayout::Point;
        }
        let Some(first) = self.farthest_from_span(&[]) else {
            return ArrayLayout::Point;
        };
        let Some(second) = self.farthest_from_span(&[first]).filter(|(_, d)| *d > tol) else {
            let axis = canonical_sign(first.0);
            let broadside = perpendicular_reference(axis, &[Vec3::Y, Vec3::Z]);
            return ArrayLayout::Linear { axis, broadside };
        };
        if self
            .farthest_from_span(&[first, second])
            .is_some_and(|(_, d)| d > tol)
        {
            return ArrayLayout::Volumetric;
        }
        let normal = canonical_sign(first.0.cross(second.0).normalized().unwrap_or(Vec3::Z));
        let e1 = perpendicular_reference(normal, &[Vec3::X, Vec3::Y]);
        let e2 = normal.cross(e1);
        ArrayLayout::Planar { e1, e2, normal }
    }

    /// Returns the unit direction of the position with the largest component
    /// orthogonal to the given orthonormal set, with that component's length.
    fn farthest_from_span(&self, basis: &[(Vec3, f64)]) -> Option<(Vec3, f64)> {
        let mut best: Option<(Vec3, f64)> = None;
        for p in &self.positions {
            let mut r = *p;
            for (b, _) in basis {
                r = r - *b * r.dot(*b);
            }
            let d = r.norm();
            if best.is_none_or(|(_, bd)| d > bd) {
                best = r.normalized().map(|u| (u, d));
            }
        }
        best
    }
}

fn mean(points: &[Vec3]) -> Vec3 {
    let n = points.len() as f64;
    let mut sum = Vec3::ZERO;
    for p in points {
        sum += *p;
    }
    sum * (1.0 / n)
}

/// Flips `v` so that its largest-magnitude component is positive.
fn canonical_sign(v: Vec3) -> Vec3 {
    let i = (0..3)
        .max_by(|&a, &b| v.component(a).abs().total_cmp(&v.component(b).abs()))
        .unwrap_or(0);
    if v.component(i) < 0.0 {
        -v
    } else {
        v
    }
}

/// First candidate whose component orthogonal to `v` is well defined, normalised.
fn perpendicular_reference(v: Vec3, candidates: &[Vec3]) -> Vec3 {
    candidates
        .iter()
        .chain([Vec3::X, Vec3::Y, Vec3::Z].iter())
        .filter_map(|c| {
            let r = *c - v * c.dot(v);
            (r.norm() > 1e-6).then(|| r.normalized()).flatten()
        })
        .next()
        .expect("one of the coordinate axes is always off a given line")
}

/// Uniform linear array of `n` antennas along the x axis.
pub fn make_ula(n: usize, spacing: f64) -> Result<AntennaArray> {
    if n == 0 {
        return invalid("ULA needs n >= 1");
    }
    if !(spacing > 0.0 && spacing.is_finite()) {
        return invalid(format!("ULA spacing must be positive, got {spacing}"));
    }
    let half = (n as f64 - 1.0) / 2.0;
    let positions = (0..n)
        .map(|i| Vec3::new((i as f64 - half) * spacing, 0.0, 0.0))
        .collect();
    Ok(AntennaArray {
        positions,
        label: format!("ula-{n}"),
    })
}

/// Uniform planar array of `nx × ny` antennas in the x–y plane, x varying fastest.
pub fn make_upa(nx: usize, ny: usize, spacing: f64) -> Result<AntennaArray> {
    if nx == 0 || ny == 0 {
        return invalid(format!("UPA dimensions must be >= 1, got {nx}x{ny}"));
    }
    if !(spacing > 0.0 && spacing.is_finite()) {
        return invalid(format!("UPA spacing must be positive, got {spacing}"));
    }
    let hx = (nx as f64 - 1.0) / 2.0;
    let hy = (ny as f64 - 1.0) / 2.0;
    let mut positions = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            positions.push(Vec3::new(
                (i as f64 - hx) * spacing,
                (j as f64 - hy) * spacing,
                0.0,
            ));
        }
    }
    Ok(AntennaArray {
        positions,
        label: format!("upa-{nx}x{ny}"),
    })
}

/// An array read from a position file, with the shift applied to centre it.
#[derive(Debug, Clone)]
pub struct LoadedArray {
    pub array: AntennaArray,
    /// Centroid of the positions as written in the file. Zero when the file
    /// was already centred.
    pub recentered_by: Vec3,
}

/// Reads a CSV position list with header `x,y,z` (meters), one antenna per row.
pub fn read_array_csv<R: Read>(reader: R, label: impl Into<String>) -> Result<LoadedArray> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::ArrayFile(e.to_string()))?
        .clone();
    let names: Vec<&str> = headers.iter().collect();
    if names != ["x", "y", "z"] {
        return Err(Error::ArrayFile(format!(
            "expected header `x,y,z`, found `{}`",
            names.join(",")
        )));
    }
    let mut positions = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::ArrayFile(e.to_string()))?;
        let mut coords = [0.0; 3];
        for (k, c) in coords.iter_mut().enumerate() {
            let field = record.get(k).unwrap_or("");
            *c = field.parse().map_err(|_| {
                Error::ArrayFile(format!("row {}: `{field}` is not a number", line + 2))
            })?;
        }
        positions.push(Vec3::new(coords[0], coords[1], coords[2]));
    }
    let (array, shift) = AntennaArray::from_positions(positions, label)?;
    if shift != Vec3::ZERO {
        log::warn!(
            "array positions re-centred by ({}, {}, {}) m",
            -shift.x,
            -shift.y,
            -shift.z
        );
    }
    Ok(LoadedArray {
        array,
        recentered_by: shift,
    })
}

pub fn load_array_csv(path: impl AsRef<Path>) -> Result<LoadedArray> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "array".to_owned());
    read_array_csv(file, label)
}

/// Proper 3×3 rotation matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation([[f64; 3]; 3]);

impl Rotation {
    pub const IDENTITY: Rotation = Rotation([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    pub fn matrix(&self) -> &[[f64; 3]; 3] {
        &self.0
    }

    pub fn apply(&self, v: Vec3) -> Vec3 {
        let m = &self.0;
        Vec3::new(
            m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
        )
    }

    pub fn transpose(&self) -> Rotation {
        let m = &self.0;
        let mut t = [[0.0; 3]; 3];
        for (i, row) in t.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = m[j][i];
            }
        }
        Rotation(t)
    }

    pub fn compose(&self, other: &Rotation) -> Rotation {
        let (a, b) = (&self.0, &other.0);
        let mut m = [[0.0; 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (0..3).map(|k| a[i][k] * b[k][j]).sum();
            }
        }
        Rotation(m)
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Rotation by `angle` radians about the unit vector `axis` (Rodrigues).
    pub fn about_axis(axis: Vec3, angle: f64) -> Rotation {
        let (s, c) = angle.sin_cos();
        let t = 1.0 - c;
        let Vec3 { x, y, z } = axis;
        Rotation([
            [c + x * x * t, x * y * t - z * s, x * z * t + y * s],
            [y * x * t + z * s, c + y * y * t, y * z * t - x * s],
            [z * x * t - y * s, z * y * t + x * s, c + z * z * t],
        ])
    }
}

/// Receiver-to-transmitter frame rotation `R` with `R·u_r = u_t`.
///
/// Built as the minimal rotation taking `u_r` onto `u_t`, followed by a
/// rotation of `delta` radians about `u_t`.
pub fn rotation_from_directions(u_t: Vec3, u_r: Vec3, delta: f64) -> Result<Rotation> {
    if !u_t.is_unit() || !u_r.is_unit() {
        return invalid("rotation directions must be unit vectors");
    }
    if !delta.is_finite() {
        return invalid("rotation angle must be finite");
    }
    let c = u_r.dot(u_t);
    if (u_r + u_t).norm() < 1e-9 {
        return Err(Error::DegenerateRotation);
    }
    let v = u_r.cross(u_t);
    // R = I + [v]x + [v]x^2 / (1 + c)
    let k = 1.0 / (1.0 + c);
    let vx = [[0.0, -v.z, v.y], [v.z, 0.0, -v.x], [-v.y, v.x, 0.0]];
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let sq: f64 = (0..3).map(|l| vx[i][l] * vx[l][j]).sum();
            m[i][j] = f64::from(u8::from(i == j)) + vx[i][j] + k * sq;
        }
    }
    Ok(Rotation::about_axis(u_t, delta).compose(&Rotation(m)))
}
