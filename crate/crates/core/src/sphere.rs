//! Points and distances on the unit viewing sphere.
//!
//! All angles are radians. Bearings are measured in the tangent plane of the
//! origin point: bearing 0 points toward the reference axis `+z`, and bearing
//! `pi/2` points along `reference x origin`. When the origin lies within `1e-9`
//! of the `+z`/`-z` axis the reference axis falls back to `+x`.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Angle in radians. Distances and prediction errors live in `[0, pi]`.
pub type Radians = f64;

/// Tolerance on `|p| = 1` after construction.
pub const UNIT_TOLERANCE: f64 = 1e-9;

const POLE_TOLERANCE: f64 = 1e-9;

/// A unit 3-vector: an actual, predicted or inferred viewpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct SpherePoint {
    x: f64,
    y: f64,
    z: f64,
}

impl SpherePoint {
    pub const NORTH: SpherePoint = SpherePoint {
        x: 0.0,
        y: 0.0,
        z: 1.0,
    };
    pub const X_AXIS: SpherePoint = SpherePoint {
        x: 1.0,
        y: 0.0,
        z: 0.0,
    };

    /// Builds a point from any non-zero finite vector, renormalising it.
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        if !(x.is_finite() && y.is_finite() && z.is_finite()) {
            return Err(Error::DegeneratePoint {
                x,
                y,
                z,
                reason: "non-finite coordinate",
            });
        }
        let norm = (x * x + y * y + z * z).sqrt();
        if norm < f64::MIN_POSITIVE.sqrt() {
            return Err(Error::DegeneratePoint {
                x,
                y,
                z,
                reason: "zero-length vector",
            });
        }
        Ok(SpherePoint {
            x: x / norm,
            y: y / norm,
            z: z / norm,
        })
    }

    /// Point at the given longitude (azimuth around `+z`) and latitude.
    pub fn from_lon_lat(lon: Radians, lat: Radians) -> Result<Self> {
        Self::new(lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin())
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    /// The diametrically opposite point.
    pub fn antipode(&self) -> SpherePoint {
        SpherePoint {
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }

    pub fn dot(&self, other: &SpherePoint) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    /// Longitude in `(-pi, pi]`.
    pub fn longitude(&self) -> Radians {
        self.y.atan2(self.x)
    }

    /// Latitude in `[-pi/2, pi/2]`.
    pub fn latitude(&self) -> Radians {
        self.z.clamp(-1.0, 1.0).asin()
    }

    fn cross(&self, other: &SpherePoint) -> [f64; 3] {
        [
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        ]
    }

    /// Orthonormal tangent basis `(toward_reference, east)` at this point.
    fn tangent_frame(&self) -> ([f64; 3], [f64; 3]) {
        let reference = if self.cross(&Self::NORTH).iter().map(|c| c * c).sum::<f64>().sqrt()
            < POLE_TOLERANCE
        {
            Self::X_AXIS
        } else {
            Self::NORTH
        };
        let along = reference.dot(self);
        let u = [
            reference.x - along * self.x,
            reference.y - along * self.y,
            reference.z - along * self.z,
        ];
        let norm = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
        let u = [u[0] / norm, u[1] / norm, u[2] / norm];
        // w = origin x u completes a right-handed frame.
        let w = [
            self.y * u[2] - self.z * u[1],
            self.z * u[0] - self.x * u[2],
            self.x * u[1] - self.y * u[0],
        ];
        (u, w)
    }
}

impl TryFrom<[f64; 3]> for SpherePoint {
    type Error = Error;

    fn try_from(v: [f64; 3]) -> Result<Self> {
        SpherePoint::new(v[0], v[1], v[2])
    }
}

impl From<SpherePoint> for [f64; 3] {
    fn from(p: SpherePoint) -> Self {
        p.to_array()
    }
}

/// Great-circle distance in `[0, pi]`.
///
/// Uses `atan2(|a x b|, a . b)`, which stays accurate near `0` and `pi`
/// where `acos` loses half of its digits.
pub fn spherical_distance(a: &SpherePoint, b: &SpherePoint) -> Radians {
    let c = a.cross(b);
    let sin = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
    sin.atan2(a.dot(b))
}

/// Point reached by travelling `distance` along the great circle leaving
/// `origin` at `bearing`.
pub fn point_at_distance(
    origin: &SpherePoint,
    distance: Radians,
    bearing: Radians,
) -> Result<SpherePoint> {
    if !(0.0..=PI).contains(&distance) {
        return Err(Error::param("distance", distance, "must lie in [0, pi]"));
    }
    if !bearing.is_finite() {
        return Err(Error::param("bearing", bearing, "must be finite"));
    }
    if distance == 0.0 {
        return Ok(*origin);
    }
    if distance == PI {
        return Ok(origin.antipode());
    }
    let (u, w) = origin.tangent_frame();
    let (sb, cb) = bearing.sin_cos();
    let (sd, cd) = distance.sin_cos();
    let dir = [
        cb * u[0] + sb * w[0],
        cb * u[1] + sb * w[1],
        cb * u[2] + sb * w[2],
    ];
    SpherePoint::new(
        cd * origin.x + sd * dir[0],
        cd * origin.y + sd * dir[1],
        cd * origin.z + sd * dir[2],
    )
}

/// Uniformly random point on the small circle of angular `radius` around
/// `center`. The returned point is exactly at that distance; only its
/// bearing is random.
pub fn sample_on_circle<R: Rng + ?Sized>(
    center: &SpherePoint,
    radius: Radians,
    rng: &mut R,
) -> Result<SpherePoint> {
    let bearing = rng.random_range(0.0..2.0 * PI);
    point_at_distance(center, radius, bearing)
}

/// Circumference `2 pi sin e` of the circle of points at distance `e`.
pub fn circle_circumference(e: Radians) -> Result<f64> {
    if !(0.0..=PI).contains(&e) {
        return Err(Error::param("e", e, "must lie in [0, pi]"));
    }
    Ok((2.0 * PI * e.sin()).max(0.0))
}

/// Near-uniform point set on the sphere (Fibonacci lattice) with `count`
/// points.
pub fn fibonacci_lattice(count: usize) -> Vec<SpherePoint> {
    let golden_angle = PI * (3.0 - 5f64.sqrt());
    let n = count as f64;
    (0..count)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden_angle * i as f64;
            SpherePoint {
                x: r * phi.cos(),
                y: r * phi.sin(),
                z,
            }
        })
        .collect()
}

/// Lattice size giving an average spacing of about `resolution` radians.
pub fn lattice_size_for_resolution(resolution: Radians) -> usize {
    (4.0 * PI / (resolution * resolution)).ceil() as usize
}
