//! Viewpoint-noise baselines and the PSPR metric.
//!
//! The baselines perturb the actual viewpoint itself, before prediction, by
//! adding zero-mean noise to each Cartesian coordinate and projecting back
//! onto the sphere. Their noise scale is the smallest one (on a grid) whose
//! sample-mean leakage over a calibration set meets the requirement.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bpea::PrivacyRequirement;
use crate::error::{Error, Result};
use crate::leakage::{leakage_sample_mean, Precision};
use crate::sphere::{Radians, SpherePoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Gaussian,
    Laplace,
}

impl NoiseKind {
    /// Upper end of the scale search.
    pub fn default_search_max(self) -> f64 {
        match self {
            NoiseKind::Gaussian => 7.0,
            NoiseKind::Laplace => 6.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            NoiseKind::Gaussian => "gaussian",
            NoiseKind::Laplace => "laplace",
        }
    }
}

/// Gaussian standard deviation or Laplace scale, in coordinate units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseScale {
    kind: NoiseKind,
    value: f64,
}

impl NoiseScale {
    pub fn new(kind: NoiseKind, value: f64) -> Result<Self> {
        if value.is_finite() && value >= 0.0 {
            Ok(NoiseScale { kind, value })
        } else {
            Err(Error::param("noise scale", value, "must be finite and non-negative"))
        }
    }

    pub fn gaussian(sigma: f64) -> Result<Self> {
        Self::new(NoiseKind::Gaussian, sigma)
    }

    pub fn laplace(b: f64) -> Result<Self> {
        Self::new(NoiseKind::Laplace, b)
    }

    pub fn kind(&self) -> NoiseKind {
        self.kind
    }

    pub fn value(&self) -> f64 {
        self.value
    }
}

fn perturb<R, F>(v: &SpherePoint, rng: &mut R, mut draw: F) -> SpherePoint
where
    R: Rng + ?Sized,
    F: FnMut(&mut R) -> f64,
{
    loop {
        let x = v.x() + draw(rng);
        let y = v.y() + draw(rng);
        let z = v.z() + draw(rng);
        // A zero or overflowing vector has probability ~0; draw again.
        if let Ok(p) = SpherePoint::new(x, y, z) {
            return p;
        }
    }
}

/// Adds `N(0, sigma^2)` to each coordinate and renormalises.
pub fn gaussian_obfuscate<R: Rng + ?Sized>(
    v: &SpherePoint,
    sigma: NoiseScale,
    rng: &mut R,
) -> Result<SpherePoint> {
    if sigma.kind != NoiseKind::Gaussian {
        return Err(Error::param("sigma", sigma.value, "expected a Gaussian scale"));
    }
    if sigma.value == 0.0 {
        return Ok(*v);
    }
    let normal = Normal::new(0.0, sigma.value)
        .map_err(|_| Error::param("sigma", sigma.value, "not a valid standard deviation"))?;
    Ok(perturb(v, rng, |r| normal.sample(r)))
}

/// Zero-mean Laplace variate with scale `b`, by inverting the CDF.
fn laplace_sample<R: Rng + ?Sized>(b: f64, rng: &mut R) -> f64 {
    // u in [-1/2, 1/2); u = -1/2 would give ln(0).
    loop {
        let u: f64 = rng.random::<f64>() - 0.5;
        if u > -0.5 {
            return -b * u.signum() * (1.0 - 2.0 * u.abs()).ln();
        }
    }
}

/// Adds zero-mean Laplace noise of scale `b` to each coordinate and
/// renormalises.
pub fn laplace_obfuscate<R: Rng + ?Sized>(
    v: &SpherePoint,
    b: NoiseScale,
    rng: &mut R,
) -> Result<SpherePoint> {
    if b.kind != NoiseKind::Laplace {
        return Err(Error::param("b", b.value, "expected a Laplace scale"));
    }
    if b.value == 0.0 {
        return Ok(*v);
    }
    Ok(perturb(v, rng, |r| laplace_sample(b.value, r)))
}

/// Dispatches on the kind of `scale`.
pub fn obfuscate_viewpoint<R: Rng + ?Sized>(
    v: &SpherePoint,
    scale: NoiseScale,
    rng: &mut R,
) -> Result<SpherePoint> {
    match scale.kind {
        NoiseKind::Gaussian => gaussian_obfuscate(v, scale, rng),
        NoiseKind::Laplace => laplace_obfuscate(v, scale, rng),
    }
}

/// Outcome of the scale search. `scale` is `None` when no scale up to the
/// search limit meets the requirement; `achieved_leakage` then refers to the
/// largest scale tried.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub kind: NoiseKind,
    pub scale: Option<NoiseScale>,
    pub achieved_leakage: f64,
    pub search_evals: usize,
}

impl CalibrationResult {
    pub fn is_feasible(&self) -> bool {
        self.scale.is_some()
    }
}

/// The grid `0, step, 2 step, ...` up to and including `search_max` (within
/// rounding).
pub fn scale_grid(kind: NoiseKind, search_max: f64, step: f64) -> Result<Vec<NoiseScale>> {
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::param("step", step, "must be positive"));
    }
    if !(search_max.is_finite() && search_max >= 0.0) {
        return Err(Error::param("search_max", search_max, "must be non-negative"));
    }
    let steps = (search_max / step + 1e-9).floor() as usize;
    (0..=steps)
        .map(|i| NoiseScale::new(kind, (i as f64 * step).min(search_max)))
        .collect()
}

/// Smallest scale on the search grid whose pipeline errors give sample-mean
/// leakage at most `q`.
///
/// `pipeline` maps a scale to the effective prediction errors it produces on
/// the calibration traces. Scales are tried in increasing order; leakage
/// need not be monotone in the scale, so the scan does not bisect.
pub fn calibrate_noise_scale<F>(
    mut pipeline: F,
    eps: Precision,
    q: PrivacyRequirement,
    kind: NoiseKind,
    search_max: f64,
    step: f64,
) -> Result<CalibrationResult>
where
    F: FnMut(NoiseScale) -> Result<Vec<Radians>>,
{
    let grid = scale_grid(kind, search_max, step)?;
    let mut last = f64::NAN;
    for (i, scale) in grid.iter().enumerate() {
        let errors = pipeline(*scale)?;
        if errors.is_empty() {
            return Err(Error::Empty("calibration errors"));
        }
        last = leakage_sample_mean(&errors, eps)?.value();
        if last <= q.value() {
            return Ok(CalibrationResult {
                kind,
                scale: Some(*scale),
                achieved_leakage: last,
                search_evals: i + 1,
            });
        }
    }
    Ok(CalibrationResult {
        kind,
        scale: None,
        achieved_leakage: last,
        search_evals: grid.len(),
    })
}

/// Leakage at every scale of the search grid, computed once so that many
/// requirements can be calibrated without rerunning the pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationScan {
    kind: NoiseKind,
    points: Vec<(NoiseScale, f64)>,
}

impl CalibrationScan {
    /// Evaluates `pipeline` at every grid scale, in parallel.
    pub fn run<F>(pipeline: F, eps: Precision, kind: NoiseKind, search_max: f64, step: f64) -> Result<Self>
    where
        F: Fn(NoiseScale) -> Result<Vec<Radians>> + Sync,
    {
        let grid = scale_grid(kind, search_max, step)?;
        let points = grid
            .par_iter()
            .map(|&scale| {
                let errors = pipeline(scale)?;
                if errors.is_empty() {
                    return Err(Error::Empty("calibration errors"));
                }
                Ok((scale, leakage_sample_mean(&errors, eps)?.value()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CalibrationScan { kind, points })
    }

    pub fn points(&self) -> &[(NoiseScale, f64)] {
        &self.points
    }

    /// Same answer as [`calibrate_noise_scale`] over the same grid.
    pub fn calibrate(&self, q: PrivacyRequirement) -> CalibrationResult {
        match self.points.iter().position(|&(_, leak)| leak <= q.value()) {
            Some(i) => CalibrationResult {
                kind: self.kind,
                scale: Some(self.points[i].0),
                achieved_leakage: self.points[i].1,
                search_evals: i + 1,
            },
            None => CalibrationResult {
                kind: self.kind,
                scale: None,
                achieved_leakage: self.points.last().map_or(f64::NAN, |p| p.1),
                search_evals: self.points.len(),
            },
        }
    }
}

/// Privacy requirement satisfaction ratio: the fraction of traces whose
/// leakage is at most `q`.
pub fn pspr(per_trace_leakage: &[f64], q: PrivacyRequirement) -> Result<f64> {
    if per_trace_leakage.is_empty() {
        return Err(Error::Empty("per-trace leakage"));
    }
    let met = per_trace_leakage
        .iter()
        .filter(|&&p| p <= q.value())
        .count();
    Ok(met as f64 / per_trace_leakage.len() as f64)
}
