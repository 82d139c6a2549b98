//! Viewpoint leakage when the uploaded prediction error is exact.
//!
//! An attacker who sees the predicted viewpoint `P` and the error `e` knows
//! that the actual viewpoint lies on the circle of radius `e` around `P`. The
//! functions here give the attacker's best success probability for a required
//! precision `eps`, the attacker's selection rule, and the floor `eps / pi`
//! that no error distribution can push the leakage below.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sphere::{point_at_distance, sample_on_circle, Radians, SpherePoint};

/// Required inference precision `eps`, restricted to `(0, pi/2)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Precision(f64);

impl Precision {
    /// The usual precision for identification attacks, `0.1 pi`.
    pub const DEFAULT: Precision = Precision(0.1 * PI);

    pub fn new(eps: Radians) -> Result<Self> {
        if eps.is_finite() && eps > 0.0 && eps < 0.5 * PI {
            Ok(Precision(eps))
        } else {
            Err(Error::param("eps", eps, "must lie in (0, pi/2)"))
        }
    }

    pub fn value(self) -> Radians {
        self.0
    }
}

impl Default for Precision {
    fn default() -> Self {
        Self::DEFAULT
    }
}

impl TryFrom<f64> for Precision {
    type Error = Error;

    fn try_from(eps: f64) -> Result<Self> {
        Precision::new(eps)
    }
}

impl From<Precision> for f64 {
    fn from(eps: Precision) -> f64 {
        eps.0
    }
}

/// How a [`LeakageEstimate`] was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateMethod {
    Analytic,
    SampleMean,
    MonteCarlo,
}

/// A leakage probability together with where it came from.
///
/// `half_width` is only present for Monte-Carlo estimates and is the
/// 4-standard-deviation binomial half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeakageEstimate {
    value: f64,
    method: EstimateMethod,
    trials: Option<u64>,
    half_width: Option<f64>,
}

impl LeakageEstimate {
    pub fn analytic(value: f64) -> Self {
        LeakageEstimate {
            value: value.clamp(0.0, 1.0),
            method: EstimateMethod::Analytic,
            trials: None,
            half_width: None,
        }
    }

    pub fn sample_mean(value: f64, samples: u64) -> Self {
        LeakageEstimate {
            value: value.clamp(0.0, 1.0),
            method: EstimateMethod::SampleMean,
            trials: Some(samples),
            half_width: None,
        }
    }

    /// Binomial estimate from `hits` successes out of `trials`.
    pub fn monte_carlo(hits: u64, trials: u64) -> Self {
        let p = if trials == 0 {
            0.0
        } else {
            hits as f64 / trials as f64
        };
        let half_width = if trials == 0 {
            1.0
        } else {
            4.0 * (p * (1.0 - p) / trials as f64).sqrt()
        };
        LeakageEstimate {
            value: p,
            method: EstimateMethod::MonteCarlo,
            trials: Some(trials),
            half_width: Some(half_width),
        }
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn method(&self) -> EstimateMethod {
        self.method
    }

    pub fn trials(&self) -> Option<u64> {
        self.trials
    }

    pub fn half_width(&self) -> Option<f64> {
        self.half_width
    }
}

pub(crate) fn check_error(name: &'static str, e: Radians) -> Result<()> {
    if (0.0..=PI).contains(&e) {
        Ok(())
    } else {
        Err(Error::param(name, e, "must lie in [0, pi]"))
    }
}

/// `min(eps / (pi sin e), 1)`: the share of the circle of radius `e` that an
/// attacker's `eps`-neighbourhood covers when it sits on that circle.
pub(crate) fn arc_share(arc_half_length: f64, e: Radians) -> f64 {
    if arc_half_length <= 0.0 {
        return 0.0;
    }
    let s = e.sin();
    if s <= 0.0 {
        return 1.0;
    }
    (arc_half_length / (PI * s)).min(1.0)
}

/// Maximal conditional leakage probability for an exact uploaded error.
///
/// Equal to 1 when `e <= eps` or `e >= pi - eps` (the boundaries belong to
/// the certain-leakage branch), and `min(eps / (pi sin e), 1)` in between.
pub fn conditional_leakage(e: Radians, eps: Precision) -> Result<f64> {
    check_error("e", e)?;
    let eps = eps.value();
    if e <= eps || e >= PI - eps {
        Ok(1.0)
    } else {
        Ok(arc_share(eps, e))
    }
}

/// The attacker's choice of inferred viewpoint given `(P, e_reported)`.
///
/// Returns `P` itself when the reported error is within `eps`, the antipode
/// of `P` when it is within `eps` of `pi`, and otherwise a uniformly random
/// point on the circle of radius `e_reported` around `P`.
pub fn optimal_inferred_viewpoint<R: Rng + ?Sized>(
    p_tilde: &SpherePoint,
    e_reported: Radians,
    eps: Precision,
    rng: &mut R,
) -> Result<SpherePoint> {
    check_error("e_reported", e_reported)?;
    let eps = eps.value();
    if e_reported <= eps {
        Ok(*p_tilde)
    } else if e_reported >= PI - eps {
        Ok(p_tilde.antipode())
    } else {
        sample_on_circle(p_tilde, e_reported, rng)
    }
}

/// Same as [`optimal_inferred_viewpoint`] with the on-circle bearing given
/// explicitly.
pub fn inferred_viewpoint_at_bearing(
    p_tilde: &SpherePoint,
    e_reported: Radians,
    eps: Precision,
    bearing: Radians,
) -> Result<SpherePoint> {
    check_error("e_reported", e_reported)?;
    let eps = eps.value();
    if e_reported <= eps {
        Ok(*p_tilde)
    } else if e_reported >= PI - eps {
        Ok(p_tilde.antipode())
    } else {
        point_at_distance(p_tilde, e_reported, bearing)
    }
}

/// Sample-mean leakage over a set of measured prediction errors.
///
/// The sum runs in slice order, so the result is bit-reproducible.
pub fn leakage_sample_mean(errors: &[Radians], eps: Precision) -> Result<LeakageEstimate> {
    if errors.is_empty() {
        return Err(Error::Empty("prediction error samples"));
    }
    let mut total = 0.0;
    for &e in errors {
        total += conditional_leakage(e, eps)?;
    }
    Ok(LeakageEstimate::sample_mean(
        total / errors.len() as f64,
        errors.len() as u64,
    ))
}

/// Location `e0` of the leakage-minimising (point mass) error distribution
/// and the minimal leakage `eps / pi` it attains.
pub fn optimal_error_distribution(eps: Precision) -> (Radians, f64) {
    (0.5 * PI, eps.value() / PI)
}

/// Numerical check of the minimal achievable leakage.
///
/// Minimises the expected leakage over every discrete distribution supported
/// on the uniform grid `{pi i / (bins - 1)}`. The objective is linear in the
/// weights, so the optimum puts all mass on the best grid point.
pub fn min_leakage_grid_check(eps: Precision, bins: usize) -> Result<f64> {
    if bins < 2 {
        return Err(Error::param("bins", bins as f64, "need at least two grid points"));
    }
    let step = PI / (bins - 1) as f64;
    let mut best = f64::INFINITY;
    for i in 0..bins {
        let e = if i == bins - 1 { PI } else { step * i as f64 };
        best = best.min(conditional_leakage(e, eps)?);
    }
    Ok(best)
}
