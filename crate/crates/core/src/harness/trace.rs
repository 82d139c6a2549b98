use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sphere::{point_at_distance, Radians, SpherePoint};

/// Viewpoints of one user watching one video, one per GoP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionTrace {
    user_id: u32,
    video_id: u32,
    actual: Vec<SpherePoint>,
    predicted: Option<Vec<SpherePoint>>,
}

impl SessionTrace {
    pub const MIN_GOPS: usize = 3;

    pub fn new(
        user_id: u32,
        video_id: u32,
        actual: Vec<SpherePoint>,
        predicted: Option<Vec<SpherePoint>>,
    ) -> Result<Self> {
        let malformed = |reason: String| Error::MalformedTrace {
            user_id,
            video_id,
            reason,
        };
        if actual.len() < Self::MIN_GOPS {
            return Err(malformed(format!(
                "{} GoPs, at least {} required",
                actual.len(),
                Self::MIN_GOPS
            )));
        }
        if let Some(p) = &predicted {
            if p.len() != actual.len() {
                return Err(malformed(format!(
                    "{} predictions for {} GoPs",
                    p.len(),
                    actual.len()
                )));
            }
        }
        Ok(SessionTrace {
            user_id,
            video_id,
            actual,
            predicted,
        })
    }

    pub fn user_id(&self) -> u32 {
        self.user_id
    }

    pub fn video_id(&self) -> u32 {
        self.video_id
    }

    pub fn actual(&self) -> &[SpherePoint] {
        &self.actual
    }

    pub fn predicted(&self) -> Option<&[SpherePoint]> {
        self.predicted.as_deref()
    }

    pub fn len(&self) -> usize {
        self.actual.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actual.is_empty()
    }
}

/// Parameters of the synthetic head-motion model.
///
/// The viewpoint performs a random walk whose per-GoP step is von
/// Mises-Fisher distributed around the current point. Each trace draws its
/// own concentration `kappa * 2^u` with `u` uniform in
/// `[-heterogeneity, heterogeneity]`, so some users move much more than
/// others. Latitude stays within `max_abs_latitude`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSynthesis {
    pub concentration: f64,
    pub heterogeneity: f64,
    pub max_abs_latitude: Radians,
}

impl Default for TraceSynthesis {
    fn default() -> Self {
        TraceSynthesis {
            concentration: 35.0,
            heterogeneity: 1.0,
            max_abs_latitude: 1.2,
        }
    }
}

/// Attempts at drawing a step that stays inside the latitude band before
/// the walk stays put for one GoP.
const BAND_ATTEMPTS: usize = 32;

impl TraceSynthesis {
    pub fn validate(&self) -> Result<()> {
        if self.concentration.is_nan() || self.concentration <= 0.0 {
            return Err(Error::param("concentration", self.concentration, "must be positive"));
        }
        if !(self.heterogeneity.is_finite() && self.heterogeneity >= 0.0) {
            return Err(Error::param("heterogeneity", self.heterogeneity, "must be non-negative"));
        }
        if !(self.max_abs_latitude > 0.0 && self.max_abs_latitude <= 0.5 * PI) {
            return Err(Error::param(
                "max_abs_latitude",
                self.max_abs_latitude,
                "must lie in (0, pi/2]",
            ));
        }
        Ok(())
    }

    /// Draws one trace of `gops` viewpoints.
    pub fn generate<R: Rng + ?Sized>(
        &self,
        gops: usize,
        user_id: u32,
        video_id: u32,
        rng: &mut R,
    ) -> Result<SessionTrace> {
        self.validate()?;
        let kappa = if self.concentration.is_infinite() {
            f64::INFINITY
        } else {
            let u: f64 = rng.random_range(-1.0..=1.0);
            self.concentration * (self.heterogeneity * u).exp2()
        };
        let mut current = loop {
            let z: f64 = rng.random_range(-1.0..=1.0);
            let lon: f64 = rng.random_range(-PI..PI);
            let lat = z.asin();
            if lat.abs() <= self.max_abs_latitude {
                break SpherePoint::from_lon_lat(lon, lat)?;
            }
        };
        let mut actual = Vec::with_capacity(gops);
        for _ in 0..gops {
            actual.push(current);
            current = self.step(&current, kappa, rng)?;
        }
        SessionTrace::new(user_id, video_id, actual, None)
    }

    fn step<R: Rng + ?Sized>(&self, from: &SpherePoint, kappa: f64, rng: &mut R) -> Result<SpherePoint> {
        if kappa.is_infinite() {
            return Ok(*from);
        }
        for _ in 0..BAND_ATTEMPTS {
            let next = point_at_distance(from, vmf_angle(kappa, rng), rng.random_range(0.0..2.0 * PI))?;
            if next.latitude().abs() <= self.max_abs_latitude {
                return Ok(next);
            }
        }
        Ok(*from)
    }
}

/// Angle from the mean direction of a von Mises-Fisher variate on the
/// sphere. The cosine `w` has density proportional to `exp(kappa w)` on
/// `[-1, 1]` and is drawn by inverting its CDF.
fn vmf_angle<R: Rng + ?Sized>(kappa: f64, rng: &mut R) -> Radians {
    let u: f64 = rng.random();
    let w = 1.0 + (u + (1.0 - u) * (-2.0 * kappa).exp()).ln() / kappa;
    w.clamp(-1.0, 1.0).acos()
}

/// Predicts GoP `t` by repeating the viewpoint of GoP `t - horizon`; the
/// first `horizon` GoPs repeat the first viewpoint.
pub fn persistence_predict(viewpoints: &[SpherePoint], horizon: usize) -> Result<Vec<SpherePoint>> {
    if viewpoints.is_empty() {
        return Err(Error::Empty("viewpoints"));
    }
    Ok((0..viewpoints.len())
        .map(|t| viewpoints[t.saturating_sub(horizon)])
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::sphere::spherical_distance;

    fn errors(trace: &SessionTrace, horizon: usize) -> Vec<f64> {
        let pred = persistence_predict(trace.actual(), horizon).unwrap();
        (horizon..trace.len())
            .map(|t| spherical_distance(&pred[t], &trace.actual()[t]))
            .collect()
    }

    #[test]
    fn trace_needs_three_gops_and_matching_predictions() {
        let p = SpherePoint::NORTH;
        assert!(SessionTrace::new(0, 0, vec![p; 2], None).is_err());
        assert!(SessionTrace::new(0, 0, vec![p; 3], Some(vec![p; 2])).is_err());
        assert!(SessionTrace::new(0, 0, vec![p; 3], Some(vec![p; 3])).is_ok());
    }

    #[test]
    fn infinite_concentration_is_stationary() {
        let synth = TraceSynthesis {
            concentration: f64::INFINITY,
            ..TraceSynthesis::default()
        };
        let t = synth.generate(50, 1, 2, &mut stream(3, &[])).unwrap();
        assert!(t.actual().iter().all(|p| *p == t.actual()[0]));
        assert!(errors(&t, 2).iter().all(|&e| e == 0.0));
    }

    #[test]
    fn same_seed_same_trace() {
        let synth = TraceSynthesis::default();
        let a = synth.generate(40, 1, 2, &mut stream(9, &[1])).unwrap();
        let b = synth.generate(40, 1, 2, &mut stream(9, &[1])).unwrap();
        assert_eq!(a, b);
        let c = synth.generate(40, 1, 2, &mut stream(9, &[2])).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn latitude_stays_in_band() {
        let synth = TraceSynthesis {
            concentration: 3.0,
            max_abs_latitude: 0.5,
            ..TraceSynthesis::default()
        };
        let t = synth.generate(500, 0, 0, &mut stream(4, &[])).unwrap();
        assert!(t.actual().iter().all(|p| p.latitude().abs() <= 0.5 + 1e-12));
    }

    #[test]
    fn errors_straddle_the_default_precision() {
        let synth = TraceSynthesis::default();
        let t = synth.generate(1000, 0, 0, &mut stream(5, &[])).unwrap();
        let errs = errors(&t, 2);
        let eps = 0.1 * PI;
        let below = errs.iter().filter(|&&e| e <= eps).count();
        assert!(below > 0 && below < errs.len(), "{below} of {}", errs.len());
    }

    #[test]
    fn error_grows_with_horizon() {
        let synth = TraceSynthesis::default();
        let t = synth.generate(1000, 0, 0, &mut stream(6, &[])).unwrap();
        let mean = |h| {
            let e = errors(&t, h);
            e.iter().sum::<f64>() / e.len() as f64
        };
        assert!(mean(1) < mean(2));
        assert!(mean(2) < mean(3));
    }

    #[test]
    fn persistence_edges() {
        let pts: Vec<SpherePoint> = (0..4)
            .map(|i| SpherePoint::from_lon_lat(0.1 * i as f64, 0.0).unwrap())
            .collect();
        assert_eq!(persistence_predict(&pts, 0).unwrap(), pts);
        let p = persistence_predict(&pts, 2).unwrap();
        assert_eq!(p, vec![pts[0], pts[0], pts[0], pts[1]]);
        assert!(persistence_predict(&[], 1).is_err());
    }

    #[test]
    fn vmf_angle_mean_matches_density() {
        // For kappa = 10 the mean cosine is coth(kappa) - 1/kappa.
        let kappa = 10.0f64;
        let mut rng = stream(8, &[]);
        let n = 200_000;
        let mean_cos = (0..n).map(|_| vmf_angle(kappa, &mut rng).cos()).sum::<f64>() / n as f64;
        let want = 1.0 / kappa.tanh() - 1.0 / kappa;
        assert!((mean_cos - want).abs() < 1e-3, "{mean_cos} vs {want}");
    }
}
