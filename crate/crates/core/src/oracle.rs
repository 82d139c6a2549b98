//! Simulated attacker used to check the leakage formulas empirically.
//!
//! Nothing here calls the closed-form leakage expressions. Estimates come
//! from sampling actual viewpoints on the circle around the predicted one,
//! letting the attacker pick its guess, and counting guesses that land
//! within `eps`.

use std::f64::consts::PI;
use std::ops::RangeInclusive;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::leakage::{optimal_inferred_viewpoint, LeakageEstimate, Precision};
use crate::rng::stream;
use crate::sphere::{
    fibonacci_lattice, lattice_size_for_resolution, point_at_distance, sample_on_circle,
    spherical_distance, Radians, SpherePoint,
};

/// Trials are split into chunks with their own random streams, so results
/// do not depend on the number of worker threads.
const CHUNK: u64 = 4096;

/// Number of stratified viewpoints used to rank grid candidates.
const SCREEN_SAMPLES: usize = 2048;

const TAG_VIEWPOINT: u64 = 1;
const TAG_ATTACKER: u64 = 2;
const TAG_SCREEN: u64 = 3;
const TAG_CONFIRM: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    trials: u64,
    grid_resolution: Radians,
    seed: u64,
}

impl OracleConfig {
    pub const MIN_TRIALS: u64 = 1_000;

    pub fn new(trials: u64, grid_resolution: Radians, seed: u64) -> Result<Self> {
        if trials < Self::MIN_TRIALS {
            return Err(Error::param("trials", trials as f64, "must be at least 1000"));
        }
        if !(grid_resolution > 0.0 && grid_resolution <= 0.1) {
            return Err(Error::param(
                "grid_resolution",
                grid_resolution,
                "must lie in (0, 0.1]",
            ));
        }
        Ok(OracleConfig {
            trials,
            grid_resolution,
            seed,
        })
    }

    pub fn trials(&self) -> u64 {
        self.trials
    }

    pub fn grid_resolution(&self) -> Radians {
        self.grid_resolution
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            trials: 100_000,
            grid_resolution: 0.05,
            seed: 0,
        }
    }
}

/// Predicted viewpoint used by every simulation. Deliberately away from the
/// poles and the lattice's axis.
pub fn reference_point() -> SpherePoint {
    SpherePoint::from_lon_lat(0.7, 0.4).expect("finite longitude and latitude")
}

/// Sums `chunk_hits(chunk, len)` over the chunks covering `trials`.
fn chunked_hits<F>(trials: u64, chunk_hits: F) -> Result<u64>
where
    F: Fn(u64, u64) -> Result<u64> + Sync,
{
    (0..trials.div_ceil(CHUNK))
        .into_par_iter()
        .map(|chunk| chunk_hits(chunk, CHUNK.min(trials - chunk * CHUNK)))
        .try_reduce(|| 0, |a, b| Ok(a + b))
}

/// Fraction of trials in which the attacker's guess lands within `eps` of
/// the actual viewpoint, when the user reports `e + n` instead of `e`.
pub fn empirical_conditional_leakage(
    e: Radians,
    n: Radians,
    eps: Precision,
    cfg: &OracleConfig,
) -> Result<LeakageEstimate> {
    if !(0.0..=PI).contains(&e) {
        return Err(Error::param("e", e, "must lie in [0, pi]"));
    }
    if !n.is_finite() || n < -e || n > PI - e {
        return Err(Error::NoiseOutOfRange {
            error: e,
            noise: n,
            min: -e,
            max: PI - e,
        });
    }
    let reported = (e + n).clamp(0.0, PI);
    let p_tilde = reference_point();
    let hits = chunked_hits(cfg.trials, |chunk, len| {
        let mut view_rng = stream(cfg.seed, &[TAG_VIEWPOINT, chunk]);
        let mut attack_rng = stream(cfg.seed, &[TAG_ATTACKER, chunk]);
        let mut hits = 0;
        for _ in 0..len {
            let v = sample_on_circle(&p_tilde, e, &mut view_rng)?;
            let guess = optimal_inferred_viewpoint(&p_tilde, reported, eps, &mut attack_rng)?;
            if spherical_distance(&v, &guess) <= eps.value() {
                hits += 1;
            }
        }
        Ok(hits)
    })?;
    Ok(LeakageEstimate::monte_carlo(hits, cfg.trials))
}

/// Outcome of scanning a grid of candidate guesses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridAttack {
    /// Candidate with the highest screening score (first one on ties).
    pub best_point: SpherePoint,
    /// Distance from the predicted viewpoint to `best_point`.
    pub best_distance: Radians,
    /// Fresh Monte-Carlo estimate for `best_point`, independent of the
    /// samples used to select it.
    pub prob: LeakageEstimate,
    /// Highest screening score over all candidates.
    pub screen_max: f64,
    pub candidates: usize,
}

/// Brute-force attacker: tries every point of a near-uniform sphere grid as
/// its guess and keeps the one most often within `eps` of the actual
/// viewpoint, which is uniform on the circle of radius `e`.
pub fn grid_attacker_best(e: Radians, eps: Precision, cfg: &OracleConfig) -> Result<GridAttack> {
    grid_attacker_band(e, eps, cfg, 0.0..=PI)
}

/// As [`grid_attacker_best`], with candidates restricted to those whose
/// distance from the predicted viewpoint lies in `band`.
pub fn grid_attacker_band(
    e: Radians,
    eps: Precision,
    cfg: &OracleConfig,
    band: RangeInclusive<Radians>,
) -> Result<GridAttack> {
    let eps_v = eps.value();
    if !(e > eps_v && e < PI - eps_v) {
        return Err(Error::param("e", e, "must lie in (eps, pi - eps)"));
    }
    let p_tilde = reference_point();
    let candidates: Vec<(SpherePoint, Radians)> =
        fibonacci_lattice(lattice_size_for_resolution(cfg.grid_resolution))
            .into_iter()
            .map(|c| (c, spherical_distance(&p_tilde, &c)))
            .filter(|(_, d)| band.contains(d))
            .collect();
    if candidates.is_empty() {
        return Err(Error::Empty("grid candidates in the requested band"));
    }

    // Common stratified sample of actual viewpoints for ranking, so the
    // comparison between candidates is not dominated by sampling noise.
    let offset: f64 = stream(cfg.seed, &[TAG_SCREEN]).random();
    let viewpoints = (0..SCREEN_SAMPLES)
        .map(|k| {
            let bearing = 2.0 * PI * (k as f64 + offset) / SCREEN_SAMPLES as f64;
            point_at_distance(&p_tilde, e, bearing)
        })
        .collect::<Result<Vec<_>>>()?;
    let scores: Vec<usize> = candidates
        .par_iter()
        .map(|(c, _)| {
            viewpoints
                .iter()
                .filter(|v| spherical_distance(v, c) <= eps_v)
                .count()
        })
        .collect();
    let (best, &best_score) = scores
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
        .expect("non-empty candidate set");
    let (best_point, best_distance) = candidates[best];

    let hits = chunked_hits(cfg.trials, |chunk, len| {
        let mut rng = stream(cfg.seed, &[TAG_CONFIRM, chunk]);
        let mut hits = 0;
        for _ in 0..len {
            let v = sample_on_circle(&p_tilde, e, &mut rng)?;
            if spherical_distance(&v, &best_point) <= eps_v {
                hits += 1;
            }
        }
        Ok(hits)
    })?;

    Ok(GridAttack {
        best_point,
        best_distance,
        prob: LeakageEstimate::monte_carlo(hits, cfg.trials),
        screen_max: best_score as f64 / SCREEN_SAMPLES as f64,
        candidates: candidates.len(),
    })
}
