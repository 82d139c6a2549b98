//! Tile-based proactive streaming with a surrogate QoE score.
//!
//! The panorama is an equirectangular 4 x 8 tile grid. Each GoP the server
//! streams a rectangular zone around the predicted viewpoint, sized by the
//! uploaded prediction error, and spends a fixed per-GoP budget on tile
//! qualities. The viewer then looks at a 3 x 3 block around the actual
//! viewpoint and the session is scored from what was streamed there.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{obfuscate_viewpoint, NoiseScale};
use crate::bpea::Mechanism;
use crate::error::{Error, Result};
use crate::harness::{persistence_predict, SessionTrace};
use crate::leakage::{conditional_leakage, LeakageEstimate, Precision};
use crate::sphere::{spherical_distance, Radians, SpherePoint};

pub const TILE_ROWS: usize = 4;
pub const TILE_COLS: usize = 8;
pub const TILE_COUNT: usize = TILE_ROWS * TILE_COLS;

/// Slack on budget comparisons so that exact fits survive rounding.
const BUDGET_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Tile {
    pub row: usize,
    pub col: usize,
}

impl Tile {
    pub fn new(row: usize, col: usize) -> Result<Self> {
        if row < TILE_ROWS && col < TILE_COLS {
            Ok(Tile { row, col })
        } else {
            Err(Error::param("tile", (row * TILE_COLS + col) as f64, "outside the 4 x 8 grid"))
        }
    }

    /// Tile containing `p`. Row 0 touches the north pole, column 0 starts at
    /// longitude -pi.
    pub fn of(p: &SpherePoint) -> Tile {
        let lon = p.longitude();
        let lat = p.latitude();
        let col = (((lon + PI) / (2.0 * PI) * TILE_COLS as f64).floor() as isize)
            .rem_euclid(TILE_COLS as isize) as usize;
        let row = (((0.5 * PI - lat) / PI * TILE_ROWS as f64).floor() as isize)
            .clamp(0, TILE_ROWS as isize - 1) as usize;
        Tile { row, col }
    }

    pub fn index(self) -> usize {
        self.row * TILE_COLS + self.col
    }

    /// Column offset to `other` in `[-4, 4)`, going the short way round.
    fn col_offset(self, other: Tile) -> isize {
        let d = (other.col as isize - self.col as isize).rem_euclid(TILE_COLS as isize);
        if d >= TILE_COLS as isize / 2 {
            d - TILE_COLS as isize
        } else {
            d
        }
    }
}

/// `rows x cols` block around `center`. Rows are shifted to stay on the
/// grid; columns wrap across the seam.
pub fn tile_block(center: Tile, rows: usize, cols: usize) -> Vec<Tile> {
    let rows = rows.min(TILE_ROWS);
    let cols = cols.min(TILE_COLS);
    let top = (center.row as isize - (rows as isize - 1) / 2).clamp(0, (TILE_ROWS - rows) as isize) as usize;
    let left = center.col as isize - (cols as isize - 1) / 2;
    let mut tiles = Vec::with_capacity(rows * cols);
    for row in top..top + rows {
        for k in 0..cols as isize {
            let col = (left + k).rem_euclid(TILE_COLS as isize) as usize;
            tiles.push(Tile { row, col });
        }
    }
    tiles
}

/// The 3 x 3 field of view around a viewpoint's tile.
pub fn fov_tiles(center: Tile) -> Vec<Tile> {
    tile_block(center, 3, 3)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QualityLevel {
    Low,
    Mid,
    High,
}

impl QualityLevel {
    pub fn bitrate_mbps(self) -> f64 {
        match self {
            QualityLevel::Low => 1.8,
            QualityLevel::Mid => 2.7,
            QualityLevel::High => 6.0,
        }
    }

    /// Quality on a `[0, 1]` scale where a missing tile scores 0.
    pub fn score(self) -> f64 {
        match self {
            QualityLevel::Low => 1.0 / 3.0,
            QualityLevel::Mid => 2.0 / 3.0,
            QualityLevel::High => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ZoneShape {
    S3x3,
    S3x5,
    S3x7,
    S4x7,
    S4x8,
}

impl ZoneShape {
    /// Feasible shapes, smallest first.
    pub const ALL: [ZoneShape; 5] = [
        ZoneShape::S3x3,
        ZoneShape::S3x5,
        ZoneShape::S3x7,
        ZoneShape::S4x7,
        ZoneShape::S4x8,
    ];

    pub fn dims(self) -> (usize, usize) {
        match self {
            ZoneShape::S3x3 => (3, 3),
            ZoneShape::S3x5 => (3, 5),
            ZoneShape::S3x7 => (3, 7),
            ZoneShape::S4x7 => (4, 7),
            ZoneShape::S4x8 => (4, 8),
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn tile_count(self) -> usize {
        let (r, c) = self.dims();
        r * c
    }
}

/// A zone shape placed around the predicted viewpoint's tile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Zone {
    pub shape: ZoneShape,
    pub center: Tile,
}

impl Zone {
    pub fn tiles(&self) -> Vec<Tile> {
        let (r, c) = self.shape.dims();
        tile_block(self.center, r, c)
    }

    pub fn contains(&self, tile: Tile) -> bool {
        self.tiles().contains(&tile)
    }
}

/// Zone shape for an uploaded error: linear in the error, rounded, from
/// 3 x 3 at 0 to 4 x 8 at pi.
pub fn zone_from_error(e_uploaded: Radians) -> Result<ZoneShape> {
    if !(0.0..=PI).contains(&e_uploaded) {
        return Err(Error::param("e_uploaded", e_uploaded, "must lie in [0, pi]"));
    }
    let index = (4.0 * e_uploaded / PI).round() as usize;
    Ok(ZoneShape::ALL[index.min(4)])
}

/// Weights of the four QoE terms: gaze-tile quality, rest of the FoV,
/// temporal stability and absence of stalls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QoeWeights {
    pub central: f64,
    pub fov: f64,
    pub variation: f64,
    pub stall: f64,
}

impl QoeWeights {
    pub fn new(central: f64, fov: f64, variation: f64, stall: f64) -> Result<Self> {
        let w = [central, fov, variation, stall];
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::param("qoe weight", w.iter().copied().fold(0.0, f64::min), "must be non-negative"));
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::param("qoe weights", sum, "must sum to 1"));
        }
        Ok(QoeWeights {
            central,
            fov,
            variation,
            stall,
        })
    }
}

impl Default for QoeWeights {
    fn default() -> Self {
        QoeWeights {
            central: 0.4,
            fov: 0.3,
            variation: 0.15,
            stall: 0.15,
        }
    }
}

/// Timing, budget and scoring parameters of a streaming session.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub t_gop: f64,
    pub t_p_upload: f64,
    pub t_e_upload: f64,
    pub t_ps: f64,
    /// Data that can be delivered per GoP, in Mbit.
    pub budget_mbit: f64,
    pub weights: QoeWeights,
    /// GoPs between the last viewpoint the predictor sees and the GoP it
    /// predicts.
    pub horizon_gops: usize,
}

impl SessionConfig {
    /// 4K for the 9 pFoV tiles and 720p for the other 23 tiles of a full
    /// panorama, per 1 s GoP.
    pub const DEFAULT_BUDGET_MBIT: f64 = 95.4;

    pub fn with_budget(budget_mbit: f64) -> Result<Self> {
        let cfg = SessionConfig {
            budget_mbit,
            ..SessionConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.budget_mbit.is_finite() && self.budget_mbit >= 0.0) {
            return Err(Error::param("budget_mbit", self.budget_mbit, "must be non-negative"));
        }
        if self.t_gop.is_nan() || self.t_gop <= 0.0 {
            return Err(Error::param("t_gop", self.t_gop, "must be positive"));
        }
        if self.t_p_upload + self.t_ps > self.t_gop + 1e-12 {
            return Err(Error::param(
                "t_ps",
                self.t_ps,
                "prediction upload plus proactive streaming must fit in one GoP",
            ));
        }
        QoeWeights::new(
            self.weights.central,
            self.weights.fov,
            self.weights.variation,
            self.weights.stall,
        )?;
        Ok(())
    }
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            t_gop: 1.0,
            t_p_upload: 0.05,
            t_e_upload: 0.05,
            t_ps: 0.95,
            budget_mbit: Self::DEFAULT_BUDGET_MBIT,
            weights: QoeWeights::default(),
            horizon_gops: 2,
        }
    }
}

/// Quality chosen for every tile in one GoP (`None` = not streamed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub levels: Vec<Option<QualityLevel>>,
    pub used_mbit: f64,
    /// Set when the budget cannot carry the whole zone at low quality.
    pub under_provisioned: bool,
}

impl Allocation {
    pub fn level(&self, tile: Tile) -> Option<QualityLevel> {
        self.levels[tile.index()]
    }
}

/// Smallest feasible shape around `center` containing `tile`; used to
/// order tiles outward from the predicted viewpoint.
fn ring(center: Tile, tile: Tile) -> usize {
    ZoneShape::ALL
        .iter()
        .position(|&shape| Zone { shape, center }.contains(tile))
        .unwrap_or(ZoneShape::ALL.len())
}

/// Tiles sorted outward from `center`: by ring, then column offset, then
/// row offset, then position.
fn outward_order(center: Tile, tiles: impl IntoIterator<Item = Tile>) -> Vec<Tile> {
    let mut tiles: Vec<Tile> = tiles.into_iter().collect();
    tiles.sort_by_key(|&t| {
        (
            ring(center, t),
            center.col_offset(t).unsigned_abs(),
            t.row.abs_diff(center.row),
            t.row,
            t.col,
        )
    });
    tiles
}

/// Greedy quality allocation for one GoP.
///
/// First every zone tile gets low quality. The rest of the budget upgrades
/// tiles to high, in order: the pFoV centre, the other pFoV tiles, the rest
/// of the zone outward, then tiles outside the zone outward. A step is taken
/// only if its cost fits the remaining budget; later, cheaper steps may
/// still fit after an expensive one is skipped.
pub fn allocate_quality(zone: &Zone, pfov: &[Tile], cfg: &SessionConfig) -> Allocation {
    let budget = cfg.budget_mbit;
    let mut levels = vec![None; TILE_COUNT];
    let mut used = 0.0;
    let mut under_provisioned = false;

    let center = zone.center;
    let zone_tiles = zone.tiles();
    let mut order: Vec<Tile> = Vec::with_capacity(zone_tiles.len());
    if zone_tiles.contains(&center) {
        order.push(center);
    }
    order.extend(outward_order(
        center,
        pfov.iter().copied().filter(|t| *t != center && zone_tiles.contains(t)),
    ));
    order.extend(outward_order(
        center,
        zone_tiles.iter().copied().filter(|t| !order.contains(t)),
    ));

    let take = |cost: f64, used: &mut f64| {
        if *used + cost <= budget + BUDGET_SLACK {
            *used += cost;
            true
        } else {
            false
        }
    };

    let low = QualityLevel::Low.bitrate_mbps() * cfg.t_gop;
    for &t in &order {
        if take(low, &mut used) {
            levels[t.index()] = Some(QualityLevel::Low);
        } else {
            under_provisioned = true;
        }
    }
    let upgrade = (QualityLevel::High.bitrate_mbps() - QualityLevel::Low.bitrate_mbps()) * cfg.t_gop;
    for &t in &order {
        if levels[t.index()] == Some(QualityLevel::Low) && take(upgrade, &mut used) {
            levels[t.index()] = Some(QualityLevel::High);
        }
    }
    if !under_provisioned {
        let high = QualityLevel::High.bitrate_mbps() * cfg.t_gop;
        let outside = (0..TILE_COUNT)
            .map(|i| Tile {
                row: i / TILE_COLS,
                col: i % TILE_COLS,
            })
            .filter(|t| !zone_tiles.contains(t));
        for t in outward_order(center, outside) {
            if take(high, &mut used) {
                levels[t.index()] = Some(QualityLevel::High);
            }
        }
    }
    Allocation {
        levels,
        used_mbit: used,
        under_provisioned,
    }
}

/// What the viewer saw in one GoP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GopView {
    /// Tile of the actual viewpoint.
    pub gaze: Tile,
    pub zone: Zone,
    pub allocation: Allocation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QoEReport {
    pub qoe: f64,
    /// Fraction of actual-FoV tiles that fell inside the streamed zone.
    pub fov_coverage: f64,
    /// Mean quality score over all actual-FoV tiles, in `[0, 1]`.
    pub mean_fov_quality: f64,
    pub central_quality: f64,
    pub quality_variation: f64,
    pub stall_fraction: f64,
    pub under_provisioned_gops: usize,
}

fn tile_score(level: Option<QualityLevel>) -> f64 {
    level.map_or(0.0, QualityLevel::score)
}

/// Surrogate QoE in `[1, 5]`:
/// `1 + 4 (w1 central + w2 fov + w3 (1 - variation) + w4 (1 - stall))`.
///
/// A GoP stalls when any actual-FoV tile was not streamed. Variation is the
/// change of mean FoV quality from the previous GoP, and 1 for a stalled
/// GoP.
pub fn qoe_score(per_gop: &[GopView], cfg: &SessionConfig) -> Result<QoEReport> {
    if per_gop.is_empty() {
        return Err(Error::Empty("GoP list"));
    }
    let n = per_gop.len() as f64;
    let (mut central, mut fov_rest, mut fov_all) = (0.0, 0.0, 0.0);
    let (mut variation, mut stalls, mut covered, mut fov_total) = (0.0, 0usize, 0usize, 0usize);
    let mut under = 0;
    let mut previous: Option<f64> = None;
    for gop in per_gop {
        let fov = fov_tiles(gop.gaze);
        let zone_tiles = gop.zone.tiles();
        let gaze_score = tile_score(gop.allocation.level(gop.gaze));
        let rest: Vec<f64> = fov
            .iter()
            .filter(|t| **t != gop.gaze)
            .map(|t| tile_score(gop.allocation.level(*t)))
            .collect();
        let mean_fov = (gaze_score + rest.iter().sum::<f64>()) / fov.len() as f64;
        central += gaze_score;
        fov_rest += rest.iter().sum::<f64>() / rest.len() as f64;
        fov_all += mean_fov;
        covered += fov.iter().filter(|t| zone_tiles.contains(t)).count();
        fov_total += fov.len();
        let stalled = fov.iter().any(|t| gop.allocation.level(*t).is_none());
        if stalled {
            stalls += 1;
            variation += 1.0;
        } else if let Some(prev) = previous {
            variation += (mean_fov - prev).abs();
        }
        previous = Some(mean_fov);
        if gop.allocation.under_provisioned {
            under += 1;
        }
    }
    let w = cfg.weights;
    let central = central / n;
    let fov_rest = fov_rest / n;
    let quality_variation = (variation / n).clamp(0.0, 1.0);
    let stall_fraction = stalls as f64 / n;
    let qoe = 1.0
        + 4.0
            * (w.central * central
                + w.fov * fov_rest
                + w.variation * (1.0 - quality_variation)
                + w.stall * (1.0 - stall_fraction));
    Ok(QoEReport {
        qoe: qoe.clamp(1.0, 5.0),
        fov_coverage: covered as f64 / fov_total as f64,
        mean_fov_quality: fov_all / n,
        central_quality: central,
        quality_variation,
        stall_fraction,
        under_provisioned_gops: under,
    })
}

/// How the user hides its viewpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObfuscationPolicy {
    /// Upload the measured error unchanged.
    None,
    /// Add optimal noise to the measured error before uploading it.
    Bpea(Mechanism),
    /// Perturb viewpoints before they reach the predictor.
    Viewpoint(NoiseScale),
}

impl ObfuscationPolicy {
    pub fn name(&self) -> &'static str {
        match self {
            ObfuscationPolicy::None => "none",
            ObfuscationPolicy::Bpea(_) => "bpea",
            ObfuscationPolicy::Viewpoint(s) => s.kind().name(),
        }
    }
}

/// Everything measured in one simulated session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionOutcome {
    pub qoe: QoEReport,
    /// Sample mean of the per-GoP leakage probabilities.
    pub leakage: LeakageEstimate,
    /// Largest per-GoP leakage probability.
    pub max_leakage: f64,
    /// Mean error the user uploaded.
    pub mean_uploaded_error: Radians,
    /// Mean distance between the prediction and the true viewpoint.
    pub mean_effective_error: Radians,
    /// Mean `|n|` for B-PEA, mean viewpoint displacement for the baselines.
    pub mean_abs_noise: Radians,
    /// Most data streamed in any single GoP.
    pub peak_mbit: f64,
    pub scored_gops: usize,
}

/// Runs one viewing session.
///
/// GoP `t` is predicted from the viewpoint at `t - horizon` (or taken from
/// the trace's own predictions, for the policies that leave viewpoints
/// untouched). GoPs before the horizon have no genuine prediction and are
/// not scored. Per scored GoP the user uploads the prediction and an error,
/// the zone is sized from that error and streamed, and the attacker's
/// success probability for the upload is recorded.
pub fn simulate_session<R: Rng + ?Sized>(
    trace: &SessionTrace,
    policy: &ObfuscationPolicy,
    cfg: &SessionConfig,
    eps: Precision,
    rng: &mut R,
) -> Result<SessionOutcome> {
    cfg.validate()?;
    let ctx = || format!("session (user {}, video {})", trace.user_id(), trace.video_id());
    let actual = trace.actual();
    let horizon = cfg.horizon_gops;
    if actual.len() <= horizon {
        return Err(Error::MalformedTrace {
            user_id: trace.user_id(),
            video_id: trace.video_id(),
            reason: format!("{} GoPs leave none to score at horizon {horizon}", actual.len()),
        });
    }

    let mut mean_abs_noise = 0.0;
    let predicted: Vec<SpherePoint> = match policy {
        ObfuscationPolicy::Viewpoint(scale) => {
            let noisy = actual
                .iter()
                .map(|v| obfuscate_viewpoint(v, *scale, rng))
                .collect::<Result<Vec<_>>>()?;
            let displaced: f64 = actual
                .iter()
                .zip(&noisy)
                .map(|(a, b)| spherical_distance(a, b))
                .sum();
            mean_abs_noise = displaced / actual.len() as f64;
            persistence_predict(&noisy, horizon)?
        }
        _ => match trace.predicted() {
            Some(p) => p.to_vec(),
            None => persistence_predict(actual, horizon)?,
        },
    };

    let scored = actual.len() - horizon;
    let mut views = Vec::with_capacity(scored);
    let mut samples = Vec::with_capacity(scored);
    let (mut uploaded_sum, mut effective_sum, mut noise_sum) = (0.0, 0.0, 0.0);
    let mut peak: f64 = 0.0;
    for t in horizon..actual.len() {
        let p_tilde = predicted[t];
        let e = spherical_distance(&p_tilde, &actual[t]);
        let (uploaded, leak) = match policy {
            ObfuscationPolicy::Bpea(mech) => {
                let o = mech.apply(e).map_err(|err| err.context(ctx()))?;
                noise_sum += o.noise.abs();
                (o.uploaded, o.leakage)
            }
            _ => (e, conditional_leakage(e, eps)?),
        };
        samples.push(leak);
        uploaded_sum += uploaded;
        effective_sum += e;

        let center = Tile::of(&p_tilde);
        let zone = Zone {
            shape: zone_from_error(uploaded)?,
            center,
        };
        let allocation = allocate_quality(&zone, &fov_tiles(center), cfg);
        peak = peak.max(allocation.used_mbit);
        views.push(GopView {
            gaze: Tile::of(&actual[t]),
            zone,
            allocation,
        });
    }
    if matches!(policy, ObfuscationPolicy::Bpea(_)) {
        mean_abs_noise = noise_sum / scored as f64;
    }
    let n = scored as f64;
    Ok(SessionOutcome {
        qoe: qoe_score(&views, cfg)?,
        leakage: leakage_from_samples(&samples)?,
        max_leakage: samples.iter().copied().fold(0.0, f64::max),
        mean_uploaded_error: uploaded_sum / n,
        mean_effective_error: effective_sum / n,
        mean_abs_noise,
        peak_mbit: peak,
        scored_gops: scored,
    })
}

/// Sample mean of per-GoP leakage probabilities, summed in order.
fn leakage_from_samples(samples: &[f64]) -> Result<LeakageEstimate> {
    if samples.is_empty() {
        return Err(Error::Empty("leakage samples"));
    }
    Ok(LeakageEstimate::sample_mean(
        samples.iter().sum::<f64>() / samples.len() as f64,
        samples.len() as u64,
    ))
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::bpea::{PrivacyRequirement, SolverMargin};
    use crate::harness::TraceSynthesis;
    use crate::rng::stream;
    use proptest::prelude::*;

    fn eps() -> Precision {
        Precision::new(0.1 * PI).unwrap()
    }

    fn tile(row: usize, col: usize) -> Tile {
        Tile::new(row, col).unwrap()
    }

    fn cfg(budget: f64) -> SessionConfig {
        SessionConfig::with_budget(budget).unwrap()
    }

    fn count(a: &Allocation, level: QualityLevel) -> usize {
        a.levels.iter().filter(|l| **l == Some(level)).count()
    }

    #[test]
    fn tile_lookup_and_seam() {
        assert_eq!(Tile::of(&SpherePoint::NORTH), tile(0, 4));
        let p = SpherePoint::from_lon_lat(-PI + 1e-9, -0.1).unwrap();
        assert_eq!(Tile::of(&p), tile(2, 0));
        let q = SpherePoint::from_lon_lat(PI - 1e-9, 0.1).unwrap();
        assert_eq!(Tile::of(&q), tile(1, 7));
        assert!(Tile::new(4, 0).is_err());
    }

    #[test]
    fn blocks_wrap_columns_and_shift_rows() {
        let b = tile_block(tile(0, 0), 3, 3);
        assert_eq!(b.len(), 9);
        assert!(b.contains(&tile(0, 7)) && b.contains(&tile(2, 1)));
        assert!(b.iter().all(|t| t.row <= 2));
        let full = tile_block(tile(3, 5), 4, 8);
        let mut idx: Vec<usize> = full.iter().map(|t| t.index()).collect();
        idx.sort_unstable();
        assert_eq!(idx, (0..TILE_COUNT).collect::<Vec<_>>());
    }

    #[test]
    fn zone_examples() {
        assert_eq!(zone_from_error(0.0).unwrap(), ZoneShape::S3x3);
        assert_eq!(zone_from_error(PI).unwrap(), ZoneShape::S4x8);
        assert_eq!(zone_from_error(0.5 * PI).unwrap(), ZoneShape::S3x7);
        assert_eq!(zone_from_error(0.1 * PI).unwrap(), ZoneShape::S3x3);
        assert_eq!(zone_from_error(0.2 * PI).unwrap(), ZoneShape::S3x5);
        assert!(zone_from_error(-0.1).is_err());
        assert!(zone_from_error(PI + 1e-9).is_err());
        assert!(zone_from_error(f64::NAN).is_err());
    }

    #[test]
    fn exact_low_budget_fills_zone_without_upgrades() {
        let zone = Zone {
            shape: ZoneShape::S3x3,
            center: tile(1, 3),
        };
        let a = allocate_quality(&zone, &fov_tiles(zone.center), &cfg(9.0 * 1.8));
        assert!(!a.under_provisioned);
        assert_eq!(count(&a, QualityLevel::Low), 9);
        assert_eq!(count(&a, QualityLevel::High), 0);
    }

    #[test]
    fn default_budget_covers_panorama_with_high_pfov() {
        let zone = Zone {
            shape: ZoneShape::S4x8,
            center: tile(1, 6),
        };
        let pfov = fov_tiles(zone.center);
        let a = allocate_quality(&zone, &pfov, &SessionConfig::default());
        assert!(!a.under_provisioned);
        assert_eq!(count(&a, QualityLevel::High), 9);
        assert_eq!(count(&a, QualityLevel::Low), 23);
        assert!(pfov.iter().all(|t| a.level(*t) == Some(QualityLevel::High)));
        assert!((a.used_mbit - 95.4).abs() < 1e-9);
    }

    #[test]
    fn zero_budget_streams_nothing() {
        let zone = Zone {
            shape: ZoneShape::S3x5,
            center: tile(2, 2),
        };
        let a = allocate_quality(&zone, &fov_tiles(zone.center), &cfg(0.0));
        assert!(a.under_provisioned);
        assert!(a.levels.iter().all(Option::is_none));
        assert_eq!(a.used_mbit, 0.0);
    }

    #[test]
    fn short_budget_keeps_centre_first() {
        let zone = Zone {
            shape: ZoneShape::S3x3,
            center: tile(1, 1),
        };
        let a = allocate_quality(&zone, &fov_tiles(zone.center), &cfg(1.8));
        assert!(a.under_provisioned);
        assert_eq!(a.level(zone.center), Some(QualityLevel::Low));
        assert_eq!(count(&a, QualityLevel::Low), 1);
    }

    fn steady(level: Option<QualityLevel>, gops: usize) -> Vec<GopView> {
        let center = tile(1, 4);
        let zone = Zone {
            shape: ZoneShape::S3x3,
            center,
        };
        let mut levels = vec![None; TILE_COUNT];
        for t in fov_tiles(center) {
            levels[t.index()] = level;
        }
        let view = GopView {
            gaze: center,
            zone,
            allocation: Allocation {
                levels,
                used_mbit: 0.0,
                under_provisioned: false,
            },
        };
        vec![view; gops]
    }

    #[test]
    fn qoe_reference_values() {
        let c = SessionConfig::default();
        assert_eq!(qoe_score(&steady(Some(QualityLevel::High), 5), &c).unwrap().qoe, 5.0);
        let none = qoe_score(&steady(None, 5), &c).unwrap();
        assert_eq!(none.qoe, 1.0);
        assert_eq!(none.stall_fraction, 1.0);
        let low = qoe_score(&steady(Some(QualityLevel::Low), 5), &c).unwrap();
        let want = 1.0 + 4.0 * (0.4 / 3.0 + 0.3 / 3.0 + 0.15 + 0.15);
        assert!((low.qoe - want).abs() < 1e-12, "{}", low.qoe);
        assert!(qoe_score(&[], &c).is_err());
    }

    fn stationary_trace(gops: usize) -> SessionTrace {
        let p = SpherePoint::from_lon_lat(0.3, 0.2).unwrap();
        SessionTrace::new(0, 0, vec![p; gops], None).unwrap()
    }

    #[test]
    fn perfect_prediction_streams_smallest_zone_and_leaks() {
        let t = stationary_trace(12);
        let out = simulate_session(&t, &ObfuscationPolicy::None, &SessionConfig::default(), eps(), &mut stream(0, &[]))
            .unwrap();
        assert_eq!(out.scored_gops, 10);
        assert_eq!(out.leakage.value(), 1.0);
        assert_eq!(out.mean_uploaded_error, 0.0);
        assert_eq!(out.qoe.stall_fraction, 0.0);
        assert_eq!(out.qoe.qoe, 5.0);
    }

    fn mech(q: f64) -> ObfuscationPolicy {
        ObfuscationPolicy::Bpea(Mechanism::new(eps(), PrivacyRequirement::new(q).unwrap(), SolverMargin::DEFAULT))
    }

    #[test]
    fn bpea_extremes() {
        let synth = TraceSynthesis::default();
        let c = SessionConfig::default();
        for seed in 0..4 {
            let t = synth.generate(40, 0, 0, &mut stream(seed, &[])).unwrap();
            let none = simulate_session(&t, &ObfuscationPolicy::None, &c, eps(), &mut stream(1, &[])).unwrap();
            let tight = simulate_session(&t, &mech(0.0), &c, eps(), &mut stream(1, &[])).unwrap();
            assert_eq!(tight.max_leakage, 0.0);
            let loose = simulate_session(&t, &mech(1.0), &c, eps(), &mut stream(1, &[])).unwrap();
            assert_eq!(loose.qoe, none.qoe);
            assert_eq!(loose.mean_abs_noise, 0.0);
            assert_eq!(loose.leakage.value(), none.leakage.value());
        }
    }

    /// Positive noise widens the zone, and at the default budget a wider
    /// zone still carries a high-quality pFoV, so a missed prediction can be
    /// rescued. More noise therefore does not always mean lower QoE.
    #[test]
    fn noise_can_raise_qoe_by_widening_the_zone() {
        let synth = TraceSynthesis::default();
        let c = SessionConfig::default();
        let raised = (0..50).find(|&seed| {
            let t = synth.generate(30, 0, 0, &mut stream(seed, &[9])).unwrap();
            let none = simulate_session(&t, &ObfuscationPolicy::None, &c, eps(), &mut stream(0, &[])).unwrap();
            let noisy = simulate_session(&t, &mech(0.0), &c, eps(), &mut stream(0, &[])).unwrap();
            noisy.mean_abs_noise > 0.0 && noisy.qoe.qoe > none.qoe.qoe
        });
        assert!(raised.is_some());
    }

    #[test]
    fn too_short_for_horizon_is_rejected() {
        let t = stationary_trace(3);
        let c = SessionConfig {
            horizon_gops: 3,
            ..SessionConfig::default()
        };
        assert!(simulate_session(&t, &ObfuscationPolicy::None, &c, eps(), &mut stream(0, &[])).is_err());
    }

    proptest! {
        #[test]
        fn zone_grows_with_error(a in 0.0..=PI, b in 0.0..=PI) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(zone_from_error(lo).unwrap() <= zone_from_error(hi).unwrap());
        }

        #[test]
        fn allocation_respects_budget(
            shape in 0usize..5,
            row in 0usize..TILE_ROWS,
            col in 0usize..TILE_COLS,
            budget in 0.0f64..250.0,
        ) {
            let zone = Zone { shape: ZoneShape::ALL[shape], center: tile(row, col) };
            let a = allocate_quality(&zone, &fov_tiles(zone.center), &cfg(budget));
            let spent: f64 = a.levels.iter().flatten().map(|l| l.bitrate_mbps()).sum();
            prop_assert!((spent - a.used_mbit).abs() < 1e-9);
            prop_assert!(a.used_mbit <= budget + 1e-9);
            let zone_full = zone.tiles().iter().all(|t| a.level(*t).is_some());
            prop_assert_eq!(a.under_provisioned, !zone_full);
        }

        #[test]
        fn qoe_within_bounds(seed in 0u64..200, budget in 0.0f64..200.0, sigma in 0.0f64..1.5) {
            let t = TraceSynthesis::default().generate(12, 0, 0, &mut stream(seed, &[])).unwrap();
            let policy = ObfuscationPolicy::Viewpoint(NoiseScale::gaussian(sigma).unwrap());
            let out = simulate_session(&t, &policy, &cfg(budget), eps(), &mut stream(seed, &[1])).unwrap();
            prop_assert!((1.0..=5.0).contains(&out.qoe.qoe));
            prop_assert!(out.peak_mbit <= budget + 1e-9);
            prop_assert!((0.0..=1.0).contains(&out.leakage.value()));
        }
    }
}
