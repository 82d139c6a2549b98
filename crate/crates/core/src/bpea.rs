//! Noisy prediction errors (B-PEA).
//!
//! Instead of perturbing viewpoints, the user adds a deterministic noise `n`
//! to the measured prediction error `e` and uploads `e + n`. An attacker who
//! takes the uploaded value at face value places its guess on the wrong
//! circle, so the leakage can be driven to any target `q`, including zero.
//!
//! For a fixed `e` the leakage as a function of `n` is piecewise:
//!
//! | `e` \ `n`            | `[-e, eps-e]` | `(eps-e, pi-e-eps)` | `[pi-e-eps, pi-e]` |
//! |----------------------|---------------|---------------------|--------------------|
//! | `e <= eps`           | 1             | middle              | 0                  |
//! | `eps < e < pi-eps`   | 0             | middle              | 0                  |
//! | `e >= pi-eps`        | 0             | middle              | 1                  |
//!
//! where the middle value is `min(eps~ / (pi sin e), 1)` with
//! `eps~ = acos(cos eps / cos(min(|n|, eps)))`.
//!
//! [`optimal_noise`] returns the smallest `|n|` meeting `leakage <= q`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::leakage::{arc_share, check_error, Precision};
use crate::sphere::Radians;

/// Slack allowed on the `[-e, pi - e]` noise range check.
const RANGE_SLACK: f64 = 1e-12;

/// Per-user leakage ceiling `q` in `[0, 1]`; 1 means no requirement.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct PrivacyRequirement(f64);

impl PrivacyRequirement {
    pub fn new(q: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&q) {
            Ok(PrivacyRequirement(q))
        } else {
            Err(Error::param("q", q, "must lie in [0, 1]"))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for PrivacyRequirement {
    type Error = Error;

    fn try_from(q: f64) -> Result<Self> {
        PrivacyRequirement::new(q)
    }
}

impl From<PrivacyRequirement> for f64 {
    fn from(q: PrivacyRequirement) -> f64 {
        q.0
    }
}

/// Margin `tau` used to step inside open interval boundaries.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct SolverMargin(f64);

impl SolverMargin {
    pub const DEFAULT: SolverMargin = SolverMargin(1e-4);

    pub fn new(tau: f64) -> Result<Self> {
        if tau.is_finite() && tau > 0.0 && tau < 0.1 {
            Ok(SolverMargin(tau))
        } else {
            Err(Error::param("tau", tau, "must lie in (0, 0.1)"))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl Default for SolverMargin {
    fn default() -> Self {
        Self::DEFAULT
    }
}

impl TryFrom<f64> for SolverMargin {
    type Error = Error;

    fn try_from(tau: f64) -> Result<Self> {
        SolverMargin::new(tau)
    }
}

impl From<SolverMargin> for f64 {
    fn from(tau: SolverMargin) -> f64 {
        tau.0
    }
}

/// The uploaded error `e + n`, always in `[0, pi]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct NoisyError(f64);

impl NoisyError {
    pub fn value(self) -> Radians {
        self.0
    }
}

/// Which row of the leakage table an error falls in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorRegime {
    /// `e <= eps`: the attacker's default guess already succeeds.
    Near,
    /// `eps < e < pi - eps`.
    Middle,
    /// `e >= pi - eps`: the antipodal guess succeeds.
    Far,
}

impl ErrorRegime {
    pub fn classify(e: Radians, eps: Precision) -> Self {
        let eps = eps.value();
        if e <= eps {
            ErrorRegime::Near
        } else if e >= PI - eps {
            ErrorRegime::Far
        } else {
            ErrorRegime::Middle
        }
    }
}

/// Half-length of the arc of the true circle inside the attacker's
/// neighbourhood when the guess is displaced by `n` along the meridian.
pub fn epsilon_tilde(n: Radians, eps: Precision) -> Radians {
    let eps = eps.value();
    let m = n.abs().min(eps);
    if m >= eps {
        return 0.0;
    }
    if m == 0.0 {
        return eps;
    }
    (eps.cos() / m.cos()).clamp(-1.0, 1.0).acos()
}

/// Leakage for a noise magnitude `|n|` inside the middle column.
fn middle_leakage(e: Radians, abs_n: Radians, eps: Precision) -> f64 {
    arc_share(epsilon_tilde(abs_n, eps), e)
}

/// Leakage probability when the uploaded error is `e + n`.
pub fn conditional_leakage_noisy(e: Radians, n: Radians, eps: Precision) -> Result<f64> {
    check_error("e", e)?;
    if !n.is_finite() || n < -e - RANGE_SLACK || n > PI - e + RANGE_SLACK {
        return Err(Error::NoiseOutOfRange {
            error: e,
            noise: n,
            min: -e,
            max: PI - e,
        });
    }
    let lo = eps.value() - e;
    let hi = PI - e - eps.value();
    let value = match ErrorRegime::classify(e, eps) {
        ErrorRegime::Near if n <= lo => 1.0,
        ErrorRegime::Near if n >= hi => 0.0,
        ErrorRegime::Middle if n <= lo || n >= hi => 0.0,
        ErrorRegime::Far if n >= hi => 1.0,
        ErrorRegime::Far if n <= lo => 0.0,
        _ => middle_leakage(e, n.abs(), eps),
    };
    Ok(value)
}

/// Noise magnitude at which the middle-column leakage equals `q` exactly:
/// `acos(cos eps / cos(q pi sin e))`.
///
/// Defined only while `q pi sin e <= eps`; beyond that even `n = 0` meets
/// the target and the caller should not ask.
pub fn script_n(e: Radians, eps: Precision, q: PrivacyRequirement) -> Result<Radians> {
    check_error("e", e)?;
    let arc = q.value() * PI * e.sin();
    if arc > eps.value() {
        return Err(Error::param(
            "q",
            q.value(),
            "q pi sin(e) exceeds eps; no noise is needed in the middle regime",
        ));
    }
    if arc <= 0.0 {
        return Ok(eps.value());
    }
    Ok((eps.value().cos() / arc.cos()).clamp(-1.0, 1.0).acos())
}

/// Smallest magnitude `>= start` whose middle-column leakage is at most `q`,
/// correcting the closed form for rounding in the last few ulps.
fn settle_feasible(e: Radians, start: Radians, eps: Precision, q: f64) -> Radians {
    // Near m = 0 one ulp of cos(m) spans hundreds of ulps of m, so the
    // step doubles instead of walking ulp by ulp.
    let mut m = start;
    let mut step = start.next_up() - start;
    while m < eps.value() {
        if middle_leakage(e, m, eps) <= q {
            return m;
        }
        m += step;
        step *= 2.0;
    }
    eps.value()
}

/// Optimal deterministic noise for the measured error `e`.
///
/// Among all `n` in `[-e, pi - e]` with leakage at most `q`, returns one of
/// minimal `|n|`. Open interval boundaries are approached with the margin
/// `tau`. When `+m` and `-m` are both optimal the positive one is chosen so
/// the uploaded error (and with it the streamed zone) grows.
pub fn optimal_noise(
    e: Radians,
    eps: Precision,
    q: PrivacyRequirement,
    tau: SolverMargin,
) -> Result<Radians> {
    check_error("e", e)?;
    let q = q.value();
    if q >= 1.0 {
        return Ok(0.0);
    }
    let tau = tau.value();
    let lo = eps.value() - e;
    let hi = PI - e - eps.value();
    let target = |e| {
        script_n(e, eps, PrivacyRequirement(q))
            .map(|m| settle_feasible(e, m, eps, q))
    };

    let n = match ErrorRegime::classify(e, eps) {
        ErrorRegime::Near => {
            // Left column leaks with certainty; the middle column starts at
            // lo >= 0 and its leakage falls as n grows.
            if middle_leakage(e, lo, eps) <= q {
                lo + tau
            } else if middle_leakage(e, hi.abs(), eps) > q {
                hi
            } else {
                target(e)?
            }
        }
        ErrorRegime::Far => {
            // Mirror image of the near case with negative noise.
            if middle_leakage(e, hi.abs(), eps) <= q {
                hi - tau
            } else if middle_leakage(e, lo.abs(), eps) > q {
                lo
            } else {
                -target(e)?
            }
        }
        ErrorRegime::Middle => {
            if middle_leakage(e, 0.0, eps) <= q {
                0.0
            } else {
                // Candidates: the closed edges of the zero-leakage columns,
                // and +/- the target magnitude inside the middle column.
                let to_left = -lo;
                let to_right = hi;
                let inner = target(e)?;
                let eta = to_left.min(to_right).min(inner);
                if to_left == eta {
                    lo
                } else if to_right == eta {
                    hi
                } else if inner < hi {
                    inner
                } else {
                    -inner
                }
            }
        }
    };
    Ok(n)
}

/// The error value actually uploaded: `e + optimal_noise(e)`.
pub fn obfuscate_error(
    e: Radians,
    eps: Precision,
    q: PrivacyRequirement,
    tau: SolverMargin,
) -> Result<NoisyError> {
    let n = optimal_noise(e, eps, q, tau)?;
    Ok(NoisyError((e + n).clamp(0.0, PI)))
}

/// A configured mechanism, convenient when the same `(eps, q, tau)` is
/// applied to a stream of errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mechanism {
    pub eps: Precision,
    pub q: PrivacyRequirement,
    pub tau: SolverMargin,
}

/// Result of applying the mechanism to one measured error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Obfuscated {
    pub error: Radians,
    pub noise: Radians,
    pub uploaded: Radians,
    pub leakage: f64,
}

impl Mechanism {
    pub fn new(eps: Precision, q: PrivacyRequirement, tau: SolverMargin) -> Self {
        Mechanism { eps, q, tau }
    }

    pub fn noise(&self, e: Radians) -> Result<Radians> {
        optimal_noise(e, self.eps, self.q, self.tau)
    }

    pub fn apply(&self, e: Radians) -> Result<Obfuscated> {
        let noise = self.noise(e)?;
        Ok(Obfuscated {
            error: e,
            noise,
            uploaded: (e + noise).clamp(0.0, PI),
            leakage: conditional_leakage_noisy(e, noise, self.eps)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const EPS: Precision = Precision::DEFAULT;

    fn q(v: f64) -> PrivacyRequirement {
        PrivacyRequirement::new(v).unwrap()
    }

    fn tau() -> SolverMargin {
        SolverMargin::DEFAULT
    }

    /// Bisection on the middle-column leakage over |n| in [0, eps]; kept
    /// independent of the closed-form inverse.
    fn bisect_target(e: f64, target: f64) -> f64 {
        let eval = |m: f64| {
            let et = (EPS.value().cos() / m.cos()).min(1.0).acos();
            (et / (PI * e.sin())).min(1.0)
        };
        let (mut a, mut b) = (0.0, EPS.value());
        while b - a > 1e-13 {
            let mid = 0.5 * (a + b);
            if eval(mid) > target {
                a = mid;
            } else {
                b = mid;
            }
        }
        b
    }

    #[test]
    fn parameter_domains() {
        assert!(PrivacyRequirement::new(-0.01).is_err());
        assert!(PrivacyRequirement::new(1.01).is_err());
        assert!(PrivacyRequirement::new(f64::NAN).is_err());
        assert!(SolverMargin::new(0.0).is_err());
        assert_eq!(SolverMargin::default().value(), 1e-4);
    }

    #[test]
    fn epsilon_tilde_examples() {
        assert_eq!(epsilon_tilde(0.0, EPS), EPS.value());
        assert_eq!(epsilon_tilde(EPS.value(), EPS), 0.0);
        assert_eq!(epsilon_tilde(-0.2 * PI, EPS), 0.0);
        // acos(cos 0.1pi / cos 0.05pi) at 30 digits.
        let v = epsilon_tilde(0.05 * PI, EPS);
        assert!((v - 0.273_203_214_491_251_23).abs() < 1e-13);
        assert_eq!(epsilon_tilde(-0.05 * PI, EPS), v);
    }

    #[test]
    fn noisy_leakage_examples() {
        assert_eq!(conditional_leakage_noisy(0.05 * PI, 0.0, EPS).unwrap(), 1.0);
        assert_eq!(conditional_leakage_noisy(0.5 * PI, EPS.value(), EPS).unwrap(), 0.0);
        let e = 0.95 * PI;
        assert_eq!(conditional_leakage_noisy(e, PI - e, EPS).unwrap(), 1.0);
        // e = pi/2, n = -0.3: acos(cos 0.1pi / cos 0.3) / pi, 30 digits.
        let v = conditional_leakage_noisy(0.5 * PI, -0.3, EPS).unwrap();
        assert!((v - 0.094_693_374_486_666_4 / PI).abs() < 1e-13);
    }

    #[test]
    fn noisy_leakage_rejects_detectable_uploads() {
        assert!(matches!(
            conditional_leakage_noisy(0.3, -0.31, EPS),
            Err(Error::NoiseOutOfRange { .. })
        ));
        assert!(conditional_leakage_noisy(0.3, PI - 0.3 + 1e-6, EPS).is_err());
        assert!(conditional_leakage_noisy(0.3, f64::NAN, EPS).is_err());
    }

    #[test]
    fn constant_cells_of_the_table() {
        let near = 0.05 * PI;
        let mid = 0.5 * PI;
        let far = 0.95 * PI;
        assert_eq!(conditional_leakage_noisy(near, -0.02 * PI, EPS).unwrap(), 1.0);
        assert_eq!(conditional_leakage_noisy(near, 0.9 * PI, EPS).unwrap(), 0.0);
        assert_eq!(conditional_leakage_noisy(mid, -0.45 * PI, EPS).unwrap(), 0.0);
        assert_eq!(conditional_leakage_noisy(mid, 0.45 * PI, EPS).unwrap(), 0.0);
        assert_eq!(conditional_leakage_noisy(far, -0.9 * PI, EPS).unwrap(), 0.0);
        assert_eq!(conditional_leakage_noisy(far, 0.02 * PI, EPS).unwrap(), 1.0);
    }

    #[test]
    fn script_n_examples() {
        assert_eq!(script_n(0.5 * PI, EPS, q(0.0)).unwrap(), EPS.value());
        // q pi sin e = eps exactly at e = pi/2, q = 0.1.
        let v = script_n(0.5 * PI, EPS, q(0.1)).unwrap();
        assert!(v.abs() < 1e-7);
        let m = script_n(0.5 * PI, EPS, q(0.05)).unwrap();
        assert!((m - bisect_target(0.5 * PI, 0.05)).abs() < 1e-10);
        assert!(script_n(0.5 * PI, EPS, q(0.2)).is_err());
    }

    #[test]
    fn optimal_noise_examples() {
        // p(0) = 0.1 <= 0.2: no noise.
        assert_eq!(optimal_noise(0.5 * PI, EPS, q(0.2), tau()).unwrap(), 0.0);
        let n = optimal_noise(0.5 * PI, EPS, q(0.05), tau()).unwrap();
        assert!(n > 0.0);
        assert!((n - bisect_target(0.5 * PI, 0.05)).abs() < 1e-10);
        // q = 1 never needs noise.
        assert_eq!(optimal_noise(0.02, EPS, q(1.0), tau()).unwrap(), 0.0);
    }

    #[test]
    fn near_regime_with_zero_target_uses_the_smallest_zero_leak_noise() {
        // Leakage reaches 0 once |n| >= eps inside the middle column; that
        // beats jumping to the far column at pi - e - eps.
        let e = 0.05 * PI;
        let n = optimal_noise(e, EPS, q(0.0), tau()).unwrap();
        assert_eq!(n, EPS.value());
        assert_eq!(conditional_leakage_noisy(e, n, EPS).unwrap(), 0.0);
        assert!(n < PI - e - EPS.value());
    }

    #[test]
    fn near_regime_boundary_branch_adds_margin() {
        // At e = eps the middle column starts at n = 0 with leakage
        // eps / (pi sin eps) ~ 0.324, so any q above that takes n = tau.
        let e = EPS.value();
        let n = optimal_noise(e, EPS, q(0.5), tau()).unwrap();
        assert_eq!(n, tau().value());
        let e = 0.08 * PI;
        let n = optimal_noise(e, EPS, q(0.9), tau()).unwrap();
        assert!((n - (EPS.value() - e + 1e-4)).abs() < 1e-15);
    }

    #[test]
    fn far_regime_mirrors_near_regime() {
        let e = 0.95 * PI;
        let n = optimal_noise(e, EPS, q(0.0), tau()).unwrap();
        assert_eq!(n, -EPS.value());
        assert_eq!(conditional_leakage_noisy(e, n, EPS).unwrap(), 0.0);
        let e = PI - EPS.value();
        let n = optimal_noise(e, EPS, q(0.5), tau()).unwrap();
        assert!((n + 1e-4).abs() < 1e-15);
    }

    #[test]
    fn middle_regime_prefers_column_edge_when_closer() {
        // e just above eps: moving to e + n = eps costs less than eps.
        let e = 0.12 * PI;
        let n = optimal_noise(e, EPS, q(0.0), tau()).unwrap();
        assert!((n - (EPS.value() - e)).abs() < 1e-15);
        assert_eq!(conditional_leakage_noisy(e, n, EPS).unwrap(), 0.0);
        let e = 0.88 * PI;
        let n = optimal_noise(e, EPS, q(0.0), tau()).unwrap();
        assert!((n - (PI - e - EPS.value())).abs() < 1e-15);
    }

    #[test]
    fn obfuscate_error_examples() {
        assert_eq!(obfuscate_error(0.5 * PI, EPS, q(1.0), tau()).unwrap().value(), 0.5 * PI);
        let up = obfuscate_error(0.05 * PI, EPS, q(0.0), tau()).unwrap().value();
        assert!((up - 0.15 * PI).abs() < 1e-14);
        let up = obfuscate_error(0.5 * PI, EPS, q(0.05), tau()).unwrap().value();
        assert!((up - 0.5 * PI - bisect_target(0.5 * PI, 0.05)).abs() < 1e-10);
    }

    #[test]
    fn edges_of_the_error_range() {
        for &e in &[0.0, PI] {
            for &qq in &[0.0, 0.3, 0.99] {
                let n = optimal_noise(e, EPS, q(qq), tau()).unwrap();
                let up = e + n;
                assert!((0.0..=PI).contains(&up), "e={e} q={qq} n={n}");
                assert!(conditional_leakage_noisy(e, n, EPS).unwrap() <= qq);
            }
        }
    }

    #[test]
    fn mechanism_applies_and_reports_leakage() {
        let m = Mechanism::new(EPS, q(0.0), tau());
        let o = m.apply(0.3 * PI).unwrap();
        assert_eq!(o.leakage, 0.0);
        assert_eq!(o.uploaded, 0.3 * PI + o.noise);
    }

    #[test]
    fn guarantee_on_dense_grid() {
        for i in 1..100 {
            let e = 0.01 * PI * i as f64;
            for j in 0..=100 {
                let qq = 0.01 * j as f64;
                let n = optimal_noise(e, EPS, q(qq), tau()).unwrap();
                let leak = conditional_leakage_noisy(e, n, EPS).unwrap();
                assert!(leak <= qq, "e={e} q={qq} n={n} leak={leak}");
                assert!((0.0..=PI).contains(&(e + n)));
                if qq == 0.0 {
                    assert_eq!(leak, 0.0);
                }
            }
        }
    }

    /// Smallest |n| on a lattice of spacing `h` whose leakage meets `target`.
    fn lattice_scan(e: f64, target: f64, h: f64) -> f64 {
        (0..)
            .map(|k| k as f64 * h)
            .find(|&m| {
                [m, -m].iter().any(|&n| {
                    n >= -e && n <= PI - e && conditional_leakage_noisy(e, n, EPS).unwrap() <= target
                })
            })
            .unwrap()
    }

    #[test]
    fn minimal_against_lattice_scan() {
        let h = 1e-4;
        for i in 1..=12 {
            let e = PI * i as f64 / 13.0;
            for j in 0..=12 {
                let qq = j as f64 / 12.0;
                let n = optimal_noise(e, EPS, q(qq), tau()).unwrap();
                let scan = lattice_scan(e, qq, h);
                assert!((n.abs() - scan).abs() <= tau().value() + h, "e={e} q={qq} n={n} scan={scan}");
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1_000))]

        #[test]
        fn middle_column_leakage_decreases_in_noise_magnitude(
            frac in 0.0f64..1.0,
            a in 0.0f64..1.0,
            b in 0.0f64..1.0,
        ) {
            let e = EPS.value() + frac * (PI - 2.0 * EPS.value());
            prop_assume!(e > EPS.value() && e < PI - EPS.value());
            let lo = EPS.value() - e;
            let hi = PI - e - EPS.value();
            // Two noises in the open middle column with |n1| <= |n2|.
            let n1 = lo + a * (hi - lo);
            let n2 = lo + b * (hi - lo);
            prop_assume!(n1 > lo && n1 < hi && n2 > lo && n2 < hi);
            let (small, large) = if n1.abs() <= n2.abs() { (n1, n2) } else { (n2, n1) };
            let p_small = conditional_leakage_noisy(e, small, EPS).unwrap();
            let p_large = conditional_leakage_noisy(e, large, EPS).unwrap();
            prop_assert!(p_large <= p_small + 1e-15);
        }

        #[test]
        fn noise_magnitude_non_increasing_in_q(
            frac in 0.0f64..1.0,
            q1 in 0.0f64..=1.0,
            q2 in 0.0f64..=1.0,
        ) {
            let e = EPS.value() + frac * (PI - 2.0 * EPS.value());
            prop_assume!(e > EPS.value() && e < PI - EPS.value());
            let (lo_q, hi_q) = if q1 <= q2 { (q1, q2) } else { (q2, q1) };
            let strict = optimal_noise(e, EPS, q(lo_q), tau()).unwrap();
            let loose = optimal_noise(e, EPS, q(hi_q), tau()).unwrap();
            prop_assert!(loose.abs() <= strict.abs() + 1e-12);
        }

        #[test]
        fn optimal_noise_is_deterministic(e in 0.0f64..=PI, qq in 0.0f64..=1.0) {
            let a = optimal_noise(e, EPS, q(qq), tau()).unwrap();
            let b = optimal_noise(e, EPS, q(qq), tau()).unwrap();
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }

        #[test]
        fn zero_leakage_is_always_reachable(e in 0.0f64..=PI, eps_frac in 0.01f64..0.3) {
            let eps = Precision::new(eps_frac * PI).unwrap();
            let n = optimal_noise(e, eps, q(0.0), tau()).unwrap();
            prop_assert_eq!(conditional_leakage_noisy(e, n, eps).unwrap(), 0.0);
        }
    }
}
