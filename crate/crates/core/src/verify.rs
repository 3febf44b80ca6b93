//! Property suites behind `nashzero verify`.
//!
//! Each suite returns one [`CheckResult`] per check with the measured
//! margin, so callers can print pass/fail lines.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::analysis::{chung_simulate, ChungOutcome, ChungParams};
use crate::catalog::{CatalogEntry, Tag};
use crate::error::{invalid, unsupported, Error, Result};
use crate::estimator::{estimator_moments, FeedbackMode, RngStream};
use crate::game::{Game, JointPoint, DEFAULT_FD_STEP};
use crate::smoothed::{almost_svs_margin, lemma1_consistency, Lemma1Check};
use crate::stats::linear_fit;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Gradients,
    Svs,
    Lemma1,
    Lemma2,
    Prop1,
    Chung,
}

impl Suite {
    pub const ALL: [Suite; 6] = [
        Suite::Gradients,
        Suite::Svs,
        Suite::Lemma1,
        Suite::Lemma2,
        Suite::Prop1,
        Suite::Chung,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Suite::Gradients => "gradients",
            Suite::Svs => "svs",
            Suite::Lemma1 => "lemma1",
            Suite::Lemma2 => "lemma2",
            Suite::Prop1 => "prop1",
            Suite::Chung => "chung",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.as_str() == s)
            .ok_or_else(|| {
                invalid(format!(
                    "unknown suite {s:?}; expected one of gradients, svs, lemma1, lemma2, prop1, chung"
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{tag}] {}: {}", self.name, self.detail)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    /// Monte-Carlo samples per estimate.
    pub samples: usize,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            samples: 200_000,
            seed: 0,
        }
    }
}

/// Uniform draws from the joint action set.
pub fn uniform_points(game: &Game, count: usize, stream: &RngStream) -> Vec<JointPoint> {
    let mut rng = stream.rng();
    (0..count)
        .map(|_| {
            let mut p = JointPoint::zeros(game.num_players(), game.dim());
            for i in 0..game.num_players() {
                let set = game.action_set(i);
                for (k, x) in p.block_mut(i).iter_mut().enumerate() {
                    let (lo, hi) = (set.lower()[k], set.upper()[k]);
                    *x = if lo == hi { lo } else { rng.random_range(lo..=hi) };
                }
            }
            p
        })
        .collect()
}

/// Largest `|analytic - finite difference|` over uniform points, scaled by
/// `1 + |analytic|`.
pub fn gradient_check(game: &Game, points: usize, stream: &RngStream) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for p in uniform_points(game, points, stream) {
        let m = game.pseudo_gradient(&p)?;
        let fd = game.finite_difference_pseudo_gradient(&p, DEFAULT_FD_STEP)?;
        for (a, b) in m.as_slice().iter().zip(fd.as_slice()) {
            worst = worst.max((a - b).abs() / (1.0 + a.abs()));
        }
    }
    Ok(worst)
}

/// Minimum SVS gap over uniform samples, with its location.
pub fn sampled_svs_min(game: &Game, samples: usize, stream: &RngStream) -> Result<(f64, JointPoint)> {
    let mut best = (f64::INFINITY, JointPoint::zeros(game.num_players(), game.dim()));
    for p in uniform_points(game, samples, stream) {
        let gap = game.svs_gap(&p)?;
        if gap < best.0 {
            best = (gap, p);
        }
    }
    Ok(best)
}

/// Estimator mean against the analytic `M(μ)`. Only meaningful when `M` is
/// affine, where smoothing leaves it unchanged.
pub fn unbiasedness_against_analytic(
    game: &Game,
    state: &JointPoint,
    sigma: f64,
    mode: FeedbackMode,
    n: usize,
    stream: &RngStream,
) -> Result<Lemma1Check> {
    let exact = game.pseudo_gradient(state)?;
    let est = estimator_moments(game, state, sigma, mode, n, stream)?;
    Ok(Lemma1Check {
        distance: est.mean.dist_sq(&exact).sqrt(),
        joint_std_error: est.joint_std_error(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lemma2Report {
    pub one_point_high: f64,
    pub one_point_low: f64,
    pub two_point_high: f64,
    pub two_point_low: f64,
}

impl Lemma2Report {
    /// Second moment at the smaller radius over the larger; ≈ 4 when the
    /// one-point residual scales as σ^-2 and the radii differ by 2.
    pub fn one_point_ratio(&self) -> f64 {
        self.one_point_low / self.one_point_high
    }

    /// max/min of the two-point second moments.
    pub fn two_point_spread(&self) -> f64 {
        self.two_point_high.max(self.two_point_low) / self.two_point_high.min(self.two_point_low)
    }

    pub fn one_point_ok(&self) -> bool {
        (2.5..=6.0).contains(&self.one_point_ratio())
    }

    pub fn two_point_ok(&self) -> bool {
        self.two_point_spread() <= 2.0
    }
}

/// Residual second moments of both estimators at `sigma_high` and
/// `sigma_low`, sharing the query streams.
pub fn lemma2_report(
    game: &Game,
    state: &JointPoint,
    sigma_high: f64,
    sigma_low: f64,
    n: usize,
    stream: &RngStream,
) -> Result<Lemma2Report> {
    let second = |mode, sigma| -> Result<f64> {
        Ok(estimator_moments(game, state, sigma, mode, n, stream)?.residual_second_moment)
    };
    Ok(Lemma2Report {
        one_point_high: second(FeedbackMode::OnePoint, sigma_high)?,
        one_point_low: second(FeedbackMode::OnePoint, sigma_low)?,
        two_point_high: second(FeedbackMode::TwoPoint, sigma_high)?,
        two_point_low: second(FeedbackMode::TwoPoint, sigma_low)?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RemainderReport {
    /// `(σ, min(0, min_μ margin(μ, σ)))` per radius.
    pub floors: Vec<(f64, f64)>,
    /// Slope of `log(-floor)` against `log σ`, when every floor is negative.
    pub slope: Option<f64>,
}

impl RemainderReport {
    pub fn slope_within(&self, target: f64, tolerance: f64) -> bool {
        self.slope.is_some_and(|s| (s - target).abs() <= tolerance)
    }
}

/// Negative-margin floor of `almost_svs_margin` over fixed probe states for
/// each radius (common random numbers across radii), and its log-log slope.
pub fn remainder_report(
    game: &Game,
    probes: &[JointPoint],
    sigmas: &[f64],
    n: usize,
    stream: &RngStream,
) -> Result<RemainderReport> {
    if probes.is_empty() || sigmas.len() < 2 {
        return Err(invalid("need at least one probe state and two radii"));
    }
    let mut floors = Vec::with_capacity(sigmas.len());
    for &sigma in sigmas {
        let mut floor: f64 = 0.0;
        for (j, mu) in probes.iter().enumerate() {
            let m = almost_svs_margin(game, mu, sigma, n, &stream.with_run(j as u64))?;
            floor = floor.min(m.value);
        }
        floors.push((sigma, floor));
    }
    let slope = floors.iter().all(|(_, f)| *f < 0.0).then(|| {
        let x: Vec<f64> = floors.iter().map(|(s, _)| s.ln()).collect();
        let y: Vec<f64> = floors.iter().map(|(_, f)| (-f).ln()).collect();
        linear_fit(&x, &y).slope
    });
    Ok(RemainderReport { floors, slope })
}

/// The three regimes of Chung's recursion.
pub fn chung_checks() -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    let fast = ChungParams {
        c: 1.0,
        d: 1.0,
        p: 0.5,
        u1: 1.0,
        horizon: 1_000_000,
    };
    let res = chung_simulate(&fast)?;
    let target = ChungOutcome::predicted_limit(&fast).unwrap();
    let rel = (res.limit_estimate - target).abs() / target;
    out.push(CheckResult::new(
        "chung c>p limit d/(c-p)",
        rel <= 0.05,
        format!("u_k k^p = {:.5} vs {target} (rel err {rel:.2e})", res.limit_estimate),
    ));
    for (label, c, p) in [("chung c=p bounded", 1.0, 1.0), ("chung c<p bounded", 0.5, 1.0)] {
        let params = ChungParams {
            c,
            d: 1.0,
            p,
            u1: 1.0,
            horizon: 1_000_000,
        };
        let res = chung_simulate(&params)?;
        out.push(CheckResult::new(
            label,
            res.bounded(0.05),
            format!(
                "normalized max last decade {:.5}, previous decade {:.5}",
                res.normalized_last_decade, res.normalized_prev_decade
            ),
        ));
    }
    Ok(out)
}

pub const SVS_TOLERANCE: f64 = -1e-9;
pub const SVS_SAMPLES: usize = 100_000;
pub const LEMMA1_SIGMA: f64 = 0.2;
pub const LEMMA1_STATES: usize = 5;
pub const LEMMA2_SIGMAS: (f64, f64) = (0.1, 0.05);
pub const PROP1_SIGMAS: [f64; 3] = [0.4, 0.2, 0.1];
pub const PROP1_PROBES: usize = 32;

fn require_equilibrium(game: &Game) -> Result<&JointPoint> {
    game.equilibrium()
        .ok_or_else(|| unsupported("suite needs a known equilibrium"))
}

/// Runs one suite against a catalog entry.
pub fn run_suite(entry: &CatalogEntry, suite: Suite, opts: &VerifyOptions) -> Result<Vec<CheckResult>> {
    let game = &entry.game;
    let base = RngStream::new(opts.seed);
    let mut out = Vec::new();
    match suite {
        Suite::Gradients => {
            let worst = gradient_check(game, 100, &base)?;
            out.push(CheckResult::new(
                "analytic vs finite-difference pseudo-gradient",
                worst <= 1e-6,
                format!("max scaled error {worst:.3e} at 100 points (h = {DEFAULT_FD_STEP:e})"),
            ));
        }
        Suite::Svs => {
            let (min, at) = sampled_svs_min(game, SVS_SAMPLES, &base)?;
            out.push(CheckResult::new(
                "sampled SVS inequality",
                min >= SVS_TOLERANCE,
                format!("min gap {min:.3e} over {SVS_SAMPLES} samples at {at}"),
            ));
            if entry.has_tag(Tag::NonMonotone) {
                let witness = JointPoint::new(vec![2.0, 1.0, 2.0], 1)?;
                if game.check_layout(&witness).is_ok() {
                    let lam = game.jacobian_min_eigenvalue(&witness)?;
                    out.push(CheckResult::new(
                        "non-monotone Jacobian witness at (2,1,2)",
                        lam < 0.0,
                        format!("min eigenvalue {lam:.6}"),
                    ));
                }
            }
        }
        Suite::Lemma1 => {
            let states = uniform_points(game, LEMMA1_STATES, &base.with_run(1));
            for (j, mu) in states.iter().enumerate() {
                for mode in [FeedbackMode::OnePoint, FeedbackMode::TwoPoint] {
                    let stream = base.with_run(100 + j as u64);
                    let c = lemma1_consistency(game, mu, LEMMA1_SIGMA, mode, opts.samples, &stream)?;
                    out.push(CheckResult::new(
                        format!("lemma1 {mode} state {j}"),
                        c.within(3.0),
                        format!("distance {:.3e} = {:.2} joint SE", c.distance, c.z_score()),
                    ));
                }
            }
        }
        Suite::Lemma2 => {
            let mu = require_equilibrium(game)?;
            let (hi, lo) = LEMMA2_SIGMAS;
            let r = lemma2_report(game, mu, hi, lo, opts.samples, &base)?;
            out.push(CheckResult::new(
                "lemma2 one-point ratio in [2.5, 6]",
                r.one_point_ok(),
                format!(
                    "E||R||^2 = {:.4e} (σ={hi}) and {:.4e} (σ={lo}); ratio {:.3}",
                    r.one_point_high,
                    r.one_point_low,
                    r.one_point_ratio()
                ),
            ));
            out.push(CheckResult::new(
                "lemma2 two-point within factor 2",
                r.two_point_ok(),
                format!(
                    "E||R||^2 = {:.4e} (σ={hi}) and {:.4e} (σ={lo}); spread {:.3}",
                    r.two_point_high,
                    r.two_point_low,
                    r.two_point_spread()
                ),
            ));
        }
        Suite::Prop1 => {
            let probes = uniform_points(game, PROP1_PROBES, &base.with_run(2));
            let r = remainder_report(game, &probes, &PROP1_SIGMAS, opts.samples, &base.with_iteration(1 << 40))?;
            let floors: Vec<String> = r.floors.iter().map(|(s, f)| format!("σ={s}: {f:.3e}")).collect();
            let detail = match r.slope {
                Some(s) => format!("slope {s:.3}; floors {}", floors.join(", ")),
                None => format!("no negative margin at some radius; floors {}", floors.join(", ")),
            };
            out.push(CheckResult::new(
                "prop1 remainder slope 2 ± 0.5",
                r.slope_within(2.0, 0.5),
                detail,
            ));
        }
        Suite::Chung => out.extend(chung_checks()?),
    }
    Ok(out)
}
