//! Convergence-rate estimation and Chung's recursion.

use std::fmt;

use crate::error::{invalid, Result};
use crate::learner::Trajectory;
use crate::stats::linear_fit;

/// Default fit window: the last half of the iterations.
pub const DEFAULT_WINDOW_FRACTION: f64 = 0.5;

/// Minimum number of checkpoints inside a fit window.
pub const MIN_FIT_POINTS: usize = 5;

/// Ensemble mean of `||μ(t) - a*||^2` at one checkpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub t: u64,
    pub mean: f64,
    pub std_error: f64,
}

/// Pointwise mean and standard error over trajectories sharing a grid.
pub fn mean_distance_curve(trajectories: &[Trajectory]) -> Result<Vec<CurvePoint>> {
    let Some(first) = trajectories.first() else {
        return Err(invalid("no trajectories given"));
    };
    let grid: Vec<u64> = first.times().collect();
    for tr in trajectories {
        if !tr.times().eq(grid.iter().copied()) {
            return Err(invalid(format!(
                "run {} has a different checkpoint grid than run {}",
                tr.run, first.run
            )));
        }
    }
    let mut columns: Vec<Vec<f64>> = vec![Vec::with_capacity(trajectories.len()); grid.len()];
    for tr in trajectories {
        for (col, cp) in columns.iter_mut().zip(&tr.checkpoints) {
            let d = cp.dist_sq.ok_or_else(|| {
                invalid(format!("run {} has no distance recorded at t = {}", tr.run, cp.t))
            })?;
            col.push(d);
        }
    }
    Ok(grid
        .into_iter()
        .zip(columns)
        .map(|(t, col)| curve_point(t, &mut col.clone()))
        .collect())
}

/// Mean and standard error of one checkpoint's values. Values are sorted
/// first so the result does not depend on the order of runs.
pub(crate) fn curve_point(t: u64, values: &mut [f64]) -> CurvePoint {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std_error = if values.len() > 1 {
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    CurvePoint { t, mean, std_error }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    /// Estimated exponent of `E||μ(t) - a*||^2 ~ t^slope`.
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub slope_std_error: f64,
    pub window: (u64, u64),
    pub num_points: usize,
}

impl fmt::Display for RateFit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "slope = {:.3}", self.slope)?;
        writeln!(f, "slope_std_error = {:.3e}", self.slope_std_error)?;
        writeln!(f, "intercept = {:.6}", self.intercept)?;
        writeln!(f, "r_squared = {:.6}", self.r_squared)?;
        writeln!(f, "window = {}..{}", self.window.0, self.window.1)?;
        write!(f, "num_points = {}", self.num_points)
    }
}

/// Least-squares fit of `log mean` against `log t` over checkpoints with
/// `t >= window_fraction * T`, where `T` is the last checkpoint. Points are
/// weighted equally.
pub fn fit_rate(curve: &[CurvePoint], window_fraction: f64) -> Result<RateFit> {
    if !(window_fraction > 0.0 && window_fraction < 1.0) {
        return Err(invalid(format!(
            "window fraction must be in (0, 1), got {window_fraction}"
        )));
    }
    let Some(last) = curve.last() else {
        return Err(invalid("empty curve"));
    };
    let start = window_fraction * last.t as f64;
    let window: Vec<&CurvePoint> = curve.iter().filter(|p| p.t as f64 >= start).collect();
    if window.len() < MIN_FIT_POINTS {
        return Err(invalid(format!(
            "{} checkpoints in the fit window, need at least {MIN_FIT_POINTS}",
            window.len()
        )));
    }
    if let Some(p) = window.iter().find(|p| !(p.mean > 0.0 && p.mean.is_finite())) {
        return Err(invalid(format!("non-positive mean {} at t = {}", p.mean, p.t)));
    }
    let x: Vec<f64> = window.iter().map(|p| (p.t as f64).ln()).collect();
    let y: Vec<f64> = window.iter().map(|p| p.mean.ln()).collect();
    let fit = linear_fit(&x, &y);
    Ok(RateFit {
        slope: fit.slope,
        intercept: fit.intercept,
        r_squared: fit.r_squared,
        slope_std_error: fit.slope_std_error,
        window: (window[0].t, window[window.len() - 1].t),
        num_points: window.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeComparison {
    pub one_point: RateFit,
    pub two_point: RateFit,
    pub two_point_faster: bool,
}

impl fmt::Display for ModeComparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "one-point slope = {:.3} ± {:.3}",
            self.one_point.slope, self.one_point.slope_std_error
        )?;
        writeln!(
            f,
            "two-point slope = {:.3} ± {:.3}",
            self.two_point.slope, self.two_point.slope_std_error
        )?;
        if self.two_point_faster {
            write!(f, "two-point feedback converges faster")
        } else {
            write!(f, "FAIL: two-point feedback is not faster")
        }
    }
}

/// Two-point is faster when its fitted exponent is strictly more negative.
pub fn compare_modes(one_point: RateFit, two_point: RateFit) -> ModeComparison {
    ModeComparison {
        one_point,
        two_point,
        two_point_faster: two_point.slope < one_point.slope,
    }
}

/// Parameters of `u_{k+1} = (1 - c/k) u_k + d / k^{1+p}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChungParams {
    pub c: f64,
    pub d: f64,
    pub p: f64,
    /// Value at the first index.
    pub u1: f64,
    /// Last index `k` to reach.
    pub horizon: u64,
}

impl ChungParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.p > 0.0) {
            return Err(invalid("Chung parameters c and p must be positive"));
        }
        if !(self.d >= 0.0 && self.u1 >= 0.0) {
            return Err(invalid("Chung parameters d and u1 must be nonnegative"));
        }
        if self.horizon < 10 || self.horizon <= self.first_index() {
            return Err(invalid(format!(
                "horizon {} too short (first index {})",
                self.horizon,
                self.first_index()
            )));
        }
        Ok(())
    }

    /// `max(2, ceil(c) + 1)`, so that `1 - c/k` lies in `(0, 1)`.
    pub fn first_index(&self) -> u64 {
        (self.c.ceil() as u64 + 1).max(2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChungRegime {
    /// `u_k ~ d/(c-p) k^{-p}`.
    Fast,
    /// `u_k = O(k^{-c} ln k)`.
    Critical,
    /// `u_k = O(k^{-c})`.
    Slow,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChungOutcome {
    pub final_k: u64,
    pub final_u: f64,
    /// `u_k k^p` at the final index; tends to `d/(c-p)` when `c > p`.
    pub limit_estimate: f64,
    pub regime: ChungRegime,
    /// Regime-normalized `u_k`: `u_k k^p` (fast), `u_k k^c / ln k`
    /// (critical) or `u_k k^c` (slow), maximized over the last decade.
    pub normalized_last_decade: f64,
    /// Same maximum over the decade before.
    pub normalized_prev_decade: f64,
}

impl ChungOutcome {
    /// The normalized sequence did not grow over the last decade.
    pub fn bounded(&self, tolerance: f64) -> bool {
        self.normalized_last_decade.is_finite()
            && self.normalized_last_decade <= self.normalized_prev_decade * (1.0 + tolerance)
    }

    /// `d/(c-p)` when `c > p`.
    pub fn predicted_limit(params: &ChungParams) -> Option<f64> {
        (params.c > params.p).then(|| params.d / (params.c - params.p))
    }
}

/// Iterates the recursion with equality from `k = first_index()` up to the
/// horizon.
pub fn chung_simulate(params: &ChungParams) -> Result<ChungOutcome> {
    params.validate()?;
    let regime = if params.c > params.p {
        ChungRegime::Fast
    } else if params.c == params.p {
        ChungRegime::Critical
    } else {
        ChungRegime::Slow
    };
    let normalize = |k: f64, u: f64| match regime {
        ChungRegime::Fast => u * k.powf(params.p),
        ChungRegime::Critical => u * k.powf(params.c) / k.ln(),
        ChungRegime::Slow => u * k.powf(params.c),
    };
    let horizon = params.horizon;
    let last_decade = horizon / 10;
    let prev_decade = horizon / 100;
    let mut last_max = f64::NEG_INFINITY;
    let mut prev_max = f64::NEG_INFINITY;
    let mut u = params.u1;
    let mut k = params.first_index();
    loop {
        if k >= prev_decade.max(2) {
            let v = normalize(k as f64, u);
            if k >= last_decade {
                last_max = last_max.max(v);
            } else {
                prev_max = prev_max.max(v);
            }
        }
        if k == horizon {
            break;
        }
        let kf = k as f64;
        u = (1.0 - params.c / kf) * u + params.d / kf.powf(1.0 + params.p);
        k += 1;
    }
    Ok(ChungOutcome {
        final_k: k,
        final_u: u,
        limit_estimate: u * (k as f64).powf(params.p),
        regime,
        normalized_last_decade: last_max,
        normalized_prev_decade: prev_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::JointPoint;
    use crate::learner::Checkpoint;
    use proptest::prelude::*;

    fn synthetic(f: impl Fn(f64) -> f64) -> Vec<CurvePoint> {
        crate::learner::checkpoint_grid(100_000, Default::default())
            .into_iter()
            .map(|t| CurvePoint {
                t,
                mean: f(t as f64),
                std_error: 0.0,
            })
            .collect()
    }

    fn traj(run: u64, values: &[(u64, f64)]) -> Trajectory {
        Trajectory {
            run,
            checkpoints: values
                .iter()
                .map(|&(t, d)| Checkpoint {
                    t,
                    state: JointPoint::zeros(1, 1),
                    query: None,
                    dist_sq: Some(d),
                })
                .collect(),
        }
    }

    #[test]
    fn exact_power_laws() {
        let fit = fit_rate(&synthetic(|t| 7.0 / t), 0.5).unwrap();
        assert!((fit.slope + 1.0).abs() < 1e-12);
        assert!((fit.intercept - 7f64.ln()).abs() < 1e-10);
        let fit = fit_rate(&synthetic(|t| 3.0 / t.sqrt()), 0.5).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-12);
        assert!(fit.window.0 >= 50_000);
        assert_eq!(fit.window.1, 100_000);
    }

    #[test]
    fn fit_errors() {
        assert!(fit_rate(&[], 0.5).is_err());
        assert!(fit_rate(&synthetic(|t| 1.0 / t), 0.0).is_err());
        assert!(fit_rate(&synthetic(|t| 1.0 / t), 1.0).is_err());
        let mut curve = synthetic(|t| 1.0 / t);
        curve.last_mut().unwrap().mean = 0.0;
        assert!(fit_rate(&curve, 0.5).is_err());
        let short: Vec<CurvePoint> = synthetic(|t| 1.0 / t).into_iter().take(3).collect();
        assert!(fit_rate(&short, 0.5).is_err());
    }

    #[test]
    fn curve_examples() {
        let a = traj(0, &[(1, 4.0), (10, 2.0)]);
        let curve = mean_distance_curve(std::slice::from_ref(&a)).unwrap();
        assert_eq!(curve[1], CurvePoint { t: 10, mean: 2.0, std_error: 0.0 });
        let curve = mean_distance_curve(&[a.clone(), traj(1, &[(1, 4.0), (10, 2.0)])]).unwrap();
        assert_eq!(curve[0].mean, 4.0);
        assert_eq!(curve[0].std_error, 0.0);
        let curve = mean_distance_curve(&[a.clone(), traj(1, &[(1, 2.0), (10, 4.0)])]).unwrap();
        assert_eq!(curve[0].mean, 3.0);
        assert!((curve[0].std_error - 1.0).abs() < 1e-15);
    }

    #[test]
    fn curve_errors() {
        assert!(mean_distance_curve(&[]).is_err());
        let a = traj(0, &[(1, 4.0), (10, 2.0)]);
        let b = traj(1, &[(1, 4.0), (11, 2.0)]);
        assert!(mean_distance_curve(&[a.clone(), b]).is_err());
        let mut c = a.clone();
        c.checkpoints[0].dist_sq = None;
        assert!(mean_distance_curve(&[a, c]).is_err());
    }

    #[test]
    fn mode_comparison() {
        let fit = |slope| RateFit {
            slope,
            intercept: 0.0,
            r_squared: 1.0,
            slope_std_error: 0.01,
            window: (1, 2),
            num_points: 5,
        };
        assert!(compare_modes(fit(-0.5), fit(-1.0)).two_point_faster);
        let same = compare_modes(fit(-0.5), fit(-0.5));
        assert!(!same.two_point_faster);
        assert!(same.to_string().contains("FAIL"));
    }

    #[test]
    fn chung_fast_regime() {
        let params = ChungParams { c: 1.0, d: 1.0, p: 0.5, u1: 1.0, horizon: 1_000_000 };
        let out = chung_simulate(&params).unwrap();
        assert_eq!(out.regime, ChungRegime::Fast);
        assert!((out.limit_estimate - 2.0).abs() / 2.0 < 0.05, "{}", out.limit_estimate);
        assert_eq!(ChungOutcome::predicted_limit(&params), Some(2.0));

        let params = ChungParams { c: 2.0, d: 3.0, p: 1.0, u1: 5.0, horizon: 1_000_000 };
        let out = chung_simulate(&params).unwrap();
        assert!((out.limit_estimate - 3.0).abs() / 3.0 < 0.05, "{}", out.limit_estimate);
    }

    #[test]
    fn chung_pure_contraction() {
        let params = ChungParams { c: 1.5, d: 0.0, p: 0.5, u1: 10.0, horizon: 100_000 };
        let out = chung_simulate(&params).unwrap();
        // u_k k^c is constant once d = 0.
        let mut u = 10.0;
        for k in 3..100_000u64 {
            u *= 1.0 - 1.5 / k as f64;
        }
        assert!((out.final_u - u).abs() <= 1e-12 * u);
        assert!(out.final_u * 1e5f64.powf(1.5) < 60.0);
        assert!(out.limit_estimate < 1e-3);
    }

    #[test]
    fn chung_bounded_regimes() {
        for (c, p) in [(1.0, 1.0), (0.5, 0.5), (0.5, 1.0), (1.0, 2.0)] {
            let params = ChungParams { c, d: 1.0, p, u1: 1.0, horizon: 1_000_000 };
            let out = chung_simulate(&params).unwrap();
            assert!(out.bounded(0.05), "c={c} p={p}: {out:?}");
        }
    }

    #[test]
    fn chung_validation() {
        let bad = ChungParams { c: 1.0, d: 1.0, p: 0.5, u1: 1.0, horizon: 5 };
        assert!(chung_simulate(&bad).is_err());
        assert!(chung_simulate(&ChungParams { c: 0.0, ..bad }).is_err());
        assert_eq!(ChungParams { c: 2.0, ..bad }.first_index(), 3);
        assert_eq!(ChungParams { c: 0.3, ..bad }.first_index(), 2);
    }

    proptest! {
        #[test]
        fn fit_recovers_power_laws(scale in 0.01f64..100.0, exponent in -3.0f64..0.5) {
            let fit = fit_rate(&synthetic(|t| scale * t.powf(exponent)), 0.5).unwrap();
            prop_assert!((fit.slope - exponent).abs() < 1e-10);
        }

        #[test]
        fn curve_is_permutation_invariant(
            values in prop::collection::vec((0.0f64..10.0, 0.0f64..10.0), 2..8),
            rot in 0usize..8,
        ) {
            let trajs: Vec<Trajectory> = values
                .iter()
                .enumerate()
                .map(|(r, &(a, b))| traj(r as u64, &[(1, a), (2, b)]))
                .collect();
            let mut shuffled = trajs.clone();
            shuffled.rotate_left(rot % trajs.len());
            shuffled.reverse();
            prop_assert_eq!(mean_distance_curve(&trajs).unwrap(), mean_distance_curve(&shuffled).unwrap());
        }
    }
}
