//! Decay of the range and lifetime of subcritical epidemics, and the
//! probability that an epidemic started from an interval never leaves it.

use alloc::vec::Vec;

use crate::error::{param, Error, Result};
use crate::graphical::Site;
use crate::processes::{Configuration, Evolve, ProcessParams, Trajectory};
use crate::replicas::{run_seeded, Replicas};
use crate::stats::{fit_log_linear, kendall, Estimate, KendallResult};

/// Horizon of the first attempt at running a replica to extinction.
const FIRST_HORIZON: f64 = 64.0;
const MAX_HORIZON: f64 = 1024.0;

/// Runs the process from `eta` until it dies, lengthening the construction
/// until it does. Marks are drawn by random access, so a longer horizon
/// reproduces the shorter run exactly.
pub fn run_to_extinction(p: &ProcessParams, seed: u64, eta: &Configuration) -> Result<Trajectory> {
    let mut h = FIRST_HORIZON;
    loop {
        let c = p.construction(seed, h)?;
        let tr = Evolve::three_state(&c, p)?.run(eta)?;
        if tr.died_at.is_some() {
            return Ok(tr);
        }
        if h >= MAX_HORIZON {
            return Err(Error::Degenerate(alloc::format!("epidemic still alive at {h}; parameters look supercritical")));
        }
        h *= 4.0;
    }
}

/// One level of a decay curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Level {
    /// Distance `n` or time `t`.
    pub x: f64,
    pub p: Estimate,
}

/// A decay curve with a weighted log-linear fit.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayFit {
    pub levels: Vec<Level>,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Number of levels used in the fit (the tail for lifetimes).
    pub fitted: usize,
}

impl DecayFit {
    /// Whether `p̂` never increases by more than `z` standard errors.
    pub fn nonincreasing(&self, z: f64) -> bool {
        self.levels.windows(2).all(|w| w[1].p.value <= w[0].p.value + z * libm::hypot(w[0].p.se, w[1].p.se))
    }

    /// Whether `p̂` never increases at all.
    pub fn strictly_ordered(&self) -> bool {
        self.levels.windows(2).all(|w| w[1].p.value <= w[0].p.value)
    }
}

fn fit(levels: Vec<Level>, from: usize, reps: u64) -> Result<DecayFit> {
    let pts: Vec<(f64, f64, u64)> = levels[from..].iter().map(|l| (l.x, l.p.value, reps)).collect();
    let f = fit_log_linear(&pts)?;
    Ok(DecayFit { fitted: pts.len(), levels, slope: f.slope, intercept: f.intercept, r2: f.r2 })
}

/// `P(the epidemic from the origin ever infects n or -n)` for
/// `n = 1..=n_max`, with a log-linear fit over all levels.
pub fn range_decay<R: Replicas>(runner: &R, p: &ProcessParams, n_max: u32, reps: u64, seed: u64) -> Result<DecayFit> {
    if n_max < 3 || reps == 0 {
        return Err(param("need n_max ≥ 3 and reps ≥ 1"));
    }
    // Reaching ±(n+1) means passing ±n, so the farthest reach decides every level.
    let reach = run_seeded(runner, seed, reps, |sd| -> Result<Site> {
        let tr = run_to_extinction(p, sd, &Configuration::standard())?;
        Ok(tr.ever_infected.iter().map(|x| x.abs()).max().unwrap_or(0))
    });
    let reach = reach.into_iter().collect::<Result<Vec<_>>>()?;
    let levels = (1..=n_max as Site)
        .map(|n| Level { x: n as f64, p: Estimate::proportion(reach.iter().filter(|&&r| r >= n).count() as u64, reps) })
        .collect();
    fit(levels, 0, reps)
}

/// `P(alive at t)` from the origin over `t_grid`, with a log-linear fit over
/// the later half of the grid.
pub fn lifetime_decay<R: Replicas>(runner: &R, p: &ProcessParams, t_grid: &[f64], reps: u64, seed: u64) -> Result<DecayFit> {
    if t_grid.len() < 6 || t_grid.windows(2).any(|w| w[1] <= w[0]) || t_grid[0] < 0.0 {
        return Err(param("t_grid must be increasing, nonnegative, with at least 6 points"));
    }
    let end = *t_grid.last().expect("nonempty");
    let deaths = run_seeded(runner, seed, reps, |sd| -> Result<Option<f64>> {
        let c = p.construction(sd, end)?;
        Ok(Evolve::three_state(&c, p)?.run(&Configuration::standard())?.died_at)
    });
    let deaths = deaths.into_iter().collect::<Result<Vec<_>>>()?;
    let levels = t_grid
        .iter()
        .map(|&t| {
            let alive = deaths.iter().filter(|d| d.is_none_or(|d| d > t)).count() as u64;
            Level { x: t, p: Estimate::proportion(alive, reps) }
        })
        .collect();
    fit(levels, t_grid.len() / 2, reps)
}

/// Containment from `[-N, N]`, read as: dead by `S` without ever infecting a
/// site outside `[-N, N]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Containment {
    /// `(N, ε̂_N)`.
    pub levels: Vec<(Site, Estimate)>,
    pub min: Estimate,
    /// Trend of `ε̂_N` against `N`.
    pub trend: KendallResult,
    /// Replicas still alive at `S`, per level; never counted as contained.
    pub alive_at_s: Vec<u64>,
}

pub fn containment_probability<R: Replicas>(
    runner: &R,
    n_grid: &[Site],
    p: &ProcessParams,
    s: f64,
    reps: u64,
    seed: u64,
) -> Result<Containment> {
    if n_grid.len() < 3 || n_grid.iter().any(|&n| n < 0) || !(s > 0.0) {
        return Err(param("need at least 3 nonnegative N and S > 0"));
    }
    let mut levels = Vec::new();
    let mut alive_at_s = Vec::new();
    for (i, &n) in n_grid.iter().enumerate() {
        let runs = run_seeded(runner, crate::rng::derive_key(seed, &[i as u64]), reps, |sd| -> Result<(bool, bool)> {
            let c = p.construction(sd, s)?;
            let tr = Evolve::three_state(&c, p)?.run(&Configuration::interval(-n, n))?;
            let dead = tr.died_at.is_some();
            let inside = tr.ever_infected.iter().all(|x| x.abs() <= n);
            Ok((dead && inside, dead))
        });
        let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
        let k = runs.iter().filter(|r| r.0).count() as u64;
        alive_at_s.push(runs.iter().filter(|r| !r.1).count() as u64);
        levels.push((n, Estimate::proportion(k, reps)));
    }
    let min = levels.iter().map(|l| l.1).min_by(|a, b| a.value.total_cmp(&b.value)).expect("nonempty");
    let xs: Vec<f64> = levels.iter().map(|l| l.0 as f64).collect();
    let ys: Vec<f64> = levels.iter().map(|l| l.1.value).collect();
    let trend = kendall(&xs, &ys)?;
    Ok(Containment { levels, min, trend, alive_at_s })
}
