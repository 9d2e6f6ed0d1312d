//! Break points of the rightmost infected site, the estimators built on
//! them, and regeneration points of range-M contact processes.
//!
//! Survival is undecidable by simulation, so "the restarted process
//! survives" is read as "it is alive `S` time units after its launch".

use alloc::vec::Vec;

use crate::coupling::{surrogate_width, xi_z_surrogate};
use crate::error::{param, Error, Result};
use crate::graphical::{Construction, Site};
use crate::processes::{Boundary, Configuration, Evolve, ProcessParams, Trajectory, INFECTED, RECOVERED};
use crate::replicas::{run_seeded, Replicas};
use crate::rng::derive_key;
use crate::stats::{self, ks_one_sample, ks_two_sample, lag1_autocorrelation, normal_cdf, Estimate, KsResult};

/// One regeneration increment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegenRecord {
    /// Spatial increment between consecutive regeneration points.
    pub x: i64,
    /// Temporal increment.
    pub psi: f64,
    /// How far the rightmost site fell below the earlier point in between.
    pub mback: i64,
    pub censored: bool,
}

pub fn complete(records: &[RegenRecord]) -> Vec<RegenRecord> {
    records.iter().filter(|r| !r.censored).copied().collect()
}

/// Largest `rightmost` over samples with time in `[t0, t1)`, including the
/// value in force at `t0`.
fn max_before(path: &Trajectory, t0: f64, t1: f64) -> Option<Site> {
    extreme_before(path, t0, t1).map(|e| e.1)
}

fn min_before(path: &Trajectory, t0: f64, t1: f64) -> Option<Site> {
    extreme_before(path, t0, t1).map(|e| e.0)
}

fn extreme_before(path: &Trajectory, t0: f64, t1: f64) -> Option<(Site, Site)> {
    let first = path.rightmost_at(t0);
    let i = path.samples.partition_point(|s| s.time <= t0);
    let j = path.samples.partition_point(|s| s.time < t1);
    let rest = path.samples[i..j.max(i)].iter().filter_map(|s| s.rightmost);
    first.into_iter().chain(rest).fold(None, |acc, r| match acc {
        None => Some((r, r)),
        Some((lo, hi)) => Some((lo.min(r), hi.max(r))),
    })
}

fn hitting_time(path: &Trajectory, level: Site) -> Option<f64> {
    path.samples.iter().find(|s| s.rightmost.is_some_and(|r| r >= level)).map(|s| s.time)
}

/// Break points found along one reference path.
#[derive(Debug, Clone, PartialEq)]
pub struct BreakPoints {
    /// Increments between accepted points; the last one is censored.
    pub records: Vec<RegenRecord>,
    /// Accepted points `(K_n, τ_{K_n})`.
    pub points: Vec<(Site, f64)>,
    /// Candidates that were launched.
    pub candidates: usize,
    /// Accepted points where the reference was not at its running maximum.
    pub running_max_violations: usize,
}

/// Walks the restart algorithm along the rightmost-site path `path`.
///
/// `dies(k, t)` reports the death time of the process restarted from the
/// single site `k` at time `t`, or `None` if it is still alive at `t + s`.
/// Candidates are only launched while `t + s <= horizon`.
pub fn walk_break_points(
    path: &Trajectory,
    horizon: f64,
    s: f64,
    mut dies: impl FnMut(Site, f64) -> Result<Option<f64>>,
) -> Result<BreakPoints> {
    let mut out = BreakPoints { records: Vec::new(), points: Vec::new(), candidates: 0, running_max_violations: 0 };
    let (mut k_prev, mut t_prev) = (0, path.start_time);
    let mut y: Site = 1;
    while let Some(t_y) = hitting_time(path, y) {
        if t_y + s > horizon {
            break;
        }
        out.candidates += 1;
        match dies(y, t_y)? {
            None => {
                let low = min_before(path, t_prev, t_y).unwrap_or(k_prev);
                if max_before(path, path.start_time, t_y).is_some_and(|m| m >= y) {
                    out.running_max_violations += 1;
                }
                out.records.push(RegenRecord { x: y - k_prev, psi: t_y - t_prev, mback: k_prev - low, censored: false });
                out.points.push((y, t_y));
                k_prev = y;
                t_prev = t_y;
                y += 1;
            }
            Some(rho) => {
                let top = max_before(path, t_y, rho).unwrap_or(y);
                y = top.max(y) + 1;
            }
        }
    }
    let top = path.max_rightmost(t_prev, horizon).unwrap_or(k_prev);
    let low = path.min_rightmost(t_prev, horizon).unwrap_or(k_prev);
    out.records.push(RegenRecord { x: top - k_prev, psi: horizon - t_prev, mback: k_prev - low, censored: true });
    Ok(out)
}

/// One run of the break-point search.
#[derive(Debug, Clone, PartialEq)]
pub struct BreakPointRun {
    pub breaks: BreakPoints,
    /// Rightmost site of the half-line process at the horizon.
    pub r_end: Site,
}

/// Finds break points on one construction, using the half-line process as
/// the reference path and single-site restarts as candidates.
pub fn find_break_points(p: &ProcessParams, seed: u64, t: f64, s: f64) -> Result<BreakPointRun> {
    if !(p.mu >= p.lambda && p.lambda > 0.0) {
        return Err(param("break points need μ ≥ λ > 0"));
    }
    if !(s > 0.0 && s <= t) {
        return Err(param("need 0 < S <= T"));
    }
    let c = p.construction(seed, t)?;
    let ev = Evolve::three_state(&c, p)?;
    let path = ev.clone().until(t).run(&Configuration::eta_bar())?;
    let breaks = walk_break_points(&path, t, s, |k, tk| {
        let run = ev.clone().from(tk).until(tk + s).run(&Configuration::single(k))?;
        Ok(run.died_at)
    })?;
    let r_end = path.rightmost_at(t).ok_or_else(|| Error::Degenerate("half-line process died".into()))?;
    Ok(BreakPointRun { breaks, r_end })
}

/// Records used for estimation from one run.
///
/// The first record starts at the origin of the half-line process, which is
/// not a regeneration point, so it is dropped. Of the rest, those starting at
/// or before `cut` are kept: choosing records by start time is a stopping
/// rule, whereas keeping every record that completed before the horizon
/// favours short cycles. Returns `None` if a kept record is censored.
pub fn regeneration_window(records: &[RegenRecord], cut: f64) -> Option<Vec<RegenRecord>> {
    let mut out = Vec::new();
    let mut start = records.first()?.psi;
    for r in records.iter().skip(1) {
        if start > cut {
            break;
        }
        if r.censored {
            return None;
        }
        out.push(*r);
        start += r.psi;
    }
    Some(out)
}

/// Break points pooled over replicas.
#[derive(Debug, Clone, PartialEq)]
pub struct BreakPointSample {
    /// Windowed records in replica order.
    pub records: Vec<RegenRecord>,
    pub per_replica: Vec<usize>,
    /// Replicas whose window had to be completed on a longer horizon.
    pub extended_replicas: usize,
    /// Start-time cut used for the window, `(T - S) / 2`.
    pub cut: f64,
    pub running_max_violations: usize,
}

const MAX_EXTENSION: u32 = 4;

pub fn collect_break_points<R: Replicas>(
    runner: &R,
    p: &ProcessParams,
    t: f64,
    s: f64,
    reps: u64,
    seed: u64,
) -> Result<BreakPointSample> {
    let cut = (t - s) / 2.0;
    // Marks are drawn by random access, so a longer horizon leaves every
    // record that completed before `t` unchanged.
    let runs = run_seeded(runner, seed, reps, |sd| -> Result<(Vec<RegenRecord>, usize, bool)> {
        let mut horizon = t;
        for k in 0..=MAX_EXTENSION {
            let run = find_break_points(p, sd, horizon, s)?;
            if let Some(w) = regeneration_window(&run.breaks.records, cut) {
                return Ok((w, run.breaks.running_max_violations, k > 0));
            }
            horizon *= 2.0;
        }
        Err(Error::Degenerate(alloc::format!("break-point window still censored at horizon {horizon}")))
    });
    let mut out = BreakPointSample { records: Vec::new(), per_replica: Vec::new(), extended_replicas: 0, cut, running_max_violations: 0 };
    for r in runs {
        let (w, bad, extended) = r?;
        out.running_max_violations += bad;
        out.extended_replicas += extended as usize;
        out.per_replica.push(w.len());
        out.records.extend(w);
    }
    Ok(out)
}

/// `r_T / T` of the process from the standard start, over replicas alive at `T`.
pub fn direct_speed<R: Replicas>(runner: &R, p: &ProcessParams, t: f64, reps: u64, seed: u64) -> Result<Estimate> {
    if t <= 0.0 {
        return Err(param("T must be positive"));
    }
    let runs = run_seeded(runner, seed, reps, |sd| -> Result<Option<f64>> {
        let c = p.construction(sd, t)?;
        let tr = Evolve::three_state(&c, p)?.until(t).run(&Configuration::standard())?;
        Ok(tr.rightmost_at(t).map(|r| r as f64 / t))
    });
    let v: Vec<f64> = runs.into_iter().collect::<Result<Vec<_>>>()?.into_iter().flatten().collect();
    if v.len() < 2 {
        return Err(Error::InsufficientData { needed: 2, got: v.len() });
    }
    Ok(Estimate::mean_of(&v))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedEstimate {
    pub alpha_hat: f64,
    pub se: f64,
    pub n_records: usize,
    /// Total time covered by the records.
    pub horizon_used: f64,
}

const MIN_ALPHA_RECORDS: usize = 30;
const MIN_CLT_RECORDS: usize = 200;

fn needs(records: &[RegenRecord], n: usize) -> Result<Vec<RegenRecord>> {
    let done = complete(records);
    if done.len() < n {
        return Err(Error::InsufficientData { needed: n, got: done.len() });
    }
    Ok(done)
}

/// Ratio-of-means speed estimate with a delta-method standard error.
pub fn estimate_alpha(records: &[RegenRecord]) -> Result<SpeedEstimate> {
    let done = needs(records, MIN_ALPHA_RECORDS)?;
    let sx: f64 = done.iter().map(|r| r.x as f64).sum();
    let sp: f64 = done.iter().map(|r| r.psi).sum();
    let n = done.len() as f64;
    let alpha = sx / sp;
    let d: Vec<f64> = done.iter().map(|r| r.x as f64 - alpha * r.psi).collect();
    let se = libm::sqrt(stats::variance(&d) / n) / (sp / n);
    Ok(SpeedEstimate { alpha_hat: alpha, se, n_records: done.len(), horizon_used: sp })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sigma2 {
    pub value: f64,
    /// Set when every record satisfies `X = α̂ Ψ` up to rounding.
    pub degenerate: bool,
}

fn sq(v: f64) -> f64 {
    v * v
}

/// `mean((X − α̂Ψ)²) / mean(Ψ)`.
pub fn estimate_sigma2(records: &[RegenRecord], alpha_hat: f64) -> Result<Sigma2> {
    let done = needs(records, MIN_ALPHA_RECORDS)?;
    let d2: Vec<f64> = done.iter().map(|r| sq(r.x as f64 - alpha_hat * r.psi)).collect();
    let psi: Vec<f64> = done.iter().map(|r| r.psi).collect();
    let value = stats::mean(&d2) / stats::mean(&psi);
    let scale = done.iter().map(|r| sq(r.x as f64)).fold(0.0, f64::max).max(1.0);
    Ok(Sigma2 { value, degenerate: value <= 1e-12 * scale })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalityReport {
    pub ks: KsResult,
    pub blocks: usize,
    pub block_len: usize,
    pub z: Vec<f64>,
}

/// KS test of standardized block sums of `X − α̂Ψ` against N(0, 1), with
/// `⌊√n⌋` blocks.
pub fn clt_diagnostic(records: &[RegenRecord], alpha_hat: f64, sigma2: f64) -> Result<NormalityReport> {
    let done = needs(records, MIN_CLT_RECORDS)?;
    if !(sigma2 > 0.0) {
        return Err(Error::Degenerate("σ² must be positive".into()));
    }
    let blocks = libm::floor(libm::sqrt(done.len() as f64)) as usize;
    let len = done.len() / blocks;
    let z: Vec<f64> = done
        .chunks_exact(len)
        .take(blocks)
        .map(|b| {
            let d: f64 = b.iter().map(|r| r.x as f64 - alpha_hat * r.psi).sum();
            let t: f64 = b.iter().map(|r| r.psi).sum();
            d / libm::sqrt(sigma2 * t)
        })
        .collect();
    let ks = ks_one_sample(&z, normal_cdf)?;
    Ok(NormalityReport { ks, blocks, block_len: len, z })
}

/// Exchangeability diagnostics: KS between the two halves of each
/// coordinate and lag-1 autocorrelations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalvesReport {
    pub x: KsResult,
    pub psi: KsResult,
    pub mback: KsResult,
    pub lag1_x: f64,
    pub lag1_psi: f64,
    pub n: usize,
}

impl HalvesReport {
    /// Autocorrelation threshold `3/√n`.
    pub fn lag1_ok(&self) -> bool {
        let bound = 3.0 / libm::sqrt(self.n as f64);
        self.lag1_x.abs() < bound && self.lag1_psi.abs() < bound
    }
}

pub fn halves_report(records: &[RegenRecord]) -> Result<HalvesReport> {
    let done = complete(records);
    let h = done.len() / 2;
    let col = |f: fn(&RegenRecord) -> f64| -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let all: Vec<f64> = done.iter().map(f).collect();
        (all[..h].to_vec(), all[h..].to_vec(), all)
    };
    let (xa, xb, xs) = col(|r| r.x as f64);
    let (pa, pb, ps) = col(|r| r.psi);
    let (ma, mb, _) = col(|r| r.mback as f64);
    Ok(HalvesReport {
        x: ks_two_sample(&xa, &xb)?,
        psi: ks_two_sample(&pa, &pb)?,
        mback: ks_two_sample(&ma, &mb)?,
        lag1_x: lag1_autocorrelation(&xs),
        lag1_psi: lag1_autocorrelation(&ps),
        n: done.len(),
    })
}

/// Log-linear fit of the empirical survival function of the backtrack
/// depth, `P(M ≥ m)` for `m = 1, 2, ...` while at least 5 records remain.
pub fn mback_tail_fit(records: &[RegenRecord]) -> Result<stats::LogLinearFit> {
    let done = complete(records);
    let n = done.len() as u64;
    let mut points = Vec::new();
    let mut m = 1;
    loop {
        let k = done.iter().filter(|r| r.mback >= m).count() as u64;
        if k < 5 {
            break;
        }
        points.push((m as f64, k as f64 / n as f64, n));
        m += 1;
    }
    stats::fit_log_linear(&points)
}

/// Density of the contact process started from everything.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaEstimate {
    pub density: Estimate,
    pub left: Estimate,
    pub right: Estimate,
    /// Density at `T/2`, for the stationarity check.
    pub half_time: Estimate,
}

impl ThetaEstimate {
    pub fn stationary(&self) -> bool {
        let se = libm::hypot(self.density.se, self.half_time.se);
        (self.density.value - self.half_time.value).abs() <= 3.0 * se
    }

    pub fn symmetric(&self) -> bool {
        let se = libm::hypot(self.left.se, self.right.se);
        (self.left.value - self.right.value).abs() <= 3.0 * se
    }
}

/// Occupied fraction of `[−h, h]`, `h = window / 2`, at time `T` under the
/// contact process with rate `mu` started from a window wide enough that
/// the measured sites are exact.
pub fn estimate_theta<R: Replicas>(runner: &R, mu: f64, window: Site, t: f64, reps: u64, seed: u64) -> Result<ThetaEstimate> {
    if window < 2 {
        return Err(param("window must be at least 2"));
    }
    let h = window / 2;
    let w = h + surrogate_width(mu, t);
    let runs = run_seeded(runner, seed, reps, |sd| -> Result<[f64; 4]> {
        let c = Construction::contact(sd, mu, 1, t)?;
        let z = xi_z_surrogate(&c, mu, w, t)?;
        let (fl, fr) = z.fronts.at(t);
        if fl >= -h || fr <= h {
            return Err(Error::WidthCertificate(alloc::format!("fronts ({fl}, {fr}) reach [-{h}, {h}]")));
        }
        let frac = |cfg: &Configuration, a: Site, b: Site| {
            (a..=b).filter(|&x| cfg.get(x) == INFECTED).count() as f64 / (b - a + 1) as f64
        };
        let end = z.trajectory.state_at(t);
        let mid = z.trajectory.state_at(t / 2.0);
        Ok([frac(&end, -h, h), frac(&end, -h, -1), frac(&end, 1, h), frac(&mid, -h, h)])
    });
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let col = |i: usize| Estimate::mean_of(&runs.iter().map(|r| r[i]).collect::<Vec<_>>());
    Ok(ThetaEstimate { density: col(0), left: col(1), right: col(2), half_time: col(3) })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaEstimate {
    pub at_s: Estimate,
    pub at_2s: Estimate,
}

/// Fraction of single-site three-state processes alive at `S` and `2S`.
pub fn estimate_beta<R: Replicas>(runner: &R, p: &ProcessParams, s: f64, reps: u64, seed: u64) -> Result<BetaEstimate> {
    let runs = run_seeded(runner, seed, reps, |sd| -> Result<(bool, bool)> {
        let c = p.construction(sd, 2.0 * s)?;
        let tr = Evolve::three_state(&c, p)?.until(2.0 * s).run(&Configuration::standard())?;
        Ok((tr.alive_at(s), tr.alive_at(2.0 * s)))
    });
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let k1 = runs.iter().filter(|r| r.0).count() as u64;
    let k2 = runs.iter().filter(|r| r.1).count() as u64;
    Ok(BetaEstimate { at_s: Estimate::proportion(k1, reps), at_2s: Estimate::proportion(k2, reps) })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthReport {
    /// Mean of `|I_T| / T` over surviving replicas.
    pub observed: Estimate,
    /// `2 α̂ θ̂` with a propagated standard error.
    pub predicted: Estimate,
    pub relative_error: f64,
    pub skipped: bool,
}

/// Compares `|I_T|/T` on survival with `2 α̂ θ̂`. Skipped for `T < 10`.
pub fn growth_lln_check<R: Replicas>(
    runner: &R,
    p: &ProcessParams,
    t: f64,
    reps: u64,
    alpha: &SpeedEstimate,
    theta: &Estimate,
    seed: u64,
) -> Result<GrowthReport> {
    let predicted = Estimate::new(
        2.0 * alpha.alpha_hat * theta.value,
        2.0 * libm::hypot(alpha.se * theta.value, alpha.alpha_hat * theta.se),
        alpha.n_records as u64,
    );
    if t < 10.0 {
        return Ok(GrowthReport { observed: Estimate::new(f64::NAN, f64::NAN, 0), predicted, relative_error: f64::NAN, skipped: true });
    }
    let runs = run_seeded(runner, seed, reps, |sd| -> Result<Option<f64>> {
        let c = p.construction(sd, t)?;
        let tr = Evolve::three_state(&c, p)?.until(t).run(&Configuration::standard())?;
        let s = tr.final_sample();
        Ok((s.count > 0).then(|| s.count as f64 / t))
    });
    let sizes: Vec<f64> = runs.into_iter().collect::<Result<Vec<_>>>()?.into_iter().flatten().collect();
    let observed = Estimate::mean_of(&sizes);
    let relative_error = (observed.value - predicted.value).abs() / predicted.value;
    Ok(GrowthReport { observed, predicted, relative_error, skipped: sizes.is_empty() })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceReport {
    /// `P(I_t ∩ F = ∅)`.
    pub lhs: Estimate,
    pub beta: Estimate,
    /// Void probability `P(ξ^Z_t ∩ F = ∅)`.
    pub phi: Estimate,
    /// `(1 − β̂) + β̂ φ̂` with a propagated standard error.
    pub rhs: Estimate,
    pub z: f64,
}

/// Complete-convergence check from three independent replica groups.
pub fn check_complete_convergence<R: Replicas>(
    runner: &R,
    p: &ProcessParams,
    f: &[Site],
    t: f64,
    reps: u64,
    seed: u64,
) -> Result<ConvergenceReport> {
    let single = |master: u64| -> Result<Vec<Trajectory>> {
        run_seeded(runner, master, reps, |sd| {
            let c = p.construction(sd, t)?;
            Evolve::three_state(&c, p)?.until(t).run(&Configuration::standard())
        })
        .into_iter()
        .collect()
    };
    let void = |cfg: &Configuration| f.iter().all(|&x| cfg.get(x) != INFECTED);
    let g1 = single(derive_key(seed, &[1]))?;
    let k_lhs = g1.iter().filter(|tr| void(&tr.state_at(t))).count() as u64;
    let g2 = single(derive_key(seed, &[2]))?;
    let k_alive = g2.iter().filter(|tr| tr.alive_at(t)).count() as u64;
    // Self-duality: P(ξ^Z_t ∩ F = ∅) = P(ξ^F_t = ∅).
    let phis = run_seeded(runner, derive_key(seed, &[3]), reps, |sd| -> Result<bool> {
        let c = Construction::contact(sd, p.mu, 1, t)?;
        let tr = Evolve::contact(&c, p.mu)?.until(t).run(&Configuration::from_sites(f.iter().copied(), RECOVERED))?;
        Ok(!tr.alive_at(t))
    });
    let k_phi = phis.into_iter().collect::<Result<Vec<_>>>()?.into_iter().filter(|&b| b).count() as u64;
    let lhs = Estimate::proportion(k_lhs, reps);
    let beta = Estimate::proportion(k_alive, reps);
    let phi = Estimate::proportion(k_phi, reps);
    let value = (1.0 - beta.value) + beta.value * phi.value;
    let se = libm::hypot((1.0 - phi.value) * beta.se, beta.value * phi.se);
    let rhs = Estimate::new(value, se, reps);
    let comb = libm::hypot(lhs.se, rhs.se);
    let diff = lhs.value - rhs.value;
    let z = if comb > 0.0 { diff / comb } else if diff == 0.0 { 0.0 } else { f64::INFINITY };
    Ok(ConvergenceReport { lhs, beta, phi, rhs, z })
}

const CSE_FIRST_DEPTH: Site = 24;
const CSE_MAX_DEPTH: Site = 1 << 14;

/// First time in `(s, end]` at which `big`'s rightmost site exceeds
/// `small`'s (an extinct process has rightmost −∞).
fn first_exceed(big: &Trajectory, small: &Trajectory, s: f64, end: f64) -> Option<f64> {
    let mut times: Vec<f64> = big.samples.iter().chain(&small.samples).map(|x| x.time).filter(|&t| t > s && t <= end).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    times.into_iter().find(|&t| match (big.rightmost_at(t), small.rightmost_at(t)) {
        (Some(r_big), Some(r)) => r_big > r,
        (Some(_), None) => true,
        _ => false,
    })
}

/// First time in `(s, s_end]` at which the process started at time `s`
/// from `{y ≤ x}` has a rightmost site beyond that of the process started
/// from `{x}`, or `None` if they agree throughout.
///
/// The half-line process is bracketed between the process on `[b, ∞)`
/// started from `[b, x]` and the same process with `[b − M, b − 1]`
/// permanently infected; `b` is pushed left until both brackets give the
/// same answer.
pub fn cse_failure_time(c: &Construction, mu: f64, x: Site, s: f64, s_end: f64) -> Result<Option<f64>> {
    let ev = Evolve::contact(c, mu)?.from(s).until(s_end);
    let m = c.range() as Site;
    let small = ev.run(&Configuration::from_sites([x], RECOVERED))?;
    // The half-line process never dies, so the death of the single-site
    // process is a certain failure.
    let end = small.died_at.unwrap_or(s_end);
    let ev = ev.until(end);
    let cap = |f: Option<f64>| match (f, small.died_at) {
        (Some(f), Some(d)) => Some(f.min(d)),
        (f, d) => f.or(d),
    };
    let mut depth = CSE_FIRST_DEPTH;
    loop {
        let b = x - depth;
        let start = Configuration::from_sites(b..=x, RECOVERED);
        let lower = ev.clone().boundary(Boundary { pinned: None, floor: Some(b) }).run(&start)?;
        let upper = ev.clone().boundary(Boundary { pinned: Some((b - m, b - 1)), floor: None }).run(&start)?;
        let f_lo = cap(first_exceed(&lower, &small, s, end));
        let f_hi = cap(first_exceed(&upper, &small, s, end));
        if f_lo == f_hi {
            return Ok(f_lo);
        }
        if depth >= CSE_MAX_DEPTH {
            return Err(Error::WidthCertificate(alloc::format!("half-line bracket still open at depth {depth}")));
        }
        depth *= 2;
    }
}

/// Regeneration points of the range-M contact process from `{0}`.
#[derive(Debug, Clone, PartialEq)]
pub struct CseRun {
    /// Increments between consecutive accepted points; the last one is
    /// censored. The stretch before the first point is not a record.
    pub records: Vec<RegenRecord>,
    pub points: Vec<(Site, f64)>,
    /// Times at which a candidate failed.
    pub failures: Vec<f64>,
    pub r_end: Option<Site>,
}

/// Searches the rightmost path of `ξ^0` for points `r_t × t` after which
/// the single-site and half-line processes keep the same rightmost site for
/// `S` time units. Candidates start at time 1; after an acceptance at `s`
/// the next candidate is at `s + 1`, after a failure at `f` it is at `f`.
pub fn cse_regeneration(m: u32, mu: f64, seed: u64, t: f64, s: f64) -> Result<CseRun> {
    if !(s > 0.0 && s + 1.0 <= t) {
        return Err(param("need S > 0 and S + 1 <= T"));
    }
    let p = ProcessParams::contact(mu)?.with_range(m)?;
    let c = p.construction(seed, t)?;
    let path = Evolve::contact(&c, mu)?.until(t).run(&Configuration::from_sites([0], RECOVERED))?;
    let mut run = CseRun { records: Vec::new(), points: Vec::new(), failures: Vec::new(), r_end: path.rightmost_at(t) };
    let mut cand = 1.0;
    while cand + s <= t {
        let Some(x) = path.rightmost_at(cand) else { break };
        match cse_failure_time(&c, mu, x, cand, cand + s)? {
            None => {
                if let Some(&(x0, t0)) = run.points.last() {
                    let low = min_before(&path, t0, cand).unwrap_or(x0);
                    run.records.push(RegenRecord { x: x - x0, psi: cand - t0, mback: x0 - low, censored: false });
                }
                run.points.push((x, cand));
                cand += 1.0;
            }
            Some(f) => {
                run.failures.push(f);
                cand = f;
            }
        }
    }
    if let Some(&(x0, t0)) = run.points.last() {
        let top = path.max_rightmost(t0, t).unwrap_or(x0);
        let low = path.min_rightmost(t0, t).unwrap_or(x0);
        run.records.push(RegenRecord { x: top - x0, psi: t - t0, mback: x0 - low, censored: true });
    } else {
        run.records.push(RegenRecord { x: 0, psi: t, mback: 0, censored: true });
    }
    Ok(run)
}

/// `p̂(S)`: fraction of replicas whose single-site and half-line processes
/// from `0 × 0` keep equal rightmost sites on `[0, S]`.
pub fn estimate_cse_probability<R: Replicas>(
    runner: &R,
    m: u32,
    mu: f64,
    s_grid: &[f64],
    reps: u64,
    seed: u64,
) -> Result<Vec<(f64, Estimate)>> {
    let s_max = s_grid.iter().copied().fold(0.0, f64::max);
    let fails = run_seeded(runner, seed, reps, |sd| -> Result<Option<f64>> {
        let c = Construction::contact(sd, mu, m, s_max)?;
        cse_failure_time(&c, mu, 0, 0.0, s_max)
    });
    let fails = fails.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(s_grid
        .iter()
        .map(|&s| {
            let k = fails.iter().filter(|f| f.is_none_or(|f| f > s)).count() as u64;
            (s, Estimate::proportion(k, reps))
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::processes::Sample;
    use crate::replicas::Sequential;
    use crate::rng::Stream;

    fn path_from(points: &[(f64, Site)], end: f64) -> Trajectory {
        Trajectory {
            start_time: 0.0,
            end_time: end,
            initial: Configuration::eta_bar(),
            samples: points.iter().map(|&(time, r)| Sample { time, rightmost: Some(r), leftmost: None, count: 1 }).collect(),
            changes: Vec::new(),
            snapshots: Vec::new(),
            died_at: None,
            ever_infected: Vec::new(),
            construction: 0,
            truncation: None,
        }
    }

    fn rec(x: i64, psi: f64) -> RegenRecord {
        RegenRecord { x, psi, mback: 0, censored: false }
    }

    #[test]
    fn first_restart_survives() {
        let path = path_from(&[(0.0, 0), (1.0, 1), (2.0, 2)], 10.0);
        let b = walk_break_points(&path, 10.0, 3.0, |_, _| Ok(None)).unwrap();
        assert_eq!(b.records[0], RegenRecord { x: 1, psi: 1.0, mback: 0, censored: false });
        assert!(b.records.last().unwrap().censored);
    }

    #[test]
    fn restart_skips_levels_reached_before_death() {
        // r̄: 0 → 1 at t=1, 2 at 2, 3 at 3, back to 1 at 4, 4 at 5 ... 6 at 7.
        let path = path_from(&[(0.0, 0), (1.0, 1), (2.0, 2), (3.0, 3), (4.0, 1), (5.0, 4), (6.0, 5), (7.0, 6)], 20.0);
        let mut asked = Vec::new();
        let b = walk_break_points(&path, 20.0, 2.0, |k, _| {
            asked.push(k);
            Ok(if k == 1 { Some(4.5) } else { None })
        })
        .unwrap();
        // Candidate 1 dies at 4.5; max r̄ over [1, 4.5) is 3, so 4 is next.
        assert_eq!(asked, alloc::vec![1, 4, 5, 6]);
        assert_eq!(b.records[0], RegenRecord { x: 4, psi: 5.0, mback: 0, censored: false });
        assert_eq!(b.points[0], (4, 5.0));
        assert_eq!(b.running_max_violations, 0);
    }

    #[test]
    fn nothing_accepted_gives_sentinel_only() {
        let path = path_from(&[(0.0, 0), (1.0, 1)], 5.0);
        let b = walk_break_points(&path, 5.0, 10.0, |_, _| Ok(None)).unwrap();
        assert_eq!(b.records.len(), 1);
        assert!(b.records[0].censored);
    }

    #[test]
    fn alpha_of_identical_records() {
        let r = alloc::vec![rec(2, 1.0); 40];
        let a = estimate_alpha(&r).unwrap();
        assert_eq!(a.alpha_hat, 2.0);
        assert_eq!(a.se, 0.0);
        assert!(estimate_sigma2(&r, a.alpha_hat).unwrap().degenerate);
        assert!(matches!(clt_diagnostic(&r, 2.0, 0.0), Err(Error::InsufficientData { .. })));
    }

    #[test]
    fn alpha_scales_and_needs_data() {
        let mut s = Stream::new(5);
        let r: Vec<RegenRecord> = (0..100).map(|_| rec(1 + s.below(5) as i64, 0.1 + s.next_f64())).collect();
        let a = estimate_alpha(&r).unwrap();
        let doubled: Vec<RegenRecord> = r.iter().map(|x| RegenRecord { psi: 2.0 * x.psi, ..*x }).collect();
        assert_eq!(estimate_alpha(&doubled).unwrap().alpha_hat, a.alpha_hat / 2.0);
        assert!(matches!(estimate_alpha(&r[..10]), Err(Error::InsufficientData { needed: 30, got: 10 })));
        let proportional: Vec<RegenRecord> = (1..50).map(|i| rec(3 * i, i as f64)).collect();
        assert_eq!(estimate_alpha(&proportional).unwrap().alpha_hat, 3.0);
    }

    #[test]
    fn censored_sentinel_does_not_change_estimates() {
        let mut s = Stream::new(8);
        let mut r: Vec<RegenRecord> = (0..60).map(|_| rec(1 + s.below(3) as i64, 0.5 + s.next_f64())).collect();
        let a = estimate_alpha(&r).unwrap();
        r.push(RegenRecord { x: 100, psi: 0.1, mback: 7, censored: true });
        assert_eq!(estimate_alpha(&r).unwrap(), a);
    }

    #[test]
    fn sigma2_matches_closed_form() {
        // X ~ Poisson-free construction: Ψ ~ Exp(1), X = round-free integer
        // drawn independently as 1 or 3 with equal odds. Then α = 2 and
        // E(X − 2Ψ)² = Var X + 4 Var Ψ = 1 + 4 = 5, E Ψ = 1.
        let mut s = Stream::new(21);
        let n = 200_000;
        let r: Vec<RegenRecord> = (0..n).map(|_| rec(if s.bernoulli(0.5) { 3 } else { 1 }, s.exponential(1.0))).collect();
        let v = estimate_sigma2(&r, 2.0).unwrap().value;
        // The ratio's SE is about sqrt(Var(d²))/n^½ ≈ 0.03 here.
        assert!((v - 5.0).abs() < 0.2, "{v}");
    }

    #[test]
    fn clt_calibration_on_normal_increments() {
        let mut passes = 0;
        for rep in 0..100 {
            let mut s = Stream::from_words(99, &[rep]);
            let r: Vec<RegenRecord> = (0..400)
                .map(|_| {
                    let psi = 1.0;
                    // Box–Muller.
                    let (u1, u2) = (s.next_f64(), s.next_f64());
                    let g = libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * core::f64::consts::PI * u2);
                    rec(libm::round(10.0 + 3.0 * g) as i64, psi)
                })
                .collect();
            let a = estimate_alpha(&r).unwrap();
            let s2 = estimate_sigma2(&r, a.alpha_hat).unwrap();
            if clt_diagnostic(&r, a.alpha_hat, s2.value).unwrap().ks.p > 0.01 {
                passes += 1;
            }
        }
        assert!(passes >= 95, "{passes}");
    }

    #[test]
    fn beta_is_zero_without_infection() {
        let p = ProcessParams::new(0.0, 2.0).unwrap();
        let b = estimate_beta(&Sequential, &p, 40.0, 200, 1).unwrap();
        assert_eq!(b.at_s.value, 0.0);
    }

    #[test]
    fn window_drops_origin_record_and_cuts_by_start() {
        let mut r = alloc::vec![rec(5, 4.0), rec(1, 1.0), rec(2, 3.0), rec(1, 2.0), rec(3, 1.0)];
        r.push(RegenRecord { censored: true, ..rec(0, 1.0) });
        // starts: 4, 5, 8, 10, 11
        let w = regeneration_window(&r, 7.5).unwrap();
        assert_eq!(w, alloc::vec![rec(1, 1.0), rec(2, 3.0)]);
        assert_eq!(regeneration_window(&r, 8.0).unwrap().len(), 3);
        assert_eq!(regeneration_window(&r, 10.0).unwrap().len(), 4);
        assert_eq!(regeneration_window(&r, 11.0), None);
        assert_eq!(regeneration_window(&r, 3.0).unwrap(), alloc::vec![]);
    }

    #[test]
    fn break_points_on_real_runs() {
        let p = ProcessParams::new(1.0, 2.0).unwrap();
        for seed in 0..5 {
            let run = find_break_points(&p, seed, 60.0, 10.0).unwrap();
            assert_eq!(run.breaks.running_max_violations, 0);
            for r in complete(&run.breaks.records) {
                assert!(r.x >= 1 && r.psi > 0.0 && r.mback >= 0);
            }
            let mut last = (0, 0.0);
            for &(k, t) in &run.breaks.points {
                assert!(k > last.0 && t > last.1);
                last = (k, t);
            }
        }
    }

    #[test]
    fn cse_at_time_zero_is_certain_then_decreases() {
        let curve = estimate_cse_probability(&Sequential, 1, 2.0, &[0.0, 2.0, 5.0], 200, 3).unwrap();
        assert_eq!(curve[0].1.value, 1.0);
        assert!(curve[1].1.value >= curve[2].1.value);
    }

    #[test]
    fn cse_bracket_agrees_with_truncation_for_nearest_neighbours() {
        // For M = 1 the truncated half-line has the exact right edge while
        // it lives, which gives an independent oracle.
        for seed in 0..20 {
            let c = Construction::contact(seed, 2.0, 1, 10.0).unwrap();
            let f = cse_failure_time(&c, 2.0, 0, 0.0, 10.0).unwrap();
            let ev = Evolve::contact(&c, 2.0).unwrap().until(10.0);
            let half = ev.run(&Configuration::from_sites(-200..=0, RECOVERED)).unwrap();
            let single = ev.run(&Configuration::from_sites([0], RECOVERED)).unwrap();
            assert_eq!(f, first_exceed(&half, &single, 0.0, 10.0), "seed {seed}");
        }
    }

    #[test]
    fn cse_records_are_well_formed() {
        let run = cse_regeneration(2, 2.0, 11, 40.0, 8.0).unwrap();
        assert!(run.records.last().unwrap().censored);
        for w in run.points.windows(2) {
            assert!(w[1].1 >= w[0].1 + 1.0);
        }
    }
}
