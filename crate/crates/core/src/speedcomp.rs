//! Competitions at the running maximum of the half-line process and the
//! comparison of its speed with the contact process at rate μ.
//!
//! While the rightmost site `r̄` of the half-line three-state process sits at
//! its running maximum `x̄`, three clocks race: the λ-arrow `x̄ → x̄+1`
//! (which moves the maximum), the δ-arrow `x̄ → x̄+1` (which does nothing to
//! the three-state process but infects `x̄+1` in the contact process at rate
//! μ) and the recovery mark at `x̄`. Each race is one competition.

use alloc::vec::Vec;

use crate::coupling::{Violation, ViolationReport};
use crate::error::{param, Error, Result};
use crate::graphical::{ClockKind, Construction, EventMark, Site};
use crate::processes::{Change, Configuration, Evolve, ProcessParams, Replay, Sample, Trajectory, RECOVERED};
use crate::replicas::{run_seeded, Replicas};
use crate::stats::{self, Estimate};

const FIRST_DEPTH: Site = 32;
const MAX_DEPTH: Site = 1 << 16;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Tally {
    started: u64,
    f: u64,
    xbar: u64,
    d: u64,
    jump_errors: u64,
}

#[derive(Debug, Clone)]
struct Counted {
    tally: Tally,
    upsilon: Vec<f64>,
    in_progress: bool,
    path: Trajectory,
}

/// Runs the half-line process on `c` and counts competitions up to `t`.
fn count_competitions(c: &Construction, p: &ProcessParams, t: f64) -> Result<Counted> {
    let ev = Evolve::three_state(c, p)?.until(t);
    ev.half_line_ok()?;
    let mut depth = FIRST_DEPTH;
    loop {
        let mut tally = Tally { started: 1, ..Tally::default() };
        let mut upsilon = Vec::new();
        let mut xbar: Site = 0;
        let mut prev: Option<Site> = Some(0);
        let mut obs = |m: &EventMark, ch: Option<&Change>, s: &Sample| {
            let id = m.clock;
            if prev == Some(xbar) && id.source == xbar {
                let resolved = match id.kind {
                    ClockKind::LambdaArrow if id.target == xbar + 1 => {
                        tally.xbar += 1;
                        xbar += 1;
                        if ch.map(|c| c.site) != Some(xbar) || s.rightmost != Some(xbar) {
                            tally.jump_errors += 1;
                        }
                        true
                    }
                    ClockKind::DeltaArrow if id.target == xbar + 1 => {
                        tally.f += 1;
                        upsilon.push(m.time);
                        true
                    }
                    ClockKind::Recovery => {
                        tally.d += 1;
                        true
                    }
                    _ => false,
                };
                if resolved && s.rightmost == Some(xbar) {
                    tally.started += 1;
                }
            } else if s.rightmost == Some(xbar) && prev != Some(xbar) {
                tally.started += 1;
            }
            if s.rightmost.is_some_and(|r| r > xbar) {
                tally.jump_errors += 1;
                xbar = s.rightmost.unwrap_or(xbar);
            }
            prev = s.rightmost;
        };
        let path = ev.run_observed(&Configuration::eta_bar().truncated(depth), &mut obs)?;
        if path.died_at.is_none() {
            let in_progress = prev == Some(xbar);
            return Ok(Counted { tally, upsilon, in_progress, path });
        }
        if depth >= MAX_DEPTH {
            return Err(Error::WidthCertificate(alloc::format!("half-line truncated at depth {depth} died")));
        }
        depth *= 4;
    }
}

/// One realisation of the competition construction up to the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct CompetitionTrace {
    pub horizon: f64,
    /// Resolved competitions; one still running at the horizon is not counted.
    pub n: u64,
    /// δ-arrow wins.
    pub f: u64,
    /// λ-arrow wins, equal to the running maximum `x̄_T`.
    pub xbar: u64,
    /// Recovery wins.
    pub d: u64,
    pub in_progress: bool,
    /// `(time, r̄_t)` at every change of the half-line process.
    pub rbar_path: Vec<(f64, Site)>,
    /// `(time, R_t)` for the contact process at rate μ from the left half-line.
    pub r_path: Vec<(f64, Site)>,
    /// Launch times `υ_n` of the contact-process cascade.
    pub upsilon_times: Vec<f64>,
    /// Maximum moves that were not a `+1` jump at a λ-win.
    pub jump_errors: u64,
    /// Hand-offs where `ξ^{n-1} ≠ ξ^n ∪ {r̄+1}`.
    pub handoff_violations: u64,
    /// Times where `R_t < r̄_t`.
    pub dominance_violations: u64,
}

impl CompetitionTrace {
    /// `R_T - r̄_T`.
    pub fn gap(&self) -> i64 {
        let last = |v: &[(f64, Site)]| v.last().map_or(0, |x| x.1);
        last(&self.r_path) - last(&self.rbar_path)
    }

    pub fn rbar_end(&self) -> Site {
        self.rbar_path.last().map_or(0, |x| x.1)
    }

    pub fn r_end(&self) -> Site {
        self.r_path.last().map_or(0, |x| x.1)
    }
}

fn rightmost_path(t: &Trajectory) -> Vec<(f64, Site)> {
    let mut out: Vec<(f64, Site)> = Vec::new();
    for s in &t.samples {
        if let Some(r) = s.rightmost {
            if out.last().is_none_or(|l| l.1 != r) {
                out.push((s.time, r));
            }
        }
    }
    out
}

/// Replays every stage of the cascade: the contact process launched at
/// `υ_{n-1}` from the infected set of the half-line process must coincide
/// with that set until `υ_n` and exceed it by exactly `r̄ + 1` there.
fn handoffs(c: &Construction, mu: f64, path: &Trajectory, upsilon: &[f64]) -> Result<u64> {
    let ev = Evolve::contact(c, mu)?;
    let mut replay = Replay::new(path);
    let mut launch = (path.start_time, replay.config().infected());
    let mut bad = 0;
    for &u in upsilon {
        let xi = ev.clone().from(launch.0).until(u).run(&Configuration::from_sites(launch.1.iter().copied(), RECOVERED))?;
        let got = xi.state_at(u).infected();
        replay.advance_to(u);
        let now = replay.config().infected();
        let mut want = now.clone();
        if let Some(&r) = now.last() {
            want.push(r + 1);
        }
        if got != want {
            bad += 1;
        }
        launch = (u, now);
    }
    Ok(bad)
}

/// Competition counts, the contact process at rate μ from the left
/// half-line, and an exact replay of the cascade on one construction.
pub fn competition_trace(lambda: f64, mu: f64, seed: u64, t: f64) -> Result<CompetitionTrace> {
    if lambda > mu {
        return Err(Error::Unsupported("the competition construction needs μ ≥ λ".into()));
    }
    if !(lambda > 0.0 && t >= 0.0) {
        return Err(param("need λ > 0 and T ≥ 0"));
    }
    let p = ProcessParams::new(lambda, mu)?;
    let c = p.construction(seed, t)?;
    let counted = count_competitions(&c, &p, t)?;
    let big = Evolve::contact(&c, mu)?.until(t).run(&Configuration::half_line(0))?;
    let rbar_path = rightmost_path(&counted.path);
    let r_path = rightmost_path(&big);
    let mut dominance = 0;
    for time in crate::processes::merged_change_times(&[&counted.path, &big]) {
        if big.rightmost_at(time) < counted.path.rightmost_at(time) {
            dominance += 1;
        }
    }
    let handoff_violations = handoffs(&c, mu, &counted.path, &counted.upsilon)?;
    let k = counted.tally;
    Ok(CompetitionTrace {
        horizon: t,
        n: k.started - counted.in_progress as u64,
        f: k.f,
        xbar: k.xbar,
        d: k.d,
        in_progress: counted.in_progress,
        rbar_path,
        r_path,
        upsilon_times: counted.upsilon,
        jump_errors: k.jump_errors,
        handoff_violations,
        dominance_violations: dominance,
    })
}

/// Mean δ-wins over mean λ-wins against `(μ - λ) / λ`, plus the Poisson
/// bound on the mean running maximum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FracPunchReport {
    pub f: Estimate,
    pub xbar: Estimate,
    pub ratio: f64,
    /// Delta-method standard error of `ratio`.
    pub ratio_se: f64,
    pub expected: f64,
    pub relative_error: f64,
    /// λ = μ: both sides vanish.
    pub exact: bool,
    /// `(mean x̄_T - λT) / se`; the bound holds if this is below 3.
    pub poisson_z: f64,
    /// Replicas whose counters did not add up.
    pub identity_failures: u64,
}

impl FracPunchReport {
    pub fn within(&self, rel: f64) -> bool {
        self.exact || self.relative_error <= rel
    }
}

pub fn verify_fracpunch<R: Replicas>(runner: &R, lambda: f64, mu: f64, t: f64, reps: u64, seed: u64) -> Result<FracPunchReport> {
    if lambda > mu {
        return Err(Error::Unsupported("the competition construction needs μ ≥ λ".into()));
    }
    let p = ProcessParams::new(lambda, mu)?;
    let runs = run_seeded(runner, seed, reps, |sd| -> Result<(f64, f64, bool)> {
        let c = p.construction(sd, t)?;
        let k = count_competitions(&c, &p, t)?;
        let n = k.tally.started - k.in_progress as u64;
        let ok = n == k.tally.f + k.tally.xbar + k.tally.d && k.tally.jump_errors == 0;
        Ok((k.tally.f as f64, k.tally.xbar as f64, ok))
    });
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let fs: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let xs: Vec<f64> = runs.iter().map(|r| r.1).collect();
    let identity_failures = runs.iter().filter(|r| !r.2).count() as u64;
    let (f, xbar) = (Estimate::mean_of(&fs), Estimate::mean_of(&xs));
    let expected = (mu - lambda) / lambda;
    let poisson_z = if xbar.se > 0.0 { (xbar.value - lambda * t) / xbar.se } else { f64::NEG_INFINITY };
    if lambda == mu {
        return Ok(FracPunchReport { f, xbar, ratio: 0.0, ratio_se: 0.0, expected, relative_error: 0.0, exact: true, poisson_z, identity_failures });
    }
    if xbar.value == 0.0 {
        return Err(Error::Degenerate("no λ-wins in any replica".into()));
    }
    let ratio = f.value / xbar.value;
    let resid: Vec<f64> = fs.iter().zip(&xs).map(|(a, b)| a - ratio * b).collect();
    let ratio_se = libm::sqrt(stats::variance(&resid) / fs.len() as f64) / xbar.value;
    let relative_error = (ratio - expected).abs() / expected;
    Ok(FracPunchReport { f, xbar, ratio, ratio_se, expected, relative_error, exact: false, poisson_z, identity_failures })
}

/// `E(R_T - r̄_T) ≥ E(F_T)` on shared constructions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapReport {
    pub gap: Estimate,
    pub f: Estimate,
    /// Paired `(R_T - r̄_T) - F_T`.
    pub difference: Estimate,
    pub holds: bool,
    /// Replicas with a negative gap; impossible by monotonicity.
    pub negative_gaps: u64,
}

pub fn verify_gap<R: Replicas>(runner: &R, lambda: f64, mu: f64, t: f64, reps: u64, seed: u64) -> Result<GapReport> {
    if lambda > mu {
        return Err(Error::Unsupported("the competition construction needs μ ≥ λ".into()));
    }
    let p = ProcessParams::new(lambda, mu)?;
    let runs = run_seeded(runner, seed, reps, |sd| -> Result<(f64, f64)> {
        let c = p.construction(sd, t)?;
        let k = count_competitions(&c, &p, t)?;
        let big = Evolve::contact(&c, mu)?.until(t).run(&Configuration::half_line(0))?;
        let gap = big.rightmost_at(t).unwrap_or(0) - k.path.rightmost_at(t).unwrap_or(0);
        Ok((gap as f64, k.tally.f as f64))
    });
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let gaps: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let fs: Vec<f64> = runs.iter().map(|r| r.1).collect();
    let diffs: Vec<f64> = runs.iter().map(|r| r.0 - r.1).collect();
    let difference = Estimate::mean_of(&diffs);
    let holds = difference.value >= -3.0 * difference.se || difference.value >= 0.0;
    Ok(GapReport {
        gap: Estimate::mean_of(&gaps),
        f: Estimate::mean_of(&fs),
        difference,
        holds,
        negative_gaps: gaps.iter().filter(|&&g| g < 0.0).count() as u64,
    })
}

/// `α ≤ (λ/μ) β` with both speeds measured on the same constructions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedInequalityReport {
    /// `r̄_T / T` of the half-line three-state process.
    pub alpha: Estimate,
    /// `R_T / T` of the half-line contact process at rate μ.
    pub beta_speed: Estimate,
    pub bound: f64,
    /// `bound - alpha`.
    pub slack: f64,
    pub combined_se: f64,
    pub holds: bool,
}

pub fn speed_inequality<R: Replicas>(runner: &R, lambda: f64, mu: f64, t: f64, reps: u64, seed: u64) -> Result<SpeedInequalityReport> {
    if !(t > 0.0) {
        return Err(param("T must be positive"));
    }
    let p = ProcessParams::new(lambda, mu)?;
    let runs = run_seeded(runner, seed, reps, |sd| -> Result<(f64, f64)> {
        let c = p.construction(sd, t)?;
        let small = Evolve::three_state(&c, &p)?.until(t).run(&Configuration::eta_bar())?;
        let big = Evolve::contact(&c, mu)?.until(t).run(&Configuration::half_line(0))?;
        Ok((small.rightmost_at(t).unwrap_or(0) as f64 / t, big.rightmost_at(t).unwrap_or(0) as f64 / t))
    });
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let alpha = Estimate::mean_of(&runs.iter().map(|r| r.0).collect::<Vec<_>>());
    let beta_speed = Estimate::mean_of(&runs.iter().map(|r| r.1).collect::<Vec<_>>());
    let k = lambda / mu;
    let bound = k * beta_speed.value;
    let combined_se = libm::hypot(alpha.se, k * beta_speed.se);
    let slack = bound - alpha.value;
    Ok(SpeedInequalityReport { alpha, beta_speed, bound, slack, combined_se, holds: slack >= -3.0 * combined_se })
}

/// Checks `x̄_{0,s} + x̄_{s,u} ≥ x̄_{0,u}` on every replica, where the second
/// term comes from restarting the half-line process at `x̄_s` at time `s`.
pub fn subadditivity_check<R: Replicas>(
    runner: &R,
    lambda: f64,
    mu: f64,
    s: f64,
    u: f64,
    reps: u64,
    seed: u64,
) -> Result<ViolationReport> {
    if !(0.0 <= s && s <= u) {
        return Err(param("need 0 ≤ s ≤ u"));
    }
    if lambda > mu {
        return Err(Error::Unsupported("subadditivity needs μ ≥ λ".into()));
    }
    let p = ProcessParams::new(lambda, mu)?;
    let runs = run_seeded(runner, seed, reps, |sd| -> Result<Option<Violation>> {
        let c = p.construction(sd, u)?;
        let ev = Evolve::three_state(&c, &p)?;
        let whole = ev.clone().until(u).run(&Configuration::eta_bar())?;
        let x_s = whole.max_rightmost(0.0, s).unwrap_or(0);
        let x_u = whole.max_rightmost(0.0, u).unwrap_or(0);
        let restart = ev.from(s).until(u).run(&Configuration::half_line(x_s))?;
        let x_su = restart.max_rightmost(s, u).unwrap_or(x_s) - x_s;
        Ok((x_s + x_su < x_u).then(|| Violation {
            time: u,
            site: Some(x_u),
            detail: alloc::format!("x̄(0,s)={x_s} x̄(s,u)={x_su} x̄(0,u)={x_u}"),
        }))
    });
    let mut report = ViolationReport { total_checks: 0, violations: Vec::new() };
    for r in runs {
        report.total_checks += 1;
        if let Some(v) = r? {
            report.violations.push(v);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::replicas::Sequential;

    #[test]
    fn equal_rates_have_no_delta_wins() {
        for seed in 0..5 {
            let tr = competition_trace(2.0, 2.0, seed, 20.0).unwrap();
            assert_eq!(tr.f, 0);
            assert!(tr.upsilon_times.is_empty());
            assert_eq!(tr.gap(), 0);
            assert_eq!(tr.dominance_violations, 0);
        }
    }

    #[test]
    fn counters_partition_competitions() {
        for seed in 0..20 {
            let tr = competition_trace(1.0, 2.0, seed, 30.0).unwrap();
            assert_eq!(tr.n, tr.f + tr.xbar + tr.d, "seed {seed}");
            assert_eq!(tr.jump_errors, 0);
            let max = tr.rbar_path.iter().map(|x| x.1).max().unwrap();
            assert_eq!(max, tr.xbar as Site);
            assert!(tr.upsilon_times.windows(2).all(|w| w[0] < w[1]));
            assert_eq!(tr.upsilon_times.len() as u64, tr.f);
        }
    }

    #[test]
    fn cascade_hands_off_exactly_and_dominates() {
        for seed in 0..20 {
            let tr = competition_trace(1.0, 3.0, seed, 20.0).unwrap();
            assert_eq!(tr.handoff_violations, 0, "seed {seed}");
            assert_eq!(tr.dominance_violations, 0);
            assert!(tr.gap() >= 0);
        }
    }

    #[test]
    fn reversed_rates_are_rejected() {
        assert!(matches!(competition_trace(2.0, 1.0, 0, 5.0), Err(Error::Unsupported(_))));
    }

    #[test]
    fn fracpunch_at_equal_rates_is_exact() {
        let r = verify_fracpunch(&Sequential, 1.5, 1.5, 10.0, 20, 1).unwrap();
        assert!(r.exact && r.within(0.0));
        assert_eq!(r.f.value, 0.0);
        assert_eq!(r.identity_failures, 0);
    }

    #[test]
    fn gap_at_equal_rates_is_zero() {
        let g = verify_gap(&Sequential, 1.0, 1.0, 10.0, 20, 2).unwrap();
        assert_eq!(g.gap.value, 0.0);
        assert!(g.holds);
    }

    #[test]
    fn speed_inequality_at_equal_rates_is_equality() {
        let r = speed_inequality(&Sequential, 2.0, 2.0, 20.0, 20, 3).unwrap();
        assert_eq!(r.alpha.value, r.beta_speed.value);
        assert!(r.holds);
    }

    #[test]
    fn subadditivity_edge_cases() {
        for (s, u) in [(0.0, 5.0), (5.0, 5.0), (2.0, 6.0)] {
            let r = subadditivity_check(&Sequential, 1.0, 2.0, s, u, 30, 4).unwrap();
            assert!(r.is_clean(), "{s} {u}: {:?}", r.violations);
        }
    }
}
