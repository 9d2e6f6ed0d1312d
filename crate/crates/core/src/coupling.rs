//! Pathwise coupling checks on a shared construction, the ordered coupling
//! defined by its rate table, the two-site closed form and the duality check.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{param, Error, Result};
use crate::graphical::{Arrows, ClockId, Construction, Site};
use crate::processes::{
    evolve_contact, simulate_finite, Change, Configuration, Evolve, FiniteGraph, ProcessParams, Replay,
    Sample, Trajectory, FRESH, INFECTED, RECOVERED,
};
use crate::replicas::{run_seeded, Replicas};
use crate::rng::Stream;
use crate::stats::{two_proportion_z, Estimate};

/// Trajectories driven by one realization.
#[derive(Debug, Clone)]
pub struct CoupledTrajectories {
    pub trajectories: Vec<Trajectory>,
    pub shared_seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub time: f64,
    pub site: Option<Site>,
    pub detail: String,
}

/// Outcome of an exact pathwise assertion.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ViolationReport {
    pub total_checks: u64,
    pub violations: Vec<Violation>,
}

impl ViolationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn merge(&mut self, other: ViolationReport) {
        self.total_checks += other.total_checks;
        self.violations.extend(other.violations);
    }

    fn fail(&mut self, time: f64, site: Option<Site>, detail: String) {
        self.violations.push(Violation { time, site, detail });
    }
}

/// Evolves every configuration in `etas` with the three-state dynamics on
/// the same construction.
pub fn co_evolve_shared(etas: &[Configuration], p: &ProcessParams, c: &Construction, t: f64) -> Result<CoupledTrajectories> {
    let ev = Evolve::three_state(c, p)?.until(t);
    let trajectories = etas.iter().map(|e| ev.run(e)).collect::<Result<Vec<_>>>()?;
    Ok(CoupledTrajectories { trajectories, shared_seed: c.seed() })
}

fn same_construction(a: &Trajectory, b: &Trajectory) -> Result<()> {
    if a.construction != b.construction {
        return Err(Error::Configuration("trajectories come from different constructions".into()));
    }
    Ok(())
}

/// Walks two trajectories through every change time of either in
/// `[t0, t1]` (and `extra` times), tracking the sites where `same` fails.
fn walk_pair(
    a: &Trajectory,
    b: &Trajectory,
    t1: f64,
    extra: &[f64],
    same: impl Fn(i8, i8) -> bool,
    mut check: impl FnMut(f64, &Replay<'_>, &Replay<'_>, &BTreeSet<Site>),
) {
    let t0 = a.start_time.max(b.start_time);
    let mut ra = Replay::new(a);
    let mut rb = Replay::new(b);
    ra.advance_to(t0);
    rb.advance_to(t0);
    let mut diff = BTreeSet::new();
    let ws = [ra.config().window(), rb.config().window()];
    if let (Some(lo), Some(hi)) = (ws.iter().flatten().map(|w| w.0).min(), ws.iter().flatten().map(|w| w.1).max()) {
        for x in lo..=hi {
            if !same(ra.config().get(x), rb.config().get(x)) {
                diff.insert(x);
            }
        }
    }
    check(t0, &ra, &rb, &diff);
    let mut times: Vec<f64> = a
        .changes
        .iter()
        .chain(&b.changes)
        .map(|c| c.time)
        .chain(extra.iter().copied())
        .filter(|&s| s > t0 && s <= t1)
        .collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    for s in times {
        let ca = ra.advance_to(s);
        let cb = rb.advance_to(s);
        for ch in ca.iter().chain(cb) {
            let x = ch.site;
            if same(ra.config().get(x), rb.config().get(x)) {
                diff.remove(&x);
            } else {
                diff.insert(x);
            }
        }
        check(s, &ra, &rb, &diff);
    }
}

/// Checks `lower <= upper` sitewise at every change time where both exist.
pub fn check_order(lower: &Trajectory, upper: &Trajectory) -> Result<ViolationReport> {
    same_construction(lower, upper)?;
    let t1 = lower.end_time.min(upper.end_time);
    let mut report = ViolationReport::default();
    walk_pair(lower, upper, t1, &[], |x, y| x <= y, |t, _, _, diff| {
        report.total_checks += 1;
        if let Some(&x) = diff.iter().next() {
            report.fail(t, Some(x), alloc::format!("{} sites above the upper process", diff.len()));
        }
    });
    Ok(report)
}

/// Checks `r_t = r'_t` and `ζ_t(x) = ζ'_t(x)` for all `x ≥ l_t` while the
/// first trajectory is alive. `b` should start from a configuration equal
/// to one at the origin and never infected to its right.
pub fn assert_rightmost_identity(a: &Trajectory, b: &Trajectory) -> Result<ViolationReport> {
    same_construction(a, b)?;
    if a.initial.right_default() != b.initial.right_default() {
        return Err(Error::Configuration("right defaults differ".into()));
    }
    let t1 = a.end_time.min(b.end_time);
    let mut report = ViolationReport::default();
    walk_pair(a, b, t1, &[], |x, y| x == y, |t, _, _, diff| {
        let s = a.sample_at(t);
        let (Some(l), Some(r)) = (s.leftmost, s.rightmost) else { return };
        report.total_checks += 1;
        let r2 = b.rightmost_at(t);
        if r2 != Some(r) {
            report.fail(t, Some(r), alloc::format!("rightmost {r} vs {r2:?}"));
        }
        if let Some(&x) = diff.range(l..).next() {
            report.fail(t, Some(x), alloc::format!("states differ right of l_t = {l}"));
        }
    });
    Ok(report)
}

/// Piecewise-constant positions of the inward influence fronts.
#[derive(Debug, Clone, PartialEq)]
pub struct Fronts {
    /// Rightmost site reachable from left of the window, from each time on.
    pub left: Vec<(f64, Site)>,
    /// Leftmost site reachable from right of the window.
    pub right: Vec<(f64, Site)>,
}

impl Fronts {
    pub fn at(&self, t: f64) -> (Site, Site) {
        let pick = |v: &[(f64, Site)]| v[v.partition_point(|e| e.0 <= t).saturating_sub(1)].1;
        (pick(&self.left), pick(&self.right))
    }

    fn times(&self) -> Vec<f64> {
        self.left.iter().chain(&self.right).map(|e| e.0).collect()
    }
}

fn arrow_ids(arrows: Arrows, x: Site, y: Site) -> impl Iterator<Item = ClockId> {
    let both = arrows == Arrows::Both;
    [Some(ClockId::lambda(x, y)), both.then(|| ClockId::delta(x, y))].into_iter().flatten()
}

/// Influence fronts entering `[lo, hi]` from outside, ignoring recovery
/// marks, up to time `t`. Any site strictly between the fronts has the same
/// state in the process started from the window and the one started from
/// all of Z.
pub fn inward_fronts(c: &Construction, arrows: Arrows, lo: Site, hi: Site, t: f64) -> Fronts {
    let m = c.range() as Site;
    let live = |id: &ClockId| c.rate(id.kind) > 0.0;
    let advance = |start: Site, dir: Site| {
        let mut f = start;
        let mut now = 0.0;
        let mut out = alloc::vec![(0.0, f)];
        loop {
            let mut best: Option<(f64, Site)> = None;
            for k in 0..m {
                let y = f - dir * k;
                for d in 1..=(m - k) {
                    let z = f + dir * d;
                    for id in arrow_ids(arrows, y, z).filter(live) {
                        if let Some(s) = c.first_after(id, now) {
                            let better = match best {
                                None => true,
                                Some((bs, bz)) => s < bs || (s == bs && dir * z > dir * bz),
                            };
                            if better {
                                best = Some((s, z));
                            }
                        }
                    }
                }
            }
            match best {
                Some((s, z)) if s <= t => {
                    f = z;
                    now = s;
                    out.push((s, f));
                }
                _ => return out,
            }
        }
    };
    Fronts { left: advance(lo - 1, 1), right: advance(hi + 1, -1) }
}

/// Finite stand-in for the contact process started from every site.
#[derive(Debug, Clone)]
pub struct ZSurrogate {
    pub trajectory: Trajectory,
    pub half_width: Site,
    pub fronts: Fronts,
}

/// Default half-width `⌈1.25 μT⌉ + 4⌈√(μT)⌉`.
pub fn surrogate_width(mu: f64, t: f64) -> Site {
    let s = mu * t;
    (libm::ceil(1.25 * s) + 4.0 * libm::ceil(libm::sqrt(s))) as Site + 2
}

/// Contact process with rate `mu` from all of `[−w, w]`, with its fronts.
pub fn xi_z_surrogate(c: &Construction, mu: f64, w: Site, t: f64) -> Result<ZSurrogate> {
    if w < 0 {
        return Err(param("half-width must be nonnegative"));
    }
    let arrows = c.arrows_for_contact(mu)?;
    let trajectory = evolve_contact(&(-w..=w).collect::<Vec<_>>(), mu, c, t)?;
    let fronts = inward_fronts(c, arrows, -w, w, t);
    Ok(ZSurrogate { trajectory, half_width: w, fronts })
}

/// Checks `I_t = ξ^Z_t ∩ [l_t, r_t]` at every change time while `I_t ≠ ∅`.
///
/// Fails with a width-certificate error if an influence front from outside
/// the surrogate's window reaches `[l_t, r_t]`.
pub fn assert_sandwich(a: &Trajectory, z: &ZSurrogate) -> Result<ViolationReport> {
    same_construction(a, &z.trajectory)?;
    let t1 = a.end_time.min(z.trajectory.end_time);
    let mut report = ViolationReport::default();
    let mut narrow = None;
    let inf = |s: i8| s == INFECTED;
    walk_pair(a, &z.trajectory, t1, &z.fronts.times(), |x, y| inf(x) == inf(y), |t, _, _, diff| {
        let s = a.sample_at(t);
        let (Some(l), Some(r)) = (s.leftmost, s.rightmost) else { return };
        let (fl, fr) = z.fronts.at(t);
        if l <= fl || r >= fr {
            narrow.get_or_insert((t, fl, fr, l, r));
            return;
        }
        report.total_checks += 1;
        if let Some(&x) = diff.range(l..=r).next() {
            report.fail(t, Some(x), alloc::format!("I_t and ξ^Z_t differ inside [{l}, {r}]"));
        }
    });
    if let Some((t, fl, fr, l, r)) = narrow {
        return Err(Error::WidthCertificate(alloc::format!(
            "at t = {t} the fronts ({fl}, {fr}) reach [{l}, {r}] (half-width {})",
            z.half_width
        )));
    }
    Ok(report)
}

/// Sandwich check with automatic widening of the surrogate window.
pub fn check_sandwich(a: &Trajectory, c: &Construction, mu: f64) -> Result<ViolationReport> {
    let mut w = surrogate_width(mu, a.end_time);
    loop {
        let z = xi_z_surrogate(c, mu, w, a.end_time)?;
        match assert_sandwich(a, &z) {
            Err(Error::WidthCertificate(_)) if w < 1 << 20 => w *= 2,
            other => return other,
        }
    }
}

/// Checks `ζ^O_t ≥ ζ^{[η_k, τ_k]}_t` for `t ≥ τ_k`, for every level `k ≥ 1`
/// reached by the rightmost infected site of `a`.
pub fn assert_restart_domination(a: &Trajectory, p: &ProcessParams, c: &Construction) -> Result<ViolationReport> {
    let ev = Evolve::three_state(c, p)?;
    let mut report = ViolationReport::default();
    let mut level = 1;
    for s in &a.samples {
        while s.rightmost.is_some_and(|r| r >= level) {
            let restart = ev.clone().from(s.time).until(a.end_time).run(&Configuration::single(level))?;
            report.merge(check_order(&restart, a)?);
            level += 1;
        }
    }
    Ok(report)
}

/// Builds a trajectory from a sequence of single-site changes.
struct Recorder {
    config: Configuration,
    initial: Configuration,
    samples: Vec<Sample>,
    changes: Vec<Change>,
    ever: BTreeSet<Site>,
    died_at: Option<f64>,
}

impl Recorder {
    fn new(config: &Configuration) -> Self {
        let mut r = Recorder {
            config: config.clone(),
            initial: config.clone(),
            samples: Vec::new(),
            changes: Vec::new(),
            ever: config.infected().into_iter().collect(),
            died_at: None,
        };
        r.sample(0.0);
        r
    }

    fn sample(&mut self, time: f64) {
        let count = self.config.count_infected();
        if count == 0 && self.died_at.is_none() {
            self.died_at = Some(time);
        }
        self.samples.push(Sample { time, rightmost: self.config.rightmost(), leftmost: self.config.leftmost(), count });
    }

    fn set(&mut self, time: f64, site: Site, to: i8) {
        let from = self.config.get(site);
        if from == to {
            return;
        }
        self.config.set(site, to);
        if to == INFECTED {
            self.ever.insert(site);
        }
        self.changes.push(Change { time, site, from, to });
        self.sample(time);
    }

    fn finish(self, end: f64) -> Trajectory {
        Trajectory {
            start_time: 0.0,
            end_time: end,
            initial: self.initial,
            samples: self.samples,
            changes: self.changes,
            snapshots: Vec::new(),
            died_at: self.died_at,
            ever_infected: self.ever.into_iter().collect(),
            construction: 0,
            truncation: None,
        }
    }
}

/// Joint chain of `ζ` (parameters `p`, from `eta`) below `ζ'` (parameters
/// `p2`, from `eta2`) on Z with nearest-neighbour edges, simulated from its
/// pair-state rate table by exponential competition.
///
/// Returns the lower process first.
pub fn co_evolve_ordered(
    eta: &Configuration,
    eta2: &Configuration,
    p: &ProcessParams,
    p2: &ProcessParams,
    seed: u64,
    t: f64,
) -> Result<CoupledTrajectories> {
    let (l, m, l2, m2) = (p.lambda, p.mu, p2.lambda, p2.mu);
    if !(l <= l2 && m <= m2 && m2 >= l) {
        return Err(param("ordered coupling needs λ ≤ λ′, μ ≤ μ′ and μ′ ≥ λ"));
    }
    if p.range != 1 || p2.range != 1 {
        return Err(Error::Unsupported("ordered coupling with range > 1".into()));
    }
    if !eta.is_finite() || !eta2.is_finite() {
        return Err(Error::Unsupported("ordered coupling from infinite configurations".into()));
    }
    if !eta.le(eta2) {
        return Err(param("initial configurations are not ordered"));
    }
    let mut rng = Stream::from_words(seed, &[0x006f_7264_6572_6564]);
    let mut lo = Recorder::new(eta);
    let mut hi = Recorder::new(eta2);
    let mut now = 0.0;
    let mut rates: Vec<(f64, Site, i8, i8)> = Vec::new();
    while let (Some(a), Some(b)) = (hi.config.leftmost(), hi.config.rightmost()) {
        rates.clear();
        let n_lo = |x: Site| (lo.config.get(x - 1) == INFECTED) as u8 as f64 + (lo.config.get(x + 1) == INFECTED) as u8 as f64;
        let n_hi = |x: Site| (hi.config.get(x - 1) == INFECTED) as u8 as f64 + (hi.config.get(x + 1) == INFECTED) as u8 as f64;
        for x in a - 1..=b + 1 {
            let (u, v) = (hi.config.get(x), lo.config.get(x));
            let (n, n2) = (n_lo(x), n_hi(x));
            let mut push = |r: f64, su: i8, sv: i8| {
                if r > 0.0 {
                    rates.push((r, x, su, sv));
                }
            };
            match (u, v) {
                (INFECTED, INFECTED) => push(1.0, RECOVERED, RECOVERED),
                (INFECTED, RECOVERED) => {
                    push(m * n, INFECTED, INFECTED);
                    push(1.0, RECOVERED, RECOVERED);
                }
                (INFECTED, FRESH) => {
                    push(l * n, INFECTED, INFECTED);
                    push(1.0, RECOVERED, FRESH);
                }
                (RECOVERED, RECOVERED) => {
                    push(m * n, INFECTED, INFECTED);
                    push(m2 * n2 - m * n, INFECTED, RECOVERED);
                }
                (RECOVERED, FRESH) => {
                    push(l * n, INFECTED, INFECTED);
                    push(m2 * n2 - l * n, INFECTED, FRESH);
                }
                (FRESH, FRESH) => {
                    push(l * n, INFECTED, INFECTED);
                    push(l2 * n2 - l * n, INFECTED, FRESH);
                }
                _ => return Err(Error::Degenerate(alloc::format!("pair state ({u}, {v}) at {x} is not ordered"))),
            }
        }
        let total: f64 = rates.iter().map(|r| r.0).sum();
        now += rng.exponential(total);
        if now > t {
            break;
        }
        let mut pick = rng.next_f64() * total;
        let mut k = 0;
        while k + 1 < rates.len() && pick >= rates[k].0 {
            pick -= rates[k].0;
            k += 1;
        }
        let (_, x, su, sv) = rates[k];
        hi.set(now, x, su);
        lo.set(now, x, sv);
    }
    Ok(CoupledTrajectories { trajectories: alloc::vec![lo.finish(t), hi.finish(t)], shared_seed: seed })
}

/// `P(ζ_t = (1,1))` on two sites joined by an edge, for the process with
/// parameters `(λ, 0)` started from one infected and one fresh site:
/// `e^{−2t} λ/(λ−1) (1 − e^{−t(λ−1)})`, continuous at λ = 1.
pub fn two_site_exact(lambda: f64, t: f64) -> f64 {
    let x = t * (lambda - 1.0);
    let g = if x == 0.0 { 1.0 } else { -libm::expm1(-x) / x };
    libm::exp(-2.0 * t) * lambda * t * g
}

/// Which sites of the two-site graph start infected.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TwoSiteStart {
    One,
    Both,
}

/// Monte Carlo estimate of `P(ζ_t = (1,1))` for the `(λ, 0)` process on two
/// sites, by direct simulation.
pub fn two_site_monte_carlo<R: Replicas>(
    runner: &R,
    lambda: f64,
    t: f64,
    start: TwoSiteStart,
    reps: u64,
    seed: u64,
) -> Result<Estimate> {
    let g = FiniteGraph::pair();
    let init = match start {
        TwoSiteStart::One => [INFECTED, FRESH],
        TwoSiteStart::Both => [INFECTED, INFECTED],
    };
    let hits = run_seeded(runner, seed, reps, |s| {
        simulate_finite(&g, &init, lambda, 0.0, t, &mut Stream::new(s)).map(|v| v == [INFECTED, INFECTED])
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(Estimate::proportion(hits.iter().filter(|&&h| h).count() as u64, reps))
}

/// Occupancy of one site under the lower marginal of the ordered coupling
/// against a direct graphical simulation of the same process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginalReport {
    pub coupled: Estimate,
    pub direct: Estimate,
    pub z: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn ordered_marginal_check<R: Replicas>(
    runner: &R,
    eta: &Configuration,
    eta2: &Configuration,
    p: &ProcessParams,
    p2: &ProcessParams,
    site: Site,
    t: f64,
    reps: u64,
    seed: u64,
) -> Result<MarginalReport> {
    let coupled = run_seeded(runner, seed, reps, |s| {
        co_evolve_ordered(eta, eta2, p, p2, s, t).map(|c| c.trajectories[0].state_at(t).get(site) == INFECTED)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let direct = run_seeded(runner, seed ^ 0x5a5a_5a5a, reps, |s| {
        let c = p.construction(s, t)?;
        Evolve::three_state(&c, p)?.until(t).run(eta).map(|tr| tr.state_at(t).get(site) == INFECTED)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let k1 = coupled.iter().filter(|&&b| b).count() as u64;
    let k2 = direct.iter().filter(|&&b| b).count() as u64;
    Ok(MarginalReport {
        coupled: Estimate::proportion(k1, reps),
        direct: Estimate::proportion(k2, reps),
        z: two_proportion_z(k1, reps, k2, reps),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualityReport {
    pub p1: Estimate,
    pub p2: Estimate,
    pub z: f64,
}

/// Independent estimates of `P(ξ^A_t ∩ B ≠ ∅)` and `P(ξ^B_t ∩ A ≠ ∅)`.
pub fn check_duality<R: Replicas>(
    runner: &R,
    a: &[Site],
    b: &[Site],
    mu: f64,
    t: f64,
    reps: u64,
    seed: u64,
) -> Result<DualityReport> {
    let side = |from: &[Site], hit: &[Site], master: u64| -> Result<u64> {
        let v = run_seeded(runner, master, reps, |s| {
            let c = Construction::contact(s, mu, 1, t)?;
            let tr = evolve_contact(from, mu, &c, t)?;
            let end = tr.state_at(t);
            Ok(hit.iter().any(|&x| end.get(x) == INFECTED))
        });
        let v = v.into_iter().collect::<Result<Vec<bool>>>()?;
        Ok(v.iter().filter(|&&h| h).count() as u64)
    };
    let k1 = side(a, b, crate::rng::derive_key(seed, &[1]))?;
    let k2 = side(b, a, crate::rng::derive_key(seed, &[2]))?;
    Ok(DualityReport {
        p1: Estimate::proportion(k1, reps),
        p2: Estimate::proportion(k2, reps),
        z: two_proportion_z(k1, reps, k2, reps),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::replicas::Sequential;

    fn params(l: f64, m: f64) -> ProcessParams {
        ProcessParams::new(l, m).unwrap()
    }

    #[test]
    fn two_site_values() {
        assert_eq!(two_site_exact(2.0, 0.0), 0.0);
        let e2 = libm::exp(-2.0);
        assert!((two_site_exact(1.0, 1.0) - e2).abs() < 1e-15);
        let direct = e2 * 2.0 * (1.0 - libm::exp(-1.0));
        assert!((two_site_exact(2.0, 1.0) - direct).abs() < 1e-15);
        assert!((two_site_exact(2.0, 1.0) - 0.171_096).abs() < 1e-6);
        for t in [0.5, 1.0, 2.0] {
            for l in [1.0 - 1e-6, 1.0 + 1e-6] {
                assert!((two_site_exact(l, t) - two_site_exact(1.0, t)).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn two_site_by_quadrature() {
        // Midpoint rule on the defining integral.
        for (l, t) in [(0.5, 1.5), (2.0, 1.0), (3.0, 0.7)] {
            let n = 200_000;
            let h = t / n as f64;
            let sum: f64 = (0..n)
                .map(|i| {
                    let s = (i as f64 + 0.5) * h;
                    l * libm::exp(-l * s) * libm::exp(-(t - s))
                })
                .sum();
            let want = libm::exp(-t) * sum * h;
            assert!((two_site_exact(l, t) - want).abs() < 1e-9, "{l} {t}");
        }
    }

    #[test]
    fn identical_starts_give_identical_paths() {
        let p = params(1.0, 2.0);
        let c = p.construction(5, 10.0).unwrap();
        let ct = co_evolve_shared(&[Configuration::standard(), Configuration::standard()], &p, &c, 10.0).unwrap();
        assert_eq!(ct.trajectories[0].changes, ct.trajectories[1].changes);
        assert!(check_order(&ct.trajectories[0], &ct.trajectories[1]).unwrap().is_clean());
    }

    #[test]
    fn order_check_detects_reversed_order() {
        let p = params(1.0, 2.0);
        let c = p.construction(5, 1.0).unwrap();
        let ct = co_evolve_shared(&[Configuration::standard(), Configuration::interval(-1, 1)], &p, &c, 1.0).unwrap();
        assert!(!check_order(&ct.trajectories[1], &ct.trajectories[0]).unwrap().is_clean());
    }

    #[test]
    fn mixed_constructions_are_rejected() {
        let p = params(1.0, 2.0);
        let a = evolve_three(&p, 1);
        let b = evolve_three(&p, 2);
        assert!(matches!(check_order(&a, &b), Err(Error::Configuration(_))));
    }

    fn evolve_three(p: &ProcessParams, seed: u64) -> Trajectory {
        let c = p.construction(seed, 5.0).unwrap();
        Evolve::three_state(&c, p).unwrap().run(&Configuration::standard()).unwrap()
    }

    #[test]
    fn identities_hold_on_a_few_seeds() {
        let p = params(1.0, 2.0);
        for seed in 0..30 {
            let c = p.construction(seed, 10.0).unwrap();
            let ev = Evolve::three_state(&c, &p).unwrap().until(10.0);
            let a = ev.run(&Configuration::standard()).unwrap();
            let b = ev.run(&Configuration::eta_bar()).unwrap();
            assert!(assert_rightmost_identity(&a, &b).unwrap().is_clean(), "seed {seed}");
            assert!(check_sandwich(&a, &c, 2.0).unwrap().is_clean(), "seed {seed}");
            assert!(assert_restart_domination(&a, &p, &c).unwrap().is_clean(), "seed {seed}");
        }
    }

    #[test]
    fn sandwich_refuses_narrow_window() {
        let p = params(1.0, 2.0);
        let mut refused = 0;
        for seed in 0..20 {
            let c = p.construction(seed, 10.0).unwrap();
            let a = Evolve::three_state(&c, &p).unwrap().until(10.0).run(&Configuration::standard()).unwrap();
            let z = xi_z_surrogate(&c, 2.0, 1, 10.0).unwrap();
            if a.died_at.is_none_or(|d| d > 3.0) {
                refused += matches!(assert_sandwich(&a, &z), Err(Error::WidthCertificate(_))) as u32;
            }
        }
        assert!(refused > 0);
    }

    #[test]
    fn fronts_advance_by_arrows() {
        let c = Construction::contact(3, 2.0, 1, 5.0).unwrap();
        let f = inward_fronts(&c, Arrows::Both, -3, 3, 5.0);
        for w in f.left.windows(2) {
            assert_eq!(w[1].1, w[0].1 + 1);
            let arrow = [ClockId::lambda(w[0].1, w[1].1)];
            assert!(arrow.iter().any(|&id| c.first_after(id, w[0].0) == Some(w[1].0)));
        }
        assert_eq!(f.at(0.0), (-4, 4));
    }

    #[test]
    fn ordered_coupling_preconditions() {
        let e = Configuration::standard();
        assert!(co_evolve_ordered(&e, &e, &params(1.0, 2.0), &params(0.5, 2.0), 0, 1.0).is_err());
        assert!(co_evolve_ordered(&Configuration::interval(-1, 1), &e, &params(1.0, 2.0), &params(1.0, 2.0), 0, 1.0).is_err());
    }

    #[test]
    fn ordered_coupling_keeps_order() {
        let (p, p2) = (params(0.5, 1.0), params(1.0, 2.0));
        for seed in 0..200 {
            let ct = co_evolve_ordered(&Configuration::standard(), &Configuration::interval(-1, 1), &p, &p2, seed, 3.0).unwrap();
            assert!(check_order(&ct.trajectories[0], &ct.trajectories[1]).unwrap().is_clean());
        }
    }

    #[test]
    fn ordered_coupling_diagonal() {
        let p = params(1.0, 2.0);
        let e = Configuration::interval(0, 2);
        for seed in 0..50 {
            let ct = co_evolve_ordered(&e, &e, &p, &p, seed, 3.0).unwrap();
            assert_eq!(ct.trajectories[0].changes, ct.trajectories[1].changes);
        }
    }

    #[test]
    fn duality_symmetric_case() {
        let r = check_duality(&Sequential, &[0], &[0], 1.5, 1.0, 2000, 9).unwrap();
        assert!(r.z.abs() < 4.0);
    }

    #[test]
    fn two_site_monte_carlo_small() {
        let e = two_site_monte_carlo(&Sequential, 2.0, 1.0, TwoSiteStart::Both, 20_000, 4).unwrap();
        let want = libm::exp(-2.0);
        assert!((e.value - want).abs() < 4.0 * e.se);
    }
}
