//! Three-state contact process, set-valued contact process, range-M contact
//! process and the forest fire model on a shared construction.
//!
//! The three-state process has states −1 (never infected), 0 (recovered) and
//! 1 (infected). An infected site recovers at rate 1; it infects a fresh
//! neighbour at rate λ and a recovered neighbour at rate μ.

mod configuration;
mod engine;
mod finite;
mod trajectory;

use alloc::collections::BinaryHeap;
use alloc::vec::Vec;
use core::cmp::Reverse;

pub use configuration::{Configuration, FRESH, INFECTED, RECOVERED};
pub use engine::{Boundary, Observer, Rule};
pub use finite::{simulate_finite, FiniteGraph};
pub use trajectory::{merged_change_times, Change, Replay, Sample, Trajectory};

use crate::error::{param, Error, Result};
use crate::graphical::{
    Arrows, ClockId, ClockKind, Construction, ConstructionMarks, DeltaRole, MarkSource, Site,
};
use engine::Job;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProcessParams {
    pub lambda: f64,
    pub mu: f64,
    pub range: u32,
}

impl ProcessParams {
    pub fn new(lambda: f64, mu: f64) -> Result<Self> {
        for (v, name) in [(lambda, "λ"), (mu, "μ")] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(param(alloc::format!("{name} must be finite and nonnegative")));
            }
        }
        Ok(ProcessParams { lambda, mu, range: 1 })
    }

    /// Contact process with rate `mu`: λ = μ.
    pub fn contact(mu: f64) -> Result<Self> {
        ProcessParams::new(mu, mu)
    }

    pub fn with_range(mut self, range: u32) -> Result<Self> {
        if range == 0 {
            return Err(param("range must be at least 1"));
        }
        self.range = range;
        Ok(self)
    }

    pub fn construction(&self, seed: u64, horizon: f64) -> Result<Construction> {
        Construction::for_rates(seed, self.lambda, self.mu, self.range, horizon)
    }

    fn matches(&self, c: &Construction) -> Result<()> {
        let (l, m) = c.parameters();
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0);
        if close(l, self.lambda) && close(m, self.mu) && c.range() == self.range {
            Ok(())
        } else {
            Err(Error::Configuration(alloc::format!(
                "construction realizes (λ, μ, M) = ({l}, {m}, {}), process needs ({}, {}, {})",
                c.range(),
                self.lambda,
                self.mu,
                self.range
            )))
        }
    }
}

const FIRST_DEPTH: Site = 32;
const MAX_DEPTH: Site = 1 << 16;

/// Builder for one evolution on a construction.
#[derive(Debug, Clone)]
pub struct Evolve<'c> {
    c: &'c Construction,
    rule: Rule,
    start: f64,
    end: f64,
    snapshots: Vec<f64>,
    boundary: Boundary,
}

impl<'c> Evolve<'c> {
    /// Three-state dynamics with parameters `p`; the construction must
    /// realize exactly these parameters.
    pub fn three_state(c: &'c Construction, p: &ProcessParams) -> Result<Self> {
        if p.range > 1 {
            return Err(Error::Unsupported("three-state dynamics with range > 1".into()));
        }
        p.matches(c)?;
        Ok(Evolve::with_rule(c, Rule::ThreeState(c.delta_role())))
    }

    /// Set-valued contact dynamics with infection rate `mu` along whichever
    /// arrow family of `c` has that total rate.
    pub fn contact(c: &'c Construction, mu: f64) -> Result<Self> {
        let arrows = c.arrows_for_contact(mu)?;
        Ok(Evolve::with_rule(c, Rule::Contact(arrows)))
    }

    fn with_rule(c: &'c Construction, rule: Rule) -> Self {
        Evolve { c, rule, start: 0.0, end: c.horizon(), snapshots: Vec::new(), boundary: Boundary::default() }
    }

    pub fn from(mut self, start: f64) -> Self {
        self.start = start;
        self
    }

    pub fn until(mut self, end: f64) -> Self {
        self.end = end;
        self
    }

    /// Requests configuration snapshots at the given times.
    pub fn snapshots(mut self, times: &[f64]) -> Self {
        self.snapshots = times.to_vec();
        self.snapshots.sort_by(f64::total_cmp);
        self
    }

    pub fn boundary(mut self, b: Boundary) -> Self {
        self.boundary = b;
        self
    }

    pub fn construction(&self) -> &'c Construction {
        self.c
    }

    fn check(&self) -> Result<()> {
        if self.start > self.end {
            return Err(param("evolution must end after it starts"));
        }
        if self.end > self.c.horizon() {
            return Err(Error::HorizonExceeded { requested: self.end, horizon: self.c.horizon() });
        }
        Ok(())
    }

    fn job(&self) -> Job<'_> {
        Job {
            rule: self.rule,
            boundary: self.boundary,
            start: self.start,
            end: self.end,
            snapshots: &self.snapshots,
            tag: self.c.fingerprint(),
        }
    }

    /// Evolves `eta`.
    ///
    /// An infected left half-line is replaced by a finite block of infected
    /// sites with a recovered background. For nearest-neighbour dynamics
    /// with μ ≥ λ the truncated and the full process agree on every site at
    /// or right of the truncated process's leftmost infected site, for as
    /// long as the truncated process is alive; the block is deepened and the
    /// run repeated if it dies before the end.
    pub fn run(&self, eta: &Configuration) -> Result<Trajectory> {
        self.check()?;
        if eta.right_default() == INFECTED {
            return Err(Error::Unsupported("infected right half-line".into()));
        }
        if eta.is_finite() {
            let mut src = ConstructionMarks::new(self.c);
            return Ok(engine::run(eta.clone(), &self.job(), &mut src, &mut |_, _, _| {}));
        }
        self.half_line_ok()?;
        let mut depth = FIRST_DEPTH;
        loop {
            let mut src = ConstructionMarks::new(self.c);
            let mut t = engine::run(eta.truncated(depth), &self.job(), &mut src, &mut |_, _, _| {});
            if t.died_at.is_none() {
                t.truncation = Some(depth);
                return Ok(t);
            }
            if depth >= MAX_DEPTH {
                return Err(Error::WidthCertificate(alloc::format!(
                    "half-line truncated at depth {depth} died before {}",
                    self.end
                )));
            }
            depth *= 4;
        }
    }

    /// Half-line starts are exact only where the truncation identity holds.
    pub fn half_line_ok(&self) -> Result<()> {
        let nearest = self.c.range() == 1;
        let monotone = match self.rule {
            Rule::ThreeState(role) => role == DeltaRole::Reinfection,
            Rule::Contact(_) => true,
        };
        if nearest && monotone && self.boundary == Boundary::default() {
            Ok(())
        } else {
            Err(Error::Unsupported(
                "half-line starts need nearest-neighbour dynamics with μ ≥ λ".into(),
            ))
        }
    }

    /// Evolves a finite `eta`, calling `observer` after every mark.
    pub fn run_observed(&self, eta: &Configuration, observer: &mut Observer<'_>) -> Result<Trajectory> {
        self.check()?;
        if !eta.is_finite() {
            return Err(Error::Unsupported("observed runs need a finite start; truncate first".into()));
        }
        let mut src = ConstructionMarks::new(self.c);
        Ok(engine::run(eta.clone(), &self.job(), &mut src, observer))
    }

    /// Evolves a finite `eta` under marks from an arbitrary source.
    pub fn run_with<S: MarkSource>(&self, eta: &Configuration, source: &mut S) -> Result<Trajectory> {
        if !eta.is_finite() {
            return Err(Error::Unsupported("scripted runs need a finite start".into()));
        }
        let mut job = self.job();
        job.tag = 0;
        Ok(engine::run(eta.clone(), &job, source, &mut |_, _, _| {}))
    }
}

/// Three-state process from `eta` on `[0, t]`.
pub fn evolve_three_state(eta: &Configuration, p: &ProcessParams, c: &Construction, t: f64) -> Result<Trajectory> {
    Evolve::three_state(c, p)?.until(t).run(eta)
}

/// Contact process `ξ^A` with rate `mu` on `[0, t]`.
pub fn evolve_contact(a: &[Site], mu: f64, c: &Construction, t: f64) -> Result<Trajectory> {
    Evolve::contact(c, mu)?.until(t).run(&Configuration::from_sites(a.iter().copied(), RECOVERED))
}

/// Range-M contact process; requires λ = μ.
pub fn evolve_range_m(eta: &Configuration, p: &ProcessParams, c: &Construction, t: f64) -> Result<Trajectory> {
    if p.lambda != p.mu {
        return Err(Error::Unsupported("range-M dynamics need λ = μ".into()));
    }
    p.matches(c)?;
    let ev = Evolve::contact(c, p.mu)?.until(t);
    if !eta.is_finite() && p.range > 1 {
        return Err(Error::Unsupported("half-line starts with range > 1".into()));
    }
    ev.run(eta)
}

/// Sites ever infected by the forest fire (μ = 0) started from `w`.
///
/// Computed as a first-passage problem, independently of the event engine:
/// `v` is reached from `u` if the first infecting arrow `u → v` after `u`'s
/// infection precedes `u`'s first recovery after it.
pub fn forest_fire_cluster(w: Site, lambda: f64, c: &Construction) -> Result<Vec<Site>> {
    ProcessParams::new(lambda, 0.0)?.with_range(c.range())?.matches(c)?;
    let infecting = |k: ClockKind| match k {
        ClockKind::LambdaArrow => true,
        ClockKind::DeltaArrow => c.delta_role() == DeltaRole::FirstInfection,
        ClockKind::Recovery => false,
    };
    let m = c.range() as Site;
    let mut done: Vec<Site> = Vec::new();
    let mut heap = BinaryHeap::new();
    heap.push(Reverse((Key(0.0), w)));
    while let Some(Reverse((Key(s), u))) = heap.pop() {
        if done.contains(&u) {
            continue;
        }
        done.push(u);
        let recovery = c.first_after(ClockId::recovery(u), s).unwrap_or(f64::INFINITY);
        for v in (u - m..=u + m).filter(|&v| v != u) {
            for id in [ClockId::lambda(u, v), ClockId::delta(u, v)] {
                if c.rate(id.kind) == 0.0 || !infecting(id.kind) {
                    continue;
                }
                if let Some(a) = c.first_after(id, s) {
                    if a < recovery {
                        heap.push(Reverse((Key(a), v)));
                    }
                }
            }
        }
    }
    done.sort_unstable();
    Ok(done)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Key(f64);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<core::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> core::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Arrow family a contact process with rate `mu` uses on `c`.
pub fn contact_arrows(c: &Construction, mu: f64) -> Result<Arrows> {
    c.arrows_for_contact(mu)
}
