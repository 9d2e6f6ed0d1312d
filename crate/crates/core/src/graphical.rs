//! The graphical construction.
//!
//! Each clock (an arrow `x → y` of one of two kinds, or the recovery mark at
//! `x`) is an independent Poisson process. Its event times are a pure function
//! of `(seed, clock id)`: time is cut into blocks of width at most `1/rate`,
//! and the number and positions of events in block `b` are drawn from the
//! counter-based generator at counters derived from `b`. Any block can be
//! produced without generating the ones before it, so clocks can be consulted
//! starting at any time and re-queried at will.
//!
//! Ties are broken by `(time, kind, source, target)`.

use alloc::collections::{BTreeSet, BinaryHeap};
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{param, Error, Result};
use crate::rng::{derive_key, mix64, uniform};

pub type Site = i64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ClockKind {
    /// Arrows whose firing can cause both first infections and reinfections.
    LambdaArrow,
    /// Arrows whose firing causes only one of the two transitions; which one
    /// is fixed by the construction's [`DeltaRole`].
    DeltaArrow,
    Recovery,
}

/// Identity of one Poisson clock. Recovery clocks have `target == source`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClockId {
    pub kind: ClockKind,
    pub source: Site,
    pub target: Site,
}

impl ClockId {
    pub fn recovery(x: Site) -> Self {
        ClockId { kind: ClockKind::Recovery, source: x, target: x }
    }

    pub fn lambda(x: Site, y: Site) -> Self {
        ClockId { kind: ClockKind::LambdaArrow, source: x, target: y }
    }

    pub fn delta(x: Site, y: Site) -> Self {
        ClockId { kind: ClockKind::DeltaArrow, source: x, target: y }
    }

    fn words(&self) -> [u64; 3] {
        [self.kind as u64, self.source as u64, self.target as u64]
    }
}

/// One event of one clock. `index` counts from 1 along the clock's stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventMark {
    pub time: f64,
    pub clock: ClockId,
    pub index: u64,
}

impl EventMark {
    /// Global processing order.
    pub fn order(&self, other: &EventMark) -> Ordering {
        self.time.total_cmp(&other.time).then(self.clock.cmp(&other.clock))
    }
}

/// Which restricted transition a δ-arrow triggers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeltaRole {
    /// Used when μ ≥ λ: δ-arrows carry rate μ−λ and only reinfect (0 → 1).
    Reinfection,
    /// Used when λ > μ: δ-arrows carry rate λ−μ and only infect fresh sites (−1 → 1).
    FirstInfection,
}

/// Which arrows a set-valued contact process may travel along.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arrows {
    Both,
    LambdaOnly,
}

const BLOCK_CAP: usize = 48;
const COUNTER_STRIDE: u64 = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
struct StreamSpec {
    rate: f64,
    per_unit: u64,
    p0: f64,
}

impl StreamSpec {
    fn new(rate: f64) -> Self {
        let per_unit = if rate > 1.0 { libm::ceil(rate) as u64 } else { 1 };
        StreamSpec { rate, per_unit, p0: libm::exp(-rate / per_unit as f64) }
    }

    fn mean(&self) -> f64 {
        self.rate / self.per_unit as f64
    }

    fn count(&self, key: u64, block: u64) -> usize {
        if self.rate <= 0.0 {
            return 0;
        }
        let u = uniform(key, block * COUNTER_STRIDE);
        let m = self.mean();
        let (mut k, mut p, mut cdf) = (0usize, self.p0, self.p0);
        while u > cdf && k < BLOCK_CAP {
            k += 1;
            p *= m / k as f64;
            cdf += p;
        }
        k
    }

    /// Sorted event times in block `block`; returns how many were written.
    fn block(&self, key: u64, block: u64, out: &mut [f64; BLOCK_CAP]) -> usize {
        let k = self.count(key, block);
        let pu = self.per_unit as f64;
        for j in 0..k {
            let u = uniform(key, block * COUNTER_STRIDE + 1 + j as u64);
            let t = (block as f64 + u) / pu;
            let mut i = j;
            while i > 0 && out[i - 1] > t {
                out[i] = out[i - 1];
                i -= 1;
            }
            out[i] = t;
        }
        k
    }

    fn block_start(&self, block: u64) -> f64 {
        block as f64 / self.per_unit as f64
    }

    fn first_block_near(&self, t: f64) -> u64 {
        let b = libm::floor(t.max(0.0) * self.per_unit as f64) as u64;
        b.saturating_sub(1)
    }

    /// First event strictly after `t` and no later than `t_max`, with its
    /// block and slot.
    fn next_after(&self, key: u64, t: f64, t_max: f64) -> Option<(f64, u64, usize)> {
        if self.rate <= 0.0 {
            return None;
        }
        let mut buf = [0.0; BLOCK_CAP];
        let mut b = self.first_block_near(t);
        while self.block_start(b) <= t_max {
            let k = self.block(key, b, &mut buf);
            for (slot, &s) in buf[..k].iter().enumerate() {
                if s > t {
                    return (s <= t_max).then_some((s, b, slot));
                }
            }
            b += 1;
        }
        None
    }

    fn events_before_block(&self, key: u64, block: u64) -> u64 {
        (0..block).map(|b| self.count(key, b) as u64).sum()
    }

    fn times(&self, key: u64, t_max: f64) -> Vec<f64> {
        let mut out = Vec::new();
        if self.rate <= 0.0 {
            return out;
        }
        let mut buf = [0.0; BLOCK_CAP];
        let mut b = 0;
        while self.block_start(b) <= t_max {
            let k = self.block(key, b, &mut buf);
            out.extend(buf[..k].iter().copied().filter(|&s| s <= t_max));
            b += 1;
        }
        out
    }
}

fn clock_key(seed: u64, id: &ClockId) -> u64 {
    derive_key(seed, &id.words())
}

fn check_rate(rate: f64, what: &str) -> Result<()> {
    if rate.is_finite() && rate >= 0.0 {
        Ok(())
    } else {
        Err(param(alloc::format!("{what} must be a finite nonnegative number, got {rate}")))
    }
}

/// All event times of one clock in `(0, t_max]`.
pub fn stream_times(seed: u64, id: ClockId, rate: f64, t_max: f64) -> Result<Vec<f64>> {
    check_rate(rate, "rate")?;
    check_rate(t_max, "t_max")?;
    Ok(StreamSpec::new(rate).times(clock_key(seed, &id), t_max))
}

/// A realization of all clocks up to a horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct Construction {
    seed: u64,
    lambda: StreamSpec,
    delta: StreamSpec,
    recovery: StreamSpec,
    role: DeltaRole,
    range: u32,
    horizon: f64,
}

impl Construction {
    pub fn new(
        seed: u64,
        lambda_rate: f64,
        delta_rate: f64,
        role: DeltaRole,
        range: u32,
        horizon: f64,
    ) -> Result<Self> {
        check_rate(lambda_rate, "λ-stream rate")?;
        check_rate(delta_rate, "δ-stream rate")?;
        check_rate(horizon, "horizon")?;
        if range == 0 {
            return Err(param("range must be at least 1"));
        }
        Ok(Construction {
            seed,
            lambda: StreamSpec::new(lambda_rate),
            delta: StreamSpec::new(delta_rate),
            recovery: StreamSpec::new(1.0),
            role,
            range,
            horizon,
        })
    }

    /// Construction for the three-state process with parameters `(λ, μ)`.
    ///
    /// For μ ≥ λ the streams are λ-arrows at rate λ and reinfection-only
    /// arrows at rate μ−λ; for λ > μ they are λ-arrows at rate μ and
    /// first-infection-only arrows at rate λ−μ.
    pub fn for_rates(seed: u64, lambda: f64, mu: f64, range: u32, horizon: f64) -> Result<Self> {
        check_rate(lambda, "λ")?;
        check_rate(mu, "μ")?;
        if mu >= lambda {
            Construction::new(seed, lambda, mu - lambda, DeltaRole::Reinfection, range, horizon)
        } else {
            Construction::new(seed, mu, lambda - mu, DeltaRole::FirstInfection, range, horizon)
        }
    }

    /// Construction for the contact process with infection rate μ.
    pub fn contact(seed: u64, mu: f64, range: u32, horizon: f64) -> Result<Self> {
        Construction::for_rates(seed, mu, mu, range, horizon)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn range(&self) -> u32 {
        self.range
    }

    pub fn delta_role(&self) -> DeltaRole {
        self.role
    }

    pub fn rate(&self, kind: ClockKind) -> f64 {
        self.spec(kind).rate
    }

    /// The (λ, μ) pair this construction realizes.
    pub fn parameters(&self) -> (f64, f64) {
        let (a, d) = (self.lambda.rate, self.delta.rate);
        match self.role {
            DeltaRole::Reinfection => (a, a + d),
            DeltaRole::FirstInfection => (a + d, a),
        }
    }

    /// Arrow set on which the contact process with rate `mu` runs.
    pub fn arrows_for_contact(&self, mu: f64) -> Result<Arrows> {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0);
        let both = self.lambda.rate + self.delta.rate;
        if self.role == DeltaRole::Reinfection && close(both, mu) {
            Ok(Arrows::Both)
        } else if close(self.lambda.rate, mu) {
            Ok(Arrows::LambdaOnly)
        } else {
            Err(Error::Configuration(alloc::format!(
                "no arrow family of this construction has total rate {mu}"
            )))
        }
    }

    /// Hash of everything that determines the realization.
    pub fn fingerprint(&self) -> u64 {
        derive_key(
            self.seed,
            &[
                self.lambda.rate.to_bits(),
                self.delta.rate.to_bits(),
                self.role as u64,
                self.range as u64,
                mix64(self.horizon.to_bits()),
            ],
        )
    }

    fn spec(&self, kind: ClockKind) -> &StreamSpec {
        match kind {
            ClockKind::LambdaArrow => &self.lambda,
            ClockKind::DeltaArrow => &self.delta,
            ClockKind::Recovery => &self.recovery,
        }
    }

    fn key(&self, id: &ClockId) -> u64 {
        clock_key(self.seed, id)
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if t > self.horizon {
            Err(Error::HorizonExceeded { requested: t, horizon: self.horizon })
        } else {
            Ok(())
        }
    }

    /// Event times of one clock in `(0, t_max]`.
    pub fn times(&self, id: ClockId, t_max: f64) -> Result<Vec<f64>> {
        self.check_time(t_max)?;
        Ok(self.spec(id.kind).times(self.key(&id), t_max))
    }

    /// First event of a clock strictly after `t`, if it is within the horizon.
    pub fn first_after(&self, id: ClockId, t: f64) -> Option<f64> {
        self.spec(id.kind).next_after(self.key(&id), t, self.horizon).map(|e| e.0)
    }

    /// Clocks with positive rate whose source is `x`.
    pub fn clocks_from(&self, x: Site) -> impl Iterator<Item = ClockId> + '_ {
        let m = self.range as i64;
        let rec = core::iter::once(ClockId::recovery(x));
        let arrows = (-m..=m).filter(|&d| d != 0).flat_map(move |d| {
            [ClockId::lambda(x, x + d), ClockId::delta(x, x + d)]
        });
        rec.chain(arrows).filter(move |id| self.spec(id.kind).rate > 0.0)
    }
}

/// All marks with source or target in `[lo, hi]` and time in `(t0, t1]`,
/// in processing order.
pub fn merged_events(c: &Construction, lo: Site, hi: Site, t0: f64, t1: f64) -> Result<Vec<EventMark>> {
    if t0 > t1 {
        return Err(param("merged_events needs t0 <= t1"));
    }
    c.check_time(t1)?;
    let mut out = Vec::new();
    if lo > hi {
        return Ok(out);
    }
    let m = c.range as i64;
    for x in lo - m..=hi + m {
        for id in c.clocks_from(x) {
            let inside = |s: Site| (lo..=hi).contains(&s);
            if !(inside(id.source) || inside(id.target)) {
                continue;
            }
            for (i, t) in c.times(id, t1)?.into_iter().enumerate() {
                if t > t0 {
                    out.push(EventMark { time: t, clock: id, index: i as u64 + 1 });
                }
            }
        }
    }
    out.sort_by(EventMark::order);
    Ok(out)
}

/// A time-ordered supply of marks for the process engines.
pub trait MarkSource {
    /// Makes sure every clock with source in `[lo, hi]` is live from time
    /// `now` on. Sources never need to be deactivated.
    fn activate(&mut self, lo: Site, hi: Site, now: f64);

    /// Pops the next mark with time at most `until`.
    fn next_mark(&mut self, until: f64) -> Option<EventMark>;

    /// Largest arrow length.
    fn range(&self) -> u32;
}

#[derive(Debug, Clone, Copy)]
struct Pending {
    mark: EventMark,
    block: u64,
    slot: usize,
}

impl PartialEq for Pending {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Pending {}

impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Pending {
    // Reversed so that `BinaryHeap` pops the earliest mark.
    fn cmp(&self, other: &Self) -> Ordering {
        other.mark.order(&self.mark)
    }
}

/// Marks of a [`Construction`] restricted to a growing interval of sources.
pub struct ConstructionMarks<'c> {
    c: &'c Construction,
    active: Option<(Site, Site)>,
    heap: BinaryHeap<Pending>,
}

impl<'c> ConstructionMarks<'c> {
    pub fn new(c: &'c Construction) -> Self {
        ConstructionMarks { c, active: None, heap: BinaryHeap::new() }
    }

    pub fn construction(&self) -> &'c Construction {
        self.c
    }

    pub fn active(&self) -> Option<(Site, Site)> {
        self.active
    }

    fn push_site(&mut self, x: Site, now: f64) {
        let c = self.c;
        for id in c.clocks_from(x) {
            let spec = c.spec(id.kind);
            let key = c.key(&id);
            if let Some((time, block, slot)) = spec.next_after(key, now, c.horizon) {
                let index = spec.events_before_block(key, block) + slot as u64 + 1;
                self.heap.push(Pending { mark: EventMark { time, clock: id, index }, block, slot });
            }
        }
    }
}

impl MarkSource for ConstructionMarks<'_> {
    fn activate(&mut self, lo: Site, hi: Site, now: f64) {
        if lo > hi {
            return;
        }
        match self.active {
            None => {
                for x in lo..=hi {
                    self.push_site(x, now);
                }
                self.active = Some((lo, hi));
            }
            Some((a, b)) => {
                for x in lo.min(a)..a {
                    self.push_site(x, now);
                }
                for x in b + 1..=hi.max(b) {
                    self.push_site(x, now);
                }
                self.active = Some((lo.min(a), hi.max(b)));
            }
        }
    }

    fn next_mark(&mut self, until: f64) -> Option<EventMark> {
        if self.heap.peek()?.mark.time > until {
            return None;
        }
        let p = self.heap.pop()?;
        let c = self.c;
        let spec = c.spec(p.mark.clock.kind);
        let key = c.key(&p.mark.clock);
        let mut buf = [0.0; BLOCK_CAP];
        let k = spec.block(key, p.block, &mut buf);
        let next = if p.slot + 1 < k {
            Some((buf[p.slot + 1], p.block, p.slot + 1))
        } else {
            let mut b = p.block + 1;
            let mut found = None;
            while spec.block_start(b) <= c.horizon {
                if spec.block(key, b, &mut buf) > 0 {
                    found = Some((buf[0], b, 0));
                    break;
                }
                b += 1;
            }
            found
        }
        .filter(|e| e.0 <= c.horizon);
        if let Some((time, block, slot)) = next {
            let mark = EventMark { time, clock: p.mark.clock, index: p.mark.index + 1 };
            self.heap.push(Pending { mark, block, slot });
        }
        Some(p.mark)
    }

    fn range(&self) -> u32 {
        self.c.range
    }
}

/// A fixed, hand-written list of marks.
#[derive(Debug, Clone)]
pub struct ScriptedMarks {
    marks: Vec<EventMark>,
    pos: usize,
    range: u32,
}

impl ScriptedMarks {
    pub fn new(mut marks: Vec<EventMark>, range: u32) -> Self {
        marks.sort_by(EventMark::order);
        ScriptedMarks { marks, pos: 0, range }
    }

    /// Builds marks from `(time, clock)` pairs, numbering each clock's events.
    pub fn from_clocks(events: &[(f64, ClockId)], range: u32) -> Self {
        let mut v: Vec<(f64, ClockId)> = events.to_vec();
        v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut seen: Vec<(ClockId, u64)> = Vec::new();
        let marks = v
            .into_iter()
            .map(|(time, clock)| {
                let index = match seen.iter_mut().find(|(c, _)| *c == clock) {
                    Some((_, n)) => {
                        *n += 1;
                        *n
                    }
                    None => {
                        seen.push((clock, 1));
                        1
                    }
                };
                EventMark { time, clock, index }
            })
            .collect();
        ScriptedMarks::new(marks, range)
    }
}

impl MarkSource for ScriptedMarks {
    fn activate(&mut self, _lo: Site, _hi: Site, _now: f64) {}

    fn next_mark(&mut self, until: f64) -> Option<EventMark> {
        let m = *self.marks.get(self.pos)?;
        if m.time > until {
            return None;
        }
        self.pos += 1;
        Some(m)
    }

    fn range(&self) -> u32 {
        self.range
    }
}

/// `{y : A × s → y × t}` along the permitted arrows, avoiding recovery marks.
pub fn reachable(c: &Construction, a: &[Site], s: f64, t: f64, arrows: Arrows) -> Result<Vec<Site>> {
    if s > t {
        return Err(param("reachable needs s <= t"));
    }
    c.check_time(t)?;
    let mut set: BTreeSet<Site> = a.iter().copied().collect();
    let mut marks = ConstructionMarks::new(c);
    if let (Some(&lo), Some(&hi)) = (set.first(), set.last()) {
        marks.activate(lo, hi, s);
    }
    while let Some(m) = marks.next_mark(t) {
        if set.is_empty() {
            break;
        }
        let id = m.clock;
        if !set.contains(&id.source) {
            continue;
        }
        match id.kind {
            ClockKind::Recovery => {
                set.remove(&id.source);
            }
            ClockKind::DeltaArrow if arrows == Arrows::LambdaOnly => {}
            _ => {
                if set.insert(id.target) {
                    marks.activate(id.target, id.target, m.time);
                }
            }
        }
    }
    Ok(set.into_iter().collect())
}
