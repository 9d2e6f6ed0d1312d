use alloc::vec::Vec;

use super::configuration::{Configuration, FRESH, INFECTED, RECOVERED};
use super::trajectory::{Change, Sample, Trajectory};
use crate::graphical::{Arrows, ClockKind, DeltaRole, EventMark, MarkSource, Site};

/// How marks act on site states.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    ThreeState(DeltaRole),
    Contact(Arrows),
}

/// Optional boundary conditions on the left.
///
/// Pinned sites are infected forever; sites below `floor` can never be
/// infected.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Boundary {
    pub pinned: Option<(Site, Site)>,
    pub floor: Option<Site>,
}

impl Boundary {
    fn is_pinned(&self, x: Site) -> bool {
        self.pinned.is_some_and(|(a, b)| a <= x && x <= b)
    }

    fn blocks(&self, y: Site) -> bool {
        self.floor.is_some_and(|f| y < f) || self.is_pinned(y)
    }
}

/// Observer called after every processed mark with the change it caused (if
/// any) and the summary after it.
pub type Observer<'a> = dyn FnMut(&EventMark, Option<&Change>, &Sample) + 'a;

pub(crate) struct Job<'a> {
    pub rule: Rule,
    pub boundary: Boundary,
    pub start: f64,
    pub end: f64,
    pub snapshots: &'a [f64],
    pub tag: u64,
}

#[inline]
fn fires(rule: Rule, kind: ClockKind, target: i8) -> bool {
    if target == INFECTED {
        return false;
    }
    match (rule, kind) {
        (_, ClockKind::Recovery) => false,
        (Rule::ThreeState(_), ClockKind::LambdaArrow) => true,
        (Rule::ThreeState(DeltaRole::Reinfection), ClockKind::DeltaArrow) => target == RECOVERED,
        (Rule::ThreeState(DeltaRole::FirstInfection), ClockKind::DeltaArrow) => target == FRESH,
        (Rule::Contact(_), ClockKind::LambdaArrow) => true,
        (Rule::Contact(a), ClockKind::DeltaArrow) => a == Arrows::Both,
    }
}

/// Runs one process from a finite configuration.
pub(crate) fn run<S: MarkSource>(
    mut config: Configuration,
    job: &Job<'_>,
    source: &mut S,
    observer: &mut Observer<'_>,
) -> Trajectory {
    debug_assert!(config.is_finite());
    let b = job.boundary;
    if let Some((p, q)) = b.pinned {
        for x in p..=q {
            config.set(x, INFECTED);
        }
    }
    let initial = config.clone();
    let mut ever: Vec<Site> = initial.infected();
    let mut count = initial.count_infected();
    let mut right = initial.rightmost();
    let mut left = initial.leftmost();
    let mut active = left.zip(right);
    if let Some((lo, hi)) = active {
        source.activate(lo, hi, job.start);
    }
    let mut samples = alloc::vec![Sample { time: job.start, rightmost: right, leftmost: left, count }];
    let mut changes = Vec::new();
    let mut snapshots = Vec::new();
    let mut snap = job.snapshots.iter().copied().filter(|&s| s >= job.start).peekable();
    let mut died_at = (count == 0).then_some(job.start);

    while died_at.is_none() {
        let Some(m) = source.next_mark(job.end) else { break };
        if m.time <= job.start {
            continue;
        }
        while let Some(&s) = snap.peek() {
            if s < m.time {
                snapshots.push((s, config.clone()));
                snap.next();
            } else {
                break;
            }
        }
        let id = m.clock;
        let x = id.source;
        let change = if config.get(x) != INFECTED {
            None
        } else if id.kind == ClockKind::Recovery {
            (!b.is_pinned(x)).then_some(Change { time: m.time, site: x, from: INFECTED, to: RECOVERED })
        } else {
            let y = id.target;
            let sy = config.get(y);
            (!b.blocks(y) && fires(job.rule, id.kind, sy))
                .then_some(Change { time: m.time, site: y, from: sy, to: INFECTED })
        };
        if let Some(ch) = change {
            config.set(ch.site, ch.to);
            if ch.to == INFECTED {
                count += 1;
                ever.push(ch.site);
                right = Some(right.map_or(ch.site, |r| r.max(ch.site)));
                left = Some(left.map_or(ch.site, |l| l.min(ch.site)));
                match active {
                    Some((lo, hi)) if lo <= ch.site && ch.site <= hi => {}
                    _ => {
                        source.activate(ch.site, ch.site, m.time);
                        active = Some(active.map_or((ch.site, ch.site), |(lo, hi)| {
                            (lo.min(ch.site), hi.max(ch.site))
                        }));
                    }
                }
            } else {
                count -= 1;
                if count == 0 {
                    right = None;
                    left = None;
                    died_at = Some(m.time);
                } else {
                    if right == Some(x) {
                        let mut r = x - 1;
                        while config.get(r) != INFECTED {
                            r -= 1;
                        }
                        right = Some(r);
                    }
                    if left == Some(x) {
                        let mut l = x + 1;
                        while config.get(l) != INFECTED {
                            l += 1;
                        }
                        left = Some(l);
                    }
                }
            }
            changes.push(ch);
            samples.push(Sample { time: m.time, rightmost: right, leftmost: left, count });
        }
        observer(&m, change.as_ref(), samples.last().expect("nonempty"));
    }
    for s in snap {
        if s <= job.end {
            snapshots.push((s, config.clone()));
        }
    }
    ever.sort_unstable();
    ever.dedup();
    Trajectory {
        start_time: job.start,
        end_time: job.end,
        initial,
        samples,
        changes,
        snapshots,
        died_at,
        ever_infected: ever,
        construction: job.tag,
        truncation: None,
    }
}
