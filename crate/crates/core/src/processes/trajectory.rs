use alloc::vec::Vec;

use super::configuration::{Configuration, INFECTED};
use crate::graphical::Site;

/// Summary of the infected set right after an event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub time: f64,
    pub rightmost: Option<Site>,
    pub leftmost: Option<Site>,
    pub count: usize,
}

/// One state change at one site.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Change {
    pub time: f64,
    pub site: Site,
    pub from: i8,
    pub to: i8,
}

/// The record of one evolution.
///
/// `samples` holds the summary at the start and after every state change;
/// `changes` is the full change log, so any intermediate configuration can be
/// rebuilt with [`Replay`].
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub start_time: f64,
    pub end_time: f64,
    pub initial: Configuration,
    pub samples: Vec<Sample>,
    pub changes: Vec<Change>,
    pub snapshots: Vec<(f64, Configuration)>,
    pub died_at: Option<f64>,
    pub ever_infected: Vec<Site>,
    /// Fingerprint of the driving construction (0 for other sources).
    pub construction: u64,
    /// Depth used to truncate an infected half-line start.
    pub truncation: Option<Site>,
}

impl Trajectory {
    /// Summary in force at time `t`.
    pub fn sample_at(&self, t: f64) -> Sample {
        let i = self.samples.partition_point(|s| s.time <= t);
        let mut s = self.samples[i.saturating_sub(1)];
        s.time = t;
        s
    }

    pub fn rightmost_at(&self, t: f64) -> Option<Site> {
        self.sample_at(t).rightmost
    }

    pub fn alive_at(&self, t: f64) -> bool {
        self.sample_at(t).count > 0
    }

    pub fn final_sample(&self) -> Sample {
        self.sample_at(self.end_time)
    }

    /// Largest rightmost site over samples in `[t0, t1]` (including the
    /// value in force at `t0`).
    pub fn max_rightmost(&self, t0: f64, t1: f64) -> Option<Site> {
        self.extreme_rightmost(t0, t1, true)
    }

    /// Smallest rightmost site over `[t0, t1]`.
    pub fn min_rightmost(&self, t0: f64, t1: f64) -> Option<Site> {
        self.extreme_rightmost(t0, t1, false)
    }

    fn extreme_rightmost(&self, t0: f64, t1: f64, max: bool) -> Option<Site> {
        let first = self.sample_at(t0).rightmost;
        let i = self.samples.partition_point(|s| s.time <= t0);
        let j = self.samples.partition_point(|s| s.time <= t1);
        let rest = self.samples[i..j.max(i)].iter().filter_map(|s| s.rightmost);
        let all = first.into_iter().chain(rest);
        if max {
            all.max()
        } else {
            all.min()
        }
    }

    /// Configuration at time `t`, rebuilt from the change log.
    pub fn state_at(&self, t: f64) -> Configuration {
        let mut r = Replay::new(self);
        r.advance_to(t);
        r.config
    }

    pub fn infected_at(&self, t: f64) -> Vec<Site> {
        self.state_at(t).infected()
    }

    /// Times at which some change happened, ascending, without duplicates.
    pub fn change_times(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.changes.iter().map(|c| c.time).collect();
        v.dedup();
        v
    }
}

/// Walks a trajectory's change log forward in time.
pub struct Replay<'a> {
    traj: &'a Trajectory,
    config: Configuration,
    next: usize,
}

impl<'a> Replay<'a> {
    pub fn new(traj: &'a Trajectory) -> Self {
        Replay { traj, config: traj.initial.clone(), next: 0 }
    }

    /// Applies every change with time `<= t`; returns the ones applied.
    pub fn advance_to(&mut self, t: f64) -> &'a [Change] {
        let start = self.next;
        let ch = &self.traj.changes;
        while self.next < ch.len() && ch[self.next].time <= t {
            let c = ch[self.next];
            self.config.set(c.site, c.to);
            self.next += 1;
        }
        &ch[start..self.next]
    }

    pub fn config(&self) -> &Configuration {
        &self.config
    }

    pub fn is_infected(&self, x: Site) -> bool {
        self.config.get(x) == INFECTED
    }
}

/// Sorted union of the change times of several trajectories.
pub fn merged_change_times(ts: &[&Trajectory]) -> Vec<f64> {
    let mut v: Vec<f64> = ts.iter().flat_map(|t| t.changes.iter().map(|c| c.time)).collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}
