//! Checks of the event engine and the Monte Carlo plumbing against
//! independent implementations.

use ips_core::coupling::check_duality;
use ips_core::graphical::{stream_times, ClockId, ClockKind, Construction, DeltaRole, ScriptedMarks, Site};
use ips_core::processes::{forest_fire_cluster, Configuration, Evolve, ProcessParams, FRESH, INFECTED, RECOVERED};
use ips_core::regeneration::{collect_break_points, estimate_beta};
use ips_core::replicas::{Replicas, Sequential};
use ips_core::rng::Stream;
use ips_core::stats::chi_square_independence;
use ips_core::subcritical::range_decay;

#[test]
fn forest_fire_cluster_is_the_ever_infected_set() {
    let p = ProcessParams::new(1.5, 0.0).unwrap();
    let mut sizes = 0;
    for seed in 0..1000 {
        let c = p.construction(seed, 200.0).unwrap();
        let tr = Evolve::three_state(&c, &p).unwrap().run(&Configuration::standard()).unwrap();
        assert!(tr.died_at.is_some(), "seed {seed} still burning");
        let cluster = forest_fire_cluster(0, 1.5, &c).unwrap();
        assert_eq!(cluster, tr.ever_infected, "seed {seed}");
        sizes += cluster.len();
        // Each site burns at most once.
        let mut burned: Vec<Site> = tr.changes.iter().filter(|ch| ch.to == INFECTED).map(|ch| ch.site).collect();
        let n = burned.len();
        burned.sort_unstable();
        burned.dedup();
        assert_eq!(burned.len(), n, "seed {seed} reinfected a site");
    }
    assert!(sizes > 1000, "clusters never spread");
}

/// Straight replay of a mark list with the transition rules written out.
fn replay(start: &[i8], lo: Site, marks: &[(f64, ClockId)], role: DeltaRole) -> Vec<i8> {
    let mut s = start.to_vec();
    let idx = |x: Site| (x - lo) as usize;
    let mut order = marks.to_vec();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    for (_, id) in order {
        match id.kind {
            ClockKind::Recovery => {
                if s[idx(id.source)] == INFECTED {
                    s[idx(id.source)] = RECOVERED;
                }
            }
            kind => {
                if s[idx(id.source)] != INFECTED {
                    continue;
                }
                let target = &mut s[idx(id.target)];
                let infects = match (kind, role, *target) {
                    (_, _, INFECTED) => false,
                    (ClockKind::LambdaArrow, _, _) => true,
                    (ClockKind::DeltaArrow, DeltaRole::Reinfection, st) => st == RECOVERED,
                    (ClockKind::DeltaArrow, DeltaRole::FirstInfection, st) => st == FRESH,
                    (ClockKind::Recovery, _, _) => unreachable!(),
                };
                if infects {
                    *target = INFECTED;
                }
            }
        }
    }
    s
}

#[test]
fn engine_matches_replay_on_random_scripts() {
    let (lo, hi) = (-5, 5);
    for (p, role) in [((1.0, 2.0), DeltaRole::Reinfection), ((2.0, 1.0), DeltaRole::FirstInfection)] {
        let params = ProcessParams::new(p.0, p.1).unwrap();
        let c = params.construction(0, 10.0).unwrap();
        assert_eq!(c.delta_role(), role);
        let ev = Evolve::three_state(&c, &params).unwrap().until(10.0);
        for seed in 0..500 {
            let mut rng = Stream::new(seed);
            let start: Vec<i8> = (lo..=hi).map(|_| [FRESH, RECOVERED, INFECTED][rng.below(3) as usize]).collect();
            let mut marks = Vec::new();
            for _ in 0..40 {
                let t = rng.next_f64() * 10.0;
                let x = lo + rng.below((hi - lo + 1) as u64) as Site;
                let y = if rng.bernoulli(0.5) { x - 1 } else { x + 1 };
                let id = match rng.below(3) {
                    0 => ClockId::recovery(x),
                    1 if (lo..=hi).contains(&y) => ClockId::lambda(x, y),
                    2 if (lo..=hi).contains(&y) => ClockId::delta(x, y),
                    _ => ClockId::recovery(x),
                };
                marks.push((t, id));
            }
            let eta = Configuration::from_states(lo, &start, FRESH, FRESH);
            let tr = ev.run_with(&eta, &mut ScriptedMarks::from_clocks(&marks, 1)).unwrap();
            let end = tr.state_at(10.0);
            let got: Vec<i8> = (lo..=hi).map(|x| end.get(x)).collect();
            assert_eq!(got, replay(&start, lo, &marks, role), "role {role:?} seed {seed}");
        }
    }
}

#[test]
fn disjoint_clocks_are_independent() {
    let bin = |n: usize| n.min(3);
    for (a, b, rate) in [
        (ClockId::recovery(0), ClockId::recovery(1), 1.0),
        (ClockId::lambda(0, 1), ClockId::delta(0, 1), 1.5),
        (ClockId::lambda(0, 1), ClockId::lambda(1, 0), 2.0),
    ] {
        let mut table = vec![vec![0u64; 4]; 4];
        for seed in 0..10_000 {
            let na = stream_times(seed, a, rate, 1.0).unwrap().len();
            let nb = stream_times(seed, b, rate, 1.0).unwrap().len();
            table[bin(na)][bin(nb)] += 1;
        }
        let chi = chi_square_independence(&table).unwrap();
        assert!(chi.p > 0.01, "{a:?} vs {b:?}: p = {}", chi.p);
    }
}

#[test]
fn longer_horizons_extend_streams() {
    let c1 = Construction::contact(9, 2.0, 1, 5.0).unwrap();
    let c2 = Construction::contact(9, 2.0, 1, 50.0).unwrap();
    for x in -3..=3 {
        let id = ClockId::lambda(x, x + 1);
        let short = c1.times(id, 5.0).unwrap();
        assert_eq!(short, c2.times(id, 5.0).unwrap());
        assert_eq!(short[..], c2.times(id, 50.0).unwrap()[..short.len()]);
    }
}

/// Evaluates replicas in a random order and returns them in index order.
struct Shuffled(u64);

impl Replicas for Shuffled {
    fn map<T, F>(&self, n: u64, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send,
    {
        let mut order: Vec<u64> = (0..n).collect();
        let mut rng = Stream::new(self.0);
        for i in (1..order.len()).rev() {
            order.swap(i, rng.below(i as u64 + 1) as usize);
        }
        let mut out: Vec<Option<T>> = (0..n).map(|_| None).collect();
        for i in order {
            out[i as usize] = Some(f(i));
        }
        out.into_iter().map(|x| x.expect("every index evaluated")).collect()
    }
}

#[test]
fn results_do_not_depend_on_evaluation_order() {
    let p = ProcessParams::new(1.0, 2.0).unwrap();
    let sub = ProcessParams::new(0.25, 0.25).unwrap();
    for k in 0..3 {
        let r = Shuffled(k);
        assert_eq!(range_decay(&r, &sub, 5, 500, 3).unwrap(), range_decay(&Sequential, &sub, 5, 500, 3).unwrap());
        assert_eq!(estimate_beta(&r, &p, 5.0, 200, 4).unwrap(), estimate_beta(&Sequential, &p, 5.0, 200, 4).unwrap());
        assert_eq!(
            collect_break_points(&r, &p, 60.0, 10.0, 6, 5).unwrap(),
            collect_break_points(&Sequential, &p, 60.0, 10.0, 6, 5).unwrap()
        );
        assert_eq!(
            check_duality(&r, &[0], &[-1, 0, 1], 1.0, 2.0, 300, 6).unwrap(),
            check_duality(&Sequential, &[0], &[-1, 0, 1], 1.0, 2.0, 300, 6).unwrap()
        );
    }
}
