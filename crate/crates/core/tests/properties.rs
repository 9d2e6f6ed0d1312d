use ips_core::coupling::check_order;
use ips_core::graphical::{reachable, stream_times, Arrows, ClockId, Construction, Site};
use ips_core::processes::{Configuration, Evolve, ProcessParams, FRESH, INFECTED, RECOVERED};
use proptest::prelude::*;

fn states() -> impl Strategy<Value = Vec<i8>> {
    prop::collection::vec(prop::sample::select(vec![FRESH, RECOVERED, INFECTED]), 1..9)
}

fn site_set() -> impl Strategy<Value = Vec<Site>> {
    prop::collection::btree_set(-5i64..=5, 0..5).prop_map(|s| s.into_iter().collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn streams_have_stable_prefixes(seed in any::<u64>(), x in -50i64..50, rate in 0.1f64..5.0, t1 in 0.1f64..20.0, extra in 0.0f64..20.0) {
        let id = ClockId::lambda(x, x + 1);
        let short = stream_times(seed, id, rate, t1).unwrap();
        let long = stream_times(seed, id, rate, t1 + extra).unwrap();
        prop_assert_eq!(&short[..], &long[..short.len()]);
        prop_assert!(long[short.len()..].iter().all(|&s| s > t1));
    }

    #[test]
    fn reachable_is_additive_and_monotone(seed in any::<u64>(), a in site_set(), b in site_set(), t in 0.0f64..3.0) {
        let c = Construction::contact(seed, 2.0, 1, 3.0).unwrap();
        let ra = reachable(&c, &a, 0.0, t, Arrows::Both).unwrap();
        let rb = reachable(&c, &b, 0.0, t, Arrows::Both).unwrap();
        let mut ab: Vec<Site> = a.iter().chain(&b).copied().collect();
        ab.sort_unstable();
        ab.dedup();
        let rab = reachable(&c, &ab, 0.0, t, Arrows::Both).unwrap();
        let mut union: Vec<Site> = ra.iter().chain(&rb).copied().collect();
        union.sort_unstable();
        union.dedup();
        prop_assert!(ra.iter().all(|x| rab.contains(x)));
        prop_assert_eq!(rab, union);
    }

    #[test]
    fn ordered_starts_stay_ordered(seed in any::<u64>(), lo in states(), lift in prop::collection::vec(0u8..3, 9), lambda in 0.1f64..2.0, extra in 0.0f64..2.0) {
        // μ ≥ λ keeps the dynamics attractive.
        let p = ProcessParams::new(lambda, lambda + extra).unwrap();
        let hi: Vec<i8> = lo.iter().zip(&lift).map(|(&s, &k)| (s + k as i8).min(INFECTED)).collect();
        let a = Configuration::from_states(-2, &lo, FRESH, FRESH);
        let b = Configuration::from_states(-2, &hi, FRESH, FRESH);
        prop_assert!(a.le(&b));
        let c = p.construction(seed, 5.0).unwrap();
        let ev = Evolve::three_state(&c, &p).unwrap().until(5.0);
        let report = check_order(&ev.run(&a).unwrap(), &ev.run(&b).unwrap()).unwrap();
        prop_assert!(report.is_clean(), "{:?}", report.violations.first());
    }

    #[test]
    fn transitions_are_legal(seed in any::<u64>(), start in states(), lambda in 0.0f64..3.0, mu in 0.0f64..3.0) {
        let p = ProcessParams::new(lambda, mu).unwrap();
        let c = p.construction(seed, 4.0).unwrap();
        let tr = Evolve::three_state(&c, &p).unwrap().until(4.0).run(&Configuration::from_states(0, &start, FRESH, FRESH)).unwrap();
        for ch in &tr.changes {
            let legal = matches!((ch.from, ch.to), (FRESH, INFECTED) | (RECOVERED, INFECTED) | (INFECTED, RECOVERED));
            prop_assert!(legal, "{:?}", ch);
            if mu == 0.0 {
                prop_assert!(ch.from != RECOVERED, "reinfection with μ = 0: {:?}", ch);
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for s in &tr.samples {
            prop_assert_eq!(s.count, tr.infected_at(s.time).len());
            seen.extend(tr.infected_at(s.time));
        }
        prop_assert!(seen.iter().all(|x| tr.ever_infected.contains(x)));
    }
}
