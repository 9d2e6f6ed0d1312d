use alloc::vec::Vec;

use super::configuration::{FRESH, INFECTED, RECOVERED};
use crate::error::{param, Result};
use crate::rng::Stream;

/// A finite directed graph on vertices `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteGraph {
    out: Vec<Vec<usize>>,
}

impl FiniteGraph {
    pub fn new(n: usize) -> Self {
        FiniteGraph { out: alloc::vec![Vec::new(); n] }
    }

    /// Two vertices joined in both directions.
    pub fn pair() -> Self {
        let mut g = FiniteGraph::new(2);
        g.add_edge(0, 1);
        g.add_edge(1, 0);
        g
    }

    /// Path `0 - 1 - ... - n-1` with edges in both directions.
    pub fn path(n: usize) -> Self {
        let mut g = FiniteGraph::new(n);
        for i in 1..n {
            g.add_edge(i - 1, i);
            g.add_edge(i, i - 1);
        }
        g
    }

    pub fn add_edge(&mut self, u: usize, v: usize) {
        self.out[u].push(v);
    }

    pub fn len(&self) -> usize {
        self.out.len()
    }

    pub fn is_empty(&self) -> bool {
        self.out.is_empty()
    }

    pub fn neighbours(&self, u: usize) -> &[usize] {
        &self.out[u]
    }
}

/// Direct simulation of the three-state process on a finite graph up to
/// time `t`, independent of the graphical construction.
///
/// Each infected vertex recovers at rate 1 and attempts each out-edge at
/// rate `max(λ, μ)`; an attempt on a fresh target succeeds with probability
/// `λ / max`, on a recovered one with `μ / max`.
pub fn simulate_finite(
    g: &FiniteGraph,
    initial: &[i8],
    lambda: f64,
    mu: f64,
    t: f64,
    rng: &mut Stream,
) -> Result<Vec<i8>> {
    if initial.len() != g.len() {
        return Err(param("initial state length differs from the graph size"));
    }
    if !(lambda >= 0.0 && mu >= 0.0 && t >= 0.0) {
        return Err(param("rates and time must be nonnegative"));
    }
    let top = lambda.max(mu);
    let mut state = initial.to_vec();
    let mut infected: Vec<usize> = (0..g.len()).filter(|&v| state[v] == INFECTED).collect();
    let mut now = 0.0;
    while !infected.is_empty() {
        let weights: Vec<f64> = infected.iter().map(|&v| 1.0 + top * g.neighbours(v).len() as f64).collect();
        let total: f64 = weights.iter().sum();
        now += rng.exponential(total);
        if now > t {
            break;
        }
        let mut pick = rng.next_f64() * total;
        let mut k = 0;
        while k + 1 < weights.len() && pick >= weights[k] {
            pick -= weights[k];
            k += 1;
        }
        let v = infected[k];
        if pick < 1.0 {
            state[v] = RECOVERED;
            infected.swap_remove(k);
            continue;
        }
        let nb = g.neighbours(v);
        let j = (((pick - 1.0) / top) as usize).min(nb.len() - 1);
        let w = nb[j];
        let p = match state[w] {
            FRESH => lambda / top,
            RECOVERED => mu / top,
            _ => 0.0,
        };
        if p > 0.0 && rng.next_f64() < p {
            state[w] = INFECTED;
            infected.push(w);
        }
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_time_no_change() {
        let mut rng = Stream::new(1);
        let s = simulate_finite(&FiniteGraph::pair(), &[INFECTED, FRESH], 2.0, 0.0, 0.0, &mut rng).unwrap();
        assert_eq!(s, alloc::vec![INFECTED, FRESH]);
    }

    #[test]
    fn single_site_survival_is_exponential() {
        let g = FiniteGraph::new(1);
        let n = 20_000;
        let mut rng = Stream::new(7);
        let alive = (0..n)
            .filter(|_| simulate_finite(&g, &[INFECTED], 1.0, 1.0, 1.0, &mut rng).unwrap()[0] == INFECTED)
            .count();
        let p = alive as f64 / n as f64;
        let want = libm::exp(-1.0);
        assert!((p - want).abs() < 4.0 * libm::sqrt(want * (1.0 - want) / n as f64));
    }

    #[test]
    fn forest_fire_never_reinfects() {
        let g = FiniteGraph::path(5);
        let mut rng = Stream::new(3);
        for _ in 0..200 {
            let s = simulate_finite(&g, &[RECOVERED, RECOVERED, INFECTED, RECOVERED, RECOVERED], 3.0, 0.0, 5.0, &mut rng)
                .unwrap();
            assert!(s.iter().enumerate().all(|(i, &v)| i == 2 || v == RECOVERED));
        }
    }
}
