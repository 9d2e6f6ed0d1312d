//! Path-enumeration oracle for oriented site percolation, independent of the
//! row-by-row dynamic programming.

use ips_core::graphical::Site;
use ips_core::percolation::{percolate_unchecked, PercField};

/// Row-`k` sites reached from `a` by some path `x_0 ∈ a, x_i = x_{i-1} ± 1`
/// whose sites in rows `1..=k` are all open.
pub fn reached_by_paths(field: &PercField, a: &[Site], k: usize) -> Vec<Site> {
    let mut out = Vec::new();
    for &x0 in a {
        for steps in 0u32..(1 << k) {
            let mut x = x0;
            let mut ok = true;
            for i in 0..k {
                x += if steps >> i & 1 == 1 { 1 } else { -1 };
                if !field.is_open(x, i + 1) {
                    ok = false;
                    break;
                }
            }
            if ok {
                out.push(x);
            }
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}

/// Outcome of comparing the DP with path enumeration on every field.
pub struct Exhaustive {
    pub fields: u64,
    pub cases: u64,
    pub mismatches: u64,
}

/// Every field with columns `0..w` and rows `0..=n` for `w <= max_w`,
/// `n + 1 <= max_rows`, every open/closed assignment of the parity-correct
/// sites in rows `1..=n`, and every set of even start sites.
pub fn exhaustive(max_w: Site, max_rows: usize) -> Exhaustive {
    let mut res = Exhaustive { fields: 0, cases: 0, mismatches: 0 };
    for w in 1..=max_w {
        for n in 0..max_rows {
            let free: Vec<(Site, usize)> =
                (1..=n).flat_map(|k| (0..w).filter(move |y| (y + k as Site) % 2 == 0).map(move |y| (y, k))).collect();
            let evens: Vec<Site> = (0..w).filter(|y| y % 2 == 0).collect();
            for mask in 0u64..(1 << free.len()) {
                let field = PercField::from_fn(0, w - 1, n, |y, k| {
                    free.iter().position(|&s| s == (y, k)).is_some_and(|i| mask >> i & 1 == 1)
                });
                res.fields += 1;
                for sub in 0u32..(1 << evens.len()) {
                    let a: Vec<Site> = evens.iter().enumerate().filter(|(i, _)| sub >> i & 1 == 1).map(|(_, &y)| y).collect();
                    let dp = percolate_unchecked(&field, &a).expect("valid start");
                    res.cases += 1;
                    let mut same = dp.survived == !reached_by_paths(&field, &a, n).is_empty();
                    for k in 0..=n {
                        same &= dp.rows[k] == reached_by_paths(&field, &a, k);
                    }
                    res.mismatches += !same as u64;
                }
            }
        }
    }
    res
}
