//! Oriented site percolation on `{(y, k) : y + k even, k ≥ 0}`.
//!
//! A site `(y, k+1)` is reached from row `k` if it is open and `y ± 1` is
//! reached in row `k`. Row 0 holds the start set and is not tested for
//! openness. Every field is a finite box of columns `lo..=hi`; sites outside
//! it are closed.

use alloc::vec::Vec;

use crate::coupling::{Violation, ViolationReport};
use crate::error::{param, Error, Result};
use crate::graphical::Site;
use crate::replicas::{run_seeded, Replicas};
use crate::rng::{derive_key, uniform};
use crate::stats::{fit_log_linear, Estimate, LogLinearFit};

/// How site states are drawn.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Generator {
    /// Independent sites, open with probability `p`.
    Independent(f64),
    /// `w(y, k) = u(y-1, k) OR u(y+1, k)` for independent base bits `u` of
    /// density `q`: a 1-dependent field.
    Overlap(f64),
}

impl Generator {
    /// Probability that a given site is open.
    pub fn density(&self) -> f64 {
        match *self {
            Generator::Independent(p) => p,
            Generator::Overlap(q) => 1.0 - (1.0 - q) * (1.0 - q),
        }
    }

    fn check(&self) -> Result<()> {
        let v = match *self {
            Generator::Independent(p) | Generator::Overlap(p) => p,
        };
        if (0.0..=1.0).contains(&v) {
            Ok(())
        } else {
            Err(param("generator parameter must lie in [0, 1]"))
        }
    }
}

/// Site states on rows `0..=n`, columns `lo..=hi`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PercField {
    pub lo: Site,
    pub hi: Site,
    pub n: usize,
    open: Vec<Vec<bool>>,
}

impl PercField {
    /// Field whose parity-correct sites are open according to `open(y, k)`.
    pub fn from_fn(lo: Site, hi: Site, n: usize, mut open: impl FnMut(Site, usize) -> bool) -> Self {
        let rows = (0..=n)
            .map(|k| (lo..=hi).map(|y| (y + k as Site).rem_euclid(2) == 0 && open(y, k)).collect())
            .collect();
        PercField { lo, hi, n, open: rows }
    }

    pub fn is_open(&self, y: Site, k: usize) -> bool {
        k <= self.n && self.lo <= y && y <= self.hi && self.open[k][(y - self.lo) as usize]
    }

    /// Parity-correct sites of row `k`.
    pub fn sites(&self, k: usize) -> impl Iterator<Item = Site> + '_ {
        (self.lo..=self.hi).filter(move |y| (y + k as Site).rem_euclid(2) == 0)
    }
}

/// Draws a field on columns `-half_width..=half_width`.
///
/// Site `(y, k)` uses the uniform at `(seed, k, y)` alone, so fields with the
/// same seed agree wherever both are defined, and raising `p` only opens
/// sites.
pub fn generate_field(gen: Generator, seed: u64, n: usize, half_width: Site) -> Result<PercField> {
    gen.check()?;
    if half_width < 0 {
        return Err(param("half_width must be nonnegative"));
    }
    let u = |y: Site, k: usize| uniform(derive_key(seed, &[k as u64, y as u64]), 0);
    Ok(PercField::from_fn(-half_width, half_width, n, |y, k| match gen {
        Generator::Independent(p) => u(y, k) < p,
        Generator::Overlap(q) => u(y - 1, k) < q || u(y + 1, k) < q,
    }))
}

/// Reached sites, row by row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PercTrace {
    pub rows: Vec<Vec<Site>>,
    pub survived: bool,
}

impl PercTrace {
    pub fn rightmost(&self, k: usize) -> Option<Site> {
        self.rows[k].last().copied()
    }

    pub fn leftmost(&self, k: usize) -> Option<Site> {
        self.rows[k].first().copied()
    }
}

fn start_row(field: &PercField, a: &[Site]) -> Result<Vec<Site>> {
    let mut row: Vec<Site> = a.to_vec();
    row.sort_unstable();
    row.dedup();
    if row.iter().any(|y| y.rem_euclid(2) != 0) {
        return Err(param("start sites must be even"));
    }
    if row.iter().any(|&y| y < field.lo || y > field.hi) {
        return Err(param("start sites outside the field"));
    }
    Ok(row)
}

/// Dynamic programming over rows, sites outside the box closed.
pub fn percolate_unchecked(field: &PercField, a: &[Site]) -> Result<PercTrace> {
    let mut rows = alloc::vec![start_row(field, a)?];
    for k in 1..=field.n {
        let prev = &rows[k - 1];
        let mut next: Vec<Site> = Vec::new();
        for &x in prev {
            for y in [x - 1, x + 1] {
                if field.is_open(y, k) && next.last().is_none_or(|&l| l < y) {
                    next.push(y);
                }
            }
        }
        rows.push(next);
    }
    let survived = !rows[field.n].is_empty();
    Ok(PercTrace { rows, survived })
}

/// Like [`percolate_unchecked`], but refuses fields too narrow to contain
/// every path from `a`, so the result is the one on the unbounded lattice.
pub fn percolate(field: &PercField, a: &[Site]) -> Result<PercTrace> {
    let row = start_row(field, a)?;
    if let (Some(&l), Some(&r)) = (row.first(), row.last()) {
        let n = field.n as Site;
        if l - n < field.lo || r + n > field.hi {
            return Err(Error::WidthCertificate(alloc::format!(
                "start hull [{l}, {r}] plus {n} rows exceeds columns [{}, {}]",
                field.lo,
                field.hi
            )));
        }
    }
    percolate_unchecked(field, &row)
}

/// Checks `W_k^0 = W_k^{2Z} ∩ [L_k, R_k]` on every row the origin's cluster
/// reaches. The all-even start uses the whole bottom row, so the field must
/// be at least `2n` wide on each side for the box edges not to matter.
pub fn restriction_check(field: &PercField) -> Result<ViolationReport> {
    let n = field.n as Site;
    if field.lo > -2 * n || field.hi < 2 * n {
        return Err(Error::WidthCertificate("restriction check needs columns covering [-2n, 2n]".into()));
    }
    let origin = percolate(field, &[0])?;
    let all: Vec<Site> = field.sites(0).collect();
    let full = percolate_unchecked(field, &all)?;
    let mut report = ViolationReport { total_checks: 0, violations: Vec::new() };
    for k in 0..=field.n {
        let (Some(l), Some(r)) = (origin.leftmost(k), origin.rightmost(k)) else { break };
        report.total_checks += 1;
        let inside: Vec<Site> = full.rows[k].iter().copied().filter(|&y| l <= y && y <= r).collect();
        if inside != origin.rows[k] {
            report.violations.push(Violation {
                time: k as f64,
                site: None,
                detail: alloc::format!("row {k}: {} sites from the origin, {} from all", origin.rows[k].len(), inside.len()),
            });
        }
    }
    Ok(report)
}

/// Restriction checks on fields until `target` of them have an origin
/// cluster reaching row `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct RestrictionSummary {
    pub fields: u64,
    pub surviving: u64,
    pub report: ViolationReport,
}

pub fn restriction_experiment<R: Replicas>(runner: &R, gen: Generator, n: usize, target: u64, seed: u64) -> Result<RestrictionSummary> {
    let mut out = RestrictionSummary { fields: 0, surviving: 0, report: ViolationReport { total_checks: 0, violations: Vec::new() } };
    let hw = 2 * n as Site;
    let mut batch = 0u64;
    while out.surviving < target {
        if batch > 64 {
            return Err(Error::Degenerate("too few surviving fields".into()));
        }
        let runs = run_seeded(runner, derive_key(seed, &[batch]), target, |sd| -> Result<Option<ViolationReport>> {
            let f = generate_field(gen, sd, n, hw)?;
            if !percolate(&f, &[0])?.survived {
                return Ok(None);
            }
            restriction_check(&f).map(Some)
        });
        for r in runs {
            out.fields += 1;
            if let Some(rep) = r? {
                if out.surviving < target {
                    out.surviving += 1;
                    out.report.merge(rep);
                }
            }
        }
        batch += 1;
    }
    Ok(out)
}

/// `P(R_n < a n | W_n^0 ≠ ∅)` over an `n` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthCurve {
    /// `(n, conditional estimate, surviving fields)`.
    pub levels: Vec<(usize, Estimate, u64)>,
    /// Fit of `log p̂` against `n`, when at least three levels exist.
    pub fit: Option<LogLinearFit>,
}

pub fn rightmost_growth<R: Replicas>(runner: &R, p: f64, a: f64, n_grid: &[usize], reps: u64, seed: u64) -> Result<GrowthCurve> {
    let gen = Generator::Independent(p);
    let mut levels = Vec::new();
    for (i, &n) in n_grid.iter().enumerate() {
        let runs = run_seeded(runner, derive_key(seed, &[i as u64]), reps, |sd| -> Result<Option<bool>> {
            let f = generate_field(gen, sd, n, n as Site)?;
            let tr = percolate(&f, &[0])?;
            Ok(tr.rightmost(n).map(|r| (r as f64) < a * n as f64))
        });
        let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
        let alive = runs.iter().flatten().count() as u64;
        let low = runs.iter().flatten().filter(|&&b| b).count() as u64;
        levels.push((n, Estimate::proportion(low, alive), alive));
    }
    let pts: Vec<(f64, f64, u64)> = levels.iter().filter(|l| l.2 > 0).map(|l| (l.0 as f64, l.1.value, l.2)).collect();
    let fit = if pts.len() >= 3 { Some(fit_log_linear(&pts)?) } else { None };
    Ok(GrowthCurve { levels, fit })
}

/// `P(|W_n^0 ∩ Y| < ρ|Y|, W_n^0 ≠ ∅)` with `Y` the row-`n` sites in
/// `[-βn, βn]`, for each `n` of the grid.
pub fn density_experiment<R: Replicas>(
    runner: &R,
    gen: Generator,
    rho: f64,
    beta: f64,
    n_grid: &[usize],
    reps: u64,
    seed: u64,
) -> Result<Vec<(usize, Estimate)>> {
    if !(0.0..=1.0).contains(&rho) || !(0.0..=1.0).contains(&beta) {
        return Err(param("ρ and β must lie in [0, 1]"));
    }
    let mut out = Vec::new();
    for (i, &n) in n_grid.iter().enumerate() {
        let half = libm::floor(beta * n as f64) as Site;
        let runs = run_seeded(runner, derive_key(seed, &[i as u64]), reps, |sd| -> Result<bool> {
            let f = generate_field(gen, sd, n, n as Site)?;
            let tr = percolate(&f, &[0])?;
            if !tr.survived {
                return Ok(false);
            }
            let y: Vec<Site> = f.sites(n).filter(|y| y.abs() <= half).collect();
            let hit = tr.rows[n].iter().filter(|x| x.abs() <= half).count();
            Ok((hit as f64) < rho * y.len() as f64)
        });
        let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
        out.push((n, Estimate::proportion(runs.iter().filter(|&&b| b).count() as u64, reps)));
    }
    Ok(out)
}

/// Fraction of open parity-correct sites, averaged over independent fields
/// (the standard error comes from the spread between fields).
pub fn field_density<R: Replicas>(runner: &R, gen: Generator, n: usize, half_width: Site, reps: u64, seed: u64) -> Result<Estimate> {
    let runs = run_seeded(runner, seed, reps, |sd| -> Result<f64> {
        let f = generate_field(gen, sd, n, half_width)?;
        let (mut open, mut all) = (0usize, 0usize);
        for k in 1..=n {
            for y in f.sites(k) {
                all += 1;
                open += f.is_open(y, k) as usize;
            }
        }
        Ok(open as f64 / all as f64)
    });
    let v = runs.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(Estimate::mean_of(&v))
}
