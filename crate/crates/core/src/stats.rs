//! Statistics kernel: estimates with standard errors, KS tests, weighted
//! log-linear fits, trend and independence tests.
//!
//! p-values are asymptotic unless stated otherwise.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};

/// A point estimate with its standard error and sample size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
    pub n: u64,
}

impl Estimate {
    pub fn new(value: f64, se: f64, n: u64) -> Self {
        Estimate { value, se, n }
    }

    /// Sample proportion `k / n` with binomial standard error.
    pub fn proportion(k: u64, n: u64) -> Self {
        if n == 0 {
            return Estimate::new(f64::NAN, f64::NAN, 0);
        }
        let p = k as f64 / n as f64;
        Estimate::new(p, libm::sqrt(p * (1.0 - p) / n as f64), n)
    }

    /// Sample mean with standard error `s / sqrt(n)`.
    pub fn mean_of(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Estimate::new(f64::NAN, f64::NAN, 0);
        }
        let m = mean(xs);
        let se = if n > 1 { libm::sqrt(variance(xs) / n as f64) } else { f64::NAN };
        Estimate::new(m, se, n as u64)
    }

    /// Symmetric normal-theory interval `value ± z·se`.
    pub fn interval(&self, z: f64) -> (f64, f64) {
        (self.value - z * self.se, self.value + z * self.se)
    }
}

/// Two-sided 99% normal quantile.
pub const Z99: f64 = 2.575_829_303_548_900_4;

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance; zero for fewer than two points.
pub fn variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / core::f64::consts::SQRT_2)
}

/// Upper tail of the Kolmogorov distribution, `P(K > lambda)`.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // Jacobi-theta form converges fast for small arguments.
        let y = -PI * PI / (8.0 * lambda * lambda);
        let mut s = 0.0;
        for k in 0..6 {
            let j = (2 * k + 1) as f64;
            s += libm::exp(j * j * y);
        }
        (1.0 - libm::sqrt(2.0 * PI) / lambda * s).clamp(0.0, 1.0)
    } else {
        let mut s = 0.0;
        let mut sign = 1.0;
        for k in 1..=100 {
            let kf = k as f64;
            let term = libm::exp(-2.0 * kf * kf * lambda * lambda);
            s += sign * term;
            if term < 1e-17 {
                break;
            }
            sign = -sign;
        }
        (2.0 * s).clamp(0.0, 1.0)
    }
}

/// Result of a Kolmogorov–Smirnov test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub d: f64,
    pub p: f64,
}

fn sorted(xs: &[f64]) -> Result<Vec<f64>> {
    if xs.iter().any(|x| x.is_nan()) {
        return Err(Error::Degenerate("NaN in sample".into()));
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

fn ks_p(d: f64, n_eff: f64) -> f64 {
    let s = libm::sqrt(n_eff);
    kolmogorov_q((s + 0.12 + 0.11 / s) * d)
}

/// Two-sample KS statistic with the asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    let need = 5;
    if a.len() < need || b.len() < need {
        return Err(Error::InsufficientData { needed: need, got: a.len().min(b.len()) });
    }
    let a = sorted(a)?;
    let b = sorted(b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = if a[i] <= b[j] { a[i] } else { b[j] };
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(KsResult { d, p: ks_p(d, na * nb / (na + nb)) })
}

/// One-sample KS test against a continuous CDF.
pub fn ks_one_sample(xs: &[f64], cdf: impl Fn(f64) -> f64) -> Result<KsResult> {
    let need = 5;
    if xs.len() < need {
        return Err(Error::InsufficientData { needed: need, got: xs.len() });
    }
    let v = sorted(xs)?;
    let n = v.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in v.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    Ok(KsResult { d, p: ks_p(d, n) })
}

/// Weighted least-squares fit of `log p̂` against `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogLinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub slope_se: f64,
}

/// Fits `log p̂ = intercept + slope·x` with inverse binomial-variance weights.
///
/// Each point is `(x, p̂, reps)`. Zero proportions are replaced by
/// `½/(reps+1)` and their weight is halved again.
pub fn fit_log_linear(points: &[(f64, f64, u64)]) -> Result<LogLinearFit> {
    if points.len() < 3 {
        return Err(Error::InsufficientData { needed: 3, got: points.len() });
    }
    let mut xs = Vec::with_capacity(points.len());
    let mut ys = Vec::with_capacity(points.len());
    let mut ws = Vec::with_capacity(points.len());
    for &(x, p, reps) in points {
        if !(0.0..=1.0).contains(&p) || reps == 0 {
            return Err(Error::Degenerate("proportion outside [0,1] or zero reps".into()));
        }
        let floor = 0.5 / (reps as f64 + 1.0);
        let (pc, shrink) = if p > 0.0 { (p.min(1.0 - floor), 1.0) } else { (floor, 0.5) };
        xs.push(x);
        ys.push(libm::log(pc));
        ws.push(shrink * reps as f64 * pc / (1.0 - pc));
    }
    let sw: f64 = ws.iter().sum();
    let xm = xs.iter().zip(&ws).map(|(x, w)| x * w).sum::<f64>() / sw;
    let ym = ys.iter().zip(&ws).map(|(y, w)| y * w).sum::<f64>() / sw;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for i in 0..xs.len() {
        let (dx, dy) = (xs[i] - xm, ys[i] - ym);
        sxx += ws[i] * dx * dx;
        sxy += ws[i] * dx * dy;
        syy += ws[i] * dy * dy;
    }
    if sxx <= 0.0 {
        return Err(Error::Degenerate("all x values equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let ssr: f64 = (0..xs.len())
        .map(|i| {
            let e = ys[i] - intercept - slope * xs[i];
            ws[i] * e * e
        })
        .sum();
    let r2 = if syy > 0.0 { 1.0 - ssr / syy } else { 1.0 };
    Ok(LogLinearFit { slope, intercept, r2, slope_se: libm::sqrt(1.0 / sxx) })
}

/// Kendall rank correlation with a two-sided p-value for "no trend".
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KendallResult {
    pub tau: f64,
    pub p: f64,
}

fn sign(v: f64) -> i64 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

/// Kendall's tau between `xs` and `ys`.
///
/// Without ties and for at most 12 points the p-value is exact, from the
/// permutation distribution; otherwise it uses the normal approximation
/// with a continuity correction.
pub fn kendall(xs: &[f64], ys: &[f64]) -> Result<KendallResult> {
    let n = xs.len();
    if n != ys.len() {
        return Err(Error::Parameter("kendall: length mismatch".into()));
    }
    if n < 3 {
        return Err(Error::InsufficientData { needed: 3, got: n });
    }
    let mut s = 0i64;
    let mut tx = 0i64;
    let mut ty = 0i64;
    for i in 0..n {
        for j in i + 1..n {
            let a = sign(xs[j] - xs[i]);
            let b = sign(ys[j] - ys[i]);
            s += a * b;
            tx += (a == 0) as i64;
            ty += (b == 0) as i64;
        }
    }
    let pairs = (n * (n - 1) / 2) as i64;
    let denom = libm::sqrt(((pairs - tx) * (pairs - ty)) as f64);
    let tau = if denom > 0.0 { s as f64 / denom } else { 0.0 };
    let p = if tx == 0 && ty == 0 && n <= 12 {
        // S = pairs - 2·inversions; inversions follow the Mahonian law.
        let counts = mahonian(n);
        let total: f64 = counts.iter().sum();
        let thresh = s.unsigned_abs() as i64;
        let tail: f64 = counts
            .iter()
            .enumerate()
            .filter(|(inv, _)| (pairs - 2 * *inv as i64).abs() >= thresh)
            .map(|(_, c)| c)
            .sum();
        tail / total
    } else {
        let nf = n as f64;
        let var = nf * (nf - 1.0) * (2.0 * nf + 5.0) / 18.0;
        if var <= 0.0 {
            1.0
        } else {
            let z = ((s.abs() - 1).max(0)) as f64 / libm::sqrt(var);
            2.0 * (1.0 - normal_cdf(z))
        }
    };
    Ok(KendallResult { tau, p: p.min(1.0) })
}

fn mahonian(n: usize) -> Vec<f64> {
    let mut row = alloc::vec![1.0f64];
    for k in 2..=n {
        let mut next = alloc::vec![0.0f64; row.len() + k - 1];
        for (i, &c) in row.iter().enumerate() {
            for j in 0..k {
                next[i + j] += c;
            }
        }
        row = next;
    }
    row
}

/// Two-proportion z statistic with pooled variance.
pub fn two_proportion_z(k1: u64, n1: u64, k2: u64, n2: u64) -> f64 {
    let (n1f, n2f) = (n1 as f64, n2 as f64);
    let pooled = (k1 + k2) as f64 / (n1f + n2f);
    let se = libm::sqrt(pooled * (1.0 - pooled) * (1.0 / n1f + 1.0 / n2f));
    let diff = k1 as f64 / n1f - k2 as f64 / n2f;
    if se > 0.0 {
        diff / se
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY.copysign(diff)
    }
}

/// Regularized upper incomplete gamma function `Q(a, x)`.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let ln_pre = -x + a * libm::log(x) - libm::lgamma(a);
    if x < a + 1.0 {
        let mut sum = 1.0 / a;
        let mut term = sum;
        let mut ap = a;
        for _ in 0..1000 {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * 1e-16 {
                break;
            }
        }
        1.0 - sum * libm::exp(ln_pre)
    } else {
        // Lentz continued fraction.
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..1000 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        libm::exp(ln_pre) * h
    }
}

/// Pearson chi-square test of independence on a contingency table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquare {
    pub statistic: f64,
    pub df: u64,
    pub p: f64,
}

/// Rows or columns with zero total are dropped before testing.
pub fn chi_square_independence(table: &[Vec<u64>]) -> Result<ChiSquare> {
    let cols = table.first().map_or(0, |r| r.len());
    if table.iter().any(|r| r.len() != cols) {
        return Err(Error::Parameter("ragged contingency table".into()));
    }
    let row_tot: Vec<f64> = table.iter().map(|r| r.iter().sum::<u64>() as f64).collect();
    let col_tot: Vec<f64> =
        (0..cols).map(|j| table.iter().map(|r| r[j]).sum::<u64>() as f64).collect();
    let total: f64 = row_tot.iter().sum();
    let live_r: Vec<usize> = (0..table.len()).filter(|&i| row_tot[i] > 0.0).collect();
    let live_c: Vec<usize> = (0..cols).filter(|&j| col_tot[j] > 0.0).collect();
    if live_r.len() < 2 || live_c.len() < 2 {
        return Err(Error::Degenerate("need at least a 2x2 table".into()));
    }
    let mut stat = 0.0;
    for &i in &live_r {
        for &j in &live_c {
            let e = row_tot[i] * col_tot[j] / total;
            let o = table[i][j] as f64;
            stat += (o - e) * (o - e) / e;
        }
    }
    let df = ((live_r.len() - 1) * (live_c.len() - 1)) as u64;
    Ok(ChiSquare { statistic: stat, df, p: gamma_q(df as f64 / 2.0, stat / 2.0) })
}

/// Lag-1 sample autocorrelation.
pub fn lag1_autocorrelation(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 3 {
        return 0.0;
    }
    let m = mean(xs);
    let den: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    if den == 0.0 {
        return 0.0;
    }
    let num: f64 = xs.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum();
    num / den
}
