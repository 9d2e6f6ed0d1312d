//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits non-zero if any criterion fails.

#[path = "../../core/tests/support/enumerate.rs"]
mod enumerate;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use ips_lab::config::{Experiment, ExperimentConfig};
use ips_lab::output::{Cell, ExperimentResult};
use ips_lab::run_experiment;

/// Sub-checks of one criterion: what was checked and whether it held.
#[derive(Default)]
struct Checks(Vec<(bool, String)>);

impl Checks {
    fn check(&mut self, ok: bool, what: impl Into<String>) {
        self.0.push((ok, what.into()));
    }

    fn flags(&mut self, r: &ExperimentResult, names: &[&str]) {
        for name in names {
            let ok = r.flag(name) == Some(true);
            self.check(ok, format!("{}:{name}", r.experiment));
        }
    }
}

fn workers() -> String {
    let n = std::thread::available_parallelism().map_or(1, |n| n.get());
    format!("workers={n}")
}

fn run(e: Experiment, overrides: &[&str]) -> ExperimentResult {
    let w = workers();
    let mut all: Vec<&str> = vec![&w];
    all.extend_from_slice(overrides);
    let config = ExperimentConfig::with(e, &all).unwrap_or_else(|err| panic!("{e}: {err}"));
    run_experiment(&config).unwrap_or_else(|err| panic!("{e}: {err}"))
}

fn value(r: &ExperimentResult, name: &str) -> f64 {
    r.estimate(name).unwrap_or_else(|| panic!("{}: no estimate `{name}`", r.experiment)).value
}

fn se(r: &ExperimentResult, name: &str) -> f64 {
    r.estimate(name).unwrap_or_else(|| panic!("{}: no estimate `{name}`", r.experiment)).se
}

/// `P(both infected at t)` for the two-site chain with first-infection rate
/// `lambda`, no reinfection and unit recovery, by RK4 on the forward
/// equations over the nine joint states.
fn two_site_forward(lambda: f64, t: f64, both_start: bool) -> f64 {
    // State of a site: 0 fresh, 1 recovered, 2 infected; joint index 3a + b.
    let rates = |s: usize| -> Vec<(usize, f64)> {
        let (a, b) = (s / 3, s % 3);
        let mut out = Vec::new();
        if a == 2 {
            out.push((3 + b, 1.0));
            if b == 0 {
                out.push((3 * a + 2, lambda));
            }
        }
        if b == 2 {
            out.push((3 * a + 1, 1.0));
            if a == 0 {
                out.push((6 + b, lambda));
            }
        }
        out
    };
    let deriv = |p: &[f64; 9]| {
        let mut d = [0.0; 9];
        for s in 0..9 {
            for (to, r) in rates(s) {
                d[s] -= r * p[s];
                d[to] += r * p[s];
            }
        }
        d
    };
    let mut p = [0.0; 9];
    p[if both_start { 8 } else { 6 }] = 1.0;
    let steps = 20_000;
    let h = t / steps as f64;
    let axpy = |p: &[f64; 9], k: &[f64; 9], c: f64| {
        let mut q = *p;
        for i in 0..9 {
            q[i] += c * k[i];
        }
        q
    };
    for _ in 0..steps {
        let k1 = deriv(&p);
        let k2 = deriv(&axpy(&p, &k1, h / 2.0));
        let k3 = deriv(&axpy(&p, &k2, h / 2.0));
        let k4 = deriv(&axpy(&p, &k3, h));
        for i in 0..9 {
            p[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    p[8]
}

fn c1_two_site(c: &mut Checks) -> String {
    let start = Instant::now();
    let r = run(Experiment::TwoSite, &["lambda=2", "t=1", "reps=100000"]);
    let secs = start.elapsed();
    let oracle = two_site_forward(2.0, 1.0, false);
    c.check((value(&r, "exact_one") - oracle).abs() < 1e-9, "closed form equals forward-equation value");
    c.check((value(&r, "mc_one") - oracle).abs() <= 3.0 * se(&r, "mc_one"), "mc within 3 se of forward-equation value");
    c.flags(&r, &["closed_form"]);
    c.check(secs < Duration::from_secs(30), "runtime < 30 s");
    format!("mc {:.5} ± {:.5} vs exact {:.6}, {:.1?}", value(&r, "mc_one"), se(&r, "mc_one"), oracle, secs)
}

fn c2_witness(c: &mut Checks) -> String {
    let r = run(Experiment::TwoSite, &["lambda=2", "t=1", "reps=100000"]);
    let e2 = two_site_forward(2.0, 1.0, true);
    c.check((e2 - (-2.0f64).exp()).abs() < 1e-9, "forward equations give e^-2 from both infected");
    c.check(value(&r, "exact_one") > e2, "exact one-start value exceeds e^-2");
    c.check(1.0 > 2.0f64.ln() / (2.0 - 1.0), "t = 1 exceeds log λ / (λ - 1)");
    c.flags(&r, &["witness_exact_above", "witness_mc_matches", "witness_mc_below", "witness_time"]);
    format!("mc both {:.5} ± {:.5} vs e^-2 {:.6} < {:.6}", value(&r, "mc_both"), se(&r, "mc_both"), e2, value(&r, "exact_one"))
}

fn violations_row(r: &ExperimentResult, check: &str) -> Option<(i64, i64)> {
    let t = r.table("checks")?;
    let (name, reps, viol) = (t.column("check")?, t.column("replicas")?, t.column("violations")?);
    let row = t.rows.iter().find(|row| row[name] == Cell::Text(check.to_string()))?;
    Some((row[reps].as_f64()? as i64, row[viol].as_f64()? as i64))
}

fn c3_identities(c: &mut Checks, r: &ExperimentResult, secs: Duration) -> String {
    for name in ["rightmost_identity", "sandwich", "initial_order", "restart_domination"] {
        let row = violations_row(r, name);
        c.check(row == Some((1000, 0)), format!("{name}: 1000 replicas, 0 violations (got {row:?})"));
    }
    c.check(secs < Duration::from_secs(300), "runtime < 5 min");
    format!("four identities clean over 1000 replicas, {secs:.1?}")
}

fn c4_ordered(c: &mut Checks, r: &ExperimentResult) -> String {
    let row = violations_row(r, "ordered_coupling");
    c.check(row == Some((1000, 0)), format!("ordered coupling: 1000 runs, 0 violations (got {row:?})"));
    c.flags(r, &["marginal_matches"]);
    let n = r.estimate("marginal_direct").map_or(0, |e| e.n);
    c.check(n >= 100_000, "marginal uses 1e5 replicas");
    format!(
        "coupled {:.4} ± {:.4} vs direct {:.4} ± {:.4}",
        value(r, "marginal_coupled"),
        se(r, "marginal_coupled"),
        value(r, "marginal_direct"),
        se(r, "marginal_direct")
    )
}

fn c5_duality(c: &mut Checks) -> String {
    let r = run(Experiment::Duality, &["mu=1", "t=3", "a=0", "b=-2,-1,0,1,2", "reps=100000"]);
    let (a, b) = (r.estimate("p_a_hits_b").unwrap(), r.estimate("p_b_hits_a").unwrap());
    let z = (a.value - b.value) / (a.se * a.se + b.se * b.se).sqrt();
    c.check(z.abs() < 3.0, format!("|z| = {:.2} < 3", z.abs()));
    c.flags(&r, &["duality"]);
    format!("{:.4} vs {:.4}, z = {z:.2}", a.value, b.value)
}

fn c6_subcritical(c: &mut Checks) -> String {
    let sub = ["lambda=0.25", "mu=0.25", "reps=100000"];
    let range = run(Experiment::SubcriticalRange, &[&sub[..], &["n_max=10"]].concat());
    c.check(value(&range, "slope") < 0.0 && value(&range, "r2") > 0.95, "range fit slope < 0, r2 > 0.95");
    c.check(value(&range, "p_n_max") < 0.01, "p_10 < 0.01");
    c.flags(&range, &["decays", "log_linear", "tail_small"]);
    let life = run(Experiment::SubcriticalLifetime, &sub);
    c.check(value(&life, "slope") < 0.0 && value(&life, "r2") > 0.9, "lifetime fit slope < 0, r2 > 0.9");
    c.flags(&life, &["decays", "log_linear"]);
    let cont = run(Experiment::Containment, &[&sub[..], &["n_grid=1,2,4,8"]].concat());
    let t = cont.table("levels").expect("levels table");
    let (p, s) = (t.column("p").expect("p column"), t.column("se").expect("se column"));
    let mut lows = Vec::new();
    for row in &t.rows {
        let low = row[p].as_f64().unwrap() - 2.576 * row[s].as_f64().unwrap();
        lows.push(low);
        c.check(low > 0.0, format!("containment 99% lower bound {low:.4} > 0"));
    }
    c.check(lows.len() == 4, "four containment levels");
    c.flags(&cont, &["bounded_below", "no_downward_trend"]);
    format!(
        "range slope {:.3} r2 {:.3} p10 {:.5}; lifetime slope {:.3} r2 {:.3}; containment min {:.4}",
        value(&range, "slope"),
        value(&range, "r2"),
        value(&range, "p_n_max"),
        value(&life, "slope"),
        value(&life, "r2"),
        value(&cont, "min")
    )
}

fn c7_regeneration(c: &mut Checks, r: &ExperimentResult, secs: Duration) -> String {
    let records = value(r, "records");
    c.check(records >= 200.0, format!("{records} records >= 200"));
    c.check(value(r, "halves_x_p") > 0.01 && value(r, "halves_psi_p") > 0.01, "halves KS p > 0.01 on X and Ψ");
    let (alpha, direct) = (value(r, "alpha"), value(r, "direct_speed"));
    let rel = (alpha - direct).abs() / direct;
    c.check(rel < 0.05, format!("alpha relative error {rel:.4} < 0.05"));
    c.check(value(r, "sigma2") > 0.0, "sigma2 > 0");
    c.check(value(r, "clt_ks_p") > 0.01, "CLT KS p > 0.01");
    c.flags(r, &["alpha_agrees", "halves_x", "halves_psi", "sigma2_positive", "clt_normal"]);
    format!(
        "{records} records, alpha {alpha:.4} vs direct {direct:.4} ({:.1}%), sigma2 {:.3}, CLT p {:.3}, lln-clt {secs:.1?}",
        100.0 * rel,
        value(r, "sigma2"),
        value(r, "clt_ks_p")
    )
}

fn c8_growth(c: &mut Checks, lln: &ExperimentResult) -> String {
    let predicted = 2.0 * value(lln, "alpha") * value(lln, "theta");
    c.check((value(lln, "growth_predicted") - predicted).abs() < 1e-12, "prediction is 2 alpha theta");
    let rel = (value(lln, "growth_observed") - predicted).abs() / predicted;
    c.check(rel < 0.10, format!("growth relative error {rel:.4} < 0.10"));
    c.flags(lln, &["growth_lln"]);
    let cc = run(Experiment::CompleteConv, &["lambda=1", "mu=2", "t=40", "f=-1,0,1", "reps=4000"]);
    let (beta, phi) = (value(&cc, "beta"), value(&cc, "phi"));
    c.check((value(&cc, "mixture") - ((1.0 - beta) + beta * phi)).abs() < 1e-12, "mixture is (1 - beta) + beta phi");
    c.check(value(&cc, "z").abs() <= 3.0, format!("complete convergence |z| = {:.2} <= 3", value(&cc, "z").abs()));
    c.flags(&cc, &["complete_convergence"]);
    format!(
        "|I_T|/T {:.4} vs 2αθ {predicted:.4} ({:.1}%); void {:.4} vs mixture {:.4}",
        value(lln, "growth_observed"),
        100.0 * rel,
        value(&cc, "void"),
        value(&cc, "mixture")
    )
}

fn c9_speeds(c: &mut Checks) -> String {
    let base = ["lambda=1", "mu=2", "t=50", "reps=500"];
    let fp = run(Experiment::Fracpunch, &base);
    let (lambda, mu) = (1.0, 2.0);
    let want = (mu - lambda) / lambda;
    let ratio = value(&fp, "ratio");
    c.check((ratio - want).abs() <= 0.10 * want, format!("ratio {ratio:.4} within 10% of {want}"));
    c.flags(&fp, &["ratio", "counts_add_up"]);
    let sc = run(Experiment::Speedcomp, &base);
    c.check(value(&sc, "gap_minus_f") >= -3.0 * se(&sc, "gap_minus_f"), "mean(R - r̄) >= mean(F) - 3 se");
    let bound = 0.5 * value(&sc, "beta_speed");
    c.check(value(&sc, "alpha") <= bound + 3.0 * se(&sc, "slack"), "alpha <= (λ/μ) beta_speed + 3 se");
    c.flags(&sc, &["gap_bound", "speed_inequality"]);
    let sa = run(Experiment::Subadd, &["lambda=1", "mu=2", "reps=1000"]);
    let row = violations_row(&sa, "subadditivity");
    c.check(row == Some((1000, 0)), format!("subadditivity: 1000 replicas, 0 violations (got {row:?})"));
    format!(
        "ratio {ratio:.4}; gap - F {:.3} ± {:.3}; alpha {:.4} vs bound {bound:.4}",
        value(&sc, "gap_minus_f"),
        se(&sc, "gap_minus_f"),
        value(&sc, "alpha")
    )
}

fn c10_cse(c: &mut Checks) -> String {
    let mut out = Vec::new();
    for (m, extra) in [("m=1", &["mu=2"][..]), ("m=2", &["mu=1.2", "reps=3"][..])] {
        let r = run(Experiment::Cse, &[&[m, "plateau_s=40", "s_grid=5,10,20,40"][..], extra].concat());
        let low = value(&r, "plateau") - 2.576 * se(&r, "plateau");
        c.check(low > 0.0, format!("{m}: plateau 99% lower bound {low:.4} > 0"));
        let (px, ppsi) = (value(&r, "halves_x_p"), value(&r, "halves_psi_p"));
        c.check(px > 0.01 && ppsi > 0.01, format!("{m}: halves p {px:.3}, {ppsi:.3} > 0.01"));
        c.flags(&r, &["plateau_positive", "halves_x", "halves_psi"]);
        out.push(format!("{m}: plateau {:.3}, {} records", value(&r, "plateau"), value(&r, "records")));
    }
    out.join("; ")
}

fn c11_percolation(c: &mut Checks) -> String {
    let ex = enumerate::exhaustive(6, 6);
    c.check(ex.mismatches == 0, format!("{} mismatches over {} cases", ex.mismatches, ex.cases));
    c.check(ex.fields > 1 << 15, "every field up to 6 x 6 enumerated");
    let g = run(Experiment::PercolationGrowth, &["p=0.9", "n=50", "reps=1000"]);
    c.check(value(&g, "surviving") >= 1000.0, "at least 1000 surviving fields");
    c.check(value(&g, "restriction_violations") == 0.0, "restriction identity: 0 violations");
    c.flags(&g, &["restriction"]);
    let d = run(Experiment::PercolationDensity, &["generator=independent:0.95", "rho=0.8", "beta=0.5", "n_grid=10,20,40,60", "overlap_q=0.9"]);
    c.check(value(&d, "tail_last") < 0.01, format!("tail at n = 60 is {:.4} < 0.01", value(&d, "tail_last")));
    let want = 1.0 - (1.0f64 - 0.9).powi(2);
    let dens = d.estimate("overlap_density").unwrap();
    c.check((dens.value - want).abs() <= 3.0 * dens.se, format!("overlap density {:.5} within 3 se of {want}", dens.value));
    c.flags(&d, &["tail_small", "overlap_density"]);
    format!(
        "{} fields, {} cases, 0 mismatches; {} surviving; tail {:.4}; overlap {:.5} ± {:.5}",
        ex.fields,
        ex.cases,
        value(&g, "surviving"),
        value(&d, "tail_last"),
        dens.value,
        dens.se
    )
}

/// Small configurations that still exercise every code path.
fn small(e: Experiment) -> &'static [&'static str] {
    match e {
        Experiment::TwoSite => &["reps=2000"],
        Experiment::CoupleCheck => &["reps=30", "t=10", "ordered_reps=100", "marginal_reps=2000"],
        Experiment::Breakpoints => &["reps=20", "t=100", "beta_reps=200", "min_records=10"],
        Experiment::LlnClt => &[
            "reps=30",
            "t=100",
            "direct_t=100",
            "direct_reps=60",
            "theta_t=20",
            "theta_reps=20",
            "growth_t=50",
            "growth_reps=40",
        ],
        Experiment::CompleteConv => &["reps=300", "t=10"],
        Experiment::SubcriticalRange | Experiment::SubcriticalLifetime => &["reps=5000"],
        Experiment::Containment => &["reps=2000"],
        Experiment::Speedcomp | Experiment::Fracpunch => &["t=20", "reps=60"],
        Experiment::Subadd => &["s=10", "u=30", "reps=60"],
        Experiment::Cse => &["reps=2", "t=80", "curve_reps=40"],
        Experiment::PercolationDensity => &["reps=200", "overlap_reps=40"],
        Experiment::PercolationGrowth => &["reps=50", "growth_reps=200"],
        Experiment::Duality => &["reps=5000"],
    }
}

fn c12_reproducible(c: &mut Checks) -> String {
    let mut files = 0;
    for e in Experiment::ALL {
        let outputs: Vec<_> = ["workers=1", "workers=1", "workers=3"]
            .iter()
            .map(|w| {
                let config = ExperimentConfig::with(e, &[&[*w][..], small(e)].concat()).unwrap_or_else(|err| panic!("{e}: {err}"));
                run_experiment(&config).unwrap_or_else(|err| panic!("{e}: {err}")).files()
            })
            .collect();
        c.check(outputs[0] == outputs[1], format!("{e}: rerun identical"));
        c.check(outputs[0] == outputs[2], format!("{e}: 1 and 3 workers identical"));
        files += outputs[0].len();
    }
    format!("{} experiments, {files} files, identical across reruns and worker counts", Experiment::ALL.len())
}

fn main() -> ExitCode {
    let mut failed = 0;
    let mut report = |n: usize, title: &str, f: &mut dyn FnMut(&mut Checks) -> String| {
        let start = Instant::now();
        let mut checks = Checks::default();
        let outcome = catch_unwind(AssertUnwindSafe(|| f(&mut checks)));
        let secs = start.elapsed();
        let (ok, detail) = match outcome {
            Ok(detail) if checks.0.iter().all(|c| c.0) => (true, detail),
            Ok(_) => {
                let bad: Vec<&str> = checks.0.iter().filter(|c| !c.0).map(|c| c.1.as_str()).collect();
                (false, format!("failed: {}", bad.join("; ")))
            }
            Err(p) => {
                let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
                (false, format!("panicked: {}", msg.unwrap_or_default()))
            }
        };
        failed += (!ok) as usize;
        println!("criterion {n:>2} {} {title}: {detail} [{secs:.1?}]", if ok { "PASS" } else { "FAIL" });
    };

    report(1, "two-site closed form", &mut c1_two_site);
    report(2, "order-coupling counterexample", &mut c2_witness);

    let start = Instant::now();
    let couple = catch_unwind(|| {
        run(
            Experiment::CoupleCheck,
            &[
                "lambda=1",
                "mu=2",
                "t=20",
                "reps=1000",
                "lower_lambda=0.5",
                "lower_mu=1",
                "upper_lambda=1",
                "upper_mu=2",
                "ordered_t=1",
                "ordered_reps=1000",
                "marginal_reps=100000",
            ],
        )
    });
    let couple_secs = start.elapsed();
    report(3, "pathwise coupling identities", &mut |c| c3_identities(c, couple.as_ref().expect("couple-check ran"), couple_secs));
    report(4, "ordered coupling", &mut |c| c4_ordered(c, couple.as_ref().expect("couple-check ran")));

    report(5, "duality", &mut c5_duality);
    report(6, "subcritical decay", &mut c6_subcritical);

    let start = Instant::now();
    let lln = catch_unwind(|| run(Experiment::LlnClt, &["lambda=1", "mu=2", "t=200", "s=30"]));
    let lln_secs = start.elapsed();
    report(7, "regeneration", &mut |c| c7_regeneration(c, lln.as_ref().expect("lln-clt ran"), lln_secs));
    report(8, "growth and complete convergence", &mut |c| c8_growth(c, lln.as_ref().expect("lln-clt ran")));

    report(9, "speed comparison", &mut c9_speeds);
    report(10, "range-M regeneration", &mut c10_cse);
    report(11, "oriented percolation", &mut c11_percolation);
    report(12, "reproducibility", &mut c12_reproducible);

    if failed == 0 {
        println!("acceptance: all 12 criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} of 12 criteria fail");
        ExitCode::FAILURE
    }
}
