//! The fifteen experiments: their keys, their tables and how they run.
//!
//! Sub-computations of one experiment draw from independent seed streams
//! `derive_key(master, [k])`; replica `i` of a stream gets
//! `replica_seed(stream, i)`.

use ips_core::coupling::{
    assert_restart_domination, assert_rightmost_identity, check_duality, check_order, check_sandwich, co_evolve_ordered,
    ordered_marginal_check, two_site_exact, two_site_monte_carlo, TwoSiteStart, ViolationReport,
};
use ips_core::graphical::Site;
use ips_core::percolation::{density_experiment, field_density, restriction_experiment, rightmost_growth, Generator};
use ips_core::processes::{Configuration, Evolve, ProcessParams};
use ips_core::regeneration::{
    check_complete_convergence, clt_diagnostic, collect_break_points, complete, cse_regeneration, direct_speed,
    estimate_alpha, estimate_beta, estimate_cse_probability, estimate_sigma2, estimate_theta, growth_lln_check,
    halves_report, mback_tail_fit, BreakPointSample, HalvesReport, RegenRecord,
};
use ips_core::replicas::run_seeded;
use ips_core::rng::derive_key;
use ips_core::speedcomp::{speed_inequality, subadditivity_check, verify_fracpunch, verify_gap};
use ips_core::stats::{Estimate, Z99};
use ips_core::subcritical::{containment_probability, lifetime_decay, range_decay, DecayFit};

use crate::config::{Experiment, ExperimentConfig, KeySpec, Kind, Params};
use crate::output::{Cell, ExperimentResult, Provenance, Report, Status, Table};
use crate::pool::Pool;
use crate::LabError;

/// Tolerance in standard errors for every "agrees with" flag.
pub const Z_TOL: f64 = 3.0;
/// Significance level for every goodness-of-fit flag.
pub const P_MIN: f64 = 0.01;

const RATE: Kind = Kind::Float { min: 0.0, max: 1e3 };
const TIME: Kind = Kind::Float { min: 1e-9, max: 1e5 };
const REPS: Kind = Kind::Count { min: 0, max: 100_000_000 };
const SITES: Kind = Kind::Ints { min: -1_000_000, max: 1_000_000 };

macro_rules! key {
    ($name:expr, $kind:expr, $default:expr, $doc:expr) => {
        KeySpec { name: $name, kind: $kind, default: $default, doc: $doc }
    };
}

const LAMBDA: KeySpec = key!("lambda", RATE, "1", "first-infection rate λ");
const MU: KeySpec = key!("mu", RATE, "2", "reinfection rate μ");

/// Columns of one output table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableSpec {
    pub name: &'static str,
    pub columns: &'static [&'static str],
    pub doc: &'static str,
}

macro_rules! table {
    ($name:expr, $columns:expr, $doc:expr) => {
        TableSpec { name: $name, columns: $columns, doc: $doc }
    };
}

const RECORDS: TableSpec =
    table!("records", &["replica", "index", "x", "psi", "mback"], "complete regeneration increments in replica order");
const CHECKS: TableSpec = table!("checks", &["check", "replicas", "total_checks", "violations"], "pathwise assertion counts");

pub fn about(e: Experiment) -> &'static str {
    match e {
        Experiment::TwoSite => "two-site (λ,0) process: closed form and the ordered-coupling counterexample",
        Experiment::CoupleCheck => "pathwise identities on shared constructions and the ordered rate-table coupling",
        Experiment::Breakpoints => "break-point records: exchangeability of halves, running maxima, backtrack tail",
        Experiment::LlnClt => "edge speed from break points against r_T/T, σ², block CLT, and |I_T|/T against 2αθ",
        Experiment::CompleteConv => "P(I_t ∩ F = ∅) against (1 − β) + β·P(ξ^F_t = ∅)",
        Experiment::SubcriticalRange => "decay of P(the epidemic reaches distance n)",
        Experiment::SubcriticalLifetime => "decay of P(alive at t)",
        Experiment::Containment => "P(an epidemic from [−N, N] never leaves it)",
        Experiment::Speedcomp => "E(R_T − r̄_T) ≥ E(F_T) and α ≤ (λ/μ)β",
        Experiment::Fracpunch => "mean δ-wins over mean λ-wins against (μ − λ)/λ",
        Experiment::Subadd => "subadditivity of the half-line maximum",
        Experiment::Cse => "range-M regeneration: survival of single-site control and exchangeable increments",
        Experiment::PercolationDensity => "low-density tail of the percolation cluster and generator densities",
        Experiment::PercolationGrowth => "restriction identity and the lower tail of the rightmost site",
        Experiment::Duality => "P(ξ^A_t ∩ B ≠ ∅) against P(ξ^B_t ∩ A ≠ ∅)",
    }
}

pub fn keys(e: Experiment) -> &'static [KeySpec] {
    match e {
        Experiment::TwoSite => &[
            key!("lambda", RATE, "2", "first-infection rate λ"),
            key!("t", TIME, "1", "time"),
            key!("reps", REPS, "100000", "replicas per start"),
        ],
        Experiment::CoupleCheck => &[
            LAMBDA,
            MU,
            key!("t", TIME, "20", "horizon of the shared-construction checks"),
            key!("reps", REPS, "1000", "shared-construction replicas"),
            key!("lower_lambda", RATE, "0.5", "λ of the lower ordered process"),
            key!("lower_mu", RATE, "1", "μ of the lower ordered process"),
            key!("upper_lambda", RATE, "1", "λ′ of the upper ordered process"),
            key!("upper_mu", RATE, "2", "μ′ of the upper ordered process"),
            key!("ordered_t", TIME, "1", "horizon of the ordered coupling"),
            key!("ordered_reps", REPS, "1000", "ordered-coupling runs checked for order"),
            key!("marginal_reps", REPS, "100000", "replicas per side of the marginal comparison"),
        ],
        Experiment::Breakpoints => &[
            LAMBDA,
            MU,
            key!("t", TIME, "200", "horizon T"),
            key!("s", TIME, "30", "survival look-ahead S"),
            key!("reps", REPS, "400", "replicas"),
            key!("min_records", Kind::Count { min: 1, max: u64::MAX }, "200", "records needed"),
            key!("beta_reps", REPS, "4000", "replicas for β̂(S) and β̂(2S)"),
        ],
        Experiment::LlnClt => &[
            LAMBDA,
            MU,
            key!("t", TIME, "200", "horizon T of the break-point search"),
            key!("s", TIME, "30", "survival look-ahead S"),
            key!("reps", REPS, "400", "break-point replicas"),
            key!("direct_t", TIME, "400", "horizon of the direct r_T/T estimator"),
            key!("direct_reps", REPS, "800", "replicas of the direct estimator"),
            key!("theta_window", Kind::Count { min: 2, max: 100_000 }, "40", "sites averaged for θ̂"),
            key!("theta_t", TIME, "50", "time at which θ̂ is read"),
            key!("theta_reps", REPS, "400", "replicas for θ̂"),
            key!("growth_t", TIME, "200", "time T of |I_T|/T"),
            key!("growth_reps", REPS, "1000", "replicas for |I_T|/T"),
        ],
        Experiment::CompleteConv => &[
            LAMBDA,
            MU,
            key!("t", TIME, "40", "time"),
            key!("f", SITES, "-1,0,1", "the finite set F"),
            key!("reps", REPS, "4000", "replicas per group"),
        ],
        Experiment::SubcriticalRange => &[
            key!("lambda", RATE, "0.25", "first-infection rate λ"),
            key!("mu", RATE, "0.25", "reinfection rate μ"),
            key!("n_max", Kind::Count { min: 3, max: 10_000 }, "10", "largest distance"),
            key!("reps", REPS, "100000", "replicas"),
        ],
        Experiment::SubcriticalLifetime => &[
            key!("lambda", RATE, "0.25", "first-infection rate λ"),
            key!("mu", RATE, "0.25", "reinfection rate μ"),
            key!("t_grid", Kind::Floats { min: 0.0, max: 1e5 }, "0,1,2,3,4,5,6,7,8,9,10,11,12", "times; the fit uses the later half"),
            key!("reps", REPS, "100000", "replicas"),
        ],
        Experiment::Containment => &[
            key!("lambda", RATE, "0.25", "first-infection rate λ"),
            key!("mu", RATE, "0.25", "reinfection rate μ"),
            key!("n_grid", Kind::Ints { min: 0, max: 100_000 }, "1,2,4,8", "half-widths N"),
            key!("s", TIME, "60", "horizon S by which the epidemic must be dead"),
            key!("reps", REPS, "100000", "replicas per N"),
        ],
        Experiment::Speedcomp => &[LAMBDA, MU, key!("t", TIME, "50", "horizon T"), key!("reps", REPS, "500", "replicas per check")],
        Experiment::Fracpunch => &[LAMBDA, MU, key!("t", TIME, "50", "horizon T"), key!("reps", REPS, "500", "replicas")],
        Experiment::Subadd => &[
            LAMBDA,
            MU,
            key!("s", Kind::Float { min: 0.0, max: 1e5 }, "20", "split time s"),
            key!("u", TIME, "50", "end time u"),
            key!("reps", REPS, "1000", "replicas"),
        ],
        Experiment::Cse => &[
            key!("m", Kind::Count { min: 1, max: 16 }, "1", "interaction range M"),
            key!("mu", RATE, "2", "contact rate μ (supercritical)"),
            key!("t", TIME, "200", "horizon of each regeneration run"),
            key!("s", TIME, "20", "look-ahead S of a candidate"),
            key!("reps", REPS, "6", "regeneration runs"),
            key!("s_grid", Kind::Floats { min: 1e-9, max: 1e5 }, "5,10,20,40", "times S of the p̂(S) curve"),
            key!("plateau_s", TIME, "40", "S at which p̂(S) must be positive; must be in s_grid"),
            key!("curve_reps", REPS, "200", "replicas of the p̂(S) curve"),
        ],
        Experiment::PercolationDensity => &[
            key!("generator", Kind::Generator, "independent:0.95", "site law of the cluster fields"),
            key!("rho", Kind::Float { min: 0.0, max: 1.0 }, "0.8", "density threshold ρ"),
            key!("beta", Kind::Float { min: 0.0, max: 1.0 }, "0.5", "window fraction β"),
            key!("n_grid", Kind::Ints { min: 1, max: 100_000 }, "10,20,40,60", "rows n"),
            key!("reps", REPS, "4000", "fields per n"),
            key!("overlap_q", Kind::Float { min: 0.0, max: 1.0 }, "0.9", "base density q of the overlap generator"),
            key!("overlap_n", Kind::Count { min: 1, max: 100_000 }, "20", "rows per overlap field"),
            key!("overlap_half_width", Kind::Count { min: 1, max: 100_000 }, "40", "half-width of each overlap field"),
            key!("overlap_reps", REPS, "400", "overlap fields"),
        ],
        Experiment::PercolationGrowth => &[
            key!("p", Kind::Float { min: 0.0, max: 1.0 }, "0.9", "open-site probability"),
            key!("n", Kind::Count { min: 1, max: 100_000 }, "50", "rows of each restriction field"),
            key!("reps", REPS, "1000", "surviving fields checked for restriction"),
            key!("a", Kind::Float { min: 0.0, max: 1.0 }, "0.5", "slope a of the event R_n < a n"),
            key!("n_grid", Kind::Ints { min: 1, max: 100_000 }, "10,20,30,40", "rows n of the growth curve"),
            key!("growth_reps", REPS, "4000", "fields per n of the growth curve"),
        ],
        Experiment::Duality => &[
            key!("mu", RATE, "1", "contact rate μ"),
            key!("t", TIME, "3", "time"),
            key!("a", SITES, "0", "the set A"),
            key!("b", SITES, "-2,-1,0,1,2", "the set B"),
            key!("reps", REPS, "100000", "replicas per side"),
        ],
    }
}

pub fn tables(e: Experiment) -> &'static [TableSpec] {
    match e {
        Experiment::TwoSite => &[table!("two_site", &["start", "estimate", "se", "reference"], "P(both infected at t) by start")],
        Experiment::CoupleCheck => &[
            CHECKS,
            table!("marginal", &["source", "estimate", "se"], "single-site occupancy of the lower process"),
        ],
        Experiment::Breakpoints => &[RECORDS],
        Experiment::LlnClt => &[
            table!("speeds", &["estimator", "estimate", "se", "n"], "edge-speed estimates"),
            table!("blocks", &["block", "z"], "standardized block sums"),
        ],
        Experiment::CompleteConv => &[table!("void", &["quantity", "estimate", "se"], "the two sides and their parts")],
        Experiment::SubcriticalRange => &[table!("levels", &["n", "p", "se"], "P(reach ±n)")],
        Experiment::SubcriticalLifetime => &[table!("levels", &["t", "p", "se", "fitted"], "P(alive at t); fitted = 1 if used in the fit")],
        Experiment::Containment => &[table!("levels", &["n", "p", "se", "alive_at_s"], "containment probability by N")],
        Experiment::Speedcomp => &[table!("speeds", &["quantity", "estimate", "se"], "gap and speed comparisons")],
        Experiment::Fracpunch => &[table!("counts", &["quantity", "estimate", "se"], "mean competition counts")],
        Experiment::Subadd => &[CHECKS],
        Experiment::Cse => &[RECORDS, table!("curve", &["s", "p", "se"], "p̂(S)")],
        Experiment::PercolationDensity => &[
            table!("tail", &["n", "p", "se"], "P(sparse row n and survival)"),
            table!("overlap", &["q", "density", "se", "expected"], "open-site density of the overlap generator"),
        ],
        Experiment::PercolationGrowth => &[
            table!("restriction", &["fields", "surviving", "total_checks", "violations"], "restriction identity counts"),
            table!("growth", &["n", "p", "se", "surviving"], "P(R_n < a n | survival)"),
        ],
        Experiment::Duality => &[table!("sides", &["side", "estimate", "se"], "the two hitting probabilities")],
    }
}

fn new_table(e: Experiment, name: &str) -> Table {
    let s = tables(e).iter().find(|t| t.name == name).unwrap_or_else(|| panic!("{e} declares no table `{name}`"));
    Table::new(s.name, s.columns)
}

fn usage(key: &str, msg: &str) -> LabError {
    LabError::Usage { key: key.into(), msg: msg.into() }
}

fn need_mu_ge_lambda(p: &Params) -> Result<(), LabError> {
    if p.f64("lambda") > p.f64("mu") {
        return Err(usage("lambda", "these constructions need λ ≤ μ"));
    }
    Ok(())
}

/// Checks that involve more than one key.
pub fn validate(e: Experiment, p: &Params) -> Result<(), LabError> {
    match e {
        Experiment::CoupleCheck => {
            need_mu_ge_lambda(p)?;
            let (l, m, l2, m2) = (p.f64("lower_lambda"), p.f64("lower_mu"), p.f64("upper_lambda"), p.f64("upper_mu"));
            if !(l <= l2 && m <= m2 && m2 >= l) {
                return Err(usage("lower_lambda", "ordered coupling needs λ ≤ λ′, μ ≤ μ′ and μ′ ≥ λ"));
            }
        }
        Experiment::Breakpoints | Experiment::LlnClt => {
            need_mu_ge_lambda(p)?;
            if p.f64("s") >= p.f64("t") {
                return Err(usage("s", "S must be below T"));
            }
        }
        Experiment::Speedcomp | Experiment::Fracpunch => need_mu_ge_lambda(p)?,
        Experiment::Subadd => {
            need_mu_ge_lambda(p)?;
            if p.f64("s") > p.f64("u") {
                return Err(usage("s", "need s ≤ u"));
            }
        }
        Experiment::SubcriticalLifetime => {
            let g = p.floats("t_grid");
            if g.len() < 6 || g.windows(2).any(|w| w[1] <= w[0]) {
                return Err(usage("t_grid", "need at least 6 increasing times"));
            }
        }
        Experiment::Containment => {
            if p.ints("n_grid").len() < 3 {
                return Err(usage("n_grid", "need at least 3 values"));
            }
        }
        Experiment::Cse => {
            if p.f64("s") + 1.0 > p.f64("t") {
                return Err(usage("s", "need S + 1 ≤ T"));
            }
            if !p.floats("s_grid").contains(&p.f64("plateau_s")) {
                return Err(usage("plateau_s", "must be one of s_grid"));
            }
        }
        Experiment::PercolationDensity if !p.ints("n_grid").windows(2).all(|w| w[0] < w[1]) => {
            return Err(usage("n_grid", "must be increasing"));
        }
        _ => {}
    }
    Ok(())
}

struct Ctx<'a> {
    pool: &'a Pool,
    p: &'a Params,
    seed: u64,
    e: Experiment,
}

impl Ctx<'_> {
    fn stream(&self, k: u64) -> u64 {
        derive_key(self.seed, &[k])
    }

    fn process(&self) -> Result<ProcessParams, LabError> {
        Ok(ProcessParams::new(self.p.f64("lambda"), self.p.f64("mu"))?)
    }

    fn table(&self, name: &str) -> Table {
        new_table(self.e, name)
    }
}

/// Runs `config` on `pool`. A zero replica count, or an estimator that runs
/// out of data, gives empty tables and the status "insufficient data".
pub fn run(config: &ExperimentConfig, pool: &Pool) -> Result<ExperimentResult, LabError> {
    let e = config.experiment;
    let ctx = Ctx { pool, p: &config.params, seed: config.master_seed, e };
    let mut report = Report::default();
    let outcome = if config.params.u64("reps") == 0 {
        Err(ips_core::Error::InsufficientData { needed: 1, got: 0 }.into())
    } else {
        body(&ctx, &mut report)
    };
    let status = match outcome {
        Ok(()) if report.flags.iter().all(|f| f.pass) => Status::Pass,
        Ok(()) => Status::Fail,
        Err(LabError::Runtime(err @ ips_core::Error::InsufficientData { .. })) => {
            report = Report::default();
            report.note(err.to_string());
            report.flag("insufficient_data", false, "at least one replica and enough data for every estimator");
            Status::InsufficientData
        }
        Err(err) => return Err(err),
    };
    let mut tables = report.tables;
    if status == Status::InsufficientData {
        tables = self::tables(e).iter().map(|s| Table::new(s.name, s.columns)).collect();
    }
    Ok(ExperimentResult {
        experiment: e,
        status,
        estimates: report.estimates,
        flags: report.flags,
        tables,
        notes: report.notes,
        provenance: Provenance {
            config: config.params.echo().clone(),
            seed: config.master_seed,
            version: env!("CARGO_PKG_VERSION"),
        },
    })
}

fn body(ctx: &Ctx<'_>, r: &mut Report) -> Result<(), LabError> {
    match ctx.e {
        Experiment::TwoSite => two_site(ctx, r),
        Experiment::CoupleCheck => couple_check(ctx, r),
        Experiment::Breakpoints => breakpoints(ctx, r),
        Experiment::LlnClt => lln_clt(ctx, r),
        Experiment::CompleteConv => complete_conv(ctx, r),
        Experiment::SubcriticalRange => subcritical_range(ctx, r),
        Experiment::SubcriticalLifetime => subcritical_lifetime(ctx, r),
        Experiment::Containment => containment(ctx, r),
        Experiment::Speedcomp => speedcomp(ctx, r),
        Experiment::Fracpunch => fracpunch(ctx, r),
        Experiment::Subadd => subadd(ctx, r),
        Experiment::Cse => cse(ctx, r),
        Experiment::PercolationDensity => percolation_density(ctx, r),
        Experiment::PercolationGrowth => percolation_growth(ctx, r),
        Experiment::Duality => duality(ctx, r),
    }
}

fn row(name: &str, e: Estimate) -> Vec<Cell> {
    vec![name.into(), e.value.into(), e.se.into()]
}

fn within(a: Estimate, b: f64) -> bool {
    (a.value - b).abs() <= Z_TOL * a.se
}

fn two_site(ctx: &Ctx<'_>, r: &mut Report) -> Result<(), LabError> {
    let (l, t, reps) = (ctx.p.f64("lambda"), ctx.p.f64("t"), ctx.p.u64("reps"));
    let exact = two_site_exact(l, t);
    let one = two_site_monte_carlo(ctx.pool, l, t, TwoSiteStart::One, reps, ctx.stream(1))?;
    let both = two_site_monte_carlo(ctx.pool, l, t, TwoSiteStart::Both, reps, ctx.stream(2))?;
    // From two infected sites with no reinfection, both sites must survive.
    let both_exact = (-2.0 * t).exp();
    let threshold = if l == 1.0 { 1.0 } else { l.ln() / (l - 1.0) };
    r.scalar("exact_one", exact);
    r.est("mc_one", one);
    r.scalar("exact_both", both_exact);
    r.est("mc_both", both);
    r.scalar("t", t);
    r.scalar("threshold_time", threshold);
    r.flag("closed_form", within(one, exact), "|mc_one - exact_one| <= 3 se(mc_one)");
    r.flag("witness_exact_above", exact > both_exact, "exact_one > exact_both");
    r.flag("witness_mc_matches", within(both, both_exact), "|mc_both - exact_both| <= 3 se(mc_both)");
    r.flag("witness_mc_below", both.value + Z_TOL * both.se < exact, "mc_both + 3 se(mc_both) < exact_one");
    r.flag("witness_time", t > threshold, "t > threshold_time = log λ / (λ - 1)");
    let mut tab = ctx.table("two_site");
    tab.push(vec!["one".into(), one.value.into(), one.se.into(), exact.into()]);
    tab.push(vec!["both".into(), both.value.into(), both.se.into(), both_exact.into()]);
    r.table(tab);
    Ok(())
}

fn check_flag(r: &mut Report, tab: &mut Table, name: &str, replicas: u64, rep: &ViolationReport) {
    let v = rep.violations.len() as u64;
    r.count(&format!("{name}_violations"), v);
    r.flag(&format!("{name}_clean"), v == 0, &format!("{name}_violations = 0"));
    tab.push(vec![name.into(), replicas.into(), rep.total_checks.into(), v.into()]);
}

fn couple_check(ctx: &Ctx<'_>, r: &mut Report) -> Result<(), LabError> {
    let p = ctx.process()?;
    let (t, reps) = (ctx.p.f64("t"), ctx.p.u64("reps"));
    let runs = run_seeded(ctx.pool, ctx.stream(1), reps, |sd| -> ips_core::Result<[ViolationReport; 4]> {
        let c = p.construction(sd, t)?;
        let ev = Evolve::three_state(&c, &p)?.until(t);
        let a = ev.run(&Configuration::standard())?;
        let bar = ev.run(&Configuration::eta_bar())?;
        let wide = ev.run(&Configuration::interval(-1, 1))?;
        let mut order = check_order(&a, &wide)?;
        order.merge(check_order(&a, &bar)?);
        Ok([assert_rightmost_identity(&a, &bar)?, check_sandwich(&a, &c, p.mu)?, order, assert_restart_domination(&a, &p, &c)?])
    });
    let mut merged: [ViolationReport; 4] = Default::default();
    for run in runs {
        for (m, x) in merged.iter_mut().zip(run?) {
            m.merge(x);
        }
    }
    let lower = ProcessParams::new(ctx.p.f64("lower_lambda"), ctx.p.f64("lower_mu"))?;
    let upper = ProcessParams::new(ctx.p.f64("upper_lambda"), ctx.p.f64("upper_mu"))?;
    let (ot, oreps) = (ctx.p.f64("ordered_t"), ctx.p.u64("ordered_reps"));
    let (eta, eta2) = (Configuration::standard(), Configuration::interval(-1, 1));
    let ordered = run_seeded(ctx.pool, ctx.stream(2), oreps, |sd| -> ips_core::Result<ViolationReport> {
        let ct = co_evolve_ordered(&eta, &eta2, &lower, &upper, sd, ot)?;
        check_order(&ct.trajectories[0], &ct.trajectories[1])
    });
    let mut ordered_report = ViolationReport::default();
    for o in ordered {
        ordered_report.merge(o?);
    }
    let mut tab = ctx.table("checks");
    for (name, rep) in ["rightmost_identity", "sandwich", "initial_order", "restart_domination"].into_iter().zip(&merged) {
        check_flag(r, &mut tab, name, reps, rep);
    }
    check_flag(r, &mut tab, "ordered_coupling", oreps, &ordered_report);
    r.table(tab);
    let m = ordered_marginal_check(ctx.pool, &eta, &eta2, &lower, &upper, 0, ot, ctx.p.u64("marginal_reps"), ctx.stream(3))?;
    r.est("marginal_coupled", m.coupled);
    r.est("marginal_direct", m.direct);
    r.scalar("marginal_z", m.z);
    r.flag("marginal_matches", m.z.abs() <= Z_TOL, "|marginal_z| <= 3");
    let mut tab = ctx.table("marginal");
    tab.push(row("coupled", m.coupled));
    tab.push(row("direct", m.direct));
    r.table(tab);
    Ok(())
}

fn records_table(ctx: &Ctx<'_>, per_replica: &[Vec<RegenRecord>]) -> Table {
    let mut tab = ctx.table("records");
    for (i, recs) in per_replica.iter().enumerate() {
        for (j, rec) in recs.iter().enumerate() {
            tab.push(vec![i.into(), j.into(), rec.x.into(), rec.psi.into(), rec.mback.into()]);
        }
    }
    tab
}

fn split(sample: &BreakPointSample) -> Vec<Vec<RegenRecord>> {
    let mut at = 0;
    sample
        .per_replica
        .iter()
        .map(|&n| {
            let v = sample.records[at..at + n].to_vec();
            at += n;
            v
        })
        .collect()
}

fn halves_flags(r: &mut Report, h: &HalvesReport) {
    r.count("records", h.n as u64);
    r.scalar("halves_x_p", h.x.p);
    r.scalar("halves_psi_p", h.psi.p);
    r.scalar("halves_mback_p", h.mback.p);
    r.scalar("lag1_x", h.lag1_x);
    r.scalar("lag1_psi", h.lag1_psi);
    r.flag("halves_x", h.x.p > P_MIN, "halves_x_p > 0.01");
    r.flag("halves_psi", h.psi.p > P_MIN, "halves_psi_p > 0.01");
}

fn breakpoints(ctx: &Ctx<'_>, r: &mut Report) -> Result<(), LabError> {
    let p = ctx.process()?;
    let (t, s) = (ctx.p.f64("t"), ctx.p.f64("s"));
    let sample = collect_break_points(ctx.pool, &p, t, s, ctx.p.u64("reps"), ctx.stream(1))?;
    let h = halves_report(&sample.records)?;
    halves_flags(r, &h);
    r.flag("lag1", h.lag1_ok(), "|lag1_x| and |lag1_psi| < 3 / sqrt(records)");
    let min = ctx.p.u64("min_records");
    r.flag("enough_records", h.n as u64 >= min, &format!("records >= {min}"));
    r.count("running_max_violations", sample.running_max_violations as u64);
    r.flag("running_max", sample.running_max_violations == 0, "running_max_violations = 0");
    r.count("extended_replicas", sample.extended_replicas as u64);
    r.scalar("window_cut", sample.cut);
    match mback_tail_fit(&sample.records) {
        Ok(fit) => {
            r.scalar("mback_tail_slope", fit.slope);
            r.scalar("mback_tail_r2", fit.r2);
        }
        Err(e) => r.note(format!("backtrack tail fit skipped: {e}")),
    }
    let beta = estimate_beta(ctx.pool, &p, s, ctx.p.u64("beta_reps"), ctx.stream(2))?;
    r.est("beta_s", beta.at_s);
    r.est("beta_2s", beta.at_2s);
    r.scalar("beta_gap", beta.at_s.value - beta.at_2s.value);
    r.table(records_table(ctx, &split(&sample)));
    Ok(())
}

fn lln_clt(ctx: &Ctx<'_>, r: &mut Report) -> Result<(), LabError> {
    let p = ctx.process()?;
    let sample = collect_break_points(ctx.pool, &p, ctx.p.f64("t"), ctx.p.f64("s"), ctx.p.u64("reps"), ctx.stream(1))?;
    let alpha = estimate_alpha(&sample.records)?;
    let direct = direct_speed(ctx.pool, &p, ctx.p.f64("direct_t"), ctx.p.u64("direct_reps"), ctx.stream(2))?;
    let rel = (alpha.alpha_hat - direct.value).abs() / direct.value;
    r.est("alpha", Estimate::new(alpha.alpha_hat, alpha.se, alpha.n_records as u64));
    r.est("direct_speed", direct);
    r.scalar("alpha_relative_error", rel);
    r.flag("alpha_agrees", rel < 0.05, "alpha_relative_error < 0.05");
    halves_flags(r, &halves_report(&sample.records)?);
    let sigma2 = estimate_sigma2(&sample.records, alpha.alpha_hat)?;
    r.scalar("sigma2", sigma2.value);
    r.flag("sigma2_positive", sigma2.value > 0.0 && !sigma2.degenerate, "sigma2 > 0 and not degenerate");
    let mut blocks = ctx.table("blocks");
    match clt_diagnostic(&sample.records, alpha.alpha_hat, sigma2.value) {
        Ok(clt) => {
            r.scalar("clt_ks_d", clt.ks.d);
            r.scalar("clt_ks_p", clt.ks.p);
            r.count("clt_blocks", clt.blocks as u64);
            r.flag("clt_normal", clt.ks.p > P_MIN, "clt_ks_p > 0.01");
            for (i, z) in clt.z.iter().enumerate() {
                blocks.push(vec![i.into(), (*z).into()]);
            }
        }
        Err(e @ (ips_core::Error::InsufficientData { .. } | ips_core::Error::Degenerate(_))) => {
            r.note(format!("CLT diagnostic skipped: {e}"));
            r.flag("clt_normal", false, "clt_ks_p > 0.01");
        }
        Err(e) => return Err(e.into()),
    }
    let theta = estimate_theta(
        ctx.pool,
        p.mu,
        ctx.p.u64("theta_window") as Site,
        ctx.p.f64("theta_t"),
        ctx.p.u64("theta_reps"),
        ctx.stream(3),
    )?;
    r.est("theta", theta.density);
    r.est("theta_half_time", theta.half_time);
    r.flag("theta_stationary", theta.stationary(), "|theta - theta_half_time| <= 3 combined se");
    let g = growth_lln_check(ctx.pool, &p, ctx.p.f64("growth_t"), ctx.p.u64("growth_reps"), &alpha, &theta.density, ctx.stream(4))?;
    r.est("growth_observed", g.observed);
    r.est("growth_predicted", g.predicted);
    r.scalar("growth_relative_error", g.relative_error);
    r.flag("growth_lln", !g.skipped && g.relative_error < 0.10, "growth_relative_error < 0.10");
    let mut speeds = ctx.table("speeds");
    speeds.push(vec!["break_points".into(), alpha.alpha_hat.into(), alpha.se.into(), alpha.n_records.into()]);
    speeds.push(vec!["direct".into(), direct.value.into(), direct.se.into(), direct.n.into()]);
    r.table(speeds);
    r.table(blocks);
    Ok(())
}

fn complete_conv(ctx: &Ctx<'_>, r: &mut Report) -> Result<(), LabError> {
    let p = ctx.process()?;
    let f = ctx.p.ints("f");
    let c = check_complete_convergence(ctx.pool, &p, f, ctx.p.f64("t"), ctx.p.u64("reps"), ctx.seed)?;
    r.est("void", c.lhs);
    r.est("beta", c.beta);
    r.est("phi", c.phi);
    r.est("mixture", c.rhs);
    r.scalar("z", c.z);
    r.flag("complete_convergence", c.z.abs() <= Z_TOL, "|z| <= 3, z = (void - mixture) / combined se");
    let mut tab = ctx.table("void");
    for (name, e) in [("void", c.lhs), ("beta", c.beta), ("phi", c.phi), ("mixture", c.rhs)] {
        tab.push(row(name, e));
    }
    r.table(tab);
    Ok(())
}

fn fit_estimates(r: &mut Report, fit: &DecayFit) {
    r.scalar("slope", fit.slope);
    r.scalar("intercept", fit.intercept);
    r.scalar("r2", fit.r2);
    r.count("fitted_levels", fit.fitted as u64);
}

fn subcritical_range(ctx: &Ctx<'_>, r: &mut Report) -> Result<(), LabError> {
    let p = ctx.process()?;
    let n_max = ctx.p.u64("n_max");
    let fit = range_decay(ctx.pool, &p, n_max as u32, ctx.p.u64("reps"), ctx.seed)?;
    fit_estimates(r, &fit);
    let last = fit.levels.last().expect("n_max >= 3").p;
    r.est("p_n_max", last);
    r.flag("decays", fit.slope < 0.0, "slope < 0");
    r.flag("log_linear", fit.r2 > 0.95, "r2 > 0.95");
    r.flag("tail_small", last.value < 0.01, "p_n_max < 0.01");
    let mut tab = ctx.table("levels");
    for l in &fit.levels {
        tab.push(vec![(l.x as i64).into(), l.p.value.into(), l.p.se.into()]);
    }
    r.table(tab);
    Ok(())
}

fn subcritical_lifetime(ctx: &Ctx<'_>, r: &mut Report) -> Result<(), LabError> {
    let p = ctx.process()?;
    let fit = lifetime_decay(ctx.pool, &p, ctx.p.floats("t_grid"), ctx.p.u64("reps"), ctx.seed)?;
    fit_estimates(r, &fit);
    r.flag("decays", fit.slope < 0.0, "slope < 0");
    r.flag("log_linear", fit.r2 > 0.9, "r2 > 0.9");
    let mut tab = ctx.table("levels");
    let first_fitted = fit.levels.len() - fit.fitted;
    for (i, l) in fit.levels.iter().enumerate() {
        tab.push(vec![l.x.into(), l.p.value.into(), l.p.se.into(), ((i >= first_fitted) as i64).into()]);
    }
    r.table(tab);
    Ok(())
}

fn containment(ctx: &Ctx<'_>, r: &mut Report) -> Result<(), LabError> {
    let p = ctx.process()?;
    let c = containment_probability(ctx.pool, ctx.p.ints("n_grid"), &p, ctx.p.f64("s"), ctx.p.u64("reps"), ctx.seed)?;
    r.est("min", c.min);
    r.scalar("kendall_tau", c.trend.tau);
    r.scalar("kendall_p", c.trend.p);
    r.count("alive_at_s", c.alive_at_s.iter().sum());
    let positive = c.levels.iter().all(|l| l.1.interval(Z99).0 > 0.0);
    r.flag("bounded_below", positive, "p - 2.576 se > 0 on every row of levels.csv");
    r.flag("no_downward_trend", !(c.trend.tau < 0.0 && c.trend.p < P_MIN), "not (kendall_tau < 0 and kendall_p < 0.01)");
    let mut tab = ctx.table("levels");
    for ((n, e), alive) in c.levels.iter().zip(&c.alive_at_s) {
        tab.push(vec![(*n).into(), e.value.into(), e.se.into(), (*alive).into()]);
    }
    r.table(tab);
    Ok(())
}

fn speedcomp(ctx: &Ctx<'_>, r: &mut Report) -> Result<(), LabError> {
    let (l, m, t, reps) = (ctx.p.f64("lambda"), ctx.p.f64("mu"), ctx.p.f64("t"), ctx.p.u64("reps"));
    let g = verify_gap(ctx.pool, l, m, t, reps, ctx.stream(1))?;
    r.est("gap", g.gap);
    r.est("f", g.f);
    r.est("gap_minus_f", g.difference);
    r.count("negative_gaps", g.negative_gaps);
    r.flag("gap_bound", g.holds, "gap_minus_f >= -3 se(gap_minus_f)");
    r.flag("gap_nonnegative", g.negative_gaps == 0, "negative_gaps = 0");
    let s = speed_inequality(ctx.pool, l, m, t, reps, ctx.stream(2))?;
    r.est("alpha", s.alpha);
    r.est("beta_speed", s.beta_speed);
    r.scalar("bound", s.bound);
    r.est("slack", Estimate::new(s.slack, s.combined_se, reps));
    r.flag("speed_inequality", s.holds, "slack >= -3 se(slack), slack = (λ/μ) beta_speed - alpha");
    let mut tab = ctx.table("speeds");
    for (name, e) in [("gap", g.gap), ("f", g.f), ("gap_minus_f", g.difference), ("alpha", s.alpha), ("beta_speed", s.beta_speed)] {
        tab.push(row(name, e));
    }
    r.table(tab);
    Ok(())
}

fn fracpunch(ctx: &Ctx<'_>, r: &mut Report) -> Result<(), LabError> {
    let (l, m, t) = (ctx.p.f64("lambda"), ctx.p.f64("mu"), ctx.p.f64("t"));
    let f = verify_fracpunch(ctx.pool, l, m, t, ctx.p.u64("reps"), ctx.seed)?;
    r.est("f", f.f);
    r.est("xbar", f.xbar);
    r.est("ratio", Estimate::new(f.ratio, f.ratio_se, f.f.n));
    r.scalar("expected", f.expected);
    r.scalar("relative_error", f.relative_error);
    r.scalar("poisson_z", f.poisson_z);
    r.count("identity_failures", f.identity_failures);
    r.flag("ratio", f.within(0.10), "relative_error <= 0.10, or λ = μ");
    r.flag("counts_add_up", f.identity_failures == 0, "identity_failures = 0");
    r.flag("poisson_bound", f.poisson_z < Z_TOL, "poisson_z < 3");
    let mut tab = ctx.table("counts");
    tab.push(row("f", f.f));
    tab.push(row("xbar", f.xbar));
    r.table(tab);
    Ok(())
}

fn subadd(ctx: &Ctx<'_>, r: &mut Report) -> Result<(), LabError> {
    let (l, m) = (ctx.p.f64("lambda"), ctx.p.f64("mu"));
    let reps = ctx.p.u64("reps");
    let rep = subadditivity_check(ctx.pool, l, m, ctx.p.f64("s"), ctx.p.f64("u"), reps, ctx.seed)?;
    let mut tab = ctx.table("checks");
    check_flag(r, &mut tab, "subadditivity", reps, &rep);
    for v in rep.violations.iter().take(5) {
        r.note(format!("t = {}: {}", v.time, v.detail));
    }
    r.table(tab);
    Ok(())
}

fn cse(ctx: &Ctx<'_>, r: &mut Report) -> Result<(), LabError> {
    let (m, mu) = (ctx.p.u64("m") as u32, ctx.p.f64("mu"));
    let (t, s) = (ctx.p.f64("t"), ctx.p.f64("s"));
    let runs = run_seeded(ctx.pool, ctx.stream(1), ctx.p.u64("reps"), |sd| cse_regeneration(m, mu, sd, t, s));
    let per: Vec<Vec<RegenRecord>> = runs.into_iter().map(|x| x.map(|run| complete(&run.records))).collect::<Result<_, _>>()?;
    let all: Vec<RegenRecord> = per.concat();
    halves_flags(r, &halves_report(&all)?);
    let curve = estimate_cse_probability(ctx.pool, m, mu, ctx.p.floats("s_grid"), ctx.p.u64("curve_reps"), ctx.stream(2))?;
    let ps = ctx.p.f64("plateau_s");
    let plateau = curve.iter().find(|c| c.0 == ps).expect("validated").1;
    r.est("plateau", plateau);
    r.flag("plateau_positive", plateau.interval(Z99).0 > 0.0, "plateau - 2.576 se(plateau) > 0");
    let mut tab = ctx.table("curve");
    for (s, e) in &curve {
        tab.push(vec![(*s).into(), e.value.into(), e.se.into()]);
    }
    r.table(records_table(ctx, &per));
    r.table(tab);
    Ok(())
}

fn percolation_density(ctx: &Ctx<'_>, r: &mut Report) -> Result<(), LabError> {
    let gen = ctx.p.generator("generator");
    let grid: Vec<usize> = ctx.p.ints("n_grid").iter().map(|&n| n as usize).collect();
    let tail = density_experiment(ctx.pool, gen, ctx.p.f64("rho"), ctx.p.f64("beta"), &grid, ctx.p.u64("reps"), ctx.stream(1))?;
    let last = tail.last().expect("nonempty grid").1;
    r.est("tail_last", last);
    r.flag("tail_small", last.value < 0.01, "tail_last < 0.01");
    let q = ctx.p.f64("overlap_q");
    let g = Generator::Overlap(q);
    let d = field_density(
        ctx.pool,
        g,
        ctx.p.u64("overlap_n") as usize,
        ctx.p.u64("overlap_half_width") as Site,
        ctx.p.u64("overlap_reps"),
        ctx.stream(2),
    )?;
    r.est("overlap_density", d);
    r.scalar("overlap_expected", g.density());
    r.flag("overlap_density", within(d, g.density()), "|overlap_density - overlap_expected| <= 3 se");
    let mut tab = ctx.table("tail");
    for (n, e) in &tail {
        tab.push(vec![(*n).into(), e.value.into(), e.se.into()]);
    }
    r.table(tab);
    let mut tab = ctx.table("overlap");
    tab.push(vec![q.into(), d.value.into(), d.se.into(), g.density().into()]);
    r.table(tab);
    Ok(())
}

fn percolation_growth(ctx: &Ctx<'_>, r: &mut Report) -> Result<(), LabError> {
    let p = ctx.p.f64("p");
    let n = ctx.p.u64("n") as usize;
    let s = restriction_experiment(ctx.pool, Generator::Independent(p), n, ctx.p.u64("reps"), ctx.stream(1))?;
    r.count("fields", s.fields);
    r.count("surviving", s.surviving);
    r.count("restriction_checks", s.report.total_checks);
    r.count("restriction_violations", s.report.violations.len() as u64);
    r.flag("restriction", s.report.is_clean(), "restriction_violations = 0");
    let mut tab = ctx.table("restriction");
    tab.push(vec![s.fields.into(), s.surviving.into(), s.report.total_checks.into(), (s.report.violations.len() as u64).into()]);
    r.table(tab);
    let grid: Vec<usize> = ctx.p.ints("n_grid").iter().map(|&n| n as usize).collect();
    let g = rightmost_growth(ctx.pool, p, ctx.p.f64("a"), &grid, ctx.p.u64("growth_reps"), ctx.stream(2))?;
    if let Some(fit) = g.fit {
        r.scalar("growth_slope", fit.slope);
        r.scalar("growth_r2", fit.r2);
    }
    let mut tab = ctx.table("growth");
    for (n, e, alive) in &g.levels {
        tab.push(vec![(*n).into(), e.value.into(), e.se.into(), (*alive).into()]);
    }
    r.table(tab);
    Ok(())
}

fn duality(ctx: &Ctx<'_>, r: &mut Report) -> Result<(), LabError> {
    let d = check_duality(ctx.pool, ctx.p.ints("a"), ctx.p.ints("b"), ctx.p.f64("mu"), ctx.p.f64("t"), ctx.p.u64("reps"), ctx.seed)?;
    r.est("p_a_hits_b", d.p1);
    r.est("p_b_hits_a", d.p2);
    r.scalar("z", d.z);
    r.flag("duality", d.z.abs() < Z_TOL, "|z| < 3, z = two-proportion statistic");
    let mut tab = ctx.table("sides");
    tab.push(row("a_hits_b", d.p1));
    tab.push(row("b_hits_a", d.p2));
    r.table(tab);
    Ok(())
}

/// Markdown description of every experiment's keys and tables.
pub fn schema_markdown() -> String {
    let mut s = String::from(
        "# ips-lab outputs\n\n\
         Generated by `ips-lab --schema`; a test keeps this file in sync with the code.\n\n\
         Every run writes `summary.json` and `estimates.csv` (`name,value,se,n`) into its output \
         directory, plus the tables below. Floats are written with 17 significant digits. \
         `se` is `NaN` and `n` is 0 for quantities without a standard error.\n\n\
         Config files are flat `key = value` text; `#` starts a comment. Every experiment also \
         accepts `seed`, `workers` and `out`.\n",
    );
    for e in Experiment::ALL {
        s.push_str(&format!("\n## {}\n\n{}\n\n| key | default | meaning |\n|---|---|---|\n", e.name(), about(e)));
        for k in keys(e) {
            s.push_str(&format!("| `{}` | `{}` | {} |\n", k.name, k.default, k.doc));
        }
        s.push_str("\n| table | columns | rows |\n|---|---|---|\n");
        for t in tables(e) {
            s.push_str(&format!("| `{}.csv` | `{}` | {} |\n", t.name, t.columns.join(","), t.doc));
        }
    }
    s
}
