//! Command dispatch, checks, artifacts and report merging for the binary.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Parser;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Command, RunConfig};
use crate::curvature::{curvature_at, fit_blowup_rate, log_radii, ray_point, uniform_lower_bound_scan, RateQuantity};
use crate::error::{ConeError, Result};
use crate::holder::{cone_disc_points, flag_divergence, holder_seminorm, ConeDistance, DistanceConvention, GridFunction};
use crate::io::{metric_grid, potential_grid, write_csv, write_json, CsvCell};
use crate::model_geometry::{min_eigenvalue, CorrectionSign, MetricField};
use crate::solver::{build_rhs, epsilon_continuation, newton_solve, MaProblem, PotentialField};
use crate::svg::{Chart, Series};
use crate::symbolic::coeff::fmt_rat;
use crate::symbolic::{analyze_curvature, Rat, SquareFactorization};

pub const SCHEMA: u64 = 1;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_CHECK_FAILED: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Parser, Debug)]
#[command(name = "conekit", version, about = "Edge-cone reference metrics, curvature scans and Monge-Ampère solves")]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[arg(long)]
    pub emit_csv: bool,
    #[arg(long)]
    pub emit_svg: bool,
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub workers: usize,
    pub emit_csv: bool,
    pub emit_svg: bool,
}

/// One pass/fail decision recorded in a report.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
}

impl Check {
    fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            passed: value <= threshold,
            value,
            threshold,
        }
    }

    fn at_least(name: &str, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            passed: value >= threshold,
            value,
            threshold,
        }
    }

    fn flag(name: &str, ok: bool) -> Self {
        Self {
            name: name.into(),
            passed: ok,
            value: if ok { 1.0 } else { 0.0 },
            threshold: 1.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub report: Value,
    pub passed: bool,
    pub artifacts: Vec<PathBuf>,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            EXIT_OK
        } else {
            EXIT_CHECK_FAILED
        }
    }
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    opts: &'a RunOptions,
    out: PathBuf,
    run_id: String,
    seed: u64,
    workers: usize,
    artifacts: Vec<PathBuf>,
}

impl Ctx<'_> {
    fn path(&mut self, suffix: &str) -> PathBuf {
        let p = self.out.join(format!("{}{suffix}", self.run_id));
        self.artifacts.push(p.clone());
        p
    }

    fn svg(&mut self, suffix: &str, chart: &Chart) -> Result<()> {
        if self.opts.emit_svg {
            let p = self.path(suffix);
            std::fs::write(p, chart.render())?;
        }
        Ok(())
    }

    fn csv(&mut self, suffix: &str, header: &[&str], rows: &[Vec<CsvCell>]) -> Result<()> {
        if self.opts.emit_csv {
            let p = self.path(suffix);
            write_csv(&p, header, rows)?;
        }
        Ok(())
    }
}

/// Execute one command and write `<out>/<run_id>.json` plus any requested
/// CSV/SVG/grid artifacts.
pub fn run(cfg: &RunConfig, command: Command, opts: &RunOptions) -> Result<RunOutcome> {
    if let Some(c) = cfg.command {
        if c != command {
            return Err(ConeError::Config(format!("config is for '{}', not '{}'", c.name(), command.name())));
        }
    }
    if command != Command::Report {
        cfg.validate()?;
    }
    let out = opts.out.clone().unwrap_or_else(|| cfg.output.clone());
    std::fs::create_dir_all(&out)?;
    let mut ctx = Ctx {
        cfg,
        opts,
        out,
        run_id: cfg.run_id.clone().unwrap_or_else(|| command.name().to_string()),
        seed: opts.seed.unwrap_or(cfg.seed),
        workers: opts.workers.max(1),
        artifacts: Vec::new(),
    };
    let (result, checks) = match command {
        Command::Metric => cmd_metric(&mut ctx)?,
        Command::SymbolicVerify => cmd_symbolic(&mut ctx)?,
        Command::CurvatureScan => cmd_curvature_scan(&mut ctx)?,
        Command::RateFit => cmd_rate_fit(&mut ctx)?,
        Command::Holder => cmd_holder(&mut ctx)?,
        Command::Solve => cmd_solve(&mut ctx)?,
        Command::Sweep => cmd_sweep(&mut ctx)?,
        Command::Report => cmd_report(&mut ctx)?,
    };
    let passed = checks.iter().all(|c| c.passed);
    let mut cfg_echo = serde_json::to_value(cfg)?;
    cfg_echo["output"] = Value::Null;
    let report = json!({
        "schema": SCHEMA,
        "run_id": ctx.run_id,
        "command": command.name(),
        "seed": ctx.seed,
        "status": if passed { "passed" } else { "failed" },
        "checks": checks,
        "config": cfg_echo,
        "result": result,
    });
    let path = ctx.path(".json");
    write_json(&path, &report)?;
    Ok(RunOutcome {
        report,
        passed,
        artifacts: ctx.artifacts,
    })
}

fn cmd_metric(ctx: &mut Ctx) -> Result<(Value, Vec<Check>)> {
    let m = ctx.cfg.reference()?;
    let d = &ctx.cfg.domain;
    let mut rows = Vec::new();
    let mut mats = Vec::new();
    let mut lam_min = f64::INFINITY;
    let mut worst_cond: f64 = 0.0;
    for p in d.points() {
        let g = m.metric_unchecked(&p)?;
        let lam = min_eigenvalue(&g);
        let cond = crate::curvature::condition_number(&g);
        lam_min = lam_min.min(lam);
        worst_cond = worst_cond.max(cond);
        let re2 = if p.len() > 1 { p[1].re } else { 0.0 };
        rows.push(vec![p[0].norm().into(), re2.into(), lam.into(), cond.into()]);
        mats.push(g);
    }
    let positive = lam_min > 0.0;
    if positive {
        let field = MetricField {
            domain: d.clone(),
            matrices: mats,
        };
        let path = ctx.path(".ckgrid");
        metric_grid(&field).save(&path)?;
    }
    ctx.csv(".csv", &["rho", "re_z2", "min_eigenvalue", "condition_number"], &rows)?;
    let result = json!({
        "nodes": d.len(),
        "min_eigenvalue": lam_min,
        "max_condition_number": worst_cond,
        "ill_conditioned": worst_cond > crate::curvature::COND_WARN,
    });
    Ok((result, vec![Check::at_least("min_eigenvalue_positive", lam_min, f64::MIN_POSITIVE)]))
}

fn fmt_linear(c: &[Rat; 3]) -> String {
    // t' first, then t, then the constant
    let mut s = String::new();
    for (coef, var) in [(&c[1], "t'"), (&c[0], "t"), (&c[2], "")] {
        if coef == &Rat::from_integer(0.into()) {
            continue;
        }
        let neg = coef < &Rat::from_integer(0.into());
        let mag = if neg { -coef.clone() } else { coef.clone() };
        if neg {
            s.push('-');
        } else if !s.is_empty() {
            s.push('+');
        }
        let one = mag == Rat::from_integer(1.into());
        match (var.is_empty(), one) {
            (true, _) => s.push_str(&fmt_rat(&mag)),
            (false, true) => s.push_str(var),
            (false, false) => s.push_str(&format!("{}*{var}", fmt_rat(&mag))),
        }
    }
    s
}

/// `t'^2*(t'-t)^2` style rendering with the linear form's `t'` coefficient
/// made positive.
pub fn compact_factorization(f: &SquareFactorization) -> String {
    let mut lin = f.linear.clone();
    if lin[1] < Rat::from_integer(0.into()) || (lin[1] == Rat::from_integer(0.into()) && lin[0] < Rat::from_integer(0.into())) {
        lin = [-lin[0].clone(), -lin[1].clone(), -lin[2].clone()];
    }
    let mut parts = Vec::new();
    let one = Rat::from_integer(1.into());
    let prefix = if f.constant == one {
        String::new()
    } else if f.constant == -one.clone() {
        "-".to_string()
    } else {
        parts.push(fmt_rat(&f.constant));
        String::new()
    };
    let pow = |v: &str, k: i32| match k {
        0 => None,
        1 => Some(v.to_string()),
        k => Some(format!("{v}^{k}")),
    };
    parts.extend(pow("t", f.t_pow));
    parts.extend(pow("t'", f.tp_pow));
    parts.push(format!("({})^2", fmt_linear(&lin)));
    format!("{prefix}{}", parts.join("*"))
}

fn cmd_symbolic(ctx: &mut Ctx) -> Result<(Value, Vec<Check>)> {
    let sign = ctx.cfg.sign;
    let a = analyze_curvature(sign)?;
    let leading = a.leading_factorization.as_ref().map(compact_factorization).unwrap_or_else(|| a.leading_coefficient.clone());
    let cancellation = if a.cancellation_exact { "0".to_string() } else { a.cancelled_coefficient.clone() };
    let mut checks = vec![
        Check::flag("cancellation_exact", a.cancellation_exact),
        Check::flag("leading_matches_expected", a.matches_expected),
        Check::flag("leading_is_lowest_surviving", a.leading_is_lowest),
    ];
    if sign == CorrectionSign::Subtract {
        checks.push(Check::flag("leading_positive_on_region", a.sign_on_region.as_deref() == Some("positive")));
    }
    let result = json!({
        "cancellation_coefficient": cancellation,
        "cancelled_exponent": a.cancelled_exponent,
        "leading_coefficient": leading,
        "leading_coefficient_expanded": a.leading_coefficient,
        "leading_exponent": a.leading_exponent,
        "sign_on_region": a.sign_on_region,
        "analysis": a,
    });
    Ok((result, checks))
}

fn radii(ctx: &Ctx) -> Vec<f64> {
    let s = &ctx.cfg.scan;
    log_radii(s.r_max, s.r_min, s.radii)
}

fn cmd_curvature_scan(ctx: &mut Ctx) -> Result<(Value, Vec<Check>)> {
    let m = ctx.cfg.reference()?;
    let dim = m.dim();
    let eps = m.params.epsilon;
    let theta = ctx.cfg.scan.theta;
    let rs = radii(ctx);
    let samples = crate::parallel::par_map(&rs, ctx.workers, |&r| curvature_at(&m, &ray_point(dim, r, theta, &[])));
    let mut rows = Vec::new();
    let mut out = Vec::new();
    let mut series: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    let mut finite = true;
    let mut ill = 0usize;
    for (r, s) in rs.iter().zip(samples) {
        let s = s?;
        finite &= s.normalized_bisectional.is_finite();
        ill += s.ill_conditioned as usize;
        let comp = s.component(0, 0, 0, 0).re;
        rows.push(vec![eps.into(), (*r).into(), "R_1111".into(), comp.into()]);
        rows.push(vec![eps.into(), (*r).into(), "normalized".into(), s.normalized_bisectional.into()]);
        series.entry("normalized".into()).or_default().push((*r, s.normalized_bisectional));
        for (tag, v) in &s.frame_pairs {
            rows.push(vec![eps.into(), (*r).into(), tag.as_str().into(), (*v).into()]);
            series.entry(tag.clone()).or_default().push((*r, *v));
        }
        out.push(json!({
            "rho": r,
            "component_1111": comp,
            "normalized_bisectional": s.normalized_bisectional,
            "frame_pairs": s.frame_pairs,
            "condition_number": s.condition_number,
            "ill_conditioned": s.ill_conditioned,
        }));
    }
    ctx.csv(".csv", &["epsilon", "rho", "component", "value"], &rows)?;
    let chart = Chart {
        title: format!("curvature along the ray, eps = {eps:e}"),
        x_label: "|z_1|".into(),
        y_label: "|R| (log10)".into(),
        log_x: true,
        log_y: true,
        series: series.into_iter().map(|(label, points)| Series { label, points }).collect(),
    };
    ctx.svg(".svg", &chart)?;
    let result = json!({"epsilon": eps, "theta": theta, "samples": out, "ill_conditioned_count": ill});
    Ok((result, vec![Check::flag("all_samples_finite", finite)]))
}

/// Exponent the fitted quantity should show as `|z_1| -> 0` for `eps = 0`.
pub fn expected_exponent(q: RateQuantity, tau: f64, tau_prime: f64) -> Option<f64> {
    match q {
        RateQuantity::Normalized => Some(2.0 * tau_prime - 4.0 * tau),
        RateQuantity::Component => Some(2.0 * tau_prime - 4.0),
        RateQuantity::Mixed => None,
    }
}

fn cmd_rate_fit(ctx: &mut Ctx) -> Result<(Value, Vec<Check>)> {
    let m = ctx.cfg.reference()?;
    let s = &ctx.cfg.scan;
    let rs = radii(ctx);
    let fit = fit_blowup_rate(&m, s.quantity, &rs, s.theta)?;
    let mut checks = Vec::new();
    let expected = expected_exponent(s.quantity, m.params.tau, m.params.tau_prime);
    let rel = expected.map(|e| ((fit.exponent - e) / e).abs());
    if let Some(r) = rel {
        checks.push(Check::at_most("exponent_relative_error", r, s.rate_tolerance));
    }
    if m.params.c_coef > 0.0 && ctx.cfg.sign == CorrectionSign::Subtract {
        checks.push(Check::flag("samples_positive", fit.all_positive));
    }
    let rows: Vec<Vec<CsvCell>> = fit
        .radii
        .iter()
        .zip(&fit.values)
        .map(|(r, v)| vec![m.params.epsilon.into(), (*r).into(), format!("{:?}", s.quantity).to_lowercase().into(), (*v).into()])
        .collect();
    ctx.csv(".csv", &["epsilon", "rho", "component", "value"], &rows)?;
    let fitted: Vec<(f64, f64)> = fit.radii.iter().map(|r| (*r, fit.coefficient * r.powf(fit.exponent))).collect();
    let chart = Chart {
        title: format!("blow-up rate: exponent {:.4}", fit.exponent),
        x_label: "|z_1|".into(),
        y_label: "|value| (log10)".into(),
        log_x: true,
        log_y: true,
        series: vec![
            Series {
                label: "samples".into(),
                points: fit.radii.iter().cloned().zip(fit.values.iter().cloned()).collect(),
            },
            Series {
                label: "fit".into(),
                points: fitted,
            },
        ],
    };
    ctx.svg(".svg", &chart)?;
    let result = json!({
        "quantity": s.quantity,
        "exponent": fit.exponent,
        "coefficient": fit.coefficient,
        "residual": fit.residual,
        "radii": fit.radii,
        "values": fit.values,
        "expected_exponent": expected,
        "relative_error": rel,
    });
    Ok((result, checks))
}

/// Test functions on the cone disc.
pub fn holder_function(name: &str, tau: f64) -> Result<Box<dyn Fn(&[num_complex::Complex64]) -> f64 + Sync>> {
    Ok(match name {
        "r2tau" => Box::new(move |p| p[0].norm().powf(2.0 * tau)),
        "re_z" => Box::new(|p| p[0].re),
        "phase" => Box::new(|p| if p[0].norm() > 0.0 { p[0].re / p[0].norm() } else { 0.0 }),
        _ => {
            return Err(ConeError::UnknownCatalog {
                kind: "holder function",
                name: name.into(),
            })
        }
    })
}

/// `max / min` of the ξ-map over the uniformization distance across all
/// point pairs (strided down to at most `budget` pairs).
pub fn convention_ratio(points: &[crate::model_geometry::Point], tau: f64, budget: usize) -> Result<(f64, f64)> {
    let xi = ConeDistance::xi(tau);
    let uni = ConeDistance::new(tau, DistanceConvention::Uniformization)?;
    let n = points.len();
    let total = n * (n - 1) / 2;
    let stride = total.div_ceil(budget.max(1)).max(1);
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    let mut k = 0usize;
    for i in 0..n {
        for j in i + 1..n {
            k += 1;
            if k % stride != 0 {
                continue;
            }
            let du = uni.distance(&points[i], &points[j]);
            if du == 0.0 {
                continue;
            }
            let r = xi.distance(&points[i], &points[j]) / du;
            lo = lo.min(r);
            hi = hi.max(r);
        }
    }
    Ok((lo, hi))
}

fn cmd_holder(ctx: &mut Ctx) -> Result<(Value, Vec<Check>)> {
    let h = &ctx.cfg.holder;
    let tau = ctx.cfg.params.tau;
    let f = holder_function(&h.function, tau)?;
    let dist = ConeDistance::new(tau, h.convention)?;
    let mut reps = Vec::new();
    for level in 0..h.levels.max(1) {
        let k = 1usize << level;
        let pts = cone_disc_points(tau, h.radial * k, h.angular * k);
        let g = GridFunction::from_fn(pts, &f);
        reps.push(holder_seminorm(&g, h.alpha, &dist, h.pair_budget as u64, ctx.workers)?);
    }
    flag_divergence(&mut reps);
    let mut checks = Vec::new();
    let base = &reps[0];
    if h.function == "r2tau" && h.alpha == 1.0 && h.convention == DistanceConvention::XiMap {
        checks.push(Check::at_most("seminorm_relative_error", (base.seminorm - 2.0).abs() / 2.0, 0.05));
    }
    let p = (1.0 / tau).round();
    let mut conventions = Value::Null;
    if (p * tau - 1.0).abs() < 1e-12 {
        let pts = cone_disc_points(tau, h.radial, h.angular);
        let (lo, hi) = convention_ratio(&pts, tau, h.pair_budget)?;
        checks.push(Check::at_most("conventions_within_factor_2", hi.max(1.0 / lo), 2.0));
        conventions = json!({"min_ratio": lo, "max_ratio": hi, "analytic_bound": p});
    }
    let rows: Vec<Vec<CsvCell>> = reps
        .iter()
        .enumerate()
        .map(|(k, r)| vec![(h.radial << k) as f64, (h.angular << k) as f64].into_iter().map(CsvCell::from).chain([r.sup.into(), r.seminorm.into(), r.total.into()]).collect())
        .collect();
    ctx.csv(".csv", &["radial", "angular", "sup", "seminorm", "total"], &rows)?;
    let result = json!({"function": h.function, "levels": reps, "conventions": conventions});
    Ok((result, checks))
}

fn cmd_solve(ctx: &mut Ctx) -> Result<(Value, Vec<Check>)> {
    let cfg = ctx.cfg;
    let m = cfg.reference()?;
    let d = &cfg.domain;
    let src = cfg.source_spec()?;
    let opts = cfg.solve_options(ctx.workers);
    let schedule = if cfg.solve.schedule.is_empty() {
        vec![m.params.epsilon]
    } else {
        cfg.solve.schedule.clone()
    };
    let tol_accept = 10.0 * opts.tol;
    let mut checks = Vec::new();
    let (steps, phi, field, source) = if schedule == [0.0] {
        let field = MetricField::from_reference(&m, d)?;
        let raw = src.sample(d, 0.0)?;
        let s = build_rhs(&raw, &field, src.mu_coupled)?;
        let (phi, report) = newton_solve(&m.params, &field, &s, &opts, None)?;
        (vec![json!({"epsilon": 0.0, "report": report})], phi, field, s)
    } else {
        let steps = epsilon_continuation(&m, d, &src, &schedule, &opts, cfg.solve.with_curvature)?;
        let last = steps.last().expect("nonempty schedule");
        let eps = last.epsilon;
        let mm = m.with_params(m.params.with_epsilon(eps));
        let field = MetricField::from_reference(&mm, d)?;
        let s = build_rhs(&src.sample(d, eps)?, &field, src.mu_coupled)?;
        let phi: PotentialField = last.phi.clone().expect("continuation keeps the potential");
        let v = steps.iter().map(serde_json::to_value).collect::<std::result::Result<Vec<_>, _>>()?;
        (v, phi, field, s)
    };
    for (k, s) in steps.iter().enumerate() {
        let r = s["report"]["residual"].as_f64().unwrap_or(f64::NAN);
        checks.push(Check::at_most(&format!("residual[{k}]"), r, tol_accept));
        let nd = s["report"]["normalization_defect"].as_f64().unwrap_or(f64::NAN);
        checks.push(Check::at_most(&format!("normalization_defect[{k}]"), nd, 1e-10));
    }
    let grid_path = ctx.path(".ckgrid");
    potential_grid(&phi).save(&grid_path)?;
    if ctx.opts.emit_csv {
        let prob = MaProblem::new(&field)?;
        let lap = prob.laplacian(&phi.values);
        let mu = if source.mu_coupled { m.params.mu } else { 0.0 };
        let res = prob.residual(&phi.values, &source.values, mu).unwrap_or_else(|| vec![f64::NAN; phi.values.len()]);
        let rows: Vec<Vec<CsvCell>> = d
            .points()
            .iter()
            .enumerate()
            .map(|(k, p)| {
                let x = if p.len() > 1 { p[1].re } else { 0.0 };
                let r = if k < prob.unknowns() { res[k] } else { 0.0 };
                vec![p[0].norm().into(), x.into(), phi.values[k].into(), lap[k].into(), r.into()]
            })
            .collect();
        ctx.csv(".csv", &["rho", "re_z2", "phi", "laplacian", "residual"], &rows)?;
    }
    let cauchy: Vec<(f64, f64)> = steps
        .iter()
        .filter_map(|s| Some((s["epsilon"].as_f64()?, s["cauchy"].as_f64()?)))
        .collect();
    if cauchy.len() >= 2 {
        let chart = Chart {
            title: "Cauchy differences along the schedule".into(),
            x_label: "epsilon".into(),
            y_label: "sup |phi_k - phi_(k-1)| (log10)".into(),
            log_x: true,
            log_y: true,
            series: vec![Series {
                label: "cauchy".into(),
                points: cauchy.clone(),
            }],
        };
        ctx.svg(".svg", &chart)?;
    }
    let result = json!({
        "phi_sup": phi.sup_norm(),
        "steps": steps,
        "cauchy_table": cauchy.iter().map(|(e, c)| json!({"epsilon": e, "cauchy": c})).collect::<Vec<_>>(),
    });
    Ok((result, checks))
}

fn cmd_sweep(ctx: &mut Ctx) -> Result<(Value, Vec<Check>)> {
    let cfg = ctx.cfg;
    let sw = &cfg.sweep;
    if sw.c_values.len() < 2 {
        return Err(ConeError::Config("sweep.c_values needs a naive run and at least one comparison".into()));
    }
    let base = cfg.reference()?;
    let mut runs = Vec::new();
    let mut series = Vec::new();
    let mut rows = Vec::new();
    for &c in &sw.c_values {
        let m = base.with_params(base.params.with_c(c));
        m.params.validate()?;
        let scan = uniform_lower_bound_scan(&m, &sw.epsilons, &cfg.domain, sw.random_pairs, ctx.seed, ctx.workers)?;
        for e in &scan.per_epsilon {
            rows.push(vec![c.into(), e.epsilon.into(), e.argmin_rho.into(), e.pair.as_str().into(), e.infimum.into()]);
        }
        series.push(Series {
            label: format!("c = {c}"),
            points: scan.per_epsilon.iter().map(|e| (e.epsilon, e.infimum)).collect(),
        });
        runs.push((c, scan));
    }
    let mut checks = Vec::new();
    let naive = &runs[0].1.per_epsilon;
    let (first, last) = (naive[0].infimum, naive[naive.len() - 1].infimum);
    let decrease = if first < 0.0 && last < 0.0 { last / first } else { f64::NAN };
    checks.push(Check::at_least("naive_decrease", decrease, sw.min_naive_decrease));
    for (c, scan) in &runs[1..] {
        checks.push(Check::at_most(&format!("good_spread[c={c}]"), scan.spread_ratio, sw.max_good_spread));
    }
    ctx.csv(".csv", &["c", "epsilon", "argmin_rho", "pair", "infimum"], &rows)?;
    let chart = Chart {
        title: "inf normalized bisectional curvature".into(),
        x_label: "epsilon".into(),
        y_label: "infimum".into(),
        log_x: true,
        log_y: false,
        series,
    };
    ctx.svg(".svg", &chart)?;
    let result = json!({
        "runs": runs.iter().map(|(c, s)| json!({"c": c, "scan": s})).collect::<Vec<_>>(),
        "naive_decrease": decrease,
    });
    Ok((result, checks))
}

fn cmd_report(ctx: &mut Ctx) -> Result<(Value, Vec<Check>)> {
    let merged = report_merge(&ctx.cfg.report.inputs)?;
    Ok((merged, Vec::new()))
}

fn read_report(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).map_err(|e| ConeError::Report(format!("{}: {e}", path.display())))?;
    let v: Value = serde_json::from_str(&text).map_err(|e| ConeError::Report(format!("{}: {e}", path.display())))?;
    if v.get("schema").and_then(Value::as_u64) != Some(SCHEMA) {
        return Err(ConeError::Report(format!("{}: schema mismatch (expected {SCHEMA})", path.display())));
    }
    if v.get("run_id").and_then(Value::as_str).is_none() {
        return Err(ConeError::Report(format!("{}: missing run_id", path.display())));
    }
    Ok(v)
}

/// Monitor constants of every solve step found in a report.
fn constants_rows(run_id: &str, report: &Value) -> Vec<Value> {
    let steps = report.pointer("/result/steps").and_then(Value::as_array);
    steps
        .into_iter()
        .flatten()
        .map(|s| {
            let r = &s["report"];
            json!({
                "run_id": run_id,
                "epsilon": s["epsilon"],
                "phi_sup": r["phi_sup"],
                "sup_trace": r["sup_trace"],
                "inf_f": r["inf_f"],
                "inf_laplacian_f_minus": r["inf_laplacian_f_minus"],
                "inf_bisectional": r["inf_bisectional"],
            })
        })
        .collect()
}

/// Combine reports keyed by run id, with a table of the monitored estimate
/// inputs and a Cauchy table sorted by ε.
pub fn report_merge(paths: &[PathBuf]) -> Result<Value> {
    if paths.is_empty() {
        return Err(ConeError::Report("nothing to merge".into()));
    }
    let mut runs = serde_json::Map::new();
    let mut seen: BTreeMap<String, PathBuf> = BTreeMap::new();
    let mut constants = Vec::new();
    let mut cauchy: Vec<(f64, String, f64)> = Vec::new();
    for p in paths {
        let v = read_report(p)?;
        let id = v["run_id"].as_str().expect("checked").to_string();
        if let Some(prev) = seen.get(&id) {
            return Err(ConeError::Report(format!(
                "run id '{id}' appears in both {} and {}",
                prev.display(),
                p.display()
            )));
        }
        seen.insert(id.clone(), p.clone());
        constants.extend(constants_rows(&id, &v));
        if let Some(rows) = v.pointer("/result/cauchy_table").and_then(Value::as_array) {
            for r in rows {
                if let (Some(e), Some(c)) = (r["epsilon"].as_f64(), r["cauchy"].as_f64()) {
                    cauchy.push((e, id.clone(), c));
                }
            }
        }
        runs.insert(id, v);
    }
    cauchy.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    Ok(json!({
        "schema": SCHEMA,
        "runs": runs,
        "constants_table": constants,
        "cauchy_table": cauchy.iter().map(|(e, id, c)| json!({"epsilon": e, "run_id": id, "cauchy": c})).collect::<Vec<_>>(),
    }))
}

fn diagnostic(run_id: &str, command: &str, err: &ConeError) -> Value {
    json!({"schema": SCHEMA, "run_id": run_id, "command": command, "status": "error", "error": err.to_string()})
}

/// Entry point shared by the binary and the tests; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let cfg = match RunConfig::load(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{}", serde_json::to_string(&diagnostic("", cli.command.name(), &e)).unwrap_or_default());
            return EXIT_USAGE;
        }
    };
    let opts = RunOptions {
        out: cli.out,
        seed: cli.seed,
        workers: cli.workers,
        emit_csv: cli.emit_csv,
        emit_svg: cli.emit_svg,
    };
    match run(&cfg, cli.command, &opts) {
        Ok(outcome) => {
            for c in outcome.report["checks"].as_array().into_iter().flatten() {
                let ok = c["passed"].as_bool().unwrap_or(false);
                eprintln!("{} {}", if ok { "PASS" } else { "FAIL" }, c["name"].as_str().unwrap_or(""));
            }
            outcome.exit_code()
        }
        Err(e) => {
            let run_id = cfg.run_id.clone().unwrap_or_default();
            let diag = diagnostic(&run_id, cli.command.name(), &e);
            let out = opts.out.clone().unwrap_or_else(|| cfg.output.clone());
            if std::fs::create_dir_all(&out).is_ok() {
                let _ = write_json(&out.join(format!("{run_id}.error.json")), &diag);
            }
            eprintln!("{}", serde_json::to_string(&diag).unwrap_or_default());
            match e {
                ConeError::Config(_) => EXIT_USAGE,
                _ => EXIT_ERROR,
            }
        }
    }
}
