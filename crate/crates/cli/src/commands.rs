use std::path::PathBuf;

use durability::avail::{
    fit_downtime_binomial, node_rates, parse_downtime_samples, solve_timeout_equation, AvailabilityParams, Unknown,
};
use durability::closedform::{mttdl_exact, mttdl_simple};
use durability::coldstore::ColdModel;
use durability::ctmc::{
    canonical_model, durability_nines_capped, mttdl_linear_solve, nines_from_unreliability, unreliability_at,
    DEFAULT_NINES_CAP, HOURS_PER_YEAR,
};
use durability::fitdata::{fit_weibull, ingest_exchange_log, PlottingPosition};
use durability::profile::{
    profile_2d, profile_from_generator, profile_mds_arrays, profile_mirrored, FaultProfile, GeneratorMatrix,
};
use durability::sim::{estimate_mean_time, run_replicates, SimConfig, SimMode, SimModel, TimeKind};
use durability::tables::{table_by_name, Check, TABLE_NAMES};
use num_traits::ToPrimitive;
use serde_json::{json, Value};

use crate::args::{AvailArgs, ColdMode, ColdsimArgs, FitArgs, Method, MttdlArgs, Positions, ProfileArgs, TableArgs};
use crate::config::{Ints, Rate, RateList, Resolver};
use crate::report::Report;
use crate::CliError;

fn numeric(e: impl std::fmt::Display) -> CliError {
    CliError::Invalid(e.to_string())
}

fn positive(name: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::Invalid(format!("{name} must be positive, got {v}")))
    }
}

pub fn mttdl(r: &mut Resolver, a: MttdlArgs) -> Result<Report, CliError> {
    let m = r.require("m", a.m)?;
    let c = r.require("c", a.c)?;
    let lambda = positive("lambda", r.require::<Rate>("lambda", a.lambda)?.0)?;
    let mu = r.require::<Rate>("mu", a.mu)?.0;
    let horizon = positive("horizon", r.or("horizon", a.horizon, HOURS_PER_YEAR)?)?;
    let mut method = r.or("method", a.method, Method::Exact)?;
    if m == 0 || c == 0 {
        return Err(CliError::Invalid(format!("m and c must be at least 1, got m={m}, c={c}")));
    }
    if mu.is_nan() || mu < 0.0 {
        return Err(CliError::Invalid(format!("mu must be nonnegative, got {mu}")));
    }
    let mut report = Report::new("mttdl");
    if method == Method::Exact && c > 3 {
        report.notices.push(format!("the closed form covers c <= 3; c = {c} falls back to the ctmc solve"));
        method = Method::Ctmc;
    }
    let model = canonical_model(m, c, lambda, mu);
    let (value, provenance) = match method {
        Method::Exact => (mttdl_exact(m, c, lambda, mu).map_err(numeric)?, "closed form"),
        Method::Ctmc => (mttdl_linear_solve(&model).map_err(numeric)?.mttdl, "ctmc linear solve"),
        Method::Simple => (mttdl_simple(m + c, c, lambda, mu), "leading-term approximation"),
    };
    let u = unreliability_at(&model, horizon).map_err(numeric)?;
    report.set("method", provenance);
    report.set("mttdl_hours", value);
    report.set("mttdl_years", value / HOURS_PER_YEAR);
    report.set("nines", durability_nines_capped(value, horizon, DEFAULT_NINES_CAP));
    report.set("unreliability", u);
    report.set("reliability_nines", nines_from_unreliability(u, DEFAULT_NINES_CAP));
    Ok(report)
}

fn check_text(c: Check) -> String {
    match c {
        Check::Absolute(0.0) => "exact".into(),
        Check::Absolute(t) => format!("+-{t}"),
        Check::Decades(d) => format!("within {d} decade"),
    }
}

pub fn table(r: &mut Resolver, a: TableArgs) -> Result<Report, CliError> {
    let name: String = r.or("name", a.name, "all".into())?;
    let names: Vec<&str> = if name == "all" { TABLE_NAMES.to_vec() } else { vec![name.as_str()] };
    if let Some(bad) = names.iter().find(|n| !TABLE_NAMES.contains(n)) {
        return Err(CliError::Usage(format!("unknown table {bad:?}; known: {}, all", TABLE_NAMES.join(", "))));
    }
    let mut report = Report::new("table");
    report.headers = ["table", "row", "column", "computed", "expected", "check", "pass"].map(String::from).to_vec();
    let mut failed = 0;
    for n in names {
        let t = table_by_name(n).map_err(numeric)?;
        for c in &t.cells {
            failed += usize::from(!c.pass);
            report.rows.push(vec![
                json!(t.name),
                json!(c.row),
                json!(c.column),
                json!(c.computed),
                json!(c.expected),
                json!(check_text(c.check)),
                json!(c.pass),
            ]);
        }
    }
    report.set("cells", report.rows.len());
    report.set("failed", failed);
    report.mismatch = failed > 0;
    Ok(report)
}

pub fn coldsim(r: &mut Resolver, a: ColdsimArgs) -> Result<Report, CliError> {
    let n = r.require("n", a.n)?;
    let k = r.require("k", a.k)?;
    let mut m = ColdModel::tape_defaults(n, k);
    m.lambda = r.or("lambda", a.lambda, Rate(m.lambda))?.0;
    m.mu = r.or("mu", a.mu, Rate(m.mu))?.0;
    m.theta = r.or("theta", a.theta, Rate(m.theta))?.0;
    m.phi = r.or("phi", a.phi, Rate(m.phi))?.0;
    m.weibull.shape = r.or("weibull-shape", a.weibull_shape, m.weibull.shape)?;
    m.weibull.scale = r.or("weibull-scale", a.weibull_scale, m.weibull.scale)?;
    m.media.ucer = r.or("ucer", a.ucer, m.media.ucer)?;
    m.media.capacity = r.or("capacity", a.capacity, m.media.capacity)?;
    m.media.kappa = r.or("kappa", a.kappa, m.media.kappa)?;
    let rates = r.or("xph", a.xph, RateList(vec![10.0, 100.0, 1000.0]))?.0;
    let mode = r.or("mode", a.mode, ColdMode::Full)?;
    let replicates = r.or("replicates", a.replicates, 10_000)?;
    let seed = r.or("seed", a.seed, 1)?;
    let threads = r.get("threads", a.threads)?;
    m.validate().map_err(numeric)?;
    let lb = m.lower_bound().map_err(numeric)?;
    let ub = m.upper_bound().map_err(numeric)?;
    let mut report = Report::new("coldsim");
    report.set("lower_bound", lb);
    report.set("upper_bound", ub);
    report.headers = ["exchange_rate", "mttdu_hours", "std_err", "ci_low", "ci_high", "nines", "censored"]
        .map(String::from)
        .to_vec();
    for xph in rates {
        let mut point = m;
        point.exchange_rate = positive("xph", xph)?;
        let mut cfg = SimConfig::new(replicates, seed);
        cfg.mode = match mode {
            ColdMode::Full => SimMode::ColdFull,
            ColdMode::Approx => SimMode::ColdApprox,
        };
        cfg.threads = threads;
        let o = run_replicates(&SimModel::Cold(point), &cfg).map_err(numeric)?;
        let e = estimate_mean_time(&o, TimeKind::Either).map_err(numeric)?;
        report.notices.extend(o.warnings.iter().map(|w| format!("xph={xph}: {w}")));
        report.rows.push(vec![
            json!(xph),
            json!(e.value),
            json!(e.std_err),
            json!(e.ci.0),
            json!(e.ci.1),
            json!(durability_nines_capped(e.value, HOURS_PER_YEAR, DEFAULT_NINES_CAP)),
            json!(o.censored()),
        ]);
    }
    Ok(report)
}

pub fn fit(r: &mut Resolver, a: FitArgs) -> Result<Report, CliError> {
    let path: PathBuf = r.require("log", a.log)?;
    let positions = match r.or("positions", a.positions, Positions::Median)? {
        Positions::Median => PlottingPosition::MedianRank,
        Positions::Mean => PlottingPosition::MeanRank,
    };
    let samples = ingest_exchange_log(&path).map_err(numeric)?;
    let f = fit_weibull(&samples, positions).map_err(numeric)?;
    let mut report = Report::new("fit");
    report.set("shape", f.shape);
    report.set("scale", f.scale);
    report.set("r2", f.r2);
    report.set("mean_exchanges", f.mean_exchanges);
    report.set("n_samples", f.n_samples);
    Ok(report)
}

pub fn avail(r: &mut Resolver, a: AvailArgs) -> Result<Report, CliError> {
    let lambda = match (r.get::<Rate>("lambda", a.lambda)?, r.get("afr", a.afr)?) {
        (Some(l), _) => l.0,
        (None, Some(afr)) => afr / HOURS_PER_YEAR,
        (None, None) => return Err(CliError::Usage("missing --lambda or --afr".into())),
    };
    let t_down = r.require("t-down", a.t_down)?;
    let t_up = r.get("t-up", a.t_up)?;
    let alpha = r.get::<Rate>("alpha", a.alpha)?.map(|v| v.0);
    let downtimes: Option<PathBuf> = r.get("downtimes", a.downtimes)?;
    let mut p = AvailabilityParams { lambda, t_up: t_up.unwrap_or(0.0), t_down };
    let mut report = Report::new("avail");
    let alpha = match (t_up, alpha) {
        (None, Some(alpha)) => {
            p.t_up = solve_timeout_equation(&p, alpha, Unknown::TUp).map_err(numeric)?;
            report.set("solved_for", "t_up");
            Some(alpha)
        }
        (Some(_), None) => {
            report.set("solved_for", "alpha");
            Some(solve_timeout_equation(&p, 0.0, Unknown::Alpha).map_err(numeric)?)
        }
        (Some(_), Some(alpha)) => Some(alpha),
        (None, None) => {
            if downtimes.is_none() {
                return Err(CliError::Usage("give --alpha, --t-up or --downtimes".into()));
            }
            None
        }
    };
    if let Some(alpha) = alpha {
        let rates = node_rates(&p).map_err(numeric)?;
        report.set("lambda", lambda);
        report.set("t_up", p.t_up);
        report.set("t_down", p.t_down);
        report.set("alpha", alpha);
        report.set("p_a", p.p_a());
        report.set("p13", rates.p13);
        report.set("lambda12", rates.lambda12);
        report.set("lambda13", rates.lambda13);
        report.set("lambda21", rates.lambda21);
    }
    if let Some(path) = downtimes {
        let text = std::fs::read_to_string(&path)
            .map_err(|e| CliError::Invalid(format!("downtimes {}: {e}", path.display())))?;
        let fit = fit_downtime_binomial(&parse_downtime_samples(&text).map_err(numeric)?).map_err(numeric)?;
        report.set("binomial_p", fit.p);
        report.set("binomial_n", fit.n_trials);
        report.set("c_u", fit.c_u);
        report.set("mean_downtime_hours", fit.mean_downtime_hours);
        report.set("fit_sse", fit.sse);
    }
    Ok(report)
}

fn profile_rows(report: &mut Report, p: &FaultProfile) {
    report.headers = ["k", "s_k", "q_k", "p_k"].map(String::from).to_vec();
    for (k, s) in p.counts().iter().enumerate() {
        let s = s.to_u64().map(Value::from).unwrap_or_else(|| Value::from(s.to_string()));
        let pk = if k < p.known_up_to() { p.p(k).ok().flatten() } else { None };
        report.rows.push(vec![json!(k), s, json!(p.q(k).unwrap_or(0.0)), json!(pk)]);
    }
    report.set("n_total", p.n_total());
    report.set("known_up_to", p.known_up_to());
    report.set("max_tolerable", p.max_tolerable());
}

fn ints(v: Ints, len: usize, flag: &str) -> Result<Vec<usize>, CliError> {
    if v.0.len() != len {
        return Err(CliError::Usage(format!("--{flag} takes {len} comma-separated integers")));
    }
    Ok(v.0)
}

pub fn profile(r: &mut Resolver, a: ProfileArgs) -> Result<Report, CliError> {
    let generator: Option<PathBuf> = r.get("generator", a.generator)?;
    let mds = r.get("mds-arrays", a.mds_arrays)?;
    let mirrored = r.get("mirrored", a.mirrored)?;
    let product = r.get("product", a.product)?;
    let given = [generator.is_some(), mds.is_some(), mirrored.is_some(), product.is_some()];
    if given.iter().filter(|g| **g).count() != 1 {
        return Err(CliError::Usage("give exactly one of --generator, --mds-arrays, --mirrored, --product".into()));
    }
    let mut report = Report::new("profile");
    if let Some(path) = generator {
        let text = std::fs::read_to_string(&path)
            .map_err(|e| CliError::Invalid(format!("generator {}: {e}", path.display())))?;
        let g = GeneratorMatrix::parse(&text).map_err(numeric)?;
        let w = r.or("max-weight", a.max_weight, g.n())?;
        let gp = profile_from_generator(&g, w).map_err(numeric)?;
        report.set("mev", json!(gp.mev));
        report.set("minimal_erasures", gp.mel.len());
        profile_rows(&mut report, &gp.profile);
        return Ok(report);
    }
    let p = if let Some(v) = mds {
        let v = ints(v, 3, "mds-arrays")?;
        profile_mds_arrays(v[0], v[1], v[2])
    } else if let Some(v) = mirrored {
        let v = ints(v, 3, "mirrored")?;
        profile_mirrored(v[0], v[1], v[2])
    } else {
        let v = ints(product.expect("one source given"), 4, "product")?;
        profile_2d(v[0], v[1], v[2], v[3])
    }
    .map_err(numeric)?;
    profile_rows(&mut report, &p);
    Ok(report)
}
