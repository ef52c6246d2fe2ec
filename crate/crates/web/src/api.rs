use durability::closedform::mttdl_exact;
use durability::coldstore::ColdModel;
use durability::ctmc::{
    canonical_model, durability_nines_capped, mttdl_linear_solve, reliability_at, DEFAULT_NINES_CAP,
};
use serde_json::json;

/// Upper limit on curve points; each one is a uniformization run.
pub const MAX_POINTS: usize = 500;

fn check(m: usize, c: usize, lambda: f64, mu: f64) -> Result<(), String> {
    if m == 0 || c == 0 {
        return Err(format!("m and c must be at least 1, got m={m}, c={c}"));
    }
    if c > 12 {
        return Err(format!("c = {c} is larger than the demo allows (12)"));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(format!("lambda must be positive, got {lambda}"));
    }
    if !(mu >= 0.0 && mu.is_finite()) {
        return Err(format!("mu must be nonnegative, got {mu}"));
    }
    Ok(())
}

pub fn nines(m: usize, c: usize, lambda: f64, mu: f64, horizon: f64) -> Result<String, String> {
    check(m, c, lambda, mu)?;
    if horizon.is_nan() || horizon <= 0.0 {
        return Err(format!("horizon must be positive, got {horizon}"));
    }
    let (mttdl, method) = if c <= 3 {
        (mttdl_exact(m, c, lambda, mu).map_err(|e| e.to_string())?, "closed form")
    } else {
        let r = mttdl_linear_solve(&canonical_model(m, c, lambda, mu)).map_err(|e| e.to_string())?;
        (r.mttdl, "ctmc")
    };
    let nines = durability_nines_capped(mttdl, horizon, DEFAULT_NINES_CAP);
    Ok(json!({ "mttdl": mttdl, "nines": nines, "method": method }).to_string())
}

pub fn reliability_curve(
    m: usize,
    c: usize,
    lambda: f64,
    mu: f64,
    horizon: f64,
    points: usize,
) -> Result<String, String> {
    check(m, c, lambda, mu)?;
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(format!("horizon must be positive, got {horizon}"));
    }
    if !(2..=MAX_POINTS).contains(&points) {
        return Err(format!("points must be in 2..={MAX_POINTS}, got {points}"));
    }
    let model = canonical_model(m, c, lambda, mu);
    let mut t = Vec::with_capacity(points);
    let mut r = Vec::with_capacity(points);
    for i in 0..points {
        let at = horizon * i as f64 / (points - 1) as f64;
        t.push(at);
        r.push(reliability_at(&model, at).map_err(|e| e.to_string())?);
    }
    Ok(json!({ "t": t, "r": r }).to_string())
}

pub fn cold_bounds(n: usize, k: usize, lambda: f64, mu: f64, theta: f64) -> Result<String, String> {
    let mut model = ColdModel::tape_defaults(n, k);
    model.lambda = lambda;
    model.mu = mu;
    model.theta = theta;
    let lower = model.lower_bound().map_err(|e| e.to_string())?;
    let upper = model.upper_bound().map_err(|e| e.to_string())?;
    let year = durability::ctmc::HOURS_PER_YEAR;
    Ok(json!({
        "lower": lower,
        "upper": upper,
        "nines_lower": durability_nines_capped(lower, year, DEFAULT_NINES_CAP),
        "nines_upper": durability_nines_capped(upper, year, DEFAULT_NINES_CAP),
    })
    .to_string())
}
