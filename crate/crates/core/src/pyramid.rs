//! Read-overhead driven repair rates and MTTDL for pyramid-style codes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::closedform::{binomial, mttdl_general, ClosedFormError, GeneralMode};
use crate::ctmc::{durability_nines, HOURS_PER_YEAR};
use crate::profile::{transition_rates_from_q, ProfileError};

pub const BUNDLED_CODES: &str = include_str!("../data/pyramid_codes.json");

#[derive(Debug, Error)]
pub enum PyramidError {
    #[error("invalid code characteristics: {0}")]
    Invalid(String),
    #[error("repair mapping undefined at j = {j}: (j+1)·overhead = {value} <= 1")]
    Domain { j: usize, value: f64 },
    #[error("cannot parse code table: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    ClosedForm(#[from] ClosedFormError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeCharacteristics {
    pub name: String,
    /// percent of patterns of each size that are recoverable
    pub recoverability: Vec<f64>,
    /// average read overhead `χ_j`
    pub read_overhead: Vec<f64>,
    /// plain MDS code; its bandwidth factor is normalized to 1
    #[serde(default)]
    pub mds: bool,
    #[serde(default)]
    pub expected_nines: Vec<u32>,
    #[serde(default)]
    pub expected_mttdl: Vec<f64>,
}

impl CodeCharacteristics {
    pub fn validate(&self) -> Result<(), PyramidError> {
        let bad = |m: String| Err(PyramidError::Invalid(format!("{}: {m}", self.name)));
        if self.recoverability.is_empty() || self.recoverability.len() != self.read_overhead.len() {
            return bad("recoverability and read_overhead need the same nonzero length".into());
        }
        if self.recoverability[0] != 100.0 || self.read_overhead[0] != 1.0 {
            return bad("column 0 must be 100% recoverable with overhead 1".into());
        }
        if self.recoverability.windows(2).any(|w| w[1] > w[0]) {
            return bad("recoverability must be nonincreasing".into());
        }
        if self.recoverability.iter().any(|v| !(0.0..=100.0).contains(v)) {
            return bad("recoverability must lie in [0, 100]".into());
        }
        if self.read_overhead.iter().any(|v| !(*v >= 1.0 && v.is_finite())) {
            return bad("read overhead must be >= 1".into());
        }
        Ok(())
    }

    pub fn q(&self) -> Vec<f64> {
        self.recoverability.iter().map(|r| r / 100.0).collect()
    }

    /// The generic MDS code: everything recoverable, overhead `Φ_j`.
    pub fn mds(n: usize, k: usize) -> Self {
        CodeCharacteristics {
            name: format!("({n},{k}) MDS"),
            recoverability: vec![100.0; n - k + 1],
            read_overhead: (0..=n - k).map(|j| avg_read_overhead_mds(n, k, j)).collect(),
            mds: true,
            expected_nines: Vec::new(),
            expected_mttdl: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeTable {
    pub n: usize,
    pub k: usize,
    pub codes: Vec<CodeCharacteristics>,
    pub mean_failure_hours: Vec<f64>,
    pub mean_repair_hours: f64,
    pub eta: f64,
    pub delta: f64,
}

impl CodeTable {
    pub fn parse(text: &str) -> Result<Self, PyramidError> {
        let t: CodeTable = serde_json::from_str(text)?;
        for c in &t.codes {
            c.validate()?;
        }
        Ok(t)
    }

    pub fn bundled() -> Self {
        Self::parse(BUNDLED_CODES).expect("bundled table is valid")
    }
}

/// `Φ_j`: average read overhead of an `(n, k)` MDS code with `j` failures.
pub fn avg_read_overhead_mds(n: usize, k: usize, j: usize) -> f64 {
    let kf = k as f64;
    let total: f64 = (0..=j.min(k))
        .filter(|&i| j - i <= n - k)
        .map(|i| {
            let i_f = i as f64;
            (i_f * kf + kf - i_f) * binomial(n - k, j - i) * binomial(k, i)
        })
        .sum();
    total / (kf * binomial(n, j))
}

/// How relative read overhead turns into a repair speed-up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OverheadMapping {
    /// `μ_j = δμ ln((j+1)Φ_{j+1}) / ln((j+1)χ_{j+1})`
    #[default]
    Logarithmic,
    /// `μ_j = δμ Φ_{j+1} / χ_{j+1}`
    Proportional,
}

/// Repair rate out of each state `1..=c`, where `c = overhead.len() - 1`.
pub fn repair_rates_from_overhead(
    mu: f64,
    delta: f64,
    overhead: &[f64],
    mds_phi: &[f64],
    mapping: OverheadMapping,
) -> Result<Vec<f64>, PyramidError> {
    if overhead.len() != mds_phi.len() || overhead.is_empty() {
        return Err(PyramidError::Invalid("overhead vectors must be aligned and nonempty".into()));
    }
    if !(delta >= 1.0) || !(mu >= 0.0) {
        return Err(PyramidError::Invalid(format!("need delta >= 1 and mu >= 0, got {delta}, {mu}")));
    }
    (0..overhead.len() - 1)
        .map(|j| {
            let m = (j + 1) as f64;
            match mapping {
                OverheadMapping::Logarithmic => {
                    let num = m * mds_phi[j + 1];
                    let den = m * overhead[j + 1];
                    if den <= 1.0 {
                        return Err(PyramidError::Domain { j, value: den });
                    }
                    if num <= 1.0 {
                        return Err(PyramidError::Domain { j, value: num });
                    }
                    Ok(delta * mu * num.ln() / den.ln())
                }
                OverheadMapping::Proportional => Ok(delta * mu * mds_phi[j + 1] / overhead[j + 1]),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PyramidResult {
    pub mttdl: f64,
    pub nines: u32,
}

/// Recoverability → loss rates → overhead-scaled repair rates → exact MTTDL.
#[allow(clippy::too_many_arguments)]
pub fn pyramid_mttdl(
    code: &CodeCharacteristics,
    n: usize,
    k: usize,
    lambda: f64,
    mu: f64,
    delta: f64,
    eta: f64,
    mapping: OverheadMapping,
) -> Result<PyramidResult, PyramidError> {
    code.validate()?;
    if k == 0 || n <= k || code.recoverability.len() < n - k + 1 {
        return Err(PyramidError::Invalid(format!(
            "{} covers {} failure counts, ({n},{k}) needs {}",
            code.name,
            code.recoverability.len(),
            n - k + 1
        )));
    }
    let c = n - k;
    let phi: Vec<f64> = (0..=c).map(|j| avg_read_overhead_mds(n, k, j)).collect();
    let mus = repair_rates_from_overhead(mu, delta, &code.read_overhead[..=c], &phi, mapping)?;
    let rates = transition_rates_from_q(&code.q()[..=c], lambda, eta, n, k)?.with_repair(mus)?;
    let mttdl = mttdl_general(&rates, GeneralMode::Determinant)?;
    Ok(PyramidResult { mttdl, nines: durability_nines(mttdl, HOURS_PER_YEAR) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableCell {
    pub code: String,
    pub mean_failure_hours: f64,
    pub mttdl: f64,
    pub nines: u32,
    pub expected_mttdl: Option<f64>,
    pub expected_nines: Option<u32>,
}

impl TableCell {
    pub fn nines_match(&self) -> bool {
        self.expected_nines.is_none_or(|e| e == self.nines)
    }
}

/// Every code at every failure rate of the table. MDS rows use δ = 1.
pub fn evaluate_table(table: &CodeTable, mapping: OverheadMapping) -> Result<Vec<TableCell>, PyramidError> {
    let mut out = Vec::new();
    for code in &table.codes {
        let delta = if code.mds { 1.0 } else { table.delta };
        for (col, &hours) in table.mean_failure_hours.iter().enumerate() {
            let r = pyramid_mttdl(
                code,
                table.n,
                table.k,
                1.0 / hours,
                1.0 / table.mean_repair_hours,
                delta,
                table.eta,
                mapping,
            )?;
            out.push(TableCell {
                code: code.name.clone(),
                mean_failure_hours: hours,
                mttdl: r.mttdl,
                nines: r.nines,
                expected_mttdl: code.expected_mttdl.get(col).copied(),
                expected_nines: code.expected_nines.get(col).copied(),
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ctmc::mttdl_linear_solve;
    use crate::profile::{profile_mds_arrays, transition_rates};
    use approx::assert_relative_eq;

    #[test]
    fn phi_examples() {
        assert_relative_eq!(
            avg_read_overhead_mds(18, 12, 1),
            6.0 / 18.0 + 23.0 / 12.0 * 12.0 / 18.0,
            max_relative = 1e-14
        );
        assert!((avg_read_overhead_mds(18, 12, 1) - 1.611).abs() < 5e-4);
        assert_eq!(avg_read_overhead_mds(18, 12, 0), 1.0);
        assert!((avg_read_overhead_mds(18, 12, 6) - 4.67).abs() < 0.005);
        let table = CodeTable::bundled();
        let mds = table.codes.iter().find(|c| c.mds).unwrap();
        for (j, want) in mds.read_overhead.iter().enumerate() {
            assert!((avg_read_overhead_mds(18, 12, j) - want).abs() <= 0.01, "{j}");
        }
    }

    #[test]
    fn phi_nondecreasing() {
        for n in 2..=30 {
            for k in 1..n {
                for j in 0..n - k {
                    assert!(
                        avg_read_overhead_mds(n, k, j + 1) >= avg_read_overhead_mds(n, k, j) - 1e-12,
                        "{n} {k} {j}"
                    );
                }
            }
        }
    }

    #[test]
    fn mds_mapping_is_flat() {
        let phi: Vec<f64> = (0..=6).map(|j| avg_read_overhead_mds(18, 12, j)).collect();
        let mus = repair_rates_from_overhead(0.1, 20.0, &phi, &phi, OverheadMapping::Logarithmic).unwrap();
        for m in mus {
            assert_relative_eq!(m, 2.0, max_relative = 1e-14);
        }
    }

    #[test]
    fn bpc_first_rate() {
        let table = CodeTable::bundled();
        let bpc = &table.codes[1];
        let phi: Vec<f64> = (0..=6).map(|j| avg_read_overhead_mds(18, 12, j)).collect();
        let mus = repair_rates_from_overhead(1.0 / 168.0, 20.0, &bpc.read_overhead, &phi, OverheadMapping::Logarithmic)
            .unwrap();
        let want = 20.0 / 168.0 * phi[1].ln() / 1.28f64.ln();
        assert_relative_eq!(mus[0], want, max_relative = 1e-14);
        assert!((mus[0] - 0.2298).abs() < 1e-3, "{}", mus[0]);
        assert!(mus.iter().all(|m| *m > 20.0 / 168.0));
        let err = repair_rates_from_overhead(1.0, 1.0, &[1.0, 1.0], &[1.0, 1.5], OverheadMapping::Logarithmic);
        assert!(matches!(err, Err(PyramidError::Domain { j: 0, .. })));
    }

    #[test]
    fn mds_pipeline_matches_profile_pipeline() {
        let (lambda, mu, eta) = (1.0 / 200000.0, 1.0 / 168.0, 1e-3);
        let r = pyramid_mttdl(
            &CodeCharacteristics::mds(18, 12),
            18,
            12,
            lambda,
            mu,
            1.0,
            eta,
            OverheadMapping::Logarithmic,
        )
        .unwrap();
        let p = profile_mds_arrays(1, 18, 6).unwrap();
        let rates = transition_rates(&p, lambda, eta, 18, 12).unwrap().with_repair(vec![mu; 6]).unwrap();
        let exact = mttdl_linear_solve(&rates.to_rate_model()).unwrap().mttdl;
        assert_relative_eq!(r.mttdl, exact, max_relative = 1e-9);
    }

    #[test]
    fn table42_cells() {
        let cells = evaluate_table(&CodeTable::bundled(), OverheadMapping::Logarithmic).unwrap();
        assert_eq!(cells.len(), 12);
        let nines: Vec<u32> = cells.iter().map(|c| c.nines).collect();
        assert_eq!(nines, vec![11, 13, 16, 13, 14, 16, 13, 14, 16, 10, 11, 12]);
        for c in &cells[3..] {
            let e = c.expected_mttdl.unwrap();
            assert!((c.mttdl / e - 1.0).abs() < 0.05, "{c:?}");
        }
        assert!((cells[0].mttdl / 2.2e15).log10().abs() < 1.0);
    }

    #[test]
    fn monotone_in_delta_and_recoverability() {
        let table = CodeTable::bundled();
        let mut last = 0.0;
        for d in [1.0, 2.0, 5.0, 20.0, 50.0] {
            let r = pyramid_mttdl(&table.codes[3], 18, 12, 5e-6, 1.0 / 168.0, d, 1e-3, OverheadMapping::Logarithmic)
                .unwrap();
            assert!(r.mttdl >= last);
            last = r.mttdl;
        }
        let mut better = table.codes[3].clone();
        let base = pyramid_mttdl(&better, 18, 12, 5e-6, 1.0 / 168.0, 20.0, 1e-3, OverheadMapping::Logarithmic).unwrap();
        better.recoverability[6] = 80.0;
        let up = pyramid_mttdl(&better, 18, 12, 5e-6, 1.0 / 168.0, 20.0, 1e-3, OverheadMapping::Logarithmic).unwrap();
        assert!(up.mttdl >= base.mttdl);
    }

    #[test]
    fn rejects_bad_tables() {
        let mut c = CodeCharacteristics::mds(6, 4);
        c.recoverability[1] = 101.0;
        assert!(c.validate().is_err());
        assert!(CodeTable::parse("{").is_err());
        let short = CodeCharacteristics::mds(6, 4);
        assert!(pyramid_mttdl(&short, 8, 4, 1e-5, 0.1, 1.0, 0.0, OverheadMapping::Logarithmic).is_err());
    }
}
