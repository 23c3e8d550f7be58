//! Monetary poverty measures over individual incomes and empirical checks
//! of the standard axioms.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Absolute tolerance of the invariance checks in [`axiom_suite`].
pub const AXIOM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct IncomeDistribution {
    incomes: Vec<f64>,
    poverty_line: f64,
    inclusive: bool,
}

impl IncomeDistribution {
    /// Incomes must be positive and finite, as must the poverty line.
    /// A person is poor when their income is strictly below the line.
    pub fn new(incomes: Vec<f64>, poverty_line: f64) -> Result<Self> {
        if incomes.is_empty() {
            return Err(Error::InvalidInput("income distribution is empty".into()));
        }
        if !(poverty_line > 0.0 && poverty_line.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "poverty line must be positive, got {poverty_line}"
            )));
        }
        if let Some(bad) = incomes.iter().find(|y| !(**y > 0.0 && y.is_finite())) {
            return Err(Error::InvalidInput(format!(
                "incomes must be positive, got {bad}"
            )));
        }
        Ok(Self {
            incomes,
            poverty_line,
            inclusive: false,
        })
    }

    /// Counts incomes equal to the line as poor.
    pub fn inclusive(mut self, inclusive: bool) -> Self {
        self.inclusive = inclusive;
        self
    }

    pub fn incomes(&self) -> &[f64] {
        &self.incomes
    }

    pub fn poverty_line(&self) -> f64 {
        self.poverty_line
    }

    pub fn len(&self) -> usize {
        self.incomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.incomes.is_empty()
    }

    pub fn is_poor(&self, y: f64) -> bool {
        if self.inclusive {
            y <= self.poverty_line
        } else {
            y < self.poverty_line
        }
    }

    pub fn poor_count(&self) -> usize {
        self.incomes.iter().filter(|&&y| self.is_poor(y)).count()
    }

    fn with_incomes(&self, incomes: Vec<f64>) -> Self {
        Self {
            incomes,
            poverty_line: self.poverty_line,
            inclusive: self.inclusive,
        }
    }

    fn shortfall(&self, y: f64) -> f64 {
        (self.poverty_line - y) / self.poverty_line
    }
}

/// Foster-Greer-Thorbecke index: mean over the population of the poor's
/// relative shortfall raised to `alpha`.
pub fn fgt(d: &IncomeDistribution, alpha: f64) -> Result<f64> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "FGT exponent must be nonnegative, got {alpha}"
        )));
    }
    let sum: f64 = d
        .incomes
        .iter()
        .filter(|&&y| d.is_poor(y))
        .map(|&y| {
            if alpha == 0.0 {
                1.0
            } else if alpha == 1.0 {
                d.shortfall(y)
            } else {
                d.shortfall(y).powf(alpha)
            }
        })
        .sum();
    Ok(sum / d.len() as f64)
}

pub fn headcount(d: &IncomeDistribution) -> f64 {
    fgt(d, 0.0).expect("zero exponent is valid")
}

pub fn poverty_gap(d: &IncomeDistribution) -> f64 {
    fgt(d, 1.0).expect("unit exponent is valid")
}

/// Mean over the population of `ln z - ln y` for the poor.
pub fn watts(d: &IncomeDistribution) -> f64 {
    let ln_z = d.poverty_line.ln();
    let sum: f64 = d
        .incomes
        .iter()
        .filter(|&&y| d.is_poor(y))
        .map(|&y| ln_z - y.ln())
        .sum();
    sum / d.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "measure", content = "alpha", rename_all = "snake_case")]
pub enum Measure {
    Headcount,
    PovertyGap,
    Fgt(f64),
    Watts,
}

impl Measure {
    pub fn evaluate(&self, d: &IncomeDistribution) -> Result<f64> {
        match *self {
            Measure::Headcount => Ok(headcount(d)),
            Measure::PovertyGap => Ok(poverty_gap(d)),
            Measure::Fgt(alpha) => fgt(d, alpha),
            Measure::Watts => Ok(watts(d)),
        }
    }

    fn alpha(&self) -> Option<f64> {
        match *self {
            Measure::Headcount => Some(0.0),
            Measure::PovertyGap => Some(1.0),
            Measure::Fgt(a) => Some(a),
            Measure::Watts => None,
        }
    }

    /// Whether lowering a poor income must raise the index strictly.
    fn strictly_monotone(&self) -> bool {
        self.alpha().is_none_or(|a| a >= 1.0)
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Measure::Headcount => f.write_str("headcount"),
            Measure::PovertyGap => f.write_str("poverty_gap"),
            Measure::Fgt(a) => write!(f, "fgt({a})"),
            Measure::Watts => f.write_str("watts"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axiom {
    Replication,
    Focus,
    Monotonicity,
    Transfer,
    Decomposability,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxiomStatus {
    Pass,
    Fail,
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxiomCheck {
    pub axiom: Axiom,
    pub status: AxiomStatus,
    pub before: Option<f64>,
    pub after: Option<f64>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxiomReport {
    pub measure: String,
    pub population: usize,
    pub poor: usize,
    pub checks: Vec<AxiomCheck>,
}

impl AxiomReport {
    pub fn status(&self, axiom: Axiom) -> Option<AxiomStatus> {
        self.checks.iter().find(|c| c.axiom == axiom).map(|c| c.status)
    }
}

fn check(axiom: Axiom, pass: bool, before: f64, after: f64, detail: String) -> AxiomCheck {
    AxiomCheck {
        axiom,
        status: if pass { AxiomStatus::Pass } else { AxiomStatus::Fail },
        before: Some(before),
        after: Some(after),
        detail,
    }
}

fn not_applicable(axiom: Axiom, detail: &str) -> AxiomCheck {
    AxiomCheck {
        axiom,
        status: AxiomStatus::NotApplicable,
        before: None,
        after: None,
        detail: detail.to_string(),
    }
}

/// Runs the five axiom perturbations on `d` and compares `measure` before
/// and after each.
pub fn axiom_suite(measure: Measure, d: &IncomeDistribution) -> Result<AxiomReport> {
    let base = measure.evaluate(d)?;
    let ys = d.incomes();
    let poor: Vec<usize> = (0..ys.len()).filter(|&i| d.is_poor(ys[i])).collect();
    let nonpoor: Vec<usize> = (0..ys.len()).filter(|&i| !d.is_poor(ys[i])).collect();
    let same = |a: f64, b: f64| (a - b).abs() <= AXIOM_TOLERANCE;
    let mut checks = Vec::with_capacity(5);

    let replicated = d.with_incomes(ys.iter().cycle().take(3 * ys.len()).copied().collect());
    let after = measure.evaluate(&replicated)?;
    checks.push(check(
        Axiom::Replication,
        same(base, after),
        base,
        after,
        "3-fold replication".into(),
    ));

    checks.push(match nonpoor.iter().max_by(|&&a, &&b| ys[a].total_cmp(&ys[b])) {
        None => not_applicable(Axiom::Focus, "nobody is above the poverty line"),
        Some(&i) => {
            let mut v = ys.to_vec();
            v[i] *= 2.0;
            let after = measure.evaluate(&d.with_incomes(v))?;
            check(
                Axiom::Focus,
                same(base, after),
                base,
                after,
                format!("income of person {i} doubled"),
            )
        }
    });

    checks.push(match poor.first() {
        None => not_applicable(Axiom::Monotonicity, "nobody is poor"),
        Some(&i) => {
            let mut v = ys.to_vec();
            v[i] *= 0.5;
            let after = measure.evaluate(&d.with_incomes(v))?;
            let pass = if measure.strictly_monotone() {
                after > base + AXIOM_TOLERANCE
            } else {
                after >= base - AXIOM_TOLERANCE
            };
            check(
                Axiom::Monotonicity,
                pass,
                base,
                after,
                format!("income of poor person {i} halved"),
            )
        }
    });

    let poorest = poor.iter().min_by(|&&a, &&b| ys[a].total_cmp(&ys[b]));
    let richest_poor = poor.iter().max_by(|&&a, &&b| ys[a].total_cmp(&ys[b]));
    checks.push(match (poorest, richest_poor) {
        (Some(&i), Some(&j)) if poor.len() >= 2 && ys[j] > ys[i] => {
            // a quarter of the gap keeps the donor poor and above the recipient
            let delta = (ys[j] - ys[i]) / 4.0;
            let mut v = ys.to_vec();
            v[i] += delta;
            v[j] -= delta;
            let after = measure.evaluate(&d.with_incomes(v))?;
            check(
                Axiom::Transfer,
                after < base - AXIOM_TOLERANCE,
                base,
                after,
                format!("transfer of {delta} from person {j} to person {i}"),
            )
        }
        _ => not_applicable(
            Axiom::Transfer,
            "needs two poor persons with different incomes",
        ),
    });

    checks.push(if ys.len() < 2 {
        not_applicable(Axiom::Decomposability, "needs at least two persons")
    } else {
        let half = ys.len() / 2;
        let n = ys.len() as f64;
        let a = measure.evaluate(&d.with_incomes(ys[..half].to_vec()))?;
        let b = measure.evaluate(&d.with_incomes(ys[half..].to_vec()))?;
        let after = half as f64 / n * a + (ys.len() - half) as f64 / n * b;
        check(
            Axiom::Decomposability,
            same(base, after),
            base,
            after,
            format!("split after person {half}"),
        )
    });

    Ok(AxiomReport {
        measure: measure.to_string(),
        population: ys.len(),
        poor: poor.len(),
        checks,
    })
}

/// The four indices of one distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexReport {
    pub population: usize,
    pub poverty_line: f64,
    pub inclusive: bool,
    pub headcount: f64,
    pub poverty_gap: f64,
    pub squared_gap: f64,
    pub watts: f64,
}

pub fn index_report(d: &IncomeDistribution) -> IndexReport {
    IndexReport {
        population: d.len(),
        poverty_line: d.poverty_line,
        inclusive: d.inclusive,
        headcount: headcount(d),
        poverty_gap: poverty_gap(d),
        squared_gap: fgt(d, 2.0).expect("valid exponent"),
        watts: watts(d),
    }
}

/// Reads one income per row from the first column. A non-numeric first
/// row is taken as a header.
pub fn load_incomes(path: &Path) -> Result<Vec<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::csv(path, e))?;
    let mut incomes = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::csv(path, e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(i as u64 + 1);
        let field = record.get(0).unwrap_or("").trim();
        match field.parse::<f64>() {
            Ok(v) if v > 0.0 && v.is_finite() => incomes.push(v),
            Ok(v) => {
                return Err(Error::validation(
                    Some(line),
                    format!("income must be positive, got {v}"),
                ));
            }
            Err(_) if i == 0 => {}
            Err(_) => {
                return Err(Error::validation(
                    Some(line),
                    format!("cannot parse income '{field}'"),
                ));
            }
        }
    }
    if incomes.is_empty() {
        return Err(Error::validation(None, format!("{} has no incomes", path.display())));
    }
    Ok(incomes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dist(y: &[f64], z: f64) -> IncomeDistribution {
        IncomeDistribution::new(y.to_vec(), z).unwrap()
    }

    #[test]
    fn two_person_values() {
        let d = dist(&[1.0, 3.0], 2.0);
        assert_eq!(headcount(&d), 0.5);
        assert!((poverty_gap(&d) - 0.25).abs() < 1e-12);
        assert!((fgt(&d, 2.0).unwrap() - 0.125).abs() < 1e-12);
        assert!((watts(&d) - 2f64.ln() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn line_is_strict_by_default() {
        let d = dist(&[2.0, 3.0], 2.0);
        assert_eq!(headcount(&d), 0.0);
        assert_eq!(headcount(&d.clone().inclusive(true)), 0.5);
        assert_eq!(poverty_gap(&d.inclusive(true)), 0.0);
    }

    #[test]
    fn nobody_poor_and_uniform_shortfall() {
        let d = dist(&[5.0, 6.0], 2.0);
        assert_eq!([headcount(&d), poverty_gap(&d), watts(&d)], [0.0; 3]);
        let half = dist(&[1.0; 4], 2.0);
        assert!((poverty_gap(&half) - 0.5).abs() < 1e-15);
        assert!((fgt(&half, 2.0).unwrap() - 0.25).abs() < 1e-15);
        assert!((watts(&half) - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn invalid_inputs() {
        assert!(IncomeDistribution::new(vec![], 1.0).is_err());
        assert!(IncomeDistribution::new(vec![0.0], 1.0).is_err());
        assert!(IncomeDistribution::new(vec![1.0], 0.0).is_err());
        assert!(fgt(&dist(&[1.0], 2.0), -1.0).is_err());
    }

    #[test]
    fn transfer_axiom_separates_measures() {
        let d = dist(&[1.0, 2.0, 3.0, 6.0], 4.0);
        let status = |m| axiom_suite(m, &d).unwrap().status(Axiom::Transfer).unwrap();
        assert_eq!(status(Measure::Headcount), AxiomStatus::Fail);
        assert_eq!(status(Measure::PovertyGap), AxiomStatus::Fail);
        assert_eq!(status(Measure::Fgt(2.0)), AxiomStatus::Pass);
        assert_eq!(status(Measure::Watts), AxiomStatus::Pass);
    }

    #[test]
    fn other_axioms_hold() {
        let d = dist(&[1.0, 2.0, 3.0, 6.0], 4.0);
        for m in [Measure::Headcount, Measure::PovertyGap, Measure::Fgt(2.0), Measure::Watts] {
            let report = axiom_suite(m, &d).unwrap();
            for axiom in [Axiom::Replication, Axiom::Focus, Axiom::Monotonicity, Axiom::Decomposability] {
                assert_eq!(report.status(axiom), Some(AxiomStatus::Pass), "{m} {axiom:?}");
            }
        }
    }

    #[test]
    fn inapplicable_checks() {
        let report = axiom_suite(Measure::Watts, &dist(&[1.0], 2.0)).unwrap();
        assert_eq!(report.status(Axiom::Transfer), Some(AxiomStatus::NotApplicable));
        assert_eq!(report.status(Axiom::Focus), Some(AxiomStatus::NotApplicable));
        assert_eq!(report.status(Axiom::Decomposability), Some(AxiomStatus::NotApplicable));
        let json = serde_json::to_string(&report).unwrap();
        assert!(json.contains("\"not_applicable\""));
    }

    #[test]
    fn load_with_and_without_header() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.csv");
        std::fs::write(&a, "income\n1\n3\n").unwrap();
        assert_eq!(load_incomes(&a).unwrap(), vec![1.0, 3.0]);
        let b = dir.path().join("b.csv");
        std::fs::write(&b, "1.5\n2.5\n").unwrap();
        assert_eq!(load_incomes(&b).unwrap(), vec![1.5, 2.5]);
        let c = dir.path().join("c.csv");
        std::fs::write(&c, "income\n1\n-2\n").unwrap();
        assert!(matches!(
            load_incomes(&c).unwrap_err(),
            Error::Validation { line: Some(3), .. }
        ));
    }

    proptest! {
        #[test]
        fn fgt_specialises_exactly(
            ys in proptest::collection::vec(0.01f64..10.0, 1..40),
            z in 0.1f64..10.0,
        ) {
            let d = dist(&ys, z);
            prop_assert_eq!(fgt(&d, 0.0).unwrap(), headcount(&d));
            prop_assert_eq!(fgt(&d, 1.0).unwrap(), poverty_gap(&d));
            for a in [0.0, 0.5, 1.0, 2.0, 3.0] {
                let v = fgt(&d, a).unwrap();
                prop_assert!((0.0..=1.0).contains(&v));
            }
            prop_assert!(watts(&d) >= 0.0);
        }

        #[test]
        fn raising_line_never_lowers_indices(
            ys in proptest::collection::vec(0.01f64..10.0, 1..40),
            z in 0.1f64..10.0,
            dz in 0.0f64..5.0,
        ) {
            let lo = dist(&ys, z);
            let hi = dist(&ys, z + dz);
            for m in [Measure::Headcount, Measure::PovertyGap, Measure::Fgt(2.0), Measure::Watts] {
                prop_assert!(m.evaluate(&hi).unwrap() >= m.evaluate(&lo).unwrap() - 1e-15);
            }
        }
    }
}
