//! Cross-section OLS with classical or HC1 standard errors, semi-partial
//! R², the two-stage residual regression, and the elbow analysis used to
//! pick the stagnation window.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor, StudentsT};

use crate::ingest::{ControlTable, PovertyPanel};
use crate::numfmt::fmt;
use crate::{Error, Result};

/// Name of the intercept term in results.
pub const INTERCEPT: &str = "(Intercept)";

/// Relative size below which a QR pivot marks a column as collinear with
/// the columns before it.
const RANK_TOLERANCE: f64 = 1e-10;

/// Named numeric columns over keyed rows, with missing cells.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DataTable {
    keys: Vec<String>,
    columns: BTreeMap<String, Vec<Option<f64>>>,
}

impl DataTable {
    pub fn new(keys: Vec<String>) -> Self {
        Self {
            keys,
            columns: BTreeMap::new(),
        }
    }

    /// One column per control, rows in the table's country order.
    pub fn from_controls(controls: &ControlTable) -> Self {
        let keys: Vec<String> = controls.rows().keys().cloned().collect();
        let mut table = Self::new(keys);
        for (j, name) in controls.columns().iter().enumerate() {
            let values = controls.rows().values().map(|r| r[j]).collect();
            table.columns.insert(name.clone(), values);
        }
        table
    }

    pub fn keys(&self) -> &[String] {
        &self.keys
    }

    pub fn column_names(&self) -> impl Iterator<Item = &str> {
        self.columns.keys().map(String::as_str)
    }

    pub fn add_column(&mut self, name: &str, values: Vec<Option<f64>>) -> Result<()> {
        if values.len() != self.keys.len() {
            return Err(Error::InvalidInput(format!(
                "column '{name}' has {} values for {} rows",
                values.len(),
                self.keys.len()
            )));
        }
        if self.columns.insert(name.to_string(), values).is_some() {
            return Err(Error::InvalidInput(format!("duplicate column '{name}'")));
        }
        Ok(())
    }

    /// Adds or replaces a column by row key; keys not present stay missing.
    pub fn join_column(&mut self, name: &str, values: &BTreeMap<String, Option<f64>>) {
        let col = self
            .keys
            .iter()
            .map(|k| values.get(k).copied().flatten())
            .collect();
        self.columns.insert(name.to_string(), col);
    }

    pub fn column(&self, name: &str) -> Result<&[Option<f64>]> {
        self.columns
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::InvalidInput(format!("unknown column '{name}'")))
    }

    /// Indices of the rows complete in every listed column.
    pub fn complete_rows(&self, names: &[&str]) -> Result<Vec<usize>> {
        let cols = names
            .iter()
            .map(|n| self.column(n))
            .collect::<Result<Vec<_>>>()?;
        Ok((0..self.keys.len())
            .filter(|&i| cols.iter().all(|c| c[i].is_some_and(f64::is_finite)))
            .collect())
    }

    /// Table restricted to the given rows.
    pub fn select_rows(&self, rows: &[usize]) -> DataTable {
        DataTable {
            keys: rows.iter().map(|&i| self.keys[i].clone()).collect(),
            columns: self
                .columns
                .iter()
                .map(|(k, v)| (k.clone(), rows.iter().map(|&i| v[i]).collect()))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegressionSpec {
    pub dependent: String,
    pub regressors: Vec<String>,
    #[serde(default = "default_true")]
    pub include_intercept: bool,
}

fn default_true() -> bool {
    true
}

impl RegressionSpec {
    pub fn new<S: Into<String>>(dependent: S, regressors: impl IntoIterator<Item = S>) -> Self {
        Self {
            dependent: dependent.into(),
            regressors: regressors.into_iter().map(Into::into).collect(),
            include_intercept: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unique: BTreeSet<&String> = self.regressors.iter().collect();
        if unique.len() != self.regressors.len() {
            return Err(Error::InvalidInput("duplicate regressor names".into()));
        }
        if unique.contains(&self.dependent) {
            return Err(Error::InvalidInput(format!(
                "dependent variable '{}' is also a regressor",
                self.dependent
            )));
        }
        if self.regressors.is_empty() && !self.include_intercept {
            return Err(Error::InvalidInput("model has no parameters".into()));
        }
        Ok(())
    }

    fn variables(&self) -> Vec<&str> {
        std::iter::once(self.dependent.as_str())
            .chain(self.regressors.iter().map(String::as_str))
            .collect()
    }

    fn terms(&self) -> Vec<String> {
        let mut terms = Vec::with_capacity(self.regressors.len() + 1);
        if self.include_intercept {
            terms.push(INTERCEPT.to_string());
        }
        terms.extend(self.regressors.iter().cloned());
        terms
    }

    /// Same model without `dropped`.
    pub fn without(&self, dropped: &str) -> RegressionSpec {
        RegressionSpec {
            dependent: self.dependent.clone(),
            regressors: self
                .regressors
                .iter()
                .filter(|r| *r != dropped)
                .cloned()
                .collect(),
            include_intercept: self.include_intercept,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovarianceKind {
    /// Homoskedastic `σ² (X'X)⁻¹`.
    #[default]
    Classical,
    /// White sandwich with the `n / (n - k)` small-sample factor.
    Hc1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    pub dependent: String,
    /// Intercept first when present, then regressors in spec order.
    pub terms: Vec<String>,
    pub coefficients: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub t_values: Vec<f64>,
    pub p_values: Vec<f64>,
    pub r2: f64,
    pub adjusted_r2: f64,
    /// F test against the intercept-only model; `None` without slope terms.
    pub f_statistic: Option<f64>,
    pub f_p_value: Option<f64>,
    /// (model df, residual df) of the F test.
    pub f_df: (usize, usize),
    pub residual_std_error: f64,
    pub df_residual: usize,
    pub n_observations: usize,
    /// Row keys of the estimation sample.
    pub rows: Vec<String>,
    /// Row keys removed by listwise deletion.
    pub dropped_rows: Vec<String>,
    pub residuals: Vec<f64>,
    pub fitted: Vec<f64>,
    pub covariance: CovarianceKind,
}

impl RegressionResult {
    pub fn coefficient(&self, term: &str) -> Option<f64> {
        self.term_index(term).map(|i| self.coefficients[i])
    }

    pub fn term_index(&self, term: &str) -> Option<usize> {
        self.terms.iter().position(|t| t == term)
    }
}

/// Significance marks at p < 0.1 / 0.05 / 0.01.
pub fn stars(p: f64) -> &'static str {
    if p < 0.01 {
        "***"
    } else if p < 0.05 {
        "**"
    } else if p < 0.1 {
        "*"
    } else {
        ""
    }
}

struct Design {
    y: DVector<f64>,
    x: DMatrix<f64>,
    rows: Vec<String>,
    dropped: Vec<String>,
}

fn design(data: &DataTable, spec: &RegressionSpec, rows: &[usize]) -> Result<Design> {
    let y_col = data.column(&spec.dependent)?;
    let reg_cols = spec
        .regressors
        .iter()
        .map(|r| data.column(r))
        .collect::<Result<Vec<_>>>()?;
    let n = rows.len();
    let offset = spec.include_intercept as usize;
    let mut x = DMatrix::zeros(n, reg_cols.len() + offset);
    let mut y = DVector::zeros(n);
    for (i, &r) in rows.iter().enumerate() {
        y[i] = y_col[r].unwrap();
        if spec.include_intercept {
            x[(i, 0)] = 1.0;
        }
        for (j, col) in reg_cols.iter().enumerate() {
            x[(i, j + offset)] = col[r].unwrap();
        }
    }
    let kept: BTreeSet<usize> = rows.iter().copied().collect();
    Ok(Design {
        y,
        x,
        rows: rows.iter().map(|&r| data.keys[r].clone()).collect(),
        dropped: (0..data.keys.len())
            .filter(|r| !kept.contains(r))
            .map(|r| data.keys[r].clone())
            .collect(),
    })
}

/// Columns of `x` that are (numerically) in the span of the columns before
/// them, found from the diagonal of an unpivoted Householder QR.
fn collinear_columns(x: &DMatrix<f64>) -> Vec<usize> {
    let k = x.ncols();
    let r = x.clone().qr().r();
    (0..k)
        .filter(|&j| {
            let norm = x.column(j).norm();
            j >= r.nrows() || r[(j, j)].abs() <= RANK_TOLERANCE * norm.max(f64::MIN_POSITIVE)
        })
        .collect()
}

/// Share of variation explained by the column space of `x`. Aliased
/// columns are allowed.
fn projection_r2(y: &DVector<f64>, x: &DMatrix<f64>, centered: bool) -> f64 {
    let aliased = collinear_columns(x);
    let keep: Vec<usize> = (0..x.ncols()).filter(|j| !aliased.contains(j)).collect();
    let ssr = if keep.is_empty() {
        y.norm_squared()
    } else {
        let xk = x.select_columns(&keep);
        let q = xk.qr().q();
        let fitted = &q * (q.transpose() * y);
        (y - fitted).norm_squared()
    };
    1.0 - ssr / total_sum_of_squares(y, centered)
}

fn total_sum_of_squares(y: &DVector<f64>, centered: bool) -> f64 {
    if centered {
        let mean = y.mean();
        y.iter().map(|v| (v - mean).powi(2)).sum()
    } else {
        y.norm_squared()
    }
}

fn adjusted(r2: f64, n: usize, k: usize, intercept: bool) -> f64 {
    let base = n - intercept as usize;
    1.0 - (1.0 - r2) * base as f64 / (n - k) as f64
}

pub fn ols_fit(data: &DataTable, spec: &RegressionSpec) -> Result<RegressionResult> {
    ols_fit_with(data, spec, CovarianceKind::Classical)
}

/// Least-squares fit after listwise deletion of incomplete rows.
pub fn ols_fit_with(
    data: &DataTable,
    spec: &RegressionSpec,
    covariance: CovarianceKind,
) -> Result<RegressionResult> {
    spec.validate()?;
    let rows = data.complete_rows(&spec.variables())?;
    fit_rows(data, spec, &rows, covariance)
}

fn fit_rows(
    data: &DataTable,
    spec: &RegressionSpec,
    rows: &[usize],
    covariance: CovarianceKind,
) -> Result<RegressionResult> {
    let Design {
        y,
        x,
        rows,
        dropped,
    } = design(data, spec, rows)?;
    let terms = spec.terms();
    let (n, k) = x.shape();
    if n <= k {
        return Err(Error::InsufficientObservations { n, k });
    }
    let aliased = collinear_columns(&x);
    if !aliased.is_empty() {
        return Err(Error::RankDeficient {
            columns: aliased.into_iter().map(|j| terms[j].clone()).collect(),
        });
    }

    let qr = x.clone().qr();
    let q = qr.q();
    let r = qr.r();
    let qty = q.transpose() * &y;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::Computation("singular triangular factor".into()))?;
    let fitted = &x * &beta;
    let residuals = &y - &fitted;
    let ssr = residuals.norm_squared();
    let df_residual = n - k;
    let sigma2 = ssr / df_residual as f64;

    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or_else(|| Error::Computation("singular triangular factor".into()))?;
    let xtx_inv = &r_inv * r_inv.transpose();
    let cov = match covariance {
        CovarianceKind::Classical => &xtx_inv * sigma2,
        CovarianceKind::Hc1 => {
            let mut meat = DMatrix::zeros(k, k);
            for i in 0..n {
                let xi = x.row(i).transpose();
                meat += (&xi * xi.transpose()) * residuals[i].powi(2);
            }
            (&xtx_inv * meat * &xtx_inv) * (n as f64 / df_residual as f64)
        }
    };

    let t_dist = StudentsT::new(0.0, 1.0, df_residual as f64)
        .map_err(|e| Error::Computation(format!("t distribution: {e}")))?;
    let standard_errors: Vec<f64> = (0..k).map(|j| cov[(j, j)].sqrt()).collect();
    let t_values: Vec<f64> = (0..k).map(|j| beta[j] / standard_errors[j]).collect();
    let p_values = t_values
        .iter()
        .map(|t| if t.is_nan() { f64::NAN } else { 2.0 * t_dist.sf(t.abs()) })
        .collect();

    let centered = spec.include_intercept;
    let tss = total_sum_of_squares(&y, centered);
    if tss == 0.0 {
        return Err(Error::Computation(format!(
            "dependent variable '{}' has no variation",
            spec.dependent
        )));
    }
    let r2 = (1.0 - ssr / tss).clamp(0.0, 1.0);
    let adjusted_r2 = adjusted(r2, n, k, spec.include_intercept);
    let df_model = k - spec.include_intercept as usize;
    let (f_statistic, f_p_value) = if df_model == 0 {
        (None, None)
    } else {
        let f = (r2 / df_model as f64) / ((1.0 - r2) / df_residual as f64);
        let p = FisherSnedecor::new(df_model as f64, df_residual as f64)
            .map(|d| if f.is_finite() { d.sf(f) } else { 0.0 })
            .map_err(|e| Error::Computation(format!("F distribution: {e}")))?;
        (Some(f), Some(p))
    };

    Ok(RegressionResult {
        dependent: spec.dependent.clone(),
        terms,
        coefficients: beta.iter().copied().collect(),
        standard_errors,
        t_values,
        p_values,
        r2,
        adjusted_r2,
        f_statistic,
        f_p_value,
        f_df: (df_model, df_residual),
        residual_std_error: sigma2.sqrt(),
        df_residual,
        n_observations: n,
        rows,
        dropped_rows: dropped,
        residuals: residuals.iter().copied().collect(),
        fitted: fitted.iter().copied().collect(),
        covariance,
    })
}

/// Adjusted R² of `full` minus that of `full` without `dropped`, both on
/// the complete cases of `full`.
///
/// R² depends only on the column space, so aliased regressors are allowed
/// here; they still count towards the degrees of freedom.
pub fn semi_partial_r2(data: &DataTable, full: &RegressionSpec, dropped: &str) -> Result<f64> {
    full.validate()?;
    if !full.regressors.iter().any(|r| r == dropped) {
        return Err(Error::InvalidInput(format!(
            "'{dropped}' is not a regressor of the model"
        )));
    }
    let rows = data.complete_rows(&full.variables())?;
    let reduced = full.without(dropped);
    let mut adj = [0.0; 2];
    for (slot, spec) in [full, &reduced].into_iter().enumerate() {
        let d = design(data, spec, &rows)?;
        let (n, k) = d.x.shape();
        if n <= k {
            return Err(Error::InsufficientObservations { n, k });
        }
        let r2 = if k == 0 {
            0.0
        } else {
            projection_r2(&d.y, &d.x, spec.include_intercept)
        };
        adj[slot] = adjusted(r2, n, k, spec.include_intercept);
    }
    Ok(adj[0] - adj[1])
}

/// Column names of the two-stage procedure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TwoStageSpec {
    /// Dependent variable of stage 1 (rescaled headcount in the base year).
    pub base: String,
    /// Stage-1 regressor (EPRP).
    pub predictor: String,
    /// Dependent variable of stage 2 (rescaled headcount in the target year).
    pub target: String,
    pub controls: Vec<String>,
}

/// Name of the stage-1 residual column in stage 2.
pub const RESIDUAL_TERM: &str = "resid";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoStageResult {
    pub stage1: RegressionResult,
    pub stage2: RegressionResult,
}

/// Fails when the stage-1 residuals vanish to working precision, which
/// makes them a zero column in stage 2.
pub fn check_residuals(stage1: &RegressionResult) -> Result<()> {
    let ssr: f64 = stage1.residuals.iter().map(|r| r * r).sum();
    let y = DVector::from_iterator(
        stage1.fitted.len(),
        stage1.fitted.iter().zip(&stage1.residuals).map(|(f, r)| f + r),
    );
    let tss = total_sum_of_squares(&y, true);
    if ssr <= RANK_TOLERANCE * RANK_TOLERANCE * tss {
        return Err(Error::RankDeficient {
            columns: vec![RESIDUAL_TERM.to_string()],
        });
    }
    Ok(())
}

/// Stage 1 regresses `base` on `predictor`; stage 2 regresses `target` on
/// the stage-1 residuals plus `controls`. Both stages use the rows complete
/// in every column involved.
pub fn two_stage_residual(data: &DataTable, spec: &TwoStageSpec) -> Result<TwoStageResult> {
    let mut names = vec![spec.base.as_str(), spec.predictor.as_str(), spec.target.as_str()];
    names.extend(spec.controls.iter().map(String::as_str));
    let rows = data.complete_rows(&names)?;
    let sample = data.select_rows(&rows);
    let stage1 = ols_fit(
        &sample,
        &RegressionSpec::new(spec.base.as_str(), [spec.predictor.as_str()]),
    )?;
    check_residuals(&stage1)?;
    let mut with_resid = sample;
    with_resid.join_column(
        RESIDUAL_TERM,
        &stage1
            .rows
            .iter()
            .cloned()
            .zip(stage1.residuals.iter().map(|&r| Some(r)))
            .collect(),
    );
    let regressors = std::iter::once(RESIDUAL_TERM.to_string())
        .chain(spec.controls.iter().cloned())
        .collect();
    let stage2 = ols_fit(
        &with_resid,
        &RegressionSpec {
            dependent: spec.target.clone(),
            regressors,
            include_intercept: true,
        },
    )?;
    Ok(TwoStageResult { stage1, stage2 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElbowPoint {
    pub window: usize,
    /// Eligible countries whose every observed change over this window
    /// stayed above the change threshold.
    pub count: usize,
    /// Eligible countries with at least one observed span of this window.
    pub assessed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElbowResult {
    /// Countries whose mean headcount exceeds the average threshold.
    pub eligible: Vec<String>,
    pub points: Vec<ElbowPoint>,
    /// Windows longer than the panel's year span.
    pub skipped: Vec<usize>,
}

impl ElbowResult {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("window,count,assessed\n");
        for p in &self.points {
            let _ = writeln!(s, "{},{},{}", p.window, p.count, p.assessed);
        }
        s
    }
}

/// Counts high-poverty countries with persistent headcounts for each window.
///
/// A country is eligible when its mean headcount over all its observations
/// exceeds `avg_threshold`. For window `w`, every pair of observed years
/// `(t - w, t)` with a positive start value is a span; a country is counted
/// when it has at least one span and the relative change over every span is
/// above `change_threshold`.
pub fn elbow_analysis(
    poverty: &PovertyPanel,
    avg_threshold: f64,
    change_threshold: f64,
    windows: &[usize],
) -> Result<ElbowResult> {
    let years = poverty.years();
    let (Some(&first), Some(&last)) = (years.first(), years.last()) else {
        return Err(Error::InvalidInput("poverty panel is empty".into()));
    };
    let panel_span = (last - first) as usize;

    let series: Vec<(String, BTreeMap<i32, f64>)> = poverty
        .countries()
        .into_iter()
        .map(|c| {
            let s = poverty.series(&c).into_iter().collect();
            (c, s)
        })
        .filter(|(_, s): &(String, BTreeMap<i32, f64>)| {
            let mean = s.values().sum::<f64>() / s.len() as f64;
            mean > avg_threshold
        })
        .collect();

    let mut points = Vec::new();
    let mut skipped = Vec::new();
    for &w in windows {
        if w == 0 || w > panel_span {
            log::warn!("elbow window {w} skipped: panel spans {panel_span} years");
            skipped.push(w);
            continue;
        }
        let mut count = 0;
        let mut assessed = 0;
        for (_, s) in &series {
            let changes: Vec<f64> = s
                .iter()
                .filter_map(|(&t, &h)| {
                    let start = *s.get(&(t - w as i32))?;
                    (start > 0.0).then(|| (h - start) / start)
                })
                .collect();
            if changes.is_empty() {
                continue;
            }
            assessed += 1;
            if changes.iter().all(|&c| c > change_threshold) {
                count += 1;
            }
        }
        points.push(ElbowPoint {
            window: w,
            count,
            assessed,
        });
    }
    Ok(ElbowResult {
        eligible: series.into_iter().map(|(c, _)| c).collect(),
        points,
        skipped,
    })
}

/// Union of the terms of several models, intercept last as in the usual
/// published layout.
fn table_terms(models: &[(String, RegressionResult)]) -> Vec<String> {
    let mut terms: Vec<String> = Vec::new();
    for (_, m) in models {
        for t in &m.terms {
            if t != INTERCEPT && !terms.contains(t) {
                terms.push(t.clone());
            }
        }
    }
    if models.iter().any(|(_, m)| m.terms.iter().any(|t| t == INTERCEPT)) {
        terms.push(INTERCEPT.to_string());
    }
    terms
}

/// Wide CSV with one column per model: each term takes an estimate row
/// (with stars) and a standard-error row, followed by fit statistics.
pub fn regression_table_csv(models: &[(String, RegressionResult)]) -> String {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["term".to_string()];
    header.extend(models.iter().map(|(name, _)| name.clone()));
    wtr.write_record(&header).unwrap();
    for term in table_terms(models) {
        let mut est = vec![term.clone()];
        let mut se = vec![String::new()];
        for (_, m) in models {
            match m.term_index(&term) {
                Some(i) => {
                    est.push(format!("{}{}", fmt(m.coefficients[i]), stars(m.p_values[i])));
                    se.push(format!("({})", fmt(m.standard_errors[i])));
                }
                None => {
                    est.push(String::new());
                    se.push(String::new());
                }
            }
        }
        wtr.write_record(&est).unwrap();
        wtr.write_record(&se).unwrap();
    }
    let stat_rows: [(&str, fn(&RegressionResult) -> String); 7] = [
        ("observations", |m| m.n_observations.to_string()),
        ("r2", |m| fmt(m.r2)),
        ("adjusted_r2", |m| fmt(m.adjusted_r2)),
        ("residual_std_error", |m| fmt(m.residual_std_error)),
        ("df_residual", |m| m.df_residual.to_string()),
        ("f_statistic", |m| {
            m.f_statistic
                .map(|f| format!("{}{}", fmt(f), stars(m.f_p_value.unwrap_or(1.0))))
                .unwrap_or_default()
        }),
        ("f_df", |m| format!("{};{}", m.f_df.0, m.f_df.1)),
    ];
    for (label, get) in stat_rows {
        let mut row = vec![label.to_string()];
        row.extend(models.iter().map(|(_, m)| get(m)));
        wtr.write_record(&row).unwrap();
    }
    String::from_utf8(wtr.into_inner().unwrap()).unwrap()
}

/// Aligned plain-text version of [`regression_table_csv`] with three
/// decimals.
pub fn regression_table_text(dependent_label: &str, models: &[(String, RegressionResult)]) -> String {
    let terms = table_terms(models);
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut header = vec![String::new()];
    header.extend(models.iter().map(|(n, _)| n.clone()));
    rows.push(header);
    for term in &terms {
        let mut est = vec![if term == INTERCEPT { "Constant".to_string() } else { term.clone() }];
        let mut se = vec![String::new()];
        for (_, m) in models {
            match m.term_index(term) {
                Some(i) => {
                    est.push(format!("{:.3}{}", m.coefficients[i], stars(m.p_values[i])));
                    se.push(format!("({:.3})", m.standard_errors[i]));
                }
                None => {
                    est.push(String::new());
                    se.push(String::new());
                }
            }
        }
        rows.push(est);
        rows.push(se);
    }
    let stats: Vec<Vec<String>> = vec![
        std::iter::once("Observations".to_string())
            .chain(models.iter().map(|(_, m)| m.n_observations.to_string()))
            .collect(),
        std::iter::once("R2".to_string())
            .chain(models.iter().map(|(_, m)| format!("{:.3}", m.r2)))
            .collect(),
        std::iter::once("Adjusted R2".to_string())
            .chain(models.iter().map(|(_, m)| format!("{:.3}", m.adjusted_r2)))
            .collect(),
        std::iter::once("Residual Std. Error".to_string())
            .chain(
                models
                    .iter()
                    .map(|(_, m)| format!("{:.3} (df = {})", m.residual_std_error, m.df_residual)),
            )
            .collect(),
        std::iter::once("F Statistic".to_string())
            .chain(models.iter().map(|(_, m)| match m.f_statistic {
                Some(f) => format!(
                    "{:.3}{} (df = {}; {})",
                    f,
                    stars(m.f_p_value.unwrap_or(1.0)),
                    m.f_df.0,
                    m.f_df.1
                ),
                None => String::new(),
            }))
            .collect(),
    ];

    let ncols = models.len() + 1;
    let mut widths = vec![0; ncols];
    for row in rows.iter().chain(&stats) {
        for (j, cell) in row.iter().enumerate() {
            widths[j] = widths[j].max(cell.chars().count());
        }
    }
    let total: usize = widths.iter().sum::<usize>() + 2 * (ncols - 1);
    let rule = "=".repeat(total);
    let thin = "-".repeat(total);
    let line = |row: &[String]| {
        let cells: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(j, c)| {
                if j == 0 {
                    format!("{c:<w$}", w = widths[0])
                } else {
                    format!("{c:>w$}", w = widths[j])
                }
            })
            .collect();
        cells.join("  ").trim_end().to_string()
    };

    let mut out = String::new();
    let _ = writeln!(out, "{rule}");
    let _ = writeln!(out, "Dependent variable: {dependent_label}");
    let _ = writeln!(out, "{thin}");
    let _ = writeln!(out, "{}", line(&rows[0]));
    let _ = writeln!(out, "{thin}");
    for row in &rows[1..] {
        let _ = writeln!(out, "{}", line(row));
    }
    let _ = writeln!(out, "{thin}");
    for row in &stats {
        let _ = writeln!(out, "{}", line(row));
    }
    let _ = writeln!(out, "{rule}");
    let _ = writeln!(out, "Note: * p<0.1; ** p<0.05; *** p<0.01");
    out
}
