//! Batch runs: the full pipeline and each of its stages on its own.
//!
//! Every stage is a function from in-memory inputs to in-memory outputs.
//! The pipeline chains them and writes the reports; a single stage reads
//! its inputs from the stage files of earlier stages (exact number format)
//! and writes its own, so both routes produce the same reports bit for bit.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::country_metrics::{self, CountryInputs, CountryMetricsRow};
use crate::econometrics::{
    self, elbow_analysis, ols_fit_with, semi_partial_r2, CovarianceKind, DataTable, ElbowResult,
    RegressionResult, RegressionSpec, RESIDUAL_TERM,
};
use crate::error::StageExt;
use crate::ingest::{
    self, AlignedDataset, AlignmentReport, CodeIndex, ControlTable, ExportPanel, ExportSchema,
    IngestReport, JoinMode, PovertyPanel, PovertySchema,
};
use crate::matrix_io::{self, exact_opt, parse_cell, parse_opt_cell, save_matrix, save_table, Table};
use crate::numfmt::{fmt, fmt_opt, format_exact};
use crate::poverty_indices::{self, AxiomReport, IncomeDistribution, IndexReport, Measure};
use crate::poverty_product::{
    build_phi_star, compute_ppi, mean_eigenpoverty, mean_ppi, solve_eigenpoverty, EigenOptions,
    EigenpovertyVector, ProductPovertyVector,
};
use crate::product_space::{
    self, compute_proximity, filter_graph, normalize_weights, pool_proximity, GraphFormat,
    NodeAttribute, PhiMatrix, ProductSpaceGraph, ProximityMatrix,
};
use crate::rca::{self, AdvantageMatrix};
use crate::{Error, Result, YearSpan};

/// Subdirectory of the output directory holding stage files.
pub const STAGES_DIR: &str = "stages";
pub const MANIFEST: &str = "manifest.json";

/// One regression of the report table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub name: String,
    pub dependent: String,
    pub regressors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub exports: Option<PathBuf>,
    pub poverty: Option<PathBuf>,
    pub controls: Option<PathBuf>,
    /// Income microdata for the `indices` step.
    pub incomes: Option<PathBuf>,
    pub poverty_line: Option<f64>,
    /// Count incomes equal to the poverty line as poor.
    pub inclusive_line: bool,
    #[serde(with = "span_string")]
    pub years: YearSpan,
    pub base_year: i32,
    pub target_year: i32,
    pub tau: f64,
    /// Binarize the averaged advantage matrix by majority vote.
    pub majority_vote: bool,
    /// Use the mean of the yearly proximity matrices in every year.
    pub pool_proximity: bool,
    pub viz_threshold: f64,
    pub eigen: EigenOptions,
    /// Empty means the default table: PRP with all controls, the stage-1
    /// residual alone, and the residual with all controls.
    pub models: Vec<ModelConfig>,
    pub covariance: CovarianceKind,
    pub join: JoinMode,
    /// Poverty headcounts are percentages.
    pub percent: bool,
    pub export_columns: ExportSchema,
    pub poverty_columns: PovertySchema,
    pub control_country_column: String,
    pub elbow_windows: Vec<usize>,
    pub elbow_mean_threshold: f64,
    pub elbow_change_threshold: f64,
    pub format: GraphFormat,
    pub out_dir: PathBuf,
    /// Also write the stage files during a pipeline run.
    pub keep_intermediates: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            exports: None,
            poverty: None,
            controls: None,
            incomes: None,
            poverty_line: None,
            inclusive_line: false,
            years: YearSpan {
                start: 1995,
                end: 2010,
            },
            base_year: 2010,
            target_year: 2018,
            tau: 1.0,
            majority_vote: false,
            pool_proximity: false,
            viz_threshold: 0.45,
            eigen: EigenOptions::default(),
            models: Vec::new(),
            covariance: CovarianceKind::Classical,
            join: JoinMode::RetainTrade,
            percent: false,
            export_columns: ExportSchema::default(),
            poverty_columns: PovertySchema::default(),
            control_country_column: "country".into(),
            elbow_windows: (1..=15).collect(),
            elbow_mean_threshold: 0.5,
            elbow_change_threshold: -0.03,
            format: GraphFormat::Graphml,
            out_dir: PathBuf::from("out"),
            keep_intermediates: false,
        }
    }
}

mod span_string {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::YearSpan;

    pub fn serialize<S: Serializer>(span: &YearSpan, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(span)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<YearSpan, D::Error> {
        String::deserialize(d)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.target_year <= self.base_year {
            return bad(format!(
                "target poverty year {} must be after base year {}",
                self.target_year, self.base_year
            ));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return bad(format!("tau must be positive, got {}", self.tau));
        }
        if !(self.viz_threshold >= 0.0) {
            return bad(format!(
                "viz threshold must be nonnegative, got {}",
                self.viz_threshold
            ));
        }
        if !(self.eigen.tolerance > 0.0) || self.eigen.max_iterations == 0 {
            return bad("eigen tolerance and iteration cap must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.eigen.damping) {
            return bad(format!("damping must lie in [0, 1], got {}", self.eigen.damping));
        }
        if let Some(z) = self.poverty_line {
            if !(z > 0.0 && z.is_finite()) {
                return bad(format!("poverty line must be positive, got {z}"));
            }
        }
        Ok(())
    }

    /// The configured models, or the default table for `controls`.
    pub fn models(&self, controls: &[String]) -> Vec<ModelConfig> {
        if !self.models.is_empty() {
            return self.models.clone();
        }
        let with = |first: &str| {
            std::iter::once(first.to_string())
                .chain(controls.iter().cloned())
                .collect::<Vec<_>>()
        };
        vec![
            ModelConfig {
                name: "(1)".into(),
                dependent: "rh_target".into(),
                regressors: with("prp"),
            },
            ModelConfig {
                name: "(2)".into(),
                dependent: "rh_target".into(),
                regressors: vec![RESIDUAL_TERM.into()],
            },
            ModelConfig {
                name: "(3)".into(),
                dependent: "rh_target".into(),
                regressors: with(RESIDUAL_TERM),
            },
        ]
    }

    pub fn stages_dir(&self) -> PathBuf {
        self.out_dir.join(STAGES_DIR)
    }

    fn input<'a>(&self, path: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
        path.as_deref()
            .ok_or_else(|| Error::Config(format!("no {what} file configured")))
    }

    fn poverty_schema(&self) -> PovertySchema {
        PovertySchema {
            percent: self.percent || self.poverty_columns.percent,
            ..self.poverty_columns.clone()
        }
    }
}

/// Loaded and aligned inputs with their ingest accounting.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub data: AlignedDataset,
    pub reports: Vec<IngestReport>,
}

pub fn load_inputs(cfg: &RunConfig) -> Result<Inputs> {
    let (exports, er) = ingest::load_exports(
        cfg.input(&cfg.exports, "exports")?,
        &cfg.export_columns,
        Some(cfg.years),
    )?;
    let (poverty, pr) = load_poverty_panel(cfg)?;
    let mut reports = vec![er, pr];
    let controls = match &cfg.controls {
        Some(path) => {
            let (table, cr) = ingest::load_controls(path, &cfg.control_country_column)?;
            reports.push(cr);
            Some(table)
        }
        None => None,
    };
    let data = ingest::align(exports, poverty, controls, cfg.join)?;
    Ok(Inputs { data, reports })
}

fn load_poverty_panel(cfg: &RunConfig) -> Result<(PovertyPanel, IngestReport)> {
    ingest::load_poverty(cfg.input(&cfg.poverty, "poverty")?, &cfg.poverty_schema())
}

/// Yearly binary advantage matrices and their mean.
#[derive(Debug, Clone)]
pub struct AdvantageStage {
    pub yearly: Vec<AdvantageMatrix>,
    pub mean: AdvantageMatrix,
}

pub fn stage_rca(panel: &ExportPanel, cfg: &RunConfig) -> Result<AdvantageStage> {
    let yearly = rca::yearly_advantage(panel, cfg.years, cfg.tau)?;
    advantage_stage(yearly)
}

fn advantage_stage(yearly: Vec<AdvantageMatrix>) -> Result<AdvantageStage> {
    let mean = rca::mean_advantage(&yearly)?;
    Ok(AdvantageStage { yearly, mean })
}

#[derive(Debug, Clone)]
pub struct ProximityStage {
    pub years: Vec<i32>,
    pub proximity: Vec<ProximityMatrix>,
    /// Weights used for Eigenpoverty in each year.
    pub phi: Vec<PhiMatrix>,
    /// Mean of the yearly proximities; drives the exported graph.
    pub pooled: ProximityMatrix,
}

impl ProximityStage {
    pub fn phi_of(&self, year: i32) -> Option<&PhiMatrix> {
        self.years.iter().position(|&y| y == year).map(|i| &self.phi[i])
    }
}

pub fn stage_proximity(yearly: &[AdvantageMatrix], pool: bool) -> Result<ProximityStage> {
    let proximity = yearly
        .par_iter()
        .map(compute_proximity)
        .collect::<Result<Vec<_>>>()?;
    let pooled = pool_proximity(&proximity)?;
    let phi = if pool {
        vec![normalize_weights(&pooled); proximity.len()]
    } else {
        proximity.iter().map(normalize_weights).collect()
    };
    Ok(ProximityStage {
        years: yearly.iter().map(|m| m.span.start).collect(),
        proximity,
        phi,
        pooled,
    })
}

/// PPI of every trade year that has poverty data, and their mean.
#[derive(Debug, Clone)]
pub struct PpiStage {
    pub yearly: Vec<(i32, ProductPovertyVector)>,
    pub mean: ProductPovertyVector,
}

pub fn stage_ppi(
    panel: &ExportPanel,
    poverty: &PovertyPanel,
    yearly: &[AdvantageMatrix],
) -> Result<PpiStage> {
    let mut out = Vec::new();
    for m in yearly {
        let year = m.span.start;
        if !poverty.has_year(year) {
            log::warn!("no poverty data for {year}; PPI and Eigenpoverty skip that year");
            continue;
        }
        out.push((year, compute_ppi(panel, m, poverty, year)?));
    }
    if out.is_empty() {
        return Err(Error::InvalidInput(
            "no year of the trade range has poverty data".into(),
        ));
    }
    let mean = mean_ppi(&out.iter().map(|(_, v)| v.clone()).collect::<Vec<_>>())?;
    Ok(PpiStage { yearly: out, mean })
}

#[derive(Debug, Clone)]
pub struct EigenStage {
    pub yearly: Vec<(i32, EigenpovertyVector)>,
    /// Per-product mean Eigenpoverty.
    pub mean: Vec<f64>,
}

pub fn stage_eigenpoverty(
    phi: &ProximityStage,
    ppi: &PpiStage,
    opts: &EigenOptions,
) -> Result<EigenStage> {
    let phi_by_year: Vec<(i32, &PhiMatrix)> = ppi
        .yearly
        .iter()
        .map(|(year, _)| {
            phi.phi_of(*year)
                .map(|p| (*year, p))
                .ok_or_else(|| Error::InvalidInput(format!("no product-space weights for {year}")))
        })
        .collect::<Result<_>>()?;
    eigen_from_parts(&phi_by_year, ppi, opts)
}

fn eigen_from_parts(
    phi: &[(i32, &PhiMatrix)],
    ppi: &PpiStage,
    opts: &EigenOptions,
) -> Result<EigenStage> {
    let yearly = phi
        .par_iter()
        .zip(ppi.yearly.par_iter())
        .map(|((year, phi), (_, v))| {
            let star = build_phi_star(phi, &v.prp_filled())?;
            let e = solve_eigenpoverty(&star, opts).map_err(|e| match e {
                Error::Computation(m) => Error::Computation(format!("{year}: {m}")),
                other => other,
            })?;
            log::debug!("eigenpoverty {year}: {} iterations", e.iterations);
            Ok((*year, e))
        })
        .collect::<Result<Vec<_>>>()?;
    let mean = mean_eigenpoverty(&yearly.iter().map(|(_, e)| e.clone()).collect::<Vec<_>>())?;
    Ok(EigenStage { yearly, mean })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProductRow {
    pub product: String,
    pub ppi: Option<f64>,
    pub prp: Option<f64>,
    pub eigenpoverty: f64,
    /// Share of world exports over the trade range.
    pub trade_share: f64,
}

#[derive(Debug, Clone)]
pub struct MetricsStage {
    pub countries: Vec<CountryMetricsRow>,
    pub products: Vec<ProductRow>,
    pub graph: ProductSpaceGraph,
}

pub fn stage_metrics(
    data: &AlignedDataset,
    advantage: &AdvantageMatrix,
    ppi: &PpiStage,
    eigen: &EigenStage,
    pooled: &ProximityMatrix,
    cfg: &RunConfig,
) -> Result<MetricsStage> {
    let index = data.index();
    let weights = if cfg.majority_vote {
        advantage.majority_vote()
    } else {
        advantage.clone()
    };
    let countries = country_metrics::country_metrics(&CountryInputs {
        countries: &index.countries,
        advantage: &weights,
        ppi: &ppi.mean,
        eigenpoverty: &eigen.mean,
        poverty: &data.poverty,
        poverty_missing: &data.poverty_missing,
        base_year: cfg.base_year,
        target_year: cfg.target_year,
    })?;

    let mut volume = vec![0.0; index.products.len()];
    for e in data.exports.entries() {
        if cfg.years.contains(e.year) {
            volume[index.products.id(&e.product).expect("indexed product")] += e.value;
        }
    }
    let total: f64 = volume.iter().sum();
    let prp = ppi.mean.prp();
    let products: Vec<ProductRow> = index
        .products
        .codes()
        .iter()
        .enumerate()
        .map(|(p, code)| ProductRow {
            product: code.clone(),
            ppi: ppi.mean.ppi[p],
            prp: prp[p],
            eigenpoverty: eigen.mean[p],
            trade_share: volume[p] / total,
        })
        .collect();

    let mut graph = filter_graph(pooled, cfg.viz_threshold, &index.products)?;
    for (node, row) in graph.nodes.iter_mut().zip(&products) {
        // undefined PPI is exported as NaN so the attribute stays complete
        node.ppi = Some(row.ppi.unwrap_or(f64::NAN));
        node.eigenpoverty = Some(row.eigenpoverty);
        node.trade_share = Some(row.trade_share);
    }
    Ok(MetricsStage {
        countries,
        products,
        graph,
    })
}

const GRAPH_ATTRIBUTES: [NodeAttribute; 4] = [
    NodeAttribute::Ppi,
    NodeAttribute::PpiSqrt,
    NodeAttribute::Eigenpoverty,
    NodeAttribute::TradeShare,
];

#[derive(Debug, Clone, Serialize)]
pub struct RegressionStage {
    pub dependent: String,
    pub models: Vec<(String, RegressionResult)>,
    /// First stage `rh_base ~ eprp`, present when a model uses the residual.
    pub stage1: Option<RegressionResult>,
    /// Per model, the semi-partial R² of each regressor.
    pub semi_partial_r2: BTreeMap<String, BTreeMap<String, f64>>,
}

pub fn regression_table(rows: &[CountryMetricsRow], controls: &ControlTable) -> Result<DataTable> {
    let mut table = DataTable::new(rows.iter().map(|r| r.country.clone()).collect());
    table.add_column("prp", rows.iter().map(|r| r.prp).collect())?;
    table.add_column("eprp", rows.iter().map(|r| r.eprp).collect())?;
    table.add_column("rh_base", rows.iter().map(|r| r.rh_base).collect())?;
    table.add_column("rh_target", rows.iter().map(|r| r.rh_target).collect())?;
    for name in controls.columns() {
        let values = rows.iter().map(|r| controls.get(&r.country, name)).collect();
        table.add_column(name, values)?;
    }
    Ok(table)
}

/// Fits the configured models on the countries complete in every column
/// any of them uses.
pub fn stage_regress(
    rows: &[CountryMetricsRow],
    controls: &ControlTable,
    cfg: &RunConfig,
) -> Result<RegressionStage> {
    let table = regression_table(rows, controls)?;
    let models = cfg.models(controls.columns());
    let needs_resid = models
        .iter()
        .any(|m| m.regressors.iter().any(|r| r == RESIDUAL_TERM));
    let mut used: Vec<&str> = Vec::new();
    for m in &models {
        for v in std::iter::once(&m.dependent).chain(&m.regressors) {
            if v != RESIDUAL_TERM && !used.contains(&v.as_str()) {
                used.push(v);
            }
        }
    }
    if needs_resid {
        for v in ["rh_base", "eprp"] {
            if !used.contains(&v) {
                used.push(v);
            }
        }
    }
    let complete = table.complete_rows(&used)?;
    log::info!(
        "regression sample: {} of {} countries",
        complete.len(),
        table.keys().len()
    );
    let mut sample = table.select_rows(&complete);

    let stage1 = if needs_resid {
        let fit = ols_fit_with(
            &sample,
            &RegressionSpec::new("rh_base", ["eprp"]),
            cfg.covariance,
        )?;
        econometrics::check_residuals(&fit)?;
        let resid = fit
            .rows
            .iter()
            .cloned()
            .zip(fit.residuals.iter().map(|&r| Some(r)))
            .collect();
        sample.join_column(RESIDUAL_TERM, &resid);
        Some(fit)
    } else {
        None
    };

    let mut fitted = Vec::with_capacity(models.len());
    let mut semi = BTreeMap::new();
    for m in &models {
        let spec = RegressionSpec {
            dependent: m.dependent.clone(),
            regressors: m.regressors.clone(),
            include_intercept: true,
        };
        let fit = ols_fit_with(&sample, &spec, cfg.covariance)
            .map_err(|e| model_error(&m.name, e))?;
        let mut parts = BTreeMap::new();
        for r in &m.regressors {
            parts.insert(r.clone(), semi_partial_r2(&sample, &spec, r)?);
        }
        semi.insert(m.name.clone(), parts);
        fitted.push((m.name.clone(), fit));
    }
    let dependent = if models.iter().all(|m| m.dependent == models[0].dependent) {
        models[0].dependent.clone()
    } else {
        "see models".into()
    };
    Ok(RegressionStage {
        dependent,
        models: fitted,
        stage1,
        semi_partial_r2: semi,
    })
}

fn model_error(name: &str, e: Error) -> Error {
    match e {
        Error::InvalidInput(m) => Error::InvalidInput(format!("model {name}: {m}")),
        Error::Computation(m) => Error::Computation(format!("model {name}: {m}")),
        other => other,
    }
}

pub fn stage_elbow(poverty: &PovertyPanel, cfg: &RunConfig) -> Result<ElbowResult> {
    elbow_analysis(
        poverty,
        cfg.elbow_mean_threshold,
        cfg.elbow_change_threshold,
        &cfg.elbow_windows,
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct IndicesOutput {
    pub indices: IndexReport,
    pub axioms: Vec<AxiomReport>,
}

pub fn stage_indices(cfg: &RunConfig) -> Result<IndicesOutput> {
    let path = cfg.input(&cfg.incomes, "incomes")?;
    let z = cfg
        .poverty_line
        .ok_or_else(|| Error::Config("the indices step needs a poverty line".into()))?;
    let d = IncomeDistribution::new(poverty_indices::load_incomes(path)?, z)?
        .inclusive(cfg.inclusive_line);
    let axioms = [
        Measure::Headcount,
        Measure::PovertyGap,
        Measure::Fgt(2.0),
        Measure::Watts,
    ]
    .into_iter()
    .map(|m| poverty_indices::axiom_suite(m, &d))
    .collect::<Result<_>>()?;
    Ok(IndicesOutput {
        indices: poverty_indices::index_report(&d),
        axioms,
    })
}

/// Everything a pipeline run computes.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub inputs: Inputs,
    pub advantage: AdvantageStage,
    pub proximity: ProximityStage,
    pub ppi: PpiStage,
    pub eigen: EigenStage,
    pub metrics: MetricsStage,
    pub regressions: RegressionStage,
    pub elbow: ElbowResult,
    pub indices: Option<IndicesOutput>,
}

/// Runs every stage in memory without writing anything.
pub fn compute(cfg: &RunConfig) -> Result<PipelineOutput> {
    cfg.validate()?;
    let inputs = load_inputs(cfg).stage("ingest")?;
    let data = &inputs.data;
    let advantage = stage_rca(&data.exports, cfg).stage("rca")?;
    let proximity = stage_proximity(&advantage.yearly, cfg.pool_proximity).stage("proximity")?;
    let ppi = stage_ppi(&data.exports, &data.poverty, &advantage.yearly).stage("ppi")?;
    let eigen = stage_eigenpoverty(&proximity, &ppi, &cfg.eigen).stage("eigenpoverty")?;
    let metrics = stage_metrics(
        data,
        &advantage.mean,
        &ppi,
        &eigen,
        &proximity.pooled,
        cfg,
    )
    .stage("metrics")?;
    let regressions = stage_regress(&metrics.countries, &data.controls, cfg).stage("regress")?;
    let elbow = stage_elbow(&data.poverty, cfg).stage("elbow")?;
    let indices = match cfg.incomes {
        Some(_) => Some(stage_indices(cfg).stage("indices")?),
        None => None,
    };
    Ok(PipelineOutput {
        inputs,
        advantage,
        proximity,
        ppi,
        eigen,
        metrics,
        regressions,
        elbow,
        indices,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

pub fn digest(path: &Path, label: String) -> Result<FileDigest> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(FileDigest {
        path: label,
        bytes: bytes.len() as u64,
        sha256: hex::encode(Sha256::digest(&bytes)),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Complete,
    Incomplete,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub status: RunStatus,
    pub error: Option<String>,
    pub config: RunConfig,
    pub inputs: Vec<FileDigest>,
    /// Files written by the run, relative to the output directory.
    pub outputs: Vec<FileDigest>,
}

/// Outcome of a successful pipeline run.
#[derive(Debug)]
pub struct RunSummary {
    pub output: PipelineOutput,
    /// Written files, manifest excluded.
    pub files: Vec<PathBuf>,
}

/// Computes everything, then writes the reports and the manifest.
///
/// A failed run leaves only a manifest marked incomplete; files written
/// before a write failure are removed.
pub fn run_pipeline(cfg: &RunConfig) -> Result<RunSummary> {
    let out = &cfg.out_dir;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let output = match compute(cfg) {
        Ok(o) => o,
        Err(e) => {
            write_manifest(cfg, &[], Some(&e))?;
            return Err(e);
        }
    };
    let mut files = Vec::new();
    if let Err(e) = write_outputs(&output, cfg, &mut files) {
        for f in &files {
            let _ = fs::remove_file(f);
        }
        write_manifest(cfg, &[], Some(&e))?;
        return Err(e);
    }
    write_manifest(cfg, &files, None)?;
    Ok(RunSummary { output, files })
}

fn write_outputs(o: &PipelineOutput, cfg: &RunConfig, files: &mut Vec<PathBuf>) -> Result<()> {
    let out = &cfg.out_dir;
    let index = o.inputs.data.index();
    if cfg.keep_intermediates {
        let dir = cfg.stages_dir();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        write_advantage(&dir, &index.countries, &index.products, &o.advantage, files)?;
        write_proximity(&dir, &index.products, &o.proximity, files)?;
        write_ppi(&dir, &index.products, &o.ppi, files)?;
        write_eigen(&dir, &index.products, &o.eigen, files)?;
        write_country_stage(&dir, &o.metrics.countries, files)?;
    }
    write_metrics_reports(out, &o.metrics, &o.ppi, &o.eigen, &index.products, cfg.format, files)?;
    write_regressions(out, &o.regressions, files)?;
    write_elbow(out, &o.elbow, files)?;
    if let Some(ix) = &o.indices {
        write_json(&out.join("indices.json"), ix, files)?;
    }
    #[derive(Serialize)]
    struct IngestSummary<'a> {
        files: &'a [IngestReport],
        alignment: &'a AlignmentReport,
    }
    write_json(
        &out.join("ingest_report.json"),
        &IngestSummary {
            files: &o.inputs.reports,
            alignment: &o.inputs.data.report,
        },
        files,
    )
}

fn write_manifest(cfg: &RunConfig, files: &[PathBuf], error: Option<&Error>) -> Result<()> {
    let mut inputs = Vec::new();
    for p in [&cfg.exports, &cfg.poverty, &cfg.controls, &cfg.incomes]
        .into_iter()
        .flatten()
    {
        if p.is_file() {
            inputs.push(digest(p, p.display().to_string())?);
        }
    }
    let mut outputs = Vec::new();
    for f in files {
        let label = f
            .strip_prefix(&cfg.out_dir)
            .unwrap_or(f)
            .to_string_lossy()
            .replace('\\', "/");
        outputs.push(digest(f, label)?);
    }
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        status: if error.is_none() {
            RunStatus::Complete
        } else {
            RunStatus::Incomplete
        },
        error: error.map(|e| e.to_string()),
        config: cfg.clone(),
        inputs,
        outputs,
    };
    let path = cfg.out_dir.join(MANIFEST);
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::Computation(format!("manifest: {e}")))?;
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T, files: &mut Vec<PathBuf>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Computation(format!("{}: {e}", path.display())))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))?;
    files.push(path.to_path_buf());
    Ok(())
}

fn table(path: PathBuf, header: &[&str], rows: &[Vec<String>], files: &mut Vec<PathBuf>) -> Result<()> {
    save_table(&path, header, rows)?;
    files.push(path);
    Ok(())
}

fn matrix(
    path: PathBuf,
    corner: &str,
    rows: &[String],
    cols: &[String],
    values: &DMatrix<f64>,
    files: &mut Vec<PathBuf>,
) -> Result<()> {
    save_matrix(&path, corner, rows, cols, values)?;
    files.push(path);
    Ok(())
}

fn advantage_file(dir: &Path, year: i32) -> PathBuf {
    dir.join(format!("advantage_{year}.csv"))
}

fn proximity_file(dir: &Path, year: i32) -> PathBuf {
    dir.join(format!("proximity_{year}.csv"))
}

fn phi_file(dir: &Path, year: i32) -> PathBuf {
    dir.join(format!("phi_{year}.csv"))
}

const POOLED_FILE: &str = "proximity_pooled.csv";
const PPI_FILE: &str = "ppi_by_year.csv";
const EIGEN_FILE: &str = "eigenpoverty_by_year.csv";
const EIGENVALUES_FILE: &str = "eigenvalues.csv";
const COUNTRY_FILE: &str = "country_metrics.csv";

fn write_advantage(
    dir: &Path,
    countries: &CodeIndex,
    products: &CodeIndex,
    stage: &AdvantageStage,
    files: &mut Vec<PathBuf>,
) -> Result<()> {
    for m in &stage.yearly {
        matrix(
            advantage_file(dir, m.span.start),
            "country",
            countries.codes(),
            products.codes(),
            &m.values,
            files,
        )?;
    }
    Ok(())
}

fn write_proximity(
    dir: &Path,
    products: &CodeIndex,
    stage: &ProximityStage,
    files: &mut Vec<PathBuf>,
) -> Result<()> {
    let codes = products.codes();
    for (i, &year) in stage.years.iter().enumerate() {
        matrix(proximity_file(dir, year), "product", codes, codes, &stage.proximity[i].values, files)?;
        matrix(phi_file(dir, year), "product", codes, codes, &stage.phi[i].values, files)?;
    }
    matrix(dir.join(POOLED_FILE), "product", codes, codes, &stage.pooled.values, files)
}

fn write_ppi(dir: &Path, products: &CodeIndex, stage: &PpiStage, files: &mut Vec<PathBuf>) -> Result<()> {
    let mut rows = Vec::new();
    for (year, v) in &stage.yearly {
        for (code, ppi) in products.codes().iter().zip(&v.ppi) {
            rows.push(vec![year.to_string(), code.clone(), exact_opt(*ppi)]);
        }
    }
    table(dir.join(PPI_FILE), &["year", "product", "ppi"], &rows, files)
}

fn write_eigen(dir: &Path, products: &CodeIndex, stage: &EigenStage, files: &mut Vec<PathBuf>) -> Result<()> {
    let mut rows = Vec::new();
    let mut values = Vec::new();
    for (year, e) in &stage.yearly {
        for (p, code) in products.codes().iter().enumerate() {
            rows.push(vec![
                year.to_string(),
                code.clone(),
                format_exact(e.e_prime[p]),
                e.in_component[p].to_string(),
            ]);
        }
        values.push(vec![
            year.to_string(),
            format_exact(e.eigenvalue),
            e.iterations.to_string(),
            format_exact(e.residual),
        ]);
    }
    table(
        dir.join(EIGEN_FILE),
        &["year", "product", "e_prime", "in_component"],
        &rows,
        files,
    )?;
    table(
        dir.join(EIGENVALUES_FILE),
        &["year", "eigenvalue", "iterations", "residual"],
        &values,
        files,
    )
}

const COUNTRY_HEADER: [&str; 8] = [
    "country",
    "prp",
    "eprp",
    "rh_base",
    "rh_target",
    "diversity",
    "poverty_missing",
    "no_advantage",
];

fn country_rows(rows: &[CountryMetricsRow], num: fn(f64) -> String) -> Vec<Vec<String>> {
    let opt = |x: Option<f64>| x.map(num).unwrap_or_default();
    rows.iter()
        .map(|r| {
            vec![
                r.country.clone(),
                opt(r.prp),
                opt(r.eprp),
                opt(r.rh_base),
                opt(r.rh_target),
                num(r.diversity),
                r.poverty_missing.to_string(),
                r.no_advantage.to_string(),
            ]
        })
        .collect()
}

fn write_country_stage(dir: &Path, rows: &[CountryMetricsRow], files: &mut Vec<PathBuf>) -> Result<()> {
    table(dir.join(COUNTRY_FILE), &COUNTRY_HEADER, &country_rows(rows, format_exact), files)
}

fn write_metrics_reports(
    out: &Path,
    metrics: &MetricsStage,
    ppi: &PpiStage,
    eigen: &EigenStage,
    products: &CodeIndex,
    format: GraphFormat,
    files: &mut Vec<PathBuf>,
) -> Result<()> {
    let rows: Vec<Vec<String>> = metrics
        .products
        .iter()
        .map(|r| {
            vec![
                r.product.clone(),
                fmt_opt(r.ppi),
                fmt_opt(r.prp),
                fmt(r.eigenpoverty),
                fmt(r.trade_share),
            ]
        })
        .collect();
    table(
        out.join("products.csv"),
        &["product", "ppi", "prp", "eigenpoverty", "trade_share"],
        &rows,
        files,
    )?;

    let mut by_year = Vec::new();
    for ((year, v), (_, e)) in ppi.yearly.iter().zip(&eigen.yearly) {
        for (p, code) in products.codes().iter().enumerate() {
            by_year.push(vec![
                year.to_string(),
                code.clone(),
                fmt_opt(v.ppi[p]),
                fmt_opt(v.ppi[p].map(|x| 1.0 - x)),
                fmt(e.e_prime[p]),
                fmt(e.e[p]),
                e.in_component[p].to_string(),
            ]);
        }
    }
    table(
        out.join("products_by_year.csv"),
        &["year", "product", "ppi", "prp", "e_prime", "eigenpoverty", "in_component"],
        &by_year,
        files,
    )?;

    table(
        out.join("countries.csv"),
        &COUNTRY_HEADER,
        &country_rows(&metrics.countries, fmt),
        files,
    )?;

    let path = out.join(format!("product_space.{}", format.extension()));
    let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    product_space::export_graph(
        &metrics.graph,
        format,
        &GRAPH_ATTRIBUTES,
        std::io::BufWriter::new(file),
    )?;
    files.push(path);
    Ok(())
}

fn write_regressions(out: &Path, reg: &RegressionStage, files: &mut Vec<PathBuf>) -> Result<()> {
    let csv_path = out.join("regressions.csv");
    fs::write(&csv_path, econometrics::regression_table_csv(&reg.models))
        .map_err(|e| Error::io(&csv_path, e))?;
    files.push(csv_path);

    let mut text = econometrics::regression_table_text(&reg.dependent, &reg.models);
    if let Some(s1) = &reg.stage1 {
        text.push('\n');
        text.push_str(&econometrics::regression_table_text(
            &s1.dependent,
            &[("stage 1".to_string(), s1.clone())],
        ));
    }
    let txt_path = out.join("regressions.txt");
    fs::write(&txt_path, text).map_err(|e| Error::io(&txt_path, e))?;
    files.push(txt_path);

    write_json(&out.join("regressions.json"), reg, files)
}

fn write_elbow(out: &Path, elbow: &ElbowResult, files: &mut Vec<PathBuf>) -> Result<()> {
    let path = out.join("elbow.csv");
    fs::write(&path, elbow.to_csv()).map_err(|e| Error::io(&path, e))?;
    files.push(path);
    Ok(())
}

fn read_advantage(dir: &Path, years: YearSpan) -> Result<(Vec<String>, Vec<String>, Vec<AdvantageMatrix>)> {
    let mut labels: Option<(Vec<String>, Vec<String>)> = None;
    let mut yearly = Vec::new();
    for year in years.years() {
        let m = matrix_io::load_matrix(&advantage_file(dir, year))?;
        match &labels {
            None => labels = Some((m.rows.clone(), m.columns.clone())),
            Some((r, c)) if *r != m.rows || *c != m.columns => {
                return Err(Error::Alignment(format!(
                    "advantage_{year}.csv has different labels from earlier years"
                )));
            }
            Some(_) => {}
        }
        yearly.push(AdvantageMatrix {
            span: YearSpan::single(year),
            values: m.values,
        });
    }
    let (rows, cols) = labels.ok_or_else(|| Error::Config("empty trade year range".into()))?;
    Ok((rows, cols, yearly))
}

fn check_labels(found: &[String], expected: &[String], what: &str) -> Result<()> {
    if found != expected {
        return Err(Error::Alignment(format!(
            "{what} in the stage files do not match the inputs; rerun the earlier steps"
        )));
    }
    Ok(())
}

fn read_square(path: &Path, products: Option<&[String]>) -> Result<(Vec<String>, DMatrix<f64>)> {
    let m = matrix_io::load_matrix(path)?;
    if m.rows != m.columns {
        return Err(Error::Schema(format!(
            "{}: row and column labels differ",
            path.display()
        )));
    }
    if let Some(p) = products {
        check_labels(&m.rows, p, "products")?;
    }
    Ok((m.rows, m.values))
}

fn read_ppi(dir: &Path, products: &[String]) -> Result<PpiStage> {
    let path = dir.join(PPI_FILE);
    let t = Table::load(&path, &["year", "product", "ppi"])?;
    let (iy, ip, iv) = (t.index("year"), t.index("product"), t.index("ppi"));
    let mut yearly: Vec<(i32, Vec<Option<f64>>)> = Vec::new();
    for (line, row) in &t.rows {
        let year: i32 = row[iy]
            .parse()
            .map_err(|_| Error::validation(Some(*line), format!("invalid year '{}'", row[iy])))?;
        if yearly.last().is_none_or(|(y, _)| *y != year) {
            yearly.push((year, Vec::new()));
        }
        let (_, values) = yearly.last_mut().unwrap();
        if products.get(values.len()) != Some(&row[ip]) {
            return Err(Error::Alignment(format!(
                "{}: unexpected product '{}' at line {line}",
                path.display(),
                row[ip]
            )));
        }
        values.push(parse_opt_cell(&row[iv], Some(*line))?);
    }
    if yearly.is_empty() || yearly.iter().any(|(_, v)| v.len() != products.len()) {
        return Err(Error::Validation {
            line: None,
            message: format!("{}: every year must list every product", path.display()),
        });
    }
    let yearly: Vec<(i32, ProductPovertyVector)> = yearly
        .into_iter()
        .map(|(y, ppi)| (y, ProductPovertyVector { ppi }))
        .collect();
    let mean = mean_ppi(&yearly.iter().map(|(_, v)| v.clone()).collect::<Vec<_>>())?;
    Ok(PpiStage { yearly, mean })
}

fn read_eigen(dir: &Path, products: &[String]) -> Result<EigenStage> {
    let path = dir.join(EIGEN_FILE);
    let t = Table::load(&path, &["year", "product", "e_prime", "in_component"])?;
    let (iy, ip, ie, ic) = (
        t.index("year"),
        t.index("product"),
        t.index("e_prime"),
        t.index("in_component"),
    );
    let vpath = dir.join(EIGENVALUES_FILE);
    let v = Table::load(&vpath, &["year", "eigenvalue", "iterations", "residual"])?;
    let mut meta = BTreeMap::new();
    for (line, row) in &v.rows {
        let year: i32 = row[v.index("year")]
            .parse()
            .map_err(|_| Error::validation(Some(*line), "invalid year"))?;
        let iterations: usize = row[v.index("iterations")]
            .parse()
            .map_err(|_| Error::validation(Some(*line), "invalid iteration count"))?;
        meta.insert(
            year,
            (
                parse_cell(&row[v.index("eigenvalue")], Some(*line))?,
                iterations,
                parse_cell(&row[v.index("residual")], Some(*line))?,
            ),
        );
    }

    let mut yearly: Vec<(i32, EigenpovertyVector)> = Vec::new();
    for (line, row) in &t.rows {
        let year: i32 = row[iy]
            .parse()
            .map_err(|_| Error::validation(Some(*line), format!("invalid year '{}'", row[iy])))?;
        if yearly.last().is_none_or(|(y, _)| *y != year) {
            let &(eigenvalue, iterations, residual) = meta.get(&year).ok_or_else(|| {
                Error::Validation {
                    line: None,
                    message: format!("{}: no row for {year}", vpath.display()),
                }
            })?;
            yearly.push((
                year,
                EigenpovertyVector {
                    e_prime: Vec::new(),
                    e: Vec::new(),
                    eigenvalue,
                    in_component: Vec::new(),
                    iterations,
                    residual,
                },
            ));
        }
        let (_, e) = yearly.last_mut().unwrap();
        if products.get(e.e_prime.len()) != Some(&row[ip]) {
            return Err(Error::Alignment(format!(
                "{}: unexpected product '{}' at line {line}",
                path.display(),
                row[ip]
            )));
        }
        let value = parse_cell(&row[ie], Some(*line))?;
        e.e_prime.push(value);
        e.e.push(1.0 - value);
        e.in_component.push(row[ic] == "true");
    }
    if yearly.is_empty() || yearly.iter().any(|(_, e)| e.e.len() != products.len()) {
        return Err(Error::Validation {
            line: None,
            message: format!("{}: every year must list every product", path.display()),
        });
    }
    let mean = mean_eigenpoverty(&yearly.iter().map(|(_, e)| e.clone()).collect::<Vec<_>>())?;
    Ok(EigenStage { yearly, mean })
}

fn read_country_stage(dir: &Path) -> Result<Vec<CountryMetricsRow>> {
    let path = dir.join(COUNTRY_FILE);
    let t = Table::load(&path, &COUNTRY_HEADER)?;
    let idx: Vec<usize> = COUNTRY_HEADER.iter().map(|h| t.index(h)).collect();
    t.rows
        .iter()
        .map(|(line, row)| {
            let l = Some(*line);
            Ok(CountryMetricsRow {
                country: row[idx[0]].clone(),
                prp: parse_opt_cell(&row[idx[1]], l)?,
                eprp: parse_opt_cell(&row[idx[2]], l)?,
                rh_base: parse_opt_cell(&row[idx[3]], l)?,
                rh_target: parse_opt_cell(&row[idx[4]], l)?,
                diversity: parse_cell(&row[idx[5]], l)?,
                poverty_missing: row[idx[6]] == "true",
                no_advantage: row[idx[7]] == "true",
            })
        })
        .collect()
}

/// A single pipeline stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    Rca,
    Proximity,
    Ppi,
    Eigenpoverty,
    Metrics,
    Regress,
    Elbow,
    Indices,
}

impl Step {
    pub const ALL: [Step; 8] = [
        Step::Rca,
        Step::Proximity,
        Step::Ppi,
        Step::Eigenpoverty,
        Step::Metrics,
        Step::Regress,
        Step::Elbow,
        Step::Indices,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Step::Rca => "rca",
            Step::Proximity => "proximity",
            Step::Ppi => "ppi",
            Step::Eigenpoverty => "eigenpoverty",
            Step::Metrics => "metrics",
            Step::Regress => "regress",
            Step::Elbow => "elbow",
            Step::Indices => "indices",
        }
    }
}

impl FromStr for Step {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Step::ALL
            .into_iter()
            .find(|step| step.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Step::ALL.iter().map(|s| s.name()).collect();
                Error::Config(format!("unknown step '{s}'; expected one of {}", names.join(", ")))
            })
    }
}

impl std::fmt::Display for Step {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Runs one stage from the inputs and earlier stage files, writing its own
/// stage files and reports. Returns the written paths.
pub fn run_step(step: Step, cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    run_step_inner(step, cfg).stage(step.name())
}

fn run_step_inner(step: Step, cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let dir = cfg.stages_dir();
    let out = &cfg.out_dir;
    let mut files = Vec::new();
    let mkdir = |d: &Path| fs::create_dir_all(d).map_err(|e| Error::io(d, e));
    match step {
        Step::Rca => {
            let inputs = load_inputs(cfg)?;
            let stage = stage_rca(&inputs.data.exports, cfg)?;
            mkdir(&dir)?;
            let index = inputs.data.index();
            write_advantage(&dir, &index.countries, &index.products, &stage, &mut files)?;
        }
        Step::Proximity => {
            let (_, products, yearly) = read_advantage(&dir, cfg.years)?;
            let stage = stage_proximity(&yearly, cfg.pool_proximity)?;
            write_proximity(&dir, &CodeIndex::from_codes(products), &stage, &mut files)?;
        }
        Step::Ppi => {
            let inputs = load_inputs(cfg)?;
            let index = inputs.data.index();
            let (countries, products, yearly) = read_advantage(&dir, cfg.years)?;
            check_labels(&countries, index.countries.codes(), "countries")?;
            check_labels(&products, index.products.codes(), "products")?;
            let stage = stage_ppi(&inputs.data.exports, &inputs.data.poverty, &yearly)?;
            write_ppi(&dir, &index.products, &stage, &mut files)?;
        }
        Step::Eigenpoverty => {
            let probe = dir.join(PPI_FILE);
            if !probe.is_file() {
                return Err(Error::MissingArtifact(probe));
            }
            let mut products: Option<Vec<String>> = None;
            let mut phis = Vec::new();
            let ppi_years: Vec<i32> = {
                let t = Table::load(&probe, &["year"])?;
                let mut ys: Vec<i32> = Vec::new();
                for (line, row) in &t.rows {
                    let y: i32 = row[t.index("year")]
                        .parse()
                        .map_err(|_| Error::validation(Some(*line), "invalid year"))?;
                    if ys.last() != Some(&y) {
                        ys.push(y);
                    }
                }
                ys
            };
            for &year in &ppi_years {
                let (labels, values) = read_square(&phi_file(&dir, year), products.as_deref())?;
                products.get_or_insert(labels);
                phis.push((year, PhiMatrix { values }));
            }
            let products =
                products.ok_or_else(|| Error::Validation { line: None, message: format!("{} is empty", probe.display()) })?;
            let ppi = read_ppi(&dir, &products)?;
            let refs: Vec<(i32, &PhiMatrix)> = phis.iter().map(|(y, p)| (*y, p)).collect();
            let stage = eigen_from_parts(&refs, &ppi, &cfg.eigen)?;
            write_eigen(&dir, &CodeIndex::from_codes(products), &stage, &mut files)?;
        }
        Step::Metrics => {
            let inputs = load_inputs(cfg)?;
            let index = inputs.data.index();
            let (countries, products, yearly) = read_advantage(&dir, cfg.years)?;
            check_labels(&countries, index.countries.codes(), "countries")?;
            check_labels(&products, index.products.codes(), "products")?;
            let advantage = advantage_stage(yearly)?;
            let ppi = read_ppi(&dir, &products)?;
            let eigen = read_eigen(&dir, &products)?;
            let (_, pooled) = read_square(&dir.join(POOLED_FILE), Some(&products))?;
            let metrics = stage_metrics(
                &inputs.data,
                &advantage.mean,
                &ppi,
                &eigen,
                &ProximityMatrix { values: pooled },
                cfg,
            )?;
            write_country_stage(&dir, &metrics.countries, &mut files)?;
            mkdir(out)?;
            write_metrics_reports(out, &metrics, &ppi, &eigen, &index.products, cfg.format, &mut files)?;
        }
        Step::Regress => {
            let rows = read_country_stage(&dir)?;
            let controls = match &cfg.controls {
                Some(path) => ingest::load_controls(path, &cfg.control_country_column)?.0,
                None => ControlTable::default(),
            };
            let reg = stage_regress(&rows, &controls, cfg)?;
            mkdir(out)?;
            write_regressions(out, &reg, &mut files)?;
        }
        Step::Elbow => {
            let (poverty, _) = load_poverty_panel(cfg)?;
            let elbow = stage_elbow(&poverty, cfg)?;
            mkdir(out)?;
            write_elbow(out, &elbow, &mut files)?;
        }
        Step::Indices => {
            let ix = stage_indices(cfg)?;
            mkdir(out)?;
            write_json(&out.join("indices.json"), &ix, &mut files)?;
        }
    }
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_from_toml_with_defaults() {
        let cfg = RunConfig::from_toml_str(
            r#"
            exports = "x.csv"
            years = "2008-2010"
            tau = 1.5
            format = "dot"

            [eigen]
            damping = 0.1
            "#,
        )
        .unwrap();
        assert_eq!(cfg.years, YearSpan { start: 2008, end: 2010 });
        assert_eq!(cfg.tau, 1.5);
        assert_eq!(cfg.format, GraphFormat::Dot);
        assert_eq!(cfg.eigen.damping, 0.1);
        assert_eq!(cfg.eigen.max_iterations, 10_000);
        assert_eq!(cfg.base_year, 2010);
        assert_eq!(cfg.target_year, 2018);
        assert_eq!(cfg.viz_threshold, 0.45);
    }

    #[test]
    fn config_rejects_unknown_keys_and_bad_years() {
        assert!(matches!(
            RunConfig::from_toml_str("colour = 1").unwrap_err(),
            Error::Config(_)
        ));
        let cfg = RunConfig {
            base_year: 2018,
            target_year: 2010,
            ..RunConfig::default()
        };
        assert!(matches!(cfg.validate().unwrap_err(), Error::Config(_)));
        assert!("2010-1995".parse::<YearSpan>().is_err());
    }

    #[test]
    fn default_models_use_all_controls() {
        let models = RunConfig::default().models(&["a".into(), "b".into()]);
        assert_eq!(models[0].regressors, vec!["prp", "a", "b"]);
        assert_eq!(models[1].regressors, vec![RESIDUAL_TERM]);
        assert_eq!(models[2].regressors, vec![RESIDUAL_TERM, "a", "b"]);
    }

    #[test]
    fn step_names_round_trip() {
        for s in Step::ALL {
            assert_eq!(s.name().parse::<Step>().unwrap(), s);
        }
        assert!("plot".parse::<Step>().is_err());
    }

    #[test]
    fn config_serializes_to_toml_and_back() {
        let cfg = RunConfig {
            exports: Some("e.csv".into()),
            ..RunConfig::default()
        };
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(RunConfig::from_toml_str(&text).unwrap(), cfg);
    }
}
