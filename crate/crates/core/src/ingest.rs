//! Loading and validation of the export panel, the poverty panel and the
//! country control table, and their alignment onto one country index.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::{numfmt, Error, Result, YearSpan};

/// Cell contents treated as a missing value.
const MISSING_MARKERS: [&str; 6] = ["", "NA", "N/A", "NaN", ".", ".."];

fn is_missing(cell: &str) -> bool {
    MISSING_MARKERS.iter().any(|m| m.eq_ignore_ascii_case(cell))
}

/// Bijection between opaque string codes and dense ids `0..len`.
///
/// Ids follow the lexicographic order of the codes, so the same set of codes
/// always produces the same index.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CodeIndex {
    codes: Vec<String>,
    ids: HashMap<String, usize>,
}

impl CodeIndex {
    pub fn from_codes<I, S>(codes: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let sorted: BTreeSet<String> = codes.into_iter().map(Into::into).collect();
        let codes: Vec<String> = sorted.into_iter().collect();
        let ids = codes
            .iter()
            .enumerate()
            .map(|(i, c)| (c.clone(), i))
            .collect();
        Self { codes, ids }
    }

    pub fn id(&self, code: &str) -> Option<usize> {
        self.ids.get(code).copied()
    }

    pub fn code(&self, id: usize) -> &str {
        &self.codes[id]
    }

    pub fn codes(&self) -> &[String] {
        &self.codes
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn contains(&self, code: &str) -> bool {
        self.ids.contains_key(code)
    }
}

/// Country and product indices of a dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexMap {
    pub countries: CodeIndex,
    pub products: CodeIndex,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportEntry {
    pub country: String,
    pub product: String,
    pub year: i32,
    pub value: f64,
}

/// Validated country × product × year export values.
#[derive(Debug, Clone, PartialEq)]
pub struct ExportPanel {
    entries: Vec<ExportEntry>,
    span: YearSpan,
    index: IndexMap,
}

impl ExportPanel {
    /// Builds a panel from raw entries. When `span` is `None` it is inferred
    /// from the data.
    pub fn new(mut entries: Vec<ExportEntry>, span: Option<YearSpan>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::validation(None, "export panel has no entries"));
        }
        let span = match span {
            Some(s) => s,
            None => {
                let lo = entries.iter().map(|e| e.year).min().unwrap();
                let hi = entries.iter().map(|e| e.year).max().unwrap();
                YearSpan::new(lo, hi)?
            }
        };
        for e in &entries {
            if e.country.is_empty() || e.product.is_empty() {
                return Err(Error::validation(None, "empty country or product code"));
            }
            if !(e.value.is_finite() && e.value >= 0.0) {
                return Err(Error::validation(
                    None,
                    format!(
                        "negative or non-finite export value {} for ({}, {}, {})",
                        e.value, e.country, e.product, e.year
                    ),
                ));
            }
            if !span.contains(e.year) {
                return Err(Error::validation(
                    None,
                    format!("year {} outside declared range {span}", e.year),
                ));
            }
        }
        entries.sort_by(|a, b| {
            (a.year, &a.country, &a.product).cmp(&(b.year, &b.country, &b.product))
        });
        if let Some(w) = entries.windows(2).find(|w| {
            w[0].year == w[1].year && w[0].country == w[1].country && w[0].product == w[1].product
        }) {
            return Err(Error::validation(
                None,
                format!(
                    "duplicate key ({}, {}, {})",
                    w[0].country, w[0].product, w[0].year
                ),
            ));
        }
        let index = IndexMap {
            countries: CodeIndex::from_codes(entries.iter().map(|e| e.country.as_str())),
            products: CodeIndex::from_codes(entries.iter().map(|e| e.product.as_str())),
        };
        Ok(Self {
            entries,
            span,
            index,
        })
    }

    /// Entries sorted by (year, country, product).
    pub fn entries(&self) -> &[ExportEntry] {
        &self.entries
    }

    pub fn span(&self) -> YearSpan {
        self.span
    }

    pub fn index(&self) -> &IndexMap {
        &self.index
    }

    pub fn countries(&self) -> &CodeIndex {
        &self.index.countries
    }

    pub fn products(&self) -> &CodeIndex {
        &self.index.products
    }

    /// Years that have at least one entry.
    pub fn years(&self) -> BTreeSet<i32> {
        self.entries.iter().map(|e| e.year).collect()
    }

    pub fn has_year(&self, year: i32) -> bool {
        self.year_entries(year).next().is_some()
    }

    fn year_entries(&self, year: i32) -> impl Iterator<Item = &ExportEntry> {
        let start = self.entries.partition_point(|e| e.year < year);
        self.entries[start..].iter().take_while(move |e| e.year == year)
    }

    /// Dense country × product matrix of one year's exports, zero where a
    /// pair has no entry. `None` if the year has no entries.
    pub fn year_matrix(&self, year: i32) -> Option<DMatrix<f64>> {
        if !self.has_year(year) {
            return None;
        }
        let mut x = DMatrix::zeros(self.countries().len(), self.products().len());
        for e in self.year_entries(year) {
            let c = self.countries().id(&e.country).unwrap();
            let p = self.products().id(&e.product).unwrap();
            x[(c, p)] = e.value;
        }
        Some(x)
    }

    /// Panel restricted to the given countries.
    pub fn retain_countries(&self, keep: &BTreeSet<String>) -> Result<Self> {
        let entries = self
            .entries
            .iter()
            .filter(|e| keep.contains(&e.country))
            .cloned()
            .collect();
        ExportPanel::new(entries, Some(self.span))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PovertyEntry {
    pub country: String,
    pub year: i32,
    pub headcount: f64,
}

/// Headcount ratios keyed by (country, year).
#[derive(Debug, Clone, PartialEq)]
pub struct PovertyPanel {
    entries: Vec<PovertyEntry>,
    lookup: HashMap<(String, i32), f64>,
}

impl PovertyPanel {
    pub fn new(mut entries: Vec<PovertyEntry>) -> Result<Self> {
        let mut lookup = HashMap::with_capacity(entries.len());
        for e in &entries {
            if e.country.is_empty() {
                return Err(Error::validation(None, "empty country code"));
            }
            if !(0.0..=1.0).contains(&e.headcount) {
                return Err(Error::validation(
                    None,
                    format!(
                        "headcount out of range: {} for ({}, {})",
                        e.headcount, e.country, e.year
                    ),
                ));
            }
            if lookup
                .insert((e.country.clone(), e.year), e.headcount)
                .is_some()
            {
                return Err(Error::validation(
                    None,
                    format!("duplicate key ({}, {})", e.country, e.year),
                ));
            }
        }
        entries.sort_by(|a, b| (&a.country, a.year).cmp(&(&b.country, b.year)));
        Ok(Self { entries, lookup })
    }

    /// Entries sorted by (country, year).
    pub fn entries(&self) -> &[PovertyEntry] {
        &self.entries
    }

    pub fn get(&self, country: &str, year: i32) -> Option<f64> {
        self.lookup.get(&(country.to_string(), year)).copied()
    }

    pub fn countries(&self) -> BTreeSet<String> {
        self.entries.iter().map(|e| e.country.clone()).collect()
    }

    pub fn years(&self) -> BTreeSet<i32> {
        self.entries.iter().map(|e| e.year).collect()
    }

    pub fn has_year(&self, year: i32) -> bool {
        self.entries.iter().any(|e| e.year == year)
    }

    /// Headcounts of `year` for every country of `countries`, `None` where
    /// the panel has no observation.
    pub fn headcounts(&self, countries: &CodeIndex, year: i32) -> Vec<Option<f64>> {
        countries.codes().iter().map(|c| self.get(c, year)).collect()
    }

    /// Observations of one country, sorted by year.
    pub fn series(&self, country: &str) -> Vec<(i32, f64)> {
        let start = self.entries.partition_point(|e| e.country.as_str() < country);
        self.entries[start..]
            .iter()
            .take_while(|e| e.country == country)
            .map(|e| (e.year, e.headcount))
            .collect()
    }
}

/// Country-level regression controls with per-cell missingness.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ControlTable {
    columns: Vec<String>,
    rows: BTreeMap<String, Vec<Option<f64>>>,
}

impl ControlTable {
    pub fn new(columns: Vec<String>, rows: BTreeMap<String, Vec<Option<f64>>>) -> Result<Self> {
        let unique: BTreeSet<&String> = columns.iter().collect();
        if unique.len() != columns.len() {
            return Err(Error::Schema("duplicate control column names".into()));
        }
        if let Some((c, _)) = rows.iter().find(|(_, r)| r.len() != columns.len()) {
            return Err(Error::Schema(format!(
                "control row for {c} has the wrong number of cells"
            )));
        }
        Ok(Self { columns, rows })
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &BTreeMap<String, Vec<Option<f64>>> {
        &self.rows
    }

    pub fn get(&self, country: &str, column: &str) -> Option<f64> {
        let j = self.columns.iter().position(|c| c == column)?;
        self.rows.get(country).and_then(|r| r[j])
    }

    /// Number of missing cells.
    pub fn missing_cells(&self) -> usize {
        self.rows
            .values()
            .map(|r| r.iter().filter(|v| v.is_none()).count())
            .sum()
    }
}

/// Column names of the export CSV.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExportSchema {
    pub country: String,
    pub product: String,
    pub year: String,
    pub value: String,
}

impl Default for ExportSchema {
    fn default() -> Self {
        Self {
            country: "country".into(),
            product: "product".into(),
            year: "year".into(),
            value: "value".into(),
        }
    }
}

/// Column names and units of the poverty CSV.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PovertySchema {
    pub country: String,
    pub year: String,
    pub headcount: String,
    /// Headcounts are percentages and are divided by 100.
    pub percent: bool,
}

impl Default for PovertySchema {
    fn default() -> Self {
        Self {
            country: "country".into(),
            year: "year".into(),
            headcount: "headcount".into(),
            percent: false,
        }
    }
}

/// Row accounting for one ingested file.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub source: String,
    pub rows_read: usize,
    pub rows_kept: usize,
    /// Rows whose value cell was empty or a missing marker.
    pub dropped_missing: usize,
    /// Rows outside the declared year range.
    pub dropped_out_of_range: usize,
    /// Rows whose value was modified (percent rescaling).
    pub rescaled: usize,
}

fn column(headers: &csv::StringRecord, name: &str, source: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::Schema(format!("{source}: missing column '{name}'")))
}

fn reader<R: Read>(rdr: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(rdr)
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn parse_year(cell: &str, line: u64) -> Result<i32> {
    cell.parse()
        .map_err(|_| Error::validation(Some(line), format!("invalid year '{cell}'")))
}

fn parse_number(cell: &str, line: u64) -> Result<f64> {
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::validation(
            Some(line),
            format!("invalid number '{cell}'"),
        )),
    }
}

fn nonempty_code(cell: &str, what: &str, line: u64) -> Result<String> {
    if cell.is_empty() {
        Err(Error::validation(Some(line), format!("empty {what} code")))
    } else {
        Ok(cell.to_string())
    }
}

pub fn load_exports(
    path: &Path,
    schema: &ExportSchema,
    span: Option<YearSpan>,
) -> Result<(ExportPanel, IngestReport)> {
    let file = open(path)?;
    read_exports(file, &path.display().to_string(), schema, span)
}

/// Parses a long-form export CSV.
///
/// Rows with a missing value are dropped and counted; rows outside `span`
/// are dropped and counted. Unparseable cells, negative values and
/// duplicate keys are errors that cite the offending line.
pub fn read_exports<R: Read>(
    rdr: R,
    source: &str,
    schema: &ExportSchema,
    span: Option<YearSpan>,
) -> Result<(ExportPanel, IngestReport)> {
    let mut rdr = reader(rdr);
    let headers = rdr.headers().map_err(|e| Error::csv(source, e))?.clone();
    let ci = column(&headers, &schema.country, source)?;
    let pi = column(&headers, &schema.product, source)?;
    let yi = column(&headers, &schema.year, source)?;
    let vi = column(&headers, &schema.value, source)?;

    let mut report = IngestReport {
        source: source.to_string(),
        ..Default::default()
    };
    let mut entries = Vec::new();
    let mut seen: HashMap<(String, String, i32), u64> = HashMap::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::csv(source, e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        report.rows_read += 1;
        let country = nonempty_code(&record[ci], "country", line)?;
        let product = nonempty_code(&record[pi], "product", line)?;
        let year = parse_year(&record[yi], line)?;
        if is_missing(&record[vi]) {
            report.dropped_missing += 1;
            continue;
        }
        let value = parse_number(&record[vi], line)?;
        if value < 0.0 {
            return Err(Error::validation(
                Some(line),
                format!("negative export value {value}"),
            ));
        }
        if let Some(first) = seen.insert((country.clone(), product.clone(), year), line) {
            return Err(Error::validation(
                Some(line),
                format!("duplicate key ({country}, {product}, {year}), first seen at line {first}"),
            ));
        }
        if span.is_some_and(|s| !s.contains(year)) {
            report.dropped_out_of_range += 1;
            continue;
        }
        entries.push(ExportEntry {
            country,
            product,
            year,
            value,
        });
    }
    report.rows_kept = entries.len();
    Ok((ExportPanel::new(entries, span)?, report))
}

pub fn load_poverty(path: &Path, schema: &PovertySchema) -> Result<(PovertyPanel, IngestReport)> {
    let file = open(path)?;
    read_poverty(file, &path.display().to_string(), schema)
}

pub fn read_poverty<R: Read>(
    rdr: R,
    source: &str,
    schema: &PovertySchema,
) -> Result<(PovertyPanel, IngestReport)> {
    let mut rdr = reader(rdr);
    let headers = rdr.headers().map_err(|e| Error::csv(source, e))?.clone();
    let ci = column(&headers, &schema.country, source)?;
    let yi = column(&headers, &schema.year, source)?;
    let hi = column(&headers, &schema.headcount, source)?;

    let mut report = IngestReport {
        source: source.to_string(),
        ..Default::default()
    };
    let mut entries = Vec::new();
    let mut seen: HashMap<(String, i32), u64> = HashMap::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::csv(source, e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        report.rows_read += 1;
        let country = nonempty_code(&record[ci], "country", line)?;
        let year = parse_year(&record[yi], line)?;
        if is_missing(&record[hi]) {
            report.dropped_missing += 1;
            continue;
        }
        let mut headcount = parse_number(&record[hi], line)?;
        if schema.percent {
            headcount /= 100.0;
            report.rescaled += 1;
        }
        if !(0.0..=1.0).contains(&headcount) {
            return Err(Error::validation(
                Some(line),
                format!("headcount out of range: {headcount} for ({country}, {year})"),
            ));
        }
        if let Some(first) = seen.insert((country.clone(), year), line) {
            return Err(Error::validation(
                Some(line),
                format!("duplicate key ({country}, {year}), first seen at line {first}"),
            ));
        }
        entries.push(PovertyEntry {
            country,
            year,
            headcount,
        });
    }
    report.rows_kept = entries.len();
    Ok((PovertyPanel::new(entries)?, report))
}

pub fn load_controls(path: &Path, country_column: &str) -> Result<(ControlTable, IngestReport)> {
    let file = open(path)?;
    read_controls(file, &path.display().to_string(), country_column)
}

/// Parses a wide control table: one row per country, one numeric column per
/// control. Missing markers become empty cells.
pub fn read_controls<R: Read>(
    rdr: R,
    source: &str,
    country_column: &str,
) -> Result<(ControlTable, IngestReport)> {
    let mut rdr = reader(rdr);
    let headers = rdr.headers().map_err(|e| Error::csv(source, e))?.clone();
    let ci = column(&headers, country_column, source)?;
    let value_cols: Vec<usize> = (0..headers.len()).filter(|&j| j != ci).collect();
    let columns: Vec<String> = value_cols.iter().map(|&j| headers[j].to_string()).collect();
    if columns.iter().collect::<BTreeSet<_>>().len() != columns.len() {
        return Err(Error::Schema(format!("{source}: duplicate column names")));
    }

    let mut report = IngestReport {
        source: source.to_string(),
        ..Default::default()
    };
    let mut rows = BTreeMap::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::csv(source, e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        report.rows_read += 1;
        let country = nonempty_code(&record[ci], "country", line)?;
        let mut cells = Vec::with_capacity(value_cols.len());
        for &j in &value_cols {
            let cell = &record[j];
            cells.push(if is_missing(cell) {
                None
            } else {
                Some(parse_number(cell, line)?)
            });
        }
        if rows.insert(country.clone(), cells).is_some() {
            return Err(Error::validation(
                Some(line),
                format!("duplicate control row for {country}"),
            ));
        }
    }
    report.rows_kept = rows.len();
    Ok((ControlTable::new(columns, rows)?, report))
}

pub fn write_exports<W: Write>(panel: &ExportPanel, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let io = |e: csv::Error| Error::csv("<export writer>", e);
    wtr.write_record(["country", "product", "year", "value"])
        .map_err(io)?;
    for e in panel.entries() {
        wtr.write_record([
            e.country.as_str(),
            e.product.as_str(),
            &e.year.to_string(),
            &numfmt::format_exact(e.value),
        ])
        .map_err(io)?;
    }
    wtr.flush().map_err(|e| Error::io("<export writer>", e))
}

pub fn write_poverty<W: Write>(panel: &PovertyPanel, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let io = |e: csv::Error| Error::csv("<poverty writer>", e);
    wtr.write_record(["country", "year", "headcount"])
        .map_err(io)?;
    for e in panel.entries() {
        wtr.write_record([
            e.country.as_str(),
            &e.year.to_string(),
            &numfmt::format_exact(e.headcount),
        ])
        .map_err(io)?;
    }
    wtr.flush().map_err(|e| Error::io("<poverty writer>", e))
}

/// How trade countries without poverty data are treated.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JoinMode {
    /// Keep every trade country in RCA and proximity; flag those without
    /// poverty data so poverty-weighted sums skip them.
    #[default]
    RetainTrade,
    /// Drop trade countries without poverty data before any computation.
    Intersection,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub trade_countries: usize,
    pub poverty_countries: usize,
    pub shared_countries: usize,
    /// Trade countries with no poverty observation at all.
    pub poverty_missing: Vec<String>,
    /// Poverty countries absent from the trade panel (ignored).
    pub trade_missing: Vec<String>,
    /// Control rows dropped because their country is not in the trade index.
    pub controls_dropped: Vec<String>,
}

/// Trade, poverty and controls sharing one country index.
#[derive(Debug, Clone)]
pub struct AlignedDataset {
    pub exports: ExportPanel,
    pub poverty: PovertyPanel,
    pub controls: ControlTable,
    /// Per country of `exports.countries()`: no poverty data available.
    pub poverty_missing: Vec<bool>,
    pub report: AlignmentReport,
}

impl AlignedDataset {
    pub fn index(&self) -> &IndexMap {
        self.exports.index()
    }
}

pub fn align(
    exports: ExportPanel,
    poverty: PovertyPanel,
    controls: Option<ControlTable>,
    mode: JoinMode,
) -> Result<AlignedDataset> {
    let trade: BTreeSet<String> = exports.countries().codes().iter().cloned().collect();
    let pov = poverty.countries();
    let shared: BTreeSet<String> = trade.intersection(&pov).cloned().collect();
    if shared.is_empty() {
        return Err(Error::Alignment(
            "trade and poverty panels share no countries".into(),
        ));
    }
    let mut report = AlignmentReport {
        trade_countries: trade.len(),
        poverty_countries: pov.len(),
        shared_countries: shared.len(),
        poverty_missing: trade.difference(&pov).cloned().collect(),
        trade_missing: pov.difference(&trade).cloned().collect(),
        controls_dropped: Vec::new(),
    };
    let exports = match mode {
        JoinMode::RetainTrade => exports,
        JoinMode::Intersection => exports.retain_countries(&shared)?,
    };
    let poverty_missing = exports
        .countries()
        .codes()
        .iter()
        .map(|c| !pov.contains(c))
        .collect();

    let controls = match controls {
        None => ControlTable::default(),
        Some(table) => {
            let mut rows = BTreeMap::new();
            for (country, cells) in table.rows {
                if exports.countries().contains(&country) {
                    rows.insert(country, cells);
                } else {
                    report.controls_dropped.push(country);
                }
            }
            ControlTable::new(table.columns, rows)?
        }
    };
    if !report.poverty_missing.is_empty() {
        log::info!(
            "{} trade countries lack poverty data and are excluded from poverty-weighted sums",
            report.poverty_missing.len()
        );
    }
    Ok(AlignedDataset {
        exports,
        poverty,
        controls,
        poverty_missing,
        report,
    })
}
