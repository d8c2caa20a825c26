//! Quarterly state-industry panels: ingestion, proxy construction,
//! location quotients and summary statistics.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::Matrix;
use crate::stats;

#[derive(Debug, Error)]
pub enum PanelError {
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("cannot parse `{value}` in column `{column}` at row {row}")]
    Parse { row: usize, column: String, value: String },
    #[error("invalid quarter {year}Q{quarter} at row {row}")]
    InvalidQuarter { row: usize, year: i32, quarter: i64 },
    #[error("gap in quarters, missing: {}", join_quarters(.0))]
    GapInQuarters(Vec<QuarterDate>),
    #[error("non-positive value in column `{column}` at row {row}")]
    NonPositiveValue { row: usize, column: String },
    #[error("quarter {0} appears more than once")]
    DuplicateQuarter(QuarterDate),
    #[error("no data rows")]
    Empty,
    #[error("year {0} does not have all four quarters")]
    IncompleteYear(i32),
    #[error("no annual value for year {0}")]
    MissingAnnualValue(i32),
    #[error("location quotient inputs must be positive")]
    NonPositiveInput,
    #[error("empty input")]
    EmptyInput,
    #[error("series lengths or starts disagree")]
    MisalignedSeries,
    #[error("non-finite value")]
    NonFinite,
    #[error("unsupported NAICS code `{0}`")]
    UnknownNaics(String),
    #[error("unknown state code `{0}`")]
    UnknownState(String),
}

fn join_quarters(qs: &[QuarterDate]) -> String {
    qs.iter().map(|q| q.to_string()).collect::<Vec<_>>().join(", ")
}

/// A calendar quarter. Orders lexicographically by (year, quarter).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct QuarterDate {
    year: i32,
    quarter: u8,
}

impl QuarterDate {
    pub fn new(year: i32, quarter: u8) -> Option<Self> {
        (1..=4).contains(&quarter).then_some(Self { year, quarter })
    }

    pub fn year(self) -> i32 {
        self.year
    }

    pub fn quarter(self) -> u8 {
        self.quarter
    }

    fn ordinal(self) -> i64 {
        self.year as i64 * 4 + (self.quarter as i64 - 1)
    }

    fn from_ordinal(ord: i64) -> Self {
        Self { year: ord.div_euclid(4) as i32, quarter: (ord.rem_euclid(4) + 1) as u8 }
    }

    pub fn succ(self) -> Self {
        self.advance(1)
    }

    pub fn advance(self, quarters: i64) -> Self {
        Self::from_ordinal(self.ordinal() + quarters)
    }

    /// Number of quarters from `earlier` to `self`.
    pub fn quarters_since(self, earlier: QuarterDate) -> i64 {
        self.ordinal() - earlier.ordinal()
    }
}

impl fmt::Display for QuarterDate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}Q{}", self.year, self.quarter)
    }
}

impl FromStr for QuarterDate {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (y, q) = s
            .split_once(['Q', 'q'])
            .ok_or_else(|| format!("expected YYYYQn, got `{s}`"))?;
        let year: i32 = y.parse().map_err(|_| format!("bad year in `{s}`"))?;
        let quarter: u8 = q.parse().map_err(|_| format!("bad quarter in `{s}`"))?;
        QuarterDate::new(year, quarter).ok_or_else(|| format!("quarter out of range in `{s}`"))
    }
}

impl Serialize for QuarterDate {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for QuarterDate {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Gap-free quarterly observations starting at `start`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuarterlySeries {
    start: QuarterDate,
    values: Vec<f64>,
}

impl QuarterlySeries {
    pub fn new(start: QuarterDate, values: Vec<f64>) -> Result<Self, PanelError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(PanelError::NonFinite);
        }
        Ok(Self { start, values })
    }

    pub fn start(&self) -> QuarterDate {
        self.start
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn quarter_at(&self, i: usize) -> QuarterDate {
        self.start.advance(i as i64)
    }

    pub fn index_of(&self, q: QuarterDate) -> Option<usize> {
        let d = q.quarters_since(self.start);
        (d >= 0 && (d as usize) < self.values.len()).then_some(d as usize)
    }

    pub fn get(&self, q: QuarterDate) -> Option<f64> {
        self.index_of(q).map(|i| self.values[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (QuarterDate, f64)> + '_ {
        self.values.iter().enumerate().map(|(i, v)| (self.quarter_at(i), *v))
    }

    fn slice(&self, from: usize, to: usize) -> Self {
        Self { start: self.quarter_at(from), values: self.values[from..to].to_vec() }
    }
}

/// The five system variables, in the model's canonical ordering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variable {
    Output,
    Employment,
    Wages,
    NumFirms,
    Price,
}

impl Variable {
    pub const ALL: [Variable; 5] =
        [Variable::Output, Variable::Employment, Variable::Wages, Variable::NumFirms, Variable::Price];

    pub fn column(self) -> &'static str {
        match self {
            Variable::Output => "output",
            Variable::Employment => "employment",
            Variable::Wages => "wages",
            Variable::NumFirms => "num_firms",
            Variable::Price => "price",
        }
    }

    /// Name of the differenced equation, e.g. `D_numFirms`.
    pub fn equation_name(self) -> &'static str {
        match self {
            Variable::Output => "D_output",
            Variable::Employment => "D_employment",
            Variable::Wages => "D_wages",
            Variable::NumFirms => "D_numFirms",
            Variable::Price => "D_price",
        }
    }

    /// Reporting unit label. Values are stored as reported and never rescaled.
    pub fn unit(self) -> &'static str {
        match self {
            Variable::Output => "millions of real dollars",
            Variable::Employment => "persons",
            Variable::Wages => "thousands of dollars",
            Variable::NumFirms => "establishments",
            Variable::Price => "index",
        }
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.column())
    }
}

impl FromStr for Variable {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variable::ALL
            .into_iter()
            .find(|v| v.column() == s)
            .ok_or_else(|| format!("unknown variable `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Naics {
    /// Forestry and logging.
    Forestry113,
    /// Wood product manufacturing.
    Wood321,
    /// Paper manufacturing.
    Paper322,
}

impl Naics {
    pub const ALL: [Naics; 3] = [Naics::Forestry113, Naics::Wood321, Naics::Paper322];

    pub fn code(self) -> u16 {
        match self {
            Naics::Forestry113 => 113,
            Naics::Wood321 => 321,
            Naics::Paper322 => 322,
        }
    }
}

impl fmt::Display for Naics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.code())
    }
}

impl FromStr for Naics {
    type Err = PanelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "113" => Ok(Naics::Forestry113),
            "321" => Ok(Naics::Wood321),
            "322" => Ok(Naics::Paper322),
            other => Err(PanelError::UnknownNaics(other.to_string())),
        }
    }
}

impl Serialize for Naics {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u16(self.code())
    }
}

impl<'de> Deserialize<'de> for Naics {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let code = u16::deserialize(d)?;
        code.to_string().parse().map_err(serde::de::Error::custom)
    }
}

const STATE_CODES: [&str; 51] = [
    "AL", "AK", "AZ", "AR", "CA", "CO", "CT", "DE", "DC", "FL", "GA", "HI", "ID", "IL", "IN", "IA",
    "KS", "KY", "LA", "ME", "MD", "MA", "MI", "MN", "MS", "MO", "MT", "NE", "NV", "NH", "NJ", "NM",
    "NY", "NC", "ND", "OH", "OK", "OR", "PA", "RI", "SC", "SD", "TN", "TX", "UT", "VT", "VA", "WA",
    "WV", "WI", "WY",
];

/// Two-letter postal code of a US state (or DC).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateCode(String);

impl StateCode {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl FromStr for StateCode {
    type Err = PanelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let up = s.trim().to_ascii_uppercase();
        if STATE_CODES.contains(&up.as_str()) {
            Ok(StateCode(up))
        } else {
            Err(PanelError::UnknownState(s.to_string()))
        }
    }
}

impl fmt::Display for StateCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Serialize for StateCode {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for StateCode {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One (state, industry) panel of the five system variables.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelDataset {
    pub state: StateCode,
    pub naics: Naics,
    series: [QuarterlySeries; 5],
}

impl PanelDataset {
    /// Series are given in [`Variable::ALL`] order and must be aligned and positive.
    pub fn new(state: StateCode, naics: Naics, series: [QuarterlySeries; 5]) -> Result<Self, PanelError> {
        let start = series[0].start();
        let len = series[0].len();
        if len == 0 {
            return Err(PanelError::Empty);
        }
        for (var, s) in Variable::ALL.iter().zip(&series) {
            if s.start() != start || s.len() != len {
                return Err(PanelError::MisalignedSeries);
            }
            if let Some(row) = s.values().iter().position(|v| *v <= 0.0) {
                return Err(PanelError::NonPositiveValue { row: row + 1, column: var.column().into() });
            }
        }
        Ok(Self { state, naics, series })
    }

    pub fn series(&self, var: Variable) -> &QuarterlySeries {
        &self.series[var as usize]
    }

    pub fn len(&self) -> usize {
        self.series[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn start(&self) -> QuarterDate {
        self.series[0].start()
    }

    pub fn end(&self) -> QuarterDate {
        self.series[0].quarter_at(self.len() - 1)
    }

    pub fn quarter_at(&self, i: usize) -> QuarterDate {
        self.series[0].quarter_at(i)
    }

    pub fn index_of(&self, q: QuarterDate) -> Option<usize> {
        self.series[0].index_of(q)
    }

    /// T x 5 level matrix in [`Variable::ALL`] column order.
    pub fn levels(&self) -> Matrix {
        let mut m = Matrix::zeros(self.len(), 5);
        for (j, s) in self.series.iter().enumerate() {
            m.set_column(j, s.values());
        }
        m
    }

    /// Observations `from..to` as a new panel.
    pub fn slice(&self, from: usize, to: usize) -> Result<Self, PanelError> {
        if from >= to || to > self.len() {
            return Err(PanelError::Empty);
        }
        Ok(Self {
            state: self.state.clone(),
            naics: self.naics,
            series: std::array::from_fn(|j| self.series[j].slice(from, to)),
        })
    }

    /// Replaces one series, e.g. with a disaggregated output proxy.
    pub fn with_series(mut self, var: Variable, series: QuarterlySeries) -> Result<Self, PanelError> {
        self.series[var as usize] = series;
        Self::new(self.state, self.naics, self.series)
    }
}

/// Column names for the panel CSV.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PanelSchema {
    pub year: String,
    pub quarter: String,
    pub employment: String,
    pub wages: String,
    pub num_firms: String,
    pub output: String,
    pub price: String,
}

impl Default for PanelSchema {
    fn default() -> Self {
        Self {
            year: "year".into(),
            quarter: "quarter".into(),
            employment: "employment".into(),
            wages: "wages".into(),
            num_firms: "num_firms".into(),
            output: "output".into(),
            price: "price".into(),
        }
    }
}

impl PanelSchema {
    fn column_for(&self, var: Variable) -> &str {
        match var {
            Variable::Output => &self.output,
            Variable::Employment => &self.employment,
            Variable::Wages => &self.wages,
            Variable::NumFirms => &self.num_firms,
            Variable::Price => &self.price,
        }
    }
}

fn open(path: &Path) -> Result<std::fs::File, PanelError> {
    std::fs::File::open(path).map_err(|source| PanelError::Io { path: path.display().to_string(), source })
}

fn header_index(headers: &csv::StringRecord, name: &str) -> Result<usize, PanelError> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| PanelError::MissingColumn(name.to_string()))
}

fn parse_field<T: FromStr>(rec: &csv::StringRecord, idx: usize, row: usize, column: &str) -> Result<T, PanelError> {
    let raw = rec.get(idx).unwrap_or("").trim();
    raw.parse().map_err(|_| PanelError::Parse { row, column: column.to_string(), value: raw.to_string() })
}

/// Reads `(quarter, values)` rows and checks the quarter sequence is complete.
fn read_quarterly_rows<R: Read>(
    reader: R,
    year_col: &str,
    quarter_col: &str,
    value_cols: &[&str],
) -> Result<(QuarterDate, Vec<Vec<f64>>), PanelError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let yi = header_index(&headers, year_col)?;
    let qi = header_index(&headers, quarter_col)?;
    let vis: Vec<usize> = value_cols.iter().map(|c| header_index(&headers, c)).collect::<Result<_, _>>()?;

    let mut rows: BTreeMap<QuarterDate, Vec<f64>> = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let year: i32 = parse_field(&rec, yi, row, year_col)?;
        let quarter: i64 = parse_field(&rec, qi, row, quarter_col)?;
        let q = u8::try_from(quarter)
            .ok()
            .and_then(|qq| QuarterDate::new(year, qq))
            .ok_or(PanelError::InvalidQuarter { row, year, quarter })?;
        let mut values = Vec::with_capacity(vis.len());
        for (&vi, col) in vis.iter().zip(value_cols) {
            let v: f64 = parse_field(&rec, vi, row, col)?;
            if !v.is_finite() {
                return Err(PanelError::Parse { row, column: col.to_string(), value: v.to_string() });
            }
            values.push(v);
        }
        if rows.insert(q, values).is_some() {
            return Err(PanelError::DuplicateQuarter(q));
        }
    }
    let (&start, _) = rows.first_key_value().ok_or(PanelError::Empty)?;
    let (&end, _) = rows.last_key_value().ok_or(PanelError::Empty)?;
    let span = end.quarters_since(start) as usize + 1;
    if span != rows.len() {
        let missing = (0..span as i64).map(|i| start.advance(i)).filter(|q| !rows.contains_key(q)).collect();
        return Err(PanelError::GapInQuarters(missing));
    }
    Ok((start, rows.into_values().collect()))
}

/// Parses a panel CSV. Rows may arrive in any order.
pub fn read_panel<R: Read>(
    reader: R,
    state: StateCode,
    naics: Naics,
    schema: &PanelSchema,
) -> Result<PanelDataset, PanelError> {
    let cols: Vec<&str> = Variable::ALL.iter().map(|v| schema.column_for(*v)).collect();
    let (start, rows) = read_quarterly_rows(reader, &schema.year, &schema.quarter, &cols)?;
    for (i, r) in rows.iter().enumerate() {
        if let Some(j) = r.iter().position(|v| *v <= 0.0) {
            // Report the row in chronological order since input order is not preserved.
            return Err(PanelError::NonPositiveValue { row: i + 1, column: cols[j].to_string() });
        }
    }
    let series = std::array::from_fn(|j| QuarterlySeries {
        start,
        values: rows.iter().map(|r| r[j]).collect(),
    });
    PanelDataset::new(state, naics, series)
}

pub fn ingest_panel(
    path: &Path,
    state: StateCode,
    naics: Naics,
    schema: &PanelSchema,
) -> Result<PanelDataset, PanelError> {
    read_panel(open(path)?, state, naics, schema)
}

/// Writes a panel in the standard column layout, chronologically.
pub fn write_panel<W: Write>(panel: &PanelDataset, writer: W) -> Result<(), PanelError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["year", "quarter", "employment", "wages", "num_firms", "output", "price"])?;
    let order = [Variable::Employment, Variable::Wages, Variable::NumFirms, Variable::Output, Variable::Price];
    for i in 0..panel.len() {
        let q = panel.quarter_at(i);
        let mut rec = vec![q.year().to_string(), q.quarter().to_string()];
        // `{}` on f64 is the shortest representation that round-trips exactly.
        rec.extend(order.iter().map(|v| format!("{}", panel.series(*v).values()[i])));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|source| PanelError::Io { path: "<writer>".into(), source })?;
    Ok(())
}

/// Reads a national quarterly file with columns `year,quarter,value`.
pub fn read_national_series(path: &Path) -> Result<QuarterlySeries, PanelError> {
    let (start, rows) = read_quarterly_rows(open(path)?, "year", "quarter", &["value"])?;
    QuarterlySeries::new(start, rows.into_iter().map(|r| r[0]).collect())
}

/// Reads an annual file with columns `year,value`.
pub fn read_annual_series(path: &Path) -> Result<BTreeMap<i32, f64>, PanelError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(open(path)?);
    let headers = rdr.headers()?.clone();
    let yi = header_index(&headers, "year")?;
    let vi = header_index(&headers, "value")?;
    let mut out = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let year: i32 = parse_field(&rec, yi, i + 1, "year")?;
        let value: f64 = parse_field(&rec, vi, i + 1, "value")?;
        out.insert(year, value);
    }
    Ok(out)
}

/// Spreads annual state totals over quarters in proportion to a national
/// quarterly indicator, so each year's quarters add up to its annual value.
pub fn disaggregate_annual_output(
    state_annual: &BTreeMap<i32, f64>,
    national: &QuarterlySeries,
) -> Result<QuarterlySeries, PanelError> {
    if national.is_empty() {
        return Err(PanelError::EmptyInput);
    }
    let mut by_year: BTreeMap<i32, Vec<f64>> = BTreeMap::new();
    for (q, v) in national.iter() {
        by_year.entry(q.year()).or_default().push(v);
    }
    let mut values = Vec::with_capacity(national.len());
    for (year, quarters) in &by_year {
        if quarters.len() != 4 {
            return Err(PanelError::IncompleteYear(*year));
        }
        let annual = *state_annual.get(year).ok_or(PanelError::MissingAnnualValue(*year))?;
        let total: f64 = quarters.iter().sum();
        values.extend(quarters.iter().map(|v| annual * v / total));
    }
    QuarterlySeries::new(national.start(), values)
}

/// Ratio of an industry's regional employment share to its national share.
pub fn location_quotient(
    industry_regional: f64,
    employment_regional: f64,
    industry_national: f64,
    employment_national: f64,
) -> Result<f64, PanelError> {
    let inputs = [industry_regional, employment_regional, industry_national, employment_national];
    if inputs.iter().any(|v| v.is_nan() || *v <= 0.0 || !v.is_finite()) {
        return Err(PanelError::NonPositiveInput);
    }
    Ok((industry_regional / employment_regional) / (industry_national / employment_national))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LqRecord {
    pub state: StateCode,
    pub naics: Naics,
    pub quarter: QuarterDate,
    pub lq: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LqSignificance {
    pub state: StateCode,
    pub naics: Naics,
    pub mean_lq: f64,
    pub significant: bool,
}

/// Flags (state, industry) pairs whose mean LQ strictly exceeds `threshold`.
pub fn lq_significance(records: &[LqRecord], threshold: f64) -> Result<Vec<LqSignificance>, PanelError> {
    if records.is_empty() {
        return Err(PanelError::EmptyInput);
    }
    let mut groups: BTreeMap<(StateCode, Naics), Vec<f64>> = BTreeMap::new();
    for r in records {
        groups.entry((r.state.clone(), r.naics)).or_default().push(r.lq);
    }
    Ok(groups
        .into_iter()
        .map(|((state, naics), lqs)| {
            let mean_lq = stats::mean(&lqs);
            LqSignificance { state, naics, mean_lq, significant: mean_lq > threshold }
        })
        .collect())
}

/// Reads employment counts and derives LQ records. Columns:
/// `state,naics,year,quarter,industry_employment,total_employment,national_industry_employment,national_total_employment`.
pub fn read_lq_inputs(path: &Path) -> Result<Vec<LqRecord>, PanelError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(open(path)?);
    let headers = rdr.headers()?.clone();
    let names = [
        "state",
        "naics",
        "year",
        "quarter",
        "industry_employment",
        "total_employment",
        "national_industry_employment",
        "national_total_employment",
    ];
    let idx: Vec<usize> = names.iter().map(|c| header_index(&headers, c)).collect::<Result<_, _>>()?;
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let state: StateCode = rec.get(idx[0]).unwrap_or("").parse()?;
        let naics: Naics = rec.get(idx[1]).unwrap_or("").parse()?;
        let year: i32 = parse_field(&rec, idx[2], row, names[2])?;
        let quarter: i64 = parse_field(&rec, idx[3], row, names[3])?;
        let q = u8::try_from(quarter)
            .ok()
            .and_then(|qq| QuarterDate::new(year, qq))
            .ok_or(PanelError::InvalidQuarter { row, year, quarter })?;
        if !seen.insert((state.clone(), naics, q)) {
            return Err(PanelError::DuplicateQuarter(q));
        }
        let mut v = [0.0; 4];
        for (k, slot) in v.iter_mut().enumerate() {
            *slot = parse_field(&rec, idx[4 + k], row, names[4 + k])?;
        }
        let lq = location_quotient(v[0], v[1], v[2], v[3])?;
        out.push(LqRecord { state, naics, quarter: q, lq });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariableSummary {
    pub variable: Variable,
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
}

/// N, mean, sample sd (N - 1 divisor), min and max for each variable.
pub fn summarize(panel: &PanelDataset) -> Vec<VariableSummary> {
    Variable::ALL
        .iter()
        .map(|&variable| {
            let xs = panel.series(variable).values();
            VariableSummary {
                variable,
                n: xs.len(),
                mean: stats::mean(xs),
                sd: stats::sample_sd(xs),
                min: xs.iter().copied().fold(f64::INFINITY, f64::min),
                max: xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn q(y: i32, qq: u8) -> QuarterDate {
        QuarterDate::new(y, qq).unwrap()
    }

    fn panel_csv(quarters: &[(i32, u8)]) -> String {
        let mut s = String::from("year,quarter,employment,wages,num_firms,output,price\n");
        for (i, (y, qq)) in quarters.iter().enumerate() {
            let i = i as f64;
            s.push_str(&format!("{y},{qq},{},{},{},{},{}\n", 100.0 + i, 50.0 + i, 10.0 + i, 5.0 + i, 0.9 + 0.01 * i));
        }
        s
    }

    fn full_range(from: QuarterDate, n: usize) -> Vec<(i32, u8)> {
        (0..n).map(|i| from.advance(i as i64)).map(|d| (d.year(), d.quarter())).collect()
    }

    fn al() -> StateCode {
        "AL".parse().unwrap()
    }

    #[test]
    fn quarter_ordering_and_successor() {
        assert!(q(2001, 4) < q(2002, 1));
        assert!(q(2001, 2) < q(2001, 3));
        assert_eq!(q(2001, 4).succ(), q(2002, 1));
        assert_eq!(q(2018, 4).quarters_since(q(2001, 1)), 71);
        assert_eq!("2004Q1".parse::<QuarterDate>().unwrap(), q(2004, 1));
        assert!(QuarterDate::new(2001, 5).is_none());
    }

    #[test]
    fn ingest_full_span_lengths() {
        let csv = panel_csv(&full_range(q(2001, 1), 72));
        let p = read_panel(csv.as_bytes(), al(), Naics::Forestry113, &PanelSchema::default()).unwrap();
        assert_eq!(p.len(), 72);
        assert_eq!(p.end(), q(2018, 4));

        let csv = panel_csv(&full_range(q(2004, 1), 60));
        let p = read_panel(csv.as_bytes(), al(), Naics::Wood321, &PanelSchema::default()).unwrap();
        assert_eq!(p.len(), 60);
        assert_eq!((p.start(), p.end()), (q(2004, 1), q(2018, 4)));
    }

    #[test]
    fn ingest_sorts_rows() {
        let mut rows = full_range(q(2001, 1), 8);
        rows.reverse();
        let p = read_panel(panel_csv(&rows).as_bytes(), al(), Naics::Forestry113, &PanelSchema::default()).unwrap();
        assert_eq!(p.start(), q(2001, 1));
        // Reversed input: the first chronological row was written last.
        assert_eq!(p.series(Variable::Employment).values()[0], 107.0);
    }

    #[test]
    fn ingest_reports_gap() {
        let rows: Vec<_> = full_range(q(2004, 1), 12).into_iter().filter(|r| *r != (2005, 3)).collect();
        match read_panel(panel_csv(&rows).as_bytes(), al(), Naics::Wood321, &PanelSchema::default()) {
            Err(PanelError::GapInQuarters(m)) => assert_eq!(m, vec![q(2005, 3)]),
            other => panic!("expected gap, got {other:?}"),
        }
    }

    #[test]
    fn ingest_rejects_duplicates_missing_columns_and_nonpositive() {
        let mut rows = full_range(q(2004, 1), 4);
        rows.push((2004, 2));
        assert!(matches!(
            read_panel(panel_csv(&rows).as_bytes(), al(), Naics::Wood321, &PanelSchema::default()),
            Err(PanelError::DuplicateQuarter(d)) if d == q(2004, 2)
        ));

        let csv = "year,quarter,employment,wages,output,price\n2004,1,1,1,1,1\n";
        assert!(matches!(
            read_panel(csv.as_bytes(), al(), Naics::Wood321, &PanelSchema::default()),
            Err(PanelError::MissingColumn(c)) if c == "num_firms"
        ));

        let csv = "year,quarter,employment,wages,num_firms,output,price\n2004,1,1,1,1,1,1\n2004,2,1,0,1,1,1\n";
        assert!(matches!(
            read_panel(csv.as_bytes(), al(), Naics::Wood321, &PanelSchema::default()),
            Err(PanelError::NonPositiveValue { row: 2, column }) if column == "wages"
        ));
    }

    #[test]
    fn custom_schema_maps_columns() {
        let csv = "yr,qtr,emp,wg,firms,out,ppi\n2010,1,10,20,3,4,1.1\n2010,2,11,21,3,4,1.2\n";
        let schema = PanelSchema {
            year: "yr".into(),
            quarter: "qtr".into(),
            employment: "emp".into(),
            wages: "wg".into(),
            num_firms: "firms".into(),
            output: "out".into(),
            price: "ppi".into(),
        };
        let p = read_panel(csv.as_bytes(), al(), Naics::Paper322, &schema).unwrap();
        assert_eq!(p.series(Variable::Price).values(), &[1.1, 1.2]);
    }

    #[test]
    fn disaggregation_cases() {
        let annual = BTreeMap::from([(2010, 400.0)]);
        let flat = QuarterlySeries::new(q(2010, 1), vec![100.0; 4]).unwrap();
        assert_eq!(disaggregate_annual_output(&annual, &flat).unwrap().values(), &[100.0; 4]);

        let rising = QuarterlySeries::new(q(2010, 1), vec![100.0, 200.0, 300.0, 400.0]).unwrap();
        let out = disaggregate_annual_output(&annual, &rising).unwrap();
        for (a, b) in out.values().iter().zip([40.0, 80.0, 120.0, 160.0]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }

        let short = QuarterlySeries::new(q(2010, 1), vec![100.0, 200.0, 300.0]).unwrap();
        assert!(matches!(disaggregate_annual_output(&annual, &short), Err(PanelError::IncompleteYear(2010))));

        let two_years = QuarterlySeries::new(q(2010, 1), vec![1.0; 8]).unwrap();
        assert!(matches!(
            disaggregate_annual_output(&annual, &two_years),
            Err(PanelError::MissingAnnualValue(2011))
        ));
    }

    #[test]
    fn location_quotient_cases() {
        assert_abs_diff_eq!(location_quotient(20.0, 1000.0, 2000.0, 100_000.0).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(location_quotient(50.0, 1000.0, 2000.0, 100_000.0).unwrap(), 2.5, epsilon = 1e-12);
        assert_abs_diff_eq!(location_quotient(1.0, 1000.0, 2000.0, 100_000.0).unwrap(), 0.05, epsilon = 1e-15);
        assert!(matches!(location_quotient(0.0, 1.0, 1.0, 1.0), Err(PanelError::NonPositiveInput)));
        assert!(matches!(location_quotient(1.0, -1.0, 1.0, 1.0), Err(PanelError::NonPositiveInput)));
    }

    fn rec(lq: f64, quarter: u8) -> LqRecord {
        LqRecord { state: al(), naics: Naics::Forestry113, quarter: q(2010, quarter), lq }
    }

    #[test]
    fn lq_significance_cases() {
        assert!(lq_significance(&[rec(1.5, 1)], 1.0).unwrap()[0].significant);
        assert!(!lq_significance(&[rec(1.0, 1)], 1.0).unwrap()[0].significant);
        let two = lq_significance(&[rec(0.5, 1), rec(2.5, 2)], 1.0).unwrap();
        assert_abs_diff_eq!(two[0].mean_lq, 1.5, epsilon = 1e-15);
        assert!(two[0].significant);
        assert!(matches!(lq_significance(&[], 1.0), Err(PanelError::EmptyInput)));
    }

    #[test]
    fn summarize_constant_series() {
        let s = |v: f64| QuarterlySeries::new(q(2010, 1), vec![v; 3]).unwrap();
        let p = PanelDataset::new(al(), Naics::Forestry113, [s(5.0), s(5.0), s(5.0), s(5.0), s(5.0)]).unwrap();
        for row in summarize(&p) {
            assert_eq!((row.n, row.mean, row.sd, row.min, row.max), (3, 5.0, 0.0, 5.0, 5.0));
        }
    }

    fn arb_panel() -> impl Strategy<Value = PanelDataset> {
        (1990i32..2020, 1u8..=4, prop::collection::vec(prop::array::uniform5(1e-3f64..1e7), 1..40)).prop_map(
            |(y, qq, rows)| {
                let start = q(y, qq);
                let series = std::array::from_fn(|j| {
                    QuarterlySeries::new(start, rows.iter().map(|r| r[j]).collect()).unwrap()
                });
                PanelDataset::new(al(), Naics::Wood321, series).unwrap()
            },
        )
    }

    proptest! {
        #[test]
        fn write_then_read_is_identity(panel in arb_panel()) {
            let mut buf = Vec::new();
            write_panel(&panel, &mut buf).unwrap();
            let back = read_panel(buf.as_slice(), al(), Naics::Wood321, &PanelSchema::default()).unwrap();
            prop_assert_eq!(back, panel);
        }

        #[test]
        fn disaggregation_preserves_annual_totals(
            national in prop::collection::vec(0.1f64..1e4, 1..6).prop_flat_map(|years| {
                let n = years.len() * 4;
                (Just(years), prop::collection::vec(0.1f64..1e4, n))
            })
        ) {
            let (annual_values, quarterly) = national;
            let annual: BTreeMap<i32, f64> =
                annual_values.iter().enumerate().map(|(i, v)| (2000 + i as i32, *v)).collect();
            let series = QuarterlySeries::new(q(2000, 1), quarterly).unwrap();
            let out = disaggregate_annual_output(&annual, &series).unwrap();
            for (i, (year, total)) in annual.iter().enumerate() {
                let sum: f64 = out.values()[4 * i..4 * i + 4].iter().sum();
                prop_assert!((sum - total).abs() <= 1e-9 * total, "year {} sum {} vs {}", year, sum, total);
            }
        }

        #[test]
        fn lq_is_scale_invariant(
            a in 0.1f64..1e4, b in 1e4f64..1e6, c in 0.1f64..1e5, d in 1e5f64..1e8, k in 1e-3f64..1e3
        ) {
            let base = location_quotient(a, b, c, d).unwrap();
            let regional = location_quotient(k * a, k * b, c, d).unwrap();
            let national = location_quotient(a, b, k * c, k * d).unwrap();
            prop_assert!((regional - base).abs() <= 1e-12 * base);
            prop_assert!((national - base).abs() <= 1e-12 * base);
        }

        #[test]
        fn merged_panel_mean_is_average_of_means(
            xs in prop::collection::vec(prop::array::uniform5(1.0f64..1e4), 8)
        ) {
            let start = q(2010, 1);
            let make = |rows: &[[f64; 5]], s: QuarterDate| {
                let series = std::array::from_fn(|j| QuarterlySeries::new(s, rows.iter().map(|r| r[j]).collect()).unwrap());
                PanelDataset::new(al(), Naics::Wood321, series).unwrap()
            };
            let first = make(&xs[..4], start);
            let second = make(&xs[4..], start.advance(4));
            let merged = make(&xs, start);
            let (s1, s2, sm) = (summarize(&first), summarize(&second), summarize(&merged));
            for j in 0..5 {
                let avg = 0.5 * (s1[j].mean + s2[j].mean);
                prop_assert!((sm[j].mean - avg).abs() <= 1e-12 * avg.abs().max(1.0));
            }
        }
    }
}
