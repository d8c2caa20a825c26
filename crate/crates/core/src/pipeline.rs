//! End-to-end runs over configured (state, industry) models: per-model
//! stage chains executed in parallel, report CSVs and a JSON manifest.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::diagnostics::{lm_autocorrelation, normality_tests, LmResult, NormalityReport};
use crate::fixtures::panel_file_name;
use crate::johansen::{johansen_test, DeterministicCase, JohansenResult};
use crate::lags::{select_lags, LagSelection, DEFAULT_MAX_LAG};
use crate::panel::{
    ingest_panel, lq_significance, read_lq_inputs, summarize, write_panel, LqRecord, LqSignificance, Naics,
    PanelDataset, PanelSchema, QuarterDate, StateCode, Variable, VariableSummary,
};
use crate::parallel::{map_slice, thread_cap_from_env, with_thread_cap, Execution};
use crate::unit_root::{adf_test, AdfDeterministic, AdfResult, DEFAULT_ADF_LAGS};
use crate::vecm::{backtest, fit_vecm, forecast, irf, BacktestReport, ForecastPath, IrfSet, ModelSpec, VecmFit, DEFAULT_HORIZON};

/// Residual autocorrelation is tested up to one year of lags.
pub const LM_LAGS: usize = 4;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("data directory {0} does not exist")]
    DataDirMissing(PathBuf),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("index base {base} is outside the panel for {state} {naics}")]
    IndexBaseMissing { base: QuarterDate, state: StateCode, naics: Naics },
    #[error("{0}")]
    Input(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ModelEntry {
    pub state: StateCode,
    pub naics: Naics,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub case: Option<DeterministicCase>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields, default)]
pub struct Defaults {
    pub max_lag: usize,
    pub horizon: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub holdout_start: Option<QuarterDate>,
    pub johansen_case: DeterministicCase,
    pub lq_threshold: f64,
    /// Quarter at which relative plot series equal one; each panel's first
    /// quarter when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub index_base: Option<QuarterDate>,
}

impl Default for Defaults {
    fn default() -> Self {
        Self {
            max_lag: DEFAULT_MAX_LAG,
            horizon: DEFAULT_HORIZON,
            holdout_start: None,
            johansen_case: DeterministicCase::RestrictedConstant,
            lq_threshold: 1.0,
            index_base: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct RunConfig {
    pub data_dir: PathBuf,
    pub out_dir: PathBuf,
    /// Employment counts for location quotients, relative to `data_dir`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lq_inputs: Option<PathBuf>,
    pub models: Vec<ModelEntry>,
    #[serde(default)]
    pub defaults: Defaults,
    #[serde(default)]
    pub seed: u64,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        let config: RunConfig = serde_json::from_str(text).map_err(|e| PipelineError::ConfigInvalid(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Reads a config file; relative directories resolve against the file's
    /// own directory.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let mut config = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.data_dir = base.join(&config.data_dir);
        config.out_dir = base.join(&config.out_dir);
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.models.is_empty() {
            return Err(PipelineError::ConfigInvalid("no models configured".into()));
        }
        let mut seen = BTreeSet::new();
        for m in &self.models {
            if !seen.insert((m.state.clone(), m.naics)) {
                return Err(PipelineError::ConfigInvalid(format!("model {} {} listed twice", m.state, m.naics)));
            }
            if m.k == Some(0) {
                return Err(PipelineError::ConfigInvalid(format!("model {} {}: k must be at least 1", m.state, m.naics)));
            }
        }
        if self.defaults.horizon == 0 {
            return Err(PipelineError::ConfigInvalid("horizon must be at least 1".into()));
        }
        if !(self.defaults.lq_threshold.is_finite()) {
            return Err(PipelineError::ConfigInvalid("lqThreshold must be finite".into()));
        }
        Ok(())
    }

    pub fn hash(&self) -> String {
        hex(&Sha256::digest(serde_json::to_vec(self).expect("config serializes")))
    }

    pub fn panel_path(&self, state: &StateCode, naics: Naics) -> PathBuf {
        self.data_dir.join(panel_file_name(state, naics))
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::with_capacity(bytes.len() * 2), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Pipeline stages in execution order. A run up to a stage computes every
/// earlier stage it depends on but only reports its own tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Ingest,
    Summarize,
    Lq,
    Adf,
    Lags,
    Johansen,
    Fit,
    Diagnose,
    Forecast,
    Backtest,
    Run,
}

impl Stage {
    fn reports(self, table: Table) -> bool {
        use Table::*;
        match self {
            Stage::Run => true,
            Stage::Ingest => table == Panels,
            Stage::Summarize => table == Summary,
            Stage::Lq => matches!(table, Lq | LqSignificance),
            Stage::Adf => table == Adf,
            Stage::Lags => table == Lags,
            Stage::Johansen => table == Johansen,
            Stage::Fit => table == Coefficients,
            Stage::Diagnose => matches!(table, Normality | Lm),
            Stage::Forecast => matches!(table, Forecast | Irf | PlotData),
            Stage::Backtest => matches!(table, Backtest | BacktestForecast),
        }
    }

    fn needs_model(self) -> bool {
        self >= Stage::Johansen
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Table {
    Panels,
    Summary,
    Lq,
    LqSignificance,
    Adf,
    Lags,
    Johansen,
    Coefficients,
    Forecast,
    Irf,
    Backtest,
    BacktestForecast,
    Normality,
    Lm,
    PlotData,
}

impl Table {
    const ALL: [Table; 15] = [
        Table::Panels,
        Table::Summary,
        Table::Lq,
        Table::LqSignificance,
        Table::Adf,
        Table::Lags,
        Table::Johansen,
        Table::Coefficients,
        Table::Forecast,
        Table::Irf,
        Table::Backtest,
        Table::BacktestForecast,
        Table::Normality,
        Table::Lm,
        Table::PlotData,
    ];

    fn file_name(self) -> &'static str {
        match self {
            Table::Panels => "panels.csv",
            Table::Summary => "summary.csv",
            Table::Lq => "lq.csv",
            Table::LqSignificance => "lq_significance.csv",
            Table::Adf => "adf.csv",
            Table::Lags => "lags.csv",
            Table::Johansen => "johansen.csv",
            Table::Coefficients => "coefficients.csv",
            Table::Forecast => "forecast.csv",
            Table::Irf => "irf.csv",
            Table::Backtest => "backtest.csv",
            Table::BacktestForecast => "backtest_forecast.csv",
            Table::Normality => "normality.csv",
            Table::Lm => "lm.csv",
            Table::PlotData => "plot_data.csv",
        }
    }

    fn header(self) -> &'static [&'static str] {
        match self {
            Table::Panels => &["state", "naics", "year", "quarter", "employment", "wages", "num_firms", "output", "price"],
            Table::Summary => &["state", "naics", "variable", "n", "mean", "sd", "min", "max"],
            Table::Lq => &["state", "naics", "quarter", "lq"],
            Table::LqSignificance => &["state", "naics", "mean_lq", "significant"],
            Table::Adf => &["state", "naics", "variable", "adf_stat", "cv1", "cv5", "cv10", "reject5"],
            Table::Lags => &["state", "naics", "lag", "loglik", "aic", "fpe", "hqic", "sbic", "lr_stat", "lr_p", "chosen_flags"],
            Table::Johansen => &["state", "naics", "k", "case", "r", "eigenvalue", "trace", "trace_cv5", "maxeig", "selected_rank"],
            Table::Coefficients => &["state", "naics", "matrix", "row", "col", "value"],
            Table::Forecast => &["state", "naics", "quarter", "variable", "value", "is_forecast"],
            Table::Irf => &["state", "naics", "horizon", "shock_variable", "response_variable", "value"],
            Table::Backtest => &["state", "naics", "variable", "rmse", "mape"],
            Table::BacktestForecast => &["state", "naics", "quarter", "variable", "forecast", "actual"],
            Table::Normality => &[
                "state", "naics", "equation", "jb_stat", "jb_df", "jb_p", "skew", "skew_stat", "skew_df", "skew_p", "kurt",
                "kurt_stat", "kurt_df", "kurt_p",
            ],
            Table::Lm => &["state", "naics", "lag", "lm_stat", "df", "p"],
            Table::PlotData => &["state", "naics", "quarter", "variable", "relative", "is_forecast"],
        }
    }
}

/// Six significant digits; integers print without a fraction.
pub fn fmt_sig(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() { "NaN".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = 5 - magnitude;
    if (0..=12).contains(&decimals) {
        let s = format!("{x:.*}", decimals as usize);
        let s = if s.contains('.') { s.trim_end_matches('0').trim_end_matches('.').to_string() } else { s };
        if s == "-0" { "0".into() } else { s }
    } else if decimals < 0 && magnitude < 15 {
        let rounded: f64 = format!("{x:.5e}").parse().expect("formatted float parses");
        format!("{rounded:.0}")
    } else {
        format!("{x:.5e}")
    }
}

pub fn fmt_fixed3(x: f64) -> String {
    let s = format!("{x:.3}");
    if s == "-0.000" { "0.000".into() } else { s }
}

fn opt_sig(x: Option<f64>) -> String {
    x.map_or_else(String::new, fmt_sig)
}

/// Everything computed for one model. Later stages are absent when the run
/// stopped earlier.
#[derive(Debug, Clone)]
pub struct ModelReport {
    pub entry: ModelEntry,
    pub panel: PanelDataset,
    pub summary: Vec<VariableSummary>,
    pub adf: Vec<(Variable, AdfResult)>,
    pub lags: Option<LagSelection>,
    pub johansen: Option<JohansenResult>,
    pub spec: Option<ModelSpec>,
    pub fit: Option<VecmFit>,
    pub normality: Option<NormalityReport>,
    pub lm: Vec<LmResult>,
    pub forecast: Option<ForecastPath>,
    pub irf: Option<IrfSet>,
    pub backtest: Option<BacktestReport>,
    pub plot: Vec<PlotRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ModelStatus {
    pub state: StateCode,
    pub naics: Naics,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub case: Option<DeterministicCase>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lq_significant: Option<bool>,
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputFile {
    pub file: String,
    pub rows: usize,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RunManifest {
    pub config_hash: String,
    pub seed: u64,
    pub stage: String,
    pub models: Vec<ModelStatus>,
    pub outputs: Vec<OutputFile>,
    pub total_ms: f64,
}

impl RunManifest {
    pub fn failed(&self) -> usize {
        self.models.iter().filter(|m| m.status != "ok").count()
    }
}

pub fn adf_all(panel: &PanelDataset) -> Result<Vec<(Variable, AdfResult)>, String> {
    Variable::ALL
        .iter()
        .map(|&v| {
            adf_test(panel.series(v).values(), DEFAULT_ADF_LAGS, AdfDeterministic::Constant)
                .map(|r| (v, r))
                .map_err(|e| format!("ADF on {v}: {e}"))
        })
        .collect()
}

/// Runs the stage chain for one model up to `upto`.
pub fn analyze_model(
    panel: PanelDataset,
    entry: &ModelEntry,
    defaults: &Defaults,
    upto: Stage,
) -> Result<ModelReport, String> {
    let mut rep = ModelReport {
        entry: entry.clone(),
        summary: summarize(&panel),
        panel,
        adf: Vec::new(),
        lags: None,
        johansen: None,
        spec: None,
        fit: None,
        normality: None,
        lm: Vec::new(),
        forecast: None,
        irf: None,
        backtest: None,
        plot: Vec::new(),
    };
    let panel = &rep.panel.clone();
    if upto >= Stage::Adf {
        rep.adf = adf_all(panel)?;
    }
    if upto < Stage::Lags {
        return Ok(rep);
    }
    let lags = select_lags(panel, defaults.max_lag).map_err(|e| format!("lag selection: {e}"))?;
    let k = entry.k.unwrap_or(lags.chosen.by_aic.max(1));
    rep.lags = Some(lags);
    if !upto.needs_model() {
        return Ok(rep);
    }

    let case = entry.case.unwrap_or(defaults.johansen_case);
    let jres = johansen_test(panel, k, case).map_err(|e| format!("Johansen test: {e}"))?;
    let rank = match entry.r.or(jres.selected_rank) {
        Some(r) => r,
        None => return Err(format!("case {case} has no critical values; give r explicitly")),
    };
    rep.johansen = Some(jres);
    let spec = ModelSpec { k, rank, case };
    rep.spec = Some(spec);
    if upto == Stage::Johansen {
        return Ok(rep);
    }

    let fit = fit_vecm(panel, spec).map_err(|e| format!("VECM fit: {e}"))?;
    if upto >= Stage::Diagnose {
        rep.normality = Some(normality_tests(&fit).map_err(|e| format!("normality tests: {e}"))?);
        rep.lm = lm_autocorrelation(&fit, LM_LAGS).map_err(|e| format!("LM test: {e}"))?;
    }
    if upto >= Stage::Forecast {
        let levels = panel.levels();
        let last = levels.row_range(levels.rows() - k, levels.rows());
        let path = forecast(&fit, &last, defaults.horizon).map_err(|e| format!("forecast: {e}"))?;
        rep.irf = Some(irf(&fit, defaults.horizon).map_err(|e| format!("impulse responses: {e}"))?);
        rep.plot = emit_plot_data(panel, &path, defaults.index_base).map_err(|e| e.to_string())?;
        rep.forecast = Some(path);
    }
    if upto >= Stage::Backtest {
        if let Some(start) = defaults.holdout_start {
            rep.backtest = Some(backtest(panel, spec, start).map_err(|e| format!("backtest: {e}"))?);
        } else if upto == Stage::Backtest {
            return Err("backtest needs defaults.holdoutStart".into());
        }
    }
    rep.fit = Some(fit);
    Ok(rep)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotRow {
    pub quarter: QuarterDate,
    pub variable: Variable,
    pub relative: f64,
    pub is_forecast: bool,
}

/// History and forecast of every variable divided by its observed value at
/// `index_base` (the panel's first quarter when `None`).
pub fn emit_plot_data(
    panel: &PanelDataset,
    path: &ForecastPath,
    index_base: Option<QuarterDate>,
) -> Result<Vec<PlotRow>, PipelineError> {
    let base = index_base.unwrap_or(panel.start());
    let idx = panel.index_of(base).ok_or_else(|| PipelineError::IndexBaseMissing {
        base,
        state: panel.state.clone(),
        naics: panel.naics,
    })?;
    let mut rows = Vec::with_capacity((panel.len() + path.horizon) * 5);
    for (j, &variable) in Variable::ALL.iter().enumerate() {
        let series = panel.series(variable).values();
        let denom = series[idx];
        for (i, v) in series.iter().enumerate() {
            rows.push(PlotRow { quarter: panel.quarter_at(i), variable, relative: v / denom, is_forecast: false });
        }
        for h in 0..path.horizon {
            rows.push(PlotRow {
                quarter: panel.end().advance(h as i64 + 1),
                variable,
                relative: path.values[(h, j)] / denom,
                is_forecast: true,
            });
        }
    }
    Ok(rows)
}

fn model_key(state: &StateCode, naics: Naics) -> [String; 2] {
    [state.to_string(), naics.to_string()]
}

fn push_row(rows: &mut Vec<Vec<String>>, key: &[String; 2], rest: impl IntoIterator<Item = String>) {
    let mut row = key.to_vec();
    row.extend(rest);
    rows.push(row);
}

fn table_rows(table: Table, rep: &ModelReport) -> Vec<Vec<String>> {
    let key = model_key(&rep.panel.state, rep.panel.naics);
    let mut rows = Vec::new();
    match table {
        Table::Panels => {
            let p = &rep.panel;
            let order = [Variable::Employment, Variable::Wages, Variable::NumFirms, Variable::Output, Variable::Price];
            for i in 0..p.len() {
                let q = p.quarter_at(i);
                let mut rest = vec![q.year().to_string(), q.quarter().to_string()];
                rest.extend(order.iter().map(|v| format!("{}", p.series(*v).values()[i])));
                push_row(&mut rows, &key, rest);
            }
        }
        Table::Summary => {
            for s in &rep.summary {
                push_row(
                    &mut rows,
                    &key,
                    [s.variable.to_string(), s.n.to_string(), fmt_fixed3(s.mean), fmt_fixed3(s.sd), fmt_fixed3(s.min), fmt_fixed3(s.max)],
                );
            }
        }
        Table::Adf => {
            for (v, r) in &rep.adf {
                let cv = r.critical_values;
                push_row(
                    &mut rows,
                    &key,
                    [
                        v.to_string(),
                        fmt_sig(r.statistic),
                        fmt_sig(cv.pct1),
                        fmt_sig(cv.pct5),
                        fmt_sig(cv.pct10),
                        u8::from(r.reject_at_5pct).to_string(),
                    ],
                );
            }
        }
        Table::Lags => {
            if let Some(sel) = &rep.lags {
                for c in &sel.per_lag {
                    let mut flags = Vec::new();
                    if sel.chosen.by_aic == c.lag {
                        flags.push("aic");
                    }
                    if sel.chosen.by_fpe == c.lag {
                        flags.push("fpe");
                    }
                    if sel.chosen.by_lr == c.lag {
                        flags.push("lr");
                    }
                    push_row(
                        &mut rows,
                        &key,
                        [
                            c.lag.to_string(),
                            fmt_sig(c.log_lik),
                            fmt_sig(c.aic),
                            fmt_sig(c.fpe),
                            fmt_sig(c.hqic),
                            fmt_sig(c.sbic),
                            opt_sig(c.lr_statistic),
                            opt_sig(c.lr_pvalue),
                            flags.join("|"),
                        ],
                    );
                }
            }
        }
        Table::Johansen => {
            if let Some(j) = &rep.johansen {
                let selected = j.selected_rank.map_or_else(String::new, |r| r.to_string());
                for r in 0..j.dim() {
                    push_row(
                        &mut rows,
                        &key,
                        [
                            j.k.to_string(),
                            j.case.to_string(),
                            r.to_string(),
                            fmt_sig(j.eigenvalues[r]),
                            fmt_sig(j.trace_stats[r]),
                            opt_sig(j.trace_cv5[r]),
                            fmt_sig(j.max_eig_stats[r]),
                            selected.clone(),
                        ],
                    );
                }
            }
        }
        Table::Coefficients => {
            if let Some(fit) = &rep.fit {
                let mut emit = |name: &str, m: &crate::numerics::Matrix| {
                    for i in 0..m.rows() {
                        for c in 0..m.cols() {
                            push_row(&mut rows, &key, [name.to_string(), i.to_string(), c.to_string(), fmt_sig(m[(i, c)])]);
                        }
                    }
                };
                emit("alpha", &fit.alpha);
                emit("beta", &fit.beta);
                for (i, g) in fit.gammas.iter().enumerate() {
                    emit(&format!("gamma{}", i + 1), g);
                }
                emit("mu", &crate::numerics::Matrix::column_vector(&fit.mu));
                emit("mu_trend", &crate::numerics::Matrix::column_vector(&fit.mu_trend));
                emit("sigma", &fit.sigma);
            }
        }
        Table::Forecast => {
            if let Some(path) = &rep.forecast {
                let p = &rep.panel;
                for i in 0..p.len() {
                    for v in Variable::ALL {
                        let value = p.series(v).values()[i];
                        push_row(&mut rows, &key, [p.quarter_at(i).to_string(), v.to_string(), fmt_sig(value), "0".into()]);
                    }
                }
                for h in 0..path.horizon {
                    for (j, v) in Variable::ALL.iter().enumerate() {
                        let q = p.end().advance(h as i64 + 1);
                        push_row(&mut rows, &key, [q.to_string(), v.to_string(), fmt_sig(path.values[(h, j)]), "1".into()]);
                    }
                }
            }
        }
        Table::Irf => {
            if let Some(set) = &rep.irf {
                for (h, theta) in set.responses.iter().enumerate() {
                    for (s, shock) in Variable::ALL.iter().enumerate() {
                        for (r, response) in Variable::ALL.iter().enumerate() {
                            push_row(&mut rows, &key, [h.to_string(), shock.to_string(), response.to_string(), fmt_sig(theta[(r, s)])]);
                        }
                    }
                }
            }
        }
        Table::Backtest => {
            if let Some(bt) = &rep.backtest {
                for a in &bt.accuracy {
                    push_row(&mut rows, &key, [a.variable.to_string(), fmt_sig(a.rmse), fmt_sig(a.mape)]);
                }
            }
        }
        Table::BacktestForecast => {
            if let Some(bt) = &rep.backtest {
                for r in &bt.rows {
                    push_row(&mut rows, &key, [r.quarter.to_string(), r.variable.to_string(), fmt_sig(r.forecast), fmt_sig(r.actual)]);
                }
            }
        }
        Table::Normality => {
            if let Some(n) = &rep.normality {
                for e in &n.per_equation {
                    push_row(
                        &mut rows,
                        &key,
                        [
                            e.equation.clone(),
                            fmt_sig(e.jb.stat),
                            e.jb.dof.to_string(),
                            fmt_sig(e.jb.p),
                            fmt_sig(e.skew),
                            fmt_sig(e.skewness.stat),
                            e.skewness.dof.to_string(),
                            fmt_sig(e.skewness.p),
                            fmt_sig(e.kurt),
                            fmt_sig(e.kurtosis.stat),
                            e.kurtosis.dof.to_string(),
                            fmt_sig(e.kurtosis.p),
                        ],
                    );
                }
                let j = &n.joint;
                push_row(
                    &mut rows,
                    &key,
                    [
                        "ALL".into(),
                        fmt_sig(j.jb.stat),
                        j.jb.dof.to_string(),
                        fmt_sig(j.jb.p),
                        String::new(),
                        fmt_sig(j.skewness.stat),
                        j.skewness.dof.to_string(),
                        fmt_sig(j.skewness.p),
                        String::new(),
                        fmt_sig(j.kurtosis.stat),
                        j.kurtosis.dof.to_string(),
                        fmt_sig(j.kurtosis.p),
                    ],
                );
            }
        }
        Table::Lm => {
            for l in &rep.lm {
                push_row(&mut rows, &key, [l.lag.to_string(), fmt_sig(l.statistic), l.dof.to_string(), fmt_sig(l.pvalue)]);
            }
        }
        Table::PlotData => {
            // Quarter-major within a model: sort by quarter then variable order.
            let mut plot: Vec<&PlotRow> = rep.plot.iter().collect();
            plot.sort_by_key(|r| (r.quarter, r.variable));
            for r in plot {
                push_row(
                    &mut rows,
                    &key,
                    [r.quarter.to_string(), r.variable.to_string(), fmt_sig(r.relative), u8::from(r.is_forecast).to_string()],
                );
            }
        }
        Table::Lq | Table::LqSignificance => {}
    }
    rows
}

fn lq_rows(records: &[LqRecord]) -> Vec<Vec<String>> {
    let mut sorted: Vec<&LqRecord> = records.iter().collect();
    sorted.sort_by(|a, b| (&a.state, a.naics, a.quarter).cmp(&(&b.state, b.naics, b.quarter)));
    sorted
        .into_iter()
        .map(|r| vec![r.state.to_string(), r.naics.to_string(), r.quarter.to_string(), fmt_sig(r.lq)])
        .collect()
}

fn lq_significance_rows(sig: &[LqSignificance]) -> Vec<Vec<String>> {
    sig.iter()
        .map(|s| vec![s.state.to_string(), s.naics.to_string(), fmt_sig(s.mean_lq), u8::from(s.significant).to_string()])
        .collect()
}

fn write_table(dir: &Path, table: Table, rows: &[Vec<String>]) -> Result<OutputFile, PipelineError> {
    let path = dir.join(table.file_name());
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let csv_err = |e: csv::Error| PipelineError::Input(format!("writing {}: {e}", table.file_name()));
    w.write_record(table.header()).map_err(csv_err)?;
    for r in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| PipelineError::Input(e.to_string()))?;
    fs::write(&path, &bytes).map_err(io_err(&path))?;
    Ok(OutputFile {
        file: table.file_name().to_string(),
        rows: rows.len(),
        bytes: bytes.len() as u64,
        sha256: hex(&Sha256::digest(&bytes)),
    })
}

/// Limits which configured models a stage run touches and overrides their
/// specification.
#[derive(Debug, Clone, Default)]
pub struct Selection {
    pub state: Option<StateCode>,
    pub naics: Option<Naics>,
    pub k: Option<usize>,
    pub r: Option<usize>,
    pub case: Option<DeterministicCase>,
}

impl Selection {
    fn apply(&self, models: &[ModelEntry]) -> Result<Vec<ModelEntry>, PipelineError> {
        let mut picked: Vec<ModelEntry> = models
            .iter()
            .filter(|m| self.state.as_ref().is_none_or(|s| *s == m.state) && self.naics.is_none_or(|n| n == m.naics))
            .cloned()
            .collect();
        if picked.is_empty() {
            match (&self.state, self.naics) {
                (Some(state), Some(naics)) => {
                    picked.push(ModelEntry { state: state.clone(), naics, k: None, r: None, case: None })
                }
                _ => return Err(PipelineError::ConfigInvalid("no configured model matches the selection".into())),
            }
        }
        for m in picked.iter_mut() {
            m.k = self.k.or(m.k);
            m.r = self.r.or(m.r);
            m.case = self.case.or(m.case);
        }
        Ok(picked)
    }
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Full pipeline over every configured model.
pub fn run_pipeline(config: &RunConfig) -> Result<RunManifest, PipelineError> {
    run_stage(config, Stage::Run, &Selection::default(), Execution::Parallel)
}

/// Runs the chain up to `stage` for the selected models and writes that
/// stage's tables plus the manifest into `config.out_dir`.
pub fn run_stage(
    config: &RunConfig,
    stage: Stage,
    selection: &Selection,
    exec: Execution,
) -> Result<RunManifest, PipelineError> {
    let started = Instant::now();
    config.validate()?;
    if !config.data_dir.is_dir() {
        return Err(PipelineError::DataDirMissing(config.data_dir.clone()));
    }
    let mut models = selection.apply(&config.models)?;
    models.sort_by(|a, b| (&a.state, a.naics).cmp(&(&b.state, b.naics)));
    fs::create_dir_all(&config.out_dir).map_err(io_err(&config.out_dir))?;

    let lq = if stage == Stage::Lq || stage == Stage::Run {
        match &config.lq_inputs {
            Some(rel) => {
                let path = config.data_dir.join(rel);
                let records = read_lq_inputs(&path).map_err(|e| PipelineError::Input(format!("{}: {e}", path.display())))?;
                let sig = lq_significance(&records, config.defaults.lq_threshold).map_err(|e| PipelineError::Input(e.to_string()))?;
                Some((records, sig))
            }
            None if stage == Stage::Lq => return Err(PipelineError::ConfigInvalid("lq needs lqInputs".into())),
            None => None,
        }
    } else {
        None
    };

    let outcomes: Vec<(Result<ModelReport, String>, f64)> = if stage == Stage::Lq {
        Vec::new()
    } else {
        with_thread_cap(thread_cap_from_env(), || {
            map_slice(&models, exec, |entry| {
                let t0 = Instant::now();
                let path = config.panel_path(&entry.state, entry.naics);
                let result = ingest_panel(&path, entry.state.clone(), entry.naics, &PanelSchema::default())
                    .map_err(|e| format!("{}: {e}", path.display()))
                    .and_then(|panel| analyze_model(panel, entry, &config.defaults, stage));
                (result, t0.elapsed().as_secs_f64() * 1e3)
            })
        })
    };

    let lq_lookup = |state: &StateCode, naics: Naics| {
        lq.as_ref().and_then(|(_, sig)| sig.iter().find(|s| s.state == *state && s.naics == naics).map(|s| s.significant))
    };
    let statuses: Vec<ModelStatus> = if stage == Stage::Lq {
        Vec::new()
    } else {
        models
            .iter()
            .zip(&outcomes)
            .map(|(entry, (result, ms))| {
                let spec = result.as_ref().ok().and_then(|r| r.spec);
                ModelStatus {
                    state: entry.state.clone(),
                    naics: entry.naics,
                    status: if result.is_ok() { "ok" } else { "error" }.into(),
                    message: result.as_ref().err().cloned(),
                    k: spec.map(|s| s.k),
                    r: spec.map(|s| s.rank),
                    case: spec.map(|s| s.case),
                    lq_significant: lq_lookup(&entry.state, entry.naics),
                    elapsed_ms: *ms,
                }
            })
            .collect()
    };

    let reports: Vec<&ModelReport> = outcomes.iter().filter_map(|(r, _)| r.as_ref().ok()).collect();
    let mut outputs = Vec::new();
    for table in Table::ALL {
        if !stage.reports(table) {
            continue;
        }
        let rows = match table {
            Table::Lq => match &lq {
                Some((records, _)) => lq_rows(records),
                None => continue,
            },
            Table::LqSignificance => match &lq {
                Some((_, sig)) => lq_significance_rows(sig),
                None => continue,
            },
            Table::Backtest | Table::BacktestForecast if config.defaults.holdout_start.is_none() => continue,
            _ => reports.iter().flat_map(|rep| table_rows(table, rep)).collect(),
        };
        outputs.push(write_table(&config.out_dir, table, &rows)?);
    }
    if stage == Stage::Run {
        remove_stale_outputs(&config.out_dir, &outputs)?;
    }

    let manifest = RunManifest {
        config_hash: config.hash(),
        seed: config.seed,
        stage: format!("{stage:?}").to_lowercase(),
        models: statuses,
        outputs,
        total_ms: started.elapsed().as_secs_f64() * 1e3,
    };
    let path = config.out_dir.join(MANIFEST_FILE);
    let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| PipelineError::Input(e.to_string()))?;
    text.push('\n');
    fs::write(&path, text).map_err(io_err(&path))?;
    Ok(manifest)
}

/// Deletes report files from earlier runs that this run did not produce, so
/// the inventory describes the directory exactly.
fn remove_stale_outputs(dir: &Path, written: &[OutputFile]) -> Result<(), PipelineError> {
    for table in Table::ALL {
        let name = table.file_name();
        let path = dir.join(name);
        if path.exists() && !written.iter().any(|o| o.file == name) {
            fs::remove_file(&path).map_err(io_err(&path))?;
        }
    }
    Ok(())
}

/// Writes one panel in the standard layout; used by `ingest` to normalize
/// a file supplied outside the data directory.
pub fn write_panel_file(panel: &PanelDataset, path: &Path) -> Result<(), PipelineError> {
    let mut buf = Vec::new();
    write_panel(panel, &mut buf).map_err(|e| PipelineError::Input(e.to_string()))?;
    fs::write(path, buf).map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::QuarterlySeries;
    use crate::numerics::Matrix;

    #[test]
    fn significant_digit_formatting() {
        assert_eq!(fmt_sig(0.0), "0");
        assert_eq!(fmt_sig(1.0), "1");
        assert_eq!(fmt_sig(123456.7), "123457");
        assert_eq!(fmt_sig(0.1234567), "0.123457");
        assert_eq!(fmt_sig(-2.5), "-2.5");
        assert_eq!(fmt_sig(1.5e-9), "1.50000e-9");
        assert_eq!(fmt_sig(12345678.0), "12345700");
        assert_eq!(fmt_sig(f64::NAN), "NaN");
        assert_eq!(fmt_fixed3(4770.7224), "4770.722");
        assert_eq!(fmt_fixed3(-0.0001), "0.000");
    }

    #[test]
    fn empty_model_list_is_rejected() {
        let text = r#"{"dataDir": ".", "outDir": "out", "models": []}"#;
        assert!(matches!(RunConfig::from_json(text), Err(PipelineError::ConfigInvalid(_))));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = r#"{"dataDir": ".", "outDir": "out", "models": [{"state": "AL", "naics": 113}], "colour": 1}"#;
        assert!(matches!(RunConfig::from_json(text), Err(PipelineError::ConfigInvalid(_))));
        let text = r#"{"dataDir": ".", "outDir": "out", "models": [{"state": "XX", "naics": 113}]}"#;
        assert!(matches!(RunConfig::from_json(text), Err(PipelineError::ConfigInvalid(_))));
        let text = r#"{"dataDir": ".", "outDir": "out", "models": [{"state": "AL", "naics": 111}]}"#;
        assert!(matches!(RunConfig::from_json(text), Err(PipelineError::ConfigInvalid(_))));
    }

    #[test]
    fn config_defaults_fill_in() {
        let text = r#"{"dataDir": "d", "outDir": "o", "models": [{"state": "me", "naics": 322, "k": 2, "case": "uconst"}]}"#;
        let c = RunConfig::from_json(text).unwrap();
        assert_eq!(c.defaults, Defaults::default());
        assert_eq!(c.models[0].state.as_str(), "ME");
        assert_eq!(c.models[0].case, Some(DeterministicCase::UnrestrictedConstant));
        let back = RunConfig::from_json(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    fn tiny_panel(values: &[f64]) -> PanelDataset {
        let start = QuarterDate::new(2001, 1).unwrap();
        let series = std::array::from_fn(|_| QuarterlySeries::new(start, values.to_vec()).unwrap());
        PanelDataset::new("AL".parse().unwrap(), Naics::Forestry113, series).unwrap()
    }

    fn flat_path(value: f64) -> ForecastPath {
        ForecastPath {
            origin: None,
            horizon: 1,
            values: Matrix::from_rows(&[[value; 5]]),
            variable_names: Vec::new(),
        }
    }

    #[test]
    fn plot_data_is_relative_to_index_base() {
        let panel = tiny_panel(&[2.0, 4.0, 6.0]);
        let rows = emit_plot_data(&panel, &flat_path(8.0), None).unwrap();
        let out: Vec<f64> = rows.iter().filter(|r| r.variable == Variable::Output).map(|r| r.relative).collect();
        assert_eq!(out, vec![1.0, 2.0, 3.0, 4.0]);
        let flags: Vec<bool> = rows.iter().filter(|r| r.variable == Variable::Output).map(|r| r.is_forecast).collect();
        assert_eq!(flags, vec![false, false, false, true]);

        let rows = emit_plot_data(&panel, &flat_path(8.0), Some(panel.quarter_at(1))).unwrap();
        let out: Vec<f64> = rows.iter().filter(|r| r.variable == Variable::Price).map(|r| r.relative).collect();
        assert_eq!(out, vec![0.5, 1.0, 1.5, 2.0]);

        let outside = QuarterDate::new(1999, 4).unwrap();
        assert!(matches!(emit_plot_data(&panel, &flat_path(8.0), Some(outside)), Err(PipelineError::IndexBaseMissing { .. })));
    }

    #[test]
    fn missing_data_dir_is_reported() {
        let mut c = crate::fixtures::default_config();
        c.data_dir = PathBuf::from("/nonexistent/cointegra");
        c.out_dir = tempfile::tempdir().unwrap().path().to_path_buf();
        assert!(matches!(run_pipeline(&c), Err(PipelineError::DataDirMissing(_))));
    }
}
