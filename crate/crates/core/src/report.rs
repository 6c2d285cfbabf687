//! Result persistence: plot-ready CSV tables, run manifests, and comparison
//! of a simulated trajectory against reported case counts.
//!
//! Every table is written through [`write_atomic`], so a reader never sees a
//! half-written file. Floats are printed with Rust's shortest round-trip
//! representation, which makes re-runs byte-identical.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Duration, NaiveDate, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{PolicyPlan, Trajectory};
use crate::optimizer::{
    AdjustmentRow, LockdownFeature, SearchResult, SweepRow, TradeoffPoint, UncertaintyReport,
};
use crate::cost::Evaluation;
use crate::scenario::{Scenario, DAY_ZERO};

/// Writes `bytes` to a sibling temporary file, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::Usage(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

/// Calendar date of simulation day `day`.
pub fn day_to_date(day: u32) -> NaiveDate {
    let (y, m, d) = DAY_ZERO;
    NaiveDate::from_ymd_opt(y, m, d).expect("valid day zero") + Duration::days(day as i64)
}

fn num(x: f64) -> String {
    format!("{x}")
}

struct Table {
    inner: csv::Writer<Vec<u8>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        let mut inner = csv::Writer::from_writer(Vec::new());
        inner.write_record(header).expect("in-memory write");
        Self { inner }
    }

    fn row<I, S>(&mut self, fields: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.inner.write_record(fields).expect("in-memory write");
    }

    fn finish(self) -> Vec<u8> {
        self.inner.into_inner().expect("in-memory flush")
    }
}

const PLAN_COLUMNS: [&str; 6] = ["tau0", "tau1", "tau2", "r1", "r2", "r3"];
const EVAL_COLUMNS: [&str; 7] = [
    "economic_cost",
    "health_cost",
    "total_cost",
    "infected_total",
    "peak_icu",
    "feasible",
    "violated_constraint",
];

fn plan_fields(p: &PolicyPlan) -> [String; 6] {
    [
        p.tau0.to_string(),
        p.tau1.to_string(),
        p.tau2.to_string(),
        num(p.r1),
        num(p.r2),
        num(p.r3),
    ]
}

fn eval_fields(e: &Evaluation) -> [String; 7] {
    [
        num(e.economic_cost),
        num(e.health_cost),
        num(e.total_cost),
        num(e.infected_total),
        num(e.peak_icu),
        e.feasible.to_string(),
        e.violated_constraint.map(|c| c.tag().to_string()).unwrap_or_default(),
    ]
}

fn header(leading: &[&str], trailing: &[&str]) -> Vec<String> {
    leading.iter().chain(trailing).map(|s| s.to_string()).collect()
}

/// One row per day: `day, date, s, e, i, r, n_i, r_eff, icu_load, attenuation, phase`.
pub fn trajectory_csv(traj: &Trajectory, sigma_icu: f64) -> Vec<u8> {
    let mut t = Table::new(&[
        "day", "date", "s", "e", "i", "r", "n_i", "r_eff", "icu_load", "attenuation", "phase",
    ]);
    let ni = traj.infected_persons();
    let icu = traj.icu_load(sigma_icu);
    for k in 0..traj.len() {
        t.row([
            traj.days[k].to_string(),
            day_to_date(traj.days[k]).to_string(),
            num(traj.s[k]),
            num(traj.e[k]),
            num(traj.i[k]),
            num(traj.r[k]),
            num(ni[k]),
            num(traj.r_eff[k]),
            num(icu[k]),
            num(traj.attenuation[k]),
            traj.phase[k].index().to_string(),
        ]);
    }
    t.finish()
}

/// Single-row table with the optimal plan, its costs and the search counts.
pub fn search_result_csv(result: &SearchResult) -> Vec<u8> {
    let mut cols = header(&PLAN_COLUMNS, &EVAL_COLUMNS);
    cols.extend(["n_evaluated", "n_feasible", "n_pruned"].map(String::from));
    let mut t = Table::new(&cols.iter().map(String::as_str).collect::<Vec<_>>());
    let mut row: Vec<String> = plan_fields(&result.best_plan).into();
    row.extend(eval_fields(&result.best_eval));
    row.extend([
        result.n_evaluated.to_string(),
        result.n_feasible.to_string(),
        result.n_pruned.to_string(),
    ]);
    t.row(row);
    t.finish()
}

fn failure_row(width: usize, err: &Error) -> Vec<String> {
    let mut row = vec![String::new(); width];
    row.push(err.to_string());
    row
}

/// Trade-off curve: `alpha, gdp_loss, infected_total`, the plan, its
/// evaluation, and an `error` column for points that failed.
pub fn tradeoff_csv(rows: &[SweepRow<f64, TradeoffPoint>]) -> Vec<u8> {
    let mut cols = header(&["alpha", "gdp_loss", "infected_total"], &PLAN_COLUMNS);
    cols.extend(EVAL_COLUMNS.map(String::from));
    cols.push("error".into());
    let mut t = Table::new(&cols.iter().map(String::as_str).collect::<Vec<_>>());
    for r in rows {
        let mut row = vec![num(r.input)];
        match &r.outcome {
            Ok(p) => {
                row.extend([num(p.gdp_loss), num(p.infected_total)]);
                row.extend(plan_fields(&p.plan));
                row.extend(eval_fields(&p.evaluation));
                row.push(String::new());
            }
            Err(e) => row.extend(failure_row(cols.len() - 2, e)),
        }
        t.row(row);
    }
    t.finish()
}

fn search_rows<I>(
    leading: &[&str],
    rows: &[SweepRow<I, SearchResult>],
    inputs: impl Fn(&I) -> Vec<String>,
) -> Vec<u8> {
    let mut cols = header(leading, &PLAN_COLUMNS);
    cols.extend(EVAL_COLUMNS.map(String::from));
    cols.extend(["n_evaluated", "n_feasible", "error"].map(String::from));
    let mut t = Table::new(&cols.iter().map(String::as_str).collect::<Vec<_>>());
    for r in rows {
        let mut row = inputs(&r.input);
        match &r.outcome {
            Ok(res) => {
                row.extend(plan_fields(&res.best_plan));
                row.extend(eval_fields(&res.best_eval));
                row.extend([res.n_evaluated.to_string(), res.n_feasible.to_string(), String::new()]);
            }
            Err(e) => row.extend(failure_row(cols.len() - leading.len() - 1, e)),
        }
        t.row(row);
    }
    t.finish()
}

/// Optimal lockdown start and duration per `(α, μ1, μ2)`.
pub fn feature_sweep_csv(rows: &[SweepRow<LockdownFeature, SearchResult>]) -> Vec<u8> {
    search_rows(&["alpha", "mu1", "mu2"], rows, |f| vec![num(f.alpha), num(f.mu1), num(f.mu2)])
}

/// Optimal plan per natural reproduction number.
pub fn sensitivity_csv(rows: &[SweepRow<f64, SearchResult>]) -> Vec<u8> {
    search_rows(&["r0"], rows, |r0| vec![num(*r0)])
}

/// Mean absolute bias of `τ0` and `R1` per noise level.
pub fn uncertainty_csv(report: &UncertaintyReport) -> Vec<u8> {
    let mut t = Table::new(&[
        "sigma",
        "bias_tau0",
        "bias_r1",
        "n_samples",
        "seed",
        "baseline_tau0",
        "baseline_r1",
    ]);
    for (k, sigma) in report.sigma_levels.iter().enumerate() {
        t.row([
            num(*sigma),
            num(report.bias_tau0[k]),
            num(report.bias_r1[k]),
            report.n_samples.to_string(),
            report.seed.to_string(),
            report.baseline_tau0.to_string(),
            num(report.baseline_r1),
        ]);
    }
    t.finish()
}

/// One summary row per adjustment level.
pub fn adjustment_csv(rows: &[AdjustmentRow]) -> Vec<u8> {
    let cols = header(
        &["r3", "peak_icu", "peak_day", "peak_date", "max_r_eff_adjustment", "icu_ok"],
        &EVAL_COLUMNS,
    );
    let mut t = Table::new(&cols.iter().map(String::as_str).collect::<Vec<_>>());
    for r in rows {
        let mut row = vec![
            num(r.r3),
            num(r.peak_icu),
            r.peak_day.to_string(),
            day_to_date(r.peak_day).to_string(),
            num(r.max_r_eff_adjustment),
            r.icu_ok.to_string(),
        ];
        row.extend(eval_fields(&r.evaluation));
        t.row(row);
    }
    t.finish()
}

/// Long-format daily curves of every adjustment level: `r3, day, n_i, icu_load, r_eff`.
pub fn adjustment_curves_csv(rows: &[AdjustmentRow], sigma_icu: f64) -> Vec<u8> {
    let mut t = Table::new(&["r3", "day", "date", "n_i", "icu_load", "r_eff"]);
    for r in rows {
        let ni = r.trajectory.infected_persons();
        let icu = r.trajectory.icu_load(sigma_icu);
        for k in 0..r.trajectory.len() {
            let day = r.trajectory.days[k];
            t.row([
                num(r.r3),
                day.to_string(),
                day_to_date(day).to_string(),
                num(ni[k]),
                num(icu[k]),
                num(r.trajectory.r_eff[k]),
            ]);
        }
    }
    t.finish()
}

/// `K_e` obtained from the calibration inputs next to a reference value.
pub fn calibration_csv(rows: &[(&str, f64)]) -> Vec<u8> {
    let mut t = Table::new(&["quantity", "value"]);
    for (name, value) in rows {
        t.row([name.to_string(), num(*value)]);
    }
    t.finish()
}

// ---- manifests ----

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputFile {
    pub path: PathBuf,
    pub bytes: u64,
    pub sha256: String,
}

/// Everything needed to reproduce a command's outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub arguments: Vec<String>,
    pub tool_version: String,
    pub scenario_label: String,
    pub scenario_digest: String,
    /// Resolved scenario, loadable as a config document.
    pub scenario: String,
    pub seed: Option<u64>,
    pub started: DateTime<Utc>,
    pub finished: Option<DateTime<Utc>>,
    pub outputs: Vec<OutputFile>,
    pub notes: Vec<String>,
}

impl RunManifest {
    pub fn start(command: &str, arguments: Vec<String>, scenario: &Scenario, seed: Option<u64>) -> Self {
        Self {
            command: command.into(),
            arguments,
            tool_version: env!("CARGO_PKG_VERSION").into(),
            scenario_label: scenario.label.clone(),
            scenario_digest: scenario.digest(),
            scenario: scenario.to_toml(),
            seed,
            started: Utc::now(),
            finished: None,
            outputs: Vec::new(),
            notes: scenario.resolution.clone(),
        }
    }

    /// Writes `bytes` atomically under `dir` and records the file.
    pub fn emit(&mut self, dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        if bytes.is_empty() {
            return Err(Error::Numeric {
                time: 0.0,
                reason: format!("refusing to write empty output {name}"),
            });
        }
        let path = dir.join(name);
        write_atomic(&path, bytes)?;
        self.outputs.push(OutputFile {
            path: PathBuf::from(name),
            bytes: bytes.len() as u64,
            sha256: hex::encode(Sha256::digest(bytes)),
        });
        Ok(path)
    }

    /// Stamps the end time and writes `manifest.json` under `dir`.
    pub fn finish(mut self, dir: &Path) -> Result<PathBuf> {
        self.finished = Some(Utc::now());
        let json = serde_json::to_vec_pretty(&self).expect("manifest serializes");
        let path = dir.join("manifest.json");
        write_atomic(&path, &json)?;
        Ok(path)
    }
}

// ---- reported data ----

/// Reported active cases by calendar day.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportedSeries {
    pub dates: Vec<NaiveDate>,
    pub active_cases: Vec<f64>,
}

impl ReportedSeries {
    /// Reads a two-column CSV (`date,active_cases`, header required, ISO
    /// dates, strictly increasing). `source` only labels diagnostics.
    pub fn from_reader<R: Read>(reader: R, source: &Path) -> Result<Self> {
        let bad = |reason: String| Error::Csv {
            path: source.to_path_buf(),
            reason,
        };
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let head = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
        if head.len() != 2 {
            return Err(bad(format!("header must have 2 columns, found {}", head.len())));
        }
        if head[0].trim().parse::<NaiveDate>().is_ok() {
            return Err(bad("line 1: a header row (date,active_cases) is required".into()));
        }
        let mut dates = Vec::new();
        let mut active_cases = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(|e| bad(e.to_string()))?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            if record.len() != 2 {
                return Err(bad(format!("line {line}: expected 2 fields, found {}", record.len())));
            }
            let date: NaiveDate = record[0].trim().parse().map_err(|e| {
                bad(format!("line {line}, column {:?}: {:?} is not an ISO date ({e})", &head[0], &record[0]))
            })?;
            let count: f64 = record[1].trim().parse().map_err(|_| {
                bad(format!("line {line}, column {:?}: {:?} is not a number", &head[1], &record[1]))
            })?;
            if !(count >= 0.0 && count.is_finite()) {
                return Err(bad(format!("line {line}, column {:?}: count {count} must be >= 0", &head[1])));
            }
            if dates.last().is_some_and(|&prev| date <= prev) {
                return Err(bad(format!("line {line}: date {date} is not after the previous row")));
            }
            dates.push(date);
            active_cases.push(count);
        }
        if dates.is_empty() {
            return Err(bad("no data rows".into()));
        }
        Ok(Self { dates, active_cases })
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(file, path)
    }
}

/// Model and reported values for one calendar day.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonRow {
    pub date: NaiveDate,
    pub day: u32,
    pub model: f64,
    pub reported: f64,
    /// `model − reported`.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualSummary {
    pub window_start: NaiveDate,
    pub window_end: NaiveDate,
    pub n_days: usize,
    pub max_abs: f64,
    pub mean_abs: f64,
    /// Relative residuals skip days with zero reported cases.
    pub max_rel: f64,
    pub mean_rel: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    pub summary: ResidualSummary,
}

/// Aligns the model's `N·i` with reported active cases by calendar date.
///
/// Reported dates outside the simulated days are dropped. The summary
/// window defaults to the second half of the overlap.
pub fn compare_reported(
    traj: &Trajectory,
    reported: &ReportedSeries,
    window: Option<(NaiveDate, NaiveDate)>,
) -> Result<Comparison> {
    let origin = day_to_date(0);
    let ni = traj.infected_persons();
    let rows: Vec<ComparisonRow> = reported
        .dates
        .iter()
        .zip(&reported.active_cases)
        .filter_map(|(&date, &reported)| {
            let offset = (date - origin).num_days();
            let idx = usize::try_from(offset).ok().filter(|&k| k < traj.len())?;
            Some(ComparisonRow {
                date,
                day: traj.days[idx],
                model: ni[idx],
                reported,
                residual: ni[idx] - reported,
            })
        })
        .collect();
    let (first, last) = match (rows.first(), rows.last()) {
        (Some(a), Some(b)) => (a.date, b.date),
        _ => {
            return Err(Error::Domain(format!(
                "reported dates {}..{} do not overlap the simulated days {}..{}",
                reported.dates[0],
                reported.dates[reported.dates.len() - 1],
                origin,
                day_to_date(traj.days[traj.len() - 1]),
            )))
        }
    };
    let (start, end) = window.unwrap_or_else(|| (first + (last - first) / 2, last));
    if start > end {
        return Err(Error::Usage(format!("window start {start} is after its end {end}")));
    }
    let inside: Vec<&ComparisonRow> = rows.iter().filter(|r| (start..=end).contains(&r.date)).collect();
    if inside.is_empty() {
        return Err(Error::Domain(format!("no compared day falls in the window {start}..{end}")));
    }
    let abs: Vec<f64> = inside.iter().map(|r| r.residual.abs()).collect();
    let rel: Vec<f64> = inside
        .iter()
        .filter(|r| r.reported > 0.0)
        .map(|r| r.residual.abs() / r.reported)
        .collect();
    let mean = |v: &[f64]| if v.is_empty() { f64::NAN } else { v.iter().sum::<f64>() / v.len() as f64 };
    let max = |v: &[f64]| v.iter().copied().fold(f64::NAN, f64::max);
    let summary = ResidualSummary {
        window_start: start,
        window_end: end,
        n_days: inside.len(),
        max_abs: max(&abs),
        mean_abs: mean(&abs),
        max_rel: max(&rel),
        mean_rel: mean(&rel),
    };
    Ok(Comparison { rows, summary })
}

/// `date, day, model, reported, residual, in_window`.
pub fn comparison_csv(cmp: &Comparison) -> Vec<u8> {
    let mut t = Table::new(&["date", "day", "model", "reported", "residual", "in_window"]);
    let window = cmp.summary.window_start..=cmp.summary.window_end;
    for r in &cmp.rows {
        t.row([
            r.date.to_string(),
            r.day.to_string(),
            num(r.model),
            num(r.reported),
            num(r.residual),
            window.contains(&r.date).to_string(),
        ]);
    }
    t.finish()
}

/// Writes a trajectory's `N·i` as a reported-series CSV.
pub fn reported_csv_from(traj: &Trajectory, shift_days: i64) -> Vec<u8> {
    let mut t = Table::new(&["date", "active_cases"]);
    for (&day, ni) in traj.days.iter().zip(traj.infected_persons()) {
        t.row([(day_to_date(day) + Duration::days(shift_days)).to_string(), num(ni)]);
    }
    t.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{simulate_policy, IntegratorConfig};
    use crate::scenario::{france_preset, french_policy_plan};

    fn french() -> (Trajectory, Scenario) {
        let sc = france_preset().with_horizon(120).unwrap();
        let traj = simulate_policy(&sc.params, &french_policy_plan(120), &sc.drift, &IntegratorConfig::default())
            .unwrap();
        (traj, sc)
    }

    #[test]
    fn day_zero_is_march_first() {
        assert_eq!(day_to_date(0).to_string(), "2020-03-01");
        assert_eq!(day_to_date(306).to_string(), "2021-01-01");
    }

    #[test]
    fn trajectory_table_has_one_row_per_day() {
        let (traj, sc) = french();
        let text = String::from_utf8(trajectory_csv(&traj, sc.cost.sigma_icu)).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 122);
        assert!(lines[0].starts_with("day,date,s,e,i,r,n_i,r_eff,icu_load,attenuation,phase"));
        assert!(lines[1].starts_with("0,2020-03-01,"));
    }

    #[test]
    fn self_comparison_has_zero_residuals() {
        let (traj, _) = french();
        let csv = reported_csv_from(&traj, 0);
        let series = ReportedSeries::from_reader(csv.as_slice(), Path::new("self.csv")).unwrap();
        let cmp = compare_reported(&traj, &series, None).unwrap();
        assert_eq!(cmp.rows.len(), traj.len());
        assert!(cmp.rows.iter().all(|r| r.residual == 0.0));
        assert_eq!(cmp.summary.max_abs, 0.0);
        assert_eq!(cmp.summary.window_start, day_to_date(60));
    }

    #[test]
    fn shifted_series_residual_is_the_daily_difference() {
        let (traj, _) = french();
        let csv = reported_csv_from(&traj, 1);
        let series = ReportedSeries::from_reader(csv.as_slice(), Path::new("shift.csv")).unwrap();
        let cmp = compare_reported(&traj, &series, None).unwrap();
        let ni = traj.infected_persons();
        // reported on day d is the model value of day d − 1
        for r in &cmp.rows {
            let d = r.day as usize;
            assert_eq!(r.residual, ni[d] - ni[d - 1]);
        }
        assert_eq!(cmp.rows.len(), traj.len() - 1);
    }

    #[test]
    fn malformed_rows_are_located() {
        let src = Path::new("bad.csv");
        let err = ReportedSeries::from_reader("date,active\n2020-03-01,5\n2020-03-02,x\n".as_bytes(), src)
            .unwrap_err();
        assert!(err.to_string().contains("line 3") && err.to_string().contains("active"), "{err}");
        let err = ReportedSeries::from_reader("2020-03-01,5\n".as_bytes(), src).unwrap_err();
        assert!(err.to_string().contains("header"), "{err}");
        let err = ReportedSeries::from_reader("date,n\n2020-03-02,5\n2020-03-01,4\n".as_bytes(), src)
            .unwrap_err();
        assert!(err.to_string().contains("not after"), "{err}");
        let err = ReportedSeries::from_reader("date,n\n2020-03-02,-1\n".as_bytes(), src).unwrap_err();
        assert!(err.to_string().contains(">= 0"), "{err}");
        assert_eq!(err.exit_code(), 6);
    }

    #[test]
    fn disjoint_dates_are_an_error() {
        let (traj, _) = french();
        let series = ReportedSeries {
            dates: vec![NaiveDate::from_ymd_opt(2019, 1, 1).unwrap()],
            active_cases: vec![1.0],
        };
        assert!(matches!(compare_reported(&traj, &series, None), Err(Error::Domain(_))));
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub").join("a.csv");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(fs::read(&path).unwrap(), b"two");
        assert_eq!(fs::read_dir(path.parent().unwrap()).unwrap().count(), 1);
    }
}
