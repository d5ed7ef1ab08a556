//! Monthly panel data: alignment of case counts with climate covariates,
//! lagged design-matrix construction, and chronological train/test splits.

mod csv;

pub use csv::{read_cases_csv, read_climate_csv, write_cases_csv, write_climate_csv};

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Errors raised while loading, aligning, or reshaping panel data.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("case and climate series have no overlapping months")]
    EmptyOverlap,
    #[error("{series} series skips a month after {after}")]
    Gap { series: String, after: MonthIndex },
    #[error("missing required column `{column}`")]
    Schema { column: String },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{column} = {value} out of range at {month}")]
    ValueOutOfRange {
        column: String,
        value: f64,
        month: MonthIndex,
    },
    #[error("panel of {rows} rows too short for max lag {max_lag}")]
    InsufficientLength { rows: usize, max_lag: u32 },
    #[error("test window of {requested} months invalid for {rows} rows (need 1..={max})")]
    SplitTooLarge {
        requested: usize,
        rows: usize,
        max: usize,
    },
    #[error("lag {lag} for {variable} outside 0..=12")]
    LagOutOfRange { variable: String, lag: u32 },
}

/// A calendar month, totally ordered, serialized as `YYYY-MM`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MonthIndex {
    year: i32,
    month: u8,
}

impl MonthIndex {
    /// Returns `None` unless `month` is in `1..=12`.
    pub fn new(year: i32, month: u32) -> Option<Self> {
        (1..=12).contains(&month).then_some(Self {
            year,
            month: month as u8,
        })
    }

    pub fn year(&self) -> i32 {
        self.year
    }

    pub fn month(&self) -> u32 {
        u32::from(self.month)
    }

    /// The next calendar month; December rolls over to January.
    pub fn succ(&self) -> Self {
        if self.month == 12 {
            Self {
                year: self.year + 1,
                month: 1,
            }
        } else {
            Self {
                year: self.year,
                month: self.month + 1,
            }
        }
    }

    pub fn add_months(&self, k: i64) -> Self {
        let total = i64::from(self.year) * 12 + i64::from(self.month) - 1 + k;
        Self {
            year: total.div_euclid(12) as i32,
            month: (total.rem_euclid(12) + 1) as u8,
        }
    }

    /// Signed number of months from `self` to `other`.
    pub fn months_until(&self, other: &MonthIndex) -> i64 {
        (i64::from(other.year) - i64::from(self.year)) * 12
            + (i64::from(other.month) - i64::from(self.month))
    }

    pub fn days_in_month(&self) -> u32 {
        match self.month {
            1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
            4 | 6 | 9 | 11 => 30,
            _ => {
                let y = self.year;
                if y % 4 == 0 && (y % 100 != 0 || y % 400 == 0) {
                    29
                } else {
                    28
                }
            }
        }
    }
}

impl fmt::Display for MonthIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for MonthIndex {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (y, m) = s
            .split_once('-')
            .ok_or_else(|| format!("expected YYYY-MM, got `{s}`"))?;
        let year: i32 = y.parse().map_err(|_| format!("bad year in `{s}`"))?;
        let month: u32 = m.parse().map_err(|_| format!("bad month in `{s}`"))?;
        MonthIndex::new(year, month).ok_or_else(|| format!("month out of range in `{s}`"))
    }
}

/// The six climate covariates, in canonical column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ClimateVar {
    TempAvg,
    RainyDays,
    Rainfall,
    SunHours,
    SunDays,
    Humidity,
}

impl ClimateVar {
    pub const ALL: [ClimateVar; 6] = [
        ClimateVar::TempAvg,
        ClimateVar::RainyDays,
        ClimateVar::Rainfall,
        ClimateVar::SunHours,
        ClimateVar::SunDays,
        ClimateVar::Humidity,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ClimateVar::TempAvg => "temp_avg",
            ClimateVar::RainyDays => "rainy_days",
            ClimateVar::Rainfall => "rainfall",
            ClimateVar::SunHours => "sun_hours",
            ClimateVar::SunDays => "sun_days",
            ClimateVar::Humidity => "humidity",
        }
    }

    /// Header name in the climate input CSV (rainfall carries its unit).
    pub fn csv_header(&self) -> &'static str {
        match self {
            ClimateVar::Rainfall => "rainfall_mm",
            other => other.name(),
        }
    }

    fn index(&self) -> usize {
        Self::ALL.iter().position(|v| v == self).unwrap()
    }
}

impl fmt::Display for ClimateVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Monthly case counts for one division, as read from the cases CSV.
#[derive(Debug, Clone)]
pub struct CaseSeries {
    pub division: String,
    pub months: Vec<MonthIndex>,
    pub counts: Vec<u32>,
}

/// Monthly climate table, all six covariates, as read from the climate CSV.
#[derive(Debug, Clone)]
pub struct ClimateTable {
    pub months: Vec<MonthIndex>,
    /// One column per [`ClimateVar::ALL`] entry, row order matching `months`.
    pub columns: [Vec<f64>; 6],
}

/// Gap-free monthly grid joining case counts and the six climate columns.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedPanel {
    division: String,
    months: Vec<MonthIndex>,
    cases: Vec<u32>,
    climate: [Vec<f64>; 6],
}

impl AlignedPanel {
    pub fn division(&self) -> &str {
        &self.division
    }

    pub fn months(&self) -> &[MonthIndex] {
        &self.months
    }

    pub fn cases(&self) -> &[u32] {
        &self.cases
    }

    pub fn cases_f64(&self) -> Vec<f64> {
        self.cases.iter().map(|&c| f64::from(c)).collect()
    }

    pub fn climate(&self, var: ClimateVar) -> &[f64] {
        &self.climate[var.index()]
    }

    pub fn len(&self) -> usize {
        self.months.len()
    }

    pub fn is_empty(&self) -> bool {
        self.months.is_empty()
    }
}

fn check_consecutive(series: &str, months: &[MonthIndex]) -> Result<(), DataError> {
    for pair in months.windows(2) {
        if pair[1] != pair[0].succ() {
            return Err(DataError::Gap {
                series: series.to_string(),
                after: pair[0],
            });
        }
    }
    Ok(())
}

/// Joins cases and climate on the intersection of their month ranges.
///
/// Both inputs must be gap-free; the overlap must be nonempty. Climate
/// values are range-checked (`humidity` in 0..=100, `rainy_days` within the
/// month's day count).
pub fn align_panel(cases: &CaseSeries, climate: &ClimateTable) -> Result<AlignedPanel, DataError> {
    if cases.months.is_empty() || climate.months.is_empty() {
        return Err(DataError::EmptyOverlap);
    }
    check_consecutive("cases", &cases.months)?;
    check_consecutive("climate", &climate.months)?;

    let start = *cases
        .months
        .first()
        .unwrap()
        .max(climate.months.first().unwrap());
    let end = *cases
        .months
        .last()
        .unwrap()
        .min(climate.months.last().unwrap());
    if start > end {
        return Err(DataError::EmptyOverlap);
    }

    let case_off = cases.months[0].months_until(&start) as usize;
    let clim_off = climate.months[0].months_until(&start) as usize;
    let n = start.months_until(&end) as usize + 1;

    let months: Vec<MonthIndex> = cases.months[case_off..case_off + n].to_vec();
    let counts = cases.counts[case_off..case_off + n].to_vec();
    let columns: [Vec<f64>; 6] =
        std::array::from_fn(|i| climate.columns[i][clim_off..clim_off + n].to_vec());

    for (i, month) in months.iter().enumerate() {
        let humidity = columns[ClimateVar::Humidity.index()][i];
        if !(0.0..=100.0).contains(&humidity) {
            return Err(DataError::ValueOutOfRange {
                column: ClimateVar::Humidity.name().to_string(),
                value: humidity,
                month: *month,
            });
        }
        let rainy = columns[ClimateVar::RainyDays.index()][i];
        if rainy < 0.0 || rainy > f64::from(month.days_in_month()) {
            return Err(DataError::ValueOutOfRange {
                column: ClimateVar::RainyDays.name().to_string(),
                value: rainy,
                month: *month,
            });
        }
    }

    Ok(AlignedPanel {
        division: cases.division.clone(),
        months,
        cases: counts,
        climate: columns,
    })
}

/// Month-lags applied to each climate variable, plus the optional
/// prior-month case predictor.
#[derive(Debug, Clone, PartialEq)]
pub struct LagSpec {
    lags: [u32; 6],
    case_lag: bool,
}

impl LagSpec {
    /// Fixed lag structure used throughout: temperature 3, wetness and
    /// sunshine variables 2, humidity 1.
    pub fn standard() -> Self {
        Self {
            lags: [3, 2, 2, 2, 2, 1],
            case_lag: false,
        }
    }

    /// All-zero lags (design equals the raw climate columns).
    pub fn zero() -> Self {
        Self {
            lags: [0; 6],
            case_lag: false,
        }
    }

    pub fn with_lag(mut self, var: ClimateVar, lag: u32) -> Result<Self, DataError> {
        if lag > 12 {
            return Err(DataError::LagOutOfRange {
                variable: var.name().to_string(),
                lag,
            });
        }
        self.lags[var.index()] = lag;
        Ok(self)
    }

    pub fn with_case_lag(mut self, enabled: bool) -> Self {
        self.case_lag = enabled;
        self
    }

    pub fn lag(&self, var: ClimateVar) -> u32 {
        self.lags[var.index()]
    }

    pub fn case_lag(&self) -> bool {
        self.case_lag
    }

    /// Largest lag used by `vars` (including the case lag of 1 if enabled).
    pub fn max_lag(&self, vars: &[ClimateVar]) -> u32 {
        let climate_max = vars.iter().map(|v| self.lag(*v)).max().unwrap_or(0);
        if self.case_lag {
            climate_max.max(1)
        } else {
            climate_max
        }
    }
}

impl Default for LagSpec {
    fn default() -> Self {
        Self::standard()
    }
}

/// The four climate feature sets: wetness alternates rainy-days vs rainfall,
/// sunshine alternates sun-hours vs sun-days; temperature and humidity are
/// always included.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureSet {
    Set1,
    Set2,
    Set3,
    Set4,
}

impl FeatureSet {
    pub const ALL: [FeatureSet; 4] = [
        FeatureSet::Set1,
        FeatureSet::Set2,
        FeatureSet::Set3,
        FeatureSet::Set4,
    ];

    pub fn variables(&self) -> [ClimateVar; 4] {
        use ClimateVar::*;
        match self {
            FeatureSet::Set1 => [TempAvg, RainyDays, SunHours, Humidity],
            FeatureSet::Set2 => [TempAvg, RainyDays, SunDays, Humidity],
            FeatureSet::Set3 => [TempAvg, Rainfall, SunDays, Humidity],
            FeatureSet::Set4 => [TempAvg, Rainfall, SunHours, Humidity],
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            FeatureSet::Set1 => "SET-1",
            FeatureSet::Set2 => "SET-2",
            FeatureSet::Set3 => "SET-3",
            FeatureSet::Set4 => "SET-4",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_uppercase().replace('-', "").as_str() {
            "SET1" => Some(FeatureSet::Set1),
            "SET2" => Some(FeatureSet::Set2),
            "SET3" => Some(FeatureSet::Set3),
            "SET4" => Some(FeatureSet::Set4),
            _ => None,
        }
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Lag-shifted predictor matrix with aligned target vector.
///
/// Row `t` holds each feature-set variable at month `t − lag(v)` (plus the
/// prior month's cases when the case lag is enabled); the first `max_lag`
/// panel rows are dropped so every cell is observed.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    months: Vec<MonthIndex>,
    col_names: Vec<String>,
    x: Vec<f64>,
    y: Vec<f64>,
    case_lag_col: Option<usize>,
}

impl DesignMatrix {
    /// Assembles a design from raw parts (row-major `x`). Useful for custom
    /// designs outside the standard lag construction.
    pub fn new(
        months: Vec<MonthIndex>,
        col_names: Vec<String>,
        x: Vec<f64>,
        y: Vec<f64>,
        case_lag_col: Option<usize>,
    ) -> Result<Self, DataError> {
        let rows = months.len();
        if y.len() != rows || x.len() != rows * col_names.len() {
            return Err(DataError::Parse {
                line: 0,
                message: format!(
                    "inconsistent design dimensions: {} months, {} targets, {} cells for {} columns",
                    rows,
                    y.len(),
                    x.len(),
                    col_names.len()
                ),
            });
        }
        if let Some(c) = case_lag_col {
            if c >= col_names.len() {
                return Err(DataError::Schema {
                    column: format!("case lag column index {c}"),
                });
            }
        }
        Ok(Self {
            months,
            col_names,
            x,
            y,
            case_lag_col,
        })
    }

    pub fn nrows(&self) -> usize {
        self.months.len()
    }

    pub fn ncols(&self) -> usize {
        self.col_names.len()
    }

    pub fn months(&self) -> &[MonthIndex] {
        &self.months
    }

    pub fn col_names(&self) -> &[String] {
        &self.col_names
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.ncols();
        &self.x[i * w..(i + 1) * w]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.nrows()).map(|i| self.row(i)[j]).collect()
    }

    /// Index of the `cases_lag1` column, when present.
    pub fn case_lag_col(&self) -> Option<usize> {
        self.case_lag_col
    }

    /// Copy with one cell replaced (used by recursive forecasting).
    pub fn with_cell(&self, row: usize, col: usize, value: f64) -> Self {
        let w = self.ncols();
        let mut out = self.clone();
        out.x[row * w + col] = value;
        out
    }

    /// Copy without the given column.
    pub fn drop_column(&self, col: usize) -> Self {
        let x = (0..self.nrows())
            .flat_map(|i| {
                self.row(i)
                    .iter()
                    .enumerate()
                    .filter(move |(j, _)| *j != col)
                    .map(|(_, v)| *v)
            })
            .collect();
        let mut col_names = self.col_names.clone();
        col_names.remove(col);
        DesignMatrix {
            months: self.months.clone(),
            col_names,
            x,
            y: self.y.clone(),
            case_lag_col: match self.case_lag_col {
                Some(c) if c == col => None,
                Some(c) if c > col => Some(c - 1),
                other => other,
            },
        }
    }
}

/// Builds the lagged design matrix for one feature set.
pub fn build_design(
    panel: &AlignedPanel,
    set: FeatureSet,
    lags: &LagSpec,
) -> Result<DesignMatrix, DataError> {
    let vars = set.variables();
    let max_lag = lags.max_lag(&vars);
    let n = panel.len();
    if n < max_lag as usize + 2 {
        return Err(DataError::InsufficientLength { rows: n, max_lag });
    }

    let offset = max_lag as usize;
    let rows = n - offset;
    let mut col_names: Vec<String> = vars
        .iter()
        .map(|v| format!("{}_lag{}", v.name(), lags.lag(*v)))
        .collect();
    let mut case_lag_col = None;
    if lags.case_lag() {
        case_lag_col = Some(col_names.len());
        col_names.push("cases_lag1".to_string());
    }

    let cases = panel.cases_f64();
    let mut x = Vec::with_capacity(rows * col_names.len());
    for t in offset..n {
        for v in &vars {
            x.push(panel.climate(*v)[t - lags.lag(*v) as usize]);
        }
        if lags.case_lag() {
            x.push(cases[t - 1]);
        }
    }

    Ok(DesignMatrix {
        months: panel.months()[offset..].to_vec(),
        col_names,
        x,
        y: cases[offset..].to_vec(),
        case_lag_col,
    })
}

/// Splits chronologically: the last `test_months` rows form the test set.
///
/// At least 12 rows must remain for training.
pub fn split_design(
    design: &DesignMatrix,
    test_months: usize,
) -> Result<(DesignMatrix, DesignMatrix), DataError> {
    let rows = design.nrows();
    let max = rows.saturating_sub(12);
    if test_months == 0 || test_months > max {
        return Err(DataError::SplitTooLarge {
            requested: test_months,
            rows,
            max,
        });
    }
    let cut = rows - test_months;
    let w = design.ncols();
    let part = |lo: usize, hi: usize| DesignMatrix {
        months: design.months[lo..hi].to_vec(),
        col_names: design.col_names.clone(),
        x: design.x[lo * w..hi * w].to_vec(),
        y: design.y[lo..hi].to_vec(),
        case_lag_col: design.case_lag_col,
    };
    Ok((part(0, cut), part(cut, rows)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn month(s: &str) -> MonthIndex {
        s.parse().unwrap()
    }

    pub(crate) fn month_range(start: &str, n: usize) -> Vec<MonthIndex> {
        let mut m = month(start);
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            out.push(m);
            m = m.succ();
        }
        out
    }

    pub(crate) fn test_climate(months: &[MonthIndex], seed: u64) -> ClimateTable {
        // Deterministic but varied values inside each column's valid range.
        let n = months.len();
        let gen = |k: u64, lo: f64, hi: f64| -> Vec<f64> {
            (0..n)
                .map(|i| {
                    let u = ((i as u64 * 2654435761 + seed * 97 + k * 131) % 1000) as f64 / 1000.0;
                    lo + u * (hi - lo)
                })
                .collect()
        };
        ClimateTable {
            months: months.to_vec(),
            columns: [
                gen(1, 18.0, 34.0),
                gen(2, 0.0, 25.0),
                gen(3, 0.0, 600.0),
                gen(4, 0.0, 350.0),
                gen(5, 5.0, 28.0),
                gen(6, 35.0, 95.0),
            ],
        }
    }

    fn test_panel(start: &str, n: usize) -> AlignedPanel {
        let months = month_range(start, n);
        let cases = CaseSeries {
            division: "testville".into(),
            months: months.clone(),
            counts: (0..n as u32).map(|i| 10 + i * 3).collect(),
        };
        align_panel(&cases, &test_climate(&months, 7)).unwrap()
    }

    #[test]
    fn month_index_ordering_and_succ() {
        let dec = month("2022-12");
        assert_eq!(dec.succ(), month("2023-01"));
        assert!(month("2022-01") < month("2022-02"));
        assert!(month("2022-12") < month("2023-01"));
        assert_eq!(month("2024-05").to_string(), "2024-05");
        assert_eq!(month("2023-03").add_months(-15), month("2021-12"));
        assert_eq!(month("2022-01").months_until(&month("2025-10")), 45);
    }

    #[test]
    fn month_index_parse_rejects_garbage() {
        assert!("2022-13".parse::<MonthIndex>().is_err());
        assert!("2022-00".parse::<MonthIndex>().is_err());
        assert!("202210".parse::<MonthIndex>().is_err());
        assert!("abcd-ef".parse::<MonthIndex>().is_err());
    }

    #[test]
    fn days_in_month_handles_leap_years() {
        assert_eq!(month("2024-02").days_in_month(), 29);
        assert_eq!(month("2023-02").days_in_month(), 28);
        assert_eq!(month("2100-02").days_in_month(), 28);
        assert_eq!(month("2000-02").days_in_month(), 29);
        assert_eq!(month("2022-04").days_in_month(), 30);
    }

    #[test]
    fn align_full_overlap_study_period() {
        // Jan 2022 .. Oct 2025 inclusive is 46 months.
        let panel = test_panel("2022-01", 46);
        assert_eq!(panel.len(), 46);
        assert_eq!(panel.months()[0], month("2022-01"));
        assert_eq!(panel.months()[45], month("2025-10"));
    }

    #[test]
    fn align_single_month_identity() {
        let months = month_range("2022-05", 1);
        let cases = CaseSeries {
            division: "d".into(),
            months: months.clone(),
            counts: vec![42],
        };
        let climate = test_climate(&months, 1);
        let panel = align_panel(&cases, &climate).unwrap();
        assert_eq!(panel.len(), 1);
        assert_eq!(panel.cases(), &[42]);
        for v in ClimateVar::ALL {
            assert_eq!(panel.climate(v), &climate.columns[v.index()][..]);
        }
    }

    #[test]
    fn align_partial_overlap_intersects() {
        // cases Jan..Jun 2022, climate Apr..Dec 2022 -> Apr..Jun (3 rows).
        let cases = CaseSeries {
            division: "d".into(),
            months: month_range("2022-01", 6),
            counts: vec![1, 2, 3, 4, 5, 6],
        };
        let climate = test_climate(&month_range("2022-04", 9), 2);
        let panel = align_panel(&cases, &climate).unwrap();
        assert_eq!(panel.len(), 3);
        assert_eq!(panel.months()[0], month("2022-04"));
        assert_eq!(panel.cases(), &[4, 5, 6]);
    }

    #[test]
    fn align_disjoint_is_empty_overlap() {
        let cases = CaseSeries {
            division: "d".into(),
            months: month_range("2022-01", 3),
            counts: vec![1, 2, 3],
        };
        let climate = test_climate(&month_range("2023-01", 3), 2);
        assert!(matches!(
            align_panel(&cases, &climate),
            Err(DataError::EmptyOverlap)
        ));
    }

    #[test]
    fn align_gapped_input_rejected() {
        let mut months = month_range("2022-01", 4);
        months[3] = month("2022-06"); // skip Apr, May
        let cases = CaseSeries {
            division: "d".into(),
            months,
            counts: vec![1, 2, 3, 4],
        };
        let climate = test_climate(&month_range("2022-01", 6), 2);
        assert!(matches!(
            align_panel(&cases, &climate),
            Err(DataError::Gap { .. })
        ));
    }

    #[test]
    fn align_rejects_out_of_range_humidity() {
        let months = month_range("2022-01", 2);
        let cases = CaseSeries {
            division: "d".into(),
            months: months.clone(),
            counts: vec![1, 2],
        };
        let mut climate = test_climate(&months, 2);
        climate.columns[ClimateVar::Humidity.index()][1] = 104.0;
        assert!(matches!(
            align_panel(&cases, &climate),
            Err(DataError::ValueOutOfRange { .. })
        ));
    }

    #[test]
    fn build_design_shifts_columns_by_lag() {
        // Variable series [10,20,30,40,50] at lag 2 -> [10,20,30] on months 3..5.
        let months = month_range("2022-01", 5);
        let cases = CaseSeries {
            division: "d".into(),
            months: months.clone(),
            counts: vec![1, 2, 3, 4, 5],
        };
        let mut climate = test_climate(&months, 3);
        climate.columns[ClimateVar::TempAvg.index()] = vec![10.0, 20.0, 30.0, 40.0, 50.0];
        let panel = align_panel(&cases, &climate).unwrap();

        let lags = LagSpec::zero().with_lag(ClimateVar::TempAvg, 2).unwrap();
        let design = build_design(&panel, FeatureSet::Set1, &lags).unwrap();
        assert_eq!(design.nrows(), 3);
        assert_eq!(design.months()[0], month("2022-03"));
        assert_eq!(design.column(0), vec![10.0, 20.0, 30.0]);
        assert_eq!(design.col_names()[0], "temp_avg_lag2");
        assert_eq!(design.y(), &[3.0, 4.0, 5.0]);
    }

    #[test]
    fn build_design_zero_lags_is_identity() {
        let panel = test_panel("2022-01", 8);
        let design = build_design(&panel, FeatureSet::Set2, &LagSpec::zero()).unwrap();
        assert_eq!(design.nrows(), panel.len());
        for (j, v) in FeatureSet::Set2.variables().iter().enumerate() {
            assert_eq!(design.column(j), panel.climate(*v));
        }
        assert!(design.case_lag_col().is_none());
    }

    #[test]
    fn build_design_standard_lags_drop_three_rows() {
        let panel = test_panel("2022-01", 46);
        let design = build_design(&panel, FeatureSet::Set1, &LagSpec::standard()).unwrap();
        assert_eq!(design.nrows(), 43);
    }

    #[test]
    fn build_design_case_lag_column_holds_prior_month() {
        let panel = test_panel("2022-01", 10);
        let lags = LagSpec::standard().with_case_lag(true);
        let design = build_design(&panel, FeatureSet::Set3, &lags).unwrap();
        let j = design.case_lag_col().unwrap();
        assert_eq!(design.col_names()[j], "cases_lag1");
        let cases = panel.cases_f64();
        for (i, row_month) in design.months().iter().enumerate() {
            let t = panel.months().iter().position(|m| m == row_month).unwrap();
            assert_eq!(design.row(i)[j], cases[t - 1]);
        }
    }

    #[test]
    fn build_design_too_short_panel_rejected() {
        let panel = test_panel("2022-01", 4);
        assert!(matches!(
            build_design(&panel, FeatureSet::Set1, &LagSpec::standard()),
            Err(DataError::InsufficientLength { .. })
        ));
    }

    #[test]
    fn split_basic_arithmetic() {
        let panel = test_panel("2022-01", 46);
        let design = build_design(&panel, FeatureSet::Set1, &LagSpec::standard()).unwrap();
        let (train, test) = split_design(&design, 9).unwrap();
        assert_eq!(train.nrows(), 34);
        assert_eq!(test.nrows(), 9);
        assert_eq!(test.months()[0], train.months().last().unwrap().succ());
    }

    #[test]
    fn split_boundary_leaves_twelve_train_rows() {
        let panel = test_panel("2022-01", 46);
        let design = build_design(&panel, FeatureSet::Set1, &LagSpec::standard()).unwrap();
        let (train, test) = split_design(&design, design.nrows() - 12).unwrap();
        assert_eq!(train.nrows(), 12);
        assert_eq!(test.nrows(), 31);
    }

    #[test]
    fn split_rejects_zero_and_oversized_windows() {
        let panel = test_panel("2022-01", 46);
        let design = build_design(&panel, FeatureSet::Set1, &LagSpec::standard()).unwrap();
        assert!(matches!(
            split_design(&design, 0),
            Err(DataError::SplitTooLarge { .. })
        ));
        assert!(matches!(
            split_design(&design, design.nrows() - 11),
            Err(DataError::SplitTooLarge { .. })
        ));
    }

    #[test]
    fn split_partitions_rows_exactly() {
        let panel = test_panel("2022-01", 40);
        let lags = LagSpec::standard().with_case_lag(true);
        let design = build_design(&panel, FeatureSet::Set4, &lags).unwrap();
        for test_months in 1..=design.nrows() - 12 {
            let (train, test) = split_design(&design, test_months).unwrap();
            assert_eq!(train.nrows() + test.nrows(), design.nrows());
            let mut recombined = train.months().to_vec();
            recombined.extend_from_slice(test.months());
            assert_eq!(recombined, design.months());
            for i in 0..train.nrows() {
                assert_eq!(train.row(i), design.row(i));
            }
            for i in 0..test.nrows() {
                assert_eq!(test.row(i), design.row(train.nrows() + i));
            }
        }
    }

    #[test]
    fn drop_column_keeps_remaining_cells() {
        let panel = test_panel("2022-01", 12);
        let lags = LagSpec::standard().with_case_lag(true);
        let design = build_design(&panel, FeatureSet::Set1, &lags).unwrap();
        let dropped = design.drop_column(design.case_lag_col().unwrap());
        assert_eq!(dropped.ncols(), design.ncols() - 1);
        assert!(dropped.case_lag_col().is_none());
        for i in 0..design.nrows() {
            assert_eq!(dropped.row(i), &design.row(i)[..4]);
        }
    }
}
