//! Hierarchical sales data: CSV ingest, calendar features and coherence.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{Datelike, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance used when checking that the parent equals the sum of its children.
pub const COHERENCE_TOL: f64 = 1e-6;

/// Columns produced by [`derive_calendar_features`], in order.
pub const CALENDAR_COLUMNS: [&str; 12] = [
    "promotion",
    "holiday",
    "dow_mon",
    "dow_tue",
    "dow_wed",
    "dow_thu",
    "dow_fri",
    "dow_sat",
    "dow_sun",
    "day_of_month",
    "month",
    "year",
];

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("line {line}: cannot parse {column} value {value:?}")]
    Parse {
        line: u64,
        column: String,
        value: String,
    },
    #[error("line {line}: duplicate date {date}")]
    DuplicateDate { line: u64, date: NaiveDate },
    #[error("invalid schema sidecar: {0}")]
    Schema(String),
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T, E = DatasetError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Level {
    Parent,
    Child,
}

/// Identifies one node of the two-level hierarchy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SeriesId {
    pub level: Level,
    pub index: usize,
}

impl SeriesId {
    pub const PARENT: SeriesId = SeriesId {
        level: Level::Parent,
        index: 0,
    };

    pub fn child(index: usize) -> Self {
        SeriesId {
            level: Level::Child,
            index,
        }
    }

    pub fn is_parent(&self) -> bool {
        self.level == Level::Parent
    }
}

impl fmt::Display for SeriesId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.level {
            Level::Parent => write!(f, "parent"),
            Level::Child => write!(f, "child_{}", self.index),
        }
    }
}

/// One day of raw input for a single series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub date: NaiveDate,
    pub promotion: bool,
    pub holiday: bool,
    pub demand: f64,
}

/// Row-major real matrix with named columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    column_names: Vec<String>,
    n_rows: usize,
    values: Vec<f64>,
}

impl FeatureMatrix {
    /// Builds a matrix from row-major values.
    pub fn new(column_names: Vec<String>, n_rows: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_rows * column_names.len() {
            return Err(DatasetError::Invalid(format!(
                "matrix has {} values, expected {} rows x {} columns",
                values.len(),
                n_rows,
                column_names.len()
            )));
        }
        let mut seen = HashMap::new();
        for (i, name) in column_names.iter().enumerate() {
            if let Some(prev) = seen.insert(name.as_str(), i) {
                return Err(DatasetError::Invalid(format!(
                    "duplicate column name `{name}` at positions {prev} and {i}"
                )));
            }
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(DatasetError::Invalid(format!(
                "non-finite value at row {}, column `{}`",
                pos / column_names.len().max(1),
                column_names[pos % column_names.len().max(1)]
            )));
        }
        Ok(FeatureMatrix {
            column_names,
            n_rows,
            values,
        })
    }

    pub fn from_rows(column_names: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let n_cols = column_names.len();
        if let Some(bad) = rows.iter().position(|r| r.len() != n_cols) {
            return Err(DatasetError::Invalid(format!(
                "row {bad} has {} values, expected {n_cols}",
                rows[bad].len()
            )));
        }
        Self::new(column_names, rows.len(), rows.concat())
    }

    pub fn from_columns(column_names: Vec<String>, columns: &[Vec<f64>]) -> Result<Self> {
        if columns.len() != column_names.len() {
            return Err(DatasetError::Invalid(format!(
                "{} columns given for {} names",
                columns.len(),
                column_names.len()
            )));
        }
        let n_rows = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != n_rows) {
            return Err(DatasetError::Invalid("columns differ in length".into()));
        }
        let mut values = Vec::with_capacity(n_rows * columns.len());
        for r in 0..n_rows {
            values.extend(columns.iter().map(|c| c[r]));
        }
        Self::new(column_names, n_rows, values)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.column_names.len()
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n_cols() + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let c = self.n_cols();
        &self.values[row * c..(row + 1) * c]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.n_rows).map(move |r| self.row(r))
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        self.rows().map(|r| r[col]).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.column_names.iter().position(|c| c == name)
    }

    /// New matrix holding the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        let mut values = Vec::with_capacity(rows.len() * self.n_cols());
        for &r in rows {
            values.extend_from_slice(self.row(r));
        }
        FeatureMatrix {
            column_names: self.column_names.clone(),
            n_rows: rows.len(),
            values,
        }
    }

    /// Returns a copy with extra columns appended on the right.
    pub fn with_appended_columns(&self, names: &[String], columns: &[Vec<f64>]) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(DatasetError::Invalid(format!(
                "{} column names for {} columns",
                names.len(),
                columns.len()
            )));
        }
        if let Some(c) = columns.iter().find(|c| c.len() != self.n_rows) {
            return Err(DatasetError::Invalid(format!(
                "appended column has {} rows, matrix has {}",
                c.len(),
                self.n_rows
            )));
        }
        let mut column_names = self.column_names.clone();
        column_names.extend(names.iter().cloned());
        let mut values = Vec::with_capacity(self.n_rows * column_names.len());
        for r in 0..self.n_rows {
            values.extend_from_slice(self.row(r));
            values.extend(columns.iter().map(|c| c[r]));
        }
        Self::new(column_names, self.n_rows, values)
    }
}

/// Features and target of one hierarchy node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub features: FeatureMatrix,
    pub target: Vec<f64>,
}

/// One parent and its children on a shared daily index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchyBundle {
    pub dates: Vec<NaiveDate>,
    pub promotion: Vec<bool>,
    pub holiday: Vec<bool>,
    pub parent: Node,
    pub children: Vec<Node>,
    pub coherent: bool,
}

impl HierarchyBundle {
    /// Assembles a bundle from raw columns, deriving calendar features for every node.
    ///
    /// Rows must already be in strictly increasing date order.
    pub fn from_columns(
        dates: Vec<NaiveDate>,
        promotion: Vec<bool>,
        holiday: Vec<bool>,
        parent: Vec<f64>,
        children: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let n = dates.len();
        if n == 0 {
            return Err(DatasetError::Invalid("bundle has no rows".into()));
        }
        if let Some(w) = dates.windows(2).position(|w| w[0] >= w[1]) {
            return Err(DatasetError::Invalid(format!(
                "dates not strictly increasing at row {}",
                w + 1
            )));
        }
        if parent.len() != n || children.iter().any(|c| c.len() != n) {
            return Err(DatasetError::Invalid(
                "all series must share the date index length".into(),
            ));
        }
        for (name, series) in std::iter::once(("parent".to_string(), &parent)).chain(
            children
                .iter()
                .enumerate()
                .map(|(j, c)| (format!("child_{j}"), c)),
        ) {
            if let Some(t) = series.iter().position(|v| !v.is_finite() || *v < 0.0) {
                return Err(DatasetError::Invalid(format!(
                    "{name} demand at row {t} is {}, expected a nonnegative number",
                    series[t]
                )));
            }
        }
        let features = derive_calendar_features(&dates, &promotion, &holiday)?;
        let coherent = !children.is_empty() && is_coherent(&parent, &children)?;
        Ok(HierarchyBundle {
            parent: Node {
                features: features.clone(),
                target: parent,
            },
            children: children
                .into_iter()
                .map(|target| Node {
                    features: features.clone(),
                    target,
                })
                .collect(),
            dates,
            promotion,
            holiday,
            coherent,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.dates.len()
    }

    pub fn n_children(&self) -> usize {
        self.children.len()
    }

    /// Children in index order, then the parent.
    pub fn series_ids(&self) -> Vec<SeriesId> {
        (0..self.n_children())
            .map(SeriesId::child)
            .chain(std::iter::once(SeriesId::PARENT))
            .collect()
    }

    pub fn node(&self, id: SeriesId) -> Option<&Node> {
        match id.level {
            Level::Parent => Some(&self.parent),
            Level::Child => self.children.get(id.index),
        }
    }

    pub fn child_targets(&self) -> Vec<Vec<f64>> {
        self.children.iter().map(|c| c.target.clone()).collect()
    }

    /// Per-row observations of one series.
    pub fn observations(&self, id: SeriesId) -> Option<Vec<Observation>> {
        let node = self.node(id)?;
        Some(
            (0..self.n_rows())
                .map(|t| Observation {
                    date: self.dates[t],
                    promotion: self.promotion[t],
                    holiday: self.holiday[t],
                    demand: node.target[t],
                })
                .collect(),
        )
    }
}

/// Maps CSV headers onto hierarchy roles. Loadable from a JSON sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColumnSchema {
    pub date: String,
    pub promotion: String,
    pub holiday: String,
    pub parent: String,
    /// Explicit child columns; when absent, `child_0`, `child_1`, ... are taken
    /// from the header until the first gap.
    pub children: Option<Vec<String>>,
}

impl Default for ColumnSchema {
    fn default() -> Self {
        ColumnSchema {
            date: "date".into(),
            promotion: "promotion".into(),
            holiday: "holiday".into(),
            parent: "parent".into(),
            children: None,
        }
    }
}

impl ColumnSchema {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| DatasetError::Schema(e.to_string()))
    }
}

/// Parses `YYYY-MM-DD` or `DD/MM/YYYY`.
pub fn parse_date(s: &str) -> Option<NaiveDate> {
    let s = s.trim();
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .or_else(|_| NaiveDate::parse_from_str(s, "%d/%m/%Y"))
        .ok()
}

fn parse_flag(s: &str) -> Option<bool> {
    match s.trim() {
        "0" => Some(false),
        "1" => Some(true),
        _ => None,
    }
}

pub fn load_csv(path: &Path, schema: &ColumnSchema) -> Result<HierarchyBundle> {
    let file = File::open(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_csv(file, schema)
}

pub fn read_csv<R: Read>(reader: R, schema: &ColumnSchema) -> Result<HierarchyBundle> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DatasetError::MissingColumn(name.to_string()))
    };
    let date_col = find(&schema.date)?;
    let promo_col = find(&schema.promotion)?;
    let holiday_col = find(&schema.holiday)?;
    let parent_col = find(&schema.parent)?;
    let child_names: Vec<String> = match &schema.children {
        Some(names) => names.clone(),
        None => (0..)
            .map(|j| format!("child_{j}"))
            .take_while(|name| header.iter().any(|h| h == name))
            .collect(),
    };
    if child_names.is_empty() {
        return Err(DatasetError::MissingColumn("child_0".into()));
    }
    let child_cols = child_names
        .iter()
        .map(|n| find(n))
        .collect::<Result<Vec<_>>>()?;

    struct Row {
        line: u64,
        date: NaiveDate,
        promotion: bool,
        holiday: bool,
        parent: f64,
        children: Vec<f64>,
    }

    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |col: usize, name: &str| -> Result<&str> {
            record.get(col).ok_or_else(|| DatasetError::Parse {
                line,
                column: name.to_string(),
                value: String::new(),
            })
        };
        let parse_err = |name: &str, value: &str| DatasetError::Parse {
            line,
            column: name.to_string(),
            value: value.to_string(),
        };
        let demand = |col: usize, name: &str| -> Result<f64> {
            let raw = field(col, name)?;
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() && v >= 0.0 => Ok(v),
                _ => Err(parse_err(name, raw)),
            }
        };
        let raw_date = field(date_col, &schema.date)?;
        let date = parse_date(raw_date).ok_or_else(|| parse_err(&schema.date, raw_date))?;
        let raw_promo = field(promo_col, &schema.promotion)?;
        let promotion = parse_flag(raw_promo).ok_or_else(|| parse_err(&schema.promotion, raw_promo))?;
        let raw_hol = field(holiday_col, &schema.holiday)?;
        let holiday = parse_flag(raw_hol).ok_or_else(|| parse_err(&schema.holiday, raw_hol))?;
        let parent = demand(parent_col, &schema.parent)?;
        let children = child_cols
            .iter()
            .zip(&child_names)
            .map(|(&c, n)| demand(c, n))
            .collect::<Result<Vec<_>>>()?;
        rows.push(Row {
            line,
            date,
            promotion,
            holiday,
            parent,
            children,
        });
    }
    if rows.is_empty() {
        return Err(DatasetError::Invalid("CSV has no data rows".into()));
    }

    rows.sort_by_key(|r| r.date);
    if let Some(w) = rows.windows(2).find(|w| w[0].date == w[1].date) {
        let dup = w[0].line.max(w[1].line);
        return Err(DatasetError::DuplicateDate {
            line: dup,
            date: w[0].date,
        });
    }

    let n_children = child_cols.len();
    let mut children = vec![Vec::with_capacity(rows.len()); n_children];
    for r in &rows {
        for (j, v) in r.children.iter().enumerate() {
            children[j].push(*v);
        }
    }
    HierarchyBundle::from_columns(
        rows.iter().map(|r| r.date).collect(),
        rows.iter().map(|r| r.promotion).collect(),
        rows.iter().map(|r| r.holiday).collect(),
        rows.iter().map(|r| r.parent).collect(),
        children,
    )
}

/// Writes the bundle in the default column layout (ISO dates).
pub fn write_csv<W: Write>(bundle: &HierarchyBundle, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec![
        "date".to_string(),
        "promotion".to_string(),
        "holiday".to_string(),
        "parent".to_string(),
    ];
    header.extend((0..bundle.n_children()).map(|j| format!("child_{j}")));
    wtr.write_record(&header)?;
    for t in 0..bundle.n_rows() {
        let mut rec = vec![
            bundle.dates[t].format("%Y-%m-%d").to_string(),
            u8::from(bundle.promotion[t]).to_string(),
            u8::from(bundle.holiday[t]).to_string(),
            bundle.parent.target[t].to_string(),
        ];
        rec.extend(bundle.children.iter().map(|c| c.target[t].to_string()));
        wtr.write_record(&rec)?;
    }
    wtr.flush().map_err(|source| DatasetError::Io {
        path: "<csv writer>".into(),
        source,
    })?;
    Ok(())
}

pub fn save_csv(bundle: &HierarchyBundle, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    write_csv(bundle, std::io::BufWriter::new(file))
}

/// Promotion and holiday flags, seven weekday dummies and the numeric date parts.
pub fn derive_calendar_features(
    dates: &[NaiveDate],
    promotion: &[bool],
    holiday: &[bool],
) -> Result<FeatureMatrix> {
    if promotion.len() != dates.len() || holiday.len() != dates.len() {
        return Err(DatasetError::Invalid(format!(
            "calendar inputs differ in length: {} dates, {} promotion flags, {} holiday flags",
            dates.len(),
            promotion.len(),
            holiday.len()
        )));
    }
    let mut values = Vec::with_capacity(dates.len() * CALENDAR_COLUMNS.len());
    for ((date, &promo), &hol) in dates.iter().zip(promotion).zip(holiday) {
        values.push(f64::from(u8::from(promo)));
        values.push(f64::from(u8::from(hol)));
        let dow = date.weekday().num_days_from_monday() as usize;
        values.extend((0..7).map(|d| if d == dow { 1.0 } else { 0.0 }));
        values.push(f64::from(date.day()));
        values.push(f64::from(date.month()));
        values.push(f64::from(date.year()));
    }
    FeatureMatrix::new(
        CALENDAR_COLUMNS.iter().map(|s| s.to_string()).collect(),
        dates.len(),
        values,
    )
}

/// Weekday of a date as used for the dummy columns (Monday = 0).
pub fn weekday_index(date: NaiveDate) -> usize {
    match date.weekday() {
        Weekday::Mon => 0,
        Weekday::Tue => 1,
        Weekday::Wed => 2,
        Weekday::Thu => 3,
        Weekday::Fri => 4,
        Weekday::Sat => 5,
        Weekday::Sun => 6,
    }
}

/// Elementwise sum of the child series.
pub fn aggregate_children<S: AsRef<[f64]>>(children: &[S]) -> Result<Vec<f64>> {
    let first = children
        .first()
        .ok_or_else(|| DatasetError::Invalid("no child series to aggregate".into()))?;
    let n = first.as_ref().len();
    if let Some(j) = children.iter().position(|c| c.as_ref().len() != n) {
        return Err(DatasetError::Invalid(format!(
            "child {j} has length {}, expected {n}",
            children[j].as_ref().len()
        )));
    }
    let mut total = vec![0.0; n];
    for c in children {
        for (acc, v) in total.iter_mut().zip(c.as_ref()) {
            *acc += v;
        }
    }
    Ok(total)
}

pub fn is_coherent<S: AsRef<[f64]>>(parent: &[f64], children: &[S]) -> Result<bool> {
    let total = aggregate_children(children)?;
    if total.len() != parent.len() {
        return Err(DatasetError::Invalid("parent and children differ in length".into()));
    }
    Ok(parent
        .iter()
        .zip(&total)
        .all(|(p, s)| (p - s).abs() <= COHERENCE_TOL))
}
