use std::collections::BTreeSet;
use std::io::Read;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::sortition::PointSet;

/// Which CSV columns become coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureConfig {
    pub numeric: Vec<String>,
    pub categorical: Vec<String>,
    /// Z-score numeric columns before building points.
    pub standardize: bool,
    /// Cell value marking a missing entry; rows containing it are dropped.
    pub missing_marker: String,
}

impl FeatureConfig {
    pub fn new<N: Into<String>, C: Into<String>>(
        numeric: impl IntoIterator<Item = N>,
        categorical: impl IntoIterator<Item = C>,
    ) -> Self {
        FeatureConfig {
            numeric: numeric.into_iter().map(Into::into).collect(),
            categorical: categorical.into_iter().map(Into::into).collect(),
            standardize: false,
            missing_marker: "?".into(),
        }
    }

    /// Age, education years and weekly hours as coordinates; marital status,
    /// relationship, race and sex one-hot encoded. Column names follow the
    /// UCI Adult census extract.
    pub fn adult() -> Self {
        Self::new(
            ["age", "education-num", "hours-per-week"],
            ["marital-status", "relationship", "race", "sex"],
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DemographicRow {
    pub numeric: Vec<f64>,
    pub categorical: Vec<String>,
}

/// Deduplicated records restricted to the configured features, sorted so the
/// result does not depend on input row order.
#[derive(Clone, Debug, PartialEq)]
pub struct DemographicTable {
    pub numeric_names: Vec<String>,
    pub categorical_names: Vec<String>,
    pub rows: Vec<DemographicRow>,
    /// Rows skipped because a configured field held the missing marker.
    pub dropped_missing: usize,
    pub duplicates_removed: usize,
}

impl DemographicTable {
    /// Category values per categorical column, sorted.
    pub fn categories(&self) -> Vec<Vec<String>> {
        (0..self.categorical_names.len())
            .map(|c| {
                self.rows
                    .iter()
                    .map(|r| r.categorical[c].clone())
                    .collect::<BTreeSet<_>>()
                    .into_iter()
                    .collect()
            })
            .collect()
    }

    /// Numeric columns as coordinates followed by one one-hot block per
    /// categorical column.
    pub fn to_points(&self, standardize: bool) -> Result<PointSet> {
        let categories = self.categories();
        let n_numeric = self.numeric_names.len();
        let mut scale = vec![(0.0, 1.0); n_numeric];
        if standardize && !self.rows.is_empty() {
            let n = self.rows.len() as f64;
            for (c, s) in scale.iter_mut().enumerate() {
                let mean = self.rows.iter().map(|r| r.numeric[c]).sum::<f64>() / n;
                let var = self.rows.iter().map(|r| (r.numeric[c] - mean).powi(2)).sum::<f64>() / n;
                *s = (mean, if var > 0.0 { var.sqrt() } else { 1.0 });
            }
        }
        let rows = self
            .rows
            .iter()
            .map(|r| {
                let mut point: Vec<f64> =
                    r.numeric.iter().zip(&scale).map(|(x, (mean, sd))| (x - mean) / sd).collect();
                for (value, cats) in r.categorical.iter().zip(&categories) {
                    point.extend(cats.iter().map(|c| if c == value { 1.0 } else { 0.0 }));
                }
                point
            })
            .collect();
        PointSet::deduplicated(rows)
    }
}

pub fn read_demographics(path: impl AsRef<Path>, config: &FeatureConfig) -> Result<DemographicTable> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    read_demographics_from(file, path, config)
}

/// Reads a headed CSV (RFC 4180 quoting) and keeps the configured columns.
pub fn read_demographics_from(
    reader: impl Read,
    origin: impl AsRef<Path>,
    config: &FeatureConfig,
) -> Result<DemographicTable> {
    let origin: PathBuf = origin.as_ref().to_path_buf();
    let err = |line: usize, message: String| Error::Parse { path: origin.clone(), line, message };
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = reader.headers().map_err(|e| err(1, e.to_string()))?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| err(1, format!("missing column {name:?}")))
    };
    let numeric_cols = config.numeric.iter().map(|n| column(n)).collect::<Result<Vec<_>>>()?;
    let categorical_cols = config.categorical.iter().map(|n| column(n)).collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    let mut dropped_missing = 0;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            err(line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let field = |c: usize| record.get(c).unwrap_or("");
        let used = numeric_cols.iter().chain(&categorical_cols);
        if used.clone().any(|&c| field(c) == config.missing_marker) {
            dropped_missing += 1;
            continue;
        }
        let numeric = numeric_cols
            .iter()
            .zip(&config.numeric)
            .map(|(&c, name)| {
                field(c)
                    .parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| err(line, format!("column {name:?}: {:?} is not a finite number", field(c))))
            })
            .collect::<Result<Vec<_>>>()?;
        let categorical = categorical_cols.iter().map(|&c| field(c).to_string()).collect();
        rows.push(DemographicRow { numeric, categorical });
    }

    rows.sort_by(|a, b| {
        a.categorical.cmp(&b.categorical).then_with(|| {
            a.numeric
                .iter()
                .zip(&b.numeric)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    let before = rows.len();
    rows.dedup_by(|a, b| a == b);
    Ok(DemographicTable {
        numeric_names: config.numeric.clone(),
        categorical_names: config.categorical.clone(),
        duplicates_removed: before - rows.len(),
        rows,
        dropped_missing,
    })
}

/// Headed CSV containing the configured columns only.
pub fn write_demographics(table: &DemographicTable) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    let header: Vec<&str> =
        table.numeric_names.iter().chain(&table.categorical_names).map(String::as_str).collect();
    writer.write_record(&header).expect("in-memory write");
    for row in &table.rows {
        let mut fields: Vec<String> = row.numeric.iter().map(|x| format!("{x}")).collect();
        fields.extend(row.categorical.iter().cloned());
        writer.write_record(&fields).expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

/// Reads, deduplicates and encodes a demographic CSV as points.
pub fn parse_demographics(path: impl AsRef<Path>, config: &FeatureConfig) -> Result<PointSet> {
    read_demographics(path, config)?.to_points(config.standardize)
}
