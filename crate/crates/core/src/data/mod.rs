//! Column-schema'd tables, the built-in soil fixture, CSV ingestion and the
//! linear-Gaussian oracle benchmark.

mod csv_io;
mod oracle;
mod soil;

pub use csv_io::{load_csv, read_csv, write_csv, write_csv_to};
pub use oracle::{
    gaussian_conditional_mean, generate_oracle_benchmark, oracle_joint_distribution,
    oracle_schema, OracleBenchmark, INDEX_PROPERTIES, MECHANICAL_TARGETS,
};
pub use soil::{builtin_soil_dataset, builtin_soil_samples, soil_schema, vs_from_n, SoilClass, SoilSample};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Floor applied to every standard deviation, in raw column units.
pub const STD_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnRole {
    IndexFeature,
    MechanicalTarget,
    ClassLabel,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    pub role: ColumnRole,
    #[serde(default)]
    pub units: String,
}

impl ColumnSchema {
    pub fn new(name: impl Into<String>, role: ColumnRole, units: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            role,
            units: units.into(),
        }
    }
}

/// A rectangular table of real values with a per-cell missingness mask.
///
/// Cells of `class_label` columns hold the index of the label in
/// [`DataTable::classes`], which is kept sorted so that two tables carrying
/// the same label set agree on the encoding.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(into = "TableRepr", try_from = "TableRepr")]
pub struct DataTable {
    schema: Vec<ColumnSchema>,
    n_rows: usize,
    values: Vec<f64>,
    missing: Vec<bool>,
    classes: Vec<String>,
}

/// Missing cells compare equal regardless of their placeholder value.
impl PartialEq for DataTable {
    fn eq(&self, other: &Self) -> bool {
        self.schema == other.schema
            && self.n_rows == other.n_rows
            && self.classes == other.classes
            && self.missing == other.missing
            && self
                .values
                .iter()
                .zip(&other.values)
                .zip(&self.missing)
                .all(|((a, b), &m)| m || a == b)
    }
}

#[derive(Serialize, Deserialize)]
struct TableRepr {
    schema: Vec<ColumnSchema>,
    #[serde(default)]
    classes: Vec<String>,
    rows: Vec<Vec<Option<f64>>>,
}

impl From<DataTable> for TableRepr {
    fn from(t: DataTable) -> Self {
        let rows = (0..t.n_rows)
            .map(|r| (0..t.n_cols()).map(|c| t.value(r, c)).collect())
            .collect();
        TableRepr {
            schema: t.schema,
            classes: t.classes,
            rows,
        }
    }
}

impl TryFrom<TableRepr> for DataTable {
    type Error = Error;

    fn try_from(r: TableRepr) -> Result<Self> {
        DataTable::new(r.schema, r.rows, r.classes)
    }
}

impl DataTable {
    /// Builds a table from rows of optional cells. `None` marks a missing
    /// cell. Class columns carry indices into `classes`.
    pub fn new(
        schema: Vec<ColumnSchema>,
        rows: Vec<Vec<Option<f64>>>,
        classes: Vec<String>,
    ) -> Result<Self> {
        validate_schema(&schema)?;
        let mut sorted = classes.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != classes.len() {
            return Err(Error::Schema("duplicate class names".into()));
        }
        // remap indices when the registry was not already sorted
        let remap: Vec<usize> = classes
            .iter()
            .map(|c| sorted.binary_search(c).expect("present"))
            .collect();

        let n_cols = schema.len();
        let mut values = Vec::with_capacity(rows.len() * n_cols);
        let mut missing = Vec::with_capacity(rows.len() * n_cols);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != n_cols {
                return Err(Error::Schema(format!(
                    "row {r} has {} cells, schema has {n_cols}",
                    row.len()
                )));
            }
            for (c, cell) in row.iter().enumerate() {
                match *cell {
                    None => {
                        values.push(f64::NAN);
                        missing.push(true);
                    }
                    Some(v) if !v.is_finite() => {
                        return Err(Error::InvalidInput(format!(
                            "non-finite value at row {r}, column '{}'",
                            schema[c].name
                        )));
                    }
                    Some(v) => {
                        let v = if schema[c].role == ColumnRole::ClassLabel {
                            let idx = v as usize;
                            if v < 0.0 || v.fract() != 0.0 || idx >= classes.len() {
                                return Err(Error::InvalidInput(format!(
                                    "invalid class index {v} at row {r}, column '{}'",
                                    schema[c].name
                                )));
                            }
                            remap[idx] as f64
                        } else {
                            v
                        };
                        values.push(v);
                        missing.push(false);
                    }
                }
            }
        }
        Ok(Self {
            schema,
            n_rows: rows.len(),
            values,
            missing,
            classes: sorted,
        })
    }

    /// Builds a fully observed numeric table from a row-major matrix.
    pub fn from_matrix(schema: Vec<ColumnSchema>, rows: &[Vec<f64>]) -> Result<Self> {
        let rows = rows
            .iter()
            .map(|r| r.iter().map(|&v| Some(v)).collect())
            .collect();
        Self::new(schema, rows, Vec::new())
    }

    pub fn schema(&self) -> &[ColumnSchema] {
        &self.schema
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.schema.len()
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.schema.iter().position(|c| c.name == name)
    }

    pub fn column_names(&self) -> Vec<&str> {
        self.schema.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn columns_with_role(&self, role: ColumnRole) -> Vec<usize> {
        (0..self.n_cols())
            .filter(|&c| self.schema[c].role == role)
            .collect()
    }

    /// Raw cell value; NaN for missing cells.
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n_cols() + col]
    }

    pub fn value(&self, row: usize, col: usize) -> Option<f64> {
        (!self.is_missing(row, col)).then(|| self.get(row, col))
    }

    pub fn is_missing(&self, row: usize, col: usize) -> bool {
        self.missing[row * self.n_cols() + col]
    }

    /// Row slice with NaN in missing cells.
    pub fn row(&self, row: usize) -> &[f64] {
        let n = self.n_cols();
        &self.values[row * n..(row + 1) * n]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.n_rows).map(|r| self.get(r, col)).collect()
    }

    pub fn missing_mask(&self) -> Vec<Vec<bool>> {
        let n = self.n_cols();
        self.missing.chunks(n.max(1)).map(|c| c.to_vec()).collect()
    }

    pub fn missing_count(&self) -> usize {
        self.missing.iter().filter(|&&m| m).count()
    }

    pub fn is_fully_observed(&self, cols: &[usize]) -> bool {
        (0..self.n_rows).all(|r| cols.iter().all(|&c| !self.is_missing(r, c)))
    }

    pub fn class_label(&self, row: usize, col: usize) -> Option<&str> {
        if self.schema[col].role != ColumnRole::ClassLabel {
            return None;
        }
        self.value(row, col)
            .map(|v| self.classes[v as usize].as_str())
    }

    /// Per-row labels of the first class column, if the table has one.
    pub fn class_labels(&self) -> Option<Vec<Option<&str>>> {
        let col = *self.columns_with_role(ColumnRole::ClassLabel).first()?;
        Some((0..self.n_rows).map(|r| self.class_label(r, col)).collect())
    }

    /// Row-major copy of the table (NaN in missing cells).
    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n_rows).map(|r| self.row(r).to_vec()).collect()
    }

    /// Copy of the table with the given cells marked missing.
    pub fn with_missing(&self, mask: &[Vec<bool>]) -> Result<Self> {
        if mask.len() != self.n_rows || mask.iter().any(|m| m.len() != self.n_cols()) {
            return Err(Error::InvalidInput("mask shape does not match table".into()));
        }
        let mut out = self.clone();
        for (r, row) in mask.iter().enumerate() {
            for (c, &m) in row.iter().enumerate() {
                if m {
                    let i = r * self.n_cols() + c;
                    out.missing[i] = true;
                    out.values[i] = f64::NAN;
                }
            }
        }
        Ok(out)
    }
}

fn validate_schema(schema: &[ColumnSchema]) -> Result<()> {
    for (i, c) in schema.iter().enumerate() {
        if schema[..i].iter().any(|o| o.name == c.name) {
            return Err(Error::Schema(format!("duplicate column name '{}'", c.name)));
        }
    }
    Ok(())
}

/// Per-column mean and population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationStats {
    pub columns: Vec<usize>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl StandardizationStats {
    /// Fits statistics over the columns of a dense row-major matrix. Column
    /// indices are `0..d`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        Self::fit(rows.iter().map(Vec::as_slice), (0..d).collect())
    }

    fn fit<'a>(rows: impl Iterator<Item = &'a [f64]> + Clone, columns: Vec<usize>) -> Result<Self> {
        let d = columns.len();
        let mut n = 0usize;
        let mut mean = vec![0.0; d];
        for row in rows.clone() {
            for (j, &c) in columns.iter().enumerate() {
                let v = row[c];
                if !v.is_finite() {
                    return Err(Error::InvalidInput(format!(
                        "non-finite or missing value in column {c}"
                    )));
                }
                mean[j] += v;
            }
            n += 1;
        }
        if n == 0 {
            return Err(Error::InvalidInput(
                "cannot standardize a table with zero rows".into(),
            ));
        }
        for m in &mut mean {
            *m /= n as f64;
        }
        let mut var = vec![0.0; d];
        for row in rows {
            for (j, &c) in columns.iter().enumerate() {
                let dv = row[c] - mean[j];
                var[j] += dv * dv;
            }
        }
        let std = var
            .into_iter()
            .map(|v| (v / n as f64).sqrt().max(STD_FLOOR))
            .collect();
        Ok(Self { columns, mean, std })
    }

    /// Standardizes a vector whose entries line up with `columns`.
    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

/// Mean and std of every non-class column of a training table.
pub fn fit_standardization(train: &DataTable) -> Result<StandardizationStats> {
    let columns: Vec<usize> = (0..train.n_cols())
        .filter(|&c| train.schema()[c].role != ColumnRole::ClassLabel)
        .collect();
    if !train.is_fully_observed(&columns) {
        return Err(Error::InvalidInput(
            "standardization requires fully observed columns".into(),
        ));
    }
    StandardizationStats::fit((0..train.n_rows()).map(|r| train.row(r)), columns)
}
