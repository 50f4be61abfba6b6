//! The 32-sample N / Vs soil dataset.

use serde::{Deserialize, Serialize};

use super::{ColumnRole, ColumnSchema, DataTable};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SoilClass {
    Clay,
    Sand,
}

impl SoilClass {
    pub fn name(self) -> &'static str {
        match self {
            SoilClass::Clay => "Clay",
            SoilClass::Sand => "Sand",
        }
    }

    /// Coefficient `a` of the empirical curve `Vs = a * N^(1/3)`.
    pub fn vs_coefficient(self) -> f64 {
        match self {
            SoilClass::Clay => 100.0,
            SoilClass::Sand => 80.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoilSample {
    pub n_value: f64,
    pub vs: f64,
    pub soil: SoilClass,
}

/// Shear-wave velocity (m/s) from SPT blow count for the given soil class.
pub fn vs_from_n(n: f64, soil: SoilClass) -> Result<f64> {
    if !n.is_finite() || n <= 0.0 {
        return Err(Error::Domain(format!("blow count must be positive and finite, got {n}")));
    }
    Ok(soil.vs_coefficient() * n.cbrt())
}

use SoilClass::{Clay, Sand};

// Stored verbatim (3 decimals) so golden tests catch changes to `vs_from_n`.
const TRAIN: [(f64, f64, SoilClass); 16] = [
    (1.0, 100.000, Clay),
    (2.0, 125.992, Clay),
    (7.0, 191.293, Clay),
    (12.0, 228.943, Clay),
    (15.0, 246.621, Clay),
    (16.0, 251.984, Clay),
    (17.0, 257.128, Clay),
    (18.0, 262.074, Clay),
    (20.0, 271.442, Clay),
    (27.0, 300.000, Clay),
    (29.0, 307.232, Clay),
    (29.0, 245.785, Sand),
    (42.0, 278.082, Sand),
    (43.0, 280.272, Sand),
    (47.0, 288.706, Sand),
    (48.0, 290.739, Sand),
];

const TEST: [(f64, f64, SoilClass); 16] = [
    (4.0, 158.740, Clay),
    (5.0, 170.998, Clay),
    (9.0, 208.008, Clay),
    (10.0, 215.443, Clay),
    (11.0, 222.398, Clay),
    (28.0, 303.659, Clay),
    (38.0, 336.198, Clay),
    (14.0, 192.811, Sand),
    (25.0, 233.921, Sand),
    (27.0, 240.000, Sand),
    (30.0, 248.579, Sand),
    (33.0, 256.603, Sand),
    (38.0, 268.958, Sand),
    (40.0, 273.596, Sand),
    (45.0, 284.551, Sand),
    (49.0, 292.744, Sand),
];

fn samples(rows: &[(f64, f64, SoilClass)]) -> Vec<SoilSample> {
    rows.iter()
        .map(|&(n_value, vs, soil)| SoilSample { n_value, vs, soil })
        .collect()
}

/// Train and test samples in table order: Clay by ascending N, then Sand.
pub fn builtin_soil_samples() -> (Vec<SoilSample>, Vec<SoilSample>) {
    (samples(&TRAIN), samples(&TEST))
}

pub fn soil_schema() -> Vec<ColumnSchema> {
    vec![
        ColumnSchema::new("N", ColumnRole::IndexFeature, "blows/0.3 m"),
        ColumnSchema::new("Vs", ColumnRole::IndexFeature, "m/s"),
        ColumnSchema::new("soil", ColumnRole::ClassLabel, ""),
    ]
}

fn to_table(rows: &[(f64, f64, SoilClass)]) -> DataTable {
    let cells = rows
        .iter()
        .map(|&(n, vs, soil)| {
            let class = match soil {
                Clay => 0.0,
                Sand => 1.0,
            };
            vec![Some(n), Some(vs), Some(class)]
        })
        .collect();
    DataTable::new(soil_schema(), cells, vec!["Clay".into(), "Sand".into()])
        .expect("fixture is well formed")
}

/// The 16/16 train/test split.
pub fn builtin_soil_dataset() -> (DataTable, DataTable) {
    (to_table(&TRAIN), to_table(&TEST))
}
