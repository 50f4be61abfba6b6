use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cosine similarities; rows index the first set (test), columns the second
/// (train).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityMatrix {
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

pub fn cosine_matrix(rows: &[Vec<f64>], cols: &[Vec<f64>]) -> Result<SimilarityMatrix> {
    let dim = rows.first().or(cols.first()).map_or(0, Vec::len);
    if rows.iter().chain(cols).any(|v| v.len() != dim) {
        return Err(Error::InvalidInput("embeddings differ in dimension".into()));
    }
    let norm = |v: &Vec<f64>| -> Result<f64> {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 0.0 && n.is_finite() {
            Ok(n)
        } else {
            Err(Error::InvalidInput("zero-norm or non-finite embedding".into()))
        }
    };
    let rn: Vec<f64> = rows.iter().map(norm).collect::<Result<_>>()?;
    let cn: Vec<f64> = cols.iter().map(norm).collect::<Result<_>>()?;
    let values = rows
        .iter()
        .zip(&rn)
        .map(|(a, na)| {
            cols.iter()
                .zip(&cn)
                .map(|(b, nb)| {
                    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                    (dot / (na * nb)).clamp(-1.0, 1.0)
                })
                .collect()
        })
        .collect();
    Ok(SimilarityMatrix {
        row_labels: (1..=rows.len()).map(|i| i.to_string()).collect(),
        col_labels: (1..=cols.len()).map(|i| i.to_string()).collect(),
        values,
    })
}

impl SimilarityMatrix {
    pub fn with_labels(mut self, rows: Vec<String>, cols: Vec<String>) -> Result<Self> {
        if rows.len() != self.values.len() || cols.len() != self.col_labels.len() {
            return Err(Error::InvalidInput("label counts do not match matrix".into()));
        }
        self.row_labels = rows;
        self.col_labels = cols;
        Ok(self)
    }

    pub fn n_rows(&self) -> usize {
        self.values.len()
    }

    pub fn n_cols(&self) -> usize {
        self.col_labels.len()
    }

    /// Mean over the selected columns of row `r`.
    pub fn row_mean_over(&self, r: usize, cols: &[usize]) -> f64 {
        cols.iter().map(|&c| self.values[r][c]).sum::<f64>() / cols.len() as f64
    }

    /// CSV with a leading label column.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("label");
        for c in &self.col_labels {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for (label, row) in self.row_labels.iter().zip(&self.values) {
            out.push_str(label);
            for v in row {
                out.push(',');
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_and_orthogonal() {
        let m = cosine_matrix(&[vec![0.3, 0.4]], &[vec![0.3, 0.4], vec![-0.4, 0.3]]).unwrap();
        assert!((m.values[0][0] - 1.0).abs() < 1e-12);
        assert!(m.values[0][1].abs() < 1e-12);
    }

    #[test]
    fn zero_norm_rejected() {
        assert!(cosine_matrix(&[vec![0.0, 0.0]], &[vec![1.0, 0.0]]).is_err());
        assert!(cosine_matrix(&[vec![1.0]], &[vec![1.0, 0.0]]).is_err());
    }

    #[test]
    fn self_similarity_has_unit_diagonal() {
        let e: Vec<Vec<f64>> = (0..6)
            .map(|i| (0..5).map(|j| ((i * 5 + j) as f64).sin().abs() + 0.01).collect())
            .collect();
        let m = cosine_matrix(&e, &e).unwrap();
        for i in 0..6 {
            assert!((m.values[i][i] - 1.0).abs() < 1e-12);
            assert!(m.values[i].iter().all(|v| v.abs() <= 1.0 + 1e-12));
        }
    }

    #[test]
    fn csv_has_labels() {
        let m = cosine_matrix(&[vec![1.0, 0.0]], &[vec![1.0, 0.0]])
            .unwrap()
            .with_labels(vec!["te1".into()], vec!["tr1".into()])
            .unwrap();
        assert_eq!(m.to_csv(), "label,tr1\nte1,1\n");
    }
}
