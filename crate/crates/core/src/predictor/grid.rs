use serde::{Deserialize, Serialize};

use super::PredictorContext;
use crate::error::{Error, Result};
use crate::exec::Exec;

/// Probability of one class evaluated at the cell centres of a 2-D grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionGrid {
    pub class: String,
    pub x_axis: Vec<f64>,
    pub y_axis: Vec<f64>,
    /// Row-major: `probs[iy * nx + ix]`.
    pub probs: Vec<f64>,
}

/// A level crossing along a vertical slice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub y: f64,
    /// True when the probability drops below the level as `y` increases.
    pub falling: bool,
}

pub fn decision_grid(
    ctx: &PredictorContext,
    class: &str,
    x_range: (f64, f64),
    y_range: (f64, f64),
    resolution: (usize, usize),
    exec: Exec,
) -> Result<DecisionGrid> {
    let class_idx = ctx
        .class_names()
        .ok_or_else(|| Error::InvalidInput("decision grid needs a categorical context".into()))?
        .iter()
        .position(|c| c == class)
        .ok_or_else(|| Error::InvalidInput(format!("unknown class '{class}'")))?;
    if ctx.d() != 2 {
        return Err(Error::InvalidInput(format!(
            "decision grid needs a 2-feature context, got {}",
            ctx.d()
        )));
    }
    let (nx, ny) = resolution;
    if nx < 2 || ny < 2 {
        return Err(Error::InvalidInput("grid resolution must be >= 2 per axis".into()));
    }
    let axis = |(lo, hi): (f64, f64), n: usize| -> Result<Vec<f64>> {
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(Error::InvalidInput(format!("degenerate range [{lo}, {hi}]")));
        }
        let step = (hi - lo) / n as f64;
        Ok((0..n).map(|i| lo + (i as f64 + 0.5) * step).collect())
    };
    let x_axis = axis(x_range, nx)?;
    let y_axis = axis(y_range, ny)?;
    let probs = exec.try_map(nx * ny, |i| {
        let (ix, iy) = (i % nx, i / nx);
        ctx.predict_class_proba(&[x_axis[ix], y_axis[iy]])
            .map(|p| p.probs[class_idx])
    })?;
    Ok(DecisionGrid {
        class: class.to_string(),
        x_axis,
        y_axis,
        probs,
    })
}

impl DecisionGrid {
    pub fn nx(&self) -> usize {
        self.x_axis.len()
    }

    pub fn ny(&self) -> usize {
        self.y_axis.len()
    }

    pub fn get(&self, ix: usize, iy: usize) -> f64 {
        self.probs[iy * self.nx() + ix]
    }

    /// Column of probabilities at `x`, linearly interpolated between the two
    /// nearest grid columns (clamped at the ends).
    pub fn slice(&self, x: f64) -> Vec<f64> {
        let (i0, i1, t) = bracket(&self.x_axis, x);
        (0..self.ny())
            .map(|iy| self.get(i0, iy) * (1.0 - t) + self.get(i1, iy) * t)
            .collect()
    }

    /// Bilinear interpolation at `(x, y)`.
    pub fn value_at(&self, x: f64, y: f64) -> f64 {
        let col = self.slice(x);
        let (j0, j1, t) = bracket(&self.y_axis, y);
        col[j0] * (1.0 - t) + col[j1] * t
    }

    /// All crossings of `level` along the vertical slice at `x`, ascending in y.
    pub fn crossings(&self, x: f64, level: f64) -> Vec<Crossing> {
        let col = self.slice(x);
        let mut out = Vec::new();
        for j in 0..col.len() - 1 {
            let (a, b) = (col[j] - level, col[j + 1] - level);
            if (a > 0.0) != (b > 0.0) && a != b {
                let t = a / (a - b);
                out.push(Crossing {
                    y: self.y_axis[j] + t * (self.y_axis[j + 1] - self.y_axis[j]),
                    falling: a > 0.0,
                });
            }
        }
        out
    }

    /// Highest-y crossing where the class probability falls below `level`:
    /// the boundary above which the other class takes over.
    pub fn upper_boundary(&self, x: f64, level: f64) -> Option<f64> {
        self.crossings(x, level)
            .into_iter()
            .rfind(|c| c.falling)
            .map(|c| c.y)
    }
}

fn bracket(axis: &[f64], v: f64) -> (usize, usize, f64) {
    let n = axis.len();
    if v <= axis[0] {
        return (0, 0, 0.0);
    }
    if v >= axis[n - 1] {
        return (n - 1, n - 1, 0.0);
    }
    let i = axis.partition_point(|&a| a <= v) - 1;
    let t = (v - axis[i]) / (axis[i + 1] - axis[i]);
    (i, i + 1, t)
}
