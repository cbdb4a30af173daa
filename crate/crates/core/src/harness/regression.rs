//! Linear regression of reward on the PID gains.
//!
//! Columns are standardized before solving the normal equations so that
//! gains spanning three orders of magnitude stay well conditioned; the
//! coefficients are reported back in raw gain units.

use serde::{Deserialize, Serialize};

use super::episode::StepRecord;
use super::{HarnessError, Joint};

/// Minimum number of rows accepted by [`fit_ols`].
pub const MIN_RECORDS: usize = 10;

const GAIN_NAMES: [&str; 3] = ["Kp", "Ki", "Kd"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientTable {
    pub names: Vec<String>,
    pub intercept: f64,
    /// Slopes in raw units, one per column.
    pub coefficients: Vec<f64>,
    /// Slopes on standardized columns.
    pub standardized: Vec<f64>,
    pub n: usize,
    /// Largest |Zᵀr| over the standardized design including the intercept.
    pub max_normal_residual: f64,
}

impl CoefficientTable {
    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.coefficients[i])
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        self.intercept + self.coefficients.iter().zip(row).map(|(b, x)| b * x).sum::<f64>()
    }
}

/// Ordinary least squares with an intercept.
pub fn fit_ols(names: &[String], rows: &[Vec<f64>], y: &[f64]) -> Result<CoefficientTable, HarnessError> {
    let n = rows.len();
    if n < MIN_RECORDS {
        return Err(HarnessError::TooFewRecords(n));
    }
    if y.len() != n {
        return Err(HarnessError::Config(format!("{n} design rows but {} targets", y.len())));
    }
    let p = names.len();
    if let Some(bad) = rows.iter().position(|r| r.len() != p) {
        return Err(HarnessError::Config(format!("design row {bad} has the wrong width")));
    }

    let mut means = vec![0.0; p];
    let mut scales = vec![0.0; p];
    for j in 0..p {
        let m = rows.iter().map(|r| r[j]).sum::<f64>() / n as f64;
        let var = rows.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / n as f64;
        let s = var.sqrt();
        if !(s > 1e-12 * m.abs().max(1.0)) {
            return Err(HarnessError::SingularDesign {
                column: names[j].clone(),
            });
        }
        means[j] = m;
        scales[j] = s;
    }
    let z: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| (0..p).map(|j| (r[j] - means[j]) / scales[j]).collect())
        .collect();
    let y_mean = y.iter().sum::<f64>() / n as f64;

    // Centred columns decouple the intercept, leaving ZᵀZ b = Zᵀ(y - ȳ).
    let mut a = vec![vec![0.0; p + 1]; p];
    for (zr, yi) in z.iter().zip(y) {
        for i in 0..p {
            for k in 0..p {
                a[i][k] += zr[i] * zr[k];
            }
            a[i][p] += zr[i] * (yi - y_mean);
        }
    }
    let b = solve_pivoted(a, n as f64).map_err(|col| HarnessError::SingularDesign {
        column: names[col].clone(),
    })?;

    let coefficients: Vec<f64> = (0..p).map(|j| b[j] / scales[j]).collect();
    let intercept = y_mean - (0..p).map(|j| coefficients[j] * means[j]).sum::<f64>();

    let mut normal = vec![0.0; p + 1];
    for (zr, yi) in z.iter().zip(y) {
        let fitted = y_mean + (0..p).map(|j| b[j] * zr[j]).sum::<f64>();
        let r = yi - fitted;
        normal[p] += r;
        for j in 0..p {
            normal[j] += zr[j] * r;
        }
    }
    let max_normal_residual = normal.iter().fold(0.0_f64, |m, v| m.max(v.abs()));

    Ok(CoefficientTable {
        names: names.to_vec(),
        intercept,
        coefficients,
        standardized: b,
        n,
        max_normal_residual,
    })
}

/// Gaussian elimination with partial pivoting on an augmented `p × (p+1)`
/// matrix. Returns the offending column when a pivot vanishes.
fn solve_pivoted(mut a: Vec<Vec<f64>>, scale: f64) -> Result<Vec<f64>, usize> {
    let p = a.len();
    for col in 0..p {
        let pivot = (col..p)
            .max_by(|&i, &k| a[i][col].abs().total_cmp(&a[k][col].abs()))
            .unwrap_or(col);
        if !(a[pivot][col].abs() > 1e-10 * scale) {
            return Err(col);
        }
        a.swap(col, pivot);
        for row in col + 1..p {
            let f = a[row][col] / a[col][col];
            for k in col..=p {
                a[row][k] -= f * a[col][k];
            }
        }
    }
    let mut x = vec![0.0; p];
    for i in (0..p).rev() {
        let s: f64 = (i + 1..p).map(|k| a[i][k] * x[k]).sum();
        x[i] = (a[i][p] - s) / a[i][i];
    }
    Ok(x)
}

/// Coefficients fitted twice over the same learning steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientReport {
    pub crashes_excluded: CoefficientTable,
    pub crashes_included: CoefficientTable,
}

fn column_names(joints: &[Joint]) -> Vec<String> {
    joints
        .iter()
        .flat_map(|j| GAIN_NAMES.iter().map(move |g| format!("{} {g}", j.name())))
        .collect()
}

fn design(records: &[&StepRecord], joints: &[Joint]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let rows = records
        .iter()
        .map(|r| {
            joints
                .iter()
                .flat_map(|j| r.gains[j.index()].as_array())
                .collect()
        })
        .collect();
    let y = records.iter().map(|r| r.reward).collect();
    (rows, y)
}

/// Regresses reward on the gains of `joints` over the learning steps in
/// `records` (recovery motions are ignored).
pub fn fit_coefficients(records: &[StepRecord], joints: &[Joint]) -> Result<CoefficientReport, HarnessError> {
    let names = column_names(joints);
    let learning: Vec<&StepRecord> = records.iter().filter(|r| !r.recovery).collect();
    let clean: Vec<&StepRecord> = learning.iter().copied().filter(|r| !r.crashed()).collect();
    let (rows, y) = design(&learning, joints);
    let crashes_included = fit_ols(&names, &rows, &y)?;
    let (rows, y) = design(&clean, joints);
    let crashes_excluded = fit_ols(&names, &rows, &y)?;
    Ok(CoefficientReport {
        crashes_excluded,
        crashes_included,
    })
}

/// Four panels: joints tuned together or independently, each with crashes
/// excluded and included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourWayTable {
    pub names: Vec<String>,
    pub together_excluded: Vec<f64>,
    pub independent_excluded: Vec<f64>,
    pub together_included: Vec<f64>,
    pub independent_included: Vec<f64>,
}

impl FourWayTable {
    /// `together` must cover both joints; `j1` and `j2` come from the
    /// single-actuator runs on each joint.
    pub fn assemble(
        together: &CoefficientReport,
        j1: &CoefficientReport,
        j2: &CoefficientReport,
    ) -> Result<Self, HarnessError> {
        let names = column_names(&Joint::ALL);
        if together.crashes_included.names != names {
            return Err(HarnessError::Config("joint-tuned report must cover J1 and J2".into()));
        }
        let single = |rep: &CoefficientReport, j: Joint| -> Result<(), HarnessError> {
            if rep.crashes_included.names != column_names(&[j]) {
                return Err(HarnessError::Config(format!("independent report for {} has wrong columns", j.name())));
            }
            Ok(())
        };
        single(j1, Joint::J1)?;
        single(j2, Joint::J2)?;
        let concat = |a: &CoefficientTable, b: &CoefficientTable| {
            a.coefficients.iter().chain(&b.coefficients).copied().collect()
        };
        Ok(Self {
            names,
            together_excluded: together.crashes_excluded.coefficients.clone(),
            independent_excluded: concat(&j1.crashes_excluded, &j2.crashes_excluded),
            together_included: together.crashes_included.coefficients.clone(),
            independent_included: concat(&j1.crashes_included, &j2.crashes_included),
        })
    }

    /// Panels in reading order: (a), (b), (c), (d).
    pub fn panels(&self) -> [(&'static str, &[f64]); 4] {
        [
            ("together, crashes excluded", &self.together_excluded),
            ("independent, crashes excluded", &self.independent_excluded),
            ("together, crashes included", &self.together_included),
            ("independent, crashes included", &self.independent_included),
        ]
    }
}
