use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::binio::{write_file, write_json};
use crate::error::{Error, Result};

fn check_lengths(x: &[f64], y: &[f64], min: usize) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::ShapeMismatch {
            op: "metric inputs",
            left: vec![x.len()],
            right: vec![y.len()],
        });
    }
    if x.len() < min {
        return Err(Error::invalid(format!("need at least {min} items, got {}", x.len())));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("metric input".into()));
    }
    Ok(())
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// ICC(3,1) (two-way mixed, consistency, single measure) for an
/// items × raters matrix: `(BMS − EMS) / (BMS + (k−1)·EMS)`.
pub fn icc_3_1_matrix(rows: &[Vec<f64>]) -> Result<f64> {
    let n = rows.len();
    if n < 3 {
        return Err(Error::invalid(format!("ICC needs at least 3 items, got {n}")));
    }
    let k = rows[0].len();
    if k < 2 || rows.iter().any(|r| r.len() != k) {
        return Err(Error::invalid("ICC needs a rectangular matrix with at least 2 raters"));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("ICC input".into()));
    }
    let (nf, kf) = (n as f64, k as f64);
    let grand = rows.iter().flatten().sum::<f64>() / (nf * kf);
    let ss_total: f64 = rows.iter().flatten().map(|v| (v - grand).powi(2)).sum();
    let ss_rows: f64 = rows.iter().map(|r| kf * (mean(r) - grand).powi(2)).sum();
    let ss_cols: f64 = (0..k)
        .map(|j| {
            let cm = rows.iter().map(|r| r[j]).sum::<f64>() / nf;
            nf * (cm - grand).powi(2)
        })
        .sum();
    let ss_err = (ss_total - ss_rows - ss_cols).max(0.0);
    let bms = ss_rows / (nf - 1.0);
    let ems = ss_err / ((nf - 1.0) * (kf - 1.0));
    let denom = bms + (kf - 1.0) * ems;
    if denom <= 0.0 {
        return Err(Error::invalid("ICC is undefined: no variance across items"));
    }
    Ok((bms - ems) / denom)
}

/// ICC(3,1) between predictions and ground truth as two raters.
pub fn icc_3_1(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_lengths(pred, truth, 3)?;
    let rows: Vec<Vec<f64>> = pred.iter().zip(truth).map(|(&p, &t)| vec![p, t]).collect();
    icc_3_1_matrix(&rows)
}

pub fn pcc(x: &[f64], y: &[f64]) -> Result<f64> {
    check_lengths(x, y, 2)?;
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::invalid("PCC is undefined for a constant input"));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

pub fn mse(x: &[f64], y: &[f64]) -> Result<f64> {
    check_lengths(x, y, 1)?;
    Ok(x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / x.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetMetrics {
    pub icc: f64,
    pub pcc: f64,
    pub mse: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_target: BTreeMap<String, TargetMetrics>,
    pub aggregates: TargetMetrics,
}

impl MetricsReport {
    /// `pred[i][j]` and `truth[i][j]` hold target `j` of item `i`.
    pub fn compute(names: &[String], pred: &[Vec<f32>], truth: &[Vec<f32>]) -> Result<Self> {
        if pred.len() != truth.len() {
            return Err(Error::ShapeMismatch {
                op: "metrics report",
                left: vec![pred.len()],
                right: vec![truth.len()],
            });
        }
        if names.is_empty() {
            return Err(Error::invalid("no targets to score"));
        }
        let column = |m: &[Vec<f32>], j: usize| -> Result<Vec<f64>> {
            m.iter()
                .map(|r| {
                    r.get(j)
                        .map(|&v| v as f64)
                        .ok_or_else(|| Error::invalid(format!("item has no target {j}")))
                })
                .collect()
        };
        let mut per_target = BTreeMap::new();
        let mut sum = TargetMetrics {
            icc: 0.0,
            pcc: 0.0,
            mse: 0.0,
        };
        for (j, name) in names.iter().enumerate() {
            let (p, t) = (column(pred, j)?, column(truth, j)?);
            let m = TargetMetrics {
                icc: icc_3_1(&p, &t)?,
                pcc: pcc(&p, &t)?,
                mse: mse(&p, &t)?,
            };
            sum.icc += m.icc;
            sum.pcc += m.pcc;
            sum.mse += m.mse;
            per_target.insert(name.clone(), m);
        }
        let k = names.len() as f64;
        Ok(MetricsReport {
            per_target,
            aggregates: TargetMetrics {
                icc: sum.icc / k,
                pcc: sum.pcc / k,
                mse: sum.mse / k,
            },
        })
    }
}

#[derive(Serialize)]
struct MetricsFile<'a, C: Serialize> {
    config: &'a C,
    per_target: &'a BTreeMap<String, TargetMetrics>,
    aggregates: &'a TargetMetrics,
}

/// Writes `metrics.json` ({config, per_target, aggregates}) and `metrics.csv`.
pub fn write_metrics<C: Serialize>(dir: &Path, config: &C, report: &MetricsReport) -> Result<()> {
    write_json(
        &dir.join("metrics.json"),
        &MetricsFile {
            config,
            per_target: &report.per_target,
            aggregates: &report.aggregates,
        },
    )?;
    let mut csv = String::from("target,icc,pcc,mse\n");
    for (name, m) in report.per_target.iter().chain([(&"mean".to_string(), &report.aggregates)]) {
        writeln!(csv, "{name},{},{},{}", m.icc, m.pcc, m.mse).expect("writing to a String");
    }
    write_file(&dir.join("metrics.csv"), csv.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    /// Two-way ANOVA from explicit residuals `x_ij − r_i − c_j + g`.
    fn anova_icc(m: &[Vec<f64>]) -> f64 {
        let (n, k) = (m.len(), m[0].len());
        let g: f64 = m.iter().flatten().sum::<f64>() / (n * k) as f64;
        let r: Vec<f64> = m.iter().map(|row| row.iter().sum::<f64>() / k as f64).collect();
        let c: Vec<f64> = (0..k).map(|j| m.iter().map(|row| row[j]).sum::<f64>() / n as f64).collect();
        let mut ss_r = 0.0;
        let mut ss_e = 0.0;
        for i in 0..n {
            ss_r += k as f64 * (r[i] - g) * (r[i] - g);
            for j in 0..k {
                let e = m[i][j] - r[i] - c[j] + g;
                ss_e += e * e;
            }
        }
        let bms = ss_r / (n - 1) as f64;
        let ems = ss_e / ((n - 1) * (k - 1)) as f64;
        (bms - ems) / (bms + (k - 1) as f64 * ems)
    }

    #[test]
    fn icc_matches_anova_oracle() {
        let mut rng = Rng::new(8);
        for _ in 0..10 {
            let m: Vec<Vec<f64>> = (0..6).map(|_| vec![rng.normal(), rng.normal()]).collect();
            assert_abs_diff_eq!(icc_3_1_matrix(&m).unwrap(), anova_icc(&m), epsilon = 1e-10);
        }
        let hand = vec![vec![1.0, 2.0], vec![2.0, 2.0], vec![3.0, 5.0], vec![4.0, 3.0]];
        assert_abs_diff_eq!(icc_3_1_matrix(&hand).unwrap(), anova_icc(&hand), epsilon = 1e-12);
    }

    #[test]
    fn perfect_and_shifted_predictions() {
        let t = [0.5, 1.0, 3.0, 2.0, 4.5];
        assert_abs_diff_eq!(icc_3_1(&t, &t).unwrap(), 1.0, epsilon = 1e-12);
        let shifted: Vec<f64> = t.iter().map(|v| v + 0.7).collect();
        assert_abs_diff_eq!(icc_3_1(&shifted, &t).unwrap(), 1.0, epsilon = 1e-12);
        assert_eq!(pcc(&t, &t).unwrap(), 1.0);
        assert_eq!(mse(&t, &t).unwrap(), 0.0);
        let neg: Vec<f64> = t.iter().map(|v| -v).collect();
        assert_abs_diff_eq!(pcc(&t, &neg).unwrap(), -1.0, epsilon = 1e-12);
        assert!(icc_3_1(&[1.0; 4], &[1.0; 4]).is_err());
        assert!(pcc(&[1.0, 1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn pcc_and_mse_hand_values() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y = [2.0, 4.0, 5.0, 4.0, 5.0];
        // sxy = 6, sxx = 10, syy = 6
        assert_abs_diff_eq!(pcc(&x, &y).unwrap(), 6.0 / (60f64).sqrt(), epsilon = 1e-15);
        // squared diffs 1, 4, 4, 0, 0
        assert_abs_diff_eq!(mse(&x, &y).unwrap(), 1.8, epsilon = 1e-15);
        assert!(mse(&x, &y[..4]).is_err());
    }

    #[test]
    fn report_and_files() {
        let names = vec!["intensity".to_string()];
        let truth: Vec<Vec<f32>> = (0..5).map(|i| vec![i as f32]).collect();
        let r = MetricsReport::compute(&names, &truth, &truth).unwrap();
        assert_eq!(r.aggregates.mse, 0.0);
        let dir = tempfile::tempdir().unwrap();
        write_metrics(dir.path(), &"cfg", &r).unwrap();
        let csv = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
        assert!(csv.starts_with("target,icc,pcc,mse\nintensity,1,1,0\n"), "{csv}");
        let json: serde_json::Value =
            serde_json::from_slice(&std::fs::read(dir.path().join("metrics.json")).unwrap()).unwrap();
        assert_eq!(json["per_target"]["intensity"]["pcc"], 1.0);
    }

    proptest! {
        #[test]
        fn icc_ignores_rater_offsets(vals in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 4..20), c in -3.0f64..3.0) {
            let p: Vec<f64> = vals.iter().map(|v| v.0).collect();
            let t: Vec<f64> = vals.iter().map(|v| v.1).collect();
            if let Ok(base) = icc_3_1(&p, &t) {
                let shifted: Vec<f64> = p.iter().map(|v| v + c).collect();
                prop_assert!((icc_3_1(&shifted, &t).unwrap() - base).abs() < 1e-9);
                prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&base));
            }
        }

        #[test]
        fn pcc_invariant_under_positive_affine(vals in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 3..20), a in 0.1f64..4.0, b in -3.0f64..3.0) {
            let x: Vec<f64> = vals.iter().map(|v| v.0).collect();
            let y: Vec<f64> = vals.iter().map(|v| v.1).collect();
            if let Ok(base) = pcc(&x, &y) {
                let xs: Vec<f64> = x.iter().map(|v| a * v + b).collect();
                prop_assert!((pcc(&xs, &y).unwrap() - base).abs() < 1e-9);
            }
        }
    }
}
