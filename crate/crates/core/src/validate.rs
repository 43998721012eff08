//! Bench measurements against simulated stiffness.

use std::collections::BTreeMap;
use std::fmt::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::characterize::MM_PER_M;
use crate::error::{Error, Result};

/// Samples per angle in the bench protocol.
pub const EXPECTED_SAMPLES: usize = 10;
/// Nominal radial load of the hanging mass, N.
pub const NOMINAL_FORCE: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRow {
    pub angle: f64,
    /// End-effector displacement, mm.
    pub displacement_samples: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSet {
    pub load_force: f64,
    pub rows: Vec<MeasurementRow>,
    pub warnings: Vec<String>,
}

impl MeasurementSet {
    /// Sorts rows by angle and records sample-count warnings.
    pub fn new(load_force: f64, mut rows: Vec<MeasurementRow>) -> Result<Self> {
        if !(load_force > 0.0 && load_force.is_finite()) {
            return Err(Error::domain("load force must be positive"));
        }
        rows.sort_by(|a, b| a.angle.total_cmp(&b.angle));
        for w in rows.windows(2) {
            if w[0].angle == w[1].angle {
                return Err(Error::domain(format!("duplicate angle {}", w[0].angle)));
            }
        }
        let mut warnings = Vec::new();
        for r in &rows {
            if !r.angle.is_finite() {
                return Err(Error::domain("non-finite angle"));
            }
            if r.displacement_samples.is_empty() {
                return Err(Error::domain(format!("angle {}: no samples", r.angle)));
            }
            if let Some(x) = r
                .displacement_samples
                .iter()
                .find(|x| !(**x > 0.0 && x.is_finite()))
            {
                return Err(Error::domain(format!(
                    "angle {}: displacement sample {x} must be positive",
                    r.angle
                )));
            }
            if r.displacement_samples.len() != EXPECTED_SAMPLES {
                warnings.push(format!(
                    "angle {}: {} samples (expected {EXPECTED_SAMPLES})",
                    r.angle,
                    r.displacement_samples.len()
                ));
            }
        }
        Ok(MeasurementSet {
            load_force,
            rows,
            warnings,
        })
    }

    /// Long-format CSV `angle_deg,sample_idx,displacement_mm`.
    pub fn from_csv(text: &str, load_force: f64) -> Result<Self> {
        let mut by_angle: BTreeMap<u64, (f64, BTreeMap<usize, f64>)> = BTreeMap::new();
        let mut header_seen = false;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if !header_seen {
                let cols: Vec<&str> = line.split(',').map(str::trim).collect();
                if cols != ["angle_deg", "sample_idx", "displacement_mm"] {
                    return Err(Error::parse(
                        line_no,
                        "expected header angle_deg,sample_idx,displacement_mm",
                    ));
                }
                header_seen = true;
                continue;
            }
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 3 {
                return Err(Error::parse(
                    line_no,
                    format!("expected 3 fields, found {}", f.len()),
                ));
            }
            let angle: f64 = f[0]
                .parse()
                .map_err(|_| Error::parse(line_no, format!("bad angle '{}'", f[0])))?;
            let idx: usize = f[1]
                .parse()
                .map_err(|_| Error::parse(line_no, format!("bad sample index '{}'", f[1])))?;
            let x: f64 = f[2]
                .parse()
                .map_err(|_| Error::parse(line_no, format!("bad displacement '{}'", f[2])))?;
            let entry = by_angle
                .entry(angle.to_bits())
                .or_insert((angle, BTreeMap::new()));
            if entry.1.insert(idx, x).is_some() {
                return Err(Error::parse(
                    line_no,
                    format!("duplicate sample {idx} at angle {angle}"),
                ));
            }
        }
        if !header_seen {
            return Err(Error::parse(0, "empty measurement file"));
        }
        let rows = by_angle
            .into_values()
            .map(|(angle, samples)| MeasurementRow {
                angle,
                displacement_samples: samples.into_values().collect(),
            })
            .collect();
        MeasurementSet::new(load_force, rows)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("angle_deg,sample_idx,displacement_mm\n");
        for r in &self.rows {
            for (i, x) in r.displacement_samples.iter().enumerate() {
                writeln!(s, "{},{},{:.9}", r.angle, i, x).unwrap();
            }
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleStats {
    pub angle: f64,
    pub mean: f64,
    pub sd: f64,
    pub n: usize,
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = v.iter().map(|x| (x - mean).powi(2)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Per-angle stiffness `k = F/x` in N/m: sample mean and n−1 deviation.
pub fn stiffness_stats(set: &MeasurementSet) -> Result<Vec<AngleStats>> {
    set.rows
        .iter()
        .map(|r| {
            let k: Vec<f64> = r
                .displacement_samples
                .iter()
                .map(|&x| {
                    if x > 0.0 {
                        Ok(MM_PER_M * set.load_force / x)
                    } else {
                        Err(Error::domain(format!(
                            "angle {}: zero displacement",
                            r.angle
                        )))
                    }
                })
                .collect::<Result<_>>()?;
            let (mean, sd) = mean_sd(&k);
            Ok(AngleStats {
                angle: r.angle,
                mean,
                sd,
                n: k.len(),
            })
        })
        .collect()
}

/// `100·|exp − sim| / exp`.
pub fn pct_error(exp: f64, sim: f64) -> Result<f64> {
    if !(exp > 0.0) {
        return Err(Error::domain(format!(
            "experimental stiffness {exp} must be positive"
        )));
    }
    Ok(100.0 * (exp - sim).abs() / exp)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlobalMetrics {
    pub mae: f64,
    pub rmse: f64,
    pub mape: f64,
    /// Mean of `exp − sim`.
    pub bias: f64,
}

pub fn global_metrics(pairs: &[(f64, f64)]) -> Result<GlobalMetrics> {
    if pairs.is_empty() {
        return Err(Error::domain("no (exp, sim) pairs"));
    }
    let n = pairs.len() as f64;
    let (mut abs, mut sq, mut pct, mut bias) = (0.0, 0.0, 0.0, 0.0);
    for &(e, s) in pairs {
        pct += pct_error(e, s)?;
        let d = e - s;
        abs += d.abs();
        sq += d * d;
        bias += d;
    }
    Ok(GlobalMetrics {
        mae: abs / n,
        rmse: (sq / n).sqrt(),
        mape: pct / n,
        bias: bias / n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub angle: f64,
    pub exp_mean: f64,
    pub exp_sd: f64,
    pub sim: f64,
    pub pct_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub rows: Vec<ComparisonRow>,
    pub global: GlobalMetrics,
    pub warnings: Vec<String>,
}

/// Simulated stiffness CSV `angle_deg,sim_N_per_m`.
pub fn parse_simulated(text: &str) -> Result<BTreeMap<u64, f64>> {
    let mut out = BTreeMap::new();
    let mut header_seen = false;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !header_seen {
            if line.replace(' ', "") != "angle_deg,sim_N_per_m" {
                return Err(Error::parse(i + 1, "expected header angle_deg,sim_N_per_m"));
            }
            header_seen = true;
            continue;
        }
        let (a, k) = line
            .split_once(',')
            .ok_or_else(|| Error::parse(i + 1, "expected two fields"))?;
        let a: f64 = a
            .trim()
            .parse()
            .map_err(|_| Error::parse(i + 1, "bad angle"))?;
        let k: f64 = k
            .trim()
            .parse()
            .map_err(|_| Error::parse(i + 1, "bad stiffness"))?;
        if out.insert(a.to_bits(), k).is_some() {
            return Err(Error::parse(i + 1, format!("duplicate angle {a}")));
        }
    }
    Ok(out)
}

/// Joins measured statistics with simulated stiffness angle by angle.
pub fn compare(set: &MeasurementSet, simulated: &BTreeMap<u64, f64>) -> Result<ValidationReport> {
    let stats = stiffness_stats(set)?;
    let mut rows = Vec::with_capacity(stats.len());
    for s in stats {
        let sim = *simulated
            .get(&s.angle.to_bits())
            .ok_or_else(|| Error::domain(format!("no simulated stiffness at {} deg", s.angle)))?;
        rows.push(ComparisonRow {
            angle: s.angle,
            exp_mean: s.mean,
            exp_sd: s.sd,
            sim,
            pct_error: pct_error(s.mean, sim)?,
        });
    }
    let pairs: Vec<(f64, f64)> = rows.iter().map(|r| (r.exp_mean, r.sim)).collect();
    Ok(ValidationReport {
        global: global_metrics(&pairs)?,
        rows,
        warnings: set.warnings.clone(),
    })
}

impl ValidationReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(
            s,
            "{:>7}  {:>18}  {:>10}  {:>8}",
            "Angle", "Exp (N/m)", "Sim (N/m)", "%Error"
        )
        .unwrap();
        for r in &self.rows {
            let exp = format!("{:.2} ± {:.2}", r.exp_mean, r.exp_sd);
            writeln!(
                s,
                "{:>6}°  {:>18}  {:>10.2}  {:>8.2}",
                r.angle, exp, r.sim, r.pct_error
            )
            .unwrap();
        }
        writeln!(s).unwrap();
        writeln!(
            s,
            "{:>10}  {:>10}  {:>10}  {:>10}",
            "MAE", "RMSE", "MAPE (%)", "Bias"
        )
        .unwrap();
        let g = &self.global;
        writeln!(
            s,
            "{:>10.2}  {:>10.2}  {:>10.2}  {:>10.2}",
            g.mae, g.rmse, g.mape, g.bias
        )
        .unwrap();
        for w in &self.warnings {
            writeln!(s, "warning: {w}").unwrap();
        }
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s =
            String::from("angle_deg,exp_mean_N_per_m,exp_sd_N_per_m,sim_N_per_m,pct_error\n");
        for r in &self.rows {
            writeln!(
                s,
                "{},{:.4},{:.4},{:.4},{:.4}",
                r.angle, r.exp_mean, r.exp_sd, r.sim, r.pct_error
            )
            .unwrap();
        }
        s
    }
}

/// Displacement samples (mm) whose stiffness has exactly the requested
/// sample mean and n−1 deviation.
pub fn synthesize_samples(
    mean_k: f64,
    sd_k: f64,
    n: usize,
    force: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    if n < 2 || !(mean_k > 0.0) || !(sd_k >= 0.0) {
        return Err(Error::domain(
            "need n >= 2, positive mean and non-negative sd",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let (m, s) = mean_sd(&raw);
    if !(s > 0.0) {
        return Err(Error::Numerical("degenerate random draw".into()));
    }
    raw.iter()
        .map(|z| {
            let k = mean_k + sd_k * (z - m) / s;
            if k > 0.0 {
                Ok(MM_PER_M * force / k)
            } else {
                Err(Error::domain(
                    "requested spread gives non-positive stiffness",
                ))
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn stats_examples() {
        let set = MeasurementSet::new(
            2.0,
            vec![MeasurementRow {
                angle: 0.0,
                displacement_samples: vec![10.0],
            }],
        )
        .unwrap();
        let st = stiffness_stats(&set).unwrap();
        assert_relative_eq!(st[0].mean, 200.0);
        assert_eq!(set.warnings.len(), 1);

        let flat = MeasurementSet::new(
            2.0,
            vec![MeasurementRow {
                angle: 30.0,
                displacement_samples: vec![5.0; 10],
            }],
        )
        .unwrap();
        assert_eq!(stiffness_stats(&flat).unwrap()[0].sd, 0.0);
        assert!(flat.warnings.is_empty());

        let x = synthesize_samples(374.05, 6.14, 10, 2.0, 1).unwrap();
        let set = MeasurementSet::new(
            2.0,
            vec![MeasurementRow {
                angle: 0.0,
                displacement_samples: x,
            }],
        )
        .unwrap();
        let st = stiffness_stats(&set).unwrap();
        assert_relative_eq!(st[0].mean, 374.05, epsilon = 1e-9);
        assert_relative_eq!(st[0].sd, 6.14, epsilon = 1e-9);
    }

    #[test]
    fn zero_displacement_is_rejected() {
        let bad = MeasurementSet::new(
            2.0,
            vec![MeasurementRow {
                angle: 60.0,
                displacement_samples: vec![1.0, 0.0],
            }],
        );
        assert!(matches!(bad, Err(Error::Domain(m)) if m.contains("60")));
    }

    #[test]
    fn pct_error_examples() {
        assert!((pct_error(374.05, 285.27).unwrap() - 23.73).abs() < 0.005);
        assert!((pct_error(315.95, 334.22).unwrap() - 5.78).abs() < 0.005);
        assert_eq!(pct_error(100.0, 100.0).unwrap(), 0.0);
        assert!(pct_error(0.0, 1.0).is_err());
    }

    #[test]
    fn global_examples() {
        let g = global_metrics(&[(100.0, 90.0), (100.0, 110.0)]).unwrap();
        assert_relative_eq!(g.mae, 10.0);
        assert_relative_eq!(g.rmse, 10.0);
        assert_relative_eq!(g.mape, 10.0);
        assert_relative_eq!(g.bias, 0.0);
        let z = global_metrics(&[(5.0, 5.0), (7.0, 7.0)]).unwrap();
        assert_eq!((z.mae, z.rmse, z.mape, z.bias), (0.0, 0.0, 0.0, 0.0));
        assert!(global_metrics(&[]).is_err());
    }

    #[test]
    fn csv_roundtrip_and_errors() {
        let x = synthesize_samples(300.0, 10.0, 10, 2.0, 3).unwrap();
        let set = MeasurementSet::new(
            2.0,
            vec![
                MeasurementRow {
                    angle: 30.0,
                    displacement_samples: x.clone(),
                },
                MeasurementRow {
                    angle: 0.0,
                    displacement_samples: x,
                },
            ],
        )
        .unwrap();
        assert_eq!(set.rows[0].angle, 0.0);
        let back = MeasurementSet::from_csv(&set.to_csv(), 2.0).unwrap();
        let (a, b) = (
            stiffness_stats(&set).unwrap(),
            stiffness_stats(&back).unwrap(),
        );
        for (p, q) in a.iter().zip(&b) {
            assert_relative_eq!(p.mean, q.mean, max_relative = 1e-9);
        }
        let err = MeasurementSet::from_csv(
            "angle_deg,sample_idx,displacement_mm\n0,0,1.0\n0,x,2\n",
            2.0,
        );
        assert!(matches!(err, Err(Error::Parse { line: 3, .. })));
        let dup =
            MeasurementSet::from_csv("angle_deg,sample_idx,displacement_mm\n0,0,1\n0,0,2\n", 2.0);
        assert!(matches!(dup, Err(Error::Parse { line: 3, .. })));
    }

    proptest! {
        #[test]
        fn metric_inequalities(pairs in prop::collection::vec((1.0f64..1000.0, 0.0f64..1000.0), 1..40)) {
            let g = global_metrics(&pairs).unwrap();
            prop_assert!(g.rmse + 1e-9 >= g.mae);
            prop_assert!(g.mae + 1e-9 >= g.bias.abs());
            let mut rev = pairs.clone();
            rev.reverse();
            let h = global_metrics(&rev).unwrap();
            prop_assert!((g.mae - h.mae).abs() <= 1e-9 * g.mae.max(1.0));
            prop_assert!((g.rmse - h.rmse).abs() <= 1e-9 * g.rmse.max(1.0));
        }
    }
}
