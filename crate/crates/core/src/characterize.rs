//! Directional stiffness sweeps and the scalar metrics derived from them.

use std::fmt::Write;

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{FrameAnalysis, FrameModel};
use crate::joint::{n4_force, sweep_angles};

/// Displacement in mm to stiffness in N/m.
pub const MM_PER_M: f64 = 1000.0;
/// Cap reported for ParErr when the drift sum vanishes.
pub const PAR_ERR_CAP: f64 = 1e6;
/// Clinical limit on RCM drift, mm.
pub const DRIFT_LIMIT_MM: f64 = 1.0;
/// Rotation command used for drift classification, degrees.
pub const COMMAND_DEG: f64 = 4.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSample {
    pub theta_f: f64,
    /// `|u|` at N4, mm.
    pub ee_displacement: f64,
    /// `|u|` at the RCM node, mm.
    pub rcm_drift: f64,
    /// `1000·F/ee_displacement`, N/m.
    pub stiffness: f64,
    pub peak_von_mises: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionalSweep {
    pub samples: Vec<SweepSample>,
    pub force_magnitude: f64,
}

impl DirectionalSweep {
    /// Cartesian polar-plot points `(k cos θ, k sin θ)` in N/m.
    pub fn polar_points(&self) -> Vec<[f64; 2]> {
        self.samples
            .iter()
            .map(|s| {
                let (sn, cs) = s.theta_f.to_radians().sin_cos();
                [s.stiffness * cs, s.stiffness * sn]
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("theta_f_deg,ee_disp_mm,rcm_drift_mm,stiffness_N_per_m,von_mises_MPa\n");
        for s in &self.samples {
            writeln!(
                out,
                "{:.3},{:.9e},{:.9e},{:.6},{:.6}",
                s.theta_f, s.ee_displacement, s.rcm_drift, s.stiffness, s.peak_von_mises
            )
            .unwrap();
        }
        out
    }
}

/// Solves one N4 load per angle on an already factorized model.
pub fn sweep_at(analysis: &FrameAnalysis, f: f64, angles: &[f64]) -> Result<DirectionalSweep> {
    if !(f > 0.0 && f.is_finite()) {
        return Err(Error::domain("force magnitude must be positive"));
    }
    let model = analysis.model();
    let n4 = model.probe("N4")?;
    let rcm = model.probe("RCM")?;
    let samples = angles
        .par_iter()
        .map(|&theta_f| {
            let sol = analysis
                .solve(&[n4_force(n4, f, theta_f)])
                .map_err(|e| match e {
                    Error::Numerical(m) => Error::Numerical(format!("theta_f {theta_f} deg: {m}")),
                    other => other,
                })?;
            let x = sol.translation(n4).norm();
            if !(x > 0.0) {
                return Err(Error::Numerical(format!(
                    "no end-effector motion at {theta_f} deg"
                )));
            }
            Ok(SweepSample {
                theta_f,
                ee_displacement: x,
                rcm_drift: sol.translation(rcm).norm(),
                stiffness: MM_PER_M * f / x,
                peak_von_mises: sol.peak_von_mises,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DirectionalSweep {
        samples,
        force_magnitude: f,
    })
}

/// Full sweep `0, step, …` below 360 degrees.
pub fn run_sweep(model: &FrameModel, f: f64, step: f64) -> Result<DirectionalSweep> {
    let angles = sweep_angles(step)?;
    model.validate_joint()?;
    sweep_at(&FrameAnalysis::new(model)?, f, &angles)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipseFit {
    pub center: [f64; 2],
    pub semi_major_a: f64,
    pub semi_minor_b: f64,
    /// Major-axis direction in degrees, `(-90, 90]`.
    pub tilt: f64,
    /// `A x² + B xy + C y² + D x + E y + F = 0`, unit norm, `A + C > 0`.
    pub conic_coeffs: [f64; 6],
    /// RMS Sampson distance, data units.
    pub residual_rms: f64,
}

impl EllipseFit {
    pub fn discriminant(&self) -> f64 {
        let [a, b, c, ..] = self.conic_coeffs;
        b * b - 4.0 * a * c
    }

    /// Point at parameter `t` (radians) on the fitted curve.
    pub fn point_at(&self, t: f64) -> [f64; 2] {
        let (s, c) = self.tilt.to_radians().sin_cos();
        let (x, y) = (self.semi_major_a * t.cos(), self.semi_minor_b * t.sin());
        [
            self.center[0] + c * x - s * y,
            self.center[1] + s * x + c * y,
        ]
    }
}

fn conic_value(q: &[f64; 6], p: [f64; 2]) -> (f64, Vector2<f64>) {
    let [a, b, c, d, e, f] = *q;
    let (x, y) = (p[0], p[1]);
    let v = a * x * x + b * x * y + c * y * y + d * x + e * y + f;
    let g = Vector2::new(2.0 * a * x + b * y + d, b * x + 2.0 * c * y + e);
    (v, g)
}

/// Direct least-squares ellipse fit on data centered and scaled to unit
/// RMS radius, using the reduced 3x3 eigenproblem of the constrained
/// scatter matrix.
pub fn fit_ellipse(points: &[[f64; 2]]) -> Result<EllipseFit> {
    if points.len() < 6 {
        return Err(Error::Fit(format!(
            "need at least 6 points, got {}",
            points.len()
        )));
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Fit("non-finite point".into()));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p[0]).sum::<f64>() / n;
    let my = points.iter().map(|p| p[1]).sum::<f64>() / n;
    let rms = (points
        .iter()
        .map(|p| (p[0] - mx).powi(2) + (p[1] - my).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    if !(rms > 0.0) {
        return Err(Error::Fit("all points coincide".into()));
    }

    let mut s1 = Matrix3::<f64>::zeros();
    let mut s2 = Matrix3::<f64>::zeros();
    let mut s3 = Matrix3::<f64>::zeros();
    for p in points {
        let (x, y) = ((p[0] - mx) / rms, (p[1] - my) / rms);
        let d1 = Vector3::new(x * x, x * y, y * y);
        let d2 = Vector3::new(x, y, 1.0);
        s1 += d1 * d1.transpose();
        s2 += d1 * d2.transpose();
        s3 += d2 * d2.transpose();
    }
    if s3.determinant().abs() < 1e-12 * n.powi(3) {
        return Err(Error::Fit("points are collinear".into()));
    }
    let s3_inv = s3
        .try_inverse()
        .ok_or_else(|| Error::Fit("rank-deficient scatter".into()))?;
    let t = -s3_inv * s2.transpose();
    let m = s1 + s2 * t;
    let c1_inv = Matrix3::new(0.0, 0.0, 0.5, 0.0, -1.0, 0.0, 0.5, 0.0, 0.0);
    let reduced = c1_inv * m;

    let eigenvalues = reduced.complex_eigenvalues();
    let mut best: Option<(f64, Vector3<f64>)> = None;
    let mut rejected_disc = f64::NAN;
    for ev in eigenvalues.iter() {
        if ev.im.abs() > 1e-9 * (1.0 + ev.re.abs()) {
            continue;
        }
        let shifted = reduced - Matrix3::identity() * ev.re;
        let svd = shifted.svd(false, true);
        let v_t = svd
            .v_t
            .ok_or_else(|| Error::Fit("eigenvector extraction failed".into()))?;
        let k = svd.singular_values.imin();
        let v: Vector3<f64> = v_t.row(k).transpose();
        let cond = 4.0 * v[0] * v[2] - v[1] * v[1];
        if !(cond > 0.0) {
            rejected_disc = -cond;
        } else {
            // several admissible vectors only arise from rounding; keep the smallest residual
            let cost = (v.transpose() * m * v)[(0, 0)].abs() / cond;
            if best.as_ref().is_none_or(|(c, _)| cost < *c) {
                best = Some((cost, v));
            }
        }
    }
    let (_, a1) = best.ok_or(Error::NotEllipse {
        discriminant: rejected_disc,
    })?;
    let a2 = t * a1;
    let (a, b, c, d, e, f) = (a1[0], a1[1], a1[2], a2[0], a2[1], a2[2]);

    // undo x' = (x - mx)/s
    let s = rms;
    let s2_ = s * s;
    let cap_a = a / s2_;
    let cap_b = b / s2_;
    let cap_c = c / s2_;
    let cap_d = -(2.0 * a * mx + b * my) / s2_ + d / s;
    let cap_e = -(b * mx + 2.0 * c * my) / s2_ + e / s;
    let cap_f = (a * mx * mx + b * mx * my + c * my * my) / s2_ - (d * mx + e * my) / s + f;
    let mut q = [cap_a, cap_b, cap_c, cap_d, cap_e, cap_f];
    let norm = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    let sign = if cap_a + cap_c < 0.0 { -1.0 } else { 1.0 };
    for v in q.iter_mut() {
        *v *= sign / norm;
    }

    let disc = q[1] * q[1] - 4.0 * q[0] * q[2];
    if !(disc < 0.0) {
        return Err(Error::NotEllipse { discriminant: disc });
    }
    let mut fit = geometry_from_conic(&q)?;
    let sq: f64 = points
        .iter()
        .map(|p| {
            let (v, g) = conic_value(&q, *p);
            let gn = g.norm_squared();
            if gn > 0.0 {
                v * v / gn
            } else {
                0.0
            }
        })
        .sum();
    fit.residual_rms = (sq / n).sqrt();
    Ok(fit)
}

/// Center, semi-axes and tilt of an ellipse given by its conic coefficients.
pub fn geometry_from_conic(q: &[f64; 6]) -> Result<EllipseFit> {
    let [a, b, c, d, e, f] = *q;
    let disc = b * b - 4.0 * a * c;
    if !(disc < 0.0) {
        return Err(Error::NotEllipse { discriminant: disc });
    }
    let lhs = Matrix2::new(2.0 * a, b, b, 2.0 * c);
    let center = lhs
        .try_inverse()
        .ok_or_else(|| Error::Fit("degenerate conic".into()))?
        * Vector2::new(-d, -e);
    let f0 = f + 0.5 * (d * center[0] + e * center[1]);
    let form = Matrix2::new(a, b / 2.0, b / 2.0, c);
    let eig = form.symmetric_eigen();
    let (i_min, i_max) = if eig.eigenvalues[0] <= eig.eigenvalues[1] {
        (0, 1)
    } else {
        (1, 0)
    };
    let (l_min, l_max) = (eig.eigenvalues[i_min], eig.eigenvalues[i_max]);
    // a real ellipse needs -f0/λ > 0 for both eigenvalues
    if !(-f0 / l_min > 0.0 && -f0 / l_max > 0.0) {
        return Err(Error::Fit("conic has no real points".into()));
    }
    let semi_major_a = (-f0 / l_min).sqrt();
    let semi_minor_b = (-f0 / l_max).sqrt();
    let tilt = if (l_max - l_min).abs() <= 1e-9 * l_max.abs() {
        0.0
    } else {
        let v = eig.eigenvectors.column(i_min);
        let mut t = v[1].atan2(v[0]).to_degrees();
        if t <= -90.0 {
            t += 180.0;
        } else if t > 90.0 {
            t -= 180.0;
        }
        t
    };
    Ok(EllipseFit {
        center: [center[0], center[1]],
        semi_major_a,
        semi_minor_b,
        tilt,
        conic_coeffs: *q,
        residual_rms: 0.0,
    })
}

/// Principal axis ratio `A/B`.
pub fn par(fit: &EllipseFit) -> f64 {
    fit.semi_major_a / fit.semi_minor_b
}

/// `(max − min)/mean` of the three directional radii.
pub fn iso_err(r0: f64, r120: f64, r240: f64) -> Result<f64> {
    let mut r = [r0, r120, r240];
    if r.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::domain("radii must be positive"));
    }
    // sorted so the result is bit-identical under permutation
    r.sort_by(f64::total_cmp);
    Ok((r[2] - r[0]) / ((r[0] + r[1] + r[2]) / 3.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParErr {
    pub value: f64,
    /// The drift sum vanished or the ratio exceeded [`PAR_ERR_CAP`].
    pub drift_free: bool,
}

/// Cumulative EE displacement over cumulative RCM drift, capped.
pub fn par_err(r: [f64; 3], e: [f64; 3]) -> Result<ParErr> {
    if r.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::domain("radii must be positive"));
    }
    if e.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
        return Err(Error::domain("drifts must be non-negative"));
    }
    let num: f64 = r.iter().sum();
    let den: f64 = e.iter().sum();
    if den == 0.0 || num / den > PAR_ERR_CAP {
        return Ok(ParErr {
            value: PAR_ERR_CAP,
            drift_free: true,
        });
    }
    Ok(ParErr {
        value: num / den,
        drift_free: false,
    })
}

/// Parasitic-to-useful rotation ratio from the two chords.
pub fn prr(x_rcm: f64, x_ee: f64, l_ee: f64) -> Result<f64> {
    if !(l_ee > 0.0) {
        return Err(Error::domain("L_EE must be positive"));
    }
    let dia = 2.0 * l_ee;
    if !(x_rcm >= 0.0 && x_rcm <= dia) {
        return Err(Error::domain(format!(
            "RCM chord {x_rcm} outside [0, {dia}]"
        )));
    }
    if !(x_ee > 0.0 && x_ee <= dia) {
        return Err(Error::domain(format!("EE chord {x_ee} outside (0, {dia}]")));
    }
    Ok((x_rcm / dia).asin() / (x_ee / dia).asin())
}

pub fn j_index(par: f64, prr: f64) -> f64 {
    (par - 1.0) * prr
}

/// Chord swept by a point at distance `l_ee` rotating by `beta` degrees.
pub fn command_chord(beta_deg: f64, l_ee: f64) -> f64 {
    2.0 * l_ee * (beta_deg.to_radians() / 2.0).sin()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftSample {
    pub theta_f: f64,
    /// N4 displacement scaled to the command chord, mm.
    pub ee_chord: f64,
    /// RCM drift at the same scale, mm.
    pub drift: f64,
}

/// RCM drift per direction when the N4 displacement equals the chord of a
/// `beta_cmd` rotation about the RCM.
pub fn drift_at_command(
    analysis: &FrameAnalysis,
    beta_cmd: f64,
    l_ee: f64,
    angles: &[f64],
) -> Result<Vec<DriftSample>> {
    if !(0.0..=180.0).contains(&beta_cmd) {
        return Err(Error::domain(format!(
            "command {beta_cmd} deg outside [0, 180]"
        )));
    }
    if !(l_ee > 0.0) {
        return Err(Error::domain("L_EE must be positive"));
    }
    let chord = command_chord(beta_cmd, l_ee);
    let sweep = sweep_at(analysis, 1.0, angles)?;
    Ok(sweep
        .samples
        .iter()
        .map(|s| DriftSample {
            theta_f: s.theta_f,
            ee_chord: chord,
            drift: s.rcm_drift * (chord / s.ee_displacement),
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Safety {
    Safe,
    Unsafe,
}

pub fn classify(drifts: &[DriftSample]) -> Safety {
    let max = drifts.iter().map(|d| d.drift).fold(0.0, f64::max);
    if max < DRIFT_LIMIT_MM {
        Safety::Safe
    } else {
        Safety::Unsafe
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignMetrics {
    pub iso_err: f64,
    pub par_err: f64,
    pub par_err_capped: bool,
    pub par: f64,
    /// Largest PRR over the sweep directions at the command angle.
    pub prr: f64,
    pub j_index: f64,
    pub rcm_drift_at_4p5deg: Vec<DriftSample>,
    pub safety: Safety,
    pub ellipse: EllipseFit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricOptions {
    pub force: f64,
    pub step: f64,
    pub command_deg: f64,
}

impl Default for MetricOptions {
    fn default() -> Self {
        MetricOptions {
            force: 1.0,
            step: 10.0,
            command_deg: COMMAND_DEG,
        }
    }
}

/// IsoErr and ParErr from the 0/120/240 degree load cases.
pub fn three_direction_metrics(analysis: &FrameAnalysis, f: f64) -> Result<(f64, ParErr)> {
    let sweep = sweep_at(analysis, f, &[0.0, 120.0, 240.0])?;
    let r: [f64; 3] = std::array::from_fn(|i| sweep.samples[i].ee_displacement);
    let e: [f64; 3] = std::array::from_fn(|i| sweep.samples[i].rcm_drift);
    Ok((iso_err(r[0], r[1], r[2])?, par_err(r, e)?))
}

/// Every scalar metric of one joint model.
pub fn design_metrics(
    model: &FrameModel,
    l_ee: f64,
    options: &MetricOptions,
) -> Result<(DesignMetrics, DirectionalSweep)> {
    model.validate_joint()?;
    let analysis = FrameAnalysis::new(model)?;
    let (iso, pe) = three_direction_metrics(&analysis, options.force)?;
    let angles = sweep_angles(options.step)?;
    let sweep = sweep_at(&analysis, options.force, &angles)?;
    let fit = fit_ellipse(&sweep.polar_points())?;
    let drifts = drift_at_command(&analysis, options.command_deg, l_ee, &angles)?;
    let mut worst_prr = 0.0_f64;
    for d in &drifts {
        worst_prr = worst_prr.max(prr(d.drift, d.ee_chord, l_ee)?);
    }
    let p = par(&fit);
    let metrics = DesignMetrics {
        iso_err: iso,
        par_err: pe.value,
        par_err_capped: pe.drift_free,
        par: p,
        prr: worst_prr,
        j_index: j_index(p, worst_prr),
        safety: classify(&drifts),
        rcm_drift_at_4p5deg: drifts,
        ellipse: fit,
    };
    Ok((metrics, sweep))
}

impl DesignMetrics {
    pub fn report_text(&self) -> String {
        let mut s = String::new();
        let max_drift = self
            .rcm_drift_at_4p5deg
            .iter()
            .map(|d| d.drift)
            .fold(0.0, f64::max);
        let min_drift = self
            .rcm_drift_at_4p5deg
            .iter()
            .map(|d| d.drift)
            .fold(f64::INFINITY, f64::min);
        writeln!(s, "IsoErr          {:.4}", self.iso_err).unwrap();
        writeln!(
            s,
            "ParErr          {:.2}{}",
            self.par_err,
            if self.par_err_capped { " (capped)" } else { "" }
        )
        .unwrap();
        writeln!(s, "PAR             {:.4}", self.par).unwrap();
        writeln!(s, "PRR             {:.5}", self.prr).unwrap();
        writeln!(s, "J               {:.5}", self.j_index).unwrap();
        writeln!(s, "drift_min_mm    {:.4}", min_drift).unwrap();
        writeln!(s, "drift_max_mm    {:.4}", max_drift).unwrap();
        writeln!(
            s,
            "safety          {}",
            match self.safety {
                Safety::Safe => "safe",
                Safety::Unsafe => "unsafe",
            }
        )
        .unwrap();
        writeln!(
            s,
            "ellipse         A={:.3} B={:.3} tilt={:.2} center=({:.3}, {:.3}) rms={:.3e}",
            self.ellipse.semi_major_a,
            self.ellipse.semi_minor_b,
            self.ellipse.tilt,
            self.ellipse.center[0],
            self.ellipse.center[1],
            self.ellipse.residual_rms
        )
        .unwrap();
        s
    }
}

/// Angle in `[0, 90]` between two directions of a 180-degree periodic field.
pub fn axial_gap_deg(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(180.0);
    d.min(180.0 - d)
}

/// Angle of the largest value, first occurrence on ties.
pub fn argmax_angle(pairs: impl IntoIterator<Item = (f64, f64)>) -> Option<f64> {
    let mut best: Option<(f64, f64)> = None;
    for (theta, v) in pairs {
        if best.is_none_or(|(_, bv)| v > bv) {
            best = Some((theta, v));
        }
    }
    best.map(|(t, _)| t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ellipse_points(a: f64, b: f64, tilt_deg: f64, c: [f64; 2], step: f64) -> Vec<[f64; 2]> {
        let (s, co) = tilt_deg.to_radians().sin_cos();
        (0..(360.0 / step) as usize)
            .map(|i| {
                let t = (i as f64 * step).to_radians();
                let (x, y) = (a * t.cos(), b * t.sin());
                [c[0] + co * x - s * y, c[1] + s * x + co * y]
            })
            .collect()
    }

    #[test]
    fn circle_fit() {
        let fit = fit_ellipse(&ellipse_points(1.0, 1.0, 0.0, [0.0, 0.0], 10.0)).unwrap();
        assert_relative_eq!(fit.semi_major_a, 1.0, epsilon = 1e-9);
        assert_relative_eq!(fit.semi_minor_b, 1.0, epsilon = 1e-9);
        assert_relative_eq!(par(&fit), 1.0, epsilon = 1e-9);
        assert_eq!(fit.tilt, 0.0);
        assert!(fit.discriminant() < 0.0);
    }

    #[test]
    fn axis_aligned_ellipse() {
        let fit = fit_ellipse(&ellipse_points(2.0, 1.0, 0.0, [0.0, 0.0], 10.0)).unwrap();
        assert_relative_eq!(fit.semi_major_a, 2.0, epsilon = 1e-6);
        assert_relative_eq!(fit.semi_minor_b, 1.0, epsilon = 1e-6);
        assert!(fit.tilt.abs() < 1e-6);
        assert!(fit.residual_rms < 1e-9);
    }

    #[test]
    fn tilted_offset_ellipse() {
        let fit = fit_ellipse(&ellipse_points(1500.0, 900.0, 35.0, [40.0, -25.0], 10.0)).unwrap();
        assert_relative_eq!(fit.semi_major_a, 1500.0, max_relative = 1e-9);
        assert_relative_eq!(fit.semi_minor_b, 900.0, max_relative = 1e-9);
        assert_relative_eq!(fit.tilt, 35.0, epsilon = 1e-7);
        assert_relative_eq!(fit.center[0], 40.0, epsilon = 1e-6);
    }

    #[test]
    fn noisy_ellipse_within_one_percent() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let pts: Vec<[f64; 2]> = ellipse_points(2.0, 1.0, 0.0, [0.0, 0.0], 10.0)
            .into_iter()
            .map(|p| {
                [
                    p[0] * (1.0 + rng.gen_range(-0.005..0.005)),
                    p[1] * (1.0 + rng.gen_range(-0.005..0.005)),
                ]
            })
            .collect();
        let fit = fit_ellipse(&pts).unwrap();
        assert!((fit.semi_major_a - 2.0).abs() < 0.02);
        assert!((fit.semi_minor_b - 1.0).abs() < 0.01);
    }

    #[test]
    fn fit_preconditions() {
        let pts = ellipse_points(2.0, 1.0, 0.0, [0.0, 0.0], 72.0);
        assert!(matches!(fit_ellipse(&pts), Err(Error::Fit(_))));
        let line: Vec<[f64; 2]> = (0..10).map(|i| [i as f64, 2.0 * i as f64]).collect();
        assert!(matches!(fit_ellipse(&line), Err(Error::Fit(_))));
    }

    #[test]
    fn metric_examples() {
        assert_eq!(iso_err(1.0, 1.0, 1.0).unwrap(), 0.0);
        assert_relative_eq!(
            iso_err(1.0, 1.0, 1.2).unwrap(),
            0.1875,
            max_relative = 1e-12
        );
        assert!(iso_err(1.0, 0.0, 1.0).is_err());
        let p = par_err([1.0; 3], [0.1; 3]).unwrap();
        assert_relative_eq!(p.value, 10.0, max_relative = 1e-12);
        assert!(!p.drift_free);
        let p = par_err([1.0; 3], [0.0; 3]).unwrap();
        assert_eq!(p.value, PAR_ERR_CAP);
        assert!(p.drift_free);
        assert_eq!(prr(0.0, 5.0, 100.0).unwrap(), 0.0);
        assert_relative_eq!(prr(5.0, 5.0, 100.0).unwrap(), 1.0);
        assert!(prr(250.0, 5.0, 100.0).is_err());
        assert_relative_eq!(j_index(1.37, 0.0063), 0.002331, max_relative = 1e-9);
        assert_eq!(j_index(1.0, 0.3), 0.0);
    }

    #[test]
    fn axial_gap() {
        assert_eq!(axial_gap_deg(10.0, 190.0), 0.0);
        assert_eq!(axial_gap_deg(0.0, 170.0), 10.0);
        assert_eq!(axial_gap_deg(30.0, 120.0), 90.0);
    }

    proptest! {
        #[test]
        fn par_matches_parametric_extremes(
            a in 1.0f64..10.0, ratio in 1.0f64..4.0, tilt in -80.0f64..80.0,
            cx in -5.0f64..5.0, cy in -5.0f64..5.0,
        ) {
            let b = a / ratio;
            let fit = fit_ellipse(&ellipse_points(a, b, tilt, [cx, cy], 10.0)).unwrap();
            prop_assert!(fit.discriminant() < 0.0);
            let radius = |t: f64| {
                let p = fit.point_at(t);
                ((p[0] - fit.center[0]).powi(2) + (p[1] - fit.center[1]).powi(2)).sqrt()
            };
            let ts: Vec<f64> = (0..3600).map(|i| i as f64 * std::f64::consts::TAU / 3600.0).collect();
            let rmax = ts.iter().map(|t| radius(*t)).fold(0.0, f64::max);
            let rmin = ts.iter().map(|t| radius(*t)).fold(f64::INFINITY, f64::min);
            prop_assert!((par(&fit) - rmax / rmin).abs() < 1e-9);
        }

        #[test]
        fn par_rotation_invariant(a in 1.0f64..5.0, ratio in 1.05f64..3.0, rot in 0.0f64..360.0) {
            let pts = ellipse_points(a, a / ratio, 12.0, [0.3, -0.2], 10.0);
            let (s, c) = rot.to_radians().sin_cos();
            let rotated: Vec<[f64; 2]> = pts.iter().map(|p| [c * p[0] - s * p[1], s * p[0] + c * p[1]]).collect();
            let p1 = par(&fit_ellipse(&pts).unwrap());
            let p2 = par(&fit_ellipse(&rotated).unwrap());
            prop_assert!((p1 - p2).abs() < 1e-9);
        }

        #[test]
        fn iso_err_symmetric(a in 0.1f64..10.0, b in 0.1f64..10.0, c in 0.1f64..10.0) {
            let v = iso_err(a, b, c).unwrap();
            for (x, y, z) in [(a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)] {
                prop_assert_eq!(v, iso_err(x, y, z).unwrap());
            }
        }

        #[test]
        fn prr_increasing(x1 in 0.0f64..50.0, dx in 1e-6f64..50.0, ee in 0.1f64..100.0) {
            prop_assert!(prr(x1 + dx, ee, 100.0).unwrap() > prr(x1, ee, 100.0).unwrap());
        }
    }
}
