//! Fatigue- and yield-bounded angular workspace of a joint.

use std::fmt::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::FrameAnalysis;
use crate::joint::{n4_force, sweep_angles};

/// Clinical half-range of rotation, degrees.
pub const CLINICAL_WORKSPACE_DEG: f64 = 15.0;
/// Bisection stopping width on the end-effector displacement, mm.
pub const BISECTION_TOL_MM: f64 = 1e-6;

/// Power-law S–N curve `S = coeff · N^exponent` and the admissibility level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FatigueParams {
    pub sn_coefficient: f64,
    pub sn_exponent: f64,
    pub design_life_cycles: f64,
    pub sf_threshold: f64,
}

impl Default for FatigueParams {
    fn default() -> Self {
        FatigueParams {
            sn_coefficient: 111.1,
            sn_exponent: -0.11,
            design_life_cycles: 1e6,
            sf_threshold: 1.0,
        }
    }
}

impl FatigueParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sn_coefficient > 0.0 && self.sn_coefficient.is_finite()) {
            return Err(Error::Config("S-N coefficient must be positive".into()));
        }
        if !(self.sn_exponent < 0.0) {
            return Err(Error::Config("S-N exponent must be negative".into()));
        }
        if !(self.design_life_cycles >= 1.0 && self.design_life_cycles.is_finite()) {
            return Err(Error::Config(
                "design life must be at least one cycle".into(),
            ));
        }
        if !(self.sf_threshold > 0.0 && self.sf_threshold.is_finite()) {
            return Err(Error::Config(
                "safety-factor threshold must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Admissible stress amplitude at the design life.
    pub fn allowable_stress(&self) -> Result<f64> {
        Ok(sn_stress(self.design_life_cycles, self)? / self.sf_threshold)
    }
}

/// Stress amplitude sustained for `n_cycles`, MPa.
pub fn sn_stress(n_cycles: f64, params: &FatigueParams) -> Result<f64> {
    params.validate()?;
    if !(n_cycles >= 1.0) {
        return Err(Error::domain(format!("cycle count {n_cycles} below 1")));
    }
    Ok(params.sn_coefficient * n_cycles.powf(params.sn_exponent))
}

/// Inverse of [`sn_stress`].
pub fn sn_cycles(stress: f64, params: &FatigueParams) -> Result<f64> {
    params.validate()?;
    if !(stress > 0.0 && stress <= params.sn_coefficient) {
        return Err(Error::domain(format!(
            "stress {stress} outside (0, {}]",
            params.sn_coefficient
        )));
    }
    Ok((stress / params.sn_coefficient).powf(1.0 / params.sn_exponent))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SafetyFactor {
    pub value: f64,
    /// Set for an unstressed state; `value` is then infinite.
    pub unbounded: bool,
}

/// `S(design life) / σ` under fully reversed loading.
pub fn safety_factor(peak_alternating_stress: f64, params: &FatigueParams) -> Result<SafetyFactor> {
    let s = sn_stress(params.design_life_cycles, params)?;
    if peak_alternating_stress == 0.0 {
        return Ok(SafetyFactor {
            value: f64::INFINITY,
            unbounded: true,
        });
    }
    if !(peak_alternating_stress > 0.0 && peak_alternating_stress.is_finite()) {
        return Err(Error::domain("stress amplitude must be positive"));
    }
    Ok(SafetyFactor {
        value: s / peak_alternating_stress,
        unbounded: false,
    })
}

/// Rotation about the RCM, degrees, that moves a point at `l_ee` by `d`.
pub fn beta_from_displacement(d: f64, l_ee: f64) -> f64 {
    2.0 * (d / (2.0 * l_ee)).atan().to_degrees()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkspaceSample {
    pub theta_f: f64,
    pub d_ws: f64,
    pub beta_ws: f64,
    pub d_yield: f64,
    pub beta_yield: f64,
}

/// Smallest yield stress among stress-checked elements.
fn governing_yield(analysis: &FrameAnalysis) -> Result<f64> {
    analysis
        .model()
        .elements
        .iter()
        .filter(|e| e.stress_checked)
        .map(|e| e.material.yield_stress)
        .reduce(f64::min)
        .ok_or_else(|| Error::Model("no stress-checked element".into()))
}

/// Unit-load displacement and peak stress in one direction.
fn unit_response(analysis: &FrameAnalysis, theta_f: f64, scale: f64) -> Result<(f64, f64)> {
    let n4 = analysis.model().probe("N4")?;
    let sol = analysis.solve(&[n4_force(n4, scale, theta_f)])?;
    Ok((sol.translation(n4).norm(), sol.peak_von_mises))
}

/// Closed-form workspace limit in one direction, from the unit-load state
/// scaled until the safety factor meets the threshold.
pub fn max_workspace(
    analysis: &FrameAnalysis,
    theta_f: f64,
    l_ee: f64,
    params: &FatigueParams,
) -> Result<WorkspaceSample> {
    if !(l_ee > 0.0) {
        return Err(Error::domain("L_EE must be positive"));
    }
    let allow = params.allowable_stress()?;
    let yield_stress = governing_yield(analysis)?;
    let (d_unit, s_unit) = unit_response(analysis, theta_f, 1.0)?;
    if !(s_unit > 0.0) || !(d_unit > 0.0) {
        return Err(Error::Numerical(format!(
            "degenerate direction {theta_f} deg: no stress or motion under load"
        )));
    }
    let d_ws = d_unit * allow / s_unit;
    let d_yield = d_unit * yield_stress / s_unit;
    Ok(WorkspaceSample {
        theta_f,
        d_ws,
        beta_ws: beta_from_displacement(d_ws, l_ee),
        d_yield,
        beta_yield: beta_from_displacement(d_yield, l_ee),
    })
}

/// Displacement at which the safety factor reaches the threshold, found by
/// bisection on the load magnitude with a fresh solve per step.
pub fn bisect_workspace(
    analysis: &FrameAnalysis,
    theta_f: f64,
    params: &FatigueParams,
) -> Result<f64> {
    let admissible = |scale: f64| -> Result<(bool, f64)> {
        let (d, s) = unit_response(analysis, theta_f, scale)?;
        Ok((safety_factor(s, params)?.value >= params.sf_threshold, d))
    };
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let mut d_hi = None;
    for _ in 0..200 {
        let (ok, d) = admissible(hi)?;
        if !ok {
            d_hi = Some(d);
            break;
        }
        lo = hi;
        hi *= 2.0;
    }
    let mut d_hi =
        d_hi.ok_or_else(|| Error::Numerical(format!("no fatigue limit found at {theta_f} deg")))?;
    let mut d_lo = if lo > 0.0 {
        unit_response(analysis, theta_f, lo)?.0
    } else {
        0.0
    };
    while d_hi - d_lo > BISECTION_TOL_MM {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let (ok, d) = admissible(mid)?;
        if ok {
            lo = mid;
            d_lo = d;
        } else {
            hi = mid;
            d_hi = d;
        }
    }
    Ok(0.5 * (d_lo + d_hi))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkspaceResult {
    pub samples: Vec<WorkspaceSample>,
    pub meets_clinical: bool,
    pub l_ee: f64,
}

impl WorkspaceResult {
    pub fn min_beta_ws(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.beta_ws)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("theta_f_deg,d_ws_mm,beta_ws_deg,beta_yield_deg\n");
        for w in &self.samples {
            writeln!(
                s,
                "{:.3},{:.6},{:.4},{:.4}",
                w.theta_f, w.d_ws, w.beta_ws, w.beta_yield
            )
            .unwrap();
        }
        s
    }
}

pub fn workspace_sweep(
    analysis: &FrameAnalysis,
    l_ee: f64,
    params: &FatigueParams,
    step: f64,
) -> Result<WorkspaceResult> {
    let angles = sweep_angles(step)?;
    let samples = angles
        .par_iter()
        .map(|&t| max_workspace(analysis, t, l_ee, params))
        .collect::<Result<Vec<_>>>()?;
    let meets_clinical = samples.iter().all(|s| s.beta_ws >= CLINICAL_WORKSPACE_DEG);
    Ok(WorkspaceResult {
        samples,
        meets_clinical,
        l_ee,
    })
}
