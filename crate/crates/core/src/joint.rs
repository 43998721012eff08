//! Parametric frame model of the full off-axis joint.
//!
//! Canonical layout (mm, `y` vertical, RCM at the origin):
//!
//! * `N4 = (0, L_EE, 0)`. The mobility chain lies in the plane `y = L_EE`
//!   and is laid out backwards from `N4`: `N3 = N4 − L3·d(θ3)`,
//!   `N2 = N3 − L2·d(θ2)`, `N1 = N2 − L1·d(θ1)`, where
//!   `d(ψ) = (cos ψ, 0, −sin ψ)`. Walls stand vertically with height `H/3`.
//! * A steel shaft runs from `N4` straight down to the RCM node.
//! * Three constraining legs run from base nodes
//!   `(0, H, 0) + H·tan(α)·d(90° + 120°·k)` to the RCM apex, each of width `b`
//!   (in the radial-vertical plane) and thickness `t_tri`.
//! * `N1` and the three base nodes are clamped.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{Element, FrameModel, NodalLoad};
use crate::kv::{fmt_f64, Record};
use crate::model::{wrap_degrees, Material};
use crate::synth::Ratios;

/// Shaft cross-section edge, mm.
pub const SHAFT_SIZE: f64 = 8.0;

/// Node indices of the canonical layout.
pub const NODE_N1: usize = 0;
pub const NODE_N4: usize = 3;
pub const NODE_RCM: usize = 4;

/// Inclusive limits of the parametric design box.
pub const LIMITS_L_REF: (f64, f64) = (20.0, 100.0);
pub const LIMITS_H: (f64, f64) = (20.0, 100.0);
pub const LIMITS_T_REF: (f64, f64) = (1.0, 6.0);
pub const LIMITS_T_TRI: (f64, f64) = (1.0, 6.0);
pub const LIMITS_ALPHA: (f64, f64) = (10.0, 70.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointConfig {
    /// Shortest mobility panel length, mm.
    pub l_ref: f64,
    /// Joint height, mm.
    pub h: f64,
    /// Thinnest mobility panel thickness, mm.
    pub t_ref: f64,
    /// Constraining leg thickness, mm.
    pub t_triangle: f64,
    /// Leg inclination from the vertical, degrees.
    pub alpha: f64,
    /// End-effector shaft length (N4 to RCM), mm.
    pub l_ee: f64,
    /// Constraining leg width, mm.
    pub section_height_b: f64,
    /// Mobility wall height; `None` means `H/3`.
    pub mobility_height: Option<f64>,
    pub material: Material,
    pub mobility_ratios: Ratios,
    /// Enforce the parametric design box.
    pub strict_bounds: bool,
}

impl JointConfig {
    /// Config with default `L_EE = 100`, `b = 10`, PA12 and the baseline ratios.
    pub fn new(l_ref: f64, h: f64, t_ref: f64, t_triangle: f64, alpha: f64) -> Self {
        JointConfig {
            l_ref,
            h,
            t_ref,
            t_triangle,
            alpha,
            l_ee: 100.0,
            section_height_b: 10.0,
            mobility_height: None,
            material: Material::PA12,
            mobility_ratios: Ratios::BASELINE,
            strict_bounds: false,
        }
    }

    pub fn wall_height(&self) -> f64 {
        self.mobility_height.unwrap_or(self.h / 3.0)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("L_ref", self.l_ref),
            ("H", self.h),
            ("t_ref", self.t_ref),
            ("t_tri", self.t_triangle),
            ("L_EE", self.l_ee),
            ("b", self.section_height_b),
            ("mobility height", self.wall_height()),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Construction(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if !(self.alpha > 0.0 && self.alpha < 90.0) {
            return Err(Error::Construction(format!(
                "alpha must lie in (0, 90) degrees, got {}",
                self.alpha
            )));
        }
        let r = &self.mobility_ratios;
        for v in [r.l2_over_l1, r.l3_over_l1, r.t1_over_t2, r.t3_over_t2] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Construction(
                    "mobility ratios must be positive".into(),
                ));
            }
        }
        self.material
            .validate()
            .map_err(|e| Error::Construction(e.to_string()))?;
        if self.strict_bounds {
            let checks = [
                ("L_ref", self.l_ref, LIMITS_L_REF),
                ("H", self.h, LIMITS_H),
                ("t_ref", self.t_ref, LIMITS_T_REF),
                ("t_tri", self.t_triangle, LIMITS_T_TRI),
                ("alpha_deg", self.alpha, LIMITS_ALPHA),
            ];
            for (name, v, (lo, hi)) in checks {
                if v < lo || v > hi {
                    return Err(Error::Construction(format!(
                        "{name} = {v} outside [{lo}, {hi}]"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let r = Record::parse(text)?;
        r.deny_unknown(&[
            "L_ref",
            "H",
            "t_ref",
            "t_tri",
            "alpha_deg",
            "L_EE",
            "b",
            "b_mobility",
            "strict_bounds",
            "material.E",
            "material.sigma_y",
            "material.elongation",
            "material.nu",
            "ratios.L2_over_L1",
            "ratios.L3_over_L1",
            "ratios.t1_over_t2",
            "ratios.t3_over_t2",
            "ratios.theta1_deg",
            "ratios.theta2_deg",
        ])?;
        let mut c = JointConfig::new(
            r.f64("L_ref")?,
            r.f64("H")?,
            r.f64("t_ref")?,
            r.f64("t_tri")?,
            r.f64("alpha_deg")?,
        );
        c.l_ee = r.f64_or("L_EE", c.l_ee)?;
        c.section_height_b = r.f64_or("b", c.section_height_b)?;
        if r.contains("b_mobility") {
            c.mobility_height = Some(r.f64("b_mobility")?);
        }
        c.strict_bounds = match r.get_str("strict_bounds") {
            None | Some("false") | Some("0") => false,
            Some("true") | Some("1") => true,
            Some(other) => {
                return Err(Error::parse(
                    0,
                    format!("strict_bounds: `{other}` is not a boolean"),
                ))
            }
        };
        let m = &mut c.material;
        m.young_modulus = r.f64_or("material.E", m.young_modulus)?;
        m.yield_stress = r.f64_or("material.sigma_y", m.yield_stress)?;
        m.elongation_at_break = r.f64_or("material.elongation", m.elongation_at_break)?;
        m.poisson_ratio = r.f64_or("material.nu", m.poisson_ratio)?;
        let q = &mut c.mobility_ratios;
        q.l2_over_l1 = r.f64_or("ratios.L2_over_L1", q.l2_over_l1)?;
        q.l3_over_l1 = r.f64_or("ratios.L3_over_L1", q.l3_over_l1)?;
        q.t1_over_t2 = r.f64_or("ratios.t1_over_t2", q.t1_over_t2)?;
        q.t3_over_t2 = r.f64_or("ratios.t3_over_t2", q.t3_over_t2)?;
        q.theta1 = r.f64_or("ratios.theta1_deg", q.theta1)?;
        q.theta2 = r.f64_or("ratios.theta2_deg", q.theta2)?;
        Ok(c)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let kv = |s: &mut String, k: &str, v: f64| writeln!(s, "{k}={}", fmt_f64(v)).unwrap();
        kv(&mut s, "L_ref", self.l_ref);
        kv(&mut s, "H", self.h);
        kv(&mut s, "t_ref", self.t_ref);
        kv(&mut s, "t_tri", self.t_triangle);
        kv(&mut s, "alpha_deg", self.alpha);
        kv(&mut s, "L_EE", self.l_ee);
        kv(&mut s, "b", self.section_height_b);
        if let Some(bm) = self.mobility_height {
            kv(&mut s, "b_mobility", bm);
        }
        writeln!(s, "strict_bounds={}", self.strict_bounds).unwrap();
        s.push_str("\n[material]\n");
        kv(&mut s, "E", self.material.young_modulus);
        kv(&mut s, "sigma_y", self.material.yield_stress);
        kv(&mut s, "elongation", self.material.elongation_at_break);
        kv(&mut s, "nu", self.material.poisson_ratio);
        s.push_str("\n[ratios]\n");
        let q = &self.mobility_ratios;
        kv(&mut s, "L2_over_L1", q.l2_over_l1);
        kv(&mut s, "L3_over_L1", q.l3_over_l1);
        kv(&mut s, "t1_over_t2", q.t1_over_t2);
        kv(&mut s, "t3_over_t2", q.t3_over_t2);
        kv(&mut s, "theta1_deg", q.theta1);
        kv(&mut s, "theta2_deg", q.theta2);
        s
    }
}

/// Unit direction in the mobility plane for a planar angle in degrees.
pub fn planar_direction(deg: f64) -> [f64; 3] {
    let (s, c) = wrap_degrees(deg).to_radians().sin_cos();
    [c, 0.0, -s]
}

fn sub(a: [f64; 3], b: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] - s * b[0], a[1] - s * b[1], a[2] - s * b[2]]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn build_joint(config: &JointConfig) -> Result<FrameModel> {
    config.validate()?;
    let r = &config.mobility_ratios;
    let lengths = r.lengths(config.l_ref);
    let thick = r.thicknesses(config.t_ref);
    let angles = [r.theta1, r.theta2, r.theta1 + r.theta2];

    let mut model = FrameModel::default();
    let n4 = [0.0, config.l_ee, 0.0];
    let n3 = sub(n4, planar_direction(angles[2]), lengths[2]);
    let n2 = sub(n3, planar_direction(angles[1]), lengths[1]);
    let n1 = sub(n2, planar_direction(angles[0]), lengths[0]);
    for p in [n1, n2, n3, n4, [0.0; 3]] {
        model.add_node(p);
    }
    let wall = config.wall_height();
    for i in 0..3 {
        model.elements.push(Element::rectangular(
            i,
            i + 1,
            wall,
            thick[i],
            config.material,
            [0.0, 1.0, 0.0],
        ));
    }
    model.elements.push(
        Element::rectangular(
            NODE_N4,
            NODE_RCM,
            SHAFT_SIZE,
            SHAFT_SIZE,
            Material::STEEL,
            [1.0, 0.0, 0.0],
        )
        .unchecked(),
    );

    let radius = config.h * config.alpha.to_radians().tan();
    model.fix_all(NODE_N1);
    for k in 0..3 {
        let psi = 90.0 + 120.0 * k as f64;
        let d = planar_direction(psi);
        let base = [radius * d[0], config.h, radius * d[2]];
        let node = model.add_node(base);
        model.fix_all(node);
        let len = (base[0] * base[0] + base[1] * base[1] + base[2] * base[2]).sqrt();
        let axis = [base[0] / len, base[1] / len, base[2] / len];
        let hint = cross(axis, cross([0.0, 1.0, 0.0], d));
        model.elements.push(Element::rectangular(
            node,
            NODE_RCM,
            config.section_height_b,
            config.t_triangle,
            config.material,
            hint,
        ));
    }
    model.probes.insert("N1".into(), NODE_N1);
    model.probes.insert("N4".into(), NODE_N4);
    model.probes.insert("RCM".into(), NODE_RCM);

    for i in 0..model.nodes.len() {
        for j in 0..i {
            let (a, b) = (model.nodes[i], model.nodes[j]);
            let d2 = (0..3).map(|k| (a[k] - b[k]).powi(2)).sum::<f64>();
            if d2.sqrt() < 1e-6 {
                return Err(Error::Construction(format!("nodes {j} and {i} coincide")));
            }
        }
    }
    model
        .validate_joint()
        .map_err(|e| Error::Construction(e.to_string()))?;
    Ok(model)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadCase {
    pub theta_f: f64,
    pub loads: Vec<NodalLoad>,
}

/// In-plane force of magnitude `f` at `N4`, rotated by `theta_f` about `y`.
pub fn n4_force(node: usize, f: f64, theta_f: f64) -> NodalLoad {
    let d = planar_direction(theta_f);
    NodalLoad {
        node,
        force: [f * d[0], f * d[1], f * d[2], 0.0, 0.0, 0.0],
    }
}

pub fn standard_load_cases(config: &JointConfig, f: f64, angles: &[f64]) -> Result<Vec<LoadCase>> {
    config.validate()?;
    if !(f > 0.0 && f.is_finite()) {
        return Err(Error::domain("force magnitude must be positive"));
    }
    Ok(angles
        .iter()
        .map(|&theta_f| LoadCase {
            theta_f,
            loads: vec![n4_force(NODE_N4, f, theta_f)],
        })
        .collect())
}

/// `0, step, 2·step, …` below 360.
pub fn sweep_angles(step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step <= 360.0) {
        return Err(Error::domain(format!("step {step} must lie in (0, 360]")));
    }
    let n = (360.0 / step).round();
    if ((n * step) - 360.0).abs() > 1e-9 {
        return Err(Error::domain(format!("step {step} does not divide 360")));
    }
    Ok((0..n as usize).map(|i| i as f64 * step).collect())
}
