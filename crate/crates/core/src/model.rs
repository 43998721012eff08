//! Closed-form planar compliance of the three mobility panels.
//!
//! Each panel is an equivalent slender beam of rectangular section
//! (height `b`, thickness `t`, length `L`) lying in the joint plane at
//! orientation `theta`. Axial and transverse (guided-end) stiffnesses are
//! rotated into the plane and summed, inverted to a 2x2 compliance, and
//! scored by how far that compliance is from a scaled identity.
//!
//! Units are N, mm and MPa throughout; angles are degrees at the interface.

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kv::{fmt_f64, Record};

/// Wraps an angle in degrees into `[0, 360)`.
pub fn wrap_degrees(deg: f64) -> f64 {
    let w = deg.rem_euclid(360.0);
    // rem_euclid can round up to exactly 360 for tiny negative inputs
    if w >= 360.0 {
        0.0
    } else {
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Material {
    /// MPa
    pub young_modulus: f64,
    /// MPa
    pub yield_stress: f64,
    pub elongation_at_break: f64,
    pub poisson_ratio: f64,
}

impl Material {
    /// Sintered polyamide 12.
    pub const PA12: Material = Material {
        young_modulus: 1400.0,
        yield_stress: 45.5,
        elongation_at_break: 0.14,
        poisson_ratio: 0.4,
    };

    /// Stainless tool steel, used for the end-effector shaft.
    pub const STEEL: Material = Material {
        young_modulus: 200_000.0,
        yield_stress: 250.0,
        elongation_at_break: 0.4,
        poisson_ratio: 0.3,
    };

    pub fn new(young_modulus: f64, yield_stress: f64, elongation_at_break: f64) -> Result<Self> {
        let m = Material {
            young_modulus,
            yield_stress,
            elongation_at_break,
            poisson_ratio: Material::PA12.poisson_ratio,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn with_poisson_ratio(mut self, nu: f64) -> Result<Self> {
        self.poisson_ratio = nu;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.young_modulus > 0.0 && self.young_modulus.is_finite()) {
            return Err(Error::domain("young modulus must be positive"));
        }
        if !(self.yield_stress > 0.0 && self.yield_stress.is_finite()) {
            return Err(Error::domain("yield stress must be positive"));
        }
        if !(self.elongation_at_break >= 0.0) {
            return Err(Error::domain("elongation at break must be non-negative"));
        }
        if !(self.poisson_ratio > -1.0 && self.poisson_ratio < 0.5) {
            return Err(Error::domain("poisson ratio must lie in (-1, 0.5)"));
        }
        Ok(())
    }

    pub fn shear_modulus(&self) -> f64 {
        self.young_modulus / (2.0 * (1.0 + self.poisson_ratio))
    }
}

impl Default for Material {
    fn default() -> Self {
        Material::PA12
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Panel {
    /// mm
    pub length: f64,
    /// mm
    pub thickness: f64,
    /// Degrees in `[0, 360)`, measured from the joint x-axis.
    pub orientation: f64,
}

impl Panel {
    pub fn new(length: f64, thickness: f64, orientation: f64) -> Result<Self> {
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::domain(format!(
                "panel length must be positive, got {length}"
            )));
        }
        if !(thickness > 0.0 && thickness.is_finite()) {
            return Err(Error::domain(format!(
                "panel thickness must be positive, got {thickness}"
            )));
        }
        if !orientation.is_finite() {
            return Err(Error::domain("panel orientation must be finite"));
        }
        Ok(Panel {
            length,
            thickness,
            orientation: wrap_degrees(orientation),
        })
    }
}

/// The three mobility panels, the shared section height and the material.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PanelSet {
    pub panels: [Panel; 3],
    /// mm
    pub section_height: f64,
    pub material: Material,
}

impl PanelSet {
    /// Builds the set from the two free angles; the third panel sits at
    /// `theta1 + theta2`.
    pub fn from_free_angles(
        lengths: [f64; 3],
        thicknesses: [f64; 3],
        theta1: f64,
        theta2: f64,
        section_height: f64,
        material: Material,
    ) -> Result<Self> {
        if !(section_height > 0.0 && section_height.is_finite()) {
            return Err(Error::domain("section height must be positive"));
        }
        material.validate()?;
        let angles = [theta1, theta2, theta1 + theta2];
        let mut panels = [Panel {
            length: 1.0,
            thickness: 1.0,
            orientation: 0.0,
        }; 3];
        for i in 0..3 {
            panels[i] = Panel::new(lengths[i], thicknesses[i], angles[i])?;
        }
        Ok(PanelSet {
            panels,
            section_height,
            material,
        })
    }

    pub fn lengths(&self) -> [f64; 3] {
        self.panels.map(|p| p.length)
    }

    pub fn thicknesses(&self) -> [f64; 3] {
        self.panels.map(|p| p.thickness)
    }

    pub fn theta1(&self) -> f64 {
        self.panels[0].orientation
    }

    pub fn theta2(&self) -> f64 {
        self.panels[1].orientation
    }

    /// Multiplies every length and thickness by `s`.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        PanelSet::from_free_angles(
            self.lengths().map(|l| l * s),
            self.thicknesses().map(|t| t * s),
            self.theta1(),
            self.theta2(),
            self.section_height,
            self.material,
        )
    }

    /// Mobility-panel geometry realizing the given ratio record at a
    /// reference length and thickness.
    pub fn from_ratios(
        ratios: &crate::synth::Ratios,
        l_ref: f64,
        t_ref: f64,
        section_height: f64,
        material: Material,
    ) -> Result<Self> {
        PanelSet::from_free_angles(
            ratios.lengths(l_ref),
            ratios.thicknesses(t_ref),
            ratios.theta1,
            ratios.theta2,
            section_height,
            material,
        )
    }

    /// Parses the flat record (`L1..L3`, `t1..t3`, `theta1`, `theta2`, `b`, `E`).
    pub fn from_record_text(text: &str) -> Result<Self> {
        let r = Record::parse(text)?;
        r.deny_unknown(&[
            "L1", "L2", "L3", "t1", "t2", "t3", "theta1", "theta2", "b", "E", "sigma_y", "nu",
        ])?;
        r.all_numeric()?;
        let mut material = Material::PA12;
        material.young_modulus = r.f64("E")?;
        material.yield_stress = r.f64_or("sigma_y", material.yield_stress)?;
        material.poisson_ratio = r.f64_or("nu", material.poisson_ratio)?;
        PanelSet::from_free_angles(
            [r.f64("L1")?, r.f64("L2")?, r.f64("L3")?],
            [r.f64("t1")?, r.f64("t2")?, r.f64("t3")?],
            r.f64("theta1")?,
            r.f64("theta2")?,
            r.f64("b")?,
            material,
        )
    }

    /// Writes the flat record; the third angle is never stored.
    pub fn to_record_text(&self) -> String {
        let l = self.lengths();
        let t = self.thicknesses();
        format!(
            "L1={}\nL2={}\nL3={}\nt1={}\nt2={}\nt3={}\ntheta1={}\ntheta2={}\nb={}\nE={}\n",
            fmt_f64(l[0]),
            fmt_f64(l[1]),
            fmt_f64(l[2]),
            fmt_f64(t[0]),
            fmt_f64(t[1]),
            fmt_f64(t[2]),
            fmt_f64(self.theta1()),
            fmt_f64(self.theta2()),
            fmt_f64(self.section_height),
            fmt_f64(self.material.young_modulus),
        )
    }
}

/// Area (mm²) and second moment about the thickness axis (mm⁴).
pub fn section_properties(panel: &Panel, b: f64) -> Result<(f64, f64)> {
    if !(b > 0.0) || !(panel.thickness > 0.0) {
        return Err(Error::domain("section dimensions must be positive"));
    }
    let t = panel.thickness;
    Ok((b * t, b * t * t * t / 12.0))
}

/// Axial `EA/L` and guided transverse `12EI/L³` stiffness (N/mm).
pub fn beam_stiffness(panel: &Panel, b: f64, material: &Material) -> Result<(f64, f64)> {
    if !(panel.length > 0.0) {
        return Err(Error::domain("panel length must be positive"));
    }
    let (area, inertia) = section_properties(panel, b)?;
    let e = material.young_modulus;
    let l = panel.length;
    Ok((e * area / l, 12.0 * e * inertia / (l * l * l)))
}

/// In-plane stiffness of panels acting together at the output node.
pub fn assemble_panels(panels: &[Panel], b: f64, material: &Material) -> Result<Matrix2<f64>> {
    let mut k = Matrix2::zeros();
    for p in panels {
        let (kn, kv) = beam_stiffness(p, b, material)?;
        let (s, c) = p.orientation.to_radians().sin_cos();
        let kxy = (kn - kv) * c * s;
        k[(0, 0)] += kn * c * c + kv * s * s;
        k[(1, 1)] += kn * s * s + kv * c * c;
        k[(0, 1)] += kxy;
        k[(1, 0)] += kxy;
    }
    Ok(k)
}

pub fn assemble_stiffness(set: &PanelSet) -> Result<Matrix2<f64>> {
    assemble_panels(&set.panels, set.section_height, &set.material)
}

/// Inverts a 2x2 stiffness via the adjugate.
pub fn compliance(k: &Matrix2<f64>) -> Result<Matrix2<f64>> {
    let scale = k.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let det = k[(0, 0)] * k[(1, 1)] - k[(0, 1)] * k[(1, 0)];
    let threshold = 1e-12 * scale * scale;
    if !(det.abs() > threshold) || !det.is_finite() {
        return Err(Error::Singular { det, threshold });
    }
    Ok(Matrix2::new(
        k[(1, 1)] / det,
        -k[(0, 1)] / det,
        -k[(1, 0)] / det,
        k[(0, 0)] / det,
    ))
}

/// Distance of a compliance from a scaled identity, normalized by the
/// mean absolute entry. Zero exactly when `S = s I`.
pub fn anisotropy_index(s: &Matrix2<f64>) -> Result<f64> {
    if s.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("compliance has non-finite entries"));
    }
    let (s11, s12, s21, s22) = (s[(0, 0)], s[(0, 1)], s[(1, 0)], s[(1, 1)]);
    let mean = (s11.abs() + s12.abs() + s21.abs() + s22.abs()) / 4.0;
    if mean == 0.0 {
        return Err(Error::domain("anisotropy index of an all-zero matrix"));
    }
    let num = ((s11 - s22).powi(2) + s12 * s12 + s21 * s21).sqrt();
    Ok(num / mean)
}

/// `anisotropy_index(compliance(assemble_stiffness(set)))`.
pub fn panel_set_index(set: &PanelSet) -> Result<f64> {
    anisotropy_index(&compliance(&assemble_stiffness(set)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn panel(l: f64, t: f64, th: f64) -> Panel {
        Panel::new(l, t, th).unwrap()
    }

    #[test]
    fn section_examples() {
        let (a, i) = section_properties(&panel(20.0, 1.0, 0.0), 10.0).unwrap();
        assert_relative_eq!(a, 10.0);
        assert_relative_eq!(i, 0.833_333_333_333_333_4, max_relative = 1e-12);
        let (a, i) = section_properties(&panel(20.0, 2.0, 0.0), 10.0).unwrap();
        assert_relative_eq!(a, 20.0);
        assert_relative_eq!(i, 6.666_666_666_666_667, max_relative = 1e-12);
        assert!(section_properties(&panel(20.0, 1.0, 0.0), 0.0).is_err());
    }

    #[test]
    fn cubic_thickness_law() {
        let (_, i1) = section_properties(&panel(20.0, 1.3, 0.0), 7.0).unwrap();
        let (_, i2) = section_properties(&panel(20.0, 2.6, 0.0), 7.0).unwrap();
        assert_relative_eq!(i2 / i1, 8.0, max_relative = 1e-12);
    }

    #[test]
    fn beam_stiffness_examples() {
        let m = Material::PA12;
        let (kn, kv) = beam_stiffness(&panel(20.0, 1.0, 0.0), 10.0, &m).unwrap();
        assert_relative_eq!(kn, 700.0, max_relative = 1e-12);
        assert_relative_eq!(kv, 1.75, max_relative = 1e-12);
        let (kn, kv) = beam_stiffness(&panel(20.0, 2.0, 0.0), 10.0, &m).unwrap();
        assert_relative_eq!(kn, 1400.0, max_relative = 1e-12);
        assert_relative_eq!(kv, 14.0, max_relative = 1e-12);
        let (kn2, kv2) = beam_stiffness(&panel(40.0, 2.0, 0.0), 10.0, &m).unwrap();
        assert_relative_eq!(kn2, kn / 2.0, max_relative = 1e-12);
        assert_relative_eq!(kv2, kv / 8.0, max_relative = 1e-12);
    }

    #[test]
    fn zero_length_rejected() {
        assert!(Panel::new(0.0, 1.0, 0.0).is_err());
        assert!(Panel::new(1.0, -1.0, 0.0).is_err());
    }

    #[test]
    fn single_panel_axis_cases() {
        let m = Material::PA12;
        let (kn, kv) = beam_stiffness(&panel(20.0, 1.0, 0.0), 10.0, &m).unwrap();
        let k0 = assemble_panels(&[panel(20.0, 1.0, 0.0)], 10.0, &m).unwrap();
        assert_relative_eq!(k0, Matrix2::new(kn, 0.0, 0.0, kv), epsilon = 1e-12);
        let k90 = assemble_panels(&[panel(20.0, 1.0, 90.0)], 10.0, &m).unwrap();
        assert_relative_eq!(k90, Matrix2::new(kv, 0.0, 0.0, kn), epsilon = 1e-9);
    }

    #[test]
    fn symmetric_triplet_is_isotropic() {
        let set =
            PanelSet::from_free_angles([30.0; 3], [1.5; 3], 120.0, 240.0, 10.0, Material::PA12)
                .unwrap();
        assert_relative_eq!(set.panels[2].orientation, 0.0);
        let k = assemble_stiffness(&set).unwrap();
        assert_relative_eq!(k[(0, 0)], k[(1, 1)], max_relative = 1e-12);
        assert!(k[(0, 1)].abs() < 1e-10 * k[(0, 0)]);
        assert!(panel_set_index(&set).unwrap() < 1e-12);
    }

    #[test]
    fn third_angle_wraps() {
        let set =
            PanelSet::from_free_angles([1.0; 3], [0.1; 3], 200.0, 250.0, 10.0, Material::PA12)
                .unwrap();
        assert_relative_eq!(set.panels[2].orientation, 90.0, epsilon = 1e-12);
    }

    #[test]
    fn compliance_examples() {
        let s = compliance(&Matrix2::new(2.0, 0.0, 0.0, 1.0)).unwrap();
        assert_relative_eq!(s, Matrix2::new(0.5, 0.0, 0.0, 1.0));
        let s = compliance(&Matrix2::identity()).unwrap();
        assert_relative_eq!(s, Matrix2::identity());
        assert!(matches!(
            compliance(&Matrix2::new(1.0, 2.0, 2.0, 4.0)),
            Err(Error::Singular { .. })
        ));
    }

    #[test]
    fn anisotropy_examples() {
        assert_eq!(anisotropy_index(&(Matrix2::identity() * 3.0)).unwrap(), 0.0);
        let idx = anisotropy_index(&Matrix2::new(1.0, 0.0, 0.0, 2.0)).unwrap();
        assert_relative_eq!(idx, 1.0 / 0.75, max_relative = 1e-12);
        assert!(anisotropy_index(&Matrix2::zeros()).is_err());
    }

    #[test]
    fn record_roundtrip() {
        let set = PanelSet::from_free_angles(
            [20.0, 62.4, 40.0],
            [1.03, 1.0, 2.01],
            159.8,
            150.6,
            10.0,
            Material::PA12,
        )
        .unwrap();
        let text = set.to_record_text();
        assert!(!text.contains("theta3"));
        assert_eq!(PanelSet::from_record_text(&text).unwrap(), set);
        assert!(matches!(
            PanelSet::from_record_text(&text.replace("L2=", "L2=x")),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    fn arb_set() -> impl Strategy<Value = PanelSet> {
        (
            prop::array::uniform3(1.0f64..200.0),
            prop::array::uniform3(0.2f64..10.0),
            0.0f64..360.0,
            0.0f64..360.0,
        )
            .prop_filter_map("well conditioned", |(l, t, a, b)| {
                let set = PanelSet::from_free_angles(l, t, a, b, 10.0, Material::PA12).ok()?;
                let k = assemble_stiffness(&set).ok()?;
                let det = k.determinant();
                (det > 1e-6 * k.norm_squared()).then_some(set)
            })
    }

    proptest! {
        #[test]
        fn stiffness_is_symmetric(set in arb_set()) {
            let k = assemble_stiffness(&set).unwrap();
            prop_assert_eq!(k[(0, 1)], k[(1, 0)]);
        }

        #[test]
        fn inversion_roundtrip(set in arb_set()) {
            let k = assemble_stiffness(&set).unwrap();
            let s = compliance(&k).unwrap();
            let err = (k * s - Matrix2::identity()).abs().max();
            prop_assert!(err < 1e-10, "residual {}", err);
        }

        #[test]
        fn uniform_scaling_leaves_index(set in arb_set(), s in 0.05f64..20.0) {
            let a = panel_set_index(&set).unwrap();
            let b = panel_set_index(&set.scaled(s).unwrap()).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * a.max(1e-12), "{} vs {}", a, b);
        }

        #[test]
        fn index_homogeneous(c in 1e-6f64..1e6, a in -5.0f64..5.0, d in 0.1f64..5.0) {
            let s = Matrix2::new(1.0, a, a, d);
            let i1 = anisotropy_index(&s).unwrap();
            let i2 = anisotropy_index(&(s * c)).unwrap();
            prop_assert!((i1 - i2).abs() <= 1e-12 * i1.max(1.0));
        }
    }
}
