//! Whole-joint behaviour: sweep symmetry, drift scaling and design trends.

use approx::assert_relative_eq;
use proptest::prelude::*;
use rcm_core::characterize::{
    argmax_angle, axial_gap_deg, command_chord, drift_at_command, sweep_at, Safety,
};
use rcm_core::feasibility::evaluate_config;
use rcm_core::joint::{
    sweep_angles, LIMITS_ALPHA, LIMITS_H, LIMITS_L_REF, LIMITS_T_REF, LIMITS_T_TRI,
};
use rcm_core::{build_joint, design_metrics, FrameAnalysis, JointConfig, MetricOptions};

fn best() -> JointConfig {
    JointConfig::new(97.86, 95.98, 1.33, 3.42, 42.68)
}

fn analysis(c: &JointConfig) -> FrameAnalysis {
    FrameAnalysis::new(&build_joint(c).unwrap()).unwrap()
}

#[test]
fn best_configuration_properties() {
    let c = best();
    let (m, sweep) =
        design_metrics(&build_joint(&c).unwrap(), c.l_ee, &MetricOptions::default()).unwrap();
    assert_eq!(sweep.samples.len(), 36);
    assert!(m.par <= 1.6, "PAR {}", m.par);
    assert!(m.ellipse.discriminant() < 0.0);
    assert!(m.rcm_drift_at_4p5deg.iter().all(|d| d.drift < 1.0));
    assert_eq!(m.safety, Safety::Safe);
    let k = argmax_angle(sweep.samples.iter().map(|s| (s.theta_f, s.stiffness))).unwrap();
    let d = argmax_angle(m.rcm_drift_at_4p5deg.iter().map(|d| (d.theta_f, d.drift))).unwrap();
    assert!(
        axial_gap_deg(k, d) <= 30.0,
        "stiffness peak {k}, drift peak {d}"
    );
}

#[test]
fn opposite_directions_have_equal_stiffness() {
    let an = analysis(&best());
    let s = sweep_at(&an, 1.0, &sweep_angles(10.0).unwrap()).unwrap();
    for i in 0..18 {
        let (a, b) = (s.samples[i], s.samples[i + 18]);
        assert_relative_eq!(a.stiffness, b.stiffness, max_relative = 1e-9);
        assert_relative_eq!(a.rcm_drift, b.rcm_drift, max_relative = 1e-9);
    }
}

#[test]
fn stiffness_does_not_depend_on_force() {
    let an = analysis(&best());
    let angles = sweep_angles(30.0).unwrap();
    let one = sweep_at(&an, 1.0, &angles).unwrap();
    let two = sweep_at(&an, 2.0, &angles).unwrap();
    for (a, b) in one.samples.iter().zip(&two.samples) {
        assert_relative_eq!(a.stiffness, b.stiffness, max_relative = 1e-9);
        assert_relative_eq!(
            2.0 * a.ee_displacement,
            b.ee_displacement,
            max_relative = 1e-9
        );
    }
    let wrapped = sweep_at(&an, 1.0, &[370.0]).unwrap();
    assert_relative_eq!(
        wrapped.samples[0].stiffness,
        sweep_at(&an, 1.0, &[10.0]).unwrap().samples[0].stiffness,
        max_relative = 1e-12
    );
}

#[test]
fn drift_scales_with_command_chord() {
    let c = best();
    let an = analysis(&c);
    let angles = sweep_angles(30.0).unwrap();
    let zero = drift_at_command(&an, 0.0, c.l_ee, &angles).unwrap();
    assert!(zero.iter().all(|d| d.drift == 0.0));
    let b1 = drift_at_command(&an, 4.5, c.l_ee, &angles).unwrap();
    let b2 = drift_at_command(&an, 9.0, c.l_ee, &angles).unwrap();
    let chord_ratio = command_chord(9.0, c.l_ee) / command_chord(4.5, c.l_ee);
    let sin_ratio = 4.5f64.to_radians().sin() / 2.25f64.to_radians().sin();
    assert_relative_eq!(chord_ratio, sin_ratio, max_relative = 1e-12);
    for (a, b) in b1.iter().zip(&b2) {
        assert_relative_eq!(b.drift / a.drift, chord_ratio, max_relative = 1e-9);
        assert_relative_eq!(
            b.drift / a.drift,
            b.ee_chord / a.ee_chord,
            max_relative = 1e-9
        );
    }
    assert!(drift_at_command(&an, 181.0, c.l_ee, &angles).is_err());
}

#[test]
fn thicker_mobility_panels_lower_par_err() {
    let mut prev = f64::INFINITY;
    for t in [1.0, 1.5, 2.0, 3.0, 4.0, 5.0, 6.0] {
        let c = JointConfig { t_ref: t, ..best() };
        let pe = evaluate_config(&c, 1.0).unwrap().1.value;
        assert!(pe < prev, "t_ref {t}: ParErr {pe} not below {prev}");
        prev = pe;
    }
}

#[test]
fn second_published_configuration_has_finite_metrics() {
    let (iso, pe) =
        evaluate_config(&JointConfig::new(70.84, 84.01, 1.15, 3.55, 46.33), 1.0).unwrap();
    assert!(iso.is_finite() && iso >= 0.0);
    assert!(pe.value.is_finite() && pe.value > 0.0 && !pe.drift_free);
}

#[test]
fn rebuild_is_bit_identical() {
    assert_eq!(build_joint(&best()).unwrap(), build_joint(&best()).unwrap());
}

fn in_box() -> impl Strategy<Value = JointConfig> {
    (
        LIMITS_L_REF.0..=LIMITS_L_REF.1,
        LIMITS_H.0..=LIMITS_H.1,
        LIMITS_T_REF.0..=LIMITS_T_REF.1,
        LIMITS_T_TRI.0..=LIMITS_T_TRI.1,
        LIMITS_ALPHA.0..=LIMITS_ALPHA.1,
    )
        .prop_map(|(l, h, t, tt, a)| JointConfig::new(l, h, t, tt, a))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn shaft_axis_passes_through_rcm(c in in_box()) {
        let m = build_joint(&c).unwrap();
        let n4 = nalgebra::Vector3::from(m.nodes[m.probe("N4").unwrap()]);
        let rcm = nalgebra::Vector3::from(m.nodes[m.probe("RCM").unwrap()]);
        let shaft = m
            .elements
            .iter()
            .find(|e| !e.stress_checked)
            .expect("shaft element");
        let a = nalgebra::Vector3::from(m.nodes[shaft.node_a]);
        let b = nalgebra::Vector3::from(m.nodes[shaft.node_b]);
        let dir = (b - a).normalize();
        let off = (rcm - a) - dir * (rcm - a).dot(&dir);
        prop_assert!(off.norm() < 1e-6);
        prop_assert!(((n4 - rcm).norm() - c.l_ee).abs() < 1e-9);
    }

    #[test]
    fn every_box_configuration_evaluates(c in in_box()) {
        let (iso, pe) = evaluate_config(&c, 1.0).unwrap();
        prop_assert!(iso.is_finite() && iso >= 0.0);
        prop_assert!(pe.value > 0.0);
    }
}
