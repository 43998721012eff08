//! Local search for isotropic mobility-panel geometry.
//!
//! The eight design variables `[L1, L2, L3, t1, t2, t3, theta1, theta2]` are
//! driven towards `anisotropy_index = 0` with a box-constrained Nelder–Mead
//! simplex. Lengths and thicknesses are divided by `min(L_i)` before the
//! search so that the path depends only on the shape of the initial guess,
//! not its absolute size.

use std::cmp::Ordering;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{panel_set_index, wrap_degrees, PanelSet};

const NVARS: usize = 8;

// Dimension-adapted simplex coefficients (Gao & Han) for n = 8.
const EXPAND: f64 = 1.0 + 2.0 / NVARS as f64;
const CONTRACT: f64 = 0.75 - 0.5 / NVARS as f64;
const SHRINK: f64 = 1.0 - 1.0 / NVARS as f64;

/// Dimensionless description of a mobility-panel set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ratios {
    pub l2_over_l1: f64,
    pub l3_over_l1: f64,
    pub t1_over_t2: f64,
    pub t3_over_t2: f64,
    /// Degrees.
    pub theta1: f64,
    /// Degrees.
    pub theta2: f64,
}

impl Ratios {
    /// Published isotropic solution used as the default mobility geometry.
    pub const BASELINE: Ratios = Ratios {
        l2_over_l1: 3.12,
        l3_over_l1: 2.00,
        t1_over_t2: 1.03,
        t3_over_t2: 2.01,
        theta1: 159.8,
        theta2: 150.6,
    };

    /// `(L1, L2, L3)` with `L1 = l_ref`.
    pub fn lengths(&self, l_ref: f64) -> [f64; 3] {
        [l_ref, self.l2_over_l1 * l_ref, self.l3_over_l1 * l_ref]
    }

    /// `(t1, t2, t3)` with `t2 = t_ref`.
    pub fn thicknesses(&self, t_ref: f64) -> [f64; 3] {
        [self.t1_over_t2 * t_ref, t_ref, self.t3_over_t2 * t_ref]
    }

    /// Largest relative deviation over the four ratios and two angles.
    pub fn max_relative_deviation(&self, other: &Ratios) -> f64 {
        let a = self.as_array();
        let b = other.as_array();
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| ((x - y) / y).abs())
            .fold(0.0, f64::max)
    }

    fn as_array(&self) -> [f64; 6] {
        [
            self.l2_over_l1,
            self.l3_over_l1,
            self.t1_over_t2,
            self.t3_over_t2,
            self.theta1,
            self.theta2,
        ]
    }

    /// Header plus one row: `L2_over_L1,L3_over_L1,t1_over_t2,t3_over_t2,theta1_deg,theta2_deg`.
    pub fn to_csv(&self) -> String {
        let a = self.as_array();
        format!(
            "L2_over_L1,L3_over_L1,t1_over_t2,t3_over_t2,theta1_deg,theta2_deg\n{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
            a[0], a[1], a[2], a[3], a[4], a[5]
        )
    }
}

impl Default for Ratios {
    fn default() -> Self {
        Ratios::BASELINE
    }
}

/// Ratio record of a panel set. Invariant under uniform scaling.
pub fn normalize_ratios(set: &PanelSet) -> Ratios {
    let l = set.lengths();
    let t = set.thicknesses();
    Ratios {
        l2_over_l1: l[1] / l[0],
        l3_over_l1: l[2] / l[0],
        t1_over_t2: t[0] / t[1],
        t3_over_t2: t[2] / t[1],
        theta1: set.theta1(),
        theta2: set.theta2(),
    }
}

/// Box constraints on `[L1, L2, L3, t1, t2, t3, theta1, theta2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lo: [f64; NVARS],
    pub hi: [f64; NVARS],
}

impl Bounds {
    pub fn new(length: (f64, f64), thickness: (f64, f64), angle: (f64, f64)) -> Self {
        let mut lo = [0.0; NVARS];
        let mut hi = [0.0; NVARS];
        for i in 0..3 {
            lo[i] = length.0;
            hi[i] = length.1;
            lo[3 + i] = thickness.0;
            hi[3 + i] = thickness.1;
        }
        for i in 6..8 {
            lo[i] = angle.0;
            hi[i] = angle.1;
        }
        Bounds { lo, hi }
    }

    pub fn validate(&self) -> Result<()> {
        for i in 0..NVARS {
            let (lo, hi) = (self.lo[i], self.hi[i]);
            if !(lo.is_finite() && hi.is_finite()) {
                return Err(Error::Config(format!("bound {i} is not finite")));
            }
            if lo > hi {
                return Err(Error::Config(format!(
                    "bound {i}: lower {lo} exceeds upper {hi}"
                )));
            }
            if i < 6 && lo <= 0.0 && hi <= 0.0 {
                return Err(Error::Config(format!(
                    "bound {i}: dimension interval is non-positive"
                )));
            }
        }
        Ok(())
    }

    fn contains(&self, x: &[f64; NVARS]) -> bool {
        (0..NVARS).all(|i| x[i] >= self.lo[i] && x[i] <= self.hi[i])
    }
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds::new((1.0, 500.0), (0.1, 20.0), (0.0, 360.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthesisOptions {
    pub max_iters: usize,
    pub idx_tol: f64,
    pub bounds: Bounds,
    /// Relative size of the initial simplex edges.
    pub spread: f64,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        SynthesisOptions {
            max_iters: 2000,
            idx_tol: 1e-3,
            bounds: Bounds::default(),
            spread: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisResult {
    pub optimized: PanelSet,
    pub idx_initial: f64,
    pub idx_final: f64,
    pub ratios: Ratios,
    /// `min(L_i)` of the optimized set, mm.
    pub l_ref: f64,
    /// `min(t_i)` of the optimized set, mm.
    pub t_ref: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Best objective after each improving iteration, starting with the initial value.
    pub history: Vec<f64>,
}

impl SynthesisResult {
    pub fn report_text(&self) -> String {
        let mut s = String::new();
        let l = self.optimized.lengths();
        let t = self.optimized.thicknesses();
        let th3 = self.optimized.panels[2].orientation;
        writeln!(s, "converged      {}", self.converged).unwrap();
        writeln!(s, "iterations     {}", self.iterations).unwrap();
        writeln!(s, "idx_initial    {:.6e}", self.idx_initial).unwrap();
        writeln!(s, "idx_final      {:.6e}", self.idx_final).unwrap();
        writeln!(s, "L_ref_mm       {:.6}", self.l_ref).unwrap();
        writeln!(s, "t_ref_mm       {:.6}", self.t_ref).unwrap();
        writeln!(s, "L_mm           {:.6} {:.6} {:.6}", l[0], l[1], l[2]).unwrap();
        writeln!(s, "t_mm           {:.6} {:.6} {:.6}", t[0], t[1], t[2]).unwrap();
        writeln!(
            s,
            "theta_deg      {:.6} {:.6} {:.6}",
            self.optimized.theta1(),
            self.optimized.theta2(),
            th3
        )
        .unwrap();
        writeln!(s, "L2/L1          {:.4}", self.ratios.l2_over_l1).unwrap();
        writeln!(s, "L3/L1          {:.4}", self.ratios.l3_over_l1).unwrap();
        writeln!(s, "t1/t2          {:.4}", self.ratios.t1_over_t2).unwrap();
        writeln!(s, "t3/t2          {:.4}", self.ratios.t3_over_t2).unwrap();
        s
    }
}

fn to_vars(set: &PanelSet, scale: f64) -> [f64; NVARS] {
    let l = set.lengths();
    let t = set.thicknesses();
    [
        l[0] / scale,
        l[1] / scale,
        l[2] / scale,
        t[0] / scale,
        t[1] / scale,
        t[2] / scale,
        set.theta1(),
        set.theta2(),
    ]
}

fn from_vars(x: &[f64; NVARS], scale: f64, template: &PanelSet) -> Result<PanelSet> {
    PanelSet::from_free_angles(
        [x[0] * scale, x[1] * scale, x[2] * scale],
        [x[3] * scale, x[4] * scale, x[5] * scale],
        x[6],
        x[7],
        template.section_height,
        template.material,
    )
}

fn cmp_vertex(a: &(f64, [f64; NVARS]), b: &(f64, [f64; NVARS])) -> Ordering {
    a.0.total_cmp(&b.0).then_with(|| {
        a.1.iter()
            .zip(b.1.iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| *o != Ordering::Equal)
            .unwrap_or(Ordering::Equal)
    })
}

/// Minimizes the anisotropy index starting from `initial`.
pub fn minimize_idx(initial: &PanelSet, options: &SynthesisOptions) -> Result<SynthesisResult> {
    options.bounds.validate()?;
    if !(options.idx_tol >= 0.0) {
        return Err(Error::Config("idx_tol must be non-negative".into()));
    }
    if !(options.spread > 0.0 && options.spread.is_finite()) {
        return Err(Error::Config("simplex spread must be positive".into()));
    }
    let raw = to_vars(initial, 1.0);
    if !options.bounds.contains(&raw) {
        return Err(Error::Config(
            "initial design lies outside the bounds".into(),
        ));
    }

    let scale = initial
        .lengths()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let mut lo = options.bounds.lo;
    let mut hi = options.bounds.hi;
    for i in 0..6 {
        lo[i] /= scale;
        hi[i] /= scale;
    }
    let clamp = |mut x: [f64; NVARS]| {
        for i in 0..NVARS {
            x[i] = x[i].clamp(lo[i], hi[i]);
        }
        x
    };
    let objective = |x: &[f64; NVARS]| -> f64 {
        match from_vars(x, scale, initial).and_then(|s| panel_set_index(&s)) {
            Ok(v) if v.is_finite() => v,
            _ => f64::INFINITY,
        }
    };

    let x0 = to_vars(initial, scale);
    let f0 = panel_set_index(initial)?;
    if options.max_iters == 0 || f0 < options.idx_tol {
        return Ok(finish(*initial, f0, f0, 0, vec![f0], options.idx_tol));
    }
    let mut simplex: Vec<(f64, [f64; NVARS])> = Vec::with_capacity(NVARS + 1);
    simplex.push((objective(&x0), x0));
    for i in 0..NVARS {
        let mut x = x0;
        let step = if x0[i] != 0.0 {
            options.spread * x0[i]
        } else {
            options.spread * (hi[i] - lo[i])
        };
        x[i] += step;
        if x[i] > hi[i] {
            x[i] = x0[i] - step;
        }
        let x = clamp(x);
        simplex.push((objective(&x), x));
    }
    simplex.sort_by(cmp_vertex);

    let mut history = vec![f0];
    let mut iterations = 0;
    while iterations < options.max_iters && simplex[0].0 >= options.idx_tol {
        let spread_f = simplex[NVARS].0 - simplex[0].0;
        let size = simplex
            .iter()
            .skip(1)
            .flat_map(|(_, x)| {
                x.iter()
                    .zip(simplex[0].1.iter())
                    .map(|(a, b)| (a - b).abs())
            })
            .fold(0.0, f64::max);
        if spread_f.abs() < 1e-15 && size < 1e-12 {
            break;
        }
        iterations += 1;

        let mut centroid = [0.0; NVARS];
        for (_, x) in &simplex[..NVARS] {
            for i in 0..NVARS {
                centroid[i] += x[i] / NVARS as f64;
            }
        }
        let worst = simplex[NVARS];
        let along = |t: f64| {
            let mut x = [0.0; NVARS];
            for i in 0..NVARS {
                x[i] = centroid[i] + t * (worst.1[i] - centroid[i]);
            }
            clamp(x)
        };

        let xr = along(-1.0);
        let fr = objective(&xr);
        if fr < simplex[0].0 {
            let xe = along(-EXPAND);
            let fe = objective(&xe);
            simplex[NVARS] = if fe < fr { (fe, xe) } else { (fr, xr) };
        } else if fr < simplex[NVARS - 1].0 {
            simplex[NVARS] = (fr, xr);
        } else {
            let (xc, fc) = if fr < worst.0 {
                let xc = along(-CONTRACT);
                (xc, objective(&xc))
            } else {
                let xc = along(CONTRACT);
                (xc, objective(&xc))
            };
            if fc < worst.0.min(fr) {
                simplex[NVARS] = (fc, xc);
            } else {
                let best = simplex[0].1;
                for v in simplex.iter_mut().skip(1) {
                    let mut x = [0.0; NVARS];
                    for i in 0..NVARS {
                        x[i] = best[i] + SHRINK * (v.1[i] - best[i]);
                    }
                    let x = clamp(x);
                    *v = (objective(&x), x);
                }
            }
        }
        simplex.sort_by(cmp_vertex);
        if simplex[0].0 < *history.last().unwrap() {
            history.push(simplex[0].0);
        }
    }

    let mut best = simplex[0].1;
    best[6] = wrap_degrees(best[6]);
    best[7] = wrap_degrees(best[7]);
    let mut optimized = from_vars(&best, scale, initial)?;
    let mut idx_final = panel_set_index(&optimized)?;
    if idx_final > f0 {
        // rescaling rounding can nudge the value above a start that never moved
        optimized = *initial;
        idx_final = f0;
    }
    Ok(finish(
        optimized,
        f0,
        idx_final,
        iterations,
        history,
        options.idx_tol,
    ))
}

fn finish(
    optimized: PanelSet,
    idx_initial: f64,
    idx_final: f64,
    iterations: usize,
    history: Vec<f64>,
    idx_tol: f64,
) -> SynthesisResult {
    let min = |v: [f64; 3]| v.iter().copied().fold(f64::INFINITY, f64::min);
    SynthesisResult {
        ratios: normalize_ratios(&optimized),
        l_ref: min(optimized.lengths()),
        t_ref: min(optimized.thicknesses()),
        optimized,
        idx_initial,
        idx_final,
        iterations,
        converged: idx_final < idx_tol,
        history,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Material;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn set(l: [f64; 3], t: [f64; 3], a: f64, b: f64) -> PanelSet {
        PanelSet::from_free_angles(l, t, a, b, 10.0, Material::PA12).unwrap()
    }

    #[test]
    fn ratio_examples() {
        let r = normalize_ratios(&set([20.0, 62.4, 40.0], [1.03, 1.0, 2.01], 159.8, 150.6));
        assert_relative_eq!(r.l2_over_l1, 3.12, max_relative = 1e-12);
        assert_relative_eq!(r.l3_over_l1, 2.0, max_relative = 1e-12);
        assert_relative_eq!(r.t1_over_t2, 1.03, max_relative = 1e-12);
        assert_relative_eq!(r.t3_over_t2, 2.01, max_relative = 1e-12);

        let same = normalize_ratios(&set([5.0; 3], [0.5; 3], 10.0, 20.0));
        assert_eq!(
            [
                same.l2_over_l1,
                same.l3_over_l1,
                same.t1_over_t2,
                same.t3_over_t2
            ],
            [1.0; 4]
        );
    }

    #[test]
    fn isotropic_start_is_immediately_converged() {
        let s = set([30.0; 3], [1.0; 3], 120.0, 240.0);
        let r = minimize_idx(&s, &SynthesisOptions::default()).unwrap();
        assert!(r.converged);
        assert_eq!(r.iterations, 0);
        assert!(r.idx_final < 1e-3);
    }

    #[test]
    fn thick_panel_history_strictly_decreases() {
        let s = set([20.0, 62.4, 40.0], [10.3, 1.0, 2.01], 159.8, 150.6);
        let r = minimize_idx(&s, &SynthesisOptions::default()).unwrap();
        assert!(r.history.len() > 2);
        for w in r.history.windows(2) {
            assert!(w[1] < w[0]);
        }
        assert!(r.idx_final < r.idx_initial);
    }

    #[test]
    fn zero_iterations_reports_initial() {
        let s = set([20.0, 62.4, 40.0], [1.03, 1.0, 2.01], 159.8, 150.6);
        let opts = SynthesisOptions {
            max_iters: 0,
            ..Default::default()
        };
        let r = minimize_idx(&s, &opts).unwrap();
        assert_eq!(r.iterations, 0);
        assert!(!r.converged);
        assert_eq!(r.idx_final, r.idx_initial);
        assert_eq!(r.optimized, s);
    }

    #[test]
    fn inverted_bounds_rejected() {
        let s = set([20.0; 3], [1.0; 3], 120.0, 120.0);
        let mut opts = SynthesisOptions::default();
        opts.bounds.lo[2] = 600.0;
        assert!(matches!(minimize_idx(&s, &opts), Err(Error::Config(_))));
    }

    #[test]
    fn stays_in_bounds() {
        let s = set([20.0, 30.0, 40.0], [1.0, 2.0, 3.0], 10.0, 80.0);
        let opts = SynthesisOptions {
            bounds: Bounds::new((15.0, 45.0), (0.5, 3.5), (0.0, 360.0)),
            ..Default::default()
        };
        let r = minimize_idx(&s, &opts).unwrap();
        for p in &r.optimized.panels {
            assert!(p.length >= 15.0 - 1e-9 && p.length <= 45.0 + 1e-9);
            assert!(p.thickness >= 0.5 - 1e-9 && p.thickness <= 3.5 + 1e-9);
        }
        assert!(r.idx_final <= r.idx_initial);
    }

    #[test]
    fn deterministic() {
        let s = set([20.0, 30.0, 40.0], [1.0, 2.0, 3.0], 10.0, 80.0);
        let a = minimize_idx(&s, &SynthesisOptions::default()).unwrap();
        let b = minimize_idx(&s, &SynthesisOptions::default()).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn ratios_scale_invariant(
            l in prop::array::uniform3(1.0f64..100.0),
            t in prop::array::uniform3(0.2f64..5.0),
            s in 0.1f64..10.0,
        ) {
            let a = set(l, t, 40.0, 170.0);
            let r1 = normalize_ratios(&a);
            let r2 = normalize_ratios(&a.scaled(s).unwrap());
            prop_assert!(r1.max_relative_deviation(&r2) < 1e-12);
        }

        #[test]
        fn never_worse_than_start(
            l in prop::array::uniform3(5.0f64..100.0),
            t in prop::array::uniform3(0.5f64..5.0),
            a in 0.0f64..359.0,
            b in 0.0f64..359.0,
        ) {
            let s0 = set(l, t, a, b);
            let opts = SynthesisOptions { max_iters: 150, ..Default::default() };
            let r = minimize_idx(&s0, &opts).unwrap();
            prop_assert!(r.idx_final <= r.idx_initial);
            prop_assert_eq!(r.converged, r.idx_final < opts.idx_tol);
        }

        #[test]
        fn scale_equivariant(s in 0.5f64..4.0) {
            let s0 = set([20.0, 50.0, 35.0], [1.2, 1.0, 1.7], 150.0, 140.0);
            let opts = SynthesisOptions { max_iters: 300, ..Default::default() };
            let a = minimize_idx(&s0, &opts).unwrap();
            let b = minimize_idx(&s0.scaled(s).unwrap(), &opts).unwrap();
            prop_assert!(a.ratios.max_relative_deviation(&b.ratios) < 1e-6);
        }
    }
}
