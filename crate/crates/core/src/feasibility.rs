//! Random screening of the joint design box and Pareto/J-index selection.

use std::cmp::Ordering;
use std::fmt::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::characterize::{j_index, three_direction_metrics, DesignMetrics, ParErr};
use crate::error::{Error, Result};
use crate::fem::FrameAnalysis;
use crate::joint::{
    build_joint, JointConfig, LIMITS_ALPHA, LIMITS_H, LIMITS_L_REF, LIMITS_T_REF, LIMITS_T_TRI,
};
use crate::kv::Record;

/// Sampling intervals for the five free inputs plus the fixed remainder of
/// the configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityBounds {
    pub l_ref: (f64, f64),
    pub h: (f64, f64),
    pub t_ref: (f64, f64),
    pub t_tri: (f64, f64),
    pub alpha: (f64, f64),
    /// Supplies `L_EE`, `b`, material and mobility ratios.
    pub template: JointConfig,
}

impl Default for FeasibilityBounds {
    fn default() -> Self {
        FeasibilityBounds {
            l_ref: LIMITS_L_REF,
            h: LIMITS_H,
            t_ref: LIMITS_T_REF,
            t_tri: LIMITS_T_TRI,
            alpha: LIMITS_ALPHA,
            template: JointConfig::new(60.0, 60.0, 3.5, 3.5, 40.0),
        }
    }
}

impl FeasibilityBounds {
    fn intervals(&self) -> [(&'static str, (f64, f64)); 5] {
        [
            ("L_ref", self.l_ref),
            ("H", self.h),
            ("t_ref", self.t_ref),
            ("t_tri", self.t_tri),
            ("alpha_deg", self.alpha),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in self.intervals() {
            if !(lo.is_finite() && hi.is_finite()) {
                return Err(Error::Config(format!("{name} bounds must be finite")));
            }
            if lo > hi {
                return Err(Error::Config(format!(
                    "{name}: lower {lo} exceeds upper {hi}"
                )));
            }
            if lo <= 0.0 {
                return Err(Error::Config(format!("{name}: bounds must be positive")));
            }
        }
        if self.alpha.1 >= 90.0 {
            return Err(Error::Config("alpha_deg must stay below 90".into()));
        }
        Ok(())
    }

    /// `key = lo, hi` lines; missing keys keep the default box. `L_EE` and
    /// `b` set the fixed part of every sampled configuration.
    pub fn from_text(text: &str) -> Result<Self> {
        let r = Record::parse(text)?;
        r.deny_unknown(&["L_ref", "H", "t_ref", "t_tri", "alpha_deg", "L_EE", "b"])?;
        let mut b = FeasibilityBounds::default();
        for (key, slot) in [
            ("L_ref", &mut b.l_ref),
            ("H", &mut b.h),
            ("t_ref", &mut b.t_ref),
            ("t_tri", &mut b.t_tri),
            ("alpha_deg", &mut b.alpha),
        ] {
            if let Some(iv) = r.interval(key)? {
                *slot = iv;
            }
        }
        b.template.l_ee = r.f64_or("L_EE", b.template.l_ee)?;
        b.template.section_height_b = r.f64_or("b", b.template.section_height_b)?;
        b.validate()?;
        Ok(b)
    }

    pub fn contains(&self, c: &JointConfig) -> bool {
        let inside = |v: f64, (lo, hi): (f64, f64)| v >= lo && v <= hi;
        inside(c.l_ref, self.l_ref)
            && inside(c.h, self.h)
            && inside(c.t_ref, self.t_ref)
            && inside(c.t_triangle, self.t_tri)
            && inside(c.alpha, self.alpha)
    }
}

/// `n` configurations drawn uniformly per parameter, or by Latin hypercube
/// when `stratified` is set.
pub fn sample_configs(
    bounds: &FeasibilityBounds,
    n: usize,
    seed: u64,
    stratified: bool,
) -> Result<Vec<JointConfig>> {
    bounds.validate()?;
    if n == 0 {
        return Err(Error::Config("sample count must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let iv = bounds.intervals();
    let mut unit = vec![[0.0f64; 5]; n];
    if stratified {
        for p in 0..5 {
            let mut strata: Vec<usize> = (0..n).collect();
            strata.shuffle(&mut rng);
            for (i, s) in strata.into_iter().enumerate() {
                unit[i][p] = (s as f64 + rng.gen::<f64>()) / n as f64;
            }
        }
    } else {
        for row in unit.iter_mut() {
            for v in row.iter_mut() {
                *v = rng.gen::<f64>();
            }
        }
    }
    Ok(unit
        .into_iter()
        .map(|u| {
            let pick = |k: usize| {
                let (lo, hi) = iv[k].1;
                (lo + (hi - lo) * u[k]).clamp(lo, hi)
            };
            let mut c = bounds.template;
            c.l_ref = pick(0);
            c.h = pick(1);
            c.t_ref = pick(2);
            c.t_triangle = pick(3);
            c.alpha = pick(4);
            c
        })
        .collect())
}

/// IsoErr and ParErr from the three 120-degree-spaced load cases.
pub fn evaluate_config(config: &JointConfig, f: f64) -> Result<(f64, ParErr)> {
    let model = build_joint(config)?;
    three_direction_metrics(&FrameAnalysis::new(&model)?, f)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub index: usize,
    pub config: JointConfig,
    pub iso_err: Option<f64>,
    pub par_err: Option<f64>,
    pub par_err_capped: bool,
    /// Reason for a failed evaluation.
    pub failure: Option<String>,
}

impl Evaluation {
    pub fn failed(&self) -> bool {
        self.failure.is_some()
    }

    fn objectives(&self) -> Option<(f64, f64)> {
        match (self.iso_err, self.par_err, &self.failure) {
            (Some(i), Some(p), None) => Some((i, p)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityStudy {
    pub seed: u64,
    pub n_samples: usize,
    pub bounds: FeasibilityBounds,
    pub evaluations: Vec<Evaluation>,
}

pub fn run_study(
    bounds: &FeasibilityBounds,
    n: usize,
    seed: u64,
    f: f64,
    stratified: bool,
) -> Result<FeasibilityStudy> {
    let configs = sample_configs(bounds, n, seed, stratified)?;
    let evaluations = configs
        .into_par_iter()
        .enumerate()
        .map(|(index, config)| match evaluate_config(&config, f) {
            Ok((iso, pe)) => Evaluation {
                index,
                config,
                iso_err: Some(iso),
                par_err: Some(pe.value),
                par_err_capped: pe.drift_free,
                failure: None,
            },
            Err(e) => Evaluation {
                index,
                config,
                iso_err: None,
                par_err: None,
                par_err_capped: false,
                failure: Some(e.to_string()),
            },
        })
        .collect();
    Ok(FeasibilityStudy {
        seed,
        n_samples: n,
        bounds: *bounds,
        evaluations,
    })
}

/// Indices of points not dominated under (minimize first, maximize second),
/// ordered by the first objective, then by index.
pub fn pareto_indices(points: &[(f64, f64)]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        points[a]
            .0
            .total_cmp(&points[b].0)
            .then(points[b].1.total_cmp(&points[a].1))
            .then(a.cmp(&b))
    });
    let mut front = Vec::new();
    let mut best_lower = f64::NEG_INFINITY;
    let mut i = 0;
    while i < order.len() {
        let iso = points[order[i]].0;
        let mut j = i;
        while j < order.len() && points[order[j]].0.total_cmp(&iso) == Ordering::Equal {
            j += 1;
        }
        // sorted by descending second objective inside the group
        let group_max = points[order[i]].1;
        for &k in &order[i..j] {
            let p = points[k].1;
            if p == group_max && !(best_lower >= p) {
                front.push(k);
            }
        }
        best_lower = best_lower.max(group_max);
        i = j;
    }
    front.sort_by(|&a, &b| points[a].0.total_cmp(&points[b].0).then(a.cmp(&b)));
    front
}

/// Non-dominated successful evaluations, by ascending IsoErr.
pub fn pareto_filter(evaluations: &[Evaluation]) -> Result<Vec<Evaluation>> {
    let ok: Vec<(&Evaluation, (f64, f64))> = evaluations
        .iter()
        .filter_map(|e| e.objectives().map(|o| (e, o)))
        .collect();
    if ok.is_empty() {
        return Err(Error::EmptyStudy("no successful evaluation".into()));
    }
    let pts: Vec<(f64, f64)> = ok.iter().map(|(_, o)| *o).collect();
    Ok(pareto_indices(&pts)
        .into_iter()
        .map(|k| ok[k].0.clone())
        .collect())
}

impl FeasibilityStudy {
    pub fn front(&self) -> Result<Vec<Evaluation>> {
        pareto_filter(&self.evaluations)
    }

    /// `index,L_ref,H,t_ref,t_tri,alpha_deg,iso_err,par_err,failed,on_front`.
    pub fn to_csv(&self) -> String {
        let front: std::collections::BTreeSet<usize> = self
            .front()
            .map(|f| f.iter().map(|e| e.index).collect())
            .unwrap_or_default();
        let mut s =
            String::from("index,L_ref,H,t_ref,t_tri,alpha_deg,iso_err,par_err,failed,on_front\n");
        for e in &self.evaluations {
            let c = &e.config;
            let metric = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
            writeln!(
                s,
                "{},{:.4},{:.4},{:.4},{:.4},{:.4},{},{},{},{}",
                e.index,
                c.l_ref,
                c.h,
                c.t_ref,
                c.t_triangle,
                c.alpha,
                metric(e.iso_err),
                metric(e.par_err),
                e.failed(),
                front.contains(&e.index)
            )
            .unwrap();
        }
        s
    }
}

/// Anything ranked by the J index.
pub trait JScore {
    fn par(&self) -> f64;
    fn prr(&self) -> f64;
    fn j(&self) -> f64 {
        j_index(self.par(), self.prr())
    }
}

impl JScore for DesignMetrics {
    fn par(&self) -> f64 {
        self.par
    }
    fn prr(&self) -> f64 {
        self.prr
    }
}

#[derive(Debug, Clone)]
pub struct Selection<C, M> {
    pub index: usize,
    pub winner: C,
    pub metrics: M,
    /// Every candidate's outcome, in input order.
    pub all: Vec<std::result::Result<M, Error>>,
}

/// Scores every candidate and returns the one with the smallest `|J|`;
/// ties go to the lower PAR, then to the earlier candidate.
pub fn select_best<C, M, F>(candidates: &[C], score: F) -> Result<Selection<C, M>>
where
    C: Clone + Sync,
    M: JScore + Clone + Send,
    F: Fn(&C) -> Result<M> + Sync,
{
    if candidates.is_empty() {
        return Err(Error::EmptyStudy("no candidates to select from".into()));
    }
    let all: Vec<Result<M>> = candidates.par_iter().map(&score).collect();
    let mut best: Option<(usize, f64, f64)> = None;
    for (i, r) in all.iter().enumerate() {
        if let Ok(m) = r {
            let (j, p) = (m.j().abs(), m.par());
            if !j.is_finite() {
                continue;
            }
            let better = match best {
                None => true,
                Some((_, bj, bp)) => j < bj || (j == bj && p < bp),
            };
            if better {
                best = Some((i, j, p));
            }
        }
    }
    let (index, _, _) = best.ok_or_else(|| Error::EmptyStudy("every candidate failed".into()))?;
    let metrics = all[index].clone().expect("selected candidate succeeded");
    Ok(Selection {
        index,
        winner: candidates[index].clone(),
        metrics,
        all,
    })
}
