//! Subcommand implementations behind the `rcmjoint` binary.
//!
//! Every command writes its machine-readable artifacts plus a
//! `manifest.json` into `--out-dir` and returns a short human summary.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rcm_core::characterize::{
    argmax_angle, design_metrics, sweep_at, three_direction_metrics, DesignMetrics, MetricOptions,
};
use rcm_core::fatigue::{workspace_sweep, FatigueParams, CLINICAL_WORKSPACE_DEG};
use rcm_core::feasibility::{run_study, select_best, FeasibilityBounds};
use rcm_core::fem::FrameAnalysis;
use rcm_core::joint::{build_joint, sweep_angles, JointConfig};
use rcm_core::kv::Record;
use rcm_core::svg::{polar_plot, PolarSeries, Style};
use rcm_core::synth::{minimize_idx, Bounds, SynthesisOptions};
use rcm_core::validate::{compare, parse_simulated, MeasurementSet, NOMINAL_FORCE};
use rcm_core::PanelSet;
use serde::Serialize;

/// Fewest sweep directions for which an ellipse is fitted.
const MIN_FIT_POINTS: usize = 5;

#[derive(Debug, Parser)]
#[command(
    name = "rcmjoint",
    version,
    about = "Compliant RCM joint design and analysis"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Directory receiving all output files.
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Worker threads for parallel sweeps (default: all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Minimize the anisotropy index of a three-panel set.
    Synth {
        panelset: PathBuf,
        #[arg(long, default_value_t = 2000)]
        max_iters: usize,
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
        /// File with `length`, `thickness`, `angle` intervals.
        #[arg(long)]
        bounds: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Directional stiffness sweep and ellipse metrics of one joint.
    Sweep {
        config: PathBuf,
        #[arg(long, default_value_t = 10.0)]
        step: f64,
        #[arg(long, default_value_t = 1.0)]
        force: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Random screening of the design box and its Pareto front.
    Feasibility {
        #[arg(long)]
        bounds: Option<PathBuf>,
        #[arg(long, default_value_t = 500)]
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        force: f64,
        /// Latin-hypercube sampling instead of independent uniform draws.
        #[arg(long)]
        lhs: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Rank joints by the J index. Inputs are joint configuration files or
    /// study CSVs (front rows are used).
    Select {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Fixed parameters for rows read from study CSVs.
        #[arg(long)]
        bounds: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Fatigue- and yield-bounded angular workspace.
    Fatigue {
        config: PathBuf,
        #[arg(long, default_value_t = 10.0)]
        step: f64,
        #[arg(long, default_value_t = 1e6)]
        life: f64,
        #[arg(long, default_value_t = 1.0)]
        sf: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Compare bench measurements with simulated stiffness.
    Validate {
        measurements: PathBuf,
        simulated: PathBuf,
        #[arg(long, default_value_t = NOMINAL_FORCE)]
        force: f64,
        #[command(flatten)]
        common: Common,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Synth { .. } => "synth",
            Command::Sweep { .. } => "sweep",
            Command::Feasibility { .. } => "feasibility",
            Command::Select { .. } => "select",
            Command::Fatigue { .. } => "fatigue",
            Command::Validate { .. } => "validate",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Synth { common, .. }
            | Command::Sweep { common, .. }
            | Command::Feasibility { common, .. }
            | Command::Select { common, .. }
            | Command::Fatigue { common, .. }
            | Command::Validate { common, .. } => common,
        }
    }

    fn config_paths(&self) -> Vec<PathBuf> {
        match self {
            Command::Synth {
                panelset, bounds, ..
            } => std::iter::once(panelset.clone())
                .chain(bounds.clone())
                .collect(),
            Command::Sweep { config, .. } | Command::Fatigue { config, .. } => vec![config.clone()],
            Command::Feasibility { bounds, .. } => bounds.iter().cloned().collect(),
            Command::Select { inputs, bounds, .. } => {
                inputs.iter().cloned().chain(bounds.clone()).collect()
            }
            Command::Validate {
                measurements,
                simulated,
                ..
            } => {
                vec![measurements.clone(), simulated.clone()]
            }
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Domain(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 1,
            CliError::Domain(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

impl From<rcm_core::Error> for CliError {
    fn from(e: rcm_core::Error) -> Self {
        use rcm_core::Error as E;
        let msg = e.to_string();
        match e {
            E::Parse { .. } | E::Config(_) | E::Construction(_) | E::Model(_) | E::Mechanism(_) => {
                CliError::Input(msg)
            }
            E::Domain(_)
            | E::Singular { .. }
            | E::NotEllipse { .. }
            | E::Fit(_)
            | E::EmptyStudy(_)
            | E::Numerical(_) => CliError::Domain(msg),
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// Prefixes a core error with the file it came from, keeping its class.
fn in_file(path: &Path) -> impl Fn(rcm_core::Error) -> CliError + '_ {
    move |e| match CliError::from(e) {
        CliError::Input(m) => CliError::Input(format!("{}: {m}", path.display())),
        CliError::Domain(m) => CliError::Domain(format!("{}: {m}", path.display())),
        CliError::Internal(m) => CliError::Internal(m),
    }
}

/// Collects output files for one run.
struct Outputs {
    dir: PathBuf,
    written: Vec<String>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::Internal(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let p = self.dir.join(name);
        fs::write(&p, contents)
            .map_err(|e| CliError::Internal(format!("cannot write {}: {e}", p.display())))?;
        self.written.push(name.to_string());
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut s = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::Internal(format!("serialization failed: {e}")))?;
        s.push('\n');
        self.write(name, &s)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config_paths: Vec<PathBuf>,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub tool_version: String,
    pub timestamp: String,
    pub outputs: Vec<String>,
    pub exit_code: i32,
}

/// Result of a successful invocation: process exit code and stdout summary.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub code: i32,
    pub summary: String,
}

pub fn run(cli: Cli) -> Result<Outcome, CliError> {
    let cmd = &cli.command;
    let common = cmd.common().clone();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = common.jobs {
        if j == 0 {
            return Err(CliError::Input("--jobs must be at least 1".into()));
        }
        pool = pool.num_threads(j);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::Internal(format!("thread pool: {e}")))?;
    let mut out = Outputs::new(&common.out_dir)?;
    let outcome = pool.install(|| dispatch(cmd, &mut out))?;
    let manifest = RunManifest {
        subcommand: cmd.name().into(),
        config_paths: cmd.config_paths(),
        seed: common.seed,
        output_dir: common.out_dir.clone(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        outputs: out.written.clone(),
        exit_code: outcome.code,
    };
    out.json("manifest.json", &manifest)?;
    Ok(outcome)
}

fn dispatch(cmd: &Command, out: &mut Outputs) -> Result<Outcome, CliError> {
    match cmd {
        Command::Synth {
            panelset,
            max_iters,
            tol,
            bounds,
            ..
        } => cmd_synth(panelset, *max_iters, *tol, bounds.as_deref(), out),
        Command::Sweep {
            config,
            step,
            force,
            ..
        } => cmd_sweep(config, *step, *force, out),
        Command::Feasibility {
            bounds,
            n,
            force,
            lhs,
            common,
        } => cmd_feasibility(bounds.as_deref(), *n, common.seed, *force, *lhs, out),
        Command::Select { inputs, bounds, .. } => cmd_select(inputs, bounds.as_deref(), out),
        Command::Fatigue {
            config,
            step,
            life,
            sf,
            ..
        } => {
            let params = FatigueParams {
                design_life_cycles: *life,
                sf_threshold: *sf,
                ..FatigueParams::default()
            };
            cmd_fatigue(config, *step, &params, out)
        }
        Command::Validate {
            measurements,
            simulated,
            force,
            ..
        } => cmd_validate(measurements, simulated, *force, out),
    }
}

fn synth_bounds(path: &Path) -> Result<Bounds, CliError> {
    let r = Record::parse(&read(path)?).map_err(in_file(path))?;
    r.deny_unknown(&["length", "thickness", "angle"])
        .map_err(in_file(path))?;
    let d = Bounds::default();
    let get = |k: &str, lo: f64, hi: f64| -> Result<(f64, f64), CliError> {
        Ok(r.interval(k).map_err(in_file(path))?.unwrap_or((lo, hi)))
    };
    let b = Bounds::new(
        get("length", d.lo[0], d.hi[0])?,
        get("thickness", d.lo[3], d.hi[3])?,
        get("angle", d.lo[6], d.hi[6])?,
    );
    b.validate().map_err(in_file(path))?;
    Ok(b)
}

fn cmd_synth(
    panelset: &Path,
    max_iters: usize,
    tol: f64,
    bounds: Option<&Path>,
    out: &mut Outputs,
) -> Result<Outcome, CliError> {
    let set = PanelSet::from_record_text(&read(panelset)?).map_err(in_file(panelset))?;
    let options = SynthesisOptions {
        max_iters,
        idx_tol: tol,
        bounds: match bounds {
            Some(p) => synth_bounds(p)?,
            None => Bounds::default(),
        },
        ..SynthesisOptions::default()
    };
    let res = minimize_idx(&set, &options)?;
    let report = res.report_text();
    out.write("synth_report.txt", &report)?;
    out.write("synth_ratios.csv", &res.ratios.to_csv())?;
    out.write("synth_optimized.txt", &res.optimized.to_record_text())?;
    let mut hist = String::from("step,idx\n");
    for (i, v) in res.history.iter().enumerate() {
        writeln!(hist, "{i},{v:.9e}").unwrap();
    }
    out.write("synth_history.csv", &hist)?;
    out.json("synth_result.json", &res)?;
    Ok(Outcome {
        code: if res.converged { 0 } else { 2 },
        summary: report,
    })
}

fn step_angles(step: f64) -> Result<Vec<f64>, CliError> {
    sweep_angles(step).map_err(|e| CliError::Input(format!("--step: {e}")))
}

fn load_config(path: &Path) -> Result<JointConfig, CliError> {
    JointConfig::from_text(&read(path)?).map_err(in_file(path))
}

fn analysis_for(config: &JointConfig) -> Result<FrameAnalysis, CliError> {
    let model = build_joint(config)?;
    Ok(FrameAnalysis::new(&model)?)
}

fn stiffness_svg(metrics: &DesignMetrics, sweep: &rcm_core::DirectionalSweep) -> String {
    let sim: Vec<(f64, f64)> = sweep
        .samples
        .iter()
        .map(|s| (s.theta_f, s.stiffness))
        .collect();
    let curve: Vec<(f64, f64)> = (0..=180)
        .map(|i| {
            let p = metrics.ellipse.point_at(i as f64 * 2.0);
            (p[1].atan2(p[0]).to_degrees(), p[0].hypot(p[1]))
        })
        .collect();
    polar_plot(
        &format!("Directional stiffness, PAR = {:.3}", metrics.par),
        "N/m",
        &[
            PolarSeries::new("simulation", "#d62728", Style::Markers, sim),
            PolarSeries::new("fitted ellipse", "#1f77b4", Style::Closed, curve),
        ],
    )
}

fn drift_svg(metrics: &DesignMetrics, command_deg: f64) -> String {
    let pts = metrics
        .rcm_drift_at_4p5deg
        .iter()
        .map(|d| (d.theta_f, d.drift))
        .collect();
    polar_plot(
        &format!("RCM drift at {command_deg}° command"),
        "mm",
        &[PolarSeries::new("RCM drift", "#2ca02c", Style::Closed, pts)],
    )
}

fn cmd_sweep(config: &Path, step: f64, force: f64, out: &mut Outputs) -> Result<Outcome, CliError> {
    let angles = step_angles(step)?;
    let cfg = load_config(config)?;
    let analysis = analysis_for(&cfg)?;
    let sweep = sweep_at(&analysis, force, &angles)?;
    out.write("sweep.csv", &sweep.to_csv())?;
    let (iso, pe) = three_direction_metrics(&analysis, force)?;
    if angles.len() < MIN_FIT_POINTS {
        let mut s = String::new();
        writeln!(s, "IsoErr          {iso:.4}").unwrap();
        writeln!(
            s,
            "ParErr          {:.2}{}",
            pe.value,
            if pe.drift_free {
                " (drift-free cap)"
            } else {
                ""
            }
        )
        .unwrap();
        writeln!(
            s,
            "ellipse         not fitted ({} directions)",
            angles.len()
        )
        .unwrap();
        out.write("sweep_report.txt", &s)?;
        out.json("metrics.json", &serde_json::json!({ "iso_err": iso, "par_err": pe.value, "par_err_capped": pe.drift_free }))?;
        return Ok(Outcome {
            code: 0,
            summary: s,
        });
    }
    let options = MetricOptions {
        force,
        step,
        ..MetricOptions::default()
    };
    let model = build_joint(&cfg)?;
    let (metrics, sweep) = design_metrics(&model, cfg.l_ee, &options)?;
    let mut report = metrics.report_text();
    let k_max = argmax_angle(sweep.samples.iter().map(|s| (s.theta_f, s.stiffness)));
    let d_max = argmax_angle(
        metrics
            .rcm_drift_at_4p5deg
            .iter()
            .map(|d| (d.theta_f, d.drift)),
    );
    if let (Some(k), Some(d)) = (k_max, d_max) {
        writeln!(report, "max stiffness   {k:.0} deg").unwrap();
        writeln!(report, "max drift       {d:.0} deg").unwrap();
    }
    out.write("sweep_report.txt", &report)?;
    out.json("metrics.json", &metrics)?;
    out.write("stiffness_polar.svg", &stiffness_svg(&metrics, &sweep))?;
    out.write("drift_polar.svg", &drift_svg(&metrics, options.command_deg))?;
    Ok(Outcome {
        code: 0,
        summary: report,
    })
}

fn cmd_feasibility(
    bounds: Option<&Path>,
    n: usize,
    seed: u64,
    force: f64,
    lhs: bool,
    out: &mut Outputs,
) -> Result<Outcome, CliError> {
    let b = match bounds {
        Some(p) => FeasibilityBounds::from_text(&read(p)?).map_err(in_file(p))?,
        None => FeasibilityBounds::default(),
    };
    let study = run_study(&b, n, seed, force, lhs)?;
    let csv = study.to_csv();
    out.write("study.csv", &csv)?;
    let failed = study.evaluations.iter().filter(|e| e.failed()).count();
    let front = study.front()?;
    let mut front_csv = String::new();
    for (i, line) in csv.lines().enumerate() {
        if i == 0 || line.ends_with(",true") {
            writeln!(front_csv, "{line}").unwrap();
        }
    }
    out.write("front.csv", &front_csv)?;
    let mut s = String::new();
    writeln!(
        s,
        "samples         {n} (seed {seed}{})",
        if lhs { ", latin hypercube" } else { "" }
    )
    .unwrap();
    writeln!(s, "failed          {failed}").unwrap();
    writeln!(s, "pareto front    {}", front.len()).unwrap();
    for e in &front {
        writeln!(
            s,
            "  #{:<4} IsoErr {:.4}  ParErr {:.2}",
            e.index,
            e.iso_err.unwrap_or(f64::NAN),
            e.par_err.unwrap_or(f64::NAN)
        )
        .unwrap();
    }
    Ok(Outcome {
        code: 0,
        summary: s,
    })
}

/// Front rows of a study CSV as configurations on top of `template`.
fn study_front(
    path: &Path,
    template: &JointConfig,
) -> Result<Vec<(String, JointConfig)>, CliError> {
    let text = read(path)?;
    let mut lines = text.lines().enumerate();
    let header: Vec<&str> = lines
        .next()
        .map(|(_, h)| h.split(',').collect())
        .ok_or_else(|| CliError::Input(format!("{}: empty study file", path.display())))?;
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| CliError::Input(format!("{}: missing column {name}", path.display())))
    };
    let idx = [
        col("index")?,
        col("L_ref")?,
        col("H")?,
        col("t_ref")?,
        col("t_tri")?,
        col("alpha_deg")?,
        col("on_front")?,
    ];
    let mut out = Vec::new();
    for (i, line) in lines {
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != header.len() {
            return Err(CliError::Input(format!(
                "{}: line {}: wrong field count",
                path.display(),
                i + 1
            )));
        }
        if f[idx[6]] != "true" {
            continue;
        }
        let num = |k: usize| -> Result<f64, CliError> {
            f[idx[k]].parse().map_err(|_| {
                CliError::Input(format!("{}: line {}: bad number", path.display(), i + 1))
            })
        };
        let mut c = *template;
        c.l_ref = num(1)?;
        c.h = num(2)?;
        c.t_ref = num(3)?;
        c.t_triangle = num(4)?;
        c.alpha = num(5)?;
        out.push((format!("{}#{}", path.display(), f[idx[0]]), c));
    }
    Ok(out)
}

fn cmd_select(
    inputs: &[PathBuf],
    bounds: Option<&Path>,
    out: &mut Outputs,
) -> Result<Outcome, CliError> {
    let template = match bounds {
        Some(p) => {
            FeasibilityBounds::from_text(&read(p)?)
                .map_err(in_file(p))?
                .template
        }
        None => FeasibilityBounds::default().template,
    };
    let mut candidates = Vec::new();
    for p in inputs {
        if p.extension().is_some_and(|e| e == "csv") {
            candidates.extend(study_front(p, &template)?);
        } else {
            candidates.push((p.display().to_string(), load_config(p)?));
        }
    }
    let options = MetricOptions::default();
    let sel = select_best(&candidates, |(_, c)| {
        design_metrics(&build_joint(c)?, c.l_ee, &options).map(|(m, _)| m)
    })?;
    let mut csv = String::from("candidate,PAR,PRR,J,status\n");
    for ((label, _), r) in candidates.iter().zip(&sel.all) {
        match r {
            Ok(m) => writeln!(
                csv,
                "{label},{:.6},{:.6e},{:.6e},ok",
                m.par, m.prr, m.j_index
            )
            .unwrap(),
            Err(e) => writeln!(csv, "{label},,,,\"{e}\"").unwrap(),
        }
    }
    out.write("candidates.csv", &csv)?;
    out.write("best.cfg", &sel.winner.1.to_text())?;
    out.json(
        "selection.json",
        &serde_json::json!({ "winner": sel.winner.0, "config": sel.winner.1, "metrics": sel.metrics }),
    )?;
    let mut s = String::new();
    writeln!(s, "candidates      {}", candidates.len()).unwrap();
    writeln!(s, "selected        {}", sel.winner.0).unwrap();
    writeln!(s, "PAR             {:.4}", sel.metrics.par).unwrap();
    writeln!(s, "PRR             {:.4e}", sel.metrics.prr).unwrap();
    writeln!(s, "J               {:.4e}", sel.metrics.j_index).unwrap();
    Ok(Outcome {
        code: 0,
        summary: s,
    })
}

fn cmd_fatigue(
    config: &Path,
    step: f64,
    params: &FatigueParams,
    out: &mut Outputs,
) -> Result<Outcome, CliError> {
    params.validate()?;
    step_angles(step)?;
    let cfg = load_config(config)?;
    let analysis = analysis_for(&cfg)?;
    let ws = workspace_sweep(&analysis, cfg.l_ee, params, step)?;
    out.write("workspace.csv", &ws.to_csv())?;
    out.json("workspace.json", &ws)?;
    let closed = |f: &dyn Fn(&rcm_core::fatigue::WorkspaceSample) -> f64| {
        ws.samples
            .iter()
            .map(|w| (w.theta_f, f(w)))
            .collect::<Vec<_>>()
    };
    let svg = polar_plot(
        "Angular workspace",
        "deg",
        &[
            PolarSeries::new(
                "fatigue limit",
                "#1f77b4",
                Style::Closed,
                closed(&|w| w.beta_ws),
            ),
            PolarSeries::new(
                "yield limit",
                "#7f7f7f",
                Style::Closed,
                closed(&|w| w.beta_yield),
            ),
            PolarSeries::circle("15° requirement", "#d62728", CLINICAL_WORKSPACE_DEG),
        ],
    );
    out.write("workspace_polar.svg", &svg)?;
    let lo = ws
        .samples
        .iter()
        .min_by(|a, b| a.beta_ws.total_cmp(&b.beta_ws))
        .expect("sweep has directions");
    let hi = ws
        .samples
        .iter()
        .max_by(|a, b| a.beta_ws.total_cmp(&b.beta_ws))
        .expect("sweep has directions");
    let mut s = String::new();
    writeln!(s, "allowable stress {:.2} MPa", params.allowable_stress()?).unwrap();
    writeln!(
        s,
        "min beta_ws      {:.2} deg at {:.0} deg",
        lo.beta_ws, lo.theta_f
    )
    .unwrap();
    writeln!(
        s,
        "max beta_ws      {:.2} deg at {:.0} deg",
        hi.beta_ws, hi.theta_f
    )
    .unwrap();
    writeln!(s, "meets +/-15 deg  {}", ws.meets_clinical).unwrap();
    Ok(Outcome {
        code: 0,
        summary: s,
    })
}

fn cmd_validate(
    measurements: &Path,
    simulated: &Path,
    force: f64,
    out: &mut Outputs,
) -> Result<Outcome, CliError> {
    let set =
        MeasurementSet::from_csv(&read(measurements)?, force).map_err(in_file(measurements))?;
    let sim = parse_simulated(&read(simulated)?).map_err(in_file(simulated))?;
    let report = compare(&set, &sim)?;
    let text = report.to_text();
    out.write("validation.txt", &text)?;
    out.write("validation.csv", &report.to_csv())?;
    out.json("validation.json", &report)?;
    Ok(Outcome {
        code: 0,
        summary: text,
    })
}
