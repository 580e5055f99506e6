//! Drivers behind the `verify`, `simulate`, `hierarchy` and `reconstruct` verbs.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use hpn::biham_ops::{Hierarchy, Pair, StatePair};
use hpn::curve_geometry::{
    curve_speed, geometric_invariants, mkdv_stencil, reconstruct_curve, sg_stencil, transport_frame, verify_mkdv_map,
    verify_wave_map, CurveSample, VerifyOptions,
};
use hpn::grid_calculus::PeriodicGrid;
use hpn::quat_core::QMatrix;
use hpn::soliton_flows::{conserved_report, simulate as run_flow, Branch};
use serde::Serialize;

use crate::checks::{self, Scope, VerifyReport};
use crate::config::{Format, FlowKindConfig, GridMode, InitialConfig, RunConfig};
use crate::error::CliError;
use crate::json;

/// Bound reported with the wave-map residual.
pub const WAVE_MAP_TOL: f64 = 1e-5;

/// Bound reported with the mKdV-map residual.
pub const MKDV_MAP_TOL: f64 = 1e-4;

/// Time step of the five-point stencils used by the curve-level checks.
const MKDV_STENCIL_DT: f64 = 2e-4;
const SG_STENCIL_DT: f64 = 1e-3;

/// Settings shared by the run verbs.
#[derive(Debug, Clone, Default)]
pub struct RunArgs {
    pub config: PathBuf,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

/// Loads the configuration and folds the command-line overrides into it, so
/// the echoed configuration reproduces the run on its own.
pub fn effective_config(args: &RunArgs) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::load(&args.config)?;
    apply_overrides(&mut cfg, args.seed, args.out.clone());
    cfg.validate()?;
    Ok(cfg)
}

pub fn apply_overrides(cfg: &mut RunConfig, seed: Option<u64>, out: Option<PathBuf>) {
    if let Some(s) = seed {
        match &mut cfg.initial {
            InitialConfig::BandLimited { seed, .. } | InitialConfig::Localized { seed, .. } => *seed = s,
            _ => {}
        }
    }
    if out.is_some() {
        cfg.output.directory = out;
    }
}

fn output_dir(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let dir = cfg
        .output
        .directory
        .clone()
        .ok_or_else(|| CliError::Config("no output directory: pass --out or set output.directory".into()))?;
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    Ok(dir)
}

/// Writes a header and rows of numbers in `{:.17e}`.
fn write_table<I>(path: &Path, header: &[String], rows: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = Vec<f64>>,
{
    let file = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| CliError::io(path, e);
    writeln!(w, "{}", header.join(",")).map_err(io)?;
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
        writeln!(w, "{}", cells.join(",")).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Column names of a pair: three imaginary parts of the scalar, then four
/// components per vector entry.
fn pair_header(prefix: &str, n: usize) -> Vec<String> {
    let mut h: Vec<String> = ["i", "j", "k"].iter().map(|c| format!("{prefix}u_{c}")).collect();
    for l in 1..n {
        h.extend(["re", "i", "j", "k"].iter().map(|c| format!("{prefix}v{l}_{c}")));
    }
    h
}

fn pair_row(p: &Pair, i: usize) -> Vec<f64> {
    let s = p.s.samples[i];
    let mut row = vec![s.i, s.j, s.k];
    for q in &p.v.samples[i].entries {
        row.extend(q.to_array());
    }
    row
}

fn with_x(header: Vec<String>) -> Vec<String> {
    std::iter::once("x".to_string()).chain(header).collect()
}

fn write_pair(path: &Path, p: &Pair) -> Result<(), CliError> {
    let grid = p.grid();
    let header = with_x(pair_header("", p.n()));
    write_table(path, &header, (0..grid.num_points).map(|i| {
        let mut row = vec![grid.x(i)];
        row.extend(pair_row(p, i));
        row
    }))
}

/// Runs the verification suites; the report goes to stdout and, with an
/// output directory, to `verify_report.json`.
pub fn verify(scope: &str, seed: u64, out: Option<&Path>) -> Result<VerifyReport, CliError> {
    let scope: Scope = scope.parse()?;
    let report = checks::run(scope, seed);
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        json::write(&dir.join("verify_report.json"), &report)?;
    }
    Ok(report)
}

#[derive(Debug, Serialize)]
struct RunRecord<'a> {
    verb: &'static str,
    config: &'a RunConfig,
    dt: f64,
    steps: usize,
    snapshots: usize,
}

#[derive(Debug, Serialize)]
struct ConservationJson<'a> {
    times: &'a [f64],
    h0: &'a [f64],
    h1: &'a [f64],
    sg_constraint: &'a [f64],
    max_drift_h0: f64,
    max_drift_h1: f64,
}

#[derive(Debug, Serialize)]
struct MkdvMapJson {
    time: f64,
    tolerance: f64,
    mkdv_map: f64,
    opposite_tangential_sign: f64,
    split_form: f64,
    tangential: f64,
    frame_velocity: f64,
    passed: bool,
}

#[derive(Debug, Serialize)]
struct WaveMapJson {
    time: f64,
    branch: &'static str,
    tolerance: f64,
    wave_map: f64,
    speed: f64,
    speed_spread: f64,
    frame_velocity: f64,
    passed: bool,
}

/// Summary of a `simulate` run.
#[derive(Debug, Clone, Serialize)]
pub struct SimulateSummary {
    pub snapshots: usize,
    pub max_drift_h0: f64,
    pub max_drift_h1: f64,
    pub wave_map: Option<f64>,
    pub mkdv_map: Option<f64>,
}

fn verify_options(grid: PeriodicGrid, refine: usize) -> VerifyOptions {
    VerifyOptions { margin: grid.num_points * refine / 8, ..VerifyOptions::default() }
}

fn branch_name(b: Branch) -> &'static str {
    match b {
        Branch::Plus => "plus",
        Branch::Minus => "minus",
    }
}

/// Integrates the configured flow and writes snapshots, the conservation
/// report and, on request, the reconstructed curve of the final state.
pub fn simulate(cfg: &RunConfig) -> Result<SimulateSummary, CliError> {
    let dir = output_dir(cfg)?;
    let ctx = cfg.context()?;
    let sim = cfg.sim_config()?;
    let p0 = cfg.initial_state(None)?;
    let traj = run_flow(&ctx, &sim, &p0.into())?;
    let rep = conserved_report(&ctx, &traj);

    if cfg.has(Format::Csv) {
        let mut index = Vec::new();
        for (k, (t, p)) in traj.times.iter().zip(&traj.states).enumerate() {
            write_pair(&dir.join(format!("snapshot_{k:05}.csv")), p)?;
            index.push(vec![k as f64, *t, rep.h0[k], rep.h1[k]]);
        }
        let header = ["index", "t", "H0", "H1"].map(String::from);
        write_table(&dir.join("snapshots.csv"), &header, index)?;
        let mut header = vec!["t".to_string(), "H0".to_string(), "H1".to_string()];
        let sg = !rep.sg_constraint.is_empty();
        if sg {
            header.push("sg_constraint".to_string());
        }
        write_table(&dir.join("conservation.csv"), &header, (0..rep.times.len()).map(|k| {
            let mut row = vec![rep.times[k], rep.h0[k], rep.h1[k]];
            if sg {
                row.push(rep.sg_constraint[k]);
            }
            row
        }))?;
    }
    if cfg.has(Format::Json) {
        json::write(
            &dir.join("conservation.json"),
            &ConservationJson {
                times: &rep.times,
                h0: &rep.h0,
                h1: &rep.h1,
                sg_constraint: &rep.sg_constraint,
                max_drift_h0: rep.max_drift_h0,
                max_drift_h1: rep.max_drift_h1,
            },
        )?;
        let steps = if sim.t_end > 0.0 { (sim.t_end / sim.dt).round() as usize } else { 0 };
        json::write(
            &dir.join("run.json"),
            &RunRecord { verb: "simulate", config: cfg, dt: sim.dt, steps, snapshots: traj.states.len() },
        )?;
    }

    let last = traj.states.last().expect("initial snapshot is always stored");
    let t_last = *traj.times.last().expect("initial time is always stored");
    let st: StatePair = last.into();
    let refine = cfg.output.refine;
    let opts = verify_options(sim.grid, refine);
    let mut summary = SimulateSummary {
        snapshots: traj.states.len(),
        max_drift_h0: rep.max_drift_h0,
        max_drift_h1: rep.max_drift_h1,
        wave_map: None,
        mkdv_map: None,
    };
    if cfg.has(Format::Curve) || cfg.has(Format::Chordal) {
        write_curve(cfg, &dir, &st)?;
    }
    if cfg.flow.kind == FlowKindConfig::SineGordon {
        let b: Branch = cfg.flow.sg_branch.into();
        let stencil = sg_stencil(&ctx, &st, SG_STENCIL_DT, refine, b, cfg.flow.sg_substeps)?;
        let r = verify_wave_map(&ctx, &stencil, b, cfg.flow.sg_substeps, &opts)?;
        json::write(
            &dir.join("wave_map.json"),
            &WaveMapJson {
                time: t_last,
                branch: branch_name(b),
                tolerance: WAVE_MAP_TOL,
                wave_map: r.wave_map,
                speed: r.speed,
                speed_spread: r.speed_spread,
                frame_velocity: r.frame_velocity,
                passed: r.wave_map <= WAVE_MAP_TOL,
            },
        )?;
        summary.wave_map = Some(r.wave_map);
    } else if cfg.flow.kind == FlowKindConfig::Mkdv && cfg.has(Format::Curve) && cfg.grid.mode == GridMode::Line {
        let stencil = mkdv_stencil(&ctx, &st, MKDV_STENCIL_DT, refine)?;
        let r = verify_mkdv_map(&ctx, &stencil, &opts)?;
        json::write(
            &dir.join("mkdv_map.json"),
            &MkdvMapJson {
                time: t_last,
                tolerance: MKDV_MAP_TOL,
                mkdv_map: r.mkdv_map,
                opposite_tangential_sign: r.opposite_tangential_sign,
                split_form: r.split_form,
                tangential: r.tangential,
                frame_velocity: r.frame_velocity,
                passed: r.mkdv_map <= MKDV_MAP_TOL,
            },
        )?;
        summary.mkdv_map = Some(r.mkdv_map);
    }
    Ok(summary)
}

/// Summary of a `hierarchy` run.
#[derive(Debug, Clone, Serialize)]
pub struct HierarchySummary {
    pub levels: Vec<usize>,
    pub hamiltonians: Vec<f64>,
}

/// Tabulates the flows `h_(l)`, the densities `H^(l)` and their integrals for
/// `l = 0..=lmax`.
pub fn hierarchy(cfg: &RunConfig, lmax: usize) -> Result<HierarchySummary, CliError> {
    let dir = output_dir(cfg)?;
    let ctx = cfg.context()?;
    let grid = cfg.grid()?;
    let n = cfg.algebra.n;
    let st: StatePair = cfg.initial_state(None)?.into();
    let mut hier = Hierarchy::new(&ctx, &st);
    let mut flows = Vec::with_capacity(lmax + 1);
    let mut densities = Vec::with_capacity(lmax + 1);
    for l in 0..=lmax {
        flows.push(hier.flow(l)?.as_pair());
        densities.push(hier.density(l)?);
    }
    let integrals: Vec<f64> = densities.iter().map(|d| d.integrate()).collect();

    let mut header = vec!["x".to_string()];
    for l in 0..=lmax {
        header.extend(pair_header(&format!("h{l}_"), n));
    }
    write_table(&dir.join("hierarchy.csv"), &header, (0..grid.num_points).map(|i| {
        let mut row = vec![grid.x(i)];
        for f in &flows {
            row.extend(pair_row(f, i));
        }
        row
    }))?;
    let header = with_x((0..=lmax).map(|l| format!("H{l}")).collect());
    write_table(&dir.join("densities.csv"), &header, (0..grid.num_points).map(|i| {
        std::iter::once(grid.x(i)).chain(densities.iter().map(|d| d.samples[i])).collect()
    }))?;
    let header = ["l", "integral"].map(String::from);
    write_table(&dir.join("hamiltonians.csv"), &header, integrals.iter().enumerate().map(|(l, v)| vec![l as f64, *v]))?;
    let summary = HierarchySummary { levels: (0..=lmax).collect(), hamiltonians: integrals };
    json::write(&dir.join("hamiltonians.json"), &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, Serialize)]
pub struct FrameSummary {
    pub n: usize,
    pub refine: usize,
    pub points: usize,
    pub unitarity_defect: f64,
    /// Largest `| |gamma_x| - 1 |` away from the ends.
    pub speed_defect: f64,
}

fn write_curve(cfg: &RunConfig, dir: &Path, st: &StatePair) -> Result<FrameSummary, CliError> {
    let ctx = cfg.context()?;
    let grid = cfg.grid()?;
    let refine = cfg.output.refine;
    let frame = transport_frame(&ctx, st, &QMatrix::identity(st.n() + 1), refine)?;
    let curve = reconstruct_curve(&frame);
    let speed = curve_speed(&curve);
    let margin = verify_options(grid, refine).margin.min(speed.len() / 2);
    let speed_defect = speed.samples[margin..speed.len() - margin]
        .iter()
        .fold(0.0, |m: f64, s| m.max((s - 1.0).abs()));
    let coarse: CurveSample = curve.subsample(refine)?;
    if cfg.has(Format::Curve) {
        let path = dir.join("curve.csv");
        let file = fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
        let mut w = BufWriter::new(file);
        coarse.write_csv(&mut w).and_then(|_| w.flush()).map_err(|e| CliError::io(&path, e))?;
        let inv = geometric_invariants(&ctx, st);
        let header = ["x", "g_NN", "g_NNx", "g_NxNx"].map(String::from);
        write_table(&dir.join("invariants.csv"), &header, (0..grid.num_points).map(|i| {
            vec![grid.x(i), inv.g_nn.samples[i], inv.g_nnx.samples[i], inv.g_nxnx.samples[i]]
        }))?;
    }
    if cfg.has(Format::Chordal) {
        let d = coarse.chordal_distances(1);
        let header: Vec<String> = (0..d.len()).map(|j| format!("p{j}")).collect();
        write_table(&dir.join("chordal.csv"), &header, d)?;
    }
    Ok(FrameSummary {
        n: st.n(),
        refine,
        points: grid.num_points * refine,
        unitarity_defect: frame.unitarity_defect(),
        speed_defect,
    })
}

/// Reconstructs the curve of the initial state: `curve.csv`, `invariants.csv`,
/// `frame.json` and, on request, `chordal.csv`.
pub fn reconstruct(cfg: &RunConfig) -> Result<FrameSummary, CliError> {
    let dir = output_dir(cfg)?;
    let st: StatePair = cfg.initial_state(None)?.into();
    let mut cfg = cfg.clone();
    if !cfg.has(Format::Curve) {
        cfg.output.formats.push(Format::Curve);
    }
    let summary = write_curve(&cfg, &dir, &st)?;
    json::write(&dir.join("frame.json"), &summary)?;
    Ok(summary)
}
