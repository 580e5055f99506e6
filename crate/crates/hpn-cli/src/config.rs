//! The JSON run configuration and the initial-condition presets.

use std::path::{Path, PathBuf};

use hpn::biham_ops::{random_band_limited, random_localized, OpContext, Pair};
use hpn::grid_calculus::{Anchor, MeanPolicy, PeriodicGrid};
use hpn::quat_core::Quaternion;
use hpn::soliton_flows::{mkdv_soliton, sg_kink, Branch, FlowKind, SgMode, SimConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Mean tolerance used by the line setting for nonlocal operators.
pub const LINE_MEAN_TOL: f64 = 1e-8;

/// Default stability constant for explicit mKdV steps, `dt = c dx^3`.
pub const DEFAULT_CFL_C: f64 = 0.05;

/// Default SG time step.
pub const DEFAULT_SG_DT: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub algebra: AlgebraConfig,
    pub grid: GridConfig,
    #[serde(default)]
    pub flow: FlowConfig,
    pub initial: InitialConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgebraConfig {
    /// Rank of `HP^n`.
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(rename = "N")]
    pub num_points: usize,
    #[serde(rename = "L")]
    pub length: f64,
    #[serde(default)]
    pub mode: GridMode,
}

/// `line`: data decays at the ends, antiderivatives anchored at the left and
/// the SG x-system integrated from the left. `periodic`: zero-mean
/// antiderivatives and a periodic SG x-solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridMode {
    #[default]
    Line,
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowKindConfig {
    #[default]
    Mkdv,
    SineGordon,
    Hierarchy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchConfig {
    Plus,
    #[default]
    Minus,
}

impl From<BranchConfig> for Branch {
    fn from(b: BranchConfig) -> Self {
        match b {
            BranchConfig::Plus => Branch::Plus,
            BranchConfig::Minus => Branch::Minus,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowConfig {
    #[serde(default)]
    pub kind: FlowKindConfig,
    /// Hierarchy level for `kind = hierarchy`.
    #[serde(default = "one")]
    pub l: usize,
    /// Time step; defaults to `0.05 dx^3` for mKdV-type flows and `0.01` for SG.
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default)]
    pub sg_branch: BranchConfig,
    #[serde(default = "yes")]
    pub galilean_removed: bool,
    #[serde(default = "default_substeps")]
    pub sg_substeps: usize,
    /// Stability constant `c` in `dt <= c dx^3`.
    #[serde(default = "default_cfl")]
    pub cfl_c: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            kind: FlowKindConfig::default(),
            l: 1,
            dt: None,
            t_end: default_t_end(),
            sg_branch: BranchConfig::default(),
            galilean_removed: true,
            sg_substeps: default_substeps(),
            cfl_c: DEFAULT_CFL_C,
        }
    }
}

/// One Fourier mode of an inline initial condition. `cos` and `sin` list the
/// real coordinates `(u_i, u_j, u_k, v1_re, v1_i, v1_j, v1_k, ...)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mode {
    pub k: usize,
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

/// Initial condition, selected by the `preset` key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialConfig {
    /// Seeded random Fourier modes `1..=kmax` with `k^-2` decay.
    BandLimited {
        #[serde(default)]
        seed: u64,
        #[serde(default = "default_kmax")]
        kmax: usize,
        #[serde(default = "default_amp")]
        amp: f64,
    },
    /// Seeded random data under a Gaussian envelope.
    Localized {
        #[serde(default)]
        seed: u64,
        #[serde(default)]
        center: Option<f64>,
        #[serde(default = "default_width")]
        width: f64,
        #[serde(default = "default_local_amp")]
        amp: f64,
    },
    /// Scalar mKdV soliton `a sech(a(x - x0)) q`.
    MkdvSoliton {
        #[serde(default = "one_f")]
        a: f64,
        #[serde(default)]
        x0: Option<f64>,
        #[serde(default = "default_q")]
        q: [f64; 3],
    },
    /// Scalar SG kink `u = psi_x q / 2`, `psi = 4 arctan exp(a(x - x0))`.
    SgKink {
        #[serde(default = "one_f")]
        a: f64,
        #[serde(default)]
        x0: Option<f64>,
        #[serde(default = "default_q")]
        q: [f64; 3],
    },
    Zero,
    Inline { modes: Vec<Mode> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    /// Snapshot and table CSVs.
    Csv,
    /// Conservation and run reports.
    Json,
    /// Curve reconstruction and the curve-level flow checks.
    Curve,
    /// Chordal distance matrix of the reconstructed curve.
    Chordal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub directory: Option<PathBuf>,
    /// Steps between stored snapshots.
    #[serde(default = "default_cadence")]
    pub cadence: usize,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
    /// Fine steps per grid cell in the frame transport.
    #[serde(default = "default_refine")]
    pub refine: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { directory: None, cadence: default_cadence(), formats: default_formats(), refine: default_refine() }
    }
}

fn one() -> usize {
    1
}
fn one_f() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}
fn default_t_end() -> f64 {
    1.0
}
fn default_substeps() -> usize {
    4
}
fn default_cfl() -> f64 {
    DEFAULT_CFL_C
}
fn default_kmax() -> usize {
    3
}
fn default_amp() -> f64 {
    0.5
}
fn default_width() -> f64 {
    3.0
}
fn default_local_amp() -> f64 {
    0.3
}
fn default_q() -> [f64; 3] {
    [1.0, 0.0, 0.0]
}
fn default_cadence() -> usize {
    100
}
fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json]
}
fn default_refine() -> usize {
    8
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let n = self.algebra.n;
        if n < 1 {
            return Err(bad("algebra.n must be at least 1"));
        }
        self.grid()?;
        let f = &self.flow;
        if !(f.t_end >= 0.0 && f.t_end.is_finite()) {
            return Err(bad("flow.t_end must be nonnegative"));
        }
        if let Some(dt) = f.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(bad("flow.dt must be positive"));
            }
        }
        if f.sg_substeps == 0 {
            return Err(bad("flow.sg_substeps must be positive"));
        }
        if !(f.cfl_c > 0.0 && f.cfl_c.is_finite()) {
            return Err(bad("flow.cfl_c must be positive"));
        }
        let o = &self.output;
        if o.cadence == 0 || o.refine == 0 {
            return Err(bad("output.cadence and output.refine must be positive"));
        }
        let positive = |v: f64, what: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(bad(format!("initial.{what} must be positive")))
            }
        };
        match &self.initial {
            InitialConfig::BandLimited { kmax, amp, .. } => {
                if *kmax == 0 || 2 * kmax >= self.grid.num_points {
                    return Err(bad("initial.kmax must be in 1..N/2"));
                }
                positive(*amp, "amp")?;
            }
            InitialConfig::Localized { width, amp, .. } => {
                positive(*width, "width")?;
                positive(*amp, "amp")?;
            }
            InitialConfig::MkdvSoliton { a, q, .. } | InitialConfig::SgKink { a, q, .. } => {
                positive(*a, "a")?;
                if q.iter().all(|c| *c == 0.0) {
                    return Err(bad("initial.q must be a nonzero imaginary direction"));
                }
            }
            InitialConfig::Zero => {}
            InitialConfig::Inline { modes } => {
                let want = 3 + 4 * (n - 1);
                for m in modes {
                    if m.cos.len() != want || m.sin.len() != want {
                        return Err(bad(format!("inline mode k = {} needs {want} cos and sin coefficients", m.k)));
                    }
                    if 2 * m.k >= self.grid.num_points {
                        return Err(bad(format!("inline mode k = {} is not resolved on N points", m.k)));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<PeriodicGrid, CliError> {
        Ok(PeriodicGrid::new(self.grid.num_points, self.grid.length)?)
    }

    pub fn context(&self) -> Result<OpContext, CliError> {
        let ctx = OpContext::new(self.grid()?);
        Ok(match self.grid.mode {
            GridMode::Line => ctx.with_policy(MeanPolicy::Strict { tol: LINE_MEAN_TOL }, Anchor::Left),
            GridMode::Periodic => ctx.with_policy(MeanPolicy::Project, Anchor::ZeroMean),
        })
    }

    pub fn sg_mode(&self) -> SgMode {
        match self.grid.mode {
            GridMode::Line => SgMode::Line,
            GridMode::Periodic => SgMode::Periodic,
        }
    }

    pub fn flow_kind(&self) -> FlowKind {
        match self.flow.kind {
            FlowKindConfig::Mkdv => FlowKind::Mkdv,
            FlowKindConfig::SineGordon => FlowKind::SineGordon,
            FlowKindConfig::Hierarchy => FlowKind::Hierarchy(self.flow.l),
        }
    }

    pub fn sim_config(&self) -> Result<SimConfig, CliError> {
        let grid = self.grid()?;
        let mut s = SimConfig::new(self.algebra.n, grid, self.flow_kind());
        s.cfl_c = self.flow.cfl_c;
        s.dt = self.flow.dt.unwrap_or(match self.flow.kind {
            FlowKindConfig::SineGordon => DEFAULT_SG_DT,
            _ => self.flow.cfl_c * grid.dx().powi(3),
        });
        s.t_end = self.flow.t_end;
        s.galilean_removed = self.flow.galilean_removed;
        s.sg_branch = self.flow.sg_branch.into();
        s.sg_mode = self.sg_mode();
        s.sg_substeps = self.flow.sg_substeps;
        s.output_every = self.output.cadence;
        s.validate()?;
        Ok(s)
    }

    /// Seed of a random preset after applying a command-line override.
    pub fn seed(&self, cli: Option<u64>) -> Option<u64> {
        match &self.initial {
            InitialConfig::BandLimited { seed, .. } | InitialConfig::Localized { seed, .. } => Some(cli.unwrap_or(*seed)),
            _ => None,
        }
    }

    pub fn has(&self, f: Format) -> bool {
        self.output.formats.contains(&f)
    }

    /// Builds the initial state on the configured grid.
    pub fn initial_state(&self, seed_override: Option<u64>) -> Result<Pair, CliError> {
        let grid = self.grid()?;
        let n = self.algebra.n;
        let mid = grid.length / 2.0;
        let q_of = |q: &[f64; 3]| Quaternion::new(0.0, q[0], q[1], q[2]);
        let seed = self.seed(seed_override).unwrap_or(0);
        Ok(match &self.initial {
            InitialConfig::BandLimited { kmax, amp, .. } => {
                random_band_limited(grid, n, *kmax, *amp, &mut ChaCha8Rng::seed_from_u64(seed))
            }
            InitialConfig::Localized { center, width, amp, .. } => {
                random_localized(grid, n, center.unwrap_or(mid), *width, *amp, &mut ChaCha8Rng::seed_from_u64(seed))
            }
            InitialConfig::MkdvSoliton { a, x0, q } => mkdv_soliton(grid, n, *a, x0.unwrap_or(mid), 0.0, q_of(q)),
            InitialConfig::SgKink { a, x0, q } => {
                sg_kink(grid, n, *a, x0.unwrap_or(mid), 0.0, q_of(q), self.flow.sg_branch.into())
            }
            InitialConfig::Zero => Pair::zero(grid, n),
            InitialConfig::Inline { modes } => inline_state(grid, n, modes),
        })
    }
}

fn inline_state(grid: PeriodicGrid, n: usize, modes: &[Mode]) -> Pair {
    let mut p = Pair::zero(grid, n);
    let w = 2.0 * std::f64::consts::PI / grid.length;
    for m in modes {
        for (i, x) in grid.points().into_iter().enumerate() {
            let (c, s) = ((m.k as f64 * w * x).cos(), (m.k as f64 * w * x).sin());
            let at = |j: usize| m.cos[j] * c + m.sin[j] * s;
            p.s.samples[i] += Quaternion::new(0.0, at(0), at(1), at(2));
            let v = &mut p.v.samples[i];
            for l in 0..n - 1 {
                let b = 3 + 4 * l;
                v.entries[l] += Quaternion::new(at(b), at(b + 1), at(b + 2), at(b + 3));
            }
        }
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"algebra": {"n": 2}, "grid": {"N": 64, "L": 6.283185307179586}, "initial": {"preset": "band_limited"}}"#;

    #[test]
    fn defaults_fill_missing_sections() {
        let cfg = RunConfig::from_json(MINIMAL).unwrap();
        assert_eq!(cfg.flow, FlowConfig::default());
        assert_eq!(cfg.output, OutputConfig::default());
        assert_eq!(cfg.grid.mode, GridMode::Line);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = MINIMAL.replace("\"n\": 2", "\"n\": 2, \"m\": 1");
        assert!(matches!(RunConfig::from_json(&text), Err(CliError::Config(_))));
        let text = MINIMAL.replace("\"preset\": \"band_limited\"", "\"preset\": \"band_limited\", \"colour\": 1");
        assert!(matches!(RunConfig::from_json(&text), Err(CliError::Config(_))));
        let text = MINIMAL.replace("band_limited", "gaussian");
        assert!(matches!(RunConfig::from_json(&text), Err(CliError::Config(_))));
    }

    #[test]
    fn inline_coefficients_are_checked() {
        let text = MINIMAL.replace(
            r#"{"preset": "band_limited"}"#,
            r#"{"preset": "inline", "modes": [{"k": 1, "cos": [1, 0, 0], "sin": [0, 0, 0]}]}"#,
        );
        assert!(matches!(RunConfig::from_json(&text), Err(CliError::Config(_))));
    }

    #[test]
    fn inline_state_matches_its_modes() {
        let text = r#"{"algebra": {"n": 1}, "grid": {"N": 32, "L": 6.283185307179586},
            "initial": {"preset": "inline", "modes": [{"k": 2, "cos": [0.5, 0, 0], "sin": [0, 0, -1]}]}}"#;
        let cfg = RunConfig::from_json(text).unwrap();
        let p = cfg.initial_state(None).unwrap();
        let grid = cfg.grid().unwrap();
        for (i, q) in p.s.samples.iter().enumerate() {
            let x = grid.x(i);
            assert!((q.i - 0.5 * (2.0 * x).cos()).abs() < 1e-14);
            assert!((q.k + (2.0 * x).sin()).abs() < 1e-14);
        }
    }

    #[test]
    fn cfl_violation_is_a_config_error() {
        let text = MINIMAL.replace("\"initial\"", "\"flow\": {\"dt\": 1.0}, \"initial\"");
        let cfg = RunConfig::from_json(&text).unwrap();
        assert!(matches!(cfg.sim_config(), Err(CliError::Config(_))));
    }

    #[test]
    fn seed_override_applies_to_random_presets_only() {
        let cfg = RunConfig::from_json(MINIMAL).unwrap();
        assert_eq!(cfg.seed(Some(7)), Some(7));
        assert_eq!(cfg.seed(None), Some(0));
        let text = MINIMAL.replace("band_limited", "mkdv_soliton");
        assert_eq!(RunConfig::from_json(&text).unwrap().seed(Some(7)), None);
    }
}
