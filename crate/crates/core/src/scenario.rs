//! Scenario runner: configuration, the validation sweep, the kite
//! co-simulation and mesh export, with their CSV, VTK and manifest output.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cosim::{run_master_with, CosimConfig, CosimError, Signals, Trajectory, TrajectoryRow};
use crate::dynamics::{IntegratorOptions, KiteBodyParams, TetherParams};
use crate::geometry::{
    closed_body, loft_rect_wing, naca4_airfoil, GeometryError, KiteGeometry, MeshCollection,
};
use crate::io::{content_hash, write_panel_csv, PolyData};
use crate::kite::{trim, KiteAero, KiteConfig, KiteError, KiteMech, Trim};
use crate::solver::{InfluenceSystem, SolveOptions};
use crate::steady::{
    freestream, solve_steady, steady_outputs, Reference, SteadyCase, SteadyOptions, SteadySolution,
};
use crate::surface::{AeroOutputs, Coefficients, VelocityMode};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("cannot parse configuration: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("output: {0}")]
    Io(#[from] std::io::Error),
    #[error("output: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("instability: {0}")]
    Instability(String),
}

impl ScenarioError {
    /// 2 for solver failures, 3 for an instability abort, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            ScenarioError::Solver(_) => 2,
            ScenarioError::Instability(_) => 3,
            _ => 1,
        }
    }
}

impl From<KiteError> for ScenarioError {
    fn from(e: KiteError) -> Self {
        match e {
            KiteError::Geometry(g) => ScenarioError::Geometry(g),
            other => ScenarioError::Solver(other.to_string()),
        }
    }
}

impl From<CosimError> for ScenarioError {
    fn from(e: CosimError) -> Self {
        match e {
            CosimError::Config(msg) => ScenarioError::Config(msg.to_string()),
            CosimError::Instability { .. } => ScenarioError::Instability(e.to_string()),
            other => ScenarioError::Solver(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    Validate,
    Kite,
    MeshExport,
}

/// Rectangular validation wing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WingGeometry {
    /// NACA 4-digit code.
    pub airfoil: String,
    /// Panels around the section.
    pub chordwise_panels: usize,
    pub spanwise_panels: usize,
    pub span: f64,
    pub chord: f64,
}

impl Default for WingGeometry {
    fn default() -> Self {
        WingGeometry {
            airfoil: "0012".to_string(),
            chordwise_panels: 32,
            spanwise_panels: 40,
            span: 6.0,
            chord: 1.0,
        }
    }
}

impl WingGeometry {
    pub fn body(&self) -> Result<MeshCollection, GeometryError> {
        let foil = naca4_airfoil(&self.airfoil, self.chordwise_panels)?;
        closed_body(loft_rect_wing(
            &foil,
            self.span,
            self.chord,
            self.spanwise_panels,
        )?)
    }

    /// Loads referred to the planform area and the quarter chord.
    pub fn reference(&self, density: f64) -> Reference {
        Reference {
            density,
            area: self.span * self.chord,
            chord: self.chord,
            moment_point: Point3::new(0.25 * self.chord, 0.0, 0.0),
            span_axis: Vector3::y(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometrySection {
    pub wing: WingGeometry,
    pub kite: KiteGeometry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowSection {
    /// Validation airspeed (m/s).
    pub speed: f64,
    pub density: f64,
    pub alphas_deg: Vec<f64>,
    /// Kite wind velocity (m/s).
    pub wind: [f64; 3],
}

impl Default for FlowSection {
    fn default() -> Self {
        FlowSection {
            speed: 30.0,
            density: 1.2,
            alphas_deg: vec![0.0, 4.0, 8.0, 10.0],
            wind: [6.0, 0.0, 0.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub linear: SolveOptions,
    pub velocity_mode: VelocityMode,
    /// Row cap for steady wake iteration.
    pub wake_rows: usize,
    pub wake_steps: usize,
    /// Relative change of the Kutta strengths that ends wake iteration.
    pub wake_tol: f64,
    pub integrator: IntegratorOptions,
}

impl Default for SolverSection {
    fn default() -> Self {
        let steady = SteadyOptions::default();
        SolverSection {
            linear: SolveOptions::default(),
            velocity_mode: VelocityMode::Marcov,
            wake_rows: steady.max_rows,
            wake_steps: steady.max_steps,
            wake_tol: steady.tol,
            integrator: IntegratorOptions::default(),
        }
    }
}

/// Kite co-simulation settings other than geometry, flow and solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KiteSection {
    pub duration: f64,
    /// Piecewise-constant steering as `[time, u]` pairs; `u = 0` before the first.
    pub steering: Vec<[f64; 2]>,
    pub body: KiteBodyParams,
    pub tether: TetherParams,
    pub pitch_offset_deg: f64,
    pub shed_interval: f64,
    pub max_rows: usize,
}

impl Default for KiteSection {
    fn default() -> Self {
        let k = KiteConfig::default();
        KiteSection {
            duration: 10.0,
            steering: Vec::new(),
            body: k.body,
            tether: k.tether,
            pitch_offset_deg: k.pitch_offset_deg,
            shed_interval: k.shed_interval,
            max_rows: k.max_rows,
        }
    }
}

impl KiteSection {
    pub fn steering_at(&self, t: f64) -> f64 {
        self.steering
            .iter()
            .rev()
            .find(|[ts, _]| *ts <= t)
            .map_or(0.0, |[_, u]| *u)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub directory: PathBuf,
    pub vtk: bool,
    pub csv: bool,
    /// Kite VTK snapshot spacing in simulated seconds; 0 disables them.
    pub snapshot_interval: f64,
    /// Also write the assembled linear system of every validation angle.
    pub dump_system: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            directory: PathBuf::from("out"),
            vtk: true,
            csv: true,
            snapshot_interval: 1.0,
            dump_system: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioKind,
    pub geometry: Option<GeometrySection>,
    pub flow: Option<FlowSection>,
    #[serde(default)]
    pub solver: SolverSection,
    pub cosim: Option<CosimConfig>,
    #[serde(default)]
    pub kite: KiteSection,
    #[serde(default)]
    pub output: OutputSection,
}

impl ScenarioConfig {
    /// Defaults for `kind` with every section present.
    pub fn new(kind: ScenarioKind) -> Self {
        ScenarioConfig {
            scenario: kind,
            geometry: Some(GeometrySection::default()),
            flow: Some(FlowSection::default()),
            solver: SolverSection::default(),
            cosim: Some(CosimConfig::default()),
            kite: KiteSection::default(),
            output: OutputSection::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        let cfg: ScenarioConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let need = |present: bool, name: &str| {
            if present {
                Ok(())
            } else {
                Err(ScenarioError::Config(format!(
                    "section [{name}] is required for this scenario"
                )))
            }
        };
        need(self.geometry.is_some(), "geometry")?;
        match self.scenario {
            ScenarioKind::Validate => need(self.flow.is_some(), "flow")?,
            ScenarioKind::Kite => {
                need(self.flow.is_some(), "flow")?;
                need(self.cosim.is_some(), "cosim")?;
            }
            ScenarioKind::MeshExport => {}
        }
        if let Some(flow) = &self.flow {
            if !(flow.density > 0.0) {
                return Err(ScenarioError::Config("density must be positive".into()));
            }
            if self.scenario == ScenarioKind::Validate && !(flow.speed > 0.0) {
                return Err(ScenarioError::Config("airspeed must be positive".into()));
            }
        }
        if let Some(c) = &self.cosim {
            c.validate()?;
        }
        if self.scenario == ScenarioKind::Kite {
            self.kite
                .tether
                .validate()
                .map_err(|e| ScenarioError::Config(e.to_string()))?;
            if !(self.kite.duration >= 0.0 && self.kite.shed_interval > 0.0) {
                return Err(ScenarioError::Config(
                    "kite duration and shed interval must be non-negative and positive".into(),
                ));
            }
        }
        Ok(())
    }

    fn geometry(&self) -> &GeometrySection {
        self.geometry.as_ref().expect("validated")
    }

    fn flow(&self) -> &FlowSection {
        self.flow.as_ref().expect("validated")
    }

    pub fn steady_options(&self) -> SteadyOptions {
        let wing = &self.geometry().wing;
        SteadyOptions {
            // One chord per shed row.
            dt: wing.chord / self.flow().speed,
            max_rows: self.solver.wake_rows,
            max_steps: self.solver.wake_steps,
            tol: self.solver.wake_tol,
            solve: self.solver.linear,
        }
    }

    pub fn kite_config(&self) -> KiteConfig {
        let flow = self.flow();
        KiteConfig {
            geometry: self.geometry().kite.clone(),
            body: self.kite.body.clone(),
            tether: self.kite.tether.clone(),
            wind: flow.wind,
            density: flow.density,
            velocity_mode: self.solver.velocity_mode,
            pitch_offset_deg: self.kite.pitch_offset_deg,
            shed_interval: self.kite.shed_interval,
            max_rows: self.kite.max_rows,
            solve: self.solver.linear,
            integrator: self.solver.integrator,
        }
    }
}

fn prepare_dir(dir: &Path) -> Result<(), ScenarioError> {
    fs::create_dir_all(dir)?;
    Ok(())
}

/// `manifest.toml`: crate version, content hash of the configuration and
/// the configuration itself under `[config]`.
pub fn write_manifest(dir: &Path, cfg: &ScenarioConfig) -> Result<String, ScenarioError> {
    let hash = content_hash(cfg.to_toml().as_bytes());
    let mut table = toml::Table::new();
    table.insert("panelflow_version".into(), env!("CARGO_PKG_VERSION").into());
    table.insert("config_hash".into(), hash.clone().into());
    table.insert(
        "config".into(),
        toml::Value::try_from(cfg).expect("configuration serializes"),
    );
    fs::write(
        dir.join("manifest.toml"),
        toml::to_string(&table).expect("manifest serializes"),
    )?;
    Ok(hash)
}

fn alpha_tag(alpha: f64) -> String {
    format!("{alpha}").replace('-', "m").replace('.', "p")
}

/// One solved angle of attack.
#[derive(Debug, Clone)]
pub struct AlphaSolution {
    pub solution: SteadySolution,
    pub outputs: AeroOutputs,
}

#[derive(Debug, Clone)]
pub struct AlphaResult {
    pub alpha_deg: f64,
    pub outcome: Result<AlphaSolution, String>,
}

impl AlphaResult {
    pub fn coefficients(&self) -> Option<Coefficients> {
        self.outcome.as_ref().ok().map(|s| s.outputs.coefficients)
    }
}

pub const VALIDATE_CSV_HEADER: [&str; 9] = [
    "alpha_deg",
    "mode",
    "status",
    "cl",
    "cd",
    "cm",
    "wake_steps",
    "iterations",
    "residual",
];

fn mode_name(mode: VelocityMode) -> &'static str {
    match mode {
        VelocityMode::Marcov => "marcov",
        VelocityMode::DoubletGradientOnly => "gradmu",
    }
}

fn dump_system(path: &Path, system: &InfluenceSystem) -> Result<(), ScenarioError> {
    let mut w = csv::Writer::from_path(path)?;
    let n = system.rhs.len();
    let mut header: Vec<String> = (0..n).map(|j| format!("a{j}")).collect();
    header.push("rhs".into());
    w.write_record(&header)?;
    for i in 0..n {
        let mut rec: Vec<String> = (0..n).map(|j| system.a[(i, j)].to_string()).collect();
        rec.push(system.rhs[i].to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Steady sweep over the configured angles. A failed angle is recorded and
/// the sweep continues. With `out`, writes `validate.csv`, per-angle Cp
/// tables and VTK surfaces, and the manifest.
pub fn run_validate(
    cfg: &ScenarioConfig,
    out: Option<&Path>,
) -> Result<Vec<AlphaResult>, ScenarioError> {
    cfg.validate()?;
    let flow = cfg.flow();
    let wing = &cfg.geometry().wing;
    let case = SteadyCase::new(wing.body()?, wing.reference(flow.density));
    let opts = cfg.steady_options();
    let mode = cfg.solver.velocity_mode;
    if let Some(dir) = out {
        prepare_dir(dir)?;
        write_manifest(dir, cfg)?;
    }
    let mut results = Vec::with_capacity(flow.alphas_deg.len());
    for &alpha in &flow.alphas_deg {
        let outcome = solve_steady(&case, &freestream(flow.speed, alpha), &opts)
            .and_then(|solution| {
                let outputs = steady_outputs(&case, &solution, mode)?;
                Ok(AlphaSolution { solution, outputs })
            })
            .map_err(|e| e.to_string());
        if let (Some(dir), Ok(s)) = (out, &outcome) {
            let tag = alpha_tag(alpha);
            if cfg.output.csv {
                let (vx, vy, vz): (Vec<f64>, Vec<f64>, Vec<f64>) = (
                    s.outputs.velocity.iter().map(|v| v.x).collect(),
                    s.outputs.velocity.iter().map(|v| v.y).collect(),
                    s.outputs.velocity.iter().map(|v| v.z).collect(),
                );
                write_panel_csv(
                    &dir.join(format!("cp_alpha_{tag}.csv")),
                    &case.body,
                    &[
                        ("cp", &s.outputs.cp),
                        ("vx", &vx),
                        ("vy", &vy),
                        ("vz", &vz),
                        ("mu", &s.solution.state.mu),
                    ],
                )?;
            }
            if cfg.output.vtk {
                PolyData::from_collection(&case.body)
                    .with_cell_scalar("Cp", &s.outputs.cp)?
                    .save(
                        &dir.join(format!("wing_alpha_{tag}.vtk")),
                        &format!("wing alpha {alpha} deg"),
                    )?;
                PolyData::from_wake(&s.solution.wake)
                    .save(&dir.join(format!("wake_alpha_{tag}.vtk")), "wake")?;
            }
            if cfg.output.dump_system {
                dump_system(
                    &dir.join(format!("system_alpha_{tag}.csv")),
                    &s.solution.system,
                )?;
            }
        }
        results.push(AlphaResult {
            alpha_deg: alpha,
            outcome,
        });
    }
    if let Some(dir) = out {
        let mut w = csv::Writer::from_path(dir.join("validate.csv"))?;
        w.write_record(VALIDATE_CSV_HEADER)?;
        for r in &results {
            let mut rec = vec![r.alpha_deg.to_string(), mode_name(mode).to_string()];
            match &r.outcome {
                Ok(s) => {
                    let c = s.outputs.coefficients;
                    rec.push("ok".into());
                    rec.extend([c.cl, c.cd, c.cm].iter().map(f64::to_string));
                    rec.push(s.solution.steps.to_string());
                    rec.push(s.solution.report.iterations.to_string());
                    rec.push(s.solution.report.residual.to_string());
                }
                Err(e) => {
                    rec.push(format!("failed: {e}"));
                    rec.extend(std::iter::repeat_n(String::new(), 6));
                }
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
    }
    Ok(results)
}

/// Columns of `trajectory.csv`; `t` is the end of each accepted step.
pub const TRAJECTORY_CSV_HEADER: [&str; 27] = [
    "t",
    "h",
    "defect",
    "halvings",
    "u",
    "top_x",
    "top_y",
    "top_z",
    "top_vx",
    "top_vy",
    "top_vz",
    "psi",
    "psi_rate",
    "tension",
    "force_x",
    "force_y",
    "force_z",
    "yaw_moment",
    "pressure_force_x",
    "pressure_force_y",
    "pressure_force_z",
    "pressure_yaw_moment",
    "moment_x",
    "moment_y",
    "moment_z",
    "wake_rows",
    "solver_iterations",
];

fn row_value(row: &TrajectoryRow, column: &str) -> f64 {
    match column {
        "t" => row.t,
        "h" => row.h,
        "defect" => row.defect,
        "halvings" => row.halvings as f64,
        _ => row
            .inputs
            .get(column)
            .or_else(|| row.mech.get(column))
            .or_else(|| row.aero.get(column))
            .copied()
            .unwrap_or(f64::NAN),
    }
}

pub fn write_trajectory_csv(path: &Path, trajectory: &Trajectory) -> Result<(), ScenarioError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(TRAJECTORY_CSV_HEADER)?;
    for row in &trajectory.rows {
        w.write_record(
            TRAJECTORY_CSV_HEADER
                .iter()
                .map(|c| row_value(row, c).to_string()),
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Trimmed kite ready to fly: aerodynamic and mechanical simulators seeded
/// from the static equilibrium.
pub fn kite_system(cfg: &KiteConfig) -> Result<(KiteAero, KiteMech, Trim), KiteError> {
    let trim = trim(cfg)?;
    let cfg = Arc::new(cfg.clone());
    let aero = KiteAero::from_trim(Arc::clone(&cfg), &trim)?;
    let mech = KiteMech::new(&cfg, trim.mech.clone());
    Ok((aero, mech, trim))
}

#[derive(Debug, Clone)]
pub struct KiteRun {
    pub trajectory: Trajectory,
    pub trim_elevation: f64,
    pub trim_force: Vector3<f64>,
}

fn kite_snapshot(dir: &Path, k: usize, aero: &KiteAero) -> std::io::Result<()> {
    PolyData::from_collection(aero.world_body())
        .with_cell_scalar("Cp", &aero.loads().cp)?
        .save(&dir.join(format!("kite_{k:04}.vtk")), "kite")?;
    PolyData::from_wake(aero.wake()).save(&dir.join(format!("kite_wake_{k:04}.vtk")), "kite wake")
}

/// Trim, then co-simulate for the configured duration under the scripted
/// steering. With `out`, writes `trajectory.csv`, VTK snapshots and the
/// manifest; the trajectory is written even when the run aborts.
pub fn run_kite(cfg: &ScenarioConfig, out: Option<&Path>) -> Result<KiteRun, ScenarioError> {
    cfg.validate()?;
    let kcfg = cfg.kite_config();
    let cosim = cfg.cosim.expect("validated");
    if let Some(dir) = out {
        prepare_dir(dir)?;
        write_manifest(dir, cfg)?;
    }
    let (mut aero, mut mech, trim) = kite_system(&kcfg)?;
    let interval = cfg.output.snapshot_interval;
    let snapshots = out.filter(|_| cfg.output.vtk && interval > 0.0);
    let mut next_snapshot = 0.0;
    let mut count = 0;
    if let Some(dir) = snapshots {
        kite_snapshot(dir, 0, &aero)?;
        count = 1;
        next_snapshot = interval;
    }
    let result = run_master_with(
        &mut aero,
        &mut mech,
        &cosim,
        cfg.kite.duration,
        |t| Signals::from([("u".to_string(), cfg.kite.steering_at(t))]),
        |row, aero, _| {
            if let Some(dir) = snapshots {
                if row.t >= next_snapshot {
                    kite_snapshot(dir, count, aero)?;
                    count += 1;
                    next_snapshot += interval;
                }
            }
            Ok(())
        },
    );
    let trajectory = match &result {
        Ok(t) => Some(t),
        Err(CosimError::Instability { record, .. }) => Some(record.as_ref()),
        Err(_) => None,
    };
    if let (Some(dir), Some(tr), true) = (out, trajectory, cfg.output.csv) {
        write_trajectory_csv(&dir.join("trajectory.csv"), tr)?;
    }
    Ok(KiteRun {
        trajectory: result?,
        trim_elevation: trim.elevation,
        trim_force: trim.force,
    })
}

/// Surface meshes without the flow solution: the validation wing loft and
/// its caps, and the kite at `u = 0` and `u = 1`.
pub fn run_mesh_export(cfg: &ScenarioConfig, dir: &Path) -> Result<Vec<PathBuf>, ScenarioError> {
    cfg.validate()?;
    prepare_dir(dir)?;
    write_manifest(dir, cfg)?;
    let geometry = cfg.geometry();
    let kcfg = KiteConfig {
        geometry: geometry.kite.clone(),
        body: cfg.kite.body.clone(),
        ..KiteConfig::default()
    };
    let mut bodies = vec![("wing".to_string(), geometry.wing.body()?)];
    for u in [0.0, 1.0] {
        bodies.push((
            format!("kite_u{u}"),
            kcfg.mesh(u).map_err(ScenarioError::from)?,
        ));
    }
    let mut written = Vec::new();
    for (name, body) in &bodies {
        let parts = [("", &body.meshes[0]), ("_caps", &body.meshes[1])];
        for (suffix, mesh) in parts {
            let stem = format!("{name}{suffix}");
            if cfg.output.vtk {
                let path = dir.join(format!("{stem}.vtk"));
                PolyData::from_mesh(mesh).save(&path, &stem)?;
                written.push(path);
            }
            if cfg.output.csv {
                let path = dir.join(format!("{stem}.csv"));
                write_panel_csv(&path, &MeshCollection::new(vec![mesh.clone()])?, &[])?;
                written.push(path);
            }
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_configs_validate_and_round_trip() {
        for kind in [
            ScenarioKind::Validate,
            ScenarioKind::Kite,
            ScenarioKind::MeshExport,
        ] {
            let cfg = ScenarioConfig::new(kind);
            cfg.validate().unwrap();
            assert_eq!(ScenarioConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
        }
    }

    #[test]
    fn required_sections_and_density_are_checked() {
        let err = ScenarioConfig::from_toml("scenario = \"validate\"\n[geometry]\n").unwrap_err();
        assert!(err.to_string().contains("[flow]"), "{err}");
        let err = ScenarioConfig::from_toml(
            "scenario = \"validate\"\n[geometry]\n[flow]\ndensity = 0.0\n",
        )
        .unwrap_err();
        assert!(err.to_string().contains("density"));
        assert!(ScenarioConfig::from_toml("scenario = \"kite\"\n[geometry]\n[flow]\n").is_err());
        assert!(ScenarioConfig::from_toml("scenario = \"mesh-export\"\n[geometry]\n").is_ok());
        assert!(
            ScenarioConfig::from_toml("scenario = \"mesh-export\"\n[geometry]\nbogus = 1\n")
                .is_err()
        );
    }

    #[test]
    fn sparse_file_takes_defaults() {
        let cfg = ScenarioConfig::from_toml(
            "scenario = \"validate\"\n[geometry.wing]\nspanwise_panels = 8\n[flow]\nalphas_deg = [2.0]\n[solver]\nvelocity_mode = \"gradmu\"\n",
        )
        .unwrap();
        assert_eq!(cfg.geometry().wing.spanwise_panels, 8);
        assert_eq!(cfg.geometry().wing.chordwise_panels, 32);
        assert_eq!(cfg.flow().density, 1.2);
        assert_eq!(cfg.solver.velocity_mode, VelocityMode::DoubletGradientOnly);
    }

    #[test]
    fn steering_is_piecewise_constant() {
        let k = KiteSection {
            steering: vec![[1.0, 0.5], [2.0, -0.5]],
            ..Default::default()
        };
        assert_eq!(k.steering_at(0.99), 0.0);
        assert_eq!(k.steering_at(1.0), 0.5);
        assert_eq!(k.steering_at(5.0), -0.5);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(ScenarioError::Solver("x".into()).exit_code(), 2);
        assert_eq!(ScenarioError::Instability("x".into()).exit_code(), 3);
        assert_eq!(ScenarioError::Config("x".into()).exit_code(), 1);
    }

    #[test]
    fn alpha_tags_are_file_safe() {
        assert_eq!(alpha_tag(10.0), "10");
        assert_eq!(alpha_tag(-2.5), "m2p5");
    }
}
