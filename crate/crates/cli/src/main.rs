use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use panelflow::scenario::{
    run_kite, run_mesh_export, run_validate, ScenarioConfig, ScenarioError, ScenarioKind,
};
use panelflow::surface::VelocityMode;

#[derive(Parser)]
#[command(
    name = "panelflow",
    version,
    about = "Panel-method scenarios: validation sweep, kite co-simulation, mesh export"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Steady sweep of the validation wing over the configured angles.
    Validate(Common),
    /// Trim the kite and co-simulate it with its tether.
    Kite(Common),
    /// Write the validation wing and kite meshes.
    Mesh(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Marcov,
    Gradmu,
}

#[derive(clap::Args)]
struct Common {
    /// TOML scenario file; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, overriding the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    velocity_mode: Option<Mode>,
    /// Write the assembled linear system of every validation angle.
    #[arg(long)]
    dump_system: bool,
}

fn load(kind: ScenarioKind, args: &Common) -> Result<ScenarioConfig, ScenarioError> {
    let mut cfg = match &args.config {
        Some(path) => ScenarioConfig::from_toml(&std::fs::read_to_string(path)?)?,
        None => ScenarioConfig::new(kind),
    };
    if cfg.scenario != kind {
        return Err(ScenarioError::Config(format!(
            "the file describes a {:?} scenario",
            cfg.scenario
        )));
    }
    if let Some(out) = &args.out {
        cfg.output.directory = out.clone();
    }
    if let Some(mode) = args.velocity_mode {
        cfg.solver.velocity_mode = match mode {
            Mode::Marcov => VelocityMode::Marcov,
            Mode::Gradmu => VelocityMode::DoubletGradientOnly,
        };
    }
    cfg.output.dump_system |= args.dump_system;
    cfg.validate()?;
    Ok(cfg)
}

fn validate(cfg: &ScenarioConfig, dir: &Path) -> Result<(), ScenarioError> {
    let results = run_validate(cfg, Some(dir))?;
    let mut failed = 0;
    for r in &results {
        match &r.outcome {
            Ok(s) => {
                let c = s.outputs.coefficients;
                println!(
                    "alpha {:>6.2}  CL {:>9.5}  CD {:>9.6}  Cm {:>9.5}",
                    r.alpha_deg, c.cl, c.cd, c.cm
                );
            }
            Err(e) => {
                failed += 1;
                println!("alpha {:>6.2}  failed: {e}", r.alpha_deg);
            }
        }
    }
    if failed > 0 {
        return Err(ScenarioError::Solver(format!(
            "{failed} of {} angles failed",
            results.len()
        )));
    }
    Ok(())
}

fn kite(cfg: &ScenarioConfig, dir: &Path) -> Result<(), ScenarioError> {
    let run = run_kite(cfg, Some(dir))?;
    let tr = &run.trajectory;
    println!(
        "trim elevation {:.2} deg, force {:.1} N; {} accepted steps to t = {:.3} s",
        run.trim_elevation.to_degrees(),
        run.trim_force.norm(),
        tr.len(),
        tr.last().map_or(0.0, |r| r.t)
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match &cli.command {
        Command::Validate(a) => (ScenarioKind::Validate, a),
        Command::Kite(a) => (ScenarioKind::Kite, a),
        Command::Mesh(a) => (ScenarioKind::MeshExport, a),
    };
    let result = load(kind, args).and_then(|cfg| {
        let dir = cfg.output.directory.clone();
        match kind {
            ScenarioKind::Validate => validate(&cfg, &dir),
            ScenarioKind::Kite => kite(&cfg, &dir),
            ScenarioKind::MeshExport => run_mesh_export(&cfg, &dir).map(|files| {
                for f in files {
                    println!("{}", f.display());
                }
            }),
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("panelflow: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
