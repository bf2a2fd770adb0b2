use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde_json::json;

use darcy_vem::io::{write_poly_mesh, write_vtk};
use darcy_vem::solve::SolverMode;
use darcy_vem::study::{build_level_mesh, reference_solution, run_convergence, solve_on_mesh, LevelResult, RunConfig};
use darcy_vem::vem::StabilizationMode;
use darcy_vem::{ErrorKind, PolyMesh, Result, VemError};

const H_DEFINITION: &str = "max over cells of the largest vertex-to-vertex distance";

#[derive(Parser)]
#[command(name = "darcy-vem", version, about = "Mixed virtual elements for Darcy flow around an immersed inclusion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build every level mesh; write poly-mesh and VTK files.
    Mesh(Common),
    /// Solve on one level; write the pressure field and a conservation report.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Zero-based level index.
        #[arg(long, default_value_t = 0)]
        level: usize,
    },
    /// Solve every level and the reference; write the error table.
    Convergence {
        #[command(flatten)]
        common: Common,
        /// Run the levels concurrently.
        #[arg(long)]
        parallel_levels: bool,
    },
}

#[derive(Args)]
struct Common {
    /// Run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir` from the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    stabilization: Option<Stabilization>,
    #[arg(long, value_enum)]
    solver: Option<Solver>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Stabilization {
    Trace,
    Measure,
}

#[derive(Clone, Copy, ValueEnum)]
enum Solver {
    Direct,
    Schur,
}

impl Common {
    fn load(&self) -> Result<(RunConfig, PathBuf)> {
        let mut cfg = RunConfig::from_path(&self.config)?;
        if let Some(s) = self.stabilization {
            cfg.stabilization = match s {
                Stabilization::Trace => StabilizationMode::TraceScaled,
                Stabilization::Measure => StabilizationMode::MeasureScaled,
            };
        }
        if let Some(s) = self.solver {
            cfg.solver = match s {
                Solver::Direct => SolverMode::Direct,
                Solver::Schur => SolverMode::Schur,
            };
        }
        let out = self.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
        fs::create_dir_all(&out)?;
        Ok((cfg, out))
    }
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Config => 2,
        ErrorKind::Mesh => 3,
        ErrorKind::Solver => 4,
        ErrorKind::Analysis => 5,
        ErrorKind::Io => 6,
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text)?;
    Ok(())
}

fn vtk(path: &Path, mesh: &PolyMesh, title: &str, fields: &[(&str, &[f64])]) -> Result<()> {
    let mut w = create(path)?;
    write_vtk(mesh, title, fields, &mut w)?;
    w.flush()?;
    Ok(())
}

fn cmd_mesh(common: &Common) -> Result<()> {
    let (cfg, out) = common.load()?;
    println!("{:>5}  {:>8}  {:>4}  {:>12}", "level", "cells", "cut", "h");
    for (i, level) in cfg.levels.iter().enumerate() {
        let mesh = build_level_mesh(&cfg, level)?;
        let mut w = create(&out.join(format!("mesh_level{i}.poly")))?;
        write_poly_mesh(&mesh, &mut w)?;
        w.flush()?;
        vtk(&out.join(format!("mesh_level{i}.vtk")), &mesh, &format!("level {i}"), &[])?;
        println!(
            "{i:>5}  {:>8}  {:>4}  {:>12.4e}",
            mesh.num_cells(),
            mesh.cut_cell_count(),
            mesh.mesh_size()
        );
    }
    Ok(())
}

fn cmd_solve(common: &Common, level: usize) -> Result<()> {
    let (cfg, out) = common.load()?;
    let spec = cfg.level(level)?;
    let mesh = build_level_mesh(&cfg, spec)?;
    let report = solve_on_mesh(&mesh, &cfg.problem()?, cfg.stabilization, cfg.solver)?;
    let p = &report.solution.pressure;
    vtk(
        &out.join(format!("solution_level{level}.vtk")),
        &mesh,
        &format!("pressure, level {level}"),
        &[("p", p)],
    )?;
    let (lo, hi) = p
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let summary = json!({
        "level": level,
        "cells": mesh.num_cells(),
        "cut_cells": mesh.cut_cell_count(),
        "h": mesh.mesh_size(),
        "h_definition": H_DEFINITION,
        "solver": cfg.solver,
        "solver_residual": report.solution.residual,
        "max_conservation_residual": report.max_conservation_residual,
        "pressure_min": lo,
        "pressure_max": hi,
        "stabilization": cfg.stabilization,
        "iota_star_est": report.stabilization.iota_star_est,
        "iota_sup_est": report.stabilization.iota_sup_est,
    });
    write_text(
        &out.join(format!("solve_level{level}.json")),
        &(serde_json::to_string_pretty(&summary)? + "\n"),
    )?;
    println!("level {level}: {} cells, {} cut, h = {:.4e}", mesh.num_cells(), mesh.cut_cell_count(), mesh.mesh_size());
    println!("pressure range [{lo:.6e}, {hi:.6e}]");
    println!("solver residual {:.3e}", report.solution.residual);
    println!("max local conservation residual {:.3e}", report.max_conservation_residual);
    Ok(())
}

fn cmd_convergence(common: &Common, parallel: bool) -> Result<()> {
    let (cfg, out) = common.load()?;
    let spec = cfg
        .reference
        .ok_or_else(|| VemError::Config("convergence needs a `reference` entry".into()))?;
    let reference = reference_solution(&cfg, Some(&out.join("cache")))?;
    info!("reference: {} cells", reference.mesh.num_cells());
    vtk(&out.join("reference.vtk"), &reference.mesh, "reference pressure", &[("p", &reference.pressure)])?;

    // Completed levels are recorded as they finish so that a later failure
    // leaves them on disk.
    let partial = out.join("levels_partial.csv");
    write_text(&partial, "level,cells,cut_cells,h,err,max_conservation_residual,solver_residual\n")?;
    let mut levels = Vec::new();
    let sink = |r: &LevelResult| -> Result<()> {
        let i = r.index;
        vtk(
            &out.join(format!("solution_level{i}.vtk")),
            &r.mesh,
            &format!("pressure, level {i}"),
            &[("p", &r.report.solution.pressure)],
        )?;
        vtk(
            &out.join(format!("error_level{i}.vtk")),
            &reference.mesh,
            &format!("error on the reference mesh, level {i}"),
            &[("p", &r.transferred), ("p_ref", &reference.pressure), ("err_p", &r.cell_error)],
        )?;
        let mut f = fs::OpenOptions::new().append(true).open(&partial)?;
        writeln!(
            f,
            "{i},{},{},{:.6e},{:.6e},{:.3e},{:.3e}",
            r.mesh.num_cells(),
            r.mesh.cut_cell_count(),
            r.h(),
            r.err,
            r.report.max_conservation_residual,
            r.report.solution.residual
        )?;
        levels.push(json!({
            "level": i,
            "spec": r.spec,
            "cells": r.mesh.num_cells(),
            "cut_cells": r.mesh.cut_cell_count(),
            "h": r.h(),
            "err": r.err,
            "max_conservation_residual": r.report.max_conservation_residual,
            "solver_residual": r.report.solution.residual,
            "iota_star_est": r.report.stabilization.iota_star_est,
            "iota_sup_est": r.report.stabilization.iota_sup_est,
        }));
        Ok(())
    };
    let table = run_convergence(&cfg, &reference, parallel, sink)?;

    write_text(&out.join("convergence.csv"), &table.to_csv())?;
    write_text(&out.join("convergence.txt"), &table.to_text())?;
    let meta = json!({
        "h_definition": H_DEFINITION,
        "stabilization": cfg.stabilization,
        "solver": cfg.solver,
        "reference": {
            "base_resolution": spec.base_resolution,
            "tip_refinement_levels": spec.tip_refinement_levels,
            "cells": reference.mesh.num_cells(),
            "pressure_range": [reference.range.0, reference.range.1],
        },
        "levels": levels,
        "mean_rate": table.mean_rate(),
    });
    write_text(&out.join("metadata.json"), &(serde_json::to_string_pretty(&meta)? + "\n"))?;
    print!("{}", table.to_text());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Mesh(common) => cmd_mesh(common),
        Command::Solve { common, level } => cmd_solve(common, *level),
        Command::Convergence {
            common,
            parallel_levels,
        } => cmd_convergence(common, *parallel_levels),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.kind()))
        }
    }
}
