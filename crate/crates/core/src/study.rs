//! Configuration-driven convergence study: level meshes, solves, reference
//! solution and error table.

use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{convergence_table, relative_l2_error, transfer_to_reference, ConvergenceTable, ReferenceSolution};
use crate::assembly::{assemble, build_dof_map, conservation_residuals, measure_equivalence, DofMap};
use crate::error::{Result, VemError};
use crate::geometry::Rect;
use crate::mesh::{agglomerate_with_report, embed_inclusion, generate_triangulation, Inclusion, PolyMesh};
use crate::problem::{Affine, DarcyProblem, PermeabilitySpec};
use crate::solve::{solve, DiscreteSolution, SolverMode};
use crate::vem::{StabilizationMode, StabilizationParams};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelSpec {
    pub base_resolution: usize,
    #[serde(default)]
    pub tip_refinement_levels: usize,
    #[serde(default)]
    pub measure_threshold_ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSpec {
    pub base_resolution: usize,
    #[serde(default)]
    pub tip_refinement_levels: usize,
}

fn unit_square() -> Rect {
    Rect::UNIT
}

fn unit_permeability() -> PermeabilitySpec {
    PermeabilitySpec::Scalar(1.0)
}

fn yes() -> bool {
    true
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default = "unit_square")]
    pub domain: Rect,
    #[serde(default)]
    pub inclusion: Option<Inclusion>,
    #[serde(default = "unit_permeability")]
    pub permeability: PermeabilitySpec,
    #[serde(default)]
    pub source: Affine,
    #[serde(default)]
    pub boundary_pressure: Affine,
    pub levels: Vec<LevelSpec>,
    #[serde(default = "yes")]
    pub force_tip_cuts: bool,
    #[serde(default)]
    pub reference: Option<ReferenceSpec>,
    #[serde(default)]
    pub stabilization: StabilizationMode,
    #[serde(default)]
    pub solver: SolverMode,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
}

impl RunConfig {
    /// Parses and validates; syntax errors carry the JSON line and column.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| {
            VemError::Config(format!("line {}, column {}: {e}", e.line(), e.column()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| VemError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            VemError::Config(m) => VemError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |m: String| Err(VemError::Config(m));
        if self.schema_version != SCHEMA_VERSION {
            return cfg_err(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        let d = self.domain;
        Rect::new(d.x_min, d.x_max, d.y_min, d.y_max).map_err(|e| VemError::Config(format!("domain: {e}")))?;
        if let Some(inc) = &self.inclusion {
            inc.validate().map_err(|e| VemError::Config(format!("inclusion: {e}")))?;
            inc.check_immersed(&d).map_err(|e| VemError::Config(format!("inclusion: {e}")))?;
        }
        self.permeability
            .to_cell()
            .map_err(|e| VemError::Config(format!("permeability: {e}")))?;
        if self.levels.is_empty() {
            return cfg_err("at least one level is required".into());
        }
        for (i, l) in self.levels.iter().enumerate() {
            if l.base_resolution < 2 {
                return cfg_err(format!("levels[{i}].base_resolution must be at least 2"));
            }
            if !(0.0..1.0).contains(&l.measure_threshold_ratio) {
                return cfg_err(format!("levels[{i}].measure_threshold_ratio must lie in [0, 1)"));
            }
        }
        // Expected h is set by the lattice spacing.
        for (i, w) in self.levels.windows(2).enumerate() {
            if w[1].base_resolution <= w[0].base_resolution {
                return cfg_err(format!(
                    "levels must refine: levels[{}].base_resolution = {} does not exceed {}",
                    i + 1,
                    w[1].base_resolution,
                    w[0].base_resolution
                ));
            }
        }
        if let Some(r) = &self.reference {
            if r.base_resolution < 2 {
                return cfg_err("reference.base_resolution must be at least 2".into());
            }
        }
        Ok(())
    }

    pub fn problem(&self) -> Result<DarcyProblem> {
        Ok(DarcyProblem::new(
            self.permeability.to_cell()?,
            self.source,
            self.boundary_pressure,
        ))
    }

    pub fn level(&self, index: usize) -> Result<&LevelSpec> {
        self.levels.get(index).ok_or_else(|| {
            VemError::Config(format!(
                "level {index} out of range (config has {} levels)",
                self.levels.len()
            ))
        })
    }
}

/// Lattice, refinement at the tips, inclusion cut, then agglomeration.
pub fn build_level_mesh(cfg: &RunConfig, level: &LevelSpec) -> Result<PolyMesh> {
    let inc = cfg.inclusion.as_ref();
    let tri = generate_triangulation(&cfg.domain, inc, level.base_resolution, level.tip_refinement_levels)?;
    let embedded = match inc {
        Some(inc) => embed_inclusion(&tri, inc)?,
        None => tri,
    };
    let force = cfg.force_tip_cuts && inc.is_some();
    if level.measure_threshold_ratio == 0.0 && !force {
        return Ok(embedded);
    }
    let (mesh, report) = agglomerate_with_report(&embedded, level.measure_threshold_ratio, force)?;
    if report.rejected_candidates > 0 {
        warn!(
            "agglomeration skipped {} degenerate merge candidates ({} cells left below threshold)",
            report.rejected_candidates,
            report.stuck_cells.len()
        );
    }
    Ok(mesh)
}

/// Reference meshes are plain refined triangulations.
pub fn build_reference_mesh(cfg: &RunConfig, spec: &ReferenceSpec) -> Result<PolyMesh> {
    build_level_mesh(
        &RunConfig {
            force_tip_cuts: false,
            ..cfg.clone()
        },
        &LevelSpec {
            base_resolution: spec.base_resolution,
            tip_refinement_levels: spec.tip_refinement_levels,
            measure_threshold_ratio: 0.0,
        },
    )
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub dofs: DofMap,
    pub solution: DiscreteSolution,
    pub max_conservation_residual: f64,
    pub stabilization: StabilizationParams,
}

pub fn solve_on_mesh(
    mesh: &PolyMesh,
    problem: &DarcyProblem,
    stabilization: StabilizationMode,
    solver: SolverMode,
) -> Result<SolveReport> {
    let dofs = build_dof_map(mesh)?;
    let system = assemble(mesh, &dofs, problem, stabilization)?;
    let solution = solve(&system, solver)?;
    let max_conservation_residual = conservation_residuals(mesh, &dofs, &solution.flux, problem)
        .iter()
        .fold(0.0f64, |m, r| m.max(r.abs()));
    let stab = measure_equivalence(mesh, problem, stabilization)?;
    Ok(SolveReport {
        dofs,
        solution,
        max_conservation_residual,
        stabilization: stab,
    })
}

/// Hash of everything the reference solution depends on.
pub fn reference_key(cfg: &RunConfig, spec: &ReferenceSpec) -> Result<String> {
    let key = serde_json::json!({
        "version": env!("CARGO_PKG_VERSION"),
        "domain": cfg.domain,
        "inclusion": cfg.inclusion,
        "permeability": cfg.permeability,
        "source": cfg.source,
        "boundary_pressure": cfg.boundary_pressure,
        "reference": spec,
        "stabilization": cfg.stabilization,
        "solver": cfg.solver,
    });
    let digest = Sha256::digest(serde_json::to_vec(&key)?);
    Ok(hex::encode(&digest[..12]))
}

#[derive(Serialize, Deserialize)]
struct CachedReference {
    key: String,
    cells: usize,
    pressure: Vec<f64>,
}

/// Builds the reference solution, reusing `cache_dir/reference-<key>.json`
/// when it matches.
pub fn reference_solution(cfg: &RunConfig, cache_dir: Option<&Path>) -> Result<ReferenceSolution> {
    let spec = cfg
        .reference
        .ok_or_else(|| VemError::Config("a `reference` entry is required".into()))?;
    let mesh = build_reference_mesh(cfg, &spec)?;
    let key = reference_key(cfg, &spec)?;
    let cache = cache_dir.map(|d| d.join(format!("reference-{key}.json")));
    if let Some(path) = &cache {
        if let Ok(text) = std::fs::read_to_string(path) {
            match serde_json::from_str::<CachedReference>(&text) {
                Ok(c) if c.key == key && c.cells == mesh.num_cells() => {
                    info!("reusing cached reference {}", path.display());
                    return ReferenceSolution::new(mesh, c.pressure);
                }
                _ => warn!("ignoring stale reference cache {}", path.display()),
            }
        }
    }
    info!("solving reference on {} cells", mesh.num_cells());
    let report = solve_on_mesh(&mesh, &cfg.problem()?, cfg.stabilization, cfg.solver)?;
    if let Some(path) = &cache {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let c = CachedReference {
            key,
            cells: mesh.num_cells(),
            pressure: report.solution.pressure.clone(),
        };
        std::fs::write(path, serde_json::to_vec(&c)?)?;
    }
    ReferenceSolution::new(mesh, report.solution.pressure)
}

#[derive(Debug, Clone)]
pub struct LevelResult {
    pub index: usize,
    pub spec: LevelSpec,
    pub mesh: PolyMesh,
    pub report: SolveReport,
    pub err: f64,
    /// Per-reference-cell `|p_T - p_ref|`.
    pub cell_error: Vec<f64>,
    /// Coarse pressure sampled on the reference mesh.
    pub transferred: Vec<f64>,
}

impl LevelResult {
    pub fn h(&self) -> f64 {
        self.mesh.mesh_size()
    }
}

pub fn run_level(cfg: &RunConfig, index: usize, reference: &ReferenceSolution) -> Result<LevelResult> {
    let spec = *cfg.level(index)?;
    let mesh = build_level_mesh(cfg, &spec)?;
    let report = solve_on_mesh(&mesh, &cfg.problem()?, cfg.stabilization, cfg.solver)?;
    let transferred = transfer_to_reference(&mesh, &report.solution.pressure, &reference.mesh)?;
    let field = relative_l2_error(&transferred, &reference.pressure, &reference.mesh)?;
    info!(
        "level {index}: {} cells, h = {:.4e}, err = {:.4e}",
        mesh.num_cells(),
        mesh.mesh_size(),
        field.err
    );
    Ok(LevelResult {
        index,
        spec,
        mesh,
        report,
        err: field.err,
        cell_error: field.cell_error,
        transferred,
    })
}

/// Runs every level against the reference. Each finished level is handed to
/// `sink` in level order; a failing level stops the study after the levels
/// before it have been delivered.
pub fn run_convergence<F>(
    cfg: &RunConfig,
    reference: &ReferenceSolution,
    parallel: bool,
    mut sink: F,
) -> Result<ConvergenceTable>
where
    F: FnMut(&LevelResult) -> Result<()>,
{
    let mut pairs = Vec::with_capacity(cfg.levels.len());
    let mut deliver = |r: &LevelResult| -> Result<()> {
        sink(r)?;
        pairs.push((r.h(), r.err));
        Ok(())
    };
    if parallel {
        let results: Vec<Result<LevelResult>> = (0..cfg.levels.len())
            .into_par_iter()
            .map(|i| run_level(cfg, i, reference))
            .collect();
        for r in results {
            deliver(&r?)?;
        }
    } else {
        for i in 0..cfg.levels.len() {
            deliver(&run_level(cfg, i, reference)?)?;
        }
    }
    convergence_table(&pairs)
}
