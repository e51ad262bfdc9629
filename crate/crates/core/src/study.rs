//! Convergence study drivers for the corner and moving-source problems.

use std::collections::HashMap;
use std::hash::{Hash, Hasher};
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::assembly::{
    assemble_l2_projection, assemble_poisson, assemble_theta_step, dirichlet_project_and_eliminate, Execution,
    ThetaStep,
};
use crate::basis::MlhpBasis;
use crate::error::{invalid, Result};
use crate::io::{write_vtu, StudyRecord};
use crate::masks::Space;
use crate::mesh::HierarchicalMesh;
use crate::problems::{
    corner_gradient, corner_solution, corner_source, refine_towards, CornerProblem, ErrorQuadrature,
    Grading, TransientProblem,
};
use crate::solver::{cg_jacobi, CgOptions, SolveReport};

/// Callback receiving each record as soon as it is complete.
pub type RecordSink<'a> = dyn FnMut(&StudyRecord) -> Result<()> + 'a;

#[derive(Clone, Debug, PartialEq)]
pub struct CornerConfig {
    pub dim: usize,
    pub max_depth: usize,
    pub grading: Grading,
    pub space: Space,
    pub tol: f64,
    pub execution: Execution,
    pub vtu_dir: Option<PathBuf>,
    pub samples_per_p: usize,
}

impl Default for CornerConfig {
    fn default() -> Self {
        Self {
            dim: 2,
            max_depth: 5,
            grading: Grading::Uniform,
            space: Space::Tensor,
            tol: 1e-10,
            execution: Execution::Sequential,
            vtu_dir: None,
            samples_per_p: 2,
        }
    }
}

fn solve(system: &crate::assembly::LinearSystem, tol: f64, execution: Execution, x0: Option<&[f64]>) -> Result<SolveReport> {
    let options = CgOptions {
        tol,
        max_iter: 20 * system.matrix.size() + 1000,
        execution,
    };
    let mut report = cg_jacobi(&system.matrix, &system.rhs, &options, x0)?;
    for &(dof, value) in &system.dirichlet {
        report.solution[dof] = value;
    }
    Ok(report)
}

/// Solves the corner problem for depths `1..=max_depth`.
pub fn run_corner_study(config: &CornerConfig, sink: &mut RecordSink) -> Result<Vec<StudyRecord>> {
    let mut records = Vec::new();
    for depth in 1..=config.max_depth {
        let problem = CornerProblem::new(config.dim, depth, config.grading)?;

        let start = Instant::now();
        let basis = problem.basis(config.space)?;
        let t_mesh_basis = start.elapsed().as_secs_f64();
        if basis.mesh().n_leaves() != problem.expected_leaves() {
            return invalid(format!(
                "corner mesh has {} leaves, expected {}",
                basis.mesh().n_leaves(),
                problem.expected_leaves()
            ));
        }

        let start = Instant::now();
        let mut system = assemble_poisson(
            &basis,
            1.0,
            corner_source,
            &problem.neumann_faces(),
            |_| 0.0,
            config.execution,
        )?;
        dirichlet_project_and_eliminate(&mut system, &basis, &problem.dirichlet_faces(), corner_solution)?;
        let t_assembly = start.elapsed().as_secs_f64();

        let start = Instant::now();
        let report = solve(&system, config.tol, config.execution, None)?;
        let t_solve = start.elapsed().as_secs_f64();

        let quadrature = ErrorQuadrature::new(&basis)?;
        let err_energy = quadrature.energy_error(&basis, &report.solution, 1.0, corner_gradient, config.execution)?;
        let exact = quadrature.sample(corner_solution, config.execution);
        let err_l2 = quadrature.l2_error(&basis, &report.solution, &exact, config.execution)?;

        if let Some(dir) = &config.vtu_dir {
            write_vtu(&basis, &report.solution, &dir.join(format!("corner_{depth}.vtu")), config.samples_per_p)?;
        }
        let record = StudyRecord {
            study: "corner".into(),
            index: depth,
            n_dofs: basis.n_dofs(),
            nnz: system.matrix.nnz(),
            cg_iters: report.iterations,
            err_energy: Some(err_energy),
            err_l2: Some(err_l2),
            t_mesh_basis_s: t_mesh_basis,
            t_assembly_s: t_assembly,
            t_solve_s: t_solve,
        };
        log::info!(
            "corner depth {depth}: {} dofs, {} cg iterations, energy error {err_energy:e}",
            record.n_dofs,
            record.cg_iters
        );
        sink(&record)?;
        records.push(record);
    }
    Ok(records)
}

/// How the transient driver builds the mesh of each time step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum MeshMode {
    /// One mesh refined along the whole path.
    Fixed,
    /// Refined towards the current source centre, coarsening along the trail.
    Follow,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransientConfig {
    pub problem: TransientProblem,
    pub steps: usize,
    pub theta: f64,
    pub base_cells: usize,
    pub depth: usize,
    pub degree: usize,
    pub space: Space,
    pub mesh_mode: MeshMode,
    /// Refinement reach in cell sizes of the level being refined.
    pub radius_factor: f64,
    /// Time after which the trail loses one refinement level.
    pub trail_time: f64,
    /// Reuse the previous basis when the mesh did not change.
    pub reuse_unchanged: bool,
    pub tol: f64,
    pub execution: Execution,
    pub vtu_dir: Option<PathBuf>,
    pub samples_per_p: usize,
}

impl TransientConfig {
    pub fn default_for(dim: usize) -> Self {
        Self {
            problem: TransientProblem::default_for(dim),
            steps: 32,
            theta: 0.5,
            base_cells: 4,
            depth: 3,
            degree: 4,
            space: Space::Trunk,
            mesh_mode: MeshMode::Fixed,
            radius_factor: 1.0,
            trail_time: 0.125,
            reuse_unchanged: true,
            tol: 1e-10,
            execution: Execution::Sequential,
            vtu_dir: None,
            samples_per_p: 2,
        }
    }

    fn base_mesh(&self) -> Result<HierarchicalMesh> {
        let d = self.problem.dim();
        HierarchicalMesh::create_base_grid(&self.problem.bounds, &vec![self.base_cells; d])
    }

    /// Mesh used for the step ending at time `t`.
    pub fn mesh_at(&self, t: f64) -> Result<HierarchicalMesh> {
        let base = self.base_mesh()?;
        let problem = &self.problem;
        let finest = (0..problem.dim())
            .map(|a| base.cell_size(self.depth, a))
            .fold(f64::INFINITY, f64::min);
        let length: f64 = problem
            .path_start
            .iter()
            .zip(&problem.path_end)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let (until, follow) = match self.mesh_mode {
            MeshMode::Fixed => (problem.end_time, false),
            MeshMode::Follow => (t, true),
        };
        let samples = ((length * until / problem.end_time) / (0.5 * finest)).ceil() as usize + 1;
        let mut targets = Vec::with_capacity(samples + 1);
        for i in 0..samples {
            let tau = until * i as f64 / (samples - 1).max(1) as f64;
            let depth = if follow {
                let lost = ((until - tau) / self.trail_time).floor() as usize;
                self.depth.saturating_sub(lost)
            } else {
                self.depth
            };
            targets.push((problem.path(tau), depth));
        }
        targets.push((problem.path(until), self.depth));
        refine_towards(base, &targets, self.radius_factor)
    }

    pub fn build_basis(&self, mesh: HierarchicalMesh) -> Result<MlhpBasis> {
        MlhpBasis::uniform(mesh, self.degree, self.space)
    }
}

/// Reference solution values at quadrature points, shared between runs on
/// the same meshes.
#[derive(Debug, Default)]
pub struct ReferenceCache {
    entries: Mutex<HashMap<(u64, u64), Arc<Vec<f64>>>>,
}

impl ReferenceCache {
    pub fn new() -> Self {
        Self::default()
    }

    fn values(&self, problem: &TransientProblem, quadrature: &ErrorQuadrature, t: f64, execution: Execution) -> Arc<Vec<f64>> {
        let mut hasher = std::collections::hash_map::DefaultHasher::new();
        for x in quadrature.points() {
            for v in x {
                v.to_bits().hash(&mut hasher);
            }
        }
        let key = (t.to_bits(), hasher.finish());
        if let Some(values) = self.entries.lock().unwrap().get(&key) {
            return values.clone();
        }
        let values = Arc::new(quadrature.sample(|x| problem.reference(x, t), execution));
        self.entries.lock().unwrap().insert(key, values.clone());
        values
    }

    pub fn clear(&self) {
        self.entries.lock().unwrap().clear();
    }
}

#[derive(Clone, Debug)]
pub struct TransientOutcome {
    pub records: Vec<StudyRecord>,
    /// Spatial L² errors at `t_0, .., t_N`.
    pub step_errors: Vec<f64>,
    pub space_time_error: f64,
    pub final_coefficients: Vec<f64>,
    pub final_basis: Arc<MlhpBasis>,
}

/// Marches the θ-method over `[0, T]` and measures errors against the
/// semi-analytical reference.
pub fn run_transient_study(
    config: &TransientConfig,
    cache: Option<&ReferenceCache>,
    sink: &mut RecordSink,
) -> Result<TransientOutcome> {
    let problem = &config.problem;
    problem.validate()?;
    if config.steps == 0 || !(0.0..=1.0).contains(&config.theta) {
        return invalid("need at least one step and 0 <= theta <= 1");
    }
    let local_cache = ReferenceCache::new();
    let cache = cache.unwrap_or(&local_cache);
    let dt = problem.end_time / config.steps as f64;
    let step = ThetaStep {
        theta: config.theta,
        dt,
        capacity: problem.capacity,
        kappa: problem.kappa,
    };

    let start = Instant::now();
    let mut basis = Arc::new(config.build_basis(config.mesh_at(0.0)?)?);
    let t_mesh_basis = start.elapsed().as_secs_f64();
    let start = Instant::now();
    let projection = assemble_l2_projection(&basis, |_| problem.initial, config.execution)?;
    let t_assembly = start.elapsed().as_secs_f64();
    let start = Instant::now();
    let report = solve(&projection, config.tol * 1e-2, config.execution, None)?;
    let t_solve = start.elapsed().as_secs_f64();
    let mut coeffs = report.solution;

    let mut quadrature = ErrorQuadrature::new(&basis)?;
    let exact = cache.values(problem, &quadrature, 0.0, config.execution);
    let mut step_errors = vec![quadrature.l2_error(&basis, &coeffs, &exact, config.execution)?];
    let mut records = Vec::new();
    let mut totals = StudyRecord {
        study: "transient".into(),
        index: config.steps,
        n_dofs: basis.n_dofs(),
        nnz: projection.matrix.nnz(),
        cg_iters: report.iterations,
        err_energy: None,
        err_l2: None,
        t_mesh_basis_s: t_mesh_basis,
        t_assembly_s: t_assembly,
        t_solve_s: t_solve,
    };

    for n in 1..=config.steps {
        let t_old = (n - 1) as f64 * dt;
        let t_new = n as f64 * dt;

        let start = Instant::now();
        let mesh = config.mesh_at(t_new)?;
        let unchanged = &mesh == basis.mesh();
        let new_basis = if unchanged && config.reuse_unchanged {
            basis.clone()
        } else {
            Arc::new(config.build_basis(mesh)?)
        };
        if !Arc::ptr_eq(&new_basis, &basis) {
            quadrature = ErrorQuadrature::new(&new_basis)?;
        }
        let t_mesh_basis = start.elapsed().as_secs_f64();

        let start = Instant::now();
        let mut system = assemble_theta_step(
            &new_basis,
            &basis,
            &coeffs,
            step,
            |x| problem.source(x, t_old),
            |x| problem.source(x, t_new),
            config.execution,
        )?;
        dirichlet_project_and_eliminate(&mut system, &new_basis, &problem.dirichlet_faces(), |x| {
            problem.reference(x, t_new)
        })?;
        let t_assembly = start.elapsed().as_secs_f64();

        let start = Instant::now();
        let x0 = unchanged.then_some(&coeffs[..]);
        let report = solve(&system, config.tol, config.execution, x0)?;
        let t_solve = start.elapsed().as_secs_f64();

        coeffs = report.solution;
        basis = new_basis;
        let exact = cache.values(problem, &quadrature, t_new, config.execution);
        let error = quadrature.l2_error(&basis, &coeffs, &exact, config.execution)?;
        step_errors.push(error);

        let record = StudyRecord {
            study: "transient/step".into(),
            index: n,
            n_dofs: basis.n_dofs(),
            nnz: system.matrix.nnz(),
            cg_iters: report.iterations,
            err_energy: None,
            err_l2: Some(error),
            t_mesh_basis_s: t_mesh_basis,
            t_assembly_s: t_assembly,
            t_solve_s: t_solve,
        };
        totals.n_dofs = totals.n_dofs.max(record.n_dofs);
        totals.nnz = totals.nnz.max(record.nnz);
        totals.cg_iters += record.cg_iters;
        totals.t_mesh_basis_s += t_mesh_basis;
        totals.t_assembly_s += t_assembly;
        totals.t_solve_s += t_solve;
        if let Some(dir) = &config.vtu_dir {
            write_vtu(&basis, &coeffs, &dir.join(format!("transient_{n}.vtu")), config.samples_per_p)?;
        }
        sink(&record)?;
        records.push(record);
    }

    let space_time_error = crate::problems::space_time_norm(&step_errors, dt);
    totals.err_l2 = Some(space_time_error);
    log::info!(
        "transient: {} steps, theta {}, space-time L2 error {space_time_error:e}",
        config.steps,
        config.theta
    );
    sink(&totals)?;
    records.push(totals);
    Ok(TransientOutcome {
        records,
        step_errors,
        space_time_error,
        final_coefficients: coeffs,
        final_basis: basis,
    })
}

/// Least-squares slope of `log y` over `log x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
