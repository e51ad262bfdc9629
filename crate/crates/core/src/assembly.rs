//! Element integration, scatter into CSR matrices and Dirichlet treatment.

use rayon::prelude::*;

use crate::basis::{non_finite, MlhpBasis, ShapeEvaluator};
use crate::dofmap::{DofId, LocationMap};
use crate::error::{invalid, Result};
use crate::mesh::{CellId, NO_CELL};
use crate::ndarray::for_each_index;
use crate::polynomials::gauss_legendre_rule;
use crate::solver::{cg_jacobi, CgOptions};
use crate::sparse::SparseMatrixCsr;

/// Elements per parallel batch; bounds memory held by unscattered matrices.
const BATCH: usize = 256;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Execution {
    #[default]
    Sequential,
    Parallel,
}

/// A subset of the `2d` external faces of a box domain, as `(axis, side)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoundaryFaces {
    faces: Vec<[bool; 2]>,
}

impl BoundaryFaces {
    pub fn none(dim: usize) -> Self {
        Self {
            faces: vec![[false; 2]; dim],
        }
    }

    pub fn all(dim: usize) -> Self {
        Self {
            faces: vec![[true; 2]; dim],
        }
    }

    /// All faces with the given side (0 = lower, 1 = upper).
    pub fn side(dim: usize, side: usize) -> Self {
        let mut faces = Self::none(dim);
        for axis in 0..dim {
            faces.insert(axis, side);
        }
        faces
    }

    pub fn insert(&mut self, axis: usize, side: usize) {
        self.faces[axis][side] = true;
    }

    pub fn remove(&mut self, axis: usize, side: usize) {
        self.faces[axis][side] = false;
    }

    pub fn contains(&self, axis: usize, side: usize) -> bool {
        self.faces[axis][side]
    }

    pub fn complement(&self) -> Self {
        Self {
            faces: self.faces.iter().map(|f| [!f[0], !f[1]]).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.faces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.faces.iter().all(|f| !f[0] && !f[1])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearSystem {
    pub matrix: SparseMatrixCsr,
    pub rhs: Vec<f64>,
    /// Eliminated dofs and their prescribed values, sorted by dof.
    pub dirichlet: Vec<(DofId, f64)>,
}

pub fn allocate_sparsity(location_maps: &[LocationMap], n_dofs: usize) -> Result<SparseMatrixCsr> {
    SparseMatrixCsr::from_location_maps(location_maps, n_dofs)
}

/// Tensor Gauss rule on `[-1, 1]^d` with `counts[a]` points along axis `a`.
pub(crate) fn tensor_rule(counts: &[usize]) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let rules = counts
        .iter()
        .map(|&n| gauss_legendre_rule(n))
        .collect::<Result<Vec<_>>>()?;
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for_each_index(counts, |index| {
        let mut w = 1.0;
        let mut r = Vec::with_capacity(counts.len());
        for (axis, &i) in index.iter().enumerate() {
            r.push(rules[axis].points[i]);
            w *= rules[axis].weights[i];
        }
        points.push(r);
        weights.push(w);
    });
    Ok((points, weights))
}

/// Tensor rule on face `(axis, side)` of `[-1, 1]^d`; the weights cover the
/// remaining axes only.
pub(crate) fn face_rule(counts: &[usize], axis: usize, side: usize) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let mut reduced = counts.to_vec();
    reduced[axis] = 1;
    let (mut points, mut weights) = tensor_rule(&reduced)?;
    let coordinate = if side == 0 { -1.0 } else { 1.0 };
    for (r, w) in points.iter_mut().zip(&mut weights) {
        r[axis] = coordinate;
        *w /= 2.0;
    }
    Ok((points, weights))
}

pub(crate) fn quadrature_counts(basis: &MlhpBasis, leaf: CellId) -> Vec<usize> {
    basis.max_degrees(leaf).iter().map(|p| p + 1).collect()
}

fn checked(value: f64, element: CellId, x: &[f64]) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(non_finite(element, x))
    }
}

/// Element matrix (row-major) and vector for one leaf.
type ElementSystem = (Vec<f64>, Vec<f64>);

/// Integrates every leaf with `kernel` and scatters the results in leaf
/// order, so the outcome does not depend on `execution`.
fn assemble_elements<F>(basis: &MlhpBasis, execution: Execution, kernel: F) -> Result<(SparseMatrixCsr, Vec<f64>)>
where
    F: Fn(CellId, &mut ShapeEvaluator, &mut [f64], &mut [f64]) -> Result<()> + Sync,
{
    let mut matrix = allocate_sparsity(basis.location_maps(), basis.n_dofs())?;
    let mut rhs = vec![0.0; basis.n_dofs()];
    let leaves = basis.mesh().leaves();

    let integrate = |evaluator: &mut ShapeEvaluator, leaf: CellId| -> Result<ElementSystem> {
        let m = basis.location_map(leaf).len();
        let mut ke = vec![0.0; m * m];
        let mut fe = vec![0.0; m];
        kernel(leaf, evaluator, &mut ke, &mut fe)?;
        Ok((ke, fe))
    };
    let mut scatter = |leaf: CellId, (ke, fe): ElementSystem| -> Result<()> {
        let map = basis.location_map(leaf);
        matrix.scatter(map, &ke)?;
        for (&i, v) in map.iter().zip(fe) {
            rhs[i] += v;
        }
        Ok(())
    };

    match execution {
        Execution::Sequential => {
            let mut evaluator = ShapeEvaluator::new();
            for &leaf in leaves {
                let element = integrate(&mut evaluator, leaf)?;
                scatter(leaf, element)?;
            }
        }
        Execution::Parallel => {
            for batch in leaves.chunks(BATCH) {
                let results: Vec<Result<ElementSystem>> = batch
                    .par_iter()
                    .map_init(ShapeEvaluator::new, |evaluator, &leaf| integrate(evaluator, leaf))
                    .collect();
                for (&leaf, element) in batch.iter().zip(results) {
                    scatter(leaf, element?)?;
                }
            }
        }
    }
    Ok((matrix, rhs))
}

/// Adds `weight * (mass * N_a N_b + kappa * grad N_a . grad N_b)`.
fn add_bilinear(ke: &mut [f64], evaluator: &ShapeEvaluator, weight: f64, mass: f64, kappa: f64) {
    let m = evaluator.len();
    let values = evaluator.values();
    for a in 0..m {
        let ga = evaluator.gradient(a);
        let na = values[a];
        for b in a..m {
            let mut v = mass * na * values[b];
            if kappa != 0.0 {
                let gb = evaluator.gradient(b);
                v += kappa * ga.iter().zip(gb).map(|(x, y)| x * y).sum::<f64>();
            }
            let v = weight * v;
            ke[a * m + b] += v;
            if a != b {
                ke[b * m + a] += v;
            }
        }
    }
}

/// Stiffness `∫ kappa ∇N_i·∇N_j`, load `∫ N_i f` and Neumann terms
/// `∫ N_i h` over the external faces in `neumann`.
pub fn assemble_poisson<F, H>(
    basis: &MlhpBasis,
    kappa: f64,
    source: F,
    neumann: &BoundaryFaces,
    flux: H,
    execution: Execution,
) -> Result<LinearSystem>
where
    F: Fn(&[f64]) -> f64 + Sync,
    H: Fn(&[f64]) -> f64 + Sync,
{
    let mesh = basis.mesh();
    let d = mesh.dim();
    if neumann.dim() != d {
        return invalid("face set dimension does not match the mesh");
    }
    let (matrix, rhs) = assemble_elements(basis, execution, |leaf, evaluator, ke, fe| {
        let counts = quadrature_counts(basis, leaf);
        let half = mesh.half_extents(leaf);
        let det: f64 = half.iter().product();
        let (points, weights) = tensor_rule(&counts)?;
        for (r, w) in points.iter().zip(&weights) {
            let x = mesh.map_to_global(leaf, r);
            let f = checked(source(&x), leaf, &x)?;
            evaluator.evaluate(basis, leaf, r);
            let weight = w * det;
            add_bilinear(ke, evaluator, weight, 0.0, kappa);
            for (fi, n) in fe.iter_mut().zip(evaluator.values()) {
                *fi += weight * f * n;
            }
        }
        for axis in 0..d {
            for side in 0..2 {
                if mesh.neighbor(leaf, axis, side) != NO_CELL || !neumann.contains(axis, side) {
                    continue;
                }
                let face_det = det / half[axis];
                let (points, weights) = face_rule(&counts, axis, side)?;
                for (r, w) in points.iter().zip(&weights) {
                    let x = mesh.map_to_global(leaf, r);
                    let h = checked(flux(&x), leaf, &x)?;
                    evaluator.evaluate(basis, leaf, r);
                    for (fi, n) in fe.iter_mut().zip(evaluator.values()) {
                        *fi += w * face_det * h * n;
                    }
                }
            }
        }
        Ok(())
    })?;
    Ok(LinearSystem {
        matrix,
        rhs,
        dirichlet: Vec::new(),
    })
}

/// Mass matrix and load `∫ N_i f` of the L² projection of `f`.
pub fn assemble_l2_projection<F>(basis: &MlhpBasis, f: F, execution: Execution) -> Result<LinearSystem>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let mesh = basis.mesh();
    let (matrix, rhs) = assemble_elements(basis, execution, |leaf, evaluator, ke, fe| {
        let det: f64 = mesh.half_extents(leaf).iter().product();
        let (points, weights) = tensor_rule(&quadrature_counts(basis, leaf))?;
        for (r, w) in points.iter().zip(&weights) {
            let x = mesh.map_to_global(leaf, r);
            let value = checked(f(&x), leaf, &x)?;
            evaluator.evaluate(basis, leaf, r);
            add_bilinear(ke, evaluator, w * det, 1.0, 0.0);
            for (fi, n) in fe.iter_mut().zip(evaluator.values()) {
                *fi += w * det * value * n;
            }
        }
        Ok(())
    })?;
    Ok(LinearSystem {
        matrix,
        rhs,
        dirichlet: Vec::new(),
    })
}

/// Global mass matrix `∫ N_i N_j`.
pub fn assemble_mass(basis: &MlhpBasis, execution: Execution) -> Result<SparseMatrixCsr> {
    Ok(assemble_l2_projection(basis, |_| 0.0, execution)?.matrix)
}

/// Parameters of one θ-method step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThetaStep {
    pub theta: f64,
    pub dt: f64,
    pub capacity: f64,
    pub kappa: f64,
}

/// System for `u^{n+1}` on `new`, given `u^n` (coefficients `old_coeffs`) on
/// `old`. Integrals run over the common refinement of both meshes.
pub fn assemble_theta_step<F0, F1>(
    new: &MlhpBasis,
    old: &MlhpBasis,
    old_coeffs: &[f64],
    step: ThetaStep,
    f_old: F0,
    f_new: F1,
    execution: Execution,
) -> Result<LinearSystem>
where
    F0: Fn(&[f64]) -> f64 + Sync,
    F1: Fn(&[f64]) -> f64 + Sync,
{
    let ThetaStep {
        theta,
        dt,
        capacity,
        kappa,
    } = step;
    if !(0.0..=1.0).contains(&theta) || !(dt > 0.0) {
        return invalid(format!("need 0 <= theta <= 1 and dt > 0, got {theta} and {dt}"));
    }
    if old_coeffs.len() != old.n_dofs() {
        return invalid("old coefficient vector does not match the old basis");
    }
    let pairs = new.mesh().common_refinement(old.mesh())?;
    let mut boxes: Vec<Vec<(CellId, Vec<[f64; 2]>)>> = vec![Vec::new(); new.mesh().n_leaves()];
    for pair in pairs {
        boxes[new.mesh().leaf_index(pair.leaf_a)].push((pair.leaf_b, pair.bounds));
    }

    let mass = capacity / dt;
    let (matrix, rhs) = assemble_elements(new, execution, |leaf, evaluator, ke, fe| {
        let mut old_evaluator = ShapeEvaluator::new();
        let new_counts = quadrature_counts(new, leaf);
        for (old_leaf, bounds) in &boxes[new.mesh().leaf_index(leaf)] {
            let counts: Vec<usize> = new_counts
                .iter()
                .zip(quadrature_counts(old, *old_leaf))
                .map(|(&a, b)| a.max(b))
                .collect();
            let det: f64 = bounds.iter().map(|b| 0.5 * (b[1] - b[0])).product();
            let old_map = old.location_map(*old_leaf);
            let (points, weights) = tensor_rule(&counts)?;
            for (s, w) in points.iter().zip(&weights) {
                let x: Vec<f64> = bounds
                    .iter()
                    .zip(s)
                    .map(|(b, &s)| 0.5 * (b[0] + b[1]) + 0.5 * (b[1] - b[0]) * s)
                    .collect();
                let r_new = new.mesh().map_to_local(leaf, &x);
                let r_old = old.mesh().map_to_local(*old_leaf, &x);
                let source = theta * checked(f_new(&x), leaf, &x)? + (1.0 - theta) * checked(f_old(&x), leaf, &x)?;
                old_evaluator.evaluate(old, *old_leaf, &r_old);
                let (u, grad_u) = old_evaluator.field(old_map, old_coeffs);
                evaluator.evaluate(new, leaf, &r_new);
                let weight = w * det;
                add_bilinear(ke, evaluator, weight, mass, kappa * theta);
                let scalar = mass * u + source;
                for (a, fi) in fe.iter_mut().enumerate() {
                    let flux: f64 = evaluator.gradient(a).iter().zip(&grad_u).map(|(g, gu)| g * gu).sum();
                    *fi += weight * (scalar * evaluator.values()[a] - kappa * (1.0 - theta) * flux);
                }
            }
        }
        Ok(())
    })?;
    Ok(LinearSystem {
        matrix,
        rhs,
        dirichlet: Vec::new(),
    })
}

/// L² projection of `g` onto the traces of the dofs that live on `faces`.
pub fn project_boundary<G>(basis: &MlhpBasis, faces: &BoundaryFaces, g: G) -> Result<Vec<(DofId, f64)>>
where
    G: Fn(&[f64]) -> f64,
{
    let mesh = basis.mesh();
    let d = mesh.dim();
    if faces.dim() != d {
        return invalid("face set dimension does not match the mesh");
    }
    let dofs = basis.boundary_dofs(|axis, side| faces.contains(axis, side));
    if dofs.is_empty() {
        return Ok(Vec::new());
    }
    let mut local = vec![NO_CELL; basis.n_dofs()];
    for (i, &dof) in dofs.iter().enumerate() {
        local[dof] = i;
    }

    let mut element_maps = Vec::new();
    let mut contributions = Vec::new();
    let mut evaluator = ShapeEvaluator::new();
    for &leaf in mesh.leaves() {
        let map = basis.location_map(leaf);
        let selected: Vec<usize> = (0..map.len()).filter(|&i| local[map[i]] != NO_CELL).collect();
        if selected.is_empty() {
            continue;
        }
        let counts = quadrature_counts(basis, leaf);
        let half = mesh.half_extents(leaf);
        let det: f64 = half.iter().product();
        let m = selected.len();
        let mut me = vec![0.0; m * m];
        let mut fe = vec![0.0; m];
        let mut touched = false;
        for axis in 0..d {
            for side in 0..2 {
                if mesh.neighbor(leaf, axis, side) != NO_CELL || !faces.contains(axis, side) {
                    continue;
                }
                touched = true;
                let (points, weights) = face_rule(&counts, axis, side)?;
                for (r, w) in points.iter().zip(&weights) {
                    let x = mesh.map_to_global(leaf, r);
                    let value = checked(g(&x), leaf, &x)?;
                    evaluator.evaluate(basis, leaf, r);
                    let weight = w * det / half[axis];
                    let n = evaluator.values();
                    for (a, &i) in selected.iter().enumerate() {
                        fe[a] += weight * value * n[i];
                        for (b, &j) in selected.iter().enumerate() {
                            me[a * m + b] += weight * n[i] * n[j];
                        }
                    }
                }
            }
        }
        if touched {
            element_maps.push(selected.iter().map(|&i| local[map[i]]).collect::<Vec<_>>());
            contributions.push((me, fe));
        }
    }

    let mut matrix = SparseMatrixCsr::from_location_maps(&element_maps, dofs.len())?;
    let mut rhs = vec![0.0; dofs.len()];
    for (map, (me, fe)) in element_maps.iter().zip(contributions) {
        matrix.scatter(map, &me)?;
        for (&i, v) in map.iter().zip(fe) {
            rhs[i] += v;
        }
    }
    let scale = rhs
        .iter()
        .zip(matrix.diagonal())
        .map(|(b, d)| b * b / d)
        .sum::<f64>()
        .sqrt();
    let options = CgOptions {
        tol: (1e-15 * scale).max(f64::MIN_POSITIVE),
        max_iter: 20 * dofs.len() + 100,
        ..CgOptions::default()
    };
    let report = cg_jacobi(&matrix, &rhs, &options, None)?;
    Ok(dofs.into_iter().zip(report.solution).collect())
}

/// Symmetric elimination of prescribed dofs: known columns move to the right
/// hand side, their rows and columns become identity.
pub fn eliminate(system: &mut LinearSystem, fixed: &[(DofId, f64)]) -> Result<()> {
    let n = system.matrix.size();
    let mut value = vec![None; n];
    for &(dof, v) in fixed {
        if dof >= n {
            return invalid(format!("dof {dof} out of range"));
        }
        value[dof] = Some(v);
    }
    for i in 0..n {
        let (cols, vals) = system.matrix.row_mut(i);
        if let Some(v) = value[i] {
            for (&j, a) in cols.iter().zip(vals.iter_mut()) {
                *a = if j == i { 1.0 } else { 0.0 };
            }
            system.rhs[i] = v;
        } else {
            for (&j, a) in cols.iter().zip(vals.iter_mut()) {
                if let Some(v) = value[j] {
                    system.rhs[i] -= *a * v;
                    *a = 0.0;
                }
            }
        }
    }
    let mut record: Vec<(DofId, f64)> = fixed.to_vec();
    record.sort_by_key(|&(dof, _)| dof);
    system.dirichlet = record;
    Ok(())
}

/// Projects `g` onto the dofs of `faces` and eliminates them from `system`.
pub fn dirichlet_project_and_eliminate<G>(
    system: &mut LinearSystem,
    basis: &MlhpBasis,
    faces: &BoundaryFaces,
    g: G,
) -> Result<()>
where
    G: Fn(&[f64]) -> f64,
{
    let fixed = project_boundary(basis, faces, g)?;
    eliminate(system, &fixed)
}
