//! Model problems: a corner singularity and a moving Gaussian heat source.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::{quadrature_counts, tensor_rule, BoundaryFaces, Execution};
use crate::basis::{non_finite, MlhpBasis, ShapeEvaluator};
use crate::error::{invalid, Result};
use crate::masks::Space;
use crate::mesh::{CellId, HierarchicalMesh};
use crate::polynomials::gauss_legendre_rule;

/// Polynomial degree distribution over refinement levels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Grading {
    Uniform,
    Linear,
}

fn radius(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `sqrt(|x|)`.
pub fn corner_solution(x: &[f64]) -> f64 {
    radius(x).sqrt()
}

/// `x / (2 |x|^{3/2})`; non-finite at the origin.
pub fn corner_gradient(x: &[f64]) -> Vec<f64> {
    let r = radius(x);
    let scale = 0.5 * r.powf(-1.5);
    x.iter().map(|v| v * scale).collect()
}

/// `-Δ sqrt(|x|) = (3 - 2d)/4 |x|^{-3/2}`; non-finite at the origin.
pub fn corner_source(x: &[f64]) -> f64 {
    let d = x.len() as f64;
    (3.0 - 2.0 * d) / 4.0 * radius(x).powf(-1.5)
}

/// Unit cube with a 2-per-axis base grid, refined `depth - 1` times towards
/// the origin.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CornerProblem {
    pub dim: usize,
    pub depth: usize,
    pub grading: Grading,
}

impl CornerProblem {
    pub fn new(dim: usize, depth: usize, grading: Grading) -> Result<Self> {
        if dim < 2 || depth < 1 {
            return invalid(format!("corner problem needs dim >= 2 and depth >= 1, got {dim} and {depth}"));
        }
        Ok(Self { dim, depth, grading })
    }

    pub fn expected_leaves(&self) -> usize {
        self.depth * ((1 << self.dim) - 1) + 1
    }

    pub fn mesh(&self) -> Result<HierarchicalMesh> {
        let mut mesh = HierarchicalMesh::create_base_grid(&vec![[0.0, 1.0]; self.dim], &vec![2; self.dim])?;
        let origin = vec![0.0; self.dim];
        for _ in 1..self.depth {
            let (leaf, _) = mesh.find_leaf(&origin)?;
            mesh = mesh.refine(&[leaf])?;
        }
        Ok(mesh)
    }

    pub fn degree_on_level(&self, level: usize) -> usize {
        match self.grading {
            Grading::Uniform => self.depth + 1,
            Grading::Linear => (self.depth + 1).saturating_sub(level).max(1),
        }
    }

    pub fn leaf_degrees(&self, mesh: &HierarchicalMesh) -> Vec<Vec<usize>> {
        mesh.leaves()
            .iter()
            .map(|&leaf| vec![self.degree_on_level(mesh.level(leaf)); self.dim])
            .collect()
    }

    pub fn basis(&self, space: Space) -> Result<MlhpBasis> {
        let mesh = self.mesh()?;
        let degrees = self.leaf_degrees(&mesh);
        MlhpBasis::new(mesh, &degrees, space)
    }

    /// Faces on the coordinate planes.
    pub fn neumann_faces(&self) -> BoundaryFaces {
        BoundaryFaces::side(self.dim, 0)
    }

    pub fn dirichlet_faces(&self) -> BoundaryFaces {
        BoundaryFaces::side(self.dim, 1)
    }
}

/// Heat conduction `c u_t - κ Δu = I(t) q(x - p(t))` with a normalized
/// Gaussian `q` of width `σ` moving on a straight line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransientProblem {
    pub bounds: Vec<[f64; 2]>,
    pub end_time: f64,
    pub capacity: f64,
    pub kappa: f64,
    pub sigma: f64,
    /// Intensity after the ramp.
    pub intensity: f64,
    /// Duration of the smooth intensity ramp starting at zero.
    pub ramp_time: f64,
    pub path_start: Vec<f64>,
    pub path_end: Vec<f64>,
    pub initial: f64,
}

impl TransientProblem {
    /// Unit cube, source moving along the centre line of the upper face of
    /// the last axis.
    pub fn default_for(dim: usize) -> Self {
        let mut path_start = vec![0.5; dim];
        let mut path_end = vec![0.5; dim];
        path_start[0] = 0.25;
        path_end[0] = 0.75;
        path_start[dim - 1] = 1.0;
        path_end[dim - 1] = 1.0;
        Self {
            bounds: vec![[0.0, 1.0]; dim],
            end_time: 1.0,
            capacity: 1.0,
            kappa: 1.0,
            sigma: 0.05,
            intensity: 1.0,
            ramp_time: 0.25,
            path_start,
            path_end,
            initial: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if d == 0 || self.path_start.len() != d || self.path_end.len() != d {
            return invalid("path endpoints must match the domain dimension");
        }
        if !(self.sigma > 0.0 && self.capacity > 0.0 && self.kappa > 0.0 && self.end_time > 0.0) {
            return invalid("sigma, capacity, kappa and end time must be positive");
        }
        if !(self.ramp_time >= 0.0) {
            return invalid("ramp time must be non-negative");
        }
        Ok(())
    }

    /// Quintic smoothstep from 0 to `intensity` over the ramp.
    pub fn intensity_at(&self, t: f64) -> f64 {
        if self.ramp_time <= 0.0 || t >= self.ramp_time {
            return self.intensity;
        }
        let s = (t / self.ramp_time).max(0.0);
        self.intensity * s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
    }

    pub fn path(&self, t: f64) -> Vec<f64> {
        let s = t / self.end_time;
        self.path_start
            .iter()
            .zip(&self.path_end)
            .map(|(a, b)| a + s * (b - a))
            .collect()
    }

    /// Width of the source convolved with the heat kernel after time `s`.
    pub fn width(&self, s: f64) -> f64 {
        (self.sigma * self.sigma + 2.0 * self.kappa * s / self.capacity).sqrt()
    }

    fn gaussian(&self, x: &[f64], center: &[f64], width: f64) -> f64 {
        let d = x.len() as i32;
        let r2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
        (-r2 / (2.0 * width * width)).exp() / ((2.0 * PI).powf(0.5 * d as f64) * width.powi(d))
    }

    /// Normalized source shape centred at `center`.
    pub fn shape(&self, x: &[f64], center: &[f64]) -> f64 {
        self.gaussian(x, center, self.sigma)
    }

    pub fn source(&self, x: &[f64], t: f64) -> f64 {
        self.intensity_at(t) * self.shape(x, &self.path(t))
    }

    /// Response at `x` after time `s` to a unit pulse emitted at `center`.
    pub fn kernel(&self, x: &[f64], center: &[f64], s: f64) -> f64 {
        self.gaussian(x, center, self.width(s)) / self.capacity
    }

    /// Solution on the unbounded domain, time integral by composite
    /// 30-point Gauss rules on intervals of length at most 1/100.
    pub fn reference(&self, x: &[f64], t: f64) -> f64 {
        self.reference_with(x, t, 0.01)
    }

    pub fn reference_with(&self, x: &[f64], t: f64, max_interval: f64) -> f64 {
        if t <= 0.0 {
            return self.initial;
        }
        let rule = gauss_legendre_rule(30).expect("fixed rule size");
        let n = (t / max_interval).ceil().max(1.0) as usize;
        let h = t / n as f64;
        let mut total = 0.0;
        for i in 0..n {
            let a = i as f64 * h;
            total += rule.integrate(a, a + h, |tau| {
                self.intensity_at(tau) * self.kernel(x, &self.path(tau), t - tau)
            });
        }
        total + self.initial
    }

    /// The upper face of the last axis, where the path runs.
    pub fn neumann_faces(&self) -> BoundaryFaces {
        let mut faces = BoundaryFaces::none(self.dim());
        faces.insert(self.dim() - 1, 1);
        faces
    }

    pub fn dirichlet_faces(&self) -> BoundaryFaces {
        self.neumann_faces().complement()
    }
}

/// Refines `mesh` so that every leaf within `radius_factor` cell sizes of a
/// target point is at least at the target's depth.
pub fn refine_towards(
    mut mesh: HierarchicalMesh,
    targets: &[(Vec<f64>, usize)],
    radius_factor: f64,
) -> Result<HierarchicalMesh> {
    let max_depth = targets.iter().map(|t| t.1).max().unwrap_or(0);
    for level in 0..max_depth {
        let h: Vec<f64> = (0..mesh.dim()).map(|a| mesh.cell_size(level, a)).collect();
        let reach = radius_factor * h.iter().cloned().fold(0.0, f64::max);
        let marked: Vec<CellId> = mesh
            .leaves()
            .iter()
            .copied()
            .filter(|&leaf| mesh.level(leaf) == level)
            .filter(|&leaf| {
                let bounds = mesh.cell_bounds(leaf);
                targets
                    .iter()
                    .any(|(p, depth)| *depth > level && box_distance(&bounds, p) <= reach)
            })
            .collect();
        if marked.is_empty() {
            continue;
        }
        mesh = mesh.refine(&marked)?;
    }
    Ok(mesh)
}

fn box_distance(bounds: &[[f64; 2]], p: &[f64]) -> f64 {
    bounds
        .iter()
        .zip(p)
        .map(|(b, &x)| {
            let d = (b[0] - x).max(x - b[1]).max(0.0);
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Gauss points of every leaf with `p + 1` points per axis, in global
/// coordinates, for error integrals.
#[derive(Clone, Debug)]
pub struct ErrorQuadrature {
    leaves: Vec<CellId>,
    /// Start of each leaf's points; one extra entry at the end.
    offsets: Vec<usize>,
    local: Vec<Vec<f64>>,
    global: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl ErrorQuadrature {
    pub fn new(basis: &MlhpBasis) -> Result<Self> {
        let mesh = basis.mesh();
        let mut quadrature = Self {
            leaves: mesh.leaves().to_vec(),
            offsets: vec![0],
            local: Vec::new(),
            global: Vec::new(),
            weights: Vec::new(),
        };
        for &leaf in mesh.leaves() {
            let det: f64 = mesh.half_extents(leaf).iter().product();
            let (points, weights) = tensor_rule(&quadrature_counts(basis, leaf))?;
            for (r, w) in points.into_iter().zip(weights) {
                quadrature.global.push(mesh.map_to_global(leaf, &r));
                quadrature.local.push(r);
                quadrature.weights.push(w * det);
            }
            quadrature.offsets.push(quadrature.weights.len());
        }
        Ok(quadrature)
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.global
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Evaluates `f` at every point, in point order.
    pub fn sample<F>(&self, f: F, execution: Execution) -> Vec<f64>
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        match execution {
            Execution::Sequential => self.global.iter().map(|x| f(x)).collect(),
            Execution::Parallel => self.global.par_iter().map(|x| f(x)).collect(),
        }
    }

    /// Sum over elements of `∫ integrand(u_h, ∇u_h, point index)`.
    fn integrate<F>(&self, basis: &MlhpBasis, coeffs: &[f64], integrand: F, execution: Execution) -> Result<f64>
    where
        F: Fn(f64, &[f64], usize) -> f64 + Sync,
    {
        if coeffs.len() != basis.n_dofs() {
            return invalid("coefficient vector does not match the basis");
        }
        let element = |evaluator: &mut ShapeEvaluator, e: usize| -> Result<f64> {
            let leaf = self.leaves[e];
            let map = basis.location_map(leaf);
            let mut sum = 0.0;
            for i in self.offsets[e]..self.offsets[e + 1] {
                evaluator.evaluate(basis, leaf, &self.local[i]);
                let (u, grad) = evaluator.field(map, coeffs);
                let value = integrand(u, &grad, i);
                if !value.is_finite() {
                    return Err(non_finite(leaf, &self.global[i]));
                }
                sum += self.weights[i] * value;
            }
            Ok(sum)
        };
        let parts: Vec<Result<f64>> = match execution {
            Execution::Sequential => {
                let mut evaluator = ShapeEvaluator::new();
                (0..self.leaves.len()).map(|e| element(&mut evaluator, e)).collect()
            }
            Execution::Parallel => (0..self.leaves.len())
                .into_par_iter()
                .map_init(ShapeEvaluator::new, element)
                .collect(),
        };
        parts.into_iter().sum()
    }

    /// `‖u_h - u‖_{L²}` for exact values sampled at [`Self::points`].
    pub fn l2_error(&self, basis: &MlhpBasis, coeffs: &[f64], exact: &[f64], execution: Execution) -> Result<f64> {
        if exact.len() != self.len() {
            return invalid("exact values do not match the quadrature points");
        }
        let squared = self.integrate(basis, coeffs, |u, _, i| (u - exact[i]).powi(2), execution)?;
        Ok(squared.max(0.0).sqrt())
    }

    /// `sqrt(∫ κ |∇u_h - ∇u|²)` with the exact gradient given as a function.
    pub fn energy_error<G>(
        &self,
        basis: &MlhpBasis,
        coeffs: &[f64],
        kappa: f64,
        gradient: G,
        execution: Execution,
    ) -> Result<f64>
    where
        G: Fn(&[f64]) -> Vec<f64> + Sync,
    {
        let squared = self.integrate(
            basis,
            coeffs,
            |_, grad, i| {
                let exact = gradient(&self.global[i]);
                kappa * grad.iter().zip(&exact).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
            },
            execution,
        )?;
        Ok(squared.max(0.0).sqrt())
    }
}

pub fn l2_error<F>(basis: &MlhpBasis, coeffs: &[f64], exact: F, execution: Execution) -> Result<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let quadrature = ErrorQuadrature::new(basis)?;
    let values = quadrature.sample(exact, execution);
    quadrature.l2_error(basis, coeffs, &values, execution)
}

pub fn energy_error<G>(basis: &MlhpBasis, coeffs: &[f64], kappa: f64, gradient: G, execution: Execution) -> Result<f64>
where
    G: Fn(&[f64]) -> Vec<f64> + Sync,
{
    ErrorQuadrature::new(basis)?.energy_error(basis, coeffs, kappa, gradient, execution)
}

/// Space–time norm from spatial norms at equally spaced times, trapezoidal
/// rule on the squares.
pub fn space_time_norm(spatial: &[f64], dt: f64) -> f64 {
    let n = spatial.len();
    if n < 2 {
        return 0.0;
    }
    let mut sum = 0.0;
    for (i, e) in spatial.iter().enumerate() {
        let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        sum += w * e * e;
    }
    (sum * dt).sqrt()
}
