#![allow(dead_code)]

use mlhp::dofmap::{initialize_global_indices, NO_DOF};
use mlhp::mesh::{HierarchicalMesh, NO_CELL};
use mlhp::ndarray::for_each_index;
use mlhp::{CellId, MlhpBasis, Space, SparseMatrixCsr};
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random hierarchical mesh: small base grid, up to three refinement rounds.
pub fn random_mesh(rng: &mut impl Rng, dim: usize) -> HierarchicalMesh {
    let bounds: Vec<[f64; 2]> = (0..dim)
        .map(|_| {
            let lo = rng.gen_range(-1.0..1.0);
            [lo, lo + rng.gen_range(0.5..2.0)]
        })
        .collect();
    let max_base = if dim == 3 { 2 } else { 3 };
    let shape: Vec<usize> = (0..dim).map(|_| rng.gen_range(1..=max_base)).collect();
    let mut mesh = HierarchicalMesh::create_base_grid(&bounds, &shape).unwrap();
    let rounds = rng.gen_range(1..=3);
    let fraction = if dim == 3 { 0.2 } else { 0.35 };
    for _ in 0..rounds {
        let mut marked: Vec<CellId> = mesh
            .leaves()
            .iter()
            .copied()
            .filter(|_| rng.gen_bool(fraction))
            .collect();
        if marked.is_empty() {
            marked.push(*mesh.leaves().choose(rng).unwrap());
        }
        mesh = mesh.refine(&marked).unwrap();
    }
    mesh
}

/// Random basis with mixed per-leaf degrees up to `max_p`.
pub fn random_basis(rng: &mut impl Rng, dim: usize, max_p: usize, space: Space) -> MlhpBasis {
    let mesh = random_mesh(rng, dim);
    let degrees: Vec<Vec<usize>> = (0..mesh.n_leaves())
        .map(|_| (0..dim).map(|_| rng.gen_range(1..=max_p)).collect())
        .collect();
    MlhpBasis::new(mesh, &degrees, space).unwrap()
}

/// The twenty randomized bases shared by several acceptance criteria.
pub fn twenty_bases() -> Vec<MlhpBasis> {
    let mut rng = rng(20);
    (0..20)
        .map(|i| {
            let dim = [1, 2, 3][i % 3];
            let space = if i % 2 == 0 { Space::Tensor } else { Space::Trunk };
            let max_p = if dim == 3 { 3 } else { 4 };
            random_basis(&mut rng, dim, max_p, space)
        })
        .collect()
}

/// Leaf below `cell` containing `x`, with local coordinates.
pub fn leaf_below(mesh: &HierarchicalMesh, mut cell: CellId, x: &[f64]) -> (CellId, Vec<f64>) {
    loop {
        let r: Vec<f64> = mesh.map_to_local(cell, x).iter().map(|v| v.clamp(-1.0, 1.0)).collect();
        if mesh.is_leaf(cell) {
            return (cell, r);
        }
        let d = mesh.dim();
        let mut child = 0;
        for (axis, v) in r.iter().enumerate() {
            child |= usize::from(*v > 0.0) << (d - 1 - axis);
        }
        cell = mesh.children(cell).start + child;
    }
}

/// Largest relative jump of the field across any interior face, probed at
/// `points` random positions per face and side.
pub fn max_face_jump(basis: &MlhpBasis, coeffs: &[f64], points: usize, rng: &mut impl Rng) -> f64 {
    let mesh = basis.mesh();
    let d = mesh.dim();
    let zero = vec![0; d];
    let mut worst: f64 = 0.0;
    for &leaf in mesh.leaves() {
        for axis in 0..d {
            for side in 0..2 {
                let neighbor = mesh.neighbor(leaf, axis, side);
                if neighbor == NO_CELL {
                    continue;
                }
                for _ in 0..points {
                    let mut r: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
                    r[axis] = if side == 0 { -1.0 } else { 1.0 };
                    let x = mesh.map_to_global(leaf, &r);
                    let mine = basis.evaluate_solution(coeffs, leaf, &r, &zero).unwrap();
                    let (other, mut s) = leaf_below(mesh, neighbor, &x);
                    s[axis] = if side == 0 { 1.0 } else { -1.0 };
                    let theirs = basis.evaluate_solution(coeffs, other, &s, &zero).unwrap();
                    let scale = mine.abs().max(theirs.abs()).max(1.0);
                    worst = worst.max((mine - theirs).abs() / scale);
                }
            }
        }
    }
    worst
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut i: usize) -> usize {
        while self.0[i] != i {
            self.0[i] = self.0[self.0[i]];
            i = self.0[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (a, b) = (self.find(a), self.find(b));
        if a != b {
            self.0[a.max(b)] = a.min(b);
        }
    }
}

/// Checks that the compressed numbering identifies exactly the initial ids
/// that are transitively connected across same-level interfaces.
pub fn closure_matches_union_find(basis: &MlhpBasis) -> bool {
    let mesh = basis.mesh();
    let d = mesh.dim();
    let (initial, n_ids) = initialize_global_indices(basis.masks());
    let mut sets = UnionFind((0..n_ids).collect());
    for cell in 0..mesh.n_cells() {
        for axis in 0..d {
            let other = mesh.neighbor(cell, axis, 1);
            if other == NO_CELL || mesh.level(other) != mesh.level(cell) {
                continue;
            }
            let (a, b) = (&initial[cell], &initial[other]);
            let extent: Vec<usize> = (0..d)
                .filter(|&k| k != axis)
                .map(|k| a.shape()[k].max(b.shape()[k]))
                .collect();
            let mut consistent = true;
            for_each_index(&extent, |reduced| {
                let mut ia = reduced.to_vec();
                ia.insert(axis, 1);
                let mut ib = reduced.to_vec();
                ib.insert(axis, 0);
                let va = a.get_or(&ia, NO_DOF);
                let vb = b.get_or(&ib, NO_DOF);
                match (va == NO_DOF, vb == NO_DOF) {
                    (false, false) => sets.union(va, vb),
                    (true, true) => {}
                    _ => consistent = false,
                }
            });
            if !consistent {
                return false;
            }
        }
    }
    let mut class_to_final = vec![NO_DOF; n_ids];
    let mut final_to_class = vec![NO_DOF; basis.n_dofs()];
    for (init, fin) in initial.iter().zip(basis.location_matrices()) {
        for (&i, &f) in init.data().iter().zip(fin.data()) {
            if (i == NO_DOF) != (f == NO_DOF) {
                return false;
            }
            if i == NO_DOF {
                continue;
            }
            let class = sets.find(i);
            if class_to_final[class] == NO_DOF {
                class_to_final[class] = f;
            }
            if final_to_class[f] == NO_DOF {
                final_to_class[f] = class;
            }
            if class_to_final[class] != f || final_to_class[f] != class {
                return false;
            }
        }
    }
    true
}

/// Coefficients interpolating a multilinear `target` with linear modes only,
/// level by level (hierarchical surpluses at cell vertices).
pub fn interpolate_multilinear(basis: &MlhpBasis, target: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let mesh = basis.mesh();
    let d = mesh.dim();
    let mut coeffs = vec![0.0; basis.n_dofs()];
    let mut done = vec![false; basis.n_dofs()];
    for level in 0..=mesh.max_level() {
        let mut updates = Vec::new();
        for cell in (0..mesh.n_cells()).filter(|&c| mesh.level(c) == level) {
            let matrix = &basis.location_matrices()[cell];
            let bounds = mesh.cell_bounds(cell);
            for_each_index(&vec![2; d], |alpha| {
                let dof = matrix.get_or(alpha, NO_DOF);
                if dof == NO_DOF || done[dof] {
                    return;
                }
                done[dof] = true;
                let vertex: Vec<f64> = alpha.iter().zip(&bounds).map(|(&a, b)| b[a]).collect();
                updates.push((dof, vertex));
            });
        }
        let current: Vec<f64> = updates
            .iter()
            .map(|(_, v)| basis.evaluate_at(&coeffs, v).unwrap())
            .collect();
        for ((dof, vertex), value) in updates.iter().zip(current) {
            coeffs[*dof] = target(vertex) - value;
        }
    }
    coeffs
}

pub fn dense(matrix: &SparseMatrixCsr) -> DMatrix<f64> {
    let n = matrix.size();
    DMatrix::from_row_slice(n, n, &matrix.to_dense())
}

/// Uniform random point inside a leaf, local coordinates.
pub fn random_local(rng: &mut impl Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// All vertices of all leaves, in global coordinates.
pub fn leaf_vertices(mesh: &HierarchicalMesh) -> Vec<Vec<f64>> {
    let d = mesh.dim();
    let mut out = Vec::new();
    for &leaf in mesh.leaves() {
        let bounds = mesh.cell_bounds(leaf);
        for_each_index(&vec![2; d], |alpha| {
            out.push(alpha.iter().zip(&bounds).map(|(&a, b)| b[a]).collect());
        });
    }
    out
}
