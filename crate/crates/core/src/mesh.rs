//! Hierarchical Cartesian meshes stored as flat topology arrays.
//!
//! Every cell of the refinement tree (leaf or not) has a row in the
//! neighbor, parent, level and leaf arrays. A neighbor entry is one of
//!
//! * [`NO_CELL`] for faces on the domain boundary (external boundary),
//! * a cell on the same level (internal interface; may itself be refined),
//! * a coarser leaf (internal boundary, the multi-level hanging face).
//!
//! Refinement appends `2^d` children per marked leaf; cells are never removed.

use std::fmt::Write as _;

use crate::error::{invalid, Error, Result};

pub type CellId = usize;

/// Sentinel for "no cell": missing parent or external face.
pub const NO_CELL: CellId = CellId::MAX;

/// How a cell face connects to the rest of the mesh.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FaceKind {
    External,
    Interface(CellId),
    InternalBoundary(CellId),
}

#[derive(Clone, Debug, PartialEq)]
pub struct HierarchicalMesh {
    dim: usize,
    bounds: Vec<[f64; 2]>,
    base_shape: Vec<usize>,
    neighbors: Vec<CellId>,
    parent: Vec<CellId>,
    level: Vec<usize>,
    is_leaf: Vec<bool>,
    first_child: Vec<CellId>,
    // Integer position of each cell on the lattice of its own level.
    position: Vec<usize>,
    leaves: Vec<CellId>,
    leaf_index: Vec<usize>,
}

/// One cell of the common refinement of two meshes over the same base grid.
#[derive(Clone, Debug, PartialEq)]
pub struct IntegrationCellPair {
    pub leaf_a: CellId,
    pub leaf_b: CellId,
    pub bounds: Vec<[f64; 2]>,
}

impl HierarchicalMesh {
    /// Level-0 Cartesian grid with `base_shape[a]` cells along axis `a`.
    pub fn create_base_grid(bounds: &[[f64; 2]], base_shape: &[usize]) -> Result<Self> {
        let dim = bounds.len();
        if dim == 0 || base_shape.len() != dim {
            return invalid("bounds and base shape must be non-empty and of equal length");
        }
        if bounds.iter().any(|b| !(b[1] > b[0]) || !b[0].is_finite() || !b[1].is_finite()) {
            return invalid(format!("bounds {bounds:?} must have positive extent"));
        }
        if base_shape.iter().any(|&n| n == 0) {
            return invalid(format!("base shape {base_shape:?} must be positive"));
        }

        let n_cells: usize = base_shape.iter().product();
        let mut mesh = Self {
            dim,
            bounds: bounds.to_vec(),
            base_shape: base_shape.to_vec(),
            neighbors: vec![NO_CELL; n_cells * dim * 2],
            parent: vec![NO_CELL; n_cells],
            level: vec![0; n_cells],
            is_leaf: vec![true; n_cells],
            first_child: vec![NO_CELL; n_cells],
            position: vec![0; n_cells * dim],
            leaves: Vec::new(),
            leaf_index: Vec::new(),
        };

        let strides = row_major_strides(base_shape);
        crate::ndarray::for_each_index(base_shape, |index| {
            let cell: usize = index.iter().zip(&strides).map(|(i, s)| i * s).sum();
            mesh.position[cell * dim..(cell + 1) * dim].copy_from_slice(index);
            for axis in 0..dim {
                if index[axis] > 0 {
                    mesh.neighbors[(cell * dim + axis) * 2] = cell - strides[axis];
                }
                if index[axis] + 1 < base_shape[axis] {
                    mesh.neighbors[(cell * dim + axis) * 2 + 1] = cell + strides[axis];
                }
            }
        });
        mesh.rebuild_leaf_numbering();
        Ok(mesh)
    }

    /// New mesh with every cell in `marked` bisected along all axes.
    pub fn refine(&self, marked: &[CellId]) -> Result<Self> {
        let mut marked = marked.to_vec();
        marked.sort_unstable();
        marked.dedup();
        for &cell in &marked {
            if cell >= self.n_cells() {
                return invalid(format!("cell {cell} does not exist"));
            }
            if !self.is_leaf[cell] {
                return invalid(format!("cell {cell} is not a leaf"));
            }
        }

        let mut mesh = self.clone();
        if marked.is_empty() {
            return Ok(mesh);
        }
        let d = self.dim;
        let n_children = 1usize << d;

        // Allocate all children first so that faces between cells refined in
        // this same call resolve to same-level children.
        for &cell in &marked {
            let first = mesh.n_cells();
            mesh.first_child[cell] = first;
            mesh.is_leaf[cell] = false;
            for child in 0..n_children {
                mesh.parent.push(cell);
                mesh.level.push(self.level[cell] + 1);
                mesh.is_leaf.push(true);
                mesh.first_child.push(NO_CELL);
                for axis in 0..d {
                    let bit = child_bit(child, axis, d);
                    mesh.position.push(2 * self.position[cell * d + axis] + bit);
                }
                mesh.neighbors.extend(std::iter::repeat(NO_CELL).take(2 * d));
            }
        }

        for &cell in &marked {
            let first = mesh.first_child[cell];
            for child in 0..n_children {
                let id = first + child;
                for axis in 0..d {
                    let bit = child_bit(child, axis, d);
                    for side in 0..2 {
                        let value = if bit != side {
                            first + flip_bit(child, axis, d)
                        } else {
                            let outer = mesh.neighbor(cell, axis, side);
                            if outer == NO_CELL {
                                NO_CELL
                            } else if mesh.level[outer] == mesh.level[cell] && !mesh.is_leaf[outer]
                            {
                                mesh.first_child[outer] + flip_bit(child, axis, d)
                            } else {
                                outer
                            }
                        };
                        mesh.neighbors[(id * d + axis) * 2 + side] = value;
                    }
                }
            }
        }

        // Cells that saw a refined cell as their coarser neighbor now face one
        // of its children instead. New cells are included: their parent may
        // have copied a coarser neighbor that was refined in this same call.
        for cell in 0..mesh.n_cells() {
            for axis in 0..d {
                for side in 0..2 {
                    let other = mesh.neighbor(cell, axis, side);
                    if other == NO_CELL || mesh.is_leaf[other] || mesh.level[other] >= mesh.level[cell] {
                        continue;
                    }
                    let jump = mesh.level[cell] - mesh.level[other] - 1;
                    let mut child = 0;
                    for b in 0..d {
                        let bit = if b == axis {
                            1 - side
                        } else {
                            (mesh.position[cell * d + b] >> jump) & 1
                        };
                        child |= bit << (d - 1 - b);
                    }
                    mesh.neighbors[(cell * d + axis) * 2 + side] = mesh.first_child[other] + child;
                }
            }
        }

        mesh.rebuild_leaf_numbering();
        Ok(mesh)
    }

    fn rebuild_leaf_numbering(&mut self) {
        self.leaves = (0..self.n_cells()).filter(|&c| self.is_leaf[c]).collect();
        self.leaf_index = vec![NO_CELL; self.n_cells()];
        for (index, &cell) in self.leaves.iter().enumerate() {
            self.leaf_index[cell] = index;
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bounds(&self) -> &[[f64; 2]] {
        &self.bounds
    }

    pub fn base_shape(&self) -> &[usize] {
        &self.base_shape
    }

    pub fn n_cells(&self) -> usize {
        self.parent.len()
    }

    pub fn n_leaves(&self) -> usize {
        self.leaves.len()
    }

    pub fn neighbor(&self, cell: CellId, axis: usize, side: usize) -> CellId {
        self.neighbors[(cell * self.dim + axis) * 2 + side]
    }

    pub fn parent(&self, cell: CellId) -> CellId {
        self.parent[cell]
    }

    pub fn level(&self, cell: CellId) -> usize {
        self.level[cell]
    }

    pub fn is_leaf(&self, cell: CellId) -> bool {
        self.is_leaf[cell]
    }

    pub fn max_level(&self) -> usize {
        self.level.iter().copied().max().unwrap_or(0)
    }

    /// Children of `cell` in lexicographic order, empty for leaves.
    pub fn children(&self, cell: CellId) -> std::ops::Range<CellId> {
        match self.first_child[cell] {
            NO_CELL => 0..0,
            first => first..first + (1 << self.dim),
        }
    }

    /// Leaf cell ids; position in this slice is the element (leaf) index.
    pub fn leaves(&self) -> &[CellId] {
        &self.leaves
    }

    /// Element index of a leaf, [`NO_CELL`] for refined cells.
    pub fn leaf_index(&self, cell: CellId) -> usize {
        self.leaf_index[cell]
    }

    /// Position of `cell` on the integer lattice of its level.
    pub fn lattice_position(&self, cell: CellId) -> &[usize] {
        &self.position[cell * self.dim..(cell + 1) * self.dim]
    }

    pub fn face_kind(&self, cell: CellId, axis: usize, side: usize) -> FaceKind {
        match self.neighbor(cell, axis, side) {
            NO_CELL => FaceKind::External,
            other if self.level[other] == self.level[cell] => FaceKind::Interface(other),
            other => FaceKind::InternalBoundary(other),
        }
    }

    /// Edge length of cells on `level` along `axis`.
    pub fn cell_size(&self, level: usize, axis: usize) -> f64 {
        let [lo, hi] = self.bounds[axis];
        (hi - lo) / self.base_shape[axis] as f64 / (1u64 << level) as f64
    }

    /// Axis-aligned bounding box of a cell.
    pub fn cell_bounds(&self, cell: CellId) -> Vec<[f64; 2]> {
        let level = self.level[cell];
        (0..self.dim)
            .map(|axis| {
                let [lo, hi] = self.bounds[axis];
                let n = (self.base_shape[axis] << level) as f64;
                let i = self.position[cell * self.dim + axis] as f64;
                let at = |k: f64| if k == n { hi } else { lo + (hi - lo) * (k / n) };
                [at(i), at(i + 1.0)]
            })
            .collect()
    }

    /// Half the edge lengths of a cell (the diagonal of its Jacobian).
    pub fn half_extents(&self, cell: CellId) -> Vec<f64> {
        (0..self.dim)
            .map(|axis| 0.5 * self.cell_size(self.level[cell], axis))
            .collect()
    }

    pub fn map_to_global(&self, cell: CellId, local: &[f64]) -> Vec<f64> {
        self.cell_bounds(cell)
            .iter()
            .zip(local)
            .map(|(b, &r)| if r == 1.0 { b[1] } else { b[0] + 0.5 * (r + 1.0) * (b[1] - b[0]) })
            .collect()
    }

    pub fn map_to_local(&self, cell: CellId, global: &[f64]) -> Vec<f64> {
        self.cell_bounds(cell)
            .iter()
            .zip(global)
            .map(|(b, &x)| (2.0 * x - b[0] - b[1]) / (b[1] - b[0]))
            .collect()
    }

    fn root_at(&self, index: &[usize]) -> CellId {
        let strides = row_major_strides(&self.base_shape);
        index.iter().zip(&strides).map(|(i, s)| i * s).sum()
    }

    /// Leaf containing `x` and the local coordinates of `x` in it. Points on
    /// shared faces go to the cell with the smaller id at every level.
    pub fn find_leaf(&self, x: &[f64]) -> Result<(CellId, Vec<f64>)> {
        if x.len() != self.dim {
            return invalid(format!("point has dimension {}, mesh {}", x.len(), self.dim));
        }
        let outside = x
            .iter()
            .zip(&self.bounds)
            .any(|(&xi, b)| !(xi >= b[0] && xi <= b[1]));
        if outside {
            return Err(Error::OutsideDomain { point: x.to_vec() });
        }

        let mut root = vec![0; self.dim];
        let mut local = vec![0.0; self.dim];
        for axis in 0..self.dim {
            let [lo, hi] = self.bounds[axis];
            let n = self.base_shape[axis];
            let t = (x[axis] - lo) / (hi - lo) * n as f64;
            let index = if t <= 0.0 { 0 } else { (t.ceil() as usize).saturating_sub(1).min(n - 1) };
            root[axis] = index;
            local[axis] = (2.0 * (t - index as f64) - 1.0).clamp(-1.0, 1.0);
        }

        let mut cell = self.root_at(&root);
        while !self.is_leaf[cell] {
            let mut child = 0;
            for (axis, r) in local.iter_mut().enumerate() {
                let bit = usize::from(*r > 0.0);
                child |= bit << (self.dim - 1 - axis);
                *r = if bit == 1 { 2.0 * *r - 1.0 } else { 2.0 * *r + 1.0 };
            }
            cell = self.first_child[cell] + child;
        }
        Ok((cell, local))
    }

    /// Leaves of the union refinement tree of `self` and `other`, each paired
    /// with the leaf of either mesh that contains it.
    pub fn common_refinement(&self, other: &Self) -> Result<Vec<IntegrationCellPair>> {
        if self.bounds != other.bounds || self.base_shape != other.base_shape {
            return invalid("meshes do not share the same base grid");
        }
        let mut pairs = Vec::new();
        let n_roots: usize = self.base_shape.iter().product();
        for root in 0..n_roots {
            self.collect_pairs(other, root, root, &mut pairs);
        }
        Ok(pairs)
    }

    fn collect_pairs(&self, other: &Self, a: CellId, b: CellId, out: &mut Vec<IntegrationCellPair>) {
        match (self.is_leaf[a], other.is_leaf[b]) {
            (true, true) => {
                let bounds = if self.level[a] >= other.level[b] {
                    self.cell_bounds(a)
                } else {
                    other.cell_bounds(b)
                };
                out.push(IntegrationCellPair { leaf_a: a, leaf_b: b, bounds });
            }
            (true, false) => {
                for child in other.children(b) {
                    self.collect_pairs(other, a, child, out);
                }
            }
            (false, true) => {
                for child in self.children(a) {
                    self.collect_pairs(other, child, b, out);
                }
            }
            (false, false) => {
                for (ca, cb) in self.children(a).zip(other.children(b)) {
                    self.collect_pairs(other, ca, cb, out);
                }
            }
        }
    }

    /// Text dump, one cell per line: id, parent, level, leaf flag, then the
    /// `2d` neighbor ids (axis-major, first face before second). Missing cells
    /// print as -1.
    pub fn dump(&self) -> String {
        let id = |c: CellId| if c == NO_CELL { -1 } else { c as i64 };
        let mut out = String::new();
        for cell in 0..self.n_cells() {
            write!(
                out,
                "{} {} {} {}",
                cell,
                id(self.parent[cell]),
                self.level[cell],
                u8::from(self.is_leaf[cell])
            )
            .unwrap();
            for slot in 0..2 * self.dim {
                write!(out, " {}", id(self.neighbors[cell * 2 * self.dim + slot])).unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Bit of child `child` along `axis` (axis 0 is the most significant bit).
pub(crate) fn child_bit(child: usize, axis: usize, dim: usize) -> usize {
    (child >> (dim - 1 - axis)) & 1
}

fn flip_bit(child: usize, axis: usize, dim: usize) -> usize {
    child ^ (1 << (dim - 1 - axis))
}

fn row_major_strides(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![1; shape.len()];
    for axis in (0..shape.len().saturating_sub(1)).rev() {
        strides[axis] = strides[axis + 1] * shape[axis + 1];
    }
    strides
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(dim: usize) -> Vec<[f64; 2]> {
        vec![[0.0, 1.0]; dim]
    }

    fn row(mesh: &HierarchicalMesh, cell: CellId) -> Vec<CellId> {
        (0..mesh.dim())
            .flat_map(|a| [mesh.neighbor(cell, a, 0), mesh.neighbor(cell, a, 1)])
            .collect()
    }

    #[test]
    fn base_grid_1d() {
        let mesh = HierarchicalMesh::create_base_grid(&unit(1), &[3]).unwrap();
        assert_eq!(row(&mesh, 0), vec![NO_CELL, 1]);
        assert_eq!(row(&mesh, 1), vec![0, 2]);
        assert_eq!(row(&mesh, 2), vec![1, NO_CELL]);
        assert_eq!(mesh.n_leaves(), 3);
    }

    #[test]
    fn base_grid_2d_axis_zero_slowest() {
        let mesh = HierarchicalMesh::create_base_grid(&unit(2), &[2, 2]).unwrap();
        assert_eq!(row(&mesh, 0), vec![NO_CELL, 2, NO_CELL, 1]);
        assert_eq!(row(&mesh, 3), vec![1, NO_CELL, 2, NO_CELL]);
    }

    #[test]
    fn base_grid_3d_single_cell() {
        let mesh = HierarchicalMesh::create_base_grid(&unit(3), &[1, 1, 1]).unwrap();
        assert!(row(&mesh, 0).iter().all(|&n| n == NO_CELL));
    }

    #[test]
    fn base_grid_rejects_bad_input() {
        assert!(HierarchicalMesh::create_base_grid(&[[0.0, 0.0]], &[1]).is_err());
        assert!(HierarchicalMesh::create_base_grid(&[[1.0, 0.0]], &[1]).is_err());
        assert!(HierarchicalMesh::create_base_grid(&unit(2), &[2, 0]).is_err());
        assert!(HierarchicalMesh::create_base_grid(&unit(2), &[2]).is_err());
    }

    #[test]
    fn refine_1d_hanging_neighbor() {
        let mesh = HierarchicalMesh::create_base_grid(&unit(1), &[2]).unwrap();
        let mesh = mesh.refine(&[0]).unwrap();
        assert_eq!(mesh.n_cells(), 4);
        assert_eq!(row(&mesh, 2), vec![NO_CELL, 3]);
        assert_eq!(row(&mesh, 3), vec![2, 1]);
        assert_eq!(mesh.parent(3), 0);
        assert_eq!(mesh.leaves(), &[1, 2, 3]);
    }

    #[test]
    fn refine_nothing_is_identity() {
        let mesh = HierarchicalMesh::create_base_grid(&unit(2), &[2, 2]).unwrap();
        assert_eq!(mesh.refine(&[]).unwrap(), mesh);
    }

    #[test]
    fn refine_rejects_non_leaves() {
        let mesh = HierarchicalMesh::create_base_grid(&unit(1), &[2]).unwrap();
        let refined = mesh.refine(&[0]).unwrap();
        assert!(refined.refine(&[0]).is_err());
        assert!(refined.refine(&[17]).is_err());
    }

    #[test]
    fn later_refinement_updates_finer_neighbors() {
        // Refine the left cell twice, then the right one: the level-2 child
        // touching the right cell must now point at the right cell's child.
        let mesh = HierarchicalMesh::create_base_grid(&unit(1), &[2]).unwrap();
        let mesh = mesh.refine(&[0]).unwrap().refine(&[3]).unwrap();
        assert_eq!(mesh.neighbor(5, 0, 1), 1);
        let mesh = mesh.refine(&[1]).unwrap();
        assert_eq!(mesh.neighbor(5, 0, 1), 6);
        assert_eq!(mesh.neighbor(3, 0, 1), 6);
        assert_eq!(mesh.neighbor(6, 0, 0), 3);
    }

    #[test]
    fn find_leaf_and_ties() {
        let mesh = HierarchicalMesh::create_base_grid(&unit(2), &[2, 2]).unwrap();
        let (cell, r) = mesh.find_leaf(&[0.25, 0.75]).unwrap();
        assert_eq!(cell, 1);
        assert_eq!(r, vec![0.0, 0.0]);
        let (cell, r) = mesh.find_leaf(&[0.5, 0.25]).unwrap();
        assert_eq!(cell, 0);
        assert_eq!(r, vec![1.0, 0.0]);
        assert!(matches!(mesh.find_leaf(&[1.5, 0.0]), Err(Error::OutsideDomain { .. })));
    }

    #[test]
    fn common_refinement_1d() {
        let a = HierarchicalMesh::create_base_grid(&unit(1), &[2]).unwrap();
        let b = a.refine(&[0]).unwrap();
        let pairs = a.common_refinement(&b).unwrap();
        let summary: Vec<_> = pairs.iter().map(|p| (p.leaf_a, p.leaf_b, p.bounds[0])).collect();
        assert_eq!(
            summary,
            vec![(0, 2, [0.0, 0.25]), (0, 3, [0.25, 0.5]), (1, 1, [0.5, 1.0])]
        );

        let same = b.common_refinement(&b).unwrap();
        assert_eq!(same.len(), b.n_leaves());
        let other = HierarchicalMesh::create_base_grid(&unit(1), &[3]).unwrap();
        assert!(a.common_refinement(&other).is_err());
    }

    #[test]
    fn dump_prints_sentinel_as_minus_one() {
        let mesh = HierarchicalMesh::create_base_grid(&unit(1), &[2]).unwrap();
        assert_eq!(mesh.dump(), "0 -1 0 1 -1 1\n1 -1 0 1 0 -1\n");
    }
}
