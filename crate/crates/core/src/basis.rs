//! Evaluation of multi-level hp shape functions and discrete fields.
//!
//! Shape functions of an element are collected by walking from the leaf to
//! its root. On each cell the active tensor products are appended in
//! row-major order; the local coordinate is then mapped into the parent,
//! which halves derivatives once per level climbed.

use crate::dofmap::{create_location_matrices, element_location_maps, DofId, LocationMap, LocationMatrix};
use crate::error::{invalid, Error, Result};
use crate::masks::{create_mlhp_masks, Space, TensorMask};
use crate::mesh::{CellId, HierarchicalMesh, NO_CELL};
use crate::polynomials::integrated_legendre_into;

/// Shape function values (or derivatives) of one element in location-map order.
#[derive(Clone, Debug, PartialEq)]
pub struct ShapeEvaluation {
    pub values: Vec<f64>,
    pub element: CellId,
    pub r: Vec<f64>,
    pub k: Vec<usize>,
}

/// Coordinate offset `c` used when mapping a child coordinate to its parent:
/// -1 for the lower child along `axis`, +1 for the upper one.
fn parent_offset(mesh: &HierarchicalMesh, cell: CellId, axis: usize) -> f64 {
    let before = mesh.neighbor(cell, axis, 0);
    if before == NO_CELL || mesh.parent(before) != mesh.parent(cell) {
        -1.0
    } else {
        1.0
    }
}

fn check_leaf(mesh: &HierarchicalMesh, element: CellId) -> Result<()> {
    if element >= mesh.n_cells() || !mesh.is_leaf(element) {
        return invalid(format!("cell {element} is not a leaf"));
    }
    Ok(())
}

/// All active shape functions of `element` at local coordinates `r`,
/// differentiated `k[a]` times along axis `a` (in leaf coordinates).
pub fn evaluate_shapes(
    mesh: &HierarchicalMesh,
    masks: &[TensorMask],
    element: CellId,
    r: &[f64],
    k: &[usize],
) -> Result<ShapeEvaluation> {
    check_leaf(mesh, element)?;
    let d = mesh.dim();
    if r.len() != d || k.len() != d {
        return invalid("coordinate and derivative tuples must match the mesh dimension");
    }
    if let Some(&bad) = k.iter().find(|&&k| k > 1) {
        return invalid(format!("derivative order {bad} not supported"));
    }
    if r.iter().any(|x| !x.is_finite()) {
        return invalid(format!("local coordinates {r:?} are not finite"));
    }

    let k_sum: usize = k.iter().sum();
    let mut coords = r.to_vec();
    let mut values = Vec::new();
    let mut levels = 0;
    let mut polys: Vec<Vec<f64>> = vec![Vec::new(); d];
    let mut scratch: Vec<f64> = Vec::new();
    let mut cell = element;
    while cell != NO_CELL {
        let mask = &masks[cell];
        let shape = mask.shape();
        if shape.iter().all(|&s| s > 0) {
            for axis in 0..d {
                let n = shape[axis].max(2);
                polys[axis].resize(n, 0.0);
                scratch.resize(n, 0.0);
                if k[axis] == 0 {
                    integrated_legendre_into(coords[axis], &mut polys[axis], &mut scratch);
                } else {
                    integrated_legendre_into(coords[axis], &mut scratch, &mut polys[axis]);
                }
            }
            let scale = 0.5f64.powi((levels * k_sum) as i32);
            let mut alpha = vec![0; d];
            for &active in mask.data() {
                if active {
                    let mut value = scale;
                    for axis in 0..d {
                        value *= polys[axis][alpha[axis]];
                    }
                    values.push(value);
                }
                advance(&mut alpha, shape);
            }
        }
        for (axis, x) in coords.iter_mut().enumerate() {
            *x = (*x + parent_offset(mesh, cell, axis)) / 2.0;
        }
        levels += 1;
        cell = mesh.parent(cell);
    }
    Ok(ShapeEvaluation {
        values,
        element,
        r: r.to_vec(),
        k: k.to_vec(),
    })
}

fn advance(alpha: &mut [usize], shape: &[usize]) {
    for axis in (0..alpha.len()).rev() {
        alpha[axis] += 1;
        if alpha[axis] < shape[axis] {
            return;
        }
        alpha[axis] = 0;
    }
}

/// Per-axis maximum degree over the element and its ancestors, at least 1.
pub fn element_max_degrees(mesh: &HierarchicalMesh, masks: &[TensorMask], element: CellId) -> Vec<usize> {
    let mut degrees = vec![1; mesh.dim()];
    let mut cell = element;
    while cell != NO_CELL {
        for (p, &s) in degrees.iter_mut().zip(masks[cell].shape()) {
            *p = (*p).max(s.saturating_sub(1));
        }
        cell = mesh.parent(cell);
    }
    degrees
}

/// Value (or first derivative in global coordinates) of the discrete field
/// `coeffs` at local coordinates `r` of `element`.
pub fn evaluate_solution(
    mesh: &HierarchicalMesh,
    masks: &[TensorMask],
    location_maps: &[LocationMap],
    coeffs: &[f64],
    element: CellId,
    r: &[f64],
    k: &[usize],
) -> Result<f64> {
    let shapes = evaluate_shapes(mesh, masks, element, r, k)?;
    let map = &location_maps[mesh.leaf_index(element)];
    if let Some(&max) = map.iter().max() {
        if max >= coeffs.len() {
            return invalid(format!(
                "coefficient vector has {} entries, basis needs more than {max}",
                coeffs.len()
            ));
        }
    }
    let mut value: f64 = shapes.values.iter().zip(map).map(|(n, &j)| n * coeffs[j]).sum();
    for (half, &k) in mesh.half_extents(element).iter().zip(k) {
        if k == 1 {
            value /= half;
        }
    }
    Ok(value)
}

/// A multi-level hp basis: mesh, masks, location matrices and element maps.
#[derive(Clone, Debug)]
pub struct MlhpBasis {
    mesh: HierarchicalMesh,
    masks: Vec<TensorMask>,
    location_matrices: Vec<LocationMatrix>,
    location_maps: Vec<LocationMap>,
    n_dofs: usize,
}

impl MlhpBasis {
    /// Builds masks and numbering for `mesh` with per-leaf degrees.
    pub fn new(mesh: HierarchicalMesh, degrees: &[Vec<usize>], space: Space) -> Result<Self> {
        let masks = create_mlhp_masks(&mesh, degrees, space)?;
        Ok(Self::from_masks(mesh, masks))
    }

    /// Same degree tuple on every leaf.
    pub fn uniform(mesh: HierarchicalMesh, degree: usize, space: Space) -> Result<Self> {
        let degrees = vec![vec![degree; mesh.dim()]; mesh.n_leaves()];
        Self::new(mesh, &degrees, space)
    }

    pub fn from_masks(mesh: HierarchicalMesh, masks: Vec<TensorMask>) -> Self {
        let (location_matrices, n_dofs) = create_location_matrices(&masks, &mesh);
        let location_maps = element_location_maps(&location_matrices, &mesh);
        Self {
            mesh,
            masks,
            location_matrices,
            location_maps,
            n_dofs,
        }
    }

    pub fn mesh(&self) -> &HierarchicalMesh {
        &self.mesh
    }

    pub fn masks(&self) -> &[TensorMask] {
        &self.masks
    }

    pub fn location_matrices(&self) -> &[LocationMatrix] {
        &self.location_matrices
    }

    pub fn location_maps(&self) -> &[LocationMap] {
        &self.location_maps
    }

    /// Location map of a leaf cell.
    pub fn location_map(&self, element: CellId) -> &[DofId] {
        &self.location_maps[self.mesh.leaf_index(element)]
    }

    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    pub fn dim(&self) -> usize {
        self.mesh.dim()
    }

    pub fn max_degrees(&self, element: CellId) -> Vec<usize> {
        element_max_degrees(&self.mesh, &self.masks, element)
    }

    pub fn evaluate_shapes(&self, element: CellId, r: &[f64], k: &[usize]) -> Result<ShapeEvaluation> {
        evaluate_shapes(&self.mesh, &self.masks, element, r, k)
    }

    pub fn evaluate_solution(&self, coeffs: &[f64], element: CellId, r: &[f64], k: &[usize]) -> Result<f64> {
        if coeffs.len() != self.n_dofs {
            return invalid(format!("expected {} coefficients, got {}", self.n_dofs, coeffs.len()));
        }
        evaluate_solution(&self.mesh, &self.masks, &self.location_maps, coeffs, element, r, k)
    }

    /// Field value at a global point.
    pub fn evaluate_at(&self, coeffs: &[f64], x: &[f64]) -> Result<f64> {
        let (leaf, r) = self.mesh.find_leaf(x)?;
        self.evaluate_solution(coeffs, leaf, &r, &vec![0; self.dim()])
    }

    /// Dofs generated by mask slots lying in slice `(axis, side)` of a cell
    /// whose face `(axis, side)` is on the domain boundary, for every
    /// boundary face accepted by `on_face`.
    pub fn boundary_dofs(&self, on_face: impl Fn(usize, usize) -> bool) -> Vec<DofId> {
        let mut flagged = vec![false; self.n_dofs];
        let d = self.dim();
        for cell in 0..self.mesh.n_cells() {
            let matrix = &self.location_matrices[cell];
            for axis in 0..d {
                for side in 0..2 {
                    if self.mesh.neighbor(cell, axis, side) != NO_CELL || !on_face(axis, side) {
                        continue;
                    }
                    let mut alpha = vec![0; d];
                    for &id in matrix.data() {
                        if id != crate::dofmap::NO_DOF && alpha[axis] == side {
                            flagged[id] = true;
                        }
                        advance(&mut alpha, matrix.shape());
                    }
                }
            }
        }
        flagged
            .iter()
            .enumerate()
            .filter(|(_, &f)| f)
            .map(|(id, _)| id)
            .collect()
    }
}

/// Reusable scratch space for evaluating shape values and global gradients
/// of an element at many points.
#[derive(Clone, Debug, Default)]
pub struct ShapeEvaluator {
    values: Vec<f64>,
    gradients: Vec<f64>,
    polys: Vec<Vec<f64>>,
    derivs: Vec<Vec<f64>>,
    coords: Vec<f64>,
    alpha: Vec<usize>,
    dim: usize,
}

impl ShapeEvaluator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Values and global gradients of every shape function of `element`.
    pub fn evaluate(&mut self, basis: &MlhpBasis, element: CellId, r: &[f64]) {
        let mesh = basis.mesh();
        let d = mesh.dim();
        self.dim = d;
        self.values.clear();
        self.gradients.clear();
        self.polys.resize(d, Vec::new());
        self.derivs.resize(d, Vec::new());
        self.coords.clear();
        self.coords.extend_from_slice(r);
        self.alpha.resize(d, 0);

        let inverse_half: Vec<f64> = mesh.half_extents(element).iter().map(|h| 1.0 / h).collect();
        let mut level_scale = 1.0;
        let mut cell = element;
        while cell != NO_CELL {
            let mask = &basis.masks()[cell];
            let shape = mask.shape();
            if shape.iter().all(|&s| s > 0) {
                for axis in 0..d {
                    let n = shape[axis].max(2);
                    self.polys[axis].resize(n, 0.0);
                    self.derivs[axis].resize(n, 0.0);
                    integrated_legendre_into(self.coords[axis], &mut self.polys[axis], &mut self.derivs[axis]);
                }
                self.alpha.iter_mut().for_each(|a| *a = 0);
                for &active in mask.data() {
                    if active {
                        let mut value = 1.0;
                        for axis in 0..d {
                            value *= self.polys[axis][self.alpha[axis]];
                        }
                        self.values.push(value);
                        for b in 0..d {
                            let mut g = level_scale * inverse_half[b];
                            for axis in 0..d {
                                let table = if axis == b { &self.derivs[axis] } else { &self.polys[axis] };
                                g *= table[self.alpha[axis]];
                            }
                            self.gradients.push(g);
                        }
                    }
                    advance(&mut self.alpha, shape);
                }
            }
            for axis in 0..d {
                self.coords[axis] = (self.coords[axis] + parent_offset(mesh, cell, axis)) / 2.0;
            }
            level_scale *= 0.5;
            cell = mesh.parent(cell);
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Global gradient of shape function `i`.
    pub fn gradient(&self, i: usize) -> &[f64] {
        &self.gradients[i * self.dim..(i + 1) * self.dim]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Field value and global gradient for coefficients gathered through `map`.
    pub fn field(&self, map: &[DofId], coeffs: &[f64]) -> (f64, Vec<f64>) {
        let mut value = 0.0;
        let mut gradient = vec![0.0; self.dim];
        for (i, &dof) in map.iter().enumerate() {
            let c = coeffs[dof];
            value += c * self.values[i];
            for (g, &dg) in gradient.iter_mut().zip(self.gradient(i)) {
                *g += c * dg;
            }
        }
        (value, gradient)
    }
}

pub(crate) fn non_finite(element: CellId, point: &[f64]) -> Error {
    Error::NonFinite {
        element,
        point: point.to_vec(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn fixture_1d() -> MlhpBasis {
        let mesh = HierarchicalMesh::create_base_grid(&[[0.0, 1.0]], &[2]).unwrap();
        let mesh = mesh.refine(&[0]).unwrap();
        MlhpBasis::uniform(mesh, 1, Space::Tensor).unwrap()
    }

    #[test]
    fn right_child_values_and_derivatives() {
        let basis = fixture_1d();
        let values = basis.evaluate_shapes(3, &[0.0], &[0]).unwrap().values;
        assert_eq!(values, vec![0.5, 0.75]);
        let derivatives = basis.evaluate_shapes(3, &[0.0], &[1]).unwrap().values;
        assert_eq!(derivatives, vec![-0.5, 0.25]);
    }

    #[test]
    fn max_degrees() {
        let basis = fixture_1d();
        assert_eq!(basis.max_degrees(3), vec![1]);
        let mesh = HierarchicalMesh::create_base_grid(&[[0.0, 1.0]; 2], &[1, 1]).unwrap();
        let basis = MlhpBasis::new(mesh, &[vec![3, 2]], Space::Tensor).unwrap();
        assert_eq!(basis.max_degrees(0), vec![3, 2]);
    }

    #[test]
    fn single_element_is_plain_tensor_product() {
        let mesh = HierarchicalMesh::create_base_grid(&[[0.0, 1.0]; 2], &[1, 1]).unwrap();
        let basis = MlhpBasis::new(mesh, &[vec![3, 2]], Space::Tensor).unwrap();
        let r = [0.3, -0.65];
        let values = basis.evaluate_shapes(0, &r, &[0, 0]).unwrap().values;
        assert_eq!(values.len(), 12);
        let i0 = crate::polynomials::integrated_legendre(r[0], 3, 0).unwrap().values;
        let i1 = crate::polynomials::integrated_legendre(r[1], 2, 0).unwrap().values;
        for a in 0..4 {
            for b in 0..3 {
                assert_abs_diff_eq!(values[a * 3 + b], i0[a] * i1[b], epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn non_leaf_rejected() {
        let basis = fixture_1d();
        assert!(basis.evaluate_shapes(0, &[0.0], &[0]).is_err());
        assert!(basis.evaluate_shapes(3, &[0.0], &[2]).is_err());
    }

    #[test]
    fn zero_and_linear_fields() {
        let basis = fixture_1d();
        assert_eq!(basis.evaluate_solution(&[0.0; 4], 2, &[0.3], &[0]).unwrap(), 0.0);
        assert!(basis.evaluate_solution(&[0.0; 3], 2, &[0.3], &[0]).is_err());

        // Dofs 0 and 1 are the level-0 hats at x = 0.5 and x = 1; dofs 2 and 3
        // are overlays on [0, 0.5] and stay zero for a field that is already
        // linear there.
        let coeffs = [0.5, 1.0, 0.0, 0.0];
        for &x in &[0.0, 0.1, 0.25, 0.4, 0.5, 0.77, 1.0] {
            assert_abs_diff_eq!(basis.evaluate_at(&coeffs, &[x]).unwrap(), x, epsilon = 1e-14);
        }
        let (leaf, r) = basis.mesh().find_leaf(&[0.3]).unwrap();
        assert_abs_diff_eq!(basis.evaluate_solution(&coeffs, leaf, &r, &[1]).unwrap(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn evaluator_matches_reference_path() {
        let mesh = HierarchicalMesh::create_base_grid(&[[0.0, 2.0], [-1.0, 1.0]], &[2, 2]).unwrap();
        let mesh = mesh.refine(&[0]).unwrap().refine(&[7]).unwrap();
        let basis = MlhpBasis::uniform(mesh, 3, Space::Trunk).unwrap();
        let mut evaluator = ShapeEvaluator::new();
        let r = [0.2, -0.7];
        for &leaf in basis.mesh().leaves() {
            evaluator.evaluate(&basis, leaf, &r);
            let values = basis.evaluate_shapes(leaf, &r, &[0, 0]).unwrap().values;
            assert_eq!(evaluator.values(), &values[..]);
            let half = basis.mesh().half_extents(leaf);
            for axis in 0..2 {
                let mut k = [0, 0];
                k[axis] = 1;
                let d = basis.evaluate_shapes(leaf, &r, &k).unwrap().values;
                for (i, v) in d.iter().enumerate() {
                    assert_abs_diff_eq!(evaluator.gradient(i)[axis], v / half[axis], epsilon = 1e-13);
                }
            }
            assert_eq!(evaluator.len(), basis.location_map(leaf).len());
        }
    }
}
