//! Global numbering of active shape functions.
//!
//! Each cell gets a location matrix shaped like its mask. Ids are first
//! assigned uniquely, then copied across interfaces so that touching shape
//! functions share one id, and finally compressed to `0..n_dofs`.

use std::fmt::Write as _;

use crate::error::{invalid, Result};
use crate::masks::{operate_on_interfaces, split_dump_line, TensorMask};
use crate::mesh::{HierarchicalMesh, NO_CELL};
use crate::ndarray::{for_each_index, NdArray};

pub type DofId = usize;

/// Marker for inactive entries of a location matrix.
pub const NO_DOF: DofId = DofId::MAX;

pub type LocationMatrix = NdArray<DofId>;

/// Global dof ids of one element: leaf entries first, then each ancestor up
/// to the root, row-major within each cell.
pub type LocationMap = Vec<DofId>;

fn return_first_index(first: DofId, _second: DofId) -> DofId {
    first
}

/// Consecutive ids for all active mask entries, in cell order.
pub fn initialize_global_indices(masks: &[TensorMask]) -> (Vec<LocationMatrix>, usize) {
    let mut next = 0;
    let matrices = masks
        .iter()
        .map(|mask| {
            let ids = mask
                .data()
                .iter()
                .map(|&active| {
                    if active {
                        next += 1;
                        next - 1
                    } else {
                        NO_DOF
                    }
                })
                .collect();
            NdArray::from_parts(mask.shape().to_vec(), ids).unwrap()
        })
        .collect();
    (matrices, next)
}

/// Unifies ids across interfaces (one sweep, lower cell's id wins), then
/// removes ids that no longer occur. Returns the number of dofs.
pub fn connect_and_compress(
    matrices: &mut [LocationMatrix],
    mesh: &HierarchicalMesh,
    n_ids: usize,
    level_aware: bool,
) -> usize {
    operate_on_interfaces(matrices, mesh, level_aware, NO_DOF, return_first_index);
    remove_unassigned_indices(matrices, n_ids)
}

fn remove_unassigned_indices(matrices: &mut [LocationMatrix], n_ids: usize) -> usize {
    let mut exists = vec![false; n_ids];
    for matrix in matrices.iter() {
        for &id in matrix.data() {
            if id != NO_DOF {
                exists[id] = true;
            }
        }
    }
    let mut map = vec![NO_DOF; n_ids];
    let mut n_new = 0;
    for (id, _) in exists.iter().enumerate().filter(|(_, &e)| e) {
        map[id] = n_new;
        n_new += 1;
    }
    for matrix in matrices.iter_mut() {
        for id in matrix.data_mut() {
            if *id != NO_DOF {
                *id = map[*id];
            }
        }
    }
    n_new
}

/// Location matrices for every cell of an mlhp mesh.
pub fn create_location_matrices(
    masks: &[TensorMask],
    mesh: &HierarchicalMesh,
) -> (Vec<LocationMatrix>, usize) {
    let (mut matrices, n_ids) = initialize_global_indices(masks);
    let n_dofs = connect_and_compress(&mut matrices, mesh, n_ids, true);
    (matrices, n_dofs)
}

/// Per-leaf concatenation of active ids from the leaf up to its root.
pub fn element_location_maps(
    matrices: &[LocationMatrix],
    mesh: &HierarchicalMesh,
) -> Vec<LocationMap> {
    mesh.leaves()
        .iter()
        .map(|&leaf| {
            let mut map = Vec::new();
            let mut cell = leaf;
            while cell != NO_CELL {
                map.extend(matrices[cell].data().iter().copied().filter(|&id| id != NO_DOF));
                cell = mesh.parent(cell);
            }
            map
        })
        .collect()
}

/// Checks that a location matrix agrees with its mask everywhere.
pub fn matches_mask(matrix: &LocationMatrix, mask: &TensorMask) -> bool {
    let mut ok = true;
    let mut shape = matrix.shape().to_vec();
    for (s, m) in shape.iter_mut().zip(mask.shape()) {
        *s = (*s).max(*m);
    }
    for_each_index(&shape, |index| {
        let active = mask.get_or(index, false);
        let id = matrix.get_or(index, NO_DOF);
        ok &= active == (id != NO_DOF);
    });
    ok
}

/// Same layout as the mask dump, with ids and -1 for inactive entries.
pub fn dump_location_matrices(matrices: &[LocationMatrix]) -> String {
    let mut out = String::new();
    for matrix in matrices {
        let shape: Vec<String> = matrix.shape().iter().map(|s| s.to_string()).collect();
        write!(out, "({})", shape.join(",")).unwrap();
        for &id in matrix.data() {
            if id == NO_DOF {
                out.push_str(" -1");
            } else {
                write!(out, " {id}").unwrap();
            }
        }
        out.push('\n');
    }
    out
}

/// Inverse of [`dump_location_matrices`].
pub fn parse_location_matrices(text: &str) -> Result<Vec<LocationMatrix>> {
    let mut matrices = Vec::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let (shape, values) = split_dump_line(line)?;
        let ids = values
            .into_iter()
            .map(|v| if v < 0 { NO_DOF } else { v as DofId })
            .collect();
        match NdArray::from_parts(shape, ids) {
            Some(matrix) => matrices.push(matrix),
            None => return invalid(format!("entry count does not match shape in `{line}`")),
        }
    }
    Ok(matrices)
}
