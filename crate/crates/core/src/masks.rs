//! Tensor-product masks: which integrated Legendre tensor products are active
//! on each cell.
//!
//! A mask slice `(axis, 0)` holds the shape functions that are non-zero on the
//! first face normal to `axis`, slice `(axis, 1)` those on the second face.
//! Compatibility between cells is restored by combining the touching slices of
//! neighbors with logical operations.

use std::fmt::Write as _;

use crate::error::{invalid, Result};
use crate::mesh::{HierarchicalMesh, NO_CELL};
use crate::ndarray::{for_each_index, pair_mut, NdArray};

pub type TensorMask = NdArray<bool>;

/// Which modes a leaf activates initially.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, clap::ValueEnum, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Space {
    Tensor,
    Trunk,
}

/// How mismatched interface degrees are resolved on single-level meshes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DegreeStrategy {
    MinDegree,
    MaxDegree,
}

pub fn logical_and(a: bool, b: bool) -> bool {
    a && b
}

pub fn logical_or(a: bool, b: bool) -> bool {
    a || b
}

/// Combines slice `(axis, 1)` of `first` with slice `(axis, 0)` of `second`
/// and overwrites both with the result.
pub fn operate_on_interface<T, F>(
    first: &mut NdArray<T>,
    second: &mut NdArray<T>,
    axis: usize,
    no_value: T,
    op: F,
) -> Result<()>
where
    T: Copy + PartialEq,
    F: Fn(T, T) -> T,
{
    if first.dim() != second.dim() {
        return invalid(format!(
            "arrays have different dimensions {} and {}",
            first.dim(),
            second.dim()
        ));
    }
    if axis >= first.dim() {
        return invalid(format!("axis {axis} out of range"));
    }
    crate::ndarray::operate_on_interface(first, second, axis, no_value, op);
    Ok(())
}

/// One sweep over all interfaces: axes ascending, cells ascending, each cell
/// against its second-face neighbor. With `same_level_only`, interfaces to
/// cells on other levels are skipped.
pub fn operate_on_interfaces<T, F>(
    arrays: &mut [NdArray<T>],
    mesh: &HierarchicalMesh,
    same_level_only: bool,
    no_value: T,
    op: F,
) where
    T: Copy + PartialEq,
    F: Fn(T, T) -> T + Copy,
{
    for axis in 0..mesh.dim() {
        for cell in 0..mesh.n_cells() {
            let other = mesh.neighbor(cell, axis, 1);
            if other == NO_CELL || (same_level_only && mesh.level(other) != mesh.level(cell)) {
                continue;
            }
            let (a0, a1) = pair_mut(arrays, cell, other);
            crate::ndarray::operate_on_interface(a0, a1, axis, no_value, op);
        }
    }
}

/// Full tensor-product mask for per-axis degrees `p`.
pub fn full_mask(p: &[usize]) -> TensorMask {
    let shape: Vec<usize> = p.iter().map(|&q| q + 1).collect();
    NdArray::filled(&shape, true)
}

/// Initial trunk-space mask: modes with `sum(alpha) <= max(p)`, then for each
/// axis the first slice is copied onto the second so that no `I_0` mode is
/// active without its `I_1` partner.
pub fn initial_trunk_mask(p: &[usize]) -> TensorMask {
    let shape: Vec<usize> = p.iter().map(|&q| q + 1).collect();
    let limit = p.iter().copied().max().unwrap_or(0);
    let mut mask = NdArray::filled(&shape, false);
    for_each_index(&shape, |alpha| {
        if alpha.iter().sum::<usize>() <= limit {
            mask.set(alpha, true);
        }
    });
    for axis in 0..p.len() {
        if shape[axis] < 2 {
            continue;
        }
        let mut reduced = shape.clone();
        reduced[axis] = 1;
        for_each_index(&reduced, |alpha| {
            let mut target = alpha.to_vec();
            target[axis] = 1;
            let value = mask.get(alpha).unwrap();
            mask.set(&target, value);
        });
    }
    mask
}

fn initial_mask(p: &[usize], space: Space) -> TensorMask {
    match space {
        Space::Tensor => full_mask(p),
        Space::Trunk => initial_trunk_mask(p),
    }
}

fn check_degrees(degrees: &[Vec<usize>], count: usize, dim: usize) -> Result<()> {
    if degrees.len() != count {
        return invalid(format!("expected {count} degree tuples, got {}", degrees.len()));
    }
    for p in degrees {
        if p.len() != dim || p.iter().any(|&q| q == 0) {
            return invalid(format!("degree tuple {p:?} must have {dim} entries >= 1"));
        }
    }
    Ok(())
}

/// Compatible masks for an unrefined mesh with per-element, per-axis degrees.
pub fn create_pfem_masks(
    mesh: &HierarchicalMesh,
    degrees: &[Vec<usize>],
    strategy: DegreeStrategy,
) -> Result<Vec<TensorMask>> {
    if mesh.n_cells() != mesh.n_leaves() {
        return invalid("p-FEM masks require an unrefined mesh");
    }
    check_degrees(degrees, mesh.n_cells(), mesh.dim())?;
    let mut masks: Vec<TensorMask> = degrees.iter().map(|p| full_mask(p)).collect();
    let op = match strategy {
        DegreeStrategy::MinDegree => logical_and,
        DegreeStrategy::MaxDegree => logical_or,
    };
    for _ in 1..mesh.dim() {
        operate_on_interfaces(&mut masks, mesh, false, false, op);
    }
    Ok(masks)
}

/// Sets slice `(axis, side)` of every cell with a coarser neighbor across that
/// face to false.
fn deactivate_internal_boundaries(masks: &mut [TensorMask], mesh: &HierarchicalMesh) {
    for axis in 0..mesh.dim() {
        for side in 0..2 {
            for cell in 0..mesh.n_cells() {
                let other = mesh.neighbor(cell, axis, side);
                if other != NO_CELL && mesh.level(other) != mesh.level(cell) {
                    masks[cell].fill_slice(axis, side, false);
                }
            }
        }
    }
}

/// Multi-level hp masks for every cell of `mesh`; `degrees[e]` belongs to the
/// `e`-th leaf.
///
/// 1. leaves get their full or trunk mask, refined cells start empty;
/// 2. `d` logical-or sweeps over same-level interfaces;
/// 3. slices on faces towards coarser neighbors are switched off;
/// 4. `d - 1` logical-and sweeps over same-level interfaces.
pub fn create_mlhp_masks(
    mesh: &HierarchicalMesh,
    degrees: &[Vec<usize>],
    space: Space,
) -> Result<Vec<TensorMask>> {
    check_degrees(degrees, mesh.n_leaves(), mesh.dim())?;
    let mut masks: Vec<TensorMask> = (0..mesh.n_cells())
        .map(|cell| match mesh.leaf_index(cell) {
            NO_CELL => NdArray::empty(mesh.dim()),
            leaf => initial_mask(&degrees[leaf], space),
        })
        .collect();

    for _ in 0..mesh.dim() {
        operate_on_interfaces(&mut masks, mesh, true, false, logical_or);
    }
    deactivate_internal_boundaries(&mut masks, mesh);
    for _ in 1..mesh.dim() {
        operate_on_interfaces(&mut masks, mesh, true, false, logical_and);
    }
    Ok(masks)
}

/// True if one more or-sweep and and-sweep would leave every mask unchanged
/// and no slice facing a coarser neighbor is active.
pub fn masks_are_stable(mesh: &HierarchicalMesh, masks: &[TensorMask]) -> bool {
    let active = |masks: &[TensorMask]| -> Vec<Vec<Vec<usize>>> {
        masks
            .iter()
            .map(|m| {
                let mut on = Vec::new();
                for_each_index(m.shape(), |alpha| {
                    if m.get(alpha).unwrap() {
                        on.push(alpha.to_vec());
                    }
                });
                on
            })
            .collect()
    };
    let before = active(masks);
    let mut probe = masks.to_vec();
    operate_on_interfaces(&mut probe, mesh, true, false, logical_and);
    operate_on_interfaces(&mut probe, mesh, true, false, logical_or);
    deactivate_internal_boundaries(&mut probe, mesh);
    active(&probe) == before
}

/// Number of active entries in a mask.
pub fn active_count(mask: &TensorMask) -> usize {
    mask.data().iter().filter(|&&b| b).count()
}

/// One cell per line: the shape tuple, then the row-major 0/1 flags.
pub fn dump_masks(masks: &[TensorMask]) -> String {
    let mut out = String::new();
    for mask in masks {
        let shape: Vec<String> = mask.shape().iter().map(|s| s.to_string()).collect();
        write!(out, "({})", shape.join(",")).unwrap();
        for &flag in mask.data() {
            write!(out, " {}", u8::from(flag)).unwrap();
        }
        out.push('\n');
    }
    out
}

/// Inverse of [`dump_masks`].
pub fn parse_masks(text: &str) -> Result<Vec<TensorMask>> {
    let mut masks = Vec::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let (shape, flags) = split_dump_line(line)?;
        let flags = flags
            .iter()
            .map(|f| match *f {
                0 => Ok(false),
                1 => Ok(true),
                other => invalid(format!("flag {other} is not 0 or 1")),
            })
            .collect::<Result<Vec<bool>>>()?;
        match NdArray::from_parts(shape, flags) {
            Some(mask) => masks.push(mask),
            None => return invalid(format!("entry count does not match shape in `{line}`")),
        }
    }
    Ok(masks)
}

pub(crate) fn split_dump_line(line: &str) -> Result<(Vec<usize>, Vec<i64>)> {
    let line = line.trim();
    let close = match (line.starts_with('('), line.find(')')) {
        (true, Some(close)) => close,
        _ => return invalid(format!("missing shape tuple in `{line}`")),
    };
    let shape = line[1..close]
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse::<usize>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| crate::Error::InvalidArgument(format!("bad shape in `{line}`: {e}")))?;
    let values = line[close + 1..]
        .split_whitespace()
        .map(|s| s.parse::<i64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| crate::Error::InvalidArgument(format!("bad entry in `{line}`: {e}")))?;
    Ok((shape, values))
}

#[cfg(test)]
mod tests {
    use super::*;

    const T: bool = true;
    const F: bool = false;

    fn mask(shape: &[usize], flags: &[bool]) -> TensorMask {
        NdArray::from_parts(shape.to_vec(), flags.to_vec()).unwrap()
    }

    fn grid(shape: &[usize]) -> HierarchicalMesh {
        let bounds = vec![[0.0, 1.0]; shape.len()];
        HierarchicalMesh::create_base_grid(&bounds, shape).unwrap()
    }

    #[test]
    fn one_dimensional_interface_compares_only_boundary_slots() {
        let mut a = mask(&[4], &[T, T, T, T]);
        let mut b = mask(&[3], &[T, T, T]);
        operate_on_interface(&mut a, &mut b, 0, false, logical_and).unwrap();
        assert_eq!(a.data(), &[T, T, T, T]);
        assert_eq!(b.data(), &[T, T, T]);
    }

    #[test]
    fn two_dimensional_and_deactivates() {
        let mut a = NdArray::filled(&[4, 3], true);
        let mut b = NdArray::filled(&[3, 4], true);
        operate_on_interface(&mut a, &mut b, 0, false, logical_and).unwrap();
        assert_eq!(a, NdArray::filled(&[4, 3], true));
        assert_eq!(b.get(&[0, 3]), Some(false));
        assert_eq!(b.data().iter().filter(|&&x| !x).count(), 1);
    }

    #[test]
    fn two_dimensional_or_grows() {
        let mut a = NdArray::filled(&[4, 3], true);
        let mut b = NdArray::filled(&[3, 4], true);
        operate_on_interface(&mut a, &mut b, 0, false, logical_or).unwrap();
        assert_eq!(a.shape(), &[4, 4]);
        assert_eq!(a.get(&[1, 3]), Some(true));
        for i in [0, 2, 3] {
            assert_eq!(a.get(&[i, 3]), Some(false));
        }
        assert_eq!(b, NdArray::filled(&[3, 4], true));
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let mut a = NdArray::filled(&[2, 2], true);
        let mut b = NdArray::filled(&[2], true);
        assert!(operate_on_interface(&mut a, &mut b, 0, false, logical_and).is_err());
    }

    #[test]
    fn trunk_counts() {
        assert_eq!(active_count(&initial_trunk_mask(&[3, 4])), 15);
        assert_eq!(active_count(&initial_trunk_mask(&[1, 1])), 4);
        assert_eq!(active_count(&initial_trunk_mask(&[5])), 6);
        let trunk = initial_trunk_mask(&[3, 4]);
        assert_eq!(trunk.get(&[1, 4]), Some(true));
        assert_eq!(trunk.get(&[2, 3]), Some(false));
    }

    #[test]
    fn trunk_is_subset_of_tensor() {
        for p in [[1, 1, 1], [2, 3, 1], [4, 4, 4], [5, 2, 3]] {
            let trunk = initial_trunk_mask(&p);
            let full = full_mask(&p);
            assert_eq!(trunk.shape(), full.shape());
            assert!(trunk.data().iter().zip(full.data()).all(|(&t, &f)| !t || f));
        }
    }

    #[test]
    fn pfem_1d_unchanged() {
        let mesh = grid(&[2]);
        for strategy in [DegreeStrategy::MinDegree, DegreeStrategy::MaxDegree] {
            let masks = create_pfem_masks(&mesh, &[vec![2], vec![3]], strategy).unwrap();
            assert_eq!(masks[0], full_mask(&[2]));
            assert_eq!(masks[1], full_mask(&[3]));
        }
    }

    #[test]
    fn pfem_2d_min_degree() {
        let mesh = grid(&[2, 1]);
        let masks = create_pfem_masks(&mesh, &[vec![3, 2], vec![2, 3]], DegreeStrategy::MinDegree).unwrap();
        assert_eq!(masks[0], full_mask(&[3, 2]));
        let off: Vec<Vec<usize>> = {
            let mut off = Vec::new();
            for_each_index(masks[1].shape(), |a| {
                if !masks[1].get(a).unwrap() {
                    off.push(a.to_vec());
                }
            });
            off
        };
        assert_eq!(off, vec![vec![0, 3]]);
    }

    #[test]
    fn pfem_single_element_and_refined_mesh() {
        let mesh = grid(&[1, 1]);
        let masks = create_pfem_masks(&mesh, &[vec![3, 2]], DegreeStrategy::MinDegree).unwrap();
        assert_eq!(masks, vec![full_mask(&[3, 2])]);
        let refined = mesh.refine(&[0]).unwrap();
        assert!(create_pfem_masks(&refined, &vec![vec![1, 1]; 4], DegreeStrategy::MinDegree).is_err());
    }

    #[test]
    fn mlhp_1d_fixture() {
        let mesh = grid(&[2]).refine(&[0]).unwrap();
        let masks = create_mlhp_masks(&mesh, &vec![vec![1]; 3], Space::Tensor).unwrap();
        assert_eq!(masks[0], mask(&[2], &[F, T]));
        assert_eq!(masks[1], mask(&[2], &[T, T]));
        assert_eq!(masks[2], mask(&[2], &[T, T]));
        assert_eq!(masks[3], mask(&[2], &[T, F]));
        assert!(masks_are_stable(&mesh, &masks));
    }

    #[test]
    fn mlhp_fully_refined_root() {
        // Single root refined once: no internal boundaries, the parent only
        // picks up what its (absent) same-level neighbors offer, i.e. nothing.
        let mesh = grid(&[1, 1]).refine(&[0]).unwrap();
        let masks = create_mlhp_masks(&mesh, &vec![vec![2, 2]; 4], Space::Tensor).unwrap();
        assert_eq!(active_count(&masks[0]), 0);
        for leaf in 1..5 {
            assert_eq!(masks[leaf], full_mask(&[2, 2]));
        }
    }

    #[test]
    fn mlhp_on_unrefined_mesh_equals_max_degree_pfem() {
        let mesh = grid(&[3, 2]);
        let degrees = vec![
            vec![1, 2],
            vec![3, 1],
            vec![2, 2],
            vec![4, 1],
            vec![1, 3],
            vec![2, 4],
        ];
        let mlhp = create_mlhp_masks(&mesh, &degrees, Space::Tensor).unwrap();
        let pfem = create_pfem_masks(&mesh, &degrees, DegreeStrategy::MaxDegree).unwrap();
        assert_eq!(mlhp, pfem);
    }

    #[test]
    fn missing_degrees_rejected() {
        let mesh = grid(&[2]).refine(&[0]).unwrap();
        assert!(create_mlhp_masks(&mesh, &vec![vec![1]; 2], Space::Tensor).is_err());
        assert!(create_mlhp_masks(&mesh, &vec![vec![0]; 3], Space::Tensor).is_err());
    }

    #[test]
    fn dump_round_trip() {
        let mesh = grid(&[2, 2]).refine(&[0]).unwrap();
        let masks = create_mlhp_masks(&mesh, &vec![vec![2, 3]; 7], Space::Trunk).unwrap();
        let text = dump_masks(&masks);
        assert!(text.starts_with("(3,4) "));
        assert_eq!(parse_masks(&text).unwrap(), masks);
    }
}
