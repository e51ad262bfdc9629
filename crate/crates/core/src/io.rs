//! Convergence tables as CSV and solution output as ASCII VTU.

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::basis::MlhpBasis;
use crate::error::{invalid, Error, Result};
use crate::ndarray::for_each_index;

/// One row of a convergence table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyRecord {
    pub study: String,
    pub index: usize,
    pub n_dofs: usize,
    pub nnz: usize,
    pub cg_iters: usize,
    pub err_energy: Option<f64>,
    pub err_l2: Option<f64>,
    pub t_mesh_basis_s: f64,
    pub t_assembly_s: f64,
    pub t_solve_s: f64,
}

impl StudyRecord {
    /// Copy with all timing columns set to zero.
    pub fn without_timings(&self) -> Self {
        Self {
            t_mesh_basis_s: 0.0,
            t_assembly_s: 0.0,
            t_solve_s: 0.0,
            ..self.clone()
        }
    }
}

pub fn write_records<W: Write>(writer: W, records: &[StudyRecord]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    if records.is_empty() {
        csv.write_record([
            "study",
            "index",
            "n_dofs",
            "nnz",
            "cg_iters",
            "err_energy",
            "err_l2",
            "t_mesh_basis_s",
            "t_assembly_s",
            "t_solve_s",
        ])?;
    }
    for record in records {
        csv.serialize(record)?;
    }
    csv.flush()?;
    Ok(())
}

pub fn read_records<R: Read>(reader: R) -> Result<Vec<StudyRecord>> {
    let mut csv = csv::Reader::from_reader(reader);
    let records = csv.deserialize().collect::<std::result::Result<Vec<StudyRecord>, _>>()?;
    Ok(records)
}

pub fn write_records_to(path: &Path, records: &[StudyRecord]) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_records(std::io::BufWriter::new(file), records)
}

/// Point and cell counts of a written VTU file.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VtuSummary {
    pub points: usize,
    pub cells: usize,
}

const VTK_LINE: u8 = 3;
const VTK_QUAD: u8 = 9;
const VTK_HEXAHEDRON: u8 = 12;

/// Samples the solution on a `(s + 1)^d` lattice per leaf, where
/// `s = samples_per_p * p_max` of that leaf, and tessellates it into linear
/// VTK cells.
pub fn vtu_string(basis: &MlhpBasis, coeffs: &[f64], samples_per_p: usize) -> Result<(String, VtuSummary)> {
    let mesh = basis.mesh();
    let d = mesh.dim();
    if d > 3 {
        return Err(Error::UnsupportedDimension(d));
    }
    if samples_per_p == 0 {
        return invalid("samples per degree must be positive");
    }
    if coeffs.len() != basis.n_dofs() {
        return invalid("coefficient vector does not match the basis");
    }

    let mut coordinates = String::new();
    let mut values = String::new();
    let mut connectivity = String::new();
    let mut offsets = String::new();
    let mut types = String::new();
    let mut n_points = 0;
    let mut n_cells = 0;
    let corners = 1 << d;
    let cell_type = [VTK_LINE, VTK_QUAD, VTK_HEXAHEDRON][d - 1];
    let zero = vec![0; d];

    for &leaf in mesh.leaves() {
        let s = samples_per_p * basis.max_degrees(leaf).into_iter().max().unwrap_or(1);
        let lattice = vec![s + 1; d];
        let mut error = None;
        for_each_index(&lattice, |index| {
            if error.is_some() {
                return;
            }
            let r: Vec<f64> = index.iter().map(|&i| -1.0 + 2.0 * i as f64 / s as f64).collect();
            let x = mesh.map_to_global(leaf, &r);
            for axis in 0..3 {
                let separator = if axis == 2 { '\n' } else { ' ' };
                write!(coordinates, "{}{}", x.get(axis).copied().unwrap_or(0.0), separator).unwrap();
            }
            match basis.evaluate_solution(coeffs, leaf, &r, &zero) {
                Ok(v) => writeln!(values, "{v}").unwrap(),
                Err(e) => error = Some(e),
            }
        });
        if let Some(e) = error {
            return Err(e);
        }

        let point = |index: &[usize]| index.iter().fold(0, |acc, &i| acc * (s + 1) + i);
        for_each_index(&vec![s; d], |index| {
            let mut corner_ids = Vec::with_capacity(corners);
            for corner in vtk_corner_order(d) {
                let shifted: Vec<usize> = index.iter().zip(corner).map(|(i, c)| i + c).collect();
                corner_ids.push(n_points + point(&shifted));
            }
            let line: Vec<String> = corner_ids.iter().map(|c| c.to_string()).collect();
            writeln!(connectivity, "{}", line.join(" ")).unwrap();
            n_cells += 1;
            writeln!(offsets, "{}", n_cells * corners).unwrap();
            writeln!(types, "{cell_type}").unwrap();
        });
        n_points += (s + 1).pow(d as u32);
    }

    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\"?>\n");
    out.push_str("<VTKFile type=\"UnstructuredGrid\" version=\"0.1\" byte_order=\"LittleEndian\">\n");
    out.push_str("  <UnstructuredGrid>\n");
    writeln!(out, "    <Piece NumberOfPoints=\"{n_points}\" NumberOfCells=\"{n_cells}\">").unwrap();
    out.push_str("      <PointData Scalars=\"solution\">\n");
    out.push_str("        <DataArray type=\"Float64\" Name=\"solution\" format=\"ascii\">\n");
    out.push_str(&values);
    out.push_str("        </DataArray>\n      </PointData>\n");
    out.push_str("      <Points>\n");
    out.push_str("        <DataArray type=\"Float64\" NumberOfComponents=\"3\" format=\"ascii\">\n");
    out.push_str(&coordinates);
    out.push_str("        </DataArray>\n      </Points>\n");
    out.push_str("      <Cells>\n");
    out.push_str("        <DataArray type=\"Int64\" Name=\"connectivity\" format=\"ascii\">\n");
    out.push_str(&connectivity);
    out.push_str("        </DataArray>\n");
    out.push_str("        <DataArray type=\"Int64\" Name=\"offsets\" format=\"ascii\">\n");
    out.push_str(&offsets);
    out.push_str("        </DataArray>\n");
    out.push_str("        <DataArray type=\"UInt8\" Name=\"types\" format=\"ascii\">\n");
    out.push_str(&types);
    out.push_str("        </DataArray>\n      </Cells>\n");
    out.push_str("    </Piece>\n  </UnstructuredGrid>\n</VTKFile>\n");
    Ok((
        out,
        VtuSummary {
            points: n_points,
            cells: n_cells,
        },
    ))
}

/// Lattice offsets of a line, quad or hexahedron in VTK node order. Index
/// entries follow axis order (x first).
fn vtk_corner_order(d: usize) -> Vec<Vec<usize>> {
    let quad = [[0, 0], [1, 0], [1, 1], [0, 1]];
    match d {
        1 => vec![vec![0], vec![1]],
        2 => quad.iter().map(|c| c.to_vec()).collect(),
        _ => [0, 1]
            .iter()
            .flat_map(|&z| quad.iter().map(move |c| vec![c[0], c[1], z]))
            .collect(),
    }
}

pub fn write_vtu(basis: &MlhpBasis, coeffs: &[f64], path: &Path, samples_per_p: usize) -> Result<VtuSummary> {
    let (text, summary) = vtu_string(basis, coeffs, samples_per_p)?;
    std::fs::write(path, text)?;
    Ok(summary)
}
