//! Conforming simplicial meshes of the unit square and unit cube.
//!
//! Cells are stored with positively oriented vertex order. Local face `i` of a
//! cell is the face opposite local vertex `i`. Every face carries one global
//! unit normal: outward for boundary faces, and pointing from the
//! lower-indexed to the higher-indexed cell for interior faces. A cell sees a
//! face with sign `+1` when its outward normal agrees with the global one.

use std::collections::HashMap;
use std::io::Write;

use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::Point;

/// A (d-1)-dimensional face of the triangulation.
#[derive(Debug, Clone, PartialEq)]
pub struct Face {
    /// Global vertex ids, ascending.
    pub vertices: Vec<usize>,
    /// One (boundary) or two (interior) adjacent cells, ascending.
    pub cells: Vec<usize>,
    pub normal: Point,
    /// Euclidean diameter, used as `h_F`.
    pub diameter: f64,
    /// Length (2D) or area (3D).
    pub measure: f64,
}

impl Face {
    pub fn is_boundary(&self) -> bool {
        self.cells.len() == 1
    }
}

/// A face as seen from one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellFace {
    pub face: usize,
    /// `+1` if the cell's outward normal equals the face's global normal.
    pub sign: f64,
}

/// The affine map `x = B x̂ + b` from the reference simplex onto a cell.
///
/// 2D maps are embedded in 3×3 matrices with `B[(2, 2)] = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct CellGeometry {
    pub dim: usize,
    pub jacobian: Matrix3<f64>,
    pub translation: Point,
    /// `det B`, strictly positive.
    pub det: f64,
    pub inverse: Matrix3<f64>,
}

impl CellGeometry {
    /// Geometry of the simplex whose vertices are given in local order.
    pub fn from_vertices(dim: usize, vertices: &[Point]) -> Result<Self> {
        if vertices.len() != dim + 1 {
            return Err(Error::InvalidArgument(format!(
                "a {dim}-simplex needs {} vertices, got {}",
                dim + 1,
                vertices.len()
            )));
        }
        let mut jacobian = Matrix3::identity();
        for c in 0..dim {
            let edge = vertices[c + 1] - vertices[0];
            for row in 0..dim {
                jacobian[(row, c)] = edge[row];
            }
        }
        let det = jacobian.determinant();
        if !(det > 0.0) {
            return Err(Error::MeshIntegrity(format!(
                "cell has non-positive Jacobian determinant {det:e}"
            )));
        }
        let inverse = jacobian
            .try_inverse()
            .ok_or_else(|| Error::MeshIntegrity("cell Jacobian is not invertible".into()))?;
        Ok(Self {
            dim,
            jacobian,
            translation: vertices[0],
            det,
            inverse,
        })
    }

    /// Reference point to physical point.
    pub fn map(&self, xr: &Point) -> Point {
        self.jacobian * xr + self.translation
    }

    /// Physical point to reference point.
    pub fn pullback(&self, x: &Point) -> Point {
        self.inverse * (x - self.translation)
    }

    /// Contravariant Piola push-forward of a reference vector value.
    pub fn piola(&self, v: &Point) -> Point {
        self.jacobian * v / self.det
    }

    /// Physical gradient from a reference gradient.
    pub fn grad(&self, g: &Point) -> Point {
        self.inverse.transpose() * g
    }

    /// Cell measure `det B / d!`.
    pub fn measure(&self) -> f64 {
        self.det / factorial(self.dim)
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

pub(crate) fn dist(a: &Point, b: &Point) -> f64 {
    (a - b).norm()
}

/// Vertices of the reference simplex: the origin and the unit vectors.
pub fn reference_vertices(dim: usize) -> Vec<Point> {
    let mut out = vec![Point::zeros()];
    for c in 0..dim {
        let mut e = Point::zeros();
        e[c] = 1.0;
        out.push(e);
    }
    out
}

/// Local vertex ids of local face `i`, ascending.
pub fn local_face_vertices(dim: usize, i: usize) -> Vec<usize> {
    (0..=dim).filter(|&v| v != i).collect()
}

/// Outward unit normal of reference face `i`.
pub fn reference_normal(dim: usize, i: usize) -> Point {
    let mut n = Point::zeros();
    if i == 0 {
        for c in 0..dim {
            n[c] = 1.0 / (dim as f64).sqrt();
        }
    } else {
        n[i - 1] = -1.0;
    }
    n
}

/// Measure of the simplex spanned by `vertices` inside R^3.
pub(crate) fn simplex_measure(vertices: &[Point]) -> f64 {
    match vertices.len() {
        2 => dist(&vertices[0], &vertices[1]),
        3 => 0.5 * (vertices[1] - vertices[0]).cross(&(vertices[2] - vertices[0])).norm(),
        4 => {
            (vertices[1] - vertices[0])
                .cross(&(vertices[2] - vertices[0]))
                .dot(&(vertices[3] - vertices[0]))
                .abs()
                / 6.0
        }
        n => panic!("no simplex measure for {n} vertices"),
    }
}

fn diameter(vertices: &[Point]) -> f64 {
    let mut d: f64 = 0.0;
    for i in 0..vertices.len() {
        for j in i + 1..vertices.len() {
            d = d.max(dist(&vertices[i], &vertices[j]));
        }
    }
    d
}

#[derive(Debug, Clone)]
pub struct SimplicialMesh {
    dim: usize,
    vertices: Vec<Point>,
    cells: Vec<Vec<usize>>,
    faces: Vec<Face>,
    cell_faces: Vec<Vec<CellFace>>,
    geometry: Vec<CellGeometry>,
    cell_diameters: Vec<f64>,
    h: f64,
}

impl SimplicialMesh {
    /// Build a mesh from raw connectivity, computing faces and orientation.
    ///
    /// Every cell must be positively oriented and every face shared by at
    /// most two cells.
    pub fn new(dim: usize, vertices: Vec<Point>, cells: Vec<Vec<usize>>) -> Result<Self> {
        if !(2..=3).contains(&dim) {
            return Err(Error::InvalidArgument(format!(
                "mesh dimension must be 2 or 3, got {dim}"
            )));
        }
        if cells.is_empty() {
            return Err(Error::InvalidArgument("mesh without cells".into()));
        }
        let mut geometry = Vec::with_capacity(cells.len());
        let mut cell_diameters = Vec::with_capacity(cells.len());
        for (c, cell) in cells.iter().enumerate() {
            if cell.len() != dim + 1 || cell.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::MeshIntegrity(format!("cell {c} has bad connectivity")));
            }
            let pts: Vec<Point> = cell.iter().map(|&v| vertices[v]).collect();
            let geom = CellGeometry::from_vertices(dim, &pts).map_err(|e| match e {
                Error::MeshIntegrity(msg) => Error::MeshIntegrity(format!("cell {c}: {msg}")),
                other => other,
            })?;
            geometry.push(geom);
            cell_diameters.push(diameter(&pts));
        }

        let mut lookup: HashMap<Vec<usize>, usize> = HashMap::new();
        let mut faces: Vec<Face> = Vec::new();
        let mut cell_faces = Vec::with_capacity(cells.len());
        for (c, cell) in cells.iter().enumerate() {
            let mut local = Vec::with_capacity(dim + 1);
            for i in 0..=dim {
                let mut key: Vec<usize> = local_face_vertices(dim, i)
                    .into_iter()
                    .map(|lv| cell[lv])
                    .collect();
                key.sort_unstable();
                let outward = outward_normal(&geometry[c], i);
                match lookup.get(&key) {
                    Some(&f) => {
                        let face = &mut faces[f];
                        if face.cells.len() != 1 {
                            return Err(Error::MeshIntegrity(format!(
                                "face {key:?} shared by more than two cells"
                            )));
                        }
                        face.cells.push(c);
                        let sign = face.normal.dot(&outward);
                        if sign > -0.999_999 {
                            return Err(Error::MeshIntegrity(format!(
                                "cells {} and {c} do not lie on opposite sides of face {key:?}",
                                face.cells[0]
                            )));
                        }
                        local.push(CellFace { face: f, sign: -1.0 });
                    }
                    None => {
                        let pts: Vec<Point> = key.iter().map(|&v| vertices[v]).collect();
                        lookup.insert(key.clone(), faces.len());
                        local.push(CellFace {
                            face: faces.len(),
                            sign: 1.0,
                        });
                        faces.push(Face {
                            vertices: key,
                            cells: vec![c],
                            normal: outward,
                            diameter: diameter(&pts),
                            measure: simplex_measure(&pts),
                        });
                    }
                }
            }
            cell_faces.push(local);
        }
        let h = cell_diameters.iter().copied().fold(0.0, f64::max);
        Ok(Self {
            dim,
            vertices,
            cells,
            faces,
            cell_faces,
            geometry,
            cell_diameters,
            h,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn cell(&self, c: usize) -> &[usize] {
        &self.cells[c]
    }

    pub fn cells(&self) -> &[Vec<usize>] {
        &self.cells
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn face(&self, f: usize) -> &Face {
        &self.faces[f]
    }

    /// The `d+1` faces of cell `c`, indexed by local face number.
    pub fn cell_faces(&self, c: usize) -> &[CellFace] {
        &self.cell_faces[c]
    }

    /// Mesh size: the largest cell diameter.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn cell_diameter(&self, c: usize) -> f64 {
        self.cell_diameters[c]
    }

    pub fn cell_geometry(&self, c: usize) -> Result<&CellGeometry> {
        self.geometry
            .get(c)
            .ok_or_else(|| Error::InvalidArgument(format!("cell {c} out of range")))
    }

    /// Infallible access for internal loops over valid cells.
    pub(crate) fn geom(&self, c: usize) -> &CellGeometry {
        &self.geometry[c]
    }

    pub fn cell_measure(&self, c: usize) -> f64 {
        self.geometry[c].measure()
    }

    /// Outward unit normal of local face `i` of cell `c`.
    pub fn outward_normal(&self, c: usize, i: usize) -> Point {
        outward_normal(&self.geometry[c], i)
    }

    /// Physical coordinates of the local face `i` vertices of cell `c`, in
    /// ascending local order.
    pub fn local_face_points(&self, c: usize, i: usize) -> Vec<Point> {
        local_face_vertices(self.dim, i)
            .into_iter()
            .map(|lv| self.vertices[self.cells[c][lv]])
            .collect()
    }

    pub fn cell_centroid(&self, c: usize) -> Point {
        let sum: Point = self.cells[c].iter().map(|&v| self.vertices[v]).sum();
        sum / (self.dim + 1) as f64
    }

    /// Legacy VTK ASCII unstructured grid with optional cell data.
    pub fn write_vtk<W: Write>(
        &self,
        out: &mut W,
        scalars: &[(&str, &[f64])],
        vectors: &[(&str, &[Point])],
    ) -> std::io::Result<()> {
        writeln!(out, "# vtk DataFile Version 3.0")?;
        writeln!(out, "rtmixed")?;
        writeln!(out, "ASCII")?;
        writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
        writeln!(out, "POINTS {} double", self.vertices.len())?;
        for v in &self.vertices {
            writeln!(out, "{} {} {}", v.x, v.y, v.z)?;
        }
        let nc = self.cells.len();
        writeln!(out, "CELLS {} {}", nc, nc * (self.dim + 2))?;
        for cell in &self.cells {
            write!(out, "{}", cell.len())?;
            for v in cell {
                write!(out, " {v}")?;
            }
            writeln!(out)?;
        }
        writeln!(out, "CELL_TYPES {nc}")?;
        let cell_type = if self.dim == 2 { 5 } else { 10 };
        for _ in 0..nc {
            writeln!(out, "{cell_type}")?;
        }
        if scalars.is_empty() && vectors.is_empty() {
            return Ok(());
        }
        writeln!(out, "CELL_DATA {nc}")?;
        for (name, data) in scalars {
            writeln!(out, "SCALARS {name} double 1")?;
            writeln!(out, "LOOKUP_TABLE default")?;
            for v in data.iter() {
                writeln!(out, "{v:e}")?;
            }
        }
        for (name, data) in vectors {
            writeln!(out, "VECTORS {name} double")?;
            for v in data.iter() {
                writeln!(out, "{:e} {:e} {:e}", v.x, v.y, v.z)?;
            }
        }
        Ok(())
    }
}

fn outward_normal(geom: &CellGeometry, i: usize) -> Point {
    let n = geom.grad(&reference_normal(geom.dim, i));
    n / n.norm()
}

/// Uniform triangulation of the unit square with `M + 1` vertices per side.
///
/// Every grid square is split along its lower-left to upper-right diagonal.
pub fn build_unit_square_mesh(m: usize) -> Result<SimplicialMesh> {
    if m == 0 {
        return Err(Error::InvalidArgument("M must be at least 1".into()));
    }
    let n = m + 1;
    let mut vertices = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            vertices.push(Point::new(i as f64 / m as f64, j as f64 / m as f64, 0.0));
        }
    }
    let id = |i: usize, j: usize| j * n + i;
    let mut cells = Vec::with_capacity(2 * m * m);
    for j in 0..m {
        for i in 0..m {
            let (v0, v1, v2, v3) = (id(i, j), id(i + 1, j), id(i, j + 1), id(i + 1, j + 1));
            cells.push(vec![v0, v1, v3]);
            cells.push(vec![v0, v3, v2]);
        }
    }
    SimplicialMesh::new(2, vertices, cells)
}

/// Uniform Kuhn triangulation of the unit cube: six tetrahedra per subcube,
/// all sharing the subcube's main diagonal.
pub fn build_unit_cube_mesh(m: usize) -> Result<SimplicialMesh> {
    if m == 0 {
        return Err(Error::InvalidArgument("M must be at least 1".into()));
    }
    let n = m + 1;
    let mut vertices = Vec::with_capacity(n * n * n);
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                vertices.push(Point::new(
                    i as f64 / m as f64,
                    j as f64 / m as f64,
                    k as f64 / m as f64,
                ));
            }
        }
    }
    let id = |i: usize, j: usize, k: usize| (k * n + j) * n + i;
    const PERMUTATIONS: [[usize; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    let mut cells = Vec::with_capacity(6 * m * m * m);
    for k in 0..m {
        for j in 0..m {
            for i in 0..m {
                for perm in PERMUTATIONS {
                    let mut corner = [i, j, k];
                    let mut tet = vec![id(corner[0], corner[1], corner[2])];
                    for axis in perm {
                        corner[axis] += 1;
                        tet.push(id(corner[0], corner[1], corner[2]));
                    }
                    // Odd permutations produce negatively oriented paths.
                    let pts: Vec<Point> = tet.iter().map(|&v| vertices[v]).collect();
                    let orient = (pts[1] - pts[0])
                        .cross(&(pts[2] - pts[0]))
                        .dot(&(pts[3] - pts[0]));
                    if orient < 0.0 {
                        tet.swap(2, 3);
                    }
                    cells.push(tet);
                }
            }
        }
    }
    SimplicialMesh::new(3, vertices, cells)
}
