//! Graph data of a continuous piecewise-(bi)linear discretization: lumped and
//! consistent masses, the discrete gradient vectors `c_ij`, stencils and
//! boundary normals.
//!
//! Every downstream module only sees [`MeshGraph`]; the element family never
//! leaks past this file.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::state::{norm, scale, Vec2};

/// Compressed row layout. Each row stores its stencil `I(i)` sorted, the
/// diagonal included.
#[derive(Debug, Clone)]
pub struct Sparsity {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    /// Position of entry `(j, i)` for entry `(i, j)`.
    transpose: Vec<usize>,
    diag: Vec<usize>,
}

impl Sparsity {
    fn from_rows(rows: Vec<BTreeSet<usize>>) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut cols = Vec::new();
        row_ptr.push(0);
        for r in &rows {
            cols.extend(r.iter().copied());
            row_ptr.push(cols.len());
        }
        let n = rows.len();
        let mut s = Sparsity { row_ptr, cols, transpose: Vec::new(), diag: vec![0; n] };
        let mut transpose = vec![0; s.cols.len()];
        for i in 0..n {
            for k in s.row(i) {
                let j = s.cols[k];
                transpose[k] = s.find(j, i).expect("stencil must be symmetric");
                if j == i {
                    s.diag[i] = k;
                }
            }
        }
        s.transpose = transpose;
        s
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    #[inline]
    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    /// Entry index range of row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> std::ops::Range<usize> {
        self.row_ptr[i]..self.row_ptr[i + 1]
    }

    #[inline]
    pub fn col(&self, k: usize) -> usize {
        self.cols[k]
    }

    #[inline]
    pub fn transpose(&self, k: usize) -> usize {
        self.transpose[k]
    }

    #[inline]
    pub fn diag(&self, i: usize) -> usize {
        self.diag[i]
    }

    /// Number of off-diagonal stencil entries, `Card(I*(i))`.
    #[inline]
    pub fn off_diag_count(&self, i: usize) -> usize {
        self.row_ptr[i + 1] - self.row_ptr[i] - 1
    }

    pub fn find(&self, i: usize, j: usize) -> Option<usize> {
        let r = self.row(i);
        self.cols[r.clone()].binary_search(&j).ok().map(|p| r.start + p)
    }
}

/// How a boundary node is post-processed at the end of every stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BoundaryKind {
    /// Boundary node without post-processing ("do nothing").
    Free,
    NonReflecting,
    Reflecting,
    /// Only the discharge is prescribed.
    DirichletDischarge,
    Dirichlet,
}

impl BoundaryKind {
    /// Higher wins at nodes touching faces of different kinds.
    fn precedence(self) -> u8 {
        match self {
            BoundaryKind::Free => 0,
            BoundaryKind::NonReflecting => 1,
            BoundaryKind::Reflecting => 2,
            BoundaryKind::DirichletDischarge => 3,
            BoundaryKind::Dirichlet => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BoundaryKind::Free => "free",
            BoundaryKind::NonReflecting => "nonreflecting",
            BoundaryKind::Reflecting => "reflecting",
            BoundaryKind::DirichletDischarge => "dirichlet_discharge",
            BoundaryKind::Dirichlet => "dirichlet",
        }
    }
}

/// A boundary degree of freedom with its resolved kind and unit normal.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryNode {
    pub node: usize,
    pub kind: BoundaryKind,
    /// Normalized `∫ φ_i n ds` over the faces of `kind`.
    pub normal: Vec2,
    /// Set when the normal integral vanished; the reflecting projection is
    /// then applied once per adjacent face normal in `face_normals`.
    pub flagged: bool,
    pub face_normals: Vec<Vec2>,
}

/// Side tags for a rectangle, in the order left, right, bottom, top.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RectangleBoundary {
    pub left: BoundaryKind,
    pub right: BoundaryKind,
    pub bottom: BoundaryKind,
    pub top: BoundaryKind,
}

impl RectangleBoundary {
    pub fn uniform(kind: BoundaryKind) -> Self {
        RectangleBoundary { left: kind, right: kind, bottom: kind, top: kind }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cells {
    Intervals(Vec<[usize; 2]>),
    Quads(Vec<[usize; 4]>),
}

/// Boundary face: a point in 1D, an edge in 2D.
#[derive(Debug, Clone)]
struct Face {
    nodes: Vec<usize>,
    normal: Vec2,
    measure: f64,
    kind: BoundaryKind,
}

#[derive(Debug, Clone)]
pub struct MeshGraph {
    dim: usize,
    coords: Vec<Vec2>,
    lumped_mass: Vec<f64>,
    sparsity: Sparsity,
    mass: Vec<f64>,
    c: Vec<Vec2>,
    c_norm: Vec<f64>,
    is_boundary: Vec<bool>,
    boundary: Vec<BoundaryNode>,
    cells: Cells,
    measure: f64,
    min_edge: f64,
}

impl MeshGraph {
    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn node_count(&self) -> usize {
        self.coords.len()
    }

    #[inline]
    pub fn coords(&self) -> &[Vec2] {
        &self.coords
    }

    #[inline]
    pub fn lumped_mass(&self) -> &[f64] {
        &self.lumped_mass
    }

    #[inline]
    pub fn sparsity(&self) -> &Sparsity {
        &self.sparsity
    }

    /// Consistent mass entry `m_ij` by entry index.
    #[inline]
    pub fn mass_entries(&self) -> &[f64] {
        &self.mass
    }

    #[inline]
    pub fn c_entries(&self) -> &[Vec2] {
        &self.c
    }

    /// `‖c_ij‖` by entry index.
    #[inline]
    pub fn c_norms(&self) -> &[f64] {
        &self.c_norm
    }

    pub fn c(&self, i: usize, j: usize) -> Vec2 {
        self.sparsity.find(i, j).map_or([0.0; 2], |k| self.c[k])
    }

    pub fn m(&self, i: usize, j: usize) -> f64 {
        self.sparsity.find(i, j).map_or(0.0, |k| self.mass[k])
    }

    #[inline]
    pub fn is_boundary(&self, i: usize) -> bool {
        self.is_boundary[i]
    }

    pub fn boundary_nodes(&self) -> &[BoundaryNode] {
        &self.boundary
    }

    pub fn cells(&self) -> &Cells {
        &self.cells
    }

    /// Measure of the domain, `|D|`.
    pub fn measure(&self) -> f64 {
        self.measure
    }

    /// Smallest cell edge before distortion.
    pub fn min_edge(&self) -> f64 {
        self.min_edge
    }

    /// Debug dump: `node,x,y,m,z`.
    pub fn write_csv(&self, bathymetry: &[f64], path: &Path) -> Result<()> {
        let mut out = String::from("node,x,y,m,z\n");
        for (i, x) in self.coords.iter().enumerate() {
            let z = bathymetry.get(i).copied().unwrap_or(0.0);
            writeln!(out, "{i},{:.16e},{:.16e},{:.16e},{:.16e}", x[0], x[1], self.lumped_mass[i], z).unwrap();
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    /// Assemble from per-cell element matrices. `local` yields, per cell,
    /// the node list, the local mass matrix and the local `c` matrix
    /// (`c[a][b] = ∫ φ_a ∇φ_b`).
    fn assemble(
        dim: usize,
        coords: Vec<Vec2>,
        cells: Cells,
        locals: Vec<(Vec<usize>, Vec<Vec<f64>>, Vec<Vec<Vec2>>)>,
        faces: Vec<Face>,
        min_edge: f64,
    ) -> Result<Self> {
        let n = coords.len();
        let mut rows = vec![BTreeSet::new(); n];
        for (nodes, _, _) in &locals {
            for &a in nodes {
                for &b in nodes {
                    rows[a].insert(b);
                }
            }
        }
        let sparsity = Sparsity::from_rows(rows);
        let nnz = sparsity.nnz();
        let mut mass = vec![0.0; nnz];
        let mut c = vec![[0.0; 2]; nnz];
        for (nodes, m_loc, c_loc) in &locals {
            for (a, &i) in nodes.iter().enumerate() {
                for (b, &j) in nodes.iter().enumerate() {
                    let k = sparsity.find(i, j).unwrap();
                    mass[k] += m_loc[a][b];
                    c[k][0] += c_loc[a][b][0];
                    c[k][1] += c_loc[a][b][1];
                }
            }
        }

        let mut is_boundary = vec![false; n];
        for f in &faces {
            for &i in &f.nodes {
                is_boundary[i] = true;
            }
        }

        // Mirror: m symmetric everywhere, c antisymmetric unless both ends
        // are boundary nodes.
        for i in 0..n {
            for k in sparsity.row(i) {
                let j = sparsity.col(k);
                if j <= i {
                    continue;
                }
                let kt = sparsity.transpose(k);
                mass[kt] = mass[k];
                if !(is_boundary[i] && is_boundary[j]) {
                    c[kt] = [-c[k][0], -c[k][1]];
                }
            }
        }
        // Diagonal of c closes the row sum.
        for i in 0..n {
            let kd = sparsity.diag(i);
            let mut s = [0.0; 2];
            for k in sparsity.row(i) {
                if k != kd {
                    s[0] += c[k][0];
                    s[1] += c[k][1];
                }
            }
            c[kd] = [-s[0], -s[1]];
        }

        let lumped_mass: Vec<f64> = (0..n).map(|i| sparsity.row(i).map(|k| mass[k]).sum()).collect();
        if let Some(i) = lumped_mass.iter().position(|&m| !(m > 0.0)) {
            return Err(Error::Mesh(format!("non-positive lumped mass at node {i}")));
        }
        let measure = lumped_mass.iter().sum();
        let c_norm = c.iter().map(|&v| norm(v)).collect();
        let boundary = boundary_normals(n, &faces);

        Ok(MeshGraph {
            dim,
            coords,
            lumped_mass,
            sparsity,
            mass,
            c,
            c_norm,
            is_boundary,
            boundary,
            cells,
            measure,
            min_edge,
        })
    }
}

/// Uniform interval mesh with piecewise-linear elements. `tags` holds the
/// left and right boundary kinds.
pub fn build_interval_mesh(
    n_cells: usize,
    x_left: f64,
    x_right: f64,
    tags: [BoundaryKind; 2],
) -> Result<MeshGraph> {
    if n_cells < 2 {
        return Err(Error::Mesh(format!("need at least 2 cells, got {n_cells}")));
    }
    if !(x_right > x_left) || !x_left.is_finite() || !x_right.is_finite() {
        return Err(Error::Mesh(format!("degenerate interval [{x_left}, {x_right}]")));
    }
    let dx = (x_right - x_left) / n_cells as f64;
    let coords: Vec<Vec2> = (0..=n_cells)
        .map(|i| if i == n_cells { [x_right, 0.0] } else { [x_left + i as f64 * dx, 0.0] })
        .collect();
    let mut cells = Vec::with_capacity(n_cells);
    let mut locals = Vec::with_capacity(n_cells);
    for e in 0..n_cells {
        let len = coords[e + 1][0] - coords[e][0];
        cells.push([e, e + 1]);
        let m = vec![vec![len / 3.0, len / 6.0], vec![len / 6.0, len / 3.0]];
        let c = vec![vec![[-0.5, 0.0], [0.5, 0.0]], vec![[-0.5, 0.0], [0.5, 0.0]]];
        locals.push((vec![e, e + 1], m, c));
    }
    let faces = vec![
        Face { nodes: vec![0], normal: [-1.0, 0.0], measure: 1.0, kind: tags[0] },
        Face { nodes: vec![n_cells], normal: [1.0, 0.0], measure: 1.0, kind: tags[1] },
    ];
    MeshGraph::assemble(1, coords, Cells::Intervals(cells), locals, faces, dx)
}

/// Parameters of a rectangular quadrilateral mesh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadMeshSpec {
    pub nx: usize,
    pub ny: usize,
    /// `[x0, y0, x1, y1]`.
    pub extent: [f64; 4],
    /// Interior node offsets as a fraction of the smallest cell edge.
    pub distortion: f64,
    pub seed: u64,
    pub tags: RectangleBoundary,
}

const GAUSS_1D: [(f64, f64); 2] = [
    (0.5 - 0.288_675_134_594_812_9, 0.5),
    (0.5 + 0.288_675_134_594_812_9, 0.5),
];

/// Counter-based generator (splitmix64 finalizer) keyed by seed and counter.
fn splitmix(seed: u64, counter: u64) -> u64 {
    let mut z = seed ^ counter.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn unit_f64(bits: u64) -> f64 {
    (bits >> 11) as f64 / (1u64 << 53) as f64
}

/// Bilinear quadrilateral mesh of a rectangle with optional deterministic
/// distortion of the interior nodes.
pub fn build_quad_mesh(spec: &QuadMeshSpec) -> Result<MeshGraph> {
    let QuadMeshSpec { nx, ny, extent, distortion, seed, tags } = *spec;
    if nx < 2 || ny < 2 {
        return Err(Error::Mesh(format!("need at least 2x2 cells, got {nx}x{ny}")));
    }
    let [x0, y0, x1, y1] = extent;
    if !(x1 > x0 && y1 > y0) {
        return Err(Error::Mesh(format!("degenerate extent {extent:?}")));
    }
    if !(0.0..0.5).contains(&distortion) {
        return Err(Error::Mesh(format!("distortion amplitude {distortion} must lie in [0, 0.5)")));
    }
    let dx = (x1 - x0) / nx as f64;
    let dy = (y1 - y0) / ny as f64;
    let min_edge = dx.min(dy);
    let id = |ix: usize, iy: usize| iy * (nx + 1) + ix;

    let mut coords = Vec::with_capacity((nx + 1) * (ny + 1));
    for iy in 0..=ny {
        for ix in 0..=nx {
            let x = if ix == nx { x1 } else { x0 + ix as f64 * dx };
            let y = if iy == ny { y1 } else { y0 + iy as f64 * dy };
            coords.push([x, y]);
        }
    }
    if distortion > 0.0 {
        for iy in 1..ny {
            for ix in 1..nx {
                let i = id(ix, iy);
                let r = unit_f64(splitmix(seed, 2 * i as u64));
                let theta = 2.0 * std::f64::consts::PI * unit_f64(splitmix(seed, 2 * i as u64 + 1));
                let amp = distortion * min_edge * r;
                coords[i][0] += amp * theta.cos();
                coords[i][1] += amp * theta.sin();
            }
        }
    }

    let mut cells = Vec::with_capacity(nx * ny);
    let mut locals = Vec::with_capacity(nx * ny);
    for iy in 0..ny {
        for ix in 0..nx {
            // Counter-clockwise.
            let nodes = [id(ix, iy), id(ix + 1, iy), id(ix + 1, iy + 1), id(ix, iy + 1)];
            let xs = nodes.map(|n| coords[n]);
            let (m, c) = q1_element(&xs).map_err(|_| {
                Error::Mesh(format!("inverted or degenerate cell ({ix}, {iy})"))
            })?;
            cells.push(nodes);
            locals.push((nodes.to_vec(), m, c));
        }
    }

    let mut faces = Vec::new();
    for ix in 0..nx {
        let a = id(ix, 0);
        let b = id(ix + 1, 0);
        faces.push(Face { nodes: vec![a, b], normal: [0.0, -1.0], measure: dx, kind: tags.bottom });
        let a = id(ix, ny);
        let b = id(ix + 1, ny);
        faces.push(Face { nodes: vec![a, b], normal: [0.0, 1.0], measure: dx, kind: tags.top });
    }
    for iy in 0..ny {
        let a = id(0, iy);
        let b = id(0, iy + 1);
        faces.push(Face { nodes: vec![a, b], normal: [-1.0, 0.0], measure: dy, kind: tags.left });
        let a = id(nx, iy);
        let b = id(nx, iy + 1);
        faces.push(Face { nodes: vec![a, b], normal: [1.0, 0.0], measure: dy, kind: tags.right });
    }

    MeshGraph::assemble(2, coords, Cells::Quads(cells), locals, faces, min_edge)
}

type ElementMatrices = (Vec<Vec<f64>>, Vec<Vec<Vec2>>);

/// Local mass and `c` matrices of a bilinear quadrilateral, 2×2 Gauss.
fn q1_element(xs: &[Vec2; 4]) -> std::result::Result<ElementMatrices, ()> {
    // Reference corners (0,0), (1,0), (1,1), (0,1).
    const REF: [(f64, f64); 4] = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)];
    let shape = |a: usize, s: f64, t: f64| -> (f64, [f64; 2]) {
        let (sa, ta) = REF[a];
        let fs = if sa == 0.0 { 1.0 - s } else { s };
        let ft = if ta == 0.0 { 1.0 - t } else { t };
        let ds = if sa == 0.0 { -1.0 } else { 1.0 };
        let dt = if ta == 0.0 { -1.0 } else { 1.0 };
        (fs * ft, [ds * ft, fs * dt])
    };

    // det J is bilinear, so positivity at the corners covers the cell.
    for &(s, t) in &REF {
        let mut jac = [[0.0; 2]; 2];
        for (a, x) in xs.iter().enumerate() {
            let (_, g) = shape(a, s, t);
            for r in 0..2 {
                for cc in 0..2 {
                    jac[r][cc] += x[r] * g[cc];
                }
            }
        }
        if jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0] <= 0.0 {
            return Err(());
        }
    }

    let mut m = vec![vec![0.0; 4]; 4];
    let mut c = vec![vec![[0.0; 2]; 4]; 4];
    for &(s, ws) in &GAUSS_1D {
        for &(t, wt) in &GAUSS_1D {
            let mut phi = [0.0; 4];
            let mut gref = [[0.0; 2]; 4];
            let mut jac = [[0.0; 2]; 2];
            for a in 0..4 {
                let (p, g) = shape(a, s, t);
                phi[a] = p;
                gref[a] = g;
                for r in 0..2 {
                    for cc in 0..2 {
                        jac[r][cc] += xs[a][r] * g[cc];
                    }
                }
            }
            let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
            // ∇φ = J^{-T} ∇̂φ; J^{-T} = (1/det) [[j11, -j10], [-j01, j00]].
            let grad: Vec<Vec2> = gref
                .iter()
                .map(|g| {
                    [
                        (jac[1][1] * g[0] - jac[1][0] * g[1]) / det,
                        (-jac[0][1] * g[0] + jac[0][0] * g[1]) / det,
                    ]
                })
                .collect();
            let w = ws * wt * det;
            for a in 0..4 {
                for b in 0..4 {
                    m[a][b] += w * phi[a] * phi[b];
                    c[a][b][0] += w * phi[a] * grad[b][0];
                    c[a][b][1] += w * phi[a] * grad[b][1];
                }
            }
        }
    }
    Ok((m, c))
}

/// Resolve the boundary kind of every boundary node and compute the unit
/// normals `∫ φ_i n ds / ‖·‖` over the faces of that kind.
fn boundary_normals(n: usize, faces: &[Face]) -> Vec<BoundaryNode> {
    let mut kind: Vec<Option<BoundaryKind>> = vec![None; n];
    for f in faces {
        for &i in &f.nodes {
            kind[i] = Some(match kind[i] {
                Some(k) if k.precedence() >= f.kind.precedence() => k,
                _ => f.kind,
            });
        }
    }
    let mut integral = vec![[0.0; 2]; n];
    let mut face_normals: Vec<Vec<Vec2>> = vec![Vec::new(); n];
    for f in faces {
        // Linear basis functions on a straight face integrate to measure / #nodes.
        let w = f.measure / f.nodes.len() as f64;
        for &i in &f.nodes {
            if kind[i] == Some(f.kind) {
                integral[i][0] += w * f.normal[0];
                integral[i][1] += w * f.normal[1];
                if !face_normals[i].contains(&f.normal) {
                    face_normals[i].push(f.normal);
                }
            }
        }
    }
    let scale_ref = faces.iter().map(|f| f.measure).fold(0.0, f64::max);
    (0..n)
        .filter_map(|i| {
            let k = kind[i]?;
            let len = norm(integral[i]);
            let flagged = len <= 1e-12 * scale_ref;
            let normal = if flagged { [0.0; 2] } else { scale(integral[i], 1.0 / len) };
            Some(BoundaryNode {
                node: i,
                kind: k,
                normal,
                flagged,
                face_normals: if flagged { std::mem::take(&mut face_normals[i]) } else { Vec::new() },
            })
        })
        .collect()
}
