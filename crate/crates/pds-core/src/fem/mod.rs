//! Mesh representation and P1/P0 finite-element building blocks.
//!
//! The domain is a rectangle triangulated by structured crossed-diagonal
//! P1 triangles. Displacements and damage are continuous piecewise-linear
//! (P1) nodal fields; elastic and plastic strains are piecewise-constant
//! (P0) per-triangle fields, the lowest-order pairing consistent with the
//! incremental minimization structure.
//!
//! Submodules:
//! * [`sparse`] — symmetric CSR matrices, Jacobi-preconditioned conjugate
//!   gradients, dense reference solve, Dirichlet elimination;
//! * [`assemble`] — visco-elastic stiffness assembly, lumped mass,
//!   p-Laplacian energy/gradient.

mod assemble;
mod sparse;

pub use assemble::{
    assemble_visc_elast_matrix, lumped_mass, p_laplacian_energy_grad, scalar_lumped_area,
};
pub use sparse::{cg_solve, cg_solve_warm, dense_solve_spd, ConstrainedSystem, SparseSym};

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{ConfigError, Error};
use crate::tensor::Sym2;

/// One rectangle side, used to select which boundary parts carry prescribed
/// displacements.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

/// A set of rectangle sides.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SideSet {
    pub left: bool,
    pub right: bool,
    pub bottom: bool,
    pub top: bool,
}

impl SideSet {
    pub fn empty() -> Self {
        SideSet::default()
    }

    pub fn with(mut self, side: Side) -> Self {
        match side {
            Side::Left => self.left = true,
            Side::Right => self.right = true,
            Side::Bottom => self.bottom = true,
            Side::Top => self.top = true,
        }
        self
    }

    pub fn is_empty(&self) -> bool {
        !(self.left || self.right || self.bottom || self.top)
    }

    /// Parse a comma-separated side list, e.g. `"left,right"`.
    pub fn parse(s: &str) -> Result<Self, ConfigError> {
        let mut set = SideSet::empty();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            set = match part {
                "left" => set.with(Side::Left),
                "right" => set.with(Side::Right),
                "bottom" => set.with(Side::Bottom),
                "top" => set.with(Side::Top),
                other => {
                    return Err(ConfigError::InvalidParameter(format!(
                        "unknown side `{other}` (expected left/right/bottom/top)"
                    )))
                }
            };
        }
        Ok(set)
    }

    /// Render back to the comma-separated form accepted by [`SideSet::parse`].
    pub fn render(&self) -> String {
        let mut parts = Vec::new();
        if self.left {
            parts.push("left");
        }
        if self.right {
            parts.push("right");
        }
        if self.bottom {
            parts.push("bottom");
        }
        if self.top {
            parts.push("top");
        }
        parts.join(",")
    }
}

/// Triangulated rectangle with boundary tagging and precomputed per-triangle
/// geometry.
///
/// Invariants established by the constructors:
/// * every triangle is counterclockwise with strictly positive area;
/// * every boundary edge is tagged exactly once, either as Dirichlet-adjacent
///   (both endpoints carry prescribed displacements) or as traction-free
///   Neumann;
/// * at least one node is a Dirichlet node (the model needs a clamped
///   boundary part of positive measure for coercivity).
#[derive(Clone, Debug)]
pub struct Mesh {
    /// Node coordinates.
    pub nodes: Vec<[f64; 2]>,
    /// Triangle vertex indices, counterclockwise.
    pub tris: Vec<[usize; 3]>,
    /// Sorted indices of nodes with prescribed displacement.
    pub dirichlet_nodes: Vec<usize>,
    /// Traction-free boundary edges (sorted vertex pairs, sorted list).
    pub neumann_edges: Vec<[usize; 2]>,
    /// Per-triangle area.
    pub tri_area: Vec<f64>,
    /// Per-triangle constant gradients of the three P1 shape functions.
    pub tri_grads: Vec<[[f64; 2]; 3]>,
    /// Per-node Dirichlet flag (same content as `dirichlet_nodes`).
    dirichlet_flag: Vec<bool>,
}

impl Mesh {
    /// Build a mesh from raw nodes, triangles, and per-node Dirichlet flags,
    /// computing geometry and boundary tagging and validating all invariants.
    pub fn from_raw(
        nodes: Vec<[f64; 2]>,
        tris: Vec<[usize; 3]>,
        dirichlet_flag: Vec<bool>,
    ) -> Result<Mesh, ConfigError> {
        let n = nodes.len();
        if dirichlet_flag.len() != n {
            return Err(ConfigError::Mesh(format!(
                "{} dirichlet flags for {} nodes",
                dirichlet_flag.len(),
                n
            )));
        }
        if tris.is_empty() {
            return Err(ConfigError::Mesh("mesh has no triangles".into()));
        }
        let mut tri_area = Vec::with_capacity(tris.len());
        let mut tri_grads = Vec::with_capacity(tris.len());
        // Count undirected edge occurrences to find the boundary.
        let mut edge_count: BTreeMap<[usize; 2], usize> = BTreeMap::new();
        for (t, tri) in tris.iter().enumerate() {
            for &v in tri {
                if v >= n {
                    return Err(ConfigError::Mesh(format!(
                        "triangle {t} references node {v} out of {n}"
                    )));
                }
            }
            let [a, b, c] = *tri;
            let p = nodes[a];
            let q = nodes[b];
            let r = nodes[c];
            let two_a = (q[0] - p[0]) * (r[1] - p[1]) - (r[0] - p[0]) * (q[1] - p[1]);
            if two_a <= 0.0 {
                return Err(ConfigError::Mesh(format!(
                    "triangle {t} = ({a},{b},{c}) is degenerate or clockwise (2A = {two_a:e})"
                )));
            }
            let area = 0.5 * two_a;
            tri_area.push(area);
            // grad of the barycentric function of vertex i: rotated opposite
            // edge over 2A.
            let g = |pa: [f64; 2], pb: [f64; 2]| [(pa[1] - pb[1]) / two_a, (pb[0] - pa[0]) / two_a];
            tri_grads.push([g(q, r), g(r, p), g(p, q)]);
            for (u, v) in [(a, b), (b, c), (c, a)] {
                let key = if u < v { [u, v] } else { [v, u] };
                *edge_count.entry(key).or_insert(0) += 1;
            }
        }
        let mut neumann_edges = Vec::new();
        for (edge, count) in edge_count {
            match count {
                1 => {
                    // Boundary edge: Dirichlet-adjacent iff both endpoints are
                    // constrained, traction-free Neumann otherwise.
                    if !(dirichlet_flag[edge[0]] && dirichlet_flag[edge[1]]) {
                        neumann_edges.push(edge);
                    }
                }
                2 => {}
                c => {
                    return Err(ConfigError::Mesh(format!(
                        "edge {edge:?} appears in {c} triangles (non-manifold mesh)"
                    )))
                }
            }
        }
        let dirichlet_nodes: Vec<usize> =
            (0..n).filter(|&v| dirichlet_flag[v]).collect();
        if dirichlet_nodes.is_empty() {
            return Err(ConfigError::Mesh(
                "no Dirichlet nodes: a clamped boundary part is required".into(),
            ));
        }
        Ok(Mesh { nodes, tris, dirichlet_nodes, neumann_edges, tri_area, tri_grads, dirichlet_flag })
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_tris(&self) -> usize {
        self.tris.len()
    }

    /// Number of displacement degrees of freedom (two per node).
    pub fn n_dofs(&self) -> usize {
        2 * self.nodes.len()
    }

    pub fn is_dirichlet(&self, node: usize) -> bool {
        self.dirichlet_flag[node]
    }

    /// Per-dof constraint mask (both components of a Dirichlet node are
    /// prescribed).
    pub fn dirichlet_dof_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.n_dofs()];
        for &v in &self.dirichlet_nodes {
            mask[2 * v] = true;
            mask[2 * v + 1] = true;
        }
        mask
    }

    /// Triangle average of a nodal scalar field.
    #[inline]
    pub fn tri_avg(&self, field: &[f64], t: usize) -> f64 {
        let [a, b, c] = self.tris[t];
        (field[a] + field[b] + field[c]) / 3.0
    }

    /// Centroid of a triangle.
    pub fn centroid(&self, t: usize) -> [f64; 2] {
        let [a, b, c] = self.tris[t];
        [
            (self.nodes[a][0] + self.nodes[b][0] + self.nodes[c][0]) / 3.0,
            (self.nodes[a][1] + self.nodes[b][1] + self.nodes[c][1]) / 3.0,
        ]
    }

    /// Serialize to the plain-text interchange format:
    ///
    /// ```text
    /// nodes N tris M
    /// x y dflag        (N lines, dflag 1 = Dirichlet node)
    /// i j k            (M lines, 0-based vertex indices)
    /// ```
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "nodes {} tris {}", self.n_nodes(), self.n_tris());
        for (v, p) in self.nodes.iter().enumerate() {
            let flag = u8::from(self.dirichlet_flag[v]);
            let _ = writeln!(out, "{:.17e} {:.17e} {}", p[0], p[1], flag);
        }
        for t in &self.tris {
            let _ = writeln!(out, "{} {} {}", t[0], t[1], t[2]);
        }
        out
    }

    /// Parse the plain-text interchange format produced by [`Mesh::to_text`].
    pub fn from_text(text: &str) -> Result<Mesh, ConfigError> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| ConfigError::Mesh("empty mesh file".into()))?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        let bad_header =
            || ConfigError::Mesh(format!("bad mesh header `{header}` (want `nodes N tris M`)"));
        if parts.len() != 4 || parts[0] != "nodes" || parts[2] != "tris" {
            return Err(bad_header());
        }
        let n: usize = parts[1].parse().map_err(|_| bad_header())?;
        let m: usize = parts[3].parse().map_err(|_| bad_header())?;
        let mut nodes = Vec::with_capacity(n);
        let mut flags = Vec::with_capacity(n);
        let mut tris = Vec::with_capacity(m);
        for _ in 0..n {
            let (idx, line) = lines
                .next()
                .ok_or_else(|| ConfigError::Mesh(format!("expected {n} node lines")))?;
            let f: Vec<&str> = line.split_whitespace().collect();
            let bad =
                || ConfigError::Mesh(format!("bad node at line {}: `{line}`", idx + 1));
            if f.len() != 3 {
                return Err(bad());
            }
            let x: f64 = f[0].parse().map_err(|_| bad())?;
            let y: f64 = f[1].parse().map_err(|_| bad())?;
            let d: u8 = f[2].parse().map_err(|_| bad())?;
            nodes.push([x, y]);
            flags.push(d != 0);
        }
        for _ in 0..m {
            let (idx, line) = lines
                .next()
                .ok_or_else(|| ConfigError::Mesh(format!("expected {m} triangle lines")))?;
            let f: Vec<&str> = line.split_whitespace().collect();
            let bad =
                || ConfigError::Mesh(format!("bad triangle at line {}: `{line}`", idx + 1));
            if f.len() != 3 {
                return Err(bad());
            }
            let a: usize = f[0].parse().map_err(|_| bad())?;
            let b: usize = f[1].parse().map_err(|_| bad())?;
            let c: usize = f[2].parse().map_err(|_| bad())?;
            tris.push([a, b, c]);
        }
        Mesh::from_raw(nodes, tris, flags)
    }

    /// Read the text format from a file.
    pub fn read_file(path: &Path) -> Result<Mesh, Error> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        Ok(Mesh::from_text(&text)?)
    }

    /// Write the text format to a file.
    pub fn write_file(&self, path: &Path) -> Result<(), Error> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path.display().to_string(), e))
    }
}

/// Build a structured crossed-diagonal triangulation of the rectangle
/// `[0, lx] × [0, ly]` with `nx × ny` cells ((nx+1)(ny+1) nodes,
/// `2·nx·ny` triangles). Nodes on the selected sides are Dirichlet.
///
/// The cell diagonal alternates with the parity of `i + j`, which keeps the
/// triangulation free of a preferred shear direction.
pub fn build_rect_mesh(
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    dirichlet_sides: SideSet,
) -> Result<Mesh, ConfigError> {
    if nx == 0 || ny == 0 {
        return Err(ConfigError::Mesh("nx and ny must be >= 1".into()));
    }
    if !(lx > 0.0 && ly > 0.0) {
        return Err(ConfigError::Mesh("lx and ly must be > 0".into()));
    }
    if dirichlet_sides.is_empty() {
        return Err(ConfigError::Mesh(
            "dirichlet_sides must contain at least one side".into(),
        ));
    }
    let node_id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    let mut flags = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            // Endpoints exact: i/nx sums the cell width without drift.
            nodes.push([lx * i as f64 / nx as f64, ly * j as f64 / ny as f64]);
            let on = (dirichlet_sides.left && i == 0)
                || (dirichlet_sides.right && i == nx)
                || (dirichlet_sides.bottom && j == 0)
                || (dirichlet_sides.top && j == ny);
            flags.push(on);
        }
    }
    let mut tris = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let a = node_id(i, j);
            let b = node_id(i + 1, j);
            let c = node_id(i + 1, j + 1);
            let d = node_id(i, j + 1);
            if (i + j) % 2 == 0 {
                tris.push([a, b, c]);
                tris.push([a, c, d]);
            } else {
                tris.push([a, b, d]);
                tris.push([b, c, d]);
            }
        }
    }
    Mesh::from_raw(nodes, tris, flags)
}

/// Constant strain of a P1 displacement field on one triangle: the
/// symmetrized gradient `e(u) = (∇u + ∇uᵀ)/2` evaluated via the precomputed
/// shape-function gradients.
///
/// `u` is the flat dof vector `[u0x, u0y, u1x, u1y, ...]`.
#[inline]
pub fn strain_of(mesh: &Mesh, u: &[f64], tri: usize) -> Sym2 {
    let g = &mesh.tri_grads[tri];
    let [a, b, c] = mesh.tris[tri];
    let mut dux_dx = 0.0;
    let mut dux_dy = 0.0;
    let mut duy_dx = 0.0;
    let mut duy_dy = 0.0;
    for (v, gv) in [a, b, c].into_iter().zip(g) {
        let ux = u[2 * v];
        let uy = u[2 * v + 1];
        dux_dx += ux * gv[0];
        dux_dy += ux * gv[1];
        duy_dx += uy * gv[0];
        duy_dy += uy * gv[1];
    }
    Sym2::new(dux_dx, duy_dy, 0.5 * (dux_dy + duy_dx))
}
