//! Simplicial meshes (segments in 1D, triangles in 2D) with outward boundary normals.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::OnceLock;

use crate::domain::{point_segment_distance, Domain};
use crate::error::{Result, VexError};

/// A boundary facet: an end point in 1D, an edge in 2D.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryFacet {
    /// Facet vertices; in 1D both entries are the same node.
    pub nodes: [usize; 2],
    /// Outward unit normal.
    pub normal: [f64; 2],
    /// Length of the edge (2D) or 1 (1D).
    pub measure: f64,
    /// The unique cell adjacent to this facet.
    pub cell: usize,
}

/// Per-cell geometric data: volume, diameter and the (constant) gradients of the barycentric
/// coordinate functions.
#[derive(Clone, Debug, PartialEq)]
pub struct CellGeometry {
    pub volume: f64,
    pub diameter: f64,
    pub grad_bary: [[f64; 2]; 3],
}

/// A point on the boundary handed to boundary densities.
#[derive(Clone, Copy, Debug)]
pub struct FacetPoint {
    pub x: [f64; 2],
    pub normal: [f64; 2],
    pub facet: usize,
    pub cell: usize,
}

#[derive(Debug)]
struct Locator {
    lo: [f64; 2],
    cell_size: [f64; 2],
    counts: [usize; 2],
    buckets: Vec<Vec<usize>>,
}

#[derive(Debug)]
pub struct Mesh {
    dim: usize,
    nodes: Vec<[f64; 2]>,
    cells: Vec<[usize; 3]>,
    geometry: Vec<CellGeometry>,
    facets: Vec<BoundaryFacet>,
    boundary_node: Vec<bool>,
    h: f64,
    geometric_error: f64,
    locator: OnceLock<Locator>,
}

impl Clone for Mesh {
    fn clone(&self) -> Self {
        Mesh {
            dim: self.dim,
            nodes: self.nodes.clone(),
            cells: self.cells.clone(),
            geometry: self.geometry.clone(),
            facets: self.facets.clone(),
            boundary_node: self.boundary_node.clone(),
            h: self.h,
            geometric_error: self.geometric_error,
            locator: OnceLock::new(),
        }
    }
}

impl PartialEq for Mesh {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.nodes == other.nodes && self.cells == other.cells
    }
}

impl Mesh {
    /// Build a mesh from node coordinates and cell connectivity. Cells are reoriented to positive
    /// volume; boundary facets and normals are derived from the connectivity.
    ///
    /// In 1D only the first coordinate of each node and the first two cell entries are used.
    pub fn from_parts(dim: usize, nodes: Vec<[f64; 2]>, mut cells: Vec<[usize; 3]>) -> Result<Self> {
        if !(dim == 1 || dim == 2) {
            return Err(VexError::MeshFailure(format!("meshes are 1D or 2D, got dimension {dim}")));
        }
        if cells.is_empty() {
            return Err(VexError::MeshFailure("mesh has no cells".into()));
        }
        let nv = dim + 1;
        for (c, cell) in cells.iter().enumerate() {
            if cell[..nv].iter().any(|&i| i >= nodes.len()) {
                return Err(VexError::MeshFailure(format!("cell {c} references a missing node")));
            }
        }
        let mut geometry = Vec::with_capacity(cells.len());
        let mut h: f64 = 0.0;
        for (c, cell) in cells.iter_mut().enumerate() {
            let g = if dim == 1 {
                if nodes[cell[1]][0] < nodes[cell[0]][0] {
                    cell.swap(0, 1);
                }
                let len = nodes[cell[1]][0] - nodes[cell[0]][0];
                if len <= 0.0 {
                    return Err(VexError::DegenerateCell { cell: c });
                }
                CellGeometry {
                    volume: len,
                    diameter: len,
                    grad_bary: [[-1.0 / len, 0.0], [1.0 / len, 0.0], [0.0, 0.0]],
                }
            } else {
                let mut det = tri_det(&nodes, cell);
                if det < 0.0 {
                    cell.swap(1, 2);
                    det = -det;
                }
                let [p0, p1, p2] = [nodes[cell[0]], nodes[cell[1]], nodes[cell[2]]];
                let scale = edge_len(&p0, &p1).max(edge_len(&p1, &p2)).max(edge_len(&p0, &p2));
                if det <= 1e-14 * scale * scale {
                    return Err(VexError::DegenerateCell { cell: c });
                }
                let (a, b) = (p1[0] - p0[0], p2[0] - p0[0]);
                let (cc, d) = (p1[1] - p0[1], p2[1] - p0[1]);
                let g1 = [d / det, -b / det];
                let g2 = [-cc / det, a / det];
                CellGeometry {
                    volume: 0.5 * det,
                    diameter: scale,
                    grad_bary: [[-g1[0] - g2[0], -g1[1] - g2[1]], g1, g2],
                }
            };
            h = h.max(g.diameter);
            geometry.push(g);
        }

        let mut facets = Vec::new();
        if dim == 1 {
            let mut count = vec![0usize; nodes.len()];
            for cell in &cells {
                count[cell[0]] += 1;
                count[cell[1]] += 1;
            }
            for (c, cell) in cells.iter().enumerate() {
                for (local, sign) in [(0, -1.0), (1, 1.0)] {
                    let n = cell[local];
                    if count[n] == 1 {
                        facets.push(BoundaryFacet {
                            nodes: [n, n],
                            normal: [sign, 0.0],
                            measure: 1.0,
                            cell: c,
                        });
                    }
                }
            }
        } else {
            let mut edge_count: BTreeMap<(usize, usize), usize> = BTreeMap::new();
            for cell in &cells {
                for (i, j) in [(0, 1), (1, 2), (2, 0)] {
                    let key = (cell[i].min(cell[j]), cell[i].max(cell[j]));
                    *edge_count.entry(key).or_insert(0) += 1;
                }
            }
            if let Some((e, n)) = edge_count.iter().find(|(_, &n)| n > 2) {
                return Err(VexError::MeshFailure(format!("edge {e:?} shared by {n} cells")));
            }
            for (c, cell) in cells.iter().enumerate() {
                for (i, j) in [(0, 1), (1, 2), (2, 0)] {
                    let key = (cell[i].min(cell[j]), cell[i].max(cell[j]));
                    if edge_count[&key] == 1 {
                        // positively oriented cell: outward normal of edge (i -> j) is its right-hand perpendicular
                        let (a, b) = (nodes[cell[i]], nodes[cell[j]]);
                        let len = edge_len(&a, &b);
                        facets.push(BoundaryFacet {
                            nodes: [cell[i], cell[j]],
                            normal: [(b[1] - a[1]) / len, -(b[0] - a[0]) / len],
                            measure: len,
                            cell: c,
                        });
                    }
                }
            }
        }
        if facets.is_empty() {
            return Err(VexError::MeshFailure("mesh has no boundary".into()));
        }
        let mut boundary_node = vec![false; nodes.len()];
        for f in &facets {
            boundary_node[f.nodes[0]] = true;
            boundary_node[f.nodes[1]] = true;
        }
        Ok(Mesh {
            dim,
            nodes,
            cells,
            geometry,
            facets,
            boundary_node,
            h,
            geometric_error: 0.0,
            locator: OnceLock::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    /// Vertex indices of cell `c` (`dim + 1` entries).
    pub fn cell(&self, c: usize) -> &[usize] {
        &self.cells[c][..self.dim + 1]
    }

    pub fn geometry(&self, c: usize) -> &CellGeometry {
        &self.geometry[c]
    }

    pub fn facets(&self) -> &[BoundaryFacet] {
        &self.facets
    }

    pub fn is_boundary_node(&self, i: usize) -> bool {
        self.boundary_node[i]
    }

    pub fn boundary_nodes(&self) -> &[bool] {
        &self.boundary_node
    }

    /// Maximum cell diameter.
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Relative area/length mismatch between the mesh and the domain it was built from
    /// (nonzero only for curved boundaries approximated by polygons).
    pub fn geometric_error(&self) -> f64 {
        self.geometric_error
    }

    pub fn volume(&self) -> f64 {
        self.geometry.iter().map(|g| g.volume).sum()
    }

    pub fn diameter(&self) -> f64 {
        let (lo, hi) = self.bbox();
        ((hi[0] - lo[0]).powi(2) + (hi[1] - lo[1]).powi(2)).sqrt()
    }

    pub fn bbox(&self) -> ([f64; 2], [f64; 2]) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in &self.nodes {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        (lo, hi)
    }

    /// Physical point of barycentric coordinates `bary` in cell `c`.
    pub fn point(&self, c: usize, bary: &[f64; 3]) -> [f64; 2] {
        let mut x = [0.0; 2];
        for (k, &n) in self.cell(c).iter().enumerate() {
            x[0] += bary[k] * self.nodes[n][0];
            x[1] += bary[k] * self.nodes[n][1];
        }
        x
    }

    /// Barycentric coordinates of `x` with respect to cell `c` (may be negative outside).
    pub fn barycentric(&self, c: usize, x: &[f64]) -> [f64; 3] {
        let p0 = self.nodes[self.cells[c][0]];
        let g = &self.geometry[c].grad_bary;
        let dx = [x[0] - p0[0], if self.dim == 2 { x[1] - p0[1] } else { 0.0 }];
        if self.dim == 1 {
            let l1 = g[1][0] * dx[0];
            [1.0 - l1, l1, 0.0]
        } else {
            let l1 = g[1][0] * dx[0] + g[1][1] * dx[1];
            let l2 = g[2][0] * dx[0] + g[2][1] * dx[1];
            [1.0 - l1 - l2, l1, l2]
        }
    }

    /// Cell containing `x` and its barycentric coordinates. Points outside the mesh are
    /// projected onto the closest cell (clamped, renormalized coordinates).
    pub fn locate(&self, x: &[f64]) -> (usize, [f64; 3]) {
        let loc = self.locator.get_or_init(|| self.build_locator());
        let nv = self.dim + 1;
        let score = |c: usize| {
            let b = self.barycentric(c, x);
            let m = b[..nv].iter().cloned().fold(f64::INFINITY, f64::min);
            (m, b)
        };
        let mut best: Option<(f64, usize, [f64; 3])> = None;
        if let Some(bucket) = loc.bucket_of(x, self.dim) {
            for &c in &loc.buckets[bucket] {
                let (m, b) = score(c);
                if best.is_none_or(|(bm, _, _)| m > bm) {
                    best = Some((m, c, b));
                }
            }
        }
        if best.is_none_or(|(m, _, _)| m < -1e-10) {
            for c in 0..self.cells.len() {
                let (m, b) = score(c);
                if best.is_none_or(|(bm, _, _)| m > bm) {
                    best = Some((m, c, b));
                }
            }
        }
        let (m, c, mut b) = best.expect("mesh has cells");
        if m < 0.0 {
            let mut s = 0.0;
            for v in b[..nv].iter_mut() {
                *v = v.max(0.0);
                s += *v;
            }
            for v in b[..nv].iter_mut() {
                *v /= s;
            }
        }
        (c, b)
    }

    fn build_locator(&self) -> Locator {
        let (lo, hi) = self.bbox();
        let n = self.cells.len();
        let counts = if self.dim == 1 {
            [n.max(1), 1]
        } else {
            let k = (n as f64).sqrt().ceil().max(1.0) as usize;
            [k, k]
        };
        let cell_size = [
            ((hi[0] - lo[0]) / counts[0] as f64).max(f64::MIN_POSITIVE),
            ((hi[1] - lo[1]) / counts[1] as f64).max(f64::MIN_POSITIVE),
        ];
        let mut loc = Locator {
            lo,
            cell_size,
            counts,
            buckets: vec![Vec::new(); counts[0] * counts[1]],
        };
        for c in 0..n {
            let mut clo = [f64::INFINITY; 2];
            let mut chi = [f64::NEG_INFINITY; 2];
            for &v in self.cell(c) {
                for k in 0..2 {
                    clo[k] = clo[k].min(self.nodes[v][k]);
                    chi[k] = chi[k].max(self.nodes[v][k]);
                }
            }
            let i0 = loc.index(clo[0], 0);
            let i1 = loc.index(chi[0], 0);
            let (j0, j1) = if self.dim == 2 { (loc.index(clo[1], 1), loc.index(chi[1], 1)) } else { (0, 0) };
            for i in i0..=i1 {
                for j in j0..=j1 {
                    loc.buckets[j * counts[0] + i].push(c);
                }
            }
        }
        loc
    }

    /// Distance from `x` to the mesh boundary.
    pub fn distance_to_boundary(&self, x: &[f64; 2]) -> f64 {
        self.facets
            .iter()
            .map(|f| {
                if self.dim == 1 {
                    (x[0] - self.nodes[f.nodes[0]][0]).abs()
                } else {
                    point_segment_distance(x, &self.nodes[f.nodes[0]], &self.nodes[f.nodes[1]])
                }
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Lumped (row-sum) mass of each node: `volume / (dim + 1)` per incident cell.
    pub fn lumped_mass(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.nodes.len()];
        let nv = self.dim + 1;
        for c in 0..self.cells.len() {
            let share = self.geometry[c].volume / nv as f64;
            for &n in self.cell(c) {
                m[n] += share;
            }
        }
        m
    }

    /// Serialize in the plain-text mesh format:
    /// header `dim nodes cells facets`, then `id x [y]`, `id n1 n2 [n3]`, `id n1 [n2] nx [ny]` lines.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} {} {} {}", self.dim, self.nodes.len(), self.cells.len(), self.facets.len());
        for (i, p) in self.nodes.iter().enumerate() {
            if self.dim == 1 {
                let _ = writeln!(s, "{i} {:e}", p[0]);
            } else {
                let _ = writeln!(s, "{i} {:e} {:e}", p[0], p[1]);
            }
        }
        for c in 0..self.cells.len() {
            let ids: Vec<String> = self.cell(c).iter().map(|n| n.to_string()).collect();
            let _ = writeln!(s, "{c} {}", ids.join(" "));
        }
        for (i, f) in self.facets.iter().enumerate() {
            if self.dim == 1 {
                let _ = writeln!(s, "{i} {} {:e}", f.nodes[0], f.normal[0]);
            } else {
                let _ = writeln!(s, "{i} {} {} {:e} {:e}", f.nodes[0], f.nodes[1], f.normal[0], f.normal[1]);
            }
        }
        s
    }

    /// Parse the plain-text mesh format. Facets are recomputed from the cells and checked against
    /// the listed ones.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines.next().ok_or_else(|| VexError::Parse("empty mesh file".into()))?;
        let h: Vec<usize> = parse_fields(header)?;
        if h.len() != 4 {
            return Err(VexError::Parse(format!("mesh header needs 4 integers, got '{header}'")));
        }
        let (dim, nn, nc, nf) = (h[0], h[1], h[2], h[3]);
        if !(dim == 1 || dim == 2) {
            return Err(VexError::Parse(format!("unsupported mesh dimension {dim}")));
        }
        let mut nodes = vec![[0.0; 2]; nn];
        for _ in 0..nn {
            let line = lines.next().ok_or_else(|| VexError::Parse("missing node line".into()))?;
            let v: Vec<f64> = parse_fields(line)?;
            if v.len() != 1 + dim {
                return Err(VexError::Parse(format!("bad node line '{line}'")));
            }
            let id = checked_id(v[0], nn, line)?;
            nodes[id] = [v[1], if dim == 2 { v[2] } else { 0.0 }];
        }
        let mut cells = vec![[0usize; 3]; nc];
        for _ in 0..nc {
            let line = lines.next().ok_or_else(|| VexError::Parse("missing cell line".into()))?;
            let v: Vec<usize> = parse_fields(line)?;
            if v.len() != 2 + dim || v[0] >= nc {
                return Err(VexError::Parse(format!("bad cell line '{line}'")));
            }
            let mut cell = [0usize; 3];
            cell[..=dim].copy_from_slice(&v[1..]);
            cells[v[0]] = cell;
        }
        let mut listed = Vec::with_capacity(nf);
        for _ in 0..nf {
            let line = lines.next().ok_or_else(|| VexError::Parse("missing facet line".into()))?;
            let v: Vec<f64> = parse_fields(line)?;
            if v.len() != 1 + 2 * dim {
                return Err(VexError::Parse(format!("bad facet line '{line}'")));
            }
            listed.push(v);
        }
        let mesh = Mesh::from_parts(dim, nodes, cells)?;
        if mesh.facets.len() != nf {
            return Err(VexError::MeshFailure(format!(
                "file lists {nf} facets, connectivity implies {}",
                mesh.facets.len()
            )));
        }
        let mut by_nodes: BTreeMap<(usize, usize), [f64; 2]> = BTreeMap::new();
        for f in &mesh.facets {
            by_nodes.insert((f.nodes[0].min(f.nodes[1]), f.nodes[0].max(f.nodes[1])), f.normal);
        }
        for v in listed {
            let (a, b, normal) = if dim == 1 {
                (v[1] as usize, v[1] as usize, [v[2], 0.0])
            } else {
                (v[1] as usize, v[2] as usize, [v[3], v[4]])
            };
            let expected = by_nodes
                .get(&(a.min(b), a.max(b)))
                .ok_or_else(|| VexError::MeshFailure(format!("listed facet ({a}, {b}) is not on the boundary")))?;
            if (expected[0] - normal[0]).abs() > 1e-9 || (expected[1] - normal[1]).abs() > 1e-9 {
                return Err(VexError::MeshFailure(format!("facet ({a}, {b}) normal disagrees with geometry")));
            }
        }
        Ok(mesh)
    }

    /// `(integral of x . nu over the boundary, N |Omega_h|)`; the two agree by the divergence theorem.
    pub fn divergence_check(&self) -> (f64, f64) {
        let flux = boundary_integral(self, |p| p.x[0] * p.normal[0] + p.x[1] * p.normal[1]);
        (flux, self.dim as f64 * self.volume())
    }
}

impl Locator {
    fn index(&self, v: f64, axis: usize) -> usize {
        let i = ((v - self.lo[axis]) / self.cell_size[axis]).floor();
        (i.max(0.0) as usize).min(self.counts[axis] - 1)
    }

    fn bucket_of(&self, x: &[f64], dim: usize) -> Option<usize> {
        let i = self.index(x[0], 0);
        let j = if dim == 2 { self.index(x[1], 1) } else { 0 };
        Some(j * self.counts[0] + i)
    }
}

fn parse_fields<T: std::str::FromStr>(line: &str) -> Result<Vec<T>> {
    line.split_whitespace()
        .map(|t| t.parse::<T>().map_err(|_| VexError::Parse(format!("cannot parse '{t}' in '{line}'"))))
        .collect()
}

fn checked_id(v: f64, n: usize, line: &str) -> Result<usize> {
    if v < 0.0 || v.fract() != 0.0 || v as usize >= n {
        return Err(VexError::Parse(format!("bad id in '{line}'")));
    }
    Ok(v as usize)
}

fn tri_det(nodes: &[[f64; 2]], cell: &[usize; 3]) -> f64 {
    let [p0, p1, p2] = [nodes[cell[0]], nodes[cell[1]], nodes[cell[2]]];
    (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1])
}

fn edge_len(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Facet-wise Gauss quadrature of a boundary density (two points per edge, exact for cubics;
/// point evaluation in 1D).
pub fn boundary_integral(mesh: &Mesh, density: impl Fn(&FacetPoint) -> f64) -> f64 {
    let g = 0.5 / 3f64.sqrt();
    let mut total = 0.0;
    for (i, f) in mesh.facets.iter().enumerate() {
        if mesh.dim == 1 {
            let p = FacetPoint {
                x: mesh.nodes[f.nodes[0]],
                normal: f.normal,
                facet: i,
                cell: f.cell,
            };
            total += density(&p);
        } else {
            let (a, b) = (mesh.nodes[f.nodes[0]], mesh.nodes[f.nodes[1]]);
            for t in [0.5 - g, 0.5 + g] {
                let p = FacetPoint {
                    x: [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])],
                    normal: f.normal,
                    facet: i,
                    cell: f.cell,
                };
                total += 0.5 * f.measure * density(&p);
            }
        }
    }
    total
}

/// Build a conforming simplicial mesh with maximum cell diameter at most `2 * h_target`.
///
/// Intervals are split uniformly. Polygons are ear-clipped and refined uniformly (each triangle
/// into four) until the diameter target is met. Disks are meshed by concentric rings of
/// `6k` nodes snapped to the circles `r_k = k R / K`, so the mesh covers an inscribed polygon.
pub fn build_mesh(domain: &Domain, h_target: f64) -> Result<Mesh> {
    domain.validate()?;
    if !(h_target > 0.0 && h_target.is_finite()) {
        return Err(VexError::InvalidInput(format!("h_target must be positive, got {h_target}")));
    }
    let mut mesh = match domain {
        Domain::Interval { a, b } => {
            let n = ((b - a) / h_target).ceil().max(1.0) as usize;
            let nodes = (0..=n).map(|i| [a + (b - a) * i as f64 / n as f64, 0.0]).collect();
            let cells = (0..n).map(|i| [i, i + 1, 0]).collect();
            Mesh::from_parts(1, nodes, cells)?
        }
        Domain::Polygon { vertices } => {
            let mut nodes = vertices.clone();
            let mut cells = ear_clip(vertices)?;
            loop {
                let h = cells
                    .iter()
                    .map(|c| edge_len(&nodes[c[0]], &nodes[c[1]]).max(edge_len(&nodes[c[1]], &nodes[c[2]])).max(edge_len(&nodes[c[0]], &nodes[c[2]])))
                    .fold(0.0, f64::max);
                if h <= h_target {
                    break;
                }
                let (n2, c2) = refine_uniform(&nodes, &cells);
                nodes = n2;
                cells = c2;
            }
            let (nodes, cells) = reorder_rows(nodes, cells);
            Mesh::from_parts(2, nodes, cells)?
        }
        Domain::Disk { center, radius } => {
            let rings = (radius / h_target).ceil().max(1.0) as usize;
            let mut nodes = vec![*center];
            let mut ring_start = vec![0usize];
            for k in 1..=rings {
                ring_start.push(nodes.len());
                let r = radius * k as f64 / rings as f64;
                let m = 6 * k;
                for j in 0..m {
                    let t = 2.0 * std::f64::consts::PI * j as f64 / m as f64;
                    nodes.push([center[0] + r * t.cos(), center[1] + r * t.sin()]);
                }
            }
            let mut cells = Vec::new();
            for k in 1..=rings {
                let (n_in, n_out) = (if k == 1 { 1 } else { 6 * (k - 1) }, 6 * k);
                let (s_in, s_out) = (ring_start[k - 1], ring_start[k]);
                let (mut i, mut j) = (0usize, 0usize);
                while i < n_in || j < n_out {
                    let next_in = if n_in == 1 { f64::INFINITY } else { (i + 1) as f64 / n_in as f64 };
                    let next_out = (j + 1) as f64 / n_out as f64;
                    let inner = |i: usize| s_in + i % n_in;
                    let outer = |j: usize| s_out + j % n_out;
                    if j < n_out && (i >= n_in || n_in == 1 || next_out <= next_in) {
                        cells.push([inner(i), outer(j), outer(j + 1)]);
                        j += 1;
                    } else {
                        cells.push([inner(i), outer(j), inner(i + 1)]);
                        i += 1;
                    }
                    if n_in == 1 && j == n_out {
                        break;
                    }
                }
            }
            Mesh::from_parts(2, nodes, cells)?
        }
        Domain::BallAnalytic { .. } => {
            return Err(VexError::MeshFailure("analytic balls are not meshable".into()));
        }
    };
    mesh.geometric_error = (domain.measure() - mesh.volume()).abs() / domain.measure();
    Ok(mesh)
}

fn ear_clip(vertices: &[[f64; 2]]) -> Result<Vec<[usize; 3]>> {
    let mut idx: Vec<usize> = (0..vertices.len()).collect();
    let mut tris = Vec::new();
    let scale = crate::domain::signed_area(vertices).abs();
    while idx.len() > 3 {
        let n = idx.len();
        let mut clipped = false;
        for k in 0..n {
            let (a, b, c) = (idx[(k + n - 1) % n], idx[k], idx[(k + 1) % n]);
            let (pa, pb, pc) = (vertices[a], vertices[b], vertices[c]);
            let area = (pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]);
            if area <= 1e-12 * scale {
                continue;
            }
            let blocked = idx.iter().any(|&o| {
                if o == a || o == b || o == c {
                    return false;
                }
                let p = vertices[o];
                let d1 = (pb[0] - pa[0]) * (p[1] - pa[1]) - (pb[1] - pa[1]) * (p[0] - pa[0]);
                let d2 = (pc[0] - pb[0]) * (p[1] - pb[1]) - (pc[1] - pb[1]) * (p[0] - pb[0]);
                let d3 = (pa[0] - pc[0]) * (p[1] - pc[1]) - (pa[1] - pc[1]) * (p[0] - pc[0]);
                d1 >= 0.0 && d2 >= 0.0 && d3 >= 0.0
            });
            if blocked {
                continue;
            }
            tris.push([a, b, c]);
            idx.remove(k);
            clipped = true;
            break;
        }
        if !clipped {
            return Err(VexError::MeshFailure("ear clipping found no valid ear".into()));
        }
    }
    tris.push([idx[0], idx[1], idx[2]]);
    Ok(tris)
}

fn refine_uniform(nodes: &[[f64; 2]], cells: &[[usize; 3]]) -> (Vec<[f64; 2]>, Vec<[usize; 3]>) {
    let mut nodes = nodes.to_vec();
    let mut mid: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut midpoint = |a: usize, b: usize, nodes: &mut Vec<[f64; 2]>| -> usize {
        *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
            let p = [0.5 * (nodes[a][0] + nodes[b][0]), 0.5 * (nodes[a][1] + nodes[b][1])];
            nodes.push(p);
            nodes.len() - 1
        })
    };
    let mut out = Vec::with_capacity(cells.len() * 4);
    for c in cells {
        let m01 = midpoint(c[0], c[1], &mut nodes);
        let m12 = midpoint(c[1], c[2], &mut nodes);
        let m20 = midpoint(c[2], c[0], &mut nodes);
        out.push([c[0], m01, m20]);
        out.push([m01, c[1], m12]);
        out.push([m20, m12, c[2]]);
        out.push([m01, m12, m20]);
    }
    (nodes, out)
}

/// Renumber nodes row by row (y, then x) so assembled matrices stay banded.
fn reorder_rows(nodes: Vec<[f64; 2]>, cells: Vec<[usize; 3]>) -> (Vec<[f64; 2]>, Vec<[usize; 3]>) {
    let mut order: Vec<usize> = (0..nodes.len()).collect();
    order.sort_by(|&i, &j| {
        let (a, b) = (nodes[i], nodes[j]);
        a[1].partial_cmp(&b[1]).unwrap().then(a[0].partial_cmp(&b[0]).unwrap())
    });
    let mut new_index = vec![0usize; nodes.len()];
    for (new, &old) in order.iter().enumerate() {
        new_index[old] = new;
    }
    let nodes = order.iter().map(|&o| nodes[o]).collect();
    let cells = cells.iter().map(|c| [new_index[c[0]], new_index[c[1]], new_index[c[2]]]).collect();
    (nodes, cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn interval_mesh() {
        let m = build_mesh(&Domain::interval(0.0, 1.0).unwrap(), 0.25).unwrap();
        assert!(m.num_cells() >= 4);
        assert!((m.volume() - 1.0).abs() < 1e-15);
        assert_eq!(m.facets().len(), 2);
        assert!(m.h() <= 0.5);
    }

    #[test]
    fn unit_square_mesh_area() {
        let m = build_mesh(&Domain::square(0.0, 1.0).unwrap(), 0.5).unwrap();
        assert!((m.volume() - 1.0).abs() < 1e-10);
        assert!(m.h() <= 1.0);
        for f in m.facets() {
            let n = (f.normal[0].powi(2) + f.normal[1].powi(2)).sqrt();
            assert!((n - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn disk_area_converges_like_inscribed_polygon() {
        let d = Domain::disk([0.0, 0.0], 1.0).unwrap();
        let m = build_mesh(&d, 0.1).unwrap();
        // the boundary ring is a regular 6K-gon: area (n/2) sin(2 pi / n)
        let n = m.facets().len() as f64;
        let inscribed = 0.5 * n * (2.0 * PI / n).sin();
        assert!((m.volume() - inscribed).abs() < 1e-10);
        assert!(PI - m.volume() < 0.05);
        assert!(m.h() <= 0.2);
        assert!((m.geometric_error() - (PI - inscribed) / PI).abs() < 1e-12);
    }

    #[test]
    fn boundary_integral_perimeter_and_divergence() {
        let d = Domain::disk([0.0, 0.0], 1.0).unwrap();
        let m = build_mesh(&d, 0.05).unwrap();
        let n = m.facets().len() as f64;
        let perimeter = boundary_integral(&m, |_| 1.0);
        assert!((perimeter - 2.0 * n * (PI / n).sin()).abs() < 1e-10);
        assert!(boundary_integral(&m, |_| 0.0) == 0.0);

        let sq = build_mesh(&Domain::square(-1.0, 1.0).unwrap(), 0.3).unwrap();
        let flux = boundary_integral(&sq, |p| p.x[0] * p.normal[0] + p.x[1] * p.normal[1]);
        assert!((flux - 8.0).abs() < 1e-12);
    }

    #[test]
    fn divergence_self_test_on_all_kinds() {
        let domains = [
            Domain::interval(-0.3, 2.0).unwrap(),
            Domain::square(0.0, 1.0).unwrap(),
            Domain::disk([0.3, -0.2], 0.7).unwrap(),
            Domain::polygon(vec![[0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [1.0, 1.0], [1.0, 2.0], [0.0, 2.0]]).unwrap(),
        ];
        for d in &domains {
            let m = build_mesh(d, 0.1).unwrap();
            let (flux, expected) = m.divergence_check();
            assert!((flux - expected).abs() <= 1e-6 * expected.abs(), "{d:?}");
        }
    }

    #[test]
    fn l_shape_volume_and_h() {
        let d = Domain::polygon(vec![[0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [1.0, 1.0], [1.0, 2.0], [0.0, 2.0]]).unwrap();
        let m = build_mesh(&d, 0.2).unwrap();
        assert!((m.volume() - 3.0).abs() < 1e-10);
        assert!(m.h() <= 0.4);
    }

    #[test]
    fn text_format_roundtrip() {
        for d in [Domain::interval(0.0, 1.0).unwrap(), Domain::disk([0.0, 0.0], 1.0).unwrap()] {
            let m = build_mesh(&d, 0.3).unwrap();
            let back = Mesh::from_text(&m.to_text()).unwrap();
            assert_eq!(back.num_cells(), m.num_cells());
            assert_eq!(back.facets().len(), m.facets().len());
            assert!((back.volume() - m.volume()).abs() < 1e-12);
        }
    }

    #[test]
    fn text_format_rejects_bad_input() {
        assert!(Mesh::from_text("").is_err());
        assert!(Mesh::from_text("1 2 1 2\n0 0\n1 1\n0 0 5\n0 0 -1\n1 1 1\n").is_err());
        // wrong normal sign
        assert!(Mesh::from_text("1 2 1 2\n0 0\n1 1\n0 0 1\n0 0 1\n1 1 1\n").is_err());
        assert!(Mesh::from_text("1 2 1 2\n0 0\n1 1\n0 0 1\n0 0 -1\n1 1 1\n").is_ok());
    }

    #[test]
    fn degenerate_cell_rejected() {
        let r = Mesh::from_parts(2, vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]], vec![[0, 1, 2]]);
        assert!(matches!(r, Err(VexError::DegenerateCell { cell: 0 })));
    }

    #[test]
    fn locate_inside_and_outside() {
        let m = build_mesh(&Domain::square(0.0, 1.0).unwrap(), 0.2).unwrap();
        let (c, b) = m.locate(&[0.37, 0.61]);
        let x = m.point(c, &b);
        assert!((x[0] - 0.37).abs() < 1e-12 && (x[1] - 0.61).abs() < 1e-12);
        assert!(b.iter().all(|&l| l >= -1e-12));
        let (_, b) = m.locate(&[1.5, 0.5]);
        assert!(b.iter().all(|&l| l >= 0.0));
    }
}
