//! Conforming triangle meshes of polygonal domains.
//!
//! Meshes are immutable once built. Every constructor funnels through
//! [`TriMesh::new`], which validates orientation, conformity and boundary
//! tagging, so a `TriMesh` value always satisfies those invariants.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use thiserror::Error;

pub type Point = [f64; 2];

/// Boundary tag attached to each vertex.
///
/// Corner vertices shared by two boundary segments carry the smaller
/// nonzero tag, so Dirichlet segments dominate at junctions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum BoundaryTag {
    Interior = 0,
    Wall = 1,
    Inflow = 2,
    Outflow = 3,
    Symmetry = 4,
}

impl BoundaryTag {
    pub fn from_u8(v: u8) -> Option<Self> {
        Some(match v {
            0 => Self::Interior,
            1 => Self::Wall,
            2 => Self::Inflow,
            3 => Self::Outflow,
            4 => Self::Symmetry,
            _ => return None,
        })
    }

    pub fn as_u8(self) -> u8 {
        self as u8
    }

    pub fn is_boundary(self) -> bool {
        self != Self::Interior
    }
}

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("invalid discretization: {0}")]
    InvalidDiscretization(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("triangle {triangle}: vertex index {index} out of range (vertex count {count})")]
    IndexOutOfRange {
        triangle: usize,
        index: usize,
        count: usize,
    },
    #[error("triangle {triangle}: non-positive signed area {area:e} (clockwise or degenerate)")]
    Orientation { triangle: usize, area: f64 },
    #[error("non-conforming mesh: {0}")]
    NonConforming(String),
    #[error("vertex {vertex}: {message}")]
    Tag { vertex: usize, message: String },
    #[error("no triangle contains point ({x}, {y})")]
    PointLocation { x: f64, y: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Edge-based connectivity derived from the triangle list.
#[derive(Clone, Debug)]
struct Topology {
    /// Unique edges with `e[0] < e[1]`.
    edges: Vec<[usize; 2]>,
    /// Per triangle, the edge opposite local vertex k.
    triangle_edges: Vec<[usize; 3]>,
    /// Per triangle, the neighbour across the edge opposite local vertex k.
    neighbors: Vec<[Option<usize>; 3]>,
    /// Number of triangles incident to each edge (1 = boundary).
    edge_multiplicity: Vec<u8>,
}

impl Topology {
    fn build(triangles: &[[usize; 3]]) -> Result<Self, MeshError> {
        let mut lookup: HashMap<[usize; 2], usize> = HashMap::with_capacity(triangles.len() * 2);
        let mut edges = Vec::new();
        let mut owners: Vec<Vec<(usize, usize, bool)>> = Vec::new();
        let mut triangle_edges = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            let mut te = [0usize; 3];
            for k in 0..3 {
                let a = tri[(k + 1) % 3];
                let b = tri[(k + 2) % 3];
                let key = if a < b { [a, b] } else { [b, a] };
                let id = *lookup.entry(key).or_insert_with(|| {
                    edges.push(key);
                    owners.push(Vec::with_capacity(2));
                    edges.len() - 1
                });
                owners[id].push((t, k, a < b));
                te[k] = id;
            }
            triangle_edges.push(te);
        }
        let mut neighbors = vec![[None; 3]; triangles.len()];
        let mut edge_multiplicity = Vec::with_capacity(edges.len());
        for (id, own) in owners.iter().enumerate() {
            match own.as_slice() {
                [_] => {}
                [(t0, k0, d0), (t1, k1, d1)] => {
                    if d0 == d1 {
                        return Err(MeshError::NonConforming(format!(
                            "edge {:?} traversed in the same direction by triangles {t0} and {t1}",
                            edges[id]
                        )));
                    }
                    neighbors[*t0][*k0] = Some(*t1);
                    neighbors[*t1][*k1] = Some(*t0);
                }
                _ => {
                    return Err(MeshError::NonConforming(format!(
                        "edge {:?} shared by {} triangles",
                        edges[id],
                        own.len()
                    )))
                }
            }
            edge_multiplicity.push(own.len() as u8);
        }
        Ok(Self {
            edges,
            triangle_edges,
            neighbors,
            edge_multiplicity,
        })
    }
}

/// Conforming, counterclockwise triangle mesh with per-vertex boundary tags.
#[derive(Clone)]
pub struct TriMesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    vertex_tags: Vec<BoundaryTag>,
    h_max: f64,
    topo: Topology,
}

impl fmt::Debug for TriMesh {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TriMesh")
            .field("n_vertices", &self.vertices.len())
            .field("n_triangles", &self.triangles.len())
            .field("h_max", &self.h_max)
            .finish()
    }
}

impl PartialEq for TriMesh {
    fn eq(&self, other: &Self) -> bool {
        self.vertices == other.vertices && self.triangles == other.triangles && self.vertex_tags == other.vertex_tags
    }
}

pub fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

impl TriMesh {
    /// Builds and validates a mesh.
    pub fn new(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        vertex_tags: Vec<BoundaryTag>,
    ) -> Result<Self, MeshError> {
        let nv = vertices.len();
        if vertex_tags.len() != nv {
            return Err(MeshError::InvalidDiscretization(format!(
                "{} tags for {} vertices",
                vertex_tags.len(),
                nv
            )));
        }
        if triangles.is_empty() {
            return Err(MeshError::InvalidDiscretization("mesh has no triangles".into()));
        }
        for (i, p) in vertices.iter().enumerate() {
            if !p[0].is_finite() || !p[1].is_finite() {
                return Err(MeshError::Tag {
                    vertex: i,
                    message: "non-finite coordinate".into(),
                });
            }
        }
        for (t, tri) in triangles.iter().enumerate() {
            for &i in tri {
                if i >= nv {
                    return Err(MeshError::IndexOutOfRange {
                        triangle: t,
                        index: i,
                        count: nv,
                    });
                }
            }
            let area = signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
            if !(area > 0.0) {
                return Err(MeshError::Orientation { triangle: t, area });
            }
        }
        let topo = Topology::build(&triangles)?;

        let mut on_boundary = vec![false; nv];
        let mut used = vec![false; nv];
        for tri in &triangles {
            for &i in tri {
                used[i] = true;
            }
        }
        if let Some(i) = used.iter().position(|u| !u) {
            return Err(MeshError::NonConforming(format!("vertex {i} belongs to no triangle")));
        }
        for (e, &m) in topo.edges.iter().zip(&topo.edge_multiplicity) {
            if m == 1 {
                on_boundary[e[0]] = true;
                on_boundary[e[1]] = true;
            }
        }
        // Hanging nodes show up as vertices lying strictly inside a boundary edge.
        let boundary_vertices: Vec<usize> = (0..nv).filter(|&i| on_boundary[i]).collect();
        for (e, &m) in topo.edges.iter().zip(&topo.edge_multiplicity) {
            if m != 1 {
                continue;
            }
            let (a, b) = (vertices[e[0]], vertices[e[1]]);
            let len = dist(a, b);
            for &v in &boundary_vertices {
                if v == e[0] || v == e[1] {
                    continue;
                }
                let p = vertices[v];
                let cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
                if cross.abs() > 1e-12 * len * len {
                    continue;
                }
                let s = ((p[0] - a[0]) * (b[0] - a[0]) + (p[1] - a[1]) * (b[1] - a[1])) / (len * len);
                if s > 1e-12 && s < 1.0 - 1e-12 {
                    return Err(MeshError::NonConforming(format!("hanging vertex {v} on edge {:?}", e)));
                }
            }
        }
        for i in 0..nv {
            match (on_boundary[i], vertex_tags[i].is_boundary()) {
                (true, false) => {
                    return Err(MeshError::Tag {
                        vertex: i,
                        message: "boundary vertex carries interior tag 0".into(),
                    })
                }
                (false, true) => {
                    return Err(MeshError::Tag {
                        vertex: i,
                        message: format!("interior vertex carries boundary tag {}", vertex_tags[i].as_u8()),
                    })
                }
                _ => {}
            }
        }
        let h_max = triangles
            .iter()
            .map(|t| {
                let [a, b, c] = t.map(|i| vertices[i]);
                dist(a, b).max(dist(b, c)).max(dist(c, a))
            })
            .fold(0.0, f64::max);
        Ok(Self {
            vertices,
            triangles,
            vertex_tags,
            h_max,
            topo,
        })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn vertex_tags(&self) -> &[BoundaryTag] {
        &self.vertex_tags
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_edges(&self) -> usize {
        self.topo.edges.len()
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.topo.edges
    }

    pub fn h_max(&self) -> f64 {
        self.h_max
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        self.triangles[t].map(|i| self.vertices[i])
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        signed_area(a, b, c)
    }

    /// Longest edge of triangle `t`.
    pub fn triangle_diameter(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        dist(a, b).max(dist(b, c)).max(dist(c, a))
    }

    pub fn area(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.triangle_area(t)).sum()
    }

    /// Edges that belong to exactly one triangle, oriented counterclockwise
    /// with respect to the domain (interior on the left).
    pub fn boundary_edges(&self) -> Vec<[usize; 2]> {
        let mut out = Vec::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            for k in 0..3 {
                if self.topo.neighbors[t][k].is_none() {
                    out.push([tri[(k + 1) % 3], tri[(k + 2) % 3]]);
                }
            }
        }
        out
    }

    pub fn is_boundary_edge(&self, edge: usize) -> bool {
        self.topo.edge_multiplicity[edge] == 1
    }

    /// Tag of a boundary edge derived from its endpoint tags. Corner
    /// vertices hold the smaller tag of the two segments they join, so an
    /// edge whose endpoints disagree belongs to the segment of the larger tag.
    pub fn boundary_edge_tag(&self, a: usize, b: usize) -> BoundaryTag {
        self.vertex_tags[a].max(self.vertex_tags[b])
    }

    /// Barycentric coordinates of `p` in triangle `t`.
    pub fn barycentric(&self, t: usize, p: Point) -> [f64; 3] {
        let [a, b, c] = self.triangle_points(t);
        let area = signed_area(a, b, c);
        [
            signed_area(p, b, c) / area,
            signed_area(a, p, c) / area,
            signed_area(a, b, p) / area,
        ]
    }

    /// Locates a triangle containing `p` by walking from `hint`, falling back
    /// to a linear scan. Returns the triangle and barycentric coordinates.
    pub fn locate(&self, p: Point, hint: Option<usize>) -> Result<(usize, [f64; 3]), MeshError> {
        const TOL: f64 = -1e-12;
        let mut t = hint.unwrap_or(0).min(self.n_triangles() - 1);
        for _ in 0..self.n_triangles().min(10_000) {
            let lam = self.barycentric(t, p);
            let (k, &min) = lam
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .expect("three coordinates");
            if min >= TOL {
                return Ok((t, lam));
            }
            match self.topo.neighbors[t][k] {
                Some(n) => t = n,
                None => break,
            }
        }
        for t in 0..self.n_triangles() {
            let lam = self.barycentric(t, p);
            if lam.iter().all(|&l| l >= TOL) {
                return Ok((t, lam));
            }
        }
        Err(MeshError::PointLocation { x: p[0], y: p[1] })
    }

    /// Structured mesh of the unit square with `n` cells per side, each cell
    /// split along its lower-left to upper-right diagonal.
    pub fn unit_square(n: usize) -> Result<Self, MeshError> {
        Self::rectangle([0.0, 0.0], [1.0, 1.0], n, n, |_| BoundaryTag::Wall)
    }

    /// Structured mesh of an axis-aligned rectangle; `tag` is called for
    /// boundary vertices only.
    pub fn rectangle(
        lo: Point,
        hi: Point,
        nx: usize,
        ny: usize,
        tag: impl Fn(Point) -> BoundaryTag,
    ) -> Result<Self, MeshError> {
        if nx == 0 || ny == 0 {
            return Err(MeshError::InvalidDiscretization(format!(
                "cell counts must be positive (got {nx} x {ny})"
            )));
        }
        let xs: Vec<f64> = (0..=nx)
            .map(|i| lo[0] + (hi[0] - lo[0]) * i as f64 / nx as f64)
            .collect();
        let ys: Vec<f64> = (0..=ny)
            .map(|j| lo[1] + (hi[1] - lo[1]) * j as f64 / ny as f64)
            .collect();
        let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
        let mut tags = Vec::with_capacity(vertices.capacity());
        for (j, &y) in ys.iter().enumerate() {
            for (i, &x) in xs.iter().enumerate() {
                vertices.push([x, y]);
                let boundary = i == 0 || j == 0 || i == nx || j == ny;
                tags.push(if boundary { tag([x, y]) } else { BoundaryTag::Interior });
            }
        }
        let id = |i: usize, j: usize| j * (nx + 1) + i;
        let mut triangles = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let (v00, v10, v11, v01) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
                triangles.push([v00, v10, v11]);
                triangles.push([v00, v11, v01]);
            }
        }
        Self::new(vertices, triangles, tags)
    }

    /// Half-domain of the planar four-to-one contraction: upstream channel
    /// `[-20,0]x[0,4]` joined to downstream channel `[0,30]x[0,1]`.
    ///
    /// Grid lines are graded geometrically toward `x = 0` and toward
    /// `y = 1` and `y = 4`, so elements at the reentrant corner `(0,1)` and at
    /// the salient corner `(0,4)` have diameter at most `grading * base_h`.
    pub fn contraction(grading: f64, base_h: f64) -> Result<Self, MeshError> {
        if !(grading > 0.0 && grading <= 1.0) {
            return Err(MeshError::InvalidDiscretization(format!(
                "grading must lie in (0, 1], got {grading}"
            )));
        }
        if !(base_h > 0.0 && base_h.is_finite()) {
            return Err(MeshError::InvalidDiscretization(format!(
                "base_h must be positive, got {base_h}"
            )));
        }
        // Cell sides near the fine points, with margin so the cell diagonal stays ≤ grading·base_h.
        let fine = 0.85 * grading * base_h / std::f64::consts::SQRT_2;
        let x_up = graded_points(-20.0, 0.0, &[0.0], fine, base_h);
        let x_down = graded_points(0.0, 30.0, &[0.0], fine, base_h);
        let y_low = graded_points(0.0, 1.0, &[1.0], fine, base_h);
        let y_high = graded_points(1.0, 4.0, &[1.0, 4.0], fine, base_h);

        let xs: Vec<f64> = x_up.iter().chain(&x_down[1..]).copied().collect();
        let ys: Vec<f64> = y_low.iter().chain(&y_high[1..]).copied().collect();
        let n_up = x_up.len() - 1; // index of x = 0 in xs
        let n_low = y_low.len() - 1; // index of y = 1 in ys

        // Grid node (i, j) exists upstream (i <= n_up) for all j, downstream only for j <= n_low.
        let mut index = vec![vec![usize::MAX; ys.len()]; xs.len()];
        let mut vertices = Vec::new();
        let mut tags = Vec::new();
        for (i, &x) in xs.iter().enumerate() {
            for (j, &y) in ys.iter().enumerate() {
                if i > n_up && j > n_low {
                    continue;
                }
                index[i][j] = vertices.len();
                vertices.push([x, y]);
                tags.push(contraction_tag(x, y));
            }
        }
        let mut triangles = Vec::new();
        for i in 0..xs.len() - 1 {
            for j in 0..ys.len() - 1 {
                if i >= n_up && j >= n_low {
                    continue;
                }
                let (v00, v10, v11, v01) = (index[i][j], index[i + 1][j], index[i + 1][j + 1], index[i][j + 1]);
                triangles.push([v00, v10, v11]);
                triangles.push([v00, v11, v01]);
            }
        }
        Self::new(vertices, triangles, tags)
    }

    /// Splits every triangle into four through its edge midpoints.
    pub fn refine_uniform(&self) -> Result<Self, MeshError> {
        let nv = self.n_vertices();
        let mut vertices = self.vertices.clone();
        let mut tags = self.vertex_tags.clone();
        for (id, e) in self.topo.edges.iter().enumerate() {
            let (a, b) = (self.vertices[e[0]], self.vertices[e[1]]);
            vertices.push([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]);
            tags.push(if self.is_boundary_edge(id) {
                self.boundary_edge_tag(e[0], e[1])
            } else {
                BoundaryTag::Interior
            });
        }
        let mut triangles = Vec::with_capacity(4 * self.n_triangles());
        for (t, tri) in self.triangles.iter().enumerate() {
            let [a, b, c] = *tri;
            // Midpoint opposite local vertex k.
            let [ma, mb, mc] = self.topo.triangle_edges[t].map(|e| nv + e);
            triangles.push([a, mc, mb]);
            triangles.push([mc, b, ma]);
            triangles.push([mb, ma, c]);
            triangles.push([mc, ma, mb]);
        }
        Self::new(vertices, triangles, tags)
    }

    /// Reads the line-oriented text format (`nv nt`, then `x y tag` rows,
    /// then `i j k` rows; `#` starts a comment line).
    pub fn read(path: impl AsRef<Path>) -> Result<Self, MeshError> {
        let file = std::fs::File::open(path)?;
        Self::parse(BufReader::new(file))
    }

    pub fn parse(reader: impl BufRead) -> Result<Self, MeshError> {
        let mut lines = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            lines.push((i + 1, trimmed.to_string()));
        }
        let mut it = lines.into_iter();
        let (ln, header) = it.next().ok_or(MeshError::Parse {
            line: 0,
            message: "empty file".into(),
        })?;
        let counts = parse_fields::<usize>(&header, 2, ln)?;
        let (nv, nt) = (counts[0], counts[1]);
        let mut vertices = Vec::with_capacity(nv);
        let mut tags = Vec::with_capacity(nv);
        for k in 0..nv {
            let (ln, row) = it.next().ok_or_else(|| MeshError::Parse {
                line: ln,
                message: format!("expected {nv} vertex rows, found {k}"),
            })?;
            let f: Vec<&str> = row.split_whitespace().collect();
            if f.len() != 3 {
                return Err(MeshError::Parse {
                    line: ln,
                    message: format!("vertex row needs `x y tag`, got {} fields", f.len()),
                });
            }
            let x = parse_one::<f64>(f[0], ln)?;
            let y = parse_one::<f64>(f[1], ln)?;
            let tag = parse_one::<u8>(f[2], ln)?;
            vertices.push([x, y]);
            tags.push(BoundaryTag::from_u8(tag).ok_or(MeshError::Parse {
                line: ln,
                message: format!("unknown boundary tag {tag}"),
            })?);
        }
        let mut triangles = Vec::with_capacity(nt);
        for k in 0..nt {
            let (ln, row) = it.next().ok_or_else(|| MeshError::Parse {
                line: ln,
                message: format!("expected {nt} triangle rows, found {k}"),
            })?;
            let f = parse_fields::<usize>(&row, 3, ln)?;
            triangles.push([f[0], f[1], f[2]]);
        }
        if let Some((ln, _)) = it.next() {
            return Err(MeshError::Parse {
                line: ln,
                message: "trailing data after triangle rows".into(),
            });
        }
        Self::new(vertices, triangles, tags)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), MeshError> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut out)?;
        out.flush()?;
        Ok(())
    }

    pub fn write_to(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "{} {}", self.n_vertices(), self.n_triangles())?;
        for (p, tag) in self.vertices.iter().zip(&self.vertex_tags) {
            writeln!(out, "{:.16e} {:.16e} {}", p[0], p[1], tag.as_u8())?;
        }
        for t in &self.triangles {
            writeln!(out, "{} {} {}", t[0], t[1], t[2])?;
        }
        Ok(())
    }
}

fn parse_one<T: std::str::FromStr>(s: &str, line: usize) -> Result<T, MeshError> {
    s.parse::<T>().map_err(|_| MeshError::Parse {
        line,
        message: format!("cannot parse `{s}`"),
    })
}

fn parse_fields<T: std::str::FromStr>(row: &str, n: usize, line: usize) -> Result<Vec<T>, MeshError> {
    let f: Vec<&str> = row.split_whitespace().collect();
    if f.len() != n {
        return Err(MeshError::Parse {
            line,
            message: format!("expected {n} fields, got {}", f.len()),
        });
    }
    f.iter().map(|s| parse_one(s, line)).collect()
}

fn contraction_tag(x: f64, y: f64) -> BoundaryTag {
    let mut tags = Vec::with_capacity(2);
    if x == -20.0 {
        tags.push(BoundaryTag::Inflow);
    }
    if x == 30.0 {
        tags.push(BoundaryTag::Outflow);
    }
    if y == 0.0 {
        tags.push(BoundaryTag::Symmetry);
    }
    if (y == 4.0 && x <= 0.0) || (x == 0.0 && y >= 1.0) || (y == 1.0 && x >= 0.0) {
        tags.push(BoundaryTag::Wall);
    }
    tags.into_iter().min().unwrap_or(BoundaryTag::Interior)
}

/// Node positions on `[a, b]` for the size field
/// `h(s) = min(coarse, fine + GROWTH * dist(s, fine_at))`. Nodes are placed at
/// equal increments of `∫ ds / h`, so every spacing is at most the local `h`.
fn graded_points(a: f64, b: f64, fine_at: &[f64], fine: f64, coarse: f64) -> Vec<f64> {
    const GROWTH: f64 = 0.25;
    const SAMPLES: usize = 20_000;
    let fine = fine.min(coarse);
    let size = |s: f64| {
        let d = fine_at.iter().map(|&f| (s - f).abs()).fold(f64::INFINITY, f64::min);
        coarse.min(fine + GROWTH * d)
    };
    let ds = (b - a) / SAMPLES as f64;
    let mut phi = Vec::with_capacity(SAMPLES + 1);
    phi.push(0.0);
    for k in 0..SAMPLES {
        let s0 = a + k as f64 * ds;
        // Simpson on each sample cell.
        let inc = ds / 6.0 * (1.0 / size(s0) + 4.0 / size(s0 + 0.5 * ds) + 1.0 / size(s0 + ds));
        phi.push(phi[k] + inc);
    }
    let total = phi[SAMPLES];
    let n = (total - 1e-9).ceil().max(1.0) as usize;
    let mut pts = Vec::with_capacity(n + 1);
    pts.push(a);
    let mut k = 0;
    for i in 1..n {
        let target = total * i as f64 / n as f64;
        while phi[k + 1] < target {
            k += 1;
        }
        let frac = (target - phi[k]) / (phi[k + 1] - phi[k]);
        pts.push(a + (k as f64 + frac) * ds);
    }
    pts.push(b);
    pts
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_square_counts() {
        let m = TriMesh::unit_square(1).unwrap();
        assert_eq!((m.n_vertices(), m.n_triangles()), (4, 2));
        assert!((m.h_max() - 2f64.sqrt()).abs() < 1e-15);
        let m = TriMesh::unit_square(4).unwrap();
        assert_eq!((m.n_vertices(), m.n_triangles()), (25, 32));
        let m = TriMesh::unit_square(16).unwrap();
        assert!((m.h_max() - 2f64.sqrt() / 16.0).abs() < 1e-15);
        assert!(m
            .vertex_tags()
            .iter()
            .filter(|t| t.is_boundary())
            .all(|&t| t == BoundaryTag::Wall));
    }

    #[test]
    fn zero_cells_rejected() {
        assert!(matches!(
            TriMesh::unit_square(0),
            Err(MeshError::InvalidDiscretization(_))
        ));
    }

    #[test]
    fn refine_counts_and_h() {
        let m = TriMesh::unit_square(1).unwrap();
        let r = m.refine_uniform().unwrap();
        assert_eq!((r.n_vertices(), r.n_triangles()), (9, 8));
        assert_eq!(r.n_vertices(), m.n_vertices() + m.n_edges());
        assert!((r.h_max() - m.h_max() / 2.0).abs() <= 1e-12 * m.h_max());
        assert!((r.area() - m.area()).abs() < 1e-12);
    }

    #[test]
    fn refine_matches_finer_structured_mesh() {
        let r = TriMesh::unit_square(4).unwrap().refine_uniform().unwrap();
        let f = TriMesh::unit_square(8).unwrap();
        let key = |p: &Point| ((p[0] * 64.0).round() as i64, (p[1] * 64.0).round() as i64);
        let mut a: Vec<_> = r.vertices().iter().map(key).collect();
        let mut b: Vec<_> = f.vertices().iter().map(key).collect();
        a.sort();
        b.sort();
        assert_eq!(a, b);
    }

    #[test]
    fn contraction_area_and_tags() {
        let m = TriMesh::contraction(1.0, 1.0).unwrap();
        assert!((m.area() - 110.0).abs() < 1e-9);
        for (p, &t) in m.vertices().iter().zip(m.vertex_tags()) {
            if p[0] == -20.0 && p[1] > 0.0 && p[1] < 4.0 {
                assert_eq!(t, BoundaryTag::Inflow);
            }
            if p[0] == 30.0 && p[1] > 0.0 && p[1] < 1.0 {
                assert_eq!(t, BoundaryTag::Outflow);
            }
            if p[1] == 0.0 && p[0] > -20.0 && p[0] < 30.0 {
                assert_eq!(t, BoundaryTag::Symmetry);
            }
        }
        let corner = m.vertices().iter().position(|p| *p == [-20.0, 0.0]).unwrap();
        assert_eq!(m.vertex_tags()[corner], BoundaryTag::Inflow);
        let corner = m.vertices().iter().position(|p| *p == [-20.0, 4.0]).unwrap();
        assert_eq!(m.vertex_tags()[corner], BoundaryTag::Wall);
    }

    #[test]
    fn contraction_corner_grading() {
        let m = TriMesh::contraction(0.1, 0.5).unwrap();
        let near: Vec<f64> = (0..m.n_triangles())
            .filter(|&t| m.triangle_points(t).iter().any(|p| dist(*p, [0.0, 1.0]) <= 0.5))
            .map(|t| m.triangle_diameter(t))
            .collect();
        let min = near.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(min <= 0.05 + 1e-12, "min diameter {min}");
        let max_at_corner = (0..m.n_triangles())
            .filter(|&t| m.triangles()[t].iter().any(|&v| m.vertices()[v] == [0.0, 1.0]))
            .map(|t| m.triangle_diameter(t))
            .fold(0.0, f64::max);
        assert!(max_at_corner <= 0.05 + 1e-12);
        assert!((m.area() - 110.0).abs() < 1e-9);
    }

    #[test]
    fn contraction_rejects_bad_controls() {
        assert!(TriMesh::contraction(0.0, 1.0).is_err());
        assert!(TriMesh::contraction(0.5, -1.0).is_err());
        assert!(TriMesh::contraction(1.5, 1.0).is_err());
    }

    #[test]
    fn orientation_error_names_triangle() {
        let text = "3 1\n0 0 1\n1 0 1\n0 1 1\n0 2 1\n";
        match TriMesh::parse(text.as_bytes()) {
            Err(MeshError::Orientation { triangle, .. }) => assert_eq!(triangle, 0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn index_out_of_range() {
        let text = "# comment\n3 1\n0 0 1\n1 0 1\n0 1 1\n0 1 3\n";
        assert!(matches!(
            TriMesh::parse(text.as_bytes()),
            Err(MeshError::IndexOutOfRange {
                triangle: 0,
                index: 3,
                ..
            })
        ));
    }

    #[test]
    fn malformed_counts() {
        let text = "3\n0 0 1\n";
        assert!(matches!(TriMesh::parse(text.as_bytes()), Err(MeshError::Parse { .. })));
        let text = "4 1\n0 0 1\n1 0 1\n0 1 1\n";
        assert!(matches!(TriMesh::parse(text.as_bytes()), Err(MeshError::Parse { .. })));
    }

    #[test]
    fn hanging_node_rejected() {
        // Two triangles on the left, one large triangle on the right whose
        // edge x = 1 passes through the midpoint (1, 0.5).
        let v = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 0.5], [1.0, 1.0], [0.0, 1.0], [2.0, 0.5]];
        let t = vec![[0, 1, 2], [0, 2, 4], [2, 3, 4], [1, 5, 3]];
        let tags = vec![BoundaryTag::Wall; 6];
        assert!(matches!(TriMesh::new(v, t, tags), Err(MeshError::NonConforming(_))));
    }

    #[test]
    fn interior_tag_checked() {
        let m = TriMesh::unit_square(2).unwrap();
        let mut tags = m.vertex_tags().to_vec();
        tags[4] = BoundaryTag::Wall;
        assert!(matches!(
            TriMesh::new(m.vertices().to_vec(), m.triangles().to_vec(), tags),
            Err(MeshError::Tag { vertex: 4, .. })
        ));
    }

    #[test]
    fn locate_walks_to_point() {
        let m = TriMesh::unit_square(8).unwrap();
        let (t, lam) = m.locate([0.93, 0.07], Some(0)).unwrap();
        assert!(lam.iter().all(|&l| l >= -1e-12));
        assert!((lam.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(m.barycentric(t, [0.93, 0.07]).iter().all(|&l| l >= -1e-12));
        assert!(m.locate([1.5, 0.5], None).is_err());
    }
}
