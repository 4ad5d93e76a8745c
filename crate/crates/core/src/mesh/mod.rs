//! Conforming triangulations with edge topology and subdomain tags.

mod io;
mod refine;

pub use io::{read_mesh, write_mesh};
pub use refine::{refine, RefinementMode, RefinementSpec};

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::geometry::{Point, TriangleGeometry, LOCAL_EDGES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeClass {
    Interior,
    Dirichlet,
}

/// A conforming triangulation.
///
/// Edge `e` is stored as `[a, b]` with `a < b`. Its unit normal points from
/// the lower-indexed incident triangle (`edge_triangles[e].0`) towards the
/// other one, and outward on the boundary. `triangle_edge_signs[t][i]` is
/// `+1` when triangle `t` is that lower-indexed triangle for its local edge
/// `i`, `-1` otherwise.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub vertices: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
    pub subdomain: Vec<usize>,
    pub edges: Vec<[usize; 2]>,
    pub edge_triangles: Vec<(usize, Option<usize>)>,
    pub triangle_edges: Vec<[usize; 3]>,
    pub triangle_edge_signs: Vec<[f64; 3]>,
    pub h_triangle: Vec<f64>,
    pub h_edge: Vec<f64>,
    pub edge_class: Vec<EdgeClass>,
}

impl Mesh {
    /// Builds the edge topology of a triangulation. The whole boundary is
    /// classified as Dirichlet.
    pub fn new(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        subdomain: Vec<usize>,
    ) -> Result<Self> {
        if vertices.len() < 3 || triangles.is_empty() {
            return Err(Error::InvalidMesh("need at least 3 vertices and 1 triangle".into()));
        }
        if subdomain.len() != triangles.len() {
            return Err(Error::InvalidMesh(format!(
                "{} subdomain ids for {} triangles",
                subdomain.len(),
                triangles.len()
            )));
        }
        let mut h_triangle = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::InvalidMesh(format!("triangle {t} has an out-of-range vertex")));
            }
            let geom = TriangleGeometry::new([vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]]);
            let scale = geom.diameter().powi(2);
            if !(geom.det > 1e-14 * scale) {
                return Err(Error::DegenerateTriangle { triangle: t, area: 0.5 * geom.det });
            }
            h_triangle.push(geom.diameter());
        }

        let mut edge_index: HashMap<[usize; 2], usize> = HashMap::new();
        let mut edges = Vec::new();
        let mut incident: Vec<Vec<usize>> = Vec::new();
        let mut triangle_edges = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            let mut local = [0; 3];
            for (i, [a, b]) in LOCAL_EDGES.iter().enumerate() {
                let (va, vb) = (tri[*a], tri[*b]);
                let key = if va < vb { [va, vb] } else { [vb, va] };
                let e = *edge_index.entry(key).or_insert_with(|| {
                    edges.push(key);
                    incident.push(Vec::new());
                    edges.len() - 1
                });
                incident[e].push(t);
                local[i] = e;
            }
            triangle_edges.push(local);
        }

        let mut edge_triangles = Vec::with_capacity(edges.len());
        let mut edge_class = Vec::with_capacity(edges.len());
        for (e, tris) in incident.iter().enumerate() {
            match tris.as_slice() {
                [t] => {
                    edge_triangles.push((*t, None));
                    edge_class.push(EdgeClass::Dirichlet);
                }
                [t0, t1] => {
                    edge_triangles.push((*t0.min(t1), Some(*t0.max(t1))));
                    edge_class.push(EdgeClass::Interior);
                }
                _ => return Err(Error::NonConformingInput(edges[e][0], edges[e][1])),
            }
        }

        let triangle_edge_signs = triangle_edges
            .iter()
            .enumerate()
            .map(|(t, local)| local.map(|e| if edge_triangles[e].0 == t { 1.0 } else { -1.0 }))
            .collect();
        let h_edge = edges
            .iter()
            .map(|[a, b]| (vertices[*b] - vertices[*a]).norm())
            .collect();

        Ok(Self {
            vertices,
            triangles,
            subdomain,
            edges,
            edge_triangles,
            triangle_edges,
            triangle_edge_signs,
            h_triangle,
            h_edge,
            edge_class,
        })
    }

    /// Builds a mesh whose subdomain ids come from a point classifier, and
    /// rejects triangles straddling a subdomain boundary.
    pub fn from_layout(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        layout: impl Fn(&Point) -> usize,
    ) -> Result<Self> {
        let mut subdomain = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::InvalidMesh(format!("triangle {t} has an out-of-range vertex")));
            }
            let geom = TriangleGeometry::new([vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]]);
            let id = layout(&geom.centroid());
            // Points close to each vertex and each edge midpoint, pulled inside.
            let samples = [
                [0.9, 0.05, 0.05],
                [0.05, 0.9, 0.05],
                [0.05, 0.05, 0.9],
                [0.05, 0.475, 0.475],
                [0.475, 0.05, 0.475],
                [0.475, 0.475, 0.05],
            ];
            for [l0, l1, l2] in samples {
                let p = Point::from(
                    geom.vertices[0].coords * l0 + geom.vertices[1].coords * l1 + geom.vertices[2].coords * l2,
                );
                if layout(&p) != id {
                    return Err(Error::InterfaceViolation(t));
                }
            }
            subdomain.push(id);
        }
        Self::new(vertices, triangles, subdomain)
    }

    /// Structured mesh of `[x0,x1] x [y0,y1]` with `nx * ny` cells, each cut
    /// along its bottom-left to top-right diagonal.
    pub fn rectangle(
        (x0, x1): (f64, f64),
        (y0, y1): (f64, f64),
        nx: usize,
        ny: usize,
        layout: impl Fn(&Point) -> usize,
    ) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidMesh("rectangle needs at least one cell per direction".into()));
        }
        let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                let x = x0 + (x1 - x0) * i as f64 / nx as f64;
                let y = y0 + (y1 - y0) * j as f64 / ny as f64;
                vertices.push(Point::new(x, y));
            }
        }
        let id = |i: usize, j: usize| j * (nx + 1) + i;
        let mut triangles = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            }
        }
        Self::from_layout(vertices, triangles, layout)
    }

    /// Unit square split into the two triangles `(0,0),(1,0),(1,1)` and
    /// `(0,0),(1,1),(0,1)`, one subdomain.
    pub fn unit_square() -> Self {
        Self::rectangle((0.0, 1.0), (0.0, 1.0), 1, 1, |_| 0).expect("valid mesh")
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn geometry(&self, t: usize) -> TriangleGeometry {
        let [a, b, c] = self.triangles[t];
        TriangleGeometry::new([self.vertices[a], self.vertices[b], self.vertices[c]])
    }

    pub fn area(&self, t: usize) -> f64 {
        self.geometry(t).area()
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.area(t)).sum()
    }

    pub fn h_max(&self) -> f64 {
        self.h_triangle.iter().copied().fold(0.0, f64::max)
    }

    pub fn h_min(&self) -> f64 {
        self.h_triangle.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Interior edge whose two triangles carry different subdomain ids.
    pub fn is_interface(&self, e: usize) -> bool {
        match self.edge_triangles[e] {
            (t0, Some(t1)) => self.subdomain[t0] != self.subdomain[t1],
            _ => false,
        }
    }

    /// Unit normal of edge `e` in the global orientation.
    pub fn edge_normal(&self, e: usize) -> crate::geometry::Vec2 {
        let t = self.edge_triangles[e].0;
        let local = self.triangle_edges[t].iter().position(|&x| x == e).expect("edge of its triangle");
        self.geometry(t).edge_normal(local).0
    }

    /// Local index of edge `e` within triangle `t`.
    pub fn local_edge(&self, t: usize, e: usize) -> Option<usize> {
        self.triangle_edges[t].iter().position(|&x| x == e)
    }

    /// `h_K / inradius(K)`.
    pub fn shape_ratio(&self, t: usize) -> f64 {
        let g = self.geometry(t);
        g.diameter() / g.inradius()
    }

    pub fn max_shape_ratio(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.shape_ratio(t)).fold(0.0, f64::max)
    }

    /// Triangles having `p` as a vertex or containing it.
    pub fn triangles_touching(&self, p: &Point) -> Vec<usize> {
        (0..self.n_triangles()).filter(|&t| self.geometry(t).contains(p)).collect()
    }

    pub fn n_subdomains(&self) -> usize {
        self.subdomain.iter().copied().max().map_or(0, |m| m + 1)
    }

    /// Checks the structural invariants; used by tests and after refinement.
    pub fn validate(&self) -> Result<()> {
        for (e, (t0, t1)) in self.edge_triangles.iter().enumerate() {
            let interior = t1.is_some();
            if interior != (self.edge_class[e] == EdgeClass::Interior) {
                return Err(Error::InvalidMesh(format!("edge {e} misclassified")));
            }
            if let Some(t1) = t1 {
                if t0 >= t1 {
                    return Err(Error::InvalidMesh(format!("edge {e} incident order")));
                }
            }
        }
        for t in 0..self.n_triangles() {
            if self.geometry(t).det <= 0.0 {
                return Err(Error::DegenerateTriangle { triangle: t, area: 0.5 * self.geometry(t).det });
            }
        }
        Ok(())
    }
}
