use std::collections::HashMap;

use super::Mesh;
use crate::error::{Error, Result};
use crate::geometry::{Point, TriangleGeometry};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefinementMode {
    /// Red refinement: every triangle is replaced by four similar children.
    Uniform,
    /// Newest-vertex bisection toward a point, closed to a conforming mesh.
    GradedBisection,
}

/// How to refine a mesh.
///
/// In graded mode, pass `j` (for `j = 1..=levels`) repeatedly bisects every
/// triangle that comes within `r_j = grading_radius_factor^j` of `center`
/// and is still larger than `r_j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefinementSpec {
    pub mode: RefinementMode,
    pub center: Point,
    pub levels: usize,
    pub grading_radius_factor: f64,
}

impl RefinementSpec {
    pub fn uniform(levels: usize) -> Self {
        Self {
            mode: RefinementMode::Uniform,
            center: Point::origin(),
            levels,
            grading_radius_factor: 0.5,
        }
    }

    pub fn graded(center: Point, levels: usize, grading_radius_factor: f64) -> Self {
        Self {
            mode: RefinementMode::GradedBisection,
            center,
            levels,
            grading_radius_factor,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels == 0 {
            return Err(Error::InvalidParams("refinement needs levels >= 1".into()));
        }
        if self.mode == RefinementMode::GradedBisection
            && !(self.grading_radius_factor > 0.0 && self.grading_radius_factor < 1.0)
        {
            return Err(Error::InvalidParams(format!(
                "grading radius factor must lie in (0, 1), got {}",
                self.grading_radius_factor
            )));
        }
        Ok(())
    }
}

pub fn refine(mesh: &Mesh, spec: &RefinementSpec) -> Result<Mesh> {
    spec.validate()?;
    match spec.mode {
        RefinementMode::Uniform => {
            let mut m = red_refine(mesh)?;
            for _ in 1..spec.levels {
                m = red_refine(&m)?;
            }
            Ok(m)
        }
        RefinementMode::GradedBisection => graded(mesh, spec),
    }
}

fn red_refine(mesh: &Mesh) -> Result<Mesh> {
    let nv = mesh.n_vertices();
    let mut vertices = mesh.vertices.clone();
    vertices.extend(mesh.edges.iter().map(|[a, b]| {
        Point::from((mesh.vertices[*a].coords + mesh.vertices[*b].coords) * 0.5)
    }));
    let mut triangles = Vec::with_capacity(4 * mesh.n_triangles());
    let mut subdomain = Vec::with_capacity(4 * mesh.n_triangles());
    for (t, &[v0, v1, v2]) in mesh.triangles.iter().enumerate() {
        let [m0, m1, m2] = mesh.triangle_edges[t].map(|e| nv + e);
        triangles.extend([[v0, m2, m1], [m2, v1, m0], [m1, m0, v2], [m0, m1, m2]]);
        subdomain.extend([mesh.subdomain[t]; 4]);
    }
    Mesh::new(vertices, triangles, subdomain)
}

/// Triangle stored in newest-vertex order: the refinement edge is `v0 v1`.
#[derive(Clone, Copy)]
struct Labeled {
    v: [usize; 3],
    subdomain: usize,
}

fn key(a: usize, b: usize) -> [usize; 2] {
    if a < b {
        [a, b]
    } else {
        [b, a]
    }
}

fn graded(mesh: &Mesh, spec: &RefinementSpec) -> Result<Mesh> {
    let mut vertices = mesh.vertices.clone();
    // Initial labeling: refinement edge is the longest edge.
    let mut tris: Vec<Labeled> = mesh
        .triangles
        .iter()
        .zip(&mesh.subdomain)
        .map(|(&[a, b, c], &s)| {
            let len = |p: usize, q: usize| (vertices[p] - vertices[q]).norm();
            let rotations = [[a, b, c], [b, c, a], [c, a, b]];
            let best = rotations
                .into_iter()
                .max_by(|x, y| len(x[0], x[1]).total_cmp(&len(y[0], y[1])))
                .unwrap();
            Labeled { v: best, subdomain: s }
        })
        .collect();

    for j in 1..=spec.levels {
        let radius = spec.grading_radius_factor.powi(j as i32);
        loop {
            let geom = |t: &Labeled| TriangleGeometry::new(t.v.map(|i| vertices[i]));
            let marked: Vec<bool> = tris
                .iter()
                .map(|t| {
                    let g = geom(t);
                    g.distance_to(&spec.center) < radius && g.diameter() > radius
                })
                .collect();
            if !marked.iter().any(|&m| m) {
                break;
            }
            tris = bisect_with_closure(&mut vertices, tris, &marked);
        }
    }

    let triangles = tris.iter().map(|t| t.v).collect();
    let subdomain = tris.iter().map(|t| t.subdomain).collect();
    Mesh::new(vertices, triangles, subdomain)
}

fn bisect_with_closure(vertices: &mut Vec<Point>, mut tris: Vec<Labeled>, marked: &[bool]) -> Vec<Labeled> {
    let mut midpoints: HashMap<[usize; 2], usize> = HashMap::new();
    let mut flags = marked.to_vec();
    loop {
        let mut next = Vec::with_capacity(tris.len() + tris.len() / 2);
        let mut changed = false;
        for (t, tri) in tris.iter().enumerate() {
            let [v0, v1, v2] = tri.v;
            let hanging = [key(v0, v1), key(v1, v2), key(v2, v0)]
                .iter()
                .any(|k| midpoints.contains_key(k));
            if flags.get(t).copied().unwrap_or(false) || hanging {
                let m = *midpoints.entry(key(v0, v1)).or_insert_with(|| {
                    vertices.push(Point::from((vertices[v0].coords + vertices[v1].coords) * 0.5));
                    vertices.len() - 1
                });
                next.push(Labeled { v: [v2, v0, m], subdomain: tri.subdomain });
                next.push(Labeled { v: [v1, v2, m], subdomain: tri.subdomain });
                changed = true;
            } else {
                next.push(*tri);
            }
        }
        tris = next;
        flags.clear();
        if !changed {
            return tris;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_counts_and_halving() {
        let base = Mesh::unit_square();
        let one = refine(&base, &RefinementSpec::uniform(1)).unwrap();
        assert_eq!(one.n_triangles(), 8);
        assert!((one.h_max() - base.h_max() / 2.0).abs() < 1e-14);
        let three = refine(&base, &RefinementSpec::uniform(3)).unwrap();
        assert_eq!(three.n_triangles(), 128);
        assert!((three.total_area() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_preserves_shape_and_subdomains() {
        let base = Mesh::rectangle((-1.0, 1.0), (-1.0, 1.0), 2, 2, |p| usize::from(p.x > 0.0)).unwrap();
        let fine = refine(&base, &RefinementSpec::uniform(2)).unwrap();
        assert!((fine.max_shape_ratio() - base.max_shape_ratio()).abs() < 1e-10);
        for t in 0..fine.n_triangles() {
            let c = fine.geometry(t).centroid();
            assert_eq!(fine.subdomain[t], usize::from(c.x > 0.0));
        }
        fine.validate().unwrap();
    }

    #[test]
    fn graded_refines_toward_center() {
        let base = Mesh::unit_square();
        let graded = refine(&base, &RefinementSpec::graded(Point::origin(), 4, 0.5)).unwrap();
        graded.validate().unwrap();
        assert!((graded.total_area() - 1.0).abs() < 1e-12);
        let uniform = refine(&base, &RefinementSpec::uniform(2)).unwrap();
        let near: f64 = graded
            .triangles_touching(&Point::origin())
            .iter()
            .map(|&t| graded.h_triangle[t])
            .fold(f64::INFINITY, f64::min);
        assert!(near < 0.2 * uniform.h_min(), "{near} vs {}", uniform.h_min());
        // Comparable size: within a factor of two of the 32-triangle uniform mesh.
        assert!(graded.n_triangles() <= 2 * uniform.n_triangles(), "{}", graded.n_triangles());
    }

    #[test]
    fn rejects_bad_specs() {
        let base = Mesh::unit_square();
        assert!(refine(&base, &RefinementSpec::uniform(0)).is_err());
        assert!(refine(&base, &RefinementSpec::graded(Point::origin(), 2, 1.5)).is_err());
    }
}
