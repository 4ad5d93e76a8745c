//! Plain-text node/element format.
//!
//! ```text
//! nv nt
//! x y            (nv lines)
//! i j k sub      (nt lines, 0-based vertex indices)
//! ```

use std::fmt::Write as _;

use super::Mesh;
use crate::error::{Error, Result};
use crate::geometry::Point;

pub fn read_mesh(text: &str) -> Result<Mesh> {
    let mut tokens = text.split_whitespace();
    let mut next = |what: &str| -> Result<&str> {
        tokens.next().ok_or_else(|| Error::Parse(format!("unexpected end of input reading {what}")))
    };
    let parse_usize = |s: &str| s.parse::<usize>().map_err(|e| Error::Parse(format!("'{s}': {e}")));
    let parse_f64 = |s: &str| s.parse::<f64>().map_err(|e| Error::Parse(format!("'{s}': {e}")));

    let nv = parse_usize(next("vertex count")?)?;
    let nt = parse_usize(next("triangle count")?)?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let x = parse_f64(next("x")?)?;
        let y = parse_f64(next("y")?)?;
        vertices.push(Point::new(x, y));
    }
    let mut triangles = Vec::with_capacity(nt);
    let mut subdomain = Vec::with_capacity(nt);
    for _ in 0..nt {
        let i = parse_usize(next("vertex index")?)?;
        let j = parse_usize(next("vertex index")?)?;
        let k = parse_usize(next("vertex index")?)?;
        triangles.push([i, j, k]);
        subdomain.push(parse_usize(next("subdomain id")?)?);
    }
    Mesh::new(vertices, triangles, subdomain)
}

pub fn write_mesh(mesh: &Mesh) -> String {
    let mut out = String::new();
    writeln!(out, "{} {}", mesh.n_vertices(), mesh.n_triangles()).unwrap();
    for v in &mesh.vertices {
        writeln!(out, "{:?} {:?}", v.x, v.y).unwrap();
    }
    for (t, [i, j, k]) in mesh.triangles.iter().enumerate() {
        writeln!(out, "{i} {j} {k} {}", mesh.subdomain[t]).unwrap();
    }
    out
}
