//! Plain-text mesh files and VTK export.
//!
//! Mesh file grammar (one record per line, `#` starts a comment, blank lines
//! are ignored):
//!
//! ```text
//! poly-mesh 1
//! vertices N
//! x y                                   N lines
//! cells M
//! v0 v1 v2 ...                          M lines, 0-based vertex ids
//! inclusion ax ay bx by p+ p-           optional, constant side pressures
//! inclusion ax ay bx by p+0 p+x p+y p-0 p-x p-y
//! ```
//!
//! Side pressures in the long form are affine: `p0 + px x + py y`. Loops
//! may be given in either orientation. Vertices strictly inside the inclusion
//! appear twice, once for each side.

mod vtk;

use std::io::{BufRead, Write};

pub use vtk::write_vtk;

use crate::error::{Result, VemError};
use crate::geometry::Point2;
use crate::mesh::{Inclusion, PolyMesh};
use crate::problem::Affine;

pub const MESH_HEADER: &str = "poly-mesh 1";

pub fn write_poly_mesh<W: Write>(mesh: &PolyMesh, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{MESH_HEADER}")?;
    writeln!(out, "vertices {}", mesh.vertices().len())?;
    for v in mesh.vertices() {
        writeln!(out, "{} {}", v.x, v.y)?;
    }
    writeln!(out, "cells {}", mesh.num_cells())?;
    for c in 0..mesh.num_cells() {
        let ids: Vec<String> = mesh.cell_vertices(c).iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", ids.join(" "))?;
    }
    if let Some(inc) = mesh.inclusion() {
        let (a, b) = (inc.endpoint_a, inc.endpoint_b);
        write!(out, "inclusion {} {} {} {}", a.x, a.y, b.x, b.y)?;
        if inc.p_plus.is_constant() && inc.p_minus.is_constant() {
            writeln!(out, " {} {}", inc.p_plus.c0, inc.p_minus.c0)?;
        } else {
            let (p, m) = (inc.p_plus, inc.p_minus);
            writeln!(out, " {} {} {} {} {} {}", p.c0, p.cx, p.cy, m.c0, m.cx, m.cy)?;
        }
    }
    Ok(())
}

pub fn poly_mesh_to_string(mesh: &PolyMesh) -> String {
    let mut buf = Vec::new();
    write_poly_mesh(mesh, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("ascii output")
}

/// Meaningful lines with their 1-based line numbers.
struct Lines<R> {
    inner: std::iter::Enumerate<std::io::Lines<R>>,
    last: usize,
}

impl<R: BufRead> Lines<R> {
    fn next_record(&mut self) -> Result<Option<(usize, String)>> {
        for (i, line) in self.inner.by_ref() {
            let line = line?;
            self.last = i + 1;
            let body = line.split('#').next().unwrap_or("").trim();
            if !body.is_empty() {
                return Ok(Some((i + 1, body.to_string())));
            }
        }
        Ok(None)
    }

    fn expect_record(&mut self, what: &str) -> Result<(usize, String)> {
        self.next_record()?.ok_or_else(|| VemError::Parse {
            line: self.last + 1,
            reason: format!("unexpected end of file, expected {what}"),
        })
    }
}

fn parse_err(line: usize, reason: impl Into<String>) -> VemError {
    VemError::Parse {
        line,
        reason: reason.into(),
    }
}

fn counted(line: usize, body: &str, keyword: &str) -> Result<usize> {
    let mut it = body.split_whitespace();
    match (it.next(), it.next(), it.next()) {
        (Some(k), Some(n), None) if k == keyword => n
            .parse()
            .map_err(|_| parse_err(line, format!("invalid {keyword} count `{n}`"))),
        _ => Err(parse_err(line, format!("expected `{keyword} <count>`, found `{body}`"))),
    }
}

fn numbers<T: std::str::FromStr>(line: usize, fields: &[&str]) -> Result<Vec<T>> {
    fields
        .iter()
        .map(|f| f.parse().map_err(|_| parse_err(line, format!("invalid number `{f}`"))))
        .collect()
}

pub fn read_poly_mesh<R: BufRead>(input: R) -> Result<PolyMesh> {
    let mut lines = Lines {
        inner: input.lines().enumerate(),
        last: 0,
    };
    let (l, header) = lines.expect_record("header")?;
    if header.split_whitespace().collect::<Vec<_>>() != MESH_HEADER.split_whitespace().collect::<Vec<_>>() {
        return Err(parse_err(l, format!("expected `{MESH_HEADER}`, found `{header}`")));
    }

    let (l, body) = lines.expect_record("vertex count")?;
    let n = counted(l, &body, "vertices")?;
    let mut vertices = Vec::with_capacity(n);
    for _ in 0..n {
        let (l, body) = lines.expect_record("vertex coordinates")?;
        let f: Vec<&str> = body.split_whitespace().collect();
        if f.len() != 2 {
            return Err(parse_err(l, format!("expected `x y`, found `{body}`")));
        }
        let xy: Vec<f64> = numbers(l, &f)?;
        vertices.push(Point2::new(xy[0], xy[1]));
    }

    let (l, body) = lines.expect_record("cell count")?;
    let m = counted(l, &body, "cells")?;
    let mut loops = Vec::with_capacity(m);
    for _ in 0..m {
        let (l, body) = lines.expect_record("cell loop")?;
        let f: Vec<&str> = body.split_whitespace().collect();
        let ids: Vec<usize> = numbers(l, &f)?;
        if ids.len() < 3 {
            return Err(parse_err(l, "a cell needs at least 3 vertices"));
        }
        if let Some(v) = ids.iter().find(|&&v| v >= n) {
            return Err(parse_err(l, format!("vertex id {v} out of range (0..{n})")));
        }
        loops.push(ids);
    }

    let mut inclusion = None;
    if let Some((l, body)) = lines.next_record()? {
        let f: Vec<&str> = body.split_whitespace().collect();
        if f[0] != "inclusion" {
            return Err(parse_err(l, format!("unexpected record `{body}`")));
        }
        let v: Vec<f64> = numbers(l, &f[1..])?;
        let (p, q) = match v.len() {
            6 => (Affine::constant(v[4]), Affine::constant(v[5])),
            10 => (Affine::new(v[4], v[5], v[6]), Affine::new(v[7], v[8], v[9])),
            k => return Err(parse_err(l, format!("inclusion needs 6 or 10 numbers, found {k}"))),
        };
        let inc = Inclusion::new(Point2::new(v[0], v[1]), Point2::new(v[2], v[3]), p, q)
            .map_err(|e| parse_err(l, e.to_string()))?;
        inclusion = Some(inc);
        if let Some((l, body)) = lines.next_record()? {
            return Err(parse_err(l, format!("trailing record `{body}`")));
        }
    }

    PolyMesh::from_loops(vertices, loops, inclusion)
}

pub fn read_poly_mesh_str(text: &str) -> Result<PolyMesh> {
    read_poly_mesh(text.as_bytes())
}
