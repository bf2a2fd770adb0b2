use std::io::Write;

use crate::mesh::PolyMesh;

const VTK_TRIANGLE: u8 = 5;
const VTK_POLYGON: u8 = 7;

/// Legacy ASCII unstructured grid with per-cell scalar fields.
///
/// Cut cells are written as polygons following their full boundary loop.
pub fn write_vtk<W: Write>(mesh: &PolyMesh, title: &str, fields: &[(&str, &[f64])], mut out: W) -> std::io::Result<()> {
    let n = mesh.num_cells();
    for (name, values) in fields {
        if values.len() != n {
            return Err(std::io::Error::new(
                std::io::ErrorKind::InvalidInput,
                format!("field {name} has {} values for {n} cells", values.len()),
            ));
        }
    }
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "{}", title.lines().next().unwrap_or(""))?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {} double", mesh.vertices().len())?;
    for v in mesh.vertices() {
        writeln!(out, "{} {} 0", v.x, v.y)?;
    }
    let loops: Vec<Vec<usize>> = (0..n).map(|c| mesh.cell_vertices(c)).collect();
    let size: usize = loops.iter().map(|l| l.len() + 1).sum();
    writeln!(out, "CELLS {n} {size}")?;
    for l in &loops {
        write!(out, "{}", l.len())?;
        for v in l {
            write!(out, " {v}")?;
        }
        writeln!(out)?;
    }
    writeln!(out, "CELL_TYPES {n}")?;
    for (c, l) in loops.iter().enumerate() {
        let t = if l.len() == 3 && !mesh.cells()[c].is_cut {
            VTK_TRIANGLE
        } else {
            VTK_POLYGON
        };
        writeln!(out, "{t}")?;
    }
    if !fields.is_empty() {
        writeln!(out, "CELL_DATA {n}")?;
        for (name, values) in fields {
            writeln!(out, "SCALARS {name} double 1")?;
            writeln!(out, "LOOKUP_TABLE default")?;
            for v in *values {
                writeln!(out, "{v}")?;
            }
        }
    }
    Ok(())
}
