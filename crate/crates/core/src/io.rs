//! Mesh file formats: Wavefront OBJ (read and write) and ASCII PLY (write).

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::mesh::{Configuration, TriMesh, Vec3};

pub fn write_obj(mesh: &TriMesh, x: &Configuration, mut w: impl Write) -> Result<()> {
    x.check(mesh)?;
    for p in &x.positions {
        writeln!(w, "v {:.17e} {:.17e} {:.17e}", p.x, p.y, p.z)?;
    }
    for t in &mesh.triangles {
        writeln!(w, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)?;
    }
    Ok(())
}

/// Reads `v` and triangular `f` records; other records are ignored.
/// Face entries may carry `/vt/vn` suffixes and negative (relative) indices.
pub fn read_obj(r: impl BufRead) -> Result<(TriMesh, Configuration)> {
    let mut positions = Vec::new();
    let mut triangles = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        let line_no = lineno + 1;
        let parse_err = |message: String| Error::Parse { line: line_no, message };
        let mut fields = line.split_whitespace();
        match fields.next() {
            Some("v") => {
                let c: Vec<f64> = fields
                    .take(3)
                    .map(|f| f.parse::<f64>().map_err(|e| parse_err(format!("{f}: {e}"))))
                    .collect::<Result<_>>()?;
                if c.len() != 3 {
                    return Err(parse_err("vertex needs three coordinates".into()));
                }
                positions.push(Vec3::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let idx: Vec<usize> = fields
                    .map(|f| {
                        let head = f.split('/').next().unwrap_or("");
                        let i: i64 = head.parse().map_err(|e| parse_err(format!("{f}: {e}")))?;
                        let resolved = if i < 0 { positions.len() as i64 + i } else { i - 1 };
                        usize::try_from(resolved).map_err(|_| parse_err(format!("bad index {i}")))
                    })
                    .collect::<Result<_>>()?;
                if idx.len() != 3 {
                    return Err(parse_err(format!(
                        "only triangles are supported, got {} vertices",
                        idx.len()
                    )));
                }
                triangles.push([idx[0], idx[1], idx[2]]);
            }
            _ => {}
        }
    }
    let mesh = TriMesh::new_validated(positions.len(), triangles)?;
    Ok((mesh, Configuration::new(positions)))
}

pub fn write_ply(mesh: &TriMesh, x: &Configuration, mut w: impl Write) -> Result<()> {
    x.check(mesh)?;
    writeln!(w, "ply\nformat ascii 1.0")?;
    writeln!(w, "element vertex {}", x.len())?;
    writeln!(w, "property double x\nproperty double y\nproperty double z")?;
    writeln!(w, "element face {}", mesh.triangles.len())?;
    writeln!(w, "property list uchar int vertex_indices\nend_header")?;
    for p in &x.positions {
        writeln!(w, "{:.17e} {:.17e} {:.17e}", p.x, p.y, p.z)?;
    }
    for t in &mesh.triangles {
        writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    Ok(())
}
