use std::fmt::Write as _;
use std::io::{BufRead, Write};

use super::{Mesh2D, MeshError};

impl Mesh2D {
    /// Writes the plain text format: a header `nv nt nbe`, vertex coordinates, triangles
    /// `v0 v1 v2 marker` and boundary edges `v0 v1 marker`.
    pub fn write_ascii<W: Write>(&self, mut w: W) -> Result<(), MeshError> {
        writeln!(w, "{} {} {}", self.nv(), self.nt(), self.boundary_edges().len())?;
        for p in self.vertices() {
            writeln!(w, "{:e} {:e}", p[0], p[1])?;
        }
        for t in 0..self.nt() {
            let v = self.triangles()[t];
            writeln!(w, "{} {} {} {}", v[0], v[1], v[2], self.domain_marker(t))?;
        }
        for b in 0..self.boundary_edges().len() {
            let e = self.boundary_edges()[b];
            writeln!(w, "{} {} {}", e[0], e[1], self.boundary_marker(b))?;
        }
        Ok(())
    }

    pub fn read_ascii<R: BufRead>(r: R) -> Result<Self, MeshError> {
        let mut lines = r.lines().enumerate().filter_map(|(i, l)| match l {
            Ok(s) if s.trim().is_empty() || s.trim_start().starts_with('#') => None,
            other => Some((i + 1, other)),
        });
        let mut next = |what: &str| -> Result<(usize, Vec<String>), MeshError> {
            match lines.next() {
                Some((i, Ok(s))) => Ok((i, s.split_whitespace().map(str::to_string).collect())),
                Some((_, Err(e))) => Err(e.into()),
                None => Err(MeshError::Parse { line: 0, msg: format!("unexpected end of file, expected {what}") }),
            }
        };
        fn num<T: std::str::FromStr>(line: usize, s: &str) -> Result<T, MeshError> {
            s.parse().map_err(|_| MeshError::Parse { line, msg: format!("cannot parse '{s}'") })
        }
        fn arity(line: usize, f: &[String], n: usize) -> Result<(), MeshError> {
            if f.len() != n {
                return Err(MeshError::Parse { line, msg: format!("expected {n} fields, found {}", f.len()) });
            }
            Ok(())
        }
        let (l, h) = next("header")?;
        arity(l, &h, 3)?;
        let (nv, nt, nb): (usize, usize, usize) = (num(l, &h[0])?, num(l, &h[1])?, num(l, &h[2])?);
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let (l, f) = next("vertex")?;
            arity(l, &f, 2)?;
            vertices.push([num(l, &f[0])?, num(l, &f[1])?]);
        }
        let mut triangles = Vec::with_capacity(nt);
        for _ in 0..nt {
            let (l, f) = next("triangle")?;
            arity(l, &f, 4)?;
            triangles.push(([num(l, &f[0])?, num(l, &f[1])?, num(l, &f[2])?], f[3].clone()));
        }
        let mut boundary = Vec::with_capacity(nb);
        for _ in 0..nb {
            let (l, f) = next("boundary edge")?;
            arity(l, &f, 3)?;
            boundary.push(([num(l, &f[0])?, num(l, &f[1])?], f[2].clone()));
        }
        Mesh2D::new(vertices, triangles, boundary)
    }

    /// Legacy VTK unstructured grid with named point vector fields. Each field holds one
    /// 2-vector per vertex.
    pub fn write_vtk<W: Write>(&self, mut w: W, fields: &[(&str, &[[f64; 2]])]) -> Result<(), MeshError> {
        for (name, data) in fields {
            if data.len() != self.nv() {
                return Err(MeshError::InvalidParameter(format!(
                    "field {name} has {} values for {} vertices",
                    data.len(),
                    self.nv()
                )));
            }
        }
        let mut s = String::new();
        let _ = writeln!(s, "# vtk DataFile Version 3.0\nshapediff mesh\nASCII\nDATASET UNSTRUCTURED_GRID");
        let _ = writeln!(s, "POINTS {} double", self.nv());
        for p in self.vertices() {
            let _ = writeln!(s, "{:e} {:e} 0", p[0], p[1]);
        }
        let _ = writeln!(s, "CELLS {} {}", self.nt(), 4 * self.nt());
        for v in self.triangles() {
            let _ = writeln!(s, "3 {} {} {}", v[0], v[1], v[2]);
        }
        let _ = writeln!(s, "CELL_TYPES {}", self.nt());
        for _ in 0..self.nt() {
            s.push_str("5\n");
        }
        if !fields.is_empty() {
            let _ = writeln!(s, "POINT_DATA {}", self.nv());
            for (name, data) in fields {
                let _ = writeln!(s, "VECTORS {} double", name.replace(char::is_whitespace, "_"));
                for d in data.iter() {
                    let _ = writeln!(s, "{:e} {:e} 0", d[0], d[1]);
                }
            }
        }
        w.write_all(s.as_bytes())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_disk;

    #[test]
    fn ascii_round_trip_is_exact() {
        let m = generate_disk([0.5, 0.5], 0.5, 0.2).unwrap();
        let mut buf = Vec::new();
        m.write_ascii(&mut buf).unwrap();
        let r = Mesh2D::read_ascii(&buf[..]).unwrap();
        assert_eq!(r.vertices(), m.vertices());
        assert_eq!(r.triangles(), m.triangles());
        assert_eq!(r.boundary_edges(), m.boundary_edges());
        assert_eq!(r.boundary_marker(0), "circle");
    }

    #[test]
    fn malformed_input_reports_line() {
        let text = "3 1 3\n0 0\n1 0\n0 x\n0 1 2 d\n0 1 a\n1 2 a\n2 0 a\n";
        match Mesh2D::read_ascii(text.as_bytes()) {
            Err(MeshError::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
        assert!(Mesh2D::read_ascii("3 1 3\n0 0\n".as_bytes()).is_err());
    }

    #[test]
    fn vtk_has_expected_sections() {
        let m = generate_disk([0.0, 0.0], 1.0, 0.5).unwrap();
        let field = vec![[1.0, 0.0]; m.nv()];
        let mut buf = Vec::new();
        m.write_vtk(&mut buf, &[("deformation", &field)]).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.contains(&format!("POINTS {} double", m.nv())));
        assert!(s.contains(&format!("CELL_TYPES {}", m.nt())));
        assert!(s.contains("VECTORS deformation double"));
        assert!(m.write_vtk(Vec::new(), &[("bad", &field[..1])]).is_err());
    }
}
