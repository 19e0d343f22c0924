//! Plain-text mesh format.
//!
//! ```text
//! file      := header vertices elements nodes marked scalar? "end"
//! header    := "rpfit-mesh" VERSION NL "dimension 2" NL
//! vertices  := "vertices" N NL ( REAL REAL NL ){N}
//! elements  := "elements" M NL ( GEOM ATTR ORDER VERT+ NL ){M}
//! nodes     := "nodes" K NL ( REAL REAL NL ){K}
//! marked    := "marked" F NL ( VERT VERT NL ){F}
//! scalar    := "scalar" NAME K NL ( REAL NL ){K}
//! GEOM      := "quad" | "tri"
//! ```
//!
//! `nodes` lists every element's nodes back to back in element order, each
//! block in the reference node order (vertices, edge nodes, interior);
//! `K` is the total count. Marked faces are given by their two vertex ids
//! with the smaller id first. The optional `scalar` block carries one value
//! per element node in the same layout, which is how discrete level sets are
//! stored. Lines starting with `#` and blank lines are ignored.
//!
//! Reals are written with 17 significant digits, so a canonical file (one
//! produced by [`MeshFile::to_text`]) reads back to identical bits and writes
//! back to identical bytes.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fem::{Element, Geometry, MixedOrderMesh};
use crate::linalg::Vec2;

const MAGIC: &str = "rpfit-mesh";
const VERSION: u32 = 1;
/// Vertices closer than this (in both coordinates) are rejected as duplicates.
pub const DUPLICATE_TOL: f64 = 1e-14;

/// Per-node scalar block, `values[e][i]` at node `i` of element `e`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    pub name: String,
    pub values: Vec<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct MeshFile {
    pub mesh: MixedOrderMesh<f64>,
    pub scalar: Option<ScalarField>,
}

fn real(v: f64) -> String {
    format!("{v:.16e}")
}

impl MeshFile {
    pub fn new(mesh: MixedOrderMesh<f64>) -> Self {
        Self { mesh, scalar: None }
    }

    pub fn with_scalar(mesh: MixedOrderMesh<f64>, scalar: ScalarField) -> Result<Self> {
        check_scalar_layout(&mesh, &scalar.values)?;
        if scalar.name.is_empty() || scalar.name.contains(char::is_whitespace) {
            return Err(Error::InvalidArgument("scalar name must be a single non-empty word".into()));
        }
        Ok(Self {
            mesh,
            scalar: Some(scalar),
        })
    }

    pub fn to_text(&self) -> String {
        let m = &self.mesh;
        let mut s = String::new();
        let _ = writeln!(s, "{MAGIC} {VERSION}");
        let _ = writeln!(s, "dimension 2");
        let _ = writeln!(s, "vertices {}", m.vertices.len());
        for v in &m.vertices {
            let _ = writeln!(s, "{} {}", real(v.x), real(v.y));
        }
        let _ = writeln!(s, "elements {}", m.elements.len());
        for el in &m.elements {
            let _ = write!(s, "{} {} {}", el.geometry.name(), el.attribute, el.order);
            for v in &el.vertices {
                let _ = write!(s, " {v}");
            }
            s.push('\n');
        }
        let total: usize = m.elements.iter().map(|e| e.nodes.len()).sum();
        let _ = writeln!(s, "nodes {total}");
        for el in &m.elements {
            for x in &el.nodes {
                let _ = writeln!(s, "{} {}", real(x.x), real(x.y));
            }
        }
        let mut pairs: Vec<[usize; 2]> = m.marked_faces().iter().map(|&f| m.edge(f).vertices).collect();
        pairs.sort_unstable();
        let _ = writeln!(s, "marked {}", pairs.len());
        for [a, b] in pairs {
            let _ = writeln!(s, "{a} {b}");
        }
        if let Some(sc) = &self.scalar {
            let _ = writeln!(s, "scalar {} {total}", sc.name);
            for v in sc.values.iter().flatten() {
                let _ = writeln!(s, "{}", real(*v));
            }
        }
        s.push_str("end\n");
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = Lines::new(text);
        let head = lines.words("header")?;
        match head.as_slice() {
            [(_, magic), (_, v)] if *magic == MAGIC => {
                if v.parse::<u32>().ok() != Some(VERSION) {
                    return Err(lines.err(format!("unsupported version '{v}'")));
                }
            }
            _ => return Err(lines.err(format!("expected '{MAGIC} {VERSION}'"))),
        }
        let dim = lines.keyword("dimension")?;
        if dim != 2 {
            return Err(lines.err(format!("only dimension 2 is supported, got {dim}")));
        }

        let nv = lines.keyword("vertices")?;
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let [x, y] = lines.reals::<2>()?;
            vertices.push(Vec2::new(x, y));
        }
        if let Some((a, b)) = find_duplicate(&vertices) {
            return Err(Error::Parse {
                line: lines.line,
                msg: format!("vertices {a} and {b} coincide within {DUPLICATE_TOL:e}"),
            });
        }

        let ne = lines.keyword("elements")?;
        let mut cells = Vec::with_capacity(ne);
        for _ in 0..ne {
            let w = lines.words("element")?;
            let line = lines.line;
            let bad = |msg: String| Error::Parse { line, msg };
            if w.len() < 3 {
                return Err(bad("element line needs geometry, attribute and order".into()));
            }
            let geometry = match Geometry::from_name(w[0].1) {
                Some(g @ (Geometry::Quadrilateral | Geometry::Triangle)) => g,
                _ => return Err(bad(format!("unknown geometry '{}'", w[0].1))),
            };
            let attribute: i32 = w[1].1.parse().map_err(|_| bad(format!("bad attribute '{}'", w[1].1)))?;
            let order: usize = w[2].1.parse().map_err(|_| bad(format!("bad order '{}'", w[2].1)))?;
            if order == 0 {
                return Err(bad("order must be at least 1".into()));
            }
            let verts: Vec<usize> = w[3..]
                .iter()
                .map(|(_, t)| t.parse().map_err(|_| bad(format!("bad vertex id '{t}'"))))
                .collect::<Result<_>>()?;
            if verts.len() != geometry.num_vertices() {
                return Err(bad(format!("{} needs {} vertices", geometry.name(), geometry.num_vertices())));
            }
            if let Some(&v) = verts.iter().find(|&&v| v >= nv) {
                return Err(bad(format!("vertex {v} out of range")));
            }
            cells.push((geometry, attribute, order, verts, line));
        }

        let total = lines.keyword("nodes")?;
        let expected: usize = cells
            .iter()
            .map(|(g, _, p, _, _)| crate::fem::ReferenceElement::<f64>::node_count(*g, *p))
            .sum();
        if total != expected {
            return Err(lines.err(format!("expected {expected} nodes for the element block, got {total}")));
        }
        let scale = vertices.iter().fold(1.0f64, |m, v| m.max(v.x.abs()).max(v.y.abs()));
        let mut elements = Vec::with_capacity(ne);
        for (e, (geometry, attribute, order, verts, line)) in cells.into_iter().enumerate() {
            let n = crate::fem::ReferenceElement::<f64>::node_count(geometry, order);
            let mut nodes = Vec::with_capacity(n);
            for _ in 0..n {
                let [x, y] = lines.reals::<2>()?;
                nodes.push(Vec2::new(x, y));
            }
            for (k, &v) in verts.iter().enumerate() {
                if (nodes[k] - vertices[v]).norm() > 1e-12 * scale {
                    return Err(Error::Parse {
                        line: lines.line,
                        msg: format!("element {e}: vertex node {k} does not match vertex {v}"),
                    });
                }
            }
            elements.push(
                Element::new(geometry, verts, attribute, order, nodes).map_err(|err| Error::Parse {
                    line,
                    msg: err.to_string(),
                })?,
            );
        }
        let mut mesh = MixedOrderMesh::new(vertices, elements)?;

        let nm = lines.keyword("marked")?;
        let mut marked = Vec::with_capacity(nm);
        for _ in 0..nm {
            let w = lines.words("marked face")?;
            let ids: Vec<usize> = w
                .iter()
                .map(|(_, t)| t.parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| lines.err("marked face needs two vertex ids".into()))?;
            let [a, b] = ids[..] else {
                return Err(lines.err("marked face needs two vertex ids".into()));
            };
            let f = mesh
                .find_edge(a, b)
                .ok_or_else(|| lines.err(format!("no edge between vertices {a} and {b}")))?;
            marked.push(f);
        }
        mesh.set_marked_faces(marked)?;

        let w = lines.words("'scalar' or 'end'")?;
        let scalar = match w.as_slice() {
            [(_, "end")] => None,
            [(_, "scalar"), (_, name), (_, k)] => {
                let name = name.to_string();
                if k.parse::<usize>().ok() != Some(total) {
                    return Err(lines.err(format!("scalar block must have {total} values")));
                }
                let mut values = Vec::with_capacity(ne);
                for el in &mesh.elements {
                    let mut v = Vec::with_capacity(el.nodes.len());
                    for _ in 0..el.nodes.len() {
                        v.push(lines.reals::<1>()?[0]);
                    }
                    values.push(v);
                }
                let end = lines.words("'end'")?;
                if !matches!(end.as_slice(), [(_, "end")]) {
                    return Err(lines.err("expected 'end'".into()));
                }
                Some(ScalarField { name, values })
            }
            _ => return Err(lines.err("expected 'scalar' or 'end'".into())),
        };
        if let Some(extra) = lines.next_content() {
            return Err(Error::Parse {
                line: extra,
                msg: "content after 'end'".into(),
            });
        }
        Ok(Self { mesh, scalar })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

fn check_scalar_layout(mesh: &MixedOrderMesh<f64>, values: &[Vec<f64>]) -> Result<()> {
    if values.len() != mesh.elements.len() || values.iter().zip(&mesh.elements).any(|(v, e)| v.len() != e.nodes.len()) {
        return Err(Error::InvalidArgument("scalar block must match the element node layout".into()));
    }
    Ok(())
}

/// First pair of vertices within [`DUPLICATE_TOL`] of each other, by a sweep over x.
fn find_duplicate(vertices: &[Vec2<f64>]) -> Option<(usize, usize)> {
    let mut idx: Vec<usize> = (0..vertices.len()).collect();
    idx.sort_by(|&a, &b| vertices[a].x.total_cmp(&vertices[b].x).then(a.cmp(&b)));
    for (k, &a) in idx.iter().enumerate() {
        for &b in &idx[k + 1..] {
            if vertices[b].x - vertices[a].x > DUPLICATE_TOL {
                break;
            }
            if (vertices[b].y - vertices[a].y).abs() <= DUPLICATE_TOL {
                return Some((a.min(b), a.max(b)));
            }
        }
    }
    None
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            inner: text.lines().enumerate(),
            line: 0,
        }
    }

    fn err(&self, msg: String) -> Error {
        Error::Parse { line: self.line, msg }
    }

    fn next_content(&mut self) -> Option<usize> {
        self.inner
            .by_ref()
            .find(|(_, l)| {
                let t = l.trim();
                !t.is_empty() && !t.starts_with('#')
            })
            .map(|(i, _)| i + 1)
    }

    fn words(&mut self, what: &str) -> Result<Vec<(usize, &'a str)>> {
        for (i, l) in self.inner.by_ref() {
            let t = l.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            self.line = i + 1;
            return Ok(t.split_whitespace().map(|w| (i + 1, w)).collect());
        }
        Err(Error::Parse {
            line: self.line + 1,
            msg: format!("unexpected end of file, expected {what}"),
        })
    }

    /// `<name> <count>` line.
    fn keyword(&mut self, name: &str) -> Result<usize> {
        let w = self.words(name)?;
        match w.as_slice() {
            [(_, k), (_, n)] if *k == name => n.parse().map_err(|_| self.err(format!("bad count '{n}'"))),
            _ => Err(self.err(format!("expected '{name} <count>'"))),
        }
    }

    fn reals<const N: usize>(&mut self) -> Result<[f64; N]> {
        let w = self.words("numbers")?;
        if w.len() != N {
            return Err(self.err(format!("expected {N} numbers, got {}", w.len())));
        }
        let mut out = [0.0f64; N];
        for (o, (_, t)) in out.iter_mut().zip(&w) {
            *o = t.parse().map_err(|_| self.err(format!("bad number '{t}'")))?;
            if !o.is_finite() {
                return Err(self.err(format!("non-finite number '{t}'")));
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::unit_square;

    fn sample() -> MeshFile {
        let mut m = unit_square::<f64>(2, 2, 3, false).unwrap();
        let f = m.find_edge(1, 4).unwrap();
        m.set_marked_faces([f]).unwrap();
        m.elements[3].attribute = 2;
        MeshFile::new(m)
    }

    #[test]
    fn canonical_round_trip_is_byte_identical() {
        let text = sample().to_text();
        let back = MeshFile::parse(&text).unwrap();
        assert_eq!(back.to_text(), text);
        assert_eq!(back.mesh.marked_faces().len(), 1);
        assert_eq!(back.mesh.elements[3].attribute, 2);
    }

    #[test]
    fn seventeen_digits_preserve_bits() {
        let mut f = sample();
        f.mesh.elements[0].nodes[5].x = 0.1 + 0.2;
        let back = MeshFile::parse(&f.to_text()).unwrap();
        assert_eq!(back.mesh.elements[0].nodes[5].x.to_bits(), (0.1f64 + 0.2).to_bits());
    }

    #[test]
    fn scalar_block_round_trips() {
        let m = unit_square::<f64>(1, 2, 2, true).unwrap();
        let values: Vec<Vec<f64>> = m.elements.iter().map(|e| e.nodes.iter().map(|x| x.x - x.y * 0.3).collect()).collect();
        let f = MeshFile::with_scalar(m, ScalarField { name: "sigma".into(), values: values.clone() }).unwrap();
        let back = MeshFile::parse(&f.to_text()).unwrap();
        assert_eq!(back.scalar.unwrap().values, values);
    }

    #[test]
    fn rejects_duplicate_vertices() {
        let text = sample().to_text().replacen(
            "vertices 9\n0.0000000000000000e0 0.0000000000000000e0",
            "vertices 9\n5.0000000000000000e-1 0.0000000000000000e0",
            1,
        );
        let err = MeshFile::parse(&text).unwrap_err();
        assert!(err.to_string().contains("coincide"), "{err}");
    }

    #[test]
    fn rejects_count_mismatch_and_garbage() {
        let text = sample().to_text();
        assert!(MeshFile::parse(&text.replacen("elements 4", "elements 5", 1)).is_err());
        assert!(MeshFile::parse(&text.replacen("nodes 64", "nodes 63", 1)).is_err());
        assert!(MeshFile::parse(&text.replacen("rpfit-mesh 1", "rpfit-mesh 9", 1)).is_err());
        assert!(MeshFile::parse(&format!("{text}extra\n")).is_err());
        assert!(MeshFile::parse("").is_err());
    }

    #[test]
    fn comments_and_blank_lines_are_skipped() {
        let text = sample().to_text().replace("elements", "# cells follow\n\nelements");
        assert!(MeshFile::parse(&text).is_ok());
    }
}
