use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::fem::{Geometry, MixedOrderMesh};
use crate::linalg::Vec2;

/// Segments per edge in SVG polylines.
pub const SVG_EDGE_SEGMENTS: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Coloring {
    Order,
    Material,
    /// Element minimum of `det A`, red where it is not positive.
    DetA,
}

impl Coloring {
    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "order" => Some(Coloring::Order),
            "material" => Some(Coloring::Material),
            "deta" | "detA" | "det" => Some(Coloring::DetA),
            _ => None,
        }
    }
}

const PALETTE: [&str; 8] = ["#f0f0f0", "#9ecae1", "#fdd49e", "#a1d99b", "#fc9272", "#bcbddc", "#fdae6b", "#c7e9c0"];

fn palette(k: usize) -> &'static str {
    PALETTE[k % PALETTE.len()]
}

/// Blue (low) to yellow (high) ramp on `t ∈ [0, 1]`.
fn ramp(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let r = (40.0 + 215.0 * t).round() as u8;
    let g = (80.0 + 150.0 * t).round() as u8;
    let b = (200.0 - 160.0 * t).round() as u8;
    format!("#{r:02x}{g:02x}{b:02x}")
}

/// Closed boundary polyline of element `e`, `SVG_EDGE_SEGMENTS` per edge,
/// counter-clockwise in reference orientation. The first point is not repeated.
pub fn element_outline(mesh: &MixedOrderMesh<f64>, e: usize) -> Vec<Vec2<f64>> {
    let el = &mesh.elements[e];
    let re = el.reference();
    let mut pts = Vec::with_capacity(el.geometry.num_edges() * SVG_EDGE_SEGMENTS);
    for le in 0..el.geometry.num_edges() {
        for k in 0..SVG_EDGE_SEGMENTS {
            let t = k as f64 / SVG_EDGE_SEGMENTS as f64;
            pts.push(el.eval_map(re.edge_point(le, t)));
        }
    }
    pts
}

/// Edge `id` as an open polyline of `SVG_EDGE_SEGMENTS + 1` points.
pub fn edge_polyline(mesh: &MixedOrderMesh<f64>, id: usize) -> Vec<Vec2<f64>> {
    (0..=SVG_EDGE_SEGMENTS)
        .map(|k| mesh.edge_point(id, k as f64 / SVG_EDGE_SEGMENTS as f64))
        .collect()
}

/// SVG 1.1 document of the mesh. Elements are filled according to
/// `coloring`, element boundaries are drawn as polylines and marked faces
/// are drawn thicker. Output depends only on the mesh.
pub fn export_svg(mesh: &MixedOrderMesh<f64>, coloring: Coloring) -> String {
    let (lo, hi) = mesh.bounding_box();
    let span = (hi.x - lo.x).max(hi.y - lo.y).max(f64::MIN_POSITIVE);
    let size = 800.0;
    let margin = 20.0;
    let legend_w = 140.0;
    let scale = (size - 2.0 * margin) / span;
    let map = |x: Vec2<f64>| (margin + (x.x - lo.x) * scale, margin + (hi.y - x.y) * scale);
    let w = margin * 2.0 + (hi.x - lo.x) * scale + legend_w;
    let h = margin * 2.0 + (hi.y - lo.y) * scale;

    let dets: Vec<f64> = mesh.elements.iter().map(|e| e.min_det_jacobian()).collect();
    let (dmin, dmax) = dets.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &d| (a.min(d), b.max(d)));
    let fill = |e: usize| -> String {
        match coloring {
            Coloring::Order => palette(mesh.elements[e].order).to_string(),
            Coloring::Material => palette(mesh.elements[e].attribute.unsigned_abs() as usize).to_string(),
            Coloring::DetA => {
                if dets[e] <= 0.0 {
                    "#d62728".to_string()
                } else if dmax > dmin {
                    ramp((dets[e] - dmin.max(0.0)) / (dmax - dmin.max(0.0)))
                } else {
                    ramp(1.0)
                }
            }
        }
    };

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w:.2}" height="{h:.2}" viewBox="0 0 {w:.2} {h:.2}">"#
    );
    let _ = writeln!(s, r##"<g id="elements" stroke="#333333" stroke-width="0.8">"##);
    for e in 0..mesh.elements.len() {
        let pts: Vec<String> = element_outline(mesh, e)
            .into_iter()
            .map(|x| {
                let (a, b) = map(x);
                format!("{a:.4},{b:.4}")
            })
            .collect();
        let _ = writeln!(s, r#"<polygon id="e{e}" fill="{}" points="{}"/>"#, fill(e), pts.join(" "));
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, r##"<g id="marked" fill="none" stroke="#000000" stroke-width="2.5">"##);
    for &f in mesh.marked_faces() {
        let pts: Vec<String> = edge_polyline(mesh, f)
            .into_iter()
            .map(|x| {
                let (a, b) = map(x);
                format!("{a:.4},{b:.4}")
            })
            .collect();
        let _ = writeln!(s, r#"<polyline points="{}"/>"#, pts.join(" "));
    }
    let _ = writeln!(s, "</g>");

    let x0 = w - legend_w + 10.0;
    let _ = writeln!(s, r#"<g id="legend" font-family="sans-serif" font-size="12">"#);
    let entries: Vec<(String, String)> = match coloring {
        Coloring::Order => mesh
            .elements
            .iter()
            .map(|e| e.order)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .map(|p| (palette(p).to_string(), format!("p = {p}")))
            .collect(),
        Coloring::Material => mesh
            .elements
            .iter()
            .map(|e| e.attribute)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .map(|a| (palette(a.unsigned_abs() as usize).to_string(), format!("attribute {a}")))
            .collect(),
        Coloring::DetA => vec![
            (ramp(0.0), format!("{dmin:.3e}")),
            (ramp(1.0), format!("{dmax:.3e}")),
        ],
    };
    for (k, (color, label)) in entries.iter().enumerate() {
        let y = margin + 20.0 * k as f64;
        let _ = writeln!(
            s,
            r##"<rect class="legend-entry" x="{x0:.2}" y="{y:.2}" width="14" height="14" fill="{color}" stroke="#333333"/><text x="{:.2}" y="{:.2}">{label}</text>"##,
            x0 + 20.0,
            y + 11.0
        );
    }
    let _ = writeln!(s, "</g>");
    s.push_str("</svg>\n");
    s
}

/// Reference points of the `p × p` sub-cell lattice and the sub-cells as
/// VTK cell types with local point ids.
fn lattice(geometry: Geometry, p: usize) -> (Vec<Vec2<f64>>, Vec<(u8, Vec<usize>)>) {
    let pf = p as f64;
    match geometry {
        Geometry::Triangle => {
            let mut pts = Vec::new();
            let mut id = vec![vec![0; p + 1]; p + 1];
            for j in 0..=p {
                for i in 0..=p - j {
                    id[j][i] = pts.len();
                    pts.push(Vec2::new(i as f64 / pf, j as f64 / pf));
                }
            }
            let mut cells = Vec::new();
            for j in 0..p {
                for i in 0..p - j {
                    cells.push((5, vec![id[j][i], id[j][i + 1], id[j + 1][i]]));
                    if i + j + 1 < p {
                        cells.push((5, vec![id[j][i + 1], id[j + 1][i + 1], id[j + 1][i]]));
                    }
                }
            }
            (pts, cells)
        }
        _ => {
            let mut pts = Vec::new();
            for j in 0..=p {
                for i in 0..=p {
                    pts.push(Vec2::new(i as f64 / pf, j as f64 / pf));
                }
            }
            let at = |i: usize, j: usize| j * (p + 1) + i;
            let mut cells = Vec::new();
            for j in 0..p {
                for i in 0..p {
                    cells.push((9, vec![at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)]));
                }
            }
            (pts, cells)
        }
    }
}

/// Legacy-VTK ASCII unstructured grid. Each element of order `p` becomes
/// `p × p` linear sub-cells (quads, or `p²` triangles) on a uniform lattice
/// mapped through the element; cell data carries `order`, `material` and
/// the parent element id.
pub fn export_vtk(mesh: &MixedOrderMesh<f64>) -> String {
    let mut points = Vec::new();
    let mut cells: Vec<(u8, Vec<usize>, usize)> = Vec::new();
    for (e, el) in mesh.elements.iter().enumerate() {
        let (pts, sub) = lattice(el.geometry, el.order);
        let base = points.len();
        points.extend(pts.into_iter().map(|xr| el.eval_map(xr)));
        cells.extend(sub.into_iter().map(|(t, ids)| (t, ids.into_iter().map(|i| i + base).collect(), e)));
    }
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\nrpfit mesh\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(s, "POINTS {} double", points.len());
    for x in &points {
        let _ = writeln!(s, "{:.16e} {:.16e} 0", x.x, x.y);
    }
    let size: usize = cells.iter().map(|c| c.1.len() + 1).sum();
    let _ = writeln!(s, "CELLS {} {size}", cells.len());
    for (_, ids, _) in &cells {
        let _ = write!(s, "{}", ids.len());
        for i in ids {
            let _ = write!(s, " {i}");
        }
        s.push('\n');
    }
    let _ = writeln!(s, "CELL_TYPES {}", cells.len());
    for (t, _, _) in &cells {
        let _ = writeln!(s, "{t}");
    }
    let _ = writeln!(s, "CELL_DATA {}", cells.len());
    for (name, f) in [
        ("order", &(|e: usize| mesh.elements[e].order as i64) as &dyn Fn(usize) -> i64),
        ("material", &|e: usize| mesh.elements[e].attribute as i64),
        ("element", &|e: usize| e as i64),
    ] {
        let _ = writeln!(s, "SCALARS {name} int 1\nLOOKUP_TABLE default");
        for (_, _, e) in &cells {
            let _ = writeln!(s, "{}", f(*e));
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::unit_square;

    #[test]
    fn unit_square_svg_is_one_square() {
        let m = unit_square::<f64>(1, 1, 1, false).unwrap();
        let svg = export_svg(&m, Coloring::Order);
        assert_eq!(svg.matches("<polygon").count(), 1);
        let outline = element_outline(&m, 0);
        assert_eq!(outline.len(), 4 * SVG_EDGE_SEGMENTS);
        // every outline point lies on the unit square boundary
        for x in outline {
            let on = x.x.abs() < 1e-15 || (x.x - 1.0).abs() < 1e-15 || x.y.abs() < 1e-15 || (x.y - 1.0).abs() < 1e-15;
            assert!(on, "{x:?}");
        }
    }

    #[test]
    fn order_legend_lists_present_orders() {
        let mut m = unit_square::<f64>(3, 1, 1, false).unwrap();
        m.set_orders(&[1, 3, 3]).unwrap();
        let svg = export_svg(&m, Coloring::Order);
        assert_eq!(svg.matches("legend-entry").count(), 2);
        assert!(svg.contains(">p = 1<") && svg.contains(">p = 3<") && !svg.contains(">p = 2<"));
    }

    #[test]
    fn svg_is_deterministic() {
        let m = unit_square::<f64>(2, 2, 2, true).unwrap();
        for c in [Coloring::Order, Coloring::Material, Coloring::DetA] {
            assert_eq!(export_svg(&m, c), export_svg(&m, c));
        }
    }

    #[test]
    fn vtk_cell_counts() {
        let mut m = unit_square::<f64>(2, 1, 1, false).unwrap();
        let vtk = export_vtk(&m);
        assert!(vtk.contains("CELLS 2 10"));
        m.set_orders(&[3, 1]).unwrap();
        let vtk = export_vtk(&m);
        assert!(vtk.contains("CELL_TYPES 10\n"));
        let t = unit_square::<f64>(1, 1, 3, true).unwrap();
        assert!(export_vtk(&t).contains("CELL_TYPES 18\n"));
    }

    #[test]
    fn vtk_order_data_follows_elements() {
        let mut m = unit_square::<f64>(3, 1, 1, false).unwrap();
        m.set_orders(&[2, 1, 3]).unwrap();
        let vtk = export_vtk(&m);
        let block = vtk.split("SCALARS order int 1\nLOOKUP_TABLE default\n").nth(1).unwrap();
        let orders: Vec<usize> = block.lines().take(4 + 1 + 9).map(|l| l.parse().unwrap()).collect();
        assert_eq!(orders, [vec![2; 4], vec![1], vec![3; 9]].concat());
    }
}
