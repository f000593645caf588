//! The `.motif` file format (canonical JSON), and SVG rendering of flat
//! motifs and tiled doubly periodic diagrams.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagram::{Decoration, DiagramError, Edge, MotifDiagram, ShiftVector, VertexId};

pub const FORMAT_VERSION: &str = "motif/1";

#[derive(Error, Clone, PartialEq, Eq, Debug)]
pub enum IoError {
    #[error("SyntaxError: line {line} column {column}: {msg}")]
    Syntax { line: usize, column: usize, msg: String },
    #[error("SchemaError: line {line} column {column}: {msg}")]
    Schema { line: usize, column: usize, msg: String },
    #[error("SemanticError: {0}")]
    Semantic(#[from] DiagramError),
}

// ---- on-disk representation -------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MotifFile {
    format: String,
    vertices: Vec<FileVertex>,
    edges: Vec<FileEdge>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    free_loops: Vec<[i64; 2]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    classes: Vec<FileClass>,
    /// Optional orientation marks; carried by the format but unused by the
    /// core semantics.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    marks: Vec<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileVertex {
    id: String,
    decoration: FileDecoration,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    layout: Option<[i32; 2]>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum FileDecoration {
    Classical(String),
    Pre { pre: String },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileEdge {
    tail: (String, u8),
    head: (String, u8),
    shift: [i64; 2],
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileClass {
    id: String,
    members: Vec<String>,
}

// ---- parse / serialize ------------------------------------------------------

fn classify(err: serde_json::Error) -> IoError {
    let (line, column, msg) = (err.line(), err.column(), err.to_string());
    let schema = msg.starts_with("unknown field")
        || msg.starts_with("missing field")
        || msg.starts_with("duplicate field");
    if err.is_data() && schema {
        IoError::Schema { line, column, msg }
    } else {
        IoError::Syntax { line, column, msg }
    }
}

pub fn parse(text: &str) -> Result<MotifDiagram, IoError> {
    let file: MotifFile = serde_json::from_str(text).map_err(classify)?;
    if file.format != FORMAT_VERSION {
        return Err(IoError::Schema {
            line: 1,
            column: 1,
            msg: format!("unsupported format {:?}, expected {FORMAT_VERSION:?}", file.format),
        });
    }
    let mut vertices: Vec<(VertexId, Decoration)> = Vec::new();
    let mut layout: BTreeMap<VertexId, (i32, i32)> = BTreeMap::new();
    for v in &file.vertices {
        let dec = match &v.decoration {
            FileDecoration::Classical(s) => match s.as_str() {
                "even" => Decoration::OverEven,
                "odd" => Decoration::OverOdd,
                other => {
                    return Err(IoError::Schema {
                        line: 1,
                        column: 1,
                        msg: format!(
                            "decoration of vertex {:?} must be \"even\", \"odd\" or {{\"pre\": CLASS}}, got {other:?}",
                            v.id
                        ),
                    })
                }
            },
            FileDecoration::Pre { pre } => Decoration::Pre(pre.clone()),
        };
        vertices.push((v.id.clone(), dec));
        if let Some([x, y]) = v.layout {
            layout.insert(v.id.clone(), (x, y));
        }
    }
    let edges = file.edges.iter().map(|e| {
        Edge::new(
            (e.tail.0.clone(), e.tail.1),
            (e.head.0.clone(), e.head.1),
            ShiftVector::new(e.shift[0], e.shift[1]),
        )
    });
    let classes = file.classes.iter().map(|c| {
        (
            c.id.clone(),
            c.members.iter().cloned().collect::<BTreeSet<VertexId>>(),
        )
    });
    let mut d = MotifDiagram::new(
        vertices,
        edges,
        file.free_loops.iter().map(|[a, b]| ShiftVector::new(*a, *b)),
        classes,
    );
    d.layout = layout;
    if let Some(err) = d.check_l0().into_iter().next() {
        return Err(IoError::Semantic(err));
    }
    Ok(d)
}

/// Canonical byte-deterministic serialization: sorted ids, fixed integer
/// formatting, two-space indentation.
pub fn serialize(d: &MotifDiagram) -> String {
    let file = MotifFile {
        format: FORMAT_VERSION.to_string(),
        vertices: d
            .vertices
            .iter()
            .map(|(id, dec)| FileVertex {
                id: id.clone(),
                decoration: match dec {
                    Decoration::OverEven => FileDecoration::Classical("even".into()),
                    Decoration::OverOdd => FileDecoration::Classical("odd".into()),
                    Decoration::Pre(c) => FileDecoration::Pre { pre: c.clone() },
                },
                layout: d.layout.get(id).map(|(x, y)| [*x, *y]),
            })
            .collect(),
        edges: d
            .edges
            .iter()
            .map(|e| FileEdge {
                tail: (e.tail.0.clone(), e.tail.1),
                head: (e.head.0.clone(), e.head.1),
                shift: [e.shift.a, e.shift.b],
            })
            .collect(),
        free_loops: d.free_loops.iter().map(|l| [l.a, l.b]).collect(),
        classes: d
            .classes
            .iter()
            .map(|(id, members)| FileClass {
                id: id.clone(),
                members: members.iter().cloned().collect(),
            })
            .collect(),
        marks: Vec::new(),
    };
    let mut out = serde_json::to_string_pretty(&file).expect("serializable");
    out.push('\n');
    out
}

// ---- rendering --------------------------------------------------------------

#[derive(Clone, Copy, Debug)]
pub struct RenderOptions {
    /// Seed for the deterministic fallback layout.
    pub seed: u64,
    /// Pixel size of one lattice cell.
    pub cell: f64,
}

impl Default for RenderOptions {
    fn default() -> Self {
        RenderOptions { seed: 1, cell: 160.0 }
    }
}

/// Vertex positions in the unit square: layout hints when complete,
/// otherwise a seeded force-directed relaxation on the torus.
fn layout_positions(d: &MotifDiagram, seed: u64) -> BTreeMap<VertexId, (f64, f64)> {
    use rand::{Rng, SeedableRng};
    if !d.vertices.is_empty() && d.vertices.keys().all(|v| d.layout.contains_key(v)) {
        return d
            .layout
            .iter()
            .map(|(v, (x, y))| (v.clone(), (*x as f64 / 1000.0, *y as f64 / 1000.0)))
            .collect();
    }
    let ids: Vec<&VertexId> = d.vertices.keys().collect();
    let n = ids.len();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut pos: Vec<(f64, f64)> = (0..n)
        .map(|_| (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)))
        .collect();
    if n == 0 {
        return BTreeMap::new();
    }
    let index: BTreeMap<&VertexId, usize> =
        ids.iter().enumerate().map(|(i, v)| (*v, i)).collect();
    // toroidal displacement to the nearest image
    let wrap = |mut dx: f64| {
        while dx > 0.5 {
            dx -= 1.0;
        }
        while dx < -0.5 {
            dx += 1.0;
        }
        dx
    };
    for iter in 0..300 {
        let step = 0.05 * (1.0 - iter as f64 / 300.0);
        let mut force = vec![(0.0f64, 0.0f64); n];
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let dx = wrap(pos[i].0 - pos[j].0);
                let dy = wrap(pos[i].1 - pos[j].1);
                let d2 = (dx * dx + dy * dy).max(1e-4);
                let rep = 0.02 / d2;
                force[i].0 += dx * rep;
                force[i].1 += dy * rep;
            }
        }
        for e in &d.edges {
            let i = index[&e.tail.0];
            let j = index[&e.head.0];
            // attract toward the shifted image of the neighbor
            let dx = wrap(pos[j].0 + e.shift.a as f64 - pos[i].0);
            let dy = wrap(pos[j].1 + e.shift.b as f64 - pos[i].1);
            force[i].0 += dx * 0.5;
            force[i].1 += dy * 0.5;
            force[j].0 -= dx * 0.5;
            force[j].1 -= dy * 0.5;
        }
        for i in 0..n {
            pos[i].0 = (pos[i].0 + step * force[i].0.clamp(-1.0, 1.0)).rem_euclid(1.0);
            pos[i].1 = (pos[i].1 + step * force[i].1.clamp(-1.0, 1.0)).rem_euclid(1.0);
        }
    }
    ids.iter()
        .enumerate()
        .map(|(i, v)| ((*v).clone(), pos[i]))
        .collect()
}

fn slot_dir(s: u8) -> (f64, f64) {
    match s % 4 {
        0 => (1.0, 0.0),
        1 => (0.0, 1.0),
        2 => (-1.0, 0.0),
        _ => (0.0, -1.0),
    }
}

/// Render the motif tiled `p` by `q`. Y grows upward (SVG coordinates are
/// flipped accordingly). Crossings get over-strand breaks; precrossings are
/// gray discs labeled with their class id.
pub fn render_svg(d: &MotifDiagram, tiles: (u32, u32), options: &RenderOptions) -> String {
    let (p, q) = (tiles.0.max(1) as i64, tiles.1.max(1) as i64);
    let cell = options.cell;
    let width = p as f64 * cell;
    let height = q as f64 * cell;
    // to pixel coordinates, flipping y
    let px = |x: f64, y: f64| -> (f64, f64) { (x * cell, height - y * cell) };
    let positions = layout_positions(d, options.seed);

    let mut body = String::new();
    let mut put = |s: String| body.push_str(&s);

    // unit-cell grid
    for i in 0..=p {
        put(format!(
            "  <line x1=\"{:.2}\" y1=\"0.00\" x2=\"{:.2}\" y2=\"{height:.2}\" class=\"grid\"/>\n",
            i as f64 * cell,
            i as f64 * cell
        ));
    }
    for j in 0..=q {
        put(format!(
            "  <line x1=\"0.00\" y1=\"{:.2}\" x2=\"{width:.2}\" y2=\"{:.2}\" class=\"grid\"/>\n",
            j as f64 * cell,
            j as f64 * cell
        ));
    }

    // under-strand break: which darts are shortened at their vertex
    let is_under = |v: &VertexId, s: u8| -> bool {
        match &d.vertices[v] {
            Decoration::Pre(_) => false,
            dec => s % 2 != dec.over_parity().unwrap(),
        }
    };

    // edges, one copy per tile
    for e in &d.edges {
        let (tx, ty) = positions[&e.tail.0];
        let (hx0, hy0) = positions[&e.head.0];
        let hx = hx0 + e.shift.a as f64;
        let hy = hy0 + e.shift.b as f64;
        let break_t = if is_under(&e.tail.0, e.tail.1) { 0.07 } else { 0.0 };
        let break_h = if is_under(&e.head.0, e.head.1) { 0.07 } else { 0.0 };
        let (dtx, dty) = slot_dir(e.tail.1);
        let (dhx, dhy) = slot_dir(e.head.1);
        for i in 0..p {
            for j in 0..q {
                let (ox, oy) = (i as f64, j as f64);
                let a = (tx + ox + dtx * break_t, ty + oy + dty * break_t);
                let b = (hx + ox + dhx * break_h, hy + oy + dhy * break_h);
                let c1 = (tx + ox + dtx * 0.25, ty + oy + dty * 0.25);
                let c2 = (hx + ox + dhx * 0.25, hy + oy + dhy * 0.25);
                let (ax, ay) = px(a.0, a.1);
                let (c1x, c1y) = px(c1.0, c1.1);
                let (c2x, c2y) = px(c2.0, c2.1);
                let (bx, by) = px(b.0, b.1);
                put(format!(
                    "  <path d=\"M {ax:.2} {ay:.2} C {c1x:.2} {c1y:.2}, {c2x:.2} {c2y:.2}, {bx:.2} {by:.2}\" class=\"strand\"/>\n"
                ));
            }
        }
    }

    // free loops
    let mut contractible_seen = 0;
    let mut essential_seen = 0;
    for l in &d.free_loops {
        if l.is_zero() {
            contractible_seen += 1;
            let r = 0.10 + 0.05 * contractible_seen as f64;
            for i in 0..p {
                for j in 0..q {
                    let (cx, cy) = px(i as f64 + 0.5, j as f64 + 0.5);
                    put(format!(
                        "  <circle cx=\"{cx:.2}\" cy=\"{cy:.2}\" r=\"{:.2}\" class=\"loop\"/>\n",
                        r * cell
                    ));
                }
            }
        } else {
            essential_seen += 1;
            let off = 0.13 * essential_seen as f64;
            // a straight line of direction (a, b) through (off, off), one
            // copy per tile so the family tiles consistently
            for i in -1..=p {
                for j in -1..=q {
                    let x0 = i as f64 + off;
                    let y0 = j as f64 + off;
                    let (ax, ay) = px(x0, y0);
                    let (bx, by) = px(x0 + l.a as f64, y0 + l.b as f64);
                    put(format!(
                        "  <line x1=\"{ax:.2}\" y1=\"{ay:.2}\" x2=\"{bx:.2}\" y2=\"{by:.2}\" class=\"strand\"/>\n"
                    ));
                }
            }
        }
    }

    // vertices: precrossing discs with labels
    for (v, dec) in &d.vertices {
        if let Decoration::Pre(c) = dec {
            let (x, y) = positions[v];
            for i in 0..p {
                for j in 0..q {
                    let (cx, cy) = px(x + i as f64, y + j as f64);
                    put(format!(
                        "  <circle cx=\"{cx:.2}\" cy=\"{cy:.2}\" r=\"{:.2}\" class=\"pre\"/>\n",
                        0.07 * cell
                    ));
                    put(format!(
                        "  <text x=\"{cx:.2}\" y=\"{:.2}\" class=\"label\">{c}</text>\n",
                        cy + 0.02 * cell
                    ));
                }
            }
        }
    }

    let mut out = String::new();
    let _ = write!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{width:.2}\" height=\"{height:.2}\" viewBox=\"0 0 {width:.2} {height:.2}\">\n\
         <metadata>format={FORMAT_VERSION} seed={} tiles={}x{}</metadata>\n\
         <style>\n\
           .grid {{ stroke: #dddddd; stroke-width: 1; }}\n\
           .strand {{ stroke: #222222; stroke-width: 2.5; fill: none; stroke-linecap: round; }}\n\
           .loop {{ stroke: #222222; stroke-width: 2.5; fill: none; }}\n\
           .pre {{ fill: #999999; stroke: #555555; stroke-width: 1; }}\n\
           .label {{ font-family: monospace; font-size: 12px; text-anchor: middle; fill: #ffffff; }}\n\
         </style>\n{body}</svg>\n",
        options.seed, tiles.0, tiles.1
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagram::reference_e1;

    #[test]
    fn e1_roundtrip_and_determinism() {
        let d = reference_e1();
        let s1 = serialize(&d);
        let s2 = serialize(&d);
        assert_eq!(s1, s2);
        assert_eq!(parse(&s1).unwrap(), d);
    }

    #[test]
    fn roundtrip_with_layout_and_loops() {
        let mut d = reference_e1();
        d.layout.insert("v".into(), (250, 750));
        d.free_loops.push(ShiftVector::new(0, 1));
        d.normalize();
        assert_eq!(parse(&serialize(&d)).unwrap(), d);
    }

    #[test]
    fn gauge_noop_serializes_identically() {
        let d = reference_e1();
        let pot = BTreeMap::from([("v".to_string(), ShiftVector::new(2, 2))]);
        assert_eq!(serialize(&d.regauge(&pot).unwrap()), serialize(&d));
    }

    #[test]
    fn bad_json_is_syntax_error() {
        match parse("{ not json") {
            Err(IoError::Syntax { line, .. }) => assert!(line >= 1),
            other => panic!("expected SyntaxError, got {other:?}"),
        }
    }

    #[test]
    fn string_shift_is_syntax_error_with_position() {
        let text = serialize(&reference_e1())
            .replace("\"shift\": [\n        0,\n        -1\n      ]", "\"shift\": \"(0,-1)\"");
        assert_ne!(text, serialize(&reference_e1()), "replacement must hit");
        match parse(&text) {
            Err(IoError::Syntax { line, .. }) => assert!(line > 1),
            other => panic!("expected SyntaxError, got {other:?}"),
        }
    }

    #[test]
    fn unknown_field_is_schema_error() {
        let text = serialize(&reference_e1()).replace("\"format\"", "\"bogus\": 1, \"format\"");
        match parse(&text) {
            Err(IoError::Schema { .. }) => {}
            other => panic!("expected SchemaError, got {other:?}"),
        }
    }

    #[test]
    fn missing_class_is_semantic_error() {
        let text = serialize(&reference_e1()).replace(
            "\"classes\": [\n    {\n      \"id\": \"x\",\n      \"members\": [\n        \"v\"\n      ]\n    }\n  ]",
            "\"classes\": []",
        );
        match parse(&text) {
            Err(IoError::Semantic(DiagramError::UnknownClass(c))) => assert_eq!(c, "x"),
            other => panic!("expected SemanticError(UnknownClass), got {other:?}"),
        }
    }

    #[test]
    fn wrong_format_version_rejected() {
        let text = serialize(&reference_e1()).replace("motif/1", "motif/9");
        assert!(matches!(parse(&text), Err(IoError::Schema { .. })));
    }

    #[test]
    fn svg_free_loop_single_tile() {
        let d = MotifDiagram::new([], [], [ShiftVector::ZERO], []);
        let svg = render_svg(&d, (1, 1), &RenderOptions::default());
        assert_eq!(svg.matches("<circle").count(), 1);
        assert!(svg.contains("seed=1"));
    }

    #[test]
    fn svg_e1_has_labeled_disc() {
        let svg = render_svg(&reference_e1(), (1, 1), &RenderOptions::default());
        assert!(svg.contains("class=\"pre\""));
        assert!(svg.contains(">x</text>"));
        assert_eq!(svg.matches("class=\"pre\"").count(), 1);
    }

    #[test]
    fn svg_deterministic() {
        let d = reference_e1();
        let o = RenderOptions::default();
        assert_eq!(render_svg(&d, (2, 3), &o), render_svg(&d, (2, 3), &o));
    }
}
