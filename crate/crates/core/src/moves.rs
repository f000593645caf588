//! Move schemas: local rewriting rules on motif diagrams.
//!
//! Schemas are data, not code: each one is a pair of local fragments with a
//! shared ordered boundary, plus named admissibility predicates. The shipped
//! catalog covers the classical moves R1, R2, R3 and the precrossing moves
//! PR1, PR2, PR3, PR3'. A custom catalog can be supplied through the
//! `PDT_SCHEMA_CATALOG` environment variable; `validate_schema` certifies a
//! schema by checking that every joint resolution of both sides closes to
//! classically equivalent disc tangles.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagram::{
    ClassId, Dart, Decoration, DiagramError, Edge, Level, MotifDiagram, ShiftVector, VertexId,
};
use crate::invariants::normalized_bracket;

pub const CATALOG_FORMAT: &str = "motif-schemas/1";

/// Decoration pattern at a schema vertex, in pattern slot coordinates.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecPattern {
    /// Classical crossing whose over-strand parity is a shared variable
    /// (plus a fixed offset).
    ParityVar {
        var: String,
        #[serde(default)]
        offset: u8,
    },
    /// Classical crossing with a fixed over-strand parity.
    ParityConst { value: u8 },
    /// Precrossing whose class is a shared variable.
    ClassVar { var: String },
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FragVertex {
    pub name: String,
    pub dec: DecPattern,
}

/// Boundary leg of a fragment: either a vertex slot, or one end of a
/// crossing-free arc pairing two legs.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Leg {
    Slot { vertex: String, slot: u8 },
    Arc { partner: usize },
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fragment {
    #[serde(default)]
    pub vertices: Vec<FragVertex>,
    /// Internal edges as (vertex, slot, vertex, slot); shifts are implicitly
    /// zero after local regauge.
    #[serde(default)]
    pub edges: Vec<(String, u8, String, u8)>,
    /// Ordered boundary interface; index k corresponds to index k on the
    /// other side of the schema.
    pub legs: Vec<Leg>,
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predicate {
    /// Reject matches whose parity-variable assignment equals any listed map.
    NotParities { forbid: Vec<BTreeMap<String, u8>> },
    /// The bound class must contain exactly the one matched vertex.
    SingletonClass { var: String },
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schema {
    pub name: String,
    pub left: Fragment,
    pub right: Fragment,
    #[serde(default)]
    pub predicates: Vec<Predicate>,
}

impl Schema {
    /// Reducing or rearranging schemas match existing structure; creating
    /// schemas (vertex-free left side) need explicit sites.
    pub fn is_creating(&self) -> bool {
        self.left.vertices.is_empty()
    }
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Catalog {
    pub format: String,
    pub schemas: Vec<Schema>,
}

#[derive(Error, Clone, PartialEq, Eq, Debug)]
pub enum MoveError {
    #[error("StaleInstance: {0}")]
    Stale(String),
    #[error("UnknownSchema: {0}")]
    UnknownSchema(String),
    #[error("InvalidResult: {0}")]
    Invalid(#[from] DiagramError),
}

/// A matched occurrence of a schema, replayable with `apply_move`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct MoveInstance {
    pub schema: String,
    /// Pattern vertex name -> (diagram vertex, rotation). Pattern slot k sits
    /// at diagram slot (k + rotation) mod 4.
    pub vertices: BTreeMap<String, (VertexId, u8)>,
    /// For each arc of the left fragment in leg order: (edge index, flipped).
    /// The first leg of the arc sits at the edge tail unless flipped.
    pub arc_edges: Vec<(usize, bool)>,
    /// Parity variable assignment in pattern coordinates.
    pub parities: BTreeMap<String, u8>,
    /// Class variable bindings; unbound right-side variables get fresh
    /// classes at application time.
    pub classes: BTreeMap<String, ClassId>,
}

const BUILTIN_CATALOG: &str = include_str!("../data/schemas.json");

pub fn catalog_from_str(s: &str) -> Result<Catalog, String> {
    let c: Catalog = serde_json::from_str(s).map_err(|e| e.to_string())?;
    if c.format != CATALOG_FORMAT {
        return Err(format!("unsupported catalog format {:?}", c.format));
    }
    for s in &c.schemas {
        check_schema_shape(s)?;
    }
    Ok(c)
}

/// The shipped catalog, or the file named by `PDT_SCHEMA_CATALOG` if set.
pub fn load_catalog() -> Result<Catalog, String> {
    match std::env::var("PDT_SCHEMA_CATALOG") {
        Ok(path) => {
            let text = std::fs::read_to_string(&path)
                .map_err(|e| format!("cannot read {path}: {e}"))?;
            catalog_from_str(&text)
        }
        Err(_) => catalog_from_str(BUILTIN_CATALOG),
    }
}

/// The shipped catalog, parsed once. Ignores `PDT_SCHEMA_CATALOG`.
pub fn builtin_catalog() -> &'static Catalog {
    static CAT: OnceLock<Catalog> = OnceLock::new();
    CAT.get_or_init(|| catalog_from_str(BUILTIN_CATALOG).expect("shipped catalog parses"))
}

/// Structural sanity of a schema: matching leg interfaces, well-formed arcs,
/// exact slot coverage at every fragment vertex.
pub fn check_schema_shape(s: &Schema) -> Result<(), String> {
    if s.left.legs.len() != s.right.legs.len() {
        return Err(format!("{}: leg interfaces differ in length", s.name));
    }
    if s.left.legs.len() % 2 != 0 {
        return Err(format!("{}: odd number of legs", s.name));
    }
    for (side, frag) in [("left", &s.left), ("right", &s.right)] {
        let mut used: BTreeSet<(String, u8)> = BTreeSet::new();
        let names: BTreeSet<&str> = frag.vertices.iter().map(|v| v.name.as_str()).collect();
        if names.len() != frag.vertices.len() {
            return Err(format!("{}: duplicate vertex name on {side}", s.name));
        }
        let mut claim = |v: &str, sl: u8| -> Result<(), String> {
            if sl > 3 {
                return Err(format!("{}: slot {sl} out of range on {side}", s.name));
            }
            if !names.contains(v) {
                return Err(format!("{}: unknown vertex {v} on {side}", s.name));
            }
            if !used.insert((v.to_string(), sl)) {
                return Err(format!("{}: slot ({v},{sl}) reused on {side}", s.name));
            }
            Ok(())
        };
        for (a, sa, b, sb) in &frag.edges {
            claim(a, *sa)?;
            claim(b, *sb)?;
        }
        for (j, leg) in frag.legs.iter().enumerate() {
            match leg {
                Leg::Slot { vertex, slot } => claim(vertex, *slot)?,
                Leg::Arc { partner } => {
                    if *partner >= frag.legs.len() || *partner == j {
                        return Err(format!("{}: bad arc partner at leg {j} on {side}", s.name));
                    }
                    if frag.legs[*partner] != (Leg::Arc { partner: j }) {
                        return Err(format!("{}: asymmetric arc at leg {j} on {side}", s.name));
                    }
                }
            }
        }
        if used.len() != 4 * frag.vertices.len() {
            return Err(format!("{}: uncovered vertex slot on {side}", s.name));
        }
    }
    Ok(())
}

/// dart -> (edge index, dart is the tail end).
fn dart_table(d: &MotifDiagram) -> BTreeMap<Dart, (usize, bool)> {
    let mut t = BTreeMap::new();
    for (ei, e) in d.edges.iter().enumerate() {
        t.insert(e.tail.clone(), (ei, true));
        t.insert(e.head.clone(), (ei, false));
    }
    t
}

/// Verified embedding data for an instance.
struct Embedding {
    /// Gauge potential on matched vertices that zeroes the internal edges.
    delta: BTreeMap<VertexId, ShiftVector>,
    /// Diagram edge indices matched by internal pattern edges.
    internal: BTreeSet<usize>,
}

fn stale<T>(msg: impl Into<String>) -> Result<T, MoveError> {
    Err(MoveError::Stale(msg.into()))
}

/// Re-verify an instance against the current diagram and derive its
/// embedding. This is the `StaleInstance` gate.
fn check_instance(
    d: &MotifDiagram,
    schema: &Schema,
    inst: &MoveInstance,
) -> Result<Embedding, MoveError> {
    let darts = dart_table(d);
    let frag = &schema.left;
    if inst.vertices.len() != frag.vertices.len() {
        return stale("vertex assignment does not match the schema");
    }
    let mut seen_targets: BTreeSet<&VertexId> = BTreeSet::new();
    for fv in &frag.vertices {
        let Some((dv, r)) = inst.vertices.get(&fv.name) else {
            return stale(format!("no assignment for pattern vertex {}", fv.name));
        };
        if *r > 3 {
            return stale("rotation out of range");
        }
        if !seen_targets.insert(dv) {
            return stale("pattern embedding is not injective");
        }
        let Some(dec) = d.vertices.get(dv) else {
            return stale(format!("vertex {dv} no longer exists"));
        };
        match (&fv.dec, dec) {
            (DecPattern::ParityVar { var, offset }, _) => {
                let Some(q) = dec.over_parity() else {
                    return stale(format!("vertex {dv} is not classical"));
                };
                let Some(want) = inst.parities.get(var) else {
                    return stale(format!("parity variable {var} unbound"));
                };
                if (q + 4 - r) % 2 != (want + offset) % 2 {
                    return stale(format!("parity mismatch at {dv}"));
                }
            }
            (DecPattern::ParityConst { value }, _) => {
                let Some(q) = dec.over_parity() else {
                    return stale(format!("vertex {dv} is not classical"));
                };
                if (q + 4 - r) % 2 != value % 2 {
                    return stale(format!("parity mismatch at {dv}"));
                }
            }
            (DecPattern::ClassVar { var }, Decoration::Pre(c)) => {
                if inst.classes.get(var) != Some(c) {
                    return stale(format!("class mismatch at {dv}"));
                }
            }
            (DecPattern::ClassVar { .. }, _) => {
                return stale(format!("vertex {dv} is not a precrossing"));
            }
        }
    }
    // Internal edges: exist at the right slots, and their shifts admit a
    // potential on the matched vertices making every internal edge zero.
    let mut delta: BTreeMap<VertexId, ShiftVector> = BTreeMap::new();
    let mut internal: BTreeSet<usize> = BTreeSet::new();
    // Several passes so potentials propagate however the pattern edges are
    // ordered (patterns are small).
    let mut pending: Vec<&(String, u8, String, u8)> = frag.edges.iter().collect();
    if let Some(fv) = frag.vertices.first() {
        let (dv, _) = &inst.vertices[&fv.name];
        delta.insert(dv.clone(), ShiftVector::ZERO);
    }
    while !pending.is_empty() {
        let mut progressed = false;
        let mut rest = Vec::new();
        for pe in pending {
            let (a, sa, b, sb) = pe;
            let (dva, ra) = &inst.vertices[a];
            let (dvb, rb) = &inst.vertices[b];
            let da: Dart = (dva.clone(), (sa + ra) % 4);
            let db: Dart = (dvb.clone(), (sb + rb) % 4);
            let Some(&(ei, is_tail)) = darts.get(&da) else {
                return stale(format!("no edge at ({},{})", da.0, da.1));
            };
            let e = &d.edges[ei];
            let (other, s) = if is_tail {
                (&e.head, e.shift)
            } else {
                (&e.tail, -e.shift)
            };
            if *other != db {
                return stale(format!("edge at ({},{}) does not close the pattern", da.0, da.1));
            }
            internal.insert(ei);
            // Post-regauge shift s + delta(b) - delta(a) must be zero.
            match (delta.get(dva).copied(), delta.get(dvb).copied()) {
                (Some(pa), Some(pb)) => {
                    if s + pb - pa != ShiftVector::ZERO {
                        return stale("internal face carries a nonzero net shift");
                    }
                    progressed = true;
                }
                (Some(pa), None) => {
                    delta.insert(dvb.clone(), pa - s);
                    progressed = true;
                }
                (None, Some(pb)) => {
                    delta.insert(dva.clone(), pb + s);
                    progressed = true;
                }
                (None, None) => rest.push(pe),
            }
        }
        if !progressed && !rest.is_empty() {
            // Disconnected pattern piece: root it at zero.
            let (a, ..) = rest[0];
            let (dva, _) = &inst.vertices[a];
            delta.insert(dva.clone(), ShiftVector::ZERO);
        }
        pending = rest;
    }
    for fv in &frag.vertices {
        let (dv, _) = &inst.vertices[&fv.name];
        delta.entry(dv.clone()).or_insert(ShiftVector::ZERO);
    }
    // Arcs of the left side (creating schemas): chosen edges exist, are
    // distinct, and avoid the matched vertices.
    let arc_count = frag
        .legs
        .iter()
        .enumerate()
        .filter(|(j, l)| matches!(l, Leg::Arc { partner } if j < partner))
        .count();
    if inst.arc_edges.len() != arc_count {
        return stale("arc assignment does not match the schema");
    }
    let mut used_edges: BTreeSet<usize> = BTreeSet::new();
    for &(ei, _) in &inst.arc_edges {
        if ei >= d.edges.len() {
            return stale("arc edge index out of range");
        }
        if !used_edges.insert(ei) || internal.contains(&ei) {
            return stale("arc edges must be distinct");
        }
        let e = &d.edges[ei];
        if seen_targets.contains(&e.tail.0) || seen_targets.contains(&e.head.0) {
            return stale("arc edge touches a matched vertex");
        }
    }
    // Named admissibility predicates.
    for p in &schema.predicates {
        match p {
            Predicate::NotParities { forbid } => {
                for f in forbid {
                    if f.iter().all(|(var, val)| inst.parities.get(var) == Some(val)) {
                        return stale("forbidden parity pattern");
                    }
                }
            }
            Predicate::SingletonClass { var } => {
                let Some(c) = inst.classes.get(var) else {
                    return stale(format!("class variable {var} unbound"));
                };
                if d.classes.get(c).map(|m| m.len()) != Some(1) {
                    return stale(format!("class {c} is not a singleton"));
                }
            }
        }
    }
    // Right-side variables must be determined (or class-fresh).
    for fv in &schema.right.vertices {
        match &fv.dec {
            DecPattern::ParityVar { var, .. } => {
                if !inst.parities.contains_key(var) {
                    return stale(format!("parity variable {var} unbound"));
                }
            }
            DecPattern::ParityConst { .. } | DecPattern::ClassVar { .. } => {}
        }
    }
    Ok(Embedding { delta, internal })
}

/// All matches of a reducing schema's left side, deduplicated so that each
/// set of matched diagram edges yields one instance.
fn left_matches(d: &MotifDiagram, schema: &Schema) -> Vec<MoveInstance> {
    let frag = &schema.left;
    if frag.vertices.is_empty() {
        return Vec::new();
    }
    let darts = dart_table(d);
    // Pattern adjacency for forced propagation; patterns are connected.
    let order: Vec<&FragVertex> = frag.vertices.iter().collect();
    let mut found: BTreeMap<BTreeSet<usize>, MoveInstance> = BTreeMap::new();
    for root in d.vertices.keys() {
        'rot: for r0 in 0..4u8 {
            let mut vmap: BTreeMap<String, (VertexId, u8)> =
                BTreeMap::from([(order[0].name.clone(), (root.clone(), r0))]);
            // Propagate assignments along pattern edges until stable.
            loop {
                let mut grew = false;
                for (a, sa, b, sb) in &frag.edges {
                    let (known, ks, other, os) = if vmap.contains_key(a) && !vmap.contains_key(b) {
                        (a, *sa, b, *sb)
                    } else if vmap.contains_key(b) && !vmap.contains_key(a) {
                        (b, *sb, a, *sa)
                    } else {
                        continue;
                    };
                    let (dv, r) = vmap[known].clone();
                    let da: Dart = (dv, (ks + r) % 4);
                    let Some(&(ei, is_tail)) = darts.get(&da) else {
                        continue 'rot;
                    };
                    let e = &d.edges[ei];
                    let target = if is_tail { &e.head } else { &e.tail };
                    let ro = (target.1 + 4 - os % 4) % 4;
                    vmap.insert(other.clone(), (target.0.clone(), ro));
                    grew = true;
                }
                if !grew {
                    break;
                }
            }
            if vmap.len() != frag.vertices.len() {
                continue;
            }
            // Derive variable bindings.
            let mut parities: BTreeMap<String, u8> = BTreeMap::new();
            let mut classes: BTreeMap<String, ClassId> = BTreeMap::new();
            for fv in &frag.vertices {
                let (dv, r) = &vmap[&fv.name];
                let Some(dec) = d.vertices.get(dv) else {
                    continue 'rot;
                };
                match &fv.dec {
                    DecPattern::ParityVar { var, offset } => {
                        let Some(q) = dec.over_parity() else {
                            continue 'rot;
                        };
                        let val = (q + 4 - r + 2 - offset % 2) % 2;
                        if *parities.entry(var.clone()).or_insert(val) != val {
                            continue 'rot;
                        }
                    }
                    DecPattern::ParityConst { .. } => {}
                    DecPattern::ClassVar { var } => {
                        let Decoration::Pre(c) = dec else {
                            continue 'rot;
                        };
                        if classes.entry(var.clone()).or_insert_with(|| c.clone()) != c {
                            continue 'rot;
                        }
                    }
                }
            }
            let inst = MoveInstance {
                schema: schema.name.clone(),
                vertices: vmap,
                arc_edges: Vec::new(),
                parities,
                classes,
            };
            if let Ok(emb) = check_instance(d, schema, &inst) {
                let key = emb.internal;
                match found.get(&key) {
                    Some(prev) if *prev <= inst => {}
                    _ => {
                        found.insert(key, inst);
                    }
                }
            }
        }
    }
    found.into_values().collect()
}

/// All instances of reducing and rearranging schemas, in deterministic order:
/// schema name first, then the matched vertices.
pub fn find_moves(
    d: &MotifDiagram,
    catalog: &Catalog,
    kinds: Option<&BTreeSet<String>>,
) -> Vec<MoveInstance> {
    let mut out = Vec::new();
    for s in &catalog.schemas {
        if s.is_creating() {
            continue;
        }
        if let Some(ks) = kinds {
            if !ks.contains(&s.name) {
                continue;
            }
        }
        out.extend(left_matches(d, s));
    }
    out.sort();
    out
}

/// All placements of a creating schema: every choice of distinct target
/// edges with orientations, crossed with the right side's parity variables.
pub fn creating_instances(d: &MotifDiagram, schema: &Schema) -> Vec<MoveInstance> {
    if !schema.is_creating() {
        return Vec::new();
    }
    let arc_count = schema
        .left
        .legs
        .iter()
        .enumerate()
        .filter(|(j, l)| matches!(l, Leg::Arc { partner } if j < partner))
        .count();
    let mut pvars: BTreeSet<String> = BTreeSet::new();
    for fv in &schema.right.vertices {
        if let DecPattern::ParityVar { var, .. } = &fv.dec {
            pvars.insert(var.clone());
        }
    }
    let pvars: Vec<String> = pvars.into_iter().collect();
    // Ordered selections of distinct edges with a flip bit each.
    let mut selections: Vec<Vec<(usize, bool)>> = vec![Vec::new()];
    for _ in 0..arc_count {
        let mut next = Vec::new();
        for sel in &selections {
            for ei in 0..d.edges.len() {
                if sel.iter().any(|&(e, _)| e == ei) {
                    continue;
                }
                for flip in [false, true] {
                    let mut s = sel.clone();
                    s.push((ei, flip));
                    next.push(s);
                }
            }
        }
        selections = next;
    }
    let mut out = Vec::new();
    for sel in selections {
        for mask in 0..1u32 << pvars.len() {
            let parities: BTreeMap<String, u8> = pvars
                .iter()
                .enumerate()
                .map(|(i, v)| (v.clone(), (mask >> i & 1) as u8))
                .collect();
            out.push(MoveInstance {
                schema: schema.name.clone(),
                vertices: BTreeMap::new(),
                arc_edges: sel.clone(),
                parities,
                classes: BTreeMap::new(),
            });
        }
    }
    out.sort();
    out
}

/// One end of a strand chain while splicing boundary legs.
#[derive(Clone, PartialEq, Eq, Debug)]
enum End {
    Port(usize),
    Dart(Dart),
}

/// Resolve a system of leg links into concrete edges and free loops. Every
/// port occurs in exactly two links, every dart in one; the shift of a link
/// is as traversed from its first to its second end.
fn resolve_chains(
    links: &[(End, End, ShiftVector)],
) -> (Vec<Edge>, Vec<ShiftVector>) {
    let mut used = vec![false; links.len()];
    let port_links = |p: usize| -> Vec<usize> {
        links
            .iter()
            .enumerate()
            .filter(|(_, (a, b, _))| *a == End::Port(p) || *b == End::Port(p))
            .map(|(i, _)| i)
            .collect()
    };
    let mut edges = Vec::new();
    let mut loops = Vec::new();
    // Chains between dart terminals.
    for (li, link) in links.iter().enumerate() {
        for start_side in [0, 1] {
            if used[li] {
                continue;
            }
            let start = if start_side == 0 { &link.0 } else { &link.1 };
            let End::Dart(start_dart) = start else {
                continue;
            };
            let mut acc = ShiftVector::ZERO;
            let mut cur = li;
            let mut from_first = start_side == 0;
            loop {
                used[cur] = true;
                let (a, b, s) = &links[cur];
                let (next_end, ds) = if from_first { (b, *s) } else { (a, -*s) };
                acc = acc + ds;
                match next_end {
                    End::Dart(dd) => {
                        edges.push(Edge::new(start_dart.clone(), dd.clone(), acc));
                        break;
                    }
                    End::Port(p) => {
                        let nl = port_links(*p)
                            .into_iter()
                            .find(|&i| i != cur)
                            .expect("port has two links");
                        from_first = links[nl].0 == End::Port(*p);
                        cur = nl;
                    }
                }
            }
        }
    }
    // Remaining cycles are crossing-free loops.
    for li in 0..links.len() {
        if used[li] {
            continue;
        }
        let mut acc = ShiftVector::ZERO;
        let mut cur = li;
        let mut from_first = true;
        loop {
            used[cur] = true;
            let (a, b, s) = &links[cur];
            let (next_end, ds) = if from_first { (b, *s) } else { (a, -*s) };
            acc = acc + ds;
            let End::Port(p) = next_end else {
                unreachable!("cycle contains a dart terminal");
            };
            let nl = port_links(*p)
                .into_iter()
                .find(|&i| i != cur)
                .expect("port has two links");
            if nl == li && used[nl] {
                break;
            }
            from_first = links[nl].0 == End::Port(*p);
            cur = nl;
            if cur == li {
                break;
            }
        }
        loops.push(acc.canonical_sign());
    }
    (edges, loops)
}

fn fresh_names(prefix: &str, count: usize, taken: &BTreeSet<String>) -> Vec<String> {
    let mut out = Vec::new();
    let mut k = 1usize;
    while out.len() < count {
        let cand = format!("{prefix}{k}");
        if !taken.contains(&cand) {
            out.push(cand);
        }
        k += 1;
    }
    out
}

/// Apply a matched instance, returning the rewritten diagram. Fails with
/// `StaleInstance` if the diagram no longer matches the instance, and with
/// `InvalidResult` if the rewrite would leave the L1 validity class.
pub fn apply_move(
    d: &MotifDiagram,
    catalog: &Catalog,
    inst: &MoveInstance,
) -> Result<MotifDiagram, MoveError> {
    let schema = catalog
        .schemas
        .iter()
        .find(|s| s.name == inst.schema)
        .ok_or_else(|| MoveError::UnknownSchema(inst.schema.clone()))?;
    let emb = check_instance(d, schema, inst)?;
    // Local regauge zeroes the matched internal edges; edge indices may
    // change, so re-derive the embedding on the regauged diagram.
    let work = d.regauge(&emb.delta)?;
    let emb = check_instance(&work, schema, inst)?;
    let darts = dart_table(&work);

    let del_vertices: BTreeSet<VertexId> =
        inst.vertices.values().map(|(v, _)| v.clone()).collect();
    // Map from a left leg's diagram dart back to its leg index.
    let mut leg_of_dart: BTreeMap<Dart, usize> = BTreeMap::new();
    for (j, leg) in schema.left.legs.iter().enumerate() {
        if let Leg::Slot { vertex, slot } = leg {
            let (dv, r) = &inst.vertices[vertex];
            leg_of_dart.insert((dv.clone(), (slot + r) % 4), j);
        }
    }

    let mut links: Vec<(End, End, ShiftVector)> = Vec::new();
    let mut arc_deleted: BTreeSet<usize> = BTreeSet::new();
    // Old-side links from the left fragment.
    let mut arc_idx = 0usize;
    for (j, leg) in schema.left.legs.iter().enumerate() {
        match leg {
            Leg::Slot { vertex, slot } => {
                let (dv, r) = &inst.vertices[vertex];
                let dj: Dart = (dv.clone(), (slot + r) % 4);
                let &(ei, is_tail) = darts.get(&dj).expect("checked");
                let e = &work.edges[ei];
                let (other, s) = if is_tail {
                    (e.head.clone(), e.shift)
                } else {
                    (e.tail.clone(), -e.shift)
                };
                match leg_of_dart.get(&other) {
                    Some(&k) if k != j => {
                        if j < k {
                            links.push((End::Port(j), End::Port(k), s));
                        }
                    }
                    Some(_) => unreachable!("an edge cannot join a dart to itself"),
                    None => links.push((End::Port(j), End::Dart(other), s)),
                }
            }
            Leg::Arc { partner } => {
                if j < *partner {
                    let (ei, flip) = inst.arc_edges[arc_idx];
                    arc_idx += 1;
                    arc_deleted.insert(ei);
                    let e = &work.edges[ei];
                    let (x, y, s) = if !flip {
                        (e.tail.clone(), e.head.clone(), e.shift)
                    } else {
                        (e.head.clone(), e.tail.clone(), -e.shift)
                    };
                    // The whole shift rides on the first-leg half.
                    links.push((End::Port(j), End::Dart(x), -s));
                    links.push((End::Port(*partner), End::Dart(y), ShiftVector::ZERO));
                }
            }
        }
    }

    // Fresh material for the right fragment.
    let taken: BTreeSet<String> = work.vertices.keys().cloned().collect();
    let names = fresh_names("m", schema.right.vertices.len(), &taken);
    let new_id: BTreeMap<&str, &String> = schema
        .right
        .vertices
        .iter()
        .zip(names.iter())
        .map(|(fv, n)| (fv.name.as_str(), n))
        .collect();
    let taken_classes: BTreeSet<String> = work.classes.keys().cloned().collect();
    let mut fresh_class_pool =
        fresh_names("c", schema.right.vertices.len(), &taken_classes).into_iter();
    let mut fresh_classes: BTreeMap<&str, ClassId> = BTreeMap::new();

    let mut new_vertices: Vec<(VertexId, Decoration)> = Vec::new();
    let mut class_joins: Vec<(ClassId, VertexId)> = Vec::new();
    for fv in &schema.right.vertices {
        let id = new_id[fv.name.as_str()].clone();
        let dec = match &fv.dec {
            DecPattern::ParityVar { var, offset } => {
                Decoration::from_parity((inst.parities[var] + offset) % 2)
            }
            DecPattern::ParityConst { value } => Decoration::from_parity(*value),
            DecPattern::ClassVar { var } => {
                let cls = match inst.classes.get(var) {
                    Some(c) => c.clone(),
                    None => fresh_classes
                        .entry(var.as_str())
                        .or_insert_with(|| fresh_class_pool.next().expect("pool sized"))
                        .clone(),
                };
                class_joins.push((cls.clone(), id.clone()));
                Decoration::Pre(cls)
            }
        };
        new_vertices.push((id, dec));
    }
    let mut new_edges: Vec<Edge> = schema
        .right
        .edges
        .iter()
        .map(|(a, sa, b, sb)| {
            Edge::new(
                (new_id[a.as_str()].clone(), *sa),
                (new_id[b.as_str()].clone(), *sb),
                ShiftVector::ZERO,
            )
        })
        .collect();
    // New-side links.
    for (j, leg) in schema.right.legs.iter().enumerate() {
        match leg {
            Leg::Slot { vertex, slot } => links.push((
                End::Port(j),
                End::Dart((new_id[vertex.as_str()].clone(), *slot)),
                ShiftVector::ZERO,
            )),
            Leg::Arc { partner } => {
                if j < *partner {
                    links.push((End::Port(j), End::Port(*partner), ShiftVector::ZERO));
                }
            }
        }
    }
    let (chain_edges, chain_loops) = resolve_chains(&links);

    // Assemble the rewritten diagram.
    let mut out = MotifDiagram::default();
    for (v, dec) in &work.vertices {
        if !del_vertices.contains(v) {
            out.vertices.insert(v.clone(), dec.clone());
        }
    }
    out.vertices.extend(new_vertices);
    for (ei, e) in work.edges.iter().enumerate() {
        if arc_deleted.contains(&ei)
            || emb.internal.contains(&ei)
            || del_vertices.contains(&e.tail.0)
            || del_vertices.contains(&e.head.0)
        {
            continue;
        }
        out.edges.push(e.clone());
    }
    out.edges.extend(new_edges.drain(..));
    out.edges.extend(chain_edges);
    out.free_loops = work.free_loops.clone();
    out.free_loops.extend(chain_loops);
    for (c, members) in &work.classes {
        let kept: BTreeSet<VertexId> = members
            .iter()
            .filter(|v| !del_vertices.contains(*v))
            .cloned()
            .collect();
        out.classes.insert(c.clone(), kept);
    }
    for (c, v) in class_joins {
        out.classes.entry(c).or_default().insert(v);
    }
    for (v, pos) in &work.layout {
        if !del_vertices.contains(v) {
            out.layout.insert(v.clone(), *pos);
        }
    }
    out.normalize();
    out.require(Level::L1)?;
    Ok(out)
}

/// Outcome of certifying a schema.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum SchemaCheck {
    Pass,
    Fail { reason: String },
}

impl SchemaCheck {
    pub fn is_pass(&self) -> bool {
        matches!(self, SchemaCheck::Pass)
    }
}

/// Close one fragment into a planar diagram under a joint resolution of its
/// variables and a pairing of the boundary legs.
fn close_fragment(
    frag: &Fragment,
    parities: &BTreeMap<String, u8>,
    pairing: &[(usize, usize)],
) -> MotifDiagram {
    let vertices: Vec<(VertexId, Decoration)> = frag
        .vertices
        .iter()
        .map(|fv| {
            let p = match &fv.dec {
                DecPattern::ParityVar { var, offset } => (parities[var] + offset) % 2,
                DecPattern::ParityConst { value } => value % 2,
                DecPattern::ClassVar { var } => parities[var] % 2,
            };
            (fv.name.clone(), Decoration::from_parity(p))
        })
        .collect();
    let edges: Vec<Edge> = frag
        .edges
        .iter()
        .map(|(a, sa, b, sb)| {
            Edge::new((a.clone(), *sa), (b.clone(), *sb), ShiftVector::ZERO)
        })
        .collect();
    let mut links: Vec<(End, End, ShiftVector)> = Vec::new();
    for (j, leg) in frag.legs.iter().enumerate() {
        match leg {
            Leg::Slot { vertex, slot } => {
                links.push((End::Port(j), End::Dart((vertex.clone(), *slot)), ShiftVector::ZERO))
            }
            Leg::Arc { partner } => {
                if j < *partner {
                    links.push((End::Port(j), End::Port(*partner), ShiftVector::ZERO));
                }
            }
        }
    }
    for &(i, j) in pairing {
        links.push((End::Port(i), End::Port(j), ShiftVector::ZERO));
    }
    let (chain_edges, chain_loops) = resolve_chains(&links);
    MotifDiagram::new(
        vertices,
        edges.into_iter().chain(chain_edges),
        chain_loops,
        [],
    )
}

/// Certify a schema: under every joint resolution of its variables and both
/// standard plat closures of the shared boundary, the two sides must close
/// to classically equivalent diagrams (equal strand counts and equal
/// normalized bracket).
pub fn validate_schema(schema: &Schema) -> SchemaCheck {
    if let Err(reason) = check_schema_shape(schema) {
        return SchemaCheck::Fail { reason };
    }
    let mut vars: BTreeSet<String> = BTreeSet::new();
    let mut class_vars: BTreeSet<String> = BTreeSet::new();
    for frag in [&schema.left, &schema.right] {
        for fv in &frag.vertices {
            match &fv.dec {
                DecPattern::ParityVar { var, .. } => {
                    vars.insert(var.clone());
                }
                DecPattern::ClassVar { var } => {
                    vars.insert(var.clone());
                    class_vars.insert(var.clone());
                }
                DecPattern::ParityConst { .. } => {}
            }
        }
    }
    if class_vars.len() > 3 {
        return SchemaCheck::Fail {
            reason: format!("{}: more than 3 class variables", schema.name),
        };
    }
    let vars: Vec<String> = vars.into_iter().collect();
    let n = schema.left.legs.len();
    let mut pairings: Vec<Vec<(usize, usize)>> = Vec::new();
    if n == 0 {
        pairings.push(Vec::new());
    } else {
        pairings.push((0..n / 2).map(|i| (2 * i, 2 * i + 1)).collect());
        pairings.push(
            (0..n / 2)
                .map(|i| ((2 * i + 1) % n, (2 * i + 2) % n))
                .collect(),
        );
    }
    for mask in 0..1u32 << vars.len() {
        let assign: BTreeMap<String, u8> = vars
            .iter()
            .enumerate()
            .map(|(i, v)| (v.clone(), (mask >> i & 1) as u8))
            .collect();
        // Assignments excluded by an admissibility predicate never fire.
        let forbidden = schema.predicates.iter().any(|p| match p {
            Predicate::NotParities { forbid } => forbid
                .iter()
                .any(|f| f.iter().all(|(var, val)| assign.get(var) == Some(val))),
            Predicate::SingletonClass { .. } => false,
        });
        if forbidden {
            continue;
        }
        for pairing in &pairings {
            let dl = close_fragment(&schema.left, &assign, pairing);
            let dr = close_fragment(&schema.right, &assign, pairing);
            for (side, c) in [("left", &dl), ("right", &dr)] {
                if let Err(e) = c.require(Level::L1) {
                    return SchemaCheck::Fail {
                        reason: format!(
                            "{}: {side} closure invalid under {assign:?}: {e}",
                            schema.name
                        ),
                    };
                }
            }
            let nl = dl.trace_components().len();
            let nr = dr.trace_components().len();
            let bl = normalized_bracket(&dl);
            let br = normalized_bracket(&dr);
            let ok = match (&bl, &br) {
                (Ok(a), Ok(b)) => nl == nr && a == b,
                _ => false,
            };
            if !ok {
                return SchemaCheck::Fail {
                    reason: format!(
                        "{}: closures disagree under {assign:?} with pairing {pairing:?}: \
                         left has {nl} components, bracket {}; right has {nr}, bracket {}",
                        schema.name,
                        bl.map(|b| b.to_string()).unwrap_or_else(|e| e.to_string()),
                        br.map(|b| b.to_string()).unwrap_or_else(|e| e.to_string()),
                    ),
                };
            }
        }
    }
    SchemaCheck::Pass
}
