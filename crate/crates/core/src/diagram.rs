//! Motif diagrams: decorated 4-valent combinatorial maps on the torus with
//! integer shift vectors on edges.
//!
//! A `MotifDiagram` is the quotient graph of a doubly periodic diagram by its
//! supporting lattice. Edges carry a shift vector recording which translate of
//! the fundamental domain the edge enters; faces and component classes are
//! read off the rotation system together with those shifts.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Integer vector in the lattice basis. `a` counts steps in the longitude
/// direction, `b` in the meridian direction.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ShiftVector {
    pub a: i64,
    pub b: i64,
}

impl ShiftVector {
    pub const ZERO: ShiftVector = ShiftVector { a: 0, b: 0 };

    pub fn new(a: i64, b: i64) -> Self {
        ShiftVector { a, b }
    }

    pub fn is_zero(&self) -> bool {
        self.a == 0 && self.b == 0
    }

    /// gcd of |a| and |b|; 0 for the zero vector.
    pub fn content(&self) -> i64 {
        gcd(self.a.abs(), self.b.abs())
    }

    pub fn is_primitive(&self) -> bool {
        self.content() == 1
    }

    /// Sign-canonical representative of {v, -v}: first nonzero coordinate
    /// positive. Used wherever classes are reported up to sign.
    pub fn canonical_sign(&self) -> ShiftVector {
        if self.a < 0 || (self.a == 0 && self.b < 0) {
            -*self
        } else {
            *self
        }
    }

    pub fn norm2(&self) -> i64 {
        self.a * self.a + self.b * self.b
    }
}

pub fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

impl std::ops::Add for ShiftVector {
    type Output = ShiftVector;
    fn add(self, o: ShiftVector) -> ShiftVector {
        ShiftVector::new(self.a + o.a, self.b + o.b)
    }
}

impl std::ops::Sub for ShiftVector {
    type Output = ShiftVector;
    fn sub(self, o: ShiftVector) -> ShiftVector {
        ShiftVector::new(self.a - o.a, self.b - o.b)
    }
}

impl std::ops::Neg for ShiftVector {
    type Output = ShiftVector;
    fn neg(self) -> ShiftVector {
        ShiftVector::new(-self.a, -self.b)
    }
}

impl std::ops::Mul<ShiftVector> for i64 {
    type Output = ShiftVector;
    fn mul(self, v: ShiftVector) -> ShiftVector {
        ShiftVector::new(self * v.a, self * v.b)
    }
}

impl fmt::Debug for ShiftVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{}]", self.a, self.b)
    }
}

impl fmt::Display for ShiftVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{}]", self.a, self.b)
    }
}

pub type VertexId = String;
pub type ClassId = String;

/// Crossing information at a 4-valent vertex. Slots are numbered 0..3 in
/// counterclockwise rotation order; the strand pairs are (0,2) and (1,3).
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub enum Decoration {
    /// Strand through slots 0-2 passes over.
    OverEven,
    /// Strand through slots 1-3 passes over.
    OverOdd,
    /// Undetermined crossing in the named homologous class.
    Pre(ClassId),
}

impl Decoration {
    pub fn is_classical(&self) -> bool {
        !matches!(self, Decoration::Pre(_))
    }

    /// Over-strand slot parity for classical decorations.
    pub fn over_parity(&self) -> Option<u8> {
        match self {
            Decoration::OverEven => Some(0),
            Decoration::OverOdd => Some(1),
            Decoration::Pre(_) => None,
        }
    }

    pub fn from_parity(p: u8) -> Decoration {
        if p % 2 == 0 {
            Decoration::OverEven
        } else {
            Decoration::OverOdd
        }
    }

    /// Decoration after relabeling slots by a cyclic rotation of `r`.
    pub fn rotated(&self, r: u8) -> Decoration {
        match self {
            Decoration::Pre(c) => Decoration::Pre(c.clone()),
            Decoration::OverEven | Decoration::OverOdd => {
                Decoration::from_parity((self.over_parity().unwrap() + r) % 2)
            }
        }
    }
}

/// A dart: one end of an edge, at a vertex slot.
pub type Dart = (VertexId, u8);

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct Edge {
    pub tail: Dart,
    pub head: Dart,
    pub shift: ShiftVector,
}

impl Edge {
    pub fn new(tail: Dart, head: Dart, shift: ShiftVector) -> Edge {
        Edge { tail, head, shift }
    }

    pub fn reversed(&self) -> Edge {
        Edge {
            tail: self.head.clone(),
            head: self.tail.clone(),
            shift: -self.shift,
        }
    }

    /// Canonical orientation: tail dart lexicographically <= head dart.
    pub fn normalized(&self) -> Edge {
        if self.head < self.tail {
            self.reversed()
        } else {
            self.clone()
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
pub struct MotifDiagram {
    /// Vertex id -> decoration, sorted by id.
    pub vertices: BTreeMap<VertexId, Decoration>,
    /// Canonically oriented, sorted edge list. A perfect matching on slots.
    pub edges: Vec<Edge>,
    /// Multiset of crossing-free component classes (sign-canonical, sorted).
    pub free_loops: Vec<ShiftVector>,
    /// Class id -> member precrossing vertices.
    pub classes: BTreeMap<ClassId, BTreeSet<VertexId>>,
    /// Optional 2D layout hints for rendering only, in thousandths of the
    /// unit square (fixed precision keeps serialization byte-deterministic).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub layout: BTreeMap<VertexId, (i32, i32)>,
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub enum Level {
    L0,
    L1,
    L2,
}

#[derive(Error, Clone, PartialEq, Eq, Debug)]
pub enum DiagramError {
    #[error("SlotReuse: slot ({0}, {1}) appears in more than one edge")]
    SlotReuse(VertexId, u8),
    #[error("DanglingSlot: slot ({0}, {1}) is not an endpoint of any edge")]
    DanglingSlot(VertexId, u8),
    #[error("UnknownVertex: {0}")]
    UnknownVertex(VertexId),
    #[error("UnknownClass: {0}")]
    UnknownClass(ClassId),
    #[error("MissingClass: no assignment for class {0}")]
    MissingClass(ClassId),
    #[error("ClassMismatch: vertex {0} and class table disagree")]
    ClassMismatch(VertexId),
    #[error("NonPrimitiveFreeLoop: {0}")]
    NonPrimitiveFreeLoop(ShiftVector),
    #[error("NonDiscFace: {0}")]
    NonDiscFace(String),
    #[error("ShiftRankViolation: {0}")]
    ShiftRankViolation(String),
}

/// One face of the rotation system: corner darts in walk order, and the net
/// shift accumulated along the boundary walk.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Face {
    /// Corner darts (vertex, arrival slot) in walk order.
    pub corners: Vec<Dart>,
    pub net_shift: ShiftVector,
    pub component: usize,
}

impl Face {
    pub fn degree(&self) -> usize {
        self.corners.len()
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ComponentTopology {
    pub vertices: usize,
    pub edges: usize,
    pub faces: usize,
    pub euler: i64,
    /// Rank over Z of the image of cycle net shifts (0, 1 or 2).
    pub shift_rank: u8,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ValidationReport {
    pub requested: Level,
    pub reached: Option<Level>,
    pub faces: Vec<Face>,
    pub components: Vec<ComponentTopology>,
    pub errors: Vec<DiagramError>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.errors.is_empty()
    }
}

/// One traced component: either a strand walk through crossings or a free
/// loop; `class` is reported up to sign.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Component {
    /// Ordered walk of (edge index, forward?) traversals.
    Strand { walk: Vec<(usize, bool)>, class: ShiftVector },
    FreeLoop { class: ShiftVector },
}

impl Component {
    pub fn class(&self) -> ShiftVector {
        match self {
            Component::Strand { class, .. } | Component::FreeLoop { class } => *class,
        }
    }
}

impl MotifDiagram {
    pub fn new(
        vertices: impl IntoIterator<Item = (VertexId, Decoration)>,
        edges: impl IntoIterator<Item = Edge>,
        free_loops: impl IntoIterator<Item = ShiftVector>,
        classes: impl IntoIterator<Item = (ClassId, BTreeSet<VertexId>)>,
    ) -> MotifDiagram {
        let mut d = MotifDiagram {
            vertices: vertices.into_iter().collect(),
            edges: edges.into_iter().collect(),
            free_loops: free_loops.into_iter().collect(),
            classes: classes.into_iter().collect(),
            layout: BTreeMap::new(),
        };
        d.normalize();
        d
    }

    pub fn empty() -> MotifDiagram {
        MotifDiagram::default()
    }

    /// Canonical internal form: edges canonically oriented and sorted, free
    /// loops sign-canonical and sorted, empty classes pruned.
    pub fn normalize(&mut self) {
        self.edges = self.edges.iter().map(Edge::normalized).collect();
        self.edges.sort();
        for l in &mut self.free_loops {
            *l = l.canonical_sign();
        }
        self.free_loops.sort();
        self.classes.retain(|_, m| !m.is_empty());
    }

    pub fn crossing_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn precrossing_vertices(&self) -> impl Iterator<Item = (&VertexId, &ClassId)> {
        self.vertices.iter().filter_map(|(v, d)| match d {
            Decoration::Pre(c) => Some((v, c)),
            _ => None,
        })
    }

    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    pub fn is_resolved(&self) -> bool {
        self.vertices.values().all(Decoration::is_classical)
    }

    /// L0 structural check: slot perfect matching, class table consistency,
    /// free loop primitivity.
    pub fn check_l0(&self) -> Vec<DiagramError> {
        let mut errors = Vec::new();
        let mut seen: BTreeMap<(&str, u8), usize> = BTreeMap::new();
        for e in &self.edges {
            for d in [&e.tail, &e.head] {
                if !self.vertices.contains_key(&d.0) {
                    errors.push(DiagramError::UnknownVertex(d.0.clone()));
                    continue;
                }
                *seen.entry((d.0.as_str(), d.1)).or_insert(0) += 1;
            }
            if e.tail.1 > 3 || e.head.1 > 3 {
                errors.push(DiagramError::DanglingSlot(e.tail.0.clone(), e.tail.1.max(e.head.1)));
            }
        }
        for (v, _) in &self.vertices {
            for s in 0..4u8 {
                match seen.get(&(v.as_str(), s)) {
                    None => errors.push(DiagramError::DanglingSlot(v.clone(), s)),
                    Some(1) => {}
                    Some(_) => errors.push(DiagramError::SlotReuse(v.clone(), s)),
                }
            }
        }
        // class table partitions the precrossing vertices
        let mut in_class: BTreeMap<&VertexId, &ClassId> = BTreeMap::new();
        for (c, members) in &self.classes {
            for m in members {
                if in_class.insert(m, c).is_some() {
                    errors.push(DiagramError::ClassMismatch(m.clone()));
                }
            }
        }
        for (v, dec) in &self.vertices {
            match dec {
                Decoration::Pre(c) => {
                    if !self.classes.contains_key(c) {
                        errors.push(DiagramError::UnknownClass(c.clone()));
                    } else if in_class.get(v) != Some(&c) {
                        errors.push(DiagramError::ClassMismatch(v.clone()));
                    }
                }
                _ => {
                    if in_class.contains_key(v) {
                        errors.push(DiagramError::ClassMismatch(v.clone()));
                    }
                }
            }
        }
        for (c, members) in &self.classes {
            for m in members {
                if !self.vertices.contains_key(m) {
                    errors.push(DiagramError::UnknownClass(c.clone()));
                }
            }
        }
        for l in &self.free_loops {
            if !l.is_zero() && !l.is_primitive() {
                errors.push(DiagramError::NonPrimitiveFreeLoop(*l));
            }
        }
        errors.sort_by_key(|e| format!("{e}"));
        errors.dedup();
        errors
    }

    pub fn validate(&self, level: Level) -> ValidationReport {
        let mut errors = self.check_l0();
        if !errors.is_empty() || level == Level::L0 {
            let reached = if errors.is_empty() { Some(Level::L0) } else { None };
            return ValidationReport {
                requested: level,
                reached,
                faces: Vec::new(),
                components: Vec::new(),
                errors,
            };
        }
        let idx = Indexed::build(self);
        let faces = idx.faces();
        let comps = idx.component_topology(&faces);
        for (ci, c) in comps.iter().enumerate() {
            if c.euler == 0 {
                for f in faces.iter().filter(|f| f.component == ci) {
                    if !f.net_shift.is_zero() {
                        errors.push(DiagramError::NonDiscFace(format!(
                            "face at ({},{}) has net shift {}",
                            f.corners[0].0, f.corners[0].1, f.net_shift
                        )));
                    }
                }
            } else if c.euler < 0 {
                errors.push(DiagramError::NonDiscFace(format!(
                    "component with Euler characteristic {} cannot embed in the torus",
                    c.euler
                )));
            }
        }
        let l1_ok = errors.is_empty();
        if level == Level::L2 && l1_ok {
            for c in &comps {
                if c.euler == 2 && c.shift_rank > 1 {
                    errors.push(DiagramError::ShiftRankViolation(format!(
                        "genus-0 component has cycle shift rank {}",
                        c.shift_rank
                    )));
                }
            }
        }
        let reached = if errors.is_empty() {
            Some(level)
        } else if l1_ok {
            Some(Level::L1)
        } else {
            Some(Level::L0)
        };
        ValidationReport {
            requested: level,
            reached,
            faces,
            components: comps,
            errors,
        }
    }

    pub fn require(&self, level: Level) -> Result<(), DiagramError> {
        let r = self.validate(level);
        match r.errors.into_iter().next() {
            None => Ok(()),
            Some(e) => Err(e),
        }
    }

    /// Strand components plus free loops, with classes up to sign.
    pub fn trace_components(&self) -> Vec<Component> {
        let idx = Indexed::build(self);
        let mut out = idx.strand_components();
        for l in &self.free_loops {
            out.push(Component::FreeLoop { class: *l });
        }
        out
    }

    /// Sorted multiset of component classes (sign-canonical).
    pub fn component_classes(&self) -> Vec<ShiftVector> {
        let mut cs: Vec<ShiftVector> =
            self.trace_components().iter().map(|c| c.class()).collect();
        cs.sort();
        cs
    }

    /// Gauge transformation: edge shift becomes shift + potential(head) -
    /// potential(tail). Vertices absent from the map get potential zero.
    pub fn regauge(
        &self,
        potential: &BTreeMap<VertexId, ShiftVector>,
    ) -> Result<MotifDiagram, DiagramError> {
        for v in potential.keys() {
            if !self.vertices.contains_key(v) {
                return Err(DiagramError::UnknownVertex(v.clone()));
            }
        }
        let get = |v: &VertexId| potential.get(v).copied().unwrap_or(ShiftVector::ZERO);
        let mut d = self.clone();
        d.edges = self
            .edges
            .iter()
            .map(|e| Edge {
                tail: e.tail.clone(),
                head: e.head.clone(),
                shift: e.shift + get(&e.head.0) - get(&e.tail.0),
            })
            .collect();
        d.normalize();
        Ok(d)
    }

    /// Deterministic gauge normal form: spanning-forest edges get shift zero,
    /// rooted at the smallest vertex id of each component.
    pub fn canonical_regauge(&self) -> MotifDiagram {
        let idx = Indexed::build(self);
        let mut potential: Vec<Option<ShiftVector>> = vec![None; idx.n];
        for root in 0..idx.n {
            if potential[root].is_some() {
                continue;
            }
            potential[root] = Some(ShiftVector::ZERO);
            let mut queue = VecDeque::from([root]);
            while let Some(v) = queue.pop_front() {
                let pv = potential[v].unwrap();
                for s in 0..4u8 {
                    if let Some((ei, fwd)) = idx.dart_edge[v * 4 + s as usize] {
                        let e = &idx.edges[ei];
                        let (w, shift) = if fwd {
                            (e.head_v, e.shift)
                        } else {
                            (e.tail_v, -e.shift)
                        };
                        if potential[w].is_none() {
                            // tree edge becomes shift 0: shift + p(w) - p(v) = 0
                            potential[w] = Some(pv - shift);
                            queue.push_back(w);
                        }
                    }
                }
            }
        }
        let map: BTreeMap<VertexId, ShiftVector> = idx
            .ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), potential[i].unwrap()))
            .collect();
        self.regauge(&map).expect("potential covers all vertices")
    }

    /// Replace every precrossing by the assigned classical decoration; the
    /// class table becomes empty.
    pub fn resolve(
        &self,
        assignment: &BTreeMap<ClassId, Decoration>,
    ) -> Result<MotifDiagram, DiagramError> {
        for c in assignment.keys() {
            if !self.classes.contains_key(c) {
                return Err(DiagramError::UnknownClass(c.clone()));
            }
        }
        for c in self.classes.keys() {
            match assignment.get(c) {
                None => return Err(DiagramError::MissingClass(c.clone())),
                Some(Decoration::Pre(_)) => return Err(DiagramError::UnknownClass(c.clone())),
                Some(_) => {}
            }
        }
        let mut d = self.clone();
        for (_, dec) in d.vertices.iter_mut() {
            if let Decoration::Pre(c) = dec {
                *dec = assignment[c.as_str()].clone();
            }
        }
        d.classes.clear();
        d.normalize();
        Ok(d)
    }
}

/// Index-based view of a diagram used by the traversal algorithms.
pub struct Indexed {
    pub n: usize,
    pub ids: Vec<VertexId>,
    pub decorations: Vec<Decoration>,
    pub edges: Vec<IndexedEdge>,
    /// dart (v*4+slot) -> (edge index, dart is the tail end?)
    pub dart_edge: Vec<Option<(usize, bool)>>,
}

#[derive(Clone, Copy, Debug)]
pub struct IndexedEdge {
    pub tail_v: usize,
    pub tail_s: u8,
    pub head_v: usize,
    pub head_s: u8,
    pub shift: ShiftVector,
}

impl Indexed {
    /// Requires L0 validity (slot perfect matching); panics otherwise.
    pub fn build(d: &MotifDiagram) -> Indexed {
        let ids: Vec<VertexId> = d.vertices.keys().cloned().collect();
        let pos: HashMap<&str, usize> =
            ids.iter().enumerate().map(|(i, v)| (v.as_str(), i)).collect();
        let decorations = d.vertices.values().cloned().collect();
        let mut edges = Vec::with_capacity(d.edges.len());
        let mut dart_edge = vec![None; ids.len() * 4];
        for (ei, e) in d.edges.iter().enumerate() {
            let tv = pos[e.tail.0.as_str()];
            let hv = pos[e.head.0.as_str()];
            let ie = IndexedEdge {
                tail_v: tv,
                tail_s: e.tail.1,
                head_v: hv,
                head_s: e.head.1,
                shift: e.shift,
            };
            assert!(
                dart_edge[tv * 4 + e.tail.1 as usize].is_none(),
                "slot reuse; validate L0 first"
            );
            dart_edge[tv * 4 + e.tail.1 as usize] = Some((ei, true));
            assert!(
                dart_edge[hv * 4 + e.head.1 as usize].is_none(),
                "slot reuse; validate L0 first"
            );
            dart_edge[hv * 4 + e.head.1 as usize] = Some((ei, false));
            edges.push(ie);
        }
        Indexed {
            n: ids.len(),
            ids,
            decorations,
            edges,
            dart_edge,
        }
    }

    pub fn dart(&self, v: usize, s: u8) -> usize {
        v * 4 + s as usize
    }

    /// The other end of the edge at a dart, with the shift as traversed.
    pub fn across(&self, dart: usize) -> (usize, ShiftVector) {
        let (ei, is_tail) = self.dart_edge[dart].expect("dangling slot");
        let e = &self.edges[ei];
        if is_tail {
            (self.dart(e.head_v, e.head_s), e.shift)
        } else {
            (self.dart(e.tail_v, e.tail_s), -e.shift)
        }
    }

    /// Faces of the rotation system. The walk from corner dart d traverses
    /// the edge at d, then turns to the next slot counterclockwise.
    pub fn faces(&self) -> Vec<Face> {
        let comp = self.vertex_components();
        let mut seen = vec![false; self.n * 4];
        let mut out = Vec::new();
        for start in 0..self.n * 4 {
            if seen[start] || self.dart_edge[start].is_none() {
                continue;
            }
            let mut corners = Vec::new();
            let mut net = ShiftVector::ZERO;
            let mut d = start;
            loop {
                seen[d] = true;
                corners.push((self.ids[d / 4].clone(), (d % 4) as u8));
                let (other, shift) = self.across(d);
                net = net + shift;
                let v = other / 4;
                let s = (other % 4 + 1) % 4;
                d = v * 4 + s;
                if d == start {
                    break;
                }
            }
            out.push(Face {
                corners,
                net_shift: net,
                component: comp[start / 4],
            });
        }
        out
    }

    /// Connected component index per vertex (by edges), in discovery order of
    /// the sorted vertex ids.
    pub fn vertex_components(&self) -> Vec<usize> {
        let mut comp = vec![usize::MAX; self.n];
        let mut next = 0;
        for root in 0..self.n {
            if comp[root] != usize::MAX {
                continue;
            }
            comp[root] = next;
            let mut queue = VecDeque::from([root]);
            while let Some(v) = queue.pop_front() {
                for s in 0..4u8 {
                    if self.dart_edge[self.dart(v, s)].is_some() {
                        let (other, _) = self.across(self.dart(v, s));
                        let w = other / 4;
                        if comp[w] == usize::MAX {
                            comp[w] = next;
                            queue.push_back(w);
                        }
                    }
                }
            }
            next += 1;
        }
        comp
    }

    pub fn component_topology(&self, faces: &[Face]) -> Vec<ComponentTopology> {
        let comp = self.vertex_components();
        let ncomp = comp.iter().copied().max().map_or(0, |m| m + 1);
        let mut vs = vec![0usize; ncomp];
        let mut es = vec![0usize; ncomp];
        let mut fs = vec![0usize; ncomp];
        for v in 0..self.n {
            vs[comp[v]] += 1;
        }
        for e in &self.edges {
            es[comp[e.tail_v]] += 1;
        }
        for f in faces {
            fs[f.component] += 1;
        }
        let ranks = self.cycle_shift_ranks(&comp, ncomp);
        (0..ncomp)
            .map(|c| ComponentTopology {
                vertices: vs[c],
                edges: es[c],
                faces: fs[c],
                euler: vs[c] as i64 - es[c] as i64 + fs[c] as i64,
                shift_rank: ranks[c],
            })
            .collect()
    }

    /// Rank of the lattice generated by fundamental-cycle net shifts, per
    /// component, via a spanning tree potential.
    fn cycle_shift_ranks(&self, comp: &[usize], ncomp: usize) -> Vec<u8> {
        let mut potential: Vec<Option<ShiftVector>> = vec![None; self.n];
        let mut gens: Vec<Vec<ShiftVector>> = vec![Vec::new(); ncomp];
        for root in 0..self.n {
            if potential[root].is_some() {
                continue;
            }
            potential[root] = Some(ShiftVector::ZERO);
            let mut queue = VecDeque::from([root]);
            let mut tree_edges: BTreeSet<usize> = BTreeSet::new();
            while let Some(v) = queue.pop_front() {
                for s in 0..4u8 {
                    if let Some((ei, _)) = self.dart_edge[self.dart(v, s)] {
                        let (other, shift) = self.across(self.dart(v, s));
                        let w = other / 4;
                        if potential[w].is_none() {
                            potential[w] = Some(potential[v].unwrap() + shift);
                            tree_edges.insert(ei);
                            queue.push_back(w);
                        }
                    }
                }
            }
            for (ei, e) in self.edges.iter().enumerate() {
                if comp[e.tail_v] == comp[root] && !tree_edges.contains(&ei) {
                    let cyc = potential[e.tail_v].unwrap() + e.shift
                        - potential[e.head_v].unwrap();
                    if !cyc.is_zero() {
                        gens[comp[root]].push(cyc);
                    }
                }
            }
        }
        gens.iter().map(|g| lattice_rank(g)).collect()
    }

    /// Strand components through crossings (free loops excluded).
    pub fn strand_components(&self) -> Vec<Component> {
        // directed edge uses: 2 per edge
        let mut used = vec![false; self.edges.len() * 2];
        let mut out = Vec::new();
        for start_ei in 0..self.edges.len() {
            for start_dir in [true, false] {
                if used[start_ei * 2 + start_dir as usize] {
                    continue;
                }
                let mut walk = Vec::new();
                let mut net = ShiftVector::ZERO;
                let mut ei = start_ei;
                let mut fwd = start_dir;
                loop {
                    used[ei * 2 + fwd as usize] = true;
                    walk.push((ei, fwd));
                    let e = &self.edges[ei];
                    let (arrive_v, arrive_s, shift) = if fwd {
                        (e.head_v, e.head_s, e.shift)
                    } else {
                        (e.tail_v, e.tail_s, -e.shift)
                    };
                    net = net + shift;
                    let exit = self.dart(arrive_v, (arrive_s + 2) % 4);
                    let (next_ei, next_is_tail) = self.dart_edge[exit].expect("dangling slot");
                    ei = next_ei;
                    fwd = next_is_tail;
                    if ei == start_ei && fwd == start_dir {
                        break;
                    }
                }
                // mark the reverse traversal as used too
                for &(ei, fwd) in &walk {
                    used[ei * 2 + (!fwd) as usize] = true;
                }
                out.push(Component::Strand {
                    walk,
                    class: net.canonical_sign(),
                });
            }
        }
        out
    }
}

/// Rank over Z of a set of integer 2-vectors.
pub fn lattice_rank(gens: &[ShiftVector]) -> u8 {
    let nonzero: Vec<&ShiftVector> = gens.iter().filter(|g| !g.is_zero()).collect();
    if nonzero.is_empty() {
        return 0;
    }
    let first = nonzero[0];
    for g in &nonzero[1..] {
        if first.a * g.b - first.b * g.a != 0 {
            return 2;
        }
    }
    1
}

/// The one-precrossing reference diagram used throughout the test suites:
/// a single vertex `v` of class `x` with two essential lobes.
pub fn reference_e1() -> MotifDiagram {
    MotifDiagram::new(
        [("v".to_string(), Decoration::Pre("x".to_string()))],
        [
            Edge::new(("v".into(), 2), ("v".into(), 1), ShiftVector::new(1, 0)),
            Edge::new(("v".into(), 3), ("v".into(), 0), ShiftVector::new(0, 1)),
        ],
        [],
        [("x".to_string(), BTreeSet::from(["v".to_string()]))],
    )
}

/// The standard cellular torus map: one classical crossing between a
/// longitude and a meridian component.
pub fn torus_wedge(dec: Decoration) -> MotifDiagram {
    let classes: Vec<(ClassId, BTreeSet<VertexId>)> = match &dec {
        Decoration::Pre(c) => vec![(c.clone(), BTreeSet::from(["v".to_string()]))],
        _ => vec![],
    };
    MotifDiagram::new(
        [("v".to_string(), dec)],
        [
            Edge::new(("v".into(), 0), ("v".into(), 2), ShiftVector::new(1, 0)),
            Edge::new(("v".into(), 1), ("v".into(), 3), ShiftVector::new(0, 1)),
        ],
        [],
        classes,
    )
}
