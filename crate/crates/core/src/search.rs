//! Bounded bidirectional exploration of the move graph: certifies
//! equivalence of small motifs with explicit, replayable move paths.
//!
//! Never a decision procedure: `Unknown` only means the budget ran out.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use crate::diagram::{Decoration, Level, MotifDiagram, ShiftVector, VertexId};
use crate::lattice::{change_basis, isomorphic, IsoMode, LatticeMatrix};
use crate::moves::{apply_move, creating_instances, find_moves, Catalog, MoveInstance};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct SearchBudget {
    /// Maximum number of steps explored from each endpoint.
    pub max_depth: usize,
    /// Hard cap on crossing count of any explored diagram.
    pub max_size: usize,
    /// Hard cap on the number of open diagrams per direction.
    pub max_frontier: usize,
    /// Basis-change neighbors are dropped once any edge shift coordinate
    /// would exceed this bound.
    pub max_shift_norm: i64,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget {
            max_depth: 4,
            max_size: 8,
            max_frontier: 4000,
            max_shift_norm: 6,
        }
    }
}

/// One replayable step of a move path.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Step {
    Move(MoveInstance),
    BasisChange(LatticeMatrix),
    Regauge,
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Step::Move(m) => {
                let anchors: Vec<String> = m
                    .vertices
                    .values()
                    .map(|(v, _)| v.clone())
                    .chain(m.arc_edges.iter().map(|(e, _)| format!("e{e}")))
                    .collect();
                write!(f, "move {} @ {}", m.schema, anchors.join(","))
            }
            Step::BasisChange(m) => {
                write!(f, "basis [[{},{}],[{},{}]]", m.x1, m.x2, m.x3, m.x4)
            }
            Step::Regauge => write!(f, "regauge"),
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Equivalence {
    Equivalent(Vec<Step>),
    Unknown { reason: String },
}

impl Equivalence {
    pub fn is_equivalent(&self) -> bool {
        matches!(self, Equivalence::Equivalent(_))
    }
}

/// Apply one step of a path.
pub fn apply_step(d: &MotifDiagram, catalog: &Catalog, step: &Step) -> Result<MotifDiagram, String> {
    match step {
        Step::Move(m) => apply_move(d, catalog, m).map_err(|e| e.to_string()),
        Step::BasisChange(m) => change_basis(d, m).map_err(|e| e.to_string()),
        Step::Regauge => Ok(d.canonical_regauge()),
    }
}

/// Replay a whole path from `d`.
pub fn replay(d: &MotifDiagram, catalog: &Catalog, path: &[Step]) -> Result<MotifDiagram, String> {
    let mut cur = d.clone();
    for s in path {
        cur = apply_step(&cur, catalog, s)?;
    }
    Ok(cur)
}

fn max_shift_coord(d: &MotifDiagram) -> i64 {
    d.edges
        .iter()
        .map(|e| e.shift.a.abs().max(e.shift.b.abs()))
        .chain(d.free_loops.iter().map(|l| l.a.abs().max(l.b.abs())))
        .max()
        .unwrap_or(0)
}

/// Deterministic neighbor list: reducing/rearranging moves, creating moves
/// while under the size cap, the four generator basis changes under the
/// shift-norm cap, and the canonical regauge when it changes anything.
pub fn neighbors(
    d: &MotifDiagram,
    catalog: &Catalog,
    budget: &SearchBudget,
) -> Vec<(Step, MotifDiagram)> {
    let mut out = Vec::new();
    for inst in find_moves(d, catalog, None) {
        if let Ok(next) = apply_move(d, catalog, &inst) {
            out.push((Step::Move(inst), next));
        }
    }
    for schema in &catalog.schemas {
        if !schema.is_creating() {
            continue;
        }
        let growth = schema.right.vertices.len();
        if d.crossing_count() + growth > budget.max_size {
            continue;
        }
        for inst in creating_instances(d, schema) {
            if let Ok(next) = apply_move(d, catalog, &inst) {
                out.push((Step::Move(inst), next));
            }
        }
    }
    for m in LatticeMatrix::sl2_generators() {
        if let Ok(next) = change_basis(d, &m) {
            if max_shift_coord(&next) <= budget.max_shift_norm {
                out.push((Step::BasisChange(m), next));
            }
        }
    }
    let g = d.canonical_regauge();
    if g != *d {
        out.push((Step::Regauge, g));
    }
    out
}

/// Canonical serialization of a diagram modulo vertex relabeling, slot
/// rotation, gauge, and class renaming. Equal keys imply (+gauge)
/// isomorphism; the converse holds for connected diagrams and is best-effort
/// across tied components.
pub fn canonical_key(d: &MotifDiagram) -> String {
    // Group vertices into connected components.
    let ids: Vec<&VertexId> = d.vertices.keys().collect();
    let pos: BTreeMap<&VertexId, usize> = ids.iter().enumerate().map(|(i, v)| (*v, i)).collect();
    let mut darts: BTreeMap<(usize, u8), (usize, u8, ShiftVector)> = BTreeMap::new();
    for e in &d.edges {
        let t = (pos[&e.tail.0], e.tail.1);
        let h = (pos[&e.head.0], e.head.1);
        darts.insert(t, (h.0, h.1, e.shift));
        darts.insert(h, (t.0, t.1, -e.shift));
    }
    let mut comp = vec![usize::MAX; ids.len()];
    let mut ncomp = 0;
    for root in 0..ids.len() {
        if comp[root] != usize::MAX {
            continue;
        }
        comp[root] = ncomp;
        let mut q = VecDeque::from([root]);
        while let Some(v) = q.pop_front() {
            for s in 0..4u8 {
                if let Some(&(w, _, _)) = darts.get(&(v, s)) {
                    if comp[w] == usize::MAX {
                        comp[w] = ncomp;
                        q.push_back(w);
                    }
                }
            }
        }
        ncomp += 1;
    }
    // Canonical string per component: minimum over roots and root rotations
    // of a deterministic BFS serialization with spanning-tree gauge zeroing.
    // Class ids become local placeholders; their identities are collected in
    // appearance order for the global class map.
    let mut comp_best: Vec<(String, Vec<String>)> = Vec::new();
    for c in 0..ncomp {
        let members: Vec<usize> = (0..ids.len()).filter(|v| comp[*v] == c).collect();
        let mut best: Option<(String, Vec<String>)> = None;
        for &root in &members {
            for r0 in 0..4u8 {
                let mut rot: BTreeMap<usize, u8> = BTreeMap::from([(root, r0)]);
                let mut pot: BTreeMap<usize, ShiftVector> =
                    BTreeMap::from([(root, ShiftVector::ZERO)]);
                let mut order = vec![root];
                let mut index: BTreeMap<usize, usize> = BTreeMap::from([(root, 0)]);
                let mut qi = 0usize;
                while qi < order.len() {
                    let v = order[qi];
                    qi += 1;
                    for sc in 0..4u8 {
                        let t = (sc + rot[&v]) % 4;
                        let Some(&(w, u, sh)) = darts.get(&(v, t)) else {
                            continue;
                        };
                        if !index.contains_key(&w) {
                            index.insert(w, order.len());
                            order.push(w);
                            rot.insert(w, u);
                            pot.insert(w, pot[&v] - sh);
                        }
                    }
                }
                let mut classes_local: BTreeMap<&str, usize> = BTreeMap::new();
                let mut class_seq: Vec<String> = Vec::new();
                let mut s = String::new();
                for &v in &order {
                    let dec = &d.vertices[ids[v]];
                    match dec {
                        Decoration::Pre(cl) => {
                            let n = classes_local.len();
                            let k = *classes_local.entry(cl.as_str()).or_insert_with(|| {
                                class_seq.push(cl.clone());
                                n
                            });
                            s.push_str(&format!("P{k};"));
                        }
                        _ => {
                            let p = (dec.over_parity().unwrap() + 4 - rot[&v]) % 2;
                            s.push_str(&format!("C{p};"));
                        }
                    }
                }
                for (i, &v) in order.iter().enumerate() {
                    for sc in 0..4u8 {
                        let t = (sc + rot[&v]) % 4;
                        let &(w, u, sh) = darts.get(&(v, t)).expect("L0 valid");
                        let j = index[&w];
                        let su = (u + 4 - rot[&w]) % 4;
                        // gauge-canonical shift as traversed v -> w
                        let canon = pot[&v] + sh - pot[&w];
                        s.push_str(&format!("{i}.{sc}>{j}.{su}:{canon};"));
                    }
                }
                let cand = (s, class_seq);
                if best.as_ref().map_or(true, |b| cand.0 < b.0) {
                    best = Some(cand);
                }
            }
        }
        if let Some(b) = best {
            comp_best.push(b);
        }
    }
    comp_best.sort();
    // Global class numbering in order of appearance across sorted components.
    let mut global: BTreeMap<&str, usize> = BTreeMap::new();
    let mut body = String::new();
    for (s, class_seq) in &comp_best {
        let locals: Vec<usize> = class_seq
            .iter()
            .map(|c| {
                let n = global.len();
                *global.entry(c.as_str()).or_insert(n)
            })
            .collect();
        let locals_str: Vec<String> = locals.iter().map(|l| l.to_string()).collect();
        body.push_str(&format!("[{}|{}]", s, locals_str.join(",")));
    }
    let loops: Vec<String> = d.free_loops.iter().map(|l| l.to_string()).collect();
    format!("{}loops={}", body, loops.join(","))
}

/// Pair a step with its inverse on the resulting diagram, searching the
/// paired schema's instances for one that undoes the effect (up to gauge).
fn invert_step(
    before: &MotifDiagram,
    step: &Step,
    after: &MotifDiagram,
    catalog: &Catalog,
) -> Option<Step> {
    match step {
        Step::Regauge => Some(Step::Regauge),
        Step::BasisChange(m) => Some(Step::BasisChange(m.inverse_unimodular()?)),
        Step::Move(inst) => {
            let paired = match inst.schema.as_str() {
                "R1-" => "R1+",
                "R1+" => "R1-",
                "R2-" => "R2+",
                "R2+" => "R2-",
                "PR1-" => "PR1+",
                "PR1+" => "PR1-",
                other => other, // rearranging schemas pair with themselves
            };
            let schema = catalog.schemas.iter().find(|s| s.name == paired)?;
            let candidates: Vec<MoveInstance> = if schema.is_creating() {
                creating_instances(after, schema)
            } else {
                find_moves(after, catalog, Some(&BTreeSet::from([paired.to_string()])))
            };
            for cand in candidates {
                if let Ok(back) = apply_move(after, catalog, &cand) {
                    if isomorphic(&back, before, IsoMode::Gauge).is_some() {
                        return Some(Step::Move(cand));
                    }
                }
            }
            None
        }
    }
}

/// Re-derive a backward half-path on the concrete diagram `start`. The
/// stored steps reference the backward BFS's own vertex ids, which agree
/// with `start` only up to isomorphism; each move is re-matched against the
/// expected intermediate diagram.
fn anchor_path(
    start: &MotifDiagram,
    expected: &[(Step, MotifDiagram)],
    catalog: &Catalog,
) -> Option<Vec<Step>> {
    let mut cur = start.clone();
    let mut out = Vec::new();
    for (step, want) in expected {
        let (concrete, next) = match step {
            Step::Regauge => (Step::Regauge, cur.canonical_regauge()),
            Step::BasisChange(m) => (Step::BasisChange(*m), change_basis(&cur, m).ok()?),
            Step::Move(inst) => {
                let schema = catalog.schemas.iter().find(|s| s.name == inst.schema)?;
                let candidates: Vec<MoveInstance> = if schema.is_creating() {
                    creating_instances(&cur, schema)
                } else {
                    find_moves(&cur, catalog, Some(&BTreeSet::from([inst.schema.clone()])))
                };
                let mut found = None;
                for c in candidates {
                    if let Ok(n) = apply_move(&cur, catalog, &c) {
                        if isomorphic(&n, want, IsoMode::Gauge).is_some() {
                            found = Some((Step::Move(c), n));
                            break;
                        }
                    }
                }
                found?
            }
        };
        if isomorphic(&next, want, IsoMode::Gauge).is_none() {
            return None;
        }
        out.push(concrete);
        cur = next;
    }
    Some(out)
}

/// Bidirectional bounded BFS over canonical keys. `Equivalent` carries a
/// path replayable from `d1` whose endpoint is (+gauge)-isomorphic to `d2`;
/// `Unknown` only reports an exhausted budget.
pub fn bounded_equivalent(
    d1: &MotifDiagram,
    d2: &MotifDiagram,
    catalog: &Catalog,
    budget: &SearchBudget,
) -> Equivalence {
    for (name, d) in [("first", d1), ("second", d2)] {
        if d.require(Level::L1).is_err() {
            return Equivalence::Unknown {
                reason: format!("{name} diagram is not valid at L1"),
            };
        }
    }
    if isomorphic(d1, d2, IsoMode::Gauge).is_some() {
        return Equivalence::Equivalent(Vec::new());
    }
    // forward: key -> (diagram, path from d1 to it)
    // backward: key -> (inverted step, expected result) pairs leading to d2
    type BackPath = Vec<(Step, MotifDiagram)>;
    let k1 = canonical_key(d1);
    let k2 = canonical_key(d2);
    let mut fwd: BTreeMap<String, (MotifDiagram, Vec<Step>)> =
        BTreeMap::from([(k1.clone(), (d1.clone(), Vec::new()))]);
    let mut bwd: BTreeMap<String, BackPath> = BTreeMap::from([(k2.clone(), Vec::new())]);
    let mut fq: VecDeque<(MotifDiagram, Vec<Step>, usize)> =
        VecDeque::from([(d1.clone(), Vec::new(), 0)]);
    let mut bq: VecDeque<(MotifDiagram, BackPath, usize)> =
        VecDeque::from([(d2.clone(), Vec::new(), 0)]);
    let mut truncated = false;
    let join = |front: &MotifDiagram, front_path: &[Step], back: &BackPath| -> Option<Vec<Step>> {
        let mut full = front_path.to_vec();
        full.extend(anchor_path(front, back, catalog)?);
        Some(full)
    };
    loop {
        let forward = match (fq.front(), bq.front()) {
            (None, None) => break,
            (Some(_), None) => true,
            (None, Some(_)) => false,
            (Some(_), Some(_)) => fq.len() <= bq.len(),
        };
        if forward {
            let (cur, path, depth) = fq.pop_front().unwrap();
            if depth >= budget.max_depth {
                continue;
            }
            for (step, next) in neighbors(&cur, catalog, budget) {
                if next.crossing_count() > budget.max_size {
                    continue;
                }
                let k = canonical_key(&next);
                if fwd.contains_key(&k) {
                    continue;
                }
                let mut p = path.clone();
                p.push(step);
                if let Some(back_half) = bwd.get(&k) {
                    if let Some(full) = join(&next, &p, back_half) {
                        return Equivalence::Equivalent(full);
                    }
                }
                if fq.len() >= budget.max_frontier {
                    truncated = true;
                    continue;
                }
                fwd.insert(k, (next.clone(), p.clone()));
                fq.push_back((next, p, depth + 1));
            }
        } else {
            let (cur, path, depth) = bq.pop_front().unwrap();
            if depth >= budget.max_depth {
                continue;
            }
            for (step, next) in neighbors(&cur, catalog, budget) {
                if next.crossing_count() > budget.max_size {
                    continue;
                }
                let k = canonical_key(&next);
                if bwd.contains_key(&k) {
                    continue;
                }
                // Backward steps must be inverted to run from `next` to d2;
                // steps with no catalog inverse are skipped.
                let Some(inv) = invert_step(&cur, &step, &next, catalog) else {
                    continue;
                };
                let mut p: BackPath = vec![(inv, cur.clone())];
                p.extend(path.iter().cloned());
                if let Some((front_d, front_path)) = fwd.get(&k) {
                    if let Some(full) = join(front_d, front_path, &p) {
                        return Equivalence::Equivalent(full);
                    }
                }
                if bq.len() >= budget.max_frontier {
                    truncated = true;
                    continue;
                }
                bwd.insert(k, p.clone());
                bq.push_back((next, p, depth + 1));
            }
        }
    }
    Equivalence::Unknown {
        reason: if truncated {
            "frontier budget exceeded".to_string()
        } else {
            "depth budget exhausted".to_string()
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagram::{reference_e1, torus_wedge, Decoration};
    use crate::invariants::resolution_set;
    use crate::moves::builtin_catalog;

    fn cat() -> &'static Catalog {
        builtin_catalog()
    }

    #[test]
    fn canonical_key_invariant_under_relabel_rotation_gauge() {
        let d = torus_wedge(Decoration::OverEven);
        let k = canonical_key(&d);
        // relabel the vertex
        let mut r = MotifDiagram::new(
            [("w".to_string(), Decoration::OverEven)],
            d.edges.iter().map(|e| {
                crate::diagram::Edge::new(
                    ("w".to_string(), e.tail.1),
                    ("w".to_string(), e.head.1),
                    e.shift,
                )
            }),
            [],
            [],
        );
        assert_eq!(canonical_key(&r), k);
        // rotate all slots by one
        r = MotifDiagram::new(
            [("w".to_string(), Decoration::OverEven.rotated(1))],
            d.edges.iter().map(|e| {
                crate::diagram::Edge::new(
                    ("w".to_string(), (e.tail.1 + 1) % 4),
                    ("w".to_string(), (e.head.1 + 1) % 4),
                    e.shift,
                )
            }),
            [],
            [],
        );
        assert_eq!(canonical_key(&r), k);
        // regauge
        let pot = std::collections::BTreeMap::from([("v".to_string(), ShiftVector::new(2, -1))]);
        assert_eq!(canonical_key(&d.regauge(&pot).unwrap()), k);
    }

    #[test]
    fn canonical_key_distinguishes_decorations() {
        assert_ne!(
            canonical_key(&torus_wedge(Decoration::OverEven)),
            canonical_key(&torus_wedge(Decoration::OverOdd))
        );
    }

    #[test]
    fn neighbors_of_e1_include_pr1_insertions() {
        let d = reference_e1();
        let b = SearchBudget::default();
        let ns = neighbors(&d, cat(), &b);
        assert!(ns
            .iter()
            .any(|(s, _)| matches!(s, Step::Move(m) if m.schema == "PR1+")));
        // size cap at current size shuts creating moves off
        let tight = SearchBudget { max_size: d.crossing_count(), ..b };
        let ns = neighbors(&d, cat(), &tight);
        assert!(!ns
            .iter()
            .any(|(s, _)| matches!(s, Step::Move(m) if m.schema.ends_with('+'))));
    }

    #[test]
    fn neighbor_relation_is_symmetric_for_r1() {
        let base = torus_wedge(Decoration::OverOdd);
        let b = SearchBudget::default();
        let kinked = neighbors(&base, cat(), &b)
            .into_iter()
            .find(|(s, _)| matches!(s, Step::Move(m) if m.schema == "R1+"))
            .unwrap()
            .1;
        let back_keys: Vec<String> = neighbors(&kinked, cat(), &b)
            .iter()
            .map(|(_, n)| canonical_key(n))
            .collect();
        assert!(back_keys.contains(&canonical_key(&base)));
    }

    #[test]
    fn self_equivalence_is_empty_path() {
        let d = reference_e1();
        let r = bounded_equivalent(&d, &d, cat(), &SearchBudget::default());
        assert_eq!(r, Equivalence::Equivalent(Vec::new()));
    }

    #[test]
    fn one_move_equivalence_found_and_path_replays() {
        let base = torus_wedge(Decoration::OverEven);
        let b = SearchBudget::default();
        let kinked = neighbors(&base, cat(), &b)
            .into_iter()
            .find(|(s, _)| matches!(s, Step::Move(m) if m.schema == "R1+"))
            .unwrap()
            .1;
        let r = bounded_equivalent(&base, &kinked, cat(), &SearchBudget { max_depth: 1, ..b });
        let Equivalence::Equivalent(path) = r else {
            panic!("expected equivalence");
        };
        assert_eq!(path.len(), 1);
        let end = replay(&base, cat(), &path).unwrap();
        assert!(isomorphic(&end, &kinked, IsoMode::Gauge).is_some());
    }

    #[test]
    fn backward_direction_contributes_and_replays() {
        // d2 is two creating moves away; with per-side depth 1 only the
        // bidirectional meet can certify it.
        let base = torus_wedge(Decoration::OverEven);
        let b = SearchBudget::default();
        let step1 = neighbors(&base, cat(), &b)
            .into_iter()
            .find(|(s, _)| matches!(s, Step::Move(m) if m.schema == "R1+"))
            .unwrap()
            .1;
        let step2 = neighbors(&step1, cat(), &b)
            .into_iter()
            .find(|(s, _)| matches!(s, Step::Move(m) if m.schema == "R1+"))
            .unwrap()
            .1;
        let r = bounded_equivalent(
            &base,
            &step2,
            cat(),
            &SearchBudget { max_depth: 1, ..b },
        );
        let Equivalence::Equivalent(path) = r else {
            panic!("expected equivalence via the meet in the middle");
        };
        assert_eq!(path.len(), 2);
        let end = replay(&base, cat(), &path).unwrap();
        assert!(isomorphic(&end, &step2, IsoMode::Gauge).is_some());
        assert_eq!(resolution_set(&end).unwrap(), resolution_set(&step2).unwrap());
    }

    #[test]
    fn distinct_diagrams_are_unknown_within_budget() {
        let d1 = torus_wedge(Decoration::OverEven);
        let d2 = reference_e1()
            .resolve(&std::collections::BTreeMap::from([(
                "x".to_string(),
                Decoration::OverEven,
            )]))
            .unwrap();
        let r = bounded_equivalent(
            &d1,
            &d2,
            cat(),
            &SearchBudget { max_depth: 2, max_size: 3, ..SearchBudget::default() },
        );
        assert!(matches!(r, Equivalence::Unknown { .. }));
    }

    #[test]
    fn basis_change_equivalence_found() {
        let base = torus_wedge(Decoration::OverEven);
        let twisted = change_basis(&base, &LatticeMatrix::new(1, 1, 0, 1)).unwrap();
        let r = bounded_equivalent(&base, &twisted, cat(), &SearchBudget::default());
        let Equivalence::Equivalent(path) = r else {
            panic!("expected equivalence");
        };
        let end = replay(&base, cat(), &path).unwrap();
        assert!(isomorphic(&end, &twisted, IsoMode::Gauge).is_some());
    }

    #[test]
    fn depth_zero_reports_budget() {
        let base = torus_wedge(Decoration::OverEven);
        let kinked = neighbors(&base, cat(), &SearchBudget::default())
            .into_iter()
            .find(|(s, _)| matches!(s, Step::Move(m) if m.schema == "R1+"))
            .unwrap()
            .1;
        let r = bounded_equivalent(
            &base,
            &kinked,
            cat(),
            &SearchBudget { max_depth: 0, ..SearchBudget::default() },
        );
        assert_eq!(
            r,
            Equivalence::Unknown { reason: "depth budget exhausted".to_string() }
        );
    }
}
