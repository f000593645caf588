//! Invariants of motif diagrams: the torus Kauffman bracket as a state sum
//! over smoothings, self-writhe normalization, canonical fingerprints that
//! are stable under gauge moves and det +1 basis changes, and the
//! resolution / weighted-resolution set invariants of pseudo diagrams.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::diagram::{
    lattice_rank, ClassId, Decoration, DiagramError, Indexed, Level, MotifDiagram, ShiftVector,
};
use crate::lattice::LatticeMatrix;
use crate::poly::Laurent;

/// Sorted multiset of essential loop classes (sign-canonical, nonzero).
pub type LoopKey = Vec<ShiftVector>;

/// Bracket value: Laurent coefficients indexed by the multiset of essential
/// loop classes of each state; contractible loops are absorbed into delta
/// factors on the coefficient.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug, Default)]
pub struct TorusBracket {
    pub terms: BTreeMap<LoopKey, Laurent>,
}

impl TorusBracket {
    pub fn zero() -> TorusBracket {
        TorusBracket::default()
    }

    pub fn add_term(&mut self, key: LoopKey, poly: Laurent) {
        let entry = self.terms.entry(key.clone()).or_insert_with(Laurent::zero);
        *entry = &*entry + &poly;
        if entry.is_zero() {
            self.terms.remove(&key);
        }
    }

    pub fn scale(&self, f: &Laurent) -> TorusBracket {
        let mut out = TorusBracket::zero();
        for (k, p) in &self.terms {
            out.add_term(k.clone(), p * f);
        }
        out
    }

    /// Transport along a basis change: every loop class is mapped by `m`.
    pub fn map_basis(&self, m: &LatticeMatrix) -> TorusBracket {
        let mut out = TorusBracket::zero();
        for (k, p) in &self.terms {
            let mut key: LoopKey = k.iter().map(|v| m.apply(*v).canonical_sign()).collect();
            key.sort();
            out.add_term(key, p.clone());
        }
        out
    }
}

impl fmt::Display for TorusBracket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        let mut first = true;
        for (k, p) in &self.terms {
            if !first {
                write!(f, "; ")?;
            }
            first = false;
            if k.is_empty() {
                write!(f, "(): {p}")?;
            } else {
                for v in k {
                    write!(f, "{v}")?;
                }
                write!(f, ": {p}")?;
            }
        }
        write!(f, "}}")
    }
}

#[derive(Error, Clone, PartialEq, Eq, Debug)]
pub enum InvariantError {
    #[error("Unresolved: diagram still has precrossings")]
    Unresolved,
    #[error("TooManyCrossings: {count} crossings exceeds the state-sum limit {limit}")]
    TooManyCrossings { count: usize, limit: usize },
    #[error("TooManyClasses: {count} classes exceeds the resolution limit {limit}")]
    TooManyClasses { count: usize, limit: usize },
    #[error("InvalidDiagram: {0}")]
    Invalid(#[from] DiagramError),
}

/// Default cap on the number of crossings in a bracket state sum (2^n states).
pub const DEFAULT_STATE_LIMIT: usize = 24;
/// Default cap on the number of precrossing classes (2^k resolutions).
pub const DEFAULT_CLASS_LIMIT: usize = 20;

/// Smoothing partner slot at a crossing. The A-smoothing of an `OverEven`
/// crossing joins slots {0,1} and {2,3}; its B-smoothing joins {1,2} and
/// {3,0}. For `OverOdd` the two are exchanged.
fn smoothing_partner(dec: &Decoration, use_a: bool, s: u8) -> u8 {
    let a_adjacent = matches!(dec, Decoration::OverEven);
    if use_a == a_adjacent {
        s ^ 1
    } else {
        3 - s
    }
}

pub fn bracket(d: &MotifDiagram) -> Result<TorusBracket, InvariantError> {
    bracket_with_limit(d, DEFAULT_STATE_LIMIT)
}

pub fn bracket_with_limit(
    d: &MotifDiagram,
    limit: usize,
) -> Result<TorusBracket, InvariantError> {
    d.require(Level::L1)?;
    if !d.is_resolved() {
        return Err(InvariantError::Unresolved);
    }
    let idx = Indexed::build(d);
    let n = idx.n;
    if n > limit.min(63) {
        return Err(InvariantError::TooManyCrossings { count: n, limit });
    }
    // free loops contribute to every state identically
    let base_zero = d.free_loops.iter().filter(|l| l.is_zero()).count();
    let base_key: Vec<ShiftVector> =
        d.free_loops.iter().copied().filter(|l| !l.is_zero()).collect();

    let mut out = TorusBracket::zero();
    for mask in 0u64..(1u64 << n) {
        let use_a = |v: usize| mask & (1 << v) == 0;
        let mut exp = 0i64;
        for v in 0..n {
            exp += if use_a(v) { 1 } else { -1 };
        }
        let mut visited = vec![false; 4 * n];
        let mut zeros = base_zero;
        let mut key = base_key.clone();
        for start in 0..4 * n {
            if visited[start] {
                continue;
            }
            let mut net = ShiftVector::ZERO;
            let mut dart = start;
            loop {
                visited[dart] = true;
                let v = dart / 4;
                let s = (dart % 4) as u8;
                let p = smoothing_partner(&idx.decorations[v], use_a(v), s);
                let pd = v * 4 + p as usize;
                visited[pd] = true;
                let (next, shift) = idx.across(pd);
                net = net + shift;
                dart = next;
                if dart == start {
                    break;
                }
            }
            if net.is_zero() {
                zeros += 1;
            } else {
                key.push(net.canonical_sign());
            }
        }
        key.sort();
        let coeff = &Laurent::monomial(exp, 1) * &Laurent::delta().pow(zeros as u32);
        out.add_term(key, coeff);
    }
    Ok(out)
}

/// Sum of crossing signs over self-crossings (both passes on the same
/// component); independent of component orientations.
pub fn self_writhe(d: &MotifDiagram) -> Result<i64, InvariantError> {
    d.require(Level::L1)?;
    if !d.is_resolved() {
        return Err(InvariantError::Unresolved);
    }
    let idx = Indexed::build(d);
    let comps = idx.strand_components();
    let mut visits: BTreeMap<usize, Vec<(usize, u8)>> = BTreeMap::new();
    for (ci, comp) in comps.iter().enumerate() {
        let walk = match comp {
            crate::diagram::Component::Strand { walk, .. } => walk,
            _ => continue,
        };
        for &(ei, fwd) in walk {
            let e = &idx.edges[ei];
            let (av, asl) = if fwd { (e.head_v, e.head_s) } else { (e.tail_v, e.tail_s) };
            visits.entry(av).or_default().push((ci, (asl + 2) % 4));
        }
    }
    let mut w = 0i64;
    for (v, vs) in visits {
        debug_assert_eq!(vs.len(), 2);
        if vs[0].0 != vs[1].0 {
            continue;
        }
        let par = idx.decorations[v]
            .over_parity()
            .ok_or(InvariantError::Unresolved)?;
        let (over, under) = if vs[0].1 % 2 == par {
            (vs[0].1, vs[1].1)
        } else {
            (vs[1].1, vs[0].1)
        };
        // positive crossing: the over direction is 90 degrees CCW from under
        // (the convention matched to the A/B smoothing labels, so that a
        // positive kink contributes -A^3 to the bracket)
        w += if (over + 4 - under) % 4 == 1 { 1 } else { -1 };
    }
    Ok(w)
}

/// Bracket with the (-A^3)^(-w) self-writhe normalization, making it stable
/// under first Reidemeister kinks.
pub fn normalized_bracket(d: &MotifDiagram) -> Result<TorusBracket, InvariantError> {
    normalized_bracket_with_limit(d, DEFAULT_STATE_LIMIT)
}

pub fn normalized_bracket_with_limit(
    d: &MotifDiagram,
    limit: usize,
) -> Result<TorusBracket, InvariantError> {
    let b = bracket_with_limit(d, limit)?;
    let w = self_writhe(d)?;
    Ok(b.scale(&Laurent::neg_a_cubed_pow(-w)))
}

fn extgcd(a: i64, b: i64) -> (i64, i64, i64) {
    if b == 0 {
        let s = if a < 0 { -1 } else { 1 };
        (a.abs(), s, 0)
    } else {
        let (g, x, y) = extgcd(b, a.rem_euclid(b));
        (g, y, x - a.div_euclid(b) * y)
    }
}

fn norm_sum(m: &LatticeMatrix, data: &[ShiftVector]) -> i64 {
    data.iter().map(|v| m.apply(*v).norm2()).sum()
}

/// Canonical det +1 basis matrices for a finite set of (up to sign) integer
/// vectors: deterministic representatives of the SL(2,Z) orbit minimum.
pub fn canonical_matrices_for(data: &[ShiftVector]) -> Vec<LatticeMatrix> {
    let nonzero: Vec<ShiftVector> = data.iter().copied().filter(|v| !v.is_zero()).collect();
    match lattice_rank(&nonzero) {
        0 => vec![LatticeMatrix::IDENTITY],
        1 => {
            // map the primitive direction to (1, 0)
            let v = nonzero[0];
            let g = v.content();
            let p = ShiftVector::new(v.a / g, v.b / g).canonical_sign();
            let (_, x, y) = extgcd(p.a, p.b);
            vec![LatticeMatrix::new(x, y, -p.b, p.a)]
        }
        _ => {
            // shear descent on the total squared norm (Lagrange reduction of
            // the rows in the data metric; single +-1 shears suffice by
            // convexity), then collect the whole minimum orbit.
            let shears = [
                LatticeMatrix::new(1, 1, 0, 1),
                LatticeMatrix::new(1, -1, 0, 1),
                LatticeMatrix::new(1, 0, 1, 1),
                LatticeMatrix::new(1, 0, -1, 1),
            ];
            let mut cur = LatticeMatrix::IDENTITY;
            let mut cost = norm_sum(&cur, &nonzero);
            loop {
                let mut best: Option<(i64, LatticeMatrix)> = None;
                for g in &shears {
                    let m = g.mul(&cur);
                    let c = norm_sum(&m, &nonzero);
                    if c < cost && best.as_ref().map_or(true, |(bc, _)| c < *bc) {
                        best = Some((c, m));
                    }
                }
                match best {
                    Some((c, m)) => {
                        cur = m;
                        cost = c;
                    }
                    None => break,
                }
            }
            // all norm-minimal matrices differ from cur by a small-entry
            // norm-preserving matrix on the reduced data
            let mut out = Vec::new();
            for a in crate::lattice::unimodular_enumeration(2) {
                let m = a.mul(&cur);
                if norm_sum(&m, &nonzero) == cost && !out.contains(&m) {
                    out.push(m);
                }
            }
            out
        }
    }
}

/// Canonical basis candidates for a whole diagram, from its basis-covariant
/// cheap data: component classes and face net shifts.
pub fn canonical_basis_matrices(d: &MotifDiagram) -> Vec<LatticeMatrix> {
    if !d.check_l0().is_empty() {
        return vec![LatticeMatrix::IDENTITY];
    }
    let mut data: Vec<ShiftVector> = d
        .component_classes()
        .into_iter()
        .filter(|c| !c.is_zero())
        .collect();
    let idx = Indexed::build(d);
    for f in idx.faces() {
        if !f.net_shift.is_zero() {
            data.push(f.net_shift.canonical_sign());
        }
    }
    canonical_matrices_for(&data)
}

/// Canonical fingerprint of a resolved diagram: component count, canonical
/// homology class multiset, and canonically based normalized bracket.
/// Stable under map isomorphism, gauge moves and det +1 basis changes.
pub fn canonical_fingerprint(d: &MotifDiagram) -> Result<String, InvariantError> {
    canonical_fingerprint_with_limit(d, DEFAULT_STATE_LIMIT)
}

pub fn canonical_fingerprint_with_limit(
    d: &MotifDiagram,
    limit: usize,
) -> Result<String, InvariantError> {
    let nb = normalized_bracket_with_limit(d, limit)?;
    let classes = d.component_classes();
    let mut data: Vec<ShiftVector> = classes.iter().copied().filter(|c| !c.is_zero()).collect();
    for k in nb.terms.keys() {
        data.extend(k.iter().copied());
    }
    let mut best: Option<String> = None;
    for m in canonical_matrices_for(&data) {
        let mut cs: Vec<ShiftVector> =
            classes.iter().map(|c| m.apply(*c).canonical_sign()).collect();
        cs.sort();
        let cs_str: Vec<String> = cs.iter().map(|c| c.to_string()).collect();
        let s = format!(
            "components={};classes=[{}];bracket={}",
            classes.len(),
            cs_str.join(","),
            nb.map_basis(&m)
        );
        if best.as_ref().map_or(true, |b| s < *b) {
            best = Some(s);
        }
    }
    Ok(best.expect("candidate list is never empty"))
}

/// One resolved outcome of a pseudo diagram.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ResolutionOutcome {
    pub assignment: BTreeMap<ClassId, Decoration>,
    pub fingerprint: String,
}

/// All 2^k resolutions in deterministic order (classes sorted; `OverEven`
/// before `OverOdd`).
pub fn resolutions(d: &MotifDiagram) -> Result<Vec<ResolutionOutcome>, InvariantError> {
    resolutions_with_limits(d, DEFAULT_CLASS_LIMIT, DEFAULT_STATE_LIMIT)
}

pub fn resolutions_with_limits(
    d: &MotifDiagram,
    class_limit: usize,
    state_limit: usize,
) -> Result<Vec<ResolutionOutcome>, InvariantError> {
    d.require(Level::L1)?;
    let classes: Vec<ClassId> = d.classes.keys().cloned().collect();
    let k = classes.len();
    if k > class_limit.min(63) {
        return Err(InvariantError::TooManyClasses { count: k, limit: class_limit });
    }
    let mut out = Vec::with_capacity(1 << k);
    for mask in 0u64..(1u64 << k) {
        let assignment: BTreeMap<ClassId, Decoration> = classes
            .iter()
            .enumerate()
            .map(|(i, c)| {
                (c.clone(), Decoration::from_parity(((mask >> i) & 1) as u8))
            })
            .collect();
        let resolved = d.resolve(&assignment)?;
        let fingerprint = canonical_fingerprint_with_limit(&resolved, state_limit)?;
        out.push(ResolutionOutcome { assignment, fingerprint });
    }
    Ok(out)
}

/// The resolution set: distinct canonical fingerprints over all resolutions.
pub fn resolution_set(d: &MotifDiagram) -> Result<BTreeSet<String>, InvariantError> {
    Ok(resolutions(d)?.into_iter().map(|r| r.fingerprint).collect())
}

/// Exact dyadic rational num / 2^pow in lowest terms.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct Dyadic {
    pub num: u64,
    pub pow: u32,
}

impl Dyadic {
    pub fn new(mut num: u64, mut pow: u32) -> Dyadic {
        while pow > 0 && num % 2 == 0 {
            num /= 2;
            pow -= 1;
        }
        Dyadic { num, pow }
    }
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.pow == 0 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, 1u64 << self.pow)
        }
    }
}

/// Weighted resolution set: each distinct fingerprint with its probability
/// under uniform independent class assignments.
pub fn were_set(d: &MotifDiagram) -> Result<BTreeMap<String, Dyadic>, InvariantError> {
    let rs = resolutions(d)?;
    let k = d.classes.len() as u32;
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    for r in rs {
        *counts.entry(r.fingerprint).or_insert(0) += 1;
    }
    Ok(counts
        .into_iter()
        .map(|(f, c)| (f, Dyadic::new(c, k)))
        .collect())
}
