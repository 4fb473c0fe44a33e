//! Finite relational structures, instances, and homomorphisms.
//!
//! Domain elements and variables are dense `u32` ranges; names live only at
//! the parsing layer. Relation tables are canonical sorted duplicate-free
//! tuple sets, so structure equality is plain table equality.

use crate::{Caps, Error, Result};
use serde::{Deserialize, Serialize};

/// A relation symbol: name plus arity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelDecl {
    pub name: String,
    pub arity: usize,
}

/// An ordered list of relation symbols.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Signature {
    pub relations: Vec<RelDecl>,
}

impl Signature {
    pub fn new(relations: Vec<(impl Into<String>, usize)>) -> Self {
        Signature {
            relations: relations
                .into_iter()
                .map(|(name, arity)| RelDecl { name: name.into(), arity })
                .collect(),
        }
    }

    pub fn arity(&self, rel: usize) -> usize {
        self.relations[rel].arity
    }

    pub fn len(&self) -> usize {
        self.relations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relations.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.relations.iter().position(|r| r.name == name)
    }

    /// Extends the signature with a fresh relation, returning its index.
    pub fn push(&mut self, name: impl Into<String>, arity: usize) -> usize {
        self.relations.push(RelDecl { name: name.into(), arity });
        self.relations.len() - 1
    }
}

/// A set of tuples of fixed arity, stored flattened in row-major order.
///
/// Kept sorted and duplicate-free; `contains` is a binary search.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Table {
    arity: usize,
    data: Vec<u32>,
}

impl Table {
    pub fn new(arity: usize) -> Self {
        Table { arity, data: Vec::new() }
    }

    pub fn from_rows(arity: usize, rows: impl IntoIterator<Item = Vec<u32>>) -> Self {
        let mut t = Table::new(arity);
        for row in rows {
            t.push_row(&row);
        }
        t.canonicalize();
        t
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn len(&self) -> usize {
        if self.arity == 0 {
            0
        } else {
            self.data.len() / self.arity
        }
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.data[i * self.arity..(i + 1) * self.arity]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u32]> + '_ {
        self.data.chunks_exact(self.arity.max(1))
    }

    /// Appends a row without canonicalizing. Panics on arity mismatch.
    pub fn push_row(&mut self, row: &[u32]) {
        assert_eq!(row.len(), self.arity, "row arity mismatch");
        self.data.extend_from_slice(row);
    }

    /// Sorts rows lexicographically and removes duplicates.
    pub fn canonicalize(&mut self) {
        if self.arity == 0 || self.data.is_empty() {
            return;
        }
        let mut rows: Vec<&[u32]> = self.data.chunks_exact(self.arity).collect();
        rows.sort_unstable();
        rows.dedup();
        let mut data = Vec::with_capacity(rows.len() * self.arity);
        for r in rows {
            data.extend_from_slice(r);
        }
        self.data = data;
    }

    pub fn contains(&self, row: &[u32]) -> bool {
        debug_assert_eq!(row.len(), self.arity);
        let n = self.len();
        let (mut lo, mut hi) = (0usize, n);
        while lo < hi {
            let mid = (lo + hi) / 2;
            if self.row(mid) < row {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        lo < n && self.row(lo) == row
    }

    pub fn max_element(&self) -> Option<u32> {
        self.data.iter().copied().max()
    }
}

/// A finite relational structure: a domain `0..domain_size` and one table
/// per relation symbol of the signature.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Structure {
    pub domain_size: u32,
    pub signature: Signature,
    pub tables: Vec<Table>,
}

impl Structure {
    /// Builds a structure with canonicalized tables. The tables must match
    /// the signature's arities; this is asserted, while range violations are
    /// left to [`validate_structure`] so they can be reported as data.
    pub fn new(domain_size: u32, signature: Signature, tables: Vec<Table>) -> Self {
        assert_eq!(signature.len(), tables.len(), "one table per relation");
        for (decl, t) in signature.relations.iter().zip(&tables) {
            assert_eq!(decl.arity, t.arity(), "table arity must match signature");
        }
        let mut s = Structure { domain_size, signature, tables };
        for t in &mut s.tables {
            t.canonicalize();
        }
        s
    }

    pub fn table(&self, rel: usize) -> &Table {
        &self.tables[rel]
    }

    /// Max arity over the signature, 0 for the trivial signature.
    pub fn max_arity(&self) -> usize {
        self.signature.relations.iter().map(|r| r.arity).max().unwrap_or(0)
    }

    /// The structure viewed as an instance of itself (identity lift).
    pub fn as_instance(&self) -> Instance {
        Instance {
            variable_count: self.domain_size,
            signature: self.signature.clone(),
            constraints: self.tables.clone(),
        }
    }

    /// Induced substructure on `elements` (which are renumbered 0..k in the
    /// given order). Returns the substructure and the old-to-new map.
    pub fn restrict(&self, elements: &[u32]) -> Structure {
        let mut index = vec![u32::MAX; self.domain_size as usize];
        for (new, &old) in elements.iter().enumerate() {
            index[old as usize] = new as u32;
        }
        let tables = self
            .tables
            .iter()
            .map(|t| {
                let mut out = Table::new(t.arity());
                for row in t.rows() {
                    if row.iter().all(|&e| index[e as usize] != u32::MAX) {
                        let mapped: Vec<u32> = row.iter().map(|&e| index[e as usize]).collect();
                        out.push_row(&mapped);
                    }
                }
                out.canonicalize();
                out
            })
            .collect();
        Structure {
            domain_size: elements.len() as u32,
            signature: self.signature.clone(),
            tables,
        }
    }
}

/// A finite structure in a template's signature: variables plus constraints.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub variable_count: u32,
    pub signature: Signature,
    pub constraints: Vec<Table>,
}

impl Instance {
    pub fn new(variable_count: u32, signature: Signature, constraints: Vec<Table>) -> Self {
        assert_eq!(signature.len(), constraints.len());
        for (decl, t) in signature.relations.iter().zip(&constraints) {
            assert_eq!(decl.arity, t.arity());
        }
        let mut x = Instance { variable_count, signature, constraints };
        for t in &mut x.constraints {
            t.canonicalize();
        }
        x
    }

    pub fn empty(variable_count: u32, signature: Signature) -> Self {
        let constraints = signature.relations.iter().map(|r| Table::new(r.arity)).collect();
        Instance { variable_count, signature, constraints }
    }

    pub fn constraint_count(&self) -> usize {
        self.constraints.iter().map(|t| t.len()).sum()
    }

    /// Number of constraint tuples each variable occurs in, counted once per
    /// tuple even if the variable fills several coordinates.
    pub fn occurrence_counts(&self) -> Vec<u32> {
        let mut counts = vec![0u32; self.variable_count as usize];
        for t in &self.constraints {
            for row in t.rows() {
                let mut seen: Vec<u32> = row.to_vec();
                seen.sort_unstable();
                seen.dedup();
                for v in seen {
                    counts[v as usize] += 1;
                }
            }
        }
        counts
    }
}

/// A total map from instance variables to template elements.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub values: Vec<u32>,
}

impl Assignment {
    pub fn new(values: Vec<u32>) -> Self {
        Assignment { values }
    }

    pub fn get(&self, var: u32) -> u32 {
        self.values[var as usize]
    }
}

/// A partial map from instance variables to template elements.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PartialAssignment {
    values: Vec<Option<u32>>,
}

impl PartialAssignment {
    pub fn empty(variable_count: u32) -> Self {
        PartialAssignment { values: vec![None; variable_count as usize] }
    }

    pub fn singleton(variable_count: u32, var: u32, value: u32) -> Self {
        let mut p = Self::empty(variable_count);
        p.set(var, value);
        p
    }

    pub fn set(&mut self, var: u32, value: u32) {
        self.values[var as usize] = Some(value);
    }

    pub fn get(&self, var: u32) -> Option<u32> {
        self.values.get(var as usize).copied().flatten()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.iter().all(|v| v.is_none())
    }

    pub fn iter_bound(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.map(|val| (i as u32, val)))
    }
}

/// A structure invariant violation, reported as data.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Violation {
    ElementOutOfRange { relation: String, row: Vec<u32>, element: u32 },
    ArityMismatch { relation: String, declared: usize, found: usize },
    DuplicateRelationName { name: String },
    ZeroArity { relation: String },
    EmptyDomain,
}

/// Checks every [`Structure`] invariant, naming each offender.
pub fn validate_structure(s: &Structure) -> Vec<Violation> {
    let mut out = Vec::new();
    if s.domain_size == 0 {
        out.push(Violation::EmptyDomain);
    }
    let mut names: Vec<&str> = s.signature.relations.iter().map(|r| r.name.as_str()).collect();
    names.sort_unstable();
    for w in names.windows(2) {
        if w[0] == w[1] {
            out.push(Violation::DuplicateRelationName { name: w[0].to_string() });
        }
    }
    for (decl, table) in s.signature.relations.iter().zip(&s.tables) {
        if decl.arity == 0 {
            out.push(Violation::ZeroArity { relation: decl.name.clone() });
            continue;
        }
        if table.arity() != decl.arity {
            out.push(Violation::ArityMismatch {
                relation: decl.name.clone(),
                declared: decl.arity,
                found: table.arity(),
            });
            continue;
        }
        for row in table.rows() {
            if let Some(&bad) = row.iter().find(|&&e| e >= s.domain_size) {
                out.push(Violation::ElementOutOfRange {
                    relation: decl.name.clone(),
                    row: row.to_vec(),
                    element: bad,
                });
            }
        }
    }
    out
}

/// Mixed-radix encoding of `tuple` over base `domain_size`, first coordinate
/// most significant.
pub fn encode_tuple(tuple: &[u32], domain_size: u32) -> u32 {
    let mut idx = 0u64;
    for &t in tuple {
        idx = idx * domain_size as u64 + t as u64;
    }
    idx as u32
}

/// Inverse of [`encode_tuple`].
pub fn decode_tuple(mut index: u32, domain_size: u32, arity: usize) -> Vec<u32> {
    let mut out = vec![0u32; arity];
    for slot in out.iter_mut().rev() {
        *slot = index % domain_size;
        index /= domain_size;
    }
    out
}

/// The categorical power `s^n`: elements encode n-tuples in mixed-radix
/// order; a relation holds of encoded tuples iff it holds coordinatewise.
pub fn power(s: &Structure, n: usize, caps: &Caps) -> Result<Structure> {
    assert!(n >= 1, "power requires n >= 1");
    let size = (s.domain_size as u64).checked_pow(n as u32).unwrap_or(u64::MAX);
    if size > caps.power_elements {
        return Err(Error::CapExceeded {
            what: "power elements",
            required: size,
            cap: caps.power_elements,
        });
    }
    if n == 1 {
        return Ok(s.clone());
    }
    let tables = s
        .tables
        .iter()
        .map(|t| {
            let k = t.arity();
            let mut out = Table::new(k);
            // Iterate over all n-fold selections of rows; column i of the
            // selection encodes coordinate i of the power tuple.
            let rows: Vec<&[u32]> = t.rows().collect();
            if !rows.is_empty() {
                let mut pick = vec![0usize; n];
                loop {
                    let mut encoded = vec![0u32; k];
                    for (i, slot) in encoded.iter_mut().enumerate() {
                        let mut idx = 0u64;
                        for &p in pick.iter() {
                            idx = idx * s.domain_size as u64 + rows[p][i] as u64;
                        }
                        *slot = idx as u32;
                    }
                    out.push_row(&encoded);
                    // next selection
                    let mut pos = n;
                    loop {
                        if pos == 0 {
                            break;
                        }
                        pos -= 1;
                        pick[pos] += 1;
                        if pick[pos] < rows.len() {
                            break;
                        }
                        pick[pos] = 0;
                        if pos == 0 {
                            pos = usize::MAX;
                            break;
                        }
                    }
                    if pos == usize::MAX {
                        break;
                    }
                }
            }
            out.canonicalize();
            out
        })
        .collect();
    Ok(Structure {
        domain_size: size as u32,
        signature: s.signature.clone(),
        tables,
    })
}

fn check_signatures(x: &Instance, s: &Structure) -> Result<()> {
    if x.signature != s.signature {
        return Err(Error::SignatureMismatch(format!(
            "instance signature {:?} differs from template signature {:?}",
            x.signature.relations, s.signature.relations
        )));
    }
    Ok(())
}

/// True iff `f` maps every constraint tuple of `x` into the corresponding
/// table of `s`.
pub fn is_homomorphism(f: &Assignment, x: &Instance, s: &Structure) -> Result<bool> {
    check_signatures(x, s)?;
    assert_eq!(f.values.len(), x.variable_count as usize, "assignment must be total");
    for (table, template) in x.constraints.iter().zip(&s.tables) {
        let mut image = vec![0u32; table.arity()];
        for row in table.rows() {
            for (i, &v) in row.iter().enumerate() {
                image[i] = f.values[v as usize];
            }
            if !template.contains(&image) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Complete backtracking search for a homomorphism extending `seed`.
///
/// Runs arc-consistency propagation at every node and picks the variable
/// with the fewest remaining values, breaking ties toward the least
/// variable id; values are tried in ascending order, so the result is
/// deterministic.
pub fn find_homomorphism(
    x: &Instance,
    s: &Structure,
    seed: &PartialAssignment,
) -> Result<Option<Assignment>> {
    check_signatures(x, s)?;
    for (var, value) in seed.iter_bound() {
        if value >= s.domain_size {
            return Err(Error::SeedOutOfRange { var, value, domain_size: s.domain_size });
        }
    }
    let problem = crate::search::Problem::new(x, s)?;
    Ok(problem.solve_one(seed).map(Assignment::new))
}

/// The set of restrictions of solutions to `vars`, computed one candidate
/// tuple at a time so the full solution set is never materialized.
pub fn project_solutions(
    x: &Instance,
    s: &Structure,
    vars: &[u32],
) -> Result<std::collections::BTreeSet<Vec<u32>>> {
    assert!(!vars.is_empty(), "projection onto no variables");
    for &v in vars {
        assert!(v < x.variable_count, "projection variable out of range");
    }
    check_signatures(x, s)?;
    let problem = crate::search::Problem::new(x, s)?;
    let mut out = std::collections::BTreeSet::new();
    let d = s.domain_size as u64;
    let total = d.checked_pow(vars.len() as u32).unwrap_or(u64::MAX);
    let mut tuple = vec![0u32; vars.len()];
    for raw in 0..total {
        let mut idx = raw;
        for slot in tuple.iter_mut().rev() {
            *slot = (idx % d) as u32;
            idx /= d;
        }
        let mut seed = PartialAssignment::empty(x.variable_count);
        let mut consistent = true;
        for (&v, &val) in vars.iter().zip(&tuple) {
            if let Some(prev) = seed.get(v) {
                if prev != val {
                    consistent = false;
                    break;
                }
            }
            seed.set(v, val);
        }
        if consistent && problem.solve_one(&seed).is_some() {
            out.insert(tuple.clone());
        }
    }
    Ok(out)
}

/// True iff homomorphisms exist in both directions.
pub fn hom_equivalent(s: &Structure, t: &Structure) -> Result<bool> {
    if s.signature != t.signature {
        return Err(Error::SignatureMismatch(
            "hom_equivalent requires a common signature".into(),
        ));
    }
    let fwd = find_homomorphism(&s.as_instance(), t, &PartialAssignment::empty(s.domain_size))?;
    if fwd.is_none() {
        return Ok(false);
    }
    let back = find_homomorphism(&t.as_instance(), s, &PartialAssignment::empty(t.domain_size))?;
    Ok(back.is_some())
}

/// A core together with the retraction that witnesses it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoreResult {
    /// Induced substructure on the image of an idempotent endomorphism with
    /// minimal image.
    pub core: Structure,
    /// The elements of the original structure that carry the core, in
    /// ascending order; core element `i` is `core_elements[i]`.
    pub core_elements: Vec<u32>,
    /// Idempotent retraction of the original structure onto
    /// `core_elements`.
    pub retraction: Vec<u32>,
}

/// Finds the core: the induced substructure on the image of an endomorphism
/// with minimal image, retracted idempotently.
pub fn find_core(s: &Structure, caps: &Caps) -> Result<CoreResult> {
    let n = s.domain_size;
    let mut current: Vec<u32> = (0..n).collect(); // endomorphism, initially id
    let mut budget = caps.endo_nodes;
    loop {
        let image = image_of(&current, n);
        if image.len() == 1 {
            break;
        }
        // Look for an endomorphism of s whose image is strictly inside the
        // current image; restricting the search to map into `image` keeps
        // every candidate composable with `current`.
        match smaller_endomorphism(s, &image, &mut budget, caps.endo_nodes)? {
            Some(next) => {
                // compose: next after current
                current = current.iter().map(|&v| next[v as usize]).collect();
            }
            None => break,
        }
    }
    let image = image_of(&current, n);
    // Make the retraction idempotent: current permutes `image`, so some
    // power of its restriction is the identity on the image.
    let mut retraction = current.clone();
    loop {
        if image.iter().all(|&e| retraction[e as usize] == e) {
            break;
        }
        retraction = retraction.iter().map(|&v| current[v as usize]).collect();
    }
    let core = s.restrict(&image);
    Ok(CoreResult { core, core_elements: image, retraction })
}

fn image_of(f: &[u32], _n: u32) -> Vec<u32> {
    let mut image: Vec<u32> = f.to_vec();
    image.sort_unstable();
    image.dedup();
    image
}

/// Searches for an endomorphism of `s` with image strictly contained in
/// `within`. The search space is the set of maps into `within` that omit at
/// least one element of it.
fn smaller_endomorphism(
    s: &Structure,
    within: &[u32],
    budget: &mut u64,
    node_cap: u64,
) -> Result<Option<Vec<u32>>> {
    // One candidate per omitted element: force surjectivity failure by
    // removing `omit` from every variable's domain.
    for &omit in within {
        let x = s.as_instance();
        let problem = crate::search::Problem::new(&x, s)?;
        let mut allowed: Vec<u128> = Vec::with_capacity(s.domain_size as usize);
        let mut mask = 0u128;
        for &e in within {
            if e != omit {
                mask |= 1u128 << e;
            }
        }
        for _ in 0..s.domain_size {
            allowed.push(mask);
        }
        match problem.solve_masked(&allowed, budget) {
            Ok(Some(solution)) => return Ok(Some(solution)),
            Ok(None) => {}
            Err(()) => {
                return Err(Error::CapExceeded {
                    what: "endomorphism search nodes",
                    required: node_cap + 1,
                    cap: node_cap,
                })
            }
        }
    }
    Ok(None)
}

/// Maps recording how the two operands of a disjoint union were renumbered.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnionMaps {
    /// New id of variable `v` of the left operand (always `v`).
    pub left_offset: u32,
    /// New id of variable `v` of the right operand (`v + right_offset`).
    pub right_offset: u32,
}

/// Disjoint union of two instances over a common signature.
pub fn disjoint_union(x: &Instance, y: &Instance) -> Result<(Instance, UnionMaps)> {
    if x.signature != y.signature {
        return Err(Error::SignatureMismatch(
            "disjoint_union requires a common signature".into(),
        ));
    }
    let offset = x.variable_count;
    let mut constraints = Vec::with_capacity(x.constraints.len());
    for (tx, ty) in x.constraints.iter().zip(&y.constraints) {
        let mut t = tx.clone();
        for row in ty.rows() {
            let shifted: Vec<u32> = row.iter().map(|&v| v + offset).collect();
            t.push_row(&shifted);
        }
        t.canonicalize();
        constraints.push(t);
    }
    Ok((
        Instance {
            variable_count: x.variable_count + y.variable_count,
            signature: x.signature.clone(),
            constraints,
        },
        UnionMaps { left_offset: 0, right_offset: offset },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn validate_flags_out_of_range_and_arity() {
        let sig = Signature::new(vec![("E", 2)]);
        let mut bad = Table::new(2);
        bad.push_row(&[0, 5]);
        let s = Structure { domain_size: 3, signature: sig.clone(), tables: vec![bad] };
        let report = validate_structure(&s);
        assert!(matches!(report[0], Violation::ElementOutOfRange { element: 5, .. }));

        let wrong_arity = Structure {
            domain_size: 3,
            signature: Signature::new(vec![("R", 3)]),
            tables: vec![Table::from_rows(2, vec![vec![0, 1]])],
        };
        let report = validate_structure(&wrong_arity);
        assert!(matches!(report[0], Violation::ArityMismatch { declared: 3, found: 2, .. }));

        assert!(validate_structure(&fixtures::k(3)).is_empty());
    }

    #[test]
    fn power_of_k2() {
        let caps = Caps::default();
        let k2 = fixtures::k(2);
        assert_eq!(power(&k2, 1, &caps).unwrap(), k2);
        let sq = power(&k2, 2, &caps).unwrap();
        assert_eq!(sq.domain_size, 4);
        // elements encode (a,b) as 2a+b; edges are exactly {01,10} and {00,11}
        let expected = Table::from_rows(
            2,
            vec![vec![0, 3], vec![1, 2], vec![2, 1], vec![3, 0]],
        );
        assert_eq!(sq.tables[0], expected);
    }

    #[test]
    fn power_of_directed_3_cycle_has_nine_edges() {
        let c3 = fixtures::directed_cycle(3);
        let sq = power(&c3, 2, &Caps::default()).unwrap();
        assert_eq!(sq.domain_size, 9);
        assert_eq!(sq.tables[0].len(), 9);
    }

    #[test]
    fn power_respects_cap() {
        let caps = Caps { power_elements: 8, ..Caps::default() };
        let err = power(&fixtures::k(3), 2, &caps).unwrap_err();
        assert_eq!(
            err,
            Error::CapExceeded { what: "power elements", required: 9, cap: 8 }
        );
    }

    #[test]
    fn homomorphism_checks() {
        let k3 = fixtures::k(3);
        let x = k3.as_instance();
        let id = Assignment::new(vec![0, 1, 2]);
        assert!(is_homomorphism(&id, &x, &k3).unwrap());

        let k2 = fixtures::k(2);
        let edge = fixtures::graph_instance(2, &[(0, 1)]);
        let constant = Assignment::new(vec![0, 0]);
        assert!(!is_homomorphism(&constant, &edge, &k2).unwrap());

        let c4 = fixtures::graph_instance(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]);
        let proper = Assignment::new(vec![0, 1, 0, 1]);
        assert!(is_homomorphism(&proper, &c4, &k2).unwrap());
    }

    #[test]
    fn odd_cycle_is_not_two_colorable() {
        let k2 = fixtures::k(2);
        let c5 = fixtures::graph_instance(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)]);
        let empty = PartialAssignment::empty(5);
        assert_eq!(find_homomorphism(&c5, &k2, &empty).unwrap(), None);

        let k3 = fixtures::k(3);
        let sol = find_homomorphism(&c5, &k3, &empty).unwrap().unwrap();
        assert!(is_homomorphism(&sol, &c5, &k3).unwrap());
    }

    #[test]
    fn unconstrained_variable_gets_any_value() {
        let k3 = fixtures::k(3);
        let x = Instance::empty(1, k3.signature.clone());
        let sol = find_homomorphism(&x, &k3, &PartialAssignment::empty(1)).unwrap();
        assert!(sol.is_some());
    }

    #[test]
    fn seed_out_of_range_is_an_error() {
        let k2 = fixtures::k(2);
        let x = Instance::empty(1, k2.signature.clone());
        let seed = PartialAssignment::singleton(1, 0, 7);
        assert!(matches!(
            find_homomorphism(&x, &k2, &seed),
            Err(Error::SeedOutOfRange { value: 7, .. })
        ));
    }

    #[test]
    fn projection_of_an_edge_into_k2() {
        let k2 = fixtures::k(2);
        let path = fixtures::graph_instance(2, &[(0, 1)]);
        let proj = project_solutions(&path, &k2, &[0, 1]).unwrap();
        let expected: std::collections::BTreeSet<Vec<u32>> =
            [vec![0, 1], vec![1, 0]].into_iter().collect();
        assert_eq!(proj, expected);
    }

    #[test]
    fn projection_of_unsolvable_instance_is_empty() {
        let k2 = fixtures::k(2);
        let triangle = fixtures::graph_instance(3, &[(0, 1), (1, 2), (2, 0)]);
        assert!(project_solutions(&triangle, &k2, &[0]).unwrap().is_empty());
    }

    #[test]
    fn core_of_path_is_k2() {
        let path = fixtures::graph(3, &[(0, 1), (1, 2)]);
        let result = find_core(&path, &Caps::default()).unwrap();
        assert_eq!(result.core.domain_size, 2);
        assert_eq!(result.core.tables[0].len(), 2); // a single symmetric edge
        assert!(hom_equivalent(&path, &result.core).unwrap());
    }

    #[test]
    fn k3_is_its_own_core() {
        let k3 = fixtures::k(3);
        let result = find_core(&k3, &Caps::default()).unwrap();
        assert_eq!(result.core, k3);
        assert_eq!(result.retraction, vec![0, 1, 2]);
    }

    #[test]
    fn looped_vertex_absorbs_everything() {
        // one loop at 0 plus pendant edges 0-1, 1-2
        let sig = Signature::new(vec![("E", 2)]);
        let table = Table::from_rows(
            2,
            vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 2], vec![2, 1]],
        );
        let s = Structure::new(3, sig, vec![table]);
        let result = find_core(&s, &Caps::default()).unwrap();
        assert_eq!(result.core.domain_size, 1);
        assert_eq!(result.core.tables[0].len(), 1); // the loop survives
    }

    #[test]
    fn retraction_is_idempotent_endomorphism() {
        let path = fixtures::graph(5, &[(0, 1), (1, 2), (2, 3), (3, 4)]);
        let result = find_core(&path, &Caps::default()).unwrap();
        let r = &result.retraction;
        for &e in &result.core_elements {
            assert_eq!(r[e as usize], e);
        }
        let x = path.as_instance();
        assert!(is_homomorphism(&Assignment::new(r.clone()), &x, &path).unwrap());
    }

    #[test]
    fn hom_equivalence_examples() {
        let k2 = fixtures::k(2);
        let path = fixtures::graph(3, &[(0, 1), (1, 2)]);
        assert!(hom_equivalent(&k2, &path).unwrap());
        assert!(!hom_equivalent(&k2, &fixtures::k(3)).unwrap());
        assert!(hom_equivalent(&k2, &k2).unwrap());
    }

    #[test]
    fn disjoint_union_offsets() {
        let x = fixtures::graph_instance(2, &[(0, 1)]);
        let y = fixtures::graph_instance(3, &[(0, 1), (1, 2)]);
        let (u, maps) = disjoint_union(&x, &y).unwrap();
        assert_eq!(u.variable_count, 5);
        assert_eq!(maps.right_offset, 2);
        assert_eq!(u.constraints[0].len(), x.constraints[0].len() + y.constraints[0].len());

        let empty = Instance::empty(0, x.signature.clone());
        let (u2, _) = disjoint_union(&x, &empty).unwrap();
        assert_eq!(u2, x);
    }

    #[test]
    fn power_membership_is_coordinatewise() {
        // exhaustive decode check on domains up to 81 elements
        let caps = Caps::default();
        for s in [fixtures::k(2), fixtures::k(3), fixtures::directed_cycle(3)] {
            for n in [2usize, 3] {
                if (s.domain_size as u64).pow(n as u32) > 81 {
                    continue;
                }
                let p = power(&s, n, &caps).unwrap();
                for (rel, table) in p.tables.iter().enumerate() {
                    let k = table.arity();
                    let total = (p.domain_size as u64).pow(k as u32);
                    for raw in 0..total {
                        let tuple = decode_tuple(raw as u32, p.domain_size, k);
                        let mut coordinatewise = true;
                        for coord in 0..n {
                            let row: Vec<u32> = tuple
                                .iter()
                                .map(|&enc| decode_tuple(enc, s.domain_size, n)[coord])
                                .collect();
                            if !s.tables[rel].contains(&row) {
                                coordinatewise = false;
                                break;
                            }
                        }
                        assert_eq!(table.contains(&tuple), coordinatewise);
                    }
                }
            }
        }
    }
}
