//! Arc-consistency closure, width-1 solving with totally symmetric
//! extractors, acyclic-instance solving, and cycle-consistency auditing.
//!
//! The witness stores the *excluded* sets: `f(x)` is the set of values that
//! propagation has ruled out for `x`, and the allowed set is its complement
//! `U_x = D \ f(x)`. Code that needs the allowed side goes through
//! [`Witness::allowed_mask`] so the two conventions never mix silently.

use crate::model::{Assignment, Instance, Structure};
use crate::poly::Operation;
use crate::search::Problem;
use crate::{Caps, Error, Result};

/// Per-variable excluded-value sets (the closure function of the
/// propagation rule).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Witness {
    pub domain_size: u32,
    excluded: Vec<u128>,
}

impl Witness {
    /// The witness excluding nothing.
    pub fn empty(variable_count: u32, domain_size: u32) -> Self {
        Witness { domain_size, excluded: vec![0; variable_count as usize] }
    }

    fn full_mask(&self) -> u128 {
        if self.domain_size == 128 {
            u128::MAX
        } else {
            (1u128 << self.domain_size) - 1
        }
    }

    pub fn variable_count(&self) -> u32 {
        self.excluded.len() as u32
    }

    pub fn exclude(&mut self, var: u32, value: u32) {
        self.excluded[var as usize] |= 1u128 << value;
    }

    pub fn excluded_mask(&self, var: u32) -> u128 {
        self.excluded[var as usize]
    }

    /// Allowed mask U_x = D \ f(x).
    pub fn allowed_mask(&self, var: u32) -> u128 {
        self.full_mask() & !self.excluded[var as usize]
    }

    /// Allowed values in ascending order.
    pub fn allowed_values(&self, var: u32) -> Vec<u32> {
        let mut out = Vec::new();
        let mut bits = self.allowed_mask(var);
        while bits != 0 {
            out.push(bits.trailing_zeros());
            bits &= bits - 1;
        }
        out
    }

    /// A good witness allows at least one value everywhere.
    pub fn is_good(&self) -> bool {
        let full = self.full_mask();
        self.excluded.iter().all(|&e| e != full)
    }

    /// True iff this witness excludes no more than `other` anywhere.
    pub fn subset_of(&self, other: &Witness) -> bool {
        self.excluded
            .iter()
            .zip(&other.excluded)
            .all(|(&a, &b)| a & !b == 0)
    }
}

/// Least closed function containing `seed`: a value joins the excluded set
/// of a variable as soon as, in some constraint, every template tuple
/// putting it there is blocked by the current exclusions. The fixpoint is
/// unique, so iteration order does not matter.
pub fn ac_closure(x: &Instance, s: &Structure, seed: &Witness) -> Result<Witness> {
    let problem = Problem::new(x, s)?;
    let mut domains = problem.full_domains();
    for (dom, i) in domains.iter_mut().zip(0u32..) {
        *dom &= !seed.excluded_mask(i);
    }
    let domains = problem.ac_fixpoint(domains);
    Ok(witness_from_domains(x, s, &domains))
}

/// Same closure, but revising the constraints in the order of `schedule`
/// first; the fixpoint is identical to [`ac_closure`]'s.
pub fn ac_closure_scheduled(
    x: &Instance,
    s: &Structure,
    seed: &Witness,
    schedule: &[u32],
) -> Result<Witness> {
    let problem = Problem::new(x, s)?;
    let mut domains = problem.full_domains();
    for (dom, i) in domains.iter_mut().zip(0u32..) {
        *dom &= !seed.excluded_mask(i);
    }
    let domains = problem.ac_fixpoint_scheduled(domains, schedule);
    Ok(witness_from_domains(x, s, &domains))
}

fn witness_from_domains(x: &Instance, s: &Structure, domains: &[u128]) -> Witness {
    let full = if s.domain_size == 128 {
        u128::MAX
    } else {
        (1u128 << s.domain_size) - 1
    };
    Witness {
        domain_size: s.domain_size,
        excluded: (0..x.variable_count as usize)
            .map(|v| full & !domains[v])
            .collect(),
    }
}

/// Closure of the empty function if it is good, `None` as soon as some
/// variable has every value excluded.
pub fn good_witness(x: &Instance, s: &Structure) -> Result<Option<Witness>> {
    let w = ac_closure(x, s, &Witness::empty(x.variable_count, s.domain_size))?;
    Ok(if w.is_good() { Some(w) } else { None })
}

/// Verifies that `ts` is a totally symmetric polymorphism of `s` of arity
/// at least |D| times the maximal relation arity.
fn verify_extractor(ts: &Operation, s: &Structure) -> Result<()> {
    if ts.domain_size != s.domain_size {
        return Err(Error::NotAValidExtractor(format!(
            "extractor works over {} elements, template over {}",
            ts.domain_size, s.domain_size
        )));
    }
    let needed = s.domain_size as usize * s.max_arity();
    if ts.arity < needed {
        return Err(Error::NotAValidExtractor(format!(
            "extractor arity {} is below |D|*N = {}",
            ts.arity, needed
        )));
    }
    if !ts.is_totally_symmetric() {
        return Err(Error::NotAValidExtractor(
            "operation is not totally symmetric".into(),
        ));
    }
    if !crate::poly::preserves_ts(ts, s) {
        return Err(Error::NotAValidExtractor(
            "operation is not a polymorphism".into(),
        ));
    }
    Ok(())
}

/// The allowed values of `var` padded cyclically to length `n`; any padding
/// with the same value set gives the same extraction by total symmetry.
fn padded_enumeration(w: &Witness, var: u32, n: usize) -> Vec<u32> {
    let values = w.allowed_values(var);
    (0..n).map(|i| values[i % values.len()]).collect()
}

/// Width-1 solving: `None` exactly when the arc-consistency closure wipes
/// some variable out; otherwise applies the extractor to an enumeration of
/// each allowed set and verifies the result is a homomorphism.
pub fn width1_solve(x: &Instance, s: &Structure, ts: &Operation) -> Result<Option<Assignment>> {
    verify_extractor(ts, s)?;
    let Some(w) = good_witness(x, s)? else {
        return Ok(None);
    };
    let values: Vec<u32> = (0..x.variable_count)
        .map(|v| ts.apply(&padded_enumeration(&w, v, ts.arity)))
        .collect();
    let assignment = Assignment::new(values);
    if !crate::model::is_homomorphism(&assignment, x, s)? {
        return Err(Error::VerificationFailed(
            "width-1 extraction produced a non-homomorphism".into(),
        ));
    }
    Ok(Some(assignment))
}

/// Constraint occurrences with their scopes, the shared incidence view.
pub(crate) fn occurrences(x: &Instance) -> Vec<(usize, usize, Vec<u32>)> {
    let mut out = Vec::new();
    for (rel, table) in x.constraints.iter().enumerate() {
        for (row_idx, row) in table.rows().enumerate() {
            out.push((rel, row_idx, row.to_vec()));
        }
    }
    out
}

/// True iff the instance contains no cycle: its bipartite incidence
/// multigraph of variables and constraint occurrences is a forest. A tuple
/// mentioning a variable twice and two constraints on the same variable
/// pair both count as cycles.
pub fn is_acyclic(x: &Instance) -> bool {
    let n = x.variable_count as usize;
    let occs = occurrences(x);
    let mut parent: Vec<u32> = (0..(n + occs.len()) as u32).collect();
    fn find(parent: &mut [u32], mut a: u32) -> u32 {
        while parent[a as usize] != a {
            let up = parent[parent[a as usize] as usize];
            parent[a as usize] = up;
            a = up;
        }
        a
    }
    for (i, (_, _, scope)) in occs.iter().enumerate() {
        let occ_node = (n + i) as u32;
        for &v in scope {
            let (rv, ro) = (find(&mut parent, v), find(&mut parent, occ_node));
            if rv == ro {
                return false;
            }
            parent[rv as usize] = ro;
        }
    }
    true
}

/// Solves an acyclic instance by rooting each connected component and
/// extending leafward with supports from the arc-consistency witness.
pub fn acyclic_solve(x: &Instance, s: &Structure) -> Result<Option<Assignment>> {
    if !is_acyclic(x) {
        return Err(Error::InstanceHasCycle);
    }
    let Some(w) = good_witness(x, s)? else {
        return Ok(None);
    };
    let occs = occurrences(x);
    let n = x.variable_count as usize;
    let mut var_occs: Vec<Vec<u32>> = vec![Vec::new(); n];
    for (i, (_, _, scope)) in occs.iter().enumerate() {
        for &v in scope {
            var_occs[v as usize].push(i as u32);
        }
    }
    let mut value: Vec<Option<u32>> = vec![None; n];
    let mut occ_done = vec![false; occs.len()];
    for root in 0..n as u32 {
        if value[root as usize].is_some() {
            continue;
        }
        value[root as usize] = Some(w.allowed_mask(root).trailing_zeros());
        let mut queue = std::collections::VecDeque::from([root]);
        while let Some(v) = queue.pop_front() {
            let val = value[v as usize].unwrap();
            for &oi in &var_occs[v as usize] {
                if occ_done[oi as usize] {
                    continue;
                }
                occ_done[oi as usize] = true;
                let (rel, _, scope) = &occs[oi as usize];
                let pos = scope.iter().position(|&u| u == v).unwrap();
                // least template tuple supporting val inside the witness
                let row = s.tables[*rel]
                    .rows()
                    .find(|t| {
                        t[pos] == val
                            && t.iter()
                                .zip(scope.iter())
                                .all(|(&a, &u)| w.allowed_mask(u) & (1u128 << a) != 0)
                    })
                    .ok_or_else(|| {
                        Error::VerificationFailed("arc-consistent witness lost a support".into())
                    })?;
                for (&a, &u) in row.iter().zip(scope.iter()) {
                    if value[u as usize].is_none() {
                        value[u as usize] = Some(a);
                        queue.push_back(u);
                    }
                }
            }
        }
    }
    let assignment = Assignment::new(value.into_iter().map(Option::unwrap).collect());
    if !crate::model::is_homomorphism(&assignment, x, s)? {
        return Err(Error::VerificationFailed(
            "acyclic extension produced a non-homomorphism".into(),
        ));
    }
    Ok(Some(assignment))
}

/// One step of a path: a constraint occurrence traversed from one of its
/// coordinates to another.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathStep {
    pub rel: usize,
    pub row: usize,
    pub from_pos: usize,
    pub to_pos: usize,
}

/// A closed path: variables x_1, ..., x_n with x_1 = x_n, linked by steps
/// whose endpoints are coordinate projections of instance tuples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClosedPath {
    pub vars: Vec<u32>,
    pub steps: Vec<PathStep>,
}

impl ClosedPath {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Checks the structural invariant against an instance.
    pub fn validate(&self, x: &Instance) -> Result<()> {
        if self.vars.len() != self.steps.len() + 1 {
            return Err(Error::VerificationFailed("path arity mismatch".into()));
        }
        if self.vars.first() != self.vars.last() {
            return Err(Error::VerificationFailed("path is not closed".into()));
        }
        for (i, step) in self.steps.iter().enumerate() {
            let row = x.constraints[step.rel].row(step.row);
            if row[step.from_pos] != self.vars[i] || row[step.to_pos] != self.vars[i + 1] {
                return Err(Error::VerificationFailed(format!(
                    "step {i} does not project onto its endpoints"
                )));
            }
        }
        Ok(())
    }

    /// The same cycle walked backwards.
    pub fn reversed(&self) -> ClosedPath {
        let mut vars: Vec<u32> = self.vars.clone();
        vars.reverse();
        let steps = self
            .steps
            .iter()
            .rev()
            .map(|s| PathStep { rel: s.rel, row: s.row, from_pos: s.to_pos, to_pos: s.from_pos })
            .collect();
        ClosedPath { vars, steps }
    }
}

/// Result of the cycle-consistency audit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CycleAudit {
    /// Every closed path up to the stated length returns every allowed
    /// value to itself.
    Pass { cycles_checked: u64, max_len: usize },
    /// A value that cannot travel around a closed path back to itself.
    Fail { path: ClosedPath, value: u32 },
}

/// Audits cycle consistency over all simple cycles of the incidence
/// multigraph with at most `max_len` steps, in both orientations. The
/// verdict is explicitly qualified by `max_len`; the closed-path condition
/// in general quantifies over unboundedly many paths.
pub fn cycle_consistency_audit(
    x: &Instance,
    s: &Structure,
    w: &Witness,
    max_len: usize,
    caps: &Caps,
) -> Result<CycleAudit> {
    if !w.is_good() {
        return Err(Error::VerificationFailed("witness is not good".into()));
    }
    if &ac_closure(x, s, w)? != w {
        return Err(Error::VerificationFailed("witness is not closed".into()));
    }
    let cycles = simple_cycles(x, max_len, caps.cycle_enum)?;
    let mut checked = 0u64;
    for cycle in &cycles {
        for path in [cycle.clone(), cycle.reversed()] {
            checked += 1;
            if let Some(value) = audit_path(&path, x, s, w) {
                return Ok(CycleAudit::Fail { path, value });
            }
        }
    }
    Ok(CycleAudit::Pass { cycles_checked: checked, max_len })
}

/// First allowed value of the path's base variable that cannot return to
/// itself along the path, if any. The existential chain is checked by a
/// reachability sweep through the template projections.
pub fn audit_path(path: &ClosedPath, x: &Instance, s: &Structure, w: &Witness) -> Option<u32> {
    debug_assert!(path.validate(x).is_ok());
    let base = path.vars[0];
    for a in w.allowed_values(base) {
        let mut reach: u128 = 1u128 << a;
        for (i, step) in path.steps.iter().enumerate() {
            let mut next: u128 = 0;
            for row in s.tables[step.rel].rows() {
                let (from, to) = (row[step.from_pos], row[step.to_pos]);
                if reach & (1u128 << from) != 0 {
                    next |= 1u128 << to;
                }
            }
            reach = next & w.allowed_mask(path.vars[i + 1]);
            if reach == 0 {
                break;
            }
        }
        if reach & (1u128 << a) == 0 {
            return Some(a);
        }
    }
    None
}

/// All simple cycles of the incidence multigraph with at most `max_len`
/// steps, each reported once as a closed path starting at its least
/// variable, in a deterministic order.
pub fn simple_cycles(x: &Instance, max_len: usize, cap: u64) -> Result<Vec<ClosedPath>> {
    let occs = occurrences(x);
    // incidence edges: (occurrence, position) hanging off each variable
    let mut var_edges: Vec<Vec<(u32, u32)>> = vec![Vec::new(); x.variable_count as usize];
    for (oi, (_, _, scope)) in occs.iter().enumerate() {
        for (pos, &v) in scope.iter().enumerate() {
            var_edges[v as usize].push((oi as u32, pos as u32));
        }
    }

    struct Dfs<'a> {
        occs: &'a [(usize, usize, Vec<u32>)],
        var_edges: &'a [Vec<(u32, u32)>],
        max_len: usize,
        cap: u64,
        root: u32,
        vars: Vec<u32>,
        steps: Vec<PathStep>,
        used: Vec<(u32, u32)>,
        out: Vec<ClosedPath>,
    }
    impl Dfs<'_> {
        fn go(
            &mut self,
            at: u32,
            seen: &mut std::collections::BTreeSet<Vec<(u32, u32)>>,
        ) -> Result<()> {
            if self.steps.len() >= self.max_len {
                return Ok(());
            }
            let edges = self.var_edges[at as usize].clone();
            for (oi, from_pos) in edges {
                if self.used.contains(&(oi, from_pos)) {
                    continue;
                }
                let (rel, row, scope) = self.occs[oi as usize].clone();
                for (to_pos, &next) in scope.iter().enumerate() {
                    if to_pos == from_pos as usize || next < self.root {
                        continue;
                    }
                    if self.used.contains(&(oi, to_pos as u32)) {
                        continue;
                    }
                    let closes = next == self.root;
                    if !closes && self.vars.contains(&next) {
                        continue;
                    }
                    self.used.push((oi, from_pos));
                    self.used.push((oi, to_pos as u32));
                    self.vars.push(next);
                    self.steps.push(PathStep {
                        rel,
                        row,
                        from_pos: from_pos as usize,
                        to_pos,
                    });
                    if closes {
                        let mut key = self.used.clone();
                        key.sort_unstable();
                        if seen.insert(key) {
                            if self.out.len() as u64 >= self.cap {
                                return Err(Error::CapExceeded {
                                    what: "simple cycles",
                                    required: self.out.len() as u64 + 1,
                                    cap: self.cap,
                                });
                            }
                            self.out.push(ClosedPath {
                                vars: self.vars.clone(),
                                steps: self.steps.clone(),
                            });
                        }
                    } else {
                        self.go(next, seen)?;
                    }
                    self.steps.pop();
                    self.vars.pop();
                    self.used.pop();
                    self.used.pop();
                }
            }
            Ok(())
        }
    }

    let mut out: Vec<ClosedPath> = Vec::new();
    let mut seen: std::collections::BTreeSet<Vec<(u32, u32)>> = Default::default();
    for root in 0..x.variable_count {
        let mut dfs = Dfs {
            occs: &occs,
            var_edges: &var_edges,
            max_len,
            cap,
            root,
            vars: vec![root],
            steps: Vec::new(),
            used: Vec::new(),
            out: Vec::new(),
        };
        dfs.go(root, &mut seen)?;
        out.extend(dfs.out);
    }
    // Deterministic audit order: shortest cycles first, then lexicographic.
    out.sort_by(|a, b| {
        (a.steps.len(), &a.vars)
            .cmp(&(b.steps.len(), &b.vars))
            .then_with(|| {
                let ka: Vec<_> =
                    a.steps.iter().map(|s| (s.rel, s.row, s.from_pos, s.to_pos)).collect();
                let kb: Vec<_> =
                    b.steps.iter().map(|s| (s.rel, s.row, s.from_pos, s.to_pos)).collect();
                ka.cmp(&kb)
            })
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::{find_homomorphism, PartialAssignment, Signature, Table};

    #[test]
    fn unconstrained_variable_excludes_nothing() {
        let k2 = fixtures::k(2);
        let x = Instance::empty(1, k2.signature.clone());
        let w = good_witness(&x, &k2).unwrap().unwrap();
        assert_eq!(w.allowed_values(0), vec![0, 1]);
    }

    #[test]
    fn horn_unit_propagation() {
        // U1(x) and (x ∧ x) → y force y = 1
        let horn = fixtures::horn();
        let u1 = Table::from_rows(1, vec![vec![0]]);
        let imp = Table::from_rows(3, vec![vec![0, 0, 1]]);
        let x = Instance::new(2, horn.signature.clone(), vec![Table::new(1), u1, imp]);
        let w = good_witness(&x, &horn).unwrap().unwrap();
        assert_eq!(w.allowed_values(0), vec![1]);
        assert_eq!(w.allowed_values(1), vec![1]);
    }

    #[test]
    fn odd_cycle_stays_arc_consistent() {
        let k2 = fixtures::k(2);
        let triangle = fixtures::graph_instance(3, &[(0, 1), (1, 2), (2, 0)]);
        let w = good_witness(&triangle, &k2).unwrap().unwrap();
        for v in 0..3 {
            assert_eq!(w.allowed_values(v), vec![0, 1]);
        }
    }

    #[test]
    fn conflicting_unaries_kill_the_witness() {
        let horn = fixtures::horn();
        let u0 = Table::from_rows(1, vec![vec![0]]);
        let u1 = Table::from_rows(1, vec![vec![0]]);
        let x = Instance::new(1, horn.signature.clone(), vec![u0, u1, Table::new(3)]);
        assert!(good_witness(&x, &horn).unwrap().is_none());
    }

    #[test]
    fn closure_is_monotone_inflationary_idempotent() {
        let horn = fixtures::horn();
        let imp = Table::from_rows(3, vec![vec![0, 1, 2], vec![2, 2, 3]]);
        let x = Instance::new(
            4,
            horn.signature.clone(),
            vec![Table::from_rows(1, vec![vec![0]]), Table::new(1), imp],
        );
        let empty = Witness::empty(4, 2);
        let base = ac_closure(&x, &horn, &empty).unwrap();
        assert!(empty.subset_of(&base)); // inflationary
        assert_eq!(ac_closure(&x, &horn, &base).unwrap(), base); // idempotent
        let mut seed = empty.clone();
        seed.exclude(3, 0);
        let bigger = ac_closure(&x, &horn, &seed).unwrap();
        assert!(base.subset_of(&bigger)); // monotone
    }

    #[test]
    fn closure_fixpoint_is_schedule_independent() {
        let horn = fixtures::horn();
        let imp = Table::from_rows(3, vec![vec![0, 0, 1], vec![1, 1, 2]]);
        let u1 = Table::from_rows(1, vec![vec![0]]);
        let x = Instance::new(3, horn.signature.clone(), vec![Table::new(1), u1, imp]);
        let empty = Witness::empty(3, 2);
        let base = ac_closure(&x, &horn, &empty).unwrap();
        let total = x.constraint_count() as u32;
        for rot in 0..total {
            let schedule: Vec<u32> = (0..total).map(|i| (i + rot) % total).collect();
            assert_eq!(
                ac_closure_scheduled(&x, &horn, &empty, &schedule).unwrap(),
                base
            );
        }
    }

    fn horn_and(arity: usize) -> Operation {
        Operation::min_n(2, arity)
    }

    #[test]
    fn width1_solves_horn() {
        let horn = fixtures::horn();
        let u1 = Table::from_rows(1, vec![vec![0]]);
        let imp = Table::from_rows(3, vec![vec![0, 0, 1]]);
        let x = Instance::new(2, horn.signature.clone(), vec![Table::new(1), u1, imp]);
        let sol = width1_solve(&x, &horn, &horn_and(6)).unwrap().unwrap();
        assert_eq!(sol.values, vec![1, 1]);
    }

    #[test]
    fn width1_returns_none_on_unsatisfiable_horn() {
        let horn = fixtures::horn();
        let u0 = Table::from_rows(1, vec![vec![0]]);
        let u1 = Table::from_rows(1, vec![vec![0]]);
        let x = Instance::new(1, horn.signature.clone(), vec![u0, u1, Table::new(3)]);
        assert!(width1_solve(&x, &horn, &horn_and(6)).unwrap().is_none());
    }

    #[test]
    fn width1_unconstrained_variable_gets_and_of_everything() {
        let horn = fixtures::horn();
        let x = Instance::empty(1, horn.signature.clone());
        let sol = width1_solve(&x, &horn, &horn_and(6)).unwrap().unwrap();
        assert_eq!(sol.values, vec![0]); // AND(0,1,0,1,0,1) = 0
    }

    #[test]
    fn width1_rejects_bad_extractors() {
        let horn = fixtures::horn();
        let x = Instance::empty(1, horn.signature.clone());
        assert!(matches!(
            width1_solve(&x, &horn, &horn_and(3)),
            Err(Error::NotAValidExtractor(_))
        ));
        let or6 = Operation::from_fn(2, 6, |a| *a.iter().max().unwrap());
        assert!(matches!(
            width1_solve(&x, &horn, &or6),
            Err(Error::NotAValidExtractor(_))
        ));
    }

    #[test]
    fn padding_invariance() {
        let op = horn_and(6);
        assert_eq!(op.apply(&[0, 1, 0, 1, 0, 1]), op.apply(&[0, 1, 1, 1, 1, 1]));
        assert_eq!(op.apply(&[1, 1, 1, 1, 1, 1]), 1);
    }

    #[test]
    fn acyclicity_examples() {
        let star = fixtures::graph_instance(4, &[(0, 1), (0, 2), (0, 3)]);
        assert!(is_acyclic(&star));

        // two distinct constraints on the same variable pair
        let doubled = fixtures::graph_instance(2, &[(0, 1), (1, 0)]);
        assert!(!is_acyclic(&doubled));

        // a single tuple mentioning the same variable twice
        let sig = Signature::new(vec![("E", 2)]);
        let selfloop = Instance::new(1, sig, vec![Table::from_rows(2, vec![vec![0, 0]])]);
        assert!(!is_acyclic(&selfloop));
    }

    #[test]
    fn acyclic_solve_finds_solutions() {
        let k2 = fixtures::k(2);
        let path = fixtures::graph_instance(4, &[(0, 1), (1, 2), (2, 3)]);
        let sol = acyclic_solve(&path, &k2).unwrap().unwrap();
        assert_eq!(sol.values, vec![0, 1, 0, 1]);

        let triangle = fixtures::graph_instance(3, &[(0, 1), (1, 2), (2, 0)]);
        assert!(matches!(
            acyclic_solve(&triangle, &k2),
            Err(Error::InstanceHasCycle)
        ));
    }

    #[test]
    fn acyclic_solve_on_single_3sat_clause() {
        let threesat = fixtures::threesat();
        let d0 = Table::from_rows(3, vec![vec![0, 1, 2]]);
        let x = Instance::new(
            3,
            threesat.signature.clone(),
            vec![d0, Table::new(3), Table::new(3), Table::new(3)],
        );
        let sol = acyclic_solve(&x, &threesat).unwrap().unwrap();
        assert!(crate::model::is_homomorphism(&sol, &x, &threesat).unwrap());
    }

    #[test]
    fn acyclic_agreement_with_search() {
        // on acyclic instances: good witness exists iff a solution exists
        let k2 = fixtures::k(2);
        for edges in [vec![(0, 1), (1, 2)], vec![(0, 1), (0, 2), (0, 3)]] {
            let n = edges.iter().flat_map(|&(a, b)| [a, b]).max().unwrap() + 1;
            let x = fixtures::graph_instance(n, &edges);
            let witness = good_witness(&x, &k2).unwrap().is_some();
            let search = find_homomorphism(&x, &k2, &PartialAssignment::empty(n))
                .unwrap()
                .is_some();
            assert_eq!(witness, search);
        }
    }

    #[test]
    fn cycle_audit_flags_odd_cycles_over_k2() {
        let k2 = fixtures::k(2);
        let triangle = fixtures::graph_instance(3, &[(0, 1), (1, 2), (2, 0)]);
        let w = good_witness(&triangle, &k2).unwrap().unwrap();
        let audit = cycle_consistency_audit(&triangle, &k2, &w, 16, &Caps::default()).unwrap();
        match audit {
            CycleAudit::Fail { path, value } => {
                assert_eq!(path.len(), 3);
                assert_eq!(value, 0); // least failing value first
            }
            CycleAudit::Pass { .. } => panic!("triangle over K2 must fail the audit"),
        }
    }

    #[test]
    fn cycle_audit_passes_even_cycles_and_trees() {
        let k2 = fixtures::k(2);
        let square = fixtures::graph_instance(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]);
        let w = good_witness(&square, &k2).unwrap().unwrap();
        assert!(matches!(
            cycle_consistency_audit(&square, &k2, &w, 16, &Caps::default()).unwrap(),
            CycleAudit::Pass { .. }
        ));

        let path = fixtures::graph_instance(3, &[(0, 1), (1, 2)]);
        let w = good_witness(&path, &k2).unwrap().unwrap();
        match cycle_consistency_audit(&path, &k2, &w, 16, &Caps::default()).unwrap() {
            CycleAudit::Pass { cycles_checked, .. } => assert_eq!(cycles_checked, 0),
            CycleAudit::Fail { .. } => panic!("trees pass vacuously"),
        }
    }

    #[test]
    fn cycle_enumeration_counts() {
        let triangle = fixtures::graph_instance(3, &[(0, 1), (1, 2), (2, 0)]);
        assert_eq!(simple_cycles(&triangle, 16, 10_000).unwrap().len(), 1);

        let doubled = fixtures::graph_instance(2, &[(0, 1), (1, 0)]);
        let cycles = simple_cycles(&doubled, 16, 10_000).unwrap();
        assert_eq!(cycles.len(), 1);
        assert_eq!(cycles[0].len(), 2);

        let sig = Signature::new(vec![("E", 2)]);
        let selfloop = Instance::new(1, sig, vec![Table::from_rows(2, vec![vec![0, 0]])]);
        let cycles = simple_cycles(&selfloop, 16, 10_000).unwrap();
        assert_eq!(cycles.len(), 1);
        assert_eq!(cycles[0].len(), 1);
    }

    #[test]
    fn width1_none_agrees_with_search_on_horn() {
        let horn = fixtures::horn();
        let u0 = Table::from_rows(1, vec![vec![1]]);
        let u1 = Table::from_rows(1, vec![vec![0], vec![1]]);
        let imp = Table::from_rows(3, vec![vec![0, 1, 2]]);
        let x = Instance::new(3, horn.signature.clone(), vec![u0, u1, imp]);
        let by_width1 = width1_solve(&x, &horn, &horn_and(6)).unwrap();
        let by_search = find_homomorphism(&x, &horn, &PartialAssignment::empty(3)).unwrap();
        assert_eq!(by_width1.is_some(), by_search.is_some());
    }
}
