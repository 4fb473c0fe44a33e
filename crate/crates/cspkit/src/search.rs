//! Backtracking homomorphism search with generalized arc-consistency.
//!
//! Domains are u128 bitmasks, which caps solvable templates at 128 elements;
//! everything in this crate stays far below that. The search maintains arc
//! consistency after every assignment and is fully deterministic: variables
//! are chosen by minimum remaining values with ties broken toward the least
//! id, values in ascending order.

use crate::model::{Instance, PartialAssignment, Structure};
use crate::{Error, Result};

const MAX_SOLVER_DOMAIN: u32 = 128;

/// One constraint occurrence: a relation index plus a scope slice.
struct Constraint {
    rel: u32,
    scope_start: u32,
    scope_len: u32,
}

pub(crate) struct Problem {
    num_vars: usize,
    domain_size: u32,
    full_mask: u128,
    constraints: Vec<Constraint>,
    scopes: Vec<u32>,
    /// Flattened template rows per relation.
    rows: Vec<Vec<u32>>,
    arity: Vec<usize>,
    /// CSR adjacency: constraints touching each variable.
    var_cons_off: Vec<u32>,
    var_cons: Vec<u32>,
}

impl Problem {
    pub(crate) fn new(x: &Instance, s: &Structure) -> Result<Problem> {
        if s.domain_size > MAX_SOLVER_DOMAIN {
            return Err(Error::CapExceeded {
                what: "solver domain size",
                required: s.domain_size as u64,
                cap: MAX_SOLVER_DOMAIN as u64,
            });
        }
        let num_vars = x.variable_count as usize;
        let mut constraints = Vec::new();
        let mut scopes = Vec::new();
        let mut degree = vec![0u32; num_vars];
        for (rel, table) in x.constraints.iter().enumerate() {
            for row in table.rows() {
                constraints.push(Constraint {
                    rel: rel as u32,
                    scope_start: scopes.len() as u32,
                    scope_len: row.len() as u32,
                });
                scopes.extend_from_slice(row);
                for &v in row {
                    degree[v as usize] += 1;
                }
            }
        }
        let mut var_cons_off = vec![0u32; num_vars + 1];
        for v in 0..num_vars {
            var_cons_off[v + 1] = var_cons_off[v] + degree[v];
        }
        let mut cursor = var_cons_off.clone();
        let mut var_cons = vec![0u32; var_cons_off[num_vars] as usize];
        for (ci, c) in constraints.iter().enumerate() {
            let scope =
                &scopes[c.scope_start as usize..(c.scope_start + c.scope_len) as usize];
            for &v in scope {
                var_cons[cursor[v as usize] as usize] = ci as u32;
                cursor[v as usize] += 1;
            }
        }
        let full_mask = if s.domain_size == 128 {
            u128::MAX
        } else {
            (1u128 << s.domain_size) - 1
        };
        Ok(Problem {
            num_vars,
            domain_size: s.domain_size,
            full_mask,
            constraints,
            scopes,
            rows: s.tables.iter().map(|t| t.rows().flatten().copied().collect()).collect(),
            arity: s.tables.iter().map(|t| t.arity()).collect(),
            var_cons_off,
            var_cons,
        })
    }

    pub(crate) fn full_domains(&self) -> Vec<u128> {
        vec![self.full_mask; self.num_vars]
    }

    pub(crate) fn seed_domains(&self, seed: &PartialAssignment) -> Vec<u128> {
        let mut domains = self.full_domains();
        for (var, value) in seed.iter_bound() {
            domains[var as usize] &= 1u128 << value;
        }
        domains
    }

    /// Arc-consistency closure of the given domains. Empty domains are
    /// propagated, not treated as failures.
    pub(crate) fn ac_fixpoint(&self, domains: Vec<u128>) -> Vec<u128> {
        let mut se = Searcher::new(self, domains);
        se.enqueue_all();
        se.propagate(None);
        se.domains
    }

    /// Like [`Problem::ac_fixpoint`] but revising constraints in the order
    /// given by `schedule` first; the fixpoint is the same regardless.
    pub(crate) fn ac_fixpoint_scheduled(&self, domains: Vec<u128>, schedule: &[u32]) -> Vec<u128> {
        let mut se = Searcher::new(self, domains);
        for &c in schedule {
            se.enqueue(c);
        }
        se.propagate(None);
        se.enqueue_all();
        se.propagate(None);
        se.domains
    }

    pub(crate) fn solve_one(&self, seed: &PartialAssignment) -> Option<Vec<u32>> {
        let mut budget = u64::MAX;
        self.solve_with_budget(self.seed_domains(seed), &mut budget)
            .expect("unlimited budget cannot run out")
    }

    /// Search under explicit per-variable allowed masks and a node budget;
    /// `Err(())` reports budget exhaustion.
    pub(crate) fn solve_masked(
        &self,
        allowed: &[u128],
        budget: &mut u64,
    ) -> std::result::Result<Option<Vec<u32>>, ()> {
        let mut domains = self.full_domains();
        for (d, &m) in domains.iter_mut().zip(allowed) {
            *d &= m;
        }
        self.solve_with_budget(domains, budget)
    }

    fn solve_with_budget(
        &self,
        domains: Vec<u128>,
        budget: &mut u64,
    ) -> std::result::Result<Option<Vec<u32>>, ()> {
        let mut se = Searcher::new(self, domains);
        se.enqueue_all();
        if !se.propagate(Some(&mut Vec::new())) {
            return Ok(None);
        }
        if se.dfs(budget)? {
            Ok(Some(se.domains.iter().map(|d| d.trailing_zeros()).collect()))
        } else {
            Ok(None)
        }
    }
}

/// Mutable search state: domains plus reusable propagation workspaces.
struct Searcher<'p> {
    p: &'p Problem,
    domains: Vec<u128>,
    queued: Vec<bool>,
    dirty: Vec<u32>,
    supported: Vec<u128>,
    changed: Vec<u32>,
}

impl<'p> Searcher<'p> {
    fn new(p: &'p Problem, domains: Vec<u128>) -> Self {
        Searcher {
            p,
            domains,
            queued: vec![false; p.constraints.len()],
            dirty: Vec::new(),
            supported: Vec::new(),
            changed: Vec::new(),
        }
    }

    fn enqueue(&mut self, ci: u32) {
        if !self.queued[ci as usize] {
            self.queued[ci as usize] = true;
            self.dirty.push(ci);
        }
    }

    fn enqueue_all(&mut self) {
        for ci in 0..self.p.constraints.len() as u32 {
            self.enqueue(ci);
        }
    }

    fn enqueue_var(&mut self, v: u32, except: Option<u32>) {
        let lo = self.p.var_cons_off[v as usize] as usize;
        let hi = self.p.var_cons_off[v as usize + 1] as usize;
        for i in lo..hi {
            let other = self.p.var_cons[i];
            if Some(other) != except {
                self.enqueue(other);
            }
        }
    }

    /// Runs the queued revisions to fixpoint. With a trail, overwritten
    /// domains are recorded and `false` is returned as soon as a domain
    /// wipes out; without one, wipeouts keep propagating.
    fn propagate(&mut self, mut trail: Option<&mut Vec<(u32, u128)>>) -> bool {
        while let Some(ci) = self.dirty.pop() {
            self.queued[ci as usize] = false;
            let c = &self.p.constraints[ci as usize];
            let scope_range = c.scope_start as usize..(c.scope_start + c.scope_len) as usize;
            let arity = self.p.arity[c.rel as usize];
            let rows = &self.p.rows[c.rel as usize];
            self.supported.clear();
            self.supported.resize(arity, 0u128);
            'rows: for row in rows.chunks_exact(arity.max(1)) {
                for (i, &value) in row.iter().enumerate() {
                    let v = self.p.scopes[scope_range.start + i];
                    if self.domains[v as usize] & (1u128 << value) == 0 {
                        continue 'rows;
                    }
                }
                for (i, &value) in row.iter().enumerate() {
                    self.supported[i] |= 1u128 << value;
                }
            }
            self.changed.clear();
            for i in 0..arity {
                let v = self.p.scopes[scope_range.start + i];
                let new = self.domains[v as usize] & self.supported[i];
                if new != self.domains[v as usize] {
                    if let Some(t) = trail.as_deref_mut() {
                        t.push((v, self.domains[v as usize]));
                    }
                    self.domains[v as usize] = new;
                    if new == 0 && trail.is_some() {
                        return false;
                    }
                    self.changed.push(v);
                }
            }
            let changed = std::mem::take(&mut self.changed);
            for &v in &changed {
                self.enqueue_var(v, Some(ci));
            }
            self.changed = changed;
        }
        true
    }

    fn clear_queue(&mut self) {
        while let Some(ci) = self.dirty.pop() {
            self.queued[ci as usize] = false;
        }
    }

    /// Minimum-remaining-values variable, ties toward the least id; `None`
    /// when every domain is a singleton (a full consistent assignment, since
    /// the domains sit at an arc-consistent fixpoint).
    fn pick_var(&self) -> Option<u32> {
        let mut best: Option<(u32, u32)> = None;
        for (v, &d) in self.domains.iter().enumerate() {
            let count = d.count_ones();
            if count > 1 {
                match best {
                    Some((c, _)) if c <= count => {}
                    _ => best = Some((count, v as u32)),
                }
            }
        }
        best.map(|(_, v)| v)
    }

    /// Iterative MAC search; the explicit stack keeps indicator-sized
    /// instances from overflowing the call stack.
    fn dfs(&mut self, budget: &mut u64) -> std::result::Result<bool, ()> {
        struct Frame {
            var: u32,
            candidates: u128,
            next_value: u32,
            mark: usize,
        }
        let mut frames: Vec<Frame> = Vec::new();
        let mut trail: Vec<(u32, u128)> = Vec::new();
        'descend: loop {
            if *budget == 0 {
                return Err(());
            }
            *budget -= 1;
            let Some(var) = self.pick_var() else {
                return Ok(true);
            };
            frames.push(Frame {
                var,
                candidates: self.domains[var as usize],
                next_value: 0,
                mark: trail.len(),
            });
            'values: loop {
                let top = frames.len() - 1;
                let (var, candidates, mark) =
                    (frames[top].var, frames[top].candidates, frames[top].mark);
                let mut chosen = None;
                for value in frames[top].next_value..self.p.domain_size {
                    if candidates & (1u128 << value) != 0 {
                        chosen = Some(value);
                        break;
                    }
                }
                let Some(value) = chosen else {
                    while trail.len() > mark {
                        let (v, old) = trail.pop().unwrap();
                        self.domains[v as usize] = old;
                    }
                    frames.pop();
                    if frames.is_empty() {
                        return Ok(false);
                    }
                    continue 'values;
                };
                frames[top].next_value = value + 1;
                while trail.len() > mark {
                    let (v, old) = trail.pop().unwrap();
                    self.domains[v as usize] = old;
                }
                trail.push((var, self.domains[var as usize]));
                self.domains[var as usize] = 1u128 << value;
                self.enqueue_var(var, None);
                if self.propagate(Some(&mut trail)) {
                    continue 'descend;
                }
                self.clear_queue();
            }
        }
    }
}
