//! Acyclic obstructions: tree-shaped unsolvable lifts witnessing
//! arc-inconsistency, and the sharper cycle-gadget lifts that witness
//! cycle-inconsistency of arc-consistent instances.

use crate::consistency::{good_witness, is_acyclic, ClosedPath};
use crate::model::{
    disjoint_union, find_homomorphism, Instance, PartialAssignment, Structure, Table,
};
use crate::{Caps, Error, Result};

/// A structure with a homomorphism onto an instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lift {
    pub instance: Instance,
    /// Lift variable -> target variable.
    pub lift_map: Vec<u32>,
    /// Whether the producer claims the lift is acyclic.
    pub acyclic: bool,
}

/// True iff the lift map is a homomorphism into `x` (and the instance is
/// acyclic whenever the lift claims to be).
pub fn verify_lift(l: &Lift, x: &Instance) -> bool {
    if l.instance.signature != x.signature {
        return false;
    }
    if l.lift_map.len() != l.instance.variable_count as usize {
        return false;
    }
    if l.lift_map.iter().any(|&v| v >= x.variable_count) {
        return false;
    }
    for (table, target) in l.instance.constraints.iter().zip(&x.constraints) {
        for row in table.rows() {
            let image: Vec<u32> = row.iter().map(|&v| l.lift_map[v as usize]).collect();
            if !target.contains(&image) {
                return false;
            }
        }
    }
    !l.acyclic || is_acyclic(&l.instance)
}

/// One tree in the refinement forest: an acyclic instance with a root and a
/// lift map into the refined instance.
#[derive(Debug, Clone)]
pub struct TreeLift {
    pub instance: Instance,
    pub root: u32,
    pub lift_map: Vec<u32>,
}

/// One refinement step: the triple processed and the shrunken value set.
#[derive(Debug, Clone)]
pub struct RefinementStep {
    pub var: u32,
    pub rel: usize,
    pub row: usize,
    pub pos: usize,
    pub values_before: u128,
    pub values_after: u128,
    /// The tree built for `var` at this step.
    pub tree: TreeLift,
}

/// The refinement schedule behind the acyclic obstruction construction.
///
/// Value sets start at the full domain and shrink one least bad triple at a
/// time; alongside each shrink, a tree lift is rebuilt whose root solution
/// set is exactly the current value set.
pub struct Refiner<'a> {
    x: &'a Instance,
    s: &'a Structure,
    caps: &'a Caps,
    values: Vec<u128>,
    trees: Vec<TreeLift>,
    nodes: u64,
}

impl<'a> Refiner<'a> {
    pub fn new(x: &'a Instance, s: &'a Structure, caps: &'a Caps) -> Self {
        let full = if s.domain_size == 128 {
            u128::MAX
        } else {
            (1u128 << s.domain_size) - 1
        };
        let trees = (0..x.variable_count)
            .map(|v| TreeLift {
                instance: Instance::empty(1, x.signature.clone()),
                root: 0,
                lift_map: vec![v],
            })
            .collect();
        Refiner {
            x,
            s,
            caps,
            values: vec![full; x.variable_count as usize],
            trees,
            nodes: x.variable_count as u64,
        }
    }

    pub fn values(&self, var: u32) -> u128 {
        self.values[var as usize]
    }

    pub fn tree(&self, var: u32) -> &TreeLift {
        &self.trees[var as usize]
    }

    /// Least bad triple under the fixed order (variable, relation, tuple,
    /// position): a constraint coordinate whose current value set is not
    /// exactly the projection of the supported template tuples.
    fn least_bad_triple(&self) -> Option<(u32, usize, usize, usize)> {
        let mut best: Option<(u32, usize, usize, usize)> = None;
        for (rel, table) in self.x.constraints.iter().enumerate() {
            for (row_idx, scope) in table.rows().enumerate() {
                for (pos, &var) in scope.iter().enumerate() {
                    let projected = self.project(rel, scope, pos);
                    if projected != self.values[var as usize] {
                        let cand = (var, rel, row_idx, pos);
                        if best.map_or(true, |b| cand < b) {
                            best = Some(cand);
                        }
                    }
                }
            }
        }
        best
    }

    /// pi_pos(R ∩ prod of current value sets).
    fn project(&self, rel: usize, scope: &[u32], pos: usize) -> u128 {
        let mut out = 0u128;
        'rows: for row in self.s.tables[rel].rows() {
            for (j, &value) in row.iter().enumerate() {
                if self.values[scope[j] as usize] & (1u128 << value) == 0 {
                    continue 'rows;
                }
            }
            out |= 1u128 << row[pos];
        }
        out
    }

    /// Runs one refinement step; `None` when no bad triple remains (the
    /// value sets sit at the arc-consistency fixpoint).
    pub fn step(&mut self) -> Result<Option<RefinementStep>> {
        let Some((var, rel, row_idx, pos)) = self.least_bad_triple() else {
            return Ok(None);
        };
        let scope: Vec<u32> = self.x.constraints[rel].row(row_idx).to_vec();
        let before = self.values[var as usize];
        let after = self.project(rel, &scope, pos);

        // Disjoint union of the current trees of the scope, one copy per
        // coordinate, plus the root tuple.
        let mut combined = Instance::empty(0, self.x.signature.clone());
        let mut lift_map: Vec<u32> = Vec::new();
        let mut roots = Vec::with_capacity(scope.len());
        for &coord_var in &scope {
            let t = &self.trees[coord_var as usize];
            let (merged, maps) = disjoint_union(&combined, &t.instance)?;
            combined = merged;
            roots.push(maps.right_offset + t.root);
            lift_map.extend(t.lift_map.iter().copied());
        }
        let root_row: Vec<u32> = roots.clone();
        combined.constraints[rel].push_row(&root_row);
        combined.constraints[rel].canonicalize();
        self.nodes += combined.variable_count as u64;
        if self.nodes > self.caps.obstruction_nodes {
            return Err(Error::CapExceeded {
                what: "obstruction nodes",
                required: self.nodes,
                cap: self.caps.obstruction_nodes,
            });
        }
        let tree = TreeLift {
            instance: combined,
            root: roots[pos],
            lift_map,
        };
        self.values[var as usize] = after;
        self.trees[var as usize] = tree.clone();
        Ok(Some(RefinementStep {
            var,
            rel,
            row: row_idx,
            pos,
            values_before: before,
            values_after: after,
            tree,
        }))
    }
}

/// Builds a verified acyclic unsolvable lift of `x`, or `None` exactly when
/// `x` is arc-consistent.
pub fn unsolvable_acyclic_lift(x: &Instance, s: &Structure, caps: &Caps) -> Result<Option<Lift>> {
    let mut refiner = Refiner::new(x, s, caps);
    while let Some(step) = refiner.step()? {
        if step.values_after == 0 {
            let lift = Lift {
                instance: step.tree.instance,
                lift_map: step.tree.lift_map,
                acyclic: true,
            };
            if !verify_lift(&lift, x) {
                return Err(Error::VerificationFailed("obstruction is not a lift".into()));
            }
            if !is_acyclic(&lift.instance) {
                return Err(Error::VerificationFailed("obstruction is not acyclic".into()));
            }
            let seed = PartialAssignment::empty(lift.instance.variable_count);
            if find_homomorphism(&lift.instance, s, &seed)?.is_some() {
                return Err(Error::VerificationFailed("obstruction is solvable".into()));
            }
            return Ok(Some(lift));
        }
    }
    Ok(None)
}

/// The output of the cycle-gadget construction: an acyclic lift of the
/// (derived-relation-extended) instance that is solvable but admits no
/// solution constant on the distinguished fiber.
#[derive(Debug, Clone)]
pub struct CycleObstruction {
    pub lift: Lift,
    /// The extended template: the original relations plus the materialized
    /// derived relations used by the gadget.
    pub template: Structure,
    /// The lift target: `x` viewed over the extended template, with the
    /// derived-relation constraints induced by the path.
    pub target: Instance,
    /// The path's base variable in the target instance.
    pub distinguished: u32,
    /// Lift variables mapping onto the distinguished variable.
    pub fiber: Vec<u32>,
    /// Names of the derived relations that were materialized.
    pub derived_relations: Vec<String>,
}

/// Builds the Lemma-5.5-style obstruction for an arc-consistent instance
/// and a closed path witnessing cycle-inconsistency: the unary constraint
/// derived from the path is imposed, the acyclic obstruction of the
/// expanded instance is built, and every occurrence of the unary constraint
/// is replaced by an open chain gadget whose far end lands in the fiber of
/// the path's base variable.
pub fn cycle_obstruction_lift(
    x: &Instance,
    s: &Structure,
    path: &ClosedPath,
    caps: &Caps,
) -> Result<CycleObstruction> {
    if path.is_empty() {
        return Err(Error::PathDoesNotWitness("the path has no steps".into()));
    }
    path.validate(x)
        .map_err(|e| Error::PathDoesNotWitness(format!("invalid path: {e}")))?;
    let Some(w) = good_witness(x, s)? else {
        return Err(Error::PathDoesNotWitness("instance is not arc-consistent".into()));
    };
    let base = path.vars[0];

    // Values of the base variable that travel the whole path and return.
    let mut u_p: u128 = 0;
    for a in w.allowed_values(base) {
        if value_returns(path, s, &w, a) {
            u_p |= 1u128 << a;
        }
    }

    // Impose the path constraint and require arc-consistency to break.
    let mut s_up = s.clone();
    let up_rel = s_up.signature.push("UP", 1);
    let mut up_table = Table::new(1);
    let mut bits = u_p;
    while bits != 0 {
        up_table.push_row(&[bits.trailing_zeros()]);
        bits &= bits - 1;
    }
    up_table.canonicalize();
    s_up.tables.push(up_table);
    let mut x_up = x.clone();
    x_up.signature = s_up.signature.clone();
    x_up.constraints.push(Table::from_rows(1, vec![vec![base]]));
    if good_witness(&x_up, &s_up)?.is_some() {
        return Err(Error::PathDoesNotWitness(
            "imposing the path constraint leaves the instance arc-consistent".into(),
        ));
    }
    let y = unsolvable_acyclic_lift(&x_up, &s_up, caps)?
        .expect("arc-inconsistent instance must have an obstruction");

    // Extended template: base relations + step projections + witness sets.
    let mut template = s.clone();
    let mut derived_relations = Vec::new();
    let mut step_rel = Vec::with_capacity(path.steps.len());
    for (i, step) in path.steps.iter().enumerate() {
        let name = format!(
            "P{}_{}_{}_{}",
            i, s.signature.relations[step.rel].name, step.from_pos, step.to_pos
        );
        let mut t = Table::new(2);
        for row in s.tables[step.rel].rows() {
            t.push_row(&[row[step.from_pos], row[step.to_pos]]);
        }
        t.canonicalize();
        let idx = template.signature.push(name.clone(), 1 + 1);
        template.tables.push(t);
        derived_relations.push(name);
        step_rel.push(idx);
    }
    let mut witness_rel = std::collections::BTreeMap::new();
    for &v in &path.vars {
        if witness_rel.contains_key(&v) {
            continue;
        }
        let name = format!("W{v}");
        let mut t = Table::new(1);
        for a in w.allowed_values(v) {
            t.push_row(&[a]);
        }
        let idx = template.signature.push(name.clone(), 1);
        template.tables.push(t);
        derived_relations.push(name);
        witness_rel.insert(v, idx);
    }

    // The lift target: x plus the induced derived constraints.
    let mut target = Instance::empty(x.variable_count, template.signature.clone());
    for (i, t) in x.constraints.iter().enumerate() {
        target.constraints[i] = t.clone();
    }
    for (i, _step) in path.steps.iter().enumerate() {
        target.constraints[step_rel[i]].push_row(&[path.vars[i], path.vars[i + 1]]);
        target.constraints[step_rel[i]].canonicalize();
    }
    for (&v, &rel) in &witness_rel {
        target.constraints[rel] = Table::from_rows(1, vec![vec![v]]);
    }

    // Rebuild Y over the extended signature, dropping UP constraints and
    // hanging an open chain off every variable they touched.
    let mut inst = Instance::empty(y.instance.variable_count, template.signature.clone());
    for (i, t) in y.instance.constraints.iter().enumerate() {
        if i != up_rel {
            inst.constraints[i] = t.clone();
        }
    }
    let mut lift_map = y.lift_map.clone();
    let up_rows: Vec<u32> = y.instance.constraints[up_rel]
        .rows()
        .map(|r| r[0])
        .collect();
    for &yvar in &up_rows {
        // chain z_2, ..., z_{n_steps + 1}; the last one maps to the base
        let mut prev = yvar;
        inst.constraints[witness_rel[&path.vars[0]]].push_row(&[yvar]);
        for (k, _) in path.steps.iter().enumerate() {
            let z = inst.variable_count;
            inst.variable_count += 1;
            lift_map.push(path.vars[k + 1]);
            inst.constraints[step_rel[k]].push_row(&[prev, z]);
            inst.constraints[witness_rel[&path.vars[k + 1]]].push_row(&[z]);
            prev = z;
        }
    }
    for t in &mut inst.constraints {
        t.canonicalize();
    }
    let lift = Lift { instance: inst, lift_map, acyclic: true };

    // Verification: acyclic lift, solvable, and no solution constant on the
    // fiber of the base variable.
    if !verify_lift(&lift, &target) {
        return Err(Error::VerificationFailed("cycle gadget is not a lift".into()));
    }
    if !is_acyclic(&lift.instance) {
        return Err(Error::VerificationFailed("cycle gadget is not acyclic".into()));
    }
    let empty = PartialAssignment::empty(lift.instance.variable_count);
    if find_homomorphism(&lift.instance, &template, &empty)?.is_none() {
        return Err(Error::VerificationFailed("cycle gadget is unsolvable".into()));
    }
    let fiber: Vec<u32> = lift_map_fiber(&lift, base);
    for a in 0..template.domain_size {
        let mut seed = PartialAssignment::empty(lift.instance.variable_count);
        for &v in &fiber {
            seed.set(v, a);
        }
        if find_homomorphism(&lift.instance, &template, &seed)?.is_some() {
            return Err(Error::VerificationFailed(format!(
                "a solution constant on the fiber (value {a}) exists"
            )));
        }
    }
    Ok(CycleObstruction {
        lift,
        template,
        target,
        distinguished: base,
        fiber,
        derived_relations,
    })
}

fn lift_map_fiber(l: &Lift, target_var: u32) -> Vec<u32> {
    l.lift_map
        .iter()
        .enumerate()
        .filter_map(|(i, &v)| (v == target_var).then_some(i as u32))
        .collect()
}

/// True iff value `a` can travel the closed path and return to itself.
fn value_returns(
    path: &ClosedPath,
    s: &Structure,
    w: &crate::consistency::Witness,
    a: u32,
) -> bool {
    let mut reach: u128 = 1u128 << a;
    for (i, step) in path.steps.iter().enumerate() {
        let mut next: u128 = 0;
        for row in s.tables[step.rel].rows() {
            if reach & (1u128 << row[step.from_pos]) != 0 {
                next |= 1u128 << row[step.to_pos];
            }
        }
        reach = next & w.allowed_mask(path.vars[i + 1]);
        if reach == 0 {
            return false;
        }
    }
    reach & (1u128 << a) != 0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consistency::simple_cycles;
    use crate::fixtures;
    use crate::model::{project_solutions, Signature};

    fn caps() -> Caps {
        Caps::default()
    }

    #[test]
    fn arc_consistent_instances_have_no_obstruction() {
        let k2 = fixtures::k(2);
        let triangle = fixtures::graph_instance(3, &[(0, 1), (1, 2), (2, 0)]);
        assert!(unsolvable_acyclic_lift(&triangle, &k2, &caps()).unwrap().is_none());
    }

    /// Template: K2 plus both singleton unaries. An edge whose endpoints are
    /// pinned to the same color is arc-inconsistent.
    fn pinned_edge() -> (Structure, Instance) {
        let s = fixtures::with_singletons(&fixtures::k(2));
        // x pinned to 0 via S0, y pinned to 0 via S0, edge x-y
        let mut x = Instance::empty(2, s.signature.clone());
        x.constraints[0].push_row(&[0, 1]);
        x.constraints[1] = Table::from_rows(1, vec![vec![0], vec![1]]);
        x.constraints[0].canonicalize();
        (s, x)
    }

    #[test]
    fn pinned_edge_yields_a_tree_obstruction() {
        let (s, x) = pinned_edge();
        let lift = unsolvable_acyclic_lift(&x, &s, &caps()).unwrap().unwrap();
        assert!(verify_lift(&lift, &x));
        assert!(is_acyclic(&lift.instance));
        let seed = PartialAssignment::empty(lift.instance.variable_count);
        assert!(find_homomorphism(&lift.instance, &s, &seed).unwrap().is_none());
    }

    #[test]
    fn refinement_tracks_root_solution_sets() {
        let (s, x) = pinned_edge();
        let caps = caps();
        let mut refiner = Refiner::new(&x, &s, &caps);
        loop {
            let Some(step) = refiner.step().unwrap() else { break };
            // the proof invariant: solutions of the tree restrict at the
            // root to exactly the refined value set
            let tree = &step.tree;
            let mut set: u128 = 0;
            if tree.instance.variable_count > 0 {
                for row in project_solutions(&tree.instance, &s, &[tree.root]).unwrap() {
                    set |= 1u128 << row[0];
                }
            }
            assert_eq!(set, step.values_after, "root value set drifted");
            if step.values_after == 0 {
                break;
            }
        }
    }

    #[test]
    fn obstruction_agrees_with_good_witness_at_desk_scale() {
        let k2 = fixtures::k(2);
        let s = fixtures::with_singletons(&k2);
        // a few handmade instances over K2 with singletons
        let mut cases = Vec::new();
        for pin_a in 0..2u32 {
            for pin_b in 0..2u32 {
                let mut x = Instance::empty(3, s.signature.clone());
                x.constraints[0] = Table::from_rows(2, vec![vec![0, 1], vec![1, 2]]);
                x.constraints[1 + pin_a as usize].push_row(&[0]);
                x.constraints[1 + pin_b as usize].push_row(&[2]);
                for t in &mut x.constraints {
                    t.canonicalize();
                }
                cases.push(x);
            }
        }
        for x in cases {
            let good = good_witness(&x, &s).unwrap().is_some();
            let lift = unsolvable_acyclic_lift(&x, &s, &caps()).unwrap();
            assert_eq!(good, lift.is_none());
            if let Some(l) = lift {
                assert!(verify_lift(&l, &x));
                let seed = PartialAssignment::empty(l.instance.variable_count);
                assert!(find_homomorphism(&l.instance, &s, &seed).unwrap().is_none());
            }
        }
    }

    #[test]
    fn identity_lift_verifies() {
        let x = fixtures::graph_instance(3, &[(0, 1), (1, 2)]);
        let l = Lift {
            instance: x.clone(),
            lift_map: vec![0, 1, 2],
            acyclic: true,
        };
        assert!(verify_lift(&l, &x));

        let bad = Lift {
            instance: fixtures::graph_instance(2, &[(0, 1)]),
            lift_map: vec![0, 0],
            acyclic: false,
        };
        assert!(!verify_lift(&bad, &x));
    }

    #[test]
    fn triangle_cycle_gadget() {
        let k2 = fixtures::k(2);
        let triangle = fixtures::graph_instance(3, &[(0, 1), (1, 2), (2, 0)]);
        let cycles = simple_cycles(&triangle, 8, 1000).unwrap();
        assert_eq!(cycles.len(), 1);
        let obstruction = cycle_obstruction_lift(&triangle, &k2, &cycles[0], &caps()).unwrap();

        // acyclic and solvable, but never constant on the fiber
        assert!(is_acyclic(&obstruction.lift.instance));
        let n = obstruction.lift.instance.variable_count;
        let any = find_homomorphism(
            &obstruction.lift.instance,
            &obstruction.template,
            &PartialAssignment::empty(n),
        )
        .unwrap();
        assert!(any.is_some());
        // exhaustive check over all 2-colorings of the gadget
        let fiber: std::collections::BTreeSet<u32> =
            obstruction.fiber.iter().copied().collect();
        assert!(!fiber.is_empty());
        let mut constant_solutions = 0u32;
        for raw in 0u64..(1 << n) {
            let values: Vec<u32> = (0..n).map(|i| ((raw >> i) & 1) as u32).collect();
            let asg = crate::model::Assignment::new(values.clone());
            if crate::model::is_homomorphism(&asg, &obstruction.lift.instance, &obstruction.template)
                .unwrap()
            {
                let first = values[*fiber.iter().next().unwrap() as usize];
                if fiber.iter().all(|&v| values[v as usize] == first) {
                    constant_solutions += 1;
                }
            }
        }
        assert_eq!(constant_solutions, 0);
    }

    #[test]
    fn square_path_is_rejected() {
        let k2 = fixtures::k(2);
        let square = fixtures::graph_instance(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]);
        let cycles = simple_cycles(&square, 8, 1000).unwrap();
        assert_eq!(cycles.len(), 1);
        let err = cycle_obstruction_lift(&square, &k2, &cycles[0], &caps()).unwrap_err();
        assert!(matches!(err, Error::PathDoesNotWitness(_)));
    }

    #[test]
    fn empty_path_is_rejected() {
        let k2 = fixtures::k(2);
        let x = fixtures::graph_instance(1, &[]);
        let degenerate = ClosedPath { vars: vec![0], steps: vec![] };
        let err = cycle_obstruction_lift(&x, &k2, &degenerate, &caps()).unwrap_err();
        assert!(matches!(err, Error::PathDoesNotWitness(_)));
    }

    #[test]
    fn determinism() {
        let (s, x) = pinned_edge();
        let a = unsolvable_acyclic_lift(&x, &s, &caps()).unwrap().unwrap();
        let b = unsolvable_acyclic_lift(&x, &s, &caps()).unwrap().unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn obstruction_respects_node_cap() {
        let (s, x) = pinned_edge();
        let tight = Caps { obstruction_nodes: 2, ..Caps::default() };
        assert!(matches!(
            unsolvable_acyclic_lift(&x, &s, &tight),
            Err(Error::CapExceeded { what: "obstruction nodes", .. })
        ));
    }

    #[test]
    fn lift_serialization_shape() {
        // lifts carry plain instances; the format layer adds a map section
        let sig = Signature::new(vec![("E", 2)]);
        let l = Lift {
            instance: Instance::empty(2, sig),
            lift_map: vec![0, 0],
            acyclic: true,
        };
        assert_eq!(l.lift_map.len(), 2);
    }
}
