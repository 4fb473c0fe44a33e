//! Existential-conjunctive formulas, simple interpretations, and the
//! instance-reduction compiler with bidirectional solution translation and
//! degree accounting.
//!
//! A simple construction is a chain of interpretation, homomorphic
//! equivalence, and singleton-expansion steps; each step compiles instances
//! of its target template into instances of its source, and the chain
//! compiler composes the per-step compilers.

use crate::model::{
    encode_tuple, find_homomorphism, is_homomorphism, Assignment, Instance, PartialAssignment,
    Signature, Structure, Table,
};
use crate::{Caps, Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// An existentially quantified conjunction of atoms. Formula variables are
/// indexed with the free variables first: `0..free_count` are free,
/// `free_count..free_count+bound_count` are bound.
///
/// Equality atoms are only admitted in pp mode; simple formulas must leave
/// `equality_atoms` empty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimpleFormula {
    pub free_count: usize,
    pub bound_count: usize,
    /// (relation index, formula variables), over the template's signature.
    pub atoms: Vec<(usize, Vec<usize>)>,
    pub equality_atoms: Vec<(usize, usize)>,
    pub pp_mode: bool,
}

impl SimpleFormula {
    pub fn var_count(&self) -> usize {
        self.free_count + self.bound_count
    }

    pub fn validate(&self, signature: &Signature) -> Result<()> {
        if !self.pp_mode && !self.equality_atoms.is_empty() {
            return Err(Error::MalformedFormula(
                "equality atoms are only permitted in pp mode".into(),
            ));
        }
        for (rel, vars) in &self.atoms {
            let decl = signature
                .relations
                .get(*rel)
                .ok_or_else(|| Error::MalformedFormula(format!("unknown relation {rel}")))?;
            if vars.len() != decl.arity {
                return Err(Error::ArityMismatch(format!(
                    "atom over {} uses {} variables, arity is {}",
                    decl.name,
                    vars.len(),
                    decl.arity
                )));
            }
            if vars.iter().any(|&v| v >= self.var_count()) {
                return Err(Error::MalformedFormula("atom variable out of range".into()));
            }
        }
        if self
            .equality_atoms
            .iter()
            .any(|&(a, b)| a >= self.var_count() || b >= self.var_count())
        {
            return Err(Error::MalformedFormula("equality variable out of range".into()));
        }
        Ok(())
    }

    /// The formula's conjunction viewed as an instance over the template
    /// signature: one variable per (merged) formula variable. Returns the
    /// instance and the formula-variable-to-instance-variable map.
    fn as_instance(&self, signature: &Signature) -> (Instance, Vec<u32>) {
        // merge equality atoms via union-find
        let mut parent: Vec<usize> = (0..self.var_count()).collect();
        fn find(parent: &mut Vec<usize>, mut v: usize) -> usize {
            while parent[v] != v {
                parent[v] = parent[parent[v]];
                v = parent[v];
            }
            v
        }
        for &(a, b) in &self.equality_atoms {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
        let mut class_of = vec![u32::MAX; self.var_count()];
        let mut next = 0u32;
        for v in 0..self.var_count() {
            let root = find(&mut parent, v);
            if class_of[root] == u32::MAX {
                class_of[root] = next;
                next += 1;
            }
            class_of[v] = class_of[root];
        }
        let mut constraints: Vec<Table> =
            signature.relations.iter().map(|r| Table::new(r.arity)).collect();
        for (rel, vars) in &self.atoms {
            let row: Vec<u32> = vars.iter().map(|&v| class_of[v]).collect();
            constraints[*rel].push_row(&row);
        }
        for t in &mut constraints {
            t.canonicalize();
        }
        (
            Instance { variable_count: next, signature: signature.clone(), constraints },
            class_of,
        )
    }
}

/// True iff some assignment of the bound variables satisfies every atom.
pub fn evaluate_formula(s: &Structure, formula: &SimpleFormula, args: &[u32]) -> Result<bool> {
    Ok(formula_witness(s, formula, args)?.is_some())
}

/// Like [`evaluate_formula`] but returns the witness values of the bound
/// variables (the solver's deterministic choice).
pub fn formula_witness(
    s: &Structure,
    formula: &SimpleFormula,
    args: &[u32],
) -> Result<Option<Vec<u32>>> {
    formula.validate(&s.signature)?;
    if args.len() != formula.free_count {
        return Err(Error::ArityMismatch(format!(
            "formula has {} free variables, got {} arguments",
            formula.free_count,
            args.len()
        )));
    }
    let (instance, class_of) = formula.as_instance(&s.signature);
    let mut seed = PartialAssignment::empty(instance.variable_count);
    for (v, &value) in args.iter().enumerate() {
        let class = class_of[v];
        if let Some(prev) = seed.get(class) {
            if prev != value {
                return Ok(None); // merged free variables got distinct values
            }
        }
        seed.set(class, value);
    }
    Ok(find_homomorphism(&instance, s, &seed)?.map(|sol| {
        (0..formula.bound_count)
            .map(|i| sol.values[class_of[formula.free_count + i] as usize] )
            .collect()
    }))
}

/// Evaluates the formula over every argument tuple, as a table.
pub fn formula_table(s: &Structure, formula: &SimpleFormula) -> Result<Table> {
    let k = formula.free_count;
    let mut out = Table::new(k);
    let d = s.domain_size as u64;
    let total = d.pow(k as u32);
    let mut args = vec![0u32; k];
    for raw in 0..total {
        let mut idx = raw;
        for slot in args.iter_mut().rev() {
            *slot = (idx % d) as u32;
            idx /= d;
        }
        if evaluate_formula(s, formula, &args)? {
            out.push_row(&args);
        }
    }
    out.canonicalize();
    Ok(out)
}

/// The orbit of `c` under the endomorphisms of `s` (all automorphisms when
/// `s` is a core), as a set of elements.
pub fn orbit(s: &Structure, c: u32) -> Result<Vec<u32>> {
    let x = s.as_instance();
    let mut out = Vec::new();
    for a in 0..s.domain_size {
        let seed = PartialAssignment::singleton(s.domain_size, c, a);
        if find_homomorphism(&x, s, &seed)?.is_some() {
            out.push(a);
        }
    }
    Ok(out)
}

/// Checks that `s` is a core: every endomorphism is bijective.
pub fn verify_core(s: &Structure, caps: &Caps) -> Result<()> {
    let result = crate::model::find_core(s, caps)?;
    if result.core.domain_size != s.domain_size {
        return Err(Error::NotACore(format!(
            "structure retracts onto {} of its {} elements",
            result.core.domain_size, s.domain_size
        )));
    }
    Ok(())
}

/// The simple formula defining the orbit diagonal (=_c) over a core: two
/// copies of the endomorphism predicate sharing their bound variables, one
/// anchored at each free variable.
pub fn eq_c_formula(s: &Structure, c: u32, caps: &Caps) -> Result<SimpleFormula> {
    verify_core(s, caps)?;
    let d = s.domain_size;
    // bound variable for each element other than c
    let mut slot = vec![usize::MAX; d as usize];
    let mut bound = 0usize;
    for e in 0..d {
        if e != c {
            slot[e as usize] = 2 + bound;
            bound += 1;
        }
    }
    let var_for = |e: u32, anchor: usize| -> usize {
        if e == c {
            anchor
        } else {
            slot[e as usize]
        }
    };
    let mut atoms = Vec::new();
    for anchor in [0usize, 1] {
        for (rel, table) in s.tables.iter().enumerate() {
            for row in table.rows() {
                atoms.push((rel, row.iter().map(|&e| var_for(e, anchor)).collect()));
            }
        }
    }
    Ok(SimpleFormula {
        free_count: 2,
        bound_count: bound,
        atoms,
        equality_atoms: vec![],
        pp_mode: false,
    })
}

/// Outcome of the equation-free simple definition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SimpleDefinition {
    Formula(SimpleFormula),
    /// The relation implies the stated coordinate equation (0-based).
    ImpliesEquation(usize, usize),
    NotPpDefinable,
}

/// Builds an equality-free simple definition of `r` over `s`: free
/// variables stand for the columns of the tuple matrix, bound variables for
/// the remaining elements of D^m, and the atoms are the power-structure
/// constraints. Fails soft when `r` implies an equation or is not
/// pp-definable.
pub fn simple_definition_equation_free(
    s: &Structure,
    r: &Table,
    caps: &Caps,
) -> Result<SimpleDefinition> {
    if let Some((i, j)) = crate::poly::implies_equation(r) {
        return Ok(SimpleDefinition::ImpliesEquation(i, j));
    }
    let m = r.len();
    assert!(m > 0, "cannot define the empty relation");
    if m > caps.pp_tuples {
        return Err(Error::CapExceeded {
            what: "simple definition tuples",
            required: m as u64,
            cap: caps.pp_tuples as u64,
        });
    }
    let k = r.arity();
    let power = crate::model::power(s, m, caps)?;
    // columns of the tuple matrix, as power elements
    let columns: Vec<u32> = (0..k)
        .map(|i| {
            let col: Vec<u32> = r.rows().map(|row| row[i]).collect();
            encode_tuple(&col, s.domain_size)
        })
        .collect();
    let mut var_of = vec![usize::MAX; power.domain_size as usize];
    for (i, &c) in columns.iter().enumerate() {
        var_of[c as usize] = i; // columns are distinct: no implied equations
    }
    let mut bound = 0usize;
    for e in 0..power.domain_size {
        if var_of[e as usize] == usize::MAX {
            var_of[e as usize] = k + bound;
            bound += 1;
        }
    }
    let mut atoms = Vec::new();
    for (rel, table) in power.tables.iter().enumerate() {
        for row in table.rows() {
            atoms.push((rel, row.iter().map(|&e| var_of[e as usize]).collect()));
        }
    }
    let formula = SimpleFormula {
        free_count: k,
        bound_count: bound,
        atoms,
        equality_atoms: vec![],
        pp_mode: false,
    };
    let mut canonical = r.clone();
    canonical.canonicalize();
    if formula_table(s, &formula)? != canonical {
        return Ok(SimpleDefinition::NotPpDefinable);
    }
    Ok(SimpleDefinition::Formula(formula))
}

/// A simple interpretation: the target structure is a quotient of a simply
/// definable subset of a power of the source.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimpleInterpretation {
    /// Power of the source structure being carved up.
    pub dimension: usize,
    /// Defines A, a subset of D^dimension; `free_count == dimension`.
    pub domain_formula: SimpleFormula,
    /// Total surjective map from A onto the target domain.
    pub quotient_map: BTreeMap<Vec<u32>, u32>,
    pub target_domain_size: u32,
    pub target_signature: Signature,
    /// Per target relation: a formula over `arity * dimension` free
    /// variables defining the preimage of the relation.
    pub preimage_formulas: Vec<SimpleFormula>,
}

impl SimpleInterpretation {
    /// The identity interpretation of `s` in itself (n = 1, A = D, trivial
    /// quotient). The domain formula has one vacuous free variable and the
    /// preimage formulas are single atoms.
    pub fn identity(s: &Structure) -> Self {
        let quotient_map = (0..s.domain_size).map(|a| (vec![a], a)).collect();
        SimpleInterpretation {
            dimension: 1,
            domain_formula: SimpleFormula {
                free_count: 1,
                bound_count: 0,
                atoms: vec![],
                equality_atoms: vec![],
                pp_mode: false,
            },
            quotient_map,
            target_domain_size: s.domain_size,
            target_signature: s.signature.clone(),
            preimage_formulas: s
                .signature
                .relations
                .iter()
                .enumerate()
                .map(|(rel, decl)| SimpleFormula {
                    free_count: decl.arity,
                    bound_count: 0,
                    atoms: vec![(rel, (0..decl.arity).collect())],
                    equality_atoms: vec![],
                    pp_mode: false,
                })
                .collect(),
        }
    }

    /// Validates the interpretation over its source structure and returns
    /// the induced target structure. Checks the quotient is total and
    /// surjective and that every preimage formula is saturated (membership
    /// depends only on quotient classes), by enumeration.
    pub fn validate(&self, s: &Structure) -> Result<Structure> {
        if self.domain_formula.free_count != self.dimension {
            return Err(Error::MalformedInterpretation(
                "domain formula arity differs from the dimension".into(),
            ));
        }
        let domain = formula_table(s, &self.domain_formula)?;
        let a_tuples: Vec<Vec<u32>> = domain.rows().map(|r| r.to_vec()).collect();
        if a_tuples.is_empty() {
            return Err(Error::MalformedInterpretation("the domain A is empty".into()));
        }
        // total on A, only on A, surjective
        let mut seen = vec![false; self.target_domain_size as usize];
        for t in &a_tuples {
            match self.quotient_map.get(t) {
                Some(&e) if e < self.target_domain_size => seen[e as usize] = true,
                Some(_) => {
                    return Err(Error::MalformedInterpretation(
                        "quotient value out of range".into(),
                    ))
                }
                None => {
                    return Err(Error::MalformedInterpretation(format!(
                        "quotient map is not total: missing {t:?}"
                    )))
                }
            }
        }
        for key in self.quotient_map.keys() {
            if !domain.contains(key) {
                return Err(Error::MalformedInterpretation(format!(
                    "quotient map defined outside A at {key:?}"
                )));
            }
        }
        if !seen.iter().all(|&b| b) {
            return Err(Error::MalformedInterpretation("quotient map is not onto".into()));
        }
        if self.preimage_formulas.len() != self.target_signature.len() {
            return Err(Error::MalformedInterpretation(
                "one preimage formula per target relation required".into(),
            ));
        }
        // saturation + induced tables
        let mut tables = Vec::new();
        for (decl, formula) in self.target_signature.relations.iter().zip(&self.preimage_formulas)
        {
            let k = decl.arity;
            if formula.free_count != k * self.dimension {
                return Err(Error::MalformedInterpretation(format!(
                    "preimage formula for {} has {} free variables, expected {}",
                    decl.name,
                    formula.free_count,
                    k * self.dimension
                )));
            }
            let mut by_class: BTreeMap<Vec<u32>, bool> = BTreeMap::new();
            let mut table = Table::new(k);
            let mut pick = vec![0usize; k];
            loop {
                let mut args = Vec::with_capacity(formula.free_count);
                let mut class = Vec::with_capacity(k);
                for &p in &pick {
                    args.extend_from_slice(&a_tuples[p]);
                    class.push(self.quotient_map[&a_tuples[p]]);
                }
                let member = evaluate_formula(s, formula, &args)?;
                match by_class.get(&class) {
                    Some(&prev) if prev != member => {
                        return Err(Error::MalformedInterpretation(format!(
                            "preimage of {} is not saturated at class {class:?}",
                            decl.name
                        )));
                    }
                    Some(_) => {}
                    None => {
                        by_class.insert(class.clone(), member);
                        if member {
                            table.push_row(&class);
                        }
                    }
                }
                // next selection
                let mut pos = k;
                let mut done = false;
                loop {
                    if pos == 0 {
                        done = true;
                        break;
                    }
                    pos -= 1;
                    pick[pos] += 1;
                    if pick[pos] < a_tuples.len() {
                        break;
                    }
                    pick[pos] = 0;
                    if pos == 0 {
                        done = true;
                        break;
                    }
                }
                if done {
                    break;
                }
            }
            table.canonicalize();
            tables.push(table);
        }
        Ok(Structure::new(
            self.target_domain_size,
            self.target_signature.clone(),
            tables,
        ))
    }
}

/// Where an output variable of a reduction came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    /// Coordinate `coord` of the variable block standing for source
    /// variable `var`.
    YBlock { var: u32, coord: usize },
    /// Witness variable for the domain formula of source variable `var`.
    ZDomain { var: u32, index: usize },
    /// Witness variable for the preimage formula of a source constraint.
    ZRelation { rel: usize, row: usize, index: usize },
    /// The original variable in the copied part of a singleton expansion.
    XPart { var: u32 },
    /// Element `element` of the template copy hung off source variable
    /// `var` in a singleton expansion.
    CopyOfTemplate { var: u32, element: u32 },
}

/// The audit trail of one compiled reduction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReductionCertificate {
    /// Structural degree multiplier: output occurrences are bounded by
    /// `n_multiplier` times the input occurrences (at least one).
    pub n_multiplier: u32,
    pub provenance: Vec<Provenance>,
    pub notes: Vec<String>,
}

impl ReductionCertificate {
    /// Asserts the degree bound on a concrete compile.
    fn check_degrees(&self, source: &Instance, output: &Instance) -> Result<()> {
        let kappa_in = source.occurrence_counts().into_iter().max().unwrap_or(0).max(1);
        let kappa_out = output.occurrence_counts().into_iter().max().unwrap_or(0);
        if kappa_out > self.n_multiplier * kappa_in {
            return Err(Error::VerificationFailed(format!(
                "degree bound violated: {kappa_out} > {} * {kappa_in}",
                self.n_multiplier
            )));
        }
        Ok(())
    }
}

/// A compiled interpretation step, with everything needed to translate
/// solutions both ways.
#[derive(Debug, Clone)]
pub struct InterpretationReduction {
    pub instance: Instance,
    pub certificate: ReductionCertificate,
    source: Instance,
    interp: SimpleInterpretation,
    /// Per source variable: start of its y-block.
    y_offset: Vec<u32>,
    /// Tuples of A in ascending order, for deterministic preimage choice.
    a_tuples: Vec<Vec<u32>>,
}

/// Compiles an instance of the interpretation's target into an instance of
/// the source structure: a block of `dimension` variables per source
/// variable, witness variables per domain formula and per constraint, and
/// the instantiated atoms.
pub fn reduce_interpretation(
    x: &Instance,
    interp: &SimpleInterpretation,
    s: &Structure,
) -> Result<InterpretationReduction> {
    let target = interp.validate(s)?;
    if x.signature != target.signature {
        return Err(Error::SignatureMismatch(
            "instance signature differs from the interpretation target".into(),
        ));
    }
    let n = interp.dimension;
    let mut provenance = Vec::new();
    let mut y_offset = Vec::with_capacity(x.variable_count as usize);
    let mut next = 0u32;
    for v in 0..x.variable_count {
        y_offset.push(next);
        for coord in 0..n {
            provenance.push(Provenance::YBlock { var: v, coord });
        }
        next += n as u32;
    }
    let mut za_offset = Vec::with_capacity(x.variable_count as usize);
    for v in 0..x.variable_count {
        za_offset.push(next);
        for index in 0..interp.domain_formula.bound_count {
            provenance.push(Provenance::ZDomain { var: v, index });
        }
        next += interp.domain_formula.bound_count as u32;
    }
    let mut zr_offset: BTreeMap<(usize, usize), u32> = BTreeMap::new();
    for (rel, table) in x.constraints.iter().enumerate() {
        for row in 0..table.len() {
            zr_offset.insert((rel, row), next);
            for index in 0..interp.preimage_formulas[rel].bound_count {
                provenance.push(Provenance::ZRelation { rel, row, index });
            }
            next += interp.preimage_formulas[rel].bound_count as u32;
        }
    }

    let mut constraints: Vec<Table> =
        s.signature.relations.iter().map(|r| Table::new(r.arity)).collect();
    let add_atoms =
        |formula: &SimpleFormula, frees: &[u32], bounds_at: u32, constraints: &mut Vec<Table>| {
            for (rel, vars) in &formula.atoms {
                let row: Vec<u32> = vars
                    .iter()
                    .map(|&fv| {
                        if fv < formula.free_count {
                            frees[fv]
                        } else {
                            bounds_at + (fv - formula.free_count) as u32
                        }
                    })
                    .collect();
                constraints[*rel].push_row(&row);
            }
        };
    for v in 0..x.variable_count {
        let frees: Vec<u32> = (0..n as u32).map(|i| y_offset[v as usize] + i).collect();
        add_atoms(&interp.domain_formula, &frees, za_offset[v as usize], &mut constraints);
    }
    for (rel, table) in x.constraints.iter().enumerate() {
        for (row_idx, row) in table.rows().enumerate() {
            let mut frees = Vec::with_capacity(row.len() * n);
            for &v in row {
                frees.extend((0..n as u32).map(|i| y_offset[v as usize] + i));
            }
            add_atoms(
                &interp.preimage_formulas[rel],
                &frees,
                zr_offset[&(rel, row_idx)],
                &mut constraints,
            );
        }
    }
    for t in &mut constraints {
        t.canonicalize();
    }
    let instance = Instance { variable_count: next, signature: s.signature.clone(), constraints };

    // Structural degree multiplier: the worst formula-variable occurrence
    // count in the domain formula plus the worst in any preimage formula.
    let occ_bound = |f: &SimpleFormula| -> u32 {
        let mut occ = vec![0u32; f.var_count()];
        for (_, vars) in &f.atoms {
            for &v in vars {
                occ[v] += 1;
            }
        }
        occ.into_iter().max().unwrap_or(0)
    };
    let n_multiplier = occ_bound(&interp.domain_formula)
        + interp
            .preimage_formulas
            .iter()
            .map(occ_bound)
            .max()
            .unwrap_or(0)
        + 1;
    let certificate = ReductionCertificate {
        n_multiplier,
        provenance,
        notes: vec![format!("interpretation of dimension {n}")],
    };
    certificate.check_degrees(x, &instance)?;

    let domain_table = formula_table(s, &interp.domain_formula)?;
    Ok(InterpretationReduction {
        instance,
        certificate,
        source: x.clone(),
        interp: interp.clone(),
        y_offset,
        a_tuples: domain_table.rows().map(|r| r.to_vec()).collect(),
    })
}

impl InterpretationReduction {
    /// Translates a solution of the source instance into a solution of the
    /// compiled instance, choosing preimages and formula witnesses
    /// deterministically (least first). Both sides are verified.
    pub fn pushforward(&self, g: &Assignment, s: &Structure) -> Result<Assignment> {
        let target = self.interp.validate(s)?;
        if !is_homomorphism(g, &self.source, &target)? {
            return Err(Error::VerificationFailed(
                "pushforward input is not a solution".into(),
            ));
        }
        let n = self.interp.dimension;
        let mut values = vec![0u32; self.instance.variable_count as usize];
        // y-blocks: least preimage tuple of the assigned class
        for v in 0..self.source.variable_count {
            let class = g.get(v);
            let tuple = self
                .a_tuples
                .iter()
                .find(|t| self.interp.quotient_map[*t] == class)
                .expect("quotient map is onto");
            for (i, &a) in tuple.iter().enumerate() {
                values[(self.y_offset[v as usize] + i as u32) as usize] = a;
            }
        }
        // witness variables, via the deterministic solver
        let fill = |formula: &SimpleFormula,
                        frees: Vec<u32>,
                        bounds_at: u32,
                        values: &mut Vec<u32>|
         -> Result<()> {
            let args: Vec<u32> = frees.iter().map(|&fv| values[fv as usize]).collect();
            let witness = formula_witness(s, formula, &args)?.ok_or_else(|| {
                Error::VerificationFailed("formula witness vanished during pushforward".into())
            })?;
            for (i, a) in witness.into_iter().enumerate() {
                values[(bounds_at + i as u32) as usize] = a;
            }
            Ok(())
        };
        // recompute offsets the same way reduce_interpretation laid them out
        let mut next = self.source.variable_count * n as u32;
        let mut za_offset = Vec::with_capacity(self.source.variable_count as usize);
        for _ in 0..self.source.variable_count {
            za_offset.push(next);
            next += self.interp.domain_formula.bound_count as u32;
        }
        for v in 0..self.source.variable_count {
            let frees: Vec<u32> =
                (0..n as u32).map(|i| self.y_offset[v as usize] + i).collect();
            fill(&self.interp.domain_formula, frees, za_offset[v as usize], &mut values)?;
        }
        for (rel, table) in self.source.constraints.iter().enumerate() {
            for row in table.rows() {
                let mut frees = Vec::with_capacity(row.len() * n);
                for &v in row {
                    frees.extend((0..n as u32).map(|i| self.y_offset[v as usize] + i));
                }
                fill(&self.interp.preimage_formulas[rel], frees, next, &mut values)?;
                next += self.interp.preimage_formulas[rel].bound_count as u32;
            }
        }
        let out = Assignment::new(values);
        if !is_homomorphism(&out, &self.instance, s)? {
            return Err(Error::VerificationFailed(
                "pushforward produced a non-solution".into(),
            ));
        }
        Ok(out)
    }

    /// Translates a solution of the compiled instance back: each source
    /// variable reads the quotient class of its y-block. Both sides are
    /// verified.
    pub fn pullback(&self, h: &Assignment, s: &Structure) -> Result<Assignment> {
        if !is_homomorphism(h, &self.instance, s)? {
            return Err(Error::VerificationFailed(
                "pullback input is not a solution".into(),
            ));
        }
        let n = self.interp.dimension;
        let mut values = Vec::with_capacity(self.source.variable_count as usize);
        for v in 0..self.source.variable_count {
            let tuple: Vec<u32> = (0..n as u32)
                .map(|i| h.get(self.y_offset[v as usize] + i))
                .collect();
            let class = self.interp.quotient_map.get(&tuple).ok_or_else(|| {
                Error::VerificationFailed(
                    "pullback hit a y-block outside the interpretation domain".into(),
                )
            })?;
            values.push(*class);
        }
        let out = Assignment::new(values);
        let target = self.interp.validate(s)?;
        if !is_homomorphism(&out, &self.source, &target)? {
            return Err(Error::VerificationFailed(
                "pullback produced a non-solution".into(),
            ));
        }
        Ok(out)
    }
}

/// A compiled singleton-expansion step.
#[derive(Debug, Clone)]
pub struct SingletonReduction {
    pub instance: Instance,
    /// The output template: the base structure extended with the orbit
    /// diagonal relations (=_c) that the construction wires through.
    pub template: Structure,
    pub certificate: ReductionCertificate,
    source: Instance,
    base: Structure,
    element: u32,
    /// Index of the singleton relation in the source signature.
    singleton_rel: usize,
    /// Index of (=_c) relations in the output template, per element c.
    pub eq_rel: Vec<usize>,
}

/// Compiles away one singleton unary relation U_d over a core base: every
/// variable gets its own copy of the base template, variables sharing a
/// relation are linked through the orbit diagonals (=_c) for c != d, and
/// U_d constraints become (=_d) anchors into the copies.
pub fn reduce_singleton_expansion(
    x: &Instance,
    base: &Structure,
    singleton_rel: usize,
    element: u32,
    caps: &Caps,
) -> Result<SingletonReduction> {
    verify_core(base, caps)?;
    // the source signature is the base plus the singleton relation
    let mut expected = base.signature.clone();
    expected.push(x.signature.relations[singleton_rel].name.clone(), 1);
    if x.signature != expected || singleton_rel != base.signature.len() {
        return Err(Error::SignatureMismatch(
            "singleton expansion expects base relations followed by the singleton".into(),
        ));
    }
    let d = base.domain_size;
    // output template: base + (=_c) diagonals (auto-injected when missing)
    let mut template = base.clone();
    let mut eq_rel = Vec::with_capacity(d as usize);
    let mut injected = Vec::new();
    for c in 0..d {
        let name = format!("EQ{c}");
        if let Some(idx) = template.signature.index_of(&name) {
            eq_rel.push(idx);
            continue;
        }
        let orbit = orbit(base, c)?;
        let table = Table::from_rows(2, orbit.iter().map(|&a| vec![a, a]).collect::<Vec<_>>());
        let idx = template.signature.push(name.clone(), 2);
        template.tables.push(table);
        eq_rel.push(idx);
        injected.push(name);
    }

    let n = x.variable_count;
    // variables: the X part, then one template copy per variable
    let copy_var = |v: u32, a: u32| n + v * d + a;
    let mut provenance: Vec<Provenance> = (0..n).map(|v| Provenance::XPart { var: v }).collect();
    for v in 0..n {
        for a in 0..d {
            provenance.push(Provenance::CopyOfTemplate { var: v, element: a });
        }
    }
    let mut out = Instance::empty(n + n * d, template.signature.clone());
    // base relations: the X part plus the per-variable template copies
    for rel in 0..base.signature.len() {
        let mut t = x.constraints[rel].clone();
        for v in 0..n {
            for row in base.tables[rel].rows() {
                let copied: Vec<u32> = row.iter().map(|&a| copy_var(v, a)).collect();
                t.push_row(&copied);
            }
        }
        t.canonicalize();
        out.constraints[rel] = t;
    }
    // (=_c) links between copies of variables sharing a relation
    let mut share_pairs: std::collections::BTreeSet<(u32, u32)> = Default::default();
    for table in &x.constraints[..base.signature.len()] {
        for row in table.rows() {
            for (i, &a) in row.iter().enumerate() {
                for &b in &row[i + 1..] {
                    if a != b {
                        share_pairs.insert((a.min(b), a.max(b)));
                    }
                }
            }
        }
    }
    for c in 0..d {
        if c == element {
            continue;
        }
        for &(a, b) in &share_pairs {
            out.constraints[eq_rel[c as usize]].push_row(&[copy_var(a, c), copy_var(b, c)]);
        }
    }
    // (=_d) anchors for the singleton constraints
    for row in x.constraints[singleton_rel].rows() {
        let v = row[0];
        out.constraints[eq_rel[element as usize]].push_row(&[v, copy_var(v, element)]);
    }
    for t in &mut out.constraints {
        t.canonicalize();
    }

    let max_rel_size = base.tables.iter().map(Table::len).max().unwrap_or(0);
    let certificate = ReductionCertificate {
        n_multiplier: 1 + d + max_rel_size as u32,
        provenance,
        notes: if injected.is_empty() {
            vec!["orbit diagonals already present".into()]
        } else {
            vec![format!("injected orbit diagonals: {}", injected.join(", "))]
        },
    };
    certificate.check_degrees(x, &out)?;
    Ok(SingletonReduction {
        instance: out,
        template,
        certificate,
        source: x.clone(),
        base: base.clone(),
        element,
        singleton_rel,
        eq_rel,
    })
}

impl SingletonReduction {
    fn source_template(&self) -> Structure {
        let mut s = self.base.clone();
        s.signature.push(
            self.source.signature.relations[self.singleton_rel].name.clone(),
            1,
        );
        s.tables.push(Table::from_rows(1, vec![vec![self.element]]));
        s
    }

    /// Extends a solution of the source by the identity on every template
    /// copy.
    pub fn pushforward(&self, g: &Assignment) -> Result<Assignment> {
        let source_template = self.source_template();
        if !is_homomorphism(g, &self.source, &source_template)? {
            return Err(Error::VerificationFailed(
                "pushforward input is not a solution".into(),
            ));
        }
        let d = self.base.domain_size;
        let mut values = g.values.clone();
        for _v in 0..self.source.variable_count {
            for a in 0..d {
                values.push(a);
            }
        }
        let out = Assignment::new(values);
        if !is_homomorphism(&out, &self.instance, &self.template)? {
            return Err(Error::VerificationFailed(
                "pushforward produced a non-solution".into(),
            ));
        }
        Ok(out)
    }

    /// Reads each variable's copy as an automorphism of the base and undoes
    /// it: the translated value is the inverse automorphism applied to the
    /// X-part value.
    pub fn pullback(&self, h: &Assignment) -> Result<Assignment> {
        if !is_homomorphism(h, &self.instance, &self.template)? {
            return Err(Error::VerificationFailed(
                "pullback input is not a solution".into(),
            ));
        }
        let d = self.base.domain_size;
        let n = self.source.variable_count;
        let mut values = Vec::with_capacity(n as usize);
        for v in 0..n {
            let auto: Vec<u32> = (0..d).map(|a| h.get(n + v * d + a)).collect();
            // invert; solutions restrict to automorphisms on each copy
            let mut inverse = vec![u32::MAX; d as usize];
            for (a, &fa) in auto.iter().enumerate() {
                inverse[fa as usize] = a as u32;
            }
            if inverse.iter().any(|&a| a == u32::MAX) {
                return Err(Error::VerificationFailed(
                    "a template copy was not mapped bijectively".into(),
                ));
            }
            values.push(inverse[h.get(v) as usize]);
        }
        let out = Assignment::new(values);
        let source_template = self.source_template();
        if !is_homomorphism(&out, &self.source, &source_template)? {
            return Err(Error::VerificationFailed(
                "pullback produced a non-solution".into(),
            ));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn caps() -> Caps {
        Caps::default()
    }

    #[test]
    fn formula_evaluation_basics() {
        let k2 = fixtures::k(2);
        // single atom E(x, y), no bound variables
        let phi = SimpleFormula {
            free_count: 2,
            bound_count: 0,
            atoms: vec![(0, vec![0, 1])],
            equality_atoms: vec![],
            pp_mode: false,
        };
        assert!(evaluate_formula(&k2, &phi, &[0, 1]).unwrap());
        assert!(!evaluate_formula(&k2, &phi, &[0, 0]).unwrap());
    }

    #[test]
    fn nae_defines_disequality() {
        // NAE(x, x, y) holds iff x != y
        let nae = fixtures::nae();
        let phi = SimpleFormula {
            free_count: 2,
            bound_count: 0,
            atoms: vec![(0, vec![0, 0, 1])],
            equality_atoms: vec![],
            pp_mode: false,
        };
        assert!(evaluate_formula(&nae, &phi, &[0, 1]).unwrap());
        assert!(!evaluate_formula(&nae, &phi, &[0, 0]).unwrap());
    }

    #[test]
    fn unsatisfiable_conjunction_is_false_everywhere() {
        let k2 = fixtures::k(2);
        // E(x, x) is a loop, K2 has none
        let phi = SimpleFormula {
            free_count: 1,
            bound_count: 0,
            atoms: vec![(0, vec![0, 0])],
            equality_atoms: vec![],
            pp_mode: false,
        };
        for a in 0..2 {
            assert!(!evaluate_formula(&k2, &phi, &[a]).unwrap());
        }
    }

    #[test]
    fn eq_c_on_k3_is_the_full_diagonal() {
        let k3 = fixtures::k(3);
        let phi = eq_c_formula(&k3, 0, &caps()).unwrap();
        let table = formula_table(&k3, &phi).unwrap();
        let expected =
            Table::from_rows(2, vec![vec![0, 0], vec![1, 1], vec![2, 2]]);
        assert_eq!(table, expected);
    }

    #[test]
    fn eq_c_on_rigid_core_is_a_point() {
        // directed path 0 -> 1 is a core with trivial automorphisms
        let p = fixtures::digraph(2, &[(0, 1)]);
        let phi = eq_c_formula(&p, 0, &caps()).unwrap();
        let table = formula_table(&p, &phi).unwrap();
        assert_eq!(table, Table::from_rows(2, vec![vec![0, 0]]));
    }

    #[test]
    fn eq_c_matches_orbit_enumeration() {
        for s in [fixtures::k(3), fixtures::directed_cycle(3)] {
            for c in 0..s.domain_size {
                let phi = eq_c_formula(&s, c, &caps()).unwrap();
                let table = formula_table(&s, &phi).unwrap();
                let orbit_table = Table::from_rows(
                    2,
                    orbit(&s, c).unwrap().into_iter().map(|a| vec![a, a]).collect::<Vec<_>>(),
                );
                assert_eq!(table, orbit_table);
            }
        }
    }

    #[test]
    fn eq_c_requires_a_core() {
        let path = fixtures::graph(3, &[(0, 1), (1, 2)]);
        assert!(matches!(eq_c_formula(&path, 0, &caps()), Err(Error::NotACore(_))));
    }

    #[test]
    fn simple_definition_outcomes() {
        let nae = fixtures::nae();
        // a relation of the structure itself
        let own = nae.tables[0].clone();
        match simple_definition_equation_free(&nae, &own, &caps()).unwrap() {
            SimpleDefinition::Formula(phi) => {
                assert_eq!(formula_table(&nae, &phi).unwrap(), own);
            }
            other => panic!("expected a formula, got {other:?}"),
        }

        // disequality over NAE, cross-checked against NAE(x,x,y)
        let neq = Table::from_rows(2, vec![vec![0, 1], vec![1, 0]]);
        match simple_definition_equation_free(&nae, &neq, &caps()).unwrap() {
            SimpleDefinition::Formula(phi) => {
                assert_eq!(formula_table(&nae, &phi).unwrap(), neq);
            }
            other => panic!("expected a formula, got {other:?}"),
        }

        // the diagonal implies an equation
        let diag = Table::from_rows(2, vec![vec![0, 0], vec![1, 1]]);
        assert_eq!(
            simple_definition_equation_free(&nae, &diag, &caps()).unwrap(),
            SimpleDefinition::ImpliesEquation(0, 1)
        );

        // the affine relation is not pp definable in 2SAT
        let affine = Table::from_rows(
            3,
            vec![vec![0, 0, 0], vec![0, 1, 1], vec![1, 0, 1], vec![1, 1, 0]],
        );
        assert_eq!(
            simple_definition_equation_free(&fixtures::twosat(), &affine, &caps()).unwrap(),
            SimpleDefinition::NotPpDefinable
        );
    }

    #[test]
    fn identity_interpretation_round_trip() {
        let k3 = fixtures::k(3);
        let interp = SimpleInterpretation::identity(&k3);
        let target = interp.validate(&k3).unwrap();
        assert_eq!(target, k3);

        let x = fixtures::graph_instance(3, &[(0, 1), (1, 2)]);
        let reduction = reduce_interpretation(&x, &interp, &k3).unwrap();
        // solvable both ways
        let g = crate::model::find_homomorphism(
            &x,
            &k3,
            &PartialAssignment::empty(x.variable_count),
        )
        .unwrap()
        .unwrap();
        let h = reduction.pushforward(&g, &k3).unwrap();
        let back = reduction.pullback(&h, &k3).unwrap();
        assert!(is_homomorphism(&back, &x, &k3).unwrap());
    }

    /// Interpretation of the disequality template ({0,1}, !=) inside NAE
    /// via NAE(x, x, y).
    fn neq_in_nae() -> SimpleInterpretation {
        SimpleInterpretation {
            dimension: 1,
            domain_formula: SimpleFormula {
                free_count: 1,
                bound_count: 0,
                atoms: vec![],
                equality_atoms: vec![],
                pp_mode: false,
            },
            quotient_map: [(vec![0u32], 0u32), (vec![1], 1)].into_iter().collect(),
            target_domain_size: 2,
            target_signature: Signature::new(vec![("NEQ", 2)]),
            preimage_formulas: vec![SimpleFormula {
                free_count: 2,
                bound_count: 0,
                atoms: vec![(0, vec![0, 0, 1])],
                equality_atoms: vec![],
                pp_mode: false,
            }],
        }
    }

    #[test]
    fn five_cycle_compiles_to_unsolvable_nae_instance() {
        let nae = fixtures::nae();
        let interp = neq_in_nae();
        let target = interp.validate(&nae).unwrap();
        assert_eq!(target.tables[0], Table::from_rows(2, vec![vec![0, 1], vec![1, 0]]));

        // a 5-cycle over disequality = odd cycle over K2: unsolvable
        let mut x = Instance::empty(5, target.signature.clone());
        for i in 0..5u32 {
            x.constraints[0].push_row(&[i, (i + 1) % 5]);
        }
        x.constraints[0].canonicalize();
        assert!(crate::model::find_homomorphism(
            &x,
            &target,
            &PartialAssignment::empty(5)
        )
        .unwrap()
        .is_none());

        let reduction = reduce_interpretation(&x, &interp, &nae).unwrap();
        assert!(crate::model::find_homomorphism(
            &reduction.instance,
            &nae,
            &PartialAssignment::empty(reduction.instance.variable_count)
        )
        .unwrap()
        .is_none());
    }

    #[test]
    fn four_cycle_round_trips_through_nae() {
        let nae = fixtures::nae();
        let interp = neq_in_nae();
        let target = interp.validate(&nae).unwrap();
        let mut x = Instance::empty(4, target.signature.clone());
        for i in 0..4u32 {
            x.constraints[0].push_row(&[i, (i + 1) % 4]);
        }
        x.constraints[0].canonicalize();
        let reduction = reduce_interpretation(&x, &interp, &nae).unwrap();
        let g = crate::model::find_homomorphism(&x, &target, &PartialAssignment::empty(4))
            .unwrap()
            .unwrap();
        let h = reduction.pushforward(&g, &nae).unwrap();
        let back = reduction.pullback(&h, &nae).unwrap();
        assert!(is_homomorphism(&back, &x, &target).unwrap());
    }

    #[test]
    fn saturation_is_enforced() {
        // quotient {0,1} -> one class, but the preimage formula separates
        // the classes: validation must fail
        let nae = fixtures::nae();
        let broken = SimpleInterpretation {
            dimension: 1,
            domain_formula: SimpleFormula {
                free_count: 1,
                bound_count: 0,
                atoms: vec![],
                equality_atoms: vec![],
                pp_mode: false,
            },
            quotient_map: [(vec![0u32], 0u32), (vec![1], 0)].into_iter().collect(),
            target_domain_size: 1,
            target_signature: Signature::new(vec![("R", 2)]),
            preimage_formulas: vec![SimpleFormula {
                free_count: 2,
                bound_count: 0,
                atoms: vec![(0, vec![0, 0, 1])],
                equality_atoms: vec![],
                pp_mode: false,
            }],
        };
        assert!(matches!(
            broken.validate(&nae),
            Err(Error::MalformedInterpretation(_))
        ));
    }

    #[test]
    fn singleton_expansion_over_k3() {
        let k3 = fixtures::k(3);
        // instance: an edge x-y with U_0(x)
        let mut sig = k3.signature.clone();
        sig.push("U0", 1);
        let mut x = Instance::empty(2, sig);
        x.constraints[0].push_row(&[0, 1]);
        x.constraints[0].push_row(&[1, 0]);
        x.constraints[0].canonicalize();
        x.constraints[1] = Table::from_rows(1, vec![vec![0]]);

        let reduction = reduce_singleton_expansion(&x, &k3, 1, 0, &caps()).unwrap();
        // the compiled instance is solvable (the source is)
        let h = crate::model::find_homomorphism(
            &reduction.instance,
            &reduction.template,
            &PartialAssignment::empty(reduction.instance.variable_count),
        )
        .unwrap()
        .expect("compiled instance should be solvable");
        let back = reduction.pullback(&h).unwrap();
        // pullback forces x into the orbit of 0 = all of K3... but the
        // singleton constraint itself demands exactly 0 after untwisting
        assert_eq!(back.values[0], 0);

        // push a known solution forward and back
        let g = Assignment::new(vec![0, 2]);
        let fwd = reduction.pushforward(&g).unwrap();
        let round = reduction.pullback(&fwd).unwrap();
        assert_eq!(round.values[0], 0);
        assert_ne!(round.values[0], round.values[1]);
    }

    #[test]
    fn singleton_expansion_unsolvable_source() {
        // x and y adjacent, both pinned to 0: unsolvable over K3+U0.
        // Compile away U0 and check the compiled instance is unsolvable too.
        let k3 = fixtures::k(3);
        let mut sig = k3.signature.clone();
        sig.push("U0", 1);
        let mut x = Instance::empty(2, sig);
        x.constraints[0].push_row(&[0, 1]);
        x.constraints[0].push_row(&[1, 0]);
        x.constraints[0].canonicalize();
        x.constraints[1] = Table::from_rows(1, vec![vec![0], vec![1]]);

        let reduction = reduce_singleton_expansion(&x, &k3, 1, 0, &caps()).unwrap();
        assert!(crate::model::find_homomorphism(
            &reduction.instance,
            &reduction.template,
            &PartialAssignment::empty(reduction.instance.variable_count),
        )
        .unwrap()
        .is_none());
    }

    #[test]
    fn singleton_expansion_without_anchors_keeps_x_part() {
        let k3 = fixtures::k(3);
        let mut sig = k3.signature.clone();
        sig.push("U0", 1);
        let mut x = Instance::empty(2, sig);
        x.constraints[0].push_row(&[0, 1]);
        x.constraints[0].push_row(&[1, 0]);
        x.constraints[0].canonicalize();
        // no U0 constraints at all
        let reduction = reduce_singleton_expansion(&x, &k3, 1, 0, &caps()).unwrap();
        // anchors absent: the (=_0) table carries only share links
        let eq0 = &reduction.instance.constraints[reduction.eq_rel[0]];
        assert!(eq0.rows().all(|r| r[0] >= 2 && r[1] >= 2));
    }

    #[test]
    fn degree_bound_holds_on_compiles() {
        let nae = fixtures::nae();
        let interp = neq_in_nae();
        for edges in [vec![(0u32, 1u32), (1, 2)], vec![(0, 1), (1, 2), (2, 0)]] {
            let n = edges.iter().flat_map(|&(a, b)| [a, b]).max().unwrap() + 1;
            let mut x = Instance::empty(n, interp.target_signature.clone());
            for (a, b) in edges {
                x.constraints[0].push_row(&[a, b]);
            }
            x.constraints[0].canonicalize();
            // check_degrees runs inside reduce_interpretation
            reduce_interpretation(&x, &interp, &nae).unwrap();
        }
    }
}
