//! Polymorphism search via the indicator construction, height-1 identity
//! systems, and the pp-definability oracle.
//!
//! A polymorphism of arity n is a homomorphism from the n-th categorical
//! power back into the structure. Searching for one that satisfies a system
//! of height-1 identities reduces to solving a single instance: one variable
//! per argument tuple per function symbol, with variables merged along the
//! identities and constraints inherited from the power structure.

use crate::model::{decode_tuple, encode_tuple, Instance, PartialAssignment, Structure, Table};
use crate::{Caps, Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// A finitary operation on `0..domain_size`, stored as a dense lookup table
/// in big-endian mixed-radix order (the first argument is most significant).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Operation {
    pub domain_size: u32,
    pub arity: usize,
    pub table: Vec<u32>,
}

impl Operation {
    pub fn from_fn(domain_size: u32, arity: usize, f: impl Fn(&[u32]) -> u32) -> Self {
        let size = (domain_size as u64).pow(arity as u32) as usize;
        let mut table = Vec::with_capacity(size);
        for idx in 0..size {
            let args = decode_tuple(idx as u32, domain_size, arity);
            table.push(f(&args));
        }
        Operation { domain_size, arity, table }
    }

    pub fn apply(&self, args: &[u32]) -> u32 {
        debug_assert_eq!(args.len(), self.arity);
        self.table[encode_tuple(args, self.domain_size) as usize]
    }

    /// The i-th projection of the given arity (0-based).
    pub fn projection(domain_size: u32, arity: usize, i: usize) -> Self {
        Operation::from_fn(domain_size, arity, |args| args[i])
    }

    /// Unary constant map.
    pub fn constant(domain_size: u32, value: u32) -> Self {
        Operation::from_fn(domain_size, 1, |_| value)
    }

    /// Binary minimum (Boolean AND on domain 2).
    pub fn min2(domain_size: u32) -> Self {
        Operation::from_fn(domain_size, 2, |a| a[0].min(a[1]))
    }

    /// Binary maximum (Boolean OR on domain 2).
    pub fn max2(domain_size: u32) -> Self {
        Operation::from_fn(domain_size, 2, |a| a[0].max(a[1]))
    }

    /// n-ary minimum; iterated AND on the Boolean domain.
    pub fn min_n(domain_size: u32, arity: usize) -> Self {
        Operation::from_fn(domain_size, arity, |a| *a.iter().min().unwrap())
    }

    /// Boolean minority x ⊕ y ⊕ z.
    pub fn minority3() -> Self {
        Operation::from_fn(2, 3, |a| a[0] ^ a[1] ^ a[2])
    }

    /// The dual discriminator: the repeated value among x, y, z if there is
    /// one, and x otherwise. On the Boolean domain this is the majority.
    pub fn dual_discriminator(domain_size: u32) -> Self {
        Operation::from_fn(domain_size, 3, |a| {
            if a[1] == a[2] {
                a[1]
            } else {
                a[0]
            }
        })
    }

    /// The binary rock-paper-scissors operation on {r, p, s} = {0, 1, 2}:
    /// the winner of the throw.
    pub fn rps_star() -> Self {
        const TABLE: [[u32; 3]; 3] = [[0, 1, 0], [1, 1, 2], [0, 2, 2]];
        Operation::from_fn(3, 2, |a| TABLE[a[0] as usize][a[1] as usize])
    }

    /// True iff the table depends only on the set of arguments.
    pub fn is_totally_symmetric(&self) -> bool {
        let mut by_set: BTreeMap<u64, u32> = BTreeMap::new();
        for (idx, &out) in self.table.iter().enumerate() {
            let args = decode_tuple(idx as u32, self.domain_size, self.arity);
            let mask: u64 = args.iter().fold(0, |m, &a| m | (1u64 << a));
            match by_set.get(&mask) {
                Some(&prev) if prev != out => return false,
                Some(_) => {}
                None => {
                    by_set.insert(mask, out);
                }
            }
        }
        true
    }
}

/// True iff, for every relation of `s` and every arity-row selection of its
/// tuples, applying `op` columnwise lands back in the relation.
pub fn preserves(op: &Operation, s: &Structure) -> Result<bool> {
    if op.domain_size != s.domain_size {
        return Err(Error::DomainMismatch { op: op.domain_size, structure: s.domain_size });
    }
    let n = op.arity;
    for table in &s.tables {
        let k = table.arity();
        let rows: Vec<&[u32]> = table.rows().collect();
        if rows.is_empty() {
            continue;
        }
        let mut pick = vec![0usize; n];
        let mut column = vec![0u32; n];
        let mut image = vec![0u32; k];
        'selections: loop {
            for (i, slot) in image.iter_mut().enumerate() {
                for (j, &p) in pick.iter().enumerate() {
                    column[j] = rows[p][i];
                }
                *slot = op.apply(&column);
            }
            if !table.contains(&image) {
                return Ok(false);
            }
            let mut pos = n;
            loop {
                if pos == 0 {
                    break 'selections;
                }
                pos -= 1;
                pick[pos] += 1;
                if pick[pos] < rows.len() {
                    break;
                }
                pick[pos] = 0;
                if pos == 0 {
                    break 'selections;
                }
            }
        }
    }
    Ok(true)
}

/// A term with a single function symbol applied to abstract variables.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlatTerm {
    pub symbol: usize,
    pub args: Vec<usize>,
}

/// A system of height-1 identities over declared function symbols.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdentitySystem {
    /// Function symbols with their arities.
    pub symbols: Vec<(String, usize)>,
    /// Number of abstract variables shared by the equations.
    pub var_count: usize,
    pub equations: Vec<(FlatTerm, FlatTerm)>,
}

impl IdentitySystem {
    pub fn validate(&self) -> Result<()> {
        for (lhs, rhs) in &self.equations {
            for t in [lhs, rhs] {
                let (_, arity) = self
                    .symbols
                    .get(t.symbol)
                    .ok_or_else(|| Error::MalformedFormula("undeclared symbol".into()))?;
                if t.args.len() != *arity {
                    return Err(Error::ArityMismatch(format!(
                        "term uses {} arguments for a {}-ary symbol",
                        t.args.len(),
                        arity
                    )));
                }
                if t.args.iter().any(|&v| v >= self.var_count) {
                    return Err(Error::MalformedFormula(
                        "abstract variable out of range".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// A single symbol of the given arity and no equations.
    pub fn free(arity: usize) -> Self {
        IdentitySystem { symbols: vec![("f".into(), arity)], var_count: 0, equations: vec![] }
    }

    /// f(r,a,r,e) = f(a,r,e,a).
    pub fn siggers() -> Self {
        IdentitySystem {
            symbols: vec![("f".into(), 4)],
            var_count: 3, // r, a, e
            equations: vec![(
                FlatTerm { symbol: 0, args: vec![0, 1, 0, 2] },
                FlatTerm { symbol: 0, args: vec![1, 0, 2, 1] },
            )],
        }
    }

    /// Weak near unanimity: W(y,x,...,x) = W(x,y,x,...,x) = ... = W(x,...,x,y).
    pub fn wnu(n: usize) -> Self {
        assert!(n >= 2);
        let term = |at: usize| {
            let args: Vec<usize> = (0..n).map(|j| usize::from(j == at)).collect();
            FlatTerm { symbol: 0, args }
        };
        IdentitySystem {
            symbols: vec![("w".into(), n)],
            var_count: 2, // x = 0, y = 1
            equations: (0..n - 1).map(|i| (term(i), term(i + 1))).collect(),
        }
    }

    /// Cyclic: C(x1,...,xp) = C(x2,...,xp,x1). For p = 1 this is vacuous.
    pub fn cyclic(p: usize) -> Self {
        assert!(p >= 1);
        if p == 1 {
            return IdentitySystem::free(1);
        }
        IdentitySystem {
            symbols: vec![("c".into(), p)],
            var_count: p,
            equations: vec![(
                FlatTerm { symbol: 0, args: (0..p).collect() },
                FlatTerm { symbol: 0, args: (0..p).map(|i| (i + 1) % p).collect() },
            )],
        }
    }
}

/// How indicator variables map back to argument tuples.
#[derive(Debug, Clone)]
pub struct IndicatorDecoding {
    /// Per symbol: block offset into the raw tuple space.
    pub symbol_offsets: Vec<u64>,
    /// Raw tuple id -> instance variable (merged class).
    pub class_of: Vec<u32>,
    pub class_count: u32,
    pub domain_size: u32,
    pub arities: Vec<usize>,
}

impl IndicatorDecoding {
    /// Instance variable standing for the given argument tuple.
    pub fn variable(&self, symbol: usize, args: &[u32]) -> u32 {
        let raw = self.symbol_offsets[symbol] + encode_tuple(args, self.domain_size) as u64;
        self.class_of[raw as usize]
    }

    /// Reads the operations out of a solution of the indicator instance.
    pub fn decode(&self, solution: &[u32], symbols: &[(String, usize)]) -> Vec<Operation> {
        symbols
            .iter()
            .enumerate()
            .map(|(j, &(_, arity))| {
                let size = (self.domain_size as u64).pow(arity as u32) as usize;
                let offset = self.symbol_offsets[j] as usize;
                let table = (0..size)
                    .map(|t| solution[self.class_of[offset + t] as usize])
                    .collect();
                Operation { domain_size: self.domain_size, arity, table }
            })
            .collect()
    }
}

struct UnionFind {
    parent: Vec<u32>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n as u32).collect() }
    }
    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let up = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = up;
            x = up;
        }
        x
    }
    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        // merge toward the smaller root so class ids stay stable
        match ra.cmp(&rb) {
            std::cmp::Ordering::Less => self.parent[rb as usize] = ra,
            std::cmp::Ordering::Greater => self.parent[ra as usize] = rb,
            std::cmp::Ordering::Equal => {}
        }
    }
}

/// Builds the indicator instance of `ids` over `s`: one variable per
/// argument tuple per symbol, merged into the equivalence classes forced by
/// the equations, with the power-structure constraints of every relation.
pub fn indicator_instance(
    s: &Structure,
    ids: &IdentitySystem,
    caps: &Caps,
) -> Result<(Instance, IndicatorDecoding)> {
    ids.validate()?;
    let d = s.domain_size;
    let mut symbol_offsets = Vec::with_capacity(ids.symbols.len());
    let mut total: u64 = 0;
    for &(_, arity) in &ids.symbols {
        symbol_offsets.push(total);
        total += (d as u64).pow(arity as u32);
        if total > caps.indicator_vars {
            return Err(Error::CapExceeded {
                what: "indicator variables",
                required: total,
                cap: caps.indicator_vars,
            });
        }
    }

    // Merge argument tuples identified by the equations.
    let mut uf = UnionFind::new(total as usize);
    let assignments = (d as u64).pow(ids.var_count as u32);
    let mut vals = vec![0u32; ids.var_count];
    for raw in 0..assignments {
        let mut idx = raw;
        for slot in vals.iter_mut().rev() {
            *slot = (idx % d as u64) as u32;
            idx /= d as u64;
        }
        for (lhs, rhs) in &ids.equations {
            let encode_term = |t: &FlatTerm| -> u64 {
                let args: Vec<u32> = t.args.iter().map(|&v| vals[v]).collect();
                symbol_offsets[t.symbol] + encode_tuple(&args, d) as u64
            };
            let a = encode_term(lhs);
            let b = encode_term(rhs);
            uf.union(a as u32, b as u32);
        }
    }

    // Compress to dense class ids in order of first appearance.
    let mut class_of = vec![u32::MAX; total as usize];
    let mut class_count = 0u32;
    for raw in 0..total as usize {
        let root = uf.find(raw as u32) as usize;
        if class_of[root] == u32::MAX {
            class_of[root] = class_count;
            class_count += 1;
        }
        class_of[raw] = class_of[root];
    }

    // Power-structure constraints per relation per symbol.
    let mut constraints: Vec<Table> = s
        .signature
        .relations
        .iter()
        .map(|r| Table::new(r.arity))
        .collect();
    for (j, &(_, arity)) in ids.symbols.iter().enumerate() {
        let offset = symbol_offsets[j];
        for (rel, table) in s.tables.iter().enumerate() {
            let k = table.arity();
            let rows: Vec<&[u32]> = table.rows().collect();
            if rows.is_empty() {
                continue;
            }
            let mut pick = vec![0usize; arity];
            let mut scope = vec![0u32; k];
            'selections: loop {
                for (i, slot) in scope.iter_mut().enumerate() {
                    let mut enc = 0u64;
                    for &p in &pick {
                        enc = enc * d as u64 + rows[p][i] as u64;
                    }
                    *slot = class_of[(offset + enc) as usize];
                }
                constraints[rel].push_row(&scope);
                let mut pos = arity;
                loop {
                    if pos == 0 {
                        break 'selections;
                    }
                    pos -= 1;
                    pick[pos] += 1;
                    if pick[pos] < rows.len() {
                        break;
                    }
                    pick[pos] = 0;
                    if pos == 0 {
                        break 'selections;
                    }
                }
            }
        }
    }
    for t in &mut constraints {
        t.canonicalize();
    }
    Ok((
        Instance {
            variable_count: class_count,
            signature: s.signature.clone(),
            constraints,
        },
        IndicatorDecoding {
            symbol_offsets,
            class_of,
            class_count,
            domain_size: d,
            arities: ids.symbols.iter().map(|&(_, a)| a).collect(),
        },
    ))
}

/// Record of the re-verification performed before a witness is returned.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WitnessCertificate {
    pub equations_checked: usize,
    pub assignments_per_equation: u64,
    pub relations_checked: Vec<String>,
}

/// Operations satisfying an identity system, re-verified on return.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolymorphismWitness {
    pub operations: BTreeMap<String, Operation>,
    pub certificate: WitnessCertificate,
}

/// Checks every equation of `ids` pointwise over all abstract-variable
/// assignments.
pub fn satisfies_identities(ops: &[Operation], ids: &IdentitySystem) -> bool {
    let d = ops.first().map(|o| o.domain_size).unwrap_or(1);
    let assignments = (d as u64).pow(ids.var_count as u32);
    let mut vals = vec![0u32; ids.var_count];
    for raw in 0..assignments {
        let mut idx = raw;
        for slot in vals.iter_mut().rev() {
            *slot = (idx % d as u64) as u32;
            idx /= d as u64;
        }
        for (lhs, rhs) in &ids.equations {
            let eval = |t: &FlatTerm| {
                let args: Vec<u32> = t.args.iter().map(|&v| vals[v]).collect();
                ops[t.symbol].apply(&args)
            };
            if eval(lhs) != eval(rhs) {
                return false;
            }
        }
    }
    true
}

/// Searches for operations satisfying `ids` and preserving every relation
/// of `s`; both properties are re-verified before the witness is returned.
pub fn find_polymorphism(
    s: &Structure,
    ids: &IdentitySystem,
    caps: &Caps,
) -> Result<Option<PolymorphismWitness>> {
    let (instance, decoding) = indicator_instance(s, ids, caps)?;
    let seed = PartialAssignment::empty(instance.variable_count);
    let Some(solution) = crate::model::find_homomorphism(&instance, s, &seed)? else {
        return Ok(None);
    };
    let ops = decoding.decode(&solution.values, &ids.symbols);
    if !satisfies_identities(&ops, ids) {
        return Err(Error::VerificationFailed(
            "decoded operations violate the identity system".into(),
        ));
    }
    for op in &ops {
        if !preserves(op, s)? {
            return Err(Error::VerificationFailed(
                "decoded operation fails preservation".into(),
            ));
        }
    }
    let operations = ids
        .symbols
        .iter()
        .map(|(name, _)| name.clone())
        .zip(ops)
        .collect();
    Ok(Some(PolymorphismWitness {
        operations,
        certificate: WitnessCertificate {
            equations_checked: ids.equations.len(),
            assignments_per_equation: (s.domain_size as u64).pow(ids.var_count as u32),
            relations_checked: s.signature.relations.iter().map(|r| r.name.clone()).collect(),
        },
    }))
}

/// Siggers polymorphism search: f(r,a,r,e) = f(a,r,e,a).
pub fn check_siggers(s: &Structure, caps: &Caps) -> Result<Option<PolymorphismWitness>> {
    find_polymorphism(s, &IdentitySystem::siggers(), caps)
}

/// Weak-near-unanimity polymorphism of arity `n`.
pub fn check_wnu(s: &Structure, n: usize, caps: &Caps) -> Result<Option<PolymorphismWitness>> {
    find_polymorphism(s, &IdentitySystem::wnu(n), caps)
}

/// Cyclic polymorphism of arity `p`.
pub fn check_cyclic(s: &Structure, p: usize, caps: &Caps) -> Result<Option<PolymorphismWitness>> {
    find_polymorphism(s, &IdentitySystem::cyclic(p), caps)
}

/// Searches for a totally symmetric polymorphism of arity `n`.
///
/// The search is indexed by nonempty argument *sets* rather than tuples: a
/// totally symmetric table is a map from argument sets to values, and the
/// preservation constraints only mention the column sets realizable by at
/// most `n` rows of a relation. That turns an exponential tuple search into
/// one over at most 2^|D| - 1 set variables.
pub fn check_totally_symmetric(
    s: &Structure,
    n: usize,
    caps: &Caps,
) -> Result<Option<Operation>> {
    assert!(n >= 1);
    let d = s.domain_size;
    if d > 20 {
        return Err(Error::CapExceeded {
            what: "totally symmetric subset variables",
            required: 1u64 << d.min(63),
            cap: 1 << 20,
        });
    }
    let limit = n.min(d as usize);
    let mut set_index: BTreeMap<u64, u32> = BTreeMap::new();
    let mut sets: Vec<u64> = Vec::new();
    for mask in 1u64..(1u64 << d) {
        if (mask.count_ones() as usize) <= limit {
            set_index.insert(mask, sets.len() as u32);
            sets.push(mask);
        }
    }
    // Constraint generation: every column-set tuple realizable by a subset
    // of at most n rows.
    let mut constraints: Vec<Table> = s
        .signature
        .relations
        .iter()
        .map(|r| Table::new(r.arity))
        .collect();
    for (rel, table) in s.tables.iter().enumerate() {
        let rows: Vec<&[u32]> = table.rows().collect();
        let m = rows.len();
        if m == 0 {
            continue;
        }
        if m > 24 {
            return Err(Error::CapExceeded {
                what: "totally symmetric row subsets",
                required: 1u64 << m.min(63),
                cap: 1 << 24,
            });
        }
        let k = table.arity();
        let mut seen = std::collections::BTreeSet::new();
        for subset in 1u64..(1u64 << m) {
            if (subset.count_ones() as usize) > n {
                continue;
            }
            let mut col_masks = vec![0u64; k];
            let mut bits = subset;
            while bits != 0 {
                let r = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                for (i, &e) in rows[r].iter().enumerate() {
                    col_masks[i] |= 1u64 << e;
                }
            }
            if seen.insert(col_masks.clone()) {
                let scope: Vec<u32> = col_masks.iter().map(|m| set_index[m]).collect();
                constraints[rel].push_row(&scope);
            }
        }
    }
    for t in &mut constraints {
        t.canonicalize();
    }
    let instance = Instance {
        variable_count: sets.len() as u32,
        signature: s.signature.clone(),
        constraints,
    };
    let seed = PartialAssignment::empty(instance.variable_count);
    let Some(solution) = crate::model::find_homomorphism(&instance, s, &seed)? else {
        return Ok(None);
    };
    // Materialize the dense table and verify.
    let table_size = (d as u64).pow(n as u32);
    if table_size > caps.operation_table {
        return Err(Error::CapExceeded {
            what: "operation table",
            required: table_size,
            cap: caps.operation_table,
        });
    }
    let op = Operation::from_fn(d, n, |args| {
        let mask: u64 = args.iter().fold(0, |m, &a| m | (1u64 << a));
        solution.values[set_index[&mask] as usize]
    });
    if !op.is_totally_symmetric() {
        return Err(Error::VerificationFailed(
            "table depends on more than the set".into(),
        ));
    }
    if !preserves_ts(&op, s) {
        return Err(Error::VerificationFailed(
            "totally symmetric candidate fails preservation".into(),
        ));
    }
    Ok(Some(op))
}

/// Preservation check specialized to totally symmetric operations: instead
/// of all |R|^n row selections it checks every realizable column-set tuple,
/// which is equivalent by total symmetry.
pub(crate) fn preserves_ts(op: &Operation, s: &Structure) -> bool {
    debug_assert!(op.is_totally_symmetric());
    let n = op.arity;
    let value_of_set = |mask: u64| -> u32 {
        let mut args: Vec<u32> = Vec::with_capacity(n);
        let mut bits = mask;
        while bits != 0 {
            args.push(bits.trailing_zeros());
            bits &= bits - 1;
        }
        while args.len() < n {
            let first = args[0];
            args.push(first);
        }
        op.apply(&args)
    };
    for table in &s.tables {
        let rows: Vec<&[u32]> = table.rows().collect();
        let m = rows.len();
        if m == 0 {
            continue;
        }
        let k = table.arity();
        for subset in 1u64..(1u64 << m) {
            if (subset.count_ones() as usize) > n {
                continue;
            }
            let mut col_masks = vec![0u64; k];
            let mut bits = subset;
            while bits != 0 {
                let r = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                for (i, &e) in rows[r].iter().enumerate() {
                    col_masks[i] |= 1u64 << e;
                }
            }
            let image: Vec<u32> = col_masks.iter().map(|&mask| value_of_set(mask)).collect();
            if !table.contains(&image) {
                return false;
            }
        }
    }
    true
}

/// Builds the dual discriminator table and tests preservation directly.
pub fn check_dual_discriminator(s: &Structure) -> Result<bool> {
    preserves(&Operation::dual_discriminator(s.domain_size), s)
}

/// Least coordinate pair (i, j), i < j (0-based), such that every tuple of
/// the relation has equal i-th and j-th coordinates.
pub fn implies_equation(r: &Table) -> Option<(usize, usize)> {
    let k = r.arity();
    for i in 0..k {
        for j in (i + 1)..k {
            if r.rows().all(|row| row[i] == row[j]) {
                return Some((i, j));
            }
        }
    }
    None
}

/// Closure of a relation under the polymorphisms of `s`: the images of the
/// columns of the tuple matrix under all homomorphisms s^m -> s, where m is
/// the number of tuples.
pub fn pp_closure(s: &Structure, r: &Table, caps: &Caps) -> Result<Table> {
    let m = r.len();
    assert!(m > 0, "pp_closure of an empty relation");
    if m > caps.pp_tuples {
        return Err(Error::CapExceeded {
            what: "pp_closure tuples",
            required: m as u64,
            cap: caps.pp_tuples as u64,
        });
    }
    let k = r.arity();
    let power = crate::model::power(s, m, caps)?;
    let power_instance = power.as_instance();
    let problem_vars = power_instance.variable_count;
    // Column i of the tuple matrix, encoded as a power element.
    let columns: Vec<u32> = (0..k)
        .map(|i| {
            let col: Vec<u32> = r.rows().map(|row| row[i]).collect();
            encode_tuple(&col, s.domain_size)
        })
        .collect();
    let mut out = Table::new(k);
    let d = s.domain_size as u64;
    let total = d.pow(k as u32);
    let mut tuple = vec![0u32; k];
    'candidates: for raw in 0..total {
        let mut idx = raw;
        for slot in tuple.iter_mut().rev() {
            *slot = (idx % d) as u32;
            idx /= d;
        }
        let mut seed = PartialAssignment::empty(problem_vars);
        for (&var, &val) in columns.iter().zip(&tuple) {
            if let Some(prev) = seed.get(var) {
                if prev != val {
                    continue 'candidates;
                }
            }
            seed.set(var, val);
        }
        if crate::model::find_homomorphism(&power_instance, s, &seed)?.is_some() {
            out.push_row(&tuple);
        }
    }
    out.canonicalize();
    Ok(out)
}

/// True iff the pp-closure of `r` is `r` itself.
pub fn is_pp_definable(s: &Structure, r: &Table, caps: &Caps) -> Result<bool> {
    let mut canonical = r.clone();
    canonical.canonicalize();
    Ok(pp_closure(s, r, caps)? == canonical)
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn caps() -> Caps {
        Caps::default()
    }

    #[test]
    fn min_preserves_horn_but_not_2sat() {
        assert!(preserves(&Operation::min2(2), &fixtures::horn()).unwrap());
        assert!(!preserves(&Operation::min2(2), &fixtures::twosat()).unwrap());
    }

    #[test]
    fn projections_preserve_everything() {
        for s in [fixtures::k(3), fixtures::twosat(), fixtures::nae()] {
            for i in 0..2 {
                assert!(preserves(&Operation::projection(s.domain_size, 2, i), &s).unwrap());
            }
        }
    }

    #[test]
    fn star_is_a_polymorphism_of_the_directed_3_cycle() {
        let dc3 = fixtures::directed_cycle(3);
        assert!(preserves(&Operation::rps_star(), &dc3).unwrap());
        assert!(check_dual_discriminator(&dc3).unwrap());
    }

    #[test]
    fn dual_discriminator_verdicts() {
        assert!(check_dual_discriminator(&fixtures::twosat()).unwrap());
        assert!(!check_dual_discriminator(&fixtures::threesat()).unwrap());
    }

    #[test]
    fn indicator_sizes() {
        // unary free system over K3: the indicator is K3 itself
        let k3 = fixtures::k(3);
        let (inst, _) = indicator_instance(&k3, &IdentitySystem::free(1), &caps()).unwrap();
        assert_eq!(inst.variable_count, 3);
        assert_eq!(inst.constraints[0].len(), 6);

        // cyclic binary system on K2: orbit count of the swap on {0,1}^2
        let k2 = fixtures::k(2);
        let (inst, _) = indicator_instance(&k2, &IdentitySystem::cyclic(2), &caps()).unwrap();
        assert_eq!(inst.variable_count, 3);

        // Siggers on K3: 81 raw tuples, merged classes pair up the orbits
        let (inst, dec) = indicator_instance(&k3, &IdentitySystem::siggers(), &caps()).unwrap();
        assert!(inst.variable_count < 81);
        assert_eq!(
            dec.variable(0, &[0, 1, 0, 2]),
            dec.variable(0, &[1, 0, 2, 1])
        );
    }

    #[test]
    fn siggers_verdicts_match_the_dichotomy() {
        assert!(check_siggers(&fixtures::k(3), &caps()).unwrap().is_none());
        assert!(check_siggers(&fixtures::twosat(), &caps()).unwrap().is_some());
        assert!(check_siggers(&fixtures::f2_3(), &caps()).unwrap().is_some());
        assert!(check_siggers(&fixtures::nae(), &caps()).unwrap().is_none());
        assert!(check_siggers(&fixtures::threesat(), &caps()).unwrap().is_none());
        assert!(check_siggers(&fixtures::directed_cycle(3), &caps()).unwrap().is_some());
        assert!(check_siggers(&fixtures::horn(), &caps()).unwrap().is_some());
    }

    #[test]
    fn projection_baseline_exists() {
        for s in [fixtures::k(2), fixtures::k(3), fixtures::twosat(), fixtures::nae()] {
            let w = find_polymorphism(&s, &IdentitySystem::free(2), &caps()).unwrap();
            assert!(w.is_some(), "projection baseline missing");
        }
    }

    #[test]
    fn unary_cyclic_is_vacuous() {
        assert!(check_cyclic(&fixtures::k(3), 1, &caps()).unwrap().is_some());
    }

    #[test]
    fn totally_symmetric_search() {
        let horn = fixtures::horn();
        for n in 2..=6 {
            let op = check_totally_symmetric(&horn, n, &caps()).unwrap();
            let op = op.expect("Horn fragment has TS polymorphisms of every arity");
            assert_eq!(op, Operation::min_n(2, n), "n-ary AND expected at arity {n}");
        }
        assert!(check_totally_symmetric(&fixtures::twosat(), 2, &caps())
            .unwrap()
            .is_none());
        assert!(check_totally_symmetric(&fixtures::k(2), 2, &caps())
            .unwrap()
            .is_none());
    }

    #[test]
    fn implies_equation_examples() {
        let diag = Table::from_rows(2, vec![vec![0, 0], vec![1, 1]]);
        assert_eq!(implies_equation(&diag), Some((0, 1)));
        let k2 = fixtures::k(2);
        assert_eq!(implies_equation(&k2.tables[0]), None);
        let single = Table::from_rows(3, vec![vec![0, 0, 1]]);
        assert_eq!(implies_equation(&single), Some((0, 1)));
    }

    #[test]
    fn pp_closure_examples() {
        let twosat = fixtures::twosat();
        // equality is closed in any structure
        let eq = Table::from_rows(2, vec![vec![0, 0], vec![1, 1]]);
        assert_eq!(pp_closure(&twosat, &eq, &caps()).unwrap(), eq);
        assert!(is_pp_definable(&twosat, &eq, &caps()).unwrap());

        // the affine ternary relation grows strictly in 2SAT
        let affine = Table::from_rows(
            3,
            vec![vec![0, 0, 0], vec![0, 1, 1], vec![1, 0, 1], vec![1, 1, 0]],
        );
        let closed = pp_closure(&twosat, &affine, &caps()).unwrap();
        assert!(closed.len() > affine.len());
        assert!(closed.contains(&[0, 0, 1]));
        assert!(!is_pp_definable(&twosat, &affine, &caps()).unwrap());

        // the full relation cannot grow
        let full = Table::from_rows(
            2,
            (0..2u32)
                .flat_map(|a| (0..2u32).map(move |b| vec![a, b]))
                .collect::<Vec<_>>(),
        );
        assert_eq!(pp_closure(&twosat, &full, &caps()).unwrap(), full);

        // relations of the structure are invariant under their polymorphisms
        let d0 = twosat.tables[0].clone();
        assert!(is_pp_definable(&twosat, &d0, &caps()).unwrap());
    }

    #[test]
    fn witnesses_reverify() {
        let w = check_siggers(&fixtures::twosat(), &caps()).unwrap().unwrap();
        let op = &w.operations["f"];
        assert!(preserves(op, &fixtures::twosat()).unwrap());
        assert!(satisfies_identities(
            std::slice::from_ref(op),
            &IdentitySystem::siggers()
        ));
    }

    #[test]
    fn small_scale_completeness_against_raw_enumeration() {
        // domain 2, arity 2: compare the indicator search against filtering
        // all 16 binary tables for the cyclic identity.
        let k2 = fixtures::k(2);
        let found = check_cyclic(&k2, 2, &caps()).unwrap();
        let mut brute = None;
        for raw in 0..16u32 {
            let op = Operation {
                domain_size: 2,
                arity: 2,
                table: (0..4).map(|i| (raw >> i) & 1).collect(),
            };
            let symmetric = op.apply(&[0, 1]) == op.apply(&[1, 0]);
            if symmetric && preserves(&op, &k2).unwrap() {
                brute = Some(op);
                break;
            }
        }
        assert_eq!(found.is_some(), brute.is_some());
        assert!(found.is_none(), "K2 has no symmetric binary polymorphism");
    }
}


