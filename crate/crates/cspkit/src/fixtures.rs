//! Named templates and instance builders used across tests and the CLI.
//!
//! Graph templates store the symmetric closure explicitly; graph *instances*
//! store one tuple per edge, leaving direction to the template. That keeps
//! the incidence multigraph of an instance faithful to its shape (a single
//! undirected edge is one constraint occurrence, not two).

use crate::model::{Instance, Signature, Structure, Table};
use std::collections::BTreeMap;

/// Complete graph on `n` vertices as a symmetric structure.
pub fn k(n: u32) -> Structure {
    let mut t = Table::new(2);
    for a in 0..n {
        for b in 0..n {
            if a != b {
                t.push_row(&[a, b]);
            }
        }
    }
    Structure::new(n, Signature::new(vec![("E", 2)]), vec![t])
}

/// Symmetric graph structure from an undirected edge list.
pub fn graph(n: u32, edges: &[(u32, u32)]) -> Structure {
    let mut t = Table::new(2);
    for &(a, b) in edges {
        t.push_row(&[a, b]);
        t.push_row(&[b, a]);
    }
    Structure::new(n, Signature::new(vec![("E", 2)]), vec![t])
}

/// Digraph structure: one tuple per arc.
pub fn digraph(n: u32, arcs: &[(u32, u32)]) -> Structure {
    let mut t = Table::new(2);
    for &(a, b) in arcs {
        t.push_row(&[a, b]);
    }
    Structure::new(n, Signature::new(vec![("E", 2)]), vec![t])
}

/// Directed n-cycle 0 -> 1 -> ... -> n-1 -> 0.
pub fn directed_cycle(n: u32) -> Structure {
    let arcs: Vec<(u32, u32)> = (0..n).map(|i| (i, (i + 1) % n)).collect();
    digraph(n, &arcs)
}

/// Graph instance in the one-binary-relation signature, one tuple per edge.
pub fn graph_instance(n: u32, edges: &[(u32, u32)]) -> Instance {
    let mut t = Table::new(2);
    for &(a, b) in edges {
        t.push_row(&[a, b]);
    }
    Instance::new(n, Signature::new(vec![("E", 2)]), vec![t])
}

fn boolean_tuples(arity: usize, forbid: &[Vec<u32>]) -> Table {
    let mut t = Table::new(arity);
    for raw in 0..(1u32 << arity) {
        let tuple: Vec<u32> = (0..arity).map(|i| (raw >> (arity - 1 - i)) & 1).collect();
        if !forbid.iter().any(|f| f == &tuple) {
            t.push_row(&tuple);
        }
    }
    t.canonicalize();
    t
}

/// Finite HornSAT fragment: unary {0} and {1} plus (x ∧ y) → z.
pub fn horn() -> Structure {
    let u0 = Table::from_rows(1, vec![vec![0]]);
    let u1 = Table::from_rows(1, vec![vec![1]]);
    let imp = boolean_tuples(3, &[vec![1, 1, 0]]);
    Structure::new(
        2,
        Signature::new(vec![("U0", 1), ("U1", 1), ("IMP", 3)]),
        vec![u0, u1, imp],
    )
}

/// 2SAT: all three 2-clause relations D0 = x∨y, D1 = ¬x∨y, D2 = ¬x∨¬y.
pub fn twosat() -> Structure {
    let d0 = boolean_tuples(2, &[vec![0, 0]]);
    let d1 = boolean_tuples(2, &[vec![1, 0]]);
    let d2 = boolean_tuples(2, &[vec![1, 1]]);
    Structure::new(
        2,
        Signature::new(vec![("D0", 2), ("D1", 2), ("D2", 2)]),
        vec![d0, d1, d2],
    )
}

/// 3SAT: the four 3-clause relations D0..D3, Di forbidding 1^i 0^(3-i).
pub fn threesat() -> Structure {
    let tables: Vec<Table> = (0..4)
        .map(|i| {
            let forbidden: Vec<u32> = (0..3).map(|j| if j < i { 1 } else { 0 }).collect();
            boolean_tuples(3, &[forbidden])
        })
        .collect();
    Structure::new(
        2,
        Signature::new(vec![("D0", 3), ("D1", 3), ("D2", 3), ("D3", 3)]),
        tables,
    )
}

/// Not-all-equal: 2-coloring of ternary hypergraphs.
pub fn nae() -> Structure {
    let t = boolean_tuples(3, &[vec![0, 0, 0], vec![1, 1, 1]]);
    Structure::new(2, Signature::new(vec![("NAE", 3)]), vec![t])
}

/// F2(3) fragment: the two ternary affine relations x⊕y⊕z = 0 and = 1.
pub fn f2_3() -> Structure {
    let mut e0 = Table::new(3);
    let mut e1 = Table::new(3);
    for raw in 0..8u32 {
        let tuple = [(raw >> 2) & 1, (raw >> 1) & 1, raw & 1];
        if tuple.iter().sum::<u32>() % 2 == 0 {
            e0.push_row(&tuple);
        } else {
            e1.push_row(&tuple);
        }
    }
    Structure::new(2, Signature::new(vec![("XOR0", 3), ("XOR1", 3)]), vec![e0, e1])
}

/// Rock-paper-scissors template on {r, p, s} = {0, 1, 2}: the graph of the
/// cyclic permutation (r p s) plus R⋆(x,y,z) ⟺ x ∈ {p,s} ∧ (x = s ∨ y = z).
pub fn rps() -> Structure {
    let r_pi = Table::from_rows(2, vec![vec![0, 1], vec![1, 2], vec![2, 0]]);
    let mut r_star = Table::new(3);
    for y in 0..3 {
        for z in 0..3 {
            r_star.push_row(&[2, y, z]);
            if y == z {
                r_star.push_row(&[1, y, z]);
            }
        }
    }
    r_star.canonicalize();
    Structure::new(3, Signature::new(vec![("RPI", 2), ("RSTAR", 3)]), vec![r_pi, r_star])
}

/// The intractable special triad: a 33-vertex orientation of a tree with
/// three arms hanging off vertex 0.
pub fn special_triad() -> Structure {
    let arcs: &[(u32, u32)] = &[
        (0, 1),
        (1, 2),
        (2, 3),
        (4, 3),
        (4, 5),
        (5, 6),
        (7, 6),
        (8, 7),
        (9, 8),
        (10, 9),
        (0, 11),
        (11, 12),
        (13, 12),
        (13, 14),
        (14, 15),
        (15, 16),
        (17, 16),
        (18, 17),
        (19, 18),
        (20, 19),
        (0, 21),
        (21, 22),
        (22, 23),
        (24, 23),
        (25, 24),
        (25, 26),
        (26, 27),
        (27, 28),
        (29, 28),
        (30, 29),
        (31, 30),
        (32, 31),
    ];
    digraph(33, arcs)
}

/// `s` expanded by one singleton unary relation per element, named `S<d>`.
pub fn with_singletons(s: &Structure) -> Structure {
    let mut signature = s.signature.clone();
    let mut tables = s.tables.clone();
    for d in 0..s.domain_size {
        signature.push(format!("S{d}"), 1);
        tables.push(Table::from_rows(1, vec![vec![d]]));
    }
    Structure::new(s.domain_size, signature, tables)
}

/// All named templates, in a stable order.
pub fn templates() -> BTreeMap<&'static str, Structure> {
    let mut m = BTreeMap::new();
    m.insert("k2", k(2));
    m.insert("k3", k(3));
    m.insert("k4", k(4));
    m.insert("path3", graph(3, &[(0, 1), (1, 2)]));
    m.insert("c5", graph(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)]));
    m.insert("dc3", directed_cycle(3));
    m.insert("horn", horn());
    m.insert("2sat", twosat());
    m.insert("3sat", threesat());
    m.insert("nae", nae());
    m.insert("f2_3", f2_3());
    m.insert("rps", rps());
    m.insert("triad", special_triad());
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_structure;

    #[test]
    fn fixtures_are_well_formed() {
        for (name, s) in templates() {
            assert!(validate_structure(&s).is_empty(), "fixture {name} is malformed");
        }
    }

    #[test]
    fn fixture_shapes() {
        assert_eq!(k(3).tables[0].len(), 6);
        assert_eq!(threesat().tables.iter().map(Table::len).sum::<usize>(), 4 * 7);
        assert_eq!(nae().tables[0].len(), 6);
        assert_eq!(rps().tables[1].len(), 12);
        let triad = special_triad();
        assert_eq!(triad.domain_size, 33);
        assert_eq!(triad.tables[0].len(), 32);
    }
}
