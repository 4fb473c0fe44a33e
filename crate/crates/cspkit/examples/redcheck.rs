// quick scale probe (not committed)
fn main() {
    use cspkit::edgecolor::*;
    use cspkit::Caps;
    let caps = Caps::default();
    let lit = |var, negated| Literal { var, negated };
    let cnf = CNFInstance {
        variable_count: 6,
        clauses: vec![
            [lit(0, true), lit(1, false), lit(2, true)],
            [lit(0, false), lit(3, true), lit(4, false)],
            [lit(1, true), lit(4, true), lit(5, false)],
            [lit(2, false), lit(3, false), lit(5, true)],
        ],
    };
    let t0 = std::time::Instant::now();
    let (graph, record) = reduce_3sat(&cnf, &caps).unwrap();
    println!("build: {:?}, vertices {}, edges {}", t0.elapsed(), graph.vertex_count, graph.edge_count());
    let big = Caps { edge_color_edges: 100000, ..Caps::default() };
    let t1 = std::time::Instant::now();
    let coloring = brute_force_edge_coloring(&graph, &big).unwrap();
    println!("color: {:?}, found: {}", t1.elapsed(), coloring.is_some());
    let sat = cnf.brute_force_satisfiable();
    println!("sat: {}", sat.is_some());
    let _ = record;
}
