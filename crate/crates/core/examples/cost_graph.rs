//! Relational cost graph of the epidemic and of a model where two PRVs are
//! counted jointly.

use rfmdp::liftgraph::{relational_cost_graph, total_relational_cost_graph};
use rfmdp::{epidemic, LiftedModel};

fn main() -> rfmdp::Result<()> {
    let model = epidemic(5);
    let g = relational_cost_graph(&model);
    println!("vertices {:?}", g.vertices);
    println!("edges    {:?}", g.edge_names());

    let lm = LiftedModel::compile(&model)?;
    println!("c = {}, w = {}", lm.report.c, lm.report.w);
    println!("cliques {:?}", lm.report.clique_names(&lm.graph));
    println!("greedy induced width {}", lm.report.greedy_induced_width);

    let (total, report) = total_relational_cost_graph(&model);
    println!("\ntotal graph: {} vertices, {} edges", total.vertices.len(), total.edge_names().len());
    println!("cliques {:?}", report.clique_names(&total));
    Ok(())
}
