//! Limb partition, spanning trees and fundamental cycles of the Delta and the IRSBot-2.

use pkmdyn::models::delta::{build_delta, DeltaParams};
use pkmdyn::models::irsbot::{irsbot2_cut_edges, irsbot2_graph};
use pkmdyn::topology::{auto_cut_edges, build_spanning_tree, cycles_of_tree, is_hybrid, partition_limbs};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let delta = build_delta(&DeltaParams::default())?.machine_graph()?;
    let limbs = partition_limbs(&delta)?;
    println!("Delta: {} limbs, cycle rank {}", limbs.len(), delta.cycle_rank());
    for l in &limbs {
        let cuts = auto_cut_edges(l);
        let tree = build_spanning_tree(l, &cuts)?;
        let cycles = cycles_of_tree(l, &tree);
        println!(
            "  limb {}: gamma = {}, N = {}, tree joints = {}, cut edges {:?}, cycle edges {:?}",
            l.index,
            l.gamma,
            l.total_dof(),
            tree.len(),
            cuts,
            cycles.iter().map(|c| c.edges.clone()).collect::<Vec<_>>()
        );
    }

    let irs = irsbot2_graph()?;
    let limbs = partition_limbs(&irs)?;
    println!("IRSBot-2: {} limbs", limbs.len());
    for l in &limbs {
        let tree = build_spanning_tree(l, &irsbot2_cut_edges(l.index))?;
        let cycles = cycles_of_tree(l, &tree);
        println!(
            "  limb {}: gamma = {}, hybrid = {}, cycles {:?}",
            l.index,
            l.gamma,
            is_hybrid(&cycles),
            cycles.iter().map(|c| c.edges.clone()).collect::<Vec<_>>()
        );
    }
    Ok(())
}
