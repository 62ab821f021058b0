use crate::diffusion::{approximate_ppr, hk_relax, HkParams, PprParams};
use crate::error::{Error, Result};
use crate::graph::Graph;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DiffusionMethod {
    Ppr(PprParams),
    Hk(HkParams),
}

impl Default for DiffusionMethod {
    fn default() -> Self {
        DiffusionMethod::Ppr(PprParams::default())
    }
}

/// Local subgraph produced from a seed's diffusion support.
#[derive(Debug, Clone)]
pub struct Sample {
    pub subgraph: Graph,
    /// Local index → index in the parent graph.
    pub to_parent: Vec<u32>,
    pub seed_local: u32,
    /// True when the biconnected-component step degenerated (component of
    /// fewer than 3 nodes) and the sample was widened to the seed's
    /// connected component instead.
    pub widened: bool,
}

impl Sample {
    pub fn seed_parent(&self) -> u32 {
        self.to_parent[self.seed_local as usize]
    }
}

/// Diffusion support of the seed: nodes with positive approximate mass.
pub fn diffusion_support(g: &Graph, seed: u32, method: &DiffusionMethod) -> Result<Vec<u32>> {
    let mass = match method {
        DiffusionMethod::Ppr(params) => approximate_ppr(g, seed, params)?.0,
        DiffusionMethod::Hk(params) => hk_relax(g, seed, params)?,
    };
    let mut support: Vec<u32> = mass
        .iter()
        .enumerate()
        .filter(|&(_, &m)| m > 0.0)
        .map(|(v, _)| v as u32)
        .collect();
    if !support.contains(&seed) {
        support.push(seed);
        support.sort_unstable();
    }
    Ok(support)
}

/// Samples the working subgraph for a seed: diffuse, induce the subgraph on
/// the positive support, then keep the largest biconnected component
/// containing the seed (ties broken by lexicographically smallest node
/// sequence). Falls back to the seed's whole connected component when that
/// component has fewer than 3 nodes.
pub fn local_sample(g: &Graph, seed: u32, method: &DiffusionMethod) -> Result<Sample> {
    let support = diffusion_support(g, seed, method)?;
    let (induced, to_parent) = g.induced_subgraph(&support)?;
    let seed_induced = to_parent
        .binary_search(&seed)
        .map_err(|_| Error::Domain("seed missing from its own support".into()))? as u32;

    let mut best: Option<Vec<u32>> = None;
    for comp in induced.biconnected_components() {
        if comp.binary_search(&seed_induced).is_err() {
            continue;
        }
        let better = match &best {
            None => true,
            Some(b) => comp.len() > b.len() || (comp.len() == b.len() && comp < *b),
        };
        if better {
            best = Some(comp);
        }
    }
    let (nodes, widened) = match best {
        Some(comp) if comp.len() >= 3 => (comp, false),
        _ => (induced.connected_component(seed_induced), true),
    };

    let (subgraph, inner_map) = induced.induced_subgraph(&nodes)?;
    let to_parent: Vec<u32> = inner_map.iter().map(|&v| to_parent[v as usize]).collect();
    let seed_local = to_parent
        .iter()
        .position(|&v| v == seed)
        .expect("seed survives both induction steps") as u32;
    Ok(Sample { subgraph, to_parent, seed_local, widened })
}
