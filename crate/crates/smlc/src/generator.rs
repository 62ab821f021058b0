use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Planted-partition benchmark graph with its ground-truth blocks.
#[derive(Debug, Clone)]
pub struct Planted {
    pub graph: Graph,
    pub communities: Vec<Vec<u32>>,
    /// False when the sampled graph came out disconnected (possible and
    /// permitted when p_out = 0 and overlap = 0).
    pub connected: bool,
}

/// Generates `k` blocks of `size` nodes with `overlap` nodes shared between
/// consecutive blocks; node pairs sharing a block get an edge with
/// probability `p_in`, all other pairs with `p_out`.
pub fn generate_planted(
    k: usize,
    size: usize,
    p_in: f64,
    p_out: f64,
    overlap: usize,
    rng_seed: u64,
) -> Result<Planted> {
    if k == 0 || size == 0 {
        return Err(Error::InvalidParameter("k and size must be positive".into()));
    }
    if !(0.0..=1.0).contains(&p_in) || !(0.0..=1.0).contains(&p_out) || p_out >= p_in {
        return Err(Error::InvalidParameter(
            "probabilities must satisfy 0 <= p_out < p_in <= 1".into(),
        ));
    }
    if overlap >= size {
        return Err(Error::InvalidParameter("overlap must be smaller than size".into()));
    }
    let stride = size - overlap;
    let n = stride * (k - 1) + size;
    let blocks: Vec<Vec<u32>> = (0..k)
        .map(|b| ((b * stride) as u32..(b * stride + size) as u32).collect())
        .collect();
    let mut block_of = vec![Vec::new(); n];
    for (b, members) in blocks.iter().enumerate() {
        for &v in members {
            block_of[v as usize].push(b);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut edges = Vec::new();
    for u in 0..n as u32 {
        for v in u + 1..n as u32 {
            let shared = block_of[u as usize].iter().any(|b| block_of[v as usize].contains(b));
            let p = if shared { p_in } else { p_out };
            if rng.random_range(0.0..1.0) < p {
                edges.push((u, v));
            }
        }
    }
    let graph = Graph::from_index_edges(n as u32, &edges);
    let connected = graph.is_connected();
    Ok(Planted { graph, communities: blocks, connected })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disjoint_cliques() {
        let planted = generate_planted(2, 10, 1.0, 0.0, 0, 1).unwrap();
        assert_eq!(planted.graph.node_count(), 20);
        assert_eq!(planted.graph.edge_count(), 2 * 45);
        assert!(!planted.connected);
    }

    #[test]
    fn overlap_node_bridges_blocks() {
        let planted = generate_planted(2, 10, 1.0, 0.0, 1, 1).unwrap();
        assert_eq!(planted.graph.node_count(), 19);
        // The shared node sees both 9-node remainders.
        let shared = 9u32;
        assert_eq!(planted.graph.degree(shared), 18);
        assert!(planted.communities[0].contains(&shared));
        assert!(planted.communities[1].contains(&shared));
    }

    #[test]
    fn parameter_validation() {
        assert!(generate_planted(2, 10, 0.2, 0.5, 0, 1).is_err());
        assert!(generate_planted(2, 10, 0.5, 0.0, 10, 1).is_err());
        assert!(generate_planted(0, 10, 0.5, 0.0, 0, 1).is_err());
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_planted(3, 12, 0.4, 0.02, 2, 9).unwrap();
        let b = generate_planted(3, 12, 0.4, 0.02, 2, 9).unwrap();
        assert_eq!(a.graph.edge_count(), b.graph.edge_count());
        for v in 0..a.graph.node_count() as u32 {
            assert_eq!(a.graph.neighbors(v), b.graph.neighbors(v));
        }
    }
}
