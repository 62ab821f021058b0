use ndarray::Array2;

use crate::error::{Error, Result};
use crate::estimation::{estimate_k, EstimationParams};
use crate::graph::Graph;
use crate::sampling::{local_sample, DiffusionMethod, Sample};

#[derive(Debug, Clone)]
pub struct DetectionParams {
    pub method: DiffusionMethod,
    pub estimation: EstimationParams,
    /// Overrides the default membership threshold theta = 1/k'.
    pub theta_override: Option<f64>,
}

impl Default for DetectionParams {
    fn default() -> Self {
        DetectionParams {
            method: DiffusionMethod::default(),
            estimation: EstimationParams::default(),
            theta_override: None,
        }
    }
}

/// All communities of the seed, in parent-graph indices.
#[derive(Debug, Clone)]
pub struct CommunityResult {
    /// Sorted member lists, ordered by descending size then lexicographic
    /// members; every community contains the seed.
    pub communities: Vec<Vec<u32>>,
    pub k_prime: usize,
    pub theta: f64,
    pub sample: Sample,
    /// Normalized membership over the sample (k' x n_s).
    pub membership: Array2<f64>,
}

/// Thresholds a unit-column membership matrix: node j joins community i iff
/// `H[i][j] >= theta`. Returns one (possibly empty) member list per row;
/// the caller drops rows not containing the seed.
pub fn threshold_memberships(h_normalized: &Array2<f64>, theta: f64) -> Result<Vec<Vec<u32>>> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::Domain(format!("theta must be in (0,1], got {theta}")));
    }
    let mut communities = vec![Vec::new(); h_normalized.nrows()];
    for j in 0..h_normalized.ncols() {
        for i in 0..h_normalized.nrows() {
            if h_normalized[(i, j)] >= theta {
                communities[i].push(j as u32);
            }
        }
    }
    Ok(communities)
}

/// Communities containing the seed: threshold, then drop rows missing the
/// seed (in that order).
pub fn assign_communities(
    h_normalized: &Array2<f64>,
    seed_local: u32,
    theta: f64,
) -> Result<Vec<Vec<u32>>> {
    let all = threshold_memberships(h_normalized, theta)?;
    Ok(all
        .into_iter()
        .filter(|community| community.binary_search(&seed_local).is_ok())
        .collect())
}

/// End-to-end pipeline: sample the seed's local subgraph, estimate the
/// community count, and return every detected community containing the
/// seed, remapped to parent indices.
pub fn s_mlc(g: &Graph, seed_label: &str, params: &DetectionParams) -> Result<CommunityResult> {
    let seed = g
        .node_index(seed_label)
        .ok_or_else(|| Error::UnknownLabel(seed_label.to_string()))?;
    let sample = local_sample(g, seed, &params.method)?;
    let estimation = estimate_k(&sample.subgraph, &params.estimation)?;
    let theta = params.theta_override.unwrap_or(1.0 / estimation.k_prime as f64);
    let local = assign_communities(&estimation.h_normalized, sample.seed_local, theta)?;
    let mut communities: Vec<Vec<u32>> = local
        .into_iter()
        .map(|community| {
            let mut mapped: Vec<u32> =
                community.iter().map(|&v| sample.to_parent[v as usize]).collect();
            mapped.sort_unstable();
            mapped
        })
        .collect();
    communities.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
    Ok(CommunityResult {
        communities,
        k_prime: estimation.k_prime,
        theta,
        sample,
        membership: estimation.h_normalized,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn threshold_arithmetic() {
        let h = array![[0.6, 0.2], [0.4, 0.8]];
        let coms = threshold_memberships(&h, 0.5).unwrap();
        assert_eq!(coms, vec![vec![0], vec![1]]);
    }

    #[test]
    fn uniform_column_joins_everything_at_mean_threshold() {
        let third = 1.0 / 3.0;
        let h = array![[third], [third], [third]];
        let coms = threshold_memberships(&h, third).unwrap();
        assert_eq!(coms, vec![vec![0], vec![0], vec![0]]);
    }

    #[test]
    fn theta_one_requires_full_membership() {
        let h = array![[1.0, 0.7], [0.0, 0.3]];
        let coms = threshold_memberships(&h, 1.0).unwrap();
        assert_eq!(coms, vec![vec![0], vec![]]);
    }

    #[test]
    fn assign_drops_seedless_communities() {
        let h = array![[0.9, 0.1], [0.1, 0.9]];
        let coms = assign_communities(&h, 0, 0.5).unwrap();
        assert_eq!(coms, vec![vec![0]]);
    }

    #[test]
    fn theta_must_be_positive() {
        let h = array![[1.0]];
        assert!(threshold_memberships(&h, 0.0).is_err());
    }

    #[test]
    fn k6_yields_single_community() {
        let mut edges = Vec::new();
        for i in 0..6u32 {
            for j in i + 1..6 {
                edges.push((i, j));
            }
        }
        let g = Graph::from_index_edges(6, &edges);
        let result = s_mlc(&g, "2", &DetectionParams::default()).unwrap();
        assert_eq!(result.communities.len(), 1);
        assert_eq!(result.communities[0], vec![0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn unknown_seed_label_is_reported() {
        let g = Graph::from_index_edges(3, &[(0, 1), (1, 2)]);
        match s_mlc(&g, "nope", &DetectionParams::default()) {
            Err(Error::UnknownLabel(label)) => assert_eq!(label, "nope"),
            other => panic!("expected unknown-label error, got {other:?}"),
        }
    }

    #[test]
    fn every_community_contains_the_seed() {
        let mut edges = Vec::new();
        // Two 10-cliques sharing node 0.
        for block in 0..2u32 {
            let members: Vec<u32> =
                std::iter::once(0).chain(block * 9 + 1..block * 9 + 10).collect();
            for (i, &u) in members.iter().enumerate() {
                for &v in members.iter().skip(i + 1) {
                    edges.push((u, v));
                }
            }
        }
        let g = Graph::from_index_edges(19, &edges);
        let result = s_mlc(&g, "0", &DetectionParams::default()).unwrap();
        assert!(!result.communities.is_empty());
        for community in &result.communities {
            assert!(community.binary_search(&0).is_ok());
        }
    }
}
