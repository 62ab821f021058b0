use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::factorization::{average_column_sparseness, normalize_columns, snmf, SnmfParams};
use crate::graph::Graph;

#[derive(Debug, Clone, Copy)]
pub struct EstimationParams {
    /// k_max = n_s / k_max_divisor.
    pub k_max_divisor: usize,
    pub beta: f64,
    /// Starting value of the running-best sparseness; no k at or below it
    /// ever wins.
    pub init_sparseness: f64,
    /// Stop after this many consecutive k values that fail to improve the
    /// running best.
    pub patience: usize,
    pub restarts: usize,
    pub rng_seed: u64,
    pub max_outer_iters: usize,
    pub rel_tol: f64,
}

impl Default for EstimationParams {
    fn default() -> Self {
        EstimationParams {
            k_max_divisor: 4,
            beta: 1e-4,
            init_sparseness: 0.8,
            patience: 10,
            restarts: 5,
            rng_seed: 0,
            max_outer_iters: 300,
            rel_tol: 1e-5,
        }
    }
}

impl EstimationParams {
    pub fn validate(&self) -> Result<()> {
        if self.patience == 0 {
            return Err(Error::InvalidParameter("patience must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.init_sparseness) {
            return Err(Error::InvalidParameter("init_sparseness must be in [0,1)".into()));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidParameter("restarts must be at least 1".into()));
        }
        if self.k_max_divisor == 0 {
            return Err(Error::InvalidParameter("k_max_divisor must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct EstimationResult {
    pub k_prime: usize,
    /// k' x n_s membership matrix with unit columns.
    pub h_normalized: Array2<f64>,
    pub best_sparseness: f64,
    /// Per-k restart-aggregated average column sparseness, in sweep order.
    pub sweep_trace: Vec<(usize, f64)>,
    /// Set when the sweep fell back to a single community (sample too small
    /// or no k beat `init_sparseness`).
    pub degenerate: bool,
}

/// Stable per-run seed so every (sweep seed, k, restart) triple is
/// reproducible independent of scheduling.
pub fn derive_seed(base: u64, k: usize, restart: usize) -> u64 {
    let mut z = base
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add((k as u64) << 32)
        .wrapping_add(restart as u64);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

fn single_community_result(n: usize, degenerate: bool) -> EstimationResult {
    EstimationResult {
        k_prime: 1,
        h_normalized: Array2::from_elem((1, n), 1.0),
        best_sparseness: 0.0,
        sweep_trace: Vec::new(),
        degenerate,
    }
}

/// Estimates the number of communities in `g_s` by sweeping the SNMF rank
/// k = 2..=k_max and keeping the k with the highest restart-median average
/// column sparseness of H. The sweep stops early once the running best has
/// not improved for `patience` consecutive k, and falls back to k' = 1 when
/// nothing beats `init_sparseness`.
///
/// Per k, the restart scores are aggregated by median (best-of-restarts
/// biases upward with k); the returned H comes from the lowest-objective
/// restart of the winning k.
pub fn estimate_k(g_s: &Graph, params: &EstimationParams) -> Result<EstimationResult> {
    params.validate()?;
    let n = g_s.node_count();
    if n < 8 {
        return Ok(single_community_result(n, true));
    }
    let a = g_s.adjacency_matrix();
    let k_max = (n / params.k_max_divisor).max(2);

    // All (k, restart) runs are independent; speculate past the patience
    // cutoff in parallel and apply the stop rule on the collected scores.
    let jobs: Vec<(usize, usize)> = (2..=k_max)
        .flat_map(|k| (0..params.restarts).map(move |r| (k, r)))
        .collect();
    let runs: Vec<(usize, usize, f64, f64, Array2<f64>)> = jobs
        .into_par_iter()
        .map(|(k, r)| {
            let snmf_params = SnmfParams {
                beta: params.beta,
                max_outer_iters: params.max_outer_iters,
                rel_tol: params.rel_tol,
                rng_seed: derive_seed(params.rng_seed, k, r),
            };
            let fit = snmf(&a, k, &snmf_params).expect("k <= n by construction");
            let score = average_column_sparseness(&fit.h);
            (k, r, score, fit.final_objective(), fit.h)
        })
        .collect();

    let mut best_k = 1usize;
    let mut best_score = params.init_sparseness;
    let mut best_h: Option<Array2<f64>> = None;
    let mut misses = 0usize;
    let mut trace = Vec::new();
    for k in 2..=k_max {
        let mut scores: Vec<f64> = runs.iter().filter(|run| run.0 == k).map(|run| run.2).collect();
        let score = median(&mut scores);
        trace.push((k, score));
        if score > best_score {
            best_score = score;
            best_k = k;
            let winner = runs
                .iter()
                .filter(|run| run.0 == k)
                .min_by(|x, y| x.3.total_cmp(&y.3))
                .expect("restarts >= 1");
            best_h = Some(winner.4.clone());
            misses = 0;
        } else {
            misses += 1;
            if misses == params.patience {
                break;
            }
        }
    }

    match best_h {
        Some(h) => {
            let (h_normalized, _) = normalize_columns(&h);
            Ok(EstimationResult {
                k_prime: best_k,
                h_normalized,
                best_sparseness: best_score,
                sweep_trace: trace,
                degenerate: false,
            })
        }
        None => {
            let mut result = single_community_result(n, true);
            result.sweep_trace = trace;
            Ok(result)
        }
    }
}

/// Modularity matrix B_ij = A_ij - d_i d_j / 2m.
pub fn modularity_matrix(g: &Graph) -> Result<Array2<f64>> {
    let m = g.edge_count();
    if m == 0 {
        return Err(Error::Domain("modularity undefined for an edgeless graph".into()));
    }
    let n = g.node_count();
    let two_m = 2.0 * m as f64;
    let mut b = Array2::zeros((n, n));
    for i in 0..n as u32 {
        for j in 0..n as u32 {
            let a = if g.has_edge(i, j) { 1.0 } else { 0.0 };
            b[(i as usize, j as usize)] = a - g.degree(i) as f64 * g.degree(j) as f64 / two_m;
        }
    }
    Ok(b)
}

fn check_partition(g: &Graph, partition: &[Vec<u32>]) -> Result<()> {
    let mut seen = vec![false; g.node_count()];
    for community in partition {
        for &v in community {
            if v as usize >= g.node_count() {
                return Err(Error::Domain(format!("node {v} out of range")));
            }
            if seen[v as usize] {
                return Err(Error::Domain(format!("node {v} appears in two communities")));
            }
            seen[v as usize] = true;
        }
    }
    if seen.iter().any(|&s| !s) {
        return Err(Error::Domain("partition does not cover all nodes".into()));
    }
    Ok(())
}

/// Per-community modularity contribution: E_c/m - (vol_c / 2m)^2. Summing
/// over a partition equals (1/2m) * sum of intra-community B entries.
fn community_q(g: &Graph, community: &[u32]) -> f64 {
    let m = g.edge_count() as f64;
    let members: std::collections::HashSet<u32> = community.iter().copied().collect();
    let mut internal = 0usize;
    for &u in community {
        for &v in g.neighbors(u) {
            if u < v && members.contains(&v) {
                internal += 1;
            }
        }
    }
    let vol = g.volume(community) as f64;
    internal as f64 / m - (vol / (2.0 * m)).powi(2)
}

/// Modularity Q of a disjoint node partition.
pub fn modularity_value(g: &Graph, partition: &[Vec<u32>]) -> Result<f64> {
    if g.edge_count() == 0 {
        return Err(Error::Domain("modularity undefined for an edgeless graph".into()));
    }
    check_partition(g, partition)?;
    Ok(partition.iter().map(|c| community_q(g, c)).sum())
}

/// Leading eigenvector of a symmetric matrix by shifted power iteration.
/// The shift (max absolute row sum) makes the algebraically largest
/// eigenvalue dominant; the start vector is pseudo-random because the
/// all-ones vector is an exact eigenvector of the modularity matrix.
fn leading_eigenvector(b: &Array2<f64>, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = b.nrows();
    let shift = (0..n)
        .map(|i| (0..n).map(|j| b[(i, j)].abs()).sum::<f64>())
        .fold(0.0f64, f64::max);
    let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut next = vec![0.0; n];
    for _ in 0..10_000 {
        for i in 0..n {
            let mut acc = shift * v[i];
            for j in 0..n {
                acc += b[(i, j)] * v[j];
            }
            next[i] = acc;
        }
        let norm = next.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            break;
        }
        for x in &mut next {
            *x /= norm;
        }
        let delta = v.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0f64, f64::max);
        std::mem::swap(&mut v, &mut next);
        if delta < 1e-8 {
            break;
        }
    }
    v
}

/// Community count by recursive spectral bisection of the (generalized)
/// modularity matrix: split along the sign of the leading eigenvector and
/// accept a split only when it strictly increases total Q.
pub fn modularity_estimate_k(g: &Graph, rng_seed: u64) -> Result<(usize, Vec<Vec<u32>>)> {
    let b = modularity_matrix(g)?;
    if !g.is_connected() {
        return Err(Error::Domain("modularity bisection requires a connected graph".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(rng_seed, 0, 0));
    let mut final_partition: Vec<Vec<u32>> = Vec::new();
    let mut stack: Vec<Vec<u32>> = vec![(0..g.node_count() as u32).collect()];
    while let Some(subset) = stack.pop() {
        if subset.len() < 2 {
            final_partition.push(subset);
            continue;
        }
        // Newman's generalized modularity matrix for the subset: subtract
        // the row sums on the diagonal so splitting an already-split group
        // is scored correctly.
        let s = subset.len();
        let mut bg = Array2::zeros((s, s));
        for (r, &i) in subset.iter().enumerate() {
            let row_sum: f64 = subset.iter().map(|&j| b[(i as usize, j as usize)]).sum();
            for (c, &j) in subset.iter().enumerate() {
                bg[(r, c)] = b[(i as usize, j as usize)];
            }
            bg[(r, r)] -= row_sum;
        }
        let v = leading_eigenvector(&bg, &mut rng);
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        for (idx, &node) in subset.iter().enumerate() {
            if v[idx] >= 0.0 {
                pos.push(node);
            } else {
                neg.push(node);
            }
        }
        if pos.is_empty() || neg.is_empty() {
            final_partition.push(subset);
            continue;
        }
        let delta = community_q(g, &pos) + community_q(g, &neg) - community_q(g, &subset);
        if delta > 1e-12 {
            stack.push(neg);
            stack.push(pos);
        } else {
            final_partition.push(subset);
        }
    }
    final_partition.sort();
    Ok((final_partition.len(), final_partition))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn fixture(name: &str) -> Graph {
        let path = format!("{}/fixtures/{name}.edges", env!("CARGO_MANIFEST_DIR"));
        let data = std::fs::read(path).unwrap();
        Graph::load_edge_list(&data[..]).unwrap()
    }

    fn two_cliques_bridged(size: u32) -> Graph {
        let mut edges = Vec::new();
        for base in [0, size] {
            for i in 0..size {
                for j in i + 1..size {
                    edges.push((base + i, base + j));
                }
            }
        }
        edges.push((size - 1, size));
        Graph::from_index_edges(2 * size, &edges)
    }

    #[test]
    fn tiny_sample_falls_back_to_single_community() {
        let g = Graph::from_index_edges(5, &[(0, 1), (1, 2), (2, 3), (3, 4)]);
        let result = estimate_k(&g, &EstimationParams::default()).unwrap();
        assert_eq!(result.k_prime, 1);
        assert!(result.degenerate);
        assert_eq!(result.h_normalized.ncols(), 5);
    }

    #[test]
    fn two_planted_blocks_estimate_two() {
        // Noisy blocks rather than perfect cliques: a clique admits one-hot
        // splits into halves, so sparseness alone cannot pin its count.
        let g = crate::generator::generate_planted(2, 16, 0.4, 0.02, 0, 7).unwrap().graph;
        let result = estimate_k(&g, &EstimationParams::default()).unwrap();
        assert_eq!(result.k_prime, 2);
        // Argmax consistency: the reported k attains the trace maximum.
        let max = result.sweep_trace.iter().map(|&(_, s)| s).fold(0.0f64, f64::max);
        let reported = result.sweep_trace.iter().find(|&&(k, _)| k == result.k_prime).unwrap().1;
        assert_abs_diff_eq!(max, reported, epsilon = 1e-12);
        assert!(result.sweep_trace.iter().all(|&(_, s)| (0.0..=1.0).contains(&s)));
    }

    #[test]
    fn normalized_membership_has_unit_columns() {
        let g = two_cliques_bridged(10);
        let result = estimate_k(&g, &EstimationParams::default()).unwrap();
        for col in result.h_normalized.columns() {
            assert_abs_diff_eq!(col.sum(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn estimation_is_deterministic() {
        let g = two_cliques_bridged(8);
        let a = estimate_k(&g, &EstimationParams::default()).unwrap();
        let b = estimate_k(&g, &EstimationParams::default()).unwrap();
        assert_eq!(a.k_prime, b.k_prime);
        assert_eq!(a.sweep_trace, b.sweep_trace);
    }

    #[test]
    fn modularity_matrix_single_edge() {
        let g = Graph::from_index_edges(2, &[(0, 1)]);
        let b = modularity_matrix(&g).unwrap();
        assert_abs_diff_eq!(b[(0, 0)], -0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(b[(0, 1)], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn modularity_matrix_rows_sum_to_zero() {
        let g = fixture("karate");
        let b = modularity_matrix(&g).unwrap();
        for i in 0..g.node_count() {
            let sum: f64 = (0..g.node_count()).map(|j| b[(i, j)]).sum();
            assert_abs_diff_eq!(sum, 0.0, epsilon = 1e-9);
            for j in 0..g.node_count() {
                assert_abs_diff_eq!(b[(i, j)], b[(j, i)], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn modularity_of_whole_graph_is_zero() {
        let g = fixture("karate");
        let all: Vec<u32> = (0..g.node_count() as u32).collect();
        assert_abs_diff_eq!(modularity_value(&g, &[all]).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn modularity_two_disjoint_triangles() {
        let g = Graph::from_index_edges(6, &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]);
        let q = modularity_value(&g, &[vec![0, 1, 2], vec![3, 4, 5]]).unwrap();
        assert_abs_diff_eq!(q, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn modularity_karate_factions() {
        let g = fixture("karate");
        let data = std::fs::read(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/karate.cmty")).unwrap();
        let text = String::from_utf8(data).unwrap();
        let partition: Vec<Vec<u32>> = text
            .lines()
            .map(|line| line.split_whitespace().map(|l| g.node_index(l).unwrap()).collect())
            .collect();
        let q = modularity_value(&g, &partition).unwrap();
        assert_abs_diff_eq!(q, 0.371, epsilon = 1e-3);
    }

    #[test]
    fn modularity_value_matches_matrix_sum() {
        let g = two_cliques_bridged(5);
        let b = modularity_matrix(&g).unwrap();
        let partition = vec![(0..5).collect::<Vec<u32>>(), (5..10).collect()];
        let direct = modularity_value(&g, &partition).unwrap();
        let mut from_b = 0.0;
        for c in &partition {
            for &i in c {
                for &j in c {
                    from_b += b[(i as usize, j as usize)];
                }
            }
        }
        from_b /= 2.0 * g.edge_count() as f64;
        assert_abs_diff_eq!(direct, from_b, epsilon = 1e-12);
    }

    #[test]
    fn modularity_rejects_bad_partitions() {
        let g = Graph::from_index_edges(3, &[(0, 1), (1, 2)]);
        assert!(modularity_value(&g, &[vec![0, 1]]).is_err());
        assert!(modularity_value(&g, &[vec![0, 1], vec![1, 2]]).is_err());
    }

    #[test]
    fn bisection_splits_bridged_cliques() {
        let g = two_cliques_bridged(6);
        let (k, partition) = modularity_estimate_k(&g, 0).unwrap();
        assert_eq!(k, 2);
        let q = modularity_value(&g, &partition).unwrap();
        assert!(q >= 0.0);
    }

    #[test]
    fn bisection_never_ends_below_trivial_q() {
        for name in ["karate", "dolphins", "football"] {
            let g = fixture(name);
            let (_, partition) = modularity_estimate_k(&g, 0).unwrap();
            assert!(modularity_value(&g, &partition).unwrap() >= 0.0);
        }
    }

    #[test]
    fn bisection_is_deterministic() {
        let g = fixture("karate");
        let a = modularity_estimate_k(&g, 7).unwrap();
        let b = modularity_estimate_k(&g, 7).unwrap();
        assert_eq!(a.1, b.1);
    }
}
