use std::collections::HashSet;
use std::io::BufRead;

use crate::detection::CommunityResult;
use crate::error::{Error, Result};
use crate::graph::Graph;

/// Ground-truth communities in parent-graph indices; may overlap.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub communities: Vec<Vec<u32>>,
}

impl GroundTruth {
    /// Reads the one-community-per-line, whitespace-separated-labels format.
    /// Unknown labels are collected and reported together (first five).
    pub fn load<R: BufRead>(reader: R, g: &Graph) -> Result<GroundTruth> {
        let mut communities = Vec::new();
        let mut unknown = Vec::new();
        for line in reader.lines() {
            let line = line?;
            let mut community: Vec<u32> = Vec::new();
            for token in line.split_whitespace() {
                match g.node_index(token) {
                    Some(v) => community.push(v),
                    None => {
                        if unknown.len() < 5 {
                            unknown.push(token.to_string());
                        }
                    }
                }
            }
            if !community.is_empty() {
                community.sort_unstable();
                community.dedup();
                communities.push(community);
            }
        }
        if !unknown.is_empty() {
            return Err(Error::Domain(format!(
                "ground-truth labels not present in the graph: {}",
                unknown.join(", ")
            )));
        }
        Ok(GroundTruth { communities })
    }

    /// Communities containing the given node.
    pub fn containing(&self, v: u32) -> Vec<Vec<u32>> {
        self.communities
            .iter()
            .filter(|c| c.binary_search(&v).is_ok())
            .cloned()
            .collect()
    }
}

/// Conductance of a node set: cut edges over the smaller side's volume.
pub fn conductance(g: &Graph, c: &[u32]) -> Result<f64> {
    if c.is_empty() || c.len() >= g.node_count() {
        return Err(Error::Domain("conductance needs a nonempty strict subset".into()));
    }
    let members: HashSet<u32> = c.iter().copied().collect();
    let mut cut = 0usize;
    for &u in c {
        for &v in g.neighbors(u) {
            if !members.contains(&v) {
                cut += 1;
            }
        }
    }
    let vol = g.volume(c);
    let total = 2 * g.edge_count();
    let denom = vol.min(total - vol);
    if denom == 0 {
        return Err(Error::Domain("conductance denominator is zero".into()));
    }
    Ok(cut as f64 / denom as f64)
}

fn overlap(a: &[u32], b: &[u32]) -> usize {
    let set: HashSet<u32> = a.iter().copied().collect();
    b.iter().filter(|v| set.contains(v)).count()
}

/// Recall of a ground-truth community: best coverage by any detected set.
pub fn recall(gt_community: &[u32], detected: &[Vec<u32>]) -> f64 {
    if gt_community.is_empty() {
        return 0.0;
    }
    detected
        .iter()
        .map(|d| overlap(gt_community, d) as f64 / gt_community.len() as f64)
        .fold(0.0, f64::max)
}

/// Precision of a detected community: best relevance to any ground truth.
pub fn precision(detected_community: &[u32], gt: &[Vec<u32>]) -> f64 {
    if detected_community.is_empty() {
        return 0.0;
    }
    gt.iter()
        .map(|c| overlap(c, detected_community) as f64 / detected_community.len() as f64)
        .fold(0.0, f64::max)
}

/// F_sigma score; F1 balances precision and recall, F2 leans on recall.
/// Defined as 0 when both inputs are 0.
pub fn f_score(prec: f64, rec: f64, sigma: u32) -> f64 {
    if prec == 0.0 && rec == 0.0 {
        return 0.0;
    }
    let s2 = (sigma * sigma) as f64;
    (1.0 + s2) * prec * rec / (s2 * prec + rec)
}

#[derive(Debug, Clone)]
pub struct DetectedScores {
    pub precision: f64,
    pub f1: f64,
    pub f2: f64,
    pub conductance: f64,
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub per_detected: Vec<DetectedScores>,
    pub per_gt_recall: Vec<f64>,
    pub mean_precision: f64,
    pub mean_recall: f64,
    pub mean_f1: f64,
    pub mean_f2: f64,
    pub mean_conductance: f64,
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Scores a detection result against the seed's ground-truth communities.
/// Each detected community is paired with its best-overlapping ground truth
/// for F scores; recall is reported per ground-truth community.
pub fn evaluate(g: &Graph, gt: &GroundTruth, result: &CommunityResult) -> Result<EvalReport> {
    let seed = result.sample.seed_parent();
    let seed_gt = gt.containing(seed);
    if seed_gt.is_empty() {
        return Err(Error::Domain(format!(
            "seed {} is absent from every ground-truth community",
            g.label(seed)
        )));
    }
    let mut per_detected = Vec::new();
    for community in &result.communities {
        let mut best_prec = 0.0f64;
        let mut paired_rec = 0.0f64;
        for c in &seed_gt {
            let inter = overlap(c, community) as f64;
            let p = inter / community.len() as f64;
            if p > best_prec {
                best_prec = p;
                paired_rec = inter / c.len() as f64;
            }
        }
        let phi = if community.len() < g.node_count() {
            conductance(g, community)?
        } else {
            0.0
        };
        per_detected.push(DetectedScores {
            precision: best_prec,
            f1: f_score(best_prec, paired_rec, 1),
            f2: f_score(best_prec, paired_rec, 2),
            conductance: phi,
        });
    }
    let per_gt_recall: Vec<f64> =
        seed_gt.iter().map(|c| recall(c, &result.communities)).collect();
    let report = EvalReport {
        mean_precision: mean(&per_detected.iter().map(|s| s.precision).collect::<Vec<_>>()),
        mean_recall: mean(&per_gt_recall),
        mean_f1: mean(&per_detected.iter().map(|s| s.f1).collect::<Vec<_>>()),
        mean_f2: mean(&per_detected.iter().map(|s| s.f2).collect::<Vec<_>>()),
        mean_conductance: mean(&per_detected.iter().map(|s| s.conductance).collect::<Vec<_>>()),
        per_detected,
        per_gt_recall,
    };
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn triangle() -> Graph {
        Graph::from_index_edges(3, &[(0, 1), (1, 2), (0, 2)])
    }

    #[test]
    fn conductance_triangle_pair() {
        let g = triangle();
        assert_abs_diff_eq!(conductance(&g, &[0, 1]).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn conductance_bridged_triangles() {
        let g = Graph::from_index_edges(6, &[(0, 1), (1, 2), (0, 2), (2, 3), (3, 4), (4, 5), (3, 5)]);
        assert_abs_diff_eq!(conductance(&g, &[0, 1, 2]).unwrap(), 1.0 / 7.0, epsilon = 1e-12);
    }

    #[test]
    fn conductance_of_disconnected_component_is_zero() {
        let g = Graph::from_index_edges(5, &[(0, 1), (1, 2), (0, 2), (3, 4)]);
        assert_abs_diff_eq!(conductance(&g, &[3, 4]).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn conductance_rejects_degenerate_sets() {
        let g = triangle();
        assert!(conductance(&g, &[]).is_err());
        assert!(conductance(&g, &[0, 1, 2]).is_err());
    }

    #[test]
    fn conductance_min_symmetry_at_half_volume() {
        let g = Graph::from_index_edges(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]);
        let a = conductance(&g, &[0, 1]).unwrap();
        let b = conductance(&g, &[2, 3]).unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);
    }

    #[test]
    fn recall_and_precision_arithmetic() {
        assert_abs_diff_eq!(recall(&[1, 2, 3, 4], &[vec![1, 2]]), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(recall(&[1, 2], &[vec![1, 2], vec![5]]), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(recall(&[1, 2], &[]), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(precision(&[1, 2, 3, 4], &[vec![1, 2]]), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(precision(&[1, 2], &[vec![1, 2, 9]]), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(precision(&[7], &[vec![1, 2]]), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn f_score_reference_points() {
        assert_abs_diff_eq!(f_score(1.0, 1.0, 1), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f_score(1.0, 1.0, 2), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f_score(0.5, 1.0, 1), 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f_score(0.5, 1.0, 2), 5.0 * 0.5 / (4.0 * 0.5 + 1.0), epsilon = 1e-12);
        assert_eq!(f_score(0.0, 0.0, 1), 0.0);
    }

    #[test]
    fn ground_truth_load_reports_unknown_labels() {
        let g = triangle();
        let err = GroundTruth::load("0 1\n2 7 8\n".as_bytes(), &g).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains('7') && msg.contains('8'), "{msg}");
    }

    #[test]
    fn exchange_duality_of_precision_and_recall() {
        // Precision of X against {Y} equals recall of X-as-ground-truth
        // against {Y}: both normalize the overlap by |X|.
        let x = vec![1u32, 2, 3];
        let y = vec![2u32, 3, 4, 5];
        assert_abs_diff_eq!(precision(&x, &[y.clone()]), recall(&x, &[y]), epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn f2_favors_recall(p in 0.01f64..1.0, r in 0.01f64..1.0) {
            let f1 = f_score(p, r, 1);
            let f2 = f_score(p, r, 2);
            if r >= p {
                prop_assert!(f2 >= f1 - 1e-12);
            } else {
                prop_assert!(f2 <= f1 + 1e-12);
            }
        }
    }
}
