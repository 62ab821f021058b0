use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::graph::Graph;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PprParams {
    pub alpha: f64,
    pub epsilon: f64,
}

impl Default for PprParams {
    fn default() -> Self {
        PprParams { alpha: 0.99, epsilon: 1e-3 }
    }
}

impl PprParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParameter(format!("alpha must be in (0,1), got {}", self.alpha)));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidParameter(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HkParams {
    pub t: f64,
    pub epsilon: f64,
}

impl HkParams {
    /// Coarse preset: epsilon = 1e-2, t = 80.
    pub fn coarse() -> Self {
        HkParams { t: 80.0, epsilon: 1e-2 }
    }

    /// Fine preset: epsilon = 1e-3, t = 40.
    pub fn fine() -> Self {
        HkParams { t: 40.0, epsilon: 1e-3 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t > 0.0) {
            return Err(Error::InvalidParameter(format!("t must be positive, got {}", self.t)));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidParameter(format!("epsilon must be in (0,1), got {}", self.epsilon)));
        }
        Ok(())
    }

    /// Taylor truncation order N = ceil(2 t ln(1/epsilon)).
    pub fn truncation(&self) -> usize {
        (2.0 * self.t * (1.0 / self.epsilon).ln()).ceil() as usize
    }

    /// Weights psi_0..psi_N from the descending recurrence
    /// psi_N = 1, psi_j = 1 + t/(j+1) * psi_{j+1}.
    pub fn psi(&self) -> Vec<f64> {
        let n = self.truncation();
        let mut psi = vec![1.0; n + 1];
        for j in (0..n).rev() {
            psi[j] = 1.0 + self.t / (j as f64 + 1.0) * psi[j + 1];
        }
        psi
    }
}

fn check_seed(g: &Graph, seed: u32) -> Result<()> {
    if seed as usize >= g.node_count() {
        return Err(Error::Domain(format!("seed index {seed} out of range")));
    }
    if g.degree(seed) == 0 {
        return Err(Error::Domain(format!("seed {} is isolated", g.label(seed))));
    }
    Ok(())
}

/// Approximate personalized PageRank by residual pushing. Returns `(p', r)`
/// as dense vectors. At termination every residual satisfies
/// `r[v] < epsilon * d(v)`, mass is conserved (`sum p' + sum r = 1`), and
/// `p'` is bounded above by the diffusion's exact limit.
///
/// Each push keeps half of the non-teleported mass at the node (a lazy
/// walk), so the exact limit equals the plain-restart PageRank at
/// [`lazy_alpha`]`(alpha)`, not at `alpha` itself.
pub fn approximate_ppr(g: &Graph, seed: u32, params: &PprParams) -> Result<(Vec<f64>, Vec<f64>)> {
    params.validate()?;
    check_seed(g, seed)?;
    let n = g.node_count();
    let alpha = params.alpha;
    let eps = params.epsilon;
    let mut p = vec![0.0; n];
    let mut r = vec![0.0; n];
    let mut in_queue = vec![false; n];
    r[seed as usize] = 1.0;
    let mut queue = VecDeque::new();
    queue.push_back(seed);
    in_queue[seed as usize] = true;
    // The seed is pushed once unconditionally even if already below threshold.
    let mut first = true;
    while let Some(u) = queue.pop_front() {
        in_queue[u as usize] = false;
        let du = g.degree(u) as f64;
        if !first && r[u as usize] < eps * du {
            continue;
        }
        first = false;
        let ru = r[u as usize];
        p[u as usize] += (1.0 - alpha) * ru;
        let remaining = alpha * ru;
        r[u as usize] = remaining / 2.0;
        let share = remaining / (2.0 * du);
        for &v in g.neighbors(u) {
            r[v as usize] += share;
            if r[v as usize] >= eps * g.degree(v) as f64 && !in_queue[v as usize] {
                in_queue[v as usize] = true;
                queue.push_back(v);
            }
        }
        if r[u as usize] >= eps * du && !in_queue[u as usize] {
            in_queue[u as usize] = true;
            queue.push_back(u);
        }
    }
    Ok((p, r))
}

/// Restart probability of the plain (non-lazy) walk whose PageRank equals
/// the lazy-walk PageRank at `alpha`.
pub fn lazy_alpha(alpha: f64) -> f64 {
    alpha / (2.0 - alpha)
}

/// Exact personalized PageRank via fixed-point iteration of
/// `p = alpha * T p + (1 - alpha) * e_seed` with the column-stochastic
/// transition `T = A D^{-1}`, to max-norm tolerance `tol`.
pub fn exact_ppr(g: &Graph, seed: u32, alpha: f64, tol: f64) -> Result<Vec<f64>> {
    check_seed(g, seed)?;
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter("tol must be positive".into()));
    }
    let n = g.node_count();
    let mut p = vec![0.0; n];
    p[seed as usize] = 1.0;
    loop {
        let mut next = vec![0.0; n];
        for u in 0..n as u32 {
            let share = alpha * p[u as usize] / g.degree(u).max(1) as f64;
            for &v in g.neighbors(u) {
                next[v as usize] += share;
            }
        }
        next[seed as usize] += 1.0 - alpha;
        let delta = p
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        p = next;
        if delta < tol {
            return Ok(p);
        }
    }
}

/// Heat-kernel diffusion by residual relaxation over Taylor levels.
/// The result `h'` satisfies `max_v |h[v] - h'[v]| / d(v) < epsilon`
/// against the exact series.
pub fn hk_relax(g: &Graph, seed: u32, params: &HkParams) -> Result<Vec<f64>> {
    params.validate()?;
    check_seed(g, seed)?;
    let n = g.node_count();
    let t = params.t;
    let big_n = params.truncation();
    let psi = params.psi();
    let scale = params.epsilon * params.t.exp() / (2.0 * big_n as f64);
    let mut x = vec![0.0; n];
    // Residual per (node, Taylor level); levels are only ever occupied a few
    // at a time, so a dense n x (N+1) table would be wasteful.
    let mut residual: std::collections::HashMap<(u32, usize), f64> = std::collections::HashMap::new();
    let mut queue = VecDeque::new();
    residual.insert((seed, 0), 1.0);
    queue.push_back((seed, 0usize));
    while let Some((v, j)) = queue.pop_front() {
        let rvj = match residual.remove(&(v, j)) {
            Some(val) if val > 0.0 => val,
            _ => continue,
        };
        x[v as usize] += rvj;
        let dv = g.degree(v) as f64;
        let mass = t * rvj / ((j as f64 + 1.0) * dv);
        for &u in g.neighbors(v) {
            if j + 1 == big_n {
                x[u as usize] += mass;
                continue;
            }
            let entry = residual.entry((u, j + 1)).or_insert(0.0);
            let threshold = scale * g.degree(u) as f64 / psi[j + 1];
            let old = *entry;
            *entry += mass;
            if old < threshold && *entry >= threshold {
                queue.push_back((u, j + 1));
            }
        }
    }
    let damp = (-t).exp();
    for value in &mut x {
        *value *= damp;
    }
    Ok(x)
}

/// Exact heat kernel `h = e^{-t} sum_{k=0}^{terms} t^k/k! T^k e_seed`
/// with the column-stochastic transition, as a truncated series oracle.
pub fn exact_hk(g: &Graph, seed: u32, t: f64, terms: usize) -> Vec<f64> {
    let n = g.node_count();
    let damp = (-t).exp();
    let mut term = vec![0.0; n];
    term[seed as usize] = 1.0;
    let mut h = vec![damp; n];
    for v in 0..n {
        h[v] = damp * term[v];
    }
    for k in 1..=terms {
        let mut next = vec![0.0; n];
        for u in 0..n as u32 {
            let share = term[u as usize] * t / (k as f64 * g.degree(u).max(1) as f64);
            for &v in g.neighbors(u) {
                next[v as usize] += share;
            }
        }
        term = next;
        for v in 0..n {
            h[v] += damp * term[v];
        }
    }
    h
}
