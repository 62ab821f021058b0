use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const DIV_EPS: f64 = 1e-12;

/// Nonnegative factors of an adjacency matrix, with the objective value
/// recorded after every outer iteration.
#[derive(Debug, Clone)]
pub struct FactorPair {
    pub w: Array2<f64>,
    pub h: Array2<f64>,
    pub objective_trace: Vec<f64>,
}

impl FactorPair {
    pub fn final_objective(&self) -> f64 {
        *self.objective_trace.last().expect("at least one iteration runs")
    }
}

#[derive(Debug, Clone, Copy)]
pub struct NmfParams {
    pub max_outer_iters: usize,
    pub rel_tol: f64,
    pub rng_seed: u64,
}

impl Default for NmfParams {
    fn default() -> Self {
        NmfParams { max_outer_iters: 300, rel_tol: 1e-5, rng_seed: 0 }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SnmfParams {
    pub beta: f64,
    pub max_outer_iters: usize,
    pub rel_tol: f64,
    pub rng_seed: u64,
}

impl Default for SnmfParams {
    fn default() -> Self {
        SnmfParams { beta: 1e-4, max_outer_iters: 300, rel_tol: 1e-5, rng_seed: 0 }
    }
}

fn check_rank(a: &Array2<f64>, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if k > a.nrows() {
        return Err(Error::InvalidParameter(format!(
            "k = {k} exceeds matrix dimension {}",
            a.nrows()
        )));
    }
    Ok(())
}

/// Strictly positive uniform init on (0.01, 1]; multiplicative updates can
/// never revive an exactly-zero entry.
fn init_factors(n: usize, m: usize, k: usize, seed: u64) -> (Array2<f64>, Array2<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = Array2::from_shape_fn((n, k), |_| rng.random_range(0.01..=1.0));
    let h = Array2::from_shape_fn((k, m), |_| rng.random_range(0.01..=1.0));
    (w, h)
}

fn frobenius_objective(a: &Array2<f64>, w: &Array2<f64>, h: &Array2<f64>) -> f64 {
    let r = a - &w.dot(h);
    r.iter().map(|x| x * x).sum()
}

/// NMF minimizing the Frobenius cost by Lee–Seung multiplicative updates.
pub fn nmf_frobenius(a: &Array2<f64>, k: usize, params: &NmfParams) -> Result<FactorPair> {
    check_rank(a, k)?;
    let (mut w, mut h) = init_factors(a.nrows(), a.ncols(), k, params.rng_seed);
    let mut trace = vec![frobenius_objective(a, &w, &h)];
    for _ in 0..params.max_outer_iters {
        let wta = w.t().dot(a);
        let wtwh = w.t().dot(&w).dot(&h);
        azip_update(&mut h, &wta, &wtwh);
        let aht = a.dot(&h.t());
        let whht = w.dot(&h.dot(&h.t()));
        azip_update(&mut w, &aht, &whht);
        let obj = frobenius_objective(a, &w, &h);
        let prev = *trace.last().unwrap();
        trace.push(obj);
        if (prev - obj).abs() <= params.rel_tol * prev.max(DIV_EPS) {
            break;
        }
    }
    Ok(FactorPair { w, h, objective_trace: trace })
}

fn azip_update(x: &mut Array2<f64>, numer: &Array2<f64>, denom: &Array2<f64>) {
    ndarray::Zip::from(x).and(numer).and(denom).for_each(|x, &n, &d| {
        *x *= n / (d + DIV_EPS);
    });
}

fn kl_objective(a: &Array2<f64>, w: &Array2<f64>, h: &Array2<f64>) -> f64 {
    let wh = w.dot(h);
    a.iter()
        .zip(wh.iter())
        .map(|(&aij, &mij)| {
            let m = mij.max(DIV_EPS);
            let cross = if aij > 0.0 { aij * (aij / m).ln() } else { 0.0 };
            cross - aij + mij
        })
        .sum()
}

/// NMF minimizing the Kullback–Leibler divergence by multiplicative updates.
pub fn nmf_kl(a: &Array2<f64>, k: usize, params: &NmfParams) -> Result<FactorPair> {
    check_rank(a, k)?;
    let (mut w, mut h) = init_factors(a.nrows(), a.ncols(), k, params.rng_seed);
    let mut trace = vec![kl_objective(a, &w, &h)];
    for _ in 0..params.max_outer_iters {
        let wh = w.dot(&h).mapv(|x| x.max(DIV_EPS));
        let ratio = a / &wh;
        let numer = w.t().dot(&ratio);
        let wsum = w.sum_axis(Axis(0));
        for (i, mut row) in h.axis_iter_mut(Axis(0)).enumerate() {
            let d = wsum[i] + DIV_EPS;
            row.zip_mut_with(&numer.row(i), |hij, &nij| *hij *= nij / d);
        }
        let wh = w.dot(&h).mapv(|x| x.max(DIV_EPS));
        let ratio = a / &wh;
        let numer = ratio.dot(&h.t());
        let hsum = h.sum_axis(Axis(1));
        for (j, mut col) in w.axis_iter_mut(Axis(1)).enumerate() {
            let d = hsum[j] + DIV_EPS;
            col.zip_mut_with(&numer.column(j), |wij, &nij| *wij *= nij / d);
        }
        let obj = kl_objective(a, &w, &h);
        let prev = *trace.last().unwrap();
        trace.push(obj);
        if (prev - obj).abs() <= params.rel_tol * prev.max(DIV_EPS) {
            break;
        }
    }
    Ok(FactorPair { w, h, objective_trace: trace })
}

fn snmf_objective(a: &Array2<f64>, w: &Array2<f64>, h: &Array2<f64>, beta: f64) -> f64 {
    let fro = frobenius_objective(a, w, h);
    let penalty: f64 = h
        .axis_iter(Axis(1))
        .map(|col| {
            let s: f64 = col.sum();
            s * s
        })
        .sum();
    fro + beta * penalty
}

/// Sparse NMF: Frobenius cost plus `beta * sum_j ||h_j||_1^2`, minimized by
/// alternating nonnegativity-constrained least squares. Each half-step is an
/// exact block minimizer, so the objective trace is non-increasing.
pub fn snmf(a: &Array2<f64>, k: usize, params: &SnmfParams) -> Result<FactorPair> {
    check_rank(a, k)?;
    if params.beta < 0.0 {
        return Err(Error::InvalidParameter("beta must be nonnegative".into()));
    }
    let n = a.nrows();
    let (mut w, mut h) = init_factors(n, a.ncols(), k, params.rng_seed);
    let mut trace = vec![snmf_objective(a, &w, &h, params.beta)];
    for _ in 0..params.max_outer_iters {
        // W rows solve min ||H^T W^T - A^T||; the gram H H^T is shared.
        let gram_w = h.dot(&h.t());
        let rhs_w = h.dot(&a.t());
        for (i, mut row) in w.axis_iter_mut(Axis(0)).enumerate() {
            let rhs: Vec<f64> = rhs_w.column(i).to_vec();
            let x = nnls_gram(&gram_w, &rhs);
            for (dst, src) in row.iter_mut().zip(&x) {
                *dst = *src;
            }
        }
        // H columns solve the stacked system [W; sqrt(beta) 1^T] h_j = [a_j; 0],
        // whose gram is W^T W + beta * ones.
        let mut gram_h = w.t().dot(&w);
        gram_h += params.beta;
        let rhs_h = w.t().dot(a);
        for (j, mut col) in h.axis_iter_mut(Axis(1)).enumerate() {
            let rhs: Vec<f64> = rhs_h.column(j).to_vec();
            let x = nnls_gram(&gram_h, &rhs);
            for (dst, src) in col.iter_mut().zip(&x) {
                *dst = *src;
            }
        }
        let obj = snmf_objective(a, &w, &h, params.beta);
        let prev = *trace.last().unwrap();
        trace.push(obj);
        if (prev - obj).abs() <= params.rel_tol * prev.max(DIV_EPS) {
            break;
        }
    }
    Ok(FactorPair { w, h, objective_trace: trace })
}

/// Nonnegative least squares `min_X ||C X - D||_F, X >= 0`, solved per
/// column by the active-set method on the normal equations. Rows of X whose
/// C column is all zero stay at zero.
pub fn nnls_solve(c: &Array2<f64>, d: &Array2<f64>) -> Array2<f64> {
    let ctc = c.t().dot(c);
    let ctd = c.t().dot(d);
    let q = c.ncols();
    let mut x = Array2::zeros((q, d.ncols()));
    for (j, mut col) in x.axis_iter_mut(Axis(1)).enumerate() {
        let rhs: Vec<f64> = ctd.column(j).to_vec();
        let sol = nnls_gram(&ctc, &rhs);
        for (dst, src) in col.iter_mut().zip(&sol) {
            *dst = *src;
        }
    }
    x
}

/// Lawson–Hanson active set working on the gram system `CtC x = Ctd`.
/// Terminates at the KKT point: `x .* (CtC x - Ctd) = 0` and
/// `CtC x - Ctd >= -tol` on the zero set.
fn nnls_gram(ctc: &Array2<f64>, ctd: &[f64]) -> Vec<f64> {
    let q = ctd.len();
    let scale = ctd.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let tol = 1e-8 * scale;
    let mut x = vec![0.0; q];
    let mut passive = vec![false; q];
    // Columns of C that are identically zero (zero gram diagonal) are
    // excluded: their coefficient is pinned at 0.
    let usable: Vec<bool> = (0..q).map(|i| ctc[(i, i)] > 0.0).collect();
    let max_outer = 3 * q + 30;
    for _ in 0..max_outer {
        // Negative gradient of the least-squares objective.
        let mut best = tol;
        let mut best_i = None;
        for i in 0..q {
            if passive[i] || !usable[i] {
                continue;
            }
            let grad_i = ctd[i] - ctc.row(i).iter().zip(&x).map(|(a, b)| a * b).sum::<f64>();
            if grad_i > best {
                best = grad_i;
                best_i = Some(i);
            }
        }
        let Some(enter) = best_i else { break };
        passive[enter] = true;
        let mut scratch = Vec::new();
        loop {
            let support: Vec<usize> = (0..q).filter(|&i| passive[i]).collect();
            let z = solve_subsystem(ctc, ctd, &support, &mut scratch);
            if z.iter().all(|&v| v > 0.0) {
                for (&i, &zi) in support.iter().zip(&z) {
                    x[i] = zi;
                }
                for (i, xi) in x.iter_mut().enumerate() {
                    if !passive[i] {
                        *xi = 0.0;
                    }
                }
                break;
            }
            // Step as far toward z as feasibility allows, then drop the
            // variables that hit zero.
            let mut alpha = 1.0f64;
            for (&i, &zi) in support.iter().zip(&z) {
                if zi <= 0.0 {
                    let denom = x[i] - zi;
                    if denom > 0.0 {
                        alpha = alpha.min(x[i] / denom);
                    } else {
                        alpha = 0.0;
                    }
                }
            }
            for (&i, &zi) in support.iter().zip(&z) {
                x[i] += alpha * (zi - x[i]);
            }
            for (&i, &zi) in support.iter().zip(&z) {
                if x[i] <= 1e-12 || zi <= 0.0 && x[i] <= 1e-10 * scale {
                    x[i] = 0.0;
                    passive[i] = false;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
    }
    x
}

/// Gaussian elimination with partial pivoting on the passive subset of the
/// gram system, in a caller-provided flat scratch buffer (this sits on the
/// innermost loop of every factorization). Subsets are small (at most the
/// factorization rank).
fn solve_subsystem(
    ctc: &Array2<f64>,
    ctd: &[f64],
    support: &[usize],
    scratch: &mut Vec<f64>,
) -> Vec<f64> {
    let s = support.len();
    let w = s + 1;
    scratch.clear();
    scratch.resize(s * w, 0.0);
    let m = scratch;
    for (r, &i) in support.iter().enumerate() {
        for (c, &j) in support.iter().enumerate() {
            m[r * w + c] = ctc[(i, j)];
        }
        m[r * w + s] = ctd[i];
    }
    for col in 0..s {
        let pivot = (col..s)
            .max_by(|&a, &b| m[a * w + col].abs().total_cmp(&m[b * w + col].abs()))
            .unwrap();
        if pivot != col {
            for c in 0..w {
                m.swap(col * w + c, pivot * w + c);
            }
        }
        let p = m[col * w + col];
        if p.abs() < 1e-300 {
            continue;
        }
        for r in col + 1..s {
            let f = m[r * w + col] / p;
            if f != 0.0 {
                for c in col..w {
                    m[r * w + c] -= f * m[col * w + c];
                }
            }
        }
    }
    let mut z = vec![0.0; s];
    for r in (0..s).rev() {
        let mut acc = m[r * w + s];
        for c in r + 1..s {
            acc -= m[r * w + c] * z[c];
        }
        z[r] = if m[r * w + r].abs() < 1e-300 { 0.0 } else { acc / m[r * w + r] };
    }
    z
}

/// Hoyer sparseness of a nonnegative vector:
/// `(sqrt(n) - ||h||_1 / ||h||_2) / (sqrt(n) - 1)`, 1 for one-hot, 0 for
/// uniform, scale-invariant.
pub fn sparseness(h: &[f64]) -> Result<f64> {
    let n = h.len();
    if n < 2 {
        return Err(Error::Domain("sparseness needs at least 2 entries".into()));
    }
    let l1: f64 = h.iter().map(|v| v.abs()).sum();
    let l2: f64 = h.iter().map(|v| v * v).sum::<f64>().sqrt();
    if l2 == 0.0 {
        return Err(Error::Domain("sparseness of the zero vector is undefined".into()));
    }
    let root = (n as f64).sqrt();
    Ok((root - l1 / l2) / (root - 1.0))
}

/// Mean Hoyer sparseness over all columns of H; all-zero columns contribute
/// zero but still count in the denominator.
pub fn average_column_sparseness(h: &Array2<f64>) -> f64 {
    let n = h.ncols();
    if n == 0 || h.nrows() < 2 {
        return 0.0;
    }
    let total: f64 = h
        .axis_iter(Axis(1))
        .map(|col| {
            let v = col.to_vec();
            sparseness(&v).unwrap_or(0.0)
        })
        .sum();
    total / n as f64
}

/// Column-stochastic normalization of a membership matrix. All-zero columns
/// become uniform 1/k; the returned flag reports whether any were hit.
pub fn normalize_columns(h: &Array2<f64>) -> (Array2<f64>, bool) {
    let k = h.nrows();
    let mut out = h.clone();
    let mut degenerate = false;
    for mut col in out.axis_iter_mut(Axis(1)) {
        let sum: f64 = col.sum();
        if sum > 0.0 {
            col.mapv_inplace(|v| v / sum);
        } else {
            degenerate = true;
            col.fill(1.0 / k as f64);
        }
    }
    (out, degenerate)
}

/// One-dimensional column view helper for membership columns.
pub fn column(h: &Array2<f64>, j: usize) -> Array1<f64> {
    h.column(j).to_owned()
}
