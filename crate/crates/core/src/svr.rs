//! Linear epsilon-insensitive support vector regression.
//!
//! Both paths minimize
//!
//! ```text
//! F(w, b) = 1/2 (|w|^2 + b^2) + C * sum_i max(0, |y_i - w.x_i - b| - eps)
//! ```
//!
//! with the intercept handled as an extra, regularized coordinate fed by a
//! constant 1.0 feature.
//!
//! * Dual path: exact coordinate descent on the box-constrained dual
//!   `max_beta -1/2 |sum_i beta_i x_i|^2 + sum_i y_i beta_i - eps sum_i |beta_i|`,
//!   `-C <= beta_i <= C`, visiting coordinates in a seeded shuffled order
//!   each epoch. Every coordinate step is an exact 1-D maximization, so the
//!   dual objective never decreases.
//! * Primal path: full-batch subgradient descent with step `1/(lambda t)`,
//!   `lambda = 1/(C n)`. Subgradient steps are not descent steps, so the path
//!   keeps the best of the raw iterate and its `t`-weighted running average;
//!   the reported objective is that best value and never increases.
//!   After `t` epochs the raw iterate equals `sum_i beta_i x_i` with
//!   `beta_i = C * mean_k sign(r_i^k)`, which lies in the dual box, so every
//!   epoch also yields a dual lower bound.
//!
//! The dual path stops once an epoch raises the dual objective by at most
//! `tol * |D|`. The primal path stops once the duality gap `best F - best D`
//! is at most `tol * |best F|`. Either stops after `max_iter` epochs.

use ndarray::{ArrayView1, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_SEED: u64 = 20230815;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvrHyperparams {
    #[serde(rename = "C")]
    pub c: f64,
    pub dual: bool,
    pub epsilon: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for SvrHyperparams {
    fn default() -> Self {
        SvrHyperparams {
            c: 1.0,
            dual: true,
            epsilon: 0.0,
            max_iter: 50_000,
            tol: 1e-4,
            seed: DEFAULT_SEED,
        }
    }
}

impl SvrHyperparams {
    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Err(Error::invalid("svr hyperparameters", reason));
        if !(self.c > 0.0 && self.c.is_finite()) {
            return bad(format!("C must be positive and finite, got {}", self.c));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return bad(format!("epsilon must be >= 0, got {}", self.epsilon));
        }
        if self.max_iter == 0 {
            return bad("max_iter must be at least 1".into());
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        Ok(())
    }
}

/// Result of one solver run.
#[derive(Debug, Clone, PartialEq)]
pub struct SvrFit {
    pub weights: Vec<f64>,
    pub intercept: f64,
    /// Primal objective `F` at the returned weights.
    pub objective: f64,
    /// Best dual lower bound reached.
    pub dual_objective: Option<f64>,
    pub epochs: usize,
    pub converged: bool,
}

impl SvrFit {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x) + self.intercept
    }
}

/// Rows with the constant bias feature appended, stored contiguously.
struct Augmented {
    data: Vec<f64>,
    width: usize,
}

impl Augmented {
    fn new(x: ArrayView2<'_, f64>) -> Self {
        let width = x.ncols() + 1;
        let mut data = Vec::with_capacity(x.nrows() * width);
        for row in x.rows() {
            data.extend(row.iter());
            data.push(1.0);
        }
        Augmented { data, width }
    }

    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.width..(i + 1) * self.width]
    }

    fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.width)
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_inputs(x: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>, hp: &SvrHyperparams) -> Result<()> {
    hp.validate()?;
    if x.nrows() != y.len() {
        return Err(Error::Shape(format!(
            "{} feature rows but {} targets",
            x.nrows(),
            y.len()
        )));
    }
    if x.nrows() == 0 {
        return Err(Error::Shape("training matrix has no rows".into()));
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::invalid("training data", "non-finite feature or target value"));
    }
    Ok(())
}

/// `F` for augmented weights (last coordinate is the intercept).
fn objective_augmented(a: &Augmented, y: &[f64], w: &[f64], c: f64, eps: f64) -> f64 {
    let loss: f64 = a
        .rows()
        .zip(y)
        .map(|(x, &t)| ((t - dot(w, x)).abs() - eps).max(0.0))
        .sum();
    0.5 * dot(w, w) + c * loss
}

/// Primal objective `F(w, b)` on unaugmented rows.
pub fn primal_objective(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    weights: &[f64],
    intercept: f64,
    c: f64,
    epsilon: f64,
) -> f64 {
    let loss: f64 = x
        .rows()
        .into_iter()
        .zip(y)
        .map(|(row, &t)| {
            let pred = row.iter().zip(weights).map(|(a, b)| a * b).sum::<f64>() + intercept;
            ((t - pred).abs() - epsilon).max(0.0)
        })
        .sum();
    0.5 * (dot(weights, weights) + intercept * intercept) + c * loss
}

/// Trains one regressor on scaled features `x` and targets `y`.
pub fn train_svr(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    hp: &SvrHyperparams,
) -> Result<SvrFit> {
    train_svr_traced(x, y, hp).map(|(fit, _)| fit)
}

/// Like [`train_svr`], also returning the per-epoch objective trace: the dual
/// objective on the dual path (non-decreasing), the best primal objective so
/// far on the primal path (non-increasing). Entry 0 is the value at `w = 0`.
pub fn train_svr_traced(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    hp: &SvrHyperparams,
) -> Result<(SvrFit, Vec<f64>)> {
    check_inputs(x, y, hp)?;
    let a = Augmented::new(x);
    let y: Vec<f64> = y.to_vec();
    if hp.dual {
        solve_dual(&a, &y, hp)
    } else {
        solve_primal(&a, &y, hp)
    }
}

fn finish(a: &Augmented, y: &[f64], mut w: Vec<f64>, hp: &SvrHyperparams) -> (Vec<f64>, f64, f64) {
    let objective = objective_augmented(a, y, &w, hp.c, hp.epsilon);
    let intercept = w.pop().expect("augmented weights include the bias");
    (w, intercept, objective)
}

fn diverged(path: &str, epoch: usize) -> Error {
    Error::Divergence(format!("{path} path produced a non-finite value at epoch {epoch}"))
}

fn solve_dual(a: &Augmented, y: &[f64], hp: &SvrHyperparams) -> Result<(SvrFit, Vec<f64>)> {
    let n = y.len();
    let (c, eps) = (hp.c, hp.epsilon);
    let diag: Vec<f64> = a.rows().map(|r| dot(r, r)).collect();
    if diag.iter().any(|q| !q.is_finite()) {
        return Err(diverged("dual", 0));
    }
    let mut beta = vec![0.0; n];
    let mut w = vec![0.0; a.width];
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);

    let mut trace = vec![0.0];
    let mut prev = 0.0;
    let mut epochs = 0;
    let mut converged = false;
    while epochs < hp.max_iter {
        epochs += 1;
        order.shuffle(&mut rng);
        for &i in &order {
            let xi = a.row(i);
            let grad = dot(&w, xi) - y[i];
            // Exact minimizer of 1/2 q (z - beta)^2 + grad (z - beta) + eps |z|
            // over the box: soft-threshold the Newton point, then clip.
            let q = diag[i];
            let newton = beta[i] - grad / q;
            let shrink = eps / q;
            let z = (newton.signum() * (newton.abs() - shrink).max(0.0)).clamp(-c, c);
            let step = z - beta[i];
            if step != 0.0 {
                for (wj, xj) in w.iter_mut().zip(xi) {
                    *wj += step * xj;
                }
                beta[i] = z;
            }
        }
        let obj = -0.5 * dot(&w, &w) + dot(y, &beta) - eps * beta.iter().map(|b| b.abs()).sum::<f64>();
        if !obj.is_finite() {
            return Err(diverged("dual", epochs));
        }
        trace.push(obj);
        if obj - prev <= hp.tol * obj.abs() {
            converged = true;
            break;
        }
        prev = obj;
    }
    let (weights, intercept, objective) = finish(a, y, w, hp);
    if !objective.is_finite() || weights.iter().any(|v| !v.is_finite()) {
        return Err(diverged("dual", epochs));
    }
    Ok((
        SvrFit {
            weights,
            intercept,
            objective,
            dual_objective: trace.last().copied(),
            epochs,
            converged,
        },
        trace,
    ))
}

fn solve_primal(a: &Augmented, y: &[f64], hp: &SvrHyperparams) -> Result<(SvrFit, Vec<f64>)> {
    let n = y.len();
    let (c, eps) = (hp.c, hp.epsilon);
    let width = a.width;

    let mut w = vec![0.0; width];
    let mut avg = vec![0.0; width];
    let mut grad = vec![0.0; width];
    let mut best_w = vec![0.0; width];
    // Running sum over epochs of sign(r_i) for residuals outside the tube.
    let mut sign_sum = vec![0.0; n];
    let mut best = objective_augmented(a, y, &w, c, eps);
    let mut best_dual = 0.0f64;
    let mut trace = vec![best];
    let mut epochs = 0;
    let mut converged = false;

    while epochs < hp.max_iter {
        epochs += 1;
        let t = epochs as f64;

        // One pass: objective at the current iterate and the loss subgradient.
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut loss = 0.0;
        for ((xi, &target), ss) in a.rows().zip(y).zip(sign_sum.iter_mut()) {
            let r = target - dot(&w, xi);
            let excess = r.abs() - eps;
            if excess > 0.0 {
                loss += excess;
                let s = r.signum();
                *ss += s;
                for (g, xj) in grad.iter_mut().zip(xi) {
                    *g += s * xj;
                }
            }
        }
        let f_w = 0.5 * dot(&w, &w) + c * loss;
        if !f_w.is_finite() {
            return Err(diverged("primal", epochs));
        }
        if f_w < best {
            best = f_w;
            best_w.copy_from_slice(&w);
        }

        // w <- w - (1/(lambda t)) (lambda w + subgradient/n); 1/(lambda t n) = C/t.
        let shrink = 1.0 - 1.0 / t;
        let step = c / t;
        for (wj, gj) in w.iter_mut().zip(&grad) {
            *wj = shrink * *wj + step * gj;
        }
        // Running average weighted by t: avg_t = sum k w_k / sum k.
        let mix = 2.0 / (t + 1.0);
        for (aj, wj) in avg.iter_mut().zip(&w) {
            *aj += mix * (wj - *aj);
        }
        let f_avg = objective_augmented(a, y, &avg, c, eps);
        if !f_avg.is_finite() {
            return Err(diverged("primal", epochs));
        }
        if f_avg < best {
            best = f_avg;
            best_w.copy_from_slice(&avg);
        }

        // The updated w is sum_i beta_i x_i with beta_i = C sign_sum_i / t.
        let (mut lin, mut l1) = (0.0, 0.0);
        for (&ss, &target) in sign_sum.iter().zip(y) {
            let beta = c * ss / t;
            lin += target * beta;
            l1 += beta.abs();
        }
        let dual = -0.5 * dot(&w, &w) + lin - eps * l1;
        if dual.is_finite() {
            best_dual = best_dual.max(dual);
        }
        trace.push(best);

        if best - best_dual <= hp.tol * best.abs() {
            converged = true;
            break;
        }
    }

    let f_last = objective_augmented(a, y, &w, c, eps);
    if f_last.is_finite() && f_last < best {
        best_w.copy_from_slice(&w);
        *trace.last_mut().unwrap() = f_last;
    }
    let (weights, intercept, objective) = finish(a, y, best_w, hp);
    Ok((
        SvrFit {
            weights,
            intercept,
            objective,
            dual_objective: Some(best_dual),
            epochs,
            converged,
        },
        trace,
    ))
}
