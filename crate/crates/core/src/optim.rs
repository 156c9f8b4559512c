//! Unconstrained minimizers over `R^n`: L-BFGS with a strong-Wolfe line
//! search, and conjugate gradients for quadratic objectives.

use std::collections::VecDeque;

use crate::error::{Error, Result};

const C1: f64 = 1e-4;
const C2: f64 = 0.9;
const MAX_LINE_SEARCH: usize = 40;

/// Outcome of a minimization run.
#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    /// Whether the gradient tolerance was met.
    pub converged: bool,
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Objective evaluator: writes the gradient into the second argument and
/// returns the value.
pub trait Objective {
    fn eval(&mut self, x: &[f64], grad: &mut [f64]) -> f64;
}

impl<F: FnMut(&[f64], &mut [f64]) -> f64> Objective for F {
    fn eval(&mut self, x: &[f64], grad: &mut [f64]) -> f64 {
        self(x, grad)
    }
}

struct Probe {
    alpha: f64,
    value: f64,
    slope: f64,
    x: Vec<f64>,
    grad: Vec<f64>,
}

struct LineSearch<'a, F: Objective> {
    f: &'a mut F,
    x0: &'a [f64],
    dir: &'a [f64],
    value0: f64,
    slope0: f64,
    iteration: usize,
    evaluations: usize,
}

impl<F: Objective> LineSearch<'_, F> {
    fn probe(&mut self, alpha: f64) -> Result<Probe> {
        let x: Vec<f64> = self.x0.iter().zip(self.dir).map(|(a, d)| a + alpha * d).collect();
        let mut grad = vec![0.0; x.len()];
        let value = self.f.eval(&x, &mut grad);
        self.evaluations += 1;
        if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteEnergy {
                iteration: self.iteration,
            });
        }
        let slope = dot(&grad, self.dir);
        Ok(Probe {
            alpha,
            value,
            slope,
            x,
            grad,
        })
    }

    fn armijo(&self, p: &Probe) -> bool {
        p.value <= self.value0 + C1 * p.alpha * self.slope0
    }

    fn curvature(&self, p: &Probe) -> bool {
        p.slope.abs() <= -C2 * self.slope0
    }

    /// Strong-Wolfe step; falls back to the best sufficient-decrease point.
    fn search(&mut self, mut alpha: f64) -> Result<Option<Probe>> {
        let mut prev = Probe {
            alpha: 0.0,
            value: self.value0,
            slope: self.slope0,
            x: Vec::new(),
            grad: Vec::new(),
        };
        for i in 0..MAX_LINE_SEARCH {
            let p = self.probe(alpha)?;
            if !self.armijo(&p) || (i > 0 && p.value >= prev.value) {
                return self.zoom(prev, p);
            }
            if self.curvature(&p) {
                return Ok(Some(p));
            }
            if p.slope >= 0.0 {
                return self.zoom(p, prev);
            }
            let next = cubic_min(&prev, &p)
                .filter(|a| *a > p.alpha * 1.1 && a.is_finite())
                .unwrap_or(p.alpha * 4.0)
                .min(p.alpha * 10.0);
            prev = p;
            alpha = next;
        }
        Ok((prev.alpha > 0.0).then_some(prev))
    }

    fn zoom(&mut self, mut lo: Probe, mut hi: Probe) -> Result<Option<Probe>> {
        for _ in 0..MAX_LINE_SEARCH {
            let (a, b) = if lo.alpha < hi.alpha {
                (lo.alpha, hi.alpha)
            } else {
                (hi.alpha, lo.alpha)
            };
            let width = b - a;
            if width <= f64::EPSILON * b.abs().max(1e-300) {
                break;
            }
            let guard = 0.1 * width;
            let alpha = cubic_min(&lo, &hi)
                .filter(|t| t.is_finite() && *t >= a + guard && *t <= b - guard)
                .unwrap_or(0.5 * (a + b));
            let p = self.probe(alpha)?;
            if !self.armijo(&p) || p.value >= lo.value {
                hi = p;
            } else {
                if self.curvature(&p) {
                    return Ok(Some(p));
                }
                if p.slope * (hi.alpha - lo.alpha) >= 0.0 {
                    hi = lo;
                }
                lo = p;
            }
        }
        Ok((lo.alpha > 0.0 && lo.value < self.value0).then_some(lo))
    }
}

/// Minimizer of the cubic interpolating value and slope at two probes.
fn cubic_min(a: &Probe, b: &Probe) -> Option<f64> {
    let (x0, x1) = (a.alpha, b.alpha);
    let h = x1 - x0;
    if h == 0.0 {
        return None;
    }
    let d1 = a.slope + b.slope - 3.0 * (a.value - b.value) / (x0 - x1);
    let disc = d1 * d1 - a.slope * b.slope;
    if disc < 0.0 {
        return None;
    }
    let d2 = h.signum() * disc.sqrt();
    let denom = b.slope - a.slope + 2.0 * d2;
    if denom == 0.0 {
        return None;
    }
    Some(x1 - h * (b.slope + d2 - d1) / denom)
}

/// Limited-memory BFGS.
///
/// Stops when the gradient norm drops to `grad_tol`, after `max_iters`
/// iterations, or when no step along the search direction decreases the
/// objective. The returned value never exceeds the starting value.
pub fn lbfgs<F: Objective>(
    x0: Vec<f64>,
    f: &mut F,
    history: usize,
    grad_tol: f64,
    max_iters: usize,
) -> Result<Minimum> {
    let history = history.max(1);
    let n = x0.len();
    let mut x = x0;
    let mut grad = vec![0.0; n];
    let mut value = f.eval(&x, &mut grad);
    if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFiniteEnergy { iteration: 0 });
    }
    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(history);
    let mut iterations = 0;
    let mut gnorm = norm(&grad);

    while gnorm > grad_tol && iterations < max_iters {
        // Two-loop recursion.
        let mut q: Vec<f64> = grad.clone();
        let mut alphas = Vec::with_capacity(pairs.len());
        for (s, y, rho) in pairs.iter().rev() {
            let a = rho * dot(s, &q);
            for (qi, yi) in q.iter_mut().zip(y) {
                *qi -= a * yi;
            }
            alphas.push(a);
        }
        if let Some((s, y, _)) = pairs.back() {
            let gamma = dot(s, y) / dot(y, y);
            for qi in &mut q {
                *qi *= gamma;
            }
        }
        for ((s, y, rho), a) in pairs.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            for (qi, si) in q.iter_mut().zip(s) {
                *qi += (a - b) * si;
            }
        }
        let mut dir: Vec<f64> = q.into_iter().map(|v| -v).collect();
        let mut slope = dot(&grad, &dir);
        if !(slope < 0.0) {
            pairs.clear();
            dir = grad.iter().map(|g| -g).collect();
            slope = -gnorm * gnorm;
        }
        let initial = if pairs.is_empty() { 1.0 / gnorm } else { 1.0 };

        let mut ls = LineSearch {
            f: &mut *f,
            x0: &x,
            dir: &dir,
            value0: value,
            slope0: slope,
            iteration: iterations,
            evaluations: 0,
        };
        let step = ls.search(initial)?;
        iterations += 1;
        let Some(p) = step else {
            if pairs.is_empty() {
                break;
            }
            // Retry from steepest descent before giving up.
            pairs.clear();
            continue;
        };
        if p.value > value {
            break;
        }

        let s: Vec<f64> = p.x.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = p.grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        let improved = p.value < value;
        x = p.x;
        grad = p.grad;
        value = p.value;
        gnorm = norm(&grad);
        if sy > 1e-300 {
            if pairs.len() == history {
                pairs.pop_front();
            }
            pairs.push_back((s, y, 1.0 / sy));
        }
        if !improved {
            break;
        }
    }
    Ok(Minimum {
        converged: gnorm <= grad_tol,
        x,
        value,
        grad_norm: gnorm,
        iterations,
    })
}

/// Conjugate gradients for a convex quadratic objective, using gradient
/// differences as Hessian-vector products.
pub fn conjugate_gradient<F: Objective>(
    x0: Vec<f64>,
    f: &mut F,
    grad_tol: f64,
    max_iters: usize,
) -> Result<Minimum> {
    let n = x0.len();
    let zero = vec![0.0; n];
    let mut g_origin = vec![0.0; n];
    let v0 = f.eval(&zero, &mut g_origin);
    if !v0.is_finite() {
        return Err(Error::NonFiniteEnergy { iteration: 0 });
    }
    let mut hv = vec![0.0; n];
    let hess = |v: &[f64], out: &mut [f64], f: &mut F| {
        f.eval(v, out);
        for (o, g) in out.iter_mut().zip(&g_origin) {
            *o -= g;
        }
    };

    let mut x = x0;
    let mut grad = vec![0.0; n];
    f.eval(&x, &mut grad);
    let mut r: Vec<f64> = grad.iter().map(|g| -g).collect();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let mut iterations = 0;
    while rr.sqrt() > grad_tol && iterations < max_iters {
        hess(&p, &mut hv, f);
        let curv = dot(&p, &hv);
        if !(curv > 0.0) {
            break;
        }
        let alpha = rr / curv;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * hv[i];
        }
        iterations += 1;
        // Refresh the residual now and then to limit drift.
        if iterations % 50 == 0 {
            f.eval(&x, &mut grad);
            for (ri, gi) in r.iter_mut().zip(&grad) {
                *ri = -gi;
            }
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    let value = f.eval(&x, &mut grad);
    if !value.is_finite() {
        return Err(Error::NonFiniteEnergy { iteration: iterations });
    }
    let grad_norm = norm(&grad);
    Ok(Minimum {
        converged: grad_norm <= grad_tol,
        x,
        value,
        grad_norm,
        iterations,
    })
}
