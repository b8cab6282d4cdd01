//! Limited-memory BFGS with a strong Wolfe line search.
//!
//! The caller drives the optimization one step at a time: stochastic parts of
//! the objective (such as freshly drawn projection directions) can change
//! between steps, while every evaluation inside one step sees the same
//! coherent function, which is what the line search requires. A step never
//! accepts a point whose objective exceeds the step's starting value.

use std::collections::VecDeque;

use ndarray::Array1;

use crate::num::Real;

const C1: f64 = 1e-4;
const C2: f64 = 0.9;
const MAX_BRACKET: usize = 10;
const MAX_ZOOM: usize = 12;

#[derive(Debug, Clone)]
pub struct Lbfgs<T> {
    memory: usize,
    lr: T,
    /// (s, y, 1 / s.y) curvature pairs, oldest first.
    history: VecDeque<(Array1<T>, Array1<T>, T)>,
    steps: usize,
}

/// What happened during one optimizer step.
#[derive(Debug, Clone, Copy)]
pub struct StepReport<T> {
    /// Objective value at the start of the step.
    pub loss: T,
    /// Infinity norm of the gradient at the start of the step.
    pub grad_norm: T,
    /// Accepted step length along the search direction (0 when stuck).
    pub step_size: T,
    /// Number of objective evaluations spent.
    pub evals: usize,
    /// Whether the parameters changed.
    pub moved: bool,
}

struct Probe<T> {
    t: T,
    f: T,
    dg: T,
    g: Array1<T>,
}

impl<T: Real> Lbfgs<T> {
    pub fn new(memory: usize, lr: T) -> Self {
        Lbfgs {
            memory: memory.max(1),
            lr,
            history: VecDeque::new(),
            steps: 0,
        }
    }

    pub fn reset(&mut self) {
        self.history.clear();
        self.steps = 0;
    }

    /// Two-loop recursion: approximate inverse-Hessian times `g`, negated.
    fn direction(&self, g: &Array1<T>) -> Array1<T> {
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(self.history.len());
        for (s, y, rho) in self.history.iter().rev() {
            let alpha = *rho * s.dot(&q);
            q.scaled_add(-alpha, y);
            alphas.push(alpha);
        }
        if let Some((s, y, _)) = self.history.back() {
            let gamma = s.dot(y) / y.dot(y);
            q.mapv_inplace(|v| v * gamma);
        }
        for ((s, y, rho), alpha) in self.history.iter().zip(alphas.into_iter().rev()) {
            let beta = *rho * y.dot(&q);
            q.scaled_add(alpha - beta, s);
        }
        q.mapv_inplace(|v| -v);
        q
    }

    /// Runs one quasi-Newton step. `f` evaluates the objective and gradient;
    /// it is called at least once (at the current point) and at most ~25
    /// times during the line search.
    pub fn step<F>(&mut self, x: &mut Array1<T>, f: &mut F) -> StepReport<T>
    where
        F: FnMut(&Array1<T>) -> (T, Array1<T>),
    {
        let (f0, g0) = f(x);
        let grad_norm = g0.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        let mut report = StepReport {
            loss: f0,
            grad_norm,
            step_size: T::zero(),
            evals: 1,
            moved: false,
        };
        if !f0.is_finite() || grad_norm == T::zero() {
            return report;
        }

        let mut d = self.direction(&g0);
        let mut dg0 = d.dot(&g0);
        if !(dg0 < T::zero()) {
            // Stale curvature can yield a non-descent direction; restart from
            // steepest descent.
            self.history.clear();
            d = g0.mapv(|v| -v);
            dg0 = d.dot(&g0);
        }

        let t0 = if self.steps == 0 {
            let l1 = g0.iter().fold(T::zero(), |s, v| s + v.abs());
            self.lr * T::one().min(T::one() / l1)
        } else {
            self.lr
        };

        let accepted = strong_wolfe(f, x, &d, t0, f0, dg0, &mut report.evals);
        self.steps += 1;
        let Some(probe) = accepted else {
            return report;
        };

        let s = d.mapv(|v| v * probe.t);
        *x += &s;
        let y = &probe.g - &g0;
        let sy = s.dot(&y);
        if sy > T::of(1e-10) {
            if self.history.len() == self.memory {
                self.history.pop_front();
            }
            self.history.push_back((s, y, T::one() / sy));
        }
        report.step_size = probe.t;
        report.moved = true;
        report
    }
}

/// Strong Wolfe line search (bracket then zoom, cubic interpolation).
/// Returns a step satisfying both Wolfe conditions, or the best sufficient-
/// decrease point seen, or None when no progress was possible.
fn strong_wolfe<T: Real, F>(
    f: &mut F,
    x: &Array1<T>,
    d: &Array1<T>,
    t0: T,
    f0: T,
    dg0: T,
    evals: &mut usize,
) -> Option<Probe<T>>
where
    F: FnMut(&Array1<T>) -> (T, Array1<T>),
{
    let c1 = T::of(C1);
    let c2 = T::of(C2);
    let mut probe_at = |t: T, evals: &mut usize| -> Probe<T> {
        let xt = x + &d.mapv(|v| v * t);
        let (ft, gt) = f(&xt);
        *evals += 1;
        let dg = gt.dot(d);
        Probe { t, f: ft, dg, g: gt }
    };

    let armijo = |t: T, ft: T| ft.is_finite() && ft <= f0 + c1 * t * dg0;
    let curvature = |dg: T| dg.abs() <= -c2 * dg0;

    // Bracketing phase. `prev` is None until the first accepted trial; the
    // step-start point stands in as a bracket endpoint when needed (its
    // gradient is never returned, which the exhaustion path checks for).
    let start = || Probe {
        t: T::zero(),
        f: f0,
        dg: dg0,
        g: Array1::zeros(0),
    };
    let mut prev: Option<Probe<T>> = None;
    let mut t = t0;
    let mut bracket: Option<(Probe<T>, Probe<T>)> = None;
    for _ in 0..MAX_BRACKET {
        let cur = probe_at(t, evals);
        let rose = prev.as_ref().is_some_and(|p| cur.f >= p.f);
        if !cur.f.is_finite() || cur.f > f0 + c1 * cur.t * dg0 || rose {
            bracket = Some((prev.take().unwrap_or_else(start), cur));
            break;
        }
        if curvature(cur.dg) {
            return Some(cur);
        }
        if cur.dg >= T::zero() {
            bracket = Some((cur, prev.take().unwrap_or_else(start)));
            break;
        }
        t = cur.t * T::of(2.0);
        prev = Some(cur);
    }

    let (mut lo, mut hi) = match bracket {
        Some(b) => b,
        // Monotone decrease through the whole bracket phase: accept the last
        // point, which satisfies sufficient decrease.
        None => {
            return match prev {
                Some(p) if armijo(p.t, p.f) => Some(p),
                _ => None,
            };
        }
    };

    // Zoom phase: maintain lo as the best sufficient-decrease endpoint.
    for _ in 0..MAX_ZOOM {
        let gap = (hi.t - lo.t).abs();
        if gap < T::of(1e-12) * T::one().max(lo.t.abs().max(hi.t.abs())) {
            break;
        }
        let mut tj = cubic_min(lo.t, lo.f, lo.dg, hi.t, hi.f, hi.dg);
        let lo_t = lo.t.min(hi.t);
        let hi_t = lo.t.max(hi.t);
        let margin = gap * T::of(0.1);
        if !tj.is_finite() || tj <= lo_t + margin || tj >= hi_t - margin {
            tj = (lo.t + hi.t) * T::of(0.5);
        }
        let cur = probe_at(tj, evals);
        if !cur.f.is_finite() || cur.f > f0 + c1 * cur.t * dg0 || cur.f >= lo.f {
            hi = cur;
        } else {
            if curvature(cur.dg) {
                return Some(cur);
            }
            if cur.dg * (hi.t - lo.t) >= T::zero() {
                hi = replace_probe(&mut lo, cur);
                continue;
            }
            lo = cur;
        }
    }
    if lo.t > T::zero() && armijo(lo.t, lo.f) && lo.g.len() == x.len() {
        Some(lo)
    } else {
        None
    }
}

fn replace_probe<T>(slot: &mut Probe<T>, new: Probe<T>) -> Probe<T> {
    std::mem::replace(slot, new)
}

/// Minimizer of the cubic through (a, fa, da) and (b, fb, db); NaN when the
/// interpolant has no interior minimum.
fn cubic_min<T: Real>(a: T, fa: T, da: T, b: T, fb: T, db: T) -> T {
    let three = T::of(3.0);
    let two = T::of(2.0);
    let d1 = da + db - three * (fa - fb) / (a - b);
    let disc = d1 * d1 - da * db;
    if disc < T::zero() {
        return T::nan();
    }
    let d2 = disc.sqrt() * if b >= a { T::one() } else { -T::one() };
    b - (b - a) * ((db + d2 - d1) / (db - da + two * d2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn converges_on_a_convex_quadratic() {
        // f(x) = 1/2 x'Ax - b'x with A diag(1..=10).
        let mut f = |x: &Array1<f64>| {
            let mut g = Array1::zeros(10);
            let mut val = 0.0;
            for i in 0..10 {
                let a = (i + 1) as f64;
                val += 0.5 * a * x[i] * x[i] - x[i];
                g[i] = a * x[i] - 1.0;
            }
            (val, g)
        };
        let mut x = Array1::from_elem(10, 3.0);
        let mut opt = Lbfgs::new(10, 1.0);
        let mut last = f64::INFINITY;
        for _ in 0..40 {
            let r = opt.step(&mut x, &mut f);
            assert!(r.loss <= last + 1e-12, "loss increased across steps");
            last = r.loss;
        }
        for i in 0..10 {
            let opt_x = 1.0 / (i + 1) as f64;
            assert!((x[i] - opt_x).abs() < 1e-6, "x[{i}] = {}", x[i]);
        }
    }

    #[test]
    fn converges_on_rosenbrock() {
        let mut f = |x: &Array1<f64>| {
            let (a, b) = (x[0], x[1]);
            let val = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            let g = array![
                -2.0 * (1.0 - a) - 400.0 * a * (b - a * a),
                200.0 * (b - a * a)
            ];
            (val, g)
        };
        let mut x = array![-1.2, 1.0];
        let mut opt = Lbfgs::new(10, 1.0);
        let mut final_loss = f64::INFINITY;
        for _ in 0..200 {
            final_loss = opt.step(&mut x, &mut f).loss;
            if final_loss < 1e-10 {
                break;
            }
        }
        assert!(final_loss < 1e-8, "stalled at {final_loss}, x = {x}");
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let mut f = |x: &Array1<f64>| (0.0, Array1::zeros(x.len()));
        let mut x = array![1.0, 2.0];
        let before = x.clone();
        let mut opt = Lbfgs::new(5, 1.0);
        let r = opt.step(&mut x, &mut f);
        assert!(!r.moved);
        assert_eq!(x, before);
    }

    #[test]
    fn steps_are_deterministic() {
        let run = || {
            let mut f = |x: &Array1<f64>| {
                let val = x.dot(x) + (x[0] * 3.0).sin();
                let mut g = x.mapv(|v| 2.0 * v);
                g[0] += 3.0 * (x[0] * 3.0).cos();
                (val, g)
            };
            let mut x = array![0.7, -0.3, 2.0];
            let mut opt = Lbfgs::new(10, 1.0);
            for _ in 0..20 {
                opt.step(&mut x, &mut f);
            }
            x
        };
        let a = run();
        let b = run();
        assert_eq!(a, b);
    }
}
