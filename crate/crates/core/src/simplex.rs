//! Nelder-Mead downhill simplex minimization with restarts.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimplexSettings {
    pub max_iterations: usize,
    /// Converged once `f_worst - f_best <= tol * (|f_best| + tol)`.
    pub relative_tolerance: f64,
    /// Additional runs restarted from the incumbent with a fresh simplex.
    pub restarts: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    /// Iterations summed over all runs.
    pub iterations: usize,
    pub evaluations: usize,
    /// Whether the final run met the tolerance within `max_iterations`.
    pub converged: bool,
    /// Best simplex value at the start of every iteration, across runs.
    pub best_trace: Vec<f64>,
}

struct Vertex {
    x: Vec<f64>,
    f: f64,
}

/// Minimize `f` starting from `x0`. The initial simplex steps `steps[j]`
/// along coordinate `j`. NaN objective values are treated as `+inf`.
pub fn minimize<F>(mut f: F, x0: &[f64], steps: &[f64], settings: &SimplexSettings) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(x0.len(), steps.len(), "one initial step per coordinate");
    assert!(!x0.is_empty(), "nothing to minimize");
    let mut evaluations = 0usize;
    let mut eval = |x: &[f64]| {
        evaluations += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut start = x0.to_vec();
    let mut iterations = 0;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut best_value = f64::INFINITY;
    for _run in 0..=settings.restarts {
        let (x, v, iters, ok) = run(&mut eval, &start, steps, settings, &mut trace);
        iterations += iters;
        converged = ok;
        if v <= best_value {
            best_value = v;
            start = x;
        }
    }
    Minimum {
        x: start,
        value: best_value,
        iterations,
        evaluations,
        converged,
        best_trace: trace,
    }
}

fn run<F>(
    eval: &mut F,
    start: &[f64],
    steps: &[f64],
    settings: &SimplexSettings,
    trace: &mut Vec<f64>,
) -> (Vec<f64>, f64, usize, bool)
where
    F: FnMut(&[f64]) -> f64,
{
    let d = start.len();
    let mut simplex: Vec<Vertex> = Vec::with_capacity(d + 1);
    simplex.push(Vertex {
        x: start.to_vec(),
        f: eval(start),
    });
    for j in 0..d {
        let mut x = start.to_vec();
        x[j] += steps[j];
        let fx = eval(&x);
        simplex.push(Vertex { x, f: fx });
    }

    let mut centroid = vec![0.0; d];
    let mut iter = 0;
    loop {
        // Stable sort: ties keep the lower index first.
        simplex.sort_by(|a, b| a.f.total_cmp(&b.f));
        let best = simplex[0].f;
        let worst = simplex[d].f;
        trace.push(best);
        let tol = settings.relative_tolerance;
        if worst - best <= tol * (best.abs() + tol) {
            return (simplex.swap_remove(0).x, best, iter, true);
        }
        if iter >= settings.max_iterations {
            return (simplex.swap_remove(0).x, best, iter, false);
        }
        iter += 1;

        centroid.iter_mut().for_each(|c| *c = 0.0);
        for v in &simplex[..d] {
            for (c, x) in centroid.iter_mut().zip(&v.x) {
                *c += x / d as f64;
            }
        }
        let toward = |from: &[f64], coef: f64| -> Vec<f64> {
            centroid.iter().zip(from).map(|(c, x)| c + coef * (x - c)).collect()
        };

        let reflected = toward(&simplex[d].x, -REFLECT);
        let fr = eval(&reflected);
        if fr < best {
            let expanded = toward(&reflected, EXPAND);
            let fe = eval(&expanded);
            simplex[d] = if fe < fr {
                Vertex { x: expanded, f: fe }
            } else {
                Vertex { x: reflected, f: fr }
            };
            continue;
        }
        if fr < simplex[d - 1].f {
            simplex[d] = Vertex { x: reflected, f: fr };
            continue;
        }
        let outside = fr < worst;
        let contracted = if outside {
            toward(&reflected, CONTRACT)
        } else {
            toward(&simplex[d].x, CONTRACT)
        };
        let fc = eval(&contracted);
        if (outside && fc <= fr) || (!outside && fc < worst) {
            simplex[d] = Vertex { x: contracted, f: fc };
            continue;
        }
        let anchor = simplex[0].x.clone();
        for v in simplex.iter_mut().skip(1) {
            for (x, a) in v.x.iter_mut().zip(&anchor) {
                *x = a + SHRINK * (*x - a);
            }
            v.f = eval(&v.x);
        }
    }
}
