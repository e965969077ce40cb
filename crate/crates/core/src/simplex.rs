//! Bounded Nelder-Mead simplex minimizer.
//!
//! Bounds are enforced by projecting every trial point onto the box, so the
//! objective is never evaluated outside it. A collapsed dimension (lower ==
//! upper) stays pinned at its bound.

use std::cell::Cell;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMead {
    pub max_evals: usize,
    /// Stop when the spread of simplex values falls below this.
    pub f_tol: f64,
    /// Stop when every vertex lies within this distance of the best one.
    pub x_tol: f64,
    /// Initial simplex edge per coordinate, relative to the box width when
    /// bounded, absolute otherwise.
    pub initial_step: f64,
    /// Rebuild the simplex around the best vertex this many times after
    /// convergence to escape premature collapse.
    pub restarts: usize,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self { max_evals: 5000, f_tol: 1e-12, x_tol: 1e-10, initial_step: 0.1, restarts: 2 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        assert_eq!(lower.len(), upper.len(), "bound vectors differ in length");
        assert!(lower.iter().zip(&upper).all(|(l, u)| l <= u), "lower bound above upper bound");
        Self { lower, upper }
    }

    pub fn project(&self, x: &mut [f64]) {
        for ((v, &l), &u) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *v = v.clamp(l, u);
        }
    }

    pub fn is_collapsed(&self) -> bool {
        self.lower.iter().zip(&self.upper).all(|(l, u)| l == u)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
    pub iterations: usize,
    pub converged: bool,
    /// Best value seen after each iteration; never increases.
    pub trace: Vec<f64>,
}

impl NelderMead {
    pub fn minimize<F>(&self, mut objective: F, x0: &[f64], bounds: Option<&Bounds>) -> SimplexResult
    where
        F: FnMut(&[f64]) -> f64,
    {
        let n = x0.len();
        let evals = Cell::new(0usize);
        let mut eval = |x: &[f64]| {
            evals.set(evals.get() + 1);
            let v = objective(x);
            if v.is_nan() {
                f64::INFINITY
            } else {
                v
            }
        };
        let project = |x: &mut Vec<f64>| {
            if let Some(b) = bounds {
                b.project(x);
            }
        };

        let mut start = x0.to_vec();
        project(&mut start);
        let start_value = eval(&start);
        let mut best = (start.clone(), start_value);
        let mut trace = vec![start_value];
        let mut iterations = 0;
        let mut converged = false;

        if n == 0 || bounds.is_some_and(Bounds::is_collapsed) {
            return SimplexResult { x: start, value: start_value, evals: evals.get(), iterations, converged: true, trace };
        }

        for round in 0..=self.restarts {
            let mut simplex = vec![best.clone()];
            for i in 0..n {
                let mut v = best.0.clone();
                let step = match bounds {
                    Some(b) if b.upper[i] > b.lower[i] => {
                        let width = b.upper[i] - b.lower[i];
                        let s = self.initial_step * width;
                        if v[i] + s <= b.upper[i] {
                            s
                        } else {
                            -s
                        }
                    }
                    Some(_) => 0.0,
                    None => {
                        if v[i] != 0.0 {
                            self.initial_step * v[i].abs().max(1e-3)
                        } else {
                            self.initial_step
                        }
                    }
                };
                if step == 0.0 {
                    continue;
                }
                v[i] += step;
                project(&mut v);
                let value = eval(&v);
                simplex.push((v, value));
            }
            if simplex.len() == 1 {
                break;
            }
            let dims = simplex.len() - 1;
            converged = false;

            loop {
                simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
                if simplex[0].1 < best.1 {
                    best = simplex[0].clone();
                }
                trace.push(best.1);
                iterations += 1;

                let spread = simplex[dims].1 - simplex[0].1;
                let size = simplex[1..]
                    .iter()
                    .map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
                    .fold(0.0, f64::max);
                if spread.abs() <= self.f_tol || size <= self.x_tol {
                    converged = true;
                    break;
                }
                if evals.get() >= self.max_evals {
                    break;
                }

                let centroid: Vec<f64> = (0..n)
                    .map(|j| simplex[..dims].iter().map(|(x, _)| x[j]).sum::<f64>() / dims as f64)
                    .collect();
                let along = |t: f64, worst: &[f64]| -> Vec<f64> {
                    let mut p: Vec<f64> = centroid.iter().zip(worst).map(|(c, w)| c + t * (c - w)).collect();
                    project(&mut p);
                    p
                };
                let worst = simplex[dims].0.clone();
                let reflected = along(1.0, &worst);
                let fr = eval(&reflected);
                if fr < simplex[0].1 {
                    let expanded = along(2.0, &worst);
                    let fe = eval(&expanded);
                    simplex[dims] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
                } else if fr < simplex[dims - 1].1 {
                    simplex[dims] = (reflected, fr);
                } else {
                    let (contracted, fc) = if fr < simplex[dims].1 {
                        let p = along(0.5, &worst);
                        let v = eval(&p);
                        (p, v)
                    } else {
                        let p = along(-0.5, &worst);
                        let v = eval(&p);
                        (p, v)
                    };
                    if fc < simplex[dims].1.min(fr) {
                        simplex[dims] = (contracted, fc);
                    } else {
                        let anchor = simplex[0].0.clone();
                        for vertex in simplex.iter_mut().skip(1) {
                            let mut p: Vec<f64> = anchor.iter().zip(&vertex.0).map(|(a, x)| a + 0.5 * (x - a)).collect();
                            project(&mut p);
                            let v = eval(&p);
                            *vertex = (p, v);
                        }
                    }
                }
            }
            if evals.get() >= self.max_evals || round == self.restarts {
                break;
            }
        }

        SimplexResult { x: best.0, value: best.1, evals: evals.get(), iterations, converged, trace }
    }
}
