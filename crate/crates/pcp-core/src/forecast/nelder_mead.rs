//! Deterministic box-constrained Nelder-Mead simplex search.
//!
//! Small and self-contained: the refit objective is a 4-dimensional,
//! derivative-free sum of squared one-step errors, and golden tests require
//! bit-stable results, so the search uses fixed coefficients, stable
//! tie-breaking, and no randomness.

#[derive(Debug, Clone, Copy)]
pub struct Bounds {
    pub lo: f64,
    pub hi: f64,
}

pub struct NelderMead<'a> {
    bounds: &'a [Bounds],
    max_evals: usize,
    tol: f64,
}

pub struct SearchResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub converged: bool,
}

impl<'a> NelderMead<'a> {
    pub fn new(bounds: &'a [Bounds], max_evals: usize, tol: f64) -> Self {
        Self {
            bounds,
            max_evals,
            tol,
        }
    }

    fn clamp(&self, x: &mut [f64]) {
        for (v, b) in x.iter_mut().zip(self.bounds) {
            *v = v.clamp(b.lo, b.hi);
        }
    }

    /// Minimize `f` starting from `x0`.
    pub fn minimize(&self, f: &mut impl FnMut(&[f64]) -> f64, x0: &[f64]) -> SearchResult {
        let dim = self.bounds.len();
        let mut evals = 0usize;
        let mut eval = |x: &[f64], evals: &mut usize| {
            *evals += 1;
            let v = f(x);
            if v.is_nan() {
                f64::INFINITY
            } else {
                v
            }
        };

        // Initial simplex: x0 plus a 10%-of-range step along each axis,
        // reflected inward when it would leave the box.
        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
        let mut start = x0.to_vec();
        self.clamp(&mut start);
        let v0 = eval(&start, &mut evals);
        simplex.push((start.clone(), v0));
        for d in 0..dim {
            let mut p = start.clone();
            let step = 0.1 * (self.bounds[d].hi - self.bounds[d].lo).max(1e-3);
            p[d] = if p[d] + step <= self.bounds[d].hi {
                p[d] + step
            } else {
                p[d] - step
            };
            self.clamp(&mut p);
            let v = eval(&p, &mut evals);
            simplex.push((p, v));
        }

        let order = |s: &mut Vec<(Vec<f64>, f64)>| {
            s.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
        };
        order(&mut simplex);

        while evals < self.max_evals {
            let best = simplex[0].1;
            let worst = simplex[dim].1;
            if (worst - best).abs() <= self.tol * (1.0 + best.abs()) {
                return SearchResult {
                    x: simplex[0].0.clone(),
                    value: simplex[0].1,
                    converged: true,
                };
            }

            // Centroid of all but the worst point.
            let mut centroid = vec![0.0; dim];
            for (p, _) in simplex.iter().take(dim) {
                for (c, v) in centroid.iter_mut().zip(p) {
                    *c += v / dim as f64;
                }
            }

            let point_at = |coef: f64| {
                let mut p: Vec<f64> = centroid
                    .iter()
                    .zip(&simplex[dim].0)
                    .map(|(c, w)| c + coef * (c - w))
                    .collect();
                self.clamp(&mut p);
                p
            };

            let refl = point_at(1.0);
            let v_refl = eval(&refl, &mut evals);

            if v_refl < simplex[0].1 {
                let exp = point_at(2.0);
                let v_exp = eval(&exp, &mut evals);
                simplex[dim] = if v_exp < v_refl { (exp, v_exp) } else { (refl, v_refl) };
            } else if v_refl < simplex[dim - 1].1 {
                simplex[dim] = (refl, v_refl);
            } else {
                let contr = if v_refl < simplex[dim].1 {
                    point_at(0.5)
                } else {
                    point_at(-0.5)
                };
                let v_contr = eval(&contr, &mut evals);
                if v_contr < simplex[dim].1.min(v_refl) {
                    simplex[dim] = (contr, v_contr);
                } else {
                    // Shrink toward the best vertex.
                    let best_p = simplex[0].0.clone();
                    for entry in simplex.iter_mut().skip(1) {
                        for (v, b) in entry.0.iter_mut().zip(&best_p) {
                            *v = b + 0.5 * (*v - b);
                        }
                        entry.1 = eval(&entry.0, &mut evals);
                        if evals >= self.max_evals {
                            break;
                        }
                    }
                }
            }
            order(&mut simplex);
        }

        SearchResult {
            x: simplex[0].0.clone(),
            value: simplex[0].1,
            converged: false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_quadratic_minimum_inside_box() {
        let bounds = [Bounds { lo: 0.0, hi: 1.0 }, Bounds { lo: 0.0, hi: 1.0 }];
        let nm = NelderMead::new(&bounds, 500, 1e-12);
        let mut f = |x: &[f64]| (x[0] - 0.3).powi(2) + (x[1] - 0.7).powi(2);
        let r = nm.minimize(&mut f, &[0.9, 0.1]);
        assert!(r.converged);
        assert!((r.x[0] - 0.3).abs() < 1e-4 && (r.x[1] - 0.7).abs() < 1e-4);
    }

    #[test]
    fn respects_bounds_when_minimum_outside() {
        let bounds = [Bounds { lo: 0.0, hi: 1.0 }];
        let nm = NelderMead::new(&bounds, 300, 1e-12);
        let mut f = |x: &[f64]| (x[0] - 2.0).powi(2);
        let r = nm.minimize(&mut f, &[0.5]);
        assert!(r.x[0] <= 1.0 && (r.x[0] - 1.0).abs() < 1e-3);
    }

    #[test]
    fn deterministic() {
        let bounds = [Bounds { lo: -5.0, hi: 5.0 }, Bounds { lo: -5.0, hi: 5.0 }];
        let nm = NelderMead::new(&bounds, 400, 1e-10);
        let rosen = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let a = nm.minimize(&mut { rosen }, &[-1.0, 1.0]);
        let b = nm.minimize(&mut { rosen }, &[-1.0, 1.0]);
        assert_eq!(a.x, b.x);
        assert_eq!(a.value, b.value);
    }
}
