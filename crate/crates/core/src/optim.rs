//! Nelder-Mead simplex minimiser.

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct NelderMead {
    /// Stop when the spread of simplex values drops below this.
    pub f_tol: f64,
    /// Stop when the simplex diameter drops below this.
    pub x_tol: f64,
    pub max_iter: usize,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self {
            f_tol: 1e-12,
            x_tol: 1e-9,
            max_iter: 4000,
        }
    }
}

impl NelderMead {
    /// Minimises `f` from `x0` with an initial simplex of per-axis `step`s.
    pub fn minimize(&self, f: impl Fn(&[f64]) -> f64, x0: &[f64], step: &[f64]) -> Minimum {
        let n = x0.len();
        assert_eq!(n, step.len());
        let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);

        let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
        for i in 0..n {
            let mut p = x0.to_vec();
            p[i] += step[i];
            simplex.push(p);
        }
        let mut values: Vec<f64> = simplex.iter().map(|p| f(p)).collect();

        let mut iterations = 0;
        let mut converged = false;
        while iterations < self.max_iter {
            iterations += 1;
            let mut order: Vec<usize> = (0..=n).collect();
            order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
            simplex = order.iter().map(|&i| simplex[i].clone()).collect();
            values = order.iter().map(|&i| values[i]).collect();

            let spread = values[n] - values[0];
            let diameter = simplex[1..]
                .iter()
                .map(|p| {
                    p.iter()
                        .zip(&simplex[0])
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0, f64::max)
                })
                .fold(0.0, f64::max);
            if spread.abs() <= self.f_tol || diameter <= self.x_tol {
                converged = true;
                break;
            }

            let centroid: Vec<f64> = (0..n)
                .map(|j| simplex[..n].iter().map(|p| p[j]).sum::<f64>() / n as f64)
                .collect();
            let towards = |coef: f64| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(&simplex[n])
                    .map(|(c, w)| c + coef * (w - c))
                    .collect()
            };

            let reflected = towards(-alpha);
            let f_r = f(&reflected);
            if f_r < values[0] {
                let expanded = towards(-alpha * gamma);
                let f_e = f(&expanded);
                if f_e < f_r {
                    simplex[n] = expanded;
                    values[n] = f_e;
                } else {
                    simplex[n] = reflected;
                    values[n] = f_r;
                }
                continue;
            }
            if f_r < values[n - 1] {
                simplex[n] = reflected;
                values[n] = f_r;
                continue;
            }
            if f_r < values[n] {
                let outside = towards(-alpha * rho);
                let f_c = f(&outside);
                if f_c <= f_r {
                    simplex[n] = outside;
                    values[n] = f_c;
                    continue;
                }
            } else {
                let inside = towards(rho);
                let f_c = f(&inside);
                if f_c < values[n] {
                    simplex[n] = inside;
                    values[n] = f_c;
                    continue;
                }
            }
            // shrink towards the best vertex
            let best = simplex[0].clone();
            for i in 1..=n {
                simplex[i] = simplex[i]
                    .iter()
                    .zip(&best)
                    .map(|(p, b)| b + sigma * (p - b))
                    .collect();
                values[i] = f(&simplex[i]);
            }
        }

        let best = (0..=n)
            .min_by(|&a, &b| values[a].total_cmp(&values[b]))
            .unwrap_or(0);
        Minimum {
            x: simplex[best].clone(),
            value: values[best],
            converged,
        }
    }
}
