//! Derivative-free Nelder-Mead simplex minimizer.

pub(crate) struct NelderMead {
    pub(crate) max_evaluations: usize,
    pub(crate) tolerance: f64,
    pub(crate) initial_step: f64,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self {
            max_evaluations: 2000,
            tolerance: 1e-8,
            initial_step: 0.25,
        }
    }
}

impl NelderMead {
    /// Minimizes `f` from `start`; infinite objective values are allowed and
    /// treated as worst. Returns the best point and value seen.
    pub(crate) fn minimize<F: FnMut(&[f64]) -> f64>(
        &self,
        start: &[f64],
        mut f: F,
    ) -> (Vec<f64>, f64) {
        let dim = start.len();
        if dim == 0 {
            let value = f(start);
            return (start.to_vec(), value);
        }

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

        let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(dim + 1);
        simplex.push(start.to_vec());
        for i in 0..dim {
            let mut p = start.to_vec();
            p[i] += self.initial_step;
            simplex.push(p);
        }
        let mut values: Vec<f64> = simplex.iter().map(|p| eval(p, &mut evals)).collect();

        while evals < self.max_evaluations {
            let mut order: Vec<usize> = (0..=dim).collect();
            order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
            let best = order[0];
            let worst = order[dim];
            let second_worst = order[dim - 1];

            if values[worst].is_finite() && (values[worst] - values[best]).abs() <= self.tolerance {
                break;
            }

            // Centroid of all but the worst vertex.
            let mut centroid = vec![0.0; dim];
            for &idx in &order[..dim] {
                for (c, x) in centroid.iter_mut().zip(&simplex[idx]) {
                    *c += x / dim as f64;
                }
            }

            let reflect: Vec<f64> = centroid
                .iter()
                .zip(&simplex[worst])
                .map(|(c, w)| 2.0 * c - w)
                .collect();
            let f_reflect = eval(&reflect, &mut evals);

            if f_reflect < values[best] {
                let expand: Vec<f64> = centroid
                    .iter()
                    .zip(&reflect)
                    .map(|(c, r)| c + 2.0 * (r - c))
                    .collect();
                let f_expand = eval(&expand, &mut evals);
                if f_expand < f_reflect {
                    simplex[worst] = expand;
                    values[worst] = f_expand;
                } else {
                    simplex[worst] = reflect;
                    values[worst] = f_reflect;
                }
            } else if f_reflect < values[second_worst] {
                simplex[worst] = reflect;
                values[worst] = f_reflect;
            } else {
                let contract_base = if f_reflect < values[worst] {
                    &reflect
                } else {
                    &simplex[worst]
                };
                let contract: Vec<f64> = centroid
                    .iter()
                    .zip(contract_base)
                    .map(|(c, w)| c + 0.5 * (w - c))
                    .collect();
                let f_contract = eval(&contract, &mut evals);
                if f_contract < values[worst].min(f_reflect) {
                    simplex[worst] = contract;
                    values[worst] = f_contract;
                } else {
                    // Shrink toward the best vertex.
                    let best_point = simplex[best].clone();
                    for idx in 0..=dim {
                        if idx == best {
                            continue;
                        }
                        for (x, b) in simplex[idx].iter_mut().zip(&best_point) {
                            *x = b + 0.5 * (*x - b);
                        }
                        values[idx] = eval(&simplex[idx].clone(), &mut evals);
                    }
                }
            }
        }

        let mut best = 0;
        for i in 1..=dim {
            if values[i] < values[best] {
                best = i;
            }
        }
        (simplex[best].clone(), values[best])
    }
}
