use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProblemKind {
    /// `f(w) = ||X w - y||^2 / (2n)`.
    LeastSquares,
    /// `f(w) = (1/n) Σ log(1 + exp(-y_i x_i^T w))`, labels in `{-1, +1}`.
    Logistic,
}

/// Synthetic data set: Gaussian design, planted `w*`, split into equal
/// shards, one per worker.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub dim: usize,
    pub rows_per_worker: usize,
    pub noise: f64,
    pub seed: u64,
}

impl ProblemSpec {
    pub fn least_squares(dim: usize, rows_per_worker: usize, seed: u64) -> Self {
        ProblemSpec {
            kind: ProblemKind::LeastSquares,
            dim,
            rows_per_worker,
            noise: 0.1,
            seed,
        }
    }

    pub fn logistic(dim: usize, rows_per_worker: usize, seed: u64) -> Self {
        ProblemSpec {
            kind: ProblemKind::Logistic,
            ..Self::least_squares(dim, rows_per_worker, seed)
        }
    }

    pub fn build(&self, workers: usize) -> Result<Problem> {
        Problem::generate(self, workers)
    }
}

#[derive(Debug, Clone)]
struct Shard {
    x: DMatrix<f64>,
    y: DVector<f64>,
}

/// Materialized problem: shards, the global objective `f = (1/W) Σ f_i`,
/// its smoothness constant and optimal value (or a lower bound).
#[derive(Debug, Clone)]
pub struct Problem {
    kind: ProblemKind,
    dim: usize,
    shards: Vec<Shard>,
    full: Shard,
    smoothness: f64,
    f_star: f64,
    optimum: Option<Vec<f64>>,
}

impl Problem {
    fn generate(spec: &ProblemSpec, workers: usize) -> Result<Self> {
        if spec.dim == 0 || spec.rows_per_worker == 0 || workers == 0 {
            return Err(Error::Config(
                "problem needs dim, rows_per_worker and workers >= 1".into(),
            ));
        }
        if !(spec.noise >= 0.0 && spec.noise.is_finite()) {
            return Err(Error::Config(format!(
                "noise must be >= 0, got {}",
                spec.noise
            )));
        }
        let d = spec.dim;
        let n = spec.rows_per_worker * workers;
        let mut rng = stream(spec.seed, &[0x5052_4f42]);
        let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
        let w_star = DVector::from_fn(d, |_, _| normal());
        // filled row by row so the data do not depend on storage order
        let mut rows = Vec::with_capacity(n * d);
        for _ in 0..n * d {
            rows.push(normal());
        }
        let x = DMatrix::from_row_slice(n, d, &rows);
        let noise: Vec<f64> = (0..n).map(|_| spec.noise * normal()).collect();
        let signal = &x * &w_star;
        let y = DVector::from_fn(n, |i, _| match spec.kind {
            ProblemKind::LeastSquares => signal[i] + noise[i],
            ProblemKind::Logistic => {
                if signal[i] + noise[i] >= 0.0 {
                    1.0
                } else {
                    -1.0
                }
            }
        });
        let shards = (0..workers)
            .map(|w| {
                let r = w * spec.rows_per_worker;
                Shard {
                    x: x.rows(r, spec.rows_per_worker).into_owned(),
                    y: y.rows(r, spec.rows_per_worker).into_owned(),
                }
            })
            .collect();
        let gram = x.transpose() * &x / n as f64;
        let lambda_max = SymmetricEigen::new(gram.clone())
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let (smoothness, f_star, optimum) = match spec.kind {
            ProblemKind::LeastSquares => {
                let rhs = x.transpose() * &y / n as f64;
                let w_opt = gram
                    .cholesky()
                    .ok_or_else(|| {
                        Error::Config("design is rank deficient; add rows per worker".into())
                    })?
                    .solve(&rhs);
                let full = Shard {
                    x: x.clone(),
                    y: y.clone(),
                };
                let f_star = least_squares_value(&full, &w_opt);
                (lambda_max, f_star, Some(w_opt.data.into()))
            }
            ProblemKind::Logistic => (lambda_max / 4.0, 0.0, None),
        };
        Ok(Problem {
            kind: spec.kind,
            dim: d,
            shards,
            full: Shard { x, y },
            smoothness,
            f_star,
            optimum,
        })
    }

    pub fn kind(&self) -> ProblemKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn workers(&self) -> usize {
        self.shards.len()
    }

    /// `L` of the global objective.
    pub fn smoothness(&self) -> f64 {
        self.smoothness
    }

    /// Optimal value for least squares; the lower bound 0 for logistic
    /// regression.
    pub fn f_star(&self) -> f64 {
        self.f_star
    }

    /// Minimizer, when known in closed form.
    pub fn optimum(&self) -> Option<&[f64]> {
        self.optimum.as_deref()
    }

    pub fn value(&self, w: &[f64]) -> f64 {
        self.eval(&self.full, w)
    }

    pub fn gradient(&self, w: &[f64]) -> Vec<f64> {
        self.grad(&self.full, w)
    }

    pub fn local_gradient(&self, worker: usize, w: &[f64]) -> Vec<f64> {
        self.grad(&self.shards[worker], w)
    }

    fn eval(&self, s: &Shard, w: &[f64]) -> f64 {
        let w = DVector::from_column_slice(w);
        match self.kind {
            ProblemKind::LeastSquares => least_squares_value(s, &w),
            ProblemKind::Logistic => {
                let margins = s.y.component_mul(&(&s.x * &w));
                margins.iter().map(|&z| softplus(-z)).sum::<f64>() / s.y.len() as f64
            }
        }
    }

    fn grad(&self, s: &Shard, w: &[f64]) -> Vec<f64> {
        let w = DVector::from_column_slice(w);
        let n = s.y.len() as f64;
        let coeff = match self.kind {
            ProblemKind::LeastSquares => &s.x * &w - &s.y,
            ProblemKind::Logistic => {
                let margins = s.y.component_mul(&(&s.x * &w));
                DVector::from_fn(s.y.len(), |i, _| -s.y[i] * sigmoid(-margins[i]))
            }
        };
        (s.x.transpose() * coeff / n).data.into()
    }
}

fn least_squares_value(s: &Shard, w: &DVector<f64>) -> f64 {
    (&s.x * w - &s.y).norm_squared() / (2.0 * s.y.len() as f64)
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn finite_diff(p: &Problem, w: &[f64], i: usize) -> f64 {
        let h = 1e-6;
        let mut a = w.to_vec();
        let mut b = w.to_vec();
        a[i] += h;
        b[i] -= h;
        (p.value(&a) - p.value(&b)) / (2.0 * h)
    }

    #[test]
    fn gradients_match_finite_differences() {
        for spec in [
            ProblemSpec::least_squares(5, 20, 1),
            ProblemSpec::logistic(5, 20, 1),
        ] {
            let p = spec.build(3).unwrap();
            let w = vec![0.3, -0.2, 0.1, 0.5, -0.4];
            let g = p.gradient(&w);
            for i in 0..5 {
                assert!((g[i] - finite_diff(&p, &w, i)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn global_gradient_is_mean_of_local() {
        let p = ProblemSpec::least_squares(4, 10, 2).build(4).unwrap();
        let w = vec![1.0, 2.0, -1.0, 0.5];
        let g = p.gradient(&w);
        for i in 0..4 {
            let mean = (0..4).map(|k| p.local_gradient(k, &w)[i]).sum::<f64>() / 4.0;
            assert!((g[i] - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn least_squares_optimum_has_zero_gradient() {
        let p = ProblemSpec::least_squares(6, 30, 3).build(2).unwrap();
        let w = p.optimum().unwrap();
        assert!(p.gradient(w).iter().all(|g| g.abs() < 1e-12));
        assert!((p.value(w) - p.f_star()).abs() < 1e-15);
        assert!(p.value(&[0.0; 6]) > p.f_star());
    }

    #[test]
    fn smoothness_bounds_curvature() {
        let p = ProblemSpec::least_squares(8, 16, 4).build(2).unwrap();
        let a = vec![0.1; 8];
        let b: Vec<f64> = (0..8).map(|i| i as f64 * 0.3).collect();
        let ga = p.gradient(&a);
        let gb = p.gradient(&b);
        let dg: f64 = ga
            .iter()
            .zip(&gb)
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt();
        let dw: f64 = a
            .iter()
            .zip(&b)
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(dg <= p.smoothness() * dw * (1.0 + 1e-12));
    }
}
