//! (μ/μ_w, λ)-CMA-ES with cumulative step-size adaptation, rank-one and
//! rank-μ covariance updates, using the default strategy parameters from
//! Hansen's CMA-ES tutorial. Positive recombination weights only, no restarts.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

/// Run stops early once `sigma * sqrt(largest eigenvalue)` drops below this.
const MIN_SEARCH_SPREAD: f64 = 1e-10;

/// Default population size `4 + floor(3 ln n)`.
pub fn default_population_size(dim: usize) -> usize {
    4 + (3.0 * (dim.max(1) as f64).ln()).floor() as usize
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub generations: usize,
}

#[derive(Debug, Clone)]
struct Parameters {
    weights: Vec<f64>,
    mu_eff: f64,
    c_sigma: f64,
    d_sigma: f64,
    c_c: f64,
    c_1: f64,
    c_mu: f64,
    chi_n: f64,
}

impl Parameters {
    fn new(n: usize, lambda: usize) -> Self {
        let nf = n as f64;
        let mu = (lambda / 2).max(1);
        let raw: Vec<f64> = (1..=mu)
            .map(|i| ((lambda as f64 + 1.0) / 2.0).ln() - (i as f64).ln())
            .collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();

        let c_sigma = (mu_eff + 2.0) / (nf + mu_eff + 5.0);
        let d_sigma = 1.0 + 2.0 * (((mu_eff - 1.0) / (nf + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
        let c_c = (4.0 + mu_eff / nf) / (nf + 4.0 + 2.0 * mu_eff / nf);
        let c_1 = 2.0 / ((nf + 1.3).powi(2) + mu_eff);
        let c_mu = (2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((nf + 2.0).powi(2) + mu_eff)).min(1.0 - c_1);
        let chi_n = nf.sqrt() * (1.0 - 1.0 / (4.0 * nf) + 1.0 / (21.0 * nf * nf));
        Self {
            weights,
            mu_eff,
            c_sigma,
            d_sigma,
            c_c,
            c_1,
            c_mu,
            chi_n,
        }
    }
}

/// Minimizes `f` starting from mean `x0` and step size `sigma0` using at most
/// `max_evaluations` calls. `x0` itself is not evaluated.
///
/// When fewer than `lambda` evaluations remain, the last partial generation is
/// sampled and evaluated but not used for adaptation.
pub fn minimize<F, R>(
    mut f: F,
    x0: &[f64],
    sigma0: f64,
    lambda: Option<usize>,
    max_evaluations: usize,
    rng: &mut R,
) -> Option<Minimum>
where
    F: FnMut(&[f64]) -> f64,
    R: Rng + ?Sized,
{
    let n = x0.len();
    if n == 0 || max_evaluations == 0 {
        return None;
    }
    let lambda = lambda.unwrap_or_else(|| default_population_size(n)).max(2);
    let par = Parameters::new(n, lambda);

    let mut mean = DVector::from_column_slice(x0);
    let mut sigma = sigma0;
    let mut cov = DMatrix::<f64>::identity(n, n);
    let mut basis = DMatrix::<f64>::identity(n, n);
    let mut scales = DVector::<f64>::from_element(n, 1.0);
    let mut path_sigma = DVector::<f64>::zeros(n);
    let mut path_c = DVector::<f64>::zeros(n);

    let mut best: Option<Minimum> = None;
    let mut evaluations = 0usize;
    let mut generation = 0usize;

    let mut samples: Vec<(f64, DVector<f64>, DVector<f64>)> = Vec::with_capacity(lambda);
    while evaluations < max_evaluations {
        let batch = lambda.min(max_evaluations - evaluations);
        samples.clear();
        for _ in 0..batch {
            let z = DVector::<f64>::from_fn(n, |_, _| rng.sample(StandardNormal));
            let y = &basis * z.component_mul(&scales);
            let x = &mean + sigma * &y;
            let value = f(x.as_slice());
            evaluations += 1;
            let improved = match &best {
                Some(b) => value < b.value,
                None => true,
            };
            if improved {
                best = Some(Minimum {
                    x: x.as_slice().to_vec(),
                    value,
                    evaluations,
                    generations: generation,
                });
            }
            samples.push((value, y, x));
        }
        if batch < lambda {
            break;
        }
        generation += 1;
        samples.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut y_w = DVector::<f64>::zeros(n);
        for (w, (_, y, _)) in par.weights.iter().zip(&samples) {
            y_w.axpy(*w, y, 1.0);
        }
        mean.axpy(sigma, &y_w, 1.0);

        // C^{-1/2} y_w = B D^{-1} B^T y_w
        let whitened = &basis * (basis.tr_mul(&y_w)).component_div(&scales);
        path_sigma =
            (1.0 - par.c_sigma) * &path_sigma + (par.c_sigma * (2.0 - par.c_sigma) * par.mu_eff).sqrt() * whitened;
        let ps_norm = path_sigma.norm();
        let decay = 1.0 - (1.0 - par.c_sigma).powi(2 * generation as i32);
        let h_sigma = ps_norm / decay.sqrt() < (1.4 + 2.0 / (n as f64 + 1.0)) * par.chi_n;
        let h = if h_sigma { 1.0 } else { 0.0 };
        path_c = (1.0 - par.c_c) * &path_c + h * (par.c_c * (2.0 - par.c_c) * par.mu_eff).sqrt() * &y_w;

        let delta_h = (1.0 - h) * par.c_c * (2.0 - par.c_c);
        let mut rank_mu = DMatrix::<f64>::zeros(n, n);
        for (w, (_, y, _)) in par.weights.iter().zip(&samples) {
            rank_mu.ger(*w, y, y, 1.0);
        }
        cov = (1.0 + par.c_1 * delta_h - par.c_1 - par.c_mu) * cov
            + par.c_1 * (&path_c * path_c.transpose())
            + par.c_mu * rank_mu;
        cov = 0.5 * (&cov + cov.transpose());

        sigma *= ((par.c_sigma / par.d_sigma) * (ps_norm / par.chi_n - 1.0)).exp();

        if !cov.iter().all(|v| v.is_finite()) || !sigma.is_finite() {
            break;
        }
        let eigen = SymmetricEigen::new(cov.clone());
        basis = eigen.eigenvectors;
        scales = eigen.eigenvalues.map(|ev| ev.max(0.0).sqrt());
        if scales.iter().any(|&s| s <= 0.0) {
            break;
        }
        if sigma * scales.max() < MIN_SEARCH_SPREAD {
            break;
        }
    }
    best.map(|mut b| {
        b.evaluations = evaluations;
        b.generations = generation;
        b
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn population_defaults() {
        assert_eq!(default_population_size(1), 4);
        assert_eq!(default_population_size(12), 11);
        assert_eq!(default_population_size(23), 13);
    }

    #[test]
    fn weights_are_normalized() {
        let p = Parameters::new(12, 11);
        assert!((p.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.weights.windows(2).all(|w| w[0] > w[1]));
        assert!(p.c_1 + p.c_mu <= 1.0);
    }

    #[test]
    fn solves_sphere() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let sphere = |x: &[f64]| x.iter().map(|v| (v - 3.0).powi(2)).sum::<f64>();
        let m = minimize(sphere, &[0.0; 8], 1.0, None, 6000, &mut rng).unwrap();
        assert!(m.value < 1e-10, "{}", m.value);
    }

    #[test]
    fn solves_rotated_ellipsoid() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let f = |x: &[f64]| {
            let mut acc = 0.0;
            for i in 0..x.len() {
                let s: f64 = x[..=i].iter().sum();
                acc += 10f64.powf(3.0 * i as f64 / (x.len() - 1) as f64) * s * s;
            }
            acc
        };
        let m = minimize(f, &[1.0; 6], 0.5, None, 20_000, &mut rng).unwrap();
        assert!(m.value < 1e-8, "{}", m.value);
    }

    #[test]
    fn respects_budget() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut calls = 0;
        let m = minimize(
            |x: &[f64]| {
                calls += 1;
                x[0].abs()
            },
            &[5.0],
            1.0,
            None,
            37,
            &mut rng,
        )
        .unwrap();
        assert_eq!(calls, 37);
        assert_eq!(m.evaluations, 37);
        assert!(minimize(|_: &[f64]| 0.0, &[1.0], 1.0, None, 0, &mut rng).is_none());
    }

    #[test]
    fn deterministic_for_seed() {
        let f = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
        let a = minimize(f, &[2.0; 4], 0.3, None, 500, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = minimize(f, &[2.0; 4], 0.3, None, 500, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
    }
}
