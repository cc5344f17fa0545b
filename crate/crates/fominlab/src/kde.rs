//! Gaussian kernel density estimate and the score field it induces.
//!
//! The density is a mixture of product Gaussian kernels centered at the
//! measure's samples with a per-coordinate bandwidth. Both the log-density
//! and its gradient are evaluated analytically from the mixture (no numeric
//! differentiation anywhere), with a max-shifted accumulation so that far
//! tails neither underflow nor lose the gradient.
//!
//! The score field returns
//!
//! ```text
//! v_z(x) = -<grad log rho_hat(x), z>
//! ```
//!
//! The sign is pinned by the integration-by-parts orientation
//! `int <D phi, z> d nu = int v_z phi d nu`: for a stationary Gaussian
//! N(0, 1/2) this forces `v_z(x) = +2 <x, z>`, which the minus sign delivers.
//! (Stated with `v_z = <D log rho, z>` the identity would need the opposite
//! orientation; the discrepancy is resolved by the Gaussian oracle, not
//! silently absorbed.)

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::invariant::EmpiricalMeasure;
use crate::util::dot;

/// Bandwidth selection for the kernel mixture.
///
/// Silverman targets density estimation. Score estimation differentiates the
/// mixture, which amplifies kernel-level noise (variance ~ 1/(n b^{d+2})),
/// so score-quality work wants a wider kernel and pays a little more
/// smoothing bias; `SilvermanScaled(2.0)` is the measured sweet spot for the
/// Gaussian-family targets at desk-scale n.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthRule {
    /// (4/(d+2))^{1/(d+4)} n^{-1/(d+4)} sigma_j per coordinate.
    Silverman,
    /// Silverman width multiplied by a fixed factor.
    SilvermanScaled(f64),
    /// The same width for every coordinate.
    Fixed(f64),
}

/// Gaussian mixture density fitted to an empirical measure.
#[derive(Debug, Clone)]
pub struct KdeDensity {
    dim: usize,
    centers: Vec<f64>,
    weights: Vec<f64>,
    bandwidth: Vec<f64>,
    /// -sum_j ln b_j - (d/2) ln(2 pi)
    log_norm: f64,
}

/// Terms with squared kernel distance beyond this never alter the f64 sum
/// (exp(-150/2) ~ 2.6e-33 against a leading term of 1).
const CUTOFF_Q: f64 = 150.0;

/// Fixed orientation of the score against the log-density gradient:
/// `v_z = SCORE_SIGN * <grad log rho_hat, z>`, resolved by the Gaussian
/// oracle (see the module docs).
pub const SCORE_SIGN: f64 = -1.0;

/// Fewest effective samples a kernel fit will accept.
pub const MIN_EFFECTIVE_SAMPLES: f64 = 100.0;

impl KdeDensity {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_centers(&self) -> usize {
        self.weights.len()
    }

    pub fn bandwidth(&self) -> &[f64] {
        &self.bandwidth
    }

    /// Shifted kernel accumulation: returns (q_min, sum_i w_i e^{-(q_i-q_min)/2},
    /// the gradient accumulator sum_i w_i e^{-(q_i-q_min)/2} (c_i - x)/b^2).
    fn accumulate(&self, x: &[f64]) -> (f64, f64, Vec<f64>) {
        let d = self.dim;
        debug_assert_eq!(x.len(), d);
        let n = self.n_centers();
        let mut q_min = f64::INFINITY;
        for i in 0..n {
            let c = &self.centers[i * d..(i + 1) * d];
            let mut q = 0.0;
            for j in 0..d {
                let u = (x[j] - c[j]) / self.bandwidth[j];
                q += u * u;
            }
            if q < q_min {
                q_min = q;
            }
        }
        let mut s0 = 0.0;
        let mut s1 = vec![0.0; d];
        for i in 0..n {
            let c = &self.centers[i * d..(i + 1) * d];
            let mut q = 0.0;
            for j in 0..d {
                let u = (x[j] - c[j]) / self.bandwidth[j];
                q += u * u;
            }
            if q - q_min > CUTOFF_Q {
                continue;
            }
            let e = self.weights[i] * (-(q - q_min) / 2.0).exp();
            s0 += e;
            for j in 0..d {
                s1[j] += e * (c[j] - x[j]) / (self.bandwidth[j] * self.bandwidth[j]);
            }
        }
        (q_min, s0, s1)
    }

    /// ln rho_hat(x); finite for every finite x by the shifted accumulation.
    pub fn log_density(&self, x: &[f64]) -> f64 {
        let (q_min, s0, _) = self.accumulate(x);
        s0.ln() - q_min / 2.0 + self.log_norm
    }

    pub fn density(&self, x: &[f64]) -> f64 {
        self.log_density(x).exp()
    }

    /// grad ln rho_hat(x), analytic from the mixture.
    pub fn grad_log_density(&self, x: &[f64]) -> Vec<f64> {
        let (_, s0, mut s1) = self.accumulate(x);
        for v in s1.iter_mut() {
            *v /= s0;
        }
        s1
    }
}

/// Fit a Gaussian KDE to the measure. Errors if the effective sample count
/// is too small or some coordinate has zero spread (a single atom, or a
/// degenerate batch).
pub fn kde_fit(measure: &EmpiricalMeasure, rule: BandwidthRule) -> Result<KdeDensity> {
    let d = measure.dim();
    let n = measure.n_samples();
    let mut centers = Vec::with_capacity(n * d);
    let mut weights = Vec::with_capacity(n);
    for i in 0..n {
        centers.extend_from_slice(measure.sample(i));
        weights.push(measure.weight(i));
    }
    let ess = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
    if ess < MIN_EFFECTIVE_SAMPLES {
        return Err(Error::InvalidParameter(format!(
            "kernel fit needs at least {MIN_EFFECTIVE_SAMPLES} effective samples, got {ess:.1}"
        )));
    }
    let bandwidth = match rule {
        BandwidthRule::Fixed(b) => {
            if !(b > 0.0) {
                return Err(Error::InvalidParameter("bandwidth must be > 0".into()));
            }
            vec![b; d]
        }
        BandwidthRule::Silverman | BandwidthRule::SilvermanScaled(_) => {
            let scale = match rule {
                BandwidthRule::SilvermanScaled(s) => {
                    if !(s > 0.0) {
                        return Err(Error::InvalidParameter(
                            "bandwidth scale must be > 0".into(),
                        ));
                    }
                    s
                }
                _ => 1.0,
            };
            let factor = (4.0 / (d as f64 + 2.0)).powf(1.0 / (d as f64 + 4.0))
                * ess.powf(-1.0 / (d as f64 + 4.0))
                * scale;
            let mut bw = Vec::with_capacity(d);
            for j in 0..d {
                let mean =
                    crate::util::neumaier_sum((0..n).map(|i| weights[i] * centers[i * d + j]));
                let var: f64 = (0..n)
                    .map(|i| {
                        let u = centers[i * d + j] - mean;
                        weights[i] * u * u
                    })
                    .sum();
                // rounding leaves var ~ ulp^2 for coincident samples; a
                // spread below ~1e-13 of scale is degenerate either way
                let floor = (1e3 * f64::EPSILON * (mean.abs() + 1.0)).powi(2);
                if !(var > floor) {
                    return Err(Error::DegenerateSpread { coord: j });
                }
                bw.push(factor * var.sqrt());
            }
            bw
        }
    };
    let log_norm = -bandwidth.iter().map(|b| b.ln()).sum::<f64>()
        - 0.5 * d as f64 * (2.0 * std::f64::consts::PI).ln();
    Ok(KdeDensity { dim: d, centers, weights, bandwidth, log_norm })
}

/// The score field `v_z(x) = -<grad log rho_hat(x), z>`, linear in z.
#[derive(Debug, Clone)]
pub struct ScoreField {
    density: KdeDensity,
}

impl ScoreField {
    pub fn new(density: KdeDensity) -> Self {
        Self { density }
    }

    pub fn density(&self) -> &KdeDensity {
        &self.density
    }

    /// v_z(x).
    pub fn score(&self, x: &[f64], z: &[f64]) -> f64 {
        SCORE_SIGN * dot(&self.density.grad_log_density(x), z)
    }

    /// All coordinate scores at once: (v_{e_1}, ..., v_{e_d})(x).
    pub fn score_vec(&self, x: &[f64]) -> Vec<f64> {
        self.density.grad_log_density(x).into_iter().map(|g| SCORE_SIGN * g).collect()
    }

    /// Coordinate scores at many points, in input order.
    pub fn score_vec_bulk(&self, points: &[Vec<f64>]) -> Vec<Vec<f64>> {
        points.par_iter().map(|x| self.score_vec(x)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drift::DriftModel;
    use crate::invariant::{sample_long_run, EmpiricalMeasure, Provenance};
    use crate::sde::{Scheme, SimConfig};

    fn ou_measure(n: usize, seed: u64) -> EmpiricalMeasure {
        let model = DriftModel::ou(1);
        let config = SimConfig {
            dt: 1e-3,
            t_final: 1.0,
            scheme: Scheme::EulerMaruyama,
            seed,
            n_paths: 64,
        };
        sample_long_run(&model, &[0.0], 10.0, n, 1.0, &config).unwrap()
    }

    #[test]
    fn silverman_bandwidth_matches_the_formula() {
        let nu = ou_measure(5_000, 7);
        let kde = kde_fit(&nu, BandwidthRule::Silverman).unwrap();
        // d = 1: (4/3)^{1/5} n^{-1/5} sigma
        let mean = (0..nu.n_samples()).map(|i| nu.sample(i)[0]).sum::<f64>() / 5_000.0;
        let sigma = ((0..nu.n_samples())
            .map(|i| (nu.sample(i)[0] - mean).powi(2))
            .sum::<f64>()
            / 5_000.0)
            .sqrt();
        let expect = (4.0f64 / 3.0).powf(0.2) * 5_000f64.powf(-0.2) * sigma;
        assert!((kde.bandwidth()[0] - expect).abs() < 1e-12);
    }

    #[test]
    fn ou_density_at_origin_matches_the_gaussian() {
        let nu = ou_measure(20_000, 8);
        let kde = kde_fit(&nu, BandwidthRule::Silverman).unwrap();
        let rho0 = kde.density(&[0.0]);
        let exact = 1.0 / std::f64::consts::PI.sqrt(); // N(0, 1/2) at 0
        assert!((rho0 - exact).abs() < 0.05 * exact, "{rho0} vs {exact}");
    }

    #[test]
    fn single_atom_is_degenerate() {
        let atom =
            EmpiricalMeasure::from_parts(1, vec![2.0], vec![1.0], Provenance::External).unwrap();
        assert!(kde_fit(&atom, BandwidthRule::Silverman).is_err());
        assert!(kde_fit(&atom, BandwidthRule::Fixed(0.1)).is_err());
        // enough atoms but zero spread still fails on the spread check
        let flat = EmpiricalMeasure::from_parts(
            1,
            vec![2.0; 200],
            vec![1.0; 200],
            Provenance::External,
        )
        .unwrap();
        assert!(matches!(
            kde_fit(&flat, BandwidthRule::Silverman),
            Err(Error::DegenerateSpread { coord: 0 })
        ));
    }

    #[test]
    fn translated_samples_translate_the_density() {
        let nu = ou_measure(2_000, 9);
        let c = 3.25;
        let shifted_samples: Vec<f64> = (0..nu.n_samples()).map(|i| nu.sample(i)[0] + c).collect();
        let shifted = EmpiricalMeasure::from_parts(
            1,
            shifted_samples,
            (0..nu.n_samples()).map(|i| nu.weight(i)).collect(),
            Provenance::External,
        )
        .unwrap();
        let kde = kde_fit(&nu, BandwidthRule::Silverman).unwrap();
        let kde_shift = kde_fit(&shifted, BandwidthRule::Silverman).unwrap();
        for x in [-1.0, 0.0, 0.7, 2.0] {
            let a = kde.log_density(&[x]);
            let b = kde_shift.log_density(&[x + c]);
            assert!((a - b).abs() < 1e-9, "{a} vs {b} at {x}");
        }
    }

    #[test]
    fn log_density_stays_finite_in_the_far_tail() {
        let nu = ou_measure(2_000, 10);
        let kde = kde_fit(&nu, BandwidthRule::Silverman).unwrap();
        let score = ScoreField::new(kde);
        for x in [25.0, -60.0, 300.0] {
            let ld = score.density().log_density(&[x]);
            assert!(ld.is_finite(), "log density at {x}");
            let v = score.score(&[x], &[1.0]);
            assert!(v.is_finite());
            // far past all centers the nearest-kernel tail dominates: v > 0
            assert!(v.signum() == x.signum(), "score {v} at {x}");
        }
    }

    #[test]
    fn score_is_linear_in_the_direction() {
        let nu = ou_measure(2_000, 11);
        let score = ScoreField::new(kde_fit(&nu, BandwidthRule::Silverman).unwrap());
        let x = [0.3];
        let v1 = score.score(&x, &[1.0]);
        assert_eq!(score.score(&x, &[0.0]), 0.0);
        let alpha = -1.75;
        assert!((score.score(&x, &[alpha]) - alpha * v1).abs() < 1e-12 * v1.abs().max(1.0));
    }

    #[test]
    fn ou_score_matches_the_gradient_drift_oracle() {
        // rho ~ exp(-x^2) so v(x) = 2x under the working orientation.
        // Pointwise score noise at this n allows ~5% scatter on top of the
        // smoothing bias; the tight 7% check runs at n = 1e5 in acceptance.
        let nu = ou_measure(20_000, 12);
        let score = ScoreField::new(kde_fit(&nu, BandwidthRule::SilvermanScaled(2.0)).unwrap());
        let v = score.score(&[0.5], &[1.0]);
        assert!((v - 1.0).abs() < 0.15, "v(0.5) = {v}");
    }

    #[test]
    fn rotated_score_matches_the_lyapunov_gaussian() {
        let model = DriftModel::rotated();
        let config = SimConfig {
            dt: 1e-3,
            t_final: 1.0,
            scheme: Scheme::tamed_for_dt(1e-3),
            seed: 13,
            n_paths: 64,
        };
        let nu = sample_long_run(&model, &[0.0, 0.0], 10.0, 30_000, 1.0, &config).unwrap();
        let score = ScoreField::new(kde_fit(&nu, BandwidthRule::SilvermanScaled(1.5)).unwrap());
        let v = score.score(&[0.5, 0.0], &[1.0, 0.0]);
        assert!((v - 1.0).abs() < 0.2, "v(0.5, 0) . e1 = {v}");
    }
}
