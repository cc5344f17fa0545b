//! Integration-by-parts calculus against the empirical invariant measure.
//!
//! Centerpiece identities, all checked by Monte Carlo means over the
//! measure:
//!
//! * `int <D phi, z> d nu = int v_z phi d nu` with the score
//!   `v_z = -<D log rho_hat, z>` (orientation pinned by the Gaussian
//!   oracle, see [`crate::kde`]);
//! * the gradient integral inequality
//!   `|int <D phi, h> d nu| <= C_p ||phi||_{L^p(nu)} |h|`, probed as a
//!   sup-ratio over a battery of bounded test functions;
//! * the adjoint `D*(F) = -div F + sum_h v_{e_h} f_h` and the induced
//!   operator `-1/2 D* D`, a generalized Ornstein-Uhlenbeck generator.
//!
//! Score evaluations cost O(n_centers) each, so integrals of score-bearing
//! quantities run over a deterministic subsample of evaluation points
//! (`eval_cap`); the kernel mixture itself always keeps every center.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimate::MCEstimate;
use crate::invariant::EmpiricalMeasure;
use crate::kde::ScoreField;
use crate::testfn::{TestFunction, VectorField};
use crate::util::{dot, norm};

/// Report for one integration-by-parts residual.
#[derive(Debug, Clone, Serialize)]
pub struct IbpReport {
    /// int <D phi, z> d nu over all samples.
    pub lhs: MCEstimate,
    /// int v_z phi d nu over the evaluation subsample.
    pub rhs: MCEstimate,
    /// |lhs - rhs| / (||phi||_{L^p} |z|).
    pub normalized_residual: f64,
    /// ||phi||_{L^p} |z|, the normalization.
    pub denominator: f64,
    pub p: f64,
}

/// Check `int <D phi, z> d nu = int v_z phi d nu`.
pub fn ibp_residual(
    measure: &EmpiricalMeasure,
    score: &ScoreField,
    phi: &TestFunction,
    z: &[f64],
    p: f64,
    eval_cap: usize,
) -> IbpReport {
    let lhs = measure.mean_of(|x| dot(&phi.grad(x), z));
    let idx = measure.thinned_indices(eval_cap);
    let vals: Vec<f64> = {
        use rayon::prelude::*;
        idx.par_iter()
            .map(|&i| {
                let x = measure.sample(i);
                score.score(x, z) * phi.eval(x)
            })
            .collect()
    };
    let rhs = MCEstimate::from_samples(&vals);
    let denominator = lp_norm(measure, |x| phi.eval(x), p).value * norm(z);
    let normalized_residual = if denominator > 0.0 {
        (lhs.value - rhs.value).abs() / denominator
    } else {
        (lhs.value - rhs.value).abs()
    };
    IbpReport { lhs, rhs, normalized_residual, denominator, p }
}

/// `||phi||_{L^p(nu)}` with a delta-method standard error.
pub fn lp_norm<F>(measure: &EmpiricalMeasure, phi: F, p: f64) -> MCEstimate
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    assert!(p >= 1.0, "p must be >= 1");
    let mp = measure.mean_of(|x| phi(x).abs().powf(p));
    let value = mp.value.powf(1.0 / p);
    let std_error = if mp.value > 0.0 {
        mp.value.powf(1.0 / p - 1.0) / p * mp.std_error
    } else {
        0.0
    };
    MCEstimate { value, std_error, n_samples: mp.n_samples }
}

/// One battery entry of the sup-ratio scan.
#[derive(Debug, Clone, Serialize)]
pub struct CpEntry {
    pub label: String,
    pub direction: Vec<f64>,
    /// int <D phi, h> d nu, signed; the ratio takes its absolute value.
    pub numerator: MCEstimate,
    /// ||phi||_{L^p} |h|.
    pub denominator: f64,
    pub ratio: f64,
}

/// Sup-ratio report for the gradient integral inequality.
#[derive(Debug, Clone, Serialize)]
pub struct CpReport {
    pub p: f64,
    pub entries: Vec<CpEntry>,
    pub max_ratio: f64,
    /// Max over the first half of the battery, for the stability diagnostic.
    pub first_half_max: f64,
    /// max_ratio / first_half_max (1.0 when both vanish).
    pub stability_ratio: f64,
}

/// Probe `sup_phi |int <D phi, h> d nu| / (||phi||_{L^p} |h|)` over a battery
/// and direction set. The sup over all of C^1_b is a finite constant; the
/// empirical max must therefore stabilize as the battery grows, which the
/// half-vs-full ratio reports.
pub fn estimate_cp(
    measure: &EmpiricalMeasure,
    battery: &[TestFunction],
    directions: &[Vec<f64>],
    p: f64,
) -> CpReport {
    assert!(!battery.is_empty(), "battery must be nonempty");
    let mut entries = Vec::with_capacity(battery.len() * directions.len());
    for phi in battery {
        let denom_phi = lp_norm(measure, |x| phi.eval(x), p).value;
        for h in directions {
            let numerator = measure.mean_of(|x| dot(&phi.grad(x), h));
            let denominator = denom_phi * norm(h);
            let ratio =
                if denominator > 0.0 { numerator.value.abs() / denominator } else { 0.0 };
            entries.push(CpEntry {
                label: phi.label.clone(),
                direction: h.clone(),
                numerator,
                denominator,
                ratio,
            });
        }
    }
    let max_ratio = entries.iter().map(|e| e.ratio).fold(0.0, f64::max);
    let half = battery.len().div_ceil(2) * directions.len();
    let first_half_max = entries[..half].iter().map(|e| e.ratio).fold(0.0, f64::max);
    let stability_ratio = if first_half_max > 0.0 {
        max_ratio / first_half_max
    } else if max_ratio == 0.0 {
        1.0
    } else {
        f64::INFINITY
    };
    CpReport { p, entries, max_ratio, first_half_max, stability_ratio }
}

/// The adjoint applied to a coordinate vector field:
/// `D*(F)(x) = -div F(x) + sum_h v_{e_h}(x) f_h(x)`.
pub fn dstar(score: &ScoreField, field: &VectorField, x: &[f64]) -> f64 {
    let v = score.score_vec(x);
    let f = field.eval(x);
    -field.divergence(x) + dot(&v, &f)
}

/// The generalized Ornstein-Uhlenbeck operator applied pointwise:
/// `-1/2 D*D(phi)(x) = 1/2 tr Hess phi(x) - 1/2 sum_h v_{e_h}(x) d_h phi(x)`.
/// Requires the hessian.
pub fn generalized_ou_apply(score: &ScoreField, phi: &TestFunction, x: &[f64]) -> Result<f64> {
    let d = x.len();
    let hess = phi.hessian(x)?;
    let trace: f64 = (0..d).map(|i| hess[i * d + i]).sum();
    let v = score.score_vec(x);
    let g = phi.grad(x);
    Ok(0.5 * trace - 0.5 * dot(&v, &g))
}

/// Mean of the score in direction z over the evaluation subsample
/// (integration by parts with phi = 1 forces it to vanish).
pub fn score_mean(
    measure: &EmpiricalMeasure,
    score: &ScoreField,
    z: &[f64],
    eval_cap: usize,
) -> MCEstimate {
    use rayon::prelude::*;
    let idx = measure.thinned_indices(eval_cap);
    let vals: Vec<f64> =
        idx.par_iter().map(|&i| score.score(measure.sample(i), z)).collect();
    MCEstimate::from_samples(&vals)
}

/// Empirical `||v_z||_{L^p(nu)}` for each requested p (the integrability
/// ladder: finite, nondecreasing in p for any probability measure).
pub fn score_lp_ladder(
    measure: &EmpiricalMeasure,
    score: &ScoreField,
    z: &[f64],
    ps: &[f64],
    eval_cap: usize,
) -> Vec<(f64, f64)> {
    use rayon::prelude::*;
    let idx = measure.thinned_indices(eval_cap);
    let vals: Vec<f64> =
        idx.par_iter().map(|&i| score.score(measure.sample(i), z)).collect();
    ps.iter()
        .map(|&p| {
            let mp = vals.iter().map(|v| v.abs().powf(p)).sum::<f64>() / vals.len() as f64;
            (p, mp.powf(1.0 / p))
        })
        .collect()
}

/// Relative L^2(nu) distance between the fitted score in direction z and a
/// reference field, over the evaluation subsample.
pub fn score_l2_error<F>(
    measure: &EmpiricalMeasure,
    score: &ScoreField,
    z: &[f64],
    reference: F,
    eval_cap: usize,
) -> f64
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    use rayon::prelude::*;
    let idx = measure.thinned_indices(eval_cap);
    // collect per-point terms, then reduce in fixed order (bit-stable)
    let terms: Vec<(f64, f64)> = idx
        .par_iter()
        .map(|&i| {
            let x = measure.sample(i);
            let v = score.score(x, z);
            let r = reference(x);
            ((v - r) * (v - r), r * r)
        })
        .collect();
    let (err2, ref2) =
        terms.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    if ref2 == 0.0 {
        return err2.sqrt();
    }
    (err2 / ref2).sqrt()
}

/// Paired adjointness residual `E<D phi, F> - E[phi D*(F)]` over the
/// evaluation subsample (both sides on the same points, so the difference
/// carries an honest standard error).
pub fn adjointness_residual(
    measure: &EmpiricalMeasure,
    score: &ScoreField,
    phi: &TestFunction,
    field: &VectorField,
    eval_cap: usize,
) -> MCEstimate {
    use rayon::prelude::*;
    let idx = measure.thinned_indices(eval_cap);
    let vals: Vec<f64> = idx
        .par_iter()
        .map(|&i| {
            let x = measure.sample(i);
            dot(&phi.grad(x), &field.eval(x)) - phi.eval(x) * dstar(score, field, x)
        })
        .collect();
    MCEstimate::from_samples(&vals)
}

/// Paired Dirichlet-form residual
/// `E[(-1/2 D*D phi) psi] + 1/2 E<D phi, D psi>` over the subsample.
pub fn dirichlet_residual(
    measure: &EmpiricalMeasure,
    score: &ScoreField,
    phi: &TestFunction,
    psi: &TestFunction,
    eval_cap: usize,
) -> Result<MCEstimate> {
    use rayon::prelude::*;
    let idx = measure.thinned_indices(eval_cap);
    let vals: Vec<f64> = idx
        .par_iter()
        .map(|&i| {
            let x = measure.sample(i);
            let lphi = generalized_ou_apply(score, phi, x)?;
            Ok(lphi * psi.eval(x) + 0.5 * dot(&phi.grad(x), &psi.grad(x)))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(MCEstimate::from_samples(&vals))
}

/// Build a coordinate field from per-axis test functions; errors when the
/// component count does not match the measure dimension.
pub fn coordinate_field(dim: usize, components: Vec<TestFunction>) -> Result<VectorField> {
    if components.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: components.len() });
    }
    Ok(VectorField::new(components))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drift::DriftModel;
    use crate::invariant::sample_long_run;
    use crate::kde::{kde_fit, BandwidthRule};
    use crate::sde::{Scheme, SimConfig};
    use crate::testfn::canonical_battery;
    use std::sync::OnceLock;

    /// OU stationary measure with two score fits: Silverman for integral
    /// identities (small smoothing bias) and a widened kernel for pointwise
    /// score values (small derivative noise).
    fn ou_fixture() -> &'static (EmpiricalMeasure, ScoreField, ScoreField) {
        static FIX: OnceLock<(EmpiricalMeasure, ScoreField, ScoreField)> = OnceLock::new();
        FIX.get_or_init(|| {
            let model = DriftModel::ou(1);
            let config = SimConfig {
                dt: 1e-3,
                t_final: 1.0,
                scheme: Scheme::EulerMaruyama,
                seed: 2718,
                n_paths: 64,
            };
            let nu = sample_long_run(&model, &[0.0], 10.0, 30_000, 1.0, &config).unwrap();
            let score = ScoreField::new(kde_fit(&nu, BandwidthRule::Silverman).unwrap());
            let score_wide =
                ScoreField::new(kde_fit(&nu, BandwidthRule::SilvermanScaled(2.0)).unwrap());
            (nu, score, score_wide)
        })
    }

    #[test]
    fn ibp_holds_for_the_stein_pair() {
        let (nu, score, _) = ou_fixture();
        let phi = TestFunction::sin_wave("sin_k1_e1", vec![1.0]);
        let rep = ibp_residual(nu, score, &phi, &[1.0], 2.0, 8_000);
        let exact = (-0.25f64).exp();
        assert!((rep.lhs.value - exact).abs() < 0.02, "lhs {}", rep.lhs.value);
        assert!((rep.rhs.value - exact).abs() < 0.03, "rhs {}", rep.rhs.value);
        assert!(rep.normalized_residual < 0.05, "{rep:?}");
    }

    #[test]
    fn ibp_trivial_cases() {
        let (nu, score, _) = ou_fixture();
        let constant = TestFunction::constant(3.0);
        let rep = ibp_residual(nu, score, &constant, &[1.0], 2.0, 4_000);
        assert_eq!(rep.lhs.value, 0.0);
        // RHS = 3 * mean(v_z): must vanish within noise
        assert!(rep.rhs.value.abs() < 4.0 * rep.rhs.std_error + 1e-2, "{rep:?}");
        let phi = TestFunction::sin_wave("sin_k1_e1", vec![1.0]);
        let rep0 = ibp_residual(nu, score, &phi, &[0.0], 2.0, 2_000);
        assert_eq!(rep0.lhs.value, 0.0);
        assert_eq!(rep0.rhs.value, 0.0);
    }

    #[test]
    fn lp_norm_matches_closed_forms() {
        let (nu, _, _) = ou_fixture();
        let c = lp_norm(nu, |_| -2.5, 3.0);
        assert!((c.value - 2.5).abs() < 1e-12);
        assert!(c.std_error < 1e-12);
        let sin2 = lp_norm(nu, |x| x[0].sin(), 2.0);
        let exact = 0.5621923864784002; // sqrt((1 - e^{-1})/2)
        assert!((sin2.value - exact).abs() < 4.0 * sin2.std_error + 2e-3, "{sin2:?}");
        let abs_sin = lp_norm(nu, |x| x[0].sin(), 1.0);
        let exact1 = 0.4789277167463798; // quadrature for N(0, 1/2)
        assert!((abs_sin.value - exact1).abs() < 4.0 * abs_sin.std_error + 2e-3, "{abs_sin:?}");
    }

    #[test]
    fn cp_ratio_reproduces_the_ou_entry_and_stays_stable() {
        let (nu, _, _) = ou_fixture();
        let battery = canonical_battery(1);
        let rep = estimate_cp(nu, &battery, &[vec![1.0]], 2.0);
        let sin_entry = rep.entries.iter().find(|e| e.label == "sin_k1_e1").unwrap();
        assert!((sin_entry.ratio - 1.3852922981576645).abs() < 0.05, "{}", sin_entry.ratio);
        assert!(rep.max_ratio.is_finite());
        // the sup over C^1_b is ||v||_2 = sqrt(2); the battery cannot exceed it by much
        assert!(rep.max_ratio < 1.5, "{}", rep.max_ratio);
        assert!(rep.stability_ratio <= 1.25, "{}", rep.stability_ratio);
    }

    #[test]
    fn cp_ratios_vanish_on_constants_and_are_scale_invariant() {
        let (nu, _, _) = ou_fixture();
        let consts = vec![TestFunction::constant(1.0), TestFunction::constant(-4.0)];
        let rep = estimate_cp(nu, &consts, &[vec![1.0]], 2.0);
        assert!(rep.entries.iter().all(|e| e.ratio == 0.0));
        assert_eq!(rep.stability_ratio, 1.0);
        // homogeneity: phi and 5 phi give the same ratio
        let phi = TestFunction::sin_wave("sin_k1_e1", vec![1.0]);
        let scaled = TestFunction::new(
            "scaled",
            5.0,
            std::sync::Arc::new(|x: &[f64]| 5.0 * x[0].sin()),
            std::sync::Arc::new(|x: &[f64]| vec![5.0 * x[0].cos()]),
            None,
        );
        let a = estimate_cp(nu, &[phi], &[vec![1.0]], 2.0).max_ratio;
        let b = estimate_cp(nu, &[scaled], &[vec![1.0]], 2.0).max_ratio;
        assert!((a - b).abs() < 1e-12 * a.max(1.0));
    }

    #[test]
    fn dstar_matches_the_gaussian_oracle_at_the_origin() {
        let (nu, score, _) = ou_fixture();
        let field = coordinate_field(
            nu.dim(),
            vec![TestFunction::tanh_ridge("tanh_e1", vec![1.0])],
        )
        .unwrap();
        // -sech^2(0) + v(0) tanh(0) = -1 exactly (second term vanishes)
        let val = dstar(score, &field, &[0.0]);
        assert!((val - (-1.0)).abs() < 1e-12);
        // zero field
        let zero = coordinate_field(1, vec![TestFunction::constant(0.0)]).unwrap();
        assert_eq!(dstar(score, &zero, &[0.7]), 0.0);
    }

    #[test]
    fn adjointness_holds_against_the_measure() {
        let (nu, score, _) = ou_fixture();
        let phi = TestFunction::sin_wave("sin_k1_e1", vec![1.0]);
        let field =
            coordinate_field(1, vec![TestFunction::tanh_ridge("tanh_e1", vec![1.0])]).unwrap();
        let resid = adjointness_residual(nu, score, &phi, &field, 8_000);
        assert!(
            resid.value.abs() < 4.0 * resid.std_error + 0.01,
            "residual {} (se {})",
            resid.value,
            resid.std_error
        );
    }

    #[test]
    fn generator_matches_the_plugin_oracle_and_annihilates_constants() {
        let (nu, score, score_wide) = ou_fixture();
        let phi = TestFunction::sin_wave("sin_k1_e1", vec![1.0]);
        let at_one = generalized_ou_apply(score_wide, &phi, &[1.0]).unwrap();
        let exact = -0.961037798272088; // -sin(1)/2 - cos(1) with v = 2x
        assert!((at_one - exact).abs() < 0.1 * exact.abs(), "{at_one} vs {exact}");
        let c = TestFunction::constant(9.0);
        assert_eq!(generalized_ou_apply(score, &c, &[0.4]).unwrap(), 0.0);
        // adjoint pairing annihilates constants: E[-1/2 D*D phi] ~ 0
        let one = TestFunction::constant(1.0);
        let resid = dirichlet_residual(nu, score, &phi, &one, 6_000).unwrap();
        assert!(resid.value.abs() < 4.0 * resid.std_error + 0.01, "{resid:?}");
    }

    #[test]
    fn dirichlet_form_residual_vanishes() {
        let (nu, score, _) = ou_fixture();
        let phi = TestFunction::sin_wave("sin_k1_e1", vec![1.0]);
        let psi = TestFunction::cos_wave("cos_k1_e1", vec![1.0]);
        let resid = dirichlet_residual(nu, score, &phi, &psi, 8_000).unwrap();
        assert!(
            resid.value.abs() < 4.0 * resid.std_error + 0.01,
            "residual {} (se {})",
            resid.value,
            resid.std_error
        );
    }

    #[test]
    fn generator_requires_a_hessian() {
        let (_, score, _) = ou_fixture();
        let no_hess = TestFunction::new(
            "linearish",
            1.0,
            std::sync::Arc::new(|x: &[f64]| x[0].tanh()),
            std::sync::Arc::new(|x: &[f64]| {
                let t = x[0].tanh();
                vec![1.0 - t * t]
            }),
            None,
        );
        assert!(generalized_ou_apply(score, &no_hess, &[0.0]).is_err());
    }

    #[test]
    fn score_ladder_is_monotone_and_anchored() {
        let (nu, _, score) = ou_fixture();
        let ladder = score_lp_ladder(nu, score, &[1.0], &[1.0, 2.0, 4.0, 8.0], 6_000);
        for w in ladder.windows(2) {
            assert!(w[1].1 >= w[0].1 - 1e-12, "ladder not monotone: {ladder:?}");
        }
        // ||2x||_{L^8} = 1680^{1/8} for N(0, 1/2)
        let p8 = ladder.last().unwrap().1;
        assert!((p8 - 2.530251320696693).abs() / 2.530251320696693 < 0.25, "p8 = {p8}");
    }

    #[test]
    fn score_centering_via_subsample() {
        let (nu, score, _) = ou_fixture();
        let m = score_mean(nu, score, &[1.0], 5_000);
        assert!(m.value.abs() < 4.0 * m.std_error + 0.02, "{m:?}");
    }

    #[test]
    fn score_l2_error_against_the_oracle_is_small() {
        let (nu, _, score_wide) = ou_fixture();
        let err = score_l2_error(nu, score_wide, &[1.0], |x| 2.0 * x[0], 5_000);
        // scales like n^{-1/6}; the 7% budget at n = 1e5 is an acceptance check
        assert!(err < 0.12, "relative L2 error {err}");
    }
}
