//! Drift models with dissipativity/growth certificates.
//!
//! A model carries the drift `b`, its exact Jacobian `b'`, and the constants
//! `(omega, a, K, N)` certifying
//!
//! ```text
//! <b(x), x>  <= -omega |x|^2 + a            (dissipativity)
//! |b(x)| + ||b'(x)||  <=  K (1 + |x|^{2N})  (polynomial growth)
//! ```
//!
//! The certificate feeds everything downstream: the potential
//! `V(x) = K(1 + |x|^{2N})` damping the Feynman-Kac semigroup, the moment
//! constants of the invariant measure, and the taming transform used by the
//! default integration scheme. Certificates are checked numerically on a
//! grid, never symbolically.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::util::{all_finite, dot, norm, norm_sq, operator_norm};

/// Certificate constants for the dissipativity and growth bounds.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct HypothesisParams {
    /// Dissipativity rate omega > 0.
    pub omega: f64,
    /// Dissipativity offset a >= 0.
    pub a: f64,
    /// Growth constant K > 0.
    pub growth_k: f64,
    /// Growth exponent N >= 1 (the bound is K(1 + |x|^{2N})).
    pub growth_n: u32,
    /// State dimension d >= 1.
    pub dim: usize,
}

impl HypothesisParams {
    pub fn new(omega: f64, a: f64, growth_k: f64, growth_n: u32, dim: usize) -> Result<Self> {
        if !(omega > 0.0) {
            return Err(Error::InvalidParameter(format!("omega must be > 0, got {omega}")));
        }
        if !(a >= 0.0) {
            return Err(Error::InvalidParameter(format!("a must be >= 0, got {a}")));
        }
        if !(growth_k > 0.0) {
            return Err(Error::InvalidParameter(format!("K must be > 0, got {growth_k}")));
        }
        if growth_n < 1 {
            return Err(Error::InvalidParameter("N must be >= 1".into()));
        }
        if dim < 1 {
            return Err(Error::InvalidParameter("dim must be >= 1".into()));
        }
        Ok(Self { omega, a, growth_k, growth_n, dim })
    }
}

/// Analytic description of the stationary law, available for built-in models.
#[derive(Clone)]
pub enum StationaryOracle {
    /// nu = N(0, variance * I).
    GaussianIsotropic { variance: f64 },
    /// One-dimensional unnormalized log-density, integrable by quadrature.
    LogDensity1d(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for StationaryOracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::GaussianIsotropic { variance } => {
                write!(f, "GaussianIsotropic {{ variance: {variance} }}")
            }
            Self::LogDensity1d(_) => write!(f, "LogDensity1d(..)"),
        }
    }
}

type VectorFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

/// A drift together with its Jacobian and certificate.
///
/// Immutable after construction; cheap to clone and safe to share across
/// workers. Jacobians are supplied analytically (the variational flow and the
/// growth check both need the true `b'`, not a finite-difference stand-in).
#[derive(Clone)]
pub struct DriftModel {
    name: String,
    params: HypothesisParams,
    drift: Arc<VectorFn>,
    jacobian: Arc<VectorFn>,
    oracle: Option<StationaryOracle>,
}

impl fmt::Debug for DriftModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DriftModel")
            .field("name", &self.name)
            .field("params", &self.params)
            .field("oracle", &self.oracle)
            .finish()
    }
}

impl DriftModel {
    /// Register a user model. `drift` and `jacobian` (row-major d x d) must be
    /// total on R^d for finite inputs.
    pub fn new(
        name: impl Into<String>,
        params: HypothesisParams,
        drift: Arc<VectorFn>,
        jacobian: Arc<VectorFn>,
        oracle: Option<StationaryOracle>,
    ) -> Self {
        Self { name: name.into(), params, drift, jacobian, oracle }
    }

    /// Ornstein-Uhlenbeck: b(x) = -x. Stationary law N(0, I/2).
    pub fn ou(dim: usize) -> Self {
        let params = HypothesisParams::new(1.0, 0.0, 2.0, 1, dim).unwrap();
        Self {
            name: "ou".into(),
            params,
            drift: Arc::new(|x, out| {
                for (o, xi) in out.iter_mut().zip(x) {
                    *o = -xi;
                }
            }),
            jacobian: Arc::new(|x, out| {
                let d = x.len();
                out.fill(0.0);
                for i in 0..d {
                    out[i * d + i] = -1.0;
                }
            }),
            oracle: Some(StationaryOracle::GaussianIsotropic { variance: 0.5 }),
        }
    }

    /// Bistable double well in d = 1: b(x) = x - x^3.
    /// Stationary density proportional to exp(x^2 - x^4/2).
    pub fn double_well() -> Self {
        let params = HypothesisParams::new(1.0, 1.0, 4.0, 2, 1).unwrap();
        Self {
            name: "double_well".into(),
            params,
            drift: Arc::new(|x, out| out[0] = x[0] - x[0] * x[0] * x[0]),
            jacobian: Arc::new(|x, out| out[0] = 1.0 - 3.0 * x[0] * x[0]),
            oracle: Some(StationaryOracle::LogDensity1d(Arc::new(|x| {
                x * x - 0.5 * x * x * x * x
            }))),
        }
    }

    /// Non-gradient linear model in d = 2: b(x) = (-I + J) x with J the
    /// quarter-turn rotation. Stationary law N(0, I/2) (Lyapunov equation).
    pub fn rotated() -> Self {
        let params = HypothesisParams::new(1.0, 0.0, 3.0, 1, 2).unwrap();
        Self {
            name: "rotated".into(),
            params,
            drift: Arc::new(|x, out| {
                out[0] = -x[0] - x[1];
                out[1] = x[0] - x[1];
            }),
            jacobian: Arc::new(|_, out| out.copy_from_slice(&[-1.0, -1.0, 1.0, -1.0])),
            oracle: Some(StationaryOracle::GaussianIsotropic { variance: 0.5 }),
        }
    }

    /// Built-in model lookup used by the experiment front end.
    /// `dim` only applies to the OU family; the others have fixed dimension.
    pub fn by_name(name: &str, dim: Option<usize>) -> Result<Self> {
        match name {
            "ou" => Ok(Self::ou(dim.unwrap_or(1))),
            "double_well" => Ok(Self::double_well()),
            "rotated" => Ok(Self::rotated()),
            other => Err(Error::InvalidParameter(format!(
                "unknown model '{other}' (built-ins: ou, double_well, rotated)"
            ))),
        }
    }

    /// Replace the certificate, e.g. to probe a deliberately wrong claim.
    pub fn with_params(mut self, params: HypothesisParams) -> Result<Self> {
        if params.dim != self.params.dim {
            return Err(Error::DimensionMismatch { expected: self.params.dim, got: params.dim });
        }
        self.params = params;
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn params(&self) -> &HypothesisParams {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.params.dim
    }

    pub fn oracle(&self) -> Option<&StationaryOracle> {
        self.oracle.as_ref()
    }

    /// b(x) without allocation or finiteness checks (hot path).
    #[inline]
    pub fn drift_into(&self, x: &[f64], out: &mut [f64]) {
        (self.drift)(x, out);
    }

    /// b'(x), row-major, without checks (hot path).
    #[inline]
    pub fn jacobian_into(&self, x: &[f64], out: &mut [f64]) {
        (self.jacobian)(x, out);
    }

    /// b(x), checked.
    pub fn eval_drift(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let mut out = vec![0.0; self.dim()];
        (self.drift)(x, &mut out);
        if !all_finite(&out) {
            return Err(Error::ModelEvaluation {
                model: self.name.clone(),
                context: format!("drift at {x:?}"),
            });
        }
        Ok(out)
    }

    /// b'(x) row-major, checked.
    pub fn eval_jacobian(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let d = self.dim();
        let mut out = vec![0.0; d * d];
        (self.jacobian)(x, &mut out);
        if !all_finite(&out) {
            return Err(Error::ModelEvaluation {
                model: self.name.clone(),
                context: format!("jacobian at {x:?}"),
            });
        }
        Ok(out)
    }

    /// V(x) = K (1 + |x|^{2N}).
    #[inline]
    pub fn potential(&self, x: &[f64]) -> f64 {
        let p = &self.params;
        p.growth_k * (1.0 + norm_sq(x).powi(p.growth_n as i32))
    }

    /// V'(x) = 2 N K |x|^{2N-2} x, written into `out`.
    #[inline]
    pub fn potential_grad_into(&self, x: &[f64], out: &mut [f64]) {
        let p = &self.params;
        let scale = 2.0 * p.growth_n as f64 * p.growth_k * norm_sq(x).powi(p.growth_n as i32 - 1);
        for (o, xi) in out.iter_mut().zip(x) {
            *o = scale * xi;
        }
    }

    pub fn potential_grad(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.potential_grad_into(x, &mut out);
        out
    }

    /// Taming transform: replaces b by
    ///
    /// ```text
    /// f_n(x) = (b(x) + omega x) / (1 + |x|^{2N+2} / n)  -  omega x
    /// ```
    ///
    /// which keeps the dissipativity bound exactly and is sub-linear at
    /// infinity, so explicit stepping cannot blow up under super-linear
    /// drifts. `f_n -> b` pointwise as n grows. The Jacobian of `f_n` is
    /// propagated analytically; certificate and name are inherited, the
    /// stationary oracle is dropped (taming perturbs the invariant law).
    pub fn tamed(&self, n: u32) -> Self {
        assert!(n >= 1, "taming index must be >= 1");
        let omega = self.params.omega;
        let exponent = self.params.growth_n as i32 + 1; // |x|^{2N+2} = (|x|^2)^{N+1}
        let inv_n = 1.0 / n as f64;
        let base_drift = Arc::clone(&self.drift);
        let base_jac = Arc::clone(&self.jacobian);
        let dim = self.dim();

        let drift_n = {
            let base_drift = Arc::clone(&base_drift);
            Arc::new(move |x: &[f64], out: &mut [f64]| {
                base_drift(x, out);
                let denom = 1.0 + inv_n * norm_sq(x).powi(exponent);
                for (o, xi) in out.iter_mut().zip(x) {
                    *o = (*o + omega * xi) / denom - omega * xi;
                }
            })
        };
        let jac_n = Arc::new(move |x: &[f64], out: &mut [f64]| {
            base_jac(x, out);
            let d = x.len();
            let q = norm_sq(x);
            let denom = 1.0 + inv_n * q.powi(exponent);
            // grad of the denominator: (2N+2)/n * |x|^{2N} x
            let dscale = inv_n * 2.0 * exponent as f64 * q.powi(exponent - 1);
            let mut g = vec![0.0; d];
            base_drift(x, &mut g);
            for (gi, xi) in g.iter_mut().zip(x) {
                *gi += omega * xi;
            }
            for i in 0..d {
                for j in 0..d {
                    let bij = out[i * d + j] + if i == j { omega } else { 0.0 };
                    out[i * d + j] = bij / denom - g[i] * dscale * x[j] / (denom * denom)
                        - if i == j { omega } else { 0.0 };
                }
            }
        });

        Self {
            name: format!("{}_tamed_n{}", self.name, n),
            params: self.params,
            drift: drift_n,
            jacobian: jac_n,
            oracle: None,
        }
        .assert_dim(dim)
    }

    fn assert_dim(self, dim: usize) -> Self {
        debug_assert_eq!(self.dim(), dim);
        self
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        Ok(())
    }
}

/// Worst-case slack of one certificate inequality over a grid.
/// Slack is `bound - actual`; the inequality holds where slack >= 0.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SlackReport {
    pub worst_slack: f64,
    pub worst_point: Vec<f64>,
}

/// Grid report for both certificate inequalities.
#[derive(Debug, Clone, serde::Serialize)]
pub struct HypothesisReport {
    pub dissipativity: SlackReport,
    pub growth: SlackReport,
    pub tol: f64,
    pub pass: bool,
}

/// Check the certificate on a finite grid: for each point the dissipativity
/// slack `(-omega |x|^2 + a) - <b(x), x>` and the growth slack
/// `K(1 + |x|^{2N}) - (|b(x)| + ||b'(x)||)`. Passes iff both worst slacks are
/// >= -tol. A report is always produced; it never errors.
pub fn check_hypothesis(model: &DriftModel, grid: &[Vec<f64>], tol: f64) -> HypothesisReport {
    assert!(!grid.is_empty(), "grid must be nonempty");
    let p = *model.params();
    let d = model.dim();
    let mut b = vec![0.0; d];
    let mut jac = vec![0.0; d * d];
    let mut diss = SlackReport { worst_slack: f64::INFINITY, worst_point: vec![] };
    let mut grow = SlackReport { worst_slack: f64::INFINITY, worst_point: vec![] };
    for x in grid {
        model.drift_into(x, &mut b);
        model.jacobian_into(x, &mut jac);
        let s1 = (-p.omega * norm_sq(x) + p.a) - dot(&b, x);
        if s1 < diss.worst_slack {
            diss.worst_slack = s1;
            diss.worst_point = x.clone();
        }
        let s2 = model.potential(x) - (norm(&b) + operator_norm(&jac, d));
        if s2 < grow.worst_slack {
            grow.worst_slack = s2;
            grow.worst_point = x.clone();
        }
    }
    let pass = diss.worst_slack >= -tol && grow.worst_slack >= -tol;
    HypothesisReport { dissipativity: diss, growth: grow, tol, pass }
}

/// Default certificate grid: radial shells out to `radius`, about `n_points`
/// points total. d = 1 degenerates to a uniform grid on [-radius, radius].
pub fn default_grid(dim: usize, radius: f64, n_points: usize) -> Vec<Vec<f64>> {
    assert!(dim >= 1 && radius > 0.0 && n_points >= 2);
    match dim {
        1 => {
            let n = n_points.max(2);
            (0..n)
                .map(|i| vec![-radius + 2.0 * radius * i as f64 / (n - 1) as f64])
                .collect()
        }
        2 => {
            let shells = (n_points as f64).sqrt().ceil() as usize;
            let per_shell = n_points.div_ceil(shells);
            let mut grid = Vec::with_capacity(shells * per_shell + 1);
            grid.push(vec![0.0, 0.0]);
            for s in 1..=shells {
                let r = radius * s as f64 / shells as f64;
                for k in 0..per_shell {
                    let th = std::f64::consts::TAU * k as f64 / per_shell as f64;
                    grid.push(vec![r * th.cos(), r * th.sin()]);
                }
            }
            grid
        }
        _ => {
            // Radial shells with a deterministic low-discrepancy direction set.
            let shells = (n_points as f64).powf(1.0 / dim as f64).ceil() as usize;
            let per_shell = n_points.div_ceil(shells);
            let mut grid = Vec::with_capacity(shells * per_shell + 1);
            grid.push(vec![0.0; dim]);
            let mut rng = crate::rng::path_rng(0x9d1f_a2c4, 0);
            for s in 1..=shells {
                let r = radius * s as f64 / shells as f64;
                for _ in 0..per_shell {
                    let mut v: Vec<f64> = (0..dim).map(|_| crate::rng::draw_normal(&mut rng)).collect();
                    let nv = norm(&v);
                    if nv == 0.0 {
                        continue;
                    }
                    for vi in v.iter_mut() {
                        *vi *= r / nv;
                    }
                    grid.push(v);
                }
            }
            grid
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_jacobian(model: &DriftModel, x: &[f64], delta: f64) -> Vec<f64> {
        let d = model.dim();
        let mut out = vec![0.0; d * d];
        for j in 0..d {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[j] += delta;
            xm[j] -= delta;
            let fp = model.eval_drift(&xp).unwrap();
            let fm = model.eval_drift(&xm).unwrap();
            for i in 0..d {
                out[i * d + j] = (fp[i] - fm[i]) / (2.0 * delta);
            }
        }
        out
    }

    #[test]
    fn drift_values_match_hand_computation() {
        let ou = DriftModel::ou(1);
        assert_eq!(ou.eval_drift(&[1.5]).unwrap(), vec![-1.5]);
        let dw = DriftModel::double_well();
        assert_eq!(dw.eval_drift(&[2.0]).unwrap(), vec![-6.0]);
        let rot = DriftModel::rotated();
        assert_eq!(rot.eval_drift(&[1.0, 0.0]).unwrap(), vec![-1.0, 1.0]);
    }

    #[test]
    fn jacobian_values_match_hand_computation() {
        let ou = DriftModel::ou(1);
        assert_eq!(ou.eval_jacobian(&[3.7]).unwrap(), vec![-1.0]);
        let dw = DriftModel::double_well();
        assert_eq!(dw.eval_jacobian(&[1.0]).unwrap(), vec![-2.0]);
        let rot = DriftModel::rotated();
        assert_eq!(rot.eval_jacobian(&[8.0, -3.0]).unwrap(), vec![-1.0, -1.0, 1.0, -1.0]);
    }

    #[test]
    fn jacobians_match_finite_differences() {
        for model in [DriftModel::ou(1), DriftModel::double_well(), DriftModel::rotated()] {
            let d = model.dim();
            for x in default_grid(d, 3.0, 60) {
                let exact = model.eval_jacobian(&x).unwrap();
                let fd = fd_jacobian(&model, &x, 1e-4);
                for (e, f) in exact.iter().zip(&fd) {
                    let scale = e.abs().max(1.0);
                    assert!((e - f).abs() / scale < 1e-6, "{} at {x:?}: {e} vs {f}", model.name());
                }
            }
        }
    }

    #[test]
    fn tamed_jacobian_matches_finite_differences() {
        let tamed = DriftModel::double_well().tamed(3);
        for x in default_grid(1, 4.0, 41) {
            let exact = tamed.eval_jacobian(&x).unwrap();
            let fd = fd_jacobian(&tamed, &x, 1e-4);
            let scale = exact[0].abs().max(1.0);
            assert!((exact[0] - fd[0]).abs() / scale < 1e-6, "at {x:?}");
        }
    }

    #[test]
    fn builtin_certificates_pass_on_default_grid() {
        for model in [DriftModel::ou(1), DriftModel::ou(3), DriftModel::double_well(), DriftModel::rotated()] {
            let grid = default_grid(model.dim(), 10.0, 10_000);
            let report = check_hypothesis(&model, &grid, 1e-9);
            assert!(report.pass, "{}: {report:?}", model.name());
            // slack is >= 0 up to dot-product rounding at |x| = 10
            assert!(report.dissipativity.worst_slack >= -1e-9);
            assert!(report.growth.worst_slack >= -1e-9);
        }
    }

    #[test]
    fn ou_dissipativity_slack_is_exactly_zero() {
        let grid = default_grid(1, 10.0, 1001);
        let report = check_hypothesis(&DriftModel::ou(1), &grid, 1e-12);
        assert!(report.pass);
        assert!(report.dissipativity.worst_slack.abs() < 1e-12);
    }

    #[test]
    fn double_well_dissipativity_slack_vanishes_at_unit_radius() {
        // slack(x) = a - 2x^2 + x^4 with a = 1 is minimized (= 0) at |x| = 1.
        let grid: Vec<Vec<f64>> = (0..=1000).map(|i| vec![-5.0 + 0.01 * i as f64]).collect();
        let report = check_hypothesis(&DriftModel::double_well(), &grid, 1e-9);
        assert!(report.pass);
        assert!(report.dissipativity.worst_slack.abs() < 1e-9);
        assert!((report.dissipativity.worst_point[0].abs() - 1.0).abs() < 0.011);
    }

    #[test]
    fn understated_growth_constant_fails() {
        let bogus = HypothesisParams::new(1.0, 0.0, 1.0, 1, 1).unwrap();
        let model = DriftModel::ou(1).with_params(bogus).unwrap();
        let report = check_hypothesis(&model, &[vec![0.5]], 1e-9);
        // |b| + ||b'|| = 1.5 > K(1 + x^2) = 1.25 at x = 0.5
        assert!(!report.pass);
        assert!((report.growth.worst_slack - (-0.25)).abs() < 1e-12);
    }

    #[test]
    fn potential_values() {
        let ou = DriftModel::ou(1);
        assert_eq!(ou.potential(&[0.0]), 2.0);
        assert_eq!(ou.potential(&[3.0]), 20.0);
        let dw = DriftModel::double_well();
        assert_eq!(dw.potential(&[0.0]), dw.params().growth_k);
    }

    #[test]
    fn potential_grad_matches_finite_differences() {
        for model in [DriftModel::ou(2), DriftModel::double_well()] {
            let d = model.dim();
            for x in default_grid(d, 2.0, 25) {
                let g = model.potential_grad(&x);
                for j in 0..d {
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[j] += 1e-5;
                    xm[j] -= 1e-5;
                    let fd = (model.potential(&xp) - model.potential(&xm)) / 2e-5;
                    assert!((g[j] - fd).abs() < 1e-5 * (1.0 + fd.abs()), "{:?}", model.name());
                }
            }
        }
    }

    #[test]
    fn taming_is_identity_for_ou() {
        let ou = DriftModel::ou(1);
        for n in [1, 5, 1000] {
            let tamed = ou.tamed(n);
            for x in [-4.0, -0.3, 0.0, 2.0, 9.5] {
                let b = ou.eval_drift(&[x]).unwrap()[0];
                let f = tamed.eval_drift(&[x]).unwrap()[0];
                assert!((b - f).abs() < 1e-14, "x = {x}");
            }
        }
    }

    #[test]
    fn taming_matches_direct_evaluation_on_double_well() {
        // N = 2 so the damping exponent 2N+2 = 6:
        // f_1(2) = (b(2) + 2) / (1 + 2^6) - 2 = -4/65 - 2
        let tamed = DriftModel::double_well().tamed(1);
        let got = tamed.eval_drift(&[2.0]).unwrap()[0];
        assert!((got - (-4.0 / 65.0 - 2.0)).abs() < 1e-14, "got {got}");
    }

    #[test]
    fn taming_with_unit_growth_exponent_matches_direct_evaluation() {
        // A user model claiming N = 1 uses the exponent 2N+2 = 4:
        // f_1(2) = -4/(1 + 2^4) - 2 = -4/17 - 2.
        let params = HypothesisParams::new(1.0, 1.0, 4.0, 1, 1).unwrap();
        let model = DriftModel::new(
            "cubic_n1",
            params,
            Arc::new(|x, out| out[0] = x[0] - x[0] * x[0] * x[0]),
            Arc::new(|x, out| out[0] = 1.0 - 3.0 * x[0] * x[0]),
            None,
        );
        let got = model.tamed(1).eval_drift(&[2.0]).unwrap()[0];
        assert!((got - (-4.0 / 17.0 - 2.0)).abs() < 1e-14, "got {got}");
    }

    #[test]
    fn taming_fixes_origin() {
        for model in [DriftModel::double_well(), DriftModel::rotated()] {
            let x0 = vec![0.0; model.dim()];
            let b0 = model.eval_drift(&x0).unwrap();
            let f0 = model.tamed(1).eval_drift(&x0).unwrap();
            assert_eq!(b0, f0);
        }
    }

    #[test]
    fn taming_preserves_dissipativity_and_converges_monotonically() {
        let model = DriftModel::double_well();
        let p = *model.params();
        let grid = default_grid(1, 6.0, 301);
        let mut prev_err: Option<Vec<f64>> = None;
        for n in [1, 2, 4, 8, 16, 32] {
            let tamed = model.tamed(n);
            let mut errs = Vec::with_capacity(grid.len());
            for x in &grid {
                let f = tamed.eval_drift(x).unwrap();
                let slack = (-p.omega * norm_sq(x) + p.a) - dot(&f, x);
                assert!(slack >= -1e-12, "dissipativity lost at {x:?}, n = {n}");
                let b = model.eval_drift(x).unwrap();
                // |f_n - b| = |b + omega x| (1 - 1/D) <= |b + omega x| |x|^{2N+2} / n
                let bound =
                    (b[0] + p.omega * x[0]).abs() * norm_sq(x).powi(p.growth_n as i32 + 1)
                        / n as f64;
                errs.push((f[0] - b[0]).abs());
                assert!(errs.last().unwrap() <= &(bound + 1e-12), "taming error above O(1/n)");
            }
            if let Some(prev) = prev_err {
                for (now, before) in errs.iter().zip(&prev) {
                    assert!(*now <= before + 1e-12, "taming error grew with n");
                }
            }
            prev_err = Some(errs);
        }
        // and the error actually goes to zero pointwise
        let tamed = model.tamed(1u32 << 31);
        for x in &grid {
            let f = tamed.eval_drift(x).unwrap()[0];
            let b = model.eval_drift(x).unwrap()[0];
            assert!((f - b).abs() < 1e-2 * (1.0 + b.abs()), "slow convergence at {x:?}");
        }
    }

    #[test]
    fn invalid_params_are_rejected() {
        assert!(HypothesisParams::new(0.0, 0.0, 1.0, 1, 1).is_err());
        assert!(HypothesisParams::new(1.0, -0.1, 1.0, 1, 1).is_err());
        assert!(HypothesisParams::new(1.0, 0.0, 0.0, 1, 1).is_err());
        assert!(HypothesisParams::new(1.0, 0.0, 1.0, 0, 1).is_err());
        assert!(HypothesisParams::new(1.0, 0.0, 1.0, 1, 0).is_err());
    }

    #[test]
    fn unknown_model_name_is_an_error() {
        assert!(DriftModel::by_name("brownian_pet_rock", None).is_err());
    }
}
