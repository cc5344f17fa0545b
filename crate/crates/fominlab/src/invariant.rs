//! Empirical approximations of the invariant measure.
//!
//! Two constructions with the same limit: the occupation average of the
//! transition laws over a long window (time-and-ensemble average including
//! burn-in, faithful to a (1/T) int_0^T construction), and plain ergodic
//! sampling after an explicit burn-in with thinning. Both agree on every
//! test battery within Monte Carlo noise; the moment and tail bounds from
//! the dissipativity certificate hold for either.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::drift::{DriftModel, HypothesisParams};
use crate::error::{Error, Result};
use crate::estimate::MCEstimate;
use crate::rng::derive_seed;
use crate::sde::{map_paths, run_path, step_model, SimConfig};
use crate::util::norm_sq;

/// How a measure was produced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    KrylovBogoliubov { t_final: f64 },
    LongRun { burn_in: f64, thin: f64 },
    /// Imported from CSV; construction unknown.
    External,
}

/// Weighted sample approximation of the invariant measure.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    dim: usize,
    /// Flat row-major samples: sample `i` is `samples[i*dim..(i+1)*dim]`.
    samples: Vec<f64>,
    weights: Vec<f64>,
    provenance: Provenance,
}

impl EmpiricalMeasure {
    /// Build from raw parts; weights are normalized to sum to one and must be
    /// nonnegative and not all zero.
    pub fn from_parts(
        dim: usize,
        samples: Vec<f64>,
        weights: Vec<f64>,
        provenance: Provenance,
    ) -> Result<Self> {
        if dim == 0 || samples.len() != weights.len() * dim || weights.is_empty() {
            return Err(Error::InvalidParameter("inconsistent measure shape".into()));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidParameter("weights must be nonnegative".into()));
        }
        let total = crate::util::neumaier_sum(weights.iter().copied());
        if !(total > 0.0) {
            return Err(Error::InvalidParameter("weights sum to zero".into()));
        }
        let weights = weights.into_iter().map(|w| w / total).collect::<Vec<_>>();
        debug_assert!(
            (crate::util::neumaier_sum(weights.iter().copied()) - 1.0).abs() < 1e-12
        );
        Ok(Self { dim, samples, weights, provenance })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_samples(&self) -> usize {
        self.weights.len()
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        &self.samples[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// |sum of weights - 1|, compensated summation (the normalization
    /// invariant holds to a few ulps even for millions of samples).
    pub fn normalization_gap(&self) -> f64 {
        (crate::util::neumaier_sum(self.weights.iter().copied()) - 1.0).abs()
    }

    /// Weighted mean of `f` with its standard error, computed in sample
    /// order (bit-stable across runs and worker counts).
    pub fn mean_of<F>(&self, f: F) -> MCEstimate
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let vals: Vec<f64> =
            (0..self.n_samples()).into_par_iter().map(|i| f(self.sample(i))).collect();
        MCEstimate::from_weighted(self.weights.iter().zip(vals.iter()).map(|(&w, &v)| (w, v)))
    }

    /// The radial moment `int |x|^{2m} d nu`.
    pub fn radial_moment(&self, m: u32) -> MCEstimate {
        self.mean_of(|x| norm_sq(x).powi(m as i32))
    }

    /// Deterministic evenly-spaced subsample indices capped at `cap`
    /// (0 means all). Used where an O(n) kernel evaluation per point makes
    /// touching all n samples quadratic.
    pub fn thinned_indices(&self, cap: usize) -> Vec<usize> {
        let n = self.n_samples();
        if cap == 0 || cap >= n {
            return (0..n).collect();
        }
        (0..cap).map(|k| k * n / cap).collect()
    }

    /// Export as CSV with the columns `weight, x_1..x_d`.
    pub fn write_csv<W: std::io::Write>(&self, w: &mut W) -> Result<()> {
        write!(w, "weight")?;
        for i in 1..=self.dim {
            write!(w, ",x_{i}")?;
        }
        writeln!(w)?;
        for i in 0..self.n_samples() {
            write!(w, "{}", self.weights[i])?;
            for v in self.sample(i) {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Import a measure written by [`write_csv`].
    pub fn read_csv<R: std::io::BufRead>(r: R) -> Result<Self> {
        let mut dim = 0usize;
        let mut samples = Vec::new();
        let mut weights = Vec::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if lineno == 0 {
                let cols: Vec<&str> = line.split(',').collect();
                if cols.first() != Some(&"weight") || cols.len() < 2 {
                    return Err(Error::CsvParse {
                        line: 1,
                        msg: "expected header 'weight,x_1,...'".into(),
                    });
                }
                dim = cols.len() - 1;
                continue;
            }
            let mut parts = line.split(',');
            let w: f64 = parts
                .next()
                .ok_or(Error::CsvParse { line: lineno + 1, msg: "missing weight".into() })?
                .parse()
                .map_err(|e| Error::CsvParse { line: lineno + 1, msg: format!("{e}") })?;
            weights.push(w);
            let mut count = 0;
            for p in parts {
                let v: f64 = p
                    .parse()
                    .map_err(|e| Error::CsvParse { line: lineno + 1, msg: format!("{e}") })?;
                samples.push(v);
                count += 1;
            }
            if count != dim {
                return Err(Error::CsvParse {
                    line: lineno + 1,
                    msg: format!("expected {dim} coordinates, got {count}"),
                });
            }
        }
        Self::from_parts(dim, samples, weights, Provenance::External)
    }
}

/// Occupation average over `[0, T]` across all paths: every visited grid
/// state enters with equal weight, burn-in included (that is the
/// time-average construction; use [`sample_long_run`] when you want
/// burn-in excluded). Recommended `T >= 10 / omega`; shorter horizons are
/// allowed and simply yield a transient occupation measure.
pub fn sample_krylov_bogoliubov(
    model: &DriftModel,
    x0: &[f64],
    t_horizon: f64,
    config: &SimConfig,
) -> Result<EmpiricalMeasure> {
    let cfg = SimConfig { t_final: t_horizon, ..*config };
    cfg.validate()?;
    let stepper = step_model(model, cfg.scheme);
    let n_steps = cfg.n_steps();
    let d = model.dim();
    let zero = vec![0.0; d];
    let rows = map_paths(cfg.seed, cfg.n_paths, |_, rng| {
        let mut states = Vec::with_capacity((n_steps + 1) * d);
        let flag = run_path(&stepper, model, x0, &zero, n_steps, cfg.dt, rng, &mut |p| {
            states.extend_from_slice(p.state);
        });
        (states, flag)
    });
    let diverged = rows.iter().filter(|r| r.1.is_some()).count();
    if diverged > 0 {
        let first_step = rows.iter().filter_map(|r| r.1).min().unwrap();
        return Err(Error::DivergedPaths { count: diverged, total: rows.len(), first_step });
    }
    let mut samples = Vec::with_capacity(cfg.n_paths * (n_steps + 1) * d);
    for (states, _) in rows {
        samples.extend_from_slice(&states);
    }
    let n = samples.len() / d;
    EmpiricalMeasure::from_parts(
        d,
        samples,
        vec![1.0; n],
        Provenance::KrylovBogoliubov { t_final: t_horizon },
    )
}

/// Ergodic sampling: after `burn_in`, record a state every `thin` along each
/// path, splitting `n_samples` across the batch. Recommended
/// `burn_in >= 5 / omega` and `thin` around a relaxation time; both are the
/// caller's responsibility (the sampler cannot see the mixing time).
pub fn sample_long_run(
    model: &DriftModel,
    x0: &[f64],
    burn_in: f64,
    n_samples: usize,
    thin: f64,
    config: &SimConfig,
) -> Result<EmpiricalMeasure> {
    if n_samples == 0 {
        return Err(Error::InvalidParameter("n_samples must be >= 1".into()));
    }
    if !(thin > 0.0) {
        return Err(Error::InvalidParameter("thin must be > 0".into()));
    }
    let thin_steps = (thin / config.dt).round().max(1.0) as usize;
    let burn_steps = (burn_in / config.dt).round() as usize;
    let n_paths = config.n_paths.min(n_samples);
    let base = n_samples / n_paths;
    let extra = n_samples % n_paths;
    let d = model.dim();
    let stepper = step_model(model, config.scheme);
    let zero = vec![0.0; d];
    let rows = map_paths(config.seed, n_paths, |i, rng| {
        let quota = base + usize::from((i as usize) < extra);
        let n_steps = burn_steps + quota * thin_steps;
        let mut states = Vec::with_capacity(quota * d);
        let flag = if quota == 0 {
            None
        } else {
            run_path(&stepper, model, x0, &zero, n_steps, config.dt, rng, &mut |p| {
                if p.index > burn_steps && (p.index - burn_steps).is_multiple_of(thin_steps) {
                    states.extend_from_slice(p.state);
                }
            })
        };
        (states, flag)
    });
    let diverged = rows.iter().filter(|r| r.1.is_some()).count();
    if diverged > 0 {
        let first_step = rows.iter().filter_map(|r| r.1).min().unwrap();
        return Err(Error::DivergedPaths { count: diverged, total: rows.len(), first_step });
    }
    let mut samples = Vec::with_capacity(n_samples * d);
    for (states, _) in rows {
        samples.extend_from_slice(&states);
    }
    debug_assert_eq!(samples.len(), n_samples * d);
    EmpiricalMeasure::from_parts(
        d,
        samples,
        vec![1.0; n_samples],
        Provenance::LongRun { burn_in, thin },
    )
}

/// Moment-bound constant `a_m` with `E|X(t,x)|^{2m} <= e^{-2 m omega t}|x|^{2m} + a_m`.
///
/// `m = 1` is the closed form `(2a + d)/omega`; higher orders follow the
/// steady-state recursion `A_m = (2a + 2m - 2 + d) / (2 omega) * A_{m-1}`
/// coming from the drift of `|X|^{2m}` under the dissipativity bound. Any
/// upper bound works downstream; this one is tight enough to be informative.
pub fn moment_bound_constant(params: &HypothesisParams, m: u32) -> f64 {
    assert!(m >= 1, "moment order must be >= 1");
    let d = params.dim as f64;
    let mut a = (2.0 * params.a + d) / params.omega;
    for k in 2..=m {
        a *= (2.0 * params.a + 2.0 * k as f64 - 2.0 + d) / (2.0 * params.omega);
    }
    a
}

/// One row of the moment report.
#[derive(Debug, Clone, Serialize)]
pub struct MomentRow {
    pub m: u32,
    pub empirical: MCEstimate,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct MomentReport {
    pub rows: Vec<MomentRow>,
    pub pass: bool,
}

/// Check `int |x|^{2m} d nu <= a_m` for `m = 1..m_max` at 4 sigma.
pub fn check_moments(
    measure: &EmpiricalMeasure,
    params: &HypothesisParams,
    m_max: u32,
) -> MomentReport {
    let rows: Vec<MomentRow> = (1..=m_max)
        .map(|m| {
            let empirical = measure.radial_moment(m);
            let bound = moment_bound_constant(params, m);
            let pass = empirical.value <= bound + 4.0 * empirical.std_error;
            MomentRow { m, empirical, bound, pass }
        })
        .collect();
    let pass = rows.iter().all(|r| r.pass);
    MomentReport { rows, pass }
}

#[derive(Debug, Clone, Serialize)]
pub struct TailReport {
    pub t: f64,
    pub radius: f64,
    /// Empirical P(|X(t,x0)| >= r) with binomial standard error.
    pub empirical: MCEstimate,
    /// Chebyshev-type bound (|x0|^2 + a_1) / r^2 from the moment constant.
    pub bound: f64,
    pub pass: bool,
}

/// Check the transition-law tail bound `P(|X(t,x0)| >= r) <= (|x0|^2 + a)/r^2`.
pub fn check_tail_bound(
    model: &DriftModel,
    x0: &[f64],
    t: f64,
    radius: f64,
    config: &SimConfig,
) -> Result<TailReport> {
    if !(radius > 0.0) {
        return Err(Error::InvalidParameter("radius must be > 0".into()));
    }
    let r2 = radius * radius;
    let indicator =
        crate::semigroup::estimate_pt(model, |x| f64::from(norm_sq(x) >= r2), x0, t, config)?;
    let bound = (norm_sq(x0) + moment_bound_constant(model.params(), 1)) / r2;
    let pass = indicator.value <= bound + 4.0 * indicator.std_error;
    Ok(TailReport { t, radius, empirical: indicator, bound, pass })
}

/// Paired invariance diagnostic for one observable.
#[derive(Debug, Clone, Serialize)]
pub struct InvarianceRow {
    pub label: String,
    /// mean of phi(Y_i(delta)) - phi(y_i) over the subsample.
    pub drift_gap: MCEstimate,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct InvarianceReport {
    pub delta_t: f64,
    pub rows: Vec<InvarianceRow>,
    pub pass: bool,
}

/// Operational invariance: propagating the measure by `delta_t` must not
/// move any battery mean. From each retained sample one inner path of
/// horizon `delta_t` is launched on its own derived stream; the paired
/// differences `phi(Y_i(delta)) - phi(y_i)` mean to zero under invariance.
pub fn check_invariance(
    measure: &EmpiricalMeasure,
    model: &DriftModel,
    battery: &[crate::testfn::TestFunction],
    delta_t: f64,
    config: &SimConfig,
    eval_cap: usize,
) -> Result<InvarianceReport> {
    let n_steps = (delta_t / config.dt).round().max(1.0) as usize;
    let stepper = step_model(model, config.scheme);
    let d = model.dim();
    let zero = vec![0.0; d];
    let idx = measure.thinned_indices(eval_cap);
    let endpoints: Vec<(Vec<f64>, Option<usize>)> = idx
        .par_iter()
        .map(|&i| {
            let start = measure.sample(i);
            let mut rng =
                crate::rng::path_rng(derive_seed(config.seed, &[0x1417, i as u64]), 0);
            let mut end = vec![0.0; d];
            let flag =
                run_path(&stepper, model, start, &zero, n_steps, config.dt, &mut rng, &mut |p| {
                    if p.index == n_steps {
                        end.copy_from_slice(p.state);
                    }
                });
            (end, flag)
        })
        .collect();
    let diverged = endpoints.iter().filter(|r| r.1.is_some()).count();
    if diverged > 0 {
        let first_step = endpoints.iter().filter_map(|r| r.1).min().unwrap();
        return Err(Error::DivergedPaths { count: diverged, total: endpoints.len(), first_step });
    }
    let rows: Vec<InvarianceRow> = battery
        .iter()
        .map(|phi| {
            let diffs: Vec<f64> = idx
                .iter()
                .zip(&endpoints)
                .map(|(&i, (end, _))| phi.eval(end) - phi.eval(measure.sample(i)))
                .collect();
            let drift_gap = MCEstimate::from_samples(&diffs);
            let pass = drift_gap.value.abs() <= 4.0 * drift_gap.std_error;
            InvarianceRow { label: phi.label.clone(), drift_gap, pass }
        })
        .collect();
    let pass = rows.iter().all(|r| r.pass);
    Ok(InvarianceReport { delta_t, rows, pass })
}
