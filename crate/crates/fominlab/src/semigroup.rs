//! Monte Carlo estimators for the transition semigroup `P_t`, the
//! Feynman-Kac semigroup `S_t`, and their spatial derivatives.
//!
//! `P_t phi(x) = E[phi(X(t,x))]` and
//! `S_t phi(x) = E[phi(X(t,x)) exp(-int_0^t V(X(s,x)) ds)]` with the
//! certificate potential `V(x) = K(1 + |x|^{2N})`. The damping is what makes
//! a derivative formula possible under polynomially growing `b'`: the
//! directional derivative of `S_t` is the two-term expectation
//!
//! ```text
//! <D S_t phi(x), h> = (1/t) E[ phi(X(t)) e^{-beta(t)} int_0^t <eta^h, dW> ]
//!                   - E[ phi(X(t)) e^{-beta(t)}
//!                        int_0^t (1 - s/t) <V'(X(s)), eta^h(s)> ds ]
//! ```
//!
//! estimated here per path (the time integral rides inside the expectation,
//! the only reading that typechecks). Everything derivative-shaped is
//! cross-checked against central finite differences driven by common random
//! numbers: the plus and minus simulations replay the same stream, so the
//! pairing kills most of the variance and the O(delta^2) bias sits far below
//! the Monte Carlo noise at the default `delta = 1e-3 (1 + |x|)`.
//!
//! Identity checks (`check_voc_identity`, `check_commutation_identity`)
//! reuse one batch of trajectories across all quadrature nodes: by the
//! Markov property the continuation of a path past an interior node is an
//! unbiased sample of the inner semigroup value at that node, so both sides
//! of an identity reduce to per-path functionals whose paired difference
//! carries an honest standard error.

use serde::Serialize;

use crate::drift::DriftModel;
use crate::error::{Error, Result};
use crate::estimate::MCEstimate;
use crate::rng::{derive_seed, path_rng};
use crate::sde::{map_paths, run_path, step_model, steps_on_grid, SimConfig};
use crate::util::{dot, mat_vec, norm};

/// The two terms of the damped-semigroup derivative and their sum.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BelEstimate {
    /// (1/t) E[phi e^{-beta} int <eta, dW>]
    pub i1: MCEstimate,
    /// -E[phi e^{-beta} int (1 - s/t) <V'(X), eta> ds]
    pub i2: MCEstimate,
    /// i1 + i2, standard error from the per-path sums.
    pub total: MCEstimate,
}

/// Residual report for an identity checked at `sigma` standard errors plus
/// a discretization allowance.
#[derive(Debug, Clone, Serialize)]
pub struct IdentityReport {
    pub lhs: MCEstimate,
    pub rhs: MCEstimate,
    /// Paired per-path difference lhs - rhs.
    pub residual: MCEstimate,
    pub tolerance: f64,
    pub pass: bool,
}

fn ensure_no_divergence(flags: &[Option<usize>]) -> Result<()> {
    let count = flags.iter().filter(|f| f.is_some()).count();
    if count > 0 {
        let first_step = flags.iter().flatten().copied().min().unwrap();
        return Err(Error::DivergedPaths { count, total: flags.len(), first_step });
    }
    Ok(())
}

fn check_point(model: &DriftModel, x0: &[f64]) -> Result<()> {
    if x0.len() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), got: x0.len() });
    }
    Ok(())
}

/// `P_t phi(x)`: sample mean of `phi(X(t,x))`.
pub fn estimate_pt<F>(
    model: &DriftModel,
    phi: F,
    x0: &[f64],
    t: f64,
    config: &SimConfig,
) -> Result<MCEstimate>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    check_point(model, x0)?;
    let n_steps = steps_on_grid(t, config.dt)?;
    let stepper = step_model(model, config.scheme);
    let zero = vec![0.0; model.dim()];
    let rows = map_paths(config.seed, config.n_paths, |_, rng| {
        let mut val = 0.0;
        let flag = run_path(&stepper, model, x0, &zero, n_steps, config.dt, rng, &mut |p| {
            if p.index == n_steps {
                val = phi(p.state);
            }
        });
        (val, flag)
    });
    ensure_no_divergence(&rows.iter().map(|r| r.1).collect::<Vec<_>>())?;
    Ok(MCEstimate::from_samples(&rows.iter().map(|r| r.0).collect::<Vec<_>>()))
}

/// `S_t phi(x)`: sample mean of `phi(X(t,x)) exp(-beta(t))`.
pub fn estimate_st<F>(
    model: &DriftModel,
    phi: F,
    x0: &[f64],
    t: f64,
    config: &SimConfig,
) -> Result<MCEstimate>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    check_point(model, x0)?;
    let n_steps = steps_on_grid(t, config.dt)?;
    let stepper = step_model(model, config.scheme);
    let zero = vec![0.0; model.dim()];
    let rows = map_paths(config.seed, config.n_paths, |_, rng| {
        let mut val = 0.0;
        let flag = run_path(&stepper, model, x0, &zero, n_steps, config.dt, rng, &mut |p| {
            if p.index == n_steps {
                val = phi(p.state) * (-p.beta).exp();
            }
        });
        (val, flag)
    });
    ensure_no_divergence(&rows.iter().map(|r| r.1).collect::<Vec<_>>())?;
    Ok(MCEstimate::from_samples(&rows.iter().map(|r| r.0).collect::<Vec<_>>()))
}

/// `<D S_t phi(x), h>` by the damped-semigroup derivative formula.
pub fn estimate_dst_bel<F>(
    model: &DriftModel,
    phi: F,
    x0: &[f64],
    h: &[f64],
    t: f64,
    config: &SimConfig,
) -> Result<BelEstimate>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    check_point(model, x0)?;
    if norm(h) == 0.0 {
        return Err(Error::InvalidParameter("direction h must be nonzero".into()));
    }
    let n_steps = steps_on_grid(t, config.dt)?;
    let stepper = step_model(model, config.scheme);
    let d = model.dim();
    let rows = map_paths(config.seed, config.n_paths, |_, rng| {
        let mut vprime = vec![0.0; d];
        let mut quad = 0.0; // int_0^t (1 - s/t) <V'(X(s)), eta(s)> ds, left endpoint
        let mut weight = 0.0;
        let mut ito_t = 0.0;
        let mut phi_t = 0.0;
        let flag = run_path(&stepper, model, x0, h, n_steps, config.dt, rng, &mut |p| {
            if p.index < n_steps {
                model.potential_grad_into(p.state, &mut vprime);
                quad += (1.0 - p.time / t) * dot(&vprime, p.eta) * config.dt;
            } else {
                weight = (-p.beta).exp();
                ito_t = p.ito;
                phi_t = phi(p.state);
            }
        });
        (phi_t * weight * ito_t / t, -phi_t * weight * quad, flag)
    });
    ensure_no_divergence(&rows.iter().map(|r| r.2).collect::<Vec<_>>())?;
    let i1s: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let i2s: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let totals: Vec<f64> = rows.iter().map(|r| r.0 + r.1).collect();
    Ok(BelEstimate {
        i1: MCEstimate::from_samples(&i1s),
        i2: MCEstimate::from_samples(&i2s),
        total: MCEstimate::from_samples(&totals),
    })
}

/// Central finite difference of `P_t phi` along `h` with common random
/// numbers: `(P_t phi(x + delta h) - P_t phi(x - delta h)) / (2 delta)`,
/// paired per path.
pub fn estimate_dpt_fd<F>(
    model: &DriftModel,
    phi: F,
    x0: &[f64],
    h: &[f64],
    t: f64,
    config: &SimConfig,
    delta: f64,
) -> Result<MCEstimate>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fd_pair(model, phi, x0, h, t, config, delta, false)
}

/// Same finite-difference oracle for `S_t phi` (used to validate the
/// derivative formula estimator).
pub fn estimate_dst_fd<F>(
    model: &DriftModel,
    phi: F,
    x0: &[f64],
    h: &[f64],
    t: f64,
    config: &SimConfig,
    delta: f64,
) -> Result<MCEstimate>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fd_pair(model, phi, x0, h, t, config, delta, true)
}

#[allow(clippy::too_many_arguments)]
fn fd_pair<F>(
    model: &DriftModel,
    phi: F,
    x0: &[f64],
    h: &[f64],
    t: f64,
    config: &SimConfig,
    delta: f64,
    damped: bool,
) -> Result<MCEstimate>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    check_point(model, x0)?;
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter("delta must be > 0".into()));
    }
    let n_steps = steps_on_grid(t, config.dt)?;
    let stepper = step_model(model, config.scheme);
    let d = model.dim();
    let mut xp = x0.to_vec();
    let mut xm = x0.to_vec();
    for i in 0..d {
        xp[i] += delta * h[i];
        xm[i] -= delta * h[i];
    }
    let zero = vec![0.0; d];
    let rows = map_paths(config.seed, config.n_paths, |i, _| {
        let mut vals = [0.0; 2];
        let mut flags = [None, None];
        for (slot, start) in [&xp, &xm].into_iter().enumerate() {
            // replay the same stream for both sign shifts
            let mut rng = path_rng(config.seed, i);
            flags[slot] =
                run_path(&stepper, model, start, &zero, n_steps, config.dt, &mut rng, &mut |p| {
                    if p.index == n_steps {
                        vals[slot] =
                            phi(p.state) * if damped { (-p.beta).exp() } else { 1.0 };
                    }
                });
        }
        ((vals[0] - vals[1]) / (2.0 * delta), flags[0].or(flags[1]))
    });
    ensure_no_divergence(&rows.iter().map(|r| r.1).collect::<Vec<_>>())?;
    Ok(MCEstimate::from_samples(&rows.iter().map(|r| r.0).collect::<Vec<_>>()))
}

/// Quadrature nodes snapped to the step grid. Returns `(step_index, s)`
/// pairs with `s` ascending from 0 to t, plus trapezoid weights for the
/// possibly non-uniform snapped nodes.
fn snapped_nodes(n_steps: usize, dt: f64, n_quad: usize) -> (Vec<usize>, Vec<f64>, Vec<f64>) {
    let mut steps = Vec::with_capacity(n_quad + 1);
    let mut s_nodes = Vec::with_capacity(n_quad + 1);
    for j in 0..=n_quad {
        // outer step count at node j; s_j = t - k_j dt
        let k = ((n_steps as f64) * (n_quad - j) as f64 / n_quad as f64).round() as usize;
        if steps.last() == Some(&k) {
            continue; // degenerate snap on coarse grids
        }
        steps.push(k);
        s_nodes.push((n_steps - k) as f64 * dt);
    }
    let m = s_nodes.len();
    let mut w = vec![0.0; m];
    for j in 0..m {
        let lo = if j == 0 { s_nodes[0] } else { s_nodes[j - 1] };
        let hi = if j == m - 1 { s_nodes[m - 1] } else { s_nodes[j + 1] };
        w[j] = 0.5 * (hi - lo);
    }
    (steps, s_nodes, w)
}

/// Heuristic discretization allowance for the variation-of-constants check:
/// first-order stepping bias plus the trapezoid remainder, both scaled by
/// the potential at the start point.
pub fn suggested_voc_tol(model: &DriftModel, x0: &[f64], t: f64, dt: f64, n_quad: usize) -> f64 {
    let v0 = model.potential(x0);
    v0 * dt + 0.5 * (v0 * t / n_quad as f64).powi(2)
}

/// Check `P_t phi = S_t phi + int_0^t S_{t-s}(V P_s phi) ds` by Monte Carlo.
///
/// One batch of paths serves every node: conditioning at an interior time
/// turns the path's own continuation into the inner `P_s phi` sample, so the
/// integrand at node s collapses to
/// `e^{-beta(t-s)} V(X(t-s)) phi(X(t))` per path. The residual is the paired
/// per-path difference; pass iff `|residual| <= 4 SE + extra_tol`.
pub fn check_voc_identity<F>(
    model: &DriftModel,
    phi: F,
    x0: &[f64],
    t: f64,
    config: &SimConfig,
    n_quad: usize,
    extra_tol: f64,
) -> Result<IdentityReport>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    check_point(model, x0)?;
    if n_quad < 4 {
        return Err(Error::InvalidParameter("n_quad must be >= 4".into()));
    }
    let n_steps = steps_on_grid(t, config.dt)?;
    let stepper = step_model(model, config.scheme);
    let (node_steps, _s_nodes, weights) = snapped_nodes(n_steps, config.dt, n_quad);
    // node_steps is descending in outer step count; sort ascending for the visitor
    let mut order: Vec<usize> = (0..node_steps.len()).collect();
    order.sort_by_key(|&j| node_steps[j]);
    let zero = vec![0.0; model.dim()];

    let rows = map_paths(config.seed, config.n_paths, |_, rng| {
        let mut g = vec![0.0; node_steps.len()]; // e^{-beta(t-s_j)} V(X(t-s_j))
        let mut phi_t = 0.0;
        let mut w_t = 0.0;
        let mut cursor = 0usize;
        let flag = run_path(&stepper, model, x0, &zero, n_steps, config.dt, rng, &mut |p| {
            while cursor < order.len() && node_steps[order[cursor]] == p.index {
                g[order[cursor]] = (-p.beta).exp() * model.potential(p.state);
                cursor += 1;
            }
            if p.index == n_steps {
                phi_t = phi(p.state);
                w_t = (-p.beta).exp();
            }
        });
        let integral: f64 = weights.iter().zip(&g).map(|(w, gj)| w * gj).sum();
        let lhs = phi_t;
        let rhs = phi_t * w_t + phi_t * integral;
        (lhs, rhs, flag)
    });
    ensure_no_divergence(&rows.iter().map(|r| r.2).collect::<Vec<_>>())?;
    let lhs = MCEstimate::from_samples(&rows.iter().map(|r| r.0).collect::<Vec<_>>());
    let rhs = MCEstimate::from_samples(&rows.iter().map(|r| r.1).collect::<Vec<_>>());
    let residual = MCEstimate::from_samples(&rows.iter().map(|r| r.0 - r.1).collect::<Vec<_>>());
    let tolerance = 4.0 * residual.std_error + extra_tol;
    Ok(IdentityReport { lhs, rhs, residual, pass: residual.value.abs() <= tolerance, tolerance })
}

/// Knobs for the nested commutation check.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CommutationOptions {
    pub n_quad: usize,
    /// Inner common-random-number paths per (outer path, node).
    pub inner_paths: usize,
    /// Central-difference shift for the inner gradients.
    pub delta: f64,
    /// Discretization allowance added to the 4-sigma band.
    pub extra_tol: f64,
}

impl CommutationOptions {
    pub fn default_for(model: &DriftModel, x0: &[f64], t: f64, dt: f64) -> Self {
        let n_quad = 8;
        let jac = model.eval_jacobian(x0).unwrap_or_else(|_| vec![0.0]);
        let g0 = crate::util::operator_norm(&jac, model.dim()).max(1.0);
        Self {
            n_quad,
            inner_paths: 32,
            delta: 1e-3 * (1.0 + norm(x0)),
            extra_tol: g0 * (dt + 0.5 * (g0 * t / n_quad as f64).powi(2)),
        }
    }
}

/// Check the gradient-semigroup commutation identity
///
/// ```text
/// P_t<D phi, h> = <D P_t phi, h> - int_0^t P_{t-s}( <b' h, D P_s phi> ) ds
/// ```
///
/// `phi` must come with its analytic gradient. The left side is a plain
/// expectation, the middle term a common-random-number finite difference,
/// and the integrand couples the outer states at each node with nested inner
/// finite differences along `b'(y) h`. Inner streams are derived from
/// `(seed, outer index, node)` so every sample is reproducible and the outer
/// rows stay i.i.d., which makes the reported standard error honest for the
/// whole nested estimator.
#[allow(clippy::too_many_arguments)]
pub fn check_commutation_identity<F, G>(
    model: &DriftModel,
    phi: F,
    grad_phi: G,
    x0: &[f64],
    h: &[f64],
    t: f64,
    config: &SimConfig,
    opts: &CommutationOptions,
) -> Result<IdentityReport>
where
    F: Fn(&[f64]) -> f64 + Sync,
    G: Fn(&[f64]) -> Vec<f64> + Sync,
{
    check_point(model, x0)?;
    let n_steps = steps_on_grid(t, config.dt)?;
    let stepper = step_model(model, config.scheme);
    let d = model.dim();
    let (node_steps, _s, weights) = snapped_nodes(n_steps, config.dt, opts.n_quad);
    let mut order: Vec<usize> = (0..node_steps.len()).collect();
    order.sort_by_key(|&j| node_steps[j]);
    let zero = vec![0.0; d];
    let delta = opts.delta;

    let rows = map_paths(config.seed, config.n_paths, |i, rng| -> Result<(f64, f64)> {
        // center drive: node states + terminal <grad phi, h>
        let mut nodes = vec![vec![0.0; d]; node_steps.len()];
        let mut lhs_i = 0.0;
        let mut cursor = 0usize;
        let flag = run_path(&stepper, model, x0, &zero, n_steps, config.dt, rng, &mut |p| {
            while cursor < order.len() && node_steps[order[cursor]] == p.index {
                nodes[order[cursor]].copy_from_slice(p.state);
                cursor += 1;
            }
            if p.index == n_steps {
                lhs_i = dot(&grad_phi(p.state), h);
            }
        });
        if let Some(step) = flag {
            return Err(Error::DivergedPaths { count: 1, total: 1, first_step: step });
        }

        // middle term: CRN central difference of P_t phi along h
        let mut ends = [0.0; 2];
        for (slot, sign) in [1.0, -1.0].into_iter().enumerate() {
            let mut start = x0.to_vec();
            for (s, hi) in start.iter_mut().zip(h) {
                *s += sign * delta * hi;
            }
            let mut rng = path_rng(config.seed, i);
            let flag =
                run_path(&stepper, model, &start, &zero, n_steps, config.dt, &mut rng, &mut |p| {
                    if p.index == n_steps {
                        ends[slot] = phi(p.state);
                    }
                });
            if let Some(step) = flag {
                return Err(Error::DivergedPaths { count: 1, total: 1, first_step: step });
            }
        }
        let mid_i = (ends[0] - ends[1]) / (2.0 * delta);

        // integral term: inner directional derivatives along b'(y) h
        let mut integral_i = 0.0;
        let mut jac = vec![0.0; d * d];
        let mut dir = vec![0.0; d];
        for (j, y) in nodes.iter().enumerate() {
            model.jacobian_into(y, &mut jac);
            mat_vec(&jac, h, &mut dir);
            let inner_steps = n_steps - node_steps[j];
            let mut yp = y.clone();
            let mut ym = y.clone();
            for k in 0..d {
                yp[k] += delta * dir[k];
                ym[k] -= delta * dir[k];
            }
            let val = if inner_steps == 0 {
                (phi(&yp) - phi(&ym)) / (2.0 * delta)
            } else {
                let inner_seed = derive_seed(config.seed, &[0xC0117, i, j as u64]);
                let mut acc = 0.0;
                for l in 0..opts.inner_paths as u64 {
                    let mut pair = [0.0; 2];
                    for (slot, start) in [&yp, &ym].into_iter().enumerate() {
                        let mut rng = path_rng(inner_seed, l);
                        let flag = run_path(
                            &stepper,
                            model,
                            start,
                            &zero,
                            inner_steps,
                            config.dt,
                            &mut rng,
                            &mut |p| {
                                if p.index == inner_steps {
                                    pair[slot] = phi(p.state);
                                }
                            },
                        );
                        if let Some(step) = flag {
                            return Err(Error::DivergedPaths {
                                count: 1,
                                total: 1,
                                first_step: step,
                            });
                        }
                    }
                    acc += (pair[0] - pair[1]) / (2.0 * delta);
                }
                acc / opts.inner_paths as f64
            };
            integral_i += weights[j] * val;
        }

        // identity rearranged: residual = LHS - middle + integral
        Ok((lhs_i, mid_i - integral_i))
    });

    let mut lhs_samples = Vec::with_capacity(rows.len());
    let mut rhs_samples = Vec::with_capacity(rows.len());
    for r in rows {
        let (l, r) = r?;
        lhs_samples.push(l);
        rhs_samples.push(r);
    }
    let lhs = MCEstimate::from_samples(&lhs_samples);
    let rhs = MCEstimate::from_samples(&rhs_samples);
    let diffs: Vec<f64> =
        lhs_samples.iter().zip(&rhs_samples).map(|(l, r)| l - r).collect();
    let residual = MCEstimate::from_samples(&diffs);
    let tolerance = 4.0 * residual.std_error + opts.extra_tol;
    Ok(IdentityReport { lhs, rhs, residual, pass: residual.value.abs() <= tolerance, tolerance })
}

/// One point of the small-time scan.
#[derive(Debug, Clone, Serialize)]
pub struct SmallTPoint {
    pub t: f64,
    pub bel: BelEstimate,
    /// (1 + t^{-1/2}) (1 + |x|^{2N-1}) (P_t |phi|^p)^{1/p}
    pub envelope: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SmallTReport {
    pub points: Vec<SmallTPoint>,
    /// OLS slope of log|total| against log t over the resolvable points.
    pub slope: Option<f64>,
    /// false when the Monte Carlo noise drowns some derivative estimates.
    pub conclusive: bool,
    pub max_ratio: f64,
}

/// Scan the derivative magnitude across a decreasing time grid and fit the
/// small-time exponent. The envelope column checks the one-sided bound
/// `|D S_t phi| <= C (1 + t^{-1/2}) (1 + |x|^{2N-1}) (E|phi|^p)^{1/p}`:
/// its ratio must stay bounded, not match a particular law.
///
/// The slope regression only uses the grid points with `t <= 4 t_min`: away
/// from zero the damping `e^{-beta(t)}` bends the log-log curve downward at
/// a rate set by the potential, which says nothing about the t -> 0
/// exponent under scrutiny.
pub fn scan_small_t<F>(
    model: &DriftModel,
    phi: F,
    x0: &[f64],
    h: &[f64],
    t_grid: &[f64],
    config: &SimConfig,
    p: f64,
) -> Result<SmallTReport>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if t_grid.len() < 2 {
        return Err(Error::InvalidParameter("t_grid needs at least two times".into()));
    }
    let (min, max) = t_grid
        .iter()
        .fold((f64::INFINITY, 0.0_f64), |(lo, hi), &t| (lo.min(t), hi.max(t)));
    if max / min < 10.0 {
        return Err(Error::InvalidParameter("t_grid must span at least one decade".into()));
    }
    if min < 10.0 * config.dt {
        return Err(Error::InvalidParameter(format!(
            "smallest t = {min} under-resolved: need t >= 10 dt = {}",
            10.0 * config.dt
        )));
    }
    let two_n = model.params().growth_n;
    let x_factor = 1.0 + norm(x0).powi(2 * two_n as i32 - 1);
    let mut points = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let bel = estimate_dst_bel(model, &phi, x0, h, t, config)?;
        let pphi = estimate_pt(model, |x| phi(x).abs().powf(p), x0, t, config)?;
        let envelope = (1.0 + t.powf(-0.5)) * x_factor * pphi.value.powf(1.0 / p);
        let ratio = bel.total.value.abs() / envelope;
        points.push(SmallTPoint { t, bel, envelope, ratio });
    }
    let window: Vec<&SmallTPoint> = {
        let mut by_t: Vec<&SmallTPoint> = points.iter().collect();
        by_t.sort_by(|a, b| a.t.partial_cmp(&b.t).unwrap());
        let t_min = by_t[0].t;
        let mut w: Vec<&SmallTPoint> =
            by_t.iter().copied().filter(|pt| pt.t <= 4.0 * t_min).collect();
        if w.len() < 3 {
            w = by_t.into_iter().take(3).collect();
        }
        w
    };
    let resolved: Vec<&&SmallTPoint> = window
        .iter()
        .filter(|pt| pt.bel.total.value.abs() > 2.0 * pt.bel.total.std_error)
        .collect();
    let slope = if resolved.len() >= 2 {
        let xs: Vec<f64> = resolved.iter().map(|pt| pt.t.ln()).collect();
        let ys: Vec<f64> = resolved.iter().map(|pt| pt.bel.total.value.abs().ln()).collect();
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        let sxy: f64 =
            xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        Some(sxy / sxx)
    } else {
        None
    };
    let conclusive = resolved.len() == window.len() && slope.is_some();
    let max_ratio = points.iter().map(|pt| pt.ratio).fold(0.0, f64::max);
    Ok(SmallTReport { points, slope, conclusive, max_ratio })
}
