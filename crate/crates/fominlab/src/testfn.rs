//! Bounded test functions with analytic derivatives.
//!
//! The canonical battery mixes trigonometric waves at several frequencies,
//! a tanh ridge, and Gaussian bumps: all C^2 with bounded derivatives, rich
//! enough to stress the gradient integral inequality without leaving the
//! bounded class it is stated for.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::util::{dot, norm_sq};

type ScalarFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type GradFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;

/// A test observable `phi` with analytic gradient and optional hessian
/// (row-major), plus its sup norm.
#[derive(Clone)]
pub struct TestFunction {
    pub label: String,
    pub sup_norm: f64,
    phi: Arc<ScalarFn>,
    grad: Arc<GradFn>,
    hessian: Option<Arc<GradFn>>,
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TestFunction({})", self.label)
    }
}

impl TestFunction {
    pub fn new(
        label: impl Into<String>,
        sup_norm: f64,
        phi: Arc<ScalarFn>,
        grad: Arc<GradFn>,
        hessian: Option<Arc<GradFn>>,
    ) -> Self {
        Self { label: label.into(), sup_norm, phi, grad, hessian }
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.phi)(x)
    }

    #[inline]
    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        (self.grad)(x)
    }

    pub fn has_hessian(&self) -> bool {
        self.hessian.is_some()
    }

    /// Row-major hessian, if supplied.
    pub fn hessian(&self, x: &[f64]) -> Result<Vec<f64>> {
        match &self.hessian {
            Some(h) => Ok(h(x)),
            None => Err(Error::MissingHessian(self.label.clone())),
        }
    }

    /// Borrow the underlying closures for estimator plumbing.
    pub fn phi_fn(&self) -> impl Fn(&[f64]) -> f64 + Sync + '_ {
        move |x: &[f64]| (self.phi)(x)
    }

    pub fn grad_fn(&self) -> impl Fn(&[f64]) -> Vec<f64> + Sync + '_ {
        move |x: &[f64]| (self.grad)(x)
    }

    /// phi = c.
    pub fn constant(c: f64) -> Self {
        Self::new(
            format!("const_{c}"),
            c.abs(),
            Arc::new(move |_| c),
            Arc::new(|x| vec![0.0; x.len()]),
            Some(Arc::new(|x| vec![0.0; x.len() * x.len()])),
        )
    }

    /// phi = sin<k, x>.
    pub fn sin_wave(label: impl Into<String>, k: Vec<f64>) -> Self {
        let kg = k.clone();
        let kh = k.clone();
        Self::new(
            label,
            1.0,
            Arc::new(move |x| dot(&k, x).sin()),
            Arc::new(move |x| {
                let c = dot(&kg, x).cos();
                kg.iter().map(|ki| ki * c).collect()
            }),
            Some(Arc::new(move |x| {
                let s = -dot(&kh, x).sin();
                outer_scaled(&kh, s)
            })),
        )
    }

    /// phi = cos<k, x>.
    pub fn cos_wave(label: impl Into<String>, k: Vec<f64>) -> Self {
        let kg = k.clone();
        let kh = k.clone();
        Self::new(
            label,
            1.0,
            Arc::new(move |x| dot(&k, x).cos()),
            Arc::new(move |x| {
                let s = -dot(&kg, x).sin();
                kg.iter().map(|ki| ki * s).collect()
            }),
            Some(Arc::new(move |x| {
                let c = -dot(&kh, x).cos();
                outer_scaled(&kh, c)
            })),
        )
    }

    /// phi = tanh<u, x>.
    pub fn tanh_ridge(label: impl Into<String>, u: Vec<f64>) -> Self {
        let ug = u.clone();
        let uh = u.clone();
        Self::new(
            label,
            1.0,
            Arc::new(move |x| dot(&u, x).tanh()),
            Arc::new(move |x| {
                let t = dot(&ug, x).tanh();
                let sech2 = 1.0 - t * t;
                ug.iter().map(|ui| ui * sech2).collect()
            }),
            Some(Arc::new(move |x| {
                let t = dot(&uh, x).tanh();
                let scale = -2.0 * t * (1.0 - t * t);
                outer_scaled(&uh, scale)
            })),
        )
    }

    /// phi = exp(-|x - c|^2).
    pub fn gauss_bump(label: impl Into<String>, center: Vec<f64>) -> Self {
        let cg = center.clone();
        let ch = center.clone();
        Self::new(
            label,
            1.0,
            Arc::new(move |x| {
                let q: f64 = x.iter().zip(&center).map(|(a, b)| (a - b) * (a - b)).sum();
                (-q).exp()
            }),
            Arc::new(move |x| {
                let q: f64 = x.iter().zip(&cg).map(|(a, b)| (a - b) * (a - b)).sum();
                let e = (-q).exp();
                x.iter().zip(&cg).map(|(a, b)| -2.0 * (a - b) * e).collect()
            }),
            Some(Arc::new(move |x| {
                let d = x.len();
                let diff: Vec<f64> = x.iter().zip(&ch).map(|(a, b)| a - b).collect();
                let e = (-norm_sq(&diff)).exp();
                let mut out = vec![0.0; d * d];
                for i in 0..d {
                    for j in 0..d {
                        out[i * d + j] = (4.0 * diff[i] * diff[j] - if i == j { 2.0 } else { 0.0 }) * e;
                    }
                }
                out
            })),
        )
    }

    /// Compare the analytic gradient against central differences on a grid.
    pub fn verify_grad(&self, grid: &[Vec<f64>], delta: f64, rtol: f64) -> bool {
        grid.iter().all(|x| {
            let g = self.grad(x);
            (0..x.len()).all(|j| {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[j] += delta;
                xm[j] -= delta;
                let fd = (self.eval(&xp) - self.eval(&xm)) / (2.0 * delta);
                (g[j] - fd).abs() <= rtol * (1.0 + fd.abs())
            })
        })
    }
}

fn outer_scaled(k: &[f64], s: f64) -> Vec<f64> {
    let d = k.len();
    let mut out = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            out[i * d + j] = s * k[i] * k[j];
        }
    }
    out
}

fn basis(dim: usize, axis: usize, scale: f64) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    v[axis] = scale;
    v
}

/// The canonical battery: sin/cos along each axis at frequencies
/// {0.5, 1, 2}, a tanh ridge per axis, and Gaussian bumps at 0 and +-e_1.
pub fn canonical_battery(dim: usize) -> Vec<TestFunction> {
    assert!(dim >= 1);
    let mut battery = Vec::new();
    for axis in 0..dim {
        for freq in [0.5, 1.0, 2.0] {
            battery.push(TestFunction::sin_wave(
                format!("sin_k{freq}_e{}", axis + 1),
                basis(dim, axis, freq),
            ));
            battery.push(TestFunction::cos_wave(
                format!("cos_k{freq}_e{}", axis + 1),
                basis(dim, axis, freq),
            ));
        }
    }
    for axis in 0..dim {
        battery.push(TestFunction::tanh_ridge(format!("tanh_e{}", axis + 1), basis(dim, axis, 1.0)));
    }
    battery.push(TestFunction::gauss_bump("gauss_c0", vec![0.0; dim]));
    battery.push(TestFunction::gauss_bump("gauss_c+e1", basis(dim, 0, 1.0)));
    battery.push(TestFunction::gauss_bump("gauss_c-e1", basis(dim, 0, -1.0)));
    battery
}

/// Select battery members by label.
pub fn battery_by_labels(dim: usize, labels: &[String]) -> Result<Vec<TestFunction>> {
    let all = canonical_battery(dim);
    labels
        .iter()
        .map(|l| {
            all.iter()
                .find(|f| &f.label == l)
                .cloned()
                .ok_or_else(|| Error::InvalidParameter(format!("unknown battery label '{l}'")))
        })
        .collect()
}

/// A vector field given coordinate-wise by test functions.
#[derive(Debug, Clone)]
pub struct VectorField {
    pub components: Vec<TestFunction>,
}

impl VectorField {
    pub fn new(components: Vec<TestFunction>) -> Self {
        assert!(!components.is_empty());
        Self { components }
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.components.iter().map(|f| f.eval(x)).collect()
    }

    /// div F = sum_h d_h f_h.
    pub fn divergence(&self, x: &[f64]) -> f64 {
        self.components.iter().enumerate().map(|(h, f)| f.grad(x)[h]).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drift::default_grid;

    #[test]
    fn battery_gradients_match_finite_differences() {
        for dim in [1usize, 2] {
            let grid = default_grid(dim, 2.5, 40);
            for f in canonical_battery(dim) {
                assert!(f.verify_grad(&grid, 1e-5, 1e-6), "{} gradient", f.label);
            }
        }
    }

    #[test]
    fn battery_hessians_match_finite_differences_of_gradients() {
        for dim in [1usize, 2] {
            let grid = default_grid(dim, 2.0, 25);
            for f in canonical_battery(dim) {
                for x in &grid {
                    let hess = f.hessian(x).unwrap();
                    for j in 0..dim {
                        let mut xp = x.clone();
                        let mut xm = x.clone();
                        xp[j] += 1e-5;
                        xm[j] -= 1e-5;
                        let gp = f.grad(&xp);
                        let gm = f.grad(&xm);
                        for i in 0..dim {
                            let fd = (gp[i] - gm[i]) / 2e-5;
                            assert!(
                                (hess[i * dim + j] - fd).abs() < 1e-5 * (1.0 + fd.abs()),
                                "{} hessian[{i}][{j}] at {x:?}",
                                f.label
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn battery_respects_its_sup_norms() {
        let grid = default_grid(1, 8.0, 400);
        for f in canonical_battery(1) {
            for x in &grid {
                assert!(f.eval(x).abs() <= f.sup_norm + 1e-12, "{}", f.label);
            }
        }
    }

    #[test]
    fn labels_resolve_and_unknown_labels_error() {
        let picked =
            battery_by_labels(1, &["sin_k1_e1".into(), "tanh_e1".into()]).unwrap();
        assert_eq!(picked.len(), 2);
        assert!(battery_by_labels(1, &["nope".into()]).is_err());
    }

    #[test]
    fn divergence_matches_hand_computation() {
        // F = (tanh(x)) in d = 1: div F = sech^2(0) = 1 at the origin
        let field = VectorField::new(vec![TestFunction::tanh_ridge("tanh_e1", vec![1.0])]);
        assert!((field.divergence(&[0.0]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn missing_hessian_is_reported() {
        let f = TestFunction::new(
            "no_hess",
            1.0,
            Arc::new(|x: &[f64]| x[0]),
            Arc::new(|_| vec![1.0]),
            None,
        );
        assert!(matches!(f.hessian(&[0.0]), Err(Error::MissingHessian(_))));
    }
}
