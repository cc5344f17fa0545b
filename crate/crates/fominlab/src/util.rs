//! Small dense-vector helpers on slices. States live in low dimension
//! (d <= 3 for the built-in models), so plain slices beat a matrix library.

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

/// out <- A v for a row-major d x d matrix.
#[inline]
pub fn mat_vec(a: &[f64], v: &[f64], out: &mut [f64]) {
    let d = v.len();
    debug_assert_eq!(a.len(), d * d);
    for (i, o) in out.iter_mut().enumerate() {
        *o = dot(&a[i * d..(i + 1) * d], v);
    }
}

pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|x| x.is_finite())
}

/// Neumaier-compensated sum; keeps normalization of millions of weights
/// accurate to a few ulps.
pub fn neumaier_sum(xs: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Spectral norm of a row-major d x d matrix.
///
/// Exact for d = 1 and d = 2; power iteration on A^T A otherwise (enough for
/// certificate grid checks, which only need a few correct digits).
pub fn operator_norm(a: &[f64], d: usize) -> f64 {
    debug_assert_eq!(a.len(), d * d);
    match d {
        1 => a[0].abs(),
        2 => {
            // Largest singular value from the 2x2 closed form.
            let (p, q, r, s) = (a[0], a[1], a[2], a[3]);
            let g1 = p * p + q * q + r * r + s * s;
            let g2 = (p * s - q * r).abs();
            let disc = (g1 * g1 - 4.0 * g2 * g2).max(0.0).sqrt();
            (0.5 * (g1 + disc)).sqrt()
        }
        _ => {
            let mut v = vec![1.0 / (d as f64).sqrt(); d];
            let mut av = vec![0.0; d];
            let mut atav = vec![0.0; d];
            let mut lambda = 0.0;
            for _ in 0..60 {
                mat_vec(a, &v, &mut av);
                // A^T (A v)
                for (j, o) in atav.iter_mut().enumerate() {
                    *o = (0..d).map(|i| a[i * d + j] * av[i]).sum();
                }
                lambda = norm(&atav);
                if lambda == 0.0 {
                    return 0.0;
                }
                for (vi, t) in v.iter_mut().zip(&atav) {
                    *vi = t / lambda;
                }
            }
            lambda.sqrt()
        }
    }
}
