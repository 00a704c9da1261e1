//! Numerical integration on intervals and boxes.

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let c = 0.5 * (a + b);
    let fc = f(c);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fc + fb);
    simpson_step(&mut f, a, b, fa, fb, fc, whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: FnMut(f64) -> f64>(
    f: &mut F,
    a: f64,
    b: f64,
    fa: f64,
    fb: f64,
    fc: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let c = 0.5 * (a + b);
    let d = 0.5 * (a + c);
    let e = 0.5 * (c + b);
    let fd = f(d);
    let fe = f(e);
    let left = (c - a) / 6.0 * (fa + 4.0 * fd + fc);
    let right = (b - c) / 6.0 * (fc + 4.0 * fe + fb);
    let delta = left + right - whole;
    // Always split a few times so that symmetric cancellation on the first
    // panel cannot fake convergence.
    if depth == 0 || (depth < 46 && delta.abs() <= 15.0 * tol) {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, c, fa, fc, fd, left, 0.5 * tol, depth - 1)
        + simpson_step(f, c, b, fc, fb, fe, right, 0.5 * tol, depth - 1)
}

/// Nested adaptive Simpson over the box `[lower, upper]` in any dimension.
///
/// Cost grows geometrically with the dimension; intended for d ≤ 3.
pub fn integrate_box<F: FnMut(&[f64]) -> f64>(f: F, lower: &[f64], upper: &[f64], tol: f64) -> f64 {
    assert_eq!(lower.len(), upper.len());
    let mut f = f;
    let mut point = lower.to_vec();
    nested(&mut f, &mut point, 0, lower, upper, tol)
}

fn nested<F: FnMut(&[f64]) -> f64>(
    f: &mut F,
    point: &mut Vec<f64>,
    axis: usize,
    lower: &[f64],
    upper: &[f64],
    tol: f64,
) -> f64 {
    if axis == point.len() {
        return f(point);
    }
    let width: f64 = upper[axis + 1..]
        .iter()
        .zip(&lower[axis + 1..])
        .map(|(u, l)| u - l)
        .product::<f64>()
        .max(1e-300);
    let inner_tol = tol / (4.0 * width.max(1.0));
    adaptive_simpson(
        |x| {
            point[axis] = x;
            let v = nested(f, point, axis + 1, lower, upper, inner_tol);
            point[axis] = x;
            v
        },
        lower[axis],
        upper[axis],
        tol,
    )
}

/// Gauss–Legendre nodes and weights on `[0, 1]`.
///
/// Exact for polynomials of degree up to `2n − 1`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Chebyshev-like starting guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = 0.5 * (1.0 - x);
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_integrates_smooth_and_kinked() {
        let v = adaptive_simpson(f64::exp, 0.0, 1.0, 1e-12);
        assert!((v - (std::f64::consts::E - 1.0)).abs() < 1e-11);
        let kink = adaptive_simpson(|x| (x - 0.3).abs(), 0.0, 1.0, 1e-12);
        assert!((kink - (0.045 + 0.245)).abs() < 1e-10);
    }

    #[test]
    fn simpson_handles_jumps() {
        let step = adaptive_simpson(|x| if x > 0.37 { 1.0 } else { 0.0 }, 0.0, 1.0, 1e-10);
        assert!((step - 0.63).abs() < 1e-8);
    }

    #[test]
    fn box_integral_of_product() {
        let v = integrate_box(|p| p[0] * p[1] * p[1], &[0.0, 0.0], &[1.0, 1.0], 1e-10);
        assert!((v - 1.0 / 6.0).abs() < 1e-10);
    }

    #[test]
    fn gauss_legendre_is_exact_for_polynomials() {
        for n in 1..=20 {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-13);
            let deg = 2 * n - 1;
            let v: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
            assert!((v - 1.0 / (deg as f64 + 1.0)).abs() < 1e-13, "n={n}");
        }
    }
}
