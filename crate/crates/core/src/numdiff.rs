//! Five-point central differences and the symplectic defect of a Jacobian.

/// Jacobian of `f` at `x` by the fourth-order stencil with per-coordinate
/// step `h * max(1, |x_i|)`. Rows index outputs.
pub fn jacobian<F>(f: F, x: &[f64], h: f64) -> Vec<Vec<f64>>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let steps: Vec<f64> = x.iter().map(|v| h * v.abs().max(1.0)).collect();
    jacobian_with_steps(f, x, &steps)
}

/// As [`jacobian`] with an explicit step per coordinate.
pub fn jacobian_with_steps<F>(f: F, x: &[f64], steps: &[f64]) -> Vec<Vec<f64>>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let m = f(x).len();
    let mut jac = vec![vec![0.0; x.len()]; m];
    let mut probe = x.to_vec();
    for j in 0..x.len() {
        let step = steps[j];
        let mut eval = |k: f64| {
            probe[j] = x[j] + k * step;
            let v = f(&probe);
            probe[j] = x[j];
            v
        };
        let (p1, m1, p2, m2) = (eval(1.0), eval(-1.0), eval(2.0), eval(-2.0));
        for i in 0..m {
            jac[i][j] = (8.0 * (p1[i] - m1[i]) - (p2[i] - m2[i])) / (12.0 * step);
        }
    }
    jac
}

/// `max |J^T Omega J - Omega|` for a square Jacobian in
/// positions-then-momenta order.
pub fn symplectic_defect(jac: &[Vec<f64>]) -> f64 {
    let n2 = jac.len();
    let n = n2 / 2;
    let omega = |i: usize, j: usize| -> f64 {
        if j == i + n {
            1.0
        } else if i == j + n {
            -1.0
        } else {
            0.0
        }
    };
    let mut worst = 0.0f64;
    for a in 0..n2 {
        for b in 0..n2 {
            let mut s = 0.0;
            for i in 0..n {
                s += jac[i][a] * jac[i + n][b] - jac[i + n][a] * jac[i][b];
            }
            worst = worst.max((s - omega(a, b)).abs());
        }
    }
    worst
}
