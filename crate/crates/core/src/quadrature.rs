//! Gauss–Hermite nodes and weights for the weight function e^{-x²}.

use std::f64::consts::PI;

/// π^{-1/4}, the leading coefficient of the orthonormal Hermite recursion.
const PI_M4: f64 = 0.751_125_544_464_942_5;

/// Nodes (descending) and weights of the `n`-point Gauss–Hermite rule,
/// exact for ∫ e^{-x²} q(x) dx with deg q ≤ 2n − 1.
///
/// Roots are found by Newton iteration on the orthonormal Hermite
/// polynomials, seeded with the usual asymptotic guesses.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "Gauss-Hermite order must be positive");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    let half = n.div_ceil(2);
    let mut z = 0.0;
    for i in 0..half {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        for _ in 0..100 {
            let (p1, p2) = hermite_pair(n, z);
            let step = p1 / ((2.0 * nf).sqrt() * p2);
            z -= step;
            if step.abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        // weight from the derivative at the converged root
        let (_, p2) = hermite_pair(n, z);
        let pp = (2.0 * nf).sqrt() * p2;
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Orthonormal Hermite values (h_n(z), h_{n-1}(z)).
fn hermite_pair(n: usize, z: f64) -> (f64, f64) {
    let mut p1 = PI_M4;
    let mut p2 = 0.0;
    for j in 0..n {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
    }
    (p1, p2)
}

/// Nodes and probability weights for E[f(Z)], Z ~ N(0, 1):
/// points √2·x_i with weights w_i/√π.
pub fn standard_normal_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_hermite(n);
    let root2 = 2.0_f64.sqrt();
    let norm = PI.sqrt();
    (
        x.into_iter().map(|v| v * root2).collect(),
        w.into_iter().map(|v| v / norm).collect(),
    )
}
