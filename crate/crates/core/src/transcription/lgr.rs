//! Legendre-Gauss-Radau points, weights and differentiation matrices on
//! `[-1, 1)`.

/// `P_{n-1}(x)` and `P_n(x)` by the three-term recurrence.
fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let (mut p0, mut p1) = (1.0, x);
    for k in 1..n {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0) * x * p1 - kf * p0) / (kf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    (p0, p1)
}

/// `P_n'(x)` from `P_{n-1}` and `P_n`, valid away from `x = ±1`.
fn legendre_derivative(n: usize, x: f64, pm1: f64, p: f64) -> f64 {
    n as f64 * (pm1 - x * p) / (1.0 - x * x)
}

/// The `n` LGR points (roots of `P_{n-1} + P_n`, first point `-1`) and their
/// quadrature weights.
pub fn lgr_points_weights(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "at least one collocation point");
    let nf = n as f64;
    let mut pts = vec![-1.0; n];
    let mut wts = vec![2.0 / (nf * nf); n];
    for k in 1..n {
        // Chebyshev-Gauss-Radau start
        let mut x = -(2.0 * std::f64::consts::PI * k as f64 / (2.0 * nf - 1.0)).cos();
        for _ in 0..100 {
            let (a, b) = legendre_pair(n, x);
            let (c, _) = legendre_pair(n - 1, x);
            let f = a + b;
            let df = legendre_derivative(n - 1, x, c, a) + legendre_derivative(n, x, a, b);
            let dx = f / df;
            x -= dx;
            if dx.abs() <= 1e-16 * (1.0 + x.abs()) {
                break;
            }
        }
        let (pm1, _) = legendre_pair(n, x);
        pts[k] = x;
        wts[k] = (1.0 - x) / (nf * nf * pm1 * pm1);
    }
    (pts, wts)
}

/// Barycentric weights of a point set.
pub fn barycentric_weights(pts: &[f64]) -> Vec<f64> {
    (0..pts.len())
        .map(|j| {
            let mut p = 1.0;
            for (k, &x) in pts.iter().enumerate() {
                if k != j {
                    p *= pts[j] - x;
                }
            }
            1.0 / p
        })
        .collect()
}

/// Evaluates the interpolant through `(pts, vals)` at `x`, componentwise.
/// `vals[j]` holds the sample at `pts[j]`.
pub fn barycentric_eval(pts: &[f64], bw: &[f64], vals: &[&[f64]], x: f64, out: &mut [f64]) {
    // queries within rounding of a node return the node value
    if let Some(j) = pts.iter().position(|&p| (p - x).abs() <= 1e-13) {
        out.copy_from_slice(vals[j]);
        return;
    }
    out.fill(0.0);
    let mut den = 0.0;
    for j in 0..pts.len() {
        let c = bw[j] / (x - pts[j]);
        den += c;
        for (o, v) in out.iter_mut().zip(vals[j]) {
            *o += c * v;
        }
    }
    for o in out.iter_mut() {
        *o /= den;
    }
}

/// The state support: the `n` LGR points followed by `+1`.
pub fn support_points(n: usize) -> Vec<f64> {
    let mut s = lgr_points_weights(n).0;
    s.push(1.0);
    s
}

/// `n × (n+1)` matrix (row-major) taking values on the state support to
/// derivatives at the collocation points.
pub fn differentiation_matrix(n: usize) -> Vec<Vec<f64>> {
    let s = support_points(n);
    let bw = barycentric_weights(&s);
    let mut d = vec![vec![0.0; n + 1]; n];
    for i in 0..n {
        let mut diag = 0.0;
        for j in 0..=n {
            if i != j {
                let v = bw[j] / bw[i] / (s[i] - s[j]);
                d[i][j] = v;
                diag -= v;
            }
        }
        d[i][i] = diag;
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    fn monomial_integral(k: u32) -> f64 {
        if k % 2 == 1 {
            0.0
        } else {
            2.0 / (k as f64 + 1.0)
        }
    }

    #[test]
    fn single_point() {
        let (p, w) = lgr_points_weights(1);
        assert_eq!(p, vec![-1.0]);
        assert_eq!(w, vec![2.0]);
    }

    #[test]
    fn two_points() {
        let (p, w) = lgr_points_weights(2);
        assert_eq!(p[0], -1.0);
        assert!((p[1] - 1.0 / 3.0).abs() < 1e-15);
        assert!((w[0] - 0.5).abs() < 1e-15 && (w[1] - 1.5).abs() < 1e-15);
        // (3x-1)(x+1)/2 = P_1 + P_2
        for x in &p {
            assert!(((3.0 * x - 1.0) * (x + 1.0) / 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn quadrature_exact_to_degree_2n_minus_2() {
        for n in 1..=12 {
            let (p, w) = lgr_points_weights(n);
            assert!(w.iter().all(|v| *v > 0.0));
            assert!(p.windows(2).all(|a| a[0] < a[1]) && p[n - 1] < 1.0);
            for k in 0..=(2 * n as u32 - 2) {
                let q: f64 = p.iter().zip(&w).map(|(x, wi)| wi * x.powi(k as i32)).sum();
                assert!((q - monomial_integral(k)).abs() < 1e-13, "n={n} k={k}: {q}");
            }
        }
    }

    #[test]
    fn differentiation_exact_to_degree_n() {
        for n in 1..=12 {
            let s = support_points(n);
            let d = differentiation_matrix(n);
            for k in 0..=n as i32 {
                for i in 0..n {
                    let v: f64 = (0..=n).map(|j| d[i][j] * s[j].powi(k)).sum();
                    let exact = if k == 0 { 0.0 } else { k as f64 * s[i].powi(k - 1) };
                    assert!((v - exact).abs() < 1e-12, "n={n} k={k} i={i}: {v} vs {exact}");
                }
            }
        }
    }

    #[test]
    fn cubic_with_four_points() {
        let s = support_points(4);
        let d = differentiation_matrix(4);
        for i in 0..4 {
            let v: f64 = (0..5).map(|j| d[i][j] * s[j].powi(3)).sum();
            assert!((v - 3.0 * s[i] * s[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn interpolation_hits_nodes_and_reproduces_polynomials() {
        let s = support_points(5);
        let bw = barycentric_weights(&s);
        let vals: Vec<[f64; 1]> = s.iter().map(|x| [x.powi(5) - 2.0 * x]).collect();
        let refs: Vec<&[f64]> = vals.iter().map(|v| &v[..]).collect();
        let mut out = [0.0];
        barycentric_eval(&s, &bw, &refs, s[2], &mut out);
        assert_eq!(out[0], vals[2][0]);
        for x in [-0.93, -0.2, 0.41, 0.999] {
            barycentric_eval(&s, &bw, &refs, x, &mut out);
            assert!((out[0] - (x.powi(5) - 2.0 * x)).abs() < 1e-13);
        }
    }
}
