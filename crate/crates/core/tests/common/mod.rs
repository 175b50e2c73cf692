//! Shared test oracles: Gauss-Legendre quadrature over probability
//! densities, independent of every code path they are used to check.

// each integration-test binary uses its own subset of these helpers
#![allow(dead_code)]

/// Nodes and weights of an `n`-point Gauss-Legendre rule on [-1, 1],
/// generated by Newton iteration on the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            // Legendre P_n(x) and its derivative by the three-term recurrence
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let mut p0 = 1.0;
        let mut p1 = x;
        for k in 2..=n {
            let kf = k as f64;
            let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
            p0 = p1;
            p1 = p2;
        }
        let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Composite Gauss-Legendre integral of `f` over `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, panels: usize) -> f64 {
    let (nodes, weights) = gauss_legendre(24);
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * h;
        let mid = lo + 0.5 * h;
        let half = 0.5 * h;
        let mut acc = 0.0;
        for (x, w) in nodes.iter().zip(&weights) {
            acc += w * f(mid + half * x);
        }
        total += acc * half;
    }
    total
}

/// `integral_c^infinity f` through the substitution `s = 1/u`, for
/// integrands decaying at least like `s^{-2}` (requires `c > 0`).
pub fn integrate_tail<F: Fn(f64) -> f64>(f: &F, c: f64, panels: usize) -> f64 {
    assert!(c > 0.0);
    let g = |u: f64| {
        if u == 0.0 {
            0.0
        } else {
            f(1.0 / u) / (u * u)
        }
    };
    integrate(&g, 0.0, 1.0 / c, panels)
}

/// Quadrature oracle for the standard normal survival function.
pub fn normal_sf_oracle(x: f64) -> f64 {
    let density = |t: f64| (-0.5 * t * t).exp();
    let z = integrate(&density, -45.0, 45.0, 360);
    if x >= 0.0 {
        integrate(&density, x, x + 42.0, 420) / z
    } else {
        1.0 - integrate(&density, -x, -x + 42.0, 420) / z
    }
}

/// Quadrature oracle for the Student t survival function (unnormalized
/// density integrated twice, so no gamma-function constants enter).
pub fn student_sf_oracle(t: f64, df: f64) -> f64 {
    let density = move |s: f64| (1.0 + s * s / df).powf(-0.5 * (df + 1.0));
    let half = integrate(&density, 0.0, 1.0, 40) + integrate_tail(&density, 1.0, 400);
    let z = 2.0 * half;
    if t < 0.0 {
        return 1.0 - student_sf_oracle(-t, df);
    }
    let tail = if t >= 1.0 {
        integrate_tail(&density, t, 400)
    } else {
        integrate(&density, t, 1.0, 40) + integrate_tail(&density, 1.0, 400)
    };
    tail / z
}

/// Quadrature oracle for the Fisher F survival function. Requires `df2 >= 4`
/// so the transformed tail integrand stays smooth at the origin.
pub fn fisher_sf_oracle(f: f64, df1: f64, df2: f64) -> f64 {
    assert!(df2 >= 4.0, "oracle grid keeps df2 >= 4");
    let density = move |s: f64| s.powf(0.5 * df1 - 1.0) * (1.0 + df1 * s / df2).powf(-0.5 * (df1 + df2));
    let z = integrate(&density, 0.0, 1.0, 200) + integrate_tail(&density, 1.0, 400);
    let tail = if f >= 1.0 {
        integrate_tail(&density, f, 400)
    } else {
        integrate(&density, f, 1.0, 200) + integrate_tail(&density, 1.0, 400)
    };
    tail / z
}

/// Quadrature oracle for the regularized incomplete beta, through the
/// substitution `u = sin^2(theta)` which removes the endpoint singularities
/// for shapes down to 1/2.
pub fn incomplete_beta_oracle(a: f64, b: f64, x: f64) -> f64 {
    assert!(a >= 0.5 && b >= 0.5, "oracle grid keeps shapes >= 1/2");
    let density = move |theta: f64| {
        let (s, c) = theta.sin_cos();
        2.0 * s.powf(2.0 * a - 1.0) * c.powf(2.0 * b - 1.0)
    };
    let half_pi = 0.5 * std::f64::consts::PI;
    let z = integrate(&density, 0.0, half_pi, 600);
    integrate(&density, 0.0, x.sqrt().asin(), 600) / z
}

/// Relative error against an oracle value, guarding tiny denominators.
pub fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(1e-300)
}
