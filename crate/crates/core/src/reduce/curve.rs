//! Fits the low-dimensional similarity curve `1 / (1 + a·x^(2b))` to the
//! offset exponential implied by `min_dist` and `spread`.

const SAMPLES: usize = 300;

fn target(x: f64, spread: f64, min_dist: f64) -> f64 {
    if x < min_dist {
        1.0
    } else {
        (-(x - min_dist) / spread).exp()
    }
}

fn residuals_and_jacobian(xs: &[f64], ys: &[f64], a: f64, b: f64) -> (Vec<f64>, Vec<[f64; 2]>) {
    let mut r = Vec::with_capacity(xs.len());
    let mut j = Vec::with_capacity(xs.len());
    for (&x, &y) in xs.iter().zip(ys) {
        let p = if x > 0.0 { x.powf(2.0 * b) } else { 0.0 };
        let denom = 1.0 + a * p;
        r.push(1.0 / denom - y);
        let g = -1.0 / (denom * denom);
        let dlog = if x > 0.0 { 2.0 * x.ln() } else { 0.0 };
        j.push([g * p, g * a * p * dlog]);
    }
    (r, j)
}

fn sse(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

/// Least-squares `(a, b)` by Levenberg–Marquardt from `(1, 1)` over 300
/// evenly spaced points in `[0, 3·spread]`.
pub fn find_ab_params(spread: f64, min_dist: f64) -> (f64, f64) {
    let xs: Vec<f64> = (0..SAMPLES)
        .map(|i| 3.0 * spread * i as f64 / (SAMPLES - 1) as f64)
        .collect();
    let ys: Vec<f64> = xs.iter().map(|&x| target(x, spread, min_dist)).collect();
    let (mut a, mut b) = (1.0, 1.0);
    let mut lambda = 1e-3;
    let (mut r, mut jac) = residuals_and_jacobian(&xs, &ys, a, b);
    let mut cost = sse(&r);
    for _ in 0..500 {
        let mut jtj = [[0.0; 2]; 2];
        let mut jtr = [0.0; 2];
        for (ri, ji) in r.iter().zip(&jac) {
            for p in 0..2 {
                jtr[p] += ji[p] * ri;
                for q in 0..2 {
                    jtj[p][q] += ji[p] * ji[q];
                }
            }
        }
        let mut improved = false;
        while lambda < 1e12 {
            let m00 = jtj[0][0] * (1.0 + lambda);
            let m11 = jtj[1][1] * (1.0 + lambda);
            let m01 = jtj[0][1];
            let det = m00 * m11 - m01 * m01;
            if det.abs() < f64::MIN_POSITIVE {
                lambda *= 10.0;
                continue;
            }
            let da = -(m11 * jtr[0] - m01 * jtr[1]) / det;
            let db = -(m00 * jtr[1] - m01 * jtr[0]) / det;
            let (na, nb) = (a + da, b + db);
            let (nr, nj) = residuals_and_jacobian(&xs, &ys, na, nb);
            let ncost = sse(&nr);
            if ncost.is_finite() && ncost < cost {
                let step = da.abs().max(db.abs());
                let gain = cost - ncost;
                (a, b, r, jac, cost) = (na, nb, nr, nj, ncost);
                lambda = (lambda / 10.0).max(1e-15);
                improved = true;
                if step < 1e-14 || gain < 1e-18 * cost.max(1e-300) {
                    return (a, b);
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    (a, b)
}
