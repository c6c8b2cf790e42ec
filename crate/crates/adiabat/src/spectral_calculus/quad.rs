use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on [-1, 1] (Newton on P_p).
pub fn gauss_legendre(p: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; p];
    let mut w = vec![0.0; p];
    for i in 0..p.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (p as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=p {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if p == 1 {
                p1 = z;
                p0 = 1.0;
            }
            dp = p as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[p - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[p - 1 - i] = w[i];
    }
    (x, w)
}

/// Adaptive Gauss–Legendre on [lo, hi]: a panel is accepted when the
/// 10-point rule and its two-half refinement agree to `tol` relative to a
/// 16-panel estimate of ∫|f|, shared out by panel length. Returns the
/// integral and the accepted panel count.
pub fn adaptive(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> (f64, usize) {
    let (xs, ws) = gauss_legendre(10);
    let rule = |a: f64, b: f64| -> f64 {
        let (c, r) = ((a + b) / 2.0, (b - a) / 2.0);
        xs.iter().zip(&ws).map(|(x, w)| w * f(c + r * x)).sum::<f64>() * r
    };
    let total_len = hi - lo;
    let coarse: f64 = (0..16)
        .map(|k| {
            let a = lo + total_len * k as f64 / 16.0;
            rule(a, a + total_len / 16.0).abs()
        })
        .sum();
    let scale = coarse.max(f64::MIN_POSITIVE);
    let mut stack = vec![(lo, hi, rule(lo, hi), 0u32)];
    let mut sum = 0.0;
    let mut panels = 0;
    while let Some((a, b, whole, depth)) = stack.pop() {
        let m = (a + b) / 2.0;
        let (l, r) = (rule(a, m), rule(m, b));
        let local_tol = tol * scale * (b - a) / total_len;
        if (l + r - whole).abs() <= local_tol || depth >= 40 {
            sum += l + r;
            panels += 2;
        } else {
            stack.push((m, b, r, depth + 1));
            stack.push((a, m, l, depth + 1));
        }
    }
    (sum, panels)
}
