/// Central-difference check of `analytic` against `f` at `x`.
///
/// Returns `max_i |g_a - g_n| / max(1, |g_a|, |g_n|)`.
pub fn grad_check<F>(f: F, x: &[f64], analytic: &[f64], step: f64) -> f64
where
    F: Fn(&[f64]) -> f64,
{
    assert_eq!(x.len(), analytic.len(), "gradient length mismatch");
    let mut probe = x.to_vec();
    let mut worst: f64 = 0.0;
    for i in 0..x.len() {
        probe[i] = x[i] + step;
        let up = f(&probe);
        probe[i] = x[i] - step;
        let down = f(&probe);
        probe[i] = x[i];
        let numeric = (up - down) / (2.0 * step);
        let ga = analytic[i];
        let err = (ga - numeric).abs() / 1f64.max(ga.abs()).max(numeric.abs());
        worst = worst.max(err);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_is_exact() {
        let a = [3.0, -1.0, 0.5];
        let f = |x: &[f64]| x.iter().zip(&a).map(|(xi, ai)| ai * xi * xi + xi).sum::<f64>();
        let x = [0.3, -2.0, 7.0];
        let g: Vec<f64> = x.iter().zip(&a).map(|(xi, ai)| 2.0 * ai * xi + 1.0).collect();
        assert!(grad_check(f, &x, &g, 1e-5) < 1e-8);
    }

    #[test]
    fn detects_wrong_gradient() {
        let f = |x: &[f64]| x[0] * x[0];
        assert!(grad_check(f, &[1.0], &[3.0], 1e-5) > 0.3);
    }
}
