/// Central-difference gradient check.
///
/// Perturbs each entry of `params` by `±step`, compares the numeric slope of
/// `f` with `analytic`, and returns the largest relative error
/// `|a - n| / max(1e-8, |a| + |n|)`.
pub fn finite_diff_check<F>(mut f: F, params: &[f64], analytic: &[f64], step: f64) -> f64
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(params.len(), analytic.len(), "gradient length mismatch");
    let mut work = params.to_vec();
    let mut worst: f64 = 0.0;
    for (i, &a) in analytic.iter().enumerate() {
        let original = work[i];
        work[i] = original + step;
        let plus = f(&work);
        work[i] = original - step;
        let minus = f(&work);
        work[i] = original;
        let numeric = (plus - minus) / (2.0 * step);
        let err = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-8);
        worst = worst.max(err);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_is_exact() {
        let err = finite_diff_check(|w| w[0] * w[0], &[3.0], &[6.0], 1e-5);
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn wrong_gradient_is_flagged() {
        let err = finite_diff_check(|w| w[0] * w[0], &[3.0], &[5.0], 1e-5);
        assert!(err > 0.05);
    }
}
