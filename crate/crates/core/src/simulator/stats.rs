/// Ordinary least-squares fit of `y = a + b t`. Returns the slope `b` and its
/// classical standard error; the error is zero for fewer than three points.
pub fn least_squares(t: &[f64], y: &[f64]) -> (f64, f64) {
    let n = t.len().min(y.len());
    if n < 2 {
        return (0.0, 0.0);
    }
    let nf = n as f64;
    let t_mean = t[..n].iter().sum::<f64>() / nf;
    let y_mean = y[..n].iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for i in 0..n {
        let dt = t[i] - t_mean;
        sxx += dt * dt;
        sxy += dt * (y[i] - y_mean);
    }
    if sxx == 0.0 {
        return (0.0, 0.0);
    }
    let slope = sxy / sxx;
    if n < 3 {
        return (slope, 0.0);
    }
    let intercept = y_mean - slope * t_mean;
    let rss: f64 = (0..n)
        .map(|i| {
            let r = y[i] - intercept - slope * t[i];
            r * r
        })
        .sum();
    (slope, (rss / (nf - 2.0) / sxx).sqrt())
}

/// Standard error of the mean of (approximately independent) batch means.
pub fn batch_mean_se(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    (var / nf).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line_has_zero_error() {
        let t = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        let (b, se) = least_squares(&t, &y);
        assert!((b - 2.0).abs() < 1e-12);
        assert!(se < 1e-12);
    }

    #[test]
    fn slope_standard_error() {
        // Residuals +-1 around y = t: rss = 4, sxx = 5, se = sqrt(4/2/5).
        let t = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 0.0, 1.0, 4.0];
        let (b, se) = least_squares(&t, &y);
        let t_mean = 1.5;
        let y_mean = 1.5;
        let sxx: f64 = t.iter().map(|x| (x - t_mean) * (x - t_mean)).sum();
        let sxy: f64 = t
            .iter()
            .zip(&y)
            .map(|(x, y)| (x - t_mean) * (y - y_mean))
            .sum();
        assert!((b - sxy / sxx).abs() < 1e-12);
        let a = y_mean - b * t_mean;
        let rss: f64 = t.iter().zip(&y).map(|(x, y)| (y - a - b * x).powi(2)).sum();
        assert!((se - (rss / 2.0 / sxx).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn degenerate_inputs() {
        assert_eq!(least_squares(&[], &[]), (0.0, 0.0));
        assert_eq!(least_squares(&[1.0, 1.0], &[0.0, 5.0]), (0.0, 0.0));
        assert_eq!(batch_mean_se(&[3.0]), 0.0);
    }

    #[test]
    fn batch_means() {
        let se = batch_mean_se(&[1.0, 2.0, 3.0, 4.0]);
        // sample variance 5/3, divided by 4
        assert!((se - (5.0f64 / 12.0).sqrt()).abs() < 1e-12);
    }
}
