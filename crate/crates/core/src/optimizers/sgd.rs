/// `x ← x − η g` in place.
pub fn sgd_step_eta(x: &mut [f64], eta: f64, g: &[f64]) {
    debug_assert_eq!(x.len(), g.len());
    for (xi, gi) in x.iter_mut().zip(g) {
        *xi -= eta * gi;
    }
}

/// Classic SGD step `x' = x − (c/√k)·g`.
pub fn sgd_step(x: &[f64], k: u64, scale: f64, g: &[f64]) -> Vec<f64> {
    let mut out = x.to_vec();
    sgd_step_eta(&mut out, scale / (k.max(1) as f64).sqrt(), g);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient() {
        assert_eq!(sgd_step(&[1.5, -2.0], 3, 1.0, &[0.0, 0.0]), vec![1.5, -2.0]);
    }

    #[test]
    fn k4_example() {
        assert_eq!(sgd_step(&[0.0], 4, 1.0, &[2.0]), vec![-1.0]);
    }

    #[test]
    fn scalar_quadratic_matches_loop() {
        let mut x = vec![1.0];
        let mut s = 1.0f64;
        for k in 1..=10u64 {
            x = sgd_step(&x, k, 1.0, &[x[0]]);
            s -= s / (k as f64).sqrt();
            assert!((x[0] - s).abs() < 1e-14);
        }
    }
}
