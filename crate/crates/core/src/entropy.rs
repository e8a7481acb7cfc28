//! Shannon entropy helpers (natural logarithm, `0·log 0 = 0`).

/// `x·log(1/x)` with the convention `0·log(1/0) = 0`.
#[inline]
pub fn neg_xlogx(x: f64) -> f64 {
    if x > 0.0 {
        -x * x.ln()
    } else {
        0.0
    }
}

/// Entropy of a probability vector.
pub fn entropy(p: &[f64]) -> f64 {
    p.iter().map(|&x| neg_xlogx(x)).sum()
}

/// `KL(p, q) = Σ p log(p/q)`; infinite when `p` puts mass where `q` has none.
pub fn kl(p: &[f64], q: &[f64]) -> f64 {
    debug_assert_eq!(p.len(), q.len());
    let mut out = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi > 0.0 {
            if qi <= 0.0 {
                return f64::INFINITY;
            }
            out += pi * (pi / qi).ln();
        }
    }
    out
}

/// Smoothed entropy `Σ d log(1/(d+σ))`.
pub fn smoothed_entropy(d: &[f64], sigma: f64) -> f64 {
    d.iter().map(|&x| if x > 0.0 { -x * (x + sigma).ln() } else { 0.0 }).sum()
}

/// Gradient of the smoothed entropy: `log(1/(d+σ)) − d/(d+σ)`.
pub fn smoothed_entropy_grad(d: f64, sigma: f64) -> f64 {
    -(d + sigma).ln() - d / (d + sigma)
}

/// Mean and variance of `f` under `p`.
#[inline]
pub fn mean_var(p: &[f64], f: &[f64]) -> (f64, f64) {
    let mean: f64 = p.iter().zip(f).map(|(a, b)| a * b).sum();
    let var: f64 = p
        .iter()
        .zip(f)
        .map(|(a, b)| a * (b - mean) * (b - mean))
        .sum();
    (mean, var.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_entropy() {
        assert!((entropy(&[0.25; 4]) - 4f64.ln()).abs() < 1e-15);
        assert_eq!(entropy(&[1.0, 0.0]), 0.0);
    }

    #[test]
    fn kl_basics() {
        assert_eq!(kl(&[0.5, 0.5], &[0.5, 0.5]), 0.0);
        assert!(kl(&[1.0, 0.0], &[0.0, 1.0]).is_infinite());
        assert_eq!(kl(&[0.0, 1.0], &[0.5, 0.5]), 2f64.ln());
    }

    #[test]
    fn smoothed_entropy_bias_bound() {
        // |H(d) - H_σ(d)| ≤ σ·n
        let d = [0.1, 0.2, 0.3, 0.4, 0.0];
        let sigma = 1e-3;
        assert!((entropy(&d) - smoothed_entropy(&d, sigma)).abs() <= sigma * d.len() as f64);
    }
}
