//! Special functions: log-factorials and the Gauss hypergeometric function.

use crate::error::{Error, Result};

/// `ln n!`, summed exactly for small `n` and by Stirling's series beyond.
pub fn ln_factorial(n: usize) -> f64 {
    if n < 64 {
        (2..=n).map(|k| (k as f64).ln()).sum()
    } else {
        let x = n as f64 + 1.0;
        // ln Γ(x), Stirling with four correction terms; error < 1e-16 for x > 64
        let inv = 1.0 / x;
        let inv2 = inv * inv;
        (x - 0.5) * x.ln() - x
            + 0.5 * (2.0 * std::f64::consts::PI).ln()
            + inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 / 1680.0)))
    }
}

pub fn ln_binomial(n: usize, k: usize) -> f64 {
    debug_assert!(k <= n);
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// Running sum of positive terms supplied as logarithms.
#[derive(Debug, Clone, Copy)]
pub struct LogSum {
    ln_ref: f64,
    acc: f64,
}

impl Default for LogSum {
    fn default() -> Self {
        Self::new()
    }
}

impl LogSum {
    pub fn new() -> Self {
        Self {
            ln_ref: f64::NEG_INFINITY,
            acc: 0.0,
        }
    }

    pub fn add_ln(&mut self, ln_term: f64) {
        if ln_term == f64::NEG_INFINITY {
            return;
        }
        if self.acc == 0.0 {
            self.ln_ref = ln_term;
            self.acc = 1.0;
            return;
        }
        let d = ln_term - self.ln_ref;
        if d > 0.0 {
            self.acc = self.acc * (-d).exp() + 1.0;
            self.ln_ref = ln_term;
        } else {
            self.acc += d.exp();
        }
    }

    pub fn ln(&self) -> f64 {
        if self.acc == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.ln_ref + self.acc.ln()
        }
    }
}

const MAX_SERIES_TERMS: usize = 1_000_000;

/// `ln ₂F₁(a, b; c; z)` from the Gauss series `Σ (a)ₘ(b)ₘ/((c)ₘ m!) zᵐ`,
/// for `a, b, c > 0` and `0 ≤ z < 1` (all terms positive).
pub fn hyp2f1_ln(a: f64, b: f64, c: f64, z: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0 && c > 0.0) {
        return Err(Error::Domain(format!(
            "hyp2f1_ln needs positive parameters, got a={a}, b={b}, c={c}"
        )));
    }
    if !(0.0..1.0).contains(&z) {
        return Err(Error::Domain(format!(
            "hypergeometric series diverges for z = {z} outside [0, 1)"
        )));
    }
    if z == 0.0 {
        return Ok(0.0);
    }
    let ln_z = z.ln();
    let mut sum = LogSum::new();
    let mut ln_term = 0.0;
    sum.add_ln(ln_term);
    for m in 0..MAX_SERIES_TERMS {
        let mf = m as f64;
        let ratio = (a + mf) * (b + mf) / ((c + mf) * (mf + 1.0));
        ln_term += ratio.ln() + ln_z;
        sum.add_ln(ln_term);
        let next_ratio = (a + mf + 1.0) * (b + mf + 1.0) / ((c + mf + 1.0) * (mf + 2.0)) * z;
        // once the ratio is below one and decreasing the remainder is geometric
        if next_ratio < 1.0 {
            let ln_tail = ln_term + next_ratio.ln() - (1.0 - next_ratio).ln();
            if ln_tail < sum.ln() - 40.0 {
                return Ok(sum.ln());
            }
        }
    }
    Err(Error::Numerical(format!(
        "hypergeometric series for a={a}, b={b}, c={c}, z={z} did not converge"
    )))
}

pub fn hyp2f1(a: f64, b: f64, c: f64, z: f64) -> Result<f64> {
    hyp2f1_ln(a, b, c, z).map(f64::exp)
}

/// Terminating polynomial `Q(z) = ₂F₁(−p, −q; 1; z) = Σₘ C(p,m) C(q,m) zᵐ`.
///
/// Returns `(ln Q(z), Q'(z)/Q(z))`. Through Euler's transformation
/// `₂F₁(1+p, 1+q; 1; z) = (1 − z)^{−1−p−q} Q(z)`.
pub fn euler_polynomial(p: usize, q: usize, z: f64) -> (f64, f64) {
    let top = p.min(q);
    if z == 0.0 || top == 0 {
        return (0.0, (p * q) as f64);
    }
    let ln_z = z.ln();
    let mut value = LogSum::new();
    let mut slope = LogSum::new();
    for m in 0..=top {
        let ln_c = ln_binomial(p, m) + ln_binomial(q, m);
        value.add_ln(ln_c + m as f64 * ln_z);
        if m > 0 {
            slope.add_ln(ln_c + (m as f64).ln() + (m as f64 - 1.0) * ln_z);
        }
    }
    let ln_q = value.ln();
    (ln_q, (slope.ln() - ln_q).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ln_factorial_matches_product() {
        let mut acc = 0.0f64;
        for n in 1..200usize {
            acc += (n as f64).ln();
            assert_relative_eq!(ln_factorial(n), acc, max_relative = 1e-14);
        }
        assert_eq!(ln_factorial(0), 0.0);
    }

    #[test]
    fn hyp2f1_known_closed_forms() {
        // ₂F₁(1,1;1;z) = 1/(1−z)
        for z in [0.0, 0.1, 0.5, 0.9] {
            assert_relative_eq!(hyp2f1(1.0, 1.0, 1.0, z).unwrap(), 1.0 / (1.0 - z), max_relative = 1e-13);
        }
        // ₂F₁(1,1;2;z) = −ln(1−z)/z
        let z: f64 = 0.7;
        assert_relative_eq!(
            hyp2f1(1.0, 1.0, 2.0, z).unwrap(),
            -(1.0 - z).ln() / z,
            max_relative = 1e-13
        );
        // ₂F₁(a,b;b;z) = (1−z)^{−a}
        assert_relative_eq!(
            hyp2f1(2.5, 3.0, 3.0, 0.4).unwrap(),
            0.6f64.powf(-2.5),
            max_relative = 1e-13
        );
    }

    #[test]
    fn hyp2f1_rejects_divergent_argument() {
        assert!(hyp2f1(1.0, 1.0, 1.0, 1.0).is_err());
        assert!(hyp2f1(1.0, 1.0, 1.0, -0.1).is_err());
    }

    #[test]
    fn euler_transform_agrees_with_series() {
        for &(p, q) in &[(0usize, 0usize), (1, 0), (3, 5), (12, 7), (40, 40), (150, 90)] {
            for z in [1e-6, 0.05, 0.3, 0.8] {
                let (ln_q, _) = euler_polynomial(p, q, z);
                let via_euler = ln_q - (1 + p + q) as f64 * (1.0 - z).ln();
                let direct = hyp2f1_ln(1.0 + p as f64, 1.0 + q as f64, 1.0, z).unwrap();
                assert_relative_eq!(via_euler, direct, max_relative = 1e-12, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn euler_slope_matches_difference() {
        let (p, q, z) = (9usize, 4usize, 0.37);
        let (_, slope) = euler_polynomial(p, q, z);
        let h = 1e-6;
        let fd = (euler_polynomial(p, q, z + h).0 - euler_polynomial(p, q, z - h).0) / (2.0 * h);
        assert_relative_eq!(slope, fd, max_relative = 1e-8);
        assert_eq!(euler_polynomial(3, 4, 0.0), (0.0, 12.0));
    }

    #[test]
    fn log_sum_handles_wide_range() {
        let mut s = LogSum::new();
        s.add_ln(-1000.0);
        s.add_ln(1000.0);
        s.add_ln(1000.0);
        assert_relative_eq!(s.ln(), 1000.0 + 2f64.ln(), max_relative = 1e-15);
        assert_eq!(LogSum::new().ln(), f64::NEG_INFINITY);
    }
}
