//! Factorial-type helpers evaluated in log space.

use statrs::function::gamma::ln_gamma as statrs_ln_gamma;

/// Natural log of Γ(x) for x > 0.
///
/// Integer and half-integer arguments are summed exactly in log space so the
/// normalisation constants of the harmonics do not pick up the Lanczos error.
pub fn ln_gamma(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    let twice = 2.0 * x;
    if twice.fract() == 0.0 && twice <= 400.0 {
        let n = twice as u64;
        if n.is_multiple_of(2) {
            return ln_factorial(n / 2 - 1);
        }
        // Γ(k + 1/2) = (2k)! √π / (4^k k!)
        let k = (n - 1) / 2;
        return ln_factorial(2 * k) + 0.5 * std::f64::consts::PI.ln()
            - (k as f64) * 4f64.ln()
            - ln_factorial(k);
    }
    statrs_ln_gamma(x)
}

/// ln(n!)
pub fn ln_factorial(n: u64) -> f64 {
    if n < 2 {
        return 0.0;
    }
    if n <= 170 {
        (2..=n).map(|k| (k as f64).ln()).sum()
    } else {
        statrs_ln_gamma(n as f64 + 1.0)
    }
}

/// n! as a float (exact for n ≤ 22).
pub fn factorial(n: u64) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// Double factorial with the conventions (−1)!! = 0!! = 1.
pub fn double_factorial(n: i64) -> f64 {
    if n <= 0 {
        return 1.0;
    }
    let mut acc = 1.0;
    let mut k = n;
    while k > 1 {
        acc *= k as f64;
        k -= 2;
    }
    acc
}

/// Binomial coefficient in exact integer arithmetic.
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Neumaier compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &KahanSum) {
        self.add(other.sum);
        self.add(other.comp);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(items: I) -> f64 {
    let mut acc = KahanSum::new();
    for x in items {
        acc.add(x);
    }
    acc.value()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn half_integer_gamma_matches_closed_form() {
        // Γ(1/2) = √π, Γ(5/2) = 3√π/4
        let sqrt_pi = std::f64::consts::PI.sqrt();
        assert_relative_eq!(ln_gamma(0.5).exp(), sqrt_pi, max_relative = 1e-15);
        assert_relative_eq!(ln_gamma(2.5).exp(), 0.75 * sqrt_pi, max_relative = 1e-15);
        assert_relative_eq!(ln_gamma(6.0).exp(), 120.0, max_relative = 1e-15);
    }

    #[test]
    fn generic_gamma_agrees_with_statrs() {
        for &x in &[0.3, 1.7, 3.25, 9.9] {
            assert_relative_eq!(ln_gamma(x), statrs_ln_gamma(x), max_relative = 1e-14);
        }
    }

    #[test]
    fn double_factorial_conventions() {
        assert_eq!(double_factorial(-1), 1.0);
        assert_eq!(double_factorial(0), 1.0);
        assert_eq!(double_factorial(5), 15.0);
        assert_eq!(double_factorial(6), 48.0);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(5, 2), 10);
        assert_eq!(binomial(3, 5), 0);
        assert_eq!(binomial(40, 20), 137_846_528_820);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let xs = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(xs), 2.0);
    }
}
