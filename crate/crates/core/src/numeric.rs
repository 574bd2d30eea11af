//! Binomials and compensated summation.

use statrs::function::gamma::ln_gamma;

/// Largest n for which binomials are computed exactly in 128-bit integers.
pub const EXACT_BINOMIAL_MAX: u64 = 60;

pub fn binomial_u128(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // exact at every step: acc * (n - i) is divisible by (i + 1)
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

pub fn ln_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

pub fn binomial(n: u64, k: u64) -> f64 {
    if k > n {
        0.0
    } else if n <= EXACT_BINOMIAL_MAX {
        binomial_u128(n, k) as f64
    } else {
        ln_binomial(n, k).exp()
    }
}

/// `C(k, t) p^t q^(k-t)`, evaluated in log space for large k.
pub fn binomial_term(k: u64, t: u64, p: f64, q: f64) -> f64 {
    if t > k {
        return 0.0;
    }
    if k <= EXACT_BINOMIAL_MAX {
        return binomial(k, t) * p.powi(t as i32) * q.powi((k - t) as i32);
    }
    if (p == 0.0 && t > 0) || (q == 0.0 && t < k) {
        return 0.0;
    }
    let lp = if t == 0 { 0.0 } else { t as f64 * p.ln() };
    let lq = if t == k { 0.0 } else { (k - t) as f64 * q.ln() };
    (ln_binomial(k, t) + lp + lq).exp()
}

/// Multinomial probability of splitting `counts.iter().sum()` objects into
/// the given counts with per-object probabilities `probs`.
pub fn multinomial_term(counts: &[u64], probs: &[f64]) -> f64 {
    let mut remaining: u64 = counts.iter().sum();
    let mut acc = 1.0;
    for (&c, &p) in counts.iter().zip(probs) {
        if c == 0 {
            continue;
        }
        if p == 0.0 {
            return 0.0;
        }
        acc *= binomial_term(remaining, c, p, 1.0) ;
        remaining -= c;
    }
    acc
}

#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let y = x - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

impl FromIterator<f64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut k = KahanSum::new();
        for x in iter {
            k.add(x);
        }
        k
    }
}

pub fn kahan_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<KahanSum>().value()
}
