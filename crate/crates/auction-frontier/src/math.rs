//! Thin wrappers over `libm` so the numeric core builds without `std`.

pub const PI: f64 = core::f64::consts::PI;
pub const E: f64 = core::f64::consts::E;

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn ln1p(x: f64) -> f64 {
    libm::log1p(x)
}

#[inline]
pub fn expm1(x: f64) -> f64 {
    libm::expm1(x)
}

#[inline]
pub fn powf(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

#[inline]
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

#[inline]
pub fn sinh(x: f64) -> f64 {
    libm::sinh(x)
}

#[inline]
pub fn cosh(x: f64) -> f64 {
    libm::cosh(x)
}

#[inline]
pub fn floor(x: f64) -> f64 {
    libm::floor(x)
}

/// `(1 - q)^k` evaluated through `log1p` so that tiny `q` and huge `k` stay accurate.
#[inline]
pub fn pow_one_minus(q: f64, k: f64) -> f64 {
    if k == 0.0 {
        return 1.0;
    }
    if q >= 1.0 {
        return 0.0;
    }
    exp(k * ln1p(-q))
}

/// `1 - (1 - q)^k` without cancellation for small `q`.
#[inline]
pub fn one_minus_pow_one_minus(q: f64, k: f64) -> f64 {
    if q >= 1.0 {
        return 1.0;
    }
    -expm1(k * ln1p(-q))
}

/// `(1 - lo)^k - (1 - hi)^k` for `lo <= hi`, stable when the two are close.
#[inline]
pub fn pow_one_minus_diff(lo: f64, hi: f64, k: f64) -> f64 {
    if hi >= 1.0 {
        return pow_one_minus(lo, k);
    }
    let base = pow_one_minus(lo, k);
    if base == 0.0 {
        return 0.0;
    }
    -base * expm1(k * (ln1p(-hi) - ln1p(-lo)))
}

/// Harmonic number `H_k = 1 + 1/2 + ... + 1/k`, with `H_0 = 0`.
pub fn harmonic(k: u32) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for i in 1..=k {
        let y = 1.0 / i as f64 - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    sum
}

/// Natural log of the binomial coefficient `C(n, k)`.
pub fn ln_choose(n: u32, k: u32) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// Kahan–Babuška accumulator used wherever long sums feed a reported number.
#[derive(Debug, Clone, Copy, Default)]
pub struct Accumulator {
    sum: f64,
    comp: f64,
}

impl Accumulator {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }
}
