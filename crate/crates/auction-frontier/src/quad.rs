//! Adaptive double-exponential (tanh-sinh) quadrature.
//!
//! Nodes cluster doubly-exponentially at both ends of the interval, so integrable
//! endpoint singularities such as `ln q` or `q^{-1/2}` converge without special
//! handling. Intervals that fail to converge are bisected.

use crate::math::{cosh, exp, sinh, PI};

/// Settings for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct Quadrature {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_level: u32,
    pub max_depth: u32,
}

impl Default for Quadrature {
    fn default() -> Self {
        Quadrature {
            rel_tol: 1e-12,
            abs_tol: 1e-15,
            max_level: 8,
            max_depth: 14,
        }
    }
}

/// Result of an integration: the estimate plus a conservative error bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

const T_MAX: f64 = 4.0;

/// Integrate `f` over `[a, b]` with default settings.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    Quadrature::default().run(&f, a, b).value
}

impl Quadrature {
    pub fn run<F: Fn(f64) -> f64>(&self, f: &F, a: f64, b: f64) -> Estimate {
        if !(b > a) {
            return Estimate { value: 0.0, error: 0.0 };
        }
        self.adaptive(f, a, b, 0)
    }

    fn adaptive<F: Fn(f64) -> f64>(&self, f: &F, a: f64, b: f64, depth: u32) -> Estimate {
        let (est, converged) = self.single(f, a, b);
        if converged || depth >= self.max_depth {
            return est;
        }
        let mid = 0.5 * (a + b);
        if !(mid > a && mid < b) {
            return est;
        }
        let left = self.adaptive(f, a, mid, depth + 1);
        let right = self.adaptive(f, mid, b, depth + 1);
        Estimate {
            value: left.value + right.value,
            error: left.error + right.error,
        }
    }

    fn single<F: Fn(f64) -> f64>(&self, f: &F, a: f64, b: f64) -> (Estimate, bool) {
        let half = 0.5 * (b - a);
        let centre = 0.5 * (a + b);
        // Contribution of a node pair at parameter t (t > 0) or the centre node (t = 0).
        let node = |t: f64| -> f64 {
            let u = 0.5 * PI * sinh(t);
            let e2u = exp(-2.0 * u.abs());
            // 1 - |x| where x = tanh(u), computed without cancellation.
            let gap = 2.0 * e2u / (1.0 + e2u);
            let ch = cosh(u);
            let w = 0.5 * PI * cosh(t) / (ch * ch);
            if t == 0.0 {
                return w * f(centre);
            }
            let d = half * gap;
            let mut s = 0.0;
            let xl = a + d;
            if xl > a && xl < b {
                s += f(xl);
            }
            let xr = b - d;
            if xr > a && xr < b {
                s += f(xr);
            }
            w * s
        };

        let mut h = 1.0;
        let mut sum = node(0.0);
        let mut k = 1.0;
        while k * h <= T_MAX {
            sum += node(k * h);
            k += 1.0;
        }
        let mut prev = half * h * sum;
        let mut err = f64::INFINITY;
        for level in 1..=self.max_level {
            h *= 0.5;
            let mut add = 0.0;
            let mut t = h;
            while t <= T_MAX {
                add += node(t);
                t += 2.0 * h;
            }
            sum += add;
            let cur = half * h * sum;
            err = (cur - prev).abs();
            if level >= 3 && (err <= self.rel_tol * cur.abs() || err <= self.abs_tol) {
                return (Estimate { value: cur, error: err }, true);
            }
            if !cur.is_finite() {
                return (Estimate { value: cur, error: f64::INFINITY }, true);
            }
            prev = cur;
        }
        (Estimate { value: prev, error: err }, false)
    }
}
