//! Periodic coefficient functions: truncated Fourier series with exact
//! derivatives, plus an opaque-callable escape hatch for custom models.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

/// `a0 + sum_j cos[j-1] cos(2 pi j x / T) + sin[j-1] sin(2 pi j x / T)`.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct FourierSeries {
    #[serde(default)]
    pub constant: f64,
    #[serde(default)]
    pub cos: Vec<f64>,
    #[serde(default)]
    pub sin: Vec<f64>,
    pub period: f64,
}

impl FourierSeries {
    pub fn cosine(amplitude: f64, period: f64) -> Self {
        FourierSeries {
            constant: 0.0,
            cos: vec![amplitude],
            sin: vec![],
            period,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let w = 2.0 * std::f64::consts::PI / self.period;
        let mut v = self.constant;
        for (j, c) in self.cos.iter().enumerate() {
            v += c * ((j + 1) as f64 * w * x).cos();
        }
        for (j, s) in self.sin.iter().enumerate() {
            v += s * ((j + 1) as f64 * w * x).sin();
        }
        v
    }

    pub fn deriv(&self, x: f64) -> f64 {
        let w = 2.0 * std::f64::consts::PI / self.period;
        let mut v = 0.0;
        for (j, c) in self.cos.iter().enumerate() {
            let k = (j + 1) as f64 * w;
            v -= c * k * (k * x).sin();
        }
        for (j, s) in self.sin.iter().enumerate() {
            let k = (j + 1) as f64 * w;
            v += s * k * (k * x).cos();
        }
        v
    }

    pub fn second_deriv(&self, x: f64) -> f64 {
        let w = 2.0 * std::f64::consts::PI / self.period;
        let mut v = 0.0;
        for (j, c) in self.cos.iter().enumerate() {
            let k = (j + 1) as f64 * w;
            v -= c * k * k * (k * x).cos();
        }
        for (j, s) in self.sin.iter().enumerate() {
            let k = (j + 1) as f64 * w;
            v -= s * k * k * (k * x).sin();
        }
        v
    }
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A T-periodic scalar coefficient: Fourier data or an opaque callable.
#[derive(Clone)]
pub enum Potential {
    Fourier(FourierSeries),
    Callable {
        period: f64,
        f: ScalarFn,
        /// Analytic derivative if available; otherwise central differences.
        df: Option<ScalarFn>,
    },
}

impl std::fmt::Debug for Potential {
    fn fmt(&self, fm: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Potential::Fourier(s) => fm.debug_tuple("Fourier").field(s).finish(),
            Potential::Callable { period, .. } => {
                fm.debug_struct("Callable").field("period", period).finish()
            }
        }
    }
}

impl Potential {
    pub fn cosine(amplitude: f64, period: f64) -> Self {
        Potential::Fourier(FourierSeries::cosine(amplitude, period))
    }

    pub fn zero(period: f64) -> Self {
        Potential::Fourier(FourierSeries {
            constant: 0.0,
            cos: vec![],
            sin: vec![],
            period,
        })
    }

    pub fn constant(value: f64, period: f64) -> Self {
        Potential::Fourier(FourierSeries {
            constant: value,
            cos: vec![],
            sin: vec![],
            period,
        })
    }

    pub fn period(&self) -> f64 {
        match self {
            Potential::Fourier(s) => s.period,
            Potential::Callable { period, .. } => *period,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Potential::Fourier(s) => s.eval(x),
            Potential::Callable { f, .. } => f(x),
        }
    }

    pub fn deriv(&self, x: f64) -> f64 {
        match self {
            Potential::Fourier(s) => s.deriv(x),
            Potential::Callable { f, df, .. } => match df {
                Some(d) => d(x),
                None => {
                    let h = 1e-6;
                    (f(x + h) - f(x - h)) / (2.0 * h)
                }
            },
        }
    }

    pub fn second_deriv(&self, x: f64) -> f64 {
        match self {
            Potential::Fourier(s) => s.second_deriv(x),
            Potential::Callable { f, .. } => {
                let h = 1e-4;
                (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_pi_x() {
        // V(x) = cos(pi x) has period 2
        let v = FourierSeries::cosine(1.0, 2.0);
        for x in [-1.3, 0.0, 0.7, 5.2] {
            assert!((v.eval(x) - (std::f64::consts::PI * x).cos()).abs() < 1e-14);
            assert!(
                (v.deriv(x) + std::f64::consts::PI * (std::f64::consts::PI * x).sin()).abs()
                    < 1e-13
            );
        }
    }

    #[test]
    fn periodicity() {
        let v = FourierSeries {
            constant: 0.3,
            cos: vec![0.5, -0.2],
            sin: vec![0.1],
            period: 1.7,
        };
        for x in [0.0, 0.33, 1.1] {
            assert!((v.eval(x) - v.eval(x + 1.7)).abs() < 1e-13);
        }
    }
}
