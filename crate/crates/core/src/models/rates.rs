use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Site-indexed non-negative sequence (birth, death rates, line weights).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateSeq {
    Const(f64),
    /// `a + b x`
    Linear { a: f64, b: f64 },
    /// `a + b x + c x^2`
    Quadratic { a: f64, b: f64, c: f64 },
    /// `scale * ratio^x`
    Geometric { scale: f64, ratio: f64 },
    /// Explicit values for `x = 0, 1, ...`
    Values(Vec<f64>),
}

impl RateSeq {
    /// Value at `x`. Panics past the end of an explicit list; call
    /// [`RateSeq::check`] first.
    pub fn at(&self, x: usize) -> f64 {
        let t = x as f64;
        match self {
            RateSeq::Const(c) => *c,
            RateSeq::Linear { a, b } => a + b * t,
            RateSeq::Quadratic { a, b, c } => a + b * t + c * t * t,
            RateSeq::Geometric { scale, ratio } => scale * ratio.powi(x as i32),
            RateSeq::Values(v) => v[x],
        }
    }

    /// Checks the sequence is defined, finite and non-negative on `lo..=hi`
    /// (strictly positive when `positive`).
    pub fn check(&self, name: &str, lo: usize, hi: usize, positive: bool) -> Result<()> {
        if let RateSeq::Values(v) = self {
            if v.len() <= hi {
                return Err(Error::InvalidModel(format!("{name} lists {} values, needs {}", v.len(), hi + 1)));
            }
        }
        for x in lo..=hi {
            let r = self.at(x);
            if !r.is_finite() || r < 0.0 || (positive && r == 0.0) {
                return Err(Error::InvalidModel(format!("{name}[{x}] = {r} is out of range")));
            }
        }
        Ok(())
    }
}

/// Polynomial `sum_k c_k z^k`, used for the agents' preference function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidModel("non-finite polynomial coefficient".into()));
        }
        Ok(Self { coeffs })
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    /// `a z + b`.
    pub fn affine(a: f64, b: f64) -> Self {
        Self { coeffs: vec![b, a] }
    }

    /// `z^k`.
    pub fn monomial(k: usize) -> Self {
        let mut coeffs = vec![0.0; k + 1];
        coeffs[k] = 1.0;
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn eval(&self, z: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * z + c)
    }

    pub fn derivative(&self) -> Self {
        Self { coeffs: self.coeffs.iter().enumerate().skip(1).map(|(k, c)| k as f64 * c).collect() }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.iter().rposition(|&c| c != 0.0).unwrap_or(0)
    }
}
