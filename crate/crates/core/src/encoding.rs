//! Pixel value <-> binary variable encodings.
//!
//! Every encoding is affine in its bits: `value = offset + sum_k w_k q_k`.
//! [`Basis`] carries that affine form and is what the QUBO builder consumes.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum EncodingSpec {
    /// `sum_k 2^k q_k`, `k = 0..bits`.
    Radix2 { bits: usize },
    /// `sum_k alpha_k q_k` over known attenuation coefficients.
    MacDirect { alphas: Vec<f64> },
    /// `alpha_1 + sum_{k>=2} (alpha_k - alpha_{k-1}) q_k`; `q_1` carries no
    /// weight and gets no variable.
    MacCumulative { alphas: Vec<f64> },
    /// `q_1 + ... + q_bits`: a monotone unit-step code with zero offset.
    UnitStep { bits: usize },
}

/// Affine bit weights for one pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct Basis {
    pub offset: f64,
    pub weights: Vec<f64>,
}

impl Basis {
    pub fn value(&self, bits: &[u8]) -> f64 {
        self.offset
            + self
                .weights
                .iter()
                .zip(bits)
                .map(|(w, &b)| if b != 0 { *w } else { 0.0 })
                .sum::<f64>()
    }

    pub fn n_vars(&self) -> usize {
        self.weights.len()
    }

    pub fn max_value(&self) -> f64 {
        self.offset + self.weights.iter().filter(|w| **w > 0.0).sum::<f64>()
    }
}

impl EncodingSpec {
    pub fn binary() -> Self {
        EncodingSpec::Radix2 { bits: 1 }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            EncodingSpec::Radix2 { bits } | EncodingSpec::UnitStep { bits } => {
                if *bits == 0 {
                    return Err(invalid("encoding needs at least one bit"));
                }
                if *bits > 30 {
                    return Err(invalid(format!("{bits} bits per pixel is unreasonable")));
                }
            }
            EncodingSpec::MacDirect { alphas } | EncodingSpec::MacCumulative { alphas } => {
                if alphas.is_empty() {
                    return Err(invalid("attenuation list is empty"));
                }
                if alphas.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
                    return Err(invalid("attenuation coefficients must be positive"));
                }
                if alphas.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(invalid("attenuation coefficients must be strictly increasing"));
                }
            }
        }
        Ok(())
    }

    /// Declared bit count `m` of the code.
    pub fn bits_per_pixel(&self) -> usize {
        match self {
            EncodingSpec::Radix2 { bits } | EncodingSpec::UnitStep { bits } => *bits,
            EncodingSpec::MacDirect { alphas } | EncodingSpec::MacCumulative { alphas } => alphas.len(),
        }
    }

    pub fn basis(&self) -> Result<Basis> {
        self.validate()?;
        Ok(match self {
            EncodingSpec::Radix2 { bits } => Basis {
                offset: 0.0,
                weights: (0..*bits).map(|k| (1u64 << k) as f64).collect(),
            },
            EncodingSpec::UnitStep { bits } => Basis { offset: 0.0, weights: vec![1.0; *bits] },
            EncodingSpec::MacDirect { alphas } => Basis { offset: 0.0, weights: alphas.clone() },
            EncodingSpec::MacCumulative { alphas } => Basis {
                offset: alphas[0],
                weights: alphas.windows(2).map(|w| w[1] - w[0]).collect(),
            },
        })
    }

    /// Decodes a full `m`-bit pattern.
    pub fn decode(&self, bits: &[u8]) -> Result<f64> {
        if bits.len() != self.bits_per_pixel() {
            return Err(invalid(format!(
                "expected {} bits, got {}",
                self.bits_per_pixel(),
                bits.len()
            )));
        }
        let basis = self.basis()?;
        let var_bits = match self {
            EncodingSpec::MacCumulative { .. } => &bits[1..],
            _ => bits,
        };
        Ok(basis.value(var_bits))
    }

    /// Values the code can represent, ascending and deduplicated.
    pub fn representable_values(&self) -> Result<Vec<f64>> {
        let basis = self.basis()?;
        let n = basis.n_vars();
        if n > 16 {
            return Err(invalid("too many bits to enumerate"));
        }
        let mut vals: Vec<f64> = (0..1u32 << n)
            .map(|mask| {
                let bits: Vec<u8> = (0..n).map(|k| ((mask >> k) & 1) as u8).collect();
                basis.value(&bits)
            })
            .collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        Ok(vals)
    }

    /// Variable bits (no placeholder for a weightless `q_1`) reproducing
    /// `value` exactly, if any. Radix-2 codes are unique; for the others the
    /// lowest-index pattern is returned.
    pub fn encode(&self, value: f64) -> Result<Option<Vec<u8>>> {
        let basis = self.basis()?;
        let n = basis.n_vars();
        match self {
            EncodingSpec::Radix2 { .. } => {
                if value < 0.0 || value.fract() != 0.0 || value >= (1u64 << n) as f64 {
                    return Ok(None);
                }
                let v = value as u64;
                Ok(Some((0..n).map(|k| ((v >> k) & 1) as u8).collect()))
            }
            EncodingSpec::UnitStep { .. } => {
                if value < 0.0 || value.fract() != 0.0 || value > n as f64 {
                    return Ok(None);
                }
                let v = value as usize;
                Ok(Some((0..n).map(|k| u8::from(k < v)).collect()))
            }
            _ => {
                if n > 20 {
                    return Err(invalid("too many bits to search"));
                }
                Ok((0..1u32 << n)
                    .map(|mask| (0..n).map(|k| ((mask >> k) & 1) as u8).collect::<Vec<_>>())
                    .find(|bits| (basis.value(bits) - value).abs() < 1e-12))
            }
        }
    }
}
