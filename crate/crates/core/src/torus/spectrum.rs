//! Field specifications: symbolic trig polynomials in config, and the JSON
//! spectrum format `[k-tuple, re, im]`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::FourierField;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrigKind {
    Cos,
    Sin,
}

/// `coefficient · cos(2π k·y)` or `coefficient · sin(2π k·y)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrigTerm {
    pub coefficient: f64,
    pub k: Vec<i64>,
    pub kind: TrigKind,
}

/// A scalar field declared as a sum of trig terms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    /// Table bandlimit; defaults to the largest |k|∞ among the terms.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandlimit: Option<i64>,
    pub terms: Vec<TrigTerm>,
}

impl FieldSpec {
    pub fn constant(value: f64, m: usize) -> Self {
        Self { bandlimit: None, terms: vec![TrigTerm { coefficient: value, k: vec![0; m], kind: TrigKind::Cos }] }
    }

    pub fn build(&self, m: usize) -> Result<FourierField> {
        if self.terms.is_empty() {
            return Err(Error::InvalidField("trig polynomial has no terms".into()));
        }
        let needed = self.terms.iter().flat_map(|t| t.k.iter().map(|v| v.abs())).max().unwrap_or(0);
        let bandlimit = self.bandlimit.unwrap_or(needed);
        if bandlimit < needed {
            return Err(Error::InvalidField(format!("bandlimit {bandlimit} below the largest term mode {needed}")));
        }
        let mut f = FourierField::zeros(m, bandlimit, 1);
        for t in &self.terms {
            if t.k.len() != m {
                return Err(Error::Dimension(format!("trig term mode {:?} is not in Z^{m}", t.k)));
            }
            if !t.coefficient.is_finite() {
                return Err(Error::InvalidField("non-finite trig coefficient".into()));
            }
            let zero = t.k.iter().all(|&v| v == 0);
            let add = match (t.kind, zero) {
                (TrigKind::Cos, true) => Complex64::new(t.coefficient, 0.0),
                (TrigKind::Sin, true) => Complex64::new(0.0, 0.0),
                (TrigKind::Cos, false) => Complex64::new(t.coefficient / 2.0, 0.0),
                (TrigKind::Sin, false) => Complex64::new(0.0, -t.coefficient / 2.0),
            };
            let cur = f.coeff(&t.k, 0);
            f.set_mode(&t.k, 0, cur + add)?;
        }
        Ok(f)
    }
}

/// JSON spectrum: per component, the nonzero modes as `[k, re, im]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumJson {
    pub m: usize,
    pub bandlimit: i64,
    pub components: Vec<Vec<(Vec<i64>, f64, f64)>>,
}

impl SpectrumJson {
    pub fn from_field(f: &FourierField) -> Self {
        let idx = f.indexer();
        let components = (0..f.value_dim())
            .map(|c| {
                f.component(c)
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| v.re != 0.0 || v.im != 0.0)
                    .map(|(i, v)| (idx.mode(i), v.re, v.im))
                    .collect()
            })
            .collect();
        Self { m: f.m(), bandlimit: f.bandlimit(), components }
    }

    pub fn to_field(&self) -> Result<FourierField> {
        let mut f = FourierField::zeros(self.m, self.bandlimit, self.components.len().max(1));
        let count = f.mode_count();
        let mut raw = f.coeffs().to_vec();
        for (c, modes) in self.components.iter().enumerate() {
            for (k, re, im) in modes {
                if !f.indexer().contains(k) {
                    return Err(Error::InvalidField(format!("mode {k:?} outside bandlimit {}", self.bandlimit)));
                }
                raw[c * count + f.indexer().index(k)] = Complex64::new(*re, *im);
            }
        }
        f = FourierField::from_coeffs(self.m, self.bandlimit, self.components.len().max(1), raw)?;
        Ok(f)
    }
}
