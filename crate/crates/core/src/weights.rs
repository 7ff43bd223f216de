use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Unconstrained,
    UnitModulus,
    Quantized { levels: usize },
}

impl Regime {
    pub fn tag(&self) -> String {
        match self {
            Regime::Unconstrained => "unconstrained".into(),
            Regime::UnitModulus => "unit-modulus".into(),
            Regime::Quantized { levels } => format!("quantized-{levels}"),
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "unconstrained" => Some(Regime::Unconstrained),
            "unit-modulus" => Some(Regime::UnitModulus),
            _ => tag
                .strip_prefix("quantized-")
                .and_then(|m| m.parse().ok())
                .filter(|&m: &usize| m >= 2)
                .map(|levels| Regime::Quantized { levels }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    values: Vec<Complex64>,
    regime: Regime,
}

impl WeightVector {
    pub fn new(values: Vec<Complex64>, regime: Regime) -> Self {
        Self { values, regime }
    }

    /// Quiescent weights: every element on.
    pub fn ones(n: usize) -> Self {
        Self::new(vec![Complex64::new(1.0, 0.0); n], Regime::UnitModulus)
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// M equally spaced phases e^{j 2 pi k / M}, k = 1..M. Index i in 0..M stands
/// for k = i + 1, so the last index is the phase 0 value.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseAlphabet {
    values: Vec<Complex64>,
}

impl PhaseAlphabet {
    pub fn new(levels: usize) -> Result<Self> {
        if levels < 2 || levels > u16::MAX as usize {
            return Err(Error::InvalidArgument(format!("alphabet needs at least 2 levels, got {levels}")));
        }
        let values = (1..=levels)
            .map(|k| {
                if k == levels {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::from_polar(1.0, TAU * k as f64 / levels as f64)
                }
            })
            .collect();
        Ok(Self { values })
    }

    pub fn levels(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn value(&self, index: u16) -> Complex64 {
        self.values[index as usize]
    }

    /// Index of the unit weight (k = M).
    pub fn unity_index(&self) -> u16 {
        (self.levels() - 1) as u16
    }

    /// Index of the alphabet value nearest in phase to `z`.
    pub fn nearest(&self, z: Complex64) -> u16 {
        let m = self.levels() as f64;
        let k = (z.arg() / TAU * m).round().rem_euclid(m) as usize;
        // k = 0 is the phase-0 value, stored last
        if k == 0 {
            self.unity_index()
        } else {
            (k - 1) as u16
        }
    }

    pub fn random_index<R: Rng + ?Sized>(&self, rng: &mut R) -> u16 {
        rng.random_range(0..self.levels()) as u16
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedWeights {
    alphabet: PhaseAlphabet,
    indices: Vec<u16>,
}

impl QuantizedWeights {
    pub fn new(alphabet: PhaseAlphabet, indices: Vec<u16>) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i as usize >= alphabet.levels()) {
            return Err(Error::InvalidArgument(format!(
                "phase index {bad} outside a {}-level alphabet",
                alphabet.levels()
            )));
        }
        Ok(Self { alphabet, indices })
    }

    pub fn uniform(alphabet: PhaseAlphabet, n: usize, index: u16) -> Result<Self> {
        Self::new(alphabet, vec![index; n])
    }

    pub fn random<R: Rng + ?Sized>(alphabet: PhaseAlphabet, n: usize, rng: &mut R) -> Self {
        let indices = (0..n).map(|_| alphabet.random_index(rng)).collect();
        Self { alphabet, indices }
    }

    pub fn alphabet(&self) -> &PhaseAlphabet {
        &self.alphabet
    }

    pub fn indices(&self) -> &[u16] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn values(&self) -> Vec<Complex64> {
        self.indices.iter().map(|&i| self.alphabet.value(i)).collect()
    }

    pub fn to_weights(&self) -> WeightVector {
        WeightVector::new(self.values(), Regime::Quantized { levels: self.alphabet.levels() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alphabet_is_unit_and_distinct() {
        for m in 2..=16 {
            let a = PhaseAlphabet::new(m).unwrap();
            for (i, v) in a.values().iter().enumerate() {
                assert!((v.norm() - 1.0).abs() < 1e-15);
                for w in &a.values()[i + 1..] {
                    assert!((v - w).norm() > 1e-3);
                }
            }
            assert_eq!(a.value(a.unity_index()), Complex64::new(1.0, 0.0));
        }
        let b = PhaseAlphabet::new(2).unwrap();
        assert!((b.value(0) + 1.0).norm() < 1e-15);
        assert!(PhaseAlphabet::new(1).is_err());
    }

    #[test]
    fn nearest_round_trips() {
        let a = PhaseAlphabet::new(8).unwrap();
        for i in 0..8u16 {
            assert_eq!(a.nearest(a.value(i) * 0.3), i);
        }
    }

    #[test]
    fn regime_tags_round_trip() {
        for r in [Regime::Unconstrained, Regime::UnitModulus, Regime::Quantized { levels: 4 }] {
            assert_eq!(Regime::from_tag(&r.tag()), Some(r));
        }
        assert_eq!(Regime::from_tag("quantized-1"), None);
    }
}
