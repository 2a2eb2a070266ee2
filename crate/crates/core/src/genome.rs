use std::fmt;

use crate::error::{Error, Result};

/// On/off flags for each intervention zone; gene `j` controls zone `j + 1`.
///
/// The hex form reads the genome as an integer whose bit `j` is gene `j`,
/// printed most-significant digit first with `ceil(n/4)` digits.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Genome(Vec<bool>);

impl Genome {
    pub fn zeros(n: usize) -> Self {
        Genome(vec![false; n])
    }

    pub fn ones(n: usize) -> Self {
        Genome(vec![true; n])
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        Genome(bits)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, j: usize) -> bool {
        self.0[j]
    }

    pub fn set(&mut self, j: usize, on: bool) {
        self.0[j] = on;
    }

    pub fn flip(&mut self, j: usize) {
        self.0[j] = !self.0[j];
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn is_baseline(&self) -> bool {
        !self.0.iter().any(|&b| b)
    }

    pub fn is_max_intervention(&self) -> bool {
        self.0.iter().all(|&b| b)
    }

    pub fn active_zones(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().filter(|(_, &b)| b).map(|(j, _)| j)
    }

    pub fn to_hex(&self) -> String {
        let digits = self.0.len().div_ceil(4).max(1);
        (0..digits)
            .rev()
            .map(|d| {
                let nibble = (0..4).fold(0u32, |acc, k| {
                    let j = 4 * d + k;
                    acc | (u32::from(self.0.get(j).copied().unwrap_or(false)) << k)
                });
                char::from_digit(nibble, 16).unwrap()
            })
            .collect()
    }

    /// Parses a hex bitmask for `n` zones. Bits at or above `n` must be zero.
    pub fn from_hex(hex: &str, n: usize) -> Result<Self> {
        let s = hex.trim();
        let s = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")).unwrap_or(s);
        if s.is_empty() {
            return Err(Error::Input("empty genome hex".into()));
        }
        let mut bits = vec![false; n];
        for (d, ch) in s.chars().rev().enumerate() {
            let nibble = ch
                .to_digit(16)
                .ok_or_else(|| Error::Input(format!("invalid hex digit {ch:?} in genome {hex}")))?;
            for k in 0..4 {
                if nibble >> k & 1 == 1 {
                    let j = 4 * d + k;
                    if j >= n {
                        return Err(Error::Input(format!(
                            "genome {hex} sets zone {} but only {n} zones exist",
                            j + 1
                        )));
                    }
                    bits[j] = true;
                }
            }
        }
        Ok(Genome(bits))
    }
}

impl fmt::Debug for Genome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Genome({})", self.to_hex())
    }
}
