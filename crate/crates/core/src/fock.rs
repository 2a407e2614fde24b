//! Occupation bases with fixed particle numbers.
//!
//! A configuration is stored as the base-3 integer `sum_k s_k 3^k` over the
//! volume's canonical site order, with symbol codes empty = 0, a = 1, b = 2.

use serde::{Deserialize, Serialize};

use crate::defaults;
use crate::error::{invalid, PvbsError, Result};
use crate::lattice::Volume;

/// Largest site count whose configurations fit in a `u64` code.
pub const MAX_SITES: usize = 40;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Symbol {
    Empty = 0,
    A = 1,
    B = 2,
}

impl Symbol {
    pub fn from_code(c: u64) -> Symbol {
        match c {
            0 => Symbol::Empty,
            1 => Symbol::A,
            _ => Symbol::B,
        }
    }

    pub fn glyph(self) -> char {
        match self {
            Symbol::Empty => '·',
            Symbol::A => 'a',
            Symbol::B => 'b',
        }
    }
}

/// `3^k` for `k <= MAX_SITES`.
pub fn pow3(k: usize) -> u64 {
    3u64.pow(k as u32)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Configuration(pub u64);

impl Configuration {
    pub fn from_symbols(symbols: &[Symbol]) -> Configuration {
        Configuration(symbols.iter().rev().fold(0, |acc, &s| acc * 3 + s as u64))
    }

    pub fn symbol(self, k: usize) -> Symbol {
        Symbol::from_code(self.0 / pow3(k) % 3)
    }

    pub fn symbols(self, n_sites: usize) -> Vec<Symbol> {
        (0..n_sites).map(|k| self.symbol(k)).collect()
    }

    /// `(N_a, N_b)`.
    pub fn counts(self) -> (usize, usize) {
        let (mut a, mut b, mut c) = (0, 0, self.0);
        while c > 0 {
            match c % 3 {
                1 => a += 1,
                2 => b += 1,
                _ => {}
            }
            c /= 3;
        }
        (a, b)
    }

    /// Glyph string in site order, e.g. `a·b`.
    pub fn render(self, n_sites: usize) -> String {
        self.symbols(n_sites).into_iter().map(Symbol::glyph).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SectorLabel {
    pub n_a: usize,
    pub n_b: usize,
}

impl SectorLabel {
    pub fn new(n_a: usize, n_b: usize) -> Self {
        SectorLabel { n_a, n_b }
    }
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// `n! / (N_a! N_b! (n - N_a - N_b)!)`.
pub fn sector_dimension(n: usize, n_a: usize, n_b: usize) -> Result<u128> {
    if n_a + n_b > n {
        return invalid(format!("sector ({n_a},{n_b}) does not fit in {n} sites"));
    }
    Ok(binomial(n, n_a + n_b) * binomial(n_a + n_b, n_a))
}

/// All sector labels for `n` sites, in lexicographic order.
pub fn all_sectors(n: usize) -> Vec<SectorLabel> {
    (0..=n)
        .flat_map(|a| (0..=n - a).map(move |b| SectorLabel::new(a, b)))
        .collect()
}

/// Sorted configurations of one sector on a volume.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SectorBasis {
    n_sites: usize,
    volume_label: String,
    label: SectorLabel,
    states: Vec<Configuration>,
}

impl SectorBasis {
    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn volume_label(&self) -> &str {
        &self.volume_label
    }

    pub fn label(&self) -> SectorLabel {
        self.label
    }

    pub fn states(&self) -> &[Configuration] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn index_of(&self, c: Configuration) -> Result<usize> {
        self.states.binary_search(&c).map_err(|_| PvbsError::NotInSector {
            n_a: self.label.n_a,
            n_b: self.label.n_b,
        })
    }
}

/// Checks that `n` sites can be encoded.
pub fn check_encodable(n: usize) -> Result<()> {
    if n > MAX_SITES {
        return Err(PvbsError::DimensionCap {
            dim: 3u128.pow(n.min(80) as u32),
            cap: 3u128.pow(MAX_SITES as u32),
        });
    }
    Ok(())
}

pub fn enumerate_sector(v: &Volume, label: SectorLabel) -> Result<SectorBasis> {
    enumerate_sector_capped(v, label, defaults::SECTOR_CAP)
}

pub fn enumerate_sector_capped(v: &Volume, label: SectorLabel, cap: u128) -> Result<SectorBasis> {
    let n = v.len();
    let dim = sector_dimension(n, label.n_a, label.n_b)?;
    if dim > cap {
        return Err(PvbsError::DimensionCap { dim, cap });
    }
    check_encodable(n)?;
    let mut states = Vec::with_capacity(dim as usize);
    let mut symbols = vec![Symbol::Empty; n];
    fill(&mut symbols, 0, label.n_a, label.n_b, &mut states);
    states.sort_unstable();
    Ok(SectorBasis {
        n_sites: n,
        volume_label: v.label().to_string(),
        label,
        states,
    })
}

fn fill(symbols: &mut [Symbol], k: usize, a: usize, b: usize, out: &mut Vec<Configuration>) {
    if a + b > symbols.len() - k {
        return;
    }
    if k == symbols.len() {
        out.push(Configuration::from_symbols(symbols));
        return;
    }
    for (s, da, db) in [(Symbol::Empty, 0, 0), (Symbol::A, 1, 0), (Symbol::B, 0, 1)] {
        if da <= a && db <= b {
            symbols[k] = s;
            fill(symbols, k + 1, a - da, b - db, out);
        }
    }
    symbols[k] = Symbol::Empty;
}
