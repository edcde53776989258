//! Excitation-truncated bosonic Fock basis for the discretized bath.
//!
//! A bath configuration with `k` quanta is stored as the non-decreasing tuple of
//! the mode indices it occupies, packed into a `u64` with the first entry in the
//! most significant field. Sectors are laid out by increasing `k` and, inside a
//! sector, the packed keys are sorted, which is the lexicographic order of the
//! tuples. Lookup of a configuration is a binary search within its sector.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FockTruncation {
    /// Cap on the total number of bath quanta.
    pub max_excitations: usize,
    /// Optional cap on the occupation of each single mode.
    pub per_mode_cap: Option<usize>,
}

impl FockTruncation {
    pub fn new(max_excitations: usize, per_mode_cap: Option<usize>) -> Result<Self> {
        if per_mode_cap == Some(0) {
            return Err(Error::Config("per-mode occupation cap must be >= 1".into()));
        }
        Ok(Self { max_excitations, per_mode_cap })
    }

    pub fn global(max_excitations: usize) -> Self {
        Self { max_excitations, per_mode_cap: None }
    }

    fn effective_cap(&self) -> usize {
        self.per_mode_cap
            .unwrap_or(self.max_excitations)
            .min(self.max_excitations)
    }
}

/// Number of bath configurations admitted by `trunc` over `n_modes` modes.
///
/// Saturates at `u128::MAX`, which is only reachable for absurd inputs.
pub fn bath_dimension(n_modes: usize, trunc: &FockTruncation) -> u128 {
    let n = trunc.max_excitations;
    let cap = trunc.effective_cap();
    // counts[k] = number of occupation vectors over the modes seen so far with k quanta
    let mut counts = vec![0u128; n + 1];
    counts[0] = 1;
    for _ in 0..n_modes {
        let mut next = vec![0u128; n + 1];
        for (k, slot) in next.iter_mut().enumerate() {
            let mut acc = 0u128;
            for occ in 0..=cap.min(k) {
                acc = acc.saturating_add(counts[k - occ]);
            }
            *slot = acc;
        }
        counts = next;
    }
    counts.iter().fold(0u128, |a, &c| a.saturating_add(c))
}

/// One lowering relation `a_mode |upper⟩ = sqrt(occupation) |lower⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Removal {
    pub upper: u32,
    pub lower: u32,
    pub mode: u32,
    /// Occupation of `mode` in the upper configuration.
    pub occupation: u32,
}

#[derive(Debug, Clone)]
pub struct FockBasis {
    n_modes: usize,
    trunc: FockTruncation,
    bits: u32,
    keys: Vec<u64>,
    sector_start: Vec<usize>,
    removals: Vec<Removal>,
}

impl FockBasis {
    /// Enumerates the truncated basis; fails with [`Error::Resource`] when the
    /// number of configurations exceeds `max_states`.
    pub fn new(n_modes: usize, trunc: FockTruncation, max_states: usize) -> Result<Self> {
        let dim = bath_dimension(n_modes, &trunc);
        if dim > max_states as u128 || dim > u32::MAX as u128 {
            return Err(Error::Resource { dim, limit: max_states });
        }
        let bits = bits_for(n_modes);
        if trunc.max_excitations > 0 && (bits as usize) * trunc.max_excitations > 64 {
            return Err(Error::Config(format!(
                "{} excitations over {} modes do not fit the packed configuration key",
                trunc.max_excitations, n_modes
            )));
        }

        let cap = trunc.effective_cap();
        let mut keys = Vec::with_capacity(dim as usize);
        let mut sector_start = Vec::with_capacity(trunc.max_excitations + 2);
        for k in 0..=trunc.max_excitations {
            sector_start.push(keys.len());
            if k == 0 {
                keys.push(0);
            } else if n_modes > 0 {
                enumerate_sector(n_modes, k, cap, bits, &mut keys);
            }
        }
        sector_start.push(keys.len());
        debug_assert_eq!(keys.len() as u128, dim);

        let mut basis = Self { n_modes, trunc, bits, keys, sector_start, removals: Vec::new() };
        basis.removals = basis.build_removals();
        Ok(basis)
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn truncation(&self) -> FockTruncation {
        self.trunc
    }

    /// Number of bath configurations.
    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn vacuum_index(&self) -> usize {
        0
    }

    pub fn removals(&self) -> &[Removal] {
        &self.removals
    }

    /// Total number of quanta of configuration `index`.
    pub fn excitations(&self, index: usize) -> usize {
        self.sector_start.partition_point(|&s| s <= index) - 1
    }

    /// Occupied mode indices of configuration `index`, non-decreasing.
    pub fn modes_of(&self, index: usize) -> Vec<usize> {
        let k = self.excitations(index);
        unpack(self.keys[index], k, self.bits)
    }

    /// Occupation numbers of configuration `index`.
    pub fn occupations(&self, index: usize) -> Vec<u32> {
        let mut occ = vec![0u32; self.n_modes];
        for m in self.modes_of(index) {
            occ[m] += 1;
        }
        occ
    }

    /// Index of the configuration with the given occupation numbers, if admitted.
    pub fn index_of(&self, occupations: &[u32]) -> Option<usize> {
        if occupations.len() != self.n_modes {
            return None;
        }
        let modes: Vec<usize> = occupations
            .iter()
            .enumerate()
            .flat_map(|(m, &n)| std::iter::repeat_n(m, n as usize))
            .collect();
        let k = modes.len();
        if k > self.trunc.max_excitations {
            return None;
        }
        self.lookup(k, pack(&modes, self.bits))
    }

    fn lookup(&self, k: usize, key: u64) -> Option<usize> {
        let (lo, hi) = (self.sector_start[k], self.sector_start[k + 1]);
        self.keys[lo..hi].binary_search(&key).ok().map(|i| i + lo)
    }

    fn build_removals(&self) -> Vec<Removal> {
        let mut out = Vec::new();
        let mut tuple = Vec::with_capacity(self.trunc.max_excitations);
        for k in 1..=self.trunc.max_excitations {
            for upper in self.sector_start[k]..self.sector_start[k + 1] {
                let modes = unpack(self.keys[upper], k, self.bits);
                let mut i = 0;
                while i < k {
                    let mode = modes[i];
                    let mut j = i;
                    while j < k && modes[j] == mode {
                        j += 1;
                    }
                    tuple.clear();
                    tuple.extend_from_slice(&modes[..i]);
                    tuple.extend_from_slice(&modes[i + 1..]);
                    let lower = self
                        .lookup(k - 1, pack(&tuple, self.bits))
                        .expect("lowered configuration lies in the basis");
                    out.push(Removal {
                        upper: upper as u32,
                        lower: lower as u32,
                        mode: mode as u32,
                        occupation: (j - i) as u32,
                    });
                    i = j;
                }
            }
        }
        out
    }
}

fn bits_for(n_modes: usize) -> u32 {
    let max_index = n_modes.saturating_sub(1) as u64;
    (64 - max_index.leading_zeros()).max(1)
}

fn pack(modes: &[usize], bits: u32) -> u64 {
    modes.iter().fold(0u64, |key, &m| (key << bits) | m as u64)
}

fn unpack(key: u64, k: usize, bits: u32) -> Vec<usize> {
    let mask = (1u64 << bits) - 1;
    (0..k)
        .map(|i| ((key >> (bits as usize * (k - 1 - i))) & mask) as usize)
        .collect()
}

/// Appends the packed non-decreasing `k`-tuples over `0..n_modes` in lexicographic order.
fn enumerate_sector(n_modes: usize, k: usize, cap: usize, bits: u32, keys: &mut Vec<u64>) {
    let mut tuple = vec![0usize; k];
    loop {
        if max_run(&tuple) <= cap {
            keys.push(pack(&tuple, bits));
        }
        // advance to the next non-decreasing tuple
        let mut pos = k;
        loop {
            if pos == 0 {
                return;
            }
            pos -= 1;
            if tuple[pos] + 1 < n_modes {
                let v = tuple[pos] + 1;
                for t in tuple[pos..].iter_mut() {
                    *t = v;
                }
                break;
            }
        }
    }
}

fn max_run(tuple: &[usize]) -> usize {
    let mut best = 0;
    let mut run = 0;
    for (i, &m) in tuple.iter().enumerate() {
        run = if i > 0 && tuple[i - 1] == m { run + 1 } else { 1 };
        best = best.max(run);
    }
    best
}
