use crate::error::{Error, Result};

/// Default ceiling on the number of basis states.
pub const DEFAULT_SIZE_LIMIT: usize = 2_000_000;

/// Occupation-number basis of `n_modes` modes holding at most `cutoff`
/// photons in total.
///
/// States are ordered by total photon number, and within one total
/// lexicographically ascending in `(n_0, n_1, …)`. The position of any
/// occupation tuple is computed combinatorially, without a lookup table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FockBasis {
    n_modes: usize,
    cutoff: usize,
    occupations: Vec<u16>,
    sector_offsets: Vec<usize>,
    /// `binom[n][k]` for `n ≤ cutoff + n_modes`.
    binom: Vec<Vec<usize>>,
}

fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

impl FockBasis {
    pub fn new(n_modes: usize, cutoff: usize) -> Result<Self> {
        Self::with_limit(n_modes, cutoff, DEFAULT_SIZE_LIMIT)
    }

    pub fn with_limit(n_modes: usize, cutoff: usize, limit: usize) -> Result<Self> {
        if n_modes == 0 {
            return Err(Error::InvalidParameter("Fock basis needs at least one mode".into()));
        }
        let size = binomial((cutoff + n_modes) as u128, n_modes as u128);
        if size > limit as u128 || cutoff > u16::MAX as usize {
            return Err(Error::SizeLimitExceeded { n_modes, cutoff, size, limit });
        }
        let top = cutoff + n_modes;
        let mut binom = vec![vec![0usize; top + 1]; top + 1];
        for n in 0..=top {
            binom[n][0] = 1;
            for k in 1..=n {
                binom[n][k] = binom[n - 1][k - 1] + if k < n { binom[n - 1][k] } else { 0 };
            }
        }

        let mut occupations = Vec::with_capacity(size as usize * n_modes);
        let mut sector_offsets = Vec::with_capacity(cutoff + 2);
        let mut scratch = vec![0u16; n_modes];
        for total in 0..=cutoff {
            sector_offsets.push(occupations.len() / n_modes);
            push_sector(&mut occupations, &mut scratch, 0, total);
        }
        sector_offsets.push(occupations.len() / n_modes);
        debug_assert_eq!(occupations.len(), size as usize * n_modes);

        Ok(Self { n_modes, cutoff, occupations, sector_offsets, binom })
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn len(&self) -> usize {
        self.occupations.len() / self.n_modes
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn occupation(&self, index: usize) -> &[u16] {
        &self.occupations[index * self.n_modes..(index + 1) * self.n_modes]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[u16]> + '_ {
        self.occupations.chunks_exact(self.n_modes)
    }

    /// Index range of the states holding exactly `total` photons.
    pub fn sector(&self, total: usize) -> std::ops::Range<usize> {
        self.sector_offsets[total]..self.sector_offsets[total + 1]
    }

    /// Number of ways to place `total` photons in `modes` modes.
    #[inline]
    fn compositions(&self, modes: usize, total: usize) -> usize {
        if modes == 0 {
            usize::from(total == 0)
        } else {
            self.binom[total + modes - 1][modes - 1]
        }
    }

    /// Position of an occupation tuple, or `None` if it lies outside the basis.
    pub fn index_of(&self, occupation: &[u16]) -> Option<usize> {
        if occupation.len() != self.n_modes {
            return None;
        }
        let total: usize = occupation.iter().map(|&n| n as usize).sum();
        if total > self.cutoff {
            return None;
        }
        Some(self.index_unchecked(occupation, total))
    }

    #[inline]
    pub(crate) fn index_unchecked(&self, occupation: &[u16], total: usize) -> usize {
        let mut index = self.sector_offsets[total];
        let mut remaining = total;
        for (i, &n) in occupation.iter().enumerate() {
            let rest = self.n_modes - i - 1;
            for v in 0..n as usize {
                index += self.compositions(rest, remaining - v);
            }
            remaining -= n as usize;
        }
        index
    }
}

fn push_sector(out: &mut Vec<u16>, scratch: &mut [u16], mode: usize, remaining: usize) {
    if mode + 1 == scratch.len() {
        scratch[mode] = remaining as u16;
        out.extend_from_slice(scratch);
        return;
    }
    for v in 0..=remaining {
        scratch[mode] = v as u16;
        push_sector(out, scratch, mode + 1, remaining - v);
    }
}
