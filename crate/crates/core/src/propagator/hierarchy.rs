use std::collections::HashMap;

use num_complex::Complex64 as C64;

use crate::bath::{BathExpansion, CouplingChannel};
use crate::error::{Error, Result};

/// Default cap on the number of complex entries in one hierarchy state.
pub const DEFAULT_ENTRY_CAP: usize = 1 << 23;

const NONE: u32 = u32::MAX;

/// Multi-index of an auxiliary density operator.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct HierarchyIndex {
    pub occupations: Vec<u16>,
}

impl HierarchyIndex {
    pub fn tier(&self) -> usize {
        self.occupations.iter().map(|&n| n as usize).sum()
    }
}

/// One exponential term of one bath, flattened across all baths.
#[derive(Clone, Copy, Debug)]
pub struct TermInfo {
    pub eta: C64,
    pub eta_bar: C64,
    pub gamma: C64,
    pub bath: usize,
}

/// Enumerated ADO index set truncated at tier `depth`.
#[derive(Clone, Debug)]
pub struct HierarchySpace {
    expansions: Vec<BathExpansion>,
    terms: Vec<TermInfo>,
    depth: usize,
    /// Flattened occupations, `n_terms` per ADO.
    occ: Vec<u16>,
    tiers: Vec<u16>,
    lookup: HashMap<Vec<u16>, usize>,
    /// `up[i*K + k]`: index of `n + 1_k`, or NONE.
    up: Vec<u32>,
    /// `down[i*K + k]`: index of `n - 1_k`, or NONE.
    down: Vec<u32>,
    /// `Σ_k n_k γ_k` per ADO.
    damping: Vec<C64>,
    /// Term ranges per bath, `bath_terms[b] = start..end`.
    bath_terms: Vec<std::ops::Range<usize>>,
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Number of ADOs for `terms` exponentials truncated at `depth`: C(K + L, L).
pub fn hierarchy_size(terms: usize, depth: usize) -> u128 {
    binomial(terms + depth, depth)
}

impl HierarchySpace {
    pub fn build(expansions: Vec<BathExpansion>, depth: usize) -> Result<Self> {
        Self::build_with_cap(expansions, depth, DEFAULT_ENTRY_CAP)
    }

    pub fn build_with_cap(
        expansions: Vec<BathExpansion>,
        depth: usize,
        entry_cap: usize,
    ) -> Result<Self> {
        if depth == 0 {
            return Err(Error::InvalidInput("hierarchy depth must be >= 1".into()));
        }
        let mut terms = Vec::new();
        let mut bath_terms = Vec::new();
        for (b, e) in expansions.iter().enumerate() {
            let start = terms.len();
            terms.extend(e.terms.iter().map(|t| TermInfo {
                eta: t.eta,
                eta_bar: t.eta_bar,
                gamma: t.gamma,
                bath: b,
            }));
            bath_terms.push(start..terms.len());
        }
        let k = terms.len();
        if k == 0 {
            return Err(Error::InvalidInput(
                "hierarchy needs at least one bath term".into(),
            ));
        }
        let count = hierarchy_size(k, depth);
        let entries = count.saturating_mul(4);
        if entries > entry_cap as u128 {
            return Err(Error::Capacity {
                entries: entries.min(usize::MAX as u128) as usize,
                cap: entry_cap,
                depth,
                terms: k,
            });
        }
        let n_ado = count as usize;

        let mut occ = Vec::with_capacity(n_ado * k);
        let mut tiers = Vec::with_capacity(n_ado);
        let mut current = vec![0u16; k];
        for tier in 0..=depth {
            enumerate_tier(&mut current, 0, tier, &mut |v| {
                occ.extend_from_slice(v);
                tiers.push(tier as u16);
            });
        }
        debug_assert_eq!(tiers.len(), n_ado);

        let mut lookup = HashMap::with_capacity(n_ado);
        for i in 0..n_ado {
            lookup.insert(occ[i * k..(i + 1) * k].to_vec(), i);
        }

        let mut up = vec![NONE; n_ado * k];
        let mut down = vec![NONE; n_ado * k];
        let mut damping = vec![C64::new(0.0, 0.0); n_ado];
        let mut key = vec![0u16; k];
        for i in 0..n_ado {
            let n = &occ[i * k..(i + 1) * k];
            key.copy_from_slice(n);
            let mut d = C64::new(0.0, 0.0);
            for t in 0..k {
                d += terms[t].gamma * n[t] as f64;
                key[t] += 1;
                if let Some(&j) = lookup.get(&key) {
                    up[i * k + t] = j as u32;
                }
                key[t] -= 1;
                if n[t] > 0 {
                    key[t] -= 1;
                    down[i * k + t] = lookup[&key] as u32;
                    key[t] += 1;
                }
            }
            damping[i] = d;
        }

        Ok(Self {
            expansions,
            terms,
            depth,
            occ,
            tiers,
            lookup,
            up,
            down,
            damping,
            bath_terms,
        })
    }

    pub fn len(&self) -> usize {
        self.tiers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tiers.is_empty()
    }

    /// Length of a flattened state vector.
    pub fn state_len(&self) -> usize {
        4 * self.len()
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> &[TermInfo] {
        &self.terms
    }

    pub fn expansions(&self) -> &[BathExpansion] {
        &self.expansions
    }

    pub fn coupling(&self, bath: usize) -> CouplingChannel {
        self.expansions[bath].coupling
    }

    pub fn index(&self, i: usize) -> HierarchyIndex {
        let k = self.terms.len();
        HierarchyIndex {
            occupations: self.occ[i * k..(i + 1) * k].to_vec(),
        }
    }

    pub fn tier(&self, i: usize) -> usize {
        self.tiers[i] as usize
    }

    pub fn index_of(&self, idx: &HierarchyIndex) -> Option<usize> {
        self.lookup.get(&idx.occupations).copied()
    }

    #[inline]
    pub(crate) fn occupation(&self, i: usize, t: usize) -> u16 {
        self.occ[i * self.terms.len() + t]
    }

    #[inline]
    pub(crate) fn up(&self, i: usize, t: usize) -> Option<usize> {
        let j = self.up[i * self.terms.len() + t];
        (j != NONE).then_some(j as usize)
    }

    #[inline]
    pub(crate) fn down(&self, i: usize, t: usize) -> Option<usize> {
        let j = self.down[i * self.terms.len() + t];
        (j != NONE).then_some(j as usize)
    }

    #[inline]
    pub(crate) fn damping(&self, i: usize) -> C64 {
        self.damping[i]
    }

    pub(crate) fn bath_terms(&self) -> &[std::ops::Range<usize>] {
        &self.bath_terms
    }
}

/// Visits all occupation vectors with `Σ v[pos..] = remaining`, lexicographically
/// descending in the leading entries.
fn enumerate_tier(v: &mut [u16], pos: usize, remaining: usize, visit: &mut impl FnMut(&[u16])) {
    if pos == v.len() - 1 {
        v[pos] = remaining as u16;
        visit(v);
        v[pos] = 0;
        return;
    }
    for n in (0..=remaining).rev() {
        v[pos] = n as u16;
        enumerate_tier(v, pos + 1, remaining - n, visit);
    }
    v[pos] = 0;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::{correlation_expansion, SpectralDensity};

    fn drude_with(n_mats: usize) -> BathExpansion {
        correlation_expansion(
            SpectralDensity::Drude {
                lambda: 1.0,
                gamma: 1.0,
            },
            1.0,
            n_mats,
            CouplingChannel::DonorGap,
        )
        .unwrap()
    }

    #[test]
    fn single_term_depth_two() {
        let space = HierarchySpace::build(vec![drude_with(0)], 2).unwrap();
        assert_eq!(space.len(), 3);
        let occ: Vec<Vec<u16>> = (0..3).map(|i| space.index(i).occupations).collect();
        assert_eq!(occ, vec![vec![0], vec![1], vec![2]]);
    }

    #[test]
    fn three_terms_depth_two() {
        let space = HierarchySpace::build(vec![drude_with(2)], 2).unwrap();
        assert_eq!(space.len(), 10);
    }

    #[test]
    fn eight_terms_depth_six_by_enumeration() {
        let space = HierarchySpace::build(vec![drude_with(7)], 6).unwrap();
        assert_eq!(space.len(), 3003);
        assert_eq!(hierarchy_size(8, 6), 3003);
        // enumeration is complete, duplicate-free and ordered by tier
        let mut seen = std::collections::HashSet::new();
        let mut last_tier = 0;
        for i in 0..space.len() {
            let idx = space.index(i);
            assert!(idx.tier() <= 6);
            assert!(idx.tier() >= last_tier);
            last_tier = idx.tier();
            assert_eq!(space.index_of(&idx), Some(i));
            assert!(seen.insert(idx.occupations));
        }
    }

    #[test]
    fn neighbour_tables_are_consistent() {
        let space = HierarchySpace::build(vec![drude_with(2)], 3).unwrap();
        for i in 0..space.len() {
            for t in 0..space.n_terms() {
                if let Some(j) = space.up(i, t) {
                    assert_eq!(space.down(j, t), Some(i));
                    assert_eq!(space.tier(j), space.tier(i) + 1);
                } else {
                    assert_eq!(space.tier(i), 3);
                }
            }
        }
    }

    #[test]
    fn capacity_error() {
        let err = HierarchySpace::build_with_cap(vec![drude_with(7)], 6, 1000).unwrap_err();
        assert!(matches!(err, Error::Capacity { cap: 1000, .. }));
        assert_eq!(err.exit_code(), 4);
    }

    #[test]
    fn zero_depth_rejected() {
        assert!(HierarchySpace::build(vec![drude_with(0)], 0).is_err());
    }
}
