use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::propagator::AdoState;

/// Which part of the hierarchy state the Nakajima-Zwanzig projector keeps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectorKind {
    /// Tier-0 populations only.
    Population,
    /// The whole tier-0 block.
    System,
}

impl ProjectorKind {
    /// Flat positions (within the tier-0 block) spanning the P-subspace.
    pub fn p_indices(&self) -> &'static [usize] {
        match self {
            ProjectorKind::Population => &[0, 3],
            ProjectorKind::System => &[0, 1, 2, 3],
        }
    }

    /// Names of the P-subspace basis elements, aligned with [`Self::p_indices`].
    pub fn basis_labels(&self) -> &'static [&'static str] {
        match self {
            ProjectorKind::Population => &["DD", "AA"],
            ProjectorKind::System => &["DD", "DA", "AD", "AA"],
        }
    }

    pub(crate) fn keep_q_in_place(&self, values: &mut [C64]) {
        let z = C64::new(0.0, 0.0);
        for &i in self.p_indices() {
            values[i] = z;
        }
    }

    pub(crate) fn keep_p_in_place(&self, values: &mut [C64]) {
        let z = C64::new(0.0, 0.0);
        let keep = self.p_indices();
        for (i, v) in values.iter_mut().enumerate() {
            if !keep.contains(&i) {
                *v = z;
            }
        }
    }
}

/// `𝓟 state`.
pub fn apply_projector(p: ProjectorKind, state: &AdoState) -> AdoState {
    let mut out = state.clone();
    p.keep_p_in_place(&mut out.values);
    out
}

/// `𝓠 state = (1 − 𝓟) state`.
pub fn apply_complement(p: ProjectorKind, state: &AdoState) -> AdoState {
    let mut out = state.clone();
    p.keep_q_in_place(&mut out.values);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::{correlation_expansion, CouplingChannel, SpectralDensity};
    use crate::propagator::HierarchySpace;

    #[test]
    fn projectors_split_the_state() {
        let b = correlation_expansion(SpectralDensity::Drude { lambda: 1.0, gamma: 1.0 }, 1.0, 1, CouplingChannel::DonorGap)
            .unwrap();
        let space = HierarchySpace::build(vec![b], 2).unwrap();
        let mut s = AdoState::zeros(&space, 0.0);
        for (i, v) in s.values.iter_mut().enumerate() {
            *v = C64::new(i as f64 + 1.0, -(i as f64));
        }
        for kind in [ProjectorKind::Population, ProjectorKind::System] {
            let p = apply_projector(kind, &s);
            let q = apply_complement(kind, &s);
            assert_eq!(apply_projector(kind, &p), p);
            assert_eq!(apply_complement(kind, &q), q);
            for i in 0..s.values.len() {
                assert_eq!(p.values[i] + q.values[i], s.values[i]);
            }
        }
        let p = apply_projector(ProjectorKind::Population, &s);
        assert_eq!(&p.values[..4], &[s.values[0], C64::new(0.0, 0.0), C64::new(0.0, 0.0), s.values[3]]);
        assert!(p.values[4..].iter().all(|z| z.norm() == 0.0));
        let p = apply_projector(ProjectorKind::System, &s);
        assert_eq!(&p.values[..4], &s.values[..4]);
    }
}
