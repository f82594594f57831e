use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default ceiling on the dimension of any matrix the library materializes.
pub const DEFAULT_DIM_CEILING: usize = 20_000;

/// Fock-space truncation of the two photon modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Truncation {
    /// n1 <= n_max1 and n2 <= n_max2; row-major index ((n1*(n_max2+1)+n2)*(N+1)+k).
    Box { n_max1: usize, n_max2: usize },
    /// n1 + n2 <= n_max; states ordered by n1, then n2, then k.
    ///
    /// The photon-exchange terms of N_e preserve n1 + n2, so this truncation keeps
    /// N_e an exact symmetry of the truncated Hamiltonian.
    TotalPhotons { n_max: usize },
}

impl Truncation {
    pub fn contains(&self, n1: usize, n2: usize) -> bool {
        match *self {
            Truncation::Box { n_max1, n_max2 } => n1 <= n_max1 && n2 <= n_max2,
            Truncation::TotalPhotons { n_max } => n1 + n2 <= n_max,
        }
    }

    pub fn n_max1(&self) -> usize {
        match *self {
            Truncation::Box { n_max1, .. } => n_max1,
            Truncation::TotalPhotons { n_max } => n_max,
        }
    }

    pub fn n_max2(&self) -> usize {
        match *self {
            Truncation::Box { n_max2, .. } => n_max2,
            Truncation::TotalPhotons { n_max } => n_max,
        }
    }

    fn photon_states(&self) -> usize {
        match *self {
            Truncation::Box { n_max1, n_max2 } => (n_max1 + 1) * (n_max2 + 1),
            Truncation::TotalPhotons { n_max } => (n_max + 1) * (n_max + 2) / 2,
        }
    }
}

/// Product basis element: photon numbers and spin index k (m = k - N/2).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BasisState {
    pub n1: usize,
    pub n2: usize,
    pub k: usize,
}

/// Identifies the space an operator acts on; cheap to copy and compare.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SpaceTag {
    pub n_atoms: usize,
    pub truncation: Truncation,
}

/// Truncated two-mode Fock space times the j = N/2 collective-spin multiplet.
#[derive(Debug, Clone)]
pub struct HilbertSpace {
    n_atoms: usize,
    truncation: Truncation,
    // photon-pair offsets of each n1 block (TotalPhotons only)
    row_offsets: Vec<usize>,
    dim: usize,
}

pub fn build_space(n_atoms: usize, n_max1: usize, n_max2: usize) -> Result<HilbertSpace> {
    HilbertSpace::new(
        n_atoms,
        Truncation::Box { n_max1, n_max2 },
        DEFAULT_DIM_CEILING,
    )
}

pub fn build_space_total(n_atoms: usize, n_max: usize) -> Result<HilbertSpace> {
    HilbertSpace::new(n_atoms, Truncation::TotalPhotons { n_max }, DEFAULT_DIM_CEILING)
}

impl HilbertSpace {
    pub fn new(n_atoms: usize, truncation: Truncation, ceiling: usize) -> Result<Self> {
        if n_atoms < 1 {
            return Err(Error::InvalidParameter("n_atoms must be >= 1".into()));
        }
        let dim = truncation
            .photon_states()
            .checked_mul(n_atoms + 1)
            .unwrap_or(usize::MAX);
        if dim > ceiling {
            return Err(Error::CutoffTooLarge { dim, ceiling });
        }
        let row_offsets = match truncation {
            Truncation::Box { .. } => Vec::new(),
            Truncation::TotalPhotons { n_max } => {
                let mut v = Vec::with_capacity(n_max + 2);
                let mut acc = 0;
                for n1 in 0..=n_max {
                    v.push(acc);
                    acc += n_max - n1 + 1;
                }
                v.push(acc);
                v
            }
        };
        Ok(Self {
            n_atoms,
            truncation,
            row_offsets,
            dim,
        })
    }

    /// Rebuilds the space an operator is tagged with.
    pub fn from_tag(tag: SpaceTag) -> Result<Self> {
        Self::new(tag.n_atoms, tag.truncation, usize::MAX)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn spin_dim(&self) -> usize {
        self.n_atoms + 1
    }

    /// Collective spin length j = N/2.
    pub fn j(&self) -> f64 {
        self.n_atoms as f64 / 2.0
    }

    /// J_z eigenvalue of spin index k.
    pub fn m(&self, k: usize) -> f64 {
        k as f64 - self.j()
    }

    pub fn truncation(&self) -> Truncation {
        self.truncation
    }

    pub fn tag(&self) -> SpaceTag {
        SpaceTag {
            n_atoms: self.n_atoms,
            truncation: self.truncation,
        }
    }

    pub fn index(&self, n1: usize, n2: usize, k: usize) -> Option<usize> {
        if k > self.n_atoms || !self.truncation.contains(n1, n2) {
            return None;
        }
        let s = self.n_atoms + 1;
        let pair = match self.truncation {
            Truncation::Box { n_max2, .. } => n1 * (n_max2 + 1) + n2,
            Truncation::TotalPhotons { .. } => self.row_offsets[n1] + n2,
        };
        Some(pair * s + k)
    }

    pub fn state(&self, index: usize) -> BasisState {
        assert!(index < self.dim, "basis index out of range");
        let s = self.n_atoms + 1;
        let k = index % s;
        let pair = index / s;
        let (n1, n2) = match self.truncation {
            Truncation::Box { n_max2, .. } => (pair / (n_max2 + 1), pair % (n_max2 + 1)),
            Truncation::TotalPhotons { .. } => {
                let n1 = self.row_offsets.partition_point(|&o| o <= pair) - 1;
                (n1, pair - self.row_offsets[n1])
            }
        };
        BasisState { n1, n2, k }
    }

    pub fn states(&self) -> impl Iterator<Item = BasisState> + '_ {
        (0..self.dim).map(move |i| self.state(i))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_dimensions() {
        assert_eq!(build_space(1, 3, 3).unwrap().dim(), 32);
        assert_eq!(build_space(3, 0, 0).unwrap().dim(), 4);
        assert_eq!(build_space(2, 10, 10).unwrap().dim(), 363);
    }

    #[test]
    fn box_index_is_row_major() {
        let s = build_space(2, 4, 3).unwrap();
        for (i, st) in s.states().enumerate() {
            assert_eq!(i, (st.n1 * 4 + st.n2) * 3 + st.k);
            assert_eq!(s.index(st.n1, st.n2, st.k), Some(i));
        }
        assert_eq!(s.index(5, 0, 0), None);
        assert_eq!(s.index(0, 4, 0), None);
        assert_eq!(s.index(0, 0, 3), None);
    }

    #[test]
    fn total_photon_index_roundtrip() {
        let s = build_space_total(3, 7).unwrap();
        assert_eq!(s.dim(), 36 * 4);
        let mut prev = None;
        for (i, st) in s.states().enumerate() {
            assert!(st.n1 + st.n2 <= 7);
            assert_eq!(s.index(st.n1, st.n2, st.k), Some(i));
            let key = (st.n1, st.n2, st.k);
            if let Some(p) = prev {
                assert!(key > p, "lexicographic order");
            }
            prev = Some(key);
        }
        assert_eq!(s.index(4, 4, 0), None);
    }

    #[test]
    fn ceiling_rejects() {
        match build_space(1, 200, 200) {
            Err(Error::CutoffTooLarge { dim, ceiling }) => {
                assert_eq!(dim, 201 * 201 * 2);
                assert_eq!(ceiling, DEFAULT_DIM_CEILING);
            }
            other => panic!("expected ceiling error, got {other:?}"),
        }
        assert!(HilbertSpace::new(1, Truncation::TotalPhotons { n_max: 3 }, 19).is_err());
        assert!(HilbertSpace::new(1, Truncation::TotalPhotons { n_max: 3 }, 20).is_ok());
    }
}
