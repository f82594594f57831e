//! Excitation-number sectors of the degenerate model.
//!
//! With b+ = (a1 + a2)/sqrt2 and b- = (a1 - a2)/sqrt2 the excitation number is
//! N_e = Jz + n+ - n-, and for w1 = w2 = w, g1 = g2 = g
//!
//!   H = w (n+ + n-) + w0 Jz + (g/sqrt2) [J+ (b+ + b-^dag) + J- (b+^dag + b-)] - mu N_e.
//!
//! A sector with N_e = nu holds states |p, q, m> (p = n+, q = n-) with m + p - q = nu.
//! The cutoff p + q <= n_max is the total-photon truncation, so every sector is an
//! exact block of the truncated Hamiltonian on `Truncation::TotalPhotons`.

use std::collections::HashMap;

use faer::Mat;
use nalgebra_sparse::{CooMatrix, CsrMatrix};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dense, lanczos, LanczosOptions};
use crate::model::operator::spin_raise;
use crate::model::params::ModelParams;
use crate::model::space::DEFAULT_DIM_CEILING;

/// Sector label stored as twice the N_e eigenvalue (eigenvalues are half-integers for odd N).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Excitation(pub i64);

impl Excitation {
    pub fn value(self) -> f64 {
        self.0 as f64 / 2.0
    }

    /// Nearest label to `v`.
    pub fn from_value(v: f64) -> Self {
        Excitation((2.0 * v).round() as i64)
    }

    /// Label shifted by `d` units of N_e.
    pub fn shift(self, d: i64) -> Self {
        Excitation(self.0 + 2 * d)
    }

    /// Lowest possible label for N atoms (vacuum with all atoms down).
    pub fn vacuum(n_atoms: usize) -> Self {
        Excitation(-(n_atoms as i64))
    }
}

impl std::fmt::Display for Excitation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.0 % 2 == 0 {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

/// Basis element of a sector: b+ and b- occupations and spin index (m = k - N/2).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SectorState {
    pub p: usize,
    pub q: usize,
    pub k: usize,
}

#[derive(Debug, Clone)]
pub struct Sector {
    pub label: Excitation,
    pub states: Vec<SectorState>,
    index: HashMap<SectorState, usize>,
}

impl Sector {
    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn index_of(&self, s: SectorState) -> Option<usize> {
        self.index.get(&s).copied()
    }
}

/// Ladder operators of the rotated modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ladder {
    BPlus,
    BMinus,
    BPlusDag,
    BMinusDag,
}

impl Ladder {
    /// Change of N_e caused by the operator.
    pub fn delta(self) -> i64 {
        match self {
            Ladder::BPlus | Ladder::BMinusDag => -1,
            Ladder::BMinus | Ladder::BPlusDag => 1,
        }
    }
}

/// Energy level with its sector label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub energy: f64,
    pub label: Excitation,
}

/// Sector dimensions up to which dense diagonalization is used.
const DENSE_SECTOR: usize = 64;

#[derive(Debug, Clone)]
pub struct SectorModel {
    params: ModelParams,
    n_max: usize,
    lanczos: LanczosOptions,
}

impl SectorModel {
    pub fn new(params: &ModelParams, n_max: usize) -> Result<Self> {
        Self::with_ceiling(params, n_max, DEFAULT_DIM_CEILING)
    }

    pub fn with_ceiling(params: &ModelParams, n_max: usize, ceiling: usize) -> Result<Self> {
        params.validate()?;
        if !params.is_degenerate() {
            return Err(Error::InvalidParameter(
                "excitation sectors need omega1 == omega2 and g1 == g2".into(),
            ));
        }
        // largest sector: every spin state times the (p, q) pairs on one diagonal
        let dim = (params.n_atoms + 1) * (n_max / 2 + 1);
        if dim > ceiling {
            return Err(Error::CutoffTooLarge { dim, ceiling });
        }
        Ok(Self {
            params: *params,
            n_max,
            lanczos: LanczosOptions::default(),
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    fn n(&self) -> i64 {
        self.params.n_atoms as i64
    }

    /// All non-empty sector labels, ascending.
    pub fn labels(&self) -> Vec<Excitation> {
        let lo = -self.n() - 2 * self.n_max as i64;
        let hi = self.n() + 2 * self.n_max as i64;
        (0..=((hi - lo) / 2)).map(|i| Excitation(lo + 2 * i)).collect()
    }

    pub fn sector(&self, label: Excitation) -> Sector {
        let n = self.n();
        let mut states = Vec::new();
        if (label.0 - n).rem_euclid(2) == 0 {
            for k in 0..=self.params.n_atoms {
                // p - q = nu - m, in units of one
                let d = (label.0 - (2 * k as i64 - n)) / 2;
                let q0 = (-d).max(0);
                let mut q = q0;
                loop {
                    let p = q + d;
                    if p + q > self.n_max as i64 {
                        break;
                    }
                    states.push(SectorState {
                        p: p as usize,
                        q: q as usize,
                        k,
                    });
                    q += 1;
                }
            }
        }
        let index = states.iter().enumerate().map(|(i, s)| (*s, i)).collect();
        Sector {
            label,
            states,
            index,
        }
    }

    fn couplings(&self, sector: &Sector, mut f: impl FnMut(usize, usize, f64)) {
        let p = &self.params;
        let j = p.n_atoms as f64 / 2.0;
        let c = p.g1 / std::f64::consts::SQRT_2;
        let nu = sector.label.value();
        for (i, s) in sector.states.iter().enumerate() {
            let m = s.k as f64 - j;
            f(i, i, p.omega1 * (s.p + s.q) as f64 + p.omega0 * m - p.mu * nu);
            if s.k == p.n_atoms || c == 0.0 {
                continue;
            }
            let up = c * spin_raise(j, m);
            // J+ b+
            if s.p > 0 {
                let t = SectorState { p: s.p - 1, k: s.k + 1, ..*s };
                if let Some(r) = sector.index_of(t) {
                    let v = up * (s.p as f64).sqrt();
                    f(r, i, v);
                    f(i, r, v);
                }
            }
            // J+ b-^dag
            let t = SectorState { q: s.q + 1, k: s.k + 1, ..*s };
            if let Some(r) = sector.index_of(t) {
                let v = up * ((s.q + 1) as f64).sqrt();
                f(r, i, v);
                f(i, r, v);
            }
        }
    }

    pub fn hamiltonian(&self, sector: &Sector) -> CsrMatrix<f64> {
        let d = sector.dim();
        let mut coo = CooMatrix::new(d, d);
        self.couplings(sector, |r, c, v| coo.push(r, c, v));
        CsrMatrix::from(&coo)
    }

    pub fn dense_hamiltonian(&self, sector: &Sector) -> Mat<f64> {
        let d = sector.dim();
        let mut m = Mat::<f64>::zeros(d, d);
        self.couplings(sector, |r, c, v| m[(r, c)] += v);
        m
    }

    /// Lowest `k` eigenpairs of a sector (fewer if the sector is smaller).
    pub fn eigs(&self, sector: &Sector, k: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let d = sector.dim();
        let k = k.min(d);
        if k == 0 {
            return Ok((Vec::new(), Vec::new()));
        }
        if d <= DENSE_SECTOR {
            let (vals, vecs) = dense::eigh(&self.dense_hamiltonian(sector))?;
            let out = (0..k).map(|c| (0..d).map(|r| vecs[(r, c)]).collect()).collect();
            return Ok((vals[..k].to_vec(), out));
        }
        lanczos::lowest(&self.hamiltonian(sector), k, None, &self.lanczos)
    }

    /// Complete spectrum of a sector.
    pub fn spectrum(&self, sector: &Sector) -> Result<(Vec<f64>, Mat<f64>)> {
        dense::eigh(&self.dense_hamiltonian(sector))
    }

    /// The `count` lowest levels over all sectors, ascending.
    pub fn low_levels(&self, count: usize) -> Result<Vec<Level>> {
        let per: Vec<Result<Vec<Level>>> = self
            .labels()
            .par_iter()
            .map(|&label| {
                let s = self.sector(label);
                let (vals, _) = self.eigs(&s, count)?;
                Ok(vals.into_iter().map(|energy| Level { energy, label }).collect())
            })
            .collect();
        let mut all = Vec::new();
        for r in per {
            all.extend(r?);
        }
        all.sort_by(|a, b| a.energy.total_cmp(&b.energy).then(a.label.cmp(&b.label)));
        all.truncate(count);
        Ok(all)
    }

    /// Ground level, the next level and their gap.
    pub fn ground(&self) -> Result<SectorGround> {
        let lv = self.low_levels(2)?;
        let ground = lv[0];
        let next = lv.get(1).copied();
        Ok(SectorGround {
            ground,
            next,
            gap: next.map_or(f64::INFINITY, |n| n.energy - ground.energy),
        })
    }

    /// Applies a combination of rotated-mode ladders taking `from` to `to`.
    ///
    /// Each term must change N_e by `to.label - from.label`.
    pub fn apply_ladders(
        &self,
        from: &Sector,
        to: &Sector,
        terms: &[(Ladder, f64)],
        v: &[f64],
    ) -> Vec<f64> {
        let mut out = vec![0.0; to.dim()];
        for &(op, coef) in terms {
            debug_assert_eq!(from.label.0 + 2 * op.delta(), to.label.0);
            for (i, s) in from.states.iter().enumerate() {
                if v[i] == 0.0 {
                    continue;
                }
                let (t, amp) = match op {
                    Ladder::BPlus if s.p > 0 => (SectorState { p: s.p - 1, ..*s }, (s.p as f64).sqrt()),
                    Ladder::BMinus if s.q > 0 => (SectorState { q: s.q - 1, ..*s }, (s.q as f64).sqrt()),
                    Ladder::BPlusDag => (SectorState { p: s.p + 1, ..*s }, ((s.p + 1) as f64).sqrt()),
                    Ladder::BMinusDag => (SectorState { q: s.q + 1, ..*s }, ((s.q + 1) as f64).sqrt()),
                    _ => continue,
                };
                if let Some(r) = to.index_of(t) {
                    out[r] += coef * amp * v[i];
                }
            }
        }
        out
    }

    /// x_m = a_m + a_m^dag restricted to the block `from -> to` (labels differing by one), applied to v.
    pub fn apply_quadrature(&self, from: &Sector, to: &Sector, mode: usize, v: &[f64]) -> Vec<f64> {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let s = if mode == 1 { 1.0 } else { -1.0 };
        let terms: Vec<(Ladder, f64)> = match to.label.0 - from.label.0 {
            -2 => vec![(Ladder::BPlus, h), (Ladder::BMinusDag, s * h)],
            2 => vec![(Ladder::BPlusDag, h), (Ladder::BMinus, s * h)],
            _ => Vec::new(),
        };
        self.apply_ladders(from, to, &terms, v)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SectorGround {
    pub ground: Level,
    pub next: Option<Level>,
    pub gap: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::hamiltonian::h_single_site;
    use crate::model::space::build_space_total;

    #[test]
    fn sectors_partition_the_space() {
        let p = ModelParams::degenerate(1.0, 1.0, 0.5, 3);
        let m = SectorModel::new(&p, 9).unwrap();
        let total: usize = m.labels().iter().map(|&l| m.sector(l).dim()).sum();
        assert_eq!(total, build_space_total(3, 9).unwrap().dim());
        for l in m.labels() {
            assert!(m.sector(l).dim() > 0, "label {l}");
        }
    }

    #[test]
    fn spectrum_matches_full_space() {
        let p = ModelParams::degenerate(1.0, 0.8, 1.1, 2).with_mu(0.15);
        let n_max = 8;
        let m = SectorModel::new(&p, n_max).unwrap();
        let mut from_sectors: Vec<f64> = Vec::new();
        for l in m.labels() {
            let (v, _) = m.spectrum(&m.sector(l)).unwrap();
            from_sectors.extend(v);
        }
        from_sectors.sort_by(f64::total_cmp);
        let space = build_space_total(2, n_max).unwrap();
        let full = dense::eigvalsh(&h_single_site(&space, &p).unwrap().to_dense_real()).unwrap();
        assert_eq!(full.len(), from_sectors.len());
        for (a, b) in full.iter().zip(&from_sectors) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn free_ground_state() {
        let p = ModelParams::degenerate(1.0, 1.0, 0.0, 3);
        let g = SectorModel::new(&p, 4).unwrap().ground().unwrap();
        assert_eq!(g.ground.label, Excitation(-3));
        assert!((g.ground.energy + 1.5).abs() < 1e-14);
    }

    #[test]
    fn single_atom_exact_energy() {
        // N = 1, w0 = w: E0 = -w0/2 - g^2/4 in the lowest sector
        for g in [0.5, 1.0, 2.0] {
            let p = ModelParams::degenerate(1.0, 1.0, g, 1);
            let gr = SectorModel::new(&p, 40).unwrap().ground().unwrap();
            assert!((gr.ground.energy - (-0.5 - g * g / 4.0)).abs() < 1e-10);
            assert_eq!(gr.ground.label, Excitation(-1));
        }
    }

    #[test]
    fn label_display() {
        assert_eq!(Excitation(-3).to_string(), "-3/2");
        assert_eq!(Excitation(4).to_string(), "2");
        assert_eq!(Excitation::from_value(-1.5), Excitation(-3));
    }

    #[test]
    fn rejects_non_degenerate() {
        let p = ModelParams::degenerate(1.0, 1.0, 0.5, 1).with_ratio(1.1);
        assert!(SectorModel::new(&p, 5).is_err());
    }
}
