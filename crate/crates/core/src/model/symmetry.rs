//! Excitation-number blocks built numerically in the original two-mode basis.
//!
//! Independent of the rotated-mode construction in `sector`: N_e is diagonalized
//! within each (n1 + n2, k) block, eigenvectors are grouped by N_e eigenvalue,
//! and a Hamiltonian is projected onto each group.

use std::collections::BTreeMap;

use faer::Mat;

use crate::error::{Error, Result};
use crate::linalg::dense;
use crate::model::operator::OperatorMatrix;
use crate::model::sector::Excitation;
use crate::model::space::{HilbertSpace, Truncation};

#[derive(Debug, Clone)]
pub struct ExcitationBlocks {
    dim: usize,
    blocks: BTreeMap<Excitation, Vec<Vec<f64>>>,
}

/// Eigenstate in the full basis with its block label.
#[derive(Debug, Clone)]
pub struct LabeledState {
    pub energy: f64,
    pub label: Excitation,
    pub vector: Vec<f64>,
    /// ||H v - E v|| in the full space; small only if H conserves N_e.
    pub residual: f64,
}

pub fn excitation_blocks(space: &HilbertSpace) -> Result<ExcitationBlocks> {
    let n_max = match space.truncation() {
        Truncation::TotalPhotons { n_max } => n_max,
        Truncation::Box { .. } => {
            return Err(Error::InvalidParameter(
                "excitation blocks need the total-photon truncation".into(),
            ))
        }
    };
    let n = space.n_atoms();
    let mut blocks: BTreeMap<Excitation, Vec<Vec<f64>>> = BTreeMap::new();
    for l in 0..=n_max {
        // a1^dag a2 + a2^dag a1 on the states n1 = 0..=l, n2 = l - n1
        let x = Mat::from_fn(l + 1, l + 1, |r, c| {
            if r == c + 1 {
                ((r * (l - c)) as f64).sqrt()
            } else if c == r + 1 {
                ((c * (l - r)) as f64).sqrt()
            } else {
                0.0
            }
        });
        let (vals, vecs) = dense::eigh(&x)?;
        for (col, &lam) in vals.iter().enumerate() {
            let li = lam.round();
            if (lam - li).abs() > 1e-8 {
                return Err(Error::NoConvergence(format!(
                    "photon-exchange eigenvalue {lam} is not an integer"
                )));
            }
            for k in 0..=n {
                let label = Excitation(2 * k as i64 - n as i64 + 2 * li as i64);
                let mut v = vec![0.0; space.dim()];
                for n1 in 0..=l {
                    v[space.index(n1, l - n1, k).unwrap()] = vecs[(n1, col)];
                }
                blocks.entry(label).or_default().push(v);
            }
        }
    }
    Ok(ExcitationBlocks {
        dim: space.dim(),
        blocks,
    })
}

impl ExcitationBlocks {
    pub fn labels(&self) -> Vec<Excitation> {
        self.blocks.keys().copied().collect()
    }

    pub fn basis(&self, label: Excitation) -> Option<&[Vec<f64>]> {
        self.blocks.get(&label).map(Vec::as_slice)
    }

    /// V^T H V for the block with the given label.
    pub fn project(&self, h: &OperatorMatrix, label: Excitation) -> Result<Mat<f64>> {
        if h.dim() != self.dim {
            return Err(Error::DimensionMismatch("operator and block basis differ".into()));
        }
        let v = self
            .blocks
            .get(&label)
            .ok_or_else(|| Error::InvalidParameter(format!("no block with label {label}")))?;
        let hv: Vec<Vec<f64>> = v
            .iter()
            .map(|col| {
                let mut y = vec![0.0; self.dim];
                h.apply_real(col, &mut y);
                y
            })
            .collect();
        let d = v.len();
        Ok(Mat::from_fn(d, d, |r, c| {
            v[r].iter().zip(&hv[c]).map(|(a, b)| a * b).sum()
        }))
    }

    /// The `count` lowest eigenstates of a real Hamiltonian, assembled block by block.
    pub fn lowest_states(&self, h: &OperatorMatrix, count: usize) -> Result<Vec<LabeledState>> {
        let mut out = Vec::new();
        for (&label, v) in &self.blocks {
            let (vals, vecs) = dense::eigh(&self.project(h, label)?)?;
            for (c, &energy) in vals.iter().enumerate().take(count) {
                let mut y = vec![0.0; self.dim];
                for (r, col) in v.iter().enumerate() {
                    let a = vecs[(r, c)];
                    for (yi, ci) in y.iter_mut().zip(col) {
                        *yi += a * ci;
                    }
                }
                out.push(LabeledState {
                    energy,
                    label,
                    vector: y,
                    residual: 0.0,
                });
            }
        }
        out.sort_by(|a, b| a.energy.total_cmp(&b.energy).then(a.label.cmp(&b.label)));
        out.truncate(count);
        let mut w = vec![0.0; self.dim];
        for s in &mut out {
            h.apply_real(&s.vector, &mut w);
            s.residual = w
                .iter()
                .zip(&s.vector)
                .map(|(hv, v)| (hv - s.energy * v).powi(2))
                .sum::<f64>()
                .sqrt();
        }
        Ok(out)
    }
}
