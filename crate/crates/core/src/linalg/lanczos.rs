//! Lanczos iteration with full reorthogonalization, explicit restarts and locking.

use faer::Mat;
use nalgebra_sparse::CsrMatrix;

use crate::error::{Error, Result};
use crate::linalg::dense;
use crate::model::operator::OperatorMatrix;

/// Real symmetric linear map.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

impl LinearOperator for CsrMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let offs = self.row_offsets();
        let cols = self.col_indices();
        let vals = self.values();
        for r in 0..self.nrows() {
            let mut s = 0.0;
            for i in offs[r]..offs[r + 1] {
                s += vals[i] * x[cols[i]];
            }
            y[r] = s;
        }
    }
}

/// Uses the real part only; callers guarantee the operator is real.
impl LinearOperator for OperatorMatrix {
    fn dim(&self) -> usize {
        OperatorMatrix::dim(self)
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.apply_real(x, y)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LanczosOptions {
    /// Converged when ||Hv - Ev|| < tol * ||H||.
    pub tol: f64,
    /// Krylov basis size before a restart.
    pub max_basis: usize,
    pub max_restarts: usize,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self {
            tol: 1e-11,
            max_basis: 120,
            max_restarts: 60,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (y, x) in y.iter_mut().zip(x) {
        *y += alpha * x;
    }
}

/// Deterministic pseudo-random vector (SplitMix64), so repeated runs are bit-identical.
pub fn seed_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut s = seed.wrapping_add(0x9E37_79B9_7F4A_7C15);
    (0..n)
        .map(|_| {
            s = s.wrapping_add(0x9E37_79B9_7F4A_7C15);
            let mut z = s;
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
            z ^= z >> 31;
            (z >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
        .collect()
}

fn orthogonalize(v: &mut [f64], against: &[Vec<f64>]) {
    // two passes of classical Gram-Schmidt
    for _ in 0..2 {
        for q in against {
            let c = dot(q, v);
            axpy(-c, q, v);
        }
    }
}

struct Cycle {
    value: f64,
    vector: Vec<f64>,
    next: Option<Vec<f64>>,
    converged: bool,
}

/// One Lanczos run from `v0` on the complement of `locked`; returns the lowest Ritz pair.
fn cycle<A: LinearOperator + ?Sized>(
    op: &A,
    mut v0: Vec<f64>,
    locked: &[Vec<f64>],
    opts: &LanczosOptions,
    scale: &mut f64,
) -> Result<Cycle> {
    let n = op.dim();
    let max_basis = opts.max_basis.min(n - locked.len()).max(1);
    orthogonalize(&mut v0, locked);
    let nv = norm(&v0);
    if nv < 1e-12 {
        return Err(Error::NoConvergence("lanczos start vector vanished".into()));
    }
    v0.iter_mut().for_each(|x| *x /= nv);

    let mut basis: Vec<Vec<f64>> = vec![v0];
    let mut alpha: Vec<f64> = Vec::with_capacity(max_basis);
    let mut beta: Vec<f64> = Vec::with_capacity(max_basis);
    let mut w = vec![0.0; n];
    let (theta, s) = loop {
        let j = basis.len() - 1;
        op.apply(&basis[j], &mut w);
        let a = dot(&basis[j], &w);
        alpha.push(a);
        axpy(-a, &basis[j], &mut w);
        if j > 0 {
            axpy(-beta[j - 1], &basis[j - 1], &mut w);
        }
        orthogonalize(&mut w, locked);
        orthogonalize(&mut w, &basis);
        let b = norm(&w);
        *scale = scale.max(a.abs()).max(b);

        let m = basis.len();
        let full = m >= max_basis;
        let exhausted = b <= 1e-13 * scale.max(f64::MIN_POSITIVE);
        if m % 8 == 0 || full || exhausted {
            let t = Mat::from_fn(m, m, |r, c| {
                if r == c {
                    alpha[r]
                } else if r + 1 == c {
                    beta[r]
                } else if c + 1 == r {
                    beta[c]
                } else {
                    0.0
                }
            });
            let (theta, s) = dense::eigh(&t)?;
            for th in &theta {
                *scale = scale.max(th.abs());
            }
            if full || exhausted || (b * s[(m - 1, 0)]).abs() <= opts.tol * *scale {
                break (theta, s);
            }
        }
        beta.push(b);
        w.iter_mut().for_each(|x| *x /= b);
        basis.push(std::mem::replace(&mut w, vec![0.0; n]));
    };

    let ritz = |i: usize| -> Vec<f64> {
        let mut y = vec![0.0; n];
        for (r, q) in basis.iter().enumerate().take(theta.len()) {
            axpy(s[(r, i)], q, &mut y);
        }
        let ny = norm(&y);
        y.iter_mut().for_each(|x| *x /= ny);
        y
    };
    let vector = ritz(0);
    op.apply(&vector, &mut w);
    axpy(-theta[0], &vector, &mut w);
    let converged = norm(&w) <= opts.tol * *scale;
    Ok(Cycle {
        value: theta[0],
        next: (theta.len() > 1).then(|| ritz(1)),
        vector,
        converged,
    })
}

/// Lowest `k` eigenpairs of a real symmetric operator, ascending.
///
/// `start` seeds the first Krylov vector (a warm start). A small deterministic
/// random component is always mixed in so no symmetry sector is missed. One
/// eigenpair is locked per cycle, which also resolves degenerate copies.
pub fn lowest<A: LinearOperator + ?Sized>(
    op: &A,
    k: usize,
    start: Option<&[f64]>,
    opts: &LanczosOptions,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = op.dim();
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!("k = {k} not in 1..={n}")));
    }
    let mut vals: Vec<f64> = Vec::with_capacity(k);
    let mut vecs: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut guess: Option<Vec<f64>> = start.filter(|s| s.len() == n).map(<[f64]>::to_vec);
    let mut scale = 0.0f64;
    let mut seed = 1u64;
    let mut restarts = 0;
    while vecs.len() < k {
        let noise = seed_vector(n, seed);
        seed += 1;
        let weight = if vecs.is_empty() { 1e-3 } else { 1e-2 };
        let v0 = match guess.take() {
            Some(g) if norm(&g) > 0.0 => {
                let (ng, nn) = (norm(&g), norm(&noise));
                g.iter().zip(&noise).map(|(a, b)| a / ng + weight * b / nn).collect()
            }
            _ => noise,
        };
        let c = cycle(op, v0, &vecs, opts, &mut scale)?;
        if c.converged {
            vals.push(c.value);
            vecs.push(c.vector);
            guess = c.next;
        } else {
            guess = Some(c.vector);
            restarts += 1;
            if restarts > opts.max_restarts {
                return Err(Error::NoConvergence(format!(
                    "lanczos: {} of {k} eigenpairs after {restarts} restarts",
                    vecs.len()
                )));
            }
        }
    }
    let mut idx: Vec<usize> = (0..k).collect();
    idx.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
    Ok((
        idx.iter().map(|&i| vals[i]).collect(),
        idx.iter().map(|&i| vecs[i].clone()).collect(),
    ))
}
