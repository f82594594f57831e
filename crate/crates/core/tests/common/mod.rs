#![allow(dead_code)]

use nalgebra_sparse::{CooMatrix, CsrMatrix};

use tmdl::linalg::lanczos::{self, LanczosOptions};
use tmdl::model::sector::{Excitation, Ladder, Sector, SectorModel};
use tmdl::ModelParams;

// ---------------------------------------------------------------------------
// circuit composites in expanded and factored form

/// Monomials c * L1^a L2^b La^c as ((a, b, c), coefficient).
pub type Monomials = &'static [((i32, i32, i32), f64)];

pub const LT_J_PRINTED: Monomials = &[
    ((2, 2, 1), 3.0),
    ((1, 3, 1), 1.0),
    ((1, 2, 2), 2.0),
    ((1, 1, 3), 1.0),
    ((0, 3, 2), 1.0),
    ((0, 2, 3), 1.0),
];

pub const LT_J_DEDUPLICATED: Monomials = &[
    ((1, 3, 1), 1.0),
    ((1, 2, 2), 2.0),
    ((1, 1, 3), 1.0),
    ((0, 3, 2), 1.0),
    ((0, 2, 3), 1.0),
];

pub const LT_S: Monomials = &[
    ((2, 2, 1), 1.0),
    ((2, 1, 2), 1.0),
    ((1, 3, 1), 1.0),
    ((1, 2, 2), 2.0),
    ((0, 3, 2), 1.0),
];

pub const LT_C: Monomials = &[((1, 3, 1), -2.0), ((1, 2, 2), -2.0), ((0, 3, 2), -2.0)];

pub fn eval_monomials(m: Monomials, l1: f64, l2: f64, la: f64) -> f64 {
    m.iter()
        .map(|&((a, b, c), k)| k * l1.powi(a) * l2.powi(b) * la.powi(c))
        .sum()
}

pub fn sigma(l1: f64, l2: f64, la: f64) -> f64 {
    l1 * l2 + l1 * la + l2 * la
}

pub fn lt_j_dedup_factored(l1: f64, l2: f64, la: f64) -> f64 {
    l2 * la * (l2 + la) * sigma(l1, l2, la)
}

pub fn lt_s_factored(l1: f64, l2: f64, la: f64) -> f64 {
    l2 * la * (l1 + l2) * sigma(l1, l2, la)
}

pub fn lt_c_factored(l1: f64, l2: f64, la: f64) -> f64 {
    -2.0 * l2 * l2 * la * sigma(l1, l2, la)
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

// ---------------------------------------------------------------------------
// two-site exact diagonalization

/// Ladder operator as a sparse matrix from sector `from` to sector `to`.
fn ladder_matrix(m: &SectorModel, from: &Sector, to: &Sector, op: Ladder) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::new();
    let mut e = vec![0.0; from.dim()];
    for j in 0..from.dim() {
        e[j] = 1.0;
        let col = m.apply_ladders(from, to, &[(op, 1.0)], &e);
        for (i, v) in col.into_iter().enumerate() {
            if v != 0.0 {
                out.push((i, j, v));
            }
        }
        e[j] = 0.0;
    }
    out
}

fn dense_entries(m: &SectorModel, s: &Sector) -> Vec<(usize, usize, f64)> {
    let h = m.dense_hamiltonian(s);
    let mut out = Vec::new();
    for i in 0..s.dim() {
        for j in 0..s.dim() {
            if h[(i, j)] != 0.0 {
                out.push((i, j, h[(i, j)]));
            }
        }
    }
    out
}

/// Two lowest energies of two sites with hopping -t sum_s (b_s1^dag b_s2 + h.c.),
/// in the sector of total excitation `total` (twice the physical value), keeping
/// single-site labels within `window` steps of total / 2.
pub fn two_site_lowest(params: &ModelParams, n_max: usize, t: f64, total: i64, window: i64) -> (f64, f64) {
    let m = SectorModel::new(params, n_max).unwrap();
    let all = m.labels();
    let centre = total / 2;
    let mut blocks: Vec<(Sector, Sector, usize)> = Vec::new();
    let mut dim = 0;
    for l1 in &all {
        let l2 = Excitation(total - l1.0);
        if (l1.0 - centre).abs() > 2 * window || !all.contains(&l2) {
            continue;
        }
        let s1 = m.sector(*l1);
        let s2 = m.sector(l2);
        if s1.dim() == 0 || s2.dim() == 0 {
            continue;
        }
        let d = s1.dim() * s2.dim();
        blocks.push((s1, s2, dim));
        dim += d;
    }
    let mut coo = CooMatrix::new(dim, dim);
    for (s1, s2, off) in &blocks {
        let d2 = s2.dim();
        for (i, j, v) in dense_entries(&m, s1) {
            for k in 0..d2 {
                coo.push(off + i * d2 + k, off + j * d2 + k, v);
            }
        }
        for (i, j, v) in dense_entries(&m, s2) {
            for k in 0..s1.dim() {
                coo.push(off + k * d2 + i, off + k * d2 + j, v);
            }
        }
    }
    // b_s1^dag b_s2 between blocks; the hermitian conjugate is added as the transpose
    for (a1, a2, off_a) in &blocks {
        for (op1, op2) in [
            (Ladder::BPlusDag, Ladder::BPlus),
            (Ladder::BMinusDag, Ladder::BMinus),
        ] {
            let t1 = a1.label.shift(op1.delta());
            let t2 = a2.label.shift(op2.delta());
            let Some((b1, b2, off_b)) = blocks.iter().find(|(x, y, _)| x.label == t1 && y.label == t2) else {
                continue;
            };
            let m1 = ladder_matrix(&m, a1, b1, op1);
            let m2 = ladder_matrix(&m, a2, b2, op2);
            let d2a = a2.dim();
            let d2b = b2.dim();
            for &(i1, j1, v1) in &m1 {
                for &(i2, j2, v2) in &m2 {
                    let r = off_b + i1 * d2b + i2;
                    let c = off_a + j1 * d2a + j2;
                    coo.push(r, c, -t * v1 * v2);
                    coo.push(c, r, -t * v1 * v2);
                }
            }
        }
    }
    let h = CsrMatrix::from(&coo);
    let opts = LanczosOptions::default();
    let (vals, _) = lanczos::lowest(&h, 2, None, &opts).unwrap();
    (vals[0], vals[1])
}

/// Coupling at which the lowest energies of sectors `lower` and `lower + 1`
/// cross, bisected on [lo, hi].
pub fn degeneracy_point(template: &ModelParams, n_max: usize, lower: Excitation, mut lo: f64, mut hi: f64) -> f64 {
    let delta = |g: f64| {
        let m = SectorModel::new(&template.with_coupling(g), n_max).unwrap();
        let e = |l: Excitation| m.eigs(&m.sector(l), 1).unwrap().0[0];
        e(lower.shift(1)) - e(lower)
    };
    let d_lo = delta(lo);
    assert!(d_lo * delta(hi) < 0.0, "no crossing in the bracket");
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if (delta(mid) > 0.0) == (d_lo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
