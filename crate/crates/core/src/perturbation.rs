//! Second-order perturbative phase boundary.
//!
//! Around the single-site ground state |0> the mean-field energy is
//!
//!   E(psi) = E0 + sum_m (zt + z^2 t^2 R_m) psi_m^2 + 2 z^2 t^2 T psi1 psi2 + O(psi^4)
//!
//! and the Mott insulator becomes unstable when the smaller Hessian eigenvalue
//! crosses zero.

use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::dense;
use crate::model::operator::{operator, quadrature, OperatorKind, OperatorMatrix};
use crate::model::sector::{Excitation, SectorModel};
use crate::model::space::{HilbertSpace, Truncation};
use crate::model::{h_single_site, ModelParams};
use crate::spectra::{
    block_matrix, csr_to_dense, locate_jumps, lowest_real, parity_blocks, resolve_cutoff, site_ground, sweep_cutoffs,
    CutoffPolicy, SweepVariable,
};

/// Ground gap (in units of w1) below which the coefficients are refused.
pub const GAP_TOL: f64 = 1e-8;
/// Largest allowed relative contribution of the highest retained eigenstate.
pub const TAIL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PtCoefficients {
    pub r1: f64,
    pub r2: f64,
    /// Cross coefficient T.
    pub t: f64,
    /// <N_e> of the unperturbed ground state.
    pub n_lobe: f64,
    /// Exact sector label when N_e is conserved.
    pub label: Option<Excitation>,
    pub e0: f64,
    pub gap0: f64,
    /// Relative contribution of the highest retained eigenstate.
    pub tail: f64,
    pub n_max: usize,
}

/// Sum-over-states accumulator for R1, R2, T.
#[derive(Default)]
struct Sums {
    r1: f64,
    r2: f64,
    t: f64,
    last: f64,
}

impl Sums {
    /// Adds the intermediate states of one block: energies `e` (ascending) and
    /// overlaps c_m[k] = <k|x_m|0>.
    fn add(&mut self, e0: f64, e: &[f64], c1: &[f64], c2: &[f64]) {
        for k in 0..e.len() {
            let d = e0 - e[k];
            self.r1 += c1[k] * c1[k] / d;
            self.r2 += c2[k] * c2[k] / d;
            self.t += c1[k] * c2[k] / d;
        }
        if let Some(k) = e.len().checked_sub(1) {
            let d = (e0 - e[k]).abs();
            self.last = self.last.max((c1[k] * c1[k] + c2[k] * c2[k]) / d);
        }
    }
}

fn project(u: &Mat<f64>, w: &[f64]) -> Vec<f64> {
    (0..u.ncols())
        .map(|c| (0..u.nrows()).map(|r| u[(r, c)] * w[r]).sum())
        .collect()
}

fn finish(sums: Sums, e0: f64, gap0: f64, n_lobe: f64, label: Option<Excitation>, n_max: usize) -> Result<PtCoefficients> {
    let tail = sums.last / (sums.r1.abs() + sums.r2.abs()).max(f64::MIN_POSITIVE);
    if tail > TAIL_TOL {
        return Err(Error::TailNotConverged(tail));
    }
    Ok(PtCoefficients {
        r1: sums.r1,
        r2: sums.r2,
        t: sums.t,
        n_lobe,
        label,
        e0,
        gap0,
        tail,
        n_max,
    })
}

fn sector_coefficients(params: &ModelParams, n_max: usize, ceiling: usize) -> Result<PtCoefficients> {
    let model = SectorModel::with_ceiling(params, n_max, ceiling)?;
    let g = model.ground()?;
    if g.gap < GAP_TOL * params.omega1 {
        return Err(Error::DegenerateGround { gap: g.gap });
    }
    let label = g.ground.label;
    let s0 = model.sector(label);
    let (e, u) = model.eigs(&s0, 1)?;
    let (e0, u0) = (e[0], &u[0]);
    let labels = model.labels();
    let mut sums = Sums::default();
    for d in [-1, 1] {
        let l = label.shift(d);
        if !labels.contains(&l) {
            continue;
        }
        let s = model.sector(l);
        let (vals, vecs) = model.spectrum(&s)?;
        let c1 = project(&vecs, &model.apply_quadrature(&s0, &s, 1, u0));
        let c2 = project(&vecs, &model.apply_quadrature(&s0, &s, 2, u0));
        sums.add(e0, &vals, &c1, &c2);
    }
    finish(sums, e0, g.gap, label.value(), Some(label), n_max)
}

fn full_coefficients(params: &ModelParams, n_max: usize, ceiling: usize) -> Result<PtCoefficients> {
    let space = HilbertSpace::new(params.n_atoms, Truncation::TotalPhotons { n_max }, ceiling)?;
    let h = h_single_site(&space, params)?;
    // parity blocks; the quadratures flip parity
    let blocks = parity_blocks(&space);
    let mats = [block_matrix(&h, &blocks[0]), block_matrix(&h, &blocks[1])];
    let lows: Vec<(Vec<f64>, Vec<Vec<f64>>)> = mats
        .iter()
        .map(|m| lowest_real(m, m.nrows().min(2)))
        .collect::<Result<_>>()?;
    let gb = if lows[0].0[0] <= lows[1].0[0] { 0 } else { 1 };
    let ob = 1 - gb;
    let e0 = lows[gb].0[0];
    let second = lows[gb].0.get(1).copied().unwrap_or(f64::INFINITY);
    let gap0 = second.min(lows[ob].0[0]) - e0;
    if gap0 < GAP_TOL * params.omega1 {
        return Err(Error::DegenerateGround { gap: gap0 });
    }
    let mut u0 = vec![0.0; space.dim()];
    for (j, &i) in blocks[gb].iter().enumerate() {
        u0[i] = lows[gb].1[0][j];
    }
    let (vals, vecs) = dense::eigh(&csr_to_dense(&mats[ob]))?;
    let restrict = |x: &OperatorMatrix| -> Vec<f64> {
        let mut y = vec![0.0; space.dim()];
        x.apply_real(&u0, &mut y);
        blocks[ob].iter().map(|&i| y[i]).collect()
    };
    let c1 = project(&vecs, &restrict(&quadrature(&space, 1)));
    let c2 = project(&vecs, &restrict(&quadrature(&space, 2)));
    let mut sums = Sums::default();
    sums.add(e0, &vals, &c1, &c2);
    let ne = operator(&space, OperatorKind::Ne);
    finish(sums, e0, gap0, ne.expectation_real(&u0), None, n_max)
}


/// R1, R2 and T at a given total-photon cutoff.
///
/// Degenerate parameters sum over the two neighbouring excitation sectors (the
/// only states the quadratures reach); otherwise over the opposite-parity block.
pub fn pt_coefficients_at(params: &ModelParams, n_max: usize, ceiling: usize) -> Result<PtCoefficients> {
    params.validate()?;
    if params.is_degenerate() {
        sector_coefficients(params, n_max, ceiling)
    } else {
        full_coefficients(params, n_max, ceiling)
    }
}

/// R1, R2 and T with the cutoff chosen by `policy`.
pub fn pt_coefficients(params: &ModelParams, policy: &CutoffPolicy) -> Result<PtCoefficients> {
    let n_max = resolve_cutoff(&[*params], &[*params], policy)?;
    pt_coefficients_at(params, n_max, policy.ceiling)
}

/// Eigenvalues (eps_-, eps_+) of the Hessian of the second-order energy.
pub fn hessian_eigenvalues(c: &PtCoefficients, z: usize, t: f64) -> (f64, f64) {
    let zt = z as f64 * t;
    let s = ((c.r1 - c.r2).powi(2) + 4.0 * c.t * c.t).sqrt();
    (
        2.0 * zt + zt * zt * (c.r1 + c.r2 - s),
        2.0 * zt + zt * zt * (c.r1 + c.r2 + s),
    )
}

/// Second-order energy correction at (psi1, psi2).
pub fn second_order_energy(c: &PtCoefficients, z: usize, t: f64, psi1: f64, psi2: f64) -> f64 {
    let zt = z as f64 * t;
    (zt + zt * zt * c.r1) * psi1 * psi1 + (zt + zt * zt * c.r2) * psi2 * psi2
        + 2.0 * zt * zt * c.t * psi1 * psi2
}

/// Smallest positive root of the Hessian eigenvalues,
/// t = -2 / (z [(R1 + R2) +- sqrt((R1 - R2)^2 + 4 T^2)]).
pub fn critical_t(c: &PtCoefficients, z: usize) -> Result<f64> {
    if z == 0 {
        return Err(Error::InvalidParameter("z must be >= 1".into()));
    }
    let s = ((c.r1 - c.r2).powi(2) + 4.0 * c.t * c.t).sqrt();
    [c.r1 + c.r2 - s, c.r1 + c.r2 + s]
        .iter()
        .filter(|&&d| d < 0.0)
        .map(|&d| -2.0 / (z as f64 * d))
        .filter(|t| t.is_finite() && *t > 0.0)
        .min_by(f64::total_cmp)
        .ok_or(Error::NoPositiveRoot)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    /// Swept variable (g or mu).
    pub x: f64,
    pub t_c: f64,
    pub zt_c: f64,
    pub n_lobe: f64,
    /// t_c forced to zero at a level crossing.
    pub pinched: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseBoundary {
    pub variable: SweepVariable,
    pub z: usize,
    pub n_max: usize,
    /// Grid points and inserted crossing points, ascending in x.
    pub points: Vec<BoundaryPoint>,
}

impl PhaseBoundary {
    /// Number of lobes: one more than the number of interior pinch points.
    pub fn lobe_count(&self) -> usize {
        let first = self.points.first().map_or(0.0, |p| p.x);
        let last = self.points.last().map_or(0.0, |p| p.x);
        1 + self
            .points
            .iter()
            .filter(|p| p.pinched && p.x > first && p.x < last)
            .count()
    }

    pub fn pinch_points(&self) -> Vec<f64> {
        self.points.iter().filter(|p| p.pinched).map(|p| p.x).collect()
    }
}

/// Width to which level crossings are located along a boundary sweep.
pub const PINCH_WIDTH: f64 = 1e-7;
/// Grid points this close to a crossing are set to t_c = 0.
pub const PINCH_WINDOW: f64 = 1e-6;

/// Critical hopping along a g or mu grid.
///
/// Level crossings of the site ground state are located by bisection and
/// inserted as pinch points with t_c = 0; grid points within 1e-6 of one are
/// pinched as well.
pub fn boundary_curve(
    template: &ModelParams,
    variable: SweepVariable,
    grid: &[f64],
    z: usize,
    policy: &CutoffPolicy,
) -> Result<PhaseBoundary> {
    template.validate()?;
    if grid.is_empty() || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter("grid must be non-empty and ascending".into()));
    }
    let points: Vec<ModelParams> = grid.iter().map(|&x| variable.apply(template, x)).collect();
    let cutoffs = sweep_cutoffs(&points, points.last().unwrap(), policy)?;
    let n_max = cutoffs.iter().copied().max().unwrap_or(0);

    let labels: Vec<Result<(i64, f64)>> = points
        .par_iter()
        .zip(&cutoffs)
        .map(|(p, &n)| {
            let g = site_ground(p, n, policy.ceiling)?;
            let l = g.label.map_or(g.parity.round() as i64, |l| l.0);
            Ok((l, g.excitation))
        })
        .collect();
    let labels: Vec<(i64, f64)> = labels.into_iter().collect::<Result<_>>()?;
    let jumps = locate_jumps(template, variable, grid, &labels, &cutoffs, PINCH_WIDTH, policy.ceiling)?;
    let crossings: Vec<f64> = jumps.iter().map(|j| j.location()).collect();

    let computed: Vec<Result<BoundaryPoint>> = points
        .par_iter()
        .zip(grid)
        .zip(&labels)
        .zip(&cutoffs)
        .map(|(((p, &x), &(_, n)), &cut)| {
            let pinched = crossings.iter().any(|c| (c - x).abs() < PINCH_WINDOW);
            let t_c = if pinched {
                0.0
            } else {
                match pt_coefficients_at(p, cut, policy.ceiling) {
                    Ok(c) => critical_t(&c, z)?,
                    Err(Error::DegenerateGround { .. }) => 0.0,
                    Err(e) => return Err(e),
                }
            };
            Ok(BoundaryPoint {
                x,
                t_c,
                zt_c: z as f64 * t_c,
                n_lobe: n,
                pinched: pinched || t_c == 0.0,
            })
        })
        .collect();
    let mut out: Vec<BoundaryPoint> = computed.into_iter().collect::<Result<_>>()?;
    for j in &jumps {
        let x = j.location();
        if !out.iter().any(|p| (p.x - x).abs() < PINCH_WINDOW) {
            out.push(BoundaryPoint {
                x,
                t_c: 0.0,
                zt_c: 0.0,
                n_lobe: j.n_before.max(j.n_after),
                pinched: true,
            });
        }
    }
    out.sort_by(|a, b| a.x.total_cmp(&b.x));
    Ok(PhaseBoundary {
        variable,
        z,
        n_max,
        points: out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coeffs(r1: f64, r2: f64, t: f64) -> PtCoefficients {
        PtCoefficients {
            r1,
            r2,
            t,
            n_lobe: -0.5,
            label: None,
            e0: 0.0,
            gap0: 1.0,
            tail: 0.0,
            n_max: 0,
        }
    }

    #[test]
    fn closed_form_roots() {
        let c = coeffs(-1.0, -1.0, 0.0);
        assert!((critical_t(&c, 2).unwrap() - 0.5).abs() < 1e-15);
        assert!((critical_t(&c, 4).unwrap() - 0.25).abs() < 1e-15);
        let c = coeffs(-2.0, -1.0, 0.0);
        assert!((critical_t(&c, 1).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn no_positive_root() {
        assert!(matches!(critical_t(&coeffs(1.0, 1.0, 0.0), 2), Err(Error::NoPositiveRoot)));
    }

    #[test]
    fn hessian_vanishes_at_root() {
        let c = coeffs(-1.7, -0.9, 0.3);
        let tc = critical_t(&c, 3).unwrap();
        let (em, ep) = hessian_eigenvalues(&c, 3, tc);
        assert!(em.abs() < 1e-12);
        assert!(ep > 0.0);
    }

    #[test]
    fn hessian_matches_second_differences() {
        // eigenvalues of the numerically differentiated second-order energy
        let c = coeffs(-1.3, -0.8, 0.25);
        for t in [0.05, 0.21, 0.4] {
            let h = 1e-3;
            let e = |a: f64, b: f64| second_order_energy(&c, 2, t, a, b);
            let m11 = (e(h, 0.0) - 2.0 * e(0.0, 0.0) + e(-h, 0.0)) / (h * h);
            let m22 = (e(0.0, h) - 2.0 * e(0.0, 0.0) + e(0.0, -h)) / (h * h);
            let m12 = (e(h, h) - e(h, -h) - e(-h, h) + e(-h, -h)) / (4.0 * h * h);
            let mean = 0.5 * (m11 + m22);
            let rad = (0.25 * (m11 - m22).powi(2) + m12 * m12).sqrt();
            let (em, ep) = hessian_eigenvalues(&c, 2, t);
            assert!((em - (mean - rad)).abs() < 1e-8);
            assert!((ep - (mean + rad)).abs() < 1e-8);
        }
    }

    #[test]
    fn weak_coupling_limit() {
        for n_atoms in [1, 2, 3] {
            let p = ModelParams::degenerate(1.0, 1.0, 1e-3, n_atoms);
            let c = pt_coefficients(&p, &CutoffPolicy::default()).unwrap();
            assert!((c.r1 + 1.0).abs() < 1e-4, "{c:?}");
            assert!((c.r2 + 1.0).abs() < 1e-4);
            assert!(c.t.abs() < 1e-6);
        }
    }

    #[test]
    fn sector_and_full_routes_agree() {
        let p = ModelParams::degenerate(1.0, 1.0, 0.9, 2);
        let a = sector_coefficients(&p, 16, 20_000).unwrap();
        let b = full_coefficients(&p, 16, 20_000).unwrap();
        assert!((a.r1 - b.r1).abs() < 1e-9 * a.r1.abs());
        assert!((a.r2 - b.r2).abs() < 1e-9 * a.r2.abs());
        assert!((a.t - b.t).abs() < 1e-9);
        assert!((a.n_lobe - b.n_lobe).abs() < 1e-9);
        assert!((a.e0 - b.e0).abs() < 1e-10);
    }

    #[test]
    fn coefficients_negative() {
        for g in [0.3, 1.0, 1.7] {
            let p = ModelParams::degenerate(1.0, 1.0, g, 1);
            let c = pt_coefficients(&p, &CutoffPolicy::default()).unwrap();
            assert!(c.r1 < 0.0 && c.r2 < 0.0);
            assert!(c.tail < TAIL_TOL);
        }
    }
}
