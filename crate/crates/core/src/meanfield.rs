//! Mean-field ground state: minimization of E(psi1, psi2) over real order parameters.

use std::cell::RefCell;

use nalgebra_sparse::CsrMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dense, lanczos, LanczosOptions, LinearOperator};
use crate::model::operator::{operator, quadrature, OperatorKind};
use crate::model::space::{HilbertSpace, Truncation};
use crate::model::{h_single_site, ModelParams};
use crate::spectra::{resolve_cutoff, CutoffPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Phase {
    Mi,
    Sf,
}

impl Phase {
    pub fn label(&self) -> &'static str {
        match self {
            Phase::Mi => "MI",
            Phase::Sf => "SF",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeanFieldOptions {
    /// Coarse grid points per axis.
    #[serde(default = "default_grid")]
    pub grid: usize,
    /// Simplex size at which the local refinement stops.
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_psi_epsilon")]
    pub psi_epsilon: f64,
    /// Box half-width; defaults to sqrt(n_max) / 2.
    #[serde(default)]
    pub psi_max: Option<f64>,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_grid() -> usize {
    21
}

fn default_tol() -> f64 {
    1e-6
}

fn default_psi_epsilon() -> f64 {
    1e-4
}

fn default_max_iter() -> usize {
    2000
}

impl Default for MeanFieldOptions {
    fn default() -> Self {
        Self {
            grid: default_grid(),
            tol: default_tol(),
            psi_epsilon: default_psi_epsilon(),
            psi_max: None,
            max_iter: default_max_iter(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldSolution {
    /// |psi1| at the minimum.
    pub psi1: f64,
    /// |psi2| at the minimum.
    pub psi2: f64,
    pub energy: f64,
    pub phase: Phase,
    /// <N_e> in the optimal ground state.
    pub n: f64,
    /// Variance of N_e in the optimal ground state.
    pub n_variance: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub boundary_hit: bool,
    pub psi_max: f64,
    pub n_max: usize,
}

/// H_MF(psi) = H0 - c1 X1 - c2 X2 + shift, assembled from fixed sparse parts.
struct MeanFieldOperator<'a> {
    h0: &'a CsrMatrix<f64>,
    x1: &'a CsrMatrix<f64>,
    x2: &'a CsrMatrix<f64>,
    c1: f64,
    c2: f64,
    shift: f64,
}

fn csr_axpy(m: &CsrMatrix<f64>, alpha: f64, x: &[f64], y: &mut [f64]) {
    if alpha == 0.0 {
        return;
    }
    let offs = m.row_offsets();
    let cols = m.col_indices();
    let vals = m.values();
    for r in 0..m.nrows() {
        let mut s = 0.0;
        for i in offs[r]..offs[r + 1] {
            s += vals[i] * x[cols[i]];
        }
        y[r] += alpha * s;
    }
}

impl LinearOperator for MeanFieldOperator<'_> {
    fn dim(&self) -> usize {
        self.h0.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.h0.apply(x, y);
        csr_axpy(self.x1, -self.c1, x, y);
        csr_axpy(self.x2, -self.c2, x, y);
        if self.shift != 0.0 {
            for (yi, xi) in y.iter_mut().zip(x) {
                *yi += self.shift * xi;
            }
        }
    }
}

/// Below this dimension the mean-field Hamiltonian is diagonalized densely.
const DENSE_MF: usize = 64;

/// Mean-field energy surface of one parameter point at a fixed cutoff.
pub struct EnergySurface {
    params: ModelParams,
    n_max: usize,
    h0: CsrMatrix<f64>,
    x1: CsrMatrix<f64>,
    x2: CsrMatrix<f64>,
    ne: CsrMatrix<f64>,
    warm: RefCell<Option<Vec<f64>>>,
    evaluations: RefCell<usize>,
}

impl EnergySurface {
    pub fn new(params: &ModelParams, n_max: usize, ceiling: usize) -> Result<Self> {
        params.validate()?;
        let space = HilbertSpace::new(params.n_atoms, Truncation::TotalPhotons { n_max }, ceiling)?;
        Ok(Self {
            params: *params,
            n_max,
            h0: h_single_site(&space, params)?.re().clone(),
            x1: quadrature(&space, 1).re().clone(),
            x2: quadrature(&space, 2).re().clone(),
            ne: operator(&space, OperatorKind::Ne).re().clone(),
            warm: RefCell::new(None),
            evaluations: RefCell::new(0),
        })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn evaluations(&self) -> usize {
        *self.evaluations.borrow()
    }

    fn ground(&self, psi1: f64, psi2: f64) -> Result<(f64, Vec<f64>)> {
        *self.evaluations.borrow_mut() += 1;
        let zt = self.params.zt();
        let op = MeanFieldOperator {
            h0: &self.h0,
            x1: &self.x1,
            x2: &self.x2,
            c1: zt * psi1,
            c2: zt * psi2,
            shift: zt * (psi1 * psi1 + psi2 * psi2),
        };
        let n = op.dim();
        if n <= DENSE_MF {
            let m = faer::Mat::from_fn(n, n, |r, c| {
                let mut e = vec![0.0; n];
                e[c] = 1.0;
                let mut y = vec![0.0; n];
                op.apply(&e, &mut y);
                y[r]
            });
            let (v, u) = dense::eigh(&m)?;
            return Ok((v[0], (0..n).map(|r| u[(r, 0)]).collect()));
        }
        let warm = self.warm.borrow().clone();
        let (vals, mut vecs) = lanczos::lowest(&op, 1, warm.as_deref(), &LanczosOptions::default())?;
        let v = vecs.swap_remove(0);
        *self.warm.borrow_mut() = Some(v.clone());
        Ok((vals[0], v))
    }

    /// Ground energy of the mean-field Hamiltonian at (psi1, psi2).
    pub fn energy(&self, psi1: f64, psi2: f64) -> Result<f64> {
        self.ground(psi1, psi2).map(|g| g.0)
    }

    /// Energy, <N_e> and its variance at (psi1, psi2).
    pub fn state_summary(&self, psi1: f64, psi2: f64) -> Result<(f64, f64, f64)> {
        let (e, v) = self.ground(psi1, psi2)?;
        let mut w = vec![0.0; v.len()];
        self.ne.apply(&v, &mut w);
        let mean: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
        let sq: f64 = w.iter().map(|x| x * x).sum();
        Ok((e, mean, (sq - mean * mean).max(0.0)))
    }
}

/// Mean-field ground energy at (psi1, psi2) with the cutoff chosen by `policy`.
pub fn energy_at(params: &ModelParams, psi1: f64, psi2: f64, policy: &CutoffPolicy) -> Result<f64> {
    let n_max = resolve_cutoff(&[*params], &[*params], policy)?;
    EnergySurface::new(params, n_max, policy.ceiling)?.energy(psi1, psi2)
}

/// Result of a Nelder-Mead run.
struct Simplex {
    x: [f64; 2],
    f: f64,
    iterations: usize,
}

/// Nelder-Mead on the box [-b, b]^2 (points are clamped into the box).
///
/// Stops when every vertex lies within `tol` of the best one.
fn nelder_mead(
    f: &dyn Fn(f64, f64) -> Result<f64>,
    start: [f64; 2],
    step: f64,
    bound: f64,
    tol: f64,
    max_iter: usize,
) -> Result<Simplex> {
    let clamp = |p: [f64; 2]| [p[0].clamp(-bound, bound), p[1].clamp(-bound, bound)];
    let eval = |p: [f64; 2]| -> Result<([f64; 2], f64)> {
        let p = clamp(p);
        Ok((p, f(p[0], p[1])?))
    };
    let mut s = vec![
        eval(start)?,
        eval([start[0] + step, start[1]])?,
        eval([start[0], start[1] + step])?,
    ];
    let mut iterations = 0;
    while iterations < max_iter {
        s.sort_by(|a, b| a.1.total_cmp(&b.1));
        let size = s[1..]
            .iter()
            .map(|v| (v.0[0] - s[0].0[0]).abs().max((v.0[1] - s[0].0[1]).abs()))
            .fold(0.0, f64::max);
        if size < tol {
            break;
        }
        iterations += 1;
        let c = [(s[0].0[0] + s[1].0[0]) / 2.0, (s[0].0[1] + s[1].0[1]) / 2.0];
        let along = |a: f64| [c[0] + a * (s[2].0[0] - c[0]), c[1] + a * (s[2].0[1] - c[1])];
        let r = eval(along(-1.0))?;
        if r.1 < s[0].1 {
            let e = eval(along(-2.0))?;
            s[2] = if e.1 < r.1 { e } else { r };
        } else if r.1 < s[1].1 {
            s[2] = r;
        } else {
            let k = if r.1 < s[2].1 { eval(along(-0.5))? } else { eval(along(0.5))? };
            if k.1 < s[2].1.min(r.1) {
                s[2] = k;
            } else {
                let b = s[0].0;
                for v in s.iter_mut().skip(1) {
                    *v = eval([(v.0[0] + b[0]) / 2.0, (v.0[1] + b[1]) / 2.0])?;
                }
            }
        }
    }
    s.sort_by(|a, b| a.1.total_cmp(&b.1));
    Ok(Simplex {
        x: s[0].0,
        f: s[0].1,
        iterations,
    })
}

/// Minimum of E(psi) on the box for one surface; the flag reports a box-edge minimum.
fn minimize_on(surface: &EnergySurface, opts: &MeanFieldOptions) -> Result<(MeanFieldSolution, bool)> {
    if opts.grid < 2 {
        return Err(Error::InvalidParameter("mean-field grid needs at least 2 points".into()));
    }
    let bound = opts.psi_max.unwrap_or_else(|| (surface.n_max() as f64).sqrt() / 2.0);
    let f = |a: f64, b: f64| surface.energy(a, b);
    let e00 = f(0.0, 0.0)?;

    // coarse grid over the half plane psi1 >= 0 (E is even under psi -> -psi)
    let step = 2.0 * bound / (opts.grid - 1) as f64;
    let mut best = ([0.0, 0.0], e00);
    for i in 0..opts.grid {
        let a = -bound + i as f64 * step;
        for j in 0..opts.grid {
            let b = -bound + j as f64 * step;
            if a < -1e-12 || (a.abs() <= 1e-12 && b < -1e-12) {
                continue;
            }
            let e = f(a, b)?;
            if e < best.1 {
                best = ([a, b], e);
            }
        }
    }
    let coarse = nelder_mead(&f, best.0, step, bound, opts.tol, opts.max_iter)?;
    let near = nelder_mead(&f, [0.0, 0.0], 0.25 * step, bound, opts.tol, opts.max_iter)?;
    let mut win = if near.f < coarse.f { near } else { coarse };
    let iterations = win.iterations;
    if win.f > e00 {
        win = Simplex {
            x: [0.0, 0.0],
            f: e00,
            iterations,
        };
    }
    let (p1, p2) = (win.x[0].abs(), win.x[1].abs());
    let hit = p1.max(p2) > bound - 10.0 * opts.tol;
    let phase = if p1.max(p2) < opts.psi_epsilon { Phase::Mi } else { Phase::Sf };
    let (psi1, psi2, energy) = match phase {
        Phase::Mi => (0.0, 0.0, e00),
        Phase::Sf => (p1, p2, win.f),
    };
    let (_, n, n_variance) = surface.state_summary(psi1, psi2)?;
    Ok((
        MeanFieldSolution {
            psi1,
            psi2,
            energy,
            phase,
            n,
            n_variance,
            iterations,
            evaluations: surface.evaluations(),
            boundary_hit: hit,
            psi_max: bound,
            n_max: surface.n_max(),
        },
        hit,
    ))
}

/// Mean-field minimum at a fixed starting cutoff.
///
/// A minimum on the box edge triggers one retry with the cutoff (and so the
/// default box) doubled; a second edge hit is an error carrying the candidate.
pub fn minimize_at(params: &ModelParams, n_max: usize, opts: &MeanFieldOptions, ceiling: usize) -> Result<MeanFieldSolution> {
    if params.t == 0.0 {
        let s = EnergySurface::new(params, n_max, ceiling)?;
        let (energy, n, n_variance) = s.state_summary(0.0, 0.0)?;
        return Ok(MeanFieldSolution {
            psi1: 0.0,
            psi2: 0.0,
            energy,
            phase: Phase::Mi,
            n,
            n_variance,
            iterations: 0,
            evaluations: 1,
            boundary_hit: false,
            psi_max: opts.psi_max.unwrap_or((n_max as f64).sqrt() / 2.0),
            n_max,
        });
    }
    let (sol, hit) = minimize_on(&EnergySurface::new(params, n_max, ceiling)?, opts)?;
    if !hit {
        return Ok(sol);
    }
    let mut wider = *opts;
    wider.psi_max = opts.psi_max.map(|b| b * std::f64::consts::SQRT_2);
    let (sol, hit) = minimize_on(&EnergySurface::new(params, 2 * n_max, ceiling)?, &wider)?;
    if hit {
        return Err(Error::BoundaryHit {
            psi_max: sol.psi_max,
            n_max: sol.n_max,
            psi1: sol.psi1,
            psi2: sol.psi2,
        });
    }
    Ok(sol)
}

/// Mean-field minimum with the cutoff chosen by `policy`.
pub fn minimize(params: &ModelParams, opts: &MeanFieldOptions, policy: &CutoffPolicy) -> Result<MeanFieldSolution> {
    let n_max = resolve_cutoff(&[*params], &[*params], policy)?;
    minimize_at(params, n_max, opts, policy.ceiling)
}

/// Phase at one point; an edge hit carries an SF candidate and counts as SF.
pub fn phase_at(params: &ModelParams, n_max: usize, opts: &MeanFieldOptions, ceiling: usize) -> Result<Phase> {
    match minimize_at(params, n_max, opts, ceiling) {
        Ok(s) => Ok(s.phase),
        Err(Error::BoundaryHit { psi1, psi2, .. }) if psi1.max(psi2) >= opts.psi_epsilon => Ok(Phase::Sf),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BisectionResult {
    pub t_c: f64,
    pub zt_c: f64,
    /// Final bracket in t.
    pub lower: f64,
    pub upper: f64,
    pub steps: usize,
}

/// Critical hopping by bisection on the MI/SF label, to a bracket of width 1e-4 w1 / z.
pub fn boundary_by_bisection(
    params: &ModelParams,
    t_range: (f64, f64),
    n_max: usize,
    opts: &MeanFieldOptions,
    ceiling: usize,
) -> Result<BisectionResult> {
    let (mut lo, mut hi) = t_range;
    if !(hi > lo) || lo < 0.0 {
        return Err(Error::InvalidParameter("t_range must satisfy 0 <= lo < hi".into()));
    }
    let at = |t: f64| phase_at(&params.with_t(t), n_max, opts, ceiling);
    let (plo, phi) = (at(lo)?, at(hi)?);
    if plo == phi {
        return Err(Error::SamePhase(plo.label()));
    }
    let width = 1e-4 * params.omega1 / params.z as f64;
    let mut steps = 0;
    while hi - lo > width {
        let mid = 0.5 * (lo + hi);
        if at(mid)? == plo {
            lo = mid;
        } else {
            hi = mid;
        }
        steps += 1;
    }
    let t_c = 0.5 * (lo + hi);
    Ok(BisectionResult {
        t_c,
        zt_c: params.z as f64 * t_c,
        lower: lo,
        upper: hi,
        steps,
    })
}
