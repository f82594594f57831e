//! Eigensolver contract, ground-state observables, staircases and low-lying spectra.

use faer::Mat;
use nalgebra_sparse::{CooMatrix, CsrMatrix};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dense, lanczos, LanczosOptions};
use crate::model::operator::{operator, OperatorKind, OperatorMatrix};
use crate::model::sector::{Excitation, SectorModel};
use crate::model::space::{HilbertSpace, Truncation, DEFAULT_DIM_CEILING};
use crate::model::{h_dicke, h_single_site, ModelParams};

/// Real matrices up to this dimension are diagonalized densely.
pub const DENSE_LIMIT: usize = 600;
/// Complex matrices have no iterative path; larger ones are rejected.
pub const DENSE_COMPLEX_LIMIT: usize = 4000;
/// Ground states closer than this (in units of w) are flagged degenerate.
pub const DEGENERACY_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct SpectrumResult {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<Vec<Complex64>>,
    /// <N_e> per state.
    pub excitation: Vec<f64>,
    /// <parity_total> per state.
    pub parity: Vec<f64>,
}

impl SpectrumResult {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }
}

/// Lowest `k` eigenpairs of a Hermitian operator with their N_e and parity expectations.
pub fn eigs_lowest(h: &OperatorMatrix, k: usize) -> Result<SpectrumResult> {
    let n = h.dim();
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!("k = {k} not in 1..={n}")));
    }
    let herr = h.hermiticity_error();
    if herr > 1e-10 {
        return Err(Error::NotHermitian(herr));
    }
    let (vals, vecs): (Vec<f64>, Vec<Vec<Complex64>>) = if h.is_real() {
        let (vals, vecs) = if n <= DENSE_LIMIT {
            let (v, u) = dense::eigh(&h.to_dense_real())?;
            let cols = (0..k).map(|c| (0..n).map(|r| u[(r, c)]).collect()).collect();
            (v[..k].to_vec(), cols)
        } else {
            lanczos::lowest(h, k, None, &LanczosOptions::default())?
        };
        let cvecs = vecs
            .into_iter()
            .map(|v: Vec<f64>| v.into_iter().map(|x| Complex64::new(x, 0.0)).collect())
            .collect();
        (vals, cvecs)
    } else {
        if n > DENSE_COMPLEX_LIMIT {
            return Err(Error::CutoffTooLarge {
                dim: n,
                ceiling: DENSE_COMPLEX_LIMIT,
            });
        }
        let (v, u) = dense::eigh_complex(&h.to_dense())?;
        let cols = (0..k)
            .map(|c| {
                (0..n)
                    .map(|r| {
                        let z = u[(r, c)];
                        Complex64::new(z.re, z.im)
                    })
                    .collect()
            })
            .collect();
        (v[..k].to_vec(), cols)
    };

    let scale = h.norm_bound().max(f64::MIN_POSITIVE);
    for (e, v) in vals.iter().zip(&vecs) {
        let hv = h.apply(v);
        let r: f64 = hv
            .iter()
            .zip(v)
            .map(|(a, b)| (a - b * *e).norm_sqr())
            .sum::<f64>()
            .sqrt();
        if r > 1e-9 * scale {
            return Err(Error::NoConvergence(format!(
                "eigenpair residual {r:e} exceeds 1e-9 ||H||"
            )));
        }
    }

    let space = HilbertSpace::from_tag(h.tag())?;
    let ne = operator(&space, OperatorKind::Ne);
    let par = operator(&space, OperatorKind::ParityTotal);
    let excitation = vecs.iter().map(|v| ne.expectation(v).re).collect();
    let parity = vecs.iter().map(|v| par.expectation(v).re).collect();
    Ok(SpectrumResult {
        eigenvalues: vals,
        eigenvectors: vecs,
        excitation,
        parity,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundExpectation {
    pub value: f64,
    pub gap: f64,
    /// Set when the two lowest levels are closer than `DEGENERACY_TOL`.
    pub degenerate: bool,
}

/// <psi0|O|psi0>, flagging a degenerate ground state.
pub fn ground_expectation(h: &OperatorMatrix, o: &OperatorMatrix) -> Result<GroundExpectation> {
    if h.tag() != o.tag() || h.dim() != o.dim() {
        return Err(Error::DimensionMismatch(
            "Hamiltonian and observable act on different spaces".into(),
        ));
    }
    let k = h.dim().min(2);
    let s = eigs_lowest(h, k)?;
    let gap = if k > 1 {
        s.eigenvalues[1] - s.eigenvalues[0]
    } else {
        f64::INFINITY
    };
    Ok(GroundExpectation {
        value: o.expectation(&s.eigenvectors[0]).re,
        gap,
        degenerate: gap < DEGENERACY_TOL,
    })
}

// ---------------------------------------------------------------------------
// cutoffs

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CutoffPolicy {
    /// Fixed cutoff; skips the convergence search when set.
    #[serde(default)]
    pub n_max: Option<usize>,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    #[serde(default = "default_ceiling")]
    pub ceiling: usize,
}

fn default_rel_tol() -> f64 {
    1e-8
}

fn default_ceiling() -> usize {
    DEFAULT_DIM_CEILING
}

impl Default for CutoffPolicy {
    fn default() -> Self {
        Self {
            n_max: None,
            rel_tol: default_rel_tol(),
            ceiling: default_ceiling(),
        }
    }
}

impl CutoffPolicy {
    pub fn fixed(n_max: usize) -> Self {
        Self {
            n_max: Some(n_max),
            ..Self::default()
        }
    }
}

/// Doubles the cutoff from `start` until `f` changes by less than
/// `rel_tol * |f| + 1e-14` between successive cutoffs.
///
/// Returns the value at the smaller of the two agreeing cutoffs and that cutoff.
pub fn converge_cutoff(
    start: usize,
    rel_tol: f64,
    mut f: impl FnMut(usize) -> Result<f64>,
) -> Result<(f64, usize)> {
    let mut n = start;
    let mut v = f(n)?;
    loop {
        let n2 = (2 * n).max(1);
        let v2 = match f(n2) {
            Ok(v2) => v2,
            Err(Error::CutoffTooLarge { dim, ceiling }) => {
                return Err(Error::CutoffNotConverged(format!(
                    "memory ceiling {ceiling} reached (dimension {dim}) before convergence at n_max = {n}"
                )))
            }
            Err(e) => return Err(e),
        };
        if (v2 - v).abs() <= rel_tol * v2.abs() + 1e-14 {
            return Ok((v, n));
        }
        n = n2;
        v = v2;
    }
}

/// Ground-state data of a single site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteGround {
    pub energy: f64,
    /// E1 - E0.
    pub gap: f64,
    /// Exact sector label (degenerate parameters only).
    pub label: Option<Excitation>,
    /// <N_e> in the ground state.
    pub excitation: f64,
    /// <parity_total> in the ground state.
    pub parity: f64,
    pub n_max: usize,
}

/// Ground state of the single-site Hamiltonian at a given total-photon cutoff.
///
/// Degenerate parameters use the excitation sectors; otherwise the full space.
pub fn site_ground(params: &ModelParams, n_max: usize, ceiling: usize) -> Result<SiteGround> {
    if params.is_degenerate() {
        let g = SectorModel::with_ceiling(params, n_max, ceiling)?.ground()?;
        let label = g.ground.label;
        // parity_total = exp(i pi (N_e + N/2)) on a sector
        let parity = if (label.0 + params.n_atoms as i64) / 2 % 2 == 0 { 1.0 } else { -1.0 };
        return Ok(SiteGround {
            energy: g.ground.energy,
            gap: g.gap,
            label: Some(label),
            excitation: label.value(),
            parity,
            n_max,
        });
    }
    let space = HilbertSpace::new(params.n_atoms, Truncation::TotalPhotons { n_max }, ceiling)?;
    let h = h_single_site(&space, params)?;
    // each parity block separately, so a crossing of the two parities never
    // shows up as a near-degenerate pair inside one eigensolve
    let blocks = parity_blocks(&space);
    let lows: Vec<(Vec<f64>, Vec<Vec<f64>>)> = blocks
        .iter()
        .map(|idx| {
            if idx.is_empty() {
                return Ok((Vec::new(), Vec::new()));
            }
            lowest_real(&block_matrix(&h, idx), idx.len().min(2))
        })
        .collect::<Result<_>>()?;
    let first = |b: usize| lows[b].0.first().copied().unwrap_or(f64::INFINITY);
    let gb = if first(0) <= first(1) { 0 } else { 1 };
    let energy = first(gb);
    let next = lows[gb].0.get(1).copied().unwrap_or(f64::INFINITY).min(first(1 - gb));
    let mut ground = vec![0.0; space.dim()];
    for (j, &i) in blocks[gb].iter().enumerate() {
        ground[i] = lows[gb].1[0][j];
    }
    let ne = operator(&space, OperatorKind::Ne);
    Ok(SiteGround {
        energy,
        gap: next - energy,
        label: None,
        excitation: ne.expectation_real(&ground),
        parity: if gb == 0 { 1.0 } else { -1.0 },
        n_max,
    })
}

/// Basis indices of the even and odd blocks of the total parity (-1)^(n1 + n2 + k).
pub fn parity_blocks(space: &HilbertSpace) -> [Vec<usize>; 2] {
    let mut blocks: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, st) in space.states().enumerate() {
        blocks[(st.n1 + st.n2 + st.k) % 2].push(i);
    }
    blocks
}

/// Real part of `h` restricted to the basis states `idx`.
pub fn block_matrix(h: &OperatorMatrix, idx: &[usize]) -> CsrMatrix<f64> {
    let mut pos = vec![usize::MAX; h.dim()];
    for (j, &i) in idx.iter().enumerate() {
        pos[i] = j;
    }
    let re = h.re();
    let (offs, cols, vals) = (re.row_offsets(), re.col_indices(), re.values());
    let mut coo = CooMatrix::new(idx.len(), idx.len());
    for (r, &i) in idx.iter().enumerate() {
        for p in offs[i]..offs[i + 1] {
            let c = pos[cols[p]];
            if c != usize::MAX {
                coo.push(r, c, vals[p]);
            }
        }
    }
    CsrMatrix::from(&coo)
}

/// Dense copy of a CSR matrix.
pub fn csr_to_dense(m: &CsrMatrix<f64>) -> Mat<f64> {
    let mut d = Mat::<f64>::zeros(m.nrows(), m.ncols());
    for (r, c, v) in m.triplet_iter() {
        d[(r, c)] += *v;
    }
    d
}

/// Lowest `k` eigenpairs of a real symmetric matrix: dense up to DENSE_LIMIT, Lanczos beyond.
pub fn lowest_real(m: &CsrMatrix<f64>, k: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = m.nrows();
    if n <= DENSE_LIMIT {
        let (v, u) = dense::eigh(&csr_to_dense(m))?;
        let cols = (0..k).map(|c| (0..n).map(|r| u[(r, c)]).collect()).collect();
        Ok((v[..k].to_vec(), cols))
    } else {
        lanczos::lowest(m, k, None, &LanczosOptions::default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    GroundEnergy,
    GroundExcitation,
}

/// Converged value of a ground-state observable and the cutoff used.
///
/// The search starts at `start` (default: the displacement-based cutoff).
pub fn cutoff_converged(
    params: &ModelParams,
    observable: Observable,
    policy: &CutoffPolicy,
    start: Option<usize>,
) -> Result<(f64, usize)> {
    let start = start.unwrap_or_else(|| params.default_cutoff());
    converge_cutoff(start, policy.rel_tol, |n| {
        let g = site_ground(params, n, policy.ceiling)?;
        Ok(match observable {
            Observable::GroundEnergy => g.energy,
            Observable::GroundExcitation => g.excitation,
        })
    })
}

/// Cutoff for a family of parameter points.
///
/// A fixed policy cutoff is returned as is. Otherwise the ground energy is
/// converged at each of the `hardest` points (largest coupling or chemical
/// potential of a sweep), starting from the largest displacement-based default
/// of `all`, and the largest converged cutoff is returned.
pub fn resolve_cutoff(
    all: &[ModelParams],
    hardest: &[ModelParams],
    policy: &CutoffPolicy,
) -> Result<usize> {
    if let Some(n) = policy.n_max {
        return Ok(n);
    }
    let start = all.iter().map(ModelParams::default_cutoff).max().unwrap_or(12);
    let mut n_max = start;
    for p in hardest {
        let (_, n) = cutoff_converged(p, Observable::GroundEnergy, policy, Some(start))?;
        n_max = n_max.max(n);
    }
    Ok(n_max)
}

/// Cutoff of every point of a sweep.
///
/// A fixed policy cutoff applies everywhere. Otherwise the ground energy is
/// converged at `hardest`, and each point gets its displacement-based default
/// scaled by the factor the hardest point needed.
pub fn sweep_cutoffs(points: &[ModelParams], hardest: &ModelParams, policy: &CutoffPolicy) -> Result<Vec<usize>> {
    if let Some(n) = policy.n_max {
        return Ok(vec![n; points.len()]);
    }
    let base = hardest.default_cutoff();
    let (_, n_hard) = cutoff_converged(hardest, Observable::GroundEnergy, policy, Some(base))?;
    let factor = n_hard as f64 / base as f64;
    Ok(points
        .iter()
        .map(|p| (p.default_cutoff() as f64 * factor).ceil() as usize)
        .collect())
}

// ---------------------------------------------------------------------------
// sweeps and staircases

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    G,
    Mu,
}

impl SweepVariable {
    pub fn name(&self) -> &'static str {
        match self {
            SweepVariable::G => "g",
            SweepVariable::Mu => "mu",
        }
    }

    /// Template with the swept variable set to `x`.
    pub fn apply(&self, template: &ModelParams, x: f64) -> ModelParams {
        match self {
            SweepVariable::G => template.with_coupling(x),
            SweepVariable::Mu => template.with_mu(x),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub variable: SweepVariable,
    pub grid: Vec<f64>,
}

/// `count` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count)
            .map(|i| {
                if i == count - 1 {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (count - 1) as f64
                }
            })
            .collect(),
    }
}

impl Sweep {
    pub fn new(variable: SweepVariable, grid: Vec<f64>) -> Result<Self> {
        if grid.is_empty() {
            return Err(Error::InvalidParameter("empty sweep grid".into()));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) || grid.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("sweep grid must be finite and ascending".into()));
        }
        if variable == SweepVariable::G && grid[0] < 0.0 {
            return Err(Error::InvalidParameter("coupling grid must be >= 0".into()));
        }
        Ok(Self { variable, grid })
    }

    /// Parses `var:lo:hi:count`, e.g. `g:0:2:201`.
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("sweep `{s}` is not of the form var:lo:hi:count"));
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 4 {
            return Err(bad());
        }
        let variable = match parts[0] {
            "g" => SweepVariable::G,
            "mu" => SweepVariable::Mu,
            other => return Err(Error::Config(format!("unknown sweep variable `{other}`"))),
        };
        let lo: f64 = parts[1].parse().map_err(|_| bad())?;
        let hi: f64 = parts[2].parse().map_err(|_| bad())?;
        let count: usize = parts[3].parse().map_err(|_| bad())?;
        Self::new(variable, linspace(lo, hi, count))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jump {
    /// Bracket of the crossing in the sweep variable.
    pub lower: f64,
    pub upper: f64,
    pub n_before: f64,
    pub n_after: f64,
}

impl Jump {
    pub fn location(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaircaseCurve {
    pub variable: SweepVariable,
    pub grid: Vec<f64>,
    /// Ground-state <N_e> per grid point.
    pub n: Vec<f64>,
    /// True where the ground label changes before the next grid point.
    pub jump_flags: Vec<bool>,
    pub jumps: Vec<Jump>,
    /// Largest cutoff used along the sweep.
    pub n_max: usize,
}

/// Integer-valued ground-state label: the excitation sector for degenerate
/// parameters, the parity otherwise.
fn ground_label(params: &ModelParams, n_max: usize, ceiling: usize) -> Result<(i64, SiteGround)> {
    let g = site_ground(params, n_max, ceiling)?;
    let label = match g.label {
        Some(l) => l.0,
        None => g.parity.round() as i64,
    };
    Ok((label, g))
}

/// Locates label changes between grid points by recursive bisection to `width`.
///
/// `cutoffs` holds the cutoff of every grid point; a bracket is refined at the
/// larger of its two end cutoffs.
pub fn locate_jumps(
    template: &ModelParams,
    variable: SweepVariable,
    grid: &[f64],
    labels: &[(i64, f64)],
    cutoffs: &[usize],
    width: f64,
    ceiling: usize,
) -> Result<Vec<Jump>> {
    fn refine(
        tpl: &ModelParams,
        var: SweepVariable,
        a: (f64, i64, f64),
        b: (f64, i64, f64),
        n_max: usize,
        width: f64,
        ceiling: usize,
        out: &mut Vec<Jump>,
    ) -> Result<()> {
        if a.1 == b.1 {
            return Ok(());
        }
        if b.0 - a.0 < width {
            out.push(Jump {
                lower: a.0,
                upper: b.0,
                n_before: a.2,
                n_after: b.2,
            });
            return Ok(());
        }
        let mid = 0.5 * (a.0 + b.0);
        let (lm, g) = ground_label(&var.apply(tpl, mid), n_max, ceiling)?;
        let m = (mid, lm, g.excitation);
        refine(tpl, var, a, m, n_max, width, ceiling, out)?;
        refine(tpl, var, m, b, n_max, width, ceiling, out)
    }

    let pairs: Vec<usize> = (0..grid.len().saturating_sub(1))
        .filter(|&i| labels[i].0 != labels[i + 1].0)
        .collect();
    let found: Vec<Result<Vec<Jump>>> = pairs
        .par_iter()
        .map(|&i| {
            let mut out = Vec::new();
            refine(
                template,
                variable,
                (grid[i], labels[i].0, labels[i].1),
                (grid[i + 1], labels[i + 1].0, labels[i + 1].1),
                cutoffs[i].max(cutoffs[i + 1]),
                width,
                ceiling,
                &mut out,
            )?;
            Ok(out)
        })
        .collect();
    let mut jumps = Vec::new();
    for f in found {
        jumps.extend(f?);
    }
    Ok(jumps)
}

/// Ground-state excitation density along a sweep of g or mu, with jumps located
/// by bisection to width < 1e-4.
pub fn staircase(
    template: &ModelParams,
    sweep: &Sweep,
    policy: &CutoffPolicy,
) -> Result<StaircaseCurve> {
    staircase_with_width(template, sweep, policy, 1e-4)
}

pub fn staircase_with_width(
    template: &ModelParams,
    sweep: &Sweep,
    policy: &CutoffPolicy,
    width: f64,
) -> Result<StaircaseCurve> {
    template.validate()?;
    let points: Vec<ModelParams> = sweep
        .grid
        .iter()
        .map(|&x| sweep.variable.apply(template, x))
        .collect();
    let cutoffs = sweep_cutoffs(&points, points.last().unwrap(), policy)?;
    let n_max = cutoffs.iter().copied().max().unwrap_or(0);
    let labels: Vec<Result<(i64, f64)>> = points
        .par_iter()
        .zip(&cutoffs)
        .map(|(p, &n)| ground_label(p, n, policy.ceiling).map(|(l, g)| (l, g.excitation)))
        .collect();
    let labels: Vec<(i64, f64)> = labels.into_iter().collect::<Result<_>>()?;
    let jumps = locate_jumps(template, sweep.variable, &sweep.grid, &labels, &cutoffs, width, policy.ceiling)?;
    if template.is_degenerate() {
        for j in &jumps {
            let dn = j.n_after - j.n_before;
            if (dn.abs() - 1.0).abs() > 1e-9 {
                return Err(Error::NonUnitJump(dn));
            }
        }
    }
    let jump_flags = (0..labels.len())
        .map(|i| i + 1 < labels.len() && labels[i].0 != labels[i + 1].0)
        .collect();
    Ok(StaircaseCurve {
        variable: sweep.variable,
        grid: sweep.grid.clone(),
        n: labels.iter().map(|l| l.1).collect(),
        jump_flags,
        jumps,
        n_max,
    })
}

/// Standard Dicke model comparison curve: <N_s> and its variance along g.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DickeCurve {
    pub grid: Vec<f64>,
    pub n_s: Vec<f64>,
    pub variance: Vec<f64>,
    pub n_max: usize,
}

fn dicke_ground(params: &ModelParams, n_max: usize, ceiling: usize) -> Result<(f64, f64, f64)> {
    let space = HilbertSpace::new(
        params.n_atoms,
        Truncation::Box {
            n_max1: n_max,
            n_max2: 0,
        },
        ceiling,
    )?;
    let h = h_dicke(&space, params)?;
    let (vals, vecs) = if space.dim() <= DENSE_LIMIT {
        let (v, u) = dense::eigh(&h.to_dense_real())?;
        (vec![v[0]], vec![(0..space.dim()).map(|r| u[(r, 0)]).collect::<Vec<f64>>()])
    } else {
        lanczos::lowest(&h, 1, None, &LanczosOptions::default())?
    };
    let ns = operator(&space, OperatorKind::Ns);
    let mean = ns.expectation_real(&vecs[0]);
    let sq = ns.mul(&ns)?.expectation_real(&vecs[0]);
    Ok((vals[0], mean, sq - mean * mean))
}

pub fn dicke_curve(template: &ModelParams, grid: &[f64], policy: &CutoffPolicy) -> Result<DickeCurve> {
    template.validate()?;
    let gmax = grid.iter().copied().fold(0.0, f64::max);
    let hard = template.with_coupling(gmax);
    let n_max = match policy.n_max {
        Some(n) => n,
        None => {
            converge_cutoff(hard.default_cutoff(), policy.rel_tol, |n| {
                dicke_ground(&hard, n, policy.ceiling).map(|r| r.0)
            })?
            .1
        }
    };
    let rows: Vec<Result<(f64, f64)>> = grid
        .par_iter()
        .map(|&g| dicke_ground(&template.with_coupling(g), n_max, policy.ceiling).map(|r| (r.1, r.2)))
        .collect();
    let rows: Vec<(f64, f64)> = rows.into_iter().collect::<Result<_>>()?;
    Ok(DickeCurve {
        grid: grid.to_vec(),
        n_s: rows.iter().map(|r| r.0).collect(),
        variance: rows.iter().map(|r| r.1).collect(),
        n_max,
    })
}

// ---------------------------------------------------------------------------
// low-lying spectra

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub g: f64,
    /// E_i - E_0 for i = 1..k.
    pub gaps: Vec<f64>,
    /// <N_e> of each of the k lowest levels.
    pub n: Vec<f64>,
}

/// Lowest `k` levels along a coupling grid: gaps to the ground state and <N_e> per level.
pub fn low_lying_gap_profile(
    template: &ModelParams,
    g_grid: &[f64],
    k: usize,
    policy: &CutoffPolicy,
) -> Result<(Vec<GapRow>, usize)> {
    template.validate()?;
    if k < 2 {
        return Err(Error::InvalidParameter("gap profile needs k >= 2".into()));
    }
    let points: Vec<ModelParams> = g_grid.iter().map(|&g| template.with_coupling(g)).collect();
    let hardest: Vec<ModelParams> = points.last().copied().into_iter().collect();
    let n_max = resolve_cutoff(&points, &hardest, policy)?;
    let rows: Vec<Result<GapRow>> = points
        .par_iter()
        .zip(g_grid)
        .map(|(p, &g)| {
            let (e, n): (Vec<f64>, Vec<f64>) = if p.is_degenerate() {
                SectorModel::with_ceiling(p, n_max, policy.ceiling)?
                    .low_levels(k)?
                    .into_iter()
                    .map(|l| (l.energy, l.label.value()))
                    .unzip()
            } else {
                let space = HilbertSpace::new(p.n_atoms, Truncation::TotalPhotons { n_max }, policy.ceiling)?;
                let s = eigs_lowest(&h_single_site(&space, p)?, k)?;
                (s.eigenvalues, s.excitation)
            };
            Ok(GapRow {
                g,
                gaps: e[1..].iter().map(|x| x - e[0]).collect(),
                n,
            })
        })
        .collect();
    Ok((rows.into_iter().collect::<Result<_>>()?, n_max))
}
