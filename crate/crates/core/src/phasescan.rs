//! Phase diagrams over (t, g) and (t, mu) grids.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::meanfield::{minimize_at, phase_at, MeanFieldOptions, Phase};
use crate::model::ModelParams;
use crate::perturbation::{boundary_curve, PhaseBoundary};
use crate::spectra::{resolve_cutoff, CutoffPolicy, SweepVariable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanMethod {
    Meanfield,
    Perturbation,
    Both,
}

impl std::str::FromStr for ScanMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "meanfield" => Ok(ScanMethod::Meanfield),
            "perturbation" => Ok(ScanMethod::Perturbation),
            "both" => Ok(ScanMethod::Both),
            _ => Err(Error::Config(format!("unknown scan method '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub t: f64,
    /// Value of the second axis (g or mu).
    pub x: f64,
    pub phase: Option<Phase>,
    /// NaN when the cell was classified without a mean-field solve.
    pub psi1: f64,
    pub psi2: f64,
    pub n: f64,
    /// Mean-field minimum sat on the edge of the order-parameter box.
    pub boundary_hit: bool,
    pub error: Option<String>,
}

/// Mean-field MI/SF transition along one column of the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub x: f64,
    /// Estimated t_c; NaN when the column has no MI to SF transition.
    pub t_c: f64,
    /// Bracket in t.
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseDiagram {
    pub method: ScanMethod,
    pub axis2: SweepVariable,
    pub t_grid: Vec<f64>,
    pub x_grid: Vec<f64>,
    /// Cells with x outer and t inner: index = ix * t_grid.len() + it.
    pub cells: Vec<Cell>,
    pub boundary: Option<PhaseBoundary>,
    pub frontier: Option<Vec<FrontierPoint>>,
    pub z: usize,
    pub n_max: usize,
}

impl PhaseDiagram {
    pub fn cell(&self, ix: usize, it: usize) -> &Cell {
        &self.cells[ix * self.t_grid.len() + it]
    }

    pub fn failed_cells(&self) -> usize {
        self.cells.iter().filter(|c| c.error.is_some()).count()
    }

    pub fn boundary_hits(&self) -> usize {
        self.cells.iter().filter(|c| c.boundary_hit).count()
    }

    /// Columns whose phase sequence along t is not MI...MI SF...SF.
    pub fn non_monotone_columns(&self) -> Vec<f64> {
        (0..self.x_grid.len())
            .filter(|&ix| {
                let phases: Vec<Option<Phase>> =
                    (0..self.t_grid.len()).map(|it| self.cell(ix, it).phase).collect();
                let mut seen_sf = false;
                phases.iter().any(|p| match p {
                    Some(Phase::Sf) => {
                        seen_sf = true;
                        false
                    }
                    Some(Phase::Mi) => seen_sf,
                    None => false,
                })
            })
            .map(|ix| self.x_grid[ix])
            .collect()
    }

    /// Connected MI regions of the grid (4-neighbour connectivity).
    pub fn mi_components(&self) -> usize {
        let (nx, nt) = (self.x_grid.len(), self.t_grid.len());
        let mut seen = vec![false; nx * nt];
        let mut count = 0;
        for start in 0..nx * nt {
            if seen[start] || self.cells[start].phase != Some(Phase::Mi) {
                continue;
            }
            count += 1;
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(i) = stack.pop() {
                let (ix, it) = (i / nt, i % nt);
                let mut nb = Vec::with_capacity(4);
                if ix > 0 {
                    nb.push(i - nt);
                }
                if ix + 1 < nx {
                    nb.push(i + nt);
                }
                if it > 0 {
                    nb.push(i - 1);
                }
                if it + 1 < nt {
                    nb.push(i + 1);
                }
                for j in nb {
                    if !seen[j] && self.cells[j].phase == Some(Phase::Mi) {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        count
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanOptions {
    #[serde(default)]
    pub meanfield: MeanFieldOptions,
    #[serde(default)]
    pub cutoff: CutoffPolicy,
    /// Bisect each mean-field column bracket down to 1e-4 w1 / z.
    #[serde(default)]
    pub refine_frontier: bool,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            meanfield: MeanFieldOptions::default(),
            cutoff: CutoffPolicy::default(),
            refine_frontier: false,
        }
    }
}

fn ascending(grid: &[f64], name: &str) -> Result<()> {
    if grid.is_empty() || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter(format!("{name} grid must be non-empty and ascending")));
    }
    Ok(())
}

fn meanfield_cell(p: &ModelParams, n_max: usize, opts: &ScanOptions) -> Cell {
    let mut cell = Cell {
        t: p.t,
        x: 0.0,
        phase: None,
        psi1: f64::NAN,
        psi2: f64::NAN,
        n: f64::NAN,
        boundary_hit: false,
        error: None,
    };
    match minimize_at(p, n_max, &opts.meanfield, opts.cutoff.ceiling) {
        Ok(s) => {
            cell.phase = Some(s.phase);
            cell.psi1 = s.psi1;
            cell.psi2 = s.psi2;
            cell.n = s.n;
        }
        Err(Error::BoundaryHit { psi1, psi2, .. }) => {
            cell.phase = Some(Phase::Sf);
            cell.psi1 = psi1;
            cell.psi2 = psi2;
            cell.boundary_hit = true;
        }
        Err(e) => cell.error = Some(e.to_string()),
    }
    cell
}

/// Classifies every (t, x) cell and, depending on `method`, attaches the
/// perturbative boundary and the mean-field frontier.
///
/// Individual cell failures are recorded in the cell and never abort the scan.
pub fn scan(
    template: &ModelParams,
    t_grid: &[f64],
    axis2: SweepVariable,
    x_grid: &[f64],
    method: ScanMethod,
    opts: &ScanOptions,
) -> Result<PhaseDiagram> {
    template.validate()?;
    ascending(t_grid, "t")?;
    ascending(x_grid, axis2.name())?;
    if t_grid[0] < 0.0 {
        return Err(Error::InvalidParameter("t must be >= 0".into()));
    }
    let columns: Vec<ModelParams> = x_grid.iter().map(|&x| axis2.apply(template, x)).collect();
    let n_max = resolve_cutoff(&columns, &[*columns.last().unwrap()], &opts.cutoff)?;
    let z = template.z;

    let boundary = match method {
        ScanMethod::Meanfield => None,
        _ => Some(boundary_curve(template, axis2, x_grid, z, &CutoffPolicy::fixed(n_max))?),
    };
    let pt_at = |x: f64| -> Option<(f64, f64)> {
        boundary
            .as_ref()?
            .points
            .iter()
            .find(|p| p.x == x)
            .map(|p| (p.t_c, p.n_lobe))
    };

    let nt = t_grid.len();
    let cells: Vec<Cell> = (0..x_grid.len() * nt)
        .into_par_iter()
        .map(|i| {
            let (ix, it) = (i / nt, i % nt);
            let (x, t) = (x_grid[ix], t_grid[it]);
            let mut cell = match method {
                ScanMethod::Perturbation => {
                    let (t_c, n_lobe) = pt_at(x).unwrap_or((f64::NAN, f64::NAN));
                    let mi = t < t_c;
                    Cell {
                        t,
                        x,
                        phase: if t_c.is_nan() { None } else { Some(if mi { Phase::Mi } else { Phase::Sf }) },
                        psi1: if mi { 0.0 } else { f64::NAN },
                        psi2: if mi { 0.0 } else { f64::NAN },
                        n: if mi { n_lobe } else { f64::NAN },
                        boundary_hit: false,
                        error: None,
                    }
                }
                _ => meanfield_cell(&columns[ix].with_t(t), n_max, opts),
            };
            cell.t = t;
            cell.x = x;
            cell
        })
        .collect();

    let frontier = match method {
        ScanMethod::Perturbation => None,
        _ => Some(frontier(&columns, t_grid, &cells, n_max, opts)?),
    };
    Ok(PhaseDiagram {
        method,
        axis2,
        t_grid: t_grid.to_vec(),
        x_grid: x_grid.to_vec(),
        cells,
        boundary,
        frontier,
        z,
        n_max,
    })
}

fn frontier(
    columns: &[ModelParams],
    t_grid: &[f64],
    cells: &[Cell],
    n_max: usize,
    opts: &ScanOptions,
) -> Result<Vec<FrontierPoint>> {
    let nt = t_grid.len();
    let width = |p: &ModelParams| 1e-4 * p.omega1 / p.z as f64;
    let points: Vec<Result<FrontierPoint>> = columns
        .par_iter()
        .enumerate()
        .map(|(ix, p)| {
            let x = cells[ix * nt].x;
            let col = &cells[ix * nt..(ix + 1) * nt];
            let first_sf = col.iter().position(|c| c.phase == Some(Phase::Sf));
            let none = FrontierPoint {
                x,
                t_c: f64::NAN,
                lower: f64::NAN,
                upper: f64::NAN,
            };
            let Some(j) = first_sf else { return Ok(none) };
            if j == 0 || col[j - 1].phase != Some(Phase::Mi) {
                return Ok(none);
            }
            let (mut lo, mut hi) = (t_grid[j - 1], t_grid[j]);
            if opts.refine_frontier {
                while hi - lo > width(p) {
                    let mid = 0.5 * (lo + hi);
                    match phase_at(&p.with_t(mid), n_max, &opts.meanfield, opts.cutoff.ceiling)? {
                        Phase::Mi => lo = mid,
                        Phase::Sf => hi = mid,
                    }
                }
            }
            Ok(FrontierPoint {
                x,
                t_c: 0.5 * (lo + hi),
                lower: lo,
                upper: hi,
            })
        })
        .collect();
    points.into_iter().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyRow {
    pub x: f64,
    pub t_c_pt: f64,
    pub t_c_mf: f64,
    /// |t_mf - t_pt| / t_pt.
    pub relative: f64,
    pub boundary_hits: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryComparison {
    pub rows: Vec<DiscrepancyRow>,
    pub max: f64,
    pub median: f64,
    /// Cells whose mean-field minimum hit the box edge.
    pub boundary_hits: usize,
}

/// Per-column relative discrepancy between the perturbative and mean-field boundaries.
///
/// Columns without a mean-field transition or with t_c(PT) = 0 are skipped.
pub fn compare_boundaries(diagram: &PhaseDiagram) -> Result<BoundaryComparison> {
    let (Some(b), Some(f)) = (&diagram.boundary, &diagram.frontier) else {
        return Err(Error::InvalidParameter("comparison needs a scan with method = both".into()));
    };
    let nt = diagram.t_grid.len();
    let mut rows = Vec::new();
    for (ix, fp) in f.iter().enumerate() {
        let Some(pt) = b.points.iter().find(|p| p.x == fp.x) else { continue };
        if !fp.t_c.is_finite() || pt.t_c <= 0.0 {
            continue;
        }
        rows.push(DiscrepancyRow {
            x: fp.x,
            t_c_pt: pt.t_c,
            t_c_mf: fp.t_c,
            relative: (fp.t_c - pt.t_c).abs() / pt.t_c,
            boundary_hits: diagram.cells[ix * nt..(ix + 1) * nt]
                .iter()
                .filter(|c| c.boundary_hit)
                .count(),
        });
    }
    let mut rel: Vec<f64> = rows.iter().map(|r| r.relative).collect();
    rel.sort_by(f64::total_cmp);
    let median = match rel.len() {
        0 => f64::NAN,
        n if n % 2 == 1 => rel[n / 2],
        n => 0.5 * (rel[n / 2 - 1] + rel[n / 2]),
    };
    Ok(BoundaryComparison {
        max: rel.last().copied().unwrap_or(f64::NAN),
        median,
        boundary_hits: diagram.boundary_hits(),
        rows,
    })
}
