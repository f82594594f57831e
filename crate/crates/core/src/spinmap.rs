//! Effective XX spin model in the two-state subspace {|n>, |n+1>}.

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::dense;
use crate::model::operator::{operator, OperatorKind, OperatorMatrix};
use crate::model::sector::Excitation;
use crate::model::space::{HilbertSpace, Truncation};
use crate::model::symmetry::{excitation_blocks, LabeledState};
use crate::model::{h_single_site, ModelParams};
use crate::spectra::{resolve_cutoff, CutoffPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpinMapOptions {
    /// Eigenstates computed for the label and selection-rule checks.
    #[serde(default = "default_states")]
    pub states: usize,
    /// Largest allowed (E1 - E0) / (E2 - E0) on the single-atom path.
    #[serde(default = "default_hierarchy")]
    pub hierarchy: f64,
    /// Tolerance on forbidden matrix elements.
    #[serde(default = "default_selection_tol")]
    pub selection_tol: f64,
}

fn default_states() -> usize {
    8
}

fn default_hierarchy() -> f64 {
    0.2
}

fn default_selection_tol() -> f64 {
    1e-8
}

impl Default for SpinMapOptions {
    fn default() -> Self {
        Self {
            states: default_states(),
            hierarchy: default_hierarchy(),
            selection_tol: default_selection_tol(),
        }
    }
}

/// The two lowest single-site states and the states used for the checks.
#[derive(Debug, Clone)]
pub struct LobePair {
    /// State with the lower excitation label n.
    pub lower: LabeledState,
    /// State with label n + 1.
    pub upper: LabeledState,
    /// E(n + 1) - E(n).
    pub delta: f64,
    /// (E1 - E0) / (E2 - E0) over the computed spectrum.
    pub gap_ratio: f64,
    /// All computed eigenstates, ascending in energy.
    pub states: Vec<LabeledState>,
    pub space: HilbertSpace,
    pub n_max: usize,
}

/// Makes the largest-magnitude amplitude positive.
fn fix_sign(v: &mut [f64]) {
    let big = v
        .iter()
        .copied()
        .fold(0.0f64, |a, x| if x.abs() > a.abs() { x } else { a });
    if big < 0.0 {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}

/// Lowest eigenstates of the full total-photon space, labelled by the nearest
/// half-step of <N_e> (used when N_e is not conserved).
fn full_states(space: &HilbertSpace, h: &OperatorMatrix, count: usize) -> Result<Vec<LabeledState>> {
    let (vals, vecs) = dense::eigh(&h.to_dense_real())?;
    let ne = operator(space, OperatorKind::Ne);
    Ok((0..count.min(space.dim()))
        .map(|c| {
            let vector: Vec<f64> = (0..space.dim()).map(|r| vecs[(r, c)]).collect();
            LabeledState {
                energy: vals[c],
                label: Excitation::from_value(ne.expectation_real(&vector)),
                vector,
                residual: 0.0,
            }
        })
        .collect())
}

/// The two lowest single-site eigenstates at a fixed cutoff, checked to carry
/// adjacent excitation labels.
///
/// For a single atom the pair must also be well separated from the third level:
/// (E1 - E0) / (E2 - E0) below `opts.hierarchy`.
pub fn lobe_pair_states_at(params: &ModelParams, n_max: usize, opts: &SpinMapOptions, ceiling: usize) -> Result<LobePair> {
    params.validate()?;
    if opts.states < 3 {
        return Err(Error::InvalidParameter("at least 3 states are needed".into()));
    }
    let space = HilbertSpace::new(params.n_atoms, Truncation::TotalPhotons { n_max }, ceiling)?;
    let h = h_single_site(&space, params)?;
    let mut states = if params.is_degenerate() {
        excitation_blocks(&space)?.lowest_states(&h, opts.states)?
    } else {
        full_states(&space, &h, opts.states)?
    };
    for s in &mut states {
        fix_sign(&mut s.vector);
    }
    let (e0, e1, e2) = (states[0].energy, states[1].energy, states[2].energy);
    let gap_ratio = (e1 - e0) / (e2 - e0);
    let (l0, l1) = (states[0].label, states[1].label);
    if (l0.0 - l1.0).abs() != 2 {
        return Err(Error::LobePair(format!(
            "two lowest states carry labels {l0} and {l1}, not adjacent"
        )));
    }
    if params.n_atoms == 1 && !(gap_ratio < opts.hierarchy) {
        return Err(Error::LobePair(format!(
            "gap ratio {gap_ratio:.4} is not below {}",
            opts.hierarchy
        )));
    }
    let (lower, upper) = if l0 < l1 {
        (states[0].clone(), states[1].clone())
    } else {
        (states[1].clone(), states[0].clone())
    };
    Ok(LobePair {
        delta: upper.energy - lower.energy,
        lower,
        upper,
        gap_ratio,
        states,
        space,
        n_max,
    })
}

pub fn lobe_pair_states(params: &ModelParams, opts: &SpinMapOptions, policy: &CutoffPolicy) -> Result<LobePair> {
    let n_max = resolve_cutoff(&[*params], &[*params], policy)?;
    lobe_pair_states_at(params, n_max, opts, policy.ceiling)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    /// Largest |<i|(a1 + a2)|j>| with label_j != label_i + 1.
    pub plus: f64,
    /// Largest |<i|(a1 - a2)|j>| with label_j != label_i - 1.
    pub minus: f64,
    pub pairs: usize,
}

impl SelectionReport {
    pub fn max(&self) -> f64 {
        self.plus.max(self.minus)
    }
}

/// Forbidden matrix elements of a1 +- a2 across all computed states.
pub fn selection_report(pair: &LobePair) -> SelectionReport {
    let sum = operator(&pair.space, OperatorKind::A1).add(&operator(&pair.space, OperatorKind::A2)).unwrap();
    let diff = operator(&pair.space, OperatorKind::A1).sub(&operator(&pair.space, OperatorKind::A2)).unwrap();
    let s = &pair.states;
    let apply = |o: &OperatorMatrix| -> Vec<Vec<f64>> {
        s.iter()
            .map(|st| {
                let mut y = vec![0.0; st.vector.len()];
                o.apply_real(&st.vector, &mut y);
                y
            })
            .collect()
    };
    let (sv, dv) = (apply(&sum), apply(&diff));
    let mut report = SelectionReport {
        plus: 0.0,
        minus: 0.0,
        pairs: 0,
    };
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    for si in s {
        for (j, sj) in s.iter().enumerate() {
            report.pairs += 1;
            if sj.label.0 != si.label.0 + 2 {
                report.plus = report.plus.max(dot(&si.vector, &sv[j]).abs());
            }
            if sj.label.0 != si.label.0 - 2 {
                report.minus = report.minus.max(dot(&si.vector, &dv[j]).abs());
            }
        }
    }
    report
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    /// <n|(a1 + a2)|n+1> / 2.
    pub alpha: f64,
    /// <n+1|(a1 - a2)|n> / 2.
    pub beta: f64,
    pub selection: SelectionReport,
}

/// alpha and beta of a_1 -> alpha S- + beta S+, a_2 -> alpha S- - beta S+,
/// after checking the selection rules of a1 +- a2.
pub fn project_operators(pair: &LobePair, selection_tol: f64) -> Result<Projection> {
    let selection = selection_report(pair);
    if selection.max() > selection_tol {
        return Err(Error::SelectionRule(selection.max()));
    }
    let a1 = operator(&pair.space, OperatorKind::A1);
    let a2 = operator(&pair.space, OperatorKind::A2);
    let el = |o: &OperatorMatrix, bra: &[f64], ket: &[f64]| -> f64 {
        let mut y = vec![0.0; ket.len()];
        o.apply_real(ket, &mut y);
        bra.iter().zip(&y).map(|(a, b)| a * b).sum()
    };
    let (n, n1) = (&pair.lower.vector, &pair.upper.vector);
    Ok(Projection {
        alpha: 0.5 * (el(&a1, n, n1) + el(&a2, n, n1)),
        beta: 0.5 * (el(&a1, n1, n) - el(&a2, n1, n)),
        selection,
    })
}

/// Matrix of an operator in the ordered pair basis (|n>, |n+1>).
pub fn pair_matrix(pair: &LobePair, o: &OperatorMatrix) -> Mat<f64> {
    let v = [&pair.lower.vector, &pair.upper.vector];
    Mat::from_fn(2, 2, |r, c| {
        let mut y = vec![0.0; v[c].len()];
        o.apply_real(v[c], &mut y);
        v[r].iter().zip(&y).map(|(a, b)| a * b).sum()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XxModel {
    /// Lower excitation label n.
    pub n_lobe: f64,
    pub delta: f64,
    pub alpha: f64,
    pub beta: f64,
    /// J = 2 t (alpha^2 + beta^2).
    pub j: f64,
    pub t: f64,
}

pub fn xx_parameters(n_lobe: f64, alpha: f64, beta: f64, delta: f64, t: f64) -> XxModel {
    XxModel {
        n_lobe,
        delta,
        alpha,
        beta,
        j: 2.0 * t * (alpha * alpha + beta * beta),
        t,
    }
}

/// Full extraction at one parameter point; t is taken from `params`.
pub fn spin_model(params: &ModelParams, opts: &SpinMapOptions, policy: &CutoffPolicy) -> Result<(XxModel, Projection)> {
    let pair = lobe_pair_states(params, opts, policy)?;
    let proj = project_operators(&pair, opts.selection_tol)?;
    Ok((
        xx_parameters(pair.lower.label.value(), proj.alpha, proj.beta, pair.delta, params.t),
        proj,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn permissive() -> SpinMapOptions {
        SpinMapOptions {
            hierarchy: 1.0,
            ..SpinMapOptions::default()
        }
    }

    #[test]
    fn xx_linear_in_t() {
        assert_eq!(xx_parameters(0.5, 0.3, 0.2, 0.0, 0.0).j, 0.0);
        assert_eq!(xx_parameters(0.5, 0.0, 0.0, 0.0, 1.0).j, 0.0);
        let a = xx_parameters(0.5, 0.3, 0.2, 0.0, 0.1).j;
        let b = xx_parameters(0.5, 0.3, 0.2, 0.0, 0.2).j;
        assert!((b - 2.0 * a).abs() < 1e-15);
        assert!((a - 2.0 * 0.1 * 0.13).abs() < 1e-15);
    }

    #[test]
    fn weak_single_atom_coupling_rejected() {
        let p = ModelParams::degenerate(1.0, 1.0, 0.1, 1);
        assert!(matches!(
            lobe_pair_states(&p, &SpinMapOptions::default(), &CutoffPolicy::default()),
            Err(Error::LobePair(_))
        ));
    }

    #[test]
    fn projection_reproduces_pair_matrices() {
        let p = ModelParams::degenerate(1.0, 1.0, 2.0, 1);
        let pair = lobe_pair_states(&p, &permissive(), &CutoffPolicy::default()).unwrap();
        assert_eq!(pair.upper.label.0 - pair.lower.label.0, 2);
        let proj = project_operators(&pair, 1e-8).unwrap();
        let m1 = pair_matrix(&pair, &operator(&pair.space, OperatorKind::A1));
        let m2 = pair_matrix(&pair, &operator(&pair.space, OperatorKind::A2));
        // basis (|n>, |n+1>): S- = |n><n+1| sits at (0, 1), S+ at (1, 0)
        assert!((m1[(0, 1)] - proj.alpha).abs() < 1e-10);
        assert!((m1[(1, 0)] - proj.beta).abs() < 1e-10);
        assert!((m2[(0, 1)] - proj.alpha).abs() < 1e-10);
        assert!((m2[(1, 0)] + proj.beta).abs() < 1e-10);
        assert!(m1[(0, 0)].abs() < 1e-10 && m1[(1, 1)].abs() < 1e-10);
    }

    #[test]
    fn broken_symmetry_violates_selection_rules() {
        let p = ModelParams::degenerate(1.0, 1.0, 2.0, 1).with_ratio(1.1);
        let pair = lobe_pair_states(&p, &permissive(), &CutoffPolicy::default()).unwrap();
        assert!(matches!(project_operators(&pair, 1e-8), Err(Error::SelectionRule(_))));
    }
}
