//! Closed-form mapping from circuit element values to the two-mode Rabi parameters.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Element values in SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitParams {
    /// Coupler inductances (H).
    pub l1: f64,
    pub l2: f64,
    /// Resonator inductances (H per unit length).
    pub la: f64,
    pub lb: f64,
    /// Resonator capacitances (F per unit length).
    pub ca: f64,
    pub cb: f64,
    /// Gate and junction capacitances (F).
    pub cg: f64,
    pub cj: f64,
    /// Resonator length (m).
    pub d: f64,
    /// Atom position along the resonator (m), 0 < xs < d.
    pub xs: f64,
    /// Flux quantum (Wb).
    #[serde(default = "default_phi0")]
    pub phi0: f64,
    /// Elementary charge (C).
    #[serde(default = "default_e_charge")]
    pub e_charge: f64,
    /// <down|phi_J|up> (Wb).
    pub matrix_element: f64,
    /// Two-level splitting (rad/s).
    pub omega0_atom: f64,
}

fn default_phi0() -> f64 {
    2.067_833_848e-15
}

fn default_e_charge() -> f64 {
    1.602_176_634e-19
}

/// Reading of the junction composite, whose printed form lists the
/// 3 L1^2 L2^2 La term twice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LjReading {
    #[default]
    AsPrinted,
    Deduplicated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Composites {
    pub c_sigma: f64,
    pub l_sigma: f64,
    pub lt_j: f64,
    pub lt_s: f64,
    pub lt_c: f64,
    pub e_q: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveParams {
    pub omega1: f64,
    pub omega2: f64,
    pub g1: f64,
    pub g2: f64,
    pub composites: Composites,
}

impl CircuitParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("l1", self.l1),
            ("l2", self.l2),
            ("la", self.la),
            ("lb", self.lb),
            ("ca", self.ca),
            ("cb", self.cb),
            ("cg", self.cg),
            ("cj", self.cj),
            ("d", self.d),
            ("phi0", self.phi0),
            ("e_charge", self.e_charge),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.xs > 0.0 && self.xs < self.d) {
            return Err(Error::InvalidParameter(format!(
                "xs must lie strictly inside (0, d), got {}",
                self.xs
            )));
        }
        if !self.matrix_element.is_finite() || !self.omega0_atom.is_finite() {
            return Err(Error::InvalidParameter("matrix_element and omega0_atom must be finite".into()));
        }
        Ok(())
    }

    /// C~_g = C_g + C_a.
    pub fn cg_tilde(&self) -> f64 {
        self.cg + self.ca
    }
}

/// L_Sigma = L2 La + L1 La + L1 L2.
pub fn l_sigma(l1: f64, l2: f64, la: f64) -> f64 {
    l2 * la + l1 * la + l1 * l2
}

/// Junction composite L~_J, term by term as printed.
pub fn lt_j(l1: f64, l2: f64, la: f64, reading: LjReading) -> f64 {
    let s = l_sigma(l1, l2, la);
    let repeated = match reading {
        LjReading::AsPrinted => 3.0 * l1 * l1 * l2 * l2 * la,
        LjReading::Deduplicated => 0.0,
    };
    l1 * l1 * l2.powi(3) + 3.0 * l1 * l1 * l2 * l2 * la + repeated + 3.0 * l1 * l1 * l2 * la * la
        + l1 * l1 * la.powi(3)
        + l1 * l2.powi(3) * la
        + 2.0 * l1 * l2 * l2 * la * la
        + l1 * l2 * la.powi(3)
        - 2.0 * s * l1 * l2 * l2
        - 4.0 * s * l1 * l2 * la
        - 2.0 * s * l1 * la * la
        + s * s * l2
        + s * s * la
}

/// Self composite L~_s.
pub fn lt_s(l1: f64, l2: f64, la: f64) -> f64 {
    let s = l_sigma(l1, l2, la);
    l1 * l1 * l2.powi(3) + l1 * l1 * l2 * l2 * la + l1 * l2.powi(3) * la - 2.0 * s * l1 * l2 * l2 + s * s * l2
}

/// Coupling composite L~_c.
pub fn lt_c(l1: f64, l2: f64, la: f64) -> f64 {
    let s = l_sigma(l1, l2, la);
    4.0 * s * l1 * l2 * l2 + 4.0 * s * l1 * l2 * la
        - 2.0 * l1 * l1 * l2.powi(3)
        - 4.0 * l1 * l1 * l2 * l2 * la
        - 2.0 * l1 * l1 * l2 * la * la
        - 2.0 * l1 * l2.powi(3) * la
        - 2.0 * l1 * l2 * l2 * la * la
        - 2.0 * s * s * l2
}

/// C_Sigma = C~_g C_b + C~_g C_J + C_J C_b.
pub fn c_sigma(cg_tilde: f64, cb: f64, cj: f64) -> f64 {
    cg_tilde * cb + cg_tilde * cj + cj * cb
}

pub fn composites(c: &CircuitParams, reading: LjReading) -> Result<Composites> {
    c.validate()?;
    let cgt = c.cg_tilde();
    let c_sigma = c_sigma(cgt, c.cb, c.cj);
    Ok(Composites {
        c_sigma,
        l_sigma: l_sigma(c.l1, c.l2, c.la),
        lt_j: lt_j(c.l1, c.l2, c.la, reading),
        lt_s: lt_s(c.l1, c.l2, c.la),
        lt_c: lt_c(c.l1, c.l2, c.la),
        e_q: (cgt + c.cb) / (2.0 * c_sigma),
    })
}

/// Mode frequencies and couplings of the single-mode, two-level circuit element.
///
/// g1 carries sqrt(w1 / (La D)) and sin(pi xs / D); g2 carries sqrt(w2 Cb D)
/// and cos(pi xs / D).
pub fn effective_params(c: &CircuitParams, reading: LjReading) -> Result<EffectiveParams> {
    let k = composites(c, reading)?;
    let omega1 = PI / (c.d * (c.la * c.ca).sqrt());
    let omega2 = PI / (c.d * (c.lb * c.cb).sqrt());
    let x = PI * c.xs / c.d;
    let g1 = -k.lt_c * (omega1 / (c.la * c.d)).sqrt() * x.sin() * c.matrix_element
        / (2.0 * k.l_sigma * k.l_sigma * c.l2);
    let g2 = c.cg_tilde() * c.omega0_atom * (omega2 * c.cb * c.d).sqrt() * x.cos() * c.matrix_element
        / (4.0 * PI * c.e_charge * k.e_q * c.phi0 * k.c_sigma);
    Ok(EffectiveParams {
        omega1,
        omega2,
        g1,
        g2,
        composites: k,
    })
}

/// Circuit quantities a tuner may vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FreeParam {
    L1,
    L2,
    La,
    Lb,
    Ca,
    Cb,
    Cg,
    Cj,
    D,
    Xs,
}

impl std::str::FromStr for FreeParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "l1" => FreeParam::L1,
            "l2" => FreeParam::L2,
            "la" => FreeParam::La,
            "lb" => FreeParam::Lb,
            "ca" => FreeParam::Ca,
            "cb" => FreeParam::Cb,
            "cg" => FreeParam::Cg,
            "cj" => FreeParam::Cj,
            "d" => FreeParam::D,
            "xs" => FreeParam::Xs,
            _ => return Err(Error::Config(format!("unknown circuit parameter '{s}'"))),
        })
    }
}

/// Unconstrained coordinate of a free parameter: log for positive values,
/// logit of xs / d for the position.
fn to_coord(c: &CircuitParams, p: FreeParam) -> f64 {
    match p {
        FreeParam::L1 => c.l1.ln(),
        FreeParam::L2 => c.l2.ln(),
        FreeParam::La => c.la.ln(),
        FreeParam::Lb => c.lb.ln(),
        FreeParam::Ca => c.ca.ln(),
        FreeParam::Cb => c.cb.ln(),
        FreeParam::Cg => c.cg.ln(),
        FreeParam::Cj => c.cj.ln(),
        FreeParam::D => c.d.ln(),
        FreeParam::Xs => {
            let u = c.xs / c.d;
            (u / (1.0 - u)).ln()
        }
    }
}

fn set_coord(c: &mut CircuitParams, p: FreeParam, y: f64) {
    match p {
        FreeParam::L1 => c.l1 = y.exp(),
        FreeParam::L2 => c.l2 = y.exp(),
        FreeParam::La => c.la = y.exp(),
        FreeParam::Lb => c.lb = y.exp(),
        FreeParam::Ca => c.ca = y.exp(),
        FreeParam::Cb => c.cb = y.exp(),
        FreeParam::Cg => c.cg = y.exp(),
        FreeParam::Cj => c.cj = y.exp(),
        FreeParam::D => {
            // keep xs / d fixed when the length changes
            let u = c.xs / c.d;
            c.d = y.exp();
            c.xs = u * c.d;
        }
        FreeParam::Xs => c.xs = c.d / (1.0 + (-y).exp()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuneTargets {
    /// Common mode frequency; unconstrained when absent.
    pub omega: Option<f64>,
    /// Common coupling; unconstrained when absent.
    pub g: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub circuit: CircuitParams,
    pub effective: EffectiveParams,
    /// |w1 - w2| / w1.
    pub omega_mismatch: f64,
    /// |g1 - g2| / |g1|.
    pub g_mismatch: f64,
    pub iterations: usize,
}

/// Relative residuals: (w1 - w2)/w1, (g1 - g2)/g1 and, when set, the targets.
fn residuals(c: &CircuitParams, targets: &TuneTargets, reading: LjReading) -> Result<Vec<f64>> {
    let e = effective_params(c, reading)?;
    let mut r = vec![(e.omega1 - e.omega2) / e.omega1, (e.g1 - e.g2) / e.g1];
    if let Some(w) = targets.omega {
        r.push(e.omega1 / w - 1.0);
    }
    if let Some(g) = targets.g {
        r.push(e.g1 / g - 1.0);
    }
    Ok(r)
}

/// Tolerance on the relative mismatches.
pub const TUNE_TOL: f64 = 1e-6;

/// Adjusts the free parameters until w1 = w2 and g1 = g2 (and the optional
/// targets hold) to 1e-6 relative, by damped Gauss-Newton in log coordinates.
pub fn tune_degenerate(
    seed: &CircuitParams,
    targets: &TuneTargets,
    free: &[FreeParam],
    reading: LjReading,
) -> Result<TuneResult> {
    seed.validate()?;
    if free.is_empty() {
        return Err(Error::InvalidParameter("tuning needs at least one free parameter".into()));
    }
    for (w, name) in [(targets.omega, "omega"), (targets.g, "g")] {
        if matches!(w, Some(v) if !(v > 0.0)) {
            return Err(Error::InvalidParameter(format!("target {name} must be positive")));
        }
    }
    let mut c = *seed;
    let mut r = residuals(&c, targets, reading)?;
    let norm = |r: &[f64]| r.iter().map(|x| x * x).sum::<f64>().sqrt();
    let done = |r: &[f64]| r.iter().all(|x| x.abs() < TUNE_TOL);
    let mut lambda = 1e-3;
    let mut iterations = 0;
    while !done(&r) {
        if iterations >= 200 {
            return Err(Error::RootFinder(format!(
                "no convergence after {iterations} iterations, residual {:e}",
                norm(&r)
            )));
        }
        iterations += 1;
        // forward-difference Jacobian in the unconstrained coordinates
        let y: Vec<f64> = free.iter().map(|&p| to_coord(&c, p)).collect();
        let (m, n) = (r.len(), free.len());
        let mut jac = vec![vec![0.0; n]; m];
        for (k, &p) in free.iter().enumerate() {
            let h = 1e-7 * y[k].abs().max(1.0);
            let mut cp = c;
            set_coord(&mut cp, p, y[k] + h);
            let rp = residuals(&cp, targets, reading)?;
            for i in 0..m {
                jac[i][k] = (rp[i] - r[i]) / h;
            }
        }
        // Levenberg-Marquardt step: (J^T J + lambda diag) dy = -J^T r
        let mut improved = false;
        for _ in 0..30 {
            let a = faer::Mat::from_fn(n, n, |p, q| {
                let s: f64 = (0..m).map(|i| jac[i][p] * jac[i][q]).sum();
                if p == q {
                    s * (1.0 + lambda) + 1e-300
                } else {
                    s
                }
            });
            let b = faer::Mat::from_fn(n, 1, |p, _| -(0..m).map(|i| jac[i][p] * r[i]).sum::<f64>());
            let dy = solve_spd(&a, &b)?;
            let mut trial = c;
            for (k, &p) in free.iter().enumerate() {
                set_coord(&mut trial, p, y[k] + dy[k]);
            }
            if let Ok(rt) = residuals(&trial, targets, reading) {
                if norm(&rt) < norm(&r) {
                    c = trial;
                    r = rt;
                    lambda = (lambda * 0.3).max(1e-12);
                    improved = true;
                    break;
                }
            }
            lambda *= 10.0;
        }
        if !improved {
            return Err(Error::RootFinder(format!(
                "step rejected at residual {:e}; the free set may not reach the targets",
                norm(&r)
            )));
        }
    }
    let effective = effective_params(&c, reading)?;
    Ok(TuneResult {
        circuit: c,
        omega_mismatch: ((effective.omega1 - effective.omega2) / effective.omega1).abs(),
        g_mismatch: ((effective.g1 - effective.g2) / effective.g1).abs(),
        effective,
        iterations,
    })
}

/// Solves a small symmetric positive (semi)definite system by Cholesky-free
/// symmetric eigendecomposition, discarding null directions.
fn solve_spd(a: &faer::Mat<f64>, b: &faer::Mat<f64>) -> Result<Vec<f64>> {
    let n = a.nrows();
    let (vals, vecs) = crate::linalg::dense::eigh(a)?;
    let top = vals.iter().copied().fold(0.0f64, f64::max);
    let mut x = vec![0.0; n];
    for k in 0..n {
        if vals[k] <= 1e-14 * top {
            continue;
        }
        let proj: f64 = (0..n).map(|i| vecs[(i, k)] * b[(i, 0)]).sum();
        for i in 0..n {
            x[i] += vecs[(i, k)] * proj / vals[k];
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Reduced units (all scales of order one), so both couplings are comparable.
    fn sample() -> CircuitParams {
        CircuitParams {
            l1: 1.0,
            l2: 1.2,
            la: 0.9,
            lb: 1.1,
            ca: 1.0,
            cb: 0.8,
            cg: 0.5,
            cj: 0.7,
            d: 1.0,
            xs: 0.3,
            phi0: 1.0,
            e_charge: 1.0,
            matrix_element: 1.0,
            omega0_atom: 1.0,
        }
    }

    #[test]
    fn equal_inductances() {
        assert!((l_sigma(2.0, 2.0, 2.0) - 12.0).abs() < 1e-15);
        assert!((c_sigma(1.0, 2.0, 3.0) - 11.0).abs() < 1e-15);
        assert!((lt_s(1.0, 1.0, 1.0) - 6.0).abs() < 1e-14);
        assert!((lt_j(1.0, 1.0, 1.0, LjReading::Deduplicated) - 6.0).abs() < 1e-14);
        assert!((lt_j(1.0, 1.0, 1.0, LjReading::AsPrinted) - 9.0).abs() < 1e-14);
        assert!((lt_c(1.0, 1.0, 1.0) + 6.0).abs() < 1e-14);
    }

    #[test]
    fn midpoint_kills_second_coupling() {
        let mut c = sample();
        c.xs = c.d / 2.0;
        let e = effective_params(&c, LjReading::AsPrinted).unwrap();
        assert!(e.g2.abs() < 1e-12 * e.g1.abs());
    }

    #[test]
    fn matched_resonators_are_degenerate() {
        let mut c = sample();
        c.lb = c.la * 1.3;
        c.cb = c.la * c.ca / c.lb;
        let e = effective_params(&c, LjReading::AsPrinted).unwrap();
        assert!((e.omega1 - e.omega2).abs() < 1e-12 * e.omega1);
    }

    #[test]
    fn invalid_position_rejected() {
        let mut c = sample();
        c.xs = c.d;
        assert!(effective_params(&c, LjReading::AsPrinted).is_err());
    }

    #[test]
    fn tuning_reaches_degeneracy_and_is_a_fixed_point() {
        let free = [FreeParam::Lb, FreeParam::Xs];
        let t = TuneTargets { omega: None, g: None };
        let r = tune_degenerate(&sample(), &t, &free, LjReading::AsPrinted).unwrap();
        assert!(r.omega_mismatch < 1e-6 && r.g_mismatch < 1e-6, "{r:?}");
        let again = tune_degenerate(&r.circuit, &t, &free, LjReading::AsPrinted).unwrap();
        assert_eq!(again.iterations, 0);
        assert_eq!(again.circuit, r.circuit);
    }

    #[test]
    fn tuning_without_free_parameters_fails() {
        let t = TuneTargets { omega: None, g: None };
        assert!(tune_degenerate(&sample(), &t, &[], LjReading::AsPrinted).is_err());
    }
}
