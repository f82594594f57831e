use crate::error::{Error, Result};
use crate::model::operator::{spin_raise, Builder, OperatorMatrix};
use crate::model::params::ModelParams;
use crate::model::space::HilbertSpace;

fn check(space: &HilbertSpace, params: &ModelParams) -> Result<()> {
    params.validate()?;
    if space.n_atoms() != params.n_atoms {
        return Err(Error::DimensionMismatch(format!(
            "space has N = {}, params have N = {}",
            space.n_atoms(),
            params.n_atoms
        )));
    }
    Ok(())
}

/// Pushes the terms of the single-site two-mode Hamiltonian, with extra
/// linear drives -f_m (a_m + a_m^dag) and a constant shift.
///
/// i g2 (a2 - a2^dag) Jy = (g2/2)(a2 - a2^dag)(J+ - J-) has real matrix elements,
/// so the whole matrix is real.
fn push_terms(b: &mut Builder, space: &HilbertSpace, p: &ModelParams, drive: [f64; 2], shift: f64) {
    let j = space.j();
    for (i, st) in space.states().enumerate() {
        let (n1, n2, k) = (st.n1, st.n2, st.k);
        let m = space.m(k);
        b.re(
            i,
            i,
            p.omega1 * n1 as f64 + p.omega2 * n2 as f64 + p.omega0 * m - p.mu * m + shift,
        );

        // -mu (a1^dag a2 + a2^dag a1)
        if n2 > 0 {
            if let Some(r) = space.index(n1 + 1, n2 - 1, k) {
                b.re(r, i, -p.mu * (((n1 + 1) * n2) as f64).sqrt());
            }
        }
        if n1 > 0 {
            if let Some(r) = space.index(n1 - 1, n2 + 1, k) {
                b.re(r, i, -p.mu * ((n1 * (n2 + 1)) as f64).sqrt());
            }
        }

        // photon moves: (target n1, n2, matrix element of a or a^dag)
        let mut moves: Vec<(usize, usize, f64, usize, f64)> = Vec::with_capacity(4);
        if n1 > 0 {
            moves.push((n1 - 1, n2, (n1 as f64).sqrt(), 1, 1.0));
        }
        if space.truncation().contains(n1 + 1, n2) {
            moves.push((n1 + 1, n2, ((n1 + 1) as f64).sqrt(), 1, -1.0));
        }
        if n2 > 0 {
            moves.push((n1, n2 - 1, (n2 as f64).sqrt(), 2, 1.0));
        }
        if space.truncation().contains(n1, n2 + 1) {
            moves.push((n1, n2 + 1, ((n2 + 1) as f64).sqrt(), 2, -1.0));
        }
        let up = spin_raise(j, m);
        let down = spin_raise(j, m - 1.0);
        for (t1, t2, amp, mode, sign) in moves {
            // sign: +1 for an annihilation, -1 for a creation
            if mode == 1 {
                if drive[0] != 0.0 {
                    b.re(space.index(t1, t2, k).unwrap(), i, -drive[0] * amp);
                }
                // g1 (a1 + a1^dag) (J+ + J-)/2
                if k < space.n_atoms() {
                    b.re(space.index(t1, t2, k + 1).unwrap(), i, 0.5 * p.g1 * amp * up);
                }
                if k > 0 {
                    b.re(space.index(t1, t2, k - 1).unwrap(), i, 0.5 * p.g1 * amp * down);
                }
            } else {
                if drive[1] != 0.0 {
                    b.re(space.index(t1, t2, k).unwrap(), i, -drive[1] * amp);
                }
                // (g2/2) (a2 - a2^dag) (J+ - J-)
                if k < space.n_atoms() {
                    b.re(space.index(t1, t2, k + 1).unwrap(), i, 0.5 * p.g2 * sign * amp * up);
                }
                if k > 0 {
                    b.re(space.index(t1, t2, k - 1).unwrap(), i, -0.5 * p.g2 * sign * amp * down);
                }
            }
        }
    }
}

/// H = w1 a1^dag a1 + w2 a2^dag a2 + w0 Jz + g1 (a1 + a1^dag) Jx + i g2 (a2 - a2^dag) Jy - mu N_e.
pub fn h_single_site(space: &HilbertSpace, params: &ModelParams) -> Result<OperatorMatrix> {
    check(space, params)?;
    let mut b = Builder::new(space);
    push_terms(&mut b, space, params, [0.0, 0.0], 0.0);
    Ok(b.finish())
}

/// Standard single-mode Dicke Hamiltonian w1 a1^dag a1 + w0 Jz + g1 (a1 + a1^dag) Jx;
/// mode 2 enters as the identity.
pub fn h_dicke(space: &HilbertSpace, params: &ModelParams) -> Result<OperatorMatrix> {
    check(space, params)?;
    let p = ModelParams {
        omega2: 0.0,
        g2: 0.0,
        mu: 0.0,
        ..*params
    };
    let mut b = Builder::new(space);
    push_terms(&mut b, space, &p, [0.0, 0.0], 0.0);
    Ok(b.finish())
}

/// Mean-field decoupled site Hamiltonian
/// H_MF = H - z t sum_m psi_m (a_m + a_m^dag) + z t (psi1^2 + psi2^2).
pub fn h_mean_field(
    space: &HilbertSpace,
    params: &ModelParams,
    psi1: f64,
    psi2: f64,
) -> Result<OperatorMatrix> {
    check(space, params)?;
    let zt = params.zt();
    let mut b = Builder::new(space);
    push_terms(
        &mut b,
        space,
        params,
        [zt * psi1, zt * psi2],
        zt * (psi1 * psi1 + psi2 * psi2),
    );
    Ok(b.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::operator::{commutator, operator, quadrature, OperatorKind};
    use crate::model::space::{build_space, build_space_total};
    use num_complex::Complex64;

    // Same Hamiltonian assembled from operator products.
    fn h_from_products(space: &HilbertSpace, p: &ModelParams) -> OperatorMatrix {
        let op = |k| operator(space, k);
        let n1 = op(OperatorKind::A1Dag).mul(&op(OperatorKind::A1)).unwrap();
        let n2 = op(OperatorKind::A2Dag).mul(&op(OperatorKind::A2)).unwrap();
        let c1 = quadrature(space, 1).mul(&op(OperatorKind::Jx)).unwrap();
        let c2 = op(OperatorKind::A2)
            .sub(&op(OperatorKind::A2Dag))
            .unwrap()
            .mul(&op(OperatorKind::Jy))
            .unwrap()
            .scale_complex(Complex64::new(0.0, p.g2));
        n1.scale(p.omega1)
            .add(&n2.scale(p.omega2))
            .unwrap()
            .add(&op(OperatorKind::Jz).scale(p.omega0))
            .unwrap()
            .add(&c1.scale(p.g1))
            .unwrap()
            .add(&c2)
            .unwrap()
            .sub(&op(OperatorKind::Ne).scale(p.mu))
            .unwrap()
    }

    #[test]
    fn matches_operator_products() {
        let p = ModelParams {
            omega2: 1.3,
            g2: 0.45,
            mu: 0.2,
            ..ModelParams::degenerate(1.0, 0.8, 0.7, 3)
        };
        for space in [build_space(3, 4, 5).unwrap(), build_space_total(3, 6).unwrap()] {
            let h = h_single_site(&space, &p).unwrap();
            let h2 = h_from_products(&space, &p);
            assert!(h.max_abs_diff(&h2).unwrap() < 1e-13);
            assert!(h.is_real());
            assert!(h.hermiticity_error() < 1e-12);
        }
    }

    #[test]
    fn dicke_matches_products() {
        let space = build_space(2, 6, 3).unwrap();
        let p = ModelParams::degenerate(1.0, 1.2, 0.9, 2);
        let hd = h_dicke(&space, &p).unwrap();
        let op = |k| operator(&space, k);
        let want = op(OperatorKind::A1Dag)
            .mul(&op(OperatorKind::A1))
            .unwrap()
            .add(&op(OperatorKind::Jz).scale(1.2))
            .unwrap()
            .add(&quadrature(&space, 1).mul(&op(OperatorKind::Jx)).unwrap().scale(0.9))
            .unwrap();
        assert!(hd.max_abs_diff(&want).unwrap() < 1e-13);
    }

    #[test]
    fn mean_field_reduces_to_site_hamiltonian() {
        let space = build_space_total(2, 6).unwrap();
        let p = ModelParams::degenerate(1.0, 1.0, 0.6, 2).with_t(0.1);
        let h = h_single_site(&space, &p).unwrap();
        let h0 = h_mean_field(&space, &p, 0.0, 0.0).unwrap();
        assert_eq!(h.max_abs_diff(&h0).unwrap(), 0.0);
        let p0 = p.with_t(0.0);
        let ht = h_mean_field(&space, &p0, 0.3, -0.2).unwrap();
        assert_eq!(h_single_site(&space, &p0).unwrap().max_abs_diff(&ht).unwrap(), 0.0);
        let hm = h_mean_field(&space, &p, 0.3, -0.2).unwrap();
        assert!(hm.hermiticity_error() < 1e-12);
        let zt = p.zt();
        let want = h
            .sub(&quadrature(&space, 1).scale(zt * 0.3))
            .unwrap()
            .sub(&quadrature(&space, 2).scale(zt * -0.2))
            .unwrap()
            .add(&operator(&space, OperatorKind::Identity).scale(zt * 0.13))
            .unwrap();
        assert!(hm.max_abs_diff(&want).unwrap() < 1e-14);
    }

    #[test]
    fn commutes_with_excitation_number_when_degenerate() {
        let space = build_space_total(3, 10).unwrap();
        let p = ModelParams::degenerate(1.0, 0.7, 1.3, 3).with_mu(0.4);
        let h = h_single_site(&space, &p).unwrap();
        let ne = operator(&space, OperatorKind::Ne);
        assert!(commutator(&h, &ne).unwrap().max_abs() < 1e-10);
        let par = operator(&space, OperatorKind::ParityTotal);
        assert!(commutator(&h, &par).unwrap().max_abs() < 1e-10);
    }

    #[test]
    fn box_truncation_breaks_conservation_at_edge() {
        let space = build_space(1, 6, 6).unwrap();
        let p = ModelParams::degenerate(1.0, 1.0, 1.0, 1);
        let h = h_single_site(&space, &p).unwrap();
        let ne = operator(&space, OperatorKind::Ne);
        assert!(commutator(&h, &ne).unwrap().max_abs() > 1e-3);
    }

    #[test]
    fn n_mismatch() {
        let space = build_space(2, 2, 2).unwrap();
        let p = ModelParams::degenerate(1.0, 1.0, 0.1, 3);
        assert!(matches!(h_single_site(&space, &p), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn deterministic() {
        let space = build_space_total(2, 8).unwrap();
        let p = ModelParams::degenerate(1.0, 0.9, 0.8, 2).with_ratio(1.1);
        let a = h_single_site(&space, &p).unwrap();
        let b = h_single_site(&space, &p).unwrap();
        assert_eq!(a.re().values(), b.re().values());
        assert_eq!(a.re().col_indices(), b.re().col_indices());
    }
}
