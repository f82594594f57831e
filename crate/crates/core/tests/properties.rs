mod common;

use proptest::prelude::*;

use tmdl::circuitmap::{effective_params, lt_c, lt_j, lt_s, CircuitParams, FreeParam, LjReading};
use tmdl::io::config::{CircuitBlock, RunConfig, TuneBlock};
use tmdl::io::{emit_csv, read_csv, Table};
use tmdl::meanfield::EnergySurface;
use tmdl::model::{build_space_total, commutator, h_single_site, operator, OperatorKind, DEFAULT_DIM_CEILING};
use tmdl::phasescan::ScanMethod;
use tmdl::spectra::{site_ground, CutoffPolicy};
use tmdl::ModelParams;

use common::*;

fn degenerate_params() -> impl Strategy<Value = ModelParams> {
    (0.3f64..2.0, 0.3f64..2.0, 0.0f64..2.0, 1usize..=3, -0.5f64..0.5)
        .prop_map(|(w, w0, g, n, mu)| ModelParams::degenerate(w, w0, g, n).with_mu(mu))
}

fn general_params() -> impl Strategy<Value = ModelParams> {
    (degenerate_params(), 0.7f64..1.4, 0.7f64..1.4).prop_map(|(p, a, r)| {
        let mut p = p.with_ratio(r);
        p.omega2 = p.omega1 * a;
        p
    })
}

fn finite_or_special() -> impl Strategy<Value = f64> {
    prop_oneof![
        any::<f64>(),
        Just(f64::NAN),
        Just(f64::INFINITY),
        Just(f64::NEG_INFINITY),
        Just(-0.0),
        Just(f64::MIN_POSITIVE / 8.0),
    ]
}

fn circuit() -> impl Strategy<Value = CircuitParams> {
    let pos = || 0.3f64..3.0;
    (pos(), pos(), pos(), pos(), pos(), pos(), pos(), pos(), 0.1f64..0.9).prop_map(
        |(l1, l2, la, lb, ca, cb, cg, cj, x)| CircuitParams {
            l1,
            l2,
            la,
            lb,
            ca,
            cb,
            cg,
            cj,
            d: 1.0,
            xs: x,
            phi0: 1.0,
            e_charge: 1.0,
            matrix_element: 1.0,
            omega0_atom: 1.0,
        },
    )
}

fn run_config() -> impl Strategy<Value = RunConfig> {
    (
        general_params(),
        (0.0f64..0.3, 1usize..=6),
        (1usize..400, 2usize..300),
        prop::option::of(4usize..60),
        prop_oneof![Just(ScanMethod::Meanfield), Just(ScanMethod::Perturbation), Just(ScanMethod::Both)],
        prop::option::of(circuit()),
        prop::option::of(1usize..8),
        any::<u64>(),
    )
        .prop_map(|(model, (t, z), (count, tcount), n_max, method, circ, workers, seed)| {
            let mut c = RunConfig {
                model: model.with_t(t).with_z(z),
                sweep: format!("g:0:{}:{count}", 1.0 + t),
                t_grid: format!("0:0.5:{tcount}"),
                cutoff: CutoffPolicy {
                    n_max,
                    ..CutoffPolicy::default()
                },
                workers,
                seed,
                ..RunConfig::default()
            };
            c.scan.method = method;
            c.scan.refine_frontier = seed % 2 == 1;
            c.circuit = circ.map(|params| CircuitBlock {
                params,
                reading: if seed % 3 == 0 { LjReading::Deduplicated } else { LjReading::AsPrinted },
                tune: (seed % 5 == 0).then(|| TuneBlock {
                    free: vec![FreeParam::Lb, FreeParam::Xs],
                    omega: Some(model.omega1),
                    g: None,
                }),
            });
            c
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn degenerate_hamiltonian_conserves_excitations_and_parity(p in degenerate_params(), n_max in 2usize..8) {
        let space = build_space_total(p.n_atoms, n_max).unwrap();
        let h = h_single_site(&space, &p).unwrap();
        let ne = commutator(&h, &operator(&space, OperatorKind::Ne)).unwrap().max_abs();
        let pi = commutator(&h, &operator(&space, OperatorKind::ParityTotal)).unwrap().max_abs();
        prop_assert!(ne < 1e-10, "[H, N_e] = {ne}");
        prop_assert!(pi < 1e-10, "[H, parity] = {pi}");
    }

    #[test]
    fn general_hamiltonian_conserves_parity(p in general_params(), n_max in 2usize..8) {
        let space = build_space_total(p.n_atoms, n_max).unwrap();
        let h = h_single_site(&space, &p).unwrap();
        let pi = commutator(&h, &operator(&space, OperatorKind::ParityTotal)).unwrap().max_abs();
        prop_assert!(pi < 1e-10, "[H, parity] = {pi}");
        prop_assert!(h.hermiticity_error() < 1e-12);
    }

    #[test]
    fn mean_field_energy_is_even_in_the_order_parameter(
        p in general_params(),
        t in 0.0f64..0.4,
        psi1 in -1.5f64..1.5,
        psi2 in -1.5f64..1.5,
    ) {
        let surface = EnergySurface::new(&p.with_t(t), 8, DEFAULT_DIM_CEILING).unwrap();
        let a = surface.energy(psi1, psi2).unwrap();
        let b = surface.energy(-psi1, -psi2).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()), "{a} vs {b}");
    }

    #[test]
    fn ground_energy_does_not_rise_with_cutoff(p in general_params(), n_max in 3usize..10) {
        let lo = site_ground(&p, n_max, DEFAULT_DIM_CEILING).unwrap().energy;
        let hi = site_ground(&p, n_max + 2, DEFAULT_DIM_CEILING).unwrap().energy;
        prop_assert!(hi <= lo + 1e-9 * (1.0 + lo.abs()), "n_max {n_max}: {lo} -> {hi}");
    }

    #[test]
    fn config_survives_toml_and_json(c in run_config()) {
        prop_assert_eq!(&RunConfig::from_toml(&c.to_toml().unwrap()).unwrap(), &c);
        prop_assert_eq!(&RunConfig::from_json(&c.to_json().unwrap()).unwrap(), &c);
    }

    #[test]
    fn scaling_lengths_and_capacitances_keeps_mode_frequencies(c in circuit(), s in 0.1f64..10.0) {
        let a = effective_params(&c, LjReading::AsPrinted).unwrap();
        let scaled = CircuitParams {
            la: c.la * s,
            lb: c.lb * s,
            ca: c.ca / s,
            cb: c.cb / s,
            ..c
        };
        let b = effective_params(&scaled, LjReading::AsPrinted).unwrap();
        prop_assert!(rel_diff(a.omega1, b.omega1) < 1e-12);
        prop_assert!(rel_diff(a.omega2, b.omega2) < 1e-12);
    }

    #[test]
    fn composite_polynomials_agree_across_forms(
        l1 in -1.0f64..1.0,
        l2 in -1.0f64..1.0,
        la in -1.0f64..1.0,
    ) {
        let (l1, l2, la) = (10f64.powf(l1), 10f64.powf(l2), 10f64.powf(la));
        let pairs = [
            (lt_j(l1, l2, la, LjReading::AsPrinted), eval_monomials(LT_J_PRINTED, l1, l2, la)),
            (lt_j(l1, l2, la, LjReading::Deduplicated), eval_monomials(LT_J_DEDUPLICATED, l1, l2, la)),
            (lt_j(l1, l2, la, LjReading::Deduplicated), lt_j_dedup_factored(l1, l2, la)),
            (lt_s(l1, l2, la), eval_monomials(LT_S, l1, l2, la)),
            (lt_s(l1, l2, la), lt_s_factored(l1, l2, la)),
            (lt_c(l1, l2, la), eval_monomials(LT_C, l1, l2, la)),
            (lt_c(l1, l2, la), lt_c_factored(l1, l2, la)),
        ];
        for (k, (a, b)) in pairs.iter().enumerate() {
            prop_assert!(rel_diff(*a, *b) < 1e-12, "pair {k}: {a} vs {b}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn csv_floats_roundtrip_bit_exact(values in prop::collection::vec(finite_or_special(), 1..12)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let mut t = Table::new(&["i", "x"]);
        for (i, v) in values.iter().enumerate() {
            t.push(vec![i.into(), (*v).into()]).unwrap();
        }
        emit_csv(&t, &path).unwrap();
        let back = read_csv(&path).unwrap().floats("x").unwrap();
        prop_assert_eq!(back.len(), values.len());
        for (a, b) in values.iter().zip(&back) {
            if a.is_nan() {
                prop_assert!(b.is_nan());
            } else {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}
