use collapse_core::bounds::{visibility, InterferometryExperiment};
use collapse_core::dp::{delta_e, MassDistribution};
use collapse_core::ensemble::Ensemble;
use collapse_core::experiment::{parse_csv, render_csv, ExperimentResult};
use collapse_core::grw::{apply_collapse, collapse_probability_density, CollapseParams};
use collapse_core::master::{decay_kernel, evolve_density_matrix, MasterConfig, MasterEvolver};
use collapse_core::propagator::{evolve, Hamiltonian};
use collapse_core::qstate::{gaussian_packet, two_peak_superposition, DensityMatrix, Grid1D};
use collapse_core::HBAR;
use proptest::prelude::*;
use rand::Rng;

const PROTON: f64 = 1.672_621_923_69e-27;

fn grid() -> Grid1D {
    Grid1D::centered(6.4e-7, 256).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn free_and_trapped_evolution_keep_the_norm(
        x0 in -2e-7..2e-7f64,
        width in 2e-8..6e-8f64,
        k in -1e8..1e8f64,
        t in 1e-12..1e-9f64,
        omega in prop::option::of(1e8..1e10f64),
    ) {
        let psi = gaussian_packet(&grid(), x0, width, HBAR * k, PROTON).unwrap();
        let h = match omega {
            Some(w) => Hamiltonian::harmonic(w).unwrap(),
            None => Hamiltonian::free(),
        };
        let out = evolve(&psi, &h, t, t / 50.0).unwrap();
        prop_assert!((out.norm_squared() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn collapse_density_is_normalized_and_posterior_is_a_state(
        sep in 0.0..4e-7f64,
        // The box is at least 16 r_c long.
        r_c in 4e-8..8e-8f64,
        w_left in 0.05..0.95f64,
        pick in 0usize..256,
    ) {
        let g = grid();
        let psi = two_peak_superposition(&g, w_left.sqrt().into(), (1.0 - w_left).sqrt().into(), sep, 4e-8, 1e-20).unwrap();
        let params = CollapseParams::new(1.0, r_c).unwrap();
        let p = collapse_probability_density(&psi, 0, &params).unwrap();
        prop_assert!(p.iter().all(|v| *v >= 0.0));
        let total: f64 = p.iter().sum::<f64>() * g.dx();
        prop_assert!((total - 1.0).abs() < 1e-9, "total {}", total);
        let peak = p.iter().cloned().fold(0.0, f64::max);
        if p[pick] > 1e-6 * peak {
            let post = apply_collapse(&psi, 0, g.x(pick), &params).unwrap();
            prop_assert!((post.norm_squared() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn decay_kernel_is_bounded_and_grows_with_distance(
        lambda in 1e-18..1e3f64,
        r_c in 1e-8..1e-6f64,
        a in 0.0..1e-5f64,
        b in 0.0..1e-5f64,
    ) {
        let params = CollapseParams::new(lambda, r_c).unwrap();
        let (near, far) = if a < b { (a, b) } else { (b, a) };
        let (gn, gf) = (decay_kernel(near, &params), decay_kernel(far, &params));
        prop_assert!(gn >= 0.0 && gf <= lambda * (1.0 + 1e-15));
        prop_assert!(gn <= gf);
    }

    #[test]
    fn dp_energy_is_symmetric_translation_invariant_and_quadratic(
        m in 1e-18..1e-12f64,
        r1 in 1e-8..1e-6f64,
        r2 in 1e-8..1e-6f64,
        d in 0.0..3e-6f64,
        k in 0.1..10.0f64,
        shift in prop::array::uniform3(-1e-5..1e-5f64),
        gaussian in any::<bool>(),
    ) {
        let make = |mass: f64, size: f64, c: [f64; 3]| {
            if gaussian {
                MassDistribution::gaussian(mass, size, c).unwrap()
            } else {
                MassDistribution::uniform_sphere(mass, size, c).unwrap()
            }
        };
        let a = make(m, r1, [0.0; 3]);
        let b = make(m, r2, [d, 0.0, 0.0]);
        let ab = delta_e(&a, &b).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert_eq!(ab, delta_e(&b, &a).unwrap());
        let moved = delta_e(&a.translated(shift), &b.translated(shift)).unwrap();
        prop_assert!((moved - ab).abs() <= 1e-7 * ab.max(f64::MIN_POSITIVE));
        let scaled = delta_e(&make(k * m, r1, [0.0; 3]), &make(k * m, r2, [d, 0.0, 0.0])).unwrap();
        prop_assert!((scaled / (k * k * ab) - 1.0).abs() < 1e-9 || ab == 0.0);
    }

    #[test]
    fn visibility_falls_with_rate_separation_and_time(
        amu in 1e2..1e6f64,
        l in 1e-9..1e-6f64,
        t in 1e-5..1e-1f64,
        lambda in 1e-14..1e-4f64,
        factor in 1.01..10.0f64,
    ) {
        let base = InterferometryExperiment::new(amu, l, t, 0.5).unwrap();
        let v = visibility(&base, lambda, 1e-7).unwrap();
        prop_assert!((0.0..=1.0).contains(&v));
        prop_assert!(visibility(&base, lambda * factor, 1e-7).unwrap() <= v);
        let wider = InterferometryExperiment::new(amu, l * factor, t, 0.5).unwrap();
        prop_assert!(visibility(&wider, lambda, 1e-7).unwrap() <= v);
        let longer = InterferometryExperiment::new(amu, l, t * factor, 0.5).unwrap();
        prop_assert!(visibility(&longer, lambda, 1e-7).unwrap() <= v);
    }

    #[test]
    fn csv_round_trip_is_bit_exact(rows in prop::collection::vec(prop::collection::vec(any::<f64>(), 3), 0..20)) {
        let rows: Vec<Vec<f64>> = rows
            .into_iter()
            .map(|r| r.into_iter().map(|v| if v.is_nan() { 0.0 } else { v }).collect())
            .collect();
        let result = ExperimentResult {
            kind: "prop".into(),
            seed: 0,
            config_echo: String::new(),
            columns: vec!["a".into(), "b".into(), "c".into()],
            rows: rows.clone(),
            summary: vec![],
        };
        let (_, back) = parse_csv(&render_csv(&result).unwrap()).unwrap();
        prop_assert_eq!(back.len(), rows.len());
        for (x, y) in rows.iter().flatten().zip(back.iter().flatten()) {
            prop_assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn ensemble_prefixes_are_stable(seed in any::<u64>(), short in 1u64..300, extra in 0u64..300, workers in 1usize..4) {
        let job = |_: u64, rng: &mut rand_chacha::ChaCha8Rng| -> collapse_core::Result<u64> { Ok(rng.random()) };
        let a = Ensemble::new(seed, short, workers).unwrap().map(job).unwrap();
        let b = Ensemble::new(seed, short + extra, 1).unwrap().map(job).unwrap();
        prop_assert_eq!(&a[..], &b[..short as usize]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn master_evolution_keeps_trace_hermiticity_and_positivity(
        sep in 0.0..2e-7f64,
        r_c in 3e-8..8e-8f64,
        lambda_t in 0.01..3.0f64,
        env in prop::option::of(0.0..2.0f64),
    ) {
        let g = Grid1D::centered(6.4e-7, 64).unwrap();
        let psi = two_peak_superposition(&g, 0.6f64.sqrt().into(), 0.4f64.sqrt().into(), sep, 8e-8, 1e-20).unwrap();
        let rho0 = DensityMatrix::from_pure(&psi).unwrap();
        let params = CollapseParams::new(1.0, r_c).unwrap();
        let h = Hamiltonian::free();
        let rho = match env {
            None => evolve_density_matrix(&rho0, &h, &params, lambda_t, lambda_t / 20.0).unwrap(),
            Some(rate) => {
                let config = MasterConfig::new(lambda_t / 20.0).with_environment(rate);
                let mut ev = MasterEvolver::new(&g, 1e-20, &h, &params, &config).unwrap();
                let mut rho = rho0.clone();
                ev.evolve_in_place(&mut rho, lambda_t).unwrap();
                rho
            }
        };
        prop_assert!((rho.trace() - 1.0).abs() < 1e-10);
        prop_assert!(rho.hermiticity_error() < 1e-12);
        prop_assert!(rho.eigenvalues().iter().all(|e| *e > -1e-10));
        prop_assert!(rho.purity() <= rho0.purity() + 1e-10);
    }
}
