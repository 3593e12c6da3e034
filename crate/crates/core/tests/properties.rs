// SPDX-License-Identifier: Apache-2.0

mod common;

use common::*;
use lyagate::gate_family::{build_family, GateSpec, SigmaIndex};
use lyagate::integrator::{ControlSignal, TimeGrid};
use lyagate::io::{read_control_csv, write_control_csv};
use lyagate::metrics::lyapunov;
use lyagate::operator_algebra::{identity, StateVector};
use lyagate::saturation::{saturate_clock_aware, ChannelBounds, ClockBounds, CLOCK_LIMIT};
use lyagate::seed::{make_seed, SeedConfig};
use num_complex::Complex64;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn generator_preserves_trace_and_hermiticity(seed in any::<u64>(), n in 1usize..=6, m in 0usize..=3, p in 0usize..=3, u in prop::collection::vec(-2.0f64..2.0, 3)) {
        let mut rng = seeded(seed);
        let model = random_model(&mut rng, n, m, p);
        let rho = random_density(&mut rng, n);
        let l = model.apply_lindblad(&u[..m], &rho).unwrap();
        let tr: Complex64 = (0..n).map(|i| l[[i, i]]).sum();
        prop_assert!(tr.norm() <= 1e-12, "trace {}", tr);
        let herm = max_abs(&(&l - &l.t().mapv(|z| z.conj())));
        prop_assert!(herm <= 1e-12);
    }

    #[test]
    fn adjoint_is_dual_and_unital(seed in any::<u64>(), n in 1usize..=6, m in 0usize..=3, p in 0usize..=3, u in prop::collection::vec(-2.0f64..2.0, 3)) {
        let mut rng = seeded(seed);
        let model = random_model(&mut rng, n, m, p);
        let rho = random_matrix(&mut rng, n);
        let j = random_matrix(&mut rng, n);
        let lhs = hs(&model.apply_adjoint(&u[..m], &j).unwrap(), &rho);
        let rhs = hs(&j, &model.apply_lindblad(&u[..m], &rho).unwrap());
        prop_assert!((lhs - rhs).norm() <= 1e-12, "{} vs {}", lhs, rhs);
        let unit = model.apply_adjoint(&u[..m], &identity(n)).unwrap();
        prop_assert!(max_abs(&unit) <= 1e-12);
    }

    #[test]
    fn fast_paths_match_reference(seed in any::<u64>(), n in 1usize..=6, m in 0usize..=3, p in 0usize..=3, s in 0.1f64..2.0, u in prop::collection::vec(-2.0f64..2.0, 3)) {
        let mut rng = seeded(seed);
        let model = random_model(&mut rng, n, m, p);
        let rho = random_hermitian(&mut rng, n);
        let scaled: Vec<f64> = u[..m].iter().map(|x| x / s).collect();
        let reference = model.apply_lindblad(&scaled, &rho).unwrap() * Complex64::new(s, 0.0);
        let fast = model.generator_hermitian(s, &u[..m], &rho);
        prop_assert!(max_abs(&(&fast - &reference)) <= 1e-11);
        let reference = model.apply_adjoint(&scaled, &rho).unwrap() * Complex64::new(s, 0.0);
        let fast = model.adjoint_generator_hermitian(s, &u[..m], &rho);
        prop_assert!(max_abs(&(&fast - &reference)) <= 1e-11);
        let (d, c) = model.split_terms_hermitian(&rho);
        prop_assert!(max_abs(&(&d - &model.apply_drift(&rho).unwrap())) <= 1e-12);
        for (k, ck) in c.iter().enumerate() {
            prop_assert!(max_abs(&(ck - &model.apply_control_superop(k, &rho).unwrap())) <= 1e-12);
        }
    }

    #[test]
    fn clock_saturation_respects_bounds(
        u_max in 0.05f64..3.0,
        clock_max in 0.01f64..0.99,
        frac in -1.0f64..=1.0,
        f0 in -3.0f64..3.0,
        f1 in -3.0f64..3.0,
        g0 in 0.0f64..2.0,
        g1 in 0.0f64..2.0,
    ) {
        let bounds = ClockBounds::new(ChannelBounds::symmetric(&[u_max]).unwrap(), clock_max, false).unwrap();
        let ub = frac * u_max;
        let vt = [g0 * f0, g1 * f1];
        let out = saturate_clock_aware(&vt, 0.0, &[ub], &bounds);
        let v0s = out[0];
        prop_assert!(v0s.abs() < 1.0 && v0s.abs() <= CLOCK_LIMIT);
        let u_new = (ub + out[1]) / (1.0 + v0s);
        prop_assert!(u_new.abs() <= u_max * (1.0 + 1e-12), "{} > {}", u_new, u_max);
        prop_assert!(out[0] * f0 >= 0.0);
        prop_assert!(out[1] * f1 >= 0.0);
    }

    #[test]
    fn seed_perturbation_is_bounded_and_deterministic(
        amplitude in 0.0f64..0.5,
        harmonics in 0usize..6,
        rng_seed in any::<u64>(),
        level in -1.0f64..1.0,
        n in 10usize..200,
    ) {
        let base = ControlSignal::constant(TimeGrid::new(0.0, 0.85, n).unwrap(), &[level]).unwrap();
        let cfg = SeedConfig { amplitude, harmonics, period: 0.85, rng_seed };
        let a = make_seed(&base, &cfg).unwrap();
        prop_assert_eq!(&a, &make_seed(&base, &cfg).unwrap());
        let bound = 2.0 * harmonics as f64 * amplitude + 1e-12;
        for v in a.channel(0) {
            prop_assert!((v - level).abs() <= bound);
        }
    }

    #[test]
    fn control_csv_round_trips(values in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 12), 1..4), tf in 0.01f64..10.0) {
        let u = ControlSignal::new(TimeGrid::new(0.0, tf, 11).unwrap(), values).unwrap();
        let mut buf = Vec::new();
        write_control_csv(&mut buf, &u).unwrap();
        prop_assert_eq!(read_control_csv(&buf[..]).unwrap(), u);
    }

    #[test]
    fn lyapunov_stays_in_range(seed in any::<u64>(), n in 2usize..=5) {
        let mut rng = seeded(seed);
        let js: Vec<_> = (0..n * n).map(|i| random_projector(&mut rng, n, 1 + i % n)).collect();
        let rhos: Vec<_> = (0..n * n).map(|_| random_density(&mut rng, n)).collect();
        let v = lyapunov(&js, &rhos).unwrap();
        prop_assert!(v >= -1e-12 && v <= (n * n) as f64 + 1e-12);
    }

    #[test]
    fn gate_family_members_are_unit_vectors(n_bar in 1usize..=4, extra in 0usize..3, seed in any::<u64>()) {
        let dim = n_bar + extra;
        let e: Vec<_> = (0..n_bar).map(|i| StateVector::basis(dim, i).unwrap()).collect();
        // cyclic shift with a phase on every target
        let phase = Complex64::from_polar(1.0, (seed % 628) as f64 / 100.0);
        let f: Vec<_> = (0..n_bar)
            .map(|i| {
                let mut a = vec![Complex64::new(0.0, 0.0); dim];
                a[(i + 1) % n_bar] = phase;
                StateVector::from_vec(a)
            })
            .collect();
        let spec = GateSpec::new(e, f).unwrap();
        let fam = build_family(&spec, false).unwrap();
        prop_assert_eq!(fam.len(), n_bar * n_bar);
        prop_assert_eq!(SigmaIndex::all(n_bar).len(), n_bar * n_bar);
        for mem in fam.all() {
            prop_assert!((mem.epsilon.norm() - 1.0).abs() <= 1e-12);
            prop_assert!((mem.phi.norm() - 1.0).abs() <= 1e-12);
        }
        prop_assert_eq!(build_family(&spec, true).unwrap().n_active(), n_bar);
    }
}
