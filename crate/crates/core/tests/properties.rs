mod common;

use common as o;
use proptest::prelude::*;

use qthermo_core::linalg::{self, BipartiteState, Subsystem};
use qthermo_core::random::{self, seeded};
use qthermo_core::thermo::{self, BetaSolveConfig, EnvHamiltonian, ExtReal};

fn dims() -> impl Strategy<Value = (usize, usize)> {
    (1usize..=3, 2usize..=4)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn partial_traces_of_products((ds, de) in dims(), seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let (a, b) = (random::wishart_density(&mut rng, ds), random::wishart_density(&mut rng, de));
        let joint = BipartiteState::product(&a, &b).unwrap();
        let s = linalg::partial_trace(&joint, Subsystem::System);
        let e = linalg::partial_trace(&joint, Subsystem::Environment);
        prop_assert!(o::max_abs_diff(s.as_matrix(), a.as_matrix()) < 1e-12);
        prop_assert!(o::max_abs_diff(e.as_matrix(), b.as_matrix()) < 1e-12);
        prop_assert!(o::max_abs_diff(joint.state().as_matrix(), &o::kron(a.as_matrix(), b.as_matrix())) < 1e-14);
    }

    #[test]
    fn partial_traces_match_oracle((ds, de) in dims(), seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let rho = BipartiteState::new(ds, de, random::wishart_density(&mut rng, ds * de)).unwrap();
        let m = rho.state().as_matrix();
        prop_assert!(o::max_abs_diff(rho.system().as_matrix(), &o::trace_env(m, ds, de)) < 1e-13);
        prop_assert!(o::max_abs_diff(rho.environment().as_matrix(), &o::trace_sys(m, ds, de)) < 1e-13);
        prop_assert!((thermo::mutual_information(&rho) - o::mutual_information(m, ds, de)).abs() < 1e-10);
        prop_assert!(thermo::mutual_information(&rho) >= -1e-12);
    }

    #[test]
    fn trace_distance_is_a_metric(d in 2usize..=6, seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let (a, b, c) = (
            random::wishart_density(&mut rng, d),
            random::wishart_density(&mut rng, d),
            random::wishart_density(&mut rng, d),
        );
        let t = |x, y| linalg::trace_distance(x, y).unwrap();
        prop_assert!(t(&a, &c) <= t(&a, &b) + t(&b, &c) + 1e-12);
        prop_assert!((t(&a, &b) - t(&b, &a)).abs() < 1e-14);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&t(&a, &b)));
        prop_assert!(t(&a, &a) < 1e-13);
        prop_assert!((t(&a, &b) - o::trace_distance(a.as_matrix(), b.as_matrix())).abs() < 1e-12);
    }

    #[test]
    fn unitaries_invert_and_preserve_spectra(d in 2usize..=6, seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let u = random::haar_unitary(&mut rng, d);
        prop_assert!(u.defect() < 1e-12);
        let id = u.then_after(&u.adjoint());
        prop_assert!(o::max_abs_diff(id.as_matrix(), &o::CM::identity(d, d)) < 1e-12);
        let rho = random::wishart_density(&mut rng, d);
        let moved = u.conjugate(&rho);
        let back = u.adjoint().conjugate(&moved);
        prop_assert!(o::max_abs_diff(back.as_matrix(), rho.as_matrix()) < 1e-12);
        prop_assert!((thermo::von_neumann_entropy(&moved) - thermo::von_neumann_entropy(&rho)).abs() < 1e-11);
    }

    #[test]
    fn entropies_match_oracle_and_bounds(d in 2usize..=6, rank in 1usize..=6, seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let rho = random::wishart_density_rank(&mut rng, d, rank.min(d));
        let sigma = random::wishart_density(&mut rng, d);
        let s = thermo::von_neumann_entropy(&rho);
        prop_assert!(s >= -1e-12 && s <= (d as f64).ln() + 1e-12);
        prop_assert!((s - o::entropy(rho.as_matrix())).abs() < 1e-10);
        let rel = thermo::relative_entropy(&rho, &sigma).unwrap().finite().unwrap();
        prop_assert!(rel >= -1e-12);
        prop_assert!((rel - o::rel_entropy(rho.as_matrix(), sigma.as_matrix())).abs() < 1e-9);
        // Pinsker
        let t = linalg::trace_distance(&rho, &sigma).unwrap();
        prop_assert!(rel >= 2.0 * t * t - 1e-12);
    }

    #[test]
    fn gibbs_energy_decreases_and_beta_star_inverts(d in 2usize..=8, seed in any::<u64>(), beta in -6.0f64..6.0) {
        let mut rng = seeded(seed);
        let env = EnvHamiltonian::new(random::random_env_hamiltonian(&mut rng, d, 1.0)).unwrap();
        let (lo, hi) = (env.energy(ExtReal::Finite(beta + 0.1)), env.energy(ExtReal::Finite(beta)));
        prop_assert!(lo < hi);
        prop_assert!(env.variance(ExtReal::Finite(beta)) > 0.0);
        let g = env.gibbs_state(ExtReal::Finite(beta));
        prop_assert!(o::max_abs_diff(g.as_matrix(), &o::gibbs(env.matrix().as_matrix(), beta)) < 1e-12);
        let got = env.effective_beta(&g, &BetaSolveConfig::default()).unwrap().finite().unwrap();
        prop_assert!((got - beta).abs() < 1e-8);
    }
}
