use proptest::prelude::*;

use syncpersist::bounds::{evaluate_bounds, fit_boundary, DichotomyConstants};
use syncpersist::dynamics::{sample_perturbation_matrices, CouplingSpec, Lorenz, NetworkSystem, OscillatorModel};
use syncpersist::graph::{generate, Graph, GraphKind, GraphRecipe};
use syncpersist::matrix::Matrix;
use syncpersist::spectra::{eigenvalues_symmetric, summarize};

fn random_graph() -> impl Strategy<Value = Graph> {
    (2usize..20, any::<u64>(), 0usize..3).prop_filter_map("connected", |(n, seed, which)| {
        let kind = match which {
            0 => GraphKind::ErdosRenyi { p: 0.4 },
            1 => GraphKind::BarabasiAlbert { m0: 1 + (seed % 3) as usize },
            _ => GraphKind::Path,
        };
        generate(&GraphRecipe::new(kind, n, seed)).ok()
    })
}

fn symmetric_matrix() -> impl Strategy<Value = Matrix> {
    (1usize..9).prop_flat_map(|n| {
        proptest::collection::vec(-10.0f64..10.0, n * n).prop_map(move |v| {
            let mut m = Matrix::zeros(n, n);
            for i in 0..n {
                for j in 0..=i {
                    m[(i, j)] = v[i * n + j];
                    m[(j, i)] = v[i * n + j];
                }
            }
            m
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn laplacian_rows_sum_to_zero(g in random_graph()) {
        let l = g.laplacian();
        prop_assert_eq!(l.max_asymmetry(), 0.0);
        for i in 0..g.n() {
            prop_assert_eq!(l.row(i).iter().sum::<f64>(), 0.0);
            prop_assert_eq!(l[(i, i)], g.degree(i) as f64);
        }
        prop_assert_eq!(g.degrees().iter().sum::<usize>(), 2 * g.edge_count());
    }

    #[test]
    fn edge_list_round_trip(g in random_graph()) {
        prop_assert_eq!(Graph::from_edge_list(&g.to_edge_list()).unwrap(), g);
    }

    #[test]
    fn spectral_identities(g in random_graph()) {
        let s = summarize(&g).unwrap();
        let tol = 1e-9 * (1.0 + s.opnorm);
        prop_assert!(s.eigenvalues[0].abs() < tol);
        prop_assert!(s.lambda2 > 0.0);
        prop_assert_eq!(s.opnorm, 2.0 * s.g_max as f64);
        prop_assert!(s.lambda2 <= s.fiedler_bound() + tol);
        prop_assert!(s.lambda_max() <= s.opnorm + tol);
        let trace: f64 = s.eigenvalues.iter().sum();
        prop_assert!((trace - 2.0 * g.edge_count() as f64).abs() < tol * g.n() as f64);
    }

    #[test]
    fn jacobi_preserves_trace_and_frobenius(m in symmetric_matrix()) {
        let ev = eigenvalues_symmetric(&m).unwrap();
        let trace: f64 = (0..m.rows()).map(|i| m[(i, i)]).sum();
        let scale = 1.0 + m.norm_frobenius();
        prop_assert!((ev.iter().sum::<f64>() - trace).abs() < 1e-9 * scale);
        let f2: f64 = ev.iter().map(|x| x * x).sum();
        prop_assert!((f2 - m.norm_frobenius().powi(2)).abs() < 1e-9 * scale * scale);
        prop_assert!(ev.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn mismatch_draws_have_unit_norm(g in random_graph(), seed in any::<u64>()) {
        let r = sample_perturbation_matrices(&g, 3, seed, false).unwrap();
        for p in 0..r.len() {
            let m = r.pair(p);
            prop_assert!((m.norm_inf() - 1.0).abs() <= 1e-12);
            prop_assert_eq!(m.max_asymmetry(), 0.0);
        }
    }

    #[test]
    fn perturbation_operator_is_bounded(g in random_graph(), seed in any::<u64>(), t in -50.0f64..50.0, delta in 0.0f64..10.0) {
        let c = CouplingSpec::new(&g, 3, delta, 1.3, seed).unwrap();
        let sys = NetworkSystem::new(&g, Lorenz::default(), c, 1.0).unwrap();
        let p = sys.perturbation_operator(t);
        let bound = g.laplacian().norm_inf() * delta;
        prop_assert!(p.norm_inf() <= bound * (1.0 + 1e-12) + 1e-15);
    }

    #[test]
    fn synchronous_states_stay_synchronous(g in random_graph(), seed in any::<u64>(), s in proptest::array::uniform3(-20.0f64..20.0), t in 0.0f64..10.0) {
        let c = CouplingSpec::new(&g, 3, 3.0, 1.0, seed).unwrap();
        let sys = NetworkSystem::new(&g, Lorenz::default(), c, 2.0).unwrap();
        let x: Vec<f64> = (0..g.n()).flat_map(|_| s).collect();
        let mut out = vec![0.0; x.len()];
        sys.network_rhs(t, &x, &mut out).unwrap();
        let mut f = [0.0; 3];
        Lorenz::default().rhs(&s, &mut f);
        for i in 0..g.n() {
            prop_assert_eq!(&out[3 * i..3 * i + 3], &f[..]);
        }
    }

    #[test]
    fn persistence_boundary_has_zero_rate(
        lambda2 in 0.01f64..50.0,
        opnorm in 0.1f64..100.0,
        gamma in 0.1f64..5.0,
        eta in 0.01f64..10.0,
        k in 0.01f64..10.0,
        alpha in 0.01f64..20.0,
    ) {
        let r = evaluate_bounds(lambda2, opnorm, gamma, DichotomyConstants::new(eta, k).unwrap()).unwrap();
        let d = r.delta_threshold(alpha);
        let scale = alpha * lambda2 * gamma + eta + (alpha * d * k * opnorm).abs();
        prop_assert!(r.nu(alpha, d).abs() <= 1e-12 * scale);
        prop_assert_eq!(d > 0.0, alpha > r.alpha_threshold);
        prop_assert!(r.delta_threshold(alpha * 1.5) > d);
        if d > 0.0 {
            prop_assert!(r.nu(alpha, 0.5 * d) > 0.0);
        }
    }

    #[test]
    fn noiseless_boundary_fit_round_trips(c1 in 0.5f64..20.0, c2 in 0.1f64..10.0) {
        let pts: Vec<(f64, f64)> = (1..=8).map(|k| {
            let a = 0.25 * k as f64;
            (a, c1 - c2 / a)
        }).collect();
        let f = fit_boundary(&pts).unwrap();
        prop_assert!((f.c1 - c1).abs() < 1e-10 * (1.0 + c1));
        prop_assert!((f.c2 - c2).abs() < 1e-10 * (1.0 + c2));
        let consts = f.constants(2.0, 2.0, 1.0).unwrap();
        let r = evaluate_bounds(2.0, 2.0, 1.0, consts).unwrap();
        prop_assert!((r.c1() - c1).abs() < 1e-10 * (1.0 + c1));
        prop_assert!((r.c2() - c2).abs() < 1e-10 * (1.0 + c2));
    }
}
