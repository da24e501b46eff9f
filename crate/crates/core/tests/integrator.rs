use syncpersist::dynamics::{lorenz_rhs, CouplingSpec, Lorenz, NetworkSystem};
use syncpersist::graph::Graph;
use syncpersist::integrate::{integrate, integrate_streaming, FnSystem, IntegratorConfig, Method};

fn cfg(h: f64, method: Method) -> IntegratorConfig {
    IntegratorConfig { h, method, sample_stride: 1 }
}

/// Least-squares slope of log10(error) against log10(h).
fn order_slope(method: Method, hs: &[f64], err: impl Fn(f64, Method) -> f64) -> f64 {
    let pts: Vec<(f64, f64)> = hs.iter().map(|&h| (h.log10(), err(h, method).log10())).collect();
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

fn exp_error(h: f64, method: Method) -> f64 {
    let sys = FnSystem::new(1, |_t, x: &[f64], dx: &mut [f64]| dx[0] = -x[0]);
    let tr = integrate(&sys, &[1.0], 0.0, 1.0, &cfg(h, method)).unwrap();
    (tr.states.last().unwrap()[0] - (-1.0f64).exp()).abs()
}

#[test]
fn exponential_convergence_orders() {
    let rk6 = order_slope(Method::Rk6, &[0.5, 0.25, 0.125, 0.0625], exp_error);
    assert!((5.5..=6.5).contains(&rk6), "rk6 slope {rk6}");
    let rk4 = order_slope(Method::Rk4, &[0.2, 0.1, 0.05, 0.025], exp_error);
    assert!((3.5..=4.5).contains(&rk4), "rk4 slope {rk4}");
}

#[test]
fn lorenz_convergence_order() {
    // reference from a much finer step; errors at t = 1 stay in the asymptotic regime
    let sys = FnSystem::new(3, |_t, x: &[f64], dx: &mut [f64]| {
        dx.copy_from_slice(&lorenz_rhs([x[0], x[1], x[2]]));
    });
    let x0 = [-7.0, -10.0, 5.0];
    let end = |h: f64, m: Method| integrate(&sys, &x0, 0.0, 1.0, &cfg(h, m)).unwrap().states.pop().unwrap();
    let reference = end(1e-5, Method::Rk6);
    let err = |h: f64, m: Method| {
        let x = end(h, m);
        x.iter().zip(&reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    };
    let rk6 = order_slope(Method::Rk6, &[0.01, 0.005, 0.0025], err);
    assert!((5.5..=6.5).contains(&rk6), "rk6 slope {rk6}");
    let rk4 = order_slope(Method::Rk4, &[0.01, 0.005, 0.0025], err);
    assert!((3.5..=4.5).contains(&rk4), "rk4 slope {rk4}");
}

#[test]
fn harmonic_energy_drift_per_period() {
    let sys = FnSystem::new(2, |_t, x: &[f64], dx: &mut [f64]| {
        dx[0] = x[1];
        dx[1] = -x[0];
    });
    let periods = 100.0;
    let tr = integrate(&sys, &[1.0, 0.0], 0.0, periods * 2.0 * std::f64::consts::PI, &cfg(0.01, Method::Rk6)).unwrap();
    let x = tr.states.last().unwrap();
    let drift = (0.5 * (x[0] * x[0] + x[1] * x[1]) - 0.5).abs() / periods;
    assert!(drift <= 1e-8, "drift per period {drift}");
}

#[test]
fn streaming_matches_stored_trajectory() {
    let g = Graph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
    let c = CouplingSpec::new(&g, 3, 2.0, 1.0, 11).unwrap();
    let sys = NetworkSystem::new(&g, Lorenz::default(), c, 1.0).unwrap();
    let x0: Vec<f64> = (0..9).map(|k| -5.0 + 0.3 * k as f64).collect();
    let c = IntegratorConfig { h: 0.01, method: Method::Rk6, sample_stride: 7 };
    let stored = integrate(&sys, &x0, 0.0, 10.0, &c).unwrap();
    let mut seen = Vec::new();
    integrate_streaming(&sys, &x0, 0.0, 10.0, &c, |t, x| seen.push((t, x.to_vec()))).unwrap();
    assert_eq!(seen.len(), stored.times.len());
    for ((t, x), (ts, xs)) in seen.iter().zip(stored.times.iter().zip(&stored.states)) {
        assert_eq!(t.to_bits(), ts.to_bits());
        assert!(x.iter().zip(xs).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
}

#[test]
fn step_halving_keeps_sync_error_conclusion() {
    use syncpersist::experiments::{ensemble_error, SimulationSettings};
    let g = Graph::from_edges(2, &[(0, 1)]).unwrap();
    let mut coarse = SimulationSettings::default();
    coarse.sync.ensemble_size = 2;
    let mut fine = coarse.clone();
    fine.integrator.h = 0.005;
    for (alpha, delta) in [(0.3, 0.0), (1.0, 2.0)] {
        let a = ensemble_error(&g, alpha, delta, 1.0, &coarse, 5, |m| vec![m as u64], None).unwrap().mean_error;
        let b = ensemble_error(&g, alpha, delta, 1.0, &fine, 5, |m| vec![m as u64], None).unwrap().mean_error;
        // same side of the synchronization threshold
        assert_eq!(a < 1.0, b < 1.0, "alpha {alpha}, delta {delta}: {a} vs {b}");
    }
}
