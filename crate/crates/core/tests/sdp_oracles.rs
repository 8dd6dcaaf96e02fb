use cpca_core::chebfit::{adaptive_fit, clenshaw_unit, FitOptions};
use cpca_core::harness::{brute_force_min, sample_objective, Family};
use cpca_core::polyalg::minimize_by_stationary_points;
use cpca_core::sdp::{build_reformulation, gram_min_eigenvalues, minimize_by_sdp, solve_sdp, DEFAULT_MAX_ITERS};
use cpca_core::{ChebProxy, Interval, SdpStatus};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EPS3: f64 = 1e-6;

fn random_proxy(rng: &mut ChaCha8Rng, degree: usize) -> ChebProxy {
    let c = (0..=degree).map(|k| rng.random_range(-2.0..2.0) / (1.0 + k as f64)).collect();
    ChebProxy::new(Interval::unit(), c).unwrap()
}

fn basis(u: f64, d: usize) -> DVector<f64> {
    DVector::from_iterator(d + 1, (0..=d).map(|k| (k as f64 * u.acos()).cos()))
}

#[test]
fn random_proxies_match_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for i in 0..50 {
        let m = 3 + i % 10;
        let p = random_proxy(&mut rng, m);
        let (oracle, _) = brute_force_min(|x| p.eval(x), p.interval());
        let sol = solve_sdp(&build_reformulation(p.coeffs()).unwrap(), EPS3, DEFAULT_MAX_ITERS).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal, "proxy {i}");
        assert!((sol.t_upper - oracle).abs() <= EPS3 + 1e-6, "proxy {i}: {} vs {oracle}", sol.t_upper);
        assert!(sol.t_lower <= oracle + 1e-9);
        let (sp, _) = minimize_by_stationary_points(&p);
        assert!((sol.t_upper - sp).abs() <= EPS3 + 1e-6);
    }
}

#[test]
fn bounds_bracket_at_every_iteration() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for m in 3..=16 {
        let p = random_proxy(&mut rng, m);
        let sol = solve_sdp(&build_reformulation(p.coeffs()).unwrap(), 1e-8, DEFAULT_MAX_ITERS).unwrap();
        assert!(!sol.bound_history.is_empty());
        let scale = 1.0 + p.abs_coeff_sum();
        for (k, &(lo, up)) in sol.bound_history.iter().enumerate() {
            assert!(lo <= up + 1e-12 * scale, "m={m} iteration {k}: {lo} > {up}");
        }
        assert!(sol.gap <= 1e-8 * scale);
    }
}

#[test]
fn gram_blocks_are_psd_and_reconstruct_the_shift() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for m in 1..=14 {
        let p = random_proxy(&mut rng, m);
        let c = p.coeffs();
        let sol = solve_sdp(&build_reformulation(c).unwrap(), EPS3, DEFAULT_MAX_ITERS).unwrap();
        let (e1, e2) = gram_min_eigenvalues(&sol);
        assert!(e1 >= -1e-9 && e2 >= -1e-9, "m={m}: {e1} {e2}");
        let (d1, d2) = (m / 2, (m - 1) / 2);
        let tol = 1e-6 * (1.0 + c.iter().map(|v| v.abs()).sum::<f64>());
        for k in 0..200 {
            let u = -1.0 + 2.0 * k as f64 / 199.0;
            let (w1, w2) = if m % 2 == 1 { (1.0 + u, 1.0 - u) } else { (1.0, 1.0 - u * u) };
            let (v1, v2) = (basis(u, d1), basis(u, d2));
            let sos = w1 * (v1.transpose() * &sol.q * &v1)[0] + w2 * (v2.transpose() * &sol.q_prime * &v2)[0];
            let lhs = clenshaw_unit(c, u) - sol.t_primal;
            assert!((lhs - sos).abs() <= tol, "m={m} u={u}: {lhs} vs {sos}");
        }
    }
}

#[test]
fn degree_seven_is_feasible() {
    let p = ChebProxy::new(Interval::unit(), vec![0.1, -0.4, 0.3, 0.2, -0.15, 0.05, 0.1, -0.2]).unwrap();
    let prob = build_reformulation(p.coeffs()).unwrap();
    assert_eq!(prob.block_dims, [4, 4]);
    let sol = solve_sdp(&prob, EPS3, DEFAULT_MAX_ITERS).unwrap();
    assert_eq!(sol.status, SdpStatus::Optimal);
    let resid = prob.apply(&sol.q, &sol.q_prime) - prob.rhs();
    let mut r = resid;
    r[0] += sol.t_primal;
    assert!(r.lp_norm(1) <= EPS3, "{}", r.lp_norm(1));
    assert!(sol.t_primal - r.lp_norm(1) <= sol.t_lower + 1e-12);
    let (oracle, _) = brute_force_min(|x| p.eval(x), Interval::unit());
    assert!((sol.t_upper - oracle).abs() <= EPS3 + 1e-6);
}

#[test]
fn backends_agree_on_fitted_logistic_proxy() {
    let objs: Vec<_> = (0..30).map(|i| sample_objective(Family::LogisticLog, 7, i).unwrap()).collect();
    let f = |x: f64| objs.iter().map(|o| o.eval(x)).sum::<f64>() / 30.0;
    let (p, _) = adaptive_fit(f, Interval::unit(), 1e-6, &FitOptions::default()).unwrap();
    let sdp = minimize_by_sdp(&p, EPS3).unwrap();
    let (sp, _) = minimize_by_stationary_points(&p);
    assert!((sdp - sp).abs() <= EPS3 + 1e-6, "{sdp} vs {sp}");
    assert!(sdp >= sp - 1e-9);
}

#[test]
fn shifted_interval_proxy_uses_unit_variable() {
    let p = ChebProxy::new(Interval::new(10.0, 30.0).unwrap(), vec![1.0, 0.5, 2.0, -0.3]).unwrap();
    let (oracle, _) = brute_force_min(|x| p.eval(x), p.interval());
    assert!((minimize_by_sdp(&p, EPS3).unwrap() - oracle).abs() <= EPS3 + 1e-6);
}
