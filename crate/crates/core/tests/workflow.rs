use maxfactor::calibrate::{boundary_lrt, fit_mle, information_criteria, FitOptions};
use maxfactor::factor_model::{implied_matrix, Family, ModelSpec, ParamVector};
use maxfactor::likelihood::log_likelihood;
use maxfactor::montecarlo::gen_panel;
use maxfactor::nonparametric::preliminary_estimates;
use maxfactor::numerics::QuadratureRule;

fn labels(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

#[test]
fn simulated_panels_match_implied_probabilities() {
    let spec = ModelSpec::new(Family::MaxFactorGumbel, 2);
    let theta = ParamVector::max_factor(vec![-1.15, -0.55], vec![-1.30, -1.00], vec![0.11, 0.15]);
    let rule = QuadratureRule::legendre(128).unwrap();
    let (pi, pi_rs) = implied_matrix(&spec, &theta, &rule).unwrap();
    let sizes = vec![vec![400u64; 4000]; 2];
    let panel = gen_panel(&spec, &theta, &labels(&["B", "CCC"]), &sizes, 17).unwrap();
    let est = preliminary_estimates(&panel);
    for r in 0..2 {
        let se = est.se_pi_r[r].unwrap();
        assert!((est.pi_r[r] - pi[r]).abs() < 4.0 * se, "pi_{r}: {} vs {} (se {se})", est.pi_r[r], pi[r]);
        for s in 0..2 {
            let se = est.se_pi_rs[r][s].unwrap();
            assert!((est.pi_rs[r][s] - pi_rs[r][s]).abs() < 4.0 * se, "pi_{r}{s}");
        }
    }
}

#[test]
fn permuting_categories_permutes_panel_and_keeps_likelihood() {
    let spec = ModelSpec::new(Family::MaxFactorGumbel, 3);
    let theta = ParamVector::max_factor(vec![-1.66, -1.18, -0.54], vec![-1.73, -1.4, f64::NEG_INFINITY], vec![0.112, 0.124, 0.162]);
    let sizes = vec![vec![300u64, 320, 280], vec![200, 210, 190], vec![50, 60, 40]];
    let a = gen_panel(&spec, &theta, &labels(&["BB", "B", "CCC"]), &sizes, 3).unwrap();
    let order = [2usize, 0, 1];
    let theta_p = theta.select(&order);
    let sizes_p: Vec<Vec<u64>> = order.iter().map(|&r| sizes[r].clone()).collect();
    let b = gen_panel(&spec, &theta_p, &labels(&["CCC", "BB", "B"]), &sizes_p, 3).unwrap();
    assert_eq!(a.permute_categories(&order).unwrap(), b);
    let rule = QuadratureRule::legendre(64).unwrap();
    let la = log_likelihood(&spec, &theta, &a, &rule).unwrap();
    let lb = log_likelihood(&spec, &theta_p, &b, &rule).unwrap();
    assert!((la - lb).abs() < 1e-9 * la.abs());
}

#[test]
fn nested_fits_are_consistent() {
    let truth = ParamVector::max_factor(vec![-1.2, -0.6], vec![-1.25, f64::NEG_INFINITY], vec![0.12, 0.15]);
    let full = ModelSpec::new(Family::MaxFactorGumbel, 2);
    let sizes = vec![vec![800u64; 25], vec![150u64; 25]];
    let panel = gen_panel(&full, &truth, &labels(&["B", "CCC"]), &sizes, 9).unwrap();
    let opts = FitOptions { nodes: 48, starts: 1, seed: 2, ..FitOptions::default() };
    let rule = QuadratureRule::legendre(48).unwrap();

    let sub = fit_mle(&ModelSpec::new(Family::OneFactorGumbel, 2), &panel, &opts).unwrap();
    let fit = fit_mle(&full, &panel, &opts).unwrap();
    for f in [&sub, &fit] {
        assert!(f.converged);
        assert_eq!(f.n_periods, 25);
        let ll = log_likelihood(&f.spec, &f.theta_hat, &panel, &rule).unwrap();
        assert!((ll - f.log_lik).abs() < 1e-8 * ll.abs());
        assert_eq!((f.aic, f.bic), information_criteria(f.log_lik, f.n_params, 25));
    }
    assert_eq!(sub.n_params, 4);
    assert_eq!(fit.n_params, 4 + fit.boundary.iter().filter(|b| !**b).count());
    assert!(fit.log_lik >= sub.log_lik - 1e-6);
    let lrt = boundary_lrt(sub.log_lik, fit.log_lik).unwrap();
    assert!(lrt.statistic >= 0.0 && (0.0..=0.5).contains(&lrt.p_value));
}
