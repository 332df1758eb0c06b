//! Maximum-likelihood fitting: simplex search over an unconstrained
//! reparameterization, boundary reduction, Hessian standard errors and model
//! comparison.

use nalgebra::DMatrix;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::factor_model::{implied_pi_r, Family, ModelSpec, ParamVector};
use crate::likelihood::{log_likelihood_with, LikelihoodOptions};
use crate::nonparametric::{weighted_estimates, WeightedOptions};
use crate::numerics::QuadratureRule;
use crate::panel::Panel;
use crate::streams::{stream, Purpose};

/// A specific factor with `nu < mu - NU_FLOOR_SCALES * sigma` is treated as absent.
pub const NU_FLOOR_SCALES: f64 = 25.0;
/// A specific factor with `log tau` below this is treated as absent.
pub const LOG_TAU_FLOOR: f64 = -12.0;
/// Dropping a factor is accepted when it costs at most this much log-likelihood.
pub const BOUNDARY_PROBE_TOL: f64 = 1e-6;
/// Rejection threshold of the boundary likelihood-ratio test at the 5% level.
pub const LRT_CRITICAL: f64 = 1.9207;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub nodes: usize,
    pub max_iter: usize,
    /// Simplex diameter (max-norm, unconstrained coordinates) at which the search stops.
    pub tol: f64,
    pub starts: usize,
    pub seed: u64,
    /// Optional smaller rule for a first pass; the result seeds a final pass at `nodes`.
    pub coarse_nodes: Option<usize>,
    pub likelihood: LikelihoodOptions,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            nodes: 128,
            max_iter: 5000,
            tol: 1e-8,
            starts: 3,
            seed: 0,
            coarse_nodes: None,
            likelihood: LikelihoodOptions::default(),
        }
    }
}

/// Standard errors on the natural scale; `None` for boundary parameters or when
/// the Hessian is not positive definite.
#[derive(Debug, Clone, PartialEq)]
pub struct StdErrors {
    pub mu: Vec<Option<f64>>,
    pub sigma: Vec<Option<f64>>,
    pub tau: Vec<Option<f64>>,
    pub nu: Vec<Option<f64>>,
    pub positive_definite: bool,
}

impl StdErrors {
    fn absent(spec: &ModelSpec) -> Self {
        let k = spec.k;
        StdErrors {
            mu: vec![None; k],
            sigma: vec![None; k],
            tau: vec![None; if spec.family == Family::LinearTwoFactorProbit { k } else { 0 }],
            nu: vec![None; if spec.family == Family::MaxFactorGumbel { k } else { 0 }],
            positive_definite: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub spec: ModelSpec,
    pub theta_hat: ParamVector,
    pub std_errors: StdErrors,
    pub log_lik: f64,
    pub n_params: usize,
    pub n_periods: usize,
    pub aic: f64,
    pub bic: f64,
    pub converged: bool,
    /// Categories whose specific factor was dropped at the boundary.
    pub boundary: Vec<bool>,
    /// Categories without any observed loss.
    pub degenerate: Vec<bool>,
    pub iterations: usize,
    pub evaluations: usize,
    pub simplex_size: f64,
    pub nodes: usize,
}

/// `(aic, bic)` with `aic = 2p - 2 log L` and `bic = p log(n) - 2 log L`.
pub fn information_criteria(log_lik: f64, n_params: usize, n_periods: usize) -> (f64, f64) {
    let p = n_params as f64;
    (2.0 * p - 2.0 * log_lik, p * (n_periods as f64).ln() - 2.0 * log_lik)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrtResult {
    pub statistic: f64,
    /// Under the `1/2 chi2_0 + 1/2 chi2_1` null mixture.
    pub p_value: f64,
    pub reject_at_05: bool,
    pub critical_value: f64,
}

/// Likelihood-ratio test of one specific factor at its boundary.
pub fn boundary_lrt(log_lik_sub: f64, log_lik_full: f64) -> Result<LrtResult> {
    if !(log_lik_sub.is_finite() && log_lik_full.is_finite()) {
        return Err(Error::domain("log-likelihoods must be finite"));
    }
    if log_lik_full < log_lik_sub - 1e-8 {
        return Err(Error::usage(format!(
            "full model log-likelihood {log_lik_full} is below the submodel's {log_lik_sub}; models are not nested or misfit"
        )));
    }
    let statistic = (2.0 * (log_lik_full - log_lik_sub)).max(0.0);
    Ok(LrtResult {
        statistic,
        p_value: 0.5 * libm::erfc((statistic / 2.0).sqrt()),
        reject_at_05: statistic > LRT_CRITICAL,
        critical_value: LRT_CRITICAL,
    })
}

/// Coordinates: per category `mu`, `log sigma`, then `nu` or `log tau` when the
/// specific factor is present.
#[derive(Debug, Clone)]
struct Layout {
    spec: ModelSpec,
    present: Vec<bool>,
}

impl Layout {
    fn new(spec: ModelSpec, present: Vec<bool>) -> Self {
        Layout { spec, present }
    }

    fn has_extra(&self, r: usize) -> bool {
        self.spec.family.is_two_factor() && self.present[r]
    }

    fn dim(&self) -> usize {
        (0..self.spec.k).map(|r| 2 + self.has_extra(r) as usize).sum()
    }

    fn decode(&self, x: &[f64]) -> ParamVector {
        let k = self.spec.k;
        let mut mu = Vec::with_capacity(k);
        let mut sigma = Vec::with_capacity(k);
        let mut extra = Vec::with_capacity(k);
        let mut i = 0;
        for r in 0..k {
            mu.push(x[i]);
            sigma.push(x[i + 1].exp());
            i += 2;
            if self.has_extra(r) {
                extra.push(x[i]);
                i += 1;
            } else {
                extra.push(f64::NEG_INFINITY);
            }
        }
        match self.spec.family {
            Family::MaxFactorGumbel => ParamVector::max_factor(mu, extra, sigma),
            Family::LinearTwoFactorProbit => ParamVector::linear(mu, extra.iter().map(|e| e.exp()).collect(), sigma),
            _ => ParamVector::one_factor(mu, sigma),
        }
    }

    fn encode(&self, theta: &ParamVector) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.dim());
        for r in 0..self.spec.k {
            x.push(theta.mu[r]);
            x.push(theta.sigma[r].ln());
            if self.has_extra(r) {
                x.push(match self.spec.family {
                    Family::MaxFactorGumbel => theta.nu[r],
                    _ => theta.tau[r].ln(),
                });
            }
        }
        x
    }

    fn steps(&self) -> Vec<f64> {
        let mut s = Vec::with_capacity(self.dim());
        for r in 0..self.spec.k {
            s.extend([0.1, 0.2]);
            if self.has_extra(r) {
                s.push(if self.spec.family == Family::MaxFactorGumbel { 0.2 } else { 0.5 });
            }
        }
        s
    }

    /// Categories whose specific factor sits beyond its floor.
    fn below_floor(&self, theta: &ParamVector) -> Vec<usize> {
        (0..self.spec.k)
            .filter(|&r| self.has_extra(r))
            .filter(|&r| match self.spec.family {
                Family::MaxFactorGumbel => theta.nu[r] < theta.mu[r] - NU_FLOOR_SCALES * theta.sigma[r],
                _ => theta.tau[r].ln() < LOG_TAU_FLOOR,
            })
            .collect()
    }
}

/// Natural-scale parameters with the specific factors of `absent` removed.
fn drop_factors(spec: &ModelSpec, theta: &ParamVector, absent: &[bool]) -> ParamVector {
    let mut t = theta.clone();
    for (r, &a) in absent.iter().enumerate() {
        if a {
            match spec.family {
                Family::MaxFactorGumbel => t.nu[r] = f64::NEG_INFINITY,
                Family::LinearTwoFactorProbit => t.tau[r] = 0.0,
                _ => {}
            }
        }
    }
    t
}

#[derive(Debug, Clone)]
struct Simplex {
    x: Vec<f64>,
    f: f64,
    iterations: usize,
    evaluations: usize,
    diameter: f64,
    converged: bool,
}

/// Nelder-Mead with dimension-adaptive coefficients. Non-finite objective
/// values count as `+inf`.
fn nelder_mead(f: &dyn Fn(&[f64]) -> f64, x0: &[f64], steps: &[f64], tol: f64, max_iter: usize) -> Simplex {
    let n = x0.len();
    let nf = n as f64;
    let (alpha, beta, gamma, delta) = (1.0, 1.0 + 2.0 / nf, 0.75 - 0.5 / nf, 1.0 - 1.0 / nf);
    let mut evals = 0usize;
    let mut eval = |x: &[f64]| {
        evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut pts: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += steps[i];
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| eval(p)).collect();
    let diameter = |pts: &[Vec<f64>]| {
        pts[1..]
            .iter()
            .flat_map(|p| p.iter().zip(&pts[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max)
    };
    let mut iterations = 0;
    let mut converged = false;
    loop {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = order.iter().map(|&i| pts[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();
        if diameter(&pts) < tol {
            converged = true;
            break;
        }
        if iterations >= max_iter {
            break;
        }
        iterations += 1;
        let centroid: Vec<f64> = (0..n).map(|d| pts[..n].iter().map(|p| p[d]).sum::<f64>() / nf).collect();
        let along = |t: f64| -> Vec<f64> { centroid.iter().zip(&pts[n]).map(|(c, w)| c + t * (c - w)).collect() };
        let xr = along(alpha);
        let fr = eval(&xr);
        if fr < vals[0] {
            let xe = along(beta);
            let fe = eval(&xe);
            if fe < fr {
                pts[n] = xe;
                vals[n] = fe;
            } else {
                pts[n] = xr;
                vals[n] = fr;
            }
            continue;
        }
        if fr < vals[n - 1] {
            pts[n] = xr;
            vals[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < vals[n] {
            let xc = along(gamma);
            let fc = eval(&xc);
            (xc, fc)
        } else {
            let xc = along(-gamma);
            let fc = eval(&xc);
            (xc, fc)
        };
        if fc < fr.min(vals[n]) {
            pts[n] = xc;
            vals[n] = fc;
            continue;
        }
        for i in 1..=n {
            let p: Vec<f64> = pts[0].iter().zip(&pts[i]).map(|(b, q)| b + delta * (q - b)).collect();
            vals[i] = eval(&p);
            pts[i] = p;
        }
    }
    Simplex {
        x: pts[0].clone(),
        f: vals[0],
        iterations,
        evaluations: evals,
        diameter: diameter(&pts),
        converged,
    }
}

/// Curvature change used to size the finite-difference steps.
const HESSIAN_DELTA: f64 = 1e-2;

/// Central-difference Hessian of `f` at `x`. A first pass with fixed steps
/// estimates the diagonal; the second pass uses steps `h_i` for which
/// `h_i^2 |H_ii| / 2` is about `HESSIAN_DELTA`.
pub fn numerical_hessian(f: &dyn Fn(&[f64]) -> f64, x: &[f64]) -> DMatrix<f64> {
    let n = x.len();
    let f0 = f(x);
    let second = |i: usize, h: f64| {
        let mut p = x.to_vec();
        p[i] += h;
        let up = f(&p);
        p[i] = x[i] - h;
        let down = f(&p);
        (up - 2.0 * f0 + down) / (h * h)
    };
    let steps: Vec<f64> = (0..n)
        .map(|i| {
            let h0 = 1e-3 * x[i].abs().max(1.0);
            let c = second(i, h0).abs();
            if c.is_finite() && c > 0.0 {
                (2.0 * HESSIAN_DELTA / c).sqrt().clamp(1e-6, 0.5)
            } else {
                h0
            }
        })
        .collect();
    let mut hess = DMatrix::zeros(n, n);
    for i in 0..n {
        hess[(i, i)] = second(i, steps[i]);
        for j in 0..i {
            let mut p = x.to_vec();
            let mut corner = |si: f64, sj: f64| {
                p.copy_from_slice(x);
                p[i] += si * steps[i];
                p[j] += sj * steps[j];
                f(&p)
            };
            let v = (corner(1.0, 1.0) - corner(1.0, -1.0) - corner(-1.0, 1.0) + corner(-1.0, -1.0))
                / (4.0 * steps[i] * steps[j]);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    hess
}

/// Square roots of the diagonal of the inverse Hessian of a minimized
/// objective (`-log L`); `None` unless the Hessian is positive definite.
pub fn hessian_std_errors(f: &dyn Fn(&[f64]) -> f64, x: &[f64]) -> Option<Vec<f64>> {
    let hess = numerical_hessian(f, x);
    if hess.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let chol = hess.cholesky()?;
    let cov = chol.inverse();
    let se: Vec<f64> = (0..x.len()).map(|i| cov[(i, i)].sqrt()).collect();
    se.iter().all(|s| s.is_finite()).then_some(se)
}

/// Standard errors of `theta_hat` from the observed information. Absent
/// specific factors are boundary parameters and get no entry.
pub fn std_errors_from_hessian(
    spec: &ModelSpec,
    theta_hat: &ParamVector,
    panel: &Panel,
    rule: &QuadratureRule,
) -> Result<StdErrors> {
    std_errors_with(spec, theta_hat, panel, rule, &LikelihoodOptions::default())
}

fn std_errors_with(
    spec: &ModelSpec,
    theta_hat: &ParamVector,
    panel: &Panel,
    rule: &QuadratureRule,
    lopts: &LikelihoodOptions,
) -> Result<StdErrors> {
    theta_hat.validate(spec)?;
    check_panel(spec, panel)?;
    let present: Vec<bool> = (0..spec.k).map(|r| !theta_hat.factor_absent(r)).collect();
    let layout = Layout::new(*spec, present);
    let x = layout.encode(theta_hat);
    let objective = |x: &[f64]| -> f64 {
        log_likelihood_with(spec, &layout.decode(x), panel, rule, lopts).map_or(f64::INFINITY, |v| -v)
    };
    let mut out = StdErrors::absent(spec);
    let Some(se) = hessian_std_errors(&objective, &x) else {
        return Ok(out);
    };
    out.positive_definite = true;
    let mut i = 0;
    for r in 0..spec.k {
        out.mu[r] = Some(se[i]);
        out.sigma[r] = Some(theta_hat.sigma[r] * se[i + 1]);
        i += 2;
        if layout.has_extra(r) {
            match spec.family {
                Family::MaxFactorGumbel => out.nu[r] = Some(se[i]),
                _ => out.tau[r] = Some(theta_hat.tau[r] * se[i]),
            }
            i += 1;
        }
    }
    Ok(out)
}

fn check_panel(spec: &ModelSpec, panel: &Panel) -> Result<()> {
    if spec.k != panel.k() {
        return Err(Error::usage(format!(
            "model has {} categories, panel has {}",
            spec.k,
            panel.k()
        )));
    }
    Ok(())
}

/// Starting point: each `mu_r` solves `implied pi_r = target_r` with
/// `sigma_r = 0.1`, `nu_r = mu_r - 0.5` or `tau_r = 0.1`.
fn moment_start(spec: &ModelSpec, targets: &[f64], rule: &QuadratureRule) -> Result<ParamVector> {
    let one = ModelSpec::new(spec.family, 1);
    let build = |mu: f64| match spec.family {
        Family::MaxFactorGumbel => ParamVector::max_factor(vec![mu], vec![mu - 0.5], vec![0.1]),
        Family::LinearTwoFactorProbit => ParamVector::linear(vec![mu], vec![0.1], vec![0.1]),
        _ => ParamVector::one_factor(vec![mu], vec![0.1]),
    };
    let mut mu = Vec::with_capacity(spec.k);
    for &target in targets {
        let (mut lo, mut hi) = (-40.0, 40.0);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if implied_pi_r(&one, &build(mid), 0, rule)? < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        mu.push(0.5 * (lo + hi));
    }
    let sigma = vec![0.1; spec.k];
    Ok(match spec.family {
        Family::MaxFactorGumbel => ParamVector::max_factor(mu.clone(), mu.iter().map(|m| m - 0.5).collect(), sigma),
        Family::LinearTwoFactorProbit => ParamVector::linear(mu, vec![0.1; spec.k], sigma),
        _ => ParamVector::one_factor(mu, sigma),
    })
}

fn start_targets(panel: &Panel) -> Vec<f64> {
    let est = weighted_estimates(panel, &WeightedOptions::default());
    (0..panel.k())
        .map(|r| {
            let mut t = est.pi_r[r];
            if !(t > 0.0 && t.is_finite()) {
                let exposures: u64 = panel.exposures()[r].iter().sum();
                t = 0.5 / exposures as f64;
            }
            t.min(1.0 - 1e-6)
        })
        .collect()
}

/// Start `s > 0` perturbs the moment-matched point on its own keyed stream.
fn jitter(layout: &Layout, x: &[f64], seed: u64, s: usize) -> Vec<f64> {
    let mut rng = stream(seed, Purpose::Starts, s as u64, 0);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let scales = layout.steps();
    x.iter()
        .zip(&scales)
        .map(|(v, sc)| v + sc * normal.sample(&mut rng))
        .collect()
}

struct Search {
    theta: ParamVector,
    log_lik: f64,
    simplex: Simplex,
}

fn search(
    layout: &Layout,
    panel: &Panel,
    rule: &QuadratureRule,
    starts: &[Vec<f64>],
    opts: &FitOptions,
    step_scale: f64,
) -> Search {
    let objective = |x: &[f64]| -> f64 {
        log_likelihood_with(&layout.spec, &layout.decode(x), panel, rule, &opts.likelihood).map_or(f64::INFINITY, |v| -v)
    };
    let steps: Vec<f64> = layout.steps().iter().map(|s| s * step_scale).collect();
    let runs: Vec<Simplex> = starts
        .par_iter()
        .map(|x0| nelder_mead(&objective, x0, &steps, opts.tol, opts.max_iter))
        .collect();
    // Lowest objective; ties keep the earliest start.
    let mut best = 0;
    for (i, run) in runs.iter().enumerate() {
        if run.f < runs[best].f {
            best = i;
        }
    }
    let total_evals: usize = runs.iter().map(|r| r.evaluations).sum();
    let mut simplex = runs[best].clone();
    simplex.evaluations = total_evals;
    Search {
        theta: layout.decode(&simplex.x),
        log_lik: -simplex.f,
        simplex,
    }
}

#[derive(Default)]
struct Tally {
    iterations: usize,
    evaluations: usize,
}

impl Tally {
    fn run(&mut self, found: Search) -> Search {
        self.iterations += found.simplex.iterations;
        self.evaluations += found.simplex.evaluations;
        found
    }
}

/// Boundary reduction: drops specific factors past their floor or whose removal
/// costs nothing, then refits the remaining coordinates until no factor drops.
fn reduce(
    panel: &Panel,
    rule: &QuadratureRule,
    opts: &FitOptions,
    layout: &mut Layout,
    found: &mut Search,
    tally: &mut Tally,
) -> Result<()> {
    let spec = layout.spec;
    loop {
        let mut absent: Vec<bool> = layout.present.iter().map(|p| !p).collect();
        for r in layout.below_floor(&found.theta) {
            absent[r] = true;
        }
        for r in 0..spec.k {
            if absent[r] {
                continue;
            }
            let mut trial = absent.clone();
            trial[r] = true;
            let reduced = drop_factors(&spec, &found.theta, &trial);
            let ll = log_likelihood_with(&spec, &reduced, panel, rule, &opts.likelihood)?;
            if ll >= found.log_lik - BOUNDARY_PROBE_TOL {
                absent[r] = true;
            }
        }
        let present: Vec<bool> = absent.iter().map(|a| !a).collect();
        if present == layout.present {
            return Ok(());
        }
        let start_theta = drop_factors(&spec, &found.theta, &absent);
        *layout = Layout::new(spec, present);
        let x = layout.encode(&start_theta);
        *found = tally.run(search(layout, panel, rule, &[x], opts, 0.5));
    }
}

/// Fits `spec` to `panel` by maximum likelihood.
pub fn fit_mle(spec: &ModelSpec, panel: &Panel, opts: &FitOptions) -> Result<FitResult> {
    check_panel(spec, panel)?;
    if opts.starts == 0 {
        return Err(Error::config("starts must be at least 1"));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::config("tolerance must be positive"));
    }
    let rule = QuadratureRule::legendre(opts.nodes)?;
    let coarse = match opts.coarse_nodes {
        Some(c) if c < opts.nodes => Some(QuadratureRule::legendre(c)?),
        _ => None,
    };
    let first_rule = coarse.as_ref().unwrap_or(&rule);

    let base = moment_start(spec, &start_targets(panel), first_rule)?;
    let mut layout = Layout::new(*spec, vec![spec.family.is_two_factor(); spec.k]);
    let x0 = layout.encode(&base);
    let mut starts = vec![x0.clone()];
    for s in 1..opts.starts {
        starts.push(jitter(&layout, &x0, opts.seed, s));
    }

    let mut tally = Tally::default();
    let mut found = tally.run(search(&layout, panel, first_rule, &starts, opts, 1.0));
    if spec.family.is_two_factor() {
        reduce(panel, first_rule, opts, &mut layout, &mut found, &mut tally)?;
    }
    if coarse.is_some() {
        let x = layout.encode(&found.theta);
        found = tally.run(search(&layout, panel, &rule, &[x], opts, 0.1));
        if spec.family.is_two_factor() {
            reduce(panel, &rule, opts, &mut layout, &mut found, &mut tally)?;
        }
    }
    let (mut iterations, mut evaluations) = (tally.iterations, tally.evaluations);

    if spec.family.is_two_factor() {
        // Nesting: the one-factor fit is a point of the two-factor space.
        let reduced_spec = ModelSpec::new(spec.family.reduced(), spec.k);
        let one = fit_mle(
            &reduced_spec,
            panel,
            &FitOptions {
                starts: 1,
                ..*opts
            },
        )?;
        iterations += one.iterations;
        evaluations += one.evaluations;
        if one.log_lik > found.log_lik {
            layout = Layout::new(*spec, vec![false; spec.k]);
            let theta = drop_factors(
                spec,
                &match spec.family {
                    Family::MaxFactorGumbel => ParamVector::max_factor(one.theta_hat.mu.clone(), vec![0.0; spec.k], one.theta_hat.sigma.clone()),
                    _ => ParamVector::linear(one.theta_hat.mu.clone(), vec![1.0; spec.k], one.theta_hat.sigma.clone()),
                },
                &[true].repeat(spec.k),
            );
            found = Search {
                theta,
                log_lik: one.log_lik,
                simplex: Simplex {
                    x: Vec::new(),
                    f: -one.log_lik,
                    iterations: 0,
                    evaluations: 0,
                    diameter: one.simplex_size,
                    converged: one.converged,
                },
            };
        }
    }

    let theta_hat = found.theta;
    let std_errors = std_errors_with(spec, &theta_hat, panel, &rule, &opts.likelihood)?;
    let n_params = theta_hat.free_count();
    let (aic, bic) = information_criteria(found.log_lik, n_params, panel.n());
    Ok(FitResult {
        spec: *spec,
        boundary: (0..spec.k)
            .map(|r| spec.family.is_two_factor() && !layout.present[r])
            .collect(),
        degenerate: (0..spec.k).map(|r| panel.losses()[r].iter().all(|&b| b == 0)).collect(),
        theta_hat,
        std_errors,
        log_lik: found.log_lik,
        n_params,
        n_periods: panel.n(),
        aic,
        bic,
        converged: found.simplex.converged,
        iterations,
        evaluations,
        simplex_size: found.simplex.diameter,
        nodes: opts.nodes,
    })
}
