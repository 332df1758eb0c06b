//! Exact marginal log-likelihood of a panel under each family, and a Monte
//! Carlo estimate of the per-year integrals used as an independent check.
//!
//! Every year contributes `log I_j`, the log of the expected conditional
//! binomial product with coefficients stripped. The integrals are taken after
//! the substitution `q = F(psi)`, using the graded form of the supplied
//! Gauss-Legendre rule (see [`QuadratureRule::graded`]).

use rand::Rng;
use rand_distr::{Distribution, Gumbel, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::factor_model::{Family, ModelSpec, ParamVector};
use crate::numerics::{self, DistTag, QuadratureRule};
use crate::panel::Panel;
use crate::streams::{self, Purpose};

/// Counts of one period.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct YearSlice {
    m: Vec<u64>,
    big_m: Vec<u64>,
}

impl YearSlice {
    pub fn new(m: Vec<u64>, big_m: Vec<u64>) -> Result<Self> {
        if m.len() != big_m.len() {
            return Err(Error::domain("exposure and loss vectors differ in length"));
        }
        if let Some(r) = (0..m.len()).find(|&r| big_m[r] > m[r]) {
            return Err(Error::domain(format!(
                "losses {} exceed exposures {} in category {r}",
                big_m[r], m[r]
            )));
        }
        Ok(YearSlice { m, big_m })
    }

    pub fn from_panel(panel: &Panel, j: usize) -> Self {
        YearSlice {
            m: (0..panel.k()).map(|r| panel.m(r, j)).collect(),
            big_m: (0..panel.k()).map(|r| panel.big_m(r, j)).collect(),
        }
    }

    pub fn k(&self) -> usize {
        self.m.len()
    }

    pub fn m(&self) -> &[u64] {
        &self.m
    }

    pub fn big_m(&self) -> &[u64] {
        &self.big_m
    }
}

/// Evaluation of the max-factor year integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MaxFactorForm {
    /// Sum over all subsets of categories whose specific factor dominates.
    Powerset,
    /// Per-node product over categories of the two regime contributions.
    #[default]
    Product,
}

/// How the inner integrals over `(g_r(q_0), 1)` are taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InnerScheme {
    /// Panels between the sorted lower limits and the rule's nodes, each with an
    /// 8-point rule, accumulated from the top. Cost is linear in the rule size.
    #[default]
    Composite,
    /// The rule itself mapped affinely onto each interval. Quadratic cost.
    Affine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LikelihoodOptions {
    pub form: MaxFactorForm,
    pub inner: InnerScheme,
}

/// Measure below which an inner interval is treated as empty.
const VANISHING: f64 = 1e-14;

/// `log[Q^hits (1 - Q)^misses]` as a function of the link argument.
#[derive(Debug, Clone, Copy)]
struct Kernel {
    dist: DistTag,
    hits: f64,
    misses: f64,
}

impl Kernel {
    fn new(dist: DistTag, m: u64, big_m: u64) -> Self {
        Kernel {
            dist,
            hits: big_m as f64,
            misses: (m - big_m) as f64,
        }
    }

    #[inline]
    fn eval(&self, x: f64) -> f64 {
        let mut v = 0.0;
        if self.hits > 0.0 {
            v += self.hits * numerics::log_cdf(self.dist, x);
        }
        if self.misses > 0.0 {
            v += self.misses * numerics::log_sf(self.dist, x);
        }
        v
    }

    /// Maximum of `eval` over the link argument and the probability `Q` at which
    /// it is attained.
    fn peak(&self) -> (f64, f64) {
        let n = self.hits + self.misses;
        let q = self.hits / n;
        let mut v = 0.0;
        if self.hits > 0.0 {
            v += self.hits * q.ln();
        }
        if self.misses > 0.0 {
            v += self.misses * (self.misses / n).ln();
        }
        (v, q)
    }
}

fn kernels(dist: DistTag, slice: &YearSlice) -> Vec<Kernel> {
    slice
        .m
        .iter()
        .zip(&slice.big_m)
        .map(|(&m, &b)| Kernel::new(dist, m, b))
        .collect()
}

fn check_max_factor(theta: &ParamVector, r: usize) -> Result<()> {
    if theta.nu.len() <= r || theta.sigma.len() <= r || theta.mu.len() <= r {
        return Err(Error::usage(format!(
            "category {r} has no max-factor parameters"
        )));
    }
    if !(theta.sigma[r] > 0.0) {
        return Err(Error::domain("sigma must be positive"));
    }
    Ok(())
}

/// Exponent `exp((nu - mu) / sigma)` of the regime boundary; 0 for an absent factor.
fn regime_exponent(theta: &ParamVector, r: usize) -> f64 {
    if theta.nu[r] == f64::NEG_INFINITY {
        0.0
    } else {
        ((theta.nu[r] - theta.mu[r]) / theta.sigma[r]).exp()
    }
}

/// Regime boundary `g_r(q) = q^c`, `c = exp((nu_r - mu_r) / sigma_r)`: the
/// specific factor dominates the global one exactly when `q_r > g_r(q_0)`.
/// An absent factor (`nu = -inf`) gives `g = 1` on (0,1], so the global regime
/// always wins; `g(0) = 0` by convention.
pub fn g_fn(theta: &ParamVector, r: usize, q: f64) -> Result<f64> {
    check_max_factor(theta, r)?;
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::domain(format!("q must lie in [0,1], got {q}")));
    }
    if q == 0.0 {
        return Ok(0.0);
    }
    Ok((regime_exponent(theta, r) * q.ln()).exp())
}

/// Log of `F(loc + sigma_r F^{-1}(q))^M (1 - F(.))^(m - M)` for category `r` of
/// `slice`, with the Gumbel `F`.
pub fn h_fn(theta: &ParamVector, r: usize, slice: &YearSlice, q: f64, location: f64) -> Result<f64> {
    if r >= slice.k() || r >= theta.sigma.len() {
        return Err(Error::domain(format!("category index {r} out of range")));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::domain(format!("q must lie strictly inside (0,1), got {q}")));
    }
    let kernel = Kernel::new(DistTag::Gumbel, slice.m[r], slice.big_m[r]);
    let psi = numerics::quantile_pair(DistTag::Gumbel, q, 1.0 - q);
    Ok(kernel.eval(location + theta.sigma[r] * psi))
}

fn check_slice(spec: &ModelSpec, theta: &ParamVector, slice: &YearSlice) -> Result<()> {
    theta.validate(spec)?;
    if slice.k() != spec.k {
        return Err(Error::usage(format!(
            "year slice has {} categories, model has {}",
            slice.k(),
            spec.k
        )));
    }
    Ok(())
}

/// `log I_j` for the one-factor families.
pub fn year_term_one_factor(spec: &ModelSpec, theta: &ParamVector, slice: &YearSlice, rule: &QuadratureRule) -> Result<f64> {
    if spec.family.is_two_factor() {
        return Err(Error::usage(format!("family {} is not a one-factor family", spec.family.code())));
    }
    check_slice(spec, theta, slice)?;
    Ok(one_factor_term(spec.family.dist(), theta, slice, rule.graded()))
}

fn one_factor_term(dist: DistTag, theta: &ParamVector, slice: &YearSlice, rule: &QuadratureRule) -> f64 {
    let z = rule.latent(dist);
    let mut acc = rule.log_weights().to_vec();
    for (r, ker) in kernels(dist, slice).iter().enumerate() {
        let (mu, sigma) = (theta.mu[r], theta.sigma[r]);
        for (a, &zi) in acc.iter_mut().zip(z) {
            *a += ker.eval(mu + sigma * zi);
        }
    }
    numerics::lse(&acc)
}

/// `log I_j` for the linear two-factor probit family, conditioning on the
/// global factor and integrating each category's factor separately.
pub fn year_term_linear_two_factor(spec: &ModelSpec, theta: &ParamVector, slice: &YearSlice, rule: &QuadratureRule) -> Result<f64> {
    if spec.family != Family::LinearTwoFactorProbit {
        return Err(Error::usage(format!("expected family 2a, got {}", spec.family.code())));
    }
    check_slice(spec, theta, slice)?;
    Ok(linear_term(theta, slice, rule.graded()))
}

fn linear_term(theta: &ParamVector, slice: &YearSlice, rule: &QuadratureRule) -> f64 {
    let z = rule.latent(DistTag::Normal);
    let lw = rule.log_weights();
    let n = z.len();
    let mut acc = lw.to_vec();
    let mut inner = vec![0.0; n];
    for (r, ker) in kernels(DistTag::Normal, slice).iter().enumerate() {
        let (mu, sigma, tau) = (theta.mu[r], theta.sigma[r], theta.tau[r]);
        for i in 0..n {
            let centre = mu + sigma * z[i];
            acc[i] += if tau == 0.0 {
                ker.eval(centre)
            } else {
                for l in 0..n {
                    inner[l] = lw[l] + ker.eval(centre + tau * z[l]);
                }
                numerics::lse(&inner)
            };
        }
    }
    numerics::lse(&acc)
}

/// `log I_j` for the max-factor family.
pub fn year_term_maxfactor(
    spec: &ModelSpec,
    theta: &ParamVector,
    slice: &YearSlice,
    rule: &QuadratureRule,
    form: MaxFactorForm,
) -> Result<f64> {
    year_term_maxfactor_with(spec, theta, slice, rule, form, InnerScheme::default())
}

pub fn year_term_maxfactor_with(
    spec: &ModelSpec,
    theta: &ParamVector,
    slice: &YearSlice,
    rule: &QuadratureRule,
    form: MaxFactorForm,
    inner: InnerScheme,
) -> Result<f64> {
    if spec.family != Family::MaxFactorGumbel {
        return Err(Error::usage(format!("expected family 2b, got {}", spec.family.code())));
    }
    check_slice(spec, theta, slice)?;
    Ok(max_factor_term(theta, slice, rule.graded(), form, inner))
}

/// Per outer node `i`: the global-regime term `log[g_r(q0_i) h(q0_i; mu_r)]`
/// and the specific-regime term `log int_{g_r(q0_i)}^1 h(q; nu_r) dq`.
fn max_factor_parts(
    theta: &ParamVector,
    r: usize,
    ker: &Kernel,
    rule: &QuadratureRule,
    inner: InnerScheme,
    margin: f64,
) -> (Vec<f64>, Vec<f64>) {
    let z = rule.latent(DistTag::Gumbel);
    let nodes = rule.nodes();
    let comps = rule.complements();
    let (mu, sigma, nu) = (theta.mu[r], theta.sigma[r], theta.nu[r]);
    let c = regime_exponent(theta, r);
    let n = nodes.len();
    let mut global = Vec::with_capacity(n);
    let mut lower = Vec::with_capacity(n);
    let mut lower_c = Vec::with_capacity(n);
    for i in 0..n {
        let log_q = if nodes[i] > 0.5 { (-comps[i]).ln_1p() } else { nodes[i].ln() };
        let log_g = c * log_q;
        global.push(log_g + ker.eval(mu + sigma * z[i]));
        lower.push(log_g.exp());
        lower_c.push(-log_g.exp_m1());
    }
    let specific = if c == 0.0 {
        vec![f64::NEG_INFINITY; n]
    } else {
        let f = |psi: f64| ker.eval(nu + sigma * psi);
        match inner {
            InnerScheme::Composite => {
                let prune = margin.is_finite().then(|| {
                    let (top, q_hat) = ker.peak();
                    let x_hat = numerics::quantile_pair(DistTag::Gumbel, q_hat, 1.0 - q_hat);
                    (numerics::cdf(DistTag::Gumbel, (x_hat - nu) / sigma), top - margin)
                });
                composite_tails(&lower, &lower_c, rule, f, prune)
            }
            InnerScheme::Affine => affine_tails(&lower, &lower_c, rule, f),
        }
    };
    (global, specific)
}

const PANEL_X: [f64; 8] = [
    0.019_855_071_751_231_856,
    0.101_666_761_293_186_63,
    0.237_233_795_041_835_5,
    0.408_282_678_752_175_1,
    0.591_717_321_247_824_9,
    0.762_766_204_958_164_5,
    0.898_333_238_706_813_4,
    0.980_144_928_248_768_2,
];
const PANEL_W: [f64; 8] = [
    0.050_614_268_145_188_13,
    0.111_190_517_226_687_24,
    0.156_853_322_938_943_64,
    0.181_341_891_689_180_99,
    0.181_341_891_689_180_99,
    0.156_853_322_938_943_64,
    0.111_190_517_226_687_24,
    0.050_614_268_145_188_13,
];

/// `log int_{a_i}^1 exp(f(F^{-1}(q))) dq` for increasing lower limits `a_i`
/// (with complements `ac_i`).
///
/// With `prune = Some((mode, floor))`, where `exp(f)` is unimodal with its peak at
/// `q = mode`, panels not containing the mode whose end values both lie below
/// `floor` are dropped; the absolute error is then at most `exp(floor)`.
fn composite_tails(
    a: &[f64],
    ac: &[f64],
    rule: &QuadratureRule,
    f: impl Fn(f64) -> f64,
    prune: Option<(f64, f64)>,
) -> Vec<f64> {
    // Merge the lower limits with the rule's nodes into sorted breakpoints.
    let nodes = rule.nodes();
    let comps = rule.complements();
    let mut bp: Vec<(f64, f64)> = Vec::with_capacity(a.len() + nodes.len() + 1);
    let mut owner = vec![0usize; a.len()];
    let (mut i, mut l) = (0, 0);
    while i < a.len() || l < nodes.len() {
        let take_a = l >= nodes.len() || (i < a.len() && a[i] <= nodes[l]);
        let (v, vc) = if take_a { (a[i], ac[i]) } else { (nodes[l], comps[l]) };
        if bp.last().is_none_or(|&(p, pc)| v > p && vc < pc) {
            bp.push((v, vc));
        }
        if take_a {
            owner[i] = bp.len() - 1;
            i += 1;
        } else {
            l += 1;
        }
    }
    bp.push((1.0, 0.0));

    let panels = bp.len() - 1;
    let at = |t: usize| f(numerics::quantile_pair(DistTag::Gumbel, bp[t].0, bp[t].1));
    // `f` rises up to the mode and falls after it, so the kept panels form one
    // run located by bisection on each side.
    let (keep_lo, keep_hi) = match prune {
        Some((mode, floor)) => {
            let peak = bp.partition_point(|&(q, _)| q < mode);
            let left = first_failing(0, peak, |t| at(t) < floor);
            let right = first_failing(peak, bp.len(), |t| at(t) >= floor);
            let lo = left.saturating_sub(1);
            let hi = right.max(peak).min(panels);
            (lo, hi)
        }
        None => (0, panels),
    };
    let log_w = PANEL_W.map(f64::ln);
    let mut suffix = vec![f64::NEG_INFINITY; bp.len()];
    let mut terms = [0.0f64; 8];
    for t in (0..panels).rev() {
        let (lo, lo_c) = bp[t];
        let (hi, hi_c) = bp[t + 1];
        let width = if lo > 0.5 { lo_c - hi_c } else { hi - lo };
        let negligible = t < keep_lo || t >= keep_hi;
        let panel = if width > 0.0 && !negligible {
            for (s, (&x, &lw)) in terms.iter_mut().zip(PANEL_X.iter().zip(&log_w)) {
                let q = lo + width * x;
                let qc = hi_c + width * (1.0 - x);
                *s = lw + f(numerics::quantile_pair(DistTag::Gumbel, q, qc));
            }
            width.ln() + numerics::lse(&terms)
        } else {
            f64::NEG_INFINITY
        };
        suffix[t] = numerics::log_add_exp(panel, suffix[t + 1]);
    }
    owner
        .iter()
        .zip(ac)
        .map(|(&o, &c)| if c < VANISHING { f64::NEG_INFINITY } else { suffix[o] })
        .collect()
}

/// First index in `lo..hi` where `pred` fails, for `pred` true on a prefix.
fn first_failing(mut lo: usize, mut hi: usize, pred: impl Fn(usize) -> bool) -> usize {
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if pred(mid) {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    lo
}

fn affine_tails(a: &[f64], ac: &[f64], rule: &QuadratureRule, f: impl Fn(f64) -> f64) -> Vec<f64> {
    let x = rule.nodes();
    let xc = rule.complements();
    let lw = rule.log_weights();
    let mut terms = vec![0.0; x.len()];
    a.iter()
        .zip(ac)
        .map(|(&lo, &lo_c)| {
            if lo_c < VANISHING {
                return f64::NEG_INFINITY;
            }
            for l in 0..x.len() {
                let q = lo + lo_c * x[l];
                let qc = lo_c * xc[l];
                terms[l] = lw[l] + f(numerics::quantile_pair(DistTag::Gumbel, q, qc));
            }
            lo_c.ln() + numerics::lse(&terms)
        })
        .collect()
}

/// First pruning margin (log units below each kernel's peak) for the inner integrals.
const PRUNE_MARGIN: f64 = 60.0;
/// Required log of the relative error bound left by pruning.
const PRUNE_TOLERANCE: f64 = -36.0;

fn max_factor_term(theta: &ParamVector, slice: &YearSlice, rule: &QuadratureRule, form: MaxFactorForm, inner: InnerScheme) -> f64 {
    let kers = kernels(DistTag::Gumbel, slice);
    let peaks: f64 = kers.iter().map(|k| k.peak().0).sum();
    let bound = |log_i: f64, margin: f64| (kers.len() as f64).ln() + peaks - margin - log_i;
    let first = max_factor_term_pruned(theta, &kers, rule, form, inner, PRUNE_MARGIN);
    // Each factor of the per-node product is at most exp(peak), so pruning at
    // `margin` perturbs the integral by at most k exp(sum of peaks - margin).
    if first.is_finite() && bound(first, PRUNE_MARGIN) < PRUNE_TOLERANCE {
        return first;
    }
    if !first.is_finite() {
        return max_factor_term_pruned(theta, &kers, rule, form, inner, f64::INFINITY);
    }
    let margin = peaks - first + (kers.len() as f64).ln() - PRUNE_TOLERANCE + 1.0;
    max_factor_term_pruned(theta, &kers, rule, form, inner, margin)
}

fn max_factor_term_pruned(
    theta: &ParamVector,
    kers: &[Kernel],
    rule: &QuadratureRule,
    form: MaxFactorForm,
    inner: InnerScheme,
    margin: f64,
) -> f64 {
    let parts: Vec<(Vec<f64>, Vec<f64>)> = kers
        .iter()
        .enumerate()
        .map(|(r, ker)| max_factor_parts(theta, r, ker, rule, inner, margin))
        .collect();
    let lw = rule.log_weights();
    let n = lw.len();
    match form {
        MaxFactorForm::Product => {
            let mut acc = lw.to_vec();
            for (global, specific) in &parts {
                for i in 0..n {
                    acc[i] += numerics::log_add_exp(global[i], specific[i]);
                }
            }
            numerics::lse(&acc)
        }
        MaxFactorForm::Powerset => {
            let k = parts.len();
            let mut subset_terms = Vec::with_capacity(1 << k);
            let mut acc = vec![0.0; n];
            for mask in 0u32..(1u32 << k) {
                acc.copy_from_slice(lw);
                for (r, (global, specific)) in parts.iter().enumerate() {
                    let src = if mask & (1 << r) != 0 { specific } else { global };
                    for i in 0..n {
                        acc[i] += src[i];
                    }
                }
                subset_terms.push(numerics::lse(&acc));
            }
            numerics::lse(&subset_terms)
        }
    }
}

/// Dispatches to the family's year term.
pub fn year_log_integral(
    spec: &ModelSpec,
    theta: &ParamVector,
    slice: &YearSlice,
    rule: &QuadratureRule,
    opts: &LikelihoodOptions,
) -> Result<f64> {
    check_slice(spec, theta, slice)?;
    Ok(year_term_unchecked(spec.family, theta, slice, rule.graded(), opts))
}

fn year_term_unchecked(family: Family, theta: &ParamVector, slice: &YearSlice, rule: &QuadratureRule, opts: &LikelihoodOptions) -> f64 {
    match family {
        Family::OneFactorProbit | Family::OneFactorGumbel => one_factor_term(family.dist(), theta, slice, rule),
        Family::LinearTwoFactorProbit => linear_term(theta, slice, rule),
        Family::MaxFactorGumbel => max_factor_term(theta, slice, rule, opts.form, opts.inner),
    }
}

/// Marginal log-likelihood: binomial coefficients plus `log I_j` summed in panel order.
pub fn log_likelihood(spec: &ModelSpec, theta: &ParamVector, panel: &Panel, rule: &QuadratureRule) -> Result<f64> {
    log_likelihood_with(spec, theta, panel, rule, &LikelihoodOptions::default())
}

pub fn log_likelihood_with(
    spec: &ModelSpec,
    theta: &ParamVector,
    panel: &Panel,
    rule: &QuadratureRule,
    opts: &LikelihoodOptions,
) -> Result<f64> {
    let terms = year_terms(spec, theta, panel, rule, opts)?;
    Ok(binomial_constant(panel) + terms.iter().sum::<f64>())
}

/// `log I_j` for every period, in panel order.
pub fn year_terms(
    spec: &ModelSpec,
    theta: &ParamVector,
    panel: &Panel,
    rule: &QuadratureRule,
    opts: &LikelihoodOptions,
) -> Result<Vec<f64>> {
    theta.validate(spec)?;
    if panel.k() != spec.k {
        return Err(Error::usage(format!(
            "panel has {} categories, model has {}",
            panel.k(),
            spec.k
        )));
    }
    let rule = rule.graded();
    // Fill the shared latent cache before fanning out.
    rule.latent(spec.family.dist());
    Ok((0..panel.n())
        .into_par_iter()
        .map(|j| year_term_unchecked(spec.family, theta, &YearSlice::from_panel(panel, j), rule, opts))
        .collect())
}

/// `sum_j sum_r log C(m_rj, M_rj)`.
pub fn binomial_constant(panel: &Panel) -> f64 {
    let mut total = 0.0;
    for j in 0..panel.n() {
        for r in 0..panel.k() {
            total += numerics::ln_choose(panel.m(r, j), panel.big_m(r, j));
        }
    }
    total
}

/// Monte Carlo estimate of one year's integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McYearTerm {
    /// `log` of the sample mean of the conditional binomial products, with the
    /// binomial coefficients stripped so it is comparable to the quadrature terms.
    pub log_i: f64,
    /// Delta-method standard error of `log_i`.
    pub se_log: f64,
}

/// Plain Monte Carlo estimate of every `log I_j`, one keyed stream per year.
pub fn mc_log_likelihood(spec: &ModelSpec, theta: &ParamVector, panel: &Panel, draws: usize, seed: u64) -> Result<Vec<McYearTerm>> {
    theta.validate(spec)?;
    if panel.k() != spec.k {
        return Err(Error::usage("panel and model differ in category count"));
    }
    if draws < 1000 {
        return Err(Error::config(format!("at least 1000 draws required, got {draws}")));
    }
    Ok((0..panel.n())
        .map(|j| mc_year(spec, theta, &YearSlice::from_panel(panel, j), draws, seed, j as u64))
        .collect())
}

/// Monte Carlo estimate for a single slice.
pub fn mc_year_term(spec: &ModelSpec, theta: &ParamVector, slice: &YearSlice, draws: usize, seed: u64) -> Result<McYearTerm> {
    check_slice(spec, theta, slice)?;
    if draws < 1000 {
        return Err(Error::config(format!("at least 1000 draws required, got {draws}")));
    }
    Ok(mc_year(spec, theta, slice, draws, seed, 0))
}

fn mc_year(spec: &ModelSpec, theta: &ParamVector, slice: &YearSlice, draws: usize, seed: u64, year: u64) -> McYearTerm {
    let mut rng = streams::stream(seed, Purpose::LikelihoodOracle, 0, year);
    let dist = spec.family.dist();
    let kers = kernels(dist, slice);
    let gumbel = Gumbel::new(0.0, 1.0).expect("standard Gumbel");
    let mut psi = vec![0.0; spec.latent_dim()];
    let mut logs = Vec::with_capacity(draws);
    for _ in 0..draws {
        for p in psi.iter_mut() {
            *p = match dist {
                DistTag::Gumbel => gumbel.sample(&mut rng),
                DistTag::Normal => rng.sample(StandardNormal),
            };
        }
        let mut l = 0.0;
        for (r, ker) in kers.iter().enumerate() {
            l += ker.eval(link_argument(spec.family, theta, r, &psi));
        }
        logs.push(l);
    }
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return McYearTerm {
            log_i: f64::NEG_INFINITY,
            se_log: f64::INFINITY,
        };
    }
    let d = draws as f64;
    let scaled: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let mean = scaled.iter().sum::<f64>() / d;
    let var = scaled.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (d - 1.0);
    McYearTerm {
        log_i: max + mean.ln(),
        se_log: (var / d).sqrt() / mean,
    }
}

/// Argument of the link function for category `r` at latent vector `psi`.
fn link_argument(family: Family, theta: &ParamVector, r: usize, psi: &[f64]) -> f64 {
    let (mu, sigma) = (theta.mu[r], theta.sigma[r]);
    match family {
        Family::OneFactorProbit | Family::OneFactorGumbel => mu + sigma * psi[0],
        Family::LinearTwoFactorProbit => mu + theta.tau[r] * psi[r + 1] + sigma * psi[0],
        Family::MaxFactorGumbel => (mu + sigma * psi[0]).max(theta.nu[r] + sigma * psi[r + 1]),
    }
}
