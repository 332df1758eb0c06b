//! The four factor-model families, their conditional loss probabilities and the
//! loss probabilities they imply.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::likelihood::{self, LikelihoodOptions, YearSlice};
use crate::numerics::{self, DistTag, QuadratureRule};

/// Model families. Latent dimension is 1 for the one-factor families and
/// `k + 1` for the two-factor ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    /// `Phi(mu + sigma psi)`, code `1a`.
    OneFactorProbit,
    /// `Phi(mu + tau psi_r + sigma psi_0)`, code `2a`.
    LinearTwoFactorProbit,
    /// `F(mu + sigma psi)` with Gumbel `F`, code `1b`.
    OneFactorGumbel,
    /// `F(max(nu + sigma psi_r, mu + sigma psi_0))`, code `2b`.
    MaxFactorGumbel,
}

impl Family {
    pub const ALL: [Family; 4] = [
        Family::OneFactorProbit,
        Family::LinearTwoFactorProbit,
        Family::OneFactorGumbel,
        Family::MaxFactorGumbel,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Family::OneFactorProbit => "1a",
            Family::LinearTwoFactorProbit => "2a",
            Family::OneFactorGumbel => "1b",
            Family::MaxFactorGumbel => "2b",
        }
    }

    pub fn from_code(code: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.code() == code)
            .ok_or_else(|| Error::config(format!("unknown model family {code:?} (expected 1a, 2a, 1b or 2b)")))
    }

    /// Law of the latent variables and of the link function.
    pub fn dist(self) -> DistTag {
        match self {
            Family::OneFactorProbit | Family::LinearTwoFactorProbit => DistTag::Normal,
            Family::OneFactorGumbel | Family::MaxFactorGumbel => DistTag::Gumbel,
        }
    }

    pub fn is_two_factor(self) -> bool {
        matches!(self, Family::LinearTwoFactorProbit | Family::MaxFactorGumbel)
    }

    /// One-factor family obtained when every category-specific factor is absent.
    pub fn reduced(self) -> Family {
        match self {
            Family::LinearTwoFactorProbit => Family::OneFactorProbit,
            Family::MaxFactorGumbel => Family::OneFactorGumbel,
            f => f,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelSpec {
    pub family: Family,
    pub k: usize,
}

impl ModelSpec {
    pub fn new(family: Family, k: usize) -> Self {
        ModelSpec { family, k }
    }

    pub fn latent_dim(&self) -> usize {
        if self.family.is_two_factor() {
            self.k + 1
        } else {
            1
        }
    }
}

/// Per-category parameters. `tau` is populated only for `2a` and `nu` only for
/// `2b`; `tau = 0` and `nu = -inf` mark an absent category-specific factor.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    pub tau: Vec<f64>,
    pub nu: Vec<f64>,
}

impl ParamVector {
    pub fn one_factor(mu: Vec<f64>, sigma: Vec<f64>) -> Self {
        ParamVector {
            mu,
            sigma,
            tau: Vec::new(),
            nu: Vec::new(),
        }
    }

    pub fn linear(mu: Vec<f64>, tau: Vec<f64>, sigma: Vec<f64>) -> Self {
        ParamVector {
            mu,
            sigma,
            tau,
            nu: Vec::new(),
        }
    }

    pub fn max_factor(mu: Vec<f64>, nu: Vec<f64>, sigma: Vec<f64>) -> Self {
        ParamVector {
            mu,
            sigma,
            tau: Vec::new(),
            nu,
        }
    }

    pub fn k(&self) -> usize {
        self.mu.len()
    }

    /// Checks the layout against `spec` and the parameter ranges.
    pub fn validate(&self, spec: &ModelSpec) -> Result<()> {
        let k = spec.k;
        if k == 0 {
            return Err(Error::usage("model needs at least one category"));
        }
        if self.mu.len() != k || self.sigma.len() != k {
            return Err(Error::usage(format!(
                "expected {k} location and scale parameters, got {} and {}",
                self.mu.len(),
                self.sigma.len()
            )));
        }
        let want_tau = if spec.family == Family::LinearTwoFactorProbit { k } else { 0 };
        let want_nu = if spec.family == Family::MaxFactorGumbel { k } else { 0 };
        if self.tau.len() != want_tau || self.nu.len() != want_nu {
            return Err(Error::usage(format!(
                "parameter layout does not match family {}",
                spec.family.code()
            )));
        }
        for r in 0..k {
            if !self.mu[r].is_finite() {
                return Err(Error::domain(format!("mu[{r}] must be finite")));
            }
            if !(self.sigma[r].is_finite() && self.sigma[r] > 0.0) {
                return Err(Error::domain(format!("sigma[{r}] must be positive and finite")));
            }
        }
        if self.tau.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(Error::domain("tau must be finite and nonnegative"));
        }
        if self.nu.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
            return Err(Error::domain("nu must lie in [-inf, +inf)"));
        }
        Ok(())
    }

    /// Whether category `r` has no specific factor (always true for one-factor families).
    pub fn factor_absent(&self, r: usize) -> bool {
        if !self.nu.is_empty() {
            self.nu[r] == f64::NEG_INFINITY
        } else if !self.tau.is_empty() {
            self.tau[r] == 0.0
        } else {
            true
        }
    }

    /// Number of free parameters: two per category plus one per present specific factor.
    pub fn free_count(&self) -> usize {
        let extra = if self.nu.is_empty() && self.tau.is_empty() {
            0
        } else {
            (0..self.k()).filter(|&r| !self.factor_absent(r)).count()
        };
        2 * self.k() + extra
    }

    /// Sub-vector with categories `idx` (repeats allowed).
    pub fn select(&self, idx: &[usize]) -> ParamVector {
        let pick = |v: &Vec<f64>| -> Vec<f64> {
            if v.is_empty() {
                Vec::new()
            } else {
                idx.iter().map(|&r| v[r]).collect()
            }
        };
        ParamVector {
            mu: pick(&self.mu),
            sigma: pick(&self.sigma),
            tau: pick(&self.tau),
            nu: pick(&self.nu),
        }
    }

    /// Same conditional probabilities under the reduced one-factor family,
    /// valid when every specific factor is absent.
    pub fn reduced(&self) -> ParamVector {
        ParamVector::one_factor(self.mu.clone(), self.sigma.clone())
    }
}

fn check_index(spec: &ModelSpec, r: usize) -> Result<()> {
    if r >= spec.k {
        return Err(Error::domain(format!("category index {r} out of range for k={}", spec.k)));
    }
    Ok(())
}

/// Conditional loss probability `Q_r(psi)`. `psi` has length 1 for one-factor
/// families and `(psi_0, psi_1, ..., psi_k)` for two-factor families.
pub fn conditional_loss_prob(spec: &ModelSpec, theta: &ParamVector, r: usize, psi: &[f64]) -> Result<f64> {
    theta.validate(spec)?;
    check_index(spec, r)?;
    if psi.len() != spec.latent_dim() {
        return Err(Error::domain(format!(
            "latent vector has length {}, expected {}",
            psi.len(),
            spec.latent_dim()
        )));
    }
    Ok(conditional_prob_unchecked(spec.family, theta, r, psi))
}

#[inline]
pub(crate) fn conditional_prob_unchecked(family: Family, theta: &ParamVector, r: usize, psi: &[f64]) -> f64 {
    let (mu, sigma) = (theta.mu[r], theta.sigma[r]);
    match family {
        Family::OneFactorProbit => numerics::normal_cdf(mu + sigma * psi[0]),
        Family::OneFactorGumbel => numerics::gumbel_cdf(mu + sigma * psi[0]),
        Family::LinearTwoFactorProbit => {
            numerics::normal_cdf(mu + theta.tau[r] * psi[r + 1] + sigma * psi[0])
        }
        Family::MaxFactorGumbel => {
            let global = mu + sigma * psi[0];
            let specific = theta.nu[r] + sigma * psi[r + 1];
            numerics::gumbel_cdf(global.max(specific))
        }
    }
}

/// Location of the Gumbel law of `max(nu + sigma Psi_r, mu + sigma Psi_0)`.
pub fn effective_gumbel_location(spec: &ModelSpec, theta: &ParamVector, r: usize) -> Result<f64> {
    if spec.family != Family::MaxFactorGumbel {
        return Err(Error::usage(format!(
            "effective location is defined for family 2b only, not {}",
            spec.family.code()
        )));
    }
    theta.validate(spec)?;
    check_index(spec, r)?;
    Ok(effective_location(theta.mu[r], theta.nu[r], theta.sigma[r]))
}

pub(crate) fn effective_location(mu: f64, nu: f64, sigma: f64) -> f64 {
    if nu == f64::NEG_INFINITY {
        return mu;
    }
    let (hi, lo) = if mu >= nu { (mu, nu) } else { (nu, mu) };
    hi + sigma * ((lo - hi) / sigma).exp().ln_1p()
}

/// One-category slice with `m` exposures and `m` losses, whose year integral is
/// `E[Q^m]`.
fn saturated_slice(counts: &[u64]) -> YearSlice {
    YearSlice::new(counts.to_vec(), counts.to_vec()).expect("saturated slice is valid")
}

fn moment(spec: &ModelSpec, theta: &ParamVector, cats: &[usize], counts: &[u64], rule: &QuadratureRule) -> Result<f64> {
    let sub_spec = ModelSpec::new(spec.family, cats.len());
    let sub = theta.select(cats);
    let slice = saturated_slice(counts);
    let log_i = likelihood::year_log_integral(&sub_spec, &sub, &slice, rule, &LikelihoodOptions::default())?;
    Ok(log_i.exp())
}

/// Marginal loss probability `pi_r = E[Q_r]`.
pub fn implied_pi_r(spec: &ModelSpec, theta: &ParamVector, r: usize, rule: &QuadratureRule) -> Result<f64> {
    theta.validate(spec)?;
    check_index(spec, r)?;
    match spec.family {
        Family::OneFactorProbit | Family::OneFactorGumbel => {
            Ok(one_factor_mean(spec.family.dist(), theta.mu[r], theta.sigma[r], rule))
        }
        Family::MaxFactorGumbel => {
            let loc = effective_location(theta.mu[r], theta.nu[r], theta.sigma[r]);
            Ok(one_factor_mean(DistTag::Gumbel, loc, theta.sigma[r], rule))
        }
        Family::LinearTwoFactorProbit => moment(spec, theta, &[r], &[1], rule),
    }
}

fn one_factor_mean(dist: DistTag, loc: f64, scale: f64, rule: &QuadratureRule) -> f64 {
    let rule = rule.graded();
    rule.latent(dist)
        .iter()
        .zip(rule.weights())
        .map(|(&z, &w)| w * numerics::cdf(dist, loc + scale * z))
        .sum()
}

/// Joint loss probability `pi_rs = E[Q_r Q_s]`; `r = s` gives `E[Q_r^2]`.
pub fn implied_pi_rs(spec: &ModelSpec, theta: &ParamVector, r: usize, s: usize, rule: &QuadratureRule) -> Result<f64> {
    theta.validate(spec)?;
    check_index(spec, r)?;
    check_index(spec, s)?;
    if r == s {
        moment(spec, theta, &[r], &[2], rule)
    } else {
        moment(spec, theta, &[r, s], &[1, 1], rule)
    }
}

/// `E[(E[Q_r | Psi_0])^2]`: the second moment two risks of category `r` would
/// have if each carried its own independent draw of the category-specific
/// factor. Coincides with `implied_pi_rs(r, r)` for one-factor families.
pub fn implied_pi_rr_split(spec: &ModelSpec, theta: &ParamVector, r: usize, rule: &QuadratureRule) -> Result<f64> {
    theta.validate(spec)?;
    check_index(spec, r)?;
    if spec.family.is_two_factor() {
        moment(spec, theta, &[r, r], &[1, 1], rule)
    } else {
        moment(spec, theta, &[r], &[2], rule)
    }
}

/// All marginal and joint implied probabilities.
pub fn implied_matrix(spec: &ModelSpec, theta: &ParamVector, rule: &QuadratureRule) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let k = spec.k;
    let pi = (0..k)
        .map(|r| implied_pi_r(spec, theta, r, rule))
        .collect::<Result<Vec<_>>>()?;
    let mut pi_rs = vec![vec![0.0; k]; k];
    for r in 0..k {
        for s in r..k {
            let v = implied_pi_rs(spec, theta, r, s, rule)?;
            pi_rs[r][s] = v;
            pi_rs[s][r] = v;
        }
    }
    Ok((pi, pi_rs))
}

/// `P[Q_r > t]`.
pub fn excess_probability(spec: &ModelSpec, theta: &ParamVector, r: usize, t: f64) -> Result<f64> {
    theta.validate(spec)?;
    check_index(spec, r)?;
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::domain(format!("threshold must lie in (0,1), got {t}")));
    }
    let dist = spec.family.dist();
    let head = numerics::quantile_pair(dist, t, 1.0 - t);
    let (loc, scale) = match spec.family {
        Family::OneFactorProbit | Family::OneFactorGumbel => (theta.mu[r], theta.sigma[r]),
        Family::LinearTwoFactorProbit => (theta.mu[r], theta.tau[r].hypot(theta.sigma[r])),
        Family::MaxFactorGumbel => (
            effective_location(theta.mu[r], theta.nu[r], theta.sigma[r]),
            theta.sigma[r],
        ),
    };
    Ok(numerics::sf(dist, (head - loc) / scale))
}

/// `P[loss in r | loss in s] / P[loss in r | no loss in s]`.
pub fn risk_ratio(pi_r: f64, pi_s: f64, pi_rs: f64) -> Result<f64> {
    if !(pi_s > 0.0 && pi_s < 1.0) {
        return Err(Error::domain(format!("pi_s must lie in (0,1), got {pi_s}")));
    }
    if !(pi_r > 0.0 && pi_r < 1.0) {
        return Err(Error::domain(format!("pi_r must lie in (0,1), got {pi_r}")));
    }
    if !(pi_rs >= 0.0) {
        return Err(Error::domain(format!("pi_rs must be nonnegative, got {pi_rs}")));
    }
    if pi_rs >= pi_r {
        return Err(Error::domain(format!(
            "joint probability {pi_rs} is not below the marginal {pi_r}"
        )));
    }
    Ok(pi_rs * (1.0 - pi_s) / ((pi_r - pi_rs) * pi_s))
}

/// A parameter file: model, category labels and values.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamFile {
    pub spec: ModelSpec,
    pub labels: Vec<String>,
    pub theta: ParamVector,
}

/// Parses `name=value` lines (`#` starts a comment) with keys `family`, `k`,
/// `mu.<label>`, `sigma.<label>` and `tau.<label>` / `nu.<label>`.
pub fn parse_param_file(text: &str) -> Result<ParamFile> {
    let mut family = None;
    let mut k = None;
    let mut labels: Vec<String> = Vec::new();
    let mut values: HashMap<(String, String), f64> = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i as u64 + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(line_no, "key", format!("expected name=value, got {line:?}")))?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "family" => family = Some(Family::from_code(value)?),
            "k" => {
                k = Some(value.parse::<usize>().map_err(|_| {
                    Error::parse(line_no, "k", format!("not a category count: {value:?}"))
                })?)
            }
            _ => {
                let (name, label) = key.split_once('.').ok_or_else(|| {
                    Error::parse(line_no, key, "unknown key")
                })?;
                if !matches!(name, "mu" | "sigma" | "tau" | "nu") || label.is_empty() {
                    return Err(Error::parse(line_no, key, "unknown key"));
                }
                let v = parse_real(value).ok_or_else(|| {
                    Error::parse(line_no, key, format!("not a number: {value:?}"))
                })?;
                if !labels.iter().any(|l| l == label) {
                    labels.push(label.to_string());
                }
                if values.insert((name.to_string(), label.to_string()), v).is_some() {
                    return Err(Error::parse(line_no, key, "duplicate key"));
                }
            }
        }
    }
    let family = family.ok_or_else(|| Error::config("parameter file lacks `family`"))?;
    let k = k.unwrap_or(labels.len());
    if k != labels.len() {
        return Err(Error::config(format!(
            "parameter file declares k={k} but names {} categories",
            labels.len()
        )));
    }
    let mut get = |name: &str| -> Result<Vec<f64>> {
        labels
            .iter()
            .map(|l| {
                values
                    .remove(&(name.to_string(), l.clone()))
                    .ok_or_else(|| Error::config(format!("missing `{name}.{l}`")))
            })
            .collect()
    };
    let mu = get("mu")?;
    let sigma = get("sigma")?;
    let theta = match family {
        Family::LinearTwoFactorProbit => ParamVector::linear(mu, get("tau")?, sigma),
        Family::MaxFactorGumbel => ParamVector::max_factor(mu, get("nu")?, sigma),
        _ => ParamVector::one_factor(mu, sigma),
    };
    if let Some(((name, label), _)) = values.into_iter().next() {
        return Err(Error::config(format!(
            "key `{name}.{label}` does not belong to family {}",
            family.code()
        )));
    }
    let spec = ModelSpec::new(family, k);
    theta.validate(&spec)?;
    Ok(ParamFile { spec, labels, theta })
}

fn parse_real(s: &str) -> Option<f64> {
    match s {
        "-inf" | "-Inf" | "-infinity" => Some(f64::NEG_INFINITY),
        _ => s.parse::<f64>().ok().filter(|v| v.is_finite()),
    }
}

/// Writes a parameter file; values use shortest round-trip formatting.
pub fn write_param_file(file: &ParamFile) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "family={}", file.spec.family.code());
    let _ = writeln!(out, "k={}", file.spec.k);
    let blocks: [(&str, &Vec<f64>); 4] = [
        ("mu", &file.theta.mu),
        ("sigma", &file.theta.sigma),
        ("tau", &file.theta.tau),
        ("nu", &file.theta.nu),
    ];
    for (name, vals) in blocks {
        for (label, v) in file.labels.iter().zip(vals.iter()) {
            let _ = writeln!(out, "{name}.{label}={}", fmt_real(*v));
        }
    }
    out
}

/// Shortest round-trip decimal form; `-inf` for an absent factor.
pub fn fmt_real(v: f64) -> String {
    if v == f64::NEG_INFINITY {
        "-inf".to_string()
    } else {
        format!("{v}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_class_gumbel() -> (ModelSpec, ParamVector) {
        (
            ModelSpec::new(Family::MaxFactorGumbel, 2),
            ParamVector::max_factor(vec![-1.15, -0.55], vec![-1.30, -1.00], vec![0.11, 0.15]),
        )
    }

    fn two_class_normal() -> (ModelSpec, ParamVector) {
        (
            ModelSpec::new(Family::LinearTwoFactorProbit, 2),
            ParamVector::linear(vec![-1.60, -0.85], vec![0.13, 0.16], vec![0.18, 0.28]),
        )
    }

    #[test]
    fn conditional_probabilities() {
        let spec = ModelSpec::new(Family::MaxFactorGumbel, 2);
        let th = ParamVector::max_factor(vec![0.0, 0.0], vec![0.0, 0.0], vec![1.0, 1.0]);
        let q = conditional_loss_prob(&spec, &th, 0, &[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(q, (-1.0f64).exp());
        let s1 = ModelSpec::new(Family::OneFactorProbit, 1);
        let t1 = ParamVector::one_factor(vec![0.0], vec![1.0]);
        assert!((conditional_loss_prob(&s1, &t1, 0, &[0.0]).unwrap() - 0.5).abs() < 1e-16);
        let s3 = ModelSpec::new(Family::MaxFactorGumbel, 1);
        let bb = ParamVector::max_factor(vec![-1.66], vec![-1.73], vec![0.112]);
        let q = conditional_loss_prob(&s3, &bb, 0, &[0.0, 0.0]).unwrap();
        assert_eq!(q, (-(1.66f64).exp()).exp());
        assert!(conditional_loss_prob(&s3, &bb, 0, &[0.0]).is_err());
    }

    #[test]
    fn effective_location_cases() {
        let spec = ModelSpec::new(Family::MaxFactorGumbel, 1);
        let th = ParamVector::max_factor(vec![0.4], vec![0.4], vec![0.3]);
        let loc = effective_gumbel_location(&spec, &th, 0).unwrap();
        assert!((loc - (0.4 + 0.3 * 2f64.ln())).abs() < 1e-15);
        let th = ParamVector::max_factor(vec![0.4], vec![f64::NEG_INFINITY], vec![0.3]);
        assert_eq!(effective_gumbel_location(&spec, &th, 0).unwrap(), 0.4);
        let s1 = ModelSpec::new(Family::OneFactorGumbel, 1);
        assert!(matches!(
            effective_gumbel_location(&s1, &ParamVector::one_factor(vec![0.0], vec![1.0]), 0),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn two_class_marginals() {
        let rule = QuadratureRule::legendre(128).unwrap();
        let (s, t) = two_class_gumbel();
        assert!((implied_pi_r(&s, &t, 0, &rule).unwrap() - 0.0585).abs() < 5e-4);
        assert!((implied_pi_r(&s, &t, 1, &rule).unwrap() - 0.2091).abs() < 5e-4);
        let (s, t) = two_class_normal();
        assert!((implied_pi_r(&s, &t, 0, &rule).unwrap() - 0.0591).abs() < 5e-4);
        assert!((implied_pi_r(&s, &t, 1, &rule).unwrap() - 0.2093).abs() < 5e-4);
    }

    #[test]
    fn normal_two_factor_marginal_closed_form() {
        // Phi(mu + tau Z1 + sigma Z0) has mean Phi(mu / sqrt(1 + tau^2 + sigma^2)).
        let rule = QuadratureRule::legendre(128).unwrap();
        let (s, t) = two_class_normal();
        for r in 0..2 {
            let exact = numerics::normal_cdf(t.mu[r] / (1.0 + t.tau[r].powi(2) + t.sigma[r].powi(2)).sqrt());
            assert!((implied_pi_r(&s, &t, r, &rule).unwrap() - exact).abs() < 1e-10);
        }
    }

    #[test]
    fn max_factor_marginal_two_routes() {
        let rule = QuadratureRule::legendre(256).unwrap();
        let (s, t) = two_class_gumbel();
        for r in 0..2 {
            let direct = implied_pi_r(&s, &t, r, &rule).unwrap();
            let nested = moment(&s, &t, &[r], &[1], &rule).unwrap();
            assert!((direct - nested).abs() < 1e-9, "{direct} {nested}");
        }
    }

    #[test]
    fn two_class_joint_normal() {
        let rule = QuadratureRule::legendre(128).unwrap();
        let (s, t) = two_class_normal();
        assert!((implied_pi_rs(&s, &t, 0, 1, &rule).unwrap() - 0.01401).abs() < 2e-5);
        assert!((implied_pi_rr_split(&s, &t, 1, &rule).unwrap() - 0.04980).abs() < 2e-4);
        assert!((implied_pi_rr_split(&s, &t, 0, &rule).unwrap() - 0.00394).abs() < 2e-5);
        let (s, t) = two_class_gumbel();
        assert!((implied_pi_rs(&s, &t, 0, 1, &rule).unwrap() - 0.01365).abs() < 2e-4);
    }

    #[test]
    fn degenerate_factors() {
        let rule = QuadratureRule::legendre(128).unwrap();
        let s = ModelSpec::new(Family::MaxFactorGumbel, 2);
        let t = ParamVector::max_factor(vec![-1.0, 0.2], vec![-0.5, -0.1], vec![1e-8, 1e-8]);
        let p0 = implied_pi_r(&s, &t, 0, &rule).unwrap();
        assert!((p0 - numerics::gumbel_cdf(-0.5)).abs() < 1e-6);
        let p1 = implied_pi_r(&s, &t, 1, &rule).unwrap();
        let p01 = implied_pi_rs(&s, &t, 0, 1, &rule).unwrap();
        assert!((p01 - p0 * p1).abs() < 1e-6);
    }

    #[test]
    fn excess_probability_cases() {
        let s = ModelSpec::new(Family::OneFactorGumbel, 1);
        let t = ParamVector::one_factor(vec![-0.7], vec![0.2]);
        let at = excess_probability(&s, &t, 0, numerics::gumbel_cdf(-0.7)).unwrap();
        assert!((at - (1.0 - (-1.0f64).exp())).abs() < 1e-12);
        assert!((excess_probability(&s, &t, 0, 1e-12).unwrap() - 1.0).abs() < 1e-9);
        assert!(excess_probability(&s, &t, 0, 1.0).is_err());
        let mut prev = 1.0;
        for i in 1..100 {
            let v = excess_probability(&s, &t, 0, i as f64 / 100.0).unwrap();
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn risk_ratio_cases() {
        assert!((risk_ratio(0.1, 0.2, 0.02).unwrap() - 1.0).abs() < 1e-15);
        let rr = risk_ratio(0.0107, 0.0511, 0.649e-3).unwrap();
        // hand arithmetic: 0.000649 * 0.9489 / (0.010051 * 0.0511)
        let oracle = 0.000649 * 0.9489 / (0.010051 * 0.0511);
        assert!((rr - oracle).abs() < 1e-12);
        assert!((rr - 1.199).abs() < 1e-3);
        assert!(risk_ratio(0.1, 0.2, 0.1).is_err());
        assert!(risk_ratio(0.1, 0.2, 0.1 - 1e-12).unwrap() > 1e9);
    }

    #[test]
    fn param_file_round_trip() {
        let file = ParamFile {
            spec: ModelSpec::new(Family::MaxFactorGumbel, 3),
            labels: vec!["BB".into(), "B".into(), "CCC".into()],
            theta: ParamVector::max_factor(
                vec![-1.66, -1.18, -0.54],
                vec![-1.73, f64::NEG_INFINITY, f64::NEG_INFINITY],
                vec![0.112, 0.124, 0.162],
            ),
        };
        let text = write_param_file(&file);
        assert!(text.contains("nu.B=-inf"));
        assert_eq!(parse_param_file(&text).unwrap(), file);
        let with_comments = format!("# fitted\n\n{text}# trailing\n");
        assert_eq!(parse_param_file(&with_comments).unwrap(), file);
        assert!(parse_param_file("family=1b\nmu.A=0\n").is_err());
        assert!(parse_param_file("family=1b\nmu.A=0\nsigma.A=1\nnu.A=0\n").is_err());
        assert!(parse_param_file("family=3c\n").is_err());
        assert!(parse_param_file("family=1b\nmu.A=0\nsigma.A=-1\n").is_err());
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn nesting_of_conditional_probabilities(
                mu in -3.0f64..1.0, sigma in 0.01f64..2.0, p0 in -4.0f64..4.0, pr in -4.0f64..4.0
            ) {
                let s2 = ModelSpec::new(Family::MaxFactorGumbel, 1);
                let t2 = ParamVector::max_factor(vec![mu], vec![f64::NEG_INFINITY], vec![sigma]);
                let s1 = ModelSpec::new(Family::OneFactorGumbel, 1);
                let a = conditional_loss_prob(&s2, &t2, 0, &[p0, pr]).unwrap();
                let b = conditional_loss_prob(&s1, &t2.reduced(), 0, &[p0]).unwrap();
                prop_assert_eq!(a, b);
                let sa = ModelSpec::new(Family::LinearTwoFactorProbit, 1);
                let ta = ParamVector::linear(vec![mu], vec![0.0], vec![sigma]);
                let sb = ModelSpec::new(Family::OneFactorProbit, 1);
                prop_assert_eq!(
                    conditional_loss_prob(&sa, &ta, 0, &[p0, pr]).unwrap(),
                    conditional_loss_prob(&sb, &ta.reduced(), 0, &[p0]).unwrap()
                );
            }

            #[test]
            fn conditional_monotone_in_latents(
                mu in -3.0f64..1.0, nu in -3.0f64..1.0, sigma in 0.01f64..2.0,
                p0 in -4.0f64..4.0, pr in -4.0f64..4.0, d in 0.0f64..1.0
            ) {
                let s = ModelSpec::new(Family::MaxFactorGumbel, 1);
                let t = ParamVector::max_factor(vec![mu], vec![nu], vec![sigma]);
                let base = conditional_loss_prob(&s, &t, 0, &[p0, pr]).unwrap();
                prop_assert!(conditional_loss_prob(&s, &t, 0, &[p0 + d, pr]).unwrap() >= base);
                prop_assert!(conditional_loss_prob(&s, &t, 0, &[p0, pr + d]).unwrap() >= base);
            }

            #[test]
            fn implied_monotone_in_locations(mu in -3.0f64..0.5, nu in -3.0f64..0.5, sigma in 0.05f64..1.0) {
                // Outside this band one regime's share is below double precision.
                prop_assume!((mu - nu).abs() < 10.0 * sigma);
                let rule = QuadratureRule::legendre(64).unwrap();
                let s = ModelSpec::new(Family::MaxFactorGumbel, 1);
                let p = |m: f64, n: f64| implied_pi_r(&s, &ParamVector::max_factor(vec![m], vec![n], vec![sigma]), 0, &rule).unwrap();
                let base = p(mu, nu);
                prop_assert!(p(mu + 0.05, nu) > base);
                prop_assert!(p(mu, nu + 0.05) > base);
            }

            #[test]
            fn joint_dominates_product(
                fam in 0usize..4, mu in proptest::array::uniform2(-2.5f64..0.0),
                sig in proptest::array::uniform2(0.05f64..0.8), ex in proptest::array::uniform2(-2.5f64..0.3)
            ) {
                let rule = QuadratureRule::legendre(64).unwrap();
                let family = Family::ALL[fam];
                let spec = ModelSpec::new(family, 2);
                let theta = match family {
                    Family::LinearTwoFactorProbit => ParamVector::linear(mu.to_vec(), vec![ex[0].abs(), ex[1].abs()], sig.to_vec()),
                    Family::MaxFactorGumbel => ParamVector::max_factor(mu.to_vec(), ex.to_vec(), sig.to_vec()),
                    _ => ParamVector::one_factor(mu.to_vec(), sig.to_vec()),
                };
                let a = implied_pi_r(&spec, &theta, 0, &rule).unwrap();
                let b = implied_pi_r(&spec, &theta, 1, &rule).unwrap();
                let ab = implied_pi_rs(&spec, &theta, 0, 1, &rule).unwrap();
                prop_assert!(ab >= a * b * (1.0 - 1e-9));
            }
        }
    }
}
