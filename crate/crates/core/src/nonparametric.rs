//! Moment estimators of marginal, joint and higher-order loss probabilities.
//!
//! Preliminary estimators average falling-factorial ratios over periods and are
//! unbiased. The weighted estimators reweight periods by inverse plug-in
//! variances, shrinking toward zero to minimize mean squared error.

use crate::error::{Error, Result};
use crate::panel::Panel;

/// `x (x - 1) ... (x - l + 1)` as a float.
fn falling(x: u64, l: u32) -> f64 {
    (0..l as u64).fold(1.0, |acc, i| if x < i { 0.0 } else { acc * (x - i) as f64 })
}

/// Falling-factorial ratio `M^(l) / m^(l)`; `None` when `m < l`.
fn ff_ratio(big_m: u64, m: u64, l: u32) -> Option<f64> {
    if m < l as u64 {
        return None;
    }
    Some(if l == 0 { 1.0 } else { falling(big_m, l) / falling(m, l) })
}

fn check_category(panel: &Panel, r: usize) -> Result<()> {
    if r >= panel.k() {
        return Err(Error::domain(format!("category index {r} out of range")));
    }
    Ok(())
}

fn check_order(panel: &Panel, r: usize, l: u32) -> Result<()> {
    let min_m = panel.exposures()[r].iter().copied().min().unwrap_or(0);
    if l as u64 >= min_m {
        return Err(Error::domain(format!(
            "order {l} requires more than {l} exposures in every period; category {} has {min_m}",
            panel.categories()[r]
        )));
    }
    Ok(())
}

/// `(1/n) sum_j M^(l) / m^(l)`, unbiased for `E[Q_r^l]`.
pub fn prelim_intra(panel: &Panel, r: usize, l: u32) -> Result<f64> {
    check_category(panel, r)?;
    check_order(panel, r, l)?;
    Ok(intra_values(panel, r, l).iter().sum::<f64>() / panel.n() as f64)
}

fn intra_values(panel: &Panel, r: usize, l: u32) -> Vec<f64> {
    (0..panel.n())
        .map(|j| ff_ratio(panel.big_m(r, j), panel.m(r, j), l).unwrap_or(f64::NAN))
        .collect()
}

fn inter_values(panel: &Panel, r: usize, s: usize, l1: u32, l2: u32) -> Vec<f64> {
    (0..panel.n())
        .map(|j| {
            match (
                ff_ratio(panel.big_m(r, j), panel.m(r, j), l1),
                ff_ratio(panel.big_m(s, j), panel.m(s, j), l2),
            ) {
                (Some(a), Some(b)) => a * b,
                _ => f64::NAN,
            }
        })
        .collect()
}

/// `(1/n) sum_j [M_r^(l1) / m_r^(l1)] [M_s^(l2) / m_s^(l2)]`, unbiased for
/// `E[Q_r^l1 Q_s^l2]`.
pub fn prelim_inter(panel: &Panel, r: usize, s: usize, l1: u32, l2: u32) -> Result<f64> {
    check_category(panel, r)?;
    check_category(panel, s)?;
    if r == s {
        return Err(Error::usage("prelim_inter needs two distinct categories; use prelim_intra"));
    }
    check_order(panel, r, l1)?;
    check_order(panel, s, l2)?;
    Ok(inter_values(panel, r, s, l1, l2).iter().sum::<f64>() / panel.n() as f64)
}

/// `(1/n) sum_j (M / m)^l`: biased upward for `l > 1` but keeps the plug-in
/// variances positive.
pub fn fallback_intra(panel: &Panel, r: usize, l: u32) -> Result<f64> {
    check_category(panel, r)?;
    Ok(fallback_values(panel, r, l).iter().sum::<f64>() / panel.n() as f64)
}

fn fallback_values(panel: &Panel, r: usize, l: u32) -> Vec<f64> {
    (0..panel.n())
        .map(|j| (panel.big_m(r, j) as f64 / panel.m(r, j) as f64).powi(l as i32))
        .collect()
}

/// `(1/n) sum_j (M_r / m_r)^l1 (M_s / m_s)^l2`.
pub fn fallback_inter(panel: &Panel, r: usize, s: usize, l1: u32, l2: u32) -> Result<f64> {
    check_category(panel, r)?;
    check_category(panel, s)?;
    let a = fallback_values(panel, r, l1);
    let b = fallback_values(panel, s, l2);
    Ok(a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>() / panel.n() as f64)
}

/// Options of [`weighted_estimates`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WeightedOptions {
    /// Scale the variance of `M(M-1)/(m(m-1))` as `Var[M(M-1)] / (m(m-1))^2` and
    /// use `(m_r - 1)(m_s - 1)` as the coefficient of `E[Q_r^2 Q_s^2]`. When
    /// false the uncorrected forms `m(m-1) Var[M(M-1)]`-bracket and
    /// `1 - m_s - m_r + m_r m_s pi^(2,2)` are used instead.
    pub corrected_scaling: bool,
    /// Shrink each joint estimator toward zero with its own target in the weight
    /// denominator (`pi_rr^-2`, `pi_rs^-2`) instead of `pi_r^-2`.
    pub target_denominators: bool,
}

impl Default for WeightedOptions {
    fn default() -> Self {
        WeightedOptions {
            corrected_scaling: true,
            target_denominators: false,
        }
    }
}

/// How a set of estimates was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimateMethod {
    Preliminary,
    Weighted,
    ModelImplied,
}

impl EstimateMethod {
    pub fn name(self) -> &'static str {
        match self {
            EstimateMethod::Preliminary => "preliminary",
            EstimateMethod::Weighted => "weighted",
            EstimateMethod::ModelImplied => "model-implied",
        }
    }
}

/// Marginal and joint loss probabilities with standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct LossProbEstimates {
    pub method: EstimateMethod,
    pub labels: Vec<String>,
    pub pi_r: Vec<f64>,
    /// Symmetric; the diagonal holds `pi_rr = E[Q_r^2]`.
    pub pi_rs: Vec<Vec<f64>>,
    pub se_pi_r: Vec<Option<f64>>,
    pub se_pi_rs: Vec<Vec<Option<f64>>>,
    /// Preliminary `E[Q_r^l]` for `l = 1..=4` (NaN where the order exceeds the exposures).
    pub pi_r_l: Vec<[f64; 4]>,
    /// Preliminary `E[Q_r^l1 Q_s^l2]` for `(l1, l2)` in `{1,2}^2`, indexed `[r][s][l1-1][l2-1]`.
    pub pi_rs_l1l2: Vec<Vec<[[f64; 2]; 2]>>,
    /// Categories whose plug-in variances needed the `(M/m)^l` preliminaries.
    pub fallback: Vec<bool>,
    /// Category pairs (diagonal: `pi_rr`) whose weighted estimator could not be
    /// formed and were reported as preliminary estimates.
    pub degraded: Vec<Vec<bool>>,
    /// Categories without any observed loss.
    pub degenerate: Vec<bool>,
    /// Joint estimates under the alternative weight denominators, if computed.
    pub alternative_pi_rs: Option<Vec<Vec<f64>>>,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn empirical_se(v: &[f64]) -> Option<f64> {
    let n = v.len();
    if n < 2 || v.iter().any(|x| x.is_nan()) {
        return None;
    }
    let m = mean(v);
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    Some((var / n as f64).sqrt())
}

fn prelim_table(panel: &Panel) -> (Vec<[f64; 4]>, Vec<Vec<[[f64; 2]; 2]>>) {
    let k = panel.k();
    let intra: Vec<[f64; 4]> = (0..k)
        .map(|r| {
            let mut o = [f64::NAN; 4];
            for l in 1..=4u32 {
                o[l as usize - 1] = mean(&intra_values(panel, r, l));
            }
            o
        })
        .collect();
    let mut inter = vec![vec![[[f64::NAN; 2]; 2]; k]; k];
    for r in 0..k {
        for s in 0..k {
            if r == s {
                continue;
            }
            for l1 in 1..=2u32 {
                for l2 in 1..=2u32 {
                    inter[r][s][l1 as usize - 1][l2 as usize - 1] = mean(&inter_values(panel, r, s, l1, l2));
                }
            }
        }
    }
    (intra, inter)
}

/// Preliminary estimates with empirical standard errors across periods.
pub fn preliminary_estimates(panel: &Panel) -> LossProbEstimates {
    let k = panel.k();
    let (intra, inter) = prelim_table(panel);
    let mut pi_rs = vec![vec![0.0; k]; k];
    let mut se_pi_rs = vec![vec![None; k]; k];
    for r in 0..k {
        let v = intra_values(panel, r, 2);
        pi_rs[r][r] = mean(&v);
        se_pi_rs[r][r] = empirical_se(&v);
        for s in (r + 1)..k {
            let v = inter_values(panel, r, s, 1, 1);
            let (m, se) = (mean(&v), empirical_se(&v));
            pi_rs[r][s] = m;
            pi_rs[s][r] = m;
            se_pi_rs[r][s] = se;
            se_pi_rs[s][r] = se;
        }
    }
    LossProbEstimates {
        method: EstimateMethod::Preliminary,
        labels: panel.categories().to_vec(),
        pi_r: intra.iter().map(|o| o[0]).collect(),
        pi_rs,
        se_pi_r: (0..k).map(|r| empirical_se(&intra_values(panel, r, 1))).collect(),
        se_pi_rs,
        pi_r_l: intra,
        pi_rs_l1l2: inter,
        fallback: vec![false; k],
        degraded: vec![vec![false; k]; k],
        degenerate: (0..k).map(|r| panel.losses()[r].iter().all(|&b| b == 0)).collect(),
        alternative_pi_rs: None,
    }
}

/// `Var[M/m]` for `m` exposures.
fn var_rate(m: f64, p1: f64, p2: f64) -> f64 {
    p1 / m + (1.0 - 1.0 / m) * p2 - p1 * p1
}

/// Variance of `M(M-1)/(m(m-1))` (or the printed scaling of it).
fn var_pair_rate(m: f64, p2: f64, p3: f64, p4: f64, corrected: bool) -> f64 {
    let f2 = m * (m - 1.0);
    let bracket = (2.0 - f2 * p2) * p2 + 4.0 * (m - 2.0) * p3 + (m - 2.0) * (m - 3.0) * p4;
    if corrected {
        bracket / f2
    } else {
        f2 * bracket
    }
}

/// Variance of `M_r M_s / (m_r m_s)` (or the printed form of it).
#[allow(clippy::too_many_arguments)]
fn var_cross_rate(mr: f64, ms: f64, p11: f64, p12: f64, p21: f64, p22: f64, corrected: bool) -> f64 {
    let last = if corrected {
        (mr - 1.0) * (ms - 1.0) * p22
    } else {
        1.0 - ms - mr + mr * ms * p22
    };
    ((1.0 - mr * ms * p11) * p11 + (ms - 1.0) * p12 + (mr - 1.0) * p21 + last) / (mr * ms)
}

/// Inverse-variance shrinkage: returns `(estimate, se, weights)`, or `None`
/// if some variance is not positive.
fn shrink(values: &[f64], vars: &[f64], target: f64) -> Option<(f64, f64, Vec<f64>)> {
    if vars.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return None;
    }
    let prec: Vec<f64> = vars.iter().map(|v| 1.0 / v).collect();
    let total: f64 = prec.iter().sum();
    let denom = target.powi(-2) + total;
    let weights: Vec<f64> = prec.iter().map(|p| p / denom).collect();
    let est = weights.iter().zip(values).map(|(w, x)| w * x).sum();
    Some((est, total.powf(-0.5), weights))
}

/// Per-category inputs of the plug-in variances.
struct Plugins {
    orders: [f64; 4],
    used_fallback: bool,
}

fn category_plugins(panel: &Panel, r: usize, intra: &[f64; 4], corrected: bool) -> Plugins {
    let ms: Vec<f64> = panel.exposures()[r].iter().map(|&m| m as f64).collect();
    let ok = |o: &[f64; 4]| {
        o.iter().all(|x| x.is_finite())
            && ms.iter().all(|&m| var_rate(m, o[0], o[1]) > 0.0)
            && ms.iter().filter(|&&m| m >= 2.0).all(|&m| var_pair_rate(m, o[1], o[2], o[3], corrected) > 0.0)
    };
    if ok(intra) {
        return Plugins {
            orders: *intra,
            used_fallback: false,
        };
    }
    let mut orders = [0.0; 4];
    for l in 1..=4u32 {
        orders[l as usize - 1] = mean(&fallback_values(panel, r, l));
    }
    Plugins {
        orders,
        used_fallback: true,
    }
}

/// Minimum-MSE weighted estimators of `pi_r`, `pi_rr` and `pi_rs`.
pub fn weighted_estimates(panel: &Panel, opts: &WeightedOptions) -> LossProbEstimates {
    let k = panel.k();
    let mut est = preliminary_estimates(panel);
    est.method = EstimateMethod::Weighted;
    let intra = est.pi_r_l.clone();
    let plugins: Vec<Plugins> = (0..k)
        .map(|r| category_plugins(panel, r, &intra[r], opts.corrected_scaling))
        .collect();
    let prelim_pi = est.pi_r.clone();
    let mut alt = vec![vec![0.0; k]; k];

    for r in 0..k {
        est.fallback[r] = plugins[r].used_fallback;
        let o = plugins[r].orders;
        if est.degenerate[r] {
            est.pi_r[r] = 0.0;
            est.se_pi_r[r] = Some(0.0);
            est.pi_rs[r][r] = 0.0;
            est.se_pi_rs[r][r] = Some(0.0);
            alt[r][r] = 0.0;
            continue;
        }
        let ms: Vec<f64> = panel.exposures()[r].iter().map(|&m| m as f64).collect();
        let rates = intra_values(panel, r, 1);
        let vars: Vec<f64> = ms.iter().map(|&m| var_rate(m, o[0], o[1])).collect();
        match shrink(&rates, &vars, prelim_pi[r]) {
            Some((v, se, _)) => {
                est.pi_r[r] = v;
                est.se_pi_r[r] = Some(se);
            }
            None => est.degraded[r][r] = true,
        }

        // Pair ratios exist only for periods with at least two exposures.
        let idx: Vec<usize> = (0..panel.n()).filter(|&j| ms[j] >= 2.0).collect();
        let pair: Vec<f64> = idx
            .iter()
            .map(|&j| ff_ratio(panel.big_m(r, j), panel.m(r, j), 2).unwrap_or(0.0))
            .collect();
        let pvars: Vec<f64> = idx
            .iter()
            .map(|&j| var_pair_rate(ms[j], o[1], o[2], o[3], opts.corrected_scaling))
            .collect();
        let lower = shrink(&pair, &pvars, prelim_pi[r]);
        let own = shrink(&pair, &pvars, o[1]);
        let chosen = if opts.target_denominators { &own } else { &lower };
        match chosen {
            Some((v, se, _)) if !idx.is_empty() => {
                est.pi_rs[r][r] = *v;
                est.se_pi_rs[r][r] = Some(*se);
            }
            _ => est.degraded[r][r] = true,
        }
        let other = if opts.target_denominators { &lower } else { &own };
        alt[r][r] = other.as_ref().map_or(est.pi_rs[r][r], |x| x.0);
    }

    for r in 0..k {
        for s in (r + 1)..k {
            if est.degenerate[r] || est.degenerate[s] {
                for (a, b) in [(r, s), (s, r)] {
                    est.pi_rs[a][b] = 0.0;
                    est.se_pi_rs[a][b] = Some(0.0);
                    alt[a][b] = 0.0;
                }
                continue;
            }
            let (mr, ms): (Vec<f64>, Vec<f64>) = (0..panel.n())
                .map(|j| (panel.m(r, j) as f64, panel.m(s, j) as f64))
                .unzip();
            let values = inter_values(panel, r, s, 1, 1);
            let pre = est.pi_rs_l1l2[r][s];
            let plug = |p: [[f64; 2]; 2]| -> Vec<f64> {
                (0..panel.n())
                    .map(|j| var_cross_rate(mr[j], ms[j], p[0][0], p[0][1], p[1][0], p[1][1], opts.corrected_scaling))
                    .collect()
            };
            let mut vars = plug(pre);
            let mut p11 = pre[0][0];
            if vars.iter().any(|v| !(*v > 0.0)) || pre.iter().flatten().any(|x| !x.is_finite()) {
                let mut fb = [[0.0; 2]; 2];
                for l1 in 1..=2u32 {
                    for l2 in 1..=2u32 {
                        fb[l1 as usize - 1][l2 as usize - 1] =
                            fallback_inter(panel, r, s, l1, l2).unwrap_or(f64::NAN);
                    }
                }
                vars = plug(fb);
                p11 = fb[0][0];
            }
            // The default denominator uses the first category's marginal; the
            // lower index is used so the matrix stays symmetric.
            let lower = shrink(&values, &vars, prelim_pi[r]);
            let own = shrink(&values, &vars, p11);
            let (chosen, other) = if opts.target_denominators { (&own, &lower) } else { (&lower, &own) };
            match chosen {
                Some((v, se, _)) => {
                    for (a, b) in [(r, s), (s, r)] {
                        est.pi_rs[a][b] = *v;
                        est.se_pi_rs[a][b] = Some(*se);
                    }
                }
                None => {
                    est.degraded[r][s] = true;
                    est.degraded[s][r] = true;
                }
            }
            let a = other.as_ref().map_or(est.pi_rs[r][s], |x| x.0);
            alt[r][s] = a;
            alt[s][r] = a;
        }
    }
    est.alternative_pi_rs = Some(alt);
    est
}

/// Weights of the weighted marginal estimator for category `r` (all zero for a
/// degenerate category).
pub fn marginal_weights(panel: &Panel, r: usize, opts: &WeightedOptions) -> Result<Vec<f64>> {
    check_category(panel, r)?;
    let intra = prelim_table(panel).0;
    if panel.losses()[r].iter().all(|&b| b == 0) {
        return Ok(vec![0.0; panel.n()]);
    }
    let o = category_plugins(panel, r, &intra[r], opts.corrected_scaling).orders;
    let vars: Vec<f64> = panel.exposures()[r].iter().map(|&m| var_rate(m as f64, o[0], o[1])).collect();
    shrink(&intra_values(panel, r, 1), &vars, intra[r][0])
        .map(|x| x.2)
        .ok_or_else(|| Error::Numerical("plug-in variances are not positive".into()))
}

/// Closed-form moments of binomial mixture counts, in terms of the mixing
/// moments `E[Q^l]` and `E[Q_r^l1 Q_s^l2]`.
pub mod moments {
    /// `E[M]`.
    pub fn mean(m: f64, p1: f64) -> f64 {
        m * p1
    }

    /// `E[M(M-1)]`.
    pub fn pair_mean(m: f64, p2: f64) -> f64 {
        m * (m - 1.0) * p2
    }

    /// `Var[M]`.
    pub fn var(m: f64, p1: f64, p2: f64) -> f64 {
        m * (p1 + (m - 1.0) * p2 - m * p1 * p1)
    }

    /// `Var[M(M-1)]`.
    pub fn pair_var(m: f64, p2: f64, p3: f64, p4: f64) -> f64 {
        m * (m - 1.0) * ((2.0 - m * (m - 1.0) * p2) * p2 + 4.0 * (m - 2.0) * p3 + (m - 2.0) * (m - 3.0) * p4)
    }

    /// `E[M_r M_s]`.
    pub fn cross_mean(mr: f64, ms: f64, p11: f64) -> f64 {
        mr * ms * p11
    }

    /// `Var[M_r M_s]`, where `p12 = E[Q_r Q_s^2]` and `p21 = E[Q_r^2 Q_s]`.
    pub fn cross_var(mr: f64, ms: f64, p11: f64, p12: f64, p21: f64, p22: f64) -> f64 {
        mr * ms
            * ((1.0 - mr * ms * p11) * p11
                + (ms - 1.0) * p12
                + (mr - 1.0) * p21
                + (mr - 1.0) * (ms - 1.0) * p22)
    }
}
