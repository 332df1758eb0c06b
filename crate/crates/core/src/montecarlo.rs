//! Panel simulation, prediction intervals and the estimator comparison study.

use rand::Rng;
use rand_distr::{Beta, Binomial, Distribution, Gumbel, StandardNormal};
use rayon::prelude::*;

use crate::calibrate::{fit_mle, FitOptions};
use crate::error::{Error, Result};
use crate::factor_model::{conditional_prob_unchecked, implied_matrix, parse_param_file, Family, ModelSpec, ParamVector};
use crate::nonparametric::{preliminary_estimates, weighted_estimates, WeightedOptions};
use crate::numerics::{DistTag, QuadratureRule};
use crate::panel::Panel;
use crate::streams::{label_key, stream, substream, Purpose};

/// Beta-binomial law of one category's exposure counts.
#[derive(Debug, Clone, PartialEq)]
pub struct SizeCategory {
    pub label: String,
    pub trials: u64,
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SizeConfig {
    pub categories: Vec<SizeCategory>,
    pub periods: usize,
}

impl SizeConfig {
    /// Two categories with mean sizes 1000 and 100 over 19 periods.
    pub fn two_class_default() -> Self {
        SizeConfig {
            categories: vec![
                SizeCategory {
                    label: "B".into(),
                    trials: 2000,
                    a: 30.0,
                    b: 30.0,
                },
                SizeCategory {
                    label: "CCC".into(),
                    trials: 200,
                    a: 30.0,
                    b: 30.0,
                },
            ],
            periods: 19,
        }
    }

    pub fn labels(&self) -> Vec<String> {
        self.categories.iter().map(|c| c.label.clone()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.categories.is_empty() || self.periods == 0 {
            return Err(Error::config("size configuration needs categories and periods"));
        }
        for c in &self.categories {
            if c.trials == 0 {
                return Err(Error::config(format!("trials for {} must be at least 1", c.label)));
            }
            if !(c.a > 0.0 && c.b > 0.0 && c.a.is_finite() && c.b.is_finite()) {
                return Err(Error::config(format!("beta shapes for {} must be positive", c.label)));
            }
        }
        Ok(())
    }
}

/// Exposure matrix `[r][j]`: Binomial(N_r, p) with p ~ Beta(a_r, b_r), floored at 1.
pub fn gen_sizes(config: &SizeConfig, seed: u64) -> Result<Vec<Vec<u64>>> {
    gen_sizes_rep(config, seed, 0)
}

fn gen_sizes_rep(config: &SizeConfig, seed: u64, rep: u64) -> Result<Vec<Vec<u64>>> {
    config.validate()?;
    config
        .categories
        .iter()
        .map(|c| {
            let beta = Beta::new(c.a, c.b).map_err(|e| Error::config(e.to_string()))?;
            (0..config.periods)
                .map(|j| {
                    let mut rng = substream(seed, Purpose::Sizes, rep, j as u64, label_key(&c.label));
                    let p: f64 = beta.sample(&mut rng);
                    let m = Binomial::new(c.trials, p.clamp(0.0, 1.0))
                        .map_err(|e| Error::Numerical(e.to_string()))?
                        .sample(&mut rng);
                    Ok(m.max(1))
                })
                .collect()
        })
        .collect()
}

fn latent<R: Rng>(dist: DistTag, rng: &mut R) -> f64 {
    match dist {
        DistTag::Gumbel => Gumbel::new(0.0, 1.0).expect("standard Gumbel").sample(rng),
        DistTag::Normal => rng.sample(StandardNormal),
    }
}

/// Loss counts of one simulated year.
#[allow(clippy::too_many_arguments)]
fn simulate_year(
    spec: &ModelSpec,
    theta: &ParamVector,
    keys: &[u64],
    sizes: &[u64],
    seed: u64,
    purpose: Purpose,
    rep: u64,
    year: u64,
    psi: &mut Vec<f64>,
) -> Vec<u64> {
    let dist = spec.family.dist();
    let two = spec.family.is_two_factor();
    let mut global = stream(seed, purpose, rep, year);
    psi.clear();
    psi.push(latent(dist, &mut global));
    let mut rngs: Vec<_> = keys
        .iter()
        .map(|&key| substream(seed, purpose, rep, year, key))
        .collect();
    if two {
        for rng in rngs.iter_mut() {
            psi.push(latent(dist, rng));
        }
    }
    (0..spec.k)
        .map(|r| {
            let q = conditional_prob_unchecked(spec.family, theta, r, psi).clamp(0.0, 1.0);
            Binomial::new(sizes[r], q).expect("valid binomial").sample(&mut rngs[r])
        })
        .collect()
}

fn check_sim_inputs(spec: &ModelSpec, theta: &ParamVector, labels: &[String], sizes: &[Vec<u64>]) -> Result<usize> {
    theta.validate(spec)?;
    if labels.len() != spec.k || sizes.len() != spec.k {
        return Err(Error::usage(format!(
            "model has {} categories; got {} labels and {} size rows",
            spec.k,
            labels.len(),
            sizes.len()
        )));
    }
    let n = sizes[0].len();
    if n == 0 || sizes.iter().any(|row| row.len() != n || row.contains(&0)) {
        return Err(Error::domain("exposure matrix must be rectangular with positive entries"));
    }
    Ok(n)
}

/// Simulates loss counts for the given exposures. Category-specific draws are
/// keyed by label, so permuting categories permutes the result.
pub fn gen_panel(
    spec: &ModelSpec,
    theta: &ParamVector,
    labels: &[String],
    sizes: &[Vec<u64>],
    seed: u64,
) -> Result<Panel> {
    draw_panel(spec, theta, labels, sizes, seed, Purpose::Panel, 0)
}

fn draw_panel(
    spec: &ModelSpec,
    theta: &ParamVector,
    labels: &[String],
    sizes: &[Vec<u64>],
    seed: u64,
    purpose: Purpose,
    rep: u64,
) -> Result<Panel> {
    let n = check_sim_inputs(spec, theta, labels, sizes)?;
    let keys: Vec<u64> = labels.iter().map(|l| label_key(l)).collect();
    let mut losses = vec![vec![0u64; n]; spec.k];
    let mut psi = Vec::with_capacity(spec.k + 1);
    for j in 0..n {
        let col: Vec<u64> = sizes.iter().map(|row| row[j]).collect();
        let year = simulate_year(spec, theta, &keys, &col, seed, purpose, rep, j as u64, &mut psi);
        for r in 0..spec.k {
            losses[r][j] = year[r];
        }
    }
    Panel::new(
        labels.to_vec(),
        (1..=n).map(|j| j.to_string()).collect(),
        sizes.to_vec(),
        losses,
    )
}

/// Central simulated ranges of every cell's loss count.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionIntervals {
    pub draws: usize,
    pub level: f64,
    /// 1-based ranks of the retained order statistics.
    pub lower_rank: usize,
    pub upper_rank: usize,
    pub lower: Vec<Vec<u64>>,
    pub upper: Vec<Vec<u64>>,
}

impl PredictionIntervals {
    pub fn retained(&self) -> usize {
        self.upper_rank + 1 - self.lower_rank
    }

    pub fn contains(&self, r: usize, j: usize, count: u64) -> bool {
        self.lower[r][j] <= count && count <= self.upper[r][j]
    }
}

/// Number of draws cut from each tail.
pub fn tail_count(draws: usize, level: f64) -> usize {
    // The offset absorbs rounding in products such as 5000 * 0.05.
    (draws as f64 * (1.0 - level) / 2.0 + 1e-9).floor() as usize
}

/// Simulates `draws` panels (years share their global factor across categories)
/// and keeps ranks `tail + 1 ..= draws - tail` of each cell.
pub fn prediction_intervals(
    spec: &ModelSpec,
    theta: &ParamVector,
    labels: &[String],
    sizes: &[Vec<u64>],
    draws: usize,
    level: f64,
    seed: u64,
) -> Result<PredictionIntervals> {
    if draws < 100 {
        return Err(Error::domain(format!("need at least 100 draws, got {draws}")));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::domain(format!("level must lie in (0,1), got {level}")));
    }
    let n = check_sim_inputs(spec, theta, labels, sizes)?;
    let k = spec.k;
    let sims: Vec<Panel> = (0..draws as u64)
        .into_par_iter()
        .map(|d| draw_panel(spec, theta, labels, sizes, seed, Purpose::Prediction, d))
        .collect::<Result<_>>()?;
    let tail = tail_count(draws, level);
    let mut lower = vec![vec![0u64; n]; k];
    let mut upper = vec![vec![0u64; n]; k];
    let mut column = vec![0u64; draws];
    for r in 0..k {
        for j in 0..n {
            for (d, p) in sims.iter().enumerate() {
                column[d] = p.big_m(r, j);
            }
            column.sort_unstable();
            lower[r][j] = column[tail];
            upper[r][j] = column[draws - tail - 1];
        }
    }
    Ok(PredictionIntervals {
        draws,
        level,
        lower_rank: tail + 1,
        upper_rank: draws - tail,
        lower,
        upper,
    })
}

/// Estimators compared in the study.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Preliminary,
    Weighted,
    Mle(Family),
}

impl Method {
    pub fn code(self) -> String {
        match self {
            Method::Preliminary => "np".into(),
            Method::Weighted => "np_weighted".into(),
            Method::Mle(f) => f.code().into(),
        }
    }

    pub fn from_code(code: &str) -> Result<Self> {
        match code {
            "np" => Ok(Method::Preliminary),
            "np_weighted" => Ok(Method::Weighted),
            other => Family::from_code(other)
                .map(Method::Mle)
                .map_err(|_| Error::config(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub spec: ModelSpec,
    pub theta: ParamVector,
    pub sizes: SizeConfig,
    pub replications: usize,
    pub methods: Vec<Method>,
    /// Rule size and restarts of the likelihood fits.
    pub fit_nodes: usize,
    pub fit_starts: usize,
}

impl StudyConfig {
    pub fn new(spec: ModelSpec, theta: ParamVector, sizes: SizeConfig, replications: usize, methods: Vec<Method>) -> Self {
        StudyConfig {
            spec,
            theta,
            sizes,
            replications,
            methods,
            fit_nodes: 64,
            fit_starts: 1,
        }
    }
}

/// Parses a study configuration: `family`, `theta.<param>.<label>`,
/// `size.<label>.{trials,a,b}`, `periods`, `replications`, `methods`
/// (comma-separated codes) and optionally `fit_nodes`, `fit_starts`.
pub fn parse_study_config(text: &str) -> Result<StudyConfig> {
    let mut theta_lines = String::new();
    let mut size_order: Vec<String> = Vec::new();
    let mut sizes: std::collections::HashMap<String, [Option<f64>; 3]> = Default::default();
    let (mut periods, mut replications, mut methods) = (None, None, None);
    let (mut fit_nodes, mut fit_starts) = (64usize, 1usize);
    for (i, raw) in text.lines().enumerate() {
        let line_no = i as u64 + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .map(|(a, b)| (a.trim(), b.trim()))
            .ok_or_else(|| Error::parse(line_no, "key", format!("expected name=value, got {line:?}")))?;
        let count = |v: &str| {
            v.parse::<usize>()
                .map_err(|_| Error::parse(line_no, key, format!("not a count: {v:?}")))
        };
        if key == "family" {
            theta_lines.push_str(&format!("family={value}\n"));
        } else if let Some(rest) = key.strip_prefix("theta.") {
            theta_lines.push_str(&format!("{rest}={value}\n"));
        } else if let Some(rest) = key.strip_prefix("size.") {
            let (label, field) = rest
                .rsplit_once('.')
                .ok_or_else(|| Error::parse(line_no, key, "expected size.<label>.<field>"))?;
            let slot = match field {
                "trials" => 0,
                "a" => 1,
                "b" => 2,
                _ => return Err(Error::parse(line_no, key, "unknown size field")),
            };
            let v: f64 = value
                .parse()
                .map_err(|_| Error::parse(line_no, key, format!("not a number: {value:?}")))?;
            if !size_order.iter().any(|l| l == label) {
                size_order.push(label.to_string());
            }
            sizes.entry(label.to_string()).or_default()[slot] = Some(v);
        } else {
            match key {
                "periods" => periods = Some(count(value)?),
                "replications" => replications = Some(count(value)?),
                "fit_nodes" => fit_nodes = count(value)?,
                "fit_starts" => fit_starts = count(value)?,
                "methods" => {
                    methods = Some(
                        value
                            .split(',')
                            .map(|m| Method::from_code(m.trim()))
                            .collect::<Result<Vec<_>>>()?,
                    )
                }
                _ => return Err(Error::parse(line_no, key, "unknown key")),
            }
        }
    }
    let params = parse_param_file(&theta_lines)?;
    let defaults = SizeConfig::two_class_default();
    let categories = params
        .labels
        .iter()
        .enumerate()
        .map(|(r, label)| {
            let given = sizes.get(label).copied().unwrap_or_default();
            let fallback = defaults.categories.get(r);
            let pick = |slot: usize, d: Option<f64>| {
                given[slot]
                    .or(d)
                    .ok_or_else(|| Error::config(format!("missing size.{label} settings")))
            };
            Ok(SizeCategory {
                label: label.clone(),
                trials: pick(0, fallback.map(|c| c.trials as f64))? as u64,
                a: pick(1, fallback.map(|c| c.a))?,
                b: pick(2, fallback.map(|c| c.b))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if let Some(extra) = size_order.iter().find(|l| !params.labels.contains(l)) {
        return Err(Error::config(format!("size settings for unknown category {extra}")));
    }
    let sizes = SizeConfig {
        categories,
        periods: periods.unwrap_or(defaults.periods),
    };
    sizes.validate()?;
    let mut cfg = StudyConfig::new(
        params.spec,
        params.theta,
        sizes,
        replications.ok_or_else(|| Error::config("missing `replications`"))?,
        methods.ok_or_else(|| Error::config("missing `methods`"))?,
    );
    cfg.fit_nodes = fit_nodes;
    cfg.fit_starts = fit_starts;
    Ok(cfg)
}

/// One (method, target) cell of the study.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub method: String,
    pub target: String,
    /// `pi_r` for marginal targets, `pi_rs` for joint ones.
    pub block: &'static str,
    pub truth: f64,
    pub mean: f64,
    /// Standard error of `mean` across replications.
    pub se_mean: f64,
    pub rrmse: f64,
    pub delta_pct: f64,
    pub bias_sign: i8,
    pub successes: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyReport {
    pub replications: usize,
    pub targets: Vec<String>,
    pub rows: Vec<StudyRow>,
}

impl StudyReport {
    pub fn row(&self, method: &str, target: &str) -> Option<&StudyRow> {
        self.rows.iter().find(|r| r.method == method && r.target == target)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,target,truth,mean,se_mean,rrmse,delta_pct,bias_sign,successes,failures\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                r.method,
                r.target,
                crate::factor_model::fmt_real(r.truth),
                crate::factor_model::fmt_real(r.mean),
                crate::factor_model::fmt_real(r.se_mean),
                crate::factor_model::fmt_real(r.rrmse),
                crate::factor_model::fmt_real(r.delta_pct),
                r.bias_sign,
                r.successes,
                r.failures
            ));
        }
        out
    }
}

/// Target names and values in report order: every `pi_r`, then `pi_rs` for `r <= s`.
fn flatten(labels: &[String], pi: &[f64], pi_rs: &[Vec<f64>]) -> (Vec<String>, Vec<f64>) {
    let k = labels.len();
    let mut names = Vec::new();
    let mut vals = Vec::new();
    for r in 0..k {
        names.push(format!("pi_{}", labels[r]));
        vals.push(pi[r]);
    }
    for r in 0..k {
        for s in r..k {
            names.push(format!("pi_{}_{}", labels[r], labels[s]));
            vals.push(pi_rs[r][s]);
        }
    }
    (names, vals)
}

fn run_method(method: Method, panel: &Panel, cfg: &StudyConfig, seed: u64, labels: &[String]) -> Option<Vec<f64>> {
    let (pi, pi_rs) = match method {
        Method::Preliminary => {
            let e = preliminary_estimates(panel);
            (e.pi_r, e.pi_rs)
        }
        Method::Weighted => {
            let e = weighted_estimates(panel, &WeightedOptions::default());
            (e.pi_r, e.pi_rs)
        }
        Method::Mle(family) => {
            let spec = ModelSpec::new(family, panel.k());
            let opts = FitOptions {
                nodes: cfg.fit_nodes,
                starts: cfg.fit_starts,
                seed,
                ..FitOptions::default()
            };
            let fit = fit_mle(&spec, panel, &opts).ok()?;
            let rule = QuadratureRule::legendre(cfg.fit_nodes).ok()?;
            implied_matrix(&spec, &fit.theta_hat, &rule).ok()?
        }
    };
    let vals = flatten(labels, &pi, &pi_rs).1;
    vals.iter().all(|v| v.is_finite()).then_some(vals)
}

/// Relative root mean squared error of each method for every marginal and
/// joint loss probability over simulated panels.
pub fn rrmse_study(cfg: &StudyConfig, seed: u64) -> Result<StudyReport> {
    cfg.sizes.validate()?;
    cfg.theta.validate(&cfg.spec)?;
    if cfg.sizes.categories.len() != cfg.spec.k {
        return Err(Error::usage("size configuration and model disagree on the number of categories"));
    }
    if cfg.replications == 0 || cfg.methods.is_empty() {
        return Err(Error::config("study needs replications and methods"));
    }
    let labels = cfg.sizes.labels();
    let truth_rule = QuadratureRule::legendre(256)?;
    let (pi, pi_rs) = implied_matrix(&cfg.spec, &cfg.theta, &truth_rule)?;
    let (targets, truth) = flatten(&labels, &pi, &pi_rs);

    let per_rep: Vec<Vec<Option<Vec<f64>>>> = (0..cfg.replications as u64)
        .into_par_iter()
        .map(|rep| {
            let sizes = gen_sizes_rep(&cfg.sizes, seed, rep)?;
            let panel = draw_panel(&cfg.spec, &cfg.theta, &labels, &sizes, seed, Purpose::Panel, rep)?;
            Ok(cfg
                .methods
                .iter()
                .map(|&m| run_method(m, &panel, cfg, seed ^ rep, &labels))
                .collect())
        })
        .collect::<Result<_>>()?;

    let t = targets.len();
    let k = cfg.spec.k;
    let mut rows = Vec::new();
    for (mi, method) in cfg.methods.iter().enumerate() {
        let mut sum = vec![0.0; t];
        let mut sum_sq = vec![0.0; t];
        let mut sq_err = vec![0.0; t];
        let mut ok = 0usize;
        for rep in &per_rep {
            if let Some(v) = &rep[mi] {
                ok += 1;
                for i in 0..t {
                    sum[i] += v[i];
                    sum_sq[i] += v[i] * v[i];
                    sq_err[i] += (v[i] - truth[i]).powi(2);
                }
            }
        }
        for i in 0..t {
            let cnt = ok as f64;
            let mean = sum[i] / cnt;
            let var = if ok > 1 { (sum_sq[i] - cnt * mean * mean).max(0.0) / (cnt - 1.0) } else { f64::NAN };
            let bias = mean - truth[i];
            rows.push(StudyRow {
                method: method.code(),
                target: targets[i].clone(),
                block: if i < k { "pi_r" } else { "pi_rs" },
                truth: truth[i],
                mean,
                se_mean: (var / cnt).sqrt(),
                rrmse: (sq_err[i] / cnt).sqrt() / truth[i],
                delta_pct: f64::NAN,
                bias_sign: if bias > 0.0 {
                    1
                } else if bias < 0.0 {
                    -1
                } else {
                    0
                },
                successes: ok,
                failures: cfg.replications - ok,
            });
        }
    }
    // Delta compares the summed RRMSE of each block (marginals, joints) against
    // the best method's; the first best method gets exactly 0.
    for block in ["pi_r", "pi_rs"] {
        let in_block = |row: &StudyRow| row.block == block;
        let totals: Vec<(String, f64)> = cfg
            .methods
            .iter()
            .map(|m| {
                let code = m.code();
                let total = rows.iter().filter(|r| r.method == code && in_block(r)).map(|r| r.rrmse).sum::<f64>();
                (code, total)
            })
            .collect();
        let Some(best) = totals
            .iter()
            .enumerate()
            .filter(|(_, t)| t.1.is_finite())
            .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
            .map(|(i, _)| i)
        else {
            continue;
        };
        let floor = totals[best].1;
        for (i, (code, total)) in totals.iter().enumerate() {
            let delta = if i == best { 0.0 } else { 100.0 * (total / floor - 1.0) };
            for row in rows.iter_mut().filter(|r| &r.method == code && r.block == block) {
                row.delta_pct = delta;
            }
        }
    }
    Ok(StudyReport {
        replications: cfg.replications,
        targets,
        rows,
    })
}
