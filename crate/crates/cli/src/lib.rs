//! Command-line front end: fitting, nonparametric estimation, implied
//! probabilities, prediction intervals, simulation, the estimator study and
//! excess-probability curves.
//!
//! Exit codes: 0 on success, 1 on invalid input, 2 on numerical failure.

pub mod report;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use maxfactor::calibrate::{fit_mle, FitOptions, FitResult};
use maxfactor::factor_model::{
    excess_probability, fmt_real, implied_matrix, parse_param_file, risk_ratio, Family, ModelSpec, ParamFile,
    ParamVector,
};
use maxfactor::montecarlo::{gen_sizes, parse_study_config, prediction_intervals, rrmse_study, SizeCategory, SizeConfig};
use maxfactor::nonparametric::{preliminary_estimates, weighted_estimates, LossProbEstimates, WeightedOptions};
use maxfactor::numerics::QuadratureRule;
use maxfactor::panel::{panel_to_string, parse_panel, Panel};
use maxfactor::Error;

use report::{read_fit, write_atomic, Report};

#[derive(Parser, Debug)]
#[command(name = "maxfactor", version, about = "Max-factor loss-count models: fit, estimate, simulate")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Maximum-likelihood fit of a factor model to a panel.
    Fit(FitArgs),
    /// Nonparametric loss probability estimates.
    Nonpar(NonparArgs),
    /// Implied marginal and joint probabilities and risk ratios of a fit.
    Implied(ImpliedArgs),
    /// Per-cell prediction intervals of loss counts.
    Predict(PredictArgs),
    /// Synthetic panel from a parameter file.
    Simulate(SimulateArgs),
    /// RRMSE comparison of estimators over simulated panels.
    Study(StudyArgs),
    /// Excess-probability curves of a fit.
    Curves(CurvesArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum ModelArg {
    #[value(name = "1a")]
    OneA,
    #[value(name = "2a")]
    TwoA,
    #[value(name = "1b")]
    OneB,
    #[value(name = "2b")]
    TwoB,
}

impl ModelArg {
    fn family(self) -> Family {
        match self {
            ModelArg::OneA => Family::OneFactorProbit,
            ModelArg::TwoA => Family::LinearTwoFactorProbit,
            ModelArg::OneB => Family::OneFactorGumbel,
            ModelArg::TwoB => Family::MaxFactorGumbel,
        }
    }
}

#[derive(Args, Debug)]
struct FitArgs {
    #[arg(long, value_enum)]
    model: ModelArg,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 128)]
    nodes: usize,
    #[arg(long, default_value_t = 3)]
    starts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "max-iter", default_value_t = 5000)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct NonparArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    weighted: bool,
    /// Use the uncorrected variance scalings.
    #[arg(long = "paper-literal-scaling")]
    paper_literal_scaling: bool,
    /// Shrink joint estimators with their own targets in the weight denominators.
    #[arg(long = "target-denominators")]
    target_denominators: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ImpliedArgs {
    #[arg(long)]
    fit: PathBuf,
    #[arg(long, default_value_t = 256)]
    nodes: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[arg(long)]
    fit: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 5000)]
    draws: usize,
    #[arg(long, default_value_t = 0.90)]
    level: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    model: ModelArg,
    #[arg(long)]
    params: PathBuf,
    /// Exposure source: a CSV with `period,category,exposures[,losses]` or a
    /// size configuration (`periods=`, `size.<label>.{trials,a,b}=`).
    #[arg(long)]
    sizes: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct StudyArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct CurvesArgs {
    #[arg(long)]
    fit: PathBuf,
    #[arg(long, default_value_t = 200)]
    grid: usize,
    #[arg(long)]
    out: PathBuf,
}

/// Failure of a command: invalid input (exit 1) or numerical failure (exit 2).
#[derive(Debug)]
enum Failure {
    Invalid(String),
    Numerical(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Invalid(_) => 1,
            Failure::Numerical(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Invalid(m) | Failure::Numerical(m) => m,
        }
    }
}

fn classify(context: &str, e: Error) -> Failure {
    match e {
        Error::Numerical(m) => Failure::Numerical(format!("{context}: numerical failure: {m}")),
        other => Failure::Invalid(format!("{context}: {other}")),
    }
}

type Outcome = std::result::Result<(), Failure>;

/// Runs the command line `args` (including the program name) and returns the
/// exit code. Messages go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Fit(a) => cmd_fit(&a),
        Command::Nonpar(a) => cmd_nonpar(&a),
        Command::Implied(a) => cmd_implied(&a),
        Command::Predict(a) => cmd_predict(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Study(a) => cmd_study(&a),
        Command::Curves(a) => cmd_curves(&a),
    };
    match outcome {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {}", f.message());
            f.code()
        }
    }
}

fn read_text(path: &Path, flag: &str) -> std::result::Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Invalid(format!("--{flag} {}: cannot read file: {e}", path.display())))
}

fn read_panel(path: &Path, flag: &str) -> std::result::Result<Panel, Failure> {
    let text = read_text(path, flag)?;
    parse_panel(text.as_bytes()).map_err(|e| classify(&format!("--{flag} {}", path.display()), e))
}

fn read_fit_file(path: &Path) -> std::result::Result<ParamFile, Failure> {
    let text = read_text(path, "fit")?;
    read_fit(&text).map_err(|e| classify(&format!("--fit {}", path.display()), e))
}

fn write_out(path: &Path, contents: &str) -> Outcome {
    write_atomic(path, contents).map_err(|e| Failure::Invalid(format!("--out {}: {e}", path.display())))
}

fn show(p: &Path) -> String {
    p.display().to_string()
}

/// Reorders the panel's categories to `labels`.
fn align_panel(panel: &Panel, labels: &[String], flag: &str) -> std::result::Result<Panel, Failure> {
    if panel.k() != labels.len() {
        return Err(Failure::Invalid(format!(
            "--{flag}: panel has {} categories, model has {}",
            panel.k(),
            labels.len()
        )));
    }
    let order = labels
        .iter()
        .map(|l| {
            panel
                .category_index(l)
                .ok_or_else(|| Failure::Invalid(format!("--{flag}: category {l} of the model is not in the panel")))
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    panel.permute_categories(&order).map_err(|e| classify(flag, e))
}

fn cmd_fit(a: &FitArgs) -> Outcome {
    let panel = read_panel(&a.data, "data")?;
    let spec = ModelSpec::new(a.model.family(), panel.k());
    let opts = FitOptions {
        nodes: a.nodes,
        max_iter: a.max_iter,
        tol: a.tol,
        starts: a.starts,
        seed: a.seed,
        ..FitOptions::default()
    };
    let fit = fit_mle(&spec, &panel, &opts).map_err(|e| classify("fit", e))?;
    let flags = [
        ("model", fit.spec.family.code().to_string()),
        ("data", show(&a.data)),
        ("nodes", a.nodes.to_string()),
        ("starts", a.starts.to_string()),
        ("seed", a.seed.to_string()),
        ("max-iter", a.max_iter.to_string()),
        ("tol", fmt_real(a.tol)),
        ("out", show(&a.out)),
    ];
    write_out(&a.out, &fit_report(&fit, panel.categories(), &flags))?;
    if !fit.converged {
        return Err(Failure::Numerical(format!(
            "optimizer did not converge after {} iterations (simplex size {:e}); diagnostic report written to {}",
            fit.iterations,
            fit.simplex_size,
            a.out.display()
        )));
    }
    Ok(())
}

fn fit_report(fit: &FitResult, labels: &[String], flags: &[(&str, String)]) -> String {
    let mut r = Report::new("fit", flags);
    r.kv("kind", "fit");
    r.kv("family", fit.spec.family.code());
    r.kv("k", fit.spec.k);
    let t = &fit.theta_hat;
    let se = &fit.std_errors;
    for (i, l) in labels.iter().enumerate() {
        r.real(&format!("mu.{l}"), t.mu[i]);
        r.real(&format!("sigma.{l}"), t.sigma[i]);
        if !t.tau.is_empty() {
            r.real(&format!("tau.{l}"), t.tau[i]);
        }
        if !t.nu.is_empty() {
            r.real(&format!("nu.{l}"), t.nu[i]);
        }
    }
    for (i, l) in labels.iter().enumerate() {
        r.opt_real(&format!("se.mu.{l}"), se.mu[i]);
        r.opt_real(&format!("se.sigma.{l}"), se.sigma[i]);
        if !se.tau.is_empty() {
            r.opt_real(&format!("se.tau.{l}"), se.tau[i]);
        }
        if !se.nu.is_empty() {
            r.opt_real(&format!("se.nu.{l}"), se.nu[i]);
        }
    }
    r.kv("hessian_positive_definite", se.positive_definite);
    r.real("log_lik", fit.log_lik);
    r.real("neg_log_lik", -fit.log_lik);
    r.kv("n_params", fit.n_params);
    r.kv("n_periods", fit.n_periods);
    r.real("aic", fit.aic);
    r.real("bic", fit.bic);
    r.kv("converged", fit.converged);
    r.kv("iterations", fit.iterations);
    r.kv("evaluations", fit.evaluations);
    r.real("simplex_size", fit.simplex_size);
    r.kv("nodes", fit.nodes);
    for (i, l) in labels.iter().enumerate() {
        r.kv(&format!("boundary.{l}"), fit.boundary[i]);
    }
    for (i, l) in labels.iter().enumerate() {
        r.kv(&format!("degenerate.{l}"), fit.degenerate[i]);
    }
    r.finish()
}

fn reals(row: &[f64]) -> Vec<String> {
    row.iter().map(|&v| fmt_real(v)).collect()
}

fn opt_reals(row: &[Option<f64>]) -> Vec<String> {
    row.iter().map(|v| v.map_or("absent".into(), fmt_real)).collect()
}

fn cmd_nonpar(a: &NonparArgs) -> Outcome {
    let panel = read_panel(&a.data, "data")?;
    let opts = WeightedOptions {
        corrected_scaling: !a.paper_literal_scaling,
        target_denominators: a.target_denominators,
    };
    let est = if a.weighted {
        weighted_estimates(&panel, &opts)
    } else {
        preliminary_estimates(&panel)
    };
    let flags = [
        ("data", show(&a.data)),
        ("weighted", a.weighted.to_string()),
        ("paper-literal-scaling", a.paper_literal_scaling.to_string()),
        ("target-denominators", a.target_denominators.to_string()),
        ("out", show(&a.out)),
    ];
    let text = nonpar_report(&est, &opts, &flags);
    write_out(&a.out, &text)?;
    for (r, l) in est.labels.iter().enumerate() {
        if est.degraded[r].iter().any(|&d| d) {
            eprintln!("warning: weighted estimator for category {l} fell back to the preliminary estimate");
        }
    }
    Ok(())
}

fn nonpar_report(est: &LossProbEstimates, opts: &WeightedOptions, flags: &[(&str, String)]) -> String {
    let mut r = Report::new("nonpar", flags);
    r.kv("kind", "nonpar");
    r.kv("method", est.method.name());
    r.kv("corrected_scaling", opts.corrected_scaling);
    r.kv("target_denominators", opts.target_denominators);
    r.kv("k", est.labels.len());
    for (i, l) in est.labels.iter().enumerate() {
        r.real(&format!("pi.{l}"), est.pi_r[i]);
        r.opt_real(&format!("se.pi.{l}"), est.se_pi_r[i]);
        r.kv(&format!("fallback.{l}"), est.fallback[i]);
        r.kv(&format!("degenerate.{l}"), est.degenerate[i]);
    }
    let labels = &est.labels;
    r.matrix("pi_rs", labels, &est.pi_rs.iter().map(|row| reals(row)).collect::<Vec<_>>());
    r.matrix("se_pi_rs", labels, &est.se_pi_rs.iter().map(|row| opt_reals(row)).collect::<Vec<_>>());
    r.matrix(
        "degraded",
        labels,
        &est.degraded
            .iter()
            .map(|row| row.iter().map(|d| d.to_string()).collect())
            .collect::<Vec<_>>(),
    );
    if let Some(alt) = &est.alternative_pi_rs {
        r.matrix("pi_rs_alternative", labels, &alt.iter().map(|row| reals(row)).collect::<Vec<_>>());
    }
    let header: Vec<String> = ["category", "l1", "l2", "value"].iter().map(|s| s.to_string()).collect();
    let mut rows = Vec::new();
    for (i, l) in labels.iter().enumerate() {
        for (o, v) in est.pi_r_l[i].iter().enumerate() {
            rows.push(vec![l.clone(), (o + 1).to_string(), "0".into(), fmt_real(*v)]);
        }
    }
    r.section("intra_higher_order", &header, &rows);
    let header: Vec<String> = ["category_r", "category_s", "l1", "l2", "value"].iter().map(|s| s.to_string()).collect();
    let mut rows = Vec::new();
    for (i, li) in labels.iter().enumerate() {
        for (j, lj) in labels.iter().enumerate() {
            if i == j {
                continue;
            }
            for l1 in 0..2 {
                for l2 in 0..2 {
                    rows.push(vec![
                        li.clone(),
                        lj.clone(),
                        (l1 + 1).to_string(),
                        (l2 + 1).to_string(),
                        fmt_real(est.pi_rs_l1l2[i][j][l1][l2]),
                    ]);
                }
            }
        }
    }
    r.section("inter_higher_order", &header, &rows);
    r.finish()
}

fn cmd_implied(a: &ImpliedArgs) -> Outcome {
    let pf = read_fit_file(&a.fit)?;
    let rule = QuadratureRule::legendre(a.nodes).map_err(|e| classify("--nodes", e))?;
    let (pi, pi_rs) = implied_matrix(&pf.spec, &pf.theta, &rule).map_err(|e| classify("implied", e))?;
    let k = pf.spec.k;
    let mut rr = vec![vec![String::new(); k]; k];
    for r in 0..k {
        for s in 0..k {
            rr[r][s] = match risk_ratio(pi[r], pi[s], pi_rs[r][s]) {
                Ok(v) => fmt_real(v),
                Err(_) => "nan".into(),
            };
        }
    }
    let flags = [("fit", show(&a.fit)), ("nodes", a.nodes.to_string()), ("out", show(&a.out))];
    let mut r = Report::new("implied", &flags);
    r.kv("kind", "implied");
    r.kv("family", pf.spec.family.code());
    r.kv("k", k);
    for (i, l) in pf.labels.iter().enumerate() {
        r.real(&format!("pi.{l}"), pi[i]);
    }
    r.matrix("pi_rs", &pf.labels, &pi_rs.iter().map(|row| reals(row)).collect::<Vec<_>>());
    r.matrix("risk_ratio", &pf.labels, &rr);
    write_out(&a.out, &r.finish())
}

fn cmd_predict(a: &PredictArgs) -> Outcome {
    let pf = read_fit_file(&a.fit)?;
    let panel = align_panel(&read_panel(&a.data, "data")?, &pf.labels, "data")?;
    let pred = prediction_intervals(&pf.spec, &pf.theta, &pf.labels, panel.exposures(), a.draws, a.level, a.seed)
        .map_err(|e| classify("predict", e))?;
    let flags = [
        ("fit", show(&a.fit)),
        ("data", show(&a.data)),
        ("draws", a.draws.to_string()),
        ("level", fmt_real(a.level)),
        ("seed", a.seed.to_string()),
        ("out", show(&a.out)),
    ];
    let mut text = report::provenance("predict", &flags);
    text.push_str(&format!(
        "# ranks {}-{} of {} draws retained ({})\n",
        pred.lower_rank,
        pred.upper_rank,
        pred.draws,
        pred.retained()
    ));
    text.push_str("period,category,exposures,observed,lower,upper,inside\n");
    let mut inside = 0usize;
    for j in 0..panel.n() {
        for r in 0..panel.k() {
            let obs = panel.big_m(r, j);
            let hit = pred.contains(r, j, obs);
            inside += hit as usize;
            text.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                panel.periods()[j],
                panel.categories()[r],
                panel.m(r, j),
                obs,
                pred.lower[r][j],
                pred.upper[r][j],
                hit as u8
            ));
        }
    }
    text.push_str(&format!("# observed inside: {inside} of {}\n", panel.n() * panel.k()));
    write_out(&a.out, &text)
}

/// Exposures from a CSV (`period,category,exposures[,losses]`) or a size configuration.
fn read_sizes(path: &Path, labels: &[String], seed: u64) -> std::result::Result<Vec<Vec<u64>>, Failure> {
    let text = read_text(path, "sizes")?;
    let first = text.lines().find(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#')).unwrap_or("");
    let ctx = format!("--sizes {}", path.display());
    if first.trim().starts_with("period,category,exposures") {
        let body = if first.trim() == "period,category,exposures" {
            // Add a zero-loss column so the panel parser validates the layout.
            text.lines()
                .filter(|l| !l.trim().is_empty())
                .enumerate()
                .map(|(i, l)| if i == 0 { "period,category,exposures,losses\n".to_string() } else { format!("{},0\n", l.trim_end()) })
                .collect::<String>()
        } else {
            text.clone()
        };
        let panel = parse_panel(body.as_bytes()).map_err(|e| classify(&ctx, e))?;
        let panel = align_panel(&panel, labels, "sizes")?;
        return Ok(panel.exposures().to_vec());
    }
    let mut periods = None;
    let mut cats: Vec<SizeCategory> = labels
        .iter()
        .map(|l| SizeCategory {
            label: l.clone(),
            trials: 0,
            a: f64::NAN,
            b: f64::NAN,
        })
        .collect();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = |m: &str| Failure::Invalid(format!("{ctx}: line {}: {m}", i + 1));
        let (key, value) = line.split_once('=').ok_or_else(|| bad("expected name=value"))?;
        let (key, value) = (key.trim(), value.trim());
        if key == "periods" {
            periods = Some(value.parse::<usize>().map_err(|_| bad("periods must be a count"))?);
            continue;
        }
        let rest = key.strip_prefix("size.").ok_or_else(|| bad(&format!("unknown key {key}")))?;
        let (label, field) = rest.rsplit_once('.').ok_or_else(|| bad(&format!("unknown key {key}")))?;
        let cat = cats
            .iter_mut()
            .find(|c| c.label == label)
            .ok_or_else(|| bad(&format!("category {label} is not in the parameter file")))?;
        let v: f64 = value.parse().map_err(|_| bad(&format!("{key} is not a number")))?;
        match field {
            "trials" => cat.trials = v as u64,
            "a" => cat.a = v,
            "b" => cat.b = v,
            _ => return Err(bad(&format!("unknown key {key}"))),
        }
    }
    let config = SizeConfig {
        categories: cats,
        periods: periods.ok_or_else(|| Failure::Invalid(format!("{ctx}: missing `periods`")))?,
    };
    gen_sizes(&config, seed).map_err(|e| classify(&ctx, e))
}

fn cmd_simulate(a: &SimulateArgs) -> Outcome {
    let pf = parse_param_file(&read_text(&a.params, "params")?)
        .map_err(|e| classify(&format!("--params {}", a.params.display()), e))?;
    if pf.spec.family != a.model.family() {
        return Err(Failure::Invalid(format!(
            "--model {} does not match family {} of --params {}",
            a.model.family().code(),
            pf.spec.family.code(),
            a.params.display()
        )));
    }
    let sizes = read_sizes(&a.sizes, &pf.labels, a.seed)?;
    let panel = maxfactor::montecarlo::gen_panel(&pf.spec, &pf.theta, &pf.labels, &sizes, a.seed)
        .map_err(|e| classify("simulate", e))?;
    write_out(&a.out, &panel_to_string(&panel))
}

fn cmd_study(a: &StudyArgs) -> Outcome {
    let text = read_text(&a.config, "config")?;
    let cfg = parse_study_config(&text).map_err(|e| classify(&format!("--config {}", a.config.display()), e))?;
    let rep = rrmse_study(&cfg, a.seed).map_err(|e| classify("study", e))?;
    let flags = [("config", show(&a.config)), ("seed", a.seed.to_string()), ("out", show(&a.out))];
    let mut out = report::provenance("study", &flags);
    out.push_str(&format!("# replications {}\n", rep.replications));
    out.push_str(&rep.to_csv());
    write_out(&a.out, &out)
}

fn cmd_curves(a: &CurvesArgs) -> Outcome {
    if a.grid < 2 {
        return Err(Failure::Invalid("--grid must be at least 2".into()));
    }
    let pf = read_fit_file(&a.fit)?;
    let flags = [("fit", show(&a.fit)), ("grid", a.grid.to_string()), ("out", show(&a.out))];
    let mut out = report::provenance("curves", &flags);
    out.push_str("category,threshold,excess_probability\n");
    for (r, l) in pf.labels.iter().enumerate() {
        for i in 1..=a.grid {
            let t = i as f64 / (a.grid + 1) as f64;
            let p = excess_probability(&pf.spec, &pf.theta, r, t).map_err(|e| classify("curves", e))?;
            out.push_str(&format!("{l},{},{}\n", fmt_real(t), fmt_real(p)));
        }
    }
    write_out(&a.out, &out)
}

/// Parameters of a fit report, for callers that post-process fits.
pub fn fit_parameters(text: &str) -> maxfactor::Result<(ModelSpec, Vec<String>, ParamVector)> {
    let pf = read_fit(text)?;
    Ok((pf.spec, pf.labels, pf.theta))
}
