//! Experiment runner behind the `tccn` binary.
//!
//! Every experiment writes one CSV table and prints a one-line summary. Runs
//! with an acceptance band exit with status 2 when the band is missed.

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::american::{american_levels, ratio_rows, PenaltyConfig};
use crate::analysis::{order_curve, refine_study, Problem};
use crate::blackscholes::{critical_lambda, predicted_bs_order, BSParams, Payoff, REFERENCE_S_MAX};
use crate::error::{invalid, Error, Result};
use crate::heat::{exact_heat, solve_heat};
use crate::mesh::{build_time_grid, symmetric_grid, SchemeSpec, SchemeVariant};
use crate::symbol::{
    cost_constrained_errors, error_ratio_rannacher_tc, periodic_dft_check, regime_partition,
    theoretical_order, DEFAULT_R,
};

#[derive(Debug, Parser)]
#[command(
    name = "tccn",
    version,
    about = "Time-changed Crank-Nicolson experiments"
)]
pub struct Cli {
    /// TOML file with default parameters; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub experiment: Experiment,
}

#[derive(Debug, Clone, Subcommand)]
#[command(rename_all = "snake_case")]
pub enum Experiment {
    /// Max-norm heat errors under refinement at fixed lambda.
    HeatConvergence(Params),
    /// Fitted heat order for a list of lambdas.
    OrderVsLambda(Params),
    /// Symbol product against the DFT of the periodic solution.
    SymbolCheck(Params),
    /// Wave-number regime boundaries.
    RegimeReport(Params),
    /// Rannacher to time-changed error ratio at x = 0.
    RannacherCompare(Params),
    /// Errors of both schemes at equal cost.
    CostCompare(Params),
    /// ATM gamma error of the European call.
    BsGamma(Params),
    /// Successive-difference ratios of the American put.
    AmericanTable(Params),
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::HeatConvergence(_) => "heat_convergence",
            Experiment::OrderVsLambda(_) => "order_vs_lambda",
            Experiment::SymbolCheck(_) => "symbol_check",
            Experiment::RegimeReport(_) => "regime_report",
            Experiment::RannacherCompare(_) => "rannacher_compare",
            Experiment::CostCompare(_) => "cost_compare",
            Experiment::BsGamma(_) => "bs_gamma",
            Experiment::AmericanTable(_) => "american_table",
        }
    }

    fn params(&self) -> &Params {
        match self {
            Experiment::HeatConvergence(p)
            | Experiment::OrderVsLambda(p)
            | Experiment::SymbolCheck(p)
            | Experiment::RegimeReport(p)
            | Experiment::RannacherCompare(p)
            | Experiment::CostCompare(p)
            | Experiment::BsGamma(p)
            | Experiment::AmericanTable(p) => p,
        }
    }

    fn allowed(&self) -> &'static [&'static str] {
        const BS: &[&str] = &["lambda", "levels", "M", "sigma", "r", "K", "T", "output"];
        match self {
            Experiment::HeatConvergence(_) => &["lambda", "levels", "scheme", "startup", "output"],
            Experiment::OrderVsLambda(_) => &["lambdas", "levels", "output"],
            Experiment::SymbolCheck(_) => &["N", "lambda", "M", "output"],
            Experiment::RegimeReport(_) => &["h", "lambda", "regime_r", "output"],
            Experiment::RannacherCompare(_) => &["lambdas", "N", "output"],
            Experiment::CostCompare(_) => &["lambdas", "output"],
            Experiment::BsGamma(_) => BS,
            Experiment::AmericanTable(_) => &[
                "lambda", "levels", "M", "sigma", "r", "K", "T", "rho", "output",
            ],
        }
    }
}

/// Parameters shared by all experiments; each experiment accepts a subset.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    /// Mesh ratio k/h.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Comma-separated mesh ratios.
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,
    /// Number of refinement levels.
    #[arg(long)]
    pub levels: Option<usize>,
    /// Number of time steps.
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub steps: Option<usize>,
    /// Number of space intervals (coarsest level for refinement studies).
    #[arg(long = "M")]
    #[serde(rename = "M")]
    pub intervals: Option<usize>,
    /// Space step.
    #[arg(long)]
    pub h: Option<f64>,
    /// Exponent of the first regime boundary h^-r.
    #[arg(long = "regime-r")]
    pub regime_r: Option<f64>,
    /// cn_timechanged, cn_original, backward_euler, rannacher or rannacher_half.
    #[arg(long)]
    pub scheme: Option<String>,
    /// Rannacher start-up steps.
    #[arg(long)]
    pub startup: Option<usize>,
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Risk-free rate.
    #[arg(long)]
    pub r: Option<f64>,
    /// Strike.
    #[arg(long = "K")]
    #[serde(rename = "K")]
    pub strike: Option<f64>,
    /// Expiry in years.
    #[arg(long = "T")]
    #[serde(rename = "T")]
    pub expiry: Option<f64>,
    /// Penalty parameter.
    #[arg(long)]
    pub rho: Option<f64>,
    /// CSV destination; standard output when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Optional name check for config files.
    #[arg(skip)]
    pub experiment: Option<String>,
}

impl Params {
    fn merged(&self, file: &Params) -> Params {
        Params {
            lambda: self.lambda.or(file.lambda),
            lambdas: self.lambdas.clone().or_else(|| file.lambdas.clone()),
            levels: self.levels.or(file.levels),
            steps: self.steps.or(file.steps),
            intervals: self.intervals.or(file.intervals),
            h: self.h.or(file.h),
            regime_r: self.regime_r.or(file.regime_r),
            scheme: self.scheme.clone().or_else(|| file.scheme.clone()),
            startup: self.startup.or(file.startup),
            sigma: self.sigma.or(file.sigma),
            r: self.r.or(file.r),
            strike: self.strike.or(file.strike),
            expiry: self.expiry.or(file.expiry),
            rho: self.rho.or(file.rho),
            output: self.output.clone().or_else(|| file.output.clone()),
            experiment: file.experiment.clone(),
        }
    }

    fn set_keys(&self) -> Vec<&'static str> {
        let flags = [
            ("lambda", self.lambda.is_some()),
            ("lambdas", self.lambdas.is_some()),
            ("levels", self.levels.is_some()),
            ("N", self.steps.is_some()),
            ("M", self.intervals.is_some()),
            ("h", self.h.is_some()),
            ("regime_r", self.regime_r.is_some()),
            ("scheme", self.scheme.is_some()),
            ("startup", self.startup.is_some()),
            ("sigma", self.sigma.is_some()),
            ("r", self.r.is_some()),
            ("K", self.strike.is_some()),
            ("T", self.expiry.is_some()),
            ("rho", self.rho.is_some()),
            ("output", self.output.is_some()),
        ];
        flags.iter().filter(|f| f.1).map(|f| f.0).collect()
    }

    fn bs(&self, payoff: Payoff) -> Result<BSParams> {
        let d = BSParams::reference(payoff);
        BSParams::new(
            self.sigma.unwrap_or(d.sigma),
            self.r.unwrap_or(d.rate),
            self.strike.unwrap_or(d.strike),
            self.expiry.unwrap_or(d.expiry),
            payoff,
        )
    }
}

pub fn load_config(path: &Path) -> Result<Params> {
    let text = fs::read_to_string(path)
        .map_err(|e| invalid("config", format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| invalid("config", format!("{}: {e}", path.display())))
}

/// Acceptance band of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band {
    pub lo: f64,
    pub hi: f64,
}

impl Band {
    fn holds(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub experiment: &'static str,
    pub csv: String,
    pub summary: String,
    /// `None` when the experiment has no band.
    pub pass: Option<bool>,
    pub output: Option<PathBuf>,
}

struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    fn new(header: &[&str]) -> Result<Self> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header).map_err(csv_error)?;
        Ok(Self { writer })
    }

    fn row(&mut self, fields: &[String]) -> Result<()> {
        self.writer.write_record(fields).map_err(csv_error)
    }

    fn finish(self) -> Result<String> {
        let bytes = self
            .writer
            .into_inner()
            .map_err(|e| invalid("csv", e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| invalid("csv", e.to_string()))
    }
}

fn csv_error(e: csv::Error) -> Error {
    invalid("csv", e.to_string())
}

/// Shortest round-trip text of `v`, positional in `[1e-5, 1e16)` and
/// scientific outside it.
pub fn format_float(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || !a.is_finite() || (1e-5..1e16).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

trait Cell {
    fn cell(&self) -> String;
}

impl Cell for f64 {
    fn cell(&self) -> String {
        format_float(*self)
    }
}

impl Cell for usize {
    fn cell(&self) -> String {
        self.to_string()
    }
}

impl Cell for &str {
    fn cell(&self) -> String {
        self.to_string()
    }
}

fn fields<const N: usize>(v: [&dyn Cell; N]) -> Vec<String> {
    v.iter().map(|x| x.cell()).collect()
}

fn pass_word(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

fn parse_scheme(name: &str, startup: usize) -> Result<SchemeVariant> {
    Ok(match name {
        "cn_timechanged" => SchemeVariant::CnTimeChanged,
        "cn_original" => SchemeVariant::CnOriginal,
        "backward_euler" => SchemeVariant::BackwardEuler,
        "rannacher" => SchemeVariant::Rannacher {
            startup,
            half_steps: false,
        },
        "rannacher_half" => SchemeVariant::Rannacher {
            startup,
            half_steps: true,
        },
        other => return Err(invalid("scheme", format!("unknown scheme {other:?}"))),
    })
}

fn positive(name: &'static str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(invalid(name, format!("must be positive, got {v}")))
    }
}

fn at_least(name: &'static str, v: usize, min: usize) -> Result<usize> {
    if v >= min {
        Ok(v)
    } else {
        Err(invalid(name, format!("must be at least {min}, got {v}")))
    }
}

pub const DEFAULT_LAMBDAS: [f64; 7] = [
    0.4,
    0.5,
    0.6,
    std::f64::consts::FRAC_1_SQRT_2,
    0.9,
    1.0,
    1.25,
];

fn rannacher_lambdas() -> Vec<f64> {
    let mut v: Vec<f64> = (1..=7).map(|i| i as f64 / 10.0).collect();
    v.push(std::f64::consts::FRAC_1_SQRT_2);
    v
}

fn cost_lambdas() -> Vec<f64> {
    (0..=18).map(|i| (30 + 5 * i) as f64 / 100.0).collect()
}

/// Parse, merge and validate, then run one experiment.
pub fn run(cli: &Cli) -> Result<Outcome> {
    let file = match &cli.config {
        Some(path) => load_config(path)?,
        None => Params::default(),
    };
    let exp = &cli.experiment;
    if let Some(name) = &file.experiment {
        if name != exp.name() {
            return Err(invalid(
                "experiment",
                format!("config is for {name:?}, command is {:?}", exp.name()),
            ));
        }
    }
    let p = exp.params().merged(&file);
    let allowed = exp.allowed();
    if let Some(key) = p.set_keys().into_iter().find(|k| !allowed.contains(k)) {
        return Err(invalid(key, format!("not a parameter of {}", exp.name())));
    }
    let (csv, summary, pass) = match exp {
        Experiment::HeatConvergence(_) => heat_convergence(&p)?,
        Experiment::OrderVsLambda(_) => order_vs_lambda(&p)?,
        Experiment::SymbolCheck(_) => symbol_check(&p)?,
        Experiment::RegimeReport(_) => regime_report(&p)?,
        Experiment::RannacherCompare(_) => rannacher_compare(&p)?,
        Experiment::CostCompare(_) => cost_compare(&p)?,
        Experiment::BsGamma(_) => bs_gamma(&p)?,
        Experiment::AmericanTable(_) => american_table(&p)?,
    };
    Ok(Outcome {
        experiment: exp.name(),
        csv,
        summary: format!("{} {summary}", exp.name()),
        pass,
        output: p.output,
    })
}

type Run = (String, String, Option<bool>);

fn heat_convergence(p: &Params) -> Result<Run> {
    let lambda = positive("lambda", p.lambda.unwrap_or(0.5))?;
    let levels = at_least("levels", p.levels.unwrap_or(6), 3)?;
    let startup = p.startup.unwrap_or(2);
    let variant = parse_scheme(p.scheme.as_deref().unwrap_or("cn_timechanged"), startup)?;
    SchemeSpec::new(variant, lambda)?;
    let report = refine_study(&Problem::Heat { variant }, lambda, levels)?;
    let mut t = Table::new(&["level", "h", "k", "max_error"])?;
    for (i, l) in report.levels.iter().enumerate() {
        t.row(&fields([&i, &l.h, &l.k, &l.error]))?;
    }
    let order = report.fitted_order;
    let (summary, pass) = if variant == SchemeVariant::CnTimeChanged {
        let th = theoretical_order(lambda);
        let band = Band {
            lo: th - 0.3,
            hi: th + 0.3,
        };
        let ok = band.holds(order);
        (
            format!(
                "lambda={lambda} fitted_order={order} band={band} {}",
                pass_word(ok)
            ),
            Some(ok),
        )
    } else {
        (format!("lambda={lambda} fitted_order={order}"), None)
    };
    Ok((t.finish()?, summary, pass))
}

fn order_vs_lambda(p: &Params) -> Result<Run> {
    let lambdas = p
        .lambdas
        .clone()
        .unwrap_or_else(|| DEFAULT_LAMBDAS.to_vec());
    for &l in &lambdas {
        positive("lambdas", l)?;
    }
    let levels = at_least("levels", p.levels.unwrap_or(6), 3)?;
    let curve = order_curve(&lambdas, levels)?;
    let mut t = Table::new(&["lambda", "fitted_order", "theoretical_order"])?;
    let mut worst = 0.0f64;
    for c in &curve {
        t.row(&fields([&c.lambda, &c.fitted_order, &c.theoretical_order]))?;
        worst = worst.max((c.fitted_order - c.theoretical_order).abs());
    }
    let ok = worst <= 0.3;
    let summary = format!("max_deviation={worst} band=[0, 0.3] {}", pass_word(ok));
    Ok((t.finish()?, summary, Some(ok)))
}

fn symbol_check(p: &Params) -> Result<Run> {
    let steps = at_least("N", p.steps.unwrap_or(200), 1)?;
    let lambda = positive("lambda", p.lambda.unwrap_or(0.5))?;
    let intervals = at_least("M", p.intervals.unwrap_or(256), 4)?;
    let samples = periodic_dft_check(steps, lambda, intervals)?;
    let mut t = Table::new(&["s", "xi", "symbol", "dft", "rel_err"])?;
    let mut worst = 0.0f64;
    for d in &samples {
        t.row(&fields([&d.s, &d.xi, &d.symbol, &d.dft, &d.rel_err]))?;
        worst = worst.max(d.rel_err);
    }
    let ok = worst <= 1e-10;
    let summary = format!(
        "max_rel_err={} band=[0, 1e-10] {}",
        format_float(worst),
        pass_word(ok)
    );
    Ok((t.finish()?, summary, Some(ok)))
}

fn regime_report(p: &Params) -> Result<Run> {
    let h = positive("h", p.h.unwrap_or(0.01))?;
    let lambda = positive("lambda", p.lambda.unwrap_or(0.5))?;
    let r = p.regime_r.unwrap_or(DEFAULT_R);
    let part = regime_partition(h, lambda, r)?;
    let mut t = Table::new(&["regime", "s_min", "s_max", "xi_min", "xi_max"])?;
    for b in part.bounds() {
        t.row(&fields([
            &b.regime.label(),
            &b.s_min,
            &b.s_max,
            &b.xi_min,
            &b.xi_max,
        ]))?;
    }
    let summary = format!(
        "h={h} lambda={lambda} N={} m_star={}",
        part.steps, part.m_star
    );
    Ok((t.finish()?, summary, None))
}

/// Ratio of the x = 0 errors of Rannacher (two start-up steps as four
/// half-steps) and the time-changed scheme, at `T = 1` with `steps` steps.
pub fn measured_rannacher_ratio(lambda: f64, steps: usize) -> Result<f64> {
    let tg = build_time_grid(1.0, steps)?;
    let grid = symmetric_grid(10.0, tg.k() / lambda)?;
    let exact = exact_heat(0.0, 1.0)?;
    let tc = SchemeSpec::new(SchemeVariant::CnTimeChanged, lambda)?;
    let ra = SchemeSpec::new(
        SchemeVariant::Rannacher {
            startup: 2,
            half_steps: true,
        },
        lambda,
    )?;
    let e_tc = solve_heat(&tc, &grid, &tg)?.at(0.0)? - exact;
    let e_ra = solve_heat(&ra, &grid, &tg)?.at(0.0)? - exact;
    if e_tc == 0.0 {
        return Err(Error::ZeroDenominator);
    }
    Ok(e_ra / e_tc)
}

fn rannacher_compare(p: &Params) -> Result<Run> {
    use rayon::prelude::*;
    let lambdas = p.lambdas.clone().unwrap_or_else(rannacher_lambdas);
    let steps = at_least("N", p.steps.unwrap_or(800), 4)?;
    let analytic: Vec<f64> = lambdas
        .iter()
        .map(|&l| error_ratio_rannacher_tc(l))
        .collect::<Result<_>>()?;
    let measured: Vec<f64> = lambdas
        .par_iter()
        .map(|&l| measured_rannacher_ratio(l, steps))
        .collect::<Result<_>>()?;
    let mut t = Table::new(&["lambda", "ratio_analytic", "ratio_measured"])?;
    for ((l, a), m) in lambdas.iter().zip(&analytic).zip(&measured) {
        t.row(&fields([l, a, m]))?;
    }
    let limit = error_ratio_rannacher_tc(1e-3)?;
    let critical = error_ratio_rannacher_tc(std::f64::consts::FRAC_1_SQRT_2)?;
    let ok = (limit - 1.0).abs() <= 1e-5 && (critical - 1.5).abs() <= 1e-12;
    let summary = format!(
        "ratio(0.001)={limit} ratio(1/sqrt2)={critical} {}",
        pass_word(ok)
    );
    Ok((t.finish()?, summary, Some(ok)))
}

fn cost_compare(p: &Params) -> Result<Run> {
    let lambdas = p.lambdas.clone().unwrap_or_else(cost_lambdas);
    for &l in &lambdas {
        positive("lambdas", l)?;
    }
    let mut t = Table::new(&["lambda", "e_r", "e_tc"])?;
    for &l in &lambdas {
        let c = cost_constrained_errors(l);
        t.row(&fields([&l, &c.e_rannacher, &c.e_timechanged]))?;
    }
    let c = cost_constrained_errors(std::f64::consts::FRAC_1_SQRT_2);
    let best_r = cost_constrained_errors(c.lambda_star_rannacher).e_rannacher;
    let best_tc = cost_constrained_errors(c.lambda_star_timechanged).e_timechanged;
    let ok = (c.lambda_star_rannacher - 0.7559).abs() <= 5e-4 && best_tc < best_r;
    let summary = format!(
        "lambda_star_r={} e_r_min={best_r} lambda_star_tc={} e_tc_min={best_tc} {}",
        c.lambda_star_rannacher,
        c.lambda_star_timechanged,
        pass_word(ok)
    );
    Ok((t.finish()?, summary, Some(ok)))
}

fn bs_gamma(p: &Params) -> Result<Run> {
    let lambda = positive("lambda", p.lambda.unwrap_or(0.0125))?;
    let levels = at_least("levels", p.levels.unwrap_or(6), 3)?;
    let base = at_least("M", p.intervals.unwrap_or(200), 2)?;
    let params = p.bs(Payoff::Call)?;
    let report = refine_study(
        &Problem::BsGamma {
            params,
            base_intervals: base,
        },
        lambda,
        levels,
    )?;
    let mut t = Table::new(&["level", "h", "gamma_error"])?;
    for (i, l) in report.levels.iter().enumerate() {
        t.row(&fields([&i, &l.h, &l.error]))?;
    }
    let predicted = predicted_bs_order(lambda, &params);
    let band = if predicted >= 2.0 {
        Band { lo: 1.7, hi: 2.3 }
    } else {
        Band {
            lo: predicted - 0.3,
            hi: predicted + 0.4,
        }
    };
    let order = report.fitted_order;
    let ok = band.holds(order);
    let summary = format!(
        "lambda={lambda} fitted_order={order} predicted={predicted} band={band} {}",
        pass_word(ok)
    );
    Ok((t.finish()?, summary, Some(ok)))
}

fn american_table(p: &Params) -> Result<Run> {
    let lambda = positive("lambda", p.lambda.unwrap_or(0.0125))?;
    let levels = at_least("levels", p.levels.unwrap_or(6), 3)?;
    let base = at_least("M", p.intervals.unwrap_or(800), 2)?;
    let params = p.bs(Payoff::Put)?;
    let mut cfg = PenaltyConfig::for_strike(params.strike);
    if let Some(rho) = p.rho {
        cfg = PenaltyConfig::new(rho, cfg.tol, cfg.max_iter)?;
    }
    let lv = american_levels(&params, REFERENCE_S_MAX, lambda, base, levels, &cfg)?;
    let rows = ratio_rows(&lv)?;
    let mut t = Table::new(&["M", "N", "ratio_value", "ratio_delta", "ratio_gamma"])?;
    for r in &rows {
        t.row(&fields([
            &r.intervals,
            &r.steps,
            &r.ratio_value,
            &r.ratio_delta,
            &r.ratio_gamma,
        ]))?;
    }
    let predicted = predicted_bs_order(lambda, &params);
    let (column, band, values): (&str, Band, Vec<f64>) = if lambda <= critical_lambda(&params) {
        (
            "value",
            Band { lo: 3.8, hi: 4.1 },
            rows.iter().map(|r| r.ratio_value).collect(),
        )
    } else if predicted <= 1.0 {
        let c = predicted.exp2();
        (
            "gamma",
            Band {
                lo: 0.95 * c,
                hi: 1.1 * c,
            },
            rows.iter().map(|r| r.ratio_gamma).collect(),
        )
    } else {
        let summary = format!("lambda={lambda} rows={}", rows.len());
        return Ok((t.finish()?, summary, None));
    };
    let ok = values.iter().all(|&v| band.holds(v));
    let summary = format!(
        "lambda={lambda} {column}_ratios={values:?} band={band} {}",
        pass_word(ok)
    );
    Ok((t.finish()?, summary, Some(ok)))
}

/// Entry point of the binary; returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match run(&cli) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    let written = match &outcome.output {
        Some(path) => fs::write(path, &outcome.csv),
        None => std::io::stdout().write_all(outcome.csv.as_bytes()),
    };
    if let Err(e) = written {
        eprintln!("error: writing output: {e}");
        return 1;
    }
    if outcome.output.is_some() {
        println!("{}", outcome.summary);
    } else {
        eprintln!("{}", outcome.summary);
    }
    match outcome.pass {
        Some(false) => 2,
        _ => 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("tccn").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn cost_compare_defaults() {
        let o = run(&parse(&["cost_compare"])).unwrap();
        assert_eq!(o.pass, Some(true));
        let mut lines = o.csv.lines();
        assert_eq!(lines.next(), Some("lambda,e_r,e_tc"));
        assert!(lines.next().unwrap().starts_with("0.3,"));
        assert_eq!(o.csv.lines().count(), 20);
    }

    #[test]
    fn foreign_parameter_rejected() {
        let err = run(&parse(&["cost_compare", "--rho", "5"])).unwrap_err();
        assert!(err.to_string().contains("rho"));
    }

    #[test]
    fn float_cells_round_trip() {
        for v in [
            0.0,
            1.5,
            0.1 + 0.2,
            1e-5,
            9.99e-6,
            1e-300,
            -2.5e-40,
            1e16,
            123456.789,
        ] {
            let s = format_float(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
        assert_eq!(format_float(0.25), "0.25");
        assert_eq!(format_float(1.3e-13), "1.3e-13");
    }

    #[test]
    fn scheme_names() {
        assert!(parse_scheme("cn_original", 2).is_ok());
        assert!(parse_scheme("crank", 2).is_err());
    }

    #[test]
    fn flags_parse() {
        let cli = parse(&["symbol_check", "--N", "20", "--lambda", "0.5", "--M", "64"]);
        let p = cli.experiment.params();
        assert_eq!(p.steps, Some(20));
        assert_eq!(p.intervals, Some(64));
        let cli = parse(&["order_vs_lambda", "--lambdas", "0.4,0.5"]);
        assert_eq!(cli.experiment.params().lambdas, Some(vec![0.4, 0.5]));
    }

    #[test]
    fn config_merge_prefers_flags() {
        let file: Params = toml::from_str("lambda = 0.25\nN = 40\nlambdas = [0.1]").unwrap();
        let flags = Params {
            lambda: Some(0.5),
            ..Params::default()
        };
        let m = flags.merged(&file);
        assert_eq!(m.lambda, Some(0.5));
        assert_eq!(m.steps, Some(40));
        assert_eq!(m.lambdas, Some(vec![0.1]));
        assert!(toml::from_str::<Params>("bogus = 1").is_err());
    }
}
