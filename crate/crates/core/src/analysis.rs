//! Convergence-order fits and refinement studies.

use rayon::prelude::*;

use crate::american::{american_levels, PenaltyConfig};
use crate::blackscholes::{
    atm_quote, bs_analytic, bs_grids, solve_european, BSParams, Payoff, REFERENCE_S_MAX,
};
use crate::error::{invalid, Error, Result};
use crate::heat::{experiment_grids, max_norm_error, solve_heat};
use crate::mesh::{SchemeSpec, SchemeVariant};
use crate::symbol::theoretical_order;

pub const DEFAULT_FIT_LEVELS: usize = 3;

/// Least-squares slope of `ln(error)` against `ln(h)` over the `finest`
/// smallest-`h` entries of `levels`.
pub fn fit_order(levels: &[(f64, f64)], finest: usize) -> Result<f64> {
    let finest = finest.max(3);
    if levels.len() < finest {
        return Err(Error::TooFewLevels {
            need: finest,
            got: levels.len(),
        });
    }
    let mut sorted = levels.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let pts: Vec<(f64, f64)> = sorted[..finest]
        .iter()
        .enumerate()
        .map(|(i, &(h, e))| {
            if !(e > 0.0 && e.is_finite()) {
                return Err(Error::BadError(i));
            }
            if !(h > 0.0) {
                return Err(invalid("h", format!("must be positive, got {h}")));
            }
            Ok((h.ln(), e.ln()))
        })
        .collect::<Result<_>>()?;
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Ok(sxy / sxx)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelError {
    pub h: f64,
    pub k: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub lambda: f64,
    pub levels: Vec<LevelError>,
    pub fitted_order: f64,
    /// `error[i] / error[i + 1]`.
    pub ratios: Vec<f64>,
}

impl ConvergenceReport {
    pub fn from_levels(lambda: f64, levels: Vec<LevelError>, finest: usize) -> Result<Self> {
        let pairs: Vec<(f64, f64)> = levels.iter().map(|l| (l.h, l.error)).collect();
        let fitted_order = fit_order(&pairs, finest)?;
        let ratios = levels.windows(2).map(|w| w[0].error / w[1].error).collect();
        Ok(Self {
            lambda,
            levels,
            fitted_order,
            ratios,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Problem {
    /// Max-norm error at `t = 1` against the heat kernel, `N = 100 * 2^level`.
    Heat { variant: SchemeVariant },
    /// ATM gamma error against the closed form, `M = base * 2^level`.
    BsGamma {
        params: BSParams,
        base_intervals: usize,
    },
    /// ATM value differences between successive levels.
    American {
        params: BSParams,
        base_intervals: usize,
        penalty: PenaltyConfig,
    },
}

impl Problem {
    pub fn heat() -> Self {
        Problem::Heat {
            variant: SchemeVariant::CnTimeChanged,
        }
    }

    pub fn bs_gamma() -> Self {
        Problem::BsGamma {
            params: BSParams::reference(Payoff::Call),
            base_intervals: 200,
        }
    }

    pub fn american() -> Self {
        let params = BSParams::reference(Payoff::Put);
        Problem::American {
            params,
            base_intervals: 800,
            penalty: PenaltyConfig::for_strike(params.strike),
        }
    }
}

pub fn refine_study(problem: &Problem, lambda: f64, levels: usize) -> Result<ConvergenceReport> {
    refine_study_with(problem, lambda, levels, DEFAULT_FIT_LEVELS)
}

pub fn refine_study_with(
    problem: &Problem,
    lambda: f64,
    levels: usize,
    finest: usize,
) -> Result<ConvergenceReport> {
    let rows = match *problem {
        Problem::Heat { variant } => {
            let scheme = SchemeSpec::new(variant, lambda)?;
            (0..levels as u32)
                .into_par_iter()
                .map(|level| {
                    let (grid, tg) = experiment_grids(lambda, level)?;
                    let field = solve_heat(&scheme, &grid, &tg)?;
                    Ok(LevelError {
                        h: grid.h(),
                        k: tg.k(),
                        error: max_norm_error(&field, tg.expiry())?,
                    })
                })
                .collect::<Result<Vec<_>>>()?
        }
        Problem::BsGamma {
            params,
            base_intervals,
        } => {
            let exact = bs_analytic(params.strike, params.expiry, &params)?.gamma;
            (0..levels)
                .into_par_iter()
                .map(|level| {
                    let (grid, tg) =
                        bs_grids(&params, REFERENCE_S_MAX, base_intervals << level, lambda)?;
                    let field = solve_european(&params, &grid, &tg)?;
                    Ok(LevelError {
                        h: grid.h(),
                        k: tg.k(),
                        error: (atm_quote(&field, params.strike)?.gamma - exact).abs(),
                    })
                })
                .collect::<Result<Vec<_>>>()?
        }
        Problem::American {
            params,
            base_intervals,
            penalty,
        } => {
            let lv = american_levels(
                &params,
                REFERENCE_S_MAX,
                lambda,
                base_intervals,
                levels,
                &penalty,
            )?;
            lv.windows(2)
                .map(|w| LevelError {
                    h: REFERENCE_S_MAX / w[1].intervals as f64,
                    k: params.expiry.sqrt() / w[1].steps as f64,
                    error: (w[0].quote.value - w[1].quote.value).abs(),
                })
                .collect()
        }
    };
    ConvergenceReport::from_levels(lambda, rows, finest)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderPoint {
    pub lambda: f64,
    pub fitted_order: f64,
    pub theoretical_order: f64,
}

/// Fitted heat orders of the time-changed scheme for each `lambda`.
pub fn order_curve(lambdas: &[f64], levels: usize) -> Result<Vec<OrderPoint>> {
    lambdas
        .par_iter()
        .map(|&lambda| {
            let report = refine_study(&Problem::heat(), lambda, levels)?;
            Ok(OrderPoint {
                lambda,
                fitted_order: report.fitted_order,
                theoretical_order: theoretical_order(lambda),
            })
        })
        .collect()
}
