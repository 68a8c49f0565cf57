//! American put by the penalty method on the time-changed scheme.

use rayon::prelude::*;

use crate::blackscholes::{
    atm_quote, bs_grids, bs_operator, payoff_field, AtmQuote, BSParams, Payoff,
};
use crate::error::{invalid, Error, Result};
use crate::heat::SolutionField;
use crate::mesh::{SpaceGrid, TimeGrid};
use crate::tridiag::{solve_tridiagonal, ThreePointOperator};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyConfig {
    pub rho: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl PenaltyConfig {
    /// `rho = 0` turns the penalty off.
    pub fn new(rho: f64, tol: f64, max_iter: usize) -> Result<Self> {
        if !(rho >= 0.0 && rho.is_finite()) {
            return Err(invalid("rho", format!("must be non-negative, got {rho}")));
        }
        if !(tol > 0.0) {
            return Err(invalid("tol", format!("must be positive, got {tol}")));
        }
        if max_iter == 0 {
            return Err(invalid("max_iter", "must be at least 1"));
        }
        Ok(Self { rho, tol, max_iter })
    }

    /// `rho = 1e6`, `tol = 1e-8 K`, 50 iterations.
    pub fn for_strike(strike: f64) -> Self {
        Self {
            rho: 1e6,
            tol: 1e-8 * strike,
            max_iter: 50,
        }
    }
}

pub fn payoff_put(s: f64, strike: f64) -> f64 {
    (strike - s).max(0.0)
}

fn put_params(p: &BSParams) -> BSParams {
    BSParams {
        payoff: Payoff::Put,
        ..*p
    }
}

/// Active-set solve of one penalised step. Returns the new values and the
/// number of linear solves used.
fn penalised_solve(
    field: &SolutionField,
    op: &ThreePointOperator,
    c_exp: f64,
    c_imp: f64,
    strike: f64,
    cfg: &PenaltyConfig,
) -> Result<(Vec<f64>, usize)> {
    let grid = field.grid();
    let m = grid.intervals();
    let (left, right) = (strike, 0.0);
    let base = op.assemble_dirichlet(field.values(), c_exp, c_imp, left, right)?;
    let payoff: Vec<f64> = (1..m).map(|j| payoff_put(grid.node(j), strike)).collect();
    let old = &field.values()[1..m];
    let mut active: Vec<bool> = payoff.iter().zip(old).map(|(g, v)| g - v > 0.0).collect();
    let mut prev: Option<Vec<f64>> = None;
    for iter in 1..=cfg.max_iter {
        let mut sys = base.clone();
        if cfg.rho > 0.0 {
            for (i, &on) in active.iter().enumerate() {
                if on {
                    sys.diag[i] += cfg.rho;
                    sys.rhs[i] += cfg.rho * payoff[i];
                }
            }
        }
        let x = solve_tridiagonal(&sys)?;
        let next: Vec<bool> = payoff.iter().zip(&x).map(|(g, v)| g - v > 0.0).collect();
        let settled = cfg.rho == 0.0
            || next == active
            || prev.as_ref().is_some_and(|p| {
                p.iter()
                    .zip(&x)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
                    <= cfg.tol
            });
        if settled {
            let mut values = Vec::with_capacity(m + 1);
            values.push(left);
            values.extend_from_slice(&x);
            values.push(right);
            return Ok((values, iter));
        }
        active = next;
        prev = Some(x);
    }
    Err(Error::PenaltyIteration(cfg.max_iter))
}

/// One time-changed Crank-Nicolson step of the penalised put equation, with
/// `V(0) = K` and `V(S_max) = 0`.
pub fn penalty_step(
    field: &SolutionField,
    t_tilde_n: f64,
    t_tilde_np1: f64,
    p: &BSParams,
    cfg: &PenaltyConfig,
) -> Result<SolutionField> {
    if !(t_tilde_np1 > t_tilde_n && t_tilde_n >= 0.0) {
        return Err(invalid("t~", "need 0 <= t~_n < t~_{n+1}"));
    }
    let k = t_tilde_np1 - t_tilde_n;
    let op = bs_operator(field.grid(), p, k * t_tilde_np1);
    let (values, _) = penalised_solve(field, &op, k * t_tilde_n, k * t_tilde_np1, p.strike, cfg)?;
    SolutionField::new(*field.grid(), values, field.level() + 1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmericanSolution {
    pub field: SolutionField,
    /// Largest number of linear solves taken by any step.
    pub max_iterations: usize,
}

pub fn solve_american_put(
    p: &BSParams,
    grid: &SpaceGrid,
    tg: &TimeGrid,
    cfg: &PenaltyConfig,
) -> Result<SolutionField> {
    solve_american_put_traced(p, grid, tg, cfg).map(|s| s.field)
}

pub fn solve_american_put_traced(
    p: &BSParams,
    grid: &SpaceGrid,
    tg: &TimeGrid,
    cfg: &PenaltyConfig,
) -> Result<AmericanSolution> {
    let p = put_params(p);
    if grid.x_min() != 0.0 {
        return Err(Error::InvalidGrid(format!(
            "S grid must start at 0, got {}",
            grid.x_min()
        )));
    }
    grid.index_of(p.strike).ok_or(Error::OffGrid(p.strike))?;
    let k = tg.k();
    let op = bs_operator(grid, &p, k * tg.transformed_time(tg.steps()));
    let mut field = payoff_field(grid, &p)?;
    let mut worst = 0;
    for n in 0..tg.steps() {
        let (t0, t1) = (tg.transformed_time(n), tg.transformed_time(n + 1));
        let (values, iters) = penalised_solve(&field, &op, k * t0, k * t1, p.strike, cfg)?;
        worst = worst.max(iters);
        field = SolutionField::new(*grid, values, n + 1)?;
    }
    Ok(AmericanSolution {
        field,
        max_iterations: worst,
    })
}

/// `(coarse - mid) / (mid - fine)`.
pub fn successive_ratio(coarse: f64, mid: f64, fine: f64) -> Result<f64> {
    let den = mid - fine;
    if den == 0.0 {
        return Err(Error::ZeroDenominator);
    }
    Ok((coarse - mid) / den)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableRow {
    pub intervals: usize,
    pub steps: usize,
    pub ratio_value: f64,
    pub ratio_delta: f64,
    pub ratio_gamma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Level {
    pub intervals: usize,
    pub steps: usize,
    pub quote: AtmQuote,
    pub max_iterations: usize,
}

/// ATM quotes on `levels` grids with `base_intervals * 2^i` steps in S.
pub fn american_levels(
    p: &BSParams,
    s_max: f64,
    lambda: f64,
    base_intervals: usize,
    levels: usize,
    cfg: &PenaltyConfig,
) -> Result<Vec<Level>> {
    (0..levels)
        .into_par_iter()
        .map(|i| {
            let (grid, tg) = bs_grids(p, s_max, base_intervals << i, lambda)?;
            let sol = solve_american_put_traced(p, &grid, &tg, cfg)?;
            Ok(Level {
                intervals: grid.intervals(),
                steps: tg.steps(),
                quote: atm_quote(&sol.field, p.strike)?,
                max_iterations: sol.max_iterations,
            })
        })
        .collect()
}

/// Ratio rows for each consecutive triple of levels, labelled by the finest
/// grid of the triple.
pub fn ratio_rows(levels: &[Level]) -> Result<Vec<TableRow>> {
    if levels.len() < 3 {
        return Err(Error::TooFewLevels {
            need: 3,
            got: levels.len(),
        });
    }
    levels
        .windows(3)
        .map(|w| {
            let (a, b, c) = (w[0].quote, w[1].quote, w[2].quote);
            Ok(TableRow {
                intervals: w[2].intervals,
                steps: w[2].steps,
                ratio_value: successive_ratio(a.value, b.value, c.value)?,
                ratio_delta: successive_ratio(a.delta, b.delta, c.delta)?,
                ratio_gamma: successive_ratio(a.gamma, b.gamma, c.gamma)?,
            })
        })
        .collect()
}
