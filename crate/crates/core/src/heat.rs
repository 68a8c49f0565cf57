//! Heat equation `u_t = u_xx / 2` with Dirac initial data.

use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::mesh::{
    build_time_grid, symmetric_grid, SchemeSpec, SchemeVariant, SpaceGrid, TimeGrid,
};
use crate::tridiag::{
    heat_operator, original_step_with, theta_step, timechanged_step_with, Closure,
};

/// Grid values at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionField {
    grid: SpaceGrid,
    values: Vec<f64>,
    level: usize,
}

impl SolutionField {
    pub fn new(grid: SpaceGrid, values: Vec<f64>, level: usize) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "field has {} values for {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid(format!("non-finite value at node {j}")));
        }
        Ok(Self {
            grid,
            values,
            level,
        })
    }

    pub fn grid(&self) -> &SpaceGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn level(&self) -> usize {
        self.level
    }

    /// Value at the node located at `x`.
    pub fn at(&self, x: f64) -> Result<f64> {
        self.grid
            .index_of(x)
            .map(|j| self.values[j])
            .ok_or(Error::OffGrid(x))
    }

    /// `sum_j h U_j` over the distinct nodes of a periodic grid.
    pub fn periodic_mass(&self) -> f64 {
        let m = self.grid.intervals();
        self.grid.h() * self.values[..m].iter().sum::<f64>()
    }
}

/// `1/h` at the origin, zero elsewhere, so that `sum_j h U_j = 1`.
pub fn dirac_initial(grid: &SpaceGrid) -> Result<SolutionField> {
    let j0 = grid.index_of(0.0).ok_or(Error::OffGrid(0.0))?;
    let mut values = vec![0.0; grid.len()];
    values[j0] = 1.0 / grid.h();
    if j0 == 0 {
        // periodic images of the origin
        values[grid.intervals()] = values[0];
    }
    SolutionField::new(*grid, values, 0)
}

pub fn exact_heat(x: f64, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(invalid("t", format!("must be positive, got {t}")));
    }
    Ok((-x * x / (2.0 * t)).exp() / (2.0 * PI * t).sqrt())
}

pub fn max_norm_error(field: &SolutionField, t: f64) -> Result<f64> {
    let mut err = 0.0f64;
    for (x, u) in field.grid().nodes().zip(field.values()) {
        err = err.max((u - exact_heat(x, t)?).abs());
    }
    Ok(err)
}

fn check_lambda(scheme: &SchemeSpec, grid: &SpaceGrid, step: f64) -> Result<()> {
    let ratio = step / grid.h();
    if (ratio - scheme.lambda).abs() > 1e-12 * scheme.lambda {
        return Err(Error::LambdaMismatch {
            scheme: scheme.lambda,
            grids: ratio,
        });
    }
    Ok(())
}

/// Solve from Dirac data to `t = T` with homogeneous Dirichlet boundaries.
pub fn solve_heat(scheme: &SchemeSpec, grid: &SpaceGrid, tg: &TimeGrid) -> Result<SolutionField> {
    solve_heat_with(scheme, grid, tg, Closure::ZERO)
}

/// Solve from Dirac data to `t = T`.
///
/// `CnTimeChanged` marches `N` uniform steps of `k = sqrt(T)/N` in `t~`; the
/// other variants march `N` uniform steps of `T/N` in original time, with
/// `Rannacher` using backward Euler for the first `startup` steps.
/// The mesh ratio is checked against the step of the marching variable.
pub fn solve_heat_with(
    scheme: &SchemeSpec,
    grid: &SpaceGrid,
    tg: &TimeGrid,
    closure: Closure,
) -> Result<SolutionField> {
    let n_steps = tg.steps();
    let op = heat_operator(grid.intervals(), closure);
    let mut field = dirac_initial(grid)?;
    match scheme.variant {
        SchemeVariant::CnTimeChanged => {
            check_lambda(scheme, grid, tg.k())?;
            for n in 0..n_steps {
                field = timechanged_step_with(&op, &field, n, scheme.lambda, closure)?;
            }
        }
        variant => {
            check_lambda(scheme, grid, tg.expiry() / n_steps as f64)?;
            let (implicit_steps, halved) = match variant {
                SchemeVariant::BackwardEuler => (n_steps, false),
                SchemeVariant::Rannacher {
                    startup,
                    half_steps,
                } => (startup.min(n_steps), half_steps),
                _ => (0, false),
            };
            for n in 0..n_steps {
                if n >= implicit_steps {
                    field = original_step_with(&op, &field, scheme.lambda, 0.5, closure)?;
                } else if halved {
                    for _ in 0..2 {
                        field = original_step_with(&op, &field, 0.5 * scheme.lambda, 1.0, closure)?;
                    }
                } else {
                    field = original_step_with(&op, &field, scheme.lambda, 1.0, closure)?;
                }
            }
        }
    }
    Ok(field)
}

/// Crank-Nicolson in original time on the graded nodes `t_m = original_time(m)`,
/// with the explicit and implicit halves weighted by `t~_n` and `t~_{n+1}`.
///
/// Step lengths `t_{n+1} - t_n = (2n + 1) k^2` and weights
/// `t~_n / (t~_n + t~_{n+1}) = n / (2n + 1)` are formed from the node index,
/// since subtracting the rounded nodes loses about `log2(n)` bits.
///
/// Algebraically this is the time-changed scheme; it is computed here from the
/// original-time steps so the two parameterisations can be compared.
pub fn solve_heat_graded_original(
    grid: &SpaceGrid,
    tg: &TimeGrid,
    closure: Closure,
) -> Result<SolutionField> {
    let op = heat_operator(grid.intervals(), closure);
    let h2 = grid.h() * grid.h();
    let mut field = dirac_initial(grid)?;
    for n in 0..tg.steps() {
        let (dt, w) = graded_step(tg, n);
        field = theta_step(&field, &op, dt * w / h2, dt * (1.0 - w) / h2, closure)?;
    }
    Ok(field)
}

/// Step `n` of [`solve_heat_graded_original`] applied to `field`.
pub fn graded_original_step(
    field: &SolutionField,
    tg: &TimeGrid,
    n: usize,
    closure: Closure,
) -> Result<SolutionField> {
    let grid = field.grid();
    let op = heat_operator(grid.intervals(), closure);
    let h2 = grid.h() * grid.h();
    let (dt, w) = graded_step(tg, n);
    theta_step(field, &op, dt * w / h2, dt * (1.0 - w) / h2, closure)
}

/// Length and explicit weight of step `n` of the graded mesh `t_m = (m k)^2`.
pub fn graded_step(tg: &TimeGrid, n: usize) -> (f64, f64) {
    let k = tg.k();
    let odd = (2 * n + 1) as f64;
    (odd * k * k, n as f64 / odd)
}

/// Grids for refinement level `level` of the heat experiments: `T = 1`,
/// `N = 100 * 2^level`, `h = k / lambda`, domain as close to `[-10, 10]` as an
/// even number of steps of `h` allows.
pub fn experiment_grids(lambda: f64, level: u32) -> Result<(SpaceGrid, TimeGrid)> {
    let tg = build_time_grid(1.0, 100usize << level)?;
    let grid = symmetric_grid(10.0, tg.k() / lambda)?;
    Ok((grid, tg))
}
