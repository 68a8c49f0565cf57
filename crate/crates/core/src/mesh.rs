//! Space and time grids, and the correspondence between uniform steps in the
//! square-root time variable and the graded steps they induce in original time.

use crate::error::{invalid, Error, Result};

/// Uniform 1-D mesh with `intervals + 1` nodes on `[x_min, x_max]`.
///
/// Only the endpoints and the interval count are stored; the spacing is
/// derived, so halving the spacing is exactly doubling `intervals`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceGrid {
    x_min: f64,
    x_max: f64,
    intervals: usize,
}

impl SpaceGrid {
    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    /// Number of intervals `M`.
    pub fn intervals(&self) -> usize {
        self.intervals
    }

    /// Number of nodes, `M + 1`.
    pub fn len(&self) -> usize {
        self.intervals + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn h(&self) -> f64 {
        (self.x_max - self.x_min) / self.intervals as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        if j == self.intervals {
            return self.x_max;
        }
        self.x_min + j as f64 * self.h()
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.intervals).map(move |j| self.node(j))
    }

    /// Index of the node at `x`, if `x` lies on the grid (to within 1e-9 h).
    pub fn index_of(&self, x: f64) -> Option<usize> {
        let h = self.h();
        let pos = (x - self.x_min) / h;
        let j = pos.round();
        if j < 0.0 || j > self.intervals as f64 {
            return None;
        }
        let j = j as usize;
        ((self.node(j) - x).abs() <= 1e-9 * h).then_some(j)
    }

    /// The grid with every interval split in two.
    pub fn refined(&self) -> SpaceGrid {
        SpaceGrid {
            intervals: 2 * self.intervals,
            ..*self
        }
    }
}

pub fn build_space_grid(x_min: f64, x_max: f64, intervals: usize) -> Result<SpaceGrid> {
    if !x_min.is_finite() || !x_max.is_finite() {
        return Err(Error::InvalidGrid(format!(
            "non-finite bounds [{x_min}, {x_max}]"
        )));
    }
    if x_min >= x_max {
        return Err(Error::InvalidGrid(format!(
            "empty interval [{x_min}, {x_max}]"
        )));
    }
    if intervals < 2 {
        return Err(Error::InvalidGrid(format!(
            "need at least 2 intervals, got {intervals}"
        )));
    }
    Ok(SpaceGrid {
        x_min,
        x_max,
        intervals,
    })
}

/// Grid symmetric about the origin with spacing exactly `h` and half-width
/// as close to `half_width` as an integer number of steps allows. The origin
/// is always the middle node.
pub fn symmetric_grid(half_width: f64, h: f64) -> Result<SpaceGrid> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(invalid("h", format!("must be positive, got {h}")));
    }
    let half = (half_width / h).round().max(1.0) as usize;
    let edge = half as f64 * h;
    build_space_grid(-edge, edge, 2 * half)
}

/// Which variable the time grid is uniform in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeMode {
    /// Uniform in `t~ = sqrt(t)`.
    Transformed,
    /// Uniform in `t`.
    Original,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    expiry: f64,
    steps: usize,
    mode: TimeMode,
}

impl TimeGrid {
    /// Final original time `T`.
    pub fn expiry(&self) -> f64 {
        self.expiry
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn mode(&self) -> TimeMode {
        self.mode
    }

    /// Transformed step `k = sqrt(T) / N`.
    pub fn k(&self) -> f64 {
        self.expiry.sqrt() / self.steps as f64
    }

    /// Step in the marching variable of this grid's mode.
    pub fn step(&self) -> f64 {
        match self.mode {
            TimeMode::Transformed => self.k(),
            TimeMode::Original => self.expiry / self.steps as f64,
        }
    }

    /// `t~_n = n k`; the last node is exactly `sqrt(T)`.
    pub fn transformed_time(&self, n: usize) -> f64 {
        match self.mode {
            TimeMode::Transformed if n == self.steps => self.expiry.sqrt(),
            TimeMode::Transformed => n as f64 * self.k(),
            TimeMode::Original => self.original_time(n).sqrt(),
        }
    }

    /// Original time of node `n`: `(n k)^2` in transformed mode.
    pub fn original_time(&self, n: usize) -> f64 {
        if n == self.steps {
            return self.expiry;
        }
        match self.mode {
            TimeMode::Transformed => {
                let tt = n as f64 * self.k();
                tt * tt
            }
            TimeMode::Original => n as f64 * self.step(),
        }
    }

    pub fn refined(&self) -> TimeGrid {
        TimeGrid {
            steps: 2 * self.steps,
            ..*self
        }
    }
}

/// Time grid uniform in the square-root time variable.
pub fn build_time_grid(expiry: f64, steps: usize) -> Result<TimeGrid> {
    build_time_grid_with_mode(expiry, steps, TimeMode::Transformed)
}

pub fn build_time_grid_with_mode(expiry: f64, steps: usize, mode: TimeMode) -> Result<TimeGrid> {
    if !(expiry > 0.0 && expiry.is_finite()) {
        return Err(invalid(
            "T",
            format!("must be positive and finite, got {expiry}"),
        ));
    }
    if steps == 0 {
        return Err(invalid("N", "need at least one time step"));
    }
    Ok(TimeGrid {
        expiry,
        steps,
        mode,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeVariant {
    /// Crank-Nicolson with uniform steps in original time.
    CnOriginal,
    /// Crank-Nicolson with uniform steps in `t~ = sqrt(t)`.
    CnTimeChanged,
    BackwardEuler,
    /// `startup` backward Euler steps, then Crank-Nicolson, in original time.
    /// With `half_steps` each start-up step is taken as two backward Euler
    /// steps of half the size.
    Rannacher {
        startup: usize,
        half_steps: bool,
    },
}

impl SchemeVariant {
    pub const RANNACHER_DEFAULT: SchemeVariant = SchemeVariant::Rannacher {
        startup: 2,
        half_steps: false,
    };
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeSpec {
    pub variant: SchemeVariant,
    /// Mesh ratio `k / h`.
    pub lambda: f64,
}

impl SchemeSpec {
    pub fn new(variant: SchemeVariant, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(invalid("lambda", format!("must be positive, got {lambda}")));
        }
        if let SchemeVariant::Rannacher { startup, .. } = variant {
            if startup == 0 {
                return Err(invalid(
                    "n_startup",
                    "Rannacher start-up needs at least one step",
                ));
            }
        }
        Ok(Self { variant, lambda })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn space_grid_spacing() {
        let g = build_space_grid(-10.0, 10.0, 2000).unwrap();
        assert!((g.h() - 0.01).abs() < 1e-15);
        let g = build_space_grid(0.0, 200.0, 3200).unwrap();
        assert_eq!(g.h(), 0.0625);
        assert_eq!(g.node(3200), 200.0);
        assert_eq!(g.index_of(100.0), Some(1600));
    }

    #[test]
    fn space_grid_rejects_bad_input() {
        assert!(build_space_grid(0.0, 1.0, 1).is_err());
        assert!(build_space_grid(1.0, 0.0, 4).is_err());
        assert!(build_space_grid(f64::NEG_INFINITY, 0.0, 4).is_err());
        assert!(build_space_grid(0.0, f64::NAN, 4).is_err());
    }

    #[test]
    fn last_node_hits_right_endpoint() {
        let g = build_space_grid(-1.3, 2.7, 777).unwrap();
        let last = g.x_min() + 777.0 * g.h();
        assert!((last - 2.7).abs() <= 777.0 * f64::EPSILON * 2.7);
    }

    #[test]
    fn time_grid_basics() {
        let tg = build_time_grid(1.0, 100).unwrap();
        assert!((tg.k() - 0.01).abs() < 1e-16);
        assert!((tg.original_time(1) - 1e-4).abs() < 1e-18);
        assert_eq!(tg.original_time(100), 1.0);
        assert_eq!(tg.transformed_time(100), 1.0);

        let tg = build_time_grid(0.25, 640).unwrap();
        assert_eq!(tg.k(), 7.8125e-4);
        // M = 3200 on [0, 200] with N = 640 gives lambda = 0.0125
        assert!((tg.k() / 0.0625 - 0.0125).abs() < 1e-15);

        assert!(build_time_grid(0.0, 10).is_err());
        assert!(build_time_grid(-1.0, 10).is_err());
        assert!(build_time_grid(1.0, 0).is_err());
    }

    #[test]
    fn first_step_is_t_over_n_squared() {
        for &(t, n) in &[(1.0, 100usize), (0.25, 640), (2.0, 7)] {
            let tg = build_time_grid(t, n).unwrap();
            let first = tg.original_time(1) - tg.original_time(0);
            assert!((first - t / (n * n) as f64).abs() <= 1e-15 * t);
        }
    }

    #[test]
    fn original_steps_grow() {
        let tg = build_time_grid(1.0, 50).unwrap();
        let times: Vec<f64> = (0..=50).map(|n| tg.original_time(n)).collect();
        let steps: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
        assert!(times.windows(2).all(|w| w[1] > w[0]));
        assert!(steps.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn symmetric_grid_has_origin_node() {
        for &lambda in &[0.4, 0.6, std::f64::consts::FRAC_1_SQRT_2, 0.9, 1.25] {
            let h = 0.01 / lambda;
            let g = symmetric_grid(10.0, h).unwrap();
            assert_eq!(g.intervals() % 2, 0);
            assert!((g.h() - h).abs() <= 1e-14 * h);
            assert_eq!(g.index_of(0.0), Some(g.intervals() / 2));
            assert!((g.x_max() - 10.0).abs() <= h);
        }
    }

    #[test]
    fn scheme_spec_validation() {
        assert!(SchemeSpec::new(SchemeVariant::CnTimeChanged, 0.0).is_err());
        assert!(SchemeSpec::new(
            SchemeVariant::Rannacher {
                startup: 0,
                half_steps: false
            },
            0.5
        )
        .is_err());
        assert!(SchemeSpec::new(SchemeVariant::RANNACHER_DEFAULT, 0.5).is_ok());
    }
}
