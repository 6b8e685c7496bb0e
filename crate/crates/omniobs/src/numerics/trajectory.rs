//! Uniform-grid trajectories and the classical fourth-order Runge-Kutta
//! scheme. The integrator is deterministic: same field, initial state and
//! step produce bitwise-identical output.

use std::io::{BufRead, Write};

use nalgebra::DVector;
use thiserror::Error;

use crate::scalar::{cv, to_f64, Scalar};

#[derive(Debug, Error)]
pub enum IntegrateError {
    #[error("step size must be positive and finite, got {dt}")]
    InvalidStep { dt: f64 },
    #[error("final time must cover at least one step (t_end {t_end}, dt {dt})")]
    EmptyHorizon { t_end: f64, dt: f64 },
    #[error("state became non-finite; last good time {t}")]
    NonFinite { t: f64 },
    #[error("csv parse error at line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// States sampled on the uniform grid `0, dt, 2 dt, ...`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T: Scalar> {
    times: Vec<T>,
    states: Vec<DVector<T>>,
}

impl<T: Scalar> Trajectory<T> {
    pub fn new() -> Self {
        Self { times: Vec::new(), states: Vec::new() }
    }

    pub fn push(&mut self, t: T, state: DVector<T>) {
        if let Some(first) = self.states.first() {
            assert_eq!(first.len(), state.len(), "trajectory states must share one dimension");
        }
        if let Some(&last) = self.times.last() {
            assert!(t > last, "trajectory times must be strictly increasing");
        }
        self.times.push(t);
        self.states.push(state);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// State dimension, zero while empty.
    pub fn dim(&self) -> usize {
        self.states.first().map_or(0, |s| s.len())
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn states(&self) -> &[DVector<T>] {
        &self.states
    }

    pub fn time(&self, k: usize) -> T {
        self.times[k]
    }

    pub fn state(&self, k: usize) -> &DVector<T> {
        &self.states[k]
    }

    pub fn last_state(&self) -> &DVector<T> {
        self.states.last().expect("trajectory is empty")
    }

    pub fn last_time(&self) -> T {
        *self.times.last().expect("trajectory is empty")
    }

    /// Writes `t,x1,...,xk` rows. Values are printed in the shortest form
    /// that parses back to the identical double, so a round trip is lossless.
    pub fn to_csv<W: Write>(&self, mut out: W) -> Result<(), IntegrateError> {
        let k = self.dim();
        write!(out, "t")?;
        for i in 1..=k {
            write!(out, ",x{i}")?;
        }
        writeln!(out)?;
        for (t, x) in self.times.iter().zip(&self.states) {
            write!(out, "{}", to_f64(*t))?;
            for v in x.iter() {
                write!(out, ",{}", to_f64(*v))?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    /// Parses the format written by [`Trajectory::to_csv`].
    pub fn from_csv<R: BufRead>(input: R) -> Result<Self, IntegrateError> {
        let mut traj = Self::new();
        let mut dim: Option<usize> = None;
        for (idx, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if idx == 0 {
                if !line.starts_with("t") {
                    return Err(IntegrateError::Csv {
                        line: 1,
                        message: "expected header starting with t".into(),
                    });
                }
                dim = Some(line.split(',').count().saturating_sub(1));
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split(',');
            let parse = |s: &str, line: usize| -> Result<T, IntegrateError> {
                let v: f64 = s.parse().map_err(|e| IntegrateError::Csv {
                    line,
                    message: format!("bad float {s:?}: {e}"),
                })?;
                Ok(cv(v))
            };
            let t = parse(
                fields.next().ok_or(IntegrateError::Csv {
                    line: idx + 1,
                    message: "empty row".into(),
                })?,
                idx + 1,
            )?;
            let values: Vec<T> = fields
                .map(|f| parse(f, idx + 1))
                .collect::<Result<_, _>>()?;
            if values.len() != dim.unwrap_or(values.len()) {
                return Err(IntegrateError::Csv {
                    line: idx + 1,
                    message: format!(
                        "expected {} state columns, found {}",
                        dim.unwrap(),
                        values.len()
                    ),
                });
            }
            traj.push(t, DVector::from_vec(values));
        }
        Ok(traj)
    }
}

impl<T: Scalar> Default for Trajectory<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// One classical RK4 step of size `dt` from `(t, x)`.
pub fn rk4_step<T, F>(field: &mut F, t: T, x: &DVector<T>, dt: T) -> DVector<T>
where
    T: Scalar,
    F: FnMut(T, &DVector<T>) -> DVector<T>,
{
    let half = dt / cv::<T>(2.0);
    let k1 = field(t, x);
    let k2 = field(t + half, &(x + &k1 * half));
    let k3 = field(t + half, &(x + &k2 * half));
    let k4 = field(t + dt, &(x + &k3 * dt));
    x + (k1 + k2 * cv::<T>(2.0) + k3 * cv::<T>(2.0) + k4) * (dt / cv::<T>(6.0))
}

fn is_finite<T: Scalar>(x: &DVector<T>) -> bool {
    x.iter().all(|v| v.is_finite())
}

/// Integrates `x' = field(t, x)` from `x0` over `[0, t_end]` with fixed step
/// `dt`, sampling every step. The grid is `round(t_end / dt)` steps of
/// exactly `dt`.
pub fn integrate<T, F>(
    mut field: F,
    x0: &DVector<T>,
    t_end: T,
    dt: T,
) -> Result<Trajectory<T>, IntegrateError>
where
    T: Scalar,
    F: FnMut(T, &DVector<T>) -> DVector<T>,
{
    if !(dt > T::zero()) || !dt.is_finite() {
        return Err(IntegrateError::InvalidStep { dt: to_f64(dt) });
    }
    let steps = to_f64(t_end / dt).round();
    if !(steps >= 1.0) || !steps.is_finite() {
        return Err(IntegrateError::EmptyHorizon { t_end: to_f64(t_end), dt: to_f64(dt) });
    }
    let steps = steps as usize;
    if !is_finite(x0) {
        return Err(IntegrateError::NonFinite { t: 0.0 });
    }
    let mut traj = Trajectory::new();
    let mut x = x0.clone();
    traj.push(T::zero(), x.clone());
    for k in 0..steps {
        let t = cv::<T>(k as f64) * dt;
        let next = rk4_step(&mut field, t, &x, dt);
        if !is_finite(&next) {
            return Err(IntegrateError::NonFinite { t: to_f64(t) });
        }
        x = next;
        traj.push(cv::<T>((k + 1) as f64) * dt, x.clone());
    }
    Ok(traj)
}
