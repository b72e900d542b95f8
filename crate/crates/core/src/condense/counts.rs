use serde::{Deserialize, Serialize};

use super::Formulation;
use crate::error::{Error, Result};

/// State, input and disturbance dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dimensions {
    pub n: usize,
    pub m: usize,
    pub s: usize,
}

/// Closed-form row count `q`:
/// min-max `(2s)^N + 2N(m+n) + q_T`, tube `q_R + 2N(m+n) + q_T`,
/// nominal `2N(m+n) + q_T`, where `q_T` is the formulation's terminal set.
pub fn constraint_count(
    formulation: Formulation,
    horizon: usize,
    dims: Dimensions,
    q_rpi: usize,
    q_terminal: usize,
) -> u128 {
    let box_rows = 2 * horizon as u128 * (dims.m + dims.n) as u128;
    let tail = box_rows + q_terminal as u128;
    match formulation {
        Formulation::MinMax => (2 * dims.s as u128).pow(horizon as u32) + tail,
        Formulation::Tube => q_rpi as u128 + tail,
        Formulation::Nominal => tail,
    }
}

/// Decision-variable count `p`.
pub fn decision_count(formulation: Formulation, horizon: usize, dims: Dimensions) -> usize {
    match formulation {
        Formulation::MinMax => dims.m * horizon + 1,
        Formulation::Tube => dims.m * horizon + dims.n,
        Formulation::Nominal => dims.m * horizon,
    }
}

/// Real bound `log(q_R + q_TT - q_TM) / log(2s)` below which min-max has
/// fewer rows than tube MPC.
pub fn horizon_bound(
    s: usize,
    q_rpi: usize,
    q_terminal_minmax: usize,
    q_terminal_tube: usize,
) -> Result<f64> {
    let diff = difference(s, q_rpi, q_terminal_minmax, q_terminal_tube)?;
    Ok((diff as f64).ln() / ((2 * s) as f64).ln())
}

/// Largest horizon `N` with `(2s)^N + q_TM < q_R + q_TT`, found by direct
/// integer comparison.
pub fn horizon_rule(
    s: usize,
    q_rpi: usize,
    q_terminal_minmax: usize,
    q_terminal_tube: usize,
) -> Result<usize> {
    let diff = difference(s, q_rpi, q_terminal_minmax, q_terminal_tube)?;
    if diff <= 1 {
        return Err(Error::Undefined(
            "min-max never has fewer rows than tube MPC",
        ));
    }
    let base = 2 * s as u128;
    let mut horizon = 0usize;
    let mut power = 1u128;
    while power.saturating_mul(base) < diff {
        power *= base;
        horizon += 1;
    }
    Ok(horizon)
}

fn difference(
    s: usize,
    q_rpi: usize,
    q_terminal_minmax: usize,
    q_terminal_tube: usize,
) -> Result<u128> {
    if s == 0 {
        return Err(Error::Undefined("no disturbance inputs, log(2s) undefined"));
    }
    let total = q_rpi as u128 + q_terminal_tube as u128;
    if total <= q_terminal_minmax as u128 {
        return Err(Error::Undefined("q_R + q_TT must exceed q_TM"));
    }
    Ok(total - q_terminal_minmax as u128)
}
