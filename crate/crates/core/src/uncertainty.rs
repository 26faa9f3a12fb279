//! Single-system certainty sums `q(y0) + q(y1)` and the theory bound υ*.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gpt::{measure_distribution, Measurement, State, Theory};

/// Boundary points scanned when optimizing over the disc.
pub const DISC_GRID_POINTS: usize = 100_000;

const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyBound {
    pub upsilon_star: f64,
    pub maximizer: State,
    pub settings: (Measurement, Measurement),
}

/// `q(y, ω) = max_b P(b | y, ω)`.
pub fn max_outcome_prob(y: &Measurement, state: &State) -> Result<f64> {
    Ok(measure_distribution(y, state)?
        .into_iter()
        .fold(0.0, f64::max))
}

pub fn certainty_sum(state: &State, y0: &Measurement, y1: &Measurement) -> Result<f64> {
    Ok(max_outcome_prob(y0, state)? + max_outcome_prob(y1, state)?)
}

/// Maximum of the certainty sum over the theory's states.
///
/// The certainty sum is convex, so for a polytope the maximum sits on a
/// vertex; for a non-convex theory the explicit state list is scanned; on
/// the disc the boundary circle is gridded and the best cell refined.
/// Ties go to the lowest vertex index or the smallest angle.
pub fn upsilon_star(
    theory: &Theory,
    y0: &Measurement,
    y1: &Measurement,
) -> Result<UncertaintyBound> {
    y0.validate_on(&theory.space)?;
    y1.validate_on(&theory.space)?;
    let settings = (y0.clone(), y1.clone());

    if let Some(states) = theory.extreme_states() {
        let mut best: Option<(f64, State)> = None;
        for s in states {
            let v = certainty_sum(&s, y0, y1)?;
            if best.as_ref().is_none_or(|(b, _)| v > b + TIE_TOL) {
                best = Some((v, s));
            }
        }
        let (upsilon_star, maximizer) = best.ok_or(Error::EmptyStateList)?;
        return Ok(UncertaintyBound {
            upsilon_star,
            maximizer,
            settings,
        });
    }

    let (deg, value) = disc_boundary_max(y0, y1)?;
    if let (Some(t0), Some(t1)) = (sharp_disc_angle(y0), sharp_disc_angle(y1)) {
        let closed = rebit_upsilon_closed_form(t0, t1);
        if (closed - value).abs() > 1e-6 {
            return Err(Error::Inconsistent(format!(
                "disc grid optimum {value} disagrees with closed form {closed}"
            )));
        }
    }
    Ok(UncertaintyBound {
        upsilon_star: value,
        maximizer: State::disc_pure(deg),
        settings,
    })
}

/// `1 + sqrt(2 + 2|cos(θ0 − θ1)|) / 2`: the certainty-sum bound for two sharp
/// X–Z-plane observables at angles `θ0`, `θ1` (degrees).
pub fn rebit_upsilon_closed_form(theta0_deg: f64, theta1_deg: f64) -> f64 {
    let c = (theta0_deg - theta1_deg).to_radians().cos().abs();
    1.0 + (2.0 + 2.0 * c).sqrt() / 2.0
}

/// Angle of a sharp dichotomic disc observable, if it is one.
fn sharp_disc_angle(m: &Measurement) -> Option<f64> {
    let plus = m.effects.first()?;
    if m.effects.len() != 2 || plus.linear.len() != 2 || (plus.offset - 0.5).abs() > 1e-12 {
        return None;
    }
    let (x, z) = (2.0 * plus.linear.0[0], 2.0 * plus.linear.0[1]);
    ((x.hypot(z) - 1.0).abs() < 1e-12).then(|| z.atan2(x).to_degrees())
}

fn disc_boundary_max(y0: &Measurement, y1: &Measurement) -> Result<(f64, f64)> {
    let step = 360.0 / DISC_GRID_POINTS as f64;
    let eval = |deg: f64| certainty_sum(&State::disc_pure(deg), y0, y1);

    let values: Vec<f64> = (0..DISC_GRID_POINTS)
        .map(|i| eval(i as f64 * step))
        .collect::<Result<_>>()?;
    let top = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let idx = values
        .iter()
        .position(|&v| v >= top - TIE_TOL)
        .expect("non-empty grid");
    let (mut best_deg, mut best) = (idx as f64 * step, values[idx]);

    // golden-section refinement inside the neighbouring cells
    let (mut lo, mut hi) = (best_deg - step, best_deg + step);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..80 {
        let a = hi - g * (hi - lo);
        let b = lo + g * (hi - lo);
        if eval(a)? >= eval(b)? {
            hi = b;
        } else {
            lo = a;
        }
    }
    let mid = (lo + hi) / 2.0;
    let refined = eval(mid)?;
    if refined > best + TIE_TOL {
        best_deg = mid.rem_euclid(360.0);
        best = refined;
    }
    Ok((best_deg, best))
}
