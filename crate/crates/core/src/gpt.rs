//! States, effects, measurements and theories in the convex-operational
//! framework.
//!
//! A state space is either a polytope given by its extreme points or the unit
//! disc (the real X–Z fragment of a qubit, in Bloch coordinates). Effects are
//! affine functionals `linear · ω + offset`; a measurement is a list of
//! effects summing to the unit effect.

use std::borrow::Cow;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{Cmp, FeasibilityProblem};

/// Tolerance for algebraic identities (normalization, weight sums).
pub const ALGEBRAIC_TOL: f64 = 1e-12;
/// Tolerance for geometric membership and LP feasibility.
pub const GEOMETRIC_TOL: f64 = 1e-9;
/// Number of sides of the polygon standing in for the disc in LPs.
pub const DISC_POLYGON_SIDES: usize = 720;

/// Coordinates of a point in the embedding space `R^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RealVector(pub Vec<f64>);

impl RealVector {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.iter().all(|c| c.is_finite()) {
            Ok(Self(coords))
        } else {
            Err(Error::NonFinite)
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dot(&self, other: &RealVector) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn max_abs_diff(&self, other: &RealVector) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// `self + scale * other`, in place.
    pub fn axpy(&mut self, scale: f64, other: &RealVector) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += scale * b;
        }
    }

    pub fn scaled(&self, scale: f64) -> RealVector {
        RealVector(self.0.iter().map(|c| c * scale).collect())
    }
}

impl From<Vec<f64>> for RealVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeometryKind {
    Polytope,
    Disc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSpace {
    pub dim: usize,
    pub vertices: Vec<RealVector>,
    pub geometry_kind: GeometryKind,
    pub convex_closure_allowed: bool,
}

impl StateSpace {
    pub fn polytope(
        dim: usize,
        vertices: Vec<RealVector>,
        convex_closure_allowed: bool,
    ) -> Result<Self> {
        let space = Self {
            dim,
            vertices,
            geometry_kind: GeometryKind::Polytope,
            convex_closure_allowed,
        };
        space.validate()?;
        Ok(space)
    }

    /// The unit disc in Bloch coordinates `(x, z)`.
    pub fn disc() -> Self {
        Self {
            dim: 2,
            vertices: Vec::new(),
            geometry_kind: GeometryKind::Disc,
            convex_closure_allowed: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidStateSpace(
                "dimension must be positive".into(),
            ));
        }
        match self.geometry_kind {
            GeometryKind::Disc => {
                if self.dim != 2 {
                    return Err(Error::InvalidStateSpace(
                        "disc geometry requires dim = 2".into(),
                    ));
                }
            }
            GeometryKind::Polytope => {
                if self.vertices.is_empty() {
                    return Err(Error::InvalidStateSpace("polytope without vertices".into()));
                }
            }
        }
        for v in &self.vertices {
            if v.len() != self.dim {
                return Err(Error::DimensionMismatch {
                    expected: self.dim,
                    found: v.len(),
                });
            }
            if !v.0.iter().all(|c| c.is_finite()) {
                return Err(Error::NonFinite);
            }
        }
        Ok(())
    }

    pub fn is_disc(&self) -> bool {
        self.geometry_kind == GeometryKind::Disc
    }

    /// Extreme points used when the space enters a linear program: the
    /// vertices of a polytope, or the circumscribed regular polygon of the
    /// disc. The outer polygon contains the disc, so infeasibility over it
    /// certifies infeasibility over the disc.
    pub fn lp_vertices(&self) -> Cow<'_, [RealVector]> {
        match self.geometry_kind {
            GeometryKind::Polytope => Cow::Borrowed(&self.vertices),
            GeometryKind::Disc => Cow::Owned(outer_polygon(DISC_POLYGON_SIDES)),
        }
    }

    /// Convex-hull membership (LP for polytopes, norm for the disc), within
    /// [`GEOMETRIC_TOL`].
    pub fn contains(&self, point: &RealVector) -> Result<bool> {
        if point.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: point.len(),
            });
        }
        match self.geometry_kind {
            GeometryKind::Disc => Ok(point.norm() <= 1.0 + GEOMETRIC_TOL),
            GeometryKind::Polytope => {
                if self
                    .vertices
                    .iter()
                    .any(|v| v.max_abs_diff(point) <= GEOMETRIC_TOL)
                {
                    return Ok(true);
                }
                let mut lp = FeasibilityProblem::new();
                let w: Vec<usize> = self.vertices.iter().map(|_| lp.add_nonneg()).collect();
                lp.add_row(w.iter().map(|&i| (i, 1.0)).collect(), Cmp::Eq, 1.0);
                for k in 0..self.dim {
                    let terms = w
                        .iter()
                        .zip(&self.vertices)
                        .map(|(&i, v)| (i, v.0[k]))
                        .collect();
                    lp.add_row(terms, Cmp::Eq, point.0[k]);
                }
                Ok(lp.solve()?.is_feasible())
            }
        }
    }

    /// Whether the vertices are affinely independent (the space is a simplex).
    pub fn is_simplex(&self) -> bool {
        if self.is_disc() || self.vertices.len() != self.dim + 1 {
            return false;
        }
        let base = &self.vertices[0];
        let rows: Vec<Vec<f64>> = self.vertices[1..]
            .iter()
            .map(|v| v.0.iter().zip(&base.0).map(|(a, b)| a - b).collect())
            .collect();
        matrix_rank(rows, ALGEBRAIC_TOL) == self.dim
    }

    /// The point with every coordinate averaged over the vertices (disc
    /// centre for the disc).
    pub fn barycenter(&self) -> RealVector {
        if self.is_disc() {
            return RealVector::zeros(2);
        }
        let mut c = RealVector::zeros(self.dim);
        let w = 1.0 / self.vertices.len() as f64;
        for v in &self.vertices {
            c.axpy(w, v);
        }
        c
    }
}

/// Regular polygon circumscribing the unit circle, with edge midpoints at
/// multiples of `2π / sides` (so the circle touches each edge at angle
/// `k · 360° / sides`).
pub fn outer_polygon(sides: usize) -> Vec<RealVector> {
    let step = std::f64::consts::TAU / sides as f64;
    let radius = 1.0 / (step / 2.0).cos();
    (0..sides)
        .map(|k| {
            let phi = (k as f64 + 0.5) * step;
            RealVector(vec![radius * phi.cos(), radius * phi.sin()])
        })
        .collect()
}

/// `(cos, sin)` of an angle in degrees, exact at multiples of 90°.
pub fn unit_direction_deg(deg: f64) -> (f64, f64) {
    let r = deg.rem_euclid(360.0);
    if r == 0.0 {
        (1.0, 0.0)
    } else if r == 90.0 {
        (0.0, 1.0)
    } else if r == 180.0 {
        (-1.0, 0.0)
    } else if r == 270.0 {
        (0.0, -1.0)
    } else {
        let t = r.to_radians();
        (t.cos(), t.sin())
    }
}

fn matrix_rank(mut rows: Vec<Vec<f64>>, tol: f64) -> usize {
    let ncols = rows.first().map_or(0, Vec::len);
    let mut rank = 0;
    for col in 0..ncols {
        let pivot =
            (rank..rows.len()).max_by(|&a, &b| rows[a][col].abs().total_cmp(&rows[b][col].abs()));
        let Some(p) = pivot else { break };
        if rows[p][col].abs() <= tol {
            continue;
        }
        rows.swap(rank, p);
        let pivot_row = rows[rank].clone();
        for (r, row) in rows.iter_mut().enumerate() {
            if r != rank {
                let f = row[col] / pivot_row[col];
                for (x, pv) in row[col..].iter_mut().zip(&pivot_row[col..]) {
                    *x -= f * pv;
                }
            }
        }
        rank += 1;
    }
    rank
}

/// A point of the state space, optionally carrying the convex decomposition
/// over vertices it was built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub point: RealVector,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<(usize, f64)>>,
}

impl State {
    pub fn new(point: impl Into<RealVector>) -> Self {
        Self {
            point: point.into(),
            weights: None,
        }
    }

    /// Builds the state `Σ w_i v_i` from vertex weights.
    pub fn from_vertex_weights(space: &StateSpace, weights: Vec<(usize, f64)>) -> Result<Self> {
        check_weights(weights.iter().map(|&(_, w)| w))?;
        let mut point = RealVector::zeros(space.dim);
        for &(i, w) in &weights {
            let v = space
                .vertices
                .get(i)
                .ok_or_else(|| Error::InvalidWeights(format!("vertex index {i} out of range")))?;
            point.axpy(w, v);
        }
        Ok(Self {
            point,
            weights: Some(weights),
        })
    }

    /// Pure rebit state at angle `deg` in the X–Z plane.
    pub fn disc_pure(deg: f64) -> Self {
        let (c, s) = unit_direction_deg(deg);
        Self::new(vec![c, s])
    }

    pub fn dim(&self) -> usize {
        self.point.len()
    }

    pub fn approx_eq(&self, other: &State, tol: f64) -> bool {
        self.dim() == other.dim() && self.point.max_abs_diff(&other.point) <= tol
    }
}

fn check_weights(weights: impl Iterator<Item = f64>) -> Result<()> {
    let mut total = 0.0;
    for w in weights {
        if !w.is_finite() || w < 0.0 {
            return Err(Error::InvalidWeights(format!(
                "negative or non-finite weight {w}"
            )));
        }
        total += w;
    }
    if (total - 1.0).abs() > ALGEBRAIC_TOL {
        return Err(Error::InvalidWeights(format!("weights sum to {total}")));
    }
    Ok(())
}

/// Affine functional `ω ↦ linear · ω + offset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Effect {
    pub linear: RealVector,
    pub offset: f64,
}

impl Effect {
    pub fn new(linear: impl Into<RealVector>, offset: f64) -> Self {
        Self {
            linear: linear.into(),
            offset,
        }
    }

    pub fn unit(dim: usize) -> Self {
        Self::new(RealVector::zeros(dim), 1.0)
    }

    /// Raw affine value, no range check.
    pub fn value_at(&self, point: &RealVector) -> f64 {
        self.linear.dot(point) + self.offset
    }

    /// Smallest and largest value over the space.
    pub fn range_on(&self, space: &StateSpace) -> (f64, f64) {
        match space.geometry_kind {
            GeometryKind::Disc => {
                let n = self.linear.norm();
                (self.offset - n, self.offset + n)
            }
            GeometryKind::Polytope => {
                space
                    .vertices
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                        let x = self.value_at(v);
                        (lo.min(x), hi.max(x))
                    })
            }
        }
    }

    pub fn validate_on(&self, space: &StateSpace) -> Result<()> {
        if self.linear.len() != space.dim {
            return Err(Error::DimensionMismatch {
                expected: space.dim,
                found: self.linear.len(),
            });
        }
        let (lo, hi) = self.range_on(space);
        if lo < -ALGEBRAIC_TOL || hi > 1.0 + ALGEBRAIC_TOL {
            return Err(Error::InvalidEffect(format!(
                "range [{lo}, {hi}] leaves [0, 1]"
            )));
        }
        Ok(())
    }

    /// `kappa · self + (1 − kappa)/2 · unit`.
    pub fn smeared(&self, kappa: f64) -> Effect {
        Effect {
            linear: self.linear.scaled(kappa),
            offset: kappa * self.offset + (1.0 - kappa) / 2.0,
        }
    }
}

/// Probability assigned by an effect to a state.
pub fn evaluate_effect(e: &Effect, state: &State) -> Result<f64> {
    if e.linear.len() != state.dim() {
        return Err(Error::DimensionMismatch {
            expected: e.linear.len(),
            found: state.dim(),
        });
    }
    let v = e.value_at(&state.point);
    if !(-ALGEBRAIC_TOL..=1.0 + ALGEBRAIC_TOL).contains(&v) {
        return Err(Error::ProbabilityOutOfRange(v));
    }
    Ok(v.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub label: String,
    pub effects: Vec<Effect>,
}

impl Measurement {
    pub fn new(label: impl Into<String>, effects: Vec<Effect>) -> Self {
        Self {
            label: label.into(),
            effects,
        }
    }

    /// Two-outcome measurement with outcome 0 given by `plus`.
    pub fn dichotomic(label: impl Into<String>, plus: Effect) -> Self {
        let minus = Effect {
            linear: plus.linear.scaled(-1.0),
            offset: 1.0 - plus.offset,
        };
        Self::new(label, vec![plus, minus])
    }

    /// The rebit observable σ(θ): outcome `+` has probability
    /// `(1 + x cos θ + z sin θ) / 2`.
    pub fn disc_dichotomic(label: impl Into<String>, theta_deg: f64) -> Self {
        let (c, s) = unit_direction_deg(theta_deg);
        Self::dichotomic(label, Effect::new(vec![c / 2.0, s / 2.0], 0.5))
    }

    pub fn num_outcomes(&self) -> usize {
        self.effects.len()
    }

    pub fn validate_on(&self, space: &StateSpace) -> Result<()> {
        let invalid = |reason: String| Error::InvalidMeasurement {
            label: self.label.clone(),
            reason,
        };
        if self.effects.is_empty() {
            return Err(invalid("no outcomes".into()));
        }
        for e in &self.effects {
            e.validate_on(space)
                .map_err(|err| invalid(err.to_string()))?;
        }
        let mut sum = Effect::new(RealVector::zeros(space.dim), 0.0);
        for e in &self.effects {
            sum.linear.axpy(1.0, &e.linear);
            sum.offset += e.offset;
        }
        let deviation = match space.geometry_kind {
            GeometryKind::Polytope => space
                .vertices
                .iter()
                .map(|v| (sum.value_at(v) - 1.0).abs())
                .fold(0.0, f64::max),
            GeometryKind::Disc => sum.linear.norm() + (sum.offset - 1.0).abs(),
        };
        if deviation > ALGEBRAIC_TOL {
            return Err(invalid(format!(
                "effects miss the unit effect by {deviation:e}"
            )));
        }
        Ok(())
    }

    /// `kappa`-smeared copy of the measurement.
    pub fn smeared(&self, kappa: f64) -> Measurement {
        Measurement {
            label: self.label.clone(),
            effects: self.effects.iter().map(|e| e.smeared(kappa)).collect(),
        }
    }
}

/// Outcome distribution of a measurement on a state.
pub fn measure_distribution(m: &Measurement, state: &State) -> Result<Vec<f64>> {
    m.effects
        .iter()
        .map(|e| evaluate_effect(e, state))
        .collect()
}

/// Plain convex combination of coordinate points.
pub fn mix_states(parts: &[(f64, &State)]) -> Result<State> {
    let first = parts.first().ok_or(Error::EmptyStateList)?;
    check_weights(parts.iter().map(|(w, _)| *w))?;
    let dim = first.1.dim();
    let mut point = RealVector::zeros(dim);
    for (w, s) in parts {
        if s.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: s.dim(),
            });
        }
        point.axpy(*w, &s.point);
    }
    Ok(State::new(point))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theory {
    pub name: String,
    pub space: StateSpace,
    pub measurements: Vec<Measurement>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub valid_states: Option<Vec<State>>,
}

impl Theory {
    pub fn new(
        name: impl Into<String>,
        space: StateSpace,
        measurements: Vec<Measurement>,
        valid_states: Option<Vec<State>>,
    ) -> Result<Self> {
        let theory = Self {
            name: name.into(),
            space,
            measurements,
            valid_states,
        };
        theory.validate()?;
        Ok(theory)
    }

    pub fn validate(&self) -> Result<()> {
        self.space.validate()?;
        for m in &self.measurements {
            m.validate_on(&self.space)?;
        }
        if !self.space.convex_closure_allowed {
            let states = self.valid_states.as_ref().ok_or_else(|| {
                Error::InvalidStateSpace("non-convex theory needs an explicit state list".into())
            })?;
            if states.is_empty() {
                return Err(Error::EmptyStateList);
            }
            for s in states {
                if !self.space.contains(&s.point)? {
                    return Err(Error::NotInStateSpace(format!("{:?}", s.point.0)));
                }
            }
        }
        Ok(())
    }

    /// Looks up a measurement by label. On the disc, labels `theta:<deg>` or
    /// a bare number of degrees denote σ(θ).
    pub fn measurement(&self, label: &str) -> Result<Measurement> {
        if let Some(m) = self.measurements.iter().find(|m| m.label == label) {
            return Ok(m.clone());
        }
        if self.space.is_disc() {
            if let Some(deg) = parse_angle_label(label) {
                return Ok(Measurement::disc_dichotomic(label, deg));
            }
        }
        Err(Error::UnknownMeasurement(label.to_string()))
    }

    /// Checks that `state` is a valid state of this theory.
    pub fn validate_state(&self, state: &State) -> Result<()> {
        if !self.space.contains(&state.point)? {
            return Err(Error::NotInStateSpace(format!("{:?}", state.point.0)));
        }
        if let Some(ws) = &state.weights {
            let rebuilt = State::from_vertex_weights(&self.space, ws.clone())?;
            if !rebuilt.approx_eq(state, ALGEBRAIC_TOL) {
                return Err(Error::InvalidWeights(
                    "weights do not reconstruct the point".into(),
                ));
            }
        }
        if !self.space.convex_closure_allowed {
            let listed = self
                .valid_states
                .iter()
                .flatten()
                .any(|s| s.approx_eq(state, GEOMETRIC_TOL));
            if !listed {
                return Err(Error::NonConvexClosure);
            }
        }
        Ok(())
    }

    /// Convex mixture that respects the theory's closure rule.
    pub fn mix_states(&self, parts: &[(f64, &State)]) -> Result<State> {
        let mixed = mix_states(parts)?;
        if !self.space.convex_closure_allowed {
            return self
                .valid_states
                .iter()
                .flatten()
                .find(|s| s.approx_eq(&mixed, GEOMETRIC_TOL))
                .cloned()
                .ok_or(Error::NonConvexClosure);
        }
        Ok(mixed)
    }

    /// The states an optimizer ranges over: the explicit list for a
    /// non-convex theory, otherwise the polytope vertices. `None` for the disc.
    pub fn extreme_states(&self) -> Option<Vec<State>> {
        if !self.space.convex_closure_allowed {
            return self.valid_states.clone();
        }
        match self.space.geometry_kind {
            GeometryKind::Polytope => Some(
                self.space
                    .vertices
                    .iter()
                    .cloned()
                    .map(State::new)
                    .collect(),
            ),
            GeometryKind::Disc => None,
        }
    }
}

impl fmt::Display for Theory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

pub(crate) fn parse_angle_label(label: &str) -> Option<f64> {
    let body = label.strip_prefix("theta:").unwrap_or(label);
    let body = body.strip_suffix("deg").unwrap_or(body);
    body.trim().parse::<f64>().ok().filter(|d| d.is_finite())
}
