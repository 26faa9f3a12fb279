//! Concrete theories (classical bit, rebit, Spekkens toy theory, gdits) and
//! the bipartite objects built on them.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bell::ScenarioShape;
use crate::error::{Error, Result};
use crate::gpt::{
    measure_distribution, Effect, Measurement, RealVector, State, StateSpace, Theory,
    ALGEBRAIC_TOL, GEOMETRIC_TOL,
};

pub fn make_classical_bit() -> Theory {
    let space = StateSpace::polytope(1, vec![vec![0.0].into(), vec![1.0].into()], true)
        .expect("static space");
    let read = || Effect::new(vec![1.0], 0.0);
    Theory::new(
        "classical",
        space,
        vec![
            Measurement::dichotomic("X", read()),
            Measurement::dichotomic("Z", read()),
        ],
        None,
    )
    .expect("static theory")
}

/// Generalized local theory with `inputs` fiducial measurements of
/// `outcomes` outcomes each. Coordinates are the fiducial probabilities
/// `P(j | i)` for `j < outcomes - 1`, blocked by measurement.
pub fn make_gdit(inputs: usize, outcomes: usize) -> Result<Theory> {
    if inputs < 1 {
        return Err(Error::ParameterOutOfRange {
            name: "d",
            value: inputs as f64,
            range: "d >= 1",
        });
    }
    if outcomes < 2 {
        return Err(Error::ParameterOutOfRange {
            name: "k",
            value: outcomes as f64,
            range: "k >= 2",
        });
    }
    let block = outcomes - 1;
    let dim = inputs * block;

    // Each fiducial block is either all zeros (last outcome) or one-hot.
    let n_vertices = outcomes.pow(inputs as u32);
    let vertices = (0..n_vertices)
        .map(|mut code| {
            let mut v = vec![0.0; dim];
            let mut digits = vec![0; inputs];
            for d in digits.iter_mut().rev() {
                *d = code % outcomes;
                code /= outcomes;
            }
            for (i, &digit) in digits.iter().enumerate() {
                if digit > 0 {
                    v[i * block + digit - 1] = 1.0;
                }
            }
            RealVector(v)
        })
        .collect();
    let space = StateSpace::polytope(dim, vertices, true)?;

    let measurements = (0..inputs)
        .map(|i| {
            let label = if inputs == 2 && outcomes == 2 {
                ["X", "Z"][i].to_string()
            } else {
                format!("f{i}")
            };
            let mut effects: Vec<Effect> = (0..block)
                .map(|j| {
                    let mut lin = vec![0.0; dim];
                    lin[i * block + j] = 1.0;
                    Effect::new(lin, 0.0)
                })
                .collect();
            let mut last = vec![0.0; dim];
            for j in 0..block {
                last[i * block + j] = -1.0;
            }
            effects.push(Effect::new(last, 1.0));
            Measurement::new(label, effects)
        })
        .collect();

    let name = if inputs == 2 && outcomes == 2 {
        "gbit".to_string()
    } else {
        format!("gdit({inputs},{outcomes})")
    };
    Theory::new(name, space, measurements, None)
}

pub fn make_gbit() -> Theory {
    make_gdit(2, 2).expect("static theory")
}

/// Rebit: the real X–Z fragment of a qubit on the unit disc. Named
/// observables `X` (θ = 0°), `Z` (90°), `D+` (45°, (σ_X + σ_Z)/√2) and `D-`
/// (−45°, (σ_X − σ_Z)/√2); any other angle via `theta:<deg>`.
pub fn make_rebit() -> Theory {
    Theory::new(
        "rebit",
        StateSpace::disc(),
        vec![
            Measurement::disc_dichotomic("X", 0.0),
            Measurement::disc_dichotomic("Z", 90.0),
            Measurement::disc_dichotomic("D+", 45.0),
            Measurement::disc_dichotomic("D-", 315.0),
        ],
        None,
    )
    .expect("static theory")
}

/// Ontic-state pairs of the six pure epistemic states, in vertex order
/// `x+, x-, y+, y-, z+, z-`.
pub const SPEKKENS_PURE_SUPPORTS: [(u8, u8); 6] = [(1, 2), (3, 4), (1, 3), (2, 4), (1, 4), (2, 3)];

/// Spekkens toy bit embedded as `(P(1∨2), P(1∨3), P(1∨4))`, i.e. the
/// probabilities of the `+` outcomes of σ_X, σ_Y, σ_Z.
pub fn make_spekkens() -> Theory {
    let pure: Vec<RealVector> = vec![
        vec![1.0, 0.5, 0.5].into(),
        vec![0.0, 0.5, 0.5].into(),
        vec![0.5, 1.0, 0.5].into(),
        vec![0.5, 0.0, 0.5].into(),
        vec![0.5, 0.5, 1.0].into(),
        vec![0.5, 0.5, 0.0].into(),
    ];
    let mut valid: Vec<State> = pure.iter().cloned().map(State::new).collect();
    valid.push(State::new(vec![0.5, 0.5, 0.5]));
    let space = StateSpace::polytope(3, pure, false).expect("static space");
    let axis = |i: usize| {
        let mut lin = vec![0.0; 3];
        lin[i] = 1.0;
        Effect::new(lin, 0.0)
    };
    Theory::new(
        "spekkens",
        space,
        vec![
            Measurement::dichotomic("X", axis(0)),
            Measurement::dichotomic("Y", axis(1)),
            Measurement::dichotomic("Z", axis(2)),
        ],
        Some(valid),
    )
    .expect("static theory")
}

/// Spekkens epistemic state `a ∨ b` (uniform over two ontic states), or the
/// fully mixed state for `None`.
pub fn spekkens_state(support: Option<(u8, u8)>) -> Result<State> {
    let theory = make_spekkens();
    match support {
        None => Ok(State::new(vec![0.5, 0.5, 0.5])),
        Some((a, b)) => {
            let key = if a < b { (a, b) } else { (b, a) };
            SPEKKENS_PURE_SUPPORTS
                .iter()
                .position(|&s| s == key)
                .map(|i| State::new(theory.space.vertices[i].clone()))
                .ok_or_else(|| {
                    Error::NotInStateSpace(format!("{a} ∨ {b} is not an epistemic state"))
                })
        }
    }
}

/// Look up a theory by CLI name.
pub fn theory_by_name(name: &str) -> Result<Theory> {
    match name {
        "classical" => Ok(make_classical_bit()),
        "rebit" => Ok(make_rebit()),
        "spekkens" => Ok(make_spekkens()),
        "gbit" => Ok(make_gbit()),
        other => Err(Error::UnknownName {
            kind: "theory",
            name: other.to_string(),
        }),
    }
}

/// One Alice outcome: its probability and Bob's normalized conditional state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub prob: f64,
    pub state: State,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparableComponent {
    pub weight: f64,
    pub alice: State,
    pub bob: State,
}

/// How Bob's conditional states arise from Alice's setting and outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ConditionalRule {
    /// Explicit finite table keyed by Alice's setting label.
    Table {
        branches: BTreeMap<String, Vec<Branch>>,
    },
    /// Rebit singlet: any X–Z-plane observable of Alice, perfect
    /// anticorrelation.
    Singlet { alice_theory: Theory },
    /// `Σ_c w_c ω_A^c ⊗ ω_B^c`.
    Separable {
        alice_theory: Theory,
        components: Vec<SeparableComponent>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BipartiteState {
    pub name: String,
    pub alice_settings: Vec<String>,
    pub bob_space: StateSpace,
    pub conditional_rule: ConditionalRule,
}

impl BipartiteState {
    /// Builds and checks normalization and reduced-state no-signaling over
    /// `alice_settings`.
    pub fn new(
        name: impl Into<String>,
        alice_settings: Vec<String>,
        bob_space: StateSpace,
        conditional_rule: ConditionalRule,
    ) -> Result<Self> {
        let s = Self::new_unchecked(name, alice_settings, bob_space, conditional_rule);
        s.check_nosignaling()?;
        Ok(s)
    }

    /// Skips the no-signaling check; used to model signaling theories.
    pub fn new_unchecked(
        name: impl Into<String>,
        alice_settings: Vec<String>,
        bob_space: StateSpace,
        conditional_rule: ConditionalRule,
    ) -> Self {
        Self {
            name: name.into(),
            alice_settings,
            bob_space,
            conditional_rule,
        }
    }

    /// `(p(a|x), ω^{a|x})` for every outcome `a` of Alice's setting `x`.
    pub fn conditional(&self, x: &str) -> Result<Vec<Branch>> {
        match &self.conditional_rule {
            ConditionalRule::Table { branches } => branches
                .get(x)
                .cloned()
                .ok_or_else(|| Error::UnknownSetting(x.to_string())),
            ConditionalRule::Singlet { alice_theory } => {
                let m = alice_theory
                    .measurement(x)
                    .map_err(|_| Error::UnknownSetting(x.to_string()))?;
                if m.num_outcomes() != 2 {
                    return Err(Error::UnknownSetting(x.to_string()));
                }
                // plus effect (u/2)·r + 1/2 with |u| = 1 for a sharp observable
                let u = m.effects[0].linear.scaled(2.0);
                let n = u.norm();
                if (n - 1.0).abs() > ALGEBRAIC_TOL
                    || (m.effects[0].offset - 0.5).abs() > ALGEBRAIC_TOL
                {
                    return Err(Error::UnknownSetting(format!(
                        "{x} is not a sharp X–Z observable"
                    )));
                }
                Ok(vec![
                    Branch {
                        prob: 0.5,
                        state: State::new(u.scaled(-1.0)),
                    },
                    Branch {
                        prob: 0.5,
                        state: State::new(u),
                    },
                ])
            }
            ConditionalRule::Separable {
                alice_theory,
                components,
            } => {
                let m = alice_theory
                    .measurement(x)
                    .map_err(|_| Error::UnknownSetting(x.to_string()))?;
                let mut out = Vec::with_capacity(m.num_outcomes());
                for a in 0..m.num_outcomes() {
                    let mut p = 0.0;
                    let mut point = RealVector::zeros(self.bob_space.dim);
                    let mut reduced = RealVector::zeros(self.bob_space.dim);
                    for c in components {
                        let pa = measure_distribution(&m, &c.alice)?[a] * c.weight;
                        p += pa;
                        point.axpy(pa, &c.bob.point);
                        reduced.axpy(c.weight, &c.bob.point);
                    }
                    let state = if p > 0.0 {
                        point.scaled(1.0 / p)
                    } else {
                        reduced
                    };
                    out.push(Branch {
                        prob: p,
                        state: State::new(state),
                    });
                }
                Ok(out)
            }
        }
    }

    /// Bob's reduced state `Σ_a p(a|x) ω^{a|x}` for setting `x`.
    pub fn reduced_bob_state(&self, x: &str) -> Result<State> {
        let mut point = RealVector::zeros(self.bob_space.dim);
        for b in self.conditional(x)? {
            point.axpy(b.prob, &b.state.point);
        }
        Ok(State::new(point))
    }

    pub fn check_nosignaling(&self) -> Result<()> {
        let mut reference: Option<State> = None;
        for x in &self.alice_settings {
            let branches = self.conditional(x)?;
            let total: f64 = branches.iter().map(|b| b.prob).sum();
            if (total - 1.0).abs() > ALGEBRAIC_TOL || branches.iter().any(|b| b.prob < 0.0) {
                return Err(Error::InvalidWeights(format!("p(a|{x}) sums to {total}")));
            }
            let reduced = self.reduced_bob_state(x)?;
            match &reference {
                None => reference = Some(reduced),
                Some(r) if !r.approx_eq(&reduced, GEOMETRIC_TOL) => {
                    return Err(Error::Signaling(format!(
                        "reduced Bob state differs for setting `{x}`: {:?} vs {:?}",
                        reduced.point.0, r.point.0
                    )));
                }
                Some(_) => {}
            }
        }
        Ok(())
    }
}

pub fn make_singlet() -> BipartiteState {
    BipartiteState::new(
        "singlet",
        ["X", "Z", "D+", "D-"].map(String::from).to_vec(),
        StateSpace::disc(),
        ConditionalRule::Singlet {
            alice_theory: make_rebit(),
        },
    )
    .expect("singlet is no-signaling")
}

/// Finite correlation table `P(a, b | x, y)`, indexed `[x][y][a][b]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Correlation {
    pub table: Vec<Vec<Vec<Vec<f64>>>>,
}

impl Correlation {
    pub fn new(table: Vec<Vec<Vec<Vec<f64>>>>) -> Result<Self> {
        let c = Self { table };
        c.validate()?;
        Ok(c)
    }

    pub fn shape(&self) -> ScenarioShape {
        let nx = self.table.len();
        let ny = self.table.first().map_or(0, Vec::len);
        let na = self
            .table
            .first()
            .and_then(|r| r.first())
            .map_or(0, Vec::len);
        let nb = self
            .table
            .first()
            .and_then(|r| r.first())
            .and_then(|r| r.first())
            .map_or(0, Vec::len);
        ScenarioShape { nx, ny, na, nb }
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.shape();
        if s.nx == 0 || s.ny == 0 || s.na == 0 || s.nb == 0 {
            return Err(Error::ShapeMismatch("empty index set".into()));
        }
        for (x, row) in self.table.iter().enumerate() {
            if row.len() != s.ny {
                return Err(Error::ShapeMismatch(format!("ragged y at x = {x}")));
            }
            for (y, block) in row.iter().enumerate() {
                if block.len() != s.na || block.iter().any(|r| r.len() != s.nb) {
                    return Err(Error::ShapeMismatch(format!(
                        "ragged outcomes at ({x}, {y})"
                    )));
                }
                let mut total = 0.0;
                for &p in block.iter().flatten() {
                    if !p.is_finite() || p < 0.0 {
                        return Err(Error::ProbabilityOutOfRange(p));
                    }
                    total += p;
                }
                if (total - 1.0).abs() > ALGEBRAIC_TOL {
                    return Err(Error::InvalidWeights(format!(
                        "P(.,.|{x},{y}) sums to {total}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn p(&self, a: usize, b: usize, x: usize, y: usize) -> f64 {
        self.table[x][y][a][b]
    }
}

/// PR box: `P(a, b | x, y) = 1/2` iff `a ⊕ b = x·y`.
pub fn make_pr_box() -> Correlation {
    let table = (0..2)
        .map(|x| {
            (0..2)
                .map(|y| {
                    (0..2)
                        .map(|a| {
                            (0..2)
                                .map(|b| if (a ^ b) == (x & y) { 0.5 } else { 0.0 })
                                .collect()
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    Correlation::new(table).expect("PR box is normalized")
}

/// PR box as a steering object on gbits: Alice's `x ∈ {X, Z}` outcome `a`
/// is uniform and leaves Bob in the gbit vertex answering `b = a ⊕ x·y`.
pub fn make_pr_bipartite() -> BipartiteState {
    let gbit = make_gbit();
    let mut branches = BTreeMap::new();
    for (x, label) in ["X", "Z"].into_iter().enumerate() {
        let outcomes = (0..2)
            .map(|a| {
                // coordinate y = P(b = 0 | y)
                let point: Vec<f64> = (0..2)
                    .map(|y| if (a ^ (x & y)) == 0 { 1.0 } else { 0.0 })
                    .collect();
                Branch {
                    prob: 0.5,
                    state: State::new(point),
                }
            })
            .collect();
        branches.insert(label.to_string(), outcomes);
    }
    BipartiteState::new(
        "pr",
        vec!["X".into(), "Z".into()],
        gbit.space,
        ConditionalRule::Table { branches },
    )
    .expect("PR bipartite is no-signaling")
}

/// Spekkens state `(1∧1) ∨ (2∧2) ∨ (3∧3) ∨ (4∧4)`: Alice's outcome on any
/// of σ_X, σ_Y, σ_Z leaves Bob in the same eigenstate.
pub fn make_spekkens_entangled() -> BipartiteState {
    let theory = make_spekkens();
    let mut branches = BTreeMap::new();
    for (i, label) in ["X", "Y", "Z"].into_iter().enumerate() {
        let outcomes = (0..2)
            .map(|a| Branch {
                prob: 0.5,
                state: State::new(theory.space.vertices[2 * i + a].clone()),
            })
            .collect();
        branches.insert(label.to_string(), outcomes);
    }
    BipartiteState::new(
        "spekkens-ent",
        ["X", "Y", "Z"].map(String::from).to_vec(),
        theory.space,
        ConditionalRule::Table { branches },
    )
    .expect("Spekkens entangled state is no-signaling")
}

/// Separable state `Σ_c w_c ω_A^c ⊗ ω_B^c` on two copies of `theory`.
/// States are checked against the convex hull of the space.
pub fn make_separable(
    name: impl Into<String>,
    theory: &Theory,
    components: Vec<SeparableComponent>,
) -> Result<BipartiteState> {
    let total: f64 = components.iter().map(|c| c.weight).sum();
    if components.iter().any(|c| c.weight < 0.0) || (total - 1.0).abs() > ALGEBRAIC_TOL {
        return Err(Error::InvalidWeights(format!(
            "component weights sum to {total}"
        )));
    }
    for c in &components {
        for s in [&c.alice, &c.bob] {
            if !theory.space.contains(&s.point)? {
                return Err(Error::NotInStateSpace(format!("{:?}", s.point.0)));
            }
        }
    }
    let settings = theory
        .measurements
        .iter()
        .map(|m| m.label.clone())
        .collect();
    BipartiteState::new(
        name,
        settings,
        theory.space.clone(),
        ConditionalRule::Separable {
            alice_theory: theory.clone(),
            components,
        },
    )
}

/// Product state `ω_A ⊗ ω_B`; both must be valid states of `theory`.
pub fn make_product(alice: &State, bob: &State, theory: &Theory) -> Result<BipartiteState> {
    theory.validate_state(alice)?;
    theory.validate_state(bob)?;
    make_separable(
        "product",
        theory,
        vec![SeparableComponent {
            weight: 1.0,
            alice: alice.clone(),
            bob: bob.clone(),
        }],
    )
}

/// `½ (0 ⊗ 0) + ½ (1 ⊗ 1)` on classical bits.
pub fn make_classical_correlated() -> BipartiteState {
    let bit = make_classical_bit();
    let zero = State::new(vec![0.0]);
    let one = State::new(vec![1.0]);
    make_separable(
        "classical-corr",
        &bit,
        vec![
            SeparableComponent {
                weight: 0.5,
                alice: zero.clone(),
                bob: zero,
            },
            SeparableComponent {
                weight: 0.5,
                alice: one.clone(),
                bob: one,
            },
        ],
    )
    .expect("static state")
}

/// `P(a, b | x, y) = p(a|x) · P(b | y, ω^{a|x})` for the given settings.
pub fn correlation_from(
    state: &BipartiteState,
    bob_theory: &Theory,
    alice_settings: &[&str],
    bob_settings: &[&str],
) -> Result<Correlation> {
    if bob_theory.space != state.bob_space {
        return Err(Error::TheoryMismatch(format!(
            "state `{}` does not live in theory `{}`",
            state.name, bob_theory.name
        )));
    }
    let bob: Vec<Measurement> = bob_settings
        .iter()
        .map(|y| bob_theory.measurement(y))
        .collect::<Result<_>>()?;
    let mut table = Vec::with_capacity(alice_settings.len());
    for x in alice_settings {
        let branches = state.conditional(x)?;
        let mut row = Vec::with_capacity(bob.len());
        for m in &bob {
            let mut block = Vec::with_capacity(branches.len());
            for br in &branches {
                let dist = measure_distribution(m, &br.state)?;
                block.push(dist.iter().map(|pb| br.prob * pb).collect());
            }
            row.push(block);
        }
        table.push(row);
    }
    Correlation::new(table)
}

/// Named bipartite state for the CLI, together with the theory Bob lives in.
pub fn bipartite_by_name(name: &str, theory: &Theory) -> Result<BipartiteState> {
    match name {
        "singlet" => Ok(make_singlet()),
        "pr" => Ok(make_pr_bipartite()),
        "spekkens-ent" => Ok(make_spekkens_entangled()),
        "classical-corr" => Ok(make_classical_correlated()),
        "product" => {
            let s = crate::uncertainty::upsilon_star(
                theory,
                &theory.measurements[0],
                &theory.measurements[1],
            )?;
            make_product(&s.maximizer, &s.maximizer, theory)
        }
        other => Err(Error::UnknownName {
            kind: "state",
            name: other.to_string(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gpt::evaluate_effect;

    /// Ontic-counting oracle: probability that an epistemic state with the
    /// given support lands in the `+` cell of a partition.
    fn ontic_plus_probability(support: (u8, u8), plus_cell: (u8, u8)) -> f64 {
        [support.0, support.1]
            .iter()
            .filter(|o| **o == plus_cell.0 || **o == plus_cell.1)
            .count() as f64
            / 2.0
    }

    #[test]
    fn classical_bit_is_simplex() {
        let bit = make_classical_bit();
        assert_eq!(bit.space.vertices.len(), 2);
        assert!(bit.space.is_simplex());
    }

    #[test]
    fn gdit_counts() {
        let g = make_gdit(2, 2).unwrap();
        assert_eq!(g.space.vertices.len(), 4);
        assert_eq!(g.space.dim, 2);
        assert!(g.space.vertices.len() - g.space.dim > 1);
        let g3 = make_gdit(3, 2).unwrap();
        assert_eq!((g3.space.vertices.len(), g3.space.dim), (8, 3));
        let g23 = make_gdit(2, 3).unwrap();
        assert_eq!((g23.space.vertices.len(), g23.space.dim), (9, 4));
        assert!(make_gdit(0, 2).is_err());
        assert!(make_gdit(2, 1).is_err());
    }

    #[test]
    fn gbit_vertex_is_deterministic() {
        let g = make_gbit();
        let x = g.measurement("X").unwrap();
        assert_eq!(
            evaluate_effect(&x.effects[0], &State::new(vec![1.0, 1.0])).unwrap(),
            1.0
        );
        let mixed = State::new(vec![0.5, 0.5]);
        assert_eq!(measure_distribution(&x, &mixed).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn rebit_born_rule_matches_formula() {
        let r = make_rebit();
        assert_eq!(
            measure_distribution(&r.measurement("X").unwrap(), &State::disc_pure(0.0)).unwrap()[0],
            1.0
        );
        for (theta, phi) in [(0.0, 45.0), (30.0, 100.0), (200.0, 15.0)] {
            let m = r.measurement(&format!("theta:{theta}")).unwrap();
            let p = measure_distribution(&m, &State::disc_pure(phi)).unwrap()[0];
            let expected = (1.0 + (f64::to_radians(theta - phi)).cos()) / 2.0;
            assert!((p - expected).abs() < 1e-12);
        }
        let p45 =
            measure_distribution(&r.measurement("X").unwrap(), &State::disc_pure(45.0)).unwrap()[0];
        assert!((p45 - 0.853_553_390_593_273_7).abs() < 1e-12);
    }

    #[test]
    fn spekkens_matches_ontic_counting() {
        let sp = make_spekkens();
        assert_eq!(sp.measurements.len(), 3);
        assert_eq!(sp.space.vertices.len(), 6);
        let cells = [("X", (1, 2)), ("Y", (1, 3)), ("Z", (1, 4))];
        for support in SPEKKENS_PURE_SUPPORTS {
            let s = spekkens_state(Some(support)).unwrap();
            for (label, cell) in cells {
                let d = measure_distribution(&sp.measurement(label).unwrap(), &s).unwrap();
                assert_eq!(
                    d[0],
                    ontic_plus_probability(support, cell),
                    "{support:?} {label}"
                );
            }
        }
        let s12 = spekkens_state(Some((1, 2))).unwrap();
        assert_eq!(
            measure_distribution(&sp.measurement("Z").unwrap(), &s12).unwrap(),
            vec![0.5, 0.5]
        );
        let s13 = spekkens_state(Some((1, 3))).unwrap();
        assert_eq!(
            measure_distribution(&sp.measurement("Y").unwrap(), &s13).unwrap(),
            vec![1.0, 0.0]
        );
        assert!(spekkens_state(Some((1, 1))).is_err());
    }

    #[test]
    fn spekkens_mixing_is_restricted() {
        let sp = make_spekkens();
        let s = |a, b| spekkens_state(Some((a, b))).unwrap();
        let m1 = sp.mix_states(&[(0.5, &s(1, 2)), (0.5, &s(3, 4))]).unwrap();
        let m2 = sp.mix_states(&[(0.5, &s(1, 3)), (0.5, &s(2, 4))]).unwrap();
        assert!(m1.approx_eq(&m2, 1e-12));
        assert!(matches!(
            sp.mix_states(&[(0.5, &s(1, 2)), (0.5, &s(1, 3))]),
            Err(Error::NonConvexClosure)
        ));
        let single = sp.mix_states(&[(1.0, &s(1, 4))]).unwrap();
        assert!(single.approx_eq(&s(1, 4), 0.0));
        // x+ + x- = y+ + y- = z+ + z-
        let v = &sp.space.vertices;
        for i in 0..3 {
            for k in 0..3 {
                assert!((v[0].0[k] + v[1].0[k] - v[2 * i].0[k] - v[2 * i + 1].0[k]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn singlet_anticorrelation() {
        let s = make_singlet();
        let br = s.conditional("X").unwrap();
        assert_eq!(br[0].state.point.0, vec![-1.0, 0.0]);
        assert_eq!(br[0].prob, 0.5);
        let reduced = s.reduced_bob_state("theta:33").unwrap();
        assert!(reduced.point.norm() < 1e-15);
        assert!(s.conditional("nope").is_err());
    }

    #[test]
    fn pr_box_marginals_and_bipartite_form() {
        let pr = make_pr_box();
        for x in 0..2 {
            for y in 0..2 {
                for a in 0..2 {
                    let pa: f64 = (0..2).map(|b| pr.p(a, b, x, y)).sum();
                    assert_eq!(pa, 0.5);
                }
            }
        }
        let gbit = make_gbit();
        let c = correlation_from(&make_pr_bipartite(), &gbit, &["X", "Z"], &["X", "Z"]).unwrap();
        assert_eq!(c, pr);
    }

    #[test]
    fn spekkens_entangled_steers_to_eigenstates() {
        let s = make_spekkens_entangled();
        let br = s.conditional("X").unwrap();
        assert!(br[0]
            .state
            .approx_eq(&spekkens_state(Some((1, 2))).unwrap(), 0.0));
        let rx = s.reduced_bob_state("X").unwrap();
        let rz = s.reduced_bob_state("Z").unwrap();
        assert!(rx.approx_eq(&rz, 1e-15));
    }

    #[test]
    fn product_factorizes() {
        let r = make_rebit();
        let a = State::disc_pure(20.0);
        let b = State::new(vec![0.3, -0.2]);
        let p = make_product(&a, &b, &r).unwrap();
        for x in ["X", "Z", "theta:70"] {
            for br in p.conditional(x).unwrap() {
                assert!(br.state.approx_eq(&b, 1e-15));
            }
        }
        let c = correlation_from(&p, &r, &["X", "Z"], &["X", "Z"]).unwrap();
        for x in 0..2 {
            for y in 0..2 {
                let pa: Vec<f64> = (0..2).map(|a| c.table[x][y][a].iter().sum()).collect();
                let pb: Vec<f64> = (0..2)
                    .map(|b| (0..2).map(|a| c.table[x][y][a][b]).sum())
                    .collect();
                for a in 0..2 {
                    for b in 0..2 {
                        assert!((c.table[x][y][a][b] - pa[a] * pb[b]).abs() < 1e-12);
                    }
                }
            }
        }
        assert!(make_product(&State::new(vec![2.0, 0.0]), &b, &r).is_err());
    }

    #[test]
    fn classical_correlated_conditions_on_vertices() {
        let s = make_classical_correlated();
        let br = s.conditional("X").unwrap();
        assert_eq!(br[0].state.point.0, vec![1.0]);
        assert_eq!(br[1].state.point.0, vec![0.0]);
    }

    #[test]
    fn signaling_table_rejected() {
        let gbit = make_gbit();
        let mut branches = BTreeMap::new();
        let det = |p: Vec<f64>| {
            vec![Branch {
                prob: 1.0,
                state: State::new(p),
            }]
        };
        branches.insert("X".to_string(), det(vec![1.0, 1.0]));
        branches.insert("Z".to_string(), det(vec![0.0, 0.0]));
        let rule = ConditionalRule::Table { branches };
        let r = BipartiteState::new(
            "sig",
            vec!["X".into(), "Z".into()],
            gbit.space.clone(),
            rule.clone(),
        );
        assert!(matches!(r, Err(Error::Signaling(_))));
        let s =
            BipartiteState::new_unchecked("sig", vec!["X".into(), "Z".into()], gbit.space, rule);
        assert!(s.check_nosignaling().is_err());
    }

    #[test]
    fn correlation_requires_matching_theory() {
        let err = correlation_from(&make_singlet(), &make_gbit(), &["X"], &["X"]);
        assert!(matches!(err, Err(Error::TheoryMismatch(_))));
    }

    #[test]
    fn correlation_json_is_nested_arrays() {
        let json = serde_json::to_string(&make_pr_box()).unwrap();
        assert!(json.starts_with("[[[[0.5,0.0],[0.0,0.5]]"));
        let back: Correlation = serde_json::from_str(&json).unwrap();
        assert_eq!(back, make_pr_box());
    }
}
