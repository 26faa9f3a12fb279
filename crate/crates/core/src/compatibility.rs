//! Unsharp observables and joint measurability.
//!
//! Covers the LP test for a pair of observables on a polytope, the closed
//! forms of the `λ^τ + μ^τ ≤ 1` family, the master effect for the Spekkens
//! toy bit, and the joint distribution glued from two compatible marginals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gpt::{
    Effect, Measurement, RealVector, State, StateSpace, Theory, ALGEBRAIC_TOL, GEOMETRIC_TOL,
};
use crate::lp::{Cmp, FeasibilityProblem};
use crate::steering::Assemblage;

/// Bisection stops once the bracket is narrower than this.
pub const KAPPA_BISECTION_TOL: f64 = 1e-7;

/// `κ·O + (1 − κ)·I/2` for a dichotomic `O`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnsharpObservable {
    pub base: Measurement,
    pub kappa: f64,
    pub measurement: Measurement,
}

pub fn unsharpen(m: &Measurement, kappa: f64) -> Result<UnsharpObservable> {
    if m.num_outcomes() != 2 {
        return Err(Error::InvalidMeasurement {
            label: m.label.clone(),
            reason: "unsharpening needs a dichotomic observable".into(),
        });
    }
    if !(kappa > 0.0 && kappa <= 1.0) {
        return Err(Error::ParameterOutOfRange {
            name: "kappa",
            value: kappa,
            range: "(0, 1]",
        });
    }
    Ok(UnsharpObservable {
        base: m.clone(),
        kappa,
        measurement: m.smeared(kappa),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointMeasurability {
    pub feasible: bool,
    pub residual: f64,
    /// `master[j][k]` with `Σ_k = o1[j]` and `Σ_j = o2[k]`, when feasible.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub master: Option<Vec<Vec<Effect>>>,
}

/// LP test for a joint measurement of two observables on a polytope: one
/// affine effect per outcome pair, each in `[0, 1]` on every vertex, with
/// row sums equal to the first observable and column sums to the second.
pub fn jointly_measurable_lp(
    o1: &Measurement,
    o2: &Measurement,
    space: &StateSpace,
) -> Result<JointMeasurability> {
    if space.is_disc() {
        return Err(Error::InvalidStateSpace(
            "joint-measurability LP needs a polytope; use the rebit closed form".into(),
        ));
    }
    o1.validate_on(space)?;
    o2.validate_on(space)?;
    let dim = space.dim;
    let (n1, n2) = (o1.num_outcomes(), o2.num_outcomes());

    let mut lp = FeasibilityProblem::new();
    // coefficient layout per effect: [offset, linear...]
    let coeffs: Vec<Vec<Vec<usize>>> = (0..n1)
        .map(|_| {
            (0..n2)
                .map(|_| (0..=dim).map(|_| lp.add_free()).collect())
                .collect()
        })
        .collect();

    for row in coeffs.iter().flatten() {
        for v in &space.vertices {
            let mut terms = vec![(row[0], 1.0)];
            terms.extend(v.0.iter().enumerate().map(|(i, &c)| (row[i + 1], c)));
            lp.add_row(terms.clone(), Cmp::Ge, 0.0);
            lp.add_row(terms, Cmp::Le, 1.0);
        }
    }
    let coeffs_of = |e: &Effect| -> Vec<f64> {
        std::iter::once(e.offset)
            .chain(e.linear.0.iter().copied())
            .collect()
    };
    for (j, e) in o1.effects.iter().enumerate() {
        for (i, target) in coeffs_of(e).into_iter().enumerate() {
            let terms = (0..n2).map(|k| (coeffs[j][k][i], 1.0)).collect();
            lp.add_row(terms, Cmp::Eq, target);
        }
    }
    for (k, e) in o2.effects.iter().enumerate() {
        for (i, target) in coeffs_of(e).into_iter().enumerate() {
            let terms = (0..n1).map(|j| (coeffs[j][k][i], 1.0)).collect();
            lp.add_row(terms, Cmp::Eq, target);
        }
    }

    let sol = lp.solve()?;
    let feasible = sol.is_feasible();
    let master = feasible.then(|| {
        coeffs
            .iter()
            .map(|row| {
                row.iter()
                    .map(|c| {
                        Effect::new(
                            c[1..].iter().map(|&v| sol.values[v]).collect::<Vec<_>>(),
                            sol.values[c[0]],
                        )
                    })
                    .collect()
            })
            .collect()
    });
    Ok(JointMeasurability {
        feasible,
        residual: sol.residual,
        master,
    })
}

/// Rebit X/Z joint measurability of unsharpness `(λ, μ)`: `λ² + μ² ≤ 1`.
/// Both parameters are expected in `(0, 1]`.
pub fn jointly_measurable_rebit(lambda: f64, mu: f64) -> bool {
    lambda * lambda + mu * mu <= 1.0 + ALGEBRAIC_TOL
}

fn check_tau(tau: f64) -> Result<()> {
    if tau.is_finite() && tau >= 1.0 {
        Ok(())
    } else {
        Err(Error::ParameterOutOfRange {
            name: "tau",
            value: tau,
            range: "tau >= 1",
        })
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if (1.0..=2.0).contains(&beta) {
        Ok(())
    } else {
        Err(Error::ParameterOutOfRange {
            name: "beta",
            value: beta,
            range: "[1, 2]",
        })
    }
}

pub(crate) fn check_kappa(kappa: f64) -> Result<()> {
    if (0.5..=1.0).contains(&kappa) {
        Ok(())
    } else {
        Err(Error::ParameterOutOfRange {
            name: "kappa",
            value: kappa,
            range: "[1/2, 1]",
        })
    }
}

/// `2^(−1/τ)`: largest symmetric unsharpness inside `λ^τ + μ^τ ≤ 1`.
pub fn kappa_opt(tau: f64) -> Result<f64> {
    check_tau(tau)?;
    Ok(2f64.powf(-1.0 / tau))
}

/// `2^(−1 + 1/τ)`: smearing of a gbit observable that yields a τ-theory one.
pub fn alpha_smearing(tau: f64) -> Result<f64> {
    check_tau(tau)?;
    Ok(2f64.powf(-1.0 + 1.0 / tau))
}

/// `1 + β / (2κ)`.
pub fn upsilon_from_kappa(kappa: f64, beta: f64) -> Result<f64> {
    check_kappa(kappa)?;
    check_beta(beta)?;
    Ok(1.0 + beta / (2.0 * kappa))
}

/// `β / (2(υ* − 1))`, which must land in `[1/2, 1]`.
pub fn kappa_from_upsilon(upsilon: f64, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    if !(upsilon > 1.0 && upsilon <= 2.0) {
        return Err(Error::ParameterOutOfRange {
            name: "upsilon_star",
            value: upsilon,
            range: "(1, 2]",
        });
    }
    let kappa = beta / (2.0 * (upsilon - 1.0));
    if !(0.5 - ALGEBRAIC_TOL..=1.0 + ALGEBRAIC_TOL).contains(&kappa) {
        return Err(Error::ParameterOutOfRange {
            name: "kappa",
            value: kappa,
            range: "[1/2, 1]",
        });
    }
    Ok(kappa.clamp(0.5, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyPoint {
    pub tau: f64,
    pub kappa_opt: f64,
    pub alpha: f64,
    pub upsilon_star: f64,
    pub beta: f64,
}

impl FamilyPoint {
    pub fn new(tau: f64, beta: f64) -> Result<Self> {
        let kappa = kappa_opt(tau)?;
        Ok(Self {
            tau,
            kappa_opt: kappa,
            alpha: alpha_smearing(tau)?,
            upsilon_star: upsilon_from_kappa(kappa, beta)?,
            beta,
        })
    }
}

/// Largest `κ` for which `x^(κ)` and `z^(κ)` are jointly measurable on the
/// polytope, by bisection over the LP.
pub fn kappa_opt_lp(theory: &Theory, x: &str, z: &str) -> Result<f64> {
    let mx = theory.measurement(x)?;
    let mz = theory.measurement(z)?;
    let feasible = |k: f64| -> Result<bool> {
        let a = unsharpen(&mx, k)?;
        let b = unsharpen(&mz, k)?;
        Ok(jointly_measurable_lp(&a.measurement, &b.measurement, &theory.space)?.feasible)
    };
    if feasible(1.0)? {
        return Ok(1.0);
    }
    let (mut lo, mut hi) = (f64::MIN_POSITIVE, 1.0);
    if !feasible(lo)? {
        return Err(Error::Inconsistent(
            "trivial observables are not jointly measurable".into(),
        ));
    }
    while hi - lo > KAPPA_BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        if feasible(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Symmetric rebit unsharpness on the circle `λ² + μ² = 1`.
pub fn kappa_opt_rebit() -> f64 {
    0.5f64.sqrt()
}

/// One row of the feasibility region scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionPoint {
    pub lambda: f64,
    pub mu: f64,
    pub feasible: bool,
}

/// Feasibility of `(x^(λ), z^(μ))` on the grid `λ, μ ∈ {1/n, …, 1}`.
/// The rebit uses its closed form; polytopes the LP.
pub fn jm_region(theory: &Theory, x: &str, z: &str, n: usize) -> Result<Vec<RegionPoint>> {
    let mx = theory.measurement(x)?;
    let mz = theory.measurement(z)?;
    let mut out = Vec::with_capacity(n * n);
    for i in 1..=n {
        for j in 1..=n {
            let (lambda, mu) = (i as f64 / n as f64, j as f64 / n as f64);
            let feasible = if theory.space.is_disc() {
                jointly_measurable_rebit(lambda, mu)
            } else {
                let a = unsharpen(&mx, lambda)?;
                let b = unsharpen(&mz, mu)?;
                jointly_measurable_lp(&a.measurement, &b.measurement, &theory.space)?.feasible
            };
            out.push(RegionPoint {
                lambda,
                mu,
                feasible,
            });
        }
    }
    Ok(out)
}

/// For each `λ` of a region scan, the largest feasible `μ` (0 if none).
pub fn region_boundary(region: &[RegionPoint]) -> Vec<(f64, f64)> {
    let mut lambdas: Vec<f64> = region.iter().map(|p| p.lambda).collect();
    lambdas.dedup();
    lambdas
        .into_iter()
        .map(|l| {
            let mu = region
                .iter()
                .filter(|p| p.lambda == l && p.feasible)
                .map(|p| p.mu)
                .fold(0.0, f64::max);
            (l, mu)
        })
        .collect()
}

/// Values `M[j,k]·v` on the four eigenstates of a Spekkens observable pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MasterEffectTable {
    pub first: String,
    pub second: String,
    /// Labels of the evaluation points, e.g. `["x+", "x-", "z+", "z-"]`.
    pub points: Vec<String>,
    /// `values[j][k][p]`: outcome pair `(j, k)` (0 = `+`) at point `p`.
    pub values: Vec<Vec<Vec<f64>>>,
    /// The affine master effects, `effects[j][k]`.
    pub effects: Vec<Vec<Effect>>,
}

impl MasterEffectTable {
    pub fn value(&self, j: usize, k: usize, point: &str) -> Option<f64> {
        let p = self.points.iter().position(|s| s == point)?;
        Some(self.values[j][k][p])
    }
}

/// Solves the master-effect system for two Spekkens observables.
///
/// On each eigenstate `v` the four numbers `M[j,k]·v` form a nonnegative
/// 2×2 table with known margins (the two observables' outcome
/// probabilities). One margin is deterministic on an eigenstate, which pins
/// the table. The affine functionals are then read off and checked against
/// `a⁺ + a⁻ = b⁺ + b⁻`, the marginal conditions and validity on every
/// state of the theory.
pub fn spekkens_master_effect(
    theory: &Theory,
    first: &str,
    second: &str,
) -> Result<MasterEffectTable> {
    let axis_of = |label: &str| -> Result<usize> {
        let m = theory.measurement(label)?;
        let plus = &m.effects[0];
        let nz: Vec<usize> = (0..plus.linear.len())
            .filter(|&i| plus.linear.0[i] != 0.0)
            .collect();
        match nz.as_slice() {
            [i] if plus.linear.0[*i] == 1.0 && plus.offset == 0.0 => Ok(*i),
            _ => Err(Error::InvalidMeasurement {
                label: label.into(),
                reason: "not a coordinate-reading Spekkens observable".into(),
            }),
        }
    };
    let (ia, ib) = (axis_of(first)?, axis_of(second)?);
    if ia == ib {
        return Err(Error::Inconsistent("observable paired with itself".into()));
    }
    let ma = theory.measurement(first)?;
    let mb = theory.measurement(second)?;
    // vertex order is (x+, x-, y+, y-, z+, z-)
    let v = &theory.space.vertices;
    let eig = |axis: usize| {
        (
            State::new(v[2 * axis].clone()),
            State::new(v[2 * axis + 1].clone()),
        )
    };
    let (ap, am) = eig(ia);
    let (bp, bm) = eig(ib);
    let points = [&ap, &am, &bp, &bm];
    let lower = |s: &str| s.to_lowercase();
    let names = vec![
        format!("{}+", lower(first)),
        format!("{}-", lower(first)),
        format!("{}+", lower(second)),
        format!("{}-", lower(second)),
    ];

    let mut values = vec![vec![vec![0.0; 4]; 2]; 2];
    for (p, s) in points.iter().enumerate() {
        let r = [
            ma.effects[0].value_at(&s.point),
            ma.effects[1].value_at(&s.point),
        ];
        let c = [
            mb.effects[0].value_at(&s.point),
            mb.effects[1].value_at(&s.point),
        ];
        // M++ = t, M+- = r+ - t, M-+ = c+ - t, M-- = r- - c+ + t, all >= 0
        let lo = 0f64.max(c[0] - r[1]);
        let hi = r[0].min(c[0]);
        if lo > hi + ALGEBRAIC_TOL {
            return Err(Error::Inconsistent(format!(
                "no nonnegative table at {}",
                names[p]
            )));
        }
        if hi - lo > ALGEBRAIC_TOL {
            return Err(Error::Inconsistent(format!(
                "table at {} is not pinned down",
                names[p]
            )));
        }
        let t = lo;
        values[0][0][p] = t;
        values[0][1][p] = r[0] - t;
        values[1][0][p] = c[0] - t;
        values[1][1][p] = r[1] - c[0] + t;
    }

    // affinity on the dependent points: M·a+ + M·a- = M·b+ + M·b-
    for row in values.iter().flatten() {
        if (row[0] + row[1] - row[2] - row[3]).abs() > ALGEBRAIC_TOL {
            return Err(Error::Inconsistent(format!(
                "{} + {} != {} + {} for a master component",
                names[0], names[1], names[2], names[3]
            )));
        }
    }

    let centre = theory.space.barycenter();
    let effects: Vec<Vec<Effect>> = values
        .iter()
        .map(|row| {
            row.iter()
                .map(|vals| {
                    let mut lin = vec![0.0; theory.space.dim];
                    lin[ia] = vals[0] - vals[1];
                    lin[ib] = vals[2] - vals[3];
                    let lin = RealVector(lin);
                    let offset = (vals[0] + vals[1]) / 2.0 - lin.dot(&centre);
                    Effect::new(lin, offset)
                })
                .collect()
        })
        .collect();

    for (j, e) in ma.effects.iter().enumerate() {
        check_effect_sum(&[&effects[j][0], &effects[j][1]], e)?;
    }
    for (k, e) in mb.effects.iter().enumerate() {
        check_effect_sum(&[&effects[0][k], &effects[1][k]], e)?;
    }
    for s in theory.valid_states.iter().flatten() {
        for e in effects.iter().flatten() {
            let val = e.value_at(&s.point);
            if !(-ALGEBRAIC_TOL..=1.0 + ALGEBRAIC_TOL).contains(&val) {
                return Err(Error::Inconsistent(format!(
                    "master effect leaves [0,1] at {:?}",
                    s.point.0
                )));
            }
        }
    }

    Ok(MasterEffectTable {
        first: first.into(),
        second: second.into(),
        points: names,
        values,
        effects,
    })
}

fn check_effect_sum(parts: &[&Effect], target: &Effect) -> Result<()> {
    let mut lin = RealVector::zeros(target.linear.len());
    let mut off = 0.0;
    for p in parts {
        lin.axpy(1.0, &p.linear);
        off += p.offset;
    }
    if lin.max_abs_diff(&target.linear) > ALGEBRAIC_TOL
        || (off - target.offset).abs() > ALGEBRAIC_TOL
    {
        return Err(Error::Inconsistent(
            "master effect marginal mismatch".into(),
        ));
    }
    Ok(())
}

/// Joint table `P(b0, b1, a | x)` indexed `[b0][b1][a]`.
pub type JointTable = Vec<Vec<Vec<f64>>>;

/// `P(b0, b1, a | x) = p(a|x) · M[b0][b1](ω^{a|x})` for a joint measurement
/// `master` of Bob's two observables.
pub fn bob_joint_table(asm: &Assemblage, x: &str, master: &[Vec<Effect>]) -> Result<JointTable> {
    let branches = asm.branches(x)?;
    let value = |m: &Effect, s: &State| -> Result<f64> {
        let v = m.value_at(&s.point);
        if (-GEOMETRIC_TOL..=1.0 + GEOMETRIC_TOL).contains(&v) {
            Ok(v.clamp(0.0, 1.0))
        } else {
            Err(Error::ProbabilityOutOfRange(v))
        }
    };
    master
        .iter()
        .map(|row| {
            row.iter()
                .map(|m| {
                    branches
                        .iter()
                        .map(|b| Ok(b.prob * value(m, &b.state)?))
                        .collect()
                })
                .collect()
        })
        .collect()
}

/// Glues `P(b0, b1, a0)` and `P(b0, b1, a1)` sharing the marginal
/// `P(b0, b1)` into `P(a0, a1, b0, b1) = P(b0,b1,a0) P(b0,b1,a1) / P(b0,b1)`,
/// indexed `[a0][a1][b0][b1]`.
pub fn fine_joint_distribution(
    left: &JointTable,
    right: &JointTable,
) -> Result<Vec<Vec<Vec<Vec<f64>>>>> {
    let nb0 = left.len();
    let nb1 = left.first().map_or(0, Vec::len);
    let na0 = left.first().and_then(|r| r.first()).map_or(0, Vec::len);
    let na1 = right.first().and_then(|r| r.first()).map_or(0, Vec::len);
    let shape_ok = |t: &JointTable, na: usize| {
        t.len() == nb0
            && t.iter()
                .all(|r| r.len() == nb1 && r.iter().all(|c| c.len() == na))
    };
    if nb0 == 0 || nb1 == 0 || na0 == 0 || na1 == 0 || !shape_ok(left, na0) || !shape_ok(right, na1)
    {
        return Err(Error::ShapeMismatch(
            "joint tables must share the (b0, b1) grid".into(),
        ));
    }
    for &p in left.iter().chain(right).flatten().flatten() {
        if !p.is_finite() || p < 0.0 {
            return Err(Error::ProbabilityOutOfRange(p));
        }
    }

    let mut out = vec![vec![vec![vec![0.0; nb1]; nb0]; na1]; na0];
    for b0 in 0..nb0 {
        for b1 in 0..nb1 {
            let ml: f64 = left[b0][b1].iter().sum();
            let mr: f64 = right[b0][b1].iter().sum();
            if (ml - mr).abs() > GEOMETRIC_TOL {
                return Err(Error::MarginalMismatch((ml - mr).abs()));
            }
            if ml <= 0.0 {
                if right[b0][b1].iter().any(|&p| p > 0.0) {
                    return Err(Error::ZeroMarginal(vec![b0, b1]));
                }
                continue;
            }
            for a0 in 0..na0 {
                for a1 in 0..na1 {
                    out[a0][a1][b0][b1] = left[b0][b1][a0] * right[b0][b1][a1] / ml;
                }
            }
        }
    }
    Ok(out)
}
