//! Assemblages, the conditioned-uncertainty test and local-hidden-state
//! feasibility.
//!
//! An assemblage records, for each Alice setting `x` and outcome `a`, the
//! probability `p(a|x)` and Bob's normalized conditional state `ω^{a|x}`; the
//! subnormalized state is their product. It is unsteerable when there are
//! subnormalized states `σ_λ` indexed by deterministic response functions
//! `λ: x ↦ a` with `Σ_{λ: λ(x) = a} σ_λ = p(a|x) ω^{a|x}` for every `(x, a)`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gpt::{
    Measurement, RealVector, State, StateSpace, Theory, ALGEBRAIC_TOL, GEOMETRIC_TOL,
};
use crate::lp::{Cmp, FeasibilityProblem};
use crate::theories::{BipartiteState, Branch};
use crate::uncertainty::{max_outcome_prob, upsilon_star};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assemblage {
    pub settings: Vec<String>,
    pub entries: BTreeMap<String, Vec<Branch>>,
}

impl Assemblage {
    pub fn new(settings: Vec<String>, entries: BTreeMap<String, Vec<Branch>>) -> Result<Self> {
        let asm = Self { settings, entries };
        asm.validate()?;
        Ok(asm)
    }

    pub fn validate(&self) -> Result<()> {
        let mut reference: Option<RealVector> = None;
        for x in &self.settings {
            let branches = self.branches(x)?;
            let total: f64 = branches.iter().map(|b| b.prob).sum();
            if branches.iter().any(|b| b.prob < 0.0) || (total - 1.0).abs() > ALGEBRAIC_TOL {
                return Err(Error::InvalidWeights(format!("p(a|{x}) sums to {total}")));
            }
            let reduced = self.reduced(x)?;
            match &reference {
                None => reference = Some(reduced),
                Some(r) if r.max_abs_diff(&reduced) > GEOMETRIC_TOL => {
                    return Err(Error::Signaling(format!("reduced state differs for `{x}`")));
                }
                Some(_) => {}
            }
        }
        Ok(())
    }

    pub fn branches(&self, x: &str) -> Result<&[Branch]> {
        self.entries
            .get(x)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::UnknownSetting(x.to_string()))
    }

    /// `Σ_a p(a|x) ω^{a|x}`.
    pub fn reduced(&self, x: &str) -> Result<RealVector> {
        let branches = self.branches(x)?;
        let dim = branches.first().map_or(0, |b| b.state.dim());
        let mut r = RealVector::zeros(dim);
        for b in branches {
            r.axpy(b.prob, &b.state.point);
        }
        Ok(r)
    }

    /// Replaces Alice's setting `x` by its `kappa`-unsharp version:
    /// `ω̃'^{a|x} = κ ω̃^{a|x} + (1 − κ)/n · Σ_a' ω̃^{a'|x}`.
    pub fn smeared(&self, x: &str, kappa: f64) -> Result<Assemblage> {
        if !(kappa > 0.0 && kappa <= 1.0) {
            return Err(Error::ParameterOutOfRange {
                name: "kappa",
                value: kappa,
                range: "(0, 1]",
            });
        }
        let branches = self.branches(x)?;
        let n = branches.len() as f64;
        let reduced = self.reduced(x)?;
        let smeared = branches
            .iter()
            .map(|b| {
                let prob = kappa * b.prob + (1.0 - kappa) / n;
                let mut sub = b.state.point.scaled(kappa * b.prob);
                sub.axpy((1.0 - kappa) / n, &reduced);
                let state = if prob > 0.0 {
                    sub.scaled(1.0 / prob)
                } else {
                    reduced.clone()
                };
                Branch {
                    prob,
                    state: State::new(state),
                }
            })
            .collect();
        let mut out = self.clone();
        out.entries.insert(x.to_string(), smeared);
        Ok(out)
    }
}

pub fn assemblage_from(state: &BipartiteState, alice_settings: &[&str]) -> Result<Assemblage> {
    let entries = alice_settings
        .iter()
        .map(|x| Ok((x.to_string(), state.conditional(x)?)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    Assemblage::new(
        alice_settings.iter().map(|s| s.to_string()).collect(),
        entries,
    )
}

/// Which Alice setting answers each Bob setting, as `(y, x)` pairs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pairing(pub Vec<(String, String)>);

impl Pairing {
    /// `x_j = y_j`.
    pub fn matched(labels: &[&str]) -> Self {
        Self(
            labels
                .iter()
                .map(|l| (l.to_string(), l.to_string()))
                .collect(),
        )
    }

    /// Parses `y0=x0,y1=x1`.
    pub fn parse(spec: &str) -> Result<Self> {
        spec.split(',')
            .map(|pair| {
                let (y, x) = pair
                    .split_once('=')
                    .ok_or_else(|| Error::MissingPairing(pair.trim().to_string()))?;
                Ok((y.trim().to_string(), x.trim().to_string()))
            })
            .collect::<Result<_>>()
            .map(Self)
    }

    pub fn alice_for(&self, y: &str) -> Result<&str> {
        self.0
            .iter()
            .find(|(b, _)| b == y)
            .map(|(_, a)| a.as_str())
            .ok_or_else(|| Error::MissingPairing(y.to_string()))
    }
}

/// `Σ_j Σ_a p(a|x_j) q(y_j, ω^{a|x_j})`.
pub fn conditioned_certainty_sum(
    asm: &Assemblage,
    pairing: &Pairing,
    bob_settings: &[Measurement],
) -> Result<f64> {
    let mut total = 0.0;
    for y in bob_settings {
        let x = pairing.alice_for(&y.label)?;
        for b in asm.branches(x)? {
            total += b.prob * max_outcome_prob(y, &b.state)?;
        }
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonlocalityVerdict {
    pub lhs: f64,
    pub bound: f64,
    pub violated: bool,
    pub margin: f64,
}

impl NonlocalityVerdict {
    pub fn new(lhs: f64, bound: f64) -> Self {
        Self {
            lhs,
            bound,
            violated: lhs > bound + GEOMETRIC_TOL,
            margin: lhs - bound,
        }
    }
}

fn resolve_pair(theory: &Theory, bob_settings: &[&str]) -> Result<[Measurement; 2]> {
    match bob_settings {
        [y0, y1] => Ok([theory.measurement(y0)?, theory.measurement(y1)?]),
        _ => Err(Error::ShapeMismatch(format!(
            "exactly two Bob settings required, got {}",
            bob_settings.len()
        ))),
    }
}

fn check_space(state: &BipartiteState, theory: &Theory) -> Result<()> {
    if state.bob_space != theory.space {
        return Err(Error::TheoryMismatch(format!(
            "state `{}` does not live in theory `{}`",
            state.name, theory.name
        )));
    }
    Ok(())
}

/// Compares the conditioned certainty sum against the theory's υ*.
pub fn operational_nonlocality_test(
    state: &BipartiteState,
    pairing: &Pairing,
    bob_settings: &[&str],
    theory: &Theory,
) -> Result<NonlocalityVerdict> {
    check_space(state, theory)?;
    let ys = resolve_pair(theory, bob_settings)?;
    let xs: Vec<&str> = ys
        .iter()
        .map(|y| pairing.alice_for(&y.label))
        .collect::<Result<_>>()?;
    let mut unique = xs.clone();
    unique.dedup();
    let asm = assemblage_from(state, &unique)?;
    let lhs = conditioned_certainty_sum(&asm, pairing, &ys)?;
    let bound = upsilon_star(theory, &ys[0], &ys[1])?.upsilon_star;
    Ok(NonlocalityVerdict::new(lhs, bound))
}

/// One hidden variable of a local-hidden-state model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HiddenState {
    /// Deterministic outcome for each setting, in assemblage setting order.
    pub response: Vec<usize>,
    pub weight: f64,
    pub state: State,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LhsReport {
    pub feasible: bool,
    pub residual: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<Vec<HiddenState>>,
}

/// All deterministic response functions for the given outcome counts.
pub fn response_functions(outcomes: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for &n in outcomes {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..n).map(move |a| {
                    let mut r = prefix.clone();
                    r.push(a);
                    r
                })
            })
            .collect();
    }
    out
}

/// Local-hidden-state feasibility LP over the cone of `space` (the outer
/// 720-gon for the disc).
pub fn lhs_model_feasible(asm: &Assemblage, space: &StateSpace) -> Result<LhsReport> {
    let vertices = space.lp_vertices();
    let dim = space.dim;
    let outcomes: Vec<usize> = asm
        .settings
        .iter()
        .map(|x| asm.branches(x).map(<[Branch]>::len))
        .collect::<Result<_>>()?;
    let lambdas = response_functions(&outcomes);

    let mut lp = FeasibilityProblem::new();
    let vars: Vec<Vec<usize>> = lambdas
        .iter()
        .map(|_| vertices.iter().map(|_| lp.add_nonneg()).collect())
        .collect();

    for (i, x) in asm.settings.iter().enumerate() {
        for (a, branch) in asm.branches(x)?.iter().enumerate() {
            if branch.state.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: branch.state.dim(),
                });
            }
            let members: Vec<usize> = (0..lambdas.len()).filter(|&l| lambdas[l][i] == a).collect();
            // homogeneous coordinate 0 is the weight, 1..=dim the point
            for k in 0..=dim {
                let mut terms = Vec::with_capacity(members.len() * vertices.len());
                for &l in &members {
                    for (v, vert) in vertices.iter().enumerate() {
                        let coeff = if k == 0 { 1.0 } else { vert.0[k - 1] };
                        terms.push((vars[l][v], coeff));
                    }
                }
                let rhs = if k == 0 {
                    branch.prob
                } else {
                    branch.prob * branch.state.point.0[k - 1]
                };
                lp.add_row(terms, Cmp::Eq, rhs);
            }
        }
    }

    let sol = lp.solve()?;
    let feasible = sol.is_feasible();
    let model = feasible.then(|| {
        lambdas
            .iter()
            .zip(&vars)
            .filter_map(|(resp, vs)| {
                let weight: f64 = vs.iter().map(|&v| sol.values[v]).sum();
                if weight <= 0.0 {
                    return None;
                }
                let mut point = RealVector::zeros(dim);
                for (&v, vert) in vs.iter().zip(vertices.iter()) {
                    point.axpy(sol.values[v] / weight, vert);
                }
                Some(HiddenState {
                    response: resp.clone(),
                    weight,
                    state: State::new(point),
                })
            })
            .collect()
    });
    Ok(LhsReport {
        feasible,
        residual: sol.residual,
        model,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImplicationReport {
    pub verdict: NonlocalityVerdict,
    pub lhs_feasible: bool,
    /// `violated ⇒ ¬lhs_feasible`.
    pub implication_holds: bool,
}

/// Checks that a violation of the conditioned-uncertainty bound only comes
/// with an assemblage that has no local-hidden-state model.
pub fn steering_implies_violation_check(
    asm: &Assemblage,
    pairing: &Pairing,
    bob_settings: &[&str],
    theory: &Theory,
) -> Result<ImplicationReport> {
    let ys = resolve_pair(theory, bob_settings)?;
    let lhs = conditioned_certainty_sum(asm, pairing, &ys)?;
    let bound = upsilon_star(theory, &ys[0], &ys[1])?.upsilon_star;
    let verdict = NonlocalityVerdict::new(lhs, bound);
    let lhs_feasible = lhs_model_feasible(asm, &theory.space)?.feasible;
    Ok(ImplicationReport {
        implication_holds: !verdict.violated || !lhs_feasible,
        verdict,
        lhs_feasible,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::theories::*;

    const UPS_REBIT: f64 = 1.707_106_781_186_547_5;

    #[test]
    fn singlet_assemblage_shape() {
        let asm = assemblage_from(&make_singlet(), &["X", "Z"]).unwrap();
        assert_eq!(asm.entries.values().map(Vec::len).sum::<usize>(), 4);
        for b in asm.entries.values().flatten() {
            assert_eq!(b.prob, 0.5);
            assert!((b.state.point.norm() - 1.0).abs() < 1e-15);
        }
        let x = asm.branches("X").unwrap();
        assert_eq!(x[0].state.point.0, vec![-1.0, 0.0]);
        assert_eq!(x[1].state.point.0, vec![1.0, 0.0]);
        assert!(assemblage_from(&make_singlet(), &["bogus"]).is_err());
    }

    #[test]
    fn product_assemblage_shares_one_state() {
        let r = make_rebit();
        let bob = State::new(vec![0.1, 0.2]);
        let p = make_product(&State::disc_pure(10.0), &bob, &r).unwrap();
        let asm = assemblage_from(&p, &["X", "Z"]).unwrap();
        assert!(asm
            .entries
            .values()
            .flatten()
            .all(|b| b.state.approx_eq(&bob, 1e-15)));
    }

    #[test]
    fn conditioned_sums() {
        let r = make_rebit();
        let ys = [r.measurement("X").unwrap(), r.measurement("Z").unwrap()];
        let pairing = Pairing::matched(&["X", "Z"]);
        let singlet = assemblage_from(&make_singlet(), &["X", "Z"]).unwrap();
        assert!((conditioned_certainty_sum(&singlet, &pairing, &ys).unwrap() - 2.0).abs() < 1e-12);

        let opt = State::disc_pure(45.0);
        let prod = assemblage_from(&make_product(&opt, &opt, &r).unwrap(), &["X", "Z"]).unwrap();
        assert!(
            (conditioned_certainty_sum(&prod, &pairing, &ys).unwrap() - UPS_REBIT).abs() < 1e-12
        );

        let sp = make_spekkens();
        let spys = [sp.measurement("X").unwrap(), sp.measurement("Z").unwrap()];
        let ent = assemblage_from(&make_spekkens_entangled(), &["X", "Z"]).unwrap();
        assert_eq!(
            conditioned_certainty_sum(&ent, &pairing, &spys).unwrap(),
            2.0
        );

        let bad = Pairing::matched(&["X"]);
        assert!(matches!(
            conditioned_certainty_sum(&singlet, &bad, &ys),
            Err(Error::MissingPairing(_))
        ));
    }

    #[test]
    fn verdicts() {
        let pairing = Pairing::matched(&["X", "Z"]);
        let v = operational_nonlocality_test(&make_singlet(), &pairing, &["X", "Z"], &make_rebit())
            .unwrap();
        assert!(v.violated);
        assert!((v.lhs - 2.0).abs() < 1e-12 && (v.bound - UPS_REBIT).abs() < 1e-9);

        let v = operational_nonlocality_test(
            &make_spekkens_entangled(),
            &pairing,
            &["X", "Z"],
            &make_spekkens(),
        )
        .unwrap();
        assert!(v.violated);
        assert_eq!((v.lhs, v.bound), (2.0, 1.5));

        let v =
            operational_nonlocality_test(&make_pr_bipartite(), &pairing, &["X", "Z"], &make_gbit())
                .unwrap();
        assert!(!v.violated);
        assert_eq!((v.lhs, v.bound), (2.0, 2.0));

        let v = operational_nonlocality_test(
            &make_classical_correlated(),
            &pairing,
            &["X", "Z"],
            &make_classical_bit(),
        )
        .unwrap();
        assert!(!v.violated);

        let mismatch =
            operational_nonlocality_test(&make_singlet(), &pairing, &["X", "Z"], &make_gbit());
        assert!(matches!(mismatch, Err(Error::TheoryMismatch(_))));
    }

    #[test]
    fn response_function_enumeration() {
        assert_eq!(
            response_functions(&[2, 2]),
            vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]
        );
        assert_eq!(response_functions(&[2, 3]).len(), 6);
    }

    #[test]
    fn lhs_lp_examples() {
        let r = make_rebit();
        let singlet = assemblage_from(&make_singlet(), &["X", "Z"]).unwrap();
        assert!(!lhs_model_feasible(&singlet, &r.space).unwrap().feasible);

        let gbit = make_gbit();
        let pr = assemblage_from(&make_pr_bipartite(), &["X", "Z"]).unwrap();
        assert!(!lhs_model_feasible(&pr, &gbit.space).unwrap().feasible);

        let prod = make_product(&State::disc_pure(45.0), &State::new(vec![0.2, -0.4]), &r).unwrap();
        let report =
            lhs_model_feasible(&assemblage_from(&prod, &["X", "Z"]).unwrap(), &r.space).unwrap();
        assert!(report.feasible);
        let total: f64 = report.model.unwrap().iter().map(|h| h.weight).sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn lhs_model_reproduces_assemblage() {
        let c = make_classical_correlated();
        let asm = assemblage_from(&c, &["X", "Z"]).unwrap();
        let report = lhs_model_feasible(&asm, &make_classical_bit().space).unwrap();
        let model = report.model.unwrap();
        for (i, x) in asm.settings.iter().enumerate() {
            for (a, b) in asm.branches(x).unwrap().iter().enumerate() {
                let mut w = 0.0;
                let mut p = 0.0;
                for h in model.iter().filter(|h| h.response[i] == a) {
                    w += h.weight;
                    p += h.weight * h.state.point.0[0];
                }
                assert!((w - b.prob).abs() < 1e-9);
                assert!((p - b.prob * b.state.point.0[0]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn implication_cases() {
        let pairing = Pairing::matched(&["X", "Z"]);
        let singlet = assemblage_from(&make_singlet(), &["X", "Z"]).unwrap();
        let r = steering_implies_violation_check(&singlet, &pairing, &["X", "Z"], &make_rebit())
            .unwrap();
        assert!(r.verdict.violated && !r.lhs_feasible && r.implication_holds);

        let rebit = make_rebit();
        let prod = make_product(&State::disc_pure(45.0), &State::disc_pure(45.0), &rebit).unwrap();
        let asm = assemblage_from(&prod, &["X", "Z"]).unwrap();
        let r = steering_implies_violation_check(&asm, &pairing, &["X", "Z"], &rebit).unwrap();
        assert!(!r.verdict.violated && r.lhs_feasible && r.implication_holds);

        let pr = assemblage_from(&make_pr_bipartite(), &["X", "Z"]).unwrap();
        let r = steering_implies_violation_check(&pr, &pairing, &["X", "Z"], &make_gbit()).unwrap();
        assert!(!r.verdict.violated && !r.lhs_feasible && r.implication_holds);
    }

    #[test]
    fn smearing_keeps_reduced_state() {
        let pr = assemblage_from(&make_pr_bipartite(), &["X", "Z"]).unwrap();
        let s = pr.smeared("X", 0.3).unwrap();
        s.validate().unwrap();
        assert!(pr.smeared("X", 0.0).is_err());
        let full = pr.smeared("X", 1.0).unwrap();
        assert_eq!(full, pr);
    }

    #[test]
    fn pairing_parse() {
        let p = Pairing::parse("X=Z, Z=X").unwrap();
        assert_eq!(p.alice_for("X").unwrap(), "Z");
        assert!(Pairing::parse("X").is_err());
    }

    /// Brute-force LHS oracle for two dichotomic settings on a hypercube
    /// state space, whose cone is `{(t, u) : 0 ≤ u_i ≤ t}`. With hidden
    /// variables `(λ0, λ1)` the four unnormalized states are fixed by the
    /// single free vector `S = σ_00`:
    /// `σ_01 = σ̃^{0|0} − S`, `σ_10 = σ̃^{0|1} − S`, `σ_11 = σ̃^{1|0} − σ̃^{0|1} + S`.
    /// The box cone separates by coordinate, so each coordinate of `S` is
    /// scanned on its own grid once `t = S_0` is fixed.
    fn brute_force_lhs(asm: &Assemblage, steps: usize, slack: f64) -> bool {
        let hom = |x: &str, a: usize| -> Vec<f64> {
            let b = &asm.branches(x).unwrap()[a];
            std::iter::once(b.prob)
                .chain(b.state.point.0.iter().map(|c| b.prob * c))
                .collect()
        };
        let (x0, x1) = (&asm.settings[0], &asm.settings[1]);
        let (p00, p10, p01) = (hom(x0, 0), hom(x0, 1), hom(x1, 0));
        // σ_λ[i] = c_λ[i] + sign_λ · S[i]
        let parts: [(Vec<f64>, f64); 4] = [
            (vec![0.0; p00.len()], 1.0),
            (p00.clone(), -1.0),
            (p01.clone(), -1.0),
            (p10.iter().zip(&p01).map(|(a, b)| a - b).collect(), 1.0),
        ];
        let grid = |k: usize| k as f64 / steps as f64;
        (0..=steps).any(|kt| {
            let s0 = grid(kt);
            let t: Vec<f64> = parts.iter().map(|(c, sg)| c[0] + sg * s0).collect();
            if t.iter().any(|&v| v < -slack) {
                return false;
            }
            (1..p00.len()).all(|i| {
                (0..=steps).any(|ku| {
                    let si = grid(ku);
                    parts.iter().zip(&t).all(|((c, sg), &tl)| {
                        let u = c[i] + sg * si;
                        u >= -slack && u <= tl + slack
                    })
                })
            })
        })
    }

    #[test]
    fn lhs_lp_agrees_with_brute_force() {
        let g = make_gbit();
        let pr = assemblage_from(&make_pr_bipartite(), &["X", "Z"]).unwrap();
        // λ + μ stays at least 0.1 away from 1
        for (l, m) in [
            (0.3, 0.3),
            (0.4, 0.4),
            (0.2, 0.7),
            (0.6, 0.6),
            (0.8, 0.5),
            (1.0, 1.0),
            (0.5, 0.9),
        ] {
            let asm = pr.smeared("X", l).unwrap().smeared("Z", m).unwrap();
            let lp = lhs_model_feasible(&asm, &g.space).unwrap().feasible;
            assert_eq!(lp, brute_force_lhs(&asm, 400, 2.5e-3), "({l}, {m})");
            assert_eq!(lp, l + m < 1.0, "({l}, {m})");
        }
        let c = make_classical_bit();
        for state in [
            make_classical_correlated(),
            make_product(&State::new(vec![1.0]), &State::new(vec![0.0]), &c).unwrap(),
        ] {
            let asm = assemblage_from(&state, &["X", "Z"]).unwrap();
            assert!(lhs_model_feasible(&asm, &c.space).unwrap().feasible);
            assert!(brute_force_lhs(&asm, 400, 2.5e-3));
        }
    }
}
