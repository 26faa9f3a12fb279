//! CHSH values and bounds, no-signaling checks, scenario dimension counts,
//! and the Det / Ver-complete / operationally-local classification.

use serde::{Deserialize, Serialize};

use crate::compatibility::{check_kappa, kappa_opt};
use crate::error::{Error, Result};
use crate::gpt::Theory;
use crate::steering::{operational_nonlocality_test, NonlocalityVerdict, Pairing};
use crate::theories::{correlation_from, BipartiteState, Correlation};

/// `(|X|, |Y|, |A|, |B|)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioShape {
    pub nx: usize,
    pub ny: usize,
    pub na: usize,
    pub nb: usize,
}

impl ScenarioShape {
    pub fn new(nx: usize, ny: usize, na: usize, nb: usize) -> Result<Self> {
        if nx == 0 || ny == 0 || na == 0 || nb == 0 {
            return Err(Error::ShapeMismatch(
                "all index sets need at least one element".into(),
            ));
        }
        Ok(Self { nx, ny, na, nb })
    }

    pub fn is_chsh(&self) -> bool {
        (self.nx, self.ny, self.na, self.nb) == (2, 2, 2, 2)
    }
}

/// `|X||Y|(|A|−1)(|B|−1) + |X|(|A|−1) + |Y|(|B|−1)`.
pub fn dim_nosig(s: ScenarioShape) -> usize {
    s.nx * s.ny * (s.na - 1) * (s.nb - 1) + s.nx * (s.na - 1) + s.ny * (s.nb - 1)
}

/// `|X|(|Y|−1)(|A|−1) + |Y|(|X|−1)(|B|−1)`.
pub fn c_nosig(s: ScenarioShape) -> usize {
    s.nx * (s.ny - 1) * (s.na - 1) + s.ny * (s.nx - 1) * (s.nb - 1)
}

/// `|X||Y|(|A||B|−1)`.
pub fn dim_prob(s: ScenarioShape) -> usize {
    let d = s.nx * s.ny * (s.na * s.nb - 1);
    debug_assert_eq!(d, dim_nosig(s) + c_nosig(s));
    d
}

/// Correlator `⟨a_x b_y⟩` with outcome 0 ↦ +1, 1 ↦ −1.
pub fn correlator(c: &Correlation, x: usize, y: usize) -> f64 {
    let block = &c.table[x][y];
    let mut e = 0.0;
    for (a, row) in block.iter().enumerate() {
        for (b, p) in row.iter().enumerate() {
            e += if (a + b) % 2 == 0 { *p } else { -*p };
        }
    }
    e
}

/// `|⟨a0b0⟩ + ⟨a0b1⟩ + ⟨a1b0⟩ − ⟨a1b1⟩|`.
pub fn chsh_value(c: &Correlation) -> Result<f64> {
    if !c.shape().is_chsh() {
        return Err(Error::ShapeMismatch(format!(
            "CHSH needs 2-2-2-2, got {:?}",
            c.shape()
        )));
    }
    Ok(
        (correlator(c, 0, 0) + correlator(c, 0, 1) + correlator(c, 1, 0) - correlator(c, 1, 1))
            .abs(),
    )
}

/// Largest CHSH expression over the four relabelings of which setting pair
/// carries the minus sign.
pub fn chsh_max_relabel(c: &Correlation) -> Result<f64> {
    if !c.shape().is_chsh() {
        return Err(Error::ShapeMismatch(format!(
            "CHSH needs 2-2-2-2, got {:?}",
            c.shape()
        )));
    }
    let e = |x, y| correlator(c, x, y);
    let total = e(0, 0) + e(0, 1) + e(1, 0) + e(1, 1);
    Ok((0..2)
        .flat_map(|x| (0..2).map(move |y| (x, y)))
        .map(|(x, y)| (total - 2.0 * e(x, y)).abs())
        .fold(0.0, f64::max))
}

/// CHSH expression of the correlations implied by a joint distribution
/// `P(a0, a1, b0, b1)`, indexed `[a0][a1][b0][b1]`.
pub fn chsh_from_joint(jd: &[Vec<Vec<Vec<f64>>>]) -> f64 {
    let mut e = [[0.0; 2]; 2];
    for (a0, t) in jd.iter().enumerate() {
        for (a1, t) in t.iter().enumerate() {
            for (b0, t) in t.iter().enumerate() {
                for (b1, p) in t.iter().enumerate() {
                    let a = [a0, a1];
                    let b = [b0, b1];
                    for x in 0..2 {
                        for y in 0..2 {
                            e[x][y] += if (a[x] + b[y]) % 2 == 0 { *p } else { -*p };
                        }
                    }
                }
            }
        }
    }
    (e[0][0] + e[0][1] + e[1][0] - e[1][1]).abs()
}

/// `4ς(υ* − 1)`.
pub fn chsh_bound_uncertainty(steering_strength: f64, upsilon: f64) -> Result<f64> {
    if !(0.5..=1.0).contains(&steering_strength) {
        return Err(Error::ParameterOutOfRange {
            name: "steering_strength",
            value: steering_strength,
            range: "[1/2, 1]",
        });
    }
    if !(1.0..=2.0).contains(&upsilon) {
        return Err(Error::ParameterOutOfRange {
            name: "upsilon_star",
            value: upsilon,
            range: "[1, 2]",
        });
    }
    Ok(4.0 * steering_strength * (upsilon - 1.0))
}

/// `2 / κ_opt`.
pub fn chsh_bound_incompat(kappa: f64) -> Result<f64> {
    check_kappa(kappa)?;
    Ok(2.0 / kappa)
}

/// `2 · 2^(1/τ)`, i.e. `2 / κ_opt(τ)`.
pub fn tsirelson_tau(tau: f64) -> Result<f64> {
    Ok(2.0 / kappa_opt(tau)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoSignalingReport {
    pub nosignaling: bool,
    pub max_deviation: f64,
}

/// Checks `P(a|x,y) = P(a|x,y')` and `P(b|x,y) = P(b|x',y)` within `tol`.
pub fn is_nosignaling(c: &Correlation, tol: f64) -> NoSignalingReport {
    let s = c.shape();
    let alice = |x: usize, y: usize, a: usize| -> f64 { c.table[x][y][a].iter().sum() };
    let bob =
        |x: usize, y: usize, b: usize| -> f64 { (0..s.na).map(|a| c.table[x][y][a][b]).sum() };
    let mut dev: f64 = 0.0;
    for x in 0..s.nx {
        for a in 0..s.na {
            let base = alice(x, 0, a);
            for y in 1..s.ny {
                dev = dev.max((alice(x, y, a) - base).abs());
            }
        }
    }
    for y in 0..s.ny {
        for b in 0..s.nb {
            let base = bob(0, y, b);
            for x in 1..s.nx {
                dev = dev.max((bob(x, y, b) - base).abs());
            }
        }
    }
    NoSignalingReport {
        nosignaling: dev <= tol,
        max_deviation: dev,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClassLabel {
    /// Signaling.
    Det,
    /// Non-signaling, with a tested state violating the conditioned bound.
    VerComplete,
    /// No tested state signals or violates; certified only over the tested
    /// instances.
    OperationallyLocal,
}

impl std::fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ClassLabel::Det => "Det",
            ClassLabel::VerComplete => "Ver-complete",
            ClassLabel::OperationallyLocal => "OperationallyLocal",
        })
    }
}

/// A bipartite state with the settings it is probed with.
#[derive(Debug, Clone)]
pub struct TestInstance {
    pub state: BipartiteState,
    pub pairing: Pairing,
    pub bob_settings: [String; 2],
}

impl TestInstance {
    /// Matched pairing on the given Bob settings.
    pub fn matched(state: BipartiteState, y0: &str, y1: &str) -> Self {
        Self {
            state,
            pairing: Pairing::matched(&[y0, y1]),
            bob_settings: [y0.to_string(), y1.to_string()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceEvidence {
    pub state: String,
    pub max_signal: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<NonlocalityVerdict>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub label: ClassLabel,
    pub evidence: Vec<InstanceEvidence>,
    /// Always set for `OperationallyLocal`: the verdict covers only the
    /// tested states and settings.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qualifier: Option<String>,
}

pub fn classify(theory: &Theory, instances: &[TestInstance]) -> Result<Classification> {
    let mut evidence = Vec::with_capacity(instances.len());
    let mut signaling = false;
    let mut violated = false;
    for inst in instances {
        let ys: Vec<&str> = inst.bob_settings.iter().map(String::as_str).collect();
        let xs: Vec<&str> = ys
            .iter()
            .map(|y| inst.pairing.alice_for(y))
            .collect::<Result<_>>()?;
        let corr = correlation_from(&inst.state, theory, &xs, &ys)?;
        let ns = is_nosignaling(&corr, crate::gpt::GEOMETRIC_TOL);
        let verdict = if ns.nosignaling {
            let v = operational_nonlocality_test(&inst.state, &inst.pairing, &ys, theory)?;
            violated |= v.violated;
            Some(v)
        } else {
            signaling = true;
            None
        };
        evidence.push(InstanceEvidence {
            state: inst.state.name.clone(),
            max_signal: ns.max_deviation,
            verdict,
        });
    }
    let label = if signaling {
        ClassLabel::Det
    } else if violated {
        ClassLabel::VerComplete
    } else {
        ClassLabel::OperationallyLocal
    };
    let qualifier =
        (label == ClassLabel::OperationallyLocal).then(|| "over tested instances".to_string());
    Ok(Classification {
        label,
        evidence,
        qualifier,
    })
}
