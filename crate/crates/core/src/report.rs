//! Survey table over the four reference theories and the state-space figure.

use serde::{Deserialize, Serialize};

use crate::bell::{
    chsh_bound_incompat, chsh_bound_uncertainty, chsh_max_relabel, classify, ClassLabel,
    TestInstance,
};
use crate::compatibility::{kappa_opt_lp, kappa_opt_rebit};
use crate::error::Result;
use crate::gpt::{Theory, GEOMETRIC_TOL};
use crate::theories::*;
use crate::uncertainty::upsilon_star;

/// `β` in the bound `υ* ≤ 1 + β/(2κ)`: 2 for the classical bit, 1 otherwise.
pub fn beta_for(theory: &Theory) -> f64 {
    if theory.name == "classical" {
        2.0
    } else {
        1.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryRow {
    pub theory: String,
    pub upsilon_star: f64,
    pub kappa_opt: f64,
    pub beta: f64,
    pub steering_strength: f64,
    pub chsh_bound_uncertainty: f64,
    pub chsh_bound_incompat: f64,
    /// Reference entangled state and its largest CHSH value.
    pub witness_state: String,
    pub witness_chsh: f64,
    pub bell_local: bool,
    pub verdict: ClassLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qualifier: Option<String>,
    pub conditioned_sum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub rows: Vec<TheoryRow>,
}

/// Reference theory, entangled witness state and the Alice settings used
/// for its CHSH value.
fn survey_cases() -> Vec<(Theory, BipartiteState, [&'static str; 2])> {
    vec![
        (
            make_classical_bit(),
            make_classical_correlated(),
            ["X", "Z"],
        ),
        (make_rebit(), make_singlet(), ["D+", "D-"]),
        (make_spekkens(), make_spekkens_entangled(), ["X", "Z"]),
        (make_gbit(), make_pr_bipartite(), ["X", "Z"]),
    ]
}

pub fn theory_row(
    theory: &Theory,
    witness: &BipartiteState,
    chsh_alice: [&str; 2],
) -> Result<TheoryRow> {
    let (x, z) = (theory.measurement("X")?, theory.measurement("Z")?);
    let ups = upsilon_star(theory, &x, &z)?.upsilon_star;
    let kappa = if theory.space.is_disc() {
        kappa_opt_rebit()
    } else {
        kappa_opt_lp(theory, "X", "Z")?
    };
    let beta = beta_for(theory);
    let corr = correlation_from(witness, theory, &chsh_alice, &["X", "Z"])?;
    let witness_chsh = chsh_max_relabel(&corr)?;

    let mut instances = vec![TestInstance::matched(witness.clone(), "X", "Z")];
    if !theory.space.is_disc() {
        // a product of pure states as a second, local probe
        let s = upsilon_star(theory, &x, &z)?.maximizer;
        instances.push(TestInstance::matched(
            make_product(&s, &s, theory)?,
            "X",
            "Z",
        ));
    }
    let class = classify(theory, &instances)?;
    let conditioned_sum = class.evidence[0]
        .verdict
        .as_ref()
        .map_or(f64::NAN, |v| v.lhs);

    Ok(TheoryRow {
        theory: theory.name.clone(),
        upsilon_star: ups,
        kappa_opt: kappa,
        beta,
        steering_strength: 1.0 / beta,
        chsh_bound_uncertainty: chsh_bound_uncertainty(1.0 / beta, ups)?,
        chsh_bound_incompat: chsh_bound_incompat(kappa)?,
        witness_state: witness.name.clone(),
        witness_chsh,
        bell_local: witness_chsh <= 2.0 + GEOMETRIC_TOL,
        verdict: class.label,
        qualifier: class.qualifier,
        conditioned_sum,
    })
}

pub fn report_all() -> Result<ReportBundle> {
    let rows = survey_cases()
        .iter()
        .map(|(t, s, a)| theory_row(t, s, *a))
        .collect::<Result<_>>()?;
    Ok(ReportBundle { rows })
}

impl ReportBundle {
    pub fn row(&self, theory: &str) -> Option<&TheoryRow> {
        self.rows.iter().find(|r| r.theory == theory)
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::from(
            "| theory | υ* | κ_opt | β | CHSH bound 4ς(υ*−1) | CHSH bound 2/κ | witness CHSH | Bell-local | verdict |\n\
             |---|---|---|---|---|---|---|---|---|\n",
        );
        for r in &self.rows {
            let verdict = match &r.qualifier {
                Some(q) => format!("{} ({q})", r.verdict),
                None => r.verdict.to_string(),
            };
            out.push_str(&format!(
                "| {} | {:.4} | {:.4} | {} | {:.4} | {:.4} | {:.4} ({}) | {} | {} |\n",
                r.theory,
                r.upsilon_star,
                r.kappa_opt,
                r.beta,
                r.chsh_bound_uncertainty,
                r.chsh_bound_incompat,
                r.witness_chsh,
                r.witness_state,
                if r.bell_local { "yes" } else { "no" },
                verdict
            ));
        }
        out
    }
}

/// SVG of the gbit square `(P(+|X), P(+|Z))`, the inscribed rebit disc and
/// the Spekkens midlines and diagonals. Points carry their unit-square
/// coordinates in `data-x` / `data-y`.
pub fn state_space_svg() -> String {
    const SIZE: f64 = 400.0;
    const PAD: f64 = 40.0;
    let px = |x: f64| PAD + SIZE * x;
    let py = |y: f64| PAD + SIZE * (1.0 - y);
    let total = SIZE + 2.0 * PAD;
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{total}\" height=\"{total}\" viewBox=\"0 0 {total} {total}\">\n"
    );
    s.push_str(&format!(
        "  <rect class=\"gbit\" x=\"{}\" y=\"{}\" width=\"{SIZE}\" height=\"{SIZE}\" fill=\"none\" stroke=\"black\" stroke-width=\"2\"/>\n",
        px(0.0),
        py(1.0)
    ));
    s.push_str(&format!(
        "  <circle class=\"rebit\" cx=\"{}\" cy=\"{}\" r=\"{}\" data-cx=\"0.5\" data-cy=\"0.5\" data-r=\"0.5\" fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\"/>\n",
        px(0.5),
        py(0.5),
        SIZE / 2.0
    ));
    for (x0, y0, x1, y1) in [
        (0.5, 0.0, 0.5, 1.0),
        (0.0, 0.5, 1.0, 0.5),
        (0.0, 0.0, 1.0, 1.0),
        (0.0, 1.0, 1.0, 0.0),
    ] {
        s.push_str(&format!(
            "  <line class=\"spekkens\" x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"gray\" stroke-dasharray=\"6 4\"/>\n",
            px(x0),
            py(y0),
            px(x1),
            py(y1)
        ));
    }
    for (x, y) in [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)] {
        s.push_str(&format!(
            "  <circle class=\"vertex\" cx=\"{}\" cy=\"{}\" r=\"5\" data-x=\"{x}\" data-y=\"{y}\"/>\n",
            px(x),
            py(y)
        ));
    }
    let h = 0.5 / 2f64.sqrt();
    for (x, y) in [
        (0.5 + h, 0.5 + h),
        (0.5 - h, 0.5 - h),
        (0.5 + h, 0.5 - h),
        (0.5 - h, 0.5 + h),
    ] {
        s.push_str(&format!(
            "  <circle class=\"diagonal-eigenstate\" cx=\"{:.3}\" cy=\"{:.3}\" r=\"4\" fill=\"crimson\" data-x=\"{x}\" data-y=\"{y}\"/>\n",
            px(x),
            py(y)
        ));
    }
    s.push_str(&format!(
        "  <text x=\"{}\" y=\"{}\" font-size=\"14\">P(+|X)</text>\n  <text x=\"4\" y=\"{}\" font-size=\"14\">P(+|Z)</text>\n",
        px(0.45),
        total - 10.0,
        py(0.5)
    ));
    s.push_str("</svg>\n");
    s
}
