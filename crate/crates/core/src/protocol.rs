//! Monte Carlo run of the certificate game: Bob announces `y_j`, Alice
//! measures the paired `x_j` and sends a prediction of Bob's outcome, Bob
//! measures and scores the prediction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gpt::{measure_distribution, Measurement, Theory, GEOMETRIC_TOL};
use crate::steering::{assemblage_from, Pairing};
use crate::theories::{BipartiteState, Branch};
use crate::uncertainty::upsilon_star;

/// Standard errors of the sum the empirical excess must clear.
pub const SIGNIFICANCE_SIGMAS: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Bob's state exists before the setting is announced.
    PrepareBefore,
    /// Alice prepares a fresh eigenstate of the announced setting.
    PrepareAfter,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "before" | "prepare_before" => Ok(Mode::PrepareBefore),
            "after" | "prepare_after" => Ok(Mode::PrepareAfter),
            other => Err(Error::UnknownName {
                kind: "mode",
                name: other.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProtocolConfig {
    pub state: BipartiteState,
    pub pairing: Pairing,
    pub bob_settings: [String; 2],
    pub trials: u64,
    pub seed: u64,
    pub mode: Mode,
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::ParameterOutOfRange {
                name: "trials",
                value: 0.0,
                range: ">= 1",
            });
        }
        for y in &self.bob_settings {
            self.pairing.alice_for(y)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingStats {
    pub bob_setting: String,
    pub alice_setting: String,
    pub trials: u64,
    pub hits: u64,
    /// Hit rate; 0 when the setting was never drawn.
    pub q_hat: f64,
    pub std_error: f64,
    /// Analytic hit probability of the simulated strategy.
    pub expected: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolReport {
    pub state: String,
    pub theory: String,
    pub mode: Mode,
    pub seed: u64,
    pub trials: u64,
    pub settings: Vec<SettingStats>,
    pub empirical_sum: f64,
    pub std_error_sum: f64,
    pub bound: f64,
    pub margin: f64,
    /// `empirical_sum − bound > 3·std_error_sum + 1e-9`.
    pub violated: bool,
}

/// Per-setting strategy: Alice's branches (or the cheat state) and the
/// certificate for each.
struct Arm {
    measurement: Measurement,
    /// `(probability, certificate, Bob's outcome distribution)`.
    branches: Vec<(f64, usize, Vec<f64>)>,
}

fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}

/// Index drawn from the weights `p` with the uniform variate `u`.
fn sample(p: impl ExactSizeIterator<Item = f64> + Clone, u: f64) -> usize {
    let n = p.len();
    let mut acc = 0.0;
    for (i, v) in p.clone().enumerate() {
        acc += v;
        if u < acc {
            return i;
        }
    }
    // rounding leftovers go to the last outcome with positive weight
    p.enumerate()
        .filter(|&(_, v)| v > 0.0)
        .last()
        .map_or(n - 1, |(i, _)| i)
}

fn build_arm(cfg: &ProtocolConfig, theory: &Theory, y: &str) -> Result<Arm> {
    let measurement = theory.measurement(y)?;
    let states: Vec<Branch> = match cfg.mode {
        Mode::PrepareBefore => {
            let x = cfg.pairing.alice_for(y)?;
            assemblage_from(&cfg.state, &[x])?.branches(x)?.to_vec()
        }
        Mode::PrepareAfter => {
            // maximizing q(y) alone: υ* of the pair (y, y) is 2·max q(y)
            let best = upsilon_star(theory, &measurement, &measurement)?.maximizer;
            vec![Branch {
                prob: 1.0,
                state: best,
            }]
        }
    };
    let branches = states
        .iter()
        .map(|b| {
            let dist = measure_distribution(&measurement, &b.state)?;
            Ok((b.prob, argmax(&dist), dist))
        })
        .collect::<Result<_>>()?;
    Ok(Arm {
        measurement,
        branches,
    })
}

fn expected_hit(arm: &Arm) -> f64 {
    arm.branches.iter().map(|(p, c, dist)| p * dist[*c]).sum()
}

/// Runs the protocol. Trial `i` draws from its own ChaCha stream
/// `(seed, i)`, so the report does not depend on thread scheduling.
pub fn run_protocol(cfg: &ProtocolConfig, theory: &Theory) -> Result<ProtocolReport> {
    cfg.validate()?;
    if cfg.state.bob_space != theory.space {
        return Err(Error::TheoryMismatch(format!(
            "state `{}` does not live in theory `{}`",
            cfg.state.name, theory.name
        )));
    }
    let arms = [
        build_arm(cfg, theory, &cfg.bob_settings[0])?,
        build_arm(cfg, theory, &cfg.bob_settings[1])?,
    ];

    let trial = |i: u64| -> [[u64; 2]; 2] {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(i);
        let j = rng.random_range(0..2usize);
        let arm = &arms[j];
        let pick = sample(arm.branches.iter().map(|b| b.0), rng.random::<f64>());
        let (_, certificate, dist) = &arm.branches[pick];
        let b = sample(dist.iter().copied(), rng.random::<f64>());
        let mut out = [[0; 2]; 2];
        out[j] = [1, u64::from(b == *certificate)];
        out
    };
    let counts = (0..cfg.trials).into_par_iter().map(trial).reduce(
        || [[0; 2]; 2],
        |a, b| {
            [
                [a[0][0] + b[0][0], a[0][1] + b[0][1]],
                [a[1][0] + b[1][0], a[1][1] + b[1][1]],
            ]
        },
    );

    let mut settings = Vec::with_capacity(2);
    for (j, arm) in arms.iter().enumerate() {
        let [n, hits] = counts[j];
        let (q_hat, std_error) = if n == 0 {
            (0.0, 0.0)
        } else {
            let q = hits as f64 / n as f64;
            (q, (q * (1.0 - q) / n as f64).sqrt())
        };
        let y = &cfg.bob_settings[j];
        settings.push(SettingStats {
            bob_setting: y.clone(),
            alice_setting: match cfg.mode {
                Mode::PrepareBefore => cfg.pairing.alice_for(y)?.to_string(),
                Mode::PrepareAfter => format!("eigenstate of {y}"),
            },
            trials: n,
            hits,
            q_hat,
            std_error,
            expected: expected_hit(arm),
        });
    }

    let empirical_sum: f64 = settings.iter().map(|s| s.q_hat).sum();
    let std_error_sum = settings
        .iter()
        .map(|s| s.std_error * s.std_error)
        .sum::<f64>()
        .sqrt();
    let bound = upsilon_star(theory, &arms[0].measurement, &arms[1].measurement)?.upsilon_star;
    let margin = empirical_sum - bound;
    Ok(ProtocolReport {
        state: cfg.state.name.clone(),
        theory: theory.name.clone(),
        mode: cfg.mode,
        seed: cfg.seed,
        trials: cfg.trials,
        settings,
        empirical_sum,
        std_error_sum,
        bound,
        margin,
        violated: margin > SIGNIFICANCE_SIGMAS * std_error_sum + GEOMETRIC_TOL,
    })
}

/// One verdict line followed by one line per setting.
pub fn summarize(report: &ProtocolReport) -> String {
    let (s, b) = (report.empirical_sum, report.bound);
    let head = if report.violated {
        format!("VIOLATED: {s:.3} > {b:.3}")
    } else if s <= b {
        format!("NOT VIOLATED: {s:.3} ≤ {b:.3}")
    } else {
        format!("NOT SIGNIFICANT: {s:.3} > {b:.3} within {SIGNIFICANCE_SIGMAS}σ")
    };
    let mut out = format!(
        "{head}\nmargin {:+.4} ± {:.4} over {} trials ({:?}, seed {})\n",
        report.margin, report.std_error_sum, report.trials, report.mode, report.seed
    );
    for st in &report.settings {
        out.push_str(&format!(
            "  {} | {}: q̂ = {:.4} ± {:.4} ({} / {} hits, expected {:.4})\n",
            st.bob_setting,
            st.alice_setting,
            st.q_hat,
            st.std_error,
            st.hits,
            st.trials,
            st.expected
        ));
    }
    out
}
