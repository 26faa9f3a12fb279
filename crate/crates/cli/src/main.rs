use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use opnonloc_core::bell::{
    c_nosig, chsh_bound_incompat, chsh_bound_uncertainty, chsh_max_relabel, chsh_value, classify,
    dim_nosig, dim_prob, is_nosignaling, tsirelson_tau, ScenarioShape, TestInstance,
};
use opnonloc_core::compatibility::{
    jm_region, jointly_measurable_lp, jointly_measurable_rebit, kappa_opt_lp, kappa_opt_rebit,
    region_boundary, unsharpen, FamilyPoint,
};
use opnonloc_core::protocol::{run_protocol, summarize, Mode, ProtocolConfig};
use opnonloc_core::report::{beta_for, report_all, state_space_svg};
use opnonloc_core::steering::{
    assemblage_from, lhs_model_feasible, steering_implies_violation_check,
};
use opnonloc_core::theories::{bipartite_by_name, correlation_from, make_pr_box};
use opnonloc_core::{
    theory_by_name, upsilon_star, Assemblage, Pairing, StateSpace, Theory, GEOMETRIC_TOL,
};

#[derive(Parser)]
#[command(
    name = "opnonloc",
    version,
    about = "Operational nonlocality in generalized probability theories"
)]
struct Cli {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    format: Format,
    /// Drop the provenance block (version, seed, timestamp) from the output.
    #[arg(long, global = true)]
    no_meta: bool,
    /// Seed for randomized commands.
    #[arg(long, env = "OPNONLOC_SEED", default_value_t = 42, global = true)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Md,
}

#[derive(Subcommand)]
enum Command {
    /// Survey table over the classical bit, rebit, Spekkens bit and gbit.
    Report,
    /// Single-system certainty bound υ* for two observables.
    Uncertainty {
        #[arg(long)]
        theory: String,
        #[arg(long, default_value = "X")]
        y0: String,
        #[arg(long, default_value = "Z")]
        y1: String,
    },
    /// Conditioned certainty sum of a bipartite state against υ*.
    Steer {
        #[arg(long)]
        state: String,
        #[arg(long)]
        theory: String,
        /// Bob settings, comma separated.
        #[arg(long, default_value = "X,Z")]
        bob: String,
        /// `y=x` pairs; defaults to the matched pairing.
        #[arg(long)]
        pairing: Option<String>,
        /// Also write the assemblage as `{space, assemblage}` JSON.
        #[arg(long)]
        assemblage_out: Option<PathBuf>,
    },
    /// Local-hidden-state LP for an assemblage.
    LhsTest {
        /// `{space, assemblage}` JSON, as written by `steer --assemblage-out`.
        #[arg(long, conflicts_with_all = ["state", "theory"])]
        assemblage: Option<PathBuf>,
        #[arg(long, requires = "theory")]
        state: Option<String>,
        #[arg(long, requires = "state")]
        theory: Option<String>,
        /// Alice settings, comma separated.
        #[arg(long, default_value = "X,Z")]
        alice: String,
    },
    /// Monte Carlo run of the certificate protocol.
    Protocol {
        #[arg(long)]
        state: String,
        #[arg(long)]
        theory: String,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        /// `before` or `after`.
        #[arg(long, default_value = "before")]
        mode: String,
        #[arg(long, default_value = "X,Z")]
        bob: String,
        #[arg(long)]
        pairing: Option<String>,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// CHSH value and bounds; `--state pr-box` uses the PR correlation table.
    Chsh {
        #[arg(long)]
        state: String,
        #[arg(long)]
        theory: Option<String>,
        #[arg(long, default_value = "X,Z")]
        alice: String,
        #[arg(long, default_value = "X,Z")]
        bob: String,
    },
    /// Dimension counts of a Bell scenario.
    Dims {
        #[arg(long)]
        nx: usize,
        #[arg(long)]
        ny: usize,
        #[arg(long)]
        na: usize,
        #[arg(long)]
        nb: usize,
    },
    /// Joint measurability of unsharp versions of two observables.
    Jm {
        #[arg(long)]
        theory: String,
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        mu: f64,
        #[arg(long, default_value = "X")]
        x: String,
        #[arg(long, default_value = "Z")]
        z: String,
    },
    /// CSV of the joint-measurability boundary on an N×N grid.
    JmRegion {
        #[arg(long)]
        theory: String,
        #[arg(long, default_value_t = 50)]
        grid: usize,
        /// Emit every grid point instead of the boundary.
        #[arg(long)]
        full: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Closed-form point of the `λ^τ + μ^τ ≤ 1` family.
    Family {
        #[arg(long)]
        tau: f64,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
    },
    /// Det / Ver-complete / operationally-local verdict.
    Classify {
        #[arg(long)]
        theory: String,
        /// States to test; defaults to the theory's reference state.
        #[arg(long)]
        state: Vec<String>,
        #[arg(long, default_value = "X,Z")]
        bob: String,
    },
    /// SVG of the square, disc and Spekkens state spaces.
    Figure {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Serialize, Deserialize)]
struct AssemblageFile {
    space: StateSpace,
    assemblage: Assemblage,
}

fn split(list: &str) -> Vec<&str> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect()
}

fn two_settings(list: &str) -> Result<[String; 2]> {
    match split(list).as_slice() {
        [a, b] => Ok([a.to_string(), b.to_string()]),
        other => bail!("exactly two settings expected, got {}", other.len()),
    }
}

fn pairing_for(spec: Option<&str>, bob: &[String; 2]) -> Result<Pairing> {
    Ok(match spec {
        Some(s) => Pairing::parse(s)?,
        None => Pairing::matched(&[&bob[0], &bob[1]]),
    })
}

fn theory(name: &str) -> Result<Theory> {
    theory_by_name(name).map_err(|e| anyhow!("{e} (known: classical, rebit, spekkens, gbit)"))
}

fn reference_state(theory: &str) -> &'static str {
    match theory {
        "rebit" => "singlet",
        "spekkens" => "spekkens-ent",
        "gbit" => "pr",
        _ => "classical-corr",
    }
}

fn kappa_opt_for(t: &Theory) -> Result<f64> {
    Ok(if t.space.is_disc() {
        kappa_opt_rebit()
    } else {
        kappa_opt_lp(t, "X", "Z")?
    })
}

fn md_table(rows: &[(&str, String)]) -> String {
    let mut out = String::from("| quantity | value |\n|---|---|\n");
    for (k, v) in rows {
        out.push_str(&format!("| {k} | {v} |\n"));
    }
    out
}

/// Result of a command: JSON payload plus its markdown rendering.
struct Output {
    json: Value,
    md: String,
}

fn run(cli: &Cli) -> Result<Output> {
    match &cli.command {
        Command::Report => {
            let bundle = report_all()?;
            Ok(Output {
                md: bundle.to_markdown(),
                json: serde_json::to_value(&bundle)?,
            })
        }
        Command::Uncertainty { theory: t, y0, y1 } => {
            let t = theory(t)?;
            let b = upsilon_star(&t, &t.measurement(y0)?, &t.measurement(y1)?)?;
            Ok(Output {
                md: md_table(&[
                    ("theory", t.name.clone()),
                    ("settings", format!("{y0}, {y1}")),
                    ("υ*", format!("{:.6}", b.upsilon_star)),
                    ("maximizer", format!("{:?}", b.maximizer.point.0)),
                ]),
                json: json!({
                    "theory": t.name,
                    "settings": [y0, y1],
                    "upsilon_star": b.upsilon_star,
                    "maximizer": b.maximizer.point,
                }),
            })
        }
        Command::Steer {
            state,
            theory: t,
            bob,
            pairing,
            assemblage_out,
        } => {
            let t = theory(t)?;
            let s = bipartite_by_name(state, &t)?;
            if s.bob_space != t.space {
                bail!("state `{}` does not live in theory `{}`", s.name, t.name);
            }
            let bob = two_settings(bob)?;
            let pairing = pairing_for(pairing.as_deref(), &bob)?;
            let mut alice: Vec<&str> = bob
                .iter()
                .map(|y| pairing.alice_for(y))
                .collect::<Result<_, _>>()?;
            alice.dedup();
            let asm = assemblage_from(&s, &alice)?;
            if let Some(path) = assemblage_out {
                let file = AssemblageFile {
                    space: t.space.clone(),
                    assemblage: asm.clone(),
                };
                fs::write(path, serde_json::to_string_pretty(&file)?)
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            let r = steering_implies_violation_check(&asm, &pairing, &[&bob[0], &bob[1]], &t)?;
            let v = &r.verdict;
            Ok(Output {
                md: md_table(&[
                    ("state", s.name.clone()),
                    ("theory", t.name.clone()),
                    ("conditioned sum", format!("{:.6}", v.lhs)),
                    ("υ*", format!("{:.6}", v.bound)),
                    ("margin", format!("{:+.6}", v.margin)),
                    ("violated", v.violated.to_string()),
                    ("LHS model", r.lhs_feasible.to_string()),
                ]),
                json: json!({
                    "state": s.name,
                    "theory": t.name,
                    "pairing": pairing,
                    "verdict": r.verdict,
                    "lhs_feasible": r.lhs_feasible,
                    "implication_holds": r.implication_holds,
                }),
            })
        }
        Command::LhsTest {
            assemblage,
            state,
            theory: t,
            alice,
        } => {
            let (space, asm) = match (assemblage, state, t) {
                (Some(path), _, _) => {
                    let text = fs::read_to_string(path)
                        .with_context(|| format!("reading {}", path.display()))?;
                    let f: AssemblageFile =
                        serde_json::from_str(&text).context("parsing assemblage file")?;
                    f.space.validate()?;
                    f.assemblage.validate()?;
                    (f.space, f.assemblage)
                }
                (None, Some(s), Some(t)) => {
                    let t = theory(t)?;
                    let s = bipartite_by_name(s, &t)?;
                    (t.space.clone(), assemblage_from(&s, &split(alice))?)
                }
                _ => bail!("give either --assemblage or --state with --theory"),
            };
            let rep = lhs_model_feasible(&asm, &space)?;
            Ok(Output {
                md: md_table(&[
                    ("feasible", rep.feasible.to_string()),
                    ("residual", format!("{:.3e}", rep.residual)),
                    (
                        "hidden states",
                        rep.model.as_ref().map_or(0, Vec::len).to_string(),
                    ),
                ]),
                json: serde_json::to_value(&rep)?,
            })
        }
        Command::Protocol {
            state,
            theory: t,
            trials,
            mode,
            bob,
            pairing,
            out: _,
        } => {
            let t = theory(t)?;
            let bob = two_settings(bob)?;
            let cfg = ProtocolConfig {
                state: bipartite_by_name(state, &t)?,
                pairing: pairing_for(pairing.as_deref(), &bob)?,
                bob_settings: bob,
                trials: *trials,
                seed: cli.seed,
                mode: mode.parse::<Mode>()?,
            };
            let rep = run_protocol(&cfg, &t)?;
            let mut json = serde_json::to_value(&rep)?;
            json["summary"] = Value::String(
                summarize(&rep)
                    .lines()
                    .next()
                    .unwrap_or_default()
                    .to_string(),
            );
            Ok(Output {
                md: summarize(&rep),
                json,
            })
        }
        Command::Chsh {
            state,
            theory: t,
            alice,
            bob,
        } => {
            let (corr, t) = if state == "pr-box" {
                (make_pr_box(), None)
            } else {
                let name = t
                    .as_deref()
                    .context("--theory is required unless --state pr-box")?;
                let t = theory(name)?;
                let s = bipartite_by_name(state, &t)?;
                (
                    correlation_from(&s, &t, &split(alice), &split(bob))?,
                    Some(t),
                )
            };
            let value = chsh_value(&corr)?;
            let best = chsh_max_relabel(&corr)?;
            let ns = is_nosignaling(&corr, GEOMETRIC_TOL);
            let mut json = json!({
                "state": state,
                "chsh": value,
                "chsh_max_relabel": best,
                "nosignaling": ns,
            });
            let mut md = vec![
                ("state", state.clone()),
                ("CHSH", format!("{value:.6}")),
                ("CHSH, best relabeling", format!("{best:.6}")),
                (
                    "no-signaling",
                    format!(
                        "{} (max deviation {:.1e})",
                        ns.nosignaling, ns.max_deviation
                    ),
                ),
            ];
            if let Some(t) = t {
                let (x, z) = (t.measurement("X")?, t.measurement("Z")?);
                let ups = upsilon_star(&t, &x, &z)?.upsilon_star;
                let beta = beta_for(&t);
                let kappa = kappa_opt_for(&t)?;
                let bu = chsh_bound_uncertainty(1.0 / beta, ups)?;
                let bi = chsh_bound_incompat(kappa)?;
                json["theory"] = json!(t.name);
                json["bound_uncertainty"] = json!(bu);
                json["bound_incompat"] = json!(bi);
                md.push(("bound 4ς(υ*−1)", format!("{bu:.6}")));
                md.push(("bound 2/κ_opt", format!("{bi:.6}")));
            }
            Ok(Output {
                md: md_table(&md),
                json,
            })
        }
        Command::Dims { nx, ny, na, nb } => {
            let s = ScenarioShape::new(*nx, *ny, *na, *nb)?;
            let (d, c, p) = (dim_nosig(s), c_nosig(s), dim_prob(s));
            Ok(Output {
                md: md_table(&[
                    ("dim_nosig", d.to_string()),
                    ("c_nosig", c.to_string()),
                    ("dim_prob", p.to_string()),
                ]),
                json: json!({ "shape": s, "dim_nosig": d, "c_nosig": c, "dim_prob": p }),
            })
        }
        Command::Jm {
            theory: t,
            lambda,
            mu,
            x,
            z,
        } => {
            let t = theory(t)?;
            let a = unsharpen(&t.measurement(x)?, *lambda)?;
            let b = unsharpen(&t.measurement(z)?, *mu)?;
            let json = if t.space.is_disc() {
                json!({ "theory": t.name, "lambda": lambda, "mu": mu, "feasible": jointly_measurable_rebit(*lambda, *mu), "method": "closed form" })
            } else {
                let r = jointly_measurable_lp(&a.measurement, &b.measurement, &t.space)?;
                json!({ "theory": t.name, "lambda": lambda, "mu": mu, "feasible": r.feasible, "residual": r.residual, "master": r.master, "method": "lp" })
            };
            Ok(Output {
                md: md_table(&[
                    ("theory", t.name.clone()),
                    ("(λ, μ)", format!("({lambda}, {mu})")),
                    ("jointly measurable", json["feasible"].to_string()),
                ]),
                json,
            })
        }
        Command::JmRegion { .. } | Command::Figure { .. } => unreachable!("handled as file output"),
        Command::Family { tau, beta } => {
            let p = FamilyPoint::new(*tau, *beta)?;
            let bound = tsirelson_tau(*tau)?;
            let mut json = serde_json::to_value(&p)?;
            json["chsh_bound"] = json!(bound);
            Ok(Output {
                md: md_table(&[
                    ("τ", p.tau.to_string()),
                    ("κ_opt", format!("{:.6}", p.kappa_opt)),
                    ("α", format!("{:.6}", p.alpha)),
                    ("β", p.beta.to_string()),
                    ("υ*", format!("{:.6}", p.upsilon_star)),
                    ("CHSH bound", format!("{bound:.6}")),
                ]),
                json,
            })
        }
        Command::Classify {
            theory: t,
            state,
            bob,
        } => {
            let t = theory(t)?;
            let bob = two_settings(bob)?;
            let names: Vec<&str> = if state.is_empty() {
                vec![reference_state(&t.name)]
            } else {
                state.iter().map(String::as_str).collect()
            };
            let instances = names
                .iter()
                .map(|n| {
                    Ok(TestInstance::matched(
                        bipartite_by_name(n, &t)?,
                        &bob[0],
                        &bob[1],
                    ))
                })
                .collect::<Result<Vec<_>>>()?;
            let c = classify(&t, &instances)?;
            let verdict = match &c.qualifier {
                Some(q) => format!("{} ({q})", c.label),
                None => c.label.to_string(),
            };
            Ok(Output {
                md: md_table(&[
                    ("theory", t.name.clone()),
                    ("states", names.join(", ")),
                    ("verdict", verdict),
                ]),
                json: json!({ "theory": t.name, "classification": c }),
            })
        }
    }
}

fn region_csv(theory_name: &str, grid: usize, full: bool) -> Result<String> {
    if grid == 0 {
        bail!("--grid must be at least 1");
    }
    let t = theory(theory_name)?;
    let region = jm_region(&t, "X", "Z", grid)?;
    let mut csv = String::new();
    if full {
        csv.push_str("lambda,mu,feasible\n");
        for p in &region {
            csv.push_str(&format!("{},{},{}\n", p.lambda, p.mu, p.feasible));
        }
    } else {
        csv.push_str("lambda,mu_max\n");
        for (l, m) in region_boundary(&region) {
            csv.push_str(&format!("{l},{m}\n"));
        }
    }
    Ok(csv)
}

fn meta(seed: u64) -> Value {
    let now = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    json!({ "tool": "opnonloc", "version": env!("CARGO_PKG_VERSION"), "seed": seed, "generated_unix": now })
}

fn render(cli: &Cli, out: Output) -> Result<String> {
    Ok(match cli.format {
        Format::Md => {
            let mut md = out.md;
            if !cli.no_meta {
                md.push_str(&format!(
                    "\nopnonloc {} · seed {}\n",
                    env!("CARGO_PKG_VERSION"),
                    cli.seed
                ));
            }
            md
        }
        Format::Json => {
            let mut json = out.json;
            if !cli.no_meta {
                json["meta"] = meta(cli.seed);
            }
            serde_json::to_string_pretty(&json)? + "\n"
        }
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::JmRegion {
            theory,
            grid,
            full,
            out,
        } => {
            let csv = region_csv(theory, *grid, *full)?;
            match out {
                Some(p) => fs::write(p, csv).with_context(|| format!("writing {}", p.display()))?,
                None => print!("{csv}"),
            }
        }
        Command::Figure { out } => {
            fs::write(out, state_space_svg())
                .with_context(|| format!("writing {}", out.display()))?;
            eprintln!("wrote {}", out.display());
        }
        Command::Protocol {
            out: Some(path), ..
        } => {
            let text = render(cli, run(cli)?)?;
            fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
        }
        _ => print!("{}", render(cli, run(cli)?)?),
    }
    Ok(())
}
