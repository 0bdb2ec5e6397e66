use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::json;

use unitary_lift::circle_lsc::{LambdaElement, Span, StepLsc};
use unitary_lift::cu_morphisms::{cauchy_check, cauchy_limit, compare_on_lambda, d_cu, dd_cu, ArcValuation};
use unitary_lift::determinant::{aue_obstruction, canonical_lifts, dhs, jiang_su_demo, obstruction_demo, AueCertificate, Report};
use unitary_lift::fd_lift::{fill_up, lift_sequence, DiagonalUnitary};
use unitary_lift::graph_lift::{lift_graph, UnitaryField};
use unitary_lift::graph_space::MetricGraph;
use unitary_lift::rational::{format_q, parse_q, Q};
use unitary_lift::spectral_oracle::{cu_of_field, cu_of_unitary, matching_distance};

#[derive(Parser)]
#[command(name = "ulift", version, about = "Exact spectral lifts, distances and determinant certificates")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,

    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Seed for randomized property trials.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Largest resolution any command may work at.
    #[arg(long, global = true, env = "ULIFT_MAX_RESOLUTION", default_value_t = 8)]
    max_resolution: u32,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and check an input file.
    Validate(ValidateArgs),
    #[command(subcommand)]
    Lift(LiftCmd),
    #[command(subcommand)]
    Cu(CuCmd),
    #[command(subcommand)]
    Cauchy(CauchyCmd),
    #[command(subcommand)]
    Dhs(DhsCmd),
    #[command(subcommand)]
    Demo(DemoCmd),
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Valuation,
    Sequence,
    Unitary,
    Field,
    Graph,
    Step,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long, value_enum)]
    kind: Kind,
    #[arg(long)]
    input: PathBuf,
    /// Random monotonicity trials on Λ_n (valuations only).
    #[arg(long, default_value_t = 0)]
    trials: u32,
}

#[derive(Subcommand)]
enum LiftCmd {
    /// Diagonal unitary over a finite-dimensional algebra.
    Fd {
        #[arg(long)]
        morphism: PathBuf,
        /// Emit the lifts at every resolution up to this one.
        #[arg(long)]
        up_to: Option<u32>,
    },
    /// Unitary field over a metric graph.
    Graph {
        #[arg(long)]
        morphism: PathBuf,
        #[arg(long)]
        resolution: Option<u32>,
    },
}

#[derive(Subcommand)]
enum CuCmd {
    /// Spectral counts of a diagonal unitary or a unitary field.
    OfUnitary {
        #[arg(long, conflicts_with = "field", required_unless_present = "field")]
        unitary: Option<PathBuf>,
        #[arg(long)]
        field: Option<PathBuf>,
        #[arg(long)]
        resolution: u32,
    },
    /// Distance between two valuations.
    Distance {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        /// Use the dyadic-level distance instead of the thickening distance.
        #[arg(long)]
        discrete: bool,
    },
    /// Mutual domination on Λ_level.
    Compare {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        level: u32,
    },
    /// Bottleneck eigenvalue matching distance of two diagonal unitaries.
    DuMatch {
        #[arg(long)]
        u: PathBuf,
        #[arg(long)]
        v: PathBuf,
    },
}

#[derive(Subcommand)]
enum CauchyCmd {
    /// Check dd(α_i, α_{i+1}) ≤ C/2^(i+1) along a sequence.
    Check {
        #[arg(long)]
        sequence: PathBuf,
        #[arg(long, value_parser = rational_arg, default_value = "4")]
        constant: Q,
    },
    /// Read the limit of a Cauchy sequence at a target resolution.
    Limit {
        #[arg(long)]
        sequence: PathBuf,
        #[arg(long, value_parser = rational_arg, default_value = "4")]
        constant: Q,
        #[arg(long)]
        target: u32,
    },
}

#[derive(Subcommand)]
enum DhsCmd {
    /// Per-edge normalized trace of a logarithm.
    Det {
        #[arg(long)]
        field: PathBuf,
        /// Per-track, per-edge starting logarithms (defaults to the stored angles).
        #[arg(long)]
        lifts: Option<PathBuf>,
    },
    /// Certificate that two fields are not approximately unitarily equivalent.
    Certify {
        #[arg(long)]
        u: PathBuf,
        #[arg(long)]
        v: PathBuf,
        #[arg(long)]
        lifts_u: Option<PathBuf>,
        #[arg(long)]
        lifts_v: Option<PathBuf>,
        /// Exit 1 when no certificate is found.
        #[arg(long)]
        require: bool,
    },
}

#[derive(Subcommand)]
enum DemoCmd {
    /// Close spectral counts with different determinants over [0, 1].
    Obstruction {
        #[arg(long)]
        level: u32,
    },
    /// Equal Cu-values into the Jiang-Su algebra with different determinants.
    JiangSu {
        #[arg(long)]
        k: u64,
        #[arg(long)]
        l: u64,
        #[arg(long, default_value_t = 6)]
        resolution: u32,
    },
}

/// Bad input, as opposed to a bug.
#[derive(Debug)]
struct Invalid {
    kind: &'static str,
    message: String,
}

impl fmt::Display for Invalid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl std::error::Error for Invalid {}

fn invalid(kind: &'static str, message: impl Into<String>) -> anyhow::Error {
    Invalid {
        kind,
        message: message.into(),
    }
    .into()
}

fn rational_arg(s: &str) -> Result<Q, String> {
    parse_q(s).map_err(|e| e.to_string())
}

/// What a command produced, and whether its checks held.
struct Output {
    json: serde_json::Value,
    text: String,
    ok: bool,
}

impl Output {
    fn data<T: Serialize>(v: &T) -> anyhow::Result<Output> {
        let json = serde_json::to_value(v)?;
        let text = serde_json::to_string_pretty(&json)?;
        Ok(Output { json, text, ok: true })
    }

    fn report(r: &Report) -> anyhow::Result<Output> {
        Ok(Output {
            json: serde_json::to_value(r)?,
            text: r.to_text().trim_end().to_string(),
            ok: r.all_pass(),
        })
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let raw = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&raw).map_err(|e| invalid("parse", format!("{}: {e}", path.display())))
}

fn lifts_or_canonical(path: Option<&PathBuf>, u: &UnitaryField) -> anyhow::Result<Vec<Vec<Q>>> {
    let Some(p) = path else {
        return Ok(canonical_lifts(u));
    };
    let raw: Vec<Vec<String>> = read_json(p)?;
    raw.iter()
        .map(|track| track.iter().map(|s| parse_q(s).map_err(anyhow::Error::from)).collect())
        .collect()
}

struct Ctx {
    seed: u64,
    max_resolution: u32,
}

impl Ctx {
    fn cap(&self, what: &str, n: u32) -> anyhow::Result<()> {
        if n > self.max_resolution {
            return Err(invalid(
                "resolution_cap",
                format!("{what} {n} exceeds the resolution cap {}", self.max_resolution),
            ));
        }
        Ok(())
    }

    fn valuation(&self, path: &Path) -> anyhow::Result<ArcValuation> {
        let a: ArcValuation = read_json(path)?;
        self.cap("resolution", a.resolution())?;
        a.validate()?;
        Ok(a)
    }

    fn sequence(&self, path: &Path) -> anyhow::Result<Vec<ArcValuation>> {
        let seq: Vec<ArcValuation> = read_json(path)?;
        if seq.is_empty() {
            return Err(invalid("parse", format!("{}: empty sequence", path.display())));
        }
        for a in &seq {
            self.cap("resolution", a.resolution())?;
            a.validate()?;
        }
        Ok(seq)
    }
}

/// `α(g) ≤ α(g ∨ h)` for random elements of `Λ_n`.
fn monotone_trials(a: &ArcValuation, trials: u32, seed: u64) -> anyhow::Result<()> {
    let n = a.resolution();
    let spans = Span::all(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pick = |rng: &mut ChaCha8Rng| -> Vec<Span> {
        let k = rng.gen_range(1..=3);
        (0..k).map(|_| spans[rng.gen_range(0..spans.len())]).collect()
    };
    for t in 0..trials {
        let g = pick(&mut rng);
        let mut h = g.clone();
        h.extend(pick(&mut rng));
        let (vg, vh) = (
            a.evaluate(&LambdaElement::from_spans(n, &g))?,
            a.evaluate(&LambdaElement::from_spans(n, &h))?,
        );
        if !vg.le(&vh) {
            return Err(invalid(
                "monotonicity",
                format!("trial {t}: value {vg} on {g:?} exceeds {vh} on the larger {h:?}"),
            ));
        }
    }
    Ok(())
}

fn run(cli: &Cli) -> anyhow::Result<Output> {
    let ctx = Ctx {
        seed: cli.seed,
        max_resolution: cli.max_resolution,
    };
    match &cli.command {
        Command::Validate(v) => validate(&ctx, v),
        Command::Lift(LiftCmd::Fd { morphism, up_to }) => {
            let a = ctx.valuation(morphism)?;
            match up_to {
                Some(m) => {
                    ctx.cap("resolution", *m)?;
                    Output::data(&lift_sequence(&a, *m)?)
                }
                None => Output::data(&fill_up(&a)?),
            }
        }
        Command::Lift(LiftCmd::Graph { morphism, resolution }) => {
            let a = ctx.valuation(morphism)?;
            let n = resolution.unwrap_or(a.resolution());
            ctx.cap("resolution", n)?;
            let lift = lift_graph(&a, n)?;
            let mut out = Output::data(&lift)?;
            out.text = format!(
                "unitary field of size {} on {} edges, {} pieces, {} piece matchings, counts verified on level {}",
                lift.field.dim(),
                lift.field.graph().edges.len(),
                lift.cover.pieces.len(),
                lift.matchings.len(),
                lift.verified_at
            );
            Ok(out)
        }
        Command::Cu(CuCmd::OfUnitary {
            unitary,
            field,
            resolution,
        }) => {
            ctx.cap("resolution", *resolution)?;
            let a = match (unitary, field) {
                (Some(p), _) => cu_of_unitary(&read_json::<DiagonalUnitary>(p)?, *resolution),
                (None, Some(p)) => cu_of_field(&read_json::<UnitaryField>(p)?, *resolution)?,
                (None, None) => unreachable!("clap requires one input"),
            };
            Output::data(&a)
        }
        Command::Cu(CuCmd::Distance { a, b, discrete }) => {
            let (a, b) = (ctx.valuation(a)?, ctx.valuation(b)?);
            if *discrete {
                let r = dd_cu(&a, &b)?;
                let mut json = serde_json::to_value(&r)?;
                json["metric"] = json!("discrete");
                Ok(Output {
                    json,
                    text: r.value.to_string(),
                    ok: true,
                })
            } else {
                let d = d_cu(&a, &b)?;
                Ok(Output {
                    json: json!({ "metric": "thickening", "value": d }),
                    text: d.to_string(),
                    ok: true,
                })
            }
        }
        Command::Cu(CuCmd::Compare { a, b, level }) => {
            let (a, b) = (ctx.valuation(a)?, ctx.valuation(b)?);
            let agree = compare_on_lambda(&a, &b, *level)?;
            Ok(Output {
                json: json!({ "level": level, "agree": agree }),
                text: if agree { "agree" } else { "differ" }.into(),
                ok: true,
            })
        }
        Command::Cu(CuCmd::DuMatch { u, v }) => {
            let d = matching_distance(&read_json(u)?, &read_json(v)?)?;
            Ok(Output {
                json: json!({ "distance": format_q(&d) }),
                text: format_q(&d),
                ok: true,
            })
        }
        Command::Cauchy(CauchyCmd::Check { sequence, constant }) => {
            let check = cauchy_check(&ctx.sequence(sequence)?, *constant)?;
            let mut out = Output::data(&check)?;
            out.ok = check.pass;
            out.text = check
                .steps
                .iter()
                .map(|s| {
                    format!(
                        "[{}] step {}: dd = {}, bound {}",
                        if s.pass { "pass" } else { "FAIL" },
                        s.index,
                        s.distance.value,
                        format_q(&s.bound)
                    )
                })
                .collect::<Vec<_>>()
                .join("\n");
            Ok(out)
        }
        Command::Cauchy(CauchyCmd::Limit {
            sequence,
            constant,
            target,
        }) => {
            ctx.cap("target", *target)?;
            Output::data(&cauchy_limit(&ctx.sequence(sequence)?, *constant, *target)?)
        }
        Command::Dhs(DhsCmd::Det { field, lifts }) => {
            let u: UnitaryField = read_json(field)?;
            let l = lifts_or_canonical(lifts.as_ref(), &u)?;
            Output::data(&dhs(&u, &l)?)
        }
        Command::Dhs(DhsCmd::Certify {
            u,
            v,
            lifts_u,
            lifts_v,
            require,
        }) => {
            let (u, v): (UnitaryField, UnitaryField) = (read_json(u)?, read_json(v)?);
            let (lu, lv) = (lifts_or_canonical(lifts_u.as_ref(), &u)?, lifts_or_canonical(lifts_v.as_ref(), &v)?);
            let cert = aue_obstruction(&u, &v, &lu, &lv)?;
            let mut out = Output::data(&cert)?;
            out.ok = !(*require && cert == AueCertificate::Inconclusive);
            Ok(out)
        }
        Command::Demo(DemoCmd::Obstruction { level }) => {
            ctx.cap("level", *level)?;
            Output::report(&obstruction_demo(*level)?)
        }
        Command::Demo(DemoCmd::JiangSu { k, l, resolution }) => {
            ctx.cap("resolution", *resolution)?;
            if *k == 0 || *l == 0 {
                return Err(invalid("parse", "k and l must be positive"));
            }
            Output::report(&jiang_su_demo(*k, *l, *resolution)?)
        }
    }
}

fn validate(ctx: &Ctx, v: &ValidateArgs) -> anyhow::Result<Output> {
    let p = &v.input;
    let mut summary = json!({ "valid": true });
    match v.kind {
        Kind::Valuation => {
            let a = ctx.valuation(p)?;
            monotone_trials(&a, v.trials, ctx.seed)?;
            summary["resolution"] = json!(a.resolution());
            summary["trials"] = json!(v.trials);
        }
        Kind::Sequence => {
            summary["length"] = json!(ctx.sequence(p)?.len());
        }
        Kind::Unitary => {
            summary["dims"] = json!(read_json::<DiagonalUnitary>(p)?.dims());
        }
        Kind::Field => {
            summary["dim"] = json!(read_json::<UnitaryField>(p)?.dim());
        }
        Kind::Graph => {
            let g: MetricGraph = read_json(p)?;
            summary["vertices"] = json!(g.vertices.len());
            summary["edges"] = json!(g.edges.len());
        }
        Kind::Step => {
            let f: StepLsc = read_json(p)?;
            ctx.cap("resolution", f.resolution)?;
            f.validate()?;
            summary["resolution"] = json!(f.resolution);
        }
    }
    Ok(Output {
        text: "valid".into(),
        json: summary,
        ok: true,
    })
}

fn emit(cli: &Cli, body: &str) -> anyhow::Result<()> {
    match &cli.out {
        Some(p) => fs::write(p, format!("{body}\n")).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            writeln!(stdout, "{body}")?;
            Ok(())
        }
    }
}

/// Exit status and diagnostic kind for a failure.
fn classify(e: &anyhow::Error) -> (u8, &'static str) {
    if let Some(i) = e.downcast_ref::<Invalid>() {
        return (1, i.kind);
    }
    if let Some(l) = e.downcast_ref::<unitary_lift::Error>() {
        return (if l.is_internal() { 2 } else { 1 }, l.kind());
    }
    if e.downcast_ref::<std::io::Error>().is_some() {
        return (1, "io");
    }
    (2, "internal")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = run(&cli).and_then(|out| {
        let body = match cli.format {
            Format::Json => serde_json::to_string_pretty(&out.json)?,
            Format::Text => out.text,
        };
        emit(&cli, &body)?;
        Ok(out.ok)
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            let (code, kind) = classify(&e);
            match cli.format {
                Format::Json => eprintln!("{}", json!({ "error": kind, "message": format!("{e:#}") })),
                Format::Text => eprintln!("error[{kind}]: {e:#}"),
            }
            ExitCode::from(code)
        }
    }
}
