use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use streamlog::chase::{run, ChaseStats};
use streamlog::homomorphism::embeds;
use streamlog::parser::{ingest_csv, parse_facts_with, parse_query_with};
use streamlog::stream::{chase_s, StreamStats};
use streamlog::{
    bcq_entails, classify_program, parse_program, ChaseConfig, FiringKind, HeadCheck, Instance, ParseError, Program,
    Routing, StreamConfig, StreamRouting, Variant,
};

#[derive(Parser, Debug)]
#[command(name = "streamlog", version, about = "Chase-based reasoning over existential rules")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Report the fragments a program belongs to.
    Classify {
        program: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Materialize the chase of a database.
    Chase {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value = "pchase")]
        variant: Variant,
        /// Maximum fired triggers; required for the oblivious chase on
        /// programs with existentials.
        #[arg(long)]
        budget: Option<u64>,
        /// Number of chase rounds with freezing in between.
        #[arg(long)]
        resumptions: Option<u32>,
        #[command(flatten)]
        order: Order,
    },
    /// Decide a Boolean conjunctive query.
    Answer {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        query: QueryArg,
        #[arg(long, value_enum, default_value_t = EngineKind::Stream)]
        engine: EngineKind,
        #[arg(long, default_value = "iso")]
        firing: FiringKind,
        /// Batch engine variant.
        #[arg(long, default_value = "pchase")]
        variant: Variant,
        #[arg(long)]
        budget: Option<u64>,
        #[arg(long)]
        resumptions: Option<u32>,
        /// Resumption bound; defaults to one more than the query's variable count.
        #[arg(long)]
        max_res: Option<u32>,
        /// Also freeze facts that were admitted.
        #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
        freeze_admitted: bool,
        #[arg(long)]
        paranoid_hash: bool,
        #[arg(long)]
        stats: bool,
        #[arg(long, env = "STREAMLOG_TRACE", value_parser = clap::builder::FalseyValueParser::new())]
        trace: bool,
        #[command(flatten)]
        order: Order,
    },
    /// Run several chase variants on the same input and compare them.
    Diff {
        #[command(flatten)]
        input: Input,
        /// Queries to compare; repeatable.
        #[arg(long = "query", short = 'q')]
        queries: Vec<String>,
        /// Comma-separated list, e.g. `ichase,pchase_r@2,stream-hom,stream-iso`.
        #[arg(long, value_delimiter = ',', required = true)]
        variants: Vec<String>,
        #[arg(long, default_value_t = 10_000)]
        budget: u64,
        #[command(flatten)]
        order: Order,
    },
}

#[derive(Args, Debug)]
struct Input {
    program: PathBuf,
    /// A facts file, or `pred=path.csv` for headerless CSV rows.
    #[arg(long = "facts", short = 'f')]
    facts: Vec<String>,
}

#[derive(Args, Debug)]
struct QueryArg {
    #[arg(
        long,
        short = 'q',
        conflicts_with = "query_file",
        required_unless_present = "query_file"
    )]
    query: Option<String>,
    #[arg(long)]
    query_file: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct Order {
    /// rr, dfs, rand or rand:SEED.
    #[arg(long)]
    routing: Option<Routing>,
    #[arg(long, default_value = "per-atom")]
    head_check: HeadCheck,
    /// Seed for randomized routing.
    #[arg(long)]
    seed: Option<u64>,
}

impl Order {
    fn routing(&self) -> Option<Routing> {
        match (self.routing, self.seed) {
            (Some(Routing::Random(0)), Some(seed)) => Some(Routing::Random(seed)),
            (None, Some(seed)) => Some(Routing::Random(seed)),
            (r, _) => r,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Machine,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum EngineKind {
    Stream,
    Batch,
}

/// A failure that has already been reported and only needs an exit code.
#[derive(Debug)]
struct Reported;

impl std::fmt::Display for Reported {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("input rejected")
    }
}

impl std::error::Error for Reported {}

fn report_parse(path: &Path, err: ParseError) -> anyhow::Error {
    for d in &err.diagnostics {
        eprintln!("{}:{d}", path.display());
    }
    anyhow!(Reported)
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn load_program(path: &Path) -> Result<Program> {
    parse_program(&read(path)?).map_err(|e| report_parse(path, e))
}

fn load(input: &Input) -> Result<(Program, Instance)> {
    let program = load_program(&input.program)?;
    let mut sig = program.signature.clone();
    let mut db = Instance::new();
    for entry in &input.facts {
        match entry.split_once('=') {
            Some((pred, path)) if !Path::new(entry).exists() => {
                for atom in ingest_csv(pred, Path::new(path), &mut sig)? {
                    db.insert(streamlog::Fact::new(atom));
                }
            }
            _ => {
                let path = Path::new(entry);
                let facts = parse_facts_with(&read(path)?, &mut sig).map_err(|e| report_parse(path, e))?;
                db.extend(facts.facts().iter().cloned());
            }
        }
    }
    Ok((program, db))
}

fn parse_query_text(text: &str, program: &Program, origin: &Path) -> Result<streamlog::Bcq> {
    let mut sig = program.signature.clone();
    parse_query_with(text, &mut sig).map_err(|e| report_parse(origin, e))
}

fn print_chase_stats(out: &mut String, s: &ChaseStats, truncated: bool) {
    let sizes: Vec<String> = s.round_sizes.iter().map(ToString::to_string).collect();
    let _ = writeln!(out, "% triggers={}", s.triggers);
    let _ = writeln!(out, "% attempted={}", s.attempted);
    let _ = writeln!(out, "% admitted={}", s.admitted);
    let _ = writeln!(out, "% blocked={}", s.blocked);
    let _ = writeln!(out, "% round_sizes=[{}]", sizes.join(","));
    let _ = writeln!(out, "% truncated={truncated}");
}

fn print_stream_stats(out: &mut String, s: &StreamStats, max_res: u32) {
    let _ = writeln!(out, "% max_res={max_res}");
    let _ = writeln!(out, "% next_calls={}", s.next_calls);
    let _ = writeln!(out, "% get_calls={}", s.get_calls);
    let _ = writeln!(out, "% fires={}", s.fires);
    let _ = writeln!(out, "% candidates={}", s.candidates);
    let _ = writeln!(out, "% admissions={}", s.admissions);
    let _ = writeln!(out, "% blocks={}", s.blocks);
    let _ = writeln!(out, "% freezes={}", s.freezes);
    let hist: Vec<String> = s.res_histogram.iter().map(|(k, v)| format!("{k}:{v}")).collect();
    let _ = writeln!(out, "% res_histogram=[{}]", hist.join(","));
    let _ = writeln!(out, "% answered_early={}", s.answered_early);
}

fn classify(program: &Path, format: Format) -> Result<ExitCode> {
    let program = load_program(program)?;
    let report = classify_program(&program);
    match format {
        Format::Text => print!("{}", report.to_text()),
        Format::Machine => print!("{}", report.to_machine()),
    }
    Ok(ExitCode::from(if report.is_protected {
        0
    } else if report.is_warded {
        3
    } else {
        4
    }))
}

fn chase(
    input: &Input,
    variant: Variant,
    budget: Option<u64>,
    resumptions: Option<u32>,
    order: &Order,
) -> Result<ExitCode> {
    let (program, db) = load(input)?;
    let mut cfg = ChaseConfig::new(variant).with_head_check(order.head_check);
    cfg.budget = budget;
    cfg.resumptions = resumptions;
    if let Some(r) = order.routing() {
        cfg.routing = r;
    }
    let res = run(&db, &program, &cfg)?;
    let mut out = String::new();
    for f in res.instance.iter() {
        let _ = writeln!(out, "{}.", f.atom);
    }
    print_chase_stats(&mut out, &res.stats, res.truncated);
    print!("{out}");
    Ok(ExitCode::SUCCESS)
}

struct AnswerOpts<'a> {
    engine: EngineKind,
    firing: FiringKind,
    variant: Variant,
    budget: Option<u64>,
    resumptions: Option<u32>,
    max_res: Option<u32>,
    freeze_admitted: bool,
    paranoid_hash: bool,
    stats: bool,
    trace: bool,
    order: &'a Order,
}

fn answer(input: &Input, query: &QueryArg, o: AnswerOpts<'_>) -> Result<ExitCode> {
    let (program, db) = load(input)?;
    let q = match (&query.query, &query.query_file) {
        (Some(text), _) => parse_query_text(text, &program, Path::new("<query>"))?,
        (None, Some(path)) => parse_query_text(&read(path)?, &program, path)?,
        (None, None) => bail!("a query is required"),
    };
    let mut out = String::new();
    let holds = match o.engine {
        EngineKind::Stream => {
            let cfg = StreamConfig {
                firing: o.firing,
                head_check: o.order.head_check,
                routing: o.order.routing().map(StreamRouting::from).unwrap_or_default(),
                max_res: o.max_res,
                freeze_admitted: o.freeze_admitted,
                paranoid_hash: o.paranoid_hash,
                trace: o.trace,
            };
            let res = chase_s(&db, &program, Some(&q), &cfg);
            for w in &res.warnings {
                eprintln!("warning: {w}");
            }
            for e in &res.trace {
                let _ = writeln!(out, "{e}");
            }
            if o.stats {
                print_stream_stats(&mut out, &res.stats, res.max_res);
            }
            res.answer
        }
        EngineKind::Batch => {
            let mut cfg = ChaseConfig::new(o.variant).with_head_check(o.order.head_check);
            cfg.budget = o.budget;
            cfg.resumptions = o.resumptions;
            if let Some(r) = o.order.routing() {
                cfg.routing = r;
            }
            let res = run(&db, &program, &cfg)?;
            if o.stats {
                print_chase_stats(&mut out, &res.stats, res.truncated);
            }
            bcq_entails(&res.instance, &q)
        }
    };
    let _ = writeln!(out, "{holds}");
    print!("{out}");
    Ok(ExitCode::from(if holds { 0 } else { 1 }))
}

/// One entry of the `--variants` list.
#[derive(Clone, Debug)]
enum DiffVariant {
    /// A batch chase; `rounds = Some(None)` means resumption at the query's bound.
    Batch {
        variant: Variant,
        rounds: Option<Option<u32>>,
    },
    Stream {
        firing: FiringKind,
        max_res: Option<u32>,
    },
}

fn parse_variant(name: &str) -> Result<DiffVariant> {
    let full = name;
    let (name, at) = match full.split_once('@') {
        Some((n, k)) => (
            n,
            Some(
                k.parse::<u32>()
                    .with_context(|| format!("bad round count in `{full}`"))?,
            ),
        ),
        None => (full, None),
    };
    if let Some(firing) = name.strip_prefix("stream-") {
        let firing = firing.parse::<FiringKind>().map_err(|e| anyhow!(e))?;
        return Ok(DiffVariant::Stream { firing, max_res: at });
    }
    let (base, resumed) = match name.strip_suffix("_r") {
        Some(b) => (b, true),
        None => (name, false),
    };
    let variant = base.parse::<Variant>().map_err(|e| anyhow!(e))?;
    if !resumed && at.is_some() {
        bail!("`{full}`: a round count needs the resumption form, e.g. `{base}_r@2`");
    }
    Ok(DiffVariant::Batch {
        variant,
        rounds: resumed.then_some(at),
    })
}

fn diff(input: &Input, queries: &[String], variants: &[String], budget: u64, order: &Order) -> Result<ExitCode> {
    let (program, db) = load(input)?;
    let parsed: Vec<DiffVariant> = variants.iter().map(|v| parse_variant(v)).collect::<Result<_>>()?;
    let qs: Vec<streamlog::Bcq> = queries
        .iter()
        .map(|q| parse_query_text(q, &program, Path::new("<query>")))
        .collect::<Result<_>>()?;
    let batch_cfg = |variant: Variant, rounds: Option<u32>| {
        let mut cfg = ChaseConfig::new(variant).with_head_check(order.head_check);
        if variant == Variant::Oblivious {
            cfg.budget = Some(budget);
        }
        cfg.resumptions = rounds;
        if let Some(r) = order.routing() {
            cfg.routing = r;
        }
        cfg
    };
    let stream_cfg = |firing: FiringKind, max_res: Option<u32>| StreamConfig {
        firing,
        head_check: order.head_check,
        routing: order.routing().map(StreamRouting::from).unwrap_or_default(),
        max_res,
        ..StreamConfig::default()
    };

    let mut out = String::new();
    for (i, v) in variants.iter().enumerate() {
        let _ = writeln!(out, "variant.{i}={v}");
    }
    let mut diverge = false;
    for (qi, q) in qs.iter().enumerate() {
        let _ = writeln!(out, "query.{qi}={q}");
        let mut answers = Vec::new();
        for (name, v) in variants.iter().zip(&parsed) {
            let holds = match v {
                DiffVariant::Batch { variant, rounds } => {
                    let rounds = rounds.map(|r| r.unwrap_or_else(|| q.max_res()));
                    bcq_entails(&run(&db, &program, &batch_cfg(*variant, rounds))?.instance, q)
                }
                DiffVariant::Stream { firing, max_res } => {
                    chase_s(&db, &program, Some(q), &stream_cfg(*firing, *max_res)).answer
                }
            };
            let _ = writeln!(out, "answer.{qi}.{name}={holds}");
            answers.push(holds);
        }
        let agree = answers.windows(2).all(|w| w[0] == w[1]);
        diverge |= !agree;
        let _ = writeln!(out, "agree.{qi}={agree}");
    }

    // Instances are compared only for variants whose result does not depend
    // on a query.
    let mut instances: Vec<(&str, Instance)> = Vec::new();
    for (name, v) in variants.iter().zip(&parsed) {
        let inst = match v {
            DiffVariant::Batch { variant, rounds: None } => run(&db, &program, &batch_cfg(*variant, None))?.instance,
            DiffVariant::Batch {
                variant,
                rounds: Some(Some(r)),
            } => run(&db, &program, &batch_cfg(*variant, Some(*r)))?.instance,
            DiffVariant::Stream { firing, max_res } => {
                chase_s(&db, &program, None, &stream_cfg(*firing, Some(max_res.unwrap_or(1)))).facts
            }
            DiffVariant::Batch { rounds: Some(None), .. } => continue,
        };
        instances.push((name, inst));
    }
    let mut all_equivalent = true;
    for (a, ia) in &instances {
        for (b, ib) in &instances {
            if a != b {
                let c = embeds(ia, ib);
                all_equivalent &= c;
                let _ = writeln!(out, "contains.{a}.{b}={c}");
            }
        }
    }
    if qs.is_empty() {
        diverge = !all_equivalent;
    }
    let _ = writeln!(out, "verdict={}", if diverge { "diverge" } else { "agree" });
    print!("{out}");
    Ok(ExitCode::from(if diverge { 5 } else { 0 }))
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Classify { program, format } => classify(&program, format),
        Command::Chase {
            input,
            variant,
            budget,
            resumptions,
            order,
        } => chase(&input, variant, budget, resumptions, &order),
        Command::Answer {
            input,
            query,
            engine,
            firing,
            variant,
            budget,
            resumptions,
            max_res,
            freeze_admitted,
            paranoid_hash,
            stats,
            trace,
            order,
        } => answer(
            &input,
            &query,
            AnswerOpts {
                engine,
                firing,
                variant,
                budget,
                resumptions,
                max_res,
                freeze_admitted,
                paranoid_hash,
                stats,
                trace,
                order: &order,
            },
        ),
        Command::Diff {
            input,
            queries,
            variants,
            budget,
            order,
        } => diff(&input, &queries, &variants, budget, &order),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            if !e.is::<Reported>() {
                eprintln!("error: {e:#}");
            }
            ExitCode::from(2)
        }
    }
}
