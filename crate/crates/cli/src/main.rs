//! Command-line front end for the boxcouple toolkit.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, Context};
use boxcouple::boxspace::{expander_report, DEFAULT_EIGEN_BUDGET};
use boxcouple::coarse::{
    act, enumerate_map_space, eps_net, verify, ControlData, MapRecord, MapSpace, Mode,
    DEFAULT_ENUMERATION_BUDGET,
};
use boxcouple::coupling::{
    equivariant_report, extend_from_net, preimage_hausdorff_check, preimage_instance, GSpace,
};
use boxcouple::gh::{convergence_evidence, gh_bounds, DEFAULT_GH_BUDGET};
use boxcouple::groups::{build_family, FamilySpec, FiniteGroupSpace, NormalChain, DEFAULT_BALL_BUDGET};
use boxcouple::limits::{diagonal_limit, verify_partial, LevelMap};
use boxcouple::measures::{invariance_defect, prokhorov, pushforward, uniform, FiniteMeasure, GroupAction};
use boxcouple::metric::FiniteMetricSpace;
use boxcouple::pipeline::{run, summary, write_run_dir, ExperimentConfig};
use boxcouple::Error;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

const BUILD_ID: &str = concat!(env!("CARGO_PKG_VERSION"), " (core ", env!("CARGO_PKG_VERSION"), ")");

#[derive(Parser)]
#[command(name = "boxcouple", version = BUILD_ID, about = "Finite-stage box spaces, coarse maps and coupling evidence")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Output format, where the command supports it.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Node or element budget for the command's search.
    #[arg(long, global = true)]
    budget: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for generated instances.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Print errors as JSON on stderr.
    #[arg(long, global = true)]
    error_json: bool,
    /// Write the result here instead of stdout.
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Dot,
}

#[derive(Subcommand)]
enum Command {
    /// Normal chains of finite quotients.
    #[command(subcommand)]
    Chain(ChainCmd),
    /// Box-space diagnostics.
    #[command(subcommand, name = "box")]
    Box(BoxCmd),
    /// Controlled maps between quotients.
    #[command(subcommand)]
    Maps(MapsCmd),
    /// Diagonal limits of level maps.
    #[command(subcommand)]
    Limit(LimitCmd),
    /// Gromov–Hausdorff bounds and evidence.
    #[command(subcommand)]
    Gh(GhCmd),
    /// Measures and the Prokhorov metric.
    #[command(subcommand)]
    Measure(MeasureCmd),
    /// Almost equivariant maps.
    #[command(subcommand)]
    Couple(CoupleCmd),
    /// End-to-end experiments.
    #[command(subcommand)]
    Pipeline(PipelineCmd),
}

#[derive(Subcommand)]
enum ChainCmd {
    /// Builds the first levels of a family.
    Build {
        /// `cyclic:K`, `cyclic:K:S1,S2` or `sl2:P1,P2,...`.
        #[arg(long, conflicts_with = "family_file")]
        family: Option<String>,
        /// A family spec in JSON, e.g. a free_hom family.
        #[arg(long)]
        family_file: Option<PathBuf>,
        #[arg(long)]
        depth: usize,
        /// Level drawn with `--format dot`; defaults to the deepest.
        #[arg(long)]
        level: Option<usize>,
    },
}

#[derive(Subcommand)]
enum BoxCmd {
    /// Spectral gap, girth, diameter and Cheeger bounds per level.
    Diagnostics { chain: PathBuf },
}

#[derive(Args)]
struct Pair {
    /// Domain quotient as `chain.json:LEVEL`.
    #[arg(long)]
    domain: String,
    /// Codomain quotient as `chain.json:LEVEL`.
    #[arg(long)]
    codomain: String,
    /// Controls `ρ₊/ρ₋/c`, e.g. `affine:2,0/affine:0.5,0/1`.
    #[arg(long)]
    controls: String,
}

#[derive(Subcommand)]
enum MapsCmd {
    /// Checks one map against the controls.
    Verify {
        #[command(flatten)]
        pair: Pair,
        /// Comma-separated images or a map record file ending in `.json`.
        #[arg(long)]
        map: String,
        #[arg(long, value_enum, default_value_t = ModeArg::Embedding)]
        mode: ModeArg,
    },
    /// Lists every controlled map in canonical order.
    Enumerate {
        #[command(flatten)]
        pair: Pair,
        #[arg(long)]
        basepointed: bool,
        #[arg(long)]
        injective: bool,
    },
    /// Builds the 2^(−R) net of a map space.
    Net {
        space: PathBuf,
        #[arg(long)]
        radius: u32,
    },
    /// Applies a word of the domain group to a member.
    Act {
        space: PathBuf,
        /// Dot-separated generator symbols, `e` for the identity.
        #[arg(long)]
        word: String,
        #[arg(long)]
        member: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Embedding,
    Equivalence,
}

#[derive(Subcommand)]
enum LimitCmd {
    /// Diagonal limit of one member from each map space.
    Run {
        /// Map-space files, one per level.
        #[arg(required = true)]
        spaces: Vec<PathBuf>,
        #[arg(long)]
        radius: u32,
        /// Member used from every space.
        #[arg(long, default_value_t = 0)]
        member: usize,
        /// Overrides the controls stored in the map spaces.
        #[arg(long)]
        controls: Option<String>,
    },
}

#[derive(Subcommand)]
enum GhCmd {
    /// Certified lower and upper bounds on the distance.
    Bounds { a: PathBuf, b: PathBuf },
    /// Best ε-isometries from each space into a target.
    Evidence {
        #[arg(long)]
        target: PathBuf,
        #[arg(required = true)]
        spaces: Vec<PathBuf>,
    },
}

#[derive(Subcommand)]
enum MeasureCmd {
    /// The uniform measure on a space.
    Uniform { space: PathBuf },
    /// Pushes a measure forward along a map.
    Push {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        measure: PathBuf,
        #[arg(long)]
        codomain: PathBuf,
        #[arg(long)]
        map: String,
    },
    /// Prokhorov distance between two measures on one space.
    Prokhorov {
        #[arg(long)]
        space: PathBuf,
        a: PathBuf,
        b: PathBuf,
        /// Accept bounds on spaces too large for the exact sweep.
        #[arg(long)]
        bounds: bool,
    },
    /// Distances between g·μ and μ over short words.
    Defect {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        measure: PathBuf,
        #[arg(long)]
        action: PathBuf,
        #[arg(long, default_value_t = 2)]
        length: usize,
        #[arg(long)]
        bounds: bool,
    },
}

#[derive(Args)]
struct GPair {
    #[arg(long)]
    domain: PathBuf,
    #[arg(long)]
    domain_action: PathBuf,
    #[arg(long)]
    codomain: PathBuf,
    #[arg(long)]
    codomain_action: PathBuf,
}

#[derive(Subcommand)]
enum CoupleCmd {
    /// Isometry and equivariance defects of a map.
    Defect {
        #[command(flatten)]
        spaces: GPair,
        #[arg(long)]
        map: String,
        #[arg(long, default_value_t = 2)]
        length: usize,
    },
    /// Extends a map from a net to the whole space.
    Extend {
        #[arg(long)]
        domain: PathBuf,
        #[arg(long)]
        codomain: PathBuf,
        #[arg(long, value_delimiter = ',')]
        net: Vec<usize>,
        #[arg(long, value_delimiter = ',')]
        images: Vec<usize>,
        #[arg(long)]
        radius: f64,
        #[arg(long)]
        epsilon: f64,
    },
    /// Preimage Hausdorff bound, on given data or on generated instances.
    Check(CheckArgs),
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long)]
    domain: Option<PathBuf>,
    #[arg(long)]
    domain_action: Option<PathBuf>,
    #[arg(long)]
    codomain: Option<PathBuf>,
    #[arg(long)]
    codomain_action: Option<PathBuf>,
    #[arg(long)]
    map: Option<String>,
    #[arg(long)]
    word: Option<String>,
    #[arg(long, value_delimiter = ',')]
    subset: Vec<usize>,
    #[arg(long)]
    xi: Option<f64>,
    /// Check this many generated instances starting at `--seed`.
    #[arg(long, conflicts_with_all = ["map", "word", "xi"])]
    instances: Option<u64>,
}

#[derive(Subcommand)]
enum PipelineCmd {
    /// Runs an experiment and writes its run directory.
    Run {
        config: PathBuf,
        /// Run directory; defaults to `runs/<name>`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Outcome of a command: the rendered output and the exit code it implies.
struct Done {
    text: String,
    code: u8,
}

impl Done {
    fn ok(text: String) -> Done {
        Done { text, code: 0 }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let error_json = cli.global.error_json;
    match execute(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            let code = exit_code(&e);
            if error_json {
                let kind = match e.downcast_ref::<Error>() {
                    Some(Error::Budget { .. }) => "budget",
                    Some(Error::Infeasible(_)) => "infeasible",
                    _ => "validation",
                };
                eprintln!("{}", json!({ "error": kind, "message": format!("{e:#}"), "exit_code": code }));
            } else {
                eprintln!("error: {e:#}");
            }
            ExitCode::from(code)
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(Error::Budget { .. }) => 3,
        Some(Error::Infeasible(_)) => 4,
        _ => 2,
    }
}

fn execute(cli: Cli) -> anyhow::Result<u8> {
    if let Some(t) = cli.global.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| anyhow!("cannot set up {t} threads: {e}"))?;
    }
    let g = &cli.global;
    let done = match cli.command {
        Command::Chain(c) => chain(g, c)?,
        Command::Box(c) => boxes(g, c)?,
        Command::Maps(c) => maps(g, c)?,
        Command::Limit(c) => limit(g, c)?,
        Command::Gh(c) => gh(g, c)?,
        Command::Measure(c) => measure(g, c)?,
        Command::Couple(c) => couple(g, c)?,
        Command::Pipeline(c) => pipeline(g, c)?,
    };
    match &g.output {
        Some(p) => fs::write(p, &done.text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{}", done.text),
    }
    Ok(done.code)
}

fn render<T: Serialize>(g: &Global, value: &T) -> anyhow::Result<String> {
    if g.format != Format::Json {
        return Err(unsupported());
    }
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn unsupported() -> anyhow::Error {
    Error::Validation("this command has no output in the requested format".into()).into()
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Validation(format!("cannot read {}: {e}", path.display())).into())
}

fn parse_json<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    serde_json::from_str(&read(path)?)
        .map_err(|e| Error::Validation(format!("{}: {e}", path.display())).into())
}

fn load_chain(path: &Path) -> anyhow::Result<NormalChain> {
    NormalChain::from_json(&read(path)?).with_context(|| format!("loading chain {}", path.display()))
}

/// Resolves `chain.json:LEVEL`, relative paths against `base`.
fn quotient_ref(text: &str, base: &Path) -> anyhow::Result<(NormalChain, usize)> {
    let (file, level) = text
        .rsplit_once(':')
        .ok_or_else(|| Error::Validation(format!("expected CHAIN.json:LEVEL, got {text:?}")))?;
    let level: usize = level
        .parse()
        .map_err(|_| Error::Validation(format!("bad level in {text:?}")))?;
    let path = base.join(file);
    let chain = load_chain(&path)?;
    chain.level(level)?;
    Ok((chain, level))
}

fn group_space(text: &str) -> anyhow::Result<FiniteGroupSpace> {
    let (chain, level) = quotient_ref(text, Path::new(""))?;
    Ok(FiniteGroupSpace::from_quotient(chain.level(level)?)?)
}

fn controls(text: &str) -> anyhow::Result<ControlData> {
    Ok(text.parse::<ControlData>()?)
}

fn map_table(text: &str) -> anyhow::Result<Vec<usize>> {
    if text.ends_with(".json") {
        let record: MapRecord = parse_json(Path::new(text))?;
        return Ok(record.table);
    }
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| Error::Validation(format!("bad map entry {t:?}")).into())
        })
        .collect()
}

fn metric_space(path: &Path) -> anyhow::Result<FiniteMetricSpace> {
    parse_json(path)
}

fn measure_on(space: &Arc<FiniteMetricSpace>, path: &Path) -> anyhow::Result<FiniteMeasure> {
    let value: serde_json::Value = parse_json(path)?;
    Ok(FiniteMeasure::from_json(space.clone(), &value)?)
}

fn chain(g: &Global, c: ChainCmd) -> anyhow::Result<Done> {
    let ChainCmd::Build {
        family,
        family_file,
        depth,
        level,
    } = c;
    let spec = match (family, family_file) {
        (Some(s), None) => FamilySpec::parse(&s)?,
        (None, Some(p)) => parse_json(&p)?,
        _ => return Err(Error::Validation("give --family or --family-file".into()).into()),
    };
    let budget = g.budget.map_or(DEFAULT_BALL_BUDGET, |b| b as usize);
    let chain = build_family(&spec, depth, budget)?;
    let text = match g.format {
        Format::Json => chain.to_json()? + "\n",
        Format::Dot => chain.level(level.unwrap_or(depth))?.to_dot(),
        Format::Csv => {
            let mut s = String::from("level,order,diameter\n");
            for q in &chain.quotients {
                s.push_str(&format!("{},{},{}\n", q.level(), q.order(), q.diameter()));
            }
            s
        }
    };
    Ok(Done::ok(text))
}

fn boxes(g: &Global, c: BoxCmd) -> anyhow::Result<Done> {
    let BoxCmd::Diagnostics { chain } = c;
    let chain = load_chain(&chain)?;
    let report = expander_report(&chain, g.budget.map_or(DEFAULT_EIGEN_BUDGET, |b| b as usize));
    let text = match g.format {
        Format::Csv => report.to_csv(),
        _ => render(g, &report)?,
    };
    Ok(Done::ok(text))
}

fn maps(g: &Global, c: MapsCmd) -> anyhow::Result<Done> {
    match c {
        MapsCmd::Verify { pair, map, mode } => {
            let domain = group_space(&pair.domain)?;
            let codomain = group_space(&pair.codomain)?;
            let table = map_table(&map)?;
            if table.len() != domain.order() || table.iter().any(|&v| v >= codomain.order()) {
                return Err(Error::Validation("map does not fit the quotients".into()).into());
            }
            let mode = match mode {
                ModeArg::Embedding => Mode::Embedding,
                ModeArg::Equivalence => Mode::Equivalence,
            };
            let report = verify(&domain, &codomain, &table, &controls(&pair.controls)?, mode);
            Ok(Done::ok(render(g, &report)?))
        }
        MapsCmd::Enumerate {
            pair,
            basepointed,
            injective,
        } => {
            let domain = group_space(&pair.domain)?;
            let codomain = group_space(&pair.codomain)?;
            let mut space = enumerate_map_space(
                &domain,
                &codomain,
                &controls(&pair.controls)?,
                basepointed,
                injective,
                g.budget.unwrap_or(DEFAULT_ENUMERATION_BUDGET),
            )?;
            space.domain_ref = pair.domain;
            space.codomain_ref = pair.codomain;
            let text = match g.format {
                Format::Csv => {
                    let mut s = String::from("member,table\n");
                    for (i, m) in space.members.iter().enumerate() {
                        let t: Vec<String> = m.iter().map(|v| v.to_string()).collect();
                        s.push_str(&format!("{i},{}\n", t.join(" ")));
                    }
                    s
                }
                _ => render(g, &space)?,
            };
            Ok(Done {
                text,
                code: if space.complete { 0 } else { 3 },
            })
        }
        MapsCmd::Net { space, radius } => {
            let space = MapSpace::from_json(&read(&space)?)?;
            Ok(Done::ok(render(g, &eps_net(&space, radius)?)?))
        }
        MapsCmd::Act {
            space,
            word,
            member,
        } => {
            let space = MapSpace::from_json(&read(&space)?)?;
            let table = space
                .members
                .get(member)
                .ok_or_else(|| Error::Validation(format!("no member {member}")))?
                .clone();
            let w = space.domain.parse_word(&word)?;
            Ok(Done::ok(render(g, &act(&space, &w, &table)?)?))
        }
    }
}

fn limit(g: &Global, c: LimitCmd) -> anyhow::Result<Done> {
    let LimitCmd::Run {
        spaces,
        radius,
        member,
        controls: override_controls,
    } = c;
    let mut loaded = Vec::new();
    for path in &spaces {
        let space = MapSpace::from_json(&read(path)?)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let (gc, gl) = quotient_ref(&space.domain_ref, base)?;
        let (hc, hl) = quotient_ref(&space.codomain_ref, base)?;
        let table = space
            .members
            .get(member)
            .ok_or_else(|| Error::Infeasible(format!("{} has no member {member}", path.display())))?
            .clone();
        loaded.push((space.controls.clone(), gc, gl, hc, hl, table));
    }
    let ctl = match override_controls {
        Some(t) => controls(&t)?,
        None => loaded[0].0.clone(),
    };
    let maps: Vec<LevelMap<'_>> = loaded
        .iter()
        .map(|(_, gc, gl, hc, hl, table)| {
            Ok(LevelMap {
                source: gc.level(*gl)?,
                target: hc.level(*hl)?,
                table,
            })
        })
        .collect::<boxcouple::Result<_>>()?;
    let budget = g.budget.map_or(DEFAULT_BALL_BUDGET, |b| b as usize);
    let map = diagonal_limit(&maps, &ctl, radius, budget)?;
    let verification = verify_partial(&map, &ctl, budget)?;
    Ok(Done::ok(render(g, &json!({ "map": map, "verification": verification }))?))
}

fn gh(g: &Global, c: GhCmd) -> anyhow::Result<Done> {
    let budget = g.budget.unwrap_or(DEFAULT_GH_BUDGET);
    match c {
        GhCmd::Bounds { a, b } => {
            let r = gh_bounds(&metric_space(&a)?, &metric_space(&b)?, budget)?;
            let value = json!({
                "lower": r.lower,
                "upper": r.upper,
                "exact": r.exact,
                "nodes": r.nodes,
                "witness": r.witness,
            });
            Ok(Done {
                text: render(g, &value)?,
                code: if r.exact { 0 } else { 3 },
            })
        }
        GhCmd::Evidence { target, spaces } => {
            let target = metric_space(&target)?;
            let seq = spaces
                .iter()
                .map(|p| metric_space(p))
                .collect::<anyhow::Result<Vec<_>>>()?;
            let ev = convergence_evidence(&seq, &target, budget)?;
            let text = match g.format {
                Format::Csv => {
                    let mut s = String::from("index,epsilon,exact\n");
                    for (i, item) in ev.items.iter().enumerate() {
                        s.push_str(&format!("{i},{},{}\n", item.epsilon, item.exact));
                    }
                    s
                }
                _ => render(g, &ev)?,
            };
            let code = if ev.items.iter().all(|i| i.exact) { 0 } else { 3 };
            Ok(Done { text, code })
        }
    }
}

fn measure(g: &Global, c: MeasureCmd) -> anyhow::Result<Done> {
    match c {
        MeasureCmd::Uniform { space } => {
            let space = Arc::new(metric_space(&space)?);
            Ok(Done::ok(render(g, &uniform(space)?.to_json()?)?))
        }
        MeasureCmd::Push {
            space,
            measure,
            codomain,
            map,
        } => {
            let space = Arc::new(metric_space(&space)?);
            let mu = measure_on(&space, &measure)?;
            let codomain = Arc::new(metric_space(&codomain)?);
            let pushed = pushforward(&mu, &map_table(&map)?, codomain)?;
            Ok(Done::ok(render(g, &pushed.to_json()?)?))
        }
        MeasureCmd::Prokhorov {
            space,
            a,
            b,
            bounds,
        } => {
            let space = Arc::new(metric_space(&space)?);
            let p = prokhorov(&measure_on(&space, &a)?, &measure_on(&space, &b)?, bounds)?;
            Ok(Done::ok(render(g, &p)?))
        }
        MeasureCmd::Defect {
            space,
            measure,
            action,
            length,
            bounds,
        } => {
            let space = Arc::new(metric_space(&space)?);
            let mu = measure_on(&space, &measure)?;
            let action: GroupAction = parse_json(&action)?;
            let action = GroupAction::new(action.symbols, action.inverse, action.perms)?;
            let report = invariance_defect(&mu, &action, length, bounds)?;
            let text = match g.format {
                Format::Csv => report.to_csv(),
                _ => render(g, &report)?,
            };
            Ok(Done::ok(text))
        }
    }
}

struct LoadedG {
    domain: FiniteMetricSpace,
    domain_action: GroupAction,
    codomain: FiniteMetricSpace,
    codomain_action: GroupAction,
}

fn load_gpair(p: &GPair) -> anyhow::Result<LoadedG> {
    let action = |path: &Path| -> anyhow::Result<GroupAction> {
        let a: GroupAction = parse_json(path)?;
        Ok(GroupAction::new(a.symbols, a.inverse, a.perms)?)
    };
    Ok(LoadedG {
        domain: metric_space(&p.domain)?,
        domain_action: action(&p.domain_action)?,
        codomain: metric_space(&p.codomain)?,
        codomain_action: action(&p.codomain_action)?,
    })
}

fn couple(g: &Global, c: CoupleCmd) -> anyhow::Result<Done> {
    match c {
        CoupleCmd::Defect { spaces, map, length } => {
            let l = load_gpair(&spaces)?;
            let x = GSpace::new(&l.domain, &l.domain_action)?;
            let y = GSpace::new(&l.codomain, &l.codomain_action)?;
            Ok(Done::ok(render(g, &equivariant_report(x, y, &map_table(&map)?, length)?)?))
        }
        CoupleCmd::Extend {
            domain,
            codomain,
            net,
            images,
            radius,
            epsilon,
        } => {
            let e = extend_from_net(
                &metric_space(&domain)?,
                &net,
                &images,
                &metric_space(&codomain)?,
                radius,
                epsilon,
            )?;
            Ok(Done::ok(render(g, &e)?))
        }
        CoupleCmd::Check(a) => {
            if let Some(count) = a.instances {
                let start = g.seed.unwrap_or(0);
                let (mut applicable, mut failed) = (0u64, Vec::new());
                for seed in start..start + count {
                    let r = preimage_instance(seed)?.check()?;
                    applicable += u64::from(r.applicable);
                    if !r.passed {
                        failed.push(seed);
                    }
                }
                let value = json!({
                    "first_seed": start,
                    "instances": count,
                    "applicable": applicable,
                    "failed_seeds": failed,
                });
                return Ok(Done::ok(render(g, &value)?));
            }
            let missing = || Error::Validation("give --domain/--codomain data, --map, --word and --xi, or --instances".into());
            let spaces = GPair {
                domain: a.domain.clone().ok_or_else(missing)?,
                domain_action: a.domain_action.clone().ok_or_else(missing)?,
                codomain: a.codomain.clone().ok_or_else(missing)?,
                codomain_action: a.codomain_action.clone().ok_or_else(missing)?,
            };
            let l = load_gpair(&spaces)?;
            let x = GSpace::new(&l.domain, &l.domain_action)?;
            let y = GSpace::new(&l.codomain, &l.codomain_action)?;
            let table = map_table(a.map.as_deref().ok_or_else(missing)?)?;
            let word = l.domain_action.parse_word(a.word.as_deref().ok_or_else(missing)?)?;
            let xi = a.xi.ok_or_else(missing)?;
            let r = preimage_hausdorff_check(x, y, &table, &word, &a.subset, xi)?;
            Ok(Done::ok(render(g, &r)?))
        }
    }
}

fn pipeline(g: &Global, c: PipelineCmd) -> anyhow::Result<Done> {
    let PipelineCmd::Run { config, out } = c;
    let mut cfg = ExperimentConfig::from_json(&read(&config)?)?;
    if let Some(b) = g.budget {
        cfg.budgets.enumeration = b;
        cfg.budgets.gh = b;
    }
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    let result = run(&cfg)?;
    let dir = out.unwrap_or_else(|| PathBuf::from("runs").join(&cfg.name));
    write_run_dir(&dir, &result)?;
    let r = &result.report;
    let code = if r.truncated.is_some() {
        4
    } else if !r.degraded.is_empty() {
        3
    } else {
        0
    };
    let text = match g.format {
        Format::Csv | Format::Dot => return Err(unsupported()),
        Format::Json => summary(r),
    };
    Ok(Done { text, code })
}
