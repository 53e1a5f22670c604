//! `ceg`: build catalogues, estimate query cardinalities, generate
//! workloads, count matches exactly and run q-error evaluations.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use ceg_core::catalogue::{build_catalogue, persist, Catalogue, CatalogueConfig, PatternSource};
use ceg_core::ceg::{build_ceg_m, CegKind};
use ceg_core::estimators::{estimate_all_heuristics, molp_on, optimistic_ceg, pstar_on, Estimate};
use ceg_core::eval::{run_workload_with, workload_catalogue, write_csv, write_summary, Method, RunConfig};
use ceg_core::graph::{load_graph, LabeledGraph};
use ceg_core::oracle::count_hom;
use ceg_core::query::{parse_query, parse_templates, parse_workload, write_workload, NamedQuery, QueryGraph};
use ceg_core::sketch::{estimate_with_sketch_cat, SketchBase};
use ceg_core::workload::{generate_workload, InstantiateMode};
use ceg_core::Error;

#[derive(Parser)]
#[command(name = "ceg", version, about = "Join cardinality estimation over cardinality estimation graphs")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a catalogue for a workload (or every small pattern) and save it.
    BuildCatalogue {
        #[command(flatten)]
        common: Common,
        /// Build every connected pattern over the graph's labels instead.
        #[arg(long)]
        exhaustive: bool,
    },
    /// Estimate one query with the selected methods.
    Estimate {
        #[command(flatten)]
        common: Common,
        /// Query file.
        query: PathBuf,
        /// Saved catalogue; built from --graph when absent.
        #[arg(long)]
        catalogue: Option<PathBuf>,
    },
    /// Instantiate query templates against a graph.
    GenWorkload {
        #[command(flatten)]
        common: Common,
    },
    /// Print the exact number of matches of a query.
    OracleCount {
        #[command(flatten)]
        common: Common,
        query: PathBuf,
    },
    /// Run methods over a workload; writes results.csv and summary.json.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        catalogue: Option<PathBuf>,
    },
}

#[derive(Args, Clone, Default)]
struct Common {
    /// key=value file; flags given on the command line take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Edge-list graph file.
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Largest catalogue pattern size in edges.
    #[arg(long)]
    h: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Sampled walks per closing rate; 0 enumerates all walks.
    #[arg(long)]
    walk_budget: Option<usize>,
    #[arg(long)]
    sketch_k: Option<u64>,
    /// Comma-separated: all, O, OCR, pstar, molp, O/max-hop-max, ...
    #[arg(long)]
    methods: Option<String>,
    /// Output file (or directory for eval and --dump-ceg).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory to write the CEGs as Graphviz files.
    #[arg(long)]
    dump_ceg: Option<PathBuf>,
    /// Workload file (`query <id> [template]` blocks, or a single query).
    #[arg(long)]
    workload: Option<PathBuf>,
    /// Template file (`template <name>` blocks, or a single template).
    #[arg(long)]
    templates: Option<PathBuf>,
    #[arg(long)]
    per_template: Option<usize>,
    /// uniform or edge.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    time_limit_ms: Option<u64>,
}

/// Resolved settings: flags over config file over defaults.
struct Settings {
    graph: Option<PathBuf>,
    h: usize,
    seed: u64,
    walk_budget: usize,
    sketch_k: u64,
    methods: String,
    out: Option<PathBuf>,
    dump_ceg: Option<PathBuf>,
    workload: Option<PathBuf>,
    templates: Option<PathBuf>,
    per_template: usize,
    mode: InstantiateMode,
    time_limit: Option<Duration>,
}

fn read_config(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Parse {
                line: i + 1,
                msg: format!("expected key=value in {}", path.display()),
            }
            .into());
        };
        map.insert(k.trim().replace('_', "-"), v.trim().to_string());
    }
    Ok(map)
}

fn config_value<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    map.get(key)
        .map(|v| {
            v.parse::<T>()
                .map_err(|e| Error::Config(format!("config key {key}: {e}")).into())
        })
        .transpose()
}

impl Common {
    fn resolve(self) -> Result<Settings> {
        let map = match &self.config {
            Some(p) => read_config(p)?,
            None => BTreeMap::new(),
        };
        const KEYS: [&str; 13] = [
            "graph", "h", "seed", "walk-budget", "sketch-k", "methods", "out", "dump-ceg", "workload", "templates",
            "per-template", "mode", "time-limit-ms",
        ];
        if let Some(k) = map.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(Error::Config(format!("unknown config key {k:?}")).into());
        }
        let path = |flag: Option<PathBuf>, key: &str| flag.or_else(|| map.get(key).map(PathBuf::from));
        let h = match self.h {
            Some(h) => h,
            None => config_value(&map, "h")?.unwrap_or(2),
        };
        if h < 2 {
            return Err(Error::Config(format!("h must be at least 2, got {h}")).into());
        }
        let mode: String = match self.mode {
            Some(m) => m,
            None => config_value(&map, "mode")?.unwrap_or_else(|| "uniform".into()),
        };
        let time_limit_ms: Option<u64> = match self.time_limit_ms {
            Some(t) => Some(t),
            None => config_value(&map, "time-limit-ms")?,
        };
        Ok(Settings {
            graph: path(self.graph, "graph"),
            h,
            seed: match self.seed {
                Some(s) => s,
                None => config_value(&map, "seed")?.unwrap_or(0),
            },
            walk_budget: match self.walk_budget {
                Some(w) => w,
                None => config_value(&map, "walk-budget")?.unwrap_or(1000),
            },
            sketch_k: match self.sketch_k {
                Some(k) => k,
                None => config_value(&map, "sketch-k")?.unwrap_or(1),
            },
            methods: match self.methods {
                Some(m) => m,
                None => config_value(&map, "methods")?.unwrap_or_else(|| "all".into()),
            },
            out: path(self.out, "out"),
            dump_ceg: path(self.dump_ceg, "dump-ceg"),
            workload: path(self.workload, "workload"),
            templates: path(self.templates, "templates"),
            per_template: match self.per_template {
                Some(n) => n,
                None => config_value(&map, "per-template")?.unwrap_or(10),
            },
            mode: mode.parse().map_err(Error::Config)?,
            time_limit: time_limit_ms.map(Duration::from_millis),
        })
    }
}

impl Settings {
    fn catalogue_config(&self) -> CatalogueConfig {
        CatalogueConfig {
            h: self.h,
            walk_budget: self.walk_budget,
            seed: self.seed,
            ..Default::default()
        }
    }

    fn graph(&self) -> Result<LabeledGraph> {
        let p = self
            .graph
            .as_ref()
            .ok_or_else(|| Error::Config("--graph is required".into()))?;
        let f = fs::File::open(p).with_context(|| format!("opening graph {}", p.display()))?;
        load_graph(BufReader::new(f)).with_context(|| format!("loading graph {}", p.display()))
    }

    fn workload(&self) -> Result<Vec<NamedQuery>> {
        let p = self
            .workload
            .as_ref()
            .ok_or_else(|| Error::Config("--workload is required".into()))?;
        read_workload(p)
    }
}

fn read_text(p: &Path, what: &str) -> Result<String> {
    fs::read_to_string(p).with_context(|| format!("reading {what} {}", p.display()))
}

fn stem(p: &Path) -> String {
    p.file_stem().map_or_else(|| "q".into(), |s| s.to_string_lossy().into_owned())
}

fn read_query(p: &Path) -> Result<QueryGraph> {
    parse_query(&read_text(p, "query")?).with_context(|| format!("parsing query {}", p.display()))
}

fn read_workload(p: &Path) -> Result<Vec<NamedQuery>> {
    let text = read_text(p, "workload")?;
    let headed = text.lines().any(|l| l.split_whitespace().next() == Some("query"));
    let ctx = || format!("parsing workload {}", p.display());
    if headed {
        parse_workload(&text).with_context(ctx)
    } else {
        let q = parse_query(&text).with_context(ctx)?;
        Ok(vec![NamedQuery {
            id: stem(p),
            template: stem(p),
            query: q,
        }])
    }
}

fn write_out(out: &Option<PathBuf>, content: &[u8]) -> Result<()> {
    match out {
        Some(p) => fs::write(p, content).with_context(|| format!("writing {}", p.display())),
        None => io::stdout().write_all(content).context("writing to stdout"),
    }
}

fn load_catalogue(p: &Path) -> Result<Catalogue> {
    let f = fs::File::open(p).with_context(|| format!("opening catalogue {}", p.display()))?;
    persist::load(BufReader::new(f)).with_context(|| format!("loading catalogue {}", p.display()))
}

fn check_fingerprint(cat: &Catalogue, g: &LabeledGraph) {
    if cat.meta.graph_fingerprint != g.fingerprint() {
        eprintln!("warning: catalogue was built from a different graph");
    }
}

fn cmd_build_catalogue(s: Settings, exhaustive: bool) -> Result<()> {
    let g = s.graph()?;
    let config = s.catalogue_config();
    let cat = if exhaustive {
        build_catalogue(&g, PatternSource::Exhaustive, config)
    } else {
        let queries: Vec<QueryGraph> = s.workload()?.into_iter().map(|n| n.query).collect();
        build_catalogue(&g, PatternSource::Workload(&queries), config)
    }
    .context("building catalogue")?;
    let mut buf = Vec::new();
    persist::save(&cat, &mut buf)?;
    write_out(&s.out, &buf)
}

fn line(e: &Estimate) -> String {
    format!("{}\t{}\t{}\t{}", e.method, e.value, e.exact, e.considered_paths)
}

fn cmd_estimate(s: Settings, query: &Path, catalogue: Option<PathBuf>) -> Result<()> {
    let q = read_query(query)?;
    let methods = Method::parse_list(&s.methods)?;
    let g = match &s.graph {
        Some(_) => Some(s.graph()?),
        None => None,
    };
    let cat = match (&catalogue, &g) {
        (Some(p), _) => {
            let cat = load_catalogue(p)?;
            if let Some(g) = &g {
                check_fingerprint(&cat, g);
            }
            cat
        }
        (None, Some(g)) => workload_catalogue(g, std::slice::from_ref(&q), &methods, &s.catalogue_config())
            .context("building catalogue")?,
        (None, None) => return Err(Error::Config("give --graph or --catalogue".into()).into()),
    };
    if s.sketch_k > 1 && g.is_none() {
        return Err(Error::Config("--sketch-k needs --graph".into()).into());
    }
    let truth = g.as_ref().map(|g| count_hom(g, &q));
    if let Some(dir) = &s.dump_ceg {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let dump = |kind: CegKind, dot: String| -> Result<()> {
        if let Some(dir) = &s.dump_ceg {
            let p = dir.join(format!("ceg_{kind}.dot"));
            fs::write(&p, dot).with_context(|| format!("writing {}", p.display()))?;
        }
        Ok(())
    };

    let mut out = String::new();
    out.push_str("method\testimate\texact\tconsideredPaths\n");
    for kind in [CegKind::O, CegKind::Ocr] {
        let wanted: Vec<Method> = methods.iter().copied().filter(|m| m.ceg_kind() == kind).collect();
        if wanted.is_empty() {
            continue;
        }
        let ceg = optimistic_ceg(&q, &cat, kind).with_context(|| format!("building CEG_{kind}"))?;
        dump(kind, ceg.to_dot(&q))?;
        let all = estimate_all_heuristics(&ceg).with_context(|| format!("estimating on CEG_{kind}"))?;
        for m in wanted {
            match m {
                Method::Optimistic { choice, .. } => {
                    let e = if s.sketch_k > 1 {
                        let g = g.as_ref().expect("checked above");
                        let base = SketchBase::Optimistic { kind, choice };
                        estimate_with_sketch_cat(&q, g, &cat, s.sketch_k, base, &s.catalogue_config())
                            .with_context(|| format!("sketching {m}"))?
                            .estimate
                    } else {
                        all.iter().find(|(c, _)| *c == choice).expect("all nine").1.clone()
                    };
                    out.push_str(&line(&e));
                    out.push('\n');
                }
                Method::PStar { .. } => match truth {
                    Some(c) => {
                        let e = pstar_on(&ceg, c).with_context(|| format!("estimating {m}"))?;
                        out.push_str(&line(&e));
                        out.push('\n');
                    }
                    None => eprintln!("note: {m} skipped; it needs --graph for the true count"),
                },
                Method::Molp => {}
            }
        }
    }
    if methods.contains(&Method::Molp) {
        let ceg = build_ceg_m(&q, &cat, false).context("building CEG_M")?;
        dump(CegKind::M, ceg.to_dot(&q))?;
        let e = if s.sketch_k > 1 {
            let g = g.as_ref().expect("checked above");
            estimate_with_sketch_cat(&q, g, &cat, s.sketch_k, SketchBase::Molp, &s.catalogue_config())
                .context("sketching molp")?
                .estimate
        } else {
            molp_on(&ceg).context("estimating molp")?
        };
        out.push_str(&line(&e));
        out.push('\n');
    }
    if let Some(c) = truth {
        out.push_str(&format!("trueCount\t{c}\n"));
    }
    write_out(&s.out, out.as_bytes())
}

fn cmd_gen_workload(s: Settings) -> Result<()> {
    let g = s.graph()?;
    let p = s
        .templates
        .as_ref()
        .ok_or_else(|| Error::Config("--templates is required".into()))?;
    let templates = parse_templates(&read_text(p, "templates")?, &stem(p))
        .with_context(|| format!("parsing templates {}", p.display()))?;
    let wl = generate_workload(&g, &templates, s.per_template, s.seed, s.mode, s.time_limit);
    let mut text = format!("# seed={} per-template={}\n", s.seed, s.per_template);
    text.push_str(&write_workload(&wl));
    write_out(&s.out, text.as_bytes())
}

fn cmd_oracle_count(s: Settings, query: &Path) -> Result<()> {
    let g = s.graph()?;
    let q = read_query(query)?;
    write_out(&s.out, format!("{}\n", count_hom(&g, &q)).as_bytes())
}

fn cmd_eval(s: Settings, catalogue: Option<PathBuf>) -> Result<()> {
    let g = s.graph()?;
    let methods = Method::parse_list(&s.methods)?;
    let workload = match (&s.workload, &s.templates) {
        (Some(_), _) => s.workload()?,
        (None, Some(p)) => {
            let templates = parse_templates(&read_text(p, "templates")?, &stem(p))
                .with_context(|| format!("parsing templates {}", p.display()))?;
            generate_workload(&g, &templates, s.per_template, s.seed, s.mode, s.time_limit)
        }
        (None, None) => bail!(Error::Config("give --workload or --templates".into())),
    };
    let config = RunConfig {
        catalogue: s.catalogue_config(),
        sketch_k: s.sketch_k,
    };
    let cat = match &catalogue {
        Some(p) => {
            let cat = load_catalogue(p)?;
            check_fingerprint(&cat, &g);
            cat
        }
        None => {
            let queries: Vec<QueryGraph> = workload.iter().map(|n| n.query.clone()).collect();
            workload_catalogue(&g, &queries, &methods, &config.catalogue).context("building catalogue")?
        }
    };
    let res = run_workload_with(&g, &workload, &methods, &config, &cat).context("running workload")?;
    let dir = s.out.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let csv_path = dir.join("results.csv");
    let f = fs::File::create(&csv_path).with_context(|| format!("writing {}", csv_path.display()))?;
    write_csv(&res.records, f).context("writing results")?;
    let json_path = dir.join("summary.json");
    let f = fs::File::create(&json_path).with_context(|| format!("writing {}", json_path.display()))?;
    write_summary(&res.summary, f).context("writing summary")?;
    for w in &res.summary.warnings {
        eprintln!("warning: {w}");
    }
    for f in &res.summary.failures {
        eprintln!("failed: {} {}: {}", f.query_id, f.method, f.error);
    }
    eprintln!(
        "{} queries, {} records -> {}",
        workload.len(),
        res.records.len(),
        dir.display()
    );
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::Config(_) => 2,
                Error::Parse { .. } | Error::Validation(_) | Error::Version { .. } | Error::Malformed(_) => 3,
                Error::Json(_) | Error::Csv(_) => 3,
                Error::MissingStatistic(_) | Error::Unreachable(_) => 4,
                Error::Sketch(_) => 5,
                Error::Io(_) => 6,
                Error::EnumerationOverflow { .. } => 1,
            };
        }
        if cause.downcast_ref::<io::Error>().is_some() {
            return 6;
        }
    }
    1
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Command::BuildCatalogue { common, exhaustive } => cmd_build_catalogue(common.resolve()?, exhaustive),
        Command::Estimate {
            common,
            query,
            catalogue,
        } => cmd_estimate(common.resolve()?, &query, catalogue),
        Command::GenWorkload { common } => cmd_gen_workload(common.resolve()?),
        Command::OracleCount { common, query } => cmd_oracle_count(common.resolve()?, &query),
        Command::Eval { common, catalogue } => cmd_eval(common.resolve()?, catalogue),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
