//! `toposketch`: batch front end of the floor-plan engine.
//!
//! Exit codes: 0 success, 1 infeasible problem, 2 usage or schema error,
//! 3 verification mismatch.

mod report;

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use toposketch::enumerate::{diff, differing_spaces, enumerate, EnumOptions, Enumeration, Signature, Witness};
use toposketch::io::{
    load_bundled, load_problem_file, problem_hash, rects_from_domains, rects_from_layout, render_svg, SolutionFile,
    SvgStyle, TopologyRecord,
};
use toposketch::layout::ContourSize;
use toposketch::model::Model;
use toposketch::optimize::{optimize, rank, summarize, GeomSolution, TimingSummary};
use toposketch::oracle::{brute_force, compare, OracleError, DEFAULT_CAP};
use toposketch::problem::{Criterion, DminMode, Problem, Weight};

/// Environment variable holding the default output directory.
pub const OUT_ENV: &str = "TOPOSKETCH_OUT";

#[derive(Parser)]
#[command(name = "toposketch", version, about = "Enumerate, optimize and render rectangular floor plans")]
struct Cli {
    /// Worker threads for geometric checks (1 disables parallelism).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Enumerate consistent topologies; writes solutions.json and a sketch gallery.
    Enumerate {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        out: Output,
        /// Stop after this many consistent topologies.
        #[arg(long)]
        max_topologies: Option<usize>,
        /// Witness layout kept per topology.
        #[arg(long, value_enum, default_value = "best")]
        witness: WitnessArg,
    },
    /// Enumerate, then optimize and rank every topology.
    Optimize {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        out: Output,
        #[arg(long)]
        max_topologies: Option<usize>,
        /// Optimal layouts kept per topology.
        #[arg(long, default_value_t = 1)]
        max_solutions: usize,
    },
    /// Render one topology as SVG.
    Render {
        #[command(flatten)]
        input: Input,
        /// Solution file to read; the problem is enumerated when absent.
        #[arg(long)]
        solutions: Option<PathBuf>,
        /// Topology index.
        #[arg(long, default_value_t = 0)]
        topology: usize,
        /// Draw the domain sketch instead of the witness layout.
        #[arg(long)]
        sketch: bool,
        /// Pixels per meter.
        #[arg(long, default_value_t = 40.0)]
        scale: f64,
        /// Output file; standard output when absent.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Show the topological differences between two topologies.
    Diff {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        solutions: Option<PathBuf>,
        a: usize,
        b: usize,
        #[command(flatten)]
        out: Output,
    },
    /// Run benchmarks and write a counts and timings report.
    Bench {
        /// Benchmarks to run; the fast ones (pfk, lr, tng, col9) by default.
        names: Vec<String>,
        /// Run every bundled benchmark.
        #[arg(long, conflicts_with = "names")]
        all: bool,
        #[command(flatten)]
        out: Output,
        #[arg(long)]
        max_topologies: Option<usize>,
    },
    /// Compare the enumeration with the brute-force oracle.
    OracleCheck {
        #[command(flatten)]
        input: Input,
        /// Candidate placements the oracle may visit.
        #[arg(long, default_value_t = DEFAULT_CAP)]
        cap: u64,
    },
    /// Start the HTTP session service.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum WitnessArg {
    First,
    Best,
}

#[derive(Args)]
struct Input {
    /// Problem file (TOML).
    #[arg(long, conflicts_with = "benchmark", required_unless_present = "benchmark")]
    problem: Option<PathBuf>,
    /// Bundled benchmark name.
    #[arg(long)]
    benchmark: Option<String>,
    /// Split every module into this many (lengths times k, areas times k²).
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(i64).range(1..=20))]
    refine: i64,
    /// Cost term `criterion=weight`, e.g. `internal_wall_length=2`; replaces the file's weights.
    #[arg(long = "weight", value_parser = parse_weight)]
    weights: Vec<(Criterion, Weight)>,
    /// Cost per module of internal partition.
    #[arg(long)]
    internal_wall_cost: Option<Weight>,
    /// Cost per module of external wall.
    #[arg(long)]
    external_wall_cost: Option<Weight>,
    #[arg(long)]
    no_symmetry: bool,
    #[arg(long)]
    no_incoherent: bool,
    #[arg(long)]
    no_topological: bool,
    #[arg(long)]
    no_orientation_propagation: bool,
    #[arg(long)]
    no_gap: bool,
    /// Compute dmin once from the initial domains.
    #[arg(long)]
    static_dmin: bool,
    /// Leave contour attachments out of topology signatures.
    #[arg(long)]
    no_contour_signature: bool,
}

#[derive(Args)]
struct Output {
    /// Output directory.
    #[arg(short = 'o', long = "out", env = OUT_ENV, default_value = "toposketch-out")]
    dir: PathBuf,
}

fn parse_weight(s: &str) -> Result<(Criterion, Weight), String> {
    let (name, w) = s.split_once('=').ok_or_else(|| format!("expected `criterion=weight`, got `{s}`"))?;
    let c: Criterion = serde_json::from_value(serde_json::Value::String(name.into()))
        .map_err(|_| format!("unknown criterion `{name}`"))?;
    Ok((c, w.parse()?))
}

/// Failure carrying its exit code.
#[derive(Debug)]
enum Fail {
    Infeasible(String),
    Usage(String),
    Mismatch(String),
}

impl Fail {
    fn code(&self) -> u8 {
        match self {
            Fail::Infeasible(_) => 1,
            Fail::Usage(_) => 2,
            Fail::Mismatch(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Fail::Infeasible(m) | Fail::Usage(m) | Fail::Mismatch(m) => m,
        }
    }
}

type Res<T> = Result<T, Fail>;

fn usage(e: impl std::fmt::Display) -> Fail {
    Fail::Usage(e.to_string())
}

impl Input {
    fn load(&self) -> Res<Problem> {
        let p = match (&self.problem, &self.benchmark) {
            (Some(path), _) => load_problem_file(path).map_err(|e| usage(format!("{}: {e}", path.display())))?,
            (None, Some(name)) => load_bundled(name).map_err(usage)?,
            (None, None) => return Err(usage("give --problem or --benchmark")),
        };
        let mut spec = p.spec.refine_module(self.refine);
        if !self.weights.is_empty() {
            spec.cost.weights = self.weights.iter().copied().collect();
        }
        if let Some(w) = self.internal_wall_cost {
            spec.cost.cost_internal_wall = w;
        }
        if let Some(w) = self.external_wall_cost {
            spec.cost.cost_external_wall = w;
        }
        let r = &mut spec.reductions;
        r.symmetry &= !self.no_symmetry;
        r.incoherent &= !self.no_incoherent;
        r.topological &= !self.no_topological;
        r.orientation_propagation &= !self.no_orientation_propagation;
        r.gap &= !self.no_gap;
        r.signature_contours &= !self.no_contour_signature;
        if self.static_dmin {
            r.dmin = DminMode::Static;
        }
        Problem::new(spec).map_err(usage)
    }
}

fn write(path: &Path, contents: &str) -> Res<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| usage(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, contents).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn units_of(problem: &Problem, layout: &toposketch::layout::Layout) -> Vec<ContourSize> {
    if !layout.units.is_empty() {
        return layout.units.clone();
    }
    problem
        .spec
        .units
        .iter()
        .map(|u| ContourSize { id: u.id.clone(), l: u.l.max.unwrap_or(1), w: u.w.max.unwrap_or(1) })
        .collect()
}

fn titled(title: String, scale: f64, highlight: BTreeSet<String>) -> SvgStyle {
    SvgStyle { scale, highlight, title: Some(title) }
}

fn witness_svg(p: &Problem, t: &TopologyRecord, style: &SvgStyle) -> String {
    render_svg(p, &units_of(p, &t.witness), &rects_from_layout(p, &t.witness), style)
}

fn sketch_svg(p: &Problem, t: &TopologyRecord, style: &SvgStyle) -> String {
    render_svg(p, &units_of(p, &t.witness), &rects_from_domains(p, &t.domains), style)
}

fn run_enumeration(m: &Model, max_topologies: Option<usize>, witness: Witness, parallel: bool) -> Res<Enumeration> {
    let e = enumerate(m, &EnumOptions { witness, max_topologies, parallel, ..EnumOptions::default() });
    if e.topologies.is_empty() {
        let why = if m.infeasible { "the constraints fail before any search" } else { "no topology has a layout" };
        return Err(Fail::Infeasible(format!(
            "infeasible problem `{}`: {why}; bounds may be too tight for the module grid, try --refine 2 to split each module",
            m.problem.spec.name
        )));
    }
    Ok(e)
}

/// Topology records from a solution file of this problem, or from a fresh enumeration.
fn records(p: &Problem, solutions: Option<&Path>, parallel: bool) -> Res<Vec<TopologyRecord>> {
    match solutions {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
            let f = SolutionFile::from_json(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
            if f.problem_hash != problem_hash(&p.spec) {
                return Err(usage(format!("{} was written for a different problem", path.display())));
            }
            let unknown = f.unknown_spaces(p);
            if !unknown.is_empty() {
                return Err(usage(format!("{} references unknown spaces {unknown:?}", path.display())));
            }
            Ok(f.topologies)
        }
        None => {
            let m = Model::build(Arc::new(p.clone()));
            let e = run_enumeration(&m, None, Witness::Best, parallel)?;
            Ok(SolutionFile::new(p, &e).topologies)
        }
    }
}

fn pick(records: &[TopologyRecord], i: usize) -> Res<&TopologyRecord> {
    records
        .get(i)
        .ok_or_else(|| usage(format!("topology {i} out of range (0..{})", records.len())))
}

fn gallery(dir: &Path, title: &str, files: &[(String, String)]) -> Res<()> {
    let mut html = format!("<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>{title}</title></head><body>\n");
    for (file, caption) in files {
        html.push_str(&format!("<figure><img src=\"{file}\"><figcaption>{caption}</figcaption></figure>\n"));
    }
    html.push_str("</body></html>\n");
    write(&dir.join("index.html"), &html)
}

fn cmd_enumerate(input: &Input, out: &Output, max: Option<usize>, witness: WitnessArg, parallel: bool) -> Res<()> {
    let p = input.load()?;
    let m = Model::build(Arc::new(p.clone()));
    let witness = match witness {
        WitnessArg::First => Witness::First,
        WitnessArg::Best => Witness::Best,
    };
    let e = run_enumeration(&m, max, witness, parallel)?;
    let f = SolutionFile::new(&p, &e);
    write(&out.dir.join("solutions.json"), &f.to_json())?;
    let dir = out.dir.join("sketches");
    let mut files = Vec::new();
    for t in &f.topologies {
        let name = format!("topology_{:04}.svg", t.index);
        let style = titled(format!("{} topology {}", p.spec.name, t.index), SvgStyle::default().scale, BTreeSet::new());
        write(&dir.join(&name), &sketch_svg(&p, t, &style))?;
        files.push((name, format!("topology {}", t.index)));
    }
    gallery(&dir, &p.spec.name, &files)?;
    println!(
        "{}: N1 {} N2 {} ({:.1} ms); wrote {}",
        p.spec.name,
        e.stats.candidates,
        e.stats.consistent,
        e.stats.elapsed_ms,
        out.dir.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct Ranked {
    position: usize,
    topology: usize,
    cost: String,
    solutions: Vec<GeomSolution>,
}

#[derive(Serialize)]
struct RankingFile {
    problem: String,
    problem_hash: String,
    ranking: Vec<Ranked>,
    timing: TimingSummary,
}

fn cmd_optimize(input: &Input, out: &Output, max: Option<usize>, max_solutions: usize, parallel: bool) -> Res<()> {
    let p = input.load()?;
    let m = Model::build(Arc::new(p.clone()));
    let e = run_enumeration(&m, max, Witness::First, parallel)?;
    let mut results = Vec::new();
    for t in &e.topologies {
        let o = optimize(&m, t, m.cost, Some(max_solutions.max(1)))
            .ok_or_else(|| Fail::Mismatch(format!("topology {} lost its layout during optimization", t.index)))?;
        results.push(o);
    }
    let order = rank(&results);
    let mut f = SolutionFile::new(&p, &e);
    f.optima = order.iter().flat_map(|&k| results[k].solutions.iter().cloned()).collect();
    write(&out.dir.join("solutions.json"), &f.to_json())?;
    let ranking = RankingFile {
        problem: p.spec.name.clone(),
        problem_hash: problem_hash(&p.spec),
        ranking: order
            .iter()
            .enumerate()
            .map(|(pos, &k)| Ranked {
                position: pos,
                topology: results[k].topology,
                cost: results[k].cost.clone(),
                solutions: results[k].solutions.clone(),
            })
            .collect(),
        timing: summarize(&results),
    };
    write(&out.dir.join("ranking.json"), &serde_json::to_string_pretty(&ranking).expect("ranking serializes"))?;
    let dir = out.dir.join("layouts");
    let mut files = Vec::new();
    for r in &ranking.ranking {
        let Some(s) = r.solutions.first() else { continue };
        let name = format!("rank_{:04}.svg", r.position);
        let style = titled(
            format!("rank {} topology {} cost {}", r.position, r.topology, r.cost),
            SvgStyle::default().scale,
            BTreeSet::new(),
        );
        write(&dir.join(&name), &render_svg(&p, &s.layout.units, &rects_from_layout(&p, &s.layout), &style))?;
        files.push((name, format!("#{} topology {} cost {}", r.position, r.topology, r.cost)));
    }
    gallery(&dir, &p.spec.name, &files)?;
    for r in ranking.ranking.iter().take(10) {
        println!("#{:<4} topology {:<5} cost {}", r.position, r.topology, r.cost);
    }
    let t = &ranking.timing;
    println!(
        "{} topologies; time to first solution median {:.2} ms, to best median {:.2} ms; first was best in {}",
        t.topologies, t.time_to_first_ms.median, t.time_to_best_ms.median, t.first_was_best
    );
    Ok(())
}

fn cmd_render(input: &Input, solutions: Option<&Path>, i: usize, sketch: bool, scale: f64, output: Option<&Path>, parallel: bool) -> Res<()> {
    let p = input.load()?;
    let recs = records(&p, solutions, parallel)?;
    let t = pick(&recs, i)?;
    let style = titled(format!("{} topology {i}", p.spec.name), scale, BTreeSet::new());
    let svg = if sketch { sketch_svg(&p, t, &style) } else { witness_svg(&p, t, &style) };
    match output {
        Some(path) => write(path, &svg),
        None => {
            print!("{svg}");
            Ok(())
        }
    }
}

fn cmd_diff(input: &Input, solutions: Option<&Path>, a: usize, b: usize, out: &Output, parallel: bool) -> Res<()> {
    let p = input.load()?;
    let recs = records(&p, solutions, parallel)?;
    let (ta, tb) = (pick(&recs, a)?, pick(&recs, b)?);
    let diffs = diff(&Signature(ta.signature.clone()), &Signature(tb.signature.clone()));
    let touched = differing_spaces(&p, &diffs);
    for d in &diffs {
        println!(
            "{}: {} -> {}",
            d.key,
            d.left.as_deref().unwrap_or("-"),
            d.right.as_deref().unwrap_or("-")
        );
    }
    println!("{} differences; spaces {}", diffs.len(), touched.iter().cloned().collect::<Vec<_>>().join(" "));
    for t in [ta, tb] {
        let style = titled(format!("{} topology {} vs {}", p.spec.name, t.index, if t.index == a { b } else { a }), 40.0, touched.clone());
        write(&out.dir.join(format!("diff_{a}_{b}_topology_{}.svg", t.index)), &witness_svg(&p, t, &style))?;
    }
    Ok(())
}

const FAST_BENCHMARKS: [&str; 4] = ["pfk", "lr", "tng", "col9"];

fn cmd_bench(names: &[String], all: bool, out: &Output, max: Option<usize>, parallel: bool, jobs: usize) -> Res<()> {
    let names: Vec<String> = if all {
        toposketch::io::bundled_names().into_iter().map(String::from).collect()
    } else if names.is_empty() {
        FAST_BENCHMARKS.iter().map(|s| s.to_string()).collect()
    } else {
        names.to_vec()
    };
    let mut rows = Vec::new();
    for name in &names {
        let p = load_bundled(name).map_err(usage)?;
        let start = Instant::now();
        let m = Model::build(Arc::new(p.clone()));
        let e = enumerate(&m, &EnumOptions { max_topologies: max, parallel, ..EnumOptions::default() });
        rows.push(report::Row {
            problem: name.clone(),
            spaces: p.spec.spaces.len(),
            n1: e.stats.candidates,
            n2: e.stats.consistent,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
            truncated: e.stats.truncated,
        });
        eprintln!("{name}: done");
    }
    let r = report::Report::new(rows, jobs);
    let md = r.markdown();
    print!("{md}");
    write(&out.dir.join("bench.md"), &md)?;
    write(&out.dir.join("bench.json"), &serde_json::to_string_pretty(&r).expect("report serializes"))
}

fn cmd_oracle_check(input: &Input, cap: u64, parallel: bool) -> Res<()> {
    let p = input.load()?;
    let report = brute_force(&p, cap).map_err(|e| match e {
        OracleError::CapExceeded { .. } => usage(format!("{e}; raise --cap")),
        OracleError::Unsupported(_) => usage(e),
    })?;
    let m = Model::build(Arc::new(p.clone()));
    let e = enumerate(&m, &EnumOptions { parallel, ..EnumOptions::default() });
    let v = compare(&p, &e, &report, true);
    println!(
        "{}: oracle {} classes from {} placements, engine {} topologies",
        p.spec.name,
        report.classes.len(),
        report.placements,
        e.topologies.len()
    );
    if v.ok() {
        println!("agreement");
        return Ok(());
    }
    for s in &v.missing {
        println!("missing: {s}");
    }
    for s in &v.extra {
        println!("extra: {s}");
    }
    for s in &v.duplicates {
        println!("duplicate: {s}");
    }
    for (s, want, got) in &v.cost_mismatches {
        println!("cost {got} instead of {want}: {s}");
    }
    Err(Fail::Mismatch(format!(
        "{} missing, {} extra, {} duplicates, {} cost mismatches",
        v.missing.len(),
        v.extra.len(),
        v.duplicates.len(),
        v.cost_mismatches.len()
    )))
}

fn cmd_serve(addr: &str) -> Res<()> {
    let rt = tokio::runtime::Runtime::new().map_err(usage)?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(addr).await.map_err(|e| usage(format!("{addr}: {e}")))?;
        eprintln!("listening on {}", listener.local_addr().map_err(usage)?);
        toposketch_server::serve(listener).await.map_err(usage)
    })
}

fn run(cli: Cli) -> Res<()> {
    let jobs = cli.jobs.unwrap_or_else(rayon::current_num_threads);
    if jobs == 0 {
        return Err(usage("--jobs must be at least 1"));
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build().map_err(usage)?;
    let parallel = jobs > 1;
    pool.install(|| match &cli.cmd {
        Cmd::Enumerate { input, out, max_topologies, witness } => {
            cmd_enumerate(input, out, *max_topologies, *witness, parallel)
        }
        Cmd::Optimize { input, out, max_topologies, max_solutions } => {
            cmd_optimize(input, out, *max_topologies, *max_solutions, parallel)
        }
        Cmd::Render { input, solutions, topology, sketch, scale, output } => {
            cmd_render(input, solutions.as_deref(), *topology, *sketch, *scale, output.as_deref(), parallel)
        }
        Cmd::Diff { input, solutions, a, b, out } => cmd_diff(input, solutions.as_deref(), *a, *b, out, parallel),
        Cmd::Bench { names, all, out, max_topologies } => cmd_bench(names, *all, out, *max_topologies, parallel, jobs),
        Cmd::OracleCheck { input, cap } => cmd_oracle_check(input, *cap, parallel),
        Cmd::Serve { addr } => cmd_serve(addr),
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
