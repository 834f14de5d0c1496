//! Operator entry point: generate instances, build and solve relaxations,
//! round, verify property suites, and emit benchmark tables.
//!
//! All randomness funnels through `--seed`; records are JSON lines with
//! timing isolated so reruns diff cleanly. `SOSPATH_THREADS` bounds the
//! number of worker threads for multi-instance runs.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use sospath::graph::{recognize_series_parallel, to_layered, Graph};
use sospath::instances::{
    gen_congestion_reduction, gen_cvp_reduction, gen_dijkstra_counterexample, gen_random_sp,
    gen_tightness_scalar, gen_tightness_tensor, random_lattice, CostLaw, LatticeInstance,
};
use sospath::io::{self, real_field, PeJson, RunRecord, TraceJson};
use sospath::oracles::{brute_force_group_tour, brute_force_opt, l1_baseline, lp_dijkstra};
use sospath::rng::Streams;
use sospath::rounding::{
    round_group_atsp, round_series_parallel_traced, solve_lp_shortest_path, steiner_from_atsp,
    LayeredRounder, RoundingTrace,
};
use sospath::sdp::{build_relaxation, solve as solve_sdp, SolveOptions, SolveStatus};
use sospath::verify;
use sospath::Tolerances;

#[derive(Parser)]
#[command(name = "sospath", version, about = "Vector-cost shortest path via moment relaxations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an instance file.
    Gen(GenArgs),
    /// Solve an instance end to end and emit a run record.
    Solve(SolveArgs),
    /// Round a stored pseudo-expectation on an instance.
    Round(RoundArgs),
    /// Run a property suite; non-zero exit on failure.
    Verify(VerifyArgs),
    /// Print a table of multidimensional Bell numbers as CSV.
    Bell(BellArgs),
    /// Time the stages of the pipeline on small named instances.
    Bench(BenchArgs),
}

#[derive(Args)]
struct GenArgs {
    #[command(subcommand)]
    kind: GenKind,
}

#[derive(Subcommand)]
enum GenKind {
    /// Scalar 0/1 tightness family of the given order.
    Tightness {
        #[arg(long, default_value_t = 1)]
        h: u32,
        #[arg(long, default_value_t = 4)]
        n: usize,
        /// Elementary-tensor costs instead of scalar 0/1.
        #[arg(long)]
        tensor: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Lattice (closest-vector) reduction with signed costs.
    Cvp {
        /// JSON file with {"basis": [[..]..], "target": [..]} (columns).
        #[arg(long, conflicts_with = "random")]
        basis: Option<PathBuf>,
        /// Sample a random well-conditioned lattice instead.
        #[arg(long)]
        random: bool,
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long, default_value_t = 5)]
        max_entry: i64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Congestion-minimization reduction of a random routing instance.
    Congestion {
        #[arg(long, default_value_t = 4)]
        n: usize,
        #[arg(long, default_value_t = 8)]
        m: usize,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Chain-plus-shortcuts counterexample for the label-setting heuristic.
    DijkstraCe {
        #[arg(long, default_value_t = 16)]
        n: usize,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Random series-parallel instance of exactly the requested order.
    RandomSp {
        #[arg(long, default_value_t = 1)]
        order: u32,
        #[arg(long, default_value_t = 3)]
        width: usize,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Clone)]
struct SolveArgs {
    /// Instance file(s); records are emitted in argument order.
    #[arg(long, required = true)]
    instance: Vec<PathBuf>,
    #[arg(long, default_value_t = 2)]
    p: u32,
    /// Locality parameter for the layered route, in (0, 1/2).
    #[arg(long, default_value_t = 0.45)]
    c: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Rounding trials (best-of selection by realized cost).
    #[arg(long, default_value_t = 6)]
    trials: usize,
    /// auto | sp | layered
    #[arg(long, default_value = "auto")]
    alg: String,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, default_value_t = 20_000)]
    max_iter: usize,
    /// Skip the brute-force optimum and baselines.
    #[arg(long)]
    no_baselines: bool,
    /// Dump the solved pseudo-expectation to a file.
    #[arg(long)]
    dump_pe: Option<PathBuf>,
    /// Dump the assembled moment problem (sparse rows + structure map).
    #[arg(long)]
    dump_problem: Option<PathBuf>,
}

#[derive(Args)]
struct RoundArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Stored pseudo-expectation (over the base graph, or over its layered
    /// transform with --layered).
    #[arg(long)]
    pe: PathBuf,
    #[arg(long, default_value_t = 2)]
    p: u32,
    #[arg(long, default_value_t = 6)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Round on the layered transform.
    #[arg(long)]
    layered: bool,
    /// Base-case width of the layered sampler.
    #[arg(long, default_value_t = 4, conflicts_with = "c")]
    width: usize,
    /// Locality parameter; sets the width to `ceil(e^{1/c})` when given.
    #[arg(long)]
    c: Option<f64>,
    /// Write the trace of the best trial for replay.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Suite name or `all`.
    #[arg(long, default_value = "all")]
    suite: String,
    #[arg(long, default_value_t = 20_240_817)]
    seed: u64,
    /// Sample-count override for the randomized suites.
    #[arg(long)]
    samples: Option<usize>,
    /// Machine-readable JSON report instead of text lines.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct BellArgs {
    #[arg(long, default_value_t = 4)]
    dmax: usize,
    #[arg(long, default_value_t = 8)]
    pmax: usize,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            2
        }
    };
    std::process::exit(code);
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Gen(args) => {
            cmd_gen(args)?;
            Ok(0)
        }
        Command::Solve(args) => {
            cmd_solve(args)?;
            Ok(0)
        }
        Command::Round(args) => {
            cmd_round(args)?;
            Ok(0)
        }
        Command::Verify(args) => cmd_verify(args),
        Command::Bell(args) => {
            cmd_bell(args);
            Ok(0)
        }
        Command::Bench(args) => {
            cmd_bench(args)?;
            Ok(0)
        }
    }
}

fn write_graph(path: &Path, g: &Graph<f64>, d: Option<&sospath::graph::SpDecomposition>) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    io::write_instance(BufWriter::new(file), g, d)?;
    Ok(())
}

fn read_graph(path: &Path) -> Result<(Graph<f64>, Option<sospath::graph::SpDecomposition>)> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(io::read_instance(BufReader::new(file))?)
}

fn cmd_gen(args: GenArgs) -> Result<()> {
    match args.kind {
        GenKind::Tightness { h, n, tensor, out } => {
            if tensor {
                let fam = gen_tightness_tensor::<f64>(h, n)?;
                write_graph(&out, &fam.graph, Some(&fam.decomposition))?;
            } else {
                let fam = gen_tightness_scalar::<f64>(h, n)?;
                write_graph(&out, &fam.graph, Some(&fam.decomposition))?;
            }
            eprintln!("wrote {}", out.display());
        }
        GenKind::Cvp {
            basis,
            random,
            n,
            d,
            max_entry,
            seed,
            out,
        } => {
            let instance = if let Some(path) = basis {
                let file = File::open(&path)?;
                let parsed: serde_json::Value = serde_json::from_reader(BufReader::new(file))?;
                let columns: Vec<Vec<i64>> =
                    serde_json::from_value(parsed["basis"].clone()).context("basis field")?;
                let target: Vec<i64> =
                    serde_json::from_value(parsed["target"].clone()).context("target field")?;
                LatticeInstance::new(columns, target)?
            } else if random {
                let streams = Streams::new(seed);
                random_lattice(n, d, max_entry, &mut streams.stream(0))?
            } else {
                bail!("gen cvp needs --basis FILE or --random");
            };
            let cvp = gen_cvp_reduction::<f64>(&instance)?;
            write_graph(&out, &cvp.graph, None)?;
            let side = out.with_extension("lattice.json");
            let file = File::create(&side)?;
            serde_json::to_writer_pretty(
                BufWriter::new(file),
                &serde_json::json!({
                    "basis": instance.columns,
                    "target": instance.target,
                    "t_param": instance.t_param,
                    "w_param": instance.w_param,
                }),
            )?;
            eprintln!("wrote {} and {}", out.display(), side.display());
        }
        GenKind::Congestion { n, m, k, seed, out } => {
            let streams = Streams::new(seed);
            let mut rng = streams.stream(0);
            use rand::Rng;
            let mut g: Graph<f64> = Graph::new(n, 1, 0, n - 1);
            for _ in 0..m {
                let u = rng.gen_range(0..n);
                let v = rng.gen_range(0..n);
                if u != v {
                    g.add_edge(u, v, sospath::graph::CostVector::scalar(0.0));
                }
            }
            let reach = sospath::graph::Reachability::new(&g);
            let mut pairs = Vec::new();
            let mut guard = 0;
            while pairs.len() < k && guard < 1000 {
                guard += 1;
                let s = rng.gen_range(0..n);
                let t = rng.gen_range(0..n);
                if s != t && reach.reaches(s, t) {
                    pairs.push((s, t));
                }
            }
            if pairs.len() < k {
                bail!("could not find {k} connected pairs; try another seed");
            }
            let reduced = gen_congestion_reduction(&g, &pairs)?;
            write_graph(&out, &reduced, None)?;
            eprintln!("wrote {} (pairs {:?})", out.display(), pairs);
        }
        GenKind::DijkstraCe { n, eps, out } => {
            let g = gen_dijkstra_counterexample::<f64>(n, eps)?;
            write_graph(&out, &g, None)?;
            eprintln!("wrote {}", out.display());
        }
        GenKind::RandomSp {
            order,
            width,
            dim,
            seed,
            out,
        } => {
            let streams = Streams::new(seed);
            let law = CostLaw::DyadicUnit { denominator: 64 };
            let (g, d) = gen_random_sp::<f64, _>(order, width, dim, &law, &mut streams.stream(0))?;
            write_graph(&out, &g, Some(&d))?;
            eprintln!("wrote {}", out.display());
        }
    }
    Ok(())
}

fn worker_threads() -> usize {
    std::env::var("SOSPATH_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&v| v >= 1)
        .unwrap_or(1)
}

fn cmd_solve(args: SolveArgs) -> Result<()> {
    let threads = worker_threads().min(args.instance.len().max(1));
    let mut records: Vec<Option<String>> = vec![None; args.instance.len()];
    if threads <= 1 {
        for (i, path) in args.instance.iter().enumerate() {
            records[i] = Some(solve_one(path, &args)?);
        }
    } else {
        let errors = std::sync::Mutex::new(Vec::new());
        let next = std::sync::atomic::AtomicUsize::new(0);
        let slots: Vec<std::sync::Mutex<Option<String>>> =
            (0..args.instance.len()).map(|_| std::sync::Mutex::new(None)).collect();
        std::thread::scope(|scope| {
            for _ in 0..threads {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                    if i >= args.instance.len() {
                        break;
                    }
                    match solve_one(&args.instance[i], &args) {
                        Ok(record) => *slots[i].lock().unwrap() = Some(record),
                        Err(e) => errors.lock().unwrap().push(format!("{}: {e:#}", args.instance[i].display())),
                    }
                });
            }
        });
        let errors = errors.into_inner().unwrap();
        if !errors.is_empty() {
            bail!("{} instances failed:\n{}", errors.len(), errors.join("\n"));
        }
        for (i, slot) in slots.into_iter().enumerate() {
            records[i] = slot.into_inner().unwrap();
        }
    }
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for record in records.into_iter().flatten() {
        writeln!(out, "{record}")?;
    }
    Ok(())
}

fn solve_one(path: &Path, args: &SolveArgs) -> Result<String> {
    let started = Instant::now();
    let (g, decomposition) = read_graph(path)?;
    if g.signed {
        bail!("solve requires non-negative costs; this instance is signed");
    }
    let streams = Streams::new(args.seed);
    let solver = SolveOptions {
        tol: args.tol,
        max_iter: args.max_iter,
        ..Default::default()
    };

    // Group instances run the tour / tree pipelines.
    if !g.groups.is_empty() && (g.tour || g.undirected) {
        return solve_group_instance(path, &g, args, &streams, solver, started);
    }

    let is_sp = decomposition.is_some() || recognize_series_parallel(&g).is_ok();
    let route = match args.alg.as_str() {
        "auto" => {
            if is_sp {
                "sp"
            } else {
                "layered"
            }
        }
        other => other,
    };

    let (record_alg, sos_objective, sos_bound, best_cost, status, degree) = match route {
        "sp" => {
            let degree = (2 * args.p as usize).max(2);
            let problem = build_relaxation(&g, args.p, degree, &[])?;
            if let Some(dump) = &args.dump_problem {
                problem.write_dump(BufWriter::new(File::create(dump)?))?;
            }
            let result = solve_sdp(&problem, solver)?;
            if let Some(dump) = &args.dump_pe {
                let json = PeJson::from_pe(&result.pe, 500_000)?;
                serde_json::to_writer_pretty(BufWriter::new(File::create(dump)?), &json)?;
            }
            let mut best = f64::INFINITY;
            for trial in 0..args.trials.max(1) {
                let mut rng = streams.substream(0xcc, trial as u64);
                let mut trace = RoundingTrace::default();
                let p = round_series_parallel_traced(
                    &g,
                    &result.pe,
                    &Tolerances::default(),
                    &mut rng,
                    &mut trace,
                )?;
                best = best.min(p.lp(args.p));
            }
            (
                "sp",
                result.objective,
                result.objective.max(0.0).powf(1.0 / args.p as f64),
                best,
                result.status,
                degree,
            )
        }
        "layered" => {
            let run = solve_lp_shortest_path(&g, args.p, args.c, args.trials, &streams, solver)?;
            if let Some(dump) = &args.dump_pe {
                let json = PeJson::from_pe(&run.pe, 500_000)?;
                serde_json::to_writer_pretty(BufWriter::new(File::create(dump)?), &json)?;
            }
            (
                "layered",
                run.sos_objective,
                run.sos_bound,
                run.best_cost,
                run.status,
                run.degree,
            )
        }
        other => bail!("unknown algorithm '{other}' (auto | sp | layered)"),
    };

    let mut opt_cost = None;
    let mut l1_cost = None;
    let mut dijkstra_cost = None;
    if !args.no_baselines {
        if let Ok((_, opt)) = brute_force_opt(&g, args.p) {
            opt_cost = Some(opt);
        }
        if let Ok(pth) = l1_baseline(&g) {
            l1_cost = Some(pth.lp(args.p));
        }
        if let Ok(pth) = lp_dijkstra(&g, args.p) {
            dijkstra_cost = Some(pth.lp(args.p));
        }
    }

    let record = RunRecord {
        instance: path.display().to_string(),
        algorithm: record_alg.to_string(),
        p: args.p,
        seed: args.seed,
        locality: (record_alg == "layered").then_some(args.c),
        sos_objective: real_field(sos_objective),
        sos_bound: real_field(sos_bound),
        rounded_cost: real_field(best_cost),
        opt_cost: opt_cost.map(real_field),
        l1_baseline_cost: l1_cost.map(real_field),
        lp_dijkstra_cost: dijkstra_cost.map(real_field),
        ratio_to_opt: opt_cost.map(|o| real_field(best_cost / o.max(1e-300))),
        ratio_to_bound: real_field(best_cost / sos_bound.max(1e-300)),
        status: format!("{status:?}"),
        degree,
        trials: args.trials,
        timing_ms: started.elapsed().as_millis(),
    };
    Ok(serde_json::to_string(&record)?)
}

fn solve_group_instance(
    path: &Path,
    g: &Graph<f64>,
    args: &SolveArgs,
    streams: &Streams,
    solver: SolveOptions,
    started: Instant,
) -> Result<String> {
    let (algorithm, cost, sos_objective, degree, status_str) = if g.undirected {
        let run = steiner_from_atsp(g, args.p, args.c, streams, solver)?;
        let cost = run.tree_cost.lp(args.p);
        let status = if run.tour.coverage_ok {
            "Covered".to_string()
        } else {
            "CoverageFailure".to_string()
        };
        ("group-tree", cost, run.tour.sos_objective, run.tour.degree, status)
    } else {
        let run = round_group_atsp(g, args.p, args.c, streams, solver)?;
        let cost = run.tour.lp(args.p);
        let status = if run.coverage_ok {
            "Covered".to_string()
        } else {
            "CoverageFailure".to_string()
        };
        ("group-tour", cost, run.sos_objective, run.degree, status)
    };
    let opt = brute_force_group_tour(g, args.p, g.vertex_count() * g.groups.len().max(1) * 2, 2_000_000)
        .ok()
        .flatten()
        .map(|(_, c)| c);
    let bound = sos_objective.max(0.0).powf(1.0 / args.p as f64);
    let record = RunRecord {
        instance: path.display().to_string(),
        algorithm: algorithm.to_string(),
        p: args.p,
        seed: args.seed,
        locality: Some(args.c),
        sos_objective: real_field(sos_objective),
        sos_bound: real_field(bound),
        rounded_cost: real_field(cost),
        opt_cost: opt.map(real_field),
        l1_baseline_cost: None,
        lp_dijkstra_cost: None,
        ratio_to_opt: opt.map(|o| real_field(cost / o.max(1e-300))),
        ratio_to_bound: real_field(cost / bound.max(1e-300)),
        status: status_str,
        degree,
        trials: args.trials,
        timing_ms: started.elapsed().as_millis(),
    };
    Ok(serde_json::to_string(&record)?)
}

fn cmd_round(args: RoundArgs) -> Result<()> {
    let (g, _) = read_graph(&args.instance)?;
    let pe_json: PeJson =
        serde_json::from_reader(BufReader::new(File::open(&args.pe)?))?;
    let pe = pe_json.into_pe()?;
    let streams = Streams::new(args.seed);
    let tol = Tolerances::default();
    let mut best: Option<(f64, RoundingTrace, Vec<u32>)> = None;
    for trial in 0..args.trials.max(1) {
        let mut rng = streams.substream(0xdd, trial as u64);
        let mut trace = RoundingTrace {
            seed: args.seed,
            stream: trial as u64,
            ..Default::default()
        };
        let (cost, edges) = if args.layered {
            let lg = to_layered(&g)?;
            let width = match args.c {
                Some(c) => sospath::rounding::width_from_locality(c)?,
                None => args.width,
            };
            let rounder = LayeredRounder {
                lg: &lg,
                pe: &pe,
                a: width,
                tol,
            };
            let layered_path = rounder.find_path_traced(&mut rng, Some(&mut trace))?;
            let walk = lg.walk_of_path(&layered_path.edges);
            let path = sospath::rounding::Path::new(&g, walk)?;
            (path.lp(args.p), path.edges)
        } else {
            let path =
                round_series_parallel_traced(&g, &pe, &tol, &mut rng, &mut trace)?;
            (path.lp(args.p), path.edges)
        };
        println!(
            "trial {trial}: cost {} edges {:?}",
            real_field(cost),
            edges.iter().map(|e| e.0).collect::<Vec<_>>()
        );
        if best.as_ref().map_or(true, |(b, _, _)| cost < *b) {
            best = Some((cost, trace, edges.iter().map(|e| e.0).collect()));
        }
    }
    let (cost, trace, edges) = best.expect("at least one trial");
    println!("best: cost {} edges {edges:?}", real_field(cost));
    if let Some(out) = args.trace {
        serde_json::to_writer_pretty(
            BufWriter::new(File::create(&out)?),
            &TraceJson::from_trace(&trace),
        )?;
        eprintln!("wrote {}", out.display());
    }
    Ok(())
}

fn cmd_verify(args: VerifyArgs) -> Result<i32> {
    let reports = verify::run_suite_with(&args.suite, args.seed, args.samples)?;
    let all_pass = reports.iter().all(|r| r.pass);
    if args.json {
        let value: Vec<serde_json::Value> = reports
            .iter()
            .map(|r| {
                serde_json::json!({
                    "name": r.name,
                    "pass": r.pass,
                    "detail": r.detail,
                    "millis": r.millis as u64,
                })
            })
            .collect();
        println!("{}", serde_json::to_string_pretty(&value)?);
    } else {
        for r in &reports {
            println!("{}", r.line());
        }
    }
    Ok(if all_pass { 0 } else { 1 })
}

fn cmd_bell(args: BellArgs) {
    let table = sospath::combinatorics::BellTable::new(args.dmax, args.pmax);
    print!("d\\p");
    for p in 0..=args.pmax {
        print!(",{p}");
    }
    println!();
    for d in 0..=args.dmax {
        print!("{d}");
        for p in 0..=args.pmax {
            print!(",{}", table.get(d, p));
        }
        println!();
    }
}

fn cmd_bench(args: BenchArgs) -> Result<()> {
    let streams = Streams::new(args.seed);
    println!("instance,stage,milliseconds");
    let bench_one = |name: &str, g: &Graph<f64>, p: u32| -> Result<()> {
        let t0 = Instant::now();
        let degree = (2 * p as usize).max(2);
        let problem = build_relaxation(g, p, degree, &[])?;
        println!("{name},build,{}", t0.elapsed().as_millis());
        let t1 = Instant::now();
        let result = solve_sdp(&problem, SolveOptions::default())?;
        println!("{name},solve,{}", t1.elapsed().as_millis());
        if result.status != SolveStatus::Converged {
            eprintln!("note: {name} did not converge");
        }
        let t2 = Instant::now();
        for trial in 0..20u64 {
            let mut rng = streams.substream(0xee, trial);
            round_series_parallel(g, &result.pe, &Tolerances::default(), &mut rng)?;
        }
        println!("{name},round-x20,{}", t2.elapsed().as_millis());
        Ok(())
    };
    use sospath::rounding::round_series_parallel;

    let fam = gen_tightness_scalar::<f64>(1, 6)?;
    bench_one("tightness-h1-n6", &fam.graph, 2)?;
    let fam = gen_tightness_tensor::<f64>(1, 3)?;
    bench_one("tensor-h1-n3", &fam.graph, 2)?;
    let law = CostLaw::DyadicUnit { denominator: 64 };
    let (g, _) = gen_random_sp::<f64, _>(2, 3, 2, &law, &mut streams.stream(9))?;
    bench_one("random-sp-order2", &g, 2)?;

    let t0 = Instant::now();
    let _ = verify::criterion_bell();
    println!("bell-suite,verify,{}", t0.elapsed().as_millis());
    Ok(())
}
