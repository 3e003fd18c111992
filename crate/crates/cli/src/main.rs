mod formats;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use dynot_core::oracle::solve_ssp;
use dynot_core::workload::{gaussian_mixture, random_instance, EventMix, StreamGen};
use dynot_core::{
    par, IndexMode, Instance, SimplexConfig, SimplexState, Solver, SolverConfig, StaticSolver,
    UpdateEvent,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use formats::{parse_stream, write_report, write_stream, EventLine, InstanceFile, ReportRow};

const TOLERANCE: f64 = 1e-6;

#[derive(Parser)]
#[command(
    name = "dynot",
    version,
    about = "Dynamic optimal transport: generate, solve, replay, bench, verify"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Full,
    Vertices,
}

impl From<Mode> for IndexMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Full => IndexMode::Full,
            Mode::Vertices => IndexMode::Vertices,
        }
    }
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum StreamKind {
    Move,
    Shift,
    Insert,
    Delete,
    Mixed,
}

impl StreamKind {
    fn mix(self) -> EventMix {
        match self {
            StreamKind::Move => EventMix::MOVES,
            StreamKind::Shift => EventMix::SHIFTS,
            StreamKind::Insert => EventMix::INSERTS,
            // deletes need zero-weight nodes, which draining shifts provide
            StreamKind::Delete => EventMix {
                moves: 0.0,
                shifts: 0.5,
                inserts: 0.0,
                deletes: 0.5,
                queries: 0.0,
            },
            StreamKind::Mixed => EventMix::MIXED,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Engine {
    /// Conventional network simplex over a dense cost table.
    Static,
    /// Simplex over the adjusted-cost structure.
    Structure,
}

#[derive(clap::Args, Clone)]
struct SolverArgs {
    /// Seed for structure heights.
    #[arg(long, env = "DYNOT_SEED", default_value_t = 0)]
    seed: u64,
    /// Height parameter of the structure.
    #[arg(long, default_value_t = 0.5)]
    p: f64,
    /// Pivot cap per solve, as a multiple of the node count.
    #[arg(long, default_value_t = 50)]
    max_iter: usize,
    #[arg(long, value_enum, default_value_t = Mode::Full)]
    mode: Mode,
}

impl SolverArgs {
    fn simplex(&self) -> Result<SimplexConfig> {
        if !(self.p > 0.0 && self.p < 1.0) {
            bail!("--p must lie in (0, 1)");
        }
        Ok(SimplexConfig {
            p: self.p,
            seed: self.seed,
            mode: self.mode.into(),
            max_iter_factor: self.max_iter,
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write a balanced Gaussian-mixture instance.
    Gen {
        /// Points per side.
        #[arg(long)]
        n: usize,
        /// Demand points, when different from supply.
        #[arg(long)]
        demand: Option<usize>,
        #[arg(long, default_value_t = 784)]
        dim: usize,
        #[arg(long, default_value_t = 2)]
        clusters: usize,
        #[arg(long, env = "DYNOT_SEED", default_value_t = 0)]
        seed: u64,
        /// Keep raw costs instead of scaling the median cost to 1.
        #[arg(long)]
        raw: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a random update stream valid for an instance.
    GenStream {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, value_enum, default_value_t = StreamKind::Mixed)]
        kind: StreamKind,
        #[arg(long)]
        count: usize,
        /// Per-axis variance of move and insert noise.
        #[arg(long, default_value_t = 0.5)]
        noise_var: f64,
        #[arg(long, env = "DYNOT_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve an instance from scratch and print its cost.
    Solve {
        #[arg(long)]
        instance: PathBuf,
        /// Cross-check against the shortest-path oracle (exit 2 on mismatch).
        #[arg(long)]
        oracle: bool,
        /// Also print the plan as `supply demand flow` lines.
        #[arg(long)]
        plan: bool,
        #[arg(long, value_enum, default_value_t = Engine::Static)]
        engine: Engine,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Replay an update stream through the dynamic solver.
    Stream {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        stream: PathBuf,
        /// Re-solve with the oracle after every event (exit 3 on mismatch).
        #[arg(long)]
        verify: bool,
        /// CSV report, one row per event.
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Time dynamic updates against full static re-solves per size.
    Bench {
        /// Total node counts, comma separated.
        #[arg(long, value_delimiter = ',', default_values_t = vec![500, 1000, 2000, 4000])]
        sizes: Vec<usize>,
        #[arg(long, value_enum, default_value_t = StreamKind::Move)]
        kind: StreamKind,
        /// Seeds per size.
        #[arg(long, default_value_t = 5)]
        reps: usize,
        /// Timed events per seed, after one discarded warm-up event.
        #[arg(long, default_value_t = 10)]
        events: usize,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 2)]
        clusters: usize,
        #[arg(long, default_value_t = 0.5)]
        noise_var: f64,
        #[arg(long, env = "DYNOT_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Mode::Vertices)]
        mode: Mode,
        /// Threads across seeds; 0 uses every core.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fuzz the dynamic solver against the oracle on random small instances.
    Verify {
        #[arg(long, default_value_t = 20)]
        instances: usize,
        /// Largest side size.
        #[arg(long, default_value_t = 12)]
        max_side: usize,
        #[arg(long, default_value_t = 200)]
        events: usize,
        #[arg(long, env = "DYNOT_SEED", default_value_t = 0)]
        seed: u64,
        /// Threads across instances; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
}

/// Failure with a specific exit code.
struct Exit(u8, String);

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= TOLERANCE * a.abs().max(b.abs()).max(1e-12)
}

fn median_cost(inst: &Instance) -> f64 {
    let ns = inst.side_ids(dynot_core::Side::Supply).count();
    let nd = inst.side_ids(dynot_core::Side::Demand).count();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let pairs = (ns * nd).min(20_000);
    let mut costs: Vec<f64> = if pairs == ns * nd {
        (0..ns)
            .flat_map(|i| (0..nd).map(move |j| (i, j)))
            .map(|(i, j)| inst.cost_f64(i, ns + j))
            .collect()
    } else {
        (0..pairs)
            .map(|_| inst.cost_f64(rng.random_range(0..ns), ns + rng.random_range(0..nd)))
            .collect()
    };
    costs.sort_by(f64::total_cmp);
    costs[costs.len() / 2]
}

fn cmd_gen(
    n: usize,
    demand: Option<usize>,
    dim: usize,
    clusters: usize,
    seed: u64,
    raw: bool,
    out: &Path,
) -> Result<()> {
    let nd = demand.unwrap_or(n);
    if n < 2 || nd < 2 {
        bail!("need at least 2 points per side");
    }
    let mut inst = gaussian_mixture(n, nd, dim, clusters, seed);
    if !raw {
        let m = median_cost(&inst);
        if m > 0.0 {
            inst.set_scale(1.0 / m);
        }
    }
    InstanceFile::from_instance(&inst).write(out)
}

fn cmd_gen_stream(
    instance: &Path,
    kind: StreamKind,
    count: usize,
    noise_var: f64,
    seed: u64,
    out: &Path,
) -> Result<()> {
    let (inst, mut ids) = InstanceFile::read(instance)?.to_instance()?;
    let mut gen = StreamGen::new(&inst, kind.mix(), noise_var, seed);
    if kind == StreamKind::Delete {
        gen.drain_prob = 0.5;
    }
    let lines: Vec<EventLine> = gen
        .events(count)
        .iter()
        .map(|ev| EventLine::from_event(ev, &mut ids))
        .collect::<Result<_>>()?;
    std::fs::write(out, write_stream(&lines)?).with_context(|| format!("writing {}", out.display()))
}

fn cmd_solve(
    instance: &Path,
    oracle: bool,
    plan: bool,
    engine: Engine,
    args: &SolverArgs,
) -> Result<(), Exit> {
    let run = || -> Result<(f64, dynot_core::TransportPlan, Instance, formats::IdMap)> {
        let (inst, ids) = InstanceFile::read(instance)?.to_instance()?;
        let (cost, p) = match engine {
            Engine::Static => {
                let mut s = StaticSolver::new(&inst)?;
                let cost = s.solve()?;
                (cost, s.plan(&inst))
            }
            Engine::Structure => {
                let mut st = SimplexState::new(&inst, args.simplex()?)?;
                st.run_primal(&inst)?;
                (st.cost(&inst), st.plan(&inst))
            }
        };
        Ok((cost, p, inst, ids))
    };
    let (cost, p, inst, ids) = run().map_err(|e| Exit(1, format!("{e:#}")))?;
    println!("cost {cost}");
    if plan {
        let mut rows: Vec<_> = p.iter().filter(|(_, &f)| f > 0.0).collect();
        rows.sort_by_key(|(k, _)| **k);
        for (&(u, v), f) in rows {
            let (a, b) = (
                ids.file_id(u).map_err(|e| Exit(1, e.to_string()))?,
                ids.file_id(v).map_err(|e| Exit(1, e.to_string()))?,
            );
            println!("{a} {b} {f}");
        }
    }
    if oracle {
        let (_, want) = solve_ssp(&inst).map_err(|e| Exit(1, e.to_string()))?;
        println!("oracle {want}");
        if !close(cost, want) {
            return Err(Exit(2, format!("cost {cost} disagrees with oracle {want}")));
        }
    }
    Ok(())
}

fn solver_config(args: &SolverArgs) -> Result<SolverConfig> {
    Ok(SolverConfig {
        simplex: args.simplex()?,
        ..Default::default()
    })
}

fn cmd_stream(
    instance: &Path,
    stream: &Path,
    verify: bool,
    report: Option<&Path>,
    args: &SolverArgs,
) -> Result<(), Exit> {
    let fail = |e: anyhow::Error| Exit(1, format!("{e:#}"));
    let (inst, mut ids) = InstanceFile::read(instance)
        .and_then(|f| f.to_instance())
        .map_err(fail)?;
    let text = std::fs::read_to_string(stream)
        .map_err(|e| Exit(1, format!("reading {}: {e}", stream.display())))?;
    let lines = parse_stream(&text).map_err(|e| Exit(1, format!("{}: {e:#}", stream.display())))?;
    let mut solver = Solver::new(inst, solver_config(args).map_err(fail)?)
        .map_err(|e| Exit(1, e.to_string()))?;
    let mut rows = Vec::with_capacity(lines.len());
    let mut outcome = Ok(());
    for (i, line) in lines.iter().enumerate() {
        let ev = match line.resolve(&ids) {
            Ok(ev) => ev,
            Err(e) => {
                outcome = Err(Exit(1, format!("event {}: {e:#}", i + 1)));
                break;
            }
        };
        let t = Instant::now();
        let r = match solver.apply(&ev) {
            Ok(r) => r,
            Err(e) => {
                outcome = Err(Exit(1, format!("event {}: {e}", i + 1)));
                break;
            }
        };
        let wall_ns = t.elapsed().as_nanos();
        match &ev {
            UpdateEvent::Delete { v } => ids.deleted(*v),
            UpdateEvent::Insert { .. } => {
                ids.inserted(r.inserted.expect("insert reports its node"));
            }
            _ => {}
        }
        let cost = solver.query_cost();
        let mut row = ReportRow {
            event: i + 1,
            op: ev.kind().to_string(),
            wall_ns,
            pivots: r.pivots,
            touched: r.touched,
            cost,
            oracle_cost: None,
            matches: None,
        };
        if verify {
            let want = solve_ssp(&solver.live_instance())
                .map(|r| r.1)
                .map_err(|e| Exit(1, e.to_string()))?;
            let ok = close(cost, want);
            row.oracle_cost = Some(want);
            row.matches = Some(ok);
            if !ok {
                rows.push(row);
                outcome = Err(Exit(
                    3,
                    format!("event {}: cost {cost} disagrees with oracle {want}", i + 1),
                ));
                break;
            }
        }
        rows.push(row);
    }
    if let Some(path) = report {
        write_report(path, &rows).map_err(fail)?;
    }
    outcome?;
    println!("events {}", rows.len());
    println!("cost {}", solver.query_cost());
    Ok(())
}

struct BenchRow {
    size: usize,
    dynamic: f64,
    static_: f64,
}

#[allow(clippy::too_many_arguments)]
fn bench_seed(
    nv: usize,
    kind: StreamKind,
    events: usize,
    dim: usize,
    clusters: usize,
    noise_var: f64,
    seed: u64,
    mode: Mode,
) -> Result<(Duration, u32, Duration)> {
    let inst = gaussian_mixture(nv / 2, nv - nv / 2, dim, clusters, seed);
    let mut warm = StaticSolver::new(&inst)?;
    warm.solve()?;
    let mut gen = StreamGen::new(&inst, kind.mix(), noise_var, seed);
    let cfg = SolverConfig {
        simplex: SimplexConfig {
            mode: mode.into(),
            seed,
            ..Default::default()
        },
        ..Default::default()
    };
    let mut solver = Solver::with_basis(inst, warm.into_basis(), cfg)?;
    let (mut total, mut count) = (Duration::ZERO, 0u32);
    for k in 0..=events {
        let ev = gen.next_event();
        let t = Instant::now();
        solver.apply(&ev)?;
        if k > 0 {
            total += t.elapsed();
            count += 1;
        }
    }
    let moved = solver.live_instance();
    drop(solver);
    let t = Instant::now();
    StaticSolver::new(&moved)?.solve()?;
    Ok((total, count, t.elapsed()))
}

#[allow(clippy::too_many_arguments)]
fn cmd_bench(
    sizes: &[usize],
    kind: StreamKind,
    reps: usize,
    events: usize,
    dim: usize,
    clusters: usize,
    noise_var: f64,
    seed: u64,
    mode: Mode,
    jobs: usize,
    out: Option<&Path>,
) -> Result<()> {
    if reps == 0 || events == 0 {
        bail!("--reps and --events must be positive");
    }
    let mut rows = Vec::new();
    for &nv in sizes {
        if nv < 4 {
            bail!("size {nv} is too small");
        }
        let runs = par::with_jobs(jobs, || {
            par::map_range(reps, |r| {
                bench_seed(
                    nv,
                    kind,
                    events,
                    dim,
                    clusters,
                    noise_var,
                    seed + r as u64,
                    mode,
                )
                .map_err(|e| e.to_string())
            })
        });
        let (mut dyn_total, mut dyn_count, mut static_total) =
            (Duration::ZERO, 0u32, Duration::ZERO);
        for run in runs {
            let (d, c, s) = run.map_err(anyhow::Error::msg)?;
            dyn_total += d;
            dyn_count += c;
            static_total += s;
        }
        let row = BenchRow {
            size: nv,
            dynamic: dyn_total.as_nanos() as f64 / dyn_count as f64,
            static_: static_total.as_nanos() as f64 / reps as f64,
        };
        eprintln!(
            "size {nv}: dynamic {:.3} ms, static {:.3} ms, ratio {:.4}",
            row.dynamic / 1e6,
            row.static_ / 1e6,
            row.dynamic / row.static_
        );
        rows.push(row);
    }
    let mut text = String::from("size,reps,events,dynamic_ns,static_ns,ratio\n");
    for r in &rows {
        text += &format!(
            "{},{reps},{events},{:.0},{:.0},{}\n",
            r.size,
            r.dynamic,
            r.static_,
            r.dynamic / r.static_
        );
    }
    match out {
        Some(path) => {
            std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn verify_one(k: usize, max_side: usize, events: usize, seed: u64) -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
    let na = rng.random_range(2..=max_side);
    let nb = rng.random_range(2..=max_side);
    let dim = [1, 2, 8][k % 3];
    let inst = random_instance(&mut rng, na, nb, dim);
    let mode = if k.is_multiple_of(2) {
        IndexMode::Full
    } else {
        IndexMode::Vertices
    };
    let mut gen = StreamGen::new(&inst, EventMix::MIXED, 0.05, seed ^ k as u64);
    let cfg = SolverConfig {
        simplex: SimplexConfig {
            mode,
            seed: k as u64,
            ..Default::default()
        },
        ..Default::default()
    };
    let mut solver = Solver::new(inst, cfg).map_err(|e| format!("instance {k}: {e}"))?;
    for i in 0..events {
        let ev = gen.next_event();
        solver
            .apply(&ev)
            .map_err(|e| format!("instance {k} event {i} ({}): {e}", ev.kind()))?;
        let (_, want) =
            solve_ssp(&solver.live_instance()).map_err(|e| format!("instance {k}: oracle: {e}"))?;
        let got = solver.query_cost();
        if !close(got, want) {
            return Err(format!("instance {k} event {i}: cost {got}, oracle {want}"));
        }
    }
    Ok(events)
}

fn cmd_verify(
    instances: usize,
    max_side: usize,
    events: usize,
    seed: u64,
    jobs: usize,
) -> Result<(), Exit> {
    if max_side < 2 {
        return Err(Exit(1, "--max-side must be at least 2".into()));
    }
    let results = par::with_jobs(jobs, || {
        par::map_range(instances, |k| verify_one(k, max_side, events, seed))
    });
    let mut total = 0;
    for r in results {
        total += r.map_err(|e| Exit(3, e))?;
    }
    println!("verified {instances} instances, {total} events");
    Ok(())
}

fn run(cli: Cli) -> Result<(), Exit> {
    let fail = |e: anyhow::Error| Exit(1, format!("{e:#}"));
    match cli.command {
        Command::Gen {
            n,
            demand,
            dim,
            clusters,
            seed,
            raw,
            out,
        } => cmd_gen(n, demand, dim, clusters, seed, raw, &out).map_err(fail),
        Command::GenStream {
            instance,
            kind,
            count,
            noise_var,
            seed,
            out,
        } => cmd_gen_stream(&instance, kind, count, noise_var, seed, &out).map_err(fail),
        Command::Solve {
            instance,
            oracle,
            plan,
            engine,
            solver,
        } => cmd_solve(&instance, oracle, plan, engine, &solver),
        Command::Stream {
            instance,
            stream,
            verify,
            report,
            solver,
        } => cmd_stream(&instance, &stream, verify, report.as_deref(), &solver),
        Command::Bench {
            sizes,
            kind,
            reps,
            events,
            dim,
            clusters,
            noise_var,
            seed,
            mode,
            jobs,
            out,
        } => cmd_bench(
            &sizes,
            kind,
            reps,
            events,
            dim,
            clusters,
            noise_var,
            seed,
            mode,
            jobs,
            out.as_deref(),
        )
        .map_err(fail),
        Command::Verify {
            instances,
            max_side,
            events,
            seed,
            jobs,
        } => cmd_verify(instances, max_side, events, seed, jobs),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Exit(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
