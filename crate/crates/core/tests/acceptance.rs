//! Acceptance gate. Runs every criterion, prints one PASS/FAIL line each,
//! and exits nonzero if any fails. Pass criterion numbers as arguments to
//! run a subset, e.g. `cargo test --test acceptance -- 2 3`.

use std::collections::HashSet;
use std::time::{Duration, Instant};

use dynot_core::oracle::{enumerate_tiny, solve_ssp, DenseShadow};
use dynot_core::sol::Key;
use dynot_core::workload::{gaussian_mixture, random_instance, EventMix, StreamGen};
use dynot_core::{
    BasisTree, CostFn, IndexMode, Instance, NodeId, Side, SimplexConfig, SimplexState, SkipOrthogonalList, Solver,
    SolverConfig, StaticSolver, TourElement, TourMatrix, UpdateEvent, EPS_DUAL,
};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

type Outcome = Result<String, String>;
type Check = (usize, &'static str, fn() -> Outcome);

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-12)
}

fn solver_config(mode: IndexMode, seed: u64) -> SolverConfig {
    SolverConfig { simplex: SimplexConfig { mode, seed, ..Default::default() }, ..Default::default() }
}

/// First `k` supplies and demands of `inst`, weights renormalized per side.
fn corner(inst: &Instance, k: usize) -> Option<Instance> {
    let pick = |side| {
        let ids: Vec<NodeId> = inst.side_ids(side).filter(|&v| inst.weight(v) != 0.0).take(k).collect();
        let total: f64 = ids.iter().map(|&v| inst.weight(v).abs()).sum();
        ids.iter().map(|&v| (inst.coords(v).to_vec(), inst.weight(v).abs() / total)).collect::<Vec<_>>()
    };
    let (a, b) = (pick(Side::Supply), pick(Side::Demand));
    if a.len() < k || b.len() < k {
        return None;
    }
    Some(Instance::from_marginals(inst.dim(), a, b, CostFn::SquaredEuclidean).expect("valid corner"))
}

/// Enumeration, SSP and the dynamic solver on one tiny instance.
fn three_way(inst: &Instance, seed: u64) -> Result<(), String> {
    let brute = enumerate_tiny(inst).map_err(|e| e.to_string())?;
    let (_, ssp) = solve_ssp(inst).map_err(|e| e.to_string())?;
    let dynamic = Solver::new(inst.clone(), solver_config(IndexMode::Full, seed)).map_err(|e| e.to_string())?.query_cost();
    if !rel_close(brute, ssp, 1e-6) || !rel_close(brute, dynamic, 1e-6) {
        return Err(format!("enumeration {brute}, ssp {ssp}, dynamic {dynamic}"));
    }
    Ok(())
}

/// Oracle-equivalence fuzz and the Euler-tour law on the same streams.
fn fuzz_streams() -> (Outcome, Outcome) {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let (mut events, mut mutations, mut tiny) = (0usize, 0usize, 0usize);
    let mut oracle_fail: Option<String> = None;
    let mut tour_fail: Option<String> = None;
    for i in 0..100u64 {
        let na = rng.random_range(2..=20);
        let nb = rng.random_range(2..=20);
        let dim = [1, 2, 8][i as usize % 3];
        let inst = random_instance(&mut rng, na, nb, dim);
        let mode = if i.is_multiple_of(2) { IndexMode::Full } else { IndexMode::Vertices };
        let mut gen = StreamGen::new(&inst, EventMix::MIXED, 0.02, i);
        gen.drain_prob = 0.3;
        let mut solver = match Solver::new(inst, solver_config(mode, i)) {
            Ok(s) => s,
            Err(e) => {
                oracle_fail.get_or_insert(format!("instance {i}: initial solve failed: {e}"));
                continue;
            }
        };
        for k in 0..200 {
            let ev = gen.next_event();
            events += 1;
            if let Err(e) = solver.apply(&ev) {
                oracle_fail.get_or_insert(format!("instance {i} event {k} ({}): {e}", ev.kind()));
                break;
            }
            let live = solver.live_instance();
            let want = solve_ssp(&live).map(|r| r.1);
            let got = solver.query_cost();
            match want {
                Ok(w) if rel_close(got, w, 1e-6) => {}
                Ok(w) => {
                    oracle_fail.get_or_insert(format!("instance {i} event {k}: dynamic {got}, oracle {w}"));
                }
                Err(e) => {
                    oracle_fail.get_or_insert(format!("instance {i} event {k}: oracle failed: {e}"));
                }
            }
            if ev != UpdateEvent::Query {
                mutations += 1;
                let n = solver.instance().len();
                let adj = &solver.state().adj;
                let tour_len = adj.tour_len(0);
                let ok = match adj.validate_tour(0) {
                    Ok(vertices) => vertices == n && tour_len == 3 * n - 2,
                    Err(_) => false,
                };
                if !ok || solver.state().basis.edge_count() + 1 != n {
                    tour_fail.get_or_insert(format!(
                        "instance {i} event {k}: tour of {tour_len} elements over {n} tree vertices"
                    ));
                }
            }
            if k == 99 || k == 199 {
                for size in [3, 4] {
                    if let Some(sub) = corner(&solver.live_instance(), size) {
                        tiny += 1;
                        if let Err(e) = three_way(&sub, i) {
                            oracle_fail.get_or_insert(format!("instance {i} {size}x{size} corner: {e}"));
                        }
                    }
                }
            }
        }
    }
    let c1 = match oracle_fail {
        None => Ok(format!("{events} events on 100 instances, {tiny} tiny three-way checks")),
        Some(e) => Err(e),
    };
    let c7 = match tour_fail {
        None => Ok(format!("{mutations} mutations, tour length 3|V|-2 and valid every time")),
        Some(e) => Err(e),
    };
    (c1, c7)
}

fn vertex_of(tm: &TourMatrix, k: Key) -> Option<usize> {
    match tm.forest().kind(k) {
        TourElement::SelfLoop(v) => Some(v),
        _ => None,
    }
}

fn key_set(keys: Vec<Key>) -> HashSet<Key> {
    keys.into_iter().collect()
}

fn compare_piece(tm: &TourMatrix, shadow: &DenseShadow, piece: dynot_core::sol::Piece) -> Vec<String> {
    let rows = key_set(tm.sol().row_keys(piece));
    let cols = key_set(tm.sol().col_keys(piece));
    shadow.diff(&rows, &cols, &tm.sol().cells(piece))
}

fn compare_min(tm: &mut TourMatrix, shadow: &DenseShadow, piece: dynot_core::sol::Piece) -> Option<String> {
    let rows = key_set(tm.sol().row_keys(piece));
    let cols = key_set(tm.sol().col_keys(piece));
    let got = tm.sol_mut().global_min(piece);
    let want = shadow.min(&rows, &cols)?;
    if got.value != want.0 || (got.value.is_finite() && (got.row, got.col) != (want.1, want.2)) {
        return Some(format!("min {:?} vs shadow {want:?}", got));
    }
    None
}

/// Differential test of the structure against a dense shadow.
fn structure_differential() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xd1ff);
    let (mut ops, mut audits, mut trees) = (0usize, 0usize, 0usize);
    let mut problems: Vec<String> = Vec::new();
    while ops < 10_000 && problems.is_empty() {
        let n = rng.random_range(5..=50);
        let mode = if trees.is_multiple_of(2) { IndexMode::Full } else { IndexMode::Vertices };
        trees += 1;
        let mut edges: Vec<(usize, usize)> = (1..n).map(|i| (rng.random_range(0..i), i)).collect();
        let mut tree = BasisTree::with_nodes(n);
        for &(a, b) in &edges {
            tree.add_edge(a, b, 0.0);
        }
        let table: Vec<Vec<f64>> =
            (0..n).map(|_| (0..n).map(|_| rng.random_range(0..1000) as f64).collect()).collect();
        let mut tm = TourMatrix::new(mode, 0.5, trees as u64);
        tm.build(&tree, |u, v| table[u][v]).expect("build");
        let piece = tm.piece_of(0).expect("piece");
        let cells: Vec<(Key, Key, f64)> = {
            let keys = tm.sol().row_keys(piece);
            let mut out = Vec::new();
            for &r in &keys {
                for &c in &keys {
                    let v = match (vertex_of(&tm, r), vertex_of(&tm, c)) {
                        (Some(u), Some(v)) => table[u][v],
                        _ => f64::INFINITY,
                    };
                    out.push((r, c, v));
                }
            }
            out
        };
        let mut shadow = DenseShadow::from_cells(cells);
        for _ in 0..200 {
            if ops >= 10_000 || !problems.is_empty() {
                break;
            }
            ops += 1;
            let all = key_set(tm.sol().row_keys(tm.piece_of(0).unwrap()));
            match rng.random_range(0..6) {
                0 => {
                    let x = rng.random_range(-50..=50) as f64;
                    tm.range_add(tm.piece_of(0).unwrap(), x);
                    shadow.range_add(&all, &all, x);
                }
                1 => {
                    let (u, v) = (rng.random_range(0..n), rng.random_range(0..n));
                    let x = rng.random_range(0..1000) as f64;
                    tm.write(u, v, x).unwrap();
                    shadow.set(tm.key_of(u).unwrap(), tm.key_of(v).unwrap(), x);
                }
                2 => {
                    let v = rng.random_range(0..n);
                    let row: Vec<f64> = (0..n).map(|_| rng.random_range(0..1000) as f64).collect();
                    let col: Vec<f64> = (0..n).map(|_| rng.random_range(0..1000) as f64).collect();
                    let value = |a: usize, b: usize| if a == v { row[b] } else { col[a] };
                    tm.refresh_vertex(v, value).unwrap();
                    let kv = tm.key_of(v).unwrap();
                    for w in 0..n {
                        let kw = tm.key_of(w).unwrap();
                        shadow.set(kv, kw, value(v, w));
                        shadow.set(kw, kv, value(w, v));
                    }
                }
                3 => {
                    let whole = tm.piece_of(0).unwrap();
                    if let Some(p) = compare_min(&mut tm, &shadow, whole) {
                        problems.push(format!("tree {trees} op {ops}: {p}"));
                    }
                }
                _ => {
                    let at = rng.random_range(0..edges.len());
                    let (u, v) = edges.swap_remove(at);
                    if mode == IndexMode::Full {
                        let (a, b) = (tm.forest().arc(u, v).unwrap(), tm.forest().arc(v, u).unwrap());
                        shadow.remove_key(a);
                        shadow.remove_key(b);
                    }
                    let pieces = tm.cut(u, v).unwrap();
                    for _ in 0..rng.random_range(0..4) {
                        let p = *[pieces.uu, pieces.uv, pieces.vu, pieces.vv].choose(&mut rng).unwrap();
                        if rng.random::<bool>() {
                            let x = rng.random_range(-50..=50) as f64;
                            let rows = key_set(tm.sol().row_keys(p));
                            let cols = key_set(tm.sol().col_keys(p));
                            tm.range_add(p, x);
                            shadow.range_add(&rows, &cols, x);
                        } else if let Some(e) = compare_min(&mut tm, &shadow, p) {
                            problems.push(format!("tree {trees} op {ops} piece: {e}"));
                        }
                    }
                    for p in [pieces.uu, pieces.uv, pieces.vu, pieces.vv] {
                        problems.extend(compare_piece(&tm, &shadow, p).into_iter().take(3));
                    }
                    let side_u: Vec<usize> =
                        tm.sol().row_keys(pieces.uu).into_iter().filter_map(|k| vertex_of(&tm, k)).collect();
                    let side_v: Vec<usize> =
                        tm.sol().row_keys(pieces.vv).into_iter().filter_map(|k| vertex_of(&tm, k)).collect();
                    let x = *side_u.choose(&mut rng).unwrap();
                    let y = *side_v.choose(&mut rng).unwrap();
                    tm.link(pieces, x, y).unwrap();
                    edges.push((x, y));
                    if mode == IndexMode::Full {
                        let a = tm.forest().arc(x, y).unwrap();
                        let b = tm.forest().arc(y, x).unwrap();
                        let others: Vec<Key> = tm.sol().row_keys(tm.piece_of(0).unwrap());
                        shadow.add_key(a, &others, |_, _| f64::INFINITY);
                        shadow.add_key(b, &others, |_, _| f64::INFINITY);
                    }
                }
            }
            if ops % 10 == 0 {
                problems.extend(compare_piece(&tm, &shadow, tm.piece_of(0).unwrap()).into_iter().take(3));
            }
            if ops % 100 == 0 {
                audits += 1;
                if let Err(e) = tm.sol().audit(tm.piece_of(0).unwrap()) {
                    problems.push(format!("tree {trees} op {ops}: audit: {e}"));
                }
            }
        }
    }
    match problems.first() {
        None => Ok(format!("{ops} ops over {trees} trees, {audits} audits, 0 mismatches")),
        Some(p) => Err(format!("{} mismatches, first: {p}", problems.len())),
    }
}

/// Node counts of full structures for p = 1/2.
fn space_law() -> Outcome {
    let mut fits = Vec::new();
    for n in [50usize, 100, 200] {
        let keys: Vec<Key> = (0..n as Key).collect();
        let mut total = 0usize;
        for seed in 0..50 {
            let mut sol = SkipOrthogonalList::new(0.5, seed);
            sol.build(&keys, |_, _| 0.0).map_err(|e| e.to_string())?;
            let count = sol.node_count();
            if count > 8 * n * n {
                return Err(format!("n={n} seed={seed}: {count} nodes > 8n^2"));
            }
            total += count;
        }
        fits.push((n, total as f64 / 50.0 / (n * n) as f64));
    }
    let lo = fits.iter().map(|f| f.1).fold(f64::INFINITY, f64::min);
    let hi = fits.iter().map(|f| f.1).fold(0.0, f64::max);
    let shown: Vec<String> = fits.iter().map(|(n, a)| format!("n={n}: a={a:.3}")).collect();
    if hi / lo > 1.15 {
        return Err(format!("constant drifts by {:.1}% ({})", 100.0 * (hi / lo - 1.0), shown.join(", ")));
    }
    Ok(format!("max/min a = {:.3} ({})", hi / lo, shown.join(", ")))
}

/// Mean touched structure nodes per pivot, first 100 pivots from the
/// northwest corner.
fn pivot_linearity() -> Outcome {
    let sizes = [100usize, 200, 400, 800];
    let mut means = Vec::new();
    for &nv in &sizes {
        let mut total = 0u64;
        let mut count = 0u64;
        for seed in 0..3 {
            let inst = gaussian_mixture(nv / 2, nv / 2, 2, 2, seed);
            let cfg = SimplexConfig { mode: IndexMode::Full, seed, ..Default::default() };
            let mut st = SimplexState::new(&inst, cfg).map_err(|e| e.to_string())?;
            for _ in 0..100 {
                let before = st.touched();
                let Some((s, d, t)) = st.select_entering().map_err(|e| e.to_string())? else { break };
                let leaving = st.find_leaving(&inst, s, d).map_err(|e| e.to_string())?;
                st.pivot(&inst, s, d, t, leaving).map_err(|e| e.to_string())?;
                total += st.touched() - before;
                count += 1;
            }
        }
        means.push(total as f64 / count.max(1) as f64);
    }
    let per_vertex: Vec<f64> = sizes.iter().zip(&means).map(|(&n, &m)| m / n as f64).collect();
    let shown: Vec<String> = sizes.iter().zip(&means).map(|(n, m)| format!("|V|={n}: {m:.0}")).collect();
    for w in means.windows(2) {
        if w[1] / w[0] > 2.3 {
            return Err(format!("doubling grew touched nodes {:.2}x ({})", w[1] / w[0], shown.join(", ")));
        }
    }
    let lo = per_vertex.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = per_vertex.iter().copied().fold(0.0, f64::max);
    if hi / lo > 2.0 {
        return Err(format!("touched/|V| spans {:.2}x ({})", hi / lo, shown.join(", ")));
    }
    Ok(format!("touched/|V| within {:.2}x ({})", hi / lo, shown.join(", ")))
}

/// Dynamic move time against a full static re-solve.
fn speed_trend() -> Outcome {
    let sizes = [500usize, 1000, 2000, 4000];
    let mut ratios = Vec::new();
    let mut shown = Vec::new();
    for &nv in &sizes {
        let (mut dyn_total, mut dyn_count) = (Duration::ZERO, 0u32);
        let mut static_total = Duration::ZERO;
        for seed in 0..5u64 {
            let inst = gaussian_mixture(nv / 2, nv / 2, 2, 2, 1000 + seed);
            let mut warm = StaticSolver::new(&inst).map_err(|e| e.to_string())?;
            warm.solve().map_err(|e| e.to_string())?;
            let mut gen = StreamGen::new(&inst, EventMix::MOVES, 0.5, seed);
            let mut solver = Solver::with_basis(inst, warm.into_basis(), solver_config(IndexMode::Vertices, seed))
                .map_err(|e| e.to_string())?;
            for k in 0..11 {
                let ev = gen.next_event();
                let t = Instant::now();
                solver.apply(&ev).map_err(|e| e.to_string())?;
                let dt = t.elapsed();
                // first event is warm-up
                if k > 0 {
                    dyn_total += dt;
                    dyn_count += 1;
                }
            }
            let moved = solver.live_instance();
            let want = solver.query_cost();
            drop(solver);
            let t = Instant::now();
            let mut fresh = StaticSolver::new(&moved).map_err(|e| e.to_string())?;
            let cost = fresh.solve().map_err(|e| e.to_string())?;
            static_total += t.elapsed();
            if !rel_close(cost, want, 1e-6) {
                return Err(format!("|V|={nv} seed {seed}: dynamic cost {want} vs static {cost}"));
            }
        }
        let dyn_mean = dyn_total.as_secs_f64() / dyn_count as f64;
        let static_mean = static_total.as_secs_f64() / 5.0;
        let ratio = dyn_mean / static_mean;
        shown.push(format!("|V|={nv}: {:.2}ms/{:.0}ms={ratio:.4}", dyn_mean * 1e3, static_mean * 1e3));
        ratios.push(ratio);
    }
    let decreasing = ratios.windows(2).all(|w| w[1] < w[0]);
    let last = *ratios.last().unwrap();
    if !decreasing || last >= 0.1 {
        return Err(format!("ratios not decreasing below 0.1 ({})", shown.join(", ")));
    }
    Ok(shown.join(", "))
}

/// New rows and columns after fresh insertions are dual feasible.
fn insert_feasibility() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x1a5e);
    let noise = Normal::new(0.0, 0.3).unwrap();
    let mut states = 0;
    let mut worst = f64::INFINITY;
    let mut instance = 0u64;
    while states < 1000 {
        let (na, nb) = (rng.random_range(2..=15), rng.random_range(2..=15));
        let inst = random_instance(&mut rng, na, nb, 2);
        let mode = if instance.is_multiple_of(2) { IndexMode::Full } else { IndexMode::Vertices };
        let mut solver = Solver::new(inst, solver_config(mode, instance)).map_err(|e| e.to_string())?;
        instance += 1;
        for _ in 0..25 {
            // scramble the state a little between insertions
            let live = solver.live_ids();
            let v = *live.choose(&mut rng).unwrap();
            let coords: Vec<f64> = solver.instance().coords(v).iter().map(|c| c + noise.sample(&mut rng)).collect();
            solver.move_point(v, coords).map_err(|e| e.to_string())?;
            let side = if rng.random::<bool>() { Side::Supply } else { Side::Demand };
            let coords = vec![rng.random::<f64>() * 1.5, rng.random::<f64>() * 1.5];
            let weight = if rng.random::<bool>() { 0.0 } else { 0.02 };
            let n_before = solver.instance().len();
            let r = solver.insert_point(side, coords, weight).map_err(|e| e.to_string())?;
            let id = r.inserted.unwrap();
            if id.idx() != n_before {
                return Err(format!("insert reused node {id:?} instead of a fresh one"));
            }
            let m = solver.line_min(id).map_err(|e| e.to_string())?;
            worst = worst.min(m);
            if m < -EPS_DUAL {
                return Err(format!("state {states}: new cell at {m:e}"));
            }
            states += 1;
        }
    }
    Ok(format!("{states} fresh inserts, smallest new adjusted cost {worst:.3e}"))
}

fn main() {
    let wanted: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let run = |k: usize| wanted.is_empty() || wanted.contains(&k);
    let mut results: Vec<(usize, &str, Outcome, Duration)> = Vec::new();
    if run(1) || run(7) {
        let t = Instant::now();
        let (c1, c7) = fuzz_streams();
        let dt = t.elapsed();
        if run(1) {
            results.push((1, "oracle-equivalence fuzz", c1, dt));
        }
        if run(7) {
            results.push((7, "euler-tour law", c7, dt));
        }
    }
    let rest: [Check; 5] = [
        (2, "structure differential", structure_differential),
        (3, "space law", space_law),
        (4, "pivot-cost linearity", pivot_linearity),
        (5, "dynamic-vs-static trend", speed_trend),
        (6, "insert dual feasibility", insert_feasibility),
    ];
    for (k, name, f) in rest {
        if run(k) {
            let t = Instant::now();
            let r = f();
            results.push((k, name, r, t.elapsed()));
        }
    }
    results.sort_by_key(|r| r.0);
    let mut failed = 0;
    for (k, name, r, dt) in &results {
        match r {
            Ok(msg) => println!("criterion {k} {name}: PASS ({msg}; {:.1}s)", dt.as_secs_f64()),
            Err(msg) => {
                failed += 1;
                println!("criterion {k} {name}: FAIL ({msg}; {:.1}s)", dt.as_secs_f64());
            }
        }
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", results.len());
        std::process::exit(1);
    }
}
