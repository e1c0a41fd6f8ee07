//! Acceptance suite. Runs every primary criterion against its own oracle and
//! prints one PASS/FAIL line per criterion; exits nonzero if any fails.
//!
//! Run with `cargo test -p voxgram-cli --test acceptance`.

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use tower::ServiceExt;
use voxgram::cost::{cost_from_parts, entropy, entropy_of_counts};
use voxgram::enclosure;
use voxgram::grammar::induce;
use voxgram::inference::{hill_climb, hill_climb_traced, StepKind};
use voxgram::metrics::{run_grid, Grid, GridRow};
use voxgram::production::{generate, reconstruct, HistoryStep, PlacedShape};
use voxgram::shape::{is_connected, shapes_match};
use voxgram::{
    corpus, Axis, Block, GridPos, GridTransform, InferenceParams, Production, SearchOps, Shape, ShapeGrammar,
    ShapeId, ShapeSet, ShapeSpec, VoxelModel,
};
use voxgram_cli::{api, schemas};

type Outcome = Result<String, String>;
type Criterion = (u32, &'static str, Duration, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let holds: bool = $cond;
        if !holds {
            return Err(format!($($msg)+));
        }
    };
}

fn main() {
    let criteria: Vec<Criterion> = vec![
        (1, "entropy and cost", Duration::from_secs(1), entropy_and_cost),
        (2, "shape matching", Duration::from_secs(10), matching),
        (3, "hill climbing", Duration::from_secs(30), hill_climbing),
        (4, "grammar reconstruction", Duration::from_secs(10), reconstruction),
        (5, "shared-rule generalization", Duration::from_secs(10), shared_rules),
        (6, "generation determinism and safety", Duration::from_secs(60), generation),
        (7, "enclosure", Duration::from_secs(10), enclosure_suite),
        (8, "trend reproduction", Duration::from_secs(300), trends),
        (9, "CLI and API contract", Duration::from_secs(120), contract),
    ];
    let mut failed = 0;
    for (n, name, limit, f) in criteria {
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let took = started.elapsed();
        let outcome = match outcome {
            Ok(detail) if took > limit => Err(format!("{detail}; took {took:.2?}, limit {limit:?}")),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("criterion {n} PASS {name} ({took:.2?}): {detail}"),
            Err(why) => {
                failed += 1;
                println!("criterion {n} FAIL {name} ({took:.2?}): {why}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

// Oracles shared by several criteria.

fn rotz(p: GridPos, k: u8) -> GridPos {
    let (mut x, mut y) = (p.x, p.y);
    for _ in 0..k % 4 {
        (x, y) = (-y, x);
    }
    GridPos::new(x, y, p.z)
}

fn typed(blocks: impl IntoIterator<Item = Block>) -> BTreeSet<(GridPos, String)> {
    blocks.into_iter().map(|b| (b.pos, b.ty.as_str().to_string())).collect()
}

fn image(t: &GridTransform, s: &Shape) -> BTreeSet<(GridPos, String)> {
    typed(s.blocks().map(|b| Block::new(b.ty.as_str(), t.apply(b.pos))))
}

/// Shapes match iff some z-rotation followed by aligning minimum corners
/// maps one typed block set onto the other.
fn oracle_match(a: &[Block], b: &[Block]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let target = typed(b.iter().cloned());
    let lo = |ps: &mut dyn Iterator<Item = GridPos>| ps.fold(GridPos::new(i32::MAX, i32::MAX, i32::MAX), |m, p| m.component_min(p));
    let lb = lo(&mut b.iter().map(|x| x.pos));
    (0..4).any(|k| {
        let rotated: Vec<Block> = a.iter().map(|x| Block::new(x.ty.as_str(), rotz(x.pos, k))).collect();
        let la = lo(&mut rotated.iter().map(|x| x.pos));
        typed(rotated.iter().map(|x| Block::new(x.ty.as_str(), x.pos - la + lb))) == target
    })
}

fn oracle_entropy(blocks: &[Block]) -> f64 {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for b in blocks {
        *counts.entry(b.ty.as_str()).or_default() += 1;
    }
    let n = blocks.len() as f64;
    counts
        .values()
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

fn random_blocks(rng: &mut ChaCha8Rng, max: usize, types: &[&str]) -> Vec<Block> {
    let n = rng.random_range(1..=max);
    let mut cells = vec![GridPos::ORIGIN];
    while cells.len() < n {
        let base = cells[rng.random_range(0..cells.len())];
        let next = voxgram::voxel::neighbors6(base)[rng.random_range(0..6)];
        if !cells.contains(&next) {
            cells.push(next);
        }
    }
    cells
        .into_iter()
        .map(|p| Block::new(types[rng.random_range(0..types.len())], p))
        .collect()
}

fn random_transform(rng: &mut ChaCha8Rng) -> GridTransform {
    let d = GridPos::new(rng.random_range(-50..=50), rng.random_range(-50..=50), rng.random_range(-50..=50));
    GridTransform::new(rng.random_range(0..4), d)
}

fn shape(blocks: Vec<Block>) -> Shape {
    Shape::new(ShapeId(0), ShapeSpec::Free3D, blocks).expect("generated shapes are connected")
}

fn default_grammar(m: &VoxelModel) -> ShapeGrammar {
    let set = hill_climb(m, &InferenceParams::new(ShapeSpec::Rectangular, 1.0, SearchOps::Both)).unwrap();
    induce(&[set]).unwrap()
}

// 1

fn entropy_and_cost() -> Outcome {
    let ab = |counts: &[(&str, usize)]| -> Shape {
        let mut blocks = vec![];
        for (t, c) in counts {
            for _ in 0..*c {
                blocks.push(Block::new(*t, GridPos::new(blocks.len() as i32, 0, 0)));
            }
        }
        shape(blocks)
    };
    for (s, want) in [
        (ab(&[("a", 5)]), 0.0),
        (ab(&[("a", 2), ("b", 2)]), 1.0),
        (ab(&[("a", 4), ("b", 2), ("c", 2)]), 1.5),
    ] {
        ensure!((entropy(&s) - want).abs() <= 1e-12, "entropy {} != {want}", entropy(&s));
    }
    ensure!((entropy_of_counts([4, 2, 2]) - 1.5).abs() <= 1e-12, "entropy_of_counts");
    ensure!((cost_from_parts(2, 1.5, 1.0) - 4.5).abs() <= 1e-12, "cost alpha=1");
    ensure!((cost_from_parts(2, 1.5, 0.0) - 1.5).abs() <= 1e-12, "cost alpha=0");
    ensure!(cost_from_parts(7, 0.0, 3.0) == 0.0, "zero entropy sum");

    // composition on real shape sets against an independent evaluation
    let mut checked = 0;
    for m in corpus::all() {
        for alpha in [0.0, 0.5, 1.0, 2.0, 5.0] {
            let set = voxgram::inference::initialize(
                &m,
                &InferenceParams::new(ShapeSpec::Rectangular, alpha, SearchOps::SplitOnly),
            )
            .unwrap();
            let sum: f64 = set.shapes().iter().map(|s| oracle_entropy(&s.blocks().collect::<Vec<_>>())).sum();
            let want = (1.0 + set.len() as f64).powf(alpha) * sum;
            ensure!(close(set.cost(alpha), want, 1e-12), "{} alpha {alpha}: {} vs {want}", m.name(), set.cost(alpha));
            checked += 1;
        }
    }
    Ok(format!("closed forms exact to 1e-12, {checked} set costs match"))
}

// 2

fn matching() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let types = ["stone", "glass", "wood"];
    for k in 0..1000 {
        let s = shape(random_blocks(&mut rng, 12, &types));
        let t = random_transform(&mut rng);
        let moved = s.transformed(&t);
        let Some(m) = shapes_match(&s, &moved) else {
            return Err(format!("pair {k}: transformed copy not matched"));
        };
        ensure!(image(&m, &s) == typed(moved.blocks()), "pair {k}: returned transform misplaces blocks");
    }
    let mut mutated = 0;
    let mut tilted = 0;
    while mutated + tilted < 1000 {
        let blocks = random_blocks(&mut rng, 12, &types);
        let other: Vec<Block> = if rng.random_bool(0.5) {
            let k = rng.random_range(0..blocks.len());
            let mut b = blocks.clone();
            b[k] = Block::new("mutant", b[k].pos);
            b
        } else {
            // a quarter turn about the x axis
            blocks.iter().map(|b| Block::new(b.ty.as_str(), GridPos::new(b.pos.x, -b.pos.z, b.pos.y))).collect()
        };
        if oracle_match(&blocks, &other) {
            continue;
        }
        if other.iter().any(|b| b.ty.as_str() == "mutant") {
            mutated += 1;
        } else {
            tilted += 1;
        }
        let t = random_transform(&mut rng);
        let b = shape(other).transformed(&t);
        let a = shape(blocks);
        ensure!(shapes_match(&a, &b).is_none(), "non-matching pair matched");
        ensure!(shapes_match(&b, &a).is_none(), "non-matching pair matched in reverse");
    }
    for k in 0..1000 {
        let a = shape(random_blocks(&mut rng, 8, &types));
        let b = a.transformed(&random_transform(&mut rng));
        let c = b.transformed(&random_transform(&mut rng));
        let u = shape(random_blocks(&mut rng, 8, &types));
        ensure!(shapes_match(&a, &a).is_some(), "triple {k}: not reflexive");
        ensure!(shapes_match(&b, &a).is_some() && shapes_match(&c, &b).is_some(), "triple {k}: not symmetric");
        ensure!(shapes_match(&a, &c).is_some(), "triple {k}: not transitive");
        for (x, y) in [(&a, &u), (&u, &a), (&c, &u)] {
            let want = oracle_match(&x.blocks().collect::<Vec<_>>(), &y.blocks().collect::<Vec<_>>());
            ensure!(shapes_match(x, y).is_some() == want, "triple {k}: disagrees with oracle on an unrelated shape");
        }
    }
    Ok(format!("1000 matching pairs, 1000 non-matching ({mutated} mutated, {tilted} tilted), 1000 triples"))
}

// 3

/// Every partition of `cells` into axis-aligned rectangles lying in one
/// plane. The first free cell in sorted order must be the minimum corner of
/// whichever rectangle covers it.
fn rectangle_partitions(cells: &BTreeSet<GridPos>, visit: &mut dyn FnMut(&[Vec<GridPos>])) {
    fn go(free: &mut BTreeSet<GridPos>, acc: &mut Vec<Vec<GridPos>>, visit: &mut dyn FnMut(&[Vec<GridPos>])) {
        let Some(&first) = free.iter().next() else {
            visit(acc);
            return;
        };
        for dz in 0..6 {
            for dy in 0..6 {
                for dx in 0..6 {
                    if dx > 0 && dy > 0 && dz > 0 {
                        continue;
                    }
                    let mut rect = vec![];
                    for z in 0..=dz {
                        for y in 0..=dy {
                            for x in 0..=dx {
                                rect.push(GridPos::new(first.x + x, first.y + y, first.z + z));
                            }
                        }
                    }
                    if rect.iter().all(|p| free.contains(p)) {
                        for p in &rect {
                            free.remove(p);
                        }
                        acc.push(rect);
                        go(free, acc, visit);
                        let rect = acc.pop().unwrap();
                        free.extend(rect);
                    }
                }
            }
        }
    }
    go(&mut cells.clone(), &mut vec![], visit);
}

fn exhaustive_optimum(m: &VoxelModel, alpha: f64) -> (f64, usize) {
    let cells: BTreeSet<GridPos> = m.cells().keys().copied().collect();
    let mut best = f64::INFINITY;
    let mut seen = 0;
    rectangle_partitions(&cells, &mut |parts| {
        seen += 1;
        let sum: f64 = parts
            .iter()
            .map(|part| oracle_entropy(&part.iter().map(|p| Block::new(m.get(*p).unwrap().as_str(), *p)).collect::<Vec<_>>()))
            .sum();
        best = best.min((1.0 + parts.len() as f64).powf(alpha) * sum);
    });
    (best, seen)
}

fn hill_climbing() -> Outcome {
    let mut runs = 0;
    for m in corpus::all() {
        for spec in ShapeSpec::ALL {
            for ops in SearchOps::ALL {
                for alpha in [0.0, 1.0, 5.0] {
                    for plateau in [false, true] {
                        let params = InferenceParams::new(spec, alpha, ops).with_plateau_merges(plateau);
                        let (set, trace) = hill_climb_traced(&m, &params).unwrap();
                        let ctx = format!("{} {spec} {ops} alpha {alpha} plateau {plateau}", m.name());
                        ensure!(set.violations().is_empty(), "{ctx}: invalid result");
                        let (mut cost, mut n) = (trace.initial_log_cost, trace.initial_shapes);
                        let (mut merges, mut splits) = (0, 0);
                        for step in &trace.steps {
                            match step.kind {
                                StepKind::Merge { .. } => merges += 1,
                                StepKind::Split { .. } => splits += 1,
                            }
                            if plateau && step.log_cost == cost {
                                ensure!(step.shapes < n, "{ctx}: plateau step without fewer shapes");
                            } else {
                                ensure!(step.log_cost < cost, "{ctx}: step did not decrease the cost");
                            }
                            (cost, n) = (step.log_cost, step.shapes);
                        }
                        ensure!(merges < trace.initial_shapes + splits, "{ctx}: more merges than the bound");
                        if ops == SearchOps::MergeOnly {
                            ensure!(trace.steps.len() < trace.initial_shapes, "{ctx}: merge bound exceeded");
                        }
                        runs += 1;
                    }
                }
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut instances = 0;
    let mut partitions = 0;
    while instances < 600 {
        let n = rng.random_range(1..=8);
        let mut blocks = BTreeMap::new();
        while blocks.len() < n {
            let p = GridPos::new(rng.random_range(0..3), rng.random_range(0..3), rng.random_range(0..2));
            blocks.insert(p, Block::new(["brick", "glass"][rng.random_range(0..2)], p));
        }
        let m = VoxelModel::from_blocks("tiny", blocks.into_values().collect::<Vec<_>>()).unwrap();
        for alpha in [0.0, 0.5, 1.0, 2.0] {
            let (best, seen) = exhaustive_optimum(&m, alpha);
            partitions += seen;
            let got = hill_climb(&m, &InferenceParams::new(ShapeSpec::Rectangular, alpha, SearchOps::MergeOnly))
                .unwrap()
                .cost(alpha);
            ensure!(close(got, best, 1e-12), "instance {instances} alpha {alpha}: {got} vs optimum {best}");
        }
        instances += 1;
    }
    let facade = corpus::small_facade();
    let (best, seen) = exhaustive_optimum(&facade, 1.0);
    let got = hill_climb(&facade, &InferenceParams::new(ShapeSpec::Rectangular, 1.0, SearchOps::MergeOnly))
        .unwrap()
        .cost(1.0);
    ensure!(close(got, best, 1e-12), "small facade: {got} vs optimum {best}");
    Ok(format!(
        "{runs} traced corpus runs monotone; {instances} tiny instances x 4 alphas and the 5x3 facade ({seen} covers) at the exhaustive optimum ({partitions} partitions scored)"
    ))
}

// 4

fn reconstruction() -> Outcome {
    let mut checked = 0;
    for m in corpus::all() {
        let cells: HashSet<GridPos> = m.cells().keys().copied().collect();
        if !is_connected(&cells) {
            continue;
        }
        for spec in ShapeSpec::ALL {
            for overlap in [false, true] {
                let params = InferenceParams::new(spec, 1.0, SearchOps::Both).with_overlap(overlap);
                let g = induce(&[hill_climb(&m, &params).unwrap()]).unwrap();
                let last = ShapeId(g.shapes().len() as u32 - 1);
                for start in [g.initial(), last] {
                    let p = reconstruct(&g, start).unwrap();
                    let got = typed(p.occupancy().iter().map(|(pos, t)| Block::new(t.as_str(), *pos)));
                    ensure!(
                        got == typed(m.blocks()),
                        "{} {spec} overlap {overlap} from {start:?}: {} of {} blocks",
                        m.name(),
                        got.len(),
                        m.len()
                    );
                    checked += 1;
                }
            }
        }
    }
    Ok(format!("{checked} derivations reproduce their examples exactly"))
}

// 5

fn shared_rules() -> Outcome {
    let m = corpus::two_window_facade();
    let g = default_grammar(&m);
    let has = |id: ShapeId, ty: &str| g.shape(id).unwrap().blocks().all(|b| b.ty.as_str() == ty);
    let planter = g
        .shapes()
        .iter()
        .find(|s| s.blocks().any(|b| b.ty.as_str() == "leaves"))
        .ok_or("no planter shape")?
        .id();
    let (k, rule) = g
        .rules()
        .iter()
        .enumerate()
        .find(|(_, r)| r.rhs == planter && has(r.lhs_anchor, "glass"))
        .ok_or("no rule from a window to the planter")?;
    let a = g.shape(rule.lhs_anchor).unwrap();
    let class = g.class(rule.lhs_class).unwrap();
    let b = class
        .members
        .iter()
        .map(|id| g.shape(*id).unwrap())
        .find(|s| s.id() != a.id() && !s.positions().any(|p| g.shape(planter).unwrap().positions().any(|q| p.manhattan(q) == 1)))
        .ok_or("window B is not in window A's class")?;

    let pose_a = g.label(a.id()).unwrap().pose;
    let pose_b = g.label(b.id()).unwrap().pose;
    let planter_blocks: Vec<Block> = g.shape(planter).unwrap().blocks().collect();
    let a0 = a.bounding_box().0;

    let mut poses = 0;
    for turn in 0..4u8 {
        let placed = GridTransform::rotation(turn).compose(&pose_b);
        let app = g
            .applicable_rules(rule.lhs_class, &placed)
            .unwrap()
            .into_iter()
            .find(|x| x.rule == k)
            .ok_or("rule not applicable at window B")?;
        // the carry must map window A onto the placed window B
        let window_b: BTreeSet<_> = b.blocks().map(|x| (rotz(x.pos, turn), x.ty.as_str().to_string())).collect();
        ensure!(image(&app.carry, a) == window_b, "turn {turn}: carry does not map window A onto window B");
        let carry_rot = (pose_b.rot() + 4 - pose_a.rot() + turn) % 4;
        ensure!(app.carry.rot() == carry_rot, "turn {turn}: carry rotation {} != {carry_rot}", app.carry.rot());
        // relative displacements from the window's reference corner rotate with the window
        let b0 = app.carry.apply(a0);
        let want: BTreeSet<_> = planter_blocks
            .iter()
            .map(|x| (b0 + rotz(x.pos - a0, carry_rot), x.ty.as_str().to_string()))
            .collect();
        let got = typed(g.realize(planter, &app.rhs_pose).unwrap());
        ensure!(got == want, "turn {turn}: planter at {got:?}, expected {want:?}");
        if turn == 0 {
            let p = Production::start(&g, Some(b.id()), 0).unwrap();
            ensure!(
                p.step_choices(&g).iter().any(|c| c.rule == k && typed(c.blocks.clone()) == want),
                "the rule is not offered at window B"
            );
        }
        poses += 1;
    }
    Ok(format!(
        "rule {k} (window {:?} -> planter {:?}) lands correctly at window {:?} under {poses} rotations",
        a.id(),
        planter,
        b.id()
    ))
}

// 6

/// Occupancy is the union of the placed shapes, every placed shape is its
/// class form at its pose, and no two shapes disagree on a cell.
fn oracle_consistent(g: &ShapeGrammar, p: &Production) -> Result<(), String> {
    let mut union: BTreeMap<GridPos, String> = BTreeMap::new();
    for s in p.placed() {
        ensure!(typed(g.realize(s.shape, &s.pose).unwrap()) == typed(s.blocks.clone()), "placed blocks off pose");
        for b in &s.blocks {
            if let Some(t) = union.insert(b.pos, b.ty.as_str().to_string()) {
                ensure!(t == b.ty.as_str(), "cell {:?} holds two types", b.pos);
            }
        }
    }
    let occ: BTreeMap<GridPos, String> = p.occupancy().iter().map(|(k, v)| (*k, v.as_str().to_string())).collect();
    ensure!(occ == union, "occupancy differs from the union of placed shapes");
    Ok(())
}

fn generation() -> Outcome {
    let mut steps_checked = 0;
    for m in [corpus::hollow_box_house(), corpus::two_window_facade()] {
        let g = default_grammar(&m);
        let runs: Vec<String> = (0..3).map(|_| generate(&g, 42, 50, Default::default()).unwrap().to_json()).collect();
        ensure!(runs[0] == runs[1] && runs[1] == runs[2], "{}: runs differ", m.name());
        for seed in 0..100u64 {
            let done = generate(&g, seed, 50, Default::default()).unwrap();
            let mut p = Production::start(&g, None, seed).unwrap();
            oracle_consistent(&g, &p)?;
            for step in done.history() {
                let HistoryStep::Rule { target, rule, .. } = step else {
                    return Err("generation recorded a non-rule step".into());
                };
                let k = p
                    .step_choices(&g)
                    .iter()
                    .position(|c| c.target == *target && c.rule == *rule)
                    .ok_or_else(|| format!("seed {seed}: recorded choice not offered"))?;
                let before = p.occupancy().clone();
                p.apply(&g, k).map_err(|e| format!("seed {seed}: {e}"))?;
                oracle_consistent(&g, &p).map_err(|e| format!("{} seed {seed}: {e}", m.name()))?;
                ensure!(before.keys().all(|c| p.occupancy().contains_key(c)), "occupancy shrank");
                steps_checked += 1;
            }
            ensure!(p == done, "{} seed {seed}: stepwise replay differs", m.name());
        }
    }

    // and through the binary
    let dir = tempfile::tempdir().unwrap();
    let gpath = dir.path().join("g.json");
    std::fs::write(&gpath, default_grammar(&corpus::hollow_box_house()).to_json()).unwrap();
    let outs: Vec<Vec<u8>> = (0..3)
        .map(|_| voxgram(&["generate", gpath.to_str().unwrap(), "--seed", "42"]).stdout)
        .collect();
    ensure!(outs[0] == outs[1] && outs[1] == outs[2], "CLI output differs between runs");
    Ok(format!("3 identical runs per grammar and CLI; {steps_checked} steps over 2 x 100 seeds consistent"))
}

// 7

fn panel(ty: &str, lo: (i32, i32, i32), hi: (i32, i32, i32)) -> Vec<Block> {
    let mut out = vec![];
    for z in lo.2..=hi.2 {
        for y in lo.1..=hi.1 {
            for x in lo.0..=hi.0 {
                out.push(Block::new(ty, GridPos::new(x, y, z)));
            }
        }
    }
    out
}

fn derive_panels(panels: Vec<Vec<Block>>) -> Production {
    let m = VoxelModel::from_blocks("fixture", panels.iter().flatten().cloned().collect::<Vec<_>>()).unwrap();
    let shapes = panels
        .into_iter()
        .enumerate()
        .map(|(k, bs)| Shape::new(ShapeId(k as u32), ShapeSpec::Rectangular, bs).unwrap())
        .collect();
    let set = ShapeSet::new(m, ShapeSpec::Rectangular, false, shapes).unwrap();
    reconstruct(&induce(&[set]).unwrap(), ShapeId(0)).unwrap()
}

fn closed_box() -> Vec<Vec<Block>> {
    vec![
        panel("floor", (0, 0, 0), (4, 4, 0)),
        panel("roof", (0, 0, 4), (4, 4, 4)),
        panel("south", (0, 0, 1), (4, 0, 3)),
        panel("north", (0, 4, 1), (4, 4, 3)),
        panel("west", (0, 1, 1), (0, 3, 3)),
        panel("east", (4, 1, 1), (4, 3, 3)),
    ]
}

fn shift(p: GridPos, axis: Axis, d: i32) -> GridPos {
    match axis {
        Axis::X => GridPos::new(p.x + d, p.y, p.z),
        Axis::Y => GridPos::new(p.x, p.y + d, p.z),
        Axis::Z => GridPos::new(p.x, p.y, p.z + d),
    }
}

/// One removal round: flood a dense grid from its corner and collect the
/// shapes with a reachable cell on both sides.
fn oracle_round(placed: &[PlacedShape], alive: &[usize]) -> Vec<usize> {
    let occupied: HashSet<GridPos> = alive.iter().flat_map(|&k| placed[k].blocks.iter().map(|b| b.pos)).collect();
    if occupied.is_empty() {
        return vec![];
    }
    let lo = occupied.iter().fold(GridPos::new(i32::MAX, i32::MAX, i32::MAX), |a, b| a.component_min(*b));
    let hi = occupied.iter().fold(GridPos::new(i32::MIN, i32::MIN, i32::MIN), |a, b| a.component_max(*b));
    let (lo, hi) = (lo - GridPos::new(1, 1, 1), hi + GridPos::new(1, 1, 1));
    let (nx, ny, nz) = (hi.x - lo.x + 1, hi.y - lo.y + 1, hi.z - lo.z + 1);
    let inside = |q: GridPos| (lo.x..=hi.x).contains(&q.x) && (lo.y..=hi.y).contains(&q.y) && (lo.z..=hi.z).contains(&q.z);
    let idx = |q: GridPos| (((q.z - lo.z) * ny + (q.y - lo.y)) * nx + (q.x - lo.x)) as usize;
    let mut seen = vec![false; (nx * ny * nz) as usize];
    let mut queue = VecDeque::from([lo]);
    seen[0] = true;
    while let Some(c) = queue.pop_front() {
        for axis in [Axis::X, Axis::Y, Axis::Z] {
            for d in [-1, 1] {
                let q = shift(c, axis, d);
                if inside(q) && !occupied.contains(&q) && !seen[idx(q)] {
                    seen[idx(q)] = true;
                    queue.push_back(q);
                }
            }
        }
    }
    let reach = |axis: Axis, d: i32, s: &PlacedShape| {
        s.blocks.iter().map(|b| shift(b.pos, axis, d)).any(|q| !inside(q) || seen[idx(q)])
    };
    alive
        .iter()
        .copied()
        .filter(|&k| {
            let s = &placed[k];
            let axis = s.plane.expect("planar fixtures");
            reach(axis, 1, s) && reach(axis, -1, s)
        })
        .collect()
}

fn oracle_rounds(p: &Production) -> Vec<Vec<usize>> {
    let mut alive: Vec<usize> = (0..p.placed().len()).collect();
    let mut rounds = vec![];
    loop {
        let gone = oracle_round(p.placed(), &alive);
        if gone.is_empty() {
            return rounds;
        }
        alive.retain(|k| !gone.contains(k));
        rounds.push(gone);
    }
}

fn enclosure_suite() -> Outcome {
    let closed = derive_panels(closed_box());
    let (after, report) = enclosure::enforce(&closed).unwrap();
    ensure!(report.removed() == 0 && after == closed, "closed box changed");
    ensure!(oracle_rounds(&closed).is_empty(), "oracle removes from the closed box");

    let free = derive_panels(vec![panel("wall", (0, 0, 0), (3, 0, 3))]);
    let (after, report) = enclosure::enforce(&free).unwrap();
    ensure!(after.is_empty() && after.occupancy().is_empty(), "free panel kept");
    ensure!(report.rounds == oracle_rounds(&free), "free panel rounds differ from oracle");

    // box missing its east wall, with a rug on the floor; the rug's underside
    // is covered by the floor until the floor itself goes
    let mut open = closed_box();
    open.remove(5);
    open.push(panel("rug", (1, 1, 1), (2, 2, 1)));
    let open = derive_panels(open);
    let report = enclosure::plan(&open).unwrap();
    let oracle = oracle_rounds(&open);
    ensure!(report.rounds == oracle, "rounds {:?} vs oracle {oracle:?}", report.rounds);
    ensure!(report.rounds.len() >= 2, "only {} rounds", report.rounds.len());
    let (after, _) = enclosure::enforce(&open).unwrap();
    ensure!(after.is_empty(), "open box not emptied");

    // generated productions: each round agrees with the oracle, and the result is a fixpoint
    let mut generated = 0;
    for m in [corpus::hollow_box_house(), corpus::row_houses(), corpus::flat_facade()] {
        let g = default_grammar(&m);
        for seed in 0..20 {
            let p = generate(&g, seed, 40, Default::default()).unwrap();
            let report = enclosure::plan(&p).unwrap();
            ensure!(report.rounds == oracle_rounds(&p), "{} seed {seed}: rounds differ from oracle", m.name());
            let (q, _) = enclosure::enforce(&p).unwrap();
            let (again, r2) = enclosure::enforce(&q).unwrap();
            ensure!(r2.removed() == 0 && again == q, "{} seed {seed}: not a fixpoint", m.name());
            ensure!(q.placed().iter().all(|s| p.placed().contains(s)), "removal not monotone");
            generated += 1;
        }
    }
    Ok(format!(
        "closed box kept, free panel removed, open box emptied in {} rounds; {generated} generated productions match the oracle",
        oracle.len()
    ))
}

// 8

fn trends() -> Outcome {
    let models = corpus::all();
    let grid = Grid { timing: false, ..Grid::default() };
    let report = run_grid(&models, &grid).unwrap();

    let alphas = [0.0, 0.5, 1.0, 2.0, 5.0];
    let size: Vec<f64> = alphas.iter().map(|&a| report.pooled_mean(|r| r.alpha == a, |r| r.mean_size)).collect();
    let pct: Vec<f64> = alphas.iter().map(|&a| report.pooled_mean(|r| r.alpha == a, |r| r.pct_matching)).collect();
    ensure!(size.windows(2).all(|w| w[0] <= w[1]), "mean size not non-decreasing in alpha: {size:?}");
    ensure!(pct.windows(2).all(|w| w[0] >= w[1]), "%M not non-increasing in alpha: {pct:?}");

    let count = |spec: ShapeSpec| report.pooled_mean(move |r: &GridRow| r.spec == spec, |r| r.num_shapes);
    let (free, planar, rect) = (count(ShapeSpec::Free3D), count(ShapeSpec::Planar2D), count(ShapeSpec::Rectangular));
    ensure!(free <= planar && planar <= rect, "#S ordering violated: 3d {free}, 2d {planar}, rect {rect}");

    let mut compared = 0;
    for (r5, s5) in report.rows.iter().zip(&report.sets).filter(|(r, _)| r.alpha == 5.0) {
        let (_, s100) = report
            .rows
            .iter()
            .zip(&report.sets)
            .find(|(r, _)| {
                r.alpha == 100.0 && r.model == r5.model && r.spec == r5.spec && r.ops == r5.ops && r.overlap == r5.overlap
            })
            .ok_or("missing alpha 100 row")?;
        ensure!(
            s5.to_json() == s100.to_json(),
            "{} {} {} overlap {}: alpha 5 and 100 differ",
            r5.model,
            r5.spec,
            r5.ops,
            r5.overlap
        );
        compared += 1;
    }
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.1}")).collect::<Vec<_>>().join(" ");
    Ok(format!(
        "size [{}], %M [{}], #S 3d {free:.1} <= 2d {planar:.1} <= rect {rect:.1}, {compared} alpha 5/100 pairs identical",
        fmt(&size),
        fmt(&pct)
    ))
}

// 9

fn voxgram(args: &[&str]) -> std::process::Output {
    let out = Command::new(env!("CARGO_BIN_EXE_voxgram")).args(args).output().expect("binary runs");
    assert!(out.status.success(), "voxgram {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn validate(schema: &str, doc: &Value) -> Result<(), String> {
    let schema: Value = serde_json::from_str(schemas::by_name(schema).unwrap()).unwrap();
    let v = jsonschema::validator_for(&schema).map_err(|e| e.to_string())?;
    let errors: Vec<String> = v.iter_errors(doc).map(|e| format!("{} at {}", e, e.instance_path)).collect();
    ensure!(errors.is_empty(), "schema violations: {errors:?}");
    Ok(())
}

fn read_json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

async fn call(app: &axum::Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map(|b| Body::from(b.to_string())).unwrap_or_else(Body::empty))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

fn contract() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let d = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    voxgram(&["corpus", "-o", &d("corpus")]);
    let house = d("corpus/hollow_box_house.json");
    voxgram(&["infer", &house, "-o", &d("set.json")]);
    voxgram(&["induce", &d("set.json"), "-o", &d("grammar.json")]);
    let out = voxgram(&[
        "generate",
        &d("grammar.json"),
        "--seed",
        "1",
        "--max-steps",
        "500",
        "--enclosure",
        "-o",
        &d("model.json"),
        "--production",
        &d("production.json"),
    ]);
    let stderr = String::from_utf8_lossy(&out.stderr);
    ensure!(stderr.contains("enclosure removed"), "no removal report: {stderr}");

    let model = VoxelModel::from_json(&std::fs::read(d("model.json")).unwrap()).unwrap();
    ensure!(!model.is_empty(), "enclosed model is empty");
    let g = ShapeGrammar::from_json(&std::fs::read(d("grammar.json")).unwrap()).unwrap();
    let p = Production::from_json(&g, &std::fs::read(d("production.json")).unwrap()).unwrap();
    ensure!(p.to_model("x").cells() == model.cells(), "model and production disagree");
    let sides = enclosure::reachable_sides(&p).unwrap();
    ensure!(sides.iter().all(|&(a, b)| !(a && b)), "a surviving shape has both sides reachable");

    let mut validated = 0;
    for entry in std::fs::read_dir(d("corpus")).unwrap() {
        validate("voxel", &read_json(&entry.unwrap().path()))?;
        validated += 1;
    }
    for (schema, file) in [
        ("voxel", "model.json"),
        ("shape_set", "set.json"),
        ("grammar", "grammar.json"),
        ("production", "production.json"),
    ] {
        validate(schema, &read_json(Path::new(&d(file))))?;
        validated += 1;
    }

    let rt = tokio::runtime::Runtime::new().unwrap();
    let api_detail = rt.block_on(async {
        let app = api::router(Arc::new(api::AppState::new(corpus::all())));
        let grammar = read_json(Path::new(&d("grammar.json")));
        let (status, created) = call(&app, "POST", "/sessions", Some(json!({ "grammar": grammar, "seed": 5 }))).await;
        ensure!(status == StatusCode::CREATED, "create session: {status}");
        let id = created["id"].as_str().unwrap().to_string();
        validate("production", &created["production"])?;

        let (_, choices) = call(&app, "GET", &format!("/sessions/{id}/choices"), None).await;
        let prior = choices["hash"].as_str().unwrap().to_string();
        let pick = choices["choices"]
            .as_array()
            .unwrap()
            .iter()
            .position(|c| c["conflict"] == false && c["duplicate"] == false)
            .ok_or("no open choice")?;
        let (status, applied) = call(&app, "POST", &format!("/sessions/{id}/apply"), Some(json!({ "choice": pick }))).await;
        ensure!(status == StatusCode::OK, "apply: {status}");
        ensure!(applied["hash"] != prior.as_str(), "apply left the hash unchanged");
        validate("production", &applied["production"])?;
        let (status, undone) = call(&app, "POST", &format!("/sessions/{id}/undo"), None).await;
        ensure!(status == StatusCode::OK, "undo: {status}");
        ensure!(undone["hash"] == prior.as_str(), "undo did not restore hash {prior}");
        let (_, current) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
        ensure!(current["hash"] == prior.as_str(), "session hash drifted");

        let (status, _) = call(&app, "POST", &format!("/sessions/{id}/undo"), None).await;
        ensure!(status == StatusCode::CONFLICT, "undo on a fresh session: {status}");
        let (status, model) = call(&app, "GET", &format!("/sessions/{id}/model"), None).await;
        ensure!(status == StatusCode::OK, "model: {status}");
        validate("voxel", &model)?;
        let (status, _) = call(&app, "POST", "/sessions", Some(json!({ "grammar": {} }))).await;
        ensure!(status == StatusCode::BAD_REQUEST, "bad grammar: {status}");
        let (status, _) = call(&app, "GET", "/sessions/nope", None).await;
        ensure!(status == StatusCode::NOT_FOUND, "unknown session: {status}");
        Ok::<_, String>(prior)
    })?;
    Ok(format!(
        "enclosed model has {} blocks; {validated} artifacts validate; apply/undo restores hash {}",
        model.len(),
        &api_detail[..12]
    ))
}
