//! Acceptance criteria, one line per criterion. Exits nonzero if any fails.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use synchro::balance::{is_balanced, mp_table, quotient, Balance};
use synchro::cir::{cir, cir_partition};
use synchro::complexity::{self, Family, ITERATION_RATIO_BOUND, SLOPE_LIMIT};
use synchro::dynamics::{admissible_eval, quotient_match, simulate_map, unbalance_witness, Horizon, Kappa, OracleSpec};
use synchro::lattice::{brute_force_balanced, enumerate_balanced, join, meet, type_refining_partitions, DEFAULT_BUDGET};
use synchro::monoid::{law_check, product_monoid, Conductance, MonoidElement, MonoidSpec};
use synchro::network::Network;
use synchro::par::{self, Execution};
use synchro::partition::Partition;
use synchro::{fixtures, testkit};

const CORPUS_SEED: u64 = 0x5EED;
const CORPUS_SIZE: usize = 60;
const MAX_CELLS: usize = 8;
const SEEDS_PER_NETWORK: usize = 20;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn p(raw: &[usize]) -> Partition {
    Partition::canonicalize(raw)
}

fn r(text: &str) -> MonoidElement {
    MonoidElement::Resistor(Conductance::parse_ohms(text).unwrap())
}

fn table(rows: &[&[&str]]) -> Vec<Vec<MonoidElement>> {
    rows.iter().map(|row| row.iter().map(|s| r(s)).collect()).collect()
}

fn golden_cir_trace() -> Outcome {
    let net = fixtures::resistor_six();
    let seed = net.type_partition();
    let expected_parts = [p(&[1, 1, 2, 2, 3, 3]), p(&[1, 1, 2, 3, 4, 4])];
    let expected_tables = [
        table(&[&["15", "30"], &["15", "30"], &["15", "30"], &["15", "30"], &["15", "inf"], &["15", "inf"]]),
        table(&[
            &["15", "30", "inf"],
            &["15", "30", "inf"],
            &["30", "30", "30"],
            &["inf", "30", "15"],
            &["30", "inf", "30"],
            &["30", "inf", "30"],
        ]),
        table(&[
            &["15", "30", "inf", "inf"],
            &["15", "30", "inf", "inf"],
            &["30", "inf", "30", "30"],
            &["inf", "30", "inf", "15"],
            &["30", "inf", "inf", "30"],
            &["30", "inf", "inf", "30"],
        ]),
    ];
    let mut best = Duration::MAX;
    let mut trace = None;
    for _ in 0..5 {
        let start = Instant::now();
        let t = cir(&net, &seed).unwrap();
        best = best.min(start.elapsed());
        trace = Some(t);
    }
    let trace = trace.unwrap();
    let parts: Vec<Partition> = trace.iterations.iter().map(|(q, _)| q.clone()).collect();
    let parts_ok = parts == vec![expected_parts[0].clone(), expected_parts[1].clone(), expected_parts[1].clone()];
    let tables_ok = [&seed, &expected_parts[0], &expected_parts[1]]
        .iter()
        .zip(&expected_tables)
        .all(|(a, t)| &mp_table(&net, a).unwrap() == t);
    let fast = best < Duration::from_millis(10);
    outcome(
        parts_ok && tables_ok && fast,
        format!(
            "A1 = {}, A2 = {}, converged in {} calls; MP tables exact: {tables_ok}; {:?}",
            net.format_partition(&parts[0]),
            net.format_partition(&parts[1]),
            parts.len(),
            best
        ),
    )
}

fn golden_second_run() -> Outcome {
    let net = fixtures::resistor_six();
    let b1 = cir_partition(&net, &net.parse_partition("1,2,5;3,4;6").unwrap()).unwrap();
    let text = net.format_partition(&b1);
    outcome(text == "1,2;3;4;5;6", format!("cir(B0) = {text}"))
}

fn quotient_golden() -> Outcome {
    let net = fixtures::three_cell();
    let a = p(&[1, 1, 2]);
    let n = |v: u64| MonoidElement::Natural(v);
    let balanced = is_balanced(&net, &a).unwrap().is_balanced();
    let mp = mp_table(&net, &a).unwrap();
    let mp_ok = mp == vec![vec![n(1), n(1)], vec![n(1), n(1)], vec![n(2), n(1)]];
    let q = quotient(&net, &a).unwrap().quotient;
    let q_rows: Vec<Vec<MonoidElement>> = (0..2).map(|c| (0..2).map(|d| q.entry(c, d)).collect()).collect();
    let q_ok = q_rows == vec![vec![n(1), n(1)], vec![n(2), n(1)]];
    outcome(balanced && mp_ok && q_ok, format!("balanced: {balanced}, MP exact: {mp_ok}, Q exact: {q_ok}"))
}

fn chain_network() -> Outcome {
    let net = fixtures::chain();
    let a = net.parse_partition("1;2,3").unwrap();
    let verdict = is_balanced(&net, &a).unwrap();
    let cx_ok = matches!(verdict, Balance::Unbalanced(cx) if (cx.first, cx.second) == (1, 2));
    let lattice = enumerate_balanced(&net, DEFAULT_BUDGET).unwrap();
    let bottom_only = lattice.elements == vec![Partition::trivial(3)];
    outcome(cx_ok && bottom_only, format!("{verdict:?}; lattice size {}", lattice.len()))
}

struct NetworkFacts {
    net: Network,
    brute: Vec<Partition>,
    candidates: Vec<Partition>,
    lattice_matches: bool,
    cir_mismatches: usize,
    convergence_violations: usize,
    seeds: Vec<Partition>,
}

fn study(net: Network, seed: u64) -> NetworkFacts {
    let brute = brute_force_balanced(&net).unwrap();
    let candidates = type_refining_partitions(&net).unwrap();
    let lattice = enumerate_balanced(&net, DEFAULT_BUDGET).unwrap();
    let lattice_matches = lattice.elements == brute;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cir_mismatches = 0;
    let mut convergence_violations = 0;
    let mut seeds = Vec::new();
    for _ in 0..SEEDS_PER_NETWORK {
        let a0 = testkit::random_partition(&mut rng, &net);
        let trace = cir(&net, &a0).unwrap();
        if trace.refinements() > net.cell_count() - a0.rank() {
            convergence_violations += 1;
        }
        let below: Vec<&Partition> = brute.iter().filter(|b| b.is_finer(&a0).unwrap()).collect();
        let maximum = below.iter().find(|m| below.iter().all(|b| b.is_finer(m).unwrap()));
        if maximum != Some(&&trace.converged) {
            cir_mismatches += 1;
        }
        seeds.push(a0);
    }
    NetworkFacts { net, brute, candidates, lattice_matches, cir_mismatches, convergence_violations, seeds }
}

fn oracle_equivalence(facts: &[NetworkFacts], elapsed: Duration) -> Outcome {
    let lattice_bad = facts.iter().filter(|f| !f.lattice_matches).count();
    let cir_bad: usize = facts.iter().map(|f| f.cir_mismatches).sum();
    outcome(
        facts.len() >= 50 && lattice_bad == 0 && cir_bad == 0 && elapsed < Duration::from_secs(60),
        format!(
            "{} networks, {} seeds; lattice mismatches {lattice_bad}, cir mismatches {cir_bad}; {:.2?}",
            facts.len(),
            facts.len() * SEEDS_PER_NETWORK,
            elapsed
        ),
    )
}

fn lattice_laws(facts: &[NetworkFacts]) -> Outcome {
    let per_network = par::map(Execution::Parallel, facts, |f| {
        let mut rng = ChaCha8Rng::seed_from_u64(f.net.cell_count() as u64 * 31 + f.brute.len() as u64);
        let mut checked = 0usize;
        let mut bad = 0usize;
        let n = f.brute.len();
        let pairs = (n * n).min(300);
        for i in 0..pairs {
            let (a, b) = if n * n <= 300 {
                (&f.brute[i / n], &f.brute[i % n])
            } else {
                (&f.brute[rng.random_range(0..n)], &f.brute[rng.random_range(0..n)])
            };
            let j = join(&f.net, a, b).unwrap();
            let m = meet(&f.net, a, b).unwrap();
            let upper: Vec<&Partition> =
                f.brute.iter().filter(|u| a.is_finer(u).unwrap() && b.is_finer(u).unwrap()).collect();
            let lower: Vec<&Partition> =
                f.brute.iter().filter(|l| l.is_finer(a).unwrap() && l.is_finer(b).unwrap()).collect();
            let lub = upper.contains(&&j) && upper.iter().all(|u| j.is_finer(u).unwrap());
            let glb = lower.contains(&&m) && lower.iter().all(|l| l.is_finer(&m).unwrap());
            let balanced = is_balanced(&f.net, &j).unwrap().is_balanced() && is_balanced(&f.net, &m).unwrap().is_balanced();
            checked += 1;
            if !(lub && glb && balanced) {
                bad += 1;
            }
        }
        (checked, bad)
    });
    let checked: usize = per_network.iter().map(|x| x.0).sum();
    let bad: usize = per_network.iter().map(|x| x.1).sum();
    let convergence: usize = facts.iter().map(|f| f.convergence_violations).sum();
    outcome(
        bad == 0 && convergence == 0,
        format!("{checked} join/meet pairs, {bad} not LUB/GLB; {convergence} cir calls over |C| - rank(A0) iterations"),
    )
}

fn monoid_laws() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let shipped = [
        MonoidSpec::ResistorParallel,
        MonoidSpec::NaturalAdd,
        MonoidSpec::NaturalMul,
        MonoidSpec::free(["a", "b", "c"]),
        product_monoid(vec![MonoidSpec::NaturalAdd, MonoidSpec::ResistorParallel]),
        MonoidSpec::WithAnnihilator { inner: Box::new(MonoidSpec::NaturalAdd) },
    ];
    let mut violations = 0;
    for spec in &shipped {
        let samples: Vec<MonoidElement> = (0..64).map(|_| spec.sample(&mut rng)).collect();
        violations += law_check(spec, &samples, 1000, &mut rng).violations.len();
    }
    let m = MonoidSpec::ResistorParallel;
    let ohm = MonoidElement::ohms;
    let ten = m.combine(&ohm(30), &ohm(15)).unwrap() == ohm(10) && m.combine(&ohm(20), &ohm(20)).unwrap() == ohm(10);
    let identity = (1..=60).all(|w| m.combine(&ohm(w), &MonoidElement::open_circuit()).unwrap() == ohm(w));
    outcome(
        violations == 0 && ten && identity,
        format!("{} monoids x 1000 triples, {violations} violations; 30||15 = 20||20 = 10: {ten}; w||inf = w: {identity}", shipped.len()),
    )
}

/// Largest total `κ` weight entering any cell, used to keep the linear map
/// non-expanding.
fn max_inflow(net: &Network) -> f64 {
    (0..net.cell_count())
        .map(|c| {
            net.row(c)
                .entries
                .iter()
                .map(|(d, w)| Kappa::default().apply(net.monoid_for(c, *d), w).unwrap())
                .sum::<f64>()
        })
        .fold(0.0, f64::max)
}

fn dynamics_invariance(facts: &[NetworkFacts]) -> Outcome {
    let pairs: Vec<(usize, Partition)> =
        facts.iter().enumerate().flat_map(|(i, f)| f.brute.iter().map(move |b| (i, b.clone()))).collect();
    let results = par::map(Execution::Parallel, &pairs, |(i, part)| {
        let net = &facts[*i].net;
        let mut rng = ChaCha8Rng::seed_from_u64(*i as u64 * 1000 + part.rank() as u64);
        let reduced: Vec<f64> = (0..part.rank()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let map_oracle = OracleSpec::linear_diffusive(0.9, 1.0 / (1.0 + 2.0 * max_inflow(net)));
        let traj = simulate_map(net, &map_oracle, &part.lift(&reduced).unwrap(), 100).unwrap();
        let exact = traj.first_desync(part).is_none();
        let ode_oracle = OracleSpec::linear_diffusive(-0.5, 1.0);
        let deviation =
            quotient_match(net, part, &ode_oracle, &reduced, Horizon::Ode { t_end: 10.0, dt: 1e-3 }).unwrap();
        (exact, deviation)
    });
    let desync = results.iter().filter(|(exact, _)| !exact).count();
    let worst = results.iter().map(|r| r.1).fold(0.0, f64::max);
    outcome(
        desync == 0 && worst <= 1e-8,
        format!("{} (network, balanced partition) pairs; {desync} left the polydiagonal in 100 steps; max ODE quotient deviation {worst:e}", pairs.len()),
    )
}

fn witness_soundness(facts: &[NetworkFacts]) -> Outcome {
    let per_network = par::map(Execution::Parallel, facts, |f| {
        let mut unbalanced = 0usize;
        let mut unsound = 0usize;
        for a in f.candidates.iter().chain(&f.seeds) {
            if f.brute.binary_search_by(|b| b.rank().cmp(&a.rank()).then_with(|| b.colors().cmp(a.colors()))).is_ok() {
                continue;
            }
            unbalanced += 1;
            let sound = match unbalance_witness(&f.net, a) {
                Ok(w) => {
                    let output = admissible_eval(&f.net, &w.oracle, &w.state).unwrap();
                    synchro::dynamics::is_synchronized(a, &w.state) && !synchro::dynamics::is_synchronized(a, &output)
                }
                Err(_) => false,
            };
            if !sound {
                unsound += 1;
            }
        }
        (unbalanced, unsound)
    });
    let unbalanced: usize = per_network.iter().map(|x| x.0).sum();
    let unsound: usize = per_network.iter().map(|x| x.1).sum();
    outcome(unsound == 0 && unbalanced > 0, format!("{unbalanced} unbalanced partitions, {unsound} without a sound witness"))
}

fn complexity_smoke() -> Outcome {
    let reports = vec![
        complexity::sweep(Family::Path, &[64, 128, 256, 512, 1024]),
        complexity::sweep(Family::DensePath, &[64, 128, 256, 512, 1024]),
    ];
    for line in complexity::render(&reports).lines() {
        println!("       {line}");
    }
    let slopes_ok = reports.iter().all(|r| r.slope <= SLOPE_LIMIT);
    let ratio = reports.iter().map(|r| r.max_iteration_ratio()).fold(0.0, f64::max);
    let slopes: Vec<String> = reports.iter().map(|r| format!("{} {:.3}", r.family.name(), r.slope)).collect();
    outcome(
        slopes_ok && ratio <= ITERATION_RATIO_BOUND,
        format!("log-log slopes {}; max per-iteration ops/(|E|+|C|rank) {ratio:.3}", slopes.join(", ")),
    )
}

fn report(failed: &mut usize, id: &str, name: &str, run: impl FnOnce() -> Outcome) {
    let start = Instant::now();
    let o = run();
    let tag = if o.pass { "PASS" } else { "FAIL" };
    if !o.pass {
        *failed += 1;
    }
    println!("[{tag}] {id} {name}: {} [{:.2?}]", o.detail, start.elapsed());
}

fn main() {
    let mut failed = 0;
    report(&mut failed, "C1", "golden CIR trace", golden_cir_trace);
    report(&mut failed, "C2", "golden second run", golden_second_run);
    report(&mut failed, "C3", "quotient golden", quotient_golden);
    report(&mut failed, "C4", "chain network", chain_network);

    let start = Instant::now();
    let corpus = testkit::corpus(CORPUS_SEED, CORPUS_SIZE, MAX_CELLS);
    let indexed: Vec<(usize, Network)> = corpus.into_iter().enumerate().collect();
    let facts = par::map(Execution::Parallel, &indexed, |(i, net)| study(net.clone(), CORPUS_SEED + *i as u64));
    let elapsed = start.elapsed();
    report(&mut failed, "C5", "oracle equivalence", || oracle_equivalence(&facts, elapsed));
    report(&mut failed, "C6", "lattice laws", || lattice_laws(&facts));
    report(&mut failed, "C7", "monoid laws", monoid_laws);
    report(&mut failed, "C8", "dynamics invariance", || dynamics_invariance(&facts));
    report(&mut failed, "C9", "witness soundness", || witness_soundness(&facts));
    report(&mut failed, "C10", "complexity smoke", complexity_smoke);

    println!("{} of 10 criteria passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
