//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. All comparisons are exact unless a runtime budget is
//! named below.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use num_traits::{One, Signed, Zero};
use predual::linfty::{self, Constants, ExtensionOperator};
use predual::normingset::ConstructionState;
use predual::norms::{self, NormEngine, Vector};
use predual::rational::{self, Q};
use predual::report::CheckOutcome;
use predual::sampling;
use predual::schreier::{FiniteSet, HereditaryFamily};
use predual::sequences::{self, BlockBasis, BlockVector, WitnessMethod};
use rayon::prelude::*;

const GOLDEN: &str = include_str!("golden/levels4.json");

const BUILD_BUDGET: Duration = Duration::from_secs(1);
const PROPERTIES_BUDGET: Duration = Duration::from_secs(600);
const DERIVATIVE_BUDGET: Duration = Duration::from_secs(60);
const MAX_COORD: u64 = 100_000;
const LOWER_PATTERNS: usize = 1000;
const AXIOM_VECTORS: usize = 500;
const BASIS_VECTORS: usize = 1000;
const AXIOM_DEPTH: u32 = 4;
const BRACKET_DEPTH_LIMIT: u32 = 8;
const SEED: u64 = 20240601;

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);

fn b() -> Q {
    rational::q(1, 5)
}

fn eps() -> Q {
    rational::q(1, 1000)
}

fn largest() -> &'static ConstructionState {
    static S: OnceLock<ConstructionState> = OnceLock::new();
    S.get_or_init(|| ConstructionState::build(b(), 64, Some(MAX_COORD)).expect("build"))
}

fn small(levels: usize) -> ConstructionState {
    ConstructionState::build(b(), levels, None).expect("build")
}

fn chain() -> &'static [ExtensionOperator] {
    static C: OnceLock<Vec<ExtensionOperator>> = OnceLock::new();
    C.get_or_init(|| {
        let s = largest();
        linfty::build_chain(s, s.level_count()).expect("chain")
    })
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn outcomes_pass(outcomes: &[CheckOutcome]) -> Result<(), String> {
    match outcomes.iter().find(|o| !o.passed) {
        None => Ok(()),
        Some(o) => Err(format!(
            "{}: observed {:?} vs bound {:?}, counterexample {:?}",
            o.check, o.observed, o.bound, o.counterexample
        )),
    }
}

// 1 -------------------------------------------------------------------------

fn construction_ground_truth() -> Verdict {
    let start = Instant::now();
    let s = small(4);
    let elapsed = start.elapsed();
    ensure(s.save_state() == GOLDEN, || "4-level state differs from the golden document".into())?;
    let intervals: Vec<(u64, u64)> = s.levels().iter().map(|l| (l.lo, l.hi)).collect();
    ensure(intervals == [(1, 1), (2, 2), (3, 3), (4, 7)], || format!("intervals {intervals:?}"))?;
    let d3: Vec<Vec<(u64, u32)>> = s.level(3).unwrap().iter().map(|f| f.coords().to_vec()).collect();
    ensure(d3.len() == 2 && d3.contains(&vec![(1, 0), (2, 1), (3, 0)]) && d3.contains(&vec![(3, 0)]), || {
        format!("D_3 = {d3:?}")
    })?;
    let d4: Vec<Vec<(u64, u32)>> = s.level(4).unwrap().composites().iter().map(|f| f.coords().to_vec()).collect();
    let expect = vec![
        vec![(1, 0), (2, 1), (4, 0)],
        vec![(1, 0), (3, 1), (5, 0)],
        vec![(2, 0), (3, 1), (6, 0)],
        vec![(2, 0), (3, 1), (7, 0)],
    ];
    ensure(d4 == expect, || format!("D_4 composites {d4:?}"))?;
    ensure(elapsed < BUILD_BUDGET, || format!("build took {elapsed:?}"))?;
    Ok(format!("golden match, build {elapsed:.2?}"))
}

// 2 -------------------------------------------------------------------------

fn properties_on_largest_state() -> Verdict {
    let start = Instant::now();
    let s = largest();
    let report = s.verify_properties();
    let elapsed = start.elapsed();
    if let Some(c) = report.checks.iter().find(|c| !c.passed) {
        return Err(format!("{}: {:?}", c.property, c.counterexample));
    }
    ensure(s.max_coord() <= MAX_COORD, || format!("max coordinate {}", s.max_coord()))?;
    ensure(elapsed < PROPERTIES_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!(
        "{} levels, max coordinate {}, {} functionals, {elapsed:.2?}",
        s.level_count(),
        s.max_coord(),
        s.functional_count()
    ))
}

// 3 -------------------------------------------------------------------------

fn dual_bounds() -> Verdict {
    let s = largest();
    let consts = Constants::new(s.b()).map_err(|e| e.to_string())?;
    ensure(consts.rho == rational::q(7, 8) && consts.lambda == rational::q(21, 2), || "constants".into())?;
    ensure(consts.bound_full() == rational::q(25, 4), || "‖d*T_n‖ bound".into())?;
    ensure(consts.bound_tail() == rational::q(67, 4), || "tail bound".into())?;
    ensure(consts.bound_tail_any(s.b()) == rational::q(335, 16), || "all-level tail bound".into())?;
    let mut cases = 0;
    let mut worst = Q::zero();
    for op in chain() {
        let outcomes = linfty::verify_dual_properties(s, op).map_err(|e| e.to_string())?;
        outcomes_pass(&outcomes).map_err(|e| format!("n={}: {e}", op.n()))?;
        for o in &outcomes {
            cases += o.cases;
            if let Some(v) = o.observed.as_deref().and_then(|v| rational::parse(v).ok()) {
                worst = worst.max(v);
            }
        }
    }
    Ok(format!("n = 2..={}, {cases} cases, largest observed {}", s.level_count(), rational::fmt(&worst)))
}

// 4 -------------------------------------------------------------------------

fn compatibility_and_biorthogonality() -> Verdict {
    let s = largest();
    let compat = linfty::compatibility_check(s, chain());
    outcomes_pass(std::slice::from_ref(&compat))?;
    let mut cases = compat.cases;
    for op in chain() {
        let o = linfty::biorthogonality_check(s, op).map_err(|e| e.to_string())?;
        outcomes_pass(std::slice::from_ref(&o))?;
        cases += o.cases;
    }
    Ok(format!("{cases} exact column/row identities"))
}

// 5 -------------------------------------------------------------------------

fn lower_estimate() -> Verdict {
    let s = largest();
    let ops = chain();
    let half = rational::q(1, 2);
    let mut rng = sampling::rng(SEED);
    let jobs: Vec<(usize, Vector)> = (0..LOWER_PATTERNS)
        .map(|t| {
            let k = t % ops.len();
            let dim = ops[k].dim();
            let density = (48.0 / dim as f64).min(0.5);
            (k, sampling::sign_patterns(&mut rng, 1, dim, density).pop().unwrap())
        })
        .collect();
    let failures: Vec<String> = jobs
        .par_iter()
        .filter_map(|(k, x)| {
            let op = &ops[*k];
            let r = match linfty::lower_estimate_check(s, op, x) {
                Ok(r) => r,
                Err(e) => return Some(format!("n={} x={x}: {e}", op.n())),
            };
            let f = s.functional(r.functional).expect("returned ids are built");
            let direct = linfty::restricted_value(s.b(), f, r.interval_end, &op.apply(x));
            (direct != r.value || direct.abs() < half).then(|| format!("n={} x={x}: value {}", op.n(), rational::fmt(&direct)))
        })
        .collect();
    ensure(failures.is_empty(), || failures[0].clone())?;

    // every ±1/0 pattern on the 7 coordinates of four levels, against a
    // search over all built functionals and all initial intervals
    let s4 = small(4);
    let t4 = linfty::build_t(&s4, 4).map_err(|e| e.to_string())?;
    let dim = t4.dim();
    let mut exhaustive = 0;
    for code in 1..3u64.pow(dim as u32) {
        let mut c = code;
        let x = Vector::from_pairs((1..=dim).filter_map(|p| {
            let d = c % 3;
            c /= 3;
            (d != 0).then(|| (p, if d == 1 { Q::one() } else { -Q::one() }))
        }));
        let tx = t4.apply(&x);
        let best = s4
            .functionals()
            .flat_map(|(_, f)| (1..=dim).map(move |e| (f, e)))
            .map(|(f, e)| linfty::restricted_value(s4.b(), f, Some(e), &tx).abs())
            .max()
            .unwrap();
        let r = linfty::lower_estimate_check(&s4, &t4, &x).map_err(|e| e.to_string())?;
        ensure(best >= half && r.value.abs() >= half && r.value.abs() <= best, || format!("pattern {x}"))?;
        exhaustive += 1;
    }
    Ok(format!("{LOWER_PATTERNS} seeded patterns over n = 2..={}, {exhaustive} exhaustive at dimension {dim}", s.level_count()))
}

// 6 -------------------------------------------------------------------------

fn norm_brackets() -> Verdict {
    let s = largest();
    let engine = NormEngine::new(s);
    let bad: Vec<u64> = (1..=s.max_coord())
        .into_par_iter()
        .filter(|&i| match engine.bracket_at_depth(&Vector::unit(i), 1) {
            Ok(br) => !(br.lower.is_one() && br.upper.is_one()),
            Err(_) => true,
        })
        .collect();
    ensure(bad.is_empty(), || format!("bracket(e_{}) ≠ [1, 1]", bad[0]))?;

    let x12 = Vector::from_pairs([(1, Q::one()), (2, Q::one())]);
    let br = engine.bracket(&x12, &eps(), BRACKET_DEPTH_LIMIT).map_err(|e| e.to_string())?;
    ensure(br.width() <= eps() && br.contains(&rational::q(6, 5)), || {
        format!("bracket(e_1+e_2) = [{}, {}]", rational::fmt(&br.lower), rational::fmt(&br.upper))
    })?;

    let mut rng = sampling::rng(SEED ^ 0xa710);
    let xs = sampling::sparse_vectors(&mut rng, AXIOM_VECTORS, s.level_end(5), 4);
    let ys = sampling::sparse_vectors(&mut rng, AXIOM_VECTORS, s.level_end(5), 4);
    let scalars: Vec<Q> = (0..AXIOM_VECTORS as i64).map(|t| rational::q((t % 7) - 3, 1 + t % 4)).collect();
    let failures: Vec<String> = (0..AXIOM_VECTORS)
        .into_par_iter()
        .filter_map(|t| {
            let (x, y, c) = (&xs[t], &ys[t], &scalars[t]);
            let window: std::collections::BTreeSet<u64> = x.support().union(&y.support()).copied().collect();
            let at = |v: &Vector| engine.bracket_on(v, &window, AXIOM_DEPTH).expect("coordinates are built");
            let (bx, by, bxy) = (at(x), at(y), at(&x.add(y)));
            let (bcx, bneg) = (at(&x.scale(c)), at(&x.scale(&-Q::one())));
            let ca = c.abs();
            let scaling = bcx.lower == &bx.lower * &ca && bcx.upper == &bx.upper * &ca;
            let symmetry = bneg.lower == bx.lower && bneg.upper == bx.upper;
            let triangle = bxy.upper <= &bx.upper + &by.upper;
            let ordered = bx.lower <= bx.upper && bx.lower >= x.sup_norm() && bx.upper <= x.l1_norm();
            (!(scaling && symmetry && triangle && ordered)).then(|| format!("x={x} y={y} c={}", rational::fmt(c)))
        })
        .collect();
    ensure(failures.is_empty(), || format!("axiom violated at {}", failures[0]))?;
    Ok(format!(
        "{} unit brackets, e_1+e_2 in [{}, {}], axioms on {AXIOM_VECTORS} pairs",
        s.max_coord(),
        rational::fmt(&br.lower),
        rational::fmt(&br.upper)
    ))
}

// 7 -------------------------------------------------------------------------

fn basis_bound() -> Verdict {
    let s = largest();
    let mut rng = sampling::rng(SEED ^ 0xb5);
    let mut xs = sampling::sparse_vectors(&mut rng, BASIS_VECTORS / 2, s.level_end(5), 5);
    xs.extend(sampling::sparse_vectors(&mut rng, BASIS_VECTORS * 3 / 10, s.level_end(6), 5));
    xs.extend(sampling::sparse_vectors(&mut rng, BASIS_VECTORS - xs.len(), s.max_coord(), 5));
    let report = norms::basis_bound_check(s, &xs, &eps(), BRACKET_DEPTH_LIMIT).map_err(|e| e.to_string())?;
    outcomes_pass(&report.outcomes)?;
    let certs = norms::restriction_certificates(s).map_err(|e| e.to_string())?;
    let two = rational::int(2);
    let worst = certs.values().flat_map(|c| c.iter().map(|(_, v)| v)).max().cloned().unwrap_or_default();
    ensure(worst <= two, || format!("certificate reaches {}", rational::fmt(&worst)))?;
    Ok(format!(
        "{} vectors, {} certificates, largest certificate {}",
        xs.len(),
        certs.len(),
        rational::fmt(&worst)
    ))
}

// 8 -------------------------------------------------------------------------

fn cluster(base: &HereditaryFamily, k: u32, f: &FiniteSet) -> bool {
    if k == 0 {
        return base.member(f);
    }
    if !cluster(base, k - 1, f) {
        return false;
    }
    let top = f.greatest().unwrap_or(0);
    [top + 41, top + 97, top + 500].iter().all(|&m| cluster(base, k - 1, &f.with(m)))
}

fn derivatives() -> Verdict {
    const HORIZON: u64 = 12;
    let start = Instant::now();
    for n in 1..=6u32 {
        let fam = HereditaryFamily::SizeBounded(n);
        for k in 1..=n {
            let got = fam.iterated_derivative(k);
            ensure(got == HereditaryFamily::SizeBounded(n - k), || format!("A_{n}^({k}) = {got}"))?;
        }
        ensure(fam.iterated_derivative(n).is_zero_point_only(), || format!("A_{n}^({n}) is not the zero point"))?;
    }
    let mut compared = 0u64;
    let families: Vec<HereditaryFamily> =
        (1..=6).map(HereditaryFamily::SizeBounded).chain([HereditaryFamily::schreier_plus_two()]).collect();
    for base in &families {
        let top = match base {
            HereditaryFamily::SizeBounded(n) => *n,
            _ => 3,
        };
        for k in 0..=top {
            let symbolic = base.clone().restrict(HORIZON).iterated_derivative(k);
            for mask in 0u32..1 << HORIZON {
                let f = FiniteSet::new((1..=HORIZON).filter(|c| mask & (1 << (c - 1)) != 0).collect()).unwrap();
                ensure(symbolic.member(&f) == cluster(base, k, &f), || format!("{base} k={k} F={f}"))?;
                compared += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < DERIVATIVE_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!("{compared} subsets of [1, {HORIZON}] against the cluster oracle, {elapsed:.2?}"))
}

// 9 -------------------------------------------------------------------------

/// Direct re-evaluation of a witness, independent of the library's validator.
fn recheck(s: &ConstructionState, basis: &BlockBasis, w: &sequences::L1Witness) -> Result<(), String> {
    let f = s.functional(w.functional).map_err(|e| e.to_string())?;
    let floor = &w.delta * s.b();
    ensure(w.blocks.len() == w.k && f.support_len() <= 2 * w.k + 1, || "size".into())?;
    for &n in &w.blocks {
        let u = &basis.blocks()[n - 1];
        let i = u.designated().ok_or("no designated coordinate")?;
        let meets: Vec<u64> = f.support().filter(|c| !u.vector().get(*c).is_zero()).collect();
        ensure(meets == [i], || format!("block {n}: supp ∩ supp u = {meets:?}"))?;
        let mut v = Q::zero();
        for &(c, e) in f.coords() {
            v += rational::pow(s.b(), e) * u.vector().get(c);
        }
        ensure(v.abs() >= floor, || format!("block {n}: |d*(u)| = {}", rational::fmt(&v)))?;
    }
    Ok(())
}

fn witnesses() -> Verdict {
    let s5 = small(5);
    let units = BlockBasis::units(1..=s5.max_coord()).map_err(|e| e.to_string())?;
    let mut notes = Vec::new();
    for k in 1..=3 {
        let w = sequences::l1_witness(&s5, &units, None, k).map_err(|e| format!("k={k}: {e}"))?;
        sequences::validate_witness(&s5, &units, &w).map_err(|e| format!("k={k}: {e}"))?;
        recheck(&s5, &units, &w).map_err(|e| format!("k={k}: {e}"))?;
        let method = if w.method == WitnessMethod::Induction { "induction" } else { "search" };
        notes.push(format!("k={k} {method} support {:?}", w.support));
    }
    let s = largest();
    let all = BlockBasis::units(1..=s.max_coord()).map_err(|e| e.to_string())?;
    let (blocks, id) = sequences::l1_witness_induction(s, &all, 3).map_err(|e| e.to_string())?;
    let f = s.functional(id).map_err(|e| e.to_string())?;
    ensure(blocks.len() == 3 && f.support_len() <= 7, || format!("induction k=3 gave {id}"))?;
    Ok(format!("{}; induction k=3 on {} levels gives {id}", notes.join(", "), s.level_count()))
}

// 10 ------------------------------------------------------------------------

fn flat_family(s: &ConstructionState, first: u64, stride: impl Fn(u64) -> u64, signs: &[i64]) -> BlockBasis {
    let mut blocks = Vec::new();
    let mut start = first;
    let mut prev_end = 0u64;
    while start < s.max_coord() {
        let scale = Q::one() / rational::pow(&rational::int(2), prev_end as u32 + 1);
        let sign = signs[blocks.len() % signs.len()];
        let v = Vector::from_pairs([(start, scale.clone()), (start + 1, &scale * rational::int(sign))]);
        blocks.push(BlockVector::new(v, Some(start)).expect("nonzero at the designated point"));
        prev_end = start + 1;
        start = stride(prev_end);
    }
    BlockBasis::new(blocks).expect("successive")
}

fn c0_certifier() -> Verdict {
    ensure(sequences::c0_series_constant() == rational::int(5), || "constant ≠ 5".into())?;
    let s = largest();
    let families = [
        flat_family(s, 1, |e| 2 * e + 1, &[1, -1]),
        flat_family(s, 2, |e| 3 * e, &[1]),
        flat_family(s, 4, |e| e + 7 * e / 3, &[-1, 1, 1]),
    ];
    let mut blocks = 0;
    for (t, fam) in families.iter().enumerate() {
        let r = sequences::c0_certify(s, fam, 2).map_err(|e| e.to_string())?;
        ensure(r.passed(), || format!("family {t}: {:?} {:?}", r.flatness.counterexample, r.series.counterexample))?;
        blocks += fam.len();
    }
    // fault: the third block of the first family loses its flatness margin
    let mut faulty: Vec<BlockVector> = families[0].blocks().to_vec();
    let (lo, _) = faulty[2].range();
    let k_prev = faulty[1].range().1;
    let v = Vector::from_pairs([(lo, Q::one() / rational::pow(&rational::int(2), k_prev as u32))]);
    faulty[2] = BlockVector::new(v, Some(lo)).unwrap();
    let bad = BlockBasis::new(faulty).map_err(|e| e.to_string())?;
    let r = sequences::c0_certify(s, &bad, 2).map_err(|e| e.to_string())?;
    let located = r.flatness.counterexample.as_deref().is_some_and(|c| c.starts_with("block 3"));
    ensure(!r.passed() && located, || format!("fault not located: {:?}", r.flatness.counterexample))?;
    Ok(format!(
        "constant 5, {} flat families ({blocks} blocks), fault located at \"{}\"",
        families.len(),
        r.flatness.counterexample.unwrap_or_default()
    ))
}

// 11 ------------------------------------------------------------------------

fn determinism() -> Verdict {
    let a = ConstructionState::build(b(), 64, Some(MAX_COORD)).map_err(|e| e.to_string())?.save_state();
    ensure(a == largest().save_state(), || "independent builds differ".into())?;
    let dir = std::env::temp_dir().join(format!("predual-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let run = |args: &[&str]| -> Result<Vec<u8>, String> {
        let o = Command::new(env!("CARGO_BIN_EXE_predual")).args(args).output().map_err(|e| e.to_string())?;
        ensure(o.status.success(), || format!("{args:?} exited with {:?}", o.status.code()))?;
        Ok(o.stdout)
    };
    let mut files = Vec::new();
    for t in 0..2 {
        let p = dir.join(format!("state{t}.json"));
        run(&["build", "--levels", "6", "--out", p.to_str().unwrap()])?;
        files.push(std::fs::read(&p).map_err(|e| e.to_string())?);
    }
    let state = dir.join("state0.json");
    let verify = ["verify", "--state", state.to_str().unwrap(), "--samples", "50", "--seed", "3"];
    let r1 = run(&verify)?;
    let r2 = run(&verify)?;
    let m1 = run(&["--format", "md", "verify", "--levels", "5", "--samples", "50"])?;
    let m2 = run(&["--format", "md", "verify", "--levels", "5", "--samples", "50"])?;
    std::fs::remove_dir_all(&dir).ok();
    ensure(files[0] == files[1], || "state files differ".into())?;
    ensure(r1 == r2 && m1 == m2, || "reports differ".into())?;
    Ok(format!("state {} bytes, reports {} and {} bytes", files[0].len(), r1.len(), m1.len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("construction ground truth", construction_ground_truth),
        ("construction properties", properties_on_largest_state),
        ("extension operator bounds", dual_bounds),
        ("compatibility and biorthogonality", compatibility_and_biorthogonality),
        ("lower estimate", lower_estimate),
        ("norm brackets", norm_brackets),
        ("restriction bound", basis_bound),
        ("derivative identities", derivatives),
        ("l1 witnesses", witnesses),
        ("c0 certifier", c0_certifier),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (n, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let verdict = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match verdict {
            Ok(detail) => println!("PASS {:>2} {name} ({secs:.1}s): {detail}", n + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name} ({secs:.1}s): {why}", n + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
