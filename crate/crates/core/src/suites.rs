//! Acceptance suites, one per criterion, shared by `towerforge verify` and
//! the `acceptance` test target. Each returns a single PASS/FAIL verdict with
//! the numbers behind it.

use std::collections::BTreeSet;
use std::fmt;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::compose::{compose, compose_amplifiers, lift_trace};
use crate::gadgets::{counting_loop, factorial_amplifier, trivial_amplifier, Amplifier};
use crate::ir::{classify_counters, Command, CounterId, Program};
use crate::parser::parse;
use crate::probes::probe_suite;
use crate::semantics::{
    check_probes, computed_relation, drive, explore, relation_of, Caps, Probe, ProbePoint,
    ProbeScope, Schedule,
};
use crate::tower::{
    counter_census, forced_zero_counters, hardness_reduction, refined_amplifier, tower_amplifier,
    tower_run,
};
use crate::translate::{
    check_pnml, export_pnml, export_vass_text, parse_vass_text, path_from_trace, replay_path,
    to_petri_net, to_vass, vass_reach, Reach, Vass,
};

pub const GOLDEN_TOWER_SIZE: &str = include_str!("../golden/tower_size.txt");
pub const GOLDEN_REFINED_SIZE: &str = include_str!("../golden/refined_size.txt");
pub const GOLDEN_VASS: &[(&str, &str)] = &[
    ("inc_halt", include_str!("../golden/inc_halt.vass")),
    ("counting_loop", include_str!("../golden/counting_loop.vass")),
    ("trivial_amp_2", include_str!("../golden/trivial_amp_2.vass")),
];

/// The programs behind [`GOLDEN_VASS`], by name.
pub fn golden_program(name: &str) -> Option<Program> {
    match name {
        "inc_halt" => parse("inc x\nhalt\n").ok(),
        "counting_loop" => counting_loop(2).ok(),
        "trivial_amp_2" => trivial_amplifier(2).ok().map(|a| a.program),
        _ => None,
    }
}

#[derive(Clone, Debug)]
pub struct Verdict {
    pub criterion: u8,
    pub suite: &'static str,
    pub pass: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} [{}] {}: {} ({:.2}s)",
            if self.pass { "PASS" } else { "FAIL" },
            self.criterion,
            self.suite,
            self.detail,
            self.elapsed.as_secs_f64()
        )
    }
}

type SuiteFn = fn() -> Result<(bool, String), String>;

pub const SUITES: &[(&str, u8, SuiteFn)] = &[
    ("counting-loop", 1, counting_loop_suite),
    ("trivial-amp", 2, trivial_amp),
    ("factorial", 3, factorial),
    ("iteration-probes", 4, iteration_probes),
    ("prop31", 5, composition_suite),
    ("tower", 6, tower),
    ("reduction", 7, reduction),
    ("refined", 8, refined),
    ("translate", 9, translate),
];

pub fn suite_names() -> impl Iterator<Item = &'static str> {
    SUITES.iter().map(|s| s.0)
}

/// Runs one suite by name; `None` if the name is unknown.
pub fn run_suite(name: &str) -> Option<Verdict> {
    let &(suite, criterion, f) = SUITES.iter().find(|s| s.0 == name)?;
    let t = Instant::now();
    let (pass, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
    Some(Verdict {
        criterion,
        suite,
        pass,
        detail,
        elapsed: t.elapsed(),
    })
}

fn err<E: fmt::Display>(e: E) -> String {
    e.to_string()
}

fn names(ns: &[&str]) -> Vec<CounterId> {
    ns.iter().map(CounterId::new).collect()
}

fn tuples(it: impl IntoIterator<Item = Vec<u64>>) -> BTreeSet<Vec<u64>> {
    it.into_iter().collect()
}

fn show(t: &BTreeSet<Vec<u64>>) -> String {
    let items: Vec<String> = t
        .iter()
        .map(|v| format!("({})", v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")))
        .collect();
    format!("{{{}}}", items.join(","))
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed())
}

fn amp_relation(a: &Amplifier, bound: u64, cap: u64) -> Result<(BTreeSet<Vec<u64>>, bool), String> {
    let r = computed_relation(&a.program, bound, &a.outs(), &Caps::with_counter_cap(cap)).map_err(err)?;
    Ok((r.tuples, r.exact))
}

fn counting_loop_suite() -> Result<(bool, String), String> {
    let p = counting_loop(2).map_err(err)?;
    let (r, t) = timed(|| computed_relation(&p, 1, &names(&["x", "y"]), &Caps::default()));
    let r = r.map_err(err)?;
    let want = tuples([vec![2, 4]]);
    let pass = r.tuples == want && r.exact && t < Duration::from_secs(1);
    let flag = if r.exact { "exact" } else { "truncated" };
    Ok((pass, format!("relation in (x,y) = {} {flag} in {t:.2?}", show(&r.tuples))))
}

fn trivial_amp() -> Result<(bool, String), String> {
    let mut pass = true;
    let mut parts = Vec::new();
    for r in 1..=3u64 {
        let a = trivial_amplifier(r).map_err(err)?;
        let (got, t) = timed(|| amp_relation(&a, 1, 5 * r + 1));
        let (got, _) = got?;
        let want = tuples((1..=5).map(|c| vec![r, c, c * r]));
        let ok = got == want && t < Duration::from_secs(1);
        pass &= ok;
        parts.push(format!("R={r} cap {}: {} {t:.2?}", 5 * r + 1, if ok { "ok" } else { "MISMATCH" }));
    }
    Ok((pass, parts.join("; ")))
}

fn factorial() -> Result<(bool, String), String> {
    let f = factorial_amplifier();
    let cases: [(u64, u64, BTreeSet<Vec<u64>>, u64); 3] = [
        (1, 8, tuples((1..=7).map(|c| vec![1, c, c])), 10),
        (2, 12, tuples((1..=5).map(|c| vec![2, c, 2 * c])), 10),
        (3, 20, tuples((1..=3).map(|c| vec![6, c, 6 * c])), 300),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (bound, cap, want, limit) in cases {
        let (got, t) = timed(|| amp_relation(&f, bound, cap));
        let (got, _) = got?;
        let ok = got == want && t < Duration::from_secs(limit);
        pass &= ok;
        parts.push(format!("B={bound} cap {cap}: {} {t:.1?}", show(&got)));
    }
    Ok((pass, parts.join("; ")))
}

fn iteration_probes() -> Result<(bool, String), String> {
    let f = factorial_amplifier().program;
    let mut pass = true;
    let mut parts = Vec::new();
    for (bound, iter_cap, growth_cap) in [(2u64, 12u64, 10u64), (3, 14, 10)] {
        for (suite, cap) in [("iterations", iter_cap), ("growth", growth_cap)] {
            let s = probe_suite(suite, &f, bound).map_err(err)?;
            let r = check_probes(&f, bound, &s.probes, &s.snapshots, &Caps::with_counter_cap(cap))
                .map_err(err)?;
            let violations: Vec<&str> = r
                .outcomes
                .iter()
                .filter(|o| !o.holds())
                .map(|o| o.label.as_str())
                .collect();
            let unexercised = r.outcomes.iter().filter(|o| o.checks == 0).count();
            let checks: u64 = r.outcomes.iter().map(|o| o.checks).sum();
            pass &= r.complete_runs && violations.is_empty() && unexercised == 0;
            parts.push(format!(
                "B={bound} {suite} cap {cap}: {} probes, {checks} checks, {} violations{}",
                r.outcomes.len(),
                violations.len(),
                if violations.is_empty() { String::new() } else { format!(" {violations:?}") }
            ));
        }
    }
    Ok((pass, parts.join("; ")))
}

/// Shape of a random program for the property suites.
#[derive(Clone, Debug)]
pub struct RandomShape {
    pub max_commands: usize,
    /// Counters that tests may name.
    pub testable: Vec<CounterId>,
    /// Counters only incremented and decremented.
    pub plain: Vec<CounterId>,
}

/// A random valid program with at most `max_commands` commands, the last a
/// halt listing a random subset of the counters used.
pub fn random_program(rng: &mut impl Rng, shape: &RandomShape) -> Program {
    let n = rng.gen_range(1..=shape.max_commands.max(1));
    let all: Vec<&CounterId> = shape.testable.iter().chain(&shape.plain).collect();
    let mut cmds = Vec::with_capacity(n);
    for line in 1..n {
        let pick = rng.gen_range(0..100);
        let testing = !shape.testable.is_empty() && pick >= 75;
        let cmd = if testing {
            let x = shape.testable.choose(rng).expect("nonempty").clone();
            if pick < 88 {
                Command::TestZero(x)
            } else {
                Command::TestMax(x)
            }
        } else if pick < 35 {
            Command::Inc((*all.choose(rng).expect("counters")).clone())
        } else if pick < 60 {
            Command::Dec((*all.choose(rng).expect("counters")).clone())
        } else {
            // half the jumps may fall through, which keeps runs alive
            let far = rng.gen_range(1..=n);
            if rng.gen_bool(0.5) {
                Command::Goto(line + 1, far)
            } else {
                Command::Goto(far, rng.gen_range(1..=n))
            }
        };
        cmds.push(cmd);
    }
    let used: BTreeSet<CounterId> = cmds.iter().filter_map(|c| c.counter().cloned()).collect();
    let listed = used.into_iter().filter(|_| rng.gen_bool(0.25)).collect();
    cmds.push(Command::Halt(listed));
    Program::new(cmds)
}

/// Largest number of tests `t` with `r * (1 + 2t) < cap`: the composed
/// program needs `c = 1 + 2t` and `d = r * c` to pay for `t` tests.
fn test_budget(r: u64, cap: u64) -> u64 {
    ((cap - 1) / r).saturating_sub(1) / 2
}

type Tuples = BTreeSet<Vec<u64>>;

/// Final valuations of `p`'s counters in `r`-runs of `p` and in runs of
/// the composition with the trivial amplifier by `r`.
pub fn composition_sides(p: &Program, r: u64, cap: u64) -> Result<(Tuples, Tuples), String> {
    let counters = p.counters();
    let direct = Caps {
        test_budget: Some(test_budget(r, cap)),
        ..Caps::with_counter_cap(cap)
    };
    let lhs = computed_relation(p, r, &counters, &direct).map_err(err)?;
    let amp = trivial_amplifier(r).map_err(err)?;
    let composed = compose(&amp, p).map_err(err)?;
    let rhs = computed_relation(&composed, 1, &counters, &Caps::with_counter_cap(cap)).map_err(err)?;
    Ok((lhs.tuples, rhs.tuples))
}

fn composition_suite() -> Result<(bool, String), String> {
    const CAP: u64 = 16;
    let shape = RandomShape {
        max_commands: 8,
        testable: names(&["x", "y"]),
        plain: names(&["z"]),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let cases: Vec<(Program, u64)> = (0..200)
        .map(|_| (random_program(&mut rng, &shape), rng.gen_range(2..=3)))
        .collect();
    let results: Vec<Result<bool, String>> = cases
        .par_iter()
        .map(|(p, r)| composition_sides(p, *r, CAP).map(|(a, b)| a == b))
        .collect();
    let mut agree = 0;
    let mut first_bad = None;
    for (k, res) in results.into_iter().enumerate() {
        match res {
            Ok(true) => agree += 1,
            Ok(false) => {
                first_bad.get_or_insert(format!("case {k} disagrees"));
            }
            Err(e) => {
                first_bad.get_or_insert(format!("case {k}: {e}"));
            }
        }
    }
    let nonempty = cases
        .iter()
        .filter(|(p, _)| !classify_counters(p).tested.is_empty())
        .filter(|(p, r)| {
            let caps = Caps {
                test_budget: Some(test_budget(*r, CAP)),
                ..Caps::with_counter_cap(CAP)
            };
            explore(p, *r, &caps).is_ok_and(|e| e.has_complete_run())
        })
        .count();
    let tested = cases
        .iter()
        .filter(|(p, _)| !classify_counters(p).tested.is_empty())
        .count();
    Ok((
        agree == cases.len(),
        format!(
            "{agree}/{} agree ({tested} with tested counters, {nonempty} of those with complete runs){}",
            cases.len(),
            first_bad.map(|s| format!("; {s}")).unwrap_or_default()
        ),
    ))
}

fn golden_pairs(text: &str) -> Vec<(String, i64)> {
    text.lines()
        .filter_map(|l| {
            let (k, v) = l.split_once(' ')?;
            Some((k.to_string(), v.trim().parse().ok()?))
        })
        .collect()
}

fn golden_value(text: &str, key: &str) -> Option<i64> {
    golden_pairs(text).into_iter().find(|(k, _)| k == key).map(|(_, v)| v)
}

/// Command counts of `tower_amplifier(n)`, `n = 0..=8`.
pub fn tower_sizes() -> Vec<i64> {
    (0..=8).map(|n| tower_amplifier(n).program.len() as i64).collect()
}

/// Command counts of `refined_amplifier(h, n)` for `h = 0..=5`, `n = 1..=6`.
pub fn refined_sizes() -> Result<Vec<(i64, i64, i64)>, String> {
    let mut out = Vec::new();
    for h in 0..=5usize {
        for n in 1..=6u64 {
            let a = refined_amplifier(h, n).map_err(err)?;
            out.push((h as i64, n as i64, a.program.len() as i64));
        }
    }
    Ok(out)
}

fn tower() -> Result<(bool, String), String> {
    let t1 = tower_amplifier(1);
    let (got, t) = timed(|| amp_relation(&t1, 1, 13));
    let (got, exact) = got?;
    let want = tuples([vec![6, 1, 6], vec![6, 2, 12]]);
    let rel_ok = got == want && t < Duration::from_secs(600);

    // the smallest witness shows how far past the cap its run climbs
    let peak = tower_run(1, 1)
        .and_then(|t| t.configurations(&t1.program, 1).ok())
        .and_then(|cs| cs.iter().flat_map(|c| c.values.iter().copied()).max());

    let sizes = tower_sizes();
    let (c0, c1) = (golden_value(GOLDEN_TOWER_SIZE, "c0"), golden_value(GOLDEN_TOWER_SIZE, "c1"));
    let affine = match (c0, c1) {
        (Some(c0), Some(c1)) => sizes.iter().enumerate().all(|(n, &s)| s == c0 + c1 * n as i64),
        _ => false,
    };
    Ok((
        rel_ok && affine,
        format!(
            "tower(1) relation at cap 13 = {} ({}, {t:.2?}), expected {}; replayed run for (6,1,6) peaks at {}; sizes n=0..8 {sizes:?} {} golden {}+{}n",
            show(&got),
            if exact { "exact" } else { "truncated" },
            show(&want),
            peak.map_or("?".to_string(), |v| v.to_string()),
            if affine { "fit" } else { "do not fit" },
            c0.unwrap_or(-1),
            c1.unwrap_or(-1)
        ),
    ))
}

/// `add x 6; tm x; sub x 6; tz x; halt`, which has a complete 6-run.
pub fn reduction_example_positive() -> Program {
    let text = format!("{}tm x\n{}tz x\nhalt\n", "inc x\n".repeat(6), "dec x\n".repeat(6));
    parse(&text).expect("static text")
}

/// `inc x; tz x; halt`, which has none.
pub fn reduction_example_negative() -> Program {
    parse("inc x\ntz x\nhalt\n").expect("static text")
}

fn reduction() -> Result<(bool, String), String> {
    let caps = Caps::with_counter_cap(13);
    let mut parts = Vec::new();
    let mut pass = true;

    // positive: M's own run, lifted through the tower amplifier's run
    let m1 = reduction_example_positive();
    let m1_runs = explore(&m1, 6, &Caps::default()).map_err(err)?;
    let m1_run = drive(&m1, 6, &Schedule::new(), u64::MAX - 1)
        .map_err(err)?
        .ok_or("M1 has no driven run")?;
    let red1 = hardness_reduction(&m1, 1).map_err(err)?;
    let c = 1 + 2 * m1.count_tests() as u64;
    let amp = tower_amplifier(1);
    let amp_run = tower_run(1, c).ok_or("no tower(1) run")?;
    let lifted = lift_trace(&amp, &amp_run, &m1, &m1_run, 6).map_err(err)?;
    let explorer_ok = lifted.verify(&red1, 1).is_ok();
    let v1 = to_vass(&red1).map_err(err)?;
    let (vass_ok, net_ok) = match path_from_trace(&v1, &lifted) {
        Ok(path) => {
            let end = replay_path(&v1, &path).map_err(err)?;
            let at_target = end.0 == v1.target && end.1.iter().all(|&x| x == 0);
            let net = to_petri_net(&v1);
            let net_end = net.replay(&path);
            (at_target, net_end.is_ok_and(|m| m == net.target))
        }
        Err(_) => (false, false),
    };
    let pos = m1_runs.has_complete_run() && m1_runs.exact && explorer_ok && vass_ok && net_ok;
    pass &= pos;
    parts.push(format!(
        "M1: 6-run {} (exact); reduction witness of {} steps: explorer replay {}, VASS replay {}, net replay {}",
        yes(m1_runs.has_complete_run()),
        lifted.len(),
        ok(explorer_ok),
        ok(vass_ok),
        ok(net_ok)
    ));

    // negative: no complete run on either side
    let m2 = reduction_example_negative();
    let m2_runs = explore(&m2, 6, &Caps::default()).map_err(err)?;
    let red2 = hardness_reduction(&m2, 1).map_err(err)?;
    let e2 = explore(&red2, 1, &caps).map_err(err)?;
    let (r2, _) = vass_reach(&to_vass(&red2).map_err(err)?, &caps);
    let vass_found = matches!(r2, Reach::Reachable(_));
    let neg = !m2_runs.has_complete_run()
        && m2_runs.exact
        && !e2.has_complete_run()
        && !vass_found;
    pass &= neg;
    parts.push(format!(
        "M2: 6-run {} (exact); reduction: explorer {} ({}), vass_reach {r2}",
        yes(m2_runs.has_complete_run()),
        if e2.has_complete_run() { "found a complete run" } else { "no complete run" },
        if e2.exact { "exact" } else { "within caps" },
    ));
    Ok((pass, parts.join("; ")))
}

fn yes(b: bool) -> &'static str {
    if b {
        "exists"
    } else {
        "absent"
    }
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "FAILED"
    }
}

fn refined() -> Result<(bool, String), String> {
    let mut pass = true;
    let mut parts = Vec::new();

    let t = Instant::now();
    let mut census_ok = true;
    for h in [0usize, 1, 2, 5] {
        let a = refined_amplifier(h, 3).map_err(err)?;
        let c = counter_census(&a.program);
        census_ok &= c.total == h + 13 && c.halt_list == h + 1 && c.tested == 0;
    }
    census_ok &= t.elapsed() < Duration::from_secs(1);
    pass &= census_ok;
    parts.push(format!("census h in {{0,1,2,5}}: {}", ok(census_ok)));

    let r02 = refined_amplifier(0, 2).map_err(err)?;
    let (got, _) = amp_relation(&r02, 1, 10)?;
    let want = tuples((1..=4).map(|c| vec![2, c, 2 * c]));
    let rel_ok = got == want;
    pass &= rel_ok;
    parts.push(format!("(0,2) relation at cap 10 = {}, expected {}", show(&got), show(&want)));

    let halt = r02.program.len();
    let zeros = forced_zero_counters(0);
    let probe = Probe::new(
        "forced zero",
        ProbePoint::Line(halt),
        ProbeScope::CompleteRuns,
        move |v| zeros.iter().all(|z| v.get(z.as_str()) == 0),
    );
    let rep = check_probes(&r02.program, 1, &[probe], &[], &Caps::with_counter_cap(10)).map_err(err)?;
    let fz_ok = rep.all_hold() && rep.outcomes[0].checks > 0;
    pass &= fz_ok;
    parts.push(format!(
        "forced-zero probe: {} checks, {}",
        rep.outcomes[0].checks,
        if rep.all_hold() { "no violation" } else { "VIOLATED" }
    ));

    let r03 = refined_amplifier(0, 3).map_err(err)?;
    let generic = compose_amplifiers(&trivial_amplifier(3).map_err(err)?, &factorial_amplifier())
        .map_err(err)?;
    let caps = Caps::with_counter_cap(13);
    let e_ref = explore(&r03.program, 1, &caps).map_err(err)?;
    let e_gen = explore(&generic.program, 1, &caps).map_err(err)?;
    let a = relation_of(&e_ref, &r03.outs()).map_err(err)?;
    let b = relation_of(&e_gen, &generic.outs()).map_err(err)?;
    let diff_ok = a.tuples == b.tuples;
    pass &= diff_ok;
    parts.push(format!(
        "(0,3) vs generic chain at cap 13: {} vs {}",
        show(&a.tuples),
        show(&b.tuples)
    ));
    Ok((pass, parts.join("; ")))
}

/// Programs without tested counters used for the oracle agreement check.
pub fn translation_gadgets() -> Result<Vec<(String, Program)>, String> {
    let mut out = vec![("counting_loop(2)".to_string(), counting_loop(2).map_err(err)?)];
    for r in 1..=3 {
        out.push((format!("trivial_amplifier({r})"), trivial_amplifier(r).map_err(err)?.program));
    }
    for n in 0..=1 {
        out.push((format!("tower_amplifier({n})"), tower_amplifier(n).program));
    }
    for n in 2..=3 {
        out.push((format!("refined_amplifier(0,{n})"), refined_amplifier(0, n).map_err(err)?.program));
    }
    out.push((
        "hardness_reduction(M2,1)".to_string(),
        hardness_reduction(&reduction_example_negative(), 1).map_err(err)?,
    ));
    Ok(out)
}

/// Explorer and VASS search agree on complete-run existence, and any VASS
/// witness replays on the Petri net.
pub fn oracles_agree(p: &Program, caps: &Caps) -> Result<bool, String> {
    let e = explore(p, 1, caps).map_err(err)?;
    let v = to_vass(p).map_err(err)?;
    let (r, _) = vass_reach(&v, caps);
    let replay_ok = match &r {
        Reach::Reachable(path) => {
            let net = to_petri_net(&v);
            net.replay(path).is_ok_and(|m| m == net.target)
        }
        _ => true,
    };
    Ok(e.has_complete_run() == matches!(r, Reach::Reachable(_)) && replay_ok)
}

fn vass_round_trips(v: &Vass) -> bool {
    parse_vass_text(&export_vass_text(v)).is_ok_and(|w| &w == v)
}

fn translate() -> Result<(bool, String), String> {
    let caps = Caps {
        state_cap: 2_000_000,
        ..Caps::with_counter_cap(8)
    };
    let gadgets = translation_gadgets()?;
    let mut gadget_ok = 0;
    let mut pnml_ok = 0;
    let mut bad = Vec::new();
    for (name, p) in &gadgets {
        if oracles_agree(p, &caps)? {
            gadget_ok += 1;
        } else {
            bad.push(name.clone());
        }
        let v = to_vass(p).map_err(err)?;
        if check_pnml(&export_pnml(&to_petri_net(&v), name)).is_ok() && vass_round_trips(&v) {
            pnml_ok += 1;
        }
    }

    let shape = RandomShape {
        max_commands: 12,
        testable: Vec::new(),
        plain: names(&["x", "y", "z"]),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let randoms: Vec<Program> = (0..200).map(|_| random_program(&mut rng, &shape)).collect();
    let small = Caps {
        state_cap: 200_000,
        ..Caps::with_counter_cap(6)
    };
    let agree: Vec<bool> = randoms
        .par_iter()
        .map(|p| oracles_agree(p, &small).unwrap_or(false))
        .collect();
    let random_ok = agree.iter().filter(|&&b| b).count();
    let reachable = randoms
        .iter()
        .filter(|p| explore(p, 1, &small).is_ok_and(|e| e.has_complete_run()))
        .count();
    let random_pnml = randoms
        .iter()
        .filter(|p| {
            to_vass(p).is_ok_and(|v| {
                check_pnml(&export_pnml(&to_petri_net(&v), "random")).is_ok() && vass_round_trips(&v)
            })
        })
        .count();

    let mut golden_ok = 0;
    for (name, want) in GOLDEN_VASS {
        let p = golden_program(name).ok_or("unknown golden program")?;
        if export_vass_text(&to_vass(&p).map_err(err)?) == *want {
            golden_ok += 1;
        }
    }

    let pass = gadget_ok == gadgets.len()
        && random_ok == randoms.len()
        && pnml_ok == gadgets.len()
        && random_pnml == randoms.len()
        && golden_ok == GOLDEN_VASS.len();
    Ok((
        pass,
        format!(
            "gadgets {gadget_ok}/{}{}; random {random_ok}/{} ({reachable} reachable); PNML grammar and .vass round trip {}/{}; golden .vass {golden_ok}/{}",
            gadgets.len(),
            if bad.is_empty() { String::new() } else { format!(" (disagree: {})", bad.join(", ")) },
            randoms.len(),
            pnml_ok + random_pnml,
            gadgets.len() + randoms.len(),
            GOLDEN_VASS.len()
        ),
    ))
}
