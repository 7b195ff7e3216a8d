use std::collections::BTreeSet;

use proptest::prelude::*;

use towerforge::compose::compose;
use towerforge::gadgets::{counting_loop, factorial_amplifier, program_e, trivial_amplifier};
use towerforge::ir::{classify_counters, rename_apart, validate, Command, CounterId, Program};
use towerforge::parser::{parse, print};
use towerforge::semantics::{computed_relation, explore, successors, Caps, Configuration};
use towerforge::suites::{oracles_agree, composition_sides, reduction_example_negative, reduction_example_positive};
use towerforge::tower::{hardness_reduction, refined_amplifier, refined_reduction, tower_amplifier};

fn cid(s: &str) -> CounterId {
    CounterId::new(s)
}

#[derive(Clone, Debug)]
enum Op {
    Inc(usize),
    Dec(usize),
    Goto(usize, usize),
    Tz(usize),
    Tm(usize),
}

/// Programs of at most `max` commands over `testable ++ plain`; tests only
/// name counters in `testable`.
fn programs(max: usize, testable: &'static [&'static str], plain: &'static [&'static str]) -> impl Strategy<Value = Program> {
    let k = testable.len() + plain.len();
    let t = testable.len();
    (1..=max).prop_flat_map(move |n| {
        let mut op = prop_oneof![
            (0..k).prop_map(Op::Inc),
            (0..k).prop_map(Op::Dec),
            (1..=n, 1..=n).prop_map(|(a, b)| Op::Goto(a, b)),
        ]
        .boxed();
        if t > 0 {
            op = prop_oneof![3 => op, 1 => (0..t).prop_map(Op::Tz), 1 => (0..t).prop_map(Op::Tm)].boxed();
        }
        (proptest::collection::vec(op, n - 1), proptest::collection::vec(any::<bool>(), k))
    })
    .prop_map(move |(ops, listed)| {
        let name = |i: usize| cid(if i < testable.len() { testable[i] } else { plain[i - testable.len()] });
        let mut cmds: Vec<Command> = ops
            .into_iter()
            .map(|o| match o {
                Op::Inc(i) => Command::Inc(name(i)),
                Op::Dec(i) => Command::Dec(name(i)),
                Op::Goto(a, b) => Command::Goto(a, b),
                Op::Tz(i) => Command::TestZero(name(i)),
                Op::Tm(i) => Command::TestMax(name(i)),
            })
            .collect();
        let used: BTreeSet<CounterId> = cmds.iter().filter_map(|c| c.counter().cloned()).collect();
        let halt = used
            .into_iter()
            .zip(listed.iter().cycle())
            .filter(|(_, &l)| l)
            .map(|(c, _)| c)
            .collect();
        cmds.push(Command::Halt(halt));
        Program::new(cmds)
    })
}

/// The successor relation written out once more, straight from the command
/// descriptions.
fn reference_successors(c: &Configuration, p: &Program, bound: u64) -> Vec<Configuration> {
    let tested = classify_counters(p).tested;
    let names = p.counters();
    let at = |x: &CounterId| names.iter().position(|n| n == x).unwrap();
    let with = |line: usize, f: &dyn Fn(&mut Vec<u64>)| {
        let mut values = c.values.clone();
        f(&mut values);
        Configuration { line, values }
    };
    match p.command(c.line).unwrap() {
        Command::Inc(x) => {
            let v = c.values[at(x)];
            if tested.contains(x) && v >= bound {
                vec![]
            } else {
                vec![with(c.line + 1, &|vs| vs[at(x)] += 1)]
            }
        }
        Command::Dec(x) if c.values[at(x)] > 0 => vec![with(c.line + 1, &|vs| vs[at(x)] -= 1)],
        Command::Dec(_) => vec![],
        Command::Goto(a, b) if a == b => vec![with(*a, &|_| ())],
        Command::Goto(a, b) => vec![with(*a, &|_| ()), with(*b, &|_| ())],
        Command::TestZero(x) if c.values[at(x)] == 0 => vec![with(c.line + 1, &|_| ())],
        Command::TestMax(x) if c.values[at(x)] == bound => vec![with(c.line + 1, &|_| ())],
        Command::TestZero(_) | Command::TestMax(_) | Command::Halt(_) => vec![],
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn parse_print_round_trip(p in programs(10, &["x", "y"], &["z", "x'", "d#1"])) {
        prop_assert!(validate(&p).is_ok());
        prop_assert_eq!(parse(&print(&p)).unwrap(), p);
    }

    #[test]
    fn successors_match_the_reference(
        p in programs(8, &["x", "y"], &["z"]),
        line in 1usize..8,
        vals in proptest::collection::vec(0u64..4, 3),
        bound in 1u64..4,
    ) {
        let line = line.min(p.len());
        let tested = classify_counters(&p).tested;
        let names = p.counters();
        let values: Vec<u64> = names
            .iter()
            .zip(vals.iter().cycle())
            .map(|(n, &v)| if tested.contains(n) { v.min(bound) } else { v })
            .collect();
        let c = Configuration { line, values };
        let mut got = successors(&c, &p, bound).unwrap();
        let mut want = reference_successors(&c, &p, bound);
        got.sort_by_key(|s| (s.line, s.values.clone()));
        want.sort_by_key(|s| (s.line, s.values.clone()));
        prop_assert_eq!(&got, &want);
        for s in &got {
            for (n, &v) in names.iter().zip(&s.values) {
                prop_assert!(!tested.contains(n) || v <= bound);
            }
        }
    }

    #[test]
    fn composition_preserves_final_valuations(
        p in programs(8, &["x", "y"], &["z"]),
        r in 2u64..=3,
    ) {
        let (lhs, rhs) = composition_sides(&p, r, 16).unwrap();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn explorer_and_vass_search_agree(p in programs(12, &[], &["x", "y", "z"])) {
        let caps = Caps { state_cap: 200_000, ..Caps::with_counter_cap(6) };
        prop_assert!(oracles_agree(&p, &caps).unwrap());
    }

    #[test]
    fn larger_caps_keep_tuples(p in programs(8, &["x"], &["y", "z"]), cap in 2u64..8, extra in 1u64..4) {
        let ns = p.counters();
        let small = computed_relation(&p, 2, &ns, &Caps::with_counter_cap(cap)).unwrap();
        let large = computed_relation(&p, 2, &ns, &Caps::with_counter_cap(cap + extra)).unwrap();
        prop_assert!(small.tuples.is_subset(&large.tuples));
        if small.exact {
            prop_assert_eq!(&small.tuples, &large.tuples);
        }
    }

    #[test]
    fn exploration_is_deterministic(p in programs(8, &["x"], &["y", "z"])) {
        let caps = Caps::with_counter_cap(6);
        let a = explore(&p, 2, &caps).unwrap();
        let b = explore(&p, 2, &caps).unwrap();
        prop_assert_eq!(a.finals, b.finals);
        prop_assert_eq!(a.stats, b.stats);
    }

    #[test]
    fn renaming_apart_is_disjoint_and_faithful(
        a in programs(6, &["x"], &["b", "c"]),
        b in programs(6, &["x", "y"], &["c", "c#1"]),
    ) {
        let (renamed, map) = rename_apart(&a, &b);
        let left: BTreeSet<CounterId> = a.counters().into_iter().collect();
        let right: BTreeSet<CounterId> = renamed.counters().into_iter().collect();
        prop_assert!(left.is_disjoint(&right));
        prop_assert_eq!(renamed.len(), b.len());
        for (x, y) in b.commands().iter().zip(renamed.commands()) {
            match (x, y) {
                (Command::Inc(u), Command::Inc(v))
                | (Command::Dec(u), Command::Dec(v))
                | (Command::TestZero(u), Command::TestZero(v))
                | (Command::TestMax(u), Command::TestMax(v)) => {
                    prop_assert_eq!(map.get(u).unwrap_or(u), v);
                }
                (Command::Goto(p1, q1), Command::Goto(p2, q2)) => prop_assert_eq!((p1, q1), (p2, q2)),
                (Command::Halt(u), Command::Halt(v)) => prop_assert_eq!(u.len(), v.len()),
                _ => prop_assert!(false, "command kinds differ"),
            }
        }
    }
}

/// Every command of every generated program changes at most one counter,
/// by exactly one, which is what makes the cap check exact.
#[test]
fn generated_programs_take_unit_steps() {
    let mut progs: Vec<Program> = vec![
        counting_loop(3).unwrap(),
        program_e(),
        factorial_amplifier().program,
        hardness_reduction(&reduction_example_positive(), 1).unwrap(),
        hardness_reduction(&reduction_example_negative(), 2).unwrap(),
    ];
    progs.extend((1..=4).map(|r| trivial_amplifier(r).unwrap().program));
    progs.extend((0..=3).map(|n| tower_amplifier(n).program));
    for h in 0..=3 {
        progs.push(refined_amplifier(h, 3).unwrap().program);
    }
    let m = parse("inc x\ntm x\ndec x\ninc y\ntz y\ntz x\nhalt y\n").unwrap();
    progs.push(refined_reduction(&m, 1, 3).unwrap());
    progs.push(compose(&trivial_amplifier(2).unwrap(), &m).unwrap());
    for p in &progs {
        let names = p.counters();
        for line in 1..=p.len() {
            let c = Configuration {
                line,
                values: vec![1; names.len()],
            };
            for s in successors(&c, p, 2).unwrap() {
                let moved: Vec<u64> = c
                    .values
                    .iter()
                    .zip(&s.values)
                    .map(|(a, b)| a.abs_diff(*b))
                    .collect();
                assert!(moved.iter().sum::<u64>() <= 1, "line {line} moves {moved:?}");
            }
        }
    }
}

#[test]
fn compositions_end_with_spent_amplifier() {
    // complete runs of A ▷ P finish with b and c at zero
    use towerforge::semantics::{check_probes, Probe, ProbePoint, ProbeScope};
    let p = parse("inc x\ninc x\ntm x\ndec x\ndec x\ntz x\nhalt\n").unwrap();
    let composed = compose(&trivial_amplifier(2).unwrap(), &p).unwrap();
    let probe = Probe::new("b=c=0", ProbePoint::Line(composed.len()), ProbeScope::CompleteRuns, |v| {
        v.get("b") == 0 && v.get("c") == 0
    });
    let r = check_probes(&composed, 1, &[probe], &[], &Caps::with_counter_cap(16)).unwrap();
    assert!(r.complete_runs);
    assert!(r.all_hold());
    assert!(classify_counters(&composed).tested.is_empty());
}
