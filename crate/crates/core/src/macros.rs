//! Fragment builders for the fixed macro set used by the gadgets.
//!
//! Every builder expands to unit-step commands (one counter, by one) plus
//! gotos and tests. The order of commands inside an expansion matters for
//! blocking.

use crate::ir::{CounterId, Fragment, FragmentCommand, Jump};

/// `m` consecutive increments of `x`.
pub fn add_const(x: &CounterId, m: u64) -> Fragment {
    let mut f = Fragment::new();
    for _ in 0..m {
        f.inc(x);
    }
    f
}

/// `m` consecutive decrements of `x`.
pub fn sub_const(x: &CounterId, m: u64) -> Fragment {
    let mut f = Fragment::new();
    for _ in 0..m {
        f.dec(x);
    }
    f
}

/// `if x = 0 then goto L else dec x`:
///
/// ```text
/// 1: goto 2 4
/// 2: tz x
/// 3: goto L
/// 4: dec x
/// ```
pub fn branch_if_zero_else_dec(x: &CounterId, target: &str) -> Fragment {
    let anchor = || Jump::Anchor(target.to_string());
    Fragment::from_commands(vec![
        FragmentCommand::Goto(Jump::Rel(1), Jump::Rel(3)),
        FragmentCommand::TestZero(x.clone()),
        FragmentCommand::Goto(anchor(), anchor()),
        FragmentCommand::Dec(x.clone()),
    ])
}

/// Nondeterministic loop: a header choosing exit or body, the body, and a
/// jump back to the header. Anchors inside `body` are kept (shifted by one).
pub fn loop_block(body: Fragment) -> Fragment {
    let n = body.len() as isize;
    let mut f = Fragment::from_commands(vec![FragmentCommand::Goto(
        Jump::Rel(n + 2),
        Jump::Rel(1),
    )]);
    f.append(body);
    f.push(FragmentCommand::Goto(Jump::Rel(-(n + 1)), Jump::Rel(-(n + 1))));
    f
}

/// `sub x i`, subtracting the current value of the tested counter `i` via
/// the auxiliary `i_aux` (zero at entry and at exit).
pub fn sub_var(x: &CounterId, i: &CounterId, i_aux: &CounterId) -> Fragment {
    let mut transfer = Fragment::new();
    transfer.dec(i).inc(i_aux).dec(x);
    restore_after(loop_block(transfer), i, i_aux)
}

/// `add x i+1`: as [`sub_var`] but adding, with one leading increment.
pub fn add_var_plus_one(x: &CounterId, i: &CounterId, i_aux: &CounterId) -> Fragment {
    let mut transfer = Fragment::new();
    transfer.dec(i).inc(i_aux).inc(x);
    let mut f = Fragment::new();
    f.inc(x);
    f.then(restore_after(loop_block(transfer), i, i_aux))
}

fn restore_after(first_loop: Fragment, i: &CounterId, i_aux: &CounterId) -> Fragment {
    let mut back = Fragment::new();
    back.dec(i_aux).inc(i);
    let mut f = first_loop;
    f.push(FragmentCommand::TestZero(i.clone()));
    f.append(loop_block(back));
    f.push(FragmentCommand::TestZero(i_aux.clone()));
    f
}

/// `loop at most b times <body>`: moves `b` to `b_aux`, then each pass
/// moves one unit back and runs the body. `b_aux` must be zero at entry.
pub fn loop_at_most(b: &CounterId, b_aux: &CounterId, body: Fragment) -> Fragment {
    let mut out = Fragment::new();
    out.dec(b).inc(b_aux);
    let mut back = Fragment::new();
    back.dec(b_aux).inc(b);
    back.append(body);
    loop_block(out).then(loop_block(back))
}

/// Concatenation helper.
pub fn seq(parts: impl IntoIterator<Item = Fragment>) -> Fragment {
    let mut f = Fragment::new();
    for p in parts {
        f.append(p);
    }
    f
}

/// Straight-line increments and decrements, e.g. `steps(&[(&x, 1), (&y, -1)])`.
pub fn steps(ops: &[(&CounterId, i8)]) -> Fragment {
    let mut f = Fragment::new();
    for (x, d) in ops {
        match d {
            1 => f.inc(x),
            -1 => f.dec(x),
            _ => panic!("unit steps only"),
        };
    }
    f
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{splice, Command, Program};
    use crate::semantics::{explore, Caps};

    fn c(s: &str) -> CounterId {
        CounterId::new(s)
    }

    fn halt(zs: &[&str]) -> Fragment {
        Fragment::from_commands(vec![FragmentCommand::Halt(zs.iter().map(|s| c(s)).collect())])
    }

    /// Prefix setting each counter to a value, followed by the fragment under test.
    fn harness(init: &[(&str, u64)], body: Fragment, tail: Fragment) -> Program {
        let mut parts: Vec<Fragment> = init.iter().map(|(x, v)| add_const(&c(x), *v)).collect();
        parts.push(body);
        parts.push(tail);
        splice(parts).unwrap()
    }

    fn finals(p: &Program, bound: u64, names: &[&str]) -> Vec<Vec<u64>> {
        let counters: Vec<CounterId> = names.iter().map(|s| c(s)).collect();
        let r = crate::semantics::computed_relation(p, bound, &counters, &Caps::with_counter_cap(16))
            .unwrap();
        r.tuples.into_iter().collect()
    }

    #[test]
    fn add_const_shapes() {
        assert!(add_const(&c("x"), 0).is_empty());
        let f = add_const(&c("b"), 3);
        assert_eq!(f.commands(), vec![FragmentCommand::Inc(c("b")); 3].as_slice());
        let p = harness(&[("x", 1)], sub_const(&c("x"), 2), halt(&[]));
        let r = explore(&p, 1, &Caps::with_counter_cap(8)).unwrap();
        assert!(r.finals.is_empty());
    }

    #[test]
    fn branch_if_zero_else_dec_behaviour() {
        // Zero branch lands on anchor L, which sets a marker counter.
        let build = |x0: u64| {
            let mut branch = branch_if_zero_else_dec(&c("x"), "L");
            // fall-through marks "else"
            branch.inc(&c("else"));
            let mut skip = Fragment::new();
            skip.push(FragmentCommand::Goto(Jump::Rel(2), Jump::Rel(2)));
            let mut target = Fragment::new();
            target.anchor_here("L");
            target.inc(&c("zero"));
            harness(&[("x", x0)], branch.then(skip), target.then(halt(&[])))
        };
        let p = build(0);
        assert_eq!(p.landmark("L"), Some(7));
        assert_eq!(finals(&p, 1, &["x", "zero", "else"]), vec![vec![0, 1, 0]]);
        let p = build(2);
        // else-branch: x decremented, zero marker never set, else marker set
        let got = finals(&p, 3, &["x", "zero", "else"]);
        assert_eq!(got, vec![vec![1, 0, 1]]);
    }

    #[test]
    fn dec_branch_blocks_on_zero() {
        // Force the dec branch: goto 4 4 instead of the choice.
        let p = Program::new(vec![
            Command::Goto(4, 4),
            Command::TestZero(c("x")),
            Command::Goto(5, 5),
            Command::Dec(c("x")),
            Command::Halt(vec![]),
        ]);
        assert!(explore(&p, 1, &Caps::with_counter_cap(4)).unwrap().finals.is_empty());
    }

    #[test]
    fn loop_block_layout_matches_desugaring() {
        let mut body = Fragment::new();
        body.inc(&c("x"));
        let p = splice(vec![loop_block(body), halt(&[])]).unwrap();
        assert_eq!(
            p.commands(),
            &[
                Command::Goto(4, 2),
                Command::Inc(c("x")),
                Command::Goto(1, 1),
                Command::Halt(vec![])
            ]
        );
        let r = crate::semantics::computed_relation(&p, 1, &[c("x")], &Caps::with_counter_cap(5))
            .unwrap();
        assert!(!r.exact);
        assert_eq!(r.tuples.len(), 5);
    }

    #[test]
    fn empty_loop_terminates_exploration() {
        let p = splice(vec![loop_block(Fragment::new()), halt(&[])]).unwrap();
        let r = explore(&p, 1, &Caps::with_counter_cap(4)).unwrap();
        assert!(r.exact);
        assert_eq!(r.finals.len(), 1);
    }

    #[test]
    fn sub_var_cases() {
        let frag = || sub_var(&c("x"), &c("i"), &c("i'"));
        let p = harness(&[("x", 5), ("i", 2)], frag(), halt(&[]));
        assert_eq!(finals(&p, 2, &["x", "i", "i'"]), vec![vec![3, 2, 0]]);
        let p = harness(&[("x", 1), ("i", 2)], frag(), halt(&[]));
        assert!(finals(&p, 2, &["x"]).is_empty());
        let p = harness(&[("x", 4), ("i", 0)], frag(), halt(&[]));
        assert_eq!(finals(&p, 2, &["x", "i"]), vec![vec![4, 0]]);
    }

    #[test]
    fn add_var_plus_one_cases() {
        let frag = || add_var_plus_one(&c("x"), &c("i"), &c("i'"));
        let p = harness(&[("i", 2)], frag(), halt(&[]));
        assert_eq!(finals(&p, 2, &["x", "i", "i'"]), vec![vec![3, 2, 0]]);
        let p = harness(&[("x", 4)], frag(), halt(&[]));
        assert_eq!(finals(&p, 2, &["x", "i"]), vec![vec![5, 0]]);
    }

    #[test]
    fn loop_at_most_cases() {
        let mut body = Fragment::new();
        body.inc(&c("x"));
        let p = harness(&[("b", 3)], loop_at_most(&c("b"), &c("b'"), body.clone()), halt(&["b'"]));
        let got = finals(&p, 1, &["x"]);
        assert_eq!(got, vec![vec![0], vec![1], vec![2], vec![3]]);

        let p = harness(&[], loop_at_most(&c("b"), &c("b'"), body), halt(&[]));
        assert_eq!(finals(&p, 1, &["x"]), vec![vec![0]]);

        let mut blocked = Fragment::new();
        blocked.dec(&c("z"));
        let p = harness(&[("b", 2)], loop_at_most(&c("b"), &c("b'"), blocked), halt(&["b'"]));
        // only the zero-pass run survives, b fully restored
        assert_eq!(finals(&p, 1, &["b", "b'"]), vec![vec![2, 0]]);
    }

    #[test]
    fn every_builder_emits_unit_steps() {
        let x = c("x");
        let frags = [
            add_const(&x, 3),
            sub_const(&x, 2),
            branch_if_zero_else_dec(&x, "L"),
            sub_var(&x, &c("i"), &c("i'")),
            add_var_plus_one(&x, &c("i"), &c("i'")),
            loop_at_most(&c("b"), &c("b'"), add_const(&x, 1)),
        ];
        for f in frags {
            for cmd in f.commands() {
                assert!(matches!(
                    cmd,
                    FragmentCommand::Inc(_)
                        | FragmentCommand::Dec(_)
                        | FragmentCommand::Goto(..)
                        | FragmentCommand::TestZero(_)
                        | FragmentCommand::TestMax(_)
                ));
            }
        }
    }
}
