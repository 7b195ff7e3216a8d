//! Tower amplifiers, the hardness reduction, and the hand-optimized
//! amplifier with `h + 13` counters.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::compose::{compose, compose_amplifiers, compose_reusing, lift_trace, ComposeError};
use crate::gadgets::{factorial_amplifier, trivial_amplifier, Amplifier, BoundNote, RatioExpr};
use crate::ir::{
    classify_counters, splice, tested_in_order, CounterId, Fragment, FragmentCommand, Program,
};
use crate::macros::{add_const, loop_at_most, loop_block, seq, steps};
use crate::semantics::{drive, Schedule, Trace};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TowerError {
    #[error("counters {0:?} are untested; the reduction needs every counter tested")]
    Untested(Vec<CounterId>),
    #[error("{0} tested counters; at most 3 can reuse amplifier counters")]
    TooManyTested(usize),
    #[error("n must be at least 1")]
    ZeroBase,
    #[error(transparent)]
    Compose(#[from] ComposeError),
}

/// Amplifier by `3!^n` (factorial iterated `n` times on 3), with no tested
/// counters.
pub fn tower_amplifier(n: u32) -> Amplifier {
    let f = factorial_amplifier();
    let mut t = trivial_amplifier(3).expect("3 is a valid ratio");
    for _ in 0..n {
        t = compose_amplifiers(&t, &f).expect("F's outputs are untested");
    }
    t
}

fn require_all_tested(m: &Program) -> Result<(), TowerError> {
    let untested = classify_counters(m).untested;
    if untested.is_empty() {
        Ok(())
    } else {
        Err(TowerError::Untested(untested.into_iter().collect()))
    }
}

/// `tower_amplifier(n) ▷ M`: has a complete run iff `M` has a complete
/// `3!^n`-run.
pub fn hardness_reduction(m: &Program, n: u32) -> Result<Program, TowerError> {
    require_all_tested(m)?;
    Ok(compose(&tower_amplifier(n), m)?)
}

/// A complete run of `tower_amplifier(n)` whose output `c` is `c`, built
/// from runs of the parts and lifted through each composition. `None` if
/// a part has no such run or the numbers leave 64 bits.
pub fn tower_run(n: u32, c: u64) -> Option<Trace> {
    if c == 0 {
        return None;
    }
    let t3 = trivial_amplifier(3).expect("3 is a valid ratio");
    if n == 0 {
        let sched = Schedule::new().fix(&t3.program, "amp_loop", c - 1).ok()?;
        return drive(&t3.program, 1, &sched, u64::MAX - 1).ok()?;
    }
    let inner = tower_amplifier(n - 1);
    let bound = inner.ratio.eval_u64(None)?;
    let f = factorial_amplifier();
    // F's output c is y / (B-1)!.
    let fact = (1..bound).try_fold(1u64, |acc, k| acc.checked_mul(k))?;
    let y = c.checked_mul(fact)?;
    let sched = Schedule::new().fix(&f.program, "init_loop", y - 1).ok()?;
    let f_run = drive(&f.program, bound, &sched, u64::MAX - 1).ok()??;
    let tests = f_run
        .lines
        .iter()
        .filter(|&&l| f.program.command(l as usize).is_some_and(|cmd| cmd.is_test()))
        .count() as u64;
    let inner_run = tower_run(n - 1, 1 + 2 * tests)?;
    lift_trace(&inner, &inner_run, &f.program, &f_run, bound).ok()
}

/// Counters of the refined amplifier that hold no ratio and are reused.
struct Work {
    i: CounterId,
    i_hat: CounterId,
    i1: CounterId,
    b1: CounterId,
    c1: CounterId,
    d1: CounterId,
    x: CounterId,
    y: CounterId,
}

impl Work {
    fn new() -> Self {
        let c = CounterId::new;
        Work {
            i: c("i"),
            i_hat: c("i_hat"),
            i1: c("i'"),
            b1: c("b'"),
            c1: c("c'"),
            d1: c("d'"),
            x: c("x"),
            y: c("y"),
        }
    }
}

/// The pair spent by every simulated test inside stage `j`: one unit of
/// `c_{(j-1) mod 2}` and `n` units of `d_{j-1}` per check.
struct Audit<'a> {
    c: &'a CounterId,
    d: &'a CounterId,
}

impl Audit<'_> {
    /// `loop { ops; dec d }`.
    fn paid_loop(&self, ops: &[(&CounterId, i8)]) -> Fragment {
        let mut body = steps(ops);
        body.dec(self.d);
        loop_block(body)
    }

    /// Succinct `sub x i` (with `inc x` in place of `dec x` when `add`):
    /// transfers `i` to `i'`, checks `i = 0` through `i_hat`, and moves
    /// `i'` back.
    fn transfer_via(&self, w: &Work, x: &CounterId, dir: i8) -> Fragment {
        let mut f = self.paid_loop(&[(&w.i, -1), (&w.i1, 1), (x, dir)]);
        f.append(self.paid_loop(&[(&w.i_hat, -1), (&w.i, 1)]));
        f.dec(self.c);
        f.append(self.paid_loop(&[(&w.i, -1), (&w.i_hat, 1)]));
        f.append(self.paid_loop(&[(&w.i1, -1), (&w.i, 1)]));
        f.dec(self.c);
        f
    }

    fn sub(&self, w: &Work, x: &CounterId) -> Fragment {
        self.transfer_via(w, x, -1)
    }

    fn add_plus_one(&self, w: &Work, x: &CounterId) -> Fragment {
        let mut f = Fragment::new();
        f.inc(x);
        f.then(self.transfer_via(w, x, 1))
    }

    fn setup(&self, w: &Work, b: &CounterId) -> Fragment {
        let mut f = self.paid_loop(&[(&w.i_hat, 1), (b, -1)]);
        f.dec(self.c);
        f
    }

    fn ismax(&self, w: &Work) -> Fragment {
        let mut f = self.paid_loop(&[(&w.i, -1), (&w.i1, 1)]);
        f.dec(self.c);
        f.append(self.paid_loop(&[(&w.i, 1), (&w.i1, -1)]));
        f.dec(self.c);
        f
    }

    fn reset(&self, w: &Work) -> Fragment {
        let mut f = self.paid_loop(&[(&w.i, -1)]);
        f.dec(self.c);
        f
    }
}

fn anchored(name: String, f: Fragment) -> Fragment {
    let mut a = Fragment::new();
    a.anchor_here(name);
    a.then(f)
}

/// Stage `j >= 1`: a factorial amplifier whose tests are paid from the
/// ratio pair `(c_{(j-1) mod 2}, d_{j-1})` of the previous stage.
fn stage(j: usize, w: &Work, b: &CounterId, cs: &[CounterId; 2], ds: &[CounterId]) -> Fragment {
    let audit = Audit {
        c: &cs[(j - 1) % 2],
        d: &ds[j - 1],
    };
    let cq = &cs[j % 2];
    let dj = &ds[j];
    let dprev = &ds[j - 1];

    let upper = loop_block(seq([
        audit.sub(w, cq),
        steps(&[(&w.c1, 1)]),
        loop_at_most(
            b,
            &w.b1,
            seq([audit.sub(w, dj), audit.sub(w, &w.x), audit.add_plus_one(w, &w.d1)]),
        ),
    ]));
    let bu = loop_block(seq([steps(&[(b, -1)]), audit.add_plus_one(w, &w.b1)]));
    let bl = loop_block(steps(&[(&w.b1, -1), (b, 1)]));
    let lower = loop_block(seq([
        steps(&[(&w.c1, -1), (cq, 1)]),
        loop_at_most(b, &w.b1, steps(&[(&w.d1, -1), (dj, 1), (&w.x, 1)])),
    ]));
    let main = loop_block(seq([upper, bu, bl, lower, steps(&[(&w.i, 1), (&w.i_hat, -1)])]));
    let mut final_body = audit.sub(w, &w.x);
    final_body.dec(&w.y).dec(dprev);

    seq([
        anchored(format!("stage{j}"), audit.setup(w, b)),
        steps(&[(&w.i, 1), (&w.i_hat, -1)]),
        steps(&[(b, 1), (cq, 1), (dj, 1), (&w.x, 1), (&w.y, 1), (dprev, 1)]),
        anchored(
            format!("stage{j}_init"),
            loop_block(steps(&[(cq, 1), (dj, 1), (&w.x, 1), (&w.y, 1), (dprev, 1)])),
        ),
        anchored(format!("stage{j}_main"), main),
        anchored(format!("stage{j}_ismax"), audit.ismax(w)),
        anchored(format!("stage{j}_final"), loop_block(final_body)),
        anchored(format!("stage{j}_reset"), audit.reset(w)),
    ])
}

/// Amplifier by `n!^(h+1)` (factorial iterated `h + 1` times on `n`) with
/// `h + 13` counters, none tested, and `h + 1` of them in the halt.
pub fn refined_amplifier(h: usize, n: u64) -> Result<Amplifier, TowerError> {
    if n == 0 {
        return Err(TowerError::ZeroBase);
    }
    let w = Work::new();
    let b = CounterId::new("b");
    let cs = [CounterId::new("c0"), CounterId::new("c1")];
    let ds: Vec<CounterId> = (0..=h + 1).map(|k| CounterId::new(format!("d{k}"))).collect();

    let mut prefix = add_const(&b, n);
    prefix.inc(&cs[0]);
    prefix.append(add_const(&ds[0], n));
    let mut step = Fragment::new();
    step.inc(&cs[0]);
    prefix.append(anchored("amp_loop".into(), loop_block(step.then(add_const(&ds[0], n)))));

    let mut parts = vec![prefix];
    for j in 1..=h + 1 {
        parts.push(stage(j, &w, &b, &cs, &ds));
    }
    parts.push(Fragment::from_commands(vec![FragmentCommand::Halt(
        ds[..=h].to_vec(),
    )]));
    let program = splice(parts).expect("static layout");
    Ok(Amplifier {
        program,
        out_b: b,
        out_c: cs[(h + 1) % 2].clone(),
        out_d: ds[h + 1].clone(),
        ratio: RatioExpr::IterFactorial {
            base: n,
            iterations: h as u32 + 1,
        },
        bound_note: BoundNote::Any,
    })
}

/// The nine counters outside the halt list that every complete run of
/// `refined_amplifier(h, _)` leaves at zero.
pub fn forced_zero_counters(h: usize) -> Vec<CounterId> {
    let w = Work::new();
    vec![
        CounterId::new(format!("c{}", h % 2)),
        w.i,
        w.i_hat,
        w.i1,
        w.b1,
        w.c1,
        w.d1,
        w.x,
        w.y,
    ]
}

/// Amplifier counters taken over by the tested counters of `M` (first,
/// second, third in order of appearance) and by their complements.
pub fn reuse_slots() -> [(CounterId, CounterId); 3] {
    let w = Work::new();
    [(w.i, w.i_hat), (w.i1, w.b1), (w.c1, w.d1)]
}

/// `refined_amplifier(h, n) ▷ M` for `M` with at most three counters, all
/// tested, placing them and their complements on six amplifier counters
/// that are zero once the amplifier part is done. The result has
/// `h + 13` counters.
///
/// The placement is recorded as landmarks `reuse:<x>-><slot>` and
/// `reuse:<x>_hat-><slot>` at the start of the simulated code.
pub fn refined_reduction(m: &Program, h: usize, n: u64) -> Result<Program, TowerError> {
    require_all_tested(m)?;
    let tested = tested_in_order(m);
    if tested.len() > 3 {
        return Err(TowerError::TooManyTested(tested.len()));
    }
    let t = refined_amplifier(h, n)?;
    let slots = reuse_slots();
    let mut rename = std::collections::HashMap::new();
    let mut hats = BTreeMap::new();
    for (x, (orig, hat)) in tested.iter().zip(slots.iter()) {
        rename.insert(x.clone(), orig.clone());
        hats.insert(orig.clone(), hat.clone());
    }
    let placed = m.rename(&rename);
    let mut out = compose_reusing(&t, &placed, &hats)?;
    let start = out.landmark("sim_setup").expect("compose marks the setup");
    for (x, (orig, hat)) in tested.iter().zip(slots.iter()) {
        out.set_landmark(format!("reuse:{x}->{orig}"), start);
        out.set_landmark(format!("reuse:{x}_hat->{hat}"), start);
    }
    Ok(out)
}

/// Counter and halt-list sizes of a program.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Census {
    pub total: usize,
    pub tested: usize,
    pub untested: usize,
    pub halt_list: usize,
}

impl fmt::Display for Census {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "counters={} halt={}", self.total, self.halt_list)
    }
}

pub fn counter_census(p: &Program) -> Census {
    let k = classify_counters(p);
    let halt: BTreeSet<&CounterId> = p.halt_list().iter().collect();
    Census {
        total: k.tested.len() + k.untested.len(),
        tested: k.tested.len(),
        untested: k.untested.len(),
        halt_list: halt.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse;

    #[test]
    fn census_examples() {
        let f = counter_census(&factorial_amplifier().program);
        assert_eq!((f.total, f.tested), (10, 2));
        let r = refined_amplifier(2, 3).unwrap();
        assert_eq!(counter_census(&r.program).to_string(), "counters=15 halt=3");
        assert_eq!(counter_census(&parse("halt").unwrap()).total, 0);
    }

    #[test]
    fn refined_counts() {
        for h in [0, 1, 2, 5] {
            let a = refined_amplifier(h, 3).unwrap();
            let c = counter_census(&a.program);
            assert_eq!((c.total, c.tested, c.halt_list), (h + 13, 0, h + 1), "h={h}");
            let names = a.program.counters();
            for z in forced_zero_counters(h) {
                assert!(names.contains(&z));
                assert!(!a.program.halt_list().contains(&z));
            }
        }
        assert_eq!(refined_amplifier(0, 0), Err(TowerError::ZeroBase));
    }

    #[test]
    fn tower_ratios_and_shape() {
        assert_eq!(tower_amplifier(0), trivial_amplifier(3).unwrap());
        let t1 = tower_amplifier(1);
        assert_eq!(t1.ratio.eval_u64(None), Some(6));
        assert_eq!(tower_amplifier(2).ratio.eval_u64(None), Some(720));
        let t3 = tower_amplifier(3);
        assert_eq!(t3.ratio.to_string(), "3!^3");
        assert_eq!(t3.ratio.eval(None).unwrap().to_string().len(), 1747);
        assert!(classify_counters(&t3.program).tested.is_empty());
    }

    #[test]
    fn tower_size_is_affine() {
        let sizes: Vec<usize> = (0..6).map(|n| tower_amplifier(n).program.len()).collect();
        let step = sizes[1] - sizes[0];
        for w in sizes.windows(2) {
            assert_eq!(w[1] - w[0], step);
        }
    }

    #[test]
    fn reduction_rejects_untested() {
        let m = parse("inc x\nhalt").unwrap();
        assert!(matches!(hardness_reduction(&m, 1), Err(TowerError::Untested(_))));
        let m = parse("tz a\ntz b\ntz c\ntz e\nhalt").unwrap();
        assert_eq!(refined_reduction(&m, 0, 2), Err(TowerError::TooManyTested(4)));
    }

    #[test]
    fn refined_reduction_reuses_counters() {
        let m = parse("inc x\ntm x\ndec x\ninc y\ntz y\ntz x\nhalt y").unwrap();
        for h in [0, 1, 3] {
            let r = refined_reduction(&m, h, 2).unwrap();
            let c = counter_census(&r);
            assert!(c.total <= h + 13, "h={h}: {c:?}");
            assert_eq!(c.tested, 0);
            assert!(r.landmark("reuse:x->i").is_some());
            assert!(r.landmark("reuse:y_hat->b'").is_some());
        }
    }

    #[test]
    fn tower_one_runs_exist() {
        let t = tower_amplifier(1);
        let idx = crate::semantics::CounterIndex::of(&t.program);
        for c in [1, 2] {
            let run = tower_run(1, c).unwrap();
            let fin = run.verify(&t.program, 1).unwrap();
            let outs: Vec<u64> = t.outs().iter().map(|o| fin[idx.position(o.as_str()).unwrap()]).collect();
            assert_eq!(outs, vec![6, c, 6 * c]);
        }
    }
}
