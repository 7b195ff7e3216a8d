//! Named probe suites: the counter equalities of complete runs of F, the
//! per-iteration inequality that holds on every run of F, and the product
//! check of program E.

use thiserror::Error;

use crate::ir::Program;
use crate::semantics::{Probe, ProbePoint, ProbeScope, Snapshot};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SuiteError {
    #[error("unknown probe suite {0:?} (known: {known})", known = PROBE_SUITES.join(", "))]
    Unknown(String),
    #[error("program lacks landmark {0:?} needed by the suite")]
    MissingLandmark(String),
}

pub const PROBE_SUITES: &[&str] = &["iterations", "growth", "factorial", "program-e"];

pub struct ProbeSuite {
    pub probes: Vec<Probe>,
    pub snapshots: Vec<Snapshot>,
}

/// Builds a named suite against the landmarks of `p` for bound `bound`.
///
/// `iterations` and `growth` expect F's landmarks, `factorial` is both of them,
/// `program-e` expects E's.
pub fn probe_suite(name: &str, p: &Program, bound: u64) -> Result<ProbeSuite, SuiteError> {
    match name {
        "iterations" => iterations(p, bound),
        "growth" => growth(p),
        "factorial" => {
            let mut a = iterations(p, bound)?;
            let b = growth(p)?;
            a.probes.extend(b.probes);
            a.snapshots.extend(b.snapshots);
            Ok(a)
        }
        "program-e" => program_e(p, bound),
        other => Err(SuiteError::Unknown(other.to_string())),
    }
}

fn mark(p: &Program, name: &str) -> Result<usize, SuiteError> {
    p.landmark(name)
        .ok_or_else(|| SuiteError::MissingLandmark(name.to_string()))
}

struct FLines {
    init: usize,
    main: usize,
    start: usize,
    bu: usize,
    mid: usize,
    lower: usize,
    end: usize,
    end_main: usize,
}

fn f_lines(p: &Program) -> Result<FLines, SuiteError> {
    Ok(FLines {
        init: mark(p, "init_loop")?,
        main: mark(p, "main_loop")?,
        start: mark(p, "iter_start")?,
        bu: mark(p, "bu_loop")?,
        mid: mark(p, "iter_mid")?,
        lower: mark(p, "lower_loop")?,
        end: mark(p, "iter_end")?,
        end_main: mark(p, "end_main")?,
    })
}

// registers
const B0: usize = 0;
const C0: usize = 1;
const D0: usize = 2;
const BP_MID: usize = 3;
const CP_MID: usize = 4;
const DP_MID: usize = 5;
const A: usize = 6;

/// Iteration values at its start (the previous iteration's end values),
/// after the `b` transfer (the barred values), and at its end.
fn iterations(p: &Program, bound: u64) -> Result<ProbeSuite, SuiteError> {
    let l = f_lines(p)?;
    let start = ProbePoint::Edge(l.main, l.start);
    let mid = ProbePoint::Edge(l.bu, l.mid);
    let end = ProbePoint::Edge(l.lower, l.end);
    let snapshots = vec![
        Snapshot::new(A, ProbePoint::Edge(l.init, l.main), |v| v.get("c")),
        Snapshot::new(B0, start, |v| v.get("b")),
        Snapshot::new(C0, start, |v| v.get("c")),
        Snapshot::new(D0, start, |v| v.get("d")),
        Snapshot::new(BP_MID, mid, |v| v.get("b'")),
        Snapshot::new(CP_MID, mid, |v| v.get("c'")),
        Snapshot::new(DP_MID, mid, |v| v.get("d'")),
    ];
    let done = ProbeScope::CompleteRuns;
    let fact = |n: u64| (1..=n).product::<u64>();
    let (k_fact, k1_fact) = (fact(bound), fact(bound.saturating_sub(1)));
    let probes = vec![
        Probe::new("first iteration: b=1, c=d=a", start, done, |v| {
            v.get("i") != 1
                || (v.get("b") == 1 && v.get("c") == v.register(A) && v.get("d") == v.register(A))
        }),
        Probe::new("iteration start: b'=c'=d'=0", start, done, |v| {
            v.get("b'") == 0 && v.get("c'") == 0 && v.get("d'") == 0
        }),
        Probe::new("mid: b=c=d=0", mid, done, |v| {
            v.get("b") == 0 && v.get("c") == 0 && v.get("d") == 0
        }),
        Probe::new("mid: b' = b*(i+1)", mid, done, |v| {
            v.get("b'") == v.register(B0) * (v.get("i") + 1)
        }),
        Probe::new("mid: c' = c/i", mid, done, |v| {
            v.get("c'") * v.get("i") == v.register(C0)
        }),
        Probe::new("mid: d' = d*(i+1)/i", mid, done, |v| {
            v.get("d'") * v.get("i") == v.register(D0) * (v.get("i") + 1)
        }),
        Probe::new("end: b,c,d take the mid b',c',d'", end, done, |v| {
            v.get("b") == v.register(BP_MID)
                && v.get("c") == v.register(CP_MID)
                && v.get("d") == v.register(DP_MID)
        }),
        Probe::new("end: b'=c'=d'=0", end, done, |v| {
            v.get("b'") == 0 && v.get("c'") == 0 && v.get("d'") == 0
        }),
        Probe::new(
            "end of main loop: b=k!, c=a/(k-1)!, d=x=a*k, y=a",
            ProbePoint::Edge(l.main, l.end_main),
            done,
            move |v| {
                let a = v.register(A);
                v.get("b") == k_fact
                    && v.get("c") * k1_fact == a
                    && v.get("d") == a * bound
                    && v.get("x") == v.get("d")
                    && v.get("y") == a
            },
        ),
    ];
    Ok(ProbeSuite { probes, snapshots })
}

const S_START: usize = 7;
const DP_START: usize = 8;
const S_MID: usize = 9;

fn growth(p: &Program) -> Result<ProbeSuite, SuiteError> {
    let l = f_lines(p)?;
    let start = ProbePoint::Edge(l.main, l.start);
    let mid = ProbePoint::Edge(l.bu, l.mid);
    let end = ProbePoint::Edge(l.lower, l.end);
    let snapshots = vec![
        Snapshot::new(S_START, start, |v| v.get("d") + v.get("d'")),
        Snapshot::new(DP_START, start, |v| v.get("d'")),
        Snapshot::new(S_MID, mid, |v| v.get("d") + v.get("d'")),
    ];
    let all = ProbeScope::AllRuns;
    let probes = vec![
        Probe::new("mid: i*(d+d') <= (i+1)*S", mid, all, |v| {
            let i = v.get("i");
            i * (v.get("d") + v.get("d'")) <= (i + 1) * v.register(S_START)
        }),
        Probe::new("mid: equality iff d=0 and d' was 0", mid, all, |v| {
            let i = v.get("i");
            let eq = i * (v.get("d") + v.get("d'")) == (i + 1) * v.register(S_START);
            eq == (v.get("d") == 0 && v.register(DP_START) == 0)
        }),
        Probe::new("end: d+d' unchanged since mid", end, all, |v| {
            v.get("d") + v.get("d'") == v.register(S_MID)
        }),
    ];
    Ok(ProbeSuite { probes, snapshots })
}

fn program_e(p: &Program, bound: u64) -> Result<ProbeSuite, SuiteError> {
    let at = ProbePoint::Line(mark(p, "after_main_loop")?);
    Ok(ProbeSuite {
        probes: vec![Probe::new(
            "after main loop: x = k*y",
            at,
            ProbeScope::CompleteRuns,
            move |v| v.get("x") == bound * v.get("y"),
        )],
        snapshots: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gadgets::{factorial_amplifier, program_e as e};
    use crate::semantics::{check_probes, Caps};

    #[test]
    fn factorial_suites_at_bound_two() {
        let f = factorial_amplifier().program;
        for (suite, cap) in [("iterations", 10), ("growth", 8)] {
            let s = probe_suite(suite, &f, 2).unwrap();
            let r = check_probes(&f, 2, &s.probes, &s.snapshots, &Caps::with_counter_cap(cap)).unwrap();
            assert!(r.complete_runs);
            for o in &r.outcomes {
                assert!(o.holds(), "{}: {:?}", o.label, o.violation);
                assert!(o.checks > 0, "{} never evaluated", o.label);
            }
        }
        assert_eq!(probe_suite("factorial", &f, 2).unwrap().probes.len(), 12);
    }

    #[test]
    fn broken_expectation_is_caught() {
        // at bound 2 the end-of-main values follow 2!, not 3!
        let f = factorial_amplifier().program;
        let s = probe_suite("iterations", &f, 3).unwrap();
        let r = check_probes(&f, 2, &s.probes, &s.snapshots, &Caps::with_counter_cap(10)).unwrap();
        assert!(!r.all_hold());
    }

    #[test]
    fn program_e_product() {
        let p = e();
        let s = probe_suite("program-e", &p, 3).unwrap();
        let r = check_probes(&p, 3, &s.probes, &s.snapshots, &Caps::with_counter_cap(10)).unwrap();
        assert!(r.all_hold());
    }

    #[test]
    fn suites_need_landmarks() {
        let p = crate::parser::parse("halt\n").unwrap();
        assert_eq!(
            probe_suite("iterations", &p, 2).err(),
            Some(SuiteError::MissingLandmark("init_loop".into()))
        );
        assert!(matches!(probe_suite("nope", &p, 2), Err(SuiteError::Unknown(_))));
    }
}
