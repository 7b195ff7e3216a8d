//! The composition `A ▷ P`: simulates the tested counters of `P` with
//! complements, auditing every simulated test against the amplifier's
//! `(c, d)` pair.
//!
//! Layout of the result:
//!
//! ```text
//! A without its halt
//! loop { inc x1_hat .. inc xl_hat; dec b; dec d }; dec c      (sim_setup)
//! P with inc/dec/tz/tm of tested counters rewritten
//! halt d, <A's halt list>, <P's halt list>
//! ```

use std::collections::{BTreeMap, HashSet};

use thiserror::Error;

use crate::gadgets::Amplifier;
use crate::ir::{
    classify_counters, rename_apart, splice, tested_in_order, validate, Command, CounterId,
    Diagnostic, Fragment, FragmentCommand, Jump, Program,
};
use crate::macros::{loop_block, steps};
use crate::semantics::Trace;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ComposeError {
    #[error("program has no halt")]
    NoHalt,
    #[error("invalid input: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Diagnostic>),
    #[error("designated counter {0} is tested")]
    TestedOutput(CounterId),
    #[error("traces do not end at the halt lines")]
    TraceShape,
    #[error("no complement given for tested counter {0}")]
    MissingComplement(CounterId),
    #[error("amplifier counter {0} does not occur in its program")]
    MissingOutput(CounterId),
}

/// Name for the complement of `x`: `<x>_hat`, suffixed on collision.
fn complement_name(x: &CounterId, taken: &HashSet<CounterId>) -> CounterId {
    let plain = CounterId::new(format!("{x}_hat"));
    if taken.contains(&plain) {
        crate::ir::fresh_name(plain.as_str(), taken)
    } else {
        plain
    }
}

/// `A ▷ P`.
pub fn compose(a: &Amplifier, p: &Program) -> Result<Program, ComposeError> {
    Ok(compose_inner(a, p, None)?.0)
}

/// `A ▷ P` where `P` deliberately shares counters with `A`: no renaming is
/// done, and each tested counter of `P` takes its complement from `hats`.
/// Only sound when the shared counters are zero whenever `A` has finished.
pub fn compose_reusing(
    a: &Amplifier,
    p: &Program,
    hats: &BTreeMap<CounterId, CounterId>,
) -> Result<Program, ComposeError> {
    for x in tested_in_order(p) {
        if !hats.contains_key(&x) {
            return Err(ComposeError::MissingComplement(x));
        }
    }
    Ok(compose_inner(a, p, Some(hats))?.0)
}

/// Where the pieces of `A ▷ P` start (1-based lines).
struct Layout {
    setup: usize,
    setup_body: usize,
    /// First line of the block for each line of `P`, indexed by that line;
    /// the entry for `P`'s halt is the composed halt.
    block: Vec<usize>,
}

fn compose_inner(
    a: &Amplifier,
    p: &Program,
    reuse: Option<&BTreeMap<CounterId, CounterId>>,
) -> Result<(Program, Layout), ComposeError> {
    if !matches!(p.commands().last(), Some(Command::Halt(_))) {
        return Err(ComposeError::NoHalt);
    }
    validate(&a.program).map_err(ComposeError::Invalid)?;
    validate(p).map_err(ComposeError::Invalid)?;
    let a_counters = a.program.counters();
    for x in a.outs() {
        if !a_counters.contains(&x) {
            return Err(ComposeError::MissingOutput(x));
        }
    }
    let p = match reuse {
        Some(_) => p.clone(),
        None => rename_apart(&a.program, p).0,
    };
    let (b, c, d) = (&a.out_b, &a.out_c, &a.out_d);

    let mut taken: HashSet<CounterId> = a_counters.into_iter().collect();
    taken.extend(p.counters());
    let mut hat: BTreeMap<CounterId, CounterId> = BTreeMap::new();
    let tested = tested_in_order(&p);
    for x in &tested {
        if let Some(given) = reuse {
            hat.insert(x.clone(), given[x].clone());
            continue;
        }
        let h = complement_name(x, &taken);
        taken.insert(h.clone());
        hat.insert(x.clone(), h);
    }

    // Step (ii): fill the complements to R, paid for by one c and R of d.
    let mut setup = Fragment::new();
    for x in &tested {
        setup.inc(&hat[x]);
    }
    setup.dec(b).dec(d);
    let mut setup = loop_block(setup);
    setup.dec(c);

    // One block per line of P (the halt becomes the fragment exit).
    let body = &p.commands()[..p.len() - 1];
    let blocks: Vec<Fragment> = body
        .iter()
        .map(|cmd| match cmd {
            Command::Inc(x) if hat.contains_key(x) => steps(&[(x, 1), (&hat[x], -1)]),
            Command::Dec(x) if hat.contains_key(x) => steps(&[(x, -1), (&hat[x], 1)]),
            Command::TestZero(x) => double_transfer(x, &hat[x], d, c),
            Command::TestMax(x) => double_transfer(&hat[x], x, d, c),
            Command::Inc(x) => steps(&[(x, 1)]),
            Command::Dec(x) => steps(&[(x, -1)]),
            Command::Goto(..) => Fragment::from_commands(vec![FragmentCommand::Goto(
                Jump::Rel(0),
                Jump::Rel(0),
            )]),
            Command::Halt(_) => unreachable!("validated: halt only at the end"),
        })
        .collect();
    let mut start = Vec::with_capacity(body.len() + 2);
    start.push(0);
    let mut pos = 0;
    for blk in &blocks {
        start.push(pos);
        pos += blk.len();
    }
    start.push(pos);
    let mut sim = Fragment::new();
    for (idx, (blk, cmd)) in blocks.into_iter().zip(body).enumerate() {
        if let Command::Goto(t1, t2) = *cmd {
            let here = start[idx + 1] as isize;
            sim.push(FragmentCommand::Goto(
                Jump::Rel(start[t1] as isize - here),
                Jump::Rel(start[t2] as isize - here),
            ));
        } else {
            sim.append(blk);
        }
    }
    let mut marks: HashSet<String> = a.program.landmarks().keys().cloned().collect();
    let unused = |name: &str, marks: &HashSet<String>| {
        if !marks.contains(name) && !p.landmarks().contains_key(name) {
            return name.to_string();
        }
        (1..)
            .map(|k| format!("{name}#{k}"))
            .find(|n| !marks.contains(n) && !p.landmarks().contains_key(n))
            .expect("unbounded suffix search")
    };
    let setup_name = if marks.contains("sim_setup") {
        unused("sim_setup", &marks)
    } else {
        "sim_setup".to_string()
    };
    marks.insert(setup_name.clone());
    setup.set_anchor(setup_name, 0);
    for (name, &line) in p.landmarks() {
        let name = if marks.contains(name) {
            unused(name, &marks)
        } else {
            name.clone()
        };
        marks.insert(name.clone());
        sim.set_anchor(name, start[line.min(body.len() + 1)]);
    }

    let mut halt = vec![d.clone()];
    halt.extend(a.program.halt_list().iter().cloned());
    halt.extend(p.halt_list().iter().cloned());
    let out = splice(vec![
        Fragment::from_program_body(&a.program),
        setup,
        sim,
        Fragment::from_commands(vec![FragmentCommand::Halt(halt)]),
    ])
    .expect("composed jumps stay in range");
    debug_assert!(validate(&out).is_ok());
    let setup_line = a.program.len();
    let sim_line = setup_line + tested.len() + 2 + 2 + 1;
    let layout = Layout {
        setup: setup_line,
        setup_body: tested.len() + 2,
        block: start.iter().map(|&off| sim_line + off).collect(),
    };
    Ok((out, layout))
}

/// Builds the run of `A ▷ P` that simulates a complete `R`-run of `P`,
/// given a complete run of `A` ending with `b = R`, `d = c*R` and `c` equal
/// to one plus twice the number of tests in the run of `P`.
///
/// Nothing is checked beyond the shape of the traces; confirm the result
/// with [`Trace::verify`].
pub fn lift_trace(
    a: &Amplifier,
    a_run: &Trace,
    p: &Program,
    p_run: &Trace,
    r: u64,
) -> Result<Trace, ComposeError> {
    let (_, layout) = compose_inner(a, p, None)?;
    let (a_last, p_last) = (a_run.lines.last(), p_run.lines.last());
    if a_last != Some(&(a.program.len() as u32)) || p_last != Some(&(p.len() as u32)) {
        return Err(ComposeError::TraceShape);
    }
    let tested: HashSet<CounterId> = tested_in_order(p).into_iter().collect();
    let mut out: Vec<usize> = a_run.lines[..a_run.lines.len() - 1]
        .iter()
        .map(|&l| l as usize)
        .collect();
    let s = layout.setup;
    let m = layout.setup_body;
    let transfer = |out: &mut Vec<usize>, h: usize| {
        out.push(h);
        for _ in 0..r {
            out.extend(h + 1..=h + 4);
            out.push(h);
        }
    };
    out.push(s);
    for _ in 0..r {
        out.extend(s + 1..=s + m + 1);
        out.push(s);
    }
    out.push(s + m + 2);
    for &l in &p_run.lines[..p_run.lines.len() - 1] {
        let q = layout.block[l as usize];
        match p.command(l as usize).ok_or(ComposeError::TraceShape)? {
            Command::Inc(x) | Command::Dec(x) if tested.contains(x) => out.extend([q, q + 1]),
            Command::TestZero(_) | Command::TestMax(_) => {
                transfer(&mut out, q);
                out.push(q + 5);
                transfer(&mut out, q + 6);
                out.push(q + 11);
            }
            Command::Halt(_) => return Err(ComposeError::TraceShape),
            _ => out.push(q),
        }
    }
    out.push(layout.block[p.len()]);
    Ok(Trace {
        lines: out.into_iter().map(|l| l as u32).collect(),
    })
}

/// `loop { inc to; dec from; dec d }; dec c; loop { dec to; inc from; dec d }; dec c`.
fn double_transfer(to: &CounterId, from: &CounterId, d: &CounterId, c: &CounterId) -> Fragment {
    let mut f = loop_block(steps(&[(to, 1), (from, -1), (d, -1)]));
    f.dec(c);
    f.append(loop_block(steps(&[(to, -1), (from, 1), (d, -1)])));
    f.dec(c);
    f
}

/// Composes an amplifier by `B'` (for bound `B`) with an amplifier whose
/// ratio is a function of its own bound `B'`, giving an amplifier for `B`.
pub fn compose_amplifiers(a: &Amplifier, f: &Amplifier) -> Result<Amplifier, ComposeError> {
    let tested = classify_counters(&f.program).tested;
    for x in f.outs() {
        if tested.contains(&x) {
            return Err(ComposeError::TestedOutput(x));
        }
    }
    let program = compose(a, &f.program)?;
    let (_, renaming) = rename_apart(&a.program, &f.program);
    let out = |x: &CounterId| renaming.get(x).cloned().unwrap_or_else(|| x.clone());
    Ok(Amplifier {
        program,
        out_b: out(&f.out_b),
        out_c: out(&f.out_c),
        out_d: out(&f.out_d),
        ratio: f.ratio.substitute(&a.ratio),
        bound_note: a.bound_note.clone(),
    })
}
