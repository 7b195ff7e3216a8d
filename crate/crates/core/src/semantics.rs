//! Operational semantics of B-runs and bounded exhaustive exploration.
//!
//! [`successors`] is the reference one-step relation on named valuations.
//! [`explore`], [`computed_relation`], [`find_witness`] and
//! [`check_probes`] search the configuration graph from the all-zero
//! valuation with a visited set over bit-packed configurations, so loops
//! terminate once the caps make the space finite.
//!
//! Untested counters stay below `counter_cap`: a step that would make one
//! of them equal to the cap reaches a boundary configuration, which marks
//! the result as truncated and is not explored further. Because every
//! command changes at most one counter by one, a run that would leave the
//! cap must pass through such a configuration first, so an exact result is
//! the unrestricted one.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use rustc_hash::{FxHashMap, FxHashSet};
use thiserror::Error;

use crate::ir::{classify_counters, validate, Command, CounterId, Diagnostic, Program};

#[derive(Debug, Error)]
pub enum SemanticsError {
    #[error("invalid program: {}", join_diags(.0))]
    Invalid(Vec<Diagnostic>),
    #[error("unknown counter {0}")]
    UnknownCounter(CounterId),
    #[error("caps must be positive ({0})")]
    BadCaps(&'static str),
    #[error("bound must be positive")]
    BadBound,
    #[error("counter {0} overflows 64 bits")]
    Overflow(CounterId),
    #[error("configuration needs {0} bits, more than the explorer supports")]
    TooWide(usize),
    #[error("line {0} is out of range")]
    BadLine(usize),
    #[error("goto at line {0} is not a structured loop; the schedule driver cannot follow it")]
    Unstructured(usize),
    #[error("schedule refers to unknown landmark {0}")]
    UnknownLandmark(String),
}

fn join_diags(d: &[Diagnostic]) -> String {
    d.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

/// Finitization of the search.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Caps {
    /// Untested counters must stay strictly below this value.
    pub counter_cap: u64,
    /// Largest number of distinct configurations stored.
    pub state_cap: u64,
    /// Largest BFS depth.
    pub step_cap: u64,
    /// When set, runs may execute at most this many `tz`/`tm` commands.
    pub test_budget: Option<u64>,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            counter_cap: 16,
            state_cap: 50_000_000,
            step_cap: 1_000_000,
            test_budget: None,
        }
    }
}

impl Caps {
    pub fn with_counter_cap(counter_cap: u64) -> Self {
        Caps {
            counter_cap,
            ..Caps::default()
        }
    }

    fn check(&self) -> Result<(), SemanticsError> {
        if self.counter_cap == 0 {
            return Err(SemanticsError::BadCaps("counter_cap"));
        }
        if self.counter_cap == u64::MAX {
            return Err(SemanticsError::BadCaps("counter_cap must be below 2^64 - 1"));
        }
        if self.state_cap == 0 {
            return Err(SemanticsError::BadCaps("state_cap"));
        }
        if self.step_cap == 0 {
            return Err(SemanticsError::BadCaps("step_cap"));
        }
        Ok(())
    }
}

/// A line (1-based) and one value per counter, ordered as
/// [`Program::counters`].
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Configuration {
    pub line: usize,
    pub values: Vec<u64>,
}

/// Counter name lookup shared by valuations of one program.
#[derive(Clone, Debug)]
pub struct CounterIndex {
    names: Arc<[CounterId]>,
    index: Arc<HashMap<CounterId, usize>>,
}

impl CounterIndex {
    pub fn new(names: Vec<CounterId>) -> Self {
        let index = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect();
        CounterIndex {
            names: names.into(),
            index: Arc::new(index),
        }
    }

    pub fn of(p: &Program) -> Self {
        Self::new(p.counters())
    }

    pub fn names(&self) -> &[CounterId] {
        &self.names
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.index.get(&CounterId::new(name)).copied()
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// Read access to a valuation by counter name, plus snapshot registers.
pub struct View<'a> {
    pub index: &'a CounterIndex,
    pub values: &'a [u64],
    pub registers: &'a [u64],
}

impl View<'_> {
    /// Value of a counter. Counters absent from the program read as 0 is not
    /// allowed: an unknown name is a bug in the probe and panics.
    pub fn get(&self, name: &str) -> u64 {
        match self.index.position(name) {
            Some(i) => self.values[i],
            None => panic!("probe refers to unknown counter {name}"),
        }
    }

    pub fn register(&self, r: usize) -> u64 {
        self.registers[r]
    }

    pub fn pairs(&self) -> Vec<(CounterId, u64)> {
        self.index
            .names()
            .iter()
            .cloned()
            .zip(self.values.iter().copied())
            .collect()
    }
}

impl fmt::Display for View<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .pairs()
            .iter()
            .map(|(n, v)| format!("{n}={v}"))
            .collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

/// One step of a B-run from `c`. Blocking yields an empty list.
///
/// This is the reference relation; the explorer's packed stepping is
/// checked against it.
pub fn successors(
    c: &Configuration,
    p: &Program,
    bound: u64,
) -> Result<Vec<Configuration>, SemanticsError> {
    let index = CounterIndex::of(p);
    let tested = classify_counters(p).tested;
    let cmd = p.command(c.line).ok_or(SemanticsError::BadLine(c.line))?;
    let pos = |x: &CounterId| index.index[x];
    let next = |values: Vec<u64>, line: usize| Configuration { line, values };
    let out = match cmd {
        Command::Inc(x) => {
            let v = c.values[pos(x)];
            if tested.contains(x) && v >= bound {
                vec![]
            } else {
                let mut vals = c.values.clone();
                vals[pos(x)] = v
                    .checked_add(1)
                    .ok_or_else(|| SemanticsError::Overflow(x.clone()))?;
                vec![next(vals, c.line + 1)]
            }
        }
        Command::Dec(x) => {
            let v = c.values[pos(x)];
            if v == 0 {
                vec![]
            } else {
                let mut vals = c.values.clone();
                vals[pos(x)] = v - 1;
                vec![next(vals, c.line + 1)]
            }
        }
        Command::Goto(a, b) => {
            if a == b {
                vec![next(c.values.clone(), *a)]
            } else {
                vec![next(c.values.clone(), *a), next(c.values.clone(), *b)]
            }
        }
        Command::TestZero(x) => {
            if c.values[pos(x)] == 0 {
                vec![next(c.values.clone(), c.line + 1)]
            } else {
                vec![]
            }
        }
        Command::TestMax(x) => {
            if c.values[pos(x)] == bound {
                vec![next(c.values.clone(), c.line + 1)]
            } else {
                vec![]
            }
        }
        Command::Halt(_) => vec![],
    };
    Ok(out)
}

/// Whether the halt check passes for a configuration at the halt line.
pub fn halt_accepts(p: &Program, c: &Configuration) -> bool {
    let index = CounterIndex::of(p);
    match p.command(c.line) {
        Some(Command::Halt(zs)) => zs.iter().all(|z| c.values[index.index[z]] == 0),
        _ => false,
    }
}

// ---------------------------------------------------------------------------
// Packed configurations

#[derive(Clone, Copy, Debug)]
struct Field {
    word: usize,
    shift: u32,
    mask: u64,
}

impl Field {
    #[inline]
    fn get<const W: usize>(self, k: &[u64; W]) -> u64 {
        (k[self.word] >> self.shift) & self.mask
    }

    /// Adds `+1` or `-1`; the caller keeps the value in range.
    #[inline]
    fn bump<const W: usize>(self, k: &mut [u64; W], up: bool) {
        let one = 1u64 << self.shift;
        k[self.word] = if up { k[self.word] + one } else { k[self.word] - one };
    }
}

#[derive(Clone, Debug)]
struct Layout {
    /// Field 0 is the line, then one per counter, then registers, then the
    /// test count when a budget is set.
    fields: Vec<Field>,
    words: usize,
    counters: usize,
    registers: usize,
    test_field: Option<usize>,
}

fn bits_for(max: u64) -> u32 {
    (64 - max.leading_zeros()).max(1)
}

impl Layout {
    fn new(widths: &[u32], counters: usize, registers: usize, has_tests: bool) -> Layout {
        let mut fields = Vec::with_capacity(widths.len());
        let mut word = 0usize;
        let mut used = 0u32;
        for &w in widths {
            if used + w > 64 {
                word += 1;
                used = 0;
            }
            let mask = if w == 64 { u64::MAX } else { (1u64 << w) - 1 };
            fields.push(Field {
                word,
                shift: used,
                mask,
            });
            used += w;
        }
        Layout {
            fields,
            words: word + 1,
            counters,
            registers,
            test_field: has_tests.then(|| 1 + counters + registers),
        }
    }

    fn counter_field(&self, i: usize) -> usize {
        1 + i
    }

    fn register_field(&self, r: usize) -> usize {
        1 + self.counters + r
    }
}

#[inline]
fn get<const W: usize>(l: &Layout, k: &[u64; W], f: usize) -> u64 {
    let fl = l.fields[f];
    (k[fl.word] >> fl.shift) & fl.mask
}

#[inline]
fn set<const W: usize>(l: &Layout, k: &mut [u64; W], f: usize, v: u64) {
    let fl = l.fields[f];
    k[fl.word] = (k[fl.word] & !(fl.mask << fl.shift)) | ((v & fl.mask) << fl.shift);
}

#[derive(Clone, Debug)]
enum Op {
    Inc { f: Field, limit: u64, tested: bool },
    Dec { f: Field },
    Goto(u64, u64),
    Tz { f: Field },
    Tm { f: Field },
    Halt { zero: Vec<usize> },
}

/// A program compiled against a field layout.
struct Machine {
    index: CounterIndex,
    layout: Layout,
    ops: Vec<Op>,
    bound: u64,
    test_budget: Option<u64>,
    halt_line: u64,
    /// `stop[line]`: configurations at this line are stored; see
    /// [`stop_lines`].
    stop: Vec<bool>,
}

impl Machine {
    fn new(
        p: &Program,
        bound: u64,
        caps: &Caps,
        registers: usize,
    ) -> Result<Machine, SemanticsError> {
        validate(p).map_err(SemanticsError::Invalid)?;
        if bound == 0 {
            return Err(SemanticsError::BadBound);
        }
        caps.check()?;
        let index = CounterIndex::of(p);
        let tested = classify_counters(p).tested;
        let mut widths = vec![bits_for(p.len() as u64)];
        for name in index.names() {
            widths.push(if tested.contains(name) {
                bits_for(bound)
            } else {
                bits_for(caps.counter_cap)
            });
        }
        widths.extend(std::iter::repeat_n(REGISTER_BITS, registers));
        if let Some(t) = caps.test_budget {
            widths.push(bits_for(t));
        }
        let layout = Layout::new(&widths, index.len(), registers, caps.test_budget.is_some());
        let f = |x: &CounterId| layout.counter_field(index.index[x]);
        let fl = |x: &CounterId| layout.fields[f(x)];
        let ops: Vec<Op> = p
            .commands()
            .iter()
            .map(|cmd| match cmd {
                Command::Inc(x) => {
                    let t = tested.contains(x);
                    Op::Inc {
                        f: fl(x),
                        limit: if t { bound } else { caps.counter_cap - 1 },
                        tested: t,
                    }
                }
                Command::Dec(x) => Op::Dec { f: fl(x) },
                Command::Goto(a, b) => Op::Goto(*a as u64, *b as u64),
                Command::TestZero(x) => Op::Tz { f: fl(x) },
                Command::TestMax(x) => Op::Tm { f: fl(x) },
                Command::Halt(zs) => Op::Halt {
                    zero: zs.iter().map(f).collect(),
                },
            })
            .collect();
        let stop = stop_lines(p);
        Ok(Machine {
            index,
            layout,
            ops,
            bound,
            test_budget: caps.test_budget,
            halt_line: p.len() as u64,
            stop,
        })
    }

    fn initial<const W: usize>(&self) -> [u64; W] {
        let mut k = [0u64; W];
        set(&self.layout, &mut k, 0, 1);
        k
    }

    fn values<const W: usize>(&self, k: &[u64; W]) -> Vec<u64> {
        (0..self.layout.counters)
            .map(|i| get(&self.layout, k, self.layout.counter_field(i)))
            .collect()
    }

    fn line<const W: usize>(&self, k: &[u64; W]) -> u64 {
        get(&self.layout, k, 0)
    }

    fn accepts<const W: usize>(&self, k: &[u64; W]) -> bool {
        match &self.ops[self.line(k) as usize - 1] {
            Op::Halt { zero } => zero.iter().all(|&f| get(&self.layout, k, f) == 0),
            _ => false,
        }
    }

    fn bump_tests<const W: usize>(&self, k: &mut [u64; W]) -> bool {
        match (self.layout.test_field, self.test_budget) {
            (Some(f), Some(budget)) => {
                let t = get(&self.layout, k, f);
                if t >= budget {
                    return false;
                }
                set(&self.layout, k, f, t + 1);
                true
            }
            _ => true,
        }
    }

    /// Successors of `k`; the flag reports an untested counter reaching
    /// `counter_cap`. Such boundary configurations are not produced.
    #[inline]
    fn step<const W: usize>(&self, k: &[u64; W], out: &mut Vec<[u64; W]>) -> bool {
        let l = &self.layout;
        let line = self.line(k);
        let next = |mut n: [u64; W]| {
            set(l, &mut n, 0, line + 1);
            n
        };
        let mut boundary = false;
        match &self.ops[line as usize - 1] {
            &Op::Inc { f, limit, tested } => {
                if f.get(k) < limit {
                    let mut n = *k;
                    f.bump(&mut n, true);
                    out.push(next(n));
                } else {
                    boundary = !tested;
                }
            }
            &Op::Dec { f } => {
                if f.get(k) > 0 {
                    let mut n = *k;
                    f.bump(&mut n, false);
                    out.push(next(n));
                }
            }
            Op::Goto(a, b) => {
                let mut n = *k;
                set(l, &mut n, 0, *a);
                out.push(n);
                if a != b {
                    set(l, &mut n, 0, *b);
                    out.push(n);
                }
            }
            &Op::Tz { f } => {
                if f.get(k) == 0 {
                    let mut n = *k;
                    if self.bump_tests(&mut n) {
                        out.push(next(n));
                    }
                }
            }
            &Op::Tm { f } => {
                if f.get(k) == self.bound {
                    let mut n = *k;
                    if self.bump_tests(&mut n) {
                        out.push(next(n));
                    }
                }
            }
            Op::Halt { .. } => {}
        }
        boundary
    }

    /// Enumerates every path from the stored configuration `k` to the next
    /// stored configurations, which go to `out`. Lines between stops are
    /// either deterministic or headers of unrolled loops, so the paths form
    /// a finite tree. `on_enter` sees (and may rewrite registers of) every
    /// entered configuration; with `nodes`, the tree is recorded. The flag
    /// reports a cap boundary.
    fn walk<const W: usize>(
        &self,
        k: &[u64; W],
        on_enter: &mut impl FnMut(u64, &mut [u64; W]),
        mut nodes: Option<&mut Vec<Node<W>>>,
        out: &mut Vec<[u64; W]>,
        stack: &mut Vec<(u64, [u64; W], u32)>,
    ) -> bool {
        let mut buf = Vec::with_capacity(2);
        let mut boundary = self.step(k, &mut buf);
        let from = self.line(k);
        stack.clear();
        while let Some(c) = buf.pop() {
            stack.push((from, c, u32::MAX));
        }
        if let Some(n) = nodes.as_deref_mut() {
            n.clear();
        }
        while let Some((mut from, mut cur, mut parent)) = stack.pop() {
            // deterministic stretches are followed without the stack
            loop {
                on_enter(from, &mut cur);
                let line = self.line(&cur);
                let stop = self.stop[line as usize];
                let id = match nodes.as_deref_mut() {
                    Some(n) => {
                        n.push(Node {
                            from,
                            cfg: cur,
                            parent,
                            end: stop,
                        });
                        n.len() as u32 - 1
                    }
                    None => 0,
                };
                if stop {
                    out.push(cur);
                    break;
                }
                buf.clear();
                boundary |= self.step(&cur, &mut buf);
                match buf.len() {
                    0 => break,
                    1 => (from, cur, parent) = (line, buf[0], id),
                    _ => {
                        while let Some(c) = buf.pop() {
                            stack.push((line, c, id));
                        }
                        break;
                    }
                }
            }
        }
        boundary
    }

    fn view<'a>(&'a self, values: &'a [u64], registers: &'a [u64]) -> View<'a> {
        View {
            index: &self.index,
            values,
            registers,
        }
    }
}

/// A `goto e h+1` header at `h` with its back edge `goto h h` at `e-1`.
#[derive(Clone, Copy, Debug)]
struct LoopShape {
    header: usize,
    exit: usize,
}

impl LoopShape {
    fn back(&self) -> usize {
        self.exit - 1
    }
}

fn loop_shapes(cmds: &[Command]) -> Vec<Option<LoopShape>> {
    let mut at = vec![None; cmds.len() + 2];
    for (i, cmd) in cmds.iter().enumerate() {
        let h = i + 1;
        if let Command::Goto(e, b) = *cmd {
            if b == h + 1 && e >= h + 2 && cmds[e - 2] == Command::Goto(h, h) {
                at[h] = Some(LoopShape { header: h, exit: e });
            }
        }
    }
    at
}

/// Lines whose configurations the explorer stores.
///
/// A loop is unrolled in place, rather than memoized at its header, when
/// its body is straight-line code plus nested unrolled loops, nothing
/// outside jumps into the body, and some counter changed at the top level
/// of the body moves in one direction throughout the body. Every counter is
/// bounded during search, so such a loop runs finitely often. Nested loops
/// must also be pinned: their exit line tests a counter that their own top
/// level moves monotonically, so only one iteration count survives and the
/// unrolled paths stay linear in number.
///
/// Stops are line 1, the halt, every branching goto that is not an unrolled
/// header, and every other backward goto whose target is not a stop. A
/// cycle must use a backward goto; the only cycles through unrolled back
/// edges are iterations of those loops, so every other cycle meets a stop.
pub fn stop_lines(p: &Program) -> Vec<bool> {
    let n = p.len();
    let cmds = p.commands();
    let shapes = loop_shapes(cmds);
    let line = |l: usize| &cmds[l - 1];

    // Lines targeted by jumps, with the jumping line.
    let mut jumps_into: Vec<Vec<usize>> = vec![Vec::new(); n + 2];
    for (i, cmd) in cmds.iter().enumerate() {
        if let Command::Goto(a, b) = *cmd {
            jumps_into[a].push(i + 1);
            jumps_into[b].push(i + 1);
        }
    }

    let mut loops: Vec<LoopShape> = shapes.iter().flatten().copied().collect();
    loops.sort_by_key(|l| l.exit - l.header);
    let mut unrolled = vec![false; n + 2];
    let mut pinned = vec![false; n + 2];
    for l in &loops {
        let (h, back) = (l.header, l.back());
        let sealed = (h + 1..=back).all(|t| {
            jumps_into[t]
                .iter()
                .all(|&src| src >= h && src <= back)
        });
        // Walk the body's top level.
        let mut top: Vec<usize> = Vec::new();
        let mut ok = sealed;
        let mut j = h + 1;
        while ok && j < back {
            match line(j) {
                Command::Goto(..) => match shapes[j] {
                    Some(k) if k.back() < back && unrolled[j] && pinned[j] => j = k.exit,
                    _ => ok = false,
                },
                Command::Halt(_) => ok = false,
                _ => {
                    top.push(j);
                    j += 1;
                }
            }
        }
        if !ok {
            continue;
        }
        let mut dir: HashMap<&CounterId, (bool, bool)> = HashMap::new();
        for c in &cmds[h..back - 1] {
            match c {
                Command::Inc(x) => dir.entry(x).or_default().0 = true,
                Command::Dec(x) => dir.entry(x).or_default().1 = true,
                _ => {}
            }
        }
        let monotone = |x: &CounterId| matches!(dir.get(x), Some((a, b)) if a != b);
        let progress = top
            .iter()
            .any(|&t| matches!(line(t), Command::Inc(x) | Command::Dec(x) if monotone(x)));
        if !progress {
            continue;
        }
        unrolled[h] = true;
        unrolled[back] = true;
        // Pinned: the exit line tests a counter moved only at this top level
        // and in one direction.
        if let Some(Command::TestZero(x) | Command::TestMax(x)) = cmds.get(l.exit - 1) {
            let only_top = cmds[h..back - 1].iter().enumerate().all(|(off, c)| {
                c.counter() != Some(x)
                    || matches!(c, Command::TestZero(_) | Command::TestMax(_))
                    || top.contains(&(h + 1 + off))
            });
            if monotone(x) && only_top {
                pinned[h] = true;
            }
        }
    }

    let mut stop = vec![false; n + 2];
    stop[1] = true;
    stop[n] = true;
    for (i, cmd) in cmds.iter().enumerate() {
        if matches!(cmd, Command::Goto(x, y) if x != y) && !unrolled[i + 1] {
            stop[i + 1] = true;
        }
    }
    for (i, cmd) in cmds.iter().enumerate() {
        if let Command::Goto(x, y) = *cmd {
            if x == y && x <= i + 1 && !stop[x] && !unrolled[i + 1] {
                stop[i + 1] = true;
            }
        }
    }
    stop
}

const REGISTER_BITS: u32 = 32;

macro_rules! with_width {
    ($words:expr, $w:ident => $body:expr) => {
        match $words {
            1 => {
                const $w: usize = 1;
                $body
            }
            2 => {
                const $w: usize = 2;
                $body
            }
            3 | 4 => {
                const $w: usize = 4;
                $body
            }
            5..=8 => {
                const $w: usize = 8;
                $body
            }
            9..=16 => {
                const $w: usize = 16;
                $body
            }
            n => return Err(SemanticsError::TooWide(n * 64)),
        }
    };
}

// ---------------------------------------------------------------------------
// Exploration

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Stats {
    pub states: u64,
    pub frontier_peak: u64,
    pub depth: u64,
    pub counter_cap_hit: bool,
    pub state_cap_hit: bool,
    pub step_cap_hit: bool,
}

impl Stats {
    pub fn exact(&self) -> bool {
        !(self.counter_cap_hit || self.state_cap_hit || self.step_cap_hit)
    }
}

#[derive(Clone, Debug)]
pub struct Exploration {
    pub counters: Vec<CounterId>,
    /// Final valuations of halted runs from the all-zero valuation.
    pub finals: BTreeSet<Vec<u64>>,
    pub exact: bool,
    pub stats: Stats,
}

impl Exploration {
    pub fn has_complete_run(&self) -> bool {
        !self.finals.is_empty()
    }
}

/// One entered configuration of a [`Machine::walk`] tree.
struct Node<const W: usize> {
    from: u64,
    cfg: [u64; W],
    /// Index of the parent node, `u32::MAX` for children of the root.
    parent: u32,
    /// Whether this is a stored (stop) configuration, ending its path.
    end: bool,
}

struct Forward<const W: usize> {
    accepted: Vec<[u64; W]>,
    stats: Stats,
}

/// Level-by-level BFS over stored (stop) configurations, numbering them in
/// `index` and recording the edges between them when it asks for that.
fn bfs<const W: usize>(m: &Machine, caps: &Caps, index: Option<&mut Indexed<W>>) -> Forward<W> {
    let mut own = Indexed::default();
    let graph = index.unwrap_or(&mut own);
    let mut accepted = Vec::new();
    let mut stats = Stats::default();
    let init = m.initial::<W>();
    graph.insert(init);
    let mut frontier = vec![init];
    let mut next = Vec::new();
    let mut succ = Vec::with_capacity(4);
    let mut stack = Vec::new();
    'outer: while !frontier.is_empty() {
        stats.frontier_peak = stats.frontier_peak.max(frontier.len() as u64);
        if stats.depth >= caps.step_cap {
            stats.step_cap_hit = true;
            break;
        }
        for k in &frontier {
            if m.line(k) == m.halt_line {
                if m.accepts(k) {
                    accepted.push(*k);
                }
                continue;
            }
            succ.clear();
            stats.counter_cap_hit |= m.walk(k, &mut |_, _| {}, None, &mut succ, &mut stack);
            let from = if graph.record_edges { graph.ids[k] } else { 0 };
            for s in &succ {
                // Rejecting halts have no successors and no effect on results.
                if m.line(s) == m.halt_line && !m.accepts(s) {
                    continue;
                }
                let to = match graph.ids.get(s) {
                    Some(&id) => id,
                    None => {
                        if graph.ids.len() as u64 >= caps.state_cap {
                            stats.state_cap_hit = true;
                            break 'outer;
                        }
                        next.push(*s);
                        graph.insert(*s)
                    }
                };
                if graph.record_edges {
                    graph.edges.push((from, to));
                }
            }
        }
        std::mem::swap(&mut frontier, &mut next);
        next.clear();
        if !frontier.is_empty() {
            stats.depth += 1;
        }
    }
    stats.states = graph.ids.len() as u64;
    Forward { accepted, stats }
}

/// Stored configurations numbered in insertion order, optionally with the
/// compressed edges between them.
struct Indexed<const W: usize> {
    ids: FxHashMap<[u64; W], u32>,
    record_edges: bool,
    edges: Vec<(u32, u32)>,
}

impl<const W: usize> Default for Indexed<W> {
    fn default() -> Self {
        Indexed {
            ids: FxHashMap::default(),
            record_edges: false,
            edges: Vec::new(),
        }
    }
}

impl<const W: usize> Indexed<W> {
    fn insert(&mut self, k: [u64; W]) -> u32 {
        let id = self.ids.len() as u32;
        self.ids.insert(k, id);
        id
    }
}

/// All final valuations of halted B-runs from the all-zero valuation, within caps.
pub fn explore(p: &Program, bound: u64, caps: &Caps) -> Result<Exploration, SemanticsError> {
    let m = Machine::new(p, bound, caps, 0)?;
    with_width!(m.layout.words, W => {
        let fw = bfs::<W>(&m, caps, None);
        let finals = fw.accepted.iter().map(|k| m.values(k)).collect();
        Ok(Exploration {
            counters: m.index.names().to_vec(),
            finals,
            exact: fw.stats.exact(),
            stats: fw.stats,
        })
    })
}

/// Tuples over an ordered counter list, sorted, with an exactness flag.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Relation {
    pub counters: Vec<CounterId>,
    pub tuples: BTreeSet<Vec<u64>>,
    pub exact: bool,
}

impl Relation {
    pub fn contains(&self, t: &[u64]) -> bool {
        self.tuples.contains(t)
    }

    /// CSV with a header of counter names and a `# exact` / `# truncated` footer.
    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .flexible(true)
            .from_writer(Vec::new());
        let header: Vec<&str> = self.counters.iter().map(|c| c.as_str()).collect();
        w.write_record(&header).expect("in-memory write");
        for t in &self.tuples {
            w.write_record(t.iter().map(|v| v.to_string()))
                .expect("in-memory write");
        }
        let mut out = String::from_utf8(w.into_inner().expect("flush")).expect("utf8");
        out.push_str(if self.exact { "# exact\n" } else { "# truncated\n" });
        out
    }
}

fn positions(index: &CounterIndex, counters: &[CounterId]) -> Result<Vec<usize>, SemanticsError> {
    counters
        .iter()
        .map(|c| {
            index
                .position(c.as_str())
                .ok_or_else(|| SemanticsError::UnknownCounter(c.clone()))
        })
        .collect()
}

/// The B-computed relation in `counters`, restricted to runs within caps.
pub fn computed_relation(
    p: &Program,
    bound: u64,
    counters: &[CounterId],
    caps: &Caps,
) -> Result<Relation, SemanticsError> {
    let pos = positions(&CounterIndex::of(p), counters)?;
    let ex = explore(p, bound, caps)?;
    Ok(project(&ex, counters, &pos))
}

fn project(ex: &Exploration, counters: &[CounterId], pos: &[usize]) -> Relation {
    Relation {
        counters: counters.to_vec(),
        tuples: ex
            .finals
            .iter()
            .map(|v| pos.iter().map(|&i| v[i]).collect())
            .collect(),
        exact: ex.exact,
    }
}

/// Projects an existing exploration onto a counter list.
pub fn relation_of(ex: &Exploration, counters: &[CounterId]) -> Result<Relation, SemanticsError> {
    let index = CounterIndex::new(ex.counters.clone());
    let pos = positions(&index, counters)?;
    Ok(project(ex, counters, &pos))
}

// ---------------------------------------------------------------------------
// Traces and witnesses

/// A run as the sequence of lines of its configurations, starting at line 1
/// from the all-zero valuation. The valuations follow by replay.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace {
    pub lines: Vec<u32>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReplayError {
    #[error("trace is empty or does not start at line 1")]
    BadStart,
    #[error("step {step}: line {to} is not a successor of line {from}")]
    NotASuccessor { step: usize, from: u32, to: u32 },
    #[error("trace does not end at the halt line")]
    NotHalted,
    #[error("halt check fails: {0} is not zero")]
    HaltRejects(CounterId),
}

impl Trace {
    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    /// Replays the trace under the reference step relation and returns every
    /// configuration. Memory grows with trace length times counters.
    pub fn configurations(
        &self,
        p: &Program,
        bound: u64,
    ) -> Result<Vec<Configuration>, ReplayError> {
        let mut out = Vec::with_capacity(self.lines.len());
        self.replay_with(p, bound, |c| out.push(c.clone()))?;
        Ok(out)
    }

    /// Checks the trace is a complete B-run and returns its final valuation.
    pub fn verify(&self, p: &Program, bound: u64) -> Result<Vec<u64>, ReplayError> {
        let mut last = None;
        self.replay_with(p, bound, |c| last = Some(c.values.clone()))?;
        Ok(last.expect("nonempty trace"))
    }

    fn replay_with(
        &self,
        p: &Program,
        bound: u64,
        mut visit: impl FnMut(&Configuration),
    ) -> Result<(), ReplayError> {
        if self.lines.first() != Some(&1) {
            return Err(ReplayError::BadStart);
        }
        let index = CounterIndex::of(p);
        let tested = classify_counters(p).tested;
        let mut cur = Configuration {
            line: 1,
            values: vec![0; index.len()],
        };
        visit(&cur);
        for (step, w) in self.lines.windows(2).enumerate() {
            let to = w[1] as usize;
            let ok = match p.command(cur.line) {
                Some(Command::Inc(x)) => {
                    let i = index.index[x];
                    let v = cur.values[i];
                    let fits = !(tested.contains(x) && v >= bound) && v < u64::MAX;
                    if fits && to == cur.line + 1 {
                        cur.values[i] = v + 1;
                        true
                    } else {
                        false
                    }
                }
                Some(Command::Dec(x)) => {
                    let i = index.index[x];
                    if cur.values[i] > 0 && to == cur.line + 1 {
                        cur.values[i] -= 1;
                        true
                    } else {
                        false
                    }
                }
                Some(Command::Goto(a, b)) => to == *a || to == *b,
                Some(Command::TestZero(x)) => cur.values[index.index[x]] == 0 && to == cur.line + 1,
                Some(Command::TestMax(x)) => {
                    cur.values[index.index[x]] == bound && to == cur.line + 1
                }
                Some(Command::Halt(_)) | None => false,
            };
            if !ok {
                return Err(ReplayError::NotASuccessor {
                    step,
                    from: w[0],
                    to: w[1],
                });
            }
            cur.line = to;
            visit(&cur);
        }
        match p.command(cur.line) {
            Some(Command::Halt(zs)) => {
                for z in zs {
                    if cur.values[index.index[z]] != 0 {
                        return Err(ReplayError::HaltRejects(z.clone()));
                    }
                }
                Ok(())
            }
            _ => Err(ReplayError::NotHalted),
        }
    }
}

/// Shortest halted run from the all-zero valuation whose final valuation
/// satisfies `target`, if one exists within caps.
pub fn find_witness(
    p: &Program,
    bound: u64,
    target: &dyn Fn(&View) -> bool,
    caps: &Caps,
) -> Result<Option<Trace>, SemanticsError> {
    let m = Machine::new(p, bound, caps, 0)?;
    with_width!(m.layout.words, W => Ok(witness_impl::<W>(&m, caps, target)))
}

fn witness_impl<const W: usize>(
    m: &Machine,
    caps: &Caps,
    target: &dyn Fn(&View) -> bool,
) -> Option<Trace> {
    let mut parent: FxHashMap<[u64; W], [u64; W]> = FxHashMap::default();
    let init = m.initial::<W>();
    parent.insert(init, init);
    let mut frontier = vec![init];
    let mut next = Vec::new();
    let mut succ = Vec::with_capacity(2);
    let mut depth = 0u64;
    while !frontier.is_empty() && depth <= caps.step_cap {
        for k in &frontier {
            if m.line(k) == m.halt_line {
                let vals = m.values(k);
                if m.accepts(k) && target(&m.view(&vals, &[])) {
                    let mut lines = vec![m.line(k) as u32];
                    let mut cur = *k;
                    while cur != init {
                        cur = parent[&cur];
                        lines.push(m.line(&cur) as u32);
                    }
                    lines.reverse();
                    return Some(Trace { lines });
                }
                continue;
            }
            succ.clear();
            m.step(k, &mut succ);
            for s in &succ {
                if parent.len() as u64 >= caps.state_cap {
                    return None;
                }
                if let std::collections::hash_map::Entry::Vacant(e) = parent.entry(*s) {
                    e.insert(*k);
                    next.push(*s);
                }
            }
        }
        std::mem::swap(&mut frontier, &mut next);
        next.clear();
        depth += 1;
    }
    None
}

// ---------------------------------------------------------------------------
// Probes

/// Where a probe is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProbePoint {
    /// Every configuration at this line.
    Line(usize),
    /// Configurations entered by the step from the first line to the second.
    Edge(usize, usize),
}

impl ProbePoint {
    fn matches(&self, from: Option<u64>, to: u64) -> bool {
        match *self {
            ProbePoint::Line(l) => l as u64 == to,
            ProbePoint::Edge(a, b) => from == Some(a as u64) && b as u64 == to,
        }
    }

    fn lines(&self) -> Vec<usize> {
        match *self {
            ProbePoint::Line(l) => vec![l],
            ProbePoint::Edge(a, b) => vec![a, b],
        }
    }
}

/// Which runs a probe quantifies over.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProbeScope {
    /// Only configurations lying on some complete run.
    CompleteRuns,
    /// Every explored configuration.
    AllRuns,
}

pub type Predicate = Arc<dyn Fn(&View) -> bool + Send + Sync>;
pub type Capture = Arc<dyn Fn(&View) -> u64 + Send + Sync>;

#[derive(Clone)]
pub struct Probe {
    pub label: String,
    pub at: ProbePoint,
    pub scope: ProbeScope,
    pub predicate: Predicate,
}

impl Probe {
    pub fn new(
        label: impl Into<String>,
        at: ProbePoint,
        scope: ProbeScope,
        predicate: impl Fn(&View) -> bool + Send + Sync + 'static,
    ) -> Self {
        Probe {
            label: label.into(),
            at,
            scope,
            predicate: Arc::new(predicate),
        }
    }
}

impl fmt::Debug for Probe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Probe")
            .field("label", &self.label)
            .field("at", &self.at)
            .field("scope", &self.scope)
            .finish()
    }
}

/// Records a value into register `register` whenever a configuration is
/// entered at `at`. Registers start at 0 and ride along in the state, so
/// probes can compare against earlier points of the same run.
#[derive(Clone)]
pub struct Snapshot {
    pub register: usize,
    pub at: ProbePoint,
    pub capture: Capture,
}

impl Snapshot {
    pub fn new(
        register: usize,
        at: ProbePoint,
        capture: impl Fn(&View) -> u64 + Send + Sync + 'static,
    ) -> Self {
        Snapshot {
            register,
            at,
            capture: Arc::new(capture),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Counterexample {
    pub line: usize,
    pub valuation: Vec<(CounterId, u64)>,
    pub registers: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProbeOutcome {
    pub label: String,
    /// Number of evaluations performed.
    pub checks: u64,
    /// First violation in BFS order, if any.
    pub violation: Option<Counterexample>,
}

impl ProbeOutcome {
    pub fn holds(&self) -> bool {
        self.violation.is_none()
    }
}

#[derive(Clone, Debug)]
pub struct ProbeReport {
    pub outcomes: Vec<ProbeOutcome>,
    pub complete_runs: bool,
    pub exact: bool,
    pub stats: Stats,
}

impl ProbeReport {
    pub fn all_hold(&self) -> bool {
        self.outcomes.iter().all(|o| o.holds())
    }
}

/// Evaluates probes over the explored configuration graph.
///
/// Complete-run probes only see configurations from which an accepting halt
/// is reachable (found by a backward pass over the visited set); all-run
/// probes see every explored configuration.
pub fn check_probes(
    p: &Program,
    bound: u64,
    probes: &[Probe],
    snapshots: &[Snapshot],
    caps: &Caps,
) -> Result<ProbeReport, SemanticsError> {
    for pt in probes
        .iter()
        .map(|pr| pr.at)
        .chain(snapshots.iter().map(|s| s.at))
    {
        for l in pt.lines() {
            if l == 0 || l > p.len() {
                return Err(SemanticsError::BadLine(l));
            }
        }
    }
    let registers = snapshots.iter().map(|s| s.register + 1).max().unwrap_or(0);
    let m = Machine::new(p, bound, caps, registers)?;
    with_width!(m.layout.words, W => Ok(probes_impl::<W>(&m, caps, probes, snapshots)))
}

fn strip_registers<const W: usize>(m: &Machine, k: &[u64; W]) -> [u64; W] {
    let mut out = *k;
    for r in 0..m.layout.registers {
        set(&m.layout, &mut out, m.layout.register_field(r), 0);
    }
    out
}

fn probes_impl<const W: usize>(
    m: &Machine,
    caps: &Caps,
    probes: &[Probe],
    snapshots: &[Snapshot],
) -> ProbeReport {
    // Pass 1: reachability graph over stored configurations.
    let mut graph = Indexed::<W> {
        record_edges: true,
        ..Indexed::default()
    };
    let fw = bfs::<W>(m, caps, Some(&mut graph));
    let mut exact = fw.stats.exact();
    let mut stats = fw.stats.clone();

    // Pass 2: stored configurations that can still reach an accepting halt.
    let n = graph.ids.len();
    let mut start = vec![0u32; n + 1];
    for &(_, to) in &graph.edges {
        start[to as usize + 1] += 1;
    }
    for i in 0..n {
        start[i + 1] += start[i];
    }
    let mut fill = start.clone();
    let mut rev = vec![0u32; graph.edges.len()];
    for &(from, to) in &graph.edges {
        rev[fill[to as usize] as usize] = from;
        fill[to as usize] += 1;
    }
    drop(fill);
    graph.edges = Vec::new();
    let mut live = vec![false; n];
    let mut stack: Vec<u32> = fw.accepted.iter().map(|k| graph.ids[k]).collect();
    for &i in &stack {
        live[i as usize] = true;
    }
    while let Some(i) = stack.pop() {
        for &q in &rev[start[i as usize] as usize..start[i as usize + 1] as usize] {
            if !live[q as usize] {
                live[q as usize] = true;
                stack.push(q);
            }
        }
    }
    drop(rev);
    drop(start);
    let complete_runs = !fw.accepted.is_empty();
    let on_complete = |k: &[u64; W]| -> bool {
        graph
            .ids
            .get(&strip_registers(m, k))
            .is_some_and(|&i| live[i as usize])
    };

    // Pass 3: forward again with snapshot registers, evaluating probes on
    // every entered configuration.
    let all_runs = probes.iter().any(|p| p.scope == ProbeScope::AllRuns);
    let mut outcomes: Vec<ProbeOutcome> = probes
        .iter()
        .map(|p| ProbeOutcome {
            label: p.label.clone(),
            checks: 0,
            violation: None,
        })
        .collect();
    let l = &m.layout;
    let load = |k: &[u64; W], vals: &mut Vec<u64>, regs: &mut Vec<u64>| {
        for (i, v) in vals.iter_mut().enumerate() {
            *v = get(l, k, l.counter_field(i));
        }
        for (r, v) in regs.iter_mut().enumerate() {
            *v = get(l, k, l.register_field(r));
        }
    };
    let mut vals = vec![0u64; l.counters];
    let mut regs = vec![0u64; l.registers];
    let mut on_enter = |from: u64, k: &mut [u64; W]| {
        let to = m.line(k);
        for s in snapshots {
            if s.at.matches(Some(from), to) {
                let mut vals = vec![0u64; l.counters];
                let mut regs = vec![0u64; l.registers];
                load(k, &mut vals, &mut regs);
                let v = (s.capture)(&m.view(&vals, &regs));
                set(l, k, l.register_field(s.register), v);
            }
        }
    };
    let mut eval = |from: Option<u64>, k: &[u64; W], complete: bool, outcomes: &mut [ProbeOutcome]| {
        let to = m.line(k);
        let mut loaded = false;
        for (pi, pr) in probes.iter().enumerate() {
            if !pr.at.matches(from, to) {
                continue;
            }
            if pr.scope == ProbeScope::CompleteRuns && !complete {
                continue;
            }
            if !loaded {
                load(k, &mut vals, &mut regs);
                loaded = true;
            }
            let o = &mut outcomes[pi];
            o.checks += 1;
            if o.violation.is_none() && !(pr.predicate)(&m.view(&vals, &regs)) {
                o.violation = Some(Counterexample {
                    line: to as usize,
                    valuation: m.view(&vals, &regs).pairs(),
                    registers: regs.clone(),
                });
            }
        }
    };

    let mut visited: FxHashSet<[u64; W]> = FxHashSet::default();
    let mut depth = 0u64;
    let init = m.initial::<W>();
    let mut frontier = Vec::new();
    if all_runs || on_complete(&init) {
        eval(None, &init, on_complete(&init), &mut outcomes);
        visited.insert(init);
        frontier.push(init);
    }
    let mut next = Vec::new();
    let mut nodes: Vec<Node<W>> = Vec::new();
    let mut ends = Vec::new();
    let mut stack = Vec::new();
    let mut complete = Vec::new();
    'outer: while !frontier.is_empty() {
        if depth >= caps.step_cap {
            stats.step_cap_hit = true;
            break;
        }
        for k in &frontier {
            if m.line(k) == m.halt_line {
                continue;
            }
            ends.clear();
            m.walk(k, &mut on_enter, Some(&mut nodes), &mut ends, &mut stack);
            complete.clear();
            complete.extend(nodes.iter().map(|n| n.end && on_complete(&n.cfg)));
            for i in (0..nodes.len()).rev() {
                let p = nodes[i].parent;
                if complete[i] && p != u32::MAX {
                    complete[p as usize] = true;
                }
            }
            for (n, &done) in nodes.iter().zip(&complete) {
                if !all_runs && !done {
                    continue;
                }
                eval(Some(n.from), &n.cfg, done, &mut outcomes);
                if !n.end || visited.contains(&n.cfg) {
                    continue;
                }
                if visited.len() as u64 >= caps.state_cap {
                    stats.state_cap_hit = true;
                    break 'outer;
                }
                visited.insert(n.cfg);
                next.push(n.cfg);
            }
        }
        std::mem::swap(&mut frontier, &mut next);
        next.clear();
        depth += 1;
    }
    exact &= !(stats.state_cap_hit || stats.step_cap_hit);
    stats.states = stats.states.max(visited.len() as u64);
    ProbeReport {
        outcomes,
        complete_runs,
        exact,
        stats,
    }
}

// ---------------------------------------------------------------------------
// Schedule-driven runs

/// Iteration policy for [`drive`]: loops named here run exactly the given
/// number of times; every other loop is iterated while its body can still
/// complete.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Schedule {
    /// Loop header line to iteration count.
    pub fixed: BTreeMap<usize, u64>,
}

impl Schedule {
    pub fn new() -> Self {
        Self::default()
    }

    /// Fixes the loop whose header carries `landmark`.
    pub fn fix(
        mut self,
        p: &Program,
        landmark: &str,
        count: u64,
    ) -> Result<Self, SemanticsError> {
        let line = p
            .landmark(landmark)
            .ok_or_else(|| SemanticsError::UnknownLandmark(landmark.to_string()))?;
        self.fixed.insert(line, count);
        Ok(self)
    }

    pub fn fix_line(mut self, line: usize, count: u64) -> Self {
        self.fixed.insert(line, count);
        self
    }
}

/// Builds one run of a loop-structured program by greedy maximal iteration
/// under a [`Schedule`], then checks that it halts.
///
/// A loop header is a `goto e h+1` at line `h` whose line `e-1` is
/// `goto h h`; anything else with two distinct targets is rejected. The
/// result is only a candidate: callers confirm it with [`Trace::verify`].
pub fn drive(
    p: &Program,
    bound: u64,
    schedule: &Schedule,
    counter_cap: u64,
) -> Result<Option<Trace>, SemanticsError> {
    validate(p).map_err(SemanticsError::Invalid)?;
    let index = CounterIndex::of(p);
    let tested = classify_counters(p).tested;
    let ops: Vec<DriveOp> = p
        .commands()
        .iter()
        .enumerate()
        .map(|(i, cmd)| {
            let line = i + 1;
            Ok(match cmd {
                Command::Inc(x) => DriveOp::Inc(
                    index.index[x],
                    if tested.contains(x) { bound } else { counter_cap },
                ),
                Command::Dec(x) => DriveOp::Dec(index.index[x]),
                Command::TestZero(x) => DriveOp::Tz(index.index[x]),
                Command::TestMax(x) => DriveOp::Tm(index.index[x]),
                Command::Halt(zs) => DriveOp::Halt(zs.iter().map(|z| index.index[z]).collect()),
                Command::Goto(a, b) if a == b => DriveOp::Jump(*a),
                Command::Goto(e, b)
                    if *b == line + 1
                        && *e >= line + 2
                        && p.command(e - 1) == Some(&Command::Goto(line, line)) =>
                {
                    DriveOp::Loop { exit: *e }
                }
                Command::Goto(..) => return Err(SemanticsError::Unstructured(line)),
            })
        })
        .collect::<Result<_, _>>()?;
    let mut d = Driver {
        ops,
        bound,
        fixed: &schedule.fixed,
        trace: vec![1],
    };
    let mut vals = vec![0u64; index.len()];
    let halt = p.len();
    if !d.run(1, halt, &mut vals) {
        return Ok(None);
    }
    match &d.ops[halt - 1] {
        DriveOp::Halt(zs) if zs.iter().all(|&z| vals[z] == 0) => {
            Ok(Some(Trace { lines: d.trace }))
        }
        _ => Ok(None),
    }
}

enum DriveOp {
    Inc(usize, u64),
    Dec(usize),
    Tz(usize),
    Tm(usize),
    Jump(usize),
    Loop { exit: usize },
    Halt(Vec<usize>),
}

struct Driver<'a> {
    ops: Vec<DriveOp>,
    bound: u64,
    fixed: &'a BTreeMap<usize, u64>,
    trace: Vec<u32>,
}

impl Driver<'_> {
    /// Runs from `line` until control reaches `end`. The current line is
    /// already on the trace.
    fn run(&mut self, mut line: usize, end: usize, vals: &mut Vec<u64>) -> bool {
        while line != end {
            let next = match self.ops[line - 1] {
                DriveOp::Inc(x, limit) => {
                    if vals[x] >= limit {
                        return false;
                    }
                    vals[x] += 1;
                    line + 1
                }
                DriveOp::Dec(x) => {
                    if vals[x] == 0 {
                        return false;
                    }
                    vals[x] -= 1;
                    line + 1
                }
                DriveOp::Tz(x) => {
                    if vals[x] != 0 {
                        return false;
                    }
                    line + 1
                }
                DriveOp::Tm(x) => {
                    if vals[x] != self.bound {
                        return false;
                    }
                    line + 1
                }
                DriveOp::Jump(t) => t,
                DriveOp::Halt(_) => return false,
                DriveOp::Loop { exit } => {
                    if !self.run_loop(line, exit, vals) {
                        return false;
                    }
                    exit
                }
            };
            self.trace.push(next as u32);
            line = next;
        }
        true
    }

    /// Iterates the loop headed at `header`; leaves control at the header.
    fn run_loop(&mut self, header: usize, exit: usize, vals: &mut Vec<u64>) -> bool {
        let back = exit - 1;
        let want = self.fixed.get(&header).copied();
        let mut count = 0u64;
        loop {
            if want == Some(count) {
                return true;
            }
            let saved = vals.clone();
            let mark = self.trace.len();
            self.trace.push(header as u32 + 1);
            let ok = self.run(header + 1, back, vals) && (want.is_some() || *vals != saved);
            if !ok {
                *vals = saved;
                self.trace.truncate(mark);
                return want.is_none();
            }
            // back edge
            self.trace.push(header as u32);
            count += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(s: &str) -> CounterId {
        CounterId::new(s)
    }

    fn prog(cmds: Vec<Command>) -> Program {
        Program::new(cmds)
    }

    #[test]
    fn reference_successors() {
        let p = prog(vec![Command::Inc(c("x")), Command::Halt(vec![])]);
        let s = successors(&Configuration { line: 1, values: vec![0] }, &p, 3).unwrap();
        assert_eq!(s, vec![Configuration { line: 2, values: vec![1] }]);

        let p = prog(vec![Command::Dec(c("x")), Command::Halt(vec![])]);
        assert!(successors(&Configuration { line: 1, values: vec![0] }, &p, 3)
            .unwrap()
            .is_empty());

        let p = prog(vec![Command::TestMax(c("x")), Command::Halt(vec![])]);
        let s = successors(&Configuration { line: 1, values: vec![2] }, &p, 2).unwrap();
        assert_eq!(s, vec![Configuration { line: 2, values: vec![2] }]);
    }

    #[test]
    fn tested_increment_blocks_at_bound() {
        let p = prog(vec![
            Command::Inc(c("x")),
            Command::TestZero(c("x")),
            Command::Halt(vec![]),
        ]);
        let s = successors(&Configuration { line: 1, values: vec![2] }, &p, 2).unwrap();
        assert!(s.is_empty());
    }

    #[test]
    fn halt_alone() {
        let p = prog(vec![Command::Halt(vec![])]);
        let r = explore(&p, 1, &Caps::default()).unwrap();
        assert!(r.exact);
        assert_eq!(r.finals, [vec![]].into_iter().collect());
        let rel = computed_relation(&p, 1, &[], &Caps::default()).unwrap();
        assert_eq!(rel.tuples, [vec![]].into_iter().collect());
        assert!(rel.exact);
    }

    #[test]
    fn unknown_counter_is_an_error() {
        let p = prog(vec![Command::Halt(vec![])]);
        assert!(matches!(
            computed_relation(&p, 1, &[c("q")], &Caps::default()),
            Err(SemanticsError::UnknownCounter(_))
        ));
    }

    #[test]
    fn zero_caps_are_rejected() {
        let p = prog(vec![Command::Halt(vec![])]);
        let caps = Caps {
            state_cap: 0,
            ..Caps::default()
        };
        assert!(matches!(explore(&p, 1, &caps), Err(SemanticsError::BadCaps(_))));
        assert!(matches!(explore(&p, 0, &Caps::default()), Err(SemanticsError::BadBound)));
    }

    #[test]
    fn witness_for_single_increment() {
        let p = prog(vec![Command::Inc(c("x")), Command::Halt(vec![])]);
        let t = find_witness(&p, 1, &|v| v.get("x") == 1, &Caps::default())
            .unwrap()
            .unwrap();
        assert_eq!(t.lines, vec![1, 2]);
        assert_eq!(t.verify(&p, 1).unwrap(), vec![1]);
        assert!(find_witness(&p, 1, &|v| v.get("x") == 2, &Caps::default())
            .unwrap()
            .is_none());
    }

    #[test]
    fn state_cap_truncates() {
        let p = prog(vec![
            Command::Goto(4, 2),
            Command::Inc(c("x")),
            Command::Goto(1, 1),
            Command::Halt(vec![]),
        ]);
        let caps = Caps {
            state_cap: 3,
            ..Caps::default()
        };
        let r = explore(&p, 1, &caps).unwrap();
        assert!(!r.exact);
        assert!(r.stats.state_cap_hit);
    }

    #[test]
    fn step_cap_truncates() {
        let p = prog(vec![
            Command::Inc(c("x")),
            Command::Inc(c("x")),
            Command::Halt(vec![]),
        ]);
        let caps = Caps {
            step_cap: 1,
            ..Caps::default()
        };
        let r = explore(&p, 1, &caps).unwrap();
        assert!(!r.exact && r.stats.step_cap_hit);
        assert!(r.finals.is_empty());
    }

    #[test]
    fn test_budget_limits_tests() {
        let p = prog(vec![
            Command::TestZero(c("x")),
            Command::TestZero(c("x")),
            Command::Halt(vec![]),
        ]);
        let mut caps = Caps { test_budget: Some(1), ..Caps::default() };
        assert!(explore(&p, 1, &caps).unwrap().finals.is_empty());
        caps.test_budget = Some(2);
        assert_eq!(explore(&p, 1, &caps).unwrap().finals.len(), 1);
    }

    #[test]
    fn csv_layout() {
        let rel = Relation {
            counters: vec![c("b"), c("c")],
            tuples: [vec![3, 1], vec![3, 2]].into_iter().collect(),
            exact: false,
        };
        assert_eq!(rel.to_csv(), "b,c\n3,1\n3,2\n# truncated\n");
    }

    #[test]
    fn probe_at_line_one_sees_zero() {
        let p = prog(vec![
            Command::Goto(4, 2),
            Command::Inc(c("x")),
            Command::Goto(1, 1),
            Command::Halt(vec![c("x")]),
        ]);
        let probes = vec![
            Probe::new("x=0 at 1 on complete runs", ProbePoint::Line(1), ProbeScope::CompleteRuns, |v| {
                v.get("x") == 0
            }),
            Probe::new("x=0 at 1 on all runs", ProbePoint::Line(1), ProbeScope::AllRuns, |v| {
                v.get("x") == 0
            }),
        ];
        let rep = check_probes(&p, 1, &probes, &[], &Caps::with_counter_cap(4)).unwrap();
        assert!(rep.complete_runs);
        assert!(rep.outcomes[0].holds());
        assert!(!rep.outcomes[1].holds());
    }

    #[test]
    fn snapshots_carry_history() {
        // x counts loop passes; register 0 records x when leaving the loop.
        let p = prog(vec![
            Command::Goto(4, 2),
            Command::Inc(c("x")),
            Command::Goto(1, 1),
            Command::Inc(c("y")),
            Command::Halt(vec![]),
        ]);
        let snaps = vec![Snapshot::new(0, ProbePoint::Edge(1, 4), |v| v.get("x"))];
        let probes = vec![Probe::new("x unchanged since exit", ProbePoint::Line(5), ProbeScope::AllRuns, |v| {
            v.register(0) == v.get("x") && v.get("y") == 1
        })];
        let rep = check_probes(&p, 1, &probes, &snaps, &Caps::with_counter_cap(5)).unwrap();
        assert!(rep.all_hold());
        assert!(rep.outcomes[0].checks >= 5);
    }

    #[test]
    fn drive_follows_fixed_and_greedy_loops() {
        // inc a; loop{inc x}; loop{dec x; inc y}; halt x
        let p = prog(vec![
            Command::Inc(c("a")),
            Command::Goto(5, 3),
            Command::Inc(c("x")),
            Command::Goto(2, 2),
            Command::Goto(9, 6),
            Command::Dec(c("x")),
            Command::Inc(c("y")),
            Command::Goto(5, 5),
            Command::Halt(vec![c("x")]),
        ]);
        let sched = Schedule::new().fix_line(2, 3);
        let t = drive(&p, 1, &sched, 100).unwrap().unwrap();
        assert_eq!(t.verify(&p, 1).unwrap(), vec![1, 0, 3]);
        // Fixing the second loop to one pass leaves x nonzero.
        let sched = Schedule::new().fix_line(2, 3).fix_line(5, 1);
        assert!(drive(&p, 1, &sched, 100).unwrap().is_none());
    }

    #[test]
    fn drive_rejects_unstructured_gotos() {
        let p = prog(vec![Command::Goto(2, 3), Command::Inc(c("x")), Command::Halt(vec![])]);
        assert!(matches!(
            drive(&p, 1, &Schedule::new(), 4),
            Err(SemanticsError::Unstructured(1))
        ));
    }

    #[test]
    fn replay_rejects_bogus_steps() {
        let p = prog(vec![Command::Dec(c("x")), Command::Halt(vec![])]);
        let t = Trace { lines: vec![1, 2] };
        assert!(matches!(t.verify(&p, 1), Err(ReplayError::NotASuccessor { .. })));
        let p = prog(vec![Command::Inc(c("x")), Command::Halt(vec![c("x")])]);
        assert_eq!(t.verify(&p, 1), Err(ReplayError::HaltRejects(c("x"))));
    }
}
