//! Lowering of test-free programs to VASS and Petri nets, a VASS
//! reachability search, and the `.vass` / PNML writers.
//!
//! One control state per program line. A halt `halt S` at line `m` gets a
//! drain self-loop `(m, -e_y, m)` for every counter `y` outside `S`, so "the
//! program has a complete run" becomes "`(m, 0)` is reachable from `(1, 0)`".

use std::collections::VecDeque;
use std::fmt::{self, Write as _};

use quick_xml::escape::escape;
use rustc_hash::FxHashMap;
use thiserror::Error;

use crate::ir::{classify_counters, validate, Command, CounterId, Diagnostic, Program};
use crate::semantics::{Caps, Trace};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TranslateError {
    #[error("tested counters present: {0:?}")]
    Tested(Vec<CounterId>),
    #[error("invalid program: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Diagnostic>),
    #[error("no transition from state {from} to state {to}")]
    NoTransition { from: usize, to: usize },
    #[error("transition {0} would make a counter negative")]
    Negative(usize),
    #[error("transition {0} does not exist")]
    UnknownTransition(usize),
    #[error("control invariant broken after step {0}")]
    Control(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

/// A transition moving at most one counter by one.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Transition {
    pub from: usize,
    pub to: usize,
    pub delta: Option<(usize, Sign)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vass {
    pub counters: Vec<CounterId>,
    /// States are `1..=states`.
    pub states: usize,
    pub transitions: Vec<Transition>,
    pub init: usize,
    pub target: usize,
}

impl Transition {
    pub fn delta_vector(&self, dim: usize) -> Vec<i64> {
        let mut v = vec![0; dim];
        if let Some((x, s)) = self.delta {
            v[x] = match s {
                Sign::Plus => 1,
                Sign::Minus => -1,
            };
        }
        v
    }
}

pub fn to_vass(p: &Program) -> Result<Vass, TranslateError> {
    validate(p).map_err(TranslateError::Invalid)?;
    let tested = classify_counters(p).tested;
    if !tested.is_empty() {
        return Err(TranslateError::Tested(tested.into_iter().collect()));
    }
    let counters = p.counters();
    let pos = |x: &CounterId| counters.iter().position(|c| c == x).expect("own counter");
    let mut transitions = Vec::new();
    for (i, cmd) in p.commands().iter().enumerate() {
        let l = i + 1;
        let step = |delta| Transition {
            from: l,
            to: l + 1,
            delta,
        };
        match cmd {
            Command::Inc(x) => transitions.push(step(Some((pos(x), Sign::Plus)))),
            Command::Dec(x) => transitions.push(step(Some((pos(x), Sign::Minus)))),
            Command::Goto(a, b) => {
                transitions.push(Transition {
                    from: l,
                    to: *a,
                    delta: None,
                });
                if a != b {
                    transitions.push(Transition {
                        from: l,
                        to: *b,
                        delta: None,
                    });
                }
            }
            Command::Halt(zs) => {
                for (k, y) in counters.iter().enumerate() {
                    if !zs.contains(y) {
                        transitions.push(Transition {
                            from: l,
                            to: l,
                            delta: Some((k, Sign::Minus)),
                        });
                    }
                }
            }
            Command::TestZero(_) | Command::TestMax(_) => unreachable!("no tested counters"),
        }
    }
    Ok(Vass {
        counters,
        states: p.len(),
        transitions,
        init: 1,
        target: p.len(),
    })
}

/// Applies one transition; `false` if a counter would go negative.
fn fire(t: &Transition, vals: &mut [u64]) -> bool {
    match t.delta {
        Some((x, Sign::Minus)) if vals[x] == 0 => false,
        Some((x, Sign::Minus)) => {
            vals[x] -= 1;
            true
        }
        Some((x, Sign::Plus)) => {
            vals[x] += 1;
            true
        }
        None => true,
    }
}

/// Replays transition indices from `(init, 0)`; returns the final state and
/// vector.
pub fn replay_path(v: &Vass, path: &[usize]) -> Result<(usize, Vec<u64>), TranslateError> {
    let mut state = v.init;
    let mut vals = vec![0u64; v.counters.len()];
    for &k in path {
        let t = v
            .transitions
            .get(k)
            .ok_or(TranslateError::UnknownTransition(k))?;
        if t.from != state {
            return Err(TranslateError::NoTransition {
                from: state,
                to: t.to,
            });
        }
        if !fire(t, &mut vals) {
            return Err(TranslateError::Negative(k));
        }
        state = t.to;
    }
    Ok((state, vals))
}

/// The VASS path that follows a program run line by line and then drains
/// every counter left over at the halt.
pub fn path_from_trace(v: &Vass, trace: &Trace) -> Result<Vec<usize>, TranslateError> {
    let mut out = Vec::with_capacity(trace.len());
    let mut vals = vec![0u64; v.counters.len()];
    for w in trace.lines.windows(2) {
        let (from, to) = (w[0] as usize, w[1] as usize);
        let k = v
            .transitions
            .iter()
            .position(|t| t.from == from && t.to == to && (t.from != t.to || t.delta.is_none()))
            .ok_or(TranslateError::NoTransition { from, to })?;
        if !fire(&v.transitions[k], &mut vals) {
            return Err(TranslateError::Negative(k));
        }
        out.push(k);
    }
    let end = trace.lines.last().map_or(v.init, |&l| l as usize);
    for (x, &n) in vals.iter().enumerate() {
        if n == 0 {
            continue;
        }
        let drain = v
            .transitions
            .iter()
            .position(|t| t.from == end && t.to == end && t.delta == Some((x, Sign::Minus)))
            .ok_or(TranslateError::NoTransition { from: end, to: end })?;
        out.extend(std::iter::repeat_n(drain, n as usize));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Reach {
    /// Witness as transition indices.
    Reachable(Vec<usize>),
    /// No cap was hit: the target is unreachable.
    Unreachable,
    /// Not found, but some cap cut the search.
    Truncated,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ReachStats {
    pub states: u64,
    pub depth: u64,
    pub counter_cap_hit: bool,
    pub state_cap_hit: bool,
    pub step_cap_hit: bool,
}

/// Breadth-first search over `(state, vector)`.
///
/// A transition raising a counter to `counter_cap` is cut and marks the
/// result as truncated, matching the program explorer.
pub fn vass_reach(v: &Vass, caps: &Caps) -> (Reach, ReachStats) {
    let dim = v.counters.len();
    let mut out_of: Vec<Vec<usize>> = vec![Vec::new(); v.states + 1];
    for (k, t) in v.transitions.iter().enumerate() {
        out_of[t.from].push(k);
    }
    type Key = (usize, Box<[u64]>);
    // parent: (predecessor id, transition)
    let mut ids: FxHashMap<Key, usize> = FxHashMap::default();
    let mut nodes: Vec<(Key, Option<(usize, usize)>)> = Vec::new();
    let mut stats = ReachStats::default();
    let start: Key = (v.init, vec![0; dim].into_boxed_slice());
    ids.insert(start.clone(), 0);
    nodes.push((start, None));
    let mut frontier: VecDeque<(usize, u64)> = VecDeque::from([(0, 0)]);
    let is_target = |k: &Key| k.0 == v.target && k.1.iter().all(|&x| x == 0);
    let mut found = if is_target(&nodes[0].0) { Some(0) } else { None };
    'search: while let Some((id, depth)) = frontier.pop_front() {
        if found.is_some() {
            break;
        }
        stats.depth = stats.depth.max(depth);
        if depth >= caps.step_cap {
            stats.step_cap_hit = true;
            continue;
        }
        let (state, vals) = nodes[id].0.clone();
        for &k in &out_of[state] {
            let t = &v.transitions[k];
            let mut next = vals.clone();
            if !fire(t, &mut next) {
                continue;
            }
            if let Some((x, Sign::Plus)) = t.delta {
                if next[x] >= caps.counter_cap {
                    stats.counter_cap_hit = true;
                    continue;
                }
            }
            let key: Key = (t.to, next);
            if ids.contains_key(&key) {
                continue;
            }
            if ids.len() as u64 >= caps.state_cap {
                stats.state_cap_hit = true;
                break 'search;
            }
            let nid = nodes.len();
            ids.insert(key.clone(), nid);
            let hit = is_target(&key);
            nodes.push((key, Some((id, k))));
            if hit {
                found = Some(nid);
                break 'search;
            }
            frontier.push_back((nid, depth + 1));
        }
    }
    stats.states = nodes.len() as u64;
    let reach = match found {
        Some(mut id) => {
            let mut path = Vec::new();
            while let Some((prev, k)) = nodes[id].1 {
                path.push(k);
                id = prev;
            }
            path.reverse();
            Reach::Reachable(path)
        }
        None if stats.counter_cap_hit || stats.state_cap_hit || stats.step_cap_hit => {
            Reach::Truncated
        }
        None => Reach::Unreachable,
    };
    (reach, stats)
}

/// `.vass` text: header lines, then one `t from to x+|x-|-` line per
/// transition in order.
pub fn export_vass_text(v: &Vass) -> String {
    let mut out = String::from("vass\n");
    out.push_str("counters");
    for c in &v.counters {
        out.push(' ');
        out.push_str(c.as_str());
    }
    out.push('\n');
    let _ = writeln!(out, "states {}", v.states);
    let _ = writeln!(out, "init {}", v.init);
    let _ = writeln!(out, "target {}", v.target);
    for t in &v.transitions {
        let _ = write!(out, "t {} {} ", t.from, t.to);
        match t.delta {
            Some((x, s)) => {
                let sign = if s == Sign::Plus { '+' } else { '-' };
                let _ = writeln!(out, "{}{sign}", v.counters[x]);
            }
            None => out.push_str("-\n"),
        }
    }
    out
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("line {line}: {message}")]
pub struct VassParseError {
    pub line: usize,
    pub message: String,
}

/// Reads the `.vass` format back.
pub fn parse_vass_text(text: &str) -> Result<Vass, VassParseError> {
    let mut lines = text.lines().enumerate();
    let mut next = |want: &str| -> Result<(usize, Vec<&str>), VassParseError> {
        let (i, l) = lines.next().ok_or(VassParseError {
            line: 0,
            message: format!("missing {want} line"),
        })?;
        let words: Vec<&str> = l.split(' ').collect();
        if words[0] != want {
            return Err(VassParseError {
                line: i + 1,
                message: format!("expected {want}"),
            });
        }
        Ok((i + 1, words[1..].to_vec()))
    };
    let err = |line: usize, m: &str| VassParseError {
        line,
        message: m.to_string(),
    };
    let num = |line: usize, w: &[&str]| -> Result<usize, VassParseError> {
        match w {
            [n] => n.parse().map_err(|_| err(line, "expected a number")),
            _ => Err(err(line, "expected one number")),
        }
    };
    let (l, w) = next("vass")?;
    if !w.is_empty() {
        return Err(err(l, "trailing text after vass"));
    }
    let (_, names) = next("counters")?;
    let counters: Vec<CounterId> = names.iter().map(CounterId::new).collect();
    let (l, w) = next("states")?;
    let states = num(l, &w)?;
    let (l, w) = next("init")?;
    let init = num(l, &w)?;
    let (l, w) = next("target")?;
    let target = num(l, &w)?;
    let mut transitions = Vec::new();
    for (i, raw) in lines {
        let l = i + 1;
        let w: Vec<&str> = raw.split(' ').collect();
        let [kw, from, to, d] = w.as_slice() else {
            return Err(err(l, "expected `t from to delta`"));
        };
        if *kw != "t" {
            return Err(err(l, "expected `t`"));
        }
        let from = num(l, &[from])?;
        let to = num(l, &[to])?;
        let delta = if *d == "-" {
            None
        } else {
            let (name, sign) = d.split_at(d.len() - 1);
            let sign = match sign {
                "+" => Sign::Plus,
                "-" => Sign::Minus,
                _ => return Err(err(l, "delta must end in + or -")),
            };
            let x = counters
                .iter()
                .position(|c| c.as_str() == name)
                .ok_or_else(|| err(l, "unknown counter"))?;
            Some((x, sign))
        };
        transitions.push(Transition { from, to, delta });
    }
    Ok(Vass {
        counters,
        states,
        transitions,
        init,
        target,
    })
}

/// Place/transition net with one control place per VASS state and one
/// place per counter.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PetriNet {
    pub places: Vec<String>,
    /// Number of leading places that encode control.
    pub control_places: usize,
    pub transitions: Vec<NetTransition>,
    pub initial: Vec<u64>,
    pub target: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NetTransition {
    pub id: String,
    /// `(place, weight)` consumed.
    pub pre: Vec<(usize, u64)>,
    /// `(place, weight)` produced.
    pub post: Vec<(usize, u64)>,
}

/// XML id for a counter place: `'` becomes `-p`, `#` becomes `-h`, `^`
/// becomes `-c`.
pub fn counter_place_id(x: &CounterId) -> String {
    let mut id = String::from("c_");
    for ch in x.as_str().chars() {
        match ch {
            '\'' => id.push_str("-p"),
            '#' => id.push_str("-h"),
            '^' => id.push_str("-c"),
            c => id.push(c),
        }
    }
    id
}

pub fn to_petri_net(v: &Vass) -> PetriNet {
    let m = v.states;
    let mut places: Vec<String> = (1..=m).map(|k| format!("s{k}")).collect();
    places.extend(v.counters.iter().map(counter_place_id));
    let transitions = v
        .transitions
        .iter()
        .enumerate()
        .map(|(k, t)| {
            let mut pre = vec![(t.from - 1, 1)];
            let mut post = vec![(t.to - 1, 1)];
            match t.delta {
                Some((x, Sign::Minus)) => pre.push((m + x, 1)),
                Some((x, Sign::Plus)) => post.push((m + x, 1)),
                None => {}
            }
            NetTransition {
                id: format!("t{}", k + 1),
                pre,
                post,
            }
        })
        .collect();
    let mut initial = vec![0; places.len()];
    initial[v.init - 1] = 1;
    let mut target = vec![0; places.len()];
    target[v.target - 1] = 1;
    PetriNet {
        places,
        control_places: m,
        transitions,
        initial,
        target,
    }
}

impl PetriNet {
    /// Fires transition `k`, or returns `false` leaving `marking` unchanged.
    pub fn fire(&self, k: usize, marking: &mut [u64]) -> bool {
        let t = &self.transitions[k];
        if t.pre.iter().any(|&(p, w)| marking[p] < w) {
            return false;
        }
        for &(p, w) in &t.pre {
            marking[p] -= w;
        }
        for &(p, w) in &t.post {
            marking[p] += w;
        }
        true
    }

    /// Replays a VASS path on the net, checking after every step that the
    /// control places hold exactly one token. Returns the final marking.
    pub fn replay(&self, path: &[usize]) -> Result<Vec<u64>, TranslateError> {
        let mut marking = self.initial.clone();
        for (step, &k) in path.iter().enumerate() {
            if k >= self.transitions.len() {
                return Err(TranslateError::UnknownTransition(k));
            }
            if !self.fire(k, &mut marking) {
                return Err(TranslateError::Negative(k));
            }
            if marking[..self.control_places].iter().sum::<u64>() != 1 {
                return Err(TranslateError::Control(step));
            }
        }
        Ok(marking)
    }
}

const PNML_NS: &str = "http://www.pnml.org/version-2009/grammar/pnml";
const PTNET_TYPE: &str = "http://www.pnml.org/version-2009/grammar/ptnet";

/// PNML (P/T net type). The target marking, which PNML has no element
/// for, goes into a `toolspecific` block.
pub fn export_pnml(n: &PetriNet, name: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(out, r#"<pnml xmlns="{PNML_NS}">"#);
    let _ = writeln!(out, r#"  <net id="net" type="{PTNET_TYPE}">"#);
    let _ = writeln!(out, "    <name><text>{}</text></name>", escape(name));
    let _ = writeln!(out, r#"    <page id="page">"#);
    for (k, p) in n.places.iter().enumerate() {
        let _ = write!(out, r#"      <place id="{p}"><name><text>{p}</text></name>"#);
        if n.initial[k] > 0 {
            let _ = write!(out, "<initialMarking><text>{}</text></initialMarking>", n.initial[k]);
        }
        out.push_str("</place>\n");
    }
    for t in &n.transitions {
        let _ = writeln!(out, r#"      <transition id="{0}"><name><text>{0}</text></name></transition>"#, t.id);
    }
    let mut arc = 0;
    for t in &n.transitions {
        let arcs = t
            .pre
            .iter()
            .map(|&(p, w)| (&n.places[p], &t.id, w))
            .chain(t.post.iter().map(|&(p, w)| (&t.id, &n.places[p], w)));
        for (src, dst, w) in arcs {
            arc += 1;
            let _ = write!(out, r#"      <arc id="a{arc}" source="{src}" target="{dst}">"#);
            if w != 1 {
                let _ = write!(out, "<inscription><text>{w}</text></inscription>");
            }
            out.push_str("</arc>\n");
        }
    }
    let _ = writeln!(out, "    </page>");
    let _ = writeln!(out, r#"    <toolspecific tool="towerforge" version="1">"#);
    out.push_str("      <targetMarking>");
    for (k, &tok) in n.target.iter().enumerate() {
        if tok > 0 {
            let _ = write!(out, r#"<token place="{}" count="{tok}"/>"#, n.places[k]);
        }
    }
    out.push_str("</targetMarking>\n");
    let _ = writeln!(
        out,
        "      <control places=\"{}\">one place per program line</control>",
        n.control_places
    );
    let _ = writeln!(out, "    </toolspecific>");
    let _ = writeln!(out, "  </net>");
    out.push_str("</pnml>\n");
    out
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PnmlError {
    #[error("malformed XML: {0}")]
    Xml(String),
    #[error("{0}")]
    Grammar(String),
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PnmlSummary {
    pub places: usize,
    pub transitions: usize,
    pub arcs: usize,
}

fn is_ncname(s: &str) -> bool {
    let mut cs = s.chars();
    matches!(cs.next(), Some(c) if c.is_alphabetic() || c == '_')
        && cs.all(|c| c.is_alphanumeric() || matches!(c, '_' | '-' | '.'))
}

/// Checks a document against the P/T-net grammar as far as this crate
/// writes it: namespace and net type, unique NCName ids, places and
/// transitions under a page, arcs joining a place and a transition,
/// natural initial markings and positive inscriptions.
pub fn check_pnml(text: &str) -> Result<PnmlSummary, PnmlError> {
    use quick_xml::events::Event;
    use std::collections::{HashMap, HashSet};

    let bad = |m: String| Err(PnmlError::Grammar(m));
    let mut reader = quick_xml::Reader::from_str(text);
    let mut stack: Vec<String> = Vec::new();
    let mut ids: HashSet<String> = HashSet::new();
    let mut kind: HashMap<String, &'static str> = HashMap::new();
    let mut arcs: Vec<(String, String)> = Vec::new();
    let mut nets = 0;
    let mut sum = PnmlSummary::default();
    loop {
        let ev = reader
            .read_event()
            .map_err(|e| PnmlError::Xml(e.to_string()))?;
        let (start, empty) = match &ev {
            Event::Start(e) => (Some(e.clone()), false),
            Event::Empty(e) => (Some(e.clone()), true),
            _ => (None, false),
        };
        if let Some(e) = start {
            let name = String::from_utf8_lossy(e.name().as_ref()).into_owned();
            let mut attrs: HashMap<String, String> = HashMap::new();
            for a in e.attributes() {
                let a = a.map_err(|e| PnmlError::Xml(e.to_string()))?;
                let v = a
                    .unescape_value()
                    .map_err(|e| PnmlError::Xml(e.to_string()))?;
                attrs.insert(String::from_utf8_lossy(a.key.as_ref()).into_owned(), v.into_owned());
            }
            let parent = stack.last().map(String::as_str);
            let in_tool = stack.iter().any(|s| s == "toolspecific");
            match (name.as_str(), parent) {
                ("pnml", None) => {
                    if attrs.get("xmlns").map(String::as_str) != Some(PNML_NS) {
                        return bad("pnml element lacks the PNML namespace".into());
                    }
                }
                (_, None) => return bad(format!("root element is {name}, not pnml")),
                ("net", Some("pnml")) => {
                    nets += 1;
                    if attrs.get("type").map(String::as_str) != Some(PTNET_TYPE) {
                        return bad("net type is not the P/T net type".into());
                    }
                }
                ("page", Some("net" | "page")) => {}
                ("place" | "transition" | "arc", Some("page")) => {
                    let Some(id) = attrs.get("id") else {
                        return bad(format!("{name} without id"));
                    };
                    if name == "arc" {
                        let (Some(s), Some(t)) = (attrs.get("source"), attrs.get("target")) else {
                            return bad(format!("arc {id} lacks source or target"));
                        };
                        arcs.push((s.clone(), t.clone()));
                        sum.arcs += 1;
                    } else if name == "place" {
                        kind.insert(id.clone(), "place");
                        sum.places += 1;
                    } else {
                        kind.insert(id.clone(), "transition");
                        sum.transitions += 1;
                    }
                }
                ("name" | "initialMarking" | "inscription" | "text" | "toolspecific", _) => {}
                _ if in_tool => {}
                _ => return bad(format!("unexpected {name} under {}", parent.unwrap_or("-"))),
            }
            if let Some(id) = attrs.get("id") {
                if !in_tool && name != "toolspecific" {
                    if !is_ncname(id) {
                        return bad(format!("id {id:?} is not an NCName"));
                    }
                    if !ids.insert(id.clone()) {
                        return bad(format!("duplicate id {id}"));
                    }
                }
            }
            if !empty {
                stack.push(name);
            }
            continue;
        }
        match ev {
            Event::End(_) => {
                stack.pop();
            }
            Event::Text(t) => {
                let n = stack.len();
                if n >= 2 && stack[n - 1] == "text" {
                    let v = t.unescape().map_err(|e| PnmlError::Xml(e.to_string()))?;
                    let v = v.trim();
                    match stack[n - 2].as_str() {
                        "initialMarking" if v.parse::<u64>().is_err() => {
                            return bad(format!("initial marking {v:?} is not a natural"));
                        }
                        "inscription" if !v.parse::<u64>().is_ok_and(|w| w > 0) => {
                            return bad(format!("inscription {v:?} is not positive"));
                        }
                        _ => {}
                    }
                }
            }
            Event::Eof => break,
            _ => {}
        }
    }
    if nets != 1 {
        return bad(format!("{nets} nets, expected one"));
    }
    for (s, t) in &arcs {
        match (kind.get(s), kind.get(t)) {
            (Some(&"place"), Some(&"transition")) | (Some(&"transition"), Some(&"place")) => {}
            _ => return bad(format!("arc {s} -> {t} does not join a place and a transition")),
        }
    }
    Ok(sum)
}

impl fmt::Display for Reach {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Reach::Reachable(p) => write!(f, "reachable ({} steps)", p.len()),
            Reach::Unreachable => f.write_str("unreachable"),
            Reach::Truncated => f.write_str("unreachable within caps (truncated)"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse;

    fn vass_of(text: &str) -> Vass {
        to_vass(&parse(text).unwrap()).unwrap()
    }

    #[test]
    fn increment_then_listed_halt() {
        let v = vass_of("inc x\nhalt x");
        assert_eq!((v.states, v.transitions.len()), (2, 1));
        assert_eq!(vass_reach(&v, &Caps::default()).0, Reach::Unreachable);
    }

    #[test]
    fn drain_makes_target_reachable() {
        let v = vass_of("inc x\nhalt");
        assert_eq!(v.transitions.len(), 2);
        assert_eq!(
            v.transitions[1],
            Transition {
                from: 2,
                to: 2,
                delta: Some((0, Sign::Minus))
            }
        );
        assert_eq!(vass_reach(&v, &Caps::default()).0, Reach::Reachable(vec![0, 1]));
        assert_eq!(vass_reach(&vass_of("dec x\nhalt"), &Caps::default()).0, Reach::Unreachable);
    }

    #[test]
    fn tested_programs_are_rejected() {
        assert!(matches!(
            to_vass(&parse("tz x\nhalt").unwrap()),
            Err(TranslateError::Tested(_))
        ));
    }

    #[test]
    fn vass_text_format() {
        let v = vass_of("inc x\nhalt");
        assert_eq!(
            export_vass_text(&v),
            "vass\ncounters x\nstates 2\ninit 1\ntarget 2\nt 1 2 x+\nt 2 2 x-\n"
        );
        let v = vass_of("goto 1 2\nhalt");
        assert_eq!(
            export_vass_text(&v),
            "vass\ncounters\nstates 2\ninit 1\ntarget 2\nt 1 1 -\nt 1 2 -\n"
        );
        assert_eq!(parse_vass_text(&export_vass_text(&v)).unwrap(), v);
    }

    #[test]
    fn pumping_is_truncated() {
        let v = vass_of("inc x\ngoto 1 3\nhalt x");
        let (r, s) = vass_reach(&v, &Caps::with_counter_cap(5));
        assert_eq!(r, Reach::Truncated);
        assert!(s.counter_cap_hit);
    }

    #[test]
    fn net_shape_and_replay() {
        let v = vass_of("inc x\nhalt");
        let n = to_petri_net(&v);
        assert_eq!(n.places, ["s1", "s2", "c_x"]);
        assert_eq!(n.transitions.len(), 2);
        let m = n.replay(&[0, 1]).unwrap();
        assert_eq!(m, n.target);
        assert_eq!(n.replay(&[1]), Err(TranslateError::Negative(1)));
    }

    #[test]
    fn pnml_passes_the_grammar_check() {
        let n = to_petri_net(&vass_of("inc x'\ngoto 1 3\nhalt"));
        let doc = export_pnml(&n, "a<b");
        let sum = check_pnml(&doc).unwrap();
        assert_eq!((sum.places, sum.transitions), (4, 4));
        assert_eq!(sum.arcs, 3 + 2 + 2 + 3);
        let broken = doc.replacen(r#"target="t1""#, r#"target="s2""#, 1);
        assert!(matches!(check_pnml(&broken), Err(PnmlError::Grammar(_))));
        let wrong_type = doc.replace(PTNET_TYPE, "http://example.org/other");
        assert!(check_pnml(&wrong_type).is_err());
        assert!(check_pnml("<pnml>").is_err());
    }

    #[test]
    fn place_ids_are_sanitized() {
        assert_eq!(counter_place_id(&CounterId::new("b'#1^2")), "c_b-p-h1-c2");
    }

    #[test]
    fn program_runs_map_to_paths() {
        let p = parse("inc x\ninc y\ngoto 4 4\ndec x\nhalt x").unwrap();
        let v = to_vass(&p).unwrap();
        let t = Trace {
            lines: vec![1, 2, 3, 4, 5],
        };
        let path = path_from_trace(&v, &t).unwrap();
        assert_eq!(replay_path(&v, &path).unwrap(), (5, vec![0, 0]));
        assert_eq!(path.len(), 5);
    }
}
