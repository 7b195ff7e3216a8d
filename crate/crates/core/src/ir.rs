//! Counter-program intermediate representation.
//!
//! A [`Program`] is a 1-indexed list of [`Command`]s ending in a single
//! `halt`. Every generator and transformation in the crate consumes and
//! produces this form. Macro bodies are assembled as [`Fragment`]s with
//! relative jumps and named anchors, then linked by [`splice`].

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// Name of a counter. Equality is exact string equality.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CounterId(Arc<str>);

impl CounterId {
    pub fn new(name: impl AsRef<str>) -> Self {
        CounterId(Arc::from(name.as_ref()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Whether `name` is usable as a counter name in `.cp` text.
    ///
    /// Names use letters, digits, `_`, `'`, `^` and `#`; a name may not start
    /// with `#` (that would read as a comment).
    pub fn is_valid_name(name: &str) -> bool {
        !name.is_empty()
            && !name.starts_with('#')
            && name
                .chars()
                .all(|c| c.is_alphanumeric() || matches!(c, '_' | '\'' | '^' | '#'))
    }
}

impl fmt::Debug for CounterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", &*self.0)
    }
}

impl fmt::Display for CounterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for CounterId {
    fn from(s: &str) -> Self {
        CounterId::new(s)
    }
}

impl From<String> for CounterId {
    fn from(s: String) -> Self {
        CounterId::new(s)
    }
}

/// One command of a counter program. Goto targets are 1-based lines.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Command {
    Inc(CounterId),
    Dec(CounterId),
    Goto(usize, usize),
    TestZero(CounterId),
    TestMax(CounterId),
    Halt(Vec<CounterId>),
}

impl Command {
    /// The counter touched by an inc/dec/test, if any.
    pub fn counter(&self) -> Option<&CounterId> {
        match self {
            Command::Inc(x) | Command::Dec(x) | Command::TestZero(x) | Command::TestMax(x) => {
                Some(x)
            }
            Command::Goto(..) | Command::Halt(_) => None,
        }
    }

    pub fn is_test(&self) -> bool {
        matches!(self, Command::TestZero(_) | Command::TestMax(_))
    }

    fn map_counters(&self, f: &impl Fn(&CounterId) -> CounterId) -> Command {
        match self {
            Command::Inc(x) => Command::Inc(f(x)),
            Command::Dec(x) => Command::Dec(f(x)),
            Command::TestZero(x) => Command::TestZero(f(x)),
            Command::TestMax(x) => Command::TestMax(f(x)),
            Command::Goto(a, b) => Command::Goto(*a, *b),
            Command::Halt(zs) => Command::Halt(zs.iter().map(f).collect()),
        }
    }
}

/// A counter program together with its landmark table (symbolic name to
/// 1-based line).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Program {
    commands: Vec<Command>,
    landmarks: BTreeMap<String, usize>,
}

impl Program {
    pub fn new(commands: Vec<Command>) -> Self {
        Program {
            commands,
            landmarks: BTreeMap::new(),
        }
    }

    pub fn with_landmarks(commands: Vec<Command>, landmarks: BTreeMap<String, usize>) -> Self {
        Program {
            commands,
            landmarks,
        }
    }

    pub fn commands(&self) -> &[Command] {
        &self.commands
    }

    pub fn len(&self) -> usize {
        self.commands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.commands.is_empty()
    }

    /// Command at a 1-based line.
    pub fn command(&self, line: usize) -> Option<&Command> {
        line.checked_sub(1).and_then(|i| self.commands.get(i))
    }

    pub fn landmarks(&self) -> &BTreeMap<String, usize> {
        &self.landmarks
    }

    pub fn landmark(&self, name: &str) -> Option<usize> {
        self.landmarks.get(name).copied()
    }

    pub fn set_landmark(&mut self, name: impl Into<String>, line: usize) {
        self.landmarks.insert(name.into(), line);
    }

    /// The counters listed by the terminal halt (empty if the program has none).
    pub fn halt_list(&self) -> &[CounterId] {
        match self.commands.last() {
            Some(Command::Halt(zs)) => zs,
            _ => &[],
        }
    }

    /// All counters in order of first occurrence.
    pub fn counters(&self) -> Vec<CounterId> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for cmd in &self.commands {
            let names: Vec<&CounterId> = match cmd {
                Command::Halt(zs) => zs.iter().collect(),
                other => other.counter().into_iter().collect(),
            };
            for x in names {
                if seen.insert(x.clone()) {
                    out.push(x.clone());
                }
            }
        }
        out
    }

    /// Applies a renaming to every counter occurrence; landmarks are kept.
    pub fn rename(&self, map: &HashMap<CounterId, CounterId>) -> Program {
        let f = |x: &CounterId| map.get(x).cloned().unwrap_or_else(|| x.clone());
        Program {
            commands: self.commands.iter().map(|c| c.map_counters(&f)).collect(),
            landmarks: self.landmarks.clone(),
        }
    }

    pub fn count_tests(&self) -> usize {
        self.commands.iter().filter(|c| c.is_test()).count()
    }
}

/// Partition of a program's counters by occurrence in a test command.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct ClassifiedCounters {
    pub tested: BTreeSet<CounterId>,
    pub untested: BTreeSet<CounterId>,
}

pub fn classify_counters(p: &Program) -> ClassifiedCounters {
    let tested: BTreeSet<CounterId> = p
        .commands
        .iter()
        .filter(|c| c.is_test())
        .filter_map(|c| c.counter().cloned())
        .collect();
    let untested = p
        .counters()
        .into_iter()
        .filter(|x| !tested.contains(x))
        .collect();
    ClassifiedCounters { tested, untested }
}

/// Tested counters in order of first occurrence in the program text.
pub fn tested_in_order(p: &Program) -> Vec<CounterId> {
    let classes = classify_counters(p);
    p.counters()
        .into_iter()
        .filter(|x| classes.tested.contains(x))
        .collect()
}

/// A structural problem found by [`validate`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    /// 1-based line, when the problem is attached to one.
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

/// Checks the program invariants; never aborts, returns every problem found.
pub fn validate(p: &Program) -> Result<(), Vec<Diagnostic>> {
    let mut diags = Vec::new();
    let n = p.commands.len();
    if n == 0 {
        diags.push(Diagnostic {
            line: None,
            message: "empty program".into(),
        });
        return Err(diags);
    }
    for (idx, cmd) in p.commands.iter().enumerate() {
        let line = idx + 1;
        match cmd {
            Command::Halt(_) if line != n => diags.push(Diagnostic {
                line: Some(line),
                message: "halt not last".into(),
            }),
            Command::Goto(a, b) => {
                for t in [a, b] {
                    if *t == 0 || *t > n {
                        diags.push(Diagnostic {
                            line: Some(line),
                            message: format!("goto target {t} out of range"),
                        });
                    }
                }
            }
            _ => {}
        }
        if let Some(x) = cmd.counter() {
            if !CounterId::is_valid_name(x.as_str()) {
                diags.push(Diagnostic {
                    line: Some(line),
                    message: format!("invalid counter name {:?}", x.as_str()),
                });
            }
        }
    }
    if !matches!(p.commands.last(), Some(Command::Halt(_))) {
        diags.push(Diagnostic {
            line: Some(n),
            message: "missing halt".into(),
        });
    }
    for (name, &line) in &p.landmarks {
        if line == 0 || line > n {
            diags.push(Diagnostic {
                line: None,
                message: format!("landmark {name} points at line {line} out of range"),
            });
        }
    }
    if diags.is_empty() {
        Ok(())
    } else {
        Err(diags)
    }
}

/// Smallest `name#k` (k >= 1) not in `taken`.
pub fn fresh_name(base: &str, taken: &HashSet<CounterId>) -> CounterId {
    (1..)
        .map(|k| CounterId::new(format!("{base}#{k}")))
        .find(|c| !taken.contains(c))
        .expect("unbounded suffix search")
}

/// Renames `b`'s counters away from `a`'s.
///
/// Returns `b'` and the renaming map (old to new); `a` is untouched.
pub fn rename_apart(a: &Program, b: &Program) -> (Program, BTreeMap<CounterId, CounterId>) {
    let a_names: HashSet<CounterId> = a.counters().into_iter().collect();
    let b_names = b.counters();
    let mut taken: HashSet<CounterId> = a_names.iter().cloned().collect();
    taken.extend(b_names.iter().cloned());
    let mut map = BTreeMap::new();
    for x in b_names {
        if a_names.contains(&x) {
            let fresh = fresh_name(x.as_str(), &taken);
            taken.insert(fresh.clone());
            map.insert(x, fresh);
        }
    }
    let hmap: HashMap<CounterId, CounterId> = map.clone().into_iter().collect();
    (b.rename(&hmap), map)
}

/// Jump target inside a [`Fragment`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Jump {
    /// Offset from the jumping command's own position; an offset landing on
    /// the fragment length means "fall out of the fragment".
    Rel(isize),
    /// A named anchor declared by some fragment of the same splice.
    Anchor(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FragmentCommand {
    Inc(CounterId),
    Dec(CounterId),
    Goto(Jump, Jump),
    TestZero(CounterId),
    TestMax(CounterId),
    Halt(Vec<CounterId>),
}

/// A relocatable command block.
///
/// Entry is position 0 and exit is position `len()`. Anchors name positions
/// (0..=len) and become landmarks of the spliced program.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Fragment {
    commands: Vec<FragmentCommand>,
    anchors: BTreeMap<String, usize>,
}

impl Fragment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_commands(commands: Vec<FragmentCommand>) -> Self {
        Fragment {
            commands,
            anchors: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.commands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.commands.is_empty()
    }

    pub fn commands(&self) -> &[FragmentCommand] {
        &self.commands
    }

    pub fn anchors(&self) -> &BTreeMap<String, usize> {
        &self.anchors
    }

    pub fn push(&mut self, cmd: FragmentCommand) -> &mut Self {
        self.commands.push(cmd);
        self
    }

    pub fn inc(&mut self, x: &CounterId) -> &mut Self {
        self.push(FragmentCommand::Inc(x.clone()))
    }

    pub fn dec(&mut self, x: &CounterId) -> &mut Self {
        self.push(FragmentCommand::Dec(x.clone()))
    }

    /// Appends another fragment; its relative jumps need no rewriting.
    pub fn append(&mut self, other: Fragment) -> &mut Self {
        let base = self.commands.len();
        for (name, pos) in other.anchors {
            self.anchors.insert(name, pos + base);
        }
        self.commands.extend(other.commands);
        self
    }

    /// Names the current end position.
    pub fn anchor_here(&mut self, name: impl Into<String>) -> &mut Self {
        let pos = self.commands.len();
        self.anchors.insert(name.into(), pos);
        self
    }

    pub fn set_anchor(&mut self, name: impl Into<String>, pos: usize) -> &mut Self {
        self.anchors.insert(name.into(), pos);
        self
    }

    pub fn then(mut self, other: Fragment) -> Fragment {
        self.append(other);
        self
    }

    /// Relocatable copy of a whole program minus its terminal halt. Jumps to
    /// the halt line become jumps to the fragment exit.
    pub fn from_program_body(p: &Program) -> Fragment {
        let body = match p.commands.last() {
            Some(Command::Halt(_)) => &p.commands[..p.commands.len() - 1],
            _ => &p.commands[..],
        };
        let commands = body
            .iter()
            .enumerate()
            .map(|(idx, cmd)| {
                let rel = |t: usize| Jump::Rel(t as isize - 1 - idx as isize);
                match cmd {
                    Command::Inc(x) => FragmentCommand::Inc(x.clone()),
                    Command::Dec(x) => FragmentCommand::Dec(x.clone()),
                    Command::TestZero(x) => FragmentCommand::TestZero(x.clone()),
                    Command::TestMax(x) => FragmentCommand::TestMax(x.clone()),
                    Command::Goto(a, b) => FragmentCommand::Goto(rel(*a), rel(*b)),
                    Command::Halt(zs) => FragmentCommand::Halt(zs.clone()),
                }
            })
            .collect();
        let anchors = p
            .landmarks
            .iter()
            .map(|(k, v)| (k.clone(), (v - 1).min(body.len())))
            .collect();
        Fragment { commands, anchors }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SpliceError {
    #[error("jump to undeclared anchor {0:?}")]
    DanglingAnchor(String),
    #[error("anchor {0:?} declared more than once")]
    DuplicateAnchor(String),
    #[error("jump at position {pos} lands outside the program")]
    JumpOutOfRange { pos: usize },
    #[error("more than one halt among the fragments")]
    MultipleHalt,
    #[error("halt at position {pos} is not the last command")]
    HaltNotLast { pos: usize },
}

/// Links fragments into a program.
///
/// Relative and anchor jumps are resolved to absolute 1-based lines; a
/// `halt` is appended unless the last fragment already ends with one.
pub fn splice(fragments: Vec<Fragment>) -> Result<Program, SpliceError> {
    let mut anchors: BTreeMap<String, usize> = BTreeMap::new();
    let mut commands: Vec<FragmentCommand> = Vec::new();
    for frag in fragments {
        let base = commands.len();
        for (name, pos) in frag.anchors {
            if anchors.insert(name.clone(), pos + base).is_some() {
                return Err(SpliceError::DuplicateAnchor(name));
            }
        }
        commands.extend(frag.commands);
    }
    let halts: Vec<usize> = commands
        .iter()
        .enumerate()
        .filter(|(_, c)| matches!(c, FragmentCommand::Halt(_)))
        .map(|(i, _)| i)
        .collect();
    match halts.as_slice() {
        [] => commands.push(FragmentCommand::Halt(Vec::new())),
        [pos] if *pos + 1 == commands.len() => {}
        [pos] => return Err(SpliceError::HaltNotLast { pos: *pos }),
        _ => return Err(SpliceError::MultipleHalt),
    }
    let n = commands.len();
    let resolve = |pos: usize, j: &Jump| -> Result<usize, SpliceError> {
        let target = match j {
            Jump::Rel(off) => pos as isize + off,
            Jump::Anchor(name) => *anchors
                .get(name)
                .ok_or_else(|| SpliceError::DanglingAnchor(name.clone()))?
                as isize,
        };
        if target < 0 || target as usize >= n {
            return Err(SpliceError::JumpOutOfRange { pos });
        }
        Ok(target as usize + 1)
    };
    let mut out = Vec::with_capacity(n);
    for (pos, cmd) in commands.iter().enumerate() {
        out.push(match cmd {
            FragmentCommand::Inc(x) => Command::Inc(x.clone()),
            FragmentCommand::Dec(x) => Command::Dec(x.clone()),
            FragmentCommand::TestZero(x) => Command::TestZero(x.clone()),
            FragmentCommand::TestMax(x) => Command::TestMax(x.clone()),
            FragmentCommand::Halt(zs) => Command::Halt(zs.clone()),
            FragmentCommand::Goto(a, b) => Command::Goto(resolve(pos, a)?, resolve(pos, b)?),
        });
    }
    let landmarks = anchors
        .into_iter()
        .map(|(k, v)| (k, (v + 1).min(n)))
        .collect();
    Ok(Program::with_landmarks(out, landmarks))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(s: &str) -> CounterId {
        CounterId::new(s)
    }

    #[test]
    fn classify_tested_and_untested() {
        let p = Program::new(vec![
            Command::Inc(c("x")),
            Command::TestZero(c("x")),
            Command::Halt(vec![]),
        ]);
        let k = classify_counters(&p);
        assert_eq!(k.tested, [c("x")].into_iter().collect());
        assert!(k.untested.is_empty());

        let p = Program::new(vec![
            Command::Inc(c("x")),
            Command::Inc(c("y")),
            Command::TestZero(c("x")),
            Command::Halt(vec![]),
        ]);
        let k = classify_counters(&p);
        assert_eq!(k.tested, [c("x")].into_iter().collect());
        assert_eq!(k.untested, [c("y")].into_iter().collect());
    }

    #[test]
    fn halt_only_is_valid() {
        assert_eq!(validate(&Program::new(vec![Command::Halt(vec![])])), Ok(()));
    }

    #[test]
    fn validate_reports_structural_problems() {
        let p = Program::new(vec![Command::Goto(5, 1), Command::Halt(vec![])]);
        let diags = validate(&p).unwrap_err();
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].line, Some(1));
        assert!(diags[0].message.contains("goto target 5 out of range"));

        let p = Program::new(vec![Command::Halt(vec![]), Command::Inc(c("x"))]);
        let msgs: Vec<String> = validate(&p).unwrap_err().into_iter().map(|d| d.message).collect();
        assert!(msgs.iter().any(|m| m == "halt not last"));

        let msgs = validate(&Program::new(vec![])).unwrap_err();
        assert_eq!(msgs[0].message, "empty program");

        let p = Program::new(vec![Command::Inc(c("x"))]);
        assert!(validate(&p).unwrap_err().iter().any(|d| d.message == "missing halt"));
    }

    #[test]
    fn rename_apart_cases() {
        let a = Program::new(vec![Command::Inc(c("x")), Command::Halt(vec![])]);
        let b = Program::new(vec![Command::Inc(c("y")), Command::Halt(vec![])]);
        let (b2, map) = rename_apart(&a, &b);
        assert_eq!(b2, b);
        assert!(map.is_empty());

        let b = Program::new(vec![Command::Inc(c("x")), Command::Halt(vec![c("x")])]);
        let (b2, map) = rename_apart(&a, &b);
        assert_eq!(b2.counters(), vec![c("x#1")]);
        assert_eq!(map.get(&c("x")), Some(&c("x#1")));

        let a = Program::new(vec![
            Command::Inc(c("x")),
            Command::Inc(c("x#1")),
            Command::Halt(vec![]),
        ]);
        let (b2, _) = rename_apart(&a, &b);
        assert_eq!(b2.counters(), vec![c("x#2")]);
    }

    #[test]
    fn fresh_suffix_avoids_names_already_in_the_renamed_program() {
        let a = Program::new(vec![Command::Inc(c("x")), Command::Halt(vec![])]);
        let b = Program::new(vec![
            Command::Inc(c("x")),
            Command::Inc(c("x#1")),
            Command::Halt(vec![]),
        ]);
        let (b2, _) = rename_apart(&a, &b);
        assert_eq!(b2.counters(), vec![c("x#2"), c("x#1")]);
    }

    #[test]
    fn splice_two_fragments() {
        let mut f = Fragment::new();
        f.inc(&c("x"));
        let p = splice(vec![f, Fragment::from_commands(vec![FragmentCommand::Halt(vec![])])])
            .unwrap();
        assert_eq!(p.commands(), &[Command::Inc(c("x")), Command::Halt(vec![])]);
    }

    #[test]
    fn splice_rejects_dangling_anchor_and_double_halt() {
        let f = Fragment::from_commands(vec![FragmentCommand::Goto(
            Jump::Anchor("nowhere".into()),
            Jump::Rel(1),
        )]);
        assert_eq!(
            splice(vec![f]),
            Err(SpliceError::DanglingAnchor("nowhere".into()))
        );
        let h = Fragment::from_commands(vec![FragmentCommand::Halt(vec![])]);
        assert_eq!(splice(vec![h.clone(), h]), Err(SpliceError::MultipleHalt));
    }

    #[test]
    fn program_body_roundtrips_through_splice() {
        let p = Program::new(vec![
            Command::Inc(c("x")),
            Command::Goto(4, 1),
            Command::Dec(c("x")),
            Command::Halt(vec![c("x")]),
        ]);
        let body = Fragment::from_program_body(&p);
        let halt = Fragment::from_commands(vec![FragmentCommand::Halt(vec![c("x")])]);
        assert_eq!(splice(vec![body, halt]).unwrap(), p);
    }
}
