//! The `.cp` text format.
//!
//! One command per line: `inc x`, `dec x`, `goto L1 L2`, `tz x`, `tm x`,
//! `halt [x ...]`. A `#` at the start of a line or after whitespace begins a
//! comment, so `x#1` is an ordinary counter name. Blank and comment-only
//! lines are skipped before numbering.
//!
//! The printer appends `# L<n>` to each command and, when the program has
//! landmarks, a trailer:
//!
//! ```text
//! # landmarks:
//! # main_loop=12
//! ```
//!
//! The parser reads that trailer back, so `parse(print(p)) == p` including
//! landmarks.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::ir::{validate, Command, CounterId, Diagnostic, Program};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("{line}:{col}: {message}")]
    Lexical {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("invalid program: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Diagnostic>),
}

const TRAILER: &str = "landmarks:";

/// Byte offset where the comment starts, if any.
fn comment_start(line: &str) -> Option<usize> {
    let mut prev_ws = true;
    for (i, ch) in line.char_indices() {
        if ch == '#' && prev_ws {
            return Some(i);
        }
        prev_ws = ch.is_whitespace();
    }
    None
}

pub fn parse(text: &str) -> Result<Program, ParseError> {
    let mut commands = Vec::new();
    let mut landmarks = BTreeMap::new();
    let mut in_trailer = false;
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let lex = |col: usize, message: String| ParseError::Lexical {
            line: lineno,
            col,
            message,
        };
        let (code, comment) = match comment_start(raw) {
            Some(i) => (&raw[..i], Some(raw[i + 1..].trim())),
            None => (raw, None),
        };
        if code.trim().is_empty() {
            if let Some(c) = comment {
                if c == TRAILER {
                    in_trailer = true;
                } else if in_trailer {
                    let (name, line) = c
                        .split_once('=')
                        .ok_or_else(|| lex(1, format!("malformed landmark entry {c:?}")))?;
                    let line: usize = line
                        .trim()
                        .parse()
                        .map_err(|_| lex(1, format!("malformed landmark line in {c:?}")))?;
                    landmarks.insert(name.trim().to_string(), line);
                }
            }
            continue;
        }
        if in_trailer {
            return Err(lex(1, "command after landmark trailer".into()));
        }
        let mut words = Vec::new();
        let mut col = 0;
        for tok in code.split_whitespace() {
            let start = code[col..].find(tok).expect("token from same text") + col;
            col = start + tok.len();
            words.push((start + 1, tok));
        }
        let (kcol, keyword) = words[0];
        let args = &words[1..];
        let counter = |(c, name): (usize, &str)| {
            if CounterId::is_valid_name(name) {
                Ok(CounterId::new(name))
            } else {
                Err(lex(c, format!("invalid counter name {name:?}")))
            }
        };
        let one = |args: &[(usize, &str)]| -> Result<CounterId, ParseError> {
            match args {
                [a] => counter(*a),
                _ => Err(lex(kcol, format!("{keyword} takes exactly one counter"))),
            }
        };
        let cmd = match keyword {
            "inc" => Command::Inc(one(args)?),
            "dec" => Command::Dec(one(args)?),
            "tz" => Command::TestZero(one(args)?),
            "tm" => Command::TestMax(one(args)?),
            "goto" => match args {
                [(c1, a), (c2, b)] => {
                    let num = |c: usize, s: &str| {
                        s.parse::<usize>()
                            .map_err(|_| lex(c, format!("expected a line number, got {s:?}")))
                    };
                    Command::Goto(num(*c1, a)?, num(*c2, b)?)
                }
                _ => return Err(lex(kcol, "goto takes exactly two line numbers".into())),
            },
            "halt" => Command::Halt(args.iter().map(|a| counter(*a)).collect::<Result<_, _>>()?),
            other => return Err(lex(kcol, format!("unknown command {other:?}"))),
        };
        commands.push(cmd);
    }
    let p = Program::with_landmarks(commands, landmarks);
    validate(&p).map_err(ParseError::Invalid)?;
    Ok(p)
}

fn command_text(cmd: &Command) -> String {
    match cmd {
        Command::Inc(x) => format!("inc {x}"),
        Command::Dec(x) => format!("dec {x}"),
        Command::Goto(a, b) => format!("goto {a} {b}"),
        Command::TestZero(x) => format!("tz {x}"),
        Command::TestMax(x) => format!("tm {x}"),
        Command::Halt(zs) if zs.is_empty() => "halt".to_string(),
        Command::Halt(zs) => {
            let names: Vec<&str> = zs.iter().map(|z| z.as_str()).collect();
            format!("halt {}", names.join(" "))
        }
    }
}

/// Canonical text with line-number comments and the landmark trailer.
pub fn print(p: &Program) -> String {
    let mut out = String::new();
    for (i, cmd) in p.commands().iter().enumerate() {
        let _ = writeln!(out, "{} # L{}", command_text(cmd), i + 1);
    }
    if !p.landmarks().is_empty() {
        let _ = writeln!(out, "# {TRAILER}");
        for (name, line) in p.landmarks() {
            let _ = writeln!(out, "# {name}={line}");
        }
    }
    out
}

/// Canonical text without any comments.
pub fn print_bare(p: &Program) -> String {
    let mut out = String::new();
    for cmd in p.commands() {
        out.push_str(&command_text(cmd));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(s: &str) -> CounterId {
        CounterId::new(s)
    }

    #[test]
    fn parses_basic_programs() {
        assert_eq!(
            parse("inc x\nhalt x").unwrap(),
            Program::new(vec![Command::Inc(c("x")), Command::Halt(vec![c("x")])])
        );
        assert_eq!(
            parse("goto 1 2\nhalt").unwrap(),
            Program::new(vec![Command::Goto(1, 2), Command::Halt(vec![])])
        );
    }

    #[test]
    fn comments_and_blanks_do_not_count() {
        let p = parse("# header\n\ninc x   # bump\n  \ngoto 1 3\nhalt\n").unwrap();
        assert_eq!(p.len(), 3);
        assert_eq!(p.command(2), Some(&Command::Goto(1, 3)));
    }

    #[test]
    fn hash_inside_name_is_not_a_comment() {
        let p = parse("inc x#1\nhalt x#1").unwrap();
        assert_eq!(p.command(1), Some(&Command::Inc(c("x#1"))));
    }

    #[test]
    fn print_minimal() {
        assert_eq!(print(&Program::new(vec![Command::Halt(vec![])])), "halt # L1\n");
        assert_eq!(print_bare(&Program::new(vec![Command::Halt(vec![])])), "halt\n");
    }

    #[test]
    fn decorated_names_survive() {
        let p = Program::new(vec![
            Command::Inc(c("i'")),
            Command::Inc(c("x_hat")),
            Command::TestZero(c("i'")),
            Command::Halt(vec![c("x_hat")]),
        ]);
        assert_eq!(parse(&print(&p)).unwrap(), p);
    }

    #[test]
    fn landmarks_round_trip() {
        let mut p = Program::new(vec![Command::Inc(c("x")), Command::Halt(vec![])]);
        p.set_landmark("top", 1);
        p.set_landmark("end", 2);
        let text = print(&p);
        assert!(text.contains("# landmarks:\n# end=2\n# top=1\n"));
        assert_eq!(parse(&text).unwrap(), p);
    }

    #[test]
    fn lexical_errors_carry_position() {
        match parse("inc x\n  jump 3\nhalt") {
            Err(ParseError::Lexical { line, col, .. }) => assert_eq!((line, col), (2, 3)),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse("goto a 1\nhalt"), Err(ParseError::Lexical { col: 6, .. })));
        assert!(matches!(parse("inc\nhalt"), Err(ParseError::Lexical { .. })));
        assert!(matches!(parse("inc x y\nhalt"), Err(ParseError::Lexical { .. })));
    }

    #[test]
    fn semantic_errors_come_from_validation() {
        assert!(matches!(parse("goto 5 1\nhalt"), Err(ParseError::Invalid(_))));
        assert!(matches!(parse("halt\ninc x"), Err(ParseError::Invalid(_))));
        assert!(matches!(parse(""), Err(ParseError::Invalid(_))));
    }
}
