use std::io::Write;
use std::process::{Command, Output, Stdio};

fn towerforge(args: &[&str], stdin: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_towerforge"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(stdin.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn generated_amplifier_relation_as_csv() {
    let amp = towerforge(&["gen", "trivial-amp", "3"], "");
    assert!(amp.status.success());
    let rel = towerforge(
        &["relation", "-", "--bound", "1", "--counters", "b,c,d", "--cap-counter", "16"],
        &stdout(&amp),
    );
    assert!(rel.status.success());
    assert_eq!(stdout(&rel), "b,c,d\n3,1,3\n3,2,6\n3,3,9\n3,4,12\n3,5,15\n# truncated\n");
}

#[test]
fn census_of_refined_amplifier() {
    let p = towerforge(&["gen", "refined", "2", "3"], "");
    let c = towerforge(&["census", "-"], &stdout(&p));
    assert_eq!(stdout(&c).trim(), "counters=15 halt=3");
}

#[test]
fn parse_prints_canonically() {
    let o = towerforge(&["parse", "-"], "inc x   # bump\n\nhalt x\n");
    assert!(o.status.success());
    assert_eq!(stdout(&o), "inc x # L1\nhalt x # L2\n");
    let bad = towerforge(&["parse", "-"], "inc x\n");
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn witness_and_its_absence() {
    let o = towerforge(&["witness", "-", "--bound", "1", "--target", "x=1"], "inc x\nhalt\n");
    assert!(o.status.success());
    assert!(stdout(&o).contains("lines 1 2"));
    let none = towerforge(&["witness", "-", "--bound", "1", "--target", "x=2"], "inc x\nhalt\n");
    assert_eq!(none.status.code(), Some(1));
}

#[test]
fn compose_and_export() {
    let dir = std::env::temp_dir().join(format!("towerforge-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let amp = dir.join("a.cp");
    std::fs::write(&amp, stdout(&towerforge(&["gen", "trivial-amp", "2"], ""))).unwrap();
    let c = towerforge(&["compose", amp.to_str().unwrap(), "-"], "inc x\ntz x\nhalt\n");
    assert!(c.status.success(), "{}", String::from_utf8_lossy(&c.stderr));
    let v = towerforge(&["export", "-", "--format", "vass"], &stdout(&c));
    assert!(stdout(&v).starts_with("vass\ncounters "));
    let n = towerforge(&["export", "-", "--format", "pnml"], &stdout(&c));
    assert!(stdout(&n).contains("ptnet"));
    let tested = towerforge(&["export", "-", "--format", "vass"], "tz x\nhalt\n");
    assert_eq!(tested.status.code(), Some(1));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn reduce_and_probes() {
    let r = towerforge(&["reduce", "-", "--tower", "0"], "inc x\ntz x\nhalt\n");
    assert!(r.status.success());
    let e = towerforge(&["gen", "example-e"], "");
    let p = towerforge(
        &["probes", "-", "--bound", "3", "--suite", "program-e", "--cap-counter", "10"],
        &stdout(&e),
    );
    assert!(p.status.success(), "{}", stdout(&p));
    assert!(stdout(&p).starts_with("holds"));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(towerforge(&[], "").status.code(), Some(2));
    assert_eq!(towerforge(&["gen", "nonsense"], "").status.code(), Some(2));
    assert_eq!(towerforge(&["verify", "nonsense"], "").status.code(), Some(2));
    assert_eq!(towerforge(&["reduce", "-"], "halt\n").status.code(), Some(2));
}

#[test]
fn verify_reports_per_criterion() {
    let o = towerforge(&["verify", "counting-loop"], "");
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("PASS [1] counting-loop"));
}
