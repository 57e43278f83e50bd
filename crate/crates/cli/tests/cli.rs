use std::process::{Command, Output};

fn fastcp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fastcp")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn gradcheck_passes_on_small_shapes() {
    let out = fastcp(&["gradcheck", "--dims", "3,4,2,5", "--rank", "3", "--trials", "4"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("PASS"));
}

#[test]
fn counts_reports_every_mode() {
    let out = fastcp(&["counts", "--dims", "10,10,10,10", "--rank", "2"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("pivot mode 1"));
    let fast_column: Vec<&str> = text
        .lines()
        .skip(2)
        .take(4)
        .map(|l| l.split_whitespace().nth(3).unwrap())
        .collect();
    assert_eq!(fast_column, ["220", "20400", "20400", "220"]);
}

#[test]
fn bench_writes_csv_with_stable_header() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bench.csv");
    let out = fastcp(&[
        "bench", "--dims", "4,4,4", "--rank", "2", "--iters", "2", "--reps", "2", "--format", "csv", "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(&path).unwrap();
    let mut lines = csv.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("N,dims,R,iters,reps,t_direct,t_fast,rho,mults_direct,mults_fast,count_ratio"));
    assert_eq!(lines.count(), 1);
}

#[test]
fn decompose_round_trips_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("y.tdns");
    let values: Vec<String> = (1..=24).map(|v| v.to_string()).collect();
    std::fs::write(&input, format!("TDNS 3 2 3 4\n{}\n", values.join(" "))).unwrap();
    let model = dir.path().join("model.krus");
    let out = fastcp(&[
        "decompose", "--input", input.to_str().unwrap(), "--rank", "2", "--iters", "5", "--out",
        model.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stdout(&out).lines().count(), 6);
    let decoded = fastcp::io::read_model(&model).unwrap();
    assert_eq!(decoded.dims(), vec![2, 3, 4]);
    assert_eq!(decoded.rank(), 2);
}

#[test]
fn malformed_input_exits_with_error_code() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.tdns");
    std::fs::write(&input, "TDNS 2 2 2\n1 2 3\n").unwrap();
    let out = fastcp(&["decompose", "--input", input.to_str().unwrap(), "--rank", "1", "--out", "unused"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn unknown_algorithm_is_rejected() {
    let out = fastcp(&["bench", "--dims", "3,3,3", "--rank", "1", "--algos", "als-direct,bogus"]);
    assert_eq!(out.status.code(), Some(2));
}
