use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const CONSTANT_TASK: &str = r#"{"train":[
  {"input":[[1,0],[0,0]],"output":[[3,3],[3,3]]},
  {"input":[[0,5,0]],"output":[[3,3],[3,3]]},
  {"input":[[7]],"output":[[3,3],[3,3]]}],
 "test":[{"input":[[4,4,4]],"output":[[3,3],[3,3]]}]}"#;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_arc-mdl"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_task(dir: &Path, name: &str) -> String {
    let p = dir.join(format!("{name}.json"));
    fs::write(&p, CONSTANT_TASK).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn solve_prints_trace_model_and_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let task = write_task(dir.path(), "const");
    let o = run(&["solve", &task]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("task const"));
    assert!(text.contains("L^(M,D)"));
    assert!(text.contains("test 0: solved at attempt 1"), "{text}");
}

#[test]
fn solve_json_is_one_report() {
    let dir = tempfile::tempdir().unwrap();
    let task = write_task(dir.path(), "const");
    let o = run(&["solve", &task, "--json", "--timeout", "5"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(v["id"], "const");
    assert_eq!(v["score"], 1.0);
    assert_eq!(v["test"][0]["attempt"], 1);
    assert_eq!(v["trace"][0]["lhat"], 2.0);
}

#[test]
fn eval_writes_json_lines_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    write_task(dir.path(), "a");
    write_task(dir.path(), "b");
    fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
    let d = dir.path().to_string_lossy().into_owned();
    let o = run(&["eval", &d]);
    assert!(o.status.success());
    let lines: Vec<String> = stdout(&o).lines().map(str::to_string).collect();
    assert_eq!(lines.len(), 2);
    let ids: Vec<String> = lines
        .iter()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["id"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(ids, ["a", "b"]);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("solved: a b"), "{err}");
    let limited = run(&["eval", &d, "--limit", "1"]);
    assert_eq!(stdout(&limited).lines().count(), 1);
}

#[test]
fn create_draws_model_file() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.txt");
    fs::write(
        &model,
        "InOut(Grid(Vec(3, 4), black, [PosShape(Vec(1, 1), Rectangle(Vec(1, 2), red, Full))]), \
         Grid(layers[0].shape.size, layers[0].shape.color, []))\n",
    )
    .unwrap();
    let o = run(&["create", &model.to_string_lossy()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let (input, output) = text.split_once("output:").unwrap();
    assert_eq!(input.lines().filter(|l| !l.trim().is_empty()).count(), 4);
    assert_eq!(output.lines().filter(|l| !l.trim().is_empty()).count(), 1);
}

#[test]
fn render_text_and_ppm() {
    let dir = tempfile::tempdir().unwrap();
    let task = write_task(dir.path(), "const");
    let o = run(&["render", &task]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("train0-in (2x2):"));
    let out = dir.path().join("ppm");
    let o = run(&["render", &task, "--ppm", &out.to_string_lossy(), "--scale", "2"]);
    assert!(o.status.success());
    let ppm = fs::read(out.join("const-test0-out.ppm")).unwrap();
    assert!(ppm.starts_with(b"P6\n4 4\n255\n"));
}

#[test]
fn rejects_bad_arguments_and_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let task = write_task(dir.path(), "const");
    assert!(!run(&["solve", &task, "--keep-trees", "9", "--max-trees", "4"]).status.success());
    assert!(!run(&["solve", &task, "--order", "So-So-Eo-Ei"]).status.success());
    assert!(!run(&["solve", &task, "--alpha", "0"]).status.success());
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"train":[{"input":[[11]],"output":[[0]]}],"test":[{"input":[[0]]}]}"#).unwrap();
    let o = run(&["solve", &bad.to_string_lossy()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("invalid grid"));
}
