use std::fs;
use std::path::PathBuf;
use std::process::Command;

fn out_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("fenn-sim-cli-{name}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    dir
}

fn fenn_sim(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_fenn-sim")).args(args).output().expect("spawn fenn-sim")
}

#[test]
fn poisson_writes_csv_with_header() {
    let dir = out_dir("poisson");
    let out = fenn_sim(&["poisson", "--seed", "3", "--out", dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let hist = fs::read_to_string(dir.join("poisson_hist.csv")).unwrap();
    assert!(hist.starts_with("k,count,frequency,pmf\n"));
    let stats = fs::read_to_string(dir.join("poisson_stats.csv")).unwrap();
    assert_eq!(stats.lines().count(), 2);
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn config_file_sets_parameters_and_output_is_reproducible() {
    let dir = out_dir("config");
    fs::create_dir_all(&dir).unwrap();
    let config = dir.join("run.conf");
    fs::write(&config, "# small batch\nn_pairs = 320\nseed = 11\n").unwrap();
    let run = |sub: &str| {
        let target = dir.join(sub);
        let out = fenn_sim(&["rounding-hist", "--config", config.to_str().unwrap(), "--out", target.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        fs::read_to_string(target.join("rounding_summary.csv")).unwrap()
    };
    let first = run("a");
    assert!(first.lines().nth(1).unwrap().starts_with("rz,320,"));
    assert_eq!(first, run("b"));
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn bad_arguments_fail() {
    assert!(!fenn_sim(&["fig9"]).status.success());
    let dir = out_dir("bad");
    fs::create_dir_all(&dir).unwrap();
    let config = dir.join("bad.conf");
    fs::write(&config, "lambda = 40\n").unwrap();
    let out = fenn_sim(&["poisson", "--config", config.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert!(!out.status.success());
    let _ = fs::remove_dir_all(&dir);
}
