use std::path::Path;
use std::process::{Command, Output};

fn aoisched(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aoisched"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const CONFIG: &str = r#"
name = "cli-demo"
seeds = [1]
output = "out"
bandit_only = true
clients = 2

[[environments]]
label = "pw"
kind = "piecewise"
channels = 3
horizon = 500
breakpoints = [251]
means = [[0.9, 0.5, 0.1], [0.1, 0.5, 0.9]]

[[policies]]
name = "oracle"

[[policies]]
name = "glr-cucb"
"#;

#[test]
fn presets_are_listed_and_shown() {
    let tmp = tempfile::tempdir().unwrap();
    let list = aoisched(&["presets", "list"], tmp.path());
    assert!(list.status.success());
    for name in ["fig2a", "fig2b", "fig2c", "fl-piecewise", "fl-adversarial"] {
        assert!(stdout(&list).contains(name));
    }
    let show = aoisched(&["presets", "show", "fig2a"], tmp.path());
    assert!(show.status.success());
    assert!(stdout(&show).contains("horizon = 20000"));
    assert!(!aoisched(&["presets", "show", "nope"], tmp.path()).status.success());
}

#[test]
fn run_then_summarize() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("demo.toml"), CONFIG).unwrap();
    let run = aoisched(&["run", "demo.toml", "--seed-override", "4,5", "--output", "res"], tmp.path());
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let out = tmp.path().join("res");
    assert!(out.join("manifest.toml").exists());
    assert!(out.join("regret_pw_glr-cucb_seed5.csv").exists());
    assert!(!tmp.path().join("out").exists());

    let summary = aoisched(&["summarize", "res"], tmp.path());
    assert!(summary.status.success());
    let text = stdout(&summary);
    let oracle = text.lines().find(|l| l.contains("oracle")).unwrap();
    assert!(oracle.contains("0.0 ± 0.0"), "{oracle}");
    assert!(out.join("summary.csv").exists());
}

#[test]
fn failures_exit_nonzero_with_a_message() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = CONFIG.replace("channels = 3", "channels = 1");
    std::fs::write(tmp.path().join("bad.toml"), bad).unwrap();
    let run = aoisched(&["run", "bad.toml"], tmp.path());
    assert!(!run.status.success());
    let err = String::from_utf8_lossy(&run.stderr);
    assert!(err.contains("environments[pw].channels"), "{err}");

    let missing = aoisched(&["run", "no-such-thing"], tmp.path());
    assert!(!missing.status.success());
    assert!(String::from_utf8_lossy(&missing.stderr).contains("neither a config file nor a preset"));

    let empty = aoisched(&["summarize", "nowhere"], tmp.path());
    assert!(!empty.status.success());
    assert!(String::from_utf8_lossy(&empty.stderr).contains("missing file"));
}
