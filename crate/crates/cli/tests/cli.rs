use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Child, Command, Output, Stdio};

use uno_core::eval::{read_curves, read_report};

fn uno(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uno")).args(args).output().unwrap()
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

const TINY: &str = "algorithm = \"ddqn_mcts\"\nepisodes = 12\nsimulations = 4\nwarmup = 10\nbatch_size = 8\neval_every = 6\neval_games = 30\nseed = 3\n";

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.toml");
    std::fs::write(&path, body).unwrap();
    path.display().to_string()
}

#[test]
fn missing_config_names_the_path() {
    let out = uno(&["train", "/no/such/dir/cfg.toml"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("/no/such/dir/cfg.toml"));
}

#[test]
fn bad_config_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "players = 12\n");
    let out = uno(&["train", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("players"), "{}", text(&out.stderr));

    let cfg = write_config(dir.path(), "learning_rate = 0.1\n");
    let out = uno(&["train", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("learning_rate"));
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(uno(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(uno(&["eval", "random"]).status.code(), Some(1));
    assert_eq!(uno(&["--help"]).status.code(), Some(0));
}

#[test]
fn train_writes_outputs_and_repeats_from_its_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let run1 = dir.path().join("run1");
    let out = uno(&["train", &cfg, "--out-dir", run1.to_str().unwrap(), "--quiet"]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    for f in [
        "manifest.toml",
        "training_log.csv",
        "curves.csv",
        "checkpoints/episode-6.ckpt",
        "checkpoints/episode-12.ckpt",
        "checkpoints/final.ckpt",
    ] {
        assert!(run1.join(f).exists(), "missing {f}");
    }
    let curves = read_curves(run1.join("curves.csv")).unwrap();
    assert_eq!(curves.iter().map(|p| p.episode).collect::<Vec<_>>(), vec![6, 12]);
    assert!(curves.iter().all(|p| p.games == 30));
    let log = std::fs::read_to_string(run1.join("training_log.csv")).unwrap();
    assert_eq!(log.lines().count(), 13);

    let manifest = std::fs::read_to_string(run1.join("manifest.toml")).unwrap();
    assert!(manifest.contains("discount = 0.99"));
    assert!(manifest.contains("simulations = 4"));

    // The manifest alone reproduces the run (into a new directory).
    let run2 = dir.path().join("run2");
    let out = uno(&[
        "train",
        run1.join("manifest.toml").to_str().unwrap(),
        "--out-dir",
        run2.to_str().unwrap(),
        "--quiet",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    assert_eq!(read_curves(run2.join("curves.csv")).unwrap(), curves);
    assert_eq!(
        std::fs::read(run1.join("checkpoints/final.ckpt")).unwrap(),
        std::fs::read(run2.join("checkpoints/final.ckpt")).unwrap()
    );
}

#[test]
fn resume_checks_the_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let run = dir.path().join("run");
    assert_eq!(
        uno(&["train", &cfg, "--out-dir", run.to_str().unwrap(), "-q"])
            .status
            .code(),
        Some(0)
    );
    let ckpt = run.join("checkpoints/episode-6.ckpt");

    let resumed = dir.path().join("resumed");
    let cfg2 = write_config(
        dir.path(),
        &format!("{TINY}resume = {:?}\n", ckpt.display().to_string()),
    );
    let out = uno(&["train", &cfg2, "--out-dir", resumed.to_str().unwrap(), "-q"]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let curves = read_curves(resumed.join("curves.csv")).unwrap();
    assert_eq!(curves.iter().map(|p| p.episode).collect::<Vec<_>>(), vec![12]);

    let other = write_config(
        dir.path(),
        &format!(
            "{}resume = {:?}\n",
            TINY.replace("ddqn_mcts", "dmc"),
            ckpt.display().to_string()
        ),
    );
    let out = uno(&[
        "train",
        &other,
        "--out-dir",
        dir.path().join("x").to_str().unwrap(),
        "-q",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("resume"), "{}", text(&out.stderr));
}

#[test]
fn eval_report_matches_csv_and_repeats() {
    let dir = tempfile::tempdir().unwrap();
    let csv1 = dir.path().join("a.csv");
    let csv2 = dir.path().join("b.csv");
    let run = |csv: &Path| {
        uno(&[
            "eval",
            "random",
            "random",
            "random",
            "--games",
            "3000",
            "--seed",
            "4",
            "--csv",
            csv.to_str().unwrap(),
        ])
    };
    let out = run(&csv1);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    run(&csv2);
    assert_eq!(std::fs::read(&csv1).unwrap(), std::fs::read(&csv2).unwrap());

    let rows = read_report(&csv1).unwrap();
    let stdout = text(&out.stdout);
    assert_eq!(rows.len(), 3);
    assert_eq!(rows.iter().map(|r| r.wins).sum::<usize>(), 3000);
    for r in &rows {
        assert!(
            stdout.contains(&format!("{:.4} ± {:.4}", r.win_rate, r.ci95)),
            "{stdout}"
        );
        assert!((r.win_rate - 1.0 / 3.0).abs() < 0.05);
    }
}

#[test]
fn identical_checkpoints_split_evenly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &TINY.replace("episodes = 12", "episodes = 6"));
    let run = dir.path().join("run");
    assert_eq!(
        uno(&["train", &cfg, "--out-dir", run.to_str().unwrap(), "-q"])
            .status
            .code(),
        Some(0)
    );
    let ckpt = run.join("checkpoints/final.ckpt");
    let c = ckpt.to_str().unwrap();
    let csv = dir.path().join("r.csv");
    let out = uno(&[
        "eval",
        c,
        c,
        "--games",
        "50000",
        "--seed",
        "1",
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let rows = read_report(&csv).unwrap();
    assert!((rows[0].win_rate - 0.5).abs() <= 0.02, "{}", rows[0].win_rate);
}

#[test]
fn incompatible_checkpoint_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let bogus = dir.path().join("bogus.ckpt");
    std::fs::write(&bogus, "not a checkpoint").unwrap();
    let out = uno(&["eval", bogus.to_str().unwrap(), "random"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("bogus.ckpt"));
}

struct Server(Child);

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

fn serve(extra: &[&str]) -> (Server, String, String) {
    let mut child = Command::new(env!("CARGO_BIN_EXE_uno"))
        .args(["serve", "--udp", "127.0.0.1:0", "--ws", "127.0.0.1:0"])
        .args(extra)
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut lines = BufReader::new(child.stdout.take().unwrap()).lines();
    let udp = lines.next().unwrap().unwrap().rsplit(' ').next().unwrap().to_string();
    let ws = lines.next().unwrap().unwrap().rsplit(' ').next().unwrap().to_string();
    (Server(child), udp, ws)
}

#[test]
fn serve_and_play_against_two_bots() {
    let dir = tempfile::tempdir().unwrap();
    let logs = dir.path().join("logs");
    let (_server, udp, ws) = serve(&["--log-dir", logs.to_str().unwrap()]);
    for transport in [["--udp", udp.as_str()], ["--ws", ws.as_str()]] {
        let out = uno(&[
            "play",
            transport[0],
            transport[1],
            "--create",
            "human,random,random",
            "--seed",
            "9",
            "--auto",
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
        let stdout = text(&out.stdout);
        assert!(stdout.contains("RESULT winner seat"), "{stdout}");
    }
    std::thread::sleep(std::time::Duration::from_millis(100));
    assert!(logs.join("t1.json").exists());
    assert!(logs.join("t2.json").exists());
}

#[test]
fn play_reports_refused_tables() {
    let (_server, udp, _) = serve(&[]);
    let out = uno(&["play", "--udp", &udp, "--create", "human", "--auto"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("bad_seats"));
}

#[test]
fn serve_rejects_bad_addresses() {
    let out = uno(&["serve", "--udp", "nowhere"]);
    assert_eq!(out.status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("s.toml");
    std::fs::write(&cfg, "port = 1\n").unwrap();
    let out = uno(&["serve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("port"));
}
