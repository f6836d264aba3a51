use std::path::Path;
use std::process::{Command, Output};

fn cli(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mgdm-spp"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

#[test]
fn run_writes_metrics_log_and_dump() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(
        &[
            "run", "--scenario", "mgdm", "--mode", "spp", "--requests", "40", "--seed", "2",
            "--max-link-km", "380", "--wavelengths", "8", "--out", "m.csv",
            "--assignments-out", "log.csv", "--dump-state", "state.txt",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let metrics = std::fs::read_to_string(dir.path().join("m.csv")).unwrap();
    let mut lines = metrics.lines();
    assert_eq!(
        lines.next(),
        Some("scenario,mode,regime,load,seed,spectrum_per_req,mimo_per_tbps,rejection")
    );
    assert!(lines.next().unwrap().starts_with("mgdm,spp,custom,custom,2,"));
    let dump = std::fs::read_to_string(dir.path().join("state.txt")).unwrap();
    assert!(dump.starts_with("scenario=mgdm wavelengths=8\n"));

    let ok = cli(&["verify", "--assignments", "log.csv"], dir.path());
    assert_eq!(ok.status.code(), Some(0));
    let alias = cli(&["verify", "--log", "log.csv"], dir.path());
    assert_eq!(alias.status.code(), Some(0));
}

#[test]
fn verify_flags_illegal_log() {
    let dir = tempfile::tempdir().unwrap();
    let header = "request,role,src,dst,rate_gbps,links,wavelength,groups,modulations,capacity_gbps,mimo_deployed\n";
    // Two backups share group A on link 2 while their working paths share link 0.
    let log = format!(
        "{header}\
         0,working,0,1,100,0,0,A,QPSK,100,1\n\
         0,backup,0,1,100,1-2,0,A,QPSK,100,1\n\
         1,working,0,1,100,0,0,B,QPSK,100,4\n\
         1,backup,0,1,100,2,0,A,QPSK,100,0\n"
    );
    std::fs::write(dir.path().join("bad.csv"), log).unwrap();
    let out = cli(&["verify", "--assignments", "bad.csv"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn calibrate_degenerate_topology() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("two.json"),
        r#"{"nodes":["a","b"],"links":[{"a":"a","b":"b","length_km":10}]}"#,
    )
    .unwrap();
    let out = cli(
        &["calibrate", "--topology", "two.json", "--wavelengths", "1", "--replicas", "3"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("high=1 low=1 "));
}

#[test]
fn bad_input_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = cli(&["run", "--bogus"], dir.path());
    assert_eq!(unknown.status.code(), Some(2));
    let scenario = cli(&["run", "--scenario", "nope"], dir.path());
    assert_eq!(scenario.status.code(), Some(2));
    let missing = cli(&["run", "--topology", "missing.json"], dir.path());
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("missing.json"));
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("run.toml"),
        "scenario = \"smt\"\nmode = \"dpp\"\nrequests = 10\nwavelengths = 4\nseed = 9\n",
    )
    .unwrap();
    let out = cli(&["run", "--config", "run.toml", "--mode", "spp"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.lines().nth(1).unwrap().starts_with("smt,spp,custom,custom,9,"), "{stdout}");
}

#[test]
fn sweep_with_config_and_plot_data() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("sweep.toml"),
        "wavelengths = 8\nscenarios = [\"mgdm\", \"smt\"]\nloads = [\"low\"]\n\
         [[regimes]]\nname = \"S\"\nmax_link_km = 3.0\n\
         [high_load_requests]\nS = 30\n",
    )
    .unwrap();
    let out = cli(
        &["sweep", "--config", "sweep.toml", "--out", "s.csv", "--plot-out", "p.json"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("p.json")).unwrap()).unwrap();
    assert!(json["spectrum_per_req"]["S/low"]["mgdm"]["spp"].is_number());
}
