mod common;

use std::fs;
use std::path::Path;
use std::process::Command;

use jobprov::cli::{self, run_cli, CliError, ViewFormat, EXIT_ERROR, EXIT_OK, EXIT_VERIFICATION};
use jobprov::container::{self, EVENTS_BLOCK};
use jobprov::options::parse_options;
use jobprov::JobError;
use tempfile::tempdir;

use common::quiet_env;

const DEMO: &str = r#"# source, filter and sink with provenance on
ApplicationMgr.AppName = "DaVinci"
ApplicationMgr.AppVersion = "v42r3"
ApplicationMgr.TopAlg = ["RandomEventSource", "ThresholdFilter", "Accumulator"]
ApplicationMgr.Services = ["MessageSvc", "MetaDataSvc"]
ApplicationMgr.OutputFile = "demo.pdc"
RandomEventSource.Seed = 2011
RandomEventSource.NumEvents = 200
ThresholdFilter.Min = 0.25
"#;

struct Outcome {
    code: i32,
    stdout: String,
    stderr: String,
}

fn cli(dir: &Path, args: &[&str]) -> Outcome {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let argv = std::iter::once("jobprov").chain(args.iter().copied());
    let code = run_cli(argv, &quiet_env(dir), &mut out, &mut err);
    Outcome { code, stdout: String::from_utf8(out).unwrap(), stderr: String::from_utf8(err).unwrap() }
}

fn setup(config: &str) -> tempfile::TempDir {
    let dir = tempdir().unwrap();
    fs::write(dir.path().join("demo.opts"), config).unwrap();
    dir
}

fn events(path: &Path) -> Vec<u8> {
    container::read_block(path, EVENTS_BLOCK).unwrap()
}

#[test]
fn run_writes_events_and_info() {
    let dir = setup(DEMO);
    let r = cli(dir.path(), &["run", "demo.opts"]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    assert!(r.stdout.contains("finalize        succeeded"));
    let toc = container::read_toc(&dir.path().join("demo.pdc")).unwrap();
    assert!(toc.get("events").is_some());
    assert!(toc.get("info").is_some_and(|e| e.length > 0));
}

#[test]
fn run_reports_initialize_failures() {
    let dir = setup("ApplicationMgr.TopAlg = [\"Ghost\"]\n");
    let r = cli(dir.path(), &["run", "demo.opts"]);
    assert_eq!(r.code, EXIT_ERROR);
    assert!(r.stderr.contains("initialize failed"), "{}", r.stderr);
    assert!(r.stderr.contains("Ghost"));

    let dir = setup("A.X = \n");
    let r = cli(dir.path(), &["run", "demo.opts"]);
    assert_eq!(r.code, EXIT_ERROR);
    assert!(r.stderr.contains("line 1"), "{}", r.stderr);

    let r = cli(dir.path(), &["run", "missing.opts"]);
    assert_eq!(r.code, EXIT_ERROR);
}

#[test]
fn runs_are_byte_identical() {
    let dir = setup(DEMO);
    cli(dir.path(), &["run", "demo.opts"]);
    let first = fs::read(dir.path().join("demo.pdc")).unwrap();
    cli(dir.path(), &["run", "demo.opts"]);
    assert_eq!(first, fs::read(dir.path().join("demo.pdc")).unwrap());
}

#[test]
fn view_renders_table_and_tsv() {
    let dir = setup(DEMO);
    cli(dir.path(), &["run", "demo.opts"]);
    let table = cli(dir.path(), &["view", "demo.pdc"]);
    assert_eq!(table.code, EXIT_OK);
    assert!(table.stdout.lines().any(|l| l == "ApplicationMgr.AppVersion | v42r3"), "{}", table.stdout);
    assert!(table.stdout.lines().any(|l| l == "ApplicationMgr.AppName | DaVinci"));

    let tsv = cli(dir.path(), &["view", "demo.pdc", "--format=tsv"]);
    assert!(tsv.stdout.lines().any(|l| l == "RandomEventSource.Seed\t2011"));
    let keys: Vec<_> = tsv.stdout.lines().map(|l| l.split('\t').next().unwrap()).collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
}

#[test]
fn view_without_provenance_fails() {
    let dir = setup(&DEMO.replace(r#"["MessageSvc", "MetaDataSvc"]"#, r#"["MessageSvc"]"#));
    assert_eq!(cli(dir.path(), &["run", "demo.opts"]).code, EXIT_OK);
    let r = cli(dir.path(), &["view", "demo.pdc"]);
    assert_eq!(r.code, EXIT_ERROR);
    assert!(r.stderr.contains("no provenance recorded"));
    assert!(r.stdout.is_empty());
}

#[test]
fn view_of_empty_job_lists_service_defaults() {
    let dir = setup("ApplicationMgr.Services = [\"MetaDataSvc\"]\n");
    cli(dir.path(), &["run", "demo.opts"]);
    let info = cli::load_info(Path::new("output.pdc"), &quiet_env(dir.path())).unwrap();
    let table = cli::render_view(&info, ViewFormat::Table);
    assert_eq!(
        table,
        "ApplicationMgr.AppName | \n\
         ApplicationMgr.AppVersion | \n\
         ApplicationMgr.OutputFile | output.pdc\n\
         ApplicationMgr.Services | [\"MetaDataSvc\"]\n\
         ApplicationMgr.TopAlg | []\n\
         MessageSvc.OutputLevel | 3\n\
         MetaDataSvc.Enabled | true\n"
    );
}

#[test]
fn export_is_canonical_and_runnable() {
    let dir = setup(DEMO);
    cli(dir.path(), &["run", "demo.opts"]);
    assert_eq!(cli(dir.path(), &["export", "demo.pdc", "a.opts"]).code, EXIT_OK);
    cli(dir.path(), &["export", "demo.pdc", "b.opts"]);
    let a = fs::read_to_string(dir.path().join("a.opts")).unwrap();
    assert_eq!(a, fs::read_to_string(dir.path().join("b.opts")).unwrap());
    assert!(a.contains("ApplicationMgr.AppVersion = \"v42r3\"\n"));
    assert!(parse_options(&a).is_ok());

    fs::write(dir.path().join("rerun.opts"), a.replace("\"demo.pdc\"", "\"rerun.pdc\"")).unwrap();
    let r = cli(dir.path(), &["run", "rerun.opts"]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    assert_eq!(events(&dir.path().join("demo.pdc")), events(&dir.path().join("rerun.pdc")));
}

#[test]
fn replay_reproduces_the_job_without_its_config() {
    let dir = setup(DEMO);
    cli(dir.path(), &["run", "demo.opts"]);
    fs::remove_file(dir.path().join("demo.opts")).unwrap();
    let r = cli(dir.path(), &["replay", "demo.pdc", "replayed.pdc"]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    assert!(r.stdout.contains("replay verified"));
    assert_eq!(events(&dir.path().join("demo.pdc")), events(&dir.path().join("replayed.pdc")));

    let d = cli::cmd_diff(Path::new("demo.pdc"), Path::new("replayed.pdc"), &quiet_env(dir.path())).unwrap();
    assert!(d.only_left.is_empty() && d.only_right.is_empty());
    assert_eq!(d.changed.len(), 1);
    assert_eq!(d.changed[0].0, "ApplicationMgr.OutputFile");
}

const DERIVED: &str = r#"ApplicationMgr.TopAlg = ["FileEventSource", "Accumulator"]
ApplicationMgr.Services = ["MetaDataSvc"]
ApplicationMgr.OutputFile = "derived.pdc"
FileEventSource.Input = "input.pdc"
"#;

#[test]
fn replay_checks_input_lineage() {
    let dir = setup(DERIVED);
    common::write_demo_input(dir.path());
    assert_eq!(cli(dir.path(), &["run", "demo.opts"]).code, EXIT_OK);
    assert_eq!(cli(dir.path(), &["replay", "derived.pdc", "again.pdc"]).code, EXIT_OK);

    // same path, different events
    let input = dir.path().join("input.pdc");
    let original = fs::read(&input).unwrap();
    let mut other = jobprov::options::OptionsSet::new();
    other
        .set("ApplicationMgr.TopAlg", jobprov::options::OptionValue::text_list(["RandomEventSource"]))
        .set("ApplicationMgr.OutputFile", "input.pdc")
        .set("RandomEventSource.Seed", 7);
    jobprov::run_job(&other, &jobprov::Catalogue::demo(), quiet_env(dir.path())).unwrap();

    let err = cli::cmd_replay(Path::new("derived.pdc"), Path::new("x.pdc"), &quiet_env(dir.path())).unwrap_err();
    assert!(matches!(&err, CliError::Job(e) if matches!(e.error, JobError::LineageMismatch(_))), "{err}");
    assert_eq!(err.exit_code(), EXIT_VERIFICATION);
    assert!(!dir.path().join("x.pdc").exists());

    fs::remove_file(&input).unwrap();
    let r = cli(dir.path(), &["replay", "derived.pdc", "x.pdc"]);
    assert_eq!(r.code, EXIT_VERIFICATION);
    assert!(r.stderr.contains("no longer exists"), "{}", r.stderr);

    fs::write(&input, original).unwrap();
    assert_eq!(cli(dir.path(), &["replay", "derived.pdc", "x.pdc"]).code, EXIT_OK);
}

#[test]
fn diff_reports_changed_and_one_sided_keys() {
    let a = setup(DEMO);
    let b = setup(&DEMO.replace("Seed = 2011", "Seed = 2012"));
    let c = setup(&format!("{DEMO}DemoTool.Gain = 2.5\n"));
    for d in [&a, &b, &c] {
        assert_eq!(cli(d.path(), &["run", "demo.opts"]).code, EXIT_OK);
    }
    let pa = a.path().join("demo.pdc");
    let (sa, sb, sc) = (pa.to_str().unwrap(), b.path().join("demo.pdc"), c.path().join("demo.pdc"));

    let same = cli(a.path(), &["diff", sa, sa]);
    assert_eq!(same.code, EXIT_OK);
    assert_eq!(same.stdout, "no differences\n");

    let seed = cli(a.path(), &["diff", sa, sb.to_str().unwrap()]);
    assert_eq!(seed.code, EXIT_VERIFICATION);
    assert_eq!(seed.stdout, "~ RandomEventSource.Seed: 2011 -> 2012\n");

    let env = quiet_env(a.path());
    let report = cli::cmd_diff(&pa, &sc, &env).unwrap();
    assert!(report.changed.is_empty() && report.only_left.is_empty());
    assert_eq!(report.only_right, [("DemoTool.Gain".to_owned(), "2.5".to_owned())]);
    let reverse = cli::cmd_diff(&sc, &pa, &env).unwrap();
    assert_eq!(reverse.only_left, report.only_right);
}

#[test]
fn corrupted_info_is_a_verification_failure() {
    let dir = setup(DEMO);
    cli(dir.path(), &["run", "demo.opts"]);
    let path = dir.path().join("demo.pdc");
    let entry = container::read_toc(&path).unwrap().get("info").unwrap().clone();
    let mut bytes = fs::read(&path).unwrap();
    bytes[entry.offset as usize + 3] ^= 0x20;
    fs::write(&path, bytes).unwrap();
    let r = cli(dir.path(), &["view", "demo.pdc"]);
    assert_eq!(r.code, EXIT_VERIFICATION);
    assert!(r.stderr.contains("checksum mismatch"), "{}", r.stderr);
}

#[test]
fn binary_separates_data_and_diagnostics() {
    let dir = setup(DEMO);
    let bin = env!("CARGO_BIN_EXE_jobprov");
    let run = Command::new(bin).current_dir(dir.path()).args(["run", "demo.opts"]).output().unwrap();
    assert_eq!(run.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&run.stdout).contains("events seen     200"));

    let view = Command::new(bin).current_dir(dir.path()).args(["view", "demo.pdc"]).output().unwrap();
    assert!(String::from_utf8_lossy(&view.stdout).contains("ApplicationMgr.AppVersion | v42r3"));
    assert!(view.stderr.is_empty());

    let missing = Command::new(bin).current_dir(dir.path()).args(["view", "nope.pdc"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(1));
    assert!(missing.stdout.is_empty());
    assert!(!missing.stderr.is_empty());

    let replay = Command::new(bin).current_dir(dir.path()).args(["replay", "demo.pdc", "r.pdc"]).output().unwrap();
    assert_eq!(replay.status.code(), Some(0), "{}", String::from_utf8_lossy(&replay.stderr));
    let diff = Command::new(bin).current_dir(dir.path()).args(["diff", "demo.pdc", "r.pdc"]).output().unwrap();
    assert_eq!(diff.status.code(), Some(2));
}
