use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use bifurc::export::{write_trajectory_csv, write_witness_csv};
use bifurc::flow::{transport_ambient, transport_on_manifold};
use bifurc::geometry::project_to_level;
use bifurc::scan::{check_gs, scan_k_infinity, scan_s_zero, sphere, GsVerdict};
use bifurc::{
    AsymptoticReport, Mode, SweepConfig, Termination, TransportOptions, TransportResult, Vector,
};

use crate::args::{Cli, Command, ModeArg, ScanKind};
use crate::examples;
use crate::problem::{LoadedProblem, ProblemFile};
use crate::report::{write_json, CommandEcho, RunReport};
use crate::{CliError, Outcome};

/// Manifold starts this close to `g = 0` are projected onto it.
const AUTO_PROJECT: f64 = 1e-3;
const PROJECTION_ITERS: usize = 50;

/// Runs one command, writing its report under `cli.out`.
pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    match &cli.command {
        Command::Scan { kind } => scan(cli, *kind),
        Command::Transport { .. } => transport(cli),
        Command::Examples { which } => {
            let seed = cli.seed.unwrap_or(0);
            let started = Instant::now();
            let matrix = examples::run(*which, seed);
            let mut report = RunReport::new(
                echo(cli, "examples", None),
                examples::INPUTS.as_bytes(),
                seed,
                &matrix,
            );
            if cli.timings {
                report.timings = Some(BTreeMap::from([(
                    "total".into(),
                    started.elapsed().as_secs_f64(),
                )]));
            }
            write_json(&cli.out.join("examples.json"), &report)?;
            print!("{}", matrix.table());
            if matrix.all_pass() {
                Ok(Outcome::Clean)
            } else {
                eprint!("{}", matrix.diff());
                Ok(Outcome::Mismatch)
            }
        }
    }
}

fn echo(cli: &Cli, name: &'static str, problem: Option<&Path>) -> CommandEcho {
    let mut args = serde_json::to_value(&cli.command).unwrap_or(serde_json::Value::Null);
    // Global overrides travel with the subcommand arguments.
    if let serde_json::Value::Object(outer) = &mut args {
        let overrides = serde_json::json!({
            "radii": cli.radii,
            "dirs": cli.dirs,
            "tol": cli.tol,
        });
        outer.insert("overrides".into(), overrides);
    }
    CommandEcho {
        name,
        args,
        problem: problem.map(|p| p.display().to_string()),
    }
}

fn load(cli: &Cli) -> Result<LoadedProblem, CliError> {
    let path = cli
        .problem
        .as_deref()
        .ok_or_else(|| CliError::Usage("this command needs --problem <file>".into()))?;
    LoadedProblem::load(path)
}

/// Flags beat the problem file, which beats the defaults.
fn sweep_config(cli: &Cli, file: &ProblemFile) -> Result<SweepConfig, CliError> {
    let mut cfg = file.sweep.clone().unwrap_or_default();
    if let Some(k) = cli.radii {
        cfg.radius_steps = k;
    }
    if let Some(m) = cli.dirs {
        cfg.directions = m;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if cfg.f_window.is_none() && file.window.is_some() {
        cfg.f_window = file.window;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn transport_options(cli: &Cli, file: &ProblemFile) -> Result<TransportOptions, CliError> {
    let mut opts = file.tolerances.unwrap_or_default();
    if file.window.is_some() {
        opts.window = file.window();
    }
    if let Some(t) = cli.tol {
        opts.tol = t;
    }
    if !(opts.tol > 0.0) {
        return Err(CliError::Usage(format!(
            "tolerance must be positive, got {}",
            opts.tol
        )));
    }
    Ok(opts)
}

fn timings(cli: &Cli, phases: &[(&str, f64)]) -> Option<BTreeMap<String, f64>> {
    cli.timings
        .then(|| phases.iter().map(|(k, v)| (k.to_string(), *v)).collect())
}

#[derive(Serialize)]
#[serde(untagged)]
enum ScanResults {
    Report(Box<AsymptoticReport>),
    Verdict(Box<GsVerdict>),
}

fn scan(cli: &Cli, kind: ScanKind) -> Result<Outcome, CliError> {
    let problem = load(cli)?;
    let file = &problem.file;
    let cfg = sweep_config(cli, file)?;
    let started = Instant::now();
    let (results, outcome) = match kind {
        ScanKind::Kinf => {
            let report = scan_k_infinity(&file.f_expr()?, &cfg)?;
            let outcome = findings(!report.candidates.is_empty());
            (ScanResults::Report(Box::new(report)), outcome)
        }
        ScanKind::Szero => {
            let report = scan_s_zero(&file.pair("scan --kind szero")?, &cfg)?;
            let outcome = findings(!report.candidates.is_empty());
            (ScanResults::Report(Box::new(report)), outcome)
        }
        ScanKind::Gs => {
            let pair = file.pair("scan --kind gs")?;
            let verdict = check_gs(&pair, &file.s_set(), file.window(), file.radius(), &cfg)?;
            let outcome = findings(!verdict.pass);
            (ScanResults::Verdict(Box::new(verdict)), outcome)
        }
    };
    let elapsed = started.elapsed().as_secs_f64();
    let candidates = match &results {
        ScanResults::Report(r) => &r.candidates,
        ScanResults::Verdict(v) => &v.report.candidates,
    };
    for (i, c) in candidates.iter().enumerate() {
        for (j, w) in c.witnesses.iter().enumerate() {
            let path = cli
                .out
                .join(format!("{}_witness_c{i}_w{j}.csv", kind_name(kind)));
            write_csv(&path, |out| write_witness_csv(w, out))?;
        }
        println!(
            "candidate {i}: value {:.6e}, confidence {:.3}, support {}",
            c.value, c.confidence, c.support
        );
    }
    if let ScanResults::Verdict(v) = &results {
        for (name, item) in [
            ("item 1", &v.item1),
            ("item 2", &v.item2),
            ("item 3", &v.item3),
        ] {
            println!(
                "{name}: {} ({})",
                if item.pass { "pass" } else { "FAIL" },
                item.note
            );
        }
    }
    let name = format!("scan-{}", kind_name(kind));
    let mut report = RunReport::new(
        echo(cli, "scan", Some(&problem.path)),
        &problem.bytes,
        cfg.seed,
        results,
    );
    report.timings = timings(cli, &[("scan", elapsed)]);
    write_json(&cli.out.join(format!("{name}.json")), &report)?;
    Ok(outcome)
}

fn kind_name(kind: ScanKind) -> &'static str {
    match kind {
        ScanKind::Kinf => "kinf",
        ScanKind::Gs => "gs",
        ScanKind::Szero => "szero",
    }
}

fn findings(found: bool) -> Outcome {
    if found {
        Outcome::Findings
    } else {
        Outcome::Clean
    }
}

fn write_csv<F>(path: &Path, write: F) -> Result<(), CliError>
where
    F: FnOnce(BufWriter<File>) -> csv::Result<()>,
{
    let err = |message: String| CliError::Output {
        path: path.to_path_buf(),
        message,
    };
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| err(e.to_string()))?;
    }
    let file = File::create(path).map_err(|e| err(e.to_string()))?;
    write(BufWriter::new(file)).map_err(|e| err(e.to_string()))
}

/// Per-start outcome; starts that never reached the integrator say why.
#[derive(Debug, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
enum StartOutcome {
    Transported(Box<TransportResult>),
    Rejected { start: Vector, reason: String },
}

#[derive(Debug, Default, Serialize)]
struct Summary {
    starts: usize,
    rejected: usize,
    successes: usize,
    /// Successes over transported starts; 1 when nothing was transported.
    success_rate: f64,
    terminations: BTreeMap<String, usize>,
    /// Over completed trajectories only; a refused start would just echo `|λ − μ|`.
    max_f_error: Option<f64>,
    max_norm_drift: Option<f64>,
}

#[derive(Serialize)]
struct TransportReport {
    lambda: f64,
    mode: Mode,
    /// `None` when there is no `g`: the field is `∇f/‖∇f‖²` everywhere.
    radius: Option<f64>,
    options: TransportOptions,
    summary: Summary,
    results: Vec<StartOutcome>,
}

fn parse_starts(text: &str, n: usize) -> Result<Vec<Vector>, CliError> {
    text.split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|chunk| {
            let point = chunk
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<Result<Vector, _>>()
                .map_err(|e| CliError::Usage(format!("bad start point {chunk:?}: {e}")))?;
            if point.len() != n {
                return Err(CliError::Usage(format!(
                    "start point {chunk:?} has {} coordinates, problem has n = {n}",
                    point.len()
                )));
            }
            Ok(point)
        })
        .collect()
}

fn sample_starts(
    n: usize,
    count: usize,
    lo: f64,
    hi: f64,
    seed: u64,
) -> Result<Vec<Vector>, CliError> {
    if !(0.0 <= lo && lo <= hi && hi.is_finite()) {
        return Err(CliError::Usage(format!(
            "need 0 <= min-norm <= max-norm, got [{lo}, {hi}]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(sphere::directions(n, count, seed)
        .into_iter()
        .map(|d| {
            let r = if lo == hi {
                lo
            } else {
                rng.random_range(lo..hi)
            };
            d.into_iter().map(|c| c * r).collect()
        })
        .collect())
}

fn transport(cli: &Cli) -> Result<Outcome, CliError> {
    let Command::Transport {
        lambda,
        mode,
        starts,
        sample,
        min_norm,
        max_norm,
        csv,
    } = &cli.command
    else {
        unreachable!("transport called for another command")
    };
    let problem = load(cli)?;
    let file = &problem.file;
    let opts = transport_options(cli, file)?;
    let seed = cli.seed.unwrap_or(0);
    let (pair, has_g) = file.pair_or_plain()?;
    if *mode == ModeArg::Manifold && !has_g {
        return Err(CliError::Usage(
            "manifold transports need an auxiliary function g".into(),
        ));
    }
    // Without g the ball never ends and the field is plain ∇f/‖∇f‖².
    let radius = if has_g { file.radius() } else { f64::INFINITY };
    let points = match (starts, sample) {
        (Some(text), _) => parse_starts(text, file.n)?,
        (None, Some(count)) => sample_starts(file.n, *count, *min_norm, *max_norm, seed)?,
        (None, None) => return Err(CliError::Usage("give --starts or --sample".into())),
    };
    let started = Instant::now();
    let mut results = Vec::with_capacity(points.len());
    for x in points {
        let outcome = match mode {
            ModeArg::Ambient => transport_ambient(&pair, &x, *lambda, radius, &opts),
            ModeArg::Manifold => {
                let sampled = sample.is_some() && starts.is_none();
                match manifold_start(&pair.g, &x, sampled) {
                    Ok(y) => transport_on_manifold(&pair, &y, *lambda, &opts),
                    Err(reason) => {
                        results.push(StartOutcome::Rejected { start: x, reason });
                        continue;
                    }
                }
            }
        };
        results.push(match outcome {
            Ok(r) => StartOutcome::Transported(Box::new(r)),
            Err(e) => StartOutcome::Rejected {
                start: x,
                reason: e.to_string(),
            },
        });
    }
    let elapsed = started.elapsed().as_secs_f64();
    let summary = summarize(&results);
    if *csv {
        for (k, r) in results.iter().enumerate() {
            if let StartOutcome::Transported(r) = r {
                let path = cli.out.join(format!("trajectory_{k}.csv"));
                write_csv(&path, |out| write_trajectory_csv(&r.trajectory, out))?;
            }
        }
    }
    println!(
        "{} starts, {} rejected, success rate {:.3}, max f_error {}, max norm drift {}",
        summary.starts,
        summary.rejected,
        summary.success_rate,
        fmt_opt(summary.max_f_error),
        fmt_opt(summary.max_norm_drift),
    );
    let results = TransportReport {
        lambda: *lambda,
        mode: (*mode).into(),
        radius: radius.is_finite().then_some(radius),
        options: opts,
        summary,
        results,
    };
    let mut report = RunReport::new(
        echo(cli, "transport", Some(&problem.path)),
        &problem.bytes,
        seed,
        results,
    );
    report.timings = timings(cli, &[("transport", elapsed)]);
    write_json(&cli.out.join("transport.json"), &report)?;
    Ok(Outcome::Clean)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |v| format!("{v:.3e}"))
}

/// Projects a manifold start onto `g = 0`. Explicit starts must already be
/// within `AUTO_PROJECT`; sampled ones are projected from wherever they are.
fn manifold_start(g: &bifurc::Expression, x: &[f64], sampled: bool) -> Result<Vector, String> {
    let gv = g.eval(x).map_err(|e| e.to_string())?;
    if !sampled && !(gv.abs() <= AUTO_PROJECT) {
        return Err(format!("|g(x)| = {:e} exceeds {AUTO_PROJECT:e}", gv.abs()));
    }
    project_to_level(g, x, 0.0, 1e-12, PROJECTION_ITERS)
        .map_err(|e| format!("projection onto g = 0 failed: {e}"))
}

fn summarize(results: &[StartOutcome]) -> Summary {
    let mut s = Summary {
        starts: results.len(),
        ..Summary::default()
    };
    let mut transported = 0;
    for r in results {
        match r {
            StartOutcome::Rejected { .. } => s.rejected += 1,
            StartOutcome::Transported(r) => {
                transported += 1;
                s.successes += usize::from(r.success);
                let key = serde_json::to_value(r.trajectory.termination)
                    .ok()
                    .and_then(|v| v.as_str().map(str::to_string))
                    .unwrap_or_default();
                *s.terminations.entry(key).or_default() += 1;
                let completed = r.trajectory.termination == Termination::Completed;
                if completed && r.f_error.is_finite() {
                    s.max_f_error = Some(s.max_f_error.map_or(r.f_error, |m| m.max(r.f_error)));
                }
                if let Some(d) = r.norm_drift.filter(|d| completed && d.is_finite()) {
                    s.max_norm_drift = Some(s.max_norm_drift.map_or(d, |m| m.max(d)));
                }
            }
        }
    }
    s.success_rate = if transported == 0 {
        1.0
    } else {
        s.successes as f64 / transported as f64
    };
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::Parser;
    use serde_json::Value;

    struct Run {
        outcome: Result<Outcome, CliError>,
        dir: tempfile::TempDir,
    }

    impl Run {
        fn ok(&self) -> Outcome {
            *self.outcome.as_ref().unwrap()
        }

        fn report(&self, name: &str) -> Value {
            let text = std::fs::read_to_string(self.dir.path().join("out").join(name)).unwrap();
            serde_json::from_str(&text).unwrap()
        }
    }

    /// Runs `bifurc <args>` with `problem` written to a temporary file.
    fn bifurc(problem: &str, args: &[&str]) -> Run {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("problem.toml");
        std::fs::write(&path, problem).unwrap();
        let mut argv = vec!["bifurc".to_string()];
        argv.extend(args.iter().map(|a| a.to_string()));
        argv.extend(["--problem".into(), path.display().to_string()]);
        argv.extend(["--out".into(), dir.path().join("out").display().to_string()]);
        let cli = Cli::try_parse_from(argv).unwrap();
        Run {
            outcome: run(&cli),
            dir,
        }
    }

    const EXA2: &str = "n = 2\nf = \"y/(1+x^2)\"\ng = \"x\"\n";
    const CYLINDER: &str = "n = 3\nf = \"y\"\ng = \"0.5*x^2 + y^2 - 0.5\"\n";
    const LINEAR: &str = "n = 2\nf = \"x + 2*y\"\n";
    const SMALL: [&str; 4] = ["--radii", "6", "--dirs", "512"];

    fn with_small(args: &[&'static str]) -> Vec<&'static str> {
        args.iter().copied().chain(SMALL).collect()
    }

    #[test]
    fn kinf_candidates_exit_two() {
        let r = bifurc(EXA2, &with_small(&["scan", "--kind", "kinf"]));
        assert_eq!(r.ok().code(), 2);
        let report = r.report("scan-kinf.json");
        assert_eq!(report["schema_version"], 1);
        assert!(
            report["results"]["candidates"][0]["value"]
                .as_f64()
                .unwrap()
                .abs()
                < 1e-6
        );
        assert!(r.dir.path().join("out/kinf_witness_c0_w0.csv").exists());
    }

    #[test]
    fn gs_pass_exits_zero() {
        let r = bifurc(EXA2, &with_small(&["scan", "--kind", "gs"]));
        assert_eq!(r.ok().code(), 0);
        assert_eq!(r.report("scan-gs.json")["results"]["pass"], true);
    }

    #[test]
    fn linear_kinf_is_clean() {
        let r = bifurc(LINEAR, &with_small(&["scan", "--kind", "kinf"]));
        assert_eq!(r.ok(), Outcome::Clean);
        assert_eq!(
            r.report("scan-kinf.json")["results"]["candidates"],
            Value::Array(vec![])
        );
    }

    #[test]
    fn fiber_scans_need_g() {
        for kind in ["gs", "szero"] {
            let r = bifurc(LINEAR, &["scan", "--kind", kind]);
            assert!(matches!(r.outcome, Err(CliError::Usage(_))), "{kind}");
        }
    }

    #[test]
    fn bad_problem_file_names_the_line() {
        let r = bifurc(
            "n = 2\nf = \"x\"\nR = \"one\"\n",
            &["scan", "--kind", "kinf"],
        );
        let err = r.outcome.unwrap_err().to_string();
        assert!(
            err.contains("problem.toml") && err.contains("line 3"),
            "{err}"
        );
    }

    #[test]
    fn reports_repeat_apart_from_the_problem_path() {
        let a = bifurc(
            EXA2,
            &with_small(&["scan", "--kind", "szero", "--seed", "9"]),
        );
        let b = bifurc(
            EXA2,
            &with_small(&["scan", "--kind", "szero", "--seed", "9"]),
        );
        let read = |r: &Run| std::fs::read(r.dir.path().join("out/scan-szero.json")).unwrap();
        // The problem path differs between the runs; everything else must not.
        let strip = |bytes: Vec<u8>| {
            let mut v: Value = serde_json::from_slice(&bytes).unwrap();
            v["command"]["problem"] = Value::Null;
            v
        };
        assert_eq!(strip(read(&a)), strip(read(&b)));
    }

    #[test]
    fn exa3_sampled_transports_all_succeed() {
        let exa3 = "n = 3\nf = \"x - 3*x^5*y^2 + 2*x^7*y^3 + y*z\"\ng = \"y\"\n";
        let args = [
            "transport",
            "--lambda",
            "0",
            "--sample",
            "100",
            "--min-norm",
            "5",
            "--max-norm",
            "50",
        ];
        let r = bifurc(exa3, &args);
        assert_eq!(r.ok(), Outcome::Clean);
        let summary = &r.report("transport.json")["results"]["summary"];
        assert_eq!(summary["starts"], 100);
        assert_eq!(summary["success_rate"], 1.0);
        assert!(summary["max_f_error"].as_f64().unwrap() <= 1e-8);
    }

    #[test]
    fn starts_on_the_target_fiber_stay_put() {
        let r = bifurc(
            LINEAR,
            &["transport", "--lambda", "3", "--starts", "1,1;3,0;-1,2"],
        );
        assert_eq!(r.ok(), Outcome::Clean);
        let report = r.report("transport.json");
        assert_eq!(report["results"]["summary"]["success_rate"], 1.0);
        for result in report["results"]["results"].as_array().unwrap() {
            assert_eq!(result["endpoint"], result["start"]);
        }
    }

    #[test]
    fn manifold_starts_are_projected_or_rejected() {
        // On the Milnor set, 5e-4 off M, and far off M.
        let starts = "0,0.7071067811865476,3;1,0.0005,2;3,3,3";
        let args = [
            "transport",
            "--mode",
            "manifold",
            "--lambda",
            "0",
            "--starts",
            starts,
            "--csv",
        ];
        let r = bifurc(CYLINDER, &args);
        assert_eq!(r.ok(), Outcome::Clean);
        let report = r.report("transport.json");
        let results = report["results"]["results"].as_array().unwrap();
        assert_eq!(results[0]["trajectory"]["termination"], "degenerate_field");
        assert_eq!(results[1]["success"], true);
        assert!(results[1]["start"][1].as_f64().unwrap() != 0.0005);
        assert_eq!(results[2]["status"], "rejected");
        assert!(r.dir.path().join("out/trajectory_1.csv").exists());
        let summary = &report["results"]["summary"];
        assert_eq!(
            (
                summary["rejected"].as_u64(),
                summary["success_rate"].as_f64()
            ),
            (Some(1), Some(0.5))
        );
    }

    #[test]
    fn manifold_mode_needs_g() {
        let r = bifurc(
            LINEAR,
            &[
                "transport",
                "--mode",
                "manifold",
                "--lambda",
                "0",
                "--starts",
                "1,1",
            ],
        );
        assert!(matches!(r.outcome, Err(CliError::Usage(_))));
    }

    #[test]
    fn jacobian_example_passes() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().display().to_string();
        let cli = Cli::try_parse_from(["bifurc", "examples", "exa4", "--out", &out]).unwrap();
        assert_eq!(run(&cli).unwrap(), Outcome::Clean);
        let report: Value =
            serde_json::from_slice(&std::fs::read(dir.path().join("examples.json")).unwrap())
                .unwrap();
        assert_eq!(report["results"]["rows"][0]["pass"], true);
        assert!(report.get("timings").is_none());
    }
}
