mod args;

use std::path::Path;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use lnecert::pipeline::{run, Outcome, Report};

use args::{build_config, is_csv, Cli, WORKERS_ENV};

const EXIT_CONFIG: u8 = 64;
const EXIT_NUMERICAL: u8 = 2;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_CONFIG),
            };
        }
    };
    match cli.workers {
        Some(0) => return fail(EXIT_CONFIG, &format!("--workers / {WORKERS_ENV} must be at least 1")),
        Some(w) => {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(w).build_global() {
                return fail(EXIT_CONFIG, &e.to_string());
            }
        }
        None => {}
    }
    let cfg = match build_config(&cli) {
        Ok(cfg) => cfg,
        Err(msg) => return fail(EXIT_CONFIG, &msg),
    };
    let report = match run(&cfg) {
        Ok(r) => r,
        Err(e) => return fail(EXIT_CONFIG, &format!("malformed config: {e}")),
    };
    if let Err(msg) = write_artifacts(&report) {
        return fail(EXIT_NUMERICAL, &msg);
    }
    if let Some(err) = &report.error {
        eprintln!("lnecert: {err}");
    }
    ExitCode::from(report.exit_code() as u8)
}

fn fail(code: u8, msg: &str) -> ExitCode {
    eprintln!("lnecert: {msg}");
    ExitCode::from(code)
}

fn write(path: &Path, text: &str) -> Result<(), String> {
    std::fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()))
}

fn write_artifacts(report: &Report) -> Result<(), String> {
    let outputs = &report.config.outputs;
    let mut text = report.to_json();
    text.push('\n');
    match &outputs.report {
        Some(p) => write(Path::new(p), &text)?,
        None => print!("{text}"),
    }
    let cloud = match &report.result {
        Some(Outcome::Sample(s)) => Some(&s.cloud),
        Some(Outcome::Map(m)) => Some(&m.cloud),
        _ => None,
    };
    if let (Some(p), Some(cloud)) = (&outputs.cloud, cloud) {
        let p = Path::new(p);
        let body = if is_csv(p) { cloud.to_csv() } else { cloud.to_json() };
        write(p, &body.map_err(|e| e.to_string())?)?;
    }
    if let (Some(p), Some(Outcome::Lne(scan))) = (&outputs.table, &report.result) {
        let mut table = String::from("radius,ratio\n");
        for e in &scan.entries {
            let q = e.ratio_sup.map(|q| q.to_string()).unwrap_or_default();
            table.push_str(&format!("{},{q}\n", e.radius));
        }
        write(Path::new(p), &table)?;
    }
    if let (Some(dir), Some(Outcome::Demo { cases })) = (&outputs.dir, &report.result) {
        let dir = Path::new(dir);
        std::fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
        for case in cases {
            let mut body = case.report.to_json();
            body.push('\n');
            write(&dir.join(format!("{}.json", case.name)), &body)?;
        }
    }
    Ok(())
}
