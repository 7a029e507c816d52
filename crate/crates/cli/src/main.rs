use std::fs;
use std::io::{self, BufRead, IsTerminal, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use factor_calc_core::expr::Mode;
use factor_calc_lang::{Reply, Session, Severity};
use factor_calc_oracle::{run_suite, GenConfig, SUITES};

#[derive(Parser)]
#[command(name = "factor-calc", version, about = "Exact calculator for free products, rescalings and free trades of II1 factors")]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,

    /// Script with one command per line; reads stdin when absent.
    script: Option<PathBuf>,

    #[arg(long, value_enum, default_value = "distinct")]
    mode: ModeArg,

    /// Write every reply, with certificates, to this JSON file.
    #[arg(long, value_name = "OUT")]
    json: Option<PathBuf>,

    /// Replay each certificate before printing its result.
    #[arg(long)]
    check: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the randomized invariant suites.
    Check {
        #[arg(long, default_value = "all", value_parser = clap::builder::PossibleValuesParser::new(SUITES))]
        suite: String,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Directory for counterexample scripts.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Distinct,
    Collapsed,
}

fn exit_code(s: Severity) -> ExitCode {
    match s {
        Severity::Ok => ExitCode::SUCCESS,
        Severity::Diagnostic => ExitCode::from(1),
        Severity::Engine => ExitCode::from(2),
    }
}

fn run_check(suite: &str, n: usize, seed: u64, out: &Path) -> ExitCode {
    let cfg = GenConfig::with_seed(seed);
    let reports = run_suite(suite, &cfg, n).expect("suite names are validated by clap");
    let mut ok = true;
    for r in &reports {
        println!("{}", r);
        if let Some(cx) = &r.failure {
            ok = false;
            let path = out.join(format!("counterexample-{}-seed{}.fc", r.suite.replace(' ', "-"), seed));
            match fs::write(&path, &cx.script) {
                Ok(()) => println!("  counterexample written to {}", path.display()),
                Err(e) => eprintln!("  cannot write {}: {}", path.display(), e),
            }
        }
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn show(r: &Reply) {
    if r.text.is_empty() {
        return;
    }
    if r.severity == Severity::Ok {
        println!("{}", r.text);
    } else {
        eprintln!("{}", r.text);
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(Command::Check { suite, n, seed, out }) = &cli.command {
        return run_check(suite, *n, *seed, out);
    }

    let mode = match cli.mode {
        ModeArg::Distinct => Mode::Distinct,
        ModeArg::Collapsed => Mode::Collapsed,
    };
    let mut session = Session::new(mode);
    session.check = cli.check;
    let mut worst = Severity::Ok;
    let mut replies = Vec::new();
    let mut handle = |session: &mut Session, line: &str| -> bool {
        let r = session.eval(line);
        show(&r);
        worst = worst.max(r.severity);
        if !r.json.is_null() {
            replies.push(r.json.clone());
        }
        r.quit
    };

    match &cli.script {
        Some(path) => {
            let src = match fs::read_to_string(path) {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("error: cannot read {}: {}", path.display(), e);
                    return ExitCode::from(1);
                }
            };
            if let Some(dir) = path.parent() {
                session.set_base_dir(dir);
            }
            for line in src.lines() {
                if handle(&mut session, line) {
                    break;
                }
            }
        }
        None => {
            let stdin = io::stdin();
            let interactive = stdin.is_terminal();
            loop {
                if interactive {
                    print!("> ");
                    let _ = io::stdout().flush();
                }
                let mut line = String::new();
                match stdin.lock().read_line(&mut line) {
                    Ok(0) | Err(_) => break,
                    Ok(_) => {
                        if handle(&mut session, &line) {
                            break;
                        }
                    }
                }
            }
        }
    }

    if let Some(out) = &cli.json {
        let text = serde_json::to_string_pretty(&serde_json::Value::Array(replies)).expect("JSON values serialize");
        if let Err(e) = fs::write(out, text + "\n") {
            eprintln!("error: cannot write {}: {}", out.display(), e);
            return ExitCode::from(2);
        }
    }
    exit_code(worst)
}
