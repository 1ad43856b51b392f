use std::process::ExitCode;
use std::sync::atomic::AtomicBool;
use std::sync::Arc;

use clap::Parser;
use jamloop_daemon::app::{install_signal_flag, make_generator};
use jamloop_daemon::{run, simulate, Args, EngineConfig, Script};

fn main() -> ExitCode {
    let args = Args::parse();
    tracing_subscriber::fmt().with_max_level(args.log_level).with_writer(std::io::stderr).init();

    let config = match EngineConfig::from_args(args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("jamloop: {e}");
            return ExitCode::from(2);
        }
    };

    if let Some(path) = &config.simulate {
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("jamloop: cannot read {}: {e}", path.display());
                return ExitCode::from(2);
            }
        };
        let script = match Script::parse(&text) {
            Ok(s) => s,
            Err(e) => {
                eprintln!("jamloop: {}: {e}", path.display());
                return ExitCode::from(2);
            }
        };
        let report = simulate(&script, &config.engine, &config.cc_map, &*make_generator(&config));
        for r in &report.rejections {
            eprintln!("jamloop: line {}: rejected: {}", r.line, r.error);
        }
        print!("{}", report.render());
        return ExitCode::SUCCESS;
    }

    let stop = Arc::new(AtomicBool::new(false));
    if let Err(e) = install_signal_flag(Arc::clone(&stop)) {
        eprintln!("jamloop: cannot install signal handlers: {e}");
        return ExitCode::FAILURE;
    }
    match run(&config, &stop) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("jamloop: {e}");
            ExitCode::FAILURE
        }
    }
}
