use clap::Parser;
use qwass_cli::app::{run, Cli};

fn main() {
    let cli = Cli::parse();
    let trace = matches!(cli.command, qwass_cli::app::Command::Run { trace: true, .. });
    let level = if trace { "trace" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    std::process::exit(run(cli));
}
