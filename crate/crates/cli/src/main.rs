use clap::Parser;
use hysterix_cli::{run, Cli, Command, SEED_ENV};

fn main() {
    let mut cli = Cli::parse();
    let env_seed = std::env::var(SEED_ENV).ok();
    if let Command::Simulate(a) | Command::Verify(a) | Command::Synthesize(a) = &mut cli.command {
        a.env_seed = env_seed;
    }
    let status = run(cli, &mut std::io::stdout().lock());
    std::process::exit(status.code());
}
