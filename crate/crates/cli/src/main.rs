use clap::Parser;
use segreg_cli::Cli;

fn main() {
    let cli = Cli::parse();
    if let Err(err) = segreg_cli::run(&cli) {
        eprintln!("segreg: {err}");
        std::process::exit(err.exit_code());
    }
}
