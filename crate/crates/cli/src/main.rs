use clap::Parser;
use hcran_cli::app::{main_with, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = main_with(cli) {
        eprintln!("{}", e.to_json());
        std::process::exit(e.exit_code());
    }
}
