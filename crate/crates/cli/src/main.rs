use clap::Parser;
use mixion_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        eprintln!("mixion: {e}");
        std::process::exit(e.exit_code());
    }
}
