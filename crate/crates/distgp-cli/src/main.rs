use clap::error::ErrorKind;
use clap::Parser;

use distgp_cli::{exit_code, run_from_cli, Cli};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            std::process::exit(0);
        }
        Err(e) => {
            eprint!("{e}");
            std::process::exit(1);
        }
    };
    if let Err(e) = run_from_cli(&cli) {
        eprintln!("error: {e}");
        std::process::exit(exit_code(&e));
    }
}
