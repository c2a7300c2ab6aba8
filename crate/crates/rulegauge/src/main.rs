use clap::Parser;

fn main() {
    let cli = rulegauge::cli::Cli::parse();
    match rulegauge::cli::run(cli) {
        Ok(()) => {}
        Err(err) => {
            eprintln!("error: {err}");
            std::process::exit(err.exit_code());
        }
    }
}
