use clap::Parser;

fn main() {
    avtfl::cli::init_logging();
    let cli = avtfl::cli::Cli::parse();
    if let Err(e) = avtfl::cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
