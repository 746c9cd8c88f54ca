use clap::Parser;

fn main() {
    let cli = perchkit::cli::Cli::parse();
    if let Err(e) = perchkit::cli::run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
