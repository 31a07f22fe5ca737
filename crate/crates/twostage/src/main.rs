use clap::Parser;

fn main() {
    let cli = twostage::cli::Cli::parse();
    if let Err(e) = twostage::cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
