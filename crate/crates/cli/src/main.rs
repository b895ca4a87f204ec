use clap::Parser;

fn main() {
    let cli = pisa_cli::Cli::parse();
    if let Err(e) = pisa_cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
