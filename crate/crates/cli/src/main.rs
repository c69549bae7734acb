use clap::Parser;

fn main() {
    let cli = lambdaq_cli::Cli::parse();
    std::process::exit(lambdaq_cli::run(cli));
}
