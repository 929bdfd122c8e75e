use clap::Parser;

fn main() {
    let cli = cvxtau::cli::Cli::parse();
    std::process::exit(cvxtau::cli::run(&cli));
}
