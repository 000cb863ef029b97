use clap::Parser;

fn main() {
    let cli = hjreduce::cli::Cli::parse();
    std::process::exit(hjreduce::cli::run(&cli));
}
