use clap::Parser;

fn main() {
    let cli = acyl_lab::cli::Cli::parse();
    std::process::exit(acyl_lab::cli::execute(cli));
}
