use clap::Parser;

fn main() {
    let args = choquard::cli::Args::parse();
    std::process::exit(choquard::cli::main_with_args(args));
}
