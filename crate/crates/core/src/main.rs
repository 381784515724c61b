use clap::Parser;

fn main() {
    let cli = eoc_ntk::cli::Cli::parse();
    match eoc_ntk::cli::run(&cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(1);
        }
    }
}
