use clap::Parser;

fn main() {
    let cli = blowup::cli::Cli::parse();
    let code = match blowup::cli::run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}
