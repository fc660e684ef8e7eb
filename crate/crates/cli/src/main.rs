use clap::Parser;

fn main() {
    let cli = randlab_cli::Cli::parse();
    match randlab_cli::execute(cli) {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(2);
        }
    }
}
