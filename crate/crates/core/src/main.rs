use clap::Parser;

fn main() {
    let cli = tilemux::cli::Cli::parse();
    if let Err(e) = tilemux::cli::run(cli) {
        eprintln!("{}", serde_json::json!({ "error": format!("{e:#}") }));
        std::process::exit(1);
    }
}
