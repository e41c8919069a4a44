fn main() {
    if let Err(e) = treegraft::cli::run() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
