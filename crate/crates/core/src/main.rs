fn main() {
    let mut stdout = std::io::stdout().lock();
    if let Err(e) = fwgan::cli::run(std::env::args_os(), &mut stdout) {
        if e.code == fwgan::cli::EXIT_OK {
            print!("{e}");
        } else {
            eprintln!("error: {e}");
        }
        std::process::exit(e.code);
    }
}
