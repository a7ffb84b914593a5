use std::io;

fn main() {
    let code = detperturb::cli::run(std::env::args_os(), &mut io::stdout().lock());
    std::process::exit(code);
}
