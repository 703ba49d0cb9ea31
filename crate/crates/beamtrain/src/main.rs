use std::process::exit;

fn main() {
    exit(beamtrain::cli::main_with_args(std::env::args_os()))
}
