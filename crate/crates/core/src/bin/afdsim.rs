fn main() {
    std::process::exit(afdsim::cli::cli_main(std::env::args_os()));
}
