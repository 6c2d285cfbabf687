fn main() {
    std::process::exit(seir_phase::cli::run(std::env::args_os()));
}
