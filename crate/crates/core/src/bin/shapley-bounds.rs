fn main() {
    std::process::exit(shapley_bounds::cli::run_from(std::env::args_os()));
}
