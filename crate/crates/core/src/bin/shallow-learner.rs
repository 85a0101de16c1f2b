fn main() {
    std::process::exit(shallow_learner::cli::run(std::env::args_os()));
}
