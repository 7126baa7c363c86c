fn main() {
    std::process::exit(earlypred::cli::run(std::env::args_os()));
}
