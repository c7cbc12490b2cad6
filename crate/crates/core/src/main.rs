fn main() {
    std::process::exit(qneuron::cli::run(std::env::args_os()));
}
