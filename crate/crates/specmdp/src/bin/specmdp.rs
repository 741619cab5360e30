fn main() {
    std::process::exit(specmdp::cli::run(std::env::args_os()));
}
