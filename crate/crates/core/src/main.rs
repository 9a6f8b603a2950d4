fn main() {
    std::process::exit(conekit::runner::main_with_args(std::env::args_os()));
}
