fn main() {
    std::process::exit(asd_landscape::app::main_with_args(std::env::args_os()));
}
