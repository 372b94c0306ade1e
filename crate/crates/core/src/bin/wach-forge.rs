fn main() {
    std::process::exit(wach_forge::runner::main_with(std::env::args_os()));
}
