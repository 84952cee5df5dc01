fn main() {
    std::process::exit(sgdm_lab::harness::main_with_args(std::env::args_os()));
}
