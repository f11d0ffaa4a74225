fn main() {
    std::process::exit(lv_switch::cli::run(std::env::args_os()));
}
