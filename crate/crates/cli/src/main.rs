fn main() {
    std::process::exit(camtransform_cli::run(std::env::args_os()));
}
