fn main() {
    std::process::exit(csi_feedback::cli::cli_main(std::env::args_os()));
}
