fn main() -> std::process::ExitCode {
    roikit::cli::run(std::env::args_os())
}
