use std::process::ExitCode;

fn main() -> ExitCode {
    mscale_stokes::cli::run()
}
