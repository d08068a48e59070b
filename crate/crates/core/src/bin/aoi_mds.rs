use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(aoi_mds_core::cli::run(std::env::args_os()))
}
