use std::process::ExitCode;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PID_A2C_LOG", "warn")).init();
    pid_a2c::cli::run(std::env::args_os())
}
