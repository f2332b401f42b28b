use env_logger::Env;

fn main() {
    env_logger::Builder::from_env(Env::new().filter_or("SCMX_LOG", "error")).init();
    std::process::exit(scmx::run(std::env::args_os()));
}
