use env_logger::Env;

fn main() {
    env_logger::Builder::from_env(Env::new().filter_or("DSU_LOG", "warn")).init();
    std::process::exit(dsu_core::cli::run(std::env::args_os()));
}
