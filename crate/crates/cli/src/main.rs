fn main() {
    std::process::exit(mnlab_cli::run(std::env::args_os(), std::env::var("MNLAB_SEED").ok()));
}
