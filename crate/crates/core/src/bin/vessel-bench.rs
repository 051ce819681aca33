fn main() {
    std::process::exit(vessel_bench::cli::run(std::env::args_os()));
}
