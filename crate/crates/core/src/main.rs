fn main() {
    std::process::exit(ion_gate_sim::cli::run_command(std::env::args_os()));
}
