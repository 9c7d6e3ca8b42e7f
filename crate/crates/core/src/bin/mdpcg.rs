fn main() {
    std::process::exit(mdp_congestion::cli::main());
}
