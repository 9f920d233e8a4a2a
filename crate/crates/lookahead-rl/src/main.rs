fn main() {
    std::process::exit(lookahead_rl::cli::main());
}
