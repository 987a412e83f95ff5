fn main() {
    std::process::exit(influence_game::cli::main_exit_code());
}
