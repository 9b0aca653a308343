fn main() {
    std::process::exit(pcp_core::cli::run());
}
