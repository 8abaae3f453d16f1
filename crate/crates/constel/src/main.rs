fn main() { constel::cli::run_main(); }
