fn main() { std::process::exit(pplprompt::cli::run(std::env::args_os())); }
