fn main() {
    let code = conic::cli::dispatch(std::env::args_os(), &mut std::io::stdout().lock());
    std::process::exit(code);
}
