fn main() {
    let args: Vec<String> = std::env::args().collect();
    let trace = std::env::var("COOLC_TRACE").is_ok_and(|v| v == "1");
    let code = coolc::main_with(&args, trace, &mut std::io::stdout().lock(), &mut std::io::stderr().lock());
    std::process::exit(code);
}
