fn main() {
    let args: Vec<String> = std::env::args().collect();
    std::process::exit(stokes_brinkman::harness::run(&args));
}
