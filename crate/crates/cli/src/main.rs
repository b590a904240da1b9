use std::io::Write;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let env_seed = std::env::var("BEANSCOPE_SEED")
        .ok()
        .and_then(|v| v.parse::<u64>().ok());
    // Exit 2 is reserved for internal errors (panics); expected failures
    // come back as exit 1 from run_with_io.
    let result = std::panic::catch_unwind(|| {
        let mut stdout = std::io::stdout();
        let mut stderr = std::io::stderr();
        beanscope_cli::run_with_io(&args, &mut stdout, &mut stderr, env_seed)
    });
    match result {
        Ok(code) => std::process::exit(code),
        Err(_) => {
            let _ = writeln!(std::io::stderr(), "error: internal failure");
            std::process::exit(2);
        }
    }
}
