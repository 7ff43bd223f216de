use clap::Parser;
use rimnull_cli::{run, Cli};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    match run(&cli) {
        Ok(m) => {
            println!(
                "{}: {} files in {} ({:.1} s, digest {})",
                m.scenario,
                m.outputs.len() + 1,
                cli.out.display(),
                m.wall_clock_s,
                &m.config_digest[..12]
            );
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
