//! Writes the procedural demo assets and a generator config.
//!
//! ```text
//! cargo run -p synthforge --example demo_assets -- assets
//! synthforge generate --config assets/generate.toml --seed 1 --count 20 --out out/demo
//! ```

fn main() {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "assets".to_string());
    match synthforge_core::demo::write_demo_assets(std::path::Path::new(&dir)) {
        Ok(config) => println!("wrote {}", config.display()),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(2);
        }
    }
}
