//! Generates a small dome mesh plus a matching pipeline configuration, so the
//! CLI can be tried without any external input data:
//!
//! ```text
//! cargo run -p gridshell-core --example demo
//! cargo run -p gridshell-cli -- pipeline --config demo/config.json
//! ```

use std::fs;

use gridshell_core::mesh::save_obj;
use gridshell_core::pipeline::load_config;
use gridshell_core::primitives::paraboloid;
use serde_json::json;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    fs::create_dir_all("demo")?;

    // Shallow dome over a 3 m x 3 m plan, apex 0.9 m, corners at z = 0.
    let dome = paraboloid(8, 3.0, 0.9);
    save_obj(&dome, "demo/dome.obj")?;

    // Only the six fields below are required; everything else has defaults.
    let cfg = json!({
        "input": "demo/dome.obj",
        "output_dir": "demo/out",
        "density": 2.0,
        "anisotropy": 2.0,
        "radius": 0.5,
        "rng_seed": 7,
    });
    fs::write("demo/config.json", serde_json::to_string_pretty(&cfg)?)?;
    load_config("demo/config.json")?;

    println!("wrote demo/dome.obj and demo/config.json");
    println!("next: cargo run -p gridshell-cli -- pipeline --config demo/config.json");
    Ok(())
}
