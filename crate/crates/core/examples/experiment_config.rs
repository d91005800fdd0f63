//! Driving a subcommand from a TOML configuration with overrides, as the CLI does.

use concentra::config::ExperimentConfig;
use concentra::experiment::{run, Subcommand};

const CONFIG: &str = r#"
[problem]
dim = 2
lambda = [-2.0, 2.0, -2.0, 2.0]

[problem.potential]
family = "quadratic_well"
curvature = 1.0
center = [0.2, 0.0]

[run]
z_points = [[0.0, 0.0]]
"#;

fn main() -> concentra::Result<()> {
    let overrides = vec![
        "problem.nodes=97".to_string(),
        "problem.half_width=13".to_string(),
    ];
    let cfg = ExperimentConfig::from_toml_str(CONFIG, &overrides)?;
    print!("{}", cfg.header());
    let out = std::env::temp_dir().join("concentra-example");
    for path in run(Subcommand::FrozenSigma, &cfg, &out)? {
        println!("wrote {}", path.display());
        print!("{}", std::fs::read_to_string(path)?);
    }
    Ok(())
}
