//! Drives an experiment from configuration text, as the `nsrep` binary does.

use nsrep::config::parse_config;
use nsrep::experiments;

const CONFIG: &str = "
[experiment]
name = convergence_N

[grid]
n = 16

[sim]
N_values = 2, 4, 8
T = 0.2
dt = 0.02

[init]
kmax = 3

[mc]
replications = 4
";

fn main() -> nsrep::Result<()> {
    let cfg = parse_config(CONFIG)?;
    let out = std::env::temp_dir().join("nsrep_example_run");
    let outcome = experiments::run(&cfg, Some(&out), None)?;
    for c in &outcome.checks {
        println!("{} = {:.4} (target {}, passed {})", c.name, c.value, c.target, c.passed);
    }
    print!("{}", std::fs::read_to_string(out.join("aggregate.csv"))?);
    Ok(())
}
