use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use seanav::io::{parse_scenario_file, scenario_to_toml, write_comparison, write_run};
use seanav::sim::{run_scenario_with, ControllerKind, RunOptions, RunResult, Scenario, TerminalEvent, PRESETS, SUITE};

/// Batch simulation of NMPC/APF navigation scenarios.
#[derive(Parser, Debug)]
#[command(name = "seanav", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one scenario (file path or preset name).
    Run {
        #[arg(id = "scenario_arg", value_name = "SCENARIO")]
        scenario: Option<String>,
        #[command(flatten)]
        opts: RunArgs,
    },
    /// Run every encounter preset plus the combined scenario.
    Suite {
        #[command(flatten)]
        opts: RunArgs,
    },
    /// Paired-seed runs of pid, nmpc-no-observer and nmpc with a cross-track table.
    Compare {
        /// Defaults to the port-side disturbance preset.
        #[arg(id = "scenario_arg", value_name = "SCENARIO")]
        scenario: Option<String>,
        #[command(flatten)]
        opts: RunArgs,
    },
    /// List presets, or print one as a scenario file.
    Presets { name: Option<String> },
}

#[derive(Args, Debug, Clone)]
struct RunArgs {
    /// Scenario file or preset name.
    #[arg(long)]
    scenario: Option<String>,
    /// Output root; each run writes to <out>/<scenario>_<controller>_seed<seed>.
    #[arg(long, env = "SEANAV_OUT", default_value = "runs")]
    out: PathBuf,
    /// nmpc, nmpc-no-observer or pid.
    #[arg(long, value_parser = parse_controller)]
    controller: Option<ControllerKind>,
    #[arg(long)]
    seed: Option<u64>,
    /// Simulated duration [s].
    #[arg(long)]
    duration: Option<f64>,
    /// Record wall-clock solve times (output is then not reproducible).
    #[arg(long)]
    timing: bool,
    /// Print per-run progress to stderr.
    #[arg(short, long, action = clap::ArgAction::Count)]
    verbose: u8,
}

fn parse_controller(s: &str) -> Result<ControllerKind, String> {
    ControllerKind::parse(s).ok_or_else(|| format!("expected nmpc, nmpc-no-observer or pid, got {s:?}"))
}

fn load(spec: &str) -> Result<Scenario> {
    let path = Path::new(spec);
    if path.exists() {
        return Ok(parse_scenario_file(path)?);
    }
    Scenario::preset(spec).with_context(|| format!("{spec}: no such file or preset"))
}

impl RunArgs {
    fn apply(&self, mut s: Scenario) -> Result<Scenario> {
        if let Some(c) = self.controller {
            s.controller = c;
        }
        if let Some(seed) = self.seed {
            s.seed = seed;
        }
        if let Some(d) = self.duration {
            s.duration = d;
        }
        s.validate()?;
        Ok(s)
    }

    fn execute(&self, s: &Scenario) -> Result<RunResult> {
        if self.verbose > 0 {
            eprintln!("running {} ({}, seed {})", s.name, s.controller.as_str(), s.seed);
        }
        let result = run_scenario_with(s, RunOptions { timing: self.timing })?;
        let dir = self.out.join(result.dir_name());
        write_run(&result, &dir)?;
        if self.verbose > 0 {
            eprintln!("wrote {}", dir.display());
        }
        Ok(result)
    }
}

fn fmt(v: Option<f64>) -> String {
    v.map_or("-".into(), |v| format!("{v:.2}"))
}

fn summary(r: &RunResult) -> String {
    let m = &r.metrics;
    let event = match m.event {
        None => "none".to_string(),
        Some(TerminalEvent::Collision { obstacle }) => format!("collision:{obstacle}"),
        Some(TerminalEvent::Grounded { region }) => format!("grounded:{region}"),
        Some(TerminalEvent::Diverged) => "diverged".to_string(),
    };
    format!(
        "{:<20} {:<17} seed={:<4} event={:<14} d_obs={:>8} d_gnd={:>8} rms_xte={:>7} term_xte={:>7}",
        r.scenario.name,
        r.scenario.controller.as_str(),
        r.scenario.seed,
        event,
        fmt(m.min_obstacle_distance),
        fmt(m.min_grounding_distance),
        fmt(m.rms_cross_track),
        fmt(m.terminal_cross_track),
    )
}

fn pick(positional: &Option<String>, opts: &RunArgs, default: Option<&str>) -> Result<String> {
    match (positional, &opts.scenario) {
        (Some(_), Some(_)) => bail!("give the scenario either positionally or with --scenario, not both"),
        (Some(s), None) | (None, Some(s)) => Ok(s.clone()),
        (None, None) => default.map(str::to_string).context("missing scenario (file path or preset name)"),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { scenario, opts } => {
            let s = opts.apply(load(&pick(&scenario, &opts, None)?)?)?;
            println!("{}", summary(&opts.execute(&s)?));
        }
        Command::Suite { opts } => {
            if opts.scenario.is_some() {
                bail!("suite runs the built-in presets; --scenario does not apply");
            }
            let scenarios = SUITE
                .iter()
                .map(|name| opts.apply(Scenario::preset(name).expect("suite names are presets")))
                .collect::<Result<Vec<_>>>()?;
            let results = scenarios.par_iter().map(|s| opts.execute(s)).collect::<Result<Vec<_>>>()?;
            for r in &results {
                println!("{}", summary(r));
            }
        }
        Command::Compare { scenario, opts } => {
            if opts.controller.is_some() {
                bail!("compare runs all three controllers; --controller does not apply");
            }
            let base = opts.apply(load(&pick(&scenario, &opts, Some("port-disturbance"))?)?)?;
            let scenarios: Vec<Scenario> =
                ControllerKind::ALL.iter().map(|c| Scenario { controller: *c, ..base.clone() }).collect();
            let results = scenarios.par_iter().map(|s| opts.execute(s)).collect::<Result<Vec<_>>>()?;
            let table = opts.out.join(format!("{}_compare_seed{}.csv", base.name, base.seed));
            write_comparison(&results, &table)?;
            println!("{:<17} {:>8} {:>8} {:>8}", "controller", "rms", "max", "terminal");
            for r in &results {
                let m = &r.metrics;
                println!(
                    "{:<17} {:>8} {:>8} {:>8}",
                    r.scenario.controller.as_str(),
                    fmt(m.rms_cross_track),
                    fmt(m.max_cross_track),
                    fmt(m.terminal_cross_track)
                );
            }
            println!("table: {}", table.display());
        }
        Command::Presets { name: None } => {
            for p in PRESETS {
                let suite = if SUITE.contains(&p) { "suite" } else { "" };
                println!("{p:<20} {suite}");
            }
        }
        Command::Presets { name: Some(name) } => {
            let s = Scenario::preset(&name).with_context(|| format!("{name}: unknown preset"))?;
            print!("{}", scenario_to_toml(&s)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let reason = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {reason}");
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        super::Cli::command().debug_assert();
    }
}
