use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use tactix::harness::{self, config::seed_dir, report, PolicyKind, RunConfig, Suite};
use tactix::mask::MaskRules;
use tactix::skip::SkipScheme;
use tactix::world::{desk_map, full_map, load_map, write_map, RoadMap, WorldConfig};

#[derive(Parser)]
#[command(name = "tactix", version, about = "Tactical driving decisions with deep Q-learning")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum MaskArg {
    None,
    Rule1,
    Rule2,
}

#[derive(Clone, Copy, ValueEnum)]
enum SkipArg {
    None,
    Uniform,
    Nonuniform,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train one seed and evaluate it on the config's suite.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a checkpoint on a suite.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        suite: PathBuf,
        #[arg(long, value_enum, default_value = "none")]
        mask: MaskArg,
        #[arg(long, value_enum, default_value = "uniform")]
        skip: SkipArg,
        /// Map the suite was generated for: desk, full, or a map file.
        #[arg(long, default_value = "desk")]
        map: String,
        /// Preset label written into the metrics.
        #[arg(long, default_value = "custom")]
        preset: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory for metrics.json and actions.jsonl.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a test-episode suite.
    SuiteGen {
        /// desk, full, or a map file.
        #[arg(long)]
        map: String,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 8)]
        n_npcs: usize,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summarize metrics files into the results table.
    Report {
        #[arg(long = "in", num_args = 1.., required = true)]
        dirs: Vec<PathBuf>,
        /// Directory for report.csv and report.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a built-in map to a file.
    ExportMap {
        #[arg(long, value_parser = ["desk", "full"])]
        which: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn map_from(arg: &str) -> Result<RoadMap> {
    Ok(match arg {
        "desk" => desk_map(),
        "full" => full_map(),
        path => load_map(Path::new(path))?,
    })
}

fn write_metrics_stdout(m: &harness::Metrics) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(m)?);
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().cmd {
        Cmd::Train { config, seed, out } => {
            let cfg = RunConfig::load(&config).with_context(|| format!("loading {}", config.display()))?;
            let dir = seed_dir(&out, seed);
            let suite = harness::suite_for(&cfg)?;
            let params = if cfg.policy == PolicyKind::Dqn {
                let o = harness::train(&cfg, seed, &dir)?;
                eprintln!(
                    "trained {} env steps, {} updates, {} episodes",
                    o.summary.env_steps, o.summary.updates, o.summary.episodes
                );
                Some(o.agent.online)
            } else {
                None
            };
            let m = harness::evaluate_seed(&cfg, params, seed, &suite, &dir)?;
            write_metrics_stdout(&m)?;
        }
        Cmd::Eval {
            checkpoint,
            suite,
            mask,
            skip,
            map,
            preset,
            seed,
            out,
        } => {
            let params = harness::load_policy_params(&checkpoint)?;
            let suite = Suite::load(&suite)?;
            let mut cfg = RunConfig::desk();
            cfg.preset = preset;
            cfg.map = map;
            cfg.eval_mask.rules = match mask {
                MaskArg::None => MaskRules::None,
                MaskArg::Rule1 => MaskRules::Rule1,
                MaskArg::Rule2 => MaskRules::Rule2,
            };
            cfg.eval_skip = match skip {
                SkipArg::None => SkipScheme::none(),
                SkipArg::Uniform => SkipScheme::uniform(harness::presets::TRAIN_K),
                SkipArg::Nonuniform => SkipScheme::non_uniform(2, 6),
            };
            if params.shape.actions != cfg.eval_skip.n_actions() {
                bail!("checkpoint has {} actions, scheme expects {}", params.shape.actions, cfg.eval_skip.n_actions());
            }
            let m = match out {
                Some(dir) => harness::evaluate_seed(&cfg, Some(params), seed, &suite, &dir)?,
                None => {
                    let tmp = std::env::temp_dir().join(format!("tactix-eval-{}", std::process::id()));
                    let m = harness::evaluate_seed(&cfg, Some(params), seed, &suite, &tmp)?;
                    let _ = fs::remove_dir_all(&tmp);
                    m
                }
            };
            write_metrics_stdout(&m)?;
        }
        Cmd::SuiteGen {
            map,
            seed,
            count,
            n_npcs,
            out,
        } => {
            let road = Arc::new(map_from(&map)?);
            let suite = Suite::generate(road, Arc::new(WorldConfig::default()), seed, count, n_npcs)?;
            match out {
                Some(p) => suite.save(&p)?,
                None => print!("{}", suite.to_text()),
            }
        }
        Cmd::Report { dirs, out } => {
            let metrics = report::collect_metrics(&dirs)?;
            if metrics.is_empty() {
                bail!("no metrics files found");
            }
            let rows = report::aggregate(&metrics);
            print!("{}", report::render_text(&rows));
            if let Some(dir) = out {
                fs::create_dir_all(&dir)?;
                fs::write(dir.join("report.csv"), report::render_csv(&rows)?)?;
                fs::write(dir.join("report.json"), serde_json::to_string_pretty(&rows)?)?;
            }
        }
        Cmd::ExportMap { which, out } => {
            fs::write(&out, write_map(&map_from(&which)?))?;
        }
    }
    Ok(())
}
