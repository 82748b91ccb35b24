use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use catfour::campaign::{run_campaign, BoxConfig, CampaignConfig, FolderConfig};
use catfour::optimizer::{run_experiment, Afo, Algorithm, ExperimentConfig};
use catfour::rna::RnaFolder;
use catfour::verify;
use catfour::RngSeed;

#[derive(Parser)]
#[command(
    name = "catfour",
    version,
    about = "Fourier-surrogate black-box optimization over categorical variables"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum BoxKind {
    Latin,
    Rna,
    Design,
    External,
}

#[derive(Subcommand)]
enum Command {
    /// Run one algorithm on one box with one seed.
    Optimize {
        /// TOML file with algorithm settings; flags override it.
        #[arg(long)]
        config: Option<PathBuf>,
        /// eco_f, eco_g, tco_f, rs or plain_sa (default eco_f).
        #[arg(long)]
        algorithm: Option<String>,
        /// Acquisition optimizer: sa or mcts (design boxes default to mcts).
        #[arg(long)]
        afo: Option<String>,
        #[arg(long = "box", value_enum, default_value = "latin")]
        black_box: BoxKind,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        budget: Option<usize>,
        /// Dot-bracket target file for the design box.
        #[arg(long)]
        target: Option<PathBuf>,
        /// Latin-square order or alphabet size of the external box.
        #[arg(long, default_value_t = 5)]
        k: usize,
        /// Sequence length of the RNA box or variable count of the external box.
        #[arg(long, default_value_t = 30)]
        n: usize,
        /// Scoring command of the external box, or external folder for RNA boxes.
        #[arg(long)]
        command: Option<String>,
        /// Write the run trace CSV here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a multi-seed comparison from a TOML campaign file.
    Campaign {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        jobs: Option<usize>,
        /// Override the campaign budget.
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Fold a sequence and print its structure and energy.
    Fold {
        sequence: String,
        /// External folder command; `CATFOUR_EXTERNAL_FOLDER` overrides it.
        #[arg(long)]
        external: Option<String>,
    },
    /// Check the bases and the folder against exhaustive oracles.
    Verify,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn folder(command: &Option<String>) -> FolderConfig {
    FolderConfig {
        external: command.clone(),
        ..FolderConfig::default()
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Optimize {
            config,
            algorithm,
            afo,
            black_box,
            seed,
            budget,
            target,
            k,
            n,
            command,
            out,
        } => {
            let mut exp = match &config {
                Some(path) => {
                    let text = std::fs::read_to_string(path)
                        .with_context(|| format!("reading {}", path.display()))?;
                    toml::from_str::<ExperimentConfig>(&text)
                        .with_context(|| format!("parsing {}", path.display()))?
                }
                None => ExperimentConfig::default(),
            };
            if let Some(name) = algorithm {
                exp.algorithm = name.parse::<Algorithm>()?;
            }
            if let Some(b) = budget {
                exp.budget = b;
            }
            let box_config = match black_box {
                BoxKind::Latin => BoxConfig::LatinSquare {
                    k,
                    noise: catfour::blackbox::DEFAULT_LATIN_NOISE,
                    permutation: None,
                },
                BoxKind::Rna => BoxConfig::RnaOptimize {
                    n,
                    folder: folder(&command),
                },
                BoxKind::Design => BoxConfig::RnaDesign {
                    target: None,
                    target_file: Some(target.context("--target is required for the design box")?),
                    folder: folder(&command),
                },
                BoxKind::External => BoxConfig::External {
                    n,
                    k,
                    command: command.context("--command is required for the external box")?,
                },
            };
            exp.afo = match (afo, black_box) {
                (Some(a), _) => a.parse::<Afo>()?,
                (None, BoxKind::Design) => Afo::Mcts,
                (None, _) if config.is_some() => exp.afo,
                (None, _) => Afo::Sa,
            };
            exp.validate()?;
            let mut bb = box_config.build(RngSeed(seed))?;
            let outcome = run_experiment(&exp, bb.as_mut(), RngSeed(seed))?;
            let (point, value) = outcome.best().context("empty trace")?;
            println!(
                "algorithm {} box {} seed {seed} budget {}",
                exp.algorithm,
                bb.name(),
                exp.budget
            );
            println!("best value {value}");
            println!("best point {point}");
            if let Some(schema) = bb.schema() {
                println!("best sequence {}", schema.decode_sequence(point.values())?);
            }
            println!("seconds per step {:.6}", outcome.seconds_per_step());
            if let Some(path) = out {
                outcome.trace.save(&path)?;
                println!("trace written to {}", path.display());
            }
            Ok(())
        }
        Command::Campaign {
            config,
            out,
            jobs,
            budget,
        } => {
            let mut c = CampaignConfig::load(&config)?;
            if jobs.is_some() {
                c.jobs = jobs;
            }
            if let Some(b) = budget {
                c.budget = b;
                for e in c.experiments.values_mut() {
                    e.budget = b;
                }
            }
            c.validate()?;
            let (summary, artifacts) = run_campaign(&c, out.as_deref())?;
            print!("{}", summary.table());
            match artifacts {
                Some(a) => println!(
                    "wrote {} traces, {}, {} and {}",
                    a.traces.len(),
                    a.summary.display(),
                    a.timing.display(),
                    a.final_best.display()
                ),
                None => println!("no output directory given; nothing written"),
            }
            Ok(())
        }
        Command::Fold { sequence, external } => {
            let f = match external {
                Some(cmd) => RnaFolder::external(&cmd)?,
                None => match std::env::var(catfour::rna::EXTERNAL_FOLDER_ENV) {
                    Ok(cmd) => RnaFolder::external(&cmd)?,
                    Err(_) => RnaFolder::default(),
                },
            };
            let fold = f.fold(&sequence.trim().to_ascii_uppercase())?;
            println!("{}", sequence.trim().to_ascii_uppercase());
            println!("{} ({:.2})", fold.structure, fold.energy);
            Ok(())
        }
        Command::Verify => {
            let checks = verify::run_all()?;
            for c in &checks {
                println!("{c}");
            }
            let failed = checks.iter().filter(|c| !c.passed).count();
            if failed > 0 {
                bail!("{failed} of {} checks failed", checks.len());
            }
            println!("all {} checks passed", checks.len());
            Ok(())
        }
    }
}
