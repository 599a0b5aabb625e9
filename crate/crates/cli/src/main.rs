use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use fdo_mlp_cli::commands::{self, CommandOutput};
use fdo_mlp_cli::config::RunConfig;

#[derive(Parser)]
#[command(name = "fdo-mlp", version, about = "Train and evaluate MLP classifiers with the Fitness Dependent Optimizer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// `key = value` settings file; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<String>,
    /// Directory for output files (default `out`).
    #[arg(long, global = true)]
    out_dir: Option<String>,
}

/// Declares a flag struct whose fields are all optional strings, plus the
/// `(key, value)` list used to layer them over the config file.
macro_rules! settings {
    ($name:ident { $($(#[$doc:meta])* $field:ident),* $(,)? }) => {
        #[derive(Args)]
        struct $name {
            $(
                $(#[$doc])*
                #[arg(long)]
                $field: Option<String>,
            )*
        }

        impl $name {
            fn pairs(&self) -> Vec<(&'static str, Option<String>)> {
                vec![$((stringify!($field), self.$field.clone())),*]
            }
        }
    };
}

settings!(ModelFlags {
    /// Training CSV.
    data,
    /// Name of the 0/1 label column (default `label`).
    label,
    /// `fdo` or `bp`.
    trainer,
    /// Hidden units (default 2n+1).
    hidden,
    /// `compact` (40 scouts, 75 iterations) or `extended` (40 scouts, 200 iterations).
    preset,
    population,
    iterations,
    weight_factor,
    /// Lower edge of the weight search box.
    lower,
    /// Upper edge of the weight search box.
    upper,
    /// `per-dimension` or `per-scout` random draws.
    draws,
    threshold,
    /// `linear` or `sigmoid`.
    output_activation,
    learning_rate,
    epochs,
    /// `true` to evaluate in parallel.
    parallel,
});

settings!(TrainFlags {
    /// `false` to skip min-max scaling.
    normalize,
});

settings!(CrossvalFlags { folds, shuffle });

settings!(BenchmarkFlags {
    /// sphere, rastrigin or rosenbrock.
    function,
    dimension,
    runs,
    population,
    iterations,
    weight_factor,
    draws,
    parallel,
});

settings!(GenerateFlags {
    samples,
    features,
    separation,
    /// Fraction of positives: `0.64`, `183/287` or `183:104`.
    balance,
    /// Output file name, relative to the output directory.
    output,
});

settings!(EvaluateFlags {
    /// Model file written by `train`.
    model,
    data,
    label,
    /// `normalization.csv` written by `train`.
    normalization,
    threshold,
    /// Metrics from raw counts `tp,fp,fn,tn` instead of a model.
    confusion,
});

#[derive(Subcommand)]
enum Command {
    /// Train one network and write model, convergence curve and metrics.
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelFlags,
        #[command(flatten)]
        extra: TrainFlags,
    },
    /// k-fold cross-validation report.
    Crossval {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelFlags,
        #[command(flatten)]
        extra: CrossvalFlags,
    },
    /// Repeated FDO runs on a benchmark function.
    Benchmark {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        extra: BenchmarkFlags,
    },
    /// Write a synthetic two-class dataset.
    Generate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        extra: GenerateFlags,
    },
    /// Score a saved model, or report metrics for given confusion counts.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        extra: EvaluateFlags,
    },
}

type Runner = fn(&RunConfig) -> Result<CommandOutput>;

fn run(cli: Cli) -> Result<()> {
    let (common, pairs, allowed, runner): (Common, Vec<_>, Vec<&str>, Runner) = match cli.command {
        Command::Train { common, model, extra } => {
            let mut p = model.pairs();
            p.extend(extra.pairs());
            (common, p, commands::train_keys(), commands::cmd_train)
        }
        Command::Crossval { common, model, extra } => {
            let mut p = model.pairs();
            p.extend(extra.pairs());
            (common, p, commands::crossval_keys(), commands::cmd_crossval)
        }
        Command::Benchmark { common, extra } => (common, extra.pairs(), commands::benchmark_keys(), commands::cmd_benchmark),
        Command::Generate { common, extra } => (common, extra.pairs(), commands::generate_keys(), commands::cmd_generate),
        Command::Evaluate { common, extra } => (common, extra.pairs(), commands::evaluate_keys(), commands::cmd_evaluate),
    };
    let file = common.config.as_deref().map(RunConfig::load).transpose()?;
    let mut flags = pairs;
    flags.push(("seed", common.seed));
    flags.push(("out_dir", common.out_dir));
    let rc = RunConfig::resolve(&allowed, file, flags)?;

    let out = runner(&rc)?;
    let dir = commands::out_dir(&rc);
    out.files.commit(&dir)?;
    print!("{}", out.stdout);
    for name in out.files.names() {
        println!("wrote {}", dir.join(name).display());
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
