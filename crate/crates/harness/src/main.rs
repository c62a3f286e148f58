use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nirmal_harness::config::{Activation, DatasetKind, Layout, RunConfig, Variant};
use nirmal_harness::report::{self, RunReport, RESULTS_CSV};
use nirmal_harness::{gradcheck, poolcheck, train, Result};

#[derive(Parser)]
#[command(
    name = "nirmal",
    version,
    about = "NIRMAL pooling vs 2x2 max pooling experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one model and write its report.
    Train(RunArgs),
    /// Train both pooling variants with identical settings and print a table.
    Compare {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated seeds; each variant is trained once per seed.
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        /// Summarize an existing results.csv instead of training.
        #[arg(long, value_name = "CSV")]
        from_csv: Option<PathBuf>,
    },
    /// Print pooling parameters for every (input, target) in [1, 64]².
    Poolcheck {
        /// Only print rows whose output size differs from the target.
        #[arg(long)]
        deviating_only: bool,
    },
    /// Compare analytic gradients against central finite differences.
    Gradcheck {
        #[arg(long, default_value_t = gradcheck::DEFAULT_SEED)]
        seed: u64,
        /// Scale the named check's analytic gradient (harness self-test).
        #[arg(long, hide = true)]
        corrupt: Option<String>,
    },
}

#[derive(Args, Clone, Default)]
struct RunArgs {
    /// Key-value config file (`key = value` per line); flags override it.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    dataset: Option<DatasetKind>,
    #[arg(long, value_enum)]
    variant: Option<Variant>,
    /// Where ReLU sits relative to the convolutions.
    #[arg(long, value_enum)]
    activation: Option<Activation>,
    /// Pool after every convolution or once after the last.
    #[arg(long, value_enum)]
    layout: Option<Layout>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    val_fraction: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    beta1: Option<f64>,
    #[arg(long)]
    beta2: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// NIRMAL targets per pooling stage, e.g. `13x13,5x5`.
    #[arg(long, value_name = "HxW,...")]
    pool_targets: Option<String>,
    /// Raw pixel bytes are divided by this.
    #[arg(long)]
    pixel_divisor: Option<f64>,
    #[arg(long)]
    train_limit: Option<usize>,
    #[arg(long)]
    test_limit: Option<usize>,
    /// 10000 train / 2000 test images and 3 epochs, unless overridden.
    #[arg(long)]
    desk_scale: bool,
    /// Dataset root; falls back to $NIRMAL_DATA_DIR, then ./data.
    #[arg(long)]
    data_dir: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Report file stem.
    #[arg(long)]
    name: Option<String>,
    /// Suppress per-epoch progress lines.
    #[arg(long, short)]
    quiet: bool,
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut c = RunConfig::default();
        if let Some(path) = &self.config {
            c.apply_kv_file(path)?;
        }
        if self.desk_scale {
            c.apply_desk_scale();
        }
        macro_rules! take {
            ($($field:ident),*) => {$(
                if let Some(v) = &self.$field {
                    c.$field = v.clone();
                }
            )*};
        }
        take!(
            dataset,
            variant,
            activation,
            layout,
            epochs,
            batch_size,
            val_fraction,
            seed,
            lr,
            beta1,
            beta2,
            epsilon,
            pixel_divisor,
            output_dir
        );
        if let Some(v) = &self.pool_targets {
            c.set("pool_targets", v)?;
        }
        if self.train_limit.is_some() {
            c.train_limit = self.train_limit;
        }
        if self.test_limit.is_some() {
            c.test_limit = self.test_limit;
        }
        if self.data_dir.is_some() {
            c.data_dir = self.data_dir.clone();
        }
        if self.name.is_some() {
            c.name = self.name.clone();
        }
        c.validate()?;
        Ok(c)
    }
}

fn train_and_save(config: &RunConfig, quiet: bool) -> Result<RunReport> {
    if !quiet {
        eprintln!(
            "training {} / {} (seed {}, fingerprint {})",
            config.dataset,
            config.variant,
            config.seed,
            config.fingerprint()
        );
    }
    let report = train::run(config, &mut |m| {
        if !quiet {
            eprintln!(
                "  epoch {:>2}: train loss {:.4} acc {:.4} | val loss {:.4} acc {:.4}",
                m.epoch, m.train_loss, m.train_accuracy, m.val_loss, m.val_accuracy
            );
        }
    })?;
    let path = report.save(&config.output_dir, &config.report_stem())?;
    if !quiet {
        eprintln!("  wrote {}", path.display());
    }
    Ok(report)
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(args) => {
            let config = args.resolve()?;
            let r = train_and_save(&config, args.quiet)?;
            println!(
                "{} {} seed={} test_loss={:.4} test_accuracy={:.4} wall_clock={:.1}s",
                r.dataset, r.variant, r.seed, r.test_loss, r.test_accuracy, r.wall_clock_secs
            );
        }
        Command::Compare {
            run,
            seeds,
            from_csv,
        } => {
            let rows = match from_csv {
                Some(path) => report::read_csv(&path)?,
                None => {
                    let base = run.resolve()?;
                    let seeds = if seeds.is_empty() {
                        vec![base.seed]
                    } else {
                        seeds
                    };
                    let mut rows = Vec::new();
                    for &seed in &seeds {
                        for variant in [Variant::Max2x2, Variant::Nirmal] {
                            let config = RunConfig {
                                seed,
                                variant,
                                name: base.name.as_ref().map(|n| format!("{n}-{variant}-s{seed}")),
                                ..base.clone()
                            };
                            rows.push(train_and_save(&config, run.quiet)?.summary());
                        }
                    }
                    if !run.quiet {
                        eprintln!(
                            "rows appended to {}",
                            base.output_dir.join(RESULTS_CSV).display()
                        );
                    }
                    rows
                }
            };
            print!("{}", report::format_table(&report::compare_rows(&rows)));
        }
        Command::Poolcheck { deviating_only } => {
            let mut rows = poolcheck::sweep(poolcheck::SWEEP_MAX)?;
            if deviating_only {
                rows.retain(|r| r.deviates());
            }
            print!("{}", poolcheck::format_csv(&rows));
        }
        Command::Gradcheck { seed, corrupt } => {
            let results = gradcheck::run(seed, corrupt.as_deref())?;
            print!("{}", gradcheck::format_report(&results));
            gradcheck::verdict(&results)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let code = e.exit_code();
            ExitCode::from(u8::try_from(code).unwrap_or(1))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_and_preset() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("run.cfg");
        std::fs::write(&file, "epochs = 7\nseed = 5\nbatch_size = 16\n").unwrap();
        let args = RunArgs {
            config: Some(file),
            desk_scale: true,
            seed: Some(9),
            test_limit: Some(100),
            ..RunArgs::default()
        };
        let c = args.resolve().unwrap();
        // preset beats the file, explicit flags beat both
        assert_eq!((c.epochs, c.seed, c.batch_size), (3, 9, 16));
        assert_eq!((c.train_limit, c.test_limit), (Some(10_000), Some(100)));
    }

    #[test]
    fn cli_parses() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
        let cli = Cli::try_parse_from([
            "nirmal",
            "train",
            "--dataset",
            "mnist_fashion",
            "--pool-targets",
            "10x10",
        ])
        .unwrap();
        assert!(matches!(cli.command, Command::Train(_)));
        assert!(Cli::try_parse_from(["nirmal", "train", "--dataset", "imagenet"]).is_err());
    }
}
