mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fragvqa_core::chunking::Sampling;
use fragvqa_core::config::PipelineConfig;
use fragvqa_core::features::BackendKind;
use fragvqa_core::Error;

#[derive(Parser, Debug)]
#[command(name = "fragvqa", version, about = "No-reference video quality from fragment residuals")]
struct Cli {
    #[command(flatten)]
    opts: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalOpts {
    /// TOML pipeline configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub patch_size: Option<usize>,
    /// Fragment canvas side; also the backbone input size.
    #[arg(long, global = true)]
    pub target_size: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub backend: Option<BackendArg>,
    #[arg(long, global = true, env = "FRAGVQA_MODELS_DIR")]
    pub models_dir: Option<PathBuf>,
    /// Videos (or repeats) processed in parallel.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub repeats: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub sampling: Option<SamplingArg>,
    /// Suppress progress messages.
    #[arg(long, short, global = true)]
    pub quiet: bool,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
pub enum BackendArg {
    Toy,
    Neural,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
pub enum SamplingArg {
    All,
    EveryOther,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Dump the resized/residual/fragment triplets of one video.
    Fragment(commands::FragmentArgs),
    /// Extract per-video features into a DVQF file.
    Extract(commands::ExtractArgs),
    /// Train the quality regressor.
    Train(commands::TrainArgs),
    /// Score videos or stored features with a trained model.
    Predict(commands::PredictArgs),
    /// Median SRCC/PLCC/KRCC/RMSE over repeated random splits.
    Eval(commands::EvalArgs),
    /// Time each pipeline stage.
    Bench(commands::BenchArgs),
}

impl GlobalOpts {
    /// Config file (or defaults) with command-line overrides applied.
    pub fn pipeline_config(&self) -> Result<PipelineConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };
        if let Some(p) = self.patch_size {
            cfg.frag.patch_size = p;
        }
        if let Some(s) = self.target_size {
            cfg.frag.target_size = s;
            cfg.backend.input_size = s;
        }
        if let Some(b) = self.backend {
            cfg.backend.kind = match b {
                BackendArg::Toy => BackendKind::Toy,
                BackendArg::Neural => BackendKind::Neural,
            };
        }
        if let Some(dir) = &self.models_dir {
            cfg.backend.model_dir = Some(dir.clone());
        }
        if let Some(seed) = self.seed {
            cfg.train.seed = seed;
        }
        if let Some(r) = self.repeats {
            cfg.eval.repeats = r;
        }
        if let Some(s) = self.sampling {
            cfg.chunk.sampling = match s {
                SamplingArg::All => Sampling::AllFrames,
                SamplingArg::EveryOther => Sampling::EveryOtherFrame,
            };
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn progress(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(jobs) = cli.opts.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(1);
        }
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    let result = match &cli.command {
        Command::Fragment(a) => commands::fragment(&cli.opts, a),
        Command::Extract(a) => commands::extract(&cli.opts, a),
        Command::Train(a) => commands::train(&cli.opts, a),
        Command::Predict(a) => commands::predict(&cli.opts, a),
        Command::Eval(a) => commands::eval(&cli.opts, a),
        Command::Bench(a) => commands::bench(&cli.opts, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.kind().exit_code() as u8)
        }
    }
}
