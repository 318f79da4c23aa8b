mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{Settings, UsageError};

#[derive(Parser)]
#[command(name = "netlens", version, about = "Multi-size random-walk lens node classification")]
struct Cli {
    /// key=value file supplying defaults for any long option.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert an edge list into the dense graph store plus an id map.
    Ingest(IngestArgs),
    /// Extract disjoint walk subgraphs from one network into a PBM corpus.
    Corpus(CorpusArgs),
    /// Train one centroid model per lens size from a PBM corpus.
    Train(TrainArgs),
    /// Splice labeled parts into a heterogeneous network with a truth file.
    Splice(SpliceArgs),
    /// Label every node through lenses of each size and dump the tally.
    Lens(LensArgs),
    /// Learn lens weights (lp) or normalize given accuracies (naive).
    Weights(WeightsArgs),
    /// Score held-out nodes: accuracy curve, reward matrix, diversity, predictions.
    Evaluate(EvaluateArgs),
    /// Run the pipeline on a pure network of each class.
    Homogeneity(HomogeneityArgs),
    /// End-to-end star/wheel/ladder experiment.
    Demo(DemoArgs),
}

#[derive(Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub input: Option<String>,
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Args)]
pub struct CorpusArgs {
    /// Source network (graph store or plain edge list).
    #[arg(long, conflicts_with = "family")]
    pub graph: Option<String>,
    /// Build the source network by splicing generated members of a family instead.
    #[arg(long)]
    pub family: Option<String>,
    /// Family members per size in a generated source network.
    #[arg(long)]
    pub parts: Option<String>,
    #[arg(long)]
    pub splice_edges: Option<String>,
    /// Class name of the extracted subgraphs (defaults to the family name).
    #[arg(long)]
    pub class: Option<String>,
    #[arg(long)]
    pub sizes: Option<String>,
    /// Subgraphs per size.
    #[arg(long)]
    pub count: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub corpus: Option<String>,
    /// Class order of the models (defaults to the sorted corpus class directories).
    #[arg(long)]
    pub classes: Option<String>,
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Args)]
pub struct SpliceArgs {
    /// Families to generate parts from.
    #[arg(long)]
    pub classes: Option<String>,
    /// Use every PBM of a corpus as a part instead of generated families.
    #[arg(long)]
    pub corpus: Option<String>,
    #[arg(long)]
    pub sizes: Option<String>,
    /// Parts per class per size (generated families only).
    #[arg(long)]
    pub parts: Option<String>,
    #[arg(long)]
    pub splice_edges: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Args)]
pub struct LensArgs {
    #[arg(long)]
    pub graph: Option<String>,
    /// Directory of model_<size>.nlm files.
    #[arg(long, conflicts_with = "random")]
    pub models: Option<String>,
    /// Label walks uniformly at random over these classes instead.
    #[arg(long)]
    pub random: Option<String>,
    #[arg(long)]
    pub sizes: Option<String>,
    #[arg(long)]
    pub walks_per_node: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub workers: Option<String>,
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Args)]
pub struct WeightsArgs {
    /// lp or naive.
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub tally: Option<String>,
    #[arg(long)]
    pub truth: Option<String>,
    /// Per-row accuracies for naive weights, comma separated.
    #[arg(long)]
    pub accuracies: Option<String>,
    /// Lens sizes naming the rows of --accuracies.
    #[arg(long)]
    pub sizes: Option<String>,
    #[arg(long)]
    pub train_fraction: Option<String>,
    #[arg(long)]
    pub max_training_nodes: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub tally: Option<String>,
    #[arg(long)]
    pub truth: Option<String>,
    #[arg(long)]
    pub weights: Option<String>,
    /// Network for the diversity report.
    #[arg(long)]
    pub graph: Option<String>,
    #[arg(long)]
    pub train_fraction: Option<String>,
    #[arg(long)]
    pub tau_step: Option<String>,
    /// τ for reward.csv and predictions.csv (defaults to the curve peak).
    #[arg(long)]
    pub tau: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Args)]
pub struct HomogeneityArgs {
    #[arg(long)]
    pub models: Option<String>,
    /// Families to build pure networks from; each must be a model class.
    #[arg(long)]
    pub classes: Option<String>,
    #[arg(long)]
    pub sizes: Option<String>,
    #[arg(long)]
    pub parts: Option<String>,
    #[arg(long)]
    pub splice_edges: Option<String>,
    #[arg(long)]
    pub train_fraction: Option<String>,
    #[arg(long)]
    pub tau_step: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub workers: Option<String>,
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Args)]
pub struct DemoArgs {
    #[arg(long)]
    pub classes: Option<String>,
    #[arg(long)]
    pub sizes: Option<String>,
    #[arg(long)]
    pub parts: Option<String>,
    #[arg(long)]
    pub splice_edges: Option<String>,
    #[arg(long)]
    pub training_walks: Option<String>,
    #[arg(long)]
    pub train_fraction: Option<String>,
    #[arg(long)]
    pub tau_step: Option<String>,
    #[arg(long)]
    pub max_training_nodes: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub workers: Option<String>,
    #[arg(long)]
    pub out: Option<String>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let result = Settings::load(cli.config.as_deref()).and_then(|s| match &cli.command {
        Command::Ingest(a) => commands::ingest(&s, a),
        Command::Corpus(a) => commands::corpus(&s, a),
        Command::Train(a) => commands::train(&s, a),
        Command::Splice(a) => commands::splice(&s, a),
        Command::Lens(a) => commands::lens(&s, a),
        Command::Weights(a) => commands::weights(&s, a),
        Command::Evaluate(a) => commands::evaluate(&s, a),
        Command::Homogeneity(a) => commands::homogeneity(&s, a),
        Command::Demo(a) => commands::demo(&s, a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.downcast_ref::<UsageError>().is_some() => {
            eprintln!("error: {e}\n\nFor more information, try '--help'.");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
