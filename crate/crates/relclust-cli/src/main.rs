use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use relclust::{hca, mlr, rkm, DissimilarityMatrix, Partition};
use relclust_cli::bench::{self, BenchParams};
use relclust_cli::io::{self, MatrixFormat};
use relclust_cli::synth;

#[derive(Parser)]
#[command(name = "relclust", version, about = "Quantization-error clustering for dissimilarity matrices")]
struct Cli {
    /// Verify incremental sums and merge commits from scratch while running.
    #[arg(long, global = true)]
    checked: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    #[value(name = "square_csv")]
    SquareCsv,
    #[value(name = "lower_triangle_csv")]
    LowerTriangleCsv,
}

impl From<Format> for MatrixFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::SquareCsv => MatrixFormat::SquareCsv,
            Format::LowerTriangleCsv => MatrixFormat::LowerTriangleCsv,
        }
    }
}

#[derive(Args)]
struct InputArgs {
    /// Path of the dissimilarity matrix file.
    #[arg(long)]
    input: PathBuf,

    /// Layout of the matrix file.
    #[arg(long, value_enum, default_value = "square_csv")]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a dissimilarity matrix file.
    Validate {
        #[command(flatten)]
        input: InputArgs,
    },

    /// Generate a synthetic squared-Euclidean instance.
    Gen {
        /// Number of objects.
        #[arg(long)]
        n: usize,
        /// Dimensionality of the generating space.
        #[arg(long, default_value_t = 3)]
        dims: usize,
        /// Number of generating clusters.
        #[arg(long)]
        clusters: usize,
        /// Gaussian noise scale around each center.
        #[arg(long, default_value_t = 1.0)]
        spread: f64,
        /// Guaranteed minimum distance between centers.
        #[arg(long, default_value_t = 4.0)]
        separation: f64,
        /// RNG seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Where to write the matrix (square CSV).
        #[arg(long)]
        out: PathBuf,
        /// Optionally write the generating labels as a partition CSV.
        #[arg(long)]
        labels_out: Option<PathBuf>,
    },

    /// Hierarchical clustering; optionally cut at k clusters.
    Hca {
        #[command(flatten)]
        input: InputArgs,
        /// Cut the dendrogram at this many clusters.
        #[arg(long)]
        k: Option<usize>,
        /// Where to write the dendrogram CSV.
        #[arg(long)]
        dendrogram_out: Option<PathBuf>,
        /// Where to write the cut partition CSV (requires --k).
        #[arg(long)]
        partition_out: Option<PathBuf>,
        /// Use the cubic reference algorithm instead of the fast one.
        #[arg(long)]
        naive: bool,
    },

    /// Hierarchical clustering followed by multi-level refinement.
    Refine {
        #[command(flatten)]
        input: InputArgs,
        /// Number of clusters to refine towards.
        #[arg(long)]
        k: usize,
        /// Reduction factor of the level schedule.
        #[arg(long, default_value_t = mlr::DEFAULT_ALPHA)]
        alpha: f64,
        /// Where to write the refined partition CSV.
        #[arg(long)]
        partition_out: Option<PathBuf>,
    },

    /// Relational k-means with seeded restarts.
    Rkm {
        #[command(flatten)]
        input: InputArgs,
        /// Number of clusters.
        #[arg(long)]
        k: usize,
        /// Number of random restarts.
        #[arg(long, default_value_t = 20)]
        restarts: usize,
        /// Master seed; restart r uses seed + r.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Where to write the best partition CSV.
        #[arg(long)]
        partition_out: Option<PathBuf>,
    },

    /// Error-vs-k comparison of the cut, the refinement and k-means.
    Bench {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        k_min: usize,
        #[arg(long)]
        k_max: usize,
        /// Reduction factor of the refinement schedule.
        #[arg(long, default_value_t = mlr::DEFAULT_ALPHA)]
        alpha: f64,
        /// k-means restarts per k.
        #[arg(long, default_value_t = 20)]
        restarts: usize,
        /// Master seed for the k-means restarts.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Where to write the benchmark CSV.
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn load(input: &InputArgs) -> anyhow::Result<DissimilarityMatrix> {
    Ok(io::load_matrix(&input.input, input.format.into())?)
}

fn run_hierarchy(d: &DissimilarityMatrix, naive: bool, checked: bool) -> relclust::Result<(relclust::Dendrogram, hca::SearchStats)> {
    if naive {
        hca::naive_counting(d)
    } else if checked {
        hca::fast_checked(d)
    } else {
        hca::fast(d)
    }
}

fn verify_if_checked(d: &DissimilarityMatrix, p: &Partition, checked: bool) -> relclust::Result<()> {
    if checked {
        p.verify_sums(d, 1e-9)?;
    }
    Ok(())
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    let checked = cli.checked;
    match cli.command {
        Command::Validate { input } => {
            let d = load(&input)?;
            println!("ok: {} objects", d.n_objects());
        }

        Command::Gen { n, dims, clusters, spread, separation, seed, out, labels_out } => {
            let (d, labels) = synth::gen_synthetic(n, dims, clusters, spread, separation, seed)?;
            io::save_matrix(&out, &d)?;
            if let Some(path) = labels_out {
                io::save_partition(&path, &labels)?;
            }
            println!("wrote {} x {} matrix to {}", n, n, out.display());
        }

        Command::Hca { input, k, dendrogram_out, partition_out, naive } => {
            let d = load(&input)?;
            let (dend, stats) = run_hierarchy(&d, naive, checked)?;
            println!(
                "merges: {}, linkage evaluations: {}, queue reinserts: {}",
                dend.steps().len(),
                stats.linkage_evaluations,
                stats.queue_reinserts
            );
            if let Some(path) = dendrogram_out {
                io::save_dendrogram(&path, &dend)?;
            }
            if let Some(k) = k {
                let cut = dend.cut(k)?;
                verify_if_checked(&d, &cut, checked)?;
                println!("E(cut at {k}) = {}", cut.quantization_error());
                if let Some(path) = partition_out {
                    io::save_partition(&path, cut.assignment())?;
                }
            } else if partition_out.is_some() {
                anyhow::bail!("--partition-out requires --k");
            }
        }

        Command::Refine { input, k, alpha, partition_out } => {
            let d = load(&input)?;
            let (dend, _) = run_hierarchy(&d, false, checked)?;
            let cut_error = dend.cut(k)?.quantization_error();
            let refined = if checked {
                mlr::refine_checked(&d, &dend, k, alpha, mlr::DEFAULT_EPSILON)?
            } else {
                mlr::refine(&d, &dend, k, alpha, mlr::DEFAULT_EPSILON)?
            };
            println!("E(cut at {k}) = {cut_error}");
            let sizes = mlr::select_levels(d.n_objects(), alpha, k)?;
            for (size, e) in sizes.level_sizes().iter().rev().zip(&refined.level_errors) {
                println!("E after level of {size} units = {e}");
            }
            println!(
                "E(refined) = {} after {} moves",
                refined.partition.quantization_error(),
                refined.moves
            );
            if let Some(path) = partition_out {
                io::save_partition(&path, refined.partition.assignment())?;
            }
        }

        Command::Rkm { input, k, restarts, seed, partition_out } => {
            let d = load(&input)?;
            #[cfg(feature = "parallel")]
            let summary = rkm::par_best_of(&d, k, restarts, seed)?;
            #[cfg(not(feature = "parallel"))]
            let summary = rkm::best_of(&d, k, restarts, seed)?;
            verify_if_checked(&d, &summary.best.partition, checked)?;
            println!(
                "best E = {} ({} changing passes, converged = {})",
                summary.best.partition.quantization_error(),
                summary.best.iterations,
                summary.best.converged
            );
            println!("worst E = {}", summary.worst.partition.quantization_error());
            if let Some(path) = partition_out {
                io::save_partition(&path, summary.best.partition.assignment())?;
            }
        }

        Command::Bench { input, k_min, k_max, alpha, restarts, seed, out } => {
            let d = load(&input)?;
            let params = BenchParams { k_min, k_max, alpha, restarts, master_seed: seed, checked };
            #[cfg(feature = "parallel")]
            let records = bench::par_run(&d, &params)?;
            #[cfg(not(feature = "parallel"))]
            let records = bench::run(&d, &params)?;
            for r in &records {
                println!(
                    "k={}: e_hca={} e_mlr={} e_rkm_best={} e_rkm_worst={}",
                    r.k, r.e_hca, r.e_mlr, r.e_rkm_best, r.e_rkm_worst
                );
            }
            io::save_bench(&out, &records)?;
            println!("wrote {} records to {}", records.len(), out.display());
        }
    }
    Ok(())
}
