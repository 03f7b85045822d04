use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "lyraline", version, about = "Alignment and dataset tooling for karaoke annotations")]
pub struct Cli {
    /// Worker threads for parallel steps.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Write the JSON report here instead of standard output.
    #[arg(long, global = true)]
    pub report: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check an annotation file's structural invariants.
    Validate { annotations: PathBuf },
    /// Rasterize annotations to a frame matrix.
    Rasterize(RasterizeArgs),
    /// Find offset and frame rate against singing-voice probabilities.
    AlignGlobal(AlignGlobalArgs),
    /// Re-time notes with blank-state Viterbi decoding.
    AlignLocal(AlignLocalArgs),
    /// Find the semitone transposition that best matches a salience matrix.
    FreqCorrelate(FreqCorrelateArgs),
    /// Build stacked self-similarity matrices and context patches.
    BuildSsm(BuildSsmArgs),
    /// Generate a label-cleansing dataset.
    GenCleansing(GenCleansingArgs),
    /// Filter, weight or summarize frames by error probability.
    EpfApply(EpfApplyArgs),
    /// Count the parameters a FiLM variant adds.
    FilmParams(FilmParamsArgs),
    /// Apply FiLM conditioning to a feature map.
    FilmApply(FilmApplyArgs),
    /// Evaluate a prediction against a target.
    Eval(EvalArgs),
    /// Rank alignment systems by deviation from ground truth.
    EvalRank(EvalRankArgs),
    /// Pick the vocal tracks among several probability streams.
    DetectVocals(DetectVocalsArgs),
    /// Run the demo pipeline described by a TOML file.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum RasterKind {
    Vas,
    Notes,
    Phonemes,
}

#[derive(Debug, Args)]
pub struct RasterizeArgs {
    #[arg(long)]
    pub annotations: PathBuf,
    #[arg(long, value_enum, default_value = "vas")]
    pub kind: RasterKind,
    /// Frame spacing in seconds (default 0.014 for vas and phonemes, the CQT hop for notes).
    #[arg(long)]
    pub hop: Option<f64>,
    /// Duration to cover; defaults to the last annotation end plus one second.
    #[arg(long)]
    pub duration: Option<f64>,
    /// Softmax each phoneme frame.
    #[arg(long)]
    pub softmax: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AlignGlobalArgs {
    #[arg(long)]
    pub annotations: PathBuf,
    /// One or more probability streams (comma separated); several are treated as candidates.
    #[arg(long, value_delimiter = ',', required = true)]
    pub phat: Vec<PathBuf>,
    /// Nominal frame rate; defaults to the annotation file's `fr`.
    #[arg(long)]
    pub fr: Option<f64>,
    /// Offset baked into the annotation times; defaults to the file's `offset` or 0.
    #[arg(long)]
    pub annotation_offset: Option<f64>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.8)]
    pub tcorr: f64,
    #[arg(long, default_value_t = 101)]
    pub grid_steps: usize,
    #[arg(long, default_value_t = 21)]
    pub refine_steps: usize,
    #[arg(long, default_value_t = 0.014)]
    pub hop: f64,
    /// Follow up with per-paragraph offset corrections.
    #[arg(long)]
    pub paragraph_local: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AlignLocalArgs {
    #[arg(long)]
    pub annotations: PathBuf,
    /// Pitch salience `T x J` in [0, 1] (or probabilities with --obs-probabilities).
    #[arg(long)]
    pub obs: Option<PathBuf>,
    /// Letter probabilities `T x 27` (26 letters and silence).
    #[arg(long)]
    pub text_obs: Option<PathBuf>,
    /// The --obs file already holds row-stochastic probabilities with a silence column.
    #[arg(long)]
    pub obs_probabilities: bool,
    #[arg(long)]
    pub hop: Option<f64>,
    #[arg(long, default_value = "line")]
    pub level: String,
    #[arg(long, default_value = "pitch")]
    pub mode: String,
    #[arg(long, default_value_t = 1)]
    pub tolerance: usize,
    #[arg(long)]
    pub octave_neighbors: bool,
    #[arg(long)]
    pub octave_fold: bool,
    #[arg(long, default_value_t = 0.0)]
    pub prior_weight: f64,
    #[arg(long, default_value_t = 0.0)]
    pub duration_prior: f64,
    #[arg(long, default_value_t = 0.0)]
    pub backtrack_margin: f64,
    #[arg(long, default_value_t = 1.0)]
    pub text_weight: f64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub diag: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FreqCorrelateArgs {
    #[arg(long)]
    pub annotations: PathBuf,
    #[arg(long)]
    pub salience: PathBuf,
    #[arg(long)]
    pub hop: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    pub voicing_threshold: f64,
    /// Write the annotations transposed by the best shift.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BuildSsmArgs {
    #[arg(long)]
    pub annotations: PathBuf,
    /// Feature matrices `T x d` (comma separated), one audio SSM channel each.
    #[arg(long, value_delimiter = ',')]
    pub features: Vec<PathBuf>,
    /// Source tag per feature file (mfcc, chroma, other).
    #[arg(long, value_delimiter = ',')]
    pub sources: Vec<String>,
    #[arg(long, default_value = "lines")]
    pub segments_from: String,
    /// Frame spacing of the feature matrices.
    #[arg(long)]
    pub hop: Option<f64>,
    /// Leave out the lyrics-text channel.
    #[arg(long)]
    pub no_text: bool,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub patches: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    pub context: usize,
}

#[derive(Debug, Args)]
pub struct GenCleansingArgs {
    #[arg(long)]
    pub cqt_mix: PathBuf,
    #[arg(long)]
    pub cqt_vox: PathBuf,
    #[arg(long)]
    pub notes: PathBuf,
    /// F0 salience `T x J`; defaults to the normalized vocal CQT.
    #[arg(long)]
    pub salience: Option<PathBuf>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 0)]
    pub track_id: u64,
    #[arg(long, default_value = "train")]
    pub split: String,
    #[arg(long, default_value_t = 20)]
    pub k_window: usize,
    #[arg(long)]
    pub max_positives: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    pub ratio: f64,
    #[arg(long)]
    pub hop: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum EpfMode {
    Filter,
    Weight,
    Rate,
}

#[derive(Debug, Args)]
pub struct EpfApplyArgs {
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long, value_enum)]
    pub mode: EpfMode,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FilmParamsArgs {
    /// W_si, W_co, S_fv, S_cs, S_fs or S_rs; a trailing `*` selects bottleneck placement.
    #[arg(long)]
    pub variant: String,
    #[arg(long)]
    pub placement: Option<String>,
    #[arg(long, value_delimiter = ',', default_value = "16,32,64,128,256,512")]
    pub channels: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "256,128,64,32,16,8")]
    pub freqs: Vec<usize>,
    #[arg(long, default_value_t = 40)]
    pub phonemes: usize,
}

#[derive(Debug, Args)]
pub struct FilmApplyArgs {
    #[arg(long)]
    pub x: PathBuf,
    /// `[2, rows, P]` tensor, gamma then beta (`[2, 1, C]` or `[2, 1, 1]` for weak variants).
    #[arg(long)]
    pub basis: PathBuf,
    /// Activations `T x P` for strong variants.
    #[arg(long)]
    pub z: Option<PathBuf>,
    #[arg(long)]
    pub variant: String,
    /// Max-pool the activations to the feature map's time axis first.
    #[arg(long)]
    pub map_time: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Metric {
    #[value(name = "pes_eps")]
    PesEps,
    Accuracy,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub target: PathBuf,
    #[arg(long, value_enum, default_value = "pes_eps")]
    pub metric: Metric,
    #[arg(long, default_value_t = 1e-9)]
    pub epsilon: f64,
    #[arg(long, default_value_t = -25.0, allow_hyphen_values = true)]
    pub silent_db: f64,
    /// Binarization threshold for accuracy; chosen on the grid when omitted.
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EvalRankArgs {
    #[arg(long)]
    pub systems: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
}

#[derive(Debug, Args)]
pub struct DetectVocalsArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    pub phat: Vec<PathBuf>,
    #[arg(long, default_value_t = 0.02)]
    pub tolerance: f64,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the config's output directory.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}
