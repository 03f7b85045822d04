//! `pipeline`: validate → align-global → align-local → build-ssm →
//! gen-cleansing → film-params on one song, driven by a TOML file.
//!
//! Relative input paths are resolved against the config file's directory.
//! Every artifact except `pipeline_report.json` (which holds timings) is a
//! pure function of the config and seed.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use lyraline::annotations;
use lyraline::cleansing::{CleansingConfig, Split};
use lyraline::conditioning::EncoderLayout;
use lyraline::dsp::{cqt, log_mel, normalize_loglike, stft_magnitude, AudioBuffer, CqtConfig};
use lyraline::global_align::GlobalAlignParams;
use lyraline::local_align::{SegmentAlignment, StateMode, ViterbiConfig};
use lyraline::ssm::SsmSource;
use lyraline::{DenseMatrix, Error, Granularity};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::args::PipelineArgs;
use crate::commands::{self, DEFAULT_HOP};
use crate::io;
use crate::report::Report;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Seed of every randomized step; required.
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    pub inputs: Inputs,
    #[serde(default)]
    pub global: GlobalSection,
    #[serde(default)]
    pub local: LocalSection,
    #[serde(default)]
    pub ssm: SsmSection,
    #[serde(default)]
    pub cleansing: CleansingSection,
    #[serde(default)]
    pub film: EncoderLayout,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Inputs {
    pub annotations: PathBuf,
    /// Singing-voice probabilities, one file per candidate track.
    pub phat: Vec<PathBuf>,
    pub vocals: PathBuf,
    pub mix: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GlobalSection {
    pub fr: Option<f64>,
    pub annotation_offset: Option<f64>,
    pub alpha: f64,
    pub tcorr: f64,
    pub grid_steps: usize,
    pub refine_steps: usize,
    pub hop: f64,
    pub paragraph_local: bool,
}

impl Default for GlobalSection {
    fn default() -> Self {
        let p = GlobalAlignParams::new(1.0);
        GlobalSection {
            fr: None,
            annotation_offset: None,
            alpha: p.alpha_fraction,
            tcorr: p.t_corr,
            grid_steps: p.fr_grid_steps,
            refine_steps: p.refine_steps,
            hop: DEFAULT_HOP,
            paragraph_local: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LocalSection {
    pub level: Granularity,
    pub mode: StateMode,
    pub octave_fold: bool,
    pub tolerance: usize,
    pub octave_neighbors: bool,
    pub prior_weight: f64,
    pub duration_prior: f64,
    pub backtrack_margin: f64,
}

impl Default for LocalSection {
    fn default() -> Self {
        let v = ViterbiConfig::default();
        LocalSection {
            level: Granularity::Lines,
            mode: StateMode::Pitch,
            octave_fold: false,
            tolerance: v.tolerance,
            octave_neighbors: v.octave_neighbors,
            prior_weight: v.prior_weight,
            duration_prior: v.duration_prior,
            backtrack_margin: v.backtrack_margin,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SsmSection {
    pub context: usize,
    pub text: bool,
    pub n_mels: usize,
    pub stft_window: usize,
}

impl Default for SsmSection {
    fn default() -> Self {
        SsmSection { context: 2, text: true, n_mels: 40, stft_window: 2048 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CleansingSection {
    pub split: Split,
    pub k_window: usize,
    pub max_positives: Option<usize>,
    pub negatives_per_positive: f64,
    pub track_id: u64,
}

impl Default for CleansingSection {
    fn default() -> Self {
        let c = CleansingConfig::default();
        CleansingSection {
            split: c.split,
            k_window: c.k_window,
            max_positives: Some(200),
            negatives_per_positive: c.negatives_per_positive,
            track_id: 0,
        }
    }
}

impl PipelineConfig {
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::schema(format!("{}: {e}", origin.display())).into())
    }

    /// Makes every path absolute relative to `base`.
    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.out_dir);
        fix(&mut self.inputs.annotations);
        fix(&mut self.inputs.vocals);
        fix(&mut self.inputs.mix);
        self.inputs.phat.iter_mut().for_each(fix);
    }
}

fn load_audio(path: &Path, rate: u32) -> Result<AudioBuffer> {
    let audio = AudioBuffer::read_wav(path).with_context(|| format!("reading audio {}", path.display()))?;
    if audio.sample_rate == rate {
        return Ok(audio);
    }
    log::info!("resampling {} from {} Hz to {rate} Hz", path.display(), audio.sample_rate);
    Ok(audio.resample(rate, 32, 8.0)?)
}

/// Folds CQT bins onto pitch classes.
fn chroma(cqt: &DenseMatrix, bins_per_octave: usize) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(cqt.rows(), bins_per_octave);
    for t in 0..cqt.rows() {
        for (b, v) in cqt.row(t).iter().enumerate() {
            let c = out.get(t, b % bins_per_octave);
            out.set(t, b % bins_per_octave, c + v);
        }
    }
    out
}

/// Pads or trims rows so a feature matrix lines up with the CQT frames.
fn fit_rows(m: &DenseMatrix, rows: usize) -> DenseMatrix {
    DenseMatrix::from_fn(rows, m.cols(), |i, j| if i < m.rows() { m.get(i, j) } else { 0.0 })
}

fn write_json(path: &Path, v: &impl Serialize) -> Result<()> {
    io::save_bytes(path, (serde_json::to_string_pretty(v)? + "\n").as_bytes())
}

pub fn run(args: &PipelineArgs, report_path: Option<&Path>) -> Result<u8> {
    let text = std::fs::read_to_string(&args.config).with_context(|| format!("reading config {}", args.config.display()))?;
    let mut cfg = PipelineConfig::parse(&text, &args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(dir) = &args.out_dir {
        cfg.out_dir = dir.clone();
    }
    let base = args.config.parent().map(Path::to_path_buf).unwrap_or_default();
    cfg.resolve(&std::path::absolute(&base).unwrap_or(base));
    if cfg.inputs.phat.is_empty() {
        bail!(Error::schema(format!("{}: inputs.phat is empty", args.config.display())));
    }
    let out = cfg.out_dir.clone();
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let resolved = toml::to_string_pretty(&cfg).context("serializing resolved config")?;
    io::save_bytes(&out.join("resolved.toml"), resolved.as_bytes())?;

    let mut report = Report::new("pipeline", serde_json::to_value(&cfg)?);
    let ladder = CqtConfig::default();
    let hop = ladder.frame_time();

    let song = report.time("validate", || {
        let song = io::annotations(&cfg.inputs.annotations)?;
        let violations = annotations::validate(&song);
        write_json(&out.join("validate.json"), &json!({ "violations": violations }))?;
        if let Some(v) = violations.first() {
            bail!(Error::schema(format!("{}: {} violations, first {v}", cfg.inputs.annotations.display(), violations.len())));
        }
        Ok(song)
    })?;

    let g = &cfg.global;
    let aligned = report.time("align_global", || {
        let (fr, offset) = commands::global_inputs(&song, g.fr, g.annotation_offset, &cfg.inputs.annotations)?;
        let params = GlobalAlignParams {
            fr_nominal: fr,
            alpha_fraction: g.alpha,
            fr_grid_steps: g.grid_steps,
            t_corr: g.tcorr,
            refine_steps: g.refine_steps,
        };
        let phats = cfg.inputs.phat.iter().map(|p| io::series(p, g.hop)).collect::<Result<Vec<_>>>()?;
        let (aligned, outcome) = commands::global_step(&song, offset, &phats, &params, g.paragraph_local)?;
        write_json(&out.join("global.json"), &outcome)?;
        let Some(aligned) = aligned else {
            bail!(Error::Degenerate(format!("best NCC score {:.3} is below t_corr {}", outcome.score, g.tcorr)));
        };
        io::write_annotations(&out.join("aligned_global.json"), &aligned)?;
        Ok(aligned)
    })?;

    let (vox_cqt, mix_cqt) = report.time("cqt", || {
        let vox = cqt(&load_audio(&cfg.inputs.vocals, ladder.sample_rate)?, &ladder).context("vocal CQT")?;
        let mix = cqt(&load_audio(&cfg.inputs.mix, ladder.sample_rate)?, &ladder).context("mixture CQT")?;
        let t = vox.rows().min(mix.rows());
        Ok((vox.slice_rows(0..t), mix.slice_rows(0..t)))
    })?;
    let salience = normalize_loglike(&vox_cqt);

    let l = &cfg.local;
    let local = report.time("align_local", || {
        let params = SegmentAlignment {
            level: l.level,
            mode: l.mode,
            octave_fold: l.octave_fold,
            viterbi: ViterbiConfig {
                tolerance: l.tolerance,
                octave_neighbors: l.octave_neighbors,
                prior_weight: l.prior_weight,
                duration_prior: l.duration_prior,
                backtrack_margin: l.backtrack_margin,
                ..ViterbiConfig::default()
            },
        };
        if params.mode != StateMode::Pitch {
            bail!(Error::param("the pipeline decodes against pitch salience only; use local.mode = \"pitch\""));
        }
        let obs = commands::pitch_observations(salience.clone(), hop, false)?;
        let (local, outcomes) = commands::local_step(&aligned, Some(&obs), None, &params)?;
        io::write_annotations(&out.join("aligned_local.json"), &local)?;
        write_json(&out.join("local_diag.json"), &outcomes)?;
        Ok(local)
    })?;

    report.time("build_ssm", || {
        let s = &cfg.ssm;
        let vocals = load_audio(&cfg.inputs.vocals, ladder.sample_rate)?;
        let spec = stft_magnitude(&vocals, s.stft_window, ladder.hop)?;
        let mel = fit_rows(&log_mel(&spec, s.n_mels, ladder.sample_rate as f64)?, vox_cqt.rows());
        let features = vec![(mel, SsmSource::Other), (chroma(&vox_cqt, ladder.bins_per_octave), SsmSource::Chroma)];
        let (stacked, packed, outcome) = commands::ssm_step(&local, Granularity::Lines, &features, hop, s.text, Some(s.context))?;
        io::save_tensor(&out.join("ssm.mmx3"), &stacked)?;
        if let Some(p) = &packed {
            io::save_tensor(&out.join("patches.mmx3"), p)?;
        }
        write_json(&out.join("ssm.json"), &outcome)
    })?;

    report.time("gen_cleansing", || {
        let c = &cfg.cleansing;
        let ccfg = CleansingConfig {
            split: c.split,
            k_window: c.k_window,
            max_positives: c.max_positives,
            negatives_per_positive: c.negatives_per_positive,
            seed: cfg.seed,
            ..CleansingConfig::default()
        };
        let (bytes, ds) = commands::cleansing_step(&local, mix_cqt.clone(), vox_cqt.clone(), Some(salience.clone()), hop, c.track_id, &ccfg)?;
        io::save_bytes(&out.join("dataset.bin"), &bytes)?;
        write_json(
            &out.join("dataset.json"),
            &json!({ "positives": ds.positives, "negatives": ds.negatives, "examples": ds.examples.len(), "diagnostics": ds.diagnostics }),
        )
    })?;

    report.time("film_params", || write_json(&out.join("film_params.json"), &commands::film_table(&cfg.film)?))?;

    report.set_result(json!({ "out_dir": out }))?;
    report.emit(Some(&out.join("pipeline_report.json")))?;
    if report_path.is_some() {
        report.emit(report_path)?;
    }
    Ok(0)
}
