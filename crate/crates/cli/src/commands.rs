use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use lyraline::annotations::{self, boundary_labels, note_matrix, phoneme_matrix, rasterize_vas, softmax_phoneme_prep, transpose_frequency};
use lyraline::cleansing::{self, assemble_dataset, encode_record, CleansingConfig, Split, TrackDataset, TrackInput};
use lyraline::conditioning::{count_parameters, film_strong, film_weak, map_activation_time, parse_variant, EncoderLayout, FilmBasis, Placement, Variant};
use lyraline::dsp::{normalize_loglike, CqtConfig};
use lyraline::global_align::{self, align_global, apply_global, apply_paragraph_corrections, GlobalAlignParams, PARAGRAPH_WINDOW_S};
use lyraline::local_align::{align_by_segments, build_observation, ObservationMatrix, Observations, SegmentAlignment, SegmentOutcome, ViterbiConfig};
use lyraline::metrics::{self, EnergyMetricConfig};
use lyraline::ssm::{audio_ssm, extract_patches, pack_patches, segment_features, stack_ssms, text_ssm, SsmSource};
use lyraline::{DenseMatrix, Error, FrameSeries, Granularity, SongAnnotations, Tensor3, TimeGrid};
use serde::Serialize;
use serde_json::json;

use crate::args::*;
use crate::io;
use crate::report::Report;

/// Default frame spacing of probability streams and phoneme rasters, seconds.
pub const DEFAULT_HOP: f64 = 0.014;

pub fn run(cli: &Cli) -> Result<u8> {
    let out = cli.report.as_deref();
    match &cli.command {
        Command::Validate { annotations } => validate(annotations, out),
        Command::Rasterize(a) => rasterize(a, out),
        Command::AlignGlobal(a) => align_global_cmd(a, out),
        Command::AlignLocal(a) => align_local_cmd(a, out),
        Command::FreqCorrelate(a) => freq_correlate(a, out),
        Command::BuildSsm(a) => build_ssm_cmd(a, out),
        Command::GenCleansing(a) => gen_cleansing_cmd(a, out),
        Command::EpfApply(a) => epf_apply(a, out),
        Command::FilmParams(a) => film_params(a, out),
        Command::FilmApply(a) => film_apply(a, out),
        Command::Eval(a) => eval(a, out),
        Command::EvalRank(a) => eval_rank(a, out),
        Command::DetectVocals(a) => detect_vocals(a, out),
        Command::Pipeline(a) => crate::pipeline::run(a, out),
    }
}

fn parse<T: std::str::FromStr<Err = Error>>(flag: &str, s: &str) -> Result<T> {
    s.parse::<T>().with_context(|| format!("invalid --{flag}"))
}

pub fn parse_split(s: &str) -> Result<Split> {
    match s {
        "train" => Ok(Split::Train),
        "test" => Ok(Split::Test),
        other => Err(Error::param(format!("unknown split '{other}' (train or test)")).into()),
    }
}

fn validate(path: &Path, out: Option<&Path>) -> Result<u8> {
    let mut report = Report::new("validate", json!({ "annotations": path }));
    let song = report.time("read", || io::annotations(path))?;
    let violations = annotations::validate(&song);
    for v in &violations {
        log::warn!("{}: {v}", path.display());
    }
    report.set_result(json!({ "valid": violations.is_empty(), "violations": violations }))?;
    report.emit(out)?;
    Ok(if violations.is_empty() { 0 } else { 2 })
}

fn rasterize(a: &RasterizeArgs, out: Option<&Path>) -> Result<u8> {
    let song = io::annotations(&a.annotations)?;
    let ladder = CqtConfig::default();
    let hop = a.hop.unwrap_or(match a.kind {
        RasterKind::Notes => ladder.frame_time(),
        _ => DEFAULT_HOP,
    });
    let end = Granularity::ALL.iter().map(|&g| song.level(g).end_time()).fold(0.0, f64::max);
    let grid = TimeGrid::covering(hop, a.duration.unwrap_or(end + 1.0)).context("invalid --hop or --duration")?;
    let mut report = Report::new(
        "rasterize",
        json!({ "annotations": a.annotations, "kind": format!("{:?}", a.kind).to_lowercase(), "hop": hop, "frames": grid.n_frames, "softmax": a.softmax }),
    );
    let result = match a.kind {
        RasterKind::Vas => {
            let vas = rasterize_vas(&song.notes, &grid);
            io::save_matrix(&a.out, &io::series_to_matrix(&vas))?;
            json!({ "frames": vas.len(), "voiced_fraction": vas.mean() })
        }
        RasterKind::Notes => {
            let nm = note_matrix(&song.notes, &grid, &ladder.label_edges())?;
            io::save_matrix(&a.out, &nm.matrix)?;
            json!({ "shape": nm.matrix.shape(), "out_of_range": nm.out_of_range })
        }
        RasterKind::Phonemes => {
            let mut z = phoneme_matrix(&song.words, &grid)?;
            if a.softmax {
                z = softmax_phoneme_prep(&z);
            }
            io::save_matrix(&a.out, &z)?;
            json!({ "shape": z.shape() })
        }
    };
    report.set_result(result)?;
    report.emit(out)?;
    Ok(0)
}

/// Offset baked into annotation times and the nominal frame rate, from flags or metadata.
pub fn global_inputs(song: &SongAnnotations, fr: Option<f64>, offset: Option<f64>, path: &Path) -> Result<(f64, f64)> {
    let fr = match fr.or_else(|| song.metadata_f64("fr")) {
        Some(fr) => fr,
        None => bail!(Error::schema(format!("{}: no `fr` in the file info; pass --fr", path.display()))),
    };
    Ok((fr, offset.or_else(|| song.metadata_f64("offset")).unwrap_or(0.0)))
}

#[derive(Serialize)]
pub struct GlobalOutcome {
    pub candidate: Option<usize>,
    pub score: f64,
    pub offset: f64,
    pub fr: f64,
    pub accepted: bool,
    pub candidates: Vec<global_align::NccResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub paragraphs: Option<Vec<global_align::ParagraphCorrection>>,
}

/// Global alignment against one or more candidate streams; `None` when no candidate is accepted.
pub fn global_step(
    song: &SongAnnotations,
    annotation_offset: f64,
    phats: &[FrameSeries],
    params: &GlobalAlignParams,
    paragraph_local: bool,
) -> Result<(Option<SongAnnotations>, GlobalOutcome)> {
    let (index, results) = if phats.len() == 1 {
        let r = align_global(&song.notes, annotation_offset, &phats[0], params)?;
        (Some(0), vec![r])
    } else {
        let sel = global_align::select_candidate(&song.notes, annotation_offset, phats, params)?;
        // report the best one even when it is rejected
        let best = global_align::choose_candidate(&sel.results.iter().map(|r| r.score).collect::<Vec<_>>(), 0.0);
        (best, sel.results)
    };
    let best = index.map(|i| results[i]);
    let accepted = best.is_some_and(|b| b.accepted);
    let mut outcome = GlobalOutcome {
        candidate: index,
        score: best.map_or(0.0, |b| b.score),
        offset: best.map_or(0.0, |b| b.best_offset),
        fr: best.map_or(params.fr_nominal, |b| b.best_fr),
        accepted,
        candidates: results.clone(),
        paragraphs: None,
    };
    if !accepted {
        return Ok((None, outcome));
    }
    let (i, best) = (index.expect("accepted"), best.expect("accepted"));
    let mut aligned = apply_global(song, annotation_offset, params.fr_nominal, &best);
    if paragraph_local {
        let corrections = global_align::align_paragraph_local(&aligned, &phats[i], PARAGRAPH_WINDOW_S)?;
        aligned = apply_paragraph_corrections(&aligned, &corrections);
        outcome.paragraphs = Some(corrections);
    }
    Ok((Some(aligned), outcome))
}

fn align_global_cmd(a: &AlignGlobalArgs, out: Option<&Path>) -> Result<u8> {
    let song = io::annotations(&a.annotations)?;
    let (fr, offset) = global_inputs(&song, a.fr, a.annotation_offset, &a.annotations)?;
    let params = GlobalAlignParams {
        fr_nominal: fr,
        alpha_fraction: a.alpha,
        fr_grid_steps: a.grid_steps,
        t_corr: a.tcorr,
        refine_steps: a.refine_steps,
    };
    let mut report = Report::new(
        "align-global",
        json!({ "annotations": a.annotations, "phat": a.phat, "annotation_offset": offset, "hop": a.hop,
                "paragraph_local": a.paragraph_local, "search": params }),
    );
    let phats = a.phat.iter().map(|p| io::series(p, a.hop)).collect::<Result<Vec<_>>>()?;
    let (aligned, outcome) = report.time("align", || global_step(&song, offset, &phats, &params, a.paragraph_local))?;
    match (&aligned, &a.out) {
        (Some(s), Some(p)) => io::write_annotations(p, s)?,
        (None, _) => log::warn!("no candidate reached t_corr {}; nothing written", params.t_corr),
        _ => {}
    }
    report.set_result(&outcome)?;
    report.emit(out)?;
    Ok(0)
}

/// Pitch observations from a salience matrix or a ready probability matrix.
pub fn pitch_observations(m: DenseMatrix, hop: f64, probabilities: bool) -> Result<ObservationMatrix> {
    Ok(if probabilities { ObservationMatrix::new(m, hop, 0)? } else { build_observation(&m, hop)? })
}

pub fn local_step(
    song: &SongAnnotations,
    pitch: Option<&ObservationMatrix>,
    text: Option<&ObservationMatrix>,
    params: &SegmentAlignment,
) -> Result<(SongAnnotations, Vec<SegmentOutcome>)> {
    params.viterbi.validate()?;
    Ok(align_by_segments(song, Observations { pitch, text }, &CqtConfig::default(), params)?)
}

fn align_local_cmd(a: &AlignLocalArgs, out: Option<&Path>) -> Result<u8> {
    let song = io::annotations(&a.annotations)?;
    let hop = a.hop.unwrap_or(CqtConfig::default().frame_time());
    let params = SegmentAlignment {
        level: parse("level", &a.level)?,
        mode: parse("mode", &a.mode)?,
        octave_fold: a.octave_fold,
        viterbi: ViterbiConfig {
            tolerance: a.tolerance,
            octave_neighbors: a.octave_neighbors,
            prior_weight: a.prior_weight,
            duration_prior: a.duration_prior,
            backtrack_margin: a.backtrack_margin,
            text_weight: a.text_weight,
        },
    };
    let mut report = Report::new(
        "align-local",
        json!({ "annotations": a.annotations, "obs": a.obs, "text_obs": a.text_obs, "hop": hop, "alignment": params }),
    );
    let pitch = match &a.obs {
        Some(p) => Some(pitch_observations(io::matrix(p)?, hop, a.obs_probabilities).with_context(|| format!("observations {}", p.display()))?),
        None => None,
    };
    let text = match &a.text_obs {
        Some(p) => Some(ObservationMatrix::new(io::matrix(p)?, hop, 0).with_context(|| format!("text observations {}", p.display()))?),
        None => None,
    };
    let (aligned, outcomes) = report.time("align", || local_step(&song, pitch.as_ref(), text.as_ref(), &params))?;
    io::write_annotations(&a.out, &aligned)?;
    let failed = outcomes.iter().filter(|o| o.error.is_some()).count();
    if let Some(d) = &a.diag {
        io::save_bytes(d, serde_json::to_string_pretty(&outcomes)?.as_bytes())?;
    }
    report.set_result(json!({ "segments": outcomes.len(), "failed": failed, "log_likelihood": outcomes.iter().filter_map(|o| o.log_likelihood).sum::<f64>() }))?;
    report.emit(out)?;
    Ok(0)
}

fn freq_correlate(a: &FreqCorrelateArgs, out: Option<&Path>) -> Result<u8> {
    let song = io::annotations(&a.annotations)?;
    let salience = io::matrix(&a.salience)?;
    let ladder = CqtConfig::default();
    let hop = a.hop.unwrap_or(ladder.frame_time());
    let grid = TimeGrid::new(hop, salience.rows())?;
    let mut report = Report::new("freq-correlate", json!({ "annotations": a.annotations, "salience": a.salience, "hop": hop, "voicing_threshold": a.voicing_threshold }));
    let fc = report.time("correlate", || Ok(global_align::frequency_correlation(&song.notes, &salience, &grid, &ladder, a.voicing_threshold)?))?;
    if let Some(p) = &a.out {
        let mut shifted = song.clone();
        shifted.notes = transpose_frequency(&song.notes, fc.best_shift as i32);
        io::write_annotations(p, &shifted)?;
    }
    report.set_result(&fc)?;
    report.emit(out)?;
    Ok(0)
}

fn parse_source(s: &str) -> Result<SsmSource> {
    match s {
        "mfcc" => Ok(SsmSource::Mfcc),
        "chroma" => Ok(SsmSource::Chroma),
        "other" => Ok(SsmSource::Other),
        other => Err(Error::param(format!("unknown feature source '{other}' (mfcc, chroma, other)")).into()),
    }
}

#[derive(Serialize)]
pub struct SsmOutcome {
    pub segments: usize,
    pub channels: Vec<SsmSource>,
    pub labels: Option<Vec<u8>>,
    pub patches: usize,
}

/// Stacked SSMs and, when `context` is given, the packed patch tensor.
pub fn ssm_step(
    song: &SongAnnotations,
    level: Granularity,
    features: &[(DenseMatrix, SsmSource)],
    hop: f64,
    text: bool,
    context: Option<usize>,
) -> Result<(Tensor3, Option<Tensor3>, SsmOutcome)> {
    let segs = song.level(level);
    if segs.is_empty() {
        bail!(Error::schema(format!("{level} level is empty")));
    }
    let mut ssms = Vec::new();
    if text {
        let texts: Vec<&str> = segs.segments.iter().map(|s| s.text.as_str()).collect();
        ssms.push(text_ssm(&texts)?);
    }
    for (i, (m, source)) in features.iter().enumerate() {
        let grid = TimeGrid::new(hop, m.rows())?;
        let parts = segment_features(m, &grid, segs).with_context(|| format!("feature matrix {i}"))?;
        ssms.push(audio_ssm(&parts, *source).with_context(|| format!("feature matrix {i}"))?);
    }
    if ssms.is_empty() {
        bail!(Error::param("no SSM channels: give --features or drop --no-text"));
    }
    let stacked = stack_ssms(&ssms)?;
    let labels = if level == Granularity::Lines && !song.paragraphs.is_empty() { Some(boundary_labels(song)?) } else { None };
    let patches = match context {
        Some(w) => Some(extract_patches(&stacked, w, labels.as_deref())?),
        None => None,
    };
    let outcome = SsmOutcome {
        segments: segs.len(),
        channels: ssms.iter().map(|s| s.source).collect(),
        labels,
        patches: patches.as_ref().map_or(0, Vec::len),
    };
    let packed = patches.map(|p| pack_patches(&p)).transpose()?;
    Ok((stacked, packed, outcome))
}

fn build_ssm_cmd(a: &BuildSsmArgs, out: Option<&Path>) -> Result<u8> {
    let song = io::annotations(&a.annotations)?;
    let level: Granularity = parse("segments-from", &a.segments_from)?;
    if !a.sources.is_empty() && a.sources.len() != a.features.len() {
        bail!(Error::param(format!("{} --sources for {} --features", a.sources.len(), a.features.len())));
    }
    let hop = a.hop.unwrap_or(CqtConfig::default().frame_time());
    let features = a
        .features
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let source = a.sources.get(i).map_or(Ok(SsmSource::Other), |s| parse_source(s))?;
            Ok((io::matrix(p)?, source))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = Report::new(
        "build-ssm",
        json!({ "annotations": a.annotations, "features": a.features, "segments_from": level, "hop": hop, "text": !a.no_text, "context": a.context }),
    );
    let (stacked, packed, outcome) =
        report.time("ssm", || ssm_step(&song, level, &features, hop, !a.no_text, a.patches.as_ref().map(|_| a.context)))?;
    io::save_tensor(&a.out, &stacked)?;
    if let (Some(p), Some(t)) = (&a.patches, &packed) {
        io::save_tensor(p, t)?;
    }
    report.set_result(&outcome)?;
    report.emit(out)?;
    Ok(0)
}

/// Builds one track's dataset and its encoded records.
pub fn cleansing_step(
    song: &SongAnnotations,
    cqt_mix: DenseMatrix,
    cqt_vox: DenseMatrix,
    salience: Option<DenseMatrix>,
    spacing: f64,
    track_id: u64,
    cfg: &CleansingConfig,
) -> Result<(Vec<u8>, TrackDataset)> {
    let ladder = CqtConfig::default();
    let grid = TimeGrid::new(spacing, cqt_vox.rows())?;
    let yhat = note_matrix(&song.notes, &grid, &ladder.label_edges())?;
    if !yhat.out_of_range.is_empty() {
        log::warn!("{} notes fall outside the CQT range", yhat.out_of_range.len());
    }
    let salience = salience.unwrap_or_else(|| normalize_loglike(&cqt_vox));
    let track = TrackInput {
        id: track_id,
        spacing,
        cqt_mix,
        cqt_vox,
        yhat: yhat.matrix,
        salience,
    };
    let ds = assemble_dataset(&track, cfg)?;
    let bytes = ds.examples.iter().flat_map(encode_record).collect();
    Ok((bytes, ds))
}

fn dataset_summary(ds: &TrackDataset) -> serde_json::Value {
    let shape = ds.examples.first().map(|e| e.mix.shape());
    json!({ "track_id": ds.track_id, "positives": ds.positives, "negatives": ds.negatives,
            "examples": ds.examples.len(), "patch_shape": shape, "diagnostics": ds.diagnostics })
}

fn gen_cleansing_cmd(a: &GenCleansingArgs, out: Option<&Path>) -> Result<u8> {
    let song = io::annotations(&a.notes)?;
    let hop = a.hop.unwrap_or(CqtConfig::default().frame_time());
    let cfg = CleansingConfig {
        split: parse_split(&a.split)?,
        k_window: a.k_window,
        max_positives: a.max_positives,
        negatives_per_positive: a.ratio,
        seed: a.seed,
        ..CleansingConfig::default()
    };
    let mut report = Report::new(
        "gen-cleansing",
        json!({ "cqt_mix": a.cqt_mix, "cqt_vox": a.cqt_vox, "notes": a.notes, "salience": a.salience, "hop": hop, "track_id": a.track_id, "config": cfg }),
    );
    let mix = io::matrix(&a.cqt_mix)?;
    let vox = io::matrix(&a.cqt_vox)?;
    let salience = a.salience.as_deref().map(io::matrix).transpose()?;
    let (bytes, ds) = report.time("generate", || cleansing_step(&song, mix, vox, salience, hop, a.track_id, &cfg))?;
    io::save_bytes(&a.out, &bytes)?;
    report.set_result(dataset_summary(&ds))?;
    report.emit(out)?;
    Ok(0)
}

fn epf_apply(a: &EpfApplyArgs, out: Option<&Path>) -> Result<u8> {
    let g = io::series(&a.scores, DEFAULT_HOP)?;
    let mut report = Report::new("epf-apply", json!({ "scores": a.scores, "mode": format!("{:?}", a.mode).to_lowercase(), "threshold": a.threshold }));
    let result = match a.mode {
        EpfMode::Filter => {
            let kept = cleansing::filter_frames(&g, a.threshold)?;
            if let Some(p) = &a.out {
                let m = DenseMatrix::from_vec(kept.len(), 1, kept.iter().map(|&i| i as f64).collect())?;
                io::save_matrix(p, &m)?;
            }
            json!({ "frames": g.len(), "kept": kept.len(), "indices": kept })
        }
        EpfMode::Weight => {
            let w = cleansing::sample_weights(&g)?;
            if let Some(p) = &a.out {
                io::save_matrix(p, &io::series_to_matrix(&w))?;
            }
            json!({ "frames": w.len(), "mean_weight": w.mean() })
        }
        EpfMode::Rate => json!({ "frames": g.len(), "error_rate": cleansing::error_rate(&g)? }),
    };
    report.set_result(result)?;
    report.emit(out)?;
    Ok(0)
}

#[derive(Serialize)]
pub struct FilmCount {
    pub variant: Variant,
    pub placement: Placement,
    pub parameters: u64,
}

pub fn film_table(layout: &EncoderLayout) -> Result<Vec<FilmCount>> {
    let mut rows = Vec::new();
    for variant in Variant::ALL {
        for placement in [Placement::Complete, Placement::Bottleneck] {
            rows.push(FilmCount { variant, placement, parameters: count_parameters(variant, placement, layout)? });
        }
    }
    Ok(rows)
}

fn film_params(a: &FilmParamsArgs, out: Option<&Path>) -> Result<u8> {
    let (variant, mut placement) = parse_variant(&a.variant).context("invalid --variant")?;
    if let Some(p) = &a.placement {
        placement = parse("placement", p)?;
    }
    let layout = EncoderLayout { channels: a.channels.clone(), freqs: a.freqs.clone(), phonemes: a.phonemes };
    let count = count_parameters(variant, placement, &layout)?;
    println!("{count}");
    if out.is_some() {
        let mut report = Report::new("film-params", json!({ "variant": variant, "placement": placement, "layout": layout }));
        report.set_result(FilmCount { variant, placement, parameters: count })?;
        report.emit(out)?;
    }
    Ok(0)
}

fn film_apply(a: &FilmApplyArgs, out: Option<&Path>) -> Result<u8> {
    let variant: Variant = parse("variant", &a.variant)?;
    let x = io::tensor(&a.x)?;
    let basis_t = io::tensor(&a.basis)?;
    let mut report = Report::new("film-apply", json!({ "x": a.x, "basis": a.basis, "z": a.z, "variant": variant, "map_time": a.map_time }));
    let y = if variant.is_strong() {
        let Some(zp) = &a.z else { bail!(Error::param(format!("{variant} needs --z activations"))) };
        let mut z = io::matrix(zp)?;
        if a.map_time {
            z = map_activation_time(&z, x.dims()[0]).with_context(|| format!("mapping {} onto the feature map", zp.display()))?;
        }
        let basis = FilmBasis::from_tensor(variant, &basis_t).with_context(|| format!("basis {}", a.basis.display()))?;
        report.time("film", || Ok(film_strong(&x, &basis, &z)?))?
    } else {
        let [two, _, _] = basis_t.dims();
        if two != 2 {
            bail!(Error::shape(format!("{}: basis must be [2, rows, 1], got {:?}", a.basis.display(), basis_t.dims())));
        }
        let (g, b) = basis_t.data().split_at(basis_t.data().len() / 2);
        report.time("film", || Ok(film_weak(&x, g, b, variant)?))?
    };
    io::save_tensor(&a.out, &y)?;
    report.set_result(json!({ "dims": y.dims() }))?;
    report.emit(out)?;
    Ok(0)
}

fn eval(a: &EvalArgs, out: Option<&Path>) -> Result<u8> {
    let mut report = Report::new(
        "eval",
        json!({ "pred": a.pred, "target": a.target, "metric": format!("{:?}", a.metric), "epsilon": a.epsilon, "silent_db": a.silent_db, "threshold": a.threshold }),
    );
    let result = match a.metric {
        Metric::PesEps => {
            let cfg = EnergyMetricConfig { epsilon: a.epsilon, silent_threshold_db: a.silent_db };
            serde_json::to_value(metrics::pes_eps(&io::matrix(&a.pred)?, &io::matrix(&a.target)?, &cfg)?)?
        }
        Metric::Accuracy => {
            let pred = io::series(&a.pred, DEFAULT_HOP)?;
            let target = io::series(&a.target, DEFAULT_HOP)?;
            let (thr, chosen) = match a.threshold {
                Some(t) => (t, false),
                None => (metrics::choose_threshold(&[(pred.clone(), target.clone())])?.0, true),
            };
            json!({ "threshold": thr, "threshold_chosen": chosen, "accuracy": metrics::frame_accuracy(&pred, &target, thr)? })
        }
    };
    report.set_result(result)?;
    report.emit(out)?;
    Ok(0)
}

fn eval_rank(a: &EvalRankArgs, out: Option<&Path>) -> Result<u8> {
    let systems: BTreeMap<String, BTreeMap<String, f64>> = io::json(&a.systems)?;
    let truth: BTreeMap<String, f64> = io::json(&a.truth)?;
    let mut report = Report::new("eval-rank", json!({ "systems": a.systems, "truth": a.truth }));
    report.set_result(metrics::deviation_ranks(&systems, &truth)?)?;
    report.emit(out)?;
    Ok(0)
}

fn detect_vocals(a: &DetectVocalsArgs, out: Option<&Path>) -> Result<u8> {
    let means = a.phat.iter().map(|p| io::series(p, DEFAULT_HOP).map(|s| s.mean())).collect::<Result<Vec<_>>>()?;
    let mut report = Report::new("detect-vocals", json!({ "phat": a.phat, "tolerance": a.tolerance }));
    let vocal = global_align::detect_vocal_tracks(&means, a.tolerance);
    report.set_result(json!({ "means": means, "vocal_tracks": vocal }))?;
    report.emit(out)?;
    Ok(0)
}

