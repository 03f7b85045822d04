//! Writes the bundled 30 s demo song: the annotation file as it would be
//! found (shifted and at a wrong frame rate), singing-voice probabilities,
//! vocal and mixture WAVs, and a pipeline config.
//!
//! `cargo run -p lyraline --example make_fixtures -- fixtures/`

use std::path::PathBuf;

use lyraline::dsp::matrix::write_matrix;
use lyraline::synth::{distort, mix, random_song, render_accompaniment, render_notes, voice_probability, SongShape};
use lyraline::DenseMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const DURATION: f64 = 30.0;
const SAMPLE_RATE: u32 = 22050;
const OFFSET: f64 = 1.25;
const FR_NOMINAL: f64 = 25.0;
const FR_TRUE: f64 = 25.3;

fn main() -> lyraline::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "fixtures".into()));
    std::fs::create_dir_all(&dir)?;
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let shape = SongShape { start: 2.0, duration: DURATION - 1.0, ..SongShape::default() };
    let truth = random_song(&mut rng, &shape, Some(3.5));

    distort(&truth, OFFSET, FR_NOMINAL, FR_TRUE).write(dir.join("annotations.json"))?;
    truth.write(dir.join("truth.json"))?;

    let phat = voice_probability(&truth.notes, 0.014, DURATION, (0.05, 0.9, 0.05), &mut rng)?;
    write_matrix(dir.join("phat.mmx"), &DenseMatrix::from_vec(phat.len(), 1, phat.values)?)?;

    let vocals = render_notes(&truth.notes, SAMPLE_RATE, DURATION, 0.3)?;
    let backing = render_accompaniment(SAMPLE_RATE, DURATION, 0.03, &mut rng)?;
    vocals.write_wav(dir.join("vocals.wav"))?;
    mix(&vocals, &backing)?.write_wav(dir.join("mix.wav"))?;

    std::fs::write(
        dir.join("demo.toml"),
        "# Demo pipeline over the bundled song.\n\
         seed = 7\n\
         out_dir = \"out\"\n\n\
         [inputs]\n\
         annotations = \"annotations.json\"\n\
         phat = [\"phat.mmx\"]\n\
         vocals = \"vocals.wav\"\n\
         mix = \"mix.wav\"\n\n\
         [global]\n\
         alpha = 0.05\n\
         tcorr = 0.8\n\n\
         [local]\n\
         level = \"lines\"\n\
         tolerance = 0\n\n\
         [cleansing]\n\
         split = \"train\"\n\
         max_positives = 200\n",
    )?;
    println!(
        "{} paragraphs, {} lines, {} notes written to {}",
        truth.paragraphs.len(),
        truth.lines.len(),
        truth.notes.len(),
        dir.display()
    );
    Ok(())
}
