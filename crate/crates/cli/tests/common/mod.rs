#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn write_rgb(path: &Path, w: u32, h: u32, f: impl Fn(u32, u32) -> [u8; 3]) {
    image::RgbImage::from_fn(w, h, |x, y| image::Rgb(f(x, y))).save(path).unwrap();
}

pub fn write_solid(path: &Path, w: u32, h: u32, rgb: [u8; 3]) {
    write_rgb(path, w, h, |_, _| rgb);
}

/// Smooth gradient plus seeded noise, so neighbouring images differ.
pub fn write_textured(path: &Path, w: u32, h: u32, rng: &mut ChaCha8Rng) {
    let noise: Vec<u8> = (0..w * h * 3).map(|_| rng.random_range(0..48)).collect();
    let phase = rng.random_range(0..200u32);
    write_rgb(path, w, h, |x, y| {
        let i = ((y * w + x) * 3) as usize;
        [
            ((x * 2 + phase) % 200) as u8 + noise[i],
            ((y * 3 + phase) % 200) as u8 + noise[i + 1],
            (((x + y) + phase) % 200) as u8 + noise[i + 2],
        ]
    });
}

pub fn bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_verity"))
}

pub fn verity(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .env_remove("VERITY_JOBS")
        .output()
        .unwrap()
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// One row of the reference comparison fixture.
#[derive(Debug, Clone, serde::Deserialize)]
pub struct PublishedRow {
    pub dimension: String,
    pub model: String,
    pub metric: String,
    pub raw: f64,
    pub scaled: f64,
    pub human: f64,
    pub category_metric: String,
    pub category_human: String,
    pub mad: f64,
    pub mape: f64,
}

pub fn published_rows() -> Vec<PublishedRow> {
    csv::Reader::from_path(fixture("published_comparison.csv"))
        .unwrap()
        .deserialize()
        .map(|r| r.unwrap())
        .collect()
}
