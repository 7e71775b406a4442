//! Quality/rate/capacity metrics, the naive structure-forcing baseline,
//! a from-scratch logistic-regression detector over the stability
//! features, and the experiment grid that ties them together.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cbssm::feature_vector;
use crate::codec::{decode_video, encode_frame, encode_frame_forced, write_video, Qp};
use crate::error::{Error, Result};
use crate::frame_io::{Frame, VideoSequence};
use crate::quadtree::{zigzag_scan, CtuNode, StructureMap};
use crate::stc::StcParams;
use crate::stego::{embed, map_8x8, map_full, Scheme, StegoHeader, StegoPackage};

/// PSNR in dB over the luma plane; identical frames cap at 99.0.
pub fn psnr(a: &Frame, b: &Frame) -> Result<f64> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::invalid("psnr dimension mismatch"));
    }
    Ok(psnr_from_sse(sse(a, b), (a.width() * a.height()) as f64))
}

fn sse(a: &Frame, b: &Frame) -> f64 {
    a.luma()
        .iter()
        .zip(b.luma())
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum()
}

fn psnr_from_sse(sse: f64, n_pixels: f64) -> f64 {
    if sse == 0.0 {
        return 99.0;
    }
    (10.0 * (255.0f64 * 255.0 * n_pixels / sse).log10()).min(99.0)
}

/// Sequence PSNR from the pooled MSE of all frames.
pub fn sequence_psnr(a: &[Frame], b: &[Frame]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::invalid("sequence psnr length mismatch"));
    }
    let mut total = 0.0;
    let mut pixels = 0.0;
    for (fa, fb) in a.iter().zip(b) {
        if fa.width() != fb.width() || fa.height() != fb.height() {
            return Err(Error::invalid("psnr dimension mismatch"));
        }
        total += sse(fa, fb);
        pixels += (fa.width() * fa.height()) as f64;
    }
    Ok(psnr_from_sse(total, pixels))
}

/// Quality loss normalized to 1000 embedded bits.
pub fn delta_psnr(psnr_ori: f64, psnr_stg: f64, capacity: u64) -> Result<f64> {
    if capacity == 0 {
        return Err(Error::invalid("zero capacity"));
    }
    Ok(1000.0 * (psnr_ori - psnr_stg).abs() / capacity as f64)
}

/// Bitrate increase ratio per 1000 embedded bits.
pub fn bir(bit_ori: u64, bit_stg: u64, capacity: u64) -> Result<f64> {
    if bit_ori == 0 || capacity == 0 {
        return Err(Error::invalid("zero denominator in bir"));
    }
    Ok(1000.0 * bit_ori.abs_diff(bit_stg) as f64 / (capacity as f64 * bit_ori as f64))
}

/// Bits embeddable while the bitrate grows by 1%: 10 / BIR.
/// Zero BIR means the capacity is unbounded at that growth budget (None).
pub fn capacity_per_1pct(bir: f64) -> Option<f64> {
    (bir > 0.0).then(|| 10.0 / bir)
}

/// Naive baseline: scan non-8x8 CUs in zigzag order; each message bit 1
/// forces the next one fully down to 8x8 2Nx2N leaves, bit 0 skips it.
/// No trellis coding, no distortion weighting.
pub fn tew_embed(video: &VideoSequence, message: &[u8], qp: Qp) -> Result<StegoPackage> {
    if message.iter().any(|&b| b > 1) {
        return Err(Error::invalid("message must be bits"));
    }
    let mut coded_frames = Vec::with_capacity(video.frames.len());
    let mut counts = Vec::with_capacity(video.frames.len());
    for frame in &video.frames {
        let (coded, _) = encode_frame(frame, qp)?;
        let q = zigzag_scan(&coded.structure, 0, true)
            .iter()
            .filter(|cu| cu.size > 8)
            .count();
        counts.push(q);
        coded_frames.push(coded);
    }
    let available: usize = counts.iter().sum();
    if available < message.len() {
        return Err(Error::Capacity { needed: message.len(), available });
    }

    let mut stego_frames = Vec::with_capacity(video.frames.len());
    let mut consumed = 0usize;
    for (i, coded) in coded_frames.into_iter().enumerate() {
        let take = counts[i].min(message.len() - consumed);
        if take == 0 {
            stego_frames.push(coded);
            continue;
        }
        let chunk = &message[consumed..consumed + take];
        consumed += take;
        let mut map = coded.structure.clone();
        let carriers: Vec<_> = zigzag_scan(&coded.structure, 0, true)
            .into_iter()
            .filter(|cu| cu.size > 8)
            .take(take)
            .collect();
        let mut modified = false;
        for (cu, &bit) in carriers.iter().zip(chunk) {
            if bit == 1 {
                map.replace_region(cu.x, cu.y, cu.size, CtuNode::all_8x8(cu.kind.tree_depth()))?;
                modified = true;
            }
        }
        if modified {
            let (stego_coded, _) = encode_frame_forced(&video.frames[i], qp, &map)?;
            stego_frames.push(stego_coded);
        } else {
            stego_frames.push(coded);
        }
    }

    let header = StegoHeader {
        scheme: Scheme::Tew,
        alpha: 0.0,
        h: 0,
        hhat: Vec::new(),
        seed: 0,
        message_len: message.len(),
        carrier_counts: counts,
    };
    Ok(StegoPackage { bitstream: write_video(&stego_frames)?, header, side_info: None })
}

/// Logistic regression over the 8 stability features.
#[derive(Clone, Debug, Serialize)]
pub struct ClassifierModel {
    pub weights: [f64; 8],
    pub bias: f64,
    /// Train-set standardization parameters.
    pub mean: [f64; 8],
    pub std: [f64; 8],
    pub seed: u64,
    pub repeats: u32,
}

impl ClassifierModel {
    pub fn predict(&self, x: &[f64; 8]) -> bool {
        let mut z = self.bias;
        for i in 0..8 {
            z += self.weights[i] * (x[i] - self.mean[i]) / self.std[i];
        }
        z >= 0.0
    }
}

const GD_ITERS: usize = 300;
const GD_RATE: f64 = 0.5;

fn fit_logistic(train: &[([f64; 8], bool)]) -> ([f64; 8], f64, [f64; 8], [f64; 8]) {
    let n = train.len() as f64;
    let mut mean = [0.0f64; 8];
    let mut std = [0.0f64; 8];
    for (x, _) in train {
        for i in 0..8 {
            mean[i] += x[i] / n;
        }
    }
    for (x, _) in train {
        for i in 0..8 {
            std[i] += (x[i] - mean[i]).powi(2) / n;
        }
    }
    for s in &mut std {
        *s = s.sqrt();
        if *s < 1e-12 {
            *s = 1.0;
        }
    }
    let xs: Vec<[f64; 8]> = train
        .iter()
        .map(|(x, _)| std::array::from_fn(|i| (x[i] - mean[i]) / std[i]))
        .collect();
    let ys: Vec<f64> = train.iter().map(|(_, y)| *y as u8 as f64).collect();

    let mut w = [0.0f64; 8];
    let mut b = 0.0f64;
    for _ in 0..GD_ITERS {
        let mut gw = [0.0f64; 8];
        let mut gb = 0.0f64;
        for (x, &y) in xs.iter().zip(&ys) {
            let z: f64 = b + w.iter().zip(x).map(|(wi, xi)| wi * xi).sum::<f64>();
            let p = 1.0 / (1.0 + (-z).exp());
            let err = p - y;
            for i in 0..8 {
                gw[i] += err * x[i] / n;
            }
            gb += err / n;
        }
        for i in 0..8 {
            w[i] -= GD_RATE * gw[i];
        }
        b -= GD_RATE * gb;
    }
    (w, b, mean, std)
}

/// Trains over `repeats` seeded stratified 1:1 train/test splits and
/// returns the last model with the mean test accuracy.
pub fn train_detector(
    samples: &[([f64; 8], bool)],
    seed: u64,
    repeats: u32,
) -> Result<(ClassifierModel, f64)> {
    let pos: Vec<usize> = (0..samples.len()).filter(|&i| samples[i].1).collect();
    let neg: Vec<usize> = (0..samples.len()).filter(|&i| !samples[i].1).collect();
    if samples.len() < 4 || pos.len() < 2 || neg.len() < 2 {
        return Err(Error::invalid("detector needs at least 2 samples per class"));
    }

    let mut acc_sum = 0.0;
    let mut last = None;
    for r in 0..repeats {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(r as u64));
        let mut p = pos.clone();
        let mut n = neg.clone();
        p.shuffle(&mut rng);
        n.shuffle(&mut rng);
        let (ptr, pte) = p.split_at(p.len() / 2);
        let (ntr, nte) = n.split_at(n.len() / 2);
        let train: Vec<([f64; 8], bool)> =
            ptr.iter().chain(ntr).map(|&i| samples[i]).collect();
        let test: Vec<([f64; 8], bool)> = pte.iter().chain(nte).map(|&i| samples[i]).collect();

        let (weights, bias, mean, std) = fit_logistic(&train);
        let model = ClassifierModel { weights, bias, mean, std, seed, repeats };
        let correct = test.iter().filter(|(x, y)| model.predict(x) == *y).count();
        acc_sum += correct as f64 / test.len() as f64;
        last = Some(model);
    }
    Ok((last.unwrap(), acc_sum / repeats as f64))
}

/// Deterministic synthetic corpus of smooth-plus-texture sequences.
pub fn synth_corpus(
    n_videos: usize,
    n_frames: usize,
    width: u32,
    height: u32,
    seed: u64,
) -> Result<Vec<VideoSequence>> {
    (0..n_videos)
        .map(|v| {
            let frames = (0..n_frames)
                .map(|f| synth_scene(seed ^ (v as u64 * 1000 + f as u64), width, height))
                .collect::<Result<Vec<_>>>()?;
            VideoSequence::new(format!("synth{v:03}"), frames)
        })
        .collect()
}

/// Scene with both partition extremes: smooth sinusoidally shaded areas
/// that encode as large (64/32) coding units next to heavily textured
/// areas that break down to fine partitions across the whole QP range.
/// The texture is laid out per 64x64 tile so each tile is decisively one
/// or the other, with at least one tile of each kind whenever the frame
/// has two or more tiles.
pub fn synth_scene(seed: u64, width: u32, height: u32) -> Result<Frame> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fx = rng.gen_range(0.008..0.03);
    let fy = rng.gen_range(0.008..0.03);
    let amp = rng.gen_range(20.0..60.0);
    let tiles_x = width.div_ceil(64).max(1);
    let tiles_y = height.div_ceil(64).max(1);
    let n_tiles = (tiles_x * tiles_y) as usize;
    let mut textured: Vec<bool> = (0..n_tiles).map(|_| rng.gen_bool(0.5)).collect();
    if n_tiles >= 2 {
        if textured.iter().all(|&t| t) {
            textured[rng.gen_range(0..n_tiles)] = false;
        }
        if textured.iter().all(|&t| !t) {
            textured[rng.gen_range(0..n_tiles)] = true;
        }
    } else {
        // single-tile frames alternate so small corpora still mix kinds
        textured[0] = rng.gen_bool(0.7);
    }
    // multi-scale mosaic offsets give textured tiles genuine partition
    // diversity: flat DC patches at 16-, 8- and 4-pixel granularity
    let cells = |step: u32| (width.div_ceil(step) * height.div_ceil(step)) as usize;
    let grid16: Vec<f64> = (0..cells(16)).map(|_| rng.gen_range(-45.0..45.0)).collect();
    let grid8: Vec<Option<f64>> = (0..cells(8))
        .map(|_| rng.gen_bool(0.6).then(|| rng.gen_range(-30.0..30.0)))
        .collect();
    let grid4: Vec<Option<f64>> = (0..cells(4))
        .map(|_| rng.gen_bool(0.25).then(|| rng.gen_range(-20.0..20.0)))
        .collect();
    let mut luma = vec![0u8; (width * height) as usize];
    for y in 0..height {
        for x in 0..width {
            let tile = (y / 64 * tiles_x + x / 64) as usize;
            let mut v = 128.0 + amp * (fx * x as f64).sin() * (fy * y as f64).cos();
            if textured[tile] {
                v += grid16[(y / 16 * width.div_ceil(16) + x / 16) as usize];
                if let Some(o) = grid8[(y / 8 * width.div_ceil(8) + x / 8) as usize] {
                    v += o;
                }
                if let Some(o) = grid4[(y / 4 * width.div_ceil(4) + x / 4) as usize] {
                    v += o;
                }
                v += rng.gen_range(-10.0..10.0);
            }
            luma[(y * width + x) as usize] = v.clamp(0.0, 255.0) as u8;
        }
    }
    Frame::new(width, height, luma)
}

#[derive(Clone, Debug, Serialize)]
pub struct MetricsRow {
    pub video: String,
    pub qp: u8,
    pub payload: f64,
    pub scheme: Scheme,
    pub capacity: u64,
    pub psnr_ori: f64,
    pub psnr_stg: f64,
    pub delta_psnr: f64,
    pub bir: f64,
    pub capacity_per_1pct: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct DetectorRow {
    pub qp: u8,
    pub payload: f64,
    pub scheme: Scheme,
    pub accuracy: f64,
    pub n_videos: usize,
}

#[derive(Clone, Debug, Serialize, Default)]
pub struct ExperimentResults {
    pub metrics: Vec<MetricsRow>,
    pub detectors: Vec<DetectorRow>,
}

impl ExperimentResults {
    pub fn metrics_csv(&self) -> String {
        let mut out = String::from(
            "video,qp,payload,scheme,capacity,psnr_ori,psnr_stg,delta_psnr,bir,capacity_per_1pct\n",
        );
        for r in &self.metrics {
            let cap1 = r
                .capacity_per_1pct
                .map(|v| v.to_string())
                .unwrap_or_else(|| "unbounded".into());
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                r.video,
                r.qp,
                r.payload,
                r.scheme.as_str(),
                r.capacity,
                r.psnr_ori,
                r.psnr_stg,
                r.delta_psnr,
                r.bir,
                cap1
            ));
        }
        out
    }

    pub fn detectors_csv(&self) -> String {
        let mut out = String::from("qp,payload,scheme,accuracy,n_videos\n");
        for r in &self.detectors {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.qp,
                r.payload,
                r.scheme.as_str(),
                r.accuracy,
                r.n_videos
            ));
        }
        out
    }
}

fn message_capacity(
    scheme: Scheme,
    structures: &[StructureMap],
    alpha: f64,
) -> usize {
    structures
        .iter()
        .map(|map| {
            let q = match scheme {
                Scheme::Full => map_full(map, 0).q(),
                Scheme::Only8x8 => map_8x8(map, 0).q(),
                Scheme::Tew => zigzag_scan(map, 0, true).iter().filter(|c| c.size > 8).count(),
            };
            ((alpha * q as f64) + 1e-9).floor() as usize
        })
        .sum()
}

/// Runs the full grid: per (video, qp, payload, scheme) embed a seeded
/// random message sized to the scheme's capacity at that payload, measure
/// quality/rate, and train one detector per (qp, payload, scheme) on the
/// cover-vs-stego feature vectors across videos.
pub fn run_experiment(
    corpus: &[VideoSequence],
    qps: &[u8],
    payloads: &[f64],
    schemes: &[Scheme],
    seed: u64,
    detector_repeats: u32,
) -> Result<ExperimentResults> {
    let params = StcParams::default_production(seed);
    let mut results = ExperimentResults::default();

    for &qp_v in qps {
        let qp = Qp::new(qp_v)?;
        // cover encodes are shared across payloads and schemes
        let mut covers = Vec::with_capacity(corpus.len());
        for video in corpus {
            let mut coded = Vec::new();
            let mut recons = Vec::new();
            for frame in &video.frames {
                let (c, r) = encode_frame(frame, qp)?;
                coded.push(c);
                recons.push(r);
            }
            let bytes = write_video(&coded)?;
            let structures: Vec<StructureMap> =
                coded.iter().map(|c| c.structure.clone()).collect();
            let psnr_ori = sequence_psnr(&video.frames, &recons)?;
            let cover_features = feature_vector(&bytes, None)?;
            covers.push((bytes, structures, psnr_ori, cover_features));
        }

        for &payload in payloads {
            for &scheme in schemes {
                let mut feats: Vec<([f64; 8], bool)> = Vec::new();
                for (vi, video) in corpus.iter().enumerate() {
                    let (cover_bytes, structures, psnr_ori, cover_features) = &covers[vi];
                    let cap = message_capacity(scheme, structures, payload);
                    let mut rng = ChaCha8Rng::seed_from_u64(
                        seed ^ (vi as u64)
                            .wrapping_mul(0x9e37_79b9_7f4a_7c15)
                            .wrapping_add(qp_v as u64)
                            .wrapping_add((payload * 1000.0) as u64),
                    );
                    let message: Vec<u8> = (0..cap).map(|_| rng.gen_range(0..2u8)).collect();
                    let pkg = match scheme {
                        Scheme::Tew => tew_embed(video, &message, qp)?,
                        s => embed(video, &message, payload, qp, s, &params)?,
                    };
                    let stego_frames: Vec<Frame> = decode_video(&pkg.bitstream)?
                        .into_iter()
                        .map(|(_, f)| f)
                        .collect();
                    let psnr_stg = sequence_psnr(&video.frames, &stego_frames)?;
                    let bit_ori = cover_bytes.len() as u64 * 8;
                    let bit_stg = pkg.bitstream.len() as u64 * 8;
                    let (dp, b) = if cap == 0 {
                        (0.0, 0.0)
                    } else {
                        (
                            delta_psnr(*psnr_ori, psnr_stg, cap as u64)?,
                            bir(bit_ori, bit_stg, cap as u64)?,
                        )
                    };
                    results.metrics.push(MetricsRow {
                        video: video.name.clone(),
                        qp: qp_v,
                        payload,
                        scheme,
                        capacity: cap as u64,
                        psnr_ori: *psnr_ori,
                        psnr_stg,
                        delta_psnr: dp,
                        bir: b,
                        capacity_per_1pct: capacity_per_1pct(b),
                    });
                    let stego_features = feature_vector(&pkg.bitstream, None)?;
                    feats.push((cover_features.to_array(), false));
                    feats.push((stego_features.to_array(), true));
                }
                let (_, accuracy) = train_detector(&feats, seed, detector_repeats)?;
                results.detectors.push(DetectorRow {
                    qp: qp_v,
                    payload,
                    scheme,
                    accuracy,
                    n_videos: corpus.len(),
                });
            }
        }
    }
    Ok(results)
}

/// Convenience accessor: mean of a metric over all rows of one scheme at
/// one grid point.
pub fn mean_metric<F: Fn(&MetricsRow) -> f64>(
    rows: &[MetricsRow],
    qp: u8,
    payload: f64,
    scheme: Scheme,
    f: F,
) -> Option<f64> {
    let sel: Vec<f64> = rows
        .iter()
        .filter(|r| r.qp == qp && r.payload == payload && r.scheme == scheme)
        .map(f)
        .collect();
    (!sel.is_empty()).then(|| sel.iter().sum::<f64>() / sel.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::read_video;
    use crate::frame_io::{synth_frame, SynthKind};
    use crate::quadtree::CuKind;

    #[test]
    fn psnr_hand_values() {
        let a = synth_frame(SynthKind::Flat(7), 64, 64).unwrap();
        assert_eq!(psnr(&a, &a).unwrap(), 99.0);

        let zero = synth_frame(SynthKind::Flat(0), 64, 64).unwrap();
        let full = synth_frame(SynthKind::Flat(255), 64, 64).unwrap();
        assert!(psnr(&zero, &full).unwrap().abs() < 1e-12);

        let mut b = a.clone();
        b.set_sample(10, 10, 7 + 16);
        let expect = 10.0 * (255.0f64 * 255.0 / (256.0 / 4096.0)).log10();
        assert!((psnr(&a, &b).unwrap() - expect).abs() < 1e-9);
        assert!((expect - 60.17).abs() < 0.01);
    }

    #[test]
    fn delta_psnr_hand_values() {
        assert!((delta_psnr(40.0, 39.9, 1000).unwrap() - 0.1).abs() < 1e-9);
        assert_eq!(delta_psnr(40.0, 40.0, 500).unwrap(), 0.0);
        assert!((delta_psnr(40.0, 39.9, 2000).unwrap() - 0.05).abs() < 1e-9);
        assert!(delta_psnr(40.0, 39.0, 0).is_err());
    }

    #[test]
    fn bir_hand_values() {
        assert_eq!(bir(1_000_000, 1_000_000, 1000).unwrap(), 0.0);
        let v = bir(1_000_000, 1_001_000, 1000).unwrap();
        assert!((v - 1e-3).abs() < 1e-12);
        // doubling capacity halves bir
        assert!((bir(1_000_000, 1_001_000, 2000).unwrap() - v / 2.0).abs() < 1e-12);
        assert!(bir(0, 5, 10).is_err());
    }

    #[test]
    fn capacity_inversion() {
        assert!((capacity_per_1pct(1e-3).unwrap() - 10_000.0).abs() < 1e-9);
        assert!((capacity_per_1pct(1e-2).unwrap() - 1_000.0).abs() < 1e-9);
        assert!(capacity_per_1pct(0.0).is_none());
        // halving bir doubles capacity
        let a = capacity_per_1pct(4e-3).unwrap();
        let b = capacity_per_1pct(2e-3).unwrap();
        assert!((b - 2.0 * a).abs() < 1e-9);
    }

    #[test]
    fn tew_zero_message_is_identity() {
        let v = VideoSequence::new("t", vec![synth_scene(3, 64, 64).unwrap()]).unwrap();
        let qp = Qp::new(26).unwrap();
        let (coded, _) = encode_frame(&v.frames[0], qp).unwrap();
        let cover = write_video(&[coded]).unwrap();
        let pkg = tew_embed(&v, &[], qp).unwrap();
        assert_eq!(pkg.bitstream, cover);
        let pkg0 = tew_embed(&v, &[0], qp).unwrap();
        assert_eq!(pkg0.bitstream, cover);
    }

    #[test]
    fn tew_one_bit_forces_full_split() {
        // flat frame codes as a single S64; one 1-bit must shatter it
        let v =
            VideoSequence::new("flat", vec![synth_frame(SynthKind::Flat(80), 64, 64).unwrap()])
                .unwrap();
        let qp = Qp::new(26).unwrap();
        let pkg = tew_embed(&v, &[1], qp).unwrap();
        let stego = read_video(&pkg.bitstream).unwrap();
        let scan = zigzag_scan(&stego[0].structure, 0, true);
        assert_eq!(scan.len(), 64);
        assert!(scan.iter().all(|c| c.kind == CuKind::S8_2Nx2N));
    }

    #[test]
    fn tew_capacity_error() {
        let v =
            VideoSequence::new("flat", vec![synth_frame(SynthKind::Flat(80), 64, 64).unwrap()])
                .unwrap();
        // the flat frame has exactly one non-8x8 CU
        match tew_embed(&v, &[1, 1], Qp::new(26).unwrap()) {
            Err(Error::Capacity { needed: 2, available: 1 }) => {}
            other => panic!("expected capacity error, got {other:?}"),
        }
    }

    #[test]
    fn detector_separable() {
        let mut samples = Vec::new();
        for _ in 0..10 {
            samples.push(([1.0; 8], true));
            samples.push(([0.0; 8], false));
        }
        let (_, acc) = train_detector(&samples, 1, 20).unwrap();
        assert_eq!(acc, 1.0);
    }

    #[test]
    fn detector_chance_on_shuffled_labels() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let samples: Vec<([f64; 8], bool)> = (0..40)
            .map(|i| (std::array::from_fn(|_| rng.gen_range(0.0..1.0)), i % 2 == 0))
            .collect();
        let (_, acc) = train_detector(&samples, 3, 100).unwrap();
        assert!((0.35..=0.65).contains(&acc), "accuracy {acc}");
    }

    #[test]
    fn detector_chance_on_identical_features() {
        let samples: Vec<([f64; 8], bool)> =
            (0..40).map(|i| ([0.7; 8], i % 2 == 0)).collect();
        let (_, acc) = train_detector(&samples, 9, 100).unwrap();
        assert!((0.40..=0.60).contains(&acc), "accuracy {acc}");
    }

    #[test]
    fn detector_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let samples: Vec<([f64; 8], bool)> = (0..20)
            .map(|i| {
                let base = if i % 2 == 0 { 0.3 } else { 0.6 };
                (std::array::from_fn(|_| base + rng.gen_range(-0.2..0.2)), i % 2 == 0)
            })
            .collect();
        let (_, a) = train_detector(&samples, 11, 50).unwrap();
        let (_, b) = train_detector(&samples, 11, 50).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn detector_rejects_single_class() {
        let samples: Vec<([f64; 8], bool)> = (0..6).map(|_| ([0.1; 8], true)).collect();
        assert!(train_detector(&samples, 0, 10).is_err());
    }

    #[test]
    fn corpus_is_deterministic_and_sized() {
        let a = synth_corpus(3, 2, 64, 64, 7).unwrap();
        let b = synth_corpus(3, 2, 64, 64, 7).unwrap();
        assert_eq!(a.len(), 3);
        for (va, vb) in a.iter().zip(&b) {
            assert_eq!(va.frames, vb.frames);
            assert_eq!(va.frames.len(), 2);
        }
    }

    #[test]
    fn stego_lowers_aggregate_mean_bsim() {
        // structure-forcing stego at 0.5 bpc must show strictly lower
        // aggregate mean bsim than the covers over a 20-video corpus
        let corpus = synth_corpus(20, 1, 128, 128, 21).unwrap();
        let qp = Qp::new(26).unwrap();
        let mut cover_sum = 0.0;
        let mut stego_sum = 0.0;
        for (vi, video) in corpus.iter().enumerate() {
            let (coded, _) = encode_frame(&video.frames[0], qp).unwrap();
            let q = zigzag_scan(&coded.structure, 0, true)
                .iter()
                .filter(|c| c.size > 8)
                .count();
            let cover = write_video(&[coded]).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(vi as u64);
            let message: Vec<u8> = (0..q / 2).map(|_| rng.gen_range(0..2u8)).collect();
            let pkg = tew_embed(video, &message, qp).unwrap();
            cover_sum += feature_vector(&cover, None).unwrap().mean_bsim();
            stego_sum += feature_vector(&pkg.bitstream, None).unwrap().mean_bsim();
        }
        assert!(
            stego_sum < cover_sum,
            "stego aggregate {stego_sum} vs cover {cover_sum}"
        );
    }

    #[test]
    fn experiment_grid_shape() {
        let corpus = synth_corpus(4, 1, 64, 64, 3).unwrap();
        let res = run_experiment(
            &corpus,
            &[26],
            &[0.3],
            &[Scheme::Full, Scheme::Tew],
            5,
            5,
        )
        .unwrap();
        assert_eq!(res.metrics.len(), 4 * 2);
        assert_eq!(res.detectors.len(), 2);
        for r in &res.metrics {
            assert!(r.psnr_ori > 0.0 && r.psnr_stg > 0.0);
            assert!(r.delta_psnr >= 0.0 && r.bir >= 0.0);
        }
        assert!(res.metrics_csv().lines().count() == 9);
        assert!(res.detectors_csv().lines().count() == 3);
    }
}
