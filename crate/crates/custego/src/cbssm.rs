//! CU block-structure stability features and restoration analysis.
//!
//! BQUM measures how per-kind block counts survive recompression, BSIM how
//! exact block structures survive it; together they form an 8-dimensional
//! steganalysis feature. The restoration analysis estimates the Lipschitz
//! bound that links a CU's RDO cost margin to structural stability.

use serde::Serialize;

use crate::codec::{encode_frame, rdo_margins, read_video, Qp};
use crate::error::{Error, Result};
use crate::frame_io::VideoSequence;
use crate::quadtree::{structure_equal_region, zigzag_scan, CuKind, StructureMap};
use crate::stego::recompress_structure;

/// The four carrier kinds in the fixed feature order.
pub const FEATURE_KINDS: [CuKind; 4] =
    [CuKind::S32, CuKind::S16, CuKind::S8_2Nx2N, CuKind::S8_NxN];

/// Per-kind leaf counts; 64x64 leaves are never counted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct BlockCounts {
    pub n32: usize,
    pub n16: usize,
    pub n8_2n: usize,
    pub n8_n: usize,
}

impl BlockCounts {
    pub fn get(&self, kind: CuKind) -> usize {
        match kind {
            CuKind::S64 => 0,
            CuKind::S32 => self.n32,
            CuKind::S16 => self.n16,
            CuKind::S8_2Nx2N => self.n8_2n,
            CuKind::S8_NxN => self.n8_n,
        }
    }
}

pub fn count_blocks(map: &StructureMap) -> BlockCounts {
    let mut c = BlockCounts { n32: 0, n16: 0, n8_2n: 0, n8_n: 0 };
    for cu in zigzag_scan(map, 0, false) {
        match cu.kind {
            CuKind::S32 => c.n32 += 1,
            CuKind::S16 => c.n16 += 1,
            CuKind::S8_2Nx2N => c.n8_2n += 1,
            CuKind::S8_NxN => c.n8_n += 1,
            CuKind::S64 => unreachable!("excluded by the scan"),
        }
    }
    c
}

/// Block-quantity metric: exp(-|n - n_rec| / max(n, 1)); both zero -> 1.
pub fn bqum(n: usize, n_rec: usize) -> f64 {
    (-(n.abs_diff(n_rec) as f64) / (n.max(1) as f64)).exp()
}

/// Block-structure invariance: the fraction of `t`-kind leaves of `orig`
/// whose exact structure survives in `rec`; no such leaves -> 1.
pub fn bsim(orig: &StructureMap, rec: &StructureMap, t: CuKind) -> f64 {
    let mut hits = 0usize;
    let mut total = 0usize;
    for cu in zigzag_scan(orig, 0, false) {
        if cu.kind == t {
            total += 1;
            hits += structure_equal_region(orig, rec, cu.x, cu.y, t) as usize;
        }
    }
    if total == 0 {
        1.0
    } else {
        hits as f64 / total as f64
    }
}

/// 8-dimensional stability feature: bqum then bsim, each ordered
/// (32, 16, 8-2Nx2N, 8-NxN).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CbssmFeatureVector {
    pub bqum: [f64; 4],
    pub bsim: [f64; 4],
}

impl CbssmFeatureVector {
    pub fn to_array(self) -> [f64; 8] {
        let mut out = [0.0; 8];
        out[..4].copy_from_slice(&self.bqum);
        out[4..].copy_from_slice(&self.bsim);
        out
    }

    pub fn mean_bsim(&self) -> f64 {
        self.bsim.iter().sum::<f64>() / 4.0
    }
}

/// Stability feature of one structure against its recompression.
pub fn frame_features(orig: &StructureMap, rec: &StructureMap) -> CbssmFeatureVector {
    let co = count_blocks(orig);
    let cr = count_blocks(rec);
    let mut v = CbssmFeatureVector { bqum: [0.0; 4], bsim: [0.0; 4] };
    for (i, kind) in FEATURE_KINDS.into_iter().enumerate() {
        v.bqum[i] = bqum(co.get(kind), cr.get(kind));
        v.bsim[i] = bsim(orig, rec, kind);
    }
    v
}

/// Per-frame features of a coded stream: decode each frame's structure,
/// recompress it at the stream's QP, and compare.
pub fn per_frame_features(bitstream: &[u8], n_frames: Option<usize>) -> Result<Vec<CbssmFeatureVector>> {
    let frames = read_video(bitstream)?;
    let take = n_frames.unwrap_or(frames.len());
    if take > frames.len() {
        return Err(Error::invalid(format!(
            "requested {take} frames, stream has {}",
            frames.len()
        )));
    }
    frames[..take]
        .iter()
        .map(|coded| Ok(frame_features(&coded.structure, &recompress_structure(coded)?)))
        .collect()
}

/// Component-wise average of [`per_frame_features`] over the first frames.
pub fn feature_vector(bitstream: &[u8], n_frames: Option<usize>) -> Result<CbssmFeatureVector> {
    let per_frame = per_frame_features(bitstream, n_frames)?;
    let n = per_frame.len() as f64;
    let mut v = CbssmFeatureVector { bqum: [0.0; 4], bsim: [0.0; 4] };
    for f in &per_frame {
        for i in 0..4 {
            v.bqum[i] += f.bqum[i] / n;
            v.bsim[i] += f.bsim[i] / n;
        }
    }
    Ok(v)
}

/// CSV export: one row per frame, columns
/// video,frame,bqum32,bqum16,bqum8_2n,bqum8_n,bsim32,bsim16,bsim8_2n,bsim8_n.
pub fn features_csv(rows: &[(String, usize, CbssmFeatureVector)]) -> String {
    let mut out = String::from(
        "video,frame,bqum32,bqum16,bqum8_2n,bqum8_n,bsim32,bsim16,bsim8_2n,bsim8_n\n",
    );
    for (video, frame, v) in rows {
        out.push_str(&format!("{video},{frame}"));
        for x in v.to_array() {
            out.push_str(&format!(",{x}"));
        }
        out.push('\n');
    }
    out
}

/// One CU's RDO cost margin paired with whether its structure changed
/// under recompression.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct MarginSample {
    pub frame: usize,
    /// Cost gap to the nearest alternative structure.
    pub delta: f64,
    /// Quantization perturbation norm over the CU.
    pub epsilon: f64,
    pub changed: bool,
}

/// Per-frame mean margin split by recompression outcome.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct FrameMarginSummary {
    pub frame: usize,
    pub mean_delta_changed: Option<f64>,
    pub mean_delta_unchanged: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RestorationReport {
    /// Fraction of carrier CUs whose structure survives recompression.
    pub fraction_structure_unchanged: f64,
    /// Mean BSIM over kinds and frames.
    pub mean_bsim: f64,
    /// Median-based Lipschitz estimate; None when no CU changed
    /// ("bound not estimable").
    pub l_hat: Option<f64>,
    /// Fraction of CUs with delta > 2 * l_hat * epsilon.
    pub fraction_above_bound: Option<f64>,
    /// Structure-change rate restricted to CUs above the bound.
    pub changed_rate_above_bound: Option<f64>,
    pub per_frame: Vec<FrameMarginSummary>,
    pub n_samples: usize,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

fn mean_of(it: impl Iterator<Item = f64>) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for v in it {
        sum += v;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

/// Estimates the margin bound from labeled samples: l_hat is half the
/// median of delta/epsilon over changed CUs (the empirical boundary the
/// sufficient condition delta > 2 * L * epsilon must clear).
pub fn estimate_lipschitz(samples: &[MarginSample]) -> Result<RestorationReport> {
    if samples.is_empty() {
        return Err(Error::invalid("no margin samples"));
    }
    let n = samples.len();
    let unchanged = samples.iter().filter(|s| !s.changed).count();

    let mut changed_ratios: Vec<f64> = samples
        .iter()
        .filter(|s| s.changed && s.epsilon > 0.0)
        .map(|s| s.delta / s.epsilon)
        .collect();
    let l_hat = (!changed_ratios.is_empty()).then(|| median(&mut changed_ratios) / 2.0);

    let (fraction_above_bound, changed_rate_above_bound) = match l_hat {
        None => (None, None),
        Some(l) => {
            let above: Vec<&MarginSample> =
                samples.iter().filter(|s| s.delta > 2.0 * l * s.epsilon).collect();
            let rate = (!above.is_empty())
                .then(|| above.iter().filter(|s| s.changed).count() as f64 / above.len() as f64);
            (Some(above.len() as f64 / n as f64), rate)
        }
    };

    let max_frame = samples.iter().map(|s| s.frame).max().unwrap_or(0);
    let per_frame = (0..=max_frame)
        .map(|f| FrameMarginSummary {
            frame: f,
            mean_delta_changed: mean_of(
                samples.iter().filter(|s| s.frame == f && s.changed).map(|s| s.delta),
            ),
            mean_delta_unchanged: mean_of(
                samples.iter().filter(|s| s.frame == f && !s.changed).map(|s| s.delta),
            ),
        })
        .collect();

    Ok(RestorationReport {
        fraction_structure_unchanged: unchanged as f64 / n as f64,
        mean_bsim: f64::NAN, // filled by the caller that knows the maps
        l_hat,
        fraction_above_bound,
        changed_rate_above_bound,
        per_frame,
        n_samples: n,
    })
}

/// Encodes the sequence, recompresses each frame, labels every carrier CU
/// changed/unchanged, and collects its RDO margin.
pub fn margin_samples(video: &VideoSequence, qp: Qp) -> Result<(Vec<MarginSample>, f64)> {
    let mut samples = Vec::new();
    let mut bsim_sum = 0.0;
    for (i, frame) in video.frames.iter().enumerate() {
        let (coded, _) = encode_frame(frame, qp)?;
        let rec = recompress_structure(&coded)?;
        bsim_sum += frame_features(&coded.structure, &rec).mean_bsim();
        let margins = rdo_margins(frame, &coded)?;
        // rdo_margins skips 64x64 leaves, matching the carrier scan order
        for m in &margins {
            let changed =
                structure_equal_region(&coded.structure, &rec, m.cu.x, m.cu.y, m.cu.kind) == 0;
            samples.push(MarginSample {
                frame: i,
                delta: m.delta.max(0.0),
                epsilon: m.epsilon,
                changed,
            });
        }
    }
    Ok((samples, bsim_sum / video.frames.len() as f64))
}

/// Full restoration analysis of a raw sequence at one QP.
pub fn analyze_restoration(video: &VideoSequence, qp: Qp) -> Result<RestorationReport> {
    let (samples, mean_bsim) = margin_samples(video, qp)?;
    if samples.is_empty() {
        return Err(Error::invalid("sequence has no carrier CUs at this qp"));
    }
    let mut report = estimate_lipschitz(&samples)?;
    report.mean_bsim = mean_bsim;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::tests::textured_frame;
    use crate::codec::write_video;
    use crate::frame_io::{synth_frame, SynthKind};
    use crate::quadtree::{random_map, CtuNode, CtuTree};

    fn four_s32_map() -> StructureMap {
        StructureMap::new(
            64,
            64,
            vec![CtuTree {
                root: CtuNode::Split(Box::new([
                    CtuNode::Leaf(CuKind::S32),
                    CtuNode::Leaf(CuKind::S32),
                    CtuNode::Leaf(CuKind::S32),
                    CtuNode::Leaf(CuKind::S32),
                ])),
            }],
        )
        .unwrap()
    }

    #[test]
    fn count_blocks_examples() {
        let m = four_s32_map();
        assert_eq!(count_blocks(&m), BlockCounts { n32: 4, n16: 0, n8_2n: 0, n8_n: 0 });

        // one S32 leaf, three S32 areas each split to four S16
        let mut m2 = m.clone();
        for (x, y) in [(32, 0), (0, 32), (32, 32)] {
            m2.replace_region(x, y, 32, CtuNode::split_one_level(CuKind::S32).unwrap())
                .unwrap();
        }
        assert_eq!(count_blocks(&m2), BlockCounts { n32: 1, n16: 12, n8_2n: 0, n8_n: 0 });

        let all64 = StructureMap::new(128, 64, vec![CtuTree::leaf(CuKind::S64); 2]).unwrap();
        assert_eq!(count_blocks(&all64), BlockCounts { n32: 0, n16: 0, n8_2n: 0, n8_n: 0 });
    }

    #[test]
    fn bqum_hand_values() {
        assert_eq!(bqum(100, 100), 1.0);
        assert!((bqum(100, 50) - (-0.5f64).exp()).abs() < 1e-9);
        assert!((bqum(100, 200) - (-1.0f64).exp()).abs() < 1e-9);
        assert_eq!(bqum(0, 0), 1.0);
        assert!(bqum(0, 3) > 0.0);
    }

    #[test]
    fn bqum_shape() {
        // depends only on (n, |n - n_rec|) and strictly decreases in |delta|
        for n in [1usize, 7, 100] {
            let mut prev = bqum(n, n);
            for d in 1..10 {
                let v = bqum(n, n + d);
                assert!(v < prev);
                assert!(v > 0.0 && prev <= 1.0);
                prev = v;
            }
        }
        assert_eq!(bqum(10, 14), bqum(10, 6));
    }

    #[test]
    fn bsim_cases() {
        let m = four_s32_map();
        assert_eq!(bsim(&m, &m, CuKind::S32), 1.0);
        assert_eq!(bsim(&m, &m, CuKind::S16), 1.0); // no S16 leaves -> 1

        // half the S32 leaves subdivided in rec -> 0.5
        let mut rec = m.clone();
        for (x, y) in [(0, 0), (32, 0)] {
            rec.replace_region(x, y, 32, CtuNode::split_one_level(CuKind::S32).unwrap())
                .unwrap();
        }
        assert_eq!(bsim(&m, &rec, CuKind::S32), 0.5);

        // all altered -> 0
        let mut rec2 = m.clone();
        for (x, y) in [(0, 0), (32, 0), (0, 32), (32, 32)] {
            rec2.replace_region(x, y, 32, CtuNode::split_one_level(CuKind::S32).unwrap())
                .unwrap();
        }
        assert_eq!(bsim(&m, &rec2, CuKind::S32), 0.0);
    }

    #[test]
    fn bsim_identity_on_random_maps() {
        for seed in 0..10 {
            let m = random_map(128, 64, seed);
            for kind in FEATURE_KINDS {
                assert_eq!(bsim(&m, &m, kind), 1.0);
            }
        }
    }

    #[test]
    fn features_in_unit_interval() {
        for seed in 0..10 {
            let a = random_map(64, 64, seed);
            let b = random_map(64, 64, seed + 100);
            let v = frame_features(&a, &b);
            for x in v.to_array() {
                assert!((0.0..=1.0).contains(&x), "{x}");
            }
            assert!(v.bqum.iter().all(|&x| x > 0.0));
        }
    }

    #[test]
    fn stable_recompression_gives_all_ones() {
        let f = synth_frame(SynthKind::Flat(90), 128, 64).unwrap();
        let (coded, _) = encode_frame(&f, Qp::new(32).unwrap()).unwrap();
        let bytes = write_video(&[coded]).unwrap();
        let v = feature_vector(&bytes, None).unwrap();
        assert_eq!(v.to_array(), [1.0; 8]);
    }

    #[test]
    fn feature_vector_is_deterministic() {
        let f = textured_frame(9, 64, 64);
        let (coded, _) = encode_frame(&f, Qp::new(26).unwrap()).unwrap();
        let bytes = write_video(&[coded]).unwrap();
        assert_eq!(feature_vector(&bytes, None).unwrap(), feature_vector(&bytes, None).unwrap());
    }

    #[test]
    fn csv_shape() {
        let v = CbssmFeatureVector { bqum: [1.0; 4], bsim: [0.5; 4] };
        let csv = features_csv(&[("clip".into(), 0, v)]);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "video,frame,bqum32,bqum16,bqum8_2n,bqum8_n,bsim32,bsim16,bsim8_2n,bsim8_n"
        );
        assert_eq!(lines.next().unwrap(), "clip,0,1,1,1,1,0.5,0.5,0.5,0.5");
        assert!(lines.next().is_none());
    }

    #[test]
    fn lipschitz_separable_sample() {
        // changed CUs have delta/eps in [0, 1], unchanged in [3, 5]
        let mut samples = Vec::new();
        for i in 0..20 {
            let r = i as f64 / 20.0;
            samples.push(MarginSample { frame: 0, delta: r * 2.0, epsilon: 2.0, changed: true });
            samples.push(MarginSample {
                frame: 0,
                delta: (3.0 + 2.0 * r) * 2.0,
                epsilon: 2.0,
                changed: false,
            });
        }
        let rep = estimate_lipschitz(&samples).unwrap();
        let l = rep.l_hat.unwrap();
        assert!((0.0..=0.5).contains(&l), "l_hat {l}");
        // the bound separates the classes: every sample above it that is
        // changed sits above the changed-ratio median, so the rate stays
        // well below the unchanged mass
        let above: Vec<&MarginSample> =
            samples.iter().filter(|s| s.delta > 2.0 * l * s.epsilon).collect();
        let changed_above = above.iter().filter(|s| s.changed).count();
        assert_eq!(
            rep.changed_rate_above_bound,
            Some(changed_above as f64 / above.len() as f64)
        );
        // all unchanged samples clear the bound (their ratios are >= 3)
        assert!(above.iter().filter(|s| !s.changed).count() == 20);
        assert!((rep.fraction_structure_unchanged - 0.5).abs() < 1e-12);
    }

    #[test]
    fn lipschitz_no_changed_cus_is_sentinel() {
        let samples: Vec<MarginSample> = (0..5)
            .map(|i| MarginSample { frame: 0, delta: 3.0 + i as f64, epsilon: 1.0, changed: false })
            .collect();
        let rep = estimate_lipschitz(&samples).unwrap();
        assert!(rep.l_hat.is_none());
        assert!(rep.fraction_above_bound.is_none());
        assert_eq!(rep.fraction_structure_unchanged, 1.0);
    }

    #[test]
    fn lipschitz_empty_sample_errors() {
        assert!(estimate_lipschitz(&[]).is_err());
    }

    #[test]
    fn restoration_on_textured_frames() {
        let frames = (0..3).map(|s| textured_frame(200 + s, 64, 64)).collect();
        let v = VideoSequence::new("t", frames).unwrap();
        let rep = analyze_restoration(&v, Qp::new(26).unwrap()).unwrap();
        assert!(rep.n_samples > 0);
        assert!((0.0..=1.0).contains(&rep.fraction_structure_unchanged));
        assert!((0.0..=1.0).contains(&rep.mean_bsim));
        assert_eq!(rep.per_frame.len(), 3);
    }
}
