//! Simplified intra-only encoder/decoder with RDO-driven quad-tree
//! partitioning.
//!
//! The encoder works bottom-up per CTU: at every node the cost of coding
//! the region as a single leaf is compared against the cost of splitting
//! (children plus one split-flag bit); ties prefer not splitting, and at
//! 8x8 the 2Nx2N PU layout wins ties against NxN. Rate is the exact number
//! of bits the bitstream writer emits, so J = D + lambda * R holds to the
//! bit.

pub mod intra;
pub mod transform;

use std::collections::HashMap;

use crate::bits::{se_len, BitReader, BitWriter};
use crate::error::{Error, Result};
use crate::frame_io::{Frame, CTU_SIZE};
use crate::quadtree::{
    zigzag_scan, CtuNode, CtuTree, CuKind, CuRef, StructureMap,
};

pub use intra::{predict, Mode, ALL_MODES};
pub use transform::{dct_forward, dct_inverse, dequantize, quant_step, quantize};

/// Quantization parameter, 0..=51.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Qp(u8);

impl Qp {
    pub fn new(v: u8) -> Result<Self> {
        if v > 51 {
            return Err(Error::invalid(format!("qp {v} out of range 0..=51")));
        }
        Ok(Qp(v))
    }

    pub fn value(self) -> u8 {
        self.0
    }
}

/// Intra Lagrangian: 0.57 * 2^((qp - 12) / 3).
pub fn lambda_from_qp(qp: Qp) -> f64 {
    0.57 * 2f64.powf((qp.value() as f64 - 12.0) / 3.0)
}

#[derive(Clone, Copy, PartialEq, Debug)]
pub struct RdCost {
    /// Sum of squared pixel errors over the region.
    pub distortion: f64,
    /// Exact coded bits for the region, flags included.
    pub rate: u64,
    pub j: f64,
}

impl RdCost {
    fn new(distortion: f64, rate: u64, lambda: f64) -> Self {
        Self { distortion, rate, j: distortion + lambda * rate as f64 }
    }
}

/// One coded leaf: PU modes and quantized coefficient blocks.
/// S8 NxN leaves carry four 4x4 PUs; every other kind carries one.
#[derive(Clone, PartialEq, Debug)]
pub struct LeafCoded {
    pub kind: CuKind,
    pub modes: Vec<Mode>,
    pub levels: Vec<Vec<i32>>,
    /// RD cost as evaluated by the encoder; zeroed when the leaf was parsed
    /// back from a bitstream.
    pub cost: RdCost,
}

#[derive(Clone, Debug)]
pub struct CodedFrame {
    pub structure: StructureMap,
    /// Leaves in CTU-raster / z-order scan order, S64 included.
    pub leaves: Vec<LeafCoded>,
    pub qp: Qp,
}

/// Cost margin of a coded CU against its nearest alternative structures,
/// with the quantization perturbation norm over the same support.
#[derive(Clone, Copy, Debug)]
pub struct RdoMargin {
    pub cu: CuRef,
    pub j_opt: f64,
    pub delta: f64,
    pub epsilon: f64,
}

struct Ctx {
    qp: Qp,
    lambda: f64,
}

struct PuCoded {
    mode: Mode,
    levels: Vec<i32>,
    recon: Vec<u8>,
    sse: f64,
}

fn copy_region(f: &Frame, x: u32, y: u32, n: u32) -> Vec<u8> {
    let mut out = Vec::with_capacity((n * n) as usize);
    for j in 0..n {
        out.extend_from_slice(&f.row(y + j)[x as usize..(x + n) as usize]);
    }
    out
}

fn paste_region(f: &mut Frame, x: u32, y: u32, n: u32, data: &[u8]) {
    for j in 0..n {
        for i in 0..n {
            f.set_sample(x + i, y + j, data[(j * n + i) as usize]);
        }
    }
}

fn sse_region(a: &Frame, b: &Frame, x: u32, y: u32, n: u32) -> f64 {
    let mut acc = 0.0;
    for j in 0..n {
        let ra = &a.row(y + j)[x as usize..(x + n) as usize];
        let rb = &b.row(y + j)[x as usize..(x + n) as usize];
        for (va, vb) in ra.iter().zip(rb) {
            let d = *va as f64 - *vb as f64;
            acc += d * d;
        }
    }
    acc
}

/// Codes one prediction unit, trying all four modes and keeping the J
/// minimizer (ties keep the earlier mode in DC, Planar, H, V order).
fn code_pu(src: &Frame, recon: &Frame, x: u32, y: u32, n: u32, ctx: &Ctx) -> PuCoded {
    let nn = (n * n) as usize;
    let mut best: Option<(f64, PuCoded)> = None;
    for mode in ALL_MODES {
        let pred = predict(recon, x, y, n, mode);
        let mut residual = vec![0.0f64; nn];
        for j in 0..n {
            let row = src.row(y + j);
            for i in 0..n {
                let idx = (j * n + i) as usize;
                residual[idx] =
                    row[(x + i) as usize] as f64 - pred[idx] as f64;
            }
        }
        let coeffs = dct_forward(&residual, n as usize);
        let levels = quantize(&coeffs, ctx.qp);
        let rec_res = dct_inverse(&dequantize(&levels, ctx.qp), n as usize);
        let mut recon_block = vec![0u8; nn];
        let mut sse = 0.0;
        for j in 0..n {
            let row = src.row(y + j);
            for i in 0..n {
                let idx = (j * n + i) as usize;
                let v = (pred[idx] as f64 + rec_res[idx]).round().clamp(0.0, 255.0) as u8;
                recon_block[idx] = v;
                let d = row[(x + i) as usize] as f64 - v as f64;
                sse += d * d;
            }
        }
        let coeff_bits: u64 = levels.iter().map(|&l| se_len(l as i64)).sum();
        let j_mode = sse + ctx.lambda * (2 + coeff_bits) as f64;
        if best.as_ref().map_or(true, |(bj, _)| j_mode < *bj) {
            best = Some((j_mode, PuCoded { mode, levels, recon: recon_block, sse }));
        }
    }
    best.unwrap().1
}

/// Exact coded bits of a leaf: one flag bit (split flag at depths 0-2 or
/// PU flag at depth 3), plus 2 mode bits and the signed exp-Golomb
/// coefficients per prediction unit.
pub fn entropy_size(leaf: &LeafCoded) -> u64 {
    let mut bits = 1u64;
    for levels in &leaf.levels {
        bits += 2;
        bits += levels.iter().map(|&l| se_len(l as i64)).sum::<u64>();
    }
    bits
}

/// Codes a leaf of the given kind, writing its reconstruction into `recon`.
fn code_leaf(src: &Frame, recon: &mut Frame, x: u32, y: u32, kind: CuKind, ctx: &Ctx) -> LeafCoded {
    let (modes, levels, distortion) = if kind == CuKind::S8_NxN {
        let mut modes = Vec::with_capacity(4);
        let mut levels = Vec::with_capacity(4);
        let mut distortion = 0.0;
        for (dy, dx) in [(0, 0), (0, 4), (4, 0), (4, 4)] {
            let pu = code_pu(src, recon, x + dx, y + dy, 4, ctx);
            paste_region(recon, x + dx, y + dy, 4, &pu.recon);
            modes.push(pu.mode);
            levels.push(pu.levels);
            distortion += pu.sse;
        }
        (modes, levels, distortion)
    } else {
        let n = kind.size();
        let pu = code_pu(src, recon, x, y, n, ctx);
        paste_region(recon, x, y, n, &pu.recon);
        (vec![pu.mode], vec![pu.levels], pu.sse)
    };
    let mut leaf = LeafCoded { kind, modes, levels, cost: RdCost::new(0.0, 0, 0.0) };
    let rate = entropy_size(&leaf);
    leaf.cost = RdCost::new(distortion, rate, ctx.lambda);
    leaf
}

fn rdo_node(
    src: &Frame,
    recon: &mut Frame,
    x: u32,
    y: u32,
    depth: u8,
    ctx: &Ctx,
) -> (CtuNode, Vec<LeafCoded>, RdCost) {
    let size = CTU_SIZE >> depth;
    if depth == 3 {
        let saved = copy_region(recon, x, y, size);
        let leaf_2n = code_leaf(src, recon, x, y, CuKind::S8_2Nx2N, ctx);
        let rec_2n = copy_region(recon, x, y, size);
        paste_region(recon, x, y, size, &saved);
        let leaf_nn = code_leaf(src, recon, x, y, CuKind::S8_NxN, ctx);
        if leaf_2n.cost.j <= leaf_nn.cost.j {
            paste_region(recon, x, y, size, &rec_2n);
            let cost = leaf_2n.cost;
            return (CtuNode::Leaf(CuKind::S8_2Nx2N), vec![leaf_2n], cost);
        }
        let cost = leaf_nn.cost;
        return (CtuNode::Leaf(CuKind::S8_NxN), vec![leaf_nn], cost);
    }

    let saved = copy_region(recon, x, y, size);
    let leaf = code_leaf(src, recon, x, y, CuKind::for_depth(depth, false), ctx);
    let leaf_rec = copy_region(recon, x, y, size);
    paste_region(recon, x, y, size, &saved);

    let h = size / 2;
    let mut children = Vec::with_capacity(4);
    let mut child_leaves = Vec::new();
    let mut dist = 0.0;
    let mut rate = 1u64; // the split flag of this node
    for (dy, dx) in [(0, 0), (0, h), (h, 0), (h, h)] {
        let (node, leaves, cost) = rdo_node(src, recon, x + dx, y + dy, depth + 1, ctx);
        children.push(node);
        child_leaves.extend(leaves);
        dist += cost.distortion;
        rate += cost.rate;
    }
    let split_cost = RdCost::new(dist, rate, ctx.lambda);

    if leaf.cost.j <= split_cost.j {
        paste_region(recon, x, y, size, &leaf_rec);
        let cost = leaf.cost;
        let kind = leaf.kind;
        (CtuNode::Leaf(kind), vec![leaf], cost)
    } else {
        let node = CtuNode::Split(Box::new([
            children.remove(0),
            children.remove(0),
            children.remove(0),
            children.remove(0),
        ]));
        (node, child_leaves, split_cost)
    }
}

fn check_padded(frame: &Frame) -> Result<()> {
    if frame.width() % CTU_SIZE != 0 || frame.height() % CTU_SIZE != 0 {
        return Err(Error::invalid("frame is not padded to the CTU grid"));
    }
    Ok(())
}

/// RDO-encodes a padded frame; returns the coded frame and its
/// reconstruction.
pub fn encode_frame(frame: &Frame, qp: Qp) -> Result<(CodedFrame, Frame)> {
    check_padded(frame)?;
    let ctx = Ctx { qp, lambda: lambda_from_qp(qp) };
    let mut recon = Frame::new(
        frame.width(),
        frame.height(),
        vec![0; (frame.width() * frame.height()) as usize],
    )?;
    let mut ctus = Vec::new();
    let mut leaves = Vec::new();
    for cy in 0..frame.height() / CTU_SIZE {
        for cx in 0..frame.width() / CTU_SIZE {
            let (node, ctu_leaves, _) =
                rdo_node(frame, &mut recon, cx * CTU_SIZE, cy * CTU_SIZE, 0, &ctx);
            ctus.push(CtuTree { root: node });
            leaves.extend(ctu_leaves);
        }
    }
    let structure = StructureMap::new(frame.width(), frame.height(), ctus)?;
    Ok((CodedFrame { structure, leaves, qp }, recon))
}

fn forced_node(
    src: &Frame,
    recon: &mut Frame,
    x: u32,
    y: u32,
    depth: u8,
    node: &CtuNode,
    ctx: &Ctx,
) -> (Vec<LeafCoded>, RdCost) {
    match node {
        CtuNode::Leaf(kind) => {
            let leaf = code_leaf(src, recon, x, y, *kind, ctx);
            let cost = leaf.cost;
            (vec![leaf], cost)
        }
        CtuNode::Split(children) => {
            let h = (CTU_SIZE >> depth) / 2;
            let mut leaves = Vec::new();
            let mut dist = 0.0;
            let mut rate = 1u64;
            for ((dy, dx), child) in [(0, 0), (0, h), (h, 0), (h, h)].iter().zip(children.iter()) {
                let (ls, cost) = forced_node(src, recon, x + dx, y + dy, depth + 1, child, ctx);
                leaves.extend(ls);
                dist += cost.distortion;
                rate += cost.rate;
            }
            (leaves, RdCost::new(dist, rate, ctx.lambda))
        }
    }
}

/// Encodes with the partition fixed to `forced`; only intra modes are
/// optimized.
pub fn encode_frame_forced(frame: &Frame, qp: Qp, forced: &StructureMap) -> Result<(CodedFrame, Frame)> {
    check_padded(frame)?;
    if forced.width() != frame.width() || forced.height() != frame.height() {
        return Err(Error::invalid("forced structure dimensions mismatch"));
    }
    let ctx = Ctx { qp, lambda: lambda_from_qp(qp) };
    let mut recon = Frame::new(
        frame.width(),
        frame.height(),
        vec![0; (frame.width() * frame.height()) as usize],
    )?;
    let mut leaves = Vec::new();
    for cy in 0..forced.ctus_y() {
        for cx in 0..forced.ctus_x() {
            let (ls, _) = forced_node(
                frame,
                &mut recon,
                cx * CTU_SIZE,
                cy * CTU_SIZE,
                0,
                &forced.ctu(cx, cy).root,
                &ctx,
            );
            leaves.extend(ls);
        }
    }
    Ok((CodedFrame { structure: forced.clone(), leaves, qp }, recon))
}

/// Forced-structure cost of a single region, using `recon_base` for
/// neighboring reference samples. Left/top neighbors precede the region in
/// coding order, so the final reconstruction is the exact context the
/// encoder saw.
pub fn encode_region_forced(
    src: &Frame,
    recon_base: &Frame,
    x: u32,
    y: u32,
    size: u32,
    node: &CtuNode,
    qp: Qp,
) -> Result<RdCost> {
    let depth = match size {
        64 => 0u8,
        32 => 1,
        16 => 2,
        8 => 3,
        _ => return Err(Error::invalid("bad region size")),
    };
    let ctx = Ctx { qp, lambda: lambda_from_qp(qp) };
    let mut recon = recon_base.clone();
    let (_, cost) = forced_node(src, &mut recon, x, y, depth, node, &ctx);
    Ok(cost)
}

/// Decoder-side reconstruction of a coded frame (identical arithmetic to
/// the encoder's commit path).
pub fn reconstruct_frame(coded: &CodedFrame) -> Result<Frame> {
    let w = coded.structure.width();
    let h = coded.structure.height();
    let mut recon = Frame::new(w, h, vec![0; (w * h) as usize])?;
    let scan = zigzag_scan(&coded.structure, 0, true);
    if scan.len() != coded.leaves.len() {
        return Err(Error::format("leaf count does not match structure"));
    }
    for (cu, leaf) in scan.iter().zip(&coded.leaves) {
        let pus: &[(u32, u32, u32)] = if leaf.kind == CuKind::S8_NxN {
            &[(0, 0, 4), (4, 0, 4), (0, 4, 4), (4, 4, 4)]
        } else {
            &[(0, 0, 0)]
        };
        for (p, &(dx, dy, nn)) in pus.iter().enumerate() {
            let n = if nn == 0 { cu.size } else { nn };
            let (px, py) = (cu.x + dx, cu.y + dy);
            let pred = predict(&recon, px, py, n, leaf.modes[p]);
            let res = dct_inverse(&dequantize(&leaf.levels[p], coded.qp), n as usize);
            for j in 0..n {
                for i in 0..n {
                    let idx = (j * n + i) as usize;
                    let v = (pred[idx] as f64 + res[idx]).round().clamp(0.0, 255.0) as u8;
                    recon.set_sample(px + i, py + j, v);
                }
            }
        }
    }
    Ok(recon)
}

const STREAM_MAGIC: &[u8; 4] = b"CUSG";
const STREAM_VERSION: u8 = 1;

/// Serializes coded frames: magic "CUSG", version, width/height (u16 BE),
/// qp, frame count (u16 BE); per frame, per CTU pre-order split bits with
/// leaf payloads inline (PU bit at depth 3, 2-bit mode per PU, coefficients
/// as signed exp-Golomb in raster order), byte-aligned per frame.
pub fn write_video(frames: &[CodedFrame]) -> Result<Vec<u8>> {
    let first = frames.first().ok_or_else(|| Error::invalid("no frames"))?;
    let (w, h, qp) = (first.structure.width(), first.structure.height(), first.qp);
    if frames.len() > u16::MAX as usize {
        return Err(Error::invalid("too many frames"));
    }
    let mut out = Vec::new();
    out.extend_from_slice(STREAM_MAGIC);
    out.push(STREAM_VERSION);
    out.extend_from_slice(&(w as u16).to_be_bytes());
    out.extend_from_slice(&(h as u16).to_be_bytes());
    out.push(qp.value());
    out.extend_from_slice(&(frames.len() as u16).to_be_bytes());
    for coded in frames {
        if coded.structure.width() != w || coded.structure.height() != h || coded.qp != qp {
            return Err(Error::invalid("heterogeneous frames in one stream"));
        }
        let mut writer = BitWriter::new();
        let mut leaves = coded.leaves.iter();
        for tree in coded.structure.ctus() {
            write_coded_node(&tree.root, 0, &mut leaves, &mut writer)?;
        }
        if leaves.next().is_some() {
            return Err(Error::invalid("leaf count does not match structure"));
        }
        out.extend_from_slice(&writer.into_bytes());
    }
    Ok(out)
}

fn write_coded_node<'a>(
    node: &CtuNode,
    depth: u8,
    leaves: &mut impl Iterator<Item = &'a LeafCoded>,
    w: &mut BitWriter,
) -> Result<()> {
    match node {
        CtuNode::Leaf(kind) => {
            let leaf = leaves
                .next()
                .ok_or_else(|| Error::invalid("leaf count does not match structure"))?;
            if leaf.kind != *kind {
                return Err(Error::invalid("leaf kind does not match structure"));
            }
            if depth < 3 {
                w.write_bit(false);
            } else {
                w.write_bit(*kind == CuKind::S8_NxN);
            }
            for (mode, levels) in leaf.modes.iter().zip(&leaf.levels) {
                w.write_bits(mode.index() as u64, 2);
                for &l in levels {
                    w.write_se(l as i64);
                }
            }
            Ok(())
        }
        CtuNode::Split(children) => {
            w.write_bit(true);
            for c in children.iter() {
                write_coded_node(c, depth + 1, leaves, w)?;
            }
            Ok(())
        }
    }
}

fn read_coded_node(
    r: &mut BitReader,
    depth: u8,
    leaves: &mut Vec<LeafCoded>,
) -> Result<CtuNode> {
    let bit = r.read_bit()?;
    if depth < 3 && bit {
        return Ok(CtuNode::Split(Box::new([
            read_coded_node(r, depth + 1, leaves)?,
            read_coded_node(r, depth + 1, leaves)?,
            read_coded_node(r, depth + 1, leaves)?,
            read_coded_node(r, depth + 1, leaves)?,
        ])));
    }
    let kind = CuKind::for_depth(depth, depth == 3 && bit);
    let n_pus = if kind == CuKind::S8_NxN { 4 } else { 1 };
    let pu_size = if kind == CuKind::S8_NxN { 4 } else { kind.size() };
    let mut modes = Vec::with_capacity(n_pus);
    let mut levels = Vec::with_capacity(n_pus);
    for _ in 0..n_pus {
        let mode = Mode::from_index(r.read_bits(2)? as u8)
            .ok_or_else(|| Error::format("illegal mode index"))?;
        let mut lv = Vec::with_capacity((pu_size * pu_size) as usize);
        for _ in 0..pu_size * pu_size {
            let v = r.read_se()?;
            let v32 = i32::try_from(v).map_err(|_| Error::format("coefficient overflow"))?;
            lv.push(v32);
        }
        modes.push(mode);
        levels.push(lv);
    }
    leaves.push(LeafCoded { kind, modes, levels, cost: RdCost { distortion: 0.0, rate: 0, j: 0.0 } });
    Ok(CtuNode::Leaf(kind))
}

/// Parses a CUSG stream back into coded frames (costs are not recovered).
pub fn read_video(bytes: &[u8]) -> Result<Vec<CodedFrame>> {
    if bytes.len() < 12 {
        return Err(Error::format("truncated header"));
    }
    if &bytes[..4] != STREAM_MAGIC {
        return Err(Error::format("bad magic"));
    }
    if bytes[4] != STREAM_VERSION {
        return Err(Error::format("unsupported version"));
    }
    let w = u16::from_be_bytes([bytes[5], bytes[6]]) as u32;
    let h = u16::from_be_bytes([bytes[7], bytes[8]]) as u32;
    let qp = Qp::new(bytes[9]).map_err(|_| Error::format("illegal qp"))?;
    let count = u16::from_be_bytes([bytes[10], bytes[11]]) as usize;
    if w == 0 || h == 0 || w % CTU_SIZE != 0 || h % CTU_SIZE != 0 {
        return Err(Error::format("illegal dimensions"));
    }
    let n_ctus = (w / CTU_SIZE) * (h / CTU_SIZE);
    let mut frames = Vec::with_capacity(count);
    let mut offset = 12usize;
    for _ in 0..count {
        let mut r = BitReader::new(&bytes[offset..]);
        let mut leaves = Vec::new();
        let mut ctus = Vec::with_capacity(n_ctus as usize);
        for _ in 0..n_ctus {
            ctus.push(CtuTree { root: read_coded_node(&mut r, 0, &mut leaves)? });
        }
        r.align();
        offset += r.byte_pos();
        frames.push(CodedFrame { structure: StructureMap::new(w, h, ctus)?, leaves, qp });
    }
    Ok(frames)
}

/// Decodes a stream to per-frame structure maps and reconstructions.
pub fn decode_video(bytes: &[u8]) -> Result<Vec<(StructureMap, Frame)>> {
    read_video(bytes)?
        .into_iter()
        .map(|coded| {
            let recon = reconstruct_frame(&coded)?;
            Ok((coded.structure, recon))
        })
        .collect()
}

/// Per-CU cost margins against one-depth alternative structures.
///
/// Alternatives per CU: split one level (PU flip for 8x8 2Nx2N, merge to
/// 2Nx2N for 8x8 NxN) and, when all siblings are leaves, merging the parent
/// into a single leaf. `coded` must come from the encoder (leaf costs
/// present).
pub fn rdo_margins(src: &Frame, coded: &CodedFrame) -> Result<Vec<RdoMargin>> {
    let recon = reconstruct_frame(coded)?;
    let lambda = lambda_from_qp(coded.qp);
    let scan = zigzag_scan(&coded.structure, 0, true);
    if scan.len() != coded.leaves.len() {
        return Err(Error::invalid("coded frame inconsistent with structure"));
    }
    // leaf lookup by top-left corner + size
    let by_rect: HashMap<(u32, u32, u32), usize> = scan
        .iter()
        .enumerate()
        .map(|(i, cu)| ((cu.x, cu.y, cu.size), i))
        .collect();

    let mut out = Vec::new();
    let mut k = 0usize;
    for (i, cu) in scan.iter().enumerate() {
        if cu.kind == CuKind::S64 {
            continue;
        }
        let leaf = &coded.leaves[i];
        let j_opt = leaf.cost.j;
        let mut delta = f64::INFINITY;

        // one-depth split (or PU flip)
        let alt = match cu.kind {
            CuKind::S8_NxN => CtuNode::Leaf(CuKind::S8_2Nx2N),
            kind => CtuNode::split_one_level(kind)?,
        };
        let j_alt = encode_region_forced(src, &recon, cu.x, cu.y, cu.size, &alt, coded.qp)?.j;
        delta = delta.min(j_alt - j_opt);

        // merge to parent leaf, only when the three siblings are leaves
        let psize = cu.size * 2;
        if psize <= CTU_SIZE {
            let px = cu.x / psize * psize;
            let py = cu.y / psize * psize;
            let half = cu.size;
            let siblings = [
                (px, py),
                (px + half, py),
                (px, py + half),
                (px + half, py + half),
            ];
            let idxs: Option<Vec<usize>> = siblings
                .iter()
                .map(|&(sx, sy)| by_rect.get(&(sx, sy, cu.size)).copied())
                .collect();
            if let Some(idxs) = idxs {
                let j_children: f64 = idxs.iter().map(|&si| coded.leaves[si].cost.j).sum();
                let j_cur_parent = j_children + lambda; // the split flag bit
                let parent_kind = CuKind::for_depth(cu.kind.tree_depth() - 1, false);
                let j_parent = encode_region_forced(
                    src,
                    &recon,
                    px,
                    py,
                    psize,
                    &CtuNode::Leaf(parent_kind),
                    coded.qp,
                )?
                .j;
                delta = delta.min(j_parent - j_cur_parent);
            }
        }

        let epsilon = sse_region(src, &recon, cu.x, cu.y, cu.size).sqrt();
        out.push(RdoMargin {
            cu: CuRef { k, ..*cu },
            j_opt,
            delta,
            epsilon,
        });
        k += 1;
    }
    Ok(out)
}
