//! CU block structures: quad-tree representation, z-order scan, depth
//! arithmetic (MD/MDD), region queries, and the side-information format.

use crate::bits::{BitReader, BitWriter};
use crate::error::{Error, Result};
use crate::frame_io::CTU_SIZE;

/// Leaf kind. At 8x8 the prediction-unit layout distinguishes one 8x8 PU
/// (2Nx2N) from four 4x4 PUs (NxN).
#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash)]
#[allow(non_camel_case_types)]
pub enum CuKind {
    S64,
    S32,
    S16,
    S8_2Nx2N,
    S8_NxN,
}

impl CuKind {
    pub fn size(self) -> u32 {
        match self {
            CuKind::S64 => 64,
            CuKind::S32 => 32,
            CuKind::S16 => 16,
            CuKind::S8_2Nx2N | CuKind::S8_NxN => 8,
        }
    }

    /// Quad-tree depth of the leaf node holding this kind.
    pub fn tree_depth(self) -> u8 {
        match self {
            CuKind::S64 => 0,
            CuKind::S32 => 1,
            CuKind::S16 => 2,
            CuKind::S8_2Nx2N | CuKind::S8_NxN => 3,
        }
    }

    /// The leaf kind sitting at a given tree depth (8x8 defaults to 2Nx2N).
    pub fn for_depth(depth: u8, nxn: bool) -> CuKind {
        match depth {
            0 => CuKind::S64,
            1 => CuKind::S32,
            2 => CuKind::S16,
            3 => {
                if nxn {
                    CuKind::S8_NxN
                } else {
                    CuKind::S8_2Nx2N
                }
            }
            _ => unreachable!("depth beyond 3"),
        }
    }
}

/// Maximum depth of a carrier CU: S32 -> 1, S16 -> 2, 8x8 2Nx2N -> 3,
/// 8x8 NxN -> 4. 64x64 CUs are never carriers and are rejected.
pub fn max_depth(kind: CuKind) -> Result<u8> {
    match kind {
        CuKind::S64 => Err(Error::invalid("64x64 CUs are not carriers")),
        CuKind::S32 => Ok(1),
        CuKind::S16 => Ok(2),
        CuKind::S8_2Nx2N => Ok(3),
        CuKind::S8_NxN => Ok(4),
    }
}

/// Depth used for region queries; S64 counts as 0.
pub(crate) fn md_any(kind: CuKind) -> u8 {
    match kind {
        CuKind::S64 => 0,
        CuKind::S32 => 1,
        CuKind::S16 => 2,
        CuKind::S8_2Nx2N => 3,
        CuKind::S8_NxN => 4,
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum CtuNode {
    Leaf(CuKind),
    /// Children in order top-left, top-right, bottom-left, bottom-right.
    Split(Box<[CtuNode; 4]>),
}

impl CtuNode {
    fn validate(&self, depth: u8) -> Result<()> {
        match self {
            CtuNode::Leaf(kind) => {
                if kind.tree_depth() != depth {
                    return Err(Error::invalid(format!(
                        "leaf kind {kind:?} inconsistent with depth {depth}"
                    )));
                }
                Ok(())
            }
            CtuNode::Split(children) => {
                if depth >= 3 {
                    return Err(Error::invalid("split below depth 3"));
                }
                children.iter().try_for_each(|c| c.validate(depth + 1))
            }
        }
    }

    /// Fully populated subtree of 8x8 2Nx2N leaves below `depth`.
    pub fn all_8x8(depth: u8) -> CtuNode {
        if depth == 3 {
            CtuNode::Leaf(CuKind::S8_2Nx2N)
        } else {
            CtuNode::Split(Box::new([
                CtuNode::all_8x8(depth + 1),
                CtuNode::all_8x8(depth + 1),
                CtuNode::all_8x8(depth + 1),
                CtuNode::all_8x8(depth + 1),
            ]))
        }
    }

    /// Splits a leaf one level down: S32 -> 4x S16, S16 -> 4x S8 2Nx2N,
    /// S8 2Nx2N -> S8 NxN.
    pub fn split_one_level(kind: CuKind) -> Result<CtuNode> {
        match kind {
            CuKind::S64 => Ok(CtuNode::Split(Box::new([
                CtuNode::Leaf(CuKind::S32),
                CtuNode::Leaf(CuKind::S32),
                CtuNode::Leaf(CuKind::S32),
                CtuNode::Leaf(CuKind::S32),
            ]))),
            CuKind::S32 => Ok(CtuNode::Split(Box::new([
                CtuNode::Leaf(CuKind::S16),
                CtuNode::Leaf(CuKind::S16),
                CtuNode::Leaf(CuKind::S16),
                CtuNode::Leaf(CuKind::S16),
            ]))),
            CuKind::S16 => Ok(CtuNode::Split(Box::new([
                CtuNode::Leaf(CuKind::S8_2Nx2N),
                CtuNode::Leaf(CuKind::S8_2Nx2N),
                CtuNode::Leaf(CuKind::S8_2Nx2N),
                CtuNode::Leaf(CuKind::S8_2Nx2N),
            ]))),
            CuKind::S8_2Nx2N => Ok(CtuNode::Leaf(CuKind::S8_NxN)),
            CuKind::S8_NxN => Err(Error::invalid("S8 NxN cannot split further")),
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct CtuTree {
    pub root: CtuNode,
}

impl CtuTree {
    pub fn leaf(kind: CuKind) -> Self {
        Self { root: CtuNode::Leaf(kind) }
    }
}

/// Per-frame forest of CTU quad-trees, CTUs in raster order.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct StructureMap {
    width: u32,
    height: u32,
    ctus: Vec<CtuTree>,
}

impl StructureMap {
    pub fn new(width: u32, height: u32, ctus: Vec<CtuTree>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("zero dimensions"));
        }
        let expect = (width.div_ceil(CTU_SIZE) * height.div_ceil(CTU_SIZE)) as usize;
        if ctus.len() != expect {
            return Err(Error::invalid(format!(
                "expected {expect} CTUs for {width}x{height}, got {}",
                ctus.len()
            )));
        }
        for t in &ctus {
            t.root.validate(0)?;
        }
        Ok(Self { width, height, ctus })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn ctus_x(&self) -> u32 {
        self.width.div_ceil(CTU_SIZE)
    }

    pub fn ctus_y(&self) -> u32 {
        self.height.div_ceil(CTU_SIZE)
    }

    pub fn ctus(&self) -> &[CtuTree] {
        &self.ctus
    }

    pub fn ctu(&self, cx: u32, cy: u32) -> &CtuTree {
        &self.ctus[(cy * self.ctus_x() + cx) as usize]
    }

    /// Replaces the node covering exactly `(x, y, size)`.
    ///
    /// The rect must coincide with an existing node (leaf or split root);
    /// the replacement must be valid at that depth.
    pub fn replace_region(&mut self, x: u32, y: u32, size: u32, node: CtuNode) -> Result<()> {
        if x % size != 0 || y % size != 0 || x + size > self.width || y + size > self.height {
            return Err(Error::invalid("unaligned or out-of-bounds rect"));
        }
        let depth = match size {
            64 => 0u8,
            32 => 1,
            16 => 2,
            8 => 3,
            _ => return Err(Error::invalid("bad rect size")),
        };
        node.validate(depth)?;
        let cx = x / CTU_SIZE;
        let cy = y / CTU_SIZE;
        let idx = (cy * self.ctus_x() + cx) as usize;
        let mut cur = &mut self.ctus[idx].root;
        let (mut nx, mut ny, mut nsize) = (cx * CTU_SIZE, cy * CTU_SIZE, CTU_SIZE);
        while nsize > size {
            match cur {
                CtuNode::Leaf(_) => {
                    return Err(Error::invalid("rect lies inside a larger leaf"))
                }
                CtuNode::Split(children) => {
                    let half = nsize / 2;
                    let right = x >= nx + half;
                    let down = y >= ny + half;
                    let child = (down as usize) * 2 + right as usize;
                    if right {
                        nx += half;
                    }
                    if down {
                        ny += half;
                    }
                    nsize = half;
                    cur = &mut children[child];
                }
            }
        }
        *cur = node;
        Ok(())
    }
}

/// A CU leaf with its frame position and scan index.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CuRef {
    pub frame: usize,
    pub x: u32,
    pub y: u32,
    pub size: u32,
    pub kind: CuKind,
    /// 0-based position in the scan that produced this reference.
    pub k: usize,
}

/// Visits CTUs in raster order and leaves depth-first in z-order
/// (TL, TR, BL, BR). With `include64 == false`, S64 leaves are skipped and
/// scan positions are assigned over the retained leaves.
pub fn zigzag_scan(map: &StructureMap, frame: usize, include64: bool) -> Vec<CuRef> {
    let mut out = Vec::new();
    for cy in 0..map.ctus_y() {
        for cx in 0..map.ctus_x() {
            walk_leaves(
                &map.ctu(cx, cy).root,
                cx * CTU_SIZE,
                cy * CTU_SIZE,
                CTU_SIZE,
                &mut |x, y, size, kind| {
                    if include64 || kind != CuKind::S64 {
                        let k = out.len();
                        out.push(CuRef { frame, x, y, size, kind, k });
                    }
                },
            );
        }
    }
    out
}

fn walk_leaves(node: &CtuNode, x: u32, y: u32, size: u32, f: &mut impl FnMut(u32, u32, u32, CuKind)) {
    match node {
        CtuNode::Leaf(kind) => f(x, y, size, *kind),
        CtuNode::Split(children) => {
            let h = size / 2;
            walk_leaves(&children[0], x, y, h, f);
            walk_leaves(&children[1], x + h, y, h, f);
            walk_leaves(&children[2], x, y + h, h, f);
            walk_leaves(&children[3], x + h, y + h, h, f);
        }
    }
}

/// Maximum leaf depth over all leaves intersecting the rect (S64 counts 0,
/// S8 NxN counts 4). A rect strictly inside a larger leaf returns that
/// leaf's depth.
pub fn region_max_depth(map: &StructureMap, x: u32, y: u32, size: u32) -> Result<u8> {
    if size == 0
        || x % size != 0
        || y % size != 0
        || x + size > map.width()
        || y + size > map.height()
    {
        return Err(Error::invalid("unaligned rect"));
    }
    let mut best = 0u8;
    let cx0 = x / CTU_SIZE;
    let cy0 = y / CTU_SIZE;
    let cx1 = (x + size - 1) / CTU_SIZE;
    let cy1 = (y + size - 1) / CTU_SIZE;
    for cy in cy0..=cy1 {
        for cx in cx0..=cx1 {
            region_walk(
                &map.ctu(cx, cy).root,
                cx * CTU_SIZE,
                cy * CTU_SIZE,
                CTU_SIZE,
                x,
                y,
                size,
                &mut best,
            );
        }
    }
    Ok(best)
}

#[allow(clippy::too_many_arguments)]
fn region_walk(node: &CtuNode, nx: u32, ny: u32, nsize: u32, x: u32, y: u32, size: u32, best: &mut u8) {
    if nx >= x + size || ny >= y + size || nx + nsize <= x || ny + nsize <= y {
        return;
    }
    match node {
        CtuNode::Leaf(kind) => *best = (*best).max(md_any(*kind)),
        CtuNode::Split(children) => {
            let h = nsize / 2;
            region_walk(&children[0], nx, ny, h, x, y, size, best);
            region_walk(&children[1], nx + h, ny, h, x, y, size, best);
            region_walk(&children[2], nx, ny + h, h, x, y, size, best);
            region_walk(&children[3], nx + h, ny + h, h, x, y, size, best);
        }
    }
}

/// Maximum depth difference of a CU against the recompressed structure.
pub fn mdd(orig: &CuRef, recompressed: &StructureMap) -> Result<u8> {
    let md = max_depth(orig.kind)?;
    let rec = region_max_depth(recompressed, orig.x, orig.y, orig.size)?;
    Ok(md.abs_diff(rec))
}

/// Contrast function rho: 1 iff the rect that is a `kind` leaf in `a` is
/// exactly one leaf of the same kind in `b`.
pub fn structure_equal_region(
    a: &StructureMap,
    b: &StructureMap,
    x: u32,
    y: u32,
    kind: CuKind,
) -> u8 {
    debug_assert!(region_is_leaf(a, x, y, kind), "rect is not a {kind:?} leaf in a");
    let _ = a;
    region_is_leaf(b, x, y, kind) as u8
}

fn region_is_leaf(map: &StructureMap, x: u32, y: u32, kind: CuKind) -> bool {
    let size = kind.size();
    if x % size != 0 || y % size != 0 || x + size > map.width() || y + size > map.height() {
        return false;
    }
    let mut node = &map.ctu(x / CTU_SIZE, y / CTU_SIZE).root;
    let (mut nx, mut ny, mut nsize) = (x / CTU_SIZE * CTU_SIZE, y / CTU_SIZE * CTU_SIZE, CTU_SIZE);
    while nsize > size {
        match node {
            CtuNode::Leaf(_) => return false,
            CtuNode::Split(children) => {
                let half = nsize / 2;
                let right = x >= nx + half;
                let down = y >= ny + half;
                node = &children[(down as usize) * 2 + right as usize];
                if right {
                    nx += half;
                }
                if down {
                    ny += half;
                }
                nsize = half;
            }
        }
    }
    matches!(node, CtuNode::Leaf(k) if *k == kind)
}

const SIDE_INFO_MAGIC: &[u8; 4] = b"CUSI";
const SIDE_INFO_VERSION: u8 = 1;

/// Canonical side-information bytes: magic "CUSI", version, width/height
/// (u16 big-endian), then per CTU a bit-packed pre-order stream of split
/// bits (depths 0-2) and PU bits (depth 3), padded to a byte boundary.
pub fn serialize_structure(map: &StructureMap) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(SIDE_INFO_MAGIC);
    out.push(SIDE_INFO_VERSION);
    out.extend_from_slice(&(map.width() as u16).to_be_bytes());
    out.extend_from_slice(&(map.height() as u16).to_be_bytes());
    let mut w = BitWriter::new();
    for tree in map.ctus() {
        write_node_bits(&tree.root, 0, &mut w);
    }
    out.extend_from_slice(&w.into_bytes());
    out
}

pub(crate) fn write_node_bits(node: &CtuNode, depth: u8, w: &mut BitWriter) {
    match node {
        CtuNode::Leaf(kind) => {
            if depth < 3 {
                w.write_bit(false);
            } else {
                w.write_bit(*kind == CuKind::S8_NxN);
            }
        }
        CtuNode::Split(children) => {
            w.write_bit(true);
            for c in children.iter() {
                write_node_bits(c, depth + 1, w);
            }
        }
    }
}

pub(crate) fn read_node_bits(r: &mut BitReader, depth: u8) -> Result<CtuNode> {
    let bit = r.read_bit()?;
    if depth < 3 {
        if bit {
            Ok(CtuNode::Split(Box::new([
                read_node_bits(r, depth + 1)?,
                read_node_bits(r, depth + 1)?,
                read_node_bits(r, depth + 1)?,
                read_node_bits(r, depth + 1)?,
            ])))
        } else {
            Ok(CtuNode::Leaf(CuKind::for_depth(depth, false)))
        }
    } else {
        Ok(CtuNode::Leaf(CuKind::for_depth(3, bit)))
    }
}

/// Parses one serialized structure, returning it plus the bytes consumed
/// (multiple maps may be concatenated for multi-frame side info).
pub fn parse_structure_prefix(bytes: &[u8]) -> Result<(StructureMap, usize)> {
    if bytes.len() < 9 {
        return Err(Error::format("side info: truncated header"));
    }
    if &bytes[..4] != SIDE_INFO_MAGIC {
        return Err(Error::format("side info: bad magic"));
    }
    if bytes[4] != SIDE_INFO_VERSION {
        return Err(Error::format("side info: unsupported version"));
    }
    let width = u16::from_be_bytes([bytes[5], bytes[6]]) as u32;
    let height = u16::from_be_bytes([bytes[7], bytes[8]]) as u32;
    let n_ctus = width.div_ceil(CTU_SIZE) * height.div_ceil(CTU_SIZE);
    let mut r = BitReader::new(&bytes[9..]);
    let mut ctus = Vec::with_capacity(n_ctus as usize);
    for _ in 0..n_ctus {
        ctus.push(CtuTree { root: read_node_bits(&mut r, 0)? });
    }
    let consumed = 9 + r.byte_pos();
    Ok((StructureMap::new(width, height, ctus)?, consumed))
}

pub fn parse_structure(bytes: &[u8]) -> Result<StructureMap> {
    let (map, _) = parse_structure_prefix(bytes)?;
    Ok(map)
}

#[cfg(test)]
pub(crate) fn random_map(width: u32, height: u32, seed: u64) -> StructureMap {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    fn gen(rng: &mut impl rand::Rng, depth: u8) -> CtuNode {
        if depth < 3 && rng.gen_bool(0.5) {
            CtuNode::Split(Box::new([
                gen(rng, depth + 1),
                gen(rng, depth + 1),
                gen(rng, depth + 1),
                gen(rng, depth + 1),
            ]))
        } else {
            CtuNode::Leaf(CuKind::for_depth(depth, depth == 3 && rng.gen_bool(0.5)))
        }
    }
    let n = (width.div_ceil(CTU_SIZE) * height.div_ceil(CTU_SIZE)) as usize;
    let ctus = (0..n).map(|_| CtuTree { root: gen(&mut rng, 0) }).collect();
    StructureMap::new(width, height, ctus).unwrap()
}
