//! Binary model file.
//!
//! Layout, all little-endian:
//!
//! ```text
//! "CCCF"  u16 version
//! repeated sections: [u8; 4] tag, u64 payload length, payload
//! ```
//!
//! | tag    | payload |
//! |--------|---------|
//! | `HEAD` | m, n, G, r, latent rank (u64); training configuration |
//! | `UCOD` | user codes, component-major, row-major u64 words |
//! | `ICOD` | item codes, same layout |
//! | `UWGT` | u64 count, then (row u32, component u16, value f64) records |
//! | `IWGT` | same for items |
//! | `ANCH` | user anchors then item anchors, f64 |
//! | `LATN` | optional latent factors, users then items, f64 |
//! | `UIDS` | optional user id tokens (u32 length + UTF-8) |
//! | `IIDS` | optional item id tokens |
//! | `TRNX` | optional per-user excluded item lists (u32 count + u32 items) |
//!
//! Readers skip sections whose tag they do not know.

use std::io::{Read, Write};

use crate::coding::{CccfModel, PackedCodes};
use crate::error::{CccfError, Result};
use crate::mf::LatentFactors;
use crate::solver::{LinearTerm, TrainConfig};
use crate::weights::{AnchorSet, DistanceScale, WeightMode, WeightVectors};

pub const MAGIC: &[u8; 4] = b"CCCF";
pub const VERSION: u16 = 1;

/// Everything stored in a model file.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub model: CccfModel,
    pub latents: Option<LatentFactors>,
    pub user_ids: Vec<String>,
    pub item_ids: Vec<String>,
    pub exclusions: Option<Vec<Vec<u32>>>,
}

impl ModelBundle {
    pub fn new(model: CccfModel) -> Self {
        ModelBundle {
            model,
            latents: None,
            user_ids: Vec::new(),
            item_ids: Vec::new(),
            exclusions: None,
        }
    }

    pub fn user_index(&self, token: &str) -> Option<usize> {
        self.user_ids.iter().position(|u| u == token)
    }
}

struct Buf(Vec<u8>);

impl Buf {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u16(&mut self, v: u16) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s(&mut self, vs: &[f64]) {
        vs.iter().for_each(|&v| self.f64(v));
    }
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> Cursor<'a> {
    fn new(data: &'a [u8], what: &'static str) -> Self {
        Cursor { data, pos: 0, what }
    }

    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(len).filter(|&e| e <= self.data.len());
        let end =
            end.ok_or_else(|| CccfError::Format(format!("section {} is truncated", self.what)))?;
        let out = &self.data[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?)
            .map_err(|_| CccfError::Format(format!("size overflow in {}", self.what)))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64s(&mut self, count: usize) -> Result<Vec<f64>> {
        (0..count).map(|_| self.f64()).collect()
    }
    fn finish(&self) -> Result<()> {
        if self.pos != self.data.len() {
            return Err(CccfError::Format(format!(
                "section {} has trailing bytes",
                self.what
            )));
        }
        Ok(())
    }
}

fn section(out: &mut Vec<u8>, tag: &[u8; 4], payload: Buf) {
    out.extend_from_slice(tag);
    out.extend_from_slice(&(payload.0.len() as u64).to_le_bytes());
    out.extend_from_slice(&payload.0);
}

fn write_config(b: &mut Buf, c: &TrainConfig) {
    b.u64(c.g as u64);
    b.u64(c.r as u64);
    b.f64s(&[c.alpha1, c.alpha2, c.alpha3, c.alpha4, c.h]);
    b.u64(c.max_outer as u64);
    b.u64(c.max_dcd_sweeps as u64);
    b.f64(c.tol);
    b.u64(c.seed);
    b.u8(match c.weight_mode {
        WeightMode::Kernel => 0,
        WeightMode::Unit => 1,
    });
    b.u8(match c.distance_scale {
        DistanceScale::Radians => 0,
        DistanceScale::Normalized => 1,
    });
    b.u8(match c.linear_term {
        LinearTerm::Weighted => 0,
        LinearTerm::AsPrinted => 1,
    });
    b.u64(c.init_rounds as u64);
    b.u64(c.init_gd_steps as u64);
    b.u64(c.int_scale as u64);
}

fn read_config(c: &mut Cursor<'_>) -> Result<TrainConfig> {
    let bad = |what: &str| CccfError::Format(format!("unknown {what} code"));
    let g = c.usize()?;
    let r = c.usize()?;
    let [alpha1, alpha2, alpha3, alpha4, h] = [c.f64()?, c.f64()?, c.f64()?, c.f64()?, c.f64()?];
    let max_outer = c.usize()?;
    let max_dcd_sweeps = c.usize()?;
    let tol = c.f64()?;
    let seed = c.u64()?;
    let weight_mode = match c.u8()? {
        0 => WeightMode::Kernel,
        1 => WeightMode::Unit,
        _ => return Err(bad("weight mode")),
    };
    let distance_scale = match c.u8()? {
        0 => DistanceScale::Radians,
        1 => DistanceScale::Normalized,
        _ => return Err(bad("distance scale")),
    };
    let linear_term = match c.u8()? {
        0 => LinearTerm::Weighted,
        1 => LinearTerm::AsPrinted,
        _ => return Err(bad("linear term")),
    };
    let init_rounds = c.usize()?;
    let init_gd_steps = c.usize()?;
    let int_scale = c.u64()? as i64;
    Ok(TrainConfig {
        g,
        r,
        alpha1,
        alpha2,
        alpha3,
        alpha4,
        h,
        max_outer,
        max_dcd_sweeps,
        tol,
        seed,
        weight_mode,
        distance_scale,
        linear_term,
        init_rounds,
        init_gd_steps,
        int_scale,
    })
}

fn write_codes(codes: &[PackedCodes]) -> Buf {
    let mut b = Buf(Vec::new());
    for c in codes {
        c.words().iter().for_each(|&w| b.u64(w));
    }
    b
}

fn read_codes(
    data: &[u8],
    g: usize,
    rows: usize,
    r: usize,
    what: &'static str,
) -> Result<Vec<PackedCodes>> {
    let mut c = Cursor::new(data, what);
    let per = rows * r.div_ceil(64);
    let mut out = Vec::with_capacity(g);
    for _ in 0..g {
        let words = (0..per).map(|_| c.u64()).collect::<Result<Vec<u64>>>()?;
        let codes = PackedCodes::from_words(rows, r, words)
            .ok_or_else(|| CccfError::Format(format!("{what}: padding bits set")))?;
        out.push(codes);
    }
    c.finish()?;
    Ok(out)
}

fn write_weights(dense: &[f64], g: usize) -> Buf {
    let mut b = Buf(Vec::new());
    let nonzero: Vec<(usize, f64)> = dense
        .iter()
        .copied()
        .enumerate()
        .filter(|&(_, w)| w != 0.0)
        .collect();
    b.u64(nonzero.len() as u64);
    for (pos, w) in nonzero {
        b.u32((pos / g) as u32);
        b.u16((pos % g) as u16);
        b.f64(w);
    }
    b
}

fn read_weights(data: &[u8], rows: usize, g: usize, what: &'static str) -> Result<Vec<f64>> {
    let mut c = Cursor::new(data, what);
    let count = c.usize()?;
    let mut dense = vec![0.0; rows * g];
    for _ in 0..count {
        let row = c.u32()? as usize;
        let k = c.u16()? as usize;
        let w = c.f64()?;
        if row >= rows || k >= g {
            return Err(CccfError::Format(format!(
                "{what}: record ({row}, {k}) out of range"
            )));
        }
        dense[row * g + k] = w;
    }
    c.finish()?;
    Ok(dense)
}

fn write_tokens(tokens: &[String]) -> Buf {
    let mut b = Buf(Vec::new());
    b.u64(tokens.len() as u64);
    for t in tokens {
        b.u32(t.len() as u32);
        b.0.extend_from_slice(t.as_bytes());
    }
    b
}

fn read_tokens(data: &[u8], what: &'static str) -> Result<Vec<String>> {
    let mut c = Cursor::new(data, what);
    let count = c.usize()?;
    let mut out = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        let len = c.u32()? as usize;
        let bytes = c.take(len)?;
        out.push(
            String::from_utf8(bytes.to_vec())
                .map_err(|_| CccfError::Format(format!("{what}: invalid UTF-8")))?,
        );
    }
    c.finish()?;
    Ok(out)
}

/// Serializes a bundle to bytes.
pub fn to_bytes(bundle: &ModelBundle) -> Vec<u8> {
    let model = &bundle.model;
    let (m, n, g, r) = (model.m(), model.n(), model.g(), model.r());
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());

    let mut head = Buf(Vec::new());
    for v in [m, n, g, r, model.anchors.dim()] {
        head.u64(v as u64);
    }
    head.f64(model.weights.h());
    write_config(&mut head, &model.config);
    section(&mut out, b"HEAD", head);
    section(&mut out, b"UCOD", write_codes(&model.user_codes));
    section(&mut out, b"ICOD", write_codes(&model.item_codes));
    section(
        &mut out,
        b"UWGT",
        write_weights(model.weights.user_data(), g),
    );
    section(
        &mut out,
        b"IWGT",
        write_weights(model.weights.item_data(), g),
    );
    let mut anch = Buf(Vec::new());
    anch.f64s(model.anchors.user_data());
    anch.f64s(model.anchors.item_data());
    section(&mut out, b"ANCH", anch);
    if let Some(lat) = &bundle.latents {
        let mut b = Buf(Vec::new());
        b.u64(lat.rank() as u64);
        b.u64(lat.m() as u64);
        b.u64(lat.n() as u64);
        b.f64s(lat.user_data());
        b.f64s(lat.item_data());
        section(&mut out, b"LATN", b);
    }
    if !bundle.user_ids.is_empty() {
        section(&mut out, b"UIDS", write_tokens(&bundle.user_ids));
    }
    if !bundle.item_ids.is_empty() {
        section(&mut out, b"IIDS", write_tokens(&bundle.item_ids));
    }
    if let Some(ex) = &bundle.exclusions {
        let mut b = Buf(Vec::new());
        b.u64(ex.len() as u64);
        for list in ex {
            b.u32(list.len() as u32);
            list.iter().for_each(|&j| b.u32(j));
        }
        section(&mut out, b"TRNX", b);
    }
    out
}

struct Head {
    m: usize,
    n: usize,
    g: usize,
    r: usize,
    dim: usize,
    h: f64,
    config: TrainConfig,
}

/// Parses bytes produced by [`to_bytes`].
pub fn from_bytes(data: &[u8]) -> Result<ModelBundle> {
    let mut c = Cursor::new(data, "preamble");
    if c.take(4)? != MAGIC {
        return Err(CccfError::Format("bad magic".into()));
    }
    let version = c.u16()?;
    if version != VERSION {
        return Err(CccfError::Format(format!("unsupported version {version}")));
    }

    let mut head: Option<Head> = None;
    let mut sections: Vec<([u8; 4], &[u8])> = Vec::new();
    while c.pos < data.len() {
        let tag: [u8; 4] = c.take(4)?.try_into().unwrap();
        let len = c.usize()?;
        let payload = c.take(len)?;
        if &tag == b"HEAD" {
            let mut h = Cursor::new(payload, "HEAD");
            let (m, n, g, r, dim) = (h.usize()?, h.usize()?, h.usize()?, h.usize()?, h.usize()?);
            let hw = h.f64()?;
            let config = read_config(&mut h)?;
            h.finish()?;
            if g == 0 || r == 0 || g > u16::MAX as usize {
                return Err(CccfError::Format(format!("invalid shape G = {g}, r = {r}")));
            }
            head = Some(Head {
                m,
                n,
                g,
                r,
                dim,
                h: hw,
                config,
            });
        } else {
            sections.push((tag, payload));
        }
    }
    let head = head.ok_or_else(|| CccfError::Format("missing HEAD section".into()))?;
    let find = |tag: &[u8; 4]| sections.iter().find(|(t, _)| t == tag).map(|(_, p)| *p);
    let need = |tag: &'static [u8; 4]| {
        find(tag).ok_or_else(|| {
            CccfError::Format(format!("missing {} section", String::from_utf8_lossy(tag)))
        })
    };

    let user_codes = read_codes(need(b"UCOD")?, head.g, head.m, head.r, "UCOD")?;
    let item_codes = read_codes(need(b"ICOD")?, head.g, head.n, head.r, "ICOD")?;
    let uw = read_weights(need(b"UWGT")?, head.m, head.g, "UWGT")?;
    let iw = read_weights(need(b"IWGT")?, head.n, head.g, "IWGT")?;
    let weights =
        WeightVectors::new(head.g, head.h, uw, iw).map_err(|e| CccfError::Format(e.to_string()))?;

    let mut a = Cursor::new(need(b"ANCH")?, "ANCH");
    let au = a.f64s(head.g * head.dim)?;
    let ai = a.f64s(head.g * head.dim)?;
    a.finish()?;
    let anchors =
        AnchorSet::new(head.g, head.dim, au, ai).map_err(|e| CccfError::Format(e.to_string()))?;

    let latents = match find(b"LATN") {
        Some(p) => {
            let mut l = Cursor::new(p, "LATN");
            let (rank, m, n) = (l.usize()?, l.usize()?, l.usize()?);
            let users = l.f64s(m * rank)?;
            let items = l.f64s(n * rank)?;
            l.finish()?;
            Some(
                LatentFactors::new(rank, users, items)
                    .map_err(|e| CccfError::Format(e.to_string()))?,
            )
        }
        None => None,
    };
    let user_ids = find(b"UIDS")
        .map(|p| read_tokens(p, "UIDS"))
        .transpose()?
        .unwrap_or_default();
    let item_ids = find(b"IIDS")
        .map(|p| read_tokens(p, "IIDS"))
        .transpose()?
        .unwrap_or_default();
    let exclusions = match find(b"TRNX") {
        Some(p) => {
            let mut t = Cursor::new(p, "TRNX");
            let rows = t.usize()?;
            let mut lists = Vec::with_capacity(rows.min(1 << 24));
            for _ in 0..rows {
                let len = t.u32()? as usize;
                lists.push((0..len).map(|_| t.u32()).collect::<Result<Vec<u32>>>()?);
            }
            t.finish()?;
            Some(lists)
        }
        None => None,
    };

    Ok(ModelBundle {
        model: CccfModel {
            user_codes,
            item_codes,
            weights,
            anchors,
            config: head.config,
        },
        latents,
        user_ids,
        item_ids,
        exclusions,
    })
}

pub fn save<W: Write>(bundle: &ModelBundle, mut w: W) -> Result<()> {
    w.write_all(&to_bytes(bundle))?;
    w.flush()?;
    Ok(())
}

pub fn load<R: Read>(mut r: R) -> Result<ModelBundle> {
    let mut data = Vec::new();
    r.read_to_end(&mut data)?;
    from_bytes(&data)
}
