//! Binary model files.
//!
//! Layout: `BCYC`, u32 version, u64 payload length, payload, u64 FNV-1a
//! checksum of the payload. All integers and floats are little-endian.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::factor_graph::FactorConfig;
use crate::features::fnv1a64;
use crate::pipeline::ParserModel;
use crate::pruning::{Direction, LengthBoundTable, Pruner};
use crate::sentence::CoarseTagMap;

pub const MAGIC: &[u8; 4] = b"BCYC";
pub const VERSION: u32 = 1;
const HEADER: usize = 4 + 4 + 8;

#[derive(Default)]
struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.0.extend_from_slice(s.as_bytes());
    }
    fn floats(&mut self, xs: &[f64]) {
        self.u64(xs.len() as u64);
        for x in xs {
            self.0.extend_from_slice(&x.to_le_bytes());
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or(Error::Checksum)?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn str(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::Checksum)
    }
    fn floats(&mut self) -> Result<Vec<f64>> {
        let n = usize::try_from(self.u64()?).map_err(|_| Error::Checksum)?;
        let bytes = self.take(n.checked_mul(8).ok_or(Error::Checksum)?)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}

pub fn to_bytes(model: &ParserModel) -> Vec<u8> {
    let mut p = Writer::default();
    p.u32(model.hash_bits());
    p.u8(model.factors.to_bits());
    p.u32(model.t_max as u32);
    p.floats(&model.theta);
    p.u32(model.pruner.hash_bits());
    p.floats(&model.pruner.theta);
    p.u64(model.pruner.bounds.len() as u64);
    for (parent, child, dir, bound) in model.pruner.bounds.iter() {
        p.str(parent);
        p.str(child);
        p.u8(matches!(dir, Direction::Right) as u8);
        p.u64(bound as u64);
    }
    p.u64(model.coarse.len() as u64);
    for (fine, coarse) in model.coarse.iter() {
        p.str(fine);
        p.str(coarse);
    }
    let payload = p.0;
    let mut out = Vec::with_capacity(HEADER + payload.len() + 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(&payload);
    out.extend_from_slice(&fnv1a64(&payload).to_le_bytes());
    out
}

pub fn from_bytes(bytes: &[u8]) -> Result<ParserModel> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(Error::Version("not a model file (bad magic)".into()));
    }
    if bytes.len() < HEADER {
        return Err(Error::Checksum);
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(Error::Version(format!("unsupported model version {version}, expected {VERSION}")));
    }
    let len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
    let len = usize::try_from(len).map_err(|_| Error::Checksum)?;
    if bytes.len() != HEADER.saturating_add(len).saturating_add(8) {
        return Err(Error::Checksum);
    }
    let payload = &bytes[HEADER..HEADER + len];
    let stored = u64::from_le_bytes(bytes[HEADER + len..].try_into().expect("8 bytes"));
    if stored != fnv1a64(payload) {
        return Err(Error::Checksum);
    }

    let mut r = Reader { buf: payload, pos: 0 };
    let bits = r.u32()?;
    let factors = FactorConfig::from_bits(r.u8()?)?;
    let t_max = r.u32()? as usize;
    let theta = r.floats()?;
    let pruner_bits = r.u32()?;
    let pruner_theta = r.floats()?;
    let mut bounds = LengthBoundTable::default();
    for _ in 0..r.u64()? {
        let parent = r.str()?;
        let child = r.str()?;
        let dir = if r.u8()? == 1 { Direction::Right } else { Direction::Left };
        bounds.observe(&parent, &child, dir, r.u64()? as usize);
    }
    let mut coarse = CoarseTagMap::default();
    for _ in 0..r.u64()? {
        let fine = r.str()?;
        coarse.insert(fine, r.str()?);
    }
    if r.pos != payload.len() {
        return Err(Error::Checksum);
    }
    let pruner = Pruner::new(pruner_theta, bounds, pruner_bits)?;
    ParserModel::new(bits, factors, t_max, theta, pruner, coarse)
}

pub fn save_model(model: &ParserModel, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, to_bytes(model))?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ParserModel> {
    from_bytes(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> ParserModel {
        let mut bounds = LengthBoundTable::default();
        bounds.observe("NN", "DT", Direction::Left, 2);
        bounds.observe("<ROOT>", "VB", Direction::Right, 7);
        let mut coarse = CoarseTagMap::default();
        coarse.insert("NNS", "NN");
        let pruner = Pruner::new((0..256).map(|i| i as f64 * -0.25).collect(), bounds, 8).unwrap();
        let theta = (0..1024).map(|i| (i as f64).sin() * 1e-3).collect();
        ParserModel::new(10, FactorConfig::SECOND_ORDER, 3, theta, pruner, coarse).unwrap()
    }

    #[test]
    fn round_trip() {
        let m = model();
        let bytes = to_bytes(&m);
        let back = from_bytes(&bytes).unwrap();
        assert_eq!(back, m);
        assert_eq!(to_bytes(&back), bytes);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.bin");
        save_model(&m, &path).unwrap();
        assert_eq!(load_model(&path).unwrap(), m);
    }

    #[test]
    fn truncated() {
        let bytes = to_bytes(&model());
        for cut in [bytes.len() - 1, bytes.len() / 2, 10] {
            assert!(matches!(from_bytes(&bytes[..cut]), Err(Error::Checksum)), "{cut}");
        }
    }

    #[test]
    fn corrupted() {
        let mut bytes = to_bytes(&model());
        let k = bytes.len() / 2;
        bytes[k] ^= 1;
        assert!(matches!(from_bytes(&bytes), Err(Error::Checksum)));
    }

    #[test]
    fn wrong_magic_or_version() {
        let mut bytes = to_bytes(&model());
        bytes[0] = b'X';
        assert!(matches!(from_bytes(&bytes), Err(Error::Version(_))));
        let mut bytes = to_bytes(&model());
        bytes[4] = 9;
        assert!(matches!(from_bytes(&bytes), Err(Error::Version(_))));
        assert!(matches!(from_bytes(b""), Err(Error::Version(_))));
    }
}
