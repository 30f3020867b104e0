use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{validate_sample, MonitoringSample, NodeId};
use crate::error::{Error, Result};

/// FNV-1a 64-bit offset basis; also the digest of the empty input.
pub const FNV_OFFSET_BASIS: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit non-cryptographic digest (FNV-1a).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Digest(pub u64);

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

impl Serialize for Digest {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Digest {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        if s.len() != 16 {
            return Err(serde::de::Error::custom("digest must be 16 hex digits"));
        }
        u64::from_str_radix(&s, 16)
            .map(Digest)
            .map_err(serde::de::Error::custom)
    }
}

pub fn digest(bytes: &[u8]) -> Digest {
    let mut h = FNV_OFFSET_BASIS;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    Digest(h)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LedgerBlock {
    pub height: u64,
    pub parent_digest: Digest,
    pub tx_count: u64,
    pub winner_id: NodeId,
    pub winner_sample: MonitoringSample,
    pub model_blob_digest: Digest,
    pub timestamp_s: f64,
}

const BLOCK_LEN: usize = 8 * 3 + 4 + 4 + 8 * 6 + 8 + 8;

impl LedgerBlock {
    pub fn genesis() -> Self {
        LedgerBlock {
            height: 0,
            parent_digest: Digest(0),
            tx_count: 1,
            winner_id: NodeId(0),
            winner_sample: MonitoringSample {
                node_id: NodeId(0),
                cpu_tdp_w: 1.0,
                cpu_usage: 0.0,
                mem_usage: 0.0,
                cpi: 1.0,
                bandwidth_kbps: 0.0,
                cpu_time_s: 0.0,
            },
            model_blob_digest: digest(&[]),
            timestamp_s: 0.0,
        }
    }

    /// Canonical little-endian encoding; this is what the digest covers.
    pub fn encode(&self) -> Vec<u8> {
        let s = &self.winner_sample;
        let mut out = Vec::with_capacity(BLOCK_LEN);
        out.extend_from_slice(&self.height.to_le_bytes());
        out.extend_from_slice(&self.parent_digest.0.to_le_bytes());
        out.extend_from_slice(&self.tx_count.to_le_bytes());
        out.extend_from_slice(&self.winner_id.0.to_le_bytes());
        out.extend_from_slice(&s.node_id.0.to_le_bytes());
        for v in [
            s.cpu_tdp_w,
            s.cpu_usage,
            s.mem_usage,
            s.cpi,
            s.bandwidth_kbps,
            s.cpu_time_s,
        ] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&self.model_blob_digest.0.to_le_bytes());
        out.extend_from_slice(&self.timestamp_s.to_le_bytes());
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() != BLOCK_LEN {
            return Err(Error::Blob(format!(
                "block is {} bytes, expected {BLOCK_LEN}",
                bytes.len()
            )));
        }
        let mut pos = 0;
        let mut take = |n: usize| {
            let s = &bytes[pos..pos + n];
            pos += n;
            s
        };
        let u64_at = |b: &[u8]| u64::from_le_bytes(b.try_into().expect("8 bytes"));
        let u32_at = |b: &[u8]| u32::from_le_bytes(b.try_into().expect("4 bytes"));
        let f64_at = |b: &[u8]| f64::from_le_bytes(b.try_into().expect("8 bytes"));
        let height = u64_at(take(8));
        let parent = u64_at(take(8));
        let tx = u64_at(take(8));
        let winner = u32_at(take(4));
        let node = u32_at(take(4));
        let mut f = [0.0; 6];
        for v in &mut f {
            *v = f64_at(take(8));
        }
        let model = u64_at(take(8));
        let ts = f64_at(take(8));
        Ok(LedgerBlock {
            height,
            parent_digest: Digest(parent),
            tx_count: tx,
            winner_id: NodeId(winner),
            winner_sample: MonitoringSample {
                node_id: NodeId(node),
                cpu_tdp_w: f[0],
                cpu_usage: f[1],
                mem_usage: f[2],
                cpi: f[3],
                bandwidth_kbps: f[4],
                cpu_time_s: f[5],
            },
            model_blob_digest: Digest(model),
            timestamp_s: ts,
        })
    }

    pub fn digest(&self) -> Digest {
        digest(&self.encode())
    }
}

/// One line of the exported chain: the block plus its own digest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockRecord {
    pub block: LedgerBlock,
    pub digest: Digest,
}

/// A single canonical chain rooted at the genesis block.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    blocks: Vec<LedgerBlock>,
}

impl Default for Chain {
    fn default() -> Self {
        Self::new()
    }
}

impl Chain {
    pub fn new() -> Self {
        Chain {
            blocks: vec![LedgerBlock::genesis()],
        }
    }

    pub fn blocks(&self) -> &[LedgerBlock] {
        &self.blocks
    }

    pub fn tip(&self) -> &LedgerBlock {
        self.blocks.last().expect("chain always holds genesis")
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Appends a block on top of the tip and returns it.
    pub fn append(
        &mut self,
        tx_count: u64,
        winner_sample: MonitoringSample,
        model_blob_digest: Digest,
        timestamp_s: f64,
    ) -> &LedgerBlock {
        let tip = self.tip();
        let block = LedgerBlock {
            height: tip.height + 1,
            parent_digest: tip.digest(),
            tx_count,
            winner_id: winner_sample.node_id,
            winner_sample,
            model_blob_digest,
            timestamp_s,
        };
        self.blocks.push(block);
        self.tip()
    }

    /// Full re-validation walk over the chain.
    pub fn validate(&self) -> Result<()> {
        validate_blocks(self.blocks.iter().map(|b| (*b, None)))
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for b in &self.blocks {
            let rec = BlockRecord {
                block: *b,
                digest: b.digest(),
            };
            serde_json::to_writer(&mut w, &rec)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        let mut blocks = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let rec: BlockRecord = serde_json::from_str(&line).map_err(|e| Error::Chain {
                height: i as u64,
                reason: format!("unparseable record: {e}"),
            })?;
            blocks.push((rec.block, Some(rec.digest)));
        }
        validate_blocks(blocks.iter().copied())?;
        Ok(Chain {
            blocks: blocks.into_iter().map(|(b, _)| b).collect(),
        })
    }
}

/// Validates an exported chain and returns the number of blocks.
pub fn verify_chain_jsonl<R: BufRead>(r: R) -> Result<usize> {
    Chain::read_jsonl(r).map(|c| c.len())
}

fn validate_blocks(blocks: impl Iterator<Item = (LedgerBlock, Option<Digest>)>) -> Result<()> {
    let mut prev: Option<LedgerBlock> = None;
    let mut seen = 0u64;
    for (i, (block, stored)) in blocks.enumerate() {
        let at = i as u64;
        let fail = |reason: String| Err(Error::Chain { height: at, reason });
        if block.height != at {
            return fail(format!("height {} out of sequence", block.height));
        }
        if let Some(d) = stored {
            if d != block.digest() {
                return fail(format!(
                    "stored digest {d} does not match content {}",
                    block.digest()
                ));
            }
        }
        match prev {
            None => {
                if block != LedgerBlock::genesis() {
                    return fail("genesis block altered".into());
                }
            }
            Some(p) => {
                if block.parent_digest != p.digest() {
                    return fail(format!(
                        "parent digest {} does not match {}",
                        block.parent_digest,
                        p.digest()
                    ));
                }
                if block.tx_count == 0 {
                    return fail("block carries no transactions".into());
                }
                if block.winner_id != block.winner_sample.node_id {
                    return fail("winner id differs from winner sample".into());
                }
                if let Err(v) = validate_sample(&block.winner_sample) {
                    return fail(format!("winner sample invalid: {}", v[0]));
                }
            }
        }
        prev = Some(block);
        seen += 1;
    }
    if seen == 0 {
        return Err(Error::Chain {
            height: 0,
            reason: "missing genesis block".into(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(node: u32) -> MonitoringSample {
        MonitoringSample {
            node_id: NodeId(node),
            cpu_tdp_w: 65.0,
            cpu_usage: 0.5,
            mem_usage: 0.4,
            cpi: 1.2,
            bandwidth_kbps: 10_000.0,
            cpu_time_s: 2.0,
        }
    }

    #[test]
    fn empty_digest_is_offset_basis() {
        assert_eq!(digest(&[]), Digest(0xcbf29ce484222325));
        assert_eq!(digest(b"a"), Digest(0xaf63dc4c8601ec8c));
        assert_eq!(digest(b"abc"), digest(b"abc"));
    }

    #[test]
    fn block_encoding_round_trips() {
        let b = LedgerBlock {
            height: 3,
            parent_digest: Digest(42),
            tx_count: 1000,
            winner_id: NodeId(2),
            winner_sample: sample(2),
            model_blob_digest: Digest(7),
            timestamp_s: 1.25,
        };
        let bytes = b.encode();
        assert_eq!(bytes.len(), BLOCK_LEN);
        assert_eq!(LedgerBlock::decode(&bytes).unwrap(), b);
        assert!(LedgerBlock::decode(&bytes[1..]).is_err());
    }

    #[test]
    fn chain_validates_and_detects_tamper() {
        let mut chain = Chain::new();
        for i in 0..5 {
            chain.append(100, sample(i % 3), Digest(i as u64), f64::from(i));
        }
        chain.validate().unwrap();
        assert_eq!(chain.tip().height, 5);

        let mut buf = Vec::new();
        chain.write_jsonl(&mut buf).unwrap();
        let back = Chain::read_jsonl(buf.as_slice()).unwrap();
        assert_eq!(back, chain);

        let mut bad = chain.clone();
        bad.blocks[3].tx_count = 99;
        match bad.validate() {
            Err(Error::Chain { height, .. }) => assert_eq!(height, 4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn tampered_export_names_block() {
        let mut chain = Chain::new();
        for i in 0..4 {
            chain.append(10, sample(i), Digest(0), 0.5 * f64::from(i));
        }
        let mut buf = Vec::new();
        chain.write_jsonl(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let tampered = text.replacen("\"tx_count\":10", "\"tx_count\":11", 3);
        match verify_chain_jsonl(tampered.as_bytes()) {
            Err(Error::Chain { height, .. }) => assert_eq!(height, 1),
            other => panic!("{other:?}"),
        }
    }
}
