//! Wire format of walkers crossing machines. Every field is 8 bytes, little-endian.
//!
//! | layout          | fields                                                    | bytes    |
//! |-----------------|-----------------------------------------------------------|----------|
//! | incremental     | walker_id, steps, node_id, H, L, E_H, E_L, E_HL, E_H2, E_L2 | 80       |
//! | full path       | walker_id, steps, node_id, path[steps]                    | 24 + 8L  |
//! | bare            | walker_id, steps, node_id                                 | 24       |
//!
//! Second-order walks append `prev_node` (8 bytes) to any layout.

use crate::graph::NodeId;
use crate::walk_stats::WalkInfoState;

use super::SamplerError;

/// Statistics carried by a walker.
#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Info(WalkInfoState),
    Path(Vec<NodeId>),
    Bare,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    Info,
    Path,
    Bare,
}

/// A walker in transit. `node_id` is the node it is about to append; `steps` is the
/// length of the walk before that node.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkerMessage {
    pub walker_id: u64,
    pub steps: u64,
    pub node_id: NodeId,
    pub payload: Payload,
    pub prev_node: Option<NodeId>,
}

pub const HEADER_BYTES: usize = 24;
pub const INFO_BYTES: usize = 80;

impl WalkerMessage {
    pub fn layout(&self) -> Layout {
        match self.payload {
            Payload::Info(_) => Layout::Info,
            Payload::Path(_) => Layout::Path,
            Payload::Bare => Layout::Bare,
        }
    }

    pub fn encoded_len(&self) -> usize {
        encoded_len(self.layout(), self.steps, self.prev_node.is_some())
    }

    pub fn encode(&self, out: &mut Vec<u8>) {
        let start = out.len();
        let mut put = |x: u64| out.extend_from_slice(&x.to_le_bytes());
        put(self.walker_id);
        put(self.steps);
        put(self.node_id as u64);
        match &self.payload {
            Payload::Info(s) => {
                debug_assert_eq!(s.len as u64, self.steps);
                put(s.entropy.to_bits());
                put(s.len as u64);
                for x in [s.mean_h, s.mean_l, s.mean_hl, s.mean_h2, s.mean_l2] {
                    put(x.to_bits());
                }
            }
            Payload::Path(p) => {
                debug_assert_eq!(p.len() as u64, self.steps);
                for &v in p {
                    put(v as u64);
                }
            }
            Payload::Bare => {}
        }
        if let Some(t) = self.prev_node {
            put(t as u64);
        }
        debug_assert_eq!(out.len() - start, self.encoded_len());
    }

    /// Decodes one message from the front of `buf`, returning it and the bytes used.
    pub fn decode(buf: &[u8], layout: Layout, with_prev: bool) -> Result<(Self, usize), SamplerError> {
        let mut r = Reader { buf, pos: 0 };
        let walker_id = r.u64()?;
        let steps = r.u64()?;
        let node_id = r.node()?;
        let payload = match layout {
            Layout::Info => {
                let entropy = r.f64()?;
                let len = r.u64()?;
                if len != steps || len > u32::MAX as u64 {
                    return Err(SamplerError::Wire("length field disagrees with steps".into()));
                }
                Payload::Info(WalkInfoState {
                    entropy,
                    len: len as u32,
                    mean_h: r.f64()?,
                    mean_l: r.f64()?,
                    mean_hl: r.f64()?,
                    mean_h2: r.f64()?,
                    mean_l2: r.f64()?,
                })
            }
            Layout::Path => {
                let n = usize::try_from(steps).map_err(|_| SamplerError::Wire("path too long".into()))?;
                if buf.len() < HEADER_BYTES + 8 * n {
                    return Err(SamplerError::Wire("truncated path".into()));
                }
                let path = (0..n).map(|_| r.node()).collect::<Result<_, _>>()?;
                Payload::Path(path)
            }
            Layout::Bare => Payload::Bare,
        };
        let prev_node = if with_prev { Some(r.node()?) } else { None };
        let pos = r.pos;
        Ok((
            Self {
                walker_id,
                steps,
                node_id,
                payload,
                prev_node,
            },
            pos,
        ))
    }
}

pub fn encoded_len(layout: Layout, steps: u64, with_prev: bool) -> usize {
    let body = match layout {
        Layout::Info => INFO_BYTES,
        Layout::Path => HEADER_BYTES + 8 * steps as usize,
        Layout::Bare => HEADER_BYTES,
    };
    body + if with_prev { 8 } else { 0 }
}

/// Decodes a buffer of back-to-back messages.
pub fn decode_all(mut buf: &[u8], layout: Layout, with_prev: bool) -> Result<Vec<WalkerMessage>, SamplerError> {
    let mut out = Vec::new();
    while !buf.is_empty() {
        let (m, used) = WalkerMessage::decode(buf, layout, with_prev)?;
        out.push(m);
        buf = &buf[used..];
    }
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn u64(&mut self) -> Result<u64, SamplerError> {
        let bytes = self
            .buf
            .get(self.pos..self.pos + 8)
            .ok_or_else(|| SamplerError::Wire("truncated message".into()))?;
        self.pos += 8;
        Ok(u64::from_le_bytes(bytes.try_into().expect("slice of 8")))
    }

    fn f64(&mut self) -> Result<f64, SamplerError> {
        self.u64().map(f64::from_bits)
    }

    fn node(&mut self) -> Result<NodeId, SamplerError> {
        let x = self.u64()?;
        NodeId::try_from(x).map_err(|_| SamplerError::Wire(format!("node id {x} out of range")))
    }
}
