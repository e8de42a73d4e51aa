use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{CsrGraph, GraphError, NodeId};

const MAGIC: &[u8; 4] = b"ICSR";
const VERSION: u32 = 1;
const FLAG_DIRECTED: u32 = 1;
const FLAG_WEIGHTED: u32 = 2;

/// Loads a whitespace-separated edge list (`src dst [weight]`, `#` comments).
pub fn load_edge_list(path: impl AsRef<Path>, directed: bool, weighted: bool) -> Result<CsrGraph, GraphError> {
    let file = File::open(path)?;
    parse_edge_list(BufReader::new(file), directed, weighted)
}

/// Parses an edge list. `node_count` is one past the largest id seen.
///
/// In weighted mode a missing third column means weight 1; in unweighted mode a
/// third column is ignored.
pub fn parse_edge_list<R: BufRead>(reader: R, directed: bool, weighted: bool) -> Result<CsrGraph, GraphError> {
    let mut edges = Vec::new();
    let mut weights = Vec::new();
    let mut max_id: Option<NodeId> = None;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let body = line.trim();
        if body.is_empty() || body.starts_with('#') {
            continue;
        }
        let mut cols = body.split_whitespace();
        let mut id = |name: &str| -> Result<NodeId, GraphError> {
            let tok = cols.next().ok_or_else(|| GraphError::Parse {
                line: lineno,
                msg: format!("missing {name} id"),
            })?;
            tok.parse::<NodeId>().map_err(|_| GraphError::Parse {
                line: lineno,
                msg: format!("invalid {name} id {tok:?}"),
            })
        };
        let src = id("source")?;
        let dst = id("target")?;
        let w = match cols.next() {
            Some(tok) if weighted => tok.parse::<f64>().map_err(|_| GraphError::Parse {
                line: lineno,
                msg: format!("invalid weight {tok:?}"),
            })?,
            _ => 1.0,
        };
        if weighted && !(w > 0.0 && w.is_finite()) {
            return Err(GraphError::Invalid(format!(
                "line {lineno}: edge weight {w} must be positive"
            )));
        }
        if cols.next().is_some() && weighted {
            return Err(GraphError::Parse {
                line: lineno,
                msg: "too many columns".into(),
            });
        }
        max_id = Some(max_id.map_or(src.max(dst), |m| m.max(src).max(dst)));
        edges.push((src, dst));
        weights.push(w);
    }
    let node_count = max_id.map_or(0, |m| m as usize + 1);
    CsrGraph::from_edges(node_count, &edges, weighted.then_some(weights.as_slice()), directed)
}

/// Writes the graph as an edge list that [`load_edge_list`] reads back identically
/// (isolated trailing nodes aside, since ids are not stored separately).
pub fn write_edge_list<W: Write>(g: &CsrGraph, out: W) -> std::io::Result<()> {
    let mut out = BufWriter::new(out);
    for (u, v, w) in g.edges() {
        if g.is_weighted() {
            writeln!(out, "{u} {v} {w}")?;
        } else {
            writeln!(out, "{u} {v}")?;
        }
    }
    out.flush()
}

/// Binary CSR cache: magic, version, flags, node_count, edge_count, offsets (u64),
/// neighbors (u32), optional weights (f64). Little-endian throughout.
pub fn write_binary<W: Write>(g: &CsrGraph, out: W) -> std::io::Result<()> {
    let mut out = BufWriter::new(out);
    let mut flags = 0u32;
    if g.is_directed() {
        flags |= FLAG_DIRECTED;
    }
    if g.is_weighted() {
        flags |= FLAG_WEIGHTED;
    }
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&flags.to_le_bytes())?;
    out.write_all(&(g.node_count() as u64).to_le_bytes())?;
    out.write_all(&(g.edge_count() as u64).to_le_bytes())?;
    for &o in &g.offsets {
        out.write_all(&(o as u64).to_le_bytes())?;
    }
    for &v in &g.neighbors {
        out.write_all(&v.to_le_bytes())?;
    }
    if let Some(w) = &g.weights {
        for &x in w {
            out.write_all(&x.to_le_bytes())?;
        }
    }
    out.flush()
}

pub fn read_binary<R: Read>(input: R) -> Result<CsrGraph, GraphError> {
    let mut input = BufReader::new(input);
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(GraphError::Format("bad magic".into()));
    }
    let version = read_u32(&mut input)?;
    if version != VERSION {
        return Err(GraphError::Format(format!("unsupported version {version}")));
    }
    let flags = read_u32(&mut input)?;
    let n = read_u64(&mut input)? as usize;
    let e = read_u64(&mut input)? as usize;
    let offsets = (0..=n)
        .map(|_| read_u64(&mut input).map(|x| x as usize))
        .collect::<Result<Vec<_>, _>>()?;
    let neighbors = (0..e).map(|_| read_u32(&mut input)).collect::<Result<Vec<_>, _>>()?;
    let weights = if flags & FLAG_WEIGHTED != 0 {
        let mut w = Vec::with_capacity(e);
        for _ in 0..e {
            let mut b = [0u8; 8];
            input.read_exact(&mut b)?;
            w.push(f64::from_le_bytes(b));
        }
        Some(w)
    } else {
        None
    };
    CsrGraph::from_raw(offsets, neighbors, weights, flags & FLAG_DIRECTED != 0)
}

fn read_u32<R: Read>(r: &mut R) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> std::io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parse(s: &str, directed: bool, weighted: bool) -> Result<CsrGraph, GraphError> {
        parse_edge_list(s.as_bytes(), directed, weighted)
    }

    #[test]
    fn parses_comments_and_blank_lines() {
        let g = parse("# header\n0 1\n\n1 2\n", false, false).unwrap();
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.offsets(), &[0, 1, 3, 4]);
    }

    #[test]
    fn empty_input() {
        let g = parse("", false, false).unwrap();
        assert_eq!(g.node_count(), 0);
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn gap_ids_are_isolated() {
        let g = parse("0 4\n", true, false).unwrap();
        assert_eq!(g.node_count(), 5);
        assert_eq!(g.degree(2), 0);
    }

    #[test]
    fn zero_weight_is_rejected() {
        assert!(matches!(parse("0 1 0.0\n", false, true), Err(GraphError::Invalid(_))));
    }

    #[test]
    fn malformed_line_reports_line_number() {
        match parse("0 1\n0 x\n", false, false) {
            Err(GraphError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(matches!(
            parse("7\n", false, false),
            Err(GraphError::Parse { line: 1, .. })
        ));
        assert!(matches!(parse("-1 2\n", false, false), Err(GraphError::Parse { .. })));
    }

    #[test]
    fn weighted_columns() {
        let g = parse("0 1 2.5\n1 2\n", false, true).unwrap();
        assert_eq!(g.edge_weight(1, 0), Some(2.5));
        assert_eq!(g.edge_weight(2, 1), Some(1.0));
    }

    #[test]
    fn binary_rejects_garbage() {
        assert!(read_binary(&b"NOPE0000"[..]).is_err());
        let g = parse("0 1\n", false, false).unwrap();
        let mut buf = Vec::new();
        write_binary(&g, &mut buf).unwrap();
        buf.truncate(buf.len() - 2);
        assert!(read_binary(buf.as_slice()).is_err());
    }

    fn graph_strategy() -> impl Strategy<Value = CsrGraph> {
        (1usize..30, any::<bool>(), any::<bool>()).prop_flat_map(|(n, directed, weighted)| {
            let id = 0..n as NodeId;
            prop::collection::vec((id.clone(), id, 0.1f64..5.0), 0..80).prop_map(move |es| {
                let edges: Vec<_> = es.iter().map(|e| (e.0, e.1)).collect();
                let w: Vec<_> = es.iter().map(|e| e.2).collect();
                CsrGraph::from_edges(n, &edges, weighted.then_some(w.as_slice()), directed).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn binary_round_trip(g in graph_strategy()) {
            let mut buf = Vec::new();
            write_binary(&g, &mut buf).unwrap();
            prop_assert_eq!(read_binary(buf.as_slice()).unwrap(), g);
        }

        #[test]
        fn text_round_trip(g in graph_strategy()) {
            let mut buf = Vec::new();
            write_edge_list(&g, &mut buf).unwrap();
            let back = parse_edge_list(buf.as_slice(), g.is_directed(), g.is_weighted()).unwrap();
            // trailing isolated nodes are not representable in an edge list
            prop_assert!(back.node_count() <= g.node_count());
            for u in 0..back.node_count() as NodeId {
                prop_assert_eq!(back.neighbors(u), g.neighbors(u));
            }
        }
    }
}
