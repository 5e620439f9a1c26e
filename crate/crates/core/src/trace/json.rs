//! On-disk JSON encoding of [`Trace`].
//!
//! Canonical output puts each top-level key on its own line and each node on
//! its own line, in ascending id order, with object keys in the fixed order
//! of the structs below. Equal traces therefore produce identical bytes.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{
    Buffer, ClaimedCollective, CollectiveKind, CompOp, NodeAttrs, NodeKind, Slot, Trace,
    TraceClass, TraceNode,
};
use crate::error::{Error, Result};

pub const FORMAT_VERSION: &str = "1";

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TraceDoc {
    format_version: String,
    trace_class: String,
    num_ranks: usize,
    claimed_collective: Option<ClaimDoc>,
    ranks: Vec<Vec<NodeDoc>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClaimDoc {
    kind: String,
    comm_size: u64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeDoc {
    id: u64,
    name: String,
    kind: String,
    deps: Vec<u64>,
    attrs: Map<String, Value>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SlotDoc {
    buf: String,
    index: u32,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SendDoc {
    dst_rank: usize,
    comm_size: u64,
    tag: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    chunks: Option<Vec<SlotDoc>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecvDoc {
    src_rank: usize,
    comm_size: u64,
    tag: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    chunks: Option<Vec<SlotDoc>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CompDoc {
    comp_size: u64,
    op: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    chunks: Option<Vec<SlotDoc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    src_chunks: Option<Vec<SlotDoc>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CollDoc {
    coll_kind: String,
    comm_size: u64,
}

#[derive(Serialize)]
#[serde(untagged)]
enum AttrsOut {
    Send(SendDoc),
    Recv(RecvDoc),
    Comp(CompDoc),
    Coll(CollDoc),
}

#[derive(Serialize)]
struct NodeOut<'a> {
    id: u64,
    name: &'a str,
    kind: &'static str,
    deps: &'a [u64],
    attrs: AttrsOut,
}

pub fn load_trace(path: impl AsRef<Path>) -> Result<Trace> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_trace(&text)
}

/// Parses a trace document and checks every trace invariant.
pub fn parse_trace(text: &str) -> Result<Trace> {
    let doc: TraceDoc = serde_json::from_str(text).map_err(|e| {
        let (line, column) = (e.line(), e.column());
        match e.classify() {
            serde_json::error::Category::Data => {
                Error::Schema(format!("{e} (line {line}, column {column})"))
            }
            _ => Error::Parse {
                line,
                column,
                message: e.to_string(),
            },
        }
    })?;

    if doc.format_version != FORMAT_VERSION {
        return Err(Error::Schema(format!(
            "unsupported format_version {:?}, expected {FORMAT_VERSION:?}",
            doc.format_version
        )));
    }
    let class = match doc.trace_class.as_str() {
        "collective" => TraceClass::Collective,
        "workload" => TraceClass::Workload,
        other => return Err(Error::Schema(format!("unknown trace_class {other:?}"))),
    };
    if doc.num_ranks != doc.ranks.len() {
        return Err(Error::Schema(format!(
            "num_ranks is {} but {} rank lists are present",
            doc.num_ranks,
            doc.ranks.len()
        )));
    }
    let claimed = doc
        .claimed_collective
        .map(|c| {
            Ok::<_, Error>(ClaimedCollective {
                kind: parse_coll_kind(&c.kind)?,
                comm_size: c.comm_size,
            })
        })
        .transpose()?;

    let ranks = doc
        .ranks
        .into_iter()
        .enumerate()
        .map(|(rank, nodes)| {
            nodes
                .into_iter()
                .map(|n| node_from_doc(rank, n))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    Trace::new(class, claimed, ranks)
}

fn parse_coll_kind(s: &str) -> Result<CollectiveKind> {
    CollectiveKind::ALL
        .into_iter()
        .find(|k| k.as_str() == s)
        .ok_or_else(|| Error::Schema(format!("unknown collective kind {s:?}")))
}

fn node_from_doc(rank: usize, doc: NodeDoc) -> Result<TraceNode> {
    let at = |e: serde_json::Error| {
        Error::Schema(format!(
            "rank {rank} node {} ({}): bad attrs: {e}",
            doc.id, doc.kind
        ))
    };
    let kind: NodeKind = doc.kind.parse()?;
    let attrs_value = Value::Object(doc.attrs.clone());
    let attrs = match kind {
        NodeKind::CommSend => {
            let a: SendDoc = serde_json::from_value(attrs_value).map_err(at)?;
            NodeAttrs::Send {
                dst_rank: a.dst_rank,
                comm_size: a.comm_size,
                tag: a.tag,
                chunks: slots_from_doc(a.chunks)?,
            }
        }
        NodeKind::CommRecv => {
            let a: RecvDoc = serde_json::from_value(attrs_value).map_err(at)?;
            NodeAttrs::Recv {
                src_rank: a.src_rank,
                comm_size: a.comm_size,
                tag: a.tag,
                chunks: slots_from_doc(a.chunks)?,
            }
        }
        NodeKind::Comp => {
            let a: CompDoc = serde_json::from_value(attrs_value).map_err(at)?;
            NodeAttrs::Comp {
                comp_size: a.comp_size,
                op: CompOp::from(a.op.as_str()),
                chunks: slots_from_doc(a.chunks)?,
                src_chunks: slots_from_doc(a.src_chunks)?,
            }
        }
        NodeKind::CommColl => {
            let a: CollDoc = serde_json::from_value(attrs_value).map_err(at)?;
            NodeAttrs::Coll {
                coll_kind: parse_coll_kind(&a.coll_kind)?,
                comm_size: a.comm_size,
            }
        }
    };
    Ok(TraceNode {
        id: doc.id,
        name: doc.name,
        deps: doc.deps,
        attrs,
    })
}

fn slots_from_doc(slots: Option<Vec<SlotDoc>>) -> Result<Option<Vec<Slot>>> {
    slots
        .map(|v| {
            v.into_iter()
                .map(|s| {
                    Ok(Slot {
                        buf: s.buf.parse::<Buffer>()?,
                        index: s.index,
                    })
                })
                .collect()
        })
        .transpose()
}

fn slots_to_doc(slots: &Option<Vec<Slot>>) -> Option<Vec<SlotDoc>> {
    slots.as_ref().map(|v| {
        v.iter()
            .map(|s| SlotDoc {
                buf: s.buf.as_str().to_string(),
                index: s.index,
            })
            .collect()
    })
}

fn attrs_out(attrs: &NodeAttrs) -> AttrsOut {
    match attrs {
        NodeAttrs::Send {
            dst_rank,
            comm_size,
            tag,
            chunks,
        } => AttrsOut::Send(SendDoc {
            dst_rank: *dst_rank,
            comm_size: *comm_size,
            tag: *tag,
            chunks: slots_to_doc(chunks),
        }),
        NodeAttrs::Recv {
            src_rank,
            comm_size,
            tag,
            chunks,
        } => AttrsOut::Recv(RecvDoc {
            src_rank: *src_rank,
            comm_size: *comm_size,
            tag: *tag,
            chunks: slots_to_doc(chunks),
        }),
        NodeAttrs::Comp {
            comp_size,
            op,
            chunks,
            src_chunks,
        } => AttrsOut::Comp(CompDoc {
            comp_size: *comp_size,
            op: op.as_str().to_string(),
            chunks: slots_to_doc(chunks),
            src_chunks: slots_to_doc(src_chunks),
        }),
        NodeAttrs::Coll {
            coll_kind,
            comm_size,
        } => AttrsOut::Coll(CollDoc {
            coll_kind: coll_kind.as_str().to_string(),
            comm_size: *comm_size,
        }),
    }
}

fn json_string(v: &impl Serialize) -> String {
    serde_json::to_string(v).expect("trace documents always serialize")
}

/// Renders the canonical document. The trace is not re-checked here; use
/// [`save_trace`] for the checked path.
pub fn to_canonical_json(trace: &Trace) -> String {
    let mut out = String::new();
    out.push_str("{\n");
    out.push_str(&format!("  \"format_version\": {},\n", json_string(&FORMAT_VERSION)));
    out.push_str(&format!(
        "  \"trace_class\": {},\n",
        json_string(&trace.class().as_str())
    ));
    out.push_str(&format!("  \"num_ranks\": {},\n", trace.num_ranks()));
    let claim = trace.claimed_collective().map(|c| ClaimDoc {
        kind: c.kind.as_str().to_string(),
        comm_size: c.comm_size,
    });
    out.push_str(&format!("  \"claimed_collective\": {},\n", json_string(&claim)));
    out.push_str("  \"ranks\": [");
    for (r, nodes) in trace.ranks().iter().enumerate() {
        out.push_str(if r == 0 { "\n" } else { ",\n" });
        if nodes.is_empty() {
            out.push_str("    []");
            continue;
        }
        out.push_str("    [\n");
        for (i, n) in nodes.iter().enumerate() {
            let line = json_string(&NodeOut {
                id: n.id,
                name: &n.name,
                kind: n.kind().as_str(),
                deps: &n.deps,
                attrs: attrs_out(&n.attrs),
            });
            out.push_str("      ");
            out.push_str(&line);
            out.push_str(if i + 1 == nodes.len() { "\n" } else { ",\n" });
        }
        out.push_str("    ]");
    }
    out.push_str("\n  ]\n}\n");
    out
}

/// Checks invariants, then writes the canonical document. Nothing is
/// written when the check fails.
pub fn save_trace(trace: &Trace, path: impl AsRef<Path>) -> Result<()> {
    trace.check_invariants()?;
    let path = path.as_ref();
    fs::write(path, to_canonical_json(trace)).map_err(|e| Error::io(path, e))
}
