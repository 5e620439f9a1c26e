use std::collections::{BTreeMap, HashMap};

use super::{BufRef, MscclBuffer, MscclProgram, StepType};
use crate::error::{Error, Result};
use crate::trace::{
    Buffer, ClaimedCollective, CollectiveKind, CompOp, NodeAttrs, Slot, Trace, TraceNode,
};

/// Tags of channel `c` start at `c << CHANNEL_TAG_SHIFT`.
pub const CHANNEL_TAG_SHIFT: u32 = 16;

/// Ids of the first and last node emitted for one step.
#[derive(Clone, Copy)]
struct Emitted {
    first: u64,
    last: u64,
}

fn slots(program: &MscclProgram, rank: usize, r: BufRef, count: u32) -> Vec<Slot> {
    let rank = rank as u32;
    // Input and output alias the data buffer; all-gather inputs sit at the
    // rank's block of the output, reduce-scatter outputs at its slice.
    let (buf, base) = match r.buf {
        MscclBuffer::Input => match program.collective {
            CollectiveKind::AllGather => (Buffer::Data, rank * program.num_chunks),
            _ => (Buffer::Data, 0),
        },
        MscclBuffer::Output => match program.collective {
            CollectiveKind::ReduceScatter => (
                Buffer::Data,
                rank * (program.num_chunks / program.num_gpus as u32),
            ),
            _ => (Buffer::Data, 0),
        },
        MscclBuffer::Scratch => (Buffer::Scratch, 0),
    };
    (0..count)
        .map(|k| Slot {
            buf,
            index: base + r.offset + k,
        })
        .collect()
}

/// Converts a parsed program into a collective trace for a per-rank buffer
/// of `comm_size` bytes.
///
/// Every step becomes one node (`rrc` and `rcs` become two). Steps of a
/// threadblock run in order, a step's `depend` adds an edge from the last
/// node of the referenced step, and messages on each `(src, dst, channel)`
/// stream are tagged consecutively in step order.
pub fn convert_to_trace(program: &MscclProgram, comm_size: u64) -> Result<Trace> {
    let chunks = program.num_chunks as u64;
    if comm_size == 0 || !comm_size.is_multiple_of(chunks) {
        return Err(Error::Size(format!(
            "comm_size {comm_size} is not a positive multiple of nchunks {chunks}"
        )));
    }
    let chunk_bytes = comm_size / chunks;
    check_streams(program)?;

    let mut ranks = Vec::with_capacity(program.num_gpus);
    for gpu in &program.gpus {
        let rank = gpu.id;
        // First pass: node ids per (tb, step).
        let mut emitted: HashMap<(usize, usize), Emitted> = HashMap::new();
        let mut next = 0u64;
        for tb in &gpu.threadblocks {
            for step in &tb.steps {
                let n = step.kind.node_count() as u64;
                emitted.insert(
                    (tb.id, step.index),
                    Emitted {
                        first: next,
                        last: next + n - 1,
                    },
                );
                next += n;
            }
        }

        let mut nodes = Vec::with_capacity(next as usize);
        let mut tmp_next = 0u32;
        for tb in &gpu.threadblocks {
            let mut send_seq = 0u64;
            let mut recv_seq = 0u64;
            let base_tag = (tb.channel as u64) << CHANNEL_TAG_SHIFT;
            let next_tag = |seq: &mut u64| -> Result<u64> {
                if *seq >= 1 << CHANNEL_TAG_SHIFT {
                    return Err(Error::Overflow(format!(
                        "more than {} messages on one channel stream",
                        1u64 << CHANNEL_TAG_SHIFT
                    )));
                }
                let t = base_tag + *seq;
                *seq += 1;
                Ok(t)
            };

            for (pos, step) in tb.steps.iter().enumerate() {
                let ids = emitted[&(tb.id, step.index)];
                let mut deps = Vec::new();
                if pos > 0 {
                    deps.push(emitted[&(tb.id, tb.steps[pos - 1].index)].last);
                }
                if let Some(dep) = step.depend {
                    deps.push(emitted[&dep].last);
                }
                let size = step.count as u64 * chunk_bytes;
                let name = |what: &str| format!("tb{}_s{}_{what}", tb.id, step.index);
                let src = step.src.map(|r| slots(program, rank, r, step.count));
                let dst = step.dst.map(|r| slots(program, rank, r, step.count));
                let send_peer = tb.send_peer.unwrap_or(usize::MAX);
                let recv_peer = tb.recv_peer.unwrap_or(usize::MAX);

                match step.kind {
                    StepType::Send => nodes.push(TraceNode::new(
                        ids.first,
                        name("send"),
                        deps,
                        NodeAttrs::Send {
                            dst_rank: send_peer,
                            comm_size: size,
                            tag: next_tag(&mut send_seq)?,
                            chunks: src,
                        },
                    )),
                    StepType::Recv => nodes.push(TraceNode::new(
                        ids.first,
                        name("recv"),
                        deps,
                        NodeAttrs::Recv {
                            src_rank: recv_peer,
                            comm_size: size,
                            tag: next_tag(&mut recv_seq)?,
                            chunks: dst,
                        },
                    )),
                    StepType::RecvReduceCopy => {
                        let landing: Vec<Slot> =
                            (0..step.count).map(|k| Slot::tmp(tmp_next + k)).collect();
                        tmp_next += step.count;
                        nodes.push(TraceNode::new(
                            ids.first,
                            name("recv"),
                            deps,
                            NodeAttrs::Recv {
                                src_rank: recv_peer,
                                comm_size: size,
                                tag: next_tag(&mut recv_seq)?,
                                chunks: Some(landing.clone()),
                            },
                        ));
                        let mut sources = src.unwrap_or_default();
                        sources.extend(landing);
                        nodes.push(TraceNode::new(
                            ids.last,
                            name("reduce"),
                            vec![ids.first],
                            NodeAttrs::Comp {
                                comp_size: size,
                                op: CompOp::Reduce,
                                chunks: dst,
                                src_chunks: Some(sources),
                            },
                        ));
                    }
                    StepType::RecvCopySend => {
                        nodes.push(TraceNode::new(
                            ids.first,
                            name("recv"),
                            deps,
                            NodeAttrs::Recv {
                                src_rank: recv_peer,
                                comm_size: size,
                                tag: next_tag(&mut recv_seq)?,
                                chunks: dst.clone(),
                            },
                        ));
                        nodes.push(TraceNode::new(
                            ids.last,
                            name("send"),
                            vec![ids.first],
                            NodeAttrs::Send {
                                dst_rank: send_peer,
                                comm_size: size,
                                tag: next_tag(&mut send_seq)?,
                                chunks: dst,
                            },
                        ));
                    }
                    StepType::Reduce => {
                        let mut sources = src.unwrap_or_default();
                        sources.extend(dst.clone().unwrap_or_default());
                        nodes.push(TraceNode::new(
                            ids.first,
                            name("reduce"),
                            deps,
                            NodeAttrs::Comp {
                                comp_size: size,
                                op: CompOp::Reduce,
                                chunks: dst,
                                src_chunks: Some(sources),
                            },
                        ));
                    }
                    StepType::Copy => nodes.push(TraceNode::new(
                        ids.first,
                        name("copy"),
                        deps,
                        NodeAttrs::Comp {
                            comp_size: size,
                            op: CompOp::Copy,
                            chunks: dst,
                            src_chunks: src,
                        },
                    )),
                    StepType::Nop => nodes.push(TraceNode::new(
                        ids.first,
                        name("nop"),
                        deps,
                        NodeAttrs::comp(0, CompOp::Nop),
                    )),
                }
            }
        }
        ranks.push(nodes);
    }

    let claim = ClaimedCollective {
        kind: program.collective,
        comm_size,
    };
    Trace::collective(Some(claim), ranks)
}

/// Every `(src, dst, channel)` stream must carry the same number of
/// messages with the same chunk counts on both ends.
fn check_streams(program: &MscclProgram) -> Result<()> {
    let mut sent: BTreeMap<(usize, usize, u32), Vec<u32>> = BTreeMap::new();
    let mut received: BTreeMap<(usize, usize, u32), Vec<u32>> = BTreeMap::new();
    for gpu in &program.gpus {
        for tb in &gpu.threadblocks {
            for step in &tb.steps {
                if step.kind.sends() {
                    let peer = tb.send_peer.expect("checked by parser");
                    sent.entry((gpu.id, peer, tb.channel))
                        .or_default()
                        .push(step.count);
                }
                if step.kind.receives() {
                    let peer = tb.recv_peer.expect("checked by parser");
                    received
                        .entry((peer, gpu.id, tb.channel))
                        .or_default()
                        .push(step.count);
                }
            }
        }
    }
    let keys: std::collections::BTreeSet<_> = sent.keys().chain(received.keys()).copied().collect();
    for key @ (src, dst, chan) in keys {
        let s = sent.get(&key).map_or(&[][..], Vec::as_slice);
        let r = received.get(&key).map_or(&[][..], Vec::as_slice);
        if s.len() != r.len() {
            return Err(Error::Match(format!(
                "gpu {src} sends {} messages to gpu {dst} on channel {chan} but gpu {dst} receives {}",
                s.len(),
                r.len()
            )));
        }
        if let Some(i) = (0..s.len()).find(|&i| s[i] != r[i]) {
            return Err(Error::Match(format!(
                "message {i} from gpu {src} to gpu {dst} on channel {chan}: {} chunks sent, {} received",
                s[i], r[i]
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::msccl::parse_msccl_str;
    use crate::trace::NodeKind;

    #[test]
    fn copy_only_program_gives_compute_nodes() {
        let xml = r#"<algo name="cp" ngpus="1" nchunks="2" coll="allreduce">
  <gpu id="0">
    <tb id="0" send="-1" recv="-1" chan="0">
      <step s="0" type="cpy" srcbuf="i" srcoff="0" dstbuf="s" dstoff="0" cnt="2" depid="-1" deps="-1" hasdep="0"/>
      <step s="1" type="cpy" srcbuf="s" srcoff="0" dstbuf="o" dstoff="0" cnt="2" depid="-1" deps="-1" hasdep="0"/>
    </tb>
  </gpu>
</algo>"#;
        let p = parse_msccl_str(xml).unwrap();
        let t = convert_to_trace(&p, 1024).unwrap();
        assert_eq!(t.num_nodes(), 2);
        assert!(t.rank(0).iter().all(|n| n.kind() == NodeKind::Comp));
        assert_eq!(t.rank(0)[1].deps, vec![0]);
        assert_eq!(t.rank(0)[1].attrs.size(), 1024);
        assert!(crate::validate::check_semantics(&t).unwrap().is_pass());
    }

    #[test]
    fn unbalanced_streams_are_a_match_error() {
        let xml = r#"<algo name="bad" ngpus="2" nchunks="1" coll="allreduce">
  <gpu id="0">
    <tb id="0" send="1" recv="-1" chan="0">
      <step s="0" type="s" srcbuf="i" srcoff="0" cnt="1"/>
      <step s="1" type="s" srcbuf="i" srcoff="0" cnt="1"/>
    </tb>
  </gpu>
  <gpu id="1">
    <tb id="0" send="-1" recv="0" chan="0">
      <step s="0" type="r" dstbuf="i" dstoff="0" cnt="1"/>
    </tb>
  </gpu>
</algo>"#;
        let p = parse_msccl_str(xml).unwrap();
        assert!(matches!(convert_to_trace(&p, 64), Err(Error::Match(_))));
    }

    #[test]
    fn size_must_divide_into_chunks() {
        let xml = r#"<algo name="x" ngpus="1" nchunks="3" coll="allreduce"><gpu id="0"/></algo>"#;
        let p = parse_msccl_str(xml).unwrap();
        assert!(matches!(convert_to_trace(&p, 100), Err(Error::Size(_))));
        assert!(matches!(convert_to_trace(&p, 0), Err(Error::Size(_))));
        assert!(convert_to_trace(&p, 99).is_ok());
    }

    #[test]
    fn channels_get_disjoint_tag_ranges() {
        let xml = r#"<algo name="x" ngpus="2" nchunks="2" coll="allgather">
  <gpu id="0">
    <tb id="0" send="1" recv="-1" chan="0"><step s="0" type="s" srcbuf="i" srcoff="0" cnt="1"/></tb>
    <tb id="1" send="1" recv="-1" chan="1"><step s="0" type="s" srcbuf="i" srcoff="1" cnt="1"/></tb>
  </gpu>
  <gpu id="1">
    <tb id="0" send="-1" recv="0" chan="0"><step s="0" type="r" dstbuf="o" dstoff="0" cnt="1"/></tb>
    <tb id="1" send="-1" recv="0" chan="1"><step s="0" type="r" dstbuf="o" dstoff="1" cnt="1"/></tb>
  </gpu>
</algo>"#;
        let p = parse_msccl_str(xml).unwrap();
        let t = convert_to_trace(&p, 128).unwrap();
        let tags: Vec<u64> = t.rank(0).iter().filter_map(|n| n.attrs.tag()).collect();
        assert_eq!(tags, vec![0, 1 << CHANNEL_TAG_SHIFT]);
    }
}
