use std::collections::HashSet;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use roxmltree::{Document, Node};

use super::{schema, BufRef, Gpu, MscclBuffer, MscclProgram, Step, StepType, Threadblock};
use crate::error::{Error, Result};
use crate::trace::CollectiveKind;

pub fn parse_msccl_xml(path: impl AsRef<Path>) -> Result<MscclProgram> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_msccl_str(&text)
}

pub fn parse_msccl_str(text: &str) -> Result<MscclProgram> {
    let doc = Document::parse(text).map_err(|e| {
        let pos = e.pos();
        Error::Xml {
            line: pos.row,
            column: pos.col,
            message: e.to_string(),
        }
    })?;
    let program = Parser { doc: &doc }.program()?;
    check_program(&program)?;
    Ok(program)
}

struct Parser<'a, 'input> {
    doc: &'a Document<'input>,
}

impl<'a, 'input> Parser<'a, 'input> {
    fn line(&self, node: Node) -> u32 {
        self.doc.text_pos_at(node.range().start).row
    }

    /// Rejects attributes outside `allowed`.
    fn check_attrs(&self, node: Node, allowed: &[&str]) -> Result<()> {
        for a in node.attributes() {
            if !allowed.contains(&a.name()) {
                return Err(schema(
                    self.line(node),
                    format!(
                        "unknown attribute {:?} on <{}>",
                        a.name(),
                        node.tag_name().name()
                    ),
                ));
            }
        }
        Ok(())
    }

    fn attr<T: FromStr>(&self, node: Node, name: &str) -> Result<Option<T>> {
        let Some(raw) = node.attribute(name) else {
            return Ok(None);
        };
        raw.trim().parse::<T>().map(Some).map_err(|_| {
            schema(
                self.line(node),
                format!(
                    "bad value {raw:?} for attribute {name:?} on <{}>",
                    node.tag_name().name()
                ),
            )
        })
    }

    fn required<T: FromStr>(&self, node: Node, name: &str) -> Result<T> {
        self.attr(node, name)?.ok_or_else(|| {
            schema(
                self.line(node),
                format!(
                    "missing attribute {name:?} on <{}>",
                    node.tag_name().name()
                ),
            )
        })
    }

    /// `-1` and absent both mean "none".
    fn optional_index(&self, node: Node, name: &str) -> Result<Option<usize>> {
        match self.attr::<i64>(node, name)? {
            None | Some(-1) => Ok(None),
            Some(v) if v >= 0 => Ok(Some(v as usize)),
            Some(v) => Err(schema(
                self.line(node),
                format!("attribute {name:?} must be -1 or non-negative, got {v}"),
            )),
        }
    }

    fn children(&self, node: Node<'a, 'input>, expected: &str) -> Result<Vec<Node<'a, 'input>>> {
        let mut out = Vec::new();
        for child in node.children() {
            if child.is_element() {
                if child.tag_name().name() != expected {
                    return Err(schema(
                        self.line(child),
                        format!(
                            "unexpected element <{}> inside <{}> (expected <{expected}>)",
                            child.tag_name().name(),
                            node.tag_name().name()
                        ),
                    ));
                }
                out.push(child);
            } else if child.is_text() && !child.text().unwrap_or("").trim().is_empty() {
                return Err(schema(
                    self.line(child),
                    format!("unexpected text inside <{}>", node.tag_name().name()),
                ));
            }
        }
        Ok(out)
    }

    fn program(&self) -> Result<MscclProgram> {
        let root = self.doc.root_element();
        if root.tag_name().name() != "algo" {
            return Err(schema(
                self.line(root),
                format!("root element must be <algo>, found <{}>", root.tag_name().name()),
            ));
        }
        self.check_attrs(root, &["name", "ngpus", "nchunks", "coll"])?;
        let name: String = self.required(root, "name")?;
        let num_gpus: usize = self.required(root, "ngpus")?;
        let num_chunks: u32 = self.required(root, "nchunks")?;
        let coll: String = self.required(root, "coll")?;
        let collective = CollectiveKind::from_str(&coll)
            .map_err(|_| schema(self.line(root), format!("unknown collective {coll:?}")))?;
        if num_gpus == 0 || num_chunks == 0 {
            return Err(schema(self.line(root), "ngpus and nchunks must be positive"));
        }

        let mut gpus: Vec<Option<Gpu>> = vec![None; num_gpus];
        for g in self.children(root, "gpu")? {
            let gpu = self.gpu(g, num_gpus)?;
            let id = gpu.id;
            if gpus[id].replace(gpu).is_some() {
                return Err(schema(self.line(g), format!("duplicate gpu id {id}")));
            }
        }
        let gpus = gpus
            .into_iter()
            .enumerate()
            .map(|(id, g)| {
                g.ok_or_else(|| schema(self.line(root), format!("missing <gpu id=\"{id}\">")))
            })
            .collect::<Result<Vec<_>>>()?;

        Ok(MscclProgram {
            name,
            num_gpus,
            num_chunks,
            collective,
            gpus,
        })
    }

    fn gpu(&self, node: Node<'a, 'input>, num_gpus: usize) -> Result<Gpu> {
        self.check_attrs(node, &["id"])?;
        let id: usize = self.required(node, "id")?;
        if id >= num_gpus {
            return Err(schema(
                self.line(node),
                format!("gpu id {id} out of range (ngpus = {num_gpus})"),
            ));
        }
        let mut threadblocks = Vec::new();
        let mut seen = HashSet::new();
        for tb in self.children(node, "tb")? {
            let parsed = self.threadblock(tb, id, num_gpus)?;
            if !seen.insert(parsed.id) {
                return Err(schema(
                    self.line(tb),
                    format!("duplicate threadblock id {} on gpu {id}", parsed.id),
                ));
            }
            threadblocks.push(parsed);
        }
        threadblocks.sort_by_key(|tb| tb.id);
        Ok(Gpu { id, threadblocks })
    }

    fn threadblock(&self, node: Node<'a, 'input>, gpu: usize, num_gpus: usize) -> Result<Threadblock> {
        self.check_attrs(node, &["id", "send", "recv", "chan"])?;
        let id: usize = self.required(node, "id")?;
        let send_peer = self.optional_index(node, "send")?;
        let recv_peer = self.optional_index(node, "recv")?;
        let channel: u32 = self.attr(node, "chan")?.unwrap_or(0);
        for peer in [send_peer, recv_peer].into_iter().flatten() {
            if peer >= num_gpus || peer == gpu {
                return Err(schema(
                    self.line(node),
                    format!("threadblock {id} on gpu {gpu} has invalid peer {peer}"),
                ));
            }
        }
        let steps = self
            .children(node, "step")?
            .into_iter()
            .map(|s| self.step(s))
            .collect::<Result<Vec<_>>>()?;
        Ok(Threadblock {
            id,
            send_peer,
            recv_peer,
            channel,
            steps,
        })
    }

    fn step(&self, node: Node) -> Result<Step> {
        self.check_attrs(
            node,
            &[
                "s", "type", "srcbuf", "srcoff", "dstbuf", "dstoff", "cnt", "depid", "deps",
                "hasdep",
            ],
        )?;
        let line = self.line(node);
        let index: usize = self.required(node, "s")?;
        let raw_type: String = self.required(node, "type")?;
        let kind = StepType::from_str(&raw_type).map_err(|m| schema(line, m))?;

        let buf_ref = |buf: &str, off: &str| -> Result<Option<BufRef>> {
            let b = match node.attribute(buf) {
                None => None,
                Some(raw) => Some(MscclBuffer::from_str(raw.trim()).map_err(|m| schema(line, m))?),
            };
            let o = self.optional_index(node, off)?;
            match (b, o) {
                (Some(buf), Some(offset)) => Ok(Some(BufRef {
                    buf,
                    offset: u32::try_from(offset)
                        .map_err(|_| schema(line, format!("{off} too large")))?,
                })),
                (None, None) => Ok(None),
                _ => Err(schema(line, format!("{buf} and {off} must be given together"))),
            }
        };
        let src = buf_ref("srcbuf", "srcoff")?;
        let dst = buf_ref("dstbuf", "dstoff")?;
        let count: u32 = self.attr(node, "cnt")?.unwrap_or(1);
        let depid = self.optional_index(node, "depid")?;
        let deps = self.optional_index(node, "deps")?;
        let depend = match (depid, deps) {
            (Some(tb), Some(step)) => Some((tb, step)),
            (None, None) => None,
            _ => return Err(schema(line, "depid and deps must both be set or both be -1")),
        };
        let has_dep = match self.attr::<u8>(node, "hasdep")?.unwrap_or(0) {
            0 => false,
            1 => true,
            v => return Err(schema(line, format!("hasdep must be 0 or 1, got {v}"))),
        };

        let (needs_src, needs_dst) = match kind {
            StepType::Send => (true, false),
            StepType::Recv | StepType::RecvCopySend => (false, true),
            StepType::RecvReduceCopy | StepType::Reduce | StepType::Copy => (true, true),
            StepType::Nop => (false, false),
        };
        if needs_src && src.is_none() {
            return Err(schema(line, format!("step type {kind} needs srcbuf/srcoff")));
        }
        if needs_dst && dst.is_none() {
            return Err(schema(line, format!("step type {kind} needs dstbuf/dstoff")));
        }
        if kind != StepType::Nop && count == 0 {
            return Err(schema(line, "cnt must be positive"));
        }

        Ok(Step {
            index,
            kind,
            src,
            dst,
            count,
            depend,
            has_dep,
            line,
        })
    }
}

fn check_program(p: &MscclProgram) -> Result<()> {
    if p.collective == CollectiveKind::ReduceScatter && !p.num_chunks.is_multiple_of(p.num_gpus as u32) {
        return Err(schema(1, "reduce_scatter needs nchunks divisible by ngpus"));
    }
    let limit = |buf: MscclBuffer| match buf {
        MscclBuffer::Input => Some(p.num_chunks),
        MscclBuffer::Output => Some(p.output_chunks()),
        MscclBuffer::Scratch => None,
    };

    for gpu in &p.gpus {
        let mut send_streams = HashSet::new();
        let mut recv_streams = HashSet::new();
        for tb in &gpu.threadblocks {
            if let Some(peer) = tb.send_peer {
                if !send_streams.insert((peer, tb.channel)) {
                    return Err(schema(
                        tb.steps.first().map_or(1, |s| s.line),
                        format!(
                            "gpu {} has two threadblocks sending to {peer} on channel {}",
                            gpu.id, tb.channel
                        ),
                    ));
                }
            }
            if let Some(peer) = tb.recv_peer {
                if !recv_streams.insert((peer, tb.channel)) {
                    return Err(schema(
                        tb.steps.first().map_or(1, |s| s.line),
                        format!(
                            "gpu {} has two threadblocks receiving from {peer} on channel {}",
                            gpu.id, tb.channel
                        ),
                    ));
                }
            }

            for (pos, step) in tb.steps.iter().enumerate() {
                if step.index != pos {
                    return Err(schema(
                        step.line,
                        format!(
                            "step indices of threadblock {} on gpu {} must be 0, 1, 2, ...; found {} at position {pos}",
                            tb.id, gpu.id, step.index
                        ),
                    ));
                }
                if step.kind.sends() && tb.send_peer.is_none() {
                    return Err(schema(
                        step.line,
                        format!("step type {} in threadblock {} without a send peer", step.kind, tb.id),
                    ));
                }
                if step.kind.receives() && tb.recv_peer.is_none() {
                    return Err(schema(
                        step.line,
                        format!("step type {} in threadblock {} without a recv peer", step.kind, tb.id),
                    ));
                }
                for r in [step.src, step.dst].into_iter().flatten() {
                    if let Some(max) = limit(r.buf) {
                        if r.offset as u64 + step.count as u64 > max as u64 {
                            return Err(schema(
                                step.line,
                                format!(
                                    "chunks {}..{} exceed the {:?} buffer of {max} chunks",
                                    r.offset,
                                    r.offset + step.count,
                                    r.buf
                                ),
                            ));
                        }
                    }
                }
                if let Some((dep_tb, dep_step)) = step.depend {
                    let ok = gpu
                        .threadblock(dep_tb)
                        .is_some_and(|t| dep_step < t.steps.len());
                    if !ok {
                        return Err(Error::Ref {
                            line: step.line,
                            message: format!(
                                "gpu {} threadblock {} step {} depends on missing threadblock {dep_tb} step {dep_step}",
                                gpu.id, tb.id, step.index
                            ),
                        });
                    }
                }
            }
        }
    }
    Ok(())
}
