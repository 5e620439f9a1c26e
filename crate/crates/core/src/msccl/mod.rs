//! MSCCL-IR style XML programs and their conversion to traces.
//!
//! The accepted dialect:
//!
//! ```xml
//! <algo name="ring" ngpus="4" nchunks="4" coll="allreduce">
//!   <gpu id="0">
//!     <tb id="0" send="1" recv="-1" chan="0">
//!       <step s="0" type="s" srcbuf="i" srcoff="0" dstbuf="i" dstoff="0" cnt="1" depid="-1" deps="-1" hasdep="0"/>
//!     </tb>
//!   </gpu>
//! </algo>
//! ```
//!
//! Step types are `s`, `r`, `rrc`, `rcs`, `re`, `cpy` and `nop`. Buffers are
//! `i`, `o` and `s` (or `input`, `output`, `scratch`). `nchunks` counts
//! chunks of one rank's input buffer. Anything else is rejected.

mod convert;
mod parse;

use std::fmt;
use std::str::FromStr;

use crate::error::Error;
use crate::trace::CollectiveKind;

pub use convert::convert_to_trace;
pub use parse::{parse_msccl_str, parse_msccl_xml};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StepType {
    Send,
    Recv,
    RecvReduceCopy,
    RecvCopySend,
    Reduce,
    Copy,
    Nop,
}

impl StepType {
    pub fn as_str(self) -> &'static str {
        match self {
            StepType::Send => "s",
            StepType::Recv => "r",
            StepType::RecvReduceCopy => "rrc",
            StepType::RecvCopySend => "rcs",
            StepType::Reduce => "re",
            StepType::Copy => "cpy",
            StepType::Nop => "nop",
        }
    }

    pub fn sends(self) -> bool {
        matches!(self, StepType::Send | StepType::RecvCopySend)
    }

    pub fn receives(self) -> bool {
        matches!(
            self,
            StepType::Recv | StepType::RecvReduceCopy | StepType::RecvCopySend
        )
    }

    /// Trace nodes emitted for one step of this type.
    pub fn node_count(self) -> usize {
        match self {
            StepType::RecvReduceCopy | StepType::RecvCopySend => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for StepType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StepType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "s" => StepType::Send,
            "r" => StepType::Recv,
            "rrc" => StepType::RecvReduceCopy,
            "rcs" => StepType::RecvCopySend,
            "re" => StepType::Reduce,
            "cpy" => StepType::Copy,
            "nop" => StepType::Nop,
            other => return Err(format!("unknown step type {other:?}")),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MscclBuffer {
    Input,
    Output,
    Scratch,
}

impl FromStr for MscclBuffer {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "i" | "input" => Ok(MscclBuffer::Input),
            "o" | "output" => Ok(MscclBuffer::Output),
            "s" | "scratch" => Ok(MscclBuffer::Scratch),
            other => Err(format!("unknown buffer {other:?}")),
        }
    }
}

/// A buffer location: `count` chunks starting at `offset`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BufRef {
    pub buf: MscclBuffer,
    pub offset: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step {
    pub index: usize,
    pub kind: StepType,
    pub src: Option<BufRef>,
    pub dst: Option<BufRef>,
    pub count: u32,
    /// `(threadblock id, step index)` this step waits for.
    pub depend: Option<(usize, usize)>,
    pub has_dep: bool,
    /// Source line of the `<step>` element.
    pub line: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Threadblock {
    pub id: usize,
    pub send_peer: Option<usize>,
    pub recv_peer: Option<usize>,
    pub channel: u32,
    pub steps: Vec<Step>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gpu {
    pub id: usize,
    /// Sorted by threadblock id.
    pub threadblocks: Vec<Threadblock>,
}

impl Gpu {
    pub fn threadblock(&self, id: usize) -> Option<&Threadblock> {
        self.threadblocks.iter().find(|tb| tb.id == id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MscclProgram {
    pub name: String,
    pub num_gpus: usize,
    pub num_chunks: u32,
    pub collective: CollectiveKind,
    /// Indexed by gpu id.
    pub gpus: Vec<Gpu>,
}

impl MscclProgram {
    pub fn num_steps(&self) -> usize {
        self.steps().count()
    }

    pub fn steps(&self) -> impl Iterator<Item = &Step> {
        self.gpus
            .iter()
            .flat_map(|g| g.threadblocks.iter())
            .flat_map(|tb| tb.steps.iter())
    }

    /// Chunks in one rank's output buffer.
    pub fn output_chunks(&self) -> u32 {
        match self.collective {
            CollectiveKind::AllGather => self.num_chunks * self.num_gpus as u32,
            CollectiveKind::ReduceScatter => self.num_chunks / self.num_gpus as u32,
            CollectiveKind::AllReduce | CollectiveKind::Broadcast => self.num_chunks,
        }
    }
}

pub(crate) fn schema(line: u32, message: impl Into<String>) -> Error {
    Error::MscclSchema {
        line,
        message: message.into(),
    }
}
