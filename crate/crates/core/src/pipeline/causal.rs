use std::sync::Mutex;

use crate::data::VideoSequence;
use crate::drsn::{MaskSegmenter, ReferenceSet};
use crate::error::Result;
use crate::geometry::{Frame, LabelMap, ProbabilityMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AccessKind {
    Frame,
    Annotation,
    Prediction,
}

/// One read made while processing frame `processing` of an object.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Access {
    pub sequence: String,
    pub object: u8,
    pub processing: usize,
    pub kind: AccessKind,
    pub index: usize,
}

impl Access {
    /// Frames up to the current one, the first-frame annotation, and
    /// predictions strictly before the current frame.
    pub fn is_causal(&self) -> bool {
        match self.kind {
            AccessKind::Frame => self.index <= self.processing,
            AccessKind::Annotation => self.index == 1,
            AccessKind::Prediction => self.index >= 1 && self.index < self.processing,
        }
    }
}

/// Records every frame, annotation and prediction the pipeline reads.
#[derive(Debug, Default)]
pub struct AccessLog {
    events: Mutex<Vec<Access>>,
}

impl AccessLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&self, access: Access) {
        self.events.lock().expect("access log poisoned").push(access);
    }

    /// All accesses, sorted.
    pub fn events(&self) -> Vec<Access> {
        let mut v = self.events.lock().expect("access log poisoned").clone();
        v.sort();
        v
    }

    pub fn violations(&self) -> Vec<Access> {
        self.events().into_iter().filter(|a| !a.is_causal()).collect()
    }
}

/// Read access to a sequence on behalf of one object, optionally logged.
#[derive(Clone, Copy)]
pub(crate) struct SequenceView<'a> {
    pub seq: &'a VideoSequence,
    pub log: Option<&'a AccessLog>,
    pub object: u8,
}

impl<'a> SequenceView<'a> {
    pub fn note(&self, processing: usize, kind: AccessKind, index: usize) {
        if let Some(log) = self.log {
            log.record(Access {
                sequence: self.seq.name.clone(),
                object: self.object,
                processing,
                kind,
                index,
            });
        }
    }

    pub fn frame(&self, processing: usize, index: usize) -> &'a Frame {
        self.note(processing, AccessKind::Frame, index);
        self.seq.frame(index)
    }

    pub fn first_annotation(&self) -> &'a LabelMap {
        self.note(1, AccessKind::Annotation, 1);
        self.seq.first_annotation()
    }
}

/// Forwards to a segmenter and logs which frames its references came from.
pub(crate) struct LoggedSegmenter<'a> {
    pub inner: &'a dyn MaskSegmenter,
    pub view: SequenceView<'a>,
}

impl MaskSegmenter for LoggedSegmenter<'_> {
    fn segment(&self, refs: &ReferenceSet) -> Result<ProbabilityMap> {
        let n = refs.frame_index;
        for patch in std::iter::once(&refs.static_ref).chain(&refs.dynamic).chain(std::iter::once(&refs.current)) {
            self.view.note(n, AccessKind::Frame, patch.image_frame);
            let kind = if patch.mask_frame == 1 {
                AccessKind::Annotation
            } else {
                AccessKind::Prediction
            };
            self.view.note(n, kind, patch.mask_frame);
        }
        self.inner.segment(refs)
    }
}
