use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use super::causal::{AccessKind, AccessLog, LoggedSegmenter, SequenceView};
use super::config::{BackendKind, PipelineConfig};
use crate::backends::{
    color_model_segmenter, grid_proposal_source, histogram_scorer, oracle_proposal_source, oracle_scorer,
    oracle_segmenter, region_proposal_source, OracleContext, ProposalUnion,
};
use crate::data::{
    list_sequences, read_csv_rows, read_label_maps, read_sequence, BoxRecord, ProposalRecord, RunRecord,
    VideoSequence, ANNOTATIONS_DIR, GT_BOXES_DIR,
};
use crate::drsn::{merge_objects, segment_object, MaskSegmenter, ObjectHistory, ReferenceConfig};
use crate::error::{Error, Result};
use crate::eval::{auc_success, evaluate_sequence, EvalOptions, EvalReport};
use crate::geometry::{BoundingBox, LabelMap, ProbabilityMap};
use crate::opn::{candidates_from_proposals, recall_at, CandidateSet, Proposal, ProposalSource};
use crate::otn::{self, AppearanceScorer, TrackerState};
use crate::rng::{self, Stage};

/// Output of one sequence. `masks[0]` is the given annotation.
#[derive(Debug, Clone)]
pub struct SequenceResult {
    pub name: String,
    pub masks: Vec<LabelMap>,
    pub boxes: Vec<BoxRecord>,
    pub proposals: Vec<ProposalRecord>,
    /// Present when every frame of the input is annotated.
    pub report: Option<EvalReport>,
    pub elapsed: Duration,
}

struct ObjectRunner {
    id: u8,
    seed: u64,
    source: Option<Box<dyn ProposalSource>>,
    scorer: Box<dyn AppearanceScorer>,
    segmenter: Box<dyn MaskSegmenter>,
    tracker: TrackerState,
    history: ObjectHistory,
    last_box: BoundingBox,
}

struct ObjectFrame {
    probability: ProbabilityMap,
    bbox: BoundingBox,
    success: bool,
    proposals: Vec<Proposal>,
}

impl ObjectRunner {
    fn new(view: SequenceView<'_>, cfg: &PipelineConfig, refs: &ReferenceConfig) -> Result<Self> {
        let id = view.object;
        let seq = view.seq;
        let first_frame = view.frame(1, 1);
        let mask = view.first_annotation().mask_of(id);
        let first_box = mask.enclosing_box().ok_or(Error::EmptyMask)?;
        let seed = rng::derive_seed(cfg.seed, &[rng::stable_hash(&seq.name), id as u64]);

        let ctx = if cfg.backends.needs_ground_truth() {
            let masks = seq.object_masks(id).ok_or_else(|| {
                Error::Data(format!("{}: oracle backends need ground truth on every frame", seq.name))
            })?;
            Some(OracleContext::new(masks, rng::derive_seed(seed, &[Stage::Proposals as u64]))?)
        } else {
            None
        };
        let oracle = || ctx.clone().expect("context built when an oracle is selected");

        let source: Option<Box<dyn ProposalSource>> = match (cfg.use_opn && cfg.use_otn, cfg.backends.proposals) {
            (false, _) => None,
            (true, BackendKind::Oracle) => Some(Box::new(oracle_proposal_source(oracle(), cfg.oracle)?)),
            (true, BackendKind::Classical) => Some(Box::new(ProposalUnion::new(vec![
                Box::new(region_proposal_source(cfg.regions.clone())?),
                Box::new(grid_proposal_source(cfg.grid.clone())?),
            ]))),
        };
        let scorer: Box<dyn AppearanceScorer> = match cfg.backends.scorer {
            BackendKind::Oracle => Box::new(oracle_scorer(oracle())),
            BackendKind::Classical => Box::new(histogram_scorer(first_frame, &mask, cfg.histogram)?),
        };
        let mut segmenter: Box<dyn MaskSegmenter> = match cfg.backends.segmenter {
            BackendKind::Oracle => Box::new(oracle_segmenter(oracle())),
            BackendKind::Classical => Box::new(color_model_segmenter(cfg.segmenter)?),
        };
        let history = ObjectHistory::new(first_frame, &mask, refs)?;
        segmenter.adapt_to_first_frame(history.static_reference())?;
        Ok(Self {
            id,
            seed,
            source,
            scorer,
            segmenter,
            tracker: TrackerState::new(first_box, &cfg.tracker),
            history,
            last_box: first_box,
        })
    }

    fn advance(&mut self, view: SequenceView<'_>, n: usize, cfg: &PipelineConfig, refs: &ReferenceConfig) -> Result<ObjectFrame> {
        let frame = view.frame(n, n);
        let mut proposals = Vec::new();
        let (bbox, success) = if cfg.use_otn {
            let prev = self.tracker.current_box;
            let mut fill_rng = rng::stream(self.seed, &[n as u64, Stage::FillUp as u64]);
            let candidates = match &self.source {
                Some(src) => {
                    proposals = src.propose(frame, n)?;
                    candidates_from_proposals(&proposals, &prev, &cfg.filter, &mut fill_rng)
                }
                None => CandidateSet::gaussian_only(&prev, &cfg.filter, &mut fill_rng),
            };
            let out = otn::step(&mut self.tracker, frame, &candidates, self.scorer.as_mut(), &cfg.tracker)?;
            (out.bbox, out.success)
        } else {
            view.note(n, AccessKind::Prediction, n - 1);
            match self.history.bbox(n - 1) {
                Some(b) => (b, true),
                None => (self.last_box, false),
            }
        };
        self.last_box = bbox;
        let logged = LoggedSegmenter {
            inner: self.segmenter.as_ref(),
            view,
        };
        let seg = segment_object(&mut self.history, frame, n, &bbox, &logged, refs)?;
        Ok(ObjectFrame {
            probability: seg.probability,
            bbox,
            success,
            proposals,
        })
    }
}

/// Runs the cascade over one sequence, frame by frame. Objects advance in
/// parallel and meet at the per-frame merge. With `log`, every read of
/// frames, annotations and predictions is recorded.
pub fn run_sequence(seq: &VideoSequence, cfg: &PipelineConfig, log: Option<&AccessLog>) -> Result<SequenceResult> {
    cfg.validate()?;
    let start = Instant::now();
    let refs = cfg.effective_references();
    let view = |object| SequenceView { seq, log, object };
    let mut runners = seq
        .object_ids
        .iter()
        .map(|&id| ObjectRunner::new(view(id), cfg, &refs))
        .collect::<Result<Vec<_>>>()?;

    let mut masks = vec![seq.first_annotation().clone()];
    let mut boxes: Vec<BoxRecord> = runners
        .iter()
        .map(|r| BoxRecord::new(&seq.name, r.id, 1, &r.last_box, true))
        .collect();
    let mut proposals = Vec::new();
    let (w, h) = seq.dims();

    for n in 2..=seq.len() {
        let outs = runners
            .par_iter_mut()
            .map(|r| {
                let v = view(r.id);
                r.advance(v, n, cfg, &refs)
            })
            .collect::<Result<Vec<_>>>()?;
        let per_object: Vec<(u8, &ProbabilityMap)> =
            runners.iter().zip(&outs).map(|(r, o)| (r.id, &o.probability)).collect();
        masks.push(if per_object.is_empty() {
            LabelMap::new(w, h)
        } else {
            merge_objects(&per_object, refs.fg_threshold)?
        });
        for (r, o) in runners.iter().zip(&outs) {
            boxes.push(BoxRecord::new(&seq.name, r.id, n, &o.bbox, o.success));
            if cfg.dump_proposals {
                proposals.extend(o.proposals.iter().map(|p| ProposalRecord {
                    sequence: seq.name.clone(),
                    object: r.id,
                    frame: n,
                    x: p.bbox.x,
                    y: p.bbox.y,
                    w: p.bbox.w,
                    h: p.bbox.h,
                    objectness: p.objectness,
                }));
            }
        }
    }
    boxes.sort_by_key(|b| (b.object, b.frame));

    let report = match seq.ground_truth() {
        Some(gts) => Some(evaluate_sequence(&seq.name, &masks, &gts, &seq.object_ids, &cfg.eval)?),
        None => None,
    };
    Ok(SequenceResult {
        name: seq.name.clone(),
        masks,
        boxes,
        proposals,
        report,
        elapsed: start.elapsed(),
    })
}

pub fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))
}

/// Runs several sequences in parallel on a pool of `cfg.jobs` threads.
pub fn run_sequences(seqs: &[VideoSequence], cfg: &PipelineConfig, log: Option<&AccessLog>) -> Result<Vec<Result<SequenceResult>>> {
    let pool = thread_pool(cfg.jobs)?;
    Ok(pool.install(|| seqs.par_iter().map(|s| run_sequence(s, cfg, log)).collect()))
}

/// Outcome of a dataset run; failed sequences are listed with their error.
#[derive(Debug)]
pub struct DatasetRun {
    pub report: EvalReport,
    pub completed: Vec<String>,
    pub failures: Vec<(String, Error)>,
}

/// Writes the results of successful sequences into `run`.
pub fn persist_results(run: &RunRecord, cfg: &PipelineConfig, results: &[SequenceResult]) -> Result<EvalReport> {
    run.write_config_snapshot(&cfg.to_toml())?;
    let mut boxes = Vec::new();
    let mut proposals = Vec::new();
    let mut timing = String::new();
    for r in results {
        run.write_predictions(&r.name, &r.masks, cfg.output_format)?;
        boxes.extend(r.boxes.iter().cloned());
        proposals.extend(r.proposals.iter().cloned());
        timing.push_str(&format!("{} {:.3}s\n", r.name, r.elapsed.as_secs_f64()));
    }
    run.write_boxes(&boxes)?;
    if cfg.dump_proposals {
        run.write_proposals(&proposals)?;
    }
    let report = EvalReport::merge(results.iter().filter_map(|r| r.report.clone()));
    run.write_report(&report)?;
    run.write_timing(&timing)?;
    Ok(report)
}

/// Runs every sequence of the dataset at `root` and persists the run.
pub fn run_dataset(root: &Path, cfg: &PipelineConfig, run_dir: &Path) -> Result<DatasetRun> {
    cfg.validate()?;
    let names = list_sequences(root)?;
    if names.is_empty() {
        return Err(Error::format(root, "no sequences"));
    }
    let pool = thread_pool(cfg.jobs)?;
    let outcomes: Vec<(String, Result<SequenceResult>)> = pool.install(|| {
        names
            .par_iter()
            .map(|name| (name.clone(), read_sequence(root, name).and_then(|s| run_sequence(&s, cfg, None))))
            .collect()
    });
    let mut results = Vec::new();
    let mut failures = Vec::new();
    for (name, outcome) in outcomes {
        match outcome {
            Ok(r) => results.push(r),
            Err(e) => failures.push((name, e)),
        }
    }
    let run = RunRecord::create(run_dir)?;
    let report = persist_results(&run, cfg, &results)?;
    Ok(DatasetRun {
        report,
        completed: results.into_iter().map(|r| r.name).collect(),
        failures,
    })
}

/// Ground-truth boxes from a CSV file, from `<root>/Boxes/*.csv`, or
/// derived from the annotations under `<root>/Annotations`.
pub fn ground_truth_boxes(path: &Path) -> Result<Vec<BoxRecord>> {
    if path.is_file() {
        return read_csv_rows(path);
    }
    let boxes_dir = path.join(GT_BOXES_DIR);
    if boxes_dir.is_dir() {
        let mut files: Vec<_> = std::fs::read_dir(&boxes_dir)
            .map_err(|e| Error::io(&boxes_dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "csv"))
            .collect();
        files.sort();
        let mut rows = Vec::new();
        for f in files {
            rows.extend(read_csv_rows::<BoxRecord>(&f)?);
        }
        return Ok(rows);
    }
    let mut rows = Vec::new();
    for name in list_sequences(path)? {
        let seq = read_sequence(path, &name)?;
        for (&frame, ann) in &seq.annotations {
            for &id in &seq.object_ids {
                if let Some(b) = ann.mask_of(id).enclosing_box() {
                    rows.push(BoxRecord::new(&name, id, frame, &b, true));
                }
            }
        }
    }
    Ok(rows)
}

type FrameKey = (String, u8, usize);

fn key(sequence: &str, object: u8, frame: usize) -> FrameKey {
    (sequence.to_string(), object, frame)
}

/// Success-plot AUC pooled over every (sequence, object, frame) after the
/// first where the object is visible and a prediction exists.
pub fn track_eval(pred: &[BoxRecord], gt: &[BoxRecord]) -> Result<(f64, usize)> {
    let preds: BTreeMap<FrameKey, BoundingBox> = pred.iter().map(|r| (key(&r.sequence, r.object, r.frame), r.bbox())).collect();
    let (mut p, mut g) = (Vec::new(), Vec::new());
    for r in gt.iter().filter(|r| r.frame >= 2) {
        if let Some(b) = preds.get(&key(&r.sequence, r.object, r.frame)) {
            p.push(*b);
            g.push(r.bbox());
        }
    }
    Ok((auc_success(&p, &g)?, p.len()))
}

/// Proposal recall at `thresh` over every ground-truth box after the first
/// frame; frames without dumped proposals count as misses.
pub fn proposal_recall(proposals: &[ProposalRecord], gt: &[BoxRecord], thresh: f64) -> Result<(f64, usize)> {
    let mut by_frame: BTreeMap<FrameKey, Vec<Proposal>> = BTreeMap::new();
    for p in proposals {
        by_frame
            .entry(key(&p.sequence, p.object, p.frame))
            .or_default()
            .push(Proposal::new(p.bbox(), p.objectness));
    }
    let (mut per_frame, mut boxes) = (Vec::new(), Vec::new());
    for r in gt.iter().filter(|r| r.frame >= 2) {
        per_frame.push(by_frame.remove(&key(&r.sequence, r.object, r.frame)).unwrap_or_default());
        boxes.push(r.bbox());
    }
    Ok((recall_at(&per_frame, &boxes, thresh)?, boxes.len()))
}

/// Scores predicted label maps in `<pred_root>/<sequence>/` against the
/// annotations of the dataset at `gt_root` (or a bare annotations root).
pub fn evaluate_directories(pred_root: &Path, gt_root: &Path, opts: &EvalOptions) -> Result<EvalReport> {
    let ann_root = if gt_root.join(ANNOTATIONS_DIR).is_dir() {
        gt_root.join(ANNOTATIONS_DIR)
    } else {
        gt_root.to_path_buf()
    };
    let mut names: Vec<String> = std::fs::read_dir(pred_root)
        .map_err(|e| Error::io(pred_root, e))?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_dir())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    if names.is_empty() {
        return Err(Error::format(pred_root, "no prediction directories"));
    }
    let mut reports = Vec::new();
    for name in names {
        let preds = read_label_maps(&pred_root.join(&name))?;
        let gt_dir = ann_root.join(&name);
        let gts = read_label_maps(&gt_dir)?;
        let first = gts.first().ok_or_else(|| Error::format(&gt_dir, "no annotations"))?;
        reports.push(evaluate_sequence(&name, &preds, &gts, &first.object_ids(), opts)?);
    }
    Ok(EvalReport::merge(reports))
}
