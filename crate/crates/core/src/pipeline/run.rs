//! The frame loop: bridge matches, initialize and track each frame, decide
//! keyframes, seed and refine the map.

use std::fmt::Write as _;
use std::path::Path;

use super::config::{InputSource, MappingMode, RunConfig};
use super::io::write_atomic;
use super::source::{DatasetSource, FrameSource, SimSource};
use super::tum::{write_tum, Trajectory};
use crate::error::{Result, TvgError};
use crate::eval::{evaluate, EvalReport};
use crate::geom::{CameraIntrinsics, Pose};
use crate::mapping::{
    keyframe_decision, seed_primitives, write_keyframes_csv, Keyframe, KeyframeEvidence, Mapper,
    TriViewImages,
};
use crate::matching::{bridge_triplets, filter_parallax, PairwiseMatchSet, TriViewMatch};
use crate::splat::{render, write_ply, GaussianMap, GaussianPrimitive, Image};
use crate::tracking::{
    estimate_pair_scale_trimmed, initialize_pose_or_extrapolate, track_frame, FrameInputs,
    PoseInitSource, TrackerState,
};

/// Below this many parallax-filtered triplets the confidence-filtered set is used instead.
const MIN_FILTERED_TRIPLETS: usize = 8;

/// One tracking iteration in the run log.
#[derive(Clone, Debug, PartialEq)]
pub struct LogRow {
    pub frame: u32,
    pub iter: usize,
    pub l_photo: Option<f64>,
    pub l_2d: Option<f64>,
    pub l_3d: Option<f64>,
    pub lambda_p: f64,
    pub total: f64,
}

/// Per-frame bookkeeping.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameSummary {
    pub frame: u32,
    pub keyframe: bool,
    pub init_source: Option<PoseInitSource>,
    /// World-from-camera pose before optimization.
    pub initial_pose: Pose,
    /// Whether the pose went through the optimizer (false for bootstrap frames
    /// and when no term could be evaluated before the map exists).
    pub optimized: bool,
    pub triplets: usize,
    pub pair_scale: f64,
    pub lambda_p: f64,
    pub inliers: usize,
    pub outliers: usize,
    /// Map revision the frame was tracked against.
    pub map_revision: u64,
    pub map_size: usize,
}

pub struct RunOutcome {
    pub trajectory: Trajectory,
    pub keyframes: Vec<Keyframe>,
    pub map: GaussianMap,
    pub log: Vec<LogRow>,
    pub frames: Vec<FrameSummary>,
    pub report: Option<EvalReport>,
    /// Set when tracking aborted; everything above then covers the frames done so far.
    pub failure: Option<TvgError>,
}

fn scaled(set: &PairwiseMatchSet, s: f64) -> PairwiseMatchSet {
    let mut out = set.clone();
    for r in &mut out.records {
        r.point_in_a *= s;
        r.point_in_b *= s;
    }
    out.pair_scale = set.pair_scale * s;
    out
}

struct Loop<'a> {
    cfg: &'a RunConfig,
    k: CameraIntrinsics,
    mapper: Mapper,
    state: TrackerState,
    poses: Vec<Pose>,
    timestamps: Vec<f64>,
    log: Vec<LogRow>,
    frames: Vec<FrameSummary>,
    pending: Vec<GaussianPrimitive>,
    pending_keyframes: usize,
    last_flush: usize,
    last_scale: f64,
}

impl Loop<'_> {
    fn flush(&mut self, frame: usize) -> Result<()> {
        let before = self.mapper.map.revision;
        let candidates = std::mem::take(&mut self.pending);
        let inserted = self.mapper.insert_primitives(candidates);
        if inserted > 0 || self.pending_keyframes > 0 {
            let r = self.mapper.refine(&self.k, &self.cfg.render)?;
            log::debug!(
                "frame {frame}: map update +{inserted} -> {} primitives, loss {:?} -> {:?}",
                self.mapper.map.len(),
                r.losses.first(),
                r.losses.last()
            );
        }
        // Staleness counts frames since the map last changed.
        if self.mapper.map.revision != before {
            self.state.frames_since_keyframe = 0;
        }
        self.pending_keyframes = 0;
        self.last_flush = frame;
        Ok(())
    }

    fn register(
        &mut self,
        id: usize,
        pose: Pose,
        image: Image,
        matches: Option<PairwiseMatchSet>,
        ts: f64,
    ) {
        self.mapper.register_keyframe(Keyframe {
            id: id as u32,
            timestamp: ts,
            pose,
            image: Some(image),
            matches,
            revision: 0,
        });
        self.pending_keyframes += 1;
    }

    fn push_frame(&mut self, pose: Pose, ts: f64) {
        self.poses.push(pose);
        self.timestamps.push(ts);
    }

    fn triplets_for_tracking(
        &self,
        all: &[TriViewMatch],
        prev: &Pose,
        key: &Pose,
        cur: &Pose,
    ) -> Vec<TriViewMatch> {
        let filtered = filter_parallax(all, prev, key, cur, &self.cfg.matching.filter);
        if filtered.len() >= MIN_FILTERED_TRIPLETS {
            return filtered;
        }
        let min_conf = self.cfg.matching.filter.min_confidence;
        all.iter()
            .filter(|t| t.confidence >= min_conf)
            .cloned()
            .collect()
    }

    /// Tracks frame `t ≥ 2` and handles a keyframe decision.
    fn step(
        &mut self,
        source: &dyn FrameSource,
        t: usize,
        tracker: &crate::tracking::TrackerConfig,
    ) -> Result<()> {
        let ts = source.timestamp(t);
        let image = source.image(t)?;
        let n_kf = self.mapper.keyframes.len();
        let (prev_kf, key_kf) = (
            &self.mapper.keyframes[n_kf - 2],
            &self.mapper.keyframes[n_kf - 1],
        );
        let (prev_pose, key_pose, key_id) = (prev_kf.pose, key_kf.pose, key_kf.id);
        let stored = key_kf
            .matches
            .clone()
            .expect("keyframes after the first carry matches");
        let raw = source.matches(key_id, t as u32)?;
        let all = bridge_triplets(&stored, &raw, self.cfg.matching.join_tol)?;
        let s = match estimate_pair_scale_trimmed(&all) {
            Ok(s) => s,
            Err(e) => {
                log::warn!(
                    "frame {t}: pair scale unavailable ({e}); reusing {}",
                    self.last_scale
                );
                self.last_scale
            }
        };
        self.last_scale = s;
        let (init, init_source) = initialize_pose_or_extrapolate(&raw, &key_pose, s, &self.poses)?;
        let triplets = self.triplets_for_tracking(&all, &prev_pose, &key_pose, &init);
        self.state.pose = init;
        self.state.accumulated_scale = s;

        let mut summary = FrameSummary {
            frame: t as u32,
            keyframe: false,
            init_source: Some(init_source),
            initial_pose: init,
            optimized: false,
            triplets: triplets.len(),
            pair_scale: s,
            lambda_p: crate::tracking::dart_weight(self.state.frames_since_keyframe, &tracker.dart),
            inliers: 0,
            outliers: 0,
            map_revision: self.mapper.map.revision,
            map_size: self.mapper.map.len(),
        };
        let nothing_to_optimize = self.mapper.map.is_empty() && !tracker.use_2d && !tracker.use_3d;
        if nothing_to_optimize {
            self.state.frames_since_keyframe += 1;
        } else {
            let inputs = FrameInputs {
                frame: t as u32,
                image: Some(&image),
                triplets: &triplets,
                map: &self.mapper.map,
                intrinsics: &self.k,
                render: &self.cfg.render,
                pose_prev_key: &prev_pose,
                pose_key: &key_pose,
                pair_scale: s,
            };
            let report = track_frame(&inputs, &mut self.state, tracker)?;
            for (i, r) in report.iterations.iter().enumerate() {
                self.log.push(LogRow {
                    frame: t as u32,
                    iter: i,
                    l_photo: r.l_photo,
                    l_2d: r.l_2d,
                    l_3d: r.l_3d,
                    lambda_p: r.lambda_p,
                    total: r.total,
                });
            }
            summary.optimized = true;
            summary.lambda_p = report.lambda_p;
            summary.inliers = report.inliers;
            summary.outliers = report.outliers;
        }
        let pose = self.state.pose;
        self.push_frame(pose, ts);

        let evidence = KeyframeEvidence {
            triplets: &all,
            pose_key: &key_pose,
            pose_cur: &pose,
            matches_to_key: raw.len(),
            matches_between_keys: stored.len(),
            frames_since_keyframe: t as u32 - key_id,
            no_keyframe_yet: false,
        };
        if keyframe_decision(&self.mapper.cfg.keyframes, &evidence) {
            summary.keyframe = true;
            let cur_to_key = key_pose.inverse().compose(&pose);
            let prev_img = prev_kf_image(&self.mapper.keyframes[n_kf - 2]);
            let key_img = prev_kf_image(&self.mapper.keyframes[n_kf - 1]);
            let images = TriViewImages {
                prev: prev_img,
                key: key_img,
                cur: &image,
            };
            let seeded = seed_primitives(
                &triplets,
                &images,
                &key_pose,
                &cur_to_key,
                s,
                &self.mapper.cfg.seed_mode(),
            );
            self.pending.extend(seeded);
            self.register(t, pose, image, Some(scaled(&raw, s)), ts);
            if self.cfg.run.mapping_mode == MappingMode::Synchronous {
                self.flush(t)?;
            }
        }
        if self.cfg.run.mapping_mode == MappingMode::Deferred
            && t - self.last_flush >= self.cfg.run.defer_batch
        {
            self.flush(t)?;
        }
        self.frames.push(summary);
        Ok(())
    }
}

fn prev_kf_image(kf: &Keyframe) -> &Image {
    kf.image
        .as_ref()
        .expect("pipeline keyframes keep their images")
}

/// Runs the configured source end to end.
pub fn run_slam(cfg: &RunConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    match cfg.run.source {
        InputSource::Simulate => run_with_source(cfg, &SimSource::new(cfg)),
        InputSource::Dataset => {
            let dir = cfg.run.dataset_dir.as_ref().expect("validated");
            run_with_source(cfg, &DatasetSource::open(dir)?)
        }
    }
}

/// Runs the frame loop over `source`. Tracking failures are reported through
/// [`RunOutcome::failure`] together with the partial results; other errors
/// are returned directly.
pub fn run_with_source(cfg: &RunConfig, source: &dyn FrameSource) -> Result<RunOutcome> {
    let n = source.frame_count().min(cfg.run.frames);
    if n < 2 {
        return Err(TvgError::InsufficientEvidence { got: n, need: 2 });
    }
    let tracker = cfg.effective_tracker();
    let mut lp = Loop {
        cfg,
        k: source.intrinsics(),
        mapper: Mapper::new(cfg.effective_mapping(), cfg.run.seed),
        state: TrackerState::new(Pose::identity()),
        poses: Vec::with_capacity(n),
        timestamps: Vec::with_capacity(n),
        log: Vec::new(),
        frames: Vec::with_capacity(n),
        pending: Vec::new(),
        pending_keyframes: 0,
        last_flush: 0,
        last_scale: 1.0,
    };
    let bootstrap = |frame: usize, pose_init: Option<PoseInitSource>, pose: &Pose| FrameSummary {
        frame: frame as u32,
        keyframe: true,
        init_source: pose_init,
        initial_pose: *pose,
        optimized: false,
        triplets: 0,
        pair_scale: 1.0,
        lambda_p: 0.0,
        inliers: 0,
        outliers: 0,
        map_revision: 0,
        map_size: 0,
    };

    // Frame 0 fixes the world frame; frame 1 is placed from the first pointmap pair,
    // whose scale becomes the world scale.
    let mut failure = None;
    let t0 = source.timestamp(0);
    lp.push_frame(Pose::identity(), t0);
    lp.register(0, Pose::identity(), source.image(0)?, None, t0);
    lp.frames.push(bootstrap(0, None, &Pose::identity()));
    let m01 = source.matches(0, 1)?;
    match initialize_pose_or_extrapolate(&m01, &Pose::identity(), 1.0, &lp.poses) {
        Ok((p1, src)) => {
            let t1 = source.timestamp(1);
            lp.push_frame(p1, t1);
            lp.register(1, p1, source.image(1)?, Some(m01), t1);
            lp.frames.push(bootstrap(1, Some(src), &p1));
            lp.state = TrackerState::new(p1);
        }
        Err(e) => {
            failure = Some(TvgError::TrackingFailure {
                frame: 1,
                reason: format!("bootstrap pose: {e}"),
            })
        }
    }
    if failure.is_none() {
        for t in 2..n {
            match lp.step(source, t, &tracker) {
                Ok(()) => {}
                Err(e @ TvgError::TrackingFailure { .. }) => {
                    failure = Some(e);
                    break;
                }
                Err(e) => return Err(e),
            }
        }
    }
    if !lp.pending.is_empty() || lp.pending_keyframes > 0 {
        let last = lp.poses.len() - 1;
        lp.flush(last)?;
    }

    let trajectory = Trajectory {
        timestamps: lp.timestamps,
        poses: lp.poses,
    };
    let map = lp.mapper.map;
    let report = match (source.ground_truth(), &failure) {
        (Some(gt), None) => {
            let mut pairs = Vec::with_capacity(n);
            for (t, pose) in trajectory.poses.iter().enumerate() {
                let rendered = render(&map, &pose.inverse(), &lp.k, &cfg.render).color;
                pairs.push((source.image(t)?, rendered));
            }
            Some(evaluate(&trajectory.poses, &gt[..n], &pairs)?)
        }
        _ => None,
    };
    Ok(RunOutcome {
        trajectory,
        keyframes: lp.mapper.keyframes,
        map,
        log: lp.log,
        frames: lp.frames,
        report,
        failure,
    })
}

pub fn run_log_csv(rows: &[LogRow]) -> String {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut s = String::from("frame,iter,L_photo,L_2D,L_3D,lambda_p,total\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.frame,
            r.iter,
            opt(r.l_photo),
            opt(r.l_2d),
            opt(r.l_3d),
            r.lambda_p,
            r.total
        );
    }
    s
}

pub fn frames_csv(frames: &[FrameSummary]) -> String {
    let mut s = String::from("frame,keyframe,optimized,triplets,pair_scale,lambda_p,inliers,outliers,map_revision,map_size\n");
    for f in frames {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            f.frame,
            f.keyframe as u8,
            f.optimized as u8,
            f.triplets,
            f.pair_scale,
            f.lambda_p,
            f.inliers,
            f.outliers,
            f.map_revision,
            f.map_size
        );
    }
    s
}

/// Writes trajectory, keyframes, map, logs and (when present) the evaluation
/// report into `dir`. Every file is written atomically.
pub fn write_outputs(outcome: &RunOutcome, dir: &Path) -> Result<()> {
    write_tum(&dir.join("trajectory.tum"), &outcome.trajectory)?;
    write_keyframes_csv(&dir.join("keyframes.csv"), &outcome.keyframes)?;
    write_ply(&dir.join("map.ply"), &outcome.map)?;
    write_atomic(
        &dir.join("run_log.csv"),
        run_log_csv(&outcome.log).as_bytes(),
    )?;
    write_atomic(
        &dir.join("frames.csv"),
        frames_csv(&outcome.frames).as_bytes(),
    )?;
    if let Some(r) = &outcome.report {
        write_atomic(&dir.join("eval.csv"), r.csv().as_bytes())?;
        write_atomic(&dir.join("summary.txt"), r.summary().as_bytes())?;
    }
    if let Some(e) = &outcome.failure {
        write_atomic(&dir.join("failure.txt"), format!("{e}\n").as_bytes())?;
    }
    Ok(())
}
