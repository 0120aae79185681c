//! Relative pose labeling: (x, y, phi) of the subject in the drone's
//! body-fixed 2-D frame, from synchronized absolute poses.
//!
//! Conventions: x forward along the drone's heading, y left,
//! counter-clockwise angles positive, phi = subject yaw - drone yaw wrapped
//! to (-pi, pi].

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A 2-D pose in the world frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbsolutePose2D<F = f64> {
    pub px: F,
    pub py: F,
    pub yaw: F,
}

/// The label triple: subject pose relative to the drone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelativePose<F = f64> {
    pub x: F,
    pub y: F,
    pub phi: F,
}

/// Wrap an angle to (-pi, pi].
pub fn wrap_angle<F: Float>(a: F) -> Result<F> {
    if !a.is_finite() {
        return Err(Error::Argument("non-finite angle".into()));
    }
    let pi = F::from(std::f64::consts::PI).unwrap();
    let tau = pi + pi;
    let mut r = a % tau;
    if r <= -pi {
        r = r + tau;
    } else if r > pi {
        r = r - tau;
    }
    Ok(r)
}

/// Subject pose expressed in the drone's body frame: translate by the drone
/// position, rotate by -drone.yaw, wrap the heading difference.
pub fn relative_pose<F: Float>(
    drone: &AbsolutePose2D<F>,
    subject: &AbsolutePose2D<F>,
) -> Result<RelativePose<F>> {
    let dx = subject.px - drone.px;
    let dy = subject.py - drone.py;
    let (s, c) = drone.yaw.sin_cos();
    Ok(RelativePose {
        x: c * dx + s * dy,
        y: -s * dx + c * dy,
        phi: wrap_angle(subject.yaw - drone.yaw)?,
    })
}

/// One timestamped absolute pose in a motion-capture track.
#[derive(Debug, Clone, Copy)]
pub struct TrackSample<F = f64> {
    pub t: F,
    pub pose: AbsolutePose2D<F>,
}

/// Heading of the body x-axis projected on the ground plane, from a unit
/// quaternion (x, y, z, w).
pub fn quaternion_yaw<F: Float>(qx: F, qy: F, qz: F, qw: F) -> F {
    let one = F::one();
    let two = one + one;
    // body x-axis rotated into the world frame, z discarded
    let fwd_x = one - two * (qy * qy + qz * qz);
    let fwd_y = two * (qx * qy + qw * qz);
    fwd_y.atan2(fwd_x)
}

/// Linear position interpolation and shortest-arc yaw interpolation at `t`
/// between two bracketing samples.
fn interpolate<F: Float>(a: &TrackSample<F>, b: &TrackSample<F>, t: F) -> Result<AbsolutePose2D<F>> {
    if b.t == a.t {
        return Ok(a.pose);
    }
    let u = (t - a.t) / (b.t - a.t);
    let dyaw = wrap_angle(b.pose.yaw - a.pose.yaw)?;
    Ok(AbsolutePose2D {
        px: a.pose.px + u * (b.pose.px - a.pose.px),
        py: a.pose.py + u * (b.pose.py - a.pose.py),
        yaw: wrap_angle(a.pose.yaw + u * dyaw)?,
    })
}

/// Pose at time `t` from a sorted track, or None when the bracketing gap
/// exceeds `max_gap` (or `t` falls outside the track).
fn sample_track<F: Float>(track: &[TrackSample<F>], t: F, max_gap: F) -> Result<Option<AbsolutePose2D<F>>> {
    let after = track.partition_point(|s| s.t < t);
    // exact hit uses the sample verbatim
    if after < track.len() && track[after].t == t {
        return Ok(Some(track[after].pose));
    }
    if after == 0 || after == track.len() {
        return Ok(None);
    }
    let (a, b) = (&track[after - 1], &track[after]);
    if b.t - a.t > max_gap {
        return Ok(None);
    }
    Ok(Some(interpolate(a, b, t)?))
}

fn check_sorted<F: Float>(track: &[TrackSample<F>], name: &str) -> Result<()> {
    if track.windows(2).any(|w| w[1].t < w[0].t) {
        return Err(Error::Data(format!("{name} track is not sorted by timestamp")));
    }
    Ok(())
}

/// Per-frame labeling result.
pub struct LabelingSummary<F = f64> {
    pub labels: Vec<(String, RelativePose<F>)>,
    pub dropped: usize,
}

/// Label every frame whose timestamp can be bracketed within `max_gap` on
/// both tracks; the rest are dropped and counted.
pub fn resample_and_label<F: Float>(
    frames: &[(String, F)],
    drone_track: &[TrackSample<F>],
    subject_track: &[TrackSample<F>],
    max_gap: F,
) -> Result<LabelingSummary<F>> {
    check_sorted(drone_track, "drone")?;
    check_sorted(subject_track, "subject")?;
    let mut labels = Vec::with_capacity(frames.len());
    let mut dropped = 0usize;
    for (frame_id, t) in frames {
        let drone = sample_track(drone_track, *t, max_gap)?;
        let subject = sample_track(subject_track, *t, max_gap)?;
        match (drone, subject) {
            (Some(d), Some(s)) => labels.push((frame_id.clone(), relative_pose(&d, &s)?)),
            _ => dropped += 1,
        }
    }
    Ok(LabelingSummary { labels, dropped })
}

/// Row of a rigid-body track CSV: `timestamp_s, px, py, pz, qx, qy, qz, qw`.
#[derive(Debug, Deserialize)]
struct TrackRow {
    timestamp_s: f64,
    px: f64,
    py: f64,
    #[allow(dead_code)]
    pz: f64,
    qx: f64,
    qy: f64,
    qz: f64,
    qw: f64,
}

/// Load a mocap track CSV, projecting each 3-D pose to the ground plane
/// (z discarded, yaw from the body x-axis heading).
pub fn load_track_csv(path: &std::path::Path) -> Result<Vec<TrackSample<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let mut track = Vec::new();
    for row in reader.deserialize() {
        let row: TrackRow = row.map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        track.push(TrackSample {
            t: row.timestamp_s,
            pose: AbsolutePose2D {
                px: row.px,
                py: row.py,
                yaw: quaternion_yaw(row.qx, row.qy, row.qz, row.qw),
            },
        });
    }
    Ok(track)
}

/// Load a frame-timestamp CSV: `frame_id, timestamp_s`.
pub fn load_frames_csv(path: &std::path::Path) -> Result<Vec<(String, f64)>> {
    #[derive(Deserialize)]
    struct FrameRow {
        frame_id: String,
        timestamp_s: f64,
    }
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let mut frames = Vec::new();
    for row in reader.deserialize() {
        let row: FrameRow = row.map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        frames.push((row.frame_id, row.timestamp_s));
    }
    Ok(frames)
}

/// Write labels as `frame_id, x, y, phi` with 9 decimal digits.
pub fn write_labels_csv(
    path: &std::path::Path,
    labels: &[(String, RelativePose<f64>)],
) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    writer
        .write_record(["frame_id", "x", "y", "phi"])
        .map_err(|e| Error::Data(e.to_string()))?;
    for (id, pose) in labels {
        writer
            .write_record([
                id.clone(),
                format!("{:.9}", pose.x),
                format!("{:.9}", pose.y),
                format!("{:.9}", pose.phi),
            ])
            .map_err(|e| Error::Data(e.to_string()))?;
    }
    writer.flush().map_err(|e| Error::Data(e.to_string()))
}
