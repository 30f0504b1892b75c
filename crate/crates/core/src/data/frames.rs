use serde::{Deserialize, Serialize};

use super::{DataError, Frame};

/// Timestamped `(t, x, y)` samples of one agent, `t` strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentTrajectory {
    pub id: String,
    pub samples: Vec<(f64, f64, f64)>,
}

impl AgentTrajectory {
    /// Linear interpolation; `None` outside the sampled range.
    pub fn position(&self, t: f64) -> Option<(f64, f64)> {
        const SLACK: f64 = 1e-9;
        let s = &self.samples;
        let (first, last) = (s.first()?, s.last()?);
        if t < first.0 - SLACK || t > last.0 + SLACK {
            return None;
        }
        let k = s.partition_point(|p| p.0 <= t);
        if k == 0 {
            return Some((first.1, first.2));
        }
        if k == s.len() {
            return Some((last.1, last.2));
        }
        let (a, b) = (s[k - 1], s[k]);
        let w = (t - a.0) / (b.0 - a.0);
        Some((a.1 + w * (b.1 - a.1), a.2 + w * (b.2 - a.2)))
    }
}

/// Order in which agent coordinates are concatenated into a frame.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum OrderingRule {
    ById,
    /// Reference agent first, then the others by ascending distance to it.
    DistanceTo { reference: String },
}

/// Samples every trajectory at `t0 + k / frame_rate` for all such times in
/// `[t0, t1]` and concatenates the `(x, y)` pairs per `rule`. Ties in
/// distance go to the smaller agent id.
pub fn build_frames(
    trajectories: &[AgentTrajectory],
    frame_rate: f64,
    rule: &OrderingRule,
    window: (f64, f64),
) -> Result<Vec<Frame>, DataError> {
    let (t0, t1) = window;
    if !(frame_rate > 0.0 && frame_rate.is_finite()) {
        return Err(DataError::Config(format!("frame rate must be positive, got {frame_rate}")));
    }
    if trajectories.is_empty() {
        return Err(DataError::Config("no trajectories".into()));
    }
    if !(t1 >= t0) {
        return Err(DataError::Config(format!("empty window [{t0}, {t1}]")));
    }
    let reference = match rule {
        OrderingRule::ById => None,
        OrderingRule::DistanceTo { reference } => Some(
            trajectories
                .iter()
                .position(|a| &a.id == reference)
                .ok_or_else(|| DataError::Config(format!("reference agent {reference} not found")))?,
        ),
    };
    let mut by_id: Vec<usize> = (0..trajectories.len()).collect();
    by_id.sort_by(|&a, &b| trajectories[a].id.cmp(&trajectories[b].id));

    let n = ((t1 - t0) * frame_rate + 1e-9).floor() as usize + 1;
    let mut frames = Vec::with_capacity(n);
    for k in 0..n {
        let t = t0 + k as f64 / frame_rate;
        let pos = trajectories
            .iter()
            .map(|a| {
                a.position(t).ok_or_else(|| DataError::Extrapolation {
                    agent: a.id.clone(),
                    t,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let order: Vec<usize> = match reference {
            None => by_id.clone(),
            Some(r) => {
                let (rx, ry) = pos[r];
                let dist = |i: usize| ((pos[i].0 - rx).powi(2) + (pos[i].1 - ry).powi(2)).sqrt();
                let mut rest: Vec<usize> = by_id.iter().copied().filter(|&i| i != r).collect();
                rest.sort_by(|&a, &b| dist(a).total_cmp(&dist(b)));
                std::iter::once(r).chain(rest).collect()
            }
        };
        let features = order.iter().flat_map(|&i| [pos[i].0, pos[i].1]).collect();
        frames.push(Frame { t, features });
    }
    Ok(frames)
}
