use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use super::{build_frames, AgentTrajectory, DataError, Dataset, DatasetHeader, Event, EventSequence, OrderingRule};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategorySpec {
    pub name: String,
    /// Rate of the exponential waiting time that follows an event of this category.
    pub rate: f64,
    /// Mean displacement into an event of this category.
    pub mean_shift: [f64; 2],
    /// Standard deviation of the displacement noise, per axis.
    pub shift_noise: f64,
}

/// Rectangle `[0, width] × [0, height]` that event locations are clipped to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Court {
    pub width: f64,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_sequences: usize,
    /// Inclusive range of events per sequence.
    pub events_per_sequence: [usize; 2],
    pub categories: Vec<CategorySpec>,
    /// Row-stochastic matrix, `transition[a][b] = P(next = b | current = a)`.
    pub transition: Vec<Vec<f64>>,
    /// Distribution of the first category; uniform when absent.
    #[serde(default)]
    pub initial: Option<Vec<f64>>,
    pub frame_rate: f64,
    /// Standard deviation of Gaussian noise added to every frame feature.
    pub feature_noise: f64,
    /// Agents besides the ball.
    pub n_players: usize,
    /// Players stay within this distance of the ball, up to noise.
    pub player_spread: f64,
    /// Place the first player at the location of the next event instead of
    /// around the ball, so frames carry a hint of where play goes.
    #[serde(default)]
    pub lead_player: bool,
    pub court: Court,
    pub seed: u64,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), DataError> {
        let err = |m: String| Err(DataError::Config(m));
        let k = self.categories.len();
        if k == 0 {
            return err("at least one category is required".into());
        }
        if self.n_sequences == 0 {
            return err("n_sequences must be at least 1".into());
        }
        let [lo, hi] = self.events_per_sequence;
        if lo < 1 || lo > hi {
            return err(format!("events_per_sequence [{lo}, {hi}] is not a valid range"));
        }
        for c in &self.categories {
            if !(c.rate > 0.0 && c.rate.is_finite()) {
                return err(format!("category {} has non-positive rate {}", c.name, c.rate));
            }
            if !(c.shift_noise >= 0.0) || !c.mean_shift.iter().all(|v| v.is_finite()) {
                return err(format!("category {} has an invalid shift", c.name));
            }
        }
        let mut names: Vec<&str> = self.categories.iter().map(|c| c.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return err("category names must be unique".into());
        }
        let check_dist = |what: &str, row: &[f64]| -> Result<(), DataError> {
            if row.len() != k {
                return Err(DataError::Config(format!("{what} has {} entries, expected {k}", row.len())));
            }
            if row.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
                return Err(DataError::Config(format!("{what} has a negative or non-finite entry")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(DataError::Config(format!("{what} sums to {s}, not 1")));
            }
            Ok(())
        };
        if self.transition.len() != k {
            return err(format!("transition matrix has {} rows, expected {k}", self.transition.len()));
        }
        for (i, row) in self.transition.iter().enumerate() {
            check_dist(&format!("transition row {i}"), row)?;
        }
        if let Some(init) = &self.initial {
            check_dist("initial distribution", init)?;
        }
        if !(self.frame_rate > 0.0 && self.frame_rate.is_finite()) {
            return err(format!("frame_rate must be positive, got {}", self.frame_rate));
        }
        if !(self.feature_noise >= 0.0) || !(self.player_spread >= 0.0) {
            return err("noise scales must be non-negative".into());
        }
        if !(self.court.width > 0.0 && self.court.height > 0.0) {
            return err("court dimensions must be positive".into());
        }
        Ok(())
    }
}

fn categorical(rng: &mut ChaCha8Rng, p: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &w) in p.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    p.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

/// Simulates a dataset. Category chains follow the transition matrix,
/// waiting times are exponential with the rate of the current category,
/// and each event moves the ball by its category's mean shift plus noise,
/// clipped to the court. Events sit on distinct frames, the first one on
/// frame 0. Frames hold the ball (linearly interpolated between events)
/// followed by the players ordered by distance to it.
pub fn generate_synthetic(config: &SynthConfig) -> Result<Dataset, DataError> {
    config.validate()?;
    let mut master = ChaCha8Rng::seed_from_u64(config.seed);
    let seeds: Vec<u64> = (0..config.n_sequences).map(|_| master.random()).collect();
    let sequences = seeds
        .iter()
        .enumerate()
        .map(|(i, &s)| simulate_sequence(config, format!("seq-{i:05}"), s))
        .collect::<Result<Vec<_>, _>>()?;
    let mut header = DatasetHeader::new(
        config.categories.iter().map(|c| c.name.clone()).collect(),
        Some(config.frame_rate),
        2 * (1 + config.n_players),
    );
    header.provenance = Some(serde_json::json!({ "generator": "synthetic", "config": config }));
    Ok(Dataset { header, sequences })
}

fn simulate_sequence(cfg: &SynthConfig, id: String, seed: u64) -> Result<EventSequence, DataError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = cfg.categories.len();
    let [lo, hi] = cfg.events_per_sequence;
    let m = rng.random_range(lo..=hi);
    let uniform = vec![1.0 / k as f64; k];
    let init = cfg.initial.as_deref().unwrap_or(&uniform);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let (w, h) = (cfg.court.width, cfg.court.height);

    let mut cat = categorical(&mut rng, init);
    let mut loc = (rng.random_range(0.0..=w), rng.random_range(0.0..=h));
    let mut tau = 0.0;
    let mut frame = 0usize;
    let mut events = Vec::with_capacity(m);
    events.push(Event {
        frame: 0,
        t: 0.0,
        category: cat,
        x: loc.0,
        y: loc.1,
    });
    for _ in 1..m {
        let wait = Exp::new(cfg.categories[cat].rate).expect("validated rate");
        tau += wait.sample(&mut rng);
        cat = categorical(&mut rng, &cfg.transition[cat]);
        let cat_spec = &cfg.categories[cat];
        let dx = cat_spec.mean_shift[0] + cat_spec.shift_noise * unit.sample(&mut rng);
        let dy = cat_spec.mean_shift[1] + cat_spec.shift_noise * unit.sample(&mut rng);
        loc = ((loc.0 + dx).clamp(0.0, w), (loc.1 + dy).clamp(0.0, h));
        frame = ((tau * cfg.frame_rate).round() as usize).max(frame + 1);
        events.push(Event {
            frame,
            t: frame as f64 / cfg.frame_rate,
            category: cat,
            x: loc.0,
            y: loc.1,
        });
    }

    let mut agents = vec![AgentTrajectory {
        id: "ball".into(),
        samples: events.iter().map(|e| (e.t, e.x, e.y)).collect(),
    }];
    for p in 0..cfg.n_players {
        let off = (
            rng.random_range(-cfg.player_spread..=cfg.player_spread),
            rng.random_range(-cfg.player_spread..=cfg.player_spread),
        );
        let jitter = 0.25 * cfg.player_spread;
        let lead = cfg.lead_player && p == 0;
        let samples = events
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let (cx, cy, off) = match (lead, events.get(i + 1)) {
                    (true, Some(n)) => (n.x, n.y, (0.0, 0.0)),
                    (true, None) => (e.x, e.y, (0.0, 0.0)),
                    (false, _) => (e.x, e.y, off),
                };
                let x = cx + off.0 + jitter * unit.sample(&mut rng);
                let y = cy + off.1 + jitter * unit.sample(&mut rng);
                (e.t, x, y)
            })
            .collect();
        agents.push(AgentTrajectory {
            id: format!("player{p:02}"),
            samples,
        });
    }
    let t_last = events.last().map(|e| e.t).unwrap_or(0.0);
    let rule = OrderingRule::DistanceTo {
        reference: "ball".into(),
    };
    let mut frames = build_frames(&agents, cfg.frame_rate, &rule, (0.0, t_last))?;
    if frames.len() != frame + 1 {
        return Err(DataError::Config(format!(
            "frame grid mismatch: {} frames for last event frame {frame}",
            frames.len()
        )));
    }
    if cfg.feature_noise > 0.0 {
        for f in &mut frames {
            for v in &mut f.features {
                *v += cfg.feature_noise * unit.sample(&mut rng);
            }
        }
    }
    Ok(EventSequence { id, frames, events })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{read_dataset, validate_dataset, write_dataset, RawEvent, RawFrame, RawSequence};

    fn cats(rates: &[f64]) -> Vec<CategorySpec> {
        rates
            .iter()
            .enumerate()
            .map(|(i, &r)| CategorySpec {
                name: format!("c{i}"),
                rate: r,
                mean_shift: [i as f64, -(i as f64)],
                shift_noise: 1.0,
            })
            .collect()
    }

    fn config(rates: &[f64], transition: Vec<Vec<f64>>) -> SynthConfig {
        SynthConfig {
            n_sequences: 100,
            events_per_sequence: [100, 100],
            categories: cats(rates),
            transition,
            initial: None,
            frame_rate: 100.0,
            feature_noise: 0.1,
            n_players: 2,
            player_spread: 5.0,
            lead_player: false,
            court: Court {
                width: 94.0,
                height: 50.0,
            },
            seed: 7,
        }
    }

    /// Waiting times grouped by the category of the event they follow.
    fn waits(ds: &Dataset) -> Vec<Vec<f64>> {
        let mut out = vec![Vec::new(); ds.n_classes()];
        for s in &ds.sequences {
            for w in s.events.windows(2) {
                out[w[0].category].push(w[1].t - w[0].t);
            }
        }
        out
    }

    #[test]
    fn single_category_mean_wait() {
        let ds = generate_synthetic(&config(&[2.0], vec![vec![1.0]])).unwrap();
        let w = &waits(&ds)[0];
        assert!(w.len() >= 9_900);
        let mean = w.iter().sum::<f64>() / w.len() as f64;
        let se = 0.5 / (w.len() as f64).sqrt();
        assert!((mean - 0.5).abs() < 3.0 * se, "mean {mean}");
    }

    #[test]
    fn identity_transition_keeps_category() {
        let mut cfg = config(&[1.0, 2.0, 3.0], vec![vec![1., 0., 0.], vec![0., 1., 0.], vec![0., 0., 1.]]);
        cfg.n_sequences = 20;
        cfg.events_per_sequence = [5, 30];
        let ds = generate_synthetic(&cfg).unwrap();
        for s in &ds.sequences {
            assert!(s.events.iter().all(|e| e.category == s.events[0].category));
        }
    }

    #[test]
    fn per_category_rates() {
        let cfg = config(&[5.0, 0.5], vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
        let ds = generate_synthetic(&cfg).unwrap();
        let w = waits(&ds);
        for (c, target) in [(0, 0.2), (1, 2.0)] {
            let mean = w[c].iter().sum::<f64>() / w[c].len() as f64;
            assert!((mean / target - 1.0).abs() < 0.05, "category {c}: {mean}");
        }
    }

    #[test]
    fn deterministic_and_valid() {
        let mut cfg = config(&[1.0, 3.0], vec![vec![0.2, 0.8], vec![0.6, 0.4]]);
        cfg.n_sequences = 10;
        cfg.events_per_sequence = [2, 20];
        cfg.frame_rate = 10.0;
        let a = generate_synthetic(&cfg).unwrap();
        assert_eq!(a, generate_synthetic(&cfg).unwrap());
        cfg.seed += 1;
        assert_ne!(a, generate_synthetic(&cfg).unwrap());
        for s in &a.sequences {
            for e in &s.events {
                assert_eq!(e.t, s.frames[e.frame].t);
                assert!((0.0..=94.0).contains(&e.x) && (0.0..=50.0).contains(&e.y));
            }
            assert_eq!(s.frames.last().unwrap().t, s.events.last().unwrap().t);
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let mut cfg = config(&[1.0, 3.0], vec![vec![0.2, 0.8], vec![0.6, 0.4]]);
        cfg.n_sequences = 5;
        cfg.events_per_sequence = [2, 10];
        cfg.frame_rate = 25.0;
        let ds = generate_synthetic(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        write_dataset(&path, &ds).unwrap();
        let back = read_dataset(&path).unwrap();
        assert_eq!(ds, back);
        for (a, b) in ds.sequences.iter().zip(&back.sequences) {
            for (fa, fb) in a.frames.iter().zip(&b.frames) {
                let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
                assert_eq!(bits(&fa.features), bits(&fb.features));
            }
        }
    }

    #[test]
    fn bad_configs_rejected() {
        let mut cfg = config(&[1.0, 3.0], vec![vec![0.2, 0.7], vec![0.6, 0.4]]);
        assert!(generate_synthetic(&cfg).is_err());
        cfg.transition[0][1] = 0.8;
        cfg.categories[1].rate = 0.0;
        assert!(generate_synthetic(&cfg).is_err());
    }

    fn raw(id: &str, times: &[f64], events: &[(usize, f64)]) -> RawSequence {
        RawSequence {
            id: id.into(),
            frames: times.iter().map(|&t| RawFrame { t, features: vec![0.0, 0.0] }).collect(),
            events: events
                .iter()
                .map(|&(frame, t)| RawEvent {
                    frame,
                    t,
                    category: "a".into(),
                    x: 0.0,
                    y: 0.0,
                })
                .collect(),
        }
    }

    fn header() -> DatasetHeader {
        DatasetHeader::new(vec!["a".into()], Some(1.0), 2)
    }

    #[test]
    fn validation_examples() {
        let good = vec![raw("s1", &[0.0, 1.0], &[(0, 0.0), (1, 1.0)]), raw("s2", &[0.0, 1.0, 2.0], &[(2, 2.0)])];
        assert_eq!(validate_dataset(header(), good).unwrap().sequences.len(), 2);

        let issues = validate_dataset(header(), vec![raw("s1", &[0.0, 1.0], &[(0, 0.0), (5, 1.0)])]).unwrap_err();
        assert!(issues.iter().any(|i| i.sequence.as_deref() == Some("s1") && i.field.contains("frame")));

        let issues = validate_dataset(header(), vec![raw("s3", &[0.0, 1.0, 1.0], &[(0, 0.0)])]).unwrap_err();
        assert!(issues.iter().any(|i| i.field == "frames[2].t"));

        let mut unknown = raw("s4", &[0.0], &[(0, 0.0)]);
        unknown.events[0].category = "zzz".into();
        assert!(validate_dataset(header(), vec![unknown]).is_err());
    }

    #[test]
    fn lead_player_marks_the_next_event() {
        let mut cfg = config(&[2.0, 1.0], vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
        cfg.n_sequences = 3;
        cfg.n_players = 1;
        cfg.feature_noise = 0.0;
        cfg.lead_player = true;
        let ds = generate_synthetic(&cfg).unwrap();
        for s in &ds.sequences {
            for w in s.events.windows(2) {
                let f = &s.frames[w[0].frame].features;
                let d = (f[2] - w[1].x).hypot(f[3] - w[1].y);
                assert!(d < 6.0 * 0.25 * cfg.player_spread, "{d}");
            }
        }
    }

    #[test]
    fn truncation_keeps_leading_events() {
        let mut cfg = config(&[2.0], vec![vec![1.0]]);
        cfg.n_sequences = 4;
        cfg.events_per_sequence = [10, 10];
        let ds = generate_synthetic(&cfg).unwrap();
        let cut = ds.truncate_frames(30);
        for (a, b) in ds.sequences.iter().zip(&cut.sequences) {
            assert!(b.frames.len() <= 30);
            let kept: Vec<_> = a.events.iter().filter(|e| e.frame < 30).cloned().collect();
            assert_eq!(b.events, kept);
            assert_eq!(b.frames[..], a.frames[..b.frames.len()]);
        }
        assert!(ds.truncate_frames(1).sequences.iter().all(|s| s.events.len() == 1));
    }
}
