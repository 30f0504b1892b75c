use super::*;
use crate::data::{generate_synthetic, CategorySpec, Court, Dataset, Event, EventSequence, Frame, SynthConfig};
use crate::neural::{grad_check, BackboneConfig, EncoderKind, ParamStore};

fn tiny_synth(n_sequences: usize, events: [usize; 2], seed: u64) -> Dataset {
    let cfg = SynthConfig {
        n_sequences,
        events_per_sequence: events,
        categories: vec![
            CategorySpec {
                name: "fast".into(),
                rate: 3.0,
                mean_shift: [4.0, 0.0],
                shift_noise: 1.0,
            },
            CategorySpec {
                name: "slow".into(),
                rate: 0.7,
                mean_shift: [-3.0, 2.0],
                shift_noise: 1.0,
            },
        ],
        transition: vec![vec![0.7, 0.3], vec![0.4, 0.6]],
        initial: None,
        frame_rate: 10.0,
        feature_noise: 0.05,
        n_players: 1,
        player_spread: 3.0,
        lead_player: false,
        court: Court {
            width: 40.0,
            height: 20.0,
        },
        seed,
    };
    generate_synthetic(&cfg).unwrap()
}

fn config(head: HeadKind, frame_dim: usize) -> TpmConfig {
    TpmConfig {
        head,
        backbone: BackboneConfig {
            encoder: EncoderKind::Concat,
            frame_dim,
            encoder_dim: 4,
            lower_hidden: 5,
            upper_hidden: 4,
        },
        sigma: [2.0, 2.0],
        seed: 3,
    }
}

fn model_for(ds: &Dataset, head: HeadKind) -> TpmModel {
    TpmModel::new(config(head, ds.header.feature_dim), ds.classes().to_vec(), Normalization::fit(ds)).unwrap()
}

#[test]
fn joint_gradients_match_finite_differences() {
    let ds = tiny_synth(1, [5, 5], 11);
    let seq = &ds.sequences[0];
    assert_eq!(seq.events.len(), 5);
    for head in [HeadKind::A, HeadKind::B] {
        let model = model_for(&ds, head);
        let loss = |s: &ParamStore| model.loss_and_grads(s, seq, Objective::Joint).unwrap();
        let r = grad_check(model.store(), loss, 1e-5, None);
        assert!(r.max_rel_error < 1e-4, "{head:?}: {r:?}");
    }
}

#[test]
fn tape_loss_equals_value_level_terms() {
    let ds = tiny_synth(3, [4, 9], 5);
    for head in [HeadKind::A, HeadKind::B] {
        let model = model_for(&ds, head);
        for seq in &ds.sequences {
            let (tape_nll, _) = model.loss_and_grads(model.store(), seq, Objective::Joint).unwrap();
            let terms = model.transition_terms(seq).unwrap();
            let sum: f64 = terms.iter().map(|t| t.time + t.category + t.space).sum();
            assert!((tape_nll + sum).abs() < 1e-12 * (1.0 + sum.abs()));
            assert!((model.joint_nll(seq).unwrap() + sum).abs() < 1e-12);
            let time_only = model.loss_and_grads(model.store(), seq, Objective::TimeOnly).unwrap().0;
            let time_sum: f64 = terms.iter().map(|t| t.time).sum();
            assert!((time_only + time_sum).abs() < 1e-12 * (1.0 + time_sum.abs()));
        }
    }
}

#[test]
fn single_event_sequences_have_zero_loss() {
    let seq = EventSequence {
        id: "one".into(),
        frames: vec![Frame {
            t: 0.0,
            features: vec![0.0; 4],
        }],
        events: vec![Event {
            frame: 0,
            t: 0.0,
            category: 0,
            x: 0.0,
            y: 0.0,
        }],
    };
    let model = TpmModel::new(config(HeadKind::B, 4), vec!["a".into()], Normalization::identity(4)).unwrap();
    assert_eq!(model.joint_nll(&seq).unwrap(), 0.0);
    assert!(model.evaluate_teacher_forced(&seq, None).unwrap().is_empty());
}

#[test]
fn teacher_forced_records_are_causal() {
    let ds = tiny_synth(2, [6, 10], 8);
    let model = model_for(&ds, HeadKind::A);
    let seq = &ds.sequences[0];
    let recs = model.evaluate_teacher_forced(seq, None).unwrap();
    assert_eq!(recs.len(), seq.events.len() - 1);
    for j in 1..seq.events.len() - 1 {
        let mut cut = seq.clone();
        cut.events.truncate(j + 2);
        cut.frames.truncate(cut.events[j + 1].frame + 1);
        // perturb everything after event j's frame
        let fj = cut.events[j].frame;
        for f in &mut cut.frames[fj + 1..] {
            f.features.iter_mut().for_each(|v| *v += 5.0);
        }
        let short = model.evaluate_teacher_forced(&cut, None).unwrap();
        assert_eq!(short[j], recs[j]);
    }
    for r in &recs {
        assert!(r.predicted_time > r.current_time);
        assert!((r.category_distribution.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn training_reduces_loss_and_is_deterministic() {
    let ds = tiny_synth(6, [5, 12], 21);
    let tc = TrainConfig {
        epochs: 30,
        learning_rate: 0.02,
        ..TrainConfig::default()
    };
    let (m1, log1) = train(&ds, config(HeadKind::B, ds.header.feature_dim), &tc).unwrap();
    assert!(log1.final_nll < log1.initial_nll);
    let (m2, log2) = train(&ds, config(HeadKind::B, ds.header.feature_dim), &tc).unwrap();
    assert_eq!(log1, log2);
    assert_eq!(m1.store(), m2.store());
    let small = TrainConfig {
        epochs: 15,
        learning_rate: 0.002,
        keep_best: false,
        ..TrainConfig::default()
    };
    let (_, log) = train(&ds, config(HeadKind::A, ds.header.feature_dim), &small).unwrap();
    assert!(log.epochs.windows(2).all(|w| w[1].nll <= w[0].nll + 1e-9), "{:?}", log.epochs);
}

#[test]
fn checkpoint_round_trip() {
    let ds = tiny_synth(2, [4, 6], 1);
    let model = LoadedModel::Tpm(model_for(&ds, HeadKind::A));
    let ckpt = model.to_checkpoint(None);
    let text = serde_json::to_string(&ckpt).unwrap();
    let back = LoadedModel::from_checkpoint(&serde_json::from_str(&text).unwrap()).unwrap();
    let (LoadedModel::Tpm(a), LoadedModel::Tpm(b)) = (&model, &back) else {
        panic!("kind changed");
    };
    assert_eq!(a.store(), b.store());
    let seq = &ds.sequences[0];
    assert_eq!(
        a.evaluate_teacher_forced(seq, None).unwrap(),
        b.evaluate_teacher_forced(seq, None).unwrap()
    );

    let reg = RegressionModel::new(
        RegressionConfig {
            backbone: config(HeadKind::B, ds.header.feature_dim).backbone,
            seed: 2,
        },
        ds.classes().to_vec(),
        Normalization::fit(&ds),
    )
    .unwrap();
    let ck = LoadedModel::Regression(reg).to_checkpoint(None);
    assert_eq!(ck.kind, ModelKind::Regression);
    assert!(matches!(LoadedModel::from_checkpoint(&ck).unwrap(), LoadedModel::Regression(_)));
}

#[test]
fn regression_clamps_and_learns_constant_interval() {
    // events every 0.5 s, uninformative frames
    let seqs: Vec<(String, Vec<f64>)> = (0..4)
        .map(|i| (format!("s{i}"), (0..12).map(|k| 0.5 * k as f64).collect()))
        .collect();
    let ds = Dataset::from_event_times(seqs);
    let cfg = RegressionConfig {
        backbone: BackboneConfig {
            encoder: EncoderKind::Concat,
            frame_dim: 1,
            encoder_dim: 3,
            lower_hidden: 3,
            upper_hidden: 3,
        },
        seed: 4,
    };
    let tc = TrainConfig {
        epochs: 300,
        learning_rate: 0.02,
        ..TrainConfig::default()
    };
    let (model, log) = train_regression_baseline(&ds, cfg.clone(), &tc).unwrap();
    assert!(log.final_nll < 1e-3, "{}", log.final_nll);
    for r in model.evaluate_teacher_forced(&ds.sequences[0]).unwrap() {
        assert!((r.predicted_time - r.truth_time).abs() < 0.05);
    }

    let mut neg = RegressionModel::new(cfg, ds.classes().to_vec(), Normalization::fit(&ds)).unwrap();
    let ckpt = {
        let mut c = LoadedModel::Regression(neg.clone()).to_checkpoint(None);
        c.params.params.get_mut("head.regression.b").unwrap().values[0] = -50.0;
        c
    };
    if let LoadedModel::Regression(m) = LoadedModel::from_checkpoint(&ckpt).unwrap() {
        neg = m;
    }
    for r in neg.evaluate_teacher_forced(&ds.sequences[0]).unwrap() {
        assert_eq!(r.predicted_time, r.current_time + MIN_INTERVAL);
    }
}
