use nalgebra::{Rotation3, Unit, Vector3};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use posespace::engine::{InteractionEvent, Mode};
use posespace::geometry::{self, LandmarkFrame, WindowMode};
use posespace::musicspace::{build_space, emotion_color, EmbeddingSource, Emotion, TrackProfile};
use posespace::nets::{softmax, Architecture, JointModel};
use posespace::scaling::UnitBounds;
use posespace::service::{ClientMessage, Command, ServerMessage};
use posespace::synth::{synth_gesture, SynthParams};
use posespace::GestureClass;

fn class_strategy() -> impl Strategy<Value = GestureClass> {
    (0usize..6).prop_map(|i| GestureClass::from_index(i).unwrap())
}

fn emotion_strategy() -> impl Strategy<Value = Emotion> {
    (0usize..6).prop_map(|i| Emotion::from_index(i).unwrap())
}

fn hand(class: GestureClass, seed: u64, frame: usize) -> LandmarkFrame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = SynthParams { frames_per_clip: 12, ..SynthParams::default() };
    synth_gesture(class, &params, 0.0, &mut rng).unwrap().swap_remove(frame)
}

fn transform(frame: &LandmarkFrame, axis: [f64; 3], angle: f64, scale: f64, shift: [f64; 3]) -> LandmarkFrame {
    let rot = Rotation3::from_axis_angle(&Unit::new_normalize(Vector3::from(axis)), angle);
    let mut points = frame.points;
    for p in points.iter_mut() {
        let q = rot * Vector3::from(*p) * scale + Vector3::from(shift);
        *p = [q.x, q.y, q.z];
    }
    LandmarkFrame::new(frame.timestamp, points, frame.source_id.clone()).unwrap()
}

fn event_strategy() -> impl Strategy<Value = InteractionEvent> {
    let t = -1e3f64..1e6;
    let xy = prop::array::uniform2(-1.0f64..2.0);
    prop_oneof![
        (t.clone(), class_strategy(), 0.0f64..=1.0)
            .prop_map(|(t, class, confidence)| InteractionEvent::GestureDetected { t, class, confidence }),
        (t.clone(), xy.clone(), xy).prop_map(|(t, pose_xy, music_xy)| InteractionEvent::CursorMoved {
            t,
            pose_xy,
            music_xy
        }),
        (t.clone(), emotion_strategy()).prop_map(|(t, emotion)| InteractionEvent::EmotionHighlighted { t, emotion }),
        (t.clone(), "[a-z0-9\\-\"\\\\ ]{0,12}")
            .prop_map(|(t, track_id)| InteractionEvent::TrackSelected { t, track_id }),
        (t, any::<bool>())
            .prop_map(|(t, e)| InteractionEvent::ModeChanged { t, mode: if e { Mode::Exploring } else { Mode::Idle } }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn canonical_pose_ignores_similarity_transforms(
        class in class_strategy(),
        seed in 0u64..1000,
        frame in 0usize..12,
        axis in prop::array::uniform3(-1.0f64..1.0).prop_filter("nonzero axis", |a| a.iter().map(|x| x * x).sum::<f64>() > 1e-3),
        angle in -3.1f64..3.1,
        scale in 0.5f64..2.0,
        shift in prop::array::uniform3(-5.0f64..5.0),
    ) {
        let f = hand(class, seed, frame);
        let a = geometry::canonicalize(&f).unwrap();
        let b = geometry::canonicalize(&transform(&f, axis, angle, scale, shift)).unwrap();
        prop_assert!(a.linf_distance(&b) < 1e-6, "L-inf {}", a.linf_distance(&b));
        prop_assert!(a.values[..3].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn palm_quaternion_is_unit_in_upper_hemisphere(class in class_strategy(), seed in 0u64..1000, frame in 0usize..12) {
        let q = geometry::palm_frame(&hand(class, seed, frame)).unwrap().wxyz();
        prop_assert!(q[0] >= 0.0);
        prop_assert!((q.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn clamped_unit_map_stays_in_square(
        a in prop::array::uniform2(-10.0f64..10.0),
        b in prop::array::uniform2(-10.0f64..10.0),
        p in prop::array::uniform2(-100.0f64..100.0),
    ) {
        let bounds = UnitBounds::from_points(&[a, b]).unwrap();
        let m = bounds.map_clamped(p);
        prop_assert!(m.iter().all(|v| (0.0..=1.0).contains(v)));
        let ma = bounds.map(a);
        for axis in 0..2 {
            if a[axis] != b[axis] {
                prop_assert!(ma[axis] == 0.0 || ma[axis] == 1.0);
            } else {
                prop_assert_eq!(ma[axis], 0.5);
            }
        }
    }

    #[test]
    fn softmax_is_a_distribution(logits in prop::collection::vec(-500.0f64..500.0, 1..10)) {
        let p = softmax(&logits);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|x| x.is_finite() && *x >= 0.0));
    }

    #[test]
    fn emotion_lightness_falls_with_value(e in emotion_strategy(), lo in 0.0f64..=1.0, hi in 0.0f64..=1.0) {
        prop_assume!(lo < hi);
        let a = emotion_color(e, lo).unwrap();
        let b = emotion_color(e, hi).unwrap();
        prop_assert!(b.lightness < a.lightness);
        prop_assert_eq!(a.hue, b.hue);
    }

    #[test]
    fn nearest_queries_match_linear_scan(
        coords in prop::collection::vec(prop::array::uniform2(-3.0f64..3.0), 1..60),
        dominant in prop::collection::vec(0usize..6, 60),
        cursor in prop::array::uniform2(-0.2f64..1.2),
    ) {
        let profiles: Vec<TrackProfile> = coords
            .iter()
            .enumerate()
            .map(|(i, _)| {
                let mut emotions = [0.1; 6];
                emotions[dominant[i]] = 0.9;
                TrackProfile::new(format!("id{:03}", 59 - i), "t", emotions, &[0.0; 14], &[0.0; 14]).unwrap()
            })
            .collect();
        let space = build_space(&coords, &profiles, EmbeddingSource::Imported).unwrap();
        let d = |a: [f64; 2], b: [f64; 2]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();

        let (track, dist) = space.nearest_track(cursor).unwrap();
        let best = space.tracks.iter().map(|t| d(cursor, t.unit)).fold(f64::INFINITY, f64::min);
        let winner = space.tracks.iter().filter(|t| d(cursor, t.unit) == best).map(|t| &t.track_id).min().unwrap();
        prop_assert_eq!(&track.track_id, winner);
        prop_assert_eq!(dist, best);

        let (emotion, edist) = space.nearest_emotion(cursor).unwrap();
        let mut scan: Option<(usize, f64)> = None;
        for (i, c) in space.centers.iter().enumerate() {
            if let Some(c) = c {
                if scan.is_none_or(|(_, bd)| d(cursor, *c) < bd) {
                    scan = Some((i, d(cursor, *c)));
                }
            }
        }
        prop_assert_eq!(emotion.index(), scan.unwrap().0);
        prop_assert!((edist - scan.unwrap().1).abs() < 1e-12);
    }

    #[test]
    fn server_messages_round_trip(event in event_strategy()) {
        let msg = ServerMessage::Event { event };
        let back: ServerMessage = serde_json::from_str(&msg.to_json_line()).unwrap();
        prop_assert_eq!(back, msg);
    }

    #[test]
    fn client_messages_round_trip(
        class in class_strategy(),
        seed in 0u64..100,
        latents in prop::collection::vec(prop::array::uniform2(-1e3f64..1e3), 0..5),
        version in any::<u32>(),
    ) {
        let messages = [
            ClientMessage::Frame(hand(class, seed, 3)),
            ClientMessage::Hello { version },
            ClientMessage::Command(Command::Reset),
            ClientMessage::Command(Command::Calibrate { latents }),
        ];
        for msg in messages {
            let back: ClientMessage = serde_json::from_str(&msg.to_json_line()).unwrap();
            prop_assert_eq!(back, msg);
        }
    }
}

#[test]
fn identical_canonical_input_gives_identical_latent() {
    let model = JointModel::new(&Architecture::standard(WindowMode::Concat, 2), 5);
    let f = hand(GestureClass::CircleClockwise, 9, 4);
    let g = transform(&f, [0.2, -1.0, 0.4], 1.3, 1.7, [0.3, -0.2, 0.5]);
    let (a, b) = (geometry::canonicalize(&f).unwrap(), geometry::canonicalize(&f).unwrap());
    let window = |p: &geometry::CanonicalPose| [p.values.as_slice(), p.values.as_slice()].concat();
    let la = model.encode(&window(&a)).unwrap();
    let lb = model.encode(&window(&b)).unwrap();
    assert_eq!(la.points[0][0].to_bits(), lb.points[0][0].to_bits());
    assert_eq!(la.points[0][1].to_bits(), lb.points[0][1].to_bits());
    // The transformed copy differs only by canonicalization roundoff.
    let lc = model.encode(&window(&geometry::canonicalize(&g).unwrap())).unwrap();
    assert!((la.points[0][0] - lc.points[0][0]).abs() < 1e-6);
}
