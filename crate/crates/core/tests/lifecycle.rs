use std::collections::HashMap;

use fusetrack::association::AssociationConfig;
use fusetrack::detection::{Detection, SensorKind};
use fusetrack::geometry::GroundPoint;
use fusetrack::motion::{KalmanConfig, MotionModel};
use fusetrack::track::{TrackConfig, Tracker};
use proptest::prelude::*;

fn det(x: f64, y: f64) -> Detection {
    Detection::bev(SensorKind::Radar, GroundPoint::new(x, y), None)
}

fn tracker(cfg: TrackConfig) -> Tracker {
    Tracker::new(SensorKind::Radar, cfg, AssociationConfig::default(), false, MotionModel::ConstantVelocity(KalmanConfig::bev()))
}

#[derive(Default)]
struct Shadow {
    age: u32,
    visible: u32,
    trailing_misses: u32,
}

proptest! {
    #[test]
    fn counters_follow_the_match_history(pattern in proptest::collection::vec(any::<bool>(), 1..80)) {
        let mut tr = tracker(TrackConfig::default());
        let mut shadow: HashMap<u64, Shadow> = HashMap::new();
        for (f, present) in pattern.into_iter().enumerate() {
            let dets = if present { vec![det(0.0, 8.0)] } else { vec![] };
            let r = tr.step(f as f64 * 0.1, &dets);
            for id in &r.dead {
                shadow.remove(id);
            }
            for a in &r.active {
                let s = shadow.entry(a.id).or_default();
                s.age += 1;
                if a.matched {
                    s.visible += 1;
                    s.trailing_misses = 0;
                } else {
                    s.trailing_misses += 1;
                }
            }
            prop_assert_eq!(shadow.len(), tr.tracks.len());
            for t in &tr.tracks {
                let s = &shadow[&t.id];
                prop_assert_eq!(t.age, s.age);
                prop_assert_eq!(t.visible, s.visible);
                prop_assert_eq!(t.invisible, s.trailing_misses);
                prop_assert!(t.visible <= t.age);
            }
        }
    }

    #[test]
    fn always_matched_track_survives(frames in 1usize..300, vx in -1.0..1.0f64, vy in -1.0..1.0f64) {
        let mut tr = tracker(TrackConfig::default());
        for f in 0..frames {
            let t = f as f64 * 0.1;
            let r = tr.step(t, &[det(vx * t, 8.0 + vy * t)]);
            prop_assert!(r.dead.is_empty());
            prop_assert_eq!(r.active.len(), 1);
            prop_assert_eq!(r.active[0].id, 1);
        }
    }
}

/// First age at which an unmatched newborn track fails the visibility rule.
fn expected_death_age(cfg: &TrackConfig) -> u32 {
    (1..).find(|&a| a >= cfg.min_age_for_score && 100.0 < cfg.min_visibility_pct * a as f64).unwrap()
}

#[test]
fn newborn_never_matched_again_dies_by_the_visibility_rule() {
    for grace in [1, 2, 3, 5] {
        let cfg = TrackConfig { min_age_for_score: grace, ..Default::default() };
        let mut tr = tracker(cfg);
        tr.step(0.0, &[det(0.0, 8.0)]);
        let mut age = 1;
        loop {
            let r = tr.step(age as f64 * 0.1, &[]);
            age += 1;
            if !r.dead.is_empty() {
                break;
            }
            assert!(age < 50, "track never deleted");
        }
        assert_eq!(age, expected_death_age(&cfg), "grace {grace}");
        if grace <= 3 {
            assert!(age <= 3);
        }
    }
}

#[test]
fn twenty_misses_delete_an_established_track() {
    // Visibility floor low enough that only the invisibility rule can fire.
    let cfg = TrackConfig { min_visibility_pct: 1.0, ..Default::default() };
    let mut tr = tracker(cfg);
    for f in 0..30 {
        tr.step(f as f64 * 0.1, &[det(0.0, 8.0)]);
    }
    for miss in 1..=20 {
        let r = tr.step(3.0 + miss as f64 * 0.1, &[]);
        assert_eq!(r.dead.is_empty(), miss < 20, "miss {miss}");
    }
}

#[test]
fn coasting_track_is_picked_up_again() {
    let mut tr = tracker(TrackConfig::default());
    for f in 0..10 {
        tr.step(f as f64 * 0.1, &[det(0.0, 6.0 + 0.14 * f as f64)]);
    }
    tr.step(1.0, &[]);
    tr.step(1.1, &[]);
    let r = tr.step(1.2, &[det(0.0, 6.0 + 0.14 * 12.0)]);
    assert_eq!(r.active.len(), 1);
    assert_eq!(r.active[0].id, 1);
    assert!(r.active[0].matched && r.active[0].reliable);
}
