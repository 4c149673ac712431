use fusetrack::metrics::{clear_match_frame, evaluate_sequence, Correspondence, MetricsError, GroundTruthFrame, GtObject, MotpDenominator};
use fusetrack::track::TrackRecord;
use proptest::prelude::*;

type Sequence = (Vec<GroundTruthFrame>, Vec<(f64, Vec<TrackRecord>)>);

/// Random sequences: a few objects, hypotheses near them with occasional
/// misses, spurious tracks and id changes.
fn sequence() -> impl Strategy<Value = Sequence> {
    let frame = (
        proptest::collection::vec((-3.0..3.0f64, 4.0..12.0f64), 0..4),
        proptest::collection::vec((0u64..6, -0.8..0.8f64, -0.8..0.8f64, any::<bool>()), 0..4),
        proptest::collection::vec((10u64..14, -3.0..3.0f64, 4.0..12.0f64), 0..2),
    );
    proptest::collection::vec(frame, 1..12).prop_map(|frames| {
        let mut gt = Vec::new();
        let mut hyps = Vec::new();
        for (k, (objs, near, spurious)) in frames.into_iter().enumerate() {
            let t = k as f64 * 0.1;
            let objects: Vec<GtObject> = objs.iter().enumerate().map(|(i, &(x, y))| GtObject { id: i as u64 + 1, x, y }).collect();
            let mut recs = Vec::new();
            for (i, (id, dx, dy, keep)) in near.into_iter().enumerate() {
                if let Some(o) = objects.get(i) {
                    if keep {
                        recs.push(TrackRecord { id: id + 100 * i as u64, x: o.x + dx, y: o.y + dy });
                    }
                }
            }
            for (id, x, y) in spurious {
                recs.push(TrackRecord { id: id + 1000, x, y });
            }
            gt.push(GroundTruthFrame { t, objects });
            hyps.push((t, recs));
        }
        (gt, hyps)
    })
}

proptest! {
    #[test]
    fn mota_decomposes_into_rates((gt, hyps) in sequence(), gate in 0.2..2.0f64) {
        prop_assume!(gt.iter().any(|f| !f.objects.is_empty()));
        let r = match evaluate_sequence(&gt, &hyps, gate, MotpDenominator::Gt) {
            Ok(r) => r,
            Err(e) => {
                prop_assert_eq!(e, MetricsError::NoMatches);
                return Ok(());
            }
        };
        prop_assert!((r.mota + r.fnr + r.fpr + r.idswr - 100.0).abs() < 1e-9);
        prop_assert!(r.motp >= 0.0 && r.motp <= gate);
    }

    #[test]
    fn larger_gate_never_adds_misses_in_a_frame((gt, hyps) in sequence(), gate in 0.1..1.5f64, grow in 0.0..1.5f64) {
        for (g, (_, h)) in gt.iter().zip(&hyps) {
            let small = clear_match_frame(g, h, &mut Correspondence::new(), gate).counts.fn_;
            let large = clear_match_frame(g, h, &mut Correspondence::new(), gate + grow).counts.fn_;
            prop_assert!(large <= small);
        }
    }

    #[test]
    fn relabeling_hypotheses_changes_nothing((gt, hyps) in sequence(), offset in 1u64..1000) {
        prop_assume!(gt.iter().any(|f| !f.objects.is_empty()));
        // A fixed bijection on ids that also reverses their order.
        let relabeled: Vec<(f64, Vec<TrackRecord>)> = hyps
            .iter()
            .map(|(t, recs)| (*t, recs.iter().map(|r| TrackRecord { id: 1_000_000 + offset - r.id, ..*r }).collect()))
            .collect();
        let a = evaluate_sequence(&gt, &hyps, 1.0, MotpDenominator::Gt);
        let b = evaluate_sequence(&gt, &relabeled, 1.0, MotpDenominator::Gt);
        prop_assert_eq!(a.map(|r| r.counts), b.map(|r| r.counts));
    }
}

#[test]
fn larger_gate_over_a_whole_sequence() {
    // Hypothesis drifts away from its object and back.
    let offsets = [0.1, 0.4, 0.8, 1.2, 0.8, 0.3];
    let gt: Vec<GroundTruthFrame> = (0..offsets.len())
        .map(|k| GroundTruthFrame { t: k as f64, objects: vec![GtObject { id: 1, x: 0.0, y: 8.0 }] })
        .collect();
    let hyps: Vec<(f64, Vec<TrackRecord>)> =
        offsets.iter().enumerate().map(|(k, d)| (k as f64, vec![TrackRecord { id: 7, x: *d, y: 8.0 }])).collect();
    let fn_at = |gate| evaluate_sequence(&gt, &hyps, gate, MotpDenominator::Gt).unwrap().counts.fn_;
    assert_eq!([fn_at(0.2), fn_at(0.5), fn_at(1.0), fn_at(1.5)], [5, 3, 1, 0]);
}
