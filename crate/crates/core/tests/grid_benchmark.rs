use lowres_match::criteria::CriterionId;
use lowres_match::matcher::{MatchResult, Matcher};
use lowres_match::network::SpatialIndex;
use lowres_match::synth::{GridBenchmark, SyntheticData};

fn recovered(data: &SyntheticData, r: &MatchResult) -> bool {
    let truth = &data.truth[&r.seg_id];
    let chosen = &r.chosen.as_ref().unwrap().nodes;
    chosen == truth || chosen.iter().rev().eq(truth.iter())
}

#[test]
fn angle_criteria_recover_straight_grid_paths() {
    let spec = GridBenchmark {
        segments: 200,
        ..Default::default()
    };
    let data = spec.generate();
    let idx = SpatialIndex::build(&data.network);
    let m = Matcher::new(&data.network, &idx, 4).unwrap();
    for c in [CriterionId::Rc, CriterionId::Sc] {
        let (results, summary) = m.match_all(&data.measurements, c, Some(2));
        assert_eq!(summary.matched, spec.segments);
        for r in &results {
            assert!(recovered(&data, r), "{c} {}", r.seg_id);
            let s = r.scores.unwrap();
            assert_eq!((s.rc, s.sc), (0.0, 0.0));
            let len = data.measurements.get(&r.seg_id).unwrap().length_m;
            assert!(s.ac <= len * spec.jitter_m);
            assert!(r.candidates_evaluated <= 32);
        }
    }
}

#[test]
fn exact_segments_are_recovered_by_every_criterion() {
    let spec = GridBenchmark {
        segments: 100,
        jitter_m: 0.0,
        ..Default::default()
    };
    let data = spec.generate();
    let idx = SpatialIndex::build(&data.network);
    let m = Matcher::new(&data.network, &idx, 4).unwrap();
    for c in CriterionId::ALL {
        let (results, _) = m.match_all(&data.measurements, c, None);
        assert!(results.iter().all(|r| recovered(&data, r)), "{c}");
    }
}
