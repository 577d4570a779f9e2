use proptest::prelude::*;
use roikit::composition::{compose, count_in_box, filter_in_box, OverlapPolicy, RoiSplats};
use roikit::splat::{SplatRecord, SplatSet};
use roikit::Aabb;

fn set_from(points: &[[f32; 3]]) -> SplatSet {
    let mut s = SplatSet::new(0).unwrap();
    for (i, p) in points.iter().enumerate() {
        s.push(&SplatRecord {
            position: *p,
            normal: [0.0; 3],
            sh_dc: [i as f32, 0.0, 0.0],
            sh_rest: vec![],
            opacity: 0.1,
            log_scale: [-2.0; 3],
            rotation: [1.0, 0.0, 0.0, 0.0],
        })
        .unwrap();
    }
    s
}

fn points(max: usize) -> impl Strategy<Value = Vec<[f32; 3]>> {
    prop::collection::vec(prop::array::uniform3(-4.0f32..4.0), 0..max)
}

fn slab(x0: f64, x1: f64) -> Aabb {
    Aabb::from_arrays([x0, -2.0, -2.0], [x1, 2.0, 2.0]).unwrap()
}

proptest! {
    #[test]
    fn filter_partitions_in_order(pts in points(200), lo in -3.0f64..0.0, hi in 0.0f64..3.0) {
        let s = set_from(&pts);
        let b = slab(lo, hi);
        let (ins, outs) = filter_in_box(&s, &b);
        prop_assert_eq!(ins.len() + outs.len(), s.len());
        prop_assert_eq!(ins.len(), count_in_box(&s, &b));
        let tags = |x: &SplatSet| x.iter().map(|r| r.raw()[6]).collect::<Vec<f32>>();
        let (ti, to) = (tags(&ins), tags(&outs));
        prop_assert!(ti.windows(2).all(|w| w[0] < w[1]) && to.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn counts_are_conserved(scene in points(300), a in points(100), b in points(100)) {
        let scene = set_from(&scene);
        let rois = vec![
            RoiSplats { roi_id: "a".into(), splats: set_from(&a), bounds: slab(-3.0, -0.5) },
            RoiSplats { roi_id: "b".into(), splats: set_from(&b), bounds: slab(0.5, 3.0) },
        ];
        let (merged, report) = compose(&scene, &rois, OverlapPolicy::Reject).unwrap();
        let removed: usize = report.rois.iter().map(|r| r.scene_removed).sum();
        let inserted: usize = report.rois.iter().map(|r| r.object_inserted).sum();
        prop_assert_eq!(merged.len(), scene.len() - removed + inserted);
        prop_assert_eq!(report.merged_out, merged.len());
        for (r, counts) in rois.iter().zip(&report.rois) {
            prop_assert_eq!(counts.scene_removed, count_in_box(&scene, &r.bounds));
            prop_assert_eq!(counts.object_inserted, count_in_box(&r.splats, &r.bounds));
            prop_assert_eq!(count_in_box(&merged, &r.bounds), counts.object_inserted);
        }
        // Each ROI taken alone gives the same per-box numbers.
        let (single, rep) = compose(&scene, &rois[..1], OverlapPolicy::Reject).unwrap();
        prop_assert_eq!(&rep.rois[0], &report.rois[0]);
        prop_assert_eq!(single.len(), scene.len() - report.rois[0].scene_removed + report.rois[0].object_inserted);
    }

    #[test]
    fn first_wins_claims_each_point_once(scene in points(200), a in points(60), b in points(60)) {
        let scene = set_from(&scene);
        let rois = vec![
            RoiSplats { roi_id: "a".into(), splats: set_from(&a), bounds: slab(-2.0, 1.0) },
            RoiSplats { roi_id: "b".into(), splats: set_from(&b), bounds: slab(0.0, 2.0) },
        ];
        prop_assert!(compose(&scene, &rois, OverlapPolicy::Reject).is_err());
        let (merged, report) = compose(&scene, &rois, OverlapPolicy::FirstWins).unwrap();
        let union = |s: &SplatSet| s.iter().filter(|r| { let x = r.center()[0]; (-2.0..=2.0).contains(&x) && r.center()[1].abs() <= 2.0 && r.center()[2].abs() <= 2.0 }).count();
        let removed: usize = report.rois.iter().map(|r| r.scene_removed).sum();
        prop_assert_eq!(removed, union(&scene));
        prop_assert_eq!(report.rois[0].object_inserted, count_in_box(&rois[0].splats, &rois[0].bounds));
        prop_assert_eq!(merged.len(), scene.len() - removed + report.rois.iter().map(|r| r.object_inserted).sum::<usize>());
    }
}
