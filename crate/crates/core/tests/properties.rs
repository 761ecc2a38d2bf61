//! Property tests of the radio-map transforms and CSV round trips.

use fpgan_core::radiomap::{
    one_hot, powed_value, read_radiomap, to_csv_bytes, to_powed, DatasetSchema, LabelScaler, LabelSet, Representation,
    DEFAULT_BETA,
};
use fpgan_core::evaluation::positioning_errors;
use fpgan_core::positioning::PredictedLabels;
use proptest::prelude::*;

/// CSV text with `n` APs: each cell is the sentinel or a reading in (-110, 0).
fn csv_text(n: usize, cells: &[Option<f64>], labels: &[(f64, f64, i64, i64)]) -> String {
    let mut s: Vec<String> = (1..=n).map(|i| format!("AP{i:03}")).collect();
    s.extend(["LONGITUDE", "LATITUDE", "FLOOR", "BUILDINGID"].map(String::from));
    let mut out = s.join(",") + "\n";
    for (r, (x, y, f, b)) in labels.iter().enumerate() {
        let mut row: Vec<String> = cells[r * n..(r + 1) * n].iter().map(|c| c.map_or("100".to_string(), |v| v.to_string())).collect();
        row.extend([x.to_string(), y.to_string(), f.to_string(), b.to_string()]);
        out += &(row.join(",") + "\n");
    }
    out
}

fn dataset() -> impl Strategy<Value = (usize, Vec<Option<f64>>, Vec<(f64, f64, i64, i64)>)> {
    (1usize..6, 1usize..16).prop_flat_map(|(n, m)| {
        let cell = prop_oneof![1 => Just(None), 3 => (-110.0f64..-0.5).prop_map(Some)];
        let floors = prop::sample::select(vec![-2i64, 0, 1, 3, 7]);
        let buildings = prop::sample::select(vec![0i64, 1, 5]);
        (
            Just(n),
            prop::collection::vec(cell, n * m),
            prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3, floors, buildings), m),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn scaler_round_trip(points in prop::collection::vec((-1e4f64..1e4, -1e4f64..1e4, -50f64..50.0), 1..100)) {
        let mut l = LabelSet::default();
        for &(x, y, z) in &points {
            l.push([x, y, z], 0, 0);
        }
        let s = LabelScaler::fit(&l).unwrap();
        for i in 0..l.len() {
            let p = l.position(i);
            let scaled = s.scale(p);
            for k in 0..3 {
                prop_assert!((-1e-12..=1.0 + 1e-12).contains(&scaled[k]));
            }
            let back = s.unscale(scaled);
            for k in 0..3 {
                let span = s.maxs[k] - s.mins[k];
                let want = if span == 0.0 { s.mins[k] } else { p[k] };
                prop_assert!((back[k] - want).abs() <= 1e-9 * want.abs().max(1.0), "axis {} {} vs {}", k, back[k], want);
            }
        }
    }

    #[test]
    fn powed_is_monotone_and_bounded(min in -120f64..-1.0, a in 0f64..1.0, b in 0f64..1.0, beta in 0.5f64..4.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (r_lo, r_hi) = (min * (1.0 - lo), min * (1.0 - hi));
        let (p_lo, _) = powed_value(r_lo, min, beta);
        let (p_hi, _) = powed_value(r_hi, min, beta);
        prop_assert!(p_lo <= p_hi);
        prop_assert!((0.0..=1.0).contains(&p_lo) && (0.0..=1.0).contains(&p_hi));
        prop_assert_eq!(powed_value(min, min, beta).0, 0.0);
        prop_assert_eq!(powed_value(0.0, min, beta).0, 1.0);
    }

    #[test]
    fn non_detected_is_zero_and_detected_in_range((n, cells, labels) in dataset()) {
        prop_assume!(cells.iter().any(|c| c.is_some()));
        let rm = read_radiomap(csv_text(n, &cells, &labels).as_bytes(), &DatasetSchema::default(), None).unwrap();
        let p = to_powed(&rm, DEFAULT_BETA).unwrap();
        for (v, c) in p.rss().iter().zip(&cells) {
            match c {
                None => prop_assert_eq!(*v, 0.0),
                Some(_) => prop_assert!((0.0..1.0).contains(v)),
            }
        }
    }

    #[test]
    fn load_powed_write_load_is_bit_exact((n, cells, labels) in dataset()) {
        prop_assume!(cells.iter().any(|c| c.is_some()));
        let rm = read_radiomap(csv_text(n, &cells, &labels).as_bytes(), &DatasetSchema::default(), None).unwrap();
        let p = to_powed(&rm, DEFAULT_BETA).unwrap();
        let bytes = to_csv_bytes(&p).unwrap();
        let schema = DatasetSchema { representation: Representation::Powed, ..Default::default() };
        let back = read_radiomap(bytes.as_slice(), &schema, None).unwrap();
        prop_assert_eq!(back.rss().iter().map(|v| v.to_bits()).collect::<Vec<_>>(), p.rss().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        prop_assert_eq!(back.labels(), p.labels());
        prop_assert_eq!(back.mapping(), p.mapping());
        prop_assert_eq!(to_csv_bytes(&back).unwrap(), bytes);
    }

    #[test]
    fn reindexing_preserves_the_label_partition((n, cells, labels) in dataset()) {
        let rm = read_radiomap(csv_text(n, &cells, &labels).as_bytes(), &DatasetSchema::default(), None).unwrap();
        let l = rm.labels();
        let map = rm.mapping();
        for i in 0..labels.len() {
            prop_assert_eq!(map.floors[l.floor[i]], labels[i].2);
            prop_assert_eq!(map.buildings[l.building[i]], labels[i].3);
            for j in 0..labels.len() {
                prop_assert_eq!(l.floor[i] == l.floor[j], labels[i].2 == labels[j].2);
                prop_assert_eq!(l.building[i] == l.building[j], labels[i].3 == labels[j].3);
            }
        }
        prop_assert!(map.floors.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn one_hot_is_exact(classes in 1usize..20, pick in 0usize..20) {
        prop_assume!(pick < classes);
        let v = one_hot(pick, classes).unwrap();
        prop_assert_eq!(v.len(), classes);
        prop_assert_eq!(v.iter().sum::<f64>(), 1.0);
        prop_assert_eq!(v[pick], 1.0);
        prop_assert!(one_hot(classes, classes).is_err());
    }

    #[test]
    fn error_3d_dominates_2d(rows in prop::collection::vec(((-1e3f64..1e3, -1e3f64..1e3, -20f64..20.0), (-1e3f64..1e3, -1e3f64..1e3, -20f64..20.0), 0usize..3, 0usize..3), 1..50)) {
        let mut truth = LabelSet::default();
        let mut pred = Vec::new();
        for &(t, p, f, pf) in &rows {
            truth.push([t.0, t.1, t.2], f, 0);
            pred.push(PredictedLabels { x: p.0, y: p.1, z: p.2, floor: pf, building: 0, floor_probs: vec![], building_probs: vec![] });
        }
        let s = positioning_errors(&pred, &truth).unwrap();
        prop_assert!(s.eps_3d >= s.eps_2d);
        prop_assert!((0.0..=100.0).contains(&s.floor_hit));
        prop_assert_eq!(s.building_hit, 100.0);
        prop_assert_eq!(s.count, rows.len());
    }
}
