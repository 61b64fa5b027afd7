use std::collections::HashMap;

use nwpcorr::evaluation::{
    density_vs_improvement, improvement, ols_fit, rmse_by_lead, spatial_error_map, stratify_by_platform, CellGrid,
    ErrorMetric, MetricTable, PointResult, SpatialAccumulator,
};
use nwpcorr::{GeoBox, GeoCoord, PlatformType, TimeStamp, WindVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `(lead, GFS, model, published improvement)`.
const TABLE2: [(u32, f64, f64, f64); 9] = [
    (1, 2.75, 1.51, 45.1),
    (2, 2.79, 1.82, 34.6),
    (4, 2.87, 2.09, 27.3),
    (8, 2.95, 2.33, 20.9),
    (12, 3.00, 2.43, 19.1),
    (18, 3.07, 2.54, 17.5),
    (24, 3.15, 2.62, 16.8),
    (36, 3.29, 2.80, 15.1),
    (48, 3.44, 2.99, 13.1),
];

#[test]
fn published_pairs_that_reproduce_exactly() {
    for (lead, g, m, p) in TABLE2 {
        if [1, 24, 48].contains(&lead) {
            let v = improvement(g, m).unwrap();
            assert!((v - p).abs() <= 0.05, "lead {lead}: {v}");
        }
    }
}

/// The table prints RMSE to two decimals, so every published percentage
/// must be reachable from some pair within half a unit of the printed one.
#[test]
fn published_percentages_lie_within_rounding_interval() {
    for (lead, g, m, p) in TABLE2 {
        let lo = improvement(g - 0.005, m + 0.005).unwrap();
        let hi = improvement(g + 0.005, m - 0.005).unwrap();
        assert!(lo - 0.05 <= p && p <= hi + 0.05, "lead {lead}: [{lo}, {hi}] vs {p}");
    }
}

#[test]
fn metric_table_from_pairs() {
    let pairs: Vec<(u32, f64, f64)> = TABLE2.iter().map(|&(l, g, m, _)| (l, g, m)).collect();
    let t = MetricTable::from_rmse_pairs(&pairs).unwrap();
    assert_eq!(t.rows.len(), 9);
    let csv = t.to_csv_string();
    assert_eq!(csv.lines().next().unwrap(), "lead_h,n_targets,model_rmse_ms,nwp_rmse_ms,reanalysis_rmse_ms,improvement_pct");
    assert_eq!(csv.lines().nth(1).unwrap(), "1,0,1.510000,2.750000,,45.091");
}

fn result(r: &mut ChaCha8Rng, lead: u32, platform: Option<PlatformType>) -> PointResult {
    let w = |r: &mut ChaCha8Rng| WindVector {
        u: r.gen_range(-10.0..10.0),
        v: r.gen_range(-10.0..10.0),
    };
    PointResult {
        lead_hours: lead,
        time: TimeStamp::from_hours(400_000 + r.gen_range(0..100)),
        coord: GeoCoord::new(r.gen_range(-10.0..10.0), r.gen_range(-40.0..-20.0)).unwrap(),
        platform,
        prediction: w(r),
        baseline: w(r),
        reanalysis: Some(w(r)),
        truth: w(r),
    }
}

#[test]
fn model_equal_to_baseline_gives_zero_improvement() {
    let mut r = ChaCha8Rng::seed_from_u64(1);
    let mut rs: Vec<PointResult> = (0..40).map(|i| result(&mut r, [1, 8][i % 2], None)).collect();
    for x in &mut rs {
        x.prediction = x.baseline;
    }
    let t = rmse_by_lead(&rs, &[1, 8, 48]);
    assert_eq!(t.row(1).unwrap().improvement_pct, Some(0.0));
    assert_eq!(t.row(8).unwrap().n_targets, 20);
    assert!(t.row(48).unwrap().model_rmse.is_none());
}

#[test]
fn rmse_by_lead_matches_direct_sum() {
    let mut r = ChaCha8Rng::seed_from_u64(2);
    let rs: Vec<PointResult> = (0..50).map(|_| result(&mut r, 4, None)).collect();
    let direct = |f: &dyn Fn(&PointResult) -> WindVector| {
        let s: f64 = rs.iter().map(|x| f(x).sub(&x.truth).speed().powi(2)).sum();
        (s / (2.0 * rs.len() as f64)).sqrt()
    };
    let row = rmse_by_lead(&rs, &[4]).rows[0].clone();
    assert!((row.model_rmse.unwrap() - direct(&|x| x.prediction)).abs() < 1e-12);
    assert!((row.nwp_rmse.unwrap() - direct(&|x| x.baseline)).abs() < 1e-12);
    assert!((row.reanalysis_rmse.unwrap() - direct(&|x| x.reanalysis.unwrap())).abs() < 1e-12);
}

#[test]
fn platform_strata_match_hand_grouping() {
    let mut r = ChaCha8Rng::seed_from_u64(3);
    let types = [PlatformType::Ship, PlatformType::MooredBuoy, PlatformType::TideGauge];
    let rs: Vec<PointResult> = (0..30).map(|i| result(&mut r, [1, 2][i % 2], Some(types[i % 3]))).collect();
    let mut groups: HashMap<(PlatformType, u32), Vec<f64>> = HashMap::new();
    for x in &rs {
        let d = (x.prediction.speed() - x.truth.speed()).abs() - (x.baseline.speed() - x.truth.speed()).abs();
        groups.entry((x.platform.unwrap(), x.lead_hours)).or_default().push(d);
    }
    let cells = stratify_by_platform(&rs, &[1, 2], ErrorMetric::SpeedAbsolute);
    assert_eq!(cells.len(), 14);
    for c in &cells {
        match groups.get(&(c.platform, c.lead_hours)) {
            Some(v) => {
                let mean = v.iter().sum::<f64>() / v.len() as f64;
                assert_eq!(c.n, 5);
                assert!((c.mean_difference.unwrap() - mean).abs() < 1e-12);
            }
            None => assert_eq!((c.n, c.mean_difference), (0, None)),
        }
    }
}

#[test]
fn single_type_leaves_others_absent_and_equal_model_gives_zero() {
    let mut r = ChaCha8Rng::seed_from_u64(4);
    let mut rs: Vec<PointResult> = (0..5).map(|_| result(&mut r, 1, Some(PlatformType::Ship))).collect();
    for x in &mut rs {
        x.prediction = x.baseline;
    }
    let cells = stratify_by_platform(&rs, &[1], ErrorMetric::VectorMagnitude);
    for c in cells {
        if c.platform == PlatformType::Ship {
            assert_eq!(c.mean_difference, Some(0.0));
        } else {
            assert!(c.mean_difference.is_none());
        }
    }
}

fn cell_grid() -> CellGrid {
    CellGrid::new(
        GeoBox {
            lat_min: -10.0,
            lat_max: 10.0,
            lon_min: -40.0,
            lon_max: -20.0,
        },
        1.0,
    )
    .unwrap()
}

fn at(lat: f64, lon: f64) -> PointResult {
    PointResult {
        lead_hours: 1,
        time: TimeStamp::from_hours(0),
        coord: GeoCoord::new(lat, lon).unwrap(),
        platform: None,
        prediction: WindVector { u: 3.0, v: 0.0 },
        baseline: WindVector { u: 5.0, v: 0.0 },
        reanalysis: None,
        truth: WindVector { u: 4.0, v: 0.0 },
    }
}

#[test]
fn cell_edges() {
    let g = cell_grid();
    assert_eq!(g.cell_of(&GeoCoord::new(-10.0, -40.0).unwrap()), Some(0));
    assert_eq!(g.cell_of(&GeoCoord::new(-9.0, -40.0).unwrap()), Some(20));
    assert_eq!(g.cell_of(&GeoCoord::new(-10.0, -39.0).unwrap()), Some(1));
    assert_eq!(g.cell_of(&GeoCoord::new(10.0, -20.0).unwrap()), Some(399));
    assert_eq!(g.cell_of(&GeoCoord::new(10.5, -30.0).unwrap()), None);
    let m = spatial_error_map(&[at(0.5, -30.5), at(11.0, -30.0)], g, ErrorMetric::SpeedAbsolute);
    assert_eq!(m.outside, 1);
    let k = g.cell_of(&GeoCoord::new(0.5, -30.5).unwrap()).unwrap();
    assert_eq!((m.model[k], m.baseline[k], m.difference[k]), (Some(1.0), Some(1.0), Some(0.0)));
    assert_eq!(m.obs_fraction[k], 1.0);
    assert_eq!(m.count.iter().sum::<usize>(), 1);
}

#[test]
fn spatial_map_matches_brute_force() {
    let g = cell_grid();
    let mut r = ChaCha8Rng::seed_from_u64(5);
    let mut rs: Vec<PointResult> = (0..500).map(|_| result(&mut r, 1, None)).collect();
    for x in rs.iter_mut().take(20) {
        x.coord = GeoCoord::new(r.gen_range(-10..=10) as f64, r.gen_range(-40..=-20) as f64).unwrap();
    }
    let m = spatial_error_map(&rs, g, ErrorMetric::SpeedAbsolute);
    let err = |p: &WindVector, t: &WindVector| (p.speed() - t.speed()).abs();
    for i in 0..20 {
        for j in 0..20 {
            let (lat0, lon0) = (-10.0 + i as f64, -40.0 + j as f64);
            let inside = |c: &GeoCoord| {
                let lat_ok = c.lat() >= lat0 && (c.lat() < lat0 + 1.0 || (i == 19 && c.lat() <= 10.0));
                let lon_ok = c.lon() >= lon0 && (c.lon() < lon0 + 1.0 || (j == 19 && c.lon() <= -20.0));
                lat_ok && lon_ok
            };
            let members: Vec<&PointResult> = rs.iter().filter(|x| inside(&x.coord)).collect();
            let k = i * 20 + j;
            assert_eq!(m.count[k], members.len(), "cell {i},{j}");
            if members.is_empty() {
                assert!(m.model[k].is_none());
                continue;
            }
            let n = members.len() as f64;
            let model = members.iter().map(|x| err(&x.prediction, &x.truth)).sum::<f64>() / n;
            let base = members.iter().map(|x| err(&x.baseline, &x.truth)).sum::<f64>() / n;
            assert_eq!(m.model[k], Some(model));
            assert_eq!(m.baseline[k], Some(base));
            assert!((m.obs_fraction[k] - n / 500.0).abs() < 1e-15);
        }
    }
}

#[test]
fn spatial_grid_exports() {
    let m = spatial_error_map(&[at(0.5, -30.5)], cell_grid(), ErrorMetric::SpeedAbsolute);
    let mut buf = Vec::new();
    m.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), 401);
    assert!(text.contains("0.5,-30.5,1,1.000000,1.000000,1.000000,0.000000"));
    let f = m.to_field(TimeStamp::from_hours(10)).unwrap();
    assert_eq!(f.spec.n_nodes(), 400);
    let k = f.spec.nearest_node(&GeoCoord::new(0.5, -30.5).unwrap()).unwrap();
    assert_eq!(f.at_node(k), WindVector { u: 1.0, v: 1.0 });
}

#[test]
fn ols_against_normal_equations() {
    let mut r = ChaCha8Rng::seed_from_u64(6);
    let x: Vec<f64> = (0..50).map(|_| r.gen_range(0.0..0.1)).collect();
    let y: Vec<f64> = x.iter().map(|a| -3.0 * a + 0.2 + r.gen_range(-0.05..0.05)).collect();
    let n = 50.0;
    let (sx, sy) = (x.iter().sum::<f64>(), y.iter().sum::<f64>());
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
    let det = n * sxx - sx * sx;
    let intercept = (sxx * sy - sx * sxy) / det;
    let slope = (n * sxy - sx * sy) / det;
    let (s, i) = ols_fit(&x, &y).unwrap();
    assert!((s - slope).abs() < 1e-10 && (i - intercept).abs() < 1e-10);
}

#[test]
fn ols_trivial_cases() {
    assert_eq!(ols_fit(&[1.0, 3.0], &[2.0, 6.0]), Some((2.0, 0.0)));
    assert_eq!(ols_fit(&[0.1, 0.2, 0.4], &[-1.0, -1.0, -1.0]), Some((0.0, -1.0)));
    assert_eq!(ols_fit(&[1.0, 1.0], &[0.0, 1.0]), None);
}

#[test]
fn density_needs_three_cells() {
    let g = cell_grid();
    let two = spatial_error_map(&[at(0.5, -30.5), at(1.5, -30.5)], g, ErrorMetric::SpeedAbsolute);
    let d = density_vs_improvement(&two);
    assert_eq!(d.rows.len(), 2);
    assert!(d.trend.is_none());
    let three = spatial_error_map(&[at(0.5, -30.5), at(1.5, -30.5), at(2.5, -30.5), at(2.6, -30.5)], g, ErrorMetric::SpeedAbsolute);
    let d = density_vs_improvement(&three);
    assert_eq!(d.trend.unwrap().0, 0.0);
}

proptest! {
    #[test]
    fn improvement_inverts(nwp in 0.1f64..10.0, model in 0.0f64..10.0) {
        let p = improvement(nwp, model).unwrap();
        prop_assert!((nwp * (1.0 - p / 100.0) - model).abs() < 1e-9);
    }

    #[test]
    fn spatial_aggregation_is_partition_consistent(seed in 0u64..1000, cut in 0usize..60) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let mut rs: Vec<PointResult> = (0..60).map(|_| result(&mut r, 1, None)).collect();
        rs[0].coord = GeoCoord::new(30.0, 0.0).unwrap();
        let g = cell_grid();
        let mut a = SpatialAccumulator::new(g, ErrorMetric::SpeedAbsolute);
        let mut b = SpatialAccumulator::new(g, ErrorMetric::SpeedAbsolute);
        let mut whole = SpatialAccumulator::new(g, ErrorMetric::SpeedAbsolute);
        for (i, x) in rs.iter().enumerate() {
            if i < cut { a.push(x) } else { b.push(x) }
        }
        for x in &rs {
            whole.push(x);
        }
        a.merge(&b).unwrap();
        prop_assert_eq!(&a.count, &whole.count);
        prop_assert_eq!(a.outside, 1);
        for k in 0..a.count.len() {
            prop_assert!((a.model_sum[k] - whole.model_sum[k]).abs() < 1e-12);
            prop_assert!((a.baseline_sum[k] - whole.baseline_sum[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn rmse_is_non_negative_and_zero_on_identity(seed in 0u64..500) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let mut rs: Vec<PointResult> = (0..10).map(|_| result(&mut r, 2, None)).collect();
        let t = rmse_by_lead(&rs, &[2]);
        prop_assert!(t.rows[0].model_rmse.unwrap() >= 0.0);
        for x in &mut rs {
            x.prediction = x.truth;
        }
        prop_assert_eq!(rmse_by_lead(&rs, &[2]).rows[0].model_rmse, Some(0.0));
    }
}
