mod common;

use common::{live_params, max_diff, sample};
use nwpcorr::data::{build_matchups, GridField, GridSpec};
use nwpcorr::inference::{baseline_field, grid_inference, observations_at, point_inference, predict_samples};
use nwpcorr::model::{ModelConfig, ModelParameters};
use nwpcorr::synthetic::{synthetic_observations, SyntheticConfig, SyntheticStore};
use nwpcorr::{Error, ExecMode, GeoCoord, TimeStamp, WindVector};

fn small() -> ModelConfig {
    ModelConfig {
        hidden_dim: 16,
        heads: 4,
        encoder_layers: 2,
        decoder_layers: 2,
        siren_hidden: 16,
        ..ModelConfig::desk_scale()
    }
}

fn baseline() -> GridField {
    let spec = GridSpec::new(-20.0, 20.0, -50.0, -10.0, 1.0).unwrap();
    let init = TimeStamp::from_ymdh(2021, 3, 14, 6).unwrap();
    let n = spec.n_nodes();
    let u = (0..n).map(|k| (k as f64 * 0.37).sin() * 8.0).collect();
    let v = (0..n).map(|k| (k as f64 * 0.11).cos() * 6.0).collect();
    GridField::new(spec, init, init.add_hours(5), u, v).unwrap()
}

fn winds(f: &GridField) -> Vec<WindVector> {
    (0..f.spec.n_nodes()).map(|k| f.at_node(k)).collect()
}

#[test]
fn zero_head_leaves_grid_unchanged() {
    let p = ModelParameters::init(small(), 3).unwrap();
    let s = sample(1, 12, 1);
    let b = baseline();
    let g = grid_inference(&p, &s.obs, &b, 4, 512).unwrap();
    assert!(!g.fallback);
    assert_eq!(g.corrected, b);
    assert!(g.difference.u.iter().chain(&g.difference.v).all(|&x| x == 0.0));
}

#[test]
fn chunking_and_per_point_queries_agree() {
    let p = live_params(small(), 4);
    let s = sample(2, 15, 1);
    let b = baseline();
    let a = grid_inference(&p, &s.obs, &b, 4, 512).unwrap();
    let c = grid_inference(&p, &s.obs, &b, 4, 4096).unwrap();
    assert!(max_diff(&winds(&a.corrected), &winds(&c.corrected)) <= 1e-5);
    assert!(a.difference.u.iter().any(|&x| x != 0.0));
    let nodes = b.spec.node_coords();
    let picks = [0, 17, 840, nodes.len() - 1];
    for k in picks {
        let one = point_inference(&p, &s.obs, &b, 4, &[nodes[k]]).unwrap().winds[0];
        assert!(max_diff(&[one], &[a.corrected.at_node(k)]) <= 1e-5, "node {k}");
    }
}

#[test]
fn duplicate_points_give_identical_outputs() {
    let p = live_params(small(), 5);
    let s = sample(3, 6, 1);
    let c = GeoCoord::new(1.3, -22.7).unwrap();
    let out = point_inference(&p, &s.obs, &baseline(), 8, &[c, c, c]).unwrap().winds;
    assert_eq!(out[0], out[1]);
    assert_eq!(out[1], out[2]);
}

#[test]
fn point_outside_grid_is_rejected() {
    let p = live_params(small(), 6);
    let s = sample(4, 6, 1);
    let far = GeoCoord::new(40.0, -30.0).unwrap();
    let e = point_inference(&p, &s.obs, &baseline(), 1, &[far]).unwrap_err();
    assert!(matches!(e, Error::OutsideGrid { .. }));
}

#[test]
fn no_observations_returns_flagged_baseline() {
    let p = live_params(small(), 7);
    let b = baseline();
    let g = grid_inference(&p, &[], &b, 2, 512).unwrap();
    assert!(g.fallback && g.corrected.fallback && g.difference.fallback);
    assert_eq!(winds(&g.corrected), winds(&b));
    let round = GridField::from_bytes(&g.corrected.to_bytes(), "x".as_ref()).unwrap();
    assert!(round.fallback);
}

#[test]
fn synthetic_world_inference_inputs() {
    let cfg = SyntheticConfig {
        duration_hours: 96,
        ..SyntheticConfig::default()
    };
    let store = SyntheticStore::new(cfg.clone()).unwrap();
    let m = build_matchups(&synthetic_observations(&cfg), &store, &store, ExecMode::Sequential).unwrap();
    let issue = cfg.start.add_hours(50);
    let obs = observations_at(&m, issue, 1);
    assert_eq!(obs.len(), 20);
    assert!(obs.iter().all(|o| o.time == issue));
    let b = baseline_field(&store, issue, 8).unwrap();
    assert_eq!(b.valid_time, issue.add_hours(8));
    assert!(b.init_time <= issue);
    let late = cfg.start.add_hours(10_000);
    assert!(matches!(baseline_field(&store, late, 1), Err(Error::MissingField(_))));
}

#[test]
fn predicted_results_follow_valid_targets() {
    let p = live_params(small(), 8);
    let mut s = sample(9, 5, 4);
    s.targets[1].valid = false;
    let rs = predict_samples(&p, &[s.clone()], ExecMode::Sequential).unwrap();
    assert_eq!(rs.len(), 3);
    let out = p.forward(&s).unwrap();
    for (r, w) in rs.iter().zip(&out) {
        assert_eq!(r.prediction, *w);
    }
    assert_eq!(rs[1].baseline, s.targets[2].nwp_wind);
    assert_eq!(rs[1].truth, s.truth.as_ref().unwrap()[2]);
}
