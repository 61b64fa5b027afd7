use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context};
use nwpcorr::data::{
    append_matchups, build_matchups, build_samples, parse_observations, read_matchups, temporal_split,
    write_observations, BuiltSamples, DirStore, GridField, GridSpec, SampleOptions, TemporalSplit,
};
use nwpcorr::evaluation::{
    density_by_lead, rmse_by_lead, spatial_error_map, stratify_by_platform, write_density_csv, write_platform_csv,
    CellGrid, PointResult,
};
use nwpcorr::inference::{baseline_field, grid_inference, observations_at, point_inference, predict_samples};
use nwpcorr::model::{load_checkpoint_for, save_checkpoint, ModelParameters};
use nwpcorr::synthetic::{oracle_metrics, write_world, OracleMetrics};
use nwpcorr::training::fit;
use nwpcorr::{GeoBox, GeoCoord, TimeStamp, WindVector};
use serde::{Deserialize, Serialize};

use crate::config::{DataSource, RunConfig};
use crate::exit::UsageError;
use crate::run::RunDir;

pub fn synth(cfg: &RunConfig, run: &mut RunDir) -> anyhow::Result<()> {
    let dir = &cfg.paths.data_dir;
    let t = Instant::now();
    let summary = write_world(&cfg.synthetic, dir, cfg.mode())?;
    println!(
        "wrote {} observations and {} fields to {} in {:.1}s",
        summary.observations,
        summary.fields,
        dir.display(),
        t.elapsed().as_secs_f64()
    );
    run.detail("observations", summary.observations);
    run.detail("fields", summary.fields);
    run.output(&dir.join(nwpcorr::synthetic::OBSERVATIONS_FILE))?;
    run.output(&cfg.forecast_dir())?;
    run.output(&cfg.reanalysis_dir())?;
    Ok(())
}

pub fn ingest(cfg: &RunConfig, run: &mut RunDir) -> anyhow::Result<()> {
    let src = cfg.observations_path();
    run.input(&src)?;
    let parsed = parse_observations(&src, cfg.data.domain.as_ref())?;
    fs::create_dir_all(&cfg.paths.data_dir)?;
    let out = cfg.clean_observations_path();
    write_observations(&out, &parsed.records)?;
    println!(
        "{} records kept; {} outside domain, {} failed QC, {} duplicates",
        parsed.records.len(),
        parsed.out_of_domain,
        parsed.qc_rejected,
        parsed.duplicates
    );
    run.detail("kept", parsed.records.len());
    run.detail("out_of_domain", parsed.out_of_domain);
    run.detail("qc_rejected", parsed.qc_rejected);
    run.detail("duplicates", parsed.duplicates);
    run.output(&out)?;
    Ok(())
}

pub fn matchup(cfg: &RunConfig, run: &mut RunDir) -> anyhow::Result<()> {
    let src = cfg.clean_observations_path();
    run.input(&src)?;
    run.input(&cfg.forecast_dir())?;
    run.input(&cfg.reanalysis_dir())?;
    let obs = parse_observations(&src, None)?.records;
    let gfs = DirStore::new(cfg.forecast_dir());
    let era5 = DirStore::new(cfg.reanalysis_dir());
    let records = build_matchups(&obs, &gfs, &era5, cfg.mode())?;
    let dir = cfg.matchup_dir();
    if dir.exists() {
        fs::remove_dir_all(&dir).with_context(|| format!("clearing {}", dir.display()))?;
    }
    append_matchups(&dir, &records)?;
    let missing: usize = records.iter().map(|r| r.missing_leads().len()).sum();
    let no_issue = records.iter().filter(|r| r.nwp_issue.is_none()).count();
    println!(
        "{} matchups written to {}; {missing} missing lead forecasts, {no_issue} without an issue-time forecast",
        records.len(),
        dir.display()
    );
    run.detail("matchups", records.len());
    run.detail("missing_lead_forecasts", missing);
    run.output(&dir)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitRecord {
    #[serde(with = "nwpcorr::time::iso")]
    pub val_start: TimeStamp,
    #[serde(with = "nwpcorr::time::iso")]
    pub test_start: TimeStamp,
    pub train: usize,
    pub val: usize,
    pub test: usize,
    pub flagged: usize,
    pub skipped_no_targets: usize,
    pub obs_without_nwp: usize,
    pub obs_truncated: usize,
}

impl SplitRecord {
    fn new(s: &TemporalSplit, b: &BuiltSamples) -> Self {
        SplitRecord {
            val_start: s.boundaries.0,
            test_start: s.boundaries.1,
            train: s.train.len(),
            val: s.val.len(),
            test: s.test.len(),
            flagged: s.flagged.len(),
            skipped_no_targets: b.skipped_no_targets,
            obs_without_nwp: b.obs_without_nwp,
            obs_truncated: b.obs_truncated,
        }
    }
}

fn build_split(cfg: &RunConfig) -> anyhow::Result<(TemporalSplit, SplitRecord)> {
    let matchups = read_matchups(&cfg.matchup_dir())?;
    let opts = SampleOptions {
        history_hours: cfg.data.history_hours,
        max_obs: cfg.data.max_obs,
    };
    let mut built = build_samples(&matchups, &cfg.data.leads, opts)?;
    let samples = std::mem::take(&mut built.samples);
    let split = temporal_split(samples)?;
    let rec = SplitRecord::new(&split, &built);
    Ok((split, rec))
}

/// Rebuilds the partition and checks it against the recorded one.
fn load_split(cfg: &RunConfig, run: &mut RunDir) -> anyhow::Result<TemporalSplit> {
    let path = cfg.split_path();
    let text = fs::read_to_string(&path).map_err(|e| nwpcorr::Error::Io {
        path: path.clone(),
        source: e,
    })?;
    let recorded: SplitRecord = serde_json::from_str(&text).map_err(|e| nwpcorr::Error::Corrupt {
        path: path.clone(),
        message: e.to_string(),
    })?;
    run.input(&path)?;
    run.input(&cfg.matchup_dir())?;
    let (split, rec) = build_split(cfg)?;
    if rec != recorded {
        return Err(nwpcorr::Error::Split(format!(
            "{} no longer matches the matchup store; rerun split",
            path.display()
        ))
        .into());
    }
    Ok(split)
}

pub fn split(cfg: &RunConfig, run: &mut RunDir) -> anyhow::Result<()> {
    run.input(&cfg.matchup_dir())?;
    let (_, rec) = build_split(cfg)?;
    let path = cfg.split_path();
    fs::write(&path, serde_json::to_string_pretty(&rec)? + "\n")?;
    println!(
        "train {} / val {} / test {} samples; validation from {}, test from {}; {} flagged",
        rec.train,
        rec.val,
        rec.test,
        rec.val_start.to_iso(),
        rec.test_start.to_iso(),
        rec.flagged
    );
    run.detail("split", &rec);
    run.output(&path)?;
    Ok(())
}

fn oracle_rows(o: &OracleMetrics) -> Vec<serde_json::Value> {
    o.leads
        .iter()
        .zip(o.nwp_rmse.iter().zip(&o.ideal_corrector_rmse))
        .map(|(l, (n, i))| serde_json::json!({ "lead_h": l, "nwp_rmse": n, "ideal_corrector_rmse": i }))
        .collect()
}

pub fn train(cfg: &RunConfig, run: &mut RunDir) -> anyhow::Result<()> {
    let split = load_split(cfg, run)?;
    if cfg.data.source == DataSource::Synthetic {
        let o = oracle_metrics(&cfg.synthetic, &split.test, &cfg.data.leads)?;
        if let Some(nwp) = o.at(1).map(|(n, _)| n) {
            run.detail("lead1_skill_threshold_rmse", 0.60 * nwp);
        }
        run.detail("oracle", oracle_rows(&o));
    }
    let init = ModelParameters::init(cfg.model.clone(), cfg.seed)?;
    let log_path = run.file("training_log.jsonl");
    let mut log = String::new();
    let result = fit(&init, &split.train, &split.val, &cfg.optimizer, cfg.mode(), &mut |r| {
        eprintln!(
            "epoch {:3}  loss {:.4}  val_rmse {:.4}  lr {:.2e}  {:.0}s",
            r.epoch, r.train_loss, r.val_rmse, r.lr, r.wall_time_s
        );
        log.push_str(&(serde_json::to_string(r).expect("plain record") + "\n"));
    })?;
    fs::write(&log_path, log)?;
    let ckpt = run.file("model.ckpt");
    save_checkpoint(&result.best, &ckpt)?;
    let dest = cfg.checkpoint_path();
    if let Some(parent) = dest.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::copy(&ckpt, &dest).with_context(|| format!("copying checkpoint to {}", dest.display()))?;
    println!(
        "best epoch {} with validation RMSE {:.4} m/s; checkpoint {}",
        result.best_epoch,
        result.best_val_rmse,
        dest.display()
    );
    run.detail("best_epoch", result.best_epoch);
    run.detail("best_val_rmse", result.best_val_rmse);
    run.detail("stopped_early", result.stopped_early);
    run.output(&ckpt)?;
    run.output(&log_path)?;
    Ok(())
}

fn load_model(cfg: &RunConfig, checkpoint: Option<&Path>, run: &mut RunDir) -> anyhow::Result<ModelParameters> {
    let path = checkpoint.map(Path::to_path_buf).unwrap_or_else(|| cfg.checkpoint_path());
    run.input(&path)?;
    Ok(load_checkpoint_for(&path, &cfg.model)?)
}

fn write_with(path: &Path, f: impl FnOnce(fs::File) -> nwpcorr::Result<()>) -> anyhow::Result<()> {
    let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    f(file)?;
    Ok(())
}

fn results_box(results: &[PointResult], cell: f64) -> Option<GeoBox> {
    let (mut lat0, mut lat1, mut lon0, mut lon1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for r in results {
        lat0 = lat0.min(r.coord.lat());
        lat1 = lat1.max(r.coord.lat());
        lon0 = lon0.min(r.coord.lon());
        lon1 = lon1.max(r.coord.lon());
    }
    if results.is_empty() {
        return None;
    }
    let down = |x: f64| (x / cell).floor() * cell;
    let up = |x: f64| ((x / cell).floor() + 1.0) * cell;
    Some(GeoBox {
        lat_min: down(lat0),
        lat_max: up(lat1),
        lon_min: down(lon0),
        lon_max: up(lon1),
    })
}

pub fn evaluate(cfg: &RunConfig, checkpoint: Option<&Path>, run: &mut RunDir) -> anyhow::Result<()> {
    let params = load_model(cfg, checkpoint, run)?;
    let split = load_split(cfg, run)?;
    let results = predict_samples(&params, &split.test, cfg.mode())?;
    let leads = &cfg.data.leads;

    let table = rmse_by_lead(&results, leads);
    let table_path = run.file("metric_table.csv");
    fs::write(&table_path, table.to_csv_string())?;
    print!("{}", table.to_csv_string());
    run.output(&table_path)?;

    let metric = cfg.evaluation.metric;
    let strata_path = run.file("platform_strata.csv");
    write_with(&strata_path, |f| write_platform_csv(&stratify_by_platform(&results, leads, metric), metric, f))?;
    run.output(&strata_path)?;

    let domain = match cfg.data.source {
        DataSource::Synthetic => Some(cfg.synthetic.domain),
        DataSource::External => cfg.data.domain.or_else(|| results_box(&results, cfg.evaluation.cell_deg)),
    };
    if let Some(bounds) = domain {
        let grid = CellGrid::new(bounds, cfg.evaluation.cell_deg)?;
        let at_lead: Vec<PointResult> = results
            .iter()
            .filter(|r| r.lead_hours == cfg.evaluation.map_lead)
            .cloned()
            .collect();
        let map = spatial_error_map(&at_lead, grid, metric);
        let csv_path = run.file("spatial_error.csv");
        write_with(&csv_path, |f| map.write_csv(f))?;
        let grid_path = run.file("spatial_error.grid");
        let stamp = split.boundaries.1;
        map.to_field(stamp)?.write(&grid_path)?;
        let density_path = run.file("density.csv");
        write_with(&density_path, |f| write_density_csv(&density_by_lead(&results, grid, metric, leads), f))?;
        run.detail("spatial_out_of_domain", map.outside);
        for p in [csv_path, grid_path, density_path] {
            run.output(&p)?;
        }
    }

    if cfg.data.source == DataSource::Synthetic {
        let o = oracle_metrics(&cfg.synthetic, &split.test, leads)?;
        let path = run.file("oracle_table.csv");
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["lead_h", "nwp_rmse_ms", "ideal_corrector_rmse_ms"])?;
        let f = |x: &Option<f64>| x.map(|v| format!("{v:.6}")).unwrap_or_default();
        for (l, (n, i)) in o.leads.iter().zip(o.nwp_rmse.iter().zip(&o.ideal_corrector_rmse)) {
            w.write_record([l.to_string(), f(n), f(i)])?;
        }
        w.flush()?;
        run.output(&path)?;
    }
    run.detail("test_targets", results.len());
    Ok(())
}

/// `lat,lon` pairs separated by `;` or newlines.
pub fn parse_coords(text: &str) -> anyhow::Result<Vec<GeoCoord>> {
    let mut out = Vec::new();
    for item in text.split([';', '\n']).map(str::trim).filter(|s| !s.is_empty() && !s.starts_with('#')) {
        let parts: Vec<&str> = item.split(',').map(str::trim).collect();
        let bad = || UsageError(format!("expected `lat,lon`, got `{item}`"));
        if parts.len() != 2 {
            return Err(bad().into());
        }
        let lat: f64 = parts[0].parse().map_err(|_| bad())?;
        let lon: f64 = parts[1].parse().map_err(|_| bad())?;
        out.push(GeoCoord::new(lat, lon).map_err(|e| UsageError(e.to_string()))?);
    }
    if out.is_empty() {
        bail!(UsageError("no coordinates given".into()));
    }
    Ok(out)
}

pub fn parse_grid(text: &str) -> anyhow::Result<GridSpec> {
    let v: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| UsageError(format!("grid must be `lat_min,lat_max,lon_min,lon_max,res`, got `{text}`")))?;
    if v.len() != 5 {
        bail!(UsageError("grid needs five numbers: lat_min,lat_max,lon_min,lon_max,res".into()));
    }
    GridSpec::new(v[0], v[1], v[2], v[3], v[4]).map_err(|e| UsageError(e.to_string()).into())
}

fn parse_issue(s: &str) -> anyhow::Result<TimeStamp> {
    TimeStamp::parse_iso(s).map_err(|e| UsageError(format!("issue time: {e}")).into())
}

struct InferenceInputs {
    params: ModelParameters,
    obs: Vec<nwpcorr::model::ObservationToken>,
    baseline: GridField,
}

fn inference_inputs(
    cfg: &RunConfig,
    checkpoint: Option<&Path>,
    issue: TimeStamp,
    lead: u32,
    run: &mut RunDir,
) -> anyhow::Result<InferenceInputs> {
    if lead == 0 || lead > cfg.model.max_lead_hours {
        bail!(UsageError(format!("lead must lie in [1, {}]", cfg.model.max_lead_hours)));
    }
    let params = load_model(cfg, checkpoint, run)?;
    run.input(&cfg.matchup_dir())?;
    let matchups = read_matchups(&cfg.matchup_dir())?;
    let obs = observations_at(&matchups, issue, cfg.data.history_hours);
    let baseline = baseline_field(&DirStore::new(cfg.forecast_dir()), issue, lead)?;
    run.detail("issue_time", issue.to_iso());
    run.detail("lead_h", lead);
    run.detail("observations", obs.len());
    run.detail("baseline_init", baseline.init_time.to_iso());
    Ok(InferenceInputs {
        params,
        obs,
        baseline: (*baseline).clone(),
    })
}

fn fallback_warning(fallback: bool, issue: TimeStamp) {
    if fallback {
        eprintln!("warning: no observations at {}; baseline returned unchanged", issue.to_iso());
    }
}

pub struct PointArgs<'a> {
    pub checkpoint: Option<&'a Path>,
    pub issue: &'a str,
    pub lead: u32,
    pub coords: Vec<GeoCoord>,
}

pub fn point_infer(cfg: &RunConfig, a: PointArgs<'_>, run: &mut RunDir) -> anyhow::Result<()> {
    let issue = parse_issue(a.issue)?;
    let inp = inference_inputs(cfg, a.checkpoint, issue, a.lead, run)?;
    let t = Instant::now();
    let c = point_inference(&inp.params, &inp.obs, &inp.baseline, a.lead, &a.coords)?;
    let wall = t.elapsed().as_secs_f64();
    fallback_warning(c.fallback, issue);
    let path = run.file("points.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["lat", "lon", "nwp_u", "nwp_v", "corrected_u", "corrected_v", "fallback"])?;
    for (coord, wind) in a.coords.iter().zip(&c.winds) {
        let nwp: WindVector = inp.baseline.at_node(inp.baseline.spec.nearest_node(coord)?);
        w.write_record([
            coord.lat().to_string(),
            coord.lon().to_string(),
            format!("{:.6}", nwp.u),
            format!("{:.6}", nwp.v),
            format!("{:.6}", wind.u),
            format!("{:.6}", wind.v),
            c.fallback.to_string(),
        ])?;
    }
    w.flush()?;
    drop(w);
    print!("{}", fs::read_to_string(&path)?);
    println!("{} points corrected in {wall:.3}s", a.coords.len());
    run.detail("points", a.coords.len());
    run.detail("wall_time_s", wall);
    run.detail("fallback", c.fallback);
    run.output(&path)?;
    Ok(())
}

pub struct GridArgs<'a> {
    pub checkpoint: Option<&'a Path>,
    pub issue: &'a str,
    pub lead: u32,
    pub grid: Option<GridSpec>,
    pub chunk: Option<usize>,
}

/// Baseline values on `spec` taken from the nearest node of `field`.
fn resample(field: &GridField, spec: GridSpec) -> anyhow::Result<GridField> {
    let mut u = Vec::with_capacity(spec.n_nodes());
    let mut v = Vec::with_capacity(spec.n_nodes());
    for c in spec.node_coords() {
        let w = field.at_node(field.spec.nearest_node(&c)?);
        u.push(w.u);
        v.push(w.v);
    }
    Ok(GridField::new(spec, field.init_time, field.valid_time, u, v)?)
}

pub fn grid_infer(cfg: &RunConfig, a: GridArgs<'_>, run: &mut RunDir) -> anyhow::Result<()> {
    let issue = parse_issue(a.issue)?;
    let chunk = a.chunk.unwrap_or(cfg.inference.chunk);
    if chunk == 0 {
        bail!(UsageError("chunk must be positive".into()));
    }
    let inp = inference_inputs(cfg, a.checkpoint, issue, a.lead, run)?;
    let baseline = match a.grid {
        Some(spec) => resample(&inp.baseline, spec)?,
        None => inp.baseline,
    };
    let t = Instant::now();
    let g = grid_inference(&inp.params, &inp.obs, &baseline, a.lead, chunk)?;
    let wall = t.elapsed().as_secs_f64();
    fallback_warning(g.fallback, issue);
    let mut outputs: Vec<PathBuf> = Vec::new();
    for (name, f) in [("corrected", &g.corrected), ("baseline", &g.baseline), ("difference", &g.difference)] {
        let p = run.file(&format!("{name}.grid"));
        f.write(&p)?;
        outputs.push(p);
    }
    let csv_path = run.file("grid.csv");
    let mut w = csv::Writer::from_path(&csv_path)?;
    w.write_record(["lat", "lon", "baseline_u", "baseline_v", "corrected_u", "corrected_v", "diff_u", "diff_v"])?;
    for (k, c) in g.baseline.spec.node_coords().iter().enumerate() {
        let (b, x, d) = (g.baseline.at_node(k), g.corrected.at_node(k), g.difference.at_node(k));
        w.write_record(
            [c.lat(), c.lon(), b.u, b.v, x.u, x.v, d.u, d.v]
                .iter()
                .map(|v| format!("{v:.6}"))
                .collect::<Vec<_>>(),
        )?;
    }
    w.flush()?;
    outputs.push(csv_path);
    let n = g.baseline.spec.n_nodes();
    let mean_abs = g.difference.u.iter().zip(&g.difference.v).map(|(u, v)| u.hypot(*v)).sum::<f64>() / n as f64;
    println!(
        "{n} nodes corrected in {wall:.3}s from {} observations; mean |ML - baseline| {mean_abs:.4} m/s",
        inp.obs.len()
    );
    run.detail("nodes", n);
    run.detail("chunk", chunk);
    run.detail("wall_time_s", wall);
    run.detail("fallback", g.fallback);
    for p in outputs {
        run.output(&p)?;
    }
    Ok(())
}
