use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crosspers::crossripsnet::task::{circles_task, CirclesTaskConfig};
use crosspers::crossripsnet::{
    grad_check, mean_sym_kl, sym_kl, train as train_model, train_test_split, Architecture, CrnModel, GradCheckConfig,
    ModelConfig, Optimizer, ReducerMethod, TrainSample, TrainingConfig, Variant, DEFAULT_TRAIN_FRACTION,
};
use crosspers::filtration::{cross_vr_filtration, default_cross_scale, default_vr_scale, vr_filtration};
use crosspers::geometry::{cross_distance_matrix, pairwise_distances, PointCloud, TimeSeries};
use crosspers::io;
use crosspers::persistence::{cross_barcode, cross_barcode_explicit, distance_diagrams, reduce, MaxScale};
use crosspers::stats::{
    distinguish as run_distinguish, kde1d, noise_sensitivity_sweep, overlap_lipschitz_check, tv_pushforward_check,
    Bandwidth, Decision, DistinctionConfig, NoiseRegime, PropertyReport, SweepTable, DEFAULT_NOISE_LEVELS,
};
use crosspers::summaries::{DensityGrid, GridSpec};
use crosspers::synth::uniform_cloud;
use crosspers::topgen::{
    logistic_fit, metrics_from_scores, select_references, LogisticConfig, OneVsRest, TopGen, TopGenConfig,
};
use crosspers::VERSION;

use crate::config::{load, resolve_seed, set};
use crate::{
    BarcodeArgs, ClassifyArgs, CliError, ColumnsArg, DistinctionFlags, DistinguishArgs, OptimizerArg, PredictArgs,
    ReducerArg, RegimeArg, SelftestArgs, SweepArgs, TopgenArgs, TrainArgs, VariantArg,
};

type Result<T> = std::result::Result<T, CliError>;

/// Attaches the file path to library errors.
fn at<T>(path: &Path, r: crosspers::Result<T>) -> Result<T> {
    r.map_err(|source| CliError::File { path: path.display().to_string(), source })
}

fn read_cloud(path: &Path) -> Result<PointCloud> {
    at(path, io::read_point_cloud(path))
}

fn create_dir(dir: &Path) -> Result<()> {
    at(dir, fs::create_dir_all(dir).map_err(Into::into))
}

#[derive(Serialize)]
struct Report<'a, C: Serialize, R: Serialize> {
    version: &'static str,
    command: &'static str,
    config: &'a C,
    result: &'a R,
}

fn write_report<C: Serialize, R: Serialize>(path: &Path, command: &'static str, config: &C, result: &R) -> Result<()> {
    at(path, io::write_json(path, &Report { version: VERSION, command, config, result }))
}

pub fn barcode(a: BarcodeArgs) -> Result<()> {
    let (matrix, cross) = match (a.cross, a.clouds.as_slice()) {
        (true, [l, r]) => {
            let c = cross_distance_matrix(&read_cloud(l)?, &read_cloud(r)?)?;
            (c.matrix().clone(), Some(c))
        }
        (false, [c]) => (pairwise_distances(&read_cloud(c)?), None),
        (true, _) => return Err(CliError::Usage("--cross needs a left and a right cloud".into())),
        (false, _) => return Err(CliError::Usage("pass a single cloud, or two with --cross".into())),
    };
    let scale = match (a.max_scale, &cross) {
        (Some(v), _) if v >= 0.0 => v,
        (Some(v), _) => return Err(CliError::Usage(format!("--max-scale must be >= 0, got {v}"))),
        (None, Some(c)) => default_cross_scale(c),
        (None, None) => default_vr_scale(&matrix),
    };
    let diagrams = distance_diagrams(&matrix, a.dim, scale)?;
    at(&a.out, io::write_diagrams(&a.out, &diagrams))?;
    if let Some(p) = &a.filtration {
        let filt = match &cross {
            Some(c) => cross_vr_filtration(c, a.dim, scale),
            None => vr_filtration(&matrix, a.dim, scale),
        };
        at(p, io::write_filtration(p, &filt))?;
    }
    for d in &diagrams {
        println!("H{}: {} pairs ({} essential)", d.dim, d.len(), d.essential_count());
    }
    Ok(())
}

fn distinction_config(flags: &DistinctionFlags) -> Result<DistinctionConfig> {
    let (mut cfg, file_seed) = load(DistinctionConfig::default(), flags.config.as_deref())?;
    set(&mut cfg.n_pairs, flags.n_pairs);
    set(&mut cfg.subsample_size, flags.subsample_size);
    set(&mut cfg.hom_dim, flags.hom_dim);
    set(&mut cfg.threshold, flags.threshold);
    cfg.seed = resolve_seed(flags.seed, file_seed.then_some(cfg.seed))?;
    Ok(cfg)
}

fn write_curve(path: &Path, samples: &[f64]) -> Result<()> {
    let kde = kde1d(samples, Bandwidth::Auto)?;
    let mut text = String::from("z,density\n");
    for (z, p) in kde.curve() {
        text.push_str(&format!("{},{}\n", io::format_float(z), io::format_float(p)));
    }
    at(path, fs::write(path, text).map_err(Into::into))
}

/// Both densities on a shared axis, one row each.
fn density_strip(a: &[f64], b: &[f64]) -> Result<DensityGrid> {
    let (pa, pb) = (kde1d(a, Bandwidth::Auto)?, kde1d(b, Bandwidth::Auto)?);
    let lo = pa.z_min.min(pb.z_min);
    let hi = pa.z_max.max(pb.z_max);
    let spec = GridSpec::new(lo, hi, 0.0, 2.0, 256, 2)?;
    let values: Vec<f64> = [&pa, &pb]
        .iter()
        .flat_map(|d| (0..spec.nx).map(|i| d.evaluate(spec.x_center(i))).collect::<Vec<_>>())
        .collect();
    Ok(DensityGrid::from_values(spec, values)?)
}

pub fn distinguish(a: DistinguishArgs) -> Result<()> {
    let cfg = distinction_config(&a.flags)?;
    let core = read_cloud(&a.core)?;
    let candidate = read_cloud(&a.candidate)?;
    let report = run_distinguish(&core, &candidate, &cfg)?;
    create_dir(&a.out_dir)?;
    write_report(&a.out_dir.join("report.json"), "distinguish", &cfg, &report)?;
    write_curve(&a.out_dir.join("core_density.csv"), &report.core_samples)?;
    write_curve(&a.out_dir.join("candidate_density.csv"), &report.candidate_samples)?;
    if a.pgm {
        let p = a.out_dir.join("densities.pgm");
        at(&p, io::write_pgm(&p, &density_strip(&report.core_samples, &report.candidate_samples)?))?;
    }
    let word = match report.decision {
        Decision::Same => "same",
        Decision::Different => "different",
    };
    println!("overlap {:.6} threshold {} -> {word}", report.overlap, report.threshold);
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SweepConfig {
    #[serde(flatten)]
    distinction: DistinctionConfig,
    levels: Vec<f64>,
    regimes: Vec<NoiseRegime>,
}

fn regime_name(r: NoiseRegime) -> &'static str {
    match r {
        NoiseRegime::RightOnly => "right_only",
        NoiseRegime::Both => "both",
    }
}

/// Cloud CSVs of a directory in file-name order.
fn dataset_clouds(dir: &Path) -> Result<(Vec<PathBuf>, Vec<PointCloud>)> {
    let entries = at(dir, fs::read_dir(dir).map_err(Into::into))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    paths.sort();
    let clouds = paths.iter().map(|p| read_cloud(p)).collect::<Result<_>>()?;
    Ok((paths, clouds))
}

pub fn sweep(a: SweepArgs) -> Result<()> {
    let default = SweepConfig {
        distinction: DistinctionConfig::default(),
        levels: DEFAULT_NOISE_LEVELS.to_vec(),
        regimes: vec![NoiseRegime::RightOnly],
    };
    let (mut cfg, file_seed) = load(default, a.flags.config.as_deref())?;
    let d = &mut cfg.distinction;
    set(&mut d.n_pairs, a.flags.n_pairs);
    set(&mut d.subsample_size, a.flags.subsample_size);
    set(&mut d.hom_dim, a.flags.hom_dim);
    set(&mut d.threshold, a.flags.threshold);
    d.seed = resolve_seed(a.flags.seed, file_seed.then_some(d.seed))?;
    set(&mut cfg.levels, a.levels);
    if let Some(r) = a.regime {
        cfg.regimes = match r {
            RegimeArg::RightOnly => vec![NoiseRegime::RightOnly],
            RegimeArg::Both => vec![NoiseRegime::Both],
            RegimeArg::All => vec![NoiseRegime::RightOnly, NoiseRegime::Both],
        };
    }
    let (paths, clouds) = dataset_clouds(&a.dataset)?;
    let tables: Vec<SweepTable> = cfg
        .regimes
        .iter()
        .map(|&r| noise_sensitivity_sweep(&clouds, &cfg.levels, r, &cfg.distinction))
        .collect::<crosspers::Result<_>>()?;
    create_dir(&a.out_dir)?;
    #[derive(Serialize)]
    struct SweepResult<'a> {
        clouds: Vec<String>,
        tables: &'a [SweepTable],
    }
    let names = paths.iter().map(|p| p.display().to_string()).collect();
    write_report(&a.out_dir.join("sweep.json"), "sweep", &cfg, &SweepResult { clouds: names, tables: &tables })?;
    let mut csv = String::from("level");
    for t in &tables {
        csv.push(',');
        csv.push_str(regime_name(t.regime));
    }
    csv.push('\n');
    for (i, level) in cfg.levels.iter().enumerate() {
        csv.push_str(&io::format_float(*level));
        for t in &tables {
            csv.push(',');
            csv.push_str(&io::format_float(t.rows[i].mean_overlap));
        }
        csv.push('\n');
    }
    let p = a.out_dir.join("sweep.csv");
    at(&p, fs::write(&p, &csv).map_err(Into::into))?;
    print!("{csv}");
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ManifestEntry {
    left: PathBuf,
    right: PathBuf,
    #[serde(default)]
    target: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Manifest {
    pairs: Vec<ManifestEntry>,
}

fn read_manifest(path: &Path) -> Result<(PathBuf, Manifest)> {
    let m: Manifest = at(path, io::read_json(path))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((base, m))
}

fn load_pair(base: &Path, e: &ManifestEntry) -> Result<(PointCloud, PointCloud, Option<DensityGrid>)> {
    let target = match &e.target {
        Some(t) => {
            let p = base.join(t);
            Some(at(&p, io::read_grid(&p))?)
        }
        None => None,
    };
    Ok((read_cloud(&base.join(&e.left))?, read_cloud(&base.join(&e.right))?, target))
}

fn export_dataset(dir: &Path, data: &[TrainSample]) -> Result<()> {
    create_dir(dir)?;
    let mut pairs = Vec::with_capacity(data.len());
    for (k, s) in data.iter().enumerate() {
        let e = ManifestEntry {
            left: format!("left_{k:04}.csv").into(),
            right: format!("right_{k:04}.csv").into(),
            target: Some(format!("target_{k:04}.csv").into()),
        };
        at(dir, io::write_point_cloud(dir.join(&e.left), &s.left))?;
        at(dir, io::write_point_cloud(dir.join(&e.right), &s.right))?;
        at(dir, io::write_grid(dir.join(e.target.as_ref().expect("set")), &s.target))?;
        pairs.push(e);
    }
    let p = dir.join("manifest.json");
    at(&p, io::write_json(&p, &Manifest { pairs }))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TrainRunConfig {
    variant: Variant,
    architecture: Architecture,
    reducer: ReducerMethod,
    k: usize,
    right_encoder: bool,
    training: TrainingConfig,
    train_fraction: f64,
    /// Drives model init, batch order, the split and the synthetic data.
    seed: u64,
    circles: CirclesTaskConfig,
}

impl Default for TrainRunConfig {
    fn default() -> Self {
        Self {
            variant: Variant::CDualWithDistance,
            architecture: Architecture::default(),
            reducer: ReducerMethod::Quantiles,
            k: 60,
            right_encoder: true,
            training: TrainingConfig::default(),
            train_fraction: DEFAULT_TRAIN_FRACTION,
            seed: 0,
            circles: CirclesTaskConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelFile {
    version: String,
    model: CrnModel,
}

pub fn train(a: TrainArgs) -> Result<()> {
    let (mut cfg, file_seed) = load(TrainRunConfig::default(), a.config.as_deref())?;
    if let Some(v) = a.variant {
        cfg.variant = match v {
            VariantArg::A => Variant::AMerged,
            VariantArg::B => Variant::BDual,
            VariantArg::C => Variant::CDualWithDistance,
        };
    }
    if let Some(r) = a.reducer {
        cfg.reducer = match r {
            ReducerArg::Pca => ReducerMethod::Pca,
            ReducerArg::TopkMax => ReducerMethod::TopkMax,
            ReducerArg::Quantiles => ReducerMethod::Quantiles,
        };
    }
    if a.no_right_encoder {
        cfg.right_encoder = false;
    }
    if let Some(o) = a.optimizer {
        cfg.training.optimizer = match o {
            OptimizerArg::Sgd => Optimizer::Sgd,
            OptimizerArg::Adam => Optimizer::Adam,
        };
    }
    set(&mut cfg.k, a.k);
    set(&mut cfg.training.epochs, a.epochs);
    set(&mut cfg.training.learning_rate, a.learning_rate);
    set(&mut cfg.training.batch_size, a.batch_size);
    set(&mut cfg.train_fraction, a.train_fraction);
    cfg.seed = resolve_seed(a.seed, file_seed.then_some(cfg.seed))?;
    cfg.training.seed = cfg.seed;
    cfg.circles.seed = cfg.seed;
    if !(cfg.train_fraction > 0.0 && cfg.train_fraction <= 1.0) {
        return Err(CliError::Usage("train fraction must lie in (0, 1]".into()));
    }

    let data: Vec<TrainSample> = if a.circles {
        let d = circles_task(&cfg.circles)?;
        if let Some(dir) = &a.export {
            export_dataset(dir, &d)?;
        }
        d
    } else {
        let path = a.manifest.as_deref().expect("clap enforces manifest or circles");
        let (base, m) = read_manifest(path)?;
        m.pairs
            .iter()
            .map(|e| match load_pair(&base, e)? {
                (left, right, Some(target)) => Ok(TrainSample { left, right, target }),
                _ => Err(CliError::Usage(format!("{}: every training pair needs a target", path.display()))),
            })
            .collect::<Result<_>>()?
    };
    let first = data.first().ok_or_else(|| CliError::Usage("empty dataset".into()))?;
    let (tr, te) = train_test_split(data.len(), cfg.train_fraction, cfg.seed);
    let train_set: Vec<TrainSample> = tr.iter().map(|&i| data[i].clone()).collect();
    let test_set: Vec<TrainSample> = te.iter().map(|&i| data[i].clone()).collect();

    let mut mc = ModelConfig::new(cfg.variant, first.left.dim(), first.target.spec);
    mc.architecture = cfg.architecture.clone();
    mc.reducer = cfg.reducer;
    mc.k = cfg.k;
    mc.right_encoder = cfg.right_encoder;
    mc.seed = cfg.seed;
    let trained = train_model(CrnModel::new(mc)?, &train_set, &cfg.training)?;

    #[derive(Serialize)]
    struct TrainResult {
        parameter_count: usize,
        train_indices: Vec<usize>,
        test_indices: Vec<usize>,
        loss_history: Vec<f64>,
        train_sym_kl: f64,
        test_sym_kl: Option<f64>,
    }
    let result = TrainResult {
        parameter_count: trained.model.parameter_count(),
        train_sym_kl: mean_sym_kl(&trained.model, &train_set)?,
        test_sym_kl: if test_set.is_empty() { None } else { Some(mean_sym_kl(&trained.model, &test_set)?) },
        train_indices: tr,
        test_indices: te,
        loss_history: trained.loss_history,
    };
    create_dir(&a.out_dir)?;
    let mp = a.out_dir.join("model.json");
    at(&mp, io::write_json(&mp, &ModelFile { version: VERSION.into(), model: trained.model }))?;
    write_report(&a.out_dir.join("train_report.json"), "train", &cfg, &result)?;
    match result.test_sym_kl {
        Some(t) => println!("train sym-KL {:.6}, test sym-KL {t:.6}", result.train_sym_kl),
        None => println!("train sym-KL {:.6}", result.train_sym_kl),
    }
    Ok(())
}

pub fn predict(a: PredictArgs) -> Result<()> {
    let file: ModelFile = at(&a.model, io::read_json(&a.model))?;
    let model = file.model;
    create_dir(&a.out_dir)?;
    let pairs: Vec<(String, PointCloud, PointCloud, Option<DensityGrid>)> = match (&a.left, &a.right, &a.manifest) {
        (Some(l), Some(r), _) => {
            let target = match &a.target {
                Some(t) => Some(at(t, io::read_grid(t))?),
                None => None,
            };
            vec![("prediction".into(), read_cloud(l)?, read_cloud(r)?, target)]
        }
        (_, _, Some(m)) => {
            let (base, man) = read_manifest(m)?;
            man.pairs
                .iter()
                .enumerate()
                .map(|(k, e)| {
                    let (l, r, t) = load_pair(&base, e)?;
                    Ok((format!("prediction_{k:04}"), l, r, t))
                })
                .collect::<Result<_>>()?
        }
        _ => return Err(CliError::Usage("pass --left and --right, or --manifest".into())),
    };
    #[derive(Serialize)]
    struct PairResult {
        output: String,
        sym_kl: Option<f64>,
    }
    let mut results = Vec::with_capacity(pairs.len());
    for (name, l, r, t) in &pairs {
        let pred = model.forward(l, r)?;
        let out = a.out_dir.join(format!("{name}.csv"));
        at(&out, io::write_grid(&out, &pred))?;
        if a.pgm {
            let p = a.out_dir.join(format!("{name}.pgm"));
            at(&p, io::write_pgm(&p, &pred))?;
        }
        let kl = t.as_ref().map(|t| sym_kl(&pred, t)).transpose()?;
        results.push(PairResult { output: out.display().to_string(), sym_kl: kl });
    }
    let kls: Vec<f64> = results.iter().filter_map(|r| r.sym_kl).collect();
    #[derive(Serialize)]
    struct PredictResult {
        pairs: Vec<PairResult>,
        mean_sym_kl: Option<f64>,
    }
    let mean = (!kls.is_empty()).then(|| kls.iter().sum::<f64>() / kls.len() as f64);
    #[derive(Serialize)]
    struct PredictConfig<'a> {
        model: String,
        model_config: &'a ModelConfig,
    }
    let cfg = PredictConfig { model: a.model.display().to_string(), model_config: &model.config };
    write_report(&a.out_dir.join("predict_report.json"), "predict", &cfg, &PredictResult { pairs: results, mean_sym_kl: mean })?;
    if let Some(m) = mean {
        println!("mean sym-KL {m:.6}");
    }
    Ok(())
}

pub fn topgen(a: TopgenArgs) -> Result<()> {
    #[derive(Debug, Clone, Serialize, Deserialize)]
    struct TopgenRunConfig {
        #[serde(flatten)]
        topgen: TopGenConfig,
        seed: u64,
    }
    let (mut cfg, file_seed) = load(TopgenRunConfig { topgen: TopGenConfig::default(), seed: 0 }, a.config.as_deref())?;
    set(&mut cfg.topgen.embedding_dim, a.embedding_dim);
    set(&mut cfg.topgen.delay, a.delay);
    set(&mut cfg.topgen.pca_dim, a.pca_dim);
    set(&mut cfg.topgen.hom_dims, a.hom_dims);
    cfg.seed = resolve_seed(a.seed, file_seed.then_some(cfg.seed))?;

    let data = at(&a.series, io::read_labelled_series(&a.series))?;
    if data.is_empty() {
        return Err(CliError::Usage(format!("{}: no series", a.series.display())));
    }
    let (refs, ref_source): (Vec<TimeSeries>, String) = match &a.references {
        Some(p) => {
            let r = at(p, io::read_labelled_series(p))?;
            (r.into_iter().map(|(s, _)| s).collect(), p.display().to_string())
        }
        None => {
            let labels: Vec<usize> = data.iter().map(|d| d.1).collect();
            let idx = select_references(&labels, cfg.seed);
            let src = format!("series rows {idx:?}");
            (idx.iter().map(|&i| data[i].0.clone()).collect(), src)
        }
    };
    let tg = TopGen::new(cfg.topgen.clone(), &refs)?;
    let series: Vec<TimeSeries> = data.iter().map(|d| d.0.clone()).collect();
    let features = tg.features_batch(&series)?;
    let schema = tg.schema();
    let mut csv = format!("label,{}\n", schema.join(","));
    for (f, (_, label)) in features.iter().zip(&data) {
        csv.push_str(&label.to_string());
        for v in &f.values {
            csv.push(',');
            csv.push_str(&io::format_float(*v));
        }
        csv.push('\n');
    }
    at(&a.out, fs::write(&a.out, csv).map_err(Into::into))?;
    #[derive(Serialize)]
    struct TopgenResult {
        series: usize,
        references: String,
        schema: Vec<String>,
    }
    let result = TopgenResult { series: data.len(), references: ref_source, schema };
    write_report(&a.out.with_extension("json"), "topgen", &cfg, &result)?;
    println!("{} series x {} features", data.len(), result.schema.len());
    Ok(())
}

/// Features CSV: header `label,<names>`, then one row per series.
fn read_features(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>, Vec<usize>)> {
    let text = at(path, fs::read_to_string(path).map_err(Into::into))?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
    let (_, header) = lines.next().ok_or_else(|| CliError::Usage(format!("{}: empty file", path.display())))?;
    let names: Vec<String> = header.split(',').skip(1).map(|s| s.trim().to_string()).collect();
    let bad = |line: usize, msg: String| CliError::File {
        path: path.display().to_string(),
        source: crosspers::Error::Parse { path: path.display().to_string(), line: line + 1, msg },
    };
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for (i, l) in lines {
        let mut fields = l.split(',').map(str::trim);
        let label = fields.next().unwrap_or("");
        y.push(label.parse::<usize>().map_err(|_| bad(i, format!("bad label {label:?}")))?);
        let row: Vec<f64> =
            fields.map(|f| f.parse::<f64>().map_err(|_| bad(i, format!("not a number: {f:?}")))).collect::<Result<_>>()?;
        if row.len() != names.len() {
            return Err(bad(i, format!("expected {} features, found {}", names.len(), row.len())));
        }
        x.push(row);
    }
    Ok((names, x, y))
}

pub fn classify(a: ClassifyArgs) -> Result<()> {
    #[derive(Debug, Clone, Serialize, Deserialize)]
    struct ClassifyConfig {
        logistic: LogisticConfig,
        train_fraction: f64,
        columns: String,
        seed: u64,
    }
    let default = ClassifyConfig {
        logistic: LogisticConfig::default(),
        train_fraction: DEFAULT_TRAIN_FRACTION,
        columns: "all".into(),
        seed: 0,
    };
    let (mut cfg, file_seed) = load(default, a.config.as_deref())?;
    set(&mut cfg.logistic.l2, a.l2);
    set(&mut cfg.logistic.learning_rate, a.learning_rate);
    set(&mut cfg.logistic.iterations, a.iterations);
    set(&mut cfg.train_fraction, a.train_fraction);
    cfg.columns = match a.columns {
        ColumnsArg::All => "all",
        ColumnsArg::Mtd => "mtd",
        ColumnsArg::Entropy => "entropy",
    }
    .into();
    cfg.seed = resolve_seed(a.seed, file_seed.then_some(cfg.seed))?;

    let (names, x_all, y) = read_features(&a.features)?;
    let keep: Vec<usize> = (0..names.len())
        .filter(|&j| cfg.columns == "all" || names[j].starts_with(&format!("{}_", cfg.columns)))
        .collect();
    if keep.is_empty() {
        return Err(CliError::Usage(format!("no {} columns in {}", cfg.columns, a.features.display())));
    }
    let x: Vec<Vec<f64>> = x_all.iter().map(|r| keep.iter().map(|&j| r[j]).collect()).collect();
    let (tr, te) = train_test_split(x.len(), cfg.train_fraction, cfg.seed);
    if te.is_empty() {
        return Err(CliError::Usage("the split leaves no test data".into()));
    }
    let pick = |idx: &[usize]| -> (Vec<Vec<f64>>, Vec<usize>) {
        (idx.iter().map(|&i| x[i].clone()).collect(), idx.iter().map(|&i| y[i]).collect())
    };
    let (xtr, ytr) = pick(&tr);
    let (xte, yte) = pick(&te);
    let mut classes = y.clone();
    classes.sort_unstable();
    classes.dedup();

    #[derive(Serialize)]
    struct ClassifyResult {
        columns: Vec<String>,
        classes: Vec<usize>,
        n_train: usize,
        n_test: usize,
        accuracy: f64,
        /// Binary tasks only; the larger label is positive.
        roc_auc: Option<f64>,
    }
    let (accuracy, roc_auc) = if classes.len() == 2 {
        let pos = classes[1];
        let btr: Vec<bool> = ytr.iter().map(|&l| l == pos).collect();
        let bte: Vec<bool> = yte.iter().map(|&l| l == pos).collect();
        let m = logistic_fit(&xtr, &btr, &cfg.logistic)?;
        let scores: Vec<f64> = xte.iter().map(|r| m.predict_proba(r)).collect();
        if bte.iter().all(|&b| b == bte[0]) {
            let correct = scores.iter().zip(&bte).filter(|(s, &l)| (**s >= 0.5) == l).count();
            (correct as f64 / bte.len() as f64, None)
        } else {
            let r = metrics_from_scores(&scores, &bte)?;
            (r.accuracy, Some(r.roc_auc))
        }
    } else {
        let m = OneVsRest::fit(&xtr, &ytr, &cfg.logistic)?;
        (m.accuracy(&xte, &yte), None)
    };
    let result = ClassifyResult {
        columns: keep.iter().map(|&j| names[j].clone()).collect(),
        classes,
        n_train: tr.len(),
        n_test: te.len(),
        accuracy,
        roc_auc,
    };
    write_report(&a.out, "classify", &cfg, &result)?;
    match roc_auc {
        Some(auc) => println!("accuracy {accuracy:.4}, ROC-AUC {auc:.4}"),
        None => println!("accuracy {accuracy:.4}"),
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
struct CheckOutcome {
    name: &'static str,
    passed: bool,
    detail: String,
}

fn property(name: &'static str, r: PropertyReport) -> CheckOutcome {
    CheckOutcome {
        name,
        passed: r.passed,
        detail: format!("{} trials, {} violations, max excess {:.3e}", r.trials, r.violations, r.max_violation),
    }
}

/// The matrix-free engine against explicit reduction, on small random clouds.
fn dual_route_check(trials: usize, seed: u64) -> crosspers::Result<CheckOutcome> {
    let mut mismatches = 0;
    for t in 0..trials {
        let s = seed.wrapping_add(t as u64 * 2);
        let dim = 2 + t % 2;
        let left = uniform_cloud(3 + t % 6, dim, s)?;
        let right = uniform_cloud(2 + (t / 3) % 5, dim, s + 1)?;
        let explicit = reduce(&vr_filtration(&pairwise_distances(&left), 1, f64::INFINITY), 1)?;
        let fast = distance_diagrams(&pairwise_distances(&left), 1, f64::INFINITY)?;
        if explicit != fast {
            mismatches += 1;
        }
        for d in 0..=1 {
            if cross_barcode(&left, &right, d, MaxScale::Auto)? != cross_barcode_explicit(&left, &right, d, MaxScale::Auto)? {
                mismatches += 1;
            }
        }
    }
    Ok(CheckOutcome {
        name: "matrix_free_vs_explicit",
        passed: mismatches == 0,
        detail: format!("{trials} cloud pairs, {mismatches} mismatching diagrams"),
    })
}

fn network_checks(seed: u64) -> crosspers::Result<Vec<CheckOutcome>> {
    let task = CirclesTaskConfig { n_pairs: 4, points: 12, subsamples: 2, subsample_size: 8, nx: 4, ny: 4, seed, ..Default::default() };
    let data = circles_task(&task)?;
    let mut mc = ModelConfig::new(Variant::CDualWithDistance, 2, data[0].target.spec);
    mc.architecture = Architecture { phi1: vec![8, 8], phi2: vec![8], head_hidden: vec![16] };
    mc.k = 4;
    mc.seed = seed;
    let model = CrnModel::new(mc)?;
    let gc = grad_check(&model, &data[0], &GradCheckConfig { seed, ..Default::default() })?;
    let s = &data[1];
    let n = s.left.len();
    let perm: Vec<usize> = (0..n).rev().collect();
    let shuffled = s.left.select(&perm)?;
    let same = model.forward(&s.left, &s.right)?.values == model.forward(&shuffled, &s.right)?.values;
    Ok(vec![
        CheckOutcome {
            name: "crossripsnet_grad_check",
            passed: gc.passed,
            detail: format!("max relative error {:.3e} over {} parameters", gc.max_relative_error, gc.checked),
        },
        CheckOutcome {
            name: "crossripsnet_permutation_invariance",
            passed: same,
            detail: "reversed left cloud gives a bitwise identical prediction".into(),
        },
    ])
}

pub fn selftest(a: SelftestArgs) -> Result<()> {
    let seed = resolve_seed(a.seed, None)?;
    let mut checks = vec![
        property("overlap_lipschitz", overlap_lipschitz_check(a.trials, seed)),
        property("overlap_tv_pushforward", tv_pushforward_check(a.trials, seed)),
        dual_route_check((a.trials / 4).max(1), seed)?,
    ];
    checks.extend(network_checks(seed)?);
    for c in &checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    if let Some(out) = &a.out {
        #[derive(Serialize)]
        struct SelftestConfig {
            trials: usize,
            seed: u64,
        }
        write_report(out, "selftest", &SelftestConfig { trials: a.trials, seed }, &checks)?;
    }
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::SelfTest(failed.join(", ")))
    }
}
