use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};

use arena_core::adapter::{save_checkpoint, train, training_curve_table, AdamWConfig, AdapterConfig, AdapterParams, Variant};
use arena_core::agreement::{kappa, kappa_table, paired_judgments, AgreementKind, AgreementMatrix};
use arena_core::annotation::AnnotationRecord;
use arena_core::corpus::audio::{prepare_clip, read_wav, write_wav, ResamplerConfig, SampleFormat};
use arena_core::corpus::census::{disparity_report, excluded_table, genre_table, load_descriptors, region_table, rollup_table, RegionMap};
use arena_core::corpus::{ingest_metadata, split_by_song, CorpusSplit, TrackMetadata};
use arena_core::emb::load_matrix;
use arena_core::metrics::{evaluate_corpus, metric_table, CorpusInputs, EmbeddingSet, PairedLogits};
use arena_core::prompts::{
    default_templates, generate_analysis_queries, generate_creativity_queries, generate_recall_queries, load_templates,
    training_prompts, AttributePools, EvalQuery,
};
use arena_core::protocol::parse_query_filter;
use arena_core::ratings::{leaderboard_table, replay, systems_in, AmendmentPolicy, EloConfig, ReplayFilter};
use arena_core::scalar::Real;
use arena_core::table::{fmt_num, Table};
use arena_core::{jsonl, Criterion, QueryType};
use arena_service::{ScheduleConfig, ServeConfig, ServiceError, Store};

use crate::*;

/// Bad flags or inputs caught by the CLI itself.
#[derive(Debug)]
pub struct Invalid(pub String);

impl fmt::Display for Invalid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

fn invalid(msg: impl Into<String>) -> anyhow::Error {
    Invalid(msg.into()).into()
}

pub fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.is::<Invalid>() {
            return 2;
        }
        if let Some(arena_core::Error::Io(io)) = cause.downcast_ref::<arena_core::Error>() {
            // an input path that does not exist is a usage problem
            return if io.kind() == std::io::ErrorKind::NotFound { 2 } else { 1 };
        }
        if let Some(core) = cause.downcast_ref::<arena_core::Error>() {
            return if core.is_validation() { 2 } else { 1 };
        }
        if let Some(svc) = cause.downcast_ref::<ServiceError>() {
            return match svc {
                ServiceError::NotFound(_) | ServiceError::Conflict(_) | ServiceError::Validation(_) => 2,
                ServiceError::Core(c) if c.is_validation() => 2,
                _ => 1,
            };
        }
    }
    1
}

pub fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Ingest(a) => ingest(a),
        Command::Split(a) => split(a),
        Command::Prompts(a) => prompts(a),
        Command::Schedule(a) => schedule(a),
        Command::Serve(a) => serve(a),
        Command::Elo(a) => elo(a),
        Command::Iaa(a) => iaa(a),
        Command::Metrics(a) => metrics(a),
        Command::Disparity(a) => disparity(a),
        Command::AdapterTrain(a) => match a.precision {
            Precision::F32 => adapter_train::<f32>(a),
            Precision::F64 => adapter_train::<f64>(a),
        },
    }
}

fn read_metadata(path: &Path) -> Result<Vec<TrackMetadata>> {
    ingest_metadata(path).with_context(|| format!("reading {}", path.display()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn ingest(a: IngestArgs) -> Result<()> {
    let tracks = read_metadata(&a.metadata)?;
    if !(a.max_seconds > 0.0) || a.sample_rate == 0 {
        return Err(invalid("--max-seconds and --sample-rate must be positive"));
    }
    let mut per_genre: BTreeMap<&str, (usize, BTreeSet<&str>, f64)> = BTreeMap::new();
    for t in &tracks {
        let e = per_genre.entry(&t.genre).or_default();
        e.0 += 1;
        e.1.insert(&t.song_id);
        e.2 += t.duration_s / 3600.0;
    }
    if let Some(root) = &a.audio_root {
        if let Some(t) = tracks.iter().find(|t| t.audio_path.is_none()) {
            return Err(invalid(format!("track `{}` has no audio_path", t.id)));
        }
        let out = a.out_audio.as_ref().expect("clap enforces --out-audio");
        fs::create_dir_all(out)?;
        for t in &tracks {
            let src = root.join(t.audio_path.as_deref().unwrap_or_default());
            let clip = read_wav(&src).with_context(|| format!("reading {}", src.display()))?;
            let prepared = prepare_clip(&clip, a.max_seconds, a.sample_rate, ResamplerConfig::default())?;
            write_wav(out.join(format!("{}.wav", t.id)), &prepared, SampleFormat::Int16)?;
        }
    }
    if let Some(out) = &a.out {
        write_text(out, &jsonl::to_string(&tracks))?;
    }
    let mut table = Table::new(["genre", "tracks", "songs", "hours"]);
    for (genre, (n, songs, hours)) in per_genre {
        table.push([genre.to_string(), n.to_string(), songs.len().to_string(), fmt_num(hours, 2)]);
    }
    print!("{table}");
    Ok(())
}

fn split(a: SplitArgs) -> Result<()> {
    let tracks = read_metadata(&a.metadata)?;
    let s = split_by_song(&tracks, a.test_fraction, a.seed)?;
    if let Some(out) = &a.out {
        write_text(out, &(serde_json::to_string_pretty(&s)? + "\n"))?;
    }
    let mut t = Table::new(["side", "songs", "tracks", "hours"]);
    t.push(["train".into(), s.train_songs.len().to_string(), s.train_ids.len().to_string(), fmt_num(s.train_hours, 4)]);
    t.push(["test".into(), s.test_songs.len().to_string(), s.test_ids.len().to_string(), fmt_num(s.test_hours, 4)]);
    print!("{t}");
    Ok(())
}

fn prompts(a: PromptsArgs) -> Result<()> {
    let tracks = read_metadata(&a.metadata)?;
    let train: Vec<TrackMetadata> = match &a.split {
        Some(p) => {
            let s: CorpusSplit = serde_json::from_str(&fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)
                .map_err(|e| invalid(format!("{}: {e}", p.display())))?;
            let ids: HashSet<&str> = s.train_ids.iter().map(String::as_str).collect();
            let train: Vec<TrackMetadata> = tracks.iter().filter(|t| ids.contains(t.id.as_str())).cloned().collect();
            if train.len() != ids.len() {
                return Err(invalid("split refers to tracks missing from the metadata"));
            }
            train
        }
        None => tracks,
    };
    let templates = match &a.templates {
        Some(p) => load_templates(p)?,
        None => default_templates(),
    };
    let foreign = match &a.foreign {
        Some(p) => Some(AttributePools::load(p)?),
        None if a.creativity > 0 => return Err(invalid("--creativity needs --foreign")),
        None => None,
    };

    let mut queries = generate_recall_queries(&train, a.recall, a.seed, &templates)?;
    queries.extend(generate_analysis_queries(&train, a.analysis, a.seed, &templates)?);
    if let Some(foreign) = &foreign {
        queries.extend(generate_creativity_queries(&train, foreign, a.creativity, a.seed, &templates)?);
    }
    if let Some(prefix) = &a.id_prefix {
        for q in &mut queries {
            q.id = format!("{prefix}-{}", q.id);
        }
    }
    let training = match &a.training_out {
        Some(_) => Some(training_prompts(&train, &templates, a.seed)?),
        None => None,
    };

    write_text(&a.out, &jsonl::to_string(&queries))?;
    if let (Some(path), Some(tp)) = (&a.training_out, &training) {
        write_text(path, &jsonl::to_string(tp))?;
    }
    let mut t = Table::new(["query_type", "count"]);
    for qt in QueryType::ALL {
        t.push([qt.to_string(), queries.iter().filter(|q| q.query_type == qt).count().to_string()]);
    }
    if let Some(tp) = &training {
        t.push(["training".to_string(), tp.len().to_string()]);
    }
    print!("{t}");
    Ok(())
}

fn parse_pair(s: &str) -> Result<(String, String)> {
    match s.split_once(':') {
        Some((a, b)) if !a.trim().is_empty() && !b.trim().is_empty() => Ok((a.trim().into(), b.trim().into())),
        _ => Err(invalid(format!("pair `{s}` is not of the form A:B"))),
    }
}

fn schedule(a: ScheduleArgs) -> Result<()> {
    let queries: Vec<EvalQuery> = jsonl::read(&a.queries).with_context(|| format!("reading {}", a.queries.display()))?;
    let cfg = ScheduleConfig {
        allowed_pairs: a.pairs.iter().map(|p| parse_pair(p)).collect::<Result<_>>()?,
        queries_per_type: a.queries_per_type,
        query_types: a.query_types.iter().map(|s| s.parse()).collect::<Result<_, arena_core::Error>>()?,
        query_offset: a.query_offset,
        phase: a.phase,
        annotators_per_match: a.annotators_per_match,
        genre: a.genre,
    };
    cfg.validate()?;
    let mut store = Store::open(&a.data_dir)?;
    let out = store.schedule(&cfg, &queries, a.seed)?;
    let created: HashSet<&str> = out.match_ids.iter().map(String::as_str).collect();
    let mut t = Table::new(["match_id", "genre", "query_type", "prompt_id", "system_a", "system_b", "phase", "annotators"]);
    for m in store.matches().iter().filter(|m| created.contains(m.match_id.as_str())) {
        t.push([
            m.match_id.clone(),
            m.genre.clone(),
            m.query_type.to_string(),
            m.prompt_id.clone(),
            m.system_a.clone(),
            m.system_b.clone(),
            m.phase.to_string(),
            m.annotators_per_match.to_string(),
        ]);
    }
    print!("{t}");
    Ok(())
}

fn serve(a: ServeArgs) -> Result<()> {
    let rt = tokio::runtime::Runtime::new()?;
    let cfg = ServeConfig { data_dir: a.data_dir, host: a.host, port: a.port, ui_dir: a.ui_dir };
    rt.block_on(arena_service::serve(cfg, |addr| eprintln!("listening on http://{addr}")))?;
    Ok(())
}

fn criteria(s: &str) -> Result<Vec<Criterion>> {
    if s.trim().eq_ignore_ascii_case("all") {
        Ok(Criterion::ALL.to_vec())
    } else {
        Ok(vec![s.parse()?])
    }
}

fn read_log(path: &Path) -> Result<Vec<AnnotationRecord>> {
    jsonl::read(path).with_context(|| format!("reading {}", path.display()))
}

fn elo(a: EloArgs) -> Result<()> {
    let log = read_log(&a.log)?;
    let criteria = criteria(&a.criterion)?;
    let cfg = EloConfig::new(a.k_factor, a.initial_rating)?;
    let filter = ReplayFilter {
        query_type: parse_query_filter(&a.query_type)?,
        genre: a.genre.clone(),
        amendments: match a.amendments {
            Amendments::Ignore => AmendmentPolicy::Ignore,
            Amendments::Replace => AmendmentPolicy::Replace,
        },
    };
    let in_genre: Vec<AnnotationRecord> =
        log.iter().filter(|r| a.genre.as_deref().is_none_or(|g| g == r.genre)).cloned().collect();
    let systems = systems_in(&in_genre);
    if systems.is_empty() {
        return Err(invalid("no annotations match the requested genre"));
    }
    let mut out: Option<Table> = None;
    for c in criteria {
        let t = leaderboard_table(&replay(&log, &systems, c, &filter, &cfg)?);
        match &mut out {
            Some(acc) => acc.rows.extend(t.rows),
            None => out = Some(t),
        }
    }
    print!("{}", out.unwrap_or_default());
    Ok(())
}

fn iaa(a: IaaArgs) -> Result<()> {
    let log = read_log(&a.log)?;
    let kind = match a.metric {
        Metric::Distance => AgreementKind::Distance,
        Metric::Direction => AgreementKind::Direction,
    };
    let matrix = AgreementMatrix::<f64>::new(kind);
    let mut reports = Vec::new();
    for c in criteria(&a.criterion)? {
        let pairs = paired_judgments(&log, c, a.genre.as_deref());
        let mut r = kappa(&pairs, &matrix).with_context(|| format!("criterion {c}"))?;
        r.criterion = Some(c);
        reports.push(r);
    }
    print!("{}", kappa_table(&reports));
    Ok(())
}

fn embedding_pair(r: &Option<std::path::PathBuf>, g: &Option<std::path::PathBuf>) -> Result<Option<(EmbeddingSet<f64>, EmbeddingSet<f64>)>> {
    match (r, g) {
        (Some(r), Some(g)) => {
            let load = |p: &Path| -> Result<EmbeddingSet<f64>> {
                let m = load_matrix::<f64>(p).with_context(|| format!("reading {}", p.display()))?;
                Ok(EmbeddingSet::new(m.matrix, p.display().to_string())?)
            };
            let (r, g) = (load(r)?, load(g)?);
            if r.dim() != g.dim() {
                return Err(invalid(format!("embedding widths differ: {} vs {}", r.dim(), g.dim())));
            }
            Ok(Some((r, g)))
        }
        _ => Ok(None),
    }
}

fn metrics(a: MetricsArgs) -> Result<()> {
    if !(a.peak > 0.0) || !(a.kl_eps > 0.0 && a.kl_eps < 0.5) {
        return Err(invalid("--peak must be positive and --kl-eps in (0, 0.5)"));
    }
    let logits = match (&a.logits_ref, &a.logits_gen) {
        (Some(r), Some(g)) => Some(PairedLogits::align(load_matrix::<f64>(r)?, load_matrix::<f64>(g)?)?),
        _ => None,
    };
    let features = match (&a.features_ref, &a.features_gen) {
        (Some(r), Some(g)) => Some((load_matrix::<f64>(r)?.matrix, load_matrix::<f64>(g)?.matrix)),
        _ => None,
    };
    let inputs = CorpusInputs {
        system: a.system.clone(),
        fad: embedding_pair(&a.fad_ref, &a.fad_gen)?,
        fd: embedding_pair(&a.fd_ref, &a.fd_gen)?,
        logits,
        features,
        peak: Some(a.peak),
        kl_eps: Some(a.kl_eps),
    };
    print!("{}", metric_table(&[evaluate_corpus(&inputs)?]));
    Ok(())
}

fn disparity(a: DisparityArgs) -> Result<()> {
    let rows = load_descriptors(&a.datasets).with_context(|| format!("reading {}", a.datasets.display()))?;
    let report = disparity_report(&rows, &RegionMap::default());
    let tables = match a.section {
        Section::Regions => vec![region_table(&report)],
        Section::Genres => vec![genre_table(&report)],
        Section::Rollup => vec![rollup_table(&report)],
        Section::Excluded => vec![excluded_table(&report)],
        Section::All => vec![region_table(&report), genre_table(&report), rollup_table(&report), excluded_table(&report)],
    };
    let text: Vec<String> = tables.iter().map(ToString::to_string).collect();
    print!("{}", text.join("\n"));
    Ok(())
}

fn adapter_train<T: Real>(a: AdapterTrainArgs) -> Result<()> {
    let input = load_matrix::<T>(&a.input).with_context(|| format!("reading {}", a.input.display()))?.matrix;
    let target = load_matrix::<T>(&a.target).with_context(|| format!("reading {}", a.target.display()))?.matrix;
    if input.shape() != target.shape() {
        return Err(invalid(format!("input {:?} and target {:?} differ in shape", input.shape(), target.shape())));
    }
    if a.steps == 0 {
        return Err(invalid("--steps must be positive"));
    }
    let variant = match a.variant {
        VariantArg::Dense => Variant::Dense,
        VariantArg::Conv1x1 => Variant::Conv1x1,
    };
    let cfg = AdapterConfig::new(variant, input.cols(), a.reduction_factor)?;
    let opt = AdamWConfig {
        lr: T::lit(a.lr),
        beta1: T::lit(a.beta1),
        beta2: T::lit(a.beta2),
        eps: T::lit(a.eps),
        weight_decay: T::lit(a.weight_decay),
        max_grad_norm: (a.max_grad_norm > 0.0).then(|| T::lit(a.max_grad_norm)),
    };
    let mut params = AdapterParams::<T>::init(&cfg, a.seed);
    let losses = train(&input, &target, &mut params, &opt, a.steps)?;
    if let Some(path) = &a.checkpoint {
        save_checkpoint(path, &params)?;
    }
    print!("{}", training_curve_table(&losses));
    Ok(())
}
