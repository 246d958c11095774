use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, Context};
use layoutforge::extract::ExtractionParams;
use layoutforge::hyper::{HyperParams, HyperService, InlineExecutor};
use layoutforge::layout::{extract_to_store, layout_scene, ExtractReport, LayoutConfig, LayoutResponse};
use layoutforge::render::render_svg;
use layoutforge::scene::{load_scene_corpus, write_scene_corpus, Scene};
use layoutforge::store::PriorStore;
use layoutforge::synth;

/// A command failure with the process exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    pub const GENERAL: u8 = 1;
    pub const CORPUS: u8 = 2;
    pub const BIND: u8 = 3;

    pub fn new(code: u8, error: anyhow::Error) -> Self {
        Self { code, error }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        Self::new(Self::GENERAL, error)
    }
}

impl From<layoutforge::Error> for Failure {
    fn from(error: layoutforge::Error) -> Self {
        Self::new(Self::GENERAL, error.into())
    }
}

pub type CmdResult<T> = Result<T, Failure>;

/// Loads a corpus; any read or parse failure maps to the corpus exit code.
pub fn load_corpus(path: &Path) -> CmdResult<Vec<Scene>> {
    let load = load_scene_corpus(path)
        .with_context(|| format!("cannot read corpus {}", path.display()))
        .map_err(|e| Failure::new(Failure::CORPUS, e))?;
    for w in &load.warnings {
        eprintln!("warning: {w}");
    }
    Ok(load.scenes)
}

pub fn extract(corpus: &Path, store: &Path, params: &ExtractionParams, align: bool) -> CmdResult<ExtractReport> {
    let scenes = load_corpus(corpus)?;
    let store = PriorStore::open(store).with_context(|| format!("cannot open store {}", store.display()))?;
    Ok(extract_to_store(&scenes, params, align, &store)?)
}

pub fn format_report(r: &ExtractReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "scenes: {}  relations: {}", r.scenes, r.emitted());
    for rel in &r.relations {
        let _ = writeln!(
            out,
            "  {} -> {}: {} samples, {} priors, {:.1}% removed, {} chains (longest {}){}",
            rel.dominant,
            rel.secondary,
            rel.raw_samples,
            rel.kept,
            100.0 * rel.removal_rate(),
            rel.chains,
            rel.longest_chain,
            if rel.emitted { "" } else { "  [dropped]" },
        );
    }
    out
}

pub struct LayoutFiles {
    pub json: String,
    pub svg: String,
    pub response: LayoutResponse,
}

/// Lays out `scene` against the store at `store_dir`. Hyper-relations are
/// generated inline, so the output depends only on the inputs and the seed.
pub fn layout_in_store(scene: &Scene, store_dir: &Path, seed: u64, config: &LayoutConfig) -> CmdResult<LayoutFiles> {
    if !store_dir.is_dir() {
        return Err(anyhow!("store {} does not exist; run `extract` first", store_dir.display()).into());
    }
    let store = Arc::new(PriorStore::open(store_dir)?);
    let hyper = HyperService::new(Arc::clone(&store), Arc::new(InlineExecutor), HyperParams::default());
    let out = layout_scene(scene, &store, Some(&hyper), seed, config)?;
    let response = LayoutResponse::from_outcome(&out);
    let mut json = serde_json::to_string_pretty(&response).context("serialize layout")?;
    json.push('\n');
    let svg = render_svg(&out.scene, &out.group_of());
    Ok(LayoutFiles { json, svg, response })
}

pub fn read_scene(path: &Path) -> CmdResult<Scene> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read scene {}", path.display()))?;
    let scene = Scene::from_json(&text).with_context(|| format!("invalid scene {}", path.display()))?;
    scene.validate(false).with_context(|| format!("invalid scene {}", path.display()))?;
    Ok(scene)
}

pub fn layout(scene: &Path, store: &Path, seed: u64, out: &Path, svg: Option<&Path>, config: &LayoutConfig) -> CmdResult<LayoutResponse> {
    let scene = read_scene(scene)?;
    let files = layout_in_store(&scene, store, seed, config)?;
    fs::write(out, &files.json).with_context(|| format!("cannot write {}", out.display()))?;
    if let Some(p) = svg {
        fs::write(p, &files.svg).with_context(|| format!("cannot write {}", p.display()))?;
    }
    Ok(files.response)
}

pub fn format_layout(r: &LayoutResponse) -> String {
    let mut out = format!(
        "{} groups, {} placed, {} discarded, hyper {}\n",
        r.stats.groups, r.stats.placed, r.stats.discarded, r.hyper_status
    );
    for d in &r.discards {
        let _ = writeln!(out, "  discarded group {} (objects {:?}): {}", d.group, d.objects, d.reason);
    }
    out
}

/// Writes a synthetic corpus to `dir/corpus` and the layout fixtures to
/// `dir/fixtures`.
pub fn synth(dir: &Path, scenes: usize, seed: u64, noise: f64) -> CmdResult<Vec<PathBuf>> {
    let corpus_dir = dir.join("corpus");
    write_scene_corpus(&corpus_dir, &synth::synth_corpus(scenes, seed, noise))?;
    let fixture_dir = dir.join("fixtures");
    fs::create_dir_all(&fixture_dir).with_context(|| format!("cannot create {}", fixture_dir.display()))?;
    let mut written = vec![corpus_dir];
    for s in synth::layout_fixtures() {
        let p = fixture_dir.join(format!("{}.json", s.id));
        fs::write(&p, s.to_json() + "\n").with_context(|| format!("cannot write {}", p.display()))?;
        written.push(p);
    }
    Ok(written)
}
