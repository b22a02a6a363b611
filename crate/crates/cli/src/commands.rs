use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use ctam_core::adapter::{history_csv, train_adapter, TrainConfig};
use ctam_core::analysis::{inflow_outflow, layer_distances, layer_similarity, pca_project, segment_stages};
use ctam_core::codec::{self, Gamma, Preset};
use ctam_core::formats::{read_container, read_ppm, write_container, write_ppm};
use ctam_core::guidance::{guide_image, GuideOptions, GuidanceMap, DEFAULT_K, DEFAULT_LAYERS};
use ctam_core::metrics::{bd_rate, bpp, read_rd_csv, write_rd_csv, RdPoint};
use ctam_core::vit::toy::{random_weights, ToyOptions};
use ctam_core::vit::{preprocess, Capture, Model, ViTConfig};
use ctam_core::{synth, RgbImage};
use serde_json::json;

use crate::config::{grid_from, JobConfig};
use crate::{
    AnalyzeArgs, BdRateArgs, Cli, Command, DecodeArgs, EncodeArgs, GuidanceOpts, GuideArgs, RdSweepArgs, TrainArgs,
    ToyModelArgs, Usage,
};

const DEFAULT_ENCODE_PRESET: u8 = 6;

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn required<T>(v: Option<T>, flag: &str) -> Result<T> {
    v.ok_or_else(|| usage(format!("missing {flag}")))
}

/// Flag, then config file, then default.
fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

fn preset(v: u8) -> Result<Preset> {
    Preset::new(v).map_err(|_| usage(format!("preset {v} is outside 0..=9")))
}

fn gamma(v: f64) -> Result<Gamma> {
    Gamma::new(v).map_err(|e| usage(e.to_string()))
}

fn read_image(path: &Path) -> Result<RgbImage> {
    read_ppm(path).with_context(|| format!("reading {}", path.display()))
}

fn write_text(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_model(path: &Path, job: &JobConfig) -> Result<Model> {
    let wc = read_container(path).with_context(|| format!("reading {}", path.display()))?;
    let cfg = match ViTConfig::from_container(&wc)? {
        Some(c) => c,
        None => job.vit.clone().ok_or_else(|| {
            usage(format!("{} has no embedded model config; set `vit` in --config", path.display()))
        })?,
    };
    Model::load(&wc, &cfg).with_context(|| format!("loading {}", path.display()))
}

fn guide_options(g: &GuidanceOpts, job: &JobConfig) -> Result<GuideOptions> {
    let (rows, cols) = grid_from(g.grid, job.grid.as_deref())?.unwrap_or((8, 8));
    let opts = GuideOptions {
        k: pick(g.k, job.k, DEFAULT_K),
        rows,
        cols,
        layers: pick(g.layers.clone(), job.layers.clone(), DEFAULT_LAYERS.to_vec()),
        level_count: pick(g.levels, job.levels, 3),
        tiles: grid_from(g.tiles, job.tiles.as_deref())?,
    };
    if !(opts.k > 0.0 && opts.k.is_finite()) {
        return Err(usage(format!("k must be positive, got {}", opts.k)));
    }
    if opts.level_count != 3 && opts.level_count != 5 {
        return Err(usage(format!("levels must be 3 or 5, got {}", opts.level_count)));
    }
    Ok(opts)
}

/// Guidance from `--map` or, with `--guide`, from the model.
enum GuidanceSource {
    None,
    Fixed(GuidanceMap),
    Model(Model, GuideOptions),
}

impl GuidanceSource {
    fn new(guide: bool, map: Option<&Path>, g: &GuidanceOpts, job: &JobConfig) -> Result<Self> {
        if let Some(p) = map {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            return Ok(GuidanceSource::Fixed(GuidanceMap::from_json(&text)?));
        }
        if !guide {
            if g.tiles.is_some() || g.model.is_some() {
                return Err(usage("--model and --tiles only apply together with --guide"));
            }
            return Ok(GuidanceSource::None);
        }
        let model = load_model(&required(g.model.clone().or(job.model.clone()), "--model")?, job)?;
        Ok(GuidanceSource::Model(model, guide_options(g, job)?))
    }

    fn map_for(&self, img: &RgbImage) -> Result<Option<GuidanceMap>> {
        Ok(match self {
            GuidanceSource::None => None,
            GuidanceSource::Fixed(m) => Some(m.clone()),
            GuidanceSource::Model(model, opts) => Some(guide_image(model, img, opts)?),
        })
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let name = match &cli.command {
        Command::Encode(_) => "encode",
        Command::Decode(_) => "decode",
        Command::Guide(_) => "guide",
        Command::Analyze(_) => "analyze",
        Command::RdSweep(_) => "rd-sweep",
        Command::TrainAdapter(_) => "train-adapter",
        Command::BdRate(_) => "bd-rate",
        Command::ToyModel(_) => "toy-model",
    };
    let job = JobConfig::load(cli.config.as_deref(), name)?;
    let seed = pick(cli.seed, job.seed, 0);
    match cli.command {
        Command::Encode(a) => encode(a, &job),
        Command::Decode(a) => decode(a),
        Command::Guide(a) => guide(a, &job),
        Command::Analyze(a) => analyze(a, &job),
        Command::RdSweep(a) => rd_sweep(a, &job),
        Command::TrainAdapter(a) => train(a, &job, seed),
        Command::BdRate(a) => bd(a),
        Command::ToyModel(a) => toy_model(a, &job, seed),
    }
}

fn single_input(flag: Option<PathBuf>, job: &JobConfig) -> Result<PathBuf> {
    if let Some(p) = flag {
        return Ok(p);
    }
    match job.inputs.as_deref() {
        Some([one]) => Ok(one.clone()),
        Some(_) => Err(usage("config `inputs` must hold exactly one path for this command")),
        None => Err(usage("missing --in")),
    }
}

fn encode(a: EncodeArgs, job: &JobConfig) -> Result<()> {
    let input = single_input(a.input, job)?;
    let out = required(a.out.or(job.out.clone()), "--out")?;
    let p = preset(pick(a.preset, job.preset, DEFAULT_ENCODE_PRESET))?;
    let g = gamma(pick(a.gamma, job.gamma, codec::DEFAULT_GAMMA))?;
    let source = GuidanceSource::new(a.guide, a.map.as_deref(), &a.guidance, job)?;
    let img = read_image(&input)?;
    let map = source.map_for(&img)?;
    let enc = codec::encode(&img, p, g, map.as_ref())?;
    fs::write(&out, &enc.bitstream).with_context(|| format!("writing {}", out.display()))?;
    println!(
        "{}: {} bytes, {:.4} bpp",
        out.display(),
        enc.bitstream.len(),
        bpp(enc.bitstream.len(), img.width(), img.height())?
    );
    Ok(())
}

fn decode(a: DecodeArgs) -> Result<()> {
    let input = required(a.input, "--in")?;
    let out = required(a.out, "--out")?;
    let bytes = fs::read(&input).with_context(|| format!("reading {}", input.display()))?;
    let d = codec::decode(&bytes)?;
    write_ppm(&d.image, &out).with_context(|| format!("writing {}", out.display()))?;
    if a.dump_latent {
        let guidance = match &d.guidance {
            Some(m) => serde_json::from_str::<serde_json::Value>(&m.to_json())?,
            None => serde_json::Value::Null,
        };
        let dump = json!({
            "width": d.header.width,
            "height": d.header.height,
            "preset": d.header.preset.index(),
            "gamma": d.header.gamma.value(),
            "blocks_x": d.latent.blocks_x,
            "blocks_y": d.latent.blocks_y,
            "guidance": guidance,
            "symbols": d.symbols,
        });
        let path = PathBuf::from(format!("{}.latent.json", out.display()));
        fs::write(&path, serde_json::to_string(&dump)?).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn guide(a: GuideArgs, job: &JobConfig) -> Result<()> {
    let input = single_input(a.input, job)?;
    let model = load_model(&required(a.guidance.model.clone().or(job.model.clone()), "--model")?, job)?;
    let opts = guide_options(&a.guidance, job)?;
    let map = guide_image(&model, &read_image(&input)?, &opts)?;
    write_text(a.out.or(job.out.clone()).as_deref(), &(map.to_json() + "\n"))
}

fn analyze(a: AnalyzeArgs, job: &JobConfig) -> Result<()> {
    let path_a = required(a.a.or_else(|| job.inputs.as_ref().and_then(|v| v.first().cloned())), "--a")?;
    let path_b = a.b.or_else(|| job.inputs.as_ref().and_then(|v| v.get(1).cloned()));
    let model = load_model(&required(a.model.or(job.model.clone()), "--model")?, job)?;
    let dir = required(a.out.or(job.out.clone()), "--out")?;
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let s = model.config().image_size;
    let trace = |p: &Path| -> Result<_> { Ok(model.forward(&preprocess(&read_image(p)?, s)?, Capture::all())?) };
    let write = |name: &str, text: String| -> Result<()> {
        let p = dir.join(name);
        fs::write(&p, text).with_context(|| format!("writing {}", p.display()))
    };

    let ta = trace(&path_a)?;
    let dist = layer_distances(&ta)?;
    write("distances.csv", dist.to_csv())?;
    write("stages.json", serde_json::to_string_pretty(&segment_stages(&dist.d_avg)?)?)?;
    let flows = ta
        .layers
        .iter()
        .enumerate()
        .map(|(i, l)| inflow_outflow(l.attention.as_ref().expect("attention captured"), i))
        .collect::<Result<Vec<_>, _>>()?;
    write("flow.json", serde_json::to_string_pretty(&flows)?)?;
    let mut pca = serde_json::Map::new();
    pca.insert("a".into(), serde_json::to_value(pca_project(&ta.final_tokens, a.components)?)?);
    if let Some(pb) = path_b {
        let tb = trace(&pb)?;
        write("distances_b.csv", layer_distances(&tb)?.to_csv())?;
        write("similarity.csv", layer_similarity(&ta, &tb)?.to_csv())?;
        pca.insert("b".into(), serde_json::to_value(pca_project(&tb.final_tokens, a.components)?)?);
    }
    write("pca.json", serde_json::to_string_pretty(&pca)?)?;
    Ok(())
}

fn rd_sweep(a: RdSweepArgs, job: &JobConfig) -> Result<()> {
    let inputs = if a.inputs.is_empty() { job.inputs.clone().unwrap_or_default() } else { a.inputs };
    if inputs.is_empty() {
        return Err(usage("missing --in"));
    }
    let presets = pick(a.presets, job.presets.clone(), (0..10).collect())
        .into_iter()
        .map(preset)
        .collect::<Result<Vec<_>>>()?;
    let g = gamma(pick(a.gamma, job.gamma, codec::DEFAULT_GAMMA))?;
    let source = GuidanceSource::new(a.guide, a.map.as_deref(), &a.guidance, job)?;
    let curves: Vec<Result<Vec<RdPoint>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = inputs
            .iter()
            .map(|p| {
                let (source, presets) = (&source, &presets);
                scope.spawn(move || -> Result<Vec<RdPoint>> {
                    let img = read_image(p)?;
                    let map = source.map_for(&img)?;
                    Ok(codec::rd_sweep(&img, presets, g, map.as_ref())?)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("sweep worker panicked")).collect()
    });
    let curves = curves.into_iter().collect::<Result<Vec<_>>>()?;
    let n = curves.len() as f64;
    let mean: Vec<RdPoint> = (0..presets.len())
        .map(|i| RdPoint {
            preset: curves[0][i].preset,
            bpp: curves.iter().map(|c| c[i].bpp).sum::<f64>() / n,
            quality: curves.iter().map(|c| c[i].quality).sum::<f64>() / n,
        })
        .collect();
    let mut buf = Vec::new();
    write_rd_csv(&mean, &mut buf)?;
    write_text(a.out.or(job.out.clone()).as_deref(), &String::from_utf8(buf)?)
}

fn train(a: TrainArgs, job: &JobConfig, seed: u64) -> Result<()> {
    let model = load_model(&required(a.model.or(job.model.clone()), "--model")?, job)?;
    let out = required(a.out.or(job.out.clone()), "--out")?;
    let s = model.config().image_size;
    let inputs = if a.inputs.is_empty() { job.inputs.clone().unwrap_or_default() } else { a.inputs };
    let images = match (a.synthetic.or(job.synthetic), inputs.is_empty()) {
        (Some(_), false) => return Err(usage("use either --in or --synthetic, not both")),
        (Some(n), true) => synth::dataset(n, s, s, seed),
        (None, false) => inputs.iter().map(|p| read_image(p)).collect::<Result<Vec<_>>>()?,
        (None, true) => return Err(usage("missing --in or --synthetic")),
    };
    let defaults = TrainConfig::default();
    let cfg = TrainConfig {
        steps: pick(a.steps, job.steps, defaults.steps),
        batch: pick(a.batch, job.batch, defaults.batch),
        lr: pick(a.lr, job.lr, defaults.lr),
        seed,
        preset: preset(pick(a.preset, job.preset, defaults.preset.index()))?,
        gamma: gamma(pick(None, job.gamma, codec::DEFAULT_GAMMA))?,
        ..defaults
    };
    let result = train_adapter(&images, &model, &cfg)?;
    write_container(&result.weights.to_container()?, &out).with_context(|| format!("writing {}", out.display()))?;
    let history = a.history.unwrap_or_else(|| PathBuf::from(format!("{}.history.csv", out.display())));
    fs::write(&history, history_csv(&result.history)).with_context(|| format!("writing {}", history.display()))?;
    let (first, last) = (result.history.first().expect("steps > 0"), result.history.last().expect("steps > 0"));
    println!("L_total {:.6} -> {:.6} over {} steps", first.l_total, last.l_total, cfg.steps);
    Ok(())
}

fn bd(a: BdRateArgs) -> Result<()> {
    let read = |p: &Path| -> Result<Vec<RdPoint>> {
        let f = fs::File::open(p).with_context(|| format!("reading {}", p.display()))?;
        read_rd_csv(f).with_context(|| format!("parsing {}", p.display()))
    };
    println!("{:+.2}%", bd_rate(&read(&a.anchor)?, &read(&a.test)?)?);
    Ok(())
}

fn toy_model(a: ToyModelArgs, job: &JobConfig, seed: u64) -> Result<()> {
    let out = required(a.out.or(job.out.clone()), "--out")?;
    let base = job.vit.clone().unwrap_or_else(ViTConfig::toy);
    let cfg = ViTConfig {
        image_size: a.image_size.unwrap_or(base.image_size),
        patch_size: a.patch_size.unwrap_or(base.patch_size),
        dim: a.dim.unwrap_or(base.dim),
        heads: a.heads.unwrap_or(base.heads),
        layers: a.depth.unwrap_or(base.layers),
        ..base
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let wc = random_weights(&cfg, seed, ToyOptions { uniform_attention: a.uniform_attention })?;
    write_container(&wc, &out).with_context(|| format!("writing {}", out.display()))?;
    Ok(())
}
