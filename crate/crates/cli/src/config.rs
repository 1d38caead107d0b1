//! Layered configuration: built-in defaults, then an optional JSON file, then
//! presets, then individual flags. Unknown keys in a config file are
//! rejected. A manifest written by a previous run is accepted wherever a
//! config file is, so any run can be replayed exactly.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use qisac::protocol::{ChannelModel, ChannelVariant, ProtocolConfig};
use qisac::training::{SampleMode, TrainConfig};

/// Every knob of a run, with all defaults materialized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResolvedConfig {
    /// Qudit dimensions to sweep (usually one entry).
    pub d_list: Vec<usize>,
    /// Alphabet sizes to sweep; `None` means every value 1..=d.
    pub d_prime_list: Option<Vec<usize>>,
    /// Channel grid points.
    pub k: usize,
    pub channel_variant: String,
    pub ansatz_depth: usize,
    pub hidden: usize,
    pub batch: usize,
    pub outer_iters: usize,
    pub decoder_steps: usize,
    pub estimator_steps: usize,
    pub ansatz_steps: usize,
    pub lr_decoder: f64,
    pub lr_estimator: f64,
    pub lr_ansatz: f64,
    pub w_x: f64,
    pub w_m: f64,
    pub w_acc: f64,
    pub w_succ: f64,
    pub sample_mode: String,
    pub shots: usize,
    /// Circuit angles start uniform in ±this value.
    pub mu_init_scale: f64,
    pub seeds: Vec<u64>,
    /// Sweep worker threads; 0 means one per available core.
    pub jobs: usize,
    pub out: String,
    /// Run only the first sweep point, trained variant, first seed.
    pub single: bool,
}

impl Default for ResolvedConfig {
    fn default() -> Self {
        Self {
            d_list: vec![8],
            d_prime_list: None,
            k: 4,
            channel_variant: "literal-unitary".into(),
            ansatz_depth: 2,
            hidden: 1024,
            batch: 512,
            outer_iters: 10,
            decoder_steps: 100,
            estimator_steps: 100,
            ansatz_steps: 100,
            lr_decoder: 1e-3,
            lr_estimator: 1e-3,
            lr_ansatz: 1e-2,
            w_x: 1.0,
            w_m: 1.0,
            w_acc: 1.0,
            w_succ: 1.0,
            sample_mode: "exact".into(),
            shots: 1,
            mu_init_scale: 0.1,
            seeds: vec![0],
            jobs: 0,
            out: "results".into(),
            single: false,
        }
    }
}

/// A config file: any subset of the keys.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialConfig {
    pub d: Option<usize>,
    pub d_list: Option<Vec<usize>>,
    pub d_prime: Option<usize>,
    pub d_prime_list: Option<Vec<usize>>,
    pub k: Option<usize>,
    pub channel_variant: Option<String>,
    pub ansatz_depth: Option<usize>,
    pub hidden: Option<usize>,
    pub batch: Option<usize>,
    pub outer_iters: Option<usize>,
    pub decoder_steps: Option<usize>,
    pub estimator_steps: Option<usize>,
    pub ansatz_steps: Option<usize>,
    pub lr_decoder: Option<f64>,
    pub lr_estimator: Option<f64>,
    pub lr_ansatz: Option<f64>,
    pub w_x: Option<f64>,
    pub w_m: Option<f64>,
    pub w_acc: Option<f64>,
    pub w_succ: Option<f64>,
    pub sample_mode: Option<String>,
    pub shots: Option<usize>,
    pub mu_init_scale: Option<f64>,
    pub seeds: Option<Vec<u64>>,
    pub jobs: Option<usize>,
    pub out: Option<String>,
    pub single: Option<bool>,
}

impl PartialConfig {
    fn apply(&self, cfg: &mut ResolvedConfig) -> anyhow::Result<()> {
        if self.d.is_some() && self.d_list.is_some() {
            bail!("config: give either `d` or `d_list`, not both");
        }
        if let Some(d) = self.d {
            cfg.d_list = vec![d];
        }
        if let Some(list) = &self.d_list {
            cfg.d_list = list.clone();
        }
        if self.d_prime.is_some() && self.d_prime_list.is_some() {
            bail!("config: give either `d_prime` or `d_prime_list`, not both");
        }
        if let Some(dp) = self.d_prime {
            cfg.d_prime_list = Some(vec![dp]);
        }
        if let Some(list) = &self.d_prime_list {
            cfg.d_prime_list = Some(list.clone());
        }
        macro_rules! take {
            ($field:ident) => {
                if let Some(v) = &self.$field {
                    cfg.$field = v.clone();
                }
            };
        }
        take!(k);
        take!(channel_variant);
        take!(ansatz_depth);
        take!(hidden);
        take!(batch);
        take!(outer_iters);
        take!(decoder_steps);
        take!(estimator_steps);
        take!(ansatz_steps);
        take!(lr_decoder);
        take!(lr_estimator);
        take!(lr_ansatz);
        take!(w_x);
        take!(w_m);
        take!(w_acc);
        take!(w_succ);
        take!(sample_mode);
        take!(shots);
        take!(mu_init_scale);
        take!(seeds);
        take!(jobs);
        take!(out);
        take!(single);
        Ok(())
    }
}

/// Flags of the `run` subcommand; every config key has a flag of the same
/// name, plus the presets.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct RunArgs {
    /// Configuration file: flat JSON keys, or a manifest from a previous run.
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Qudit dimension.
    #[arg(long)]
    pub d: Option<usize>,

    /// Single alphabet size (shorthand for a one-element list).
    #[arg(long)]
    pub d_prime: Option<usize>,

    /// Comma-separated alphabet sizes to sweep (default: every value 1..=d).
    #[arg(long, value_delimiter = ',')]
    pub d_prime_list: Option<Vec<usize>>,

    /// Number of channel grid points.
    #[arg(long)]
    pub k: Option<usize>,

    /// Channel phase profile: literal-unitary | linear | constant.
    #[arg(long)]
    pub channel_variant: Option<String>,

    /// Layers of the trainable decoding circuit.
    #[arg(long)]
    pub ansatz_depth: Option<usize>,

    /// Hidden width of decoder and estimator networks.
    #[arg(long)]
    pub hidden: Option<usize>,

    /// Transmissions per training batch.
    #[arg(long)]
    pub batch: Option<usize>,

    /// Outer training iterations.
    #[arg(long)]
    pub outer_iters: Option<usize>,

    /// Decoder optimizer steps per outer iteration.
    #[arg(long)]
    pub decoder_steps: Option<usize>,

    /// Estimator optimizer steps per outer iteration.
    #[arg(long)]
    pub estimator_steps: Option<usize>,

    /// Circuit-angle ascent steps per outer iteration.
    #[arg(long)]
    pub ansatz_steps: Option<usize>,

    #[arg(long)]
    pub lr_decoder: Option<f64>,

    #[arg(long)]
    pub lr_estimator: Option<f64>,

    #[arg(long)]
    pub lr_ansatz: Option<f64>,

    /// Weight of the sensing term in the circuit objective.
    #[arg(long)]
    pub w_x: Option<f64>,

    /// Weight of the communication term in the circuit objective.
    #[arg(long)]
    pub w_m: Option<f64>,

    /// Weight of accuracy in the reported scalar objective.
    #[arg(long)]
    pub w_acc: Option<f64>,

    /// Weight of success in the reported scalar objective.
    #[arg(long)]
    pub w_succ: Option<f64>,

    /// Batch expansion: exact | shots.
    #[arg(long)]
    pub sample_mode: Option<String>,

    /// Outcome draws per transmission in shots mode.
    #[arg(long)]
    pub shots: Option<usize>,

    /// Circuit angles start uniform in ±this value (0.1 keeps the plain
    /// decoding structure nearly intact; larger values explore more).
    #[arg(long)]
    pub mu_init_scale: Option<f64>,

    /// Comma-separated run seeds.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,

    /// Sweep worker threads (0 = one per core).
    #[arg(long)]
    pub jobs: Option<usize>,

    /// Output directory for results.csv, metrics.log, and manifest.json.
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Fast preset: d=4, hidden 128, batch 128, 3 outer iterations.
    #[arg(long)]
    pub fast: bool,

    /// Full reproduction preset: d in {8, 10}, hidden 1024, batch 512,
    /// 10 outer iterations. Slow.
    #[arg(long)]
    pub paper: bool,

    /// Run only the first sweep point (trained measurement, first seed).
    #[arg(long)]
    pub single: bool,
}

/// Reads a config file; a JSON object carrying a `config` key is treated as a
/// manifest and its resolved config is extracted.
fn apply_file(path: &Path, cfg: &mut ResolvedConfig) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config file {}", path.display()))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", path.display()))?;
    if let Some(inner) = value.get("config") {
        *cfg = serde_json::from_value(inner.clone())
            .with_context(|| format!("manifest config in {}", path.display()))?;
    } else {
        let partial: PartialConfig = serde_json::from_value(value)
            .with_context(|| format!("config keys in {}", path.display()))?;
        partial.apply(cfg)?;
    }
    Ok(())
}

/// Defaults ← config file ← presets ← individual flags.
pub fn resolve(args: &RunArgs) -> anyhow::Result<ResolvedConfig> {
    let mut cfg = ResolvedConfig::default();
    if let Some(path) = &args.config {
        apply_file(path, &mut cfg)?;
    }
    if args.fast && args.paper {
        bail!("presets --fast and --paper are mutually exclusive");
    }
    if args.fast {
        cfg.d_list = vec![4];
        cfg.hidden = 128;
        cfg.batch = 128;
        cfg.outer_iters = 3;
    }
    if args.paper {
        cfg.d_list = vec![8, 10];
        cfg.hidden = 1024;
        cfg.batch = 512;
        cfg.outer_iters = 10;
        cfg.decoder_steps = 100;
        cfg.estimator_steps = 100;
        cfg.ansatz_steps = 100;
        cfg.lr_decoder = 1e-3;
        cfg.lr_estimator = 1e-3;
        cfg.lr_ansatz = 1e-2;
        cfg.k = 4;
    }

    let flags = PartialConfig {
        d: args.d,
        d_list: None,
        d_prime: args.d_prime,
        d_prime_list: args.d_prime_list.clone(),
        k: args.k,
        channel_variant: args.channel_variant.clone(),
        ansatz_depth: args.ansatz_depth,
        hidden: args.hidden,
        batch: args.batch,
        outer_iters: args.outer_iters,
        decoder_steps: args.decoder_steps,
        estimator_steps: args.estimator_steps,
        ansatz_steps: args.ansatz_steps,
        lr_decoder: args.lr_decoder,
        lr_estimator: args.lr_estimator,
        lr_ansatz: args.lr_ansatz,
        w_x: args.w_x,
        w_m: args.w_m,
        w_acc: args.w_acc,
        w_succ: args.w_succ,
        sample_mode: args.sample_mode.clone(),
        shots: args.shots,
        mu_init_scale: args.mu_init_scale,
        seeds: args.seeds.clone(),
        jobs: args.jobs,
        out: args.out.as_ref().map(|p| p.display().to_string()),
        single: if args.single { Some(true) } else { None },
    };
    flags.apply(&mut cfg)?;
    validate(&cfg)?;
    Ok(cfg)
}

/// Constraint checks; each message names the offending key.
pub fn validate(cfg: &ResolvedConfig) -> anyhow::Result<()> {
    if cfg.d_list.is_empty() {
        bail!("d: at least one dimension required");
    }
    for &d in &cfg.d_list {
        if d < 2 {
            bail!("d: dimension must be at least 2, got {d}");
        }
        if let Some(list) = &cfg.d_prime_list {
            if list.is_empty() {
                bail!("d_prime_list: must not be empty");
            }
            for &dp in list {
                if dp < 1 || dp > d {
                    bail!("d_prime_list: value {dp} outside 1..={d} (d = {d})");
                }
            }
        }
    }
    if cfg.k == 0 {
        bail!("k: at least one grid point required");
    }
    cfg.channel_variant
        .parse::<ChannelVariant>()
        .map_err(|e| anyhow::anyhow!("channel_variant: {e}"))?;
    parse_sample_mode(&cfg.sample_mode)?;
    if cfg.sample_mode == "shots" && cfg.shots == 0 {
        bail!("shots: must be positive in shots mode");
    }
    if cfg.seeds.is_empty() {
        bail!("seeds: at least one seed required");
    }
    if cfg.lr_decoder <= 0.0 {
        bail!("lr_decoder: must be positive");
    }
    if cfg.lr_estimator <= 0.0 {
        bail!("lr_estimator: must be positive");
    }
    if cfg.lr_ansatz <= 0.0 {
        bail!("lr_ansatz: must be positive");
    }
    for (key, w) in [
        ("w_x", cfg.w_x),
        ("w_m", cfg.w_m),
        ("w_acc", cfg.w_acc),
        ("w_succ", cfg.w_succ),
    ] {
        if w < 0.0 {
            bail!("{key}: must be non-negative");
        }
    }
    if cfg.hidden == 0 {
        bail!("hidden: width must be positive");
    }
    if cfg.mu_init_scale.is_nan() || cfg.mu_init_scale < 0.0 {
        bail!("mu_init_scale: must be non-negative");
    }
    Ok(())
}

pub fn parse_sample_mode(s: &str) -> anyhow::Result<SampleMode> {
    match s {
        "exact" => Ok(SampleMode::Exact),
        "shots" => Ok(SampleMode::Shots),
        other => bail!("sample_mode: unknown value `{other}` (use exact or shots)"),
    }
}

/// Protocol settings for one dimension of the sweep.
pub fn protocol_for(cfg: &ResolvedConfig, d: usize) -> anyhow::Result<ProtocolConfig> {
    let variant: ChannelVariant = cfg
        .channel_variant
        .parse()
        .map_err(|e| anyhow::anyhow!("channel_variant: {e}"))?;
    let channel = ChannelModel::uniform_grid(d, cfg.k, variant)?;
    Ok(ProtocolConfig::new(d, d, channel, cfg.ansatz_depth)?)
}

/// Training settings shared by every job.
pub fn train_for(cfg: &ResolvedConfig) -> anyhow::Result<TrainConfig> {
    let train = TrainConfig {
        outer_iters: cfg.outer_iters,
        decoder_steps: cfg.decoder_steps,
        estimator_steps: cfg.estimator_steps,
        ansatz_steps: cfg.ansatz_steps,
        lr_decoder: cfg.lr_decoder,
        lr_estimator: cfg.lr_estimator,
        lr_ansatz: cfg.lr_ansatz,
        w_x: cfg.w_x,
        w_m: cfg.w_m,
        w_acc: cfg.w_acc,
        w_succ: cfg.w_succ,
        batch_size: cfg.batch,
        sample_mode: parse_sample_mode(&cfg.sample_mode)?,
        shots: cfg.shots,
        hidden_width: cfg.hidden,
        mu_init_scale: cfg.mu_init_scale,
        ..TrainConfig::default()
    };
    train.validate()?;
    Ok(train)
}

/// Alphabet sizes for one dimension: the explicit list, or all of 1..=d.
pub fn d_primes_for(cfg: &ResolvedConfig, d: usize) -> Vec<usize> {
    cfg.d_prime_list
        .clone()
        .unwrap_or_else(|| (1..=d).collect())
}
