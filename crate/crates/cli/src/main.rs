use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use actrules_core::explain::{self, Explanation, MetricReport, Policy, TreeParams};
use actrules_core::miner::{self, ActivationRule, IterationLog, MinerParams};
use actrules_core::subgroup::numeric::{self, BeamParams};
use actrules_core::subgroup::{build_ego_dataset, mine_top_subgraph, GraphMinerParams};
use actrules_core::{ActivationMatrix, GcnModel, GraphDataset, MaskPayload};
use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use serde::Serialize;

/// Activation-rule mining over the hidden layers of a trained GCN.
///
/// Every flag can also be set through an environment variable named
/// ACTRULES_<FLAG>, e.g. ACTRULES_MIN_SI=5.
#[derive(Parser, Debug)]
#[command(name = "actrules", version)]
struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true, env = "ACTRULES_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the binary activation matrix of each layer and the model's decisions.
    Activations(ActivationsArgs),
    /// Mine activation rules per layer and decision class.
    Mine(MineArgs),
    /// Build explanation masks from rules and score them.
    Explain(ExplainArgs),
    /// Describe each rule by its best subgraph and numeric subgroups.
    Characterize(CharacterizeArgs),
    /// Fit a decision tree predicting the model from rule-support counts.
    Mimic(MimicArgs),
}

#[derive(Args, Debug)]
struct Inputs {
    /// Graph dataset JSON.
    #[arg(long, env = "ACTRULES_DATASET")]
    dataset: PathBuf,
    /// Model JSON.
    #[arg(long, env = "ACTRULES_MODEL")]
    model: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, env = "ACTRULES_OUT")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ActivationsArgs {
    #[command(flatten)]
    inputs: Inputs,
    /// Layers to export (default: all).
    #[arg(long, value_delimiter = ',', env = "ACTRULES_LAYERS")]
    layers: Vec<usize>,
}

#[derive(Args, Debug)]
struct MineArgs {
    #[command(flatten)]
    inputs: Inputs,
    /// Layers to mine (default: all).
    #[arg(long, value_delimiter = ',', env = "ACTRULES_LAYERS")]
    layers: Vec<usize>,
    /// Rules per layer and class.
    #[arg(long, default_value_t = 10, env = "ACTRULES_NB_PATT")]
    nb_patt: usize,
    /// Only rules scoring strictly above this are kept.
    #[arg(long, default_value_t = 10.0, env = "ACTRULES_MIN_SI")]
    min_si: f64,
    #[arg(long, default_value_t = 0.6, env = "ACTRULES_ALPHA")]
    alpha: f64,
    #[arg(long, default_value_t = 1.0, env = "ACTRULES_BETA")]
    beta: f64,
    /// Search nodes visited per extracted rule before giving up.
    #[arg(long, default_value_t = 100_000_000, env = "ACTRULES_MAX_VISITS")]
    max_visits: u64,
}

#[derive(Args, Debug)]
struct ExplainArgs {
    #[command(flatten)]
    inputs: Inputs,
    /// Rules JSON from `mine`.
    #[arg(long, env = "ACTRULES_RULES", required_unless_present = "external_masks")]
    rules: Option<PathBuf>,
    /// Mask policies: node, ego, decay, topk:K.
    #[arg(long, value_delimiter = ',', default_value = "node,ego,decay", env = "ACTRULES_POLICIES")]
    policies: Vec<Policy>,
    /// Extra top-k policies, one per value.
    #[arg(long, value_delimiter = ',', env = "ACTRULES_K")]
    k: Vec<usize>,
    /// Score masks from another explainer instead: JSON mapping graph ids
    /// to `[u, v]` or `[u, v, w]` edge lists.
    #[arg(long, env = "ACTRULES_EXTERNAL_MASKS")]
    external_masks: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CharacterizeArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[arg(long, env = "ACTRULES_RULES")]
    rules: PathBuf,
    #[arg(long, default_value_t = 10, env = "ACTRULES_MIN_SUP")]
    min_sup: usize,
    #[arg(long, default_value_t = 6, env = "ACTRULES_MAX_EDGES")]
    max_edges: usize,
    /// Also report every subgraph with WRAcc at least this value.
    #[arg(long, env = "ACTRULES_FLOOR")]
    floor: Option<f64>,
    #[arg(long, default_value_t = 50, env = "ACTRULES_BEAM_WIDTH")]
    beam_width: usize,
    #[arg(long, default_value_t = 4, env = "ACTRULES_BEAM_DEPTH")]
    beam_depth: usize,
    #[arg(long, default_value_t = 5, env = "ACTRULES_BINS")]
    bins: usize,
    /// Numeric patterns kept per rule.
    #[arg(long, default_value_t = 10, env = "ACTRULES_TOP")]
    top: usize,
}

#[derive(Args, Debug)]
struct MimicArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[arg(long, env = "ACTRULES_RULES")]
    rules: PathBuf,
    #[arg(long, default_value_t = 0.8, env = "ACTRULES_TRAIN_FRACTION")]
    train_fraction: f64,
    #[arg(long, default_value_t = 0, env = "ACTRULES_SEED")]
    seed: u64,
    #[arg(long, default_value_t = 8, env = "ACTRULES_MAX_DEPTH")]
    max_depth: usize,
    #[arg(long, default_value_t = 5, env = "ACTRULES_MIN_LEAF")]
    min_leaf: usize,
}

/// Bad invocation, as opposed to a failure while running.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn require_file(path: &Path, what: &str) -> Result<()> {
    if !path.is_file() {
        return Err(usage(format!("{what} {} does not exist", path.display())));
    }
    Ok(())
}

struct Loaded {
    ds: GraphDataset,
    model: GcnModel,
    out: PathBuf,
}

impl Inputs {
    fn load(&self) -> Result<Loaded> {
        require_file(&self.dataset, "dataset")?;
        require_file(&self.model, "model")?;
        let ds = GraphDataset::load(&self.dataset)?;
        let model = GcnModel::load(&self.model)?;
        if model.label_count != ds.label_count() {
            return Err(usage(format!(
                "model expects {} node labels, dataset has {}",
                model.label_count,
                ds.label_count()
            )));
        }
        fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        Ok(Loaded {
            ds,
            model,
            out: self.out.clone(),
        })
    }
}

fn select_layers(requested: &[usize], model: &GcnModel) -> Result<Vec<usize>> {
    if requested.is_empty() {
        return Ok((1..=model.layer_count).collect());
    }
    let mut layers = requested.to_vec();
    layers.sort_unstable();
    layers.dedup();
    if let Some(l) = layers.iter().find(|&&l| l == 0 || l > model.layer_count) {
        return Err(usage(format!("layer {l} out of range 1..={}", model.layer_count)));
    }
    Ok(layers)
}

fn load_rules(path: &Path) -> Result<Vec<ActivationRule>> {
    require_file(path, "rules file")?;
    let rules = miner::load_rules(path)?;
    if rules.is_empty() {
        return Err(usage(format!("rules file {} holds no rules", path.display())));
    }
    Ok(rules)
}

fn write(path: PathBuf, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    info!("wrote {}", path.display());
    Ok(())
}

fn write_json(path: PathBuf, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write(path, text)
}

fn activations(args: &ActivationsArgs) -> Result<()> {
    let Loaded { ds, model, out } = args.inputs.load()?;
    let layers = select_layers(&args.layers, &model)?;
    let inferences = model.infer_dataset(&ds)?;
    let acts = model.activation_matrices(&ds)?;
    for l in layers {
        write(out.join(format!("activations_layer{l}.csv")), acts[l - 1].to_csv())?;
    }
    let mut csv = String::from("graph,decision,p0,p1\n");
    for (g, inf) in ds.graphs.iter().zip(&inferences) {
        writeln!(csv, "{},{},{},{}", g.id(), inf.decision, inf.probabilities[0], inf.probabilities[1])?;
    }
    write(out.join("decisions.csv"), csv)
}

fn mine(args: &MineArgs) -> Result<()> {
    let Loaded { ds, model, out } = args.inputs.load()?;
    let layers = select_layers(&args.layers, &model)?;
    let params = MinerParams {
        alpha: args.alpha,
        beta: args.beta,
        min_si: args.min_si,
        nb_patt: args.nb_patt,
        max_visits: args.max_visits,
    };
    params.validate().map_err(|e| usage(e.to_string()))?;
    let acts = model.activation_matrices(&ds)?;
    let mut rules: Vec<ActivationRule> = Vec::new();
    let mut log: Vec<IterationLog> = Vec::new();
    for l in layers {
        for class in [0, 1] {
            let run = miner::mine_all(&acts[l - 1], &params, class)?;
            info!("layer {l} class {class}: {} rules", run.rules.len());
            rules.extend(run.rules);
            log.extend(run.log);
        }
    }
    miner::save_rules(out.join("rules.json"), &rules)?;
    write_json(out.join("mine_log.json"), &log)
}

fn policy_slug(p: Policy) -> String {
    p.to_string().replace(':', "")
}

/// Edge-based masks in the external-mask layout; graphs with a node mask or
/// no mask are left out.
fn masks_json(ex: &[Explanation]) -> serde_json::Value {
    let mut map = serde_json::Map::new();
    for e in ex {
        let edges = match &e.mask.payload {
            MaskPayload::Edges(s) if !s.is_empty() => s.iter().map(|&(u, v)| serde_json::json!([u, v])).collect(),
            MaskPayload::Weighted(m) if !m.is_empty() => {
                m.iter().map(|(&(u, v), &w)| serde_json::json!([u, v, w])).collect()
            }
            _ => continue,
        };
        map.insert(e.graph_id.clone(), serde_json::Value::Array(edges));
    }
    serde_json::Value::Object(map)
}

fn report_rows(model: &GcnModel, ds: &GraphDataset, ex: &[Explanation], out: &Path, slug: &str) -> Result<MetricReport> {
    let (report, rows) = explain::evaluate(model, ds, ex)?;
    write_json(out.join(format!("metrics_{slug}.json")), &report)?;
    write(out.join(format!("metrics_{slug}.csv")), MetricReport::rows_csv(&rows))?;
    Ok(report)
}

fn explain_cmd(args: &ExplainArgs) -> Result<()> {
    let Loaded { ds, model, out } = args.inputs.load()?;
    if let Some(path) = &args.external_masks {
        require_file(path, "mask file")?;
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let ex = explain::parse_external_masks(&text, &ds)?;
        report_rows(&model, &ds, &ex, &out, "external")?;
        return Ok(());
    }
    let rules = load_rules(args.rules.as_deref().expect("required by clap"))?;
    let mut policies = args.policies.clone();
    policies.extend(args.k.iter().map(|&k| Policy::TopK(k)));
    if policies.is_empty() {
        return Err(usage("no mask policy selected"));
    }
    let acts = model.activation_matrices(&ds)?;
    for policy in policies {
        let ex = explain::explain_dataset(&model, &ds, &rules, &acts, policy)?;
        let slug = policy_slug(policy);
        let report = report_rows(&model, &ds, &ex, &out, &slug)?;
        info!("{policy}: Fid_prob {:.4}, Sparsity {:.4}", report.fid_prob, report.sparsity);
        if matches!(policy, Policy::Decay | Policy::TopK(_)) {
            write_json(out.join(format!("masks_{slug}.json")), &masks_json(&ex))?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct CharacterizeSummary {
    rule: usize,
    layer: usize,
    class: u8,
    components: Vec<usize>,
    instances: usize,
    positives: usize,
    subgraph_wracc: Option<f64>,
    numeric: Vec<String>,
}

fn characterize(args: &CharacterizeArgs) -> Result<()> {
    let Loaded { ds, model, out } = args.inputs.load()?;
    let rules = load_rules(&args.rules)?;
    let graph_params = GraphMinerParams {
        min_sup: args.min_sup,
        max_edges: args.max_edges,
        prune: true,
        floor: args.floor,
    };
    let beam = BeamParams {
        beam_width: args.beam_width,
        max_depth: args.beam_depth,
        bins: args.bins,
        top: args.top,
    };
    let acts: Vec<ActivationMatrix> = model.activation_matrices(&ds)?;
    let mut summary = Vec::new();
    for (i, rule) in rules.iter().enumerate() {
        model.check_layer(rule.layer)?;
        let act = &acts[rule.layer - 1];
        let d = build_ego_dataset(rule, &ds, act)?;
        let positives = d.positives();
        if positives == 0 {
            warn!("rule {i} has no activating node in this dataset; skipped");
            continue;
        }
        let result = mine_top_subgraph(&d, &graph_params)?;
        let name = format!("rule{i}");
        let mut subgraph = serde_json::json!({
            "rule": i,
            "best": result.best.as_ref().map(|p| p.to_json(&d.label_names)),
            "evaluated": result.evaluated,
        });
        if args.floor.is_some() {
            subgraph["above_floor"] = result.above_floor.iter().map(|p| p.to_json(&d.label_names)).collect();
        }
        write_json(out.join(format!("{name}_subgraph.json")), &subgraph)?;
        if let Some(best) = &result.best {
            write(out.join(format!("{name}_subgraph.dot")), best.to_dot(&d.label_names, &name))?;
        }

        let table = numeric::propositionalize(&ds, rule, act)?;
        let patterns = numeric::mine_numeric_subgroups(&table, &beam)?;
        let mut text = String::new();
        for p in &patterns {
            writeln!(
                text,
                "{}\tWRAcc={:.4}\tsupport={}\tpositive={}",
                p.display(&table.columns),
                p.wracc,
                p.support,
                p.support_pos
            )?;
        }
        let described: Vec<serde_json::Value> = patterns
            .iter()
            .map(|p| {
                serde_json::json!({
                    "pattern": p.display(&table.columns),
                    "conditions": p.conditions.iter().map(|c| serde_json::json!({
                        "feature": table.columns[c.feature],
                        "bound": c.bound,
                    })).collect::<Vec<_>>(),
                    "wracc": p.wracc,
                    "support": p.support,
                    "support_pos": p.support_pos,
                })
            })
            .collect();
        write_json(out.join(format!("{name}_numeric.json")), &described)?;
        write(out.join(format!("{name}_numeric.txt")), text)?;
        summary.push(CharacterizeSummary {
            rule: i,
            layer: rule.layer,
            class: rule.class,
            components: rule.components.clone(),
            instances: d.len(),
            positives,
            subgraph_wracc: result.best.map(|p| p.wracc),
            numeric: patterns.iter().map(|p| p.display(&table.columns)).collect(),
        });
    }
    write_json(out.join("characterize.json"), &summary)
}

fn mimic(args: &MimicArgs) -> Result<()> {
    let Loaded { ds, model, out } = args.inputs.load()?;
    let rules = load_rules(&args.rules)?;
    for rule in &rules {
        model.check_layer(rule.layer)?;
    }
    let acts = model.activation_matrices(&ds)?;
    let params = TreeParams {
        max_depth: args.max_depth,
        min_leaf: args.min_leaf,
    };
    let result = explain::mimic_tree(&rules, &acts, args.train_fraction, args.seed, params)
        .map_err(|e| usage(e.to_string()))?;
    info!(
        "mimic tree: train accuracy {:.4}, test accuracy {:?}",
        result.train_accuracy, result.test_accuracy
    );
    write_json(out.join("mimic.json"), &result)
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match &cli.command {
        Command::Activations(a) => activations(a),
        Command::Mine(a) => mine(a),
        Command::Explain(a) => explain_cmd(a),
        Command::Characterize(a) => characterize(a),
        Command::Mimic(a) => mimic(a),
    }
}

fn fail(kind: &str, message: String, code: u8) -> ExitCode {
    eprintln!("{}", serde_json::json!({ "error": kind, "message": message }));
    ExitCode::from(code)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("usage", e.render().to_string().trim().to_string(), 2),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<UsageError>() => fail("usage", e.to_string(), 2),
        Err(e) => fail("runtime", format!("{e:#}"), 1),
    }
}
