//! Command-line front end: `gen-data`, `train`, `eval`, `gradcheck`, `curve`.
//!
//! Every command writes a JSON echo of its fully resolved configuration next
//! to its outputs. Exit codes: 0 success, 1 usage, 2 runtime or data error,
//! 3 numerical failure.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::data::{export_text, load_dataset, save_dataset, synthesize_modality, Modality, OnsetRange, SynthSpec};
use crate::diffcore::AdversarialForm;
use crate::error::{Error, Result};
use crate::eval::{evaluate, evaluate_fused, load_report, write_report};
use crate::exec::Exec;
use crate::gradsuite::{run_grad_suite, GradSuiteConfig};
use crate::model::{load_checkpoint, save_checkpoint, ModelBundle, ModelDims, Variant};
use crate::train::{stage1_pretrain, stage2_adversarial, TrainConfig, TrainLog};

/// Environment variable naming the default report directory.
pub const REPORT_DIR_ENV: &str = "EARLYPRED_REPORT_DIR";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "earlypred", version, about = "Early sequence prediction with adversarially enhanced partial features")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Synthesize train/test datasets for both modalities.
    GenData(GenDataArgs),
    /// Pre-train on complete sequences, then train adversarially.
    Train(TrainArgs),
    /// Evaluate a checkpoint at every observation ratio.
    Eval(EvalArgs),
    /// Finite-difference check of every backward pass.
    Gradcheck(GradcheckArgs),
    /// Re-emit the accuracy curve from a saved report.
    Curve(CurveArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModalityArg {
    A,
    B,
    Both,
}

#[derive(Args, Debug, Serialize)]
pub struct GenDataArgs {
    #[arg(long, default_value = "data")]
    pub out_dir: PathBuf,
    /// Number of classes.
    #[arg(long, default_value_t = SynthSpec::default().classes)]
    pub c: usize,
    /// Segments per sequence.
    #[arg(long, default_value_t = SynthSpec::default().segments)]
    pub k: usize,
    #[arg(long, default_value_t = SynthSpec::default().d_raw)]
    pub d_raw: usize,
    #[arg(long, default_value_t = SynthSpec::default().n_train)]
    pub n_train: usize,
    #[arg(long, default_value_t = SynthSpec::default().n_test)]
    pub n_test: usize,
    /// Ambiguity of the prefix before the onset, in [0, 1].
    #[arg(long, default_value_t = SynthSpec::default().ambiguity)]
    pub alpha: f64,
    #[arg(long, default_value_t = SynthSpec::default().onset.min)]
    pub onset_min: usize,
    #[arg(long, default_value_t = SynthSpec::default().onset.max)]
    pub onset_max: usize,
    #[arg(long, default_value_t = SynthSpec::default().noise)]
    pub noise: f64,
    #[arg(long, default_value_t = SynthSpec::default().nuisance)]
    pub nuisance: f64,
    /// Recording subjects per split sharing an offset (0: one per sequence).
    #[arg(long, default_value_t = SynthSpec::default().subjects)]
    pub subjects: usize,
    /// Class-independent per-segment variation before the onset.
    #[arg(long, default_value_t = SynthSpec::default().jitter)]
    pub jitter: f64,
    #[arg(long, default_value_t = SynthSpec::default().ramp)]
    pub ramp: usize,
    /// Share of each ambiguous prefix prototype drawn from the class span.
    #[arg(long, default_value_t = SynthSpec::default().mimicry)]
    pub mimicry: f64,
    #[arg(long, default_value_t = SynthSpec::default().seed)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = ModalityArg::Both)]
    pub modality: ModalityArg,
    /// Also write a comma-separated text dump of every file.
    #[arg(long)]
    pub text: bool,
}

impl GenDataArgs {
    pub fn spec(&self) -> SynthSpec {
        SynthSpec {
            classes: self.c,
            segments: self.k,
            d_raw: self.d_raw,
            n_train: self.n_train,
            n_test: self.n_test,
            ambiguity: self.alpha,
            onset: OnsetRange {
                min: self.onset_min,
                max: self.onset_max,
            },
            noise: self.noise,
            nuisance: self.nuisance,
            subjects: self.subjects,
            jitter: self.jitter,
            ramp: self.ramp,
            mimicry: self.mimicry,
            seed: self.seed,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
pub enum FormArg {
    NonSaturating,
    Saturating,
}

#[derive(Args, Debug, Serialize)]
pub struct TrainArgs {
    /// Training dataset file.
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long, default_value = "run")]
    pub out_dir: PathBuf,
    #[arg(long, default_value = "full")]
    pub variant: Variant,
    /// Continue from this checkpoint instead of a fresh initialisation.
    #[arg(long)]
    pub from: Option<PathBuf>,
    /// Stop after supervised pre-training.
    #[arg(long, conflicts_with = "skip_stage1")]
    pub stage1_only: bool,
    /// Go straight to adversarial training.
    #[arg(long)]
    pub skip_stage1: bool,
    #[arg(long, default_value_t = TrainConfig::default().seed)]
    pub seed: u64,
    #[arg(long, default_value_t = TrainConfig::default().batch)]
    pub batch: usize,
    /// Weight of the classification term in the generator objective.
    #[arg(long, default_value_t = TrainConfig::default().stage2.lambda)]
    pub lambda: f64,
    /// Discriminator steps per generator step.
    #[arg(long, default_value_t = TrainConfig::default().stage2.d_steps)]
    pub d_steps: usize,
    #[arg(long, default_value_t = TrainConfig::default().stage1.lr)]
    pub lr1: f64,
    #[arg(long, default_value_t = TrainConfig::default().stage1.momentum)]
    pub momentum: f64,
    #[arg(long, default_value_t = TrainConfig::default().stage1.weight_decay)]
    pub wd1: f64,
    #[arg(long, default_value_t = TrainConfig::default().stage1.lr_decay)]
    pub lr_decay: f64,
    #[arg(long, default_value_t = TrainConfig::default().stage1.decay_every)]
    pub decay_every: usize,
    #[arg(long, default_value_t = TrainConfig::default().stage1.iterations)]
    pub iters1: usize,
    #[arg(long, default_value_t = TrainConfig::default().stage2.lr)]
    pub lr2: f64,
    #[arg(long, default_value_t = TrainConfig::default().stage2.weight_decay)]
    pub wd2: f64,
    #[arg(long, default_value_t = TrainConfig::default().stage2.iterations)]
    pub iters2: usize,
    #[arg(long, value_enum, default_value_t = FormArg::NonSaturating)]
    pub adversarial_form: FormArg,
    /// Let stage 2 fine-tune the segment encoder.
    #[arg(long)]
    pub unfreeze_encoder: bool,
    /// Keep the perceptual head fixed during stage 2.
    #[arg(long)]
    pub freeze_perceptual: bool,
    /// Do not use complete sequences as fakes in stage 2.
    #[arg(long)]
    pub exclude_complete_views: bool,
    #[arg(long, default_value_t = TrainConfig::default().log_every)]
    pub log_every: usize,
    #[arg(long, default_value_t = ModelDims::default().d_enc)]
    pub d_enc: usize,
    #[arg(long, default_value_t = ModelDims::default().d_feat)]
    pub d_feat: usize,
    #[arg(long, default_value_t = ModelDims::default().d_hidden)]
    pub d_hidden: usize,
    #[arg(long, default_value_t = ModelDims::default().head_widths[0])]
    pub head1: usize,
    #[arg(long, default_value_t = ModelDims::default().head_widths[1])]
    pub head2: usize,
}

impl TrainArgs {
    pub fn config(&self) -> TrainConfig {
        let mut cfg = TrainConfig {
            batch: self.batch,
            seed: self.seed,
            log_every: self.log_every,
            ..TrainConfig::default()
        };
        let s1 = &mut cfg.stage1;
        s1.lr = self.lr1;
        s1.momentum = self.momentum;
        s1.weight_decay = self.wd1;
        s1.lr_decay = self.lr_decay;
        s1.decay_every = self.decay_every;
        s1.iterations = self.iters1;
        let s2 = &mut cfg.stage2;
        s2.lr = self.lr2;
        s2.weight_decay = self.wd2;
        s2.lambda = self.lambda;
        s2.d_steps = self.d_steps;
        s2.iterations = self.iters2;
        s2.freeze_encoder = !self.unfreeze_encoder;
        s2.freeze_perceptual = self.freeze_perceptual;
        s2.include_complete_views = !self.exclude_complete_views;
        s2.adversarial_form = match self.adversarial_form {
            FormArg::NonSaturating => AdversarialForm::NonSaturating,
            FormArg::Saturating => AdversarialForm::Saturating,
        };
        cfg
    }
}

#[derive(Args, Debug, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    /// Second checkpoint (other modality) for late fusion.
    #[arg(long, requires = "fuse_test")]
    pub fuse: Option<PathBuf>,
    /// Test set of the second modality, paired by sequence id.
    #[arg(long, requires = "fuse")]
    pub fuse_test: Option<PathBuf>,
    #[arg(long, env = REPORT_DIR_ENV, default_value = "reports")]
    pub report_dir: PathBuf,
    /// File name stem for the report files.
    #[arg(long, default_value = "report")]
    pub stem: String,
    /// Score views on one thread.
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Args, Debug, Serialize)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = GradSuiteConfig::default().seed)]
    pub seed: u64,
    /// Where to write the JSON report.
    #[arg(long)]
    pub report_dir: Option<PathBuf>,
    /// Scale analytic gradients by this factor (negative control).
    #[arg(long, hide = true)]
    pub inject_fault: Option<f64>,
}

#[derive(Args, Debug, Serialize)]
pub struct CurveArgs {
    /// A report JSON file written by `eval`.
    #[arg(long)]
    pub report: PathBuf,
    /// Output path; defaults to `<report stem>_curve.csv` beside the report.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct Echo<'a, A: Serialize, R: Serialize> {
    command: &'a str,
    version: &'a str,
    args: &'a A,
    resolved: R,
}

fn write_echo<A: Serialize, R: Serialize>(dir: &Path, command: &str, args: &A, resolved: R) -> Result<String> {
    let echo = Echo {
        command,
        version: env!("CARGO_PKG_VERSION"),
        args,
        resolved,
    };
    let text = serde_json::to_string_pretty(&echo).expect("config serialises") + "\n";
    let path = dir.join(format!("{}_config.json", command.replace('-', "_")));
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    std::fs::write(&path, &text).map_err(|e| Error::io(&path, e))?;
    Ok(text)
}

fn gen_data(a: &GenDataArgs) -> Result<()> {
    let spec = a.spec();
    spec.validate()?;
    let modalities = match a.modality {
        ModalityArg::A => vec![Modality::A],
        ModalityArg::B => vec![Modality::B],
        ModalityArg::Both => vec![Modality::A, Modality::B],
    };
    write_echo(&a.out_dir, "gen-data", a, spec)?;
    for m in modalities {
        let (train, test) = synthesize_modality(&spec, m, Exec::default())?;
        for (name, set) in [("train", &train), ("test", &test)] {
            let path = a.out_dir.join(format!("{name}_{}.epd", m.tag()));
            save_dataset(&path, set)?;
            if a.text {
                export_text(&path.with_extension("csv"), set)?;
            }
            println!("wrote {} ({} sequences)", path.display(), set.len());
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct TrainResolved {
    dims: ModelDims,
    variant: Variant,
    config: TrainConfig,
    stage1: bool,
    stage2: bool,
}

fn train(a: &TrainArgs) -> Result<()> {
    let cfg = a.config();
    cfg.validate()?;
    let data = load_dataset(&a.train)?;
    let mut bundle = match &a.from {
        Some(p) => load_checkpoint(p)?.bundle.with_variant(a.variant),
        None => {
            let dims = ModelDims {
                d_raw: data.d_raw,
                d_enc: a.d_enc,
                d_feat: a.d_feat,
                d_hidden: a.d_hidden,
                head_widths: [a.head1, a.head2],
                classes: data.classes,
                segments: data.segments,
            };
            ModelBundle::new(dims, a.variant, a.seed)?
        }
    };
    let resolved = TrainResolved {
        dims: bundle.dims,
        variant: a.variant,
        config: cfg,
        stage1: !a.skip_stage1,
        stage2: !a.stage1_only,
    };
    let echo = write_echo(&a.out_dir, "train", a, &resolved)?;
    let mut log = TrainLog::default();
    if resolved.stage1 {
        log.extend(stage1_pretrain(&mut bundle, &data, &cfg)?);
        if let Some(acc) = log.final_train_acc(crate::train::Stage::Pretrain) {
            println!("stage 1: {} iterations, train accuracy {:.4}", cfg.stage1.iterations, acc);
        }
        if resolved.stage2 {
            save_checkpoint(&a.out_dir.join("stage1.ckpt"), &bundle, &echo)?;
        }
    }
    if resolved.stage2 {
        log.extend(stage2_adversarial(&mut bundle, &data, &cfg)?);
        if let Some(r) = log.last(crate::train::Stage::Adversarial) {
            println!(
                "stage 2: {} iterations, D(real) {:.3}, D(fake) {:.3}, view accuracy {:.4}",
                r.iter,
                r.d_real.unwrap_or(f64::NAN),
                r.d_fake.unwrap_or(f64::NAN),
                r.train_acc.unwrap_or(f64::NAN)
            );
        }
    }
    let ckpt = a.out_dir.join("model.ckpt");
    save_checkpoint(&ckpt, &bundle, &echo)?;
    log.write_csv(&a.out_dir.join("train_log.csv"))?;
    println!("wrote {}", ckpt.display());
    Ok(())
}

fn check_compatible(bundle: &ModelBundle, test: &crate::data::Dataset, path: &Path) -> Result<()> {
    let d = bundle.dims;
    if d.d_raw != test.d_raw || d.classes != test.classes || d.segments != test.segments {
        return Err(Error::Mismatch(format!(
            "checkpoint expects C={}, K={}, d_raw={} but {} has C={}, K={}, d_raw={}",
            d.classes,
            d.segments,
            d.d_raw,
            path.display(),
            test.classes,
            test.segments,
            test.d_raw
        )));
    }
    Ok(())
}

fn eval(a: &EvalArgs) -> Result<()> {
    let exec = if a.sequential { Exec::Sequential } else { Exec::default() };
    let bundle = load_checkpoint(&a.checkpoint)?.bundle;
    let test = load_dataset(&a.test)?;
    check_compatible(&bundle, &test, &a.test)?;
    let report = match (&a.fuse, &a.fuse_test) {
        (Some(ck), Some(tp)) => {
            let other = load_checkpoint(ck)?.bundle;
            let test_b = load_dataset(tp)?;
            check_compatible(&other, &test_b, tp)?;
            evaluate_fused(&bundle, &other, &test, &test_b, exec)?
        }
        _ => evaluate(&bundle, &test, exec)?,
    };
    write_echo(&a.report_dir, "eval", a, ())?;
    let files = write_report(&report, &a.report_dir, &a.stem)?;
    println!("average accuracy {:.4}", report.average_accuracy());
    println!("wrote {}", files.text.display());
    Ok(())
}

fn gradcheck(a: &GradcheckArgs) -> Result<bool> {
    let cfg = GradSuiteConfig {
        seed: a.seed,
        fault: a.inject_fault.unwrap_or(1.0),
        ..GradSuiteConfig::default()
    };
    let report = run_grad_suite(cfg);
    print!("{}", report.to_text());
    if let Some(dir) = &a.report_dir {
        write_echo(dir, "gradcheck", a, ())?;
        let path = dir.join("gradcheck.json");
        let json = serde_json::to_string_pretty(&report).expect("report serialises") + "\n";
        std::fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
    }
    Ok(report.passed())
}

fn curve(a: &CurveArgs) -> Result<()> {
    let report = load_report(&a.report)?;
    let out = a.out.clone().unwrap_or_else(|| {
        let stem = a.report.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
        a.report.with_file_name(format!("{stem}_curve.csv"))
    });
    std::fs::write(&out, report.curve_csv()).map_err(|e| Error::io(&out, e))?;
    println!("wrote {}", out.display());
    Ok(())
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => EXIT_USAGE,
        Error::Divergence(_) => EXIT_NUMERIC,
        _ => EXIT_RUNTIME,
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::GenData(a) => gen_data(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Curve(a) => curve(a),
        Command::Gradcheck(a) => match gradcheck(a) {
            Ok(true) => Ok(()),
            Ok(false) => return EXIT_NUMERIC,
            Err(e) => Err(e),
        },
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
