//! Command-line front end. Exit codes: 0 success, 1 algorithmic failure,
//! 2 usage or input error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::array::{ArrayModel, Family};
use crate::centerline::localize_cl;
use crate::cochlea::CochleaModel;
use crate::config::{
    config_distance, select_configuration, select_configuration_naive, train_weights, Configuration, EnvelopeMode,
    TrainingSubject, WeightSet,
};
use crate::dvf::{build_dvf, DvfSet, DEFAULT_GRID};
use crate::error::{Error, Result};
use crate::graph::localize_gp;
use crate::metrics::{electrode_errors, parameter_sweep, SweepOptions};
use crate::params::{ClParams, GpParams, SnakeParams};
use crate::phantom::{case_array, case_prefix, load_case, save_suite, synth_suite, HuMode, PhantomSpec};
use crate::result::LocalizationResult;
use crate::snake::localize_snake;

#[derive(Parser, Debug)]
#[command(name = "cochlea", version, about = "Electrode localization in cochlear CT and electrode configuration selection")]
pub struct Cli {
    /// Worker threads (default: all cores). Outputs do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Synthetic phantom cases with known contact positions.
    #[command(subcommand)]
    Phantom(PhantomCmd),
    /// Localize the contacts of one phantom or saved case.
    #[command(subcommand)]
    Localize(LocalizeCmd),
    /// Distance-vs-frequency curves.
    #[command(subcommand)]
    Dvf(DvfCmd),
    /// Electrode configuration selection and training.
    #[command(subcommand)]
    Config(ConfigCmd),
    /// Error reports and parameter sweeps.
    #[command(subcommand)]
    Eval(EvalCmd),
}

#[derive(Subcommand, Debug)]
pub enum PhantomCmd {
    /// Render a suite of cases into a directory.
    Gen(GenArgs),
}

#[derive(Args, Debug)]
pub struct GenArgs {
    /// Array preset (MD1, MD2, AB1, AB2, AB3, CO1, CO2, CO3).
    #[arg(long)]
    pub array: String,
    /// Number of cases.
    #[arg(long, default_value_t = 1)]
    pub suite: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Noise-free, artifact-free, confounder-free cases.
    #[arg(long)]
    pub clean: bool,
    /// Number of bone- and metal-like distractor blobs.
    #[arg(long)]
    pub confounders: Option<usize>,
    /// Noise standard deviation.
    #[arg(long)]
    pub noise: Option<f64>,
    /// Voxel spacing (mm).
    #[arg(long)]
    pub spacing: Option<f64>,
    /// Clamp metal at the bone intensity.
    #[arg(long)]
    pub limited: bool,
    /// Solid bone around the scala.
    #[arg(long)]
    pub bone_fill: bool,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Subcommand, Debug)]
pub enum LocalizeCmd {
    /// Graph path-finding localizer for distantly spaced contacts.
    Gp(LocalizeArgs),
    /// Centerline localizer for closely spaced contacts.
    Cl(LocalizeArgs),
    /// Active-contour localizer for closely spaced contacts.
    Snake(LocalizeArgs),
}

#[derive(Args, Debug)]
pub struct LocalizeArgs {
    /// Case file prefix, e.g. `suite/case_0`.
    #[arg(long)]
    pub case: PathBuf,
    /// Array preset; defaults to the one in the suite manifest.
    #[arg(long)]
    pub array: Option<String>,
    /// `key = value` parameter overrides.
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Contact CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Coarse (pre-refinement) contact CSV.
    #[arg(long)]
    pub coarse_out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum DvfCmd {
    /// Curves of localized contacts against a cochlea model.
    Build(DvfBuildArgs),
    /// SVG plot of a DVF file.
    Plot(DvfPlotArgs),
}

#[derive(Args, Debug)]
pub struct DvfBuildArgs {
    /// Contact CSV.
    #[arg(long)]
    pub electrodes: PathBuf,
    /// Cochlea model file.
    #[arg(long)]
    pub model: PathBuf,
    /// Frequency grid size.
    #[arg(long, default_value_t = DEFAULT_GRID)]
    pub grid: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct DvfPlotArgs {
    #[arg(long)]
    pub dvf: PathBuf,
    /// Configuration CSV; inactive curves are drawn dashed.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Envelope {
    /// Envelope of all electrodes (exhaustive search is fast).
    All,
    /// Envelope of the active electrodes, recomputed per configuration.
    Active,
}

#[derive(Subcommand, Debug)]
pub enum ConfigCmd {
    /// Lowest-cost configuration of a DVF set.
    Select(SelectArgs),
    /// Fit feature weights to expert configurations.
    Train(TrainArgs),
    /// Distance of a mask from a reference mask.
    Distance(DistanceArgs),
}

#[derive(Args, Debug)]
pub struct SelectArgs {
    #[arg(long)]
    pub dvf: PathBuf,
    /// Weight file; defaults to the published weights of `--family`.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// MD, AB or CO.
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long, value_enum, default_value_t = Envelope::All)]
    pub envelope: Envelope,
    /// Mask file (`+`/`-` string).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// `index,active` CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// TOML file with `[[subject]]` tables of `dvf`, `optimal` and `acceptable`.
    #[arg(long)]
    pub subjects: PathBuf,
    /// MD, AB or CO.
    #[arg(long)]
    pub family: String,
    /// Rows per subject for arrays too large to enumerate.
    #[arg(long, default_value_t = 20000)]
    pub budget: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct DistanceArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub mask: String,
    #[arg(long, allow_hyphen_values = true)]
    pub reference: String,
}

#[derive(Subcommand, Debug)]
pub enum EvalCmd {
    /// Per-contact errors of a result against ground truth.
    Compare(CompareArgs),
    /// Coordinate-descent sweep of GP parameters over a phantom suite.
    Sweep(SweepArgs),
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long)]
    pub result: PathBuf,
    /// Voxel spacing (mm) for reporting errors relative to the voxel diagonal.
    #[arg(long)]
    pub voxel: Option<f64>,
    /// Per-contact CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    /// Suite directory written by `phantom gen`.
    #[arg(long)]
    pub suite: PathBuf,
    /// Starting `key = value` overrides.
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Parameters to sweep.
    #[arg(long, value_delimiter = ',', default_value = "mu_s,rho,gamma1,gamma2")]
    pub keys: Vec<String>,
    #[arg(long, default_value_t = 11)]
    pub steps: usize,
    #[arg(long, default_value_t = 1)]
    pub passes: usize,
    /// Trace CSV.
    #[arg(long)]
    pub out: PathBuf,
}

/// Exit code for a failed command.
pub fn exit_code(e: &Error) -> i32 {
    match e.root() {
        Error::Io(_) | Error::Format(_) | Error::Parse(_) | Error::InvalidArgument(_) => 2,
        _ => 1,
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let outcome = match cli.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| execute(&cli.command)),
            Err(e) => Err(Error::InvalidArgument(e.to_string())),
        },
        None => execute(&cli.command),
    };
    match outcome {
        Ok(msg) => {
            print!("{msg}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Runs a parsed command and returns its standard output.
pub fn execute(cmd: &Command) -> Result<String> {
    match cmd {
        Command::Phantom(PhantomCmd::Gen(a)) => phantom_gen(a),
        Command::Localize(c) => localize(c),
        Command::Dvf(DvfCmd::Build(a)) => dvf_build(a),
        Command::Dvf(DvfCmd::Plot(a)) => dvf_plot(a),
        Command::Config(ConfigCmd::Select(a)) => config_select(a),
        Command::Config(ConfigCmd::Train(a)) => config_train(a),
        Command::Config(ConfigCmd::Distance(a)) => {
            let m = Configuration::parse_mask(&a.mask)?;
            let r = Configuration::parse_mask(&a.reference)?;
            Ok(format!("{}\n", config_distance(&m, &r)?))
        }
        Command::Eval(EvalCmd::Compare(a)) => eval_compare(a),
        Command::Eval(EvalCmd::Sweep(a)) => eval_sweep(a),
    }
}

fn read_params<P: Default>(path: &Option<PathBuf>, apply: impl Fn(&mut P, &str) -> Result<()>) -> Result<P> {
    let mut p = P::default();
    if let Some(path) = path {
        apply(&mut p, &fs::read_to_string(path)?)?;
    }
    Ok(p)
}

fn phantom_gen(a: &GenArgs) -> Result<String> {
    let array = ArrayModel::preset(&a.array)?;
    let mut spec = if a.clean { PhantomSpec::clean(array) } else { PhantomSpec::new(array) };
    if let Some(c) = a.confounders {
        spec.confounders = c;
    }
    if let Some(n) = a.noise {
        spec.noise_sigma = n;
    }
    if let Some(h) = a.spacing {
        spec.spacing = h;
    }
    if a.limited {
        spec.mode = HuMode::Limited;
    }
    spec.bone_fill = a.bone_fill;
    let cases = synth_suite(&spec, a.suite, a.seed)?;
    save_suite(&a.out, &cases)?;
    Ok(format!("wrote {} cases to {}\n", cases.len(), a.out.display()))
}

fn case_array_name(case: &Path, given: &Option<String>) -> Result<ArrayModel> {
    match given {
        Some(name) => ArrayModel::preset(name),
        None => ArrayModel::preset(&case_array(case)?),
    }
}

fn localize(c: &LocalizeCmd) -> Result<String> {
    let a = match c {
        LocalizeCmd::Gp(a) | LocalizeCmd::Cl(a) | LocalizeCmd::Snake(a) => a,
    };
    let array = case_array_name(&a.case, &a.array)?;
    let case = load_case(&a.case, &array.name)?;
    let (result, coarse) = match c {
        LocalizeCmd::Gp(_) => {
            let p: GpParams = read_params(&a.params, GpParams::apply)?;
            let o = localize_gp(&case.volume, &case.bbox, &array, &case.model, &p)?;
            (o.result, Some(o.coarse))
        }
        LocalizeCmd::Cl(_) => {
            let p: ClParams = read_params(&a.params, ClParams::apply)?;
            let o = localize_cl(&case.volume, &case.bbox, &array, &case.model, &p)?;
            (o.result, Some(o.coarse))
        }
        LocalizeCmd::Snake(_) => {
            let p: SnakeParams = read_params(&a.params, SnakeParams::apply)?;
            let mut o = localize_snake(&case.volume, &case.bbox, &array, &p)?;
            o.result.doi = o.result.contacts.iter().map(|x| case.model.doi_of_point(x).unwrap_or(f64::NAN)).collect();
            (o.result, None)
        }
    };
    result.save(&a.out)?;
    if let (Some(path), Some(c)) = (&a.coarse_out, coarse) {
        c.save(path)?;
    }
    let mut msg = format!("{} contacts written to {}\n", result.len(), a.out.display());
    if let Some(t) = &case.truth {
        let e = electrode_errors(&result, t)?;
        writeln!(msg, "mean_error_mm={} max_error_mm={}", e.mean, e.max).unwrap();
    }
    Ok(msg)
}

fn dvf_build(a: &DvfBuildArgs) -> Result<String> {
    let electrodes = LocalizationResult::load(&a.electrodes, "array")?;
    let model = CochleaModel::load(&a.model)?;
    let set = build_dvf(&electrodes, &model, a.grid)?;
    set.save(&a.out)?;
    Ok(format!("{} curves on {} frequencies written to {}\n", set.len(), set.freqs.len(), a.out.display()))
}

fn dvf_plot(a: &DvfPlotArgs) -> Result<String> {
    let set = DvfSet::load(&a.dvf)?;
    let active = match &a.config {
        Some(p) => Some(Configuration::from_csv(&fs::read_to_string(p)?)?.active),
        None => None,
    };
    fs::write(&a.out, set.to_svg(active.as_deref()))?;
    Ok(format!("plot written to {}\n", a.out.display()))
}

fn config_select(a: &SelectArgs) -> Result<String> {
    let set = DvfSet::load(&a.dvf)?;
    let w = match (&a.weights, &a.family) {
        (Some(p), _) => WeightSet::load(p)?,
        (None, Some(f)) => WeightSet::preset(f.parse::<Family>()?),
        (None, None) => return Err(Error::InvalidArgument("pass --weights or --family".into())),
    };
    let sel = match a.envelope {
        Envelope::All => select_configuration(&set, &w)?,
        Envelope::Active => select_configuration_naive(&set, &w, EnvelopeMode::Active)?,
    };
    let mask = sel.config.to_mask_string();
    if let Some(p) = &a.out {
        fs::write(p, format!("{mask}\n"))?;
    }
    if let Some(p) = &a.csv {
        fs::write(p, sel.config.to_csv())?;
    }
    Ok(format!("{mask}\ncost={} scored={}\n", sel.cost, sel.scored))
}

#[derive(Deserialize)]
struct SubjectFile {
    subject: Vec<SubjectEntry>,
}

#[derive(Deserialize)]
struct SubjectEntry {
    dvf: PathBuf,
    optimal: String,
    #[serde(default)]
    acceptable: Vec<String>,
}

fn config_train(a: &TrainArgs) -> Result<String> {
    let text = fs::read_to_string(&a.subjects)?;
    let file: SubjectFile = toml::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
    let base = a.subjects.parent().unwrap_or(Path::new("."));
    let subjects = file
        .subject
        .iter()
        .map(|s| {
            Ok(TrainingSubject {
                dvf: DvfSet::load(base.join(&s.dvf))?,
                optimal: Configuration::parse_mask(&s.optimal)?,
                acceptable: s.acceptable.iter().map(|m| Configuration::parse_mask(m)).collect::<Result<_>>()?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let rep = train_weights(&subjects, a.family.parse()?, a.budget, a.seed)?;
    rep.weights.save(&a.out)?;
    Ok(format!(
        "rows={} residual={} rank_deficient={}\nweights written to {}\n",
        rep.rows,
        rep.residual,
        rep.rank_deficient,
        a.out.display()
    ))
}

fn eval_compare(a: &CompareArgs) -> Result<String> {
    let truth = LocalizationResult::load(&a.truth, "truth")?;
    let result = LocalizationResult::load(&a.result, "result")?;
    let e = electrode_errors(&result, &truth)?;
    if let Some(p) = &a.out {
        let mut s = String::from("index,error_mm\n");
        for (i, v) in e.per_contact.iter().enumerate() {
            writeln!(s, "{},{}", i + 1, v).unwrap();
        }
        fs::write(p, s)?;
    }
    let mut msg = format!("mean_error_mm={} max_error_mm={}\n", e.mean, e.max);
    if let Some(h) = a.voxel {
        let diag = h * 3f64.sqrt();
        writeln!(msg, "mean_diagonal_fraction={} max_diagonal_fraction={}", e.mean / diag, e.max / diag).unwrap();
    }
    Ok(msg)
}

fn eval_sweep(a: &SweepArgs) -> Result<String> {
    let mut cases = Vec::new();
    let mut k = 0;
    loop {
        let prefix = case_prefix(&a.suite, k);
        let mut vol = prefix.as_os_str().to_owned();
        vol.push(".vvol");
        if !Path::new(&vol).exists() {
            break;
        }
        let array = ArrayModel::preset(&case_array(&prefix)?)?;
        let files = load_case(&prefix, &array.name)?;
        let truth = files.truth.clone().ok_or_else(|| Error::InvalidArgument(format!("case_{k} has no truth file")))?;
        cases.push((array, files, truth));
        k += 1;
    }
    if cases.is_empty() {
        return Err(Error::InvalidArgument(format!("no cases in {}", a.suite.display())));
    }
    let base: GpParams = read_params(&a.params, GpParams::apply)?;
    let start = a
        .keys
        .iter()
        .map(|key| base.get(key).ok_or_else(|| Error::InvalidArgument(format!("unknown GP parameter {key:?}"))))
        .collect::<Result<Vec<_>>>()?;
    // a failed case makes the grid point infinitely bad
    let objective = |values: &[f64]| {
        let mut p = base.clone();
        for (key, &v) in a.keys.iter().zip(values) {
            if p.set(key, v).is_err() {
                return f64::INFINITY;
            }
        }
        let mut total = 0.0;
        for (array, f, truth) in &cases {
            match localize_gp(&f.volume, &f.bbox, array, &f.model, &p).and_then(|o| electrode_errors(&o.result, truth)) {
                Ok(e) => total += e.mean,
                Err(_) => return f64::INFINITY,
            }
        }
        total / cases.len() as f64
    };
    let opts = SweepOptions { steps: a.steps, max_passes: a.passes, ranges: None };
    let res = parameter_sweep(objective, &start, &opts)?;
    let mut csv = format!("pass,param,{},mean_error_mm\n", a.keys.join(","));
    for s in &res.trace {
        let name = s.param.map_or("start", |i| a.keys[i].as_str());
        let vals: Vec<String> = s.params.iter().map(|v| v.to_string()).collect();
        writeln!(csv, "{},{},{},{}", s.pass, name, vals.join(","), s.error).unwrap();
    }
    fs::write(&a.out, csv)?;
    let tuned: Vec<String> = a.keys.iter().zip(&res.params).map(|(k, v)| format!("{k} = {v}")).collect();
    Ok(format!("{}\nmean_error_mm={}\n", tuned.join("\n"), res.error))
}
