//! Subcommand implementations.

use serde::Serialize;

use qclimit::harness::{
    equivalence_sanity, gamma_convergence_probe, potential_convergence, resolvent_convergence, state_convergence,
    uv_commutation_experiment, wick_cutoff_slope, ConvergenceReport, CutoffSchedule, Fields, ResolventMode, Setup,
};
use qclimit::lorentz::{inverse_k_weak_norm, inverse_k_weak_norm_exact, run_suite};
use qclimit::operators::{form_eigenpairs, klmn_bound, EigenReport};
use qclimit::potentials::{check_a_chi, check_a_chi_prime, check_a_omega, AssumptionCheck, EffectivePotential};

use crate::config::{ExperimentConfig, Model, Operation};
use crate::output::{num, slug, Artifacts};
use crate::{CliError, ExitClass};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    CheckAssumptions,
    LorentzSuite,
    Potentials,
    Spectrum,
    Converge,
    UvSweep,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::CheckAssumptions => "check-assumptions",
            Command::LorentzSuite => "lorentz-suite",
            Command::Potentials => "potentials",
            Command::Spectrum => "spectrum",
            Command::Converge => "converge",
            Command::UvSweep => "uv-sweep",
        }
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    /// Assumption-audit failures abort every physics command.
    pub strict: bool,
}

#[derive(Serialize)]
struct RunRecord<'a> {
    artifacts: &'a [String],
    warnings: &'a [String],
    exit_code: i32,
    message: Option<String>,
}

/// Runs one command, writing artifacts under `cfg.out`. On failure the
/// returned error carries the exit class; `run.json` is written either way.
pub fn run(cmd: Command, cfg: &ExperimentConfig, opts: RunOptions) -> Result<Vec<String>, CliError> {
    let mut art = Artifacts::new(&cfg.out, &cfg.hash(), cmd.name())?;
    let mut resolved = cfg.clone();
    resolved.out = Default::default();
    art.raw("config.resolved.toml", resolved.to_toml().as_bytes())?;
    let mut warnings = Vec::new();
    let result = dispatch(cmd, cfg, opts, &mut art, &mut warnings);
    let (code, message) = match &result {
        Ok(()) => (0, None),
        Err(e) => (e.class as i32, Some(e.message.clone())),
    };
    let names = art.written().to_vec();
    art.json("run.json", &RunRecord { artifacts: &names, warnings: &warnings, exit_code: code, message })?;
    result.map(|_| warnings)
}

fn dispatch(cmd: Command, cfg: &ExperimentConfig, opts: RunOptions, art: &mut Artifacts, warnings: &mut Vec<String>) -> Result<(), CliError> {
    match cmd {
        Command::CheckAssumptions => check_assumptions(cfg, art),
        Command::LorentzSuite => lorentz_suite(cfg, art),
        _ => {
            let setup = cfg.plan().setup()?;
            let failed: Vec<String> = audit(cfg, &setup)?.iter().filter(|c| !c.passed).map(describe).collect();
            if !failed.is_empty() {
                if opts.strict {
                    return Err(CliError { class: ExitClass::Assumption, message: format!("assumption audit failed: {}", failed.join("; ")) });
                }
                warnings.extend(failed.into_iter().map(|f| format!("assumption audit: {f}")));
            }
            match cmd {
                Command::Potentials => potentials(cfg, &setup, art),
                Command::Spectrum => spectrum(cfg, &setup, art),
                Command::Converge => converge(cfg, art),
                Command::UvSweep => uv_sweep(cfg, &setup, art),
                _ => unreachable!(),
            }
        }
    }
}

fn describe(c: &AssumptionCheck) -> String {
    format!("{} ({} = {:.6} against {:.6})", c.name, c.functional, c.value, c.threshold)
}

/// Dispersion, coupling, external potential and state-energy checks.
pub fn audit(cfg: &ExperimentConfig, setup: &Setup) -> Result<Vec<AssumptionCheck>, CliError> {
    let cpl = cfg.coupling();
    let mut checks = vec![check_a_omega(&cfg.dispersion, &setup.basis), check_a_chi(&cpl, &setup.basis)?];
    if cfg.model == Model::PauliFierz {
        checks.push(check_a_chi_prime(&cpl, &setup.basis)?);
    }
    let functional = "KLMN relative bound a of U_- against -Laplacian".to_string();
    checks.push(match klmn_bound(setup.u.minus(), &setup.scalar_grid, cfg.grid.kinetic) {
        Ok(k) => AssumptionCheck { name: "A_U".into(), functional, value: k.a, threshold: 1.0, passed: k.a < 1.0 },
        Err(qclimit::Error::NoKlmnPair { best_a }) => {
            AssumptionCheck { name: "A_U".into(), functional, value: best_a, threshold: 1.0, passed: false }
        }
        Err(e) => return Err(e.into()),
    });
    let mut sup: f64 = 0.0;
    for eps in cfg.sweep.epsilons() {
        let e = setup.family.energy(eps)?;
        sup = sup.max(match cfg.model {
            Model::Nelson => e.nelson_bound(),
            Model::PauliFierz => e.pf_bound(),
        });
    }
    let (name, functional) = match cfg.model {
        Model::Nelson => ("A_Psi^Nel", "sup over the sweep of <1 + dGamma(omega)>"),
        Model::PauliFierz => ("A_Psi^PF", "sup over the sweep of <1 + dGamma(omega) + dGamma2(omega x omega)>"),
    };
    checks.push(AssumptionCheck { name: name.into(), functional: functional.into(), value: sup, threshold: f64::MAX, passed: sup.is_finite() });
    Ok(checks)
}

fn check_assumptions(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<(), CliError> {
    let setup = cfg.plan().setup()?;
    let checks = audit(cfg, &setup)?;
    art.json("assumptions.json", &checks)?;
    let rows: Vec<Vec<String>> = checks
        .iter()
        .map(|c| vec![c.name.clone(), c.functional.clone(), num(c.value), num(c.threshold), c.passed.to_string()])
        .collect();
    art.csv("assumptions.csv", &["name", "functional", "value", "threshold", "passed"], &rows)?;
    let failed: Vec<String> = checks.iter().filter(|c| !c.passed).map(describe).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError { class: ExitClass::Assumption, message: format!("assumption audit failed: {}", failed.join("; ")) })
    }
}

#[derive(Serialize)]
struct WeakNorm {
    grid: usize,
    value: f64,
    closed_form: f64,
    relative_error: f64,
}

fn lorentz_suite(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<(), CliError> {
    let n = cfg.lorentz.weak_norm_grid;
    let value = inverse_k_weak_norm(n)?;
    let exact = inverse_k_weak_norm_exact();
    let weak = WeakNorm { grid: n, value, closed_form: exact, relative_error: (value - exact).abs() / exact };
    let rows = run_suite(&cfg.lorentz_corpus())?;
    let mut table = vec![vec!["inverse_k_ball".to_string(), "weak_norm_3_inf".to_string(), n.to_string(), num(value), num(value)]];
    table.extend(rows.iter().map(|r| vec![r.corpus_id.clone(), r.lemma_id.clone(), r.grid_size.to_string(), num(r.ratio_max), num(r.ratio_p95)]));
    art.csv("lorentz_suite.csv", &["corpus_id", "lemma_id", "grid_size", "ratio_max", "ratio_p95"], &table)?;
    #[derive(Serialize)]
    struct Suite<'a> {
        weak_norm: WeakNorm,
        rows: &'a [qclimit::lorentz::SuiteRow],
    }
    art.json("lorentz_suite.json", &Suite { weak_norm: weak, rows: &rows })
}

fn named_fields(f: &Fields) -> Vec<(&'static str, &EffectivePotential)> {
    match f {
        Fields::Nelson { v } => vec![("V", v)],
        Fields::Pauli { a, w, b } => vec![("A", a), ("W", w), ("B", b)],
    }
}

/// `(tag, eps, fields)` for every sweep point followed by the limit, if declared.
fn all_fields(cfg: &ExperimentConfig, setup: &Setup) -> Result<Vec<(String, Option<f64>, Fields)>, CliError> {
    let mut out = Vec::new();
    for (i, eps) in cfg.sweep.epsilons().into_iter().enumerate() {
        out.push((format!("eps{i}"), Some(eps), setup.fields_eps(eps)?));
    }
    if setup.family.declared_limit().is_some() {
        out.push(("mu".to_string(), None, setup.fields_mu()?));
    }
    Ok(out)
}

fn eps_cell(e: Option<f64>) -> String {
    e.map(num).unwrap_or_else(|| "limit".into())
}

fn potentials(cfg: &ExperimentConfig, setup: &Setup, art: &mut Artifacts) -> Result<(), CliError> {
    let fields = all_fields(cfg, setup)?;
    let cpl = cfg.coupling();
    let pts = setup.scalar_grid.points();
    let mut rows = Vec::new();
    #[derive(Serialize)]
    struct Summary {
        source: String,
        epsilon: Option<f64>,
        object: &'static str,
        max_abs: f64,
        max_abs_diff_to_limit: Option<f64>,
    }
    let mut summary = Vec::new();
    let limit = fields.iter().find(|f| f.1.is_none()).map(|f| named_fields(&f.2));
    for (tag, eps, f) in &fields {
        for (obj, p) in named_fields(f) {
            let mut bin = Vec::new();
            p.write_binary(&mut bin).map_err(CliError::io)?;
            art.raw(&format!("potentials/{obj}_{tag}.bin"), &bin)?;
            art.json(&format!("potentials/{obj}_{tag}.json"), &p.metadata(&cpl))?;
            for (c, comp) in p.components.iter().enumerate() {
                for (i, v) in comp.iter().enumerate() {
                    let x = pts[i];
                    rows.push(vec![tag.clone(), eps_cell(*eps), obj.to_string(), c.to_string(), i.to_string(), num(x[0]), num(x[1]), num(x[2]), num(*v)]);
                }
            }
            let diff = match &limit {
                Some(l) => Some(l.iter().find(|(o, _)| *o == obj).map(|(_, q)| p.max_abs_diff(q)).transpose()?.unwrap_or(f64::NAN)),
                None => None,
            };
            summary.push(Summary { source: tag.clone(), epsilon: *eps, object: obj, max_abs: p.max_abs(), max_abs_diff_to_limit: diff });
        }
    }
    art.csv("potentials.csv", &["source", "epsilon", "object", "component", "point", "x", "y", "z", "value"], &rows)?;
    art.json("potentials.json", &summary)
}

fn spectrum(cfg: &ExperimentConfig, setup: &Setup, art: &mut Artifacts) -> Result<(), CliError> {
    let fields = all_fields(cfg, setup)?;
    let mut rows = Vec::new();
    #[derive(Serialize)]
    struct Entry {
        source: String,
        epsilon: Option<f64>,
        report: EigenReport,
    }
    let mut entries = Vec::new();
    let mut levels: Vec<Vec<(f64, f64)>> = vec![Vec::new(); cfg.spectrum.count];
    for (tag, eps, f) in &fields {
        let form = setup.form(f)?;
        let pairs = form_eigenpairs(&form, cfg.spectrum.count)?;
        for (k, p) in pairs.iter().enumerate() {
            rows.push(vec![tag.clone(), eps_cell(*eps), k.to_string(), num(p.value), num(p.residual)]);
            if let Some(e) = eps {
                levels[k].push((*e, p.value));
            }
        }
        if eps.is_none() && form.dim() <= cfg.spectrum.triplets_max_dim {
            let mut buf = Vec::new();
            form.write_triplets(&mut buf, 0.0).map_err(CliError::io)?;
            art.raw("operator_limit.triplets", &buf)?;
        }
        entries.push(Entry { source: tag.clone(), epsilon: *eps, report: EigenReport::new(&pairs) });
    }
    art.csv("spectrum.csv", &["source", "epsilon", "index", "eigenvalue", "residual"], &rows)?;
    for (k, pts) in levels.iter().enumerate() {
        art.plot(&format!("plots/spectrum_level{k}.dat"), "epsilon", &format!("eigenvalue {k}"), pts)?;
    }
    art.json("spectrum.json", &entries)
}

fn write_report(art: &mut Artifacts, name: &str, rep: &mut ConvergenceReport) -> Result<(), CliError> {
    rep.plan_hash = art.hash().to_string();
    art.json(&format!("{name}.json"), rep)?;
    let rows: Vec<Vec<String>> = rep.rows.iter().map(|r| vec![rep.operation.clone(), num(r.epsilon), r.metric.clone(), num(r.value)]).collect();
    art.csv(&format!("{name}.csv"), &["operation", "epsilon", "metric", "value"], &rows)?;
    for m in rep.metrics() {
        art.plot(&format!("plots/{name}__{}.dat", slug(&m)), "epsilon", &m, &rep.series(&m))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct VerdictRow {
    operation: String,
    criterion: String,
    passed: bool,
    detail: String,
}

fn verdict_failure(verdicts: &[VerdictRow]) -> Result<(), CliError> {
    let failed: Vec<String> = verdicts.iter().filter(|v| !v.passed).map(|v| format!("{}/{}: {}", v.operation, v.criterion, v.detail)).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError { class: ExitClass::Verdict, message: format!("verdict FAIL: {}", failed.join("; ")) })
    }
}

fn converge(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<(), CliError> {
    let plan = cfg.plan();
    let mut verdicts = Vec::new();
    let mut gamma = None;
    let mut strong = None;
    for op in &cfg.converge.operations {
        let mut rep = match op {
            Operation::State => state_convergence(&plan)?,
            Operation::Potential => potential_convergence(&plan)?,
            Operation::Gamma => gamma_convergence_probe(&plan)?,
            Operation::ResolventStrong => resolvent_convergence(&plan, ResolventMode::Strong)?,
            Operation::ResolventNorm => resolvent_convergence(&plan, ResolventMode::Norm)?,
        };
        write_report(art, &format!("converge_{}", op.name()), &mut rep)?;
        verdicts.extend(rep.verdicts.iter().map(|v| VerdictRow {
            operation: op.name().into(),
            criterion: v.criterion.clone(),
            passed: v.passed,
            detail: v.detail.clone(),
        }));
        match op {
            Operation::Gamma => gamma = Some(rep),
            Operation::ResolventStrong => strong = Some(rep),
            _ => {}
        }
    }
    if let (Some(g), Some(s)) = (&gamma, &strong) {
        let v = equivalence_sanity(g, s);
        verdicts.push(VerdictRow { operation: "converge".into(), criterion: v.criterion, passed: v.passed, detail: v.detail });
    }
    let rows: Vec<Vec<String>> = verdicts.iter().map(|v| vec![v.operation.clone(), v.criterion.clone(), v.passed.to_string(), v.detail.clone()]).collect();
    art.csv("verdicts.csv", &["operation", "criterion", "passed", "detail"], &rows)?;
    #[derive(Serialize)]
    struct Summary<'a> {
        verdict: &'static str,
        verdicts: &'a [VerdictRow],
    }
    let pass = verdicts.iter().all(|v| v.passed);
    art.json("converge.json", &Summary { verdict: if pass { "PASS" } else { "FAIL" }, verdicts: &verdicts })?;
    verdict_failure(&verdicts)
}

fn uv_sweep(cfg: &ExperimentConfig, setup: &Setup, art: &mut Artifacts) -> Result<(), CliError> {
    let schedules: Vec<CutoffSchedule> = cfg.uv.exponents.iter().map(|a| CutoffSchedule { exponent: *a, scale: cfg.uv.scale }).collect();
    let mut rep = uv_commutation_experiment(&cfg.plan(), &schedules)?;
    if cfg.model == Model::PauliFierz && !cfg.uv.wick_cutoffs.is_empty() {
        let eps = cfg.sweep.epsilons()[0];
        let slope = wick_cutoff_slope(&setup.basis, cfg.dispersion, eps, &cfg.uv.wick_cutoffs)?;
        rep.notes.push(format!("wick constant log-log slope in the cutoff at eps {eps}: {slope:.6}"));
    }
    write_report(art, "uv_sweep", &mut rep)?;
    let verdicts: Vec<VerdictRow> = rep
        .verdicts
        .iter()
        .map(|v| VerdictRow { operation: "uv_sweep".into(), criterion: v.criterion.clone(), passed: v.passed, detail: v.detail.clone() })
        .collect();
    let rows: Vec<Vec<String>> = verdicts.iter().map(|v| vec![v.operation.clone(), v.criterion.clone(), v.passed.to_string(), v.detail.clone()]).collect();
    art.csv("verdicts.csv", &["operation", "criterion", "passed", "detail"], &rows)?;
    verdict_failure(&verdicts)
}
