//! One function per subcommand. Each computes everything in memory and
//! returns the files to write.

use anyhow::Result;
use rayon::prelude::*;
use serde::Serialize;

use phonon_qsim::circuits::AnsatzKind;
use phonon_qsim::experiment::{
    depolarization_sweep, mitigation_study, noiseless_parameters, structure_estimate, study_csv, sweep_csv as noise_csv,
    StructureSettings,
};
use phonon_qsim::hamiltonian::{exact_ground_energy, subspace_ground_energy};
use phonon_qsim::mitigation::MitigationPlan;
use phonon_qsim::thermo::{
    fit_frequency_scale, sweep, sweep_csv, StructureEstimate, StructureSource, ThermalConfig, CALIBRATION_HEAT,
    CALIBRATION_KAPPA, CALIBRATION_T,
};
use phonon_qsim::vqe::{self, convergence_report, EstimatorMode};

use crate::config::RunConfig;
use crate::output::Outputs;
use crate::svg::{bar_chart, line_chart, Series};

#[derive(Serialize)]
struct HamiltonianReport {
    qubits: usize,
    physical_terms: usize,
    penalized_terms: usize,
    hermitian: bool,
    penalty_weight: f64,
    ground_energy: f64,
    one_hot_ground_energy: f64,
}

pub fn hamiltonian(cfg: &RunConfig) -> Result<Outputs> {
    let h = cfg.system.hamiltonian()?;
    let report = HamiltonianReport {
        qubits: h.width(),
        physical_terms: h.physical.len(),
        penalized_terms: h.pauli.len(),
        hermitian: h.physical.is_hermitian() && h.pauli.is_hermitian(),
        penalty_weight: h.penalty_weight,
        ground_energy: exact_ground_energy(&h)?,
        one_hot_ground_energy: subspace_ground_energy(&h)?,
    };
    let mut out = Outputs::default();
    out.say(format!(
        "{} qubits, {} terms, hermitian {}, ground energy {:.6}",
        report.qubits, report.physical_terms, report.hermitian, report.ground_energy
    ));
    out.file("hamiltonian.txt", h.physical.to_text());
    out.file("hamiltonian_penalized.txt", h.pauli.to_text());
    out.file("hamiltonian_report.json", serde_json::to_string_pretty(&report)? + "\n");
    Ok(out)
}

pub fn vqe(cfg: &RunConfig) -> Result<Outputs> {
    let h = cfg.system.hamiltonian()?;
    let reference = exact_ground_energy(&h)?;
    let ansatz = cfg.ansatz.kind.build(h.width(), cfg.ansatz.reps)?;
    let mode = cfg.optimizer.shots.map_or(EstimatorMode::Exact, EstimatorMode::Shots);
    let noise = if cfg.optimizer.noisy { Some(cfg.noise.model()?) } else { None };
    let runs = cfg
        .optimizer
        .kinds
        .par_iter()
        .map(|&kind| {
            let spec = cfg.optimizer.spec(kind, cfg.seed)?;
            let run = vqe::minimize(&ansatz, &h, &spec, mode, noise.as_ref(), None)?;
            let report = convergence_report(&run, reference)?;
            Ok((kind, run, report))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut out = Outputs::default();
    let mut history = String::from("optimizer,evaluation,energy\n");
    let mut summary = String::from("optimizer,best_energy,reference,gap,evaluations,converged,first_within_1e-3,first_within_1e-6\n");
    let mut series = Vec::new();
    for (kind, run, report) in &runs {
        for (i, e) in &run.history {
            history.push_str(&format!("{},{i},{e:?}\n", kind.label()));
        }
        let first = |k: usize| report.iterations_to_tolerance[k].1.map_or(String::new(), |i| i.to_string());
        summary.push_str(&format!(
            "{},{:?},{:?},{:e},{},{},{},{}\n",
            kind.label(),
            run.best_energy,
            reference,
            report.final_gap,
            run.history.len(),
            run.converged,
            first(0),
            first(1)
        ));
        out.say(format!("{:<24} energy {:.9}  gap {:.2e}", kind.label(), run.best_energy, report.final_gap));
        series.push(Series {
            label: kind.label().to_string(),
            points: report.envelope.iter().map(|&(i, e)| (i as f64, (e - reference).abs())).collect(),
            band: None,
        });
    }
    out.file("vqe_history.csv", history);
    out.file("vqe_summary.csv", summary);
    out.file(
        "vqe_convergence.svg",
        line_chart(
            &format!("Convergence, {} ansatz", cfg.ansatz.kind.label()),
            "objective evaluations",
            "best |E - E_exact|",
            &series,
            true,
        ),
    );
    Ok(out)
}

pub fn noise_sweep(cfg: &RunConfig, fidelities: &[f64], kinds: &[AnsatzKind]) -> Result<Outputs> {
    let h = cfg.system.hamiltonian()?;
    let seeds: Vec<u64> = (0..cfg.sweep.repeats as u64).map(|i| cfg.seed.wrapping_add(i)).collect();
    let mut out = Outputs::default();
    let mut series = Vec::new();
    for &kind in kinds {
        let ansatz = kind.build(h.width(), cfg.ansatz.reps)?;
        let rows = depolarization_sweep(&ansatz, &h, fidelities, &seeds)?;
        for r in &rows {
            out.say(format!("{:<14} F={:<6} mean {:.2}% [{:.2}, {:.2}]", kind.label(), r.fidelity, r.mean, r.emin, r.emax));
        }
        series.push(Series {
            label: kind.label().to_string(),
            points: rows.iter().map(|r| (r.fidelity, r.mean)).collect(),
            band: Some(rows.iter().map(|r| (r.emin, r.emax)).collect()),
        });
        out.file(format!("noise_sweep_{}.csv", kind.label()), noise_csv(&rows));
    }
    out.file(
        "noise_sweep.svg",
        line_chart("Energy ratio under depolarization", "two-qubit gate fidelity", "E / E_exact (%)", &series, false),
    );
    Ok(out)
}

pub fn mitigate(cfg: &RunConfig) -> Result<Outputs> {
    let h = cfg.system.hamiltonian()?;
    let reference = exact_ground_energy(&h)?;
    let ansatz = cfg.ansatz.kind.build(h.width(), cfg.ansatz.reps)?;
    let params = noiseless_parameters(&ansatz, &h, cfg.seed)?;
    let strategies: Vec<(String, MitigationPlan)> = MitigationPlan::strategies()
        .into_iter()
        .map(|(name, mut plan)| {
            // tuning knobs come from the configured plan
            plan.zne_spec = cfg.mitigation.zne_spec.clone();
            plan.twirl_samples = cfg.mitigation.twirl_samples;
            plan.dd_suppression = cfg.mitigation.dd_suppression;
            (name.to_string(), plan)
        })
        .collect();
    let results = mitigation_study(
        &ansatz,
        &params,
        &h,
        &cfg.noise.model()?,
        &strategies,
        cfg.study.trials,
        cfg.study.shots,
        cfg.seed,
    )?;
    let mut out = Outputs::default();
    let mut trials = String::from("strategy,trial,energy\n");
    let mut bars = Vec::new();
    for r in &results {
        for (i, e) in r.energies.iter().enumerate() {
            trials.push_str(&format!("{},{i},{e:?}\n", r.strategy));
        }
        let err = r.median_error(reference);
        out.say(format!("{:<8} mean {:.4}  median |error| {:.4}  spread {:.4}", r.strategy, r.mean(), err, r.std()));
        bars.push((r.strategy.clone(), err / reference.abs(), r.std() / reference.abs()));
    }
    out.file("mitigation.csv", study_csv(&results, reference));
    out.file("mitigation_trials.csv", trials);
    out.file("mitigation.svg", bar_chart("Error mitigation", "median |E - E_ref| / |E_ref|", &bars));
    Ok(out)
}

pub fn kappa(cfg: &RunConfig) -> Result<Outputs> {
    let sys = cfg.system.system()?;
    let h = cfg.system.hamiltonian()?;
    let settings = StructureSettings {
        ansatz: cfg.ansatz.kind,
        reps: cfg.ansatz.reps,
        noise: cfg.noise.model()?,
        plan: cfg.mitigation.clone(),
        repeats: cfg.thermal.repeats,
        shots: cfg.study.shots,
        seed: cfg.seed,
    };
    let exact = structure_estimate(StructureSource::Exact, &sys, &h, &settings)?;
    let t = &cfg.thermal;
    let frequency_scale = match t.frequency_scale {
        Some(s) => s,
        None => fit_frequency_scale(sys.frequencies(), CALIBRATION_T, CALIBRATION_HEAT)?,
    };
    let mut thermal = ThermalConfig {
        temperatures: t.temperatures.clone(),
        group_velocity: t.group_velocity,
        volume: t.volume,
        frequency_scale,
        kappa_normalization: 1.0,
    };
    thermal.kappa_normalization = match t.kappa_normalization {
        Some(k) => k,
        None => CALIBRATION_KAPPA / thermal.point(&sys, CALIBRATION_T, &exact)?.kappa,
    };
    thermal.validate()?;

    let estimates: Vec<StructureEstimate> = t
        .sources
        .iter()
        .map(|&s| if s == StructureSource::Exact { Ok(exact) } else { structure_estimate(s, &sys, &h, &settings) })
        .collect::<phonon_qsim::Result<_>>()?;
    let mut out = Outputs::default();
    let mut csv = String::new();
    let mut series = Vec::new();
    for est in &estimates {
        let points = sweep(&thermal, &sys, est)?;
        let body = sweep_csv(&points);
        if csv.is_empty() {
            csv.push_str(&body);
        } else {
            csv.extend(body.lines().skip(1).map(|l| format!("{l}\n")));
        }
        out.say(format!(
            "{:<16} structure {:.6} ± {:.6}  kappa({}) = {:.3}",
            est.source.label(),
            est.value,
            est.std,
            points[0].temperature,
            points[0].kappa
        ));
        series.push(Series {
            label: est.source.label().to_string(),
            points: points.iter().map(|p| (p.temperature, p.kappa)).collect(),
            band: Some(points.iter().map(|p| (p.kappa - p.kappa_std, p.kappa + p.kappa_std)).collect()),
        });
    }
    out.file("kappa.csv", csv);
    out.file("kappa.svg", line_chart("Thermal conductivity", "temperature (K)", "kappa", &series, true));
    Ok(out)
}
