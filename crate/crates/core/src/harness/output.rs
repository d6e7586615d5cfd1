use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::fixedpoint::{QFormat, RoundingMode};
use crate::kernels::{read_events, read_weights, AddMode, RsnnTopology};
use crate::reference::poisson_pmf;
use crate::LANES;

use super::config::{Experiment, ExperimentSpec};
use super::experiments::*;
use super::HarnessError;

/// Histogram bin width for rounding errors, in ulps.
const ERROR_BIN: f64 = 1.0 / 16.0;

fn writer(dir: &Path, name: &str) -> Result<csv::Writer<fs::File>, HarnessError> {
    fs::create_dir_all(dir)?;
    Ok(csv::Writer::from_path(dir.join(name))?)
}

fn f(x: f64) -> String {
    format!("{x:.6}")
}

fn write_rounding(dir: &Path, hist: &RoundingHist) -> Result<(), HarnessError> {
    let mut w = writer(dir, "rounding_hist.csv")?;
    w.write_record(["mode", "error_low_ulp", "error_high_ulp", "count"])?;
    for (mode, errors) in &hist.errors {
        let mut bins = vec![0u64; (2.0 / ERROR_BIN) as usize];
        for e in errors {
            let i = ((e + 1.0) / ERROR_BIN).floor().clamp(0.0, (bins.len() - 1) as f64) as usize;
            bins[i] += 1;
        }
        for (i, count) in bins.iter().enumerate() {
            let lo = -1.0 + i as f64 * ERROR_BIN;
            w.write_record([mode.mnemonic().to_string(), f(lo), f(lo + ERROR_BIN), count.to_string()])?;
        }
    }
    w.flush()?;

    let mut w = writer(dir, "rounding_summary.csv")?;
    w.write_record([
        "mode",
        "pairs",
        "mean_error_ulp",
        "se_error_ulp",
        "sd_error_ulp",
        "min_error_ulp",
        "max_error_ulp",
    ])?;
    for mode in RoundingMode::ALL {
        let s = hist.summary(mode);
        w.write_record([
            mode.mnemonic().to_string(),
            s.n.to_string(),
            f(s.mean),
            f(s.se),
            f(s.sd),
            f(s.min),
            f(s.max),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn rounding_text(hist: &RoundingHist) -> String {
    let mut s = String::new();
    for mode in RoundingMode::ALL {
        let e = hist.summary(mode);
        let _ = writeln!(
            s,
            "  {:>2}: mean {:+.4} ulp (se {:.4}), range [{:+.4}, {:+.4}]",
            mode.mnemonic(),
            e.mean,
            e.se,
            e.min,
            e.max
        );
    }
    s
}

fn write_poisson(dir: &Path, run: &PoissonRun) -> Result<(), HarnessError> {
    let max = run.variates.iter().copied().max().unwrap_or(0);
    let mut w = writer(dir, "poisson_hist.csv")?;
    w.write_record(["k", "count", "frequency", "pmf"])?;
    for k in 0..=max.max(20) {
        let count = run.variates.iter().filter(|&&v| v == k).count();
        let freq = count as f64 / run.variates.len() as f64;
        w.write_record([k.to_string(), count.to_string(), f(freq), f(poisson_pmf(run.lambda, k as u64))])?;
    }
    w.flush()?;

    let mut w = writer(dir, "poisson_stats.csv")?;
    w.write_record([
        "lambda",
        "variates",
        "mean",
        "chi_square",
        "degrees_of_freedom",
        "critical_0.001",
        "passed",
        "cycles",
        "cycles_per_32_variates",
    ])?;
    w.write_record([
        f(run.lambda),
        run.variates.len().to_string(),
        f(run.mean()),
        f(run.gof.statistic),
        run.gof.degrees_of_freedom.to_string(),
        f(run.gof.critical),
        run.gof.passed().to_string(),
        run.cycles.to_string(),
        f(run.cycles_per_vector()),
    ])?;
    w.flush()?;
    Ok(())
}

fn poisson_text(run: &PoissonRun) -> String {
    format!(
        "  lambda {}: {} variates, mean {:.4}, chi2 {:.2} (df {}, critical {:.2}) {}, {:.1} cycles per 32 variates\n",
        run.lambda,
        run.variates.len(),
        run.mean(),
        run.gof.statistic,
        run.gof.degrees_of_freedom,
        run.gof.critical,
        if run.gof.passed() { "pass" } else { "FAIL" },
        run.cycles_per_vector()
    )
}

fn parse_configs(text: &str) -> Result<Vec<(RoundingMode, AddMode)>, HarnessError> {
    text.split(',')
        .map(|item| {
            let (r, a) = item.trim().split_once('/').unwrap_or((item.trim(), "saturate"));
            let rounding = RoundingMode::from_mnemonic(r)
                .ok_or_else(|| HarnessError::Config(format!("unknown rounding `{r}`")))?;
            let add = AddMode::from_name(a).ok_or_else(|| HarnessError::Config(format!("unknown add mode `{a}`")))?;
            Ok((rounding, add))
        })
        .collect()
}

/// The regime's default stimulus with any overrides from `spec`.
fn stimulus_spec(spec: &ExperimentSpec, regime: Regime) -> Result<StimulusSpec, HarnessError> {
    let mut s = StimulusSpec::for_regime(regime);
    if let Some(text) = spec.params.get("segments") {
        s.segments = text
            .split(',')
            .map(|seg| {
                let (steps, rate) = seg
                    .trim()
                    .split_once(':')
                    .ok_or_else(|| HarnessError::Config(format!("segment `{seg}` is not steps:rate")))?;
                let bad = || HarnessError::Config(format!("bad segment `{seg}`"));
                Ok((steps.parse().map_err(|_| bad())?, rate.parse().map_err(|_| bad())?))
            })
            .collect::<Result<_, HarnessError>>()?;
    }
    s.inputs = spec.get("inputs", s.inputs)?;
    s.weight = spec.get("weight", s.weight)?;
    s.params.tau_m = spec.get("tau_m", s.params.tau_m)?;
    s.params.tau_a = spec.get("tau_a", s.params.tau_a)?;
    s.params.v_th = spec.get("v_th", s.params.v_th)?;
    s.params.beta = spec.get("beta", s.params.beta)?;
    Ok(s)
}

fn write_alif(dir: &Path, regime: Regime, rows: &[AlifCompareRow]) -> Result<(), HarnessError> {
    let mut w = writer(dir, &format!("alif_compare_{}.csv", regime.name()))?;
    w.write_record(["config", "repeats", "nrmse_v_mean", "nrmse_v_sd", "nrmse_a_mean", "nrmse_a_sd"])?;
    for row in rows {
        let (vm, vs) = row.v_summary();
        let (am, asd) = row.a_summary();
        w.write_record([row.label(), row.nrmse_v.len().to_string(), f(vm), f(vs), f(am), f(asd)])?;
    }
    w.flush()?;

    let mut w = writer(dir, &format!("alif_compare_{}_runs.csv", regime.name()))?;
    w.write_record(["config", "seed", "nrmse_v", "nrmse_a"])?;
    for row in rows {
        for ((seed, v), a) in row.seeds.iter().zip(&row.nrmse_v).zip(&row.nrmse_a) {
            w.write_record([row.label(), seed.to_string(), f(*v), f(*a)])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn alif_text(regime: Regime, rows: &[AlifCompareRow]) -> String {
    let mut s = format!("  regime {}:\n", regime.name());
    for row in rows {
        let (vm, vs) = row.v_summary();
        let (am, asd) = row.a_summary();
        let _ = writeln!(s, "    {:<12} NRMSE V {vm:.4} +- {vs:.4}, A {am:.4} +- {asd:.4}", row.label());
    }
    s
}

fn rsnn_setup(spec: &ExperimentSpec) -> Result<RsnnSetup, HarnessError> {
    let steps = spec.get("steps", 100usize)?;
    let mut setup = RsnnSetup::generated(
        spec.get("n_input", 64usize)?,
        spec.get("n_hidden", 256usize)?,
        spec.get("n_output", 20usize)?,
        steps,
        spec.get("input_rate", 0.02f64)?,
        spec.seed,
    );
    let files = ["w_in", "w_rec", "w_out"].map(|k| spec.params.get(k));
    if files.iter().any(Option::is_some) {
        let [w_in, w_rec, w_out] = files.map(|p| {
            p.ok_or_else(|| HarnessError::Config("w_in, w_rec and w_out must be given together".into()))
                .and_then(|p| Ok(read_weights(fs::File::open(p)?)?))
        });
        let (w_in, w_rec, w_out) = (w_in?, w_rec?, w_out?);
        setup.num.weight_format = w_in.format;
        setup.topology =
            RsnnTopology { n_input: w_in.rows, n_hidden: w_in.cols, n_output: w_out.cols, w_in, w_rec, w_out };
    }
    if let Some(path) = spec.params.get("events") {
        setup.events = read_events(fs::File::open(path)?)?;
    }
    if let Some(r) = spec.params.get("rounding") {
        setup.num.rounding =
            RoundingMode::from_mnemonic(r).ok_or_else(|| HarnessError::Config(format!("unknown rounding `{r}`")))?;
    }
    Ok(setup)
}

fn write_rsnn(dir: &Path, run: &RsnnRun, n_output: usize) -> Result<(), HarnessError> {
    let mut w = writer(dir, "rsnn_raster.csv")?;
    w.write_record(["timestep", "neuron"])?;
    for (t, row) in run.trace.masks.iter().enumerate() {
        for (word, mask) in row.iter().enumerate() {
            for bit in (0..LANES).filter(|b| mask >> b & 1 == 1) {
                w.write_record([t.to_string(), (word * LANES + bit).to_string()])?;
            }
        }
    }
    w.flush()?;

    let mut w = writer(dir, "rsnn_output.csv")?;
    w.write_record(["class", "readout_raw", "predicted"])?;
    for c in 0..n_output {
        w.write_record([c.to_string(), run.output[c].to_string(), (c == run.prediction).to_string()])?;
    }
    w.flush()?;

    let mut w = writer(dir, "rsnn_mix.csv")?;
    w.write_record(["region", "class", "retired", "fraction"])?;
    for row in crate::machine::instruction_mix(&run.stats) {
        w.write_record([row.region.clone(), row.class.name().to_string(), row.count.to_string(), f(row.fraction)])?;
    }
    w.flush()?;

    let mut w = writer(dir, "rsnn_cycles.csv")?;
    w.write_record(["region", "cycles", "cycles_per_timestep"])?;
    for (name, cycles) in run.stats.region_names.iter().zip(&run.stats.cycles) {
        w.write_record([name.clone(), cycles.to_string(), f(*cycles as f64 / run.steps as f64)])?;
    }
    w.write_record(["total".to_string(), run.cycles.to_string(), f(run.cycles_per_step())])?;
    w.flush()?;
    Ok(())
}

fn rsnn_text(run: &RsnnRun) -> String {
    format!(
        "  {} steps, {:.1} cycles/step, neuron update {:.2} cycles/vector, spike processing vmem:valu {:.2}, hidden rate {:.4}/step, prediction {}{}\n",
        run.steps,
        run.cycles_per_step(),
        run.update_cycles_per_vector(),
        run.spike_memory_alu_ratio(),
        run.mean_hidden_rate(),
        run.prediction,
        match run.oracle_match {
            Some(true) => ", oracle match",
            Some(false) => ", ORACLE MISMATCH",
            None => "",
        }
    )
}

fn write_mix(dir: &Path, mixes: &[KernelMix]) -> Result<(), HarnessError> {
    let mut w = writer(dir, "instr_mix.csv")?;
    w.write_record(["kernel", "region", "class", "retired", "fraction"])?;
    for mix in mixes {
        for row in &mix.rows {
            w.write_record([
                mix.kernel.to_string(),
                row.region.clone(),
                row.class.name().to_string(),
                row.count.to_string(),
                f(row.fraction),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn mix_text(mixes: &[KernelMix]) -> String {
    let mut s = String::new();
    for mix in mixes {
        let mut regions: Vec<&str> = mix.rows.iter().map(|r| r.region.as_str()).collect();
        regions.dedup();
        for region in regions {
            let parts: Vec<String> = mix
                .rows
                .iter()
                .filter(|r| r.region == region && r.count > 0)
                .map(|r| format!("{} {:.1}%", r.class.name(), 100.0 * r.fraction))
                .collect();
            let _ = writeln!(s, "  {}/{}: {}", mix.kernel, region, parts.join(", "));
        }
    }
    s
}

/// Runs `spec`, writes its CSV files under `spec.out`, and returns a
/// human-readable summary.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<String, HarnessError> {
    let dir = spec.out.as_path();
    let seed = spec.seed;
    let mut text = format!("{} (seed {seed})\n", spec.experiment);
    match spec.experiment {
        Experiment::RoundingHist => {
            let hist = run_rounding_hist(spec.get("n_pairs", 21760usize)?, seed)?;
            write_rounding(dir, &hist)?;
            text += &rounding_text(&hist);
        }
        Experiment::Poisson => {
            let run = run_poisson(spec.get("lambda", 5.0)?, spec.get("n", 3200usize)?, seed)?;
            write_poisson(dir, &run)?;
            text += &poisson_text(&run);
            if !run.gof.passed() {
                return Err(HarnessError::Check(format!("{text}goodness-of-fit test failed")));
            }
        }
        Experiment::AlifCompare => {
            let regime_name = spec.get_str("regime", "pause");
            let regimes =
                match regime_name {
                    "both" => vec![Regime::Pause, Regime::Staircase],
                    name => vec![Regime::from_name(name)
                        .ok_or_else(|| HarnessError::Config(format!("unknown regime `{name}`")))?],
                };
            let format =
                QFormat::new(spec.get("state_frac_bits", 12u8)?).map_err(|e| HarnessError::Config(e.to_string()))?;
            for regime in regimes {
                let configs = match spec.params.get("configs") {
                    Some(c) => parse_configs(c)?,
                    None => regime.default_configs(),
                };
                let stimulus = stimulus_spec(spec, regime)?;
                let rows = run_alif_compare(&stimulus, &configs, format, spec.repeats, seed)?;
                write_alif(dir, regime, &rows)?;
                text += &alif_text(regime, &rows);
            }
        }
        Experiment::Rsnn => {
            let setup = rsnn_setup(spec)?;
            let run = run_rsnn(&setup, seed, spec.get("verify", true)?)?;
            write_rsnn(dir, &run, setup.topology.n_output)?;
            text += &rsnn_text(&run);
            if run.oracle_match == Some(false) {
                return Err(HarnessError::Check(format!("{text}simulator diverged from the host oracle")));
            }
        }
        Experiment::InstrMix => {
            let mixes = run_instr_mix(seed)?;
            write_mix(dir, &mixes)?;
            text += &mix_text(&mixes);
        }
        Experiment::Report => {
            for experiment in [
                Experiment::RoundingHist,
                Experiment::Poisson,
                Experiment::AlifCompare,
                Experiment::Rsnn,
                Experiment::InstrMix,
            ] {
                let mut sub = ExperimentSpec { experiment, ..spec.clone() };
                if experiment == Experiment::AlifCompare {
                    sub.params.entry("regime".into()).or_insert_with(|| "both".into());
                }
                let part = run_experiment(&sub)?;
                text.push_str(&part);
            }
            fs::create_dir_all(dir)?;
            fs::write(dir.join("report.txt"), &text)?;
        }
    }
    Ok(text)
}
