use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::fixedpoint::{QFormat, RoundingMode};
use crate::isa::OpClass;
use crate::kernels::{
    self, argmax, build_alif, build_multiply_batch, build_poisson, build_rsnn, AddMode, AlifParams, InputEvent,
    NumericConfig, RsnnOracle, RsnnTopology, RsnnTrace, NEURON_UPDATE, SPIKE_PROCESSING,
};
use crate::machine::{instruction_mix, ExecStats, MixRow, Vector};
use crate::reference::{self, alif_reference, chi_square_gof, nrmse, poisson_pmf, GofResult};
use crate::LANES;

use super::HarnessError;

const CYCLE_BUDGET: u64 = 2_000_000_000;

/// Seed of repeat `r` in a batch starting at `base`.
pub(crate) fn repeat_seed(base: u64, r: usize) -> u64 {
    base.wrapping_add(r as u64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorSummary {
    pub n: usize,
    pub mean: f64,
    pub se: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
}

impl ErrorSummary {
    pub fn of(values: &[f64]) -> Self {
        let (mean, se) = reference::mean_and_se(values);
        ErrorSummary {
            n: values.len(),
            mean,
            se,
            sd: se * (values.len() as f64).sqrt(),
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// Errors of simulated S0.15 products against the exact product, in ulps.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundingHist {
    pub errors: Vec<(RoundingMode, Vec<f64>)>,
    pub cycles: u64,
}

impl RoundingHist {
    pub fn errors_for(&self, mode: RoundingMode) -> &[f64] {
        &self.errors.iter().find(|(m, _)| *m == mode).expect("every mode is run").1
    }

    pub fn summary(&self, mode: RoundingMode) -> ErrorSummary {
        ErrorSummary::of(self.errors_for(mode))
    }
}

/// Multiplies `n_pairs` uniformly random S0.15 pairs on the simulator in
/// every rounding mode.
pub fn run_rounding_hist(n_pairs: usize, seed: u64) -> Result<RoundingHist, HarnessError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a: Vec<i16> = (0..n_pairs).map(|_| rng.random()).collect();
    let b: Vec<i16> = (0..n_pairs).map(|_| rng.random()).collect();
    let batch = build_multiply_batch(&a, &b, seed)?;
    let machine = kernels::execute(&batch.program, CYCLE_BUDGET)?;
    let mut errors = Vec::new();
    for mode in RoundingMode::ALL {
        let products = batch.read_products(&machine, mode)?;
        let e = products
            .iter()
            .zip(a.iter().zip(&b))
            .map(|(&p, (&x, &y))| p as f64 - x as f64 * y as f64 / 32768.0)
            .collect();
        errors.push((mode, e));
    }
    Ok(RoundingHist { errors, cycles: machine.cycles() })
}

#[derive(Debug, Clone)]
pub struct PoissonRun {
    pub lambda: f64,
    pub variates: Vec<u32>,
    pub cycles: u64,
    pub gof: GofResult,
}

impl PoissonRun {
    pub fn mean(&self) -> f64 {
        self.variates.iter().map(|&k| k as f64).sum::<f64>() / self.variates.len() as f64
    }

    pub fn cycles_per_vector(&self) -> f64 {
        self.cycles as f64 / self.variates.len().div_ceil(LANES) as f64
    }
}

pub fn run_poisson(lambda: f64, n: usize, seed: u64) -> Result<PoissonRun, HarnessError> {
    let kernel = build_poisson(lambda, n, seed)?;
    let machine = kernels::execute(&kernel.program, CYCLE_BUDGET)?;
    let variates = kernel.read_variates(&machine)?;
    let samples: Vec<u64> = variates.iter().map(|&k| k as u64).collect();
    let gof = chi_square_gof(&samples, |k| poisson_pmf(lambda, k));
    Ok(PoissonRun { lambda, variates, cycles: machine.cycles(), gof })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    /// High-rate input, a long low-rate pause, then high-rate input again.
    Pause,
    /// Input rate rising in stairs until the adaptation variable leaves the
    /// state format's range.
    Staircase,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::Pause => "pause",
            Regime::Staircase => "staircase",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        [Regime::Pause, Regime::Staircase].into_iter().find(|r| r.name() == s)
    }

    /// The configurations each regime is compared across.
    pub fn default_configs(self) -> Vec<(RoundingMode, AddMode)> {
        match self {
            Regime::Pause => RoundingMode::ALL.iter().map(|&r| (r, AddMode::Saturate)).collect(),
            Regime::Staircase => {
                vec![(RoundingMode::Stochastic, AddMode::Wrap), (RoundingMode::Stochastic, AddMode::Saturate)]
            }
        }
    }
}

/// Input spikes shared by all 32 lanes: `counts[t]` presynaptic spikes
/// of real weight `weight` arrive during step `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlifStimulus {
    pub counts: Vec<u16>,
    pub weight: f64,
    pub params: AlifParams,
}

/// Piecewise-constant input rates driving one ALIF population.
#[derive(Debug, Clone, PartialEq)]
pub struct StimulusSpec {
    /// `(steps, spike probability per input per step)` in order.
    pub segments: Vec<(usize, f64)>,
    /// Independent Bernoulli inputs converging on each neuron.
    pub inputs: usize,
    pub weight: f64,
    pub params: AlifParams,
}

impl StimulusSpec {
    pub fn for_regime(regime: Regime) -> Self {
        let segments = match regime {
            Regime::Pause => vec![(500, 0.005), (1000, 0.0005), (500, 0.005)],
            Regime::Staircase => vec![(500, 0.001), (500, 0.002), (500, 0.004), (500, 0.0065)],
        };
        StimulusSpec { segments, inputs: 100, weight: 0.05, params: AlifParams::default() }
    }

    pub fn steps(&self) -> usize {
        self.segments.iter().map(|s| s.0).sum()
    }

    /// Binomial spike counts drawn from `seed`.
    pub fn generate(&self, seed: u64) -> AlifStimulus {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xA11F);
        let mut counts = Vec::with_capacity(self.steps());
        for &(steps, rate) in &self.segments {
            for _ in 0..steps {
                counts.push((0..self.inputs).filter(|_| rng.random_bool(rate)).count() as u16);
            }
        }
        AlifStimulus { counts, weight: self.weight, params: self.params }
    }
}

/// The default stimulus of `regime`, drawn from `seed`.
pub fn alif_stimulus(regime: Regime, seed: u64) -> AlifStimulus {
    StimulusSpec::for_regime(regime).generate(seed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlifCompareRow {
    pub rounding: RoundingMode,
    pub add_mode: AddMode,
    /// Per repeat, in seed order: lane-averaged NRMSE of V and of A.
    pub seeds: Vec<u64>,
    pub nrmse_v: Vec<f64>,
    pub nrmse_a: Vec<f64>,
}

impl AlifCompareRow {
    pub fn label(&self) -> String {
        format!("{}/{}", self.rounding.mnemonic(), self.add_mode.name())
    }

    pub fn v_summary(&self) -> (f64, f64) {
        reference::mean_and_sd(&self.nrmse_v)
    }

    pub fn a_summary(&self) -> (f64, f64) {
        reference::mean_and_sd(&self.nrmse_a)
    }
}

/// Lane-averaged NRMSE of V and A for one stimulus and configuration.
pub fn alif_errors(stimulus: &AlifStimulus, num: &NumericConfig, seed: u64) -> Result<(f64, f64), HarnessError> {
    let counts: Vec<[u16; LANES]> = stimulus.counts.iter().map(|&c| [c; LANES]).collect();
    let kernel = build_alif(&stimulus.params, num, stimulus.weight, &counts, seed)?;
    let machine = kernels::execute(&kernel.program, CYCLE_BUDGET)?;
    let run = kernel.read_run(&machine)?;
    let w = kernel.weight.to_real();
    let input: Vec<f64> = stimulus.counts.iter().map(|&c| c as f64 * w).collect();
    let reference = alif_reference(&stimulus.params, &input);
    let (mut ev, mut ea) = (0.0, 0.0);
    for lane in 0..LANES {
        ev += nrmse(&run.lane_v(lane), &reference.v).map_err(|e| HarnessError::Check(e.to_string()))?;
        ea += nrmse(&run.lane_a(lane), &reference.a).map_err(|e| HarnessError::Check(e.to_string()))?;
    }
    Ok((ev / LANES as f64, ea / LANES as f64))
}

/// NRMSE against the double-precision reference for each configuration,
/// over `repeats` seeds run concurrently.
pub fn run_alif_compare(
    stimulus: &StimulusSpec,
    configs: &[(RoundingMode, AddMode)],
    state_format: QFormat,
    repeats: usize,
    seed: u64,
) -> Result<Vec<AlifCompareRow>, HarnessError> {
    let seeds: Vec<u64> = (0..repeats).map(|r| repeat_seed(seed, r)).collect();
    let mut per_seed: Vec<(u64, Vec<(f64, f64)>)> = seeds
        .par_iter()
        .map(|&s| {
            let stimulus = stimulus.generate(s);
            let errs = configs
                .iter()
                .map(|&(rounding, add_mode)| {
                    let num = NumericConfig { state_format, rounding, add_mode, ..Default::default() };
                    alif_errors(&stimulus, &num, s)
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok((s, errs))
        })
        .collect::<Result<_, HarnessError>>()?;
    per_seed.sort_by_key(|(s, _)| *s);
    Ok(configs
        .iter()
        .enumerate()
        .map(|(i, &(rounding, add_mode))| AlifCompareRow {
            rounding,
            add_mode,
            seeds: per_seed.iter().map(|(s, _)| *s).collect(),
            nrmse_v: per_seed.iter().map(|(_, e)| e[i].0).collect(),
            nrmse_a: per_seed.iter().map(|(_, e)| e[i].1).collect(),
        })
        .collect())
}

/// A network, its input and how long to run it.
#[derive(Debug, Clone)]
pub struct RsnnSetup {
    pub topology: RsnnTopology,
    pub events: Vec<InputEvent>,
    pub steps: usize,
    pub num: NumericConfig,
    pub params: AlifParams,
}

impl RsnnSetup {
    /// Random network with Bernoulli input spike trains at `input_rate`
    /// per input per step.
    pub fn generated(
        n_input: usize,
        n_hidden: usize,
        n_output: usize,
        steps: usize,
        input_rate: f64,
        seed: u64,
    ) -> Self {
        let num = NumericConfig::default();
        let topology = RsnnTopology::random(n_input, n_hidden, n_output, [0.5, 0.08, 0.2], num.weight_format, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xE7E7);
        let mut events = Vec::new();
        for t in 0..steps {
            for neuron in 0..n_input {
                if rng.random_bool(input_rate) {
                    events.push(InputEvent { time: t as u32, neuron: neuron as u32 });
                }
            }
        }
        let params = AlifParams { tau_a: 200.0, beta: 0.05, ..AlifParams::default() };
        RsnnSetup { topology, events, steps, num, params }
    }
}

#[derive(Debug, Clone)]
pub struct RsnnRun {
    pub trace: RsnnTrace,
    pub output: Vector,
    pub prediction: usize,
    pub stats: ExecStats,
    pub cycles: u64,
    pub steps: usize,
    pub hidden_vectors: usize,
    /// Whether the simulator matched the host oracle, when checked.
    pub oracle_match: Option<bool>,
}

impl RsnnRun {
    pub fn cycles_per_step(&self) -> f64 {
        self.cycles as f64 / self.steps as f64
    }

    /// Average neuron-update cycles per hidden vector per step.
    pub fn update_cycles_per_vector(&self) -> f64 {
        self.stats.cycles_in(NEURON_UPDATE) as f64 / (self.steps * self.hidden_vectors) as f64
    }

    /// Vector memory to vector ALU instructions retired in spike processing.
    pub fn spike_memory_alu_ratio(&self) -> f64 {
        self.stats.retired_in(SPIKE_PROCESSING, OpClass::VectorMemory) as f64
            / self.stats.retired_in(SPIKE_PROCESSING, OpClass::VectorAlu) as f64
    }

    pub fn mean_hidden_rate(&self) -> f64 {
        let spikes: u32 = self.trace.spike_counts().iter().sum();
        spikes as f64 / (self.steps * self.hidden_vectors * LANES) as f64
    }
}

pub fn run_rsnn(setup: &RsnnSetup, seed: u64, check_oracle: bool) -> Result<RsnnRun, HarnessError> {
    let kernel = build_rsnn(&setup.topology, &setup.num, &setup.params, &setup.events, setup.steps, seed, true)?;
    let machine = kernels::execute(&kernel.program, CYCLE_BUDGET)?;
    let trace = kernel.read_trace(&machine)?;
    let output = kernel.read_output(&machine)?;
    let oracle_match = if check_oracle {
        let mut oracle = RsnnOracle::new(&setup.topology, &setup.num, &setup.params, &setup.events, seed)?;
        Some(oracle.run(setup.steps) == trace && oracle.output() == output)
    } else {
        None
    };
    Ok(RsnnRun {
        prediction: argmax(&output, setup.topology.n_output),
        output,
        trace,
        stats: machine.stats().clone(),
        cycles: machine.cycles(),
        steps: setup.steps,
        hidden_vectors: setup.topology.hidden_vectors(),
        oracle_match,
    })
}

/// Instruction mix of one kernel run.
#[derive(Debug, Clone)]
pub struct KernelMix {
    pub kernel: &'static str,
    pub rows: Vec<MixRow>,
}

/// Instruction mixes of the Poisson, ALIF and network kernels.
pub fn run_instr_mix(seed: u64) -> Result<Vec<KernelMix>, HarnessError> {
    let poisson = build_poisson(5.0, 3200, seed)?;
    let m = kernels::execute(&poisson.program, CYCLE_BUDGET)?;
    let mut out = vec![KernelMix { kernel: "poisson", rows: instruction_mix(m.stats()) }];

    let stimulus = alif_stimulus(Regime::Pause, seed);
    let counts: Vec<[u16; LANES]> = stimulus.counts.iter().map(|&c| [c; LANES]).collect();
    let alif = build_alif(&stimulus.params, &NumericConfig::default(), stimulus.weight, &counts, seed)?;
    let m = kernels::execute(&alif.program, CYCLE_BUDGET)?;
    out.push(KernelMix { kernel: "alif", rows: instruction_mix(m.stats()) });

    let run = run_rsnn(&RsnnSetup::generated(64, 256, 20, 100, 0.02, seed), seed, false)?;
    out.push(KernelMix { kernel: "rsnn", rows: instruction_mix(&run.stats) });
    Ok(out)
}
