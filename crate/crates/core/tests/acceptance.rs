//! One pass/fail line per acceptance criterion. Runs without the libtest
//! harness so the lines are printed on success too.

mod common;

use std::collections::HashSet;
use std::mem::discriminant;
use std::process::ExitCode;

use fenn::assembler::Assembler;
use fenn::fixedpoint::{fx_mul_raw, RoundingMode};
use fenn::harness::{run_poisson, run_rsnn, Regime, RsnnSetup, StimulusSpec};
use fenn::isa::{Instruction, OpClass};
use fenn::kernels::{
    self, build_alif, build_multiply_batch, build_rsnn, AddMode, AlifParams, InputEvent, NumericConfig, RsnnOracle,
    RsnnTopology, NEURON_UPDATE, SPIKE_PROCESSING,
};
use fenn::machine::{Machine, MachineConfig};
use fenn::LANES;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use common::*;

const SEED: u64 = 42;
const BUDGET: u64 = 2_000_000_000;

type Criterion = (&'static str, fn() -> Verdict);

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn c1_round_trip() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let n = 200_000;
    let mut kinds = HashSet::new();
    let mut failures = 0;
    for _ in 0..n {
        let insn = random_instruction(&mut rng);
        kinds.insert(discriminant(&insn));
        let ok = insn.encode().ok().and_then(|w| Instruction::decode(w).ok()) == Some(insn);
        failures += usize::from(!ok);
    }
    verdict(
        failures == 0 && kinds.len() == 20,
        format!("{n} samples over {} instruction kinds, {failures} mismatches", kinds.len()),
    )
}

fn c2_exhaustive_entropy() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst = 0i64;
    for _ in 0..100 {
        let (a, b): (i16, i16) = loop {
            let pair = (rng.random(), rng.random());
            // -1 * -1 in S0.15 is +1, which S0.15 cannot hold.
            if pair != (i16::MIN, i16::MIN) {
                break pair;
            }
        };
        let sum: i64 = (0..1u32 << 15).map(|e| fx_mul_raw(a, b, 15, RoundingMode::Stochastic, e as u16) as i64).sum();
        worst = worst.max((sum - a as i64 * b as i64).abs());
    }
    verdict(worst == 0, format!("100 pairs, max |sum over 2^15 entropies - a*b| = {worst}"))
}

fn c3_rounding_histograms() -> Verdict {
    let n = 21760;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let a: Vec<i16> = (0..n).map(|_| rng.random()).collect();
    let b: Vec<i16> = (0..n).map(|_| rng.random()).collect();
    let batch = build_multiply_batch(&a, &b, SEED).expect("build");
    let machine = kernels::execute(&batch.program, BUDGET).expect("run");
    let errors = |mode| -> Vec<f64> {
        let p = batch.read_products(&machine, mode).expect("products");
        p.iter().zip(a.iter().zip(&b)).map(|(&p, (&x, &y))| p as f64 - x as f64 * y as f64 / 32768.0).collect()
    };
    let rz = errors(RoundingMode::RoundToZero);
    let rn = errors(RoundingMode::RoundToNearest);
    let sr = errors(RoundingMode::Stochastic);
    let rz_ok = rz.iter().all(|&e| e <= 0.0 && e > -1.0);
    let rn_ok = rn.iter().all(|&e| e.abs() <= 0.5);
    let mean = sr.iter().sum::<f64>() / n as f64;
    let var = sr.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (n - 1) as f64;
    let se = (var / n as f64).sqrt();
    verdict(
        rz_ok && rn_ok && mean.abs() <= 3.0 * se,
        format!(
            "{n} products; rz in (-1, 0]: {rz_ok}; rn within 0.5 ulp: {rn_ok}; sr mean {mean:+.5} ulp, 3 se = {:.5}",
            3.0 * se
        ),
    )
}

fn poisson5(k: u64) -> f64 {
    let ln = -5.0 + k as f64 * 5f64.ln() - (1..=k).map(|i| (i as f64).ln()).sum::<f64>();
    ln.exp()
}

fn c4_poisson_distribution() -> Verdict {
    let run = run_poisson(5.0, 3200, SEED).expect("poisson");
    let samples: Vec<u64> = run.variates.iter().map(|&k| k as u64).collect();
    let (stat, dof) = chi_square(&samples, poisson5);
    let critical = ChiSquared::new(dof as f64).expect("dof").inverse_cdf(0.999);
    let mean = samples.iter().sum::<u64>() as f64 / samples.len() as f64;
    let band = 3.0 * (5.0f64 / 3200.0).sqrt();
    verdict(
        samples.len() == 3200 && stat <= critical && (mean - 5.0).abs() <= band,
        format!("chi2 {stat:.2} (df {dof}, critical {critical:.2}), mean {mean:.4} (5 +- {band:.3})"),
    )
}

fn c5_poisson_throughput() -> Verdict {
    let run = run_poisson(5.0, 3200, SEED).expect("poisson");
    let per = run.cycles as f64 / (3200 / LANES) as f64;
    verdict((65.0..=100.0).contains(&per), format!("{per:.2} cycles per 32 variates (band [65, 100])"))
}

/// Mean lane-averaged NRMSE of V and A over 32 seeds for each config.
fn alif_errors(regime: Regime, configs: &[(RoundingMode, AddMode)]) -> Vec<(f64, f64)> {
    let spec = StimulusSpec::for_regime(regime);
    let per_seed: Vec<Vec<(f64, f64)>> = (0..32u64)
        .into_par_iter()
        .map(|r| {
            let seed = SEED + r;
            let stimulus = spec.generate(seed);
            let counts: Vec<[u16; LANES]> = stimulus.counts.iter().map(|&c| [c; LANES]).collect();
            let p: AlifParams = stimulus.params;
            configs
                .iter()
                .map(|&(rounding, add_mode)| {
                    let num = NumericConfig { rounding, add_mode, ..Default::default() };
                    let kernel = build_alif(&p, &num, stimulus.weight, &counts, seed).expect("build");
                    let machine = kernels::execute(&kernel.program, BUDGET).expect("run");
                    let run = kernel.read_run(&machine).expect("read");
                    let w = kernel.weight.to_real();
                    let input: Vec<f64> = stimulus.counts.iter().map(|&c| c as f64 * w).collect();
                    let alpha = (-1.0 / p.tau_m).exp();
                    let rho = (-1.0 / p.tau_a).exp();
                    let (v_ref, a_ref) = alif_f64(alpha, rho, p.v_th, p.beta, &input);
                    let (mut ev, mut ea) = (0.0, 0.0);
                    for lane in 0..LANES {
                        ev += nrmse_range(&run.lane_v(lane), &v_ref);
                        ea += nrmse_range(&run.lane_a(lane), &a_ref);
                    }
                    (ev / LANES as f64, ea / LANES as f64)
                })
                .collect()
        })
        .collect();
    (0..configs.len())
        .map(|i| {
            let n = per_seed.len() as f64;
            (per_seed.iter().map(|e| e[i].0).sum::<f64>() / n, per_seed.iter().map(|e| e[i].1).sum::<f64>() / n)
        })
        .collect()
}

fn c6_rounding_benefit() -> Verdict {
    let e = alif_errors(
        Regime::Pause,
        &[(RoundingMode::RoundToZero, AddMode::Saturate), (RoundingMode::Stochastic, AddMode::Saturate)],
    );
    let ((rz_v, rz_a), (sr_v, sr_a)) = (e[0], e[1]);
    verdict(
        sr_v <= 0.5 * rz_v && sr_a <= 0.5 * rz_a,
        format!(
            "pause, 32 seeds: V rz {rz_v:.4} sr {sr_v:.4} (ratio {:.3}), A rz {rz_a:.4} sr {sr_a:.4} (ratio {:.3}), need <= 0.5",
            sr_v / rz_v,
            sr_a / rz_a
        ),
    )
}

fn c7_saturation_rescue() -> Verdict {
    let e = alif_errors(
        Regime::Staircase,
        &[(RoundingMode::Stochastic, AddMode::Wrap), (RoundingMode::Stochastic, AddMode::Saturate)],
    );
    let ((wr_v, wr_a), (sat_v, sat_a)) = (e[0], e[1]);
    verdict(
        wr_v >= 2.0 * sat_v && wr_a >= 2.0 * sat_a,
        format!(
            "staircase, 32 seeds: V wrap {wr_v:.4} sat {sat_v:.4} (ratio {:.2}), A wrap {wr_a:.4} sat {sat_a:.4} (ratio {:.2}), need >= 2",
            wr_v / sat_v,
            wr_a / sat_a
        ),
    )
}

fn c8_oracle_equivalence() -> Verdict {
    let results: Vec<(usize, bool)> = (0..20u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(SEED * 1000 + i);
            let n_hidden = [32, 64, 128][i as usize % 3];
            let n_input = rng.random_range(1..=96);
            let n_output = rng.random_range(1..=LANES);
            let num = NumericConfig {
                rounding: RoundingMode::ALL[rng.random_range(0..3)],
                add_mode: if rng.random() { AddMode::Saturate } else { AddMode::Wrap },
                ..Default::default()
            };
            let scales = [rng.random_range(0.1..0.8), rng.random_range(0.02..0.2), rng.random_range(0.05..0.5)];
            let topology = RsnnTopology::random(n_input, n_hidden, n_output, scales, num.weight_format, rng.random());
            let rate = rng.random_range(0.01..0.1);
            let mut events = Vec::new();
            for t in 0..100u32 {
                for neuron in 0..n_input as u32 {
                    if rng.random_bool(rate) {
                        events.push(InputEvent { time: t, neuron });
                    }
                }
            }
            let params = AlifParams {
                tau_a: rng.random_range(50.0..2000.0),
                beta: rng.random_range(0.0..0.1),
                ..Default::default()
            };
            let seed = rng.random();
            let kernel = build_rsnn(&topology, &num, &params, &events, 100, seed, true).expect("build");
            let machine = kernels::execute(&kernel.program, BUDGET).expect("run");
            let trace = kernel.read_trace(&machine).expect("trace");
            let mut oracle = RsnnOracle::new(&topology, &num, &params, &events, seed).expect("oracle");
            let expected = oracle.run(100);
            let spikes: u32 = trace.spike_counts().iter().sum();
            (spikes as usize, trace == expected && kernel.read_output(&machine).expect("y") == oracle.output())
        })
        .collect();
    let matched = results.iter().filter(|r| r.1).count();
    let spikes: usize = results.iter().map(|r| r.0).sum();
    verdict(
        matched == 20,
        format!("{matched}/20 topologies bit-exact over 100 steps ({spikes} hidden spikes in total)"),
    )
}

fn rsnn_256() -> fenn::harness::RsnnRun {
    run_rsnn(&RsnnSetup::generated(64, 256, 20, 100, 0.02, SEED), SEED, false).expect("rsnn")
}

fn c9_update_budget() -> Verdict {
    let run = rsnn_256();
    let per = run.stats.cycles_in(NEURON_UPDATE) as f64 / (100 * 256 / LANES) as f64;
    verdict(per <= 30.0, format!("{per:.2} neuron-update cycles per 32-neuron vector per step (limit 30)"))
}

fn c10_spike_intensity() -> Verdict {
    let run = rsnn_256();
    let mem = run.stats.retired_in(SPIKE_PROCESSING, OpClass::VectorMemory);
    let alu = run.stats.retired_in(SPIKE_PROCESSING, OpClass::VectorAlu);
    let ratio = mem as f64 / alu as f64;
    let spikes: u32 = run.trace.spike_counts().iter().sum();
    let rate = spikes as f64 / (100.0 * 256.0);
    verdict(
        alu > 0 && (2.0..=4.0).contains(&ratio),
        format!("vector memory {mem} : vector ALU {alu} = {ratio:.3} at {rate:.4} spikes per neuron per step"),
    )
}

fn c11_scalar_conformance() -> Verdict {
    let config = MachineConfig { imem_bytes: 4096, dmem_bytes: 4096, vmem_bytes: 4096, ..Default::default() };
    let mismatches: usize = (0..10_000u64)
        .into_par_iter()
        .map(|p| {
            let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ (p << 16));
            let mut asm = Assembler::new();
            asm.emit(Instruction::Lui { rd: BASE_REG, imm20: DMEM_BASE >> 12 });
            for _ in 0..50 {
                asm.emit(random_scalar(&mut rng));
            }
            asm.emit(Instruction::Ecall);
            let program = asm.finalize().expect("assemble");
            let words = program.words().expect("encode");
            let mut machine = Machine::load(&program, &config).expect("load");
            let mut reference = RefCpu::new(config.dmem_bytes);
            for &w in &words[..words.len() - 1] {
                machine.step().expect("step");
                reference.step(w);
                if machine.xregs() != &reference.x || machine.pc() != reference.pc {
                    return 1;
                }
            }
            usize::from(
                machine.memory(fenn::machine::MemoryKind::ScalarData).bytes()[..WINDOW] != reference.mem[..WINDOW],
            )
        })
        .sum();
    verdict(mismatches == 0, format!("10000 programs x 50 instructions, {mismatches} diverged"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("encode/decode round trip", c1_round_trip),
        ("stochastic rounding exhaustive unbiasedness", c2_exhaustive_entropy),
        ("rounding error histograms", c3_rounding_histograms),
        ("Poisson distribution", c4_poisson_distribution),
        ("Poisson throughput", c5_poisson_throughput),
        ("ALIF stochastic rounding benefit", c6_rounding_benefit),
        ("ALIF saturation rescue", c7_saturation_rescue),
        ("RSNN oracle equivalence", c8_oracle_equivalence),
        ("neuron update cycle budget", c9_update_budget),
        ("spike processing memory:ALU ratio", c10_spike_intensity),
        ("scalar conformance", c11_scalar_conformance),
    ];
    let verdicts: Vec<Verdict> = criteria.par_iter().map(|(_, f)| f()).collect();
    let mut failed = 0;
    for (i, ((name, _), v)) in criteria.iter().zip(&verdicts).enumerate() {
        println!("criterion {:>2} {}: {name}: {}", i + 1, if v.pass { "PASS" } else { "FAIL" }, v.detail);
        failed += usize::from(!v.pass);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
