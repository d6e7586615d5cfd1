mod common;

use fenn::fixedpoint::RoundingMode;
use fenn::kernels::{self, build_alif, AlifParams, AlifRun, NumericConfig};
use fenn::reference::alif_reference;
use fenn::LANES;

use common::alif_f64;

const STEPS: usize = 600;

fn run(params: &AlifParams, rounding: RoundingMode, weight: f64) -> AlifRun {
    let num = NumericConfig { rounding, ..Default::default() };
    let counts = vec![[1u16; LANES]; STEPS];
    let kernel = build_alif(params, &num, weight, &counts, 5).unwrap();
    let machine = kernels::execute(&kernel.program, 100_000_000).unwrap();
    kernel.read_run(&machine).unwrap()
}

fn spike_times(spikes: &[bool]) -> Vec<usize> {
    spikes.iter().enumerate().filter(|(_, &s)| s).map(|(t, _)| t).collect()
}

fn intervals(times: &[usize]) -> Vec<usize> {
    times.windows(2).map(|w| w[1] - w[0]).collect()
}

#[test]
fn lif_interval_matches_float_reference() {
    let params = AlifParams { beta: 0.0, ..Default::default() };
    let weight = 0.035;
    let (v_ref, _) = alif_f64(params.alpha(), params.rho(), params.v_th, 0.0, &[weight; STEPS]);
    // A spike at step t+1 is visible as V[t+1] >= V_th.
    let ref_times: Vec<usize> = v_ref.iter().enumerate().filter(|(_, &v)| v >= params.v_th).map(|(t, _)| t).collect();
    let ref_isi = intervals(&ref_times);
    assert!(ref_isi.len() > 5, "reference should spike regularly");
    let (lo, hi) = (*ref_isi.iter().min().unwrap(), *ref_isi.iter().max().unwrap());
    for rounding in [RoundingMode::RoundToNearest, RoundingMode::Stochastic] {
        let r = run(&params, rounding, weight);
        for lane in [0, 13, 31] {
            let isi = intervals(&spike_times(&r.lane_spikes(lane)));
            assert!(isi.len() >= ref_isi.len() - 1, "{rounding:?}: too few spikes");
            for d in isi {
                assert!(d + 1 >= lo && d <= hi + 1, "{rounding:?} lane {lane}: interval {d} vs reference [{lo}, {hi}]");
            }
        }
    }
}

#[test]
fn adaptation_lowers_spike_count() {
    let lif = AlifParams { beta: 0.0, ..Default::default() };
    let alif = AlifParams { beta: 0.05, ..Default::default() };
    for rounding in RoundingMode::ALL {
        let count = |p: &AlifParams| -> usize {
            let r = run(p, rounding, 0.04);
            (0..LANES).map(|l| r.lane_spikes(l).iter().filter(|&&s| s).count()).sum()
        };
        assert!(count(&alif) < count(&lif), "{rounding:?}");
    }
}

#[test]
fn stepped_rate_matches_sub_stepped_integration() {
    // Integrating the same dynamics with 1000 sub-steps per timestep and
    // input impulses at step boundaries must give the same spike count.
    let params = AlifParams::default();
    let input = vec![0.05; 2000];
    let stepped = alif_reference(&params, &input).spikes.iter().filter(|&&s| s).count();

    let n = 1000;
    let (dm, da) = ((-1.0 / (params.tau_m * n as f64)).exp(), (-1.0 / (params.tau_a * n as f64)).exp());
    let (mut vs, mut as_, mut spikes) = (0.0f64, 0.0f64, 0);
    for &i in &input {
        let s = vs >= params.v_th + params.beta * as_;
        for _ in 0..n {
            vs *= dm;
            as_ *= da;
        }
        vs += i - if s { params.v_th } else { 0.0 };
        as_ += if s { 1.0 } else { 0.0 };
        spikes += usize::from(s);
    }
    assert!(spikes > 10);
    assert!((spikes as i64 - stepped as i64).abs() <= 1, "{spikes} vs {stepped}");
}
