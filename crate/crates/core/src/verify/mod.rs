//! Self-checks of the numerical invariants the engine relies on. Each check
//! uses small shapes so the whole suite runs in a few seconds.

pub mod reference;

use std::fmt;
use std::panic::{catch_unwind, AssertUnwindSafe};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::blocks::{chimb_forward, cvim_forward, row_attention, ChimbParams, CvimParams, PoolWindow};
use crate::metrics::{freq_charbonnier_loss, mse_loss, psnr, ssim, total_loss, LossConfig};
use crate::model::{init_parameters, mirror_store, param_count, Model, ModelConfig, Preset, StereoPair};
use crate::params::{ParameterStore, Slot};
use crate::tensor::{bilinear_upsample, conv2d, fft2d, ConvSpec, ParamTensor, Tensor};

/// Published parameter budgets and the allowed relative deviation.
pub const PARAM_TARGETS: [(Preset, usize, f64); 4] = [
    (Preset::Tiny, 2, 0.66e6),
    (Preset::Tiny, 4, 0.68e6),
    (Preset::Small, 2, 2.22e6),
    (Preset::Small, 4, 2.24e6),
];
pub const PARAM_TOLERANCE: f64 = 0.15;

#[derive(Clone, Debug, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {:<28} {}", self.name, self.detail)
    }
}

type Check = fn() -> Result<String, String>;

/// Names and bodies of every check, in reporting order.
pub fn checks() -> Vec<(&'static str, Check)> {
    vec![
        ("parameter-counts", parameter_counts as Check),
        ("conv-reference", conv_reference),
        ("fft-reference", fft_reference),
        ("row-attention-reference", attention_reference),
        ("chimb-zero-identity", chimb_zero_identity),
        ("cvim-zero-gamma-identity", cvim_zero_gamma_identity),
        ("zero-model-is-bilinear", zero_model_is_bilinear),
        ("tlc-full-window", tlc_full_window),
        ("loss-constants", loss_constants),
        ("metric-sanity", metric_sanity),
        ("stereo-swap-symmetry", swap_symmetry),
        ("thread-determinism", thread_determinism),
    ]
}

/// Runs one check, turning a panic into a failure.
pub fn run_check(name: &'static str, check: Check) -> CheckOutcome {
    let (passed, detail) = match catch_unwind(AssertUnwindSafe(check)) {
        Ok(Ok(d)) => (true, d),
        Ok(Err(d)) => (false, d),
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "unknown panic".into());
            (false, format!("panicked: {msg}"))
        }
    };
    CheckOutcome { name, passed, detail }
}

pub fn run_all() -> Vec<CheckOutcome> {
    checks().into_iter().map(|(n, c)| run_check(n, c)).collect()
}

/// Every parameter of `config` drawn at random: conv weights in
/// `±1/√fan_in`, everything else (biases, norms, fusion scales) in ±0.5.
pub fn randomized_parameters(config: &ModelConfig, seed: u64) -> ParameterStore {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut store = init_parameters(config, seed);
    for (path, t) in store.iter_mut() {
        if !path.ends_with(".weight") {
            t.data_mut().iter_mut().for_each(|v| *v = rng.random_range(-0.5..0.5));
        }
    }
    store
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err(e: crate::Error) -> String {
    e.to_string()
}

fn random_tensor(rng: &mut ChaCha8Rng, c: usize, h: usize, w: usize) -> Tensor {
    Tensor::from_fn(c, h, w, |_, _, _| rng.random_range(-1.0..1.0))
}

fn random_image(rng: &mut ChaCha8Rng, h: usize, w: usize) -> Tensor {
    Tensor::from_fn(3, h, w, |_, _, _| rng.random_range(0.0..1.0))
}

fn random_pair(rng: &mut ChaCha8Rng, h: usize, w: usize) -> StereoPair {
    StereoPair::new(random_image(rng, h, w), random_image(rng, h, w)).expect("equal shapes")
}

fn block_store(prefix: &str, slots: &[Slot], rng: &mut ChaCha8Rng) -> ParameterStore {
    let mut paths = Vec::new();
    for slot in slots {
        slot.expand(&format!("{prefix}."), &mut paths);
    }
    let mut store = ParameterStore::new();
    for (path, dims) in paths {
        let n = dims.iter().product();
        let data = (0..n).map(|_| rng.random_range(-0.5..0.5)).collect();
        store.insert(path, ParamTensor::new(dims, data).expect("layout dims"));
    }
    store
}

fn parameter_counts() -> Result<String, String> {
    let mut parts = Vec::new();
    for (preset, scale, target) in PARAM_TARGETS {
        let n = param_count(&ModelConfig::preset(preset, scale).map_err(err)?);
        let dev = n as f64 / target - 1.0;
        ensure(dev.abs() <= PARAM_TOLERANCE, || {
            format!("{preset} x{scale}: {n} deviates {:+.1}% from {target}", dev * 100.0)
        })?;
        parts.push(format!("{preset}x{scale}={n} ({:+.1}%)", dev * 100.0));
    }
    Ok(parts.join(", "))
}

fn conv_reference() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cases = 40;
    let mut worst = 0.0f64;
    for case in 0..cases {
        let k = [1, 3, 5, 7][rng.random_range(0..4)];
        let dilation = rng.random_range(1..=3);
        let spec = match rng.random_range(0..3) {
            0 => ConvSpec::dense(rng.random_range(1..5), rng.random_range(1..5), k),
            1 => ConvSpec::depthwise(rng.random_range(1..5), k, dilation),
            _ => ConvSpec {
                dilation,
                groups: 2,
                ..ConvSpec::dense(2 * rng.random_range(1..3), 2 * rng.random_range(1..3), k)
            },
        };
        let (h, w) = (rng.random_range(1..12), rng.random_range(1..12));
        let input = random_tensor(&mut rng, spec.in_channels, h, w);
        let dims = spec.weight_dims();
        let weight: Vec<f32> = (0..dims.iter().product()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let bias: Vec<f32> = (0..spec.out_channels).map(|_| rng.random_range(-1.0..1.0)).collect();
        let got = conv2d(&input, &spec, &ParamTensor::new(dims, weight.clone()).map_err(err)?, Some(&bias))
            .map_err(err)?;
        let want = reference::direct_conv2d(&input, &spec, &weight, Some(&bias));
        for (&g, &r) in got.data().iter().zip(want.data()) {
            let rel = (g - r).abs() as f64 / (r.abs() as f64).max(1.0);
            worst = worst.max(rel);
            ensure(rel <= 1e-5, || format!("case {case} {spec:?} on {h}x{w}: {g} vs {r}"))?;
        }
    }
    Ok(format!("{cases} random specs, worst rel err {worst:.2e}"))
}

fn fft_reference() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst = 0.0f64;
    for (h, w) in [(8, 8), (6, 10), (5, 7), (16, 12), (1, 9)] {
        let x = random_tensor(&mut rng, 1, h, w);
        let got = fft2d(&x).map_err(err)?;
        let want = reference::naive_dft2d(x.data(), h, w);
        let peak = want.iter().map(|(r, i)| r.hypot(*i)).fold(1.0, f64::max);
        for (i, (r, im)) in want.iter().enumerate() {
            let d = (got.re[i] as f64 - r).hypot(got.im[i] as f64 - im) / peak;
            worst = worst.max(d);
            ensure(d <= 1e-4, || format!("{h}x{w} bin {i}: rel err {d:.2e}"))?;
        }
        let energy: f64 = x.data().iter().map(|&v| (v as f64).powi(2)).sum::<f64>() * (h * w) as f64;
        let spectral: f64 = got.re.iter().zip(&got.im).map(|(&r, &i)| (r as f64).powi(2) + (i as f64).powi(2)).sum();
        let rel = (spectral - energy).abs() / energy.max(1e-12);
        ensure(rel <= 1e-4, || format!("{h}x{w}: Parseval rel err {rel:.2e}"))?;
    }
    Ok(format!("5 shapes incl. non-power-of-two, worst rel err {worst:.2e}"))
}

fn attention_reference() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut worst = 0.0f32;
    for (c, h, w) in [(4, 3, 9), (8, 2, 16), (3, 1, 1), (6, 4, 5)] {
        let q = random_tensor(&mut rng, c, h, w);
        let k = random_tensor(&mut rng, c, h, w);
        let v = random_tensor(&mut rng, c, h, w);
        let got = row_attention(&q, &k, &v).map_err(err)?;
        let d = got.max_abs_diff(&reference::naive_row_attention(&q, &k, &v));
        worst = worst.max(d);
        ensure(d <= 1e-5, || format!("({c},{h},{w}): max abs err {d:.2e}"))?;
    }
    Ok(format!("max abs err {worst:.2e}"))
}

fn chimb_zero_identity() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let c = 6;
    let mut store = block_store("b", &ChimbParams::layout(c), &mut rng);
    for (path, t) in store.iter_mut() {
        if path.ends_with(".weight") || path.ends_with(".bias") {
            t.data_mut().fill(0.0);
        }
    }
    let p = ChimbParams::from_store(&store, "b", c).map_err(err)?;
    let x = random_tensor(&mut rng, c, 7, 9);
    for tlc in [None, Some(PoolWindow::new(3, 4))] {
        let y = chimb_forward(&x, &p, tlc).map_err(err)?;
        ensure(y == x, || format!("output differs from input (tlc {tlc:?})"))?;
    }
    Ok("exact with global and local pooling".into())
}

fn cvim_zero_gamma_identity() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let c = 4;
    let mut store = block_store("m", &CvimParams::layout(c), &mut rng);
    for side in ["gamma_left", "gamma_right"] {
        store.get_mut(&format!("m.{side}")).expect("layout").data_mut().fill(0.0);
    }
    let p = CvimParams::from_store(&store, "m", c).map_err(err)?;
    let (l, r) = (random_tensor(&mut rng, c, 5, 8), random_tensor(&mut rng, c, 5, 8));
    let (lo, ro) = cvim_forward(&l, &r, &p).map_err(err)?;
    ensure(lo == l && ro == r, || "outputs differ from inputs".into())?;
    Ok("exact".into())
}

fn zero_model_is_bilinear() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    for scale in [2, 4] {
        let config = ModelConfig::new(4, 2, scale).map_err(err)?;
        let mut store = init_parameters(&config, 0);
        store.iter_mut().for_each(|(_, t)| t.data_mut().fill(0.0));
        let model = Model::new(config, &store).map_err(err)?;
        let input = random_pair(&mut rng, 6, 5);
        let out = model.forward(&input).map_err(err)?;
        for (o, i) in [(out.left(), input.left()), (out.right(), input.right())] {
            let up = bilinear_upsample(i, scale).map_err(err)?;
            ensure(*o == up, || format!("x{scale}: output is not the bilinear upsample"))?;
        }
    }
    Ok("exact at x2 and x4".into())
}

fn tlc_full_window() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let c = 4;
    let store = block_store("b", &ChimbParams::layout(c), &mut rng);
    let p = ChimbParams::from_store(&store, "b", c).map_err(err)?;
    let (h, w) = (6, 9);
    let x = random_tensor(&mut rng, c, h, w);
    let global = chimb_forward(&x, &p, None).map_err(err)?;
    let local = chimb_forward(&x, &p, Some(PoolWindow::new(2 * h, 2 * w))).map_err(err)?;
    ensure(local == global, || format!("max abs diff {:.2e}", local.max_abs_diff(&global)))?;
    Ok("bit-exact".into())
}

fn loss_constants() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    let pair = random_pair(&mut rng, 8, 12);
    let cfg = LossConfig::default();
    let mse = mse_loss(&pair, &pair).map_err(err)?;
    let fc = freq_charbonnier_loss(&pair, &pair, cfg.epsilon).map_err(err)?;
    let total = total_loss(&pair, &pair, &cfg).map_err(err)?;
    ensure(mse == 0.0, || format!("MSE of identical pairs is {mse}"))?;
    ensure((fc - cfg.epsilon).abs() <= 1e-12, || format!("frequency term is {fc}, expected {}", cfg.epsilon))?;
    ensure((total - 1e-5).abs() <= 1e-15, || format!("total is {total}, expected 1e-5"))?;
    Ok(format!("L_FC = {fc}, L_total = {total}"))
}

fn metric_sanity() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let a = Tensor::from_fn(3, 16, 16, |_, _, _| rng.random_range(0.2..0.8));
    let shifted = Tensor::from_fn(3, 16, 16, |c, y, x| a.get(c, y, x) + 0.1);
    let p = psnr(&a, &shifted).map_err(err)?;
    ensure((p - 20.0).abs() <= 1e-4, || format!("offset 0.1 gives {p} dB, expected 20"))?;
    let same = psnr(&a, &a).map_err(err)?;
    ensure(same == f64::INFINITY, || format!("psnr(a, a) = {same}"))?;
    let s = ssim(&a, &a).map_err(err)?;
    ensure((s - 1.0).abs() <= 1e-12, || format!("ssim(a, a) = {s}"))?;
    Ok(format!("psnr {p:.4} dB at offset 0.1, ssim(a, a) = {s}"))
}

fn swap_symmetry() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let config = ModelConfig::new(4, 2, 2).map_err(err)?;
    let input = random_pair(&mut rng, 5, 7);

    let fresh = Model::new(config, &init_parameters(&config, 3)).map_err(err)?;
    let direct = fresh.forward(&input).map_err(err)?.swapped();
    let swapped = fresh.forward(&input.swapped()).map_err(err)?;
    ensure(direct == swapped, || "freshly initialized model is not swap-symmetric".into())?;

    let store = randomized_parameters(&config, 4);
    let model = Model::new(config, &store).map_err(err)?;
    let mirrored = Model::new(config, &mirror_store(&store)).map_err(err)?;
    let direct = model.forward(&input).map_err(err)?.swapped();
    let swapped = mirrored.forward(&input.swapped()).map_err(err)?;
    ensure(direct == swapped, || "mirrored cross-view weights do not commute with the swap".into())?;
    Ok("exact for fresh and randomized weights".into())
}

fn thread_determinism() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let config = ModelConfig::new(8, 2, 2).map_err(err)?;
    let model = Model::new(config, &randomized_parameters(&config, 5)).map_err(err)?;
    let input = random_pair(&mut rng, 9, 11);
    let run = |threads: usize| -> Result<StereoPair, String> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| e.to_string())?;
        pool.install(|| model.forward(&input)).map_err(err)
    };
    let one = run(1)?;
    ensure(one == run(1)?, || "repeated single-threaded runs differ".into())?;
    ensure(one == run(4)?, || "1-thread and 4-thread outputs differ".into())?;
    Ok("bit-identical across repeated runs and 1 vs 4 threads".into())
}
