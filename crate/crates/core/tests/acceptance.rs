//! Acceptance suite: one line per criterion, each checked at its stated
//! tolerance and time budget.

mod common;

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use cvhssr::blocks::{chimb_forward, cvim_forward, row_attention, ChimbParams, CvimParams, PoolWindow};
use cvhssr::metrics::{freq_charbonnier_loss, psnr, ssim, total_loss, LossConfig};
use cvhssr::model::{mirror_store, DEFAULT_TLC_WINDOW};
use cvhssr::params::{ParameterStore, Slot};
use cvhssr::tensor::{bilinear_upsample, conv2d, fft2d, ConvSpec};
use cvhssr::verify::randomized_parameters;
use cvhssr::{init_parameters, param_count, Model, ModelConfig, ParamTensor, Preset, StereoPair, Tensor};
use rand::Rng;

use common::*;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome, Duration);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    cond.then_some(()).ok_or_else(msg)
}

fn e<E: std::fmt::Display>(err: E) -> String {
    err.to_string()
}

fn random_pair(seed: u64, h: usize, w: usize) -> StereoPair {
    let mut r = rng(seed);
    StereoPair::new(uniform(&mut r, 3, h, w, 0.0, 1.0), uniform(&mut r, 3, h, w, 0.0, 1.0)).unwrap()
}

fn random_block_store(prefix: &str, slots: &[Slot], seed: u64) -> ParameterStore {
    let mut r = rng(seed);
    let mut paths = Vec::new();
    for s in slots {
        s.expand(&format!("{prefix}."), &mut paths);
    }
    let mut store = ParameterStore::new();
    for (path, dims) in paths {
        let n = dims.iter().product();
        store.insert(path, ParamTensor::new(dims, (0..n).map(|_| r.random_range(-0.5..0.5)).collect()).unwrap());
    }
    store
}

fn parameter_counts() -> Outcome {
    let targets = [
        (Preset::Tiny, 2, 0.66e6),
        (Preset::Tiny, 4, 0.68e6),
        (Preset::Small, 2, 2.22e6),
        (Preset::Small, 4, 2.24e6),
    ];
    let mut report = Vec::new();
    for (preset, scale, target) in targets {
        let n = param_count(&ModelConfig::preset(preset, scale).map_err(e)?);
        let dev = n as f64 / target - 1.0;
        check(dev.abs() <= 0.15, || format!("{preset} x{scale}: {n} is {:+.1}% off {target}", 100.0 * dev))?;
        report.push(format!("{preset}x{scale}={n}({:+.1}%)", 100.0 * dev));
    }
    // reconstruction conv: 3x3, C=48 -> 3*s^2 outputs, with bias
    let recon = |s: usize| 48 * 3 * s * s * 9 + 3 * s * s;
    let diff = param_count(&ModelConfig::preset(Preset::Tiny, 4).map_err(e)?)
        - param_count(&ModelConfig::preset(Preset::Tiny, 2).map_err(e)?);
    check(diff == recon(4) - recon(2), || format!("T x4 - T x2 = {diff}, expected {}", recon(4) - recon(2)))?;
    report.push(format!("Tx4-Tx2={diff}"));
    Ok(report.join(" "))
}

fn conv_oracle_cases() -> Result<f64, String> {
    let mut r = rng(100);
    let mut worst = 0.0f64;
    for case in 0..60 {
        let k = [1, 3, 5, 7][case % 4];
        let dilation = 1 + (case / 4) % 3;
        let groups_kind = case % 3;
        let spec = match groups_kind {
            0 => ConvSpec { dilation, ..ConvSpec::dense(r.random_range(1..6), r.random_range(1..6), k) },
            1 => ConvSpec::depthwise(r.random_range(1..7), k, dilation),
            _ => {
                let g = r.random_range(2..4);
                ConvSpec {
                    dilation,
                    groups: g,
                    ..ConvSpec::dense(g * r.random_range(1..3), g * r.random_range(1..3), k)
                }
            }
        };
        let (h, w) = (r.random_range(1..14), r.random_range(1..14));
        let x = uniform(&mut r, spec.in_channels, h, w, -1.0, 1.0);
        let dims = spec.weight_dims();
        let wt: Vec<f32> = (0..dims.iter().product()).map(|_| r.random_range(-1.0..1.0)).collect();
        let b: Vec<f32> = (0..spec.out_channels).map(|_| r.random_range(-1.0..1.0)).collect();
        let got = conv2d(&x, &spec, &ParamTensor::new(dims, wt.clone()).map_err(e)?, Some(&b)).map_err(e)?;
        let want = conv_oracle(&x, &spec, &wt, &b);
        for (g, o) in got.data().iter().zip(want.data()) {
            let rel = (g - o).abs() as f64 / (o.abs() as f64).max(1.0);
            worst = worst.max(rel);
            check(rel <= 1e-5, || format!("conv case {case} ({spec:?}, {h}x{w}): {g} vs {o}"))?;
        }
    }
    Ok(worst)
}

fn fft_oracle_cases() -> Result<f64, String> {
    let mut r = rng(101);
    let mut worst = 0.0f64;
    for (h, w) in [(8, 8), (4, 16), (6, 10), (7, 5), (12, 9), (1, 13), (30, 18)] {
        let x = uniform(&mut r, 1, h, w, -1.0, 1.0);
        let got = fft2d(&x).map_err(e)?;
        let want = dft_oracle(x.data(), h, w);
        let scale = want.iter().map(|(a, b)| a.hypot(*b)).fold(1.0, f64::max);
        for (i, (re, im)) in want.iter().enumerate() {
            let rel = (got.re[i] as f64 - re).hypot(got.im[i] as f64 - im) / scale;
            worst = worst.max(rel);
            check(rel <= 1e-4, || format!("fft {h}x{w} bin {i}: rel {rel:.2e}"))?;
        }
        let spatial: f64 = x.data().iter().map(|&v| (v as f64).powi(2)).sum();
        let spectral: f64 = want.iter().map(|(a, b)| a * a + b * b).sum::<f64>() / (h * w) as f64;
        let ours: f64 = got.re.iter().zip(&got.im).map(|(&a, &b)| (a as f64).powi(2) + (b as f64).powi(2)).sum::<f64>()
            / (h * w) as f64;
        check((spectral - spatial).abs() <= 1e-9 * spatial.max(1.0), || "oracle violates Parseval".into())?;
        check((ours - spatial).abs() <= 1e-4 * spatial, || format!("Parseval {h}x{w}: {ours} vs {spatial}"))?;
    }
    Ok(worst)
}

fn attention_oracle_cases() -> Result<f64, String> {
    let mut r = rng(102);
    let mut worst = 0.0f64;
    for (c, h, w) in [(4, 3, 10), (8, 2, 16), (1, 1, 1), (6, 5, 7), (16, 2, 33)] {
        let q = uniform(&mut r, c, h, w, -2.0, 2.0);
        let k = uniform(&mut r, c, h, w, -2.0, 2.0);
        let v = uniform(&mut r, c, h, w, -1.0, 1.0);
        let got = row_attention(&q, &k, &v).map_err(e)?;
        let d = got.max_abs_diff(&attention_oracle(&q, &k, &v)) as f64;
        worst = worst.max(d);
        check(d <= 1e-5, || format!("attention ({c},{h},{w}): {d:.2e}"))?;
    }
    Ok(worst)
}

fn ssim_oracle_cases() -> Result<f64, String> {
    let mut r = rng(103);
    let mut worst = 0.0f64;
    for (h, w, noise) in [(11, 11, 0.1f32), (16, 20, 0.05), (24, 13, 0.3), (12, 30, 0.0)] {
        let a = smooth_image(h, w, 0.3);
        let b = Tensor::from_fn(3, h, w, |c, y, x| (a.get(c, y, x) + r.random_range(-noise..=noise)).clamp(0.0, 1.0));
        let got = ssim(&a, &b).map_err(e)?;
        let want = ssim_oracle(&a, &b);
        let rel = (got - want).abs() / want.abs().max(1e-12);
        worst = worst.max(rel);
        check(rel <= 1e-5, || format!("ssim {h}x{w}: {got} vs {want}"))?;
    }
    Ok(worst)
}

fn kernel_oracles() -> Outcome {
    let conv = conv_oracle_cases()?;
    let fft = fft_oracle_cases()?;
    let att = attention_oracle_cases()?;
    let ssim = ssim_oracle_cases()?;
    Ok(format!("conv 60 specs {conv:.1e}, fft {fft:.1e} + Parseval, attention {att:.1e}, ssim {ssim:.1e}"))
}

fn identity_invariants() -> Outcome {
    // zero-weight CHIMB
    let c = 8;
    let mut store = random_block_store("b", &ChimbParams::layout(c), 200);
    for (path, t) in store.iter_mut() {
        if path.ends_with(".weight") || path.ends_with(".bias") {
            t.data_mut().fill(0.0);
        }
    }
    let chimb = ChimbParams::from_store(&store, "b", c).map_err(e)?;
    let x = uniform(&mut rng(201), c, 9, 13, -1.0, 1.0);
    for tlc in [None, Some(PoolWindow::new(3, 5))] {
        check(chimb_forward(&x, &chimb, tlc).map_err(e)? == x, || format!("zero CHIMB changed its input (tlc {tlc:?})"))?;
    }

    // γ = 0 CVIM
    let mut store = random_block_store("m", &CvimParams::layout(c), 202);
    store.get_mut("m.gamma_left").unwrap().data_mut().fill(0.0);
    store.get_mut("m.gamma_right").unwrap().data_mut().fill(0.0);
    let cvim = CvimParams::from_store(&store, "m", c).map_err(e)?;
    let y = uniform(&mut rng(203), c, 9, 13, -1.0, 1.0);
    let (l, r) = cvim_forward(&x, &y, &cvim).map_err(e)?;
    check(l == x && r == y, || "CVIM with zero scales is not the identity".into())?;

    // view isolation through a whole network
    let config = ModelConfig::new(8, 3, 2).map_err(e)?;
    let mut isolated = randomized_parameters(&config, 204);
    for (path, t) in isolated.iter_mut() {
        if path.contains(".gamma_") {
            t.data_mut().fill(0.0);
        }
    }
    let model = Model::new(config, &isolated).map_err(e)?;
    let a = random_pair(205, 7, 9);
    let b = StereoPair::new(a.left().clone(), random_pair(206, 7, 9).right().clone()).map_err(e)?;
    let (oa, ob) = (model.forward(&a).map_err(e)?, model.forward(&b).map_err(e)?);
    check(oa.left() == ob.left(), || "left output depends on the right view with zero scales".into())?;
    let coupled = Model::new(config, &randomized_parameters(&config, 204)).map_err(e)?;
    check(
        coupled.forward(&a).map_err(e)?.left() != coupled.forward(&b).map_err(e)?.left(),
        || "nonzero scales should couple the views".into(),
    )?;

    // all-zero network
    for scale in [2, 4] {
        let config = ModelConfig::new(8, 2, scale).map_err(e)?;
        let mut zero = init_parameters(&config, 0);
        zero.iter_mut().for_each(|(_, t)| t.data_mut().fill(0.0));
        let input = random_pair(207, 6, 11);
        let out = Model::new(config, &zero).map_err(e)?.forward(&input).map_err(e)?;
        for (o, i) in [(out.left(), input.left()), (out.right(), input.right())] {
            check(*o == bilinear_upsample(i, scale).map_err(e)?, || format!("x{scale}: not the bilinear upsample"))?;
            let d = o.max_abs_diff(&bilinear_oracle(i, scale));
            check(d <= 1e-6, || format!("x{scale}: bilinear differs from oracle by {d}"))?;
        }
    }

    // TLC with a window covering the whole map from every position
    let store = random_block_store("b", &ChimbParams::layout(c), 208);
    let chimb = ChimbParams::from_store(&store, "b", c).map_err(e)?;
    let (h, w) = (x.height(), x.width());
    let global = chimb_forward(&x, &chimb, None).map_err(e)?;
    for window in [PoolWindow::new(2 * h - 1, 2 * w - 1), PoolWindow::new(4 * h, 4 * w)] {
        let local = chimb_forward(&x, &chimb, Some(window)).map_err(e)?;
        check(local == global, || format!("TLC {window} differs from global pooling"))?;
    }
    let config = ModelConfig::new(8, 2, 2).map_err(e)?;
    let model = Model::new(config, &randomized_parameters(&config, 209)).map_err(e)?;
    let input = random_pair(210, 6, 8);
    let plain = model.forward(&input).map_err(e)?;
    let tlc = model.with_tlc(true, DEFAULT_TLC_WINDOW).map_err(e)?.forward(&input).map_err(e)?;
    check(plain == tlc, || "default TLC window over a small map differs from global".into())?;

    Ok("CHIMB, CVIM, view isolation, zero network, TLC full window: all bit-exact".into())
}

fn loss_constants() -> Outcome {
    let cfg = LossConfig::default();
    check(cfg.lambda == 0.01 && cfg.epsilon == 1e-3, || format!("defaults are {cfg:?}"))?;
    let mut worst: f64 = 0.0;
    for (seed, h, w) in [(300, 8, 8), (301, 15, 22), (302, 1, 1)] {
        let x = random_pair(seed, h, w);
        let fc = freq_charbonnier_loss(&x, &x, cfg.epsilon).map_err(e)?;
        let total = total_loss(&x, &x, &cfg).map_err(e)?;
        check((fc - 1e-3).abs() <= 4.0 * f64::EPSILON * 1e-3, || format!("L_FC(x,x) = {fc:e}"))?;
        check((total - 1e-5).abs() <= 4.0 * f64::EPSILON * 1e-5, || format!("L_total(x,x) = {total:e}"))?;
        worst = worst.max((total - 1e-5).abs());
    }
    Ok(format!("L_FC = 1e-3, L_total = 1e-5 (max deviation {worst:.1e})"))
}

fn with_threads<T: Send>(n: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap().install(f)
}

fn symmetry_and_determinism() -> Outcome {
    let config = ModelConfig::new(8, 2, 2).map_err(e)?;
    let input = random_pair(400, 7, 10);

    let fresh = Model::new(config, &init_parameters(&config, 401)).map_err(e)?;
    check(
        fresh.forward(&input.swapped()).map_err(e)? == fresh.forward(&input).map_err(e)?.swapped(),
        || "fresh model: swap does not commute".into(),
    )?;

    // cross-view weights shared between directions: symmetric without remapping
    let mut shared = randomized_parameters(&config, 402);
    let paths: Vec<String> = shared.iter().map(|(p, _)| p.to_string()).collect();
    for p in &paths {
        for (from, to) in [(".l2r.", ".r2l."), (".ln_left.", ".ln_right."), (".gamma_left", ".gamma_right")] {
            if p.contains(from) {
                let t = shared.get(p).unwrap().clone();
                shared.insert(p.replacen(from, to, 1), t);
            }
        }
    }
    let model = Model::new(config, &shared).map_err(e)?;
    check(
        model.forward(&input.swapped()).map_err(e)? == model.forward(&input).map_err(e)?.swapped(),
        || "shared cross-view weights: swap does not commute".into(),
    )?;

    // general weights: swapping views equals exchanging the two directions
    let store = randomized_parameters(&config, 403);
    let direct = Model::new(config, &store).map_err(e)?;
    let mirrored = Model::new(config, &mirror_store(&store)).map_err(e)?;
    check(
        mirrored.forward(&input.swapped()).map_err(e)? == direct.forward(&input).map_err(e)?.swapped(),
        || "mirrored weights: swap does not commute".into(),
    )?;

    let reference = with_threads(1, || direct.forward(&input)).map_err(e)?;
    for threads in [1, 2, 3, 4, 8] {
        for _ in 0..2 {
            let out = with_threads(threads, || direct.forward(&input)).map_err(e)?;
            check(out == reference, || format!("{threads} threads differ from 1 thread"))?;
        }
    }
    Ok("swap bit-exact (fresh, shared, mirrored); identical over 1/2/3/4/8 threads".into())
}

fn cli(args: &[&str], threads: Option<usize>) -> Result<(std::process::Output, Duration), String> {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_cvhssr"));
    cmd.args(args);
    if let Some(n) = threads {
        cmd.env("RAYON_NUM_THREADS", n.to_string());
    }
    let start = Instant::now();
    let out = cmd.output().map_err(e)?;
    Ok((out, start.elapsed()))
}

fn path_str(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

fn end_to_end() -> Outcome {
    let dir = tempfile::tempdir().map_err(e)?;
    let d = dir.path();
    let (left, right) = (smooth_image(64, 64, 0.0), smooth_image(64, 64, 0.7));
    write_rgb_png(&d.join("l.png"), &left);
    write_rgb_png(&d.join("r.png"), &right);
    let (out, elapsed) = cli(
        &[
            "run", "--preset", "t", "--scale", "4", "--seed", "0",
            "--left", &path_str(&d.join("l.png")), "--right", &path_str(&d.join("r.png")),
            "--out-left", &path_str(&d.join("sr0.png")), "--out-right", &path_str(&d.join("sr1.png")),
        ],
        Some(1),
    )?;
    check(out.status.code() == Some(0), || format!("run failed: {}", String::from_utf8_lossy(&out.stderr)))?;
    check(elapsed < Duration::from_secs(30), || format!("run took {elapsed:?}"))?;
    let sr0 = read_rgb_png(&d.join("sr0.png"));
    let sr1 = read_rgb_png(&d.join("sr1.png"));
    check(sr0.shape() == (3, 256, 256) && sr1.shape() == (3, 256, 256), || format!("output shape {:?}", sr0.shape()))?;

    // the written PNG is the quantized library forward pass
    let config = ModelConfig::preset(Preset::Tiny, 4).map_err(e)?;
    let model = Model::new(config, &init_parameters(&config, 0)).map_err(e)?;
    let lr = StereoPair::new(read_rgb_png(&d.join("l.png")), read_rgb_png(&d.join("r.png"))).map_err(e)?;
    let sr = model.forward(&lr).map_err(e)?;
    let quantized = |t: &Tensor| Tensor::from_fn(3, 256, 256, |c, y, x| (t.get(c, y, x).clamp(0.0, 1.0) * 255.0).round() / 255.0);
    check(sr0 == quantized(sr.left()) && sr1 == quantized(sr.right()), || "PNG differs from forward pass".into())?;

    // evaluation on three synthetic scenes plus one broken one
    let data = d.join("data");
    for (i, scene) in ["s1", "s2", "s3"].iter().enumerate() {
        write_scene(&data, scene, 8, 10, 2, i as f32);
    }
    std::fs::create_dir_all(data.join("zz_incomplete")).map_err(e)?;
    let csv = d.join("metrics.csv");
    let (out, _) = cli(
        &["eval", "--preset", "t", "--scale", "2", "--seed", "3", "--dataset", &path_str(&data), "--csv", &path_str(&csv)],
        None,
    )?;
    let stderr = String::from_utf8_lossy(&out.stderr);
    check(out.status.code() == Some(0), || format!("eval failed: {stderr}"))?;
    check(stderr.contains("zz_incomplete"), || "broken scene was not reported".into())?;

    let text = std::fs::read_to_string(&csv).map_err(e)?;
    let mut lines = text.lines();
    check(lines.next() == Some("scene,psnr_left,ssim_left,psnr_pair,ssim_pair"), || "bad CSV header".into())?;
    let rows: Vec<(String, Vec<f64>)> = lines
        .map(|l| {
            let mut f = l.split(',');
            let name = f.next().unwrap().to_string();
            (name, f.map(|v| v.parse().unwrap()).collect())
        })
        .collect();
    check(rows.len() == 4 && rows[3].0 == "mean", || format!("expected 3 scenes + mean, got {rows:?}"))?;
    for col in 0..4 {
        let mean = rows[..3].iter().map(|r| r.1[col]).sum::<f64>() / 3.0;
        check((mean - rows[3].1[col]).abs() <= 1e-12 * mean.abs().max(1.0), || format!("column {col} mean mismatch"))?;
    }

    let config = ModelConfig::preset(Preset::Tiny, 2).map_err(e)?;
    let model = Model::new(config, &init_parameters(&config, 3)).map_err(e)?;
    for (i, (name, vals)) in rows[..3].iter().enumerate() {
        check(*name == format!("s{}", i + 1), || format!("scene order: {name}"))?;
        let dir = data.join(name);
        let lr = StereoPair::new(read_rgb_png(&dir.join("lr0.png")), read_rgb_png(&dir.join("lr1.png"))).map_err(e)?;
        let (hl, hr) = (read_rgb_png(&dir.join("hr0.png")), read_rgb_png(&dir.join("hr1.png")));
        let sr = model.forward(&lr).map_err(e)?;
        let (pl, pr) = (psnr_oracle(sr.left(), &hl), psnr_oracle(sr.right(), &hr));
        let (sl, srr) = (ssim_oracle(sr.left(), &hl), ssim_oracle(sr.right(), &hr));
        let expect = [pl, sl, (pl + pr) / 2.0, (sl + srr) / 2.0];
        for (col, (&got, want)) in vals.iter().zip(expect).enumerate() {
            check((got - want).abs() <= 1e-5 * want.abs(), || format!("{name} column {col}: {got} vs {want}"))?;
        }
    }
    let table = String::from_utf8_lossy(&out.stdout);
    check(table.lines().count() == 5 && table.lines().last().unwrap().starts_with("mean"), || format!("table:\n{table}"))?;
    Ok(format!("run T x4 64x64 -> 256x256 in {:.2} s (1 thread); eval 3 scenes consistent", elapsed.as_secs_f64()))
}

fn metric_sanity() -> Outcome {
    let mut r = rng(500);
    let a = uniform(&mut r, 3, 32, 40, 0.0, 0.9);
    let b = Tensor::from_fn(3, 32, 40, |c, y, x| a.get(c, y, x) + 0.1);
    let p = psnr(&a, &b).map_err(e)?;
    check((p - 20.0).abs() <= 1e-4, || format!("psnr(a, a+0.1) = {p}"))?;
    let s = ssim(&a, &a).map_err(e)?;
    check((s - 1.0).abs() <= 1e-9, || format!("ssim(a, a) = {s}"))?;
    Ok(format!("psnr {p:.6} dB, ssim(a,a) = {s}"))
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 7] = [
        ("parameter counts", parameter_counts, Duration::from_secs(1)),
        ("kernel oracles", kernel_oracles, Duration::from_secs(60)),
        ("identity invariants", identity_invariants, Duration::from_secs(30)),
        ("loss constants", loss_constants, Duration::MAX),
        ("symmetry and determinism", symmetry_and_determinism, Duration::MAX),
        ("end-to-end run and eval", end_to_end, Duration::MAX),
        ("metric sanity", metric_sanity, Duration::MAX),
    ];
    let mut failed = Vec::new();
    for (name, f, budget) in criteria {
        let start = Instant::now();
        let mut result = f();
        let elapsed = start.elapsed();
        if result.is_ok() && elapsed > budget {
            result = Err(format!("took {elapsed:?}, budget {budget:?}"));
        }
        match &result {
            Ok(detail) => println!("PASS  {name:<26} {:>8.3} s  {detail}", elapsed.as_secs_f64()),
            Err(why) => {
                println!("FAIL  {name:<26} {:>8.3} s  {why}", elapsed.as_secs_f64());
                failed.push(name);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
