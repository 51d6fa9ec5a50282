//! Independent reference implementations and fixtures shared by the
//! integration tests. Nothing here calls into the kernels under test.

#![allow(dead_code, clippy::needless_range_loop)]

use std::f64::consts::PI;
use std::path::Path;

use cvhssr::tensor::{ConvSpec, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, c: usize, h: usize, w: usize, lo: f32, hi: f32) -> Tensor {
    Tensor::from_fn(c, h, w, |_, _, _| rng.random_range(lo..hi))
}

/// Smooth image with values inside [0.1, 0.9].
pub fn smooth_image(h: usize, w: usize, phase: f32) -> Tensor {
    Tensor::from_fn(3, h, w, |c, y, x| {
        0.5 + 0.4 * ((y as f32 * 0.31 + phase).sin() * (x as f32 * 0.17 + c as f32).cos())
    })
}

/// Direct zero-padded cross-correlation; every output is a fresh f64 sum.
pub fn conv_oracle(input: &Tensor, spec: &ConvSpec, weight: &[f32], bias: &[f32]) -> Tensor {
    let (_, h, w) = input.shape();
    let (k, d) = (spec.kernel_size as i64, spec.dilation as i64);
    let half = d * (k - 1) / 2;
    let cin = spec.in_channels / spec.groups;
    let cout = spec.out_channels / spec.groups;
    let mut out = Tensor::zeros(spec.out_channels, h, w);
    for o in 0..spec.out_channels {
        for y in 0..h as i64 {
            for x in 0..w as i64 {
                let mut sum = bias[o] as f64;
                for j in 0..cin {
                    let ic = (o / cout) * cin + j;
                    for ky in 0..k {
                        for kx in 0..k {
                            let (sy, sx) = (y - half + ky * d, x - half + kx * d);
                            if (0..h as i64).contains(&sy) && (0..w as i64).contains(&sx) {
                                let wv = weight[(((o * cin + j) as i64 * k + ky) * k + kx) as usize];
                                sum += wv as f64 * input.get(ic, sy as usize, sx as usize) as f64;
                            }
                        }
                    }
                }
                out.set(o, y as usize, x as usize, sum as f32);
            }
        }
    }
    out
}

/// Textbook O(N²) DFT, one output bin at a time.
pub fn dft_oracle(plane: &[f32], h: usize, w: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(h * w);
    for u in 0..h {
        for v in 0..w {
            let mut acc = (0.0, 0.0);
            for y in 0..h {
                for x in 0..w {
                    let t = -2.0 * PI * ((u * y) as f64 / h as f64 + (v * x) as f64 / w as f64);
                    let a = plane[y * w + x] as f64;
                    acc.0 += a * t.cos();
                    acc.1 += a * t.sin();
                }
            }
            out.push(acc);
        }
    }
    out
}

/// Per-row attention: for row `y`, `out[:, y, i] = Σ_j softmax_j(q_i·k_j/√C) v[:, y, j]`.
pub fn attention_oracle(q: &Tensor, k: &Tensor, v: &Tensor) -> Tensor {
    let (c, h, w) = q.shape();
    let mut out = Tensor::zeros(c, h, w);
    for y in 0..h {
        for i in 0..w {
            let mut logits = vec![0.0f64; w];
            for (j, l) in logits.iter_mut().enumerate() {
                for ch in 0..c {
                    *l += q.get(ch, y, i) as f64 * k.get(ch, y, j) as f64;
                }
                *l /= (c as f64).sqrt();
            }
            let m = logits.iter().copied().fold(f64::MIN, f64::max);
            let z: f64 = logits.iter().map(|l| (l - m).exp()).sum();
            for ch in 0..c {
                let mut acc = 0.0;
                for j in 0..w {
                    acc += (logits[j] - m).exp() / z * v.get(ch, y, j) as f64;
                }
                out.set(ch, y, i, acc as f32);
            }
        }
    }
    out
}

/// SSIM by sliding a full 11×11 Gaussian window over every valid position.
pub fn ssim_oracle(a: &Tensor, b: &Tensor) -> f64 {
    const N: usize = 11;
    let (c, h, w) = a.shape();
    let g: Vec<f64> = (0..N).map(|i| (-((i as f64 - 5.0).powi(2)) / (2.0 * 1.5 * 1.5)).exp()).collect();
    let mut window = [[0.0f64; N]; N];
    let mut total = 0.0;
    for (i, row) in window.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = g[i] * g[j];
            total += *cell;
        }
    }
    let (c1, c2) = (0.01f64.powi(2), 0.03f64.powi(2));
    let mut channel_sum = 0.0;
    for ch in 0..c {
        let mut map_sum = 0.0;
        let mut count = 0usize;
        for y0 in 0..=h - N {
            for x0 in 0..=w - N {
                let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for dy in 0..N {
                    for dx in 0..N {
                        let wt = window[dy][dx] / total;
                        let va = a.get(ch, y0 + dy, x0 + dx) as f64;
                        let vb = b.get(ch, y0 + dy, x0 + dx) as f64;
                        ma += wt * va;
                        mb += wt * vb;
                        saa += wt * va * va;
                        sbb += wt * vb * vb;
                        sab += wt * va * vb;
                    }
                }
                let (va, vb, cov) = (saa - ma * ma, sbb - mb * mb, sab - ma * mb);
                map_sum += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
                count += 1;
            }
        }
        channel_sum += map_sum / count as f64;
    }
    channel_sum / c as f64
}

pub fn psnr_oracle(a: &Tensor, b: &Tensor) -> f64 {
    let n = a.data().len() as f64;
    let mse: f64 = a.data().iter().zip(b.data()).map(|(&x, &y)| (x as f64 - y as f64).powi(2)).sum::<f64>() / n;
    10.0 * (1.0 / mse).log10()
}

/// Half-pixel bilinear resize, source coordinates clamped at the borders.
pub fn bilinear_oracle(input: &Tensor, s: usize) -> Tensor {
    let (c, h, w) = input.shape();
    let coord = |o: usize, n: usize| {
        let src = ((o as f64 + 0.5) / s as f64 - 0.5).max(0.0);
        let i0 = (src.floor() as usize).min(n - 1);
        (i0, (i0 + 1).min(n - 1), src - i0 as f64)
    };
    Tensor::from_fn(c, h * s, w * s, |ch, y, x| {
        let (y0, y1, fy) = coord(y, h);
        let (x0, x1, fx) = coord(x, w);
        let p = |yy, xx| input.get(ch, yy, xx) as f64;
        let top = p(y0, x0) * (1.0 - fx) + p(y0, x1) * fx;
        let bot = p(y1, x0) * (1.0 - fx) + p(y1, x1) * fx;
        (top * (1.0 - fy) + bot * fy) as f32
    })
}

/// 8-bit RGB PNG writer independent of the library's encoder.
pub fn write_rgb_png(path: &Path, img: &Tensor) {
    let (_, h, w) = img.shape();
    let mut bytes = Vec::with_capacity(3 * h * w);
    for y in 0..h {
        for x in 0..w {
            for c in 0..3 {
                bytes.push((img.get(c, y, x).clamp(0.0, 1.0) * 255.0).round() as u8);
            }
        }
    }
    let file = std::fs::File::create(path).unwrap();
    let mut enc = png::Encoder::new(std::io::BufWriter::new(file), w as u32, h as u32);
    enc.set_color(png::ColorType::Rgb);
    enc.set_depth(png::BitDepth::Eight);
    enc.write_header().unwrap().write_image_data(&bytes).unwrap();
}

/// Writes `<root>/<scene>/{lr0,lr1,hr0,hr1}.png` for a smooth synthetic pair.
pub fn write_scene(root: &Path, scene: &str, lr_h: usize, lr_w: usize, scale: usize, phase: f32) {
    let dir = root.join(scene);
    std::fs::create_dir_all(&dir).unwrap();
    let (hh, hw) = (lr_h * scale, lr_w * scale);
    let hr0 = smooth_image(hh, hw, phase);
    let hr1 = Tensor::from_fn(3, hh, hw, |c, y, x| hr0.get(c, y, (x + 2).min(hw - 1)));
    let down = |t: &Tensor| {
        Tensor::from_fn(3, lr_h, lr_w, |c, y, x| {
            let mut acc = 0.0;
            for dy in 0..scale {
                for dx in 0..scale {
                    acc += t.get(c, y * scale + dy, x * scale + dx);
                }
            }
            acc / (scale * scale) as f32
        })
    };
    write_rgb_png(&dir.join("hr0.png"), &hr0);
    write_rgb_png(&dir.join("hr1.png"), &hr1);
    write_rgb_png(&dir.join("lr0.png"), &down(&hr0));
    write_rgb_png(&dir.join("lr1.png"), &down(&hr1));
}

/// Reads an 8-bit RGB PNG into [0, 1] without going through the library.
pub fn read_rgb_png(path: &Path) -> Tensor {
    let decoder = png::Decoder::new(std::io::BufReader::new(std::fs::File::open(path).unwrap()));
    let mut reader = decoder.read_info().unwrap();
    let mut buf = vec![0; reader.output_buffer_size().unwrap()];
    let info = reader.next_frame(&mut buf).unwrap();
    assert_eq!(info.color_type, png::ColorType::Rgb);
    let (h, w) = (info.height as usize, info.width as usize);
    Tensor::from_fn(3, h, w, |c, y, x| buf[(y * w + x) * 3 + c] as f32 / 255.0)
}
