//! Cross-view interaction module.
//!
//! For the left view (the right view mirrors it with its own weights):
//!
//! ```text
//! Q = q_dw(q_pw(LN_L(F_L)))    K = k_dw(k_pw(LN_R(F_R)))    V = v_dw(v_pw(F_R))
//! F_L' = γ_L ⊙ out_pw(softmax(Q Kᵀ / √C) V) + F_L
//! ```
//!
//! Attention runs independently along each image row, i.e. along the
//! epipolar line of a rectified pair: for row `h` the score matrix is W×W.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::params::{ParameterStore, Slot};
use crate::tensor::{softmax_in_place, Conv2d, ConvSpec, LayerNorm, Tensor};

/// Projections for one direction of attention (queries from one view,
/// keys and values from the other).
#[derive(Clone, Debug)]
pub struct DirectionParams {
    pub q_pw: Conv2d,
    pub q_dw: Conv2d,
    pub k_pw: Conv2d,
    pub k_dw: Conv2d,
    pub v_pw: Conv2d,
    pub v_dw: Conv2d,
    pub out_pw: Conv2d,
}

impl DirectionParams {
    const NAMES: [&'static str; 7] = ["q_pw", "q_dw", "k_pw", "k_dw", "v_pw", "v_dw", "out_pw"];

    fn spec(name: &str, c: usize) -> ConvSpec {
        if name.ends_with("_dw") {
            ConvSpec::depthwise(c, 3, 1)
        } else {
            ConvSpec::pointwise(c, c)
        }
    }

    fn layout(dir: &str, c: usize) -> Vec<Slot> {
        Self::NAMES
            .iter()
            .map(|name| Slot::conv(format!("{dir}.{name}"), Self::spec(name, c)))
            .collect()
    }

    fn from_store(store: &ParameterStore, prefix: &str, c: usize) -> Result<Self> {
        let conv = |name: &str| store.conv(&format!("{prefix}.{name}"), Self::spec(name, c));
        Ok(Self {
            q_pw: conv("q_pw")?,
            q_dw: conv("q_dw")?,
            k_pw: conv("k_pw")?,
            k_dw: conv("k_dw")?,
            v_pw: conv("v_pw")?,
            v_dw: conv("v_dw")?,
            out_pw: conv("out_pw")?,
        })
    }
}

#[derive(Clone, Debug)]
pub struct CvimParams {
    pub ln_left: LayerNorm,
    pub ln_right: LayerNorm,
    /// Queries from the left view, keys/values from the right.
    pub l2r: DirectionParams,
    /// Queries from the right view, keys/values from the left.
    pub r2l: DirectionParams,
    pub gamma_left: Vec<f32>,
    pub gamma_right: Vec<f32>,
}

impl CvimParams {
    pub fn layout(c: usize) -> Vec<Slot> {
        let mut slots = vec![Slot::norm("ln_left", c), Slot::norm("ln_right", c)];
        slots.extend(DirectionParams::layout("l2r", c));
        slots.extend(DirectionParams::layout("r2l", c));
        slots.push(Slot::vector("gamma_left", c));
        slots.push(Slot::vector("gamma_right", c));
        slots
    }

    pub fn from_store(store: &ParameterStore, prefix: &str, c: usize) -> Result<Self> {
        Ok(Self {
            ln_left: store.norm(&format!("{prefix}.ln_left"), c)?,
            ln_right: store.norm(&format!("{prefix}.ln_right"), c)?,
            l2r: DirectionParams::from_store(store, &format!("{prefix}.l2r"), c)?,
            r2l: DirectionParams::from_store(store, &format!("{prefix}.r2l"), c)?,
            gamma_left: store.vector(&format!("{prefix}.gamma_left"), c)?,
            gamma_right: store.vector(&format!("{prefix}.gamma_right"), c)?,
        })
    }

    /// The same module with the roles of the two views exchanged.
    pub fn mirrored(&self) -> Self {
        Self {
            ln_left: self.ln_right.clone(),
            ln_right: self.ln_left.clone(),
            l2r: self.r2l.clone(),
            r2l: self.l2r.clone(),
            gamma_left: self.gamma_right.clone(),
            gamma_right: self.gamma_left.clone(),
        }
    }
}

/// Scaled dot-product attention along rows. `q`, `k`, `v` are (C, H, W);
/// for each row the W queries attend over the W keys of the same row.
/// Scores are divided by `√C`.
pub fn row_attention(q: &Tensor, k: &Tensor, v: &Tensor) -> Result<Tensor> {
    q.ensure_same_shape(k, "row_attention")?;
    q.ensure_same_shape(v, "row_attention")?;
    let (c, h, w) = q.shape();
    let inv_scale = 1.0 / (c as f32).sqrt();

    let rows: Vec<Vec<f32>> = (0..h)
        .into_par_iter()
        .map(|y| {
            // Transpose the row to position-major so dot products are contiguous.
            let gather = |t: &Tensor| -> Vec<f32> {
                let mut m = vec![0.0f32; w * c];
                for ch in 0..c {
                    let row = &t.channel(ch)[y * w..(y + 1) * w];
                    for (x, &val) in row.iter().enumerate() {
                        m[x * c + ch] = val;
                    }
                }
                m
            };
            let qt = gather(q);
            let kt = gather(k);
            let mut scores = vec![0.0f32; w * w];
            for i in 0..w {
                let qi = &qt[i * c..(i + 1) * c];
                let srow = &mut scores[i * w..(i + 1) * w];
                for (j, s) in srow.iter_mut().enumerate() {
                    let kj = &kt[j * c..(j + 1) * c];
                    let dot = qi.iter().zip(kj).fold(0.0f32, |acc, (a, b)| acc + a * b);
                    *s = dot * inv_scale;
                }
                softmax_in_place(srow);
            }
            // out[ch][i] = Σ_j A[i][j] · V[ch][j]
            let mut out = vec![0.0f32; c * w];
            for ch in 0..c {
                let vrow = &v.channel(ch)[y * w..(y + 1) * w];
                for i in 0..w {
                    let a = &scores[i * w..(i + 1) * w];
                    out[ch * w + i] = a.iter().zip(vrow).fold(0.0f32, |acc, (p, x)| acc + p * x);
                }
            }
            out
        })
        .collect();

    let mut data = vec![0.0f32; c * h * w];
    for (y, row) in rows.iter().enumerate() {
        for ch in 0..c {
            data[(ch * h + y) * w..(ch * h + y + 1) * w].copy_from_slice(&row[ch * w..(ch + 1) * w]);
        }
    }
    Tensor::new(c, h, w, data)
}

fn check_views(a: &Tensor, b: &Tensor, op: &'static str) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::shape(
            op,
            format!("view shapes differ: {:?} vs {:?}", a.shape(), b.shape()),
        ));
    }
    Ok(())
}

/// Attention of already layer-normed source/target plus the raw target.
fn attend(
    normed_source: &Tensor,
    normed_target: &Tensor,
    raw_target: &Tensor,
    dir: &DirectionParams,
) -> Result<Tensor> {
    let q = dir.q_dw.forward(&dir.q_pw.forward(normed_source)?)?;
    let k = dir.k_dw.forward(&dir.k_pw.forward(normed_target)?)?;
    let v = dir.v_dw.forward(&dir.v_pw.forward(raw_target)?)?;
    dir.out_pw.forward(&row_attention(&q, &k, &v)?)
}

/// Cross-view features for `source` gathered from `target`. The value path
/// reads the target without normalization.
pub fn cross_view_attention(
    source: &Tensor,
    target: &Tensor,
    source_ln: &LayerNorm,
    target_ln: &LayerNorm,
    dir: &DirectionParams,
) -> Result<Tensor> {
    check_views(source, target, "cross_view_attention")?;
    attend(
        &source_ln.forward(source)?,
        &target_ln.forward(target)?,
        target,
        dir,
    )
}

/// `x + γ ⊙ cross`, channel by channel. Channels with `γ = 0` are copied
/// through untouched.
fn fuse(x: &Tensor, gamma: &[f32], cross: Option<&Tensor>) -> Tensor {
    let mut out = x.clone();
    if let Some(cross) = cross {
        let n = x.plane_len();
        for (ch, &g) in gamma.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            let dst = &mut out.data_mut()[ch * n..(ch + 1) * n];
            for (d, &a) in dst.iter_mut().zip(cross.channel(ch)) {
                *d += g * a;
            }
        }
    }
    out
}

pub fn cvim_forward(f_left: &Tensor, f_right: &Tensor, p: &CvimParams) -> Result<(Tensor, Tensor)> {
    check_views(f_left, f_right, "cvim_forward")?;
    let c = f_left.channels();
    if p.gamma_left.len() != c || p.gamma_right.len() != c {
        return Err(Error::shape(
            "cvim_forward",
            format!("input has {c} channels, γ vectors have {}", p.gamma_left.len()),
        ));
    }
    let need_left = p.gamma_left.iter().any(|&g| g != 0.0);
    let need_right = p.gamma_right.iter().any(|&g| g != 0.0);
    if !need_left && !need_right {
        return Ok((f_left.clone(), f_right.clone()));
    }

    let normed_left = p.ln_left.forward(f_left)?;
    let normed_right = p.ln_right.forward(f_right)?;
    let (l2r, r2l) = rayon::join(
        || {
            need_left
                .then(|| attend(&normed_left, &normed_right, f_right, &p.l2r))
                .transpose()
        },
        || {
            need_right
                .then(|| attend(&normed_right, &normed_left, f_left, &p.r2l))
                .transpose()
        },
    );
    let (l2r, r2l) = (l2r?, r2l?);
    Ok((
        fuse(f_left, &p.gamma_left, l2r.as_ref()),
        fuse(f_right, &p.gamma_right, r2l.as_ref()),
    ))
}
