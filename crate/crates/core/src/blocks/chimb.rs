//! Cross-hierarchy information mining block.
//!
//! ```text
//! F_chie = pw_out0( H( SG( dw3_1( pw_expand1( LN1(F_in) ) ) ) ) ) + F_in
//! H(X)   = X ⊙ lka_pw(lka_dwd7(lka_dw5(X)))  +  X ⊙ ca_pw(avgpool(X))
//! F_out  = pw_out3( NG( dw3_2( pw_expand2( LN2(F_chie) ) ) ) ) + F_chie
//! ```
//!
//! `SG(X) = X1 ⊙ X2` and `NG(X) = GELU(X1) ⊙ X2` over the two channel halves,
//! so the 2× expansions bring the width back to C.

use super::PoolWindow;
use crate::error::{Error, Result};
use crate::params::{ParameterStore, Slot};
use crate::tensor::{
    elementwise_add, elementwise_mul, gelu, global_avg_pool, local_avg_pool, split_channels,
    Conv2d, ConvSpec, LayerNorm, Tensor,
};

/// Dilation of the 7×7 depth-wise conv inside large-kernel attention.
pub const LKA_DILATION: usize = 3;

#[derive(Clone, Debug)]
pub struct ChimbParams {
    pub ln1: LayerNorm,
    pub pw_expand1: Conv2d,
    pub dw3_1: Conv2d,
    pub ca_pw: Conv2d,
    pub lka_dw5: Conv2d,
    pub lka_dwd7: Conv2d,
    pub lka_pw: Conv2d,
    pub pw_out0: Conv2d,
    pub ln2: LayerNorm,
    pub pw_expand2: Conv2d,
    pub dw3_2: Conv2d,
    pub pw_out3: Conv2d,
}

impl ChimbParams {
    pub fn layout(c: usize) -> Vec<Slot> {
        vec![
            Slot::norm("ln1", c),
            Slot::conv("pw_expand1", ConvSpec::pointwise(c, 2 * c)),
            Slot::conv("dw3_1", ConvSpec::depthwise(2 * c, 3, 1)),
            Slot::conv("ca_pw", ConvSpec::pointwise(c, c)),
            Slot::conv("lka_dw5", ConvSpec::depthwise(c, 5, 1)),
            Slot::conv("lka_dwd7", ConvSpec::depthwise(c, 7, LKA_DILATION)),
            Slot::conv("lka_pw", ConvSpec::pointwise(c, c)),
            Slot::conv("pw_out0", ConvSpec::pointwise(c, c)),
            Slot::norm("ln2", c),
            Slot::conv("pw_expand2", ConvSpec::pointwise(c, 2 * c)),
            Slot::conv("dw3_2", ConvSpec::depthwise(2 * c, 3, 1)),
            Slot::conv("pw_out3", ConvSpec::pointwise(c, c)),
        ]
    }

    /// Loads the block stored under `prefix` (e.g. `blocks.0.chimb`).
    pub fn from_store(store: &ParameterStore, prefix: &str, c: usize) -> Result<Self> {
        let conv = |name: &str, spec| store.conv(&format!("{prefix}.{name}"), spec);
        let norm = |name: &str| store.norm(&format!("{prefix}.{name}"), c);
        Ok(Self {
            ln1: norm("ln1")?,
            pw_expand1: conv("pw_expand1", ConvSpec::pointwise(c, 2 * c))?,
            dw3_1: conv("dw3_1", ConvSpec::depthwise(2 * c, 3, 1))?,
            ca_pw: conv("ca_pw", ConvSpec::pointwise(c, c))?,
            lka_dw5: conv("lka_dw5", ConvSpec::depthwise(c, 5, 1))?,
            lka_dwd7: conv("lka_dwd7", ConvSpec::depthwise(c, 7, LKA_DILATION))?,
            lka_pw: conv("lka_pw", ConvSpec::pointwise(c, c))?,
            pw_out0: conv("pw_out0", ConvSpec::pointwise(c, c))?,
            ln2: norm("ln2")?,
            pw_expand2: conv("pw_expand2", ConvSpec::pointwise(c, 2 * c))?,
            dw3_2: conv("dw3_2", ConvSpec::depthwise(2 * c, 3, 1))?,
            pw_out3: conv("pw_out3", ConvSpec::pointwise(c, c))?,
        })
    }

    pub fn channels(&self) -> usize {
        self.ca_pw.spec.in_channels
    }
}

fn split_even(x: &Tensor, op: &'static str) -> Result<(Tensor, Tensor)> {
    if x.channels() % 2 != 0 {
        return Err(Error::shape(op, format!("channel count {} is odd", x.channels())));
    }
    split_channels(x)
}

pub fn simple_gate(x: &Tensor) -> Result<Tensor> {
    let (a, b) = split_even(x, "simple_gate")?;
    elementwise_mul(&a, &b)
}

pub fn nonlinear_gate(x: &Tensor) -> Result<Tensor> {
    let (a, b) = split_even(x, "nonlinear_gate")?;
    elementwise_mul(&gelu(&a), &b)
}

/// `x ⊙ ca_pw(avgpool(x))`. With a window the pooling is local, so the
/// scale varies over space; without one it is global and broadcast.
pub fn channel_attention(x: &Tensor, ca_pw: &Conv2d, tlc: Option<PoolWindow>) -> Result<Tensor> {
    match tlc {
        None => {
            let scales = ca_pw.forward(&global_avg_pool(x))?;
            let n = x.plane_len();
            let data = x
                .data()
                .chunks(n)
                .zip(scales.data())
                .flat_map(|(plane, &s)| plane.iter().map(move |&v| v * s))
                .collect();
            Tensor::new(x.channels(), x.height(), x.width(), data)
        }
        Some(win) => {
            let scales = ca_pw.forward(&local_avg_pool(x, win.height, win.width)?)?;
            elementwise_mul(x, &scales)
        }
    }
}

/// The multiplicative map of large-kernel attention, before it is applied.
pub(crate) fn lka_map(x: &Tensor, dw5: &Conv2d, dwd7: &Conv2d, pw: &Conv2d) -> Result<Tensor> {
    pw.forward(&dwd7.forward(&dw5.forward(x)?)?)
}

pub fn large_kernel_attention(
    x: &Tensor,
    dw5: &Conv2d,
    dwd7: &Conv2d,
    pw: &Conv2d,
) -> Result<Tensor> {
    elementwise_mul(x, &lka_map(x, dw5, dwd7, pw)?)
}

fn hybrid_attention(x: &Tensor, p: &ChimbParams, tlc: Option<PoolWindow>) -> Result<Tensor> {
    let lka = large_kernel_attention(x, &p.lka_dw5, &p.lka_dwd7, &p.lka_pw)?;
    let ca = channel_attention(x, &p.ca_pw, tlc)?;
    elementwise_add(&lka, &ca)
}

pub fn chimb_forward(f_in: &Tensor, p: &ChimbParams, tlc: Option<PoolWindow>) -> Result<Tensor> {
    if f_in.channels() != p.channels() {
        return Err(Error::shape(
            "chimb_forward",
            format!(
                "input has {} channels, block expects {}",
                f_in.channels(),
                p.channels()
            ),
        ));
    }
    let x = p.ln1.forward(f_in)?;
    let x = p.dw3_1.forward(&p.pw_expand1.forward(&x)?)?;
    let x = simple_gate(&x)?;
    let x = hybrid_attention(&x, p, tlc)?;
    let chie = elementwise_add(&p.pw_out0.forward(&x)?, f_in)?;

    let y = p.ln2.forward(&chie)?;
    let y = p.dw3_2.forward(&p.pw_expand2.forward(&y)?)?;
    let y = nonlinear_gate(&y)?;
    elementwise_add(&p.pw_out3.forward(&y)?, &chie)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_util::{random_store, random_tensor};

    fn params(c: usize, seed: u64) -> ChimbParams {
        let store = random_store("b", &ChimbParams::layout(c), seed);
        ChimbParams::from_store(&store, "b", c).unwrap()
    }

    fn zero_convs(p: &mut ChimbParams) {
        for conv in [
            &mut p.pw_expand1,
            &mut p.dw3_1,
            &mut p.ca_pw,
            &mut p.lka_dw5,
            &mut p.lka_dwd7,
            &mut p.lka_pw,
            &mut p.pw_out0,
            &mut p.pw_expand2,
            &mut p.dw3_2,
            &mut p.pw_out3,
        ] {
            conv.weight.data_mut().fill(0.0);
            if let Some(b) = conv.bias.as_mut() {
                b.fill(0.0);
            }
        }
    }

    #[test]
    fn gates() {
        let x = Tensor::new(2, 1, 1, vec![2.0, 3.0]).unwrap();
        assert_eq!(simple_gate(&x).unwrap().data(), &[6.0]);
        assert!(simple_gate(&Tensor::zeros(3, 1, 1)).is_err());
        assert!(nonlinear_gate(&Tensor::zeros(5, 2, 2)).is_err());

        let r = random_tensor(4, 3, 3, 1);
        let ones = Tensor::full(4, 3, 3, 1.0);
        let cat = crate::tensor::concat_channels(&r, &ones).unwrap();
        assert_eq!(simple_gate(&cat).unwrap(), r);

        let zeros = Tensor::zeros(4, 3, 3);
        let ng = nonlinear_gate(&crate::tensor::concat_channels(&zeros, &r).unwrap()).unwrap();
        assert!(ng.data().iter().all(|&v| v == 0.0));

        let big = Tensor::full(4, 3, 3, 100.0);
        let ng = nonlinear_gate(&crate::tensor::concat_channels(&big, &r).unwrap()).unwrap();
        for (a, b) in ng.data().iter().zip(r.data()) {
            assert!((a - 100.0 * b).abs() < 1e-5);
        }
    }

    #[test]
    fn gates_match_split_then_multiply() {
        let x = random_tensor(8, 4, 5, 7);
        let (a, b) = split_channels(&x).unwrap();
        assert_eq!(simple_gate(&x).unwrap(), elementwise_mul(&a, &b).unwrap());
        assert_eq!(
            nonlinear_gate(&x).unwrap(),
            elementwise_mul(&gelu(&a), &b).unwrap()
        );
    }

    #[test]
    fn channel_attention_cases() {
        let c = 3;
        let mut p = params(c, 3);
        let eye: Vec<f32> = (0..c * c).map(|i| if i % (c + 1) == 0 { 1.0 } else { 0.0 }).collect();
        p.ca_pw.weight.data_mut().copy_from_slice(&eye);
        p.ca_pw.bias.as_mut().unwrap().fill(0.0);
        let x = Tensor::full(c, 4, 4, 0.5);
        let out = channel_attention(&x, &p.ca_pw, None).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.25));

        let r = random_tensor(c, 5, 6, 4);
        let mut zero = p.ca_pw.clone();
        zero.weight.data_mut().fill(0.0);
        let out = channel_attention(&r, &zero, None).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));

        let p = params(c, 5);
        let global = channel_attention(&r, &p.ca_pw, None).unwrap();
        let local = channel_attention(&r, &p.ca_pw, Some(PoolWindow::new(9, 11))).unwrap();
        assert_eq!(global, local);
        let small = channel_attention(&r, &p.ca_pw, Some(PoolWindow::new(2, 2))).unwrap();
        assert_ne!(global, small);
    }

    #[test]
    fn lka_receptive_field() {
        let c = 2;
        let mut p = params(c, 11);
        for conv in [&mut p.lka_dw5, &mut p.lka_dwd7, &mut p.lka_pw] {
            conv.bias.as_mut().unwrap().fill(0.0);
        }
        let mut x = Tensor::zeros(c, 31, 31);
        x.set(0, 15, 15, 1.0);
        x.set(1, 15, 15, 1.0);
        let map = lka_map(&x, &p.lka_dw5, &p.lka_dwd7, &p.lka_pw).unwrap();

        // Offsets reachable by a 5x5 tap followed by a 7x7 dilation-3 tap.
        let mut reach = std::collections::HashSet::new();
        for a in -2i32..=2 {
            for b in -3i32..=3 {
                reach.insert(a + LKA_DILATION as i32 * b);
            }
        }
        for ch in 0..c {
            for y in 0..31i32 {
                for xx in 0..31i32 {
                    let inside = reach.contains(&(y - 15)) && reach.contains(&(xx - 15));
                    let v = map.get(ch, y as usize, xx as usize);
                    if !inside {
                        assert_eq!(v, 0.0, "({ch},{y},{xx})");
                    }
                }
            }
            assert_ne!(map.get(ch, 15 + 11, 15 - 11), 0.0);
        }
    }

    #[test]
    fn lka_zero_and_composition() {
        let p = params(4, 12);
        let x = random_tensor(4, 6, 7, 13);
        let expected = elementwise_mul(
            &x,
            &p.lka_pw
                .forward(&p.lka_dwd7.forward(&p.lka_dw5.forward(&x).unwrap()).unwrap())
                .unwrap(),
        )
        .unwrap();
        assert_eq!(
            large_kernel_attention(&x, &p.lka_dw5, &p.lka_dwd7, &p.lka_pw).unwrap(),
            expected
        );

        let mut z = p.clone();
        zero_convs(&mut z);
        let out = large_kernel_attention(&x, &z.lka_dw5, &z.lka_dwd7, &z.lka_pw).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_convs_are_identity() {
        let mut p = params(8, 21);
        zero_convs(&mut p);
        let x = random_tensor(8, 6, 10, 22);
        assert_eq!(chimb_forward(&x, &p, None).unwrap(), x);
    }

    #[test]
    fn shape_contract() {
        for (c, h, w) in [(8, 6, 10), (48, 4, 4)] {
            let p = params(c, 31);
            let x = random_tensor(c, h, w, 32);
            assert_eq!(chimb_forward(&x, &p, None).unwrap().shape(), (c, h, w));
        }
        let p = params(4, 1);
        assert!(chimb_forward(&Tensor::zeros(6, 3, 3), &p, None).is_err());
    }

    #[test]
    fn matches_step_by_step_composition() {
        let c = 6;
        let p = params(c, 41);
        let x = random_tensor(c, 5, 7, 42);

        let t = crate::tensor::layer_norm_channel(&x, &p.ln1.gamma, &p.ln1.beta).unwrap();
        let t = p.pw_expand1.forward(&t).unwrap();
        let t = p.dw3_1.forward(&t).unwrap();
        let t = simple_gate(&t).unwrap();
        let lka = large_kernel_attention(&t, &p.lka_dw5, &p.lka_dwd7, &p.lka_pw).unwrap();
        let ca = channel_attention(&t, &p.ca_pw, None).unwrap();
        let h = elementwise_add(&lka, &ca).unwrap();
        let chie = elementwise_add(&p.pw_out0.forward(&h).unwrap(), &x).unwrap();
        let u = crate::tensor::layer_norm_channel(&chie, &p.ln2.gamma, &p.ln2.beta).unwrap();
        let u = p.dw3_2.forward(&p.pw_expand2.forward(&u).unwrap()).unwrap();
        let u = nonlinear_gate(&u).unwrap();
        let expected = elementwise_add(&p.pw_out3.forward(&u).unwrap(), &chie).unwrap();

        assert_eq!(chimb_forward(&x, &p, None).unwrap(), expected);
    }
}
