use rand::Rng;

use super::params::{ParamId, ParamSet};
use super::tape::{Tape, Var};
use crate::error::{Error, Result};

/// LSTM layer parameters. Gate rows are stacked in the order input, forget,
/// candidate, output.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Lstm {
    pub input: usize,
    pub hidden: usize,
    pub w_ih: ParamId,
    pub w_hh: ParamId,
    pub b: ParamId,
}

impl Lstm {
    pub fn new<R: Rng>(ps: &mut ParamSet, prefix: &str, input: usize, hidden: usize, rng: &mut R) -> Self {
        let w_ih = ps.add_uniform(format!("{prefix}.w_ih"), vec![4 * hidden, input], input, rng);
        let w_hh = ps.add_uniform(format!("{prefix}.w_hh"), vec![4 * hidden, hidden], hidden, rng);
        let b = ps.add_uniform(format!("{prefix}.b"), vec![4 * hidden], hidden, rng);
        Self {
            input,
            hidden,
            w_ih,
            w_hh,
            b,
        }
    }

    /// Looks the layer up by name in an existing parameter set.
    pub fn bind(ps: &ParamSet, prefix: &str) -> Result<Self> {
        let find = |s: &str| {
            ps.id(&format!("{prefix}.{s}"))
                .ok_or_else(|| Error::Checkpoint(format!("missing tensor {prefix}.{s}")))
        };
        let (w_ih, w_hh, b) = (find("w_ih")?, find("w_hh")?, find("b")?);
        let t = ps.get(w_ih);
        Ok(Self {
            input: t.cols(),
            hidden: t.rows() / 4,
            w_ih,
            w_hh,
            b,
        })
    }

    /// Runs the layer from a zero state and returns `h_1..h_K`.
    pub fn forward(&self, tape: &mut Tape, xs: &[Var]) -> Result<Vec<Var>> {
        if xs.is_empty() {
            return Err(Error::Shape {
                context: "lstm sequence".into(),
                expected: 1,
                got: 0,
            });
        }
        let h = self.hidden;
        let bias = tape.param(self.b);
        let mut state: Option<(Var, Var)> = None;
        let mut out = Vec::with_capacity(xs.len());
        for &x in xs {
            let got = tape.value(x).len();
            if got != self.input {
                return Err(Error::Shape {
                    context: "lstm input width".into(),
                    expected: self.input,
                    got,
                });
            }
            let zx = tape.matvec(self.w_ih, x);
            let mut z = tape.add(zx, bias);
            if let Some((hp, _)) = state {
                let zh = tape.matvec(self.w_hh, hp);
                z = tape.add(z, zh);
            }
            let zi = tape.slice(z, 0, h);
            let zf = tape.slice(z, h, h);
            let zg = tape.slice(z, 2 * h, h);
            let zo = tape.slice(z, 3 * h, h);
            let i = tape.sigmoid(zi);
            let g = tape.tanh(zg);
            let o = tape.sigmoid(zo);
            let mut c = tape.mul(i, g);
            if let Some((_, cp)) = state {
                let f = tape.sigmoid(zf);
                let keep = tape.mul(f, cp);
                c = tape.add(keep, c);
            }
            let tc = tape.tanh(c);
            let hn = tape.mul(o, tc);
            out.push(hn);
            state = Some((hn, c));
        }
        Ok(out)
    }
}

/// Fully connected layer `y = W x + b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dense {
    pub input: usize,
    pub output: usize,
    pub w: ParamId,
    pub b: Option<ParamId>,
}

impl Dense {
    pub fn new<R: Rng>(
        ps: &mut ParamSet,
        prefix: &str,
        input: usize,
        output: usize,
        bias: bool,
        rng: &mut R,
    ) -> Self {
        let w = ps.add_uniform(format!("{prefix}.w"), vec![output, input], input, rng);
        let b = bias.then(|| ps.add_uniform(format!("{prefix}.b"), vec![output], input, rng));
        Self { input, output, w, b }
    }

    pub fn bind(ps: &ParamSet, prefix: &str) -> Result<Self> {
        let w = ps
            .id(&format!("{prefix}.w"))
            .ok_or_else(|| Error::Checkpoint(format!("missing tensor {prefix}.w")))?;
        let t = ps.get(w);
        Ok(Self {
            input: t.cols(),
            output: t.rows(),
            w,
            b: ps.id(&format!("{prefix}.b")),
        })
    }

    pub fn forward(&self, tape: &mut Tape, x: Var) -> Var {
        let y = tape.matvec(self.w, x);
        match self.b {
            Some(b) => {
                let bv = tape.param(b);
                tape.add(y, bv)
            }
            None => y,
        }
    }
}
