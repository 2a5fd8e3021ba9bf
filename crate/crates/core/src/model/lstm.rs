use rand::Rng;

use super::config::LstmVariant;
use crate::numcore::{NumError, ParamId, ParamStore, Tape, Tensor, Var};

/// Parameters of one LSTM cell: an input matrix, a recurrent matrix and a
/// bias for each of the candidate `g` and the gates `i`, `f`, `o`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LstmCell {
    pub w_gx: ParamId,
    pub w_gh: ParamId,
    pub w_ix: ParamId,
    pub w_ih: ParamId,
    pub w_fx: ParamId,
    pub w_fh: ParamId,
    pub w_ox: ParamId,
    pub w_oh: ParamId,
    pub b_g: ParamId,
    pub b_i: ParamId,
    pub b_f: ParamId,
    pub b_o: ParamId,
    pub input_dim: usize,
    pub hidden_dim: usize,
}

pub(crate) fn glorot(rng: &mut impl Rng, rows: usize, cols: usize) -> Tensor {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols).map(|_| rng.gen_range(-bound..bound)).collect();
    Tensor::matrix(rows, cols, data).expect("positive dims")
}

impl LstmCell {
    /// Registers the cell's parameters under `prefix.`.
    pub fn register(
        store: &mut ParamStore,
        prefix: &str,
        input_dim: usize,
        hidden_dim: usize,
        rng: &mut impl Rng,
    ) -> Result<Self, NumError> {
        let mut mat = |name: &str, cols: usize, store: &mut ParamStore| {
            store.add(format!("{prefix}.{name}"), glorot(rng, hidden_dim, cols))
        };
        let w_gx = mat("w_gx", input_dim, store)?;
        let w_gh = mat("w_gh", hidden_dim, store)?;
        let w_ix = mat("w_ix", input_dim, store)?;
        let w_ih = mat("w_ih", hidden_dim, store)?;
        let w_fx = mat("w_fx", input_dim, store)?;
        let w_fh = mat("w_fh", hidden_dim, store)?;
        let w_ox = mat("w_ox", input_dim, store)?;
        let w_oh = mat("w_oh", hidden_dim, store)?;
        let mut bias = |name: &str| store.add(format!("{prefix}.{name}"), Tensor::zeros(&[hidden_dim]));
        Ok(LstmCell {
            w_gx,
            w_gh,
            w_ix,
            w_ih,
            w_fx,
            w_fh,
            w_ox,
            w_oh,
            b_g: bias("b_g")?,
            b_i: bias("b_i")?,
            b_f: bias("b_f")?,
            b_o: bias("b_o")?,
            input_dim,
            hidden_dim,
        })
    }

    /// Looks the cell's parameters up by name.
    pub fn lookup(store: &ParamStore, prefix: &str) -> Option<Self> {
        let id = |name: &str| store.id(&format!("{prefix}.{name}"));
        let w_gx = id("w_gx")?;
        let shape = store.value(w_gx).shape();
        Some(LstmCell {
            w_gx,
            w_gh: id("w_gh")?,
            w_ix: id("w_ix")?,
            w_ih: id("w_ih")?,
            w_fx: id("w_fx")?,
            w_fh: id("w_fh")?,
            w_ox: id("w_ox")?,
            w_oh: id("w_oh")?,
            b_g: id("b_g")?,
            b_i: id("b_i")?,
            b_f: id("b_f")?,
            b_o: id("b_o")?,
            input_dim: shape[1],
            hidden_dim: shape[0],
        })
    }
}

fn affine(tape: &mut Tape, wx: ParamId, x: Var, wh: ParamId, h: Var, b: ParamId) -> Result<Var, NumError> {
    let (wx, wh, b) = (tape.param(wx), tape.param(wh), tape.param(b));
    let a = tape.matmul(wx, x)?;
    let c = tape.matmul(wh, h)?;
    let sum = tape.add(a, c)?;
    tape.add(sum, b)
}

/// One time step. Returns `(h_t, s_t)`.
pub fn lstm_step(
    tape: &mut Tape,
    cell: &LstmCell,
    variant: LstmVariant,
    x: Var,
    h_prev: Var,
    s_prev: Var,
) -> Result<(Var, Var), NumError> {
    let g = affine(tape, cell.w_gx, x, cell.w_gh, h_prev, cell.b_g)?;
    let g = tape.tanh(g);
    let i = affine(tape, cell.w_ix, x, cell.w_ih, h_prev, cell.b_i)?;
    let i = tape.sigmoid(i);
    let f = affine(tape, cell.w_fx, x, cell.w_fh, h_prev, cell.b_f)?;
    let f = tape.sigmoid(f);
    let o = affine(tape, cell.w_ox, x, cell.w_oh, h_prev, cell.b_o)?;
    let o = tape.sigmoid(o);

    let gi = tape.mul(g, i)?;
    let sf = tape.mul(s_prev, f)?;
    let s = tape.add(gi, sf)?;
    let h = match variant {
        LstmVariant::Standard => {
            let ts = tape.tanh(s);
            tape.mul(o, ts)?
        }
        LstmVariant::PaperLiteral => {
            let so = tape.mul(s, o)?;
            tape.tanh(so)
        }
    };
    Ok((h, s))
}

/// Runs the cell over `inputs` from zero initial state; returns every `h_t`.
pub fn lstm_sequence(
    tape: &mut Tape,
    cell: &LstmCell,
    variant: LstmVariant,
    inputs: &[Var],
) -> Result<Vec<Var>, NumError> {
    let mut h = tape.constant(Tensor::zeros(&[cell.hidden_dim]));
    let mut s = tape.constant(Tensor::zeros(&[cell.hidden_dim]));
    let mut out = Vec::with_capacity(inputs.len());
    for &x in inputs {
        let (h2, s2) = lstm_step(tape, cell, variant, x, h, s)?;
        h = h2;
        s = s2;
        out.push(h);
    }
    Ok(out)
}
