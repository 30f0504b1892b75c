use super::{Init, NeuralError, ParamId, ParamStore, Tape, Var};

/// Parameters of one LSTM cell. Gate blocks are stacked in the order
/// input, forget, candidate, output; each block is `hidden` rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LstmCellParams {
    input_weights: ParamId,
    hidden_weights: ParamId,
    bias: ParamId,
    pub input_size: usize,
    pub hidden_size: usize,
}

/// An LSTM cell whose parameters have been copied onto a tape.
#[derive(Debug, Clone, Copy)]
pub struct BoundLstm {
    w: Var,
    u: Var,
    b: Var,
    hidden: usize,
}

impl LstmCellParams {
    /// Registers `{prefix}.w` (4H×D), `{prefix}.u` (4H×H) and `{prefix}.b`
    /// (4H). Weights are uniform in ±1/√fan-in; the forget-gate bias
    /// starts at 1.
    pub fn register(
        store: &mut ParamStore,
        prefix: &str,
        input_size: usize,
        hidden_size: usize,
    ) -> Result<Self, NeuralError> {
        let h4 = 4 * hidden_size;
        let w = store.register(
            &format!("{prefix}.w"),
            &[h4, input_size],
            Init::Uniform(1.0 / (input_size as f64).sqrt()),
        )?;
        let u = store.register(
            &format!("{prefix}.u"),
            &[h4, hidden_size],
            Init::Uniform(1.0 / (hidden_size as f64).sqrt()),
        )?;
        let b = store.register(&format!("{prefix}.b"), &[h4], Init::Zeros)?;
        store.values_mut(b)[hidden_size..2 * hidden_size].fill(1.0);
        Ok(Self {
            input_weights: w,
            hidden_weights: u,
            bias: b,
            input_size,
            hidden_size,
        })
    }

    fn ids(&self) -> (ParamId, ParamId, ParamId) {
        (self.input_weights, self.hidden_weights, self.bias)
    }

    pub fn bind(&self, tape: &mut Tape, store: &ParamStore) -> BoundLstm {
        let (w, u, b) = self.ids();
        BoundLstm {
            w: tape.param(store, w),
            u: tape.param(store, u),
            b: tape.param(store, b),
            hidden: self.hidden_size,
        }
    }

    pub fn zero_state(&self, tape: &mut Tape) -> (Var, Var) {
        (
            tape.constant(vec![0.0; self.hidden_size]),
            tape.constant(vec![0.0; self.hidden_size]),
        )
    }
}

impl BoundLstm {
    pub fn step(&self, tape: &mut Tape, x: Var, h: Var, c: Var) -> (Var, Var) {
        let hs = self.hidden;
        let wx = tape.matvec(self.w, x);
        let uh = tape.matvec(self.u, h);
        let z = tape.add(wx, uh);
        let z = tape.add(z, self.b);
        let zi = tape.slice(z, 0, hs);
        let zf = tape.slice(z, hs, hs);
        let zg = tape.slice(z, 2 * hs, hs);
        let zo = tape.slice(z, 3 * hs, hs);
        let i = tape.sigmoid(zi);
        let f = tape.sigmoid(zf);
        let g = tape.tanh(zg);
        let o = tape.sigmoid(zo);
        let fc = tape.mul(f, c);
        let ig = tape.mul(i, g);
        let c_next = tape.add(fc, ig);
        let tc = tape.tanh(c_next);
        let h_next = tape.mul(o, tc);
        (h_next, c_next)
    }
}

/// One LSTM update on plain vectors.
pub fn lstm_step(
    store: &ParamStore,
    cell: &LstmCellParams,
    x: &[f64],
    state: (&[f64], &[f64]),
) -> Result<(Vec<f64>, Vec<f64>), NeuralError> {
    let (h, c) = state;
    if x.len() != cell.input_size || h.len() != cell.hidden_size || c.len() != cell.hidden_size {
        return Err(NeuralError::Shape(format!(
            "lstm_step expects x:{} h:{} c:{}, got x:{} h:{} c:{}",
            cell.input_size,
            cell.hidden_size,
            cell.hidden_size,
            x.len(),
            h.len(),
            c.len()
        )));
    }
    let mut tape = Tape::new();
    let bound = cell.bind(&mut tape, store);
    let xv = tape.constant(x.to_vec());
    let hv = tape.constant(h.to_vec());
    let cv = tape.constant(c.to_vec());
    let (h2, c2) = bound.step(&mut tape, xv, hv, cv);
    Ok((tape.value(h2).to_vec(), tape.value(c2).to_vec()))
}
