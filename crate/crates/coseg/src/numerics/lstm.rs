//! Single LSTM cell expressed as tape ops.
//!
//! One fused weight matrix per cell: `w` is `4H x (I + H)` and `b` is `4H`,
//! with gate rows ordered input, forget, candidate, output. The pre-activation
//! is `z = w [x ; h_prev] + b`; gates use sigmoid except the candidate, which
//! uses tanh:
//!
//! ```text
//! c = f * c_prev + i * g
//! h = o * tanh(c)
//! ```

use super::tape::{Tape, ValueId};

/// Hidden and cell state after one step.
#[derive(Clone, Copy, Debug)]
pub struct LstmState {
    pub h: ValueId,
    pub c: ValueId,
}

/// Records one LSTM step on the tape and returns the new state.
pub fn lstm_step(
    tape: &mut Tape,
    w: ValueId,
    b: ValueId,
    x: ValueId,
    h_prev: ValueId,
    c_prev: ValueId,
) -> LstmState {
    let four_h = tape.value(b).numel();
    assert!(four_h % 4 == 0, "lstm bias length {four_h} is not a multiple of 4");
    let hidden = four_h / 4;
    assert_eq!(tape.value(h_prev).numel(), hidden, "h_prev does not match bias size");
    assert_eq!(tape.value(c_prev).numel(), hidden, "c_prev does not match bias size");

    let xh = tape.concat(x, h_prev);
    let wz = tape.matvec(w, xh);
    let z = tape.add(wz, b);

    let zi = tape.slice(z, 0, hidden);
    let zf = tape.slice(z, hidden, hidden);
    let zg = tape.slice(z, 2 * hidden, hidden);
    let zo = tape.slice(z, 3 * hidden, hidden);

    let i = tape.sigmoid(zi);
    let f = tape.sigmoid(zf);
    let g = tape.tanh(zg);
    let o = tape.sigmoid(zo);

    let fc = tape.mul(f, c_prev);
    let ig = tape.mul(i, g);
    let c = tape.add(fc, ig);
    let tc = tape.tanh(c);
    let h = tape.mul(o, tc);

    LstmState { h, c }
}
