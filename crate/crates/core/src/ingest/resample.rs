/// Polyphase windowed-sinc resampler with a 64-tap Kaiser-windowed kernel.
///
/// The rate ratio is reduced to `up/down`; output sample `n` sits at input
/// position `n·down/up`, so only `up` distinct fractional phases occur and
/// their kernels are tabulated once.
#[derive(Debug, Clone)]
pub struct SincResampler {
    up: usize,
    down: usize,
    table: Vec<f32>,
}

const TAPS: usize = 64;
const HALF: isize = (TAPS / 2) as isize;
const KAISER_BETA: f64 = 8.6;

impl SincResampler {
    pub fn new(from_rate: u32, to_rate: u32) -> Self {
        assert!(from_rate > 0 && to_rate > 0);
        let g = gcd(from_rate as usize, to_rate as usize);
        let up = to_rate as usize / g;
        let down = from_rate as usize / g;
        let cutoff = (up as f64 / down as f64).min(1.0);
        let i0_beta = bessel_i0(KAISER_BETA);

        let mut table = Vec::with_capacity(up * TAPS);
        for phase in 0..up {
            let frac = phase as f64 / up as f64;
            let start = table.len();
            let mut sum = 0.0;
            for o in (1 - HALF)..=HALF {
                let d = o as f64 - frac;
                let r = d / HALF as f64;
                let window = if r.abs() >= 1.0 {
                    0.0
                } else {
                    bessel_i0(KAISER_BETA * (1.0 - r * r).sqrt()) / i0_beta
                };
                let h = cutoff * sinc(cutoff * d) * window;
                sum += h;
                table.push(h as f32);
            }
            // unit DC gain per phase
            for h in &mut table[start..] {
                *h = (*h as f64 / sum) as f32;
            }
        }
        Self { up, down, table }
    }

    pub fn output_len(&self, input_len: usize) -> usize {
        (input_len * self.up).div_ceil(self.down)
    }

    pub fn process(&self, input: &[f32]) -> Vec<f32> {
        let n_out = self.output_len(input.len());
        let n_in = input.len() as isize;
        let mut out = Vec::with_capacity(n_out);
        for n in 0..n_out {
            let pos = n * self.down;
            let base = (pos / self.up) as isize;
            let phase = pos % self.up;
            let kernel = &self.table[phase * TAPS..(phase + 1) * TAPS];
            let mut acc = 0.0f64;
            for (tap, &h) in kernel.iter().enumerate() {
                let idx = base + tap as isize + 1 - HALF;
                if (0..n_in).contains(&idx) {
                    acc += h as f64 * input[idx as usize] as f64;
                }
            }
            out.push(acc as f32);
        }
        out
    }
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Zeroth-order modified Bessel function of the first kind (power series).
fn bessel_i0(x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    while term > 1e-16 * sum {
        term *= (half / k) * (half / k);
        sum += term;
        k += 1.0;
    }
    sum
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}
