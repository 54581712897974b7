use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shape {
    pub h: usize,
    pub w: usize,
    pub c: usize,
}

impl Shape {
    pub const fn new(h: usize, w: usize, c: usize) -> Self {
        Shape { h, w, c }
    }

    pub const fn len(&self) -> usize {
        self.h * self.w * self.c
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// One network stage. Parameter vectors hold weights first, then biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum Layer {
    /// Stride-1 convolution with zero "same" padding of `k/2`. Weights are
    /// laid out `[ky][kx][cin][cout]`.
    Conv {
        kh: usize,
        kw: usize,
        cin: usize,
        cout: usize,
        relu: bool,
        #[serde(skip)]
        params: Vec<f64>,
    },
    /// Non-overlapping max pooling (stride equals window).
    MaxPool { ph: usize, pw: usize },
    /// Nearest-neighbour upsampling.
    Upsample { fh: usize, fw: usize },
    /// Fully connected over the flattened input. Weights `[out][in]`.
    Dense {
        nin: usize,
        out: Shape,
        relu: bool,
        #[serde(skip)]
        params: Vec<f64>,
    },
}

impl Layer {
    pub fn conv(kh: usize, kw: usize, cin: usize, cout: usize, relu: bool) -> Layer {
        Layer::Conv {
            kh,
            kw,
            cin,
            cout,
            relu,
            params: alloc::vec![0.0; kh * kw * cin * cout + cout],
        }
    }

    pub fn dense(nin: usize, out: Shape, relu: bool) -> Layer {
        Layer::Dense {
            nin,
            out,
            relu,
            params: alloc::vec![0.0; nin * out.len() + out.len()],
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            Layer::Conv { kh, kw, cin, cout, .. } => kh * kw * cin * cout + cout,
            Layer::Dense { nin, out, .. } => nin * out.len() + out.len(),
            _ => 0,
        }
    }

    /// Number of weights (the leading part of the parameter vector).
    pub fn weight_count(&self) -> usize {
        match self {
            Layer::Conv { kh, kw, cin, cout, .. } => kh * kw * cin * cout,
            Layer::Dense { nin, out, .. } => nin * out.len(),
            _ => 0,
        }
    }

    /// `(fan_in, fan_out)` used by the initializer.
    pub fn fans(&self) -> (usize, usize) {
        match self {
            Layer::Conv { kh, kw, cin, cout, .. } => (kh * kw * cin, kh * kw * cout),
            Layer::Dense { nin, out, .. } => (*nin, out.len()),
            _ => (0, 0),
        }
    }

    pub fn params(&self) -> &[f64] {
        match self {
            Layer::Conv { params, .. } | Layer::Dense { params, .. } => params,
            _ => &[],
        }
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        match self {
            Layer::Conv { params, .. } | Layer::Dense { params, .. } => params,
            _ => &mut [],
        }
    }

    pub(crate) fn params_vec_mut(&mut self) -> Option<&mut Vec<f64>> {
        match self {
            Layer::Conv { params, .. } | Layer::Dense { params, .. } => Some(params),
            _ => None,
        }
    }

    pub fn has_relu(&self) -> bool {
        matches!(
            self,
            Layer::Conv { relu: true, .. } | Layer::Dense { relu: true, .. }
        )
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Layer::Conv { .. } => "conv",
            Layer::MaxPool { .. } => "maxpool",
            Layer::Upsample { .. } => "upsample",
            Layer::Dense { .. } => "dense",
        }
    }

    /// Output shape for `input`, or a description of the mismatch.
    pub fn output_shape(&self, input: Shape) -> Result<Shape, alloc::string::String> {
        use alloc::format;
        match *self {
            Layer::Conv { cin, cout, kh, kw, .. } => {
                if input.c != cin {
                    return Err(format!("conv expects {cin} input channels, got {}", input.c));
                }
                if kh % 2 == 0 || kw % 2 == 0 {
                    return Err(format!("conv kernel {kh}x{kw} must be odd"));
                }
                Ok(Shape::new(input.h, input.w, cout))
            }
            Layer::MaxPool { ph, pw } => {
                if ph == 0 || pw == 0 || input.h % ph != 0 || input.w % pw != 0 {
                    return Err(format!(
                        "{}x{} input is not divisible by {ph}x{pw} pooling",
                        input.h, input.w
                    ));
                }
                Ok(Shape::new(input.h / ph, input.w / pw, input.c))
            }
            Layer::Upsample { fh, fw } => Ok(Shape::new(input.h * fh, input.w * fw, input.c)),
            Layer::Dense { nin, out, .. } => {
                if input.len() != nin {
                    return Err(format!("dense expects {nin} inputs, got {}", input.len()));
                }
                Ok(out)
            }
        }
    }

    /// Forward pass. `argmax` receives, for pooling layers, the flat input
    /// index of every output's maximum.
    pub(crate) fn forward(&self, s: Shape, x: &[f64], out: &mut Vec<f64>, argmax: Option<&mut Vec<u32>>) {
        out.clear();
        match self {
            Layer::Conv {
                kh,
                kw,
                cin,
                cout,
                relu,
                params,
            } => {
                let (kh, kw, cin, cout) = (*kh, *kw, *cin, *cout);
                let (w, b) = params.split_at(kh * kw * cin * cout);
                let (ph, pw) = (kh / 2, kw / 2);
                out.resize(s.h * s.w * cout, 0.0);
                for y in 0..s.h {
                    for xo in 0..s.w {
                        let o = &mut out[(y * s.w + xo) * cout..(y * s.w + xo + 1) * cout];
                        o.copy_from_slice(b);
                        for dy in 0..kh {
                            let iy = y + dy;
                            if iy < ph || iy - ph >= s.h {
                                continue;
                            }
                            let iy = iy - ph;
                            for dx in 0..kw {
                                let ix = xo + dx;
                                if ix < pw || ix - pw >= s.w {
                                    continue;
                                }
                                let ix = ix - pw;
                                let inp = &x[(iy * s.w + ix) * cin..(iy * s.w + ix + 1) * cin];
                                let wk = &w[(dy * kw + dx) * cin * cout..(dy * kw + dx + 1) * cin * cout];
                                for (ci, &v) in inp.iter().enumerate() {
                                    let wrow = &wk[ci * cout..(ci + 1) * cout];
                                    for (acc, &wv) in o.iter_mut().zip(wrow) {
                                        *acc += v * wv;
                                    }
                                }
                            }
                        }
                        if *relu {
                            o.iter_mut().for_each(|v| *v = v.max(0.0));
                        }
                    }
                }
            }
            Layer::MaxPool { ph, pw } => {
                let (ph, pw) = (*ph, *pw);
                let (oh, ow) = (s.h / ph, s.w / pw);
                out.resize(oh * ow * s.c, 0.0);
                let mut am = argmax;
                if let Some(a) = am.as_deref_mut() {
                    a.clear();
                    a.resize(oh * ow * s.c, 0);
                }
                for y in 0..oh {
                    for xo in 0..ow {
                        for c in 0..s.c {
                            let mut best = f64::NEG_INFINITY;
                            let mut best_i = 0usize;
                            for dy in 0..ph {
                                for dx in 0..pw {
                                    let i = ((y * ph + dy) * s.w + xo * pw + dx) * s.c + c;
                                    if x[i] > best {
                                        best = x[i];
                                        best_i = i;
                                    }
                                }
                            }
                            let o = (y * ow + xo) * s.c + c;
                            out[o] = best;
                            if let Some(a) = am.as_deref_mut() {
                                a[o] = best_i as u32;
                            }
                        }
                    }
                }
            }
            Layer::Upsample { fh, fw } => {
                let (oh, ow) = (s.h * fh, s.w * fw);
                out.reserve(oh * ow * s.c);
                for y in 0..oh {
                    for xo in 0..ow {
                        let i = ((y / fh) * s.w + xo / fw) * s.c;
                        out.extend_from_slice(&x[i..i + s.c]);
                    }
                }
            }
            Layer::Dense {
                nin,
                out: os,
                relu,
                params,
            } => {
                let n = os.len();
                let (w, b) = params.split_at(nin * n);
                out.extend(b.iter().enumerate().map(|(o, &bias)| {
                    let row = &w[o * nin..(o + 1) * nin];
                    let z = bias + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
                    if *relu {
                        z.max(0.0)
                    } else {
                        z
                    }
                }));
            }
        }
    }

    /// Backward pass. `y` is this layer's output, `gy` the loss gradient
    /// with respect to it (ReLU already folded in by the caller), `gx`
    /// receives the input gradient and `gp` accumulates parameter
    /// gradients.
    pub(crate) fn backward(
        &self,
        s: Shape,
        x: &[f64],
        gy: &[f64],
        argmax: &[u32],
        gx: &mut Vec<f64>,
        gp: &mut [f64],
    ) {
        gx.clear();
        gx.resize(s.len(), 0.0);
        match self {
            Layer::Conv {
                kh,
                kw,
                cin,
                cout,
                params,
                ..
            } => {
                let (kh, kw, cin, cout) = (*kh, *kw, *cin, *cout);
                let nw = kh * kw * cin * cout;
                let w = &params[..nw];
                let (gw, gb) = gp.split_at_mut(nw);
                let (ph, pw) = (kh / 2, kw / 2);
                for y in 0..s.h {
                    for xo in 0..s.w {
                        let g = &gy[(y * s.w + xo) * cout..(y * s.w + xo + 1) * cout];
                        for (b, &gv) in gb.iter_mut().zip(g) {
                            *b += gv;
                        }
                        for dy in 0..kh {
                            let iy = y + dy;
                            if iy < ph || iy - ph >= s.h {
                                continue;
                            }
                            let iy = iy - ph;
                            for dx in 0..kw {
                                let ix = xo + dx;
                                if ix < pw || ix - pw >= s.w {
                                    continue;
                                }
                                let ix = ix - pw;
                                let base = (iy * s.w + ix) * cin;
                                let k0 = (dy * kw + dx) * cin * cout;
                                for ci in 0..cin {
                                    let wrow = &w[k0 + ci * cout..k0 + (ci + 1) * cout];
                                    let gwrow = &mut gw[k0 + ci * cout..k0 + (ci + 1) * cout];
                                    let xv = x[base + ci];
                                    let mut acc = 0.0;
                                    for ((gwv, &wv), &gv) in gwrow.iter_mut().zip(wrow).zip(g) {
                                        *gwv += xv * gv;
                                        acc += wv * gv;
                                    }
                                    gx[base + ci] += acc;
                                }
                            }
                        }
                    }
                }
            }
            Layer::MaxPool { .. } => {
                for (&i, &g) in argmax.iter().zip(gy) {
                    gx[i as usize] += g;
                }
            }
            Layer::Upsample { fh, fw } => {
                let ow = s.w * fw;
                for (o, g) in gy.chunks(s.c).enumerate() {
                    let (y, xo) = (o / ow, o % ow);
                    let i = ((y / fh) * s.w + xo / fw) * s.c;
                    for (t, &v) in gx[i..i + s.c].iter_mut().zip(g) {
                        *t += v;
                    }
                }
            }
            Layer::Dense {
                nin, out, params, ..
            } => {
                let n = out.len();
                let w = &params[..nin * n];
                let (gw, gb) = gp.split_at_mut(nin * n);
                for (o, &g) in gy.iter().enumerate() {
                    gb[o] += g;
                    if g == 0.0 {
                        continue;
                    }
                    let row = &w[o * nin..(o + 1) * nin];
                    let grow = &mut gw[o * nin..(o + 1) * nin];
                    for ((gwv, t), (&wv, &xv)) in grow.iter_mut().zip(gx.iter_mut()).zip(row.iter().zip(x)) {
                        *gwv += g * xv;
                        *t += g * wv;
                    }
                }
            }
        }
    }
}
