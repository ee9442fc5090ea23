//! Zero-mean normalized cross-correlation cost, per patch and as a dense
//! windowed field with its derivative.

/// Sum of squared deviations below which a window counts as textureless.
pub const MIN_VARIANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZnccCost {
    /// `1 - ZNCC` averaged over channels, in `[0, 2]`.
    pub cost: f64,
    /// False when any channel of either patch has zero variance; such
    /// channels contribute the neutral cost 1.
    pub informative: bool,
}

/// `1 - ZNCC(a, b)` averaged over channels. Patches are flattened
/// `w x w x channels`, channel fastest.
pub fn zncc_cost(a: &[f64], b: &[f64], channels: usize) -> ZnccCost {
    assert_eq!(a.len(), b.len());
    assert!(channels > 0 && a.len().is_multiple_of(channels));
    let n = (a.len() / channels) as f64;
    let mut total = 0.0;
    let mut informative = true;
    for c in 0..channels {
        let ma = a.iter().skip(c).step_by(channels).sum::<f64>() / n;
        let mb = b.iter().skip(c).step_by(channels).sum::<f64>() / n;
        let (mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0);
        for (x, y) in a
            .iter()
            .skip(c)
            .step_by(channels)
            .zip(b.iter().skip(c).step_by(channels))
        {
            let (da, db) = (x - ma, y - mb);
            saa += da * da;
            sbb += db * db;
            sab += da * db;
        }
        if saa < MIN_VARIANCE || sbb < MIN_VARIANCE {
            informative = false;
            total += 1.0;
        } else {
            let rho = (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0);
            total += 1.0 - rho;
        }
    }
    ZnccCost {
        cost: total / channels as f64,
        informative,
    }
}

/// Sum over the `(2r+1)^2` window centered at each pixel, clipped at the
/// border. Row-major `w x h`.
pub(crate) fn box_sum(src: &[f64], w: usize, h: usize, r: usize) -> Vec<f64> {
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        let out = &mut tmp[y * w..(y + 1) * w];
        let mut acc: f64 = row[..(r + 1).min(w)].iter().sum();
        out[0] = acc;
        for x in 1..w {
            if x + r < w {
                acc += row[x + r];
            }
            if x > r {
                acc -= row[x - r - 1];
            }
            out[x] = acc;
        }
    }
    let mut dst = vec![0.0; w * h];
    for x in 0..w {
        let mut acc = 0.0;
        for y in 0..(r + 1).min(h) {
            acc += tmp[y * w + x];
        }
        dst[x] = acc;
        for y in 1..h {
            if y + r < h {
                acc += tmp[(y + r) * w + x];
            }
            if y > r {
                acc -= tmp[(y - r - 1) * w + x];
            }
            dst[y * w + x] = acc;
        }
    }
    dst
}

/// Dense windowed ZNCC cost between a reference image `a` and a warped image
/// `b`, restricted to windows lying entirely inside `mask`.
pub(crate) struct WindowedZncc {
    /// Sum of per-window costs over valid window centers.
    pub energy: f64,
    pub uninformative: usize,
    /// Derivative of `energy` with respect to `b`, same layout as `b`.
    pub d_b: Option<Vec<f64>>,
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn windowed_zncc(
    a: &[f64],
    b: &[f64],
    mask: &[bool],
    w: usize,
    h: usize,
    channels: usize,
    window: usize,
    want_derivative: bool,
) -> WindowedZncc {
    let r = window / 2;
    let n = (window * window) as f64;
    let np = w * h;
    let m: Vec<f64> = mask.iter().map(|&v| if v { 1.0 } else { 0.0 }).collect();
    let msum = box_sum(&m, w, h, r);
    let valid: Vec<bool> = (0..np)
        .map(|i| {
            let (x, y) = (i % w, i / w);
            x >= r && y >= r && x + r < w && y + r < h && msum[i] > n - 0.5
        })
        .collect();
    let mut cost = vec![0.0; np];
    let mut uninformative_px = vec![false; np];
    let mut d_b = want_derivative.then(|| vec![0.0; np * channels]);
    let inv_c = 1.0 / channels as f64;

    let mut chan_a = vec![0.0; np];
    let mut chan_b = vec![0.0; np];
    let mut prod = vec![0.0; np];
    for c in 0..channels {
        for i in 0..np {
            if mask[i] {
                chan_a[i] = a[i * channels + c];
                chan_b[i] = b[i * channels + c];
            } else {
                chan_a[i] = 0.0;
                chan_b[i] = 0.0;
            }
        }
        let sa = box_sum(&chan_a, w, h, r);
        let sb = box_sum(&chan_b, w, h, r);
        prod.iter_mut().zip(&chan_a).for_each(|(p, v)| *p = v * v);
        let saa = box_sum(&prod, w, h, r);
        prod.iter_mut().zip(&chan_b).for_each(|(p, v)| *p = v * v);
        let sbb = box_sum(&prod, w, h, r);
        for i in 0..np {
            prod[i] = chan_a[i] * chan_b[i];
        }
        let sab = box_sum(&prod, w, h, r);

        let mut alpha = vec![0.0; np];
        let mut alpha_mean = vec![0.0; np];
        let mut beta = vec![0.0; np];
        let mut beta_mean = vec![0.0; np];
        for i in 0..np {
            if !valid[i] {
                continue;
            }
            let ma = sa[i] / n;
            let mb = sb[i] / n;
            let va = saa[i] - n * ma * ma;
            let vb = sbb[i] - n * mb * mb;
            if va < MIN_VARIANCE || vb < MIN_VARIANCE {
                cost[i] += inv_c;
                uninformative_px[i] = true;
                continue;
            }
            let cov = sab[i] - n * ma * mb;
            let inv = 1.0 / (va * vb).sqrt();
            let rho = cov * inv;
            cost[i] += (1.0 - rho) * inv_c;
            if want_derivative {
                alpha[i] = inv;
                alpha_mean[i] = inv * ma;
                beta[i] = rho / vb;
                beta_mean[i] = rho / vb * mb;
            }
        }
        if let Some(d) = d_b.as_mut() {
            let ba = box_sum(&alpha, w, h, r);
            let bam = box_sum(&alpha_mean, w, h, r);
            let bb = box_sum(&beta, w, h, r);
            let bbm = box_sum(&beta_mean, w, h, r);
            for i in 0..np {
                if mask[i] {
                    let g = chan_a[i] * ba[i] - bam[i] - chan_b[i] * bb[i] + bbm[i];
                    d[i * channels + c] = -g * inv_c;
                }
            }
        }
    }
    let energy = (0..np).filter(|&i| valid[i]).map(|i| cost[i]).sum();
    WindowedZncc {
        energy,
        uninformative: uninformative_px.iter().filter(|&&u| u).count(),
        d_b,
    }
}
