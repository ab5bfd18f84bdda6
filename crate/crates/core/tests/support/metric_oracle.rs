//! Straight-line reference implementations of the metrics, written from
//! the textbook definitions without sharing code with the library.
#![allow(dead_code)]

pub fn lab(r: f64, g: f64, b: f64) -> (f64, f64, f64) {
    fn lin(c: f64) -> f64 {
        if c > 0.04045 {
            ((c + 0.055) / 1.055).powf(2.4)
        } else {
            c / 12.92
        }
    }
    let (r, g, b) = (lin(r), lin(g), lin(b));
    let x = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
    let y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
    let z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;
    let xn = 0.4124564 + 0.3575761 + 0.1804375;
    let yn = 0.2126729 + 0.7151522 + 0.0721750;
    let zn = 0.0193339 + 0.1191920 + 0.9503041;
    fn f(t: f64) -> f64 {
        let d = 6.0f64 / 29.0;
        if t > d * d * d {
            t.cbrt()
        } else {
            t / (3.0 * d * d) + 4.0 / 29.0
        }
    }
    let (fx, fy, fz) = (f(x / xn), f(y / yn), f(z / zn));
    (116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz))
}

pub fn uciqe(p: &[Vec<Vec<f64>>]) -> f64 {
    let (h, w) = (p[0].len(), p[0][0].len());
    let mut chroma = Vec::new();
    let mut light = Vec::new();
    let mut sat = Vec::new();
    for i in 0..h {
        for j in 0..w {
            let (l, a, b) = lab(p[0][i][j], p[1][i][j], p[2][i][j]);
            let c = (a * a + b * b).sqrt();
            chroma.push(c / 100.0);
            light.push(l / 100.0);
            sat.push(if c == 0.0 && l == 0.0 { 0.0 } else { c / (c * c + l * l).sqrt() });
        }
    }
    let n = chroma.len() as f64;
    let mc = chroma.iter().sum::<f64>() / n;
    let sc = (chroma.iter().map(|c| (c - mc).powi(2)).sum::<f64>() / n).sqrt();
    light.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pct = |q: f64| {
        let pos = q * (light.len() - 1) as f64;
        let i = pos.floor() as usize;
        let j = if i + 1 < light.len() { i + 1 } else { i };
        light[i] * (1.0 - (pos - i as f64)) + light[j] * (pos - i as f64)
    };
    let con = pct(0.99) - pct(0.01);
    let ms = sat.iter().sum::<f64>() / n;
    0.4680 * sc + 0.2745 * con + 0.2576 * ms
}

fn bounds(n: usize, block: usize) -> Vec<(usize, usize)> {
    let mut k = std::cmp::max(1, n / block);
    if n % 2 == 1 && k % 2 == 0 {
        k += 1;
    }
    let edge = |j: usize| if j * 2 <= k { (j * n) / k } else { n - ((k - j) * n) / k };
    (0..k).map(|j| (edge(j), edge(j + 1))).collect()
}

fn trimmed(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let k = s.len() as f64;
    let lo = (0.1 * k).ceil() as usize;
    let hi = (0.1 * k).floor() as usize;
    let kept = &s[lo..s.len() - hi];
    kept.iter().sum::<f64>() / kept.len() as f64
}

pub fn uiqm(p: &[Vec<Vec<f64>>]) -> f64 {
    let (h, w) = (p[0].len(), p[0][0].len());
    let s: Vec<Vec<Vec<f64>>> = p.iter().map(|pl| pl.iter().map(|r| r.iter().map(|v| v * 255.0).collect()).collect()).collect();
    // colorfulness
    let mut rg = Vec::new();
    let mut yb = Vec::new();
    for i in 0..h {
        for j in 0..w {
            rg.push(s[0][i][j] - s[1][i][j]);
            yb.push((s[0][i][j] + s[1][i][j]) / 2.0 - s[2][i][j]);
        }
    }
    let (mrg, myb) = (trimmed(&rg), trimmed(&yb));
    let n = rg.len() as f64;
    let vrg = rg.iter().map(|v| (v - mrg).powi(2)).sum::<f64>() / n;
    let vyb = yb.iter().map(|v| (v - myb).powi(2)).sum::<f64>() / n;
    let uicm = -0.0268 * (mrg * mrg + myb * myb).sqrt() + 0.1586 * (vrg + vyb).sqrt();

    // sharpness
    let rb = bounds(h, 8);
    let cb = bounds(w, 8);
    let lambdas = [0.299, 0.587, 0.114];
    let mut uism = 0.0;
    for c in 0..3 {
        let mut pad = vec![vec![0.0; w + 2]; h + 2];
        for i in 0..h + 2 {
            for j in 0..w + 2 {
                let si = i.saturating_sub(1).min(h - 1);
                let sj = j.saturating_sub(1).min(w - 1);
                pad[i][j] = s[c][si][sj];
            }
        }
        let kx = [[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]];
        let mut mag = vec![vec![0.0; w]; h];
        let mut peak: f64 = 0.0;
        for i in 0..h {
            for j in 0..w {
                let (mut gx, mut gy) = (0.0, 0.0);
                for a in 0..3 {
                    for b in 0..3 {
                        gx += kx[a][b] * pad[i + a][j + b];
                        gy += kx[b][a] * pad[i + a][j + b];
                    }
                }
                mag[i][j] = (gx * gx + gy * gy).sqrt();
                peak = peak.max(mag[i][j]);
            }
        }
        let mut sum = 0.0;
        for &(r0, r1) in &rb {
            for &(c0, c1) in &cb {
                let mut vals = Vec::new();
                for i in r0..r1 {
                    for j in c0..c1 {
                        let m = if peak > 0.0 { mag[i][j] * 255.0 / peak } else { 0.0 };
                        vals.push(m * s[c][i][j]);
                    }
                }
                let mx = vals.iter().cloned().fold(f64::MIN, f64::max);
                let mn = vals.iter().cloned().fold(f64::MAX, f64::min);
                if mn > 0.0 {
                    sum += (mx / mn).ln();
                }
            }
        }
        uism += lambdas[c] * 2.0 / (rb.len() * cb.len()) as f64 * sum;
    }

    // contrast
    let mut sum = 0.0;
    for &(r0, r1) in &rb {
        for &(c0, c1) in &cb {
            let mut mx = f64::MIN;
            let mut mn = f64::MAX;
            for plane in &s {
                for row in &plane[r0..r1] {
                    for &v in &row[c0..c1] {
                        mx = mx.max(v);
                        mn = mn.min(v);
                    }
                }
            }
            if mx - mn > 0.0 && mx + mn > 0.0 {
                let q = (mx - mn) / (mx + mn);
                sum += q * q.ln();
            }
        }
    }
    let uiconm = -sum / (rb.len() * cb.len()) as f64;
    0.0282 * uicm + 0.2953 * uism + 3.5753 * uiconm
}

pub fn ssim(a: &[Vec<Vec<f64>>], b: &[Vec<Vec<f64>>]) -> f64 {
    let (h, w) = (a[0].len(), a[0][0].len());
    let mut k = 11.min(h).min(w);
    if k % 2 == 0 {
        k -= 1;
    }
    let mid = (k - 1) as f64 / 2.0;
    let mut g = vec![vec![0.0; k]; k];
    let mut tot = 0.0;
    for i in 0..k {
        for j in 0..k {
            g[i][j] = (-((i as f64 - mid).powi(2) + (j as f64 - mid).powi(2)) / (2.0 * 1.5 * 1.5)).exp();
            tot += g[i][j];
        }
    }
    let c1 = 0.0001;
    let c2 = 0.0009;
    let mut out = 0.0;
    for c in 0..3 {
        let mut s = 0.0;
        let mut cnt = 0.0;
        for i in 0..=h - k {
            for j in 0..=w - k {
                let mut ma = 0.0;
                let mut mb = 0.0;
                for u in 0..k {
                    for v in 0..k {
                        ma += g[u][v] / tot * a[c][i + u][j + v];
                        mb += g[u][v] / tot * b[c][i + u][j + v];
                    }
                }
                let mut va = 0.0;
                let mut vb = 0.0;
                let mut cov = 0.0;
                for u in 0..k {
                    for v in 0..k {
                        let wt = g[u][v] / tot;
                        va += wt * (a[c][i + u][j + v] - ma).powi(2);
                        vb += wt * (b[c][i + u][j + v] - mb).powi(2);
                        cov += wt * (a[c][i + u][j + v] - ma) * (b[c][i + u][j + v] - mb);
                    }
                }
                s += (2.0 * ma * mb + c1) * (2.0 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
                cnt += 1.0;
            }
        }
        out += s / cnt;
    }
    out / 3.0
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (sx, sy) = (x.iter().sum::<f64>(), y.iter().sum::<f64>());
    let mut num = 0.0;
    let mut dx = 0.0;
    let mut dy = 0.0;
    for i in 0..x.len() {
        num += (x[i] - sx / n) * (y[i] - sy / n);
        dx += (x[i] - sx / n).powi(2);
        dy += (y[i] - sy / n).powi(2);
    }
    num / (dx * dy).sqrt()
}

pub fn ranks(v: &[f64]) -> Vec<f64> {
    // rank = 1 + #smaller + (#equal - 1) / 2
    v.iter()
        .map(|&a| {
            let less = v.iter().filter(|&&b| b < a).count() as f64;
            let eq = v.iter().filter(|&&b| b == a).count() as f64;
            1.0 + less + (eq - 1.0) / 2.0
        })
        .collect()
}
