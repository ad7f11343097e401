use num_complex::Complex64;

use super::{LuFactorization, SmallAlgError, DEFAULT_EIG_CAP};
use crate::dense::DenseMatrix;

/// Eigenpairs sorted by ascending modulus.
///
/// Vectors use real Schur-style storage: a real eigenvalue owns one column, while a
/// conjugate pair `(a − bi, a + bi)` with `b > 0` occupies two adjacent columns holding
/// the real and imaginary parts of the eigenvector of `a − bi`. Each vector has unit
/// norm in the complex sense.
#[derive(Debug, Clone)]
pub struct EigenPairSet {
    pub values: Vec<Complex64>,
    pub vectors: DenseMatrix,
}

impl EigenPairSet {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Complex eigenvector attached to `values[i]`.
    pub fn vector(&self, i: usize) -> Vec<Complex64> {
        let m = self.vectors.rows();
        let v = self.values[i];
        if v.im == 0.0 {
            return (0..m).map(|r| Complex64::new(self.vectors[(r, i)], 0.0)).collect();
        }
        let (re, im, sign) = if v.im < 0.0 { (i, i + 1, 1.0) } else { (i - 1, i, -1.0) };
        (0..m)
            .map(|r| Complex64::new(self.vectors[(r, re)], sign * self.vectors[(r, im)]))
            .collect()
    }

    /// Keeps the first `k` pairs without splitting a conjugate pair. A split is resolved
    /// by keeping one more pair, or one fewer when that would exceed `max_k`.
    pub fn truncate(mut self, k: usize, max_k: usize) -> Self {
        let mut keep = k.min(self.len());
        if keep > 0 && keep < self.len() && self.values[keep - 1].im < 0.0 {
            keep = if keep < max_k { keep + 1 } else { keep - 1 };
        }
        self.values.truncate(keep);
        self.vectors = self.vectors.block(0, self.vectors.rows(), 0, keep);
        self
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EigOptions {
    pub cap: usize,
    /// QR sweeps allowed per eigenvalue before `NoConvergence`.
    pub max_sweeps: usize,
}

impl Default for EigOptions {
    fn default() -> Self {
        Self { cap: DEFAULT_EIG_CAP, max_sweeps: 100 }
    }
}

/// The `k` eigenpairs of `M` closest to the origin.
pub fn small_standard_eig(m: &DenseMatrix, k: usize) -> Result<EigenPairSet, SmallAlgError> {
    small_standard_eig_with(m, k, EigOptions::default())
}

pub fn small_standard_eig_with(
    m: &DenseMatrix,
    k: usize,
    opts: EigOptions,
) -> Result<EigenPairSet, SmallAlgError> {
    let n = m.rows();
    if m.cols() != n {
        return Err(SmallAlgError::DimensionMismatch(format!("eig needs a square matrix, got {:?}", m.shape())));
    }
    if n > opts.cap {
        return Err(SmallAlgError::TooLarge { size: n, cap: opts.cap });
    }
    if k > n {
        return Err(SmallAlgError::DimensionMismatch(format!("asked for {k} pairs of a {n}x{n} matrix")));
    }
    Ok(full_eig(m, opts.max_sweeps)?.truncate(k, n))
}

/// The `k` pairs of `L g = λ Rm g` with smallest `|λ|`, found as the dominant pairs of
/// `L⁻¹ Rm` (eigenvalues `1/λ`). If `L` is singular the roles are swapped.
pub fn small_generalized_eig(
    l: &DenseMatrix,
    rm: &DenseMatrix,
    k: usize,
) -> Result<EigenPairSet, SmallAlgError> {
    let n = l.rows();
    if l.shape() != (n, n) || rm.shape() != (n, n) {
        return Err(SmallAlgError::DimensionMismatch("pencil matrices must be square and equal in size".into()));
    }
    if n > DEFAULT_EIG_CAP {
        return Err(SmallAlgError::TooLarge { size: n, cap: DEFAULT_EIG_CAP });
    }
    if k > n {
        return Err(SmallAlgError::DimensionMismatch(format!("asked for {k} pairs of a {n}x{n} pencil")));
    }
    let sweeps = EigOptions::default().max_sweeps;
    if let Ok(lu) = LuFactorization::new(l) {
        let inv = lu.solve_matrix(rm);
        let mu = full_eig(&inv, sweeps)?;
        // largest |μ| first, so that λ = 1/μ comes out ascending in modulus
        let mut set = reorder(mu, |z| {
            if z.norm() == 0.0 {
                Complex64::new(f64::INFINITY, 0.0)
            } else {
                z.inv()
            }
        });
        set.values.iter_mut().for_each(|v| {
            if !v.re.is_finite() {
                *v = Complex64::new(f64::INFINITY, 0.0);
            }
        });
        return Ok(set.truncate(k, n));
    }
    match LuFactorization::new(rm) {
        Ok(lu) => Ok(full_eig(&lu.solve_matrix(l), sweeps)?.truncate(k, n)),
        Err(_) => Err(SmallAlgError::SingularPencil),
    }
}

/// Maps eigenvalues through `f` and re-sorts, restoring the pair storage convention.
fn reorder(set: EigenPairSet, f: impl Fn(Complex64) -> Complex64) -> EigenPairSet {
    let n = set.len();
    let pairs: Vec<(Complex64, Vec<Complex64>)> =
        (0..n).map(|i| (f(set.values[i]), set.vector(i))).collect();
    assemble(set.vectors.rows(), pairs)
}

/// Sorts `(value, complex vector)` pairs and packs them into real storage.
pub(crate) fn assemble(m: usize, mut pairs: Vec<(Complex64, Vec<Complex64>)>) -> EigenPairSet {
    pairs.sort_by(|a, b| order(a.0, b.0));
    let mut values = Vec::with_capacity(pairs.len());
    let mut vectors = DenseMatrix::zeros(m, pairs.len());
    let mut i = 0;
    while i < pairs.len() {
        let (v, g) = &pairs[i];
        let nrm = g.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let s = if nrm > 0.0 { 1.0 / nrm } else { 1.0 };
        if v.im == 0.0 || i + 1 == pairs.len() {
            for r in 0..m {
                vectors[(r, i)] = g[r].re * s;
            }
            values.push(Complex64::new(v.re, 0.0));
            i += 1;
        } else {
            // v has negative imaginary part by the sort order; its partner follows
            let vv = Complex64::new(v.re, -v.im.abs());
            for r in 0..m {
                vectors[(r, i)] = g[r].re * s;
                vectors[(r, i + 1)] = g[r].im * s;
            }
            values.push(vv);
            values.push(vv.conj());
            i += 2;
        }
    }
    EigenPairSet { values, vectors }
}

fn order(a: Complex64, b: Complex64) -> std::cmp::Ordering {
    a.norm()
        .total_cmp(&b.norm())
        .then(a.re.total_cmp(&b.re))
        .then(a.im.total_cmp(&b.im))
}

/// All eigenpairs, sorted; the only place the QR iteration is invoked.
pub(crate) fn full_eig(m: &DenseMatrix, max_sweeps: usize) -> Result<EigenPairSet, SmallAlgError> {
    let n = m.rows();
    if n == 0 {
        return Ok(EigenPairSet { values: vec![], vectors: DenseMatrix::zeros(0, 0) });
    }
    if !m.is_finite() {
        return Err(SmallAlgError::NoConvergence { iterations: 0 });
    }
    let mut h: Vec<f64> = m.as_slice().to_vec();
    let mut v = vec![0.0; n * n];
    orthes(n, &mut h, &mut v);
    let (d, e) = hqr2(n, &mut h, &mut v, max_sweeps)?;

    let mut pairs = Vec::with_capacity(n);
    let mut j = 0;
    while j < n {
        if e[j] == 0.0 {
            let g: Vec<Complex64> = (0..n).map(|i| Complex64::new(v[i * n + j], 0.0)).collect();
            pairs.push((Complex64::new(d[j], 0.0), g));
            j += 1;
        } else {
            // columns j, j+1 hold u, w with A(u + iw) = (d + i e[j])(u + iw), e[j] > 0
            let lam = Complex64::new(d[j], e[j]);
            let g: Vec<Complex64> = (0..n).map(|i| Complex64::new(v[i * n + j], v[i * n + j + 1])).collect();
            let gc: Vec<Complex64> = g.iter().map(|z| z.conj()).collect();
            pairs.push((lam, g));
            pairs.push((lam.conj(), gc));
            j += 2;
        }
    }
    Ok(assemble(n, pairs))
}

/// Householder reduction to upper Hessenberg form, accumulating the transform in `v`.
fn orthes(n: usize, h: &mut [f64], v: &mut [f64]) {
    let high = n - 1;
    let mut ort = vec![0.0; n];
    for m in 1..high {
        let scale: f64 = (m..=high).map(|i| h[i * n + m - 1].abs()).sum();
        if scale == 0.0 {
            continue;
        }
        let mut hh = 0.0;
        for i in (m..=high).rev() {
            ort[i] = h[i * n + m - 1] / scale;
            hh += ort[i] * ort[i];
        }
        let mut g = hh.sqrt();
        if ort[m] > 0.0 {
            g = -g;
        }
        hh -= ort[m] * g;
        ort[m] -= g;
        for j in m..n {
            let mut f = 0.0;
            for i in (m..=high).rev() {
                f += ort[i] * h[i * n + j];
            }
            f /= hh;
            for i in m..=high {
                h[i * n + j] -= f * ort[i];
            }
        }
        for i in 0..=high {
            let mut f = 0.0;
            for j in (m..=high).rev() {
                f += ort[j] * h[i * n + j];
            }
            f /= hh;
            for j in m..=high {
                h[i * n + j] -= f * ort[j];
            }
        }
        ort[m] *= scale;
        h[m * n + m - 1] = scale * g;
    }

    for i in 0..n {
        for j in 0..n {
            v[i * n + j] = if i == j { 1.0 } else { 0.0 };
        }
    }
    for m in (1..high).rev() {
        if h[m * n + m - 1] == 0.0 {
            continue;
        }
        for i in m + 1..=high {
            ort[i] = h[i * n + m - 1];
        }
        for j in m..=high {
            let mut g = 0.0;
            for i in m..=high {
                g += ort[i] * v[i * n + j];
            }
            g = (g / ort[m]) / h[m * n + m - 1];
            for i in m..=high {
                v[i * n + j] += g * ort[i];
            }
        }
    }
}

fn cdiv(xr: f64, xi: f64, yr: f64, yi: f64) -> (f64, f64) {
    if yr.abs() > yi.abs() {
        let r = yi / yr;
        let d = yr + r * yi;
        ((xr + r * xi) / d, (xi - r * xr) / d)
    } else {
        let r = yr / yi;
        let d = yi + r * yr;
        ((r * xr + xi) / d, (r * xi - xr) / d)
    }
}

/// Francis double-shift QR on the Hessenberg matrix `h`, followed by back-substitution
/// for the eigenvectors of the quasi-triangular factor. Returns real and imaginary parts.
#[allow(clippy::many_single_char_names)]
fn hqr2(nn_u: usize, hm: &mut [f64], vm: &mut [f64], max_sweeps: usize) -> Result<(Vec<f64>, Vec<f64>), SmallAlgError> {
    let nn = nn_u as isize;
    macro_rules! h {
        ($i:expr, $j:expr) => {
            hm[($i) as usize * nn_u + ($j) as usize]
        };
    }
    macro_rules! v {
        ($i:expr, $j:expr) => {
            vm[($i) as usize * nn_u + ($j) as usize]
        };
    }
    let mut d = vec![0.0; nn_u];
    let mut e = vec![0.0; nn_u];
    let mut n: isize = nn - 1;
    let low: isize = 0;
    let high: isize = nn - 1;
    let eps = f64::EPSILON;
    let mut exshift = 0.0;
    let (mut p, mut q, mut r, mut s, mut z) = (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
    let (mut t, mut w, mut x, mut y): (f64, f64, f64, f64);

    let mut norm = 0.0;
    for i in 0..nn {
        for j in (i - 1).max(0)..nn {
            norm += h!(i, j).abs();
        }
    }

    let mut iter = 0usize;
    while n >= low {
        let mut l = n;
        while l > low {
            s = h!(l - 1, l - 1).abs() + h!(l, l).abs();
            if s == 0.0 {
                s = norm;
            }
            if h!(l, l - 1).abs() < eps * s {
                break;
            }
            l -= 1;
        }

        if l == n {
            h!(n, n) += exshift;
            d[n as usize] = h!(n, n);
            e[n as usize] = 0.0;
            n -= 1;
            iter = 0;
        } else if l == n - 1 {
            w = h!(n, n - 1) * h!(n - 1, n);
            p = (h!(n - 1, n - 1) - h!(n, n)) / 2.0;
            q = p * p + w;
            z = q.abs().sqrt();
            h!(n, n) += exshift;
            h!(n - 1, n - 1) += exshift;
            x = h!(n, n);

            if q >= 0.0 {
                z = if p >= 0.0 { p + z } else { p - z };
                d[(n - 1) as usize] = x + z;
                d[n as usize] = d[(n - 1) as usize];
                if z != 0.0 {
                    d[n as usize] = x - w / z;
                }
                e[(n - 1) as usize] = 0.0;
                e[n as usize] = 0.0;
                x = h!(n, n - 1);
                s = x.abs() + z.abs();
                p = x / s;
                q = z / s;
                r = (p * p + q * q).sqrt();
                p /= r;
                q /= r;
                for j in (n - 1)..nn {
                    z = h!(n - 1, j);
                    h!(n - 1, j) = q * z + p * h!(n, j);
                    h!(n, j) = q * h!(n, j) - p * z;
                }
                for i in 0..=n {
                    z = h!(i, n - 1);
                    h!(i, n - 1) = q * z + p * h!(i, n);
                    h!(i, n) = q * h!(i, n) - p * z;
                }
                for i in low..=high {
                    z = v!(i, n - 1);
                    v!(i, n - 1) = q * z + p * v!(i, n);
                    v!(i, n) = q * v!(i, n) - p * z;
                }
            } else {
                d[(n - 1) as usize] = x + p;
                d[n as usize] = x + p;
                e[(n - 1) as usize] = z;
                e[n as usize] = -z;
            }
            n -= 2;
            iter = 0;
        } else {
            x = h!(n, n);
            y = 0.0;
            w = 0.0;
            if l < n {
                y = h!(n - 1, n - 1);
                w = h!(n, n - 1) * h!(n - 1, n);
            }

            if iter == 10 {
                exshift += x;
                for i in low..=n {
                    h!(i, i) -= x;
                }
                s = h!(n, n - 1).abs() + h!(n - 1, n - 2).abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }

            if iter == 30 {
                s = (y - x) / 2.0;
                s = s * s + w;
                if s > 0.0 {
                    s = s.sqrt();
                    if y < x {
                        s = -s;
                    }
                    s = x - w / ((y - x) / 2.0 + s);
                    for i in low..=n {
                        h!(i, i) -= s;
                    }
                    exshift += s;
                    x = 0.964;
                    y = x;
                    w = x;
                }
            }

            iter += 1;
            if iter > max_sweeps {
                return Err(SmallAlgError::NoConvergence { iterations: iter });
            }

            let mut m = n - 2;
            while m >= l {
                z = h!(m, m);
                r = x - z;
                s = y - z;
                p = (r * s - w) / h!(m + 1, m) + h!(m, m + 1);
                q = h!(m + 1, m + 1) - z - r - s;
                r = h!(m + 2, m + 1);
                s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                if h!(m, m - 1).abs() * (q.abs() + r.abs())
                    < eps * (p.abs() * (h!(m - 1, m - 1).abs() + z.abs() + h!(m + 1, m + 1).abs()))
                {
                    break;
                }
                m -= 1;
            }

            for i in (m + 2)..=n {
                h!(i, i - 2) = 0.0;
                if i > m + 2 {
                    h!(i, i - 3) = 0.0;
                }
            }

            let mut k = m;
            while k < n {
                let notlast = k != n - 1;
                if k != m {
                    p = h!(k, k - 1);
                    q = h!(k + 1, k - 1);
                    r = if notlast { h!(k + 2, k - 1) } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x == 0.0 {
                        k += 1;
                        continue;
                    }
                    p /= x;
                    q /= x;
                    r /= x;
                }
                s = (p * p + q * q + r * r).sqrt();
                if p < 0.0 {
                    s = -s;
                }
                if s != 0.0 {
                    if k != m {
                        h!(k, k - 1) = -s * x;
                    } else if l != m {
                        h!(k, k - 1) = -h!(k, k - 1);
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    z = r / s;
                    q /= p;
                    r /= p;
                    for j in k..nn {
                        p = h!(k, j) + q * h!(k + 1, j);
                        if notlast {
                            p += r * h!(k + 2, j);
                            h!(k + 2, j) -= p * z;
                        }
                        h!(k, j) -= p * x;
                        h!(k + 1, j) -= p * y;
                    }
                    for i in 0..=n.min(k + 3) {
                        p = x * h!(i, k) + y * h!(i, k + 1);
                        if notlast {
                            p += z * h!(i, k + 2);
                            h!(i, k + 2) -= p * r;
                        }
                        h!(i, k) -= p;
                        h!(i, k + 1) -= p * q;
                    }
                    for i in low..=high {
                        p = x * v!(i, k) + y * v!(i, k + 1);
                        if notlast {
                            p += z * v!(i, k + 2);
                            v!(i, k + 2) -= p * r;
                        }
                        v!(i, k) -= p;
                        v!(i, k + 1) -= p * q;
                    }
                }
                k += 1;
            }
        }
    }

    if norm == 0.0 {
        // zero matrix: V is already the identity
        return Ok((d, e));
    }

    for n in (0..nn).rev() {
        p = d[n as usize];
        q = e[n as usize];

        if q == 0.0 {
            let mut l = n;
            h!(n, n) = 1.0;
            for i in (0..n).rev() {
                w = h!(i, i) - p;
                r = 0.0;
                for j in l..=n {
                    r += h!(i, j) * h!(j, n);
                }
                if e[i as usize] < 0.0 {
                    z = w;
                    s = r;
                } else {
                    l = i;
                    if e[i as usize] == 0.0 {
                        h!(i, n) = if w != 0.0 { -r / w } else { -r / (eps * norm) };
                    } else {
                        x = h!(i, i + 1);
                        y = h!(i + 1, i);
                        q = (d[i as usize] - p) * (d[i as usize] - p) + e[i as usize] * e[i as usize];
                        t = (x * s - z * r) / q;
                        h!(i, n) = t;
                        h!(i + 1, n) = if x.abs() > z.abs() { (-r - w * t) / x } else { (-s - y * t) / z };
                    }
                    t = h!(i, n).abs();
                    if (eps * t) * t > 1.0 {
                        for j in i..=n {
                            h!(j, n) /= t;
                        }
                    }
                }
            }
        } else if q < 0.0 {
            let mut l = n - 1;
            if h!(n, n - 1).abs() > h!(n - 1, n).abs() {
                h!(n - 1, n - 1) = q / h!(n, n - 1);
                h!(n - 1, n) = -(h!(n, n) - p) / h!(n, n - 1);
            } else {
                let (cr, ci) = cdiv(0.0, -h!(n - 1, n), h!(n - 1, n - 1) - p, q);
                h!(n - 1, n - 1) = cr;
                h!(n - 1, n) = ci;
            }
            h!(n, n - 1) = 0.0;
            h!(n, n) = 1.0;
            for i in (0..n - 1).rev() {
                let mut ra = 0.0;
                let mut sa = 0.0;
                for j in l..=n {
                    ra += h!(i, j) * h!(j, n - 1);
                    sa += h!(i, j) * h!(j, n);
                }
                w = h!(i, i) - p;
                if e[i as usize] < 0.0 {
                    z = w;
                    r = ra;
                    s = sa;
                } else {
                    l = i;
                    if e[i as usize] == 0.0 {
                        let (cr, ci) = cdiv(-ra, -sa, w, q);
                        h!(i, n - 1) = cr;
                        h!(i, n) = ci;
                    } else {
                        x = h!(i, i + 1);
                        y = h!(i + 1, i);
                        let di = d[i as usize] - p;
                        let mut vr = di * di + e[i as usize] * e[i as usize] - q * q;
                        let vi = di * 2.0 * q;
                        if vr == 0.0 && vi == 0.0 {
                            vr = eps * norm * (w.abs() + q.abs() + x.abs() + y.abs() + z.abs());
                        }
                        let (cr, ci) = cdiv(x * r - z * ra + q * sa, x * s - z * sa - q * ra, vr, vi);
                        h!(i, n - 1) = cr;
                        h!(i, n) = ci;
                        if x.abs() > z.abs() + q.abs() {
                            h!(i + 1, n - 1) = (-ra - w * h!(i, n - 1) + q * h!(i, n)) / x;
                            h!(i + 1, n) = (-sa - w * h!(i, n) - q * h!(i, n - 1)) / x;
                        } else {
                            let (cr, ci) = cdiv(-r - y * h!(i, n - 1), -s - y * h!(i, n), z, q);
                            h!(i + 1, n - 1) = cr;
                            h!(i + 1, n) = ci;
                        }
                    }
                    t = h!(i, n - 1).abs().max(h!(i, n).abs());
                    if (eps * t) * t > 1.0 {
                        for j in i..=n {
                            h!(j, n - 1) /= t;
                            h!(j, n) /= t;
                        }
                    }
                }
            }
        }
    }

    for j in (low..nn).rev() {
        for i in low..=high {
            z = 0.0;
            for k in low..=j.min(high) {
                z += v!(i, k) * h!(k, j);
            }
            v!(i, j) = z;
        }
    }
    Ok((d, e))
}
