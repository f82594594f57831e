use std::str::FromStr;

use faer::{c64, Mat};
use nalgebra_sparse::{CooMatrix, CsrMatrix};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::space::{HilbertSpace, SpaceTag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OperatorKind {
    A1,
    A2,
    A1Dag,
    A2Dag,
    Jx,
    Jy,
    Jz,
    Ne,
    Ns,
    ParityTotal,
    Identity,
}

impl OperatorKind {
    pub const ALL: [OperatorKind; 11] = [
        OperatorKind::A1,
        OperatorKind::A2,
        OperatorKind::A1Dag,
        OperatorKind::A2Dag,
        OperatorKind::Jx,
        OperatorKind::Jy,
        OperatorKind::Jz,
        OperatorKind::Ne,
        OperatorKind::Ns,
        OperatorKind::ParityTotal,
        OperatorKind::Identity,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            OperatorKind::A1 => "a1",
            OperatorKind::A2 => "a2",
            OperatorKind::A1Dag => "a1_dag",
            OperatorKind::A2Dag => "a2_dag",
            OperatorKind::Jx => "Jx",
            OperatorKind::Jy => "Jy",
            OperatorKind::Jz => "Jz",
            OperatorKind::Ne => "N_e",
            OperatorKind::Ns => "N_s",
            OperatorKind::ParityTotal => "parity_total",
            OperatorKind::Identity => "identity",
        }
    }
}

impl FromStr for OperatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        OperatorKind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::UnknownOperator(s.to_string()))
    }
}

/// sqrt(j(j+1) - m(m+1)), the J+ matrix element from m to m+1.
pub fn spin_raise(j: f64, m: f64) -> f64 {
    (j * (j + 1.0) - m * (m + 1.0)).max(0.0).sqrt()
}

/// Sparse operator on a tagged Hilbert space, stored as real and imaginary CSR parts.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    tag: SpaceTag,
    re: CsrMatrix<f64>,
    im: Option<CsrMatrix<f64>>,
}

/// Accumulates COO triplets for an operator on a given space.
pub(crate) struct Builder {
    tag: SpaceTag,
    re: CooMatrix<f64>,
    im: Option<CooMatrix<f64>>,
}

impl Builder {
    pub(crate) fn new(space: &HilbertSpace) -> Self {
        let d = space.dim();
        Self {
            tag: space.tag(),
            re: CooMatrix::new(d, d),
            im: None,
        }
    }

    pub(crate) fn re(&mut self, row: usize, col: usize, v: f64) {
        if v != 0.0 {
            self.re.push(row, col, v);
        }
    }

    pub(crate) fn im(&mut self, row: usize, col: usize, v: f64) {
        if v != 0.0 {
            let (n, m) = (self.re.nrows(), self.re.ncols());
            self.im.get_or_insert_with(|| CooMatrix::new(n, m)).push(row, col, v);
        }
    }

    pub(crate) fn finish(self) -> OperatorMatrix {
        OperatorMatrix {
            tag: self.tag,
            re: CsrMatrix::from(&self.re),
            im: self.im.as_ref().map(CsrMatrix::from),
        }
    }
}

pub fn operator(space: &HilbertSpace, kind: OperatorKind) -> OperatorMatrix {
    let mut b = Builder::new(space);
    let j = space.j();
    for (i, st) in space.states().enumerate() {
        let (n1, n2, k) = (st.n1, st.n2, st.k);
        let m = space.m(k);
        match kind {
            OperatorKind::A1 if n1 > 0 => {
                let r = space.index(n1 - 1, n2, k).unwrap();
                b.re(r, i, (n1 as f64).sqrt());
            }
            OperatorKind::A2 if n2 > 0 => {
                let r = space.index(n1, n2 - 1, k).unwrap();
                b.re(r, i, (n2 as f64).sqrt());
            }
            OperatorKind::A1Dag => {
                if let Some(r) = space.index(n1 + 1, n2, k) {
                    b.re(r, i, ((n1 + 1) as f64).sqrt());
                }
            }
            OperatorKind::A2Dag => {
                if let Some(r) = space.index(n1, n2 + 1, k) {
                    b.re(r, i, ((n2 + 1) as f64).sqrt());
                }
            }
            OperatorKind::Jx | OperatorKind::Jy => {
                let up = space.index(n1, n2, k + 1).map(|r| (r, spin_raise(j, m)));
                let down = (k > 0).then(|| (i - 1, spin_raise(j, m - 1.0)));
                if kind == OperatorKind::Jx {
                    for (r, c) in up.into_iter().chain(down) {
                        b.re(r, i, 0.5 * c);
                    }
                } else {
                    // Jy = (J+ - J-) / 2i
                    if let Some((r, c)) = up {
                        b.im(r, i, -0.5 * c);
                    }
                    if let Some((r, c)) = down {
                        b.im(r, i, 0.5 * c);
                    }
                }
            }
            OperatorKind::Jz => b.re(i, i, m),
            OperatorKind::Ne => {
                b.re(i, i, m);
                if n2 > 0 {
                    if let Some(r) = space.index(n1 + 1, n2 - 1, k) {
                        b.re(r, i, (((n1 + 1) * n2) as f64).sqrt());
                    }
                }
                if n1 > 0 {
                    if let Some(r) = space.index(n1 - 1, n2 + 1, k) {
                        b.re(r, i, ((n1 * (n2 + 1)) as f64).sqrt());
                    }
                }
            }
            OperatorKind::Ns => b.re(i, i, m + n1 as f64),
            OperatorKind::ParityTotal => {
                let s = if (n1 + n2 + k) % 2 == 0 { 1.0 } else { -1.0 };
                b.re(i, i, s);
            }
            OperatorKind::Identity => b.re(i, i, 1.0),
            _ => {}
        }
    }
    b.finish()
}

/// Photon quadrature a_m + a_m^dag for mode 1 or 2.
pub fn quadrature(space: &HilbertSpace, mode: usize) -> OperatorMatrix {
    let (a, ad) = match mode {
        1 => (OperatorKind::A1, OperatorKind::A1Dag),
        2 => (OperatorKind::A2, OperatorKind::A2Dag),
        _ => panic!("mode must be 1 or 2"),
    };
    operator(space, a).add(&operator(space, ad)).unwrap()
}

fn row_slices(m: &CsrMatrix<f64>, r: usize) -> (&[usize], &[f64]) {
    let offs = m.row_offsets();
    let range = offs[r]..offs[r + 1];
    (&m.col_indices()[range.clone()], &m.values()[range])
}

fn merge_rows(
    a: &CsrMatrix<f64>,
    b: Option<&CsrMatrix<f64>>,
    mut f: impl FnMut(usize, usize, f64, f64),
) {
    for r in 0..a.nrows() {
        let (ac, av) = row_slices(a, r);
        let (bc, bv): (&[usize], &[f64]) = match b {
            Some(b) => row_slices(b, r),
            None => (&[], &[]),
        };
        let (mut i, mut j) = (0, 0);
        while i < ac.len() || j < bc.len() {
            let ca = ac.get(i).copied().unwrap_or(usize::MAX);
            let cb = bc.get(j).copied().unwrap_or(usize::MAX);
            if ca == cb {
                f(r, ca, av[i], bv[j]);
                i += 1;
                j += 1;
            } else if ca < cb {
                f(r, ca, av[i], 0.0);
                i += 1;
            } else {
                f(r, cb, 0.0, bv[j]);
                j += 1;
            }
        }
    }
}

fn csr_add(a: &CsrMatrix<f64>, b: &CsrMatrix<f64>, sb: f64) -> CsrMatrix<f64> {
    if sb == 1.0 {
        a + b
    } else {
        a + &(b * sb)
    }
}

fn opt_add(
    a: Option<&CsrMatrix<f64>>,
    b: Option<&CsrMatrix<f64>>,
    sb: f64,
) -> Option<CsrMatrix<f64>> {
    match (a, b) {
        (Some(a), Some(b)) => Some(csr_add(a, b, sb)),
        (Some(a), None) => Some(a.clone()),
        (None, Some(b)) => Some(b * sb),
        (None, None) => None,
    }
}

fn csr_real_matvec(m: &CsrMatrix<f64>, x: &[f64], y: &mut [f64], accumulate: bool) {
    let offs = m.row_offsets();
    let cols = m.col_indices();
    let vals = m.values();
    for r in 0..m.nrows() {
        let mut s = 0.0;
        for idx in offs[r]..offs[r + 1] {
            s += vals[idx] * x[cols[idx]];
        }
        if accumulate {
            y[r] += s;
        } else {
            y[r] = s;
        }
    }
}

impl OperatorMatrix {
    pub fn from_parts(
        tag: SpaceTag,
        re: CsrMatrix<f64>,
        im: Option<CsrMatrix<f64>>,
    ) -> Result<Self> {
        let ok_shape = |m: &CsrMatrix<f64>| m.nrows() == m.ncols();
        if !ok_shape(&re) || im.as_ref().is_some_and(|m| m.nrows() != re.nrows() || !ok_shape(m)) {
            return Err(Error::DimensionMismatch("operator parts must be square and equal".into()));
        }
        Ok(Self { tag, re, im })
    }

    pub fn tag(&self) -> SpaceTag {
        self.tag
    }

    pub fn dim(&self) -> usize {
        self.re.nrows()
    }

    pub fn re(&self) -> &CsrMatrix<f64> {
        &self.re
    }

    pub fn im(&self) -> Option<&CsrMatrix<f64>> {
        self.im.as_ref()
    }

    /// True when no imaginary entry is nonzero.
    pub fn is_real(&self) -> bool {
        self.im
            .as_ref()
            .map_or(true, |m| m.values().iter().all(|&v| v == 0.0))
    }

    fn check(&self, other: &Self) -> Result<()> {
        if self.tag != other.tag || self.dim() != other.dim() {
            return Err(Error::DimensionMismatch(format!(
                "operators act on different spaces ({:?} vs {:?})",
                self.tag, other.tag
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        Ok(Self {
            tag: self.tag,
            re: &self.re + &other.re,
            im: opt_add(self.im.as_ref(), other.im.as_ref(), 1.0),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        Ok(Self {
            tag: self.tag,
            re: csr_add(&self.re, &other.re, -1.0),
            im: opt_add(self.im.as_ref(), other.im.as_ref(), -1.0),
        })
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            tag: self.tag,
            re: &self.re * s,
            im: self.im.as_ref().map(|m| m * s),
        }
    }

    /// Multiplication by a complex scalar.
    pub fn scale_complex(&self, s: Complex64) -> Self {
        // (s_r + i s_i)(A + iB) = (s_r A - s_i B) + i (s_i A + s_r B)
        let re = match &self.im {
            Some(b) => csr_add(&(&self.re * s.re), b, -s.im),
            None => &self.re * s.re,
        };
        let mut im = &self.re * s.im;
        if let Some(b) = &self.im {
            im = csr_add(&im, b, s.re);
        }
        Self {
            tag: self.tag,
            re,
            im: Some(im),
        }
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        let mut re = &self.re * &other.re;
        let mut im = None;
        if let (Some(a), Some(b)) = (&self.im, &other.im) {
            re = csr_add(&re, &(a * b), -1.0);
        }
        if let Some(b) = &other.im {
            im = Some(&self.re * b);
        }
        if let Some(a) = &self.im {
            let t = a * &other.re;
            im = Some(match im {
                Some(x) => &x + &t,
                None => t,
            });
        }
        Ok(Self {
            tag: self.tag,
            re,
            im,
        })
    }

    pub fn adjoint(&self) -> Self {
        Self {
            tag: self.tag,
            re: self.re.transpose(),
            im: self.im.as_ref().map(|m| &m.transpose() * -1.0),
        }
    }

    /// Largest |entry| over all stored elements.
    pub fn max_abs(&self) -> f64 {
        let mut best = 0.0f64;
        merge_rows(&self.re, self.im.as_ref(), |_, _, a, b| {
            best = best.max(a.hypot(b));
        });
        best
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        Ok(self.sub(other)?.max_abs())
    }

    /// max |H - H^dag|.
    pub fn hermiticity_error(&self) -> f64 {
        self.sub(&self.adjoint()).unwrap().max_abs()
    }

    /// Loose bound on the spectral norm: max absolute row sum.
    pub fn norm_bound(&self) -> f64 {
        let mut rows = vec![0.0f64; self.dim()];
        merge_rows(&self.re, self.im.as_ref(), |r, _, a, b| rows[r] += a.hypot(b));
        rows.into_iter().fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> Mat<c64> {
        let n = self.dim();
        let mut m = Mat::<c64>::zeros(n, n);
        merge_rows(&self.re, self.im.as_ref(), |r, c, a, b| {
            m[(r, c)] = c64::new(a, b);
        });
        m
    }

    /// Dense real part; callers check `is_real` first.
    pub fn to_dense_real(&self) -> Mat<f64> {
        let n = self.dim();
        let mut m = Mat::<f64>::zeros(n, n);
        merge_rows(&self.re, None, |r, c, a, _| m[(r, c)] = a);
        m
    }

    /// y = Re(H) x.
    pub fn apply_real(&self, x: &[f64], y: &mut [f64]) {
        csr_real_matvec(&self.re, x, y, false);
    }

    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let n = self.dim();
        let xr: Vec<f64> = x.iter().map(|v| v.re).collect();
        let xi: Vec<f64> = x.iter().map(|v| v.im).collect();
        let mut yr = vec![0.0; n];
        let mut yi = vec![0.0; n];
        csr_real_matvec(&self.re, &xr, &mut yr, false);
        csr_real_matvec(&self.re, &xi, &mut yi, false);
        if let Some(b) = &self.im {
            let mut t = vec![0.0; n];
            csr_real_matvec(b, &xi, &mut t, false);
            for (y, t) in yr.iter_mut().zip(&t) {
                *y -= t;
            }
            csr_real_matvec(b, &xr, &mut yi, true);
        }
        yr.into_iter()
            .zip(yi)
            .map(|(r, i)| Complex64::new(r, i))
            .collect()
    }

    /// <u|O|v>.
    pub fn matrix_element(&self, u: &[Complex64], v: &[Complex64]) -> Complex64 {
        let ov = self.apply(v);
        u.iter().zip(&ov).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn expectation(&self, v: &[Complex64]) -> Complex64 {
        self.matrix_element(v, v)
    }

    /// <v|O|v> for a real state and real operator.
    pub fn expectation_real(&self, v: &[f64]) -> f64 {
        let mut y = vec![0.0; v.len()];
        self.apply_real(v, &mut y);
        v.iter().zip(&y).map(|(a, b)| a * b).sum()
    }
}

/// [A, B] = AB - BA.
pub fn commutator(a: &OperatorMatrix, b: &OperatorMatrix) -> Result<OperatorMatrix> {
    a.mul(b)?.sub(&b.mul(a)?)
}
