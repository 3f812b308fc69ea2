use serde::{Deserialize, Serialize};

use crate::linalg::{CMatrix, C64};

/// Real variable vector layout: every UE's precoder realified as
/// `2·Nt·L` reals (real parts then imaginary parts, column-major), UEs in
/// flat order, followed by named scalar slacks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariableLayout {
    pub n_cells: usize,
    pub users_per_cell: usize,
    pub tx_antennas: usize,
    pub streams: usize,
    pub slacks: Vec<String>,
}

impl VariableLayout {
    pub fn new(n_cells: usize, users_per_cell: usize, tx_antennas: usize, streams: usize) -> Self {
        Self { n_cells, users_per_cell, tx_antennas, streams, slacks: Vec::new() }
    }

    pub fn per_ue(&self) -> usize {
        2 * self.tx_antennas * self.streams
    }

    pub fn n_precoder(&self) -> usize {
        self.n_cells * self.users_per_cell * self.per_ue()
    }

    pub fn len(&self) -> usize {
        self.n_precoder() + self.slacks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn re(&self, ue: usize, row: usize, col: usize) -> usize {
        ue * self.per_ue() + col * self.tx_antennas + row
    }

    pub fn im(&self, ue: usize, row: usize, col: usize) -> usize {
        self.re(ue, row, col) + self.tx_antennas * self.streams
    }

    pub fn add_slack(&mut self, name: impl Into<String>) -> usize {
        self.slacks.push(name.into());
        self.n_precoder() + self.slacks.len() - 1
    }

    /// Real coordinates of every precoder entry of the UEs served by `cell`.
    pub fn cell_coordinates(&self, cell: usize) -> impl Iterator<Item = usize> + '_ {
        let per = self.per_ue();
        let start = cell * self.users_per_cell * per;
        start..start + self.users_per_cell * per
    }
}

/// `constant + Σ coeff · x[index]`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AffineExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl AffineExpr {
    pub fn constant(c: f64) -> Self {
        Self { terms: Vec::new(), constant: c }
    }

    pub fn var(index: usize) -> Self {
        Self { terms: vec![(index, 1.0)], constant: 0.0 }
    }

    pub fn push(&mut self, index: usize, coeff: f64) {
        if coeff != 0.0 {
            self.terms.push((index, coeff));
        }
    }

    pub fn add(&mut self, other: &AffineExpr, scale: f64) {
        self.constant += scale * other.constant;
        for &(i, c) in &other.terms {
            self.push(i, scale * c);
        }
    }

    pub fn plus(mut self, other: &AffineExpr, scale: f64) -> Self {
        self.add(other, scale);
        self
    }

    pub fn scaled(mut self, s: f64) -> Self {
        self.constant *= s;
        for t in &mut self.terms {
            t.1 *= s;
        }
        self.terms.retain(|t| t.1 != 0.0);
        self
    }

    /// Sort by index and merge duplicates.
    pub fn compact(&mut self) {
        self.terms.sort_by_key(|t| t.0);
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(self.terms.len());
        for &(i, c) in &self.terms {
            match out.last_mut() {
                Some(last) if last.0 == i => last.1 += c,
                _ => out.push((i, c)),
            }
        }
        out.retain(|t| t.1 != 0.0);
        self.terms = out;
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(i, c)| c * x[i]).sum::<f64>()
    }
}

/// Complex-valued affine expression in the real variables.
#[derive(Clone, Debug, Default)]
pub struct CAffine {
    pub re: AffineExpr,
    pub im: AffineExpr,
}

impl CAffine {
    pub fn constant(z: C64) -> Self {
        Self { re: AffineExpr::constant(z.re), im: AffineExpr::constant(z.im) }
    }

    /// Add `κ · (x[re] + i·x[im])`.
    pub fn push_scaled_var(&mut self, kappa: C64, re: usize, im: usize) {
        self.re.push(re, kappa.re);
        self.re.push(im, -kappa.im);
        self.im.push(re, kappa.im);
        self.im.push(im, kappa.re);
    }

    pub fn add(&mut self, other: &CAffine) {
        self.re.add(&other.re, 1.0);
        self.im.add(&other.im, 1.0);
    }

    pub fn conj(&self) -> Self {
        Self { re: self.re.clone(), im: self.im.clone().scaled(-1.0) }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { re: self.re.clone().scaled(s), im: self.im.clone().scaled(s) }
    }
}

/// Matrix of complex affine expressions, column-major.
#[derive(Clone, Debug)]
pub struct CExprMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<CAffine>,
}

impl CExprMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![CAffine::default(); rows * cols] }
    }

    pub fn from_constant(m: &CMatrix) -> Self {
        let mut out = Self::zeros(m.nrows(), m.ncols());
        for c in 0..m.ncols() {
            for r in 0..m.nrows() {
                *out.at_mut(r, c) = CAffine::constant(m[(r, c)]);
            }
        }
        out
    }

    /// `left · V_ue · rightᴴ` (`right = None` means the identity).
    pub fn product(layout: &VariableLayout, ue: usize, left: &CMatrix, right: Option<&CMatrix>) -> Self {
        let (nt, l) = (layout.tx_antennas, layout.streams);
        debug_assert_eq!(left.ncols(), nt);
        let cols = right.map_or(l, |r| r.nrows());
        let mut out = Self::zeros(left.nrows(), cols);
        for a in 0..left.nrows() {
            for b in 0..cols {
                let e = out.at_mut(a, b);
                for q in 0..l {
                    let w = match right {
                        Some(r) => r[(b, q)].conj(),
                        None if b == q => C64::new(1.0, 0.0),
                        None => continue,
                    };
                    for p in 0..nt {
                        let kappa = left[(a, p)] * w;
                        if kappa != C64::new(0.0, 0.0) {
                            e.push_scaled_var(kappa, layout.re(ue, p, q), layout.im(ue, p, q));
                        }
                    }
                }
            }
        }
        out
    }

    pub fn at(&self, r: usize, c: usize) -> &CAffine {
        &self.data[c * self.rows + r]
    }

    pub fn at_mut(&mut self, r: usize, c: usize) -> &mut CAffine {
        &mut self.data[c * self.rows + r]
    }

    pub fn add(&mut self, other: &CExprMatrix) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            a.add(b);
        }
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for c in 0..self.cols {
            for r in 0..self.rows {
                *out.at_mut(c, r) = self.at(r, c).conj();
            }
        }
        out
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z.scaled(s)).collect() }
    }

    /// `X + Xᴴ`.
    pub fn plus_adjoint(&self) -> Self {
        let mut out = self.clone();
        out.add(&self.adjoint());
        out
    }

    /// Real and imaginary parts of every entry, column-major.
    pub fn realified_entries(&self) -> Vec<AffineExpr> {
        self.data.iter().flat_map(|z| [z.re.clone(), z.im.clone()]).collect()
    }

    /// Assemble a Hermitian block matrix from its upper blocks
    /// (`blocks[i][j]` for `j ≥ i`, `None` meaning zero).
    pub fn hermitian_blocks(sizes: &[usize], blocks: &[Vec<Option<CExprMatrix>>]) -> Self {
        let dim: usize = sizes.iter().sum();
        let offsets: Vec<usize> = sizes.iter().scan(0, |s, &n| {
            let o = *s;
            *s += n;
            Some(o)
        }).collect();
        let mut out = Self::zeros(dim, dim);
        for (i, row) in blocks.iter().enumerate() {
            for (j, blk) in row.iter().enumerate().skip(i) {
                let Some(b) = blk else { continue };
                assert_eq!((b.rows, b.cols), (sizes[i], sizes[j]), "block ({i},{j}) has the wrong shape");
                for c in 0..b.cols {
                    for r in 0..b.rows {
                        let (gr, gc) = (offsets[i] + r, offsets[j] + c);
                        if i == j && r > c {
                            continue;
                        }
                        *out.at_mut(gr, gc) = b.at(r, c).clone();
                        if gr != gc {
                            *out.at_mut(gc, gr) = b.at(r, c).conj();
                        }
                    }
                }
            }
        }
        // Diagonal entries of a Hermitian matrix are real.
        for d in 0..dim {
            out.at_mut(d, d).im = AffineExpr::default();
        }
        out
    }

    /// Upper triangle (column-major) of the real embedding
    /// `[[Re, −Im], [Im, Re]]` of a Hermitian expression matrix.
    pub fn realified_upper_triangle(&self) -> Vec<AffineExpr> {
        assert_eq!(self.rows, self.cols);
        let d = self.rows;
        let entry = |i: usize, j: usize| -> AffineExpr {
            match (i < d, j < d) {
                (true, true) => self.at(i, j).re.clone(),
                (false, false) => self.at(i - d, j - d).re.clone(),
                (true, false) => self.at(i, j - d).im.clone().scaled(-1.0),
                (false, true) => self.at(i - d, j).im.clone(),
            }
        };
        let mut out = Vec::with_capacity(d * (2 * d + 1));
        for j in 0..2 * d {
            for i in 0..=j {
                out.push(entry(i, j));
            }
        }
        out
    }
}
