//! Polynomials in the noncommuting quadrature operators `q_1..q_m, p_1..p_m`
//! with `[q_k, p_k] = 2i`.
//!
//! Monomials are kept in a canonical order: variables grouped per mode
//! (`q_1, p_1, q_2, p_2, ...`) with `q` before `p` inside a mode. Operators on
//! different modes commute, so any product can be brought into this form using
//! only the single-mode rewrite `p q = q p - 2i`.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use rustc_hash::FxHashMap;
use smallvec::SmallVec;
use thiserror::Error;

/// Coefficients below this magnitude are dropped by [`NCPolynomial::pruned`].
pub const PRUNE_TOL: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlgebraError {
    #[error("width mismatch: {left} modes vs {right} modes")]
    WidthMismatch { left: usize, right: usize },
    #[error("substitution has no image for {0}")]
    MissingVariable(QuadVar),
    #[error("mode index {mode} out of range for {width} modes")]
    ModeOutOfRange { mode: usize, width: usize },
    #[error("cannot parse polynomial at column {column}: {message}")]
    Parse { column: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub enum QuadKind {
    Q,
    P,
}

/// A single quadrature operator. `mode` is zero-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QuadVar {
    pub mode: usize,
    pub kind: QuadKind,
}

impl QuadVar {
    pub fn q(mode: usize) -> Self {
        QuadVar { mode, kind: QuadKind::Q }
    }

    pub fn p(mode: usize) -> Self {
        QuadVar { mode, kind: QuadKind::P }
    }

    /// Position of this variable in the canonical interleaved order.
    pub fn slot(self) -> usize {
        match self.kind {
            QuadKind::Q => 2 * self.mode,
            QuadKind::P => 2 * self.mode + 1,
        }
    }

    pub fn from_slot(slot: usize) -> Self {
        let mode = slot / 2;
        if slot.is_multiple_of(2) {
            QuadVar::q(mode)
        } else {
            QuadVar::p(mode)
        }
    }

    /// Index in the block basis `[q_1..q_m, p_1..p_m]` used by symplectic matrices.
    pub fn block_index(self, width: usize) -> usize {
        match self.kind {
            QuadKind::Q => self.mode,
            QuadKind::P => width + self.mode,
        }
    }

    pub fn from_block_index(index: usize, width: usize) -> Self {
        if index < width {
            QuadVar::q(index)
        } else {
            QuadVar::p(index - width)
        }
    }

    /// All `2m` variables in canonical order.
    pub fn all(width: usize) -> impl Iterator<Item = QuadVar> {
        (0..2 * width).map(QuadVar::from_slot)
    }
}

impl fmt::Display for QuadVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            QuadKind::Q => write!(f, "q{}", self.mode + 1),
            QuadKind::P => write!(f, "p{}", self.mode + 1),
        }
    }
}

/// Exponent vector over the canonical variable order. The zero vector is the
/// identity operator.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Monomial(SmallVec<[u16; 8]>);

impl Monomial {
    pub fn identity(width: usize) -> Self {
        Monomial(SmallVec::from_elem(0, 2 * width))
    }

    pub fn var(width: usize, v: QuadVar) -> Self {
        let mut m = Self::identity(width);
        m.0[v.slot()] = 1;
        m
    }

    /// Builds a monomial from `(variable, power)` pairs; repeated variables add up.
    pub fn from_powers(width: usize, powers: &[(QuadVar, u16)]) -> Self {
        let mut m = Self::identity(width);
        for &(v, e) in powers {
            m.0[v.slot()] += e;
        }
        m
    }

    pub fn from_exponents(exponents: &[u16]) -> Self {
        assert!(exponents.len().is_multiple_of(2), "exponent vector must have even length");
        Monomial(SmallVec::from_slice(exponents))
    }

    pub fn width(&self) -> usize {
        self.0.len() / 2
    }

    pub fn exponents(&self) -> &[u16] {
        &self.0
    }

    pub fn exponent(&self, v: QuadVar) -> u16 {
        self.0[v.slot()]
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|&e| e as u32).sum()
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    /// Degree restricted to momentum variables.
    pub fn momentum_degree(&self) -> u32 {
        self.0.iter().skip(1).step_by(2).map(|&e| e as u32).sum()
    }

    /// Ordered list of factors, e.g. `q1 q1 p1 q2`.
    pub fn factors(&self) -> Vec<QuadVar> {
        let mut out = Vec::with_capacity(self.degree() as usize);
        for (slot, &e) in self.0.iter().enumerate() {
            for _ in 0..e {
                out.push(QuadVar::from_slot(slot));
            }
        }
        out
    }

    fn split_kinds(&self) -> (Monomial, Monomial) {
        let mut q = self.clone();
        let mut p = self.clone();
        for k in 0..self.width() {
            q.0[2 * k + 1] = 0;
            p.0[2 * k] = 0;
        }
        (q, p)
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (slot, &e) in self.0.iter().enumerate() {
            if e == 0 {
                continue;
            }
            if !first {
                write!(f, " ")?;
            }
            first = false;
            write!(f, "{}^{}", QuadVar::from_slot(slot), e)?;
        }
        if first {
            write!(f, "1")?;
        }
        Ok(())
    }
}

/// `k! C(b,k) C(c,k) (-2i)^k`: coefficient of `q^(c-k) p^(b-k)` in `p^b q^c`.
fn reorder_coefficient(b: u16, c: u16, k: u16) -> Complex64 {
    let mut n = 1.0f64;
    // k! * C(b,k) * C(c,k) = b!/(b-k)! * C(c,k)
    for j in 0..k {
        n *= (b - j) as f64;
        n *= (c - j) as f64;
        n /= (j + 1) as f64;
    }
    let phase = match k % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, -1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, 1.0),
    };
    phase * (n * 2f64.powi(k as i32))
}

/// Calls `emit` for every canonical term of `coeff * a * b`.
fn for_each_product_term(
    a: &Monomial,
    b: &Monomial,
    coeff: Complex64,
    emit: &mut impl FnMut(Monomial, Complex64),
) {
    let width = a.width();
    let mut base = a.clone();
    let mut overlaps: SmallVec<[(usize, u16, u16); 4]> = SmallVec::new();
    for k in 0..width {
        let ap = a.0[2 * k + 1];
        let bq = b.0[2 * k];
        base.0[2 * k] += bq;
        base.0[2 * k + 1] += b.0[2 * k + 1];
        if ap > 0 && bq > 0 {
            overlaps.push((k, ap, bq));
        }
    }
    if overlaps.is_empty() {
        emit(base, coeff);
        return;
    }
    fn expand(
        overlaps: &[(usize, u16, u16)],
        mono: &mut Monomial,
        coeff: Complex64,
        emit: &mut impl FnMut(Monomial, Complex64),
    ) {
        match overlaps.split_first() {
            None => emit(mono.clone(), coeff),
            Some((&(mode, ap, bq), rest)) => {
                for k in 0..=ap.min(bq) {
                    mono.0[2 * mode] -= k;
                    mono.0[2 * mode + 1] -= k;
                    expand(rest, mono, coeff * reorder_coefficient(ap, bq, k), emit);
                    mono.0[2 * mode] += k;
                    mono.0[2 * mode + 1] += k;
                }
            }
        }
    }
    expand(&overlaps, &mut base, coeff, emit);
}

/// Canonical expansion of the operator product `a * b`.
pub fn mono_multiply(a: &Monomial, b: &Monomial) -> Result<NCPolynomial, AlgebraError> {
    if a.width() != b.width() {
        return Err(AlgebraError::WidthMismatch { left: a.width(), right: b.width() });
    }
    let mut acc = Accumulator::default();
    for_each_product_term(a, b, Complex64::new(1.0, 0.0), &mut |m, c| acc.add(m, c));
    Ok(acc.finish(a.width()))
}

#[derive(Default)]
struct Accumulator {
    terms: FxHashMap<Monomial, Complex64>,
}

impl Accumulator {
    fn add(&mut self, m: Monomial, c: Complex64) {
        *self.terms.entry(m).or_insert(Complex64::new(0.0, 0.0)) += c;
    }

    fn finish(self, width: usize) -> NCPolynomial {
        let terms = self
            .terms
            .into_iter()
            .filter(|(_, c)| c.re != 0.0 || c.im != 0.0)
            .collect();
        NCPolynomial { width, terms }
    }
}

/// Complex-coefficient polynomial in `2m` quadrature operators, stored in
/// canonical monomial order. No stored coefficient is exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct NCPolynomial {
    width: usize,
    terms: BTreeMap<Monomial, Complex64>,
}

impl NCPolynomial {
    pub fn zero(width: usize) -> Self {
        NCPolynomial { width, terms: BTreeMap::new() }
    }

    pub fn constant(width: usize, c: Complex64) -> Self {
        let mut p = Self::zero(width);
        p.add_term(Monomial::identity(width), c);
        p
    }

    pub fn one(width: usize) -> Self {
        Self::constant(width, Complex64::new(1.0, 0.0))
    }

    pub fn var(width: usize, v: QuadVar) -> Self {
        Self::monomial(Monomial::var(width, v), Complex64::new(1.0, 0.0))
    }

    pub fn monomial(m: Monomial, c: Complex64) -> Self {
        let mut p = Self::zero(m.width());
        p.add_term(m, c);
        p
    }

    /// Builds a polynomial from arbitrary monomial/coefficient pairs.
    pub fn from_terms(width: usize, terms: impl IntoIterator<Item = (Monomial, Complex64)>) -> Self {
        let mut p = Self::zero(width);
        for (m, c) in terms {
            assert_eq!(m.width(), width, "monomial width mismatch");
            p.add_term(m, c);
        }
        p
    }

    /// Degree-one polynomial `sum_j coeffs[j] * Gamma_j + constant` in the block basis.
    pub fn affine(width: usize, coeffs: &[f64], constant: f64) -> Self {
        assert_eq!(coeffs.len(), 2 * width);
        let mut p = Self::zero(width);
        for (j, &c) in coeffs.iter().enumerate() {
            if c != 0.0 {
                p.add_term(
                    Monomial::var(width, QuadVar::from_block_index(j, width)),
                    Complex64::new(c, 0.0),
                );
            }
        }
        if constant != 0.0 {
            p.add_term(Monomial::identity(width), Complex64::new(constant, 0.0));
        }
        p
    }

    /// The number operator `(q_k^2 + p_k^2 - 2)/4` of a mode.
    pub fn number_operator(width: usize, mode: usize) -> Self {
        let quarter = Complex64::new(0.25, 0.0);
        Self::from_terms(
            width,
            [
                (Monomial::from_powers(width, &[(QuadVar::q(mode), 2)]), quarter),
                (Monomial::from_powers(width, &[(QuadVar::p(mode), 2)]), quarter),
                (Monomial::identity(width), Complex64::new(-0.5, 0.0)),
            ],
        )
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    /// Terms in ascending exponent-vector order.
    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Complex64)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, m: &Monomial) -> Complex64 {
        self.terms.get(m).copied().unwrap_or(Complex64::new(0.0, 0.0))
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    /// Variables that occur in at least one monomial.
    pub fn variables(&self) -> Vec<QuadVar> {
        QuadVar::all(self.width)
            .filter(|v| self.terms.keys().any(|m| m.exponent(*v) > 0))
            .collect()
    }

    pub fn add_term(&mut self, m: Monomial, c: Complex64) {
        use std::collections::btree_map::Entry;
        match self.terms.entry(m) {
            Entry::Vacant(e) => {
                if c.re != 0.0 || c.im != 0.0 {
                    e.insert(c);
                }
            }
            Entry::Occupied(mut e) => {
                let v = *e.get() + c;
                if v.re == 0.0 && v.im == 0.0 {
                    e.remove();
                } else {
                    *e.get_mut() = v;
                }
            }
        }
    }

    fn check_width(&self, other: &Self) -> Result<(), AlgebraError> {
        if self.width != other.width {
            return Err(AlgebraError::WidthMismatch { left: self.width, right: other.width });
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self, AlgebraError> {
        self.check_width(other)?;
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), *c);
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self, AlgebraError> {
        self.check_width(other)?;
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), -*c);
        }
        Ok(out)
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let mut out = Self::zero(self.width);
        for (m, c) in &self.terms {
            out.add_term(m.clone(), *c * s);
        }
        out
    }

    /// Operator product `self * other`, canonicalized.
    pub fn multiply(&self, other: &Self) -> Result<Self, AlgebraError> {
        self.check_width(other)?;
        let mut acc = Accumulator::default();
        for (a, ca) in &self.terms {
            for (b, cb) in &other.terms {
                for_each_product_term(a, b, *ca * *cb, &mut |m, c| acc.add(m, c));
            }
        }
        Ok(acc.finish(self.width))
    }

    pub fn pow(&self, n: u32) -> Result<Self, AlgebraError> {
        let mut out = Self::one(self.width);
        for _ in 0..n {
            out = out.multiply(self)?;
        }
        Ok(out)
    }

    /// Replaces every variable by its image and expands the ordered products.
    ///
    /// Terms are processed as a trie over the canonical variable order so that
    /// shared prefixes are expanded once.
    pub fn substitute(&self, images: &Substitution) -> Result<Self, AlgebraError> {
        if images.width != self.width {
            return Err(AlgebraError::WidthMismatch { left: self.width, right: images.width });
        }
        let terms: Vec<(&Monomial, Complex64)> = self.terms.iter().map(|(m, c)| (m, *c)).collect();
        let mut powers = PowerCache::new(images);
        substitute_rec(&terms, 0, &mut powers)
    }

    /// Hermitian adjoint, re-canonicalized.
    pub fn adjoint(&self) -> Self {
        let mut acc = Accumulator::default();
        for (m, c) in &self.terms {
            let (q, p) = m.split_kinds();
            // (q^a p^b)^dagger = p^b q^a per mode
            for_each_product_term(&p, &q, c.conj(), &mut |mm, cc| acc.add(mm, cc));
        }
        acc.finish(self.width)
    }

    /// Largest coefficient-wise deviation from another polynomial.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut worst = 0.0f64;
        for (m, c) in &self.terms {
            worst = worst.max((c - other.coefficient(m)).norm());
        }
        for (m, c) in &other.terms {
            if !self.terms.contains_key(m) {
                worst = worst.max(c.norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.max_abs_diff(&self.adjoint()) <= tol
    }

    /// Copy with coefficients below `tol` in magnitude removed.
    pub fn pruned(&self, tol: f64) -> Self {
        NCPolynomial {
            width: self.width,
            terms: self.terms.iter().filter(|(_, c)| c.norm() >= tol).map(|(m, c)| (m.clone(), *c)).collect(),
        }
    }

    /// Homogeneous part of the given degree.
    pub fn homogeneous_part(&self, degree: u32) -> Self {
        NCPolynomial {
            width: self.width,
            terms: self.terms.iter().filter(|(m, _)| m.degree() == degree).map(|(m, c)| (m.clone(), *c)).collect(),
        }
    }

    /// Parses `coeff q1^a p1^b + ...`. Coefficients may be real decimals or
    /// `(re,im)` pairs, optionally followed by `*`; factors may appear in any
    /// order and are canonicalized. Terms are separated by `+` or `-`.
    pub fn parse(text: &str, width: usize) -> Result<Self, AlgebraError> {
        PolyParser::new(text, width).parse()
    }
}

impl fmt::Display for NCPolynomial {
    /// Terms sorted by exponent vector, `(re,im) * q1^a p1^b` with 17
    /// significant digits, joined by ` + `. The zero polynomial prints `0`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (m, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({:.16e},{:.16e})", c.re, c.im)?;
            if !m.is_identity() {
                write!(f, " * {m}")?;
            }
        }
        Ok(())
    }
}

/// Images for each quadrature variable, indexed by canonical slot.
#[derive(Debug, Clone)]
pub struct Substitution {
    width: usize,
    images: Vec<Option<NCPolynomial>>,
}

impl Substitution {
    pub fn new(width: usize) -> Self {
        Substitution { width, images: vec![None; 2 * width] }
    }

    /// Every variable maps to itself.
    pub fn identity(width: usize) -> Self {
        let mut s = Self::new(width);
        for v in QuadVar::all(width) {
            s.set(v, NCPolynomial::var(width, v));
        }
        s
    }

    pub fn set(&mut self, v: QuadVar, image: NCPolynomial) {
        assert_eq!(image.width(), self.width, "image width mismatch");
        self.images[v.slot()] = Some(image);
    }

    pub fn get(&self, v: QuadVar) -> Option<&NCPolynomial> {
        self.images[v.slot()].as_ref()
    }

    pub fn width(&self) -> usize {
        self.width
    }
}

struct PowerCache<'a> {
    images: &'a Substitution,
    powers: Vec<Vec<NCPolynomial>>,
}

impl<'a> PowerCache<'a> {
    fn new(images: &'a Substitution) -> Self {
        PowerCache { images, powers: vec![Vec::new(); images.images.len()] }
    }

    fn get(&mut self, slot: usize, e: u16) -> Result<&NCPolynomial, AlgebraError> {
        let base = self.images.images[slot]
            .as_ref()
            .ok_or(AlgebraError::MissingVariable(QuadVar::from_slot(slot)))?;
        let cache = &mut self.powers[slot];
        if cache.is_empty() {
            cache.push(base.clone());
        }
        while cache.len() < e as usize {
            let next = cache.last().unwrap().multiply(base)?;
            cache.push(next);
        }
        Ok(&cache[e as usize - 1])
    }
}

fn substitute_rec(
    terms: &[(&Monomial, Complex64)],
    slot: usize,
    powers: &mut PowerCache<'_>,
) -> Result<NCPolynomial, AlgebraError> {
    let width = powers.images.width;
    if slot == 2 * width {
        let total: Complex64 = terms.iter().map(|(_, c)| *c).sum();
        return Ok(NCPolynomial::constant(width, total));
    }
    let mut out = NCPolynomial::zero(width);
    let mut start = 0;
    while start < terms.len() {
        let e = terms[start].0 .0[slot];
        let mut end = start + 1;
        while end < terms.len() && terms[end].0 .0[slot] == e {
            end += 1;
        }
        let rest = substitute_rec(&terms[start..end], slot + 1, powers)?;
        let part = if e == 0 { rest } else { powers.get(slot, e)?.multiply(&rest)? };
        for (m, c) in part.terms {
            out.add_term(m, c);
        }
        start = end;
    }
    Ok(out)
}

struct PolyParser<'a> {
    src: &'a str,
    pos: usize,
    width: usize,
}

impl<'a> PolyParser<'a> {
    fn new(src: &'a str, width: usize) -> Self {
        PolyParser { src, pos: 0, width }
    }

    fn err(&self, message: impl Into<String>) -> AlgebraError {
        AlgebraError::Parse { column: self.pos + 1, message: message.into() }
    }

    fn skip_ws(&mut self) {
        while let Some(ch) = self.peek() {
            if ch.is_whitespace() {
                self.pos += ch.len_utf8();
            } else {
                break;
            }
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn parse(mut self) -> Result<NCPolynomial, AlgebraError> {
        let mut out = NCPolynomial::zero(self.width);
        self.skip_ws();
        if self.peek().is_none() {
            return Err(self.err("empty expression"));
        }
        let mut sign = 1.0;
        if self.peek() == Some('-') {
            self.pos += 1;
            sign = -1.0;
        } else if self.peek() == Some('+') {
            self.pos += 1;
        }
        loop {
            let term = self.term()?;
            out = out.add(&term.scale(Complex64::new(sign, 0.0)))?;
            self.skip_ws();
            match self.peek() {
                None => break,
                Some('+') => {
                    self.pos += 1;
                    sign = 1.0;
                }
                Some('-') => {
                    self.pos += 1;
                    sign = -1.0;
                }
                Some(c) => return Err(self.err(format!("unexpected character '{c}'"))),
            }
        }
        Ok(out)
    }

    fn term(&mut self) -> Result<NCPolynomial, AlgebraError> {
        self.skip_ws();
        let mut coeff = Complex64::new(1.0, 0.0);
        let mut saw_coeff = false;
        match self.peek() {
            Some('(') => {
                coeff = self.complex()?;
                saw_coeff = true;
            }
            Some(c) if c == '-' || c == '+' => {
                let next = self.src[self.pos + 1..].chars().next();
                if next.is_some_and(|n| n.is_ascii_digit() || n == '.') {
                    coeff = Complex64::new(self.number()?, 0.0);
                    saw_coeff = true;
                } else {
                    // bare sign in front of a factor, e.g. `-q2`
                    self.pos += 1;
                    if c == '-' {
                        coeff = Complex64::new(-1.0, 0.0);
                    }
                    self.skip_ws();
                }
            }
            Some(c) if c.is_ascii_digit() || c == '.' => {
                coeff = Complex64::new(self.number()?, 0.0);
                saw_coeff = true;
            }
            _ => {}
        }
        self.skip_ws();
        if saw_coeff && self.peek() == Some('*') {
            self.pos += 1;
            self.skip_ws();
        }
        let mut term = NCPolynomial::constant(self.width, coeff);
        let mut factors = 0;
        while let Some(c) = self.peek() {
            if c != 'q' && c != 'p' {
                break;
            }
            let v = self.variable()?;
            let e = self.exponent()?;
            let f = NCPolynomial::monomial(Monomial::from_powers(self.width, &[(v, e)]), Complex64::new(1.0, 0.0));
            term = term.multiply(&f)?;
            factors += 1;
            self.skip_ws();
            if self.peek() == Some('*') {
                self.pos += 1;
                self.skip_ws();
            }
        }
        if !saw_coeff && factors == 0 {
            return Err(self.err("expected a coefficient or a quadrature factor"));
        }
        Ok(term)
    }

    fn complex(&mut self) -> Result<Complex64, AlgebraError> {
        self.pos += 1; // '('
        self.skip_ws();
        let re = self.number()?;
        self.skip_ws();
        if self.peek() != Some(',') {
            return Err(self.err("expected ',' in complex coefficient"));
        }
        self.pos += 1;
        self.skip_ws();
        let im = self.number()?;
        self.skip_ws();
        if self.peek() != Some(')') {
            return Err(self.err("expected ')' closing complex coefficient"));
        }
        self.pos += 1;
        Ok(Complex64::new(re, im))
    }

    fn number(&mut self) -> Result<f64, AlgebraError> {
        let start = self.pos;
        let bytes = self.src.as_bytes();
        let mut i = self.pos;
        if i < bytes.len() && (bytes[i] == b'-' || bytes[i] == b'+') {
            i += 1;
        }
        while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
            i += 1;
        }
        if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
            let mut j = i + 1;
            if j < bytes.len() && (bytes[j] == b'-' || bytes[j] == b'+') {
                j += 1;
            }
            if j < bytes.len() && bytes[j].is_ascii_digit() {
                while j < bytes.len() && bytes[j].is_ascii_digit() {
                    j += 1;
                }
                i = j;
            }
        }
        let text = &self.src[start..i];
        let value: f64 = text.parse().map_err(|_| self.err(format!("invalid number '{text}'")))?;
        if !value.is_finite() {
            return Err(self.err(format!("non-finite number '{text}'")));
        }
        self.pos = i;
        Ok(value)
    }

    fn variable(&mut self) -> Result<QuadVar, AlgebraError> {
        let kind = if self.peek() == Some('q') { QuadKind::Q } else { QuadKind::P };
        self.pos += 1;
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        let digits = &self.src[start..self.pos];
        let mode: usize = digits.parse().map_err(|_| self.err("expected mode index after quadrature name"))?;
        if mode == 0 || mode > self.width {
            return Err(AlgebraError::ModeOutOfRange { mode, width: self.width });
        }
        Ok(QuadVar { mode: mode - 1, kind })
    }

    fn exponent(&mut self) -> Result<u16, AlgebraError> {
        if self.peek() != Some('^') {
            return Ok(1);
        }
        self.pos += 1;
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        self.src[start..self.pos].parse().map_err(|_| self.err("expected integer exponent"))
    }
}
