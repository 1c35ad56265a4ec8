//! Sparse homogeneous polynomials in `x, y, z` with complex coefficients.
//!
//! Text grammar, whitespace-insensitive:
//!
//! ```text
//! poly   := [sign] term (sign term)*
//! term   := item (['*'] item)*
//! item   := real | '(' complex ')' | var ['^' integer]
//! var    := 'x' | 'y' | 'z'
//! complex:= [sign] part (sign part)*     part := real ['i'] | 'i'
//! ```
//!
//! e.g. `x^3 + y^3 + z^3`, `x*y - 2*z^2`, `(1.5-2i) x^2 y + 3 z^3`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::projective::{normalize, sample_fs_uniform, ProjPoint, C64};

/// Largest supported total degree.
pub const MAX_DEGREE: u32 = 64;

#[derive(Clone, Debug, PartialEq)]
pub struct HomPoly {
    degree: u32,
    terms: BTreeMap<[u32; 3], C64>,
}

/// Coordinate powers `z_i^k` for `k <= degree`, shared by every polynomial
/// evaluated at the same point.
pub struct Powers {
    pw: [[C64; MAX_DEGREE as usize + 1]; 3],
}

impl Powers {
    pub fn new(z: &[C64; 3], degree: u32) -> Self {
        let mut pw = [[C64::new(0.0, 0.0); MAX_DEGREE as usize + 1]; 3];
        for (i, row) in pw.iter_mut().enumerate() {
            row[0] = C64::new(1.0, 0.0);
            for k in 1..=degree as usize {
                row[k] = row[k - 1] * z[i];
            }
        }
        Powers { pw }
    }
}

impl HomPoly {
    pub fn zero(degree: u32) -> Self {
        HomPoly {
            degree,
            terms: BTreeMap::new(),
        }
    }

    pub fn monomial(exponents: [u32; 3], coeff: C64) -> Self {
        let mut p = HomPoly::zero(exponents.iter().sum());
        if coeff != C64::new(0.0, 0.0) {
            p.terms.insert(exponents, coeff);
        }
        p
    }

    /// Build from `(exponents, coefficient)` pairs, merging repeats and
    /// dropping zero coefficients.
    pub fn from_terms<I>(degree: u32, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = ([u32; 3], C64)>,
    {
        if degree > MAX_DEGREE {
            return Err(Error::InvalidArgument(format!(
                "degree {degree} exceeds {MAX_DEGREE}"
            )));
        }
        let mut p = HomPoly::zero(degree);
        for (e, c) in terms {
            let found = e.iter().sum::<u32>();
            if found != degree {
                return Err(Error::Inhomogeneous {
                    pos: 0,
                    expected: degree,
                    found,
                });
            }
            p.add_term(e, c);
        }
        Ok(p)
    }

    fn add_term(&mut self, e: [u32; 3], c: C64) {
        let slot = self.terms.entry(e).or_insert(C64::new(0.0, 0.0));
        *slot += c;
        if *slot == C64::new(0.0, 0.0) {
            self.terms.remove(&e);
        }
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn terms(&self) -> &BTreeMap<[u32; 3], C64> {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, e: [u32; 3]) -> C64 {
        self.terms.get(&e).copied().unwrap_or_default()
    }

    /// Largest coefficient modulus (0 for the zero polynomial).
    pub fn max_coeff(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn eval(&self, z: &[C64; 3]) -> C64 {
        self.eval_with(&Powers::new(z, self.degree))
    }

    /// Evaluate with precomputed powers; `pw` must cover this degree.
    pub fn eval_with(&self, pw: &Powers) -> C64 {
        self.terms
            .iter()
            .map(|(e, c)| {
                c * pw.pw[0][e[0] as usize] * pw.pw[1][e[1] as usize] * pw.pw[2][e[2] as usize]
            })
            .sum()
    }

    /// Formal partial derivative in variable `var` (0 = x, 1 = y, 2 = z).
    pub fn partial(&self, var: usize) -> HomPoly {
        assert!(var < 3, "variable index {var}");
        let mut out = HomPoly::zero(self.degree.saturating_sub(1));
        for (e, c) in &self.terms {
            if e[var] == 0 {
                continue;
            }
            let mut d = *e;
            d[var] -= 1;
            out.add_term(d, c * e[var] as f64);
        }
        out
    }

    pub fn gradient(&self) -> [HomPoly; 3] {
        [self.partial(0), self.partial(1), self.partial(2)]
    }

    pub fn scale(&self, s: C64) -> HomPoly {
        let mut out = HomPoly::zero(self.degree);
        for (e, c) in &self.terms {
            out.add_term(*e, c * s);
        }
        out
    }

    pub fn add(&self, other: &HomPoly) -> Result<HomPoly> {
        if self.is_zero() {
            return Ok(other.clone());
        }
        if other.is_zero() {
            return Ok(self.clone());
        }
        if self.degree != other.degree {
            return Err(Error::Inhomogeneous {
                pos: 0,
                expected: self.degree,
                found: other.degree,
            });
        }
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(*e, *c);
        }
        Ok(out)
    }

    pub fn mul(&self, other: &HomPoly) -> HomPoly {
        let mut out = HomPoly::zero(self.degree + other.degree);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                out.add_term([ea[0] + eb[0], ea[1] + eb[1], ea[2] + eb[2]], ca * cb);
            }
        }
        out
    }

    pub fn pow(&self, k: u32) -> HomPoly {
        let mut out = HomPoly::monomial([0, 0, 0], C64::new(1.0, 0.0));
        for _ in 0..k {
            out = out.mul(self);
        }
        out
    }

    /// `self(g[0], g[1], g[2])` for components of a common degree.
    pub fn compose(&self, g: &[HomPoly; 3]) -> Result<HomPoly> {
        let dg = g[0].degree;
        if g.iter().any(|p| p.degree != dg) {
            return Err(Error::UnequalDegrees([
                g[0].degree,
                g[1].degree,
                g[2].degree,
            ]));
        }
        let max = self
            .terms
            .keys()
            .flat_map(|e| e.iter().copied())
            .max()
            .unwrap_or(0);
        let powers: Vec<Vec<HomPoly>> = g
            .iter()
            .map(|p| {
                let mut v = vec![HomPoly::monomial([0, 0, 0], C64::new(1.0, 0.0))];
                for k in 1..=max as usize {
                    let next = v[k - 1].mul(p);
                    v.push(next);
                }
                v
            })
            .collect();
        let mut out = HomPoly::zero(self.degree * dg);
        for (e, c) in &self.terms {
            let prod = powers[0][e[0] as usize]
                .mul(&powers[1][e[1] as usize])
                .mul(&powers[2][e[2] as usize]);
            for (pe, pc) in prod.terms {
                out.add_term(pe, pc * c);
            }
        }
        Ok(out)
    }

    /// Points of `{P = 0}` obtained by intersecting the curve with random
    /// lines and polishing each root with Newton's method along the line.
    pub fn sample_zeros<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<ProjPoint> {
        let m = self.degree as usize;
        let mut out = Vec::with_capacity(n);
        if m == 0 || self.is_zero() {
            return out;
        }
        let scale = self.max_coeff();
        let mut attempts = 0;
        while out.len() < n && attempts < 100 * n + 100 {
            attempts += 1;
            let a = *sample_fs_uniform(rng).coords();
            let b = *sample_fs_uniform(rng).coords();
            let on_line = |s: C64| [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]];
            // coefficients of s -> P(a + s b) by a discrete Fourier transform
            let nodes = m + 1;
            let vals: Vec<C64> = (0..nodes)
                .map(|k| {
                    let w =
                        C64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / nodes as f64);
                    self.eval(&on_line(w))
                })
                .collect();
            let coeffs: Vec<C64> = (0..nodes)
                .map(|j| {
                    (0..nodes)
                        .map(|k| {
                            let w = C64::from_polar(
                                1.0,
                                -2.0 * std::f64::consts::PI * (j * k) as f64 / nodes as f64,
                            );
                            vals[k] * w
                        })
                        .sum::<C64>()
                        / nodes as f64
                })
                .collect();
            let grad = self.gradient();
            for s0 in univariate_roots(&coeffs) {
                let mut s = s0;
                for _ in 0..20 {
                    let z = on_line(s);
                    let dp: C64 = (0..3).map(|i| grad[i].eval(&z) * b[i]).sum();
                    if dp.norm() == 0.0 {
                        break;
                    }
                    let step = self.eval(&z) / dp;
                    s -= step;
                    if step.norm() < 1e-16 * (1.0 + s.norm()) {
                        break;
                    }
                }
                let Ok(p) = normalize(on_line(s)) else {
                    continue;
                };
                if self.eval(p.coords()).norm() < 1e-11 * scale.max(1.0) && out.len() < n {
                    out.push(p);
                }
            }
        }
        out
    }
}

/// Roots of `sum c[k] s^k` by Durand–Kerner iteration.
pub(crate) fn univariate_roots(c: &[C64]) -> Vec<C64> {
    let mut c = c.to_vec();
    while c.len() > 1
        && c.last().unwrap().norm() < 1e-14 * c.iter().map(|x| x.norm()).fold(0.0, f64::max)
    {
        c.pop();
    }
    let m = c.len() - 1;
    if m == 0 {
        return Vec::new();
    }
    let lead = c[m];
    let monic: Vec<C64> = c.iter().map(|x| x / lead).collect();
    let radius = 1.0 + monic[..m].iter().map(|x| x.norm()).fold(0.0, f64::max);
    let mut roots: Vec<C64> = (0..m)
        .map(|k| {
            C64::from_polar(
                radius,
                0.4 + 2.0 * std::f64::consts::PI * k as f64 / m as f64,
            )
        })
        .collect();
    let eval = |s: C64| {
        monic
            .iter()
            .rev()
            .fold(C64::new(0.0, 0.0), |acc, a| acc * s + a)
    };
    for _ in 0..1000 {
        let mut moved = 0.0f64;
        for i in 0..m {
            let mut denom = C64::new(1.0, 0.0);
            for j in 0..m {
                if i != j {
                    denom *= roots[i] - roots[j];
                }
            }
            if denom.norm() == 0.0 {
                denom = C64::new(1e-12, 0.0);
            }
            let step = eval(roots[i]) / denom;
            roots[i] -= step;
            moved = moved.max(step.norm() / (1.0 + roots[i].norm()));
        }
        if moved < 1e-15 {
            break;
        }
    }
    roots
}

impl fmt::Display for HomPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        for (k, (e, c)) in self.terms.iter().rev().enumerate() {
            let constant = e.iter().all(|&p| p == 0);
            if c.im == 0.0 {
                let neg = c.re < 0.0;
                match (k, neg) {
                    (0, true) => write!(f, "-")?,
                    (0, false) => {}
                    (_, true) => write!(f, " - ")?,
                    (_, false) => write!(f, " + ")?,
                }
                let mag = c.re.abs();
                if mag != 1.0 || constant {
                    write!(f, "{mag:?}")?;
                    if !constant {
                        write!(f, "*")?;
                    }
                }
            } else {
                if k > 0 {
                    write!(f, " + ")?;
                }
                let sign = if c.im < 0.0 { '-' } else { '+' };
                write!(f, "({:?}{}{:?}i)", c.re, sign, c.im.abs())?;
                if !constant {
                    write!(f, "*")?;
                }
            }
            let mut first = true;
            for (var, &p) in ['x', 'y', 'z'].iter().zip(e) {
                if p == 0 {
                    continue;
                }
                if !first {
                    write!(f, "*")?;
                }
                first = false;
                if p == 1 {
                    write!(f, "{var}")?;
                } else {
                    write!(f, "{var}^{p}")?;
                }
            }
        }
        Ok(())
    }
}

impl FromStr for HomPoly {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse(s)
    }
}

/// Parse the polynomial text grammar.
pub fn parse(text: &str) -> Result<HomPoly> {
    Parser::new(text).polynomial()
}

struct Parser {
    chars: Vec<char>,
    pos: usize,
}

impl Parser {
    fn new(text: &str) -> Self {
        Parser {
            chars: text.chars().collect(),
            pos: 0,
        }
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Syntax {
            pos: self.pos + 1,
            msg: msg.into(),
        })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).copied()
    }

    fn sign(&mut self) -> Option<f64> {
        match self.peek() {
            Some('+') => {
                self.pos += 1;
                Some(1.0)
            }
            Some('-') => {
                self.pos += 1;
                Some(-1.0)
            }
            _ => None,
        }
    }

    fn polynomial(&mut self) -> Result<HomPoly> {
        if self.peek().is_none() {
            return Err(Error::EmptyPolynomial);
        }
        let mut degree: Option<u32> = None;
        let mut out = HomPoly::zero(0);
        let mut sign = self.sign().unwrap_or(1.0);
        loop {
            let start = self.pos + 1;
            let (e, c) = self.term()?;
            let found = e.iter().sum::<u32>();
            match degree {
                None => {
                    if found > MAX_DEGREE {
                        return Err(Error::Syntax {
                            pos: start,
                            msg: format!("degree {found} exceeds {MAX_DEGREE}"),
                        });
                    }
                    degree = Some(found);
                    out.degree = found;
                }
                Some(d) if d != found => {
                    return Err(Error::Inhomogeneous {
                        pos: start,
                        expected: d,
                        found,
                    })
                }
                _ => {}
            }
            out.add_term(e, c * sign);
            match self.peek() {
                None => break,
                Some(_) => match self.sign() {
                    Some(s) => sign = s,
                    None => return self.err("expected '+', '-' or end of input"),
                },
            }
        }
        if out.is_zero() {
            return Err(Error::EmptyPolynomial);
        }
        Ok(out)
    }

    fn starts_item(c: char) -> bool {
        c.is_ascii_digit() || c == '.' || c == '(' || c == 'x' || c == 'y' || c == 'z'
    }

    fn term(&mut self) -> Result<([u32; 3], C64)> {
        let mut e = [0u32; 3];
        let mut c = C64::new(1.0, 0.0);
        match self.peek() {
            Some(ch) if Self::starts_item(ch) => {}
            Some(_) => return self.err("expected a coefficient or variable"),
            None => return self.err("unexpected end of input"),
        }
        loop {
            match self.peek() {
                Some(v @ ('x' | 'y' | 'z')) => {
                    self.pos += 1;
                    let idx = (v as u8 - b'x') as usize;
                    let power = if self.peek() == Some('^') {
                        self.pos += 1;
                        self.skip_ws();
                        self.integer()?
                    } else {
                        1
                    };
                    e[idx] += power;
                }
                Some('(') => {
                    self.pos += 1;
                    c *= self.complex()?;
                }
                Some(ch) if ch.is_ascii_digit() || ch == '.' => {
                    c *= self.real()?;
                }
                _ => return self.err("expected a coefficient or variable"),
            }
            match self.peek() {
                Some('*') => {
                    self.pos += 1;
                    match self.peek() {
                        Some(ch) if Self::starts_item(ch) => {}
                        _ => return self.err("expected a factor after '*'"),
                    }
                }
                Some(ch) if Self::starts_item(ch) => {}
                _ => break,
            }
        }
        Ok((e, c))
    }

    fn integer(&mut self) -> Result<u32> {
        let start = self.pos;
        while self.pos < self.chars.len() && self.chars[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return self.err("expected integer exponent");
        }
        let s: String = self.chars[start..self.pos].iter().collect();
        match s.parse::<u32>() {
            Ok(v) if v <= MAX_DEGREE => Ok(v),
            _ => {
                self.pos = start;
                self.err(format!("exponent {s} out of range"))
            }
        }
    }

    fn real(&mut self) -> Result<f64> {
        self.skip_ws();
        let start = self.pos;
        let digits = |p: &mut Parser| {
            let s = p.pos;
            while p.pos < p.chars.len() && p.chars[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
            p.pos - s
        };
        let mut n = digits(self);
        if self.chars.get(self.pos) == Some(&'.') {
            self.pos += 1;
            n += digits(self);
        }
        if n == 0 {
            self.pos = start;
            return self.err("expected a number");
        }
        if matches!(self.chars.get(self.pos), Some('e' | 'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.chars.get(self.pos), Some('+' | '-')) {
                self.pos += 1;
            }
            if digits(self) == 0 {
                self.pos = save;
                return self.err("malformed exponent in number");
            }
        }
        let s: String = self.chars[start..self.pos].iter().collect();
        s.parse::<f64>().or_else(|_| {
            self.pos = start;
            self.err(format!("malformed number '{s}'"))
        })
    }

    fn complex(&mut self) -> Result<C64> {
        let mut total = C64::new(0.0, 0.0);
        let mut sign = self.sign().unwrap_or(1.0);
        loop {
            let part = match self.peek() {
                Some('i') => {
                    self.pos += 1;
                    C64::new(0.0, 1.0)
                }
                Some(ch) if ch.is_ascii_digit() || ch == '.' => {
                    let v = self.real()?;
                    if self.chars.get(self.pos) == Some(&'i') {
                        self.pos += 1;
                        C64::new(0.0, v)
                    } else {
                        C64::new(v, 0.0)
                    }
                }
                _ => return self.err("expected a number in complex coefficient"),
            };
            total += part * sign;
            match self.peek() {
                Some(')') => {
                    self.pos += 1;
                    return Ok(total);
                }
                Some('+' | '-') => sign = self.sign().unwrap(),
                _ => return self.err("expected ')'"),
            }
        }
    }
}
