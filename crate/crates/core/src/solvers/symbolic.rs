//! Exact affine evaluation along one activation pattern.

use num_rational::BigRational;
use num_traits::{Signed, Zero};

use super::fm::Row;
use crate::exec::Domain;

pub(crate) fn rational(v: f64) -> BigRational {
    BigRational::from_float(v).expect("finite value")
}

/// `coeffs · x + constant` over the network inputs.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Affine {
    pub coeffs: Vec<BigRational>,
    pub constant: BigRational,
}

impl Affine {
    fn zero(n: usize) -> Self {
        Self {
            coeffs: vec![BigRational::zero(); n],
            constant: BigRational::zero(),
        }
    }

    pub fn variable(n: usize, i: usize) -> Self {
        let mut a = Self::zero(n);
        a.coeffs[i] = BigRational::from_integer(1.into());
        a
    }

    fn combine(&self, other: &Self, sign: i32) -> Self {
        let pick = |a: &BigRational, b: &BigRational| if sign > 0 { a + b } else { a - b };
        Self {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| pick(a, b))
                .collect(),
            constant: pick(&self.constant, &other.constant),
        }
    }

    fn scaled(&self, w: &BigRational) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|c| c * w).collect(),
            constant: &self.constant * w,
        }
    }

    /// Exact range over the box `[lo, hi]`.
    fn range(&self, lo: &[BigRational], hi: &[BigRational]) -> (BigRational, BigRational) {
        let (mut min, mut max) = (self.constant.clone(), self.constant.clone());
        for (i, c) in self.coeffs.iter().enumerate() {
            if c.is_positive() {
                min += c * &lo[i];
                max += c * &hi[i];
            } else if c.is_negative() {
                min += c * &hi[i];
                max += c * &lo[i];
            }
        }
        (min, max)
    }

    /// The row `self <= 0`.
    pub fn nonpositive(&self) -> Row {
        Row::new(self.coeffs.clone(), -&self.constant)
    }

    /// The row `self >= 0`.
    pub fn nonnegative(&self) -> Row {
        Row::new(
            self.coeffs.iter().map(|c| -c).collect(),
            self.constant.clone(),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Sym {
    Live(Affine),
    /// Evaluation stopped at an undecided branch; values are meaningless.
    Dead,
}

/// Replays a network with ReLU and max decisions taken from `tape`.
/// Decisions that the input box already settles are not recorded. The first
/// undecided branch past the end of the tape is stored in `pending` and the
/// rest of the evaluation is skipped.
pub(crate) struct PatternDomain<'a> {
    n: usize,
    lo: &'a [BigRational],
    hi: &'a [BigRational],
    tape: &'a [bool],
    pos: usize,
    pub rows: Vec<Row>,
    pub pending: Option<Affine>,
}

impl<'a> PatternDomain<'a> {
    pub fn new(lo: &'a [BigRational], hi: &'a [BigRational], tape: &'a [bool]) -> Self {
        Self {
            n: lo.len(),
            lo,
            hi,
            tape,
            pos: 0,
            rows: Vec::new(),
            pending: None,
        }
    }

    /// Whether `expr >= 0` (true) or `expr <= 0` (false) on this pattern;
    /// `None` once evaluation is suspended.
    fn decide(&mut self, expr: &Affine) -> Option<bool> {
        if self.pending.is_some() {
            return None;
        }
        let (min, max) = expr.range(self.lo, self.hi);
        if !min.is_negative() {
            return Some(true);
        }
        if !max.is_positive() {
            return Some(false);
        }
        match self.tape.get(self.pos) {
            Some(&d) => {
                self.pos += 1;
                self.rows.push(if d {
                    expr.nonnegative()
                } else {
                    expr.nonpositive()
                });
                Some(d)
            }
            None => {
                self.pending = Some(expr.clone());
                None
            }
        }
    }
}

fn live2<'v>(a: &'v Sym, b: &'v Sym) -> Option<(&'v Affine, &'v Affine)> {
    match (a, b) {
        (Sym::Live(a), Sym::Live(b)) => Some((a, b)),
        _ => None,
    }
}

impl Domain for PatternDomain<'_> {
    type V = Sym;
    const NAME: &'static str = "exact piecewise-linear";

    fn constant(&mut self, c: f64) -> Sym {
        let mut a = Affine::zero(self.n);
        a.constant = rational(c);
        Sym::Live(a)
    }

    fn add(&mut self, a: &Sym, b: &Sym) -> Sym {
        live2(a, b).map_or(Sym::Dead, |(a, b)| Sym::Live(a.combine(b, 1)))
    }

    fn sub(&mut self, a: &Sym, b: &Sym) -> Sym {
        live2(a, b).map_or(Sym::Dead, |(a, b)| Sym::Live(a.combine(b, -1)))
    }

    fn scale(&mut self, a: &Sym, w: f64) -> Sym {
        match a {
            Sym::Live(a) => Sym::Live(a.scaled(&rational(w))),
            Sym::Dead => Sym::Dead,
        }
    }

    fn mul(&mut self, _: &Sym, _: &Sym) -> Option<Sym> {
        None
    }

    fn relu(&mut self, a: &Sym) -> Sym {
        let Sym::Live(expr) = a else { return Sym::Dead };
        match self.decide(expr) {
            Some(true) => a.clone(),
            Some(false) => Sym::Live(Affine::zero(self.n)),
            None => Sym::Dead,
        }
    }

    fn sigmoid(&mut self, _: &Sym) -> Option<Sym> {
        None
    }

    fn tanh(&mut self, _: &Sym) -> Option<Sym> {
        None
    }

    fn max(&mut self, a: &Sym, b: &Sym) -> Sym {
        let Some((x, y)) = live2(a, b) else {
            return Sym::Dead;
        };
        let diff = x.combine(y, -1);
        match self.decide(&diff) {
            Some(true) => a.clone(),
            Some(false) => b.clone(),
            None => Sym::Dead,
        }
    }
}
