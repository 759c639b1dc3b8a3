//! Exact-rational construction of the smooth cut-off g: [0,1] -> [0,1] used
//! to interpolate between spectra: six-fold antiderivative of the five-fold
//! mirror-doubling operator applied to the tent map, rescaled by 2^21 so that
//! g(0) = 0 and g(1) = 1 exactly, with certified derivative sup-norms.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn br(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Dense polynomial with exact rational coefficients, ascending degree order.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    coeffs: Vec<BigRational>,
}

impl Poly {
    pub fn new(mut coeffs: Vec<BigRational>) -> Self {
        while coeffs.len() > 1 && coeffs.last().map_or(false, Zero::is_zero) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(BigRational::zero());
        }
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self::new(vec![])
    }

    pub fn coeffs(&self) -> &[BigRational] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, x: &BigRational) -> BigRational {
        let mut acc = BigRational::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }

    pub fn eval_f64(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for c in self.coeffs.iter().rev() {
            acc = acc * x + c.to_f64().unwrap_or(f64::NAN);
        }
        acc
    }

    pub fn derivative(&self) -> Self {
        if self.coeffs.len() <= 1 {
            return Self::zero();
        }
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, c)| c * BigRational::from_integer(BigInt::from(i)))
                .collect(),
        )
    }

    /// Antiderivative with zero constant term.
    pub fn antiderivative(&self) -> Self {
        let mut out = vec![BigRational::zero()];
        for (i, c) in self.coeffs.iter().enumerate() {
            out.push(c / BigRational::from_integer(BigInt::from(i as i64 + 1)));
        }
        Self::new(out)
    }

    pub fn scale(&self, c: &BigRational) -> Self {
        Self::new(self.coeffs.iter().map(|x| x * c).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        let len = self.coeffs.len().max(other.coeffs.len());
        let mut out = vec![BigRational::zero(); len];
        for (i, c) in self.coeffs.iter().enumerate() {
            out[i] += c;
        }
        for (i, c) in other.coeffs.iter().enumerate() {
            out[i] += c;
        }
        Self::new(out)
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = vec![BigRational::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::new(out)
    }

    /// p(a x + b), exact.
    pub fn compose_affine(&self, a: &BigRational, b: &BigRational) -> Self {
        let lin = Poly::new(vec![b.clone(), a.clone()]);
        let mut acc = Poly::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc.mul(&lin).add(&Poly::new(vec![c.clone()]));
        }
        acc
    }
}

/// Piecewise polynomial on [breakpoints[0], breakpoints.last()]; piece i
/// applies on [breakpoints[i], breakpoints[i+1]].
#[derive(Debug, Clone)]
pub struct PiecewisePoly {
    breakpoints: Vec<BigRational>,
    pieces: Vec<Poly>,
}

impl PiecewisePoly {
    pub fn new(breakpoints: Vec<BigRational>, pieces: Vec<Poly>) -> Result<Self> {
        if breakpoints.len() != pieces.len() + 1 {
            return Err(Error::Shape(format!(
                "piecewise: {} breakpoints for {} pieces",
                breakpoints.len(),
                pieces.len()
            )));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Domain("piecewise: breakpoints not increasing".into()));
        }
        Ok(Self {
            breakpoints,
            pieces,
        })
    }

    pub fn breakpoints(&self) -> &[BigRational] {
        &self.breakpoints
    }

    pub fn pieces(&self) -> &[Poly] {
        &self.pieces
    }

    fn piece_index(&self, x: &BigRational) -> usize {
        let last = self.pieces.len() - 1;
        for i in 0..last {
            if *x < self.breakpoints[i + 1] {
                return i;
            }
        }
        last
    }

    /// Exact evaluation inside the support; clamps to the boundary pieces.
    pub fn eval(&self, x: &BigRational) -> BigRational {
        self.pieces[self.piece_index(x)].eval(x)
    }

    pub fn derivative(&self) -> Self {
        Self {
            breakpoints: self.breakpoints.clone(),
            pieces: self.pieces.iter().map(Poly::derivative).collect(),
        }
    }

    /// Continuous antiderivative vanishing at the left end of the support.
    pub fn antiderivative(&self) -> Self {
        let mut pieces = Vec::with_capacity(self.pieces.len());
        let mut running = BigRational::zero();
        for (i, p) in self.pieces.iter().enumerate() {
            let q = p.antiderivative();
            let shift = &running - q.eval(&self.breakpoints[i]);
            let piece = q.add(&Poly::new(vec![shift]));
            running = piece.eval(&self.breakpoints[i + 1]);
            pieces.push(piece);
        }
        Self {
            breakpoints: self.breakpoints.clone(),
            pieces,
        }
    }

    pub fn scale(&self, c: &BigRational) -> Self {
        Self {
            breakpoints: self.breakpoints.clone(),
            pieces: self.pieces.iter().map(|p| p.scale(c)).collect(),
        }
    }

    /// Pointwise product with a global polynomial.
    pub fn mul_poly(&self, p: &Poly) -> Self {
        Self {
            breakpoints: self.breakpoints.clone(),
            pieces: self.pieces.iter().map(|q| q.mul(p)).collect(),
        }
    }

    /// Exact integral over the whole support.
    pub fn integral(&self) -> BigRational {
        let anti = self.antiderivative();
        anti.pieces
            .last()
            .unwrap()
            .eval(self.breakpoints.last().unwrap())
    }

    /// Largest exact jump of the function across internal breakpoints;
    /// zero iff the piecewise function is continuous.
    pub fn max_jump(&self) -> BigRational {
        let mut worst = BigRational::zero();
        for i in 1..self.pieces.len() {
            let b = &self.breakpoints[i];
            let jump = (self.pieces[i].eval(b) - self.pieces[i - 1].eval(b)).abs();
            if jump > worst {
                worst = jump;
            }
        }
        worst
    }
}

/// Tent map f(t) = 1 - |2t - 1| on [0, 1].
pub fn tent() -> PiecewisePoly {
    PiecewisePoly::new(
        vec![br(0, 1), br(1, 2), br(1, 1)],
        vec![
            Poly::new(vec![br(0, 1), br(2, 1)]),
            Poly::new(vec![br(2, 1), br(-2, 1)]),
        ],
    )
    .expect("static tent construction")
}

/// Mirror-doubling operator: (H w)(t) = w(2t) on [0, 1/2),
/// (H w)(t) = -w(2t - 1) on [1/2, 1].
pub fn h_operator(w: &PiecewisePoly) -> PiecewisePoly {
    let two = br(2, 1);
    let half = br(1, 2);
    let minus_one = br(-1, 1);
    let mut breakpoints = Vec::with_capacity(2 * w.breakpoints.len() - 1);
    let mut pieces = Vec::with_capacity(2 * w.pieces.len());
    for b in &w.breakpoints {
        breakpoints.push(b / &two);
    }
    for p in &w.pieces {
        pieces.push(p.compose_affine(&two, &br(0, 1)));
    }
    for b in w.breakpoints.iter().skip(1) {
        breakpoints.push(&half + b / &two);
    }
    for p in &w.pieces {
        pieces.push(p.compose_affine(&two, &minus_one).scale(&minus_one));
    }
    PiecewisePoly::new(breakpoints, pieces).expect("halved breakpoints stay increasing")
}

/// The bump g = 2^21 * (six-fold antiderivative of H^5 tent): a C^6 increasing
/// surjection [0,1] -> [0,1] with g(0) = 0 and g(1) = 1 exactly.
pub fn build_bump() -> PiecewisePoly {
    let mut w = tent();
    for _ in 0..5 {
        w = h_operator(&w);
    }
    for _ in 0..6 {
        w = w.antiderivative();
    }
    w.scale(&BigRational::from_integer(BigInt::from(1i64 << 21)))
}

/// Evaluate the j-th derivative of the bump extended by constants outside
/// [0, 1] (value 0 left, 1 right; all derivatives 0 outside).
pub fn bump_eval(g: &PiecewisePoly, x: f64, order: usize) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return if order == 0 { 1.0 } else { 0.0 };
    }
    let mut d = g.clone();
    for _ in 0..order {
        d = d.derivative();
    }
    let xr = BigRational::from_float(x).expect("finite x");
    d.eval(&xr).to_f64().unwrap_or(f64::NAN)
}

/// Sup-norms of g', ..., g^(6) on [0, 1]; index j-1 holds ||g^(j)||_inf.
/// Piece endpoints are handled exactly; interior critical points are located
/// by sign-bisection of the next derivative to 1e-13.
pub fn bump_supnorms(g: &PiecewisePoly) -> Vec<f64> {
    let mut norms = Vec::with_capacity(6);
    let mut d = g.clone();
    for _ in 0..6 {
        d = d.derivative();
        let dd = d.derivative();
        let mut sup: f64 = 0.0;
        for (i, p) in d.pieces.iter().enumerate() {
            let a = d.breakpoints[i].to_f64().unwrap();
            let b = d.breakpoints[i + 1].to_f64().unwrap();
            sup = sup.max(p.eval(&d.breakpoints[i]).abs().to_f64().unwrap());
            sup = sup.max(p.eval(&d.breakpoints[i + 1]).abs().to_f64().unwrap());
            let q = &dd.pieces[i];
            let samples = 64;
            let mut prev_x = a;
            let mut prev_s = q.eval_f64(a);
            for s in 1..=samples {
                let x = a + (b - a) * s as f64 / samples as f64;
                let val = q.eval_f64(x);
                if prev_s == 0.0 || prev_s.signum() != val.signum() {
                    let (mut lo, mut hi) = (prev_x, x);
                    while hi - lo > 1e-13 {
                        let mid = 0.5 * (lo + hi);
                        if q.eval_f64(mid).signum() == prev_s.signum() {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    sup = sup.max(p.eval_f64(0.5 * (lo + hi)).abs());
                }
                prev_x = x;
                prev_s = val;
            }
        }
        norms.push(sup);
    }
    norms
}

/// Serializable exact description of a piecewise polynomial, all values as
/// "p/q" fraction strings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BumpJson {
    pub scale_log2: u32,
    pub pieces: Vec<BumpPieceJson>,
    pub supnorms: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BumpPieceJson {
    pub lo: String,
    pub hi: String,
    pub coeffs: Vec<String>,
}

pub fn bump_json(g: &PiecewisePoly) -> BumpJson {
    let pieces = g
        .pieces()
        .iter()
        .enumerate()
        .map(|(i, p)| BumpPieceJson {
            lo: g.breakpoints()[i].to_string(),
            hi: g.breakpoints()[i + 1].to_string(),
            coeffs: p.coeffs().iter().map(|c| c.to_string()).collect(),
        })
        .collect();
    BumpJson {
        scale_log2: 21,
        pieces,
        supnorms: bump_supnorms(g),
    }
}
