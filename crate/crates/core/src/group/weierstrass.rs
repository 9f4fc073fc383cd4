//! Short Weierstrass curves `y^2 = x^3 + ax + b` over a prime field, with
//! plain affine arithmetic. Used for the tiny test curve and for any curve
//! loaded from a spec file.

use std::fmt;
use std::sync::Arc;

use num_bigint::BigUint;
use num_traits::{One, Zero};

use super::scalar::{Scalar, ScalarField};
use super::{Group, GroupError};

/// Domain parameters of a prime-order short Weierstrass curve.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CurveSpec {
    pub p: BigUint,
    pub a: BigUint,
    pub b: BigUint,
    pub gx: BigUint,
    pub gy: BigUint,
    pub order: BigUint,
    pub cofactor: u64,
}

impl CurveSpec {
    /// `y^2 = x^3 + 2x + 2` over F_17, generator (5, 1), 19 points.
    pub fn toy() -> Self {
        CurveSpec {
            p: 17u32.into(),
            a: 2u32.into(),
            b: 2u32.into(),
            gx: 5u32.into(),
            gy: 1u32.into(),
            order: 19u32.into(),
            cofactor: 1,
        }
    }

    /// NIST P-256 domain parameters.
    pub fn p256() -> Self {
        let h = |s: &str| BigUint::parse_bytes(s.as_bytes(), 16).expect("valid hex constant");
        CurveSpec {
            p: h("ffffffff00000001000000000000000000000000ffffffffffffffffffffffff"),
            a: h("ffffffff00000001000000000000000000000000fffffffffffffffffffffffc"),
            b: h("5ac635d8aa3a93e7b3ebbd55769886bc651d06b0cc53b0f63bce3c3e27d2604b"),
            gx: h("6b17d1f2e12c4247f8bce6e563a440f277037d812deb33a0f4a13945d898c296"),
            gy: h("4fe342e2fe1a7f9b8ee7eb4a7c0f9e162bce33576b315ececbb6406837bf51f5"),
            order: h("ffffffff00000000ffffffffffffffffbce6faada7179e84f3b9cac2fc632551"),
            cofactor: 1,
        }
    }

    /// Parses the text format: decimal `p, a, b, Px, Py, q` one per line,
    /// optionally followed by a cofactor line. Blank lines and `#` comments
    /// are ignored.
    pub fn parse(text: &str) -> Result<Self, GroupError> {
        let mut values = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let v = BigUint::parse_bytes(line.as_bytes(), 10).ok_or_else(|| GroupError::Parse {
                line: idx + 1,
                msg: format!("expected a decimal integer, found `{line}`"),
            })?;
            values.push((idx + 1, v));
        }
        if values.len() != 6 && values.len() != 7 {
            return Err(GroupError::Parse {
                line: values.last().map_or(0, |(l, _)| *l),
                msg: format!("expected 6 or 7 values (p, a, b, Px, Py, q[, cofactor]), found {}", values.len()),
            });
        }
        let cofactor = match values.get(6) {
            Some((line, v)) => {
                let digits = v.to_u64_digits();
                match digits.as_slice() {
                    [c] if *c > 0 => *c,
                    _ => {
                        return Err(GroupError::Parse {
                            line: *line,
                            msg: "cofactor must be a positive 64-bit integer".into(),
                        })
                    }
                }
            }
            None => 1,
        };
        let mut it = values.into_iter().map(|(_, v)| v);
        let mut next = || it.next().expect("length checked above");
        Ok(CurveSpec {
            p: next(),
            a: next(),
            b: next(),
            gx: next(),
            gy: next(),
            order: next(),
            cofactor,
        })
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "{}\n{}\n{}\n{}\n{}\n{}\n",
            self.p, self.a, self.b, self.gx, self.gy, self.order
        );
        if self.cofactor != 1 {
            s.push_str(&format!("{}\n", self.cofactor));
        }
        s
    }

    fn on_curve(&self, x: &BigUint, y: &BigUint) -> bool {
        let p = &self.p;
        let lhs = (y * y) % p;
        let rhs = (x * x % p * x + &self.a * x + &self.b) % p;
        lhs == rhs
    }

    pub fn validate(&self) -> Result<(), GroupError> {
        let bad = |m: &str| Err(GroupError::InvalidCurve(m.to_string()));
        let three = BigUint::from(3u32);
        if self.p <= three || !is_probable_prime(&self.p) {
            return bad("field modulus is not a prime greater than 3");
        }
        if self.a >= self.p || self.b >= self.p || self.gx >= self.p || self.gy >= self.p {
            return bad("coefficients and coordinates must be reduced modulo p");
        }
        let disc = (BigUint::from(4u32) * self.a.modpow(&three, &self.p)
            + BigUint::from(27u32) * &self.b * &self.b)
            % &self.p;
        if disc.is_zero() {
            return bad("singular curve: 4a^3 + 27b^2 = 0 mod p");
        }
        if !self.on_curve(&self.gx, &self.gy) {
            return bad("generator is not on the curve");
        }
        if !is_probable_prime(&self.order) {
            return bad("group order is not prime");
        }
        if self.cofactor == 0 {
            return bad("cofactor must be positive");
        }
        let g = AffinePoint::Finite {
            x: self.gx.clone(),
            y: self.gy.clone(),
        };
        if !mul_uint(self, &self.order, &g).is_identity() {
            return bad("q * P is not the identity");
        }
        Ok(())
    }
}

/// A point in affine coordinates, or the point at infinity.
#[derive(Clone, PartialEq, Eq, Hash)]
pub enum AffinePoint {
    Identity,
    Finite { x: BigUint, y: BigUint },
}

impl AffinePoint {
    pub fn new(x: impl Into<BigUint>, y: impl Into<BigUint>) -> Self {
        AffinePoint::Finite {
            x: x.into(),
            y: y.into(),
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, AffinePoint::Identity)
    }
}

impl fmt::Debug for AffinePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AffinePoint::Identity => write!(f, "O"),
            AffinePoint::Finite { x, y } => write!(f, "({x}, {y})"),
        }
    }
}

fn inv_mod(v: &BigUint, p: &BigUint) -> BigUint {
    // p is prime
    v.modpow(&(p - BigUint::from(2u32)), p)
}

fn sub_mod(a: &BigUint, b: &BigUint, p: &BigUint) -> BigUint {
    if a >= b {
        (a - b) % p
    } else {
        p - ((b - a) % p)
    }
}

fn add_points(c: &CurveSpec, lhs: &AffinePoint, rhs: &AffinePoint) -> AffinePoint {
    let (x1, y1, x2, y2) = match (lhs, rhs) {
        (AffinePoint::Identity, _) => return rhs.clone(),
        (_, AffinePoint::Identity) => return lhs.clone(),
        (AffinePoint::Finite { x: x1, y: y1 }, AffinePoint::Finite { x: x2, y: y2 }) => (x1, y1, x2, y2),
    };
    let p = &c.p;
    let slope = if x1 == x2 {
        if ((y1 + y2) % p).is_zero() {
            return AffinePoint::Identity;
        }
        let num = (BigUint::from(3u32) * x1 * x1 + &c.a) % p;
        let den = (BigUint::from(2u32) * y1) % p;
        num * inv_mod(&den, p) % p
    } else {
        sub_mod(y2, y1, p) * inv_mod(&sub_mod(x2, x1, p), p) % p
    };
    let x3 = sub_mod(&(&slope * &slope % p), &((x1 + x2) % p), p);
    let y3 = sub_mod(&(&slope * sub_mod(x1, &x3, p) % p), y1, p);
    AffinePoint::Finite { x: x3, y: y3 }
}

fn mul_uint(c: &CurveSpec, k: &BigUint, pt: &AffinePoint) -> AffinePoint {
    let mut acc = AffinePoint::Identity;
    for i in (0..k.bits()).rev() {
        acc = add_points(c, &acc, &acc);
        if k.bit(i) {
            acc = add_points(c, &acc, pt);
        }
    }
    acc
}

/// Miller-Rabin with fixed bases; exact for every modulus below 3.3e24 and
/// overwhelmingly reliable above.
pub(crate) fn is_probable_prime(n: &BigUint) -> bool {
    const BASES: [u32; 20] = [
        2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71,
    ];
    let two = BigUint::from(2u32);
    if *n < two {
        return false;
    }
    for b in BASES {
        let b = BigUint::from(b);
        if *n == b {
            return true;
        }
        if (n % &b).is_zero() {
            return false;
        }
    }
    let n_minus_one = n - BigUint::one();
    let s = n_minus_one.trailing_zeros().unwrap_or(0);
    let d = &n_minus_one >> s;
    'witness: for b in BASES {
        let mut x = BigUint::from(b).modpow(&d, n);
        if x.is_one() || x == n_minus_one {
            continue;
        }
        for _ in 1..s {
            x = x.modpow(&two, n);
            if x == n_minus_one {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// A validated curve together with its scalar field.
#[derive(Clone)]
pub struct WeierstrassCurve {
    spec: Arc<CurveSpec>,
    scalars: ScalarField,
    coord_len: usize,
    name: String,
}

impl fmt::Debug for WeierstrassCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WeierstrassCurve")
            .field("name", &self.name)
            .field("p", &self.spec.p)
            .field("q", &self.spec.order)
            .finish()
    }
}

impl WeierstrassCurve {
    pub fn new(spec: CurveSpec, name: impl Into<String>) -> Result<Self, GroupError> {
        spec.validate()?;
        let coord_len = (spec.p.bits() as usize).div_ceil(8);
        let scalars = ScalarField::new(spec.order.clone());
        Ok(WeierstrassCurve {
            spec: Arc::new(spec),
            scalars,
            coord_len,
            name: name.into(),
        })
    }

    pub fn toy() -> Self {
        Self::new(CurveSpec::toy(), "toy").expect("built-in toy curve is valid")
    }

    pub fn spec(&self) -> &CurveSpec {
        &self.spec
    }

    /// Multiplication by an unreduced integer, e.g. the group order itself.
    pub fn mul_uint(&self, k: &BigUint, pt: &AffinePoint) -> AffinePoint {
        mul_uint(&self.spec, k, pt)
    }

    /// Every point of the curve, by exhaustive search. Only sensible for
    /// tiny fields.
    pub fn enumerate_points(&self) -> Vec<AffinePoint> {
        let p = self.spec.p.clone();
        let mut out = vec![AffinePoint::Identity];
        let mut x = BigUint::zero();
        while x < p {
            let mut y = BigUint::zero();
            while y < p {
                if self.spec.on_curve(&x, &y) {
                    out.push(AffinePoint::Finite {
                        x: x.clone(),
                        y: y.clone(),
                    });
                }
                y += 1u32;
            }
            x += 1u32;
        }
        out
    }

    fn on_curve_point(&self, pt: &AffinePoint) -> bool {
        match pt {
            AffinePoint::Identity => true,
            AffinePoint::Finite { x, y } => x < &self.spec.p && y < &self.spec.p && self.spec.on_curve(x, y),
        }
    }
}

impl Group for WeierstrassCurve {
    type Element = AffinePoint;

    fn name(&self) -> &str {
        &self.name
    }

    fn scalars(&self) -> &ScalarField {
        &self.scalars
    }

    fn generator(&self) -> AffinePoint {
        AffinePoint::Finite {
            x: self.spec.gx.clone(),
            y: self.spec.gy.clone(),
        }
    }

    fn identity(&self) -> AffinePoint {
        AffinePoint::Identity
    }

    fn is_identity(&self, e: &AffinePoint) -> bool {
        e.is_identity()
    }

    fn contains(&self, e: &AffinePoint) -> bool {
        if !self.on_curve_point(e) {
            return false;
        }
        self.spec.cofactor == 1 || self.mul_uint(&self.spec.order, e).is_identity()
    }

    fn add(&self, lhs: &AffinePoint, rhs: &AffinePoint) -> AffinePoint {
        add_points(&self.spec, lhs, rhs)
    }

    fn negate(&self, e: &AffinePoint) -> AffinePoint {
        match e {
            AffinePoint::Identity => AffinePoint::Identity,
            AffinePoint::Finite { x, y } => AffinePoint::Finite {
                x: x.clone(),
                y: sub_mod(&BigUint::zero(), y, &self.spec.p),
            },
        }
    }

    fn mul(&self, k: &Scalar, e: &AffinePoint) -> AffinePoint {
        mul_uint(&self.spec, k.value(), e)
    }

    fn encode_element(&self, e: &AffinePoint) -> Vec<u8> {
        match e {
            AffinePoint::Identity => vec![0],
            AffinePoint::Finite { x, y } => {
                let mut out = vec![0u8; 1 + 2 * self.coord_len];
                out[0] = 4;
                let xb = x.to_bytes_be();
                let yb = y.to_bytes_be();
                let n = self.coord_len;
                if !x.is_zero() {
                    out[1 + n - xb.len()..1 + n].copy_from_slice(&xb);
                }
                if !y.is_zero() {
                    out[1 + 2 * n - yb.len()..].copy_from_slice(&yb);
                }
                out
            }
        }
    }

    fn decode_element(&self, bytes: &[u8]) -> Result<AffinePoint, GroupError> {
        match bytes {
            [0] => Ok(AffinePoint::Identity),
            [4, rest @ ..] if rest.len() == 2 * self.coord_len => {
                let (xb, yb) = rest.split_at(self.coord_len);
                let pt = AffinePoint::Finite {
                    x: BigUint::from_bytes_be(xb),
                    y: BigUint::from_bytes_be(yb),
                };
                if self.contains(&pt) {
                    Ok(pt)
                } else {
                    Err(GroupError::MalformedElement("point is not on the curve"))
                }
            }
            [] => Err(GroupError::MalformedElement("empty encoding")),
            [0 | 4, ..] => Err(GroupError::MalformedElement("wrong length")),
            _ => Err(GroupError::MalformedElement("unknown flag byte")),
        }
    }

    fn element_len(&self) -> usize {
        1 + 2 * self.coord_len
    }

    fn validate(&self) -> Result<(), GroupError> {
        self.spec.validate()
    }
}
