use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use super::EvalError;

/// A variable of a transition condition.
///
/// `Pre(i)` and `Post(i)` are the current and next value of the `i`-th
/// program variable. Everything else (iteration counters, chaining
/// intermediates) is a `Param` and is read existentially.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarId {
    Pre(usize),
    Post(usize),
    Param(Arc<str>),
}

impl VarId {
    pub fn param(name: &str) -> Self {
        VarId::Param(Arc::from(name))
    }

    pub fn is_param(&self) -> bool {
        matches!(self, VarId::Param(_))
    }

    pub fn is_pre(&self) -> bool {
        matches!(self, VarId::Pre(_))
    }

    pub fn is_post(&self) -> bool {
        matches!(self, VarId::Post(_))
    }

    /// Symbol used when talking to an SMT solver.
    pub fn smt_name(&self) -> String {
        match self {
            VarId::Pre(i) => format!("pre{i}"),
            VarId::Post(i) => format!("post{i}"),
            VarId::Param(p) => p.to_string(),
        }
    }

    /// Inverse of [`VarId::smt_name`].
    pub fn from_smt_name(name: &str) -> VarId {
        let indexed = |prefix: &str| {
            name.strip_prefix(prefix)
                .filter(|rest| !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()))
                .and_then(|rest| rest.parse::<usize>().ok())
        };
        if let Some(i) = indexed("pre") {
            VarId::Pre(i)
        } else if let Some(i) = indexed("post") {
            VarId::Post(i)
        } else {
            VarId::param(name)
        }
    }
}

/// Total assignment of integers to variables.
pub type Model = BTreeMap<VarId, BigInt>;

/// Simultaneous substitution.
pub type Subst = BTreeMap<VarId, Term>;

/// A product of variables, kept sorted. The empty monomial is the constant 1.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Monomial(Vec<VarId>);

impl Monomial {
    pub fn unit() -> Self {
        Monomial(Vec::new())
    }

    pub fn var(v: VarId) -> Self {
        Monomial(vec![v])
    }

    pub fn vars(&self) -> &[VarId] {
        &self.0
    }

    pub fn degree(&self) -> usize {
        self.0.len()
    }

    pub fn is_unit(&self) -> bool {
        self.0.is_empty()
    }

    fn times(&self, other: &Monomial) -> Monomial {
        let mut vs = self.0.clone();
        vs.extend(other.0.iter().cloned());
        vs.sort();
        Monomial(vs)
    }
}

/// An integer polynomial in canonical sum-of-products form.
///
/// Coefficients are arbitrary precision and never zero, so two terms are
/// equal iff they denote the same polynomial.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Term {
    coeffs: BTreeMap<Monomial, BigInt>,
}

impl Term {
    pub fn zero() -> Self {
        Term::default()
    }

    pub fn constant(c: impl Into<BigInt>) -> Self {
        let c = c.into();
        let mut coeffs = BTreeMap::new();
        if !c.is_zero() {
            coeffs.insert(Monomial::unit(), c);
        }
        Term { coeffs }
    }

    pub fn var(v: VarId) -> Self {
        let mut coeffs = BTreeMap::new();
        coeffs.insert(Monomial::var(v), BigInt::one());
        Term { coeffs }
    }

    pub fn pre(i: usize) -> Self {
        Term::var(VarId::Pre(i))
    }

    pub fn post(i: usize) -> Self {
        Term::var(VarId::Post(i))
    }

    pub fn param(name: &str) -> Self {
        Term::var(VarId::param(name))
    }

    pub fn monomials(&self) -> impl Iterator<Item = (&Monomial, &BigInt)> {
        self.coeffs.iter()
    }

    fn add_monomial(&mut self, m: Monomial, c: BigInt) {
        if c.is_zero() {
            return;
        }
        let entry = self.coeffs.entry(m).or_insert_with(BigInt::zero);
        *entry += c;
        if entry.is_zero() {
            self.coeffs.retain(|_, c| !c.is_zero());
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// The value if the term has no variables.
    pub fn as_constant(&self) -> Option<BigInt> {
        match self.coeffs.len() {
            0 => Some(BigInt::zero()),
            1 => self.coeffs.get(&Monomial::unit()).cloned(),
            _ => None,
        }
    }

    pub fn constant_part(&self) -> BigInt {
        self.coeffs
            .get(&Monomial::unit())
            .cloned()
            .unwrap_or_default()
    }

    /// The term without its constant summand.
    pub fn without_constant(&self) -> Term {
        let mut t = self.clone();
        t.coeffs.remove(&Monomial::unit());
        t
    }

    /// Every product has at most one non-constant factor.
    pub fn is_linear(&self) -> bool {
        self.coeffs.keys().all(|m| m.degree() <= 1)
    }

    pub fn vars(&self) -> BTreeSet<VarId> {
        self.coeffs
            .keys()
            .flat_map(|m| m.0.iter().cloned())
            .collect()
    }

    pub fn mentions(&self, v: &VarId) -> bool {
        self.coeffs.keys().any(|m| m.0.contains(v))
    }

    /// Coefficient of `v` if `v` occurs only as the linear monomial `c*v`.
    pub fn linear_coefficient(&self, v: &VarId) -> Option<BigInt> {
        let mut found = None;
        for (m, c) in &self.coeffs {
            if m.0.contains(v) {
                if m.degree() != 1 {
                    return None;
                }
                found = Some(c.clone());
            }
        }
        found
    }

    pub fn scale(&self, k: &BigInt) -> Term {
        if k.is_zero() {
            return Term::zero();
        }
        Term {
            coeffs: self
                .coeffs
                .iter()
                .map(|(m, c)| (m.clone(), c * k))
                .collect(),
        }
    }

    /// gcd of the coefficients of the non-constant monomials (0 if none).
    pub fn content(&self) -> BigInt {
        self.coeffs
            .iter()
            .filter(|(m, _)| !m.is_unit())
            .fold(BigInt::zero(), |g, (_, c)| g.gcd(c))
    }

    /// Exact division of every coefficient by `k`.
    pub(crate) fn div_exact(&self, k: &BigInt) -> Term {
        Term {
            coeffs: self
                .coeffs
                .iter()
                .map(|(m, c)| {
                    debug_assert!((c % k).is_zero());
                    (m.clone(), c / k)
                })
                .collect(),
        }
    }

    /// Sign of the coefficient of the first non-constant monomial.
    pub(crate) fn leading_sign_negative(&self) -> bool {
        self.coeffs
            .iter()
            .find(|(m, _)| !m.is_unit())
            .map(|(_, c)| c.is_negative())
            .unwrap_or(false)
    }

    pub fn substitute(&self, s: &Subst) -> Term {
        if s.is_empty() || self.vars().iter().all(|v| !s.contains_key(v)) {
            return self.clone();
        }
        let mut out = Term::zero();
        for (m, c) in &self.coeffs {
            let mut prod = Term::constant(c.clone());
            for v in &m.0 {
                let factor = s.get(v).cloned().unwrap_or_else(|| Term::var(v.clone()));
                prod = &prod * &factor;
            }
            out = &out + &prod;
        }
        out
    }

    pub fn evaluate(&self, model: &Model) -> Result<BigInt, EvalError> {
        let mut total = BigInt::zero();
        for (m, c) in &self.coeffs {
            let mut prod = c.clone();
            for v in &m.0 {
                let val = model
                    .get(v)
                    .ok_or_else(|| EvalError::Unassigned(v.clone()))?;
                prod *= val;
            }
            total += prod;
        }
        Ok(total)
    }

    /// Evaluation that returns `None` instead of failing on missing variables.
    pub fn try_evaluate(&self, model: &Model) -> Option<BigInt> {
        self.evaluate(model).ok()
    }

    /// Print with a naming function for variables, e.g. `2*x + y - 3`.
    pub fn fmt_with(
        &self,
        f: &mut fmt::Formatter<'_>,
        name: &dyn Fn(&VarId) -> String,
    ) -> fmt::Result {
        if self.coeffs.is_empty() {
            return write!(f, "0");
        }
        // Constant last reads more naturally.
        let mut items: Vec<(&Monomial, &BigInt)> =
            self.coeffs.iter().filter(|(m, _)| !m.is_unit()).collect();
        if let Some(c) = self.coeffs.get_key_value(&Monomial::unit()) {
            items.push(c);
        }
        for (idx, (m, c)) in items.into_iter().enumerate() {
            let neg = c.is_negative();
            let mag = c.abs();
            if idx == 0 {
                if neg {
                    write!(f, "-")?;
                }
            } else if neg {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            if m.is_unit() {
                write!(f, "{mag}")?;
                continue;
            }
            let mut first = true;
            if !mag.is_one() {
                write!(f, "{mag}")?;
                first = false;
            }
            for v in &m.0 {
                if !first {
                    write!(f, "*")?;
                }
                write!(f, "{}", name(v))?;
                first = false;
            }
        }
        Ok(())
    }

    pub fn to_smtlib(&self) -> String {
        fn int(c: &BigInt) -> String {
            if c.is_negative() {
                format!("(- {})", c.abs())
            } else {
                c.to_string()
            }
        }
        let mut summands: Vec<String> = Vec::new();
        for (m, c) in &self.coeffs {
            if m.is_unit() {
                summands.push(int(c));
                continue;
            }
            let mut factors: Vec<String> = Vec::new();
            if !c.is_one() {
                factors.push(int(c));
            }
            factors.extend(m.0.iter().map(VarId::smt_name));
            if factors.len() == 1 {
                summands.push(factors.pop().unwrap());
            } else {
                summands.push(format!("(* {})", factors.join(" ")));
            }
        }
        match summands.len() {
            0 => "0".to_string(),
            1 => summands.pop().unwrap(),
            _ => format!("(+ {})", summands.join(" ")),
        }
    }
}

impl From<i64> for Term {
    fn from(c: i64) -> Self {
        Term::constant(c)
    }
}

impl From<VarId> for Term {
    fn from(v: VarId) -> Self {
        Term::var(v)
    }
}

impl Add for &Term {
    type Output = Term;
    fn add(self, rhs: &Term) -> Term {
        let mut out = self.clone();
        for (m, c) in &rhs.coeffs {
            out.add_monomial(m.clone(), c.clone());
        }
        out
    }
}

impl Sub for &Term {
    type Output = Term;
    fn sub(self, rhs: &Term) -> Term {
        let mut out = self.clone();
        for (m, c) in &rhs.coeffs {
            out.add_monomial(m.clone(), -c);
        }
        out
    }
}

impl Mul for &Term {
    type Output = Term;
    fn mul(self, rhs: &Term) -> Term {
        let mut out = Term::zero();
        for (m1, c1) in &self.coeffs {
            for (m2, c2) in &rhs.coeffs {
                out.add_monomial(m1.times(m2), c1 * c2);
            }
        }
        out
    }
}

impl Neg for &Term {
    type Output = Term;
    fn neg(self) -> Term {
        self.scale(&BigInt::from(-1))
    }
}

macro_rules! owned_binop {
    ($tr:ident, $m:ident) => {
        impl $tr for Term {
            type Output = Term;
            fn $m(self, rhs: Term) -> Term {
                (&self).$m(&rhs)
            }
        }
        impl $tr<&Term> for Term {
            type Output = Term;
            fn $m(self, rhs: &Term) -> Term {
                (&self).$m(rhs)
            }
        }
    };
}
owned_binop!(Add, add);
owned_binop!(Sub, sub);
owned_binop!(Mul, mul);

impl Neg for Term {
    type Output = Term;
    fn neg(self) -> Term {
        -&self
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_with(f, &default_name)
    }
}

/// Names used when no program-variable names are at hand.
pub fn default_name(v: &VarId) -> String {
    match v {
        VarId::Pre(i) => format!("x{i}"),
        VarId::Post(i) => format!("x{i}'"),
        VarId::Param(p) => p.to_string(),
    }
}
