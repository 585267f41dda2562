//! JSON encoding: `{"n": int, "terms": [{"k": [...], "re": x, "im": y}]}`.
//!
//! Float fields write numbers; exact fields write `"p/q"` strings. Readers
//! accept both.

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::scalar::{Coeff, RealCoeff};

use super::{ActionPolynomial, Polynomial};

fn terms_to_json<'a, C: Coeff>(terms: impl Iterator<Item = (Vec<u32>, &'a C)>) -> Vec<Value> {
    terms
        .map(|(k, c)| {
            let (re, im) = c.to_json_parts();
            let mut obj = Map::new();
            obj.insert("k".into(), json!(k));
            obj.insert("re".into(), re);
            obj.insert("im".into(), im);
            Value::Object(obj)
        })
        .collect()
}

fn parse_terms<C: Coeff>(v: &Value, k_len: usize) -> Result<(usize, Vec<(Vec<u32>, C)>)> {
    let n = v
        .get("n")
        .and_then(Value::as_u64)
        .ok_or_else(|| Error::invalid("polynomial JSON needs an integer field \"n\""))?
        as usize;
    let terms = v
        .get("terms")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::invalid("polynomial JSON needs an array field \"terms\""))?;
    let expected = k_len * n;
    let mut out = Vec::with_capacity(terms.len());
    for t in terms {
        let k: Vec<u32> = t
            .get("k")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::invalid("term without \"k\""))?
            .iter()
            .map(|e| {
                e.as_u64()
                    .and_then(|e| u32::try_from(e).ok())
                    .ok_or_else(|| Error::invalid("exponents must be non-negative integers"))
            })
            .collect::<Result<_>>()?;
        if k.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: k.len(),
            });
        }
        let null = Value::Null;
        let re = t.get("re").unwrap_or(&null);
        let im = t.get("im").unwrap_or(&null);
        let c = C::from_json_parts(re, im).ok_or_else(|| {
            Error::invalid(format!("bad coefficient for k = {k:?} in this field"))
        })?;
        out.push((k, c));
    }
    Ok((n, out))
}

impl<C: Coeff> Polynomial<C> {
    pub fn to_json(&self) -> Value {
        json!({
            "n": self.n,
            "terms": terms_to_json(self.terms.iter().map(|(k, c)| (k.to_vec(), c))),
        })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let (n, terms) = parse_terms(v, 2)?;
        Self::from_terms(n, terms)
    }
}

impl<R: RealCoeff> ActionPolynomial<R> {
    /// Same layout as [`Polynomial::to_json`] with `k` of length `n`.
    pub fn to_json(&self) -> Value {
        json!({
            "n": self.dimension(),
            "terms": terms_to_json(self.terms().map(|(k, c)| (k.to_vec(), c))),
        })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let (n, terms) = parse_terms(v, 1)?;
        Self::from_terms(n, terms)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{Complex64, GaussRational, Rational};

    #[test]
    fn float_round_trip() {
        let f = Polynomial::from_terms(2, vec![(vec![3, 0, 0, 0], 0.25), (vec![0, 1, 1, 1], -1.5e-3)]).unwrap();
        let v = f.to_json();
        assert_eq!(v["terms"][1]["k"], json!([3, 0, 0, 0]));
        assert_eq!(Polynomial::<f64>::from_json(&v).unwrap(), f);
    }

    #[test]
    fn exact_round_trip() {
        let f = Polynomial::from_terms(1, vec![(vec![2, 1], Rational::from_ratio(-7, 3))]).unwrap();
        let v = f.to_json();
        assert_eq!(v["terms"][0]["re"], json!("-7/3"));
        assert_eq!(Polynomial::<Rational>::from_json(&v).unwrap(), f);

        let g = Polynomial::from_terms(
            1,
            vec![(vec![1, 1], GaussRational::new(Rational::from_ratio(1, 2), Rational::from_ratio(3, 1)))],
        )
        .unwrap();
        assert_eq!(Polynomial::<GaussRational>::from_json(&g.to_json()).unwrap(), g);
    }

    #[test]
    fn complex_and_action() {
        let f = Polynomial::from_terms(1, vec![(vec![1, 2], Complex64::new(0.5, -2.0))]).unwrap();
        assert_eq!(Polynomial::<Complex64>::from_json(&f.to_json()).unwrap(), f);

        let h = ActionPolynomial::from_terms(2, vec![(vec![1, 0], 1.0), (vec![1, 1], 0.5)]).unwrap();
        assert_eq!(ActionPolynomial::<f64>::from_json(&h.to_json()).unwrap(), h);
    }

    #[test]
    fn rejects_bad_input() {
        let v = json!({"n": 1, "terms": [{"k": [1, 0, 0], "re": 1.0}]});
        assert!(matches!(Polynomial::<f64>::from_json(&v), Err(Error::DimensionMismatch { .. })));
        let v = json!({"n": 1, "terms": [{"k": [1, 0], "re": 1.0, "im": 2.0}]});
        assert!(Polynomial::<f64>::from_json(&v).is_err());
        assert!(Polynomial::<f64>::from_json(&json!({"terms": []})).is_err());
    }
}
