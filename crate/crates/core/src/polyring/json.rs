use num::Zero;
use serde::{Deserialize, Serialize};

use super::{format_rational, parse_rational, Coeff, Field, Poly, PolyError, PolySystem};

/// Version tag written into every file format.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermJson {
    pub exp: Vec<u32>,
    pub re: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<String>,
}

/// `{"n": 2, "field": "real", "terms": [{"exp": [2, 0], "re": "1/1"}, …]}`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolyJson {
    pub n: usize,
    pub field: Field,
    pub terms: Vec<TermJson>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemJson {
    #[serde(default = "default_version")]
    pub format_version: u32,
    pub polys: Vec<PolyJson>,
    pub degrees: Vec<u32>,
}

fn default_version() -> u32 {
    FORMAT_VERSION
}

impl PolyJson {
    pub fn from_poly(p: &Poly) -> Self {
        let terms = p
            .terms()
            .map(|(e, c)| TermJson {
                exp: e.to_vec(),
                re: format_rational(&c.re),
                im: match p.field() {
                    Field::Complex => Some(format_rational(&c.im)),
                    Field::Real => None,
                },
            })
            .collect();
        PolyJson { n: p.n(), field: p.field(), terms }
    }

    pub fn to_poly(&self) -> Result<Poly, PolyError> {
        let mut terms = Vec::with_capacity(self.terms.len());
        for t in &self.terms {
            let re = parse_rational(&t.re)?;
            let im = match &t.im {
                Some(s) => parse_rational(s)?,
                None => num::BigRational::zero(),
            };
            terms.push((t.exp.clone(), Coeff::new(re, im)));
        }
        Poly::from_terms(self.n, self.field, terms)
    }
}

impl SystemJson {
    pub fn from_system(s: &PolySystem) -> Self {
        SystemJson {
            format_version: FORMAT_VERSION,
            polys: s.polys().iter().map(PolyJson::from_poly).collect(),
            degrees: s.degrees().to_vec(),
        }
    }

    /// Decodes and checks that the declared degree tuple matches the polynomials.
    pub fn to_system(&self) -> Result<PolySystem, PolyError> {
        if self.format_version != FORMAT_VERSION {
            return Err(PolyError::Version(self.format_version));
        }
        let polys: Result<Vec<Poly>, _> = self.polys.iter().map(PolyJson::to_poly).collect();
        let sys = PolySystem::new(polys?)?;
        let mut declared = self.degrees.clone();
        declared.sort_by(|a, b| b.cmp(a));
        if declared != sys.degrees() {
            return Err(PolyError::DegreeMismatch { declared: self.degrees.clone(), actual: sys.degrees().to_vec() });
        }
        Ok(sys)
    }

    pub fn from_str(s: &str) -> Result<PolySystem, PolyError> {
        let parsed: SystemJson = serde_json::from_str(s).map_err(|e| PolyError::Json(e.to_string()))?;
        parsed.to_system()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poly_json_shape() {
        let f = Poly::parse_auto("x^2 - 1/2*y", 2, Field::Real).unwrap();
        let j = serde_json::to_value(PolyJson::from_poly(&f)).unwrap();
        assert_eq!(
            j,
            serde_json::json!({
                "n": 2, "field": "real",
                "terms": [{"exp": [0, 1], "re": "-1/2"}, {"exp": [2, 0], "re": "1/1"}]
            })
        );
    }

    #[test]
    fn complex_terms_carry_imaginary_part() {
        let f = Poly::parse_auto("i*x + 3", 1, Field::Complex).unwrap();
        let j = PolyJson::from_poly(&f);
        assert_eq!(j.terms[1].im.as_deref(), Some("1/1"));
        assert_eq!(j.to_poly().unwrap(), f);
    }

    #[test]
    fn degree_tuple_is_validated() {
        let s = PolySystem::parse(&["x^2 + y", "x - y"], 2, Field::Real).unwrap();
        let mut j = s.to_json();
        assert_eq!(j.to_system().unwrap(), s);
        j.degrees = vec![3, 1];
        assert!(matches!(j.to_system(), Err(PolyError::DegreeMismatch { .. })));
        let mut j = s.to_json();
        j.format_version = 2;
        assert_eq!(j.to_system(), Err(PolyError::Version(2)));
    }

    #[test]
    fn reads_integer_shorthand() {
        let src = r#"{"polys":[{"n":1,"field":"real","terms":[{"exp":[2],"re":"1"},{"exp":[0],"re":"-4"}]}],"degrees":[2]}"#;
        let s = SystemJson::from_str(src).unwrap();
        assert_eq!(s.polys()[0], Poly::parse_auto("x^2 - 4", 1, Field::Real).unwrap());
    }
}
