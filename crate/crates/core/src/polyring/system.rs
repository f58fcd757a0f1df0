use sha2::{Digest, Sha256};

use super::{Field, NumericSystem, Poly, PolyError, SystemJson};

/// A system `(f₁, …, f_p)` with its degree tuple sorted non-increasingly.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PolySystem {
    polys: Vec<Poly>,
    degrees: Vec<u32>,
    n: usize,
    field: Field,
}

impl PolySystem {
    /// Builds a system, sorting the equations by non-increasing degree (stable).
    pub fn new(polys: Vec<Poly>) -> Result<Self, PolyError> {
        let first = polys.first().ok_or(PolyError::EmptySystem)?;
        let n = first.n();
        let field = if polys.iter().any(|p| p.field() == Field::Complex) {
            Field::Complex
        } else {
            Field::Real
        };
        let mut tagged = Vec::with_capacity(polys.len());
        for (i, p) in polys.into_iter().enumerate() {
            if p.n() != n {
                return Err(PolyError::DimensionMismatch { expected: n, got: p.n() });
            }
            let d = match p.degree().finite() {
                Some(d) if d >= 1 => d,
                _ => return Err(PolyError::ConstantInSystem(i)),
            };
            tagged.push((d, p));
        }
        tagged.sort_by(|a, b| b.0.cmp(&a.0));
        let degrees = tagged.iter().map(|(d, _)| *d).collect();
        let polys = tagged
            .into_iter()
            .map(|(_, p)| if field == Field::Complex && p.field() == Field::Real { promote(&p) } else { p })
            .collect();
        Ok(PolySystem { polys, degrees, n, field })
    }

    pub fn single(f: Poly) -> Result<Self, PolyError> {
        PolySystem::new(vec![f])
    }

    /// Parses one expression per equation with default variable names.
    pub fn parse(exprs: &[&str], n: usize, field: Field) -> Result<Self, PolyError> {
        let polys: Result<Vec<Poly>, _> = exprs.iter().map(|e| Poly::parse_auto(e, n, field)).collect();
        PolySystem::new(polys?)
    }

    pub fn polys(&self) -> &[Poly] {
        &self.polys
    }

    pub fn degrees(&self) -> &[u32] {
        &self.degrees
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.polys.len()
    }

    pub fn field(&self) -> Field {
        self.field
    }

    /// `1 ≤ p ≤ n − 1`, required by the complete-intersection checks.
    pub fn check_complete_intersection_shape(&self) -> Result<(), PolyError> {
        if self.p() >= 1 && self.p() < self.n {
            Ok(())
        } else {
            Err(PolyError::NotCompleteIntersectionShape { p: self.p(), n: self.n })
        }
    }

    /// `(Re f₁, Im f₁, Re f₂, …)` in `2n` real variables.
    pub fn realify(&self) -> Result<PolySystem, PolyError> {
        if self.field == Field::Real {
            return Err(PolyError::AlreadyReal);
        }
        let mut out = Vec::with_capacity(2 * self.p());
        for f in &self.polys {
            let (re, im) = f.realify_parts()?;
            out.push(re);
            out.push(im);
        }
        PolySystem::new(out)
    }

    /// The real system that numeric kernels work on: realified when complex.
    pub fn to_real(&self) -> Result<PolySystem, PolyError> {
        match self.field {
            Field::Real => Ok(self.clone()),
            Field::Complex => self.realify(),
        }
    }

    pub fn initial_forms(&self) -> Result<PolySystem, PolyError> {
        let forms: Result<Vec<Poly>, _> = self.polys.iter().map(Poly::initial_form).collect();
        PolySystem::new(forms?)
    }

    /// `ini₀(fᵢ)` for every equation. Fails if some `fᵢ(0) ≠ 0`.
    pub fn initial_forms_at_origin(&self) -> Result<PolySystem, PolyError> {
        let mut forms = Vec::with_capacity(self.p());
        for (i, f) in self.polys.iter().enumerate() {
            let (_, g) = f.initial_form_at_origin();
            if g.homogeneous_degree().unwrap_or(0) == 0 {
                return Err(PolyError::ConstantInSystem(i));
            }
            forms.push(g);
        }
        PolySystem::new(forms)
    }

    pub fn homogenize(&self) -> Result<PolySystem, PolyError> {
        let hs: Result<Vec<Poly>, _> = self.polys.iter().map(Poly::homogenize).collect();
        PolySystem::new(hs?)
    }

    pub fn is_homogeneous(&self) -> bool {
        self.polys.iter().all(Poly::is_homogeneous)
    }

    /// Adds equations (e.g. a sphere constraint) without re-validating degrees of the originals.
    pub fn with_extra(&self, extra: Vec<Poly>) -> Result<PolySystem, PolyError> {
        let mut all = self.polys.clone();
        all.extend(extra);
        PolySystem::new(all)
    }

    pub fn numeric(&self) -> Result<NumericSystem, PolyError> {
        NumericSystem::from_polys(&self.to_real()?.polys)
    }

    pub fn to_json(&self) -> SystemJson {
        SystemJson::from_system(self)
    }

    /// Hex SHA-256 of the canonical JSON encoding (first 16 bytes).
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(&self.to_json()).expect("system json is serializable");
        let digest = Sha256::digest(canonical.as_bytes());
        hex::encode(&digest[..16])
    }
}

fn promote(p: &Poly) -> Poly {
    Poly::from_terms(p.n(), Field::Complex, p.terms().map(|(e, c)| (e.to_vec(), c.clone())))
        .expect("re-tagging preserves validity")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degrees_sorted_non_increasing() {
        let s = PolySystem::parse(&["x + y", "x^3 - z", "y^2"], 3, Field::Real).unwrap();
        assert_eq!(s.degrees(), &[3, 2, 1]);
        assert_eq!(s.polys()[0], Poly::parse_auto("x^3 - z", 3, Field::Real).unwrap());
    }

    #[test]
    fn rejects_constants_and_empty() {
        assert_eq!(PolySystem::new(vec![]), Err(PolyError::EmptySystem));
        assert!(PolySystem::parse(&["3"], 2, Field::Real).is_err());
    }

    #[test]
    fn complete_intersection_shape() {
        let s = PolySystem::parse(&["x", "y"], 2, Field::Real).unwrap();
        assert!(s.check_complete_intersection_shape().is_err());
        let s = PolySystem::parse(&["x"], 2, Field::Real).unwrap();
        assert!(s.check_complete_intersection_shape().is_ok());
    }

    #[test]
    fn realified_system_doubles_shape() {
        let s = PolySystem::parse(&["x^2 + y^2 + z^2"], 3, Field::Complex).unwrap();
        let r = s.realify().unwrap();
        assert_eq!((r.n(), r.p(), r.field()), (6, 2, Field::Real));
        assert_eq!(r.degrees(), &[2, 2]);
    }

    #[test]
    fn hash_is_stable_under_reconstruction() {
        let a = PolySystem::parse(&["x^2 + y^2 - 1"], 2, Field::Real).unwrap();
        let b = PolySystem::parse(&["y^2 - 1 + x^2"], 2, Field::Real).unwrap();
        assert_eq!(a.hash(), b.hash());
    }
}
