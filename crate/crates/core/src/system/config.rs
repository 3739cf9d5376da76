//! TOML config format for [`SystemSpec`].
//!
//! ```toml
//! label = "sir-age"
//! state_dim = 3
//! space_dim = 1
//!
//! [domain]
//! lo = [0.0]
//! hi = [1.0]
//!
//! # one table per A_i; entries[row][col] is a coefficient list in total-degree order
//! [[a]]
//! entries = [[[1.0], [0.0], [0.0]], [[0.0], [1.0], [0.0]], [[0.0], [0.0], [1.0]]]
//!
//! [b2]            # optional; b1, b2, b3 default to zero
//! entries = [...]
//! t_rate = [...]  # optional: B(t, x) = entries(x) + t * t_rate(x)
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::domain::Domain;
use super::poly::{Poly, PolyMatrix};
use super::spec::{CoefField, SystemSpec};
use crate::{Error, Result};

/// Nested coefficient lists: `[row][col][monomial]`.
pub type RawMatrix = Vec<Vec<Vec<f64>>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub label: String,
    pub state_dim: usize,
    pub space_dim: usize,
    pub domain: DomainConfig,
    pub a: Vec<MatrixConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b1: Option<FieldConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b2: Option<FieldConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b3: Option<FieldConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixConfig {
    pub entries: RawMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    pub entries: RawMatrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_rate: Option<RawMatrix>,
}

fn matrix_from_raw(raw: &RawMatrix, n: usize, dim: usize, what: &str) -> Result<PolyMatrix> {
    if raw.len() != n || raw.iter().any(|row| row.len() != n) {
        return Err(Error::Config(format!("{what}: expected a {n}x{n} matrix of coefficient lists")));
    }
    let entries = raw
        .iter()
        .flatten()
        .map(|c| Poly::new(dim, c.clone()))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| Error::Config(format!("{what}: {e}")))?;
    PolyMatrix::new(n, n, entries)
}

fn matrix_to_raw(m: &PolyMatrix) -> RawMatrix {
    (0..m.rows())
        .map(|i| (0..m.cols()).map(|j| m.entry(i, j).coeffs().to_vec()).collect())
        .collect()
}

fn field_from_config(f: Option<&FieldConfig>, n: usize, dim: usize, what: &str) -> Result<CoefField> {
    let Some(f) = f else {
        return Ok(CoefField::zeros(dim, n));
    };
    let t_rate = f.t_rate.as_ref().map(|r| matrix_from_raw(r, n, dim, what)).transpose()?;
    Ok(CoefField {
        base: matrix_from_raw(&f.entries, n, dim, what)?,
        t_rate,
    })
}

fn field_to_config(f: &CoefField) -> Option<FieldConfig> {
    if f.is_zero() {
        return None;
    }
    Some(FieldConfig {
        entries: matrix_to_raw(&f.base),
        t_rate: f.t_rate.as_ref().map(matrix_to_raw),
    })
}

impl SystemConfig {
    pub fn from_spec(spec: &SystemSpec) -> Self {
        Self {
            label: spec.label.clone(),
            state_dim: spec.state_dim,
            space_dim: spec.space_dim(),
            domain: DomainConfig {
                lo: spec.domain.lo().to_vec(),
                hi: spec.domain.hi().to_vec(),
            },
            a: spec.a.iter().map(|m| MatrixConfig { entries: matrix_to_raw(m) }).collect(),
            b1: field_to_config(&spec.b1),
            b2: field_to_config(&spec.b2),
            b3: field_to_config(&spec.b3),
        }
    }

    pub fn to_spec(&self) -> Result<SystemSpec> {
        let (n, dim) = (self.state_dim, self.space_dim);
        if !(1..=2).contains(&dim) {
            return Err(Error::Config(format!("space_dim must be 1 or 2, got {dim}")));
        }
        if n == 0 {
            return Err(Error::Config("state_dim must be positive".into()));
        }
        if self.domain.lo.len() != dim || self.domain.hi.len() != dim {
            return Err(Error::Config(format!("domain bounds must have {dim} entries")));
        }
        if self.a.len() != dim {
            return Err(Error::Config(format!("expected {dim} [[a]] tables, found {}", self.a.len())));
        }
        let domain = Domain::new(self.domain.lo.clone(), self.domain.hi.clone()).map_err(|e| Error::Config(e.to_string()))?;
        let a = self
            .a
            .iter()
            .enumerate()
            .map(|(i, m)| matrix_from_raw(&m.entries, n, dim, &format!("a[{i}]")))
            .collect::<Result<Vec<_>>>()?;
        let b1 = field_from_config(self.b1.as_ref(), n, dim, "b1")?;
        let b2 = field_from_config(self.b2.as_ref(), n, dim, "b2")?;
        let b3 = field_from_config(self.b3.as_ref(), n, dim, "b3")?;
        SystemSpec::new(self.label.clone(), domain, a, b1, b2, b3).map_err(|e| match e {
            Error::Config(_) => e,
            other => Error::Config(other.to_string()),
        })
    }
}

/// Parses a system config; TOML diagnostics include line and key.
pub fn parse_system(text: &str) -> Result<SystemSpec> {
    let cfg: SystemConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    cfg.to_spec()
}

pub fn load_system(path: &Path) -> Result<SystemSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_system(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

pub fn to_toml(spec: &SystemSpec) -> String {
    toml::to_string(&SystemConfig::from_spec(spec)).expect("system config always serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::registry;

    #[test]
    fn registry_roundtrip_is_exact() {
        for spec in registry::all() {
            let text = to_toml(&spec);
            let back = parse_system(&text).unwrap();
            assert_eq!(back, spec, "{}", spec.label);
            assert_eq!(to_toml(&back), text);
        }
    }

    #[test]
    fn unknown_key_rejected() {
        let text = "label = \"x\"\nstate_dim = 1\nspace_dim = 1\nspeed = 3.0\n\
                    [domain]\nlo = [0.0]\nhi = [1.0]\n[[a]]\nentries = [[[1.0]]]\n";
        let err = parse_system(text).unwrap_err().to_string();
        assert!(err.contains("speed"), "{err}");
    }

    #[test]
    fn parse_error_names_line() {
        let text = "label = \"x\"\nstate_dim = \n";
        let err = parse_system(text).unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
    }

    #[test]
    fn wrong_matrix_shape_rejected() {
        let text = "label = \"x\"\nstate_dim = 2\nspace_dim = 1\n\
                    [domain]\nlo = [0.0]\nhi = [1.0]\n[[a]]\nentries = [[[1.0]]]\n";
        assert!(matches!(parse_system(text), Err(Error::Config(_))));
    }

    #[test]
    fn awkward_floats_survive() {
        let mut spec = registry::scalar_transport(&[1.0]);
        let c = 0.1 + 0.2;
        spec.a[0] = PolyMatrix::new(1, 1, vec![Poly::new(1, vec![c, 1e-300, -7.0 / 3.0]).unwrap()]).unwrap();
        let back = parse_system(&to_toml(&spec)).unwrap();
        assert_eq!(back.a[0].entry(0, 0).coeffs(), &[c, 1e-300, -7.0 / 3.0]);
    }
}
