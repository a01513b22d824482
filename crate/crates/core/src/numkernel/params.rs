//! Named parameter store with gradient accumulators, and the text
//! checkpoint container.
//!
//! Checkpoint layout (UTF-8, `\n` line endings):
//!
//! ```text
//! refsel-params 1
//! count <n>
//! param <name> <rows> <cols>
//! <cols values of row 0, space separated>
//! ...
//! <cols values of row rows-1>
//! (next param ...)
//! ```
//!
//! Values are written in scientific notation with 17 significant digits
//! (`{:.16e}`), which round-trips every finite `f64` bit-exactly.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;

use super::Tensor2;
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &str = "refsel-params 1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

#[derive(Debug, Clone, PartialEq)]
struct Param {
    name: String,
    value: Tensor2,
    grad: Tensor2,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Param>,
    index: HashMap<String, ParamId>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor2) -> Result<ParamId> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(Error::Invalid(format!("duplicate parameter name {name}")));
        }
        let id = ParamId(self.params.len());
        let grad = Tensor2::zeros(value.rows(), value.cols());
        self.index.insert(name.clone(), id);
        self.params.push(Param { name, value, grad });
        Ok(id)
    }

    /// Uniform in `[-a, a]` with `a = sqrt(6 / (rows + cols))`.
    pub fn add_glorot<R: Rng>(
        &mut self,
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        rng: &mut R,
    ) -> Result<ParamId> {
        let a = (6.0 / (rows + cols) as f64).sqrt();
        let data = (0..rows * cols).map(|_| rng.random_range(-a..=a)).collect();
        self.add(name, Tensor2::new(rows, cols, data)?)
    }

    pub fn add_zeros(&mut self, name: impl Into<String>, rows: usize, cols: usize) -> Result<ParamId> {
        self.add(name, Tensor2::zeros(rows, cols))
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.params[id.0].name
    }

    pub fn value(&self, id: ParamId) -> &Tensor2 {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor2 {
        &mut self.params[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> &Tensor2 {
        &self.params[id.0].grad
    }

    pub fn get(&self, name: &str) -> Option<&Tensor2> {
        self.id(name).map(|id| self.value(id))
    }

    pub fn set_value(&mut self, id: ParamId, value: Tensor2) -> Result<()> {
        let current = self.value(id);
        if current.shape() != value.shape() {
            return Err(Error::Shape(format!(
                "parameter {} is {:?}, got {:?}",
                self.name(id),
                current.shape(),
                value.shape()
            )));
        }
        self.params[id.0].value = value;
        Ok(())
    }

    pub(crate) fn accumulate_grad(&mut self, id: ParamId, g: &Tensor2) {
        self.params[id.0].grad.add_assign(g);
    }

    #[cfg(test)]
    pub(crate) fn grad_mut(&mut self, id: ParamId) -> &mut Tensor2 {
        &mut self.params[id.0].grad
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad.fill(0.0);
        }
    }

    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.data().len()).sum()
    }

    pub fn grad_norm(&self) -> f64 {
        self.params.iter().map(|p| p.grad.sq_norm()).sum::<f64>().sqrt()
    }

    pub fn to_checkpoint_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{CHECKPOINT_MAGIC}");
        let _ = writeln!(out, "count {}", self.params.len());
        for p in &self.params {
            let _ = writeln!(out, "param {} {} {}", p.name, p.value.rows(), p.value.cols());
            for r in 0..p.value.rows() {
                let line: Vec<String> = p.value.row(r).iter().map(|v| format!("{v:.16e}")).collect();
                let _ = writeln!(out, "{}", line.join(" "));
            }
        }
        out
    }

    pub fn from_checkpoint_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let mut next = |what: &str| {
            lines.next().ok_or_else(|| Error::Malformed {
                line: 0,
                message: format!("unexpected end of checkpoint, expected {what}"),
            })
        };
        let (_, magic) = next("header")?;
        if magic != CHECKPOINT_MAGIC {
            return Err(Error::Malformed {
                line: 1,
                message: format!("bad checkpoint header {magic:?}"),
            });
        }
        let (ln, count_line) = next("count")?;
        let count: usize = count_line
            .strip_prefix("count ")
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Malformed {
                line: ln + 1,
                message: "expected `count <n>`".into(),
            })?;
        let mut store = ParamStore::new();
        for _ in 0..count {
            let (ln, head) = next("param header")?;
            let parts: Vec<&str> = head.split(' ').collect();
            let malformed = |m: &str| Error::Malformed {
                line: ln + 1,
                message: m.to_string(),
            };
            if parts.len() != 4 || parts[0] != "param" {
                return Err(malformed("expected `param <name> <rows> <cols>`"));
            }
            let rows: usize = parts[2].parse().map_err(|_| malformed("bad row count"))?;
            let cols: usize = parts[3].parse().map_err(|_| malformed("bad column count"))?;
            let mut data = Vec::with_capacity(rows * cols);
            for _ in 0..rows {
                let (ln, row) = next("values")?;
                let before = data.len();
                for tok in row.split(' ') {
                    let v: f64 = tok.parse().map_err(|_| Error::Malformed {
                        line: ln + 1,
                        message: format!("bad value {tok:?}"),
                    })?;
                    data.push(v);
                }
                if data.len() - before != cols {
                    return Err(Error::Malformed {
                        line: ln + 1,
                        message: format!("expected {cols} values"),
                    });
                }
            }
            store.add(parts[1], Tensor2::new(rows, cols, data)?)?;
        }
        Ok(store)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_checkpoint_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_checkpoint_text(&text)
    }

    /// Copies values from `other` for every parameter present in both, by name.
    pub fn copy_values_from(&mut self, other: &ParamStore) -> Result<()> {
        for id in self.ids().collect::<Vec<_>>() {
            if let Some(src) = other.get(self.name(id)) {
                self.set_value(id, src.clone())?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn glorot_bounds_and_duplicates() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut store = ParamStore::new();
        let id = store.add_glorot("w", 4, 2, &mut rng).unwrap();
        let a = (6.0f64 / 6.0).sqrt();
        assert!(store.value(id).data().iter().all(|v| v.abs() <= a));
        assert!(store.add_zeros("w", 1, 1).is_err());
        assert_eq!(store.grad(id).shape(), (4, 2));
    }

    #[test]
    fn malformed_checkpoint_rejected() {
        assert!(ParamStore::from_checkpoint_text("nope\n").is_err());
        let text = "refsel-params 1\ncount 1\nparam w 1 2\n1.0\n";
        assert!(matches!(
            ParamStore::from_checkpoint_text(text),
            Err(Error::Malformed { line: 4, .. })
        ));
    }

    proptest! {
        #[test]
        fn checkpoint_round_trip_is_bit_exact(
            values in prop::collection::vec(-1e300f64..1e300, 6),
            tiny in prop::collection::vec(-1e-300f64..1e-300, 3),
        ) {
            let mut store = ParamStore::new();
            store.add("a.w", Tensor2::new(2, 3, values).unwrap()).unwrap();
            store.add("b", Tensor2::new(3, 1, tiny).unwrap()).unwrap();
            let back = ParamStore::from_checkpoint_text(&store.to_checkpoint_text()).unwrap();
            for id in store.ids() {
                let a: Vec<u64> = store.value(id).data().iter().map(|v| v.to_bits()).collect();
                let b: Vec<u64> = back.value(id).data().iter().map(|v| v.to_bits()).collect();
                prop_assert_eq!(a, b);
                prop_assert_eq!(store.name(id), back.name(id));
            }
        }
    }
}
