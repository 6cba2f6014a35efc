use candle_core::{DType, Device, Tensor, Var};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;

/// Named trainable variables in registration order.
#[derive(Clone, Debug, Default)]
pub struct ParamStore {
    entries: Vec<(String, Var)>,
}

impl ParamStore {
    pub fn iter(&self) -> impl Iterator<Item = (&str, &Var)> {
        self.entries.iter().map(|(n, v)| (n.as_str(), v))
    }

    pub fn vars(&self) -> Vec<Var> {
        self.entries.iter().map(|(_, v)| v.clone()).collect()
    }

    pub fn get(&self, name: &str) -> Option<&Var> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, v)| v)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total scalar parameter count.
    pub fn num_params(&self) -> usize {
        self.entries.iter().map(|(_, v)| v.elem_count()).sum()
    }

    /// Overwrite every variable whose name satisfies `pred` with zeros.
    pub fn zero_where(&self, pred: impl Fn(&str) -> bool) -> Result<()> {
        for (name, var) in &self.entries {
            if pred(name) {
                var.set(&var.zeros_like()?)?;
            }
        }
        Ok(())
    }

    /// Copy values from `other` for every name present in both stores.
    pub fn copy_from(&self, other: &ParamStore) -> Result<()> {
        for (name, var) in &self.entries {
            if let Some(src) = other.get(name) {
                var.set(src.as_tensor())?;
            }
        }
        Ok(())
    }
}

/// Seeded parameter factory. Candle's CPU RNG cannot be seeded, so all
/// initial values are drawn here from ChaCha8.
pub struct Init {
    store: ParamStore,
    rng: ChaCha8Rng,
    dtype: DType,
    device: Device,
}

impl Init {
    pub fn new(seed: u64, dtype: DType) -> Self {
        Self {
            store: ParamStore::default(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            dtype,
            device: Device::Cpu,
        }
    }

    pub fn dtype(&self) -> DType {
        self.dtype
    }

    pub fn root(&mut self) -> Scope<'_> {
        Scope {
            init: self,
            prefix: String::new(),
        }
    }

    pub fn finish(self) -> ParamStore {
        self.store
    }

    fn register(&mut self, name: String, values: Vec<f64>, shape: &[usize]) -> Result<Tensor> {
        let t = Tensor::from_vec(values, shape, &self.device)?.to_dtype(self.dtype)?;
        let var = Var::from_tensor(&t)?;
        let out = var.as_tensor().clone();
        self.store.entries.push((name, var));
        Ok(out)
    }
}

/// A name prefix within an [`Init`].
pub struct Scope<'a> {
    init: &'a mut Init,
    prefix: String,
}

impl Scope<'_> {
    pub fn pp(&mut self, name: &str) -> Scope<'_> {
        let prefix = if self.prefix.is_empty() {
            name.to_string()
        } else {
            format!("{}.{name}", self.prefix)
        };
        Scope {
            init: &mut *self.init,
            prefix,
        }
    }

    fn full(&self, name: &str) -> String {
        if self.prefix.is_empty() {
            name.to_string()
        } else {
            format!("{}.{name}", self.prefix)
        }
    }

    pub fn uniform(&mut self, name: &str, shape: &[usize], bound: f64) -> Result<Tensor> {
        let n: usize = shape.iter().product();
        let values = (0..n)
            .map(|_| self.init.rng.random_range(-bound..=bound))
            .collect();
        let full = self.full(name);
        self.init.register(full, values, shape)
    }

    pub fn constant(&mut self, name: &str, shape: &[usize], value: f64) -> Result<Tensor> {
        let n: usize = shape.iter().product();
        let full = self.full(name);
        self.init.register(full, vec![value; n], shape)
    }

    pub fn zeros(&mut self, name: &str, shape: &[usize]) -> Result<Tensor> {
        self.constant(name, shape, 0.0)
    }
}
