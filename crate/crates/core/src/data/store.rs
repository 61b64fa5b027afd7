//! Read-only access to gridded forecast and reanalysis fields.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use super::grid::GridField;
use crate::error::{Error, Result};
use crate::time::TimeStamp;

/// Identifies one stored field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FieldKey {
    Forecast { init: TimeStamp, forecast_hour: u32 },
    Reanalysis { valid: TimeStamp },
}

impl FieldKey {
    pub fn valid_time(&self) -> TimeStamp {
        match *self {
            FieldKey::Forecast { init, forecast_hour } => init.add_hours(i64::from(forecast_hour)),
            FieldKey::Reanalysis { valid } => valid,
        }
    }

    /// File name used by [`DirStore`].
    pub fn file_name(&self) -> String {
        match self {
            FieldKey::Forecast { init, forecast_hour } => {
                format!("gfs_{}_f{forecast_hour:03}.grid", init.compact())
            }
            FieldKey::Reanalysis { valid } => format!("era5_{}.grid", valid.compact()),
        }
    }
}

/// `Ok(None)` means the field is absent; errors are reserved for fields that
/// exist but cannot be read.
pub trait FieldStore: Sync {
    fn load(&self, key: &FieldKey) -> Result<Option<Arc<GridField>>>;
}

#[derive(Debug, Default, Clone)]
pub struct MemoryStore {
    fields: HashMap<FieldKey, Arc<GridField>>,
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, key: FieldKey, field: GridField) {
        self.fields.insert(key, Arc::new(field));
    }

    pub fn remove(&mut self, key: &FieldKey) -> Option<Arc<GridField>> {
        self.fields.remove(key)
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    /// Keys in sorted order.
    pub fn keys(&self) -> Vec<FieldKey> {
        let mut k: Vec<_> = self.fields.keys().copied().collect();
        k.sort();
        k
    }
}

impl FieldStore for MemoryStore {
    fn load(&self, key: &FieldKey) -> Result<Option<Arc<GridField>>> {
        Ok(self.fields.get(key).cloned())
    }
}

/// One field file per key inside a directory.
#[derive(Debug, Clone)]
pub struct DirStore {
    root: PathBuf,
}

impl DirStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        DirStore { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path_for(&self, key: &FieldKey) -> PathBuf {
        self.root.join(key.file_name())
    }

    pub fn write(&self, key: &FieldKey, field: &GridField) -> Result<()> {
        std::fs::create_dir_all(&self.root).map_err(|e| Error::io(&self.root, e))?;
        field.write(&self.path_for(key))
    }
}

impl FieldStore for DirStore {
    fn load(&self, key: &FieldKey) -> Result<Option<Arc<GridField>>> {
        let path = self.path_for(key);
        match std::fs::read(&path) {
            Ok(bytes) => {
                let f = GridField::from_bytes(&bytes, &path)?;
                if f.valid_time != key.valid_time() {
                    return Err(Error::Corrupt {
                        path,
                        message: format!("valid time {} does not match file name", f.valid_time),
                    });
                }
                Ok(Some(Arc::new(f)))
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(Error::io(path, e)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::grid::GridSpec;

    #[test]
    fn dir_store_round_trip_and_absence() {
        let dir = tempfile::tempdir().unwrap();
        let store = DirStore::new(dir.path());
        let spec = GridSpec::new(0.0, 2.0, 0.0, 2.0, 1.0).unwrap();
        let init = TimeStamp::from_ymdh(2020, 1, 1, 6).unwrap();
        let key = FieldKey::Forecast {
            init,
            forecast_hour: 7,
        };
        assert_eq!(key.file_name(), "gfs_2020010106_f007.grid");
        let f = GridField::new(spec, init, init.add_hours(7), vec![1.5; 9], vec![-2.0; 9]).unwrap();
        store.write(&key, &f).unwrap();
        assert_eq!(*store.load(&key).unwrap().unwrap(), f);
        let other = FieldKey::Reanalysis { valid: init };
        assert!(store.load(&other).unwrap().is_none());
        // a field stored under the wrong name is rejected
        std::fs::copy(store.path_for(&key), store.path_for(&other)).unwrap();
        assert!(matches!(store.load(&other), Err(Error::Corrupt { .. })));
    }
}
