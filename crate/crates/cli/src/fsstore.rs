//! Disk-backed content-addressed store: two-level fan-out directories keyed
//! by digest prefix, one file per blob, write-then-rename so concurrent puts
//! of identical content are safe. Every read is re-verified against the
//! requested index.

use std::fs;
use std::io::Write;
#[cfg(test)]
use std::path::Path;
use std::path::PathBuf;

use mudmarket_core::offstore::{digest, MudStore, StoreError, StoreIndex};

pub struct FsStore {
    root: PathBuf,
}

fn io_err(e: std::io::Error) -> StoreError {
    StoreError::Io(e.to_string())
}

impl FsStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(io_err)?;
        Ok(Self { root })
    }

    #[cfg(test)]
    pub fn root(&self) -> &Path {
        &self.root
    }

    fn blob_path(&self, index: &StoreIndex) -> PathBuf {
        let hex = index.to_string();
        self.root.join(&hex[0..2]).join(&hex[2..4]).join(hex)
    }
}

impl MudStore for FsStore {
    fn put(&mut self, content: &[u8]) -> Result<StoreIndex, StoreError> {
        if content.is_empty() {
            return Err(StoreError::EmptyContent);
        }
        let index = digest(content);
        let path = self.blob_path(&index);
        if path.exists() {
            return Ok(index);
        }
        let parent = path.parent().expect("blob path has a parent");
        fs::create_dir_all(parent).map_err(io_err)?;
        let tmp = parent.join(format!(".tmp-{index}"));
        {
            let mut file = fs::File::create(&tmp).map_err(io_err)?;
            file.write_all(content).map_err(io_err)?;
            file.sync_all().map_err(io_err)?;
        }
        fs::rename(&tmp, &path).map_err(io_err)?;
        Ok(index)
    }

    fn get(&self, index: &StoreIndex) -> Result<Vec<u8>, StoreError> {
        let path = self.blob_path(index);
        let content = match fs::read(&path) {
            Ok(content) => content,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(StoreError::NotFound(*index))
            }
            Err(e) => return Err(io_err(e)),
        };
        let actual = digest(&content);
        if actual != *index {
            return Err(StoreError::Corrupt {
                index: *index,
                actual,
            });
        }
        Ok(content)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store() -> (tempfile::TempDir, FsStore) {
        let dir = tempfile::tempdir().unwrap();
        let store = FsStore::open(dir.path().join("blobs")).unwrap();
        (dir, store)
    }

    #[test]
    fn round_trip_and_fan_out_layout() {
        let (_dir, mut store) = store();
        let index = store.put(b"mud file body").unwrap();
        assert_eq!(store.get(&index).unwrap(), b"mud file body");
        let hex = index.to_string();
        let expected = store.root().join(&hex[0..2]).join(&hex[2..4]).join(&hex);
        assert!(expected.is_file());
    }

    #[test]
    fn put_is_idempotent_on_disk() {
        let (_dir, mut store) = store();
        let a = store.put(b"same bytes").unwrap();
        let b = store.put(b"same bytes").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn unknown_index_is_not_found() {
        let (_dir, store) = store();
        let index = digest(b"never stored");
        assert!(matches!(store.get(&index), Err(StoreError::NotFound(_))));
    }

    #[test]
    fn corrupted_blob_is_an_integrity_error_never_silent() {
        let (_dir, mut store) = store();
        let index = store.put(b"authentic content").unwrap();
        let path = store.blob_path(&index);
        fs::write(&path, b"tampered content!").unwrap();
        match store.get(&index) {
            Err(StoreError::Corrupt { index: i, actual }) => {
                assert_eq!(i, index);
                assert_eq!(actual, digest(b"tampered content!"));
            }
            other => panic!("expected corruption error, got {other:?}"),
        }
    }

    #[test]
    fn empty_content_is_rejected() {
        let (_dir, mut store) = store();
        assert_eq!(store.put(b""), Err(StoreError::EmptyContent));
    }
}
