//! Disk-backed replay memory split into fixed-size fragments, with a
//! bounded in-memory cache and per-fragment sampling quotas.
//!
//! Directory layout: `manifest.txt` plus one `frag_NNNNNNNN.bin` per sealed
//! fragment. A fragment file is a plain concatenation of fixed-size records
//! (little-endian):
//!
//! ```text
//! obs       obs_len × f32
//! action    u8
//! reward    f32
//! next_obs  obs_len × f32
//! done      u8
//! ```

use std::collections::{HashMap, HashSet, VecDeque};
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agent::Transition;
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayConfig {
    pub capacity: usize,
    pub fragment_len: usize,
    pub cache_fragments: usize,
    pub max_samples_per_fragment: u32,
    pub obs_len: usize,
}

impl Default for ReplayConfig {
    fn default() -> Self {
        Self {
            capacity: 300_000,
            fragment_len: 100,
            cache_fragments: 30,
            max_samples_per_fragment: 200,
            obs_len: crate::OBS_LEN,
        }
    }
}

impl ReplayConfig {
    pub fn validate(&self) -> Result<()> {
        if self.fragment_len == 0 || self.capacity == 0 || !self.capacity.is_multiple_of(self.fragment_len) {
            return Err(Error::Config(format!(
                "replay capacity {} must be a positive multiple of fragment length {}",
                self.capacity, self.fragment_len
            )));
        }
        if self.cache_fragments == 0 || self.max_samples_per_fragment == 0 {
            return Err(Error::Config("replay cache and quota must be >= 1".into()));
        }
        Ok(())
    }

    pub fn record_bytes(&self) -> usize {
        8 * self.obs_len + 6
    }
}

pub fn encode_record(t: &Transition, out: &mut Vec<u8>) {
    for x in &t.obs {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out.push(t.action);
    out.extend_from_slice(&t.reward.to_le_bytes());
    for x in &t.next_obs {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out.push(t.done as u8);
}

pub fn decode_record(buf: &[u8], obs_len: usize) -> Result<Transition> {
    if buf.len() != 8 * obs_len + 6 {
        return Err(Error::Replay(format!("record of {} bytes, expected {}", buf.len(), 8 * obs_len + 6)));
    }
    let f32s = |b: &[u8]| -> Vec<f32> {
        b.chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect()
    };
    let n = 4 * obs_len;
    Ok(Transition {
        obs: f32s(&buf[..n]),
        action: buf[n],
        reward: f32::from_le_bytes(buf[n + 1..n + 5].try_into().unwrap()),
        next_obs: f32s(&buf[n + 5..2 * n + 5]),
        done: buf[2 * n + 5] != 0,
    })
}

#[derive(Debug, Clone)]
struct Cached {
    id: u64,
    records: Vec<Transition>,
    sample_count: u32,
}

#[derive(Debug)]
pub struct ReplayStore {
    dir: PathBuf,
    cfg: ReplayConfig,
    open: Vec<Transition>,
    /// Sealed fragment ids, oldest first.
    sealed: VecDeque<u64>,
    next_id: u64,
    cache: Vec<Cached>,
    /// When each fragment last entered the cache.
    cached_at: HashMap<u64, u64>,
    exhausted: HashSet<u64>,
    clock: u64,
    appended: u64,
}

impl ReplayStore {
    /// Creates an empty store in `dir`, removing fragments left by a
    /// previous store there.
    pub fn create(dir: &Path, cfg: ReplayConfig) -> Result<Self> {
        cfg.validate()?;
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
            let path = entry.map_err(|e| Error::io(dir, e))?.path();
            let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
            if name.starts_with("frag_") && name.ends_with(".bin") {
                fs::remove_file(&path).map_err(|e| Error::io(&path, e))?;
            }
        }
        let store = Self {
            dir: dir.to_path_buf(),
            cfg,
            open: Vec::new(),
            sealed: VecDeque::new(),
            next_id: 0,
            cache: Vec::new(),
            cached_at: HashMap::new(),
            exhausted: HashSet::new(),
            clock: 0,
            appended: 0,
        };
        store.write_manifest()?;
        Ok(store)
    }

    pub fn config(&self) -> &ReplayConfig {
        &self.cfg
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn fragment_path(&self, id: u64) -> PathBuf {
        self.dir.join(format!("frag_{id:08}.bin"))
    }

    /// Transitions held (sealed and open).
    pub fn len(&self) -> usize {
        self.sealed.len() * self.cfg.fragment_len + self.open.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn appended(&self) -> u64 {
        self.appended
    }

    pub fn open_len(&self) -> usize {
        self.open.len()
    }

    pub fn has_sealed(&self) -> bool {
        !self.sealed.is_empty()
    }

    pub fn sealed_ids(&self) -> Vec<u64> {
        self.sealed.iter().copied().collect()
    }

    /// `(fragment id, sample count)` for each cached fragment.
    pub fn cache_stats(&self) -> Vec<(u64, u32)> {
        self.cache.iter().map(|c| (c.id, c.sample_count)).collect()
    }

    /// Appends one transition, sealing and evicting fragments as needed.
    /// Returns true when a fragment was sealed.
    pub fn append(&mut self, t: Transition) -> Result<bool> {
        if t.obs.len() != self.cfg.obs_len || t.next_obs.len() != self.cfg.obs_len {
            return Err(Error::Shape {
                expected: self.cfg.obs_len,
                got: t.obs.len().max(t.next_obs.len()),
            });
        }
        if !t.reward.is_finite() {
            return Err(Error::Replay(format!("non-finite reward {}", t.reward)));
        }
        self.open.push(t);
        self.appended += 1;
        let mut sealed = false;
        if self.open.len() == self.cfg.fragment_len {
            self.seal()?;
            sealed = true;
        }
        let mut evicted = false;
        while self.len() > self.cfg.capacity {
            self.evict_oldest()?;
            evicted = true;
        }
        if evicted {
            self.fill_cache()?;
        }
        if sealed || evicted {
            self.write_manifest()?;
        }
        Ok(sealed)
    }

    fn seal(&mut self) -> Result<()> {
        let id = self.next_id;
        self.next_id += 1;
        let records = std::mem::take(&mut self.open);
        let mut buf = Vec::with_capacity(records.len() * self.cfg.record_bytes());
        for r in &records {
            encode_record(r, &mut buf);
        }
        let path = self.fragment_path(id);
        fs::write(&path, &buf).map_err(|e| Error::io(&path, e))?;
        self.sealed.push_back(id);
        if self.cache.len() < self.cfg.cache_fragments {
            self.insert_cached(id, records);
        }
        Ok(())
    }

    fn evict_oldest(&mut self) -> Result<()> {
        let id = self.sealed.pop_front().expect("over capacity implies a sealed fragment");
        self.cache.retain(|c| c.id != id);
        self.cached_at.remove(&id);
        self.exhausted.remove(&id);
        let path = self.fragment_path(id);
        fs::remove_file(&path).map_err(|e| Error::io(&path, e))
    }

    fn insert_cached(&mut self, id: u64, records: Vec<Transition>) {
        self.clock += 1;
        self.cached_at.insert(id, self.clock);
        self.cache.push(Cached {
            id,
            records,
            sample_count: 0,
        });
    }

    fn load_fragment(&self, id: u64) -> Result<Vec<Transition>> {
        let path = self.fragment_path(id);
        let buf = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let rb = self.cfg.record_bytes();
        if buf.len() != rb * self.cfg.fragment_len {
            return Err(Error::Replay(format!("{} has {} bytes", path.display(), buf.len())));
        }
        buf.chunks_exact(rb).map(|c| decode_record(c, self.cfg.obs_len)).collect()
    }

    fn is_cached(&self, id: u64) -> bool {
        self.cache.iter().any(|c| c.id == id)
    }

    /// Picks a sealed, uncached fragment: uniformly among those that never
    /// hit their quota, else the least recently cached one.
    fn pick_replacement(&self, rng: &mut impl Rng) -> Option<u64> {
        let uncached: Vec<u64> = self.sealed.iter().copied().filter(|&id| !self.is_cached(id)).collect();
        let fresh: Vec<u64> = uncached.iter().copied().filter(|id| !self.exhausted.contains(id)).collect();
        if !fresh.is_empty() {
            return Some(fresh[rng.random_range(0..fresh.len())]);
        }
        uncached
            .into_iter()
            .min_by_key(|id| (self.cached_at.get(id).copied().unwrap_or(0), *id))
    }

    /// Tops the cache up from disk (oldest uncached fragments first).
    fn fill_cache(&mut self) -> Result<()> {
        while self.cache.len() < self.cfg.cache_fragments {
            let Some(id) = self.sealed.iter().copied().find(|&id| !self.is_cached(id)) else {
                break;
            };
            let records = self.load_fragment(id)?;
            self.insert_cached(id, records);
        }
        Ok(())
    }

    /// Draws `n` transitions uniformly from the cached fragments. Each
    /// fragment touched by the batch has its sample count incremented once;
    /// fragments reaching the quota are swapped out.
    pub fn sample_batch(&mut self, n: usize, rng: &mut impl Rng) -> Result<Vec<Transition>> {
        if self.sealed.is_empty() {
            return Err(Error::EmptyStore);
        }
        if self.cache.is_empty() {
            self.fill_cache()?;
        }
        let total: usize = self.cache.iter().map(|c| c.records.len()).sum();
        let mut out = Vec::with_capacity(n);
        let mut touched = vec![false; self.cache.len()];
        for _ in 0..n {
            let mut i = rng.random_range(0..total);
            for (k, c) in self.cache.iter().enumerate() {
                if i < c.records.len() {
                    out.push(c.records[i].clone());
                    touched[k] = true;
                    break;
                }
                i -= c.records.len();
            }
        }
        let mut k = 0;
        let mut spent = Vec::new();
        self.cache.retain_mut(|c| {
            let hit = touched[k];
            k += 1;
            if hit {
                c.sample_count += 1;
            }
            if c.sample_count >= self.cfg.max_samples_per_fragment {
                spent.push(c.id);
                false
            } else {
                true
            }
        });
        for id in spent {
            self.exhausted.insert(id);
            if let Some(next) = self.pick_replacement(rng) {
                let records = self.load_fragment(next)?;
                self.exhausted.remove(&next);
                self.insert_cached(next, records);
            }
        }
        Ok(out)
    }

    fn write_manifest(&self) -> Result<()> {
        let ids: Vec<String> = self.sealed.iter().map(|id| id.to_string()).collect();
        let text = format!(
            "format tactix-replay\nversion {FORMAT_VERSION}\nobs_len {}\nrecord_bytes {}\nfragment_len {}\ncapacity {}\nnext_id {}\nfragments {}\n",
            self.cfg.obs_len,
            self.cfg.record_bytes(),
            self.cfg.fragment_len,
            self.cfg.capacity,
            self.next_id,
            ids.join(" ")
        );
        let path = self.dir.join("manifest.txt");
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }
}
