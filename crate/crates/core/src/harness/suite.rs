//! Pre-generated test episodes.
//!
//! File format (text, one record per line):
//!
//! ```text
//! tactix-suite 1
//! map_sha256 <hex digest of the map file text>
//! n_npcs <n>
//! seed <suite seed>
//! episode <index> <episode seed> <route id>
//! ...
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::world::{sample_episode, write_map, RoadMap, WorldConfig, WorldState};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuiteEpisode {
    pub seed: u64,
    pub route: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Suite {
    pub map_sha256: String,
    pub n_npcs: usize,
    pub seed: u64,
    pub episodes: Vec<SuiteEpisode>,
}

pub fn map_digest(map: &RoadMap) -> String {
    let mut h = Sha256::new();
    h.update(write_map(map).as_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

impl Suite {
    /// Draws `count` episode seeds from `seed`; each episode is checked to
    /// be placeable with `n_npcs` vehicles.
    pub fn generate(map: Arc<RoadMap>, world: Arc<WorldConfig>, seed: u64, count: usize, n_npcs: usize) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut episodes = Vec::with_capacity(count);
        while episodes.len() < count {
            let s = rng.next_u64();
            match sample_episode(map.clone(), world.clone(), s, n_npcs) {
                Ok(w) => episodes.push(SuiteEpisode { seed: s, route: w.route.id }),
                Err(Error::Placement { .. }) => continue,
                Err(e) => return Err(e),
            }
        }
        Ok(Self {
            map_sha256: map_digest(&map),
            n_npcs,
            seed,
            episodes,
        })
    }

    /// Rebuilds the initial world of episode `i`.
    pub fn world(&self, i: usize, map: Arc<RoadMap>, world: Arc<WorldConfig>) -> Result<WorldState> {
        let e = &self.episodes[i];
        let w = sample_episode(map, world, e.seed, self.n_npcs)?;
        if w.route.id != e.route {
            return Err(Error::Config(format!(
                "suite episode {i} expects route {} but the map produced route {}",
                e.route, w.route.id
            )));
        }
        Ok(w)
    }

    pub fn check_map(&self, map: &RoadMap) -> Result<()> {
        let d = map_digest(map);
        if d != self.map_sha256 {
            return Err(Error::Config(format!("suite was generated for map {} but got {d}", self.map_sha256)));
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "tactix-suite 1\nmap_sha256 {}\nn_npcs {}\nseed {}\n",
            self.map_sha256, self.n_npcs, self.seed
        );
        for (i, e) in self.episodes.iter().enumerate() {
            let _ = writeln!(s, "episode {i} {} {}", e.seed, e.route);
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let perr = |line: usize, msg: &str| Error::Parse {
            line,
            msg: msg.to_string(),
        };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        match lines.next() {
            Some((_, "tactix-suite 1")) => {}
            _ => return Err(perr(1, "expected header `tactix-suite 1`")),
        }
        let mut field = |name: &str| -> Result<(usize, String)> {
            let (n, l) = lines.next().ok_or_else(|| perr(0, "unexpected end of file"))?;
            l.strip_prefix(name)
                .and_then(|r| r.strip_prefix(' '))
                .map(|v| (n, v.to_string()))
                .ok_or_else(|| perr(n, &format!("expected `{name} ...`")))
        };
        let (_, map_sha256) = field("map_sha256")?;
        let (n, v) = field("n_npcs")?;
        let n_npcs = v.parse().map_err(|_| perr(n, "bad n_npcs"))?;
        let (n, v) = field("seed")?;
        let seed = v.parse().map_err(|_| perr(n, "bad seed"))?;
        let mut episodes = Vec::new();
        for (n, l) in lines {
            if l.is_empty() {
                continue;
            }
            let parts: Vec<&str> = l.split_whitespace().collect();
            match parts.as_slice() {
                ["episode", idx, s, r] if idx.parse::<usize>().ok() == Some(episodes.len()) => {
                    episodes.push(SuiteEpisode {
                        seed: s.parse().map_err(|_| perr(n, "bad episode seed"))?,
                        route: r.parse().map_err(|_| perr(n, "bad route id"))?,
                    })
                }
                _ => return Err(perr(n, "expected `episode <index> <seed> <route>`")),
            }
        }
        Ok(Self {
            map_sha256,
            n_npcs,
            seed,
            episodes,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}
