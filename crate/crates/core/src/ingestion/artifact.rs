//! The persisted feature/reward pair consumed by the replay environment.
//!
//! Feature file (`<prefix>.features.bin`, all little-endian):
//!
//! | offset | size | field |
//! |---|---|---|
//! | 0 | 8 | magic `RPBFEAT\0` |
//! | 8 | 4 | version (u32, currently 1) |
//! | 12 | 4 | dataset tag (u32: 0 MovieLens, 1 Jester) |
//! | 16 | 4 | n = k_user + k_item (u32) |
//! | 20 | 4 | number of users (u32) |
//! | 24 | 4 | number of arms A (u32) |
//! | 28 | 4 | k_user (u32) |
//! | 32 | 4 | k_item (u32) |
//! | 36 | 8 | factorization seed (u64) |
//! | 44 | 8 | normalization constant c (f64) |
//! | 52 | 8·U | user ids (u64) |
//! | … | 8·A | item ids in arm order (u64) |
//! | … | 8·U·k_user | user factors, row-major f64 |
//! | … | 8·A·k_item | item factors, row-major f64 |
//!
//! Reward file (`<prefix>.rewards.bin`): magic `RPBRWD\0\0`, version (u32),
//! number of users (u32), number of arms (u32), entry count (u64), then one
//! record per rated `(user index, arm index)` pair sorted by user then arm.
//! Each record is two LEB128 varints: the user-index delta from the previous
//! record, then `(item << 1) | bit` where `item` is the arm-index delta when
//! the user delta is 0 (and not the first record) and the absolute arm index
//! otherwise. Unrated pairs are absent and pay 0.

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::factorize::FactorModel;
use super::ratings::{DatasetKind, RatingsTable};
use crate::error::{Error, Result};
use crate::types::{Context, NORM_SLACK};

const FEATURE_MAGIC: &[u8; 8] = b"RPBFEAT\0";
const REWARD_MAGIC: &[u8; 8] = b"RPBRWD\0\0";
pub const ARTIFACT_VERSION: u32 = 1;

/// One rated `(user, arm)` pair with its binarized reward.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct RewardEntry {
    pub user: u32,
    pub item: u32,
    pub bit: u8,
}

/// Header fields echoed into experiment reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArtifactHeader {
    pub version: u32,
    pub dataset: DatasetKind,
    pub n: usize,
    pub num_users: usize,
    pub num_arms: usize,
    pub k_user: usize,
    pub k_item: usize,
    pub seed: u64,
    pub norm_const: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureArtifact {
    pub dataset: DatasetKind,
    pub k_user: usize,
    pub k_item: usize,
    pub seed: u64,
    pub norm_const: f64,
    pub user_ids: Vec<u64>,
    /// Item ids in arm order.
    pub item_ids: Vec<u64>,
    /// `|U|×k_user`, unscaled.
    pub user_factors: DMatrix<f64>,
    /// `A×k_item`, unscaled.
    pub item_factors: DMatrix<f64>,
    /// Sorted by `(user, item)`.
    pub rewards: Vec<RewardEntry>,
}

pub fn feature_path(prefix: &Path) -> PathBuf {
    suffixed(prefix, ".features.bin")
}

pub fn reward_path(prefix: &Path) -> PathBuf {
    suffixed(prefix, ".rewards.bin")
}

fn suffixed(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

impl FeatureArtifact {
    pub fn n(&self) -> usize {
        self.k_user + self.k_item
    }

    pub fn num_users(&self) -> usize {
        self.user_ids.len()
    }

    pub fn num_arms(&self) -> usize {
        self.item_ids.len()
    }

    pub fn header(&self) -> ArtifactHeader {
        ArtifactHeader {
            version: ARTIFACT_VERSION,
            dataset: self.dataset,
            n: self.n(),
            num_users: self.num_users(),
            num_arms: self.num_arms(),
            k_user: self.k_user,
            k_item: self.k_item,
            seed: self.seed,
            norm_const: self.norm_const,
        }
    }

    /// `c · concat(user_factors[u], item_factors[i])`.
    pub fn context(&self, user: usize, item: usize) -> Result<Context> {
        if user >= self.num_users() || item >= self.num_arms() {
            return Err(Error::invalid(format!(
                "pair ({user}, {item}) out of range for {}×{} artifact",
                self.num_users(),
                self.num_arms()
            )));
        }
        let c = self.norm_const;
        let x = DVector::from_iterator(
            self.n(),
            self.user_factors
                .row(user)
                .iter()
                .chain(self.item_factors.row(item).iter())
                .map(|v| c * v),
        );
        Context::try_from(x)
    }

    pub fn reward(&self, user: usize, item: usize) -> Result<u8> {
        if user >= self.num_users() || item >= self.num_arms() {
            return Err(Error::invalid(format!(
                "pair ({user}, {item}) out of range for {}×{} artifact",
                self.num_users(),
                self.num_arms()
            )));
        }
        let key = (user as u32, item as u32);
        Ok(self
            .rewards
            .binary_search_by(|e| (e.user, e.item).cmp(&key))
            .map(|i| self.rewards[i].bit)
            .unwrap_or(0))
    }

    pub fn save(&self, prefix: &Path) -> Result<()> {
        if let Some(dir) = prefix.parent() {
            if !dir.as_os_str().is_empty() {
                fs::create_dir_all(dir)?;
            }
        }
        let mut f = BufWriter::new(File::create(feature_path(prefix))?);
        self.write_features(&mut f)?;
        f.flush()?;
        let mut f = BufWriter::new(File::create(reward_path(prefix))?);
        self.write_rewards(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn load(prefix: &Path) -> Result<Self> {
        let features = fs::read(feature_path(prefix))?;
        let rewards = fs::read(reward_path(prefix))?;
        Self::from_bytes(&features, &rewards)
    }

    pub fn write_features<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(FEATURE_MAGIC)?;
        for v in [
            ARTIFACT_VERSION,
            self.dataset.tag(),
            to_u32(self.n())?,
            to_u32(self.num_users())?,
            to_u32(self.num_arms())?,
            to_u32(self.k_user)?,
            to_u32(self.k_item)?,
        ] {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&self.seed.to_le_bytes())?;
        w.write_all(&self.norm_const.to_le_bytes())?;
        for id in self.user_ids.iter().chain(&self.item_ids) {
            w.write_all(&id.to_le_bytes())?;
        }
        for m in [&self.user_factors, &self.item_factors] {
            for r in 0..m.nrows() {
                for c in 0..m.ncols() {
                    w.write_all(&m[(r, c)].to_le_bytes())?;
                }
            }
        }
        Ok(())
    }

    pub fn write_rewards<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(REWARD_MAGIC)?;
        w.write_all(&ARTIFACT_VERSION.to_le_bytes())?;
        w.write_all(&to_u32(self.num_users())?.to_le_bytes())?;
        w.write_all(&to_u32(self.num_arms())?.to_le_bytes())?;
        w.write_all(&(self.rewards.len() as u64).to_le_bytes())?;
        let mut buf = Vec::with_capacity(self.rewards.len() * 3);
        let mut prev: Option<(u32, u32)> = None;
        for e in &self.rewards {
            let (du, item) = match prev {
                Some((pu, pi)) if pu == e.user => (0, e.item - pi),
                Some((pu, _)) => (e.user - pu, e.item),
                None => (e.user, e.item),
            };
            write_varint(&mut buf, u64::from(du));
            write_varint(&mut buf, (u64::from(item) << 1) | u64::from(e.bit));
            prev = Some((e.user, e.item));
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn from_bytes(features: &[u8], rewards: &[u8]) -> Result<Self> {
        let mut r = Reader::new(features, "feature file");
        r.magic(FEATURE_MAGIC)?;
        r.version()?;
        let dataset = DatasetKind::from_tag(r.u32()?)?;
        let n = r.u32()? as usize;
        let num_users = r.u32()? as usize;
        let num_arms = r.u32()? as usize;
        let k_user = r.u32()? as usize;
        let k_item = r.u32()? as usize;
        if n != k_user + k_item {
            return Err(Error::data(format!("feature file: n={n} but k_user+k_item={}", k_user + k_item)));
        }
        let seed = r.u64()?;
        let norm_const = r.f64()?;
        let expected = 52 + 8 * (num_users + num_arms + num_users * k_user + num_arms * k_item);
        if features.len() != expected {
            return Err(Error::data(format!(
                "feature file: expected {expected} bytes, found {}",
                features.len()
            )));
        }
        let user_ids = (0..num_users).map(|_| r.u64()).collect::<Result<Vec<_>>>()?;
        let item_ids = (0..num_arms).map(|_| r.u64()).collect::<Result<Vec<_>>>()?;
        let user_factors = r.matrix(num_users, k_user)?;
        let item_factors = r.matrix(num_arms, k_item)?;

        let mut r = Reader::new(rewards, "reward file");
        r.magic(REWARD_MAGIC)?;
        r.version()?;
        if r.u32()? as usize != num_users || r.u32()? as usize != num_arms {
            return Err(Error::data("reward file shape does not match the feature file"));
        }
        let count = r.u64()? as usize;
        let mut entries = Vec::with_capacity(count.min(rewards.len()));
        let mut prev: Option<(u32, u32)> = None;
        for _ in 0..count {
            let du = r.varint()?;
            let packed = r.varint()?;
            let (bit, item) = ((packed & 1) as u8, packed >> 1);
            let (user, item) = match prev {
                Some((pu, pi)) if du == 0 => (u64::from(pu), u64::from(pi) + item),
                Some((pu, _)) => (u64::from(pu) + du, item),
                None => (du, item),
            };
            if user >= num_users as u64 || item >= num_arms as u64 {
                return Err(Error::data(format!("reward entry ({user}, {item}) out of range")));
            }
            let e = RewardEntry {
                user: user as u32,
                item: item as u32,
                bit,
            };
            if let Some(p) = prev {
                if (e.user, e.item) <= p {
                    return Err(Error::data("reward entries are not strictly sorted"));
                }
            }
            prev = Some((e.user, e.item));
            entries.push(e);
        }
        if !r.is_done() {
            return Err(Error::data("reward file has trailing bytes"));
        }

        Ok(FeatureArtifact {
            dataset,
            k_user,
            k_item,
            seed,
            norm_const,
            user_ids,
            item_ids,
            user_factors,
            item_factors,
            rewards: entries,
        })
    }
}

/// Build an artifact where user and item factors come from the same model.
pub fn build_feature_artifact(
    model: &FactorModel,
    table: &RatingsTable,
    top_items: &[u64],
    kind: DatasetKind,
) -> Result<FeatureArtifact> {
    build_split_feature_artifact(model, model, table, top_items, kind)
}

/// Build an artifact taking user factors from `user_model` and item factors
/// from `item_model`, so the two halves of the context can have different
/// widths.
pub fn build_split_feature_artifact(
    user_model: &FactorModel,
    item_model: &FactorModel,
    table: &RatingsTable,
    top_items: &[u64],
    kind: DatasetKind,
) -> Result<FeatureArtifact> {
    if top_items.is_empty() {
        return Err(Error::invalid("at least one candidate item is required"));
    }
    let user_index = user_model.user_index();
    let item_index = item_model.item_index();

    let mut user_ids: Vec<u64> = table.triplets.iter().map(|r| r.user).collect();
    user_ids.sort_unstable();
    user_ids.dedup();
    let mut user_factors = DMatrix::zeros(user_ids.len(), user_model.k);
    for (row, id) in user_ids.iter().enumerate() {
        let src = *user_index
            .get(id)
            .ok_or_else(|| Error::data(format!("user {id} has no factors")))?;
        user_factors.set_row(row, &user_model.user_factors.row(src));
    }
    let mut item_factors = DMatrix::zeros(top_items.len(), item_model.k);
    for (row, id) in top_items.iter().enumerate() {
        let src = *item_index
            .get(id)
            .ok_or_else(|| Error::data(format!("item {id} has no factors")))?;
        item_factors.set_row(row, &item_model.item_factors.row(src));
    }

    // The largest concatenation pairs the longest user row with the longest
    // item row, so the global max norm separates.
    let max_sq = |m: &DMatrix<f64>| m.row_iter().map(|r| r.norm_squared()).fold(0.0, f64::max);
    let max_norm = (max_sq(&user_factors) + max_sq(&item_factors)).sqrt();
    let norm_const = if max_norm > 0.0 { 1.0 / max_norm } else { 1.0 };

    let users: HashMap<u64, u32> = user_ids.iter().enumerate().map(|(i, &u)| (u, i as u32)).collect();
    let arms: HashMap<u64, u32> = top_items.iter().enumerate().map(|(i, &u)| (u, i as u32)).collect();
    let mut rewards: Vec<RewardEntry> = table
        .triplets
        .iter()
        .filter_map(|r| {
            arms.get(&r.item).map(|&item| RewardEntry {
                user: users[&r.user],
                item,
                bit: kind.binarize(Some(r.rating)),
            })
        })
        .collect();
    rewards.sort_unstable();
    rewards.dedup_by_key(|e| (e.user, e.item));

    let artifact = FeatureArtifact {
        dataset: kind,
        k_user: user_model.k,
        k_item: item_model.k,
        seed: 0,
        norm_const,
        user_ids,
        item_ids: top_items.to_vec(),
        user_factors,
        item_factors,
        rewards,
    };
    debug_assert!(max_norm * norm_const <= 1.0 + NORM_SLACK);
    Ok(artifact)
}

fn to_u32(v: usize) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::invalid(format!("{v} does not fit the artifact's u32 field")))
}

fn write_varint(buf: &mut Vec<u8>, mut v: u64) {
    loop {
        let byte = (v & 0x7f) as u8;
        v >>= 7;
        if v == 0 {
            buf.push(byte);
            return;
        }
        buf.push(byte | 0x80);
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8], what: &'static str) -> Self {
        Self { bytes, pos: 0, what }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(Error::data(format!("{} truncated at byte {}", self.what, self.pos)));
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn magic(&mut self, magic: &[u8; 8]) -> Result<()> {
        if self.take(8)? != magic {
            return Err(Error::data(format!("{}: bad magic", self.what)));
        }
        Ok(())
    }

    fn version(&mut self) -> Result<()> {
        let v = self.u32()?;
        if v != ARTIFACT_VERSION {
            return Err(Error::data(format!("{}: unsupported version {v}", self.what)));
        }
        Ok(())
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            data.push(self.f64()?);
        }
        Ok(DMatrix::from_row_slice(rows, cols, &data))
    }

    fn varint(&mut self) -> Result<u64> {
        let mut v = 0u64;
        for shift in (0..64).step_by(7) {
            let b = self.take(1)?[0];
            v |= u64::from(b & 0x7f) << shift;
            if b & 0x80 == 0 {
                return Ok(v);
            }
        }
        Err(Error::data(format!("{}: varint overflow", self.what)))
    }

    fn is_done(&self) -> bool {
        self.pos == self.bytes.len()
    }
}
