//! Versioned little-endian binary format for trained forests.
//!
//! ```text
//! "RFPH" | u32 version | u8 task | u32 n_classes | u32 n_rows | u32 n_features
//! | u32 mtry | u32 min_node_size | u64 seed | u32 n_trees
//! then per tree: u32 n_nodes, nodes, n_rows × u32 in-bag counts
//! node: u8 0 = split (u32 feature, f64 threshold, u32 left, u32 right)
//!       u8 1 = leaf  (u32 leaf_id, f64 value)
//! ```

use std::fs;
use std::path::Path;

use super::{Forest, Node, Tree};
use crate::data::{write_file, Task};
use crate::error::{Error, Result};
use crate::seed::RandomSeed;

pub const MAGIC: &[u8; 4] = b"RFPH";
pub const FORMAT_VERSION: u32 = 1;

fn put_u32(buf: &mut Vec<u8>, v: usize) {
    buf.extend_from_slice(&(v as u32).to_le_bytes());
}

pub fn encode_forest(forest: &Forest) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.push(match forest.task {
        Task::Classification => 0,
        Task::Regression => 1,
    });
    put_u32(&mut buf, forest.n_classes);
    put_u32(&mut buf, forest.n_rows);
    put_u32(&mut buf, forest.n_features);
    put_u32(&mut buf, forest.mtry);
    put_u32(&mut buf, forest.min_node_size);
    buf.extend_from_slice(&forest.seed.0.to_le_bytes());
    put_u32(&mut buf, forest.n_trees());
    for (tree, bag) in forest.trees.iter().zip(&forest.in_bag) {
        put_u32(&mut buf, tree.nodes.len());
        for node in &tree.nodes {
            match node {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    buf.push(0);
                    put_u32(&mut buf, *feature);
                    buf.extend_from_slice(&threshold.to_le_bytes());
                    put_u32(&mut buf, *left);
                    put_u32(&mut buf, *right);
                }
                Node::Leaf { leaf_id, value } => {
                    buf.push(1);
                    put_u32(&mut buf, *leaf_id);
                    buf.extend_from_slice(&value.to_le_bytes());
                }
            }
        }
        for &c in bag {
            buf.extend_from_slice(&c.to_le_bytes());
        }
    }
    buf
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, k: usize) -> Result<&[u8]> {
        if self.pos + k > self.bytes.len() {
            return Err(Error::Format(format!("truncated at byte {}", self.pos)));
        }
        let s = &self.bytes[self.pos..self.pos + k];
        self.pos += k;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn usize(&mut self) -> Result<usize> {
        self.u32().map(|v| v as usize)
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode_forest(bytes: &[u8]) -> Result<Forest> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(4)? != MAGIC {
        return Err(Error::Format("missing RFPH magic".into()));
    }
    let version = c.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let task = match c.u8()? {
        0 => Task::Classification,
        1 => Task::Regression,
        t => return Err(Error::Format(format!("unknown task tag {t}"))),
    };
    let n_classes = c.usize()?;
    let n_rows = c.usize()?;
    let n_features = c.usize()?;
    let mtry = c.usize()?;
    let min_node_size = c.usize()?;
    let seed = RandomSeed(c.u64()?);
    let n_trees = c.usize()?;
    let mut trees = Vec::with_capacity(n_trees);
    let mut in_bag = Vec::with_capacity(n_trees);
    for _ in 0..n_trees {
        let n_nodes = c.usize()?;
        let mut nodes = Vec::with_capacity(n_nodes);
        let mut n_leaves = 0;
        for _ in 0..n_nodes {
            nodes.push(match c.u8()? {
                0 => {
                    let feature = c.usize()?;
                    let threshold = c.f64()?;
                    let left = c.usize()?;
                    let right = c.usize()?;
                    if feature >= n_features || left >= n_nodes || right >= n_nodes {
                        return Err(Error::Format("node reference out of range".into()));
                    }
                    Node::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    }
                }
                1 => {
                    n_leaves += 1;
                    Node::Leaf {
                        leaf_id: c.usize()?,
                        value: c.f64()?,
                    }
                }
                t => return Err(Error::Format(format!("unknown node tag {t}"))),
            });
        }
        trees.push(Tree { nodes, n_leaves });
        let bag = (0..n_rows).map(|_| c.u32()).collect::<Result<Vec<u32>>>()?;
        in_bag.push(bag);
    }
    if c.pos != bytes.len() {
        return Err(Error::Format("trailing bytes".into()));
    }
    Ok(Forest {
        trees,
        in_bag,
        task,
        n_classes,
        n_rows,
        n_features,
        mtry,
        min_node_size,
        seed,
    })
}

pub fn write_forest(forest: &Forest, path: &Path) -> Result<()> {
    write_file(path, &encode_forest(forest))
}

pub fn read_forest(path: &Path) -> Result<Forest> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_forest(&bytes)
}
