//! Model file format.
//!
//! Little-endian binary, laid out as:
//!
//! ```text
//! magic            8 bytes  "VGFOREST"
//! format_version   u32
//! n_trees          u32
//! mtry             u32
//! max_depth        u32      0 = unlimited
//! min_leaf         u32
//! seed             u64
//! n_features       u32
//! name_count       u32
//! names            name_count x (u16 length + utf-8 bytes)
//! trees            n_trees x tree
//! ```
//!
//! Each tree is a u32 node count followed by its nodes in preorder:
//! tag u8 (0 = internal, 1 = leaf); internal nodes carry feature u16 and
//! threshold f64, leaves carry vessel fraction f64 and sample count u32.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::{ForestModel, ForestParams, Tree, TreeNode, FORMAT_VERSION};

const MAGIC: &[u8; 8] = b"VGFOREST";
const TAG_INTERNAL: u8 = 0;
const TAG_LEAF: u8 = 1;

impl ForestModel {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&self.format_version.to_le_bytes());
        out.extend_from_slice(&(self.trees.len() as u32).to_le_bytes());
        out.extend_from_slice(&(self.params.mtry as u32).to_le_bytes());
        out.extend_from_slice(&(self.params.max_depth.unwrap_or(0) as u32).to_le_bytes());
        out.extend_from_slice(&(self.params.min_leaf as u32).to_le_bytes());
        out.extend_from_slice(&self.params.seed.to_le_bytes());
        out.extend_from_slice(&(self.n_features as u32).to_le_bytes());
        out.extend_from_slice(&(self.feature_names.len() as u32).to_le_bytes());
        for name in &self.feature_names {
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
        }
        for tree in &self.trees {
            write_tree(&mut out, tree);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<ForestModel> {
        let mut cursor = Cursor {
            bytes,
            at: 0,
        };
        let magic = cursor.take(8)?;
        if magic != MAGIC {
            return Err(Error::CorruptModel("bad magic".into()));
        }
        let format_version = cursor.u32()?;
        if format_version != FORMAT_VERSION {
            return Err(Error::Version(format_version));
        }
        let n_trees = cursor.u32()? as usize;
        let mtry = cursor.u32()? as usize;
        let max_depth = match cursor.u32()? as usize {
            0 => None,
            d => Some(d),
        };
        let min_leaf = cursor.u32()? as usize;
        let seed = cursor.u64()?;
        let n_features = cursor.u32()? as usize;
        let name_count = cursor.u32()? as usize;
        if n_trees == 0 {
            return Err(Error::CorruptModel("model has no trees".into()));
        }

        let mut feature_names = Vec::with_capacity(name_count);
        for _ in 0..name_count {
            let len = cursor.u16()? as usize;
            let raw = cursor.take(len)?;
            let name = std::str::from_utf8(raw)
                .map_err(|_| Error::CorruptModel("feature name is not utf-8".into()))?;
            feature_names.push(name.to_string());
        }

        let mut trees = Vec::with_capacity(n_trees);
        for _ in 0..n_trees {
            trees.push(read_tree(&mut cursor, n_features)?);
        }
        if cursor.at != bytes.len() {
            return Err(Error::CorruptModel(format!(
                "{} trailing bytes",
                bytes.len() - cursor.at
            )));
        }

        Ok(ForestModel {
            trees,
            n_features,
            params: ForestParams {
                n_trees,
                mtry,
                max_depth,
                min_leaf,
                seed,
            },
            feature_names,
            format_version,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut writer = BufWriter::new(file);
        writer
            .write_all(&self.to_bytes())
            .and_then(|_| writer.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<ForestModel> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut bytes = Vec::new();
        BufReader::new(file)
            .read_to_end(&mut bytes)
            .map_err(|e| Error::io(path, e))?;
        ForestModel::from_bytes(&bytes)
    }
}

fn write_tree(out: &mut Vec<u8>, tree: &Tree) {
    out.extend_from_slice(&(tree.nodes.len() as u32).to_le_bytes());
    // Preorder via child links; node 0 is the root.
    let mut stack = vec![0u32];
    let mut written = 0usize;
    while let Some(at) = stack.pop() {
        written += 1;
        match tree.nodes[at as usize] {
            TreeNode::Internal {
                feature,
                threshold,
                left,
                right,
            } => {
                out.push(TAG_INTERNAL);
                out.extend_from_slice(&feature.to_le_bytes());
                out.extend_from_slice(&threshold.to_le_bytes());
                stack.push(right);
                stack.push(left);
            }
            TreeNode::Leaf {
                vessel_fraction,
                sample_count,
            } => {
                out.push(TAG_LEAF);
                out.extend_from_slice(&vessel_fraction.to_le_bytes());
                out.extend_from_slice(&sample_count.to_le_bytes());
            }
        }
    }
    debug_assert_eq!(written, tree.nodes.len());
}

fn read_tree(cursor: &mut Cursor, n_features: usize) -> Result<Tree> {
    let node_count = cursor.u32()? as usize;
    if node_count == 0 || node_count % 2 == 0 {
        // A binary tree always has an odd node count.
        return Err(Error::CorruptModel(format!(
            "impossible node count {node_count}"
        )));
    }
    let mut nodes: Vec<TreeNode> = Vec::with_capacity(node_count);
    // (parent slot, is_left) waiting for the next preorder node.
    let mut pending: Vec<(usize, bool)> = Vec::new();

    for _ in 0..node_count {
        let slot = nodes.len();
        if slot > 0 {
            let Some((parent, is_left)) = pending.pop() else {
                return Err(Error::CorruptModel("node after tree completed".into()));
            };
            match &mut nodes[parent] {
                TreeNode::Internal { left, right, .. } => {
                    if is_left {
                        *left = slot as u32;
                    } else {
                        *right = slot as u32;
                    }
                }
                TreeNode::Leaf { .. } => unreachable!("pending parents are internal"),
            }
        }
        match cursor.u8()? {
            TAG_INTERNAL => {
                let feature = cursor.u16()?;
                if (feature as usize) >= n_features {
                    return Err(Error::CorruptModel(format!(
                        "split on feature {feature} but model has {n_features}"
                    )));
                }
                let threshold = cursor.f64()?;
                if !threshold.is_finite() {
                    return Err(Error::CorruptModel("non-finite threshold".into()));
                }
                nodes.push(TreeNode::Internal {
                    feature,
                    threshold,
                    left: 0,
                    right: 0,
                });
                pending.push((slot, false));
                pending.push((slot, true));
            }
            TAG_LEAF => {
                let vessel_fraction = cursor.f64()?;
                if !(0.0..=1.0).contains(&vessel_fraction) {
                    return Err(Error::CorruptModel(format!(
                        "leaf fraction {vessel_fraction} outside [0, 1]"
                    )));
                }
                let sample_count = cursor.u32()?;
                nodes.push(TreeNode::Leaf {
                    vessel_fraction,
                    sample_count,
                });
            }
            tag => return Err(Error::CorruptModel(format!("unknown node tag {tag}"))),
        }
    }
    if !pending.is_empty() {
        return Err(Error::CorruptModel(
            "tree ended with unfilled child slots".into(),
        ));
    }
    Ok(Tree { nodes })
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.at + n > self.bytes.len() {
            return Err(Error::CorruptModel("unexpected end of file".into()));
        }
        let slice = &self.bytes[self.at..self.at + n];
        self.at += n;
        Ok(slice)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
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
}
