//! Parent/child structure of dotted codes: the parent of `39.10` is `39`.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The characters before the first `.`; a code without a dot is its own parent.
pub fn parent_of(code: &str) -> Result<&str> {
    let code = code.trim();
    if code.is_empty() {
        return Err(Error::invalid("empty code"));
    }
    Ok(code.split_once('.').map_or(code, |(head, _)| head))
}

/// Child and parent label universes, each sorted lexicographically, plus the
/// child → parent index.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct LabelHierarchy {
    child_codes: Vec<String>,
    parent_codes: Vec<String>,
    child_to_parent: Vec<usize>,
    child_index: BTreeMap<String, usize>,
    parent_index: BTreeMap<String, usize>,
}

impl LabelHierarchy {
    pub fn build<S: AsRef<str>>(codes: &[S]) -> Result<Self> {
        if codes.is_empty() {
            return Err(Error::invalid("cannot build a hierarchy from no codes"));
        }
        let mut children = BTreeSet::new();
        for c in codes {
            let c = c.as_ref().trim();
            parent_of(c)?;
            children.insert(c.to_string());
        }
        let child_codes: Vec<String> = children.into_iter().collect();
        let parents: BTreeSet<&str> = child_codes
            .iter()
            .map(|c| parent_of(c))
            .collect::<Result<_>>()?;
        let parent_codes: Vec<String> = parents.into_iter().map(String::from).collect();
        let parent_index: BTreeMap<String, usize> = parent_codes
            .iter()
            .enumerate()
            .map(|(i, p)| (p.clone(), i))
            .collect();
        let child_to_parent = child_codes
            .iter()
            .map(|c| parent_index[parent_of(c).expect("validated above")])
            .collect();
        let child_index = child_codes
            .iter()
            .enumerate()
            .map(|(i, c)| (c.clone(), i))
            .collect();
        Ok(LabelHierarchy {
            child_codes,
            parent_codes,
            child_to_parent,
            child_index,
            parent_index,
        })
    }

    pub fn num_children(&self) -> usize {
        self.child_codes.len()
    }

    pub fn num_parents(&self) -> usize {
        self.parent_codes.len()
    }

    pub fn child_codes(&self) -> &[String] {
        &self.child_codes
    }

    pub fn parent_codes(&self) -> &[String] {
        &self.parent_codes
    }

    pub fn child_code(&self, idx: usize) -> &str {
        &self.child_codes[idx]
    }

    pub fn parent_code(&self, idx: usize) -> &str {
        &self.parent_codes[idx]
    }

    /// Parent position of the child at `child`.
    pub fn parent_index_of(&self, child: usize) -> usize {
        self.child_to_parent[child]
    }

    pub fn child_to_parent(&self) -> &[usize] {
        &self.child_to_parent
    }

    pub fn child_position(&self, code: &str) -> Option<usize> {
        self.child_index.get(code.trim()).copied()
    }

    pub fn parent_position(&self, code: &str) -> Option<usize> {
        self.parent_index.get(code.trim()).copied()
    }

    /// Children whose parent sits at `parent`.
    pub fn children_of(&self, parent: usize) -> impl Iterator<Item = usize> + '_ {
        self.child_to_parent
            .iter()
            .enumerate()
            .filter(move |(_, &p)| p == parent)
            .map(|(c, _)| c)
    }

    /// Image of a set of child positions under the child → parent map.
    pub fn derive_parent_set(&self, children: &BTreeSet<usize>) -> Result<BTreeSet<usize>> {
        children
            .iter()
            .map(|&c| {
                self.child_to_parent.get(c).copied().ok_or(Error::OutOfRange {
                    what: "child labels",
                    index: c,
                    size: self.child_codes.len(),
                })
            })
            .collect()
    }
}

impl TryFrom<Vec<String>> for LabelHierarchy {
    type Error = Error;

    fn try_from(codes: Vec<String>) -> Result<Self> {
        LabelHierarchy::build(&codes)
    }
}

impl From<LabelHierarchy> for Vec<String> {
    fn from(h: LabelHierarchy) -> Self {
        h.child_codes
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn set(xs: &[usize]) -> BTreeSet<usize> {
        xs.iter().copied().collect()
    }

    #[test]
    fn parent_of_examples() {
        assert_eq!(parent_of("39.10").unwrap(), "39");
        assert_eq!(parent_of("V10.1").unwrap(), "V10");
        assert_eq!(parent_of("250").unwrap(), "250");
        assert_eq!(parent_of(" 401.9 ").unwrap(), "401");
        assert!(parent_of("").is_err());
        assert!(parent_of("   ").is_err());
    }

    #[test]
    fn build_small_hierarchy() {
        let h = LabelHierarchy::build(&["40.0", "39.2", "39.10"]).unwrap();
        assert_eq!(h.child_codes(), ["39.10", "39.2", "40.0"]);
        assert_eq!(h.parent_codes(), ["39", "40"]);
        assert_eq!(h.child_to_parent(), [0, 0, 1]);
    }

    #[test]
    fn singleton_and_duplicates() {
        let h = LabelHierarchy::build(&["X.1"]).unwrap();
        assert_eq!(h.parent_codes(), ["X"]);
        assert_eq!(h.child_to_parent(), [0]);
        let a = LabelHierarchy::build(&["39.10", "39.2", "40.0"]).unwrap();
        let b = LabelHierarchy::build(&["39.10", "39.2", "39.10", "40.0"]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_inputs_are_rejected() {
        assert!(LabelHierarchy::build::<&str>(&[]).is_err());
        assert!(LabelHierarchy::build(&["39.1", ""]).is_err());
    }

    #[test]
    fn derive_parent_set_examples() {
        let h = LabelHierarchy::build(&["39.10", "39.2", "40.0"]).unwrap();
        assert_eq!(h.derive_parent_set(&set(&[])).unwrap(), set(&[]));
        assert_eq!(h.derive_parent_set(&set(&[0, 1])).unwrap(), set(&[0]));
        let c = set(&[h.child_position("39.10").unwrap(), h.child_position("40.0").unwrap()]);
        let p = set(&[h.parent_position("39").unwrap(), h.parent_position("40").unwrap()]);
        assert_eq!(h.derive_parent_set(&c).unwrap(), p);
        assert!(matches!(
            h.derive_parent_set(&set(&[3])),
            Err(Error::OutOfRange { index: 3, .. })
        ));
    }

    #[test]
    fn serde_keeps_only_child_codes() {
        let h = LabelHierarchy::build(&["39.10", "250", "V10.1"]).unwrap();
        let codes: Vec<String> = h.clone().into();
        assert_eq!(LabelHierarchy::try_from(codes).unwrap(), h);
        assert_eq!(h.children_of(h.parent_position("250").unwrap()).collect::<Vec<_>>(), vec![0]);
    }

    fn code() -> impl Strategy<Value = String> {
        ("[A-Z0-9]{1,3}", proptest::option::of("[0-9]{1,2}"))
            .prop_map(|(p, c)| c.map_or(p.clone(), |c| alloc::format!("{p}.{c}")))
    }

    proptest! {
        #[test]
        fn parent_of_is_idempotent(c in code()) {
            let p = parent_of(&c).unwrap();
            prop_assert_eq!(parent_of(p).unwrap(), p);
        }

        #[test]
        fn build_is_order_insensitive(mut codes in proptest::collection::vec(code(), 1..30), seed in any::<u64>()) {
            let a = LabelHierarchy::build(&codes).unwrap();
            // deterministic permutation from the seed
            let n = codes.len();
            let mut s = seed;
            for i in (1..n).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                codes.swap(i, (s >> 33) as usize % (i + 1));
            }
            let b = LabelHierarchy::build(&codes).unwrap();
            prop_assert_eq!(&a, &b);
            for (c, &p) in a.child_codes().iter().enumerate().map(|(i, c)| (c, &a.child_to_parent()[i])) {
                prop_assert_eq!(parent_of(c).unwrap(), a.parent_code(p));
            }
            // every parent has at least one child
            for p in 0..a.num_parents() {
                prop_assert!(a.children_of(p).next().is_some());
            }
        }
    }
}
