//! Two-level class taxonomy: superclasses, their subclasses, and standalone
//! classes with no parent. The hierarchy is the authority for label
//! semantics everywhere else in the engine.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

/// Dense index of a class within one built [`Hierarchy`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClassId(pub usize);

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum HierarchyError {
    #[error("duplicate class `{0}`")]
    DuplicateClass(String),
    #[error("class `{0}` appears as both a parent and a child")]
    CycleOrDepthViolation(String),
    #[error("parent `{0}` is never defined")]
    DanglingParent(String),
    #[error("hierarchy has no classes")]
    EmptyHierarchy,
    #[error("unknown class `{0}`")]
    UnknownClass(String),
    #[error("class `{0}` is a superclass and carries no raw samples")]
    IsSuperclass(String),
    #[error("hierarchy line {0}: {1}")]
    Parse(usize, String),
}

/// Immutable, validated two-level taxonomy.
///
/// Indices are assigned in a fixed order so seeded shuffles downstream are
/// reproducible: superclasses in order of first appearance in the parent
/// column, then parented subclasses in input order, then standalone classes
/// in input order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hierarchy {
    names: Vec<String>,
    parent: Vec<Option<ClassId>>,
    children: Vec<Vec<ClassId>>,
    by_name: HashMap<String, ClassId>,
}

impl Hierarchy {
    /// Build from `(child-name, optional parent-name)` records.
    /// Superclasses are declared implicitly by appearing as a parent.
    pub fn build(records: &[(String, Option<String>)]) -> Result<Self, HierarchyError> {
        if records.is_empty() {
            return Err(HierarchyError::EmptyHierarchy);
        }
        let mut super_names: Vec<String> = Vec::new();
        let mut super_set: HashMap<&str, ()> = HashMap::new();
        for (child, parent) in records {
            if child.is_empty() {
                return Err(HierarchyError::UnknownClass(String::new()));
            }
            if let Some(p) = parent {
                if p.is_empty() {
                    return Err(HierarchyError::DanglingParent(String::new()));
                }
                if super_set.insert(p.as_str(), ()).is_none() {
                    super_names.push(p.clone());
                }
            }
        }
        let mut child_seen: HashMap<&str, ()> = HashMap::new();
        for (child, _) in records {
            if child_seen.insert(child.as_str(), ()).is_some() {
                return Err(HierarchyError::DuplicateClass(child.clone()));
            }
            if super_set.contains_key(child.as_str()) {
                return Err(HierarchyError::CycleOrDepthViolation(child.clone()));
            }
        }

        let mut names = super_names.clone();
        for (child, parent) in records {
            if parent.is_some() {
                names.push(child.clone());
            }
        }
        for (child, parent) in records {
            if parent.is_none() {
                names.push(child.clone());
            }
        }
        let by_name: HashMap<String, ClassId> = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), ClassId(i)))
            .collect();

        let mut parent_map = vec![None; names.len()];
        let mut children = vec![Vec::new(); names.len()];
        for (child, parent) in records {
            if let Some(p) = parent {
                let c = by_name[child.as_str()];
                let pid = by_name[p.as_str()];
                parent_map[c.0] = Some(pid);
                children[pid.0].push(c);
            }
        }
        Ok(Self {
            names,
            parent: parent_map,
            children,
            by_name,
        })
    }

    /// Parse the TSV format: `child<TAB>parent` or `child` alone per line,
    /// `#` comment lines and blank lines ignored.
    pub fn parse_tsv(text: &str) -> Result<Self, HierarchyError> {
        let mut records = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.splitn(2, '\t');
            let child = parts.next().unwrap().trim();
            let parent = parts.next().map(|p| p.trim());
            if child.is_empty() {
                return Err(HierarchyError::Parse(lineno + 1, "empty class name".into()));
            }
            if parent == Some("") {
                return Err(HierarchyError::Parse(lineno + 1, "empty parent name".into()));
            }
            records.push((child.to_string(), parent.map(|p| p.to_string())));
        }
        Self::build(&records)
    }

    /// Serialize back to the TSV format, one record per non-superclass in
    /// index order.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for id in self.class_ids() {
            if self.is_superclass(id) {
                continue;
            }
            match self.parent(id) {
                Some(p) => {
                    out.push_str(self.name(id));
                    out.push('\t');
                    out.push_str(self.name(p));
                }
                None => out.push_str(self.name(id)),
            }
            out.push('\n');
        }
        out
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn class_ids(&self) -> impl Iterator<Item = ClassId> {
        (0..self.names.len()).map(ClassId)
    }

    pub fn name(&self, id: ClassId) -> &str {
        &self.names[id.0]
    }

    pub fn lookup(&self, name: &str) -> Option<ClassId> {
        self.by_name.get(name).copied()
    }

    pub fn parent(&self, id: ClassId) -> Option<ClassId> {
        self.parent[id.0]
    }

    pub fn children(&self, id: ClassId) -> &[ClassId] {
        &self.children[id.0]
    }

    pub fn is_superclass(&self, id: ClassId) -> bool {
        !self.children[id.0].is_empty()
    }

    pub fn is_standalone(&self, id: ClassId) -> bool {
        !self.is_superclass(id) && self.parent(id).is_none()
    }

    /// Classes that carry raw samples: parented subclasses and standalone
    /// classes, in index order.
    pub fn subclasses(&self) -> impl Iterator<Item = ClassId> + '_ {
        self.class_ids().filter(|&id| !self.is_superclass(id))
    }

    pub fn superclasses(&self) -> impl Iterator<Item = ClassId> + '_ {
        self.class_ids().filter(|&id| self.is_superclass(id))
    }

    pub fn standalone(&self) -> impl Iterator<Item = ClassId> + '_ {
        self.class_ids().filter(|&id| self.is_standalone(id))
    }

    /// The full label set of a sample of `subclass`: `{subclass, parent}`
    /// when parented, `{subclass}` otherwise.
    pub fn labels_of(&self, subclass: ClassId) -> Result<Vec<ClassId>, HierarchyError> {
        if subclass.0 >= self.names.len() {
            return Err(HierarchyError::UnknownClass(format!("#{}", subclass.0)));
        }
        if self.is_superclass(subclass) {
            return Err(HierarchyError::IsSuperclass(self.name(subclass).to_string()));
        }
        Ok(match self.parent(subclass) {
            Some(p) => vec![subclass, p],
            None => vec![subclass],
        })
    }

    pub fn labels_of_name(&self, name: &str) -> Result<Vec<ClassId>, HierarchyError> {
        let id = self
            .lookup(name)
            .ok_or_else(|| HierarchyError::UnknownClass(name.to_string()))?;
        self.labels_of(id)
    }
}

/// The bundled CIFAR-style two-level hierarchy (15 superclasses,
/// 77 parented subclasses, 23 standalone classes).
pub const CIFAR_HIERARCHY_TSV: &str =
    include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/../../hierarchies/iirc_cifar.tsv"));
