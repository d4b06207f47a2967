//! Relations, per-query access profiles and plan documents.
//!
//! A [`Catalog`] fixes the relation universe and its order; every matrix in
//! the crate uses that order for its rows. Plan documents are small operator
//! trees ([`PlanNode`]) which [`parse_plan`] turns into a [`QuerySpec`]: one
//! [`AccessDescriptor`] per touched relation. [`access_matrix`] expands a
//! spec into per-block access probabilities.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type RelationId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationKind {
    Base,
    Index,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationMeta {
    pub id: RelationId,
    pub name: String,
    pub kind: RelationKind,
    pub block_count: usize,
}

impl RelationMeta {
    pub fn new(id: RelationId, name: impl Into<String>, kind: RelationKind, block_count: usize) -> Self {
        Self {
            id,
            name: name.into(),
            kind,
            block_count,
        }
    }
}

/// Ordered set of relations. The order is canonical: row `i` of every
/// block or feature matrix belongs to `relations()[i]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<RelationMeta>", into = "Vec<RelationMeta>")]
pub struct Catalog {
    relations: Vec<RelationMeta>,
    rows: HashMap<RelationId, usize>,
}

impl Catalog {
    pub fn new(relations: Vec<RelationMeta>) -> Result<Self> {
        if relations.is_empty() {
            return Err(Error::Catalog("catalog has no relations".into()));
        }
        let mut rows = HashMap::with_capacity(relations.len());
        for (row, rel) in relations.iter().enumerate() {
            if rel.block_count == 0 {
                return Err(Error::Catalog(format!("relation {} has zero blocks", rel.id)));
            }
            if rows.insert(rel.id, row).is_some() {
                return Err(Error::Catalog(format!("duplicate relation id {}", rel.id)));
            }
        }
        Ok(Self { relations, rows })
    }

    pub fn relations(&self) -> &[RelationMeta] {
        &self.relations
    }

    pub fn len(&self) -> usize {
        self.relations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relations.is_empty()
    }

    /// Matrix row of a relation.
    pub fn row_of(&self, id: RelationId) -> Result<usize> {
        self.rows.get(&id).copied().ok_or(Error::UnknownRelation(id))
    }

    pub fn relation(&self, id: RelationId) -> Result<&RelationMeta> {
        Ok(&self.relations[self.row_of(id)?])
    }

    pub fn block_count(&self, id: RelationId) -> Result<usize> {
        Ok(self.relation(id)?.block_count)
    }

    pub fn total_blocks(&self) -> usize {
        self.relations.iter().map(|r| r.block_count).sum()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

impl TryFrom<Vec<RelationMeta>> for Catalog {
    type Error = Error;

    fn try_from(relations: Vec<RelationMeta>) -> Result<Self> {
        Catalog::new(relations)
    }
}

impl From<Catalog> for Vec<RelationMeta> {
    fn from(catalog: Catalog) -> Self {
        catalog.relations
    }
}

/// How a query touches one relation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum AccessDescriptor {
    None,
    FullScan,
    Selective { selectivity: f64 },
}

impl AccessDescriptor {
    pub fn selective(selectivity: f64) -> Result<Self> {
        check_fraction(selectivity, "selectivity")?;
        Ok(AccessDescriptor::Selective { selectivity })
    }

    /// Probability that any single block of the relation is read.
    pub fn probability(&self) -> f64 {
        match *self {
            AccessDescriptor::None => 0.0,
            AccessDescriptor::FullScan => 1.0,
            AccessDescriptor::Selective { selectivity } => selectivity,
        }
    }

    /// Per-block probability union of two independent reads: `1 - (1-p)(1-q)`.
    pub fn union(self, other: AccessDescriptor) -> AccessDescriptor {
        match (self, other) {
            (AccessDescriptor::FullScan, _) | (_, AccessDescriptor::FullScan) => AccessDescriptor::FullScan,
            (AccessDescriptor::None, x) | (x, AccessDescriptor::None) => x,
            (a, b) => {
                let p = 1.0 - (1.0 - a.probability()) * (1.0 - b.probability());
                AccessDescriptor::Selective {
                    selectivity: p.clamp(0.0, 1.0),
                }
            }
        }
    }

    fn validate(&self) -> Result<()> {
        if let AccessDescriptor::Selective { selectivity } = *self {
            check_fraction(selectivity, "selectivity")?;
        }
        Ok(())
    }
}

fn check_fraction(value: f64, what: &str) -> Result<()> {
    if value.is_finite() && (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::validation(format!("{what} {value} outside [0, 1]")))
    }
}

pub type QueryId = u64;
pub type TemplateId = u32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuerySpec {
    pub query_id: QueryId,
    pub template_id: TemplateId,
    pub profile: BTreeMap<RelationId, AccessDescriptor>,
}

impl QuerySpec {
    pub fn validate(&self, catalog: &Catalog) -> Result<()> {
        for (&id, descriptor) in &self.profile {
            catalog.row_of(id)?;
            descriptor.validate()?;
        }
        Ok(())
    }

    pub fn access(&self, relation: RelationId) -> AccessDescriptor {
        self.profile.get(&relation).copied().unwrap_or(AccessDescriptor::None)
    }
}

/// Operator tree node of a plan document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlanNode {
    SeqScan {
        relation: RelationId,
    },
    IndexScan {
        relation: RelationId,
        index: RelationId,
        selectivity: f64,
    },
    /// `children` is `[outer, inner]`; the inner side runs `loop_count` times.
    NestedLoop {
        loop_count: u32,
        children: Vec<PlanNode>,
    },
}

impl PlanNode {
    pub fn nested_loop(outer: PlanNode, inner: PlanNode, loop_count: u32) -> Self {
        PlanNode::NestedLoop {
            loop_count,
            children: vec![outer, inner],
        }
    }
}

/// One query per document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanDocument {
    pub query_id: QueryId,
    pub template_id: TemplateId,
    pub root: PlanNode,
}

impl PlanDocument {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Converts a plan tree into per-relation access descriptors.
///
/// Sequential scans read every block. An index scan with selectivity `p`
/// reads fraction `p` of the base relation and of the index; on the inner
/// side of a nested loop that fraction becomes `min(1, p * loop_count)`
/// (loop counts multiply through nested inner sides). Repeated accesses to
/// one relation are merged with [`AccessDescriptor::union`].
pub fn parse_plan(plan: &PlanDocument, catalog: &Catalog) -> Result<QuerySpec> {
    let mut profile = BTreeMap::new();
    walk(&plan.root, 1.0, catalog, &mut profile)?;
    Ok(QuerySpec {
        query_id: plan.query_id,
        template_id: plan.template_id,
        profile,
    })
}

fn walk(
    node: &PlanNode,
    loops: f64,
    catalog: &Catalog,
    profile: &mut BTreeMap<RelationId, AccessDescriptor>,
) -> Result<()> {
    let mut merge = |id: RelationId, access: AccessDescriptor| {
        let slot = profile.entry(id).or_insert(AccessDescriptor::None);
        *slot = slot.union(access);
    };
    match node {
        PlanNode::SeqScan { relation } => {
            catalog.row_of(*relation)?;
            merge(*relation, AccessDescriptor::FullScan);
        }
        PlanNode::IndexScan {
            relation,
            index,
            selectivity,
        } => {
            check_fraction(*selectivity, "selectivity")?;
            if catalog.relation(*relation)?.kind != RelationKind::Base {
                return Err(Error::validation(format!(
                    "index scan target {relation} is not a base relation"
                )));
            }
            if catalog.relation(*index)?.kind != RelationKind::Index {
                return Err(Error::validation(format!("relation {index} is not an index")));
            }
            let p = (selectivity * loops).min(1.0);
            merge(*relation, AccessDescriptor::Selective { selectivity: p });
            merge(*index, AccessDescriptor::Selective { selectivity: p });
        }
        PlanNode::NestedLoop { loop_count, children } => {
            if *loop_count < 1 {
                return Err(Error::validation("nested loop with loop_count 0"));
            }
            let [outer, inner] = children.as_slice() else {
                return Err(Error::validation(format!(
                    "nested loop needs exactly 2 children, found {}",
                    children.len()
                )));
            };
            walk(outer, loops, catalog, profile)?;
            walk(inner, loops * f64::from(*loop_count), catalog, profile)?;
        }
    }
    Ok(())
}

/// Ragged relation x block matrix at full resolution. Row `i` has
/// `block_count` entries of relation `i` in catalog order.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockMatrix {
    rows: Vec<Vec<f64>>,
}

impl BlockMatrix {
    pub fn zeros(catalog: &Catalog) -> Self {
        Self {
            rows: catalog.relations().iter().map(|r| vec![0.0; r.block_count]).collect(),
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        Self { rows }
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.rows[i]
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn same_shape(&self, other: &BlockMatrix) -> bool {
        self.rows.len() == other.rows.len() && self.rows.iter().zip(&other.rows).all(|(a, b)| a.len() == b.len())
    }

    pub fn matches_catalog(&self, catalog: &Catalog) -> bool {
        self.rows.len() == catalog.len()
            && self
                .rows
                .iter()
                .zip(catalog.relations())
                .all(|(row, rel)| row.len() == rel.block_count)
    }

    pub fn count_nonzero(&self) -> usize {
        self.rows.iter().flatten().filter(|&&v| v != 0.0).count()
    }

    pub(crate) fn shape_string(&self) -> String {
        let lens: Vec<String> = self.rows.iter().map(|r| r.len().to_string()).collect();
        format!("[{}]", lens.join(","))
    }
}

/// Full-resolution access probabilities of a query.
pub fn access_matrix(spec: &QuerySpec, catalog: &Catalog) -> Result<BlockMatrix> {
    spec.validate(catalog)?;
    let mut matrix = BlockMatrix::zeros(catalog);
    for (&id, descriptor) in &spec.profile {
        let p = descriptor.probability();
        matrix.row_mut(catalog.row_of(id)?).fill(p);
    }
    Ok(matrix)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn catalog() -> Catalog {
        Catalog::new(vec![
            RelationMeta::new(1, "orders", RelationKind::Base, 4),
            RelationMeta::new(2, "orders_pk", RelationKind::Index, 2),
            RelationMeta::new(3, "items", RelationKind::Base, 6),
        ])
        .unwrap()
    }

    fn doc(root: PlanNode) -> PlanDocument {
        PlanDocument {
            query_id: 1,
            template_id: 0,
            root,
        }
    }

    fn selectivity(spec: &QuerySpec, id: RelationId) -> f64 {
        spec.access(id).probability()
    }

    #[test]
    fn seq_scan_is_full_scan() {
        let spec = parse_plan(&doc(PlanNode::SeqScan { relation: 3 }), &catalog()).unwrap();
        assert_eq!(spec.profile.len(), 1);
        assert_eq!(spec.access(3), AccessDescriptor::FullScan);
    }

    #[test]
    fn index_scan_reads_relation_and_index() {
        let root = PlanNode::IndexScan {
            relation: 1,
            index: 2,
            selectivity: 0.10,
        };
        let spec = parse_plan(&doc(root), &catalog()).unwrap();
        assert_eq!(spec.access(1), AccessDescriptor::Selective { selectivity: 0.10 });
        assert_eq!(spec.access(2), AccessDescriptor::Selective { selectivity: 0.10 });
    }

    #[test]
    fn nested_loop_scales_inner_selectivity() {
        let inner = PlanNode::IndexScan {
            relation: 1,
            index: 2,
            selectivity: 0.02,
        };
        let root = PlanNode::nested_loop(PlanNode::SeqScan { relation: 3 }, inner, 10);
        let spec = parse_plan(&doc(root), &catalog()).unwrap();
        assert!((selectivity(&spec, 1) - 0.20).abs() < 1e-12);
        assert!((selectivity(&spec, 2) - 0.20).abs() < 1e-12);
        assert_eq!(spec.access(3), AccessDescriptor::FullScan);
    }

    #[test]
    fn nested_loop_caps_at_one() {
        let inner = PlanNode::IndexScan {
            relation: 1,
            index: 2,
            selectivity: 0.3,
        };
        let root = PlanNode::nested_loop(PlanNode::SeqScan { relation: 3 }, inner, 5);
        let spec = parse_plan(&doc(root), &catalog()).unwrap();
        assert_eq!(selectivity(&spec, 1), 1.0);
    }

    #[test]
    fn repeated_relation_uses_probability_union() {
        let scan = |p| PlanNode::IndexScan {
            relation: 1,
            index: 2,
            selectivity: p,
        };
        let root = PlanNode::nested_loop(scan(0.5), scan(0.2), 1);
        let spec = parse_plan(&doc(root), &catalog()).unwrap();
        assert!((selectivity(&spec, 1) - 0.6).abs() < 1e-12);
    }

    #[test]
    fn rejects_unknown_relation_and_bad_selectivity() {
        let err = parse_plan(&doc(PlanNode::SeqScan { relation: 99 }), &catalog()).unwrap_err();
        assert!(matches!(err, Error::UnknownRelation(99)));

        let root = PlanNode::IndexScan {
            relation: 1,
            index: 2,
            selectivity: 1.5,
        };
        let err = parse_plan(&doc(root), &catalog()).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn rejects_malformed_nested_loop() {
        let root = PlanNode::NestedLoop {
            loop_count: 0,
            children: vec![PlanNode::SeqScan { relation: 1 }, PlanNode::SeqScan { relation: 3 }],
        };
        assert!(parse_plan(&doc(root), &catalog()).is_err());
        let root = PlanNode::NestedLoop {
            loop_count: 2,
            children: vec![PlanNode::SeqScan { relation: 1 }],
        };
        assert!(parse_plan(&doc(root), &catalog()).is_err());
    }

    #[test]
    fn access_matrix_rows() {
        let cat = catalog();
        let mut profile = BTreeMap::new();
        profile.insert(1, AccessDescriptor::FullScan);
        profile.insert(3, AccessDescriptor::selective(0.5).unwrap());
        let spec = QuerySpec {
            query_id: 0,
            template_id: 0,
            profile,
        };
        let m = access_matrix(&spec, &cat).unwrap();
        assert_eq!(m.row(0), &[1.0, 1.0, 1.0, 1.0]);
        assert_eq!(m.row(1), &[0.0, 0.0]);
        assert_eq!(m.row(2), &[0.5; 6]);
        assert!(m.matches_catalog(&cat));
    }

    #[test]
    fn catalog_validation() {
        assert!(Catalog::new(vec![]).is_err());
        assert!(Catalog::new(vec![RelationMeta::new(1, "a", RelationKind::Base, 0)]).is_err());
        assert!(Catalog::new(vec![
            RelationMeta::new(1, "a", RelationKind::Base, 1),
            RelationMeta::new(1, "b", RelationKind::Base, 1),
        ])
        .is_err());
    }

    #[test]
    fn plan_document_json_shape() {
        let text = r#"{
            "query_id": 7,
            "template_id": 3,
            "root": {
                "kind": "nested_loop",
                "loop_count": 10,
                "children": [
                    {"kind": "seq_scan", "relation": 3},
                    {"kind": "index_scan", "relation": 1, "index": 2, "selectivity": 0.02}
                ]
            }
        }"#;
        let plan = PlanDocument::from_json(text).unwrap();
        assert_eq!(plan.query_id, 7);
        let spec = parse_plan(&plan, &catalog()).unwrap();
        assert!((selectivity(&spec, 2) - 0.2).abs() < 1e-12);

        let cat = Catalog::from_json(r#"[{"id":1,"name":"a","kind":"base","block_count":4}]"#).unwrap();
        assert_eq!(cat.total_blocks(), 4);
        assert!(Catalog::from_json("[]").is_err());
    }
}
