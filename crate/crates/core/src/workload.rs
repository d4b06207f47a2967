//! Synthetic catalogs, query templates and query instances.
//!
//! Templates are left-deep plan skeletons over a few base relations; indexed
//! relations are read through index scans whose selectivity is a range.
//! Instances draw a concrete selectivity per scan, so queries of one
//! template overlap heavily while templates sharing relations overlap
//! partially. That correlation is what a buffer-aware scheduler exploits.

use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bufferpool::BlockRef;
use crate::catalog::{
    parse_plan, AccessDescriptor, Catalog, PlanDocument, PlanNode, QuerySpec, RelationId, RelationKind, RelationMeta,
    TemplateId,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkloadSpec {
    pub relation_count: usize,
    /// Fraction of relations that are indexes; each index belongs to a
    /// distinct base relation.
    pub index_ratio: f64,
    pub min_blocks: usize,
    pub max_blocks: usize,
    pub template_count: usize,
    /// Base relations joined by one template.
    pub min_fanout: usize,
    pub max_fanout: usize,
    pub min_selectivity: f64,
    pub max_selectivity: f64,
    /// Relative width of a template's selectivity range around its centre.
    pub selectivity_spread: f64,
    /// Chance that an indexed relation is still read by a sequential scan.
    pub seq_scan_fraction: f64,
    pub max_loop_count: u32,
    pub query_count: usize,
    /// Fraction of templates held out for testing (0 disables the split).
    pub test_template_fraction: f64,
    pub seed: u64,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        Self {
            relation_count: 12,
            index_ratio: 1.0 / 3.0,
            min_blocks: 64,
            max_blocks: 512,
            template_count: 40,
            min_fanout: 1,
            max_fanout: 2,
            min_selectivity: 0.05,
            max_selectivity: 0.3,
            selectivity_spread: 0.25,
            seq_scan_fraction: 0.0,
            max_loop_count: 2,
            query_count: 400,
            test_template_fraction: 0.0,
            seed: 0,
        }
    }
}

impl WorkloadSpec {
    pub fn index_count(&self) -> usize {
        (self.relation_count as f64 * self.index_ratio).round() as usize
    }

    pub fn base_count(&self) -> usize {
        self.relation_count - self.index_count().min(self.relation_count)
    }

    pub fn test_template_count(&self) -> usize {
        if self.test_template_fraction <= 0.0 {
            return 0;
        }
        let n = (self.template_count as f64 * self.test_template_fraction).round() as usize;
        n.clamp(1, self.template_count.saturating_sub(1))
    }

    pub fn validate(&self) -> Result<()> {
        let fraction = |v: f64, what: &str| {
            if v.is_finite() && (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::validation(format!("{what} {v} outside [0, 1]")))
            }
        };
        fraction(self.index_ratio, "index_ratio")?;
        fraction(self.min_selectivity, "min_selectivity")?;
        fraction(self.max_selectivity, "max_selectivity")?;
        fraction(self.seq_scan_fraction, "seq_scan_fraction")?;
        fraction(self.test_template_fraction, "test_template_fraction")?;
        if !(self.selectivity_spread.is_finite() && self.selectivity_spread >= 0.0) {
            return Err(Error::validation("selectivity_spread must be non-negative"));
        }
        if self.relation_count == 0 || self.template_count == 0 || self.query_count == 0 {
            return Err(Error::validation(
                "relation, template and query counts must be positive",
            ));
        }
        if self.min_blocks == 0 || self.min_blocks > self.max_blocks {
            return Err(Error::validation(format!(
                "empty block range [{}, {}]",
                self.min_blocks, self.max_blocks
            )));
        }
        if self.min_selectivity > self.max_selectivity {
            return Err(Error::validation("empty selectivity range"));
        }
        if self.min_fanout == 0 || self.min_fanout > self.max_fanout {
            return Err(Error::validation("empty fan-out range"));
        }
        if self.index_count() > self.base_count() {
            return Err(Error::validation(format!(
                "{} indexes need at least as many base relations, have {}",
                self.index_count(),
                self.base_count()
            )));
        }
        if self.max_fanout > self.base_count() {
            return Err(Error::validation(format!(
                "template fan-out {} exceeds {} base relations",
                self.max_fanout,
                self.base_count()
            )));
        }
        if self.max_loop_count == 0 {
            return Err(Error::validation("max_loop_count must be at least 1"));
        }
        if self.test_template_fraction > 0.0 && self.template_count < 2 {
            return Err(Error::validation("a template split needs at least 2 templates"));
        }
        Ok(())
    }
}

/// Plan skeleton; index scans carry a selectivity range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TemplateNode {
    SeqScan {
        relation: RelationId,
    },
    IndexScan {
        relation: RelationId,
        index: RelationId,
        min_selectivity: f64,
        max_selectivity: f64,
    },
    NestedLoop {
        loop_count: u32,
        children: Vec<TemplateNode>,
    },
}

impl TemplateNode {
    fn instantiate<R: Rng + ?Sized>(&self, rng: &mut R) -> PlanNode {
        match self {
            TemplateNode::SeqScan { relation } => PlanNode::SeqScan { relation: *relation },
            TemplateNode::IndexScan {
                relation,
                index,
                min_selectivity,
                max_selectivity,
            } => PlanNode::IndexScan {
                relation: *relation,
                index: *index,
                selectivity: rng.random_range(*min_selectivity..=*max_selectivity),
            },
            TemplateNode::NestedLoop { loop_count, children } => PlanNode::NestedLoop {
                loop_count: *loop_count,
                children: children.iter().map(|c| c.instantiate(rng)).collect(),
            },
        }
    }

    fn collect_ranges(&self, out: &mut Vec<(f64, f64)>) {
        match self {
            TemplateNode::SeqScan { .. } => {}
            TemplateNode::IndexScan {
                min_selectivity,
                max_selectivity,
                ..
            } => out.push((*min_selectivity, *max_selectivity)),
            TemplateNode::NestedLoop { children, .. } => children.iter().for_each(|c| c.collect_ranges(out)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Template {
    pub template_id: TemplateId,
    pub root: TemplateNode,
}

impl Template {
    /// Selectivity ranges of the index scans, depth-first.
    pub fn selectivity_ranges(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        self.root.collect_ranges(&mut out);
        out
    }
}

/// Index-scan selectivities of a plan, depth-first.
pub fn plan_selectivities(node: &PlanNode) -> Vec<f64> {
    fn walk(node: &PlanNode, out: &mut Vec<f64>) {
        match node {
            PlanNode::SeqScan { .. } => {}
            PlanNode::IndexScan { selectivity, .. } => out.push(*selectivity),
            PlanNode::NestedLoop { children, .. } => children.iter().for_each(|c| walk(c, out)),
        }
    }
    let mut out = Vec::new();
    walk(node, &mut out);
    out
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TemplateSplit {
    pub train: BTreeSet<TemplateId>,
    pub test: BTreeSet<TemplateId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Workload {
    pub catalog: Catalog,
    pub templates: Vec<Template>,
    pub plans: Vec<PlanDocument>,
    pub queries: Vec<QuerySpec>,
    pub split: TemplateSplit,
}

impl Workload {
    pub fn train_queries(&self) -> Vec<QuerySpec> {
        self.queries
            .iter()
            .filter(|q| self.split.train.contains(&q.template_id))
            .cloned()
            .collect()
    }

    pub fn test_queries(&self) -> Vec<QuerySpec> {
        self.queries
            .iter()
            .filter(|q| self.split.test.contains(&q.template_id))
            .cloned()
            .collect()
    }

    /// Writes `catalog.json`, `templates.json` and one plan document per
    /// query under `plans/`.
    pub fn export(&self, dir: &Path) -> Result<()> {
        let plans_dir = dir.join("plans");
        std::fs::create_dir_all(&plans_dir).map_err(|e| Error::io(&plans_dir, e))?;
        let write = |path: &Path, text: String| std::fs::write(path, text).map_err(|e| Error::io(path, e));
        write(&dir.join("catalog.json"), self.catalog.to_json()?)?;
        write(
            &dir.join("templates.json"),
            serde_json::to_string_pretty(&self.templates)?,
        )?;
        for plan in &self.plans {
            write(
                &plans_dir.join(format!("query_{:05}.json", plan.query_id)),
                plan.to_json()?,
            )?;
        }
        Ok(())
    }
}

pub fn generate_workload(spec: &WorkloadSpec) -> Result<Workload> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    // base relations; the first `index_count` of a random permutation get an index
    let base_count = spec.base_count();
    let indexed: BTreeSet<usize> = sample(&mut rng, base_count, spec.index_count()).into_iter().collect();
    let mut relations = Vec::with_capacity(spec.relation_count);
    let mut bases: Vec<(RelationId, Option<RelationId>)> = Vec::with_capacity(base_count);
    let mut next_id: RelationId = 1;
    for b in 0..base_count {
        let blocks = rng.random_range(spec.min_blocks..=spec.max_blocks);
        let base_id = next_id;
        next_id += 1;
        relations.push(RelationMeta::new(
            base_id,
            format!("rel_{b:02}"),
            RelationKind::Base,
            blocks,
        ));
        let index_id = if indexed.contains(&b) {
            let upper = (blocks / 2).max(spec.min_blocks);
            let index_blocks = rng.random_range(spec.min_blocks.min(upper)..=upper);
            let id = next_id;
            next_id += 1;
            relations.push(RelationMeta::new(
                id,
                format!("rel_{b:02}_idx"),
                RelationKind::Index,
                index_blocks,
            ));
            Some(id)
        } else {
            None
        };
        bases.push((base_id, index_id));
    }
    let catalog = Catalog::new(relations)?;

    let mut templates = Vec::with_capacity(spec.template_count);
    for t in 0..spec.template_count {
        let fanout = rng.random_range(spec.min_fanout..=spec.max_fanout);
        let chosen = sample(&mut rng, base_count, fanout).into_vec();
        let mut root: Option<TemplateNode> = None;
        for b in chosen {
            let (relation, index) = bases[b];
            let scan = match index {
                Some(index) if !rng.random_bool(spec.seq_scan_fraction) => {
                    let centre = rng.random_range(spec.min_selectivity..=spec.max_selectivity);
                    let half = centre * spec.selectivity_spread / 2.0;
                    TemplateNode::IndexScan {
                        relation,
                        index,
                        min_selectivity: (centre - half).max(0.0),
                        max_selectivity: (centre + half).min(1.0),
                    }
                }
                _ => TemplateNode::SeqScan { relation },
            };
            root = Some(match root {
                None => scan,
                Some(outer) => {
                    let loop_count = match scan {
                        TemplateNode::IndexScan { .. } => rng.random_range(1..=spec.max_loop_count),
                        _ => 1,
                    };
                    TemplateNode::NestedLoop {
                        loop_count,
                        children: vec![outer, scan],
                    }
                }
            });
        }
        templates.push(Template {
            template_id: t as TemplateId,
            root: root.expect("fan-out is at least 1"),
        });
    }

    let test: BTreeSet<TemplateId> = sample(&mut rng, spec.template_count, spec.test_template_count())
        .into_iter()
        .map(|t| t as TemplateId)
        .collect();
    let train = (0..spec.template_count as TemplateId)
        .filter(|t| !test.contains(t))
        .collect();

    let mut plans = Vec::with_capacity(spec.query_count);
    let mut queries = Vec::with_capacity(spec.query_count);
    for query_id in 0..spec.query_count as u64 {
        let template = &templates[rng.random_range(0..templates.len())];
        let plan = PlanDocument {
            query_id,
            template_id: template.template_id,
            root: template.root.instantiate(&mut rng),
        };
        queries.push(parse_plan(&plan, &catalog)?);
        plans.push(plan);
    }

    Ok(Workload {
        catalog,
        templates,
        plans,
        queries,
        split: TemplateSplit { train, test },
    })
}

/// How probabilistic access profiles become concrete reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReadMode {
    /// Block `j` is read iff its fixed pseudo-random threshold is below the
    /// access probability. Same profile, same reads; lower selectivities
    /// read subsets of higher ones.
    #[default]
    Deterministic,
    /// Each block is read independently with the access probability.
    Sampled,
}

/// Fixed per-block threshold in `[0, 1)`.
pub fn block_threshold(relation: RelationId, block: u32) -> f64 {
    let mut z = (u64::from(relation) << 32 | u64::from(block)).wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 53) as f64
}

/// Concrete block reads of a query: relations in catalog order, blocks
/// ascending within a relation.
pub fn materialize_reads<R: Rng + ?Sized>(
    spec: &QuerySpec,
    catalog: &Catalog,
    mode: ReadMode,
    rng: &mut R,
) -> Result<Vec<BlockRef>> {
    spec.validate(catalog)?;
    let mut reads = Vec::new();
    for rel in catalog.relations() {
        let access = spec.access(rel.id);
        let p = access.probability();
        let blocks = 0..rel.block_count as u32;
        match access {
            AccessDescriptor::None => {}
            AccessDescriptor::FullScan => reads.extend(blocks.map(|b| BlockRef::new(rel.id, b))),
            AccessDescriptor::Selective { .. } => match mode {
                ReadMode::Deterministic => reads.extend(
                    blocks
                        .filter(|&b| block_threshold(rel.id, b) < p)
                        .map(|b| BlockRef::new(rel.id, b)),
                ),
                ReadMode::Sampled => {
                    for b in blocks {
                        if rng.random::<f64>() < p {
                            reads.push(BlockRef::new(rel.id, b));
                        }
                    }
                }
            },
        }
    }
    Ok(reads)
}
