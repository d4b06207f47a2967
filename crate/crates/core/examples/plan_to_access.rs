//! A plan document parsed into per-relation access descriptors and the
//! block-level access matrix a scheduler sees.

use bufsched::catalog::{access_matrix, parse_plan, Catalog, PlanDocument};

const CATALOG: &str = r#"[
  {"id": 1, "name": "customer", "kind": "base", "block_count": 8},
  {"id": 2, "name": "orders", "kind": "base", "block_count": 10},
  {"id": 3, "name": "orders_idx", "kind": "index", "block_count": 4}
]"#;

const PLAN: &str = r#"{
  "query_id": 42,
  "template_id": 3,
  "root": {
    "kind": "nested_loop",
    "loop_count": 2,
    "children": [
      {"kind": "seq_scan", "relation": 1},
      {"kind": "index_scan", "relation": 2, "index": 3, "selectivity": 0.2}
    ]
  }
}"#;

fn main() -> bufsched::Result<()> {
    let catalog = Catalog::from_json(CATALOG)?;
    let plan = PlanDocument::from_json(PLAN)?;
    let spec = parse_plan(&plan, &catalog)?;
    for rel in catalog.relations() {
        println!("{:>10}: {:?}", rel.name, spec.access(rel.id));
    }
    let access = access_matrix(&spec, &catalog)?;
    for (rel, row) in catalog.relations().iter().zip(access.rows()) {
        println!("{:>10}: {row:?}", rel.name);
    }
    Ok(())
}
